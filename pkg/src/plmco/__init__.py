"""Cross-Entropy optimization with per-iteration cross-validated tuning.

Submodules:

* ``distributions``: Gaussian / mixture parameters, weighted MLE, EM, smoothing
* ``objectives``: benchmark test functions and their known optima
* ``mc_integration``: importance-sampling estimators and small MC labs
* ``ce_core``: the CE loop with fixed elite fraction
* ``crossval``: PLMCO-CE, the k-fold CV choice of elite fraction / components
* ``bench``: multi-trial runner, checkpoint statistics, CSV
* ``plotting``: SVG convergence figures
* ``cli``: command line entry point
"""

from .ce_core import CEConfig, TrialResult, run_ce
from .crossval import CEMX_GRID, CESX_GRID, CandidateGrid, run_plmco_ce
from .distributions import GaussianParams, MixtureParams, Smoothing
from .objectives import make_problem

__version__ = "0.1.0"

__all__ = [
    "CEConfig",
    "CandidateGrid",
    "CEMX_GRID",
    "CESX_GRID",
    "GaussianParams",
    "MixtureParams",
    "Smoothing",
    "TrialResult",
    "make_problem",
    "run_ce",
    "run_plmco_ce",
]
