"""Bootstrap tests of practically sufficient follow-up in mixture cure models
with categorical covariates."""

__version__ = "0.1.0"

from .bootstrap import BootstrapConfig, BootstrapDraws, bootstrap_distributions
from .exceptions import (
    ConfigError,
    CureFollowUpError,
    DataError,
    DegenerateBootstrap,
    DegenerateDomain,
    DegenerateLevel,
    DomainError,
    NoEvents,
    SingularBoundarySystem,
)
from .monotone import SmoothedGrenander, fit_level, grenander, lcm, smoothed_grenander_at
from .procedures import (
    SufficientFollowUpTest,
    TestConfig,
    TestReport,
    method1,
    method2,
    run_tests,
)
from .simulation import CaseSpec, make_setting, run_case, run_grid
from .survival import KaplanMeier, SurvivalDataset, km_censoring, km_event

__all__ = [
    "BootstrapConfig", "BootstrapDraws", "CaseSpec", "ConfigError", "CureFollowUpError",
    "DataError", "DegenerateBootstrap", "DegenerateDomain", "DegenerateLevel", "DomainError",
    "KaplanMeier", "NoEvents", "SingularBoundarySystem", "SmoothedGrenander",
    "SufficientFollowUpTest", "SurvivalDataset", "TestConfig", "TestReport",
    "bootstrap_distributions", "fit_level", "grenander", "km_censoring", "km_event", "lcm",
    "make_setting", "method1", "method2", "run_case", "run_grid", "run_tests",
    "smoothed_grenander_at",
]
