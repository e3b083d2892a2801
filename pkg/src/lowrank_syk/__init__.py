"""The lowrank_syk library."""

# We disable the following Flake8 checks:
# - "Module level import not at top of file (E402)" here because the constants
#   need to be defined early to prevent a circular import issue.
# - "Module imported but unused (F401)" here because although this import is not
#   directly used, it populates the value package_name.__version__, which is
#   used to get version information about this Python package.

SCHEMA_VERSION = 1

DEFAULT_MAX_SITES = 16
DEFAULT_SPECKLE_GRID_POINTS = 128
DEFAULT_SPECKLE_HALF_EXTENT = 6.0
DEFAULT_SPECKLE_CONTRAST = 0.3
DEFAULT_SPECKLE_CORRELATION_LENGTH = 0.5
DEFAULT_SD_HALF_WIDTH = 50.0
DEFAULT_SD_POINTS = 4096
DEFAULT_SD_MIXING = 0.3

# Mean consecutive-gap ratios of the standard spectral ensembles
GAP_RATIO_REFERENCE = {
    "poisson": 0.386,
    "goe": 0.536,
    "gue": 0.600,
    "gse": 0.674,
}

# Leading coefficient of D(P||Q_R) for R summed Gaussian products
KL_ASYMPTOTIC_CONSTANT = 0.75

from ._version import __version__  # noqa: F401, E402
from .main import do_command  # noqa: E402

__all__ = [
    "DEFAULT_MAX_SITES",
    "DEFAULT_SD_HALF_WIDTH",
    "DEFAULT_SD_MIXING",
    "DEFAULT_SD_POINTS",
    "DEFAULT_SPECKLE_CONTRAST",
    "DEFAULT_SPECKLE_CORRELATION_LENGTH",
    "DEFAULT_SPECKLE_GRID_POINTS",
    "DEFAULT_SPECKLE_HALF_EXTENT",
    "GAP_RATIO_REFERENCE",
    "KL_ASYMPTOTIC_CONSTANT",
    "SCHEMA_VERSION",
    "do_command",
]
