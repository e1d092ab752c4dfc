"""
Application Constants
"""

from enum import Enum
from typing import Dict


class NormVariant(Enum):
    """Norm families on the horizontal space."""
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"
    POLYTOPE = "polytope"
    ELLIPSOID = "ellipsoid"


class Verdict(Enum):
    """Non-singularity verdicts."""
    NONSINGULAR = "nonsingular"
    SINGULAR = "singular"
    UNDECIDABLE = "undecidable"


class DiscrepancyMethod(Enum):
    """Ball discrepancy proxies."""
    POINTWISE = "pointwise"
    HAUSDORFF = "hausdorff"


class LatticePreset(Enum):
    """Shipped lattices."""
    ZD = "zd"
    H3Z = "h3z"
    ZXH3Z = "zxh3z"
    CUSTOM = "custom"


class GeneratorPreset(Enum):
    """Shipped generating sets."""
    STANDARD = "standard"
    PRODUCT = "product"
    SKEW = "skew"


class Command(Enum):
    """CLI subcommands."""
    VALIDATE = "validate"
    NONSINGULAR = "nonsingular"
    ABNORMAL = "abnormal"
    GEODESIC = "geodesic"
    DISTANCE = "distance"
    WORDBALL = "wordball"
    CONVERGE = "converge"


class ExitCode(Enum):
    """Process exit codes."""
    OK = 0
    UNEXPECTED = 1
    DOMAIN_ERROR = 2
    BUDGET_EXHAUSTED = 3


# Numerical tolerances
NONSINGULAR_THRESHOLD = 1e-6
SINGULAR_THRESHOLD = 1e-12
ABNORMAL_TOLERANCE = 1e-10
ENDPOINT_TOLERANCE = 1e-8
UNIT_TOLERANCE = 1e-9
TIE_TOLERANCE = 1e-12
WITNESS_TIE_TOLERANCE = 1e-7

# Shooting
SHOOTING_T_MIN = 1e-9
CENTRAL_MOMENTUM_RANGE = (1e-2, 1e2)
MAX_POLISH_CANDIDATES = 8

# Sampling
FIBONACCI_MAX_DIM = 3
COVERING_PROBES = 4096
COVERING_SAFETY = 2.0  # 探针估计的覆盖半径放大倍数

# Convergence
ESTIMATOR_GAP = 0.5
UNRELIABLE_FRACTION = 0.1
FULL_SPHERE_LIMIT = 100_000
SPHERE_SAMPLE_SIZE = 10_000

# Output
CSV_COMMENT_PREFIX = "# "
ARTIFACT_NAMES: Dict[str, str] = {
    "profile": "profile.csv",
    "fit": "fit.json",
    "journal": "journal.json",
    "cloud": "cloud_{n}.csv",
}
