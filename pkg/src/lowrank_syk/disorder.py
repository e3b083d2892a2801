"""Random coupling ensembles: dense Gaussian, rank-two, low-rank, and modSYK.

A CouplingTensor stores the independent couplings J_ijkl of
H = sum_{i<j, k<l} J_ijkl c^dagger_i c^dagger_j c_k c_l as a Hermitian P x P
matrix over the canonical pairs of fock.canonical_pairs.
"""

# Standard Python Libraries
from dataclasses import dataclass
from enum import Enum
import functools
from importlib import resources
import json
import logging
from pathlib import Path
from typing import Optional, Tuple, Union

# Third-Party Libraries
from cyhy_logging import CYHY_ROOT_LOGGER
from jsonschema import SchemaError, ValidationError, validate
import numpy as np
from scipy import special, stats

from . import SCHEMA_VERSION
from .errors import DomainError, OutputError
from .fock import canonical_pairs

logger = logging.getLogger(f"{CYHY_ROOT_LOGGER}.{__name__}")


class CouplingClass(str, Enum):
    """Index structure of a coupling J_ijkl."""

    DIAGONAL = "D"
    ALMOST_DIAGONAL = "A"
    OFF_DIAGONAL = "O"


class VarianceConvention(str, Enum):
    """Target variance of the independent couplings."""

    DENSE = "Dense2JsqN3"
    REDUCED = "Reduced2JsqN4"


@dataclass(frozen=True)
class BesselScale:
    """Standard deviations of the two Gaussian factors of a product."""

    sigma1: float
    sigma2: float

    def __post_init__(self):
        """Reject nonpositive scales."""
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise DomainError(
                f"Bessel scales must be positive, got {self.sigma1}, {self.sigma2}"
            )

    @property
    def product(self) -> float:
        """Return sigma1 * sigma2."""
        return self.sigma1 * self.sigma2


@dataclass(frozen=True, eq=False)
class RankTwoCoupling:
    """A Hermitian N x N coupling matrix J_ik."""

    n_sites: int
    matrix: np.ndarray
    variance: Optional[float] = None

    def __post_init__(self):
        """Check the shape and exact Hermiticity."""
        if self.matrix.shape != (self.n_sites, self.n_sites):
            raise DomainError(
                f"Rank-two matrix shape {self.matrix.shape} "
                f"does not match N={self.n_sites}"
            )
        if not np.array_equal(self.matrix, self.matrix.conj().T):
            raise DomainError("Rank-two coupling matrix is not Hermitian")


@dataclass(frozen=True, eq=False)
class CouplingTensor:
    """Hermitian four-fermion couplings over canonical pairs."""

    n_sites: int
    matrix: np.ndarray
    variance_convention: VarianceConvention = VarianceConvention.DENSE

    def __post_init__(self):
        """Check the shape and exact Hermiticity of the pair matrix."""
        n_pairs = self.n_sites * (self.n_sites - 1) // 2
        if self.matrix.shape != (n_pairs, n_pairs):
            raise DomainError(
                f"Coupling matrix shape {self.matrix.shape} does not match "
                f"{n_pairs} pairs for N={self.n_sites}"
            )
        if not np.array_equal(self.matrix, self.matrix.conj().T):
            raise DomainError("Coupling tensor is not Hermitian")

    @property
    def n_pairs(self) -> int:
        """Return the number of canonical pairs P."""
        return self.matrix.shape[0]

    @property
    def classes(self) -> np.ndarray:
        """Return the class tag of every pair-of-pairs entry."""
        return coupling_classes(self.n_sites)

    def entry(self, i: int, j: int, k: int, l: int) -> complex:  # noqa: E741
        """Return J_ijkl under the antisymmetric extension."""
        if i == j or k == l:
            return 0j
        sign = 1
        if i > j:
            i, j, sign = j, i, -sign
        if k > l:
            k, l, sign = l, k, -sign  # noqa: E741
        p = pair_index(i, j, self.n_sites)
        q = pair_index(k, l, self.n_sites)
        return sign * complex(self.matrix[p, q])

    def __add__(self, other: "CouplingTensor") -> "CouplingTensor":
        """Sum two tensors entry-wise."""
        if other.n_sites != self.n_sites:
            raise DomainError("Cannot add coupling tensors of different sizes")
        return CouplingTensor(
            self.n_sites, self.matrix + other.matrix, self.variance_convention
        )

    def __mul__(self, factor: float) -> "CouplingTensor":
        """Scale by a real factor."""
        return CouplingTensor(
            self.n_sites, float(factor) * self.matrix, self.variance_convention
        )

    __rmul__ = __mul__


def pair_index(i: int, j: int, n_sites: int) -> int:
    """Return the lexicographic index of the canonical pair (i, j), i < j."""
    # pairs (m, .) with m < i come first
    return i * (2 * n_sites - i - 1) // 2 + (j - i - 1)


def classify_indices(i: int, j: int, k: int, l: int) -> CouplingClass:  # noqa: E741
    """
    Return the class of J_ijkl from its index structure.

    Args:
        i (int): First creation site.
        j (int): Second creation site, j > i.
        k (int): First annihilation site.
        l (int): Second annihilation site, l > k.

    Returns:
        CouplingClass: DIAGONAL when {i,j} = {k,l}, ALMOST_DIAGONAL when the
        pairs share one index, OFF_DIAGONAL when they are disjoint.

    Raises:
        DomainError: If a pair is not sorted.
    """
    if not (i < j and k < l):
        raise DomainError(
            f"Pairs must be sorted (i<j, k<l), got ({i},{j}),({k},{l})"
        )
    shared = len({i, j} & {k, l})
    if shared == 2:
        return CouplingClass.DIAGONAL
    if shared == 1:
        return CouplingClass.ALMOST_DIAGONAL
    return CouplingClass.OFF_DIAGONAL


@functools.cache
def coupling_classes(n_sites: int) -> np.ndarray:
    """Return the P x P array of class tags for N sites."""
    pairs = canonical_pairs(n_sites)
    first, second = pairs[:, 0], pairs[:, 1]
    shared = (
        (first[:, None] == first[None, :]).astype(int)
        + (first[:, None] == second[None, :])
        + (second[:, None] == first[None, :])
        + (second[:, None] == second[None, :])
    )
    classes = np.where(
        shared == 2,
        CouplingClass.DIAGONAL.value,
        np.where(
            shared == 1,
            CouplingClass.ALMOST_DIAGONAL.value,
            CouplingClass.OFF_DIAGONAL.value,
        ),
    )
    classes.flags.writeable = False
    return classes


def class_entries(tensor: CouplingTensor, coupling_class: CouplingClass) -> np.ndarray:
    """Return the independent entries (P <= Q) of one class."""
    upper = np.triu(np.ones((tensor.n_pairs, tensor.n_pairs), dtype=bool))
    selected = upper & (tensor.classes == CouplingClass(coupling_class).value)
    return tensor.matrix[selected]


def _hermitian_draw(
    rng: np.random.Generator,
    diagonal_std: Union[float, np.ndarray],
    off_diagonal_std: Union[float, np.ndarray],
    size: int,
    real: bool,
) -> np.ndarray:
    """Draw a Hermitian matrix with E|x|^2 = std^2 per independent entry."""
    upper = np.triu_indices(size, k=1)
    off_std = np.broadcast_to(off_diagonal_std, (size, size))[upper]
    if real:
        off = rng.standard_normal(off_std.shape) * off_std
    else:
        parts = rng.standard_normal((2,) + off_std.shape)
        off = (parts[0] + 1j * parts[1]) * (off_std / np.sqrt(2.0))
    diag_std = np.broadcast_to(diagonal_std, (size,))
    diagonal = rng.standard_normal(size) * diag_std

    matrix = np.zeros((size, size), dtype=np.complex128)
    matrix[upper] = off
    matrix[(upper[1], upper[0])] = np.conj(off)
    matrix[np.diag_indices(size)] = diagonal
    return matrix


def _check_tensor_sites(n_sites: int) -> None:
    if n_sites < 4:
        raise DomainError(f"Coupling tensors need N >= 4 sites, got {n_sites}")


def dense_variance(n_sites: int, coupling: float) -> float:
    """Return the dense per-entry variance 2 J^2 / N^3."""
    return 2.0 * coupling**2 / n_sites**3


def reduced_variance(n_sites: int, coupling: float) -> float:
    """Return the low-rank off-diagonal variance 2 J^2 / N^4."""
    return 2.0 * coupling**2 / n_sites**4


def rank_two_sigma(n_sites: int, coupling: float) -> float:
    """
    Return the rank-two standard deviation that calibrates lowrank_tensor.

    An off-diagonal low-rank entry is a difference of two independent
    products, so E|J_ijkl|^2 = 2 sigma^4 and sigma^2 = J / N^2 gives 2 J^2 / N^4.
    """
    return float(np.sqrt(coupling) / n_sites)


def sample_dense_gaussian(
    n_sites: int, coupling: float, rng: np.random.Generator, real: bool = False
) -> CouplingTensor:
    """
    Sample dense cSYK couplings with E|J_ijkl|^2 = 2 J^2 / N^3.

    Args:
        n_sites (int): The number of sites N >= 4.
        coupling (float): The energy scale J.
        rng (np.random.Generator): The seeded stream to draw from.
        real (bool): Draw real couplings instead of complex ones.

    Returns:
        CouplingTensor: Hermitian couplings with real Gaussian diagonal entries.

    Raises:
        DomainError: If N < 4.
    """
    _check_tensor_sites(n_sites)
    std = np.sqrt(dense_variance(n_sites, coupling))
    n_pairs = n_sites * (n_sites - 1) // 2
    matrix = _hermitian_draw(rng, std, std, n_pairs, real)
    return CouplingTensor(n_sites, matrix, VarianceConvention.DENSE)


def sample_modSYK(  # noqa: N802
    n_sites: int,
    sigma_d: float,
    sigma_a: float,
    sigma_o: float,
    rng: np.random.Generator,
    real: bool = False,
) -> CouplingTensor:
    """
    Sample Gaussian couplings whose standard deviation depends on the class.

    Args:
        n_sites (int): The number of sites N >= 4.
        sigma_d (float): Standard deviation of DIAGONAL entries.
        sigma_a (float): Standard deviation of ALMOST_DIAGONAL entries.
        sigma_o (float): Standard deviation of OFF_DIAGONAL entries.
        rng (np.random.Generator): The seeded stream to draw from.
        real (bool): Draw real couplings instead of complex ones.

    Returns:
        CouplingTensor: Hermitian class-resolved couplings.

    Raises:
        DomainError: If N < 4 or a sigma is negative.
    """
    _check_tensor_sites(n_sites)
    if min(sigma_d, sigma_a, sigma_o) < 0:
        raise DomainError("modSYK standard deviations must be nonnegative")
    classes = coupling_classes(n_sites)
    off_std = np.where(
        classes == CouplingClass.OFF_DIAGONAL.value,
        sigma_o,
        np.where(classes == CouplingClass.ALMOST_DIAGONAL.value, sigma_a, sigma_d),
    )
    matrix = _hermitian_draw(rng, sigma_d, off_std, classes.shape[0], real)
    return CouplingTensor(n_sites, matrix, VarianceConvention.DENSE)


def sample_rank_two(
    n_sites: int, sigma: float, rng: np.random.Generator, real: bool = False
) -> RankTwoCoupling:
    """
    Sample a Hermitian Gaussian matrix with E|J_ik|^2 = sigma^2.

    Raises:
        DomainError: If sigma is negative.
    """
    if sigma < 0:
        raise DomainError(f"sigma must be nonnegative, got {sigma}")
    matrix = _hermitian_draw(rng, sigma, sigma, n_sites, real)
    return RankTwoCoupling(n_sites, matrix, sigma**2)


def lowrank_tensor(j2: RankTwoCoupling) -> Tuple[CouplingTensor, np.ndarray]:
    """
    Build the low-rank tensor J_ik J_jl - J_jk J_il and its mass matrix.

    Args:
        j2 (RankTwoCoupling): The rank-two coupling J_ik.

    Returns:
        Tuple[CouplingTensor, np.ndarray]:
            - The coupling tensor in the reduced variance convention.
            - The mass matrix M_il = -sum_j J_ij J_jl.
    """
    _check_tensor_sites(j2.n_sites)
    pairs = canonical_pairs(j2.n_sites)
    first, second = pairs[:, 0], pairs[:, 1]
    coupling = j2.matrix
    matrix = (
        coupling[first[:, None], first[None, :]]
        * coupling[second[:, None], second[None, :]]
        - coupling[second[:, None], first[None, :]]
        * coupling[first[:, None], second[None, :]]
    )
    # FMA rounding can leave an imaginary residue on the diagonal
    matrix = 0.5 * (matrix + matrix.conj().T)
    mass = -(coupling @ coupling)
    mass = 0.5 * (mass + mass.conj().T)
    tensor = CouplingTensor(j2.n_sites, matrix, VarianceConvention.REDUCED)
    return tensor, mass


def product_terms(real: bool) -> int:
    """
    Return how many independent Gaussian products build one off-diagonal entry.

    Real couplings give two products; the real part of a complex entry gives
    four, each with half the factor variance.
    """
    return 2 if real else 4


def bessel_pdf(x: Union[float, np.ndarray], scale: BesselScale) -> np.ndarray:
    """
    Return the density K0(|x|/s)/(pi s) of a Gaussian product, s = sigma1 sigma2.

    The density diverges logarithmically at x = 0, where +inf is returned.
    """
    s = scale.product
    with np.errstate(divide="ignore"):
        return special.k0(np.abs(np.asarray(x, dtype=np.float64)) / s) / (np.pi * s)


def bessel_cdf(x: Union[float, np.ndarray], scale: BesselScale) -> np.ndarray:
    """Return the cumulative distribution of a Gaussian product."""
    x = np.asarray(x, dtype=np.float64)
    _, integral_k0 = special.iti0k0(np.abs(x) / scale.product)
    return 0.5 + np.sign(x) * integral_k0 / np.pi


def product_sum_cdf(x: Union[float, np.ndarray], s: float, terms: int) -> np.ndarray:
    """
    Return the cumulative distribution of a sum of symmetric Gaussian products.

    Args:
        x (float or np.ndarray): Evaluation points.
        s (float): The product scale sigma1 * sigma2 of every term.
        terms (int): The number of independent products, 1, 2 or 4.

    Returns:
        np.ndarray: The CDF values.

    Raises:
        DomainError: If terms is not 1, 2 or 4.
    """
    x = np.asarray(x, dtype=np.float64)
    if terms == 1:
        return bessel_cdf(x, BesselScale(s, 1.0))
    if terms == 2:
        return stats.laplace(scale=s).cdf(x)
    if terms == 4:
        z = np.abs(x) / s
        tail = 0.25 * (z + 2.0) * np.exp(-z)
        return np.where(x >= 0, 1.0 - tail, tail)
    raise DomainError(f"No closed-form CDF for a sum of {terms} products")


def sample_bessel(
    scale: BesselScale,
    rng: np.random.Generator,
    size: Optional[Union[int, Tuple[int, ...]]] = None,
) -> Union[float, np.ndarray]:
    """Draw g1 * g2 with g1 ~ N(0, sigma1^2) and g2 ~ N(0, sigma2^2)."""
    first = rng.normal(0.0, scale.sigma1, size)
    second = rng.normal(0.0, scale.sigma2, size)
    return first * second


@functools.cache
def _tensor_schema() -> dict:
    schema_file = (
        resources.files(__package__) / "schemas" / "coupling_tensor.schema.json"
    )
    return json.loads(schema_file.read_text(encoding="utf-8"))


def validate_tensor_document(document: dict) -> None:
    """
    Validate a coupling tensor document against its JSON schema.

    Raises:
        DomainError: If the document does not conform to the schema.
        jsonschema.exceptions.SchemaError: If the packaged schema is invalid.
    """
    try:
        validate(instance=document, schema=_tensor_schema())
    except ValidationError as e:
        logger.error("Coupling tensor does not conform to the schema: %s", e.message)
        raise DomainError(f"Invalid coupling tensor document: {e.message}") from e
    except SchemaError as e:
        logger.error("The coupling tensor schema was not valid: %s", e.message)
        raise e


def tensor_to_document(
    tensor: CouplingTensor, variance: Optional[float] = None
) -> dict:
    """Serialize the independent entries (P <= Q) of a tensor."""
    pairs = canonical_pairs(tensor.n_sites)
    classes = tensor.classes
    rows, columns = np.triu_indices(tensor.n_pairs)
    entries = [
        {
            "i": int(pairs[p, 0]),
            "j": int(pairs[p, 1]),
            "k": int(pairs[q, 0]),
            "l": int(pairs[q, 1]),
            "re": float(tensor.matrix[p, q].real),
            "im": float(tensor.matrix[p, q].imag),
            "class": str(classes[p, q]),
        }
        for p, q in zip(rows, columns)
    ]
    return {
        "schema_version": SCHEMA_VERSION,
        "n_sites": tensor.n_sites,
        "variance_convention": tensor.variance_convention.value,
        "variance": variance,
        "entries": entries,
    }


def tensor_from_document(document: dict) -> CouplingTensor:
    """
    Rebuild a tensor from its serialized independent entries.

    Raises:
        DomainError: If the document is invalid or an entry's class tag does
            not match its indices.
    """
    validate_tensor_document(document)
    n_sites = document["n_sites"]
    _check_tensor_sites(n_sites)
    n_pairs = n_sites * (n_sites - 1) // 2
    matrix = np.zeros((n_pairs, n_pairs), dtype=np.complex128)
    for entry in document["entries"]:
        i, j, k, l = entry["i"], entry["j"], entry["k"], entry["l"]  # noqa: E741
        if max(i, j, k, l) >= n_sites:
            raise DomainError(
                f"Entry ({i},{j},{k},{l}) is out of range for N={n_sites}"
            )
        if classify_indices(i, j, k, l).value != entry["class"]:
            raise DomainError(f"Entry ({i},{j},{k},{l}) has the wrong class tag")
        p, q = pair_index(i, j, n_sites), pair_index(k, l, n_sites)
        if p > q:
            raise DomainError(f"Entry ({i},{j},{k},{l}) is not an upper entry")
        value = complex(entry["re"], entry["im"])
        matrix[p, q] = value
        matrix[q, p] = value.conjugate()
    return CouplingTensor(
        n_sites, matrix, VarianceConvention(document["variance_convention"])
    )


def write_tensor(
    path: Path, tensor: CouplingTensor, variance: Optional[float] = None
) -> Path:
    """Write a validated tensor document as JSON."""
    document = tensor_to_document(tensor, variance)
    validate_tensor_document(document)
    try:
        path.write_text(json.dumps(document, indent=1) + "\n", encoding="utf-8")
    except OSError as e:
        raise OutputError(f"Cannot write coupling tensor to {path}: {e}") from e
    logger.info("Wrote coupling tensor N=%d to %s", tensor.n_sites, path)
    return path


def read_tensor(path: Path) -> CouplingTensor:
    """Read and validate a tensor document."""
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise OutputError(f"Cannot read coupling tensor from {path}: {e}") from e
    return tensor_from_document(document)
