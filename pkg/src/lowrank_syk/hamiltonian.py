"""Dense Hamiltonian assembly from coupling tensors and mass matrices."""

# Standard Python Libraries
from dataclasses import dataclass, field
import functools
import logging
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence, Tuple

# Third-Party Libraries
from cyhy_logging import CYHY_ROOT_LOGGER
import numpy as np
from scipy import linalg, sparse

from . import DEFAULT_MAX_SITES
from .disorder import (
    CouplingTensor,
    RankTwoCoupling,
    lowrank_tensor,
    rank_two_sigma,
    sample_dense_gaussian,
    sample_rank_two,
)
from .errors import DomainError, NumericalError, OutputError
from .fock import (
    FockBasis,
    build_basis,
    canonical_pairs,
    ladder_product,
    number_operator,
)

HERMITIAN_TOLERANCE = 1e-12

DUMP_MAGIC = b"LRSH"
DUMP_HEADER = np.dtype(
    [("magic", "S4"), ("n_sites", "<u4"), ("dimension", "<u8"), ("charge", "<i4")]
)

logger = logging.getLogger(f"{CYHY_ROOT_LOGGER}.{__name__}")


@dataclass(frozen=True)
class Provenance:
    """Where a Hamiltonian came from."""

    model: str = "custom"
    seed: Optional[int] = None
    layer: Optional[int] = None


@dataclass(frozen=True, eq=False)
class HamiltonianMatrix:
    """A dense Hermitian Hamiltonian on a Fock basis."""

    basis: FockBasis
    matrix: np.ndarray
    mass_part: Optional[np.ndarray] = None
    provenance: Provenance = field(default_factory=Provenance)

    def __post_init__(self):
        """Check the shape and Hermiticity."""
        expected = (self.basis.dimension, self.basis.dimension)
        if self.matrix.shape != expected:
            raise DomainError(
                f"Hamiltonian shape {self.matrix.shape} does not match {expected}"
            )
        deviation = np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0)
        if deviation > HERMITIAN_TOLERANCE:
            raise NumericalError(
                f"Hamiltonian is not Hermitian (max deviation {deviation:.3e})"
            )

    @property
    def dimension(self) -> int:
        """Return the basis dimension D."""
        return self.basis.dimension

    @property
    def interaction_part(self) -> np.ndarray:
        """Return the matrix without its mass term."""
        if self.mass_part is None:
            return self.matrix
        return self.matrix - self.mass_part

    @functools.cached_property
    def eigensystem(self) -> Tuple[np.ndarray, np.ndarray]:
        """Return the ascending eigenvalues and eigenvectors."""
        try:
            values, vectors = linalg.eigh(self.matrix)
        except linalg.LinAlgError as e:
            raise NumericalError(
                f"Eigendecomposition failed for {self.basis.describe()}, "
                f"D={self.dimension}, max |H|={np.max(np.abs(self.matrix)):.3e}: {e}"
            ) from e
        logger.debug("Diagonalized D=%d Hamiltonian", self.dimension)
        return values, vectors

    @property
    def spectrum(self) -> np.ndarray:
        """Return the ascending eigenvalues."""
        return self.eigensystem[0]

    def charge_residual(self) -> float:
        """Return max |[H, N_total]|; zero by construction inside a sector."""
        total = number_operator(self.basis).entries.diagonal().real
        commutator = self.matrix * (total[None, :] - total[:, None])
        return float(np.max(np.abs(commutator), initial=0.0))

    def __add__(self, other: "HamiltonianMatrix") -> "HamiltonianMatrix":
        """Sum two Hamiltonians on the same basis."""
        if other.basis.key != self.basis.key:
            raise DomainError("Cannot add Hamiltonians on different bases")
        if self.mass_part is None and other.mass_part is None:
            mass_part = None
        else:
            mass_part = _zero_if_none(self.mass_part, self) + _zero_if_none(
                other.mass_part, other
            )
        return HamiltonianMatrix(
            self.basis,
            self.matrix + other.matrix,
            mass_part,
            Provenance(model=self.provenance.model, seed=self.provenance.seed),
        )


def _zero_if_none(part: Optional[np.ndarray], h: HamiltonianMatrix) -> np.ndarray:
    return np.zeros_like(h.matrix) if part is None else part


@functools.cache
def _annihilator_stack(
    n_sites: int, charge: Optional[int], pairs: bool
) -> Optional[sparse.csr_matrix]:
    """
    Stack c_k (or c_k c_l over canonical pairs) into one sparse matrix.

    Rows are ordered (operator index, target state). None means every stacked
    operator vanishes on this sector.
    """
    removed = 2 if pairs else 1
    if charge is not None and charge < removed:
        return None
    basis = build_basis(n_sites, charge, max(n_sites, DEFAULT_MAX_SITES))
    if pairs:
        ladders = [[(k, False), (l, False)] for k, l in canonical_pairs(n_sites)]
    else:
        ladders = [[(k, False)] for k in range(n_sites)]
    blocks = [ladder_product(basis, factors).entries for factors in ladders]
    return sparse.vstack(blocks, format="csr")


def _sandwich(stack: sparse.csr_matrix, weights: np.ndarray) -> np.ndarray:
    """Return stack^H (weights kron I) stack as a dense array."""
    inner = stack.shape[0] // weights.shape[0]
    middle = sparse.kron(weights, sparse.identity(inner), format="csr")
    return (stack.conj().T @ middle @ stack).toarray()


def quadratic_form(basis: FockBasis, weights: np.ndarray) -> np.ndarray:
    """
    Return sum_il W_il c^dagger_i c_l as a dense matrix.

    Raises:
        DomainError: If weights is not N x N.
    """
    if weights.shape != (basis.n_sites, basis.n_sites):
        raise DomainError(
            f"Quadratic form shape {weights.shape} does not match N={basis.n_sites}"
        )
    stack = _annihilator_stack(basis.n_sites, basis.charge, False)
    if stack is None:
        return np.zeros((basis.dimension, basis.dimension), dtype=np.complex128)
    return _sandwich(stack, weights)


def interaction_matrix(basis: FockBasis, tensor: CouplingTensor) -> np.ndarray:
    """
    Return sum_{P,Q} J_PQ c^dagger_i c^dagger_j c_k c_l as a dense matrix.

    With B_Q = c_k c_l the creation pair is c^dagger_i c^dagger_j = -B_P^dagger,
    so the sum is -S^dagger (J kron I) S over the stacked pair operators S.
    """
    stack = _annihilator_stack(basis.n_sites, basis.charge, True)
    if stack is None:
        return np.zeros((basis.dimension, basis.dimension), dtype=np.complex128)
    return -_sandwich(stack, tensor.matrix)


def build_hamiltonian(
    basis: FockBasis,
    tensor: CouplingTensor,
    mass: Optional[np.ndarray] = None,
    provenance: Optional[Provenance] = None,
) -> HamiltonianMatrix:
    """
    Assemble the interaction and optional mass terms on a basis.

    Args:
        basis (FockBasis): The full space or a charge sector.
        tensor (CouplingTensor): Couplings over canonical pairs.
        mass (Optional[np.ndarray]): Hermitian N x N matrix M_il of the
            quadratic term sum M_il c^dagger_i c_l.
        provenance (Optional[Provenance]): Where the couplings came from.

    Returns:
        HamiltonianMatrix: The assembled Hamiltonian.

    Raises:
        DomainError: If the tensor or mass size does not match the basis.
    """
    if tensor.n_sites != basis.n_sites:
        raise DomainError(
            f"Tensor has N={tensor.n_sites} sites but the basis has N={basis.n_sites}"
        )
    matrix = interaction_matrix(basis, tensor)
    mass_part = None
    if mass is not None:
        mass_part = quadratic_form(basis, mass)
        mass_part = 0.5 * (mass_part + mass_part.conj().T)
        matrix = matrix + mass_part
    matrix = 0.5 * (matrix + matrix.conj().T)
    return HamiltonianMatrix(basis, matrix, mass_part, provenance or Provenance())


def build_dense(
    basis: FockBasis,
    coupling: float,
    rng: np.random.Generator,
    real: bool = False,
    seed: Optional[int] = None,
) -> HamiltonianMatrix:
    """Sample and assemble a dense cSYK Hamiltonian."""
    tensor = sample_dense_gaussian(basis.n_sites, coupling, rng, real)
    return build_hamiltonian(basis, tensor, provenance=Provenance("dense", seed))


def sample_layer_couplings(
    n_sites: int,
    coupling: float,
    n_layers: int,
    rng: np.random.Generator,
    real: bool = False,
) -> List[Tuple[RankTwoCoupling, CouplingTensor, np.ndarray]]:
    """
    Draw R independent rank-two couplings and their low-rank tensors.

    Each layer draws from its own child stream of rng.

    Raises:
        DomainError: If R < 1.
    """
    if n_layers < 1:
        raise DomainError(f"Need at least one layer, got R={n_layers}")
    sigma = rank_two_sigma(n_sites, coupling)
    layers = []
    for child in rng.spawn(n_layers):
        j2 = sample_rank_two(n_sites, sigma, child, real)
        tensor, mass = lowrank_tensor(j2)
        layers.append((j2, tensor, mass))
    return layers


def build_layers(
    basis: FockBasis,
    coupling: float,
    n_layers: int,
    rng: np.random.Generator,
    include_mass: bool = False,
    real: bool = False,
    seed: Optional[int] = None,
) -> Tuple[List[HamiltonianMatrix], HamiltonianMatrix]:
    """
    Build R low-rank layer Hamiltonians and their sum H_sim.

    With include_mass each layer carries the quadratic term M/2, which makes
    the layer equal to -O^2/2 for O = sum_ik J_ik c^dagger_i c_k.

    Args:
        basis (FockBasis): The space to assemble on.
        coupling (float): The energy scale J.
        n_layers (int): The number of layers R.
        rng (np.random.Generator): The seeded stream; one child per layer.
        include_mass (bool): Keep the normal-ordering mass term.
        real (bool): Draw real rank-two couplings.
        seed (Optional[int]): Master seed recorded in the provenance.

    Returns:
        Tuple[List[HamiltonianMatrix], HamiltonianMatrix]: The layers and H_sim.
    """
    layers = []
    for index, (_, tensor, mass) in enumerate(
        sample_layer_couplings(basis.n_sites, coupling, n_layers, rng, real)
    ):
        layers.append(
            build_hamiltonian(
                basis,
                tensor,
                0.5 * mass if include_mass else None,
                Provenance("lowrank", seed, index),
            )
        )
    h_sim = functools.reduce(lambda left, right: left + right, layers)
    h_sim = HamiltonianMatrix(
        basis, h_sim.matrix, h_sim.mass_part, Provenance("lowrank-sum", seed)
    )
    logger.debug("Built %d layers on %s", n_layers, basis.describe())
    return layers, h_sim


def quadratic_form_square(basis: FockBasis, j2: RankTwoCoupling) -> np.ndarray:
    """Return O @ O for O = sum_ik J_ik c^dagger_i c_k."""
    operator = quadratic_form(basis, j2.matrix)
    return operator @ operator


class MassWeight(NamedTuple):
    """Frobenius-norm ratio of mass to interaction parts."""

    per_layer: np.ndarray
    mean: float


def mass_term_weight(layers: Sequence[HamiltonianMatrix]) -> MassWeight:
    """
    Compare the mass and interaction parts of each layer.

    Returns:
        MassWeight: ||mass||_F / ||interaction||_F per layer and its mean.
        Layers without a mass term contribute 0.
    """
    ratios = []
    for layer in layers:
        if layer.mass_part is None:
            ratios.append(0.0)
            continue
        interaction = np.linalg.norm(layer.interaction_part)
        mass = np.linalg.norm(layer.mass_part)
        ratios.append(float(mass / interaction) if interaction > 0 else np.inf)
    per_layer = np.array(ratios)
    return MassWeight(per_layer, float(per_layer.mean()) if ratios else 0.0)


def dump_hamiltonian(path: Path, h: HamiltonianMatrix) -> Path:
    """
    Write a Hamiltonian as a little-endian header and row-major complex doubles.

    The header holds the magic bytes, N, D and the charge (-1 for the full
    space).
    """
    header = np.zeros(1, dtype=DUMP_HEADER)
    header["magic"] = DUMP_MAGIC
    header["n_sites"] = h.basis.n_sites
    header["dimension"] = h.dimension
    header["charge"] = -1 if h.basis.charge is None else h.basis.charge
    payload = np.ascontiguousarray(h.matrix, dtype="<c16")
    try:
        with open(path, "wb") as stream:
            stream.write(header.tobytes())
            stream.write(payload.tobytes())
    except OSError as e:
        raise OutputError(f"Cannot write Hamiltonian to {path}: {e}") from e
    logger.info("Wrote D=%d Hamiltonian to %s", h.dimension, path)
    return path


def load_hamiltonian(path: Path) -> HamiltonianMatrix:
    """
    Read a Hamiltonian written by dump_hamiltonian.

    Raises:
        DomainError: If the header is malformed or does not match the payload.
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise OutputError(f"Cannot read Hamiltonian from {path}: {e}") from e
    if len(raw) < DUMP_HEADER.itemsize:
        raise DomainError(f"{path} is too short for a Hamiltonian header")
    header = np.frombuffer(raw[: DUMP_HEADER.itemsize], dtype=DUMP_HEADER)[0]
    if header["magic"] != DUMP_MAGIC:
        raise DomainError(f"{path} is not a Hamiltonian dump")
    n_sites = int(header["n_sites"])
    charge = None if header["charge"] < 0 else int(header["charge"])
    basis = build_basis(n_sites, charge, max(n_sites, DEFAULT_MAX_SITES))
    dimension = int(header["dimension"])
    if dimension != basis.dimension:
        raise DomainError(
            f"Header dimension {dimension} does not match {basis.describe()}"
        )
    payload = np.frombuffer(raw[DUMP_HEADER.itemsize :], dtype="<c16")
    if payload.size != dimension * dimension:
        raise DomainError(f"{path} holds {payload.size} values, expected D^2")
    matrix = payload.reshape(dimension, dimension).astype(np.complex128)
    return HamiltonianMatrix(basis, matrix, provenance=Provenance("loaded"))
