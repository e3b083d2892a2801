"""Fermionic Fock bases and Jordan-Wigner operator matrices.

Site 0 is the least significant bit of an occupation bitstring and
c_i = (prod_{m<i} Z_m) sigma^-_i. Operators are sparse; products of ladder
operators are applied right to left.
"""

# Standard Python Libraries
from dataclasses import dataclass
import functools
import logging
from typing import Optional, Sequence, Tuple

# Third-Party Libraries
from cyhy_logging import CYHY_ROOT_LOGGER
import numpy as np
from scipy import sparse

from . import DEFAULT_MAX_SITES
from .errors import CapacityError, DomainError

HERMITIAN_TOLERANCE = 1e-12

logger = logging.getLogger(f"{CYHY_ROOT_LOGGER}.{__name__}")

# A ladder operator is (site, create); a product is a sequence of them.
Ladder = Tuple[int, bool]


@dataclass(frozen=True, eq=False)
class FockBasis:
    """An ordered occupation basis of the full space or of one charge sector."""

    n_sites: int
    charge: Optional[int]
    states: np.ndarray

    @property
    def dimension(self) -> int:
        """Return the number of basis states."""
        return int(self.states.shape[0])

    @property
    def key(self) -> Tuple[int, Optional[int]]:
        """Return the (n_sites, charge) pair identifying this space."""
        return (self.n_sites, self.charge)

    @property
    def is_full_space(self) -> bool:
        """Return True when the basis spans all 2^N states."""
        return self.charge is None

    @functools.cached_property
    def index_of(self) -> dict:
        """Map each occupation bitstring to its basis index."""
        return {int(state): index for index, state in enumerate(self.states)}

    def indices(self, states: np.ndarray) -> np.ndarray:
        """
        Return the basis indices of an array of occupation bitstrings.

        Args:
            states (np.ndarray): Occupation bitstrings to look up.

        Returns:
            np.ndarray: The matching basis indices.

        Raises:
            DomainError: If any bitstring is not part of this basis.
        """
        states = np.asarray(states, dtype=np.int64)
        positions = np.searchsorted(self.states, states)
        clipped = np.minimum(positions, self.dimension - 1)
        if states.size and not np.array_equal(self.states[clipped], states):
            raise DomainError("Occupation states are not members of this basis")
        return clipped

    def describe(self) -> str:
        """Return a short human-readable label for the sector."""
        if self.charge is None:
            return f"N={self.n_sites} full space"
        return f"N={self.n_sites} Q={self.charge}"


@functools.cache
def build_basis(
    n_sites: int, charge: Optional[int] = None, max_sites: int = DEFAULT_MAX_SITES
) -> FockBasis:
    """
    Enumerate the occupation basis of N fermionic sites.

    Args:
        n_sites (int): The number of sites N.
        charge (Optional[int]): The fixed particle number Q, or None for the
            full 2^N space.
        max_sites (int): The largest N accepted.

    Returns:
        FockBasis: The basis with states in ascending bitstring order.

    Raises:
        CapacityError: If N exceeds max_sites.
        DomainError: If N < 1 or Q is outside 0..N.
    """
    if n_sites < 1:
        raise DomainError(f"n_sites must be at least 1, got {n_sites}")
    if n_sites > max_sites:
        raise CapacityError(
            f"n_sites={n_sites} exceeds the configured cap of {max_sites} sites"
        )
    if charge is not None and not 0 <= charge <= n_sites:
        raise DomainError(f"charge must satisfy 0 <= Q <= {n_sites}, got {charge}")

    states = np.arange(1 << n_sites, dtype=np.int64)
    if charge is not None:
        states = states[np.bitwise_count(states) == charge]
    states.flags.writeable = False
    logger.debug(
        "Built basis N=%d Q=%s with dimension %d", n_sites, charge, states.size
    )
    return FockBasis(n_sites=n_sites, charge=charge, states=states)


@functools.cache
def canonical_pairs(n_sites: int) -> np.ndarray:
    """Return the pairs (i, j) with i < j in lexicographic order, shape (P, 2)."""
    first, second = np.triu_indices(n_sites, k=1)
    pairs = np.stack([first, second], axis=1).astype(np.int64)
    pairs.flags.writeable = False
    return pairs


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """A sparse operator mapping the basis space into the target space."""

    basis: FockBasis
    target: FockBasis
    entries: sparse.csr_matrix
    hermitian: bool = False

    def __post_init__(self):
        """Verify the shape and, when flagged, the Hermiticity."""
        expected = (self.target.dimension, self.basis.dimension)
        if self.entries.shape != expected:
            raise DomainError(
                f"Operator shape {self.entries.shape} does not match {expected}"
            )
        if self.hermitian:
            deviation = abs(self.entries - self.entries.conj().T)
            if deviation.nnz and deviation.max() > HERMITIAN_TOLERANCE:
                raise DomainError("Operator flagged Hermitian is not Hermitian")

    @property
    def shape(self) -> Tuple[int, int]:
        """Return the matrix shape (target dimension, basis dimension)."""
        return self.entries.shape

    def toarray(self) -> np.ndarray:
        """Return the operator as a dense array."""
        return self.entries.toarray()

    def adjoint(self) -> "OperatorMatrix":
        """Return the Hermitian adjoint."""
        return OperatorMatrix(
            basis=self.target,
            target=self.basis,
            entries=self.entries.conj().T.tocsr(),
            hermitian=self.hermitian,
        )

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        """Compose two operators, applying other first."""
        if self.basis.key != other.target.key:
            raise DomainError(
                f"Cannot compose operators on {self.basis.describe()} "
                f"and {other.target.describe()}"
            )
        return OperatorMatrix(
            basis=other.basis,
            target=self.target,
            entries=(self.entries @ other.entries).tocsr(),
        )


def _check_site(basis: FockBasis, site: int) -> None:
    if not 0 <= site < basis.n_sites:
        raise DomainError(f"site must satisfy 0 <= site < {basis.n_sites}, got {site}")


def apply_ladders(
    states: np.ndarray, ladders: Sequence[Ladder]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Apply a product of ladder operators to occupation bitstrings.

    The rightmost ladder acts first. Each ladder contributes the parity of the
    occupied sites below it.

    Args:
        states (np.ndarray): Input occupation bitstrings.
        ladders (Sequence[Ladder]): The (site, create) factors of the product.

    Returns:
        Tuple[np.ndarray, np.ndarray, np.ndarray]:
            - The resulting bitstrings.
            - The Jordan-Wigner sign of each result.
            - A mask of states not annihilated by the product.
    """
    states = np.array(states, dtype=np.int64)
    signs = np.ones(states.shape, dtype=np.float64)
    alive = np.ones(states.shape, dtype=bool)
    for site, create in reversed(ladders):
        mask = np.int64(1) << site
        occupied = (states & mask) != 0
        alive &= ~occupied if create else occupied
        parity = np.bitwise_count(states & (mask - 1)) & 1
        signs *= np.where(parity == 1, -1.0, 1.0)
        states ^= mask
    return states, signs, alive


def ladder_product(basis: FockBasis, ladders: Sequence[Ladder]) -> OperatorMatrix:
    """
    Build the matrix of a product of creation and annihilation operators.

    Args:
        basis (FockBasis): The space the product acts on.
        ladders (Sequence[Ladder]): The (site, create) factors, rightmost first.

    Returns:
        OperatorMatrix: The product, rectangular when it changes a fixed charge.

    Raises:
        DomainError: If a site is out of range or the product leaves the
            allowed charge range of a fixed-charge basis.
    """
    for site, _ in ladders:
        _check_site(basis, site)
    shift = sum(1 if create else -1 for _, create in ladders)
    if basis.charge is None:
        target = basis
    else:
        charge = basis.charge + shift
        if not 0 <= charge <= basis.n_sites:
            raise DomainError(
                f"Operator maps charge {basis.charge} outside 0..{basis.n_sites}"
            )
        target = build_basis(
            basis.n_sites, charge, max(basis.n_sites, DEFAULT_MAX_SITES)
        )

    new_states, signs, alive = apply_ladders(basis.states, ladders)
    columns = np.nonzero(alive)[0]
    rows = target.indices(new_states[columns])
    entries = sparse.csr_matrix(
        (signs[columns].astype(np.complex128), (rows, columns)),
        shape=(target.dimension, basis.dimension),
    )
    return OperatorMatrix(basis=basis, target=target, entries=entries)


def annihilator(basis: FockBasis, site: int) -> OperatorMatrix:
    """
    Return the Jordan-Wigner annihilation operator c_site.

    In a fixed-charge basis the result is the rectangular block from sector Q
    to sector Q-1.

    Raises:
        DomainError: If the site is out of range or the basis holds Q = 0.
    """
    _check_site(basis, site)
    if basis.charge == 0:
        raise DomainError("Cannot annihilate a particle in the Q=0 sector")
    return ladder_product(basis, [(site, False)])


def creator(basis: FockBasis, site: int) -> OperatorMatrix:
    """Return the Jordan-Wigner creation operator c^dagger_site."""
    _check_site(basis, site)
    if basis.charge == basis.n_sites:
        raise DomainError("Cannot create a particle in the filled sector")
    return ladder_product(basis, [(site, True)])


def hopping_term(basis: FockBasis, i: int, l: int) -> OperatorMatrix:  # noqa: E741
    """Return c^dagger_i c_l."""
    return ladder_product(basis, [(i, True), (l, False)])


def two_body_term(
    basis: FockBasis, i: int, j: int, k: int, l: int  # noqa: E741
) -> OperatorMatrix:
    """
    Return c^dagger_i c^dagger_j c_k c_l.

    Repeated creation or annihilation sites give the zero matrix.

    Args:
        basis (FockBasis): The space the term acts on.
        i (int): First creation site.
        j (int): Second creation site.
        k (int): First annihilation site.
        l (int): Second annihilation site, applied first.

    Returns:
        OperatorMatrix: The charge-conserving four-fermion term.
    """
    return ladder_product(basis, [(i, True), (j, True), (k, False), (l, False)])


def number_operator(basis: FockBasis, site: Optional[int] = None) -> OperatorMatrix:
    """Return n_site, or the total number operator when site is None."""
    if site is None:
        diagonal = np.bitwise_count(basis.states).astype(np.float64)
    else:
        _check_site(basis, site)
        diagonal = ((basis.states >> site) & 1).astype(np.float64)
    entries = sparse.diags(diagonal.astype(np.complex128), format="csr")
    return OperatorMatrix(basis=basis, target=basis, entries=entries, hermitian=True)


def anticommutator_residual(
    basis: FockBasis, i: int, j: int, adjoint: bool = True
) -> float:
    """
    Return the max-abs deviation of a canonical anticommutator.

    With adjoint set this checks {c_i, c^dagger_j} = delta_ij, otherwise
    {c_i, c_j} = 0.

    Raises:
        DomainError: If the basis is not the full space.
    """
    if not basis.is_full_space:
        raise DomainError("Anticommutators are checked on the full space")
    left = annihilator(basis, i)
    right = creator(basis, j) if adjoint else annihilator(basis, j)
    anticommutator = (left @ right).entries + (right @ left).entries
    if adjoint and i == j:
        anticommutator = anticommutator - sparse.identity(basis.dimension, format="csr")
    anticommutator = abs(anticommutator)
    return float(anticommutator.max()) if anticommutator.nnz else 0.0
