"""First-order Trotter cycling of layer Hamiltonians and its error metrics.

One cycle applies U_1 first and U_R last, U_cycle = U_R ... U_1, and advances
simulated time by dt, so after n cycles the target is exp(-i H_sim n dt).
Distances use the Frobenius norm divided by sqrt(D).
"""

# Standard Python Libraries
from dataclasses import dataclass
import logging
import math
from typing import Iterator, Optional, Sequence, Tuple

# Third-Party Libraries
from cyhy_logging import CYHY_ROOT_LOGGER
import numpy as np

from .errors import DomainError, NumericalError
from .fock import FockBasis
from .hamiltonian import HamiltonianMatrix, Provenance

UNITARITY_TOLERANCE = 1e-10

logger = logging.getLogger(f"{CYHY_ROOT_LOGGER}.{__name__}")


@dataclass(frozen=True, eq=False)
class UnitaryMatrix:
    """A dense unitary on a Fock basis."""

    basis: FockBasis
    matrix: np.ndarray

    def __post_init__(self):
        """Verify unitarity."""
        deviation = unitarity_deviation(self.matrix)
        if deviation >= UNITARITY_TOLERANCE:
            raise NumericalError(
                f"Matrix on {self.basis.describe()} is not unitary "
                f"(max |U^H U - I| = {deviation:.3e})"
            )

    def __matmul__(self, other: "UnitaryMatrix") -> "UnitaryMatrix":
        """Compose two unitaries, applying other first."""
        if other.basis.key != self.basis.key:
            raise DomainError("Cannot compose unitaries on different bases")
        return UnitaryMatrix(self.basis, self.matrix @ other.matrix)


def unitarity_deviation(matrix: np.ndarray) -> float:
    """Return max |U^H U - I|."""
    product = matrix.conj().T @ matrix
    return float(np.max(np.abs(product - np.eye(matrix.shape[0])), initial=0.0))


@dataclass(frozen=True, eq=False)
class CircuitSchedule:
    """R layer Hamiltonians cycled n times with step dt."""

    layers: Tuple[HamiltonianMatrix, ...]
    dt: float
    n_cycles: int = 1
    shuffle_seed: Optional[int] = None

    def __post_init__(self):
        """Check the layers share one basis and the step is positive."""
        if not self.layers:
            raise DomainError("A circuit schedule needs at least one layer")
        keys = {layer.basis.key for layer in self.layers}
        if len(keys) != 1:
            raise DomainError("All layers of a schedule must share one basis")
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if self.n_cycles < 0:
            raise DomainError(f"n_cycles must be nonnegative, got {self.n_cycles}")
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def basis(self) -> FockBasis:
        """Return the shared basis."""
        return self.layers[0].basis

    @property
    def n_layers(self) -> int:
        """Return R."""
        return len(self.layers)

    @property
    def shuffled(self) -> bool:
        """Return True when cycles use random layer orders."""
        return self.shuffle_seed is not None

    def orders(self, n_cycles: Optional[int] = None) -> Iterator[np.ndarray]:
        """Yield the layer order of each cycle."""
        count = self.n_cycles if n_cycles is None else n_cycles
        identity = np.arange(self.n_layers)
        if self.shuffle_seed is None:
            for _ in range(count):
                yield identity
            return
        rng = np.random.default_rng(self.shuffle_seed)
        for _ in range(count):
            yield rng.permutation(self.n_layers)

    def h_sim(self) -> HamiltonianMatrix:
        """Return the exact sum of the layers."""
        if self.n_layers == 1:
            return self.layers[0]
        total = sum(layer.matrix for layer in self.layers)
        return HamiltonianMatrix(self.basis, total, provenance=Provenance("sum"))


def _propagator(h: HamiltonianMatrix, t: float) -> np.ndarray:
    values, vectors = h.eigensystem
    return (vectors * np.exp(-1j * values * t)) @ vectors.conj().T


def layer_unitary(h: HamiltonianMatrix, dt: float) -> UnitaryMatrix:
    """
    Return exp(-i H dt) from the eigendecomposition of H.

    Raises:
        NumericalError: If the eigendecomposition fails or the result is not
            unitary.
    """
    return UnitaryMatrix(h.basis, _propagator(h, dt))


def exact_evolution(h_sim: HamiltonianMatrix, t: float) -> UnitaryMatrix:
    """Return exp(-i H_sim t); see layer_unitary."""
    return layer_unitary(h_sim, t)


def cycle_matrices(schedule: CircuitSchedule) -> Tuple[np.ndarray, ...]:
    """Return the layer unitary matrices U_alpha(dt) in layer order."""
    return tuple(_propagator(layer, schedule.dt) for layer in schedule.layers)


def _ordered_product(unitaries: Sequence[np.ndarray], order: np.ndarray) -> np.ndarray:
    product = unitaries[order[0]]
    for index in order[1:]:
        product = unitaries[index] @ product
    return product


def cycle_unitary(schedule: CircuitSchedule) -> UnitaryMatrix:
    """Return one unshuffled cycle U_R ... U_1."""
    unitaries = cycle_matrices(schedule)
    return UnitaryMatrix(
        schedule.basis, _ordered_product(unitaries, np.arange(schedule.n_layers))
    )


def trotter_evolution(schedule: CircuitSchedule) -> UnitaryMatrix:
    """
    Return the Trotterized evolution after n cycles.

    Returns:
        UnitaryMatrix: (U_R ... U_1)^n, or the product of reshuffled cycles
        when the schedule carries a shuffle seed.
    """
    unitaries = cycle_matrices(schedule)
    if not schedule.shuffled:
        cycle = _ordered_product(unitaries, np.arange(schedule.n_layers))
        return UnitaryMatrix(
            schedule.basis, np.linalg.matrix_power(cycle, schedule.n_cycles)
        )
    total = np.eye(schedule.basis.dimension, dtype=np.complex128)
    for order in schedule.orders():
        total = _ordered_product(unitaries, order) @ total
    return UnitaryMatrix(schedule.basis, total)


def commutator_sum(layers: Sequence[HamiltonianMatrix]) -> np.ndarray:
    """Return sum_{alpha<beta} [H_alpha, H_beta]."""
    total = np.zeros_like(layers[0].matrix)
    prefix = np.zeros_like(layers[0].matrix)
    for layer in layers:
        total += prefix @ layer.matrix - layer.matrix @ prefix
        prefix += layer.matrix
    return total


def commutator_norm_sq(layers: Sequence[HamiltonianMatrix]) -> float:
    """Return ||sum_{alpha<beta} [H_alpha, H_beta]||_F^2 / D."""
    if len(layers) < 2:
        return 0.0
    commutator = commutator_sum(layers)
    return float(np.linalg.norm(commutator) ** 2 / commutator.shape[0])


def bch_error_estimate(
    layers: Sequence[HamiltonianMatrix], dt: float, n_cycles: int
) -> float:
    """
    Return the leading BCH error (t_n dt / 2) ||sum_{alpha<beta} [H_a, H_b]||.

    Args:
        layers (Sequence[HamiltonianMatrix]): The layers H_alpha.
        dt (float): The step dt.
        n_cycles (int): The number of cycles n, so t_n = n dt.

    Returns:
        float: The estimate in the normalized Frobenius norm.
    """
    if len(layers) < 2:
        return 0.0
    return 0.5 * n_cycles * dt * dt * math.sqrt(commutator_norm_sq(layers))


def normalized_distance(first: np.ndarray, second: np.ndarray) -> float:
    """Return ||first - second||_F / sqrt(D)."""
    return float(np.linalg.norm(first - second) / math.sqrt(first.shape[0]))


def distance_series(
    layers: Sequence[HamiltonianMatrix],
    dt: float,
    n_max: int,
    shuffle_seed: Optional[int] = None,
    h_sim: Optional[HamiltonianMatrix] = None,
) -> np.ndarray:
    """
    Return ||U_sim(n dt) - U_trotter(n)|| for n = 1..n_max.

    Both evolutions advance by running products, one multiplication per step.

    Raises:
        DomainError: If n_max < 1.
    """
    if n_max < 1:
        raise DomainError(f"n_max must be at least 1, got {n_max}")
    schedule = CircuitSchedule(tuple(layers), dt, n_max, shuffle_seed)
    target = h_sim if h_sim is not None else schedule.h_sim()
    step = _propagator(target, dt)
    unitaries = cycle_matrices(schedule)

    exact = np.eye(schedule.basis.dimension, dtype=np.complex128)
    trotter = exact.copy()
    distances = np.empty(n_max)
    for n, order in enumerate(schedule.orders()):
        exact = step @ exact
        trotter = _ordered_product(unitaries, order) @ trotter
        distances[n] = normalized_distance(exact, trotter)
    logger.debug(
        "Distance series R=%d dt=%g n_max=%d final=%.3e",
        schedule.n_layers,
        dt,
        n_max,
        distances[-1],
    )
    return distances


def delta_u(
    layers: Sequence[HamiltonianMatrix],
    dt: float,
    n_max: int,
    shuffle_seed: Optional[int] = None,
) -> float:
    """Return the time-averaged distance (1/n_max) sum_n ||U_sim - U_trotter||."""
    return float(np.mean(distance_series(layers, dt, n_max, shuffle_seed)))


def trotter_steps_required(
    total_time: float,
    coupling: float,
    n_layers: int,
    n_sites: int,
    eps: float,
    prefactor: float = 1.0,
) -> int:
    """
    Return ceil(M T^2 J^2 R / (N eps)) Trotter steps.

    Raises:
        DomainError: If eps is not positive.
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    bound = prefactor * total_time**2 * coupling**2 * n_layers / (n_sites * eps)
    # round away float noise such as 1000.0000000000001
    return math.ceil(round(bound, 9))
