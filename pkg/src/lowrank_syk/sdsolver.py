"""Large-N Schwinger-Dyson equations on the Keldysh contour at infinite temperature.

Components are stored as a (2, 2, n_t) array indexed by contour labels
0 = "+" and 1 = "-". For the free propagator G^{+-} is the lesser and G^{-+}
the greater function. The Dyson equation reads G = [G0^-1 - Sigma]^-1 per
frequency, with G0^-1(w) = [[w, i eta], [-i eta, -w]].
"""

# Standard Python Libraries
from dataclasses import dataclass
import logging
import math
from typing import List, NamedTuple, Optional

# Third-Party Libraries
from cyhy_logging import CYHY_ROOT_LOGGER
import numpy as np

from . import DEFAULT_SD_HALF_WIDTH, DEFAULT_SD_MIXING, DEFAULT_SD_POINTS
from .errors import DomainError, NonConvergenceError, NumericalError

CONTOUR_SIGNS = np.array([[1.0, -1.0], [-1.0, 1.0]])
THETA_KERNEL = np.array([[1.0, 0.0], [-2.0, 1.0]])
SINGULAR_TOLERANCE = 1e-12
OSCILLATION_WINDOW = 20
DIVERGENCE_FACTOR = 1e3

logger = logging.getLogger(f"{CYHY_ROOT_LOGGER}.{__name__}")


@dataclass(frozen=True)
class SDGrid:
    """Times t_n = (n - n_t/2) dt on [-T, T) with dt = 2T / n_t."""

    half_width: float = DEFAULT_SD_HALF_WIDTH
    n_points: int = DEFAULT_SD_POINTS
    broadening: float = 1.0

    def __post_init__(self):
        """Check the grid parameters."""
        if not self.half_width > 0:
            raise DomainError(f"half_width must be positive, got {self.half_width}")
        if self.n_points < 4 or self.n_points % 2:
            raise DomainError(f"n_points must be even and >= 4, got {self.n_points}")
        if self.broadening < 0:
            raise DomainError(f"broadening must be nonnegative, got {self.broadening}")

    @property
    def dt(self) -> float:
        """Return the time step."""
        return 2.0 * self.half_width / self.n_points

    @property
    def zero_index(self) -> int:
        """Return the index of t = 0."""
        return self.n_points // 2

    @property
    def times(self) -> np.ndarray:
        """Return the time grid."""
        return (np.arange(self.n_points) - self.zero_index) * self.dt

    @property
    def omegas(self) -> np.ndarray:
        """Return the angular frequencies in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dt)

    @property
    def eta(self) -> float:
        """Return the regulator broadening * pi / T."""
        return self.broadening * np.pi / self.half_width

    @property
    def reversal(self) -> np.ndarray:
        """Return the index of -t_n for every n (periodic at -T)."""
        return (-np.arange(self.n_points)) % self.n_points


def to_frequency(values: np.ndarray, grid: SDGrid) -> np.ndarray:
    """Return f(w_k) = sum_n dt exp(i w_k t_n) f(t_n) along the last axis."""
    shifted = np.fft.ifftshift(values, axes=-1)
    return grid.dt * grid.n_points * np.fft.ifft(shifted, axis=-1)


def to_time(values: np.ndarray, grid: SDGrid) -> np.ndarray:
    """Invert to_frequency."""
    return np.fft.fftshift(np.fft.fft(values, axis=-1), axes=-1) / (
        grid.n_points * grid.dt
    )


@dataclass(frozen=True, eq=False)
class KeldyshGreen:
    """A two-point function on the closed time contour."""

    grid: SDGrid
    components: np.ndarray

    def __post_init__(self):
        """Check the component array shape."""
        if self.components.shape != (2, 2, self.grid.n_points):
            raise DomainError(
                f"Components must have shape (2, 2, {self.grid.n_points}), "
                f"got {self.components.shape}"
            )

    def component(self, labels: str) -> np.ndarray:
        """Return one component by contour labels, e.g. "+-"."""
        index = {"+": 0, "-": 1}
        return self.components[index[labels[0]], index[labels[1]]]

    @property
    def lesser(self) -> np.ndarray:
        """Return G^{+-}(t)."""
        return self.components[0, 1]

    @property
    def greater(self) -> np.ndarray:
        """Return G^{-+}(t)."""
        return self.components[1, 0]

    @property
    def retarded(self) -> np.ndarray:
        """Return G^R = G^{++} - G^{+-}, which is theta(t) (G^> - G^<)."""
        return self.components[0, 0] - self.components[0, 1]

    def frequency(self) -> np.ndarray:
        """Return the components per frequency as an (n_t, 2, 2) array."""
        return np.moveaxis(to_frequency(self.components, self.grid), -1, 0)

    def reflected(self) -> np.ndarray:
        """Return F_ba(-t) for every component F_ab(t)."""
        return self.components.transpose(1, 0, 2)[..., self.grid.reversal]

    def conjugation_residual(self) -> float:
        """
        Return max |G_ab(t) + conj(G_{b'a'}(-t))| with ' flipping the label.

        The unpaired endpoint t = -T is excluded.
        """
        swapped = self.components[::-1, ::-1].transpose(1, 0, 2)
        flipped = swapped[..., self.grid.reversal]
        residual = np.abs(self.components + flipped.conj())[..., 1:]
        return float(np.max(residual))

    def distance(self, other: "KeldyshGreen") -> float:
        """Return the sup-norm distance to another function on the same grid."""
        return float(np.max(np.abs(self.components - other.components)))


@dataclass(frozen=True)
class DissipationParams:
    """Couplings of the dissipative large-N theory."""

    coupling: float = 1.0
    dissipation: float = 0.0
    ratio_rn: float = 1.0

    def __post_init__(self):
        """Check the couplings."""
        if self.coupling < 0 or self.dissipation < 0:
            raise DomainError("J and K must be nonnegative")
        if not self.ratio_rn > 0:
            raise DomainError(f"R/N must be positive, got {self.ratio_rn}")

    @property
    def s_matrix(self) -> np.ndarray:
        """Return the contour sign matrix s_ab."""
        return CONTOUR_SIGNS

    @property
    def unitary_rate(self) -> float:
        """Return J^2 R / N."""
        return self.coupling**2 * self.ratio_rn

    @property
    def dissipative_rate(self) -> float:
        """Return K^2 R / N."""
        return self.dissipation**2 * self.ratio_rn


def free_green(grid: SDGrid, eta: float = 0.0, periodic: bool = False) -> KeldyshGreen:
    """
    Return the free half-filled propagator, optionally damped by exp(-eta |t|).

    G^{+-} = i/2, G^{-+} = -i/2, G^{++} = -(i/2) sgn(t), G^{--} = (i/2) sgn(t),
    with sgn(0) = 0. With periodic=True the damped propagator is summed over
    its images at t + 2nT, which makes its Fourier coefficients on the grid
    exactly the continuum transform [[w, i eta], [-i eta, -w]]^-1.

    Raises:
        DomainError: If periodic images are requested without damping.
    """
    t = grid.times
    sign = np.sign(t)
    if periodic:
        if not eta > 0:
            raise DomainError(f"Periodic images need a positive damping, got {eta}")
        direct = np.exp(-eta * np.abs(t))
        image = np.exp(-eta * (2.0 * grid.half_width - np.abs(t)))
        norm = -np.expm1(-2.0 * eta * grid.half_width)
        damping, odd_damping = (direct + image) / norm, (direct - image) / norm
    else:
        damping = odd_damping = np.exp(-eta * np.abs(t))
    components = np.empty((2, 2, grid.n_points), dtype=np.complex128)
    components[0, 0] = -0.5j * sign * odd_damping
    components[0, 1] = 0.5j * damping
    components[1, 0] = -0.5j * damping
    components[1, 1] = 0.5j * sign * odd_damping
    return KeldyshGreen(grid, components)


def _free_inverse(grid: SDGrid) -> np.ndarray:
    omega = grid.omegas
    inverse = np.zeros((grid.n_points, 2, 2), dtype=np.complex128)
    inverse[:, 0, 0] = omega
    inverse[:, 0, 1] = 1j * grid.eta
    inverse[:, 1, 0] = -1j * grid.eta
    inverse[:, 1, 1] = -omega
    return inverse


def _inverse_2x2(matrices: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.inv(matrices)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"Singular 2x2 contour matrix: {e}") from e


def dyson_step(sigma: KeldyshGreen) -> KeldyshGreen:
    """
    Return G = [G0^-1 - Sigma]^-1 for a self-energy.

    The periodic damped free propagator is added in the time domain and only
    the smooth remainder is transformed. A zero self-energy returns the
    undamped free_green(grid) exactly.
    """
    grid = sigma.grid
    if not np.any(sigma.components):
        return free_green(grid)
    inverse = _free_inverse(grid)
    dressed = _inverse_2x2(inverse - sigma.frequency())
    remainder = np.moveaxis(dressed - _inverse_2x2(inverse), 0, -1)
    reference = free_green(grid, grid.eta, periodic=True)
    return KeldyshGreen(grid, reference.components + to_time(remainder, grid))


class ThetaStep(NamedTuple):
    """Auxiliary-field self-energy and propagator."""

    sigma_theta: KeldyshGreen
    g_theta: KeldyshGreen
    n_regularized: int


def theta_step(green: KeldyshGreen, dissipation: float) -> ThetaStep:
    """
    Return Sigma^theta = -(K^2/4) G^2 and G^theta = [M delta - Sigma^theta]^-1.

    M = [[1, 0], [-2, 1]]; the delta function is a 1/dt spike at t = 0, so
    its transform is exactly one. Near-singular frequencies are regularized
    and counted.
    """
    grid = green.grid
    sigma = KeldyshGreen(grid, -0.25 * dissipation**2 * green.components**2)
    matrix = THETA_KERNEL[None, :, :] - sigma.frequency()
    determinant = matrix[:, 0, 0] * matrix[:, 1, 1] - matrix[:, 0, 1] * matrix[:, 1, 0]
    singular = np.abs(determinant) < SINGULAR_TOLERANCE
    n_regularized = int(np.count_nonzero(singular))
    if n_regularized:
        logger.warning(
            "Regularized %d near-singular auxiliary-field frequencies", n_regularized
        )
        matrix[singular] += SINGULAR_TOLERANCE * np.eye(2)
    g_theta = to_time(np.moveaxis(_inverse_2x2(matrix), 0, -1), grid)
    return ThetaStep(sigma, KeldyshGreen(grid, g_theta), n_regularized)


def fermion_step(
    green: KeldyshGreen, g_theta: KeldyshGreen, params: DissipationParams
) -> KeldyshGreen:
    """
    Return the fermion self-energy.

    Sigma_ab(t) = -(J^2 R/N) s_ab G_ab(t)^3
                  + (K^2 R/N) s_ab (G^theta_ab(t) + G^theta_ba(-t)) G_ab(t).

    The delta part of G^theta multiplies G_ab(0), the mean of the two
    one-sided limits on the grid.
    """
    signs = params.s_matrix[:, :, None]
    unitary = -params.unitary_rate * signs * green.components**3
    if params.dissipation == 0:
        return KeldyshGreen(green.grid, unitary)
    kernel = g_theta.components + g_theta.reflected()
    dissipative = params.dissipative_rate * signs * kernel * green.components
    return KeldyshGreen(green.grid, unitary + dissipative)


def self_energy(green: KeldyshGreen, params: DissipationParams) -> KeldyshGreen:
    """Return the fermion self-energy including the auxiliary-field step."""
    if params.dissipation == 0:
        return fermion_step(green, green, params)
    theta = theta_step(green, params.dissipation)
    return fermion_step(green, theta.g_theta, params)


class SDSolution(NamedTuple):
    """A converged propagator and its residual history."""

    green: KeldyshGreen
    residuals: List[float]
    iterations: int


def _oscillating(history: List[float]) -> bool:
    if len(history) < OSCILLATION_WINDOW:
        return False
    window = np.array(history[-OSCILLATION_WINDOW:])
    steps = np.sign(np.diff(window))
    flips = np.count_nonzero(steps[1:] != steps[:-1])
    return flips >= OSCILLATION_WINDOW // 2 and window[-1] >= window.min()


def solve_sd(
    params: DissipationParams,
    grid: Optional[SDGrid] = None,
    mixing: float = DEFAULT_SD_MIXING,
    tol: float = 1e-8,
    max_iter: int = 2000,
) -> SDSolution:
    """
    Solve the Schwinger-Dyson equations by damped fixed-point iteration.

    Args:
        params (DissipationParams): J, K and R/N.
        grid (Optional[SDGrid]): The time grid; defaults to T = 50, n_t = 4096.
        mixing (float): Weight of the new iterate, in (0, 1].
        tol (float): Convergence threshold on max |G_new - G_old|.
        max_iter (int): Iteration cap.

    Returns:
        SDSolution: The iterate whose Dyson image lies within tol of it,
        the residual of every iteration and the iteration count.

    Raises:
        DomainError: If mixing or tol is out of range.
        NonConvergenceError: If max_iter is exceeded or the iteration
            diverges; carries the best residual and, when the residuals
            oscillate, a smaller suggested mixing.
    """
    if not 0 < mixing <= 1:
        raise DomainError(f"mixing must lie in (0, 1], got {mixing}")
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol}")
    grid = grid if grid is not None else SDGrid()
    initial_damping = grid.eta + params.coupling * math.sqrt(params.ratio_rn)
    current = free_green(grid, initial_damping)
    history: List[float] = []
    oscillating = False

    for iteration in range(1, max_iter + 1):
        updated = dyson_step(self_energy(current, params))
        residual = current.distance(updated)
        history.append(residual)
        logger.debug("SD iteration %d residual %.3e", iteration, residual)
        if residual < tol:
            logger.info(
                "SD converged in %d iterations (J=%g, K=%g, R/N=%g)",
                iteration,
                params.coupling,
                params.dissipation,
                params.ratio_rn,
            )
            return SDSolution(current, history, iteration)
        if not math.isfinite(residual) or residual > DIVERGENCE_FACTOR * max(
            history[0], 1.0
        ):
            raise NonConvergenceError(
                f"SD iteration diverged at step {iteration} (residual {residual:.3e})",
                min(history),
                iteration,
                suggested_mixing=mixing / 2.0,
            )
        if not oscillating and _oscillating(history):
            oscillating = True
            logger.warning(
                "SD residuals oscillate at iteration %d; mixing %g may be too large",
                iteration,
                mixing,
            )
        current = KeldyshGreen(
            grid, (1.0 - mixing) * current.components + mixing * updated.components
        )

    raise NonConvergenceError(
        f"SD iteration did not reach tol={tol} in {max_iter} iterations",
        min(history),
        max_iter,
        suggested_mixing=mixing / 2.0 if oscillating else None,
    )
