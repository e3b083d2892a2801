"""Densities of summed Gaussian products and their KL distance to a Gaussian.

A sum of R independent Gaussian products with scale s has characteristic
function (1 + s^2 t^2)^(-R/2). Its density is the symmetric variance-gamma law
|x|^nu K_nu(|x|/s) / (sqrt(pi) Gamma(R/2) 2^nu s^(nu+1)) with nu = (R-1)/2.
"""

# Standard Python Libraries
from dataclasses import dataclass
import logging
from typing import NamedTuple, Optional, Sequence, Tuple

# Third-Party Libraries
from cyhy_logging import CYHY_ROOT_LOGGER
import numpy as np
from scipy import integrate, optimize, special, stats

from .disorder import BesselScale
from .errors import DomainError, TailMassError

DEFAULT_HALF_WIDTH = 12.0
DEFAULT_POINTS = 4800
TAIL_MASS_LIMIT = 1e-8
SUPPORT_THRESHOLD = 1e-300

logger = logging.getLogger(f"{CYHY_ROOT_LOGGER}.{__name__}")


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """A density sampled at the midpoints of a symmetric grid."""

    points: np.ndarray
    values: np.ndarray
    dx: float
    normalization_residual: float

    def __post_init__(self):
        """Check the value array matches the grid."""
        if self.points.shape != self.values.shape:
            raise DomainError("Density values do not match the grid")
        if np.any(self.values < 0):
            raise DomainError("Densities must be nonnegative")

    def moment(self, order: int) -> float:
        """Return the midpoint estimate of E[X^order]."""
        return float(np.sum(self.points**order * self.values) * self.dx)

    def mass(self) -> float:
        """Return the midpoint estimate of the total probability."""
        return float(np.sum(self.values) * self.dx)


def midpoint_grid(half_width: float, n_points: int) -> Tuple[np.ndarray, float]:
    """
    Return cell midpoints over [-half_width, half_width] and the spacing.

    An even number of cells keeps x = 0 off the grid.

    Raises:
        DomainError: If n_points is not a positive even number.
    """
    if n_points < 2 or n_points % 2:
        raise DomainError(f"n_points must be a positive even number, got {n_points}")
    dx = 2.0 * half_width / n_points
    points = -half_width + dx * (np.arange(n_points) + 0.5)
    return points, dx


def product_sum_pdf(x: np.ndarray, s: float, n_terms: int) -> np.ndarray:
    """Return the closed-form density of a sum of n_terms Gaussian products."""
    nu = 0.5 * (n_terms - 1)
    magnitude = np.abs(np.asarray(x, dtype=np.float64))
    z = magnitude / s
    with np.errstate(divide="ignore"):
        log_density = (
            nu * np.log(magnitude)
            + np.log(special.kve(nu, z))
            - z
            - (
                (nu + 1.0) * np.log(s)
                + 0.5 * np.log(np.pi)
                + nu * np.log(2.0)
                + special.gammaln(0.5 * n_terms)
            )
        )
    return np.exp(log_density)


def _tail_mass(s: float, n_terms: int, half_width: float) -> float:
    tail, _ = integrate.quad(
        lambda x: product_sum_pdf(x, s, n_terms), half_width, np.inf, limit=200
    )
    return 2.0 * tail


def convolved_bessel_density(
    scale: BesselScale,
    n_terms: int,
    half_width: float = DEFAULT_HALF_WIDTH,
    n_points: int = DEFAULT_POINTS,
) -> DensityGrid:
    """
    Return the density of a sum of R independent Gaussian products.

    Args:
        scale (BesselScale): Standard deviations of the two factors.
        n_terms (int): The number of summed products R >= 1.
        half_width (float): The grid covers [-half_width, half_width].
        n_points (int): The number of grid cells, even.

    Returns:
        DensityGrid: The density; its residual is the mass outside the grid.

    Raises:
        DomainError: If R < 1.
        TailMassError: If more than 1e-8 of the mass lies outside the grid.
    """
    if n_terms < 1:
        raise DomainError(f"Need at least one product, got R={n_terms}")
    points, dx = midpoint_grid(half_width, n_points)
    tail = _tail_mass(scale.product, n_terms, half_width)
    if tail > TAIL_MASS_LIMIT:
        raise TailMassError(
            f"Grid half-width {half_width} leaves tail mass {tail:.3e} "
            f"for R={n_terms}, s={scale.product}"
        )
    values = product_sum_pdf(points, scale.product, n_terms)
    return DensityGrid(points, values, dx, tail)


def fourier_density(x: Sequence[float], s: float, n_terms: int) -> np.ndarray:
    """
    Return the density by numerically inverting the characteristic function.

    Raises:
        DomainError: If any x is zero.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if np.any(x == 0):
        raise DomainError("The Fourier inversion is evaluated away from x = 0")

    def characteristic(t: float) -> float:
        return (1.0 + (s * t) ** 2) ** (-0.5 * n_terms)

    values = [
        integrate.quad(characteristic, 0.0, np.inf, weight="cos", wvar=abs(point))[0]
        / np.pi
        for point in x
    ]
    return np.array(values)


def gaussian_density(
    variance: float = 1.0,
    half_width: float = DEFAULT_HALF_WIDTH,
    n_points: int = DEFAULT_POINTS,
) -> DensityGrid:
    """Return the centred Gaussian density on a midpoint grid."""
    points, dx = midpoint_grid(half_width, n_points)
    law = stats.norm(scale=np.sqrt(variance))
    return DensityGrid(points, law.pdf(points), dx, float(2.0 * law.sf(half_width)))


def kl_numeric(p: DensityGrid, q: DensityGrid) -> float:
    """
    Return D(P||Q) = sum p log(p/q) dx over cells where p > 1e-300.

    Raises:
        DomainError: If the grids differ or q vanishes where p does not.
    """
    if p.points.shape != q.points.shape or not np.array_equal(p.points, q.points):
        raise DomainError("KL divergence needs both densities on one grid")
    support = p.values > SUPPORT_THRESHOLD
    if np.any(q.values[support] <= 0):
        raise DomainError("Q vanishes on the support of P")
    ratio = p.values[support] / q.values[support]
    return float(np.sum(p.values[support] * np.log(ratio)) * p.dx)


@dataclass(frozen=True, eq=False)
class KLScan:
    """KL divergences between the Gaussian and R-fold product sums."""

    r_values: np.ndarray
    forward: np.ndarray
    reverse: np.ndarray
    constant: float
    constant_interval: Tuple[float, float]
    correction: float
    reverse_constant: float
    leading_constant: float
    log_slope: float
    residual: float
    asymptotic_warning: bool
    variance_matched: bool


class InverseSquareFit(NamedTuple):
    """Fit of R^2 D = c + d / R."""

    constant: float
    constant_stderr: float
    correction: float
    residual: float


def fit_inverse_square(
    r_values: np.ndarray, divergences: np.ndarray
) -> InverseSquareFit:
    """
    Fit D = c / R^2 + d / R^3 as a line in 1/R through R^2 D.

    The 1/R^3 term is kept because it is large at moderate R.
    """
    scaled = divergences * r_values**2
    line = stats.linregress(1.0 / r_values, scaled)
    predicted = (line.intercept + line.slope / r_values) / r_values**2
    return InverseSquareFit(
        float(line.intercept),
        float(line.intercept_stderr),
        float(line.slope),
        float(np.max(np.abs(divergences - predicted))),
    )


def fit_leading_only(r_values: np.ndarray, divergences: np.ndarray) -> float:
    """Fit D = c / R^2 alone by least squares."""
    popt, _ = optimize.curve_fit(
        lambda r, c: c / r**2, r_values, divergences, p0=[0.75]
    )
    return float(popt[0])


def kl_scaling_scan(
    r_values: Sequence[int],
    variance_matched: bool = True,
    scale: Optional[BesselScale] = None,
    half_width: float = DEFAULT_HALF_WIDTH,
    n_points: int = DEFAULT_POINTS,
    confidence: float = 0.95,
) -> KLScan:
    """
    Scan D(P||Q_R) over R and fit the 1/R^2 law.

    P is the unit Gaussian. With variance matching Q_R uses s = 1/sqrt(R) so
    that Var Q_R = 1; otherwise Q_R keeps the variance R s^2 of the given
    scale.

    Args:
        r_values (Sequence[int]): At least three values, all >= 4.
        variance_matched (bool): Rescale Q_R to unit variance.
        scale (Optional[BesselScale]): Product scale used without matching.
        half_width (float): Grid half-width in units of the larger deviation.
        n_points (int): The number of grid cells.
        confidence (float): Confidence level of the interval on c.

    Returns:
        KLScan: Both orientations, the fitted constant and diagnostics.

    Raises:
        DomainError: If fewer than three R values are given or any R < 4.
    """
    r_values = np.asarray(sorted(r_values), dtype=np.float64)
    if r_values.size < 3 or np.any(r_values < 4):
        raise DomainError("The KL scan needs at least three values of R, all >= 4")
    if not variance_matched and scale is None:
        scale = BesselScale(1.0, 1.0)

    forward, reverse = [], []
    for n_terms in r_values.astype(int):
        if variance_matched:
            product = 1.0 / np.sqrt(n_terms)
        else:
            product = scale.product
        width = half_width * max(1.0, product * np.sqrt(n_terms))
        q = convolved_bessel_density(
            BesselScale(product, 1.0), int(n_terms), width, n_points
        )
        p = gaussian_density(1.0, width, n_points)
        forward.append(kl_numeric(p, q))
        reverse.append(kl_numeric(q, p))
        logger.debug(
            "R=%d D(P||Q)=%.6e D(Q||P)=%.6e", n_terms, forward[-1], reverse[-1]
        )
    forward = np.array(forward)
    reverse = np.array(reverse)

    fit = fit_inverse_square(r_values, forward)
    reverse_fit = fit_inverse_square(r_values, reverse)
    quantile = stats.t.ppf(0.5 + confidence / 2.0, df=r_values.size - 2)
    interval = (
        fit.constant - quantile * fit.constant_stderr,
        fit.constant + quantile * fit.constant_stderr,
    )
    log_slope = float(stats.linregress(np.log(r_values), np.log(forward)).slope)
    warning = fit.residual > 0.1 * float(np.min(forward))
    if warning:
        logger.warning(
            "Fit residual %.3e exceeds 10%% of the smallest divergence; "
            "R values may be outside the asymptotic regime",
            fit.residual,
        )
    logger.info(
        "Fitted R^2 D = c + d/R with c = %.4f, d = %.4f (reverse c = %.4f)",
        fit.constant,
        fit.correction,
        reverse_fit.constant,
    )
    return KLScan(
        r_values=r_values.astype(int),
        forward=forward,
        reverse=reverse,
        constant=fit.constant,
        constant_interval=interval,
        correction=fit.correction,
        reverse_constant=reverse_fit.constant,
        leading_constant=fit_leading_only(r_values, forward),
        log_slope=log_slope,
        residual=fit.residual,
        asymptotic_warning=warning,
        variance_matched=variance_matched,
    )
