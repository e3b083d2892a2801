"""Speckle detuning fields, trap modes and the couplings they induce.

A speckle amplitude is circular complex white noise passed through the
Fourier filter exp(-k^2 l^2 / 4), so the intensity autocovariance is
exp(-r^2 / l^2). Lengths are in units of the trap width.
"""

# Standard Python Libraries
from dataclasses import dataclass
import json
import logging
import math
from pathlib import Path
from typing import Dict, NamedTuple, Optional, Sequence, Tuple

# Third-Party Libraries
from cyhy_logging import CYHY_ROOT_LOGGER
import numpy as np
from scipy import special, stats

from . import (
    DEFAULT_SPECKLE_CONTRAST,
    DEFAULT_SPECKLE_CORRELATION_LENGTH,
    DEFAULT_SPECKLE_GRID_POINTS,
    DEFAULT_SPECKLE_HALF_EXTENT,
    SCHEMA_VERSION,
)
from .disorder import (
    CouplingClass,
    CouplingTensor,
    RankTwoCoupling,
    class_entries,
    lowrank_tensor,
    product_sum_cdf,
    product_terms,
)
from .errors import DomainError, OutputError, ResolutionError, SpeckleRejectedError

MIN_DETUNING_FRACTION = 0.2
GRAM_TOLERANCE = 1e-6
MIN_CLASS_ENSEMBLE = 100

logger = logging.getLogger(f"{CYHY_ROOT_LOGGER}.{__name__}")


@dataclass(frozen=True)
class SpeckleGrid:
    """A cell-centred n_x by n_y lattice over [-half_extent, half_extent]^2."""

    n_x: int = DEFAULT_SPECKLE_GRID_POINTS
    n_y: int = DEFAULT_SPECKLE_GRID_POINTS
    half_extent: float = DEFAULT_SPECKLE_HALF_EXTENT

    def __post_init__(self):
        """Check the lattice is non-trivial."""
        if self.n_x < 2 or self.n_y < 2:
            raise DomainError(f"Grid needs at least 2x2 points, got {self.shape}")
        if not self.half_extent > 0:
            raise DomainError(f"half_extent must be positive, got {self.half_extent}")

    @property
    def shape(self) -> Tuple[int, int]:
        """Return (n_x, n_y)."""
        return (self.n_x, self.n_y)

    @property
    def spacing(self) -> Tuple[float, float]:
        """Return (dx, dy)."""
        return (2.0 * self.half_extent / self.n_x, 2.0 * self.half_extent / self.n_y)

    @property
    def cell_area(self) -> float:
        """Return dx * dy."""
        dx, dy = self.spacing
        return dx * dy

    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        """Return the cell-centre coordinates along x and y."""
        dx, dy = self.spacing
        x = -self.half_extent + dx * (np.arange(self.n_x) + 0.5)
        y = -self.half_extent + dy * (np.arange(self.n_y) + 0.5)
        return x, y

    def wavenumbers(self) -> Tuple[np.ndarray, np.ndarray]:
        """Return the FFT wavenumber meshes (kx, ky)."""
        dx, dy = self.spacing
        kx = 2.0 * np.pi * np.fft.fftfreq(self.n_x, d=dx)
        ky = 2.0 * np.pi * np.fft.fftfreq(self.n_y, d=dy)
        return np.meshgrid(kx, ky, indexing="ij")


@dataclass(frozen=True, eq=False)
class SpeckleField:
    """A positive detuning field Delta(r) on a grid."""

    grid: SpeckleGrid
    detuning: np.ndarray
    intensity: np.ndarray
    mean_detuning: float
    correlation_length: float
    contrast: float
    seed: Optional[int] = None

    def __post_init__(self):
        """Check the arrays match the grid and the detuning stays positive."""
        if self.detuning.shape != self.grid.shape:
            raise DomainError("Detuning array does not match the grid")
        if np.any(self.detuning <= 0):
            raise SpeckleRejectedError("Detuning must be positive everywhere")

    @property
    def inverse_detuning(self) -> np.ndarray:
        """Return mean_detuning / Delta(r)."""
        return self.mean_detuning / self.detuning


@dataclass(frozen=True, eq=False)
class ModeSet:
    """Hermite-Gauss trap modes sampled on a grid."""

    grid: SpeckleGrid
    modes: np.ndarray
    quantum_numbers: np.ndarray
    width: float

    @property
    def n_modes(self) -> int:
        """Return N."""
        return self.modes.shape[0]

    @property
    def parities(self) -> np.ndarray:
        """Return the inversion parity (-1)^(n_x + n_y) of every mode."""
        return np.where(self.quantum_numbers.sum(axis=1) % 2 == 0, 1, -1)

    def flat(self) -> np.ndarray:
        """Return the modes as an N x (n_x n_y) array."""
        return self.modes.reshape(self.n_modes, -1)

    def gram(self) -> np.ndarray:
        """Return <phi_i|phi_j> under the grid quadrature."""
        flat = self.flat()
        return flat.conj() @ flat.T * self.grid.cell_area


def generate_speckle(
    grid: SpeckleGrid,
    rng: np.random.Generator,
    correlation_length: float = DEFAULT_SPECKLE_CORRELATION_LENGTH,
    contrast: float = DEFAULT_SPECKLE_CONTRAST,
    mean_detuning: float = 1.0,
    seed: Optional[int] = None,
) -> SpeckleField:
    """
    Draw a fully developed speckle field and map it to a detuning.

    Args:
        grid (SpeckleGrid): The lattice.
        rng (np.random.Generator): The field's random stream.
        correlation_length (float): 1/e radius of the intensity autocovariance.
        contrast (float): The detuning contrast s >= 0.
        mean_detuning (float): The mean detuning, positive.
        seed (Optional[int]): Recorded with the field for provenance.

    Returns:
        SpeckleField: Delta(r) = mean_detuning * (1 + s (I(r) - 1)) with I
        exponentially distributed with unit mean.

    Raises:
        DomainError: If the correlation length is under two grid spacings or
            a parameter is out of range.
        SpeckleRejectedError: If the detuning drops to 0.2 of its mean or
            below anywhere.
    """
    if correlation_length < 2.0 * max(grid.spacing):
        raise DomainError(
            f"correlation_length {correlation_length} is below two grid spacings "
            f"({2.0 * max(grid.spacing):.4g})"
        )
    if contrast < 0:
        raise DomainError(f"contrast must be nonnegative, got {contrast}")
    if not mean_detuning > 0:
        raise DomainError(f"mean_detuning must be positive, got {mean_detuning}")

    kx, ky = grid.wavenumbers()
    envelope = np.exp(-(kx**2 + ky**2) * correlation_length**2 / 4.0)
    noise = (
        rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    ) / math.sqrt(2.0)
    amplitude = np.fft.ifft2(envelope * np.fft.fft2(noise))
    # unit mean intensity at every point
    amplitude /= math.sqrt(np.mean(envelope**2))
    intensity = np.abs(amplitude) ** 2
    detuning = mean_detuning * (1.0 + contrast * (intensity - 1.0))

    minimum = float(np.min(detuning))
    if minimum <= MIN_DETUNING_FRACTION * mean_detuning:
        raise SpeckleRejectedError(
            f"Speckle detuning reaches {minimum / mean_detuning:.3f} of its mean "
            f"(limit {MIN_DETUNING_FRACTION}); lower the contrast {contrast}"
        )
    logger.debug(
        "Speckle field %s l=%g s=%g min/mean=%.3f",
        grid.shape,
        correlation_length,
        contrast,
        minimum / mean_detuning,
    )
    return SpeckleField(
        grid, detuning, intensity, mean_detuning, correlation_length, contrast, seed
    )


def correlation_width(field: SpeckleField) -> float:
    """
    Return the 1/e radius of the intensity autocovariance along x.

    The autocovariance is computed periodically through the FFT.
    """
    fluctuation = field.intensity - field.intensity.mean()
    spectrum = np.abs(np.fft.fft2(fluctuation)) ** 2
    autocovariance = np.real(np.fft.ifft2(spectrum))
    cut = autocovariance[: field.grid.n_x // 2, 0] / autocovariance[0, 0]
    below = np.nonzero(cut <= math.exp(-1.0))[0]
    dx = field.grid.spacing[0]
    if below.size == 0:
        return float("inf")
    index = int(below[0])
    # linear interpolation between the bracketing lags
    upper, lower = cut[index - 1], cut[index]
    fraction = (upper - math.exp(-1.0)) / (upper - lower)
    return float((index - 1 + fraction) * dx)


def _hermite_gauss_1d(order: int, x: np.ndarray, width: float) -> np.ndarray:
    scaled = x / width
    norm = 2.0**order * math.factorial(order) * math.sqrt(np.pi) * width
    envelope = np.exp(-0.5 * scaled**2) / math.sqrt(norm)
    return special.eval_hermite(order, scaled) * envelope


def _quantum_numbers(n_modes: int) -> np.ndarray:
    numbers = []
    shell = 0
    while len(numbers) < n_modes:
        numbers.extend((shell - ny, ny) for ny in range(shell + 1))
        shell += 1
    ordered = sorted(numbers, key=lambda pair: (pair[0] + pair[1], pair[0]))
    return np.array(ordered[:n_modes], dtype=np.int64)


def hermite_gauss_modes(grid: SpeckleGrid, n_modes: int, width: float = 1.0) -> ModeSet:
    """
    Return the lowest 2D harmonic-oscillator modes phi_(nx,ny)(x, y).

    Modes are ordered by energy nx + ny, then by nx; mode 0 is the Gaussian
    ground state with peak 1 / (sqrt(pi) width).

    Raises:
        DomainError: If n_modes < 1 or width is not positive.
        ResolutionError: If the grid extent is below 8 widths or the sampled
            modes are not orthonormal within 1e-6.
    """
    if n_modes < 1:
        raise DomainError(f"Need at least one mode, got {n_modes}")
    if not width > 0:
        raise DomainError(f"width must be positive, got {width}")
    if 2.0 * grid.half_extent < 8.0 * width:
        raise ResolutionError(
            f"Grid extent {2.0 * grid.half_extent} is below 8 trap widths ({width})"
        )
    numbers = _quantum_numbers(n_modes)
    x, y = grid.axes()
    modes = np.stack(
        [
            np.outer(_hermite_gauss_1d(nx, x, width), _hermite_gauss_1d(ny, y, width))
            for nx, ny in numbers
        ]
    ).astype(np.complex128)
    mode_set = ModeSet(grid, modes, numbers, width)
    deviation = float(np.max(np.abs(mode_set.gram() - np.eye(n_modes))))
    if deviation > GRAM_TOLERANCE:
        raise ResolutionError(
            f"{n_modes} modes are not resolved on a {grid.shape} grid "
            f"(Gram deviation {deviation:.2e})"
        )
    return mode_set


def _check_shared_grid(field: SpeckleField, modes: ModeSet) -> None:
    if field.grid != modes.grid:
        raise DomainError("Speckle field and modes live on different grids")


def _overlap(modes: ModeSet, weight: np.ndarray) -> np.ndarray:
    flat = modes.flat()
    matrix = (flat.conj() * (weight.ravel() * modes.grid.cell_area)) @ flat.T
    return 0.5 * (matrix + matrix.conj().T)


def speckle_couplings(
    field: SpeckleField, modes: ModeSet, energy_scale: float = 1.0
) -> RankTwoCoupling:
    """
    Return J_ik = (sqrt(E)/2) int phi*_i phi_k (mean_detuning / Delta(r)).

    Raises:
        DomainError: If the field and modes use different grids or the energy
            scale is negative.
    """
    _check_shared_grid(field, modes)
    if energy_scale < 0:
        raise DomainError(f"energy_scale must be nonnegative, got {energy_scale}")
    matrix = 0.5 * math.sqrt(energy_scale) * _overlap(modes, field.inverse_detuning)
    return RankTwoCoupling(modes.n_modes, matrix)


def jump_couplings(
    field: SpeckleField, modes: ModeSet, dissipation: float = 1.0
) -> RankTwoCoupling:
    """
    Return the dissipation couplings K_ij from int phi*_i phi_j (mean/Delta)^2.

    The matrix is rescaled so that the root-mean-square off-diagonal entry is
    K / N.

    Raises:
        DomainError: If the grids differ or the field is too uniform to carry
            off-diagonal jump couplings.
    """
    _check_shared_grid(field, modes)
    raw = _overlap(modes, field.inverse_detuning**2)
    n_modes = modes.n_modes
    off_diagonal = raw[~np.eye(n_modes, dtype=bool)]
    rms = math.sqrt(float(np.mean(np.abs(off_diagonal) ** 2))) if n_modes > 1 else 0.0
    if rms <= 1e-12 * float(np.mean(np.abs(np.diag(raw)))):
        raise DomainError("Jump couplings need a disordered field (contrast > 0)")
    target = dissipation / n_modes
    return RankTwoCoupling(n_modes, raw * (target / rms), target**2)


class ClassStatistics(NamedTuple):
    """Per-class moments and goodness of fit."""

    mean: float
    variance: float
    skewness: float
    n_entries: int
    ks_gaussian: float
    p_gaussian: float
    ks_bessel: float
    p_bessel: float


def class_variance_scan(
    tensors: Sequence[CouplingTensor],
) -> Dict[CouplingClass, ClassStatistics]:
    """
    Return per-class statistics of an ensemble of low-rank tensors.

    Entries are centred on the class mean. The Gaussian fit uses the sample
    standard deviation; the Bessel fit uses the law of a sum of Gaussian
    products with matching variance.
    The skewness of the centred entries is reported alongside both fits.

    Raises:
        DomainError: If fewer than 100 tensors are given.
    """
    if len(tensors) < MIN_CLASS_ENSEMBLE:
        raise DomainError(
            f"Class statistics need at least {MIN_CLASS_ENSEMBLE} tensors, "
            f"got {len(tensors)}"
        )
    real = all(np.isrealobj(t.matrix) or not np.any(t.matrix.imag) for t in tensors)
    terms = product_terms(real)
    scan = {}
    for coupling_class in CouplingClass:
        values = np.concatenate([class_entries(t, coupling_class) for t in tensors])
        values = np.real(values)
        if values.size < 2:
            continue
        mean = float(np.mean(values))
        centred = values - mean
        std = float(np.std(centred, ddof=1))
        gaussian = stats.kstest(centred / std, "norm")
        scale = std / math.sqrt(terms)
        bessel = stats.kstest(centred, lambda x: product_sum_cdf(x, scale, terms))
        scan[coupling_class] = ClassStatistics(
            mean,
            std**2,
            float(stats.skew(centred)),
            int(values.size),
            float(gaussian.statistic),
            float(gaussian.pvalue),
            float(bessel.statistic),
            float(bessel.pvalue),
        )
        logger.info(
            "Class %s: variance %.4e, skew %.3f, KS gaussian %.4f, KS bessel %.4f",
            coupling_class.value,
            std**2,
            scan[coupling_class].skewness,
            gaussian.statistic,
            bessel.statistic,
        )
    return scan


@dataclass(frozen=True, eq=False)
class JKDecorrelation:
    """Correlation between summed J and K fluctuations versus R."""

    r_values: np.ndarray
    correlation: np.ndarray
    stderr: np.ndarray
    n_samples: np.ndarray
    fit_constant: float
    fit_r_squared: float
    independent: bool


def _jk_entries(parities: np.ndarray) -> np.ndarray:
    """Return the (a, b) mode pairs with a even and nonzero and b odd."""
    even = [a for a in range(1, parities.size) if parities[a] > 0]
    odd = [b for b in range(parities.size) if parities[b] < 0]
    return np.array([(a, b) for a in even for b in odd], dtype=np.int64)


def _summed_square_correlation(x: np.ndarray, y: np.ndarray, n_layers: int) -> float:
    """
    Return corr(X^2, Y^2) for sums X, Y of n_layers independent copies of (x, y).

    The per-layer joint moments are estimated column by column from the
    samples in axis 0, and the correlations are averaged over the columns.
    """
    x = x - x.mean(axis=0)
    y = y - y.mean(axis=0)
    m20, m02, m11 = np.mean(x**2, 0), np.mean(y**2, 0), np.mean(x * y, 0)
    m22, m40, m04 = np.mean(x**2 * y**2, 0), np.mean(x**4, 0), np.mean(y**4, 0)
    r = float(n_layers)
    covariance = r * (m22 - m20 * m02 - 2.0 * m11**2) + 2.0 * r**2 * m11**2
    var_x = r * (m40 - 3.0 * m20**2) + 2.0 * r**2 * m20**2
    var_y = r * (m04 - 3.0 * m02**2) + 2.0 * r**2 * m02**2
    return float(np.mean(covariance / np.sqrt(var_x * var_y)))


def jk_decorrelation(
    fields: Sequence[SpeckleField],
    modes: ModeSet,
    r_values: Sequence[int],
    energy_scale: float = 1.0,
    dissipation: float = 1.0,
    independent: bool = False,
) -> JKDecorrelation:
    """
    Measure how summed low-rank couplings and jump rates decorrelate with R.

    Every field gives a pair per mode pair (a, b) with a even and b odd under
    inversion: x, the tensor entry J_(a0)(b0) = J_ab J_00 - J_0b J_a0, and y,
    the jump rate |K_ab|^2. x is odd and y even, so the summed pairs have no
    linear covariance and the reported statistic is the correlation of the
    squared fluctuations of X = sum x and Y = sum y over R independent
    layers. It is built from the per-layer joint moments, which makes every
    R use the whole pool; it is O(1) at R = 1 and falls off as 1/R.

    Args:
        fields (Sequence[SpeckleField]): The pool of independent fields.
        modes (ModeSet): The trap modes, N >= 4.
        r_values (Sequence[int]): Layer counts to scan.
        energy_scale (float): Coupling energy scale.
        dissipation (float): The jump scale K.
        independent (bool): Pair J and K from disjoint halves of the pool.

    Returns:
        JKDecorrelation: Correlations with standard errors and a c/R fit.

    Raises:
        DomainError: If N < 4, an R is below 1 or fewer than four pairs of
            samples are available.
    """
    if modes.n_modes < 4:
        raise DomainError(f"J-K decorrelation needs N >= 4, got {modes.n_modes}")
    r_values = np.asarray(sorted(r_values), dtype=np.int64)
    if r_values.size == 0 or r_values[0] < 1:
        raise DomainError(f"Layer counts must be positive, got {r_values.tolist()}")
    n_samples = len(fields) // 2 if independent else len(fields)
    if n_samples < 4:
        raise DomainError(
            f"{len(fields)} fields leave {n_samples} samples (need at least 4)"
        )

    entries = _jk_entries(modes.parities)
    tensor_entries, jump_rates = [], []
    for field in fields:
        tensor, _ = lowrank_tensor(speckle_couplings(field, modes, energy_scale))
        jump = jump_couplings(field, modes, dissipation).matrix
        tensor_entries.append([tensor.entry(a, 0, b, 0).real for a, b in entries])
        jump_rates.append(np.abs(jump[entries[:, 0], entries[:, 1]]) ** 2)
    x = np.array(tensor_entries)
    y = np.array(jump_rates)
    if independent:
        x, y = x[:n_samples], y[n_samples : 2 * n_samples]
    else:
        x, y = x[:n_samples], y[:n_samples]

    correlations, errors = [], []
    for n_layers in r_values:
        correlation = _summed_square_correlation(x, y, int(n_layers))
        correlations.append(correlation)
        errors.append(math.sqrt(max(1.0 - correlation**2, 0.0) / (n_samples - 2)))
        logger.debug("R=%d corr=%.4f over %d samples", n_layers, correlation, n_samples)

    correlations = np.array(correlations)
    fit = stats.linregress(1.0 / r_values, np.abs(correlations))
    return JKDecorrelation(
        r_values,
        correlations,
        np.array(errors),
        np.full(r_values.size, n_samples, dtype=np.int64),
        float(fit.slope),
        float(fit.rvalue**2),
        independent,
    )


def write_field(path: Path, field: SpeckleField) -> Tuple[Path, Path]:
    """
    Write the detuning as a flat little-endian float64 grid plus a JSON header.

    Args:
        path (Path): Target path; ".bin" and ".json" suffixes are applied.
        field (SpeckleField): The field to export.

    Returns:
        Tuple[Path, Path]: The data file and the header file.

    Raises:
        OutputError: If either file cannot be written.
    """
    path = Path(path)
    data_path = path.with_suffix(".bin")
    header_path = path.with_suffix(".json")
    header = {
        "schema_version": SCHEMA_VERSION,
        "dtype": "<f8",
        "order": "C",
        "shape": list(field.grid.shape),
        "half_extent": field.grid.half_extent,
        "spacing": list(field.grid.spacing),
        "mean_detuning": field.mean_detuning,
        "correlation_length": field.correlation_length,
        "contrast": field.contrast,
        "seed": field.seed,
    }
    try:
        data_path.write_bytes(field.detuning.astype("<f8").tobytes(order="C"))
        header_path.write_text(json.dumps(header, indent=1) + "\n", encoding="utf-8")
    except OSError as e:
        raise OutputError(f"Cannot write speckle field to {path}: {e}") from e
    logger.info("Wrote speckle field %s to %s", field.grid.shape, data_path)
    return data_path, header_path
