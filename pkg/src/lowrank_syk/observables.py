"""Chaos diagnostics: spectral form factor, OTOCs, and level statistics."""

# Standard Python Libraries
from dataclasses import dataclass, field
import logging
from typing import Callable, Dict, NamedTuple, Optional, Sequence, Union

# Third-Party Libraries
from cyhy_logging import CYHY_ROOT_LOGGER
import numpy as np

from .ensemble import gather_realizations
from .errors import DomainError
from .fock import annihilator, creator, number_operator
from .hamiltonian import HamiltonianMatrix
from .trotter import CircuitSchedule, cycle_unitary, exact_evolution

STROBOSCOPIC_TOLERANCE = 1e-9

logger = logging.getLogger(f"{CYHY_ROOT_LOGGER}.{__name__}")


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Values of an observable on a strictly increasing time grid."""

    times: np.ndarray
    values: np.ndarray
    stderr: Optional[np.ndarray] = None
    meta: Dict[str, object] = field(default_factory=dict)
    columns: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        """Check the grid ordering and column lengths."""
        times = np.asarray(self.times, dtype=np.float64)
        if times.ndim != 1 or np.any(np.diff(times) <= 0):
            raise DomainError("Times must be a strictly increasing 1D grid")
        for name, column in [("values", self.values), ("stderr", self.stderr)] + list(
            self.columns.items()
        ):
            if column is not None and len(column) != len(times):
                raise DomainError(f"Column {name} does not match the time grid")
        object.__setattr__(self, "times", times)


Evolver = Union[HamiltonianMatrix, CircuitSchedule]


def _describe(basis) -> Dict[str, object]:
    return {"n_sites": basis.n_sites, "sector": basis.describe()}


def log_time_grid(t_min: float, t_max: float, count: int) -> np.ndarray:
    """Return 0 followed by count log-spaced times in [t_min, t_max]."""
    return np.concatenate([[0.0], np.geomspace(t_min, t_max, count)])


def stroboscopic_grid(dt: float, t_max: float, count: int) -> np.ndarray:
    """Return 0 and roughly log-spaced distinct multiples of dt up to t_max."""
    steps = np.unique(np.rint(np.geomspace(1, max(t_max / dt, 1), count)))
    return np.concatenate([[0.0], steps * dt])


def _cycle_counts(schedule: CircuitSchedule, times: np.ndarray) -> np.ndarray:
    counts = times / schedule.dt
    rounded = np.rint(counts)
    mismatch = np.abs(counts - rounded) > STROBOSCOPIC_TOLERANCE * np.maximum(
        1.0, np.abs(counts)
    )
    if np.any(mismatch):
        raise DomainError(
            f"Times {times[mismatch][:3]} are not multiples of the cycle step "
            f"dt={schedule.dt}"
        )
    return rounded.astype(np.int64)


def _schedule_phases(schedule: CircuitSchedule) -> np.ndarray:
    if schedule.shuffled:
        raise DomainError("The form factor needs an unshuffled, periodic schedule")
    eigenvalues = np.linalg.eigvals(cycle_unitary(schedule).matrix)
    return eigenvalues / np.abs(eigenvalues)


def sff(evolver: Evolver, times: Sequence[float]) -> TimeSeries:
    """
    Return the spectral form factor |Tr U(t)|^2 / D^2.

    For a schedule, U(t) is the Trotter product after t/dt cycles.

    Args:
        evolver (Evolver): A Hamiltonian or a circuit schedule.
        times (Sequence[float]): Strictly increasing evaluation times.

    Returns:
        TimeSeries: The form factor at each time.

    Raises:
        DomainError: If a schedule time is not a multiple of dt or the
            schedule is shuffled.
    """
    times = np.asarray(times, dtype=np.float64)
    if isinstance(evolver, CircuitSchedule):
        counts = _cycle_counts(evolver, times)
        phases = _schedule_phases(evolver)
        traces = np.array([np.sum(phases**count) for count in counts])
        basis = evolver.basis
        meta = {"evolver": "trotter", "n_layers": evolver.n_layers, "dt": evolver.dt}
    else:
        energies = evolver.spectrum
        traces = np.exp(-1j * np.outer(times, energies)).sum(axis=1)
        basis = evolver.basis
        meta = {"evolver": "exact"}
    values = np.abs(traces) ** 2 / basis.dimension**2
    meta = {"observable": "sff", **_describe(basis), **meta}
    return TimeSeries(times, values, meta=meta)


def sff_from_trace(evolver: Evolver, times: Sequence[float]) -> TimeSeries:
    """Return the form factor from explicit matrix traces of U(t)."""
    times = np.asarray(times, dtype=np.float64)
    if isinstance(evolver, CircuitSchedule):
        counts = _cycle_counts(evolver, times)
        cycle = cycle_unitary(evolver).matrix
        traces = np.array(
            [np.trace(np.linalg.matrix_power(cycle, count)) for count in counts]
        )
        basis = evolver.basis
    else:
        traces = np.array([np.trace(exact_evolution(evolver, t).matrix) for t in times])
        basis = evolver.basis
    values = np.abs(traces) ** 2 / basis.dimension**2
    return TimeSeries(times, values, meta={"observable": "sff", **_describe(basis)})


def _site_operator(h: HamiltonianMatrix, site: int, kind: str) -> np.ndarray:
    if kind == "quadrature":
        if not h.basis.is_full_space:
            raise DomainError("Quadrature OTOCs need the full Fock space")
        quadrature = annihilator(h.basis, site).entries + creator(h.basis, site).entries
        return quadrature.toarray()
    if kind == "number":
        return 2.0 * number_operator(h.basis, site).toarray() - np.eye(h.dimension)
    raise DomainError(f"Unknown OTOC operator kind {kind!r}")


def otoc(
    h: HamiltonianMatrix,
    site_w: int,
    site_v: int,
    times: Sequence[float],
    kind: str = "quadrature",
) -> TimeSeries:
    """
    Return the infinite-temperature OTOC F(t) = Re Tr[W(t) V W(t) V] / D.

    W and V are the Hermitian unitaries c + c^dagger on two sites, or
    2 n - 1 when kind is "number". The squared commutator
    C(t) = 2 (1 - F(t)/F(0)) is returned as an extra column.

    Raises:
        DomainError: If the sites coincide or the operator kind needs the
            full space.
    """
    if site_w == site_v:
        raise DomainError("OTOC sites must be distinct")
    times = np.asarray(times, dtype=np.float64)
    energies, vectors = h.eigensystem
    w_eigen = vectors.conj().T @ _site_operator(h, site_w, kind) @ vectors
    v_eigen = vectors.conj().T @ _site_operator(h, site_v, kind) @ vectors
    gaps = energies[:, None] - energies[None, :]

    def correlator(t: float) -> complex:
        product = (w_eigen * np.exp(1j * gaps * t)) @ v_eigen
        return np.sum(product * product.T) / h.dimension

    initial = correlator(0.0)
    raw = np.array([correlator(t) for t in times])
    values = raw.real
    meta = {
        "observable": "otoc",
        "kind": kind,
        "site_w": site_w,
        "site_v": site_v,
        "imaginary_residual": float(np.max(np.abs(raw.imag), initial=0.0)),
        "initial": float(initial.real),
        **_describe(h.basis),
    }
    commutator = 2.0 * (1.0 - values / initial.real)
    return TimeSeries(times, values, meta=meta, columns={"commutator": commutator})


class GapRatio(NamedTuple):
    """Mean consecutive-gap ratio of a spectrum."""

    mean: float
    n_ratios: int
    degenerate: bool


def gap_ratio(
    levels: Sequence[float],
    central_fraction: float = 0.5,
    degeneracy_tolerance: float = 1e-10,
) -> GapRatio:
    """
    Return the mean of min(s_n, s_n+1) / max(s_n, s_n+1) over central levels.

    Args:
        levels (Sequence[float]): Energy levels in any order.
        central_fraction (float): Fraction of levels kept around the middle.
        degeneracy_tolerance (float): Relative spacing below which two levels
            count as degenerate.

    Returns:
        GapRatio: The mean ratio, the number of ratios, and a degeneracy flag.

    Raises:
        DomainError: If fewer than three central levels remain.
    """
    levels = np.sort(np.asarray(levels, dtype=np.float64))
    trim = int(round(levels.size * (1.0 - central_fraction) / 2.0))
    central = levels[trim : levels.size - trim]
    if central.size < 3:
        raise DomainError(f"Need at least three central levels, got {central.size}")
    spacings = np.diff(central)
    scale = np.mean(spacings)
    degenerate = bool(scale <= 0 or np.any(spacings < degeneracy_tolerance * scale))
    if degenerate:
        logger.warning("Spectrum has degenerate levels in the central window")
    smaller = np.minimum(spacings[:-1], spacings[1:])
    larger = np.maximum(spacings[:-1], spacings[1:])
    valid = larger > 0
    ratios = smaller[valid] / larger[valid]
    mean = float(np.mean(ratios)) if ratios.size else float("nan")
    return GapRatio(mean, int(ratios.size), degenerate)


def level_spacing_r(h: HamiltonianMatrix, central_fraction: float = 0.5) -> GapRatio:
    """
    Return the gap ratio of a Hamiltonian restricted to one charge sector.

    Raises:
        DomainError: If the Hamiltonian lives on the full space.
    """
    if h.basis.is_full_space:
        raise DomainError("Level statistics need a fixed-charge sector")
    return gap_ratio(h.spectrum, central_fraction)


async def disorder_average(
    generator: Callable[[int, np.random.Generator], TimeSeries],
    n_realizations: int,
    seed: int,
    workers: int = 1,
    keys: Sequence[int] = (),
) -> TimeSeries:
    """
    Average realizations of a time series pointwise.

    Args:
        generator (Callable): Builds one realization from (index, rng).
        n_realizations (int): The ensemble size, at least 2.
        seed (int): The master seed.
        workers (int): Realizations evaluated at once.
        keys (Sequence[int]): Extra stream keys.

    Returns:
        TimeSeries: The mean with its standard error (ddof = 1).

    Raises:
        DomainError: If fewer than two realizations are requested or the
            realizations disagree on their time grid.
    """
    if n_realizations < 2:
        raise DomainError(f"Need at least two realizations, got {n_realizations}")
    realizations = await gather_realizations(
        generator, n_realizations, seed, workers, keys, "Disorder average"
    )
    times = realizations[0].times
    for series in realizations[1:]:
        if not np.array_equal(series.times, times):
            raise DomainError("Realizations do not share one time grid")
    stacked = np.stack([np.asarray(series.values) for series in realizations])
    mean = stacked.mean(axis=0)
    stderr = stacked.std(axis=0, ddof=1) / np.sqrt(n_realizations)
    columns = {}
    for name in realizations[0].columns:
        columns[name] = np.stack([s.columns[name] for s in realizations]).mean(axis=0)
    meta = {
        **realizations[0].meta,
        "n_realizations": n_realizations,
        "seed": seed,
    }
    return TimeSeries(times, mean, stderr, meta, columns)


def sff_average_error(exact: TimeSeries, trotter: TimeSeries) -> float:
    """
    Return the mean relative absolute deviation of a Trotterized form factor.

    Raises:
        DomainError: If the two series use different times.
    """
    if not np.allclose(exact.times, trotter.times, rtol=1e-12, atol=1e-12):
        raise DomainError("Form factors must share one time grid")
    reference = np.asarray(exact.values)
    return float(np.mean(np.abs(np.asarray(trotter.values) - reference) / reference))
