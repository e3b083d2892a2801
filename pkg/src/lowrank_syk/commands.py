"""One coroutine per subcommand, each writing a complete run directory."""

# Standard Python Libraries
import asyncio
import itertools
import logging
from typing import Any, Awaitable, Callable, Dict, List, Optional, Tuple

# Third-Party Libraries
from cyhy_logging import CYHY_ROOT_LOGGER
import numpy as np

from . import GAP_RATIO_REFERENCE, KL_ASYMPTOTIC_CONSTANT
from .disorder import (
    CouplingClass,
    CouplingTensor,
    class_entries,
    dense_variance,
    lowrank_tensor,
    rank_two_sigma,
    reduced_variance,
    sample_dense_gaussian,
    sample_modSYK,
    sample_rank_two,
    write_tensor,
)
from .divergence import kl_scaling_scan
from .ensemble import gather_realizations, realization_stream
from .errors import CapacityError
from .fock import FockBasis, build_basis
from .hamiltonian import (
    HamiltonianMatrix,
    build_dense,
    build_layers,
    dump_hamiltonian,
    mass_term_weight,
)
from .models import LowRankSykConfig, resolve_charge
from .observables import (
    TimeSeries,
    disorder_average,
    level_spacing_r,
    log_time_grid,
    otoc,
    sff,
    sff_average_error,
    stroboscopic_grid,
)
from .output import RunDirectory, open_run
from .sdsolver import DissipationParams, SDGrid, solve_sd
from .speckle import (
    SpeckleGrid,
    class_variance_scan,
    generate_speckle,
    hermite_gauss_modes,
    jk_decorrelation,
    speckle_couplings,
    write_field,
)
from .trotter import CircuitSchedule, bch_error_estimate, delta_u

# Stream keys keep the random draws of different commands apart
SAMPLE_KEY = 1
BUILD_KEY = 2
TROTTER_KEY = 3
SFF_KEY = 4
OTOC_KEY = 5
SPECKLE_KEY = 6
LEVELS_KEY = 7

# CSV column prefixes of the contour components
CONTOUR_COLUMNS = {"++": "g_pp", "+-": "g_pm", "-+": "g_mp", "--": "g_mm"}

logger = logging.getLogger(f"{CYHY_ROOT_LOGGER}.{__name__}")


def _basis(config: LowRankSykConfig, n_sites: int, sector) -> FockBasis:
    return build_basis(n_sites, resolve_charge(sector, n_sites), config.run.max_sites)


def _model_hamiltonian(
    config: LowRankSykConfig,
    section,
    basis: FockBasis,
    rng: np.random.Generator,
) -> Tuple[HamiltonianMatrix, Optional[List[HamiltonianMatrix]]]:
    """Return H and, for the low-rank model, its layers."""
    real = config.run.real_couplings
    if section.model == "dense":
        return build_dense(basis, section.coupling, rng, real, config.run.seed), None
    layers, h_sim = build_layers(
        basis,
        section.coupling,
        section.n_layers or basis.n_sites,
        rng,
        section.include_mass,
        real,
        config.run.seed,
    )
    return h_sim, layers


def _series_columns(series: TimeSeries, name: str) -> Dict[str, np.ndarray]:
    columns = {"time": series.times, name: series.values}
    if series.stderr is not None:
        columns[f"{name}_stderr"] = series.stderr
    return columns


async def cmd_sample(config: LowRankSykConfig, run: RunDirectory) -> Dict[str, Any]:
    """Sample coupling tensors and report their per-class second moments."""
    section = config.sample
    n_sites = section.n_sites
    real = config.run.real_couplings
    if section.model == "dense":
        expected = dense_variance(n_sites, section.coupling)
    else:
        expected = reduced_variance(n_sites, section.coupling)

    def draw(index: int, rng: np.random.Generator) -> CouplingTensor:
        if section.model == "dense":
            return sample_dense_gaussian(n_sites, section.coupling, rng, real)
        if section.model == "lowrank":
            sigma = rank_two_sigma(n_sites, section.coupling)
            tensor, _ = lowrank_tensor(sample_rank_two(n_sites, sigma, rng, real))
            return tensor
        default = np.sqrt(dense_variance(n_sites, section.coupling))
        return sample_modSYK(
            n_sites,
            default if section.sigma_d is None else section.sigma_d,
            default if section.sigma_a is None else section.sigma_a,
            default if section.sigma_o is None else section.sigma_o,
            rng,
            real,
        )

    tensors = await gather_realizations(
        draw,
        section.n_samples,
        config.run.seed,
        config.run.workers,
        (SAMPLE_KEY,),
        "Sampling couplings",
    )
    for index, tensor in enumerate(tensors):
        write_tensor(run.file(f"tensor_{index:04d}.json"), tensor, expected)

    classes = list(CouplingClass)
    counts, mean_squares = [], []
    for coupling_class in classes:
        entries = np.concatenate([class_entries(t, coupling_class) for t in tensors])
        counts.append(entries.size)
        mean_squares.append(np.mean(np.abs(entries) ** 2) if entries.size else 0.0)
    run.write_csv(
        "classes.csv",
        {
            "class": np.arange(len(classes)),
            "n_entries": counts,
            "mean_square": mean_squares,
        },
        integer_columns=("class", "n_entries"),
    )
    return {
        "model": section.model,
        "n_samples": section.n_samples,
        "expected_variance": expected,
        "classes": [c.value for c in classes],
        "mean_square": dict(zip([c.value for c in classes], mean_squares)),
    }


async def cmd_build(config: LowRankSykConfig, run: RunDirectory) -> Dict[str, Any]:
    """Build R layer Hamiltonians and H_sim and dump them in binary form."""
    section = config.build
    basis = _basis(config, section.n_sites, section.sector)
    rng = realization_stream(config.run.seed, BUILD_KEY)
    layers, h_sim = await asyncio.to_thread(
        build_layers,
        basis,
        section.coupling,
        section.n_layers,
        rng,
        section.include_mass,
        config.run.real_couplings,
        config.run.seed,
    )

    for index, layer in enumerate(layers):
        dump_hamiltonian(run.file(f"layer_{index:03d}.bin"), layer)
    dump_hamiltonian(run.file("h_sim.bin"), h_sim)
    scale = np.sqrt(basis.dimension)
    weights = mass_term_weight(layers)
    run.write_csv(
        "layers.csv",
        {
            "layer": np.arange(len(layers)),
            "norm": [np.linalg.norm(layer.matrix) / scale for layer in layers],
            "mass_weight": weights.per_layer,
        },
        integer_columns=("layer",),
    )
    return {
        "sector": basis.describe(),
        "dimension": basis.dimension,
        "n_layers": len(layers),
        "h_sim_norm": float(np.linalg.norm(h_sim.matrix) / scale),
        "charge_residual": h_sim.charge_residual(),
        "mean_mass_weight": weights.mean,
    }


def _trotter_cell(
    config: LowRankSykConfig, basis: FockBasis, n_layers: int, coupling_dt: float
) -> Callable[[int, np.random.Generator], Tuple[float, float]]:
    section = config.trotter_scan
    dt = coupling_dt / section.coupling
    n_steps = max(1, int(round(section.total_time / coupling_dt)))

    def realization(index: int, rng: np.random.Generator) -> Tuple[float, float]:
        layers, _ = build_layers(
            basis,
            section.coupling,
            n_layers,
            rng,
            section.include_mass,
            config.run.real_couplings,
            config.run.seed,
        )
        shuffle_seed = int(rng.integers(2**63)) if section.shuffle else None
        return (
            delta_u(layers, dt, n_steps, shuffle_seed),
            bch_error_estimate(layers, dt, n_steps),
        )

    return realization


async def cmd_trotter_scan(
    config: LowRankSykConfig, run: RunDirectory
) -> Dict[str, Any]:
    """
    Measure the ensemble Trotter error over a grid of (N, R, J dt).

    Realizations with the same (N, R) share their disorder across time steps,
    and the total time J T is the same in every cell.

    Raises:
        CapacityError: If the grid has more cells than max_cells.
    """
    section = config.trotter_scan
    cells = list(
        itertools.product(section.n_sites, section.n_layers, section.coupling_dt)
    )
    if len(cells) > section.max_cells:
        raise CapacityError(
            f"Trotter scan has {len(cells)} cells, above the cap of "
            f"{section.max_cells}"
        )
    bases = {n: _basis(config, n, section.sector) for n in sorted(set(section.n_sites))}

    rows: Dict[str, list] = {
        "n_sites": [],
        "n_layers": [],
        "coupling_dt": [],
        "n_steps": [],
        "delta_u": [],
        "delta_u_stderr": [],
        "bch_estimate": [],
    }
    per_realization: Dict[str, list] = {
        "n_sites": [],
        "n_layers": [],
        "coupling_dt": [],
        "n_steps": [],
        "realization": [],
        "delta_u": [],
    }
    for n_sites, n_layers, coupling_dt in cells:
        n_steps = max(1, int(round(section.total_time / coupling_dt)))
        results = await gather_realizations(
            _trotter_cell(config, bases[n_sites], n_layers, coupling_dt),
            section.n_realizations,
            config.run.seed,
            config.run.workers,
            (TROTTER_KEY, n_sites, n_layers),
            f"N={n_sites} R={n_layers} J dt={coupling_dt}",
        )
        errors = np.array([result[0] for result in results])
        estimates = np.array([result[1] for result in results])
        per_realization["n_sites"].extend([n_sites] * errors.size)
        per_realization["n_layers"].extend([n_layers] * errors.size)
        per_realization["coupling_dt"].extend([coupling_dt] * errors.size)
        per_realization["n_steps"].extend([n_steps] * errors.size)
        per_realization["realization"].extend(range(errors.size))
        per_realization["delta_u"].extend(errors)
        rows["n_sites"].append(n_sites)
        rows["n_layers"].append(n_layers)
        rows["coupling_dt"].append(coupling_dt)
        rows["n_steps"].append(n_steps)
        rows["delta_u"].append(errors.mean())
        rows["delta_u_stderr"].append(errors.std(ddof=1) / np.sqrt(errors.size))
        rows["bch_estimate"].append(estimates.mean())
        logger.info(
            "N=%d R=%d J dt=%g: delta U = %.4e",
            n_sites,
            n_layers,
            coupling_dt,
            errors.mean(),
        )
    run.write_csv(
        "delta_u.csv", rows, integer_columns=("n_sites", "n_layers", "n_steps")
    )
    run.write_csv(
        "delta_u_realizations.csv",
        per_realization,
        integer_columns=("n_sites", "n_layers", "n_steps", "realization"),
    )
    return {"n_cells": len(cells), "total_time": section.total_time}


async def cmd_sff(config: LowRankSykConfig, run: RunDirectory) -> Dict[str, Any]:
    """Average the spectral form factor, optionally against its Trotter product."""
    section = config.sff
    basis = _basis(config, section.n_sites, section.sector)
    dt = section.coupling_dt / section.coupling
    if section.trotter:
        times = stroboscopic_grid(dt, section.t_max, section.n_times)
    else:
        times = log_time_grid(section.t_min, section.t_max, section.n_times)

    def realization(index: int, rng: np.random.Generator) -> TimeSeries:
        h, layers = _model_hamiltonian(config, section, basis, rng)
        exact = sff(h, times)
        if not section.trotter:
            return exact
        trotter = sff(CircuitSchedule(tuple(layers), dt), times)
        return TimeSeries(
            times, exact.values, meta=exact.meta, columns={"trotter": trotter.values}
        )

    average = await disorder_average(
        realization,
        section.n_realizations,
        config.run.seed,
        config.run.workers,
        (SFF_KEY,),
    )
    columns = _series_columns(average, "sff")
    columns["n_realizations"] = np.full(times.size, section.n_realizations)
    results = {
        "dimension": basis.dimension,
        "plateau": 1.0 / basis.dimension,
        "initial": float(average.values[0]),
        "minimum": float(np.min(average.values)),
    }
    if section.trotter:
        trotter = TimeSeries(times, average.columns["trotter"])
        columns["sff_trotter"] = trotter.values
        exact = TimeSeries(times[1:], average.values[1:])
        results["trotter_error"] = sff_average_error(
            exact, TimeSeries(times[1:], trotter.values[1:])
        )
    run.write_csv("sff.csv", columns, integer_columns=("n_realizations",))
    return results


async def cmd_otoc(config: LowRankSykConfig, run: RunDirectory) -> Dict[str, Any]:
    """Average the infinite-temperature OTOC and its squared commutator."""
    section = config.otoc
    basis = _basis(config, section.n_sites, section.sector)
    times = np.linspace(0.0, section.t_max, section.n_times)

    def realization(index: int, rng: np.random.Generator) -> TimeSeries:
        h, _ = _model_hamiltonian(config, section, basis, rng)
        return otoc(h, section.site_w, section.site_v, times, section.kind)

    average = await disorder_average(
        realization,
        section.n_realizations,
        config.run.seed,
        config.run.workers,
        (OTOC_KEY,),
    )
    columns = _series_columns(average, "otoc")
    columns["commutator"] = average.columns["commutator"]
    columns["n_realizations"] = np.full(times.size, section.n_realizations)
    run.write_csv("otoc.csv", columns, integer_columns=("n_realizations",))
    return {
        "kind": section.kind,
        "initial": float(average.values[0]),
        "final": float(average.values[-1]),
        "imaginary_residual": average.meta.get("imaginary_residual"),
    }


async def cmd_kl_scan(config: LowRankSykConfig, run: RunDirectory) -> Dict[str, Any]:
    """Scan the KL divergence between the Gaussian and R-fold product sums."""
    section = config.kl_scan
    scan = await asyncio.to_thread(
        kl_scaling_scan,
        section.r_values,
        section.variance_matched,
        None,
        section.half_width,
        section.n_points,
        section.confidence,
    )
    run.write_csv(
        "kl.csv",
        {
            "r": scan.r_values,
            "forward": scan.forward,
            "reverse": scan.reverse,
            "scaled_forward": scan.forward * scan.r_values.astype(float) ** 2,
        },
        integer_columns=("r",),
    )
    return {
        "constant": scan.constant,
        "constant_interval": list(scan.constant_interval),
        "correction": scan.correction,
        "leading_constant": scan.leading_constant,
        "reverse_constant": scan.reverse_constant,
        "log_slope": scan.log_slope,
        "residual": scan.residual,
        "asymptotic_warning": scan.asymptotic_warning,
        "asymptotic_reference": KL_ASYMPTOTIC_CONSTANT,
        "variance_matched": scan.variance_matched,
    }


async def cmd_speckle(config: LowRankSykConfig, run: RunDirectory) -> Dict[str, Any]:
    """Derive couplings from speckle fields and measure their statistics."""
    section = config.speckle
    grid = SpeckleGrid(section.grid_points, section.grid_points, section.half_extent)
    modes = await asyncio.to_thread(
        hermite_gauss_modes, grid, section.n_sites, section.width
    )

    def draw(index: int, rng: np.random.Generator):
        return generate_speckle(
            grid,
            rng,
            section.correlation_length,
            section.contrast,
            section.mean_detuning,
            config.run.seed,
        )

    fields = await gather_realizations(
        draw,
        section.n_fields,
        config.run.seed,
        config.run.workers,
        (SPECKLE_KEY,),
        "Speckle fields",
    )
    tensors = [
        lowrank_tensor(speckle_couplings(field, modes, section.energy_scale))[0]
        for field in fields
    ]
    scan = class_variance_scan(tensors)
    decorrelation = await asyncio.to_thread(
        jk_decorrelation,
        fields,
        modes,
        section.r_values,
        section.energy_scale,
        section.dissipation,
        section.independent,
    )

    for index in range(min(section.export_fields, len(fields))):
        for path in write_field(run.path / f"field_{index:04d}", fields[index]):
            run.record(path)
    classes = list(scan)
    run.write_csv(
        "classes.csv",
        {
            "class": [list(CouplingClass).index(c) for c in classes],
            "n_entries": [scan[c].n_entries for c in classes],
            "mean": [scan[c].mean for c in classes],
            "variance": [scan[c].variance for c in classes],
            "skewness": [scan[c].skewness for c in classes],
            "ks_gaussian": [scan[c].ks_gaussian for c in classes],
            "p_gaussian": [scan[c].p_gaussian for c in classes],
            "ks_bessel": [scan[c].ks_bessel for c in classes],
            "p_bessel": [scan[c].p_bessel for c in classes],
        },
        integer_columns=("class", "n_entries"),
    )
    run.write_csv(
        "decorrelation.csv",
        {
            "r": decorrelation.r_values,
            "correlation": decorrelation.correlation,
            "stderr": decorrelation.stderr,
            "n_samples": decorrelation.n_samples,
        },
        integer_columns=("r", "n_samples"),
    )
    return {
        "class_codes": [c.value for c in CouplingClass],
        "classes": {c.value: scan[c]._asdict() for c in classes},
        "fit_constant": decorrelation.fit_constant,
        "fit_r_squared": decorrelation.fit_r_squared,
        "independent": decorrelation.independent,
    }


async def cmd_sd_solve(config: LowRankSykConfig, run: RunDirectory) -> Dict[str, Any]:
    """Solve the Keldysh Schwinger-Dyson equations for every dissipation K."""
    section = config.sd_solve
    grid = SDGrid(section.half_width, section.n_points, section.broadening)
    solutions = []
    for index, dissipation in enumerate(section.dissipation):
        params = DissipationParams(section.coupling, dissipation, section.ratio_rn)
        solution = await asyncio.to_thread(
            solve_sd, params, grid, section.mixing, section.tol, section.max_iter
        )
        green = solution.green
        columns = {"time": grid.times}
        for labels, name in CONTOUR_COLUMNS.items():
            component = green.component(labels)
            columns[f"{name}_re"] = component.real
            columns[f"{name}_im"] = component.imag
        run.write_csv(f"green_{index:02d}.csv", columns)
        solutions.append(
            {
                "dissipation": dissipation,
                "iterations": solution.iterations,
                "residual": solution.residuals[-1] if solution.residuals else 0.0,
                "conjugation_residual": green.conjugation_residual(),
            }
        )
        logger.info("K=%g solved in %d iterations", dissipation, solution.iterations)
    return {"eta": grid.eta, "solutions": solutions}


async def cmd_levels(config: LowRankSykConfig, run: RunDirectory) -> Dict[str, Any]:
    """Average the consecutive-gap ratio over an ensemble in one sector."""
    section = config.levels
    basis = _basis(config, section.n_sites, section.sector)

    def realization(index: int, rng: np.random.Generator):
        h, _ = _model_hamiltonian(config, section, basis, rng)
        return level_spacing_r(h, section.central_fraction)

    ratios = await gather_realizations(
        realization,
        section.n_realizations,
        config.run.seed,
        config.run.workers,
        (LEVELS_KEY,),
        "Level statistics",
    )
    means = np.array([ratio.mean for ratio in ratios])
    run.write_csv(
        "levels.csv",
        {
            "realization": np.arange(means.size),
            "gap_ratio": means,
            "n_ratios": [ratio.n_ratios for ratio in ratios],
            "degenerate": [int(ratio.degenerate) for ratio in ratios],
        },
        integer_columns=("realization", "n_ratios", "degenerate"),
    )
    mean = float(np.mean(means))
    nearest = min(
        GAP_RATIO_REFERENCE, key=lambda name: abs(GAP_RATIO_REFERENCE[name] - mean)
    )
    return {
        "sector": basis.describe(),
        "gap_ratio": mean,
        "stderr": float(np.std(means, ddof=1) / np.sqrt(means.size)),
        "nearest_ensemble": nearest,
        "reference": GAP_RATIO_REFERENCE[nearest],
        "any_degenerate": any(ratio.degenerate for ratio in ratios),
    }


Command = Callable[[LowRankSykConfig, RunDirectory], Awaitable[Dict[str, Any]]]

COMMANDS: Dict[str, Command] = {
    "sample": cmd_sample,
    "build": cmd_build,
    "trotter-scan": cmd_trotter_scan,
    "sff": cmd_sff,
    "otoc": cmd_otoc,
    "kl-scan": cmd_kl_scan,
    "speckle": cmd_speckle,
    "sd-solve": cmd_sd_solve,
    "levels": cmd_levels,
}


async def run_command(command: str, config: LowRankSykConfig) -> RunDirectory:
    """
    Run one subcommand in its run directory and write the summary.

    Raises:
        LowRankSykError: Whatever the command raises, unchanged.
    """
    run = open_run(config, command)
    results = await COMMANDS[command](config, run)
    run.finish(results)
    return run
