"""Model definitions for the configuration."""

# Standard Python Libraries
import os
from typing import List, Literal, Optional, Union

# Third-Party Libraries
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .. import (
    DEFAULT_MAX_SITES,
    DEFAULT_SD_HALF_WIDTH,
    DEFAULT_SD_MIXING,
    DEFAULT_SD_POINTS,
    DEFAULT_SPECKLE_CONTRAST,
    DEFAULT_SPECKLE_CORRELATION_LENGTH,
    DEFAULT_SPECKLE_GRID_POINTS,
    DEFAULT_SPECKLE_HALF_EXTENT,
    SCHEMA_VERSION,
)

Sector = Union[Literal["full", "half"], int]
ModelName = Literal["dense", "lowrank"]


def resolve_charge(sector: Sector, n_sites: int) -> Optional[int]:
    """Return the charge of a sector setting, None for the full space."""
    if sector == "full":
        return None
    if sector == "half":
        return n_sites // 2
    return int(sector)


class Section(BaseModel):
    """Common settings of every configuration section."""

    model_config = ConfigDict(extra="forbid")


class SystemSection(Section):
    """A many-body system: sites, sector and coupling scale."""

    n_sites: int = Field(8, ge=4, description="Number of fermionic sites N")
    sector: Sector = Field("full", description='"full", "half" or a charge Q')
    coupling: float = Field(1.0, gt=0, description="Energy scale J")

    @model_validator(mode="after")
    def check_sector(self):
        """Require 0 <= Q <= N for an explicit charge."""
        if isinstance(self.sector, int) and not 0 <= self.sector <= self.n_sites:
            raise ValueError(
                f"charge {self.sector} must lie in [0, {self.n_sites}] "
                f"for N={self.n_sites}"
            )
        return self


class Run(Section):
    """Settings shared by all commands."""

    seed: int = Field(0, ge=0, description="Master seed of every random stream")
    workers: int = Field(
        default_factory=lambda: os.cpu_count() or 1,
        ge=1,
        description="Realizations evaluated at once",
    )
    output_dir: str = Field("output", description="Root of the run directories")
    log_level: Optional[str] = Field(None, description="Logging level")
    max_sites: int = Field(
        DEFAULT_MAX_SITES, ge=4, le=24, description="Largest N accepted"
    )
    real_couplings: bool = Field(False, description="Draw real instead of complex")


class Sample(Section):
    """Coupling-tensor sampling."""

    model: Literal["dense", "lowrank", "modsyk"] = "dense"
    n_sites: int = Field(10, ge=4)
    coupling: float = Field(1.0, gt=0)
    n_samples: int = Field(1, ge=1)
    sigma_d: Optional[float] = Field(None, ge=0)
    sigma_a: Optional[float] = Field(None, ge=0)
    sigma_o: Optional[float] = Field(None, ge=0)


class Build(SystemSection):
    """Layer and H_sim assembly."""

    n_layers: int = Field(4, ge=1, description="Number of layers R")
    include_mass: bool = False


class TrotterScan(Section):
    """Trotter error grid over (N, R, J dt) at fixed total time."""

    n_sites: List[int] = Field([8], min_length=1)
    n_layers: List[int] = Field([1, 8], min_length=1)
    coupling_dt: List[float] = Field([0.1, 0.05, 0.02, 0.01], min_length=1)
    total_time: float = Field(1.0, gt=0)
    coupling: float = Field(1.0, gt=0)
    sector: Sector = "full"
    n_realizations: int = Field(10, ge=2)
    include_mass: bool = False
    shuffle: bool = False
    max_cells: int = Field(64, ge=1, description="Cap on the number of grid cells")

    @field_validator("n_sites")
    @classmethod
    def check_sites(cls, values: List[int]) -> List[int]:
        """Require N >= 4."""
        if min(values) < 4:
            raise ValueError("every N must be at least 4")
        return values

    @field_validator("n_layers")
    @classmethod
    def check_layers(cls, values: List[int]) -> List[int]:
        """Require R >= 1."""
        if min(values) < 1:
            raise ValueError("every R must be at least 1")
        return values

    @field_validator("coupling_dt")
    @classmethod
    def check_steps(cls, values: List[float]) -> List[float]:
        """Require positive time steps."""
        if min(values) <= 0:
            raise ValueError("time steps must be positive")
        return values


class Sff(SystemSection):
    """Spectral form factor ensemble."""

    n_sites: int = Field(10, ge=4)
    sector: Sector = "half"
    model: ModelName = "dense"
    n_layers: Optional[int] = Field(None, ge=1, description="R, defaults to N")
    n_realizations: int = Field(50, ge=2)
    t_min: float = Field(0.01, gt=0)
    t_max: float = Field(1000.0, gt=0)
    n_times: int = Field(200, ge=2)
    trotter: bool = Field(False, description="Compare against the Trotter product")
    coupling_dt: float = Field(0.01, gt=0)
    include_mass: bool = False

    @model_validator(mode="after")
    def check_trotter(self):
        """Trotter comparison needs low-rank layers and t_min < t_max."""
        if self.trotter and self.model != "lowrank":
            raise ValueError("trotter comparison needs model = 'lowrank'")
        if self.t_min >= self.t_max:
            raise ValueError("t_min must be below t_max")
        return self


class Otoc(SystemSection):
    """Out-of-time-order correlator ensemble."""

    model: ModelName = "dense"
    n_layers: Optional[int] = Field(None, ge=1)
    n_realizations: int = Field(10, ge=2)
    site_w: int = Field(0, ge=0)
    site_v: int = Field(1, ge=0)
    kind: Literal["quadrature", "number"] = "quadrature"
    t_max: float = Field(20.0, gt=0)
    n_times: int = Field(100, ge=2)
    include_mass: bool = False

    @model_validator(mode="after")
    def check_sites(self):
        """Require distinct operator sites inside the system."""
        if self.site_w == self.site_v:
            raise ValueError("site_w and site_v must differ")
        if max(self.site_w, self.site_v) >= self.n_sites:
            raise ValueError(f"operator sites must be below N={self.n_sites}")
        return self


class KlScan(Section):
    """KL divergence scan over R."""

    r_values: List[int] = Field([8, 16, 32, 64])
    variance_matched: bool = True
    half_width: float = Field(12.0, gt=0)
    n_points: int = Field(4800, ge=2)
    confidence: float = Field(0.95, gt=0, lt=1)

    @field_validator("r_values")
    @classmethod
    def check_r_values(cls, values: List[int]) -> List[int]:
        """Require at least three values of R, all >= 4."""
        if len(values) < 3 or min(values) < 4:
            raise ValueError("r_values needs at least three values, all >= 4")
        return values

    @field_validator("n_points")
    @classmethod
    def check_points(cls, value: int) -> int:
        """Require an even number of grid cells."""
        if value % 2:
            raise ValueError("n_points must be even")
        return value


class Speckle(Section):
    """Speckle-derived couplings and their statistics."""

    n_sites: int = Field(10, ge=4)
    grid_points: int = Field(DEFAULT_SPECKLE_GRID_POINTS, ge=8)
    half_extent: float = Field(DEFAULT_SPECKLE_HALF_EXTENT, gt=0)
    correlation_length: float = Field(DEFAULT_SPECKLE_CORRELATION_LENGTH, gt=0)
    contrast: float = Field(DEFAULT_SPECKLE_CONTRAST, ge=0)
    mean_detuning: float = Field(1.0, gt=0)
    width: float = Field(1.0, gt=0)
    energy_scale: float = Field(1.0, gt=0)
    dissipation: float = Field(1.0, gt=0)
    n_fields: int = Field(200, ge=100)
    r_values: List[int] = Field([1, 2, 4, 8, 16], min_length=2)
    independent: bool = False
    export_fields: int = Field(0, ge=0, description="Fields written to disk")


class SdSolve(Section):
    """Schwinger-Dyson solutions over a list of dissipation strengths."""

    coupling: float = Field(1.0, ge=0)
    dissipation: List[float] = Field([0.0], min_length=1)
    ratio_rn: float = Field(1.0, gt=0)
    half_width: float = Field(DEFAULT_SD_HALF_WIDTH, gt=0)
    n_points: int = Field(DEFAULT_SD_POINTS, ge=4)
    broadening: float = Field(1.0, ge=0)
    mixing: float = Field(DEFAULT_SD_MIXING, gt=0, le=1)
    tol: float = Field(1e-8, gt=0)
    max_iter: int = Field(2000, ge=1)

    @field_validator("dissipation")
    @classmethod
    def check_dissipation(cls, values: List[float]) -> List[float]:
        """Require nonnegative K."""
        if min(values) < 0:
            raise ValueError("dissipation strengths must be nonnegative")
        return values

    @field_validator("n_points")
    @classmethod
    def check_points(cls, value: int) -> int:
        """Require an even number of time points."""
        if value % 2:
            raise ValueError("n_points must be even")
        return value


class Levels(SystemSection):
    """Gap-ratio ensemble in a charge sector."""

    n_sites: int = Field(12, ge=4)
    sector: Sector = "half"
    model: ModelName = "dense"
    n_layers: Optional[int] = Field(None, ge=1)
    n_realizations: int = Field(20, ge=2)
    central_fraction: float = Field(0.5, gt=0, le=1)
    include_mass: bool = False

    @model_validator(mode="after")
    def check_sector_fixed(self):
        """Level statistics need a fixed charge."""
        if self.sector == "full":
            raise ValueError("level statistics need a charge sector")
        return self


class LowRankSykConfig(BaseModel):
    """Definition of the lowrank_syk configuration root."""

    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1] = SCHEMA_VERSION
    run: Run = Field(default_factory=Run)
    sample: Sample = Field(default_factory=Sample)
    build: Build = Field(default_factory=Build)
    trotter_scan: TrotterScan = Field(default_factory=TrotterScan)
    sff: Sff = Field(default_factory=Sff)
    otoc: Otoc = Field(default_factory=Otoc)
    kl_scan: KlScan = Field(default_factory=KlScan)
    speckle: Speckle = Field(default_factory=Speckle)
    sd_solve: SdSolve = Field(default_factory=SdSolve)
    levels: Levels = Field(default_factory=Levels)
