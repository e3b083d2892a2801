"""Tests for the lowrank_syk configuration model."""

# Third-Party Libraries
from pydantic import ValidationError
import pytest

# cisagov Libraries
from lowrank_syk import DEFAULT_MAX_SITES, SCHEMA_VERSION
from lowrank_syk.models import LowRankSykConfig, resolve_charge
from lowrank_syk.models.config_model import KlScan, Levels, Otoc, Sff, TrotterScan


def test_defaults():
    """Test an empty document yields every section with its defaults."""
    config = LowRankSykConfig.model_validate({})
    assert config.schema_version == SCHEMA_VERSION
    assert config.run.seed == 0
    assert config.run.workers >= 1
    assert config.run.max_sites == DEFAULT_MAX_SITES
    assert config.sff.sector == "half"
    assert config.kl_scan.r_values == [8, 16, 32, 64]
    assert config.sd_solve.dissipation == [0.0]


def test_unknown_keys_are_forbidden():
    """Test misspelled keys are reported instead of ignored."""
    with pytest.raises(ValidationError):
        LowRankSykConfig.model_validate({"run": {"sed": 3}})
    with pytest.raises(ValidationError):
        LowRankSykConfig.model_validate({"trotter": {}})


def test_schema_version_is_checked():
    """Test only the current schema version is accepted."""
    with pytest.raises(ValidationError):
        LowRankSykConfig.model_validate({"schema_version": 2})


@pytest.mark.parametrize("sector", ["full", "half", 0, 4, 8])
def test_valid_sectors(sector):
    """Test named sectors and charges within [0, N]."""
    assert Sff(n_sites=8, sector=sector).sector == sector


@pytest.mark.parametrize("sector", ["quarter", -1, 9])
def test_invalid_sectors(sector):
    """Test unknown names and out-of-range charges are rejected."""
    with pytest.raises(ValidationError):
        Sff(n_sites=8, sector=sector)


@pytest.mark.parametrize(
    "sector, n_sites, expected", [("full", 8, None), ("half", 9, 4), (3, 8, 3)]
)
def test_resolve_charge(sector, n_sites, expected):
    """Test sector settings map onto a charge."""
    assert resolve_charge(sector, n_sites) == expected


def test_sff_trotter_needs_lowrank():
    """Test the Trotter comparison is only offered for low-rank layers."""
    with pytest.raises(ValidationError):
        Sff(trotter=True)
    assert Sff(trotter=True, model="lowrank").trotter


def test_sff_time_window():
    """Test t_min must be below t_max."""
    with pytest.raises(ValidationError):
        Sff(t_min=10.0, t_max=1.0)


@pytest.mark.parametrize(
    "kwargs", [{"site_w": 1, "site_v": 1}, {"n_sites": 4, "site_v": 4}]
)
def test_otoc_operator_sites(kwargs):
    """Test operator sites must differ and lie inside the system."""
    with pytest.raises(ValidationError):
        Otoc(**kwargs)


@pytest.mark.parametrize(
    "kwargs",
    [{"r_values": [8, 16]}, {"r_values": [2, 8, 16]}, {"n_points": 4801}],
)
def test_kl_scan_settings(kwargs):
    """Test short R lists, R < 4 and odd grids are rejected."""
    with pytest.raises(ValidationError):
        KlScan(**kwargs)


def test_levels_need_a_sector():
    """Test level statistics refuse the full Fock space."""
    with pytest.raises(ValidationError):
        Levels(sector="full")
    assert Levels(n_sites=6, sector=2).sector == 2


@pytest.mark.parametrize(
    "kwargs", [{"n_sites": [3]}, {"n_layers": [0]}, {"coupling_dt": [0.1, 0.0]}]
)
def test_trotter_scan_lists(kwargs):
    """Test every grid value of the Trotter scan is validated."""
    with pytest.raises(ValidationError):
        TrotterScan(**kwargs)


def test_speckle_needs_an_ensemble():
    """Test fewer than 100 speckle fields are rejected."""
    with pytest.raises(ValidationError):
        LowRankSykConfig.model_validate({"speckle": {"n_fields": 50}})
