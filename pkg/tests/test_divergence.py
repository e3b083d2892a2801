"""Tests for the divergence module."""

# Third-Party Libraries
import numpy as np
import pytest
from scipy import stats

# cisagov Libraries
from lowrank_syk.disorder import BesselScale, bessel_pdf
from lowrank_syk.divergence import (
    DensityGrid,
    convolved_bessel_density,
    fit_inverse_square,
    fit_leading_only,
    fourier_density,
    gaussian_density,
    kl_numeric,
    kl_scaling_scan,
    midpoint_grid,
    product_sum_pdf,
)
from lowrank_syk.errors import DomainError, TailMassError


def test_midpoint_grid_avoids_origin():
    """Test midpoints are symmetric and never hit x = 0."""
    points, dx = midpoint_grid(2.0, 8)
    assert dx == pytest.approx(0.5)
    assert points.tolist() == pytest.approx(
        [-1.75, -1.25, -0.75, -0.25, 0.25, 0.75, 1.25, 1.75]
    )
    with pytest.raises(DomainError):
        midpoint_grid(2.0, 7)


def test_single_product_is_bessel():
    """Test R = 1 reduces to the K0 density."""
    x = np.array([-2.0, 0.3, 1.0, 4.0])
    assert np.allclose(
        product_sum_pdf(x, 0.7, 1), bessel_pdf(x, BesselScale(0.7, 1.0)), rtol=1e-12
    )


def test_two_products_are_laplace():
    """Test R = 2 reduces to the Laplace density."""
    x = np.linspace(-4.0, 4.0, 9)
    assert np.allclose(
        product_sum_pdf(x, 0.5, 2), stats.laplace(scale=0.5).pdf(x), rtol=1e-12
    )


def test_fourier_inversion_agrees():
    """Test the closed form against the inverted characteristic function."""
    x = np.array([0.2, 1.0, 2.5])
    inverted = fourier_density(x, 1.0, 3)
    assert np.allclose(inverted, product_sum_pdf(x, 1.0, 3), atol=1e-7)
    with pytest.raises(DomainError):
        fourier_density([0.0], 1.0, 3)


def test_convolved_density_moments():
    """Test the R-fold density is normalized with variance R s^2."""
    density = convolved_bessel_density(BesselScale(1.0 / np.sqrt(8.0), 1.0), 8)
    assert density.mass() == pytest.approx(1.0, abs=1e-6)
    assert density.moment(2) == pytest.approx(1.0, abs=1e-5)
    assert density.moment(4) == pytest.approx(3.0 + 6.0 / 8.0, rel=1e-3)
    assert density.normalization_residual < 1e-8


def test_convolved_density_tail_mass():
    """Test a grid that truncates the tails is refused."""
    with pytest.raises(TailMassError):
        convolved_bessel_density(BesselScale(1.0, 1.0), 4, half_width=2.0)
    with pytest.raises(DomainError):
        convolved_bessel_density(BesselScale(1.0, 1.0), 0)


def test_kl_of_gaussians():
    """Test the numeric KL divergence of two Gaussians against its closed form."""
    p = gaussian_density(1.0)
    q = gaussian_density(2.0)
    expected = 0.5 * (0.5 - 1.0 + np.log(2.0))
    assert kl_numeric(p, q) == pytest.approx(expected, abs=1e-6)
    assert kl_numeric(p, p) == 0.0


def test_kl_needs_one_grid():
    """Test densities on different grids cannot be compared."""
    with pytest.raises(DomainError):
        kl_numeric(gaussian_density(1.0, 10.0), gaussian_density(1.0, 12.0))


def test_kl_needs_q_support():
    """Test Q vanishing on the support of P is rejected."""
    points, dx = midpoint_grid(1.0, 4)
    p = DensityGrid(points, np.full(4, 0.5), dx, 0.0)
    q = DensityGrid(points, np.array([0.0, 1.0, 1.0, 0.0]), dx, 0.0)
    with pytest.raises(DomainError):
        kl_numeric(p, q)


def test_inverse_square_fit_recovers_coefficients():
    """Test the line through R^2 D recovers c and d exactly."""
    r = np.array([8.0, 16.0, 32.0, 64.0])
    divergences = 0.75 / r**2 - 0.5 / r**3
    fit = fit_inverse_square(r, divergences)
    assert fit.constant == pytest.approx(0.75)
    assert fit.correction == pytest.approx(-0.5)
    assert fit.residual < 1e-12
    assert fit_leading_only(r, 0.75 / r**2) == pytest.approx(0.75)


def test_kl_scan_variance_matched():
    """Test R^2 D rises toward the asymptotic constant with a -2 power law."""
    scan = kl_scaling_scan([8, 16, 32, 64])
    scaled = scan.forward * scan.r_values**2
    assert np.all(np.diff(scan.forward) < 0)
    assert np.all(np.diff(scaled) > 0)
    assert 0.3 < scaled[0] < 0.45
    assert 0.42 < scaled[1] < 0.55
    assert np.all(scaled < 0.75)
    assert -2.0 < scan.log_slope < -1.5
    assert scan.constant_interval[0] < scan.constant < scan.constant_interval[1]
    assert 0.56 <= scan.constant <= 0.94
    assert scan.correction < 0
    assert np.all(scan.reverse > 0)
    assert scan.variance_matched


def test_kl_scan_grid_refinement():
    """Test doubling the grid resolution moves every divergence by under 1%."""
    coarse = kl_scaling_scan([8, 16, 32, 64])
    fine = kl_scaling_scan([8, 16, 32, 64], n_points=9600)
    assert np.allclose(fine.forward, coarse.forward, rtol=0.01, atol=0.0)
    assert np.allclose(fine.reverse, coarse.reverse, rtol=0.01, atol=0.0)


def test_kl_scan_without_variance_matching():
    """Test fixed-scale sums drift away from the unit Gaussian as R grows."""
    scan = kl_scaling_scan([4, 8, 16], variance_matched=False)
    assert np.all(np.diff(scan.forward) > 0)
    assert not scan.variance_matched


@pytest.mark.parametrize("r_values", [[8, 16], [2, 8, 16]])
def test_kl_scan_rejects_short_or_small_r(r_values):
    """Test fewer than three R values or R < 4 are rejected."""
    with pytest.raises(DomainError):
        kl_scaling_scan(r_values)
