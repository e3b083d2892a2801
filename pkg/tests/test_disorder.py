"""Tests for the disorder module."""

# Third-Party Libraries
import numpy as np
import pytest
from scipy import integrate, special, stats

# cisagov Libraries
from lowrank_syk.disorder import (
    BesselScale,
    CouplingClass,
    CouplingTensor,
    RankTwoCoupling,
    VarianceConvention,
    bessel_cdf,
    bessel_pdf,
    class_entries,
    classify_indices,
    dense_variance,
    lowrank_tensor,
    product_sum_cdf,
    rank_two_sigma,
    read_tensor,
    reduced_variance,
    sample_bessel,
    sample_dense_gaussian,
    sample_modSYK,
    sample_rank_two,
    tensor_from_document,
    tensor_to_document,
    write_tensor,
)
from lowrank_syk.errors import DomainError

OFF = CouplingClass.OFF_DIAGONAL
ALMOST = CouplingClass.ALMOST_DIAGONAL
DIAG = CouplingClass.DIAGONAL


@pytest.mark.parametrize(
    "indices,expected",
    [((1, 2, 1, 2), DIAG), ((1, 2, 1, 3), ALMOST), ((1, 2, 3, 4), OFF)],
)
def test_classify_indices(indices, expected):
    """Test the three coupling classes follow the shared index count."""
    assert classify_indices(*indices) is expected


def test_classify_unsorted_pair():
    """Test an unsorted pair is rejected."""
    with pytest.raises(DomainError):
        classify_indices(2, 1, 3, 4)


def test_dense_sampler_needs_four_sites(rng):
    """Test N < 4 is rejected."""
    with pytest.raises(DomainError):
        sample_dense_gaussian(3, 1.0, rng)


def test_dense_variance_and_mean(rng):
    """Test dense entries have zero mean and variance 2 J^2 / N^3."""
    n_sites = 6
    draws = np.concatenate(
        [
            sample_dense_gaussian(n_sites, 1.0, rng).matrix[np.triu_indices(15, 1)]
            for _ in range(500)
        ]
    )
    expected = dense_variance(n_sites, 1.0)
    assert expected == pytest.approx(2.0 / 216)
    assert np.mean(np.abs(draws) ** 2) == pytest.approx(expected, rel=0.03)
    stderr = np.sqrt(expected / draws.size)
    assert abs(np.mean(draws.real)) < 5 * stderr
    assert abs(np.mean(draws.imag)) < 5 * stderr


def test_dense_tensor_invariants(rng):
    """Test Hermiticity, real diagonal and the antisymmetric extension."""
    tensor = sample_dense_gaussian(5, 1.0, rng)
    assert np.array_equal(tensor.matrix, tensor.matrix.conj().T)
    assert np.all(np.diag(tensor.matrix).imag == 0)
    value = tensor.entry(0, 2, 1, 4)
    assert tensor.entry(2, 0, 1, 4) == -value
    assert tensor.entry(0, 2, 4, 1) == -value
    assert tensor.entry(4, 1, 2, 0) == np.conj(value)
    assert tensor.entry(1, 1, 2, 3) == 0


def test_real_dense_sampling(rng):
    """Test real sampling yields a real symmetric tensor."""
    tensor = sample_dense_gaussian(6, 1.0, rng, real=True)
    assert not np.any(tensor.matrix.imag)


def test_same_stream_reproduces_tensor():
    """Test identical seeds give bit-identical tensors."""
    first = sample_dense_gaussian(6, 1.0, np.random.default_rng(3))
    second = sample_dense_gaussian(6, 1.0, np.random.default_rng(3))
    assert np.array_equal(first.matrix, second.matrix)


def test_rank_two_zero_sigma(rng):
    """Test sigma = 0 gives the zero matrix."""
    j2 = sample_rank_two(6, 0.0, rng)
    assert not np.any(j2.matrix)


def test_rank_two_negative_sigma(rng):
    """Test a negative sigma is rejected."""
    with pytest.raises(DomainError):
        sample_rank_two(6, -1.0, rng)


def test_rank_two_variance(rng):
    """Test off-diagonal rank-two entries have E|J_ik|^2 = sigma^2."""
    sigma = 0.7
    upper = np.triu_indices(8, 1)
    draws = np.concatenate(
        [sample_rank_two(8, sigma, rng).matrix[upper] for _ in range(2000)]
    )
    assert np.mean(np.abs(draws) ** 2) == pytest.approx(sigma**2, rel=0.03)


def test_rank_two_rejects_non_hermitian():
    """Test a non-Hermitian rank-two matrix is rejected."""
    with pytest.raises(DomainError):
        RankTwoCoupling(2, np.array([[0.0, 1.0], [2.0, 0.0]]))


def test_lowrank_of_scaled_identity():
    """Test J_ik = lambda delta_ik keeps only the diagonal class."""
    scale = 1.5
    j2 = RankTwoCoupling(5, scale * np.eye(5, dtype=np.complex128))
    tensor, mass = lowrank_tensor(j2)
    assert np.allclose(class_entries(tensor, DIAG), scale**2)
    assert not np.any(class_entries(tensor, ALMOST))
    assert not np.any(class_entries(tensor, OFF))
    assert np.array_equal(mass, -(scale**2) * np.eye(5))
    assert tensor.variance_convention is VarianceConvention.REDUCED


def test_lowrank_formula_and_hermiticity(rng):
    """Test entries equal J_ik J_jl - J_jk J_il and are exactly Hermitian."""
    j2 = sample_rank_two(6, 0.4, rng)
    tensor, _ = lowrank_tensor(j2)
    j = j2.matrix
    assert tensor.entry(0, 3, 1, 5) == pytest.approx(
        j[0, 1] * j[3, 5] - j[3, 1] * j[0, 5]
    )
    assert np.array_equal(tensor.matrix, tensor.matrix.conj().T)


def test_lowrank_off_diagonal_variance(rng):
    """Test off-diagonal low-rank entries have E|J|^2 = 2 J^2 / N^4."""
    n_sites = 10
    sigma = rank_two_sigma(n_sites, 1.0)
    draws = np.concatenate(
        [
            class_entries(lowrank_tensor(sample_rank_two(n_sites, sigma, rng))[0], OFF)
            for _ in range(2000)
        ]
    )
    assert np.mean(np.abs(draws) ** 2) == pytest.approx(
        reduced_variance(n_sites, 1.0), rel=0.05
    )


def test_modsyk_zero_off_diagonal(rng):
    """Test sigma_O = 0 zeroes every off-diagonal coupling."""
    tensor = sample_modSYK(6, 0.1, 0.1, 0.0, rng)
    assert not np.any(class_entries(tensor, OFF))
    assert np.any(class_entries(tensor, ALMOST))


def test_modsyk_rejects_negative_sigma(rng):
    """Test negative class deviations are rejected."""
    with pytest.raises(DomainError):
        sample_modSYK(6, 0.1, -0.1, 0.1, rng)


def test_modsyk_class_variance_ratio(rng):
    """Test class variances follow the requested 10:10:1 ratio."""
    sigma = 0.1
    tensors = [
        sample_modSYK(6, sigma, sigma, sigma / np.sqrt(10), rng) for _ in range(2000)
    ]
    variances = {
        c: np.mean(np.abs(np.concatenate([class_entries(t, c) for t in tensors])) ** 2)
        for c in (DIAG, ALMOST, OFF)
    }
    assert variances[DIAG] == pytest.approx(sigma**2, rel=0.1)
    assert variances[ALMOST] == pytest.approx(sigma**2, rel=0.1)
    assert variances[DIAG] / variances[OFF] == pytest.approx(10.0, rel=0.1)


def test_modsyk_equal_sigmas_match_dense(rng):
    """Test equal class deviations reproduce the dense ensemble per class."""
    n_sites = 6
    sigma = np.sqrt(dense_variance(n_sites, 1.0))
    mod = [sample_modSYK(n_sites, sigma, sigma, sigma, rng) for _ in range(300)]
    dense = [sample_dense_gaussian(n_sites, 1.0, rng) for _ in range(300)]
    for coupling_class in (DIAG, ALMOST, OFF):
        first = np.concatenate([class_entries(t, coupling_class) for t in mod]).real
        second = np.concatenate([class_entries(t, coupling_class) for t in dense]).real
        assert stats.ks_2samp(first, second).pvalue > 1e-3


def test_bessel_pdf_value_and_symmetry():
    """Test the density at x = 1 is K0(1)/pi and the law is even."""
    scale = BesselScale(1.0, 1.0)
    assert bessel_pdf(1.0, scale) == pytest.approx(special.k0(1.0) / np.pi)
    assert bessel_pdf(1.0, scale) == pytest.approx(0.13402, abs=1e-5)
    x = np.array([0.3, 1.7, 4.0])
    assert np.array_equal(bessel_pdf(x, scale), bessel_pdf(-x, scale))
    assert np.isinf(bessel_pdf(0.0, scale))


def test_bessel_pdf_normalized():
    """Test the density integrates to one."""
    scale = BesselScale(0.5, 2.0)
    inner, _ = integrate.quad(lambda x: bessel_pdf(x, scale), 0.0, 1.0)
    outer, _ = integrate.quad(lambda x: bessel_pdf(x, scale), 1.0, np.inf)
    assert 2.0 * (inner + outer) == pytest.approx(1.0, abs=1e-6)


def test_bessel_cdf_matches_quadrature():
    """Test the closed-form CDF against the integrated density."""
    scale = BesselScale(1.0, 0.8)
    mass, _ = integrate.quad(lambda x: bessel_pdf(x, scale), 0.5, 2.0)
    assert bessel_cdf(2.0, scale) - bessel_cdf(0.5, scale) == pytest.approx(
        mass, abs=1e-8
    )
    assert bessel_cdf(0.0, scale) == pytest.approx(0.5)


def test_bessel_scale_must_be_positive():
    """Test nonpositive factor deviations are rejected."""
    with pytest.raises(DomainError):
        BesselScale(0.0, 1.0)


def test_product_sum_cdf_families():
    """Test the two- and four-term CDFs against their closed forms."""
    x = np.linspace(-3.0, 3.0, 13)
    assert np.allclose(product_sum_cdf(x, 0.5, 2), stats.laplace(scale=0.5).cdf(x))
    assert product_sum_cdf(0.0, 0.5, 4) == pytest.approx(0.5)
    assert product_sum_cdf(50.0, 0.5, 4) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        product_sum_cdf(x, 0.5, 3)


def test_sample_bessel_distribution(rng):
    """Test Gaussian products follow the Bessel law with variance s^2."""
    scale = BesselScale(1.2, 0.5)
    draws = sample_bessel(scale, rng, 100_000)
    assert np.var(draws) == pytest.approx(scale.product**2, rel=0.03)
    assert abs(np.mean(draws)) < 5 * scale.product / np.sqrt(draws.size)
    assert stats.kstest(draws, lambda x: bessel_cdf(x, scale)).pvalue > 1e-3


def test_sample_bessel_kurtosis(rng):
    """Test the excess kurtosis of a Gaussian product approaches 6."""
    draws = sample_bessel(BesselScale(1.0, 1.0), rng, 1_000_000)
    assert stats.kurtosis(draws) == pytest.approx(6.0, rel=0.1)


def test_tensor_file_round_trip(tmp_path, rng):
    """Test a written tensor reads back bit for bit."""
    tensor = lowrank_tensor(sample_rank_two(5, 0.3, rng))[0]
    path = write_tensor(tmp_path / "tensor.json", tensor, 0.01)
    restored = read_tensor(path)
    assert np.array_equal(restored.matrix, tensor.matrix)
    assert restored.variance_convention is VarianceConvention.REDUCED


def test_document_with_wrong_class_tag(rng):
    """Test a mislabelled entry is rejected."""
    document = tensor_to_document(sample_dense_gaussian(4, 1.0, rng))
    document["entries"][0]["class"] = "O"
    with pytest.raises(DomainError):
        tensor_from_document(document)


def test_document_violating_schema(rng):
    """Test an unknown key fails schema validation."""
    document = tensor_to_document(sample_dense_gaussian(4, 1.0, rng))
    document["extra"] = True
    with pytest.raises(DomainError):
        tensor_from_document(document)


def test_tensor_arithmetic(rng):
    """Test tensors add and scale entry-wise."""
    first = sample_dense_gaussian(4, 1.0, rng)
    second = sample_dense_gaussian(4, 1.0, rng)
    combined = 2.0 * first + second
    assert isinstance(combined, CouplingTensor)
    assert np.allclose(combined.matrix, 2.0 * first.matrix + second.matrix)


@pytest.mark.parametrize("seed", range(20))
def test_lowrank_tensor_is_hermitian_by_construction(seed):
    """Test the pair matrix is the symmetrized product with a real diagonal."""
    j2 = sample_rank_two(8, rank_two_sigma(8, 1.0), np.random.default_rng(seed))
    tensor, _ = lowrank_tensor(j2)
    j = j2.matrix
    pairs = np.array([(i, k) for i in range(8) for k in range(i + 1, 8)])
    first, second = pairs[:, 0], pairs[:, 1]
    raw = (
        j[first[:, None], first[None, :]] * j[second[:, None], second[None, :]]
        - j[second[:, None], first[None, :]] * j[first[:, None], second[None, :]]
    )
    assert np.array_equal(tensor.matrix, 0.5 * (raw + raw.conj().T))
    assert not np.any(np.diag(tensor.matrix).imag)
    assert np.array_equal(tensor.matrix, tensor.matrix.conj().T)
