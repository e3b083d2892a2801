"""Tests for the hamiltonian module."""

# Third-Party Libraries
import numpy as np
import pytest

# cisagov Libraries
from lowrank_syk.disorder import (
    CouplingClass,
    CouplingTensor,
    class_entries,
    dense_variance,
    lowrank_tensor,
    sample_dense_gaussian,
    sample_rank_two,
)
from lowrank_syk.errors import DomainError, NumericalError
from lowrank_syk.fock import build_basis, number_operator
from lowrank_syk.hamiltonian import (
    HamiltonianMatrix,
    build_dense,
    build_hamiltonian,
    build_layers,
    dump_hamiltonian,
    load_hamiltonian,
    mass_term_weight,
    quadratic_form,
    quadratic_form_square,
    sample_layer_couplings,
)


def test_two_site_interaction():
    """Test J_0101 = 1 gives -n_0 n_1 on two sites."""
    tensor = CouplingTensor(2, np.array([[1.0 + 0j]]))
    h = build_hamiltonian(build_basis(2), tensor)
    assert np.allclose(h.matrix, np.diag([0.0, 0.0, 0.0, -1.0]))
    assert h.spectrum.tolist() == pytest.approx([-1.0, 0.0, 0.0, 0.0])


def test_dense_hamiltonian_invariants(full_basis_4, rng):
    """Test a dense Hamiltonian is Hermitian and conserves charge."""
    h = build_dense(full_basis_4, 1.0, rng, seed=5)
    assert np.max(np.abs(h.matrix - h.matrix.conj().T)) <= 1e-12
    assert h.charge_residual() < 1e-12
    assert h.provenance.model == "dense"
    assert h.provenance.seed == 5


def test_sector_is_block_of_full_space(rng):
    """Test the sector Hamiltonian equals the matching block of the full one."""
    tensor = sample_dense_gaussian(6, 1.0, rng)
    full = build_hamiltonian(build_basis(6), tensor)
    sector_basis = build_basis(6, 3)
    sector = build_hamiltonian(sector_basis, tensor)
    block = full.matrix[np.ix_(sector_basis.states, sector_basis.states)]
    assert np.allclose(block, sector.matrix, atol=1e-13)


def test_eigensystem_reconstructs_matrix(half_basis_6, rng):
    """Test eigenvalues are ascending and rebuild the Hamiltonian."""
    h = build_dense(half_basis_6, 1.0, rng)
    values, vectors = h.eigensystem
    assert np.all(np.diff(values) >= 0)
    rebuilt = (vectors * values) @ vectors.conj().T
    assert np.allclose(rebuilt, h.matrix, atol=1e-12)


@pytest.mark.parametrize("charge", [None, 3])
def test_layer_with_mass_is_negative_half_square(charge, rng):
    """Test a low-rank layer with half its mass term equals -O^2/2."""
    basis = build_basis(6, charge)
    j2 = sample_rank_two(6, 0.4, rng)
    tensor, mass = lowrank_tensor(j2)
    layer = build_hamiltonian(basis, tensor, 0.5 * mass)
    assert np.allclose(
        layer.matrix, -0.5 * quadratic_form_square(basis, j2), atol=1e-12
    )


def test_quadratic_form_of_identity_is_number(half_basis_6):
    """Test sum_i c^dagger_i c_i is the total number operator."""
    form = quadratic_form(half_basis_6, np.eye(6))
    assert np.allclose(form, number_operator(half_basis_6).toarray())
    assert np.allclose(np.diag(form), 3.0)


def test_quadratic_form_shape(full_basis_4):
    """Test a weight matrix of the wrong size is rejected."""
    with pytest.raises(DomainError):
        quadratic_form(full_basis_4, np.eye(3))


def test_tensor_size_mismatch(full_basis_4, rng):
    """Test a tensor for another N is rejected."""
    with pytest.raises(DomainError):
        build_hamiltonian(full_basis_4, sample_dense_gaussian(5, 1.0, rng))


def test_non_hermitian_matrix(full_basis_4):
    """Test a non-Hermitian matrix raises a numerical error."""
    matrix = np.zeros((16, 16), dtype=np.complex128)
    matrix[0, 1] = 1.0
    with pytest.raises(NumericalError):
        HamiltonianMatrix(full_basis_4, matrix)


def test_add_on_different_bases(rng):
    """Test Hamiltonians on different sectors cannot be added."""
    tensor = sample_dense_gaussian(4, 1.0, rng)
    first = build_hamiltonian(build_basis(4, 1), tensor)
    second = build_hamiltonian(build_basis(4, 3), tensor)
    with pytest.raises(DomainError):
        first + second


def test_build_layers_sum_and_provenance(half_basis_6):
    """Test H_sim is the sum of its layers and the draw is reproducible."""
    layers, h_sim = build_layers(
        half_basis_6, 1.0, 3, np.random.default_rng(11), include_mass=True, seed=11
    )
    again, _ = build_layers(
        half_basis_6, 1.0, 3, np.random.default_rng(11), include_mass=True
    )
    assert [layer.provenance.layer for layer in layers] == [0, 1, 2]
    assert np.allclose(h_sim.matrix, sum(layer.matrix for layer in layers))
    assert h_sim.provenance.model == "lowrank-sum"
    for layer, repeat in zip(layers, again):
        assert np.array_equal(layer.matrix, repeat.matrix)


def test_layers_need_one_layer(rng):
    """Test R = 0 is rejected."""
    with pytest.raises(DomainError):
        sample_layer_couplings(6, 1.0, 0, rng)


def test_mass_term_weight(half_basis_6):
    """Test the mass weight is zero without mass and positive with it."""
    plain, _ = build_layers(half_basis_6, 1.0, 2, np.random.default_rng(1))
    assert mass_term_weight(plain).mean == 0.0
    massive, _ = build_layers(
        half_basis_6, 1.0, 2, np.random.default_rng(1), include_mass=True
    )
    weight = mass_term_weight(massive)
    assert weight.per_layer.shape == (2,)
    assert np.all(weight.per_layer > 0)
    for layer in massive:
        assert np.allclose(layer.interaction_part + layer.mass_part, layer.matrix)


def test_summed_layers_match_dense_variance(rng):
    """Test R = N summed low-rank tensors reach the dense off-diagonal variance."""
    n_sites = 8
    draws = []
    for _ in range(200):
        total = sum(
            (tensor for _, tensor, _ in sample_layer_couplings(n_sites, 1.0, 8, rng)),
            start=CouplingTensor(n_sites, np.zeros((28, 28), dtype=np.complex128)),
        )
        draws.append(class_entries(total, CouplingClass.OFF_DIAGONAL))
    mean_square = np.mean(np.abs(np.concatenate(draws)) ** 2)
    assert mean_square == pytest.approx(dense_variance(n_sites, 1.0), rel=0.1)


def test_dump_round_trip(tmp_path, half_basis_6, rng):
    """Test a dumped Hamiltonian loads back bit for bit."""
    h = build_dense(half_basis_6, 1.0, rng)
    path = dump_hamiltonian(tmp_path / "h.bin", h)
    restored = load_hamiltonian(path)
    assert restored.basis.key == half_basis_6.key
    assert np.array_equal(restored.matrix, h.matrix)


def test_load_rejects_foreign_file(tmp_path):
    """Test files without the magic bytes or with short payloads are rejected."""
    foreign = tmp_path / "foreign.bin"
    foreign.write_bytes(b"NOPE" + bytes(32))
    with pytest.raises(DomainError):
        load_hamiltonian(foreign)
    short = tmp_path / "short.bin"
    short.write_bytes(b"LR")
    with pytest.raises(DomainError):
        load_hamiltonian(short)


def test_load_rejects_truncated_payload(tmp_path, full_basis_4, rng):
    """Test a payload shorter than D^2 values is rejected."""
    path = dump_hamiltonian(tmp_path / "h.bin", build_dense(full_basis_4, 1.0, rng))
    path.write_bytes(path.read_bytes()[:-16])
    with pytest.raises(DomainError):
        load_hamiltonian(path)
