import numpy as np
import pytest

from floquet_ness.mps import Mpo, Mps
from floquet_ness.superops import PAULI, choi_site_matrix, pauli_string
from floquet_ness.tensors import TruncationSpec


def random_mps(rng, length=4, phys=4, chi=6):
    return Mps.random(length, phys, chi, rng, norm=None)


def test_product_state_round_trip():
    vecs = [np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([1.0, 1.0]) / np.sqrt(2)]
    m = Mps.from_product(vecs)
    dense = m.to_dense()
    expected = np.kron(np.kron(vecs[0], vecs[1]), vecs[2])
    assert np.allclose(dense, expected)


def test_inner_matches_dense():
    rng = np.random.default_rng(0)
    a = random_mps(rng)
    b = random_mps(rng)
    assert abs(a.inner(b) - np.vdot(a.to_dense(), b.to_dense())) < 1e-10


def test_add_and_scale_match_dense():
    rng = np.random.default_rng(1)
    a = random_mps(rng, length=3, phys=2, chi=3)
    b = random_mps(rng, length=3, phys=2, chi=2)
    s = a.add(b.scaled(2.0 - 1j))
    assert np.allclose(s.to_dense(), a.to_dense() + (2.0 - 1j) * b.to_dense())


def test_single_site_add():
    a = Mps.from_product([np.array([1.0, 0.0])])
    b = Mps.from_product([np.array([0.0, 2.0])])
    assert np.allclose(a.add(b).to_dense(), [1.0, 2.0])


def test_canonicalize_preserves_state():
    rng = np.random.default_rng(2)
    a = random_mps(rng, length=5, phys=3, chi=7)
    comp, info = a.canonicalize()
    assert np.allclose(comp.to_dense(), a.to_dense(), atol=1e-10)
    assert all(w == 0 or w < 1e-20 for w in info.discarded_weights)


def test_truncation_error_matches_discarded_weight():
    rng = np.random.default_rng(3)
    a = random_mps(rng, length=6, phys=2, chi=8)
    spec = TruncationSpec(max_rank=4)
    comp, info = a.canonicalize(spec)
    err2 = np.linalg.norm(comp.to_dense() - a.to_dense()) ** 2
    budget = sum(info.discarded_weights) * a.norm() ** 2
    # discarded weights are per-bond relative; total error is bounded by their sum
    assert err2 <= budget * 1.05 + 1e-10


def test_schmidt_spectra_sorted():
    rng = np.random.default_rng(4)
    a = random_mps(rng, length=4, phys=3, chi=5)
    _, info = a.canonicalize()
    for s in info.spectra:
        assert np.all(np.diff(s) <= 1e-12)


def test_compress_product_state_unchanged():
    vecs = [np.array([1.0, 2.0, 0.5]) for _ in range(4)]
    m = Mps.from_product(vecs)
    comp, info = m.canonicalize(TruncationSpec(max_rank=2))
    assert info.total_discarded == 0.0
    assert np.allclose(comp.to_dense(), m.to_dense())


def test_zero_state_is_harmless():
    z = Mps.zeros(3, 4)
    comp, info = z.canonicalize()
    assert comp.norm() == 0.0
    assert z.inner(z) == 0.0


def test_from_dense_round_trip():
    rng = np.random.default_rng(5)
    vec = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    m = Mps.from_dense(vec, 4, 2)
    assert np.allclose(m.to_dense(), vec)


def test_dagger_reflect_matches_dense_adjoint():
    rng = np.random.default_rng(6)
    m = random_mps(rng, length=3, phys=4, chi=4)
    dense = choi_site_matrix(m.to_dense(), 3, 2)
    refl = m.dagger_reflect(2)
    assert np.allclose(choi_site_matrix(refl.to_dense(), 3, 2), dense.conj().T)


def test_contract_with_product_dual_evaluates_trace():
    rng = np.random.default_rng(7)
    m = random_mps(rng, length=2, phys=4, chi=3)
    rho = choi_site_matrix(m.to_dense(), 2, 2)
    op = np.kron(PAULI["Z"], PAULI["X"])
    duals = [PAULI["Z"].T.reshape(-1), PAULI["X"].T.reshape(-1)]
    val = m.contract_with_product_dual(duals)
    assert abs(val - np.trace(op @ rho)) < 1e-12


def test_mixed_canonical_gauges():
    rng = np.random.default_rng(8)
    m = random_mps(rng, length=5, phys=2, chi=6)
    center = 2
    g = m.mixed_canonical(center)
    assert np.allclose(g.to_dense(), m.to_dense(), atol=1e-10)
    for i in range(center):
        t = g.tensors[i]
        mat = t.reshape(-1, t.shape[2]) if False else t.transpose(1, 0, 2).reshape(-1, t.shape[2])
        ident = mat.conj().T @ mat
        assert np.allclose(ident, np.eye(t.shape[2]), atol=1e-10)
    for i in range(center + 1, 5):
        t = g.tensors[i]
        mat = t.transpose(1, 0, 2).reshape(t.shape[1], -1)
        ident = mat @ mat.conj().T
        assert np.allclose(ident, np.eye(t.shape[1]), atol=1e-10)


def test_mpo_from_local_terms_matches_dense_sum():
    rng = np.random.default_rng(9)
    length = 4
    terms = []
    dense = np.zeros((2**length, 2**length), dtype=complex)
    specs = [(0, "ZZ"), (2, "XY"), (1, "Z"), (3, "X"), (1, "YYZ")]
    for start, s in specs:
        terms.append((start, pauli_string(s)))
        left = np.eye(2**start)
        right = np.eye(2 ** (length - start - len(s)))
        dense += np.kron(np.kron(left, pauli_string(s)), right)
    mpo = Mpo.from_local_terms(length, 2, terms)
    assert np.max(np.abs(mpo.to_dense() - dense)) < 1e-10


def test_mpo_single_site_chain():
    mpo = Mpo.from_local_terms(1, 2, [(0, PAULI["X"]), (0, PAULI["Z"])])
    assert np.allclose(mpo.to_dense(), PAULI["X"] + PAULI["Z"])


def test_mpo_apply_matches_dense():
    rng = np.random.default_rng(10)
    length = 3
    terms = [(0, pauli_string("XX")), (1, pauli_string("ZZ")), (0, pauli_string("Y"))]
    mpo = Mpo.from_local_terms(length, 2, terms)
    state = random_mps(rng, length=length, phys=2, chi=4)
    out = state.apply_mpo(mpo, TruncationSpec())
    assert np.allclose(out.to_dense(), mpo.to_dense() @ state.to_dense(), atol=1e-10)


def test_mpo_adjoint():
    terms = [(0, pauli_string("XY")), (1, pauli_string("ZX"))]
    mpo = Mpo.from_local_terms(3, 2, terms)
    adj = mpo.adjoint()
    assert np.max(np.abs(adj.to_dense() - mpo.to_dense().conj().T)) < 1e-12


def test_mpo_add_and_scale():
    a = Mpo.from_local_terms(3, 2, [(0, pauli_string("XX"))])
    b = Mpo.from_local_terms(3, 2, [(1, pauli_string("ZZ"))])
    combo = a.add(b.scaled(0.5j))
    assert np.allclose(combo.to_dense(), a.to_dense() + 0.5j * b.to_dense())


def test_mpo_compression_reduces_bond():
    # A sum of many overlapping terms assembles with inflated bonds.
    length = 6
    terms = [(i, pauli_string("ZZ")) for i in range(length - 1)]
    terms += [(i, pauli_string("X")) for i in range(length)]
    mpo = Mpo.from_local_terms(length, 2, terms)
    # Ising MPO compresses to bond dimension 3.
    assert mpo.max_bond <= 3 + 1e-9


def test_mpo_identity():
    eye = Mpo.identity(3, 2)
    assert np.allclose(eye.to_dense(), np.eye(8))
