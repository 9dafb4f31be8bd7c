import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from choifilter.errors import DimensionError, InputError
from choifilter.models import X, Z, build_x_rung_gate
from choifilter.mps import (LOWER, UPPER, Mpo, MpsState, TruncationPolicy, apply_local_ops, apply_mpo,
                            apply_two_site_gate, bond_spectra, canonicalize, entropies, expectation, from_dense,
                            from_product, inner, load_mps, mpo_to_dense, normalized, prefix_entropy, random_mps,
                            rung_leg, save_mps, site_index, swap_legs, to_dense)


def dense_entropy(v, n):
    sv = np.linalg.svd(v.reshape(2 ** n, -1), compute_uv=False)
    p = sv ** 2 / np.sum(sv ** 2)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def op_on(ops, n):
    m = np.ones((1, 1))
    for k in range(n):
        m = np.kron(m, ops.get(k, np.eye(2)))
    return m


def test_site_layout():
    assert site_index(3, UPPER) == 6 and site_index(3, LOWER) == 7
    assert rung_leg(7) == (3, LOWER)
    with pytest.raises(InputError):
        site_index(0, "x")


def test_truncation_policy_checks():
    with pytest.raises(InputError):
        TruncationPolicy(max_bond=0)
    with pytest.raises(InputError):
        TruncationPolicy(sv_cutoff=-1.0)


def test_product_overlaps():
    up = from_product([[1, 0]] * 6)
    assert inner(up, up) == pytest.approx((0.0, 1))
    plus = from_product([[1, 1]] * 6)
    lm, sign = inner(normalized(plus), up)
    assert sign == 1 and lm == pytest.approx(6 * math.log(2 ** -0.5))
    assert inner(up, from_product([[0, 1]] * 6))[1] == 0


def test_product_dense(rng):
    vs = [rng.standard_normal(2) for _ in range(6)]
    ref = vs[0]
    for v in vs[1:]:
        ref = np.kron(ref, v)
    assert np.allclose(to_dense(from_product(vs)), ref, atol=1e-13)


def test_dense_roundtrip(rng):
    v = rng.standard_normal(2 ** 8)
    s = from_dense(v, 8)
    assert np.allclose(to_dense(s), v, atol=1e-12)
    with pytest.raises(DimensionError):
        from_dense(v, 7)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 8), st.integers(0, 7), st.integers(0, 2 ** 31))
def test_canonicalize_preserves_state(n, c, seed):
    c = c % n
    s = random_mps(n, 4, seed)
    t = canonicalize(s, c)
    assert np.allclose(to_dense(t), to_dense(s), rtol=1e-10, atol=1e-12)
    for k in range(c):
        a = t.tensors[k].reshape(-1, t.tensors[k].shape[2])
        assert np.allclose(a.T @ a, np.eye(a.shape[1]), atol=1e-12)
    for k in range(c + 1, n):
        b = t.tensors[k].reshape(t.tensors[k].shape[0], -1)
        assert np.allclose(b @ b.T, np.eye(b.shape[0]), atol=1e-12)
    assert np.linalg.norm(t.tensors[c]) == pytest.approx(1.0)


def test_canonicalize_idempotent():
    s = canonicalize(random_mps(8, 4, 3), 2)
    t = canonicalize(s, 2)
    for a, b in zip(s.tensors, t.tensors):
        assert np.allclose(a, b, atol=1e-12)


def test_gate_identity_and_zero_angle():
    s = canonicalize(random_mps(6, 4, 1), 0)
    for g in (np.eye(4), build_x_rung_gate(0.0)):
        assert np.allclose(to_dense(apply_two_site_gate(s, 2, g)), to_dense(s), atol=1e-12)


def test_gate_matches_dense():
    s = random_mps(6, 4, 5)
    g = build_x_rung_gate(0.5 * math.log(2))
    assert math.isclose(0.3466, 0.5 * math.log(2), abs_tol=1e-4)
    v = to_dense(s)
    for left in (0, 2, 4):
        full = op_on({left: np.eye(2)}, 0)
        full = np.kron(np.kron(np.eye(2 ** left), g), np.eye(2 ** (6 - left - 2)))
        out = apply_two_site_gate(s, left, g)
        assert out.center == left + 1
        assert np.allclose(to_dense(out), full @ v, rtol=1e-8, atol=1e-10)


def test_gate_truncation_records_weight():
    s = random_mps(8, 16, 2)
    out = apply_two_site_gate(s, 3, np.eye(4), TruncationPolicy(max_bond=2, sv_cutoff=0.0))
    assert out.bond_dims[3] <= 2
    assert 0.0 < out.discarded_weight < 1.0


def _random_mpo(n, bond, seed):
    rng = np.random.default_rng(seed)
    dims = [1] + [bond] * (n - 1) + [1]
    return Mpo([rng.standard_normal((dims[k], 2, 2, dims[k + 1])) for k in range(n)])


def test_mpo_identity_and_zstring():
    s = random_mps(6, 4, 7)
    ident = Mpo([np.eye(2).reshape(1, 2, 2, 1)] * 6)
    assert ident.support() is None
    assert np.allclose(to_dense(apply_mpo(s, ident)), to_dense(s), atol=1e-10)
    zs = Mpo([Z.reshape(1, 2, 2, 1)] * 6)
    p = from_product([[1, 0], [0, 1], [1, 0], [0, 1], [0, 1], [1, 0]])
    assert inner(p, apply_mpo(p, zs))[1] == -1


def test_mpo_matches_dense():
    s = random_mps(6, 4, 11)
    o = _random_mpo(6, 3, 12)
    out = apply_mpo(s, o)
    assert np.allclose(to_dense(out), mpo_to_dense(o) @ to_dense(s), rtol=1e-8, atol=1e-9)


def test_mpo_size_mismatch():
    with pytest.raises(DimensionError):
        apply_mpo(random_mps(4, 2, 0), _random_mpo(6, 2, 0))


def test_inner_matches_dense():
    a, b = random_mps(6, 4, 21), random_mps(6, 4, 22)
    lm, sign = inner(a, b)
    ref = to_dense(a) @ to_dense(b)
    assert sign * math.exp(lm) == pytest.approx(ref, rel=1e-10)
    s = normalized(random_mps(6, 4, 1))
    s = MpsState(s.tensors, s.center, log_norm=0.7)
    assert inner(s, s) == pytest.approx((1.4, 1))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(0, 2 ** 31))
def test_cauchy_schwarz(s1, s2):
    a, b = random_mps(8, 4, s1), random_mps(8, 4, s2)
    lab = inner(a, b)[0]
    assert lab <= 0.5 * (inner(a, a)[0] + inner(b, b)[0]) + 1e-12


def test_expectation_and_local_ops():
    s = random_mps(6, 4, 3)
    v = to_dense(s)
    ops = {1: Z, 4: X}
    ref = v @ op_on(ops, 6) @ v / (v @ v)
    assert expectation(s, ops) == pytest.approx(ref, abs=1e-12)
    assert np.allclose(to_dense(apply_local_ops(s, ops)), op_on(ops, 6) @ v)


def test_entropies():
    assert all(abs(e) < 1e-12 for e in entropies(from_product([[1, 2]] * 6)))
    bell = np.zeros(4)
    bell[[0, 3]] = 1 / math.sqrt(2)
    s = from_dense(np.kron(bell, np.array([1.0, 0, 0, 0])), 4)
    assert prefix_entropy(s, 1) == pytest.approx(math.log(2))
    assert prefix_entropy(s, 2) == pytest.approx(0.0, abs=1e-12)
    r = random_mps(8, 8, 9)
    v = to_dense(r)
    ent = entropies(r)
    for n in range(1, 8):
        assert prefix_entropy(r, n) == pytest.approx(dense_entropy(v, n), abs=1e-8)
        assert ent[n - 1] == pytest.approx(dense_entropy(v, n), abs=1e-8)
    assert all(np.isclose(np.sum(sv ** 2), 1) for sv in bond_spectra(r))
    with pytest.raises(InputError):
        prefix_entropy(r, 8)


def test_swap_legs():
    s = random_mps(6, 4, 4)
    v = to_dense(s).reshape([2] * 6).transpose(1, 0, 3, 2, 5, 4).reshape(-1)
    assert np.allclose(to_dense(swap_legs(s)), v, atol=1e-10)


def test_checkpoint_roundtrip(tmp_path):
    s = apply_two_site_gate(random_mps(8, 6, 8), 2, build_x_rung_gate(0.3), TruncationPolicy(4, 0.0))
    save_mps(s, tmp_path / "a.mps")
    t = load_mps(tmp_path / "a.mps")
    assert t.center == s.center and t.log_norm == s.log_norm and t.discarded_weight == s.discarded_weight
    for a, b in zip(s.tensors, t.tensors):
        assert np.array_equal(a, b)
    (tmp_path / "bad.mps").write_bytes(b"nope")
    with pytest.raises(InputError):
        load_mps(tmp_path / "bad.mps")


def test_state_validation():
    with pytest.raises(DimensionError):
        MpsState([np.ones((1, 2, 2)), np.ones((3, 2, 1))])
