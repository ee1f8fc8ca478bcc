import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zesim import graphspace as gs
from zesim import linalg as la


def kab(a, b, da=2, db=3):
    return la.kron(la.ket(a, da), la.ket(b, db))


def test_choi_vector_convention():
    # (1 (x) E)|Phi> has entry E[b, a] at index a*dB + b
    e = np.arange(6).reshape(3, 2) + 1j
    v = gs.choi_vector(e)
    phi = la.max_entangled_vector(2)
    assert np.allclose(v, la.kron(np.eye(2), e) @ phi)
    assert np.allclose(gs.operator_from_choi_vector(v, 2, 3), e)


def test_choi_examples():
    j = gs.choi_of_channel(gs.identity_channel(2))
    phi = la.max_entangled_vector(2)
    assert np.allclose(j, la.proj(phi))
    assert la.numerical_rank(j) == 1 and np.isclose(np.trace(j).real, 2)
    deph = gs.Channel(2, 2, (np.diag([1.0, 0.0]), np.diag([0.0, 1.0])))
    assert np.allclose(gs.choi_of_channel(deph), np.diag([1, 0, 0, 1]))
    n = np.array([[0.7, 0.2], [0.3, 0.8]])
    j = gs.choi_of_channel(gs.classical_channel(n))
    assert np.allclose(j, np.diag([0.7, 0.3, 0.2, 0.8]))


def test_channel_rejects_non_tp():
    with pytest.raises(ValueError):
        gs.Channel(2, 2, (0.9 * np.eye(2),))
    with pytest.raises(ValueError):
        gs.Channel(2, 2, (np.eye(3),))


@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 3), st.integers(1, 4))
@settings(max_examples=30, deadline=None)
def test_choi_valid_and_supported(seed, da, db, nk):
    if db * nk < da:
        with pytest.raises(ValueError):
            gs.random_channel(da, db, nk, np.random.default_rng(seed))
        return
    rng = np.random.default_rng(seed)
    ch = gs.random_channel(da, db, nk, rng)
    j = gs.choi_of_channel(ch)
    assert np.abs(la.partial_trace(j, [da, db], [0]) - np.eye(da)).max() <= 1e-9
    assert la.min_eigenvalue(j) >= -1e-9
    k = gs.graph_of_channel(ch)
    assert np.allclose(k.support_projection @ j, j, atol=1e-10)


def test_graph_of_channel_examples():
    assert gs.graph_of_channel(gs.identity_channel(2)).rank == 1
    const = gs.Channel(2, 2, (np.outer(la.ket(1, 2), la.ket(0, 2)),
                              np.outer(la.ket(1, 2), la.ket(1, 2))))
    k = gs.graph_of_channel(const)
    assert k.rank == 2
    assert k.contains_operator(np.outer(la.ket(1, 2), la.ket(0, 2)))
    assert not k.contains_operator(np.outer(la.ket(0, 2), la.ket(0, 2)))
    # same span, different Kraus operators
    u = la.random_isometry(2, 2, np.random.default_rng(1))
    mixed = gs.Channel(2, 2, tuple(sum(u[i, j] * const.kraus[j] for j in range(2))
                                   for i in range(2)))
    assert np.allclose(gs.graph_of_channel(mixed).support_projection, k.support_projection)


def test_kalpha_pi3():
    vecs = gs.kalpha_vectors(np.pi / 3)
    assert np.allclose(vecs[1], 0.5 * kab(0, 2) + np.sqrt(3) / 2 * kab(1, 1))
    assert np.allclose(vecs[0], (kab(0, 0) + kab(0, 1) + kab(1, 2)) / np.sqrt(3))
    assert np.allclose(vecs[2], kab(1, 0))
    for i in range(3):
        for j in range(i + 1, 3):
            assert abs(np.vdot(vecs[i], vecs[j])) < 1e-15
    k = gs.kalpha(np.pi / 3)
    assert k.dims == [2, 3]
    assert np.allclose(k.support_projection, sum(la.proj(v) for v in vecs))


@pytest.mark.parametrize("cos2", [0.01, 0.25, 0.3, 0.5, 0.99])
def test_kalpha_rank_and_feasible(cos2):
    k = gs.kalpha_from_cos2(cos2)
    assert k.rank == 3
    ch = gs.graph_feasibility(k)
    assert ch is not None
    j = gs.choi_of_channel(ch)
    assert la.numerical_rank(j, 1e-7) == 3
    assert np.allclose(k.support_projection @ j, j, atol=1e-8)


def test_kalpha_endpoints_rejected():
    for alpha in (0.0, np.pi / 2):
        with pytest.raises(ValueError):
            gs.kalpha(alpha)


def test_kalpha_explicit_channel_family():
    # a1 = 1/4: a0 = (3/2)(1 - cos^2/4), a2 = 2 - a0 - a1
    alpha = np.pi / 3
    c2 = np.cos(alpha) ** 2
    a1 = 0.25
    a0 = 1.5 * (1 - c2 * a1)
    a2 = 2 - a0 - a1
    assert min(a0, a1, a2) > 0
    j = gs.kalpha_choi(alpha, a1)
    assert np.allclose(la.partial_trace(j, [2, 3], [0]), np.eye(2))
    w = np.linalg.eigvalsh(j)
    assert np.allclose(sorted(w[-3:]), sorted([a0, a1, a2]))


def test_delta_ell():
    assert gs.delta_ell(1).rank == 1
    assert np.allclose(gs.delta_ell(2).support_projection, np.diag([1, 0, 0, 1]))
    assert gs.graph_feasibility(gs.delta_ell(3)) is not None


def test_classical_graph():
    k = gs.classical_graph(np.eye(2, dtype=bool))
    assert np.allclose(k.support_projection, gs.delta_ell(2).support_projection)
    with pytest.raises(ValueError):
        gs.classical_graph(np.array([[1, 0], [0, 0]]))


def test_tensor_graph():
    k = gs.kalpha(np.pi / 3)
    kk = gs.tensor_graph(k, k)
    assert kk.rank == 9 and kk.dims == [4, 9]
    expect = la.permute_systems(la.kron(k.support_projection, k.support_projection),
                                [2, 3, 2, 3], [0, 2, 1, 3])
    assert np.abs(kk.support_projection - expect).max() <= 1e-12
    k1 = gs.tensor_graph(k, gs.delta_ell(1))
    assert np.allclose(k1.support_projection, k.support_projection)
    d2 = gs.delta_ell(2)
    assert gs.tensor_graph(k, d2).rank == 6
    assert gs.tensor_power(d2, 3).rank == 8


def test_tensor_graph_kraus_products():
    rng = np.random.default_rng(4)
    c1, c2 = gs.random_channel(2, 2, 2, rng), gs.random_channel(2, 3, 1, rng)
    k = gs.tensor_graph(gs.graph_of_channel(c1), gs.graph_of_channel(c2))
    for e in c1.kraus:
        for f in c2.kraus:
            assert k.contains_operator(la.kron(e, f))


def test_feasibility_infeasible_graph():
    k = gs.NCBGraph.from_kraus(2, 2, [np.outer(la.ket(0, 2), la.ket(0, 2))])
    rep = gs.graph_feasibility_report(k)
    assert rep.channel is None


def test_graph_json_round_trip():
    k = gs.kalpha(np.pi / 3)
    k2 = gs.graph_from_json(json.dumps(gs.graph_to_json(k)))
    assert np.allclose(k2.support_projection, k.support_projection)
    obj = {"dimA": 2, "dimB": 2, "support_vectors": [[[1, 0], [0, 0], [0, 0], [1, 0]]]}
    assert np.allclose(gs.graph_from_json(obj).support_projection,
                       la.proj(la.max_entangled_vector(2)) / 2)
    with pytest.raises(ValueError):
        gs.graph_from_json({"dimA": 2})


# no-signalling maps

def test_qnsc_local_maps_pass():
    assert gs.qnsc_check(gs.product_qnsc(gs.identity_channel(2), gs.identity_channel(3))).passed
    p = 0.3
    paulis = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
    dep = gs.Channel(2, 2, tuple([np.sqrt(1 - 3 * p / 4) * paulis[0]]
                                 + [np.sqrt(p / 4) * s for s in paulis[1:]]))
    assert gs.qnsc_check(gs.product_qnsc(dep, dep)).passed


@given(st.integers(0, 10_000))
@settings(max_examples=15, deadline=None)
def test_qnsc_random_products(seed):
    rng = np.random.default_rng(seed)
    pi = gs.product_qnsc(gs.random_channel(2, 3, 2, rng), gs.random_channel(3, 2, 3, rng))
    assert gs.qnsc_check(pi, tol=1e-8).passed


def test_forwarding_map_signals():
    rep = gs.qnsc_check(gs.forwarding_qnsc(2))
    fam = rep.families
    assert fam["positivity"] and fam["normalization"] and fam["no_signal_b_to_a"]
    assert not fam["no_signal_a_to_b"]
    # traceless input X maps to 1 (x) X on B_i' B_o, spectral norm max over Gell-Mann = 1
    assert rep.no_signal_a_to_b == pytest.approx(1.0, abs=1e-12)


def test_compose_examples():
    rng = np.random.default_rng(2)
    loc = gs.product_qnsc(gs.identity_channel(2), gs.identity_channel(2))
    j = gs.compose_qnsc(loc, gs.identity_channel(2))
    assert np.allclose(j, gs.choi_of_channel(gs.identity_channel(2)))
    e = gs.random_channel(2, 2, 3, rng)
    assert np.allclose(gs.compose_qnsc(loc, e), gs.choi_of_channel(e))
    beta = np.array([0.6, 0.8j])
    dp = gs.discard_prepare_qnsc(2, 3, 2, beta)
    assert gs.qnsc_check(dp).passed
    j = gs.compose_qnsc(dp, gs.random_channel(3, 2, 2, rng))
    assert np.allclose(j, gs.choi_of_channel(gs.constant_channel(2, beta)))
    with pytest.raises(ValueError):
        gs.compose_qnsc(loc, gs.random_channel(3, 2, 1, rng))


@given(st.integers(0, 10_000))
@settings(max_examples=15, deadline=None)
def test_compose_gives_channel(seed):
    rng = np.random.default_rng(seed)
    pi = gs.product_qnsc(gs.random_channel(2, 2, 2, rng), gs.random_channel(2, 3, 2, rng))
    j = gs.compose_qnsc(pi, gs.random_channel(2, 2, 2, rng))
    assert la.min_eigenvalue(j) >= -1e-10
    assert np.allclose(la.partial_trace(j, [2, 3], [0]), np.eye(2), atol=1e-10)
