import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from driftbench.errors import InvalidInputError
from driftbench.oracles import (
    ComparatorPath, CostModel, best_switching_path, gen_comparator_path, gen_costs, offline_drifting_opt,
    offline_fixed_opt, offline_onela_opt, read_cost_file, write_cost_file,
)
from driftbench.projections import PBall, Simplex
import grid_oracles as G


def test_spike():
    c = gen_costs(CostModel("spike", spike_t=3, magnitude=5), 5, 2)
    expect = np.zeros((5, 2))
    expect[2] = 5
    np.testing.assert_array_equal(c, expect)


def test_uniform_deterministic():
    m = CostModel("uniform", seed=42)
    np.testing.assert_array_equal(gen_costs(m, 20, 3), gen_costs(m, 20, 3))
    assert not np.array_equal(gen_costs(m, 20, 3), gen_costs(CostModel("uniform", seed=43), 20, 3))


def test_uniform_nonneg_flag():
    c = gen_costs(CostModel("uniform", low=-1, high=1, nonneg=True), 100, 3)
    assert c.min() >= 0
    assert gen_costs(CostModel("uniform", low=-1, high=1, nonneg=False), 100, 3).min() < 0


def test_switcher():
    c = gen_costs(CostModel("switcher", period=10), 40, 2)
    assert np.all(c[:10, 0] == 0) and np.all(c[:10, 1] == 1)
    assert np.all(c[10:20, 1] == 0) and np.all(c[10:20, 0] == 1)
    assert np.all(c[20:30, 0] == 0)


def test_radial():
    c = gen_costs(CostModel("radial", nonneg=False, magnitude=2.0, seed=1), 6, 3)
    np.testing.assert_allclose(np.linalg.norm(c, axis=1), 2.0)
    np.testing.assert_allclose(c[1], -c[0])
    assert gen_costs(CostModel("radial", nonneg=True, seed=1), 6, 3).min() >= 0


def test_file_replay(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("# header\n1 2\n\n3.5 -1  # trailing\n")
    np.testing.assert_array_equal(read_cost_file(p), [[1, 2], [3.5, -1]])
    c = gen_costs(CostModel("file", path=str(p), nonneg=False), 2, 2)
    np.testing.assert_array_equal(c, [[1, 2], [3.5, -1]])
    q = tmp_path / "d.txt"
    write_cost_file(q, c)
    np.testing.assert_array_equal(read_cost_file(q), c)


def test_file_replay_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("1 2\n3 x\n")
    with pytest.raises(InvalidInputError, match=":2:"):
        read_cost_file(p)
    p.write_text("1 2\n3 4 5\n")
    with pytest.raises(InvalidInputError, match=":2:"):
        read_cost_file(p)
    p.write_text("1 2\n")
    with pytest.raises(InvalidInputError):
        gen_costs(CostModel("file", path=str(p)), 3, 2)


def test_unknown_model():
    with pytest.raises(InvalidInputError):
        CostModel("nope")


def test_fixed_opt_examples():
    u, v = offline_fixed_opt([[1, 0], [1, 0]], Simplex(2))
    np.testing.assert_array_equal(u, [0, 1])
    assert v == 0
    u, v = offline_fixed_opt([[1, 2], [3, 1]], Simplex(2))
    np.testing.assert_array_equal(u, [0, 1])
    assert v == 3
    u, v = offline_fixed_opt([[3, 4]], PBall(2, 1.0))
    np.testing.assert_allclose(u, [-0.6, -0.8], atol=1e-15)
    assert v == -5
    assert G.fixed_opt_ball_grid([[3, 4]], (0, 0), 1.0) == pytest.approx(-5, abs=1e-4)


def test_fixed_opt_pball_holder(rng):
    for p in (1.2, 1.5, 3.0):
        c = rng.normal(size=(5, 3))
        u, v = offline_fixed_opt(c, PBall(p, 2.0))
        from driftbench.norms import norm
        assert norm(u, p) == pytest.approx(2.0, rel=1e-12)
        assert float(c.sum(0) @ u) == pytest.approx(v, rel=1e-12)
        # random feasible points never do better
        for _ in range(200):
            w = rng.normal(size=3)
            w *= 2.0 / norm(w, p)
            assert float(c.sum(0) @ w) >= v - 1e-12


@given(st.integers(0, 2**31 - 1))
def test_fixed_opt_simplex_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    c = rng.integers(-3, 4, (int(rng.integers(1, 6)), n)).astype(float)
    u, v = offline_fixed_opt(c, Simplex(n))
    vals = [math.fsum(c[:, i]) for i in range(n)]
    assert v == min(vals)
    assert int(np.argmax(u)) == vals.index(min(vals))


def test_drifting_L0_is_fixed(rng):
    c = rng.uniform(0, 1, (8, 3))
    assert offline_drifting_opt(c, Simplex(3), 0).value == offline_fixed_opt(c, Simplex(3)).value
    b = PBall(2, 1.0, (2.0, 2.0))
    c2 = rng.uniform(-1, 1, (8, 2))
    assert offline_drifting_opt(c2, b, 0).value == offline_fixed_opt(c2, b).value


def test_drifting_unbounded_budget(rng):
    c = rng.uniform(0, 1, (8, 3))
    v = offline_drifting_opt(c, Simplex(3), 2 * 7).value
    assert v == pytest.approx(c.min(axis=1).sum(), abs=1e-9)


def test_drifting_hand_built_grid():
    c = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
    v = offline_drifting_opt(c, Simplex(2), 1.0).value
    assert v == pytest.approx(0.0, abs=1e-9)
    assert abs(v - G.drifting_simplex_grid(c, 1.0)) <= 5e-2
    v = offline_drifting_opt(c, Simplex(2), 0.5).value
    assert abs(v - G.drifting_simplex_grid(c, 0.5)) <= 5e-2


def test_drifting_monotone_in_L(rng):
    c = rng.uniform(0, 1, (10, 3))
    vals = [offline_drifting_opt(c, Simplex(3), L).value for L in (0, 0.3, 1, 2.5, 6)]
    assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))
    c2 = rng.uniform(-1, 1, (6, 2))
    b = PBall(2, 1.0)
    vals = [offline_drifting_opt(c2, b, L).value for L in (0, 0.3, 1, 2.5)]
    assert all(y <= x + 1e-7 for x, y in zip(vals, vals[1:]))


def test_drifting_path_respects_budget(rng):
    c = rng.uniform(0, 1, (10, 3))
    res = offline_drifting_opt(c, Simplex(3), 1.5)
    assert res.u.drift_half_l1 <= 1.5 + 1e-7
    assert res.u.cost(c) == pytest.approx(res.value, abs=1e-9)


def test_onela_zero_costs():
    res = offline_onela_opt(np.zeros((3, 2)), PBall(2, 1.0, (2.0, 2.0)), x0=[2.0, 2.0])
    assert res.value == pytest.approx(0, abs=1e-9)
    np.testing.assert_allclose(res.u.u, 2.0, atol=1e-6)
    assert offline_onela_opt(np.zeros((3, 2)), Simplex(2)).value == pytest.approx(0, abs=1e-12)


def test_onela_single_cost_dual_bound():
    c = np.array([[1.0, 0.0]])
    v = offline_onela_opt(c, PBall(2, 1.0, (2.0, 2.0))).value
    assert v >= 2.0 - 1.0 - 1e-7
    assert v == pytest.approx(1.0, abs=1e-6)


def test_onela_alternating_spikes_grid():
    c = np.array([[1.0, 0.0], [0.0, 1.0]] * 3)
    v = offline_onela_opt(c, Simplex(2), alpha=1.0).value
    assert abs(v - G.onela_simplex_grid(c, 1.0)) <= 5e-2


def test_onela_pinned_start_costs_more(rng):
    c = rng.uniform(0, 1, (5, 3))
    free = offline_onela_opt(c, Simplex(3), alpha=0.5).value
    pinned = offline_onela_opt(c, Simplex(3), alpha=0.5, x0=[1, 0, 0]).value
    assert pinned >= free - 1e-9


def test_onela_rejects_negative_costs():
    with pytest.raises(InvalidInputError):
        offline_onela_opt([[-1.0, 0.0]], Simplex(2))


def test_comparator_paths():
    p = gen_comparator_path("constant", Simplex(3), 5.0, 10)
    assert p.drift_l1 == 0
    p = gen_comparator_path("switch", Simplex(3), 2, 9)
    assert p.drift_l1 == 4 and p.drift_half_l1 == 2
    assert [int(np.argmax(u)) for u in p.u[[0, 4, 8]]] == [0, 1, 2]
    p = gen_comparator_path("geodesic", PBall(2, 1.0, (2.0, 2.0)), 0.5, 20, seed=3)
    assert abs(p.drift_lp - 0.5) <= 1e-12
    assert np.all(np.linalg.norm(p.u - 2, axis=1) <= 1 + 1e-12)
    p = gen_comparator_path("geodesic", PBall(1.5, 1.0), 3.0, 20, n=3)
    assert abs(p.drift_lp - 3.0) <= 1e-12
    with pytest.raises(InvalidInputError):
        gen_comparator_path("switch", Simplex(3), 1.5, 10, switches=2)
    with pytest.raises(InvalidInputError):
        gen_comparator_path("geodesic", PBall(2, 1.0), 100.0, 3, n=2)


def test_comparator_from_points_measures_drift():
    p = ComparatorPath.from_points([[1, 0], [0, 1], [0, 1]], p=2)
    assert p.drift_l1 == 2 and p.drift_lp == pytest.approx(np.sqrt(2))


def brute_switch(c, S):
    T, n = c.shape
    best = np.inf
    for seq in itertools.product(range(n), repeat=T):
        if sum(a != b for a, b in zip(seq, seq[1:])) <= S:
            best = min(best, sum(c[t, i] for t, i in enumerate(seq)))
    return best


@given(st.integers(0, 2**31 - 1))
def test_best_switching_path_brute_force(seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(0, 1, (int(rng.integers(1, 6)), int(rng.integers(1, 4))))
    for S in range(4):
        res = best_switching_path(c, S)
        assert res.value == pytest.approx(brute_switch(c, S), abs=1e-12)
        assert res.u.drift_half_l1 <= S
        assert res.u.cost(c) == pytest.approx(res.value, abs=1e-12)




@pytest.mark.parametrize("seed", range(6))
def test_numeric_solvers_match_grid(seed):
    rng = np.random.default_rng(100 + seed)
    n = 2 + seed % 2
    T = 2 + seed % 5
    c = rng.uniform(0, 1, (T, n))
    L = 0.05 * int(rng.integers(0, 30))
    assert abs(offline_drifting_opt(c, Simplex(n), L).value - G.drifting_simplex_grid(c, L)) <= 5e-2
    alpha = float(rng.uniform(0.3, 2))
    assert abs(offline_onela_opt(c, Simplex(n), alpha=alpha).value - G.onela_simplex_grid(c, alpha)) <= 5e-2
    c2 = c[: min(T, 4), :2]
    k = (2.0, 2.0)
    assert abs(offline_onela_opt(c2, PBall(2, 1.0, k)).value - G.onela_ball_grid(c2, k, 1.0)) <= 5e-2
    c3 = rng.uniform(-1, 1, (min(T, 4), 2))
    L2 = float(rng.uniform(0, 2))
    assert abs(offline_drifting_opt(c3, PBall(2, 1.0, k), L2).value - G.drifting_ball_grid(c3, k, 1.0, L2)) <= 5e-2
