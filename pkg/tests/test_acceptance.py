"""Acceptance criteria 1-10.  Each test logs one PASS/FAIL line."""
import math

import numpy as np

from driftbench import certificates as C
from driftbench import harness as H
from driftbench.omd import Scenario, lemma2_decomposition, replay_residual, run
from driftbench.oracles import (
    best_switching_path, offline_drifting_opt, offline_fixed_opt, offline_onela_opt,
)
from driftbench.projections import PBall, Simplex, projection_lemma_gap
from driftbench.regularizers import (
    CenteredSquaredL2, NegEntropy, PNormSquared, ShiftedNegEntropy, bregman, strong_convexity_gap,
    three_point_residual,
)
import grid_oracles as G
from scenarios import FAMILIES, random_instance

N_PAIRS = 10_000

PAIRINGS = {
    "sq_l2_origin_ball": (CenteredSquaredL2((0.0, 0.0, 0.0)), PBall(2, 1.0)),
    "sq_l2_centred_ball": (CenteredSquaredL2((2.0, 2.0, 2.0)), PBall(2, 1.0, (2.0, 2.0, 2.0))),
    "pnorm_1.5_ball": (PNormSquared(1.5), PBall(1.5, 1.0)),
    "pnorm_1.2_ball": (PNormSquared(1.2), PBall(1.2, 2.0)),
    "shifted_entropy_simplex": (ShiftedNegEntropy(0.25), Simplex(3)),
    "shifted_entropy_simplex_small": (ShiftedNegEntropy(1 / 19), Simplex(5)),
    "entropy_simplex": (NegEntropy(), Simplex(3)),
}


def test_c1_projection_lemma(acceptance_log):
    rng = np.random.default_rng(1)
    worst = {}
    for name, (R, body) in PAIRINGS.items():
        n = body.n if isinstance(body, Simplex) else len(body.k(3))
        g = rng.normal(scale=3, size=(N_PAIRS, 2, n))
        worst[name] = min(projection_lemma_gap(R, body, a, b, gradients=True) for a, b in g)
    low = min(worst.values())
    ok = low >= -1e-9
    acceptance_log(ok, f"{len(PAIRINGS)} pairings x {N_PAIRS} pairs, min gap {low:.3g} (>= -1e-9)")
    assert ok, worst


def _simplex_points(rng, k, n):
    w = rng.exponential(size=(k, n))
    # push some mass to the boundary
    w[rng.random((k, n)) < 0.2] = 0
    w[:, 0] += 1e-12
    return w / w.sum(axis=1, keepdims=True)


def test_c2_identity_suite(acceptance_log):
    rng = np.random.default_rng(2)
    regs = [
        (CenteredSquaredL2((0.5, -0.5, 1.0)), lambda k: rng.uniform(-3, 3, (k, 3))),
        (PNormSquared(1.5), lambda k: rng.uniform(-3, 3, (k, 3))),
        (ShiftedNegEntropy(0.5), lambda k: _simplex_points(rng, k, 3)),
        (ShiftedNegEntropy(0.01), lambda k: _simplex_points(rng, k, 4)),
        (NegEntropy(), lambda k: rng.dirichlet(np.ones(3), k)),
    ]
    tp = breg = scg = 0.0
    for R, sample in regs:
        A, B, Cc = sample(N_PAIRS), sample(N_PAIRS), sample(N_PAIRS)
        for a, b, c in zip(A, B, Cc):
            tp = max(tp, three_point_residual(R, a, b, c))
            breg = min(breg, bregman(R, a, b))
            scg = min(scg, strong_convexity_gap(R, a, b))
    pairs = np.exp(rng.uniform(-8, 8, (N_PAIRS, 2)))
    lemma = min(C.entropy_lemma_gap(a, b) for a, b in pairs)
    ok = tp <= 1e-9 and breg >= -1e-12 and scg >= -1e-9 and lemma >= -1e-9 * 3000
    lemma_rel = min(C.entropy_lemma_gap(a, b) / max(1, a, b) for a, b in pairs)
    ok = ok and lemma_rel >= -1e-12
    acceptance_log(ok, f"3-point max {tp:.2g}, Bregman min {breg:.2g}, sc-gap min {scg:.2g}, "
                       f"1-D lemma min {lemma:.2g}")
    assert ok


def _corrupt_trace(tr, rng):
    t = int(rng.integers(1, tr.T + 1))
    bad = tr.xs.copy()
    bad[t] = bad[t] + rng.normal(scale=1e-3, size=tr.n)
    from dataclasses import replace
    return replace(tr, xs=bad)


def _detected(tr, builder):
    cert = builder(tr)
    return bool(C.check_feasibility(cert, tr.costs)) or replay_residual(tr) > 1e-9


def _builder(family, tr, cert):
    if family == "OCO_PBALL":
        return lambda t: C.build_oco_pball(t)
    if family == "DRIFT_EXPERT":
        return lambda t: C.build_drift_expert(t, cert.eta, cert.alpha, cert.drift_budget)
    if family == "ONELA_2BALL":
        return lambda t: C.build_onela_2ball(t)
    return lambda t: C.build_onela_mts(t, cert.eta, cert.alpha)


def test_c3_dual_feasibility(acceptance_log):
    rng = np.random.default_rng(3)
    bad = {f: 0 for f in FAMILIES}
    missed = {f: 0 for f in FAMILIES}
    for fam in FAMILIES:
        for i in range(1000):
            tr, cert, _ = random_instance(fam, rng)
            if C.check_feasibility(cert, tr.costs, tol=1e-8):
                bad[fam] += 1
            if i % 10 == 0:
                # one corrupted iterate, and one perturbed dual variable
                if not _detected(_corrupt_trace(tr, rng), _builder(fam, tr, cert)):
                    missed[fam] += 1
                j = int(rng.integers(cert.a.size))
                cert.a[j] += 0.1 if fam == "ONELA_MTS" else -0.1
                if not C.check_feasibility(cert, tr.costs, tol=1e-8):
                    missed[fam] += 1
    ok = not any(bad.values()) and not any(missed.values())
    acceptance_log(ok, f"infeasible {bad}, undetected faults {missed} (1000 scenarios/family)")
    assert ok


def _oracle(fam, tr, params):
    if fam == "OCO_PBALL":
        return offline_fixed_opt(tr.costs, params["body"]).value
    if fam == "DRIFT_EXPERT":
        return offline_drifting_opt(tr.costs, params["body"], params["L"]).value
    if fam == "ONELA_2BALL":
        return offline_onela_opt(tr.costs, params["body"]).value
    return offline_onela_opt(tr.costs, params["body"], alpha=params["alpha"]).value


def test_c4_weak_duality(acceptance_log):
    rng = np.random.default_rng(4)
    worst = {}
    for fam in FAMILIES:
        rel = math.inf
        for _ in range(200):
            tr, cert, params = random_instance(fam, rng, n_max=4, T_max=20)
            opt = _oracle(fam, tr, params)
            rel = min(rel, C.weak_duality_gap(cert, opt) / max(1.0, abs(opt)))
        worst[fam] = rel
    ok = min(worst.values()) >= -1e-6
    acceptance_log(ok, "min (OPT - dual)/max(1,|OPT|) per family: "
                       + ", ".join(f"{k}={v:.2g}" for k, v in worst.items()))
    assert ok


def test_c5_competitive_ball(acceptance_log):
    k, D, eps, eta = (2.0, 2.0), 1.0, 1.0, 1.0
    body = PBall(2, D, k)
    rows = []
    ok = True
    for T in (100, 1000):
        for seed in range(3):
            c = np.random.default_rng(50 + seed).uniform(0, 1, (T, 2))
            tr = run(Scenario(body, CenteredSquaredL2(k), eta, c, "1LA"))
            opt = offline_onela_opt(c, body).value
            tol = 1e-6 * opt
            s_ok = tr.S <= opt + D / eta + tol
            m_ok = tr.M <= (eta / eps) * opt + tol
            comb = tr.S + tr.M <= (1 + D / eps) * opt + D + tol
            ok = ok and s_ok and m_ok and comb
            rows.append(f"T={T}: S1-OPT={tr.S - opt:.3g}, M/OPT={tr.M / opt:.3g}")
    acceptance_log(ok, "; ".join(rows[::3]) + " (all seeds checked)")
    assert ok


def test_c6_drifting_regret(acceptance_log):
    T = 2000
    worst = math.inf
    ok = True
    for n in (5, 20):
        for L in (0, 3, 10):
            for eta in (0.01, 0.1):
                rng = np.random.default_rng(n * 100 + L)
                costs = rng.uniform(0, 1, (T, n))
                # cheap expert changes L times so the switching comparator has work to do
                cuts = np.linspace(0, T, L + 2).astype(int)
                for j in range(L + 1):
                    costs[cuts[j]:cuts[j + 1], j % n] *= 0.2
                alpha = math.log(n) / eta
                tr = run(Scenario(Simplex(n), ShiftedNegEntropy.for_dual_bound(eta, alpha), eta, costs))
                cert = C.build_drift_expert(tr, eta, alpha, L)
                U = best_switching_path(costs, L).u.u
                rep = C.theorem_bound_report(tr, cert, comparator=U).by_name()
                for name in ("drift_regret", "drift_service_bound"):
                    ok = ok and rep[name].passed
                    worst = min(worst, rep[name].slack)
    acceptance_log(ok, f"12 runs (n in 5,20; L in 0,3,10; eta in 0.01,0.1), min slack {worst:.4g}")
    assert ok


def test_c7_regret_decomposition(acceptance_log):
    rng = np.random.default_rng(7)
    worst_res = 0.0
    worst_p2 = math.inf
    for _ in range(200):
        n = int(rng.integers(2, 5))
        T = int(rng.integers(1, 60))
        D = float(rng.uniform(0.2, 3))
        eta = float(rng.uniform(0.01, 2))
        c = rng.uniform(-1, 1, (T, n)) * rng.uniform(0.1, 5)
        x0 = np.zeros(n) if rng.random() < 0.5 else rng.uniform(-1, 1, n) * D / (2 * math.sqrt(n))
        tr = run(Scenario(PBall(2, D), CenteredSquaredL2(), eta, c, x0=x0))
        U = rng.normal(size=(T, n))
        U *= D * rng.uniform(0, 1, (T, 1)) / np.linalg.norm(U, axis=1, keepdims=True)
        lt = lemma2_decomposition(tr, U)
        scale = max(1.0, abs(lt.lhs))
        worst_res = max(worst_res, lt.residual / scale)
        # eta D sum a_{t-1} with eta a_{t-1} = lam_t
        rhs = sum(float(np.dot(eta * ct, eta * ct)) for ct in c) - D * float(tr.lam.sum())
        worst_p2 = min(worst_p2, rhs + 1e-7 - lt.part2_lhs)
    ok = worst_res <= 1e-7 and worst_p2 >= 0
    acceptance_log(ok, f"200 runs: max rel residual {worst_res:.2g}, min part-2 slack {worst_p2:.3g}")
    assert ok


def test_c8_per_step_chains(acceptance_log):
    rng = np.random.default_rng(8)
    worst = {"multiplier": math.inf, "movement": math.inf, "dual_increment": math.inf, "mts": math.inf}
    for _ in range(100):
        n = int(rng.integers(2, 5))
        D = float(rng.uniform(0.2, 2))
        eps = float(rng.uniform(0.1, 2))
        k = tuple(D + eps + rng.uniform(0, 2, n))
        c = rng.uniform(0, 1, (int(rng.integers(1, 200)), n)) * rng.uniform(0.1, 4)
        tr = run(Scenario(PBall(2, D, k), CenteredSquaredL2(k), D, c, "1LA"))
        rep = C.theorem_bound_report(tr, C.build_onela_2ball(tr), epsilon=eps).by_name()
        worst["multiplier"] = min(worst["multiplier"], rep["multiplier_le_cost"].slack)
        worst["movement"] = min(worst["movement"], rep["movement_step"].slack)
        worst["dual_increment"] = min(worst["dual_increment"], rep["dual_increment"].slack)
        eta = float(rng.uniform(0.01, 2))
        alpha = float(rng.uniform(0.1, 4))
        c = rng.uniform(0, 1, (int(rng.integers(1, 200)), n)) * rng.uniform(0.1, 4)
        tr = run(Scenario(Simplex(n), ShiftedNegEntropy.for_dual_bound(eta, alpha), eta, c, "1LA"))
        rep = C.theorem_bound_report(tr, C.build_onela_mts(tr, eta, alpha)).by_name()
        worst["mts"] = min(worst["mts"], rep["mts_movement"].slack)
    ok = min(worst.values()) >= -1e-9
    acceptance_log(ok, "min per-step slack " + ", ".join(f"{k}={v:.2g}" for k, v in worst.items()))
    assert ok


def test_c9_oracle_equivalence(acceptance_log):
    rng = np.random.default_rng(9)
    exact = True
    for _ in range(300):
        n = int(rng.integers(1, 8))
        c = rng.uniform(-1, 1, (int(rng.integers(1, 10)), n))
        _, v = offline_fixed_opt(c, Simplex(n))
        exact = exact and v == min(math.fsum(c[:, i]) for i in range(n))
    closed = grid = 0.0
    for _ in range(50):
        k = rng.uniform(-2, 2, 2)
        D = float(rng.uniform(0.5, 2))
        c = rng.uniform(-1, 1, (int(rng.integers(1, 6)), 2))
        u, v = offline_fixed_opt(c, PBall(2, D, tuple(k)))
        Cs = c.sum(axis=0)
        closed = max(closed, abs(v - (Cs @ k - D * np.linalg.norm(Cs))),
                     float(np.max(np.abs(u - (k - D * Cs / np.linalg.norm(Cs))))))
        grid = max(grid, abs(v - G.fixed_opt_ball_grid(c, k, D)))
    numeric = 0.0
    k2 = (2.0, 2.0)
    for T in range(1, 7):
        for n in (2, 3):
            c = rng.uniform(0, 1, (T, n))
            L = 0.05 * int(rng.integers(0, 40))
            numeric = max(numeric, abs(offline_drifting_opt(c, Simplex(n), L).value - G.drifting_simplex_grid(c, L)))
            a = float(rng.uniform(0.3, 2))
            numeric = max(numeric, abs(offline_onela_opt(c, Simplex(n), alpha=a).value - G.onela_simplex_grid(c, a)))
        c = rng.uniform(0, 1, (T, 2))
        numeric = max(numeric, abs(offline_onela_opt(c, PBall(2, 1.0, k2)).value - G.onela_ball_grid(c, k2, 1.0)))
        c = rng.uniform(-1, 1, (T, 2))
        L = float(rng.uniform(0, 2))
        numeric = max(numeric, abs(offline_drifting_opt(c, PBall(2, 1.0, k2), L).value
                                   - G.drifting_ball_grid(c, k2, 1.0, L)))
    ok = exact and closed <= 1e-12 and grid <= 1e-4 and numeric <= 5e-2
    acceptance_log(ok, f"simplex exact={exact}, closed-form err {closed:.2g}, ball grid err {grid:.2g}, "
                       f"numeric vs grid max {numeric:.2g}")
    assert ok


def test_c10_determinism_round_trip(acceptance_log):
    ok = True
    for setting in H.SETTINGS:
        cfg = H.RunConfig(setting, n=3, T=80, seed=11, L=2.0)
        tr1, cert, rep = H.run_scenario(cfg)
        tr2, _, _ = H.run_scenario(cfg)
        b1, b2 = H.emit(tr1), H.emit(tr2)
        ok = ok and b1 == b2
        back = H.parse(b1)
        ok = ok and H.traces_equal(back, tr1) and H.emit(back) == b1
        ok = ok and H.parse(H.emit(cert)).to_dict() == cert.to_dict()
        ok = ok and H.parse(H.emit(rep)).to_dict() == rep.to_dict()
    acceptance_log(ok, "byte-identical traces and exact parse(emit(x)) for all four settings")
    assert ok
