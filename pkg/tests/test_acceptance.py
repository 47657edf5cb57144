"""Acceptance run: one test and one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or directly with ``python tests/test_acceptance.py``.
"""

import time

import numpy as np
import pytest

from conftest import record_acceptance

from auditgame.adaptive import (
    budget_beta,
    expected_audits,
    minimize_misreport_incentive,
    solve_adaptive_budgeted,
    solve_adaptive_costly,
)
from auditgame.equilibrium import (
    Objective,
    evaluate_best,
    evaluate_worst,
    metrics,
    summarize,
)
from auditgame.game import (
    AuditGame,
    Budgeted,
    Costly,
    ContinuousModelSpec,
    discretize,
    fig1_game,
    heatmap_game,
    random_game,
    three_type_game,
)
from auditgame.nonadaptive import (
    all_critical_values,
    critical_indices,
    critical_vector,
    monotone_transform,
    succinct_search,
)
from auditgame.online import run_online
from auditgame.oracle import (
    GridSpec,
    enumerate_equilibria,
    equilibrium_value,
    grid_best,
    misreport_incentive_lp,
)
from auditgame.sweeps import witness_class

EPS = 1e-3
OBJECTIVES = (Objective.UTILITY, Objective.WELFARE)


def _check(number, ok, detail):
    record_acceptance(number, bool(ok), detail)
    assert ok, detail


def test_criterion_01_two_type_example():
    t0 = time.perf_counter()
    g = fig1_game()
    res = succinct_search(g, eps=EPS)
    worst_q = evaluate_worst(g, [0.0, 0.25])[0]
    elapsed = time.perf_counter() - t0
    ok = (15 / 8 - 2 * EPS <= res.value < 15 / 8 and abs(worst_q - 0.25) <= 1e-9
          and elapsed < 1.0)
    _check(1, ok, f"value {res.value:.9f} in [15/8-2e-3, 15/8), "
                  f"worst at (0,1/4) = {worst_q:.12g}, {elapsed:.3f} s")


def test_criterion_02_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    failures = []
    for j in range(200):
        m = 2 if j % 2 == 0 else 3
        g = random_game(rng, m)
        res = succinct_search(g, eps=EPS)
        grid = grid_best(g, "utility", GridSpec(step=1 / 512))
        if res.value < grid.value - 2 * g.n * EPS - grid.slack:
            failures.append((j, res.value, grid.value, grid.slack))
    mismatches = 0
    for j in range(1000):
        m = int(rng.integers(2, 5))
        g = random_game(rng, m)
        if j % 2:
            # critical vectors carry the ties that make equilibria non-unique
            idx = critical_indices(m)[int(rng.integers(m * (m + 1)))]
            p = critical_vector(g, idx, EPS)
            p[idx.kappa] = (g.pay[idx.kappa] - g.pay_prev(idx.iota)) / g.pen[idx.kappa] \
                if idx.iota > 0 else p[idx.kappa]
            p = np.clip(p, 0, 1)
        else:
            p = rng.uniform(0, 1, m)
        eqs = enumerate_equilibria(g, p)
        for obj in OBJECTIVES:
            vals = [equilibrium_value(g, p, e, obj) for e in eqs]
            if (abs(min(vals) - evaluate_worst(g, p, obj)[0]) > 1e-9
                    or abs(max(vals) - evaluate_best(g, p, obj)[0]) > 1e-9):
                mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = not failures and mismatches == 0 and elapsed < 300
    _check(2, ok, f"grid failures {len(failures)}/200, enumeration mismatches "
                  f"{mismatches}/2000, {elapsed:.1f} s")


def test_criterion_03_fast_slow_dp():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst_gap = 0.0
    ms = [50] + [int(x) for x in rng.integers(2, 51, size=49)]
    for m in ms:
        g = random_game(rng, m)
        for obj in OBJECTIVES:
            _, fast = all_critical_values(g, EPS, obj, "fast")
            _, slow = all_critical_values(g, EPS, obj, "slow")
            worst_gap = max(worst_gap, float(np.max(np.abs(fast - slow))))
    elapsed = time.perf_counter() - t0
    ok = worst_gap <= 1e-9 and elapsed < 30
    _check(3, ok, f"max |fast - slow| = {worst_gap:.3g} over 50 games (m <= 50), {elapsed:.1f} s")


def test_criterion_04_monotonicity():
    rng = np.random.default_rng(4)
    bad = []
    summary_bad = 0
    for j in range(50):
        g = random_game(rng, int(rng.integers(2, 7)))
        tol = 2 * g.n * EPS + 1e-6
        lams = [0.0, 0.3 * g.pen.min(), 0.6 * g.pen.min()]
        for obj in OBJECTIVES:
            vals = [succinct_search(g.replace(regime=Costly(l)), obj, EPS).value for l in lams]
            if any(b > a + tol for a, b in zip(vals, vals[1:])):
                bad.append((j, obj.value, "lam", vals))
            v0 = succinct_search(g, obj, EPS).value
            v1 = succinct_search(g.replace(pen=g.pen + 0.5), obj, EPS).value
            if v1 < v0 - tol:
                bad.append((j, obj.value, "pen", v0, v1))
        p = rng.uniform(0, 1, g.m)
        g2, p2 = monotone_transform(g, p, g.pen + rng.uniform(0, 2, g.m))
        s, s2 = summarize(g, p), summarize(g2, p2)
        if ((s.A_hat, s.i_truth, s.strict) != (s2.A_hat, s2.i_truth, s2.strict)
                or np.max(np.abs(s.misreport_utils - s2.misreport_utils)) > 1e-12):
            summary_bad += 1
    ok = not bad and summary_bad == 0
    _check(4, ok, f"monotonicity violations {len(bad)}, transformed summaries differing "
                  f"{summary_bad}/50")


def test_criterion_05_cost_and_penalty_sweeps():
    tol = 2 * EPS + 1e-9
    problems = []
    for obj in OBJECTIVES:
        vals = [succinct_search(three_type_game(lam=l), obj, EPS).value
                for l in (0.6, 0.7, 0.8, 0.9)]
        if any(b > a + tol for a, b in zip(vals, vals[1:])):
            problems.append(f"{obj.value} not nonincreasing in lam: {vals}")
        bs = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
        res = [succinct_search(three_type_game(lam=0.7, b=b), obj, EPS) for b in bs]
        vals = [r.value for r in res]
        if any(b < a - tol for a, b in zip(vals, vals[1:])):
            problems.append(f"{obj.value} not nondecreasing in b: {vals}")
        for k in (1, 2):
            pk = [r.p_star[k] for r in res]
            if any(b > a + 1e-9 for a, b in zip(pk, pk[1:])):
                problems.append(f"{obj.value} p[{k}] increases with b: {pk}")
    _check(5, not problems, "; ".join(problems) or
           "values fall with lam, rise with b; p[1], p[2] fall with b")


def test_criterion_06_prior_corners():
    expected = {
        (0.9, 0.05, 0.05): "truthful",
        (0.05, 0.9, 0.05): "single-minded(1,1)",
        (0.05, 0.05, 0.9): "single-minded(2,2)",
    }
    found = {}
    ok = True
    for q, cls in expected.items():
        g = heatmap_game(q)
        res = succinct_search(g, eps=EPS)
        solver_cls = witness_class(res.witness.Q)
        # oracle: worst pure equilibrium at the solver's vector, by enumeration
        eqs = enumerate_equilibria(g, res.p_star)
        worst_eq = min(eqs, key=lambda e: equilibrium_value(g, res.p_star, e))
        enum_cls = witness_class(worst_eq.Q)
        # oracle: grid maximizer, its worst equilibrium, and the value bound
        grid = grid_best(g, "utility", GridSpec(step=1 / 256))
        g_eqs = enumerate_equilibria(g, grid.p_at)
        grid_cls = witness_class(min(g_eqs, key=lambda e: equilibrium_value(g, grid.p_at, e)).Q)
        bound_ok = res.value >= grid.value - 2 * g.n * EPS - grid.slack
        found[q] = (solver_cls, enum_cls, grid_cls)
        ok &= solver_cls == enum_cls == grid_cls == cls and bound_ok
    _check(6, ok, ", ".join(f"{q}: {v[0]} (enum {v[1]}, grid {v[2]})" for q, v in found.items()))


def test_criterion_07_adaptive_equivalence():
    rng = np.random.default_rng(7)
    bad = 0
    for _ in range(50):
        g = random_game(rng, int(rng.integers(2, 7)), insensitive=True)
        pol = solve_adaptive_costly(g, EPS)
        base = succinct_search(g, eps=EPS).value
        best_crit = max(evaluate_best(g, critical_vector(g, idx, EPS))[0]
                        for idx in critical_indices(g.m))
        if not (base - 1e-9 <= pol.value <= base + 2 * g.n * EPS + 1e-9
                and abs(pol.value - best_crit) <= 1e-9):
            bad += 1
    _check(7, bad == 0, f"{50 - bad}/50 insensitive games within bounds")


def test_criterion_08_budgeted():
    rng = np.random.default_rng(8)
    bad = []
    for j in range(50):
        g0 = random_game(rng, int(rng.integers(2, 7)))
        m, n = g0.m, g0.n
        beta = (g0.pay[-1] - g0.pay[-2]) / g0.pen[-1]
        # small branch
        B = float(rng.uniform(0, 1)) * n * beta
        small = solve_adaptive_budgeted(g0.replace(regime=Budgeted(B)))
        lemma_bound = (float(np.sum(g0.q * (g0.val[:, m - 1] - g0.pay[m - 1])))
                       + B / n * g0.pen[m - 1])
        if small.branch != "small" or small.value > lemma_bound + 1e-12:
            bad.append((j, "small", small.value, lemma_bound))
        # sufficient branch
        B = float(rng.uniform(1.01, 10)) * n * beta
        g = g0.replace(regime=Budgeted(B))
        pol = solve_adaptive_budgeted(g)
        spend = n * float(pol.qhat_star @ pol.p_star)
        edge = solve_adaptive_budgeted(g0.replace(regime=Budgeted(n * beta)))
        if (pol.branch != "sufficient" or spend > B + 1e-9
                or abs(spend - expected_audits(g, pol.p_star, pol.witness)) > 1e-12
                or pol.value < edge.value - 1e-9):
            bad.append((j, "sufficient", spend, B, pol.value, edge.value))
    _check(8, not bad, f"{50 - len(bad)}/50 games: small value <= bound, "
                       "sufficient within budget and dominating the pooled policy")


def test_criterion_09_misreport_incentive():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(100):
        m = int(rng.integers(2, 8))
        pay = np.cumsum(rng.uniform(0.1, 1.0, m))
        pen = pay + rng.uniform(0.0, 2.0, m)
        qhat = rng.dirichlet(np.ones(m))
        n = float(rng.uniform(0.5, 2.0))
        B = float(rng.uniform(0, 1.2)) * n
        g = AuditGame(q=qhat, val=np.zeros((m, m)), pay=pay, pen=pen, n=n)
        p, eps_mi = minimize_misreport_incentive(g, qhat, B)
        _, level = misreport_incentive_lp(pay, pen, qhat, B, n)
        worst = max(worst, abs(eps_mi - (level - pay.min())))
    g = fig1_game()
    r = minimize_misreport_incentive(g, [0.5, 0.5], 0.25)
    lp_p, lp_level = misreport_incentive_lp(g.pay, g.pen, [0.5, 0.5], 0.25)
    fig_ok = (abs(r.level - 4 / 7) <= 1e-12 and np.allclose(r.p, [1 / 7, 5 / 14], atol=1e-12)
              and abs(lp_level - 4 / 7) <= 1e-9 and np.allclose(lp_p, [1 / 7, 5 / 14], atol=1e-9))
    uniform_ok = True
    for _ in range(20):
        m = int(rng.integers(3, 9))
        low = int(rng.integers(1, m))
        b = float(rng.uniform(0.1, 2.0))
        pay = np.r_[np.zeros(low), np.ones(m - low)]
        pen = np.r_[np.zeros(low), np.full(m - low, 1 + b)]
        qhat = rng.dirichlet(np.ones(m))
        B = float(rng.uniform(0, 1))
        g = AuditGame(q=qhat, val=np.zeros((m, m)), pay=pay, pen=pen)
        p, _ = minimize_misreport_incentive(g, qhat, B)
        top = p[low:]
        uniform_ok &= bool(np.all(p[:low] == 0) and np.ptp(top) <= 1e-12)
    ok = worst <= 1e-7 and fig_ok and uniform_ok
    _check(9, ok, f"max |eps_MI - LP| = {worst:.2g} over 100 instances; two-type instance "
                  f"u* = {r.level:.12g}; threshold instances uniform: {uniform_ok}")


def test_criterion_10_online_regret():
    t0 = time.perf_counter()
    g = fig1_game()
    sequences = {"constant": [[0.5, 0.5]], "alternating": [[0.5, 0.5], [0.8, 0.2]]}
    ok = True
    parts = []
    for name, priors in sequences.items():
        avg = {}
        for T in (256, 4096):
            regrets = []
            for seed in range(10):
                logs, rep = run_online(g, priors, T, seed, record_probs=True)
                ok &= all(abs(log.probs.sum() - 1.0) <= 1e-12 for log in logs)
                regrets.append(rep.avg_regret)
            avg[T] = float(np.mean(regrets))
        ok &= avg[4096] < avg[256]
        parts.append(f"{name}: {avg[256]:.4f} -> {avg[4096]:.4f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 120
    _check(10, ok, "mean per-round regret T=256 -> 4096, " + "; ".join(parts)
           + f", {elapsed:.1f} s")


def test_criterion_11_resolution_sweep():
    t0 = time.perf_counter()
    spec = ContinuousModelSpec()
    ms = (2, 5, 10, 20, 50, 100, 200)
    eps = 1e-6
    table = {}
    for m in ms:
        g = discretize(spec, m)
        for obj in OBJECTIVES:
            res = succinct_search(g, obj, eps)
            table[m, obj] = (res.value, metrics(g, res.p_star, res.witness))
    flat = {obj: abs(table[200, obj][0] - table[100, obj][0]) / abs(table[100, obj][0])
            for obj in OBJECTIVES}
    rate_u = np.mean([table[m, Objective.UTILITY][1].audit_rate for m in ms])
    rate_w = np.mean([table[m, Objective.WELFARE][1].audit_rate for m in ms])
    mass_u = np.mean([table[m, Objective.UTILITY][1].misreport_mass for m in ms])
    mass_w = np.mean([table[m, Objective.WELFARE][1].misreport_mass for m in ms])
    elapsed = time.perf_counter() - t0
    ok = (all(v <= 0.05 for v in flat.values()) and rate_u >= rate_w and mass_u <= mass_w
          and elapsed < 600)
    _check(11, ok, f"relative change m=100->200: U {flat[Objective.UTILITY]:.2e}, "
                   f"W {flat[Objective.WELFARE]:.2e}; mean audit rate U {rate_u:.4f} >= "
                   f"W {rate_w:.4f}; mean misreport mass U {mass_u:.3f} <= W {mass_w:.3f}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
