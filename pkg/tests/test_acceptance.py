"""One test per acceptance criterion; each records a PASS/FAIL line with its measured values."""

import math
import time

import numpy as np
from scipy import special

from qsvtlab import encoding as en
from qsvtlab import poly_approx as pa
from qsvtlab import state_testing as st
from qsvtlab.simulator import binary_entropy, distance_oracle

from reference import (
    best_uniform_error,
    chebyshev_sv,
    extend_on_purification,
    flipped_copy,
    random_contraction,
    random_density,
    random_state_circuit,
)

GRID = np.linspace(-1, 1, 10_000)


def random_instance(rng, n, r, **promise):
    outs = tuple(range(r))
    return st.StateTestInstance(random_state_circuit(n, rng), random_state_circuit(n, rng), outs, **promise)


def oracle(inst, measure):
    r0, r1 = inst.states()
    return distance_oracle(r0, r1, measure)


def test_sign_approximation_bound(criterion):
    rows, ok = [], True
    for delta, eps in [(0.2, 0.05), (0.1, 0.01)]:
        t = time.perf_counter()
        P = pa.sign_poly(delta, eps)
        elapsed = time.perf_counter() - t
        out = np.abs(GRID) >= delta
        err = float(np.max(np.abs(P(GRID[out]) - np.sign(GRID[out]))))
        peak = float(np.max(np.abs(P(GRID))))
        ok &= err <= 5 * eps and peak <= 1 and elapsed < 10
        rows.append(f"(delta={delta}, eps={eps}) err={err:.3g} <= {5 * eps:g}, max|P|={peak:.12f}, {elapsed:.2f}s")
    assert criterion(1, ok, "; ".join(rows))


def clipped_log_target(beta):
    scale = 1 / (2 * math.log(2 / beta))
    return lambda x: -np.log(np.maximum(np.abs(x), beta)) * scale


def test_averaged_truncation_factor(criterion):
    cases = [
        ("erf(4x)", lambda x: special.erf(4 * x), 24),
        ("cos(5x)", lambda x: np.cos(5 * x), 8),
        ("log target beta=0.2", clipped_log_target(0.2), 16),
    ]
    t = time.perf_counter()
    rows, ok = [], True
    for name, f, d in cases:
        c, _ = pa.chebyshev_coeffs(f, 2 * d, 1e-12)
        P = pa.averaged_truncation(c, d)
        err = float(np.max(np.abs(P(GRID) - f(GRID))))
        best = best_uniform_error(f, d)
        ok &= err <= 4 * best + 1e-8
        rows.append(f"{name} d={d}: {err:.3g} vs 4*{best:.3g}")
    elapsed = time.perf_counter() - t
    ok &= elapsed < 60
    assert criterion(2, ok, "; ".join(rows) + f"; {elapsed:.1f}s")


def test_chebyshev_qsvt_exactness(criterion):
    rng = np.random.default_rng(2024)
    t = time.perf_counter()
    worst = 0.0
    for i in range(50):
        dim = int(rng.choice([2, 4, 8]))
        k = int(rng.integers(1, 33))
        A = random_contraction(dim, rng, hermitian=bool(i % 2))
        c = np.zeros(k + 1)
        c[k] = 1.0
        got = en.chebyshev_qsvt(en.from_matrix(A, alpha=1.0), k).block
        worst = max(worst, float(np.max(np.abs(got - chebyshev_sv(A, c, "odd" if k % 2 else "even")))))
    elapsed = time.perf_counter() - t
    ok = worst <= 1e-8 and elapsed < 60
    assert criterion(3, ok, f"50 contractions, worst deviation {worst:.3g} <= 1e-8, {elapsed:.1f}s")


def test_parity_preservation(criterion):
    rng = np.random.default_rng(7)
    P = pa.sign_poly(0.1, 0.01)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 4))
        outs = tuple(range(int(rng.integers(1, n))))
        c = random_state_circuit(n, rng)
        inst = st.StateTestInstance(c, extend_on_purification(c, rng, outs), outs)
        E = st.difference_encoding(inst)
        for Q in (inst.q0, inst.q1):
            worst = max(worst, abs(st.tester(Q, outs, E, P) - 0.5))
    assert criterion(4, worst <= 1e-9, f"20 equal-state instances, max |p - 1/2| = {worst:.3g} <= 1e-9")


def test_trace_distance_estimation(criterion):
    rng = np.random.default_rng(11)
    cfg = st.TesterConfig(cap=1 << 15)
    t = time.perf_counter()
    errors, degree = [], None
    for _ in range(20):
        inst = random_instance(rng, 3, 2, alpha=0.8, beta=0.2)
        out = st.gap_qsd(inst, cfg)
        errors.append(abs(out.estimate - oracle(inst, "td")))
        degree = out.schedule["degree"]
    elapsed = time.perf_counter() - t
    worst = max(errors)
    ok = worst <= 0.15 and elapsed < 300
    assert criterion(5, ok, f"20 instances (r=2), max |est - td| = {worst:.3g} <= 0.15, degree {degree}, {elapsed:.1f}s")


def test_entropy_difference_estimation(criterion):
    rng = np.random.default_rng(13)
    cfg = st.TesterConfig(cap=1 << 23)
    t = time.perf_counter()
    errors, out = [], None
    for i in range(20):
        n = 1 + i % 2
        inst = random_instance(rng, n, 1, g=0.4)
        out = st.gap_qed(inst, cfg)
        errors.append(abs(out.estimate - oracle(inst, "entropy_diff")))
    elapsed = time.perf_counter() - t
    sched = out.schedule
    check = 2 * math.log(2 / sched["beta"]) * 2 ** (1 + 1) * sched["beta"]
    worst = max(errors)
    ok = worst <= 0.1 and check <= sched["eps"] / 4
    assert criterion(
        6,
        ok,
        f"20 instances (r=1), max |est - dS| = {worst:.3g} <= 0.1; truncation {check:.3g} <= eps/4 = {sched['eps'] / 4:g}; "
        f"beta {sched['beta']:.3g}, degree {sched['degree']}, {elapsed:.1f}s",
    )


def no_instance(rng, alpha, measure):
    if alpha >= 1:
        n = int(rng.integers(1, 3))
        c = random_state_circuit(n, rng)
        return st.StateTestInstance(c, flipped_copy(c), tuple(range(n)), alpha, 0.0)
    while True:
        n = int(rng.integers(1, 3))
        inst = random_instance(rng, n, 1, alpha=alpha, beta=0.0)
        if oracle(inst, measure) >= alpha:
            return inst


def test_certification(criterion):
    rng = np.random.default_rng(17)
    cfg = st.TesterConfig(cap=1 << 15)
    completeness = []
    for _ in range(20):
        n = int(rng.integers(1, 4))
        outs = tuple(range(int(rng.integers(1, min(n, 2) + 1))))
        c = random_state_circuit(n, rng)
        inst = st.StateTestInstance(c, extend_on_purification(c, rng, outs), outs, 0.5, 0.0)
        completeness.append(min(st.cert_qsd(inst, cfg).estimate, st.cert_qhs(inst, cfg).estimate))
    margins = []
    for alpha in (0.5, 0.9, 1.0):
        for _ in range(20):
            qsd = no_instance(rng, alpha, "td")
            margins.append(1 - alpha**2 / 16 - st.cert_qsd(qsd, cfg).estimate)
            qhs = no_instance(rng, alpha, "hs2")
            margins.append(1 - alpha**2 / 2 - st.cert_qhs(qhs, cfg).estimate)
    low = min(completeness)
    ok = abs(low - 1) <= 1e-9 and min(margins) >= 0
    assert criterion(
        7, ok, f"yes: min accept {low:.12f} (20 instances); no: min margin below ceiling {min(margins):.3g} (120 runs)"
    )


def test_holevo_helstrom(criterion):
    rng = np.random.default_rng(19)
    cfg = st.TesterConfig(cap=1 << 18)
    eps, trials = 0.01, 10_000
    band = math.sqrt(math.log(2 / 0.01) / (2 * trials))
    lo_margin, hi_margin, worst_gap = math.inf, math.inf, 0.0
    for i in range(20):
        n = int(rng.integers(1, 3))
        inst = random_instance(rng, n, 1)
        td = oracle(inst, "td")
        m = st.hh_measurement(inst.q0, inst.q1, inst.outputs, eps, cfg)
        lo_margin = min(lo_margin, m.success - (0.5 + 0.5 * td - eps))
        hi_margin = min(hi_margin, 0.5 + 0.5 * td + 1e-9 - m.success)
        res = st.hypothesis_protocol(inst.q0, inst.q1, inst.outputs, eps, trials, 100 + i, cfg)
        worst_gap = max(worst_gap, abs(res["empirical_success"] - res["analytic_success"]))
    ok = lo_margin >= 0 and hi_margin >= 0 and worst_gap <= band
    assert criterion(
        8,
        ok,
        f"20 instances, success within [td-bound - eps, td-bound + 1e-9] (margins {lo_margin:.3g}, {hi_margin:.3g}); "
        f"protocol max |emp - analytic| = {worst_gap:.4f} <= {band:.4f}",
    )


def test_substochastic_powering(criterion):
    rng = np.random.default_rng(23)
    samples = 10**6
    t = time.perf_counter()
    worst = 0.0
    for i in range(20):
        B = np.triu(rng.uniform(0, 1, (5, 5)))
        B *= (rng.uniform(0.3, 0.95, 5) / B.sum(axis=1))[:, None]
        k = int(rng.integers(1, 11))
        s = int(rng.integers(1, 6))
        tgt = int(rng.integers(s, 6))
        exact = pa.substochastic_power(B, k, s, tgt)
        walk = pa.substochastic_power(B, k, s, tgt, mode="walk", samples=samples, seed=i)
        sigma = math.sqrt(exact * (1 - exact) / samples)
        worst = max(worst, abs(walk - exact) / (3 * sigma) if sigma > 0 else (0.0 if walk == exact else math.inf))
    elapsed = time.perf_counter() - t
    ok = worst <= 1 and elapsed < 120
    assert criterion(9, ok, f"20 matrices, max |walk - exact| / 3 sigma = {worst:.3f} <= 1, {elapsed:.1f}s")


def test_distance_inequalities(criterion):
    rng = np.random.default_rng(29)
    fvdg = qjs = math.inf
    for i in range(100):
        dim = [2, 4, 8][i % 3]
        r0 = random_density(dim, rng, rank=int(rng.integers(1, dim + 1)))
        r1 = random_density(dim, rng, rank=int(rng.integers(1, dim + 1)))
        td = distance_oracle(r0, r1, "td")
        F = distance_oracle(r0, r1, "fidelity")
        J = distance_oracle(r0, r1, "qjs2")
        fvdg = min(fvdg, td - (1 - F), math.sqrt(max(1 - F**2, 0)) - td)
        qjs = min(qjs, J - (1 - binary_entropy((1 - td) / 2)), td - J)
    ok = fvdg >= -1e-9 and qjs >= -1e-9
    assert criterion(10, ok, f"100 pairs, min slack Fuchs-van de Graaf {fvdg:.3g}, Jensen-Shannon {qjs:.3g} (>= -1e-9)")
