"""Testers for pairs of prepared states, built on QSVT of purified encodings.

Every algorithm takes circuits ``Q0`` and ``Q1`` together with the qubits
that hold the state, derives its parameter schedule from the promise gap,
and reports an estimate, a decision and the schedule it used. The default
``exact_prob`` mode evaluates acceptance probabilities exactly; ``sample``
mode draws the number of shots the schedule calls for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy import fft as sfft
from scipy import optimize

from ._validation import ValidationError, check_positive_int
from .encoding import (
    BlockEncoding,
    ProjectorSpec,
    apply_poly_qsvt,
    lcu_combine,
    purify_to_encoding,
    sign_qsvt,
)
from .poly_approx import CONSTANTS, ApproxConstants, ChebyshevPoly, log_poly, sign_poly
from .simulator import (
    CIRCUIT_SIM_QUBITS,
    Circuit,
    Gate,
    binary_entropy,
    exact_aa,
    hadamard_test,
    prepared_state,
    sample_probability,
    swap_test,
    swap_test_circuit,
    tester_circuit,
)

MODES = ("exact_prob", "sample")
SCHEDULE_KEYS = ("delta", "eps_qsvt", "beta", "eps_H")


# ---------------------------------------------------------------------------
# Inputs, options and results


@dataclass(frozen=True, eq=False)
class StateTestInstance:
    """Two preparation circuits, the qubits holding the state, and the promise."""

    q0: Circuit
    q1: Circuit
    outputs: tuple
    alpha: float | None = None
    beta: float | None = None
    g: float | None = None

    def __post_init__(self):
        if self.q0.n_qubits != self.q1.n_qubits:
            raise ValidationError(f"circuits act on {self.q0.n_qubits} and {self.q1.n_qubits} qubits")
        outs = tuple(sorted(set(int(q) for q in self.outputs)))
        if not outs or len(outs) != len(tuple(self.outputs)):
            raise ValidationError("output qubits must be nonempty and distinct")
        if outs[0] < 0 or outs[-1] >= self.q0.n_qubits:
            raise ValidationError(f"output qubits {outs} out of range for {self.q0.n_qubits} qubits")
        object.__setattr__(self, "outputs", outs)
        if (self.alpha is None) != (self.beta is None):
            raise ValidationError("alpha and beta must be given together")
        if self.alpha is not None:
            a, b = float(self.alpha), float(self.beta)
            if not (math.isfinite(a) and math.isfinite(b) and a > b >= 0):
                raise ValidationError(f"need alpha > beta >= 0, got alpha={a}, beta={b}")
            object.__setattr__(self, "alpha", a)
            object.__setattr__(self, "beta", b)
        if self.g is not None:
            g = float(self.g)
            if not (math.isfinite(g) and g > 0):
                raise ValidationError(f"gap g must be positive, got {g}")
            object.__setattr__(self, "g", g)

    @property
    def r(self) -> int:
        return len(self.outputs)

    def states(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            prepared_state(self.q0, self.outputs).entries,
            prepared_state(self.q1, self.outputs).entries,
        )

    def thresholds(self) -> tuple[float, float]:
        if self.alpha is None:
            raise ValidationError("this algorithm needs thresholds alpha and beta")
        return self.alpha, self.beta

    def gap(self) -> float:
        if self.g is None:
            raise ValidationError("this algorithm needs a gap g")
        return self.g

    def to_dict(self) -> dict:
        out = {"q0": self.q0.to_dict(), "q1": self.q1.to_dict(), "outputs": list(self.outputs)}
        for key in ("alpha", "beta", "g"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "StateTestInstance":
        try:
            return cls(
                Circuit.from_dict(data["q0"]),
                Circuit.from_dict(data["q1"]),
                tuple(data["outputs"]),
                data.get("alpha"),
                data.get("beta"),
                data.get("g"),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed instance description: {exc}") from exc


@dataclass(frozen=True)
class TesterConfig:
    """Run options shared by the algorithms.

    ``cap`` overrides the polynomial degree cap. ``overrides`` replaces
    entries of a computed schedule (keys ``delta``, ``eps_qsvt``, ``beta``,
    ``eps_H``); the outcome then reports the overridden values.
    """

    mode: str = "exact_prob"
    seed: int = 0
    fail_prob: float = 0.1
    cap: int | None = None
    constants: ApproxConstants = CONSTANTS
    overrides: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 < self.fail_prob < 1:
            raise ValidationError(f"fail_prob must lie in (0, 1), got {self.fail_prob}")
        bad = set(self.overrides) - set(SCHEDULE_KEYS)
        if bad:
            raise ValidationError(f"unknown schedule overrides {sorted(bad)}")
        for key, value in self.overrides.items():
            if not 0 < float(value) < 1:
                raise ValidationError(f"override {key} must lie in (0, 1), got {value}")


@dataclass
class TestOutcome:
    """Estimate, decision and the schedule behind them.

    ``tolerance`` is how far the estimate may sit from the true value under
    the schedule; ``threshold`` is the value the decision compares against.
    """

    __test__ = False  # not a pytest class

    estimate: float
    decision: str
    threshold: float
    tolerance: float
    schedule: dict
    diagnostics: dict

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "decision": self.decision,
            "threshold": self.threshold,
            "tolerance": self.tolerance,
            "schedule": self.schedule,
            "diagnostics": self.diagnostics,
        }


# ---------------------------------------------------------------------------
# Shared pieces


@lru_cache(maxsize=32)
def cached_sign_poly(delta: float, eps: float, cap: int | None) -> ChebyshevPoly:
    return sign_poly(delta, eps, cap)


@lru_cache(maxsize=8)
def cached_log_poly(beta: float, eps: float, cap: int | None) -> ChebyshevPoly:
    return log_poly(beta, eps, cap)


def child_seeds(seed: int, k: int) -> list[int]:
    """``k`` independent seeds derived from one."""
    return [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(int(seed)).spawn(k)]


def hoeffding_shots(scale: float, eps_H: float, fail_prob: float) -> int:
    """Shots for an estimate of ``scale * (2p - 1)`` within ``eps_H`` except with ``fail_prob``."""
    return math.ceil(2 * scale**2 * math.log(2 / fail_prob) / eps_H**2)


def difference_encoding(inst: StateTestInstance) -> BlockEncoding:
    """Unit-scale encoding of ``(rho0 - rho1) / 2``."""
    E0 = purify_to_encoding(inst.q0, inst.outputs)
    E1 = purify_to_encoding(inst.q1, inst.outputs)
    return lcu_combine([E0, E1], [0.5, -0.5])


def tester(
    Q: Circuit,
    outputs: Sequence[int],
    E: BlockEncoding,
    P: ChebyshevPoly,
    cfg: TesterConfig = TesterConfig(),
    shots: int = 10_000,
) -> float:
    """Acceptance probability of the Hadamard test of ``P`` applied to ``E``.

    Equals ``(1 + Re Tr(P(A) rho) / s) / 2`` with ``s`` the scale of the
    Chebyshev combination; a zero polynomial gives exactly one half.
    """
    W = apply_poly_qsvt(E, P, cfg.cap)
    return hadamard_test(W, Q, outputs, cfg.mode, shots, cfg.seed)


def _scaled_estimate(W: BlockEncoding, Q: Circuit, outputs, cfg: TesterConfig, eps_H: float, seed: int):
    """``scale * (2p - 1)``, the estimate of ``Re Tr(block rho)`` times the scale, and ``p``."""
    shots = hoeffding_shots(W.alpha, eps_H, cfg.fail_prob)
    p = hadamard_test(W, Q, outputs, cfg.mode, shots, seed)
    return W.alpha * (2 * p - 1), p, shots


def _poly_info(P: ChebyshevPoly) -> dict:
    return {"degree": P.degree, "l1_norm": P.l1_norm, "lcu_weight": P.lcu_weight()}


def _override(cfg: TesterConfig, schedule: dict) -> dict:
    for key, value in cfg.overrides.items():
        if key in schedule:
            schedule[key] = float(value)
    return schedule


def _decide(estimate: float, threshold: float) -> str:
    return "yes" if estimate > threshold else "no"


# ---------------------------------------------------------------------------
# Trace distance


def sign_schedule(eps: float, r: int, cfg: TesterConfig) -> dict:
    """Gap and precision of the sign approximation for target accuracy ``eps``."""
    c = cfg.constants
    sched = {
        "eps": eps,
        "delta": eps / 2 ** (r + 3),
        "eps_qsvt": eps / (2 * (36 * c.C_hat_sgn + 2 * c.C_sgn + 37)),
    }
    return _override(cfg, sched)


def trace_distance_schedule(alpha: float, beta: float, r: int, cfg: TesterConfig) -> dict:
    eps = (alpha - beta) / 4
    sched = dict(sign_schedule(eps, r, cfg), eps_H=eps / 4, fail_prob=cfg.fail_prob)
    return _override(cfg, sched)


def _sign_encoding(E: BlockEncoding, sched: dict, cfg: TesterConfig) -> tuple[BlockEncoding, ChebyshevPoly]:
    P = cached_sign_poly(sched["delta"], sched["eps_qsvt"], cfg.cap)
    V = sign_qsvt(E, P, cfg.constants.C_sgn * sched["eps_qsvt"], cfg.cap)
    return V, P


def gap_qsd(inst: StateTestInstance, cfg: TesterConfig = TesterConfig()) -> TestOutcome:
    """Estimate the trace distance and compare it with ``(alpha + beta) / 2``."""
    alpha, beta = inst.thresholds()
    sched = trace_distance_schedule(alpha, beta, inst.r, cfg)
    c = cfg.constants
    V, P = _sign_encoding(difference_encoding(inst), sched, cfg)
    seeds = child_seeds(cfg.seed, 2)
    x0, p0, shots = _scaled_estimate(V, inst.q0, inst.outputs, cfg, sched["eps_H"], seeds[0])
    x1, p1, _ = _scaled_estimate(V, inst.q1, inst.outputs, cfg, sched["eps_H"], seeds[1])
    x = (x0 - x1) / 2
    bound = (
        (36 * c.C_hat_sgn + 2 * c.C_sgn + 37) * sched["eps_qsvt"]
        + (sched["eps_H"] if cfg.mode == "sample" else 0.0)
        + 2 ** (inst.r + 1) * sched["delta"]
    )
    threshold = (alpha + beta) / 2
    sched.update(_poly_info(P), shots=shots if cfg.mode == "sample" else None)
    diag = {"p0": p0, "p1": p1, "error_bound": bound, "qubits": V.n_qubits, "ancillas": V.ancilla_qubits}
    return TestOutcome(x, _decide(x, threshold), threshold, sched["eps"], sched, diag)


# ---------------------------------------------------------------------------
# Entropy difference


def entropy_schedule(g: float, r: int, cfg: TesterConfig) -> dict:
    c = cfg.constants
    eps = g / 4
    k = 2 ** (r + 6)
    beta = min(eps / (k * math.log(k / eps)), 0.25)
    sched = {"eps": eps, "beta": beta, "fail_prob": cfg.fail_prob}
    sched = _override(cfg, sched)
    lb = math.log(2 / sched["beta"])
    sched.setdefault("eps_qsvt", eps / (4 * lb * (c.C_hat_ln + c.C_ln)))
    sched.setdefault("eps_H", eps / (8 * lb))
    return _override(cfg, sched)


def _entropy_estimates(circuits, outputs, sched: dict, cfg: TesterConfig, seed: int):
    """``S`` estimates in nats for each circuit, with the per-circuit details."""
    P = cached_log_poly(sched["beta"], sched["eps_qsvt"], cfg.cap)
    scale = 2 * math.log(2 / sched["beta"])
    seeds = child_seeds(seed, len(circuits))
    values, details = [], []
    for Q, s in zip(circuits, seeds):
        W = apply_poly_qsvt(purify_to_encoding(Q, outputs), P, cfg.cap)
        x, p, shots = _scaled_estimate(W, Q, outputs, cfg, sched["eps_H"], s)
        values.append(scale * x)
        details.append({"p": p, "x": x, "shots": shots})
    return values, details, P


def _entropy_bound(sched: dict, r: int, cfg: TesterConfig) -> float:
    c = cfg.constants
    sampling = sched["eps_H"] if cfg.mode == "sample" else 0.0
    per_state = (c.C_hat_ln + c.C_ln) * sched["eps_qsvt"] + sampling + 2 ** (r + 1) * sched["beta"]
    return 2 * 2 * math.log(2 / sched["beta"]) * per_state


def gap_qed(inst: StateTestInstance, cfg: TesterConfig = TesterConfig()) -> TestOutcome:
    """Estimate ``S(rho0) - S(rho1)`` in nats and decide whether it is positive."""
    g = inst.gap()
    sched = entropy_schedule(g, inst.r, cfg)
    (s0, s1), details, P = _entropy_estimates([inst.q0, inst.q1], inst.outputs, sched, cfg, cfg.seed)
    x = s0 - s1
    sched.update(_poly_info(P), shots=details[0]["shots"] if cfg.mode == "sample" else None)
    diag = {
        "p0": details[0]["p"],
        "p1": details[1]["p"],
        "entropy0": s0,
        "entropy1": s1,
        "error_bound": _entropy_bound(sched, inst.r, cfg),
        "truncation_check": 2 * math.log(2 / sched["beta"]) * 2 ** (inst.r + 1) * sched["beta"],
    }
    return TestOutcome(x, _decide(x, 0.0), 0.0, sched["eps"], sched, diag)


# ---------------------------------------------------------------------------
# Jensen-Shannon divergence


def binary_entropy_inverse(h: float) -> float:
    """``p`` in ``(0, 1/2]`` with binary entropy ``h`` bits, by bisection to 1e-12."""
    if not 0 < h <= 1:
        raise ValidationError(f"binary entropy {h} has no preimage in (0, 1/2]")
    if h == 1:
        return 0.5
    return float(optimize.bisect(lambda p: binary_entropy(p) - h, 1e-300, 0.5, xtol=1e-12))


def controlled_gates(circ: Circuit, control: int, offset: int, negate: bool = False) -> list[Gate]:
    """Gates of ``circ`` shifted by ``offset`` and controlled on ``control``.

    With ``negate`` the gates fire when the control reads 0.
    """
    out = []
    for g in circ.gates:
        m = g.unitary()
        d = m.shape[0]
        cm = np.eye(2 * d, dtype=complex)
        if negate:
            cm[:d, :d] = m
        else:
            cm[d:, d:] = m
        out.append(Gate("U", (control, *(q + offset for q in g.qubits)), None, cm))
    return out


def _coin_mixture(circ: Circuit, coin: int, copy: int, q0: Circuit, q1: Circuit, offset: int) -> None:
    """Prepare ``(|0><0| x rho0 + |1><1| x rho1) / 2`` with the coin on ``coin``."""
    circ.add("H", coin)
    circ.add("CNOT", coin, copy)
    for g in controlled_gates(q1, coin, offset):
        circ._push(g)
    for g in controlled_gates(q0, coin, offset, negate=True):
        circ._push(g)


def qjs_to_qed_reduction(inst: StateTestInstance) -> StateTestInstance:
    """Map a divergence instance to an entropy-difference instance.

    The new first state is a ``p``-biased bit next to the even mixture, with
    ``H(p) = 1 - (alpha + beta)/2``; the new second state tags each input
    state with a fair bit. Their entropy difference in bits is the
    divergence minus ``(alpha + beta)/2``. Layout: qubit 0 the bit, 1 its
    copy, 2 and 3 the mixing coin and its copy, then the original register.
    """
    alpha, beta = inst.thresholds()
    p = binary_entropy_inverse(1 - (alpha + beta) / 2)
    n = inst.q0.n_qubits
    outs = (0, *(4 + q for q in inst.outputs))
    a = Circuit(n + 4)
    a.add("RY", 0, theta=2 * math.acos(math.sqrt(p)))
    a.add("CNOT", 0, 1)
    _coin_mixture(a, 2, 3, inst.q0, inst.q1, 4)
    b = Circuit(n + 4)
    _coin_mixture(b, 0, 1, inst.q0, inst.q1, 4)
    return StateTestInstance(a, b, outs, g=math.log(2) / 2 * (alpha - beta))


def reduction_bias(inst: StateTestInstance) -> float:
    alpha, beta = inst.thresholds()
    return binary_entropy_inverse(1 - (alpha + beta) / 2)


def mixture_circuit(inst: StateTestInstance) -> tuple[Circuit, tuple]:
    """Circuit whose output register holds ``(rho0 + rho1) / 2``."""
    n = inst.q0.n_qubits
    circ = Circuit(n + 2)
    _coin_mixture(circ, 0, 1, inst.q0, inst.q1, 2)
    return circ, tuple(2 + q for q in inst.outputs)


def gap_qjs(inst: StateTestInstance, cfg: TesterConfig = TesterConfig(), route: str = "reduction") -> TestOutcome:
    """Estimate the base-2 Jensen-Shannon divergence.

    ``route="reduction"`` runs the entropy-difference tester on the reduced
    instance; ``route="entropies"`` estimates the entropies of both states
    and of their mixture separately.
    """
    alpha, beta = inst.thresholds()
    threshold = (alpha + beta) / 2
    tol = (alpha - beta) / 4
    ln2 = math.log(2)
    if route == "reduction":
        red = qjs_to_qed_reduction(inst)
        out = gap_qed(red, cfg)
        est = out.estimate / ln2 + threshold
        diag = dict(out.diagnostics, bias=reduction_bias(inst), reduced_gap=red.g)
        return TestOutcome(est, _decide(est, threshold), threshold, tol, out.schedule, diag)
    if route != "entropies":
        raise ValidationError(f"route must be 'reduction' or 'entropies', got {route!r}")
    g = ln2 / 2 * (alpha - beta)
    mix, mix_outs = mixture_circuit(inst)
    sched = entropy_schedule(g, inst.r, cfg)
    seeds = child_seeds(cfg.seed, 2)
    (s0, s1), d01, P = _entropy_estimates([inst.q0, inst.q1], inst.outputs, sched, cfg, seeds[0])
    (sm,), dm, _ = _entropy_estimates([mix], mix_outs, sched, cfg, seeds[1])
    est = (sm - (s0 + s1) / 2) / ln2
    sched.update(_poly_info(P))
    diag = {"entropy0": s0, "entropy1": s1, "entropy_mix": sm, "p": [d01[0]["p"], d01[1]["p"], dm[0]["p"]]}
    return TestOutcome(est, _decide(est, threshold), threshold, tol, sched, diag)


# ---------------------------------------------------------------------------
# Hilbert-Schmidt distance


def _swap_probs(inst: StateTestInstance, cfg: TesterConfig, shots: int) -> dict:
    rho0, rho1 = inst.states()
    seeds = child_seeds(cfg.seed, 3)
    return {
        "00": swap_test(rho0, rho0, cfg.mode, shots, seeds[0]),
        "11": swap_test(rho1, rho1, cfg.mode, shots, seeds[1]),
        "01": swap_test(rho0, rho1, cfg.mode, shots, seeds[2]),
    }


def gap_qhs(inst: StateTestInstance, cfg: TesterConfig = TesterConfig()) -> TestOutcome:
    """Squared Hilbert-Schmidt distance from three SWAP tests."""
    alpha, beta = inst.thresholds()
    eps = (alpha - beta) / 100
    # each trace is 2p - 1; the combination weighs them by 1/2, 1/2 and 1
    eps_p = eps / 4
    shots = math.ceil(math.log(6 / cfg.fail_prob) / (2 * eps_p**2))
    p = _swap_probs(inst, cfg, shots)
    t = {k: 2 * v - 1 for k, v in p.items()}
    est = 0.5 * (t["00"] + t["11"]) - t["01"]
    threshold = (alpha + beta) / 2
    sched = {"eps": eps, "fail_prob": cfg.fail_prob, "shots": shots if cfg.mode == "sample" else None}
    return TestOutcome(est, _decide(est, threshold), threshold, eps, sched, {"swap_probs": p})


# ---------------------------------------------------------------------------
# Certification


def _one_grover_step(p_good: float) -> float:
    """Success probability after one amplification step from ``p_good``."""
    theta = math.asin(math.sqrt(min(max(p_good, 0.0), 1.0)))
    return math.sin(3 * theta) ** 2


def _cert_qsd_branch(V: BlockEncoding, Q: Circuit, outputs) -> tuple[float, float, str]:
    """Acceptance after ``G (H x U)`` where ``U`` is the tester; returns (p, accept, path)."""
    p = hadamard_test(V, Q, outputs)
    total = 2 + V.ancilla_qubits + Q.n_qubits
    if total <= CIRCUIT_SIM_QUBITS and V.can_materialize:
        T = tester_circuit(V, Q, outputs).unitary()
        U = np.kron(np.array([[1, 1], [1, -1]]) / math.sqrt(2), T)
        quarter = U.shape[0] // 4
        psi = exact_aa(U, np.arange(quarter), 1).amplitudes
        return p, float(np.sum(np.abs(psi[:quarter]) ** 2)), "circuit"
    return p, _one_grover_step(p / 2), "formula"


def cert_qsd(inst: StateTestInstance, cfg: TesterConfig = TesterConfig()) -> TestOutcome:
    """Accept with certainty when the states coincide.

    For each state the tester is run next to a fresh ``|+>`` qubit, so the
    joint good outcome ``00`` has probability ``p_i / 2``; one Grover step
    turns ``p_i = 1/2`` into certainty. The estimate is the probability that
    both branches accept; the decision is ``yes`` (the states are equal)
    only if it is numerically one.
    """
    alpha = inst.alpha
    if alpha is None or not alpha > 0:
        raise ValidationError("cert_qsd needs alpha > 0")
    sched = sign_schedule(alpha / 2, inst.r, cfg)
    V, P = _sign_encoding(difference_encoding(inst), sched, cfg)
    p0, a0, path = _cert_qsd_branch(V, inst.q0, inst.outputs)
    p1, a1, _ = _cert_qsd_branch(V, inst.q1, inst.outputs)
    accept = a0 * a1
    if cfg.mode == "sample":
        accept = sample_probability(accept, 10_000, cfg.seed)
    ceiling = 1 - alpha**2 / 16
    sched.update(_poly_info(P))
    diag = {"p0": p0, "p1": p1, "accept0": a0, "accept1": a1, "soundness_ceiling": ceiling, "path": path}
    decision = "yes" if accept >= 1 - 1e-9 else "no"
    return TestOutcome(accept, decision, 1.0, 1e-9, sched, diag)


def _copy_output(circ: Circuit, src: int, flip: bool) -> tuple[Circuit, int]:
    """Append a qubit holding a CNOT copy of ``src`` (negated when ``flip``)."""
    out = Circuit(circ.n_qubits + 1, list(circ.gates))
    new = circ.n_qubits
    out.add("CNOT", src, new)
    if flip:
        out.add("X", new)
    return out, new


def hs_encoding(inst: StateTestInstance) -> BlockEncoding:
    """Encoding of the one-qubit state ``diag(q, 1 - q)`` with ``q = 1/2 + HS^2 / 4``."""
    parts = []
    for a, b, flip in ((inst.q0, inst.q0, False), (inst.q1, inst.q1, False), (inst.q0, inst.q1, True)):
        circ, out = _copy_output(swap_test_circuit(a, b, inst.outputs), 0, flip)
        parts.append(purify_to_encoding(circ, [out]))
    return lcu_combine(parts, [0.25, 0.25, 0.5])


def cert_qhs(inst: StateTestInstance, cfg: TesterConfig = TesterConfig()) -> TestOutcome:
    """Accept with certainty when the Hilbert-Schmidt distance is zero.

    The all-zeros amplitude of the encoding of ``diag(q, 1 - q)`` is ``q``,
    exactly one half for equal states, and one Grover step amplifies that
    to one. The estimate is the final all-zeros probability.
    """
    alpha = inst.alpha
    if alpha is None or not alpha > 0:
        raise ValidationError("cert_qhs needs alpha > 0")
    swap_qubits = 2 + 2 * inst.q0.n_qubits
    # three purified SWAP-test circuits of swap_qubits qubits, one more register qubit, two selectors
    total = swap_qubits + 1 + 2
    if total <= CIRCUIT_SIM_QUBITS:
        U = hs_encoding(inst).unitary
        amp = U[0, 0]
        psi = exact_aa(U, [0], 1).amplitudes
        accept, path = float(abs(psi[0]) ** 2), "circuit"
        q = float(np.real(amp))
    else:
        p = _swap_probs(inst, TesterConfig(), 1)
        q = 0.25 * p["00"] + 0.25 * p["11"] + 0.5 * (1 - p["01"])
        accept, path = _one_grover_step(q * q), "formula"
    if cfg.mode == "sample":
        accept = sample_probability(accept, 10_000, cfg.seed)
    ceiling = 1 - alpha**2 / 2
    diag = {"amplitude": q, "hs2": 4 * (q - 0.5), "soundness_ceiling": ceiling, "path": path}
    decision = "yes" if accept >= 1 - 1e-9 else "no"
    return TestOutcome(accept, decision, 1.0, 1e-9, {"eps": alpha / 2}, diag)


def amplified_success(x: float) -> float:
    """``16 x^3 - 24 x^2 + 9 x``, the one-step success from initial probability ``x``."""
    return 16 * x**3 - 24 * x**2 + 9 * x


# ---------------------------------------------------------------------------
# Discrimination


@dataclass
class HHMeasurement:
    """Two-outcome measurement for telling ``rho0`` from ``rho1``."""

    pi0: np.ndarray
    pi1: np.ndarray
    success: float
    td_gap: float
    schedule: dict

    def to_dict(self) -> dict:
        from .encoding import matrix_to_json

        return {
            "pi0": matrix_to_json(self.pi0),
            "pi1": matrix_to_json(self.pi1),
            "success": self.success,
            "td_gap": self.td_gap,
            "schedule": self.schedule,
        }


def hh_measurement(
    q0: Circuit, q1: Circuit, outputs: Sequence[int], eps: float = 1e-3, cfg: TesterConfig = TesterConfig()
) -> HHMeasurement:
    """Measurement ``{(I + S)/2, (I - S)/2}`` with ``S`` the sign encoding of ``(rho0 - rho1)/2``.

    ``td_gap`` is ``Tr Pi0 rho0 - Tr Pi0 rho1``, within ``eps`` of the trace
    distance; ``success`` is the induced discrimination probability.
    """
    if not 0 < eps < 1:
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    inst = StateTestInstance(q0, q1, tuple(outputs))
    sched = sign_schedule(eps, inst.r, cfg)
    V, P = _sign_encoding(difference_encoding(inst), sched, cfg)
    S = V.block
    S = (S + S.conj().T) / 2
    eye = np.eye(S.shape[0])
    pi0 = (eye + S) / 2
    rho0, rho1 = inst.states()
    gap = float(np.real(np.trace(pi0 @ rho0) - np.trace(pi0 @ rho1)))
    sched.update(_poly_info(P))
    return HHMeasurement(pi0, eye - pi0, 0.5 + 0.5 * gap, gap, sched)


def hypothesis_protocol(
    q0: Circuit,
    q1: Circuit,
    outputs: Sequence[int],
    eps: float = 1e-3,
    trials: int = 10_000,
    seed: int = 0,
    cfg: TesterConfig = TesterConfig(),
) -> dict:
    """Verifier sends ``rho_b`` for a fair bit ``b``; the prover answers by measuring."""
    trials = check_positive_int("trials", trials)
    m = hh_measurement(q0, q1, outputs, eps, cfg)
    rho0, rho1 = StateTestInstance(q0, q1, tuple(outputs)).states()
    p_zero = np.array([np.real(np.trace(m.pi0 @ rho)) for rho in (rho0, rho1)])
    rng = np.random.Generator(np.random.Philox(int(seed)))
    b = rng.integers(0, 2, trials)
    guess = np.where(rng.random(trials) < p_zero[b], 0, 1)
    return {
        "empirical_success": float(np.mean(guess == b)),
        "analytic_success": m.success,
        "trials": trials,
        "schedule": m.schedule,
    }


@dataclass
class SVDiscriminator:
    """Encoding plus the rule that turns its measurement into a verdict.

    With ``projector == "image"`` landing in the encoding's output subspace
    means the singular value is at least ``beta``. With ``"complement"`` the
    roles swap: the encoding tests ``sqrt(1 - sigma^2)`` and landing in the
    subspace means the singular value is at most ``alpha``.
    """

    encoding: BlockEncoding
    poly: ChebyshevPoly
    projector: str
    alpha: float
    beta: float
    eps: float

    def above_probability(self, psi) -> float:
        """Probability of the verdict ``sigma >= beta`` for input vector ``psi``."""
        psi = np.asarray(psi, dtype=complex)
        if psi.shape != (self.encoding.projectors.in_indices.size,):
            raise ValidationError(f"input vector must have length {self.encoding.projectors.in_indices.size}")
        psi = psi / np.linalg.norm(psi)
        landed = float(np.linalg.norm(self.encoding.block @ psi) ** 2)
        return landed if self.projector == "image" else 1 - landed


def threshold_poly(alpha: float, beta: float, eps: float, cap: int | None = None) -> ChebyshevPoly:
    """Odd polynomial near ``eps/2`` on ``[0, alpha]`` and near one on ``[beta, 1]``.

    Combines three shifted sign approximations. Each is evaluated at half
    its argument so that the shifted points stay inside ``[-1, 1]``; the gap
    shrinks to ``(beta - alpha)/4`` to match.
    """
    t = (alpha + beta) / 2
    gap = (beta - alpha) / 4
    S = cached_sign_poly(gap, eps / (4 * CONSTANTS.C_sgn), cap)
    d = max(S.degree, 1)
    N = 2 * d + 2
    x = np.cos(np.pi * np.arange(N + 1) / N)
    vals = 0.5 * ((1 - eps / 2) * S((x + t) / 2) + (1 - eps / 2) * S((x - t) / 2) + eps * S(x / 2))
    c = sfft.dct(vals, type=1) / N
    c = c[: d + 1].copy()
    c[0::2] = 0.0
    return ChebyshevPoly(c, "odd", {"kind": "threshold", "alpha": alpha, "beta": beta, "eps": eps, "sign_degree": S.degree})


def sv_discriminator(
    E: BlockEncoding, alpha: float, beta: float, eps: float, cap: int | None = None
) -> SVDiscriminator:
    """Decide whether a right singular vector's value is at least ``beta`` or at most ``alpha``.

    ``E`` must have unit scale. When the gap is wider after passing to the
    complementary output subspace (singular values ``sqrt(1 - sigma^2)``),
    that subspace is used instead.
    """
    if not (0 <= alpha < beta <= 1):
        raise ValidationError(f"need 0 <= alpha < beta <= 1, got {alpha}, {beta}")
    if not 0 < eps < 1:
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    if abs(E.alpha - 1) > 1e-12:
        raise ValidationError("sv_discriminator needs a unit-scale encoding")
    use_image = beta - alpha >= math.sqrt(1 - alpha**2) - math.sqrt(1 - beta**2)
    target, lo, hi = E, alpha, beta
    if not use_image:
        keep = np.ones(E.dim, dtype=bool)
        keep[E.projectors.out_indices] = False
        spec = ProjectorSpec(np.flatnonzero(keep), E.projectors.in_indices)
        target = BlockEncoding(E.n_qubits, E.ancilla_qubits, spec, 1.0, E.eps, unitary=E.unitary)
        lo, hi = math.sqrt(1 - beta**2), math.sqrt(1 - alpha**2)
    P = threshold_poly(lo, hi, eps, cap)
    V = sign_qsvt(target, P, eps, cap)
    return SVDiscriminator(V, P, "image" if use_image else "complement", alpha, beta, eps)
