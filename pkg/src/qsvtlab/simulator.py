"""Small statevector and density-matrix simulator.

Qubit 0 is the most significant bit of a basis index. Besides running
gate lists it provides the Hadamard and SWAP tests, one-step amplitude
amplification and eigendecomposition-based distance measures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._validation import (
    MAX_DENSE_QUBITS,
    ResourceError,
    ValidationError,
    as_square_matrix,
    check_positive_int,
    n_qubits_for_dim,
)

_S2 = 1 / math.sqrt(2)
FIXED_GATES = {
    "H": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "T": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=complex),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}
GATE_ARITY = {"H": 1, "X": 1, "Y": 1, "Z": 1, "S": 1, "T": 1, "RY": 1, "RZ": 1, "CNOT": 2, "CZ": 2, "SWAP": 2}


def ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple
    theta: float | None = None
    matrix: np.ndarray | None = None

    def unitary(self) -> np.ndarray:
        if self.name in FIXED_GATES:
            return FIXED_GATES[self.name]
        if self.name == "RY":
            return ry(self.theta)
        if self.name == "RZ":
            return rz(self.theta)
        return self.matrix

    def to_dict(self) -> dict:
        out = {"g": self.name, "q": list(self.qubits)}
        if self.theta is not None:
            out["theta"] = self.theta
        if self.matrix is not None:
            out["matrix"] = [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix]
        return out


@dataclass
class Circuit:
    """Ordered gate list on ``n_qubits`` qubits."""

    n_qubits: int
    gates: list = field(default_factory=list)

    def __post_init__(self):
        self.n_qubits = check_positive_int("n_qubits", self.n_qubits)
        gates, self.gates = list(self.gates), []
        for g in gates:
            self._push(g)

    def _push(self, g: Gate) -> None:
        qs = tuple(int(q) for q in g.qubits)
        if len(set(qs)) != len(qs) or any(q < 0 or q >= self.n_qubits for q in qs):
            raise ValidationError(f"gate {g.name} has invalid qubits {qs} for {self.n_qubits} qubits")
        if g.name in GATE_ARITY:
            if len(qs) != GATE_ARITY[g.name]:
                raise ValidationError(f"gate {g.name} acts on {GATE_ARITY[g.name]} qubit(s), got {len(qs)}")
            if g.name in ("RY", "RZ") and (g.theta is None or not math.isfinite(g.theta)):
                raise ValidationError(f"gate {g.name} needs a finite theta")
            self.gates.append(Gate(g.name, qs, None if g.theta is None else float(g.theta)))
        elif g.name == "U":
            m = as_square_matrix("U matrix", g.matrix)
            if m.shape[0] != 2 ** len(qs):
                raise ValidationError(f"U matrix of size {m.shape[0]} does not match {len(qs)} qubits")
            if np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) > 1e-10:
                raise ValidationError("U matrix is not unitary")
            self.gates.append(Gate("U", qs, None, m))
        else:
            raise ValidationError(f"unknown gate {g.name!r}")

    def add(self, name: str, *qubits: int, theta: float | None = None, matrix=None) -> "Circuit":
        self._push(Gate(name, tuple(qubits), theta, matrix))
        return self

    def inverse(self) -> "Circuit":
        inv = Circuit(self.n_qubits)
        for g in reversed(self.gates):
            if g.name in ("RY", "RZ"):
                inv.add(g.name, *g.qubits, theta=-g.theta)
            elif g.name in ("H", "X", "Y", "Z", "CNOT", "CZ", "SWAP"):
                inv.add(g.name, *g.qubits)
            else:
                inv.add("U", *g.qubits, matrix=g.unitary().conj().T)
        return inv

    def unitary(self) -> np.ndarray:
        if self.n_qubits > MAX_DENSE_QUBITS:
            raise ResourceError(f"dense unitary on {self.n_qubits} qubits exceeds the cap {MAX_DENSE_QUBITS}")
        dim = 2**self.n_qubits
        return apply_gates(np.eye(dim, dtype=complex), self.gates, self.n_qubits)

    def to_dict(self) -> dict:
        return {"n": self.n_qubits, "gates": [g.to_dict() for g in self.gates]}

    @classmethod
    def from_dict(cls, data: dict) -> "Circuit":
        try:
            circ = cls(int(data["n"]))
            for g in data.get("gates", []):
                matrix = None
                if "matrix" in g:
                    matrix = np.array([[complex(re, im) for re, im in row] for row in g["matrix"]])
                circ.add(g["g"], *g["q"], theta=g.get("theta"), matrix=matrix)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed circuit description: {exc}") from exc
        return circ


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).ravel()
        n_qubits_for_dim("state", a.size)
        if abs(np.linalg.norm(a) - 1) > 1e-10:
            raise ValidationError(f"state norm is {np.linalg.norm(a)}, expected 1")
        object.__setattr__(self, "amplitudes", a)

    @property
    def n_qubits(self) -> int:
        return n_qubits_for_dim("state", self.amplitudes.size)

    def density(self) -> "DensityMatrix":
        a = self.amplitudes
        return DensityMatrix(np.outer(a, a.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        rho = as_square_matrix("density matrix", self.entries)
        n_qubits_for_dim("density matrix", rho.shape[0])
        if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
            raise ValidationError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1) > 1e-9:
            raise ValidationError(f"density matrix has trace {np.trace(rho).real}")
        if np.linalg.eigvalsh(rho).min() < -1e-9:
            raise ValidationError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "entries", rho)

    @property
    def n_qubits(self) -> int:
        return n_qubits_for_dim("density matrix", self.entries.shape[0])


def _as_rho(state) -> np.ndarray:
    if isinstance(state, DensityMatrix):
        return state.entries
    if isinstance(state, PureState):
        return state.density().entries
    return DensityMatrix(state).entries


# ---------------------------------------------------------------------------
# Gate application


def apply_matrix(state: np.ndarray, matrix: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Apply ``matrix`` on ``qubits`` to the leading ``2**n`` axis of ``state``."""
    k = len(qubits)
    batch = state.shape[1:] if state.ndim > 1 else ()
    t = state.reshape((2,) * n + (-1,))
    t = np.moveaxis(t, list(qubits), list(range(k)))
    shape = t.shape
    t = (matrix @ t.reshape(2**k, -1)).reshape(shape)
    t = np.moveaxis(t, list(range(k)), list(qubits))
    return t.reshape((2**n,) + batch)


def apply_gates(state: np.ndarray, gates: Iterable[Gate], n: int) -> np.ndarray:
    for g in gates:
        state = apply_matrix(state, g.unitary(), g.qubits, n)
    return state


def run_circuit(circuit: Circuit, initial: PureState | None = None) -> PureState:
    """Output state of ``circuit`` on ``initial`` (default all zeros)."""
    dim = 2**circuit.n_qubits
    if initial is None:
        psi = np.zeros(dim, dtype=complex)
        psi[0] = 1.0
    else:
        psi = initial.amplitudes
        if psi.size != dim:
            raise ValidationError(f"initial state has dimension {psi.size}, circuit needs {dim}")
    out = apply_gates(psi.copy(), circuit.gates, circuit.n_qubits)
    return PureState(out / np.linalg.norm(out))


def partial_trace(state, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on the qubits in ``keep`` (kept in ascending order)."""
    keep = sorted(set(int(q) for q in keep))
    if not keep:
        raise ValidationError("keep must be nonempty")
    if isinstance(state, PureState):
        n = state.n_qubits
        _check_qubits(keep, n)
        rest = [q for q in range(n) if q not in keep]
        t = state.amplitudes.reshape((2,) * n).transpose(keep + rest).reshape(2 ** len(keep), -1)
        rho = t @ t.conj().T
    else:
        rho_full = _as_rho(state)
        n = n_qubits_for_dim("state", rho_full.shape[0])
        _check_qubits(keep, n)
        rest = [q for q in range(n) if q not in keep]
        t = rho_full.reshape((2,) * (2 * n))
        perm = keep + rest + [n + q for q in keep] + [n + q for q in rest]
        dk, dr = 2 ** len(keep), 2 ** len(rest)
        rho = np.einsum("ajbj->ab", t.transpose(perm).reshape(dk, dr, dk, dr))
    rho = (rho + rho.conj().T) / 2
    return DensityMatrix(rho)


def _check_qubits(qubits, n):
    if any(q < 0 or q >= n for q in qubits):
        raise ValidationError(f"qubit indices {qubits} out of range for {n} qubits")


def prepared_state(circuit: Circuit, output_qubits: Iterable[int]) -> DensityMatrix:
    """Reduced state on ``output_qubits`` after running ``circuit`` on all zeros."""
    return partial_trace(run_circuit(circuit), output_qubits)


# ---------------------------------------------------------------------------
# Interference tests


# largest circuit simulated gate by gate inside the Hadamard test
CIRCUIT_SIM_QUBITS = 12


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


def sample_probability(p: float, shots: int, seed: int) -> float:
    """Empirical frequency of an outcome with probability ``p`` over ``shots`` trials."""
    shots = check_positive_int("shots", shots)
    p = min(max(float(p), 0.0), 1.0)
    return float(_rng(seed).binomial(shots, p) / shots)


def hadamard_test(E, rho_prep: Circuit, output_qubits, mode: str = "exact_prob", shots: int = 10_000, seed: int = 0) -> float:
    """Probability of outcome 0 in the Hadamard test of block-encoding ``E`` on the prepared state.

    When the full circuit fits in the dense budget it is simulated gate by
    gate; otherwise the probability is read off the encoded block.
    """
    outputs = sorted(set(int(q) for q in output_qubits))
    if len(outputs) != E.system_qubits:
        raise ValidationError(
            f"encoding acts on {E.system_qubits} system qubits but {len(outputs)} output qubits were given"
        )
    if not E.is_square_block:
        raise ValidationError("Hadamard test needs matching input and output projectors")
    n = rho_prep.n_qubits
    total = 1 + E.ancilla_qubits + n
    if total <= CIRCUIT_SIM_QUBITS and E.can_materialize:
        p0 = _hadamard_circuit_prob(E, rho_prep, outputs)
    else:
        rho = prepared_state(rho_prep, outputs).entries
        p0 = 0.5 * (1 + np.real(np.trace(E.block @ rho)))
    return _finish(p0, mode, shots, seed)


def tester_circuit(E, rho_prep: Circuit, output_qubits) -> Circuit:
    """Hadamard test of ``E`` on the prepared state as a circuit.

    Qubit 0 is the control, the next ``a`` qubits are ``E``'s ancillas and the
    rest run ``rho_prep``; the test accepts when qubit 0 reads 0.
    """
    outputs = sorted(set(int(q) for q in output_qubits))
    a, n = E.ancilla_qubits, rho_prep.n_qubits
    circ = Circuit(1 + a + n)
    for g in rho_prep.gates:
        circ._push(Gate(g.name, tuple(q + 1 + a for q in g.qubits), g.theta, g.matrix))
    U = E.unitary
    cu = np.eye(2 * U.shape[0], dtype=complex)
    cu[U.shape[0]:, U.shape[0]:] = U
    circ.add("H", 0)
    circ.add("U", 0, *range(1, 1 + a), *[1 + a + q for q in outputs], matrix=cu)
    circ.add("H", 0)
    return circ


def _hadamard_circuit_prob(E, rho_prep: Circuit, outputs) -> float:
    psi = run_circuit(tester_circuit(E, rho_prep, outputs)).amplitudes
    return float(np.sum(np.abs(psi[: psi.size // 2]) ** 2))


def _finish(p0: float, mode: str, shots: int, seed: int) -> float:
    if mode == "exact_prob":
        return float(p0)
    if mode == "sample":
        return sample_probability(p0, shots, seed)
    raise ValidationError(f"mode must be 'exact_prob' or 'sample', got {mode!r}")


def cswap_matrix() -> np.ndarray:
    m = np.eye(8, dtype=complex)
    m[[5, 6]] = m[[6, 5]]
    return m


def swap_test(rho0, rho1, mode: str = "exact_prob", shots: int = 10_000, seed: int = 0) -> float:
    """Probability of outcome 0 in the SWAP test, simulated on density matrices."""
    r0, r1 = _as_rho(rho0), _as_rho(rho1)
    if r0.shape != r1.shape:
        raise ValidationError(f"states have different dimensions {r0.shape} and {r1.shape}")
    k = n_qubits_for_dim("state", r0.shape[0])
    n = 1 + 2 * k
    if n > MAX_DENSE_QUBITS // 2 + 1:
        raise ResourceError("SWAP test density simulation is limited to 6 qubits per register")
    zero = np.zeros((2, 2), dtype=complex)
    zero[0, 0] = 1
    rho = np.kron(zero, np.kron(r0, r1))
    gates = [Gate("H", (0,))]
    gates += [Gate("U", (0, 1 + i, 1 + k + i), None, cswap_matrix()) for i in range(k)]
    gates += [Gate("H", (0,))]
    # conjugate rho by the circuit: apply to columns, then to rows
    rho = apply_gates(rho, gates, n)
    rho = apply_gates(rho.conj().T, gates, n).conj().T
    p0 = float(np.real(np.trace(rho[: 2 ** (n - 1), : 2 ** (n - 1)])))
    return _finish(p0, mode, shots, seed)


def swap_test_circuit(q0: Circuit, q1: Circuit, outputs: Sequence[int]) -> Circuit:
    """SWAP test on the outputs of two preparation circuits, control on qubit 0."""
    n0, n1 = q0.n_qubits, q1.n_qubits
    outs = sorted(outputs)
    circ = Circuit(1 + n0 + n1)
    for g in q0.gates:
        circ._push(Gate(g.name, tuple(q + 1 for q in g.qubits), g.theta, g.matrix))
    for g in q1.gates:
        circ._push(Gate(g.name, tuple(q + 1 + n0 for q in g.qubits), g.theta, g.matrix))
    circ.add("H", 0)
    for q in outs:
        circ.add("U", 0, 1 + q, 1 + n0 + q, matrix=cswap_matrix())
    circ.add("H", 0)
    return circ


def exact_aa(U: np.ndarray, good_projector, j: int) -> PureState:
    """``G^j U|0>`` with ``G = -U (I - 2|0><0|) U^dag (I - 2 Pi)``.

    ``good_projector`` is either a projector matrix or a list of basis indices.
    """
    U = as_square_matrix("U", U)
    j = check_positive_int("j", j, minimum=0)
    dim = U.shape[0]
    refl_good = _reflection_diag(good_projector, dim)
    psi = U[:, 0].copy()
    for _ in range(j):
        if refl_good.ndim == 1:
            v = refl_good * psi
        else:
            v = refl_good @ psi
        v = U.conj().T @ v
        v[0] = -v[0]
        psi = -(U @ v)
    return PureState(psi / np.linalg.norm(psi))


def _reflection_diag(proj, dim: int) -> np.ndarray:
    """``I - 2 Pi`` as a diagonal vector for index lists or a matrix otherwise."""
    arr = np.asarray(proj)
    if arr.ndim == 2:
        return np.eye(dim) - 2 * arr
    d = np.ones(dim)
    d[arr.astype(int)] = -1
    return d


# ---------------------------------------------------------------------------
# Distance measures


def _clipped_eigvalsh(m: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvalsh(m)
    if w.min() < -1e-9:
        raise ValidationError(f"matrix has eigenvalue {w.min()} below -1e-9")
    return np.clip(w, 0.0, None)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def von_neumann_entropy(rho) -> float:
    """``-Tr rho ln rho`` in nats."""
    w = _clipped_eigvalsh(_as_rho(rho))
    w = w[w > 0]
    return float(-np.sum(w * np.log(w)))


def binary_entropy(p: float) -> float:
    """``H(p)`` in bits."""
    if p <= 0 or p >= 1:
        return 0.0
    return float(-p * math.log2(p) - (1 - p) * math.log2(1 - p))


DISTANCE_MEASURES = ("td", "fidelity", "hs2", "entropy_diff", "qjs2")


def distance_oracle(rho0, rho1, measure: str) -> float:
    """Exact distance-like quantity between two density matrices."""
    r0, r1 = _as_rho(rho0), _as_rho(rho1)
    if r0.shape != r1.shape:
        raise ValidationError("states have different dimensions")
    if measure == "td":
        return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(r0 - r1))))
    if measure == "fidelity":
        s = np.linalg.svd(_psd_sqrt(r0) @ _psd_sqrt(r1), compute_uv=False)
        return float(np.sum(s))
    if measure == "hs2":
        diff = r0 - r1
        return float(0.5 * np.real(np.trace(diff @ diff)))
    if measure == "entropy_diff":
        return von_neumann_entropy(r0) - von_neumann_entropy(r1)
    if measure == "qjs2":
        mid = (r0 + r1) / 2
        qjs = von_neumann_entropy(mid) - 0.5 * (von_neumann_entropy(r0) + von_neumann_entropy(r1))
        return float(qjs / math.log(2))
    raise ValidationError(f"measure must be one of {DISTANCE_MEASURES}, got {measure!r}")


# ---------------------------------------------------------------------------
# Random instances


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_circuit(n: int, depth: int, rng: np.random.Generator) -> Circuit:
    """Layers of random single-qubit rotations followed by a CNOT ladder."""
    circ = Circuit(n)
    for _ in range(depth):
        for q in range(n):
            circ.add("RY", q, theta=float(rng.uniform(0, 2 * np.pi)))
            circ.add("RZ", q, theta=float(rng.uniform(0, 2 * np.pi)))
        for q in range(n - 1):
            circ.add("CNOT", q, q + 1)
    return circ
