"""Block-encodings as dense unitaries and the QSVT constructions built on them.

Ancilla qubits always sit in front of (more significant than) the qubits
they extend, so adding an ancilla prepared in ``|0>`` leaves the basis
indices of a projector unchanged. An encoding stores its projectors as
index lists into the full ``2**n`` basis; the encoded operator is
``alpha * U[out, in]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numba import njit

from ._validation import (
    MAX_DENSE_QUBITS,
    ResourceError,
    UnsupportedShapeError,
    ValidationError,
    as_real_vector,
    as_square_matrix,
    check_positive_int,
    check_unitary,
    max_degree,
    n_qubits_for_dim,
)
from .poly_approx import ChebyshevPoly
from .simulator import Circuit, run_circuit

ALPHA_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ProjectorSpec:
    """Output and input basis subsets, each in its declared order."""

    out_indices: np.ndarray
    in_indices: np.ndarray
    kind: str = "bitstring"

    def __post_init__(self):
        for name in ("out_indices", "in_indices"):
            idx = np.asarray(getattr(self, name), dtype=np.int64).ravel()
            if idx.size == 0:
                raise ValidationError(f"{name} must be nonempty")
            if np.unique(idx).size != idx.size or idx.min() < 0:
                raise ValidationError(f"{name} must hold distinct nonnegative indices")
            idx.setflags(write=False)
            object.__setattr__(self, name, idx)
        if self.kind not in ("block", "bitstring"):
            raise ValidationError(f"kind must be 'block' or 'bitstring', got {self.kind!r}")

    @classmethod
    def block(cls, system_qubits: int) -> "ProjectorSpec":
        idx = np.arange(2**system_qubits)
        return cls(idx, idx, "block")

    def mask(self, which: str, dim: int) -> np.ndarray:
        """Membership predicate of one subset as a boolean vector of length ``dim``."""
        idx = self.out_indices if which == "out" else self.in_indices
        if idx.max() >= dim:
            raise ValidationError(f"projector index {idx.max()} out of range for dimension {dim}")
        m = np.zeros(dim, dtype=bool)
        m[idx] = True
        return m

    @property
    def square(self) -> bool:
        return np.array_equal(self.out_indices, self.in_indices)

    def same_as(self, other: "ProjectorSpec") -> bool:
        return np.array_equal(self.out_indices, other.out_indices) and np.array_equal(
            self.in_indices, other.in_indices
        )

    def to_dict(self) -> dict:
        return {"kind": self.kind, "out": self.out_indices.tolist(), "in": self.in_indices.tolist()}


class BlockEncoding:
    """Unitary ``U`` on ``n`` qubits with ``alpha * U[out, in]`` approximating a target.

    The unitary may be supplied directly or through a builder that is only
    run when ``unitary`` is first accessed; the block can likewise be
    supplied when it was computed without materializing ``U``.
    """

    def __init__(
        self,
        n_qubits: int,
        ancilla_qubits: int,
        projectors: ProjectorSpec,
        alpha: float = 1.0,
        eps: float = 0.0,
        unitary: np.ndarray | None = None,
        builder: Callable[[], np.ndarray] | None = None,
        block: np.ndarray | None = None,
    ):
        self.n_qubits = check_positive_int("n_qubits", n_qubits)
        self.ancilla_qubits = check_positive_int("ancilla_qubits", ancilla_qubits, minimum=0)
        if self.ancilla_qubits > self.n_qubits:
            raise ValidationError("ancilla count exceeds total qubit count")
        if not (math.isfinite(alpha) and alpha >= 1 - ALPHA_TOL):
            raise ValidationError(f"alpha must be >= 1, got {alpha}")
        if not (math.isfinite(eps) and eps >= 0):
            raise ValidationError(f"eps must be >= 0, got {eps}")
        self.alpha = float(alpha)
        self.eps = float(eps)
        self.projectors = projectors
        projectors.mask("out", 2**self.n_qubits)
        projectors.mask("in", 2**self.n_qubits)
        if unitary is None and builder is None and block is None:
            raise ValidationError("need a unitary, a builder or a block")
        self._unitary = None
        if unitary is not None:
            u = as_square_matrix("unitary", unitary)
            if u.shape[0] != 2**self.n_qubits:
                raise ValidationError(f"unitary has dimension {u.shape[0]}, expected {2**self.n_qubits}")
            check_unitary("unitary", u, 1e-9)
            u.setflags(write=False)
            self._unitary = u
        self._builder = builder
        self._block = None
        if block is not None:
            b = np.array(block, dtype=complex)
            expect = (projectors.out_indices.size, projectors.in_indices.size)
            if b.shape != expect:
                raise ValidationError(f"block has shape {b.shape}, expected {expect}")
            b.setflags(write=False)
            self._block = b

    @property
    def system_qubits(self) -> int:
        return self.n_qubits - self.ancilla_qubits

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def is_square_block(self) -> bool:
        return self.projectors.square

    @property
    def can_materialize(self) -> bool:
        return self._unitary is not None or self.n_qubits <= MAX_DENSE_QUBITS

    @property
    def unitary(self) -> np.ndarray:
        if self._unitary is None:
            if self._builder is None:
                raise ResourceError("this encoding was built without a unitary")
            if self.n_qubits > MAX_DENSE_QUBITS:
                raise ResourceError(
                    f"materializing {self.n_qubits} qubits exceeds the dense cap of {MAX_DENSE_QUBITS}"
                )
            u = np.asarray(self._builder(), dtype=complex)
            check_unitary("built unitary", u, 1e-9)
            u.setflags(write=False)
            self._unitary = u
        return self._unitary

    @property
    def block(self) -> np.ndarray:
        """``U[out, in]``, the scaled-down encoded operator."""
        if self._block is None:
            b = self.unitary[np.ix_(self.projectors.out_indices, self.projectors.in_indices)].copy()
            b.setflags(write=False)
            self._block = b
        return self._block

    def operator(self) -> np.ndarray:
        return self.alpha * self.block

    def negated(self) -> "BlockEncoding":
        """Same encoding with the unitary multiplied by -1."""
        u, builder = None, None
        if self._unitary is not None:
            u = -self._unitary
        elif self._builder is not None:
            src = self._builder
            builder = lambda: -np.asarray(src())  # noqa: E731
        blk = None if self._block is None else -self._block
        return BlockEncoding(self.n_qubits, self.ancilla_qubits, self.projectors, self.alpha, self.eps, u, builder, blk)

    def with_eps(self, eps: float) -> "BlockEncoding":
        return BlockEncoding(
            self.n_qubits, self.ancilla_qubits, self.projectors, self.alpha, eps,
            self._unitary, self._builder, self._block,
        )

    def __repr__(self) -> str:
        return (
            f"BlockEncoding(n={self.n_qubits}, a={self.ancilla_qubits}, alpha={self.alpha:.6g}, "
            f"eps={self.eps:.3g}, block={self.projectors.out_indices.size}x{self.projectors.in_indices.size})"
        )

    def to_dict(self) -> dict:
        u = self.unitary
        return {
            "dim": int(u.shape[0]),
            "s": self.system_qubits,
            "a": self.ancilla_qubits,
            "alpha": self.alpha,
            "eps": self.eps,
            "projectors": self.projectors.to_dict(),
            "matrix": matrix_to_json(u),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BlockEncoding":
        try:
            u = matrix_from_json(data["matrix"])
            a = int(data["a"])
            n = n_qubits_for_dim("unitary", u.shape[0])
            if "s" in data and int(data["s"]) + a != n:
                raise ValidationError(f"s + a = {int(data['s']) + a} but the matrix acts on {n} qubits")
            proj = data.get("projectors")
            if proj is None or proj.get("kind") == "block":
                spec = ProjectorSpec.block(n - a)
            else:
                spec = ProjectorSpec(proj["out"], proj["in"])
            return cls(n, a, spec, float(data.get("alpha", 1.0)), float(data.get("eps", 0.0)), unitary=u)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed encoding description: {exc}") from exc


def matrix_to_json(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def matrix_from_json(rows) -> np.ndarray:
    try:
        arr = np.array([[complex(p[0], p[1]) for p in row] for row in rows])
    except (TypeError, IndexError) as exc:
        raise ValidationError(f"matrix entries must be [re, im] pairs: {exc}") from exc
    return as_square_matrix("matrix", arr)


# ---------------------------------------------------------------------------
# Constructors


def from_unitary(U, ancilla_qubits: int, alpha: float = 1.0, eps: float = 0.0, projectors: ProjectorSpec | None = None) -> BlockEncoding:
    u = as_square_matrix("U", U)
    n = n_qubits_for_dim("U", u.shape[0])
    if projectors is None:
        projectors = ProjectorSpec.block(n - ancilla_qubits)
    return BlockEncoding(n, ancilla_qubits, projectors, alpha, eps, unitary=u)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def from_matrix(A, alpha: float | None = None) -> BlockEncoding:
    """One-ancilla unitary dilation of ``A / alpha``.

    ``alpha`` defaults to ``max(1, ||A||)`` so the scaled matrix is a contraction.
    """
    A = as_square_matrix("A", A)
    s = n_qubits_for_dim("A", A.shape[0])
    norm = float(np.linalg.norm(A, 2))
    if alpha is None:
        alpha = max(1.0, norm)
    if norm > alpha * (1 + 1e-12):
        raise ValidationError(f"||A|| = {norm} exceeds alpha = {alpha}")
    B = A / alpha
    eye = np.eye(A.shape[0])
    U = np.block([[B, _psd_sqrt(eye - B @ B.conj().T)], [_psd_sqrt(eye - B.conj().T @ B), -B.conj().T]])
    # the dilation places the ancilla in front, so the block is the top-left corner
    return BlockEncoding(s + 1, 1, ProjectorSpec.block(s), alpha, 0.0, unitary=U)


def purify_to_encoding(Q: Circuit, output_qubits: Sequence[int]) -> BlockEncoding:
    """Exact encoding of the reduced state of ``Q|0..0>`` on ``output_qubits``.

    The unitary is ``(Q^dag x I) SWAP (Q x I)`` where SWAP exchanges the
    output qubits with a fresh register of the same size placed last; the
    block sits where Q's register is all zeros.
    """
    outs = sorted(set(int(q) for q in output_qubits))
    n = Q.n_qubits
    if not outs or any(q < 0 or q >= n for q in outs):
        raise ValidationError(f"output qubits {list(output_qubits)} invalid for a {n}-qubit circuit")
    r = len(outs)
    total = n + r

    def build() -> np.ndarray:
        q = Q.unitary()
        qi = np.kron(q, np.eye(2**r))
        # permutation: swap each output qubit with its partner in the last register
        idx = np.arange(2**total)
        bits = (idx[:, None] >> (total - 1 - np.arange(total))) & 1
        swapped = bits.copy()
        for j, qb in enumerate(outs):
            swapped[:, qb], swapped[:, n + j] = bits[:, n + j], bits[:, qb]
        perm = swapped @ (1 << (total - 1 - np.arange(total)))
        swap = np.zeros((2**total, 2**total))
        swap[perm, idx] = 1.0
        return qi.conj().T @ swap @ qi

    if total > MAX_DENSE_QUBITS:
        raise ResourceError(f"purified encoding needs {total} qubits, above the cap {MAX_DENSE_QUBITS}")
    return BlockEncoding(total, n, ProjectorSpec.block(r), 1.0, 0.0, unitary=build())


# ---------------------------------------------------------------------------
# State preparation


def prepare_amplitudes(y, eps: float = 0.0) -> Circuit:
    """Circuit mapping ``|0..0>`` to ``sum_i sqrt(yhat_i)|i>`` with ``yhat`` close to ``y/||y||_1``.

    Level ``j`` is one multiplexed RY gate on qubit ``j`` whose angle for each
    prefix ``p`` splits the weight ``W_p`` between its two children. With
    ``eps > 0`` angles are rounded to a grid of spacing ``eps / q`` (``q``
    qubits), which keeps the l1 error of ``yhat`` below ``eps / 2``.
    """
    y = as_real_vector("y", y)
    if np.any(y < 0):
        raise ValidationError("y must be nonnegative")
    total = float(np.sum(y))
    if not total > 0:
        raise ValidationError("y must have a positive sum")
    if eps < 0:
        raise ValidationError(f"eps must be >= 0, got {eps}")
    q = max(1, math.ceil(math.log2(y.size))) if y.size > 1 else 1
    w = np.zeros(2**q)
    w[: y.size] = y / total
    circ = Circuit(q)
    step = eps / q if eps > 0 else 0.0
    for j in range(q):
        # weights of prefixes of length j and of their left children
        parent = w.reshape(2**j, -1).sum(axis=1)
        left = w.reshape(2 ** (j + 1), -1).sum(axis=1)[0::2]
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(parent > 0, left / np.where(parent > 0, parent, 1), 1.0)
        theta = 2 * np.arccos(np.sqrt(np.clip(ratio, 0, 1)))
        if step:
            theta = step * np.round(theta / step)
        mux = np.zeros((2 ** (j + 1), 2 ** (j + 1)), dtype=complex)
        for p, t in enumerate(theta):
            c, s = math.cos(t / 2), math.sin(t / 2)
            mux[2 * p: 2 * p + 2, 2 * p: 2 * p + 2] = [[c, -s], [s, c]]
        circ.add("U", *range(j + 1), matrix=mux)
    return circ


def prepared_weights(circuit: Circuit) -> np.ndarray:
    """Squared amplitudes of the state prepared from all zeros."""
    return np.abs(run_circuit(circuit).amplitudes) ** 2


# ---------------------------------------------------------------------------
# Linear combinations


def _select_unitary(V: np.ndarray, unitaries: list) -> np.ndarray:
    """``(V^dag x I) SELECT (V x I)`` with selector qubits in front."""
    slots = V.shape[0]
    D = unitaries[0].shape[0]
    S = np.empty((slots, D, D), dtype=complex)
    for i in range(slots):
        S[i] = unitaries[i] if i < len(unitaries) else np.eye(D)
    W = np.einsum("li,lj,lab->iajb", V.conj(), V, S, optimize=True)
    return W.reshape(slots * D, slots * D)


def lcu_combine(encodings: Sequence[BlockEncoding], y, prep_eps: float = 0.0) -> BlockEncoding:
    """Encoding of ``sum_i y_i A_i`` via prepare, select, unprepare.

    Term ``i`` is weighted by ``|y_i| alpha_i`` so encodings with different
    scales combine correctly; the resulting scale is ``sum_i |y_i| alpha_i``,
    raised to one when it is smaller. Negative coefficients negate the corresponding unitary.
    """
    encodings = list(encodings)
    y = as_real_vector("y", y)
    if not encodings or len(encodings) != y.size:
        raise ValidationError(f"got {len(encodings)} encodings for {y.size} coefficients")
    first = encodings[0]
    for e in encodings[1:]:
        if e.n_qubits != first.n_qubits or e.ancilla_qubits != first.ancilla_qubits:
            raise ValidationError("all encodings must share system and ancilla counts")
        if not e.projectors.same_as(first.projectors):
            raise ValidationError("all encodings must share projectors")
    weights = np.abs(y) * np.array([e.alpha for e in encodings])
    scale = float(np.sum(weights))
    if not scale > 0:
        raise ValidationError("y must have a nonzero entry")
    signs = np.where(y < 0, -1.0, 1.0)
    # a scale below one is topped up with +I and -I terms that cancel in the block
    pad = 1.0 - scale if scale < 1 - ALPHA_TOL else 0.0
    if len(encodings) == 1 and pad == 0:
        e = first if signs[0] > 0 else first.negated()
        return BlockEncoding(
            e.n_qubits, e.ancilla_qubits, e.projectors, scale, abs(y[0]) * e.eps,
            e._unitary, e._builder, e._block,
        )
    blocks = [signs[i] * e.block for i, e in enumerate(encodings)]
    if pad > 0:
        spec = first.projectors
        eye_block = np.eye(first.dim)[np.ix_(spec.out_indices, spec.in_indices)]
        weights = np.concatenate([weights, [pad / 2, pad / 2]])
        blocks += [eye_block, -eye_block]
        scale = 1.0
    n_terms = weights.size
    prep = prepare_amplitudes(weights, prep_eps)
    yhat = prepared_weights(prep)
    prep_err = float(np.sum(np.abs(yhat[:n_terms] - weights / scale)) + np.sum(yhat[n_terms:]))
    q = prep.n_qubits
    block = sum(yhat[i] * b for i, b in enumerate(blocks))

    def build() -> np.ndarray:
        V = prep.unitary()
        unitaries = [signs[i] * e.unitary for i, e in enumerate(encodings)]
        if pad > 0:
            eye = np.eye(first.dim, dtype=complex)
            unitaries += [eye, -eye]
        return _select_unitary(V, unitaries)

    eps = float(np.sum(np.abs(y) * np.array([e.eps for e in encodings])) + scale * prep_err)
    return BlockEncoding(first.n_qubits + q, first.ancilla_qubits + q, first.projectors, scale, eps, builder=build, block=block)


# ---------------------------------------------------------------------------
# Chebyshev phase modulation


@njit(cache=True)
def _reflect(r, x):
    y = np.empty_like(x)
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            y[i, j] = r[i] * x[i, j]
    return y


@njit(cache=True)
def _chebyshev_sweep(U, Ud, r_out, r_in, x0, w):
    """Weighted sums of the odd and even Chebyshev blocks' columns.

    ``x0`` holds the columns of ``U`` selected by the input projector; each
    step reflects about the projector the previous step landed in and
    applies ``U`` or its adjoint.
    """
    K = w.shape[0] - 1
    acc_odd = np.zeros_like(x0)
    acc_even = np.zeros_like(x0)
    x = x0.copy()
    if K >= 1:
        acc_odd += w[1] * x
    for k in range(2, K + 1):
        if k % 2 == 0:
            x = Ud @ _reflect(r_out, x)
            acc_even += w[k] * x
        else:
            x = U @ _reflect(r_in, x)
            acc_odd += w[k] * x
    return acc_odd, acc_even


@njit(cache=True)
def _block_sweep(B, w):
    """Same sums computed from the block alone via the alternating recurrence.

    ``T_{k+1} = 2 B T_k - T_{k-1}`` for even ``k`` and ``2 B^dag T_k - T_{k-1}``
    for odd ``k``, starting from ``T_0 = I`` and ``T_1 = B``.
    """
    K = w.shape[0] - 1
    m, n = B.shape
    Bd = np.ascontiguousarray(B.conj().T)
    acc_odd = np.zeros((m, n), dtype=np.complex128)
    acc_even = np.zeros((n, n), dtype=np.complex128)
    t_even = np.eye(n, dtype=np.complex128)
    t_odd = B.copy()
    if K >= 1:
        acc_odd += w[1] * t_odd
    for k in range(2, K + 1):
        if k % 2 == 0:
            t_even = 2 * (Bd @ t_odd) - t_even
            acc_even += w[k] * t_even
        else:
            t_odd = 2 * (B @ t_even) - t_odd
            acc_odd += w[k] * t_odd
    return acc_odd, acc_even


# largest encoding, and largest D^2 * degree product, swept column by column
SWEEP_QUBITS = 11
SWEEP_BUDGET = 2 * 10**10


def _chebyshev_blocks(E: BlockEncoding, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(sum_odd w_k T_k block, sum_even w_k T_k block)`` with ``T_0`` the identity.

    Small encodings are swept through the full unitary, reflecting about the
    projectors between steps. Larger ones use the block recurrence, which
    yields the same blocks without touching the ancilla space.
    """
    w = np.asarray(w, dtype=float)
    in_idx = E.projectors.in_indices
    dense = E._unitary is not None or E.n_qubits <= SWEEP_QUBITS
    if not dense or float(E.dim) ** 2 * w.size > SWEEP_BUDGET:
        odd, even = _block_sweep(np.ascontiguousarray(E.block, dtype=np.complex128), w)
        return odd, even + w[0] * np.eye(in_idx.size)
    U = np.ascontiguousarray(E.unitary)
    Ud = np.ascontiguousarray(U.conj().T)
    out_idx = E.projectors.out_indices
    r_out = np.where(E.projectors.mask("out", E.dim), 1.0, -1.0)
    r_in = np.where(E.projectors.mask("in", E.dim), 1.0, -1.0)
    x0 = np.ascontiguousarray(U[:, in_idx])
    acc_odd, acc_even = _chebyshev_sweep(U, Ud, r_out, r_in, x0, w)
    odd = acc_odd[out_idx]
    even = acc_even[in_idx] + w[0] * np.eye(in_idx.size)
    return odd, even


def _phase_diag(mask: np.ndarray, phi: float, conj: bool) -> np.ndarray:
    """Diagonal of ``exp(i phi (2 Pi - I))``, or its conjugate on the ancilla-one branch."""
    r = np.where(mask, 1.0, -1.0)
    return np.exp((-1j if conj else 1j) * phi * r)


def _chebyshev_unitaries(E: BlockEncoding, ks: Sequence[int]) -> dict:
    """Materialized phase-modulated circuits ``U_Phi`` for each ``k`` in ``ks``.

    Each projector-controlled phase is a projector-controlled NOT onto a
    fresh ancilla, ``exp(-i phi Z)`` on it, and the same NOT again; its
    matrix is block diagonal in the ancilla with opposite phases on the two
    branches, so both branches are assembled separately.
    """
    U = np.asarray(E.unitary)
    D = U.shape[0]
    m_out, m_in = E.projectors.mask("out", D), E.projectors.mask("in", D)
    wanted = set(int(k) for k in ks)
    out = {}
    if 0 in wanted:
        out[0] = np.eye(2 * D, dtype=complex)
    kmax = max(wanted) if wanted else 0
    branches = []
    for conj in (False, True):
        branch = {}
        P = None
        for k in range(1, kmax + 1):
            if k == 1:
                P = U.copy()
            else:
                # after step k-1 the state is in the output space for odd k-1
                prev_mask = m_out if (k - 1) % 2 == 1 else m_in
                step = U if k % 2 == 1 else U.conj().T
                P = step @ (_phase_diag(prev_mask, math.pi / 2, conj)[:, None] * P)
            if k in wanted:
                last = m_out if k % 2 == 1 else m_in
                branch[k] = _phase_diag(last, (1 - k) * math.pi / 2, conj)[:, None] * P
        branches.append(branch)
    for k in wanted - {0}:
        full = np.zeros((2 * D, 2 * D), dtype=complex)
        full[:D, :D] = branches[0][k]
        full[D:, D:] = branches[1][k]
        out[k] = full
    return out


def _require_unit_alpha(E: BlockEncoding) -> None:
    if abs(E.alpha - 1) > ALPHA_TOL:
        raise ValidationError(f"encoding has alpha = {E.alpha}; renormalize it to alpha = 1 first")


def _qsvt_projectors(E: BlockEncoding, parity: str) -> ProjectorSpec:
    p = E.projectors
    if parity == "even":
        return ProjectorSpec(p.in_indices, p.in_indices, p.kind)
    return p


def chebyshev_qsvt(E: BlockEncoding, k: int) -> BlockEncoding:
    """Encoding of ``T_k`` applied to the singular values of ``E``'s block, using one extra ancilla."""
    _require_unit_alpha(E)
    k = check_positive_int("k", k)
    w = np.zeros(k + 1)
    w[k] = 1.0
    odd, even = _chebyshev_blocks(E, w)
    block = odd if k % 2 else even
    eps = 4 * k * math.sqrt(E.eps) if E.eps > 0 else 0.0
    spec = _qsvt_projectors(E, "odd" if k % 2 else "even")
    return BlockEncoding(
        E.n_qubits + 1, E.ancilla_qubits + 1, spec, 1.0, eps,
        builder=lambda: _chebyshev_unitaries(E, [k])[k], block=block,
    )


def apply_poly_qsvt(E: BlockEncoding, P: ChebyshevPoly, cap: int | None = None) -> BlockEncoding:
    """Encoding of ``P`` applied to ``E``'s block as a linear combination of Chebyshev circuits.

    Only the terms of ``P``'s parity enter the combination. The scale is
    ``|c_0|/2 + sum_{k>=1} |c_k|``, raised to one when it is smaller.
    """
    _require_unit_alpha(E)
    d = P.degree
    if d > max_degree(cap):
        raise ResourceError(f"polynomial degree {d} exceeds the degree cap {max_degree(cap)}")
    c = np.asarray(P.coeffs[: d + 1], dtype=float)
    w = c.copy()
    w[0] = c[0] / 2
    if P.parity == "none" and not E.is_square_block and np.any(w[0::2] != 0) and np.any(w[1::2] != 0):
        raise UnsupportedShapeError("mixed-parity polynomials need matching input and output projectors")
    if P.parity == "odd" or (P.parity == "none" and not np.any(w[0::2])):
        parity, ks = "odd", [k for k in range(1, d + 1, 2)]
    elif P.parity == "even" or (P.parity == "none" and not np.any(w[1::2])):
        parity, ks = "even", [k for k in range(0, d + 1, 2)]
    else:
        parity, ks = "none", list(range(d + 1))
    scale = float(np.sum(np.abs(w[ks])))
    if not scale > 0:
        return _zero_encoding(E, _qsvt_projectors(E, parity))
    odd, even = _chebyshev_blocks(E, w)
    if parity == "odd":
        block = odd
    elif parity == "even":
        block = even
    else:
        block = odd + even
    weights = np.abs(w[ks])
    signs = np.where(w[ks] < 0, -1.0, 1.0)
    # a scale below one is topped up with +I and -I terms that cancel in the block
    pad = 1.0 - scale if scale < 1 else 0.0
    if pad > 0:
        weights = np.concatenate([weights, [pad / 2, pad / 2]])
        scale = 1.0
    block = block / scale
    slots = weights.size
    q = math.ceil(math.log2(slots)) if slots > 1 else 0
    q = max(q, math.ceil(math.log2(d)) if d > 1 else 0)

    def build() -> np.ndarray:
        us = _chebyshev_unitaries(E, ks)
        unitaries = [signs[i] * us[k] for i, k in enumerate(ks)]
        if pad > 0:
            eye = np.eye(2 * E.dim, dtype=complex)
            unitaries += [eye, -eye]
        if q == 0:
            return unitaries[0]
        prep = prepare_amplitudes(np.concatenate([weights, np.zeros(2**q - slots)]))
        return _select_unitary(prep.unitary(), unitaries)

    eps_terms = sum(abs(w[k]) * (4 * k * math.sqrt(E.eps) if E.eps > 0 else 0.0) for k in ks)
    spec = _qsvt_projectors(E, parity)
    return BlockEncoding(
        E.n_qubits + 1 + q, E.ancilla_qubits + 1 + q, spec, scale, eps_terms, builder=build, block=block,
    )


def _zero_encoding(E: BlockEncoding, spec: ProjectorSpec) -> BlockEncoding:
    """``X`` on one fresh ancilla: the block of every projector pair is zero."""
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    rows, cols = spec.out_indices.size, spec.in_indices.size
    return BlockEncoding(
        E.n_qubits + 1, E.ancilla_qubits + 1, spec, 1.0, 0.0,
        builder=lambda: np.kron(x, np.eye(E.dim)), block=np.zeros((rows, cols)),
    )


def renormalization_degree(alpha: float) -> int:
    return 2 * math.ceil(math.pi * (alpha + 1) / 2) + 1


def _rescale_to_unit(E: BlockEncoding, eps_in: float) -> BlockEncoding:
    k = renormalization_degree(E.alpha)
    gamma = (E.alpha + eps_in) * math.sin(math.pi / (2 * k))
    if gamma > 1:
        raise ValidationError(f"rotation amplitude {gamma} exceeds one; eps is too large")
    rot = np.array([[gamma, -math.sqrt(1 - gamma**2)], [math.sqrt(1 - gamma**2), gamma]])
    shrunk = BlockEncoding(
        E.n_qubits + 1, E.ancilla_qubits + 1, E.projectors, 1.0, 0.0,
        builder=lambda: np.kron(rot, E.unitary), block=gamma * E.block,
    )
    # T_k(sin(pi/2k)) = cos((k-1) pi/2), so half of the admissible k flip the sign
    sign = -1.0 if ((k - 1) // 2) % 2 else 1.0
    inner = chebyshev_qsvt(shrunk, k)
    return BlockEncoding(
        inner.n_qubits, inner.ancilla_qubits, inner.projectors, 1.0, 36 * eps_in,
        builder=lambda: sign * inner.unitary, block=sign * inner.block,
    )


def renormalize(E: BlockEncoding, isometry_target: bool = True, eps: float | None = None) -> BlockEncoding:
    """Rescale an encoding of an isometry to ``alpha = 1``.

    A rotation qubit shrinks the block by ``gamma / alpha`` with
    ``gamma = (alpha + eps) sin(pi / 2k)`` and ``T_k`` then maps every
    singular value near ``sin(pi / 2k)`` to magnitude one. ``eps`` overrides
    the declared error when the caller knows a looser bound on how far the
    target is from an isometry.
    """
    if E.alpha <= 1 + ALPHA_TOL:
        return E
    if not isometry_target:
        raise UnsupportedShapeError("renormalization is only available for isometry targets")
    eps_in = E.eps if eps is None else max(E.eps, float(eps))
    sv = np.linalg.svd(E.operator(), compute_uv=False)
    if E.block.shape[0] < E.block.shape[1]:
        raise UnsupportedShapeError("block has more columns than rows, so it cannot be an isometry")
    if sv.max() - sv.min() > 10 * eps_in + 1e-9 or sv.max() > 1 + eps_in + 1e-9:
        raise UnsupportedShapeError(
            f"singular values of the encoded operator span [{sv.min():.6g}, {sv.max():.6g}], not an isometry"
        )
    return _rescale_to_unit(E, eps_in)


def sign_qsvt(E: BlockEncoding, P: ChebyshevPoly, eps: float, cap: int | None = None) -> BlockEncoding:
    """Unit-scale encoding of an odd sign approximation ``P`` applied to ``E``.

    The Chebyshev combination has scale ``||c||_1``; it is then rescaled as
    in :func:`renormalize`. Singular values where ``|P|`` is within ``eps``
    of one come out near magnitude one, while the rest stay bounded by one,
    so the result encodes a bounded odd function that agrees with ``P`` on
    the well-separated part of the spectrum. No global isometry check is made.
    """
    if P.parity != "odd":
        raise ValidationError("sign_qsvt needs an odd polynomial")
    W = apply_poly_qsvt(E, P, cap)
    if W.alpha <= 1 + ALPHA_TOL:
        return W
    return _rescale_to_unit(W, W.eps + float(eps))
