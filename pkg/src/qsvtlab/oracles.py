"""Reference values computed by direct linear algebra, for checking the circuit results."""

from __future__ import annotations

import numpy as np

from ._validation import ValidationError
from .poly_approx import ChebyshevPoly


def poly_values(P: ChebyshevPoly, x) -> np.ndarray:
    """``P`` at arbitrary points via numpy's Chebyshev series, independent of Clenshaw."""
    c = np.array(P.coeffs, dtype=float)
    c[0] /= 2
    return np.polynomial.chebyshev.chebval(np.asarray(x, dtype=float), c)


def svt_reference(A, P: ChebyshevPoly) -> np.ndarray:
    """``P`` applied to ``A`` through its SVD, or its eigendecomposition for mixed parity.

    Odd polynomials act on singular values with left and right vectors,
    even ones on the right singular vectors only. A polynomial without
    parity needs a Hermitian ``A`` and is applied to its eigenvalues.
    """
    A = np.asarray(A, dtype=complex)
    if P.parity == "none":
        if A.shape[0] != A.shape[1] or not np.allclose(A, A.conj().T, atol=1e-10):
            raise ValidationError("a polynomial without parity needs a Hermitian matrix")
        w, v = np.linalg.eigh((A + A.conj().T) / 2)
        return (v * poly_values(P, w)) @ v.conj().T
    W, s, Vh = np.linalg.svd(A)
    if P.parity == "odd":
        return (W[:, : s.size] * poly_values(P, s)) @ Vh[: s.size]
    V = Vh.conj().T
    full = np.zeros(V.shape[0])
    full[: s.size] = s
    return (V * poly_values(P, full)) @ V.conj().T
