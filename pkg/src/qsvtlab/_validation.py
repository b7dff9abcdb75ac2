"""Error types and small input-checking helpers shared across modules."""

from __future__ import annotations

import math
import os

import numpy as np


class QsvtError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(QsvtError, ValueError):
    """Input violates a documented precondition."""


class DomainError(ValidationError):
    """Evaluation point lies outside the supported interval."""


class EvaluationError(QsvtError, ArithmeticError):
    """A user-supplied function produced a non-finite value."""


class ResourceError(QsvtError, RuntimeError):
    """A degree, qubit or memory budget would be exceeded."""


class UnsupportedShapeError(ValidationError):
    """The operation is only defined for a narrower class of inputs."""


DEFAULT_MAX_DEGREE = 4095
MAX_DENSE_QUBITS = 14


def max_degree(override: int | None = None) -> int:
    """Degree cap, taken from ``override``, then ``QSVT_MAX_DEGREE``, then the default."""
    if override is not None:
        return int(override)
    env = os.environ.get("QSVT_MAX_DEGREE")
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise ValidationError(f"QSVT_MAX_DEGREE must be an integer, got {env!r}") from exc
    return DEFAULT_MAX_DEGREE


def check_open_interval(name: str, value: float, lo: float, hi: float) -> float:
    value = float(value)
    if not (math.isfinite(value) and lo < value < hi):
        raise ValidationError(f"{name} must lie in ({lo}, {hi}), got {value}")
    return value


def check_half_open(name: str, value: float, lo: float, hi: float) -> float:
    """Check ``lo < value <= hi``."""
    value = float(value)
    if not (math.isfinite(value) and lo < value <= hi):
        raise ValidationError(f"{name} must lie in ({lo}, {hi}], got {value}")
    return value


def check_positive_int(name: str, value, minimum: int = 1) -> int:
    if isinstance(value, bool) or int(value) != value or int(value) < minimum:
        raise ValidationError(f"{name} must be an integer >= {minimum}, got {value}")
    return int(value)


def as_real_vector(name: str, values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def as_square_matrix(name: str, values, dtype=complex) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name} must be a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def n_qubits_for_dim(name: str, dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or (1 << n) != dim:
        raise ValidationError(f"{name} dimension must be a power of two, got {dim}")
    return n


def check_unitary(name: str, u: np.ndarray, tol: float = 1e-10) -> None:
    dev = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if dev > tol:
        raise ValidationError(f"{name} is not unitary (max deviation {dev:.3e})")
