"""Chebyshev approximants, block-encodings and QSVT-based state testers on a dense simulator."""

from ._validation import (
    DomainError,
    EvaluationError,
    QsvtError,
    ResourceError,
    UnsupportedShapeError,
    ValidationError,
)
from .encoding import (
    BlockEncoding,
    ProjectorSpec,
    apply_poly_qsvt,
    chebyshev_qsvt,
    from_matrix,
    from_unitary,
    lcu_combine,
    prepare_amplitudes,
    purify_to_encoding,
    renormalize,
    sign_qsvt,
)
from .poly_approx import CONSTANTS, ApproxConstants, ChebyshevPoly, eval_cheb, log_poly, sign_poly
from .simulator import Circuit, DensityMatrix, PureState, distance_oracle, run_circuit
from .state_testing import StateTestInstance, TesterConfig, TestOutcome

__version__ = "0.1.0"

__all__ = [
    "ApproxConstants",
    "BlockEncoding",
    "CONSTANTS",
    "ChebyshevPoly",
    "Circuit",
    "DensityMatrix",
    "DomainError",
    "EvaluationError",
    "ProjectorSpec",
    "PureState",
    "QsvtError",
    "ResourceError",
    "StateTestInstance",
    "TestOutcome",
    "TesterConfig",
    "UnsupportedShapeError",
    "ValidationError",
    "apply_poly_qsvt",
    "chebyshev_qsvt",
    "distance_oracle",
    "eval_cheb",
    "from_matrix",
    "from_unitary",
    "lcu_combine",
    "log_poly",
    "prepare_amplitudes",
    "purify_to_encoding",
    "renormalize",
    "run_circuit",
    "sign_poly",
    "sign_qsvt",
]
