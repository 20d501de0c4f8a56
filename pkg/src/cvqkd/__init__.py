"""Finite-size security-bound calculator and numerical verification harness
for Gaussian continuous-variable QKD against general attacks."""

__version__ = "0.1.0"

from .protocol import ChannelModel, Detection, ProtocolConfig
from .secparams import SecurityBounds, SecurityInputs, security_report
from .symmetry import QuadratureRecord, TestOutcome
from .tailbounds import InfeasibleParameters, SphereVariant, TailBound

__all__ = [
    "__version__",
    "ChannelModel",
    "Detection",
    "InfeasibleParameters",
    "ProtocolConfig",
    "QuadratureRecord",
    "SecurityBounds",
    "SecurityInputs",
    "SphereVariant",
    "TailBound",
    "TestOutcome",
    "security_report",
]
