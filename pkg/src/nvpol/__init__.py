"""Simulation and fitting toolkit for NV-detected optically induced spin polarization.

Modules: :mod:`~nvpol.spinham` (triplet levels), :mod:`~nvpol.dipolar`
(mean and fluctuating sample fields), :mod:`~nvpol.signal` (sensor
contrast), :mod:`~nvpol.kinetics` (sequence simulation and synthetic data),
:mod:`~nvpol.fitting` (least squares) and :mod:`~nvpol.cli`.
"""

__version__ = "0.1.0"

from ._quad import BACKEND  # noqa: E402
from .dipolar import Cylinder, HalfSpace, SampleSpec, Sphere  # noqa: E402
from .errors import *  # noqa: E402,F401,F403
from .kinetics import KineticsParams, SequenceSpec  # noqa: E402
from .signal import ContrastModel  # noqa: E402
from .spinham import TripletParams  # noqa: E402

__all__ = ["BACKEND", "Cylinder", "HalfSpace", "SampleSpec", "Sphere", "KineticsParams",
           "SequenceSpec", "ContrastModel", "TripletParams", "__version__"]
