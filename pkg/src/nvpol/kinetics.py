"""Triplet photophysics and the optically induced polarization (OIPD) sequence.

Sublevel populations of the pentacene triplet are tracked through laser
excitation, incoherent MW1 saturation and exponential decay to the singlet
ground state.  The magnetization seen by the sensor is ``p_plus - p_minus``
(the ms=0 sublevel carries no moment), so the field exists only after MW1
has moved population from ms=0 into ms=+1.

Every segment of the timeline is a sum of exponentials, so the sensor phase
is integrated in closed form rather than by time stepping.  Times are in
microseconds except MW1 durations (ns); frequencies are in MHz.
"""
from __future__ import annotations

import csv
import dataclasses
import functools
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dipolar import SampleSpec, mean_field
from .errors import InvalidParameter, SmallSignalWarning
from .signal import ContrastModel, phase_rad

__all__ = [
    "KineticsParams", "SublevelPopulations", "SequenceSpec", "OIPDResult",
    "SyntheticData", "PRESETS", "MW1_HALVING_NS", "DEFAULT_LINEWIDTH",
    "polarization_buildup", "relax", "apply_mw1", "mw1_saturation",
    "lorentzian_response", "echo_phase", "simulate_oipd", "spectrum",
    "relaxation_experiment", "buildup_experiment", "default_resonance",
]

MW1_HALVING_NS = 80.0
DEFAULT_LINEWIDTH = 8.0   # MHz, FWHM of the MW1 response
PHASE_LIMIT = 0.2         # rad


@dataclass(frozen=True)
class KineticsParams:
    """Decay and buildup constants of the triplet manifold.

    ``t_isc`` (ns) is far shorter than any sequence time and is treated as
    instantaneous.  ``T_minus`` defaults to ``T_plus``.
    """

    t_isc: float = 14.4
    T_plus: float = 7.0
    T_zero: float = 23.0
    t_l: float = 1.5
    P_sat: float = 0.19
    T_minus: float | None = None

    def __post_init__(self):
        for key in ("t_isc", "T_plus", "T_zero", "t_l"):
            if not getattr(self, key) > 0:
                raise InvalidParameter(key, "must be positive")
        if self.T_minus is not None and not self.T_minus > 0:
            raise InvalidParameter("T_minus", "must be positive")
        if not 0 < self.P_sat <= 1:
            raise InvalidParameter("P_sat", "must lie in (0, 1]")

    @property
    def t_minus(self) -> float:
        return self.T_plus if self.T_minus is None else self.T_minus

    def replace(self, **changes) -> "KineticsParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class SublevelPopulations:
    p_zero: float
    p_plus: float
    p_minus: float
    p_ground: float

    def __post_init__(self):
        for key in ("p_zero", "p_plus", "p_minus", "p_ground"):
            v = getattr(self, key)
            if not -1e-12 <= v <= 1 + 1e-12:
                raise InvalidParameter(key, f"population {v!r} outside [0, 1]")
        if abs(self.total - 1.0) > 1e-9:
            raise InvalidParameter("p_ground", f"populations sum to {self.total!r}")

    @property
    def total(self) -> float:
        return self.p_zero + self.p_plus + self.p_minus + self.p_ground

    @property
    def P(self) -> float:
        """Polarization, the ms=0 minus ms=+1 population difference."""
        return self.p_zero - self.p_plus

    @property
    def magnetization(self) -> float:
        return self.p_plus - self.p_minus

    @classmethod
    def after_laser(cls, P: float) -> "SublevelPopulations":
        """Smallest triplet occupancy with polarization ``P`` and p_plus == p_minus."""
        if not abs(P) <= 1:
            raise InvalidParameter("P", "must lie in [-1, 1]")
        if P >= 0:
            return cls(P, 0.0, 0.0, 1.0 - P)
        if P < -0.5:
            raise InvalidParameter("P", "inverted polarization below -1/2 needs p_plus > 1/2")
        return cls(0.0, -P, -P, 1.0 + 2 * P)


def polarization_buildup(tau_p: float, k: KineticsParams) -> float:
    """Polarization after a laser pulse of ``tau_p`` us."""
    if tau_p < 0:
        raise InvalidParameter("tau_p", "must be non-negative")
    return k.P_sat * -math.expm1(-tau_p / k.t_l)


def relax(pop: SublevelPopulations, dt: float, k: KineticsParams) -> SublevelPopulations:
    """Decay of the three sublevels into the singlet ground state for ``dt`` us."""
    if dt < 0:
        raise InvalidParameter("dt", "must be non-negative")
    p0 = pop.p_zero * math.exp(-dt / k.T_zero)
    pp = pop.p_plus * math.exp(-dt / k.T_plus)
    pm = pop.p_minus * math.exp(-dt / k.t_minus)
    lost = (pop.p_zero - p0) + (pop.p_plus - pp) + (pop.p_minus - pm)
    return SublevelPopulations(p0, pp, pm, pop.p_ground + lost)


def mw1_saturation(duration: float) -> float:
    """Fraction of full 0/+1 equalization reached after ``duration`` ns on resonance."""
    if duration < 0:
        raise InvalidParameter("mw1_duration", "must be non-negative")
    return -math.expm1(-duration * math.log(2.0) / MW1_HALVING_NS)


def lorentzian_response(detuning: float, linewidth: float) -> float:
    """Unit-height Lorentzian with full width ``linewidth`` (MHz)."""
    if not linewidth > 0:
        raise InvalidParameter("linewidth", "must be positive")
    x = 2.0 * detuning / linewidth
    return 1.0 / (1.0 + x * x)


def apply_mw1(pop: SublevelPopulations, duration: float, detuning: float = 0.0,
              linewidth: float = DEFAULT_LINEWIDTH) -> SublevelPopulations:
    """Incoherently saturate the ms=0 / ms=+1 transition.

    The population difference shrinks by ``L(detuning) * s(duration)``; on
    resonance it is halved after 80 ns and vanishes for long pulses.
    """
    eps = lorentzian_response(detuning, linewidth) * mw1_saturation(duration)
    moved = 0.5 * (pop.p_zero - pop.p_plus) * eps
    return SublevelPopulations(pop.p_zero - moved, pop.p_plus + moved,
                               pop.p_minus, pop.p_ground)


@dataclass(frozen=True)
class SequenceSpec:
    """Timing of one OIPD shot.

    ``mw1_placement="midpoint"`` ends MW1 at the sensor pi pulse (the
    double-resonance arrangement); ``"pre"`` puts laser and MW1 before the
    first sensor pi/2 pulse.  ``tau_rel_zero`` separates the laser from MW1,
    ``tau_rel_plus`` separates MW1 from the sensor pulse it precedes.
    ``mw1_frequency=None`` means on resonance.
    """

    tau_p: float = 1.5
    tau: float = 21.6
    mw1_duration: float = 80.0
    mw1_frequency: float | None = None
    readout_phase: str = "y"
    tau_rel_plus: float = 0.0
    tau_rel_zero: float = 0.0
    repetitions: int = 2_000_000
    mw1_placement: str = "midpoint"

    def __post_init__(self):
        for key in ("tau_p", "tau", "mw1_duration", "tau_rel_plus", "tau_rel_zero"):
            if not getattr(self, key) >= 0:
                raise InvalidParameter(key, "must be non-negative")
        if self.readout_phase not in ("x", "y"):
            raise InvalidParameter("readout_phase", "must be 'x' or 'y'")
        if self.mw1_placement not in ("midpoint", "pre"):
            raise InvalidParameter("mw1_placement", "must be 'midpoint' or 'pre'")
        if not self.repetitions >= 1:
            raise InvalidParameter("repetitions", "must be at least 1")

    def replace(self, **changes) -> "SequenceSpec":
        return dataclasses.replace(self, **changes)


PRESETS = {
    "oipd": SequenceSpec(),
    "oipd-relax-plus": SequenceSpec(mw1_placement="pre"),
    "oipd-relax-zero": SequenceSpec(),
}


@functools.lru_cache(maxsize=None)
def default_resonance() -> float:
    """omega_plus of the default triplet parameters (MHz)."""
    from .spinham import TripletParams, transition_frequencies
    return transition_frequencies(TripletParams())[0]


def _window_integral(a, b, start, amp, decay):
    """Integral over [a, b] of amp * exp(-(t - start)/decay)."""
    if b <= a:
        return 0.0
    if math.isinf(decay):
        return amp * (b - a)
    return amp * decay * (math.exp(-(a - start) / decay) - math.exp(-(b - start) / decay))


def echo_phase(segments, tau: float, gamma_e_nv: float) -> float:
    """Sensor phase (rad) of a pi/2 - pi - pi/2 echo of length ``tau``.

    ``segments`` is a list of ``(t_start, t_end, terms)`` where the field in
    ``[t_start, t_end)`` is ``sum(amp * exp(-(t - t_start)/decay))`` gauss
    for ``(amp, decay)`` in ``terms``; ``decay=inf`` gives a constant.  The
    first half of the echo counts negative, the second positive.
    """
    half = 0.5 * tau
    total = 0.0
    for t0, t1, terms in segments:
        for amp, decay in terms:
            first = _window_integral(max(t0, 0.0), min(t1, half), t0, amp, decay)
            second = _window_integral(max(t0, half), min(t1, tau), t0, amp, decay)
            total += second - first
    return phase_rad(gamma_e_nv, total, 1.0)


@dataclass(frozen=True)
class OIPDResult:
    sc: float
    phase: float
    magnetization: float
    populations: SublevelPopulations
    trace: tuple

    def trace_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(("t_us", "B_G"))
        for t, b in self.trace:
            writer.writerow((repr(t), repr(b)))
        return out.getvalue()


def _field_unit(s):
    return mean_field(s.replace(P=1.0))


def simulate_oipd(seq: SequenceSpec, s: SampleSpec | None = None,
                  k: KineticsParams | None = None, m: ContrastModel | None = None,
                  *, resonance: float | None = None,
                  linewidth: float = DEFAULT_LINEWIDTH, trace_points: int = 201,
                  warn: bool = True) -> OIPDResult:
    """Simulate one OIPD shot and return the readout contrast.

    The sample's geometry, density and coupling set the field per unit
    magnetization; its polarization comes from the kinetics (``s.P`` is not
    used).  Contrast is ``sin(phase)/2`` for the y readout and
    ``(1 - cos(phase))/2`` for x, both relative to the no-sample reference.
    """
    s = s if s is not None else SampleSpec()
    k = k if k is not None else KineticsParams()
    m = m if m is not None else ContrastModel()
    resonance = default_resonance() if resonance is None else resonance
    detuning = 0.0 if seq.mw1_frequency is None else seq.mw1_frequency - resonance

    half = 0.5 * seq.tau
    t_mw = (half if seq.mw1_placement == "midpoint" else 0.0) - seq.tau_rel_plus
    t_mw_start = t_mw - seq.mw1_duration * 1e-3
    t_laser = t_mw_start - seq.tau_rel_zero

    pop = SublevelPopulations.after_laser(polarization_buildup(seq.tau_p, k))
    before = relax(pop, t_mw - t_laser, k)
    after = apply_mw1(before, seq.mw1_duration, detuning, linewidth)

    unit = _field_unit(s)
    segments = [
        (t_laser, t_mw, [(unit * pop.p_plus, k.T_plus), (-unit * pop.p_minus, k.t_minus)]),
        (t_mw, math.inf, [(unit * after.p_plus, k.T_plus), (-unit * after.p_minus, k.t_minus)]),
    ]
    phase = echo_phase(segments, seq.tau, m.gamma_e_nv)
    if warn and abs(phase) > PHASE_LIMIT:
        warnings.warn(f"sensor phase {phase:.3g} rad is beyond the linear readout "
                      "regime", SmallSignalWarning, stacklevel=2)
    if seq.readout_phase == "y":
        sc = 0.5 * math.sin(phase)
    else:
        sc = 0.5 * (1.0 - math.cos(phase))

    times = np.linspace(min(t_laser, 0.0), seq.tau, trace_points)
    trace = tuple((float(t), _field_at(t, segments)) for t in times)
    return OIPDResult(sc=sc, phase=phase, magnetization=after.magnetization,
                      populations=after, trace=trace)


def _field_at(t, segments):
    b = 0.0
    for t0, t1, terms in segments:
        if t0 <= t < t1:
            for amp, decay in terms:
                b += amp if math.isinf(decay) else amp * math.exp(-(t - t0) / decay)
    return float(b)


@dataclass(frozen=True)
class SyntheticData:
    """A synthetic dataset in the ``x, y, sigma`` exchange format."""

    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray
    x_label: str = "x"

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(("x", "y", "sigma"))
        for row in zip(self.x, self.y, self.sigma):
            writer.writerow([repr(float(v)) for v in row])
        return out.getvalue()


def _noisy(clean, noise_sigma, seed):
    clean = np.asarray(clean, dtype=float)
    if noise_sigma < 0:
        raise InvalidParameter("noise_sigma", "must be non-negative")
    if noise_sigma == 0:
        return clean.copy(), np.zeros_like(clean)
    rng = np.random.default_rng(seed)
    return clean + rng.normal(0.0, noise_sigma, clean.shape), np.full_like(clean, noise_sigma)


def spectrum(seq: SequenceSpec, sweep, linewidth: float = DEFAULT_LINEWIDTH,
             noise_sigma: float = 0.0, seed: int = 0, *, s=None, k=None, m=None,
             resonance=None) -> SyntheticData:
    """Contrast against MW1 frequency, optionally with seeded Gaussian noise."""
    sweep = np.asarray(sweep, dtype=float)
    if sweep.size == 0:
        raise InvalidParameter("sweep", "must not be empty")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SmallSignalWarning)
        clean = [simulate_oipd(seq.replace(mw1_frequency=float(f)), s, k, m,
                               resonance=resonance, linewidth=linewidth,
                               trace_points=2).sc for f in sweep]
    y, sigma = _noisy(clean, noise_sigma, seed)
    return SyntheticData(sweep, y, sigma, "frequency_MHz")


def _linearized(sc):
    """Undo the sine readout: contrast that a perfectly linear readout would give."""
    return 0.5 * np.arcsin(np.clip(2.0 * np.asarray(sc, dtype=float), -1.0, 1.0))


def relaxation_experiment(kind: str, tau_rel_list, seq: SequenceSpec | None = None,
                          s=None, k=None, m=None, noise_sigma: float = 0.0,
                          seed: int = 0) -> SyntheticData:
    """Peak amplitude against a relaxation interval.

    ``kind="plus"`` waits between MW1 and the sensor echo (MW1 placed before
    the echo so the echo stays symmetric); ``kind="zero"`` waits between the
    laser and MW1.  The y-readout contrast is converted back to a linear
    amplitude, ``arcsin(2 SC)/2``, after noise is added, so the curve is a
    pure exponential in the interval.
    """
    if kind not in ("plus", "zero"):
        raise InvalidParameter("kind", "must be 'plus' or 'zero'")
    tau_rel = np.asarray(tau_rel_list, dtype=float)
    if seq is None:
        seq = PRESETS["oipd-relax-plus" if kind == "plus" else "oipd-relax-zero"]
    seq = seq.replace(readout_phase="y", mw1_frequency=None)
    if kind == "plus":
        seq = seq.replace(mw1_placement="pre")
    key = "tau_rel_plus" if kind == "plus" else "tau_rel_zero"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SmallSignalWarning)
        clean = [simulate_oipd(seq.replace(**{key: float(t)}), s, k, m,
                               trace_points=2).sc for t in tau_rel]
    y, sigma = _noisy(clean, noise_sigma, seed)
    return SyntheticData(tau_rel, _linearized(y), sigma, f"tau_rel_{kind}_us")


def buildup_experiment(tau_p_list, seq: SequenceSpec | None = None, s=None, k=None,
                       m=None, noise_sigma: float = 0.0, seed: int = 0) -> SyntheticData:
    """Linearized peak amplitude against laser pulse length."""
    tau_p = np.asarray(tau_p_list, dtype=float)
    seq = (seq or PRESETS["oipd"]).replace(readout_phase="y", mw1_frequency=None)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SmallSignalWarning)
        clean = [simulate_oipd(seq.replace(tau_p=float(t)), s, k, m,
                               trace_points=2).sc for t in tau_p]
    y, sigma = _noisy(clean, noise_sigma, seed)
    return SyntheticData(tau_p, _linearized(y), sigma, "tau_p_us")
