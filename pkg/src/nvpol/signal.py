"""NV interferometric contrast from dipolar field statistics.

The sensor accumulates a phase ``2 pi gamma B t`` (MHz/G x G x us = rad).
For a y-phase readout the ms=0 population changes by ``sin(phase)/2``, so
in the small-signal limit the polarization contrast is ``phase/2`` and the
fluctuation contrast is ``(rms phase / 2)^2``.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dipolar import HalfSpace, SampleSpec, fluctuation_halfspace, mean_field
from .errors import InvalidParameter, NegativeVariance, NoCrossover, SmallSignalWarning

__all__ = [
    "ContrastModel", "SMALL_SIGNAL_LIMIT", "phase_rad", "sc_polarization",
    "sc_fluctuation", "eq7_contrast", "contrast_vs_depth", "crossover_depth",
    "ContrastTable",
]

GAMMA_NV = 2.80  # MHz/G
SMALL_SIGNAL_LIMIT = 0.2


@dataclass(frozen=True)
class ContrastModel:
    """Sensor gyromagnetic ratio (MHz/G) and interference times (us).

    ``T_total`` is the phase-accumulation time used by :func:`sc_polarization`
    and :func:`sc_fluctuation`; ``accumulation`` is the effective time used
    for the contrast-versus-depth maps (the ms=+1 lifetime of the sample).
    """

    gamma_e_nv: float = GAMMA_NV
    T_total: float = 7.0
    accumulation: float = 7.0

    def __post_init__(self):
        for key in ("gamma_e_nv", "T_total", "accumulation"):
            if not getattr(self, key) > 0:
                raise InvalidParameter(key, "must be positive")

    def with_time(self, t: float) -> "ContrastModel":
        return ContrastModel(self.gamma_e_nv, t, self.accumulation)


def phase_rad(gamma_mhz_per_g: float, field_g: float, time_us: float) -> float:
    """Sensor phase in radians; the one place the 2 pi and unit factors live."""
    return 2.0 * math.pi * gamma_mhz_per_g * field_g * time_us


def _check_small(sc):
    if abs(sc) > SMALL_SIGNAL_LIMIT:
        warnings.warn(f"|SC| = {abs(sc):.3g} exceeds the small-signal limit "
                      f"{SMALL_SIGNAL_LIMIT}", SmallSignalWarning, stacklevel=3)


def sc_polarization(mean_B: float, m: ContrastModel) -> float:
    """Linear-regime contrast from a mean field (G) over ``m.T_total``."""
    sc = phase_rad(m.gamma_e_nv, mean_B, m.T_total) / 2.0
    _check_small(sc)
    return sc


def sc_fluctuation(var_B: float, m: ContrastModel) -> float:
    """Contrast from a field variance (G^2) over ``m.T_total``."""
    if var_B < 0:
        raise NegativeVariance(f"variance must be non-negative, got {var_B!r}")
    sc = (phase_rad(m.gamma_e_nv, math.sqrt(var_B), m.T_total) / 2.0) ** 2
    _check_small(sc)
    return sc


def eq7_contrast(d, P, r0=35.0, h=15.0, T_eff=7.0, c_dip=8.35, rho=1.62e-3,
                 gamma_e=GAMMA_NV):
    """Depth-profile contrast of a cylindrical sample, as a direct closed form.

    ``2 pi gamma T_eff * pi c rho P * G(d, h, r0)`` with lengths in um (only
    ratios enter ``G``).  Works elementwise on numpy arrays of ``d``.
    """
    d = np.asarray(d, dtype=float)
    g = (d + h) / np.hypot(r0, d + h) - d / np.hypot(r0, d)
    sc = 2.0 * math.pi * gamma_e * T_eff * math.pi * c_dip * rho * P * g
    return float(sc) if sc.ndim == 0 else sc


@dataclass(frozen=True)
class ContrastTable:
    depths: tuple
    P_list: tuple
    sc_pola: tuple     # one tuple per depth, ordered like P_list
    sc_fluc: tuple

    @property
    def header(self):
        return ("depth_um", *(f"SC_pola_P{p:g}" for p in self.P_list), "SC_fluc")

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(self.header)
        for d, pola, fluc in zip(self.depths, self.sc_pola, self.sc_fluc):
            writer.writerow([repr(float(d)), *(repr(float(v)) for v in pola),
                             repr(float(fluc))])
        return out.getvalue()


def _pola(s, m, d, P):
    t = m.with_time(m.accumulation)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SmallSignalWarning)
        return sc_polarization(mean_field(s.at_depth(d).replace(P=P)), t)


def _fluc(s, m, d, P):
    t = m.with_time(m.accumulation)
    hs = s.replace(P=P, geometry=HalfSpace(d))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SmallSignalWarning)
        return sc_fluctuation(fluctuation_halfspace(hs), t)


def contrast_vs_depth(s: SampleSpec, m: ContrastModel, depths,
                      P_list=(0.1, 1e-4)) -> ContrastTable:
    """Polarization and fluctuation contrast against sensor depth (um).

    The polarization columns use the sample's own geometry (bulk value for a
    sphere or half-space, the disc formula for a cylinder); the fluctuation
    column always uses the half-space variance at the sample's ``P``.
    Times come from ``m.accumulation``.
    """
    depths = tuple(float(d) for d in depths)
    if not depths or any(d <= 0 for d in depths):
        raise InvalidParameter("depths", "must be positive")
    if any(b <= a for a, b in zip(depths, depths[1:])):
        raise InvalidParameter("depths", "must be strictly ascending")
    P_list = tuple(float(p) for p in P_list)
    pola = tuple(tuple(_pola(s, m, d, P) for P in P_list) for d in depths)
    fluc = tuple(_fluc(s, m, d, s.P) for d in depths)
    return ContrastTable(depths, P_list, pola, fluc)


def crossover_depth(s: SampleSpec, m: ContrastModel, P: float,
                    bracket=(1e-4, 1e3)) -> float:
    """Depth (um) where polarization and fluctuation contrasts are equal.

    Uses the bulk mean field and the half-space variance; the difference of
    their logarithms is monotone in depth, so bisection on ``log d`` is safe.
    """
    if not P > 0:
        raise InvalidParameter("P", "must be positive")
    bulk = s.replace(geometry=HalfSpace(bracket[0]))

    def gap(log_d):
        d = math.exp(log_d)
        return math.log(_pola(bulk, m, d, P)) - math.log(_fluc(bulk, m, d, P))

    lo, hi = math.log(bracket[0]), math.log(bracket[1])
    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo >= 0:
        raise NoCrossover("polarization signal dominates across the whole bracket")
    if g_hi <= 0:
        raise NoCrossover("fluctuation signal dominates across the whole bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gap(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    return math.exp(0.5 * (lo + hi))
