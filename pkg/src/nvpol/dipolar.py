"""Mean and fluctuating dipolar fields of a polarized spin ensemble at the NV.

Public lengths are in micrometres; internally everything is converted to
nanometres so that the coupling constant (G nm^3) and the spin density
(nm^-3) combine directly into gauss.  The sensor sits at the origin with its
quantization axis along +z, and the sample occupies ``z >= d``.

Three sample shapes are supported:

``HalfSpace(d)``
    the sample fills everything beyond the standoff ``d``.
``Sphere(radius, d)``
    a large sample dome: the ball of ``radius`` centred on the sample point
    nearest the sensor, clipped to the sample side of the surface.  In the
    ``radius >> d`` limit its mean field is the depth-independent bulk value.
``Cylinder(r0, h, d)``
    a disc of radius ``r0`` and thickness ``h`` coaxial with the sensor axis.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass

from . import _quad
from .errors import (DegenerateStandoff, GeometryMismatch, InvalidParameter,
                     NonConvergent, ToleranceNotReached)

__all__ = [
    "C_FREE_ELECTRON", "C_PENTACENE", "RHO_PENTACENE", "NM_PER_UM",
    "Sphere", "HalfSpace", "Cylinder", "SampleSpec", "FieldStatistics",
    "NumericResult", "cylinder_factor", "mean_field_sphere",
    "fluctuation_halfspace", "mean_field_cylinder", "mean_field",
    "field_statistics", "integrate_numeric", "detection_volume",
    "oracle_csv",
]

C_FREE_ELECTRON = 9.28   # G nm^3, (mu0/4pi)(g/2)mu_B
C_PENTACENE = 8.35       # G nm^3, scaled by the measured 2.53/2.80 slope ratio
RHO_PENTACENE = 1.62e-3  # nm^-3
NM_PER_UM = 1000.0


def _positive(key, value):
    if not value > 0:
        raise InvalidParameter(key, "must be positive")


def _standoff(value):
    if not value > 0:
        raise DegenerateStandoff("d", "standoff must be positive")


@dataclass(frozen=True)
class HalfSpace:
    d: float = 1.0

    def __post_init__(self):
        _standoff(self.d)


@dataclass(frozen=True)
class Sphere:
    radius: float = 1000.0
    d: float = 1.0

    def __post_init__(self):
        _positive("radius", self.radius)
        _standoff(self.d)


@dataclass(frozen=True)
class Cylinder:
    r0: float = 35.0
    h: float = 15.0
    d: float = 12.0

    def __post_init__(self):
        _positive("r0", self.r0)
        _positive("h", self.h)
        _standoff(self.d)


@dataclass(frozen=True)
class SampleSpec:
    """Spin density (nm^-3), polarization, coupling (G nm^3) and shape."""

    rho: float = RHO_PENTACENE
    P: float = 0.1
    c_dip: float = C_PENTACENE
    geometry: Sphere | HalfSpace | Cylinder = dataclasses.field(default_factory=Cylinder)

    def __post_init__(self):
        _positive("rho", self.rho)
        _positive("c_dip", self.c_dip)
        if not abs(self.P) <= 1:
            raise InvalidParameter("P", "polarization must lie in [-1, 1]")
        if not isinstance(self.geometry, (Sphere, HalfSpace, Cylinder)):
            raise GeometryMismatch(f"unknown geometry {self.geometry!r}")

    def replace(self, **changes) -> "SampleSpec":
        return dataclasses.replace(self, **changes)

    def at_depth(self, d: float) -> "SampleSpec":
        """Same sample with the sensor standoff changed to ``d`` (um)."""
        return self.replace(geometry=dataclasses.replace(self.geometry, d=d))


@dataclass(frozen=True)
class FieldStatistics:
    mean_B: float
    var_B: float


@dataclass(frozen=True)
class NumericResult:
    estimate: float
    error_bound: float
    n_intervals: int


def _require(s, kind):
    if not isinstance(s.geometry, kind):
        raise GeometryMismatch(f"expected {kind.__name__} geometry, "
                               f"got {type(s.geometry).__name__}")


def cylinder_factor(d: float, h: float, r0: float) -> float:
    """Geometric factor of a coaxial disc, dimensionless (any common length unit)."""
    return (d + h) / math.hypot(r0, d + h) - d / math.hypot(r0, d)


def mean_field_sphere(s: SampleSpec) -> float:
    """Bulk mean field 4 pi c rho P / 3 in gauss, independent of depth."""
    _require(s, Sphere)
    return _bulk_mean(s)


def _bulk_mean(s):
    return 4.0 * math.pi * s.c_dip * s.rho * s.P / 3.0


def fluctuation_halfspace(s: SampleSpec) -> float:
    """Field variance (G^2) from a half-space at standoff ``d``.

    The ``1 - P^2`` population factor is kept.
    """
    _require(s, HalfSpace)
    d = s.geometry.d * NM_PER_UM
    return math.pi * s.c_dip ** 2 * s.rho * (1.0 - s.P ** 2) / (4.0 * d ** 3)


def mean_field_cylinder(s: SampleSpec) -> float:
    """Mean field (G) of a coaxial cylindrical sample, 2 pi c rho P G(d, h, r0)."""
    _require(s, Cylinder)
    g = s.geometry
    return 2.0 * math.pi * s.c_dip * s.rho * s.P * cylinder_factor(g.d, g.h, g.r0)


def mean_field(s: SampleSpec) -> float:
    """Closed-form mean field for any supported geometry.

    Sphere and half-space both use the bulk value.
    """
    if isinstance(s.geometry, Cylinder):
        return mean_field_cylinder(s)
    return _bulk_mean(s)


def field_statistics(s: SampleSpec, **numeric) -> FieldStatistics:
    """Mean field and variance; variance falls back to quadrature off the half-space."""
    if isinstance(s.geometry, HalfSpace):
        var = fluctuation_halfspace(s)
    else:
        var = integrate_numeric(s, "variance", **numeric).estimate
    return FieldStatistics(mean_B=mean_field(s), var_B=var)


def _problem(geometry, exclusion_nm, ball_radius=None):
    """Quadrature setup in nm: (geom code, d, h, r0, R, r_lo, r_hi, breaks)."""
    d = geometry.d * NM_PER_UM
    r_lo = max(d, exclusion_nm)
    if ball_radius is not None or isinstance(geometry, Sphere):
        if not isinstance(geometry, (HalfSpace, Sphere)):
            raise GeometryMismatch("ball clipping needs a half-space or sphere")
        R = (ball_radius if ball_radius is not None else geometry.radius) * NM_PER_UM
        return (_quad.DOME, d, 0.0, 0.0, R, r_lo, d + R, [math.hypot(R, d)])
    if isinstance(geometry, HalfSpace):
        return (_quad.HALFSPACE, d, 0.0, 0.0, 0.0, r_lo, math.inf, [])
    h, r0 = geometry.h * NM_PER_UM, geometry.r0 * NM_PER_UM
    return (_quad.CYLINDER, d, h, r0, 0.0, r_lo, math.hypot(r0, d + h),
            [d + h, r0, math.hypot(r0, d)])


def _kernel_integral(geometry, kind, exclusion_nm, rel_tol, abs_tol,
                     max_intervals, ball_radius=None):
    code = {"mean": _quad.MEAN, "variance": _quad.VARIANCE}[kind]
    geom, d, h, r0, R, r_lo, r_hi, breaks = _problem(geometry, exclusion_nm, ball_radius)
    return _quad.shell_integral(geom, code, d, h, r0, R, r_lo, r_hi, breaks,
                                rel_tol, abs_tol, max_intervals)


def _prefactor(s, kind):
    if kind == "mean":
        return s.c_dip * s.rho * s.P
    return s.c_dip ** 2 * s.rho * (1.0 - s.P ** 2)


def integrate_numeric(s: SampleSpec, kind: str = "mean", exclusion: float = 1.0,
                      rel_tol: float = 1e-3, max_intervals: int = 2000) -> NumericResult:
    """Brute-force volume integral of the dipolar kernel over the sample.

    ``kind="mean"`` integrates ``c (3cos^2 t - 1) / r^3`` weighted by
    ``rho P`` (gauss); ``kind="variance"`` integrates the squared kernel
    weighted by ``c rho (1 - P^2)`` (gauss^2).  Spins closer to the sensor
    than ``exclusion`` (nm) are left out.

    Raises
    ------
    ToleranceNotReached
        if the adaptive scheme runs out of subintervals first.
    """
    if kind not in ("mean", "variance"):
        raise InvalidParameter("kind", "must be 'mean' or 'variance'")
    _positive("exclusion", exclusion)
    value, err, n, ok = _kernel_integral(s.geometry, kind, exclusion, rel_tol, 0.0,
                                         max_intervals)
    scale = _prefactor(s, kind)
    if not ok:
        raise ToleranceNotReached(
            f"error estimate {abs(err * scale):.3g} above requested relative "
            f"tolerance {rel_tol:g} after {n} intervals")
    return NumericResult(estimate=scale * value, error_bound=abs(scale) * err,
                         n_intervals=n)


def detection_volume(s: SampleSpec, kind: str = "mean", fraction: float = 0.80,
                     rel_tol: float = 1e-10, exclusion: float = 1e-6) -> float:
    """Radius (um) of the ball around the nearest sample point holding ``fraction`` of the signal.

    The returned ``R`` is the smallest radius beyond which the signal from
    the clipped half-space stays within ``(1 - fraction)`` of the full
    half-space value.  ``kind="mean"`` gives r_p, ``kind="variance"`` r_f.
    """
    _require(s, HalfSpace)
    if not 0 < fraction < 1:
        raise InvalidParameter("fraction", "must lie in (0, 1)")
    if kind not in ("mean", "variance"):
        raise InvalidParameter("kind", "must be 'mean' or 'variance'")
    if _prefactor(s, kind) == 0.0:
        raise NonConvergent(f"total {kind} signal vanishes; detection volume undefined")
    full = _kernel_integral(s.geometry, kind, exclusion, rel_tol, 0.0, 4000)[0]
    d = s.geometry.d

    def partial(R):
        return _kernel_integral(s.geometry, kind, exclusion, rel_tol, 0.0, 4000,
                                ball_radius=R)[0]

    band = (1.0 - fraction) * abs(full)

    def outside(R):
        return abs(partial(R) - full) > band

    grid = [d * 10.0 ** (k / 16.0) for k in range(-48, 97)]
    flags = [outside(R) for R in grid]
    if flags[-1]:
        raise NonConvergent("signal does not settle within 1e6 standoffs")
    if not any(flags):
        return grid[0]
    k = max(i for i, f in enumerate(flags) if f)
    lo, hi = math.log(grid[k]), math.log(grid[k + 1])
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if outside(math.exp(mid)):
            lo = mid
        else:
            hi = mid
    return math.exp(hi)


def oracle_csv(rows) -> str:
    """Format ``(parameter, estimate, error_bound)`` rows as CSV text."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("parameter", "estimate", "error_bound"))
    for name, est, err in rows:
        writer.writerow((name, repr(float(est)), repr(float(err))))
    return out.getvalue()
