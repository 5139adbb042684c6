"""Pure-Python adaptive shell quadrature (reference twin of ``_shells.pyx``).

The dipolar kernel ``(3 cos^2 t - 1) / r^3`` (or its square) is integrated
over an axisymmetric sample.  For every spherical shell of radius ``r``
about the sensor the polar integral is done in closed form over the range
of ``u = cos t`` that lies inside the sample; the remaining radial integral
is mapped to ``x = r_lo / r`` and handled by globally adaptive 15-point
Gauss-Kronrod quadrature.

Both implementations follow the same arithmetic and subdivision order, so
they agree to rounding.
"""
import heapq
import math

HALFSPACE, CYLINDER, DOME = 0, 1, 2
MEAN, VARIANCE = 0, 1

_XGK = (0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
        0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
        0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
        0.207784955007898467600689403773245, 0.0)
_WGK = (0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
        0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
        0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
        0.204432940075298892414161999234649, 0.209482141084727828012999174891714)
_WG = (0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
       0.381830050505118944950369775488975, 0.417959183673469387755102040816327)

_TWO_PI = 2.0 * math.pi


def _u_range(geom, r, d, h, r0, R):
    lo = d / r
    hi = 1.0
    if geom == CYLINDER:
        top = (d + h) / r
        if top < hi:
            hi = top
        if r > r0:
            side = math.sqrt(1.0 - (r0 / r) * (r0 / r))
            if side > lo:
                lo = side
    elif geom == DOME:
        cap = (r * r + d * d - R * R) / (2.0 * r * d)
        if cap > lo:
            lo = cap
    return lo, hi


def _angular(kind, lo, hi):
    if kind == MEAN:
        return (hi * hi * hi - hi) - (lo * lo * lo - lo)
    h2, l2 = hi * hi, lo * lo
    return ((1.8 * h2 * h2 - 2.0 * h2 + 1.0) * hi) - ((1.8 * l2 * l2 - 2.0 * l2 + 1.0) * lo)


def _integrand(x, geom, kind, d, h, r0, R, r_lo):
    r = r_lo / x
    lo, hi = _u_range(geom, r, d, h, r0, R)
    if lo >= hi:
        return 0.0
    f = _TWO_PI * _angular(kind, lo, hi)
    if kind == MEAN:
        return f / x
    return f * x * x / (r_lo * r_lo * r_lo)


def _gk15(a, b, args):
    c = 0.5 * (a + b)
    hw = 0.5 * (b - a)
    fc = _integrand(c, *args)
    resk = fc * _WGK[7]
    resg = fc * _WG[3]
    for j in range(7):
        dx = hw * _XGK[j]
        fsum = _integrand(c - dx, *args) + _integrand(c + dx, *args)
        resk += _WGK[j] * fsum
        if j % 2 == 1:
            resg += _WG[j // 2] * fsum
    return resk * hw, abs((resk - resg) * hw)


def shell_integral(geom, kind, d, h, r0, R, r_lo, r_hi, breaks,
                   rel_tol, abs_tol, max_intervals):
    """Integrate the kernel over the sample between radii ``r_lo`` and ``r_hi``.

    ``breaks`` lists radii where the integrand has kinks.  Returns
    ``(value, error_estimate, n_intervals, converged)``.
    """
    args = (geom, kind, d, h, r0, R, r_lo)
    x_lo = 0.0 if math.isinf(r_hi) else r_lo / r_hi
    edges = sorted({x_lo, 1.0} | {r_lo / b for b in breaks if r_lo < b < r_hi})
    a_list, b_list, v_list, e_list = [], [], [], []
    heap = []
    total = 0.0
    err = 0.0
    for i in range(len(edges) - 1):
        v, e = _gk15(edges[i], edges[i + 1], args)
        a_list.append(edges[i])
        b_list.append(edges[i + 1])
        v_list.append(v)
        e_list.append(e)
        heapq.heappush(heap, (-e, i))
        total += v
        err += e
    converged = True
    while err > max(abs_tol, rel_tol * abs(total)):
        if len(a_list) >= max_intervals:
            converged = False
            break
        _, i = heapq.heappop(heap)
        a, b = a_list[i], b_list[i]
        m = 0.5 * (a + b)
        v1, e1 = _gk15(a, m, args)
        v2, e2 = _gk15(m, b, args)
        total += (v1 + v2) - v_list[i]
        err += (e1 + e2) - e_list[i]
        b_list[i], v_list[i], e_list[i] = m, v1, e1
        a_list.append(m)
        b_list.append(b)
        v_list.append(v2)
        e_list.append(e2)
        heapq.heappush(heap, (-e1, i))
        heapq.heappush(heap, (-e2, len(a_list) - 1))
    order = sorted(range(len(a_list)), key=a_list.__getitem__)
    value = 0.0
    error = 0.0
    for i in order:
        value += v_list[i]
        error += e_list[i]
    return value, error, len(a_list), converged
