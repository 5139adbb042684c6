# cython: language_level=3
"""Compiled adaptive shell quadrature; mirrors ``_shells_py`` step for step."""
from libc.math cimport sqrt, fabs, isinf, M_PI
from libc.stdlib cimport malloc, free

import numpy as np

cdef int HALFSPACE = 0, CYLINDER = 1, DOME = 2
cdef int MEAN = 0

cdef double XGK[8]
cdef double WGK[8]
cdef double WG[4]
XGK[:] = [0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
          0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
          0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
          0.207784955007898467600689403773245, 0.0]
WGK[:] = [0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
          0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
          0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
          0.204432940075298892414161999234649, 0.209482141084727828012999174891714]
WG[:] = [0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
         0.381830050505118944950369775488975, 0.417959183673469387755102040816327]

cdef double TWO_PI = 2.0 * M_PI


cdef struct Problem:
    int geom
    int kind
    double d, h, r0, R, r_lo


cdef inline double integrand(double x, Problem* p) nogil:
    cdef double r = p.r_lo / x
    cdef double lo = p.d / r
    cdef double hi = 1.0
    cdef double top, side, cap, f, h2, l2
    if p.geom == CYLINDER:
        top = (p.d + p.h) / r
        if top < hi:
            hi = top
        if r > p.r0:
            side = sqrt(1.0 - (p.r0 / r) * (p.r0 / r))
            if side > lo:
                lo = side
    elif p.geom == DOME:
        cap = (r * r + p.d * p.d - p.R * p.R) / (2.0 * r * p.d)
        if cap > lo:
            lo = cap
    if lo >= hi:
        return 0.0
    if p.kind == MEAN:
        f = TWO_PI * ((hi * hi * hi - hi) - (lo * lo * lo - lo))
        return f / x
    h2 = hi * hi
    l2 = lo * lo
    f = TWO_PI * (((1.8 * h2 * h2 - 2.0 * h2 + 1.0) * hi)
                  - ((1.8 * l2 * l2 - 2.0 * l2 + 1.0) * lo))
    return f * x * x / (p.r_lo * p.r_lo * p.r_lo)


cdef inline void gk15(double a, double b, Problem* p, double* val, double* err) nogil:
    cdef double c = 0.5 * (a + b)
    cdef double hw = 0.5 * (b - a)
    cdef double fc = integrand(c, p)
    cdef double resk = fc * WGK[7]
    cdef double resg = fc * WG[3]
    cdef double dx, fsum
    cdef int j
    for j in range(7):
        dx = hw * XGK[j]
        fsum = integrand(c - dx, p) + integrand(c + dx, p)
        resk += WGK[j] * fsum
        if j % 2 == 1:
            resg += WG[j // 2] * fsum
    val[0] = resk * hw
    err[0] = fabs((resk - resg) * hw)


def shell_integral(int geom, int kind, double d, double h, double r0, double R,
                   double r_lo, double r_hi, breaks, double rel_tol, double abs_tol,
                   int max_intervals):
    """See ``nvpol._shells_py.shell_integral``."""
    cdef Problem p
    p.geom = geom
    p.kind = kind
    p.d = d
    p.h = h
    p.r0 = r0
    p.R = R
    p.r_lo = r_lo
    cdef double x_lo = 0.0 if isinf(r_hi) else r_lo / r_hi
    edges = sorted({x_lo, 1.0} | {r_lo / b for b in breaks if r_lo < b < r_hi})
    cdef int n0 = len(edges) - 1
    cdef int cap = max_intervals if max_intervals > n0 else n0
    cdef double* A = <double*> malloc(cap * sizeof(double))
    cdef double* B = <double*> malloc(cap * sizeof(double))
    cdef double* V = <double*> malloc(cap * sizeof(double))
    cdef double* E = <double*> malloc(cap * sizeof(double))
    if A == NULL or B == NULL or V == NULL or E == NULL:
        free(A); free(B); free(V); free(E)
        raise MemoryError()
    cdef int n = 0, i, k, best
    cdef double total = 0.0, errsum = 0.0, v1, e1, v2, e2, m, tol, emax
    cdef bint converged = True
    try:
        for i in range(n0):
            A[i] = edges[i]
            B[i] = edges[i + 1]
            gk15(A[i], B[i], &p, &V[i], &E[i])
            total += V[i]
            errsum += E[i]
        n = n0
        with nogil:
            while True:
                tol = rel_tol * fabs(total)
                if abs_tol > tol:
                    tol = abs_tol
                if errsum <= tol:
                    break
                if n >= max_intervals:
                    converged = False
                    break
                best = 0
                emax = E[0]
                for k in range(1, n):
                    if E[k] > emax:
                        emax = E[k]
                        best = k
                m = 0.5 * (A[best] + B[best])
                gk15(A[best], m, &p, &v1, &e1)
                gk15(m, B[best], &p, &v2, &e2)
                total += (v1 + v2) - V[best]
                errsum += (e1 + e2) - E[best]
                A[n] = m
                B[n] = B[best]
                V[n] = v2
                E[n] = e2
                B[best] = m
                V[best] = v1
                E[best] = e1
                n += 1
        left = np.empty(n)
        for i in range(n):
            left[i] = A[i]
        order = np.argsort(left, kind="stable")
        value = 0.0
        error = 0.0
        for i in order:
            value += V[i]
            error += E[i]
        return value, error, n, converged
    finally:
        free(A); free(B); free(V); free(E)
