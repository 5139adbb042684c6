"""Triplet spin Hamiltonian of pentacene: levels, transitions and slopes.

Energies are in MHz, fields in gauss, angles in degrees.  Matrices are
written in the Zeeman basis ordered ``|+1>, |0>, |-1>`` with the molecular
frame x = out-of-plane, y = short in-plane, z = long in-plane axis.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLabeling, InvalidParameter, NonHermitianInput

__all__ = [
    "TripletParams", "EigenSolution", "SweepTable", "build_hamiltonian",
    "eigensystem", "transition_frequencies", "local_slope", "field_sweep",
    "labeled_levels", "SX", "SY", "SZ", "SWEEP_HEADER",
]

_S2 = np.sqrt(2.0)
SX = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / _S2
SY = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / _S2
SZ = np.diag([1.0, 0.0, -1.0]).astype(complex)

_SZ2 = SZ @ SZ
_SXY = SX @ SX - SY @ SY

#: Zeeman label for each basis index.
MS_LABELS = (1, 0, -1)

SWEEP_HEADER = ("B0_G", "E_plus_MHz", "E_0_MHz", "E_minus_MHz",
                "omega_plus_MHz", "omega_minus_MHz")

# basis-index assignments tried in order; first best score wins ties
_PERMS = np.array(list(itertools.permutations(range(3))))
_TIE = 1e-9


@dataclass(frozen=True)
class TripletParams:
    """Zero-field splitting, Zeeman and field-orientation parameters."""

    D: float = -776.55
    E: float = -669.75
    gamma_e: float = 2.80
    B0: float = 512.0
    theta: float = 8.0
    phi: float = 20.0

    def __post_init__(self):
        if not self.gamma_e > 0:
            raise InvalidParameter("gamma_e", "must be positive")
        if not self.B0 >= 0:
            raise InvalidParameter("B0", "must be non-negative")
        if not 0 <= self.theta <= 180:
            raise InvalidParameter("theta", "must lie in [0, 180] degrees")
        if not 0 <= self.phi < 360:
            raise InvalidParameter("phi", "must lie in [0, 360) degrees")

    def replace(self, **changes) -> "TripletParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class EigenSolution:
    """Levels and mixing coefficients, indexed by Zeeman label.

    Row ``i`` of ``levels``/``states`` belongs to ``MS_LABELS[i]``; the
    columns of ``states`` are the (alpha, beta, gamma) amplitudes on
    ``|+1>_z, |0>_z, |-1>_z``.
    """

    levels: np.ndarray
    states: np.ndarray
    degenerate: bool = False

    def level(self, ms: int) -> float:
        return float(self.levels[MS_LABELS.index(ms)])

    def state(self, ms: int) -> np.ndarray:
        return self.states[MS_LABELS.index(ms)]


def _direction(theta, phi):
    th, ph = np.radians(theta), np.radians(phi)
    return np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)


def _hamiltonians(D, E, gamma_e, B0, theta, phi):
    """Stack of Hamiltonians, one per entry of the broadcast inputs."""
    B0, theta, phi = np.broadcast_arrays(np.asarray(B0, float),
                                         np.asarray(theta, float),
                                         np.asarray(phi, float))
    nx, ny, nz = _direction(theta, phi)
    w = gamma_e * B0
    return (D * _SZ2 + E * _SXY + (w * nx)[..., None, None] * SX
            + (w * ny)[..., None, None] * SY + (w * nz)[..., None, None] * SZ)


def build_hamiltonian(p: TripletParams) -> np.ndarray:
    """Return the 3x3 Hermitian Hamiltonian (MHz) for ``p``."""
    return _hamiltonians(p.D, p.E, p.gamma_e, p.B0, p.theta, p.phi)


def _assign(overlaps):
    """Label eigenvectors by Zeeman character.

    ``overlaps[..., k, i]`` is the weight of basis state ``k`` in eigenvector
    ``i`` (eigenvectors in descending energy).  Returns the basis index per
    eigenvector and a degeneracy flag per stack entry.
    """
    scores = overlaps[..., _PERMS, np.arange(3)].sum(axis=-1)
    best = scores.max(axis=-1, keepdims=True)
    choice = np.argmax(scores >= best - _TIE, axis=-1)
    top2 = np.sort(overlaps, axis=-2)[..., -2:, :]
    degenerate = np.any(top2[..., 1, :] - top2[..., 0, :] <= _TIE, axis=-1)
    return _PERMS[choice], degenerate


def _solve(H):
    w, v = np.linalg.eigh(H)
    w, v = w[..., ::-1], v[..., ::-1]
    perm, degenerate = _assign(np.abs(v) ** 2)
    # order[..., k] = eigen index whose label is basis state k
    order = np.argsort(perm, axis=-1)
    levels = np.take_along_axis(w, order, axis=-1)
    states = np.take_along_axis(v, order[..., None, :], axis=-1)
    states = np.swapaxes(states, -1, -2)
    big = np.argmax(np.abs(states), axis=-1)
    lead = np.take_along_axis(states, big[..., None], axis=-1)
    states = states * (np.conj(lead) / np.abs(lead))
    return levels, states, degenerate


def eigensystem(H, rtol: float = 1e-9) -> EigenSolution:
    """Diagonalize a 3x3 Hermitian matrix and label its eigenstates.

    Labels follow the largest overlap with the Zeeman basis, resolved jointly
    so each label is used once; the largest-magnitude coefficient of every
    state is made real and positive.  A :class:`DegenerateLabeling` warning
    is issued when an eigenvector has two equal leading overlaps (for example
    at zero field), in which case the higher level takes the higher label.
    """
    H = np.asarray(H, dtype=complex)
    if H.shape != (3, 3):
        raise NonHermitianInput(f"expected a 3x3 matrix, got shape {H.shape}")
    scale = max(1.0, float(np.abs(H).max()))
    if np.abs(H - H.conj().T).max() > rtol * scale:
        raise NonHermitianInput("matrix is not Hermitian within tolerance")
    levels, states, degenerate = _solve(H)
    if degenerate:
        warnings.warn("eigenvectors with tied Zeeman overlap; labels assigned by "
                      "energy order", DegenerateLabeling, stacklevel=2)
    return EigenSolution(levels=levels.real.copy(), states=states,
                         degenerate=bool(degenerate))


def labeled_levels(B0, theta, phi, D=-776.55, E=-669.75, gamma_e=2.80):
    """Vectorized levels ``(..., 3)`` in label order plus degeneracy flags."""
    levels, _, degenerate = _solve(_hamiltonians(D, E, gamma_e, B0, theta, phi))
    return levels, degenerate


def _transitions(levels):
    return np.abs(levels[..., 0] - levels[..., 1]), np.abs(levels[..., 1] - levels[..., 2])


def transition_frequencies(p: TripletParams) -> tuple[float, float]:
    """Return ``(omega_plus, omega_minus)`` in MHz as positive magnitudes."""
    sol = eigensystem(build_hamiltonian(p))
    wp, wm = _transitions(sol.levels)
    return float(wp), float(wm)


def local_slope(p: TripletParams, which: str = "plus", dB: float = 0.1) -> float:
    """Central finite-difference slope (MHz/G) of one transition at ``p.B0``."""
    if not dB > 0:
        raise InvalidParameter("dB", "must be positive")
    if which not in ("plus", "minus"):
        raise InvalidParameter("which", "must be 'plus' or 'minus'")
    if p.B0 - dB < 0:
        raise InvalidParameter("dB", "step reaches negative field")
    levels, _ = labeled_levels(np.array([p.B0 + dB, p.B0 - dB]), p.theta, p.phi,
                               p.D, p.E, p.gamma_e)
    wp, wm = _transitions(levels)
    w = wp if which == "plus" else wm
    return float((w[0] - w[1]) / (2 * dB))


@dataclass(frozen=True)
class SweepTable:
    B0: np.ndarray
    levels: np.ndarray
    omega_plus: np.ndarray
    omega_minus: np.ndarray
    degenerate: np.ndarray

    def rows(self):
        for i in range(len(self.B0)):
            yield (float(self.B0[i]), *map(float, self.levels[i]),
                   float(self.omega_plus[i]), float(self.omega_minus[i]))

    def to_csv(self, fh=None) -> str | None:
        out = fh if fh is not None else io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for row in self.rows():
            writer.writerow([repr(v) for v in row])
        return None if fh is not None else out.getvalue()


def field_sweep(p: TripletParams, B_start: float, B_end: float, n: int) -> SweepTable:
    """Levels and transitions on ``n`` evenly spaced fields (inclusive)."""
    if not B_start < B_end:
        raise InvalidParameter("B_start", "must be below B_end")
    if n < 2:
        raise InvalidParameter("n", "need at least two points")
    if B_start < 0:
        raise InvalidParameter("B_start", "must be non-negative")
    B = np.linspace(B_start, B_end, int(n))
    levels, degenerate = labeled_levels(B, p.theta, p.phi, p.D, p.E, p.gamma_e)
    if degenerate.any():
        warnings.warn(f"{int(degenerate.sum())} sweep point(s) with tied Zeeman "
                      "overlap", DegenerateLabeling, stacklevel=2)
    wp, wm = _transitions(levels)
    return SweepTable(B0=B, levels=levels, omega_plus=wp, omega_minus=wm,
                      degenerate=degenerate)
