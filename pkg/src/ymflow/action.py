"""Discrete alpha-functional, curvature observables and topological charge.

Conventions (fixed once, see ``KAPPA``):

* ``|F|^2 = sum_{mu<nu} |F_{mu nu}|^2`` with the orthonormal algebra metric of
  :mod:`ymflow.lie`.
* The plaquette density ``e = KAPPA/a^4 * (2 - tr P)``.  For
  ``P = exp(a^2 phi T_3)`` this is ``KAPPA/a^4 * 2(1 - cos(a^2 phi/2))``, whose
  small-field limit ``KAPPA * phi^2 / 4`` equals ``phi^2 = |F|^2`` iff
  ``KAPPA = 4``.
* In this metric a unit instanton carries ``YM = 16 pi^2``, twice the familiar
  ``8 pi^2`` (which counts ``-tr`` instead of ``-2 tr``).
* The charge uses the trace form ``-tr(XY) = <X, Y>/2``, so that
  ``Q = 1/(32 pi^2) sum_{mu nu rho sigma} eps -tr(F F)`` is 1 for an instanton.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from . import lie
from .lattice import Lattice

KAPPA = 4.0
ENERGY_CONVENTION_FACTOR = 2.0
INSTANTON_ENERGY = ENERGY_CONVENTION_FACTOR * 8.0 * np.pi**2
TRACE_FORM = 0.5

PLANES = [tuple(p) for p in _kernels.PLANES]
_PLANE_INDEX = {p: i for i, p in enumerate(PLANES)}


@dataclass
class CurvatureField:
    """``F_{mu nu}(x)`` for ``mu < nu`` in ``PLANES`` order, shape ``dims + (6, 3)``."""

    lattice: Lattice
    F: np.ndarray = field(repr=False)

    def component(self, mu, nu):
        if mu == nu:
            return np.zeros(self.lattice.dims + (3,))
        if mu < nu:
            return self.F[..., _PLANE_INDEX[(mu, nu)], :]
        return -self.F[..., _PLANE_INDEX[(nu, mu)], :]

    def density(self):
        return np.sum(self.F**2, axis=(-1, -2))


def _site_index(lat, x):
    return int(np.ravel_multi_index(tuple(int(v) % n for v, n in zip(x, lat.dims)), lat.dims))


def plaquette(U, x, mu, nu):
    """``U_mu(x) U_nu(x+mu) U_mu(x+nu)^-1 U_nu(x)^-1`` at a single site."""
    if mu == nu:
        raise ValueError("plaquette needs two distinct directions")
    lat = U.lattice
    fwd, _ = lat.neighbours
    s = _site_index(lat, x)
    flat = U.flat
    q = lie.group_mul(flat[s, mu], flat[fwd[s, mu], nu])
    q = lie.group_mul(q, lie.conj(flat[fwd[s, nu], mu]))
    return lie.group_mul(q, lie.conj(flat[s, nu]))


def plaquette_density(U, x, mu, nu):
    if not mu < nu:
        raise ValueError("plaquette density is indexed by mu < nu")
    q0 = plaquette(U, x, mu, nu)[0]
    return KAPPA / U.lattice.spacing**4 * (2.0 - 2.0 * q0)


def plaquette_field(U):
    """All plaquettes anchored at each site, shape ``dims + (6, 4)``."""
    fwd, _ = U.lattice.neighbours
    return _kernels.plaquette_field(U.flat, fwd).reshape(U.lattice.dims + (6, 4))


def energy_density(U):
    """Plaquette-anchored ``rho(x) = sum_{mu<nu} e_{mu nu}(x)``; this enters the action."""
    P = plaquette_field(U)
    return KAPPA / U.lattice.spacing**4 * np.sum(2.0 - 2.0 * P[..., 0], axis=-1)


def vacuum_action(lat):
    return lat.spacing**4 * lat.volume


def _check_alpha(alpha):
    if not alpha >= 1.0:
        raise ValueError(f"alpha must be >= 1, got {alpha}")


def alpha_action(U, alpha):
    """``S_alpha = a^4 sum_x (1 + rho(x))^alpha``."""
    _check_alpha(alpha)
    rho = energy_density(U)
    return U.lattice.spacing**4 * float(np.sum((1.0 + rho) ** alpha))


def ym_energy(U):
    return U.lattice.spacing**4 * float(np.sum(energy_density(U)))


def clover_curvature(U):
    lat = U.lattice
    fwd, bwd = lat.neighbours
    F = _kernels.clover_field(U.flat, fwd, bwd) / lat.spacing**2
    return CurvatureField(lat, F.reshape(lat.dims + (6, 3)))


def clover_density(U):
    return clover_curvature(U).density()


def sup_curvature(U):
    return float(np.max(clover_density(U)))


def charge_density(U):
    """Topological charge density ``q(x)``, with ``Q = a^4 sum_x q(x)``."""
    return _charge_density(clover_curvature(U).F)


def _charge_density(F):
    # sum_{mu nu rho sigma} eps F.F = 8 (F01.F23 - F02.F13 + F03.F12)
    pf = (
        np.sum(F[..., 0, :] * F[..., 5, :], axis=-1)
        - np.sum(F[..., 1, :] * F[..., 4, :], axis=-1)
        + np.sum(F[..., 2, :] * F[..., 3, :], axis=-1)
    )
    return 8.0 * TRACE_FORM * pf / (32.0 * np.pi**2)


def topological_charge(U):
    return U.lattice.spacing**4 * float(np.sum(charge_density(U)))


def observables(U, alpha):
    """Gauge-invariant summary used by traces and continuation tables."""
    rho = energy_density(U)
    a4 = U.lattice.spacing**4
    F = clover_curvature(U)
    return {
        "action": a4 * float(np.sum((1.0 + rho) ** alpha)),
        "ym": a4 * float(np.sum(rho)),
        "sup_f2": float(np.max(F.density())),
        "charge": a4 * float(np.sum(_charge_density(F.F))),
    }
