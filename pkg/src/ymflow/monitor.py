"""Local-energy diagnostics over snapshot series.

Densities stored in a series are ``(1 + |F|^2)^alpha`` per site, with ``|F|^2``
from the clover (compact fields) or from finite differences (noncompact ones).
"""

from __future__ import annotations

import json
import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .action import INSTANTON_ENERGY, clover_density, observables
from .deturck import fd_curvature
from .flow import find_critical, force

# Pass threshold for the fitted monotonicity constant: twice the worst value
# (2.7e-3) over decaying abelian and nonabelian DeTurck-flow series on 8^4,
# alpha in {1, 1.05, 1.2}, radii 1, 1.5, 2.  The constant scales like
# Phi(R1) / ((R2^2 - R1^2) YM_alpha(0)), so larger boxes give smaller values.
C_CAL = 5e-3

# Concentration threshold: 0.1 of the unit-instanton value Psi(R = 4 scale) = 112
# (24^4, scale 1.5a, alpha = 1).  Flat regions between instantons sit near 0.1.
EPSILON0 = 11.0


class WindowNotCovered(ValueError):
    """The snapshot times do not cover the requested time window."""


@dataclass
class SnapshotSeries:
    lattice: object
    times: np.ndarray
    densities: np.ndarray = field(repr=False)
    alpha: float

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.densities = np.asarray(self.densities, dtype=float)
        if self.densities.shape != (len(self.times),) + self.lattice.dims:
            raise ValueError("densities must have shape (ntimes,) + dims")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")
        if np.any(self.densities < 1.0 - 1e-12):
            raise ValueError("densities (1 + |F|^2)^alpha must be >= 1")

    @classmethod
    def from_fields(cls, fields, times, alpha):
        dens = [(1.0 + clover_density(U)) ** alpha for U in fields]
        return cls(fields[0].lattice, times, np.stack(dens), alpha)

    @classmethod
    def from_connections(cls, connections, times, alpha):
        dens = [(1.0 + fd_curvature(c).density()) ** alpha for c in connections]
        return cls(connections[0].lattice, times, np.stack(dens), alpha)

    def total(self, k=0):
        """``a^4 sum (1 + |F|^2)^alpha`` at snapshot ``k``."""
        return self.lattice.spacing**4 * float(np.sum(self.densities[k]))

    def density_at(self, t):
        """Linear interpolation in time."""
        ts = self.times
        if t < ts[0] - 1e-12 or t > ts[-1] + 1e-12:
            raise WindowNotCovered(f"t = {t:g} outside [{ts[0]:g}, {ts[-1]:g}]")
        j = int(np.clip(np.searchsorted(ts, t), 1, len(ts) - 1)) if len(ts) > 1 else 0
        if len(ts) == 1:
            return self.densities[0]
        w = (t - ts[j - 1]) / (ts[j] - ts[j - 1])
        w = min(max(w, 0.0), 1.0)
        return (1.0 - w) * self.densities[j - 1] + w * self.densities[j]

    def window(self, lo, hi):
        """Quadrature nodes in ``[lo, hi]``: interior snapshot times plus both ends."""
        ts = self.times
        if lo < ts[0] - 1e-9 or hi > ts[-1] + 1e-9:
            raise WindowNotCovered(
                f"window [{lo:g}, {hi:g}] not covered by snapshots [{ts[0]:g}, {ts[-1]:g}]"
            )
        inner = ts[(ts > lo + 1e-12) & (ts < hi - 1e-12)]
        return np.concatenate([[lo], inner, [hi]])


def bump(r, cutoff):
    """Smooth cutoff: 1 for ``r <= cutoff/2``, 0 for ``r >= cutoff``."""
    s = np.clip((cutoff - np.asarray(r, dtype=float)) / (0.5 * cutoff), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f = np.where(s > 0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
        g = np.where(s < 1, np.exp(-1.0 / np.maximum(1.0 - s, 1e-300)), 0.0)
    return f / (f + g)


@dataclass
class PhiEstimate:
    value: float
    quality: str
    R: float

    def __float__(self):
        return self.value


def phi_alpha(s, x0, t0, R, cutoff_radius):
    """Backward-heat-kernel weighted local energy at scale ``R``.

    ``R^(4 alpha - 2) int_{t0 - 4R^2}^{t0 - R^2} sum_x a^4 dens phi^2 G dt``.
    The weight ``phi^2 G`` uses minimal-image distance and is renormalised to
    unit lattice mass per time slice.
    """
    lat = s.lattice
    a = lat.spacing
    if cutoff_radius > min(lat.extent) / 2 + 1e-12:
        raise ValueError("cutoff_radius must not exceed half the smallest box length")
    if not R > 0:
        raise ValueError("R must be positive")
    nodes = s.window(t0 - 4.0 * R**2, t0 - R**2)
    r2 = np.sum(lat.displacement(np.asarray(x0, dtype=float) * a) ** 2, axis=-1)
    phi2 = bump(np.sqrt(r2), cutoff_radius) ** 2
    vals = []
    for t in nodes:
        tau = t0 - t
        w = phi2 * np.exp(-r2 / (4.0 * tau))
        w /= np.sum(w) * a**4
        vals.append(a**4 * float(np.sum(s.density_at(t) * w)))
    value = R ** (4.0 * s.alpha - 2.0) * float(np.trapezoid(vals, nodes))
    poor = 4.0 * R**2 > (min(lat.extent) / 4.0) ** 2 or R < a or cutoff_radius < 2.0 * R
    return PhiEstimate(value, "poor" if poor else "good", R)


def _pair_constant(p1, p2, dR, dR2, ym0):
    def gap(C):
        return C * np.exp(C * dR) * p2 + C * dR2 * ym0 - p1

    if gap(0.0) >= 0:
        return 0.0
    hi = 1.0
    while gap(hi) < 0:
        hi *= 2.0
    return brentq(gap, 0.0, hi, xtol=1e-15, rtol=1e-12)


@dataclass
class MonotonicityReport:
    radii: list
    phi: list
    constants: dict
    C: float
    C_cal: float

    @property
    def passed(self):
        return self.C <= self.C_cal

    def as_dict(self):
        return {
            "radii": list(self.radii),
            "phi": list(self.phi),
            "pairs": [{"R1": r1, "R2": r2, "C": c} for (r1, r2), c in self.constants.items()],
            "C": self.C,
            "C_cal": self.C_cal,
            "passed": self.passed,
        }


def check_monotonicity(s, x0, t0, radii, cutoff_radius=None, C_cal=C_CAL):
    """Smallest ``C`` with ``Phi(R1) <= C e^{C (R2 - R1)} Phi(R2) + C (R2^2 - R1^2) YM_alpha(0)``."""
    radii = [float(r) for r in radii]
    if any(r2 <= r1 for r1, r2 in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    if cutoff_radius is None:
        cutoff_radius = 3.0 * min(s.lattice.extent) / 8.0
    phis = [phi_alpha(s, x0, t0, R, cutoff_radius).value for R in radii]
    ym0 = s.total(0)
    constants = {}
    for i in range(len(radii)):
        for j in range(i + 1, len(radii)):
            r1, r2 = radii[i], radii[j]
            constants[(r1, r2)] = _pair_constant(phis[i], phis[j], r2 - r1, r2**2 - r1**2, ym0)
    C = max(constants.values()) if constants else 0.0
    return MonotonicityReport(radii, phis, constants, C, C_cal)


def _ball_kernel(lat, R):
    d2 = np.sum(lat.displacement(np.zeros(4)) ** 2, axis=-1)
    return (d2 <= R**2 + 1e-12).astype(float)


def ball_sum(lat, values, R):
    """Periodic sum of ``values`` over the ball of radius ``R`` around every site."""
    axes = (0, 1, 2, 3)
    k = np.fft.rfftn(_ball_kernel(lat, R), axes=axes)
    return np.fft.irfftn(np.fft.rfftn(values, axes=axes) * k, s=lat.dims, axes=axes)


def flat_baseline(lat, R, alpha):
    """The volume term removed from Psi: ``R^(4 alpha - 6) |B_R| R^2``."""
    nball = float(np.sum(_ball_kernel(lat, R)))
    return R ** (4.0 * alpha - 6.0) * nball * lat.spacing**4 * R**2


@dataclass
class ConcentrationReport:
    alpha: float
    R: float
    epsilon0: float
    flagged: list = field(default_factory=list)

    def as_dict(self):
        return {
            "alpha": self.alpha,
            "R": self.R,
            "epsilon0": self.epsilon0,
            "flagged": [{"site": list(site), "t": t, "psi": psi} for site, t, psi in self.flagged],
        }

    def to_json(self, **kw):
        return json.dumps(self.as_dict(), **kw)

    def sites(self):
        return {tuple(site) for site, _, _ in self.flagged}


def psi_field(s, R, t0):
    """``R^(4 alpha - 6) int_{t0 - R^2}^{t0} sum_{B_R(x)} a^4 [dens - 1] dt`` for every site.

    A single snapshot is read as a static configuration held over the window.
    """
    lat = s.lattice
    a4 = lat.spacing**4
    if len(s.times) == 1:
        excess = ball_sum(lat, s.densities[0] - 1.0, R) * a4 * R**2
    else:
        nodes = s.window(t0 - R**2, t0)
        vals = np.stack([ball_sum(lat, s.density_at(t) - 1.0, R) * a4 for t in nodes])
        excess = np.trapezoid(vals, nodes, axis=0)
    return R ** (4.0 * s.alpha - 6.0) * excess


def epsilon_detector(s, R, epsilon0=EPSILON0):
    """Flag ``(site, t0)`` with ``Psi > epsilon0``, largest first."""
    ts = s.times
    if len(ts) == 1:
        t0s = [ts[0]]
    else:
        t0s = [t for t in ts if t - R**2 >= ts[0] - 1e-9]
        if not t0s:
            raise WindowNotCovered(f"no snapshot time has a full window of length R^2 = {R**2:g}")
    flagged = []
    for t0 in t0s:
        psi = psi_field(s, R, t0)
        for idx in np.argwhere(psi > epsilon0):
            site = tuple(int(v) for v in idx)
            flagged.append((site, float(t0), float(psi[site])))
    flagged.sort(key=lambda f: -f[2])
    return ConcentrationReport(s.alpha, R, epsilon0, flagged)


@dataclass
class GapVerdict:
    verdict: str
    ym: float
    charge: float
    critical: object = field(repr=False)


def gap_check(U, alpha, tol, force_tol=1e-6, max_steps=20000):
    """Descend to a critical point; FLAT if its energy is below ``tol a^4 #sites``."""
    if alpha - 1.0 > 0.2:
        raise ValueError("gap_check needs alpha - 1 <= 0.2")
    res = find_critical(U, alpha, force_tol, max_steps=max_steps)
    obs = observables(res.field, alpha)
    flat = obs["ym"] < tol * U.lattice.physical_volume
    return GapVerdict("FLAT" if flat else "NONFLAT", obs["ym"], obs["charge"], res)


@dataclass
class ContinuationEntry:
    alpha: float
    action_minus_vacuum: float
    ym: float
    sup_f2: float
    charge: float
    residual: float
    converged: bool
    steps: int
    density: np.ndarray = field(repr=False)
    field: object = field(repr=False)
    history: list = dataclasses.field(default_factory=list, repr=False)

    def row(self):
        return {
            "alpha": self.alpha,
            "action_minus_vacuum": self.action_minus_vacuum,
            "ym": self.ym,
            "sup_f2": self.sup_f2,
            "charge": self.charge,
            "residual": self.residual,
        }


@dataclass
class ContinuationResult:
    entries: list
    verdict: str
    density_steps: list
    ym_residual: float


def alpha_continuation(U0, alphas, tol, max_steps=20000, charge_tol=0.05, monitor_every=5):
    """Warm-started critical points along a decreasing alpha sequence.

    The verdict is ``strong`` when successive density differences shrink and
    the charge stays put.  It is ``concentration`` when sup|F|^2 grows
    at bounded energy, either monotonically by more than a factor 2 across
    the stages or up to the point where the core drops through the lattice
    (a charge jump seen in the descent samples).  Anything else is
    ``inconclusive``.
    """
    alphas = [float(a) for a in alphas]
    if any(a2 >= a1 for a1, a2 in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be strictly decreasing")
    if any(a <= 1.0 for a in alphas):
        raise ValueError("alphas must be > 1")
    lat = U0.lattice
    U = U0
    entries = []
    for alpha in alphas:
        res = find_critical(U, alpha, tol, max_steps=max_steps, monitor_every=monitor_every)
        U = res.field
        obs = observables(U, alpha)
        entries.append(ContinuationEntry(
            alpha, obs["action"] - lat.physical_volume, obs["ym"], obs["sup_f2"], obs["charge"],
            res.force_norm, res.converged, res.steps, clover_density(U), U, res.history,
        ))
    steps = [float(np.max(np.abs(e2.density - e1.density))) for e1, e2 in zip(entries, entries[1:])]
    charges = [e.charge for e in entries]
    sups = [e.sup_f2 for e in entries]
    ym_bounded = max(e.ym for e in entries) < 2.0 * max(entries[0].ym, INSTANTON_ENERGY)
    cauchy = all(d2 <= d1 for d1, d2 in zip(steps, steps[1:]))
    charge_stable = max(charges) - min(charges) <= charge_tol
    # A core that shrinks below the spacing drops out through the lattice and
    # takes its charge along.  The growth is read off the descent samples
    # (all stages, in order) taken before that charge jump.
    path = [h for e in entries for h in e.history] or [e.row() for e in entries]
    q0 = observables(U0, alphas[0])["charge"]
    leak = next((i for i, h in enumerate(path) if abs(h["charge"] - q0) > 0.5), None)
    if leak is not None:
        pre = [observables(U0, alphas[0])["sup_f2"]] + [h["sup_f2"] for h in path[:leak]]
        # the clover peak can start to fall a sample or two before the charge does
        concentrating = int(np.argmax(pre)) >= len(pre) - 3 and max(pre) > 1.1 * pre[0]
    else:
        concentrating = all(s2 > s1 for s1, s2 in zip(sups, sups[1:])) and sups[-1] > 2.0 * sups[0]
    charge_stable = charge_stable and leak is None
    if cauchy and charge_stable and not concentrating:
        verdict = "strong"
    elif concentrating and ym_bounded:
        verdict = "concentration"
    else:
        verdict = "inconclusive"
    residual = force(U, 1.0).max_norm()
    return ContinuationResult(entries, verdict, steps, residual)
