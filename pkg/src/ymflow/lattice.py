"""Periodic 4-torus geometry, link fields and initial data."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import lie


class LatticeMismatch(ValueError):
    """Two fields or transforms live on different lattices."""


@dataclass(frozen=True)
class Lattice:
    """Hypercubic torus with ``dims`` sites per direction and spacing ``spacing``."""

    dims: tuple
    spacing: float = 1.0

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if len(dims) != 4:
            raise ValueError(f"expected 4 dimensions, got {len(dims)}")
        if min(dims) < 4:
            raise ValueError(f"every dimension must be >= 4 for the clover stencil, got {dims}")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", float(self.spacing))

    @property
    def volume(self):
        """Number of sites."""
        return int(np.prod(self.dims))

    @property
    def extent(self):
        return np.array(self.dims, dtype=float) * self.spacing

    @property
    def physical_volume(self):
        return self.volume * self.spacing**4

    @cached_property
    def neighbours(self):
        """``(fwd, bwd)`` flat-index tables of shape (volume, 4)."""
        idx = np.arange(self.volume).reshape(self.dims)
        fwd = np.stack([np.roll(idx, -1, axis=mu).ravel() for mu in range(4)], axis=-1)
        bwd = np.stack([np.roll(idx, 1, axis=mu).ravel() for mu in range(4)], axis=-1)
        return np.ascontiguousarray(fwd), np.ascontiguousarray(bwd)

    def coordinates(self):
        """Site positions, shape ``dims + (4,)``."""
        axes = [np.arange(n) * self.spacing for n in self.dims]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def displacement(self, x0):
        """Minimal-image displacement ``x - x0`` for every site."""
        d = self.coordinates() - np.asarray(x0, dtype=float)
        ext = self.extent
        return d - ext * np.round(d / ext)

    def ball_offsets(self, radius):
        """Integer offsets within Euclidean ``radius`` (physical units)."""
        r = int(np.floor(radius / self.spacing))
        grid = np.arange(-r, r + 1)
        off = np.stack(np.meshgrid(grid, grid, grid, grid, indexing="ij"), axis=-1).reshape(-1, 4)
        keep = np.sum(off**2, axis=1) * self.spacing**2 <= radius**2 + 1e-12
        return off[keep]


def _check_links(lattice, links):
    shape = lattice.dims + (4, 4)
    if links.shape != shape:
        raise ValueError(f"links must have shape {shape}, got {links.shape}")


@dataclass
class GaugeField:
    """Link variables ``U_mu(x)`` as unit quaternions, shape ``dims + (4, 4)``."""

    lattice: Lattice
    links: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.links = np.ascontiguousarray(self.links, dtype=float)
        _check_links(self.lattice, self.links)

    @property
    def flat(self):
        return self.links.reshape(-1, 4, 4)

    def copy(self):
        return GaugeField(self.lattice, self.links.copy())

    def translate(self, shift):
        """Periodic translation by an integer site vector."""
        links = self.links
        for mu, s in enumerate(shift):
            links = np.roll(links, int(s), axis=mu)
        return GaugeField(self.lattice, links)

    def reflect(self, axis=0):
        """Orientation reversal ``x_axis -> -x_axis``."""
        links = np.flip(self.links, axis=axis)
        links = np.roll(links, 1, axis=axis).copy()
        # the reversed link starts one site further along
        along = np.roll(links[..., axis, :], -1, axis=axis)
        links[..., axis, :] = lie.conj(along)
        return GaugeField(self.lattice, links)


@dataclass
class GaugeTransform:
    """Site-wise SU(2) elements ``g(x)``, shape ``dims + (4,)``."""

    lattice: Lattice
    g: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.g = np.ascontiguousarray(self.g, dtype=float)
        if self.g.shape != self.lattice.dims + (4,):
            raise ValueError("gauge transform has the wrong shape")

    def inverse(self):
        return GaugeTransform(self.lattice, lie.conj(self.g))


@dataclass
class ConnectionField:
    """Noncompact connection ``a_mu(x)`` as algebra coefficients, shape ``dims + (4, 3)``."""

    lattice: Lattice
    a: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        if self.a.shape != self.lattice.dims + (4, 3):
            raise ValueError("connection has the wrong shape")
        if not np.all(np.isfinite(self.a)):
            raise ValueError("connection has non-finite entries")


def cold_start(lat):
    links = np.zeros(lat.dims + (4, 4))
    links[..., 0] = 1.0
    return GaugeField(lat, links)


def hot_start(lat, seed, magnitude):
    """Links ``exp(xi)`` with ``xi`` uniform in the algebra ball of radius ``magnitude``."""
    if magnitude < 0:
        raise ValueError("magnitude must be non-negative")
    rng = np.random.default_rng(seed)
    xi = lie.random_algebra_ball(rng, lat.dims + (4,), magnitude)
    return GaugeField(lat, lie.exp_map(xi))


def sample_continuum(lat, A):
    """Midpoint rule ``U_mu(x) = exp(a * A(x + a mu/2, mu))``.

    ``A(positions, mu)`` receives positions of shape ``dims + (4,)`` and returns
    algebra coefficients of shape ``dims + (3,)``.
    """
    a = lat.spacing
    x = lat.coordinates()
    links = np.empty(lat.dims + (4, 4))
    for mu in range(4):
        mid = x.copy()
        mid[..., mu] += 0.5 * a
        c = np.asarray(A(mid, mu), dtype=float)
        if not np.all(np.isfinite(c)):
            raise ValueError(f"continuum field is not finite in direction {mu}")
        links[..., mu, :] = lie.exp_map(a * c)
    return GaugeField(lat, links)


def apply_gauge(U, g):
    """``U'_mu(x) = g(x) U_mu(x) g(x + mu)^-1``."""
    if U.lattice != g.lattice:
        raise LatticeMismatch("gauge transform and field live on different lattices")
    links = np.empty_like(U.links)
    for mu in range(4):
        g_next = np.roll(g.g, -1, axis=mu)
        links[..., mu, :] = lie.group_mul(lie.group_mul(g.g, U.links[..., mu, :]), lie.conj(g_next))
    return GaugeField(U.lattice, links)


def random_gauge(lat, seed):
    rng = np.random.default_rng(seed)
    return GaugeTransform(lat, lie.random_group(rng, lat.dims))


# -- instantons -------------------------------------------------------------
#
# 't Hooft ansatz A_mu = 1/2 sum_nu d_nu(ln W) Im(e_mu conj(e_nu)) with
# W = 1 + sum_i rho_i^2 h(y - c_i).  With h = 1/|y|^2 this is the singular-gauge
# multi-instanton on R^4.  On the torus h is replaced by the periodic
# inverse-square function (Ewald sum), which keeps the field smooth across the
# cell boundary; the non-self-dual remainder is O(rho^2 / volume).

_EWALD_S = 10.0  # splitting parameter times L_min^2


def _qv(y, anti):
    q = np.array(y, dtype=float, copy=True)
    if anti:
        q[..., 1:] *= -1.0
    return q


def _basis(anti):
    return [_qv(np.eye(4)[mu], anti) for mu in range(4)]


def _inverse_square(lat, center, periodic):
    """``h`` and its gradient at every link midpoint, shape ``(4,) + dims`` / ``(4,) + dims + (4,)``."""
    a = lat.spacing
    ext = lat.extent
    h = np.zeros((4,) + lat.dims)
    grad = np.zeros((4,) + lat.dims + (4,))
    mids = []
    for mu in range(4):
        shift = np.zeros(4)
        shift[mu] = 0.5 * a
        mids.append(lat.displacement(np.asarray(center) - shift))
    if not periodic:
        for mu, y in enumerate(mids):
            r2 = np.sum(y**2, axis=-1)
            h[mu] = 1.0 / r2
            grad[mu] = -2.0 * y / r2[..., None] ** 2
        return h, grad, 0.0

    s = _EWALD_S / ext.min() ** 2
    images = np.stack(np.meshgrid(*[[-1, 0, 1]] * 4, indexing="ij"), axis=-1).reshape(-1, 4)
    for mu, y in enumerate(mids):
        for n in images:
            d = y + n * ext
            r2 = np.sum(d**2, axis=-1)
            e = np.exp(-s * r2)
            h[mu] += e / r2
            # d/dy [exp(-s r^2) / r^2] = -2 y exp(-s r^2) (s r^2 + 1) / r^4
            grad[mu] += (-2.0 * e * (s * r2 + 1.0) / r2**2)[..., None] * d

    # reciprocal part on the doubled grid, sampled at midpoints
    grid = tuple(2 * n for n in lat.dims)
    ks = np.meshgrid(
        *[2.0 * np.pi * np.fft.fftfreq(m, d=0.5 * a) for m in grid], indexing="ij"
    )
    k2 = sum(k**2 for k in ks)
    k2[(0,) * 4] = 1.0
    coef = 4.0 * np.pi**2 / k2 * np.exp(-k2 / (4.0 * s)) / np.prod(ext)
    coef[(0,) * 4] = 0.0
    phase = np.exp(-1j * sum(k * c for k, c in zip(ks, center)))
    npts = np.prod(grid)
    spec = coef * phase * npts
    h_rec = np.real(np.fft.ifftn(spec))
    g_rec = [np.real(np.fft.ifftn(1j * k * spec)) for k in ks]
    for mu in range(4):
        sl = tuple(slice(1, None, 2) if nu == mu else slice(0, None, 2) for nu in range(4))
        h[mu] += h_rec[sl]
        for nu in range(4):
            grad[mu][..., nu] += g_rec[nu][sl]
    # regular part of h at the pole: lim (h - 1/r^2)
    others = images[np.any(images != 0, axis=1)] * ext
    r2 = np.sum(others**2, axis=-1)
    h_pole = -s + float(np.sum(np.exp(-s * r2) / r2)) + float(np.sum(coef))
    return h, grad, h_pole


def _site_gauge(y, anti):
    # any value is admissible on the pole site itself: the transform is exact
    q = _qv(y, anti)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    on_pole = n[..., 0] < 1e-12
    q[on_pole] = lie.IDENTITY
    n[on_pole] = 1.0
    return q / n


def thooft_field(lat, centers, scales, anti=False, periodic=True):
    """Multi-instanton links from the 't Hooft ansatz, all of one charge sign.

    Near each pole the midpoint rule is applied in regular gauge and the
    result conjugated back by the site transform ``g = y/|y|``; the lattice
    transform is exact, so cores are resolved without sampling the singularity.
    """
    a = lat.spacing
    centers = [np.asarray(c, dtype=float) for c in centers]
    scales = [float(r) for r in scales]
    basis = _basis(anti)
    parts = [_inverse_square(lat, c, periodic) for c in centers]
    # anchor each term so that W = 1 + rho^2 / r^2 + O(r^2) near its pole
    W = 1.0 + sum(r**2 * (h - h0) for r, (h, _, h0) in zip(scales, parts))
    if np.min(W) <= 0.0:
        raise ValueError("instanton scale too large for the box: 't Hooft potential not positive")
    dlnW = sum(r**2 * g for r, (_, g, _) in zip(scales, parts)) / W[..., None]

    links = np.empty(lat.dims + (4, 4))
    site_disp = [lat.displacement(c) for c in centers]
    for mu in range(4):
        pure = np.zeros(lat.dims + (4,))
        for nu in range(4):
            if nu == mu:
                continue
            e = lie.group_mul(basis[mu], lie.conj(basis[nu]), renormalize=False)
            pure += 0.5 * dlnW[mu][..., nu, None] * e
        pure[..., 0] = 0.0
        u = lie.exp_map(a * lie.project_quaternion(pure))

        # regular-gauge resampling inside each core
        mid_d = [d.copy() for d in site_disp]
        for d in mid_d:
            d[..., mu] += 0.5 * a
        dist = np.stack([np.linalg.norm(d, axis=-1) for d in mid_d])
        nearest = np.argmin(dist, axis=0)
        for i, (d0, dm) in enumerate(zip(site_disp, mid_d)):
            inside = (nearest == i) & (dist[i] < max(scales[i], 2.0 * a))
            if not np.any(inside):
                continue
            y0 = d0[inside]
            ym = dm[inside]
            y1 = y0.copy()
            y1[:, mu] += a
            g0 = _site_gauge(y0, anti)
            g1 = _site_gauge(y1, anti)
            gm = lie.normalize(_qv(ym, anti))
            m2 = np.sum(ym**2, axis=-1, keepdims=True)
            # g^-1 d_mu g = Im(conj(qv(y)) qv(e_mu)) / |y|^2
            pure_g = lie.group_mul(lie.conj(_qv(ym, anti)), basis[mu], renormalize=False) / m2
            pure_g[..., 0] = 0.0
            p_in = pure[inside]
            rot = lie.group_mul(lie.group_mul(lie.conj(gm), p_in, renormalize=False), gm, renormalize=False)
            reg = rot + pure_g
            reg[..., 0] = 0.0
            u_reg = lie.exp_map(a * lie.project_quaternion(reg))
            u[inside] = lie.group_mul(lie.group_mul(g0, u_reg), lie.conj(g1))
        links[..., mu, :] = u
    return GaugeField(lat, links)


def default_center(lat):
    """The site nearest the middle of the box."""
    return np.array([n // 2 for n in lat.dims], dtype=float) * lat.spacing


def instanton(lat, center=None, scale=None, anti=False, periodic=True):
    """Unit-charge instanton (``anti=True`` for charge -1)."""
    if scale is None:
        scale = lat.extent.min() / 4.0
    if center is None:
        center = default_center(lat)
    return thooft_field(lat, [center], [scale], anti=anti, periodic=periodic)


def superpose(*fields):
    """Link-wise product of fields."""
    links = fields[0].links
    for f in fields[1:]:
        if f.lattice != fields[0].lattice:
            raise LatticeMismatch("cannot superpose fields on different lattices")
        links = lie.group_mul(links, f.links)
    return GaugeField(fields[0].lattice, links)
