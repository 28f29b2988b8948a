import numpy as np
import pytest

from ymflow import action, lie
from ymflow.lattice import GaugeField, Lattice, apply_gauge, cold_start, hot_start, instanton, random_gauge


def single_plaquette_field(lat, phi):
    """Only U_0(0) nontrivial: exp(a^2 phi T_3) makes the (0,1) plaquette at 0 equal to it."""
    U = cold_start(lat)
    links = U.links.copy()
    links[0, 0, 0, 0, 0] = lie.exp_map([0, 0, lat.spacing**2 * phi])
    return GaugeField(lat, links)


def test_kappa_small_field_series():
    # e = KAPPA/a^4 * 2 (1 - cos(a^2 phi / 2)) -> phi^2 as a^2 phi -> 0
    lat = Lattice((4, 4, 4, 4), 0.5)
    for phi in (1e-2, 1e-3):
        U = single_plaquette_field(lat, phi)
        e = action.plaquette_density(U, (0, 0, 0, 0), 0, 1)
        closed = action.KAPPA / lat.spacing**4 * 2 * (1 - np.cos(lat.spacing**2 * phi / 2))
        assert e == pytest.approx(closed, rel=1e-10)
        assert e == pytest.approx(phi**2, rel=1e-6)


def test_plaquette_errors(lat4):
    U = cold_start(lat4)
    with pytest.raises(ValueError):
        action.plaquette(U, (0, 0, 0, 0), 1, 1)
    with pytest.raises(ValueError):
        action.plaquette_density(U, (0, 0, 0, 0), 2, 1)
    with pytest.raises(ValueError):
        action.alpha_action(U, 0.9)


def test_cold_observables(lat4):
    U = cold_start(lat4)
    assert np.allclose(action.plaquette(U, (1, 2, 3, 0), 0, 3), lie.IDENTITY)
    assert action.ym_energy(U) == 0.0
    assert action.sup_curvature(U) == 0.0
    assert action.topological_charge(U) == 0.0
    assert np.all(action.clover_curvature(U).F == 0.0)


def test_alpha_one_is_vacuum_plus_ym(lat4):
    U = hot_start(lat4, 1, 0.5)
    assert action.alpha_action(U, 1.0) == pytest.approx(action.vacuum_action(lat4) + action.ym_energy(U), rel=1e-14)


def test_alpha_action_brute_force(lat4):
    U = hot_start(lat4, 2, 0.8)
    total = 0.0
    for x in np.ndindex(lat4.dims):
        rho = sum(action.plaquette_density(U, x, m, n) for m in range(4) for n in range(m + 1, 4))
        total += (1 + rho) ** 1.2
    assert action.alpha_action(U, 1.2) == pytest.approx(total, rel=1e-12)
    # convexity: (1 + r)^1.2 >= 1 + 1.2 r
    assert action.alpha_action(U, 1.2) >= action.vacuum_action(lat4) + 1.2 * action.ym_energy(U)


def test_monotone_in_alpha(lat4):
    U = hot_start(lat4, 3, 0.5)
    s = [action.alpha_action(U, a) for a in (1.0, 1.1, 1.2)]
    assert s[0] < s[1] < s[2]
    assert s[0] > action.vacuum_action(lat4)


def test_density_gauge_invariant(lat4):
    U = hot_start(lat4, 4, 0.7)
    V = apply_gauge(U, random_gauge(lat4, 5))
    assert np.max(np.abs(action.energy_density(U) - action.energy_density(V))) < 1e-12
    assert np.max(np.abs(action.clover_density(U) - action.clover_density(V))) < 1e-10


def test_curvature_antisymmetric(lat4):
    F = action.clover_curvature(hot_start(lat4, 6, 0.4))
    assert np.array_equal(F.component(2, 0), -F.component(0, 2))
    assert np.all(F.component(1, 1) == 0)


def test_clover_abelian_refinement():
    L, eps = 8.0, 0.05
    errs = []
    for n in (8, 16):
        lat = Lattice((n, 4, 4, 4), L / n)
        x = lat.coordinates()[..., 0]
        links = cold_start(lat).links.copy()
        a = lat.spacing
        links[..., 1, :] = lie.exp_map(np.stack([0 * x, 0 * x, a * eps * np.sin(2 * np.pi * x / L)], axis=-1))
        F = action.clover_curvature(GaugeField(lat, links)).component(0, 1)[..., 2]
        exact = eps * 2 * np.pi / L * np.cos(2 * np.pi * x / L)
        errs.append(np.max(np.abs(F - exact)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.25)


def test_instanton_energy_and_charge():
    lat = Lattice((16,) * 4)
    U = instanton(lat)
    assert action.ym_energy(U) == pytest.approx(action.INSTANTON_ENERGY, rel=0.25)
    assert abs(action.topological_charge(U) - 1.0) < 0.1


def test_charge_orientation_flip():
    lat = Lattice((8,) * 4)
    U = instanton(lat, scale=2.0)
    q = action.topological_charge(U)
    for axis in range(4):
        assert action.topological_charge(U.reflect(axis)) == pytest.approx(-q, abs=1e-10)


def test_charge_flip_on_random_field(lat4):
    U = hot_start(lat4, 8, 1.5)
    assert action.topological_charge(U.reflect(2)) == pytest.approx(-action.topological_charge(U), abs=1e-10)


def test_sup_at_instanton_center():
    lat = Lattice((12,) * 4)
    U = instanton(lat, scale=3.0)
    dens = action.clover_density(U)
    peak = np.array(np.unravel_index(np.argmax(dens), lat.dims))
    assert np.max(np.abs(peak - np.array(lat.dims) // 2)) <= 1


def test_sup_scaling_under_halving():
    # continuum |F|^2(0) = 96 / rho^4; the smaller core carries O(a^2/rho^2) clover artefacts
    lat = Lattice((20,) * 4)
    big = action.sup_curvature(instanton(lat, scale=6.0))
    small = action.sup_curvature(instanton(lat, scale=3.0))
    assert small / big == pytest.approx(16.0, rel=0.25)


def test_observables_consistent(lat4):
    U = hot_start(lat4, 9, 0.5)
    obs = action.observables(U, 1.1)
    assert obs["action"] == pytest.approx(action.alpha_action(U, 1.1))
    assert obs["ym"] == pytest.approx(action.ym_energy(U))
    assert obs["sup_f2"] == pytest.approx(action.sup_curvature(U))
    assert obs["charge"] == pytest.approx(action.topological_charge(U))
