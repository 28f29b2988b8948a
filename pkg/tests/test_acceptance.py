"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are repeated
in the terminal summary.
"""

import numpy as np
import pytest
from scipy.integrate import simpson

from ymflow import cli, deturck, flow, io, lie, monitor
from ymflow.action import alpha_action, clover_density, topological_charge
from ymflow.config import ConfigError, parse_config
from ymflow.flow import FlowParams
from ymflow.lattice import GaugeField, Lattice, apply_gauge, hot_start, instanton, random_gauge, thooft_field
from ymflow.monitor import SnapshotSeries

pytestmark = pytest.mark.acceptance


def test_criterion_01_gradient_exactness(criterion):
    lat = Lattice((4,) * 4)
    rng = np.random.default_rng(1)
    eps = 1e-5
    worst = 0.0
    for seed in range(100):
        U = hot_start(lat, 1000 + seed, 0.3)
        x = tuple(int(i) for i in rng.integers(0, 4, 4))
        mu = int(rng.integers(4))
        X = rng.normal(size=3)
        for alpha in (1.0, 1.05, 1.2):
            Z = flow.force(U, alpha).Z
            s = []
            for sign in (1, -1):
                links = U.links.copy()
                links[x + (mu,)] = lie.group_mul(lie.exp_map(sign * eps * X), links[x + (mu,)])
                s.append(alpha_action(GaugeField(lat, links), alpha))
            fd = (s[0] - s[1]) / (2 * eps)
            exact = lie.inner(X, Z[x + (mu,)]) * lat.spacing**4
            worst = max(worst, abs(fd - exact) / abs(exact))
    ok = criterion(1, worst < 1e-6, f"gradient vs central difference, worst relative error {worst:.2e} (< 1e-6)")
    assert ok


def test_criterion_02_energy_identity(criterion):
    lat = Lattice((8,) * 4)
    U = hot_start(lat, 0, 0.3)
    _, trace = flow.run_flow(U, FlowParams(1.1, 0.001, 2.0, integrator="rk3"))
    t = np.array([r.t for r in trace])
    s = np.array([r.action for r in trace])
    drop = s[0] - s[-1]
    integral = simpson([r.dissipation for r in trace], x=t)
    excess = s[0] - lat.physical_volume
    err = abs(drop - integral) / excess
    monotone = bool(np.all(np.diff(s) <= 0))
    ok = criterion(2, err <= 1e-4 and monotone,
                   f"|dS - int D| / (S(0) - vacuum) = {err:.2e} (<= 1e-4), non-increasing: {monotone}")
    assert ok


def test_criterion_03_gauge_covariance(criterion):
    lat = Lattice((6,) * 4)
    # a rough start keeps |F|^2 of order 1 after 200 steps
    U = hot_start(lat, 5, 3.0)
    V = apply_gauge(U, random_gauge(lat, 6))
    p = FlowParams(1.1, 0.01, 2.0, integrator="rk3")
    FU, _ = flow.run_flow(U, p)
    FV, _ = flow.run_flow(V, p)
    dens = clover_density(FU)
    diff = float(np.max(np.abs(dens - clover_density(FV))))
    ok = criterion(3, diff < 1e-9, f"density of flow(gauge U) vs flow(U) after 200 steps, max diff {diff:.2e} (< 1e-9), "
                                   f"max density {np.max(dens):.2f}")
    assert ok


def test_criterion_04_alpha_one_is_wilson(criterion):
    worst = 0.0
    for seed, (dims, mag) in enumerate([((4,) * 4, 0.3), ((6,) * 4, 0.9), ((4, 4, 6, 8), 2.0)]):
        U = hot_start(Lattice(dims, 0.7 if seed == 2 else 1.0), seed, mag)
        worst = max(worst, float(np.max(np.abs(flow.force(U, 1.0).Z - flow.wilson_force(U).Z))))
    ok = criterion(4, worst < 1e-12, f"alpha = 1 force vs Wilson staple force, max diff {worst:.2e} (< 1e-12)")
    assert ok


def test_criterion_05_deturck_equivalence(criterion):
    norms = cli.deturck_refinement((6,) * 4, 1.0, "smooth", 0.2, 1.05, 1 / 32, 1.0)
    ratio = norms[0] / norms[1]
    lat = Lattice((16, 4, 4, 4))
    t = 2.0
    rates = []
    for k in (1, 2, 4):
        _, m, _ = deturck.evolve_pair(deturck.abelian_mode(lat, 1e-3, k=k, mu=1), 1.0, 1 / 16, t)
        x = lat.coordinates()[..., 0]
        s = np.sin(2 * np.pi * k * x / lat.extent[0])
        amp = np.sum(m.a.a[..., 1, 2] * s) / np.sum(s * s)
        rate = -np.log(amp / 1e-3) / t
        rates.append(abs(rate / deturck.laplacian_eigenvalue(lat, k) - 1))
    ok = 2.5 <= ratio <= 6 and max(rates) < 0.01
    criterion(5, ok, f"halving ratio {ratio:.2f} (in [2.5, 6]), abelian decay rate error {max(rates):.1e} (< 1%)")
    assert ok


def decaying_series(lat, alpha, seed=0, amp=0.5):
    conns, times = [deturck.smooth_connection(lat, seed, amp)], [0.0]
    for k in range(16):
        d, _, _ = deturck.evolve_pair(conns[-1], alpha, 1 / 16, 1.0)
        conns.append(d.a)
        times.append(k + 1.0)
    return SnapshotSeries.from_connections(conns, times, alpha)


def test_criterion_06_monotonicity(criterion):
    lat = Lattice((16,) * 4)
    R = 8.0
    errs = []
    for alpha in (1.0, 1.1):
        s = SnapshotSeries(lat, [0.0, 128.0, 256.0], np.ones((3,) + lat.dims), alpha)
        val = monitor.phi_alpha(s, (8, 8, 8, 8), 256.0, R, 8.0).value
        errs.append(abs(val / (3 * R ** (4 * alpha)) - 1))
    small = Lattice((8,) * 4)
    s = decaying_series(small, 1.05)
    radii = [1.0, 1.5, 2.0]
    smooth = monitor.check_monotonicity(s, (0, 0, 0, 0), 16.0, radii)
    r2 = np.sum(small.displacement(np.zeros(4)) ** 2, axis=-1)
    dens = s.densities + 500.0 * (s.times[:, None, None, None, None] / 16.0) ** 4 * np.exp(-r2 / 0.5)
    adv = monitor.check_monotonicity(SnapshotSeries(small, s.times, dens, 1.05), (0, 0, 0, 0), 16.0, radii)
    ok = max(errs) < 0.02 and smooth.passed and adv.C > smooth.C
    criterion(6, ok, f"flat Phi error {max(errs):.1e} (< 2%), smooth C = {smooth.C:.2e} passes: {smooth.passed}, "
                     f"adversarial C = {adv.C:.2e}")
    assert ok


def test_criterion_07_epsilon_detector(criterion):
    lat = Lattice((16,) * 4)
    U = thooft_field(lat, [np.array([4.0] * 4), np.array([12.0] * 4)], [4.0, 1.0])
    s = SnapshotSeries.from_fields([U], [0.0], 1.0)
    sites = monitor.epsilon_detector(s, 2.0).sites()
    core = (12, 12, 12, 12) in sites
    far = (8, 8, 8, 8) in sites or (0, 8, 0, 8) in sites or (4, 12, 4, 12) in sites
    sets = [monitor.epsilon_detector(s, 2.0, e).sites() for e in (1.0, 5.0, 11.0, 30.0, 100.0)]
    antitone = all(b <= a for a, b in zip(sets, sets[1:]))
    ok = core and not far and antitone
    criterion(7, ok, f"small core flagged: {core}, flat region flagged: {far}, antitone in epsilon0: {antitone}")
    assert ok


def test_criterion_08_gap(criterion):
    lat = Lattice((8,) * 4)
    verdicts = [monitor.gap_check(hot_start(lat, seed, 0.05), 1.1, 1e-8) for seed in range(20)]
    n_flat = sum(v.verdict == "FLAT" and v.ym < 1e-8 * lat.physical_volume for v in verdicts)
    ilat = Lattice((12,) * 4, 0.35)
    U = instanton(ilat, scale=4 * 0.35)
    q0 = topological_charge(U)
    inst = monitor.gap_check(U, 1.1, 1e-8, max_steps=300)
    dq = abs(inst.charge - q0)
    ok = n_flat == 20 and inst.verdict == "NONFLAT" and dq < 0.05
    criterion(8, ok, f"hot starts FLAT {n_flat}/20, instanton {inst.verdict} with |dQ| = {dq:.3f} (< 0.05)")
    assert ok


@pytest.mark.slow
def test_criterion_09_continuation(criterion):
    alphas = [1.2, 1.1, 1.05, 1.02]
    lat = Lattice((16,) * 4, 0.35)
    res = monitor.alpha_continuation(instanton(lat, scale=4 * 0.35), alphas, 1e-6, max_steps=1500)
    qs = [e.charge for e in res.entries]
    resolved = res.verdict == "strong"
    ulat = Lattice((16,) * 4)
    under = monitor.alpha_continuation(instanton(ulat, scale=2.0), alphas, 1e-6, max_steps=1500)
    concentration = under.verdict == "concentration"
    ok = resolved and concentration
    criterion(9, ok, f"resolved: verdict {res.verdict} (want strong), Q {min(qs):.2f}..{max(qs):.2f}, "
                     f"sup|F|^2 {[round(e.sup_f2, 1) for e in res.entries]}; "
                     f"under-resolved: verdict {under.verdict} (want concentration)")
    assert ok


HOT = """
lattice: {dims: [6, 6, 6, 6]}
initial: {kind: hot, params: {magnitude: 0.4}}
flow: {alpha: 1.1, dt: 0.01, t_end: 0.3, record_every: 3}
seed: 11
"""


def test_criterion_10_infrastructure(criterion, tmp_path):
    U = hot_start(Lattice((4, 6, 4, 8), 0.8), 7, 1.2)
    io.write_snapshot(tmp_path / "s.ymaf", U, t=0.75, alpha=1.05)
    V, t, alpha = io.read_snapshot(tmp_path / "s.ymaf")
    bits = V.links.tobytes() == U.links.tobytes() and (t, alpha) == (0.75, 1.05) and V.lattice == U.lattice
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(HOT)
    traces = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        cli.main(["run", "--config", str(cfg), "--out", str(out), "--threads", "1", "--seed", "11"])
        traces.append((out / "trace.ndjson").read_bytes())
    deterministic = traces[0] == traces[1] and len(traces[0]) > 0
    try:
        parse_config(HOT + "flow_extra: 1\n")
        rejects = False
    except ConfigError:
        rejects = True
    ok = bits and deterministic and rejects
    criterion(10, ok, f"snapshot bit-identical: {bits}, traces deterministic: {deterministic}, unknown key rejected: {rejects}")
    assert ok
