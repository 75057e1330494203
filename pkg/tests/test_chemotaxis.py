import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kscert.chemotaxis import (FieldState, InitialData, SchemeConfig, c_step, cfl_limit, n_step,
                               simulate, transport_rates)
from kscert.errors import BlowUpError, CflError, DomainError
from kscert.grid import Grid, divergence, integrate
from kscert.params import ModelParams
from kscert.stokes import PotentialSpec

PARAMS = ModelParams(chi=1.0, eps=0.1, p=0.3, q=0.3)
FAST = SchemeConfig(T=0.05)


def state_from(grid, n, c, u=None):
    return FieldState(n, c, u if u is not None else grid.zeros_velocity(), np.zeros(grid.shape))


class TestInitialData:
    def test_gaussian_mass(self):
        g = Grid(32, 32)
        s = InitialData(mass=2.5).build(g)
        assert integrate(s.n, g) == pytest.approx(2.5, rel=1e-14)
        assert np.all(s.c == 1.0) and s.t == 0.0

    def test_two_bumps_and_perturbation(self):
        g = Grid(16, 16)
        assert integrate(InitialData("two_bumps", mass=1.0).build(g).n, g) == pytest.approx(1.0)
        n = InitialData("uniform_plus_perturbation", mean=2.0, amplitude=0.5).build(g).n
        assert n.mean() == pytest.approx(2.0) and n.min() > 0

    def test_signal_profile(self):
        g = Grid(16, 4)
        c = InitialData(c0_floor=0.5, c0_amplitude=2.0).build(g).c
        assert c.min() >= 0.5 and c.max() <= 2.5 and c[0, 0] > c[-1, 0]

    def test_vortex_divergence_free(self):
        g = Grid(20, 16)
        s = InitialData(u0="vortex", u0_amplitude=3.0).build(g)
        assert np.abs(divergence(s.u, g)).max() < 1e-12
        assert np.all(s.u[0][0] == 0) and np.all(s.u[1][:, -1] == 0)
        assert max(np.abs(ua).max() for ua in s.u) > 1.0

    @pytest.mark.parametrize("kw", [dict(preset="ring"), dict(c0_floor=0.0), dict(u0="shear"),
                                    dict(preset="sampled"),
                                    dict(preset="sampled", n_values=-np.ones((4, 4))),
                                    dict(preset="sampled", n_values=np.zeros((4, 4)))])
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            InitialData(**kw).build(Grid(4, 4))

    def test_zero_density_allowed_on_request(self):
        s = InitialData("sampled", n_values=np.zeros((4, 4)), allow_zero_n=True).build(Grid(4, 4))
        assert np.all(s.n == 0)


class TestSteps:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.floats(1e-3, 0.99))
    def test_mass_and_positivity(self, seed, eps):
        g = Grid(16, 16)
        rng = np.random.default_rng(seed)
        n = rng.random(g.shape) * 5
        c = 0.5 + rng.random(g.shape)
        state = state_from(g, n, c, InitialData(u0="vortex", u0_amplitude=1.0).build(g).u)
        params = ModelParams(chi=1.5, eps=eps, p=0.3, q=0.3)
        dt = 0.9 * cfl_limit(state, params, g)
        n_new = n_step(state, params, dt, g)
        assert abs(integrate(n_new, g) - integrate(n, g)) <= 1e-12 * integrate(n, g)
        assert n_new.min() >= 0
        c_new = c_step(FieldState(n_new, c, state.u, state.P), dt, g)
        assert c_new.min() > 0

    def test_signal_decays_exactly_without_cells(self):
        g = Grid(8, 8)
        c = np.full(g.shape, 2.0)
        for _ in range(10):
            c = c_step(state_from(g, np.zeros(g.shape), c), 0.1, g)
        assert np.allclose(c, 2.0 / 1.1 ** 10, rtol=1e-13)
        assert c.min() >= 2.0 * math.exp(-1.0) * 0.99

    def test_uniform_state_ode_first_order(self):
        # uniform n = 1: c' = 1 - c, so c(t) = 1 + (c0 - 1) exp(-t)
        errs = []
        for dt in (0.1, 0.05, 0.025):
            g = Grid(4, 4)
            c = np.full(g.shape, 3.0)
            for _ in range(int(round(1.0 / dt))):
                c = c_step(state_from(g, np.ones(g.shape), c), dt, g)
            errs.append(abs(c[0, 0] - (1 + 2 * math.exp(-1.0))))
        assert 1.8 < errs[0] / errs[1] < 2.2 and 1.8 < errs[1] / errs[2] < 2.2

    def test_uniform_signal_leaves_density_still(self):
        g = Grid(8, 8)
        n = np.full(g.shape, 1.7)
        assert np.allclose(n_step(state_from(g, n, np.full(g.shape, 2.0)), PARAMS, 0.1, g), 1.7)

    def test_saturation_slows_aggregation(self):
        g = Grid(16, 16)
        x, y = g.centers()
        n = 50 * np.exp(-((x - 0.5) ** 2 + (y - 0.5) ** 2) / 0.02) + 1
        c = 1 + np.exp(-((x - 0.5) ** 2 + (y - 0.5) ** 2) / 0.05)
        s = state_from(g, n, c)
        dt = 0.5 * cfl_limit(s, PARAMS, g)
        lin = n_step(s, ModelParams(chi=1.0, eps=1e-3, p=0.3, q=0.3), dt, g) - n
        sat = n_step(s, ModelParams(chi=1.0, eps=0.99, p=0.3, q=0.3), dt, g) - n
        # weaker inflow at the peak, so diffusion lowers it further
        assert sat[8, 8] < lin[8, 8]

    def test_cfl_violation(self):
        g = Grid(16, 16)
        x, _ = g.centers()
        s = state_from(g, np.ones(g.shape), 1 + np.cos(math.pi * x) * 0.9)
        with pytest.raises(CflError) as exc:
            n_step(s, PARAMS, 3.0 * cfl_limit(s, PARAMS, g), g)
        assert exc.value.cell is not None

    def test_rates_zero_at_rest(self):
        g = Grid(6, 6)
        s = state_from(g, np.ones(g.shape), np.ones(g.shape))
        assert np.all(transport_rates(s, PARAMS, g) == 0) and cfl_limit(s, PARAMS, g) == math.inf


class TestSimulate:
    def test_runs_and_conserves(self):
        g = Grid(24, 24)
        traj = simulate(PARAMS, g, InitialData(), SchemeConfig(T=0.1, snapshot_stride=1))
        assert traj.completed and traj.times[-1] == pytest.approx(0.1)
        masses = [r.mass_n for r in traj.records]
        assert max(abs(m - masses[0]) for m in masses) <= 1e-12 * masses[0]
        assert min(r.min_n for r in traj.records) >= 0
        assert all(r.min_c >= r.c_envelope * (1 - 1e-12) for r in traj.records)
        assert all(r.max_div_u < 1e-8 for r in traj.records)
        assert len(traj.states) == len(traj.records) == traj.metadata["steps"] + 1

    def test_default_step_is_mesh_capped(self):
        g = Grid(32, 32)
        traj = simulate(PARAMS, g, InitialData(), SchemeConfig(T=0.05))
        assert traj.metadata["dt_max"] <= 0.25 / 32 + 1e-15
        assert all(r.cfl_used <= 0.4 + 1e-12 for r in traj.records)

    def test_stride_zero_keeps_endpoints(self):
        g = Grid(16, 16)
        traj = simulate(PARAMS, g, InitialData(), SchemeConfig(T=0.05))
        assert len(traj.states) == 2 and traj.times == [0.0, pytest.approx(0.05)]

    def test_mirror_symmetry(self):
        # a centred bump with zero potential stays mirror-symmetric
        g = Grid(24, 24)
        traj = simulate(PARAMS, g, InitialData(center=(0.5, 0.5)), SchemeConfig(T=0.1),
                        potential=PotentialSpec("linear", (0.0, 0.0)))
        n = traj.states[-1].n
        assert np.allclose(n, n[::-1, :], atol=1e-12) and np.allclose(n, n.T, atol=1e-12)

    def test_fixed_step_cfl_failure_keeps_partial_trajectory(self):
        g = Grid(16, 16)
        init = InitialData(c0_floor=0.05, c0_amplitude=3.0)
        traj = simulate(ModelParams(chi=2.0, eps=0.1, p=0.3, q=0.3), g, init,
                        SchemeConfig(dt=0.2, T=1.0))
        assert not traj.completed
        assert traj.failure["reason"] == "CflError" and traj.failure["step"] == 1
        assert len(traj.records) == 1 and len(traj.failure["cell"]) == 2
        with pytest.raises(CflError):
            traj.raise_if_failed()

    def test_blowup_threshold(self):
        g = Grid(8, 8)
        traj = simulate(PARAMS, g, InitialData(mass=10.0), SchemeConfig(T=0.05, blowup_threshold=1.0))
        assert traj.failure["reason"] == "BlowUpError"
        assert isinstance(traj.error, BlowUpError)

    def test_deterministic_reruns_identical(self):
        g = Grid(16, 16)
        scheme = SchemeConfig(T=0.05, deterministic=True)
        a = simulate(PARAMS, g, InitialData(), scheme)
        b = simulate(PARAMS, g, InitialData(), scheme)
        assert a.records == b.records

    def test_scheme_validation(self):
        for kw in (dict(dt=-1.0), dict(dt="fast"), dict(T=0.0), dict(cfl_factor=1.5), dict(snapshot_stride=-2)):
            with pytest.raises(DomainError):
                SchemeConfig(**kw)

    def test_initial_state_override(self):
        g = Grid(8, 8)
        s = InitialData().build(g)
        s.n = s.n * 2
        traj = simulate(PARAMS, g, InitialData(), SchemeConfig(T=0.02), initial_state=s)
        assert traj.records[0].mass_n == pytest.approx(2 * integrate(InitialData().build(g).n, g))


def test_strongly_saturated_acceptance_run_completes():
    # eps must stay below 1; 0.99 stands in for full saturation
    params = ModelParams(chi=2.0, eps=0.99, p=0.2, q=0.3)
    traj = simulate(params, Grid(64, 64), InitialData(), SchemeConfig(T=0.5))
    assert traj.completed
    assert max(r.cfl_used for r in traj.records) <= 0.4 + 1e-12
