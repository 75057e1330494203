import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from kscert.errors import DomainError
from kscert.grid import Grid, cell_gradient, laplacian_neumann
from kscert.testfn import TimeProfile, make_cosine_phi, make_stream_psi

X, Y, T = sp.symbols("x y t", real=True)
LX, LY = 1.0, 0.7
rng = np.random.default_rng(0)
PTS = [rng.uniform(0, LX, 25), rng.uniform(0, LY, 25)]


def sym_eta(t0, t1):
    if t0 is None:
        return sp.Integer(1)
    if t0 == 0:
        tau = T / t1
    else:
        tau = (T - (t0 + t1) / 2) / ((t1 - t0) / 2)
    return sp.exp(1 - 1 / (1 - tau ** 2))


def evaluate(expr, x, y, t):
    return sp.lambdify((X, Y, T), expr, "numpy")(x, y, t) * np.ones_like(x)


class TestTimeProfile:
    def test_constant(self):
        p = TimeProfile()
        assert p.value(3.0) == 1.0 and p.derivative(3.0) == 0.0

    def test_half_bump_starts_at_one(self):
        p = TimeProfile(0.0, 0.5)
        assert p.value(0.0) == pytest.approx(1.0)
        assert p.value(0.5) == 0.0 and p.value(0.7) == 0.0

    def test_full_bump_support(self):
        p = TimeProfile(0.1, 0.4)
        assert p.value(0.1) == 0.0 and p.value(0.4) == 0.0
        assert p.value(0.25) == pytest.approx(1.0)
        assert np.all(p.value(np.array([0.0, 0.05, 0.5])) == 0)

    @pytest.mark.parametrize("window", [(0.0, 0.5), (0.1, 0.4)])
    def test_derivative_symbolic(self, window):
        p = TimeProfile(*window)
        deta = sp.lambdify(T, sp.diff(sym_eta(*window), T))
        for t in np.linspace(window[0] + 1e-3, window[1] - 1e-3, 17):
            assert p.derivative(t) == pytest.approx(float(deta(t)), rel=1e-10, abs=1e-12)

    @pytest.mark.parametrize("window", [(0.3, 0.2), (-0.1, 0.2)])
    def test_invalid(self, window):
        with pytest.raises(DomainError):
            TimeProfile(*window)

    def test_half_window(self):
        with pytest.raises(DomainError):
            TimeProfile(0.1, None)


class TestScalarFunction:
    @pytest.mark.parametrize("modes,window,nonneg", [((1, 1), None, True), ((2, 3), (0.1, 0.4), False),
                                                      ((0, 2), (0.0, 0.5), True)])
    def test_derivatives_against_sympy(self, modes, window, nonneg):
        phi = make_cosine_phi(modes, (LX, LY), window, nonneg, amplitude=1.3)
        expr = 1.3 * ((1 if nonneg else 0) + sp.cos(modes[0] * sp.pi * X / LX) * sp.cos(modes[1] * sp.pi * Y / LY))
        expr = expr * sym_eta(*(window or (None, None)))
        t = 0.23
        assert np.allclose(phi.phi(PTS, t), evaluate(expr, *PTS, t), atol=1e-12)
        assert np.allclose(phi.phi_t(PTS, t), evaluate(sp.diff(expr, T), *PTS, t), atol=1e-10)
        gx, gy = phi.grad(PTS, t)
        assert np.allclose(gx, evaluate(sp.diff(expr, X), *PTS, t), atol=1e-10)
        assert np.allclose(gy, evaluate(sp.diff(expr, Y), *PTS, t), atol=1e-10)
        lap = sp.diff(expr, X, 2) + sp.diff(expr, Y, 2)
        assert np.allclose(phi.lap(PTS, t), evaluate(lap, *PTS, t), atol=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 5), st.integers(0, 5), st.floats(0, LY))
    def test_zero_normal_derivative(self, kx, ky, s):
        phi = make_cosine_phi((kx, ky), (LX, LY))
        for x in (0.0, LX):
            assert abs(phi.grad([np.array(x), np.array(s)], 0.0)[0]) < 1e-12
        for y in (0.0, LY):
            assert abs(phi.grad([np.array(s * LX / LY), np.array(y)], 0.0)[1]) < 1e-12

    def test_nonneg_range(self):
        phi = make_cosine_phi((3, 2), (LX, LY), nonneg=True)
        assert phi.phi(PTS, 0.0).min() >= 0

    def test_discrete_laplacian_second_order(self):
        phi = make_cosine_phi((2, 1), (LX, LY))
        errs = []
        for n in (16, 32, 64):
            g = Grid(n, n, LX, LY)
            x = g.centers()
            errs.append(np.abs(laplacian_neumann(phi.spatial(x), g) - phi.spatial_lap(x)).max())
        assert math.log2(errs[0] / errs[1]) > 1.9 and math.log2(errs[1] / errs[2]) > 1.9

    def test_discrete_gradient_interior_second_order(self):
        phi = make_cosine_phi((1, 2), (LX, LY))
        errs = []
        for n in (16, 32, 64):
            g = Grid(n, n, LX, LY)
            x = g.centers()
            gx, _ = cell_gradient(phi.spatial(x), g)
            errs.append(np.abs(gx[2:-2] - phi.spatial_grad(x)[0][2:-2]).max())
        assert math.log2(errs[0] / errs[1]) > 1.8

    def test_to_dict(self):
        d = make_cosine_phi((1, 2), window=(0.1, 0.3), nonneg=False).to_dict()
        assert d == {"modes": [1, 2], "t0": 0.1, "t1": 0.3, "nonneg": False, "amplitude": 1.0}

    @pytest.mark.parametrize("modes,lengths", [((-1, 0), (1.0, 1.0)), ((1,), (1.0, 1.0))])
    def test_invalid(self, modes, lengths):
        with pytest.raises(DomainError):
            make_cosine_phi(modes, lengths)


class TestSolenoidalField:
    @pytest.mark.parametrize("modes,window", [((1, 1), None), ((2, 1), (0.05, 0.45))])
    def test_derivatives_against_sympy(self, modes, window):
        psi = make_stream_psi(modes, (LX, LY), window, amplitude=0.7)
        S = 0.7 * sp.sin(modes[0] * sp.pi * X / LX) ** 2 * sp.sin(modes[1] * sp.pi * Y / LY) ** 2
        eta = sym_eta(*(window or (None, None)))
        comps = [sp.diff(S, Y) * eta, -sp.diff(S, X) * eta]
        t = 0.2
        vals, dts, laps, jac = psi.psi(PTS, t), psi.psi_t(PTS, t), psi.lap(PTS, t), psi.grad(PTS, t)
        for i, c in enumerate(comps):
            assert np.allclose(vals[i], evaluate(c, *PTS, t), atol=1e-12)
            assert np.allclose(dts[i], evaluate(sp.diff(c, T), *PTS, t), atol=1e-10)
            assert np.allclose(laps[i], evaluate(sp.diff(c, X, 2) + sp.diff(c, Y, 2), *PTS, t), atol=1e-8)
            for j, v in enumerate((X, Y)):
                assert np.allclose(jac[i][j], evaluate(sp.diff(c, v), *PTS, t), atol=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 4), st.integers(1, 4), st.floats(0, 1))
    def test_divergence_free_and_zero_on_walls(self, kx, ky, s):
        psi = make_stream_psi((kx, ky), (LX, LY))
        jac = psi.grad(PTS, 0.0)
        assert np.abs(jac[0][0] + jac[1][1]).max() < 1e-10
        for wall in ([np.array(0.0), np.array(s * LY)], [np.array(LX), np.array(s * LY)],
                     [np.array(s * LX), np.array(0.0)], [np.array(s * LX), np.array(LY)]):
            assert all(abs(v) < 1e-12 for v in psi.psi(wall, 0.0))

    def test_three_dimensional(self):
        psi = make_stream_psi((1, 1, 1), (1.0, 1.0, 1.0))
        pts = [rng.uniform(0, 1, 5) for _ in range(3)]
        jac = psi.grad(pts, 0.0)
        assert len(psi.psi(pts, 0.0)) == 3 and np.all(psi.psi(pts, 0.0)[2] == 0)
        assert np.abs(jac[0][0] + jac[1][1] + jac[2][2]).max() < 1e-10

    def test_modes_must_be_positive(self):
        with pytest.raises(DomainError):
            make_stream_psi((0, 1))
