"""Analytic test functions with exact derivatives.

Scalar test functions are products of a cosine mode (zero normal derivative
on every wall of the rectangle) and a smooth time profile.  Solenoidal ones
are curls of ``sin^2`` stream functions, hence vanish on the walls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class TimeProfile:
    """Smooth cutoff eta(t).

    ``window=None`` gives eta = 1 for all t.  For ``t0 == 0`` the profile is
    the right half of the standard bump, so eta(0) = 1 and eta vanishes with
    all derivatives at t1; otherwise it is the full bump supported in (t0, t1).
    """

    t0: float | None = None
    t1: float | None = None

    def __post_init__(self):
        if (self.t0 is None) != (self.t1 is None):
            raise DomainError("time window needs both ends")
        if self.t0 is not None and not (0 <= self.t0 < self.t1):
            raise DomainError(f"bad time window ({self.t0}, {self.t1})")

    @property
    def constant(self) -> bool:
        return self.t0 is None

    def _tau(self, t):
        t = np.asarray(t, dtype=float)
        if self.t0 == 0:
            return t / self.t1, 1.0 / self.t1
        mid, half = 0.5 * (self.t0 + self.t1), 0.5 * (self.t1 - self.t0)
        return (t - mid) / half, 1.0 / half

    def value(self, t) -> np.ndarray | float:
        if self.constant:
            return np.ones_like(np.asarray(t, dtype=float)) if np.ndim(t) else 1.0
        tau, _ = self._tau(t)
        inside = np.abs(tau) < 1
        if self.t0 == 0:
            inside &= tau >= 0
        safe = np.where(inside, tau, 0.0)
        out = np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe * safe)), 0.0)
        return float(out) if out.ndim == 0 else out

    def derivative(self, t) -> np.ndarray | float:
        if self.constant:
            return np.zeros_like(np.asarray(t, dtype=float)) if np.ndim(t) else 0.0
        tau, dtau = self._tau(t)
        inside = np.abs(tau) < 1
        if self.t0 == 0:
            inside &= tau >= 0
        safe = np.where(inside, tau, 0.0)
        eta = np.exp(1.0 - 1.0 / (1.0 - safe * safe))
        out = np.where(inside, eta * (-2.0 * safe / (1.0 - safe * safe) ** 2) * dtau, 0.0)
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        return {"t0": self.t0, "t1": self.t1}


@dataclass(frozen=True)
class TestFunction:
    """phi(x, t) = A (shift + prod_a cos(k_a pi x_a / L_a)) eta(t)."""

    __test__ = False  # not a pytest class

    modes: tuple[int, ...]
    lengths: tuple[float, ...]
    profile: TimeProfile = field(default_factory=TimeProfile)
    amplitude: float = 1.0
    nonneg: bool = True

    @property
    def shift(self) -> float:
        return 1.0 if self.nonneg else 0.0

    def _waves(self):
        return [k * math.pi / L for k, L in zip(self.modes, self.lengths)]

    def _cos_sin(self, x):
        w = self._waves()
        return [np.cos(wa * xa) for wa, xa in zip(w, x)], [np.sin(wa * xa) for wa, xa in zip(w, x)], w

    def spatial(self, x):
        cs, _, _ = self._cos_sin(x)
        return self.amplitude * (self.shift + np.prod(cs, axis=0))

    def spatial_grad(self, x):
        cs, sn, w = self._cos_sin(x)
        out = []
        for a in range(len(x)):
            term = -w[a] * sn[a]
            for b in range(len(x)):
                if b != a:
                    term = term * cs[b]
            out.append(self.amplitude * term)
        return out

    def spatial_lap(self, x):
        cs, _, w = self._cos_sin(x)
        return -self.amplitude * sum(wa * wa for wa in w) * np.prod(cs, axis=0)

    def phi(self, x, t):
        return self.spatial(x) * self.profile.value(t)

    def phi_t(self, x, t):
        return self.spatial(x) * self.profile.derivative(t)

    def grad(self, x, t):
        eta = self.profile.value(t)
        return [g * eta for g in self.spatial_grad(x)]

    def lap(self, x, t):
        return self.spatial_lap(x) * self.profile.value(t)

    def to_dict(self) -> dict:
        return {"modes": list(self.modes), "t0": self.profile.t0, "t1": self.profile.t1,
                "nonneg": self.nonneg, "amplitude": self.amplitude}


def make_cosine_phi(modes, lengths=(1.0, 1.0), window: tuple[float, float] | None = None,
                    nonneg: bool = True, amplitude: float = 1.0) -> TestFunction:
    """Cosine-mode test function; ``window=None`` means eta = 1 for all times."""
    modes = tuple(int(k) for k in modes)
    if any(k < 0 for k in modes):
        raise DomainError("mode indices must be nonnegative")
    if len(modes) != len(lengths):
        raise DomainError("one mode index per axis")
    profile = TimeProfile() if window is None else TimeProfile(*window)
    return TestFunction(modes, tuple(float(L) for L in lengths), profile, amplitude, nonneg)


@dataclass(frozen=True)
class SolenoidalTestField:
    """psi = (dS/dy, -dS/dx[, 0]) eta(t) with S = prod_a sin^2(pi k_a x_a / L_a)."""

    modes: tuple[int, ...]
    lengths: tuple[float, ...]
    profile: TimeProfile = field(default_factory=TimeProfile)
    amplitude: float = 1.0

    def _factors(self, x):
        w = [k * math.pi / L for k, L in zip(self.modes, self.lengths)]
        s = [np.sin(wa * xa) ** 2 for wa, xa in zip(w, x)]
        ds = [wa * np.sin(2 * wa * xa) for wa, xa in zip(w, x)]
        d2s = [2 * wa * wa * np.cos(2 * wa * xa) for wa, xa in zip(w, x)]
        d3s = [-4 * wa ** 3 * np.sin(2 * wa * xa) for wa, xa in zip(w, x)]
        return s, ds, d2s, d3s

    def _deriv(self, x, orders):
        # product of per-axis derivatives of sin^2 with the given orders
        table = self._factors(x)
        out = self.amplitude
        for a, k in enumerate(orders):
            out = out * table[k][a]
        return out

    def spatial(self, x):
        dim = len(x)
        e = [0] * dim
        oy, ox = list(e), list(e)
        oy[1] = 1
        ox[0] = 1
        comps = [self._deriv(x, oy), -self._deriv(x, ox)]
        if dim == 3:
            comps.append(np.zeros_like(comps[0]))
        return comps

    def spatial_lap(self, x):
        dim = len(x)
        out = []
        for comp, (base_axis, sign) in enumerate([(1, 1.0), (0, -1.0)]):
            total = 0.0
            for b in range(dim):
                orders = [0] * dim
                orders[base_axis] += 1
                orders[b] += 2
                total = total + self._deriv(x, orders)
            out.append(sign * total)
        if dim == 3:
            out.append(np.zeros_like(out[0]))
        return out

    def psi(self, x, t):
        eta = self.profile.value(t)
        return [c * eta for c in self.spatial(x)]

    def psi_t(self, x, t):
        deta = self.profile.derivative(t)
        return [c * deta for c in self.spatial(x)]

    def grad(self, x, t):
        """Jacobian rows d psi_i / d x_j."""
        dim = len(x)
        eta = self.profile.value(t)
        rows = []
        for base_axis, sign in [(1, 1.0), (0, -1.0)]:
            row = []
            for j in range(dim):
                orders = [0] * dim
                orders[base_axis] += 1
                orders[j] += 1
                row.append(sign * self._deriv(x, orders) * eta)
            rows.append(row)
        if dim == 3:
            rows.append([np.zeros_like(rows[0][0])] * 3)
        return rows

    def lap(self, x, t):
        eta = self.profile.value(t)
        return [c * eta for c in self.spatial_lap(x)]

    def to_dict(self) -> dict:
        return {"modes": list(self.modes), "t0": self.profile.t0, "t1": self.profile.t1,
                "amplitude": self.amplitude}


def make_stream_psi(modes, lengths=(1.0, 1.0), window: tuple[float, float] | None = None,
                    amplitude: float = 1.0) -> SolenoidalTestField:
    modes = tuple(int(k) for k in modes)
    if any(k < 1 for k in modes):
        raise DomainError("stream-function modes must be >= 1")
    if len(modes) != len(lengths):
        raise DomainError("one mode index per axis")
    profile = TimeProfile() if window is None else TimeProfile(*window)
    return SolenoidalTestField(modes, tuple(float(L) for L in lengths), profile, amplitude)
