"""Time stepping of the regularized cell/signal equations and the coupled driver."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import BlowUpError, CflError, DomainError, KSCertError, PositivityError
from .grid import (Grid, advect_conservative, chemotactic_flux_div, face_average, face_diff,
                   integrate, pad_boundary)
from .linalg import SeparableSolver
from .params import ModelParams, check_pq
from .stokes import PotentialSpec, StokesWork, stokes_step


@dataclass
class FieldState:
    n: np.ndarray
    c: np.ndarray
    u: tuple[np.ndarray, ...]
    P: np.ndarray
    t: float = 0.0

    def copy(self) -> "FieldState":
        return FieldState(self.n.copy(), self.c.copy(), tuple(ua.copy() for ua in self.u),
                          self.P.copy(), self.t)


@dataclass
class InitialData:
    """Initial data presets.

    ``gaussian_bump`` and ``two_bumps`` are normalised to total mass
    ``mass``; ``uniform_plus_perturbation`` is ``mean * (1 + amplitude *
    cos-mode)``.  The signal is ``c0_floor + c0_amplitude * (1 + cos(pi x /
    lx)) / 2``, so its infimum is at least ``c0_floor``.  ``allow_zero_n``
    admits n0 = 0, used only to run the signal equation on its own.
    """

    preset: str = "gaussian_bump"
    mass: float = 1.0
    center: tuple[float, ...] = (0.5, 0.5)
    center2: tuple[float, ...] = (0.3, 0.7)
    width: float = 0.2
    mean: float = 1.0
    amplitude: float = 0.5
    modes: tuple[int, ...] = (1, 1)
    c0_floor: float = 1.0
    c0_amplitude: float = 0.0
    u0: str = "zero"
    u0_amplitude: float = 0.0
    n_values: np.ndarray | None = None
    c_values: np.ndarray | None = None
    allow_zero_n: bool = False

    def build(self, grid: Grid) -> FieldState:
        x = grid.centers()
        if self.preset == "gaussian_bump":
            n = self._bump(x, self.center)
            n *= self.mass / integrate(n, grid)
        elif self.preset == "two_bumps":
            n = self._bump(x, self.center) + self._bump(x, self.center2)
            n *= self.mass / integrate(n, grid)
        elif self.preset == "uniform_plus_perturbation":
            mode = np.ones(grid.shape)
            for a, k in enumerate(self.modes[:grid.dim]):
                mode = mode * np.cos(k * np.pi * x[a] / grid.lengths[a])
            n = self.mean * (1.0 + self.amplitude * mode)
        elif self.preset == "sampled":
            if self.n_values is None:
                raise DomainError("sampled preset needs n_values")
            n = np.array(self.n_values, dtype=float)
        else:
            raise DomainError(f"unknown initial preset {self.preset!r}")
        if self.c_values is not None:
            c = np.maximum(np.array(self.c_values, dtype=float), self.c0_floor)
        else:
            c = self.c0_floor + self.c0_amplitude * 0.5 * (1.0 + np.cos(np.pi * x[0] / grid.lengths[0]))
        if not self.c0_floor > 0:
            raise DomainError("c0_floor must be positive")
        if np.any(n < 0) or not np.all(np.isfinite(n)):
            raise DomainError("initial density must be finite and nonnegative")
        if not self.allow_zero_n and not np.any(n > 0):
            raise DomainError("initial density vanishes identically")
        u = grid.zeros_velocity()
        if self.u0 == "vortex":
            u = _vortex(grid, self.u0_amplitude)
        elif self.u0 != "zero":
            raise DomainError(f"unknown velocity preset {self.u0!r}")
        return FieldState(n, c, u, np.zeros(grid.shape), 0.0)

    def _bump(self, x, center):
        r2 = sum((xa - ca) ** 2 for xa, ca in zip(x, center))
        return np.exp(-r2 / (2.0 * self.width ** 2))

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("n_values")
        d.pop("c_values")
        return d


def _vortex(grid: Grid, amp: float) -> tuple[np.ndarray, ...]:
    # Discrete curl of a node-based stream function vanishing on the walls:
    # exactly divergence-free with zero normal velocity on the boundary.
    if grid.dim != 2:
        raise DomainError("vortex velocity preset is two-dimensional")
    xn, yn = np.meshgrid(grid.axis_faces(0), grid.axis_faces(1), indexing="ij")
    S = amp * np.sin(np.pi * xn / grid.lx) ** 2 * np.sin(np.pi * yn / grid.ly) ** 2
    S[[0, -1], :] = 0.0
    S[:, [0, -1]] = 0.0
    ux = np.diff(S, axis=1) / grid.hy
    uy = -np.diff(S, axis=0) / grid.hx
    return ux, uy


@dataclass
class SchemeConfig:
    """Time-stepping settings.

    ``dt = "auto"`` takes ``cfl_factor`` times the transport limit, capped by
    ``dt_max``; when ``dt_max`` is None the cap is ``dt_cap_h * h_min`` so
    that the step shrinks with the mesh even while the transport is at rest.
    """

    dt: float | str = "auto"
    T: float = 0.5
    cfl_factor: float = 0.4
    snapshot_stride: int = 0
    tol_div: float = 1e-8
    poisson_tol: float = 1e-10
    max_iters: int = 2000
    dt_max: float | None = None
    solver: str = "spectral"
    deterministic: bool = False
    blowup_threshold: float = 1e12
    dt_cap_h: float = 0.25
    projection: str = "incremental"

    def __post_init__(self):
        if self.dt != "auto" and not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise DomainError(f"dt must be positive or 'auto', got {self.dt!r}")
        if self.T <= 0 or not 0 < self.cfl_factor <= 1:
            raise DomainError("need T > 0 and 0 < cfl_factor <= 1")
        if self.snapshot_stride < 0:
            raise DomainError("snapshot_stride must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Trajectory:
    """Snapshots, per-step monitor records and run metadata.

    ``stride`` is the snapshot decimation (1 = every step, 0 = first and last
    only).  ``weak`` maps test-function labels to the space-time sums
    accumulated during the run.
    """

    params: ModelParams
    grid: Grid
    times: list[float] = field(default_factory=list)
    states: list[FieldState] = field(default_factory=list)
    records: list = field(default_factory=list)
    stride: int = 0
    metadata: dict = field(default_factory=dict)
    weak: dict = field(default_factory=dict)
    failure: dict | None = None
    error: KSCertError | None = None
    step_times: list[float] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.failure is None

    def raise_if_failed(self) -> None:
        if self.error is not None:
            raise self.error


def transport_rates(state: FieldState, params: ModelParams, grid: Grid) -> np.ndarray:
    """Per-cell sum over faces of (|u| + chemotactic drift speed) / h.

    A step with ``dt * rate <= 1`` in every cell keeps the explicit upwind
    update a convex combination, hence nonnegative.
    """
    rate = np.zeros(grid.shape)
    for a, h in enumerate(grid.h):
        drift = params.chi * np.abs(face_diff(state.c, a, h)) / face_average(state.c, a)
        speed = np.abs(state.u[a]) + pad_boundary(drift, a)
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[a], hi[a] = slice(None, -1), slice(1, None)
        rate += (speed[tuple(lo)] + speed[tuple(hi)]) / h
    return rate


def cfl_limit(state: FieldState, params: ModelParams, grid: Grid) -> float:
    rmax = float(transport_rates(state, params, grid).max())
    return np.inf if rmax == 0 else 1.0 / rmax


class _Implicit:
    """Cached Neumann transform for ``(alpha I - dt Lap)`` solves."""

    _cache: dict = {}

    @classmethod
    def solve(cls, b: np.ndarray, grid: Grid, alpha: float, dt: float) -> np.ndarray:
        key = (grid.shape, grid.h)
        solver = cls._cache.get(key)
        if solver is None:
            solver = cls._cache[key] = SeparableSolver(grid.shape, ["neumann"] * grid.dim, grid.h)
        return solver.solve(b, alpha, dt)


def _check_cfl(state, params, grid, dt):
    rate = transport_rates(state, params, grid)
    k = int(np.argmax(rate))
    if dt * rate.flat[k] > 1.0 + 1e-12:
        cell = np.unravel_index(k, grid.shape)
        raise CflError(f"dt = {dt:.3e} exceeds transport limit {1.0 / rate.flat[k]:.3e}", cell=cell)


def n_step(state: FieldState, params: ModelParams, dt: float, grid: Grid) -> np.ndarray:
    """Upwind explicit transport and chemotaxis, then implicit diffusion."""
    _check_cfl(state, params, grid, dt)
    n = state.n
    explicit = n - dt * (advect_conservative(n, state.u, grid) + chemotactic_flux_div(n, state.c, params, grid))
    n_new = _Implicit.solve(explicit, grid, 1.0, dt)
    scale = float(np.abs(n).max())
    k = int(np.argmin(n_new))
    if n_new.flat[k] < -1e-13 * scale:
        raise PositivityError(f"density became negative ({n_new.flat[k]:.3e})",
                              cell=np.unravel_index(k, grid.shape))
    return n_new


def c_step(state: FieldState, dt: float, grid: Grid) -> np.ndarray:
    """Implicit diffusion and decay, explicit upwind transport and source."""
    rate = transport_rates(state, _NoChemotaxis, grid)
    k = int(np.argmax(rate))
    if dt * rate.flat[k] > 1.0 + 1e-12:
        raise CflError("dt exceeds the advective limit", cell=np.unravel_index(k, grid.shape))
    c = state.c
    explicit = c - dt * advect_conservative(c, state.u, grid) + dt * state.n
    c_new = _Implicit.solve(explicit, grid, 1.0 + dt, dt)
    k = int(np.argmin(c_new))
    if not c_new.flat[k] > 0:
        raise PositivityError(f"signal became nonpositive ({c_new.flat[k]:.3e})",
                              cell=np.unravel_index(k, grid.shape))
    return c_new


class _NoChemotaxis:
    chi = 0.0


def simulate(params: ModelParams, grid: Grid, init: InitialData, scheme: SchemeConfig,
             potential: PotentialSpec | None = None, test_functions: Sequence = (),
             solenoidal: Sequence = (), initial_state: FieldState | None = None) -> Trajectory:
    """Run the coupled scheme from t = 0 to ``scheme.T``.

    Each step does Stokes, then n, then c.  Errors stop the loop; the partial
    trajectory is returned with ``failure`` describing the step and cell.
    Scalar and solenoidal test functions are accumulated on the fly so that
    the weak-form residuals do not need every snapshot in memory.
    """
    from .monitor import Monitor

    if potential is None:
        potential = PotentialSpec("linear", (0.0,) * (grid.dim - 1) + (-1.0,))
    state = initial_state.copy() if initial_state is not None else init.build(grid)
    work = StokesWork(grid, tol_div=scheme.tol_div, poisson_tol=scheme.poisson_tol,
                      max_iters=scheme.max_iters, method=scheme.solver, projection=scheme.projection)
    report = check_pq(params)
    traj = Trajectory(params, grid, stride=scheme.snapshot_stride)
    traj.metadata = {
        "params": params.to_dict(), "grid": grid.to_dict(), "scheme": scheme.to_dict(),
        "initial": init.to_dict(), "potential": potential.to_dict(),
        "admissibility": report.to_dict(),
    }
    monitor = Monitor(params, grid, float(state.c.min()), potential, test_functions, solenoidal,
                      deterministic=scheme.deterministic)
    traj.records.append(monitor.start(state))
    traj.times.append(0.0)
    traj.states.append(state.copy())

    wall0 = time.perf_counter()
    step = 0
    dt_used = []
    while state.t < scheme.T * (1 - 1e-12):
        step += 1
        try:
            if scheme.dt == "auto":
                dt = scheme.cfl_factor * cfl_limit(state, params, grid)
                dt = min(dt, scheme.dt_max if scheme.dt_max is not None else scheme.dt_cap_h * min(grid.h))
                dt = min(dt, scheme.T)
            else:
                dt = float(scheme.dt)
            if state.t + dt > scheme.T * (1 - 1e-12):
                dt = scheme.T - state.t
            u_new, P = stokes_step(state.u, state.n, potential, dt, grid, work)
            mid = FieldState(state.n, state.c, u_new, P, state.t)
            n_new = n_step(mid, params, dt, grid)
            c_new = c_step(FieldState(n_new, state.c, u_new, P, state.t), dt, grid)
            cfl_used = dt / cfl_limit(mid, params, grid)
            new = FieldState(n_new, c_new, u_new, P, state.t + dt)
            if float(np.abs(n_new).max()) > scheme.blowup_threshold or not np.all(np.isfinite(n_new)):
                raise BlowUpError(f"density exceeded {scheme.blowup_threshold:.1e}")
        except KSCertError as exc:
            exc.step = step
            traj.error = exc
            traj.failure = {"reason": type(exc).__name__, "message": str(exc), "step": step,
                            "cell": [int(i) for i in getattr(exc, "cell", None) or ()],
                            "t": state.t}
            break
        traj.records.append(monitor.advance(state, new, dt, cfl_used, work.iterations, work.residual))
        dt_used.append(dt)
        state = new
        if scheme.snapshot_stride and step % scheme.snapshot_stride == 0:
            traj.times.append(state.t)
            traj.states.append(state.copy())
    if traj.times[-1] != state.t:
        traj.times.append(state.t)
        traj.states.append(state.copy())
    traj.weak = monitor.finish(state)
    traj.step_times = [0.0] + list(np.cumsum(dt_used))
    traj.metadata["steps"] = step if traj.failure is None else step - 1
    traj.metadata["dt_min"] = min(dt_used) if dt_used else None
    traj.metadata["dt_max"] = max(dt_used) if dt_used else None
    traj.metadata["wall_clock_s"] = time.perf_counter() - wall0
    traj.metadata["test_functions"] = [phi.to_dict() for phi in test_functions]
    traj.metadata["solenoidal"] = [psi.to_dict() for psi in solenoidal]
    if traj.failure is not None:
        traj.metadata["aborted"] = traj.failure
    return traj
