"""Buoyancy-driven unsteady Stokes flow by pressure projection on a staggered grid.

The velocity is stored on faces (component ``a`` on faces normal to axis
``a``), which makes the discrete divergence of the projected field vanish to
solver accuracy and lets the face velocities enter the flux-form transport
of ``n`` and ``c`` directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, SolverError
from .grid import (Grid, divergence, face_average, face_diff, laplacian_neumann, pad_boundary)
from .linalg import SeparableSolver, apply_laplacian, conjugate_gradient


@dataclass(frozen=True)
class PotentialSpec:
    """Gravitational potential.

    ``linear``: Phi = g . x with ``coefficients = g``.
    ``quadratic``: Phi = sum_a (A_a x_a^2 / 2 + b_a x_a) with
    ``coefficients = (A_1..A_N, b_1..b_N)``.
    ``sampled``: cell-centred values in ``values``.
    """

    kind: str = "linear"
    coefficients: tuple[float, ...] = (0.0, -1.0)
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "quadratic", "sampled"):
            raise DomainError(f"unknown potential kind {self.kind!r}")
        if self.kind == "sampled":
            if self.values is None or not np.all(np.isfinite(self.values)):
                raise DomainError("sampled potential needs finite cell values")

    def grad_on_faces(self, grid: Grid) -> tuple[np.ndarray, ...]:
        """d Phi / d x_a on the interior faces normal to axis a."""
        out = []
        for a in range(grid.dim):
            if self.kind == "sampled":
                out.append(face_diff(np.asarray(self.values, dtype=float), a, grid.h[a]))
                continue
            xf = grid.face_coords(a)[a]
            inner = [slice(None)] * grid.dim
            inner[a] = slice(1, -1)
            xf = xf[tuple(inner)]
            coef = tuple(self.coefficients)
            if self.kind == "linear":
                out.append(np.full(xf.shape, float(coef[a]) if a < len(coef) else 0.0))
            else:
                A, b = coef[:grid.dim], coef[grid.dim:2 * grid.dim]
                out.append(A[a] * xf + b[a])
        return tuple(out)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "coefficients": list(self.coefficients)}
        if self.values is not None:
            d["values_shape"] = list(np.shape(self.values))
        return d


@dataclass
class StokesWork:
    """Solver settings, cached transforms, the carried pressure and the
    statistics of the last step.

    ``projection="incremental"`` feeds the previous pressure gradient into the
    viscous solve and only projects the increment; ``"chorin"`` is the plain
    non-incremental projection.
    """

    grid: Grid
    tol_div: float = 1e-8
    poisson_tol: float = 1e-10
    max_iters: int = 2000
    method: str = "spectral"
    projection: str = "incremental"
    pressure: np.ndarray | None = None
    iterations: int = 0
    residual: float = 0.0
    mean_correction: float = 0.0
    _pressure: SeparableSolver | None = field(default=None, repr=False)
    _velocity: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.projection not in ("incremental", "chorin"):
            raise DomainError(f"unknown projection {self.projection!r}")
        g = self.grid
        if self.pressure is None:
            self.pressure = np.zeros(g.shape)
        self._pressure = SeparableSolver(g.shape, ["neumann"] * g.dim, g.h)
        self._velocity = []
        for a in range(g.dim):
            kinds = ["node" if b == a else "wall" for b in range(g.dim)]
            shape = [n - 1 if b == a else n for b, n in enumerate(g.shape)]
            self._velocity.append(SeparableSolver(shape, kinds, g.h))


def poisson_neumann_solve(rhs: np.ndarray, grid: Grid, tol: float = 1e-10,
                          work: StokesWork | None = None, method: str = "spectral",
                          max_iters: int = 2000) -> np.ndarray:
    """Mean-zero solution of ``Lap_h x = rhs`` with homogeneous Neumann conditions.

    An incompatible right-hand side is mean-corrected; the removed mean is
    stored on ``work.mean_correction`` when a work object is passed.
    """
    work = work if work is not None else StokesWork(grid, poisson_tol=tol, method=method)
    rhs = np.asarray(rhs, dtype=float)
    mean = float(np.mean(rhs))
    b = rhs - mean
    bnorm = float(np.linalg.norm(b))
    if method == "spectral":
        x = work._pressure.solve(b, 0.0, -1.0)
        x -= x.mean()
        iters = 1
    elif method == "cg":
        x, stats = conjugate_gradient(lambda v: -laplacian_neumann(v, grid), -b, tol=tol,
                                      max_iter=max_iters, project_mean=True)
        iters = stats.iterations
    else:
        raise DomainError(f"unknown solver method {method!r}")
    res = float(np.linalg.norm(laplacian_neumann(x, grid) - b))
    rel = res / bnorm if bnorm > 0 else res
    work.iterations = max(work.iterations, iters)
    work.residual = max(work.residual, rel)
    work.mean_correction = mean
    if rel > tol and res > 1e-13 * (1.0 + float(np.abs(rhs).max())):
        raise SolverError(f"pressure Poisson residual {rel:.3e} above tolerance {tol:.1e}", iters, rel)
    return x


def gradient_to_faces(P: np.ndarray, grid: Grid) -> tuple[np.ndarray, ...]:
    """Discrete gradient on all faces, zero on boundary faces."""
    return tuple(pad_boundary(face_diff(P, a, grid.h[a]), a) for a in range(grid.dim))


def project(v: tuple[np.ndarray, ...], grid: Grid, work: StokesWork,
            scale: float = 1.0) -> tuple[tuple[np.ndarray, ...], np.ndarray]:
    """Remove the gradient part of a face field.

    Returns ``(v - scale * grad phi, phi)`` where ``Lap_h phi = div v / scale``.
    """
    phi = poisson_neumann_solve(divergence(v, grid) / scale, grid, tol=work.poisson_tol, work=work,
                                method=work.method, max_iters=work.max_iters)
    G = gradient_to_faces(phi, grid)
    return tuple(va - scale * Ga for va, Ga in zip(v, G)), phi


def _inner(grid: Grid, a: int) -> tuple:
    s = [slice(None)] * grid.dim
    s[a] = slice(1, -1)
    return tuple(s)


def _viscous_solve(rhs: np.ndarray, a: int, dt: float, grid: Grid, work: StokesWork) -> np.ndarray:
    solver = work._velocity[a]
    if work.method == "spectral":
        x = solver.solve(rhs, 1.0, dt)
        iters = 1
    else:
        x, stats = conjugate_gradient(solver.operator(1.0, dt), rhs, x0=rhs, tol=work.poisson_tol,
                                      max_iter=work.max_iters)
        iters = stats.iterations
    res = float(np.linalg.norm(solver.operator(1.0, dt)(x) - rhs))
    bnorm = float(np.linalg.norm(rhs))
    rel = res / bnorm if bnorm > 0 else res
    work.iterations = max(work.iterations, iters)
    work.residual = max(work.residual, rel)
    if rel > work.poisson_tol and res > 1e-13:
        raise SolverError(f"viscous solve residual {rel:.3e} above tolerance", iters, rel)
    return x


def velocity_laplacian(u: tuple[np.ndarray, ...], grid: Grid) -> tuple[np.ndarray, ...]:
    """Vector Laplacian with no-slip walls, evaluated on interior faces."""
    out = []
    for a in range(grid.dim):
        kinds = ["node" if b == a else "wall" for b in range(grid.dim)]
        out.append(apply_laplacian(u[a][_inner(grid, a)], kinds, grid.h))
    return tuple(out)


def buoyancy_forcing(n: np.ndarray, phi: PotentialSpec, grid: Grid) -> tuple[np.ndarray, ...]:
    """n grad Phi on interior faces, with n averaged from the two adjacent cells."""
    grads = phi.grad_on_faces(grid)
    return tuple(face_average(n, a) * grads[a] for a in range(grid.dim))


def stokes_step(u: Sequence[np.ndarray], n: np.ndarray, phi: PotentialSpec, dt: float, grid: Grid,
                work: StokesWork | None = None,
                forcing: Callable[[Grid], Sequence[np.ndarray]] | None = None,
                ) -> tuple[tuple[np.ndarray, ...], np.ndarray]:
    """Advance the velocity by one projection step of size ``dt``.

    The forcing is projected first, so a pure gradient forcing is absorbed by
    the pressure exactly; the viscous term is implicit; the provisional field
    is projected at the end.  In incremental mode the viscous solve also sees
    the gradient of the pressure carried on ``work`` and the projection only
    supplies the increment, which removes the first-order splitting error at
    no-slip walls.  ``forcing`` optionally adds an extra body force, given on
    interior faces.  Returns ``(u_new, P)`` with mean-zero ``P``, the
    pressure of ``u_t = Lap u + grad P + n grad Phi``.
    """
    if dt <= 0:
        raise DomainError("dt must be positive")
    work = work if work is not None else StokesWork(grid)
    work.iterations = 0
    work.residual = 0.0
    f = list(buoyancy_forcing(n, phi, grid))
    if forcing is not None:
        extra = forcing(grid)
        f = [fa + ea for fa, ea in zip(f, extra)]
    f_full = tuple(pad_boundary(fa, a) for a, fa in enumerate(f))
    f_sol, phi_f = project(f_full, grid, work)

    incremental = work.projection == "incremental"
    carried = work.pressure if incremental else np.zeros(grid.shape)
    G = gradient_to_faces(carried, grid)
    u_star = []
    for a in range(grid.dim):
        inner = _inner(grid, a)
        rhs = u[a][inner] + dt * (f_sol[a][inner] - G[a][inner])
        u_star.append(pad_boundary(_viscous_solve(rhs, a, dt, grid, work), a))
    u_new, phi_p = project(tuple(u_star), grid, work, scale=dt)

    div_max = float(np.abs(divergence(u_new, grid)).max())
    u_max = max(float(np.abs(ua).max()) for ua in u_new)
    if div_max > work.tol_div * (1.0 + u_max):
        raise SolverError(f"projected divergence {div_max:.3e} above tolerance", work.iterations, div_max)
    total = carried + phi_p
    if incremental:
        work.pressure = total
    P = -(phi_f + total)
    return u_new, P - P.mean()


def max_divergence(u: Sequence[np.ndarray], grid: Grid) -> float:
    return float(np.abs(divergence(tuple(u), grid)).max())
