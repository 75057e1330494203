"""Cell-centred rectangular grids, flux-form operators and midpoint quadrature.

Scalars live at cell centres as arrays of shape ``grid.shape`` (axis 0 is x).
Velocities are staggered: component ``a`` is stored on the faces normal to
axis ``a`` and has one extra entry along that axis; the first and last of
those entries are the boundary faces.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, PositivityError


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0
    nz: int | None = None
    lz: float | None = None

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1 or (self.nz is not None and self.nz < 1):
            raise DomainError("cell counts must be positive")
        if self.lx <= 0 or self.ly <= 0:
            raise DomainError("domain lengths must be positive")
        if self.nz is not None and self.lz is None:
            object.__setattr__(self, "lz", 1.0)

    @property
    def dim(self) -> int:
        return 2 if self.nz is None else 3

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nx, self.ny) if self.nz is None else (self.nx, self.ny, self.nz)

    @property
    def lengths(self) -> tuple[float, ...]:
        return (self.lx, self.ly) if self.nz is None else (self.lx, self.ly, self.lz)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.shape))

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_volume(self) -> float:
        return math.prod(self.h)

    @property
    def volume(self) -> float:
        return math.prod(self.lengths)

    def axis_centers(self, axis: int) -> np.ndarray:
        n, h = self.shape[axis], self.h[axis]
        return (np.arange(n) + 0.5) * h

    def axis_faces(self, axis: int) -> np.ndarray:
        return np.arange(self.shape[axis] + 1) * self.h[axis]

    def centers(self) -> tuple[np.ndarray, ...]:
        return np.meshgrid(*[self.axis_centers(a) for a in range(self.dim)], indexing="ij")

    def face_coords(self, axis: int) -> tuple[np.ndarray, ...]:
        """Coordinates of the faces normal to ``axis`` (boundary faces included)."""
        axes = [self.axis_faces(a) if a == axis else self.axis_centers(a) for a in range(self.dim)]
        return np.meshgrid(*axes, indexing="ij")

    def face_shape(self, axis: int) -> tuple[int, ...]:
        s = list(self.shape)
        s[axis] += 1
        return tuple(s)

    def zeros_velocity(self) -> tuple[np.ndarray, ...]:
        return tuple(np.zeros(self.face_shape(a)) for a in range(self.dim))

    def to_dict(self) -> dict:
        d = {"nx": self.nx, "ny": self.ny, "lx": self.lx, "ly": self.ly}
        if self.nz is not None:
            d.update(nz=self.nz, lz=self.lz)
        return d


def _sl(dim: int, axis: int, s) -> tuple:
    idx = [slice(None)] * dim
    idx[axis] = s
    return tuple(idx)


def face_diff(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Difference quotient on interior faces normal to ``axis``."""
    return np.diff(f, axis=axis) / h


def pad_boundary(g: np.ndarray, axis: int) -> np.ndarray:
    """Extend an interior-face array by zero values on the two boundary faces."""
    width = [(0, 0)] * g.ndim
    width[axis] = (1, 1)
    return np.pad(g, width)


def face_div(F: np.ndarray, axis: int, h: float) -> np.ndarray:
    return np.diff(F, axis=axis) / h


def laplacian_neumann(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Five-point (seven in 3D) Laplacian with mirrored ghost cells."""
    out = np.zeros_like(f, dtype=float)
    for a, h in enumerate(grid.h):
        out += face_div(pad_boundary(face_diff(f, a, h), a), a, h)
    return out


def divergence(u: tuple[np.ndarray, ...], grid: Grid) -> np.ndarray:
    out = np.zeros(grid.shape)
    for a, h in enumerate(grid.h):
        out += face_div(u[a], a, h)
    return out


def face_average(f: np.ndarray, axis: int) -> np.ndarray:
    """Arithmetic mean of the two cells adjacent to each interior face."""
    dim = f.ndim
    return 0.5 * (f[_sl(dim, axis, slice(1, None))] + f[_sl(dim, axis, slice(None, -1))])


def upwind_flux(f: np.ndarray, vel: np.ndarray, axis: int, periodic: bool = False) -> np.ndarray:
    """First-order upwind flux ``vel * f_upwind`` on every face normal to ``axis``.

    ``vel`` has the face shape.  Without periodicity the boundary fluxes are
    zero; with it, the first and last face are the same face.
    """
    dim = f.ndim
    flux = np.zeros(vel.shape)
    inner = _sl(dim, axis, slice(1, -1))
    left = f[_sl(dim, axis, slice(None, -1))]
    right = f[_sl(dim, axis, slice(1, None))]
    v = vel[inner]
    flux[inner] = np.where(v > 0, v * left, v * right)
    if periodic:
        first, last = _sl(dim, axis, 0), _sl(dim, axis, -1)
        v0 = vel[first]
        wrap = np.where(v0 > 0, v0 * f[last], v0 * f[first])
        flux[first] = wrap
        flux[last] = wrap
    return flux


def advect_conservative(f: np.ndarray, u: tuple[np.ndarray, ...], grid: Grid,
                        periodic: bool = False) -> np.ndarray:
    """Upwind flux-form divergence ``div(u f)``; the cell sum is zero up to round-off."""
    out = np.zeros(grid.shape)
    for a, h in enumerate(grid.h):
        out += face_div(upwind_flux(f, u[a], a, periodic), a, h)
    return out


def chemotactic_face_flux(n: np.ndarray, c: np.ndarray, chi: float, eps: float, grid: Grid,
                          axis: int) -> np.ndarray:
    """Saturated chemotactic flux on the interior faces normal to ``axis``.

    The density is taken from the cell the drift comes from, i.e. upwind with
    respect to the sign of the face gradient of ``c``.  ``eps`` may be any
    nonnegative number here; model parameters restrict it further.
    """
    dim = n.ndim
    h = grid.h[axis]
    dc = face_diff(c, axis, h)
    c_face = face_average(c, axis)
    n_left = n[_sl(dim, axis, slice(None, -1))]
    n_right = n[_sl(dim, axis, slice(1, None))]
    n_up = np.where(dc > 0, n_left, n_right)
    return chi * n_up / ((1.0 + eps * n_up) * c_face) * dc


def chemotactic_flux_div(n: np.ndarray, c: np.ndarray, params, grid: Grid) -> np.ndarray:
    """Divergence of ``chi n / ((1 + eps n) c) grad c`` with zero boundary flux."""
    cmin = float(np.min(c))
    if not cmin > 0:
        idx = np.unravel_index(int(np.argmin(c)), c.shape)
        raise PositivityError(f"signal concentration not positive (min c = {cmin})", cell=idx)
    out = np.zeros(grid.shape)
    for a, h in enumerate(grid.h):
        F = pad_boundary(chemotactic_face_flux(n, c, params.chi, params.eps, grid, a), a)
        out += face_div(F, a, h)
    return out


def integrate(f: np.ndarray, grid: Grid, power: float = 1.0, deterministic: bool = False) -> float:
    """Midpoint rule for the integral of ``f**power`` over the domain."""
    f = np.asarray(f, dtype=float)
    if power == 1.0:
        vals = f
    else:
        integral_power = float(power).is_integer() and power >= 0
        if not integral_power:
            if power < 0 and np.any(f <= 0):
                raise DomainError("negative power needs a strictly positive base")
            if np.any(f < 0):
                raise DomainError("fractional power of a negative value")
        vals = f ** power
    if deterministic:
        return math.fsum(vals.ravel()) * grid.cell_volume
    return float(np.sum(vals)) * grid.cell_volume


def grad_norm_sq(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Cell values of |grad f|^2 from squared face differences.

    Each cell averages the squared quotients on its two faces per axis;
    boundary faces contribute zero (mirrored ghosts).
    """
    out = np.zeros(grid.shape)
    for a, h in enumerate(grid.h):
        g2 = pad_boundary(face_diff(f, a, h) ** 2, a)
        out += 0.5 * (g2[_sl(f.ndim, a, slice(1, None))] + g2[_sl(f.ndim, a, slice(None, -1))])
    return out


def cell_gradient(f: np.ndarray, grid: Grid) -> tuple[np.ndarray, ...]:
    """Gradient vector at cell centres: mean of the two face quotients, zero on walls."""
    comps = []
    for a, h in enumerate(grid.h):
        g = pad_boundary(face_diff(f, a, h), a)
        comps.append(0.5 * (g[_sl(f.ndim, a, slice(1, None))] + g[_sl(f.ndim, a, slice(None, -1))]))
    return tuple(comps)


def velocity_at_centers(u: tuple[np.ndarray, ...]) -> tuple[np.ndarray, ...]:
    return tuple(0.5 * (ua[_sl(ua.ndim, a, slice(1, None))] + ua[_sl(ua.ndim, a, slice(None, -1))])
                 for a, ua in enumerate(u))


def write_snapshot(path: str | Path, f: np.ndarray, grid: Grid, time: float, field_name: str) -> None:
    """Raw little-endian float64 with x varying fastest, plus a JSON sidecar."""
    path = Path(path)
    np.asarray(f, dtype="<f8").ravel(order="F").tofile(path)
    meta = {"nx": f.shape[0], "ny": f.shape[1], "hx": grid.h[0], "hy": grid.h[1],
            "time": time, "field_name": field_name}
    if f.ndim == 3:
        meta.update(nz=f.shape[2], hz=grid.h[2])
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=1))


def read_snapshot(path: str | Path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    shape = (meta["nx"], meta["ny"]) + ((meta["nz"],) if "nz" in meta else ())
    data = np.fromfile(path, dtype="<f8").reshape(shape, order="F")
    return data, meta
