"""Linear solvers for the constant-coefficient operators of the scheme.

Every implicit operator here is ``alpha*I - beta*Lap`` on a rectangle with a
per-axis boundary type, so it is diagonalised by a product of discrete
cosine/sine transforms.  A matrix-free conjugate gradient solver is provided
as an independent route and for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import fft

from .errors import SolverError

# Per-axis boundary kinds:
#   "neumann"   cell-centred unknowns, mirrored ghosts (DCT-II)
#   "wall"      cell-centred unknowns, zero value on the wall face (DST-II)
#   "node"      unknowns on interior nodes, zero on the two end nodes (DST-I)
_TRANSFORMS = {
    "neumann": (2, fft.dct, fft.idct),
    "wall": (2, fft.dst, fft.idst),
    "node": (1, fft.dst, fft.idst),
}


def axis_eigenvalues(kind: str, n: int, h: float) -> np.ndarray:
    """Eigenvalues of the 1D three-point Laplacian for ``n`` unknowns."""
    if kind == "neumann":
        k = np.arange(n)
        return -4.0 / h**2 * np.sin(np.pi * k / (2 * n)) ** 2
    if kind == "wall":
        k = np.arange(1, n + 1)
        return -4.0 / h**2 * np.sin(np.pi * k / (2 * n)) ** 2
    if kind == "node":
        k = np.arange(1, n + 1)
        return -4.0 / h**2 * np.sin(np.pi * k / (2 * (n + 1))) ** 2
    raise ValueError(f"unknown boundary kind {kind!r}")


def _forward(x, kinds):
    for a, kind in enumerate(kinds):
        t, f, _ = _TRANSFORMS[kind]
        x = f(x, type=t, axis=a, norm="ortho")
    return x


def _inverse(x, kinds):
    for a, kind in enumerate(kinds):
        t, _, fi = _TRANSFORMS[kind]
        x = fi(x, type=t, axis=a, norm="ortho")
    return x


def apply_laplacian(x: np.ndarray, kinds: Sequence[str], hs: Sequence[float]) -> np.ndarray:
    """Matrix-free three-point Laplacian with the given boundary kinds."""
    out = np.zeros_like(x)
    for a, (kind, h) in enumerate(zip(kinds, hs)):
        width = [(0, 0)] * x.ndim
        width[a] = (1, 1)
        if kind == "neumann":
            g = np.pad(x, width, mode="edge")
        elif kind == "wall":
            # ghost = -interior puts the zero value on the wall face
            g = -np.pad(x, width, mode="edge")
            inner = [slice(None)] * x.ndim
            inner[a] = slice(1, -1)
            g[tuple(inner)] = x
        elif kind == "node":
            g = np.pad(x, width)
        else:
            raise ValueError(f"unknown boundary kind {kind!r}")
        out += np.diff(g, n=2, axis=a) / h**2
    return out


@dataclass
class SolveStats:
    iterations: int = 0
    residual: float = 0.0


class SeparableSolver:
    """Solve ``(alpha*I - beta*Lap) x = b`` exactly by fast transforms.

    With ``alpha == 0`` and all-Neumann boundaries the operator is singular;
    the solution is then taken with zero mean and the mean of ``b`` is removed
    first (its value is reported through :attr:`mean_correction`).
    """

    def __init__(self, shape: Sequence[int], kinds: Sequence[str], hs: Sequence[float]):
        self.shape = tuple(shape)
        self.kinds = tuple(kinds)
        self.hs = tuple(hs)
        lam = np.zeros(self.shape)
        for a, (kind, n, h) in enumerate(zip(self.kinds, self.shape, self.hs)):
            ev = axis_eigenvalues(kind, n, h)
            bshape = [1] * len(self.shape)
            bshape[a] = n
            lam = lam + ev.reshape(bshape)
        self.eigenvalues = lam
        self.mean_correction = 0.0

    def solve(self, b: np.ndarray, alpha: float, beta: float) -> np.ndarray:
        denom = alpha - beta * self.eigenvalues
        bh = _forward(np.asarray(b, dtype=float), self.kinds)
        singular = denom == 0
        if np.any(singular):
            self.mean_correction = float(np.mean(b))
            bh = np.where(singular, 0.0, bh)
            denom = np.where(singular, 1.0, denom)
        else:
            self.mean_correction = 0.0
        return _inverse(bh / denom, self.kinds)

    def operator(self, alpha: float, beta: float) -> Callable[[np.ndarray], np.ndarray]:
        return lambda x: alpha * x - beta * apply_laplacian(x, self.kinds, self.hs)


def conjugate_gradient(apply_a: Callable[[np.ndarray], np.ndarray], b: np.ndarray,
                       x0: np.ndarray | None = None, tol: float = 1e-10,
                       max_iter: int = 1000, project_mean: bool = False) -> tuple[np.ndarray, SolveStats]:
    """Matrix-free CG for a symmetric positive (semi)definite operator.

    Convergence is declared when ``||b - A x|| <= tol * ||b||``.  With
    ``project_mean`` the iterates are kept mean-free, which handles the
    constant null space of the pure Neumann Laplacian.
    """
    b = np.asarray(b, dtype=float)
    if project_mean:
        b = b - b.mean()
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    if project_mean:
        x -= x.mean()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), SolveStats(0, 0.0)
    r = b - apply_a(x)
    d = r.copy()
    rr = float(np.vdot(r, r))
    for k in range(1, max_iter + 1):
        Ad = apply_a(d)
        dAd = float(np.vdot(d, Ad))
        if dAd <= 0:
            raise SolverError("operator not positive definite on the Krylov space", k,
                              np.sqrt(rr) / bnorm)
        alpha = rr / dAd
        x += alpha * d
        r -= alpha * Ad
        if project_mean:
            r -= r.mean()
        rr_new = float(np.vdot(r, r))
        if np.sqrt(rr_new) <= tol * bnorm:
            if project_mean:
                x -= x.mean()
            return x, SolveStats(k, np.sqrt(rr_new) / bnorm)
        d = r + (rr_new / rr) * d
        rr = rr_new
    raise SolverError(f"CG did not converge in {max_iter} iterations", max_iter, np.sqrt(rr) / bnorm)
