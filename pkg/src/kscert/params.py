"""Exponent calculus for the singular-sensitivity chemotaxis-Stokes model.

Everything here is a pure function of floats (or float arrays for the
``s`` argument of :func:`supersolution_coefficient`).  Window membership is
decided with strict inequalities and no tolerance.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError

CHI_MAX_3D = 5.0 / 3.0
R_C_MAX = 5.0 / 3.0
R_GC_MAX = 5.0 / 4.0


@dataclass(frozen=True)
class ModelParams:
    """Model constants: sensitivity, regularization, the (p, q) exponents and N."""

    chi: float
    eps: float
    p: float
    q: float
    dim: int = 2
    r_c: float = 1.5
    r_gc: float = 1.2

    def __post_init__(self):
        if not self.chi > 0:
            raise DomainError(f"chi must be positive, got {self.chi}")
        if not 0 < self.eps < 1:
            raise DomainError(f"eps must lie in (0, 1), got {self.eps}")
        if not 0 < self.p < 1:
            raise DomainError(f"p must lie in (0, 1), got {self.p}")
        if not 0 < self.q < 1:
            raise DomainError(f"q must lie in (0, 1), got {self.q}")
        if self.dim not in (2, 3):
            raise DomainError(f"dim must be 2 or 3, got {self.dim}")
        if self.r_c < 1 or self.r_gc < 1:
            raise DomainError("monitor exponents r_c, r_gc must be >= 1")

    def bounded_by_theory(self, monitor: str) -> bool:
        """Whether the space-time integral named ``monitor`` is covered by an a priori bound."""
        if monitor == "cum_c_r":
            return self.r_c < R_C_MAX
        if monitor == "cum_grad_c_r":
            return self.r_gc < R_GC_MAX
        return True

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AdmissibilityReport:
    p_ok: bool
    q_window: tuple[float, float]
    q_ok: bool
    pq_cond: bool
    chi_ok: bool
    coefficient_floor: float

    @property
    def admissible(self) -> bool:
        return self.p_ok and self.q_ok and self.chi_ok

    def to_dict(self) -> dict:
        d = asdict(self)
        d["q_window"] = list(self.q_window)
        d["admissible"] = self.admissible
        return d


def q_pm(p: float, chi: float) -> tuple[float, float]:
    """Return the admissible q-window ``(q_-(p), q_+(p))``."""
    if chi <= 0:
        raise DomainError(f"chi must be positive, got {chi}")
    disc = 1.0 - p * chi * chi
    if disc < 0:
        raise DomainError(f"p*chi^2 = {p * chi * chi} > 1: q-window is empty")
    root = math.sqrt(disc)
    half = 0.5 * (1.0 - p)
    return half * (1.0 - root), half * (1.0 + root)


def admissible_chi(chi: float, dim: int) -> bool:
    if dim == 2:
        return True
    return chi < CHI_MAX_3D


def supersolution_coefficient(p: float, q: float, chi: float, s=0.0):
    """Coefficient of ``c^q |grad n^{p/2}|^2`` with ``s`` standing for ``eps * n``.

    ``s`` may be an array; the result then has the same shape.
    """
    if p == 0 or q == 0:
        raise DomainError("p and q must be nonzero")
    w = 1.0 / (1.0 + np.asarray(s, dtype=float))
    num = 4.0 * (1.0 - p) * q - 4.0 * q * q - p * (1.0 - p) ** 2 * chi * chi * w * w
    den = p * q * (p * chi * w + 1.0 - q)
    out = num / den
    return float(out) if np.ndim(out) == 0 else out


def _coefficient_infimum(p: float, q: float, chi: float) -> float:
    # Substituting w = 1/(1+s) in (0, 1] makes the quotient a smooth function on a compact set.
    a = 4.0 * (1.0 - p) * q - 4.0 * q * q
    if a - p * (1.0 - p) ** 2 * chi * chi >= 0:
        return supersolution_coefficient(p, q, chi, 0.0)

    def f(w):
        return (a - p * (1.0 - p) ** 2 * chi * chi * w * w) / (p * q * (p * chi * w + 1.0 - q))

    res = minimize_scalar(f, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12})
    return float(min(f(1.0), f(0.0), res.fun))


def coefficient_lower_bound(p: float, q: float, chi: float) -> float:
    """Infimum over ``s >= 0`` of :func:`supersolution_coefficient` for admissible (p, q).

    Inside the window the numerator is nonnegative and nondecreasing in ``s``
    while the positive denominator is nonincreasing, so the infimum sits at
    ``s = 0``.
    """
    if not 0 < p < 1 or not 0 < q < 1:
        raise DomainError("p and q must lie in (0, 1)")
    if not p * chi * chi < 1:
        raise DomainError(f"p = {p} violates p < 1/chi^2 = {1 / chi**2}")
    lo, hi = q_pm(p, chi)
    if not lo < q < hi:
        raise DomainError(f"q = {q} outside the open window ({lo}, {hi})")
    return supersolution_coefficient(p, q, chi, 0.0)


def check_pq(params: ModelParams) -> AdmissibilityReport:
    p, q, chi = params.p, params.q, params.chi
    p_ok = p * chi * chi < 1
    if p_ok:
        window = q_pm(p, chi)
        q_ok = window[0] < q < window[1]
    else:
        window = (math.nan, math.nan)
        q_ok = False
    pq_cond = p + 3.0 * q / 5.0 < 2.0 / 3.0
    chi_ok = admissible_chi(chi, params.dim)
    if p_ok and q_ok:
        floor = coefficient_lower_bound(p, q, chi)
    else:
        floor = _coefficient_infimum(p, q, chi)
    return AdmissibilityReport(p_ok, window, q_ok, pq_cond, chi_ok, floor)


def exponent_infimum(chi: float) -> float:
    """Infimum of ``(1-q)/p`` over all admissible (p, q)."""
    if chi <= 0:
        raise DomainError(f"chi must be positive, got {chi}")
    if chi <= 1:
        return 1.0
    if chi < 2:
        return float(chi)
    return 1.0 + chi * chi / 4.0


def n_integrability_exponent(chi: float, dim: int) -> float:
    """An exponent rho > 1 for which the space-time integral of n^rho is controlled.

    For N = 2 any rho in [1, p+1) works with admissible p; we take p half of
    its upper limit and rho in the middle of the range.  For N = 3 the pair
    (p, q) must make ``(1-q)/p`` smaller than 5/3; the choice close to the
    infimum of that ratio is located numerically and rho is set halfway to the
    largest exponent with ``(1-q) rho / (p+1-rho) < 5/3``.
    """
    p_max = min(1.0, 1.0 / (chi * chi))
    if dim == 2:
        return 1.0 + 0.25 * p_max
    if not admissible_chi(chi, dim):
        raise DomainError(f"no integrability exponent for chi = {chi} in 3D")

    def ratio(p):
        return (1.0 - q_pm(p, chi)[1]) / p

    res = minimize_scalar(ratio, bounds=(1e-9 * p_max, p_max * (1 - 1e-12)), method="bounded",
                          options={"xatol": 1e-10})
    p = float(res.x)
    lo, hi = q_pm(p, chi)
    q = lo + 0.999 * (hi - lo)
    r_max = 5.0 * (p + 1.0) / (3.0 * (1.0 - q) + 5.0)
    if r_max <= 1.0:
        raise DomainError(f"no integrability exponent for chi = {chi} in 3D")
    return 1.0 + 0.5 * (r_max - 1.0)


def coth_bound(a, b, t):
    """Upper envelope ``sqrt(b/a) coth(sqrt(ab) t)`` for y' <= -a y^2 + b."""
    t_arr = np.asarray(t, dtype=float)
    if not (a > 0 and b > 0) or np.any(t_arr <= 0):
        raise DomainError("coth_bound needs a, b, t > 0")
    out = math.sqrt(b / a) / np.tanh(math.sqrt(a * b) * t_arr)
    return float(out) if out.ndim == 0 else out
