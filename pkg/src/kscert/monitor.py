"""Per-step functionals, space-time weak-form sums and the certificate report.

Space integrals use the midpoint rule, time integrals the left-endpoint
rectangle rule: the cumulative fields of the record at time ``t_k`` sum the
integrands of the states at ``t_0, ..., t_{k-1}``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, StrideError
from .grid import Grid, cell_gradient, divergence, grad_norm_sq, integrate, velocity_at_centers
from .params import ModelParams, check_pq, n_integrability_exponent, supersolution_coefficient
from .stokes import PotentialSpec, buoyancy_forcing


@dataclass
class MonitorRecord:
    t: float = 0.0
    mass_n: float = 0.0
    min_n: float = 0.0
    min_c: float = 0.0
    c_envelope: float = 0.0
    int_c: float = 0.0
    int_c_q: float = 0.0
    int_npcq: float = 0.0
    int_ln_n: float = 0.0
    cum_grad_cq2: float = 0.0
    cum_c_r: float = 0.0
    cum_grad_c_r: float = 0.0
    cum_grad_np2: float = 0.0
    cum_cq_grad_np2: float = 0.0
    cum_np1_cqm1: float = 0.0
    cum_n_rho: float = 0.0
    max_div_u: float = 0.0
    norm_u_2: float = 0.0
    norm_u_29: float = 0.0
    max_u: float = 0.0
    l2_n: float = 0.0
    l2_c: float = 0.0
    min_npcq_boundary: float = 0.0
    cfl_used: float = 0.0
    dt: float = 0.0
    solver_iters: int = 0
    solver_residual: float = 0.0


CUMULATIVE = ("cum_grad_cq2", "cum_c_r", "cum_grad_c_r", "cum_grad_np2", "cum_cq_grad_np2",
              "cum_np1_cqm1", "cum_n_rho")


def record_columns() -> list[str]:
    return [f.name for f in fields(MonitorRecord)]


def _boundary_min(f: np.ndarray) -> float:
    vals = []
    for a in range(f.ndim):
        vals.append(np.take(f, 0, axis=a).min())
        vals.append(np.take(f, -1, axis=a).min())
    return float(min(vals))


def step_rates(state, params: ModelParams, grid: Grid, rho: float) -> dict:
    """Integrands (already integrated in space) of the cumulative monitors."""
    n, c = state.n, state.c
    cq = c ** params.q
    g_np2 = grad_norm_sq(n ** (0.5 * params.p), grid)
    return {
        "cum_grad_cq2": integrate(grad_norm_sq(c ** (0.5 * params.q), grid), grid),
        "cum_c_r": integrate(c, grid, params.r_c),
        "cum_grad_c_r": integrate(grad_norm_sq(c, grid), grid, 0.5 * params.r_gc),
        "cum_grad_np2": integrate(g_np2, grid),
        "cum_cq_grad_np2": integrate(cq * g_np2, grid),
        "cum_np1_cqm1": integrate(n ** (params.p + 1.0) * c ** (params.q - 1.0), grid),
        "cum_n_rho": integrate(n, grid, rho),
    }


def record_step(state, params: ModelParams, grid: Grid, c0_min: float,
                prev: MonitorRecord | None = None, prev_rates: dict | None = None,
                rho: float | None = None, dt: float = 0.0, cfl_used: float = 0.0,
                solver_iters: int = 0, solver_residual: float = 0.0,
                deterministic: bool = False) -> tuple[MonitorRecord, dict]:
    """Evaluate all functionals of ``state`` and advance the cumulative ones.

    Returns the record and the integrands of ``state``, to be passed as
    ``prev_rates`` for the next call.  ``ln n`` of a vanishing density is
    reported as ``-inf`` rather than raised.
    """
    rho = rho if rho is not None else n_integrability_exponent(params.chi, params.dim)
    n, c = state.n, state.c
    integ = lambda f, power=1.0: integrate(f, grid, power, deterministic)  # noqa: E731
    npcq = n ** params.p * c ** params.q
    rec = MonitorRecord(t=state.t)
    rec.mass_n = integ(n)
    rec.min_n = float(n.min())
    rec.min_c = float(c.min())
    rec.c_envelope = c0_min * math.exp(-state.t)
    rec.int_c = integ(c)
    rec.int_c_q = integ(c, params.q)
    rec.int_npcq = integ(npcq)
    if rec.min_n > 0:
        rec.int_ln_n = integ(np.log(n))
    else:
        rec.int_ln_n = -math.inf
    rates = step_rates(state, params, grid, rho)
    for name in CUMULATIVE:
        base = getattr(prev, name) if prev is not None else 0.0
        inc = dt * prev_rates[name] if prev_rates is not None else 0.0
        setattr(rec, name, base + inc)
    rec.max_div_u = float(np.abs(divergence(state.u, grid)).max())
    speed = np.sqrt(sum(uc ** 2 for uc in velocity_at_centers(state.u)))
    rec.norm_u_2 = integ(speed, 2.0) ** 0.5
    rec.norm_u_29 = integ(speed, 2.9) ** (1.0 / 2.9)
    rec.max_u = max(float(np.abs(ua).max()) for ua in state.u)
    rec.l2_n = integ(n, 2.0) ** 0.5
    rec.l2_c = integ(c, 2.0) ** 0.5
    rec.min_npcq_boundary = _boundary_min(npcq)
    rec.cfl_used = cfl_used
    rec.dt = dt
    rec.solver_iters = solver_iters
    rec.solver_residual = solver_residual
    return rec, rates


def identity_integrands(n, c, grad_nh, grad_ch, u_cell, phi, grad_phi, lap_phi,
                        p: float, q: float, chi: float, eps: float) -> dict:
    """Pointwise integrands of the right-hand side of the weak (p, q) balance.

    ``grad_nh`` and ``grad_ch`` are the gradients of ``n^{p/2}`` and
    ``c^{q/2}``.  With ``eps = 0`` the coefficients reduce to the limiting
    ones of the supersolution inequality.
    """
    w = 1.0 / (1.0 + eps * n)
    nh = n ** (0.5 * p)
    ch = c ** (0.5 * q)
    cq = ch * ch
    Q = nh * nh * cq
    gnh2 = sum(g * g for g in grad_nh)
    coef = supersolution_coefficient(p, q, chi, eps * n)
    denom = p * chi * w + 1.0 - q
    B = ((1.0 - p) * chi * w + 2.0 * q) / (2.0 * denom)
    sq = sum((nh * gc - B * ch * gn) ** 2 for gc, gn in zip(grad_ch, grad_nh))
    cross_coef = 2.0 * chi * ((1.0 - p) * eps * n - p) * w * w / q
    return {
        "coef": coef * cq * gnh2 * phi,
        "square": 4.0 / q * denom * sq * phi,
        "cross": cross_coef * nh * cq * sum(g * gp for g, gp in zip(grad_nh, grad_phi)),
        "lap": (1.0 - p * chi * w / q) * Q * lap_phi,
        "decay": -q * Q * phi,
        "source": q * n ** (p + 1.0) * c ** (q - 1.0) * phi,
        "transport": Q * sum(uc * gp for uc, gp in zip(u_cell, grad_phi)),
    }


IDENTITY_TERMS = ("coef", "square", "cross", "lap", "decay", "source", "transport")


class ScalarWeakSums:
    """Accumulates the space-time sums of one scalar test function along a run.

    Covers three relations at once: the weak (p, q) balance at the run's
    eps, the limiting (eps = 0) supersolution inequality, and the weak form
    of the signal equation.
    """

    def __init__(self, phi, params: ModelParams, grid: Grid):
        self.phi = phi
        self.params = params
        self.grid = grid
        x = grid.centers()
        self._S = phi.spatial(x)
        self._G = phi.spatial_grad(x)
        self._L = phi.spatial_lap(x)
        self.sums = {f"id_{k}": 0.0 for k in IDENTITY_TERMS}
        self.sums.update({f"sup_{k}": 0.0 for k in IDENTITY_TERMS})
        self.sums.update(Q_phit=0.0, Q_init=0.0, Q_final=0.0, c_phit=0.0, c_init=0.0, c_final=0.0,
                         c_lap=0.0, c_decay=0.0, c_source=0.0, c_transport=0.0)
        self.steps = 0
        self._cache = None

    def _Q(self, state):
        return state.n ** self.params.p * state.c ** self.params.q

    def start(self, state) -> None:
        eta = self.phi.profile.value(state.t)
        self.sums["Q_init"] = integrate(self._Q(state) * self._S, self.grid) * eta
        self.sums["c_init"] = integrate(state.c * self._S, self.grid) * eta

    def _level(self, state) -> dict:
        """Space integrals at one time level, for eta = 1 (every term is linear in eta)."""
        if self._cache is not None and self._cache[0] is state:
            return self._cache[1]
        g, p, q = self.grid, self.params.p, self.params.q
        out = {"Q": integrate(self._Q(state) * self._S, g), "c": integrate(state.c * self._S, g)}
        u_cell = velocity_at_centers(state.u)
        grad_nh = cell_gradient(state.n ** (0.5 * p), g)
        grad_ch = cell_gradient(state.c ** (0.5 * q), g)
        for prefix, eps in (("id_", self.params.eps), ("sup_", 0.0)):
            terms = identity_integrands(state.n, state.c, grad_nh, grad_ch, u_cell, self._S, self._G,
                                        self._L, p, q, self.params.chi, eps)
            for k, v in terms.items():
                out[prefix + k] = integrate(v, g)
        c = state.c
        out["c_lap"] = integrate(c * self._L, g)
        out["c_decay"] = -integrate(c * self._S, g)
        out["c_source"] = integrate(state.n * self._S, g)
        out["c_transport"] = integrate(c * sum(uc * gp for uc, gp in zip(u_cell, self._G)), g)
        self._cache = (state, out)
        return out

    def add(self, old, new) -> None:
        """Add the step ``old -> new`` with the trapezoidal rule in time.

        The time-derivative term is summed by parts, ``(eta_{k+1} - eta_k)``
        times the mean of the two levels, so eta'' never has to be resolved
        by the step size.
        """
        dt = new.t - old.t
        eta0 = self.phi.profile.value(old.t)
        eta1 = self.phi.profile.value(new.t)
        self.steps += 1
        if eta0 == 0.0 and eta1 == 0.0:
            return
        r0, r1 = self._level(old), self._level(new)
        deta = eta1 - eta0
        self.sums["Q_phit"] += deta * 0.5 * (r0["Q"] + r1["Q"])
        self.sums["c_phit"] += deta * 0.5 * (r0["c"] + r1["c"])
        for k in r1:
            if k not in ("Q", "c"):
                self.sums[k] += 0.5 * dt * (eta0 * r0[k] + eta1 * r1[k])

    def finish(self, state) -> dict:
        eta = self.phi.profile.value(state.t)
        self.sums["Q_final"] = integrate(self._Q(state) * self._S, self.grid) * eta
        self.sums["c_final"] = integrate(state.c * self._S, self.grid) * eta
        return self.result()

    def result(self) -> dict:
        s = self.sums
        lhs_q = -s["Q_phit"] + s["Q_final"] - s["Q_init"]
        lhs_pieces = [s["Q_phit"], s["Q_final"], s["Q_init"]]
        rhs_id = sum(s[f"id_{k}"] for k in IDENTITY_TERMS)
        rhs_sup = sum(s[f"sup_{k}"] for k in IDENTITY_TERMS)
        lhs_c = -s["c_phit"] + s["c_final"] - s["c_init"]
        c_terms = [s["c_lap"], s["c_decay"], s["c_source"], s["c_transport"]]
        return {
            "phi": self.phi.to_dict(),
            "steps": self.steps,
            "sums": dict(s),
            "identity_lhs": lhs_q,
            "identity_rhs": rhs_id,
            "identity_residual": abs(lhs_q - rhs_id),
            "identity_scale": max(abs(v) for v in lhs_pieces + [s[f"id_{k}"] for k in IDENTITY_TERMS]),
            "super_rhs": rhs_sup,
            "super_residual": lhs_q - rhs_sup,
            "super_scale": max(abs(v) for v in lhs_pieces + [s[f"sup_{k}"] for k in IDENTITY_TERMS]),
            "c_lhs": lhs_c,
            "c_rhs": sum(c_terms),
            "c_residual": lhs_c - sum(c_terms),
            "c_scale": max(abs(v) for v in [s["c_phit"], s["c_final"], s["c_init"]] + c_terms),
        }


class SolenoidalWeakSums:
    """Space-time sums of the weak momentum balance for one solenoidal field."""

    def __init__(self, psi, grid: Grid, potential: PotentialSpec):
        self.psi = psi
        self.grid = grid
        self.potential = potential
        self._S, self._L = [], []
        for a in range(grid.dim):
            inner = [slice(None)] * grid.dim
            inner[a] = slice(1, -1)
            xf = [xa[tuple(inner)] for xa in grid.face_coords(a)]
            self._S.append(psi.spatial(xf)[a])
            self._L.append(psi.spatial_lap(xf)[a])
        self.sums = dict(u_psit=0.0, u_init=0.0, u_final=0.0, u_lap=0.0, u_force=0.0)
        self.steps = 0
        self._cache = None

    def _dot(self, u, comps) -> float:
        total = 0.0
        for a in range(self.grid.dim):
            inner = [slice(None)] * self.grid.dim
            inner[a] = slice(1, -1)
            total += float(np.sum(u[a][tuple(inner)] * comps[a]))
        return total * self.grid.cell_volume

    def start(self, state) -> None:
        self.sums["u_init"] = self._dot(state.u, self._S) * self.psi.profile.value(state.t)

    def _level(self, state) -> tuple[float, float, float]:
        if self._cache is not None and self._cache[0] is state:
            return self._cache[1]
        f = buoyancy_forcing(state.n, self.potential, self.grid)
        force = sum(float(np.sum(fa * Sa)) for fa, Sa in zip(f, self._S)) * self.grid.cell_volume
        out = (self._dot(state.u, self._S), self._dot(state.u, self._L), force)
        self._cache = (state, out)
        return out

    def add(self, old, new) -> None:
        """Implicit-Euler time rule: viscous term at the new level, buoyancy
        with the old density, matching the momentum update of the scheme."""
        dt = new.t - old.t
        eta0 = self.psi.profile.value(old.t)
        eta1 = self.psi.profile.value(new.t)
        self.steps += 1
        if eta0 == 0.0 and eta1 == 0.0:
            return
        (u0, _, f0), (_, l1, _) = self._level(old), self._level(new)
        self.sums["u_psit"] += (eta1 - eta0) * u0
        self.sums["u_lap"] += dt * eta1 * l1
        self.sums["u_force"] += dt * eta1 * f0

    def finish(self, state) -> dict:
        self.sums["u_final"] = self._dot(state.u, self._S) * self.psi.profile.value(state.t)
        return self.result()

    def result(self) -> dict:
        s = self.sums
        lhs = -s["u_psit"] + s["u_final"] - s["u_init"]
        rhs = s["u_lap"] + s["u_force"]
        return {"psi": self.psi.to_dict(), "steps": self.steps, "sums": dict(s), "u_lhs": lhs,
                "u_rhs": rhs, "u_residual": lhs - rhs,
                "u_scale": max(abs(v) for v in s.values())}


def phi_label(i: int, phi) -> str:
    return f"phi{i}:" + ",".join(str(k) for k in phi.modes)


def psi_label(i: int, psi) -> str:
    return f"psi{i}:" + ",".join(str(k) for k in psi.modes)


class Monitor:
    """Stateful wrapper feeding :func:`record_step` and the weak-form sums."""

    def __init__(self, params: ModelParams, grid: Grid, c0_min: float, potential: PotentialSpec,
                 test_functions: Sequence = (), solenoidal: Sequence = (), deterministic: bool = False):
        self.params = params
        self.grid = grid
        self.c0_min = c0_min
        self.rho = n_integrability_exponent(params.chi, params.dim)
        self.deterministic = deterministic
        self.scalar = {phi_label(i, phi): ScalarWeakSums(phi, params, grid)
                       for i, phi in enumerate(test_functions)}
        self.vector = {psi_label(i, psi): SolenoidalWeakSums(psi, grid, potential)
                       for i, psi in enumerate(solenoidal)}
        self._prev: MonitorRecord | None = None
        self._rates: dict | None = None

    def start(self, state) -> MonitorRecord:
        rec, self._rates = record_step(state, self.params, self.grid, self.c0_min, rho=self.rho,
                                       deterministic=self.deterministic)
        self._prev = rec
        for acc in list(self.scalar.values()) + list(self.vector.values()):
            acc.start(state)
        return rec

    def advance(self, old_state, new_state, dt: float, cfl_used: float = 0.0,
                solver_iters: int = 0, solver_residual: float = 0.0) -> MonitorRecord:
        for acc in list(self.scalar.values()) + list(self.vector.values()):
            acc.add(old_state, new_state)
        rec, rates = record_step(new_state, self.params, self.grid, self.c0_min, self._prev,
                                 self._rates, self.rho, dt, cfl_used, solver_iters, solver_residual,
                                 self.deterministic)
        self._prev, self._rates = rec, rates
        return rec

    def finish(self, state) -> dict:
        out = {label: acc.finish(state) for label, acc in self.scalar.items()}
        out.update({label: acc.finish(state) for label, acc in self.vector.items()})
        return out


# ---------------------------------------------------------------- post-hoc residuals

def _replay(traj, acc):
    if traj.stride != 1 or len(traj.states) < 1:
        raise StrideError("weak residuals need a trajectory stored at every step (stride 1)")
    states = traj.states
    acc.start(states[0])
    for old, new in zip(states[:-1], states[1:]):
        acc.add(old, new)
    return acc.finish(states[-1])


def _scalar_result(traj, phi, params: ModelParams) -> dict:
    if traj.stride == 1:
        return _replay(traj, ScalarWeakSums(phi, params, traj.grid))
    for res in traj.weak.values():
        if res.get("phi") == phi.to_dict() and params == traj.params:
            return res
    raise StrideError("trajectory was decimated and this test function was not accumulated online")


def weak_identity_residual(traj, phi, params: ModelParams) -> float:
    """Absolute defect of the weak (p, q) balance at the run's eps."""
    return _scalar_result(traj, phi, params)["identity_residual"]


def supersolution_residual(traj, phi, params: ModelParams) -> float:
    """Signed defect (lhs - rhs) of the limiting supersolution inequality."""
    if np.any(np.asarray(phi.spatial(traj.grid.centers())) < 0):
        raise DomainError("supersolution test functions must be nonnegative")
    return _scalar_result(traj, phi, params)["super_residual"]


def weak_solution_residual_c(traj, phi) -> float:
    return _scalar_result(traj, phi, traj.params)["c_residual"]


def weak_solution_residual_u(traj, psi, potential: PotentialSpec | None = None) -> float:
    grid = traj.grid
    x = grid.centers()
    jac = psi.grad(x, 0.0)
    div = sum(jac[a][a] for a in range(grid.dim))
    if float(np.abs(div).max()) > 1e-10 * (1.0 + max(float(np.abs(r).max()) for row in jac for r in row)):
        raise DomainError("test field is not divergence-free")
    if potential is None:
        pot = traj.metadata.get("potential", {"kind": "linear", "coefficients": [0.0, -1.0]})
        potential = PotentialSpec(pot["kind"], tuple(pot["coefficients"]))
    if traj.stride == 1:
        return _replay(traj, SolenoidalWeakSums(psi, grid, potential))["u_residual"]
    for res in traj.weak.values():
        if res.get("psi") == psi.to_dict():
            return res["u_residual"]
    raise StrideError("trajectory was decimated and this field was not accumulated online")


# ---------------------------------------------------------------- certificates

@dataclass
class CertificateTolerances:
    mass_rel: float = 1e-10
    envelope: float = 0.01
    div: float = 1e-8
    identity_rel: float = 0.05
    super_rel: float = 0.01
    weak_c_rel: float = 0.05
    weak_u_rel: float = 0.05
    young_slack: float = 0.05
    energy_slack: float = 0.05
    weak_abs: float = 1e-12

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class CertificateEntry:
    name: str
    statement: str
    status: str
    residual: float
    tolerance: float
    detail: dict = field(default_factory=dict)


@dataclass
class CertificateReport:
    entries: list[CertificateEntry] = field(default_factory=list)

    def add(self, name, statement, passed, residual, tolerance, detail=None, applicable=True):
        status = "not-applicable" if not applicable else ("pass" if passed else "fail")
        self.entries.append(CertificateEntry(name, statement, status, _finite_or_str(residual),
                                             tolerance, detail or {}))

    @property
    def all_pass(self) -> bool:
        return all(e.status != "fail" for e in self.entries)

    def get(self, name: str) -> CertificateEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"all_pass": self.all_pass, "entries": [asdict(e) for e in self.entries]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, default=_json_default)


def _finite_or_str(x):
    x = float(x)
    return x if math.isfinite(x) else str(x)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))


def _series(records, name):
    return np.array([getattr(r, name) for r in records], dtype=float)


def _time_integral(records, name):
    """Left-endpoint rule for the integral of a recorded functional."""
    t = _series(records, "t")
    v = _series(records, name)
    return np.concatenate([[0.0], np.cumsum(np.diff(t) * v[:-1])])


def certify(traj, params: ModelParams | None = None, phis: Iterable | None = None,
            tolerances: CertificateTolerances | None = None) -> CertificateReport:
    """Evaluate every certificate on a finished (or aborted) trajectory."""
    params = params if params is not None else traj.params
    tol = tolerances if tolerances is not None else CertificateTolerances()
    grid = traj.grid
    recs = traj.records
    rep = CertificateReport()
    t = _series(recs, "t")

    rep.add("run_completed", "the scheme reached the final time without aborting",
            traj.failure is None, 0.0 if traj.failure is None else 1.0, 0.0,
            traj.failure or {})

    mass = _series(recs, "mass_n")
    drift = float(np.max(np.abs(mass - mass[0])) / abs(mass[0])) if mass[0] != 0 else float(np.max(np.abs(mass)))
    rep.add("mass_conservation", "total cell mass stays equal to the initial mass",
            drift <= tol.mass_rel, drift, tol.mass_rel)

    min_c = _series(recs, "min_c")
    env = _series(recs, "c_envelope")
    ratio = float(np.min(min_c / env))
    rep.add("c_envelope", "min c(t) >= (inf c0) exp(-t)", ratio >= 1.0 - tol.envelope,
            1.0 - ratio, tol.envelope, {"min_ratio": ratio})

    min_n = float(np.min(_series(recs, "min_n")))
    rep.add("positivity", "n >= 0 and c > 0 at every accepted step",
            min_n >= 0 and float(min_c.min()) > 0, min(min_n, float(min_c.min())), 0.0,
            {"min_n": min_n, "min_c": float(min_c.min())})

    div = _series(recs, "max_div_u")
    umax = _series(recs, "max_u")
    div_rel = float(np.max(div / (1.0 + umax)))
    rep.add("divergence_free", "projected velocity is discretely divergence-free",
            div_rel <= tol.div, div_rel, tol.div)

    for name in CUMULATIVE:
        v = _series(recs, name)
        finite = bool(np.all(np.isfinite(v)))
        nondecr = bool(np.all(np.diff(v) >= -1e-12 * (1.0 + np.abs(v[1:]))))
        detail = {"final": float(v[-1]) if finite else str(v[-1])}
        if len(v) > 2 and t[-1] > 0 and finite:
            k = int(np.searchsorted(t, 0.5 * t[-1]))
            early = v[k] / t[k] if t[k] > 0 else float("nan")
            late = (v[-1] - v[k]) / (t[-1] - t[k]) if t[-1] > t[k] else float("nan")
            detail.update(mean_rate_first_half=float(early), mean_rate_second_half=float(late))
        rep.add(f"bounded_{name}", "space-time integral stays finite",
                finite and nondecr, v[-1], math.inf, detail,
                applicable=params.bounded_by_theory(name))

    adm = check_pq(params)
    rep.add("coefficient_positivity", "the gradient coefficient has a positive lower bound",
            adm.p_ok and adm.q_ok and adm.coefficient_floor > 0, adm.coefficient_floor, 0.0,
            adm.to_dict())

    # pointwise Young split: n^p c^q <= p n + q c + (1 - p - q) needs q < 1 - p
    if params.q < 1.0 - params.p:
        const = (1.0 - params.p - params.q) / (1.0 - params.p) * grid.volume
        bound = params.p * mass + params.q * _series(recs, "int_c") + const
        lhs = _series(recs, "int_npcq")
        violations = int(np.sum(lhs > bound * (1.0 + tol.young_slack)))
        worst = float(np.max(lhs / bound))
        rep.add("young_split", "int n^p c^q <= p int n + q int c + const at every step",
                violations == 0, worst, 1.0 + tol.young_slack, {"violations": violations})
    else:
        rep.add("young_split", "int n^p c^q <= p int n + q int c + const at every step",
                True, 0.0, 0.0, applicable=False)

    q = params.q
    c0 = min_c[0]
    weight = np.exp(q * t) / c0 ** q
    lhs = _series(recs, "cum_grad_np2")
    rhs = _series(recs, "cum_cq_grad_np2") * weight
    worst = float(np.max(lhs - rhs * (1.0 + 1e-12)))
    rep.add("gradient_weighting", "int int |grad n^{p/2}|^2 <= e^{qt}/(inf c0)^q int int c^q |grad n^{p/2}|^2",
            worst <= 0.0, worst, 0.0)

    if adm.p_ok and adm.q_ok:
        floor = adm.coefficient_floor
        e_lhs = floor * _series(recs, "cum_cq_grad_np2") + q * _series(recs, "cum_np1_cqm1") \
            + _series(recs, "int_npcq")[0]
        e_rhs = _series(recs, "int_npcq") + q * _time_integral(recs, "int_npcq")
        excess = float(np.max(e_lhs / e_rhs)) - 1.0
        rep.add("energy_balance", "dissipation controlled by int n^p c^q and its time integral",
                excess <= tol.energy_slack, excess, tol.energy_slack)
    else:
        rep.add("energy_balance", "dissipation controlled by int n^p c^q and its time integral",
                True, 0.0, tol.energy_slack, applicable=False)

    rho_v = _series(recs, "cum_n_rho")
    rep.add("n_integrability", "int int n^rho stays finite for some rho > 1",
            bool(np.all(np.isfinite(rho_v))), rho_v[-1], math.inf,
            {"rho": n_integrability_exponent(params.chi, params.dim)} if params.dim == 2 or params.chi < 5 / 3 else {},
            applicable=params.dim == 2 or params.chi < 5 / 3)

    ln_n = _series(recs, "int_ln_n")
    rep.add("log_density_lower_bound", "inf over the run of int ln n is finite",
            bool(np.all(np.isfinite(ln_n))), float(np.min(ln_n)), -math.inf)

    bnd = _series(recs, "min_npcq_boundary")
    rep.add("boundary_positivity", "n^p c^q > 0 in boundary cells", bool(np.all(bnd > 0)),
            float(bnd.min()), 0.0)

    energy = _series(recs, "l2_n") ** 2 + _series(recs, "l2_c") ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        rates = np.log(energy[1:] / energy[0]) / t[1:]
    growth = float(np.max(rates)) if len(rates) else 0.0
    rep.add("l2_growth", "||n||^2 + ||c||^2 grows at most exponentially (diagnostic)",
            bool(np.isfinite(growth)), growth, math.inf)
    u2, u29 = _series(recs, "norm_u_2"), _series(recs, "norm_u_29")
    rep.add("velocity_lq", "||u||_2 and ||u||_2.9 stay bounded (diagnostic)",
            bool(np.all(np.isfinite(u2)) and np.all(np.isfinite(u29))), float(max(u2.max(), u29.max())),
            math.inf)

    weak = dict(traj.weak)
    if phis is not None:
        for i, phi in enumerate(phis):
            label = phi_label(i, phi)
            if not any(r.get("phi") == phi.to_dict() for r in weak.values()):
                weak[label] = _scalar_result(traj, phi, params)
    for label, res in weak.items():
        if "phi" in res:
            rep.add(f"weak_identity[{label}]", "weak (p,q) balance at the run's eps",
                    res["identity_residual"] <= tol.identity_rel * res["identity_scale"] + tol.weak_abs,
                    res["identity_residual"], tol.identity_rel * res["identity_scale"] + tol.weak_abs)
            if res["phi"]["nonneg"] and res["phi"]["t0"] is not None:
                rep.add(f"supersolution[{label}]", "limiting (p,q)-supersolution inequality",
                        res["super_residual"] >= -tol.super_rel * res["super_scale"] - tol.weak_abs,
                        res["super_residual"], tol.super_rel * res["super_scale"] + tol.weak_abs)
            rep.add(f"weak_c[{label}]", "weak form of the signal equation",
                    abs(res["c_residual"]) <= tol.weak_c_rel * res["c_scale"] + tol.weak_abs,
                    res["c_residual"], tol.weak_c_rel * res["c_scale"] + tol.weak_abs)
        else:
            rep.add(f"weak_u[{label}]", "weak form of the Stokes equation",
                    abs(res["u_residual"]) <= tol.weak_u_rel * res["u_scale"] + tol.weak_abs,
                    res["u_residual"], tol.weak_u_rel * res["u_scale"] + tol.weak_abs)
    return rep


def write_csv(records: Sequence[MonitorRecord], path, config_hash: str | None = None) -> None:
    cols = record_columns()
    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        w = csv.writer(fh)
        w.writerow(cols)
        for r in records:
            w.writerow([repr(getattr(r, c)) for c in cols])


def read_csv(path) -> list[MonitorRecord]:
    out = []
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    types = {f.name: f.type for f in fields(MonitorRecord)}
    for row in reader:
        kw = {k: (int(v) if types[k] in ("int", int) else float(v)) for k, v in row.items()}
        out.append(MonitorRecord(**kw))
    return out
