"""Command-line front end: ``check-params``, ``run``, ``certify`` and ``sweep``.

Runs are described by an INI file; a minimal one is

    [model]
    chi = 2.0
    eps = 0.1
    p = 0.2
    q = 0.3

    [grid]
    nx = 64
    ny = 64

    [phi:plateau]
    modes = 0, 0

Every other section and key has a default (see ``SECTIONS``).  Exit codes:
0 pass, 1 admissibility or certificate failure, 2 configuration or runtime
error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .chemotaxis import FieldState, InitialData, SchemeConfig, Trajectory, simulate
from .errors import ConfigError, KSCertError
from .grid import Grid, write_snapshot
from .monitor import (CertificateTolerances, certify, read_csv, record_columns, write_csv)
from .params import ModelParams, check_pq, exponent_infimum
from .stokes import PotentialSpec
from .testfn import make_cosine_phi, make_stream_psi

OUTPUT_ROOT_ENV = "KSCERT_OUTPUT_ROOT"

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def _float(s):
    return float(s)


def _int(s):
    return int(s)


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s):
    return tuple(float(v) for v in s.replace(";", ",").split(",") if v.strip())


def _ints(s):
    return tuple(int(v) for v in s.replace(";", ",").split(",") if v.strip())


def _str(s):
    return s.strip()


def _float_or_none(s):
    return None if s.strip().lower() in ("", "none") else float(s)


def _dt(s):
    return "auto" if s.strip().lower() == "auto" else float(s)


def _window(s):
    if s.strip().lower() in ("", "none"):
        return None
    w = _floats(s)
    if len(w) != 2:
        raise ValueError("window needs two numbers")
    return w


# section -> key -> (parser, default); a default of REQUIRED must be given
REQUIRED = object()
SECTIONS = {
    "model": {"chi": (_float, REQUIRED), "eps": (_float, REQUIRED), "p": (_float, REQUIRED),
              "q": (_float, REQUIRED), "dim": (_int, 2), "r_c": (_float, 1.5), "r_gc": (_float, 1.2)},
    "grid": {"nx": (_int, REQUIRED), "ny": (_int, REQUIRED), "lx": (_float, 1.0), "ly": (_float, 1.0)},
    "initial": {"preset": (_str, "gaussian_bump"), "mass": (_float, 1.0), "center": (_floats, (0.5, 0.5)),
                "center2": (_floats, (0.3, 0.7)), "width": (_float, 0.2), "mean": (_float, 1.0),
                "amplitude": (_float, 0.5), "modes": (_ints, (1, 1)), "c0_floor": (_float, 1.0),
                "c0_amplitude": (_float, 0.0), "u0": (_str, "zero"), "u0_amplitude": (_float, 0.0)},
    "scheme": {"dt": (_dt, "auto"), "t_final": (_float, 0.5), "cfl_factor": (_float, 0.4),
               "snapshot_stride": (_int, 0), "tol_div": (_float, 1e-8), "poisson_tol": (_float, 1e-10),
               "max_iters": (_int, 2000), "dt_max": (_float_or_none, None), "solver": (_str, "spectral"),
               "deterministic": (_bool, False), "projection": (_str, "incremental"),
               "dt_cap_h": (_float, 0.25), "blowup_threshold": (_float, 1e12)},
    "potential": {"kind": (_str, "linear"), "coefficients": (_floats, (0.0, -1.0))},
    "output": {"directory": (_str, "kscert_runs"), "name": (_str, "run")},
    "tolerances": {f.name: (_float, f.default) for f in fields(CertificateTolerances)},
}
PHI_KEYS = {"modes": (_ints, REQUIRED), "window": (_window, None), "nonneg": (_bool, True),
            "amplitude": (_float, 1.0)}
PSI_KEYS = {"modes": (_ints, REQUIRED), "window": (_window, None), "amplitude": (_float, 1.0)}


@dataclass
class RunConfig:
    params: ModelParams
    grid: Grid
    init: InitialData
    scheme: SchemeConfig
    potential: PotentialSpec
    phis: list = field(default_factory=list)
    psis: list = field(default_factory=list)
    output_dir: str = "kscert_runs"
    name: str = "run"
    tolerances: CertificateTolerances = field(default_factory=CertificateTolerances)
    raw: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)

    def to_dict(self) -> dict:
        return {"config": self.raw, "config_hash": self.config_hash}


def config_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _section_values(name, section: dict, schema: dict, lines: dict) -> dict:
    out = {}
    for key in section:
        if key not in schema:
            raise ConfigError(f"unknown key '{key}' in [{name}]", key=f"{name}.{key}", line=lines.get((name, key)))
    for key, (parse, default) in schema.items():
        if key in section:
            try:
                out[key] = parse(section[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for '{key}' in [{name}]: {exc}", key=f"{name}.{key}",
                                  line=lines.get((name, key))) from None
        elif default is REQUIRED:
            raise ConfigError(f"missing required key '{key}' in [{name}]", key=key)
        else:
            out[key] = default
    return out


def _key_lines(text: str) -> dict:
    # configparser drops line numbers; recover them for error messages
    lines, section = {}, None
    for i, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
        elif section and s and s[0] not in "#;" and ("=" in s or ":" in s):
            key = s.split("=", 1)[0].split(":", 1)[0].strip().lower()
            lines.setdefault((section, key), i)
    return lines


def parse_config_text(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}", line=getattr(exc, "lineno", None)) from None
    raw = {s: dict(cp[s]) for s in cp.sections()}
    return build_config(raw, _key_lines(text))


def build_config(raw: dict, lines: dict | None = None) -> RunConfig:
    """Validate a section -> key -> string mapping into a :class:`RunConfig`."""
    lines = lines or {}
    for s in raw:
        if s not in SECTIONS and not s.startswith(("phi:", "psi:")):
            raise ConfigError(f"unknown section [{s}]", key=s, line=None)
    for s in ("model", "grid"):
        if s not in raw:
            raise ConfigError(f"missing section [{s}]", key=s)
    v = {s: _section_values(s, raw.get(s, {}), schema, lines) for s, schema in SECTIONS.items()}
    try:
        params = ModelParams(**v["model"])
        grid = Grid(v["grid"]["nx"], v["grid"]["ny"], v["grid"]["lx"], v["grid"]["ly"])
        init = InitialData(**v["initial"])
        sch = dict(v["scheme"])
        sch["T"] = sch.pop("t_final")
        scheme = SchemeConfig(**sch)
        potential = PotentialSpec(v["potential"]["kind"], v["potential"]["coefficients"])
        phis, psis = [], []
        for s in sorted(raw):
            if s.startswith("phi:"):
                d = _section_values(s, raw[s], PHI_KEYS, lines)
                phis.append(make_cosine_phi(d["modes"], grid.lengths, d["window"], d["nonneg"], d["amplitude"]))
            elif s.startswith("psi:"):
                d = _section_values(s, raw[s], PSI_KEYS, lines)
                psis.append(make_stream_psi(d["modes"], grid.lengths, d["window"], d["amplitude"]))
    except ConfigError:
        raise
    except KSCertError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
    tol = CertificateTolerances(**v["tolerances"])
    return RunConfig(params, grid, init, scheme, potential, phis, psis, v["output"]["directory"],
                     v["output"]["name"], tol, {s: dict(d) for s, d in raw.items()})


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from None
    return parse_config_text(text)


def output_root(cfg: RunConfig, override: str | None = None) -> Path:
    return Path(override or os.environ.get(OUTPUT_ROOT_ENV) or cfg.output_dir)


# ---------------------------------------------------------------- commands

def cmd_check_params(cfg: RunConfig, out=None) -> int:
    out = out if out is not None else sys.stdout
    rep = check_pq(cfg.params)
    d = rep.to_dict()
    d["exponent_infimum"] = exponent_infimum(cfg.params.chi)
    d["admissible"] = rep.admissible
    d["config_hash"] = cfg.config_hash
    for k, val in d.items():
        print(f"{k}: {val}", file=out)
    return EXIT_PASS if rep.admissible else EXIT_FAIL


def _plot_series(traj) -> dict:
    recs = traj.records
    t = [r.t for r in recs]
    m0 = recs[0].mass_n
    series = {
        "mass_drift": [abs(r.mass_n - m0) / abs(m0) if m0 else abs(r.mass_n) for r in recs],
        "c_envelope_ratio": [r.min_c / r.c_envelope for r in recs],
        "divergence": [r.max_div_u / (1.0 + r.max_u) for r in recs],
        "int_ln_n": [r.int_ln_n for r in recs],
        "int_npcq": [r.int_npcq for r in recs],
        "l2_energy": [r.l2_n ** 2 + r.l2_c ** 2 for r in recs],
        "norm_u_2": [r.norm_u_2 for r in recs],
    }
    for name in record_columns():
        if name.startswith("cum_"):
            series[name] = [getattr(r, name) for r in recs]
    return {k: (t, v) for k, v in series.items()}


def write_outputs(traj: Trajectory, cfg: RunConfig, run_dir: Path) -> dict:
    """Write every artifact of a finished or aborted run; returns the report dict."""
    run_dir.mkdir(parents=True, exist_ok=True)
    h = cfg.config_hash
    meta = dict(traj.metadata)
    meta.update(cfg.to_dict())
    (run_dir / "metadata.json").write_text(json.dumps(meta, indent=1, default=_json_default))
    write_csv(traj.records, run_dir / "monitor.csv", config_hash=h)
    (run_dir / "weak.json").write_text(json.dumps({"config_hash": h, "weak": traj.weak}, indent=1,
                                                  default=_json_default))
    snap = run_dir / "snapshots"
    snap.mkdir(exist_ok=True)
    for i, st in enumerate(traj.states):
        for name in ("n", "c"):
            write_snapshot(snap / f"{name}_{i:05d}_{h}.bin", getattr(st, name), traj.grid, st.t, name)
    arrays = {"t": np.array([s.t for s in traj.states])}
    for name in ("n", "c", "P"):
        arrays[name] = np.stack([getattr(s, name) for s in traj.states])
    for a in range(traj.grid.dim):
        arrays[f"u{a}"] = np.stack([s.u[a] for s in traj.states])
    np.savez(run_dir / "trajectory.npz", **arrays)
    report = certify(traj, cfg.params, tolerances=cfg.tolerances)
    rep = report.to_dict()
    rep["config_hash"] = h
    (run_dir / "certificate.json").write_text(json.dumps(rep, indent=1, default=_json_default))
    plots = run_dir / "plots"
    plots.mkdir(exist_ok=True)
    for name, (t, vals) in _plot_series(traj).items():
        with open(plots / f"{name}.dat", "w") as fh:
            fh.write(f"# config_hash={h}\n# t {name}\n")
            for ti, vi in zip(t, vals):
                fh.write(f"{ti!r} {vi!r}\n")
    marker = run_dir / "ABORTED"
    if traj.failure is not None:
        marker.write_text(json.dumps({"config_hash": h, **traj.failure}, default=_json_default))
    elif marker.exists():
        marker.unlink()
    return rep


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    return str(o)


def run_dir_for(cfg: RunConfig, root: Path) -> Path:
    return root / f"{cfg.name}-{cfg.config_hash}"


def execute(cfg: RunConfig, root: Path) -> tuple[Trajectory, dict, Path]:
    traj = simulate(cfg.params, cfg.grid, cfg.init, cfg.scheme, cfg.potential, cfg.phis, cfg.psis)
    run_dir = run_dir_for(cfg, root)
    rep = write_outputs(traj, cfg, run_dir)
    return traj, rep, run_dir


def cmd_run(cfg: RunConfig, root: Path, out=None) -> int:
    out = out if out is not None else sys.stdout
    traj, rep, run_dir = execute(cfg, root)
    print(f"config_hash: {cfg.config_hash}", file=out)
    print(f"output: {run_dir}", file=out)
    print(f"steps: {traj.metadata['steps']}  dt range: {traj.metadata['dt_min']} .. {traj.metadata['dt_max']}",
          file=out)
    for e in rep["entries"]:
        print(f"  {e['status']:>14}  {e['name']}  residual={e['residual']}", file=out)
    if traj.failure is not None:
        print(f"aborted: {traj.failure['reason']} at step {traj.failure['step']}: {traj.failure['message']}",
              file=out)
        return EXIT_ERROR
    return EXIT_PASS if rep["all_pass"] else EXIT_FAIL


def load_trajectory(run_dir: Path) -> tuple[Trajectory, RunConfig]:
    """Rebuild a stored run (records, weak sums, snapshots) from its directory."""
    meta = json.loads((run_dir / "metadata.json").read_text())
    cfg = build_config(meta["config"])
    traj = Trajectory(cfg.params, cfg.grid, stride=cfg.scheme.snapshot_stride, metadata=meta)
    traj.records = read_csv(run_dir / "monitor.csv")
    traj.weak = json.loads((run_dir / "weak.json").read_text())["weak"]
    data = np.load(run_dir / "trajectory.npz")
    for i, t in enumerate(data["t"]):
        u = tuple(data[f"u{a}"][i] for a in range(cfg.grid.dim))
        traj.states.append(FieldState(data["n"][i], data["c"][i], u, data["P"][i], float(t)))
    traj.times = [s.t for s in traj.states]
    traj.failure = meta.get("aborted")
    return traj, cfg


def cmd_certify(run_dir: Path, cfg_override: RunConfig | None = None, out=None) -> int:
    out = out if out is not None else sys.stdout
    traj, cfg = load_trajectory(run_dir)
    tol = cfg_override.tolerances if cfg_override is not None else cfg.tolerances
    phis = cfg_override.phis if cfg_override is not None else None
    report = certify(traj, cfg.params, phis=phis, tolerances=tol)
    rep = report.to_dict()
    rep["config_hash"] = cfg.config_hash
    (run_dir / "certificate.json").write_text(json.dumps(rep, indent=1, default=_json_default))
    for e in rep["entries"]:
        print(f"  {e['status']:>14}  {e['name']}  residual={e['residual']}", file=out)
    return EXIT_PASS if rep["all_pass"] else EXIT_FAIL


SWEEP_AXES = ("eps", "h", "chi")


def _sweep_config(raw: dict, axis: str, value: float) -> dict:
    raw = {s: dict(d) for s, d in raw.items()}
    if axis in ("eps", "chi"):
        raw["model"][axis] = repr(value)
    else:
        g = raw["grid"]
        for n_key, l_key in (("nx", "lx"), ("ny", "ly")):
            g[n_key] = str(int(round(float(g.get(l_key, 1.0)) / value)))
    return raw


def _sweep_one(args):
    raw, axis, value, root = args
    cfg = build_config(raw)
    try:
        traj, rep, run_dir = execute(cfg, Path(root))
    except KSCertError as exc:
        return {"value": value, "status": "error", "message": str(exc)}
    row = {"value": value, "status": "aborted" if traj.failure else "completed",
           "all_pass": rep["all_pass"], "config_hash": cfg.config_hash, "run_dir": str(run_dir)}
    for e in rep["entries"]:
        row[e["name"]] = e["residual"]
    return row


def cmd_sweep(cfg: RunConfig, axis: str, values: Sequence[float], root: Path, jobs: int = 1,
              out=None) -> int:
    out = out if out is not None else sys.stdout
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}", key="axis")
    values = [float(v) for v in values]
    if not values:
        raise ConfigError("sweep needs at least one value", key="values")
    d = np.diff(values)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise ConfigError("sweep values must be strictly monotone", key="values")
    tasks = [(_sweep_config(cfg.raw, axis, v), axis, v, str(root)) for v in values]
    for raw, *_ in tasks:
        build_config(raw)  # fail fast on values that produce an invalid model
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sweep_one, tasks))
    else:
        rows = [_sweep_one(t) for t in tasks]
    cols = ["value", "status", "all_pass", "config_hash"]
    for r in rows:
        cols += [k for k in r if k not in cols and k not in ("run_dir", "message")]
    root.mkdir(parents=True, exist_ok=True)
    stem = f"sweep-{axis}-{cfg.config_hash}"
    with open(root / f"{stem}.csv", "w", newline="") as fh:
        fh.write(f"# config_hash={cfg.config_hash}\n")
        w = csv.DictWriter(fh, cols, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)
    if axis == "h":
        orders = convergence_orders(values, rows)
        with open(root / f"{stem}-orders.csv", "w", newline="") as fh:
            fh.write(f"# config_hash={cfg.config_hash}\n")
            w = csv.writer(fh)
            w.writerow(["certificate", "h_coarse", "h_fine", "order"])
            w.writerows(orders)
        for name, h0, h1, p in orders:
            print(f"order {name} [{h0:g} -> {h1:g}]: {p:.3f}", file=out)
    for r in rows:
        print(f"{axis}={r['value']:g}: {r['status']} all_pass={r.get('all_pass')}", file=out)
    if any(r["status"] != "completed" for r in rows):
        return EXIT_ERROR
    return EXIT_PASS if all(r["all_pass"] for r in rows) else EXIT_FAIL


def convergence_orders(hs: Sequence[float], rows: Sequence[dict]) -> list:
    """Empirical orders log(r_i / r_{i+1}) / log(h_i / h_{i+1}) of every weak residual."""
    out = []
    names = [k for k in rows[0] if k.startswith(("weak_", "supersolution"))]
    for name in names:
        for (h0, r0), (h1, r1) in zip(zip(hs, rows), zip(hs[1:], rows[1:])):
            a, b = r0.get(name), r1.get(name)
            if isinstance(a, float) and isinstance(b, float) and a != 0 and b != 0:
                out.append((name, h0, h1, math.log(abs(a) / abs(b)) / math.log(h0 / h1)))
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kscert", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("check-params", help="print the admissibility report of a configuration")
    p.add_argument("config")
    p = sub.add_parser("run", help="simulate, certify and write all artifacts")
    p.add_argument("config")
    p.add_argument("--output-root", default=None)
    p = sub.add_parser("certify", help="re-run the certificates on a stored run directory")
    p.add_argument("run_dir")
    p.add_argument("--config", default=None, help="optional config supplying tolerances and test functions")
    p = sub.add_parser("sweep", help="one run per value along an axis")
    p.add_argument("config")
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", required=True, help="comma-separated, strictly monotone")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output-root", default=None)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check-params":
            return cmd_check_params(load_config(args.config))
        if args.command == "run":
            cfg = load_config(args.config)
            return cmd_run(cfg, output_root(cfg, args.output_root))
        if args.command == "certify":
            override = load_config(args.config) if args.config else None
            return cmd_certify(Path(args.run_dir), override)
        cfg = load_config(args.config)
        try:
            values = _floats(args.values)
        except ValueError as exc:
            raise ConfigError(f"bad sweep values: {exc}", key="values") from None
        return cmd_sweep(cfg, args.axis, values, output_root(cfg, args.output_root), args.jobs)
    except ConfigError as exc:
        where = f" (key {exc.key})" if exc.key else ""
        where += f" (line {exc.line})" if exc.line else ""
        print(f"configuration error: {exc}{where}", file=sys.stderr)
        return EXIT_ERROR
    except (KSCertError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
