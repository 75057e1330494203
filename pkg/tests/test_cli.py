import io
import json

import pytest

from kscert.cli import (OUTPUT_ROOT_ENV, build_config, cmd_check_params, cmd_sweep, config_hash, load_trajectory,
                        main, parse_config_text)
from kscert.errors import ConfigError
from kscert.grid import read_snapshot
from kscert.monitor import read_csv
from kscert.params import q_pm

SMALL = """
[model]
chi = 1.0
eps = 0.1
p = 0.3
q = 0.3

[grid]
nx = 16
ny = 16

[scheme]
t_final = 0.05
deterministic = true
snapshot_stride = 4

[output]
name = small

[phi:flat]
modes = 0, 0

[psi:cell]
modes = 1, 1
"""


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def model_text(chi, q, dim=2, p=0.2):
    return f"[model]\nchi = {chi}\neps = 0.1\np = {p}\nq = {q}\ndim = {dim}\n[grid]\nnx = 8\nny = 8\n"


class TestConfig:
    def test_defaults_and_sections(self):
        cfg = parse_config_text(SMALL)
        assert cfg.scheme.T == 0.05 and cfg.scheme.dt == "auto" and cfg.scheme.deterministic
        assert cfg.grid.shape == (16, 16) and cfg.init.preset == "gaussian_bump"
        assert len(cfg.phis) == 1 and cfg.phis[0].profile.constant
        assert len(cfg.psis) == 1 and cfg.potential.coefficients == (0.0, -1.0)

    def test_missing_key_named(self):
        with pytest.raises(ConfigError) as exc:
            parse_config_text(SMALL.replace("chi = 1.0\n", ""))
        assert exc.value.key == "chi"

    def test_unknown_key_has_line(self):
        text = SMALL.replace("eps = 0.1", "eps = 0.1\ncolour = red")
        with pytest.raises(ConfigError) as exc:
            parse_config_text(text)
        assert exc.value.key == "model.colour"
        assert text.splitlines()[exc.value.line - 1].startswith("colour")

    @pytest.mark.parametrize("old,new", [("nx = 16", "nx = sixteen"), ("[output]", "[outputs]"),
                                         ("eps = 0.1", "eps = 1.5"), ("modes = 0, 0", "modes = 0, 0\nwindow = 1")])
    def test_bad_values(self, old, new):
        with pytest.raises(ConfigError):
            parse_config_text(SMALL.replace(old, new, 1))

    def test_hash_stable_and_sensitive(self):
        a = parse_config_text(SMALL)
        assert a.config_hash == parse_config_text(SMALL).config_hash
        assert a.config_hash != parse_config_text(SMALL.replace("p = 0.3", "p = 0.31")).config_hash
        assert len(a.config_hash) == 16 and a.config_hash == config_hash(a.raw)

    def test_raw_round_trip(self):
        a = parse_config_text(SMALL)
        b = build_config(json.loads(json.dumps(a.to_dict()))["config"])
        assert b.config_hash == a.config_hash and b.params == a.params


class TestCheckParams:
    def test_admissible_three_dimensional(self, tmp_path):
        qm, qp = q_pm(0.2, 1.6)
        code = main(["check-params", str(write(tmp_path, model_text(1.6, 0.5 * (qm + qp), dim=3)))])
        assert code == 0

    def test_chi_too_large_in_three_dimensions(self, tmp_path):
        assert main(["check-params", str(write(tmp_path, model_text(1.7, 0.3, dim=3)))]) == 1

    def test_report_contents(self):
        out = io.StringIO()
        cfg = parse_config_text(model_text(2.0, 0.3))
        assert cmd_check_params(cfg, out) == 0
        text = out.getvalue()
        assert "exponent_infimum" in text and cfg.config_hash in text

    def test_missing_chi_exit_code(self, tmp_path, capsys):
        assert main(["check-params", str(write(tmp_path, model_text(2.0, 0.3).replace("chi = 2.0\n", "")))]) == 2
        assert "chi" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["check-params", str(tmp_path / "absent.ini")]) == 2


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    cfg_path = write(root, SMALL)
    code = main(["run", str(cfg_path), "--output-root", str(root / "out")])
    cfg = parse_config_text(SMALL)
    return code, root / "out" / f"small-{cfg.config_hash}", cfg, cfg_path


class TestRun:
    def test_exit_and_artifacts(self, small_run):
        code, run_dir, cfg, _ = small_run
        assert code == 0
        h = cfg.config_hash
        for f in ("metadata.json", "monitor.csv", "weak.json", "certificate.json", "trajectory.npz"):
            assert (run_dir / f).exists()
        assert not (run_dir / "ABORTED").exists()
        snaps = sorted((run_dir / "snapshots").glob("n_*.bin"))
        assert snaps and all(h in s.name for s in snaps)
        f, meta = read_snapshot(snaps[-1])
        assert f.shape == (16, 16) and meta["field_name"] == "n"
        plots = list((run_dir / "plots").glob("*.dat"))
        assert plots and all(p.read_text().startswith(f"# config_hash={h}") for p in plots)
        for f in ("certificate.json", "weak.json"):
            assert json.loads((run_dir / f).read_text())["config_hash"] == h

    def test_metadata_round_trip(self, small_run):
        _, run_dir, cfg, _ = small_run
        meta = json.loads((run_dir / "metadata.json").read_text())
        assert meta["config"] == cfg.raw and meta["config_hash"] == cfg.config_hash
        assert meta["dt_max"] <= 0.25 / 16 + 1e-15
        assert build_config(meta["config"]).config_hash == cfg.config_hash

    def test_deterministic_rerun_bit_identical(self, small_run, tmp_path):
        _, run_dir, _, cfg_path = small_run
        assert main(["run", str(cfg_path), "--output-root", str(tmp_path)]) == 0
        assert (tmp_path / run_dir.name / "monitor.csv").read_bytes() == (run_dir / "monitor.csv").read_bytes()

    def test_env_root(self, small_run, tmp_path, monkeypatch):
        _, run_dir, _, cfg_path = small_run
        monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "env"))
        assert main(["run", str(cfg_path)]) == 0
        assert (tmp_path / "env" / run_dir.name / "monitor.csv").exists()

    def test_load_trajectory(self, small_run):
        _, run_dir, cfg, _ = small_run
        traj, back = load_trajectory(run_dir)
        assert back.config_hash == cfg.config_hash
        assert traj.records == read_csv(run_dir / "monitor.csv")
        assert traj.states[0].n.shape == (16, 16) and traj.times[-1] == pytest.approx(0.05)

    def test_certify_subcommand(self, small_run, capsys):
        _, run_dir, _, cfg_path = small_run
        assert main(["certify", str(run_dir)]) == 0
        assert "mass_conservation" in capsys.readouterr().out
        strict = cfg_path.read_text() + "\n[tolerances]\nmass_rel = -1\n"
        strict_path = cfg_path.with_name("strict.ini")
        strict_path.write_text(strict)
        assert main(["certify", str(run_dir), "--config", str(strict_path)]) == 1

    def test_aborted_run(self, tmp_path):
        text = SMALL.replace("t_final = 0.05", "t_final = 0.05\nblowup_threshold = 0.5")
        assert main(["run", str(write(tmp_path, text)), "--output-root", str(tmp_path)]) == 2
        cfg = parse_config_text(text)
        run_dir = tmp_path / f"small-{cfg.config_hash}"
        marker = json.loads((run_dir / "ABORTED").read_text())
        assert marker["reason"] == "BlowUpError" and marker["config_hash"] == cfg.config_hash
        assert (run_dir / "monitor.csv").exists()


class TestSweep:
    def test_empty_values(self, tmp_path):
        with pytest.raises(ConfigError):
            cmd_sweep(parse_config_text(SMALL), "eps", [], tmp_path)
        assert main(["sweep", str(write(tmp_path, SMALL)), "--axis", "eps", "--values", ""]) == 2

    def test_non_monotone(self, tmp_path):
        with pytest.raises(ConfigError):
            cmd_sweep(parse_config_text(SMALL), "eps", [0.1, 0.2, 0.05], tmp_path)

    def test_eps_sweep_parallel(self, tmp_path):
        cfg = parse_config_text(SMALL)
        code = cmd_sweep(cfg, "eps", [0.2, 0.1], tmp_path, jobs=2, out=io.StringIO())
        assert code == 0
        lines = (tmp_path / f"sweep-eps-{cfg.config_hash}.csv").read_text().splitlines()
        assert lines[0] == f"# config_hash={cfg.config_hash}" and len(lines) == 4

    def test_h_sweep_orders(self, tmp_path):
        cfg = parse_config_text(SMALL)
        out = io.StringIO()
        cmd_sweep(cfg, "h", [1 / 8, 1 / 16], tmp_path, out=out)
        orders = (tmp_path / f"sweep-h-{cfg.config_hash}-orders.csv").read_text()
        assert "weak_identity" in orders and "order" in out.getvalue()
