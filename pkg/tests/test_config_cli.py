import json
import shutil

import numpy as np
import pytest

from qg_ergo import cli
from qg_ergo.config import InitialCondition, RunConfig, load_config, parse_config
from qg_ergo.errors import ConfigError, ConfigParseError

BASE = {
    "nu": 1.0, "r": 0.1, "beta": 0.5, "N": 4, "dt": 0.01, "t_end": 0.5, "burn_in": 0.1,
    "seed": 42, "ensemble_size": 3, "sample_every": 5, "checkpoint_every": 20,
    "noise": {"law": "power", "c": 1.0, "p": 0.5, "gamma": 0.5},
    "initial_condition": {"kind": "single_mode", "mode": [1, 1], "amplitude": 2.0},
    "initial_condition_2": {"kind": "random", "rng_amplitude": 5.0},
    "observables": ["coeff_1_2", "energy_gt_0.01"],
}


def write_config(tmp_path, name="cfg.json", **changes):
    doc = json.loads(json.dumps(BASE))
    for k, v in changes.items():
        if v is None:
            doc.pop(k, None)
        else:
            doc[k] = v
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def run_cli(argv, capsys):
    rc = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return rc, out, (json.loads(err.strip().splitlines()[-1]) if err.strip() else None)


class TestParseConfig:
    def test_minimal_document_gets_defaults(self):
        cfg = parse_config("{}")
        assert cfg == RunConfig()
        assert cfg.burn_in == pytest.approx(0.1 * cfg.t_end)
        assert cfg.noise.law == "power" and cfg.initial_condition.kind == "zero"

    def test_echo_round_trip(self):
        cfg = parse_config(json.dumps(BASE))
        assert parse_config(cfg.to_json()) == cfg
        assert cfg.n_steps == 50 and cfg.two_ic

    def test_gamma_out_of_range(self):
        doc = dict(BASE, noise={"law": "power", "gamma": 1.5})
        with pytest.raises(ConfigError, match=r"noise.gamma=1.5 violates the admissibility range"):
            parse_config(json.dumps(doc))

    def test_duplicate_key(self):
        with pytest.raises(ConfigParseError, match="duplicate key 'nu'"):
            parse_config('{"nu": 1.0, "nu": 2.0}')

    def test_syntax_error_position(self):
        with pytest.raises(ConfigParseError) as info:
            parse_config('{\n  "nu": 1.0,\n  "r": ,\n}')
        assert (info.value.line, info.value.column) == (3, 8)

    @pytest.mark.parametrize("doc,match", [
        ({"viscosity": 1.0}, "unknown key"),
        ({"noise": {"law": "power", "colour": 1}}, "unknown key"),
        ({"nu": "1"}, "finite number"),
        ({"N": 4.5}, "integer"),
        ({"N": True}, "integer"),
        ({"nu": 0.0}, "nu"),
        ({"dt": 0.003, "t_end": 1.0}, "whole number of steps"),
        ({"t_end": 1.0, "burn_in": 1.0}, "burn_in"),
        ({"seed": -1}, "seed"),
        ({"N": 4, "initial_condition": {"kind": "single_mode", "mode": [5, 1]}}, "outside"),
        ({"initial_condition": {"kind": "vortex"}}, "kind"),
        ({"noise": {"law": "white"}}, "noise.law"),
        ({"N": 2, "noise": {"law": "table", "table": [1, 1, 1, 1, 1]}}, "noise.table"),
        ({"observables": ["pressure"]}, "observables"),
        ({"observables": "energy"}, "observables"),
        ([1, 2], "JSON object"),
    ])
    def test_rejected(self, doc, match):
        with pytest.raises(ConfigError, match=match):
            parse_config(json.dumps(doc))

    def test_initial_fields(self):
        cfg = parse_config(json.dumps(BASE))
        (l1, w1, m1), (l2, w2, m2) = cfg.initial_fields()
        assert (l1, l2) == ("ic1", "ic2")
        assert m1.tolist() == [0, 1, 2] and m2.tolist() == [3, 4, 5]
        assert w1[0, 0] == 2.0 and np.count_nonzero(w1) == 1
        # random field decays like 1/|k|^2 and depends on the seed only
        np.testing.assert_array_equal(w2, cfg.initial_fields()[1][1])
        assert np.count_nonzero(w2) == 16

    def test_random_ic_streams_differ(self):
        ic = InitialCondition("random", rng_amplitude=1.0)
        assert not np.array_equal(ic.field(4, 0, 0), ic.field(4, 0, 1))

    def test_load_config(self, tmp_path):
        assert load_config(write_config(tmp_path)) == parse_config(json.dumps(BASE))


class TestRun:
    def test_outputs(self, tmp_path, capsys):
        out = tmp_path / "out"
        rc, _, _ = run_cli(["run", write_config(tmp_path), "--output-dir", out], capsys)
        assert rc == 0
        for name in ("timeseries.csv", "report.json", "config.json", "metadata.json"):
            assert (out / name).is_file(), name
        lines = (out / "timeseries.csv").read_text().splitlines()
        assert lines[0] == "t,member,enstrophy,energy,coeff_1_1,coeff_1_2,energy_gt_0.01"
        members = [int(line.split(",")[1]) for line in lines[1:]]
        assert sorted(set(members)) == list(range(6))
        assert members == sorted(members)
        assert len(lines) == 1 + 6 * 11
        report = json.loads((out / "report.json").read_text())
        assert report["mode"] == "birkhoff"
        assert report["ergodic"]["regime"] == "stochastic"
        assert report["conditions"]["overall"] == "admissible"
        echo = load_config(out / "config.json")
        assert echo.output_dir == str(out) and echo.seed == 42
        steps = sorted(p.name for p in (out / "checkpoints").iterdir())
        assert steps == ["step_0000000020", "step_0000000040"]
        assert len(list((out / "checkpoints" / steps[0]).glob("member_*.bin"))) == 6

    def test_metadata(self, tmp_path, capsys):
        out = tmp_path / "out"
        run_cli(["run", write_config(tmp_path), "--output-dir", out, "--threads", "2"], capsys)
        meta = json.loads((out / "metadata.json").read_text())
        assert meta["command"] == "run" and meta["threads"] == 2
        assert meta["generator"] and meta["numpy"] == np.__version__
        assert "started" in meta and "host" in meta

    def test_same_seed_same_bytes(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        run_cli(["run", cfg, "--output-dir", a, "--threads", "1"], capsys)
        run_cli(["run", cfg, "--output-dir", b, "--threads", "4"], capsys)
        for name in ("timeseries.csv", "report.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_different_seed_differs(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        run_cli(["run", write_config(tmp_path), "--output-dir", a], capsys)
        run_cli(["run", write_config(tmp_path, "c2.json", seed=43), "--output-dir", b], capsys)
        assert (a / "timeseries.csv").read_bytes() != (b / "timeseries.csv").read_bytes()

    def test_threads_from_environment(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("QG_ERGO_THREADS", "3")
        out = tmp_path / "out"
        run_cli(["run", write_config(tmp_path), "--output-dir", out], capsys)
        assert json.loads((out / "metadata.json").read_text())["threads"] == 3

    def test_bad_thread_environment(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("QG_ERGO_THREADS", "many")
        rc, _, err = run_cli(["run", write_config(tmp_path), "--output-dir", tmp_path / "o"],
                             capsys)
        assert rc == 2 and "QG_ERGO_THREADS" in err["message"]

    def test_single_member_report(self, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, ensemble_size=1, initial_condition_2=None)
        assert run_cli(["run", cfg, "--output-dir", out], capsys)[0] == 0
        report = json.loads((out / "report.json").read_text())
        assert report["mode"] == "single" and report["ergodic"] is None
        assert len(report["time_averages"]["ic1"]["enstrophy"]) == 1

    def test_zero_noise_refused_then_forced(self, tmp_path, capsys):
        cfg = write_config(tmp_path, noise={"law": "zero"})
        out = tmp_path / "out"
        rc, _, err = run_cli(["run", cfg, "--output-dir", out], capsys)
        assert rc == 3
        assert err["error"] == "theorem_condition_failed:(iii)"
        assert "--force" in err["message"]
        assert not (out / "timeseries.csv").exists()
        rc, _, _ = run_cli(["run", cfg, "--output-dir", out, "--force"], capsys)
        assert rc == 0
        report = json.loads((out / "report.json").read_text())
        assert report["forced"] is True
        assert report["ergodic"]["regime"] == "degenerate_dirac_at_zero"

    def test_parse_error_exit(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{"nu": 1.0,\n "nu": 2.0}')
        rc, _, err = run_cli(["run", path], capsys)
        assert rc == 2 and err["error"] == "config_parse_error"
        path.write_text('{"nu": 1.0\n "r": 2.0}')
        rc, _, err = run_cli(["run", path], capsys)
        assert rc == 2 and err["line"] == 2 and err["column"] == 2

    def test_gamma_exit(self, tmp_path, capsys):
        cfg = write_config(tmp_path, noise={"law": "power", "gamma": 1.5})
        rc, _, err = run_cli(["run", cfg], capsys)
        assert rc == 2 and "gamma" in err["message"]

    def test_missing_config_is_io_error(self, tmp_path, capsys):
        rc, _, err = run_cli(["run", tmp_path / "nope.json"], capsys)
        assert rc == 5 and err["error"] == "io_error"

    def test_instability_exit(self, tmp_path, capsys):
        cfg = write_config(tmp_path, blowup=1.0)
        rc, _, err = run_cli(["run", cfg, "--output-dir", tmp_path / "o"], capsys)
        assert rc == 4
        assert err["member"] in range(6) and len(err["mode"]) == 2 and err["t"] > 0


class TestCheck:
    def test_admissible(self, tmp_path, capsys):
        rc, out, _ = run_cli(["check", write_config(tmp_path)], capsys)
        assert rc == 0 and json.loads(out)["overall"] == "admissible"

    def test_zero_noise(self, tmp_path, capsys):
        rc, out, err = run_cli(["check", write_config(tmp_path, noise={"law": "zero"})], capsys)
        assert rc == 3
        assert json.loads(out)["overall"] == "inadmissible"
        assert err["failed"] == ["(ii)", "(iii)"]


class TestResume:
    @pytest.fixture
    def full(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out = tmp_path / "full"
        assert run_cli(["run", cfg, "--output-dir", out], capsys)[0] == 0
        return cfg, out

    def test_equals_uninterrupted(self, tmp_path, capsys, full):
        cfg, ref = full
        short = tmp_path / "short"
        doc = json.loads(cfg.read_text())
        cfg2 = write_config(tmp_path, "short.json", t_end=0.3, burn_in=doc["burn_in"])
        assert run_cli(["run", cfg2, "--output-dir", short], capsys)[0] == 0
        ck = short / "checkpoints" / "step_0000000020"
        rc, _, _ = run_cli(["resume", ck, "--t-end", "0.5"], capsys)
        assert rc == 0
        for name in ("timeseries.csv", "report.json"):
            assert (short / name).read_bytes() == (ref / name).read_bytes(), name
        meta = json.loads((short / "metadata.json").read_text())
        assert meta["command"] == "resume" and meta["resumed_from_step"] == 20

    def test_member_file_path_and_new_output_dir(self, tmp_path, capsys, full):
        _, ref = full
        ck = ref / "checkpoints" / "step_0000000040" / "member_00000.bin"
        out = tmp_path / "resumed"
        rc, _, _ = run_cli(["resume", ck, "--t-end", "0.5", "--output-dir", out], capsys)
        assert rc == 0
        assert (out / "timeseries.csv").read_bytes() == (ref / "timeseries.csv").read_bytes()

    def test_horizon_not_beyond_checkpoint(self, capsys, full):
        _, ref = full
        rc, _, err = run_cli(["resume", ref / "checkpoints" / "step_0000000040",
                              "--t-end", "0.4"], capsys)
        assert rc == 2 and "not beyond" in err["message"]

    def test_missing_checkpoint(self, tmp_path, capsys):
        rc, _, err = run_cli(["resume", tmp_path / "nothing", "--t-end", "1"], capsys)
        assert rc == 5

    def test_not_a_step_directory(self, tmp_path, capsys, full):
        _, ref = full
        rc, _, _ = run_cli(["resume", ref, "--t-end", "1"], capsys)
        assert rc == 6

    def test_missing_member(self, tmp_path, capsys, full):
        _, ref = full
        ck = ref / "checkpoints" / "step_0000000020"
        (ck / "member_00004.bin").unlink()
        rc, _, err = run_cli(["resume", ck, "--t-end", "0.5"], capsys)
        assert rc == 6 and "4" in err["message"]

    def test_corrupt_member(self, tmp_path, capsys, full):
        _, ref = full
        ck = ref / "checkpoints" / "step_0000000020"
        f = ck / "member_00001.bin"
        f.write_bytes(f.read_bytes()[:-3])
        rc, _, err = run_cli(["resume", ck, "--t-end", "0.5"], capsys)
        assert rc == 6 and err["error"] == "checkpoint_truncated"

    def test_copied_run_resumes(self, tmp_path, capsys, full):
        _, ref = full
        moved = tmp_path / "moved"
        shutil.copytree(ref, moved)
        rc, _, _ = run_cli(["resume", moved / "checkpoints" / "step_0000000020",
                            "--t-end", "0.5"], capsys)
        assert rc == 0
        assert (moved / "report.json").read_bytes() == (ref / "report.json").read_bytes()
