import hashlib
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from conftest import FIXTURES
from dancerecal.cli import main
from dancerecal.formats import read_motion, validate_report, write_motion
from dancerecal.motion import PrimitiveSequence, identity_primitive, validate
from dancerecal.synth import AMPLITUDE, PERIOD, ROOT_SWAY, ROW_PHASE

MOTION = str(FIXTURES / "motion_b1_n13.json")
STATIC = str(FIXTURES / "motion_static.json")
SINUSOID = str(FIXTURES / "motion_sinusoid.json")
BEATS = str(FIXTURES / "beats.json")


def sha(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


def load(path):
    return json.loads(open(path).read())


def without_runtime(path):
    """File bytes with the wall-clock ``runtime_ms`` value blanked out."""
    doc = load(path)
    if "runtime_ms" in doc:
        doc["runtime_ms"] = None
    return json.dumps(doc, sort_keys=True)


class TestRecalibrate:
    def test_passthrough_reproduces_input(self, tmp_path):
        out = tmp_path / "out.json"
        assert main(["recalibrate", "--in", MOTION, "--preset", "passthrough",
                     "--noise-threshold", "0", "--out", str(out)]) == 0
        assert out.read_bytes() == open(MOTION, "rb").read()

    def test_ema_golden(self, tmp_path):
        out = tmp_path / "out.json"
        assert main(["recalibrate", "--in", MOTION, "--preset", "ema:0.5",
                     "--noise-threshold", "0", "--seed", "1", "--out", str(out)]) == 0
        assert out.read_bytes() == (FIXTURES / "recal_ema_0.5_seed1.json").read_bytes()

    def test_params_file_matches_preset(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["recalibrate", "--in", MOTION, "--preset", "ema:0.5", "--out", str(a)])
        main(["recalibrate", "--in", MOTION, "--params", str(FIXTURES / "params_ema_0.5.json"),
              "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_manifest(self, tmp_path):
        out = tmp_path / "out.json"
        main(["recalibrate", "--in", MOTION, "--params", str(FIXTURES / "params_default.json"),
              "--noise-threshold", "0.1", "--seed", "5", "--out", str(out)])
        m = load(str(out) + ".manifest.json")
        assert m["command"] == "recalibrate" and m["seed"] == 5
        assert m["inputs"]["in"]["sha256"] == sha(MOTION)
        assert m["config"]["params_sha256"] == sha(FIXTURES / "params_default.json")
        assert m["config"]["noise_threshold"] == 0.1
        assert m["toolkit_version"] and m["runtime_ms"] >= 0

    def test_noise_seed_changes_output(self, tmp_path):
        outs = []
        for seed in ("1", "2"):
            out = tmp_path / f"{seed}.json"
            main(["recalibrate", "--in", MOTION, "--preset", "ema:0.5", "--noise-threshold", "0.2",
                  "--seed", seed, "--out", str(out)])
            outs.append(out.read_bytes())
        assert outs[0] != outs[1]

    def test_missing_in_is_usage(self, tmp_path, capsys):
        assert main(["recalibrate", "--preset", "passthrough", "--out", str(tmp_path / "o")]) == 1
        err = capsys.readouterr().err
        assert "usage:" in err and "--in" in err

    def test_bad_preset_is_usage(self, tmp_path):
        assert main(["recalibrate", "--in", MOTION, "--preset", "ema:2",
                     "--out", str(tmp_path / "o")]) == 1

    def test_negative_threshold_is_usage(self, tmp_path):
        assert main(["recalibrate", "--in", MOTION, "--preset", "passthrough",
                     "--noise-threshold", "-1", "--out", str(tmp_path / "o")]) == 1

    def test_missing_file_is_io(self, tmp_path, capsys):
        assert main(["recalibrate", "--in", str(tmp_path / "nope.json"), "--preset", "passthrough",
                     "--out", str(tmp_path / "o")]) == 2
        assert "nope.json" in capsys.readouterr().err

    def test_layout_error_is_io(self, tmp_path):
        doc = load(MOTION)
        doc["layout"]["total"] = 138
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert main(["recalibrate", "--in", str(bad), "--preset", "passthrough",
                     "--out", str(tmp_path / "o")]) == 2

    def test_overflow_is_numeric(self, tmp_path):
        params = load(FIXTURES / "params_passthrough.json")
        params["conv_layers"][0]["weights"] = [1e308, 1e308]
        pfile = tmp_path / "p.json"
        pfile.write_text(json.dumps(params))
        seq = PrimitiveSequence(np.full((1, 3, 139), 10.0))
        write_motion(seq, tmp_path / "m.json")
        assert main(["recalibrate", "--in", str(tmp_path / "m.json"), "--params", str(pfile),
                     "--out", str(tmp_path / "o")]) == 3
        assert not (tmp_path / "o").exists()


class TestMetrics:
    def _run(self, tmp_path, gen, ref=None, *extra):
        out = tmp_path / "report.json"
        code = main(["metrics", "--gen", gen, "--ref", ref or gen, "--beats", BEATS,
                     "--out", str(out), *extra])
        return code, out

    def test_gen_equals_ref(self, tmp_path):
        code, out = self._run(tmp_path, SINUSOID)
        assert code == 0
        r = load(out)
        assert abs(r["fid_k"]) <= 1e-8 and abs(r["fid_g"]) <= 1e-8
        assert r["div_k"] > 0

    def test_report_schema_and_hashes(self, tmp_path):
        code, out = self._run(tmp_path, SINUSOID, None, "--skeleton", str(FIXTURES / "skeleton.json"),
                              "--templates", str(FIXTURES / "templates.json"))
        assert code == 0
        r = load(out)
        validate_report(r)
        assert r["config"]["skeleton_sha256"] == sha(FIXTURES / "skeleton.json")
        assert r["config"]["templates_sha256"] == sha(FIXTURES / "templates.json")
        assert r["config"]["fsr_thresholds"] == {"height_max": 0.05, "speed_min": 0.01}
        m = load(str(out) + ".manifest.json")
        assert m["inputs"]["beats"]["sha256"] == sha(BEATS)

    def test_default_hashes_match_bundled_files(self, tmp_path):
        _, out = self._run(tmp_path, SINUSOID)
        r = load(out)
        assert r["config"]["skeleton_sha256"] == sha(FIXTURES / "skeleton.json")
        assert r["config"]["templates_sha256"] == sha(FIXTURES / "templates.json")

    def test_static_fixture(self, tmp_path):
        code, out = self._run(tmp_path, STATIC)
        assert code == 0
        r = load(out)
        assert r["fsr"] == 0.0 and r["div_k"] == 0.0 and r["div_g"] == 0.0
        assert r["boundary_discontinuity"]["mean"] == 0.0

    def test_single_clip_is_insufficient(self, tmp_path, capsys):
        code, _ = self._run(tmp_path, MOTION)
        assert code == 1
        assert "insufficient" in capsys.readouterr().err

    def test_unknown_template_joint(self, tmp_path):
        doc = load(FIXTURES / "templates.json")
        doc["templates"][0]["joint_a"] = "tail"
        bad = tmp_path / "t.json"
        bad.write_text(json.dumps(doc))
        code, _ = self._run(tmp_path, SINUSOID, None, "--templates", str(bad))
        assert code == 2

    def test_bad_sigma_is_usage(self, tmp_path):
        code, _ = self._run(tmp_path, SINUSOID, None, "--sigma", "0")
        assert code == 1


class TestGradcheck:
    def _dev(self, capsys):
        line = capsys.readouterr().out.strip()
        return float(line.split(":")[1].split()[0]), line

    def test_passthrough(self, capsys):
        assert main(["gradcheck", "--preset", "passthrough"]) == 0
        dev, line = self._dev(capsys)
        assert dev <= 1e-12 and line.endswith("PASS")

    def test_default_seed_42(self, capsys):
        assert main(["gradcheck", "--params", str(FIXTURES / "params_default.json"),
                     "--seed", "42", "--eps", "1e-4"]) == 0
        assert self._dev(capsys)[0] <= 1e-5

    def test_tolerance_exceeded(self, capsys):
        assert main(["gradcheck", "--params", str(FIXTURES / "params_default.json"),
                     "--eps", "0.5"]) == 3
        assert self._dev(capsys)[1].endswith("FAIL")

    def test_nan_weights(self, tmp_path):
        doc = load(FIXTURES / "params_default.json")
        doc["conv_layers"][0]["weights"][0] = float("nan")
        bad = tmp_path / "p.json"
        bad.write_text(json.dumps(doc))
        assert main(["gradcheck", "--params", str(bad)]) == 2

    def test_report(self, tmp_path):
        out = tmp_path / "g.json"
        assert main(["gradcheck", "--out", str(out)]) == 0
        r = load(out)
        assert r["passed"] is True and r["max_relative_deviation"] <= 1e-5
        assert (tmp_path / "g.json.manifest.json").exists()


class TestSynth:
    @pytest.mark.parametrize("kind", ["iid-gaussian", "random-walk", "sinusoid"])
    def test_valid_and_deterministic(self, kind, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            assert main(["synth", "--kind", kind, "--n", "9", "--batch", "2", "--seed", "3",
                         "--out", str(out)]) == 0
        assert a.read_bytes() == b.read_bytes()
        seq = read_motion(a)
        assert seq.data.shape == (2, 9, 139)
        assert validate(seq) == []

    def test_golden_fixture(self, tmp_path):
        out = tmp_path / "m.json"
        main(["synth", "--kind", "iid-gaussian", "--n", "13", "--seed", "1234", "--out", str(out)])
        assert out.read_bytes() == open(MOTION, "rb").read()

    def test_sinusoid_formula(self, tmp_path):
        out = tmp_path / "s.json"
        main(["synth", "--kind", "sinusoid", "--n", "25", "--batch", "2", "--out", str(out)])
        data = read_motion(out).data
        for b in range(2):
            for i in range(25):
                assert data[b, i, 4] == pytest.approx(ROOT_SWAY * math.sin(2 * math.pi * i / PERIOD),
                                                      abs=1e-15)
                for k in range(21):
                    theta = AMPLITUDE * math.sin(2 * math.pi * i / PERIOD + 2 * math.pi * k / 21
                                                 + ROW_PHASE * b)
                    block = data[b, i, 13 + 6 * k:19 + 6 * k]
                    expect = [math.cos(theta), math.sin(theta), 0, -math.sin(theta),
                              math.cos(theta), 0]
                    assert np.abs(block - expect).max() <= 1e-15
        assert np.array_equal(data[..., 7:13], np.tile([1.0, 0, 0, 0, 1, 0], (2, 25, 1)))

    def test_bad_kind(self, tmp_path):
        assert main(["synth", "--kind", "brownian", "--out", str(tmp_path / "o")]) == 1

    def test_zero_length(self, tmp_path):
        assert main(["synth", "--kind", "sinusoid", "--n", "0", "--out", str(tmp_path / "o")]) == 1


class TestCompare:
    def test_smoothing(self, tmp_path):
        out = tmp_path / "c.json"
        assert main(["compare", "--in", MOTION, "--preset", "ema:0.5", "--out", str(out)]) == 0
        r = load(out)
        assert r["ratio"] < 0.9 and r["ratio_degenerate"] is False
        assert r["ratio"] == r["after"]["mean"] / r["before"]["mean"]

    def test_constant_sequence(self, tmp_path):
        seq = PrimitiveSequence(np.tile(identity_primitive((0, 0.9, 0)), (1, 5, 1)))
        write_motion(seq, tmp_path / "m.json")
        out = tmp_path / "c.json"
        assert main(["compare", "--in", str(tmp_path / "m.json"), "--out", str(out)]) == 0
        r = load(out)
        assert r["before"]["mean"] == 0.0 and r["after"]["mean"] == 0.0
        assert r["ratio"] == 1.0 and r["ratio_degenerate"] is True

    def test_single_primitive(self, tmp_path):
        seq = PrimitiveSequence(identity_primitive()[None, None])
        write_motion(seq, tmp_path / "m.json")
        assert main(["compare", "--in", str(tmp_path / "m.json"), "--out",
                     str(tmp_path / "c.json")]) == 1


COMMANDS = {
    "synth": ["synth", "--kind", "random-walk", "--n", "13", "--seed", "9"],
    "recalibrate": ["recalibrate", "--in", MOTION, "--params", str(FIXTURES / "params_default.json"),
                    "--noise-threshold", "0.3", "--seed", "4"],
    "metrics": ["metrics", "--gen", SINUSOID, "--ref", STATIC, "--beats", BEATS],
    "gradcheck": ["gradcheck", "--seed", "3"],
    "compare": ["compare", "--in", MOTION, "--noise-threshold", "0.1", "--seed", "2"],
}


@pytest.mark.parametrize("name", sorted(COMMANDS))
def test_deterministic_outputs(name, tmp_path):
    runs = []
    for tag in ("a", "b"):
        out = tmp_path / tag / "out.json"
        assert main(COMMANDS[name] + ["--out", str(out)]) == 0
        runs.append((without_runtime(out), without_runtime(str(out) + ".manifest.json"),
                     out.read_bytes()))
    assert runs[0][:2] == runs[1][:2]
    if name in ("synth", "recalibrate"):
        assert runs[0][2] == runs[1][2]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "dancerecal", "recalibrate", "--preset", "passthrough"],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and "usage:" in proc.stderr
    proc = subprocess.run([sys.executable, "-m", "dancerecal", "synth", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "--kind" in proc.stdout
