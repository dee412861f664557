import json

import numpy as np
import pytest

from conftest import FIXTURES
from dancerecal.errors import (
    InvariantError,
    LayoutError,
    NonFiniteError,
    ParseError,
    SchemaError,
)
from dancerecal.formats import (
    REPORT_SCHEMA,
    dumps_motion,
    dumps_params,
    loads_motion,
    read_beats,
    read_motion,
    read_params,
    read_report,
    read_skeleton,
    read_templates,
    validate_report,
    write_beats,
    write_motion,
    write_params,
    write_report,
    write_skeleton,
    write_templates,
)
from dancerecal.metrics import BeatTrack, default_templates
from dancerecal.motion import PrimitiveSequence, default_skeleton, random_primitives
from dancerecal.pooling import init_params, pooling_block

GOLDEN = sorted(p.name for p in FIXTURES.glob("*.json"))


def _doc(name):
    return json.loads((FIXTURES / name).read_text())


def _dump(tmp_path, doc, name="f.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


class TestMotion:
    def test_golden_dimensions(self):
        seq = read_motion(FIXTURES / "motion_b1_n13.json")
        assert (seq.batch, seq.length) == (1, 13)
        assert seq.data.shape == (1, 13, 139)

    def test_round_trip_bit_exact(self, rng, tmp_path):
        # awkward doubles: subnormals, long mantissas, negative zero excluded by design
        data = random_primitives(rng, (2, 5)) * np.pi
        data[0, 0, 0] = 5e-324
        data[0, 0, 1] = 1.0 / 3.0
        data[1, 4, 2] = 1.7976931348623157e308
        seq = PrimitiveSequence(data, fps=24.0, kind="fine")
        write_motion(seq, tmp_path / "m.json")
        back = read_motion(tmp_path / "m.json")
        assert back == seq
        assert back.data.tobytes() == seq.data.tobytes()

    def test_write_twice_identical(self, rng, tmp_path):
        seq = PrimitiveSequence(random_primitives(rng, (1, 4)))
        write_motion(seq, tmp_path / "a.json")
        write_motion(seq, tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_canonical_shape(self, rng):
        text = dumps_motion(PrimitiveSequence(random_primitives(rng, (1, 2))))
        assert text.endswith("}\n") and not text.endswith("\n\n")
        keys = list(json.loads(text))
        assert keys == ["format_version", "fps", "kind", "layout", "batch", "length", "data"]

    def test_total_138_is_layout_error(self, tmp_path):
        doc = _doc("motion_b1_n13.json")
        doc["layout"]["total"] = 138
        with pytest.raises(LayoutError, match="layout.total"):
            read_motion(_dump(tmp_path, doc))

    def test_wrong_block_count_is_layout_error(self, tmp_path):
        doc = _doc("motion_b1_n13.json")
        doc["layout"]["joint_rotations"] = 125
        with pytest.raises(LayoutError, match="layout.joint_rotations"):
            read_motion(_dump(tmp_path, doc))

    def test_short_primitive(self, tmp_path):
        doc = _doc("motion_b1_n13.json")
        doc["data"][0][3] = doc["data"][0][3][:138]
        with pytest.raises(LayoutError, match=r"data\[0\]\[3\]"):
            read_motion(_dump(tmp_path, doc))

    def test_declared_length_mismatch(self, tmp_path):
        doc = _doc("motion_b1_n13.json")
        doc["length"] = 12
        with pytest.raises(LayoutError, match="length"):
            read_motion(_dump(tmp_path, doc))

    def test_nan_refused_on_write(self, rng, tmp_path):
        data = random_primitives(rng, (1, 3))
        data[0, 1, 40] = np.nan
        with pytest.raises(NonFiniteError):
            write_motion(PrimitiveSequence(data), tmp_path / "m.json")
        assert not list(tmp_path.iterdir())

    def test_nan_refused_on_read(self):
        text = (FIXTURES / "motion_b1_n13.json").read_text()
        doc = json.loads(text)
        doc["data"][0][2][7] = float("nan")
        with pytest.raises(NonFiniteError, match=r"data\[0\]\[2\]\[7\]"):
            loads_motion(json.dumps(doc))

    def test_parse_error(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ParseError):
            read_motion(p)

    def test_schema_error_names_field(self, tmp_path):
        doc = _doc("motion_b1_n13.json")
        doc["fps"] = "thirty"
        with pytest.raises(SchemaError) as err:
            read_motion(_dump(tmp_path, doc))
        assert err.value.field == "fps"

    def test_errors_are_distinct(self):
        kinds = {ParseError, LayoutError, NonFiniteError}
        assert len(kinds) == 3 and not any(issubclass(a, b) for a in kinds for b in kinds if a is not b)


class TestParams:
    def test_round_trip(self, tmp_path, rng):
        params = init_params(7)
        write_params(params, tmp_path / "p.json")
        back = read_params(tmp_path / "p.json")
        assert dumps_params(back) == dumps_params(params)
        pair = rng.normal(size=(2, 126))
        assert np.array_equal(pooling_block(pair, back), pooling_block(pair, params))

    def test_golden_default(self):
        assert dumps_params(read_params(FIXTURES / "params_default.json")) == \
            dumps_params(init_params(42))

    def test_even_kernel_is_schema_error(self, tmp_path):
        doc = _doc("params_default.json")
        doc["conv_layers"][1]["kernel_size"] = 2
        with pytest.raises(SchemaError) as err:
            read_params(_dump(tmp_path, doc))
        assert err.value.field == "conv_layers[1].kernel_size"

    def test_weight_count(self, tmp_path):
        doc = _doc("params_default.json")
        doc["conv_layers"][0]["weights"].pop()
        with pytest.raises(SchemaError, match=r"conv_layers\[0\].weights"):
            read_params(_dump(tmp_path, doc))

    def test_nan_weight(self, tmp_path):
        doc = _doc("params_default.json")
        doc["conv_layers"][2]["weights"][4] = float("nan")
        with pytest.raises(NonFiniteError, match=r"conv_layers\[2\].weights\[4\]"):
            read_params(_dump(tmp_path, doc))

    def test_nonpositive_running_var_is_invariant_error(self, tmp_path):
        doc = _doc("params_default.json")
        doc["conv_layers"][0]["batchnorm"]["running_var"][0] = -1.0
        with pytest.raises(InvariantError):
            read_params(_dump(tmp_path, doc))

    def test_unknown_activation(self, tmp_path):
        doc = _doc("params_default.json")
        doc["conv_layers"][0]["activation"] = "relu6"
        with pytest.raises(SchemaError, match="activation"):
            read_params(_dump(tmp_path, doc))


class TestSkeleton:
    def test_default_file(self):
        sk = read_skeleton(FIXTURES / "skeleton.json")
        assert len(sk.joint_names) == 22 and sk.parents[0] == -1
        assert sk == default_skeleton()

    def test_round_trip(self, tmp_path):
        write_skeleton(default_skeleton(), tmp_path / "s.json")
        assert (tmp_path / "s.json").read_bytes() == (FIXTURES / "skeleton.json").read_bytes()

    def test_bad_parent_order(self, tmp_path):
        doc = _doc("skeleton.json")
        doc["parents"][3] = 5
        with pytest.raises(InvariantError):
            read_skeleton(_dump(tmp_path, doc))


class TestBeats:
    def test_round_trip(self, tmp_path):
        track = BeatTrack([0.5, 3.25, 9.0], fps=60.0)
        write_beats(track, tmp_path / "b.json")
        back = read_beats(tmp_path / "b.json")
        assert back.times.tolist() == [0.5, 3.25, 9.0] and back.fps == 60.0

    def test_non_increasing(self, tmp_path):
        doc = _doc("beats.json")
        doc["times"] = [0.0, 10.0, 10.0]
        with pytest.raises(InvariantError):
            read_beats(_dump(tmp_path, doc))

    def test_empty_allowed(self, tmp_path):
        assert len(read_beats(_dump(tmp_path, {"format_version": 1, "fps": 30, "times": []}))) == 0


class TestTemplates:
    def test_golden(self):
        assert read_templates(FIXTURES / "templates.json") == default_templates()

    def test_round_trip(self, tmp_path):
        write_templates(default_templates(), tmp_path / "t.json")
        assert (tmp_path / "t.json").read_bytes() == (FIXTURES / "templates.json").read_bytes()

    def test_bad_kind(self, tmp_path):
        doc = _doc("templates.json")
        doc["templates"][5]["kind"] = "below"
        with pytest.raises(SchemaError) as err:
            read_templates(_dump(tmp_path, doc))
        assert err.value.field == "templates[5].kind"

    def test_duplicate_names(self, tmp_path):
        doc = _doc("templates.json")
        doc["templates"][1]["name"] = doc["templates"][0]["name"]
        with pytest.raises(InvariantError):
            read_templates(_dump(tmp_path, doc))


class TestReport:
    def test_example_validates(self):
        validate_report(read_report(FIXTURES / "report_example.json"))

    def test_missing_metric(self, tmp_path):
        doc = _doc("report_example.json")
        del doc["bas"]
        with pytest.raises(SchemaError):
            write_report(doc, tmp_path / "r.json", REPORT_SCHEMA)
        assert not (tmp_path / "r.json").exists()

    def test_negative_runtime(self):
        doc = _doc("report_example.json")
        doc["runtime_ms"] = -1.0
        with pytest.raises(SchemaError, match="runtime_ms"):
            validate_report(doc)


@pytest.mark.parametrize("name", [n for n in GOLDEN if n != "report_example.json"])
def test_golden_files_are_canonical(name, tmp_path):
    """read then write reproduces every golden file byte for byte."""
    src = FIXTURES / name
    out = tmp_path / name
    if name.startswith(("motion", "recal")):
        write_motion(read_motion(src), out)
    elif name.startswith("params"):
        write_params(read_params(src), out)
    elif name == "skeleton.json":
        write_skeleton(read_skeleton(src), out)
    elif name == "beats.json":
        write_beats(read_beats(src), out)
    elif name == "templates.json":
        write_templates(read_templates(src), out)
    else:
        pytest.fail(f"no reader registered for {name}")
    assert out.read_bytes() == src.read_bytes()
