"""Regenerate the golden files in this directory.

    python3 fixtures/make_fixtures.py

Every file is produced by the library itself; tests compare against the
frozen copies so any behavioural drift shows up as a byte diff.
"""

from pathlib import Path

import numpy as np

from dancerecal.formats import (
    write_beats,
    write_motion,
    write_params,
    write_report,
    write_skeleton,
    write_templates,
    REPORT_SCHEMA,
)
from dancerecal.metrics import BeatTrack, default_templates
from dancerecal.motion import PrimitiveSequence, default_skeleton, identity_primitive
from dancerecal.pooling import ema_params, init_params, passthrough_params
from dancerecal.recalibration import RecalConfig, recalibrate_sequence
from dancerecal.synth import synthesize

HERE = Path(__file__).resolve().parent


def static_clips(batch=2, n=16):
    """Identity pose standing with the lowest foot on the ground plane."""
    from dancerecal.motion import forward_kinematics
    sk = default_skeleton()
    feet = forward_kinematics(identity_primitive(), sk)[list(sk.foot_joints), 1]
    prim = identity_primitive((0.0, -float(feet.min()), 0.0))
    return PrimitiveSequence(np.tile(prim, (batch, n, 1)))


def main():
    motion = synthesize("iid-gaussian", n=13, batch=1, seed=1234)
    write_motion(motion, HERE / "motion_b1_n13.json")
    write_motion(static_clips(), HERE / "motion_static.json")
    write_motion(synthesize("sinusoid", n=64, batch=3, seed=0), HERE / "motion_sinusoid.json")
    write_params(init_params(42), HERE / "params_default.json")
    write_params(passthrough_params(), HERE / "params_passthrough.json")
    write_params(ema_params(0.5), HERE / "params_ema_0.5.json")
    write_skeleton(default_skeleton(), HERE / "skeleton.json")
    write_beats(BeatTrack(np.arange(0.0, 64.0, 10.0), 30.0), HERE / "beats.json")
    write_templates(default_templates(), HERE / "templates.json")
    golden = recalibrate_sequence(motion, RecalConfig.ema(0.5))
    write_motion(golden, HERE / "recal_ema_0.5_seed1.json")
    report = {
        "format_version": 1,
        "fid_k": 0.0, "fid_g": 0.0, "div_k": 0.0, "div_g": 0.0, "fsr": 0.0, "bas": 0.0,
        "boundary_discontinuity": {"mean": 0.0, "per_junction": [[0.0]]},
        "runtime_ms": 0.0,
        "config": {"fsr_thresholds": {"height_max": 0.05, "speed_min": 0.01},
                   "bas_sigma": 3.0, "templates_sha256": "", "skeleton_sha256": ""},
    }
    write_report(report, HERE / "report_example.json", REPORT_SCHEMA)


if __name__ == "__main__":
    main()
