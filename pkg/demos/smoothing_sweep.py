# python3 demos/smoothing_sweep.py
#
# How much does recurrent recalibration calm the junctions between
# primitives?  Sweep the EMA weight and the noise threshold on a jumpy
# synthetic sequence and print the boundary discontinuity ratio.

import numpy as np

from dancerecal import NoiseConfig, RecalConfig, recalibrate_sequence
from dancerecal.metrics import boundary_discontinuity
from dancerecal.synth import synthesize


def run():
    seq = synthesize("iid-gaussian", n=13, batch=4, seed=1234)
    before = boundary_discontinuity(seq).mean
    print(f"raw mean discontinuity: {before:.4f}\n")

    print("alpha  " + "  ".join(f"t={t:<4}" for t in (0.0, 0.05, 0.2)))
    for alpha in (1.0, 0.8, 0.5, 0.3, 0.1):
        row = []
        for t in (0.0, 0.05, 0.2):
            cfg = RecalConfig.ema(alpha, NoiseConfig(t, seed=0))
            after = boundary_discontinuity(recalibrate_sequence(seq, cfg)).mean
            row.append(after / before)
        print(f"{alpha:<5}  " + "  ".join(f"{r:.3f} " for r in row))

    # alpha = 1 is passthrough; smaller alpha trades responsiveness for smoothness,
    # and noise on the previous primitive pushes the ratio back up.
    cfg = RecalConfig.ema(0.5)
    out = recalibrate_sequence(seq, cfg)
    drift = np.abs(out.data[:, -1, 13:] - seq.data[:, -1, 13:]).mean()
    print(f"\nmean |last output - last input| at alpha=0.5: {drift:.4f}")


if __name__ == "__main__":
    run()
