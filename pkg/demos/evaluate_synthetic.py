# python3 demos/evaluate_synthetic.py
#
# The full metric table on desk-scale synthetic motion: a random walk and
# a sinusoid, each scored against the other and against itself.

import numpy as np

from dancerecal.metrics import BeatTrack, evaluate
from dancerecal.motion import default_skeleton
from dancerecal.synth import synthesize

KEYS = ("fid_k", "fid_g", "div_k", "div_g", "fsr", "bas")


def table(rows):
    print(f"{'gen / ref':<24}" + "".join(f"{k:>10}" for k in KEYS))
    for name, r in rows:
        print(f"{name:<24}" + "".join(f"{r[k]:>10.4f}" for k in KEYS))


def run():
    sk = default_skeleton()
    walk = synthesize("random-walk", n=240, batch=4, seed=3)
    wave = synthesize("sinusoid", n=240, batch=4)
    music = BeatTrack(np.arange(0.0, 240.0, 10.0))   # one beat every 10 frames

    rows = []
    for gname, gen in (("random-walk", walk), ("sinusoid", wave)):
        for rname, ref in (("random-walk", walk), ("sinusoid", wave)):
            rows.append((f"{gname} / {rname}", evaluate(gen, ref, sk, music)))
    table(rows)

    # the random walk has speed minima almost everywhere, so nearly every beat
    # finds a close partner; the sinusoid's minima sit on a fixed 10-frame
    # grid offset from the beats, which caps its score
    r = dict(rows)["sinusoid / sinusoid"]
    print(f"\nsinusoid boundary discontinuity: {r['boundary_discontinuity']['mean']:.4f}")


if __name__ == "__main__":
    run()
