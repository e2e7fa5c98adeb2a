"""Compare the two readings of the pure-dephasing rate at the calibration point.

A: both projector channels at rate G_d, so the optical coherence decays at G0/2 + G_d.
B: coherence decay exactly G0/2 + G_d/2, i.e. both channels at G_d/2.

The sub-radiant feature at k dz = 35 pi / 18 with G_d = 0.016 should measure 0.32.

    python3 scripts/dephasing_convention.py
"""

import math

from wgqed.observables import DEFAULT_DELTA_GRID, extract_subradiant_feature, spectrum
from wgqed.system import pair_config

PHASE, GD, TARGET = 35 * math.pi / 18, 0.016, 0.32


def feature(gamma_deph: float) -> float:
    cfg = pair_config(PHASE, mode="RT", gamma_deph=gamma_deph)
    return extract_subradiant_feature(spectrum(cfg, delta_grid=DEFAULT_DELTA_GRID)).delta_T_sub


if __name__ == "__main__":
    for label, rate in (("A", GD), ("B", GD / 2)):
        val = feature(rate)
        print(f"convention {label}: dT_sub = {val:.4f}  ({(val / TARGET - 1) * 100:+.1f}% vs {TARGET})")
