"""
Phase-space loops
=================

Trace the coherent-state trajectory of both modes for each internal state of
the Protocol I gate and write them as CSV for plotting.  States with equal
spins never move the stretch mode; opposite spins never move the COM mode.
"""

import sys
from pathlib import Path

from kickgate import TrapParams, derive_modes, solve_protocol1
from kickgate.analytic import trajectory, write_trajectory_csv

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
out.mkdir(exist_ok=True)

p = TrapParams()
m = derive_modes(p)
seq = solve_protocol1(p).seq

for s1, s2 in ((1, 1), (1, -1)):
    com, rel, x_r, p_r = trajectory(seq, m, s1, s2, samples_per_period=400)
    tag = f"{'+' if s1 > 0 else '-'}{'+' if s2 > 0 else '-'}"
    write_trajectory_csv(com, out / f"loop_com_{tag}.csv")
    write_trajectory_csv(rel, out / f"loop_stretch_{tag}.csv")
    end_c, end_r = com[-1], rel[-1]
    print(f"spins {tag}: COM ends at ({end_c.x:+.1e}, {end_c.p:+.1e}), "
          f"stretch ends at ({end_r.x:+.1e}, {end_r.p:+.1e}), max |x_r| = {x_r:.3f}")
print("CSV files in", out)
