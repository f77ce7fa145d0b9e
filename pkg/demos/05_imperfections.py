"""
Misalignment, temperature and anharmonicity
===========================================

A small timing error leaves the loops open, and the resulting error grows
with temperature.  The closed-form evaluation and the Fock-space simulation
agree to round-off.  The last block switches on the cubic Coulomb term for
Protocol II gates of decreasing duration.
"""

import math

from kickgate import TrapParams, solve_protocol2
from kickgate.fock import active_phase, gate_error, simulate_anharmonic, vacuum
from kickgate.fockspace import FockConfig
from kickgate.noise import Scenario, SweepSpec, misalignment_sweep

rows, report = misalignment_sweep(
    SweepSpec("nbar", [0, 1, 5, 10], scenario=Scenario(timing_offset=2e-3)), workers=1)
for r in rows:
    print(f"nbar={r['x']:4.0f}  E_oracle={r['E_oracle']:.4e}  E_sim={r['E_sim']:.4e}  "
          f"printed formula={r['E_paper']:+.4f}")
print(f"max discrepancy {report['max_discrepancy']:.1e}")

p = TrapParams(a0_over_d=1e-3)
cfg = FockConfig(1, 1, 0, 29)
for T in (0.3, 0.1, 0.03):
    seq = solve_protocol2(T, p).seq
    U = simulate_anharmonic(seq, p, cfg, steps_per_period=math.ceil(400 / seq.duration))
    e = gate_error(U, active_phase(seq, p, cfg), vacuum(U))
    print(f"T={T:<5} a0/d=1e-3: E = {e:.3e}")
