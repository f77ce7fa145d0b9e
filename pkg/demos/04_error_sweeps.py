"""
Finite pulses and timing jitter
===============================

Sweep the pi-pulse length and the relative pulse-length jitter for one
repetition of Protocol I (COM mode only) and fit power laws.  Both errors
grow quadratically.  Pulse groups start to overlap once the pulses are
longer than about tau2 = 0.034, and those points come back flagged.
"""

import numpy as np

from kickgate.noise import Scenario, SweepSpec, fit_power_law, run_sweep

sc = Scenario(protocol="1", repetitions=1, modes="c", tau_pulse=1e-4)

taus = np.logspace(-3, -1, 9)
rows = run_sweep(SweepSpec("pulse_duration", taus, scenario=sc))
for r in rows:
    print(f"tau={r['x']:.2e}  E={r['E_mean']:.3e}  {r['message']}")
fit = fit_power_law(taus, [r["E_mean"] for r in rows])
print(f"finite pulses: E ~ {fit.prefactor:.3f} tau^{fit.exponent:.3f}")

eps = np.logspace(-3, -1, 5)
rows = run_sweep(SweepSpec("jitter_amplitude", eps, samples=50, seed=7, scenario=sc))
fit = fit_power_law(eps, [r["E_mean"] for r in rows], window=(eps[0], eps[-1]))
print(f"jitter (50 samples): <E> ~ {fit.prefactor:.3f} eps^{fit.exponent:.3f}")
