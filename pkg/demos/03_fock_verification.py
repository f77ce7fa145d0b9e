"""
Checking the gate in Fock space
===============================

Build the gate from exact truncated kick matrices and measure its error for
thermal and coherent motional states.  A closed-loop sequence is insensitive
to the motional state, so all errors sit at round-off.
"""

import math

from kickgate import TrapParams, solve_protocol1
from kickgate.fock import config_for, gate_error, phase_pattern, simulate_instantaneous
from kickgate.fockspace import coherent_state, pure_density, thermal_state

p = TrapParams()
seq = solve_protocol1(p).seq
n = 40
U = simulate_instantaneous(seq, p, config_for(seq, p, n, n, extra_amplitude=2.0))
dc, dr = U.dims
print("working dimensions:", U.dims, "phase pattern:", phase_pattern(U))

for nbar in (0.0, 1.0, 5.0):
    e = gate_error(U, math.pi / 4, (thermal_state(nbar, n, dc), thermal_state(nbar, n, dr)))
    print(f"thermal nbar={nbar}: E = {e:.2e}")
for alpha in (1.0, 2.0):
    rho = (pure_density(coherent_state(alpha, n, dc)), pure_density(coherent_state(alpha, n, dr)))
    print(f"coherent alpha={alpha}: E = {gate_error(U, math.pi / 4, rho):.2e}")
