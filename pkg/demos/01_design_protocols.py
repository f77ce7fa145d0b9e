"""
Designing kick sequences
========================

Solve the two antisymmetric protocols at eta = 0.178 and the general
least-squares solver on the Protocol I weight pattern, then check that all
three close both phase-space loops and hit theta = pi/4.
"""

import math

from kickgate import TrapParams, design_general, solve_protocol1, solve_protocol2
from kickgate.design import verify

p = TrapParams(eta=0.178)

# Protocol I: four kicks, tilt factor gamma on the outer pair
r1 = solve_protocol1(p)
print(f"Protocol I : N={r1.N} gamma={r1.gamma:.6f} tau={r1.tau} T={r1.T:.5f} N_p={r1.N_p}")

# Protocol II: six kicks, the gate time can be made arbitrarily short
for T in (0.3, 0.1, 0.03):
    r2 = solve_protocol2(T, p)
    print(f"Protocol II: T={T:<5} -> N={r2.N:4d} N_p={r2.N_p:5d} T'={r2.T:.5f}")

# the general solver only knows the weights; it finds the Protocol I times again
pattern = [r1.N * r1.gamma, r1.N, -r1.N, -r1.N * r1.gamma]
g = design_general(r1.T, pattern, p, seed=0)
print("general    :", [round(float(t), 9) for t in g.seq.times], g.message)

res, dtheta = verify(g.seq, p)
print(f"max |C| = {res:.1e}, |theta - pi/4| = {dtheta:.1e} (theta target {math.pi / 4:.6f})")
