"""Independent reference computations used by the tests.

Nothing here calls the package's kick or displacement builders: kicks are
scipy.linalg.expm of the truncated generator, and states are propagated
vector by vector.
"""

import math

import numpy as np
from scipy.linalg import expm


def ladder(dim):
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)


def coherent(alpha, dim):
    n = np.arange(dim)
    logf = np.array([math.lgamma(k + 1) for k in n])
    if alpha == 0:
        v = np.zeros(dim, complex)
        v[0] = 1
        return v
    return np.exp(-abs(alpha) ** 2 / 2 + n * np.log(complex(alpha)) - logf / 2)


def brute_force_mode(kicks, alpha0, dim):
    """prod exp(-i p (a + a^dag)) exp(-i phi n) applied to |alpha0>."""
    a = ladder(dim)
    x = a + a.T
    n = np.arange(dim)
    psi = coherent(alpha0, dim)
    for phi, p in kicks:
        psi = np.exp(-1j * phi * n) * psi
        psi = expm(-1j * p * x) @ psi
    return psi


def coherent_fit(psi):
    """(alpha, xi) with psi ~ exp(i xi)|alpha>, alpha from <a>."""
    dim = psi.shape[0]
    a = ladder(dim)
    alpha = np.vdot(psi, a @ psi)
    xi = np.angle(np.vdot(coherent(alpha, dim), psi))
    return complex(alpha), float(xi)


def series_phase_two_kicks(eta, s):
    """Leading-order entangling phase of kicks (1, -1) at (-s/2, s/2)."""
    x = 2 * math.pi * s
    # 4 eta^2 w1 w2 f(t1 - t2), f(y) = sin(sqrt3 y)/sqrt3 - sin y = -y^3/3 + O(y^5)
    return -4 * eta ** 2 * x ** 3 / 3 + 4 * eta ** 2 * (9 - 1) * x ** 5 / 120

