"""Closed-form kick algebra.

A kick of weight w acts on the centre-of-mass mode as exp(-i p (a + a^dag))
with p = 2 w eta_c (s1 + s2), and on the stretch mode with
p = w eta_r (s1 - s2), where s1, s2 = +-1 are the sigma_z eigenvalues of the
two ions.  Between kicks each mode rotates freely at its own frequency.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fockspace import SPIN_STATES, FockConfig, GateUnitary, free_rotation
from .model import SQRT3, TWO_PI, ModeParams, PulseSequence, TrapParams, derive_modes

MODES = ("c", "r")


@dataclass(frozen=True)
class ResidualReport:
    C_c: complex
    C_r: complex
    theta: float
    T: float

    @property
    def residual_norm(self) -> float:
        return max(abs(self.C_c), abs(self.C_r))

    def to_dict(self) -> dict:
        return {
            "C_c": [self.C_c.real, self.C_c.imag],
            "C_r": [self.C_r.real, self.C_r.imag],
            "theta": self.theta,
            "T": self.T,
        }


@dataclass(frozen=True)
class PhaseSpacePoint:
    t: float
    x: float
    p: float


def kick_strength(w: float, mode: str, m: ModeParams, s1: int, s2: int) -> float:
    if mode == "c":
        return 2.0 * w * m.eta_c * (s1 + s2)
    return w * m.eta_r * (s1 - s2)


def mode_kicks(seq: PulseSequence, m: ModeParams, mode: str, s1: int, s2: int) -> list[tuple[float, float]]:
    """(phase increment, kick strength) per kick, the first increment zero."""
    nu = m.freq(mode)
    out = []
    prev = seq.times[0] if seq.events else 0.0
    for t, w in zip(seq.times, seq.weights):
        out.append((TWO_PI * nu * (t - prev), kick_strength(w, mode, m, s1, s2)))
        prev = t
    return out


def propagate_coherent(kicks: Sequence[tuple[float, float]], alpha0: complex = 0.0,
                       total_phase: float | None = None) -> tuple[complex, float]:
    """Act with prod_k exp(-i p_k (a + a^dag)) exp(-i phi_k a^dag a) on |alpha0>.

    Returns (alpha_tilde, xi) with U|alpha0> = exp(i xi)|alpha_tilde>.  If
    ``total_phase`` is given and no kicks are present, it sets the free
    rotation angle.
    """
    if not kicks:
        theta = 0.0 if total_phase is None else total_phase
        return alpha0 * np.exp(-1j * theta), 0.0
    phis = np.array([k[0] for k in kicks], dtype=float)
    ps = np.array([k[1] for k in kicks], dtype=float)
    thetas = np.cumsum(phis)
    theta_n = thetas[-1]
    alpha_t = alpha0 * np.exp(-1j * theta_n) - 1j * np.sum(ps * np.exp(1j * (thetas - theta_n)))
    # pair term: -sum_{m>k} p_m p_k sin(theta_k - theta_m)
    d = thetas[:, None] - thetas[None, :]
    pair = -np.sum(np.triu(np.outer(ps, ps) * np.sin(d), 1))
    xi = pair - np.real(alpha0 * np.sum(ps * np.exp(-1j * thetas)))
    return complex(alpha_t), float(xi)


def residuals(seq: PulseSequence, m: ModeParams) -> tuple[complex, complex]:
    t = np.asarray(seq.times, dtype=float)
    w = np.asarray(seq.weights, dtype=float)
    c_c = np.sum(w * np.exp(-1j * TWO_PI * m.nu_c * t))
    c_r = np.sum(w * np.exp(-1j * TWO_PI * m.nu_r * t))
    return complex(c_c), complex(c_r)


def mode_phases(seq: PulseSequence, p: TrapParams) -> tuple[float, float]:
    """Centre-of-mass and stretch contributions to the entangling phase."""
    if len(seq.events) < 2:
        return 0.0, 0.0
    m = derive_modes(p)
    t = np.asarray(seq.times, dtype=float)
    w = np.asarray(seq.weights, dtype=float)
    dt = TWO_PI * (t[:, None] - t[None, :])  # [k, m] = t_k - t_m
    ww = np.triu(np.outer(w, w), 1)          # k < m
    pref = 4.0 * p.eta ** 2
    theta_c = -pref * np.sum(ww * np.sin(m.nu_c * dt))
    theta_r = pref * np.sum(ww * np.sin(m.nu_r * dt)) / SQRT3
    return float(theta_c), float(theta_r)


def gate_phase(seq: PulseSequence, p: TrapParams) -> float:
    """Coefficient of sigma_1^z sigma_2^z in the accumulated phase."""
    return sum(mode_phases(seq, p))


def residual_report(seq: PulseSequence, p: TrapParams) -> ResidualReport:
    c_c, c_r = residuals(seq, derive_modes(p))
    return ResidualReport(c_c, c_r, gate_phase(seq, p), seq.duration)


def ideal_gate_unitary(theta: float, T: float, m: ModeParams, trunc: FockConfig) -> GateUnitary:
    """exp(i theta s1 s2) x exp(-i nu_c T a^dag a) x exp(-i nu_r T b^dag b)."""
    rc, rr = free_rotation(m, T, trunc)
    blocks = [(np.diag(np.exp(1j * theta * s1 * s2) * rc), np.diag(rr.copy())) for s1, s2 in SPIN_STATES]
    return GateUnitary(trunc, T, m, blocks=blocks, meta={"source": "ideal", "theta": theta})


# ----------------------------------------------------------------- trajectory

def _arc(alpha: complex, t0: float, t1: float, nu: float, samples_per_period: int):
    n = max(2, int(math.ceil(samples_per_period * nu * (t1 - t0))) + 1)
    ts = np.linspace(t0, t1, n)
    a = alpha * np.exp(-1j * TWO_PI * nu * (ts - t0))
    return ts, a


def _arc_extrema(alpha: complex, span: float) -> tuple[float, float]:
    """max |Re| and |Im| of alpha e^{-i phi} for phi in [0, span]."""
    r, phi0 = abs(alpha), np.angle(alpha)
    if r == 0:
        return 0.0, 0.0
    out = []
    for target in (0.0, math.pi / 2):
        # first phi >= 0 with phi0 - phi = target (mod pi)
        first = (phi0 - target) % math.pi
        if first <= span:
            out.append(r)
        else:
            end = alpha * np.exp(-1j * span)
            out.append(max(abs(alpha.real if target == 0 else alpha.imag),
                           abs(end.real if target == 0 else end.imag)))
    return out[0], out[1]


def trajectory(seq: PulseSequence, m: ModeParams, s1: int, s2: int,
               alpha0: complex = 0.0, beta0: complex = 0.0, samples_per_period: int = 64):
    """Phase-space trajectories of both modes for internal state (s1, s2).

    Returns (com, rel, X_r, P_r): lists of PhaseSpacePoint in the quadratures
    (X + iP)/sqrt(2) = <a>, and the maximum |X|, |P| of the stretch mode.
    The maxima are exact (arc extrema are found analytically), not sampled.
    """
    if samples_per_period < 8:
        raise ValueError("samples_per_period must be >= 8")
    out = {}
    extrema = {}
    for mode, a0 in (("c", alpha0), ("r", beta0)):
        nu = m.freq(mode)
        pts: list[PhaseSpacePoint] = []
        xmax = pmax = 0.0
        a = complex(a0)
        ts, ws = seq.times, seq.weights
        if not ts:
            pts.append(PhaseSpacePoint(0.0, math.sqrt(2) * a.real, math.sqrt(2) * a.imag))
            xmax, pmax = abs(a.real), abs(a.imag)
        for k, (t, w) in enumerate(zip(ts, ws)):
            pts.append(PhaseSpacePoint(t, math.sqrt(2) * a.real, math.sqrt(2) * a.imag))
            xmax, pmax = max(xmax, abs(a.real)), max(pmax, abs(a.imag))
            a = a - 1j * kick_strength(w, mode, m, s1, s2)
            if k + 1 < len(ts):
                arc_t, arc_a = _arc(a, t, ts[k + 1], nu, samples_per_period)
                pts.extend(PhaseSpacePoint(float(tt), math.sqrt(2) * z.real, math.sqrt(2) * z.imag)
                           for tt, z in zip(arc_t, arc_a))
                ex, ep = _arc_extrema(a, TWO_PI * nu * (ts[k + 1] - t))
                xmax, pmax = max(xmax, ex), max(pmax, ep)
                a = complex(arc_a[-1])
            else:
                pts.append(PhaseSpacePoint(t, math.sqrt(2) * a.real, math.sqrt(2) * a.imag))
                xmax, pmax = max(xmax, abs(a.real)), max(pmax, abs(a.imag))
        out[mode] = pts
        extrema[mode] = (math.sqrt(2) * xmax, math.sqrt(2) * pmax)
    return out["c"], out["r"], extrema["r"][0], extrema["r"][1]


def write_trajectory_csv(points: Sequence[PhaseSpacePoint], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "x", "p"])
        for pt in points:
            wr.writerow([repr(pt.t), repr(pt.x), repr(pt.p)])


def write_report_json(report: ResidualReport, path, **extra) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({**report.to_dict(), **extra}, fh, indent=2)


# ------------------------------------------------------------ error estimates

def residual_displacements(res: ResidualReport, m: ModeParams) -> tuple[float, float]:
    """|delta| per unit (s1 +- s2): 2 eta_c |C_c| and eta_r |C_r|."""
    return 2.0 * m.eta_c * abs(res.C_c), m.eta_r * abs(res.C_r)


def thermal_misalignment_error(res: ResidualReport, m: ModeParams, nbar: float) -> tuple[float, float]:
    """Error of an imperfectly closed sequence: (printed formula, direct evaluation).

    The first value evaluates (C1^4 + C2^4 + C1 C2 - 6)/8 literally with
    C1 = exp[-(nbar + 1/2)|2 eta_c C_c|^2], C2 = exp[-(nbar + 1/2)|eta_r C_r|^2];
    note it equals -3/8 for a perfect sequence.  The second value is the gate
    error of the residual spin-dependent displacements in a thermal state,
    with the entangling phase taken as realised.
    """
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    u_c, u_r = residual_displacements(res, m)
    h = nbar + 0.5
    c1 = math.exp(-h * u_c ** 2)
    c2 = math.exp(-h * u_r ** 2)
    e_paper = (c1 ** 4 + c2 ** 4 + c1 * c2 - 6.0) / 8.0

    # <D(delta)>_th = exp(-|delta|^2 (nbar + 1/2)); the displacements of all
    # internal states are collinear, so the BCH phases vanish.
    acc = 0.0
    for s1, s2 in SPIN_STATES:
        for q1, q2 in SPIN_STATES:
            dc = u_c * ((s1 + s2) - (q1 + q2))
            dr = u_r * ((s1 - s2) - (q1 - q2))
            acc += math.exp(-h * (dc * dc + dr * dr))
    e_oracle = 1.0 - acc / 16.0
    return e_paper, e_oracle


def anharmonicity_error_estimate(p: TrapParams, T: float) -> float:
    """Perturbative error of the cubic Coulomb term, |0.4 a0/d|^2 / (2 pi nu T).

    T is in trap periods, so nu T = 2 pi T.
    """
    if T <= 0:
        raise ValueError("gate time must be positive")
    return (0.4 * p.a0_over_d) ** 2 / (TWO_PI * TWO_PI * p.nu * T)
