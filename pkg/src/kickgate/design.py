"""Pulse-sequence design: the two antisymmetric protocols and a general solver.

All solvers return a :class:`DesignResult`; ``success`` is decided by an
independent re-evaluation of the residuals and the entangling phase, never
by the solver's own convergence flag.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, least_squares

from .analytic import gate_phase, residuals, trajectory
from .model import SQRT3, TWO_PI, KickEvent, PulseSequence, TrapParams, antisymmetrize, derive_modes

TARGET_PHASE = math.pi / 4
RESIDUAL_TOL = 1e-10
PHASE_TOL = 1e-9
MAX_ITER = 200

PROTOCOL1_PATTERN = (1.0, 1.0)          # (gamma-scaled, plain) kicks before t = 0
PROTOCOL2_PATTERN = (-2.0, 3.0, -2.0)   # weights at -tau1, -tau2, -tau3


class DesignError(RuntimeError):
    """No admissible design; ``result`` holds the best effort, if any."""

    def __init__(self, msg: str, result: "DesignResult | None" = None):
        super().__init__(msg)
        self.result = result


@dataclass
class DesignResult:
    seq: PulseSequence
    gamma: float
    tau: list[float]
    N: int
    N_p: int
    T: float
    residual_norm: float
    theta_error: float
    protocol: str = ""
    seed: int | None = None
    success: bool = False
    message: str = ""
    extra: dict = field(default_factory=dict)

    def metadata(self) -> dict:
        return {
            "protocol": self.protocol, "gamma": self.gamma, "tau": list(self.tau), "N": self.N,
            "N_p": self.N_p, "T": self.T, "residual_norm": self.residual_norm,
            "theta_error": self.theta_error, "seed": self.seed, "success": self.success,
            "message": self.message, **self.extra,
        }

    def save(self, path, **extra) -> None:
        self.seq.save(path, metadata={**self.metadata(), **extra})


def verify(seq: PulseSequence, p: TrapParams, target: float = TARGET_PHASE) -> tuple[float, float]:
    """(max(|C_c|, |C_r|), |theta - target|) recomputed from scratch."""
    c_c, c_r = residuals(seq, derive_modes(p))
    return max(abs(c_c), abs(c_r)), abs(gate_phase(seq, p) - target)


def _finish(seq, p, gamma, tau, N, protocol, seed=None, n_p=None, message="", **extra) -> DesignResult:
    res, terr = verify(seq, p)
    ok = res <= RESIDUAL_TOL and terr <= PHASE_TOL
    return DesignResult(seq, gamma, list(tau), N, seq.total_pulse_pairs if n_p is None else n_p,
                        seq.duration, res, terr, protocol, seed, ok,
                        message or ("ok" if ok else "tolerances not met"), dict(extra))


def newton(fun, jac, x0, tol: float = 1e-14, max_iter: int = MAX_ITER):
    """Damped Newton iteration for a square system; returns (x, |F|, converged)."""
    x = np.array(x0, dtype=float)
    f = fun(x)
    nf = np.linalg.norm(f)
    for _ in range(max_iter):
        if nf <= tol:
            return x, nf, True
        try:
            step = np.linalg.solve(jac(x), -f)
        except np.linalg.LinAlgError:
            return x, nf, False
        lam = 1.0
        while lam > 1e-6:
            xn = x + lam * step
            fn = fun(xn)
            if np.linalg.norm(fn) < nf:
                break
            lam *= 0.5
        else:
            return x, nf, False
        x, f, nf = xn, fn, np.linalg.norm(fn)
    return x, nf, nf <= tol


# ------------------------------------------------------------------ protocol I

def _p1_system(gamma: float):
    # unknowns are the phases u = 2 pi tau of the two kicks before t = 0
    def fun(u):
        return np.array([gamma * np.sin(u[0]) + np.sin(u[1]),
                         gamma * np.sin(SQRT3 * u[0]) + np.sin(SQRT3 * u[1])])

    def jac(u):
        return np.array([[gamma * np.cos(u[0]), np.cos(u[1])],
                         [SQRT3 * gamma * np.cos(SQRT3 * u[0]), SQRT3 * np.cos(SQRT3 * u[1])]])
    return fun, jac


def _p1_branch_start() -> float:
    """Outer phase on the gamma -> 0 end of the branch: sin(sqrt3 u) = sqrt3 sin u."""
    return brentq(lambda u: np.sin(SQRT3 * u) - SQRT3 * np.sin(u), math.pi, TWO_PI * 0.55, xtol=1e-15)


def protocol1_sequence(gamma: float, tau1: float, tau2: float, N: int = 1) -> PulseSequence:
    return antisymmetrize([KickEvent(-tau1, gamma), KickEvent(-tau2, 1.0)], repetitions=N)


def protocol1_times(gamma: float, steps: int = 8) -> tuple[float, float]:
    """(tau1, tau2) on the branch with tau1 ~ 0.538 trap periods.

    The branch is followed by continuation in gamma from gamma -> 0, where
    tau2 -> 0 and tau1 solves sin(sqrt3 u) = sqrt3 sin u.
    """
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    u1 = _p1_branch_start()
    u = np.array([u1, math.asin(-min(1.0, gamma / steps) * math.sin(u1))])
    for g in np.linspace(gamma / steps, gamma, steps):
        fun, jac = _p1_system(g)
        u, nf, ok = newton(fun, jac, u)
        if not ok:
            raise DesignError(f"Newton did not converge at gamma={g:.6g} (|F|={nf:.2e})")
    if not u[0] > u[1] > 0:
        raise DesignError("protocol I branch lost its ordering tau1 > tau2 > 0")
    return float(u[0] / TWO_PI), float(u[1] / TWO_PI)


def solve_protocol1(p: TrapParams, max_N: int = 1000) -> DesignResult:
    """Four kicks N (gamma, 1, -1, -gamma) at (-tau1, -tau2, tau2, tau1).

    For each gamma both loops are closed on the tau1 ~ 0.538 branch; N is the
    smallest repetition count for which some gamma in (0, 1) reaches
    theta = pi/4, and gamma is then found by bracketing.
    """
    def base_phase(g):
        t1, t2 = protocol1_times(g)
        return gate_phase(protocol1_sequence(g, t1, t2), p)

    top = base_phase(1.0)
    if top <= 0:
        raise DesignError("protocol I phase is not positive on its branch")
    N = max(1, math.ceil(math.sqrt(TARGET_PHASE / top)))
    if N * N * top == TARGET_PHASE:
        N += 1  # keep gamma strictly below 1
    if N > max_N:
        raise DesignError(f"protocol I would need N = {N} > {max_N} repetitions")
    gamma = brentq(lambda g: N * N * base_phase(g) - TARGET_PHASE, 1e-6, 1.0, xtol=1e-15, rtol=1e-15,
                   maxiter=MAX_ITER)
    t1, t2 = protocol1_times(gamma)
    seq = protocol1_sequence(gamma, t1, t2, N)
    return _finish(seq, p, gamma, [t1, t2], N, "protocol1",
                   weight_sum=float(N * sum(abs(e.w) for e in seq.events)))


# ----------------------------------------------------------------- protocol II

def _p2_system(u1: float):
    z1, z2, z3 = PROTOCOL2_PATTERN

    def fun(u):
        return np.array([z1 * np.sin(u1) + z2 * np.sin(u[0]) + z3 * np.sin(u[1]),
                         z1 * np.sin(SQRT3 * u1) + z2 * np.sin(SQRT3 * u[0]) + z3 * np.sin(SQRT3 * u[1])])

    def jac(u):
        return np.array([[z2 * np.cos(u[0]), z3 * np.cos(u[1])],
                         [SQRT3 * z2 * np.cos(SQRT3 * u[0]), SQRT3 * z3 * np.cos(SQRT3 * u[1])]])
    return fun, jac


def _p2_small_time_ratios() -> tuple[float, float]:
    """tau2/tau1, tau3/tau1 as T -> 0: sum z u = 0 and sum z u^3 = 0."""
    z1, z2, z3 = PROTOCOL2_PATTERN

    def r3_of(r2):
        return -(z1 + z2 * r2) / z3

    r2 = brentq(lambda r: z1 + z2 * r ** 3 + z3 * r3_of(r) ** 3, 2.0 / 3.0 + 1e-12, 1.0, xtol=1e-15)
    return r2, r3_of(r2)


def protocol2_sequence(tau: tuple[float, float, float], N: int = 1) -> PulseSequence:
    return antisymmetrize([KickEvent(-t, z) for t, z in zip(tau, PROTOCOL2_PATTERN)], repetitions=N)


def protocol2_times(T: float, guesses: int = 6) -> tuple[float, float, float]:
    """(tau1, tau2, tau3) closing both loops with tau1 = T/2.

    Newton is started from the small-T ratios and from a grid of ordered
    guesses; among the admissible roots the one with the smallest maximal
    stretch displacement is returned.
    """
    if T <= 0:
        raise ValueError("gate time must be positive")
    u1 = math.pi * T
    fun, jac = _p2_system(u1)
    r2, r3 = _p2_small_time_ratios()
    starts = [(r2, r3)] + [(a, b) for a in np.linspace(0.1, 0.95, guesses)
                           for b in np.linspace(0.05, 0.9, guesses) if b < a]
    roots = []
    for a, b in starts:
        u, nf, ok = newton(fun, jac, [a * u1, b * u1])
        if ok and u1 > u[0] > u[1] > 0 and not any(np.allclose(u, r, atol=1e-9) for r in roots):
            roots.append(u)
        if roots and (a, b) == (r2, r3):
            break  # the small-T branch is the one of interest when it exists
    if not roots:
        raise DesignError(f"no ordered protocol II root at T={T}")
    m = derive_modes(TrapParams())

    def reach(u):
        seq = protocol2_sequence((T / 2, u[0] / TWO_PI, u[1] / TWO_PI))
        return trajectory(seq, m, 1, -1)[2]

    best = min(roots, key=reach)
    return T / 2, float(best[0] / TWO_PI), float(best[1] / TWO_PI)


def solve_protocol2(T: float, p: TrapParams) -> DesignResult:
    """Six kicks N (-2, 3, -2, 2, -3, 2) with total time close to T.

    N is the smallest integer with N^2 theta_1(T) >= pi/4, theta_1 the phase
    of a single repetition; the gate time is then shrunk to the T' <= T at
    which N^2 theta_1(T') = pi/4 exactly, re-solving the loop conditions.
    """
    if T <= 0:
        raise ValueError("gate time must be positive")

    def base_phase(t):
        return gate_phase(protocol2_sequence(protocol2_times(t)), p)

    th = base_phase(T)
    if th <= 0:
        raise DesignError(f"protocol II phase is not positive at T={T}")
    n_real = math.sqrt(TARGET_PHASE / th)
    if n_real < 1:
        raise DesignError(f"T={T} is too long: fewer than one repetition would be needed")
    N = math.ceil(n_real)
    if N * N * th == TARGET_PHASE:
        T_new = T
    else:
        # theta_1 ~ T^3 for short gates: bracket around the cube-root estimate
        guess = T * (TARGET_PHASE / (N * N * th)) ** (1.0 / 3.0)
        lo = guess * 0.9
        while N * N * base_phase(lo) > TARGET_PHASE:
            lo *= 0.9
        T_new = brentq(lambda t: N * N * base_phase(t) - TARGET_PHASE, lo, T, xtol=1e-15, rtol=1e-15,
                       maxiter=MAX_ITER)
    tau = protocol2_times(T_new)
    seq = protocol2_sequence(tau, N)
    return _finish(seq, p, 1.0, list(tau), N, "protocol2", n_p=14 * N, T_requested=T,
                   time_scale=T_new / T)


# --------------------------------------------------------------- general solver

def _times_from_logits(v: np.ndarray, T: float, n: int) -> np.ndarray:
    logits = np.concatenate([[0.0], v])
    g = np.exp(logits - logits.max())
    g = T * g / g.sum()
    return -T / 2 + np.concatenate([[0.0], np.cumsum(g)])[:n]


def design_general(T: float, pattern, p: TrapParams, seed: int = 0, n_starts: int = 32,
                   target: float = TARGET_PHASE) -> DesignResult:
    """Least-squares search for kick times of a fixed weight pattern.

    The first and last kicks sit at -T/2 and T/2; the interior times are
    parametrised by softmax gaps so that their order is preserved.  The
    residual vector is [Re C_c, Im C_c, Re C_r, Im C_r, (theta - target)/pi].
    Every start i draws its initial logits from a generator seeded with
    (seed, i).  The best start is polished by Gauss-Newton steps on the
    times themselves, since the softmax map flattens the last few digits.
    """
    w = np.asarray(pattern, dtype=float)
    n = len(w)
    if n < 2:
        raise ValueError("pattern needs at least two kicks")
    m = derive_modes(p)
    pref = 4.0 * p.eta ** 2
    iu = np.triu_indices(n, 1)

    def resid_t(t):
        e_c = w * np.exp(-1j * TWO_PI * m.nu_c * t)
        e_r = w * np.exp(-1j * TWO_PI * m.nu_r * t)
        c_c, c_r = e_c.sum(), e_r.sum()
        dt = TWO_PI * (t[:, None] - t[None, :])
        ww = np.outer(w, w)
        th = pref * np.sum((ww * (np.sin(SQRT3 * dt) / SQRT3 - np.sin(dt)))[iu])
        return np.array([c_c.real, c_c.imag, c_r.real, c_r.imag, (th - target) / math.pi])

    def jac_t(t):
        # columns: d/dt_j of the residual vector, interior kicks only
        cols = []
        dt = TWO_PI * (t[:, None] - t[None, :])
        fprime = np.cos(SQRT3 * dt) - np.cos(dt)
        for j in range(1, n - 1):
            dc = -1j * TWO_PI * m.nu_c * w[j] * np.exp(-1j * TWO_PI * m.nu_c * t[j])
            dr = -1j * TWO_PI * m.nu_r * w[j] * np.exp(-1j * TWO_PI * m.nu_r * t[j])
            dth = pref * TWO_PI * w[j] * np.sum(np.delete(w * fprime[j], j))
            cols.append([dc.real, dc.imag, dr.real, dr.imag, dth / math.pi])
        return np.array(cols).T

    def polish(t):
        """Gauss-Newton on the interior times themselves; keeps only improvements."""
        t = t.copy()
        r = resid_t(t)
        for _ in range(50 if n > 2 else 0):
            step = np.linalg.lstsq(jac_t(t), -r, rcond=None)[0]
            tn = t.copy()
            tn[1:-1] += step
            if np.any(np.diff(tn) <= 0):
                break
            rn = resid_t(tn)
            if np.max(np.abs(rn)) >= np.max(np.abs(r)):
                break
            t, r = tn, rn
        return t

    def resid(v):
        return resid_t(_times_from_logits(v, T, n))

    n_free = n - 2
    best = None
    best_cost = math.inf
    if n_free == 0:
        best = np.zeros(0)
    else:
        method = "lm" if n_free <= 5 else "trf"
        for i in range(n_starts):
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, i])))
            v0 = rng.normal(0.0, 1.0, n_free)
            sol = least_squares(resid, v0, method=method, xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                max_nfev=MAX_ITER * (n_free + 1))
            cost = float(np.max(np.abs(sol.fun)))
            if cost < best_cost:
                best, best_cost = sol.x, cost
    times = polish(_times_from_logits(best, T, n))
    seq = PulseSequence.from_pairs(zip(times, w))
    res, terr = verify(seq, p, target)
    ok = res <= RESIDUAL_TOL and terr <= PHASE_TOL
    msg = "ok" if ok else ("infeasible: no free times" if n_free == 0 else "no start met the tolerances")
    return DesignResult(seq, 1.0, [float(t) for t in seq.times], 1, seq.total_pulse_pairs, seq.duration,
                        res, terr, "general", seed, ok, msg, {"pattern": [float(x) for x in w]})


# ---------------------------------------------------------------- scaling scan

SCAN_HEADER = ["T", "N_p", "X_r", "P_r", "residual_norm", "theta_error"]


def scan_scaling(p: TrapParams, T_values) -> list[dict]:
    """Protocol II over gate times: pulse pairs and worst-case stretch excursion."""
    m = derive_modes(p)
    rows = []
    for T in T_values:
        if T <= 0:
            raise ValueError("gate times must be positive")
        try:
            r = solve_protocol2(T, p)
        except DesignError as exc:
            rows.append({"T": T, "N_p": 0, "X_r": math.nan, "P_r": math.nan, "residual_norm": math.nan,
                         "theta_error": math.nan, "ok": False, "message": str(exc)})
            continue
        _, _, x_r, p_r = trajectory(r.seq, m, 1, -1)
        rows.append({"T": r.T, "N_p": r.N_p, "X_r": x_r, "P_r": p_r, "residual_norm": r.residual_norm,
                     "theta_error": r.theta_error, "ok": r.success, "message": r.message})
    return rows


def write_scan_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(SCAN_HEADER)
        for r in rows:
            wr.writerow([repr(float(r[k])) if k != "N_p" else int(r[k]) for k in SCAN_HEADER])
