"""Ground-truth simulation of kicked gates on truncated Fock spaces.

Three simulators produce a :class:`GateUnitary`:

* :func:`simulate_instantaneous` multiplies exact kick matrices and free
  rotations, mode by mode and internal state by internal state;
* :func:`simulate_finite_pulses` realises every kick as square resonant
  pi-pulse pairs with the trap switched on, on the full dense space;
* :func:`simulate_anharmonic` adds the cubic Coulomb correction to the
  stretch mode.

:func:`gate_error` implements E = 1 - Tr_mot{Q rho Q^dag} with
Q = Tr_int{U_ideal U_real^dag} / 4.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .analytic import mode_kicks, mode_phases, propagate_coherent
from .fockspace import (
    SPIN_STATES, FockConfig, GateUnitary, TruncationError, annihilation, displacement, edge_leak,
    free_rotation, kick_matrix, number, padding_for, rotation_phases, thermal_state, thermal_tail, thermal_terms_for,
)
from .model import TWO_PI, ModeParams, PulseSequence, TrapParams, derive_modes, pulse_pair_count


def max_kick_amplitude(seq: PulseSequence, p: TrapParams) -> dict[str, float]:
    """Largest coherent amplitude reached from the origin, per mode, over internal states."""
    m = derive_modes(p)
    out = {}
    for mode in ("c", "r"):
        worst = 0.0
        for s1, s2 in SPIN_STATES:
            beta = 0j
            for phi, pk in mode_kicks(seq, m, mode, s1, s2):
                beta = beta * np.exp(-1j * phi) - 1j * pk
                worst = max(worst, abs(beta))
        out[mode] = worst
    return out


def config_for(seq: PulseSequence, p: TrapParams, n_max_c: int = 1, n_max_r: int = 1,
               extra_amplitude: float = 0.0) -> FockConfig:
    """A FockConfig whose padding covers the displacements of ``seq``.

    ``extra_amplitude`` accounts for coherent initial states beyond n_max.
    """
    amp = max_kick_amplitude(seq, p)
    pad_c = padding_for(n_max_c, amp["c"] + extra_amplitude) if n_max_c > 1 or amp["c"] > 0 else 0
    pad_r = padding_for(n_max_r, amp["r"] + extra_amplitude) if n_max_r > 1 or amp["r"] > 0 else 0
    return FockConfig(n_max_c, n_max_r, pad_c, pad_r)


def _check_leak(u: np.ndarray, n_keep: int, cfg: FockConfig, where: str) -> float:
    leak = edge_leak(u, n_keep)
    if leak > cfg.leak_tol:
        raise TruncationError(f"{where}: weight {leak:.2e} reaches the truncation edge; increase padding")
    return leak


# ------------------------------------------------------------ instantaneous

def _mode_unitary(kicks, dim: int) -> np.ndarray:
    u = np.eye(dim, dtype=complex)
    n = number(dim)
    for phi, pk in kicks:
        u = np.exp(-1j * phi * n)[:, None] * u
        if pk != 0:
            u = kick_matrix(pk, dim) @ u
    return u


def simulate_instantaneous(seq: PulseSequence, p: TrapParams, cfg: FockConfig,
                           strict: bool = True) -> GateUnitary:
    """prod_k U_c(t_k, z_k) U_r(t_k, z_k) with exact truncated kick matrices.

    A frozen mode (working dimension 1) is left out altogether, together with
    its share of the entangling phase; compare with :func:`active_phase`.
    """
    m = derive_modes(p)
    blocks = []
    cache: dict = {}
    leak = 0.0
    for s1, s2 in SPIN_STATES:
        pair = []
        for mode, dim, keep in (("c", cfg.dim_c, cfg.n_max_c), ("r", cfg.dim_r, cfg.n_max_r)):
            if dim == 1:
                pair.append(np.ones((1, 1), dtype=complex))
                continue
            kicks = tuple(mode_kicks(seq, m, mode, s1, s2))
            key = (mode, kicks)
            if key not in cache:
                u = _mode_unitary(kicks, dim)
                if strict:
                    leak = max(leak, _check_leak(u, keep, cfg, f"mode {mode}"))
                cache[key] = u
            pair.append(cache[key])
        blocks.append(tuple(pair))
    return GateUnitary(cfg, seq.duration, m, blocks=blocks,
                       meta={"source": "instantaneous", "edge_leak": leak})


def active_phase(seq: PulseSequence, p: TrapParams, cfg: FockConfig) -> float:
    """Entangling phase carried by the modes that ``cfg`` simulates."""
    th_c, th_r = mode_phases(seq, p)
    return (th_c if cfg.dim_c > 1 else 0.0) + (th_r if cfg.dim_r > 1 else 0.0)


# -------------------------------------------------------------- phase pattern

def _diagonal_element(U: GateUnitary, i: int, n: int) -> complex:
    """<n, n| U_s |n, n> for internal state i (n_r = 0 when the stretch is frozen)."""
    dr = U.dims[1]
    nr = n if dr > 1 else 0
    if U.blocks is not None:
        uc, ur = U.blocks[i]
        return complex(uc[n, n] * ur[nr, nr])
    idx = n * dr + nr
    return complex(U.spin_block(i)[idx, idx])


def spin_phases(U: GateUnitary, n: int = 0) -> np.ndarray:
    """arg <n_c=n, n_r=n| U_s |n, n> for each internal state s."""
    return np.angle(np.array([_diagonal_element(U, i, n) for i in range(4)]))


def phase_pattern(U: GateUnitary, n: int = 0) -> dict[str, float]:
    """Internal-state phase pattern of the diagonal element <n, n| U_s |n, n>."""
    return decompose_phases([_diagonal_element(U, i, n) for i in range(4)])


def decompose_phases(z) -> dict[str, float]:
    """Write arg z_s as phi0 + a1 s1 + a2 s2 + theta s1 s2 over SPIN_STATES.

    Each coefficient is only defined modulo pi/2 (theta, a1, a2) as the
    decomposition is read off exp(4 i coefficient).
    """
    z = np.asarray(z, dtype=complex)
    z = z / np.abs(z)
    zpp, zpm, zmp, zmm = z
    theta = np.angle(zpp * zmm / (zpm * zmp)) / 4.0
    a1 = np.angle(zpp * zpm / (zmp * zmm)) / 4.0
    a2 = np.angle(zpp * zmp / (zpm * zmm)) / 4.0
    return {"theta": float(theta), "a1": float(a1), "a2": float(a2)}


def wrap(x: float, period: float) -> float:
    """x reduced to (-period/2, period/2]."""
    return float(-((-x + period / 2) % period - period / 2))


# ------------------------------------------------------------- finite pulses

def _spin_ops():
    sp = np.array([[0, 1], [0, 0]], dtype=complex)  # |+><-|, index 0 is s = +1
    i2 = np.eye(2)
    return np.kron(sp, i2), np.kron(i2, sp)


def _motional_exp(coef_c: float, coef_r: float, cfg: FockConfig) -> np.ndarray:
    """exp(i (coef_c x_c + coef_r x_r)) on the working motional space."""
    def one(c, dim):
        return kick_matrix(-c, dim)  # kick_matrix(p) = exp(-i p x)
    return np.kron(one(coef_c, cfg.dim_c), one(coef_r, cfg.dim_r))


def _free_diag(m: ModeParams, cfg: FockConfig) -> np.ndarray:
    """Diagonal of H0 = nu_c a^dag a + nu_r b^dag b on the full space (rad per period)."""
    nc, nr = number(cfg.dim_c), number(cfg.dim_r)
    mot = TWO_PI * (m.nu_c * nc[:, None] + m.nu_r * nr[None, :]).ravel()
    return np.tile(mot, 4)


class _PulseHamiltonian:
    """Eigendecomposition of H0 + H1 for one laser direction and tilt."""

    def __init__(self, m: ModeParams, cfg: FockConfig, k: float, omega: float):
        sp1, sp2 = _spin_ops()
        d1 = _motional_exp(k * m.eta_c, 0.5 * k * m.eta_r, cfg)
        d2 = _motional_exp(k * m.eta_c, -0.5 * k * m.eta_r, cfg)
        h1 = np.kron(sp1, d1) + np.kron(sp2, d2)
        h = 0.5 * omega * (h1 + h1.conj().T)
        h[np.diag_indices_from(h)] += _free_diag(m, cfg)
        self.vals, self.vecs = np.linalg.eigh(h)

    def propagator(self, duration: float) -> np.ndarray:
        return (self.vecs * np.exp(-1j * self.vals * duration)) @ self.vecs.conj().T


def pulse_schedule(seq: PulseSequence, tau_pulse: float) -> list[tuple[float, list[tuple[float, float]]]]:
    """Pulse groups as (nominal start, [(direction, tilt), ...]).

    A kick of per-repetition weight w becomes N ceil|w| back-to-back pairs
    of strength |w|/ceil|w| each, the group centred on t_k; the first pulse
    of each pair travels along sign(w), the second against it.
    """
    groups = []
    for ev in seq.events:
        t, w = ev.t, ev.w
        n = pulse_pair_count(w)
        gamma = abs(w) / n
        n *= seq.repetitions
        sign = 1.0 if w > 0 else -1.0
        groups.append((t - n * tau_pulse, [(sign if j % 2 == 0 else -sign, gamma) for j in range(2 * n)]))
    return groups


def simulate_finite_pulses(seq: PulseSequence, p: TrapParams, tau_pulse: float, cfg: FockConfig,
                           jitter: Sequence[float] | None = None, strict: bool = True) -> GateUnitary:
    """Full H0 + H1 dynamics with square pi-pulses of duration ``tau_pulse``.

    tau_pulse is in trap periods; the Rabi frequency is set so that a pulse of
    nominal length is a pi rotation.  ``jitter`` multiplies individual pulse
    durations (one factor per pulse, in schedule order).  Pulses within a
    group follow each other without gaps; groups must not overlap.
    """
    if tau_pulse <= 0:
        raise ValueError("pulse duration must be positive")
    m = derive_modes(p)
    omega = math.pi / tau_pulse
    groups = pulse_schedule(seq, tau_pulse)
    n_pulses = sum(len(g) for _, g in groups)
    mult = np.ones(n_pulses) if jitter is None else np.asarray(jitter, dtype=float)
    if mult.shape != (n_pulses,):
        raise ValueError(f"expected {n_pulses} jitter factors, got {mult.shape}")

    ham: dict[float, _PulseHamiltonian] = {}
    h0 = _free_diag(m, cfg)
    u = np.eye(h0.size, dtype=complex)
    t0 = groups[0][0] if groups else 0.0
    now = t0
    k = 0
    for start, pulses in groups:
        if start < now - 1e-12:
            raise ValueError("pulse groups overlap; shorten the pulses")
        u = np.exp(-1j * h0 * (start - now))[:, None] * u
        now = start
        for direction, gamma in pulses:
            key = direction * gamma
            if key not in ham:
                ham[key] = _PulseHamiltonian(m, cfg, key, omega)
            dur = tau_pulse * mult[k]
            u = ham[key].propagator(dur) @ u
            now += dur
            k += 1
    leak = 0.0
    if strict and h0.size > 4:
        mot = cfg.dim_c * cfg.dim_r
        keep = _retained_indices(cfg)
        for i in range(4):
            for j in range(4):
                blk = u[i * mot:(i + 1) * mot, j * mot:(j + 1) * mot]
                leak = max(leak, _edge_leak_2d(blk[:, keep], cfg))
        if leak > cfg.leak_tol:
            raise TruncationError(f"finite-pulse evolution leaks {leak:.2e} to the truncation edge")
    return GateUnitary(cfg, now - t0, m, dense=u,
                       meta={"source": "finite_pulses", "tau_pulse": tau_pulse, "edge_leak": leak,
                             "n_pulses": n_pulses})


def _retained_indices(cfg: FockConfig) -> np.ndarray:
    kc, kr = np.arange(cfg.n_max_c), np.arange(cfg.n_max_r)
    return (kc[:, None] * cfg.dim_r + kr[None, :]).ravel()


def _edge_leak_2d(cols: np.ndarray, cfg: FockConfig, edge: int = 4) -> float:
    nc, nr = np.meshgrid(np.arange(cfg.dim_c), np.arange(cfg.dim_r), indexing="ij")
    mask = np.zeros((cfg.dim_c, cfg.dim_r), dtype=bool)
    if cfg.dim_c > cfg.n_max_c:
        mask |= nc >= cfg.dim_c - edge
    if cfg.dim_r > cfg.n_max_r:
        mask |= nr >= cfg.dim_r - edge
    mask = mask.ravel()
    if not mask.any():
        return 0.0
    return float((np.abs(cols[mask]) ** 2).sum(axis=0).max())


# ----------------------------------------------------------------- anharmonic

def cubic_coefficient(p: TrapParams) -> float:
    """kappa in H3 = kappa (b + b^dag)^3, in radians per trap period.

    Expanding the Coulomb energy e^2/(4 pi eps0 (d + q)) to third order in
    the separation change q, with d^3 = e^2/(2 pi eps0 M nu^2), gives
    -(M nu^2 / 2) q^3 / d.  The stretch zero-point length is
    q0 = sqrt(hbar / (M sqrt(3) nu)) = 3^(-1/4) a0 with a0 = sqrt(hbar / M nu),
    hence H3 / (hbar nu) = -(1/2) 3^(-3/4) (a0/d) (b + b^dag)^3.
    """
    return -math.pi * 3.0 ** -0.75 * p.a0_over_d


def _gauss_magnus_step(hfun, t: float, h: float) -> np.ndarray:
    c = math.sqrt(3.0) / 6.0
    a1 = -1j * hfun(t + (0.5 - c) * h)
    a2 = -1j * hfun(t + (0.5 + c) * h)
    omega = 0.5 * h * (a1 + a2) + (math.sqrt(3.0) / 12.0) * h * h * (a2 @ a1 - a1 @ a2)
    return expm(omega)


def simulate_anharmonic(seq: PulseSequence, p: TrapParams, cfg: FockConfig,
                        steps_per_period: int = 400, strict: bool = True) -> GateUnitary:
    """Instantaneous kicks with a cubic stretch-mode potential.

    For each internal state the stretch mode is written as D(beta(t)) chi,
    beta(t) the harmonic kicked trajectory.  The kicks then cancel out
    exactly and chi evolves under nu_r b^dag b + kappa[(X + x)^3 - x^3] with
    X = b + b^dag and x = 2 Re beta; this is integrated with a fourth-order
    Magnus scheme in the interaction picture of nu_r b^dag b.  The state-
    independent part -kappa x^3 is integrated as a phase.  The
    centre-of-mass mode is harmonic and treated as in simulate_instantaneous.
    """
    m = derive_modes(p)
    kappa = cubic_coefficient(p)
    harmonic = simulate_instantaneous(seq, p, FockConfig(cfg.n_max_c, 1, cfg.pad_c, 0), strict=strict)
    dim = cfg.dim_r
    if dim == 1:
        raise ValueError("the anharmonic simulation needs an active stretch mode")
    omega = TWO_PI * m.nu_r
    b = annihilation(dim)
    x_op = b + b.T
    x2 = x_op @ x_op
    x3 = x2 @ x_op
    nn = number(dim)
    dphase = nn[:, None] - nn[None, :]
    t_first = seq.times[0] if seq.events else 0.0
    T = seq.duration

    blocks = []
    cache = {}
    leak = 0.0
    for i, (s1, s2) in enumerate(SPIN_STATES):
        kicks = mode_kicks(seq, m, "r", s1, s2)
        key = tuple(kicks)
        if key not in cache:
            betas = []  # beta just after each kick
            beta = 0j
            for phi, pk in kicks:
                beta = beta * np.exp(-1j * phi) - 1j * pk
                betas.append(beta)
            times = seq.times

            def x_of(t, times=times, betas=betas):
                k = np.searchsorted(times, t, side="right") - 1
                return 2.0 * (betas[k] * np.exp(-1j * omega * (t - times[k]))).real

            def h_int(t, x_of=x_of):
                x = x_of(t)
                rot = np.exp(1j * omega * (t - t_first) * dphase)
                return kappa * rot * (x3 + 3 * x * x2 + 3 * x * x * x_op)

            w = np.eye(dim, dtype=complex)
            cphase = 0.0
            for k in range(len(times) - 1):
                span = times[k + 1] - times[k]
                n = max(1, int(math.ceil(span * steps_per_period)))
                h = span / n
                for j in range(n):
                    w = _gauss_magnus_step(h_int, times[k] + j * h, h) @ w
                cphase -= kappa * _cube_integral(betas[k], omega, span)
            alpha_t, xi = propagate_coherent(kicks)
            u = np.exp(1j * (xi + cphase)) * (displacement(alpha_t, dim) @ (rotation_phases(omega * T, dim)[:, None] * w))
            if strict:
                leak = max(leak, _check_leak(u, cfg.n_max_r, cfg, "anharmonic stretch"))
            cache[key] = u
        uc, _ = harmonic.blocks[i]
        blocks.append((uc, cache[key]))
    return GateUnitary(cfg, T, m, blocks=blocks,
                       meta={"source": "anharmonic", "kappa": kappa, "edge_leak": leak,
                             "steps_per_period": steps_per_period})


def _cube_integral(beta: complex, omega: float, span: float) -> float:
    """int_0^span (2 Re[beta e^{-i omega t}])^3 dt."""
    # x = beta e^{-iwt} + c.c.; x^3 = b^3 e^{-3iwt} + 3|b|^2 b e^{-iwt} + c.c.
    def f(k: int, c: complex) -> complex:
        return c * (1 - np.exp(-1j * k * omega * span)) / (1j * k * omega)
    total = f(3, beta ** 3) + f(1, 3 * abs(beta) ** 2 * beta)
    return float(2.0 * total.real)


# ----------------------------------------------------------------- gate error

def _embed(rho: np.ndarray, dim: int) -> np.ndarray:
    if rho.shape[0] == dim:
        return rho
    if rho.shape[0] > dim:
        raise ValueError(f"density matrix of size {rho.shape[0]} exceeds the working dimension {dim}")
    out = np.zeros((dim, dim), dtype=rho.dtype)
    out[:rho.shape[0], :rho.shape[0]] = rho
    return out


def gate_error(U_real: GateUnitary, theta_target: float, rho_mot, T: float | None = None) -> float:
    """E = 1 - Tr_mot{Q rho Q^dag}, Q = Tr_int{U(theta) U_real^dag} / 4.

    ``rho_mot`` is either a dense motional density matrix (COM x stretch
    ordering) or a pair (rho_c, rho_r) describing a product state; smaller
    matrices are zero-padded to the working space.  The ideal reference runs
    for U_real.T unless T is given.  The raw value is returned.
    """
    T = U_real.T if T is None else T
    dc, dr = U_real.dims
    rc, rr = free_rotation(U_real.modes, T, U_real.cfg)
    phases = np.array([np.exp(1j * theta_target * s1 * s2) for s1, s2 in SPIN_STATES])

    if isinstance(rho_mot, tuple):
        rho_c, rho_r = (_embed(np.asarray(r), d) for r, d in zip(rho_mot, (dc, dr)))
        if U_real.blocks is not None:
            # per-mode factors A_s = R_c U_c,s^dag, B_s = R_r U_r,s^dag
            a = [rc[:, None] * uc.conj().T for uc, _ in U_real.blocks]
            bb = [rr[:, None] * ur.conj().T for _, ur in U_real.blocks]
            ar = [x @ rho_c for x in a]
            br = [x @ rho_r for x in bb]
            total = 0j
            for i in range(4):
                for j in range(4):
                    tc = np.vdot(a[j], ar[i])  # Tr(A_i rho A_j^dag)
                    tr = np.vdot(bb[j], br[i])
                    total += phases[i] * np.conj(phases[j]) * tc * tr
            return float(1.0 - total.real / 16.0)
        rho = np.kron(rho_c, rho_r)
    else:
        rho = _embed(np.asarray(rho_mot), dc * dr)
    if rho.shape != (dc * dr, dc * dr):
        raise ValueError(f"density matrix shape {rho.shape} does not match motional dimension {dc * dr}")
    mot_rot = np.kron(rc, rr)
    q = np.zeros((dc * dr, dc * dr), dtype=complex)
    for i in range(4):
        # diagonal internal block of U_ideal U_real^dag
        q += phases[i] * mot_rot[:, None] * _dagger_block(U_real, i)
    q /= 4.0
    return float(1.0 - np.real(np.trace(q @ rho @ q.conj().T)))


def _dagger_block(U: GateUnitary, i: int) -> np.ndarray:
    """Internal block (i, i) of U^dag; the only one the diagonal ideal gate sees."""
    return U.spin_block(i).conj().T


def vacuum(U: GateUnitary):
    """Product vacuum on the working space of U."""
    dc, dr = U.dims
    rc = np.zeros((dc, dc))
    rc[0, 0] = 1
    rr = np.zeros((dr, dr))
    rr[0, 0] = 1
    return rc, rr


def thermal_average_error(builder: Callable[[FockConfig], GateUnitary], p: TrapParams, nbar: float,
                          theta_target: float, n_terms: int | None = None, tail: float = 1e-8,
                          modes: str = "cr", cfg: FockConfig | None = None) -> float:
    """Gate error averaged over thermal Fock populations of the active modes.

    ``builder`` maps a FockConfig with n_max = n_terms on the active modes to
    a GateUnitary.  Raises ValueError if the thermal tail beyond n_terms
    exceeds ``tail``.
    """
    if n_terms is None:
        n_terms = thermal_terms_for(nbar, tail)
    if thermal_tail(nbar, n_terms) > tail:
        raise ValueError(f"thermal tail {thermal_tail(nbar, n_terms):.2e} beyond {n_terms} terms exceeds {tail:g}")
    if cfg is None:
        cfg = FockConfig(n_terms if "c" in modes else 1, n_terms if "r" in modes else 1)
    U = builder(cfg)
    dc, dr = U.dims
    rho_c = thermal_state(nbar, U.cfg.n_max_c, dc) if dc > 1 else np.ones((1, 1))
    rho_r = thermal_state(nbar, U.cfg.n_max_r, dr) if dr > 1 else np.ones((1, 1))
    return gate_error(U, theta_target, (rho_c, rho_r))


def converged_error(builder: Callable[[FockConfig], GateUnitary], cfg: FockConfig,
                    error_fn: Callable[[GateUnitary], float], tol: float = 1e-8) -> float:
    """Evaluate error_fn on builder(cfg) and on an enlarged working space.

    Raises TruncationError if raising the working dimension by the
    convergence margin changes the error by more than tol.
    """
    e1 = error_fn(builder(cfg))
    e2 = error_fn(builder(cfg.enlarged()))
    if abs(e1 - e2) > tol:
        raise TruncationError(f"gate error changed by {abs(e1 - e2):.2e} when enlarging the Fock space")
    return e2
