"""Error-scaling experiments: pulse-duration and jitter sweeps, thermal and
misalignment studies, and log-log power-law fits.

Random draws follow a counter-based contract: the multipliers of sample i
come from Philox seeded with (seed, i), and pulse k takes the k-th uniform
of that stream, so the order in which samples run never matters.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .analytic import residual_report, thermal_misalignment_error
from .design import protocol1_sequence, solve_protocol1, solve_protocol2
from .fock import (
    active_phase, config_for, gate_error, pulse_schedule, simulate_finite_pulses, simulate_instantaneous,
    thermal_average_error, vacuum,
)
from .fockspace import FockConfig, TruncationError
from .model import KickEvent, PulseSequence, TrapParams, derive_modes

VARIABLES = ("pulse_duration", "jitter_amplitude", "nbar", "timing_offset", "gamma_offset")
SWEEP_HEADER = ["x", "E_mean", "E_stddev", "samples"]
DEFAULT_SAMPLES = 200
THERMAL_TAIL = 1e-9


def worker_count() -> int:
    """Thread cap from KICKGATE_THREADS (default: CPU count, at most 8)."""
    env = os.environ.get("KICKGATE_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("KICKGATE_THREADS must be a positive integer")
        return n
    return min(8, os.cpu_count() or 1)


@dataclass(frozen=True)
class Scenario:
    """What is being perturbed.

    protocol is "1" or "2" (T is needed for "2").  repetitions overrides the
    designed N; the finite-pulse study uses the eight-pulse sequence N = 1.
    modes picks the simulated vibrational modes ("c", "r" or "cr"); the other
    mode is frozen.  tau_pulse is the nominal pulse length of jitter sweeps,
    nbar and timing_offset the fixed values used when not swept, and
    offset_index the kick that timing offsets move.
    """

    protocol: str = "1"
    eta: float = 0.178
    T: float | None = None
    repetitions: int | None = None
    modes: str = "c"
    tau_pulse: float = 1e-4
    nbar: float = 0.0
    timing_offset: float = 0.0
    gamma_offset: float = 0.0
    offset_index: int = 0
    a0_over_d: float = 1e-3

    def __post_init__(self):
        if self.protocol not in ("1", "2"):
            raise ValueError(f"protocol must be '1' or '2', got {self.protocol!r}")
        if self.protocol == "2" and (self.T is None or self.T <= 0):
            raise ValueError("protocol 2 needs a positive gate time T")
        if self.modes not in ("c", "r", "cr"):
            raise ValueError("modes must be 'c', 'r' or 'cr'")
        if self.repetitions is not None and self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    @property
    def trap(self) -> TrapParams:
        return TrapParams(eta=self.eta, nbar=self.nbar, a0_over_d=self.a0_over_d)


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    samples: int = 1
    seed: int = 0
    scenario: Scenario = field(default_factory=Scenario)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.variable not in VARIABLES:
            raise ValueError(f"unknown sweep variable {self.variable!r}; expected one of {VARIABLES}")
        if not self.values:
            raise ValueError("sweep values must be non-empty")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["values"] = list(self.values)
        return d


@dataclass(frozen=True)
class FitResult:
    exponent: float
    prefactor: float
    r_squared: float
    window: tuple[float, float]
    n_points: int = 0

    def to_dict(self) -> dict:
        return {"exponent": self.exponent, "prefactor": self.prefactor, "r_squared": self.r_squared,
                "window": list(self.window), "n_points": self.n_points}


# ------------------------------------------------------------------ sequences

def base_design(sc: Scenario):
    """(exact sequence, gamma, tau list) for the scenario."""
    p = sc.trap
    if sc.protocol == "1":
        r = solve_protocol1(p)
        n = r.N if sc.repetitions is None else sc.repetitions
        return protocol1_sequence(r.gamma, *r.tau, N=n), r.gamma, r.tau
    r = solve_protocol2(sc.T, p)
    seq = r.seq if sc.repetitions is None else PulseSequence(r.seq.events, sc.repetitions)
    return seq, 1.0, r.tau


def perturbed(seq: PulseSequence, gamma: float, timing_offset: float = 0.0, gamma_offset: float = 0.0,
              index: int = 0) -> PulseSequence:
    """Move kick ``index`` by timing_offset and change the tilted weights by gamma_offset."""
    if gamma_offset:
        events = [KickEvent(e.t, math.copysign(abs(e.w) + gamma_offset, e.w)
                            if abs(abs(e.w) - gamma) < 1e-12 and gamma != 1.0 else e.w)
                  for e in seq.events]
        seq = PulseSequence(tuple(events), seq.repetitions)
    if timing_offset:
        seq = seq.shifted(index, timing_offset)
    return seq


def _one_mode_cfg(seq: PulseSequence, p: TrapParams, modes: str, n_max: int = 1) -> FockConfig:
    cfg = config_for(seq, p, n_max if "c" in modes else 1, n_max if "r" in modes else 1)
    return FockConfig(cfg.n_max_c, cfg.n_max_r, cfg.pad_c if "c" in modes else 0,
                      cfg.pad_r if "r" in modes else 0)


# ------------------------------------------------------------------ sweeps

def jitter_multipliers(seed: int, sample: int, n_pulses: int, eps: float) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, sample])))
    return 1.0 + eps * rng.uniform(-0.5, 0.5, n_pulses)


def thermal_error(seq: PulseSequence, p: TrapParams, nbar: float, modes: str, theta: float) -> float:
    """Thermal gate error of instantaneous kicks, Fock populations summed to 1e-9."""
    def build(cfg):
        c = config_for(seq, p, cfg.n_max_c, cfg.n_max_r)
        c = FockConfig(c.n_max_c, c.n_max_r, c.pad_c if "c" in modes else 0, c.pad_r if "r" in modes else 0)
        return simulate_instantaneous(seq, p, c)
    return thermal_average_error(build, p, nbar, theta, tail=THERMAL_TAIL, modes=modes)


def _sample_errors(spec: SweepSpec, x: float, ctx) -> list[float]:
    sc = spec.scenario
    seq0, gamma, p = ctx["seq"], ctx["gamma"], ctx["p"]
    var = spec.variable
    if var in ("pulse_duration", "jitter_amplitude"):
        tau = x if var == "pulse_duration" else sc.tau_pulse
        eps = x if var == "jitter_amplitude" else 0.0
        cfg, theta = ctx["cfg"], ctx["theta"]
        n_pulses = sum(len(g) for _, g in pulse_schedule(seq0, tau))
        out = []
        for i in range(spec.samples):
            mult = jitter_multipliers(spec.seed, i, n_pulses, eps) if eps else None
            U = simulate_finite_pulses(seq0, p, tau, cfg, jitter=mult)
            out.append(gate_error(U, theta, vacuum(U), T=seq0.duration))
        return out
    nbar = x if var == "nbar" else sc.nbar
    dt = x if var == "timing_offset" else sc.timing_offset
    dg = x if var == "gamma_offset" else sc.gamma_offset
    seq = perturbed(seq0, gamma, dt, dg, sc.offset_index)
    theta = active_phase(seq, p, FockConfig(2 if "c" in sc.modes else 1, 2 if "r" in sc.modes else 1))
    return [thermal_error(seq, p, nbar, sc.modes, theta)] * spec.samples


def _context(spec: SweepSpec) -> dict:
    sc = spec.scenario
    p = sc.trap
    seq, gamma, tau = base_design(sc)
    cfg = _one_mode_cfg(seq, p, sc.modes)
    return {"seq": seq, "gamma": gamma, "tau": tau, "p": p, "cfg": cfg,
            "theta": active_phase(seq, p, cfg)}


def _aggregate(errs: list[float]) -> tuple[float, float]:
    n = len(errs)
    mean = math.fsum(errs) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((e - mean) ** 2 for e in errs) / (n - 1)
    return mean, math.sqrt(var)


def run_sweep(spec: SweepSpec, workers: int | None = None) -> list[dict]:
    """One row per sweep value: x, E_mean, E_stddev, samples plus ok/message.

    Failed points (pulse overlap, truncation) keep NaN errors and ok False.
    """
    ctx = _context(spec)
    workers = worker_count() if workers is None else workers

    def point(x):
        try:
            errs = _sample_errors(spec, x, ctx)
        except (ValueError, TruncationError) as exc:
            return {"x": x, "E_mean": math.nan, "E_stddev": math.nan, "samples": 0, "ok": False,
                    "message": str(exc)}
        mean, std = _aggregate(errs)
        return {"x": x, "E_mean": mean, "E_stddev": std, "samples": len(errs), "ok": True, "message": ""}

    if workers == 1 or len(spec.values) == 1:
        return [point(x) for x in spec.values]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(point, spec.values))


def misalignment_sweep(spec: SweepSpec, workers: int | None = None) -> tuple[list[dict], dict]:
    """Closed-form, oracle and simulated errors of a perturbed exact design.

    The simulated gate is compared against its own realised entangling
    phase, so that only the open loops contribute; this is the quantity the
    closed form describes.  Returns (rows, report).
    """
    if spec.variable not in ("timing_offset", "gamma_offset", "nbar"):
        raise ValueError("misalignment sweeps vary timing_offset, gamma_offset or nbar")
    ctx = _context(spec)
    sc = spec.scenario
    p, seq0, gamma = ctx["p"], ctx["seq"], ctx["gamma"]
    m = derive_modes(p)
    workers = worker_count() if workers is None else workers

    def point(x):
        nbar = x if spec.variable == "nbar" else sc.nbar
        dt = x if spec.variable == "timing_offset" else sc.timing_offset
        dg = x if spec.variable == "gamma_offset" else sc.gamma_offset
        seq = perturbed(seq0, gamma, dt, dg, sc.offset_index)
        rep = residual_report(seq, p)
        # the oracle covers both modes; freeze nothing in the simulator
        e_paper, e_oracle = thermal_misalignment_error(rep, m, nbar)
        e_sim = thermal_error(seq, p, nbar, "cr", rep.theta)
        return {"x": x, "C_c": abs(rep.C_c), "C_r": abs(rep.C_r), "E_paper": e_paper,
                "E_oracle": e_oracle, "E_sim": e_sim, "discrepancy": abs(e_sim - e_oracle)}

    if workers == 1:
        rows = [point(x) for x in spec.values]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(point, spec.values))
    report = {"max_discrepancy": max(r["discrepancy"] for r in rows), "spec": spec.to_dict()}
    return rows, report


# --------------------------------------------------------------------- fitting

def default_window(xs) -> tuple[float, float]:
    """Range of x with the largest 20% of the values left out (at least 4 kept)."""
    xs = np.sort(np.asarray(xs, dtype=float))
    keep = max(4, int(math.floor(0.8 * len(xs))))
    keep = min(keep, len(xs))
    return float(xs[0]), float(xs[keep - 1])


def fit_power_law(xs, ys, window: tuple[float, float] | None = None) -> FitResult:
    """Least-squares line through (log x, log y) for x inside ``window``."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    good = np.isfinite(x) & np.isfinite(y)
    x, y = x[good], y[good]
    if window is None:
        window = default_window(x)
    sel = (x >= window[0]) & (x <= window[1])
    x, y = x[sel], y[sel]
    if len(x) < 4:
        raise ValueError(f"need at least 4 points in the fit window, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fits need positive data")
    lx, ly = np.log(x), np.log(y)
    slope, icept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, min(1.0, 1.0 - float(np.sum(resid ** 2)) / ss_tot))
    return FitResult(float(slope), float(math.exp(icept)), r2, (float(window[0]), float(window[1])), len(x))


# ------------------------------------------------------------------ output

def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(SWEEP_HEADER)
        for r in rows:
            wr.writerow([repr(float(r["x"])), repr(float(r["E_mean"])), repr(float(r["E_stddev"])),
                         int(r["samples"])])


def write_fit_json(fit: FitResult, path, **extra) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump({**fit.to_dict(), **extra}, fh, indent=2)
        fh.write("\n")
