import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kickgate.analytic import (
    anharmonicity_error_estimate, gate_phase, ideal_gate_unitary, mode_kicks, mode_phases, propagate_coherent,
    residual_report, residuals, thermal_misalignment_error, trajectory, write_report_json, write_trajectory_csv,
)
from kickgate.fockspace import SPIN_STATES, FockConfig
from kickgate.model import PulseSequence, TrapParams, antisymmetrize, derive_modes, KickEvent

from oracles import brute_force_mode, coherent, series_phase_two_kicks

P = TrapParams()
M = derive_modes(P)

kick_lists = st.lists(
    st.tuples(st.floats(0.0, 1.5), st.floats(-0.6, 0.6)), min_size=1, max_size=6)
alphas = st.tuples(st.floats(-1.4, 1.4), st.floats(-1.4, 1.4)).map(lambda z: complex(*z))


@settings(max_examples=40, deadline=None)
@given(kick_lists, alphas)
def test_propagate_coherent_matches_brute_force(kicks, alpha0):
    alpha_t, xi = propagate_coherent(kicks, alpha0)
    amp = abs(alpha0) + sum(abs(p) for _, p in kicks)
    dim = int((amp + 8) ** 2) + 20
    psi = brute_force_mode(kicks, alpha0, dim)
    overlap = np.vdot(np.exp(1j * xi) * coherent(alpha_t, dim), psi)
    assert abs(overlap - 1) < 1e-8


def test_no_kicks_is_free_rotation():
    a, xi = propagate_coherent([], 1.0 + 0.5j, total_phase=0.3)
    assert a == pytest.approx((1.0 + 0.5j) * np.exp(-0.3j))
    assert xi == 0.0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(-0.5, 0.5), st.sampled_from([-3, -2, -1, 1, 2, 3])), min_size=1, max_size=6))
def test_phase_is_sigma_sigma_part_of_xi(pairs):
    seq = PulseSequence.from_pairs(pairs)
    xi = {}
    for s in SPIN_STATES:
        xi[s] = sum(propagate_coherent(mode_kicks(seq, M, mode, *s))[1] for mode in "cr")
    theta = (xi[1, 1] + xi[-1, -1] - xi[1, -1] - xi[-1, 1]) / 4
    zlin = (xi[1, 1] - xi[-1, -1]) / 2  # no single-qubit z phase
    assert gate_phase(seq, P) == pytest.approx(theta, abs=1e-12)
    assert abs(zlin) < 1e-12
    assert abs(xi[1, -1] - xi[-1, 1]) < 1e-12


def test_trivial_phases():
    assert gate_phase(PulseSequence.from_pairs([(0.1, 2.0)]), P) == 0.0
    assert gate_phase(PulseSequence.from_pairs([(0.1, 2.0), (0.1, 1.0)]), P) == 0.0


@pytest.mark.parametrize("s", [0.002, 0.01, 0.03])
def test_two_kick_phase_series(s):
    seq = PulseSequence.from_pairs([(-s / 2, 1.0), (s / 2, -1.0)])
    exact = gate_phase(seq, P)
    series = series_phase_two_kicks(P.eta, s)
    x = 2 * math.pi * s
    # the next omitted term is O(x^7)
    assert abs(exact - series) < 4 * P.eta ** 2 * x ** 7 / 100
    assert exact < 0


def test_mode_phase_signs():
    seq = PulseSequence.from_pairs([(-0.05, 1.0), (0.05, -1.0)])
    th_c, th_r = mode_phases(seq, P)
    # COM: -4 eta^2 w1 w2 sin(-x) < 0; stretch: 4 eta^2 w1 w2 sin(-sqrt3 x)/sqrt3 > 0
    assert th_c < 0 < th_r
    assert th_c + th_r == pytest.approx(gate_phase(seq, P))


def test_residuals_closed_form():
    seq = PulseSequence.from_pairs([(0.0, 1.0), (0.5, 1.0)])
    c_c, c_r = residuals(seq, M)
    assert abs(c_c) < 1e-15  # 1 + e^{-i pi}
    assert c_r == pytest.approx(1 + np.exp(-1j * math.pi * math.sqrt(3)))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(-0.9, -0.01), st.floats(0.1, 3.0)), min_size=1, max_size=3, unique_by=lambda x: x[0]))
def test_antisymmetric_residuals_are_imaginary(half):
    seq = antisymmetrize([KickEvent(t, w) for t, w in half])
    c_c, c_r = residuals(seq, M)
    assert abs(c_c.real) < 1e-12 and abs(c_r.real) < 1e-12


def test_ideal_gate_unitary():
    u = ideal_gate_unitary(0.0, 0.0, M, FockConfig(3, 2)).matrix
    assert np.allclose(u, np.eye(24))
    u = ideal_gate_unitary(math.pi / 4, 0.0, M, FockConfig(1, 1)).matrix
    expect = [np.exp(1j * math.pi / 4 * a * b) for a, b in SPIN_STATES]
    assert np.allclose(np.diag(u), expect)
    g = ideal_gate_unitary(math.pi / 4, 1.0, M, FockConfig(4, 4))
    uc, ur = g.blocks[0]
    assert np.allclose(np.diag(uc) / np.diag(uc)[0], 1)       # e^{-i 2 pi n} on COM
    assert not np.allclose(np.diag(ur) / np.diag(ur)[0], 1)   # irrational on stretch


def test_trajectory_selection_rules_and_extrema():
    seq = PulseSequence.from_pairs([(-0.3, 1.0), (-0.1, -1.0), (0.2, 1.0)])
    com, rel, x_r, p_r = trajectory(seq, M, 1, 1)
    assert x_r == 0 and p_r == 0
    assert all(pt.x == pt.p == 0 for pt in rel)
    com, rel, x_r, p_r = trajectory(seq, M, 1, -1, samples_per_period=4096)
    sampled_x = max(abs(pt.x) for pt in rel)
    # exact extrema bound the dense samples from above and agree closely
    assert sampled_x <= x_r + 1e-12
    assert x_r - sampled_x < 1e-4
    empty = trajectory(PulseSequence(), M, 1, -1)
    assert empty[2] == 0 and empty[3] == 0
    with pytest.raises(ValueError):
        trajectory(seq, M, 1, -1, samples_per_period=4)


def test_trajectory_jump_size():
    seq = PulseSequence.from_pairs([(0.0, 1.0), (0.25, -1.0)])
    _, rel, _, _ = trajectory(seq, M, 1, -1)
    # momentum jump at the first kick: p = sqrt2 * Im(-i * 2 eta_r)
    assert rel[1].p == pytest.approx(-math.sqrt(2) * 2 * M.eta_r)


def test_outputs(tmp_path):
    seq = PulseSequence.from_pairs([(0.0, 1.0), (0.25, -1.0)])
    com, _, _, _ = trajectory(seq, M, 1, 1)
    write_trajectory_csv(com, tmp_path / "t.csv")
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["t", "x", "p"] and len(rows) == len(com) + 1
    write_report_json(residual_report(seq, P), tmp_path / "r.json", seed=3)
    d = json.loads((tmp_path / "r.json").read_text())
    assert set(d) == {"C_c", "C_r", "theta", "T", "seed"}


class _Res:
    def __init__(self, c_c, c_r):
        self.C_c, self.C_r = c_c, c_r


def test_thermal_misalignment_closed_loops():
    e_paper, e_oracle = thermal_misalignment_error(_Res(0, 0), M, 3.0)
    assert e_oracle == 0.0
    assert e_paper == -0.375


def test_thermal_misalignment_small_residual_is_quadratic():
    c = 1e-3
    _, e = thermal_misalignment_error(_Res(c, 0), M, 0.0)
    u = 2 * M.eta_c * c
    # E ~ (nbar + 1/2) u^2 sum_{s,s'} (sigma_s - sigma_s')^2 / 16 and that sum is 64
    assert e == pytest.approx(0.5 * u ** 2 * 64 / 16, rel=1e-5)


def test_thermal_misalignment_monotone_in_nbar():
    es = [thermal_misalignment_error(_Res(0.02, 0.01j), M, nb)[1] for nb in np.linspace(0, 10, 41)]
    assert np.all(np.diff(es) >= 0)
    with pytest.raises(ValueError):
        thermal_misalignment_error(_Res(0, 0), M, -1)


def test_anharmonicity_estimate():
    p = TrapParams(a0_over_d=2e-3)
    e1 = anharmonicity_error_estimate(p, 0.1)
    assert e1 == pytest.approx((0.4 * 2e-3) ** 2 / (2 * math.pi * 2 * math.pi * 0.1))
    assert anharmonicity_error_estimate(p, 0.2) == pytest.approx(e1 / 2)
    with pytest.raises(ValueError):
        anharmonicity_error_estimate(p, 0.0)
    # E = 1e-4 at nu T = 1e-3 (nu T in radians) inverts to a0/d ~ 2e-3
    a = math.sqrt(1e-4 * 2 * math.pi * 1e-3) / 0.4
    assert anharmonicity_error_estimate(TrapParams(a0_over_d=a), 1e-3 / (2 * math.pi)) == pytest.approx(1e-4)
    assert a == pytest.approx(1.98e-3, rel=1e-2)
