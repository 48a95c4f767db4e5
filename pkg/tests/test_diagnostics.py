import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lcdecay.cli_io.config import random_smooth_q, solenoidal_blob, taylor_green
from lcdecay.diagnostics import (CSV_FIELDS, EnergyReport, GSpec, InsufficientSamples,
                                 contamination_time, energy_balance_residual, energy_report,
                                 fit_exponential_decay, fit_power_decay, fit_report_series,
                                 gn_constant, interpolation_check, max_principle_monitor,
                                 read_csv, renormalized_balance, renormalized_terms, write_csv)
from lcdecay.dynamics import ModelParams, State, Stepper, linear_state
from lcdecay.potentials import PolynomialPotential, verify_hypotheses
from lcdecay.spectral import PeriodicGrid, QField, VecField

POT = PolynomialPotential(1.0, 0.5, 1.0)


def run(state, params, dt, steps, every=1):
    st_ = Stepper(state.grid, params, dt)
    out = [state]
    for k in range(1, steps + 1):
        state = st_.step(state, k * dt)
        if k % every == 0:
            out.append(state)
    return out


def test_zero_state_report():
    g = PeriodicGrid(8)
    r = energy_report(linear_state(g), ModelParams(potential=POT))
    for name in CSV_FIELDS:
        if name not in ("t", "shell_R", "contaminated"):
            assert getattr(r, name) == 0.0, name


def test_single_mode_kinetic_energy():
    g = PeriodicGrid(16, 3.0)
    X, _, _ = g.coordinates()
    u = np.stack([np.zeros(g.shape), np.sin(2 * np.pi * X / g.L), np.zeros(g.shape)])
    r = energy_report(linear_state(g, u), ModelParams(potential=POT))
    assert r.e_kin == pytest.approx(g.L**3 / 4, rel=1e-13)
    # physical-space quadrature agrees with the spectral value
    assert r.e_kin == pytest.approx(0.5 * g.integrate(np.sum(u * u, axis=0)), rel=1e-12)


def test_constant_q_bulk_energy():
    g = PeriodicGrid(8, 2.0)
    q0 = np.array([0.2, -0.1, 0.3, 0.0, 0.05])
    q = np.broadcast_to(q0[:, None, None, None], (5,) + g.shape).copy()
    r = energy_report(linear_state(g, q=q), ModelParams(potential=PolynomialPotential(1, 0, 0)))
    assert r.e_bulk == pytest.approx(g.L**3 * np.sum(q0**2) / 2, rel=1e-13)
    assert r.e_dir == pytest.approx(0.0, abs=1e-25)


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1))
def test_report_invariants(seed):
    g = PeriodicGrid(8, 2.5)
    rng = np.random.default_rng(seed)
    s = linear_state(g, 0.3 * rng.standard_normal((3,) + g.shape),
                     0.3 * rng.standard_normal((5,) + g.shape))
    r = energy_report(s, ModelParams(potential=POT), R_schedule=lambda t: 3.0)
    assert r.e_total == pytest.approx(r.e_kin + r.e_dir + r.e_bulk, rel=1e-13)
    assert r.d_u >= 0 and r.d_q >= 0
    assert r.e_low + r.e_high == pytest.approx(2 * r.e_kin, rel=1e-12)
    assert r.shell_R == 3.0
    assert r.nrm_u_l2 == pytest.approx(np.sqrt(g.integrate(np.sum(s.u.data**2, axis=0))),
                                       rel=1e-12)


def test_contamination_flag():
    g = PeriodicGrid(8, 2.0)
    assert contamination_time(2.0) == pytest.approx(0.4)
    s = linear_state(g)
    s.t = 0.5
    assert energy_report(s, ModelParams()).contaminated
    s.t = 0.3
    assert not energy_report(s, ModelParams()).contaminated


def test_csv_round_trip(tmp_path):
    g = PeriodicGrid(8)
    s = linear_state(g, q=0.1 * np.random.default_rng(0).standard_normal((5,) + g.shape))
    reps = [energy_report(st_, ModelParams(potential=POT))
            for st_ in run(s, ModelParams(potential=POT), 0.01, 3)]
    path = tmp_path / "d.csv"
    write_csv(reps, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_FIELDS)
    assert len(lines) == 5
    back = read_csv(path)
    assert back == reps
    buf = io.StringIO()
    write_csv(reps, buf)
    assert read_csv(buf.getvalue()) == reps
    with pytest.raises(ValueError):
        read_csv("a,b\n1,2\n")


# -- balances ---------------------------------------------------------------

def test_energy_balance_zero_state():
    g = PeriodicGrid(8)
    p = ModelParams(potential=POT)
    reps = [energy_report(s, p) for s in run(linear_state(g), p, 0.1, 3)]
    assert energy_balance_residual(reps) == 0.0
    with pytest.raises(ValueError):
        energy_balance_residual(reps, 2, 1)


def test_energy_balance_linear_heat_second_order():
    g = PeriodicGrid(8)
    X, Y, Z = g.coordinates()
    u = np.stack([np.sin(Y) + np.cos(2 * Z), np.sin(Z), np.zeros(g.shape)])
    p = ModelParams(potential=PolynomialPotential(1, 0, 0), linearized=True)
    res = []
    for dt in (0.02, 0.01):
        reps = [energy_report(s, p) for s in run(linear_state(g, u), p, dt, int(round(1 / dt)))]
        res.append(energy_balance_residual(reps))
    e0 = energy_report(linear_state(g, u), p).e_total
    assert abs(res[0]) <= 2 * 0.02**2 * e0
    assert abs(res[0]) / abs(res[1]) == pytest.approx(4.0, rel=0.05)
    # exact decay makes the trapezoid rule overestimate the dissipation
    assert res[1] >= 0.0


def test_energy_balance_sign_after_refinement():
    g = PeriodicGrid(16)
    q = random_smooth_q(g, 0.3, 1.0, np.random.default_rng(1))
    s0 = linear_state(g, taylor_green(g, 0.3), q)
    p = ModelParams(potential=POT)
    e0 = energy_report(s0, p).e_total
    res = []
    for dt in (4e-3, 2e-3, 1e-3):
        reps = [energy_report(s, p) for s in run(s0, p, dt, int(round(0.2 / dt)))]
        res.append(energy_balance_residual(reps) / e0)
    assert abs(res[2]) < abs(res[1]) < abs(res[0])
    # Richardson extrapolation of the second-order residual to dt -> 0
    assert (4 * res[2] - res[1]) / 3 <= 1e-9


def test_renormalized_balance_power_two_second_order():
    g = PeriodicGrid(16)
    q0 = random_smooth_q(g, 0.3, 1.0, np.random.default_rng(0))
    p = ModelParams(potential=POT, feedback=False)
    G = GSpec.power(2.0)
    worst = []
    for dt in (1e-3, 5e-4):
        states = run(linear_state(g, taylor_green(g, 0.3), q0), p, dt, int(round(0.05 / dt)))
        worst.append(np.max(np.abs(renormalized_balance(states, p, G))))
    assert worst[0] / worst[1] == pytest.approx(4.0, rel=0.1)


def test_renormalized_balance_independent_of_u():
    g = PeriodicGrid(16)
    # small data and step: the centred difference of J has a roundoff floor ~ eps J / dt
    q0 = random_smooth_q(g, 0.1, 1.0, np.random.default_rng(0))
    p = ModelParams(potential=POT, feedback=False)
    G = GSpec.power(2.0)
    res = [renormalized_balance(run(linear_state(g, taylor_green(g, amp), q0), p, 2e-5, 150),
                                p, G)
           for amp in (0.0, 0.3)]
    assert np.max(np.abs(res[0] - res[1])) <= 1e-10


def test_clipped_quartic_vanishes_below_threshold():
    pot = POT
    r1 = verify_hypotheses(pot).r1
    g = PeriodicGrid(8)
    q = random_smooth_q(g, 0.49 * r1, 1.0, np.random.default_rng(2))
    J, D = renormalized_terms(QField(g, q), pot, GSpec.clipped_quartic(r1))
    assert J == 0.0 and D == 0.0


def test_gspec_validation():
    with pytest.raises(ValueError):
        GSpec.power(1.0)
    with pytest.raises(ValueError):
        GSpec.power(-1.0)
    G = GSpec.sqrt(0.5)
    z = np.array([0.0, 0.25])
    assert G.g(z)[1] == pytest.approx(0.5, rel=1e-7)
    assert np.all(np.isfinite(G.g2(z)))


def test_max_principle_monitor():
    g = PeriodicGrid(8)
    q = random_smooth_q(g, 0.4, 1.0, np.random.default_rng(3))
    p = ModelParams(potential=PolynomialPotential(1, 0, 0), linearized=True)
    states = run(linear_state(g, q=q), p, 0.05, 10)
    assert max_principle_monitor(states, 0.4) <= 1e-15
    assert max_principle_monitor(states[:1], 0.3) == pytest.approx(0.1, abs=1e-12)
    reps = [energy_report(s, p) for s in states]
    assert max_principle_monitor(reps, 0.4) == max_principle_monitor(states, 0.4)


# -- fits -------------------------------------------------------------------

def test_power_fit_exact():
    t = np.linspace(0, 50, 60)
    f = fit_power_decay(t, 3.0 * (1 + t) ** -1.5)
    assert f.exponent == pytest.approx(-1.5, abs=1e-9)
    assert f.amplitude == pytest.approx(3.0, rel=1e-9)
    assert f.goodness == pytest.approx(1.0, abs=1e-12)


def test_exponential_fit_exact():
    t = np.linspace(0, 5, 40)
    f = fit_exponential_decay(t, 0.7 * np.exp(-2 * t))
    assert f.rate == pytest.approx(2.0, abs=1e-9)


def test_fit_window_and_contamination():
    t = np.linspace(0, 30, 31)
    y = (1 + t) ** -0.75
    y[t > 20] = 1.0
    cont = t > 20
    f = fit_power_decay(t, y, contaminated=cont)
    assert f.exponent == pytest.approx(-0.75, abs=1e-9) and f.t_hi == 20.0
    f = fit_power_decay(t, y, window=(2, 20))
    assert f.samples == 19
    with pytest.raises(InsufficientSamples):
        fit_power_decay(t, y, window=(2, 5))


def _heat_reports(L, width, T, dt):
    g = PeriodicGrid(32, L)
    s = linear_state(g, solenoidal_blob(g, 1.0, width))
    p = ModelParams(potential=PolynomialPotential(1, 0, 0), linearized=True)
    return [energy_report(x, p) for x in run(s, p, dt, int(round(T / dt)))]


def test_heat_run_power_law():
    L = 50.0
    # the box acts as whole space while the heat kernel spans many box modes
    t_hi = L * L / (16 * np.pi**2)
    reps = _heat_reports(L, np.sqrt(2.0), t_hi, 0.1)
    f = fit_report_series(reps, "nrm_u_l2", window=(2.0, t_hi), transform=lambda v: v**2)
    assert -1.65 <= f.exponent <= -1.35


@pytest.mark.xfail(strict=True, reason="late window is dominated by the lowest box modes; "
                   "see the decisions ledger")
def test_heat_run_power_law_to_contamination_time():
    L = 50.0
    reps = _heat_reports(L, np.sqrt(2.0), L * L / 10, 0.5)
    f = fit_report_series(reps, "nrm_u_l2", window=(2.0, L * L / 10), transform=lambda v: v**2)
    assert -1.65 <= f.exponent <= -1.35


# -- interpolation ----------------------------------------------------------

def test_interpolation_check():
    g = PeriodicGrid(8, 2.0)
    q0 = np.array([0.1, 0.2, -0.3, 0.0, 0.1])
    lhs, rhs = interpolation_check(QField(g, np.broadcast_to(q0[:, None, None, None],
                                                             (5,) + g.shape)))
    assert lhs == pytest.approx(rhs, rel=1e-12)
    assert interpolation_check(QField(g)) == (0.0, 0.0)
    rng = np.random.default_rng(4)
    for _ in range(5):
        lhs, rhs = interpolation_check(QField(g, rng.standard_normal((5,) + g.shape)))
        assert lhs <= rhs * (1 + 1e-10)


def test_gn_constant_positive_and_finite():
    g = PeriodicGrid(16)
    rng = np.random.default_rng(5)
    fields = [VecField(g, g.inverse(g.dealias_hat(g.forward(rng.standard_normal((3,) + g.shape)))))
              for _ in range(3)]
    c = gn_constant(fields)
    assert np.isfinite(c) and c > 0


def test_energy_report_fields_match_csv():
    assert tuple(f for f in EnergyReport.__dataclass_fields__) == CSV_FIELDS


def test_report_row_is_text():
    g = PeriodicGrid(8)
    r = energy_report(State(0.0, VecField(g), QField(g)), ModelParams())
    assert all(isinstance(x, str) for x in r.row())
