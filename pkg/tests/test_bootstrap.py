import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from lcdecay.bootstrap import (BootstrapParams, HypothesisViolation, bootstrap_cascade,
                               envelope_closed_form, envelope_constant, help_constant,
                               kernel_bound_scan, kernel_neighborhood_scan, kernel_small_r,
                               kernel_value, lemma_var_check, lemma_var_closed_form,
                               lemma_var_solution, low_freq_envelope_check, low_freq_heat_mass,
                               low_freq_heat_mass_quadrature, oracle_suite, shell_schedule,
                               subsolution_gap, tail_integral, tail_integral_split_bound)


def test_params_validation():
    with pytest.raises(HypothesisViolation):
        BootstrapParams(0.5, 0.5)
    with pytest.raises(HypothesisViolation):
        BootstrapParams(0.7, 0.3)
    with pytest.raises(HypothesisViolation):
        BootstrapParams(1.0, 1.5)
    with pytest.raises(HypothesisViolation):
        BootstrapParams(0.0, 1.5)
    with pytest.raises(HypothesisViolation):
        BootstrapParams(0.5, 1.5, c=-1.0)
    with pytest.raises(HypothesisViolation):
        BootstrapParams(0.5, 1.5, T=0.0)


@pytest.mark.parametrize("g", [0.3, 0.5, 0.7])
def test_lemma_var_unforced_closed_form(g):
    p = BootstrapParams(g, 1.5, c=0.0, T=100.0)
    s = lemma_var_solution(p)
    np.testing.assert_allclose(s.E, lemma_var_closed_form(p, s.t), rtol=1e-9, atol=1e-300)


def test_lemma_var_closed_form_values():
    p = BootstrapParams(0.5, 1.5, c=0.0, e0=2.0)
    assert lemma_var_closed_form(p, 0.0) == 2.0
    # (1+3)^(1/2) - 1 = 1, divided by 1/2
    assert lemma_var_closed_form(p, 3.0) == pytest.approx(2.0 * math.exp(-2.0), rel=1e-15)


def test_lemma_var_bounded_weighted_sup():
    p = BootstrapParams(0.5, 1.5, T=1e4)
    s = lemma_var_solution(p)
    assert np.isfinite(s.sup) and s.sup > 0.0
    assert abs(s.tail_drift()) <= 0.01
    # forced equation: E (1+t)^(mu-gamma) tends to c
    assert s.weighted[-1] == pytest.approx(1.0, rel=0.02)


def test_lemma_var_sup_sublinear_in_e0():
    a = lemma_var_check(BootstrapParams(0.5, 1.5))
    b = lemma_var_check(BootstrapParams(0.5, 1.5, e0=2.0))
    assert a < b < 2.0 * a


@settings(max_examples=10)
@given(st.floats(0.2, 0.8), st.floats(0.1, 1.5))
def test_subsolution_dominated(g, dmu):
    p = BootstrapParams(g, g + dmu, T=1e3)
    assert subsolution_gap(p) >= 0.0


def test_kernel_alpha_zero_closed_form():
    # for alpha = 0 the kernel is 1 - exp(-r^2 t)
    for r, t in [(0.1, 0.0), (0.7, 2.0), (1.0, 50.0), (0.01, 1e3)]:
        assert kernel_value(0.0, r, t) == pytest.approx(-math.expm1(-r * r * t), rel=1e-10,
                                                        abs=1e-300)
    rep = kernel_bound_scan(0.0, np.logspace(-3, 0, 7), np.logspace(-2, 3, 9))
    # bound holds up to the quadrature tolerance
    assert rep.c_alpha <= 1.0 + 1e-11


def test_kernel_alpha_one_exponential_integral():
    # int_0^s e^z / (r^2 + z) dz = e^(-r^2) (Ei(r^2 + s) - Ei(r^2))
    for r, t in [(0.3, 1.0), (0.8, 5.0), (1.0, 20.0)]:
        a, s = r * r, r * r * t
        want = a * math.exp(-s - a) * (special.expi(a + s) - special.expi(a))
        assert kernel_value(1.0, r, t) == pytest.approx(want, rel=1e-9)


def test_kernel_small_r_limit():
    for alpha in (0.3, 0.5, 1.5):
        for t in (0.5, 5.0):
            r = 1e-4
            assert kernel_value(alpha, r, t) == pytest.approx(kernel_small_r(alpha, r, t),
                                                              rel=1e-5)


def test_kernel_scan_refinement_and_excluded_case():
    coarse = kernel_bound_scan(0.5, np.logspace(-3, 0, 7), np.logspace(-2, 3, 12))
    fine = kernel_bound_scan(0.5, np.logspace(-3, 0, 13), np.logspace(-2, 3, 22))
    assert fine.c_alpha == pytest.approx(coarse.c_alpha, rel=0.02)
    assert not coarse.excluded_case
    one = kernel_bound_scan(1.0, [0.5], [1.0])
    assert one.excluded_case
    assert "excluded_case=True" in one.to_text()
    with pytest.raises(ValueError):
        kernel_bound_scan(-0.1, [0.5], [1.0])


def test_kernel_neighborhood_keys():
    out = kernel_neighborhood_scan([0.5, 1.0], [1.0, 10.0], alphas=(0.9, 1.1))
    assert set(out) == {0.9, 1.1} and all(v > 0.0 for v in out.values())


def test_low_freq_mass_examples():
    assert low_freq_heat_mass(0.0, 3.0) == 0.0
    assert low_freq_heat_mass(1.0, 0.0) == pytest.approx(4.0 * math.pi / 3.0, rel=1e-15)
    for R, t in [(1.0, 0.0), (1.0, 1e-4), (0.5, 1.0), (1.0, 30.0), (0.2, 1e3)]:
        assert low_freq_heat_mass(R, t) == pytest.approx(low_freq_heat_mass_quadrature(R, t),
                                                         rel=1e-10)
    with pytest.raises(ValueError):
        low_freq_heat_mass(1.5, 1.0)
    with pytest.raises(ValueError):
        low_freq_heat_mass(1.0, -1.0)


def test_envelope_constant():
    assert envelope_constant() == pytest.approx(1.9687012432153, rel=1e-12)
    assert envelope_constant() == pytest.approx(envelope_closed_form(), rel=1e-12)


def test_envelope_check():
    env = low_freq_envelope_check(1.0)
    assert env.ok and env.monotone_after_1
    assert np.max(env.products) <= env.bound
    # large-t limit: the full-space Gaussian mass (pi / 2)^(3/2)
    lim = 4.0 * math.pi * math.sqrt(math.pi) / (4.0 * 2.0**1.5)
    assert env.products[-1] == pytest.approx(lim, rel=2e-3)


def test_shell_schedule():
    assert shell_schedule(0.0, 0.3) == 1.0
    np.testing.assert_array_equal(shell_schedule(np.array([0.0, 5.0]), 0.0), [1.0, 1.0])
    assert shell_schedule(13.0, 3.0 / 14.0) == pytest.approx(14.0 ** (-3.0 / 14.0), rel=1e-15)
    with pytest.raises(ValueError):
        shell_schedule(1.0, 0.6)
    with pytest.raises(ValueError):
        shell_schedule(1.0, -0.1)


def test_cascade_exponents():
    eps = 0.1
    rep = bootstrap_cascade(epsilon=eps)
    np.testing.assert_allclose(rep.exponents, [0.5 - eps / 3.0, 15.0 / 14.0, 1.5], rtol=1e-14)
    for p in rep.passes:
        assert np.isfinite(p.weighted_sup)
        assert abs(p.tail_drift) <= 0.01
    assert rep.table().count("\n") == 4
    with pytest.raises(ValueError):
        bootstrap_cascade(epsilon=2.0)


def test_tail_integral_oracle():
    assert tail_integral(1.0) == 0.0
    for t in (2.0, 10.0, 100.0):
        s = np.linspace(1.0, t, 400001)
        f = np.exp(s - t) * s**-1.5
        want = np.sum((f[1:] + f[:-1]) / 2.0 * np.diff(s))
        assert tail_integral(t) == pytest.approx(want, rel=1e-8)


def test_tail_integral_split_bound_holds():
    for t in np.logspace(np.log10(2.0), 3, 30):
        assert tail_integral(t) <= tail_integral_split_bound(t)


def test_help_constant():
    grid = np.logspace(np.log10(4.0), 3, 60)
    c = help_constant(grid)
    assert 0.0 < c < 1.0
    assert all(tail_integral(t) <= c * (t / 2.0) ** -1.5 * (1 + 1e-15) for t in grid)


def test_oracle_suite_keys():
    out = oracle_suite(T=1e3)
    assert out["cascade_exponent[2]"] == pytest.approx(15.0 / 14.0)
    assert out["low_freq_envelope_ok"] is True
    assert all(abs(out[k]) <= 0.01 for k in out if k.startswith("lemma_var_drift"))
