import math

import numpy as np
import pytest

from phaseshape import (
    NumericsError,
    duty_area_balance,
    envelope,
    optimize_duty,
    scatter_run,
    sweep_fm,
    sweep_n,
    sweep_theta,
    trace_grid,
)

from conftest import make_spec

TWO_PI = 2.0 * math.pi


# --- duty-cycle area balance --------------------------------------------------

def test_duty_balance_reference_value(v_working, tau_t2):
    # 50 ns period against the matched rise time: balance at 54.5 %
    spec = make_spec(v_working, tau_t2, n=50, theta=math.pi)
    bal = duty_area_balance(spec)
    assert bal.d_star == pytest.approx(0.5458, abs=2e-4)
    # the returned signed-area curve crosses zero exactly once, at d_star
    total = bal.area_total
    sign_change = np.nonzero(np.diff(np.sign(total)))[0]
    assert len(sign_change) == 1
    i = sign_change[0]
    d_cross = bal.duties[i] - total[i] * (bal.duties[i + 1] - bal.duties[i]) \
        / (total[i + 1] - total[i])
    assert d_cross == pytest.approx(bal.d_star, abs=1e-3)


def test_duty_balance_short_period_limit(v_working, tau_t2):
    # d* = 1/2 + (dt/tau)/8 + O((dt/tau)^2) -> 1/2 for short periods
    spec = make_spec(v_working, tau_t2, n=50000, theta=math.pi)
    assert duty_area_balance(spec).d_star == pytest.approx(0.5, abs=1e-4)


def test_duty_balance_agrees_with_quadrature(v_working, tau_t2, line):
    # per-slot trapezoid quadrature of the drive area, split exactly at
    # the switch instants, cancels at d_star to the quadrature tolerance
    spec = make_spec(v_working, tau_t2, n=50, theta=math.pi)
    d_star = duty_area_balance(spec).d_star
    spec_star = make_spec(v_working, tau_t2, n=50, theta=math.pi, duty=d_star)
    bounds = spec_star.switch_times()
    starts, switches = bounds[0::2], bounds[1::2]
    period = spec_star.delta_t
    area_theta = area_zero = 0.0
    for s, w in zip(starts, switches):
        ts = np.linspace(s, w, 2001)
        area_theta += np.trapezoid(np.exp((ts - spec_star.t0) / tau_t2), ts)
        tz = np.linspace(w, s + period, 2001)
        area_zero += np.trapezoid(np.exp((tz - spec_star.t0) / tau_t2), tz)
    assert abs(area_zero - area_theta) / (area_zero + area_theta) < 1e-9


# --- interval sweep -------------------------------------------------------------

def test_sweep_n_endpoints_and_monotonicity(params, v_working, tau_t2):
    result = sweep_n(np.array([0, 3, 7, 15, 30, 50]), math.pi, params,
                     make_spec(v_working, tau_t2))
    assert result.eta[0] == pytest.approx(0.9334, abs=5e-3)
    assert result.eta[-1] == pytest.approx(0.0311, abs=5e-4)
    assert np.all(np.diff(result.eta) < 0.0)


def test_sweep_n_zero_theta_is_flat(params, v_working, tau_t2):
    result = sweep_n(np.array([0, 10, 25, 50]), 0.0, params,
                     make_spec(v_working, tau_t2))
    assert np.max(result.eta) - np.min(result.eta) < 1e-6 * np.max(result.eta)


def test_sweep_n_rejects_negative(params, v_working, tau_t2):
    with pytest.raises(NumericsError):
        sweep_n(np.array([-1, 3]), math.pi, params, make_spec(v_working, tau_t2))


# --- phase sweep -----------------------------------------------------------------

def test_sweep_theta_key_points_and_mirror(params, v_working, tau_t2):
    thetas = np.array([0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi, TWO_PI])
    result = sweep_theta(thetas, 50, params, make_spec(v_working, tau_t2))
    assert result.eta[0] == pytest.approx(0.9334, abs=5e-3)
    assert result.eta[1] == pytest.approx(0.483, abs=5e-3)
    assert result.eta[2] == pytest.approx(0.0311, abs=1e-3)
    # mirror symmetry theta <-> 2*pi - theta
    assert abs(result.eta[3] - result.eta[1]) < 1e-4
    assert abs(result.eta[4] - result.eta[0]) < 1e-4


def test_sweep_theta_minimum_at_pi(params, v_working, tau_t2):
    thetas = np.linspace(0.0, TWO_PI, 9)
    result = sweep_theta(thetas, 50, params, make_spec(v_working, tau_t2))
    assert np.argmin(result.eta) == 4  # pi


# --- duty optimization -------------------------------------------------------------

@pytest.fixture(scope="module")
def duty_result(params, v_working, tau_t2):
    return optimize_duty(params, make_spec(v_working, tau_t2, n=50))


def test_optimize_duty_location_and_depth(duty_result):
    assert duty_result.d_opt == pytest.approx(0.591, abs=5e-3)
    assert duty_result.eta_min < 5e-3


def test_optimize_duty_exceeds_area_balance(duty_result, v_working, tau_t2):
    bal = duty_area_balance(make_spec(v_working, tau_t2, n=50, theta=math.pi))
    assert duty_result.d_opt > bal.d_star


def test_optimize_duty_scan_consistent_with_sweep(params, duty_result, v_working, tau_t2):
    # the d = 0.5 scan point reproduces the plain interval-sweep value
    i_half = int(np.argmin(np.abs(duty_result.duties - 0.5)))
    direct = scatter_run(params, make_spec(v_working, tau_t2, n=50, theta=math.pi))
    assert duty_result.eta[i_half] == pytest.approx(direct.eta, rel=1e-3)


def test_optimize_duty_boundary_detection(params, v_working, tau_t2):
    with pytest.raises(NumericsError, match="boundary"):
        optimize_duty(params, make_spec(v_working, tau_t2, n=50),
                      d_range=(0.40, 0.50), coarse_step=0.01)


# --- sawtooth sweep -----------------------------------------------------------------

def test_sweep_fm_suppression(params, v_working, tau_t2):
    freqs = np.array([0.0, 2e6, 5e6, 10e6, 20e6])
    result = sweep_fm(freqs, params, make_spec(v_working, tau_t2))
    assert result.eta[0] == pytest.approx(0.9334, abs=5e-3)
    assert np.all(np.diff(result.eta) < 0.0)
    assert result.eta[-1] < 0.10


# --- reproducibility and parallelism -------------------------------------------------

def test_sweep_bitwise_reproducible_across_workers(params, v_working, tau_t2):
    thetas = np.linspace(0.0, TWO_PI, 5)
    seq = sweep_theta(thetas, 10, params, make_spec(v_working, tau_t2), workers=1)
    par = sweep_theta(thetas, 10, params, make_spec(v_working, tau_t2), workers=2)
    assert np.array_equal(seq.eta, par.eta)
    assert np.array_equal(seq.e_res, par.e_res)
    assert seq.e_offres == par.e_offres


def test_sweep_shared_reference_energy(params, v_working, tau_t2):
    result = sweep_n(np.array([0, 50]), math.pi, params,
                     make_spec(v_working, tau_t2))
    assert result.e_offres > 0.0
    assert result.eta[0] == result.e_res[0] / result.e_offres


# --- trace grids ----------------------------------------------------------------------

def test_trace_grid_shapes_and_reference(params, v_working, tau_t2):
    specs = [make_spec(v_working, tau_t2, n=n, theta=math.pi) for n in (0, 25, 50)]
    tg = trace_grid(params, specs, dt_out=5e-9)
    n_t = len(tg.times)
    assert tg.v_res.shape == (3, n_t)
    assert tg.p_e.shape == (3, n_t)
    # the far-detuned row is exactly the input envelope
    for i, spec in enumerate(specs):
        assert np.array_equal(tg.v_offres[i], np.asarray(envelope(tg.times, spec)))
    assert np.all(tg.p_e >= 0.0) and np.all(tg.p_e <= 1.0)


def test_trace_grid_population_suppression(params, v_working, tau_t2):
    # fully suppressed drive keeps the emitter almost unexcited, with the
    # population oscillating at the switching period
    specs = [make_spec(v_working, tau_t2, n=50, theta=math.pi)]
    tg = trace_grid(params, specs, dt_out=1e-9)
    assert np.max(tg.p_e[0]) < 0.01


def test_trace_grid_quarter_phase_symmetry(params, v_working, tau_t2):
    # theta = pi/2: the population curve is nearly symmetric about turn-off
    specs = [make_spec(v_working, tau_t2, n=50, theta=0.5 * math.pi)]
    tg = trace_grid(params, specs, dt_out=1e-9)
    pe = tg.p_e[0]
    t = tg.times
    i_peak = int(np.argmax(pe))
    assert abs(t[i_peak]) < 100e-9
    for x in (50e-9, 100e-9):
        left = pe[np.searchsorted(t, -x)]
        right = pe[np.searchsorted(t, x)]
        assert 0.5 < left / right < 2.0
