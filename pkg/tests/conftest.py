"""Shared fixtures: the reference working point used across the suite."""

import math

import pytest

from phaseshape import LineParams, PulseSpec, QubitParams, coupling_k

TWO_PI = 2.0 * math.pi

# extracted sample parameters (cyclic MHz): f10 = 4766, radiative 2.271,
# decoherence 1.174, lumped dephasing 1.174 - 2.271/2 = 0.0385
F10_MHZ = 4766.0
RADIATIVE_MHZ = 2.271
DECOHERENCE_MHZ = 1.174
DEPHASING_MHZ = DECOHERENCE_MHZ - RADIATIVE_MHZ / 2.0
WORKING_RABI_MHZ = 0.154


@pytest.fixture(scope="session")
def params():
    return QubitParams(
        omega10=TWO_PI * F10_MHZ * 1e6,
        big_gamma=TWO_PI * RADIATIVE_MHZ * 1e6,
        gamma_phi_l=TWO_PI * DEPHASING_MHZ * 1e6,
    )


@pytest.fixture(scope="session")
def line():
    return LineParams()


@pytest.fixture(scope="session")
def k_const(params, line):
    return coupling_k(params, line)


@pytest.fixture(scope="session")
def omega_peak():
    """Working-point peak Rabi rate (rad/s)."""
    return TWO_PI * WORKING_RABI_MHZ * 1e6


@pytest.fixture(scope="session")
def v_working(params, line, k_const, omega_peak):
    """Peak voltage giving the working-point Rabi rate."""
    return omega_peak * math.sqrt(2.0 * line.z0) / k_const


@pytest.fixture(scope="session")
def tau_t2(params):
    """Matched rise time: the decoherence time 1/gamma."""
    return 1.0 / params.gamma


def make_spec(v_peak, tau, **kw):
    defaults = dict(v_peak=v_peak, tau=tau, mode="square")
    defaults.update(kw)
    return PulseSpec(**defaults)


@pytest.fixture(scope="session")
def spec_plain(v_working, tau_t2):
    """Unmodulated working-point pulse (n = 0)."""
    return make_spec(v_working, tau_t2, n=0)


@pytest.fixture(scope="session")
def spec_n50_pi(v_working, tau_t2):
    """Fully suppressed configuration: 50 intervals at phase pi."""
    return make_spec(v_working, tau_t2, n=50, theta=math.pi)
