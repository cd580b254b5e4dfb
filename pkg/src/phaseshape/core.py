"""Shared physical types and derived constants.

Unit convention: every rate and frequency held by these types is an
angular quantity in rad/s.  Cyclic frequencies (Hz, MHz) are converted by
2*pi at the configuration boundary, never inside the physics code.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.constants import hbar as HBAR

# Bloch-vector length may exceed 1 by at most this much before the
# integrator output is considered invalid (two orders above double
# round-off accumulated over <= 1e6 RK4 steps).
BLOCH_TOL = 1e-9


class PhaseshapeError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(PhaseshapeError):
    """Invalid configuration or parameter value."""


class NumericsError(PhaseshapeError):
    """Numerical failure (unstable integration, invalid state, ...)."""


class FitError(PhaseshapeError):
    """Calibration fit failure (degenerate or insufficient data)."""


@dataclass(frozen=True)
class QubitParams:
    """Two-level emitter parameters, all angular rates in rad/s.

    Attributes:
        omega10: transition frequency.
        big_gamma: radiative relaxation rate into the line.
        gamma_phi_l: lumped pure-dephasing plus non-radiative rate.  The
            two channels are not separable by reflection measurements, so
            only their combination is a parameter.
    """

    omega10: float
    big_gamma: float
    gamma_phi_l: float

    def __post_init__(self):
        if self.big_gamma <= 0.0:
            raise ConfigError("big_gamma must be strictly positive")
        # gamma_phi_l = 0 is the ideal lossless-emitter limit and is needed
        # for energy-conservation checks; negative rates are unphysical.
        if self.gamma_phi_l < 0.0:
            raise ConfigError("gamma_phi_l must be non-negative")
        if self.omega10 <= 0.0:
            raise ConfigError("omega10 must be strictly positive")
        if self.omega10 <= 1e3 * self.big_gamma:
            # physical inputs satisfy omega10 >> Gamma; tolerate other
            # ratios for exploratory use but flag them
            warnings.warn(
                "omega10/big_gamma <= 10^3: outside the weak-coupling "
                "regime this model assumes",
                stacklevel=2,
            )

    @property
    def gamma(self) -> float:
        """Total decoherence rate, big_gamma/2 + gamma_phi_l (rad/s)."""
        return 0.5 * self.big_gamma + self.gamma_phi_l


@dataclass(frozen=True)
class LineParams:
    """Transmission-line constants."""

    z0: float = 50.0
    hbar: float = HBAR

    def __post_init__(self):
        if self.z0 <= 0.0:
            raise ConfigError("z0 must be strictly positive")


@dataclass(frozen=True)
class BlochState:
    """Expectation values of the two-level emitter.

    ``sm`` is the complex lowering-operator expectation; the raising
    operator is implicitly its conjugate.  ``sz`` is real.
    """

    sm: complex
    sz: float

    def __post_init__(self):
        if not np.isfinite(self.sz) or not np.isfinite(self.sm):
            raise NumericsError("non-finite Bloch state")
        norm = 4.0 * abs(self.sm) ** 2 + self.sz**2
        if norm > 1.0 + BLOCH_TOL:
            raise NumericsError(f"Bloch vector length {norm} exceeds 1 + tol")
        if self.sz < -1.0 - BLOCH_TOL or self.sz > 1.0 + BLOCH_TOL:
            raise NumericsError(f"sz = {self.sz} outside [-1, 1] + tol")


GROUND = BlochState(sm=0.0 + 0.0j, sz=-1.0)


def coupling_k(params: QubitParams, line: LineParams = LineParams()) -> float:
    """Proportionality constant between Rabi rate and sqrt of input power.

    k = sqrt(8*pi*big_gamma / (hbar*omega10)), in rad s^-1 W^-1/2.  The
    resonance frequency of the reflective coupling is taken equal to the
    transition frequency.
    """
    return float(np.sqrt(8.0 * np.pi * params.big_gamma / (line.hbar * params.omega10)))


def excited_population(state: BlochState) -> float:
    """Occupation probability of the excited state, clamped to [0, 1]."""
    return float(min(1.0, max(0.0, 0.5 * (1.0 + state.sz))))
