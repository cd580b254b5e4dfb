"""Drive waveforms: exponentially rising envelope with phase shaping.

The complex input envelope is

    V_in(t) = V_peak * H(t0 - t) * exp((t - t0)/tau) * exp(i*Pi(t))

with H the Heaviside step using H(0) = 0, so the pulse is off exactly at
the turn-off time t0.  Pi(t) is the phase profile: a square train that
alternates between theta and 0 inside [t_m, t0), a linear (sawtooth) ramp
2*pi*f_m*(t - t_m) on the same window, or identically zero.

Phase-switch instants are the only discontinuities of the waveform apart
from t0; ``build_grid`` places every one of them on the sample grid so
downstream integration never steps across a jump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError, LineParams

_MODES = ("none", "square", "sawtooth")


@dataclass(frozen=True)
class PulseSpec:
    """Full description of a phase-shaped exponentially rising drive.

    Attributes:
        v_peak: peak envelope voltage at the chip (V).
        tau: rise time constant (s).
        t0: turn-off time (s); the envelope maximum.
        t_m: phase-modulation start time (s).
        t_i: trace start time (s); defaults to
            t0 - max(10*tau, (t0 - t_m) + 5*tau), which keeps the
            truncated pulse energy within ~1e-8 of the untruncated value.
        n: number of modulation intervals (square mode).
        theta: modulated phase (rad), in [0, 2*pi].
        duty: fraction of each interval spent at theta, in (0, 1).
        mode: 'none', 'square' or 'sawtooth'.
        f_m: sawtooth modulation frequency (Hz), sawtooth mode only.
    """

    v_peak: float
    tau: float
    t0: float = 0.0
    t_m: float = -2.5e-6
    t_i: float | None = None
    n: int = 0
    theta: float = 0.0
    duty: float = 0.5
    mode: str = "square"
    f_m: float = 0.0

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ConfigError("tau must be strictly positive")
        if self.v_peak < 0.0:
            raise ConfigError("v_peak must be non-negative")
        if self.mode not in _MODES:
            raise ConfigError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if not 0.0 <= self.theta <= 2.0 * math.pi:
            raise ConfigError("theta must lie in [0, 2*pi]")
        if not 0.0 < self.duty < 1.0:
            raise ConfigError("duty must lie strictly between 0 and 1")
        if self.n < 0 or int(self.n) != self.n:
            raise ConfigError("n must be a non-negative integer")
        if self.f_m < 0.0:
            raise ConfigError("f_m must be non-negative")
        if not self.t_m < self.t0:
            raise ConfigError("t_m must precede t0")
        if self.t_i is None:
            default_ti = self.t0 - max(10.0 * self.tau, (self.t0 - self.t_m) + 5.0 * self.tau)
            object.__setattr__(self, "t_i", default_ti)
        if not self.t_i < self.t_m:
            raise ConfigError("t_i must precede t_m")

    @property
    def delta_t(self) -> float:
        """Switching period (t0 - t_m)/n; requires n >= 1."""
        if self.n < 1:
            raise ConfigError("delta_t undefined for n = 0")
        return (self.t0 - self.t_m) / self.n

    def switch_times(self) -> np.ndarray:
        """Sorted instants where the square phase train jumps.

        Interval j (j = 1..n, counted back from t0) starts at t0 - j*dt
        and holds theta for the first fraction ``duty`` of the period.
        Returns the interleaved [start, switch] boundaries; empty for
        n = 0 or non-square modes.  All other code derives switch
        positions from this single array so grid construction and phase
        lookup agree bit-for-bit.
        """
        if self.mode != "square" or self.n == 0:
            return np.empty(0)
        dt = self.delta_t
        j = np.arange(self.n, 0, -1, dtype=float)
        starts = self.t0 - j * dt
        switches = starts + self.duty * dt
        return np.stack([starts, switches], axis=1).ravel()


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing sample times containing every waveform jump."""

    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or len(s) < 2:
            raise ConfigError("grid needs at least two samples")
        if not np.all(np.diff(s) > 0.0):
            raise ConfigError("grid samples must be strictly increasing")
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return len(self.samples)

    def index_of(self, t: float) -> int:
        """Index of an exact grid sample; raises if t is not on the grid."""
        i = int(np.searchsorted(self.samples, t))
        if i < len(self.samples) and self.samples[i] == t:
            return i
        raise ConfigError(f"t = {t} is not a grid sample")


def phase_profile(t, spec: PulseSpec):
    """Phase Pi(t) in rad, unwrapped; scalar or ndarray input.

    Square mode returns theta inside the leading ``duty`` fraction of each
    interval and 0 elsewhere; sawtooth returns 2*pi*f_m*(t - t_m) on
    [t_m, t0).  Outside the modulation window the phase is 0.  Use
    ``wrap_phase`` when reporting.
    """
    t_arr = np.asarray(t, dtype=float)
    out = np.zeros_like(t_arr)
    if spec.mode == "square" and spec.n >= 1:
        bounds = spec.switch_times()
        inside = (t_arr >= bounds[0]) & (t_arr < spec.t0)
        # slot index: even slots start a period and carry theta
        slot = np.searchsorted(bounds, t_arr, side="right") - 1
        theta_slot = inside & (slot % 2 == 0)
        out = np.where(theta_slot, spec.theta, 0.0)
    elif spec.mode == "sawtooth":
        inside = (t_arr >= spec.t_m) & (t_arr < spec.t0)
        out = np.where(inside, 2.0 * np.pi * spec.f_m * (t_arr - spec.t_m), 0.0)
    if np.isscalar(t):
        return float(out)
    return out


def wrap_phase(phi):
    """Wrap a phase (rad) to [-pi, pi); +pi maps to -pi."""
    return np.mod(np.asarray(phi) + np.pi, 2.0 * np.pi) - np.pi


def envelope(t, spec: PulseSpec):
    """Complex input voltage V_in(t); exactly 0 for t >= t0."""
    t_arr = np.asarray(t, dtype=float)
    on = t_arr < spec.t0
    mag = np.where(on, spec.v_peak * np.exp(np.minimum(t_arr - spec.t0, 0.0) / spec.tau), 0.0)
    out = mag * np.exp(1j * phase_profile(t_arr, spec))
    out = np.where(on, out, 0.0 + 0.0j)
    if np.isscalar(t):
        return complex(out)
    return out


def envelope_cutoff_left(spec: PulseSpec) -> complex:
    """Left limit of the envelope at t0 (the last instant the drive is on).

    The final square slot always holds phase 0 and the sawtooth is
    evaluated at its endpoint, so only the magnitude V_peak survives for
    the square train.
    """
    if spec.mode == "sawtooth":
        phi = 2.0 * np.pi * spec.f_m * (spec.t0 - spec.t_m)
        return spec.v_peak * complex(np.exp(1j * phi))
    return complex(spec.v_peak)


def rabi_frequency(t, spec: PulseSpec, k: float, line: LineParams = LineParams()):
    """Complex Rabi rate Omega(t) = k*V_in(t)/sqrt(2*Z0), rad/s.

    The drive phase rides on Omega: the equations of motion use Omega and
    its conjugate, so magnitude alone is not enough.
    """
    return k * envelope(t, spec) / math.sqrt(2.0 * line.z0)


def input_energy_closed_form(spec: PulseSpec, line: LineParams = LineParams()) -> float:
    """Exact integral of |V_in|^2/(2*Z0) over [t_i, t0], in joules.

    Phase shaping never changes |V_in|, so the result is mode independent:
    (V_peak^2 * tau / (4*Z0)) * (1 - exp(2*(t_i - t0)/tau)).
    """
    x = 2.0 * (spec.t_i - spec.t0) / spec.tau
    return spec.v_peak**2 * spec.tau / (4.0 * line.z0) * (1.0 - math.exp(x))


def build_grid(spec: PulseSpec, dt_max: float, t_f: float) -> TimeGrid:
    """Uniform grid of step <= dt_max on [t_i, t_f], jump-aligned.

    Every phase switch, t_m and t0 appear as exact samples, so no
    integration step crosses a discontinuity of the waveform.

    Raises:
        ConfigError: if dt_max is not positive, t_f <= t0, or dt_max
            exceeds half the shortest modulation sub-interval (the grid
            would under-resolve the phase train).
    """
    if dt_max <= 0.0:
        raise ConfigError("dt_max must be strictly positive")
    if t_f <= spec.t0:
        raise ConfigError("t_f must lie beyond t0")
    if spec.mode == "square" and spec.n >= 1:
        shortest = spec.delta_t * min(spec.duty, 1.0 - spec.duty)
        if dt_max > 0.5 * shortest:
            raise ConfigError(
                f"dt_max = {dt_max} under-resolves the {shortest} s "
                "modulation sub-interval (limit: half its length)"
            )
    span = t_f - spec.t_i
    n_base = int(math.ceil(span / dt_max))
    base = spec.t_i + span * np.arange(n_base + 1) / n_base
    inserts = np.unique(np.concatenate([spec.switch_times(), [spec.t_m, spec.t0]]))
    inserts = inserts[(inserts > spec.t_i) & (inserts < t_f)]
    # Base points that land within tolerance of an inserted boundary are
    # dropped so the exact boundary value always wins the merge.
    tol = 1e-6 * span / n_base
    if len(inserts):
        nearest = np.clip(np.searchsorted(inserts, base), 0, len(inserts) - 1)
        dist = np.abs(base - inserts[nearest])
        left = np.abs(base - inserts[np.maximum(nearest - 1, 0)])
        base = base[np.minimum(dist, left) > tol]
    merged = np.unique(np.concatenate([base, inserts]))
    return TimeGrid(samples=merged)


def refine_grid(grid: TimeGrid, factor: int) -> TimeGrid:
    """Subdivide every step into ``factor`` equal parts, keeping the
    original samples exactly (needed to subsample results back)."""
    if factor < 1 or int(factor) != factor:
        raise ConfigError("factor must be a positive integer")
    if factor == 1:
        return grid
    s = grid.samples
    frac = np.arange(factor) / factor
    fine = (s[:-1, None] + np.diff(s)[:, None] * frac[None, :]).ravel()
    return TimeGrid(samples=np.concatenate([fine, s[-1:]]))
