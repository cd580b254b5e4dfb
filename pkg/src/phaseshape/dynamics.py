"""Driven two-level dynamics: the optical Bloch equations on a TimeGrid.

Only <sigma_-> and <sigma_z> are integrated; the raising-operator
expectation is the conjugate of <sigma_-> by construction, so its
equation of motion is redundant and is asserted rather than solved.

The integrator is classical fixed-step RK4 advanced between grid knots.
Grids built by ``pulses.build_grid`` place every waveform discontinuity
on a knot, so the drive is smooth inside each step and the stage values
can be taken as one-sided limits at the step ends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import BLOCH_TOL, BlochState, GROUND, LineParams, NumericsError, QubitParams
from .pulses import PulseSpec, TimeGrid, phase_profile, rabi_frequency


@dataclass(frozen=True)
class DriveContext:
    """Everything needed to evaluate the drive seen by the emitter.

    ``delta`` is the probe-minus-transition detuning (rad/s); ``k`` the
    Rabi-vs-sqrt-power constant from ``core.coupling_k``.
    """

    delta: float
    params: QubitParams
    spec: PulseSpec
    k: float
    line: LineParams = LineParams()


@dataclass(frozen=True)
class Trajectory:
    """Bloch expectation values sampled on a grid.

    ``sm`` and ``sz`` are arrays aligned with ``grid.samples``; ``omega``
    holds the pointwise complex Rabi rate at the same instants.
    """

    grid: TimeGrid
    sm: np.ndarray = field(repr=False)
    sz: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = len(self.grid)
        if not (len(self.sm) == len(self.sz) == len(self.omega) == n):
            raise NumericsError("trajectory arrays must match the grid length")

    def state_at(self, i: int) -> BlochState:
        return BlochState(sm=complex(self.sm[i]), sz=float(self.sz[i]))

    def max_bloch_norm(self) -> float:
        return float(np.max(4.0 * np.abs(self.sm) ** 2 + self.sz**2))


def bloch_rhs(state: BlochState, omega: complex, ctx: DriveContext):
    """Time derivatives (d<sigma_->/dt, d<sigma_z>/dt).

    d<sigma_->/dt = (i*delta - gamma) <sigma_-> + Omega <sigma_z> / 2
    d<sigma_z>/dt = -Gamma (1 + <sigma_z>) - 2 Re(conj(Omega) <sigma_->)

    where the last term is Omega <sigma_+> + conj(Omega) <sigma_-> with
    <sigma_+> = conj(<sigma_->).
    """
    gamma = ctx.params.gamma
    dsm = (1j * ctx.delta - gamma) * state.sm + 0.5 * omega * state.sz
    dsz = -ctx.params.big_gamma * (1.0 + state.sz) - 2.0 * (omega.conjugate() * state.sm).real
    return dsm, float(dsz)


def _stage_omegas(spec: PulseSpec, k: float, line: LineParams, knots: np.ndarray):
    """Per-step Rabi values at (left end, midpoint, right end).

    Ends use one-sided limits from inside the step: the left end takes the
    value just after it, the right end the value just before it.  In
    particular the step ending at t0 sees the full pulse amplitude at its
    last stage even though the pointwise envelope is already zero there.
    """
    a = knots[:-1]
    b = knots[1:]
    mid = 0.5 * (a + b)
    pref = k * spec.v_peak / math.sqrt(2.0 * line.z0)
    decay = lambda t: np.exp(np.minimum(t - spec.t0, 0.0) / spec.tau)
    mag_a = np.where(a < spec.t0, decay(a), 0.0)
    mag_m = np.where(mid < spec.t0, decay(mid), 0.0)
    mag_b = np.where(b <= spec.t0, decay(b), 0.0)
    if spec.mode == "square" and spec.n >= 1:
        # constant phase inside each step; the midpoint is always interior
        ph = phase_profile(mid, spec)
        ph_a = ph_m = ph_b = ph
    elif spec.mode == "sawtooth":
        ramp = lambda t: 2.0 * np.pi * spec.f_m * (t - spec.t_m)
        ph_a = np.where((a >= spec.t_m) & (a < spec.t0), ramp(a), 0.0)
        ph_m = np.where((mid >= spec.t_m) & (mid < spec.t0), ramp(mid), 0.0)
        ph_b = np.where((b >= spec.t_m) & (b <= spec.t0), ramp(b), 0.0)
    else:
        ph_a = ph_m = ph_b = np.zeros_like(mid)
    om_a = pref * mag_a * np.exp(1j * ph_a)
    om_m = pref * mag_m * np.exp(1j * ph_m)
    om_b = pref * mag_b * np.exp(1j * ph_b)
    return om_a, om_m, om_b


def _run_rk4(delta, big_gamma, gamma, knots, om_a, om_m, om_b, sm0, sz0):
    """Classical RK4 over consecutive knots with precomputed stage drives.

    Plain-Python complex arithmetic in the hot loop; the per-step drive
    values carry the one-sided limits so no stage ever reads across a
    waveform jump.
    """
    n = len(knots)
    sm_out = np.empty(n, dtype=complex)
    sz_out = np.empty(n, dtype=float)
    hs = np.diff(knots).tolist()
    o_a = np.asarray(om_a, dtype=complex).tolist()
    o_m = np.asarray(om_m, dtype=complex).tolist()
    o_b = np.asarray(om_b, dtype=complex).tolist()
    sm = complex(sm0)
    sz = float(sz0)
    sm_out[0] = sm
    sz_out[0] = sz
    coef = 1j * delta - gamma
    for i in range(n - 1):
        h = hs[i]
        o1 = o_a[i]
        o2 = o_m[i]
        o3 = o_b[i]
        d1m = coef * sm + 0.5 * o1 * sz
        d1z = -big_gamma * (1.0 + sz) - 2.0 * (o1.conjugate() * sm).real
        m2 = sm + 0.5 * h * d1m
        z2 = sz + 0.5 * h * d1z
        d2m = coef * m2 + 0.5 * o2 * z2
        d2z = -big_gamma * (1.0 + z2) - 2.0 * (o2.conjugate() * m2).real
        m3 = sm + 0.5 * h * d2m
        z3 = sz + 0.5 * h * d2z
        d3m = coef * m3 + 0.5 * o2 * z3
        d3z = -big_gamma * (1.0 + z3) - 2.0 * (o2.conjugate() * m3).real
        m4 = sm + h * d3m
        z4 = sz + h * d3z
        d4m = coef * m4 + 0.5 * o3 * z4
        d4z = -big_gamma * (1.0 + z4) - 2.0 * (o3.conjugate() * m4).real
        sm = sm + (h / 6.0) * (d1m + 2.0 * (d2m + d3m) + d4m)
        sz = sz + (h / 6.0) * (d1z + 2.0 * (d2z + d3z) + d4z)
        sm_out[i + 1] = sm
        sz_out[i + 1] = sz
    return sm_out, sz_out


def integrate(ctx: DriveContext, grid: TimeGrid, initial: BlochState = GROUND) -> Trajectory:
    """Integrate the Bloch equations over the grid.

    Raises:
        NumericsError: if any sample violates the Bloch-vector bound
            (4|sm|^2 + sz^2 <= 1 + tol), which indicates a grid too
            coarse for the drive.
    """
    knots = grid.samples
    om_a, om_m, om_b = _stage_omegas(ctx.spec, ctx.k, ctx.line, knots)
    sm, sz = _run_rk4(
        ctx.delta,
        ctx.params.big_gamma,
        ctx.params.gamma,
        knots,
        om_a,
        om_m,
        om_b,
        initial.sm,
        initial.sz,
    )
    norm = 4.0 * np.abs(sm) ** 2 + sz**2
    worst = float(np.max(norm))
    if worst > 1.0 + BLOCH_TOL or np.min(sz) < -1.0 - BLOCH_TOL:
        raise NumericsError(
            f"Bloch-vector bound violated (max norm {worst}); refine the grid"
        )
    omega = rabi_frequency(knots, ctx.spec, ctx.k, ctx.line)
    return Trajectory(grid=grid, sm=sm, sz=sz, omega=np.asarray(omega, dtype=complex))


def steady_state(ctx: DriveContext, omega: complex) -> BlochState:
    """Algebraic fixed point of the Bloch equations for a constant drive."""
    gamma = ctx.params.gamma
    big_gamma = ctx.params.big_gamma
    denom = gamma**2 + ctx.delta**2
    sz = -1.0 / (1.0 + abs(omega) ** 2 * gamma / (big_gamma * denom))
    sm = omega * sz / (2.0 * (gamma - 1j * ctx.delta))
    return BlochState(sm=complex(sm), sz=float(sz))
