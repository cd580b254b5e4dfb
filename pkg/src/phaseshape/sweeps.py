"""Parameter sweeps and the duty-cycle optimization.

Each sweep point is an independent scattering run at zero detuning; the
off-resonant (input-energy) reference is computed once per sweep and
shared, since phase shaping never changes the input magnitude.  Points
may run in worker processes; results are assembled by index, so the
output is identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import LineParams, NumericsError, QubitParams, coupling_k
from .dynamics import DriveContext, integrate
from .pulses import PulseSpec, build_grid, envelope, phase_profile
from .scattering import (
    default_dt_max,
    efficiency,
    energy_windows,
    offres_reference,
    output_voltage,
)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SweepResult:
    """Efficiency versus one axis; optional resampled trace grids."""

    axis_name: str
    values: np.ndarray = field(repr=False)
    eta: np.ndarray = field(repr=False)
    e_res: np.ndarray = field(repr=False)
    e_offres: float = 0.0
    times: np.ndarray | None = field(default=None, repr=False)
    v_res: np.ndarray | None = field(default=None, repr=False)
    v_offres: np.ndarray | None = field(default=None, repr=False)
    p_e: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not (len(self.values) == len(self.eta) == len(self.e_res)):
            raise NumericsError("sweep arrays must have one entry per axis value")
        for grid_arr in (self.v_res, self.v_offres, self.p_e):
            if grid_arr is not None and grid_arr.shape != (
                len(self.values),
                len(self.times),
            ):
                raise NumericsError("trace grids must be rectangular (axis x time)")


def _reference_energy(params, spec, line, dt_max, t_f):
    """Shared input-energy denominator from the analytic reference."""
    grid = build_grid(spec, dt_max, t_f)
    ref = offres_reference(spec, grid, params=params, line=line, mode="analytic")
    e_offres, _ = energy_windows(ref, ref, grid, spec.t0, line=line)
    return e_offres


def _emission_energy(params, spec, line, dt_max, t_f):
    """Reflected energy after turn-off for one on-resonance run."""
    k = coupling_k(params, line)
    grid = build_grid(spec, dt_max, t_f)
    ctx = DriveContext(delta=0.0, params=params, spec=spec, k=k, line=line)
    traj = integrate(ctx, grid)
    v_out = output_voltage(traj, spec, params, k, line)
    _, e_res = energy_windows(v_out, v_out, grid, spec.t0, line=line)
    return e_res


def _point_worker(args):
    params, spec, line, dt_max, t_f = args
    return _emission_energy(params, spec, line, dt_max, t_f)


def _run_points(params, specs, line, dt_max, t_f, workers):
    """Emission energies for every spec, optionally in worker processes.

    Results come back ordered by input index regardless of scheduling, so
    the assembled arrays are bitwise identical for any worker count.
    """
    jobs = [(params, s, line, dt_max, t_f) for s in specs]
    if workers <= 1:
        return [_point_worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_point_worker, jobs))


def _resolve_steps(params, specs, dt_max):
    """One dt ceiling serving every spec of the sweep."""
    if dt_max is not None:
        return dt_max
    return min(default_dt_max(params, s) for s in specs)


def sweep_n(
    n_values,
    theta: float,
    params: QubitParams,
    template: PulseSpec,
    line: LineParams = LineParams(),
    dt_max: float | None = None,
    t_f: float | None = None,
    workers: int = 1,
) -> SweepResult:
    """Efficiency versus interval count at fixed modulation phase."""
    n_values = np.asarray(list(n_values))
    if np.any(n_values < 0) or not np.issubdtype(n_values.dtype, np.integer):
        raise NumericsError("interval counts must be non-negative integers")
    specs = [replace(template, n=int(n), theta=theta, mode="square") for n in n_values]
    t_f = template.t0 + 5e-6 if t_f is None else t_f
    dt = _resolve_steps(params, specs, dt_max)
    e_offres = _reference_energy(params, specs[0], line, dt, t_f)
    try:
        e_res = _run_points(params, specs, line, dt, t_f, workers)
    except NumericsError as exc:
        raise NumericsError(f"n sweep failed: {exc}") from exc
    e_res = np.asarray(e_res)
    return SweepResult(
        axis_name="n",
        values=n_values,
        eta=np.array([efficiency(e, e_offres) for e in e_res]),
        e_res=e_res,
        e_offres=e_offres,
    )


def sweep_theta(
    thetas,
    n: int,
    params: QubitParams,
    template: PulseSpec,
    line: LineParams = LineParams(),
    dt_max: float | None = None,
    t_f: float | None = None,
    workers: int = 1,
) -> SweepResult:
    """Efficiency versus modulation phase at fixed interval count."""
    thetas = np.asarray(thetas, dtype=float)
    specs = [replace(template, n=n, theta=float(th), mode="square") for th in thetas]
    t_f = template.t0 + 5e-6 if t_f is None else t_f
    dt = _resolve_steps(params, specs, dt_max)
    e_offres = _reference_energy(params, specs[0], line, dt, t_f)
    try:
        e_res = _run_points(params, specs, line, dt, t_f, workers)
    except NumericsError as exc:
        raise NumericsError(f"theta sweep failed: {exc}") from exc
    e_res = np.asarray(e_res)
    return SweepResult(
        axis_name="theta",
        values=thetas,
        eta=np.array([efficiency(e, e_offres) for e in e_res]),
        e_res=e_res,
        e_offres=e_offres,
    )


def sweep_fm(
    f_values,
    params: QubitParams,
    template: PulseSpec,
    line: LineParams = LineParams(),
    dt_max: float | None = None,
    t_f: float | None = None,
    workers: int = 1,
) -> SweepResult:
    """Efficiency versus sawtooth modulation frequency."""
    f_values = np.asarray(f_values, dtype=float)
    specs = [replace(template, mode="sawtooth", f_m=float(f)) for f in f_values]
    t_f = template.t0 + 5e-6 if t_f is None else t_f
    dt = _resolve_steps(params, specs, dt_max)
    e_offres = _reference_energy(params, specs[0], line, dt, t_f)
    try:
        e_res = _run_points(params, specs, line, dt, t_f, workers)
    except NumericsError as exc:
        raise NumericsError(f"f_m sweep failed: {exc}") from exc
    e_res = np.asarray(e_res)
    return SweepResult(
        axis_name="f_m",
        values=f_values,
        eta=np.array([efficiency(e, e_offres) for e in e_res]),
        e_res=e_res,
        e_offres=e_offres,
    )


@dataclass(frozen=True)
class DutyBalance:
    """Closed-form area-balance duty plus the signed-area curve."""

    d_star: float
    duties: np.ndarray = field(repr=False)
    area_theta: np.ndarray = field(repr=False)
    area_zero: np.ndarray = field(repr=False)

    @property
    def area_total(self) -> np.ndarray:
        return self.area_theta + self.area_zero


def duty_area_balance(spec: PulseSpec, duties=None) -> DutyBalance:
    """Duty cycle that balances the drive areas of the two phase slots.

    With the pi phase counting negative, the per-period areas of an
    exponentially rising pulse cancel when

        exp(d*dt/tau) = (1 + exp(dt/tau)) / 2,

    giving d* = (tau/dt)*ln((1 + exp(dt/tau))/2); d* -> 1/2 as the period
    becomes short against the rise time.  Signed areas (in volt-seconds
    per unit peak voltage) are returned over ``duties`` for plotting.
    """
    dt = spec.delta_t
    tau = spec.tau
    x = dt / tau
    d_star = math.log((1.0 + math.exp(x)) / 2.0) / x
    if duties is None:
        duties = np.linspace(0.3, 0.8, 101)
    duties = np.asarray(duties, dtype=float)
    # geometric sum of exp((x_j - t0)/tau) over period starts x_j = t0 - j*dt
    geo = math.exp(-x) * (1.0 - math.exp(-spec.n * x)) / (1.0 - math.exp(-x))
    a_theta = -tau * geo * (np.exp(duties * x) - 1.0)
    a_zero = tau * geo * (math.exp(x) - np.exp(duties * x))
    return DutyBalance(d_star=d_star, duties=duties,
                       area_theta=a_theta, area_zero=a_zero)


@dataclass(frozen=True)
class DutyOptimum:
    d_opt: float
    eta_min: float
    duties: np.ndarray = field(repr=False)
    eta: np.ndarray = field(repr=False)
    e_offres: float = 0.0


def optimize_duty(
    params: QubitParams,
    template: PulseSpec,
    d_range: tuple[float, float] = (0.4, 0.75),
    coarse_step: float = 0.005,
    tol: float = 1e-3,
    line: LineParams = LineParams(),
    dt_max: float | None = None,
    t_f: float | None = None,
    workers: int = 1,
) -> DutyOptimum:
    """Duty cycle minimizing the simulated efficiency at theta = pi.

    Coarse scan over ``d_range`` followed by golden-section refinement to
    a bracket narrower than ``tol``.

    Raises:
        NumericsError: if the coarse minimum sits on a range boundary
            (the optimum is outside the search window).
    """
    d_lo, d_hi = d_range
    n_steps = int(round((d_hi - d_lo) / coarse_step))
    duties = d_lo + coarse_step * np.arange(n_steps + 1)
    base = replace(template, theta=math.pi, mode="square")
    specs = [replace(base, duty=float(d)) for d in duties]
    t_f = template.t0 + 5e-6 if t_f is None else t_f
    dt = _resolve_steps(params, specs, dt_max)
    e_offres = _reference_energy(params, specs[0], line, dt, t_f)
    e_res = _run_points(params, specs, line, dt, t_f, workers)
    etas = np.array([efficiency(e, e_offres) for e in e_res])
    i_min = int(np.argmin(etas))
    if i_min == 0 or i_min == len(duties) - 1:
        raise NumericsError(
            f"duty optimum at search boundary d = {duties[i_min]:.3f}; "
            "widen the range"
        )

    def eta_at(d):
        e = _emission_energy(params, replace(base, duty=float(d)), line, dt, t_f)
        return efficiency(e, e_offres)

    a, b = duties[i_min - 1], duties[i_min + 1]
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = eta_at(c), eta_at(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = eta_at(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = eta_at(d)
    d_opt = 0.5 * (a + b)
    return DutyOptimum(d_opt=d_opt, eta_min=eta_at(d_opt), duties=duties,
                       eta=etas, e_offres=e_offres)


@dataclass(frozen=True)
class TraceGrid:
    """Rectangular (axis x time) trace grids on a uniform display clock."""

    times: np.ndarray = field(repr=False)
    v_res: np.ndarray = field(repr=False)
    v_offres: np.ndarray = field(repr=False)
    p_e: np.ndarray = field(repr=False)
    phase: np.ndarray = field(repr=False)


def trace_grid(
    params: QubitParams,
    specs: list[PulseSpec],
    line: LineParams = LineParams(),
    dt_max: float | None = None,
    t_f: float | None = None,
    dt_out: float = 2e-9,
) -> TraceGrid:
    """On-resonance output, far-detuned reference and population grids.

    Each spec is integrated on its own jump-aligned grid and linearly
    resampled onto a shared uniform clock; the far-detuned row is the
    analytic reference (the input envelope itself).
    """
    t_f = specs[0].t0 + 5e-6 if t_f is None else t_f
    t_start = min(s.t_i for s in specs)
    times = np.arange(t_start, t_f + 0.5 * dt_out, dt_out)
    k = coupling_k(params, line)
    v_res = np.empty((len(specs), len(times)), dtype=complex)
    v_off = np.empty_like(v_res)
    p_e = np.empty((len(specs), len(times)))
    phase = np.empty_like(p_e)
    for i, spec in enumerate(specs):
        dt = dt_max if dt_max is not None else default_dt_max(params, spec)
        grid = build_grid(spec, dt, t_f)
        ctx = DriveContext(delta=0.0, params=params, spec=spec, k=k, line=line)
        traj = integrate(ctx, grid)
        v_out = output_voltage(traj, spec, params, k, line)
        t = grid.samples
        v_res[i] = np.interp(times, t, v_out.real) + 1j * np.interp(times, t, v_out.imag)
        v_off[i] = envelope(times, spec)
        p_e[i] = 0.5 * (1.0 + np.interp(times, t, traj.sz))
        phase[i] = phase_profile(times, spec)
    return TraceGrid(times=times, v_res=v_res, v_offres=v_off, p_e=p_e, phase=phase)
