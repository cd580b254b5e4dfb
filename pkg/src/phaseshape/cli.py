"""Command-line entry point.

Subcommands:
    simulate   one scattering run; trace CSV + summary JSON on stdout
    sweep      efficiency sweeps (--axis n | theta | duty | fm)
    calibrate  parameter extraction from a spectroscopy CSV or synthetic data
    analytic   closed-form efficiency, reflection and loss evaluations

Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 fit failure.
Output files are written atomically (temp file + rename); repeated runs
with the same config and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from .calibration import (
    chain_from_db,
    circle_fit,
    default_detuning_grid,
    derive_chain,
    power_sweep_fit,
    read_spectroscopy_csv,
    remove_background,
    synth_spectroscopy,
    write_spectroscopy_csv,
)
from .config import TWO_PI, RunConfig, load_config
from .core import ConfigError, FitError, NumericsError, QubitParams, coupling_k
from .pulses import phase_profile, wrap_phase
from .scattering import (
    analytic_efficiency,
    demod_filter,
    photon_number,
    power_loss_fraction,
    reflection_ss,
    scatter_run,
)
from .sweeps import (
    GOLDEN,
    duty_area_balance,
    optimize_duty,
    sweep_fm,
    sweep_n,
    sweep_theta,
    trace_grid,
)

FMT = "{:.11e}"


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, columns):
    lines = [",".join(header)]
    rows = zip(*columns)
    for row in rows:
        lines.append(",".join(FMT.format(v) if isinstance(v, float) else str(v)
                              for v in row))
    return "\n".join(lines) + "\n"


def _matrix_csv_text(times, axis_values, matrix):
    """One-line header of axis values; rows are time samples."""
    header = ["time_s"] + [FMT.format(float(v)) for v in axis_values]
    lines = [",".join(header)]
    for i, t in enumerate(times):
        lines.append(",".join([FMT.format(float(t))]
                              + [FMT.format(float(v)) for v in matrix[:, i]]))
    return "\n".join(lines) + "\n"


def _emit_json(payload):
    print(json.dumps(payload, indent=2, sort_keys=True))


def _tau_optimum(params, lo_rel=0.05, hi_rel=20.0, tol_rel=1e-4):
    """Golden-section maximizer of the closed-form efficiency over tau."""
    gamma = params.gamma
    a, b = lo_rel / gamma, hi_rel / gamma
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc = -analytic_efficiency(params, c)
    fd = -analytic_efficiency(params, d)
    while (b - a) * gamma > tol_rel:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = -analytic_efficiency(params, c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = -analytic_efficiency(params, d)
    return 0.5 * (a + b)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, args) -> int:
    res = scatter_run(
        cfg.params,
        cfg.spec,
        delta=cfg.delta,
        line=cfg.line,
        dt_max=cfg.dt_max,
        t_f=cfg.t_f,
        offres_mode=cfg.offres_mode,
        offres_delta=cfg.offres_delta,
    )
    grid = res.traj.grid
    t = grid.samples
    v_out = res.v_out
    if args.filter_ns and args.filter_ns > 0.0:
        v_out = demod_filter(v_out, grid, args.filter_ns * 1e-9)
    p_e = 0.5 * (1.0 + res.traj.sz)
    phase = wrap_phase(phase_profile(t, cfg.spec))
    out_dir = args.out or cfg.out_dir
    trace_path = os.path.join(out_dir, "trace.csv")
    _atomic_write(trace_path, _csv_text(
        ["time_s", "v_in_re", "v_in_im", "v_out_re", "v_out_im", "p_e", "phase_rad"],
        [t.tolist(), res.v_in.real.tolist(), res.v_in.imag.tolist(),
         v_out.real.tolist(), v_out.imag.tolist(), p_e.tolist(),
         np.asarray(phase, dtype=float).tolist()],
    ))
    payload = {
        "eta": res.eta,
        "e_offres_j": res.e_offres,
        "e_res_j": res.e_res,
        "photon_number": photon_number(res.e_offres, cfg.params, cfg.line),
        "trace_csv": trace_path,
    }
    if args.plot:
        from . import plots

        payload["trace_png"] = plots.plot_trace(
            t, res.v_in, v_out, p_e, phase,
            os.path.join(out_dir, "trace.png"))
    _emit_json(payload)
    return 0


def _axis_specs(cfg: RunConfig, axis):
    """Axis values and matching pulse specs for a sweep."""
    from dataclasses import replace

    template = cfg.spec
    if axis == "n":
        values = np.arange(cfg.n_min, cfg.n_max + 1)
        specs = [replace(template, n=int(n), mode="square") for n in values]
    elif axis == "theta":
        values = np.linspace(0.0, 2.0 * math.pi, cfg.theta_points)
        n_fixed = template.n if template.n >= 1 else 50
        specs = [replace(template, n=n_fixed, theta=float(v), mode="square")
                 for v in values]
    elif axis == "fm":
        values = np.linspace(0.0, cfg.fm_max, cfg.fm_points)
        specs = [replace(template, mode="sawtooth", f_m=float(v)) for v in values]
    else:
        raise ConfigError(f"no trace grid for axis {axis!r}")
    return values, specs


def cmd_sweep(cfg: RunConfig, args) -> int:
    axis = args.axis
    workers = args.workers or cfg.workers
    out_dir = args.out or cfg.out_dir
    template = cfg.spec
    payload = {"axis": axis}
    if axis == "n":
        result = sweep_n(
            np.arange(cfg.n_min, cfg.n_max + 1), template.theta, cfg.params,
            template, cfg.line, cfg.dt_max, cfg.t_f, workers)
        col, label = "n", "interval count N"
    elif axis == "theta":
        n_fixed = template.n if template.n >= 1 else 50
        result = sweep_theta(
            np.linspace(0.0, 2.0 * math.pi, cfg.theta_points), n_fixed,
            cfg.params, template, cfg.line, cfg.dt_max, cfg.t_f, workers)
        col, label = "theta_rad", "modulation phase (rad)"
    elif axis == "fm":
        result = sweep_fm(
            np.linspace(0.0, cfg.fm_max, cfg.fm_points), cfg.params,
            template, cfg.line, cfg.dt_max, cfg.t_f, workers)
        col, label = "f_m_hz", "modulation frequency (Hz)"
    elif axis == "duty":
        from dataclasses import replace

        n_fixed = template.n if template.n >= 1 else 50
        base = replace(template, n=n_fixed)
        opt = optimize_duty(
            cfg.params, base, (cfg.duty_min, cfg.duty_max), cfg.duty_step,
            1e-3, cfg.line, cfg.dt_max, cfg.t_f, workers)
        balance = duty_area_balance(base)
        csv_path = os.path.join(out_dir, "sweep_duty.csv")
        _atomic_write(csv_path, _csv_text(
            ["duty", "eta", "e_res_j", "e_offres_j"],
            [opt.duties.tolist(), opt.eta.tolist(),
             (opt.eta * opt.e_offres).tolist(),
             [opt.e_offres] * len(opt.duties)],
        ))
        payload.update({
            "duty_optimum": opt.d_opt,
            "eta_at_optimum": opt.eta_min,
            "duty_area_balance": balance.d_star,
            "sweep_csv": csv_path,
        })
        if args.plot:
            from . import plots

            payload["duty_png"] = plots.plot_duty(
                balance, opt.duties, opt.eta, opt.d_opt,
                os.path.join(out_dir, "sweep_duty.png"))
        _emit_json(payload)
        return 0
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}")

    csv_path = os.path.join(out_dir, f"sweep_{axis}.csv")
    _atomic_write(csv_path, _csv_text(
        [col, "eta", "e_res_j", "e_offres_j"],
        [result.values.tolist(), result.eta.tolist(), result.e_res.tolist(),
         [result.e_offres] * len(result.values)],
    ))
    payload["sweep_csv"] = csv_path
    if args.grid:
        values, specs = _axis_specs(cfg, axis)
        tg = trace_grid(cfg.params, specs, cfg.line, cfg.dt_max, cfg.t_f)
        for name, mat in (
            ("vout_res_re", tg.v_res.real),
            ("vout_res_im", tg.v_res.imag),
            ("vout_offres_re", tg.v_offres.real),
            ("vout_offres_im", tg.v_offres.imag),
            ("pe", tg.p_e),
        ):
            path = os.path.join(out_dir, f"grid_{axis}_{name}.csv")
            _atomic_write(path, _matrix_csv_text(tg.times, values, mat))
            payload[f"grid_{name}_csv"] = path
        if args.plot:
            from . import plots

            payload["grid_png"] = plots.plot_trace_grid(
                tg.times, values, np.abs(tg.v_res), label,
                os.path.join(out_dir, f"grid_{axis}_vout.png"),
                title="|V_out| on resonance")
            payload["grid_pe_png"] = plots.plot_trace_grid(
                tg.times, values, tg.p_e, label,
                os.path.join(out_dir, f"grid_{axis}_pe.png"),
                title="P_e")
    if args.plot:
        from . import plots

        payload["sweep_png"] = plots.plot_sweep(
            result.values, result.eta, label,
            os.path.join(out_dir, f"sweep_{axis}.png"))
    _emit_json(payload)
    return 0


def cmd_calibrate(cfg: RunConfig, args) -> int:
    params = cfg.params
    line = cfg.line
    out_dir = args.out or cfg.out_dir
    gamma = params.gamma
    if args.synthetic:
        chain = chain_from_db(cfg.cal_a_db, cfg.cal_g_db, params, line)
        grid = default_detuning_grid(gamma, wing_span=cfg.cal_span_gamma,
                                     n_core=max(51, cfg.cal_points - 100))
        probe = cfg.cal_probe_rel * gamma
        diameter = params.big_gamma / gamma
        sigma = cfg.cal_noise_rel * diameter * math.sqrt(chain.g * chain.a)
        center = params.omega10 - cfg.cal_center_offset
        trace = synth_spectroscopy(params, chain, grid, probe, sigma,
                                   args.seed, omega_ref=center)
        om_grid = gamma * np.logspace(
            math.log10(cfg.cal_power_min_rel), math.log10(cfg.cal_power_max_rel),
            cfg.cal_power_points)
        power_p = (om_grid / chain.k_src) ** 2
        power_r = np.array([
            synth_spectroscopy(params, chain,
                               np.array([-gamma, 0.0, gamma]), om,
                               sigma, args.seed + 1000 + i,
                               omega_ref=params.omega10).r_all[1]
            for i, om in enumerate(om_grid)
        ])
        csv_path = os.path.join(out_dir, "spectroscopy.csv")
        _atomic_write_csv_trace(csv_path, trace, power_p, power_r)
        truth = {
            "f10_mhz": params.omega10 / TWO_PI / 1e6,
            "radiative_rate_mhz": params.big_gamma / TWO_PI / 1e6,
            "decoherence_rate_mhz": gamma / TWO_PI / 1e6,
            "k_src": chain.k_src,
            "attenuation_db": chain.a_db,
            "gain_db": chain.g_db,
        }
        omega_ref = center
    else:
        if not args.input:
            raise ConfigError("calibrate needs --input CSV or --synthetic")
        omega_ref = params.omega10
        trace, power_p, power_r = read_spectroscopy_csv(args.input, omega_ref)
        truth = None
        csv_path = args.input

    r_corr, background = remove_background(trace)
    fit = circle_fit(r_corr, trace.detunings, omega_ref=trace.omega_ref)
    fitted = QubitParams(omega10=fit.omega10, big_gamma=fit.big_gamma,
                         gamma_phi_l=max(fit.gamma - 0.5 * fit.big_gamma, 0.0))
    if len(power_p) == 0:
        raise FitError("no on-resonance power-sweep rows in the input")
    r_on = np.asarray(power_r) / background
    k_src, k_src_err = power_sweep_fit(r_on, power_p, fit.big_gamma, fit.gamma)
    chain_out = derive_chain(k_src, fitted, background, line)

    # linearized 1-sigma for the chain constants: A goes as k_src^2/Gamma
    # and G as 1/A at fixed background magnitude
    a_rel_err = math.hypot(2.0 * k_src_err / k_src,
                           fit.big_gamma_err / fit.big_gamma)
    db_per_rel = 10.0 / math.log(10.0)
    payload = {
        "f10_mhz": fit.omega10 / TWO_PI / 1e6,
        "f10_err_mhz": fit.omega10_err / TWO_PI / 1e6,
        "radiative_rate_mhz": fit.big_gamma / TWO_PI / 1e6,
        "radiative_rate_err_mhz": fit.big_gamma_err / TWO_PI / 1e6,
        "decoherence_rate_mhz": fit.gamma / TWO_PI / 1e6,
        "decoherence_rate_err_mhz": fit.gamma_err / TWO_PI / 1e6,
        "dephasing_rate_mhz": (fit.gamma - 0.5 * fit.big_gamma) / TWO_PI / 1e6,
        "k_src": k_src,
        "k_src_err": k_src_err,
        "k": coupling_k(fitted, line),
        "attenuation_db": chain_out.a_db,
        "attenuation_db_err": db_per_rel * a_rel_err,
        "gain_db": chain_out.g_db,
        "gain_db_err": db_per_rel * a_rel_err,
        "background_abs": abs(background),
        "spectroscopy_csv": csv_path,
    }
    if truth is not None:
        payload["recovery_error_rel"] = {
            "f10": payload["f10_mhz"] / truth["f10_mhz"] - 1.0,
            "radiative_rate": payload["radiative_rate_mhz"]
            / truth["radiative_rate_mhz"] - 1.0,
            "decoherence_rate": payload["decoherence_rate_mhz"]
            / truth["decoherence_rate_mhz"] - 1.0,
            "k_src": k_src / truth["k_src"] - 1.0,
            "attenuation_db_diff": chain_out.a_db - truth["attenuation_db"],
            "gain_db_diff": chain_out.g_db - truth["gain_db"],
        }
    if args.plot:
        from . import plots

        payload["calibration_png"] = plots.plot_calibration(
            r_corr, trace.detunings, fit, power_p, r_on, k_src,
            fit.big_gamma, fit.gamma,
            os.path.join(out_dir, "calibration.png"))
    _emit_json(payload)
    return 0


def _atomic_write_csv_trace(path, trace, power_p, power_r):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    os.close(fd)
    try:
        write_spectroscopy_csv(tmp, trace, power_p, power_r)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cmd_analytic(cfg: RunConfig, args) -> int:
    params = cfg.params
    gamma = params.gamma
    out_dir = args.out or cfg.out_dir
    taus = np.logspace(math.log10(0.05 / gamma), math.log10(20.0 / gamma), 201)
    etas = np.array([analytic_efficiency(params, t) for t in taus])
    tau_opt = _tau_optimum(params)
    tau_path = os.path.join(out_dir, "analytic_eta_vs_tau.csv")
    _atomic_write(tau_path, _csv_text(["tau_s", "eta"],
                                      [taus.tolist(), etas.tolist()]))

    deltas = gamma * np.linspace(-5.0, 5.0, 41)
    omegas = gamma * np.array([0.01, 0.13117, 0.5, 1.0, 3.0])
    rows_d, rows_o, rows_re, rows_im, rows_abs, rows_loss = [], [], [], [], [], []
    for om in omegas:
        for d in deltas:
            r = reflection_ss(d, om, params)
            rows_d.append(d / TWO_PI)
            rows_o.append(om / TWO_PI)
            rows_re.append(r.real)
            rows_im.append(r.imag)
            rows_abs.append(abs(r))
            rows_loss.append(power_loss_fraction(d, om, params))
    refl_path = os.path.join(out_dir, "reflection_ss_grid.csv")
    _atomic_write(refl_path, _csv_text(
        ["delta_hz", "rabi_hz", "re", "im", "abs", "loss"],
        [rows_d, rows_o, rows_re, rows_im, rows_abs, rows_loss]))

    k = coupling_k(params, cfg.line)
    omega_wp = cfg.spec.v_peak * k / math.sqrt(2.0 * cfg.line.z0)
    payload = {
        "eta_max_analytic": analytic_efficiency(params, 1.0 / gamma),
        "tau_decoherence_s": 1.0 / gamma,
        "tau_optimum_s": tau_opt,
        "working_point_rabi_hz": omega_wp / TWO_PI,
        "working_point_loss": power_loss_fraction(0.0, omega_wp, params),
        "weak_resonant_reflection": reflection_ss(0.0, 0.0, params).real,
        "eta_vs_tau_csv": tau_path,
        "reflection_grid_csv": refl_path,
    }
    if args.plot:
        from . import plots

        payload["eta_vs_tau_png"] = plots.plot_analytic(
            taus, etas, tau_opt, os.path.join(out_dir, "analytic_eta_vs_tau.png"))
    _emit_json(payload)
    return 0


# ---------------------------------------------------------------------------

def _build_parser():
    p = argparse.ArgumentParser(
        prog="phaseshape",
        description="Two-level emitter scattering phase-shaped rising pulses "
                    "in a semi-infinite transmission line",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="single scattering run")
    sim.add_argument("--config", help="INI config path (defaults built in)")
    sim.add_argument("--out", help="output directory")
    sim.add_argument("--filter-ns", type=float, default=0.0,
                     help="optional demodulation moving-average window (ns), "
                          "applied to the written output trace only")
    sim.add_argument("--plot", action="store_true", help="render figures")

    sw = sub.add_parser("sweep", help="efficiency sweeps")
    sw.add_argument("--config", help="INI config path")
    sw.add_argument("--axis", required=True, choices=("n", "theta", "duty", "fm"))
    sw.add_argument("--out", help="output directory")
    sw.add_argument("--grid", action="store_true",
                    help="emit time-by-axis trace grids as CSV matrices")
    sw.add_argument("--workers", type=int, default=0,
                    help="worker processes (0 = use config)")
    sw.add_argument("--plot", action="store_true", help="render figures")

    cal = sub.add_parser("calibrate", help="parameter extraction chain")
    cal.add_argument("--config", help="INI config path")
    cal.add_argument("--input", help="spectroscopy CSV "
                     "(columns delta_hz,re,im,p_src_w)")
    cal.add_argument("--synthetic", action="store_true",
                     help="generate synthetic data instead of reading a CSV")
    cal.add_argument("--seed", type=int, default=0, help="noise seed")
    cal.add_argument("--out", help="output directory")
    cal.add_argument("--plot", action="store_true", help="render figures")

    an = sub.add_parser("analytic", help="closed-form evaluations")
    an.add_argument("--config", help="INI config path")
    an.add_argument("--out", help="output directory")
    an.add_argument("--plot", action="store_true", help="render figures")
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "simulate":
            return cmd_simulate(cfg, args)
        if args.command == "sweep":
            return cmd_sweep(cfg, args)
        if args.command == "calibrate":
            return cmd_calibrate(cfg, args)
        if args.command == "analytic":
            return cmd_analytic(cfg, args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except FitError as exc:
        print(f"fit failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
