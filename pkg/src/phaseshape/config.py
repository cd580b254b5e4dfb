"""Run configuration: INI files with engineering units.

Config files use flat key = value lines under four sections (qubit,
pulse, sim, output) plus optional sweep and calibration sections.
Frequencies are cyclic (MHz), times are ns/us and voltages nV; every
value is converted once, here, to SI angular units.  Unknown sections or
keys are rejected so typos cannot silently fall back to defaults.

All defaults reproduce the reference working point: a 4766 MHz emitter
with 2.271 MHz radiative rate driven at peak Rabi 0.154 MHz by a pulse
whose rise time equals the decoherence time.
"""

from __future__ import annotations

import configparser
import io
import math
import sys
from dataclasses import dataclass

from .core import ConfigError, LineParams, QubitParams, coupling_k
from .pulses import PulseSpec

TWO_PI = 2.0 * math.pi

# section -> {key: default-as-string}; "auto" means derived downstream
DEFAULTS: dict[str, dict[str, str]] = {
    "qubit": {
        "f10_mhz": "4766.0",
        "radiative_rate_mhz": "2.271",
        "dephasing_rate_mhz": "0.0385",
    },
    "line": {
        "impedance_ohm": "50.0",
    },
    "pulse": {
        "peak_rabi_mhz": "auto",      # auto: 0.154 unless peak_voltage_nv given
        "peak_voltage_nv": "auto",    # auto: derived from the Rabi setting
        "tau_ns": "auto",             # auto: decoherence time 1/gamma
        "t_m_us": "-2.5",
        "t_i_us": "auto",
        "intervals": "0",
        "theta_deg": "180.0",
        "duty": "0.5",
        "mode": "square",
        "f_m_mhz": "0.0",
    },
    "sim": {
        "dt_ns": "auto",
        "t_f_us": "auto",             # auto: 5 us past turn-off
        "detuning_mhz": "0.0",
        "offres_mode": "analytic",
        "offres_detuning_mhz": "200.0",
        "workers": "1",
    },
    "sweep": {
        "n_min": "0",
        "n_max": "50",
        "theta_points": "101",
        "fm_points": "81",
        "fm_max_mhz": "20.0",
        "duty_min": "0.4",
        "duty_max": "0.75",
        "duty_step": "0.005",
    },
    "calibration": {
        "attenuation_db": "-133.66",
        "gain_db": "60.87",
        "probe_rabi_rel": "0.001",    # circle-fit drive, units of gamma
        "span_gamma": "500.0",
        "points": "401",
        "power_points": "61",
        "power_rabi_min_rel": "0.05",
        "power_rabi_max_rel": "50.0",
        "noise_sigma_rel": "0.0",     # per quadrature, vs circle diameter
        "center_offset_mhz": "1.0",   # sweep center minus true resonance
    },
    "output": {
        "out_dir": ".",
    },
}

WORKING_POINT_RABI_MHZ = 0.154


@dataclass(frozen=True)
class RunConfig:
    """Validated, unit-converted configuration for one CLI invocation."""

    params: QubitParams
    line: LineParams
    spec: PulseSpec
    delta: float
    dt_max: float | None
    t_f: float
    offres_mode: str
    offres_delta: float
    workers: int
    n_min: int
    n_max: int
    theta_points: int
    fm_points: int
    fm_max: float
    duty_min: float
    duty_max: float
    duty_step: float
    cal_a_db: float
    cal_g_db: float
    cal_probe_rel: float
    cal_span_gamma: float
    cal_points: int
    cal_power_points: int
    cal_power_min_rel: float
    cal_power_max_rel: float
    cal_noise_rel: float
    cal_center_offset: float
    out_dir: str


def _parse_value(section: str, key: str, raw: str, kind, allow_auto=False):
    raw = raw.strip()
    if allow_auto and raw.lower() == "auto":
        return None
    try:
        if kind is int:
            val = int(raw)
        elif kind is float:
            val = float(raw)
        else:
            val = raw
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None
    if kind is float and not math.isfinite(val):
        raise ConfigError(f"[{section}] {key}: must be finite, got {raw!r}")
    return val


def load_config(path: str | None = None, text: str | None = None) -> RunConfig:
    """Read an INI config (file path or literal text) and validate it.

    Every downstream precondition is checked here; error messages name
    the offending section and key.  Omitted keys take the documented
    defaults, so an empty config reproduces the reference working point.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if text is not None:
        cp.read_file(io.StringIO(text))
    elif path is not None:
        if not cp.read(path):
            raise ConfigError(f"cannot read config file {path!r}")

    merged: dict[str, dict[str, str]] = {s: dict(kv) for s, kv in DEFAULTS.items()}
    explicit: set[tuple[str, str]] = set()
    for section in cp.sections():
        if section not in merged:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in cp[section].items():
            if key not in merged[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            merged[section][key] = raw
            explicit.add((section, key))

    def get(section, key, kind, allow_auto=False):
        return _parse_value(section, key, merged[section][key], kind, allow_auto)

    f10 = get("qubit", "f10_mhz", float)
    rad = get("qubit", "radiative_rate_mhz", float)
    deph = get("qubit", "dephasing_rate_mhz", float)
    if f10 <= 0.0:
        raise ConfigError("[qubit] f10_mhz must be positive")
    if rad <= 0.0:
        raise ConfigError("[qubit] radiative_rate_mhz must be positive")
    if deph < 0.0:
        raise ConfigError("[qubit] dephasing_rate_mhz must be non-negative")
    if f10 <= 1e3 * rad:
        raise ConfigError(
            "[qubit] f10_mhz must exceed radiative_rate_mhz by more than "
            "10^3 (weak-coupling two-level model)"
        )
    params = QubitParams(
        omega10=TWO_PI * f10 * 1e6,
        big_gamma=TWO_PI * rad * 1e6,
        gamma_phi_l=TWO_PI * deph * 1e6,
    )

    z0 = get("line", "impedance_ohm", float)
    if z0 <= 0.0:
        raise ConfigError("[line] impedance_ohm must be positive")
    line = LineParams(z0=z0)

    tau_ns = get("pulse", "tau_ns", float, allow_auto=True)
    tau = 1.0 / params.gamma if tau_ns is None else tau_ns * 1e-9
    if tau <= 0.0:
        raise ConfigError("[pulse] tau_ns must be positive")

    rabi_mhz = get("pulse", "peak_rabi_mhz", float, allow_auto=True)
    v_nv = get("pulse", "peak_voltage_nv", float, allow_auto=True)
    k = coupling_k(params, line)
    rabi_given = ("pulse", "peak_rabi_mhz") in explicit
    volt_given = ("pulse", "peak_voltage_nv") in explicit
    if rabi_given and volt_given and rabi_mhz is not None and v_nv is not None:
        print(
            "warning: both peak_rabi_mhz and peak_voltage_nv set; "
            "the Rabi value wins",
            file=sys.stderr,
        )
        v_nv = None
    if rabi_mhz is None and v_nv is None:
        rabi_mhz = WORKING_POINT_RABI_MHZ
    if rabi_mhz is not None:
        if rabi_mhz < 0.0:
            raise ConfigError("[pulse] peak_rabi_mhz must be non-negative")
        v_peak = TWO_PI * rabi_mhz * 1e6 * math.sqrt(2.0 * line.z0) / k
    else:
        if v_nv < 0.0:
            raise ConfigError("[pulse] peak_voltage_nv must be non-negative")
        v_peak = v_nv * 1e-9

    theta_deg = get("pulse", "theta_deg", float)
    if not 0.0 <= theta_deg <= 360.0:
        raise ConfigError("[pulse] theta_deg must lie in [0, 360]")
    duty = get("pulse", "duty", float)
    if not 0.0 < duty < 1.0:
        raise ConfigError("[pulse] duty must lie strictly between 0 and 1")
    n_int = get("pulse", "intervals", int)
    if n_int < 0:
        raise ConfigError("[pulse] intervals must be a non-negative integer")
    mode = get("pulse", "mode", str).lower()
    if mode not in ("none", "square", "sawtooth"):
        raise ConfigError("[pulse] mode must be none, square or sawtooth")
    f_m_mhz = get("pulse", "f_m_mhz", float)
    if f_m_mhz < 0.0:
        raise ConfigError("[pulse] f_m_mhz must be non-negative")
    t_m = get("pulse", "t_m_us", float) * 1e-6
    t_i_us = get("pulse", "t_i_us", float, allow_auto=True)
    try:
        spec = PulseSpec(
            v_peak=v_peak,
            tau=tau,
            t_m=t_m,
            t_i=None if t_i_us is None else t_i_us * 1e-6,
            n=n_int,
            theta=math.radians(theta_deg),
            duty=duty,
            mode=mode,
            f_m=f_m_mhz * 1e6,
        )
    except ConfigError as exc:
        raise ConfigError(f"[pulse] {exc}") from exc

    dt_ns = get("sim", "dt_ns", float, allow_auto=True)
    if dt_ns is not None and dt_ns <= 0.0:
        raise ConfigError("[sim] dt_ns must be positive")
    t_f_us = get("sim", "t_f_us", float, allow_auto=True)
    t_f = spec.t0 + 5e-6 if t_f_us is None else t_f_us * 1e-6
    if t_f <= spec.t0:
        raise ConfigError("[sim] t_f_us must lie beyond the pulse turn-off")
    offres_mode = get("sim", "offres_mode", str).lower()
    if offres_mode not in ("analytic", "simulated"):
        raise ConfigError("[sim] offres_mode must be analytic or simulated")
    offres_delta = TWO_PI * get("sim", "offres_detuning_mhz", float) * 1e6
    if offres_mode == "simulated" and abs(offres_delta) < 50.0 * params.gamma:
        raise ConfigError(
            "[sim] offres_detuning_mhz too small: need at least 50 linewidths"
        )
    workers = get("sim", "workers", int)
    if workers < 1:
        raise ConfigError("[sim] workers must be >= 1")

    n_min = get("sweep", "n_min", int)
    n_max = get("sweep", "n_max", int)
    if n_min < 0 or n_max < n_min:
        raise ConfigError("[sweep] need 0 <= n_min <= n_max")
    theta_points = get("sweep", "theta_points", int)
    fm_points = get("sweep", "fm_points", int)
    if theta_points < 2 or fm_points < 2:
        raise ConfigError("[sweep] theta_points and fm_points must be >= 2")
    fm_max = get("sweep", "fm_max_mhz", float) * 1e6
    if fm_max <= 0.0:
        raise ConfigError("[sweep] fm_max_mhz must be positive")
    duty_min = get("sweep", "duty_min", float)
    duty_max = get("sweep", "duty_max", float)
    duty_step = get("sweep", "duty_step", float)
    if not (0.0 < duty_min < duty_max < 1.0):
        raise ConfigError("[sweep] need 0 < duty_min < duty_max < 1")
    if duty_step <= 0.0:
        raise ConfigError("[sweep] duty_step must be positive")

    cal_a_db = get("calibration", "attenuation_db", float)
    if cal_a_db > 0.0:
        raise ConfigError("[calibration] attenuation_db must be <= 0")
    cal_g_db = get("calibration", "gain_db", float)
    if cal_g_db < 0.0:
        raise ConfigError("[calibration] gain_db must be >= 0")
    cal_probe = get("calibration", "probe_rabi_rel", float)
    if not 0.0 < cal_probe <= 0.1:
        raise ConfigError("[calibration] probe_rabi_rel must lie in (0, 0.1] "
                          "(weak-probe circle fit)")
    cal_span = get("calibration", "span_gamma", float)
    if cal_span < 20.0:
        raise ConfigError("[calibration] span_gamma must be >= 20")
    cal_points = get("calibration", "points", int)
    if cal_points < 50:
        raise ConfigError("[calibration] points must be >= 50")
    cal_ppoints = get("calibration", "power_points", int)
    if cal_ppoints < 8:
        raise ConfigError("[calibration] power_points must be >= 8")
    cal_pmin = get("calibration", "power_rabi_min_rel", float)
    cal_pmax = get("calibration", "power_rabi_max_rel", float)
    if not 0.0 < cal_pmin < cal_pmax:
        raise ConfigError("[calibration] need 0 < power_rabi_min_rel < "
                          "power_rabi_max_rel")
    if math.log10((cal_pmax / cal_pmin) ** 2) < 3.0:
        raise ConfigError("[calibration] power sweep must span >= 3 decades")
    cal_noise = get("calibration", "noise_sigma_rel", float)
    if cal_noise < 0.0:
        raise ConfigError("[calibration] noise_sigma_rel must be >= 0")
    cal_center = get("calibration", "center_offset_mhz", float) * 1e6 * TWO_PI

    return RunConfig(
        params=params,
        line=line,
        spec=spec,
        delta=TWO_PI * get("sim", "detuning_mhz", float) * 1e6,
        dt_max=None if dt_ns is None else dt_ns * 1e-9,
        t_f=t_f,
        offres_mode=offres_mode,
        offres_delta=offres_delta,
        workers=workers,
        n_min=n_min,
        n_max=n_max,
        theta_points=theta_points,
        fm_points=fm_points,
        fm_max=fm_max,
        duty_min=duty_min,
        duty_max=duty_max,
        duty_step=duty_step,
        cal_a_db=cal_a_db,
        cal_g_db=cal_g_db,
        cal_probe_rel=cal_probe,
        cal_span_gamma=cal_span,
        cal_points=cal_points,
        cal_power_points=cal_ppoints,
        cal_power_min_rel=cal_pmin,
        cal_power_max_rel=cal_pmax,
        cal_noise_rel=cal_noise,
        cal_center_offset=cal_center,
        out_dir=get("output", "out_dir", str),
    )
