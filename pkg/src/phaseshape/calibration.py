"""Synthetic spectroscopy and the full parameter-extraction chain.

A reflective frequency sweep through the measurement chain reads

    r_all(delta) = sqrt(G*A) * r(delta, Omega) + noise,

so dividing by the far-detuned background recovers the bare reflection
coefficient.  The weak-probe locus of r in the complex plane is a circle
of diameter Gamma/gamma passing through 1 + 0i; an algebraic circle fit
plus a phase-rotation fit extracts (Gamma, gamma, omega10).  A separate
on-resonance power sweep pins the source-referred Rabi constant k_src,
from which attenuation, the chip-referred constant k and the chain gain
follow in closed form:

    A = k_src^2 * hbar * omega_r / (8*pi*Gamma)
    k = sqrt(8*pi*Gamma / (hbar*omega_r))
    G = |r_all_bg|^2 / A
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .core import ConfigError, FitError, LineParams, QubitParams, coupling_k
from .scattering import reflection_ss

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ChainParams:
    """Measurement-chain constants: linear power attenuation and gain,
    plus the source-referred Rabi proportionality constant."""

    a: float
    g: float
    k_src: float

    def __post_init__(self):
        if not 0.0 < self.a <= 1.0:
            raise ConfigError("attenuation a must lie in (0, 1]")
        if self.g < 1.0:
            raise ConfigError("gain g must be >= 1")
        if self.k_src <= 0.0:
            raise ConfigError("k_src must be strictly positive")

    @property
    def a_db(self) -> float:
        return 10.0 * math.log10(self.a)

    @property
    def g_db(self) -> float:
        return 10.0 * math.log10(self.g)


def chain_from_db(a_db: float, g_db: float, params: QubitParams,
                  line: LineParams = LineParams()) -> ChainParams:
    """Chain constants from dB figures; k_src = sqrt(A)*k."""
    a = 10.0 ** (a_db / 10.0)
    return ChainParams(a=a, g=10.0 ** (g_db / 10.0),
                       k_src=math.sqrt(a) * coupling_k(params, line))


@dataclass(frozen=True)
class SpectroscopyTrace:
    """Raw chain-referred reflection samples.

    ``detunings`` is probe frequency minus ``omega_ref`` (rad/s, strictly
    increasing); ``omega_ref`` records the sweep center so absolute
    frequencies survive serialization.
    """

    detunings: np.ndarray = field(repr=False)
    r_all: np.ndarray = field(repr=False)
    source_power: float = 0.0
    omega_ref: float = 0.0

    def __post_init__(self):
        d = np.asarray(self.detunings, dtype=float)
        r = np.asarray(self.r_all, dtype=complex)
        if len(d) != len(r):
            raise ConfigError("detunings and r_all must have equal length")
        if not np.all(np.diff(d) > 0.0):
            raise ConfigError("detunings must be strictly increasing")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(r))):
            raise ConfigError("spectroscopy samples must be finite")
        object.__setattr__(self, "detunings", d)
        object.__setattr__(self, "r_all", r)


def synth_spectroscopy(
    params: QubitParams,
    chain: ChainParams,
    detunings: np.ndarray,
    omega_mag: float,
    noise_sigma: float = 0.0,
    seed: int = 0,
    omega_ref: float | None = None,
) -> SpectroscopyTrace:
    """Generate a chain-referred frequency sweep at fixed drive strength.

    ``detunings`` are relative to ``omega_ref`` (default: the true
    transition frequency, i.e. a perfectly centered sweep).  Complex
    Gaussian noise of per-quadrature std ``noise_sigma`` comes from
    numpy's seeded PCG64 generator (real parts drawn first), so equal
    seeds reproduce traces bit for bit.
    """
    if omega_ref is None:
        omega_ref = params.omega10
    d = np.asarray(detunings, dtype=float)
    delta_true = omega_ref + d - params.omega10
    r = reflection_ss(delta_true, omega_mag, params)
    r_all = math.sqrt(chain.g * chain.a) * np.asarray(r, dtype=complex)
    if noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        r_all = r_all + rng.normal(0.0, noise_sigma, len(d)) \
            + 1j * rng.normal(0.0, noise_sigma, len(d))
    p_src = (omega_mag / chain.k_src) ** 2
    return SpectroscopyTrace(detunings=d, r_all=r_all,
                             source_power=p_src, omega_ref=omega_ref)


def remove_background(trace: SpectroscopyTrace, far_fraction: float = 0.1):
    """Divide out the far-detuned background.

    The background is the mean of the ``far_fraction`` of samples with
    the largest |detuning|.  Returns (r_samples, background).

    Raises:
        FitError: when a resonance is present but the sweep does not
            extend at least ~20 linewidths beyond it on either side.
    """
    d = trace.detunings
    z = trace.r_all
    n_far = max(2, int(round(far_fraction * len(d))))
    far_idx = np.argsort(np.abs(d))[-n_far:]
    background = complex(np.mean(z[far_idx]))
    if background == 0:
        raise FitError("zero background; cannot normalize")
    scale = np.median(np.abs(z))
    spread = float(np.max(np.abs(z - np.mean(z)))) / scale
    if spread > 0.1:
        # a resonance is present; make sure the wings actually reach it
        i_res = int(np.argmax(np.abs(z - background)))
        depth = np.abs(z - background)
        half = depth > 0.5 * depth[i_res]
        width = 0.5 * (d[half].max() - d[half].min())
        gamma_est = max(width, 1e-300) / math.sqrt(3.0)
        one_sided = max(d[-1] - d[i_res], d[i_res] - d[0])
        if one_sided < 20.0 * gamma_est:
            raise FitError(
                "insufficient far-detuned background span: sweep must "
                "extend >= 20 linewidths beyond resonance on at least one side"
            )
    return z / background, background


@dataclass(frozen=True)
class CircleFitResult:
    big_gamma: float
    gamma: float
    omega10: float
    big_gamma_err: float
    gamma_err: float
    omega10_err: float
    center: complex
    radius: float


def _kasa_circle(z: np.ndarray):
    """Algebraic (Kasa) circle fit: returns (center, radius).

    Minimizes sum (|z|^2 + D x + E y + F)^2, a linear least-squares
    problem with no iteration or initial guess.
    """
    x, y = z.real, z.imag
    a_mat = np.column_stack([x, y, np.ones_like(x)])
    rhs = -(x**2 + y**2)
    (d_coef, e_coef, f_coef), *_ = np.linalg.lstsq(a_mat, rhs, rcond=None)
    center = complex(-0.5 * d_coef, -0.5 * e_coef)
    radius = math.sqrt(max(0.25 * (d_coef**2 + e_coef**2) - f_coef, 0.0))
    return center, radius


def circle_fit(
    r_samples: np.ndarray,
    detunings: np.ndarray,
    omega_ref: float = 0.0,
) -> CircleFitResult:
    """Extract (Gamma, gamma, omega10) from a weak-probe reflection locus.

    Stage 1 fits the circle algebraically; stage 2 fits the phase of the
    centered samples to phi0 + 2*arctan((delta - delta0)/gamma).  The
    circle diameter equals Gamma/gamma, closing the system.  Standard
    errors come from linearized residual covariance.

    Raises:
        FitError: fewer than 50 samples, a circle radius within 10x the
            radial noise (degenerate locus), or a span below 6 gamma.
    """
    z = np.asarray(r_samples, dtype=complex)
    d = np.asarray(detunings, dtype=float)
    if len(z) < 50:
        raise FitError("circle fit needs at least 50 samples")
    center, radius = _kasa_circle(z)
    radial = np.abs(z - center)
    noise = float(np.std(radial - radius))
    if radius < 10.0 * noise or radius <= 0.0:
        raise FitError("degenerate circle: radius within 10x the radial noise")

    # initial guesses from the locus geometry
    i0 = int(np.argmax(np.abs(z - 1.0)))
    delta0_init = d[i0]
    dist = np.abs(z - 1.0)
    above = dist > dist[i0] / math.sqrt(2.0)
    gamma_init = 0.5 * (d[above].max() - d[above].min())
    if gamma_init <= 0.0:
        gamma_init = 0.25 * (d[-1] - d[0])
    phi = np.angle(z - center)
    phi0_init = float(phi[i0])

    def residuals(p):
        phi0, gamma, delta0 = p
        model = phi0 + 2.0 * np.arctan((d - delta0) / gamma)
        diff = phi - model
        return np.arctan2(np.sin(diff), np.cos(diff))

    sol = least_squares(residuals, x0=[phi0_init, gamma_init, delta0_init],
                        method="lm", xtol=1e-15, ftol=1e-15)
    if not sol.success:
        raise FitError(f"phase fit failed: {sol.message}")
    _, gamma_fit, delta0_fit = sol.x
    gamma_fit = abs(float(gamma_fit))
    if d[-1] - d[0] < 6.0 * gamma_fit:
        raise FitError("detuning span below 6 linewidths; fit unreliable")

    # 1-sigma errors: phase-fit covariance plus radial scatter for Gamma
    dof = max(len(d) - 3, 1)
    s_sq = 2.0 * sol.cost / dof
    jtj = sol.jac.T @ sol.jac
    try:
        cov = np.linalg.inv(jtj) * s_sq
        gamma_err = math.sqrt(max(cov[1, 1], 0.0))
        delta0_err = math.sqrt(max(cov[2, 2], 0.0))
    except np.linalg.LinAlgError:
        gamma_err = delta0_err = float("inf")
    radius_err = noise / math.sqrt(len(d))
    big_gamma = 2.0 * radius * gamma_fit
    big_gamma_err = 2.0 * math.hypot(gamma_fit * radius_err, radius * gamma_err)
    return CircleFitResult(
        big_gamma=big_gamma,
        gamma=gamma_fit,
        omega10=omega_ref + float(delta0_fit),
        big_gamma_err=big_gamma_err,
        gamma_err=gamma_err,
        omega10_err=delta0_err,
        center=center,
        radius=radius,
    )


def power_sweep_fit(
    r_on: np.ndarray,
    p_src: np.ndarray,
    big_gamma: float,
    gamma: float,
) -> tuple[float, float]:
    """Fit k_src from background-removed on-resonance reflection vs power.

    Model: r(0, Omega) with Omega = k_src*sqrt(P_src); Gamma and gamma
    are held fixed from the circle fit.  Returns (k_src, 1-sigma error).

    The signed on-resonance reflection is monotone in power (its
    magnitude is not: it passes through zero near saturation), so the
    sanity check runs on the real part.

    Raises:
        FitError: under 3 decades of power span, data whose real part is
            not monotone beyond the noise, or a diverged fit.
    """
    p = np.asarray(p_src, dtype=float)
    z = np.asarray(r_on, dtype=complex)
    order = np.argsort(p)
    p, z = p[order], z[order]
    if p[0] <= 0.0:
        raise FitError("source powers must be strictly positive")
    if math.log10(p[-1] / p[0]) < 3.0:
        raise FitError("power sweep must span at least 3 decades")
    x = z.real
    noise = float(np.std(np.diff(x, 2))) / math.sqrt(6.0) if len(x) > 2 else 0.0
    if np.any(np.diff(x) < -max(5.0 * noise, 1e-9)):
        raise FitError("on-resonance reflection is not monotone in power")

    def model(k):
        sat = k * k * p / (gamma * big_gamma)
        return 1.0 - (big_gamma / gamma) / (1.0 + sat)

    # invert the median point for the initial guess
    i_mid = len(p) // 2
    s_mid = (big_gamma / gamma) / max(1.0 - x[i_mid], 1e-12) - 1.0
    s_mid = max(s_mid, 1e-6)
    k_init = math.sqrt(s_mid * gamma * big_gamma / p[i_mid])

    sol = least_squares(lambda k: model(k[0]) - x, x0=[k_init],
                        method="lm", xtol=1e-15, ftol=1e-15)
    if not sol.success or not np.isfinite(sol.x[0]) or sol.x[0] <= 0.0:
        raise FitError(f"power-sweep fit diverged: {sol.message}")
    dof = max(len(p) - 1, 1)
    s_sq = 2.0 * sol.cost / dof
    jtj = float((sol.jac.T @ sol.jac).item())
    k_err = math.sqrt(s_sq / jtj) if jtj > 0.0 else float("inf")
    return float(sol.x[0]), k_err


def derive_chain(
    k_src: float,
    params: QubitParams,
    r_all_bg: complex,
    line: LineParams = LineParams(),
) -> ChainParams:
    """Attenuation, chip-referred k and gain from k_src plus background.

    A = k_src^2*hbar*omega_r/(8*pi*Gamma); G = |r_all_bg|^2/A.  The
    identity k_src = sqrt(A)*k holds by construction and is asserted.
    """
    a = k_src**2 * line.hbar * params.omega10 / (8.0 * math.pi * params.big_gamma)
    k = coupling_k(params, line)
    if not math.isclose(k_src, math.sqrt(a) * k, rel_tol=1e-9):
        raise FitError("internal inconsistency: k_src != sqrt(A)*k")
    g = abs(r_all_bg) ** 2 / a
    return ChainParams(a=a, g=g, k_src=k_src)


def default_detuning_grid(gamma: float, core_span: float = 8.0,
                          wing_span: float = 500.0, n_core: int = 301,
                          n_wing: int = 50) -> np.ndarray:
    """Dense linear core plus log-spaced far wings (units of gamma).

    The wings keep the far-detuned background estimate unbiased: the
    reflection tail approaches 1 only as 1/detuning^2, so averaging at
    ~20 linewidths would still sit ~0.2% off; the 500-linewidth default
    holds the bias near 4e-5.
    """
    core = np.linspace(-core_span, core_span, n_core)
    wing = np.logspace(math.log10(core_span * 1.05), math.log10(wing_span), n_wing)
    grid = np.unique(np.concatenate([-wing[::-1], core, wing]))
    return grid * gamma


# ---------------------------------------------------------------------------
# CSV interchange: columns delta_hz, re, im, p_src_w.  A single file holds
# the frequency sweep (varying delta at the lowest power) and the
# on-resonance power sweep (delta 0, varying power).
# ---------------------------------------------------------------------------

CSV_FIELDS = ("delta_hz", "re", "im", "p_src_w")


def write_spectroscopy_csv(path, trace: SpectroscopyTrace,
                           power_p=None, power_r=None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for d, z in zip(trace.detunings, trace.r_all):
            w.writerow([f"{d / TWO_PI:.11e}", f"{z.real:.11e}",
                        f"{z.imag:.11e}", f"{trace.source_power:.11e}"])
        if power_p is not None:
            for p, z in zip(power_p, power_r):
                w.writerow(["0.0", f"{z.real:.11e}", f"{z.imag:.11e}",
                            f"{p:.11e}"])


def read_spectroscopy_csv(path, omega_ref: float):
    """Read the interchange CSV back into (trace, power_p, power_r).

    Frequency-sweep rows are the ones sharing the lowest power present
    (the weak probe).  Power-sweep rows carry delta_hz = 0 by convention
    (they are taken with the probe parked on resonance) and a power above
    the probe level; they form the returned (power_p, power_r) arrays.
    """
    deltas, res, ims, powers = [], [], [], []
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames is None or tuple(rd.fieldnames) != CSV_FIELDS:
            raise ConfigError(f"spectroscopy CSV must have columns {CSV_FIELDS}")
        for row in rd:
            deltas.append(float(row["delta_hz"]) * TWO_PI)
            res.append(float(row["re"]))
            ims.append(float(row["im"]))
            powers.append(float(row["p_src_w"]))
    deltas = np.asarray(deltas)
    z = np.asarray(res) + 1j * np.asarray(ims)
    powers = np.asarray(powers)
    p_min = powers.min()
    freq_rows = powers == p_min
    if np.count_nonzero(freq_rows) < 2:
        raise ConfigError("no frequency sweep found in CSV (need >= 2 rows "
                          "at the lowest power)")
    order = np.argsort(deltas[freq_rows])
    trace = SpectroscopyTrace(
        detunings=deltas[freq_rows][order],
        r_all=z[freq_rows][order],
        source_power=float(p_min),
        omega_ref=omega_ref,
    )
    power_rows = (deltas == 0.0) & (powers > p_min)
    return trace, powers[power_rows], z[power_rows]
