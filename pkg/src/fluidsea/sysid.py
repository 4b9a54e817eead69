"""Nonparametric frequency-response estimation and rational-model fitting.

The identification pipeline mirrors the hardware procedure at desk scale:
excite the passive plant with a logarithmic torque chirp, estimate
frequency-response functions with 1-sigma bands by the Blackman-Tukey method
(windowed sample correlations transformed to the frequency domain), fit a
2-zero/4-pole rational model to the endpoint response, and fit the three
sub-plant responses directly for the lumped parameters.

Defaults declared here rather than inherited from any experiment: Hann lag
window with maximum lag one eighth of the record, chirp records of 600 s at
dt = 1/2000 s, evaluation grid log-spaced 0.01 Hz to 1000 Hz at 60 points
per decade.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lti import FrequencyGrid, Polynomial, RationalTF
from .plant import DEFAULT_DT, PlantParams, SimTrace, simulate
from .signals import ChirpSpec

__all__ = [
    "ChirpSpec",
    "FitSpec",
    "FrequencyResponse",
    "SubPlantFit",
    "SysIdResult",
    "chirp",
    "default_grid",
    "estimate_frf",
    "extract_params",
    "fit_tf",
    "run_sysid",
]


def default_grid() -> FrequencyGrid:
    """Log grid 0.01 Hz to 1000 Hz, 60 points per decade, in rad/s."""
    f = np.logspace(np.log10(0.01), np.log10(1000.0), 301)
    return FrequencyGrid(2.0 * np.pi * f)


def chirp(spec: ChirpSpec, dt: float, allow_nyquist: bool = False) -> np.ndarray:
    """Sampled logarithmic torque sweep u(k dt), k = 0 .. duration/dt - 1.

    Warns when the end frequency exceeds 80% of the sampling Nyquist rate
    and raises :class:`~fluidsea.signals.NyquistViolationError` when it
    reaches Nyquist, unless ``allow_nyquist`` overrides.
    """
    return spec.sample(dt, allow_nyquist=allow_nyquist)


@dataclass
class FrequencyResponse:
    """Complex response samples on a frequency grid with 1-sigma bands.

    sigma holds the per-point one-sigma magnitude uncertainty; ``valid``
    flags points where the input spectrum was above the numerical floor.
    """

    grid: FrequencyGrid
    H: np.ndarray
    sigma: np.ndarray
    valid: np.ndarray = field(default=None)

    def __post_init__(self):
        if not isinstance(self.grid, FrequencyGrid):
            self.grid = FrequencyGrid(self.grid)
        self.H = np.asarray(self.H, dtype=complex)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.valid is None:
            self.valid = np.ones(len(self.grid), dtype=bool)
        if not (len(self.grid) == self.H.size == self.sigma.size == self.valid.size):
            raise ValueError("grid/H/sigma/valid lengths differ")
        if np.any(self.sigma[self.valid] < 0):
            raise ValueError("sigma must be >= 0")

    @property
    def omegas(self) -> np.ndarray:
        return self.grid.omegas

    def mag_db(self) -> np.ndarray:
        return 20.0 * np.log10(np.abs(self.H))

    def phase_deg(self) -> np.ndarray:
        return np.degrees(np.unwrap(np.angle(self.H)))

    def to_csv(self, path) -> None:
        with np.errstate(divide="ignore"):
            data = np.column_stack(
                [
                    self.omegas,
                    self.H.real,
                    self.H.imag,
                    self.mag_db(),
                    self.phase_deg(),
                    self.sigma,
                ]
            )
        data[~self.valid, 1:] = np.nan
        with open(path, "w", newline="") as fh:
            fh.write("omega_rad_s,re,im,mag_db,phase_deg,sigma_mag\n")
            np.savetxt(fh, data, fmt="%.9g", delimiter=",")

    @classmethod
    def from_tf(cls, tf: RationalTF, grid: FrequencyGrid) -> "FrequencyResponse":
        H = tf.eval_grid(grid.omegas)
        return cls(grid, H, np.zeros(len(grid)))


def _linear_correlation(a: np.ndarray, b: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased sample correlation R_ab(tau) = (1/N) sum a[n+tau] b[n].

    Returned for tau = -max_lag .. max_lag via zero-padded FFT, so delaying
    both signals together only rescales all lags uniformly.
    """
    n = a.size
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    fa = np.fft.rfft(a, nfft)
    fb = np.fft.rfft(b, nfft)
    full = np.fft.irfft(fa * np.conj(fb), nfft) / n
    pos = full[: max_lag + 1]
    neg = full[nfft - max_lag:]
    return np.concatenate([neg, pos])


def estimate_frf(
    u: np.ndarray,
    y: np.ndarray,
    dt: float,
    grid: FrequencyGrid,
    max_lag: int | None = None,
) -> FrequencyResponse:
    """Blackman-Tukey frequency-response estimate H = Phi_yu / Phi_uu.

    Cross- and auto-spectra come from biased sample correlations tapered by
    a Hann lag window of half-width ``max_lag`` (default: one eighth of the
    record length) and transformed at the requested grid frequencies. The
    1-sigma magnitude band uses the standard coherence-based expression

        sigma/|H| = sqrt((1 - gamma^2) / (2 n_eff gamma^2)),

    with the effective number of independent segments n_eff = N / max_lag.
    Grid points where Phi_uu falls below 1e-12 of its peak are marked
    invalid.
    """
    u = np.asarray(u, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if u.size != y.size:
        raise ValueError("u and y must have equal length")
    n = u.size
    if max_lag is None:
        max_lag = n // 8
    if n < 2 * max_lag:
        raise ValueError("record too short for the requested max lag")

    r_uu = _linear_correlation(u, u, max_lag)
    r_yu = _linear_correlation(y, u, max_lag)
    r_yy = _linear_correlation(y, y, max_lag)

    taus = np.arange(-max_lag, max_lag + 1)
    window = 0.5 * (1.0 + np.cos(np.pi * taus / max_lag))
    wu = window * r_uu
    wyu = window * r_yu
    wy = window * r_yy
    tgrid = taus * dt

    m = len(grid)
    phi_uu = np.empty(m)
    phi_yy = np.empty(m)
    phi_yu = np.empty(m, dtype=complex)
    for i, w in enumerate(grid.omegas):
        e = np.exp(-1j * w * tgrid)
        phi_uu[i] = np.real(np.dot(e, wu)) * dt
        phi_yy[i] = np.real(np.dot(e, wy)) * dt
        phi_yu[i] = np.dot(e, wyu) * dt

    floor = 1e-12 * np.max(np.abs(phi_uu))
    valid = np.abs(phi_uu) > floor
    H = np.zeros(m, dtype=complex)
    H[valid] = phi_yu[valid] / phi_uu[valid]

    n_eff = n / max_lag
    denom = np.where(valid, np.abs(phi_uu * phi_yy), np.inf)
    gamma2 = np.clip(np.abs(phi_yu) ** 2 / np.maximum(denom, 1e-300), 1e-12, 1.0)
    sigma = np.abs(H) * np.sqrt((1.0 - gamma2) / (2.0 * n_eff * gamma2))
    sigma[~valid] = np.inf
    return FrequencyResponse(grid, H, np.where(valid, sigma, 0.0), valid)


# ---------------------------------------------------------------------------
# Rational-model fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitSpec:
    """Order and band for the whole-system rational fit."""

    n_zeros: int = 2
    n_poles: int = 4
    band: tuple = (0.0, 400.0)
    weighting: str = "inverse_variance"

    def __post_init__(self):
        if self.n_zeros >= self.n_poles:
            raise ValueError("require n_zeros < n_poles")
        if self.weighting not in ("inverse_variance", "uniform"):
            raise ValueError("weighting must be 'inverse_variance' or 'uniform'")


@dataclass
class FitReport:
    residual: float
    iterations: int
    converged: bool


class FitError(RuntimeError):
    """Rational fit failed (rank deficiency or too few valid points)."""


def _base_weights(frf: FrequencyResponse, sel: np.ndarray, spec: FitSpec) -> np.ndarray:
    if spec.weighting == "uniform":
        return np.ones(int(np.sum(sel)))
    sig = frf.sigma[sel]
    floor = 1e-3 * np.median(np.abs(frf.H[sel])) + 1e-300
    sig = np.maximum(sig, floor)
    return 1.0 / sig**2


def fit_tf(
    frf: FrequencyResponse,
    spec: FitSpec = FitSpec(),
    max_iter: int = 30,
    rel_tol: float = 1e-8,
    reflect_unstable: bool = False,
):
    """Iteratively reweighted linear least-squares rational fit.

    Uses Sanathanan-Koerner reweighting: each pass solves the linearized
    problem min sum W |N(jw) - D(jw) H|^2 with W divided by |D_prev(jw)|^2,
    monic highest denominator coefficient, frequencies pre-scaled for
    conditioning. Iteration stops after ``max_iter`` passes, when the
    parameter vector moves less than ``rel_tol``, or when the true weighted
    residual stops improving (the best model seen is returned, so the
    reported residual is non-increasing).

    Returns (RationalTF, FitReport).

    Raises
    ------
    FitError
        If fewer than 4 (n_poles + n_zeros) valid points lie in the band or
        the normal equations are rank deficient.
    """
    w_all = frf.omegas
    sel = frf.valid & (w_all >= spec.band[0]) & (w_all <= spec.band[1])
    if np.sum(sel) < 4 * (spec.n_poles + spec.n_zeros):
        raise FitError(
            f"only {int(np.sum(sel))} valid points in band, need "
            f">= {4 * (spec.n_poles + spec.n_zeros)}"
        )
    w = w_all[sel]
    H = frf.H[sel]
    base_w = _base_weights(frf, sel, spec)

    scale = np.exp(np.mean(np.log(w)))  # geometric mean for conditioning
    s = 1j * w / scale
    nz, npo = spec.n_zeros, spec.n_poles

    # Unknowns: numerator c_0..c_nz (descending), denominator d_1..d_npo
    # (descending, after the fixed monic leading 1).
    def design(dprev_abs2):
        wt = np.sqrt(base_w / dprev_abs2)
        cols = []
        for i in range(nz + 1):
            cols.append(wt * s ** (nz - i))
        for i in range(1, npo + 1):
            cols.append(-wt * H * s ** (npo - i))
        A = np.column_stack(cols)
        rhs = wt * H * s**npo
        return (
            np.vstack([A.real, A.imag]),
            np.concatenate([rhs.real, rhs.imag]),
        )

    dprev_abs2 = np.ones_like(w)
    theta_prev = None
    best = None
    best_res = np.inf
    iterations = 0
    converged = False
    for it in range(max_iter):
        iterations = it + 1
        A, rhs = design(dprev_abs2)
        theta, _, rank, _ = np.linalg.lstsq(A, rhs, rcond=None)
        if rank < A.shape[1]:
            raise FitError(
                f"rank-deficient normal equations (rank {rank} of {A.shape[1]}); "
                "condition the grid or lower the model order"
            )
        num_c = theta[: nz + 1]
        den_c = np.concatenate([[1.0], theta[nz + 1:]])
        dvals = np.polyval(den_c, s)
        res = float(
            np.sqrt(
                np.sum(base_w * np.abs(np.polyval(num_c, s) / dvals - H) ** 2)
                / np.sum(base_w)
            )
        )
        if res < best_res:
            best_res = res
            best = (num_c.copy(), den_c.copy())
        if theta_prev is not None:
            change = np.linalg.norm(theta - theta_prev) / max(
                np.linalg.norm(theta), 1e-300
            )
            if change < rel_tol:
                converged = True
                break
        if res > 1.01 * best_res and it > 2:
            break  # reweighting stopped helping; keep the best model
        theta_prev = theta
        dprev_abs2 = np.maximum(np.abs(dvals) ** 2, 1e-30)

    num_c, den_c = best
    # Undo the frequency scaling: coefficient of s^k gains scale^-k.
    num_u = num_c * scale ** -(np.arange(nz, -1, -1, dtype=float))
    den_u = den_c * scale ** -(np.arange(npo, -1, -1, dtype=float))
    tf = RationalTF(Polynomial(num_u), Polynomial(den_u))

    if reflect_unstable:
        poles = tf.poles()
        if np.any(poles.real > 0):
            reflected = np.where(poles.real > 0, -poles.conj(), poles)
            den_r = np.real(np.poly(reflected))
            dvals = np.polyval(den_r, 1j * w)
            wt = np.sqrt(base_w)
            cols = [wt * (1j * w) ** (nz - i) / dvals for i in range(nz + 1)]
            A = np.column_stack(cols)
            rhs = wt * H
            theta, _, _, _ = np.linalg.lstsq(
                np.vstack([A.real, A.imag]),
                np.concatenate([rhs.real, rhs.imag]),
                rcond=None,
            )
            tf = RationalTF(Polynomial(theta), Polynomial(den_r))
            best_res = float(
                np.sqrt(
                    np.sum(base_w * np.abs(tf.eval_grid(w) - H) ** 2) / np.sum(base_w)
                )
            )

    return tf, FitReport(residual=best_res, iterations=iterations, converged=converged)


# ---------------------------------------------------------------------------
# Sub-plant parameter extraction
# ---------------------------------------------------------------------------


@dataclass
class SubPlantFit:
    """Weighted least-squares fit of one lumped sub-plant."""

    coeffs: np.ndarray
    residual: float


@dataclass
class SysIdExtraction:
    params: PlantParams
    motor: SubPlantFit
    finger: SubPlantFit
    line: SubPlantFit
    flagged: bool

    def report_text(self) -> str:
        p = self.params
        lines = [
            "sub-plant weighted least-squares fits",
            f"motor   : m={p.m:.6e}  b={p.b:.6e}  k={p.k:.6e}  resid={self.motor.residual:.3e}",
            f"finger  : m_e={p.m_e:.6e}  b_e={p.b_e:.6e}  k_e={p.k_e:.6e}  resid={self.finger.residual:.3e}",
            f"line    : b_s={p.b_s:.6e}  k_s={p.k_s:.6e}  resid={self.line.residual:.3e}",
            f"flagged : {self.flagged}",
        ]
        return "\n".join(lines)


def _weighted_lstsq(A: np.ndarray, rhs: np.ndarray, wts: np.ndarray):
    Aw = A * wts[:, None]
    rw = rhs * wts
    theta, _, rank, _ = np.linalg.lstsq(
        np.vstack([Aw.real, Aw.imag]), np.concatenate([rw.real, rw.imag]), rcond=None
    )
    if rank < A.shape[1]:
        raise FitError("rank-deficient sub-plant fit")
    fit = A @ theta
    resid = float(
        np.sqrt(np.sum((wts * np.abs(fit - rhs)) ** 2) / np.sum(wts**2))
    )
    return theta, resid


def _second_order_inverse_fit(frf: FrequencyResponse, band) -> SubPlantFit:
    """Fit H ~ 1/(m s^2 + b s + k) via the relative equation error.

    Minimizes sum w |(m s^2 + b s + k) H - 1|^2, which is linear in the
    parameters and exact for noiseless data.
    """
    sel = frf.valid & (frf.omegas >= band[0]) & (frf.omegas <= band[1])
    w = frf.omegas[sel]
    H = frf.H[sel]
    s = 1j * w
    A = np.column_stack([H * s**2, H * s, H])
    wts = _band_weights(frf, sel)
    theta, resid = _weighted_lstsq(A, np.ones_like(H), wts)
    return SubPlantFit(coeffs=theta, residual=resid)


def _line_fit(frf: FrequencyResponse, band) -> SubPlantFit:
    """Fit H ~ b_s s + k_s directly (linear in both parameters)."""
    sel = frf.valid & (frf.omegas >= band[0]) & (frf.omegas <= band[1])
    w = frf.omegas[sel]
    H = frf.H[sel]
    A = np.column_stack([1j * w, np.ones_like(H)])
    wts = _band_weights(frf, sel)
    theta, resid = _weighted_lstsq(A, H, wts)
    # Normalize the residual by the response scale so thresholds are
    # comparable with the inverse fits.
    scale = float(np.median(np.abs(H))) or 1.0
    return SubPlantFit(coeffs=theta, residual=resid / scale)


def _band_weights(frf: FrequencyResponse, sel: np.ndarray) -> np.ndarray:
    sig = frf.sigma[sel]
    floor = 1e-3 * np.median(np.abs(frf.H[sel])) + 1e-300
    return 1.0 / np.maximum(sig, floor)


def extract_params(
    motor: FrequencyResponse,
    finger: FrequencyResponse,
    line: FrequencyResponse,
    band=(0.1, 400.0),
    residual_threshold: float = 0.05,
) -> SysIdExtraction:
    """Lumped parameters from the three sub-plant frequency responses.

    motor : X / F_p, fit to 1/(m s^2 + b s + k)
    finger : X_e / (F_e - F_p), fit to 1/(m_e s^2 + b_e s + k_e)
    line : F_p / (X_e - X), fit to b_s s + k_s

    All three fits are frequency-weighted linear least squares restricted to
    ``band``; a sub-fit whose relative residual exceeds
    ``residual_threshold`` flags the parameter set (nonlinearity or a poor
    record), without blocking the return.
    """
    mf = _second_order_inverse_fit(motor, band)
    ff = _second_order_inverse_fit(finger, band)
    lf = _line_fit(line, band)
    m, b, k = (float(v) for v in mf.coeffs)
    m_e, b_e, k_e = (float(v) for v in ff.coeffs)
    b_s, k_s = (float(v) for v in lf.coeffs)
    flagged = max(mf.residual, ff.residual, lf.residual) > residual_threshold
    params = PlantParams(
        m=m, b=b, k=k, m_e=m_e, b_e=b_e, k_e=k_e, b_s=b_s, k_s=k_s
    )
    return SysIdExtraction(params=params, motor=mf, finger=ff, line=lf, flagged=flagged)


# ---------------------------------------------------------------------------
# End-to-end pipeline
# ---------------------------------------------------------------------------


@dataclass
class SysIdResult:
    trace: SimTrace
    motor_frf: FrequencyResponse
    finger_frf: FrequencyResponse
    line_frf: FrequencyResponse
    endpoint_frf: FrequencyResponse
    extraction: SysIdExtraction
    whole_fit: RationalTF
    whole_report: FitReport


def run_sysid(
    params: PlantParams,
    spec: ChirpSpec | None = None,
    dt: float = DEFAULT_DT,
    grid: FrequencyGrid | None = None,
    fit_spec: FitSpec = FitSpec(),
    noise_std: float = 0.0,
    rng=None,
) -> SysIdResult:
    """Chirp-excited identification of the simulated plant.

    Runs the passive chirp experiment, estimates the three sub-plant
    responses and the whole endpoint response, extracts the lumped
    parameters, and fits the 2-zero/4-pole endpoint model. Optional additive
    measurement noise (standard deviation ``noise_std``, applied to the
    recorded signals) is drawn from the supplied deterministic generator.
    """
    if spec is None:
        spec = ChirpSpec(amplitude=0.3, f0=0.01, f1=1000.0, duration=600.0)
    if grid is None:
        grid = default_grid()
    spec.validate_sampling(dt, allow_nyquist=True)
    trace = simulate(params, None, spec, None, duration=spec.duration, dt=dt)

    def measured(name):
        sig = trace.column(name).copy()
        if noise_std > 0.0:
            if rng is None:
                raise ValueError("noise injection requires a generator")
            sig += noise_std * rng.normal_array(sig.size)
        return sig

    x = measured("x")
    x_e = measured("x_e")
    f_p = measured("F_p")
    f_e = measured("F_e")

    motor_frf = estimate_frf(f_p, x, dt, grid)
    finger_frf = estimate_frf(f_e - f_p, x_e, dt, grid)
    line_frf = estimate_frf(x_e - x, f_p, dt, grid)
    endpoint_frf = estimate_frf(f_e, x_e, dt, grid)

    extraction = extract_params(motor_frf, finger_frf, line_frf)
    whole_fit, whole_report = fit_tf(endpoint_frf, fit_spec)
    return SysIdResult(
        trace=trace,
        motor_frf=motor_frf,
        finger_frf=finger_frf,
        line_frf=line_frf,
        endpoint_frf=endpoint_frf,
        extraction=extraction,
        whole_fit=whole_fit,
        whole_report=whole_report,
    )
