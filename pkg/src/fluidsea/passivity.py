"""Closed-form and numerical passivity analysis of the observer loop.

A linear time-invariant one-port is passive iff its admittance Y(s)

  (i)   has no poles in the open right half plane,
  (ii)  has only simple imaginary-axis poles, each with positive real
        residue, and
  (iii) satisfies Re Y(j omega) >= 0 for all omega.

For the motor plant under a first-order disturbance observer the admittance
is

    Y(s) = s (s + lambda) /
           (m s^3 + (lambda m_n + b) s^2 + (k + lambda b_n) s + lambda k_n)

and the three criteria reduce to closed-form bounds on the nominal-plant
coefficients:

    m_n >= m - b/lambda      and      0 <= k_n <= k + lambda b_n.

This module builds Y(s), evaluates the bounds, runs the three-criteria
numeric test (grid sweep plus an exact even-polynomial certificate for
criterion (iii)), and provides the closed-form endpoint impedance under
proportional internal or external force feedback together with its
low-frequency limits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lti import (
    AXIS_RTOL,
    EvaluationError,
    FrequencyGrid,
    Polynomial,
    RationalTF,
    residues_at_imag_poles,
)
from .plant import PlantParams

__all__ = [
    "LowFrequencyLimits",
    "NominalBounds",
    "PassivityReport",
    "check_passive",
    "dob_admittance",
    "endpoint_impedance_ff",
    "low_freq_limits",
    "nominal_bounds",
    "real_part_certificate",
]


def dob_admittance(
    params: PlantParams, nominal, lam: float
) -> RationalTF:
    """Driving-point admittance V/F_p of the motor plant under the observer.

    ``nominal`` supplies the inverse nominal plant coefficients; it may be a
    DOBConfig or any object with attributes m_n, b_n, k_n. Coefficients of
    the returned transfer function are exact in the given parameters (the
    stored form is monic-denominator normalized). With k_n = 0 the origin
    pole cancels against the numerator zero; use ``.reduced()`` for the
    cancelled form.
    """
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    m_n, b_n, k_n = nominal.m_n, nominal.b_n, nominal.k_n
    num = Polynomial([1.0, lam, 0.0])
    den = Polynomial(
        [params.m, lam * m_n + params.b, params.k + lam * b_n, lam * k_n]
    )
    return RationalTF(num, den)


@dataclass(frozen=True)
class NominalBounds:
    """Closed-form passivity bounds on the nominal plant coefficients.

    m_n_min : least passive nominal inertia, m - b/lambda
    b_n_min : least passive nominal damping, -k/lambda
    plus the stiffness cap k_n <= k + lambda b_n (clipped at zero) and the
    auxiliary Routh-Hurwitz cap k_n <= (lambda m_n + b)(lambda b_n + k) /
    (lambda m), which the main bounds imply.
    """

    m: float
    b: float
    k: float
    lam: float
    m_n_min: float
    b_n_min: float

    def k_n_max(self, b_n: float) -> float:
        """Largest passive nominal stiffness for a given nominal damping."""
        return max(self.k + self.lam * b_n, 0.0)

    def k_n_routh_cap(self, m_n: float, b_n: float) -> float:
        """Right-half-plane (Routh-Hurwitz) stiffness cap, for reference."""
        return (self.lam * m_n + self.b) * (self.lam * b_n + self.k) / (
            self.lam * self.m
        )

    def contains(self, m_n: float, b_n: float, k_n: float) -> bool:
        """Membership in the closed passive region."""
        return (
            m_n >= self.m_n_min
            and 0.0 <= k_n <= self.k + self.lam * b_n
        )


def nominal_bounds(m: float, b: float, k: float, lam: float) -> NominalBounds:
    """Passive ranges of (m_n, b_n, k_n) for given motor plant and cutoff."""
    if m <= 0 or lam <= 0:
        raise ValueError("m and lambda must be > 0")
    if b < 0 or k < 0:
        raise ValueError("b and k must be >= 0")
    return NominalBounds(
        m=m, b=b, k=k, lam=lam, m_n_min=m - b / lam, b_n_min=-k / lam
    )


def real_part_certificate(tf: RationalTF) -> Polynomial:
    """Numerator of Re tf(j omega) as a polynomial in u = omega^2.

    Re tf(j w) = N(w) / |den(j w)|^2 with N even in w; this returns N as a
    polynomial in u = w^2, computed exactly from the coefficient products
    Re(j^(k-l)) a_k b_l. Nonnegativity of the returned polynomial on u >= 0
    is equivalent to criterion (iii).
    """
    a = tf.num.coeffs[::-1]  # ascending
    b = tf.den.coeffs[::-1]
    max_u = (len(a) - 1 + len(b) - 1) // 2
    out = np.zeros(max_u + 1)
    for kk, ak in enumerate(a):
        if ak == 0.0:
            continue
        for ll, bl in enumerate(b):
            if bl == 0.0 or (kk - ll) % 2 != 0:
                continue
            sign = -1.0 if ((kk - ll) // 2) % 2 else 1.0
            out[(kk + ll) // 2] += sign * ak * bl
    return Polynomial(out[::-1])


@dataclass(frozen=True)
class PassivityReport:
    """Outcome of the three-criteria test on a tested admittance."""

    rhp_poles: tuple
    imag_pole_issues: tuple
    min_real_part: tuple  # (omega_at_min, min Re Y over candidates)
    verdict: str          # "passive" | "non-passive"
    first_violation: str | None
    sweep: tuple | None = None  # (omegas, Re Y) for reporting

    @property
    def is_passive(self) -> bool:
        return self.verdict == "passive"

    def to_text(self) -> str:
        lines = [
            f"verdict: {self.verdict}",
            f"right-half-plane poles: {list(self.rhp_poles) or 'none'}",
            f"imaginary-pole issues: {list(self.imag_pole_issues) or 'none'}",
            "min Re Y(jw) = {:.6e} at w = {:.6e} rad/s".format(
                self.min_real_part[1], self.min_real_part[0]
            ),
        ]
        if self.first_violation:
            lines.append(f"first violated criterion: {self.first_violation}")
        return "\n".join(lines)

    def sweep_csv(self, path) -> None:
        if self.sweep is None:
            raise ValueError("report carries no sweep data")
        omegas, re_y = self.sweep
        with open(path, "w", newline="") as fh:
            fh.write("omega,re_Y\n")
            np.savetxt(fh, np.column_stack([omegas, re_y]), fmt="%.9g", delimiter=",")


def _default_grid() -> FrequencyGrid:
    return FrequencyGrid.log_spaced(1e-2, 1e4, 400)


def check_passive(tf: RationalTF, grid: FrequencyGrid | None = None) -> PassivityReport:
    """Apply the three LTI passivity criteria to a transfer function.

    Criterion (i) uses the pole set of the reduced transfer function,
    (ii) the residues at simple imaginary-axis poles, and (iii) a grid
    minimum of Re tf(j omega) backed by the exact even-polynomial
    certificate, so narrow violations between grid points are still caught.
    Grid points that coincide with poles are skipped and reported.
    """
    if grid is None:
        grid = _default_grid()
    red = tf.reduced()
    violations: list[str] = []

    poles = red.poles()
    rhp = tuple(p for p in poles if p.real >= AXIS_RTOL * max(1.0, abs(p)))
    if rhp:
        violations.append("(i) poles in the right half plane")

    issues = []
    for item in residues_at_imag_poles(red):
        if not item.simple:
            issues.append(f"non-simple imaginary pole at {item.pole}")
        elif item.residue.real <= 0.0:
            issues.append(
                f"imaginary pole at {item.pole} with non-positive residue real part "
                f"{item.residue.real:.3e}"
            )
    if issues:
        violations.append("(ii) imaginary poles not simple/positive-residue")

    # Criterion (iii): sweep plus certificate roots as extra candidates.
    cert = real_part_certificate(red)
    candidates = list(grid.omegas)
    cscale = np.max(np.abs(cert.coeffs))
    if cert.degree >= 1 and cscale > 0:
        for r in cert.roots():
            if abs(r.imag) < 1e-7 * max(1.0, abs(r)) and r.real > 0:
                candidates.append(float(np.sqrt(r.real)))
        # midpoints around roots catch sign dips between them
        extra = []
        pos = sorted(c for c in candidates if c > 0)
        for w1, w2 in zip(pos[:-1], pos[1:]):
            extra.append(np.sqrt(w1 * w2))
        candidates.extend(extra)

    skipped = []
    sweep_re = np.full(len(grid), np.nan)
    min_re, min_w = np.inf, np.nan
    for idx, w in enumerate(candidates):
        try:
            re_y = red.eval(w).real
        except EvaluationError:
            skipped.append(w)
            continue
        if idx < len(grid):
            sweep_re[idx] = re_y
        if re_y < min_re:
            min_re, min_w = re_y, w

    # Tolerance: admit tiny negative values from rounding, scaled by the
    # largest response magnitude seen.
    scale = np.nanmax(np.abs(sweep_re)) if np.any(np.isfinite(sweep_re)) else 1.0
    tol = 1e-9 * max(1.0, scale)
    if min_re < -tol:
        violations.append("(iii) Re Y(jw) < 0")

    verdict = "passive" if not violations else "non-passive"
    if skipped:
        issues = list(issues) + [f"skipped pole-on-grid points: {skipped}"]
    return PassivityReport(
        rhp_poles=rhp,
        imag_pole_issues=tuple(issues),
        min_real_part=(float(min_w), float(min_re)),
        verdict=verdict,
        first_violation=violations[0] if violations else None,
        sweep=(grid.omegas.copy(), sweep_re),
    )


# ---------------------------------------------------------------------------
# Endpoint impedance under proportional force feedback
# ---------------------------------------------------------------------------


def _det3(A: list[list[Polynomial]]) -> Polynomial:
    """Determinant of a 3x3 matrix with polynomial entries."""
    a, b, c = A[0]
    d, e, f = A[1]
    g, h, i = A[2]
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)


def endpoint_impedance_ff(
    params: PlantParams, K_f: float, source: str = "internal"
) -> RationalTF:
    """Endpoint impedance Z_e(s) = F_e / V_e under proportional force feedback.

    The linearized plant (hysteresis ignored) is solved as the 3x3 polynomial
    network in (X, X_e, F_p) with F_a = K_f F_p (internal) or K_f F_e
    (external), by symbolic Cramer elimination, then reduced. K_f = 0 gives
    the passive endpoint impedance.
    """
    if source not in ("internal", "external"):
        raise ValueError("source must be 'internal' or 'external'")
    M = Polynomial([params.m, params.b, params.k])
    E = Polynomial([params.m_e, params.b_e, params.k_e])
    L = Polynomial([params.b_s, params.k_s])
    one = Polynomial([1.0])

    # Rows act on (X, X_e, F_p); right-hand side is (r0, r1, r2) * F_e.
    if source == "internal":
        rows = [
            [M, Polynomial([0.0]), Polynomial([-(1.0 + K_f)])],
            [Polynomial([0.0]), E, one],
            [-1.0 * L, L, Polynomial([-1.0])],
        ]
        rhs = (Polynomial([0.0]), one, Polynomial([0.0]))
    else:
        rows = [
            [M, Polynomial([0.0]), Polynomial([-1.0])],
            [Polynomial([0.0]), E, one],
            [-1.0 * L, L, Polynomial([-1.0])],
        ]
        rhs = (Polynomial([K_f]), one, Polynomial([0.0]))

    det_a = _det3(rows)
    col = [[rows[r][c] for c in range(3)] for r in range(3)]
    for r in range(3):
        col[r][1] = rhs[r]
    det_xe = _det3(col)
    # Z = F_e / (s X_e) = det(A) / (s det_xe)
    den = Polynomial(np.polymul([1.0, 0.0], det_xe.coeffs))
    return RationalTF(det_a, den).reduced()


@dataclass(frozen=True)
class LowFrequencyLimits:
    """Closed-form low-frequency endpoint stiffness limits [Nm/rad].

    general : exact limit of s Z_e(s) under internal feedback at gain K_f
    nonbackdrivable : the k >> k_s, k_e regime (k_s + k_e)
    backdrivable : the k_s >> k, k_e regime (k/(1+K_f) + k_e)
    """

    K_f: float
    general: float
    nonbackdrivable: float
    backdrivable: float


def low_freq_limits(params: PlantParams, K_f: float = 1.0) -> LowFrequencyLimits:
    """Low-frequency stiffness rendered at the endpoint under internal feedback.

    ``general`` equals the s -> 0 limit of s * endpoint_impedance_ff
    (internal, K_f); at K_f = 1 it reduces the driving-point stiffness k by
    half in the backdrivable regime and not at all in the non-backdrivable
    regime.
    """
    k, k_e, k_s = params.k, params.k_e, params.k_s
    general = k_e + k * k_s / ((1.0 + K_f) * k_s + k)
    return LowFrequencyLimits(
        K_f=K_f,
        general=general,
        nonbackdrivable=k_s + k_e,
        backdrivable=k / (1.0 + K_f) + k_e,
    )
