"""Hamilton-Jacobi norm majorants solved by the method of characteristics.

The majorant of the effective-action norm solves a Hamilton-Jacobi equation
in the rescaled time ``tau`` (the integrated rate norm), with an initial
datum built from the bare norm series shifted by the Gram parameter
``sigma``.  Along a characteristic through ``z0`` the solution is closed
form:

    z(tau) = z0 - tau * u0(z0),      phi(tau, z) = phi0(z0) - tau * u0(z0)**2 / 2,

with ``u0`` the derivative of the datum.  Everything therefore reduces to
inverting the cubic characteristic equation for ``z0(tau, z)`` on the branch
continuously connected to the identity at ``tau = 0``; the inversion loses
monotonicity at a characteristic crossing, which is the existence boundary.

Two closed-form data are supported: the exact quartic datum for a purely
quartic bare series, and a logarithmic upper-bound datum for a general
series with convergence radius ``R``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CharacteristicCrossingError, ExistenceError, ResolutionError
from .flow import FlowTrajectory, trajectory_norms
from .norms import NormSeries, convergence_radius, norm_coefficients
from .schedule import ScaleSchedule

_HOMOTOPY_STEPS = 16
_RESIDUAL_TOL = 1e-12


def rescaled_time(schedule: ScaleSchedule, s: float) -> float:
    """Rescaled time: integrated rate norm of the schedule up to ``s``."""
    if not 0.0 <= s <= schedule.T * (1 + 1e-12):
        raise ValueError(f"scale {s} outside [0, {schedule.T}]")
    return schedule.tau(s)


# ---------------------------------------------------------------------------
# characteristic solutions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CharacteristicSolution:
    """Characteristic representation of one Hamilton-Jacobi solution.

    ``kind`` tags the closed-form initial datum: ``"logarithmic"`` with
    parameter ``lam`` or ``"quartic"`` with coupling ``alpha`` and Gram shift
    ``sigma``.  ``z0_window`` bounds ``|z0|`` where the characteristic map is
    guaranteed monotone (``inf`` at ``tau = 0``); the inversion method is
    homotopy continuation from the identity with a safeguarded Newton polish.
    """

    kind: str
    tau: float
    lam: float = 0.0
    alpha: float = 0.0
    sigma: float = 0.0
    method: str = "homotopy+newton"

    @classmethod
    def logarithmic(cls, lam: float, tau: float) -> "CharacteristicSolution":
        if lam <= 0:
            raise ValueError("lam must be positive")
        return cls(kind="logarithmic", tau=float(tau), lam=float(lam))

    @classmethod
    def quartic(cls, alpha: float, sigma: float, tau: float
                ) -> "CharacteristicSolution":
        if alpha < 0:
            raise ValueError("alpha must be nonnegative")
        return cls(kind="quartic", tau=float(tau), alpha=float(alpha),
                   sigma=float(sigma))

    # -- datum ---------------------------------------------------------------

    def u0(self, z0):
        if self.kind == "logarithmic":
            l2 = self.lam ** 2
            return l2 * z0 / (1.0 - l2 * z0 * z0)
        a, s2 = self.alpha, self.sigma ** 2
        return 12.0 * a * s2 * z0 + 4.0 * a * z0 ** 3

    def datum(self, z0):
        """Initial value ``phi0(z0)`` of the majorant datum (z-dependent part
        plus its constant)."""
        if self.kind == "logarithmic":
            l2 = self.lam ** 2
            return -0.5 * np.log(1.0 - l2 * z0 * z0)
        a, s = self.alpha, self.sigma
        return 0.5 * a * ((s + z0) ** 4 + (s - z0) ** 4)

    # -- characteristic map ----------------------------------------------------

    def forward(self, z0):
        return z0 - self.tau * self.u0(z0)

    def slope(self, z0):
        if self.kind == "logarithmic":
            l2 = self.lam ** 2
            return 1.0 - l2 * self.tau * (1.0 + l2 * z0 * z0) / (1.0 - l2 * z0 * z0) ** 2
        a, s2 = self.alpha, self.sigma ** 2
        return 1.0 - 12.0 * a * s2 * self.tau - 12.0 * a * self.tau * z0 ** 2

    @property
    def z0_window(self) -> float:
        """Bound ``w``: monotonicity is certified for ``|z0| < w``."""
        if self.tau <= 0.0:
            return float("inf")
        if self.kind == "logarithmic":
            l2 = self.lam ** 2
            num = 1.0 - l2 * self.tau
            if num <= 0.0:
                return 0.0
            return math.sqrt(num / (l2 * (l2 * self.tau + 2.0)))
        a, s2 = self.alpha, self.sigma ** 2
        if a == 0.0:
            return float("inf")
        num = 1.0 - 12.0 * a * s2 * self.tau
        if num <= 0.0:
            return 0.0
        return math.sqrt(num / (12.0 * a * self.tau))

    @property
    def z_window(self) -> float:
        """Largest real ``z`` reached by characteristics inside the window."""
        w = self.z0_window
        if not math.isfinite(w):
            return float("inf")
        return float(np.real(self.forward(w)))

    def _cubic_coeffs(self, tau: float, z):
        """Coefficients (highest power first) of the characteristic cubic."""
        if self.kind == "logarithmic":
            l2 = self.lam ** 2
            return [-l2, l2 * z, 1.0 - l2 * tau, -z]
        a, s2 = self.alpha, self.sigma ** 2
        return [4.0 * a * tau, 0.0, 12.0 * a * s2 * tau - 1.0, z]

    def invert(self, z, enforce_window: bool = True):
        """Initial point ``z0`` with ``forward(z0) == z``, continuous in tau.

        Homotopy continuation from ``tau = 0`` (where ``z0 == z``) selects the
        branch; a Newton polish brings the forward residual below 1e-12.
        With ``enforce_window`` (real inputs), a result outside the certified
        monotonicity window raises ``CharacteristicCrossingError``.
        """
        if self.tau == 0.0:
            return z
        z0 = z
        for j in range(1, _HOMOTOPY_STEPS + 1):
            tau_j = self.tau * j / _HOMOTOPY_STEPS
            coeffs = self._cubic_coeffs(tau_j, z)
            if abs(coeffs[0]) < 1e-300:
                continue  # linear datum: z0 stays z (alpha == 0)
            roots = np.roots(coeffs)
            z0 = roots[np.argmin(np.abs(roots - z0))]
        z0 = self._polish(z0, z)
        scale = max(1.0, abs(z))
        resid = abs(self.forward(z0) - z)
        if not np.isfinite(resid) or resid > _RESIDUAL_TOL * scale:
            raise CharacteristicCrossingError(
                f"characteristic inversion failed: residual {resid:.3e}",
                critical_z0=z0)
        if np.iscomplexobj(np.asarray(z)) or isinstance(z, complex):
            return complex(z0)
        z0 = float(np.real(z0))
        if enforce_window:
            w = self.z0_window
            if abs(z0) >= w:
                raise CharacteristicCrossingError(
                    f"characteristic crossing: |z0|={abs(z0):.6g} outside "
                    f"certified window {w:.6g}", critical_z0=z0)
            if self.slope(z0) <= 0.0:
                raise CharacteristicCrossingError(
                    f"characteristic crossing: dz/dz0 <= 0 at z0={z0:.6g}",
                    critical_z0=z0)
        return z0

    def _polish(self, z0, z):
        for _ in range(60):
            resid = self.forward(z0) - z
            if abs(resid) <= 0.25 * _RESIDUAL_TOL * max(1.0, abs(z)):
                break
            d = self.slope(z0)
            if d == 0:
                break
            step = resid / d
            # damp huge steps to stay on the tracked branch
            if abs(step) > 0.5 * max(1.0, abs(z0)):
                step *= 0.5 * max(1.0, abs(z0)) / abs(step)
            z0 = z0 - step
        return z0

    def value(self, z):
        """Majorant value ``phi(tau, z)`` along the tracked characteristic."""
        z0 = self.invert(z, enforce_window=False)
        u = self.u0(z0)
        return self.datum(z0) - 0.5 * self.tau * u * u


def invert_characteristic_log(lam: float, tau: float, z: float) -> float:
    """Invert the logarithmic-datum characteristic equation for ``z0``."""
    return CharacteristicSolution.logarithmic(lam, tau).invert(z)


def invert_characteristic_quartic(alpha: float, sigma: float, tau: float,
                                  z: float) -> float:
    """Invert the quartic-datum characteristic equation for ``z0``.

    ``sigma`` is the Gram parameter (its square enters the cubic).
    """
    return CharacteristicSolution.quartic(alpha, sigma, tau).invert(z)


# ---------------------------------------------------------------------------
# majorant evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExistenceReport:
    radius: float
    tau: float
    sigma: float
    holds: bool
    kind: str
    lhs: float
    rhs: float

    def as_text(self) -> str:
        return (
            "existence report\n"
            f"  kind  = {self.kind}\n"
            f"  R     = {self.radius:.12g}\n"
            f"  tau   = {self.tau:.12g}\n"
            f"  sigma = {self.sigma:.12g}\n"
            f"  lhs   = {self.lhs:.12g}\n"
            f"  rhs   = {self.rhs:.12g}\n"
            f"  holds = {'true' if self.holds else 'false'}\n")


@dataclass(frozen=True)
class MajorantSpec:
    """What to majorize: a bare norm series (or closed-form tag) plus the
    schedule whose Gram parameter and rate norm drive the evolution.

    ``quartic_alpha`` selects the sharp quartic datum; otherwise the general
    logarithmic upper-bound datum with radius ``R`` is used (``radius``
    overrides the radius computed from ``bare_series``).
    """

    schedule: ScaleSchedule
    bare_series: NormSeries | None = None
    quartic_alpha: float | None = None
    radius: float | None = None

    def __post_init__(self):
        if self.quartic_alpha is None and self.bare_series is None \
                and self.radius is None:
            raise ValueError("need a bare series, a quartic coupling, or a radius")
        if self.quartic_alpha is not None and self.quartic_alpha < 0:
            raise ValueError("quartic coupling must be nonnegative")

    @property
    def kind(self) -> str:
        return "quartic" if self.quartic_alpha is not None else "logarithmic"

    @property
    def R(self) -> float:
        if self.radius is not None:
            return float(self.radius)
        if self.quartic_alpha is not None:
            if self.quartic_alpha == 0.0:
                return float("inf")
            return (4.0 * self.quartic_alpha) ** -0.25
        return convergence_radius(self.bare_series)

    def characteristic(self, t: float) -> CharacteristicSolution:
        tau = self.schedule.tau(t)
        sigma = math.sqrt(self.schedule.sigma_squared(0.0, t))
        if self.kind == "quartic":
            return CharacteristicSolution.quartic(self.quartic_alpha, sigma, tau)
        r = self.R
        if sigma >= r:
            raise ExistenceError(
                f"Gram parameter sigma={sigma:.6g} reached the radius R={r:.6g}")
        lam = (1.0 / r) / (1.0 - sigma / r)
        return CharacteristicSolution.logarithmic(lam, tau)


def existence_check(spec: MajorantSpec, t: float) -> ExistenceReport:
    """Evaluate the majorant existence inequality at scale ``t``.

    Quartic data: ``12 alpha sigma^2 tau < 1``.  Logarithmic data:
    ``sqrt(tau) + sigma < R``.
    """
    tau = spec.schedule.tau(t)
    sigma = math.sqrt(spec.schedule.sigma_squared(0.0, t))
    r = spec.R
    if spec.kind == "quartic":
        lhs = 12.0 * spec.quartic_alpha * sigma ** 2 * tau
        return ExistenceReport(radius=r, tau=tau, sigma=sigma,
                               holds=bool(lhs < 1.0), kind="quartic",
                               lhs=lhs, rhs=1.0)
    lhs = math.sqrt(tau) + sigma
    return ExistenceReport(radius=r, tau=tau, sigma=sigma,
                           holds=bool(lhs < r), kind="logarithmic",
                           lhs=lhs, rhs=r)


def majorant_value(spec: MajorantSpec, t: float, z: float) -> float:
    """Majorant ``phi(t, z)``: the Hamilton-Jacobi solution at rescaled time
    ``tau(t)`` with the Gram-shifted datum, plus the datum's constant part.
    """
    report = existence_check(spec, t)
    if not report.holds:
        raise ExistenceError(
            "majorant existence condition fails: " + report.as_text())
    char = spec.characteristic(t)
    value = char.value(z)
    return float(np.real(value)) + _datum_constant(spec, report.sigma)


def _datum_constant(spec: MajorantSpec, sigma: float) -> float:
    if spec.kind == "quartic":
        return 0.0  # the quartic datum already carries its constant
    return -math.log(1.0 - sigma / spec.R)


def majorant_coefficients(spec: MajorantSpec, t: float, m_max: int,
                          nodes: int = 128) -> NormSeries:
    """Even-degree Taylor coefficients ``phi_m(t)`` for ``m <= m_max``.

    Extracted by trapezoid (discrete Fourier) quadrature of the Cauchy
    integral on a circle of half the usable radius; node doubling gives a
    spectral self-convergence check.  Tiny negative values (quadrature
    noise above -1e-12) are clamped to zero with a warning.
    """
    report = existence_check(spec, t)
    if not report.holds:
        raise ExistenceError(
            "majorant existence condition fails: " + report.as_text())
    char = spec.characteristic(t)
    analytic = spec.R - report.sigma
    if analytic <= 0.0:
        raise ExistenceError(
            f"empty analyticity window: R={spec.R:.6g}, sigma={report.sigma:.6g}")
    usable = min(analytic, char.z_window)
    radius = 0.5 * usable
    if not np.isfinite(radius) or radius <= 0.0:
        raise ExistenceError(f"empty extraction window at t={t}")

    if nodes % 2:
        raise ValueError("node count must be even")
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    half = nodes // 2
    vals = np.empty(nodes, dtype=np.complex128)
    for j in range(half):
        zj = radius * np.exp(1j * theta[j])
        vals[j] = char.value(zj)
    vals[half:] = vals[:half]  # phi is even in z
    spectrum = np.fft.fft(vals) / nodes
    coeffs = np.zeros(m_max)
    warned = False
    for m in range(1, m_max + 1):
        if 2 * m >= nodes:
            raise ValueError("node count too small for requested degree")
        cm = float(np.real(spectrum[2 * m])) / radius ** (2 * m)
        if cm < 0.0:
            if cm < -1e-12:
                raise ValueError(
                    f"majorant coefficient phi_{m} = {cm:.3e} is significantly "
                    "negative; extraction radius unsuitable")
            if not warned:
                warnings.warn("clamping tiny negative majorant coefficients "
                              f"(phi_{m} = {cm:.3e})", stacklevel=2)
                warned = True
            cm = 0.0
        coeffs[m - 1] = cm
    return NormSeries(coeffs)


# ---------------------------------------------------------------------------
# integral bound on the flow's norm coefficients
# ---------------------------------------------------------------------------


def _gamma_factor(l: int, m: int, k: int, xi: float) -> float:
    total = 0.0
    for kp in range(1, 2 * l, 2):
        kpp = 2 * k - kp
        if kpp < 1 or kpp > 2 * m - 1 or kpp % 2 == 0:
            continue
        total += (math.comb(2 * l - 1, kp) * xi ** (2 * l - 1 - kp)
                  * math.comb(2 * m - 1, kpp) * xi ** (2 * m - 1 - kpp))
    return 4.0 * l * m * total


def rhs_coefficient_bound(traj: FlowTrajectory, schedule: ScaleSchedule,
                          k: int, t: float, check_tol: float = 1e-6) -> float:
    """A-priori bound on the degree-``2k`` norm coefficient at scale ``t``.

    Combines the Gram-spread bare series with the integrated quadratic
    source of the flow, evaluated by composite Simpson on the trajectory
    grid (midpoints filled by linear interpolation of the norm
    coefficients).  A further refinement must agree to ``check_tol``
    relatively, otherwise the grid is too coarse.
    """
    if k < 1:
        raise ValueError("degree index k starts at 1")
    grid = traj.grid
    pos = int(np.argmin(np.abs(grid - t)))
    if abs(grid[pos] - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"time {t} is not on the trajectory grid")
    series = trajectory_norms(traj)
    n = len(series[0])
    f0 = series[0]
    sig0t = schedule.sigma_squared(0.0, float(t))
    term1 = sum(f0.coeff(m) * math.comb(2 * m, 2 * k) * sig0t ** (m - k)
                for m in range(k, n + 1))
    if pos == 0:
        return float(term1)

    fvals = np.array([[series[i].coeff(m) for m in range(1, n + 1)]
                      for i in range(pos + 1)])
    svals = grid[:pos + 1]

    def integrand(s: float, f_at_s: np.ndarray) -> float:
        xi = math.sqrt(max(schedule.sigma_squared(float(s), float(t)), 0.0))
        rate = float(schedule.adot_norm_at(float(s)))
        tot = 0.0
        for l in range(1, n + 1):
            fl = f_at_s[l - 1]
            if fl == 0.0:
                continue
            for m in range(max(1, k + 1 - l), n + 1):
                fm = f_at_s[m - 1]
                if fm == 0.0:
                    continue
                g = _gamma_factor(l, m, k, xi)
                if g:
                    tot += fl * fm * g
        return 0.5 * rate * tot

    def simpson_on(level: int) -> float:
        # level-fold midpoint refinement with linear interpolation of F
        ss = np.linspace(svals[0], svals[-1], level * pos + 1)
        fs = np.empty((len(ss), n))
        for col in range(n):
            fs[:, col] = np.interp(ss, svals, fvals[:, col])
        ys = np.array([integrand(ss[i], fs[i]) for i in range(len(ss))])
        h = ss[1] - ss[0]
        w = np.ones(len(ss))
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return float(np.dot(w, ys) * h / 3.0)

    base = simpson_on(2)
    refined = simpson_on(4)
    scale = max(abs(refined), abs(term1), 1e-300)
    if abs(refined - base) > check_tol * scale:
        raise ResolutionError(
            f"trajectory grid too coarse for the coefficient bound: "
            f"Simpson refinement moved by {abs(refined - base):.3e}")
    return float(term1 + refined)


# ---------------------------------------------------------------------------
# Hopf-Lax comparison oracle
# ---------------------------------------------------------------------------


def hopflax_solve(ys: Sequence[float], gs: Sequence[float], t: float, z: float
                  ) -> float:
    """Hopf-Lax envelope ``max_y [-(z - y)^2 / t + g(y)]`` on a sampled grid.

    Discrete maximization with a local quadratic refinement; a maximizer on
    the grid boundary triggers a window warning.
    """
    if t <= 0.0:
        raise ValueError("Hopf-Lax time must be positive")
    ys = np.asarray(ys, dtype=float)
    gs = np.asarray(gs, dtype=float)
    if ys.shape != gs.shape or ys.ndim != 1 or len(ys) < 3:
        raise ValueError("need matching 1-D samples with at least 3 points")
    vals = -((z - ys) ** 2) / t + gs
    i = int(np.argmax(vals))
    if i == 0 or i == len(ys) - 1:
        warnings.warn("Hopf-Lax maximizer on the grid boundary; enlarge the "
                      "sampling window", stacklevel=2)
        return float(vals[i])
    y3 = ys[i - 1:i + 2]
    v3 = vals[i - 1:i + 2]
    denom = (y3[0] - y3[1]) * (y3[0] - y3[2]) * (y3[1] - y3[2])
    a = (y3[2] * (v3[1] - v3[0]) + y3[1] * (v3[0] - v3[2])
         + y3[0] * (v3[2] - v3[1])) / denom
    if a >= 0.0:
        return float(vals[i])
    b = (y3[2] ** 2 * (v3[0] - v3[1]) + y3[1] ** 2 * (v3[2] - v3[0])
         + y3[0] ** 2 * (v3[1] - v3[2])) / denom
    c = (y3[1] * y3[2] * (y3[1] - y3[2]) * v3[0]
         + y3[2] * y3[0] * (y3[2] - y3[0]) * v3[1]
         + y3[0] * y3[1] * (y3[0] - y3[1]) * v3[2]) / denom
    vertex = c - b * b / (4.0 * a)
    return float(max(vertex, vals[i]))
