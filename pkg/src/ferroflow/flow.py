"""The renormalization-group map and the flow equation of the effective action.

The exact path convolves ``exp(-f)`` with the Gaussian of the accumulated
covariance and takes minus the logarithm.  The differential path integrates
the nonlinear flow of the normalized effective action

    dF/dt = (1/2) Delta_rate F + (1/2) <grad F, rate grad F> - (scalar part)

with classic fixed-step RK4 on the full coefficient vector.  The sign of the
quadratic term is tied to the Laplacian convention of :mod:`ferroflow.gaussian`;
the pair is pinned by cross-validating the two paths against each other,
which the test suite does continuously.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .algebra import (
    GeneratorSet,
    GrassmannElement,
    exp_of,
    gradient,
    log_of,
    project_degree_ge,
    wedge,
)
from .errors import IntegrationError, LogDomainError, ParityError
from .gaussian import AntisymmetricCovariance, laplacian
from .norms import NormSeries, norm_coefficients
from .schedule import ScaleSchedule

# Sign of the quadratic gradient pairing relative to sum_ij rate_ij d_iF ^ d_jF;
# pinned by the exact-path cross-validation tests.
_BILINEAR_SIGN = 1.0

_PARITY_ATOL = 1e-12
_SCALAR_WARN_FLOOR = 0.1


@dataclass
class FlowTrajectory:
    """States of the effective action on an ordered time grid.

    Normalized trajectories keep a zero scalar part in every state and carry
    the accumulated log-normalization separately in ``log_norm``.
    """

    grid: np.ndarray
    states: list[GrassmannElement]
    normalized: bool = True
    truncated: bool = False
    log_norm: np.ndarray | None = None
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if len(self.grid) != len(self.states):
            raise ValueError("grid and states must align")

    def state_at(self, t: float) -> GrassmannElement:
        i = int(np.argmin(np.abs(self.grid - t)))
        if abs(self.grid[i] - t) > 1e-12 * max(1.0, abs(t)):
            raise KeyError(f"time {t} is not on the trajectory grid")
        return self.states[i]

    def max_odd_content(self) -> float:
        worst = 0.0
        for state in self.states:
            _, odd = _split_mag(state)
            worst = max(worst, odd)
        return worst


def _split_mag(f: GrassmannElement) -> tuple[float, float]:
    from .algebra import _popcount_table

    pop = _popcount_table(f.gens.count)
    absv = np.abs(f.coeffs)
    even = float(absv[(pop & 1) == 0].max(initial=0.0))
    odd = float(absv[(pop & 1) == 1].max(initial=0.0))
    return even, odd


def _require_even(f: GrassmannElement, who: str) -> None:
    even, odd = _split_mag(f)
    if odd > _PARITY_ATOL * max(1.0, even):
        raise ParityError(f"{who} requires an even element (odd content {odd:.3e})")


def rg_map(a, f: GrassmannElement) -> GrassmannElement:
    """One fluctuation-integration step: ``-log`` of the Gaussian convolution
    of ``exp(-f)``.

    Raises ``LogDomainError`` when the convolved scalar part leaves the
    domain of the logarithm, and warns when it drops below 0.1 (the log stays
    defined but conditioning degrades).
    """
    from .gaussian import heat_kernel_convolve

    _require_even(f, "rg_map")
    conv = heat_kernel_convolve(a, exp_of(-f))
    scalar = conv.scalar_part
    if not (scalar.real > 0.0 and abs(scalar.imag) <= 1e-10 * max(1.0, abs(scalar))):
        raise LogDomainError(
            f"flow left log domain: convolved scalar part {scalar}",
            scalar_part=scalar)
    if scalar.real < _SCALAR_WARN_FLOOR:
        warnings.warn(
            f"convolved scalar part {scalar.real:.3g} below "
            f"{_SCALAR_WARN_FLOOR}; logarithm is ill-conditioned",
            stacklevel=2)
    return -log_of(conv)


def effective_action_exact(schedule: ScaleSchedule, f0: GrassmannElement,
                           t: float, normalized: bool = True) -> GrassmannElement:
    """Effective action at scale ``t`` through the heat-kernel route."""
    if not 0.0 <= t <= schedule.T * (1 + 1e-12):
        raise ValueError(f"scale {t} outside [0, {schedule.T}]")
    cov = schedule.covariance(0.0, t)
    out = rg_map(cov, f0)
    if normalized:
        c = out.coeffs.copy()
        c[0] = 0.0
        out = GrassmannElement(out.gens, c)
    return out


def _flow_rhs(rate: np.ndarray, coeffs: np.ndarray, gens: GeneratorSet,
              truncate_ge2: bool) -> tuple[np.ndarray, complex]:
    """Flow right-hand side on raw coefficients; returns (dF, dlog_norm)."""
    f = GrassmannElement(gens, coeffs)
    lap = laplacian(rate, f)
    grad = gradient(f)
    mixed = rate @ grad
    bil = np.zeros(gens.dim, dtype=np.complex128)
    for i in range(gens.count):
        gi = GrassmannElement(gens, grad[i])
        hi = GrassmannElement(gens, mixed[i])
        bil += wedge(gi, hi).coeffs
    dlog = 0.5 * lap.coeffs[0]
    out = 0.5 * lap.coeffs + (0.5 * _BILINEAR_SIGN) * bil
    out[0] = 0.0  # normalization: the scalar part stays exactly zero
    if truncate_ge2:
        out = project_degree_ge(GrassmannElement(gens, out), 4).coeffs.copy()
    return out, complex(dlog)


def flow_integrate(schedule: ScaleSchedule, f0: GrassmannElement,
                   grid: np.ndarray | None = None, truncate_ge2: bool = False,
                   steps: int = 400, t_end: float | None = None,
                   certify: bool = False, certify_tol: float = 1e-7
                   ) -> FlowTrajectory:
    """Integrate the flow equation of the normalized effective action.

    ``grid`` gives the RK4 step boundaries (default: ``steps`` uniform steps
    up to ``t_end`` or the schedule's upper scale).  With ``truncate_ge2``
    the right-hand side is projected onto degree >= 4, which removes the
    two-point insertions while keeping the normalization subtraction.  With
    ``certify=True`` the run is repeated at half and quarter step and must
    reproduce the states within ``certify_tol``.
    """
    _require_even(f0, "flow_integrate")
    if abs(f0.scalar_part) > _PARITY_ATOL * max(1.0, f0.max_abs()):
        raise ValueError("bare action must be normalized (zero scalar part)")
    if grid is None:
        end = schedule.T if t_end is None else float(t_end)
        grid = np.linspace(0.0, end, steps + 1)
    grid = np.asarray(grid, dtype=float)
    if grid[0] != 0.0:
        raise ValueError("trajectory grid must start at 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("trajectory grid must be strictly increasing")
    if grid[-1] > schedule.T * (1 + 1e-12):
        raise ValueError("trajectory grid exceeds the schedule's upper scale")

    if certify:
        base = _integrate_on(schedule, f0, grid, truncate_ge2)
        half = _integrate_on(schedule, f0, _refine(grid, 2), truncate_ge2)
        quarter = _integrate_on(schedule, f0, _refine(grid, 4), truncate_ge2)
        dev = _grid_deviation(base, half, stride=2)
        dev2 = _grid_deviation(half, quarter, stride=2)
        if max(dev, dev2) > certify_tol:
            raise IntegrationError(
                f"step-halving certificate failed: deviations {dev:.3e}, "
                f"{dev2:.3e} exceed {certify_tol:.3e}")
        base.notes.append(
            f"step-halving certificate: dev(h/2)={dev:.3e}, dev(h/4)={dev2:.3e}")
        return base
    return _integrate_on(schedule, f0, grid, truncate_ge2)


def _refine(grid: np.ndarray, factor: int) -> np.ndarray:
    pieces = [np.linspace(grid[i], grid[i + 1], factor + 1)[:-1]
              for i in range(len(grid) - 1)]
    return np.concatenate(pieces + [grid[-1:]])


def _grid_deviation(coarse: FlowTrajectory, fine: FlowTrajectory, stride: int
                    ) -> float:
    dev = 0.0
    for i, state in enumerate(coarse.states):
        other = fine.states[i * stride]
        dev = max(dev, float(np.max(np.abs(state.coeffs - other.coeffs))))
    return dev


def _integrate_on(schedule: ScaleSchedule, f0: GrassmannElement,
                  grid: np.ndarray, truncate_ge2: bool) -> FlowTrajectory:
    gens = f0.gens
    y = f0.coeffs.copy()
    y[0] = 0.0
    states = [GrassmannElement(gens, y)]
    log_norm = [0.0 + 0.0j]
    notes: list[str] = []
    c = 0.0 + 0.0j
    warned = False
    for i in range(len(grid) - 1):
        t0, t1 = grid[i], grid[i + 1]
        h = t1 - t0
        a1 = schedule.adot(t0)
        a2 = schedule.adot(t0 + 0.5 * h)
        a4 = schedule.adot(t1)
        k1, c1 = _flow_rhs(a1, y, gens, truncate_ge2)
        k2, c2 = _flow_rhs(a2, y + 0.5 * h * k1, gens, truncate_ge2)
        k3, c3 = _flow_rhs(a2, y + 0.5 * h * k2, gens, truncate_ge2)
        k4, c4 = _flow_rhs(a4, y + h * k3, gens, truncate_ge2)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        y[0] = 0.0
        c = c + (h / 6.0) * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        if not warned and np.exp(-c.real) < _SCALAR_WARN_FLOOR:
            notes.append(
                f"normalization scalar exp(-{c.real:.3g}) below "
                f"{_SCALAR_WARN_FLOOR} at t={t1:.6g}; conditioning degrades")
            warned = True
        states.append(GrassmannElement(gens, y))
        log_norm.append(c)
    return FlowTrajectory(grid=grid, states=states, normalized=True,
                          truncated=truncate_ge2,
                          log_norm=np.asarray(log_norm), notes=notes)


def trajectory_norms(traj: FlowTrajectory) -> list[NormSeries]:
    """Seminorm coefficients of every state along the trajectory."""
    return [norm_coefficients(state) for state in traj.states]


def trajectory_to_csv(traj: FlowTrajectory) -> str:
    """Render a trajectory as ``t,m,F_m`` rows with 12 significant digits."""
    series = trajectory_norms(traj)
    lines = ["t,m,F_m"]
    for t, s in zip(traj.grid, series):
        for m in range(1, len(s) + 1):
            lines.append(f"{t:.12g},{m},{s.coeff(m):.12g}")
    return "\n".join(lines) + "\n"
