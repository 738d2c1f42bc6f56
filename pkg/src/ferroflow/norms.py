"""Norms for covariances and algebra elements, and Gram-type moment bounds.

The matrix norm is the maximum absolute row sum.  The algebra seminorm of an
even element collects, degree by degree, the largest per-generator sum of
absolute coefficients: ``F_m = sup_i (1/2m) sum_{J ni i, |J|=2m} |zeta_J|``,
and evaluates as the even power series ``sum_m F_m z^(2m)`` in the norm
parameter ``z``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, NamedTuple

import numpy as np

from .algebra import GrassmannElement, _popcount_table
from .errors import ParityError
from .gaussian import AntisymmetricCovariance, gaussian_moment

if TYPE_CHECKING:
    from .schedule import ScaleSchedule


@dataclass(frozen=True)
class NormSeries:
    """Nonnegative coefficients of an even power series in the norm parameter.

    ``coefficients[m - 1]`` is the coefficient of ``z**(2m)``.
    """

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.ndim != 1:
            raise ValueError("coefficients must be one-dimensional")
        if np.any(c < 0):
            raise ValueError("norm coefficients must be nonnegative")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    def __len__(self) -> int:
        return len(self.coefficients)

    def coeff(self, m: int) -> float:
        """Coefficient of ``z**(2m)`` (zero beyond the stored range)."""
        if m < 1:
            raise IndexError("degree index m starts at 1")
        return float(self.coefficients[m - 1]) if m <= len(self) else 0.0

    def eval(self, z) -> float | np.ndarray:
        z2 = np.asarray(z, dtype=float) ** 2
        out = np.zeros_like(z2)
        for m in range(len(self), 0, -1):
            out = (out + self.coefficients[m - 1]) * z2
        return out if out.ndim else float(out)

    def scaled(self, factors: np.ndarray) -> "NormSeries":
        return NormSeries(self.coefficients * np.asarray(factors, dtype=float))

    def __eq__(self, other):
        if not isinstance(other, NormSeries):
            return NotImplemented
        return len(self) == len(other) and bool(
            np.all(self.coefficients == other.coefficients))


class GramBoundReport(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def matrix_norm_1inf(a) -> float:
    """Maximum absolute row sum of a matrix (or covariance wrapper)."""
    m = a.matrix if isinstance(a, AntisymmetricCovariance) else np.asarray(a)
    if m.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(m), axis=1)))


def norm_coefficients(f: GrassmannElement, atol: float = 1e-12) -> NormSeries:
    """Degree-resolved seminorm coefficients of an even element.

    The constant part is ignored.  Significant odd-degree content (above
    ``atol`` relative to the largest coefficient) raises ``ParityError``.
    """
    n_gen = f.gens.count
    pop = _popcount_table(n_gen)
    absv = np.abs(f.coeffs)
    scale = max(1.0, float(absv.max()) if absv.size else 1.0)
    odd_mag = float(absv[(pop & 1) == 1].max(initial=0.0))
    if odd_mag > atol * scale:
        raise ParityError(
            f"element has odd-degree content {odd_mag:.3e} (threshold "
            f"{atol * scale:.3e})")
    n = f.gens.pairs
    idx = np.arange(f.gens.dim)
    best = np.zeros(n)
    for i in range(n_gen):
        sel = idx[(idx >> i) & 1 == 1]
        sums = np.bincount(pop[sel], weights=absv[sel], minlength=n_gen + 1)
        per_m = sums[2: 2 * n + 1: 2] / (2.0 * np.arange(1, n + 1))
        best = np.maximum(best, per_m)
    return NormSeries(best)


def norm_eval(series: NormSeries, z) -> float | np.ndarray:
    """Evaluate the even power series at norm parameter ``z``."""
    return series.eval(z)


def convergence_radius(series0: NormSeries) -> float:
    """Radius ``R`` with ``R**-2 = sup_m (2m F_m)**(1/m)``.

    The all-zero series has an empty supremum, taken as zero, so ``R`` is
    infinite (the majorant of the zero action is zero).
    """
    c = series0.coefficients
    sup = 0.0
    for m in range(1, len(c) + 1):
        fm = c[m - 1]
        if fm > 0:
            sup = max(sup, (2.0 * m * fm) ** (1.0 / m))
    if sup == 0.0:
        return float("inf")
    return sup ** -0.5


def sigma_squared(schedule: "ScaleSchedule", s: float, t: float) -> float:
    """Integrated Gram bound of the schedule between scales ``s`` and ``t``."""
    if s > t:
        raise ValueError(f"need s <= t, got s={s}, t={t}")
    return schedule.sigma_squared(s, t)


def gram_bound_check(cov: AntisymmetricCovariance, subset: Iterable[int] | int
                     ) -> GramBoundReport:
    """Check the Gram moment bound for one subset of generators.

    ``lhs`` is the absolute Gaussian moment, ``rhs`` is
    ``(4 max C^{+-}_{ii})**(|J|/2)`` with the max over both split parts and
    the generator pairs touched by the subset.
    """
    c_plus, c_minus = cov.require_split()
    n = cov.pairs
    if isinstance(subset, (int, np.integer)):
        idx = [b for b in range(int(subset).bit_length()) if (int(subset) >> b) & 1]
    else:
        idx = sorted(set(int(i) for i in subset))
    if not idx:
        return GramBoundReport(1.0, 1.0, True)
    touched = sorted({i if i < n else i - n for i in idx})
    diag_max = max(max(c_plus[i, i] for i in touched),
                   max(c_minus[i, i] for i in touched))
    rhs = (4.0 * diag_max) ** (len(idx) / 2.0)
    lhs = abs(gaussian_moment(cov.matrix, idx))
    return GramBoundReport(lhs, rhs, bool(lhs <= rhs * (1.0 + 1e-9)))
