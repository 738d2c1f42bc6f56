"""Continuous scale decompositions of a covariance, with quadrature access.

A schedule supplies the rate matrix ``Adot(tau)`` of a covariance
decomposition over ``[0, T]`` together with the data needed for Gram bounds.
Integrals (slice covariances, the integrated Gram bound, and the rescaled
time built from the rate norm) are evaluated by composite Simpson quadrature
on a uniform grid, refined by doubling until two successive values agree to
a relative tolerance.  Results are cached; evaluation is deterministic.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ResolutionError
from .gaussian import AntisymmetricCovariance
from .norms import matrix_norm_1inf

DEFAULT_PANELS = 512
DEFAULT_RTOL = 1e-10
_MAX_DOUBLINGS = 10


def _simpson_values(vals: np.ndarray, h: float):
    """Composite Simpson combination along axis 0 (odd node count)."""
    weights = np.ones(vals.shape[0])
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return np.tensordot(weights, vals, axes=(0, 0)) * (h / 3.0)


def simpson_refine(fn: Callable, a: float, b: float, panels: int = DEFAULT_PANELS,
                   rtol: float = DEFAULT_RTOL, vectorized: bool = False):
    """Composite Simpson on [a, b], doubling the grid until convergence.

    ``fn`` maps a scale to a scalar or array; with ``vectorized=True`` it
    must accept a 1-D array of scales and return values stacked along the
    first axis.
    """
    if b < a:
        raise ValueError(f"integration range reversed: [{a}, {b}]")
    sample = np.asarray(fn(np.asarray([a]))[0] if vectorized else fn(a), dtype=np.complex128)
    if b == a:
        out = np.zeros_like(sample)
        return out if out.ndim else _as_plain_scalar(out)

    def evaluate(nodes: np.ndarray) -> np.ndarray:
        if vectorized:
            return np.asarray(fn(nodes), dtype=np.complex128)
        return np.asarray([fn(float(x)) for x in nodes], dtype=np.complex128)

    n = int(panels)
    if n < 2:
        n = 2
    if n % 2:
        n += 1
    nodes = np.linspace(a, b, n + 1)
    vals = evaluate(nodes)
    est = _simpson_values(vals, (b - a) / n)
    for _ in range(_MAX_DOUBLINGS):
        n *= 2
        new_nodes = np.linspace(a, b, n + 1)[1::2]
        new_vals = evaluate(new_nodes)
        merged = np.empty((n + 1,) + vals.shape[1:], dtype=np.complex128)
        merged[0::2] = vals
        merged[1::2] = new_vals
        vals = merged
        refined = _simpson_values(vals, (b - a) / n)
        scale = max(float(np.max(np.abs(refined))), 1e-300)
        if float(np.max(np.abs(refined - est))) <= rtol * scale:
            return refined if refined.ndim else _as_plain_scalar(refined)
        est = refined
    raise ResolutionError(
        f"Simpson refinement did not converge to rtol={rtol} on [{a}, {b}]")


def _as_plain_scalar(x: np.ndarray):
    z = complex(x)
    return z.real if abs(z.imag) <= 1e-14 * max(1.0, abs(z)) else z


class ScaleSchedule:
    """A family ``tau -> Adot(tau)`` on ``[0, T]`` with quadrature access.

    Exactly one of ``gram_rate`` (a scalar function dominating
    ``4 max C^{+-}_{ii}(tau)``) or ``cdot_diags`` (the split derivative
    diagonals) must be supplied for the integrated Gram bound.  The rate
    norm defaults to the max-row-sum norm of the actual matrix.
    """

    def __init__(self, dim: int, T: float, adot: Callable[[float], np.ndarray],
                 gram_rate: Callable | None = None,
                 cdot_diags: Callable | None = None,
                 adot_norm: Callable | None = None,
                 cdot: Callable[[float], np.ndarray] | None = None,
                 panels: int = DEFAULT_PANELS, rtol: float = DEFAULT_RTOL,
                 vectorized_rates: bool = False):
        if dim % 2 != 0 or dim < 2:
            raise ValueError("schedule dimension must be a positive even integer")
        if T < 0:
            raise ValueError("upper scale T must be nonnegative")
        if (gram_rate is None) == (cdot_diags is None):
            raise ValueError("supply exactly one of gram_rate or cdot_diags")
        self.dim = dim
        self.T = float(T)
        self._adot = adot
        self._gram_rate = gram_rate
        self._cdot_diags = cdot_diags
        self._adot_norm = adot_norm
        self._cdot = cdot
        self.panels = panels
        self.rtol = rtol
        self._vectorized = bool(vectorized_rates)
        self._cache: dict = {}

    # -- constructors --------------------------------------------------------

    @classmethod
    def from_cdot(cls, cdot: Callable[[float], np.ndarray], T: float,
                  pairs: int, gram_rate: Callable | None = None,
                  vectorized_rates: bool = False, **kw) -> "ScaleSchedule":
        """Schedule for a positive-semidefinite derivative kernel family.

        ``cdot(tau)`` is the symmetric ``pairs x pairs`` rate; the covariance
        rate is its antisymmetric block embedding and the split of any slice
        is ``(integral of cdot, 0)``.
        """

        def adot(tau: float) -> np.ndarray:
            return AntisymmetricCovariance._block(np.asarray(cdot(tau)))

        if gram_rate is None:
            def diags(tau: float):
                d = np.diag(np.asarray(cdot(tau)))
                return d, np.zeros_like(d)
            return cls(2 * pairs, T, adot, cdot_diags=diags, cdot=cdot,
                       vectorized_rates=vectorized_rates, **kw)
        return cls(2 * pairs, T, adot, gram_rate=gram_rate, cdot=cdot,
                   vectorized_rates=vectorized_rates, **kw)

    @classmethod
    def from_table(cls, times: np.ndarray, matrices: np.ndarray,
                   gram_rate: Callable | None = None,
                   cdot_diags: Callable | None = None, **kw) -> "ScaleSchedule":
        """Piecewise-linear synthetic schedule through sampled rate matrices."""
        times = np.asarray(times, dtype=float)
        matrices = np.asarray(matrices, dtype=float)
        if times.ndim != 1 or len(times) != matrices.shape[0]:
            raise ValueError("times and matrices must align")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")

        def adot(tau: float) -> np.ndarray:
            tau = min(max(tau, times[0]), times[-1])
            i = int(np.searchsorted(times, tau, side="right") - 1)
            i = min(i, len(times) - 2)
            w = (tau - times[i]) / (times[i + 1] - times[i])
            return (1.0 - w) * matrices[i] + w * matrices[i + 1]

        return cls(matrices.shape[1], float(times[-1]), adot,
                   gram_rate=gram_rate, cdot_diags=cdot_diags, **kw)

    # -- pointwise access ----------------------------------------------------

    def adot(self, tau: float) -> np.ndarray:
        return np.asarray(self._adot(tau))

    def adot_norm_at(self, tau):
        if self._adot_norm is not None:
            return self._adot_norm(tau)
        if np.ndim(tau) == 0:
            return matrix_norm_1inf(self.adot(float(tau)))
        return np.asarray([matrix_norm_1inf(self.adot(float(x))) for x in np.asarray(tau)])

    def gram_rate_at(self, tau):
        if self._gram_rate is not None:
            return self._gram_rate(tau)
        if np.ndim(tau) == 0:
            dp, dm = self._cdot_diags(float(tau))
            return 4.0 * max(float(np.max(dp)), float(np.max(dm)))
        return np.asarray([self.gram_rate_at(float(x)) for x in np.asarray(tau)])

    # -- integrals -----------------------------------------------------------

    def _cum(self, kind: str, fn, x: float, vectorized: bool) -> float:
        key = (kind, float(x))
        val = self._cache.get(key)
        if val is None:
            val = float(np.real(simpson_refine(
                fn, 0.0, float(x), self.panels, self.rtol, vectorized)))
            self._cache[key] = val
        return val

    def sigma_squared(self, s: float, t: float) -> float:
        """Integrated Gram bound between scales ``s <= t``."""
        if s > t:
            raise ValueError(f"need s <= t, got s={s}, t={t}")
        vec = self._vectorized and self._gram_rate is not None
        rate = self.gram_rate_at
        return self._cum("sigma", rate, t, vec) - self._cum("sigma", rate, s, vec)

    def tau(self, s: float) -> float:
        """Rescaled time: integral of the rate norm from 0 to ``s``."""
        if s < 0:
            raise ValueError("scale must be nonnegative")
        vec = self._vectorized and self._adot_norm is not None
        return self._cum("tau", self.adot_norm_at, s, vec)

    def covariance(self, s: float, t: float) -> AntisymmetricCovariance:
        """Slice covariance: the integral of the rate matrix over [s, t]."""
        if s > t:
            raise ValueError(f"need s <= t, got s={s}, t={t}")
        key = ("cov", float(s), float(t))
        cov = self._cache.get(key)
        if cov is None:
            mat = simpson_refine(self._adot, s, t, self.panels, self.rtol)
            mat = np.real_if_close(np.asarray(mat), tol=100)
            if self._cdot is not None:
                n = self.dim // 2
                c_int = np.real(np.asarray(simpson_refine(
                    self._cdot, s, t, self.panels, self.rtol)))
                cov = AntisymmetricCovariance(mat, c_matrix=c_int, c_plus=c_int,
                                              c_minus=np.zeros((n, n)))
            else:
                cov = AntisymmetricCovariance(mat)
            self._cache[key] = cov
        return cov
