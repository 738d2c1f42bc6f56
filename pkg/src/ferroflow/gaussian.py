"""Fermionic Gaussian calculus: Pfaffians, moments, and heat-kernel convolution.

A Gaussian state is defined by an antisymmetric covariance matrix ``A``; its
moments are Pfaffians of submatrices.  The Pfaffian is normalized so that
``pfaffian([[0, a], [-a, 0]]) == a`` and ``pfaffian(A)**2 == det(A)``, which
makes the two-point moment of generators ``i < j`` equal to ``A[i, j]``.

The weighted Laplacian here carries a global sign chosen so that the
heat-kernel convolution ``exp(Delta_A / 2) f`` evaluated at zero fields
reproduces the Gaussian expectation of ``f``.  That consistency (not any
particular textbook ordering of left derivatives) is the convention anchor,
and it is pinned by the moment-consistency tests.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .algebra import GrassmannElement, _deriv_table, _popcount_table, gradient
from .errors import DimensionMismatchError, GramSplitError

# Global Laplacian sign relative to sum_{ij} A_ij d_i d_j with left
# derivatives; pinned by the heat-kernel/moment consistency test.
_LAPLACIAN_SIGN = -1.0


class AntisymmetricCovariance:
    """A 2n x 2n antisymmetric covariance, optionally with a symmetric source.

    When built from a symmetric matrix ``C`` (or a split ``C = C+ - C-`` of
    two positive-definite matrices) the covariance has the block form
    ``[[0, C], [-C, 0]]`` and the split is retained for Gram-type bounds.
    """

    __slots__ = ("matrix", "c_matrix", "c_plus", "c_minus")

    def __init__(self, matrix: np.ndarray, c_matrix: np.ndarray | None = None,
                 c_plus: np.ndarray | None = None, c_minus: np.ndarray | None = None):
        matrix = np.asarray(matrix, dtype=np.complex128)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatchError(f"covariance must be square, got {matrix.shape}")
        if matrix.shape[0] % 2 != 0:
            raise DimensionMismatchError("covariance dimension must be even")
        scale = max(1.0, float(np.max(np.abs(matrix))) if matrix.size else 1.0)
        if float(np.max(np.abs(matrix + matrix.T), initial=0.0)) > 1e-12 * scale:
            raise ValueError("matrix is not antisymmetric within 1e-12")
        m = 0.5 * (matrix - matrix.T)  # enforce A.T == -A exactly
        m.setflags(write=False)
        self.matrix = m
        self.c_matrix = None if c_matrix is None else np.asarray(c_matrix, dtype=float)
        self.c_plus = None if c_plus is None else np.asarray(c_plus, dtype=float)
        self.c_minus = None if c_minus is None else np.asarray(c_minus, dtype=float)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def pairs(self) -> int:
        return self.dim // 2

    def has_split(self) -> bool:
        return self.c_plus is not None and self.c_minus is not None

    @staticmethod
    def _block(c: np.ndarray) -> np.ndarray:
        n = c.shape[0]
        a = np.zeros((2 * n, 2 * n), dtype=np.complex128)
        a[:n, n:] = c
        a[n:, :n] = -c
        return a

    @classmethod
    def zero(cls, dim: int) -> "AntisymmetricCovariance":
        return cls(np.zeros((dim, dim)))

    @classmethod
    def from_block(cls, c: np.ndarray) -> "AntisymmetricCovariance":
        """Block covariance ``[[0, C], [-C, 0]]`` for symmetric ``C``."""
        c = np.asarray(c, dtype=float)
        if np.max(np.abs(c - c.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(c))):
            raise ValueError("C must be symmetric")
        return cls(cls._block(c), c_matrix=c)

    @classmethod
    def from_split(cls, c_plus: np.ndarray, c_minus: np.ndarray
                   ) -> "AntisymmetricCovariance":
        """Block covariance for ``C = C+ - C-`` with positive-definite parts."""
        c_plus = np.asarray(c_plus, dtype=float)
        c_minus = np.asarray(c_minus, dtype=float)
        for name, m in (("C+", c_plus), ("C-", c_minus)):
            if m.shape != c_plus.shape or m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise DimensionMismatchError(f"{name} must be square")
            if np.max(np.abs(m - m.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(m))):
                raise ValueError(f"{name} must be symmetric")
            try:
                np.linalg.cholesky(m)
            except np.linalg.LinAlgError as exc:
                raise ValueError(f"{name} is not positive-definite") from exc
        c = c_plus - c_minus
        cov = cls(cls._block(c), c_matrix=c, c_plus=c_plus, c_minus=c_minus)
        return cov

    def __add__(self, other: "AntisymmetricCovariance") -> "AntisymmetricCovariance":
        if self.dim != other.dim:
            raise DimensionMismatchError("covariance dimensions differ")
        return AntisymmetricCovariance(self.matrix + other.matrix)

    def require_split(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.has_split():
            raise GramSplitError("covariance carries no C+/C- split")
        return self.c_plus, self.c_minus


def _as_matrix(a) -> np.ndarray:
    if isinstance(a, AntisymmetricCovariance):
        return a.matrix
    return np.asarray(a, dtype=np.complex128)


def pfaffian(a) -> complex:
    """Pfaffian of an even-dimensional antisymmetric matrix.

    Skew-symmetric tridiagonalization with partial pivoting; O(dim^3) and
    stable.  ``pfaffian(A)**2 == det(A)`` and ``pfaffian([[0,a],[-a,0]]) == a``.
    """
    m = _as_matrix(a).copy()
    n = m.shape[0]
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("pfaffian needs a square matrix")
    if n % 2 != 0:
        raise ValueError("singular: odd dimension")
    if n == 0:
        return 1.0 + 0.0j
    value = 1.0 + 0.0j
    for k in range(0, n - 1, 2):
        pivot = k + 1 + int(np.argmax(np.abs(m[k + 1:, k])))
        if pivot != k + 1:
            m[[k + 1, pivot], :] = m[[pivot, k + 1], :]
            m[:, [k + 1, pivot]] = m[:, [pivot, k + 1]]
            value = -value
        if m[k + 1, k] == 0:
            return 0.0 + 0.0j
        value *= m[k, k + 1]
        if k + 2 < n:
            tau = m[k, k + 2:] / m[k, k + 1]
            col = m[k + 2:, k + 1]
            m[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return complex(value)


def _subset_list(subset: Iterable[int] | int) -> list[int]:
    if isinstance(subset, (int, np.integer)):
        mask = int(subset)
        return [b for b in range(mask.bit_length()) if (mask >> b) & 1]
    idx = sorted(int(i) for i in subset)
    if len(set(idx)) != len(idx):
        raise ValueError("subset has repeated indices")
    return idx


def gaussian_moment(a, subset: Iterable[int] | int) -> complex:
    """Gaussian moment of the basis monomial for ``subset`` (ascending order).

    Zero for odd cardinality, one for the empty set, otherwise the Pfaffian
    of the corresponding submatrix of the covariance.
    """
    m = _as_matrix(a)
    idx = _subset_list(subset)
    if len(idx) % 2 != 0:
        return 0.0 + 0.0j
    if not idx:
        return 1.0 + 0.0j
    if idx and idx[-1] >= m.shape[0]:
        raise IndexError("subset index exceeds covariance dimension")
    return pfaffian(m[np.ix_(idx, idx)])


def gaussian_expectation(a, f: GrassmannElement) -> complex:
    """Gaussian expectation of ``f``: the moment sum over its coefficients."""
    m = _as_matrix(a)
    if m.shape[0] != f.gens.count:
        raise DimensionMismatchError("covariance dimension != generator count")
    pop = _popcount_table(f.gens.count)
    total = 0.0 + 0.0j
    for mask in f.nonzero_masks():
        if pop[mask] & 1:
            continue
        total += f.coeffs[mask] * gaussian_moment(m, int(mask))
    return complex(total)


def laplacian(a, f: GrassmannElement) -> GrassmannElement:
    """Weighted second-derivative operator for covariance ``a``.

    Each output monomial drops in degree by exactly two; the global sign is
    the one that makes the heat-kernel convolution consistent with Gaussian
    moments.
    """
    m = _as_matrix(a)
    n_gen = f.gens.count
    if m.shape[0] != n_gen:
        raise DimensionMismatchError("covariance dimension != generator count")
    grad = gradient(f)
    mixed = m @ grad
    out = np.zeros(f.gens.dim, dtype=np.complex128)
    for i in range(n_gen):
        src, dst, sgn = _deriv_table(n_gen, i)
        out[dst] += sgn * mixed[i, src]
    return GrassmannElement(f.gens, _LAPLACIAN_SIGN * out)


def heat_kernel_convolve(a, f: GrassmannElement) -> GrassmannElement:
    """Gaussian convolution of ``f``, as the terminating series
    ``sum_k (Delta_A/2)^k f / k!``.

    Its scalar part equals ``gaussian_expectation(a, f)``.
    """
    acc = f.coeffs.copy()
    term = f
    for k in range(1, f.gens.count // 2 + 2):
        term = laplacian(a, term)
        if not np.any(term.coeffs):
            break
        term = term.with_coeffs(term.coeffs * (0.5 / k))
        acc += term.coeffs
    return GrassmannElement(f.gens, acc)


def covariance_split_check(a, b, f: GrassmannElement) -> float:
    """Residual of the covariance-splitting identity on ``f``.

    Maximum coefficient deviation between convolving by ``a + b`` at once and
    convolving by ``a`` then ``b``.
    """
    ma, mb = _as_matrix(a), _as_matrix(b)
    if ma.shape != mb.shape:
        raise DimensionMismatchError("covariances must share dimensions")
    joint = heat_kernel_convolve(ma + mb, f)
    staged = heat_kernel_convolve(mb, heat_kernel_convolve(ma, f))
    return float(np.max(np.abs(joint.coeffs - staged.coeffs)))


def det_correlation(c: np.ndarray, j: Sequence[int], k: Sequence[int]) -> complex:
    """Mixed correlation of unbarred/barred generators for a symmetric source.

    Returns ``det C[J x K]`` when ``|J| == |K|`` and zero otherwise.  On the
    block covariance with the barred fields stored at offset ``n``, this
    equals the Gaussian moment of the interleaved monomial
    ``psi_{j1} psibar_{k1} psi_{j2} psibar_{k2} ...``; relative to the
    block-ascending monomial that is a parity factor ``(-1)**(p*(p-1)/2)``.
    """
    c = np.asarray(c)
    jl = _subset_list(j)
    kl = _subset_list(k)
    if not jl or not kl:
        raise ValueError("subsets must be nonempty")
    if max(jl + kl) >= c.shape[0]:
        raise IndexError("subset index exceeds matrix dimension")
    if len(jl) != len(kl):
        return 0.0 + 0.0j
    sub = c[np.ix_(jl, kl)]
    if sub.shape == (1, 1):
        return complex(sub[0, 0])
    return complex(np.linalg.det(sub))
