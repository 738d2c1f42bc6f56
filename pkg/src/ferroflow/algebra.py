"""Exact arithmetic in a finite-dimensional Grassmann (exterior) algebra.

An algebra over ``n_gen`` anticommuting generators ``psi_0, ..., psi_{n_gen-1}``
is represented densely: an element is a complex coefficient for every subset
``J`` of generators, the subset encoded as a bitmask (bit ``k`` set means
``psi_k`` is a factor).  The basis monomial for ``J = {i_1 < ... < i_p}`` is
``psi_{i_1} ^ ... ^ psi_{i_p}`` with indices ascending; every stored
coefficient refers to this order.  Generator indices are 0-based.

Sign conventions
----------------
* Products of basis monomials pick up the parity of the number of
  transpositions needed to merge the two ascending index lists.
* The derivative is a *left* derivative: on an ascending monomial containing
  ``psi_k`` at (1-based) position ``r`` it removes ``psi_k`` and multiplies
  by ``(-1)**(r-1)``.
* Berezin integration is iterated left differentiation:
  ``berezin_integrate(f, [j1, ..., jk])`` applies ``d/dpsi_{j1}`` first.

Elements are immutable after construction; all operations are pure functions
and safe for concurrent use.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from numbers import Number
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import CapacityError, DimensionMismatchError, LogDomainError

DEFAULT_MAX_GENERATORS = 16
_MAX_GENERATORS_ENV = "FERROFLOW_MAX_GENERATORS"

# Largest generator count for which the full disjoint-pair product table
# (3**n_gen entries) is materialized.  Above it, products fall back to a
# sparse path over nonzero coefficients.
_TABLE_MAX = 12


def max_generators() -> int:
    """Configured generator cap (env ``FERROFLOW_MAX_GENERATORS`` overrides)."""
    raw = os.environ.get(_MAX_GENERATORS_ENV)
    if raw is None:
        return DEFAULT_MAX_GENERATORS
    try:
        value = int(raw)
    except ValueError as exc:
        raise CapacityError(f"bad {_MAX_GENERATORS_ENV} value: {raw!r}") from exc
    if value < 2:
        raise CapacityError(f"{_MAX_GENERATORS_ENV} must be >= 2, got {value}")
    return value


# ---------------------------------------------------------------------------
# cached index tables, keyed by generator count
# ---------------------------------------------------------------------------

_POPCOUNT: dict[int, np.ndarray] = {}
_PAIR_TABLE: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = {}
_DERIV_TABLE: dict[tuple[int, int], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _popcount_table(n_gen: int) -> np.ndarray:
    tab = _POPCOUNT.get(n_gen)
    if tab is None:
        idx = np.arange(1 << n_gen, dtype=np.uint32)
        tab = np.zeros(1 << n_gen, dtype=np.uint8)
        for b in range(n_gen):
            tab += ((idx >> b) & 1).astype(np.uint8)
        _POPCOUNT[n_gen] = tab
    return tab


def _merge_sign_array(j: np.ndarray, k: np.ndarray, n_gen: int) -> np.ndarray:
    """Signs (-1)**inv(J,K) for disjoint mask arrays, inv = #{(a,b): a>b}."""
    pop = _popcount_table(n_gen)
    par = np.zeros(j.shape, dtype=np.uint8)
    for b in range(n_gen):
        par ^= ((k >> b) & 1).astype(np.uint8) & (pop[j >> (b + 1)] & 1)
    return 1.0 - 2.0 * par


def merge_sign(j: int, k: int) -> int:
    """Sign of ``Psi_J ^ Psi_K -> Psi_{J|K}`` for disjoint bitmasks."""
    inv = 0
    b = 0
    kk = k
    while kk:
        if kk & 1:
            inv += (j >> (b + 1)).bit_count()
        kk >>= 1
        b += 1
    return -1 if inv & 1 else 1


def _pair_table(n_gen: int):
    """All disjoint pairs (J, K) with union U and merge sign, as flat arrays."""
    tab = _PAIR_TABLE.get(n_gen)
    if tab is None:
        dim = 1 << n_gen
        js: list[int] = []
        ks: list[int] = []
        us: list[int] = []
        for u in range(dim):
            sub = u
            while True:
                js.append(sub)
                ks.append(u ^ sub)
                us.append(u)
                if sub == 0:
                    break
                sub = (sub - 1) & u
        j = np.asarray(js, dtype=np.uint32)
        k = np.asarray(ks, dtype=np.uint32)
        u = np.asarray(us, dtype=np.uint32)
        sgn = _merge_sign_array(j, k, n_gen)
        tab = (j, k, u, sgn)
        _PAIR_TABLE[n_gen] = tab
    return tab


def _deriv_table(n_gen: int, k: int):
    """(source, target, sign) arrays for the left derivative by psi_k."""
    key = (n_gen, k)
    tab = _DERIV_TABLE.get(key)
    if tab is None:
        idx = np.arange(1 << n_gen, dtype=np.uint32)
        src = idx[(idx >> k) & 1 == 1]
        dst = src ^ (1 << k)
        pop = _popcount_table(n_gen)
        sgn = 1.0 - 2.0 * (pop[src & ((1 << k) - 1)] & 1)
        tab = (src, dst, sgn)
        _DERIV_TABLE[key] = tab
    return tab


def _scatter_accumulate(out: np.ndarray, idx: np.ndarray, vals: np.ndarray) -> None:
    n = out.shape[0]
    out.real += np.bincount(idx, weights=vals.real, minlength=n)
    out.imag += np.bincount(idx, weights=vals.imag, minlength=n)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorSet:
    """A fixed even number of Grassmann generators.

    ``count`` is the total number of generators (2n).  The cap defaults to
    16 and can be overridden per instance or via ``FERROFLOW_MAX_GENERATORS``.
    """

    count: int
    labels: tuple[str, ...] | None = None
    maximum: int = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        cap = self.maximum if self.maximum is not None else max_generators()
        object.__setattr__(self, "maximum", cap)
        if self.count % 2 != 0:
            raise ValueError(f"generator count must be even, got {self.count}")
        if not 2 <= self.count <= cap:
            raise CapacityError(
                f"generator count {self.count} outside [2, {cap}]"
            )
        if self.labels is not None and len(self.labels) != self.count:
            raise ValueError("labels length must equal generator count")

    @property
    def pairs(self) -> int:
        """Number of generator pairs n (count = 2n)."""
        return self.count // 2

    @property
    def dim(self) -> int:
        """Dimension of the algebra, 2**count."""
        return 1 << self.count

    def full_mask(self) -> int:
        return (1 << self.count) - 1

    def mask(self, indices: Iterable[int]) -> int:
        """Bitmask of a subset given as an index iterable (must be distinct)."""
        m = 0
        for i in indices:
            if not 0 <= i < self.count:
                raise IndexError(f"generator index {i} out of range 0..{self.count - 1}")
            bit = 1 << i
            if m & bit:
                raise ValueError(f"repeated generator index {i}")
            m |= bit
        return m


class GrassmannElement:
    """An element of the algebra: one complex coefficient per generator subset.

    ``coeffs[mask]`` is the coefficient of the ascending basis monomial for
    the subset encoded by ``mask``; ``coeffs[0]`` is the scalar part.
    Instances are immutable.
    """

    __slots__ = ("gens", "coeffs")

    def __init__(self, gens: GeneratorSet, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape != (gens.dim,):
            raise DimensionMismatchError(
                f"expected {gens.dim} coefficients, got {coeffs.shape}"
            )
        coeffs = coeffs.copy()
        coeffs.setflags(write=False)
        object.__setattr__(self, "gens", gens)
        object.__setattr__(self, "coeffs", coeffs)

    def __setattr__(self, name, value):
        raise AttributeError("GrassmannElement is immutable")

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, gens: GeneratorSet) -> "GrassmannElement":
        return cls(gens, np.zeros(gens.dim, dtype=np.complex128))

    @classmethod
    def scalar(cls, gens: GeneratorSet, value: complex) -> "GrassmannElement":
        c = np.zeros(gens.dim, dtype=np.complex128)
        c[0] = value
        return cls(gens, c)

    @classmethod
    def generator(cls, gens: GeneratorSet, k: int) -> "GrassmannElement":
        return cls.monomial(gens, [k])

    @classmethod
    def monomial(cls, gens: GeneratorSet, indices: Sequence[int], coeff: complex = 1.0
                 ) -> "GrassmannElement":
        """``coeff * psi_{i_1} ^ ... ^ psi_{i_p}`` for indices in any order.

        A repeated index yields the zero element; an out-of-order list
        contributes the sorting permutation's sign.
        """
        c = np.zeros(gens.dim, dtype=np.complex128)
        idx = list(indices)
        if len(set(idx)) != len(idx):
            return cls(gens, c)
        sign = 1
        mask = 0
        for i in idx:
            if not 0 <= i < gens.count:
                raise IndexError(f"generator index {i} out of range")
            sign *= merge_sign(mask, 1 << i)
            mask |= 1 << i
        c[mask] = sign * coeff
        return cls(gens, c)

    # -- basic structure ----------------------------------------------------

    @property
    def scalar_part(self) -> complex:
        return complex(self.coeffs[0])

    def nonzero_masks(self) -> np.ndarray:
        return np.nonzero(self.coeffs)[0]

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def is_even(self, tol: float = 0.0) -> bool:
        pop = _popcount_table(self.gens.count)
        odd = (pop & 1).astype(bool)
        return bool(np.all(np.abs(self.coeffs[odd]) <= tol))

    def degrees(self) -> np.ndarray:
        """Monomial degree |J| for every stored index."""
        return _popcount_table(self.gens.count).copy()

    def with_coeffs(self, coeffs: np.ndarray) -> "GrassmannElement":
        return GrassmannElement(self.gens, coeffs)

    # -- operators ----------------------------------------------------------

    def _check_same(self, other: "GrassmannElement") -> None:
        if self.gens.count != other.gens.count:
            raise DimensionMismatchError(
                f"mismatched generator sets: {self.gens.count} vs {other.gens.count}"
            )

    def __add__(self, other):
        if isinstance(other, GrassmannElement):
            self._check_same(other)
            return GrassmannElement(self.gens, self.coeffs + other.coeffs)
        if isinstance(other, Number):
            c = self.coeffs.copy()
            c[0] += other
            return GrassmannElement(self.gens, c)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return GrassmannElement(self.gens, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, GrassmannElement):
            return wedge(self, other)
        if isinstance(other, Number):
            return GrassmannElement(self.gens, self.coeffs * other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, Number):
            return GrassmannElement(self.gens, self.coeffs * other)
        return NotImplemented

    def __xor__(self, other):
        if isinstance(other, GrassmannElement):
            return wedge(self, other)
        return NotImplemented

    def __repr__(self):
        nz = self.nonzero_masks()
        return (f"GrassmannElement(n_gen={self.gens.count}, "
                f"nonzero={len(nz)}, scalar={self.coeffs[0]:.6g})")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def wedge(f: GrassmannElement, g: GrassmannElement) -> GrassmannElement:
    """Bilinear antisymmetric product ``f ^ g``.

    Basis monomials multiply to zero when their subsets intersect, otherwise
    to the merged subset times the merge sign.
    """
    f._check_same(g)
    n_gen = f.gens.count
    out = np.zeros(f.gens.dim, dtype=np.complex128)
    if n_gen <= _TABLE_MAX:
        j, k, u, sgn = _pair_table(n_gen)
        vals = sgn * f.coeffs[j] * g.coeffs[k]
        _scatter_accumulate(out, u, vals)
        return GrassmannElement(f.gens, out)

    # sparse path: loop over nonzero coefficient pairs
    jnz = f.nonzero_masks().astype(np.uint32)
    knz = g.nonzero_masks().astype(np.uint32)
    if jnz.size == 0 or knz.size == 0:
        return GrassmannElement(f.gens, out)
    fj = f.coeffs[jnz]
    # chunk over jnz to bound the pair-array size
    chunk = max(1, (1 << 22) // max(1, knz.size))
    for start in range(0, jnz.size, chunk):
        jblk = jnz[start:start + chunk]
        fblk = fj[start:start + chunk]
        jj = np.repeat(jblk, knz.size)
        kk = np.tile(knz, jblk.size)
        keep = (jj & kk) == 0
        if not np.any(keep):
            continue
        jj, kk = jj[keep], kk[keep]
        vals = np.repeat(fblk, knz.size)[keep] * g.coeffs[kk]
        vals *= _merge_sign_array(jj, kk, n_gen)
        _scatter_accumulate(out, jj | kk, vals)
    return GrassmannElement(f.gens, out)


def derivative(f: GrassmannElement, k: int) -> GrassmannElement:
    """Left derivative with respect to generator ``k``."""
    if not 0 <= k < f.gens.count:
        raise IndexError(f"generator index {k} out of range 0..{f.gens.count - 1}")
    src, dst, sgn = _deriv_table(f.gens.count, k)
    out = np.zeros(f.gens.dim, dtype=np.complex128)
    out[dst] = sgn * f.coeffs[src]
    return GrassmannElement(f.gens, out)


def gradient(f: GrassmannElement) -> np.ndarray:
    """All left derivatives, stacked into an (n_gen, dim) coefficient array."""
    n_gen = f.gens.count
    out = np.zeros((n_gen, f.gens.dim), dtype=np.complex128)
    for k in range(n_gen):
        src, dst, sgn = _deriv_table(n_gen, k)
        out[k, dst] = sgn * f.coeffs[src]
    return out


def coefficient(f: GrassmannElement, subset: Iterable[int] | int) -> complex:
    """Coefficient of the ascending basis monomial for the given subset."""
    mask = subset if isinstance(subset, (int, np.integer)) else f.gens.mask(subset)
    if not 0 <= mask < f.gens.dim:
        raise IndexError(f"subset mask {mask} out of range")
    return complex(f.coeffs[mask])


def berezin_integrate(f: GrassmannElement, indices: Sequence[int]) -> GrassmannElement:
    """Berezin integral over the listed generators (applied in list order).

    Defined as iterated left differentiation; integrating over all
    generators extracts the top coefficient.
    """
    idx = list(indices)
    if len(set(idx)) != len(idx):
        raise ValueError("repeated index in Berezin integration list")
    out = f
    for k in idx:
        out = derivative(out, k)
    return out


def translate_double(f: GrassmannElement) -> GrassmannElement:
    """Substitute ``psi_i -> psi_i + theta_i`` on a doubled generator set.

    The result lives on ``2 * count`` generators with the original psi block
    first (bits ``0..count-1``) and the theta block second.  Restricting the
    theta block to zero recovers ``f``.
    """
    n_gen = f.gens.count
    doubled = GeneratorSet(2 * n_gen, maximum=f.gens.maximum)
    out = np.zeros(doubled.dim, dtype=np.complex128)
    for mask in f.nonzero_masks():
        mask = int(mask)
        z = f.coeffs[mask]
        sub = mask
        while True:
            t = mask ^ sub  # theta-block subset
            out[sub | (t << n_gen)] += merge_sign(sub, t) * z
            if sub == 0:
                break
            sub = (sub - 1) & mask
    return GrassmannElement(doubled, out)


def analytic_apply(jet: Sequence[complex] | Callable[[int], complex],
                   f: GrassmannElement) -> GrassmannElement:
    """Apply a scalar analytic function to ``f`` through its Taylor jet.

    ``jet`` supplies the derivatives ``F^(k)(f_0)`` at the scalar part, either
    as a sequence indexed by ``k`` or as a callable.  The series terminates
    because the nilpotent part ``f - f_0`` has vanishing powers beyond the
    generator count.
    """
    n_gen = f.gens.count
    if callable(jet):
        deriv_at = jet
    else:
        seq = list(jet)

        def deriv_at(k: int) -> complex:
            return seq[k] if k < len(seq) else 0.0

    f1 = f.coeffs.copy()
    f1[0] = 0.0
    nilpotent = GrassmannElement(f.gens, f1)
    acc = np.zeros(f.gens.dim, dtype=np.complex128)
    acc[0] = deriv_at(0)
    power = GrassmannElement.scalar(f.gens, 1.0)
    kfact = 1.0
    for k in range(1, n_gen + 1):
        power = wedge(power, nilpotent)
        kfact *= k
        if not np.any(power.coeffs):
            break
        acc += (deriv_at(k) / kfact) * power.coeffs
    return GrassmannElement(f.gens, acc)


def exp_of(f: GrassmannElement) -> GrassmannElement:
    """Exponential of an algebra element (terminating Taylor series)."""
    e0 = np.exp(f.scalar_part)
    return analytic_apply(lambda k: e0, f)


def log_of(f: GrassmannElement) -> GrassmannElement:
    """Logarithm of an element whose scalar part is real positive.

    The scalar part must satisfy ``Re f0 > 0`` and ``|Im f0| <= 1e-12 |f0|``.
    """
    f0 = f.scalar_part
    if not (f0.real > 0.0 and abs(f0.imag) <= 1e-12 * abs(f0)):
        raise LogDomainError(
            f"log requires a positive real scalar part, got {f0}", scalar_part=f0
        )

    def deriv_at(k: int) -> complex:
        if k == 0:
            return math.log(f0.real)
        return (-1.0) ** (k - 1) * math.factorial(k - 1) / f0.real ** k

    return analytic_apply(deriv_at, f)


def parity_split(f: GrassmannElement) -> tuple[GrassmannElement, GrassmannElement]:
    """Decompose ``f`` into its even-degree and odd-degree parts."""
    pop = _popcount_table(f.gens.count)
    odd = (pop & 1).astype(bool)
    even_c = f.coeffs.copy()
    odd_c = f.coeffs.copy()
    even_c[odd] = 0.0
    odd_c[~odd] = 0.0
    return GrassmannElement(f.gens, even_c), GrassmannElement(f.gens, odd_c)


def project_degree_ge(f: GrassmannElement, d: int) -> GrassmannElement:
    """Zero every coefficient of monomial degree below ``d``."""
    if d < 0:
        raise ValueError("degree threshold must be nonnegative")
    pop = _popcount_table(f.gens.count)
    c = f.coeffs.copy()
    c[pop < d] = 0.0
    return GrassmannElement(f.gens, c)
