"""Truncated multivariate Taylor arithmetic.

A :class:`TaylorScalar` stores the coefficients of a polynomial in offsets
from an expansion point, truncated at a total degree.  Coefficients are
Taylor-normalized: the entry for multi-index ``alpha`` is
``d^alpha f / alpha!``, so multiplication is a plain truncated convolution
and all operations reproduce exact polynomial coefficients within the
degree budget.

The supported degree cap is :data:`MAX_DEGREE`.  Degree 3 covers every
derivative required by the verification conditions; the extra headroom is
used when derived fields (extracted coefficient matrices, Euler-Lagrange
outputs) are themselves expanded to third order.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from contextvars import ContextVar
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

from .errors import ConfigurationError, DomainError, SingularDenominatorError

MAX_DEGREE = 6

# Constant terms of divisors / fractional-power bases smaller than this are
# treated as singular: the series recurrences lose all accuracy there and the
# model denominators genuinely vanish on measure-zero sets.
SINGULAR_EPS = 1e-12

# Optional recorder for the smallest |constant term| seen in denominators and
# fractional-power bases; samplers use it to reject near-singular points.
_den_watch: ContextVar[list | None] = ContextVar("edskit_den_watch", default=None)


@contextmanager
def watch_denominators():
    """Record min |constant term| of every divisor/base inside the block.

    Yields a one-element list; element 0 holds the running minimum.
    """
    rec = [math.inf]
    token = _den_watch.set(rec)
    try:
        yield rec
    finally:
        _den_watch.reset(token)


def _note_denominator(value: float) -> None:
    rec = _den_watch.get()
    if rec is not None and abs(value) < rec[0]:
        rec[0] = abs(value)


@lru_cache(maxsize=None)
def space(num_vars: int, max_degree: int) -> "TaylorSpace":
    return TaylorSpace(num_vars, max_degree)


class TaylorSpace:
    """Shared tables for one (num_vars, max_degree) coefficient layout.

    Monomials are enumerated in graded order (total degree, then the
    combination order of variable picks), so truncating to a lower degree is
    a prefix slice.
    """

    def __init__(self, num_vars: int, max_degree: int):
        if num_vars < 1:
            raise ConfigurationError("TaylorSpace needs at least one variable")
        if not 0 <= max_degree <= MAX_DEGREE:
            raise ConfigurationError(
                f"degree {max_degree} outside supported range 0..{MAX_DEGREE}")
        self.num_vars = num_vars
        self.max_degree = max_degree
        monomials: list[tuple[int, ...]] = []
        for total in range(max_degree + 1):
            for picks in combinations_with_replacement(range(num_vars), total):
                multi = [0] * num_vars
                for i in picks:
                    multi[i] += 1
                monomials.append(tuple(multi))
        self.monomials = monomials
        self.size = len(monomials)
        self.index_of = {m: i for i, m in enumerate(monomials)}
        self.degrees = np.array([sum(m) for m in monomials], dtype=np.int64)
        self._mul_table: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
        self._pderiv_tables: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self._reindex_cache: dict = {}

    def _multiply_table(self):
        if self._mul_table is None:
            I, J, K = [], [], []
            for i, mi in enumerate(self.monomials):
                di = sum(mi)
                for j, mj in enumerate(self.monomials):
                    if di + sum(mj) > self.max_degree:
                        continue
                    k = self.index_of[tuple(a + b for a, b in zip(mi, mj))]
                    I.append(i)
                    J.append(j)
                    K.append(k)
            self._mul_table = (np.array(I), np.array(J), np.array(K))
        return self._mul_table

    def _pderiv_table(self, var: int):
        """(src, dst, factor): coefficients of d/dx_var as index moves."""
        tab = self._pderiv_tables.get(var)
        if tab is None:
            src, dst, fac = [], [], []
            for i, m in enumerate(self.monomials):
                if m[var] == 0:
                    continue
                lower = list(m)
                lower[var] -= 1
                src.append(i)
                dst.append(self.index_of[tuple(lower)])
                fac.append(float(m[var]))
            tab = (np.array(src), np.array(dst), np.array(fac))
            self._pderiv_tables[var] = tab
        return tab

    def constant(self, value: float) -> "TaylorScalar":
        coeffs = np.zeros(self.size)
        coeffs[0] = value
        return TaylorScalar(self, coeffs)

    def variable(self, var: int, value: float) -> "TaylorScalar":
        """Seed: value plus a unit first-order coefficient in direction var."""
        coeffs = np.zeros(self.size)
        coeffs[0] = value
        if self.max_degree >= 1:
            coeffs[1 + var] = 1.0
        return TaylorScalar(self, coeffs)


def _outer_compose(x: "TaylorScalar", outer: list[float]) -> "TaylorScalar":
    """sum_k outer[k] * (x - x0)^k, truncated; outer[k] = g^(k)(x0)/k!."""
    sp = x.space
    u = TaylorScalar(sp, x.coeffs.copy())
    u.coeffs[0] = 0.0
    acc = sp.constant(outer[0])
    power = None
    for k in range(1, min(len(outer), sp.max_degree + 1)):
        power = u if power is None else power * u
        if outer[k] != 0.0:
            acc = acc + power * outer[k]
    return acc


class TaylorScalar:
    """Immutable truncated Taylor expansion; supports mixed arithmetic with floats."""

    __slots__ = ("space", "coeffs")

    def __init__(self, space: TaylorSpace, coeffs: np.ndarray):
        self.space = space
        self.coeffs = coeffs

    @property
    def const(self) -> float:
        return float(self.coeffs[0])

    def coefficient(self, multi: tuple[int, ...]) -> float:
        """Taylor-normalized coefficient for the multi-index."""
        idx = self.space.index_of.get(tuple(multi))
        if idx is None:
            raise ConfigurationError(f"multi-index {multi} outside space")
        return float(self.coeffs[idx])

    def derivative(self, multi: tuple[int, ...]) -> float:
        """Partial derivative value: coefficient times alpha!."""
        fac = 1.0
        for m in multi:
            fac *= math.factorial(m)
        return self.coefficient(multi) * fac

    def _coerce(self, other):
        if isinstance(other, TaylorScalar):
            if other.space is not self.space:
                raise ConfigurationError("mixing TaylorScalars from different spaces")
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return None  # handled scalar-wise
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if o is None:
            out = self.coeffs.copy()
            out[0] += float(other)
            return TaylorScalar(self.space, out)
        return TaylorScalar(self.space, self.coeffs + o.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return TaylorScalar(self.space, -self.coeffs)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if o is None:
            out = self.coeffs.copy()
            out[0] -= float(other)
            return TaylorScalar(self.space, out)
        return TaylorScalar(self.space, self.coeffs - o.coeffs)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if o is None:
            return TaylorScalar(self.space, self.coeffs * float(other))
        I, J, K = self.space._multiply_table()
        prod = np.bincount(K, weights=self.coeffs[I] * o.coeffs[J],
                           minlength=self.space.size)
        return TaylorScalar(self.space, prod)

    __rmul__ = __mul__

    def recip(self) -> "TaylorScalar":
        c0 = self.const
        _note_denominator(c0)
        if abs(c0) < SINGULAR_EPS:
            raise SingularDenominatorError(
                f"division by series with constant term {c0!r}")
        outer = [(-1.0) ** k / c0 ** (k + 1)
                 for k in range(self.space.max_degree + 1)]
        return _outer_compose(self, outer)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if o is None:
            d = float(other)
            _note_denominator(d)
            if abs(d) < SINGULAR_EPS:
                raise SingularDenominatorError(f"division by {d!r}")
            return TaylorScalar(self.space, self.coeffs / d)
        return self * o.recip()

    def __rtruediv__(self, other):
        return self.recip() * other

    def __pow__(self, p):
        if isinstance(p, TaylorScalar):
            return NotImplemented
        if isinstance(p, (int, np.integer)) or (isinstance(p, float) and p.is_integer()):
            n = int(p)
            if n == 0:
                return self.space.constant(1.0)
            base = self if n > 0 else self.recip()
            out = base
            for _ in range(abs(n) - 1):
                out = out * base
            return out
        return self.powf(float(p))

    def powf(self, p: float) -> "TaylorScalar":
        """Fractional power; requires a positive constant term."""
        c0 = self.const
        _note_denominator(c0)
        if c0 < SINGULAR_EPS:
            raise DomainError(
                f"fractional power {p} of series with constant term {c0!r}")
        outer, coef = [], 1.0
        for k in range(self.space.max_degree + 1):
            outer.append(coef * c0 ** (p - k))
            coef *= (p - k) / (k + 1)
        return _outer_compose(self, outer)

    def sqrt(self) -> "TaylorScalar":
        if self.const < 0.0:
            raise DomainError(f"sqrt of series with negative constant term {self.const!r}")
        return self.powf(0.5)

    def exp(self) -> "TaylorScalar":
        e0 = math.exp(self.const)
        outer = [e0 / math.factorial(k) for k in range(self.space.max_degree + 1)]
        return _outer_compose(self, outer)

    def sin(self) -> "TaylorScalar":
        s0, c0 = math.sin(self.const), math.cos(self.const)
        cycle = [s0, c0, -s0, -c0]
        outer = [cycle[k % 4] / math.factorial(k)
                 for k in range(self.space.max_degree + 1)]
        return _outer_compose(self, outer)

    def cos(self) -> "TaylorScalar":
        s0, c0 = math.sin(self.const), math.cos(self.const)
        cycle = [c0, -s0, -c0, s0]
        outer = [cycle[k % 4] / math.factorial(k)
                 for k in range(self.space.max_degree + 1)]
        return _outer_compose(self, outer)

    def absval(self) -> "TaylorScalar":
        if self.const > 0.0:
            return self
        if self.const < 0.0:
            return -self
        raise DomainError("abs of series with zero constant term is not differentiable")

    def pderiv(self, var: int) -> "TaylorScalar":
        """Polynomial derivative: the truncated expansion of d(self)/dx_var."""
        src, dst, fac = self.space._pderiv_table(var)
        out = np.zeros(self.space.size)
        if len(src):
            np.add.at(out, dst, self.coeffs[src] * fac)
        return TaylorScalar(self.space, out)

    def truncated(self, new_degree: int) -> "TaylorScalar":
        """Drop to a lower-degree space over the same variables (prefix slice)."""
        if new_degree >= self.space.max_degree:
            return self
        target = space(self.space.num_vars, new_degree)
        return TaylorScalar(target, self.coeffs[:target.size].copy())

    def poly_eval(self, offsets: list):
        """Evaluate the truncated polynomial at the given per-variable offsets.

        Offsets may be plain numbers or TaylorScalars of one common space.
        When every offset is either zero or a pure unit seed of a distinct
        variable of that space, the composition reduces to coefficient
        reindexing and is done vectorized.
        """
        mapping = _seed_mapping(offsets)
        if mapping is not None:
            outer_space, var_map = mapping
            if outer_space is None:  # all offsets are plain zeros
                return self.const
            return self._reindex(outer_space, var_map)
        # general path: sum of coefficient * product of offset powers
        nz = np.nonzero(self.coeffs)[0]
        acc = 0.0
        powers: dict[int, list] = {}
        for idx in nz:
            multi = self.space.monomials[idx]
            term = float(self.coeffs[idx])
            for var, exp in enumerate(multi):
                if exp == 0:
                    continue
                plist = powers.setdefault(var, [1.0, offsets[var]])
                while len(plist) <= exp:
                    plist.append(plist[-1] * offsets[var])
                term = plist[exp] * term
            acc = acc + term
        return acc

    def _reindex(self, outer_space: TaylorSpace, var_map: tuple):
        key = (outer_space.num_vars, outer_space.max_degree, var_map)
        tab = self.space._reindex_cache.get(key)
        if tab is None:
            src, dst = [], []
            for i, m in enumerate(self.space.monomials):
                out_multi = [0] * outer_space.num_vars
                ok = True
                for var, exp in enumerate(m):
                    if exp == 0:
                        continue
                    tgt = var_map[var]
                    if tgt is None:
                        ok = False
                        break
                    out_multi[tgt] += exp
                if not ok or sum(out_multi) > outer_space.max_degree:
                    continue
                src.append(i)
                dst.append(outer_space.index_of[tuple(out_multi)])
            tab = (np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64))
            self.space._reindex_cache[key] = tab
        src, dst = tab
        out = np.zeros(outer_space.size)
        if len(src):
            np.add.at(out, dst, self.coeffs[src])
        return TaylorScalar(outer_space, out)

    def __repr__(self):
        nz = np.nonzero(self.coeffs)[0][:8]
        terms = ", ".join(f"{self.space.monomials[i]}:{self.coeffs[i]:.6g}" for i in nz)
        return f"TaylorScalar({self.space.num_vars}v@{self.space.max_degree}; {terms})"


def _seed_mapping(offsets):
    """Detect offsets that are zeros / pure unit seeds; return (space, var_map).

    var_map[i] is the outer variable seeded by offsets[i], or None for a zero
    offset.  Returns (None, ...) when all offsets are plain zeros and None when
    the offsets are not of the recognized shape.
    """
    outer = None
    var_map = []
    seen = set()
    for off in offsets:
        if isinstance(off, TaylorScalar):
            if outer is None:
                outer = off.space
            elif off.space is not outer:
                return None
            nz = np.nonzero(off.coeffs)[0]
            if len(nz) == 0:
                var_map.append(None)
                continue
            if len(nz) != 1:
                return None
            slot = int(nz[0])
            if not (1 <= slot <= outer.num_vars) or off.coeffs[slot] != 1.0:
                return None
            var = slot - 1
            if var in seen:
                return None
            seen.add(var)
            var_map.append(var)
        else:
            if float(off) != 0.0:
                return None
            var_map.append(None)
    if outer is None:
        return (None, None)
    return outer, tuple(var_map)


# Generic math helpers usable on floats and TaylorScalars alike.

def sqrt_g(x):
    if isinstance(x, TaylorScalar):
        return x.sqrt()
    if x < 0.0:
        raise DomainError(f"sqrt of negative value {x!r}")
    return math.sqrt(x)


def abs_g(x):
    return x.absval() if isinstance(x, TaylorScalar) else abs(x)


def sin_g(x):
    return x.sin() if isinstance(x, TaylorScalar) else math.sin(x)


def cos_g(x):
    return x.cos() if isinstance(x, TaylorScalar) else math.cos(x)


def exp_g(x):
    return x.exp() if isinstance(x, TaylorScalar) else math.exp(x)


def pow_g(x, p):
    if isinstance(x, TaylorScalar):
        return x ** p
    if isinstance(p, (int, np.integer)) or (isinstance(p, float) and p.is_integer()):
        n = int(p)
        if n < 0:
            _note_denominator(x)
            if abs(x) < SINGULAR_EPS:
                raise SingularDenominatorError(f"{x!r} ** {n}")
        return float(x) ** n
    _note_denominator(x)
    if x < SINGULAR_EPS:
        raise DomainError(f"fractional power {p} of non-positive base {x!r}")
    return float(x) ** p


def div_g(x, y):
    if isinstance(y, TaylorScalar) or isinstance(x, TaylorScalar):
        if not isinstance(x, TaylorScalar):
            return y.__rtruediv__(x)
        return x / y
    _note_denominator(y)
    if abs(y) < SINGULAR_EPS:
        raise SingularDenominatorError(f"division by {y!r}")
    return x / y


def constant_part(x) -> float:
    return x.const if isinstance(x, TaylorScalar) else float(x)
