"""Forward-mode truncated-Taylor (jet) arithmetic up to total order 4.

A Jet stores the Taylor coefficients of a smooth function at a point, over a
fixed set of active variables, truncated at a total degree <= 4.  Arithmetic
is exact truncated-polynomial algebra: products are Cauchy products cut at
the truncation degree, elementary functions are applied by composing with
their univariate Taylor expansions.  Mixed partial derivatives are then read
off the coefficients exactly (no step-size error).

Conventions:
  * coefficients are Taylor coefficients, i.e. the coefficient of the
    monomial ``prod(v_i^e_i)`` is ``partial^e f / prod(e_i!)``;
  * ``extract_partial`` converts back to true mixed partials;
  * each jet carries a validity ``order``: coefficients of higher degree are
    identically zero and are not meaningful (they drop out of any result).

Jets are immutable value types; all operations return fresh jets and are safe
to use from multiple threads.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Iterable, Sequence, Union

import numpy as np

MAX_ORDER = 4

Scalar = Union[int, float, "Jet"]


class DomainError(ArithmeticError):
    """A value left the domain where the requested operation is smooth.

    ``reason`` is a short machine-readable tag (``division-by-zero``,
    ``log-domain``, ``sqrt-domain``, ``power-domain``, ``abs-domain``) used by
    admissibility probing to classify why a tangent-bundle point fails.
    """

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


def _monomials(nvars: int, order: int) -> list[tuple[int, ...]]:
    """All exponent tuples with total degree <= order, graded order."""
    mons: list[tuple[int, ...]] = []
    for deg in range(order + 1):
        block = set()
        for combo in combinations_with_replacement(range(nvars), deg):
            e = [0] * nvars
            for v in combo:
                e[v] += 1
            block.add(tuple(e))
        mons.extend(sorted(block))
    return mons


class JetSpace:
    """Shared immutable tables for jets of a given (nvars, order) signature."""

    def __init__(self, nvars: int, order: int):
        if nvars < 0:
            raise ValueError("nvars must be >= 0")
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"order must be in 0..{MAX_ORDER}, got {order}")
        self.nvars = nvars
        self.order = order
        self.monomials = _monomials(nvars, order)
        self.ncoeff = len(self.monomials)
        self.index = {m: i for i, m in enumerate(self.monomials)}
        self.degrees = np.array([sum(m) for m in self.monomials], dtype=np.int64)
        # graded order => all monomials of degree <= d form a prefix
        self.ncoeff_upto = [int(np.sum(self.degrees <= d)) for d in range(order + 1)]

        # Cauchy-product table sorted by total degree of the product, so the
        # slice [:pair_count[v]] multiplies exactly up to validity v.
        pairs = []
        for i, mi in enumerate(self.monomials):
            di = sum(mi)
            for j, mj in enumerate(self.monomials):
                dj = sum(mj)
                if di + dj > order:
                    continue
                k = self.index[tuple(a + b for a, b in zip(mi, mj))]
                pairs.append((di + dj, i, j, k))
        pairs.sort(key=lambda t: t[0])
        self._mul_i = np.array([p[1] for p in pairs], dtype=np.int64)
        self._mul_j = np.array([p[2] for p in pairs], dtype=np.int64)
        self._mul_k = np.array([p[3] for p in pairs], dtype=np.int64)
        degs = np.array([p[0] for p in pairs], dtype=np.int64)
        self.pair_count = [int(np.sum(degs <= v)) for v in range(order + 1)]

        # per-variable polynomial differentiation maps
        self._diff_src = []
        self._diff_dst = []
        self._diff_fac = []
        for v in range(nvars):
            src, dst, fac = [], [], []
            for i, m in enumerate(self.monomials):
                if m[v] == 0:
                    continue
                lower = list(m)
                lower[v] -= 1
                src.append(i)
                dst.append(self.index[tuple(lower)])
                fac.append(float(m[v]))
            self._diff_src.append(np.array(src, dtype=np.int64))
            self._diff_dst.append(np.array(dst, dtype=np.int64))
            self._diff_fac.append(np.array(fac, dtype=np.float64))

    def constant(self, value: float, order: int | None = None) -> "Jet":
        c = np.zeros(self.ncoeff)
        c[0] = float(value)
        return Jet(self, c, self.order if order is None else order)


@lru_cache(maxsize=None)
def jet_space(nvars: int, order: int) -> JetSpace:
    return JetSpace(nvars, order)


class Jet:
    """Truncated multivariate Taylor value; see module docstring."""

    __slots__ = ("space", "coeffs", "order")

    def __init__(self, space: JetSpace, coeffs: np.ndarray, order: int):
        self.space = space
        self.coeffs = coeffs
        self.order = order

    # -- coefficient access ---------------------------------------------

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def first(self, var: int) -> float:
        """First partial derivative with respect to active variable `var`."""
        e = [0] * self.space.nvars
        e[var] = 1
        return float(self.coeffs[self.space.index[tuple(e)]])

    def diff(self, var: int) -> "Jet":
        """Jet of the partial derivative; validity drops by one order."""
        if self.order < 1:
            raise ValueError("cannot differentiate an order-0 jet")
        sp = self.space
        out = np.zeros(sp.ncoeff)
        out[sp._diff_dst[var]] = self.coeffs[sp._diff_src[var]] * sp._diff_fac[var]
        return Jet(sp, out, self.order - 1)

    # -- coercion ---------------------------------------------------------

    def _lift(self, other) -> "Jet | None":
        if isinstance(other, Jet):
            if other.space is not self.space:
                raise ValueError("jets from different spaces cannot be combined")
            return other
        if isinstance(other, (int, float, np.integer, np.floating)):
            return self.space.constant(float(other))
        return None

    def _trunc(self, coeffs: np.ndarray, order: int) -> "Jet":
        cut = self.space.ncoeff_upto[order]
        if cut < self.space.ncoeff:
            coeffs[cut:] = 0.0
        return Jet(self.space, coeffs, order)

    # -- ring operations --------------------------------------------------

    def __add__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self._trunc(self.coeffs + o.coeffs, min(self.order, o.order))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self._trunc(self.coeffs - o.coeffs, min(self.order, o.order))

    def __rsub__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self._trunc(o.coeffs - self.coeffs, min(self.order, o.order))

    def __neg__(self):
        return Jet(self.space, -self.coeffs, self.order)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.integer, np.floating)):
            return Jet(self.space, self.coeffs * float(other), self.order)
        o = self._lift(other)
        if o is None:
            return NotImplemented
        sp = self.space
        order = min(self.order, o.order)
        cnt = sp.pair_count[order]
        prods = self.coeffs[sp._mul_i[:cnt]] * o.coeffs[sp._mul_j[:cnt]]
        out = np.bincount(sp._mul_k[:cnt], weights=prods, minlength=sp.ncoeff)
        return Jet(sp, out, order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.integer, np.floating)):
            if float(other) == 0.0:
                raise DomainError("division-by-zero")
            return Jet(self.space, self.coeffs / float(other), self.order)
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self * o._reciprocal()

    def __rtruediv__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return o * self._reciprocal()

    def __pow__(self, expo):
        if isinstance(expo, Jet):
            # general exponent: b^e = exp(e*ln b), needs positive base
            return (expo * self.ln()).exp()
        return powx(self, expo)

    # -- univariate composition -------------------------------------------

    def _compose(self, taylor: Sequence[float]) -> "Jet":
        """sum_k taylor[k] * (self - value)^k by Horner in the jet algebra."""
        h = Jet(self.space, self.coeffs.copy(), self.order)
        h.coeffs[0] = 0.0
        out = self.space.constant(taylor[self.order], self.order)
        for k in range(self.order - 1, -1, -1):
            out = out * h + taylor[k]
        return out

    def _reciprocal(self) -> "Jet":
        v = self.value
        if v == 0.0:
            raise DomainError("division-by-zero", "jet value is zero")
        return self._compose([(-1.0) ** k / v ** (k + 1) for k in range(self.order + 1)])

    def exp(self) -> "Jet":
        ev = math.exp(self.value)
        return self._compose([ev / math.factorial(k) for k in range(self.order + 1)])

    def ln(self) -> "Jet":
        v = self.value
        if v <= 0.0:
            raise DomainError("log-domain", f"ln of {v}")
        taylor = [math.log(v)]
        taylor += [(-1.0) ** (k + 1) / (k * v**k) for k in range(1, self.order + 1)]
        return self._compose(taylor)

    def sqrt(self) -> "Jet":
        v = self.value
        if v <= 0.0:
            raise DomainError("sqrt-domain", f"sqrt of {v}")
        taylor = [math.sqrt(v)]
        coef = 0.5
        for k in range(1, self.order + 1):
            taylor.append(coef * v ** (0.5 - k))
            coef *= (0.5 - k) / (k + 1)
        return self._compose(taylor)

    def sin(self) -> "Jet":
        s, c = math.sin(self.value), math.cos(self.value)
        cycle = [s, c, -s, -c]
        return self._compose(
            [cycle[k % 4] / math.factorial(k) for k in range(self.order + 1)]
        )

    def cos(self) -> "Jet":
        s, c = math.sin(self.value), math.cos(self.value)
        cycle = [c, -s, -c, s]
        return self._compose(
            [cycle[k % 4] / math.factorial(k) for k in range(self.order + 1)]
        )

    def __abs__(self) -> "Jet":
        v = self.value
        if v > 0.0:
            return self
        if v < 0.0:
            return -self
        raise DomainError("abs-domain", "abs is not differentiable at 0")

    def _powi(self, k: int) -> "Jet":
        if k < 0:
            if self.value == 0.0:
                raise DomainError("power-domain", "0 raised to a negative power")
            return self._powi(-k)._reciprocal()
        result = self.space.constant(1.0, self.order)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def _powr(self, r: float) -> "Jet":
        v = self.value
        if v <= 0.0:
            raise DomainError(
                "power-domain", f"non-integer power of non-positive base {v}"
            )
        taylor = [v**r]
        coef = r
        for k in range(1, self.order + 1):
            taylor.append(coef * v ** (r - k))
            coef *= (r - k) / (k + 1)
        return self._compose(taylor)

    def __repr__(self) -> str:
        return f"Jet(order={self.order}, value={self.value!r})"


# -- generic scalar helpers (accept floats or jets) --------------------------


def _is_number(v) -> bool:
    return isinstance(v, (int, float, np.integer, np.floating))


def sin(v: Scalar):
    return v.sin() if isinstance(v, Jet) else math.sin(v)


def cos(v: Scalar):
    return v.cos() if isinstance(v, Jet) else math.cos(v)


def exp(v: Scalar):
    return v.exp() if isinstance(v, Jet) else math.exp(v)


def ln(v: Scalar):
    if isinstance(v, Jet):
        return v.ln()
    if v <= 0.0:
        raise DomainError("log-domain", f"ln of {v}")
    return math.log(v)


def sqrt(v: Scalar):
    if isinstance(v, Jet):
        return v.sqrt()
    if v <= 0.0:
        raise DomainError("sqrt-domain", f"sqrt of {v}")
    return math.sqrt(v)


def absval(v: Scalar):
    return abs(v)


def divide(a: Scalar, b: Scalar):
    if _is_number(b) and float(b) == 0.0:
        raise DomainError("division-by-zero")
    if _is_number(a) and isinstance(b, Jet):
        return b.__rtruediv__(float(a))
    return a / b


def powx(base: Scalar, expo: Scalar):
    """base**expo with principal real semantics.

    Integer-valued exponents use repeated multiplication and are valid for
    any base (except 0 to a negative power); non-integer exponents require a
    strictly positive base.
    """
    if isinstance(expo, Jet):
        return (expo * ln(base)).exp()
    e = float(expo)
    if e.is_integer():
        k = int(e)
        if isinstance(base, Jet):
            return base._powi(k)
        b = float(base)
        if b == 0.0 and k < 0:
            raise DomainError("power-domain", "0 raised to a negative power")
        return b**k
    if isinstance(base, Jet):
        return base._powr(e)
    b = float(base)
    if b <= 0.0:
        raise DomainError("power-domain", f"non-integer power of non-positive base {b}")
    return b**e


# -- seeding and extraction ---------------------------------------------------


def seed(
    values: Sequence[float], active: Iterable[int], order: int
) -> list[Jet]:
    """Jets for a point, differentiating with respect to `active` variables.

    Returns one jet per input value.  Active variable slots are assigned in
    increasing original-index order; extraction indices refer to these slots.
    Inactive variables become constants.
    """
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in 1..{MAX_ORDER}, got {order}")
    active_sorted = sorted(set(active))
    if active_sorted and not (
        0 <= active_sorted[0] and active_sorted[-1] < len(values)
    ):
        raise ValueError("active indices out of range")
    sp = jet_space(len(active_sorted), order)
    slot = {var: i for i, var in enumerate(active_sorted)}
    out = []
    for i, v in enumerate(values):
        j = sp.constant(float(v))
        if i in slot:
            e = [0] * sp.nvars
            e[slot[i]] = 1
            j.coeffs[sp.index[tuple(e)]] = 1.0
        out.append(j)
    return out


def extract_partial(jet: Jet, multi_index: Sequence[int]) -> float:
    """True mixed partial derivative for the given variable-slot list.

    ``multi_index`` lists one entry per differentiation, e.g. ``[0, 1, 1]``
    for the third mixed partial d^3 f / (dv0 dv1^2).  Stored Taylor
    coefficients are multiplied back by the multinomial factorials.
    """
    e = [0] * jet.space.nvars
    for v in multi_index:
        e[v] += 1
    if sum(e) > jet.order:
        raise ValueError(
            f"requested order {sum(e)} exceeds jet validity order {jet.order}"
        )
    factor = 1.0
    for k in e:
        factor *= math.factorial(k)
    return float(jet.coeffs[jet.space.index[tuple(e)]]) * factor
