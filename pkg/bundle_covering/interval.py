"""
Rigorous interval arithmetic on numpy endpoint arrays.

An ``Interval`` carries two float64 arrays of the same shape, so one object is
either a single interval (shape ``()``) or a batch of independent intervals
(shape ``(n,)``). Every operation works elementwise on batches.

Outward rounding: each +, -, *, / computes the float result together with its
exact error term (TwoSum, Dekker's TwoProduct, the exact division residual).
An endpoint is moved one float outward only when the error term shows that the
float result lies on the wrong side of the exact value, so exactly
representable results stay exact (``[1,2] + [3,4] == [4,6]``). Outside the
range where the error-free transformations are exact the endpoint is nudged
unconditionally.

sin/cos evaluate the library function at the endpoints, pad the values by
2**-49 relative (the library is assumed accurate to 4 ulp) and decide whether
an extremum lies inside the argument interval with a slack of 1e-9 periods, so
a borderline extremum is always included. Arguments beyond 2**20 give [-1, 1].
"""

from __future__ import annotations

import math
from decimal import Decimal
from fractions import Fraction
from numbers import Integral

import numpy as np

from .errors import DivisionByZeroError, IntervalError, IntervalOverflowError

_UP = np.inf
_DOWN = -np.inf

# Dekker splitting constant 2**27 + 1
_SPLITTER = 134217729.0
_EFT_MAX = 2.0 ** 995
_EFT_MIN = 2.0 ** -960

_TRIG_PAD = 2.0 ** -49
_TRIG_MAX_ARG = 2.0 ** 20
_TRIG_BRANCH_SLACK = 1e-9


def _in_eft_range(value):
    magnitude = np.abs(value)
    return (magnitude < _EFT_MAX) & ((magnitude > _EFT_MIN) | (value == 0))


def _two_sum(a, b):
    s = a + b
    b_virtual = s - a
    a_virtual = s - b_virtual
    return s, (a - a_virtual) + (b - b_virtual)


def _split(a):
    c = _SPLITTER * a
    high = c - (c - a)
    return high, a - high


def _two_product(a, b):
    """Float product, its exact error term, and where that error term is trustworthy"""
    p = a * b
    a_high, a_low = _split(a)
    b_high, b_low = _split(b)
    err = a_low * b_low - (((p - a_high * b_high) - a_low * b_high) - a_high * b_low)
    exact = (
        _in_eft_range(a)
        & _in_eft_range(b)
        & _in_eft_range(p)
        & ((p != 0) | (a == 0) | (b == 0))
    )
    return p, err, exact


def _quotient(a, b):
    """Float quotient and the sign of (exact quotient - float quotient)"""
    q = a / b
    p, err, exact = _two_product(q, b)
    # a - q*b is representable and p is within a factor 2 of a, so a - p is exact
    residual = (a - p) - err
    direction = residual * np.sign(b)
    exact = exact & _in_eft_range(a) & ((q != 0) | (a == 0))
    return q, direction, exact


def _down(value, err, exact=True):
    # exact value = value + err; NaN error terms compare False and get nudged
    return np.where(exact & (err >= 0), value, np.nextafter(value, _DOWN))


def _up(value, err, exact=True):
    return np.where(exact & (err <= 0), value, np.nextafter(value, _UP))


def _as_result(mask):
    mask = np.asarray(mask)
    return bool(mask) if mask.ndim == 0 else mask


class Interval:
    """Closed interval (or batch of intervals) with finite float64 endpoints"""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        lo = np.array(lo, dtype=np.float64)
        hi = lo if hi is None else np.array(hi, dtype=np.float64)
        if lo.shape != hi.shape:
            lo, hi = (np.array(v) for v in np.broadcast_arrays(lo, hi))
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise IntervalOverflowError("interval endpoint is not finite")
        if (lo > hi).any():
            bad = np.flatnonzero(np.atleast_1d(lo > hi))[0]
            raise IntervalError(
                f"lower endpoint exceeds upper endpoint: "
                f"[{np.atleast_1d(lo)[bad]!r}, {np.atleast_1d(hi)[bad]!r}]"
            )
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("Interval is immutable")

    # --- construction -----------------------------------------------------

    @classmethod
    def from_decimal(cls, value) -> "Interval":
        """Tightest interval containing an exact decimal, fraction or integer

        ``value`` may be a string such as ``"1.2"`` or ``"1/10"``, a Decimal, a
        Fraction or an int. Floats are taken at their exact binary value.
        """
        try:
            exact = Fraction(value.strip()) if isinstance(value, str) else Fraction(value)
        except (ValueError, TypeError, ZeroDivisionError) as e:
            raise IntervalError(f"not an exact number: {value!r} ({e})") from e
        try:
            nearest = float(exact)
        except OverflowError as e:
            raise IntervalOverflowError(f"number out of float range: {value!r}") from e
        rounded = Fraction(nearest)
        if rounded == exact:
            return cls(nearest)
        if rounded < exact:
            return cls(nearest, math.nextafter(nearest, math.inf))
        return cls(math.nextafter(nearest, -math.inf), nearest)

    @classmethod
    def coerce(cls, value) -> "Interval":
        if isinstance(value, Interval):
            return value
        if isinstance(value, (bool, np.bool_)):
            raise IntervalError(f"cannot use a boolean as an interval: {value!r}")
        if isinstance(value, Integral):
            return cls.from_decimal(int(value))
        if isinstance(value, (float, np.floating, np.ndarray)):
            return cls(value)
        if isinstance(value, (Fraction, Decimal, str)):
            return cls.from_decimal(value)
        raise IntervalError(f"cannot convert {type(value).__name__} to an interval")

    @staticmethod
    def where(mask, if_true: "Interval", if_false: "Interval") -> "Interval":
        return Interval(
            np.where(mask, if_true.lo, if_false.lo),
            np.where(mask, if_true.hi, if_false.hi),
        )

    @staticmethod
    def concat(items) -> "Interval":
        items = list(items)
        if not items:
            return Interval(np.empty(0))
        return Interval(
            np.concatenate([np.atleast_1d(i.lo) for i in items]),
            np.concatenate([np.atleast_1d(i.hi) for i in items]),
        )

    # --- shape ------------------------------------------------------------

    @property
    def shape(self):
        return self.lo.shape

    @property
    def size(self) -> int:
        return int(self.lo.size)

    def __len__(self):
        if not self.lo.shape:
            raise TypeError("a single interval has no length")
        return self.lo.shape[0]

    def __getitem__(self, index) -> "Interval":
        return Interval(self.lo[index], self.hi[index])

    def repeat(self, counts) -> "Interval":
        return Interval(np.repeat(self.lo, counts), np.repeat(self.hi, counts))

    def broadcast(self, shape) -> "Interval":
        return Interval(np.broadcast_to(self.lo, shape), np.broadcast_to(self.hi, shape))

    # --- arithmetic -------------------------------------------------------

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __pos__(self):
        return self

    def __add__(self, other):
        other = Interval.coerce(other)
        with np.errstate(over="ignore", invalid="ignore"):
            lo, lo_err = _two_sum(self.lo, other.lo)
            hi, hi_err = _two_sum(self.hi, other.hi)
            return Interval(_down(lo, lo_err), _up(hi, hi_err))

    __radd__ = __add__

    def __sub__(self, other):
        other = Interval.coerce(other)
        with np.errstate(over="ignore", invalid="ignore"):
            lo, lo_err = _two_sum(self.lo, -other.hi)
            hi, hi_err = _two_sum(self.hi, -other.lo)
            return Interval(_down(lo, lo_err), _up(hi, hi_err))

    def __rsub__(self, other):
        return Interval.coerce(other) - self

    def __mul__(self, other):
        other = Interval.coerce(other)
        downs, ups = [], []
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            for a in (self.lo, self.hi):
                for b in (other.lo, other.hi):
                    p, err, exact = _two_product(a, b)
                    downs.append(_down(p, err, exact))
                    ups.append(_up(p, err, exact))
            return Interval(np.minimum.reduce(downs), np.maximum.reduce(ups))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Interval.coerce(other)
        if ((other.lo <= 0) & (other.hi >= 0)).any():
            raise DivisionByZeroError("division by interval containing zero")
        downs, ups = [], []
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            for a in (self.lo, self.hi):
                for b in (other.lo, other.hi):
                    q, direction, exact = _quotient(a, b)
                    downs.append(np.where(exact & (direction >= 0), q, np.nextafter(q, _DOWN)))
                    ups.append(np.where(exact & (direction <= 0), q, np.nextafter(q, _UP)))
            return Interval(np.minimum.reduce(downs), np.maximum.reduce(ups))

    def __rtruediv__(self, other):
        return Interval.coerce(other) / self

    def __pow__(self, n):
        return power(self, n)

    def __abs__(self):
        lo = np.where(self.lo >= 0, self.lo, np.where(self.hi <= 0, -self.hi, 0.0))
        hi = np.maximum(np.abs(self.lo), np.abs(self.hi))
        return Interval(lo, hi)

    # --- set operations ---------------------------------------------------

    def bisect(self):
        mid = np.clip(0.5 * self.lo + 0.5 * self.hi, self.lo, self.hi)
        return Interval(self.lo, mid), Interval(mid, self.hi)

    def total(self) -> "Interval":
        """Enclosure of the sum of a batch, added pairwise"""
        if not self.shape:
            return self
        acc = self
        while acc.size > 1:
            even = acc.size - acc.size % 2
            paired = acc[0:even:2] + acc[1:even:2]
            acc = Interval.concat([paired, acc[even:]]) if acc.size % 2 else paired
        return acc[0] if acc.size else Interval(0.0)

    # --- comparison and display -------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, Interval):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )

    def __hash__(self):
        return hash((self.shape, self.lo.tobytes(), self.hi.tobytes()))

    def __repr__(self):
        if self.shape:
            return f"Interval(shape={self.shape})"
        return f"Interval({float(self.lo)!r}, {float(self.hi)!r})"

    def __str__(self):
        if self.shape:
            return repr(self)
        return f"[{float(self.lo)!r}, {float(self.hi)!r}]"


PI = Interval(math.pi, math.nextafter(math.pi, math.inf))
TWO_PI = PI * 2
UNIT = Interval(0.0, 1.0)


# --- elementary functions -------------------------------------------------


def _point_power(value, n: int) -> Interval:
    result = Interval(np.ones_like(value))
    base = Interval(value)
    while n:
        if n & 1:
            result = result * base
        n >>= 1
        if n:
            base = base * base
    return result


def power(a: Interval, n: int) -> Interval:
    """Tight enclosure of {x**n : x in a} for a natural exponent n"""
    if isinstance(n, (bool, np.bool_)) or not isinstance(n, Integral) or n < 0:
        raise IntervalError(f"power requires a natural exponent, got {n!r}")
    a = Interval.coerce(a)
    n = int(n)
    if n == 0:
        return Interval(np.ones_like(a.lo))
    if n == 1:
        return a
    at_lo = _point_power(a.lo, n)
    at_hi = _point_power(a.hi, n)
    if n % 2:
        return Interval(at_lo.lo, at_hi.hi)
    positive = a.lo >= 0
    negative = a.hi <= 0
    lo = np.where(positive, at_lo.lo, np.where(negative, at_hi.lo, 0.0))
    hi = np.where(
        positive, at_hi.hi, np.where(negative, at_lo.hi, np.maximum(at_lo.hi, at_hi.hi))
    )
    return Interval(lo, hi)


def sqr(a: Interval) -> Interval:
    return power(a, 2)


def _contains_branch_point(lo, hi, offset):
    """Whether offset + 2*k*pi may lie in [lo, hi] for some integer k"""
    period = 2.0 * math.pi
    first = np.ceil((lo - offset) / period - _TRIG_BRANCH_SLACK)
    last = np.floor((hi - offset) / period + _TRIG_BRANCH_SLACK)
    return first <= last


def _periodic_range(a: Interval, fn, peak: float, trough: float) -> Interval:
    a = Interval.coerce(a)
    at_lo = fn(a.lo)
    at_hi = fn(a.hi)
    low = np.minimum(at_lo, at_hi)
    high = np.maximum(at_lo, at_hi)
    low = np.nextafter(low - np.abs(low) * _TRIG_PAD, _DOWN)
    high = np.nextafter(high + np.abs(high) * _TRIG_PAD, _UP)
    unreduced = (np.abs(a.lo) > _TRIG_MAX_ARG) | (np.abs(a.hi) > _TRIG_MAX_ARG)
    high = np.where(
        unreduced | _contains_branch_point(a.lo, a.hi, peak), 1.0, np.minimum(high, 1.0)
    )
    low = np.where(
        unreduced | _contains_branch_point(a.lo, a.hi, trough), -1.0, np.maximum(low, -1.0)
    )
    return Interval(low, high)


def sin(a: Interval) -> Interval:
    return _periodic_range(a, np.sin, 0.5 * math.pi, 1.5 * math.pi)


def cos(a: Interval) -> Interval:
    return _periodic_range(a, np.cos, 0.0, math.pi)


# --- subdivision ----------------------------------------------------------


def parts(x: Interval, n: int) -> Interval:
    """All n parts of a single interval as a batch, in order

    Part k encloses [lo + k*w/n, lo + (k+1)*w/n] (w the width) and is clipped
    to x, so consecutive parts overlap by at most rounding and never leave a gap.
    """
    if n < 1:
        raise IntervalError(f"number of parts must be positive, got {n}")
    x = Interval.coerce(x)
    if x.shape:
        raise IntervalError("parts() subdivides a single interval, not a batch")
    ticks = Interval(x.lo) + Interval(np.arange(n + 1, dtype=np.float64)) * (
        Interval(x.hi) - Interval(x.lo)
    ) / n
    lo = np.maximum(ticks.lo[:-1], x.lo)
    hi = np.minimum(ticks.hi[1:], x.hi)
    lo[0] = x.lo
    hi[-1] = x.hi
    return Interval(lo, hi)


def part(x: Interval, n: int, k: int) -> Interval:
    """The k-th of n parts of x, k = 0, ..., n-1"""
    if not 0 <= k < n:
        raise IndexError(f"part index {k} out of range for {n} parts")
    return parts(x, n)[k]


# --- predicates -----------------------------------------------------------
# All predicates are conservative: True only when the relation provably holds.


def certainly_less(a: Interval, b: Interval):
    a, b = Interval.coerce(a), Interval.coerce(b)
    return _as_result(a.hi < b.lo)


def certainly_greater(a: Interval, b: Interval):
    a, b = Interval.coerce(a), Interval.coerce(b)
    return _as_result(a.lo > b.hi)


def subset(a: Interval, b: Interval):
    a, b = Interval.coerce(a), Interval.coerce(b)
    return _as_result((b.lo <= a.lo) & (a.hi <= b.hi))


def subset_interior(a: Interval, b: Interval):
    a, b = Interval.coerce(a), Interval.coerce(b)
    return _as_result((b.lo < a.lo) & (a.hi < b.hi))


def contains(a: Interval, p):
    a = Interval.coerce(a)
    return _as_result((a.lo <= p) & (p <= a.hi))


def intersects(a: Interval, b: Interval):
    a, b = Interval.coerce(a), Interval.coerce(b)
    return _as_result((a.lo <= b.hi) & (b.lo <= a.hi))


def width(a: Interval):
    """Upper bound of hi - lo"""
    a = Interval.coerce(a)
    with np.errstate(over="ignore", invalid="ignore"):
        s, err = _two_sum(a.hi, -a.lo)
        w = _up(s, err)
    return float(w) if w.ndim == 0 else w


def midpoint(a: Interval):
    a = Interval.coerce(a)
    m = np.clip(0.5 * a.lo + 0.5 * a.hi, a.lo, a.hi)
    return float(m) if np.ndim(m) == 0 else m
