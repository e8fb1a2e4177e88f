"""Piecewise-smooth functions on (0, 1] built from x^m (ln x)^p terms.

The dual construction for general quota/rank counts repeatedly applies the
operator  f -> x^(N-1) [ A - int_x^b h(y)/y^N dy ]  to functions it built
earlier.  Linear combinations of x^m (ln x)^p with integer m and p >= 0 are
closed under that operator, so each segment of a piecewise function stores
its terms symbolically and integrals come from closed-form antiderivatives
(cached per segment and weight) instead of nested numeric quadrature.
Adaptive quadrature is still provided as the independent cross-check and
for callables with no symbolic form.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from typing import Callable, Iterable, Mapping, Sequence

TermKey = tuple[int, int]  # (power of x, power of ln x)


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge; carries the bad subinterval."""

    def __init__(self, message: str, interval: tuple[float, float]):
        super().__init__(f"{message} on [{interval[0]!r}, {interval[1]!r}]")
        self.interval = interval


class RootBracketError(RuntimeError):
    """Downward scan found no sign change where a root was required."""


class LogLinComb:
    """Finite sum of c * x^m * (ln x)^p with float coefficients.

    m may be negative (the construction divides by powers of y); p >= 0.
    Immutable by convention: all operations return new objects.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[TermKey, float] | None = None):
        # prune exact zeros only; coefficients are never rounded
        self.terms: dict[TermKey, float] = {
            k: float(v) for k, v in (terms or {}).items() if v != 0.0
        }

    @staticmethod
    def zero() -> "LogLinComb":
        return LogLinComb()

    @staticmethod
    def const(c: float) -> "LogLinComb":
        return LogLinComb({(0, 0): c})

    @staticmethod
    def from_x_poly(coeffs: Sequence[float]) -> "LogLinComb":
        """Polynomial in x: coeffs[m] multiplies x^m."""
        return LogLinComb({(m, 0): c for m, c in enumerate(coeffs)})

    @staticmethod
    def from_ln_poly(coeffs: Sequence[float]) -> "LogLinComb":
        """Polynomial in ln x: coeffs[p] multiplies (ln x)^p."""
        return LogLinComb({(0, p): c for p, c in enumerate(coeffs)})

    def __call__(self, x: float) -> float:
        if x <= 0.0:
            raise ValueError("log-linear combinations live on x > 0")
        ln = math.log(x)
        total = 0.0
        for (m, p), c in self.terms.items():
            total += c * x**m * ln**p
        return total

    def __add__(self, other: "LogLinComb") -> "LogLinComb":
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0.0) + v
        return LogLinComb(out)

    def __sub__(self, other: "LogLinComb") -> "LogLinComb":
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0.0) - v
        return LogLinComb(out)

    def scale(self, f: float) -> "LogLinComb":
        return LogLinComb({k: v * f for k, v in self.terms.items()})

    def shift_xpow(self, s: int) -> "LogLinComb":
        """Multiply by x^s."""
        return LogLinComb({(m + s, p): c for (m, p), c in self.terms.items()})

    def derivative(self) -> "LogLinComb":
        out: dict[TermKey, float] = {}
        for (m, p), c in self.terms.items():
            if m:
                k = (m - 1, p)
                out[k] = out.get(k, 0.0) + c * m
            if p:
                k = (m - 1, p - 1)
                out[k] = out.get(k, 0.0) + c * p
        return LogLinComb(out)

    def antiderivative(self) -> "LogLinComb":
        """F with F' = self, up to a constant.  Closed form per term:

        m == -1:  (ln x)^(p+1) / (p+1)
        m != -1:  x^(m+1) * sum_t (-1)^t p!/(p-t)! / (m+1)^(t+1) (ln x)^(p-t)
        """
        out: dict[TermKey, float] = {}
        for (m, p), c in self.terms.items():
            if m == -1:
                k = (0, p + 1)
                out[k] = out.get(k, 0.0) + c / (p + 1)
                continue
            fall = 1.0  # p!/(p-t)!
            sign = 1.0
            denom = m + 1
            for t in range(p + 1):
                k = (m + 1, p - t)
                out[k] = out.get(k, 0.0) + c * sign * fall / denom ** (t + 1)
                fall *= p - t
                sign = -sign
        return LogLinComb(out)


class PiecewiseFunction:
    """Function on [breakpoints[0], breakpoints[-1]], zero outside.

    segments[i] is the symbolic form on [breakpoints[i], breakpoints[i+1]];
    segments must agree at interior breakpoints (continuity is a property of
    the constructions that produce these, not enforced here).  Integral
    queries use per-segment antiderivatives, cached per 1/y^m weight.
    """

    def __init__(
        self, breakpoints: Sequence[float], segments: Sequence[LogLinComb]
    ):
        bps = [float(b) for b in breakpoints]
        if bps and len(segments) != len(bps) - 1:
            raise ValueError("need exactly one segment per breakpoint gap")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        self.breakpoints = bps
        self.segments = list(segments)
        self._anti_cache: dict[tuple[int, int], LogLinComb] = {}
        self._suffix_cache: dict[int, list[float]] = {}

    @staticmethod
    def zero() -> "PiecewiseFunction":
        return PiecewiseFunction([], [])

    @property
    def lo(self) -> float:
        return self.breakpoints[0] if self.breakpoints else 1.0

    @property
    def hi(self) -> float:
        return self.breakpoints[-1] if self.breakpoints else 1.0

    def is_zero(self) -> bool:
        return not self.segments

    def _segment_index(self, x: float) -> int:
        i = bisect_right(self.breakpoints, x) - 1
        return min(i, len(self.segments) - 1)

    def value(self, x: float) -> float:
        if self.is_zero() or x < self.lo or x > self.hi:
            return 0.0
        return self.segments[self._segment_index(x)](x)

    __call__ = value

    def segment_at(self, x: float) -> LogLinComb | None:
        """Symbolic form covering x, or None outside the support."""
        if self.is_zero() or x < self.lo or x > self.hi:
            return None
        return self.segments[self._segment_index(x)]

    def _anti(self, i: int, m: int) -> LogLinComb:
        key = (i, m)
        got = self._anti_cache.get(key)
        if got is None:
            got = self.segments[i].shift_xpow(-m).antiderivative()
            self._anti_cache[key] = got
        return got

    def _segment_integral(self, i: int, a: float, b: float, m: int) -> float:
        anti = self._anti(i, m)
        return anti(b) - anti(a)

    def integral(self, a: float, b: float, m: int = 0) -> float:
        """int_a^b f(y)/y^m dy, treating f as zero outside its support."""
        if self.is_zero():
            return 0.0
        a = max(a, self.lo)
        b = min(b, self.hi)
        if a >= b:
            return 0.0
        ia = self._segment_index(a)
        ib = self._segment_index(b)
        if ia == ib:
            return self._segment_integral(ia, a, b, m)
        total = self._segment_integral(ia, a, self.breakpoints[ia + 1], m)
        for i in range(ia + 1, ib):
            total += self._segment_integral(
                i, self.breakpoints[i], self.breakpoints[i + 1], m
            )
        total += self._segment_integral(ib, self.breakpoints[ib], b, m)
        return total

    def tail_integral(self, x: float, m: int = 0) -> float:
        """int_x^hi f(y)/y^m dy with suffix sums cached per weight m."""
        if self.is_zero() or x >= self.hi:
            return 0.0
        suffix = self._suffix_cache.get(m)
        if suffix is None:
            n = len(self.segments)
            suffix = [0.0] * (n + 1)
            for i in range(n - 1, -1, -1):
                suffix[i] = suffix[i + 1] + self._segment_integral(
                    i, self.breakpoints[i], self.breakpoints[i + 1], m
                )
            self._suffix_cache[m] = suffix
        if x <= self.lo:
            return suffix[0]
        i = self._segment_index(x)
        return suffix[i + 1] + self._segment_integral(
            i, x, self.breakpoints[i + 1], m
        )

    def map_segments(
        self, fn: Callable[[LogLinComb], LogLinComb]
    ) -> "PiecewiseFunction":
        return PiecewiseFunction(self.breakpoints, [fn(s) for s in self.segments])

    def restrict(self, lo: float, hi: float) -> "PiecewiseFunction":
        """Clip the support to [lo, hi] (segments keep their symbolic form)."""
        if self.is_zero():
            return self
        lo = max(lo, self.lo)
        hi = min(hi, self.hi)
        if lo >= hi:
            return PiecewiseFunction.zero()
        ia = self._segment_index(lo)
        ib = self._segment_index(hi)
        if hi <= self.breakpoints[ib] and ib > ia:
            ib -= 1  # hi falls exactly on a breakpoint
        bps = [lo] + [
            b for b in self.breakpoints[ia + 1 : ib + 1] if lo < b < hi
        ] + [hi]
        return PiecewiseFunction(bps, self.segments[ia : ib + 1])

    def combine(
        self, other: "PiecewiseFunction", c_self: float = 1.0, c_other: float = 1.0
    ) -> "PiecewiseFunction":
        """c_self * self + c_other * other over the union of supports."""
        if self.is_zero():
            return other.map_segments(lambda s: s.scale(c_other))
        if other.is_zero():
            return self.map_segments(lambda s: s.scale(c_self))
        cuts = sorted(set(self.breakpoints) | set(other.breakpoints))
        segs = []
        for a, b in zip(cuts, cuts[1:]):
            mid = 0.5 * (a + b)
            s = LogLinComb.zero()
            mine = self.segment_at(mid)
            theirs = other.segment_at(mid)
            if mine is not None:
                s = s + mine.scale(c_self)
            if theirs is not None:
                s = s + theirs.scale(c_other)
            segs.append(s)
        return PiecewiseFunction(cuts, segs)

    def grid(self, points_per_segment: int) -> list[float]:
        """Uniform sample points per segment, including all breakpoints."""
        if self.is_zero():
            return []
        out = []
        for a, b in zip(self.breakpoints, self.breakpoints[1:]):
            step = (b - a) / (points_per_segment + 1)
            out.extend(a + i * step for i in range(points_per_segment + 1))
        out.append(self.hi)
        return out


def quadrature(
    fn: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-12,
    max_depth: int = 48,
) -> float:
    """Adaptive Simpson integration of fn over [a, b] to absolute tol."""
    if a == b:
        return 0.0
    if a > b:
        return -quadrature(fn, b, a, tol, max_depth)

    def simpson(lo: float, hi: float, flo: float, fmid: float, fhi: float) -> float:
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def recurse(lo, hi, flo, fmid, fhi, whole, eps, depth):
        mid = 0.5 * (lo + hi)
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        flm = fn(lm)
        frm = fn(rm)
        left = simpson(lo, mid, flo, flm, fmid)
        right = simpson(mid, hi, fmid, frm, fhi)
        # Richardson: |left+right-whole|/15 estimates the refined error
        if abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        if depth <= 0:
            raise QuadratureError("quadrature did not converge", (lo, hi))
        return recurse(lo, mid, flo, flm, fmid, left, eps / 2.0, depth - 1) + recurse(
            mid, hi, fmid, frm, fhi, right, eps / 2.0, depth - 1
        )

    mid = 0.5 * (a + b)
    fa, fm, fb = fn(a), fn(mid), fn(b)
    return recurse(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, max_depth)


def bisect_root(
    fn: Callable[[float], float], a: float, b: float, tol: float = 1e-13
) -> float:
    """Bisection on a sign-changing bracket; returns the midpoint estimate."""
    fa = fn(a)
    fb = fn(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if (fa > 0.0) == (fb > 0.0):
        raise RootBracketError(f"no sign change on [{a}, {b}]")
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = fn(m)
        if fm == 0.0:
            return m
        if (fm > 0.0) == (fa > 0.0):
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def find_largest_root(
    fn: Callable[[float], float],
    hi: float,
    lo: float = 0.0,
    scan_step: float = 1e-3,
    tol: float = 1e-13,
) -> float:
    """Largest zero of fn below hi, for fn known positive just below hi.

    Scans downward from hi with the given step until the sign flips, then
    bisects the bracket.  Existence of the root is the caller's guarantee;
    running out of scan range raises RootBracketError.
    """
    x_hi = hi
    f_hi = fn(x_hi)
    if f_hi == 0.0:
        return x_hi
    if f_hi < 0.0:
        raise RootBracketError(f"function already negative at scan start {hi}")
    x = x_hi - scan_step
    while x > lo:
        fx = fn(x)
        if fx == 0.0:
            return x
        if fx < 0.0:
            return bisect_root(fn, x, x_hi, tol)
        x_hi = x
        x -= scan_step
    raise RootBracketError(f"no sign change found in ({lo}, {hi})")
