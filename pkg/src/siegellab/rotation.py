"""Continued-fraction arithmetic for bounded-type rotation numbers.

Everything downstream of this module is parametrized by an irrational
rotation number theta in (0,1).  Here we expand theta into its continued
fraction [0; a_1, a_2, ...], build the convergents p_n/q_n, and compute the
return-moment sequences that control how fast the circle rotation by theta
revisits a neighbourhood of a point.  The denominators obey

    q_n = a_n q_{n-1} + q_{n-2},      (p_0, q_0) = (0, 1), (p_-1, q_-1) = (1, 0)

so for the golden mean (all a_i = 1) the q_n are the Fibonacci numbers.
Theta itself is kept as an mpmath float with at least 128 bits so that
twenty-odd quotients can be recovered faithfully.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import mpmath

#: Default working precision (bits) for rotation numbers.  128 is the
#: contractual minimum; a little headroom costs nothing.
DEFAULT_PREC = 192


class RationalInput(ValueError):
    """The input is rational (or indistinguishable from a rational at the
    working precision), so it has no infinite continued fraction."""


class InsufficientDepth(ValueError):
    """More quotients/convergents were requested than are available."""


def _to_mpf(theta, prec: int) -> mpmath.mpf:
    with mpmath.workprec(prec):
        if isinstance(theta, str):
            return mpmath.mpf(theta)
        if isinstance(theta, (int, float, mpmath.mpf)):
            return mpmath.mpf(theta)
    raise TypeError(f"cannot interpret {type(theta).__name__} as a rotation number")


def cf_expand(theta, n: int, prec: int = DEFAULT_PREC) -> list[int]:
    """Expand theta in (0,1) into its first n continued-fraction quotients.

    Raises RationalInput if the expansion terminates (the remainder hits
    zero, or a quotient blows past anything a bounded-type number could
    produce, which is what a rational rounded to finite precision looks
    like).  Raises InsufficientDepth if the working precision is exhausted
    before n quotients are recovered: each convergent denominator q_k eats
    roughly 2*log2(q_k) bits of the input.
    """
    if n < 1:
        raise ValueError("need at least one quotient")
    with mpmath.workprec(prec):
        x = _to_mpf(theta, prec)
        x = x - mpmath.floor(x)
        if x == 0:
            raise RationalInput("integer input")
        # Bits of information below the point.  The mantissa of an mpf is
        # normalized (trailing zero bits stripped), so -exp is exactly the
        # position of the last meaningful bit: a plain float carries ~53,
        # a freshly computed 192-bit irrational ~192.
        _, _, x_exp, _ = x._mpf_
        budget = max(8, -int(x_exp))
        quotients: list[int] = []
        q_prev, q_cur = 0, 1
        for _ in range(n):
            inv = 1 / x
            a = int(mpmath.floor(inv))
            # The error in the remainder is amplified by q_k^2; once the
            # quotient reaches that noise floor the tail is meaningless and
            # the input is indistinguishable from the rational p_k/q_k.
            resolution = budget - 2 * q_cur.bit_length()
            if a.bit_length() >= max(8, resolution - 4):
                raise RationalInput(
                    f"quotient ~2^{a.bit_length()} at the precision floor; "
                    "input is rational at this resolution"
                )
            quotients.append(a)
            q_prev, q_cur = q_cur, a * q_cur + q_prev
            x = inv - a
            if x == 0:
                raise RationalInput("continued fraction terminated")
            if 2 * q_cur.bit_length() > budget - 8 and len(quotients) < n:
                raise InsufficientDepth(
                    f"only {len(quotients)} of {n} quotients recoverable "
                    f"from {budget} fractional bits"
                )
        return quotients


def convergents(quotients: Sequence[int], n: int | None = None) -> list[tuple[int, int]]:
    """Convergents (p_1, q_1), ..., (p_n, q_n) of [0; a_1, a_2, ...].

    Exact integer arithmetic throughout; n defaults to all of them.
    """
    if n is None:
        n = len(quotients)
    if n > len(quotients):
        raise InsufficientDepth(f"{n} convergents from {len(quotients)} quotients")
    p_prev, q_prev = 1, 0
    p_cur, q_cur = 0, 1
    out: list[tuple[int, int]] = []
    for a in quotients[:n]:
        if a < 1:
            raise ValueError("continued-fraction quotients must be >= 1")
        p_prev, p_cur = p_cur, a * p_cur + p_prev
        q_prev, q_cur = q_cur, a * q_cur + q_prev
        out.append((p_cur, q_cur))
    return out


@dataclass(frozen=True)
class ReturnMoments:
    """Return moments r_n = q_n + q_{n+1} and their running sums.

    r_n is the combinatorial cost of the n-th closest return of the rotation;
    the cumulative sums grow strictly slower than the denominators two levels
    up (q_{n+2} >= r_n > cumulative_{n-2} for n >= 3), which is the inequality
    the property tests pin down.
    """

    r: tuple[int, ...]
    cumulative: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.r)


def return_moments(quotients: Sequence[int], n: int) -> ReturnMoments:
    """First n return moments of the rotation with the given quotients.

    Needs n+1 quotients (r_n involves q_{n+1}); raises InsufficientDepth
    otherwise.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if len(quotients) < n + 1:
        raise InsufficientDepth(f"r_{n} needs {n + 1} quotients, have {len(quotients)}")
    qs = [q for _, q in convergents(quotients, n + 1)]
    r = tuple(qs[i] + qs[i + 1] for i in range(n))  # r_1 .. r_n
    cumulative = []
    total = 0
    for value in r:
        total += value
        cumulative.append(total)
    return ReturnMoments(r=r, cumulative=tuple(cumulative))


def is_bounded_type(quotients: Sequence[int], bound: int) -> bool:
    """True when every quotient is <= bound (type bounded by `bound`)."""
    if not quotients:
        raise InsufficientDepth("no quotients")
    return max(quotients) <= bound


def _theta_from_periodic(quotients: Sequence[int], prec: int) -> mpmath.mpf:
    # theta = [0; a_1..a_m, a_1..a_m, ...] satisfies the quadratic
    #   q_{m-1} t^2 + (q_m - p_{m-1}) t - p_m = 0
    # obtained by substituting the tail t = 1/theta into the Moebius form of
    # the first period.  Take the root in (0,1).
    conv = convergents(quotients)
    p_m, q_m = conv[-1]
    if len(conv) >= 2:
        p_m1, q_m1 = conv[-2]
    else:
        p_m1, q_m1 = 0, 1
    with mpmath.workprec(prec):
        a = mpmath.mpf(q_m1)
        b = mpmath.mpf(q_m - p_m1)
        c = mpmath.mpf(-p_m)
        disc = mpmath.sqrt(b * b - 4 * a * c)
        root = (-b + disc) / (2 * a)
        return +root


def theta_to_hex(theta: mpmath.mpf) -> str:
    """Serialize an mpmath float losslessly: [-]0x<mantissa>p<exponent>."""
    if isinstance(theta, float):
        theta = mpmath.mpf(theta)  # exact: doubles have 53-bit mantissas
    # Read the mantissa/exponent directly -- passing through mpmath.mpf()
    # would re-round to the ambient context precision.
    sign, man, exp, _ = theta._mpf_
    if man == 0:
        return "0x0p+0"
    return f"{'-' if sign else ''}0x{int(man):x}p{int(exp):+d}"


def theta_from_hex(text: str, prec: int = DEFAULT_PREC) -> mpmath.mpf:
    """Inverse of theta_to_hex."""
    body = text.strip()
    negative = body.startswith("-")
    if negative:
        body = body[1:]
    if not body.startswith("0x") or "p" not in body:
        raise ValueError(f"not a hex float: {text!r}")
    man_hex, exp_str = body[2:].split("p", 1)
    man = int(man_hex, 16)
    exp = int(exp_str)
    with mpmath.workprec(max(prec, man.bit_length() + 8)):
        value = mpmath.ldexp(mpmath.mpf(man), exp)
        return -value if negative else +value


@dataclass(frozen=True)
class RotationNumber:
    """An irrational rotation number with its continued-fraction data.

    theta is held at >= 128-bit precision; quotients is the recovered prefix
    of its continued fraction.
    """

    theta: mpmath.mpf
    quotients: tuple[int, ...]
    prec: int = DEFAULT_PREC

    @classmethod
    def from_quotients(
        cls,
        quotients: Iterable[int],
        depth: int = 40,
        prec: int = DEFAULT_PREC,
    ) -> "RotationNumber":
        """Rotation number whose continued fraction repeats `quotients`.

        A finite list is read as a period, so [1] gives the golden mean and
        [2] the silver mean exactly; the stored quotient prefix is the
        periodic sequence unrolled to `depth` terms.
        """
        period = tuple(int(a) for a in quotients)
        if not period:
            raise ValueError("empty quotient list")
        if any(a < 1 for a in period):
            raise ValueError("quotients must be positive integers")
        theta = _theta_from_periodic(period, prec)
        unrolled = tuple(period[i % len(period)] for i in range(depth))
        return cls(theta=theta, quotients=unrolled, prec=prec)

    @classmethod
    def from_real(cls, value, depth: int = 40, prec: int = DEFAULT_PREC) -> "RotationNumber":
        """Rotation number from a real value (string/float/mpf)."""
        theta = _to_mpf(value, prec)
        with mpmath.workprec(prec):
            theta = theta - mpmath.floor(theta)
        quotients = tuple(cf_expand(theta, depth, prec=prec))
        return cls(theta=+theta, quotients=quotients, prec=prec)

    @classmethod
    def golden(cls, depth: int = 40, prec: int = DEFAULT_PREC) -> "RotationNumber":
        return cls.from_quotients([1], depth=depth, prec=prec)

    @classmethod
    def silver(cls, depth: int = 40, prec: int = DEFAULT_PREC) -> "RotationNumber":
        return cls.from_quotients([2], depth=depth, prec=prec)

    @property
    def bound(self) -> int:
        return max(self.quotients)

    def convergents(self, n: int | None = None) -> list[tuple[int, int]]:
        return convergents(self.quotients, n)

    def return_moments(self, n: int) -> ReturnMoments:
        return return_moments(self.quotients, n)

    def lam(self) -> complex:
        """The multiplier e^{2 pi i theta} as a double-precision complex."""
        with mpmath.workprec(self.prec):
            value = mpmath.expjpi(2 * self.theta)
        return complex(value)

    def to_json(self) -> dict:
        return {
            "theta_hex": theta_to_hex(self.theta),
            "quotients": list(self.quotients),
            "convergents": [[p, q] for p, q in self.convergents()],
        }

    @classmethod
    def from_json(cls, blob: dict, prec: int = DEFAULT_PREC) -> "RotationNumber":
        theta = theta_from_hex(blob["theta_hex"], prec=prec)
        return cls(theta=theta, quotients=tuple(blob["quotients"]), prec=prec)
