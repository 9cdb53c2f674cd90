"""The two polynomial families under study, plus orbit bookkeeping.

Both maps fix 0 with multiplier lambda = e^{2 pi i theta}, so for bounded-type
theta each has a Siegel disk around the origin:

    quadratic   q(z) = lambda z (1 - z/2)                 critical point  1
    cubic     f_b(z) = lambda z (1 - (B/2) z + z^2/3)     B = b + 1/b

The cubic's critical points are exactly b and 1/b (f_b' = lambda (z-b)(z-1/b)),
which is why the parameter b and its reciprocal give literally the same map.
The third preimage of the critical value f_b(b) is the cocritical point
co_b = (3 - b^2) / (2b).
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

from siegellab.rotation import RotationNumber

ESCAPE_RADIUS = 1e3
ORBIT_BUDGET = 10_000


class DegenerateCritical(ValueError):
    """b = +-1: the two critical points of f_b collide."""


class NoConvergence(RuntimeError):
    """Newton iteration failed to reach the requested residual."""


@dataclass(frozen=True)
class QuadraticSiegel:
    """q(z) = lambda z (1 - z/2); critical point 1, critical value lambda/2."""

    rotation: RotationNumber
    lam: complex
    degree: int = 2

    def __init__(self, rotation: RotationNumber):
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "lam", rotation.lam())
        object.__setattr__(self, "degree", 2)

    def eval(self, z: complex) -> complex:
        return z * (self.lam + z * (-0.5 * self.lam))

    def deriv(self, z: complex) -> complex:
        return self.lam + z * (-self.lam)

    @property
    def critical_points(self) -> tuple[complex, ...]:
        return (1.0 + 0.0j,)

    @property
    def leading_coefficient(self) -> complex:
        return -0.5 * self.lam

    def fixed_points(self) -> tuple[complex, complex]:
        """0 and z* = 2(1 - 1/lambda)."""
        return (0.0 + 0.0j, 2.0 * (1.0 - 1.0 / self.lam))


@dataclass(frozen=True)
class CubicSiegel:
    """f_b(z) = lambda z (1 - (B/2) z + z^2/3) with B = b + 1/b.

    The map is invariant under b -> 1/b; `reciprocal()` returns the partner
    parametrization sharing the exact same coefficients.
    """

    rotation: RotationNumber
    b: complex
    lam: complex
    bcoeff: complex  # B = b + 1/b
    degree: int = 3

    def __init__(self, rotation: RotationNumber, b: complex, _lam: complex | None = None,
                 _bcoeff: complex | None = None):
        b = complex(b)
        if b == 0:
            raise ValueError("b must be nonzero")
        if abs(b - 1.0) < 1e-13 or abs(b + 1.0) < 1e-13:
            raise DegenerateCritical(f"critical points collide at b = {b}")
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "lam", rotation.lam() if _lam is None else _lam)
        object.__setattr__(self, "bcoeff", (b + 1.0 / b) if _bcoeff is None else _bcoeff)
        object.__setattr__(self, "degree", 3)

    def eval(self, z: complex) -> complex:
        lam = self.lam
        return z * (lam + z * ((-0.5 * lam) * self.bcoeff + z * (lam / 3.0)))

    def deriv(self, z: complex) -> complex:
        lam = self.lam
        return lam + z * ((-lam) * self.bcoeff + z * lam)

    @property
    def critical_points(self) -> tuple[complex, complex]:
        return (self.b, 1.0 / self.b)

    @property
    def leading_coefficient(self) -> complex:
        return self.lam / 3.0

    def cocritical(self) -> complex:
        """The point co_b != b with f_b(co_b) = f_b(b).

        f_b(z) - f_b(b) has a double root at b; by Vieta the root sum is
        (3/2)(b + 1/b), so co_b = (3 - b^2)/(2b).
        """
        return (3.0 - self.b * self.b) / (2.0 * self.b)

    def reciprocal(self) -> "CubicSiegel":
        """The same map labelled by the other critical point."""
        return CubicSiegel(self.rotation, 1.0 / self.b, _lam=self.lam, _bcoeff=self.bcoeff)

    def negate(self) -> "CubicSiegel":
        """f_{-b}; conjugate to f_b by z -> -z."""
        return CubicSiegel(self.rotation, -self.b, _lam=self.lam, _bcoeff=-self.bcoeff)

    def fixed_points(self) -> tuple[complex, complex, complex]:
        """0 and the two roots of z^2 - (3B/2) z + 3(1 - 1/lambda) = 0."""
        half_sum = 0.75 * self.bcoeff
        prod = 3.0 * (1.0 - 1.0 / self.lam)
        disc = cmath.sqrt(half_sum * half_sum - prod)
        return (0.0 + 0.0j, half_sum + disc, half_sum - disc)


@dataclass(frozen=True)
class RigidRotation:
    """z -> lambda z; the degenerate member every Siegel family limits to."""

    rotation: RotationNumber
    lam: complex
    degree: int = 1

    def __init__(self, rotation: RotationNumber):
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "lam", rotation.lam())
        object.__setattr__(self, "degree", 1)

    def eval(self, z: complex) -> complex:
        return self.lam * z

    def deriv(self, z: complex) -> complex:  # noqa: ARG002 - uniform signature
        return self.lam

    @property
    def critical_points(self) -> tuple[complex, ...]:
        return ()


@dataclass(frozen=True)
class OrbitClass:
    """Verdict of an orbit run: escaped / bounded / captured / undecided.

    `iterations` is the number of steps actually used; `final` is the first
    iterate past the escape radius when tag == "escaped".  "bounded" means
    bounded within budget -- connectedness is only semi-decidable.
    """

    tag: str
    iterations: int
    final: complex | None = None

    def to_json(self) -> dict:
        blob: dict = {"tag": self.tag, "iterations": self.iterations}
        if self.final is not None:
            blob["final"] = [self.final.real, self.final.imag]
        return blob

    @classmethod
    def from_json(cls, blob: dict) -> "OrbitClass":
        final = blob.get("final")
        return cls(
            tag=blob["tag"],
            iterations=blob["iterations"],
            final=complex(final[0], final[1]) if final is not None else None,
        )


def classify_orbit(
    fmap,
    z0: complex,
    max_iter: int = ORBIT_BUDGET,
    escape_radius: float = ESCAPE_RADIUS,
    siegel=None,
) -> OrbitClass:
    """Iterate z0 and report the first decisive event.

    `siegel`, when given, is any object with a contains(z) -> bool method
    (typically a Siegel-disk polygon); entering it yields "captured" with the
    entry step.  Escape is |z| > escape_radius at the minimal step.  Budget
    exhaustion yields "bounded"; numerical breakdown yields "undecided".
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if escape_radius < 4:
        raise ValueError("escape_radius must be >= 4")
    z = complex(z0)
    for n in range(max_iter + 1):
        if not (abs(z.real) < 1e300 and abs(z.imag) < 1e300):
            return OrbitClass(tag="undecided", iterations=n)
        if abs(z) > escape_radius:
            return OrbitClass(tag="escaped", iterations=n, final=z)
        if siegel is not None and siegel.contains(z):
            return OrbitClass(tag="captured", iterations=n)
        if n == max_iter:
            break
        z = fmap.eval(z)
    return OrbitClass(tag="bounded", iterations=max_iter)


def locus_member(
    rotation: RotationNumber,
    b: complex,
    max_iter: int = ORBIT_BUDGET,
    escape_radius: float = ESCAPE_RADIUS,
) -> tuple[str, int]:
    """Connectedness-locus test for f_b: ("inside"|"outside"|"undecided", budget).

    "outside" is certified (a critical orbit escaped); "inside" means both
    critical orbits stayed bounded for the whole budget.
    """
    fmap = CubicSiegel(rotation, b)
    verdict = "inside"
    used = max_iter
    for crit in fmap.critical_points:
        orbit = classify_orbit(fmap, crit, max_iter=max_iter, escape_radius=escape_radius)
        if orbit.tag == "escaped":
            return ("outside", orbit.iterations)
        if orbit.tag == "undecided":
            verdict = "undecided"
            used = orbit.iterations
    return (verdict, used)


def newton_periodic(
    fmap,
    period: int,
    seed: complex,
    tol: float = 1e-12,
    max_steps: int = 64,
) -> tuple[complex, complex]:
    """Newton-solve f^period(z) = z from `seed`; returns (point, multiplier).

    The residual |f^p(z) - z| is driven below tol; the multiplier is the
    chain-rule derivative (f^p)'(z) at the solution.
    """
    if period < 1:
        raise ValueError("period must be >= 1")
    z = complex(seed)
    for _ in range(max_steps):
        w = z
        dw = 1.0 + 0.0j
        for _ in range(period):
            dw *= fmap.deriv(w)
            w = fmap.eval(w)
        residual = w - z
        if abs(residual) <= tol:
            return z, dw
        denom = dw - 1.0
        if denom == 0 or not (abs(denom) < 1e300):
            raise NoConvergence("Newton derivative degenerate")
        z = z - residual / denom
        if not (abs(z.real) < 1e300 and abs(z.imag) < 1e300):
            raise NoConvergence("Newton iterate diverged")
    # Final residual check after the last step.
    w = z
    dw = 1.0 + 0.0j
    for _ in range(period):
        dw *= fmap.deriv(w)
        w = fmap.eval(w)
    if abs(w - z) <= tol:
        return z, dw
    raise NoConvergence(f"no periodic point within {max_steps} Newton steps")
