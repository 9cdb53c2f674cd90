"""Escape-side coordinates: Green potential, Boettcher maps, external rays.

Everything here lives outside the filled Julia set.  The potential G and
the Boettcher coordinate phi are computed from escaping orbits by
telescoping products; rays are traced backwards from a far seed by exact
polynomial root pullbacks, which keeps branch selection local and avoids
the cuts a principal-log evaluation of phi would introduce.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

BIG = 1e8          # orbit modulus treated as "escaped to the asymptotic zone"
FAR_POTENTIAL = math.log(1e7)


class NonEscaping(Exception):
    """The orbit stayed bounded within the iteration budget."""


class NotEscaping(Exception):
    """Parameter-side twin of NonEscaping (the co-critical orbit is bounded)."""


class InsideCriticalLevel(Exception):
    """z sits below the potential of an escaping critical point."""


class NewtonDivergence(Exception):
    """A ray continuation step kept jumping after repeated densification."""


class SeedFailure(Exception):
    """The outermost parameter-ray level refused to converge."""


@dataclass(frozen=True)
class Angle:
    """Exact rational angle in [0, 1), stored as a reduced Fraction.

    Floats are refused on construction: repeated angle multiplication must
    stay exact or the combinatorics silently rot.
    """

    frac: Fraction

    def __init__(self, num, den=None):
        if isinstance(num, float) or isinstance(den, float):
            raise TypeError("Angle needs exact rationals, not floats")
        if den is None:
            frac = Fraction(num)
        else:
            frac = Fraction(num, den)
        frac = frac % 1
        object.__setattr__(self, "frac", frac)

    @property
    def num(self) -> int:
        return self.frac.numerator

    @property
    def den(self) -> int:
        return self.frac.denominator

    def times(self, d: int) -> "Angle":
        return Angle(self.frac * d)

    def triple(self) -> "Angle":
        return self.times(3)

    def turns(self) -> float:
        return self.num / self.den

    def preperiod_period(self, d: int = 3) -> tuple[int, int]:
        """Exact (preperiod, period) of the angle under t -> d*t mod 1."""
        seen: dict[Fraction, int] = {}
        t = self.frac
        k = 0
        while t not in seen:
            seen[t] = k
            t = (t * d) % 1
            k += 1
        return seen[t], k - seen[t]

    def __str__(self) -> str:
        return f"{self.num}/{self.den}"

    @staticmethod
    def parse(text: str) -> "Angle":
        if "/" in text:
            p, q = text.split("/", 1)
            return Angle(int(p), int(q))
        return Angle(int(text))


def _escape_orbit(fmap, z: complex, n_iter: int) -> list[complex] | None:
    """Forward orbit up to the first point with modulus >= BIG, or None."""
    orbit = [complex(z)]
    for _ in range(n_iter):
        if abs(orbit[-1]) >= BIG:
            return orbit
        orbit.append(complex(fmap.eval(orbit[-1])))
    if abs(orbit[-1]) >= BIG:
        return orbit
    return None


def green_potential(fmap, z: complex, n_iter: int = 200) -> float:
    """Escape-rate potential G(z) = lim d^-n log|f^n(z)|.

    Once the orbit reaches the asymptotic zone the remaining telescoping
    terms are log|a|/(d-1) geometrically damped, which is summed in closed
    form; the neglected part is O(1/BIG).
    """
    d = fmap.degree
    a = fmap.leading_coefficient
    orbit = _escape_orbit(fmap, z, n_iter)
    if orbit is None:
        raise NonEscaping(f"orbit of {z} stayed below {BIG:g} after {n_iter} steps")
    n = len(orbit) - 1
    return (math.log(abs(orbit[-1])) + math.log(abs(a)) / (d - 1)) / d ** n


def _phi_value(fmap, z: complex, n_iter: int = 200) -> complex:
    """Telescoped Boettcher value at an escaping point (principal branches)."""
    d = fmap.degree
    a = fmap.leading_coefficient
    orbit = _escape_orbit(fmap, z, n_iter)
    if orbit is None:
        raise NonEscaping(f"orbit of {z} stayed below {BIG:g} after {n_iter} steps")
    log_phi = cmath.log(orbit[0]) + cmath.log(a) / (d - 1)
    for k in range(len(orbit) - 1):
        u = orbit[k + 1] / (a * orbit[k] ** d)
        log_phi += cmath.log(u) / d ** (k + 1)
    # the tail factors u ~ 1 + O(1/BIG) are dropped
    return cmath.exp(log_phi)


def _escaping_critical_level(fmap, n_iter: int = 200) -> float | None:
    """Largest potential among escaping critical points, None if all bounded."""
    best = None
    for c in fmap.critical_points:
        try:
            g = green_potential(fmap, c, n_iter)
        except NonEscaping:
            continue
        best = g if best is None else max(best, g)
    return best


def boettcher(fmap, z: complex, n_iter: int = 200) -> complex:
    """Boettcher coordinate phi(z) with phi(f(z)) = phi(z)^d, |phi| = e^G.

    The branch of a^(1/(d-1)) is principal; phi(z)/z approaches it as
    z -> infinity.  Below the potential level of an escaping critical point
    the coordinate stops being single-valued, so that region is refused.
    """
    g = green_potential(fmap, z, n_iter)  # raises NonEscaping when bounded
    level = _escaping_critical_level(fmap, n_iter)
    if level is not None and g < level * (1.0 - 1e-12):
        raise InsideCriticalLevel(
            f"G(z) = {g:.6g} is below the critical level {level:.6g}")
    return _phi_value(fmap, z, n_iter)


def _poly_coeffs(fmap) -> list[complex]:
    """Coefficients of f as a plain polynomial, highest degree first."""
    lam = fmap.lam
    if fmap.degree == 2:
        return [-lam / 2.0, lam, 0.0]
    return [lam / 3.0, -(lam / 2.0) * fmap.bcoeff, lam, 0.0]


def _pullback_chain(fmap, t: Angle, g: float, warm: list[complex] | None):
    """Backward orbit landing on the ray point of angle t at potential g.

    chain[k] sits on the ray of angle d^k * t at potential d^k * g; the top
    entry is seeded from the asymptotic inversion of phi, every step down
    solves f(z) = previous entry and picks the root closest to the
    prediction (the warm chain from a neighbouring potential, else the
    asymptotic point).  Returns (chain, crashed) where crashed reports a
    root with vanishing derivative (a precritical hit).
    """
    d = fmap.degree
    a = fmap.leading_coefficient
    aroot = a ** (1.0 / (d - 1))
    depth = max(0, math.ceil(math.log(FAR_POTENTIAL / g) / math.log(d)))
    coeffs = _poly_coeffs(fmap)

    def asymptotic(k: int) -> complex:
        tk = t.times(d ** k)
        gk = g * d ** k
        return cmath.exp(gk + 2j * math.pi * tk.turns()) / aroot

    chain: list[complex] = [asymptotic(depth)]
    for k in range(depth - 1, -1, -1):
        target = chain[-1]
        poly = list(coeffs)
        poly[-1] = poly[-1] - target
        roots = np.roots(poly)
        # warm chains are aligned from the bottom: the last warm entry sits
        # at potential ~g, so the entry for level k*g steps back k slots
        widx = len(warm) - 1 - k if warm is not None else -1
        pred = warm[widx] if warm is not None and 0 <= widx else asymptotic(k)
        z = complex(roots[np.argmin(np.abs(roots - pred))])
        chain.append(z)
        if abs(fmap.deriv(z)) < 1e-9:
            return chain, True
    return chain, False


@dataclass(frozen=True)
class RayTrace:
    """A traced external ray: samples run from high potential toward the set."""

    angle: Angle
    samples: tuple  # ((potential, point), ...) with strictly decreasing potential
    status: str     # "landed" | "truncated" | "crashed"
    point: complex | None = None       # landing estimate when status == "landed"
    crash_potential: float | None = None

    def to_json(self) -> dict:
        out = {
            "angle": str(self.angle),
            "status": self.status,
            "samples": [[g, z.real, z.imag] for g, z in self.samples],
        }
        if self.point is not None:
            out["point"] = [self.point.real, self.point.imag]
        if self.crash_potential is not None:
            out["crash_potential"] = self.crash_potential
        return out


def _aitken(z0: complex, z1: complex, z2: complex) -> complex:
    den = (z2 - z1) - (z1 - z0)
    if abs(den) < 1e-30:
        return z2
    return z2 - (z2 - z1) ** 2 / den


def trace_external_ray(fmap, t: Angle, g_hi: float = 2.0, g_lo: float = 1e-8,
                       steps_per_halving: int = 8) -> RayTrace:
    """Trace the external ray of angle t from potential g_hi down to g_lo.

    The potential ladder divides each factor-of-d drop into
    `steps_per_halving` geometric sub-steps.  A step whose pullback jumps
    implausibly far is retried on a densified ladder up to 8 times before
    NewtonDivergence; a pullback onto a critical point reports a crashed
    ray (that is a finding about the angle, not a numerical failure).
    """
    if not isinstance(t, Angle):
        raise TypeError("angle must be an Angle (exact rational)")
    if not (g_hi > g_lo > 0):
        raise ValueError("need g_hi > g_lo > 0")
    d = fmap.degree
    rho = d ** (-1.0 / steps_per_halving)

    levels = [g_hi]
    while levels[-1] * rho > g_lo:
        levels.append(levels[-1] * rho)
    levels.append(g_lo)

    # Potentials where the trace walks over a (pre)critical pinch.  When the
    # bottom of the chain crosses g_c/d^j, chain entry j passes the escaping
    # critical point at level g_c; whether the ray actually hits it cannot be
    # read off the regular ladder (the twin preimages there are a regular
    # root pair at ladder resolution), so each crossing gets a dedicated
    # probe just above the pinch, where a genuine hit shows up as a
    # sqrt-law collapse onto the critical point.
    pinches: list[tuple[float, complex, int]] = []
    for c in fmap.critical_points:
        try:
            g_c = green_potential(fmap, c)
        except NonEscaping:
            continue
        j = 0
        while g_c / d ** j > g_lo:
            if g_c / d ** j < g_hi:
                pinches.append((g_c / d ** j, complex(c), j))
            j += 1
    pinches.sort(reverse=True)

    samples: list[tuple[float, complex]] = []
    warm: list[complex] | None = None
    prev_pt: complex | None = None
    for g in levels:
        while pinches and pinches[0][0] >= g:
            thr, cpt, j = pinches.pop(0)
            probe_g = thr * (1.0 + 1e-10)
            if probe_g < (samples[-1][0] if samples else g_hi):
                chain, crashed = _pullback_chain(fmap, t, probe_g, warm)
                warm, prev_pt = chain, chain[-1]
                if crashed or abs(chain[-1 - j] - cpt) < 1e-3 * max(1.0, abs(cpt)):
                    samples.append((probe_g, chain[-1]))
                    return RayTrace(angle=t, samples=tuple(samples),
                                    status="crashed", crash_potential=thr)
        attempt_g = g
        densify = 0
        while True:
            chain, crashed = _pullback_chain(fmap, t, attempt_g, warm)
            pt = chain[-1]
            if crashed:
                samples.append((attempt_g, pt))
                return RayTrace(angle=t, samples=tuple(samples), status="crashed",
                                crash_potential=attempt_g)
            jump_scale = abs(prev_pt) + 1.0 if prev_pt is not None else None
            if prev_pt is None or abs(pt - prev_pt) <= 0.5 * jump_scale:
                break
            densify += 1
            if densify > 8:
                raise NewtonDivergence(
                    f"ray {t} keeps jumping near potential {g:.3g}")
            attempt_g = math.sqrt(attempt_g * samples[-1][0])
        if attempt_g != g:
            samples.append((attempt_g, pt))
            warm, prev_pt = chain, pt
            chain, _ = _pullback_chain(fmap, t, g, warm)
            pt = chain[-1]
        samples.append((g, pt))
        warm, prev_pt = chain, pt

    tail = [p for _, p in samples[-3:]]
    if len(tail) == 3 and abs(tail[2] - tail[1]) <= 1e-6:
        return RayTrace(angle=t, samples=tuple(samples), status="landed",
                        point=_aitken(*tail))
    return RayTrace(angle=t, samples=tuple(samples), status="truncated")


def param_phi(rotation, b: complex, n_iter: int = 200) -> complex:
    """Parameter-plane escape coordinate: the Boettcher value at co_b.

    Defined when the co-critical orbit escapes; the co-critical point sits
    exactly on the critical potential level, where the telescoping product
    along its own orbit is still well defined.
    """
    from .maps import CubicSiegel

    fmap = CubicSiegel(rotation, b)
    co = fmap.cocritical()
    try:
        return _phi_value(fmap, co, n_iter)
    except NonEscaping as exc:
        raise NotEscaping(f"co-critical orbit bounded for b = {b}") from exc


@dataclass(frozen=True)
class ParamRay:
    """Newton-continued parameter ray: b-values at decreasing radii."""

    angle: Angle
    levels: tuple
    points: tuple
    status: str  # "complete" | "truncated"

    def to_json(self) -> dict:
        return {
            "angle": str(self.angle),
            "status": self.status,
            "samples": [[math.log(r), b.real, b.imag]
                        for r, b in zip(self.levels, self.points)],
        }

    def landing_estimate(self, tail: int | None = None) -> complex:
        """Extrapolated endpoint of the traced ray.

        Rays landing at parabolic parameters approach their endpoint only
        logarithmically: with L = log(1/log r), the distance behaves like
        c/L^2 at a multiplier-1 cusp.  Fitting the tail against
        [1, L^-2, L^-3, L^-4] and reading off the constant term removes
        that creep; for rays that land geometrically fast the deep samples
        already agree and the same fit returns them unchanged.
        """
        pts = np.asarray(self.points)
        g = np.log(np.asarray(self.levels[: len(pts)], dtype=float))
        keep = g < 1.0 / math.e  # need L = log(1/g) > 1 for the basis
        pts, g = pts[keep], g[keep]
        if len(pts) < 4:
            raise ValueError("too few samples below potential 1/e for a fit")
        if tail is None:
            tail = max(8, len(pts) // 2)
        pts, g = pts[-tail:], g[-tail:]
        L = np.log(1.0 / g)
        powers = (0, 2, 3, 4)[: max(2, min(4, len(pts) // 4))]
        A = np.vstack([L ** float(-p) for p in powers]).T
        coef, *_ = np.linalg.lstsq(A, pts, rcond=None)
        return complex(coef[0])


def trace_param_ray(rotation, t: Angle, r_levels, newton_steps: int = 40,
                    tol: float = 1e-10) -> ParamRay:
    """Trace the parameter ray of angle t along decreasing radii r_levels.

    A parameter b lies on the ray at radius r exactly when its co-critical
    point sits on the dynamical ray of angle t at potential log r.  Each
    level solves co_b = (ray point of f_b) by a damped secant-Newton in b
    with the pullback chain warm-started across levels; this stays branch
    free where a direct Newton on the principal-branch phi would jump.
    """
    from .maps import CubicSiegel

    if not isinstance(t, Angle):
        raise TypeError("angle must be an Angle (exact rational)")
    r_levels = [float(r) for r in r_levels]
    if any(r <= 1.0 for r in r_levels):
        raise ValueError("parameter-ray radii must stay above 1")
    if any(b >= a for a, b in zip(r_levels, r_levels[1:])):
        raise ValueError("radii must decrease strictly")

    lam = rotation.lam()
    aroot = (lam / 3.0) ** 0.5
    warm_chain: dict[int, list[complex]] = {}

    def mismatch(b: complex, g: float) -> complex:
        fmap = CubicSiegel(rotation, b)
        chain, crashed = _pullback_chain(fmap, t, g, warm_chain.get(0))
        if not crashed:
            warm_chain[0] = chain
        return fmap.cocritical() - chain[-1]

    points: list[complex] = []
    b = -2.0 * cmath.exp(2j * math.pi * t.turns()) * r_levels[0] / aroot
    for idx, r in enumerate(r_levels):
        g = math.log(r)
        converged = False
        for _ in range(newton_steps):
            F = mismatch(b, g)
            if abs(F) <= tol * max(1.0, abs(b)):
                converged = True
                break
            h = 1e-7 * max(1.0, abs(b))
            dF = (mismatch(b + h, g) - mismatch(b - h, g)) / (2 * h)
            if dF == 0:
                break
            step = F / dF
            limit = 0.2 * max(1.0, abs(b))
            if abs(step) > limit:
                step *= limit / abs(step)
            b = b - step
        if not converged:
            if idx == 0:
                raise SeedFailure(f"outermost level r={r} did not converge")
            return ParamRay(angle=t, levels=tuple(r_levels[:idx]),
                            points=tuple(points), status="truncated")
        points.append(b)
    return ParamRay(angle=t, levels=tuple(r_levels), points=tuple(points),
                    status="complete")


def refine_parabolic(rotation, b_guess: complex, mu: complex = 1.0 + 0j,
                     iters: int = 60) -> tuple[complex, complex]:
    """Polish a parameter near a parabolic bifurcation to machine precision.

    Solves the two-by-two complex system f_b(z) = z, f_b'(z) = mu by Newton
    in (b, z), seeded at the fixed point of f_{b_guess} whose multiplier is
    closest to mu.  Returns (b, z).  At a cusp the z-derivative of the
    fixed-point equation vanishes on the solution, but the full Jacobian
    stays invertible as long as the parabolic point is non-degenerate.
    """
    from .maps import CubicSiegel

    lam = rotation.lam()
    b = complex(b_guess)
    fm = CubicSiegel(rotation, b)
    B = b + 1.0 / b
    fixed = np.roots([lam / 3.0, -lam * B / 2.0, lam - 1.0])
    z = complex(min(fixed, key=lambda zz: abs(fm.deriv(complex(zz)) - mu)))
    for _ in range(iters):
        B = b + 1.0 / b
        dBdb = 1.0 - 1.0 / (b * b)
        f = lam * (z - 0.5 * B * z * z + z * z * z / 3.0)
        fp = lam * (1.0 - B * z + z * z)
        fpp = lam * (2.0 * z - B)
        F1, F2 = f - z, fp - mu
        if abs(F1) < 1e-14 and abs(F2) < 1e-14:
            break
        J11 = -0.5 * lam * z * z * dBdb   # dF1/db
        J12 = fp - 1.0                    # dF1/dz
        J21 = -lam * z * dBdb             # dF2/db
        J22 = fpp                         # dF2/dz
        det = J11 * J22 - J12 * J21
        if det == 0:
            raise NewtonDivergence("singular Jacobian refining parabolic")
        b = b + (-F1 * J22 + F2 * J12) / det
        z = z + (-F2 * J11 + F1 * J21) / det
    return b, z
