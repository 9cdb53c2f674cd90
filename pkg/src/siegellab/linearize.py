"""Power-series linearization of the Siegel disk and everything built on it.

The linearizer is the inverse conjugacy sigma with

    f(sigma(w)) = sigma(lambda w),     sigma(w) = w + c_2 w^2 + c_3 w^3 + ...

For f = lambda (z + A2 z^2 + A3 z^3) matching powers of w gives the
closed recursion

    c_k (lambda^k - lambda) = lambda (A2 S2_k + A3 S3_k)

where S2_k = sum_{i+j=k} c_i c_j and S3_k = sum_{i+j+l=k} c_i c_j c_l use
only earlier coefficients.  For bounded-type theta the small divisors
lambda^k - lambda stay polynomially far from zero, so the series has a
positive radius of convergence: the conformal radius of the Siegel disk in
this normalization.  The boundary is then sampled as a polygon, which is
what the capture tests, the critical-point distances, and the Zakeri-curve
bisection all consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from siegellab import geometry
from siegellab.maps import CubicSiegel, QuadraticSiegel, RigidRotation
from siegellab.rotation import RotationNumber


class SmallDivisorOverflow(ArithmeticError):
    """A divisor lambda^k - lambda underflowed working precision."""


class Unstable(RuntimeError):
    """The two conformal-radius estimators disagree by more than 10%."""


class SelfIntersection(RuntimeError):
    """Boundary polygon crosses itself (radius overestimate)."""


class NoBracket(ValueError):
    """Bisection endpoints classify identically; no crossing inside."""


def _series_coefficients(fmap) -> tuple[complex, complex]:
    """(A2, A3) of f = lambda(z + A2 z^2 + A3 z^3) for a family member."""
    if isinstance(fmap, QuadraticSiegel):
        return (-0.5 + 0.0j, 0.0 + 0.0j)
    if isinstance(fmap, CubicSiegel):
        return (-0.5 * fmap.bcoeff, 1.0 / 3.0 + 0.0j)
    if isinstance(fmap, RigidRotation):
        return (0.0 + 0.0j, 0.0 + 0.0j)
    raise TypeError(f"no power-series form for {type(fmap).__name__}")


@dataclass(frozen=True)
class ConformalRadius:
    radius: float
    cross_radius: float
    flag: str | None = None


@dataclass
class Linearizer:
    """Truncated series sigma(w) = sum c_k w^k with c_1 = 1.

    Internally the coefficients are stored rescaled: scaled[k] = c_k * s^k
    for a scale s near the conformal radius, so every entry stays O(1) even
    though |c_k| itself grows like (1/radius)^k and would overflow float64
    beyond a thousand or so terms.  `coeffs` reconstructs the c_1-normalized
    values; entries past the float range come back inf — use eval()/deriv()
    for anything quantitative.
    """

    fmap: object
    lam: complex
    scaled: np.ndarray  # scaled[k] = c_k * scale^k, scaled[0] = 0
    scale: float
    _radius: ConformalRadius | None = field(default=None, repr=False)

    @property
    def n_coeffs(self) -> int:
        return len(self.scaled) - 1

    @property
    def coeffs(self) -> np.ndarray:
        # divide real and imaginary parts separately: the float64 loops are
        # correctly rounded per component, so c_1 = scaled[1]/scale == 1 exactly
        with np.errstate(over="ignore", divide="ignore"):
            powers = np.float_power(self.scale, np.arange(len(self.scaled)))
            return self.scaled.real / powers + 1j * (self.scaled.imag / powers)

    def eval(self, w):
        """sigma(w), vectorized over w."""
        w = np.asarray(w, dtype=np.complex128)
        return P.polyval(w / self.scale, self.scaled)

    def deriv(self, w):
        k = np.arange(1, len(self.scaled))
        dcoeffs = (self.scaled.real[1:] * k) / self.scale + 1j * (
            (self.scaled.imag[1:] * k) / self.scale)
        w = np.asarray(w, dtype=np.complex128)
        return P.polyval(w / self.scale, dcoeffs)

    @property
    def radius_estimate(self) -> float:
        if self._radius is None:
            object.__setattr__(self, "_radius", conformal_radius(self))
        return self._radius.radius

    def invert(self, z: complex, seed: complex | None = None, tol: float = 1e-13,
               max_steps: int = 60) -> complex:
        """Newton-solve sigma(w) = z; seeded with z itself (sigma ~ id near 0)."""
        w = complex(seed) if seed is not None else complex(z)
        for _ in range(max_steps):
            err = complex(self.eval(w)) - z
            if abs(err) <= tol:
                return w
            dw = complex(self.deriv(w))
            if dw == 0:
                break
            w = w - err / dw
        err = complex(self.eval(w)) - z
        if abs(err) <= 1e-9:
            return w
        raise ArithmeticError(f"sigma inversion stalled at residual {abs(err):.2e}")


def _scaled_recursion(lam: complex, a2: complex, a3: complex, n: int, scale: float,
                      stop_mag: float = 1e120) -> tuple[np.ndarray, int]:
    """Coefficients of sigma(scale * w) up to order n.

    The recursion is scale-covariant (c_k -> c_k s^k solves it with c_1 = s),
    so running it with first coefficient `scale` directly produces the
    rescaled series.  Returns (array, k_stop) where k_stop < n means entry
    magnitudes left [1/stop_mag, stop_mag] and the caller should re-scale.
    """
    c = np.zeros(n + 1, dtype=np.complex128)
    s2 = np.zeros(n + 1, dtype=np.complex128)  # S2_k = sum_{i=1}^{k-1} c_i c_{k-i}
    c[1] = scale
    lam_pow = lam
    for k in range(2, n + 1):
        lam_pow *= lam
        s2[k] = np.dot(c[1:k], c[k - 1 : 0 : -1])
        s3_k = np.dot(c[1 : k - 1], s2[k - 1 : 1 : -1]) if k >= 3 else 0.0
        divisor = lam_pow - lam
        if abs(divisor) < 1e-250:
            raise SmallDivisorOverflow(f"|lambda^{k} - lambda| underflowed")
        c[k] = lam * (a2 * s2[k] + a3 * s3_k) / divisor
        mag = abs(c[k])
        if not np.isfinite(mag) or mag > stop_mag or (mag != 0 and mag < 1 / stop_mag):
            return c, k
    return c, n


def build_linearizer(fmap, n_coeffs: int = 256) -> Linearizer:
    """Solve the coefficient recursion up to order n_coeffs.

    Incremental Cauchy products keep it O(N^2).  A short unscaled pilot run
    estimates the radius; the full run is then carried out on the rescaled
    series so deep truncations (N in the thousands) stay within float range.
    """
    if n_coeffs < 8:
        raise ValueError("need at least 8 coefficients")
    a2, a3 = _series_coefficients(fmap)
    lam = fmap.lam
    n = n_coeffs
    if a2 == 0 and a3 == 0:
        scaled = np.zeros(n + 1, dtype=np.complex128)
        scaled[1] = 1.0
        return Linearizer(fmap=fmap, lam=lam, scaled=scaled, scale=1.0)
    # pilot: unscaled, stopping before overflow, just to place the scale
    pilot_n = min(n, 384)
    pilot, k_stop = _scaled_recursion(lam, a2, a3, pilot_n, 1.0)
    tail = pilot[max(2, k_stop // 2) : k_stop + 1]
    mags = np.abs(tail[tail != 0])
    if len(mags) == 0:
        scale = 1.0
    else:
        ks = np.arange(max(2, k_stop // 2), k_stop + 1)[tail != 0]
        scale = float(np.exp(-np.max(np.log(mags) / ks)))
    scale = min(max(scale, 1e-6), 1e6)
    for _ in range(8):
        c, k_stop = _scaled_recursion(lam, a2, a3, n, scale)
        if k_stop == n:
            # keep the tail balanced near O(1): a drifting tail means the
            # scale is off the true radius by drift^(1/N), which both wastes
            # float range and skews evaluation near the boundary circle
            tail_mag = np.abs(c[max(2, n - 16) :]).max()
            if tail_mag == 0 or 1e-3 < tail_mag < 1e3:
                return Linearizer(fmap=fmap, lam=lam, scaled=c, scale=scale)
            scale /= tail_mag ** (1.0 / n)
            continue
        # drifted out of range: fold the measured drift back into the scale
        drift = abs(c[k_stop]) ** (1.0 / k_stop)
        scale /= drift ** 0.9
    # the last full-length run wins even if the tail is not balanced
    c, k_stop = _scaled_recursion(lam, a2, a3, n, scale)
    if k_stop == n:
        return Linearizer(fmap=fmap, lam=lam, scaled=c, scale=scale)
    raise SmallDivisorOverflow(
        f"could not stabilize the scaled recursion at N={n} (scale {scale:.3g})"
    )


def _limsup_radius(lin: Linearizer) -> float:
    """Richardson-extrapolated 1/limsup |c_k|^{1/k} over the tail third.

    Works on the rescaled series: limsup |t_k|^{1/k} = scale / radius.
    """
    coeffs = lin.scaled
    n = len(coeffs) - 1
    lo = max(2, (2 * n) // 3)
    ks = np.arange(lo, n + 1)
    mags = np.abs(coeffs[lo:])
    good = mags > 0
    if good.sum() < 8:
        raise Unstable("too few nonzero tail coefficients")
    ks = ks[good]
    y = np.log(mags[good]) / ks
    mid = len(ks) // 2
    k1 = ks[:mid].mean()
    k2 = ks[mid:].mean()
    y1 = y[:mid].max()
    y2 = y[mid:].max()
    # y(k) ~ y_inf + C/k: eliminate the 1/k term from the two windowed maxima
    y_inf = (k2 * y2 - k1 * y1) / (k2 - k1)
    return float(lin.scale * np.exp(-y_inf))


def _injectivity_radius(lin: Linearizer, probe: float, samples: int = 256) -> float:
    """Largest radius (bisected) at which the sampled circle image is simple."""
    angles = np.exp(2j * np.pi * np.arange(samples) / samples)

    def simple(r: float) -> bool:
        return geometry.polygon_is_simple(lin.eval(r * angles))

    lo, hi = probe, probe
    for _ in range(40):
        if simple(lo):
            break
        lo *= 0.7
    else:
        raise Unstable("no injective radius found below the primary estimate")
    for _ in range(8):
        if not simple(hi):
            break
        hi *= 1.3
    else:
        # never failed: the truncated polynomial looks injective far beyond
        # the primary estimate; report the last probed radius and let the
        # 10% gate decide.
        return hi
    for _ in range(40):
        mid = math.sqrt(lo * hi)
        if simple(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-4 * lo:
            break
    return lo


def conformal_radius(lin: Linearizer) -> ConformalRadius:
    """Dual-estimate conformal radius with a 10% cross-validation gate."""
    if lin.n_coeffs < 8:
        raise ValueError("need at least 8 coefficients")
    tail = lin.scaled[2:]
    if np.max(np.abs(tail)) == 0.0:
        # rigid rotation: sigma is the identity, the disk is the whole plane
        return ConformalRadius(radius=math.inf, cross_radius=math.inf,
                               flag="non-polynomial-domain")
    primary = _limsup_radius(lin)
    cross = _injectivity_radius(lin, primary)
    if abs(primary - cross) > 0.10 * max(primary, cross):
        raise Unstable(
            f"radius estimators disagree: limsup {primary:.6g} vs injectivity {cross:.6g}"
        )
    result = ConformalRadius(radius=primary, cross_radius=cross)
    object.__setattr__(lin, "_radius", result)
    return result


def critical_prefix(lin: Linearizer, crit: complex | None = None,
                    seeds: int = 8192) -> complex | None:
    """The w with sigma(w) = critical point, |w| = conformal radius.

    The Siegel boundary carries a critical point of the map; its preimage
    under sigma sits exactly on the circle of convergence, so |w| anchors
    the radius and arg(w) anchors the boundary phase.  Newton from the best
    of `seeds` circle samples; None when no critical preimage converges
    near the circle (e.g. the free critical point of a cubic).
    """
    r0 = lin.radius_estimate
    crits = [crit] if crit is not None else list(getattr(lin.fmap, "critical_points", ()))
    angles = np.exp(2j * np.pi * np.arange(seeds) / seeds)
    circle = lin.eval(r0 * angles)
    best: complex | None = None
    for target in crits:
        w = r0 * complex(angles[int(np.argmin(np.abs(circle - target)))])
        ok = False
        for _ in range(80):
            err = complex(lin.eval(w)) - target
            if abs(err) <= 1e-12 * max(1.0, abs(target)):
                ok = True
                break
            dw = complex(lin.deriv(w))
            if dw == 0:
                break
            step = err / dw
            if abs(step) > 0.01 * r0:
                step *= 0.01 * r0 / abs(step)
            w = w - step
        if ok and 0.3 * r0 <= abs(w) <= 1.7 * r0:
            if best is None or abs(w) < abs(best):
                best = w
    return best


@dataclass(frozen=True)
class SiegelBoundary:
    """Sampled boundary polygon of the Siegel disk."""

    samples: np.ndarray
    radius_used: float
    lin: Linearizer

    def contains(self, z: complex) -> bool:
        return geometry.polygon_contains(self.samples, z)

    def contains_many(self, zs) -> np.ndarray:
        return geometry.polygon_contains_many(self.samples, zs)

    def dist(self, z: complex) -> float:
        return geometry.dist_to_polygon(self.samples, z)

    @property
    def m(self) -> int:
        return len(self.samples)


def boundary(lin: Linearizer, m: int = 4096, radius: float | None = None,
             check_simple: bool = True) -> SiegelBoundary:
    """Sample sigma on a circle hugging the conformal radius from inside.

    With radius=None the circle radius comes from the critical preimage
    anchor (Newton on sigma(w) = critical point) when available, else from
    the series tail estimate; either way a small inward inset keeps the
    truncated fold outside the sampled curve.  The inset doubles until the
    polygon is simple; a radius overestimate that never untangles raises
    SelfIntersection.
    """
    r = lin.radius_estimate if radius is None else radius
    if not math.isfinite(r):
        raise ValueError("boundary undefined for a non-polynomial domain")
    insets: tuple[float, ...] = (0.0,)
    if radius is None:
        anchor = critical_prefix(lin)
        if anchor is not None:
            r = abs(anchor)
        if check_simple:
            insets = (1e-4, 2e-4, 4e-4, 8e-4, 1.6e-3, 3.2e-3, 6.4e-3,
                      1.28e-2, 2.56e-2)
    last = None
    for inset in insets:
        w = r * (1.0 - inset) * np.exp(2j * np.pi * np.arange(m) / m)
        samples = lin.eval(w)
        last = samples, r * (1.0 - inset)
        if not check_simple or geometry.polygon_is_simple(samples):
            break
    else:
        raise SelfIntersection(f"boundary polygon self-intersects at radius {r:.6g}")
    samples, r_used = last
    if check_simple and not geometry.polygon_contains(samples, 0j):
        raise SelfIntersection("boundary polygon does not surround 0")
    return SiegelBoundary(samples=samples, radius_used=r_used, lin=lin)


def critical_on_boundary(fmap, which: str = "b", tol: float = 1e-2,
                         n_coeffs: int = 512, m: int = 4096,
                         bnd: SiegelBoundary | None = None) -> float:
    """Distance from the chosen critical point to the sampled boundary.

    which: "b" or "inv" for the cubic's two critical points; the quadratic
    has only one.  Both distances are available by calling twice — no tie
    is broken here.
    """
    if bnd is None:
        bnd = boundary(build_linearizer(fmap, n_coeffs), m=m)
    crits = fmap.critical_points
    if isinstance(fmap, CubicSiegel):
        point = crits[0] if which == "b" else crits[1]
    else:
        point = crits[0]
    del tol  # membership claims are the caller's to make
    return bnd.dist(point)


def nearest_critical(rotation: RotationNumber, b: complex, n_coeffs: int = 192,
                     m: int = 1024) -> str:
    """Which critical point of f_b hugs the Siegel boundary: "b" or "inv".

    The comparison circle sits at 97% of the estimated radius: near the
    parameter curve where both critical points touch the boundary, the
    truncated series misbehaves on the full circle, while the comparison
    of the two distances is insensitive to a shared inward shift.
    """
    fmap = CubicSiegel(rotation, b)
    lin = build_linearizer(fmap, n_coeffs)
    bnd = boundary(lin, m=m, radius=0.97 * lin.radius_estimate, check_simple=False)
    d_b = bnd.dist(b)
    d_inv = bnd.dist(1.0 / b)
    return "b" if d_b <= d_inv else "inv"


def zakeri_crossing(rotation: RotationNumber, direction: float, r_lo: float = 0.1,
                    r_hi: float = 10.0, tol: float = 1e-4,
                    n_coeffs: int = 192, m: int = 1024) -> float:
    """Bisect the radius along e^{i*direction} where the roles of b and 1/b flip.

    The classifier is which critical point sits nearest the sampled Siegel
    boundary; on one side of the curve it is b, on the other 1/b.
    """
    phase = complex(math.cos(direction), math.sin(direction))

    def classify(r: float) -> str:
        b = r * phase
        # b = +-1 has collided critical points; step just past it so the
        # classifier stays defined (the bisection tolerance dwarfs the nudge)
        if min(abs(b - 1.0), abs(b + 1.0)) < 1e-9:
            b *= 1.0 + 1e-9
        return nearest_critical(rotation, b, n_coeffs=n_coeffs, m=m)

    side_lo = classify(r_lo)
    side_hi = classify(r_hi)
    if side_lo == side_hi:
        raise NoBracket(f"both endpoints classify as {side_lo!r} along {direction:.3f}")
    lo, hi = r_lo, r_hi
    while hi - lo > tol:
        mid = math.sqrt(lo * hi)
        if classify(mid) == side_lo:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def capture_time(fmap, z0: complex, bnd: SiegelBoundary, budget: int = 10_000) -> int | None:
    """Least n <= budget with f^n(z0) strictly inside the boundary polygon."""
    z = complex(z0)
    box = np.max(np.abs(bnd.samples))
    for n in range(budget + 1):
        # cheap bounding-circle reject before the polygon test
        if abs(z) <= box and bnd.contains(z):
            return n
        if abs(z) > 1e6:
            return None
        z = fmap.eval(z)
    return None
