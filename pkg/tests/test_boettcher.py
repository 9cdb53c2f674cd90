"""Escape-side machinery: potentials, Boettcher values, ray tracing."""

import cmath
import math

import numpy as np
import pytest

from siegellab.boettcher import (
    Angle,
    InsideCriticalLevel,
    NonEscaping,
    NotEscaping,
    SeedFailure,
    boettcher,
    green_potential,
    param_phi,
    refine_parabolic,
    trace_external_ray,
    trace_param_ray,
)
from siegellab.maps import CubicSiegel, QuadraticSiegel
from siegellab.rotation import RotationNumber

GOLDEN = RotationNumber.golden()
LAM = GOLDEN.lam()

# parabolic parameter where the 2/3 and 5/6 parameter rays land; the closed
# form comes from solving f_b(z) = z, f_b'(z) = 1 simultaneously:
# B^2 = (16/3)(1 - 1/lambda) with B = b + 1/b, picking the root in the
# upper-left quadrant.
PARABOLIC_B = -2.756064431554954 + 0.663858109024034j


# ---------------------------------------------------------------------------
# exact angles


def test_angle_reduction_and_wraparound():
    assert Angle(2, 4) == Angle(1, 2)
    assert Angle(5, 3) == Angle(2, 3)
    assert Angle(-1, 3) == Angle(2, 3)
    assert Angle(7) == Angle(0, 1)


def test_angle_refuses_floats():
    with pytest.raises(TypeError):
        Angle(0.5)
    with pytest.raises(TypeError):
        Angle(1, 3.0)


def test_angle_tripling_is_exact():
    assert Angle(2, 3).triple() == Angle(0, 1)
    assert Angle(5, 6).triple() == Angle(1, 2)
    # 20 random rationals: tripling then dividing lands back (den coprime to 3)
    t = Angle(123456789, 999999937)
    assert t.triple().frac == (t.frac * 3) % 1


def test_angle_preperiod_period():
    assert Angle(2, 3).preperiod_period(3) == (1, 1)   # 2/3 -> 0 -> 0
    assert Angle(1, 8).preperiod_period(3) == (0, 2)   # 1/8 -> 3/8 -> 1/8
    assert Angle(1, 2).preperiod_period(3) == (0, 1)
    assert Angle(1, 6).preperiod_period(2) == (1, 2)   # doubling map
    assert Angle(0, 1).preperiod_period(3) == (0, 1)


def test_angle_parse_round_trip():
    for text in ("0", "1/2", "5/6", "7/12"):
        assert str(Angle.parse(text)) in (text, text + "/1") or \
            Angle.parse(str(Angle.parse(text))) == Angle.parse(text)
    assert Angle.parse("2/4") == Angle(1, 2)


# ---------------------------------------------------------------------------
# Green potential


def test_potential_functoriality_quadratic():
    q = QuadraticSiegel(GOLDEN)
    for z in (3.0, 50.0, -4 + 2j, 10j, 2.5 - 2.5j):
        g = green_potential(q, complex(z))
        gf = green_potential(q, complex(q.eval(complex(z))))
        assert abs(gf - 2 * g) <= 1e-10 * abs(gf)


def test_potential_functoriality_cubic():
    fm = CubicSiegel(GOLDEN, 5.0)
    for z in (3j, 4.0, -5 + 1j, 8j):
        g = green_potential(fm, complex(z))
        gf = green_potential(fm, complex(fm.eval(complex(z))))
        assert abs(gf - 3 * g) <= 1e-10 * abs(gf)


def test_potential_asymptotic_far_away():
    q = QuadraticSiegel(GOLDEN)
    z = 1e6 + 0j
    expect = math.log(abs(z)) + math.log(abs(LAM / 2))
    assert abs(green_potential(q, z) - expect) <= 1e-5


def test_potential_nonescaping():
    q = QuadraticSiegel(GOLDEN)
    with pytest.raises(NonEscaping):
        green_potential(q, 0j)
    with pytest.raises(NonEscaping):
        green_potential(q, 0.1 + 0j)  # inside the Siegel disk


# ---------------------------------------------------------------------------
# Boettcher coordinate


def test_boettcher_functional_equation():
    rng = np.random.default_rng(7)
    for fmap in (QuadraticSiegel(GOLDEN), CubicSiegel(GOLDEN, 5.0)):
        d = fmap.degree
        radii = np.exp(rng.uniform(np.log(10), np.log(1e3), 100))
        args = rng.uniform(0, 2 * np.pi, 100)
        for z in radii * np.exp(1j * args):
            lhs = boettcher(fmap, complex(fmap.eval(complex(z))))
            rhs = boettcher(fmap, complex(z)) ** d
            assert abs(lhs - rhs) <= 1e-9 * abs(rhs)


def test_boettcher_modulus_is_exp_potential():
    q = QuadraticSiegel(GOLDEN)
    for z in (20.0, 100j, -30 + 40j):
        phi = boettcher(q, complex(z))
        assert abs(abs(phi) - math.exp(green_potential(q, complex(z)))) \
            <= 1e-12 * abs(phi)


def test_boettcher_branch_at_infinity():
    # phi(z)/z approaches a^(1/(d-1)) with the principal root, consistently
    # at both radii (no branch flip along the way).
    q = QuadraticSiegel(GOLDEN)
    s = q.leading_coefficient  # d = 2: the constant is a itself
    assert abs(boettcher(q, 1e6 + 0j) / 1e6 - s) <= 1e-4
    assert abs(boettcher(q, 1e3 + 0j) / 1e3 - s) <= 1e-2
    fm = CubicSiegel(GOLDEN, 5.0)
    s3 = cmath.sqrt(fm.leading_coefficient)
    assert abs(boettcher(fm, 1e6 + 0j) / 1e6 - s3) <= 1e-4


def test_boettcher_refuses_points_below_critical_level():
    fm = CubicSiegel(GOLDEN, 5.0)  # critical point 5 escapes at level ~0.753
    with pytest.raises(InsideCriticalLevel):
        boettcher(fm, 3.0 + 0j)    # G = 0.58, below the level
    boettcher(fm, 3j)              # G = 0.91, above: fine


# ---------------------------------------------------------------------------
# dynamical rays


def test_ray_needs_exact_angle():
    q = QuadraticSiegel(GOLDEN)
    with pytest.raises(TypeError):
        trace_external_ray(q, 0.5)
    with pytest.raises(ValueError):
        trace_external_ray(q, Angle(0, 1), g_hi=1e-8, g_lo=2.0)


def test_fixed_ray_lands_on_repelling_fixed_point():
    q = QuadraticSiegel(GOLDEN)
    tr = trace_external_ray(q, Angle(0, 1), g_hi=2.0, g_lo=1e-8)
    assert tr.status == "landed"
    z = tr.point
    assert abs(q.eval(z) - z) <= 1e-8
    assert abs(q.deriv(z)) > 1.0
    # the non-zero fixed point of lam z (1 - z/2) in closed form
    assert abs(z - 2 * (1 - 1 / LAM)) <= 1e-8
    gs = [g for g, _ in tr.samples]
    assert all(b < a for a, b in zip(gs, gs[1:]))


def test_ray_tripling_consistency():
    # push every sample of R_t through f and compare against R_{3t} at the
    # tripled potential; the ladder ratio 3^(-1/8) makes levels align exactly.
    fm = CubicSiegel(GOLDEN, 5.0)
    worst = 0.0
    for t in (Angle(1, 8), Angle(2, 7), Angle(3, 11), Angle(1, 5), Angle(4, 13)):
        low = trace_external_ray(fm, t, g_hi=3.0, g_lo=1.0)
        high = trace_external_ray(fm, t.triple(), g_hi=9.0, g_lo=3.0)
        table = {round(math.log(g), 9): z for g, z in high.samples}
        matched = 0
        for g, z in low.samples:
            key = round(math.log(3 * g), 9)
            if key in table:
                worst = max(worst, abs(complex(fm.eval(z)) - table[key]))
                matched += 1
        assert matched >= 5
    assert worst <= 1e-6


@pytest.fixture(scope="module")
def on_ray():
    levels = [math.exp(2.0), math.exp(1.0), math.exp(0.5)]
    ray = trace_param_ray(GOLDEN, Angle(2, 3), levels)
    return CubicSiegel(GOLDEN, ray.points[-1])


class TestCrashingRays:
    """Parameters sitting on a parameter ray pinch their dynamical rays."""

    def test_critical_point_sits_at_the_ray_potential(self, on_ray):
        assert abs(green_potential(on_ray, on_ray.b) - 0.5) <= 1e-6

    def test_sibling_angles_crash_on_the_critical_point(self, on_ray):
        # co_b lies on R_{2/3}, so the two other preimages of R_0 collide
        # at the critical point b at its own potential.
        for t in (Angle(0, 1), Angle(1, 3)):
            tr = trace_external_ray(on_ray, t, g_hi=2.0, g_lo=1e-6)
            assert tr.status == "crashed"
            assert abs(tr.crash_potential - 0.5) <= 1e-6

    def test_own_angle_crashes_one_level_deeper(self, on_ray):
        # R_{2/3} passes through co_b at potential 0.5 and terminates on the
        # preimage of the critical point at potential 0.5/3.
        tr = trace_external_ray(on_ray, Angle(2, 3), g_hi=2.0, g_lo=1e-6)
        assert tr.status == "crashed"
        assert abs(tr.crash_potential - 0.5 / 3) <= 1e-6

    def test_unrelated_angles_land(self, on_ray):
        for t in (Angle(1, 2), Angle(5, 6)):
            tr = trace_external_ray(on_ray, t, g_hi=2.0, g_lo=1e-6)
            assert tr.status == "landed"

    def test_ray_json_shape(self, on_ray):
        tr = trace_external_ray(on_ray, Angle(0, 1), g_hi=2.0, g_lo=1e-6)
        blob = tr.to_json()
        assert blob["angle"] == "0/1"
        assert blob["status"] == "crashed"
        assert blob["crash_potential"] == pytest.approx(0.5, abs=1e-6)
        assert all(len(row) == 3 for row in blob["samples"])


# ---------------------------------------------------------------------------
# parameter plane


def test_param_phi_outside_unit_disk():
    for phase in (0.0, 0.37, 2.2):
        val = param_phi(GOLDEN, 1e3 * cmath.exp(1j * phase))
        assert abs(val) > 1.0


def test_param_phi_inside_locus():
    with pytest.raises(NotEscaping):
        param_phi(GOLDEN, 1.2 + 0.1j)


def test_param_phi_winding_number():
    # degree of the escape coordinate along a huge circle, frozen once from
    # a 256-point winding integral: the uniformization is injective out there.
    n = 256
    args = []
    for k in range(n + 1):
        args.append(cmath.phase(param_phi(GOLDEN, 1e3 * cmath.exp(2j * math.pi * k / n))))
    total = 0.0
    for a1, a2 in zip(args, args[1:]):
        d = a2 - a1
        d -= 2 * math.pi * round(d / (2 * math.pi))
        total += d
    assert round(total / (2 * math.pi)) == 1


def test_param_ray_validation():
    with pytest.raises(TypeError):
        trace_param_ray(GOLDEN, 0.25, [2.0, 1.5])
    with pytest.raises(ValueError):
        trace_param_ray(GOLDEN, Angle(0, 1), [2.0, 1.0])
    with pytest.raises(ValueError):
        trace_param_ray(GOLDEN, Angle(0, 1), [2.0, 3.0])
    with pytest.raises(SeedFailure):
        trace_param_ray(GOLDEN, Angle(0, 1), [math.exp(0.5)], newton_steps=2)


def test_param_ray_zero_angle_completes():
    levels = list(np.exp(np.geomspace(2.0, 1e-4, 25)))
    ray = trace_param_ray(GOLDEN, Angle(0, 1), levels)
    assert ray.status == "complete"
    assert len(ray.points) == len(levels)
    steps = [abs(b2 - b1) for b1, b2 in zip(ray.points, ray.points[1:])]
    assert steps[-1] < steps[0]  # accumulating, not wandering


def test_param_ray_half_turn_symmetry():
    # f_{-b}(-z) = -f_b(z) swaps the rays of t and t + 1/2 via b -> -b
    levels = list(np.exp(np.geomspace(2.0, 1e-3, 12)))
    ray_a = trace_param_ray(GOLDEN, Angle(1, 8), levels)
    ray_b = trace_param_ray(GOLDEN, Angle(5, 8), levels)
    worst = max(abs(pa + pb) for pa, pb in zip(ray_a.points, ray_b.points))
    assert worst <= 1e-8


@pytest.fixture(scope="module")
def rays():
    levels = list(np.exp(np.geomspace(2.0, 1e-6, 48)))
    return {t: trace_param_ray(GOLDEN, Angle(*t), levels)
            for t in ((2, 3), (5, 6))}


class TestWakeBoundaryRays:
    """The 2/3 and 5/6 parameter rays pinch off the main wake together."""

    def test_both_complete(self, rays):
        assert all(r.status == "complete" for r in rays.values())

    def test_raw_tails_approach_each_other(self, rays):
        assert abs(rays[2, 3].points[-1] - rays[5, 6].points[-1]) < 0.08

    def test_landing_estimates_agree(self, rays):
        e1 = rays[2, 3].landing_estimate()
        e2 = rays[5, 6].landing_estimate()
        assert abs(e1 - e2) <= 5e-3
        assert abs(e1 - PARABOLIC_B) <= 5e-3

    def test_endpoint_refines_to_a_parabolic(self, rays):
        guess = 0.5 * (rays[2, 3].landing_estimate()
                       + rays[5, 6].landing_estimate())
        b, z = refine_parabolic(GOLDEN, guess)
        assert abs(b - guess) <= 5e-3          # stays tethered to the rays
        fm = CubicSiegel(GOLDEN, b)
        assert abs(fm.eval(z) - z) <= 1e-12
        assert abs(fm.deriv(z) - 1.0) <= 1e-12  # multiplier is a root of unity
        assert abs(b - PARABOLIC_B) <= 1e-10


def test_refine_parabolic_fixes_the_closed_form():
    b, z = refine_parabolic(GOLDEN, PARABOLIC_B)
    assert abs(b - PARABOLIC_B) <= 1e-12
    fm = CubicSiegel(GOLDEN, b)
    assert abs(fm.deriv(z) - 1.0) <= 1e-12
