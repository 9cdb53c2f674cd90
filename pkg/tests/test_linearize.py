import math

import numpy as np
import pytest

from siegellab.rotation import RotationNumber
from siegellab.maps import QuadraticSiegel, CubicSiegel, RigidRotation
from siegellab.linearize import (
    build_linearizer,
    conformal_radius,
    boundary,
    critical_prefix,
    critical_on_boundary,
    nearest_critical,
    zakeri_crossing,
    capture_time,
    Unstable,
    NoBracket,
)
from siegellab import geometry

GOLDEN = RotationNumber.golden()
SILVER = RotationNumber.silver()


@pytest.fixture(scope="module")
def golden_lin():
    return build_linearizer(QuadraticSiegel(GOLDEN), 2048)


@pytest.fixture(scope="module")
def golden_bnd(golden_lin):
    return boundary(golden_lin, m=4096)


def random_cubics(rotation, n, seed):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        r = math.exp(rng.uniform(math.log(0.1), math.log(10.0)))
        phi = rng.uniform(0, 2 * math.pi)
        b = r * complex(math.cos(phi), math.sin(phi))
        if abs(b - 1) < 0.05 or abs(b + 1) < 0.05:
            continue
        out.append(CubicSiegel(rotation, b))
    return out


def test_c1_normalization():
    lin = build_linearizer(QuadraticSiegel(GOLDEN), 64)
    assert lin.coeffs[1] == 1.0
    assert complex(lin.deriv(0j)) == 1.0


def test_c2_quadratic_closed_form():
    for rot in (GOLDEN, SILVER):
        lin = build_linearizer(QuadraticSiegel(rot), 64)
        lam = lin.lam
        assert abs(lin.coeffs[2] - 1.0 / (2.0 * (1.0 - lam))) <= 1e-12


def test_c2_cubic_closed_form():
    for b in (2.0, 0.3 - 0.7j):
        fm = CubicSiegel(GOLDEN, b)
        lin = build_linearizer(fm, 64)
        lam = lin.lam
        want = (b + 1.0 / b) / (2.0 * (1.0 - lam))
        assert abs(lin.coeffs[2] - want) <= 1e-12


def test_functional_equation_residual():
    # the defining equation f(sigma(w)) = sigma(lambda*w), checked on the
    # circle |w| = 0.3 * radius at 64 points
    maps = []
    for rot in (GOLDEN, SILVER):
        maps.append(QuadraticSiegel(rot))
        maps.extend(random_cubics(rot, 10, seed=7))
    for fmap in maps:
        lin = build_linearizer(fmap, 256)
        r = 0.3 * lin.radius_estimate
        w = r * np.exp(2j * np.pi * np.arange(64) / 64)
        left = np.array([fmap.eval(z) for z in lin.eval(w)])
        right = lin.eval(lin.lam * w)
        assert np.max(np.abs(left - right)) <= 1e-10


def test_radius_estimators_agree(golden_lin):
    cr = conformal_radius(golden_lin)
    assert 0.3 < cr.radius < 1.0
    assert abs(cr.radius - cr.cross_radius) / cr.radius <= 1e-3


def test_radius_unstable_with_few_coefficients():
    lin = build_linearizer(QuadraticSiegel(GOLDEN), 8)
    with pytest.raises(Unstable):
        conformal_radius(lin)


def test_rigid_rotation_radius_sentinel():
    lin = build_linearizer(RigidRotation(GOLDEN), 64)
    cr = conformal_radius(lin)
    assert math.isinf(cr.radius)
    assert math.isinf(cr.cross_radius)
    assert cr.flag == "non-polynomial-domain"


def test_critical_prefix_anchor(golden_lin):
    w = critical_prefix(golden_lin)
    assert w is not None
    assert abs(complex(golden_lin.eval(w)) - 1.0) <= 1e-10
    assert abs(abs(w) - golden_lin.radius_estimate) <= 0.01 * golden_lin.radius_estimate


def test_boundary_polygon(golden_bnd):
    samples = golden_bnd.samples
    assert len(samples) == 4096
    assert geometry.polygon_is_simple(samples)
    assert geometry.polygon_winding(samples, 0j) == 1
    assert golden_bnd.contains(0j)
    # critical point of the quadratic sits on the Siegel boundary
    assert golden_bnd.dist(1.0 + 0j) <= 1e-2
    # containment: the polygon fits inside the disk of its own max modulus
    assert geometry.polygon_area(samples) < math.pi * np.max(np.abs(samples)) ** 2


def test_boundary_rotation_property(golden_lin):
    m = 1024
    bnd = boundary(golden_lin, m=m)
    fq = QuadraticSiegel(GOLDEN)
    shift = round(float(GOLDEN.theta) * m)
    img = np.array([fq.eval(z) for z in bnd.samples])
    nearest = np.argmin(np.abs(img[:, None] - bnd.samples[None, :]), axis=1)
    off = (nearest - np.arange(m) - shift) % m
    off = np.where(off > m // 2, off - m, off)
    assert np.all(np.abs(off) <= 2)


def test_critical_on_boundary_escaping_b():
    for b in (5.0, 5.0j):
        d = critical_on_boundary(CubicSiegel(GOLDEN, b), "inv")
        assert d <= 1e-2


def test_far_critical_point_is_far():
    fm = CubicSiegel(GOLDEN, 100.0)
    assert critical_on_boundary(fm, "inv") <= 1e-2
    assert critical_on_boundary(fm, "b") > 1.0


def test_nearest_critical_labels():
    assert nearest_critical(GOLDEN, 0.05 + 0.0j) == "b"
    assert nearest_critical(GOLDEN, 20.0 + 0.0j) == "inv"


def test_zakeri_crossing_real_direction():
    r = zakeri_crossing(GOLDEN, 0.0)
    assert 0.1 < r < 10.0


def test_zakeri_crossing_reciprocal_pair():
    phi = math.pi / 4
    r1 = zakeri_crossing(GOLDEN, phi)
    r2 = zakeri_crossing(GOLDEN, -phi, r_lo=0.9 / r1, r_hi=1.1 / r1)
    assert abs(r1 * r2 - 1.0) <= 1e-3


def test_zakeri_no_bracket():
    with pytest.raises(NoBracket):
        zakeri_crossing(GOLDEN, 0.0, r_lo=5.0, r_hi=10.0)


def test_capture_time(golden_lin):
    fq = QuadraticSiegel(GOLDEN)
    bnd = boundary(golden_lin, m=1024)
    assert capture_time(fq, 0j, bnd) == 0
    inside = complex(golden_lin.eval(0.3 * bnd.radius_used * np.exp(0.4j)))
    assert capture_time(fq, inside, bnd) == 0
    assert capture_time(fq, 10.0 + 0j, bnd) is None
    # an exterior preimage of an interior point is captured in one step
    target = complex(golden_lin.eval(0.2 * bnd.radius_used))
    disc = np.sqrt(1 - 2 * target / fq.lam)
    z_out = max([1 - disc, 1 + disc], key=abs)
    assert not bnd.contains(z_out)
    assert capture_time(fq, z_out, bnd) == 1
