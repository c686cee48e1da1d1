import math

import numpy as np
import pytest

from edskit.errors import ConfigurationError, DomainError, SingularDenominatorError
from edskit.taylor import (MAX_DEGREE, TaylorScalar, space, watch_denominators)
from edskit.sampling import SplitMix64


def poly_dict_mul(p1, p2, nvars, deg):
    """Independent oracle: exact polynomial product as a multi-index dict."""
    out = {}
    for m1, c1 in p1.items():
        for m2, c2 in p2.items():
            m = tuple(a + b for a, b in zip(m1, m2))
            if sum(m) > deg:
                continue
            out[m] = out.get(m, 0.0) + c1 * c2
    return out


def random_poly(rng, nvars, deg, nterms=6):
    sp = space(nvars, deg)
    p = {}
    for _ in range(nterms):
        m = sp.monomials[int(rng.uniform(0, sp.size - 1e-9))]
        p[m] = p.get(m, 0.0) + rng.uniform(-2, 2)
    return p


def as_taylor(p, sp):
    t = sp.constant(0.0)
    coeffs = np.zeros(sp.size)
    for m, c in p.items():
        coeffs[sp.index_of[m]] = c
    return TaylorScalar(sp, coeffs)


def test_seed_examples():
    # lift t at t=2: constant 2, unit t-coefficient
    sp = space(1, 1)
    t = sp.variable(0, 2.0)
    assert t.const == 2.0
    assert t.coefficient((1,)) == 1.0

    # f = x1*v1 at x1=3, v1=5 lifted in both
    sp2 = space(2, 2)
    x1 = sp2.variable(0, 3.0)
    v1 = sp2.variable(1, 5.0)
    f = x1 * v1
    assert f.const == 15.0
    assert f.derivative((1, 0)) == 5.0
    assert f.derivative((0, 1)) == 3.0
    assert f.derivative((1, 1)) == 1.0

    # f = x^3 at x=1 to degree 3: binomial coefficients 1,3,3,1
    sp3 = space(1, 3)
    x = sp3.variable(0, 1.0)
    f = x * x * x
    assert [f.coefficient((k,)) for k in range(4)] == [1.0, 3.0, 3.0, 1.0]


def test_product_exact_and_commutative():
    rng = SplitMix64(101)
    for nvars, deg in ((2, 3), (4, 3), (7, 3), (3, 4)):
        sp = space(nvars, deg)
        for _ in range(10):
            p1 = random_poly(rng, nvars, deg)
            p2 = random_poly(rng, nvars, deg)
            t1, t2 = as_taylor(p1, sp), as_taylor(p2, sp)
            prod = poly_dict_mul(p1, p2, nvars, deg)
            got = t1 * t2
            want = as_taylor(prod, sp)
            assert np.max(np.abs(got.coeffs - want.coeffs)) < 1e-14
            assert np.max(np.abs((t2 * t1).coeffs - got.coeffs)) == 0.0


def test_product_associative():
    rng = SplitMix64(77)
    sp = space(3, 4)
    for _ in range(10):
        a = as_taylor(random_poly(rng, 3, 4), sp)
        b = as_taylor(random_poly(rng, 3, 4), sp)
        c = as_taylor(random_poly(rng, 3, 4), sp)
        lhs = (a * b) * c
        rhs = a * (b * c)
        assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) < 1e-13


def test_division_and_roots_match_pointwise_values():
    # composite expressions evaluated through the series agree with plain math
    rng = SplitMix64(5)
    sp = space(2, 4)
    for _ in range(50):
        x0, y0 = rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)
        x = sp.variable(0, x0)
        y = sp.variable(1, y0)
        f = (x * y + 1.0).sqrt() / (x + y) + (x * 0.3).sin() * (y ** -2) + (x ** 1.5).exp() * 1e-2
        h = 1e-6
        for i, (dx, dy) in enumerate(((h, 0.0), (0.0, h))):
            plain = lambda a, b: (math.sqrt(a * b + 1) / (a + b)
                                  + math.sin(a * 0.3) / b ** 2 + math.exp(a ** 1.5) * 1e-2)
            fd = (plain(x0 + dx, y0 + dy) - plain(x0 - dx, y0 - dy)) / (2 * h)
            ad = f.derivative((1, 0) if i == 0 else (0, 1))
            assert abs(ad - fd) <= 1e-6 * max(1.0, abs(ad))


def test_singular_and_domain_errors():
    sp = space(1, 3)
    x = sp.variable(0, 0.0)
    with pytest.raises(SingularDenominatorError):
        (1.0 / x)
    with pytest.raises(DomainError):
        (x - 2.0).sqrt()
    with pytest.raises(DomainError):
        (x - 1.0) ** 0.5
    with pytest.raises(DomainError):
        x.absval()
    # integer powers of zero-constant series are fine
    assert (x ** 3).coefficient((3,)) == 1.0


def test_degree_cap():
    with pytest.raises(ConfigurationError):
        space(2, MAX_DEGREE + 1)
    assert space(2, 4).max_degree == 4  # at least degree 4 supported


def test_coefficient_count():
    # C(num_vars + max_degree, max_degree) coefficients
    for n, d in ((1, 3), (3, 2), (7, 3), (4, 4)):
        assert space(n, d).size == math.comb(n + d, d)


def test_pderiv_and_truncate():
    sp = space(2, 3)
    x = sp.variable(0, 2.0)
    y = sp.variable(1, -1.0)
    f = x * x * y + y * y
    fx = f.pderiv(0)  # 2xy
    assert fx.const == 2 * 2.0 * -1.0
    assert fx.derivative((1, 0)) == 2 * -1.0
    low = f.truncated(1)
    assert low.space.max_degree == 1
    assert low.const == f.const
    assert low.coefficient((1, 0)) == f.coefficient((1, 0))


def test_poly_eval_general_matches_manual():
    rng = SplitMix64(9)
    sp = space(3, 3)
    for _ in range(20):
        p = random_poly(rng, 3, 3)
        t = as_taylor(p, sp)
        offs = [rng.uniform(-0.5, 0.5) for _ in range(3)]
        manual = sum(c * offs[0] ** m[0] * offs[1] ** m[1] * offs[2] ** m[2]
                     for m, c in p.items())
        assert abs(t.poly_eval(offs) - manual) < 1e-13


def test_poly_eval_seed_fast_path_matches_general():
    # composing onto pure unit seeds must equal the slow monomial path
    rng = SplitMix64(13)
    inner = space(3, 3)
    outer = space(2, 2)
    t = as_taylor(random_poly(rng, 3, 3, nterms=10), inner)
    seed0 = outer.variable(0, 0.0)
    seed1 = outer.variable(1, 0.0)
    offs = [seed1, 0.0, seed0]
    fast = t.poly_eval(offs)
    # force general path by adding a zero-valued non-seed offset
    wiggle = [seed1 * 1.0, outer.constant(0.0) * 0.0 + 0.0, seed0 + (seed0 * seed0) * 0]
    general = 0.0
    for idx, m in enumerate(inner.monomials):
        c = t.coeffs[idx]
        if c == 0.0:
            continue
        term = c
        for var, e in enumerate(m):
            for _ in range(e):
                term = term * offs[var]
        general = general + term
    assert np.max(np.abs(fast.coeffs - general.coeffs)) < 1e-13


def test_watch_denominators():
    sp = space(1, 2)
    x = sp.variable(0, 0.25)
    with watch_denominators() as rec:
        _ = 1.0 / (x + 0.15)  # denominator constant 0.4
        _ = x.sqrt()          # base 0.25
    assert rec[0] == pytest.approx(0.25)
