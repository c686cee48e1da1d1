import math

import pytest

from edskit.errors import ConfigurationError, EvaluationError
from edskit.jets import (Expansion, JetPoint, ScalarField, as_env, lift_env,
                         partials, taylor_eval, total_derivative)
from edskit.sampling import SplitMix64, DomainBox, SampleSpec, sample_points
from edskit.taylor import TaylorScalar, sqrt_g


def field_x(a):
    return ScalarField(0, lambda env: env["x"][a], name=f"x{a+1}")


def field_v(a):
    return ScalarField(1, lambda env: env["v"][a], name=f"v{a+1}")


def random_point(rng, q=2):
    return JetPoint(t=rng.uniform(-1, 1), x=rng.uniform_vec(q, -1, 1),
                    v=rng.uniform_vec(q, -1, 1), vp=rng.uniform_vec(q, -1, 1),
                    vpp=rng.uniform_vec(q, -1, 1))


def test_jetpoint_validation():
    with pytest.raises(ConfigurationError):
        JetPoint(t=0.0, x=())
    with pytest.raises(EvaluationError):
        JetPoint(t=float("nan"), x=(1.0,))
    p = JetPoint(t=0.0, x=(1.0, 2.0))
    assert p.v == (0.0, 0.0) and p.q == 2


def test_total_derivative_of_coordinates():
    p = JetPoint(t=2.0, x=(3.0, -1.0), v=(5.0, 0.5), vp=(7.0, -2.0))
    for a in range(2):
        assert total_derivative(field_x(a))(as_env(p)) == pytest.approx(p.v[a])
        assert total_derivative(field_v(a))(as_env(p)) == pytest.approx(p.vp[a])


def test_total_derivative_product_example():
    # f = t*x1 at (t=2, x1=3, v1=5): D f = x1 + t v1 = 13
    f = ScalarField(0, lambda env: env["t"] * env["x"][0])
    p = JetPoint(t=2.0, x=(3.0,), v=(5.0,))
    assert total_derivative(f)(as_env(p)) == pytest.approx(13.0)


def test_total_derivative_leibniz():
    rng = SplitMix64(3)
    f = ScalarField(1, lambda env: env["x"][0] * env["v"][1] + sqrt_g(env["v"][0] + 2.0))
    g = ScalarField(1, lambda env: env["t"] * env["x"][1] - env["v"][1] ** 2)
    fg = ScalarField(1, lambda env: f(env) * g(env))
    Df, Dg, Dfg = total_derivative(f), total_derivative(g), total_derivative(fg)
    for _ in range(25):
        env = as_env(random_point(rng))
        lhs = Dfg(env)
        rhs = f(env) * Dg(env) + g(env) * Df(env)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_total_derivative_raises_jet_order():
    f = field_v(0)
    Df = total_derivative(f)
    assert Df.order == 2
    DDf = total_derivative(Df)
    assert DDf.order == 3
    with pytest.raises(ConfigurationError):
        total_derivative(DDf)
    p = JetPoint(t=0.0, x=(0.0,), v=(1.0,), vp=(2.0,), vpp=(3.0,))
    assert DDf(as_env(p)) == pytest.approx(3.0)


def test_partials_match_finite_differences():
    rng = SplitMix64(17)
    f = ScalarField(3, lambda env: (env["x"][0] * env["vp"][1]
                                    + sqrt_g(2.0 + env["v"][0]) * env["vpp"][0]
                                    - env["t"] ** 3))
    names = ["t", "x1", "v1", "vp2", "vpp1"]
    h = 1e-5
    for _ in range(40):
        p = random_point(rng)
        grads = partials(f, p, names)
        env = as_env(p)
        for nm in names:
            def shifted(delta):
                e = as_env(p)
                if nm == "t":
                    e["t"] += delta
                else:
                    slot, idx = nm.rstrip("0123456789"), int(nm[len(nm.rstrip("0123456789")):]) - 1
                    e[slot][idx] += delta
                return f(e)
            fd = (shifted(h) - shifted(-h)) / (2 * h)
            assert abs(grads[nm] - fd) <= 1e-6 * max(1.0, abs(fd), abs(grads[nm]))


def test_taylor_eval_degree0_matches_plain():
    f = ScalarField(1, lambda env: env["x"][0] ** 2 - env["v"][1] * 3.0)
    p = JetPoint(t=0.5, x=(1.25, -0.5), v=(2.0, 0.25))
    plain = f(as_env(p))
    lifted, _, _ = taylor_eval(f, p, 2, ["x1", "v2"])
    assert lifted.const == plain


def test_expansion_composes_onto_taylor_env():
    # Oracle: the field is a closure, so direct arithmetic on the Taylor env
    # is exact; the Expansion path must agree coefficient-by-coefficient.
    f = ScalarField(1, lambda env: env["x"][0] ** 3 * env["v"][0]
                    + env["x"][1] * env["v"][0] ** 2)
    p = JetPoint(t=0.0, x=(1.2, -0.7), v=(0.4, 0.9))
    env, sp, idx = lift_env(p, 3, ["x1", "v1"])
    direct = f(env)
    exp = Expansion(f.fn, env, ["x2"], 1)
    # value recomposed at the Taylor env equals direct evaluation
    val = exp.value()
    assert isinstance(val, TaylorScalar)
    for i in range(sp.size):
        assert val.coeffs[i] == pytest.approx(direct.coeffs[i], abs=1e-13)
    # partial wrt x2 of f is v1^2, a Taylor quantity in the outer env
    px2 = exp.partial("x2")
    want = env["v"][0] ** 2
    for i in range(sp.size):
        assert px2.coeffs[i] == pytest.approx(want.coeffs[i], abs=1e-13)


def test_sample_points_deterministic_and_admissible():
    spec = SampleSpec(count=20, seed=42, box=DomainBox(min_denominator=0.3))
    probe = lambda point: [1.0 / (point.x[0] + 1.501)]  # rejects x1 near -1.501+0.3
    pts1 = sample_points(spec, q=2, params={"m": 1.0}, order=2, probe=probe)
    pts2 = sample_points(spec, q=2, params={"m": 1.0}, order=2, probe=probe)
    assert [p.x for p in pts1] == [p.x for p in pts2]
    assert all(abs(p.x[0] + 1.501) >= 0.3 for p in pts1)
    assert all(p.params["m"] == 1.0 for p in pts1)
    assert all(p.vpp == (0.0, 0.0) for p in pts1)  # order 2: no vpp draw
