import numpy as np
import pytest

from edskit.jets import JetPoint, ScalarField, as_env
from edskit.prolong import (Generator, apply_generator, flow_step, prolong,
                            zero_generator)
from edskit.jets import constant_field
from edskit.sampling import SplitMix64


def cross(a, b):
    return [a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0]]


def dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def rotation_generator(n):
    xi = tuple(ScalarField(0, (lambda env, a=a: cross(n, env["x"])[a])) for a in range(3))
    return Generator(tau=constant_field(0.0), xi=xi, name="rotation")


def boost_generator(qv):
    tau = ScalarField(0, lambda env: -dot(qv, env["x"]))
    xi = tuple(ScalarField(0, (lambda env, a=a: env["t"] * qv[a])) for a in range(3))
    return Generator(tau=tau, xi=xi, name="boost")


def time_translation(q=3):
    return Generator(tau=constant_field(1.0),
                     xi=tuple(constant_field(0.0) for _ in range(q)),
                     name="time-translation")


def random_point(rng, q=3):
    return JetPoint(t=rng.uniform(-1, 1), x=rng.uniform_vec(q, -1, 1),
                    v=rng.uniform_vec(q, -1, 1), vp=rng.uniform_vec(q, -1, 1),
                    vpp=rng.uniform_vec(q, -1, 1))


def test_rotation_prolongation_exact():
    rng = SplitMix64(2024)
    n = [0.3, -1.1, 0.7]
    pg = prolong(rotation_generator(n), 3)
    for _ in range(100):
        p = random_point(rng)
        env = as_env(p)
        _, _, levels, _ = pg.coefficient_values(env)
        for got, want in ((levels[0], cross(n, p.v)),
                          (levels[1], cross(n, p.vp)),
                          (levels[2], cross(n, p.vpp))):
            for a in range(3):
                assert got[a] == pytest.approx(want[a], abs=1e-14)


def test_boost_prolongation_exact():
    rng = SplitMix64(55)
    qv = [0.9, 0.2, -0.5]
    pg = prolong(boost_generator(qv), 3)
    for _ in range(100):
        p = random_point(rng)
        env = as_env(p)
        _, _, levels, _ = pg.coefficient_values(env)
        v, vp, vpp = list(p.v), list(p.vp), list(p.vpp)
        l1 = [qv[a] + dot(qv, v) * v[a] for a in range(3)]
        l2 = [2 * dot(qv, v) * vp[a] + dot(qv, vp) * v[a] for a in range(3)]
        l3 = [3 * dot(qv, v) * vpp[a] + 3 * dot(qv, vp) * vp[a] + dot(qv, vpp) * v[a]
              for a in range(3)]
        for got, want in ((levels[0], l1), (levels[1], l2), (levels[2], l3)):
            for a in range(3):
                assert got[a] == pytest.approx(want[a], abs=1e-13)


def test_time_translation_and_zero_prolong_to_zero():
    rng = SplitMix64(1)
    for gen in (time_translation(), zero_generator(3)):
        pg = prolong(gen, 3)
        p = random_point(rng)
        _, _, levels, _ = pg.coefficient_values(as_env(p))
        assert all(abs(c) == 0.0 for level in levels for c in level)


def test_apply_generator_on_coordinate():
    n = [0.0, 0.0, 1.0]
    pg = prolong(rotation_generator(n), 3)
    p = JetPoint(t=0.0, x=(0.0, 1.0, 0.0), v=(0.1, 0.2, 0.3))
    f = ScalarField(0, lambda env: env["x"][0], name="x1")
    want = cross(n, list(p.x))[0]
    assert apply_generator(pg, f, p) == pytest.approx(want, abs=1e-14)


def test_apply_generator_zero_and_autonomous():
    rng = SplitMix64(9)
    p = random_point(rng)
    f = ScalarField(2, lambda env: env["x"][0] * env["vp"][1] + env["v"][2] ** 2)
    assert apply_generator(prolong(zero_generator(3), 3), f, p) == 0.0
    assert apply_generator(prolong(time_translation(), 3), f, p) == pytest.approx(0.0, abs=1e-14)


def test_flow_step_time_translation():
    p = JetPoint(t=1.0, x=(0.5, -0.25, 0.0), v=(1.0, 2.0, 3.0),
                 vp=(0.1, 0.2, 0.3), vpp=(4.0, 5.0, 6.0))
    newp, jac = flow_step(prolong(time_translation(), 3), p, 0.125)
    assert newp.t == pytest.approx(1.125)
    assert newp.x == p.x and newp.v == p.v and newp.vp == p.vp and newp.vpp == p.vpp
    assert np.allclose(jac, np.eye(13), atol=1e-14)


def test_flow_step_rotation_preserves_norm():
    n = [0.0, 0.0, 1.0]
    pg = prolong(rotation_generator(n), 3)
    p = JetPoint(t=0.0, x=(1.0, 0.0, 0.0), v=(0.0, 1.0, 0.0), vp=(1.0, 1.0, 0.0))
    h = 1e-2
    newp, _ = flow_step(pg, p, h)
    for old, new in ((p.x, newp.x), (p.v, newp.v), (p.vp, newp.vp)):
        assert dot(new, new) == pytest.approx(dot(old, old), abs=10 * h ** 5)
    # x rotates by angle h around axis 3
    assert newp.x[0] == pytest.approx(np.cos(h), abs=h ** 5)
    assert newp.x[1] == pytest.approx(np.sin(h), abs=h ** 5)


def test_flow_jacobian_matches_finite_differences():
    rng = SplitMix64(31415)
    qv = [0.4, -0.3, 0.8]
    n = [0.2, 0.5, -0.1]
    gen = Generator(tau=boost_generator(qv).tau,
                    xi=tuple(ScalarField(0, (lambda env, a=a: env["t"] * qv[a]
                                             + cross(n, env["x"])[a]))
                             for a in range(3)))
    pg = prolong(gen, 3)
    p = random_point(rng)
    eps = 0.05
    _, jac = flow_step(pg, p, eps)
    names = ["t"] + [f"x{i}" for i in "123"] + [f"v{i}" for i in "123"] \
        + [f"vp{i}" for i in "123"] + [f"vpp{i}" for i in "123"]
    h = 1e-5
    for col, nm in enumerate(names):
        def shift(delta):
            kw = dict(t=p.t, x=list(p.x), v=list(p.v), vp=list(p.vp), vpp=list(p.vpp))
            if nm == "t":
                kw["t"] += delta
            else:
                slot = nm.rstrip("0123456789")
                kw[slot][int(nm[len(slot):]) - 1] += delta
            moved, _ = flow_step(pg, JetPoint(**kw), eps)
            return np.array([moved.t, *moved.x, *moved.v, *moved.vp, *moved.vpp])
        fd = (shift(h) - shift(-h)) / (2 * h)
        err = np.abs(jac[:, col] - fd)
        assert np.max(err / np.maximum(1.0, np.abs(fd))) < 1e-6


def test_flow_first_order_matches_apply_generator():
    # (flow(h) - flow(-h)) / 2h on coordinates equals the generator coefficients
    rng = SplitMix64(7)
    qv = [0.6, 0.1, -0.2]
    pg = prolong(boost_generator(qv), 3)
    p = random_point(rng)
    h = 1e-4
    plus, _ = flow_step(pg, p, h)
    minus, _ = flow_step(pg, p, -h)
    fd_v = [(a - b) / (2 * h) for a, b in zip(plus.v, minus.v)]
    _, _, levels, _ = pg.coefficient_values(as_env(p))
    for a in range(3):
        assert fd_v[a] == pytest.approx(levels[0][a], rel=1e-6, abs=1e-8)
