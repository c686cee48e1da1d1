"""Point-transformation generators, their jet prolongations, and flows.

A generator is a vector field  tau(t,x) d_t + xi^a(t,x) d_{x^a}  optionally
extended by an action on external parameters.  Its prolongation to jet order
k carries one coefficient vector per derivative level, built by the
recursion

    phi^(1) = D xi - v D tau,     phi^(j+1) = D phi^(j) - v^(j+1) D tau,

which unfolds into closed total-derivative forms of tau and xi:

    phi^(1)a = D xi^a - v^a D tau
    phi^(2)a = D^2 xi^a - v^a D^2 tau - 2 v'^a D tau
    phi^(3)a = D^3 xi^a - v^a D^3 tau - 3 v'^a D^2 tau - 3 v''^a D tau

with D^n f of an (t,x)-function expanded through its mixed partials and the
jet coordinates.  Coefficients evaluate on Taylor-valued environments, so
flows can run with seeded coordinates to produce exact step Jacobians.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, FlowDivergenceError
from .jets import (JET_SLOTS, Expansion, JetPoint, ScalarField, as_env,
                   constant_field, coord_name, env_to_point,
                   jet_coordinate_names, lift_env)
from .taylor import TaylorScalar, constant_part

MAX_PROLONGATION_ORDER = 3


@dataclass(frozen=True)
class Generator:
    """Infinitesimal point transformation with optional parameter action.

    tau and the xi components may read t, x, and parameters only; never jet
    coordinates.
    """

    tau: ScalarField
    xi: tuple[ScalarField, ...]
    param_action: dict[str, ScalarField] = field(default_factory=dict)
    name: str = ""

    @property
    def q(self) -> int:
        return len(self.xi)


def zero_generator(q: int) -> Generator:
    return Generator(tau=constant_field(0.0),
                     xi=tuple(constant_field(0.0) for _ in range(q)),
                     name="zero")


def _base_names(q: int) -> list[str]:
    return ["t"] + [coord_name("x", a) for a in range(q)]


class _BaseExpansion:
    """Total derivatives D^n f at an environment for an (t,x)-function f."""

    def __init__(self, fld: ScalarField, env: dict, q: int, order: int):
        self.exp = Expansion(fld.fn, env, _base_names(q), order)
        self.q = q
        self.env = env

    def total(self, n: int):
        e, env, q = self.exp, self.env, self.q
        x = [coord_name("x", a) for a in range(q)]
        v, vp, vpp = env["v"], env["vp"], env["vpp"]
        if n == 1:
            out = e.partial("t")
            for a in range(q):
                out = out + v[a] * e.partial(x[a])
            return out
        if n == 2:
            out = e.partial("t", "t")
            for a in range(q):
                out = out + 2.0 * v[a] * e.partial("t", x[a]) + vp[a] * e.partial(x[a])
                for b in range(q):
                    out = out + v[a] * v[b] * e.partial(x[a], x[b])
            return out
        if n == 3:
            out = e.partial("t", "t", "t")
            for a in range(q):
                out = (out + 3.0 * v[a] * e.partial("t", "t", x[a])
                       + vpp[a] * e.partial(x[a]))
                inner = e.partial("t", x[a])
                for b in range(q):
                    out = out + 3.0 * v[a] * v[b] * e.partial("t", x[a], x[b])
                    inner = inner + v[b] * e.partial(x[a], x[b])
                    for c in range(q):
                        out = out + v[a] * v[b] * v[c] * e.partial(x[a], x[b], x[c])
                out = out + 3.0 * vp[a] * inner
            return out
        raise ConfigurationError(f"total derivative order {n} not supported")


def prolongation_coefficients(gen: Generator, env: dict, order: int) -> list[list]:
    """Values of the level-1..order coefficients at the environment."""
    if order < 1 or order > MAX_PROLONGATION_ORDER:
        raise ConfigurationError(
            f"prolongation order {order} outside 1..{MAX_PROLONGATION_ORDER}")
    q = gen.q
    tau = _BaseExpansion(gen.tau, env, q, order)
    xis = [_BaseExpansion(gen.xi[a], env, q, order) for a in range(q)]
    dtau = [tau.total(n) for n in range(1, order + 1)]
    v, vp, vpp = env["v"], env["vp"], env["vpp"]
    coeffs = []
    for j in range(1, order + 1):
        level = []
        for a in range(q):
            val = xis[a].total(j)
            if j >= 1:
                val = val - v[a] * dtau[j - 1]
            if j >= 2:
                val = val - float(j) * vp[a] * dtau[j - 2]
            if j >= 3:
                val = val - 3.0 * vpp[a] * dtau[j - 3]
            level.append(val)
        coeffs.append(level)
    return coeffs


class ProlongedGenerator:
    """A generator with its prolongation coefficients up to `order`."""

    def __init__(self, base: Generator, order: int):
        if order < 1 or order > MAX_PROLONGATION_ORDER:
            raise ConfigurationError(
                f"prolongation order {order} outside 1..{MAX_PROLONGATION_ORDER}")
        self.base = base
        self.order = order
        self.coeffs = [
            [ScalarField(j, self._coeff_fn(j, a), name=f"phi{j}[{a}]")
             for a in range(base.q)]
            for j in range(1, order + 1)
        ]

    def _coeff_fn(self, j: int, a: int):
        def fn(env):
            return prolongation_coefficients(self.base, env, j)[j - 1][a]
        return fn

    @property
    def q(self) -> int:
        return self.base.q

    def coefficient_values(self, env: dict):
        """tau, xi, and all level coefficients in one pass."""
        tau = self.base.tau(env)
        xi = [f(env) for f in self.base.xi]
        levels = prolongation_coefficients(self.base, env, self.order)
        params = {name: fld(env) for name, fld in self.base.param_action.items()}
        return tau, xi, levels, params


def prolong(gen: Generator, order: int) -> ProlongedGenerator:
    return ProlongedGenerator(gen, order)


def apply_generator(pg: ProlongedGenerator, f: ScalarField, point: JetPoint) -> float:
    """Directional derivative of f along the prolonged generator at a point,
    including the parameter action."""
    if f.order > pg.order:
        raise ConfigurationError(
            f"field of jet order {f.order} needs prolongation order >= {f.order}")
    q = pg.q
    env = as_env(point)
    tau, xi, levels, pvals = pg.coefficient_values(env)
    names = jet_coordinate_names(q, f.order) + sorted(pg.base.param_action)
    lifted, sp, index = lift_env(point, 1, names)
    val = f(lifted)
    if not isinstance(val, TaylorScalar):
        return 0.0

    def d(name):
        multi = [0] * sp.num_vars
        multi[index[name]] = 1
        return val.derivative(tuple(multi))

    out = constant_part(tau) * d("t")
    for a in range(q):
        out += constant_part(xi[a]) * d(coord_name("x", a))
    for j in range(1, f.order + 1):
        for a in range(q):
            out += constant_part(levels[j - 1][a]) * d(coord_name(JET_SLOTS[j], a))
    for pname in pg.base.param_action:
        out += constant_part(pvals[pname]) * d(pname)
    return out


def _env_combine(base_env: dict, rates: list[dict], weights: list[float], q: int):
    """base + sum_i weights[i] * rates[i] on every coordinate and parameter."""
    out = {"t": base_env["t"] + sum(w * r["t"] for w, r in zip(weights, rates))}
    for slot in JET_SLOTS:
        out[slot] = [base_env[slot][a]
                     + sum(w * r[slot][a] for w, r in zip(weights, rates))
                     for a in range(q)]
    for key in base_env:
        if key in ("t", "x", "v", "vp", "vpp"):
            continue
        out[key] = base_env[key] + sum(w * r[key] for w, r in zip(weights, rates))
    return out


def _vector_field(pg: ProlongedGenerator, env: dict) -> dict:
    q = pg.q
    tau, xi, levels, pvals = pg.coefficient_values(env)
    rate = {"t": tau, "x": list(xi)}
    for j in range(1, 4):
        slot = JET_SLOTS[j]
        if j <= pg.order:
            rate[slot] = list(levels[j - 1])
        else:
            rate[slot] = [0.0] * q
    for key in env:
        if key in ("t", "x", "v", "vp", "vpp"):
            continue
        rate[key] = pvals.get(key, 0.0)
    return rate


def flow_step(pg: ProlongedGenerator, point: JetPoint, epsilon: float):
    """One classical 4th-order step along the prolonged generator.

    Returns (new point, Jacobian) where the Jacobian is the derivative of
    the step map with respect to the jet coordinates in the order
    (t, x*, v*, vp*, vpp*), obtained by running the same step on degree-1
    Taylor seeds.
    """
    q = pg.q
    names = jet_coordinate_names(q, 3)
    env, sp, index = lift_env(point, 1, names)

    k1 = _vector_field(pg, env)
    k2 = _vector_field(pg, _env_combine(env, [k1], [epsilon / 2.0], q))
    k3 = _vector_field(pg, _env_combine(env, [k2], [epsilon / 2.0], q))
    k4 = _vector_field(pg, _env_combine(env, [k3], [epsilon], q))
    w = epsilon / 6.0
    new_env = _env_combine(env, [k1, k2, k3, k4], [w, 2 * w, 2 * w, w], q)

    n = len(names)
    jac = np.zeros((n, n))
    for row, nm in enumerate(names):
        val = _read(new_env, nm)
        if isinstance(val, TaylorScalar):
            if not np.all(np.isfinite(val.coeffs)):
                raise FlowDivergenceError(f"nonfinite flow result in {nm}")
            for col, src in enumerate(names):
                multi = [0] * sp.num_vars
                multi[index[src]] = 1
                jac[row, col] = val.derivative(tuple(multi))
        else:
            if not np.isfinite(val):
                raise FlowDivergenceError(f"nonfinite flow result in {nm}")
            jac[row, row] = 1.0
    new_point = env_to_point(new_env)
    return new_point, jac


def _read(env: dict, name: str):
    if name == "t":
        return env["t"]
    slot = name.rstrip("0123456789")
    idx = int(name[len(slot):]) - 1
    return env[slot][idx]
