"""Jet-space points, scalar fields, lifts, and total derivatives.

Coordinates of the order-3 jet space of curves t -> x(t) in R^q are named
``t, x1..xq, v1..vq, vp1..vpq, vpp1..vppq``; external parameters keep their
declared names.  Fields evaluate on an *environment*: a dict with keys
``t`` (scalar), ``x``/``v``/``vp``/``vpp`` (lists) and one entry per
parameter.  Every entry is either a plain float or a TaylorScalar, and all
field evaluation code is generic over the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigurationError, EvaluationError
from .taylor import TaylorScalar, constant_part, space

JET_SLOTS = ("x", "v", "vp", "vpp")  # jet orders 0,1,2,3 beyond t


def slot_of(order: int) -> str:
    return JET_SLOTS[order]


def coord_name(slot: str, index: int) -> str:
    return f"{slot}{index + 1}"


@dataclass(frozen=True)
class JetPoint:
    """A point of the order-3 jet space plus external parameters.

    Slots beyond a field's declared jet order are simply never read by that
    field's evaluation rule.
    """

    t: float
    x: tuple[float, ...]
    v: tuple[float, ...] = ()
    vp: tuple[float, ...] = ()
    vpp: tuple[float, ...] = ()
    params: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        q = len(self.x)
        if q < 1:
            raise ConfigurationError("JetPoint needs base dimension q >= 1")
        object.__setattr__(self, "x", tuple(float(c) for c in self.x))
        for name in ("v", "vp", "vpp"):
            vals = tuple(float(c) for c in getattr(self, name))
            if not vals:
                vals = (0.0,) * q
            if len(vals) != q:
                raise ConfigurationError(f"slot {name} has length {len(vals)}, expected {q}")
            object.__setattr__(self, name, vals)
        object.__setattr__(self, "t", float(self.t))
        for val in (self.t, *self.x, *self.v, *self.vp, *self.vpp, *self.params.values()):
            if not math.isfinite(val):
                raise EvaluationError("JetPoint has nonfinite entries")

    @property
    def q(self) -> int:
        return len(self.x)


def as_env(point: JetPoint) -> dict:
    env = {"t": point.t, "x": list(point.x), "v": list(point.v),
           "vp": list(point.vp), "vpp": list(point.vpp)}
    env.update(point.params)
    return env


def env_to_point(env: dict) -> JetPoint:
    q = len(env["x"])
    params = {k: constant_part(v) for k, v in env.items()
              if k not in ("t", "x", "v", "vp", "vpp")}
    grab = lambda key: tuple(constant_part(c) for c in env[key])
    return JetPoint(t=constant_part(env["t"]), x=grab("x"), v=grab("v"),
                    vp=grab("vp"), vpp=grab("vpp"), params=params)


def _set_env_entry(env: dict, name: str, value) -> None:
    if name == "t":
        env["t"] = value
        return
    for slot in JET_SLOTS:
        if name.startswith(slot) and name[len(slot):].isdigit():
            idx = int(name[len(slot):]) - 1
            seq = env[slot]
            if 0 <= idx < len(seq):
                seq[idx] = value
                return
            raise ConfigurationError(f"coordinate {name} out of range")
    env[name] = value


def _get_env_entry(env: dict, name: str):
    if name == "t":
        return env["t"]
    for slot in JET_SLOTS:
        if name.startswith(slot) and name[len(slot):].isdigit():
            idx = int(name[len(slot):]) - 1
            seq = env[slot]
            if 0 <= idx < len(seq):
                return seq[idx]
            raise ConfigurationError(f"coordinate {name} out of range")
    if name in env:
        return env[name]
    raise ConfigurationError(f"unknown coordinate or parameter {name!r}")


def seed_signature(val):
    """Hashable signature of a plain number or a standard seed lift.

    Returns None for Taylor values that are not pure unit seeds (those come
    from flow stages and are not worth memoizing).
    """
    if not isinstance(val, TaylorScalar):
        return float(val)
    import numpy as np
    nz = np.nonzero(val.coeffs)[0]
    rest = nz[nz != 0]
    if len(rest) == 0:
        return (val.const, id(val.space), None)
    if (len(rest) == 1 and 1 <= rest[0] <= val.space.num_vars
            and val.coeffs[rest[0]] == 1.0):
        return (val.const, id(val.space), int(rest[0]))
    return None


def env_cache_key(env: dict):
    """Key for memoizing field evaluations per environment; None when the
    environment contains non-seed Taylor entries."""
    parts = [seed_signature(env["t"])]
    for slot in JET_SLOTS:
        for val in env[slot]:
            parts.append(seed_signature(val))
        parts.append(";")
    for key in sorted(env):
        if key in ("t", "x", "v", "vp", "vpp"):
            continue
        parts.append(key)
        parts.append(seed_signature(env[key]))
    if any(p is None for p in parts):
        return None
    return tuple(parts)


class EnvMemo:
    """Small bounded memo for per-environment evaluation results."""

    def __init__(self, cap: int = 4096):
        self._data: dict = {}
        self._cap = cap

    def get(self, key):
        return self._data.get(key)

    def put(self, key, value):
        if len(self._data) >= self._cap:
            self._data.clear()
        self._data[key] = value
        return value


def jet_coordinate_names(q: int, order: int = 3, with_t: bool = True) -> list[str]:
    names = ["t"] if with_t else []
    for j in range(order + 1):
        names.extend(coord_name(JET_SLOTS[j], a) for a in range(q))
    return names


def lift_env(point_or_env, degree: int, active: list[str]):
    """Seed the named coordinates with degree-`degree` Taylor variables.

    Returns (env, space, index map name -> variable slot).  Inactive entries
    stay plain floats.
    """
    if isinstance(point_or_env, JetPoint):
        env = as_env(point_or_env)
    else:
        env = {k: (list(v) if isinstance(v, list) else v)
               for k, v in point_or_env.items()}
    active = list(active)
    sp = space(len(active), degree)
    index = {}
    for i, name in enumerate(active):
        base = constant_part(_get_env_entry(env, name))
        _set_env_entry(env, name, sp.variable(i, base))
        index[name] = i
    return env, sp, index


class ScalarField:
    """A pure scalar function of jet coordinates and parameters.

    ``order`` is the highest jet slot the evaluation rule reads (0: t,x;
    1: +v; 2: +vp; 3: +vpp).  The rule must be generic over plain floats and
    TaylorScalars.
    """

    __slots__ = ("order", "fn", "name")

    def __init__(self, order: int, fn, name: str = ""):
        if not 0 <= order <= 3:
            raise ConfigurationError(f"jet order {order} outside 0..3")
        self.order = order
        self.fn = fn
        self.name = name

    def __call__(self, env: dict):
        return self.fn(env)

    def __repr__(self):
        return f"ScalarField(order={self.order}, name={self.name!r})"


def constant_field(value: float) -> ScalarField:
    return ScalarField(0, lambda env, _v=float(value): _v, name=repr(value))


def _moving_names(env: dict) -> list[str]:
    names = []
    if isinstance(env["t"], TaylorScalar):
        names.append("t")
    for slot in JET_SLOTS:
        for i, val in enumerate(env[slot]):
            if isinstance(val, TaylorScalar):
                names.append(coord_name(slot, i))
    for key, val in env.items():
        if key in ("t", "x", "v", "vp", "vpp"):
            continue
        if isinstance(val, TaylorScalar):
            names.append(key)
    return names


def _outer_degree(env: dict) -> int:
    deg = 0
    for slot in JET_SLOTS:
        for val in env[slot]:
            if isinstance(val, TaylorScalar):
                deg = max(deg, val.space.max_degree)
    for key, val in env.items():
        if key in JET_SLOTS:
            continue
        if isinstance(val, TaylorScalar):
            deg = max(deg, val.space.max_degree)
    return deg


class Expansion:
    """Taylor data of a field around the constant part of an environment.

    Partials requested through :meth:`partial` are exact to the declared
    ``order`` and are recomposed onto any Taylor-valued entries of the
    original environment, so differentiating a field inside another
    derivative never nests automatic differentiation.
    """

    def __init__(self, fn, env: dict, names: list[str], order: int):
        moving = _moving_names(env)
        lift_names = list(dict.fromkeys(list(names) + moving))
        degree = order + _outer_degree(env)
        inner_env, sp, index = lift_env(_const_env(env), degree, lift_names)
        self.space = sp
        self.index = index
        self.value_series = fn(inner_env)
        self.deltas = []
        for name in lift_names:
            val = _get_env_entry(env, name)
            if isinstance(val, TaylorScalar):
                self.deltas.append(val - val.const)
            else:
                self.deltas.append(0.0)
        self._partials: dict[tuple, object] = {}

    def _series(self, names: tuple):
        cur = self.value_series
        if not isinstance(cur, TaylorScalar):
            return None  # constant field
        for nm in names:
            cur = cur.pderiv(self.index[nm])
        return cur

    def partial(self, *names: str):
        key = tuple(sorted(names))
        if key not in self._partials:
            series = self._series(key)
            if series is None:
                self._partials[key] = 0.0 if names else float(self.value_series)
            else:
                self._partials[key] = series.poly_eval(self.deltas)
        return self._partials[key]

    def value(self):
        return self.partial()


def _const_env(env: dict) -> dict:
    out = {"t": constant_part(env["t"])}
    for slot in JET_SLOTS:
        out[slot] = [constant_part(c) for c in env[slot]]
    for key, val in env.items():
        if key in ("t", "x", "v", "vp", "vpp"):
            continue
        out[key] = constant_part(val)
    return out


def taylor_eval(f: ScalarField, point: JetPoint, degree: int, active: list[str]):
    """Evaluate a field with the named coordinates lifted to TaylorScalars."""
    env, sp, index = lift_env(point, degree, active)
    return f(env), sp, index


def partials(f: ScalarField, point: JetPoint, names: list[str]) -> dict[str, float]:
    """First partial derivatives of f at a plain point, by a degree-1 lift."""
    value, sp, index = taylor_eval(f, point, 1, list(names))
    out = {}
    for name in names:
        if isinstance(value, TaylorScalar):
            multi = [0] * sp.num_vars
            multi[index[name]] = 1
            out[name] = value.derivative(tuple(multi))
        else:
            out[name] = 0.0
    return out


def total_derivative(f: ScalarField) -> ScalarField:
    """The total derivative D f along the jet structure.

    For a field of jet order k the result reads order k+1:
    D f = d_t f + sum_j v^(j+1) . d_{v^(j)} f.  Fields of order 3 cannot be
    advanced (no fourth-order slot exists).
    """
    if f.order >= 3:
        raise ConfigurationError("total derivative of an order-3 field needs a v''' slot")
    k = f.order

    def fn(env):
        q = len(env["x"])
        names = jet_coordinate_names(q, k)
        exp = Expansion(f.fn, env, names, 1)
        out = exp.partial("t")
        for j in range(k + 1):
            nxt = env[JET_SLOTS[j + 1]]
            for a in range(q):
                out = out + nxt[a] * exp.partial(coord_name(JET_SLOTS[j], a))
        return out

    return ScalarField(k + 1, fn, name=f"D({f.name})" if f.name else "D(f)")
