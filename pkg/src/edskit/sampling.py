"""Deterministic sampling: a splitmix64 PRNG and jet-point samplers.

All randomness in reports flows from one seeded 64-bit splitmix generator so
that independent implementations can reproduce sample sets exactly.  The
update is the standard one:

    state += 0x9E3779B97F4A7C15
    z = state; z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31

Doubles are drawn as (z >> 11) * 2^-53 in [0, 1).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .errors import DomainError, EvaluationError
from .jets import JetPoint
from .taylor import watch_denominators

_MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return (z ^ (z >> 31)) & _MASK

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        u = (self.next_u64() >> 11) * 2.0 ** -53
        return lo + (hi - lo) * u

    def uniform_vec(self, n: int, lo: float, hi: float) -> list[float]:
        return [self.uniform(lo, hi) for _ in range(n)]


@dataclass(frozen=True)
class DomainBox:
    """Sampling box for jet coordinates; denominators below the threshold
    reject the draw (model singular sets are measure zero but real)."""

    t: tuple[float, float] = (-1.0, 1.0)
    x: tuple[float, float] = (-1.0, 1.0)
    v: tuple[float, float] = (-0.8, 0.8)
    vp: tuple[float, float] = (-1.0, 1.0)
    vpp: tuple[float, float] = (-1.0, 1.0)
    min_denominator: float = 0.1


@dataclass(frozen=True)
class SampleSpec:
    count: int
    seed: int
    box: DomainBox = field(default_factory=DomainBox)

    def describe(self) -> dict:
        return {"count": self.count, "seed": self.seed,
                "box": {"t": list(self.box.t), "x": list(self.box.x),
                        "v": list(self.box.v), "vp": list(self.box.vp),
                        "vpp": list(self.box.vpp),
                        "min_denominator": self.box.min_denominator}}

    def with_count(self, count: int) -> "SampleSpec":
        return replace(self, count=count)


def draw_point(rng: SplitMix64, q: int, box: DomainBox, params: dict,
               order: int = 1) -> JetPoint:
    t = rng.uniform(*box.t)
    x = rng.uniform_vec(q, *box.x)
    v = rng.uniform_vec(q, *box.v) if order >= 1 else [0.0] * q
    vp = rng.uniform_vec(q, *box.vp) if order >= 2 else [0.0] * q
    vpp = rng.uniform_vec(q, *box.vpp) if order >= 3 else [0.0] * q
    return JetPoint(t=t, x=x, v=v, vp=vp, vpp=vpp, params=dict(params))


def sample_points(spec: SampleSpec, q: int, params: dict, order: int = 1,
                  probe=None, max_tries_factor: int = 200) -> list[JetPoint]:
    """Draw admissible points: `probe(point)` is evaluated under a
    denominator watch and the draw is rejected on evaluation errors, on
    nonfinite output, or when any denominator constant falls below the box
    threshold."""
    rng = SplitMix64(spec.seed)
    out: list[JetPoint] = []
    tries = 0
    budget = max(spec.count, 1) * max_tries_factor
    while len(out) < spec.count:
        if tries >= budget:
            raise DomainError(
                f"could not draw {spec.count} admissible samples "
                f"in {budget} tries (got {len(out)})")
        tries += 1
        point = draw_point(rng, q, spec.box, params, order)
        if probe is not None:
            try:
                with watch_denominators() as rec:
                    vals = probe(point)
            except EvaluationError:
                continue
            if rec[0] < spec.box.min_denominator:
                continue
            if vals is not None and any(not math.isfinite(v) for v in vals):
                continue
        out.append(point)
    return out


def worker_count() -> int:
    """Worker cap from EDSKIT_THREADS; defaults to serial evaluation."""
    raw = os.environ.get("EDSKIT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Order-preserving map over sample batches honoring EDSKIT_THREADS."""
    workers = worker_count()
    items = list(items)
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
