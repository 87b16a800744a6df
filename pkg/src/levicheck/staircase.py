"""Fat Cantor staircase construction and the Hartogs-type cap built on it.

The construction proceeds in four stages, each with an exact rational
backbone so the structural identities can be asserted without floating
point slack:

  * ``build_cantor`` produces the nested interval system ``I[n][i]`` with
    centered removed gaps ``J[n][i]`` of relative size ``alpha_{n+1}``.
  * ``staircase_f`` produces the piecewise affine iterate ``f_n`` that
    climbs from 0 to 1 on the kept intervals and is constant on gaps.
  * ``fat_F`` integrates ``f_N - t`` into a piecewise quadratic ``F`` with
    ``F(0) = F(1) = 0`` and ``F'' = -1`` on removed-gap interiors.
  * ``find_x0`` certifies a base point with a one-sided quadratic growth
    bound ``F(x0+s) >= F(x0) + s F'(x0) + L s^2`` for ``s >= 0``.

``hartogs_staircase`` then lifts ``F`` into a radially symmetric log cap
on the unit disc perturbed along a horizontal segment, and
``subharmonicity_scan`` classifies where the discrete Laplacian of that
cap goes positive.

All interval endpoints, breakpoints, and certified bounds are
``fractions.Fraction`` values; float views are provided for numerics.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from levicheck.fields import DiscField, ParameterError

__all__ = [
    "CantorSystem",
    "ConstructionError",
    "FatF",
    "HartogsDomain",
    "StaircaseIterates",
    "SubharmonicityScan",
    "X0Certificate",
    "build_cantor",
    "bump_window",
    "bump_window_second_derivative_sup",
    "default_alphas",
    "fat_F",
    "find_x0",
    "hartogs_ball_domain",
    "hartogs_staircase",
    "interval_distance",
    "staircase_f",
    "subharmonicity_scan",
    "superharmonic_mean_excess",
]


class ConstructionError(Exception):
    """A certified construction failed one of its verified inequalities."""


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ParameterError(f"non-finite parameter {x!r}")
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise ParameterError(f"cannot interpret {x!r} as an exact rational")


def _number_str(fr: Fraction) -> str:
    """Shortest exact decimal for a rational.

    Round-trip float repr when the value is exactly a float, full decimal
    expansion for other dyadic rationals, float approximation otherwise.
    """
    try:
        as_float = float(fr)
    except OverflowError:
        as_float = None
    if as_float is not None and Fraction(as_float) == fr:
        return repr(as_float)
    den = fr.denominator
    k = den.bit_length() - 1
    if den == 1 << k:
        num = fr.numerator * 5**k
        sign = "-" if num < 0 else ""
        digits = str(abs(num)).rjust(k + 1, "0")
        if k == 0:
            return sign + digits
        head, tail = digits[:-k], digits[-k:]
        return f"{sign}{head}.{tail}"
    return repr(float(fr))


def default_alphas(alpha1, count: int) -> tuple[Fraction, ...]:
    """Geometric gap-ratio schedule alpha_k = alpha1 * 4**(1-k)."""
    a1 = _as_fraction(alpha1)
    if not 0 < a1 < 1:
        raise ParameterError(f"alpha1 must lie in (0, 1), got {alpha1!r}")
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    return tuple(a1 * Fraction(1, 4) ** (k - 1) for k in range(1, count + 1))


@dataclass(frozen=True)
class CantorSystem:
    """Nested kept intervals I[n][i] and removed gaps J[n][i].

    ``levels[n]`` holds the 2**n kept intervals of generation ``n`` as
    (left, right) Fraction pairs in increasing order; ``gaps[n]`` holds the
    2**n open middle intervals removed from generation ``n`` to produce
    generation ``n+1``.  Index ``i`` is 0-based.
    """

    alphas: tuple[Fraction, ...]
    levels: tuple[tuple[tuple[Fraction, Fraction], ...], ...]
    gaps: tuple[tuple[tuple[Fraction, Fraction], ...], ...]

    @property
    def depth(self) -> int:
        return len(self.alphas)

    def interval(self, n: int, i: int) -> tuple[Fraction, Fraction]:
        return self.levels[n][i]

    def gap(self, n: int, i: int) -> tuple[Fraction, Fraction]:
        return self.gaps[n][i]

    def interval_length(self, n: int) -> Fraction:
        """Common length of every generation-n kept interval (exact)."""
        out = Fraction(1)
        for k in range(n):
            out *= (1 - self.alphas[k]) / 2
        return out

    def kept_measure(self, n: int) -> Fraction:
        """Total length of the generation-n kept union: prod_{k<=n}(1 - alpha_k)."""
        out = Fraction(1)
        for k in range(n):
            out *= 1 - self.alphas[k]
        return out

    def kept_union(self, n: int | None = None) -> list[tuple[float, float]]:
        n = self.depth if n is None else n
        return [(float(a), float(b)) for a, b in self.levels[n]]

    def to_json(self) -> str:
        payload = {
            "alphas": [_number_str(a) for a in self.alphas],
            "levels": [
                [[_number_str(a), _number_str(b)] for a, b in level]
                for level in self.levels
            ],
            "gaps": [
                [[_number_str(a), _number_str(b)] for a, b in level]
                for level in self.gaps
            ],
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def build_cantor(alphas: Sequence, depth: int | None = None) -> CantorSystem:
    """Build the nested interval system from gap ratios ``alphas``.

    Generation 0 is the single interval [0, 1].  To pass from generation n
    to n+1, each kept interval loses its centered open middle of relative
    length ``alphas[n]``.  Every ratio must lie in (0, 1); the kept
    measure is then exactly prod(1 - alpha_k) > 0 at every finite depth.
    """
    ratios = tuple(_as_fraction(a) for a in alphas)
    if depth is None:
        depth = len(ratios)
    if depth < 1:
        raise ParameterError(f"depth must be >= 1, got {depth}")
    if len(ratios) < depth:
        raise ParameterError(
            f"need at least {depth} gap ratios, got {len(ratios)}"
        )
    ratios = ratios[:depth]
    for a in ratios:
        if not 0 < a < 1:
            raise ParameterError(f"gap ratios must lie in (0, 1), got {a}")

    levels: list[tuple[tuple[Fraction, Fraction], ...]] = [((Fraction(0), Fraction(1)),)]
    gaps: list[tuple[tuple[Fraction, Fraction], ...]] = []
    for n in range(depth):
        a_n = ratios[n]
        gap_row: list[tuple[Fraction, Fraction]] = []
        next_row: list[tuple[Fraction, Fraction]] = []
        for left, right in levels[n]:
            center = (left + right) / 2
            half = a_n * (right - left) / 2
            g = (center - half, center + half)
            gap_row.append(g)
            next_row.append((left, g[0]))
            next_row.append((g[1], right))
        gaps.append(tuple(gap_row))
        levels.append(tuple(next_row))
    return CantorSystem(alphas=ratios, levels=tuple(levels), gaps=tuple(gaps))


@dataclass(frozen=True)
class StaircaseIterates:
    """Piecewise affine f_n with f_n(0) = 0, f_n(1) = 1.

    On kept interval I[n][i] the graph rises linearly from i * 2**-n to
    (i+1) * 2**-n with common slope ``slope``; between kept intervals it is
    constant.  ``xs``/``ys`` are the exact breakpoints in increasing x.
    """

    system: CantorSystem
    n: int
    xs: tuple[Fraction, ...]
    ys: tuple[Fraction, ...]
    slope: Fraction
    _xs_float: np.ndarray = field(repr=False, compare=False, default=None)
    _ys_float: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "_xs_float", np.array([float(x) for x in self.xs]))
        object.__setattr__(self, "_ys_float", np.array([float(y) for y in self.ys]))

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self._xs_float, self._ys_float)

    def value_exact(self, x) -> Fraction:
        x = _as_fraction(x)
        if x <= self.xs[0]:
            return self.ys[0]
        if x >= self.xs[-1]:
            return self.ys[-1]
        k = bisect_right(self.xs, x) - 1
        x0, x1 = self.xs[k], self.xs[k + 1]
        y0, y1 = self.ys[k], self.ys[k + 1]
        return y0 + (y1 - y0) * (x - x0) / (x1 - x0)

    def sup_distance(self, other: "StaircaseIterates") -> Fraction:
        """Exact sup norm of f_n - f_m (both piecewise affine)."""
        knots = sorted(set(self.xs) | set(other.xs))
        return max(abs(self.value_exact(t) - other.value_exact(t)) for t in knots)


def staircase_f(system: CantorSystem, n: int | None = None) -> StaircaseIterates:
    """Staircase iterate f_n for the given interval system."""
    n = system.depth if n is None else n
    if not 0 <= n <= system.depth:
        raise ParameterError(f"iterate order must lie in [0, {system.depth}], got {n}")
    xs: list[Fraction] = []
    ys: list[Fraction] = []
    step = Fraction(1, 2**n)
    for i, (a, b) in enumerate(system.levels[n]):
        xs.extend((a, b))
        ys.extend((i * step, (i + 1) * step))
    slope = step / system.interval_length(n)
    return StaircaseIterates(system=system, n=n, xs=tuple(xs), ys=tuple(ys), slope=slope)


@dataclass(frozen=True)
class FatF:
    """F(x) = integral_0^x (f_N(t) - t) dt, piecewise quadratic and exact.

    ``xs`` are the breakpoints of f_N; ``values`` the exact F there.  The
    limit staircase differs from f_N by at most 2**-N in sup norm, so the
    corresponding limit potential differs from this F by at most
    ``truncation_error`` = 2**(1-N).
    """

    iterates: StaircaseIterates
    xs: tuple[Fraction, ...]
    values: tuple[Fraction, ...]
    truncation_error: float
    _xs_float: np.ndarray = field(repr=False, compare=False, default=None)
    _ys_float: np.ndarray = field(repr=False, compare=False, default=None)
    _vals_float: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "_xs_float", np.array([float(x) for x in self.xs]))
        object.__setattr__(
            self, "_ys_float", np.array([float(y) for y in self.iterates.ys])
        )
        object.__setattr__(
            self, "_vals_float", np.array([float(v) for v in self.values])
        )

    @property
    def system(self) -> CantorSystem:
        return self.iterates.system

    def value_exact(self, x) -> Fraction:
        x = _as_fraction(x)
        if x <= 0 or x >= 1:
            return Fraction(0)
        k = bisect_right(self.xs, x) - 1
        xk = self.xs[k]
        fk = self.iterates.ys[k]
        fx = self.iterates.value_exact(x)
        return self.values[k] + ((fk - xk) + (fx - x)) * (x - xk) / 2

    def derivative_exact(self, x) -> Fraction:
        x = _as_fraction(x)
        if x <= 0 or x >= 1:
            return Fraction(0)
        return self.iterates.value_exact(x) - x

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self._xs_float, x, side="right") - 1, 0, len(self.xs) - 2)
        xk = self._xs_float[idx]
        fk = self._ys_float[idx]
        fx = np.interp(x, self._xs_float, self._ys_float)
        vals = self._vals_float[idx] + 0.5 * ((fk - xk) + (fx - x)) * (x - xk)
        return np.where((x <= 0.0) | (x >= 1.0), 0.0, vals)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        fx = np.interp(x, self._xs_float, self._ys_float)
        return np.where((x <= 0.0) | (x >= 1.0), 0.0, fx - x)

    def sup_norm_exact(self) -> Fraction:
        """Exact sup of |F| over [0, 1] via breakpoints and interior vertices.

        On each affine piece f(t) = y0 + m (t - x0) the integrand f - t has
        at most one zero, where the quadratic F has its vertex.
        """
        candidates = list(self.xs)
        for k in range(len(self.xs) - 1):
            x0, x1 = self.xs[k], self.xs[k + 1]
            y0, y1 = self.iterates.ys[k], self.iterates.ys[k + 1]
            m = (y1 - y0) / (x1 - x0)
            if m != 1:
                t = (y0 - m * x0) / (1 - m)
                if x0 < t < x1:
                    candidates.append(t)
        return max(abs(self.value_exact(t)) for t in candidates)

    def to_json(self) -> str:
        payload = {
            "alphas": [_number_str(a) for a in self.system.alphas],
            "depth": self.iterates.n,
            "truncation_error": self.truncation_error,
            "breakpoints": [_number_str(x) for x in self.xs],
            "values": [_number_str(v) for v in self.values],
            "slope": _number_str(self.iterates.slope),
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def fat_F(system: CantorSystem, n: int | None = None) -> FatF:
    """Exact piecewise quadratic antiderivative of f_n - t."""
    it = staircase_f(system, n)
    vals: list[Fraction] = [Fraction(0)]
    acc = Fraction(0)
    for k in range(len(it.xs) - 1):
        x0, x1 = it.xs[k], it.xs[k + 1]
        g0 = it.ys[k] - x0
        g1 = it.ys[k + 1] - x1
        acc += (g0 + g1) * (x1 - x0) / 2
        vals.append(acc)
    return FatF(
        iterates=it,
        xs=it.xs,
        values=tuple(vals),
        truncation_error=2.0 ** (1 - it.n),
    )


@dataclass(frozen=True)
class X0Certificate:
    """Certified base point for the one-sided quadratic growth of F.

    ``x0`` minimizes g = f_N - slope1 * x over the first generation-1 kept
    interval, where slope1 = 1 / (1 - alpha_1) is the slope of f_1 there.
    Minimality of the supporting line gives, after integration,

        F(x0 + s) - F(x0) - s F'(x0) >= L s^2      for 0 <= s <= delta0

    with L = (slope1 - 1) / 2, and the certificate verifies this exactly
    at ``offsets_checked`` rational offsets.  The bound is genuinely
    one-sided: every minimizer of g is the right endpoint of a removed
    gap, f_N is constant immediately to its left, and there the deviation
    equals -s^2/2 exactly.  ``left_defect`` records the verified infimum
    of deviation / s^2 over sampled s < 0.
    """

    fat: FatF
    x0: Fraction
    growth: Fraction
    delta0: Fraction
    g_min: Fraction
    offsets_checked: int
    left_gap: tuple[Fraction, Fraction] | None
    left_defect: Fraction | None

    def to_json(self) -> str:
        payload = {
            "x0": _number_str(self.x0),
            "growth": _number_str(self.growth),
            "delta0": _number_str(self.delta0),
            "g_min": _number_str(self.g_min),
            "offsets_checked": self.offsets_checked,
            "left_gap": None
            if self.left_gap is None
            else [_number_str(self.left_gap[0]), _number_str(self.left_gap[1])],
            "left_defect": None
            if self.left_defect is None
            else _number_str(self.left_defect),
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def find_x0(fat: FatF, n_offsets: int = 1000) -> X0Certificate:
    """Locate and exactly certify the quadratic growth base point of F.

    Scans the breakpoints of f_N inside the first generation-1 kept
    interval for the leftmost minimizer of g = f_N - slope1 * x (g is
    piecewise affine, so breakpoints suffice), then verifies
    deviation(s) = F(x0+s) - F(x0) - s F'(x0) >= growth * s^2 at
    ``n_offsets`` equally spaced rational offsets s in (0, delta0].  A
    failed comparison raises ConstructionError.  The constant left piece
    is sampled too and its exact deviation ratio reported as
    ``left_defect`` (equal to -1/2 when the left neighbor is a gap).
    """
    if n_offsets < 1:
        raise ParameterError(f"n_offsets must be >= 1, got {n_offsets}")
    system = fat.system
    it = fat.iterates
    a1, b1 = system.levels[1][0]
    slope1 = 1 / (1 - system.alphas[0])
    growth = (slope1 - 1) / 2

    best_x = None
    best_g = None
    for x, y in zip(it.xs, it.ys):
        if a1 <= x <= b1:
            g = y - slope1 * x
            if best_g is None or g < best_g:
                best_g = g
                best_x = x
    if best_x is None:
        raise ConstructionError("no staircase breakpoints inside the base interval")
    x0 = best_x

    dist = min(x0 - a1, b1 - x0)
    delta0 = min(Fraction(1, 20), dist / 2)
    if delta0 <= 0:
        raise ConstructionError("base point sits on the interval boundary")

    f_x0 = fat.value_exact(x0)
    df_x0 = fat.derivative_exact(x0)
    for k in range(1, n_offsets + 1):
        s = delta0 * k / n_offsets
        dev = fat.value_exact(x0 + s) - f_x0 - s * df_x0
        if dev < growth * s * s:
            raise ConstructionError(
                f"quadratic growth fails at offset {float(s)!r}: "
                f"deviation {float(dev)!r} < {float(growth * s * s)!r}"
            )

    left_gap = None
    for row in system.gaps:
        for g in row:
            if g[1] == x0:
                left_gap = g
                break
        if left_gap is not None:
            break

    left_defect = None
    if x0 > 0:
        reach = delta0 if left_gap is None else min(delta0, (left_gap[1] - left_gap[0]) / 2)
        if reach > 0:
            ratios = []
            for k in range(1, 8):
                s = -reach * k / 8
                dev = fat.value_exact(x0 + s) - f_x0 - s * df_x0
                ratios.append(dev / (s * s))
            left_defect = min(ratios)

    return X0Certificate(
        fat=fat,
        x0=x0,
        growth=growth,
        delta0=delta0,
        g_min=best_g,
        offsets_checked=n_offsets,
        left_gap=left_gap,
        left_defect=left_defect,
    )


def bump_window(t):
    """Even C-infinity window: 1 on |t| <= 1, 0 on |t| >= 2, monotone between."""
    arr = np.abs(np.atleast_1d(np.asarray(t, dtype=float)))
    out = np.zeros_like(arr)
    out[arr <= 1.0] = 1.0
    mid = (arr > 1.0) & (arr < 2.0)
    if np.any(mid):
        u = 2.0 - arr[mid]
        with np.errstate(divide="ignore", over="ignore"):
            su = np.exp(-1.0 / u)
            sv = np.exp(-1.0 / (1.0 - u))
        out[mid] = su / (su + sv)
    return out if np.ndim(t) else float(out[0])


@lru_cache(maxsize=1)
def bump_window_second_derivative_sup() -> float:
    """Numeric sup of |d^2/dt^2 bump_window| over the transitionband."""
    h = 1e-5
    t = np.arange(1.0 + h, 2.0 - h, h)
    vals = bump_window(np.stack([t - h, t, t + h]))
    second = (vals[0] - 2.0 * vals[1] + vals[2]) / h**2
    return float(np.max(np.abs(second)))


@dataclass(frozen=True)
class HartogsDomain:
    """Radially symmetric log cap on the unit disc, optionally perturbed.

    ``cap`` holds phi on a regular grid over the disc (NaN outside);
    ``kind`` is "ball" for the unperturbed cap or "staircase" for the cap
    plus c1 * F(x - 1/2) * window(4 y); ``params`` freezes every constant
    used so reports are reproducible.
    """

    cap: DiscField
    kind: str
    params: dict
    fat: FatF | None = None
    certificate: X0Certificate | None = None

    @property
    def spacing(self) -> float:
        return self.cap.spacing

    def segment_intervals(self) -> list[tuple[float, float]] | None:
        """Perturbation support columns: kept intervals shifted by +1/2."""
        if self.fat is None:
            return None
        return [(a + 0.5, b + 0.5) for a, b in self.fat.system.kept_union()]


def _ball_cap_values(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    r2 = x * x + y * y
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = 0.5 * np.log1p(-r2)
    vals[r2 >= 1.0] = np.nan
    return vals


def hartogs_ball_domain(spacing: float = 1.0 / 512.0) -> HartogsDomain:
    """Unperturbed cap phi = (1/2) log(1 - |z|^2)."""

    def phi(x, y):
        return _ball_cap_values(np.asarray(x, float), np.asarray(y, float))

    cap = DiscField.from_function(1.0, spacing, phi)
    return HartogsDomain(cap=cap, kind="ball", params={"spacing": spacing})


def hartogs_staircase(
    growth_target=None,
    alpha1=None,
    depth: int = 10,
    spacing: float = 1.0 / 512.0,
    n_offsets: int = 1000,
) -> HartogsDomain:
    """Cap phi = (1/2) log(1-|z|^2) + c1 F(x - 1/2) window(4 y).

    Exactly one of ``growth_target`` / ``alpha1`` selects the first gap
    ratio: given a target L, alpha1 = 2L / (2L + 1) makes the certified
    growth constant equal L.  Subsequent ratios follow the geometric
    schedule alpha1 * 4**(1-k).

    The amplitude c1 = 1 / (8 * sup|F| * sup|window''|) caps the y-window
    contribution 16 c1 F(x - 1/2) window''(4 y) at 2 in absolute value.
    That term lives on the ring |y| in [1/4, 1/2] with x > 1/2, where the
    unperturbed cap has Laplacian at most -2 / (1 - 5/16)^2 < -4.2, so the
    cap stays strictly superharmonic wherever the staircase term is flat;
    Laplacian sign changes can only happen over the kept columns.
    """
    if (growth_target is None) == (alpha1 is None):
        raise ParameterError("pass exactly one of growth_target or alpha1")
    if alpha1 is None:
        L = _as_fraction(growth_target)
        if L <= 0:
            raise ParameterError(f"growth target must be positive, got {growth_target!r}")
        a1 = 2 * L / (2 * L + 1)
    else:
        a1 = _as_fraction(alpha1)
        if not 0 < a1 < 1:
            raise ParameterError(f"alpha1 must lie in (0, 1), got {alpha1!r}")

    system = build_cantor(default_alphas(a1, depth))
    fat = fat_F(system)
    cert = find_x0(fat, n_offsets=n_offsets)

    f_sup = float(fat.sup_norm_exact())
    w2_sup = bump_window_second_derivative_sup()
    c1 = 1.0 / (8.0 * f_sup * w2_sup)
    c1_literal = 1.0 / (16.0 * w2_sup)

    def phi(x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        base = _ball_cap_values(x, y)
        return base + c1 * fat(x - 0.5) * bump_window(4.0 * y)

    cap = DiscField.from_function(1.0, spacing, phi)
    params = {
        "spacing": spacing,
        "alpha1": float(a1),
        "depth": depth,
        "growth": float(cert.growth),
        "x0": float(cert.x0),
        "z0_real": float(cert.x0 + Fraction(1, 2)),
        "z0_imag": 0.0,
        "c1": c1,
        "c1_literal_over_f_sup": c1_literal,
        "f_sup": f_sup,
        "window_second_sup": w2_sup,
        "window_ring_bound": 16.0 * c1 * f_sup * w2_sup,
    }
    return HartogsDomain(cap=cap, kind="staircase", params=params, fat=fat, certificate=cert)


def interval_distance(points: np.ndarray, intervals: Sequence[tuple[float, float]]) -> np.ndarray:
    """Distance from each point to the union of closed intervals."""
    if not intervals:
        raise ParameterError("interval union is empty")
    ivs = sorted(intervals)
    lefts = np.array([a for a, _ in ivs])
    rights = np.array([b for _, b in ivs])
    pts = np.asarray(points, dtype=float)
    k = np.searchsorted(lefts, pts, side="right") - 1
    dist = np.full(pts.shape, np.inf)
    has_left = k >= 0
    inside = has_left & (pts <= rights[np.clip(k, 0, None)])
    dist[inside] = 0.0
    use_left = has_left & ~inside
    dist[use_left] = pts[use_left] - rights[k[use_left]]
    has_right = k + 1 < len(lefts)
    cand = np.where(has_right, lefts[np.clip(k + 1, None, len(lefts) - 1)] - pts, np.inf)
    return np.minimum(dist, np.where(cand > 0, cand, np.inf))


@dataclass
class SubharmonicityScan:
    """Discrete Laplacian classification of a Hartogs cap.

    ``laplacian`` is the 5-point Laplacian field (NaN where undefined or
    outside the scan radius), ``violating`` marks nodes with positive
    Laplacian, and the distance arrays measure proximity of each node to
    the perturbed segment {y = 0, x - 1/2 in kept union} (NaN for the
    unperturbed cap).  Horizontal distance ignores y because the window
    keeps the perturbation fully active on a band of fixed height, so
    violations can sit far from y = 0 in the Euclidean metric while still
    lying over the kept columns.
    """

    domain: HartogsDomain
    scan_radius: float
    laplacian: np.ndarray
    scanned: np.ndarray
    violating: np.ndarray
    dist_horizontal: np.ndarray
    dist_euclidean: np.ndarray
    mean_checks: dict | None = None

    def violating_count(self) -> int:
        return int(np.count_nonzero(self.violating))

    def scanned_count(self) -> int:
        return int(np.count_nonzero(self.scanned))

    def max_laplacian(self) -> float:
        vals = self.laplacian[self.scanned]
        return float(np.max(vals)) if vals.size else float("nan")

    def far_field_max(self, min_distance: float = 0.1) -> float:
        """Max Laplacian over scanned nodes at horizontal distance > min_distance."""
        mask = self.scanned & (self.dist_horizontal > min_distance)
        vals = self.laplacian[mask]
        return float(np.max(vals)) if vals.size else float("nan")

    def violation_alignment(self) -> dict:
        """Distance statistics of the violating set relative to the segment."""
        if not np.any(self.violating):
            return {
                "count": 0,
                "max_horizontal": 0.0,
                "max_euclidean": 0.0,
                "within_2h": True,
            }
        dh = self.dist_horizontal[self.violating]
        de = self.dist_euclidean[self.violating]
        h = self.domain.spacing
        return {
            "count": int(np.count_nonzero(self.violating)),
            "max_horizontal": float(np.max(dh)),
            "max_euclidean": float(np.max(de)),
            "within_2h": bool(np.max(dh) <= 2.0 * h + 1e-12),
        }

    def summary(self) -> dict:
        out = {
            "kind": self.domain.kind,
            "spacing": self.domain.spacing,
            "scan_radius": self.scan_radius,
            "scanned_count": self.scanned_count(),
            "violating_count": self.violating_count(),
            "max_laplacian": self.max_laplacian(),
        }
        if self.domain.kind == "staircase":
            out["far_field_max"] = self.far_field_max()
            out["alignment"] = self.violation_alignment()
            out.update(self._threshold_report())
        if self.mean_checks is not None:
            out["mean_checks"] = self.mean_checks
        return out

    def _threshold_report(self) -> dict:
        """Smooth-part mean-comparison constant and the growth it demands.

        Circle means of the unperturbed cap at radius r fall below the
        center value by about c3 r^2 with c3 a quarter of the Laplacian
        modulus near z0.  The staircase term raises them by at least
        c1 (L/4 - 1/8) r^2 (quadratic growth to the right, exact -s^2/2
        defect on the constant left piece), so the mean-value inequality
        can only break when L exceeds 4 c3 / c1 + 1/2.  Reported, not
        asserted; the scan's violation count is the ground truth.
        """
        p = self.domain.params
        c3 = 0.25 * _ball_laplacian_modulus_sup(abs(p["z0_real"]), 0.02)
        c1 = p["c1"]
        threshold = 4.0 * c3 / c1 + 0.5
        growth = p["growth"]
        return {
            "empirical_c3": c3,
            "implied_growth_threshold": threshold,
            "growth": growth,
            "growth_below_threshold": bool(growth < threshold),
        }

    def to_csv(self, path) -> None:
        cap = self.domain.cap
        xs = cap.axis()
        rows = ["x,y,laplacian,violating,dist_horizontal,dist_euclidean"]
        idx = np.argwhere(self.scanned)
        for i, j in idx:
            rows.append(
                f"{xs[i]!r},{xs[j]!r},{self.laplacian[i, j]!r},"
                f"{int(self.violating[i, j])},"
                f"{self.dist_horizontal[i, j]!r},{self.dist_euclidean[i, j]!r}"
            )
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(rows) + "\n")


def _ball_laplacian_modulus_sup(center_radius: float, radius: float) -> float:
    """Sup of |Laplacian of (1/2) log(1 - |z|^2)| = 2/(1 - |z|^2)^2 nearby.

    The modulus is radial and increasing, so the sup over a disc of the
    given radius around a point sits at the largest radius reached.
    """
    r = min(center_radius + radius, 0.999)
    return 2.0 / (1.0 - r * r) ** 2


def subharmonicity_scan(
    domain: HartogsDomain, scan_radius: float = 0.96
) -> SubharmonicityScan:
    """Classify the sign of the 5-point Laplacian over |z| <= scan_radius."""
    cap = domain.cap
    if not 0 < scan_radius < cap.radius:
        raise ParameterError(
            f"scan radius must lie in (0, {cap.radius}), got {scan_radius!r}"
        )
    lap = cap.laplacian_field()
    xs = cap.axis()
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    rr = np.hypot(gx, gy)
    scanned = np.isfinite(lap) & (rr <= scan_radius)
    lap_masked = np.where(scanned, lap, np.nan)
    violating = scanned & (lap_masked > 0.0)

    mean_checks = None
    if domain.kind == "staircase":
        cols = domain.segment_intervals()
        dx = interval_distance(xs, cols)
        dist_h = np.broadcast_to(dx[:, None], lap.shape).copy()
        dist_e = np.hypot(dist_h, gy)
        mean_checks = _segment_mean_checks(domain, scanned, dist_h, gy)
    else:
        dist_h = np.full(lap.shape, np.nan)
        dist_e = np.full(lap.shape, np.nan)

    return SubharmonicityScan(
        domain=domain,
        scan_radius=scan_radius,
        laplacian=lap_masked,
        scanned=scanned,
        violating=violating,
        dist_horizontal=np.where(scanned, dist_h, np.nan),
        dist_euclidean=np.where(scanned, dist_e, np.nan),
        mean_checks=mean_checks,
    )


def _segment_mean_checks(
    domain: HartogsDomain, scanned: np.ndarray, dist_h: np.ndarray, gy: np.ndarray
) -> dict:
    """Circle-mean excess at the nodes straddling the perturbed segment.

    The tested nodes sit within 2h horizontally of the kept columns and
    within 2.5h of y = 0, where the staircase kinks live; a positive
    excess at small radius witnesses mean-value failure independently of
    the finite-difference Laplacian.  The radius tracks 4h but is clipped
    to [0.004, 0.0085]: above roughly 0.015 the smooth part's negative
    drift (about c3 r^2) overtakes the kink excess even for steep caps,
    so larger circles would test the wrong regime.
    """
    from levicheck.fields import circle_mean

    cap = domain.cap
    h = cap.spacing
    radius = min(max(4.0 * h, 0.004), 0.0085)
    sel = scanned & (dist_h <= 2.0 * h) & (np.abs(gy) <= 2.5 * h)
    excesses = []
    for i, j in np.argwhere(sel):
        center = cap.node_coords((i, j))
        excesses.append(circle_mean(cap, center, radius) - cap.value(center))
    if not excesses:
        return {"radius": radius, "nodes": 0, "positive": 0, "max_excess": float("nan")}
    arr = np.array(excesses)
    return {
        "radius": radius,
        "nodes": int(arr.size),
        "positive": int(np.count_nonzero(arr > 0.0)),
        "max_excess": float(np.max(arr)),
    }


def superharmonic_mean_excess(
    domain: HartogsDomain, center: complex, radii: Iterable[float], n_theta: int = 512
) -> dict:
    """Circle-mean minus center value of the cap at the given radii.

    A superharmonic function has non-positive excess for every radius; a
    positive value witnesses failure of the mean-value inequality at that
    scale.  Values are keyed by the radius repr.
    """
    from levicheck.fields import circle_mean

    out = {}
    for r in radii:
        mean = circle_mean(domain.cap, center, float(r), n_theta=n_theta)
        out[repr(float(r))] = float(mean - domain.cap.value(center))
    return out
