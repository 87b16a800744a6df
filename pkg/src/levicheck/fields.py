"""Grids, scalar fields, finite differences, and disc sampling.

Coordinates for 3-D fields are xi = (xi1, xi2, xi3) = (y1, Re z2, Im z2),
the real parameters of a graph defining function over a tangent-hyperplane
model.  Stencils are second order: 3-point central for first and pure
second derivatives, 4-point cross for mixed ones.

Reductions use compensated summation in a fixed traversal order so that
results are bit-reproducible regardless of thread count.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "StencilError",
    "DomainError",
    "Regularity",
    "Grid3",
    "ScalarField3",
    "DiscField",
    "fd_gradient",
    "fd_hessian",
    "complex_wirtinger",
    "circle_mean",
    "stable_sum",
]


class StencilError(Exception):
    """Finite-difference stencil does not fit inside the grid."""


class DomainError(Exception):
    """Evaluation requested outside the field's domain of definition."""


class ParameterError(Exception):
    """Construction parameters violate a documented precondition."""


def stable_sum(values) -> float:
    """Compensated sum over C-order traversal; thread-count independent."""
    return math.fsum(np.asarray(values, dtype=np.float64).ravel(order="C").tolist())


_REG_TAGS = ("smooth", "c1alpha", "c11", "lipschitz")


@dataclass(frozen=True)
class Regularity:
    """Smoothness class of a field plus a constant estimate.

    tag: smooth | c1alpha | c11 | lipschitz
    alpha: Holder exponent of the gradient, required iff tag == "c1alpha"
    constant: seminorm bound for the weakest declared derivative
    """

    tag: str = "smooth"
    alpha: float | None = None
    constant: float = 0.0

    def __post_init__(self) -> None:
        if self.tag not in _REG_TAGS:
            raise ValueError(f"unknown regularity tag {self.tag!r}")
        if self.tag == "c1alpha":
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise ValueError("c1alpha requires alpha in (0, 1)")
        elif self.alpha is not None:
            raise ValueError("alpha is only meaningful for tag 'c1alpha'")
        if not self.constant >= 0.0:
            raise ValueError("regularity constant must be >= 0")


@dataclass(frozen=True)
class Grid3:
    """Uniform axis-aligned grid in (xi1, xi2, xi3), equal spacing on all axes."""

    origin: tuple[float, float, float]
    spacing: float
    extents: tuple[int, int, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))
        object.__setattr__(self, "extents", tuple(int(n) for n in self.extents))
        object.__setattr__(self, "spacing", float(self.spacing))
        if len(self.origin) != 3 or len(self.extents) != 3:
            raise ValueError("origin and extents must have length 3")
        if not self.spacing > 0.0:
            raise ValueError("spacing must be positive")
        if any(n < 5 for n in self.extents):
            # width-2 central stencils must fit
            raise ValueError("extents must be >= 5 on every axis")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.extents

    def axis(self, k: int) -> np.ndarray:
        return self.origin[k] + self.spacing * np.arange(self.extents[k])

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(self.axis(0), self.axis(1), self.axis(2), indexing="ij"))

    def node_coords(self, node) -> tuple[float, float, float]:
        i, j, k = (int(n) for n in node)
        return (
            self.origin[0] + self.spacing * i,
            self.origin[1] + self.spacing * j,
            self.origin[2] + self.spacing * k,
        )

    def nearest_node(self, point) -> tuple[int, int, int]:
        idx = tuple(int(round((float(p) - o) / self.spacing)) for p, o in zip(point, self.origin))
        if any(not 0 <= idx[k] < self.extents[k] for k in range(3)):
            raise DomainError(f"point {tuple(point)} outside grid")
        return idx

    def interior(self, margin: int = 1) -> tuple[slice, slice, slice]:
        """Slices selecting nodes at least `margin` cells from every face."""
        if margin < 1:
            raise ValueError("margin must be >= 1")
        if any(n <= 2 * margin for n in self.extents):
            raise StencilError(f"margin {margin} leaves no interior nodes")
        return tuple(slice(margin, n - margin) for n in self.extents)


@dataclass
class ScalarField3:
    """Real scalar samples on a Grid3; immutable after construction."""

    grid: Grid3
    values: np.ndarray
    regularity: Regularity = field(default_factory=Regularity)

    def __post_init__(self) -> None:
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} != grid extents {self.grid.shape}")
        if not np.isfinite(vals).all():
            raise ValueError("field values must be finite at every node")
        vals.flags.writeable = False
        self.values = vals

    @classmethod
    def from_function(
        cls,
        grid: Grid3,
        fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
        regularity: Regularity | None = None,
    ) -> "ScalarField3":
        x1, x2, x3 = grid.mesh()
        vals = np.broadcast_to(np.asarray(fn(x1, x2, x3), dtype=np.float64), grid.shape).copy()
        return cls(grid, vals, regularity if regularity is not None else Regularity())

    # -- node-level finite differences ------------------------------------

    def _require_interior(self, node, margin: int = 1) -> tuple[int, int, int]:
        i, j, k = (int(n) for n in node)
        if not all(margin <= n <= e - 1 - margin for n, e in zip((i, j, k), self.grid.extents)):
            raise StencilError(f"node {(i, j, k)} within {margin} cell(s) of the boundary")
        return i, j, k

    def fd_gradient(self, node) -> tuple[float, float, float]:
        i, j, k = self._require_interior(node)
        v, h = self.values, self.grid.spacing
        return (
            float(v[i + 1, j, k] - v[i - 1, j, k]) / (2.0 * h),
            float(v[i, j + 1, k] - v[i, j - 1, k]) / (2.0 * h),
            float(v[i, j, k + 1] - v[i, j, k - 1]) / (2.0 * h),
        )

    def fd_hessian(self, node) -> np.ndarray:
        i, j, k = self._require_interior(node)
        v, h = self.values, self.grid.spacing
        hh = h * h
        out = np.empty((3, 3))
        out[0, 0] = (v[i + 1, j, k] - 2.0 * v[i, j, k] + v[i - 1, j, k]) / hh
        out[1, 1] = (v[i, j + 1, k] - 2.0 * v[i, j, k] + v[i, j - 1, k]) / hh
        out[2, 2] = (v[i, j, k + 1] - 2.0 * v[i, j, k] + v[i, j, k - 1]) / hh
        out[0, 1] = out[1, 0] = (
            v[i + 1, j + 1, k] - v[i + 1, j - 1, k] - v[i - 1, j + 1, k] + v[i - 1, j - 1, k]
        ) / (4.0 * hh)
        out[0, 2] = out[2, 0] = (
            v[i + 1, j, k + 1] - v[i + 1, j, k - 1] - v[i - 1, j, k + 1] + v[i - 1, j, k - 1]
        ) / (4.0 * hh)
        out[1, 2] = out[2, 1] = (
            v[i, j + 1, k + 1] - v[i, j + 1, k - 1] - v[i, j - 1, k + 1] + v[i, j - 1, k - 1]
        ) / (4.0 * hh)
        return out

    def complex_wirtinger(self, node) -> tuple[complex, float, complex]:
        """(d/dz2, d2/dz2 dz2bar, d2/dy1 dz2bar) at a node, z2 = xi2 + i*xi3."""
        g = self.fd_gradient(node)
        hess = self.fd_hessian(node)
        dz2 = 0.5 * (g[1] - 1j * g[2])
        dz2dz2bar = 0.25 * (hess[1, 1] + hess[2, 2])
        dy1dz2bar = 0.5 * (hess[0, 1] + 1j * hess[0, 2])
        return dz2, dz2dz2bar, dy1dz2bar

    # -- whole-grid finite differences ------------------------------------

    def _nan_ring(self, arr: np.ndarray) -> np.ndarray:
        for ax in range(3):
            sl_lo = [slice(None)] * arr.ndim
            sl_hi = [slice(None)] * arr.ndim
            sl_lo[arr.ndim - 3 + ax] = 0
            sl_hi[arr.ndim - 3 + ax] = self.grid.extents[ax] - 1
            arr[tuple(sl_lo)] = np.nan
            arr[tuple(sl_hi)] = np.nan
        return arr

    def gradient_fields(self) -> np.ndarray:
        """Shape (3,) + extents; valid one cell in from every face, NaN on the ring."""
        v, h = self.values, self.grid.spacing
        g = np.empty((3,) + v.shape)
        for ax in range(3):
            g[ax] = (np.roll(v, -1, axis=ax) - np.roll(v, 1, axis=ax)) / (2.0 * h)
        return self._nan_ring(g)

    def hessian_fields(self) -> np.ndarray:
        """Shape (3, 3) + extents; valid one cell in from every face, NaN on the ring."""
        v, h = self.values, self.grid.spacing
        hh = h * h
        out = np.empty((3, 3) + v.shape)
        for ax in range(3):
            out[ax, ax] = (np.roll(v, -1, axis=ax) - 2.0 * v + np.roll(v, 1, axis=ax)) / hh
        for a in range(3):
            for b in range(a + 1, 3):
                spp = np.roll(np.roll(v, -1, axis=a), -1, axis=b)
                spm = np.roll(np.roll(v, -1, axis=a), 1, axis=b)
                smp = np.roll(np.roll(v, 1, axis=a), -1, axis=b)
                smm = np.roll(np.roll(v, 1, axis=a), 1, axis=b)
                out[a, b] = out[b, a] = (spp - spm - smp + smm) / (4.0 * hh)
        return self._nan_ring(out)

    def wirtinger_fields(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(d/dz2, d2/dz2 dz2bar, d2/dy1 dz2bar) arrays over the grid."""
        g = self.gradient_fields()
        hess = self.hessian_fields()
        dz2 = 0.5 * (g[1] - 1j * g[2])
        dz2dz2bar = 0.25 * (hess[1, 1] + hess[2, 2])
        dy1dz2bar = 0.5 * (hess[0, 1] + 1j * hess[0, 2])
        return dz2, dz2dz2bar, dy1dz2bar

    # -- geometry helpers --------------------------------------------------

    def subfield(self, lo, hi) -> "ScalarField3":
        """Restriction to the index box [lo, hi) per axis."""
        lo = tuple(int(a) for a in lo)
        hi = tuple(int(b) for b in hi)
        if any(not 0 <= a < b <= n for a, b, n in zip(lo, hi, self.grid.extents)):
            raise ValueError("index box out of range")
        sub = Grid3(
            tuple(o + self.grid.spacing * a for o, a in zip(self.grid.origin, lo)),
            self.grid.spacing,
            tuple(b - a for a, b in zip(lo, hi)),
        )
        sel = tuple(slice(a, b) for a, b in zip(lo, hi))
        return ScalarField3(sub, self.values[sel].copy(), self.regularity)

    def value(self, point) -> float:
        """Trilinear interpolation at an off-grid point."""
        h = self.grid.spacing
        idx: list[int] = []
        frac: list[float] = []
        for p, o, n in zip(point, self.grid.origin, self.grid.extents):
            x = (float(p) - o) / h
            i = math.floor(x)
            if i == -1 and x >= -1e-9:
                i = 0
            if i == n - 1 and x <= n - 1 + 1e-9:
                i = n - 2
            if not 0 <= i <= n - 2:
                raise DomainError(f"point {tuple(point)} outside grid")
            idx.append(i)
            frac.append(x - i)
        i, j, k = idx
        cube = self.values[i : i + 2, j : j + 2, k : k + 2]
        w1 = np.array([1.0 - frac[0], frac[0]])
        w2 = np.array([1.0 - frac[1], frac[1]])
        w3 = np.array([1.0 - frac[2], frac[2]])
        return float(np.einsum("a,b,c,abc->", w1, w2, w3, cube))

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        payload = {
            "origin": list(self.grid.origin),
            "spacing": self.grid.spacing,
            "extents": list(self.grid.extents),
            "regularity": {
                "tag": self.regularity.tag,
                "alpha": self.regularity.alpha,
                "constant": self.regularity.constant,
            },
            "values": self.values.ravel(order="C").tolist(),
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ScalarField3":
        d = json.loads(text)
        grid = Grid3(tuple(d["origin"]), d["spacing"], tuple(d["extents"]))
        vals = np.array(d["values"], dtype=np.float64).reshape(grid.shape)
        reg = d["regularity"]
        return cls(grid, vals, Regularity(reg["tag"], reg["alpha"], reg["constant"]))

    def to_csv(self, path) -> None:
        x1, x2, x3 = self.grid.mesh()
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["xi1", "xi2", "xi3", "value"])
            for a, b, c, v in zip(
                x1.ravel(order="C"),
                x2.ravel(order="C"),
                x3.ravel(order="C"),
                self.values.ravel(order="C"),
            ):
                writer.writerow([repr(float(a)), repr(float(b)), repr(float(c)), repr(float(v))])


def fd_gradient(f: ScalarField3, node) -> tuple[float, float, float]:
    return f.fd_gradient(node)


def fd_hessian(f: ScalarField3, node) -> np.ndarray:
    return f.fd_hessian(node)


def complex_wirtinger(f: ScalarField3, node) -> tuple[complex, float, complex]:
    return f.complex_wirtinger(node)


@dataclass
class DiscField:
    """Real scalar samples on a square grid covering the open disc |z| < radius.

    Values live on the full square (side = 2*half+1 nodes, node [half, half]
    at the origin); NaN marks nodes where the generator is undefined.  The
    authoritative domain is the node set with |z| < radius (`inside`); the
    finite pattern may extend past the rim (polynomials) or stop short of it
    (log-type caps).  Interpolation needs all four cell corners finite.
    """

    radius: float
    spacing: float
    values: np.ndarray
    half: int = field(init=False)

    def __post_init__(self) -> None:
        if not 0.0 < self.radius <= 1.0:
            raise ValueError("radius must lie in (0, 1]")
        if not self.spacing > 0.0:
            raise ValueError("spacing must be positive")
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise ValueError("values must be a square 2-D array")
        n = vals.shape[0]
        if n < 5 or n % 2 == 0:
            raise ValueError("side must be odd and >= 5 so the origin is a node")
        vals.flags.writeable = False
        self.values = vals
        self.half = n // 2

    @classmethod
    def from_function(
        cls,
        radius: float,
        spacing: float,
        fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
        pad_cells: int = 2,
    ) -> "DiscField":
        half = int(math.ceil(radius / spacing)) + int(pad_cells)
        coords = spacing * np.arange(-half, half + 1)
        gx, gy = np.meshgrid(coords, coords, indexing="ij")
        with np.errstate(all="ignore"):
            vals = np.broadcast_to(np.asarray(fn(gx, gy), dtype=np.float64), gx.shape).copy()
        vals[~np.isfinite(vals)] = np.nan
        return cls(radius, spacing, vals)

    def axis(self) -> np.ndarray:
        return self.spacing * (np.arange(self.values.shape[0]) - self.half)

    def meshes(self) -> tuple[np.ndarray, np.ndarray]:
        coords = self.axis()
        return tuple(np.meshgrid(coords, coords, indexing="ij"))

    @property
    def inside(self) -> np.ndarray:
        gx, gy = self.meshes()
        return np.hypot(gx, gy) < self.radius

    def node_coords(self, node) -> tuple[float, float]:
        i, j = (int(n) for n in node)
        return (self.spacing * (i - self.half), self.spacing * (j - self.half))

    def value(self, z) -> float:
        """Bilinear interpolation; DomainError off the finite sample set."""
        if isinstance(z, complex):
            x, y = z.real, z.imag
        else:
            x, y = float(z[0]), float(z[1])
        h = self.spacing
        n = self.values.shape[0]
        u = x / h + self.half
        v = y / h + self.half
        i = math.floor(u)
        j = math.floor(v)
        if i == -1 and u >= -1e-9:
            i = 0
        if j == -1 and v >= -1e-9:
            j = 0
        if i == n - 1 and u <= n - 1 + 1e-9:
            i = n - 2
        if j == n - 1 and v <= n - 1 + 1e-9:
            j = n - 2
        if not (0 <= i <= n - 2 and 0 <= j <= n - 2):
            raise DomainError(f"point ({x}, {y}) outside sampled square")
        fx, fy = u - i, v - j
        cell = self.values[i : i + 2, j : j + 2]
        if not np.isfinite(cell).all():
            raise DomainError(f"point ({x}, {y}) touches undefined samples")
        return float(
            cell[0, 0] * (1.0 - fx) * (1.0 - fy)
            + cell[1, 0] * fx * (1.0 - fy)
            + cell[0, 1] * (1.0 - fx) * fy
            + cell[1, 1] * fx * fy
        )

    def laplacian_field(self) -> np.ndarray:
        """5-point Laplacian; NaN on the outer ring and wherever inputs are NaN."""
        v = self.values
        hh = self.spacing**2
        lap = np.full(v.shape, np.nan)
        lap[1:-1, 1:-1] = (
            v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2] - 4.0 * v[1:-1, 1:-1]
        ) / hh
        return lap


def circle_mean(g: DiscField, center, r: float, n_theta: int = 512) -> float:
    """Mean of g over the circle |z - center| = r (trapezoid rule in angle).

    Uniform periodic sampling makes the trapezoid rule a plain average.
    """
    if n_theta < 256:
        raise ValueError("n_theta must be >= 256")
    if not r > 0.0:
        raise ValueError("circle radius must be positive")
    if isinstance(center, complex):
        cx, cy = center.real, center.imag
    else:
        cx, cy = float(center[0]), float(center[1])
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    xs = cx + r * np.cos(theta)
    ys = cy + r * np.sin(theta)
    samples = [g.value((x, y)) for x, y in zip(xs, ys)]
    return math.fsum(samples) / n_theta
