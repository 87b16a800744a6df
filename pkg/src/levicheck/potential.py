"""Square Cantor sets, self-similar measures, and Green potentials on the disc.

The chain built here: a four-corner Cantor set E with contraction
a = 4^{-1/alpha} has box dimension alpha; the uniform mass split over its
generation-n squares gives a probability measure mu with the growth bound
mu(D(z,r)) <= C r^alpha; the Green potential of mu vanishes on the unit
circle, is superharmonic with Delta u = -mu, and its second differences
obey a Zygmund-type bound of order alpha.  Subtracting u from the log cap
of the ball produces a Hartogs-type domain whose subharmonicity defect
concentrates on E.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .fields import DiscField, DomainError, ParameterError
from .staircase import HartogsDomain

__all__ = [
    "AmbiguousCellError",
    "AtomicMeasure",
    "BoxCountRegression",
    "FrostmanCertificate",
    "GreenPotential",
    "MassRecoveryProbe",
    "SquareCantor",
    "box_dimension",
    "build_square_cantor",
    "contraction_ratio",
    "disc_mass_recovery",
    "frostman_certificate",
    "frostman_measure",
    "graph_set_points",
    "green_kernel",
    "green_potential",
    "laplacian_mass_recovery",
    "potential_field",
    "rectangle_flux_mass",
    "zygmund_domain",
    "zygmund_seminorm",
]

# largest start side whose diagonal still fits in the closed disc of
# radius 1/2: 0.7 * sqrt(2)/2 = 0.49497 < 1/2
_START_SIDE = 0.7
_GENERATION_BUDGET = 10


class AmbiguousCellError(Exception):
    """An atom sits on a flux-cell boundary; shift the cell by h/2."""


def contraction_ratio(alpha: float) -> float:
    """a = 4^{-1/alpha}; corner squares stay disjoint exactly when a < 1/2."""
    alpha = float(alpha)
    if not 0.0 < alpha < 2.0:
        raise ParameterError(
            f"alpha must lie in (0, 2), got {alpha} (at alpha >= 2 the ratio "
            "4^(-1/alpha) reaches 1/2 and the corner squares overlap)"
        )
    return 4.0 ** (-1.0 / alpha)


@dataclass(frozen=True)
class SquareCantor:
    """Generation-n stage of the four-corner Cantor construction.

    squares holds the 4^n lower-left corners (x, y) and the common side;
    the whole configuration is centered at 0 and contained in the closed
    disc of radius 1/2.  Sides contract by exactly a = 4^{-1/alpha} per
    generation starting from a fixed root side, so side ratios, counts,
    and disjointness are construction invariants rather than estimates.
    """

    alpha: float
    generation: int
    side: float
    squares: tuple[tuple[float, float], ...]

    @property
    def ratio(self) -> float:
        return contraction_ratio(self.alpha)

    def centers(self) -> np.ndarray:
        """(4^n, 2) array of square centers, construction order."""
        arr = np.asarray(self.squares, dtype=np.float64)
        return arr + 0.5 * self.side

    def diameter(self) -> float:
        c = self.centers()
        lo = c.min(axis=0) - 0.5 * self.side
        hi = c.max(axis=0) + 0.5 * self.side
        return float(np.hypot(*(hi - lo)))

    def to_json(self) -> str:
        payload = {
            "alpha": self.alpha,
            "generation": self.generation,
            "side": self.side,
            "squares": [[x, y] for x, y in self.squares],
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def build_square_cantor(alpha: float, n: int) -> SquareCantor:
    """Iterate the four-corner subdivision n times inside D(0, 1/2)."""
    a = contraction_ratio(alpha)
    n = int(n)
    if n < 1:
        raise ParameterError(f"generation must be >= 1, got {n}")
    if n > _GENERATION_BUDGET:
        raise ParameterError(
            f"generation {n} exceeds the 4^{_GENERATION_BUDGET} square budget"
        )
    side = _START_SIDE
    corners = np.array([[-0.5 * side, -0.5 * side]])
    for _ in range(n):
        child = side * a
        offset = side - child
        corners = np.concatenate(
            [
                corners,
                corners + [offset, 0.0],
                corners + [0.0, offset],
                corners + [offset, offset],
            ]
        )
        side = child
    return SquareCantor(
        alpha=float(alpha),
        generation=n,
        side=side,
        squares=tuple((float(x), float(y)) for x, y in corners),
    )


@dataclass(frozen=True)
class AtomicMeasure:
    """Uniform self-similar measure at stage n: one atom per square.

    Each atom carries mass 4^{-n} (a power of two, so the total is exactly
    1.0 in floating point); locations are the square centers.
    """

    generation: int
    atoms: tuple[tuple[complex, float], ...]

    def __post_init__(self) -> None:
        if not self.atoms:
            raise ParameterError("measure needs at least one atom")
        if any(m <= 0.0 for _, m in self.atoms):
            raise ParameterError("atom masses must be positive")
        if abs(self.total_mass() - 1.0) > 1e-12:
            raise ParameterError(f"total mass {self.total_mass()} is not 1")

    def total_mass(self) -> float:
        return float(math.fsum(m for _, m in self.atoms))

    @cached_property
    def locations(self) -> np.ndarray:
        return np.array([w for w, _ in self.atoms], dtype=np.complex128)

    @cached_property
    def masses(self) -> np.ndarray:
        return np.array([m for _, m in self.atoms], dtype=np.float64)

    def disc_mass(self, center: complex, r: float) -> float:
        """mu(D(center, r)) with the open disc, summed in atom order."""
        hit = np.abs(self.locations - complex(center)) < float(r)
        return float(math.fsum(self.masses[hit]))

    def box_mass(self, x0: float, y0: float, side: float) -> float:
        """Mass of the open axis box (x0, x0+side) x (y0, y0+side)."""
        w = self.locations
        hit = (
            (w.real > x0)
            & (w.real < x0 + side)
            & (w.imag > y0)
            & (w.imag < y0 + side)
        )
        return float(math.fsum(self.masses[hit]))

    def to_json(self) -> str:
        payload = {
            "generation": self.generation,
            "atoms": [[w.real, w.imag, m] for w, m in self.atoms],
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def frostman_measure(square_set: SquareCantor) -> AtomicMeasure:
    """Uniform mass split: mass 4^{-n} at the center of every square."""
    mass = 4.0 ** (-square_set.generation)
    centers = square_set.centers()
    atoms = tuple((complex(x, y), mass) for x, y in centers)
    return AtomicMeasure(generation=square_set.generation, atoms=atoms)


@dataclass(frozen=True)
class FrostmanCertificate:
    """Empirical growth constant sup mu(D(z,r)) / r^alpha.

    The sup runs over sampled atom centers and dyadic radii above the
    current construction scale; below that scale the finite-stage measure
    degenerates to single atoms and the ratio is no longer meaningful.
    """

    alpha: float
    generation: int
    constant: float
    samples: int
    radii: tuple[float, ...]

    def to_json(self) -> str:
        payload = {
            "alpha": self.alpha,
            "n": self.generation,
            "C": self.constant,
            "samples": self.samples,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def frostman_certificate(
    measure: AtomicMeasure,
    alpha: float,
    max_centers: int = 4096,
) -> FrostmanCertificate:
    """Certify the growth bound over dyadic radii and sampled centers.

    Checks every center when there are at most max_centers atoms, else a
    deterministic stride sample.  Radii run down to the atom resolution:
    the smallest dyadic radius still covering at least one nearest
    neighbor gap.
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 2.0:
        raise ParameterError(f"alpha must lie in (0, 2), got {alpha}")
    locs = measure.locations
    n_atoms = len(locs)
    stride = max(1, n_atoms // max_centers)
    centers = locs[::stride]

    if n_atoms > 1:
        tree = cKDTree(np.column_stack([locs.real, locs.imag]))
        gaps, _ = tree.query(np.column_stack([locs.real, locs.imag]), k=2)
        resolution = float(gaps[:, 1].min())
    else:
        resolution = 1e-6
    radii = []
    r = 0.5
    while r >= resolution:
        radii.append(r)
        r *= 0.5
    if len(radii) < 2:
        raise ParameterError("measure too coarse for a dyadic radius sweep")

    pts = np.column_stack([locs.real, locs.imag])
    tree = cKDTree(pts)
    qry = np.column_stack([centers.real, centers.imag])
    best = 0.0
    mass = measure.masses[0]
    for r in radii:
        counts = tree.query_ball_point(qry, r, return_length=True)
        # query_ball_point is closed; subtract boundary atoms to match the
        # open disc used by disc_mass
        ratio = counts.max() * mass / r**alpha
        best = max(best, float(ratio))
    return FrostmanCertificate(
        alpha=alpha,
        generation=measure.generation,
        constant=best,
        samples=len(centers) * len(radii),
        radii=tuple(radii),
    )


# -- Green potentials --------------------------------------------------------


def green_kernel(z: complex, w: complex) -> float:
    """-log|(z - w)/(1 - z conj(w))|: symmetric in (z, w), nonnegative on
    the open disc, zero when either argument reaches the circle."""
    z = complex(z)
    w = complex(w)
    num = abs(z - w)
    den = abs(1.0 - z * np.conjugate(w))
    if den == 0.0:
        raise DomainError(f"kernel pole at z = {z}, w = {w}")
    if num == 0.0:
        return math.inf
    return -math.log(num / den)


@dataclass(frozen=True)
class GreenPotential:
    """u(z) = sum_j m_j * (-log|(z - w_j)/(1 - z conj(w_j))|).

    u >= 0 on the open disc, vanishes identically on |z| = 1, and carries
    distributional Laplacian -2 pi times the measure (in the convention
    where Delta log|z| = 2 pi delta_0).
    """

    measure: AtomicMeasure

    def __call__(self, z: complex) -> float:
        z = complex(z)
        if abs(z) > 1.0 + 1e-12:
            raise DomainError(f"potential evaluated outside the closed disc: {z}")
        total = []
        for w, m in self.measure.atoms:
            term = green_kernel(z, w)
            if math.isinf(term):
                return math.inf
            total.append(m * term)
        return float(math.fsum(total))

    def grid_values(self, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
        """Vectorized evaluation; atom nodes come back +inf."""
        out = np.zeros(np.broadcast(gx, gy).shape, dtype=np.float64)
        for w, m in self.measure.atoms:
            dx = gx - w.real
            dy = gy - w.imag
            num2 = dx * dx + dy * dy
            rr = 1.0 - gx * w.real - gy * w.imag
            ii = gx * w.imag - gy * w.real
            den2 = rr * rr + ii * ii
            with np.errstate(divide="ignore"):
                out -= 0.5 * m * (np.log(num2) - np.log(den2))
        return out


def green_potential(measure: AtomicMeasure) -> GreenPotential:
    return GreenPotential(measure=measure)


def potential_field(
    potential: GreenPotential, radius: float = 1.0, spacing: float = 1.0 / 256.0
) -> DiscField:
    """Sample the potential on the square grid covering the disc."""

    def fn(gx, gy):
        vals = potential.grid_values(gx, gy)
        vals[np.hypot(gx, gy) > 1.0] = np.nan
        return vals

    return DiscField.from_function(radius, spacing, fn)


# -- flux recovery of the measure -------------------------------------------


@dataclass(frozen=True)
class MassRecoveryProbe:
    """Flux recovery -(1/2pi) * contour integral of du/dn versus mu(cell)."""

    recovered: float
    expected: float

    @property
    def abs_error(self) -> float:
        return abs(self.recovered - self.expected)

    @property
    def rel_error(self) -> float:
        """Relative to the expected cell mass, or to the unit total mass
        for empty cells."""
        scale = self.expected if self.expected > 0.0 else 1.0
        return self.abs_error / scale


def _edge_flux(
    potential: GreenPotential,
    start: tuple[float, float],
    axis: int,
    length: float,
    normal: tuple[float, float],
    samples: int,
    fd_step: float,
) -> float:
    """Midpoint-rule integral of du/dn along one axis-parallel edge."""
    t = (np.arange(samples) + 0.5) * (length / samples)
    if axis == 0:
        gx = start[0] + t
        gy = np.full_like(t, start[1])
    else:
        gx = np.full_like(t, start[0])
        gy = start[1] + t
    nx, ny = normal
    up = potential.grid_values(gx + fd_step * nx, gy + fd_step * ny)
    dn = potential.grid_values(gx - fd_step * nx, gy - fd_step * ny)
    deriv = (up - dn) / (2.0 * fd_step)
    return float(math.fsum(deriv) * (length / samples))


def laplacian_mass_recovery(
    potential: GreenPotential,
    cell: tuple[float, float, float],
    fd_step: float | None = None,
    samples_per_edge: int = 256,
) -> MassRecoveryProbe:
    """Recover mu(cell) from the outward flux of grad u through the cell.

    cell = (x0, y0, side), axis aligned.  The potential is harmonic off
    the atoms, so the flux counts exactly the enclosed mass; quadrature
    and finite differencing are the only error sources.  Atoms within a
    quadrature step of the boundary make the enclosed count ill defined.
    """
    x0, y0, side = (float(v) for v in cell)
    if side <= 0.0:
        raise ParameterError("cell side must be positive")
    far = max(
        math.hypot(x, y)
        for x in (x0, x0 + side)
        for y in (y0, y0 + side)
    )
    if 1.0 - far < side:
        raise ParameterError(
            f"cell must stay one side length inside the circle (gap {1.0 - far:.3e})"
        )
    if fd_step is None:
        fd_step = side / 64.0
    if not 0.0 < fd_step <= side / 8.0:
        raise ParameterError("fd step must be positive and at most side/8")

    locs = potential.measure.locations
    tol = max(fd_step, 1e-12)
    near_x = (np.abs(locs.real - x0) < tol) | (np.abs(locs.real - (x0 + side)) < tol)
    near_y = (np.abs(locs.imag - y0) < tol) | (np.abs(locs.imag - (y0 + side)) < tol)
    in_x = (locs.real > x0 - tol) & (locs.real < x0 + side + tol)
    in_y = (locs.imag > y0 - tol) & (locs.imag < y0 + side + tol)
    if np.any((near_x & in_y) | (near_y & in_x)):
        raise AmbiguousCellError(
            "an atom sits on the cell boundary; shift the cell by half a step"
        )

    flux = (
        _edge_flux(potential, (x0, y0), 0, side, (0.0, -1.0), samples_per_edge, fd_step)
        + _edge_flux(potential, (x0, y0 + side), 0, side, (0.0, 1.0), samples_per_edge, fd_step)
        + _edge_flux(potential, (x0, y0), 1, side, (-1.0, 0.0), samples_per_edge, fd_step)
        + _edge_flux(potential, (x0 + side, y0), 1, side, (1.0, 0.0), samples_per_edge, fd_step)
    )
    recovered = -flux / (2.0 * math.pi)
    expected = potential.measure.box_mass(x0, y0, side)
    return MassRecoveryProbe(recovered=recovered, expected=expected)


def rectangle_flux_mass(
    potential: GreenPotential,
    x0: float,
    y0: float,
    width: float,
    height: float,
    samples_x: int = 256,
    samples_y: int = 256,
    fd_step: float = 1e-3,
) -> float:
    """Recovered mass from the flux through an axis rectangle.

    Midpoint-rule edge quadrature; with per-axis sample counts chosen
    proportional to edge length, fluxes over a tiling of cells cancel
    exactly on shared edges, making recovery additive over disjoint
    cells.
    """
    if width <= 0.0 or height <= 0.0 or fd_step <= 0.0:
        raise ParameterError("rectangle sides and fd step must be positive")
    flux = (
        _edge_flux(potential, (x0, y0), 0, width, (0.0, -1.0), samples_x, fd_step)
        + _edge_flux(potential, (x0, y0 + height), 0, width, (0.0, 1.0), samples_x, fd_step)
        + _edge_flux(potential, (x0, y0), 1, height, (-1.0, 0.0), samples_y, fd_step)
        + _edge_flux(potential, (x0 + width, y0), 1, height, (1.0, 0.0), samples_y, fd_step)
    )
    return -flux / (2.0 * math.pi)


def disc_mass_recovery(
    potential: GreenPotential,
    radius: float = 0.9,
    n_samples: int = 2048,
    fd_step: float = 1e-3,
) -> float:
    """Recovered total mass from the radial flux through |z| = radius."""
    if not 0.0 < radius < 1.0:
        raise ParameterError(f"flux radius must lie in (0, 1), got {radius}")
    theta = 2.0 * math.pi * (np.arange(n_samples) + 0.5) / n_samples
    cx, cy = np.cos(theta), np.sin(theta)
    up = potential.grid_values((radius + fd_step) * cx, (radius + fd_step) * cy)
    dn = potential.grid_values((radius - fd_step) * cx, (radius - fd_step) * cy)
    deriv = (up - dn) / (2.0 * fd_step)
    flux = float(math.fsum(deriv)) * (2.0 * math.pi * radius / n_samples)
    return -flux / (2.0 * math.pi)


# -- dimension and regularity probes ----------------------------------------


@dataclass(frozen=True)
class BoxCountRegression:
    """Least-squares slope of log N(scale) against log(1/scale)."""

    scales: tuple[float, ...]
    counts: tuple[int, ...]
    slope: float


def box_dimension(points: np.ndarray, scales) -> BoxCountRegression:
    """Count occupied axis boxes per scale and regress the dimension.

    points is (N, d); each scale partitions space into a grid of closed-
    open boxes anchored at the pointwise minimum corner, so dyadic scale
    chains nest against the set rather than against an arbitrary origin.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ParameterError("points must be a nonempty (N, d) array")
    scales = tuple(float(s) for s in scales)
    if len(scales) < 5:
        raise ParameterError("dimension regression needs at least 5 scales")
    if any(s <= 0.0 for s in scales):
        raise ParameterError("scales must be positive")
    counts = []
    for s in scales:
        cells = np.floor(pts / s).astype(np.int64)
        # per-column offset to nonnegative ids is a bijection on cells, so
        # the occupied-box count is unchanged and keys pack into one word
        cells -= cells.min(axis=0)
        width = np.uint64(63 // pts.shape[1])
        if np.uint64(cells.max()) >= np.uint64(1) << width:
            raise ParameterError(f"scale {s} too fine for the point spread")
        key = cells[:, 0].astype(np.uint64)
        for col in range(1, pts.shape[1]):
            key = (key << width) | cells[:, col].astype(np.uint64)
        counts.append(int(len(np.unique(key))))
    slope = float(
        np.polyfit(np.log(1.0 / np.array(scales)), np.log(np.array(counts)), 1)[0]
    )
    return BoxCountRegression(scales=scales, counts=tuple(counts), slope=slope)


def graph_set_points(
    square_set: SquareCantor,
    potential: GreenPotential | None = None,
    n_angles: int = 256,
) -> np.ndarray:
    """Sample the boundary graph {(z, w): z in E, |w| = exp(phi(z))} in R^4.

    phi = (1/2) log(1 - |z|^2) - u(z); one circle of n_angles points per
    square.  The z samples are the lower-left square corners: corners
    persist through the subdivision so they lie in the limit set exactly,
    and they keep half a diagonal away from the atoms, so u stays finite
    there (at the atom centers themselves u = +inf and the circles would
    collapse).
    """
    corners = np.asarray(square_set.squares, dtype=np.float64)
    zx = corners[:, 0]
    zy = corners[:, 1]
    if potential is None:
        u = np.zeros(len(corners))
    else:
        u = potential.grid_values(zx, zy)
    phi = 0.5 * np.log1p(-(zx**2 + zy**2)) - u
    r = np.exp(phi)
    theta = 2.0 * math.pi * np.arange(n_angles) / n_angles
    wx = r[:, None] * np.cos(theta)[None, :]
    wy = r[:, None] * np.sin(theta)[None, :]
    out = np.empty((len(corners) * n_angles, 4))
    out[:, 0] = np.repeat(zx, n_angles)
    out[:, 1] = np.repeat(zy, n_angles)
    out[:, 2] = wx.ravel()
    out[:, 3] = wy.ravel()
    return out


def zygmund_seminorm(
    u: DiscField,
    alpha: float,
    budget: int = 4000,
    seed: int = 0,
) -> float:
    """Empirical M = max |u(x+h) + u(x-h) - 2u(x)| / ||h||^alpha.

    Random base points in |x| <= 0.8 * radius with random offsets of
    length in [4 * grid spacing, 0.1]; deterministic for a fixed seed.
    Displacements below four cells would measure interpolation error
    rather than the field.
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 2.0:
        raise ParameterError(f"alpha must lie in (0, 2), got {alpha}")
    if budget < 1:
        raise ParameterError("sample budget must be positive")
    lo = 4.0 * u.spacing
    hi = 0.1
    if lo >= hi:
        raise ParameterError("grid too coarse: 4h must stay below the 0.1 offset cap")
    rng = np.random.default_rng(seed)
    best = 0.0
    chunk = 1024
    remaining = budget
    while remaining > 0:
        k = min(chunk, remaining)
        remaining -= k
        rad = 0.8 * u.radius * np.sqrt(rng.random(k))
        ang = 2.0 * math.pi * rng.random(k)
        x = rad * np.cos(ang)
        y = rad * np.sin(ang)
        hlen = np.exp(rng.uniform(math.log(lo), math.log(hi), k))
        hang = 2.0 * math.pi * rng.random(k)
        hx = hlen * np.cos(hang)
        hy = hlen * np.sin(hang)
        for xi, yi, hxi, hyi, hl in zip(x, y, hx, hy, hlen):
            try:
                second = (
                    u.value((xi + hxi, yi + hyi))
                    + u.value((xi - hxi, yi - hyi))
                    - 2.0 * u.value((xi, yi))
                )
            except DomainError:
                continue
            if math.isfinite(second):
                best = max(best, abs(second) / hl**alpha)
    return best


def zygmund_domain(
    alpha: float,
    n: int,
    spacing: float = 1.0 / 256.0,
) -> HartogsDomain:
    """Hartogs-type cap phi = (1/2) log(1 - |z|^2) - u(z).

    The cap is strictly superharmonic away from the support of the
    measure (u harmonic there, ball term at most -2), while at atom
    cells the singular part of -Delta u = +mu wins, so a Laplacian scan
    flags nodes only near the Cantor squares.
    """
    square_set = build_square_cantor(alpha, n)
    measure = frostman_measure(square_set)
    pot = green_potential(measure)

    def cap_values(gx, gy):
        r2 = gx * gx + gy * gy
        with np.errstate(divide="ignore", invalid="ignore"):
            base = 0.5 * np.log1p(-r2)
        base = np.where(r2 >= 1.0, np.nan, base)
        return base - pot.grid_values(gx, gy)

    cap = DiscField.from_function(1.0, spacing, cap_values)
    params = {
        "alpha": float(alpha),
        "generation": int(n),
        "spacing": float(spacing),
        "atoms": len(measure.atoms),
    }
    return HartogsDomain(cap=cap, kind="cantor", params=params)
