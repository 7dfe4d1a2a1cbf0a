from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from SpecLab.Utility.Errors import DegenerateDomainError, ParameterRangeError, ResolutionError

DEFAULT_NODE_BUDGET = 2**23
PADDING_NODES = 2           # 2h of empty grid around every bounding box
SCALE_TOLERANCE = 1e-12

FAMILY_ALIASES = {
    'fourier': 'fourier-perturbed-ball',
    'hole': 'ball-with-hole',
    'cap': 'ball-minus-cap',
}

# closed parameter range per family kind
PARAMETER_RANGES = {
    'ellipse': (0.0, 1.0),
    'fourier-perturbed-ball': (0.0, 0.5),
    'ball-with-hole': (0.0, 0.9),
    'ball-minus-cap': (0.0, 0.9),
    'rectangle': (0.01, 100.0),
    'stadium': (0.0, 5.0),
    'shrunk-ball': (0.0, 0.9),
    'notched-ball': (0.0, 0.9),
}
FAMILY_KINDS = tuple(PARAMETER_RANGES)
PLANAR_KINDS = ('fourier-perturbed-ball', 'stadium')
INSCRIBED_KINDS = ('shrunk-ball', 'notched-ball')
NEAR_BALL_KINDS = tuple(kind for kind in FAMILY_KINDS if kind != 'rectangle')


def unit_ball_volume(dimension):
    """ω_N, the volume of the ball of radius one."""
    return math.pi ** (dimension / 2) / math.gamma(dimension / 2 + 1)


def unit_ball_radius(dimension):
    """r_N = ω_N^(-1/N), the radius of the ball of unit volume."""
    return unit_ball_volume(dimension) ** (-1.0 / dimension)


def inside_ball(points, radius, center=None):
    """Strict membership |x - center| < radius for an array of points (..., N)."""
    y = points if center is None else points - np.asarray(center, dtype=float)
    return np.sum(y * y, axis=-1) < radius * radius

#----------------------------------------------
# Shape predicates. Plain frozen dataclasses so that domains pickle into worker processes.

@dataclass(frozen=True)
class BallShape:
    radius: float

    def __call__(self, x):
        return inside_ball(x, self.radius)


@dataclass(frozen=True)
class EllipsoidShape:
    semi_axes: tuple

    def __call__(self, x):
        y = x / np.asarray(self.semi_axes)
        return np.sum(y * y, axis=-1) < 1.0


@dataclass(frozen=True)
class BoxShape:
    lower: tuple
    upper: tuple

    def __call__(self, x):
        return np.all((x > np.asarray(self.lower)) & (x < np.asarray(self.upper)), axis=-1)


@dataclass(frozen=True)
class HoledBallShape:
    radius: float
    hole: float

    def __call__(self, x):
        r2 = np.sum(x * x, axis=-1)
        inside = r2 < self.radius * self.radius
        if self.hole > 0:
            inside &= r2 > self.hole * self.hole
        return inside


@dataclass(frozen=True)
class CapCutShape:
    """Ball with the cap {x_0 >= plane} removed."""
    radius: float
    plane: float

    def __call__(self, x):
        return inside_ball(x, self.radius) & (x[..., 0] < self.plane)


@dataclass(frozen=True)
class FourierShape:
    mean_radius: float
    amplitude: float
    mode: int

    def __call__(self, x):
        theta = np.arctan2(x[..., 1], x[..., 0])
        boundary = self.mean_radius * (1.0 + self.amplitude * np.cos(self.mode * theta))
        return np.sum(x * x, axis=-1) < boundary * boundary


@dataclass(frozen=True)
class StadiumShape:
    radius: float
    half_length: float

    def __call__(self, x):
        dx = np.maximum(np.abs(x[..., 0]) - self.half_length, 0.0)
        return dx * dx + x[..., 1] * x[..., 1] < self.radius * self.radius


@dataclass(frozen=True)
class NotchedBallShape:
    """Ball minus a ball of radius `notch` centred on the boundary point radius*e_0."""
    radius: float
    notch: float

    def __call__(self, x):
        inside = inside_ball(x, self.radius)
        if self.notch > 0:
            y = x.copy()
            y[..., 0] -= self.radius
            inside &= np.sum(y * y, axis=-1) > self.notch * self.notch
        return inside


@dataclass(frozen=True)
class Transformed:
    """The image {scale*y + shift : y in base} of another shape."""
    base: Callable
    scale: float = 1.0
    shift: tuple = ()

    def __call__(self, x):
        y = x - np.asarray(self.shift) if self.shift else x
        return self.base(y / self.scale if self.scale != 1.0 else y)


def _transform(predicate, scale, shift):
    shift = np.asarray(shift, dtype=float)
    if isinstance(predicate, Transformed):
        old = np.asarray(predicate.shift, dtype=float) if predicate.shift else np.zeros_like(shift)
        scale, shift, predicate = predicate.scale * scale, shift + scale * old, predicate.base
    shift = tuple(float(v) for v in shift) if np.any(shift != 0) else ()
    return Transformed(predicate, float(scale), shift)

#----------------------------------------------

@dataclass(frozen=True)
class ImplicitDomain:
    """
    An open set given by a vectorized membership predicate.

    Args:
        dimension (int): 2 or 3
        predicate (callable): maps points of shape (P, N) to a boolean array (P,)
        lower, upper (tuple): bounding box; it contains every point of the set
        volume (float): analytic volume when known, else None
        label (str): name used in logs and reports
    """
    dimension: int
    predicate: Callable
    lower: tuple
    upper: tuple
    volume: Optional[float] = None
    label: str = 'domain'

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ParameterRangeError(f'Dimension must be 2 or 3, got {self.dimension}')
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if len(lower) != self.dimension or len(upper) != self.dimension:
            raise ParameterRangeError('Bounding box does not match the dimension')
        if any(lo >= hi for lo, hi in zip(lower, upper)):
            raise ParameterRangeError(f'Empty bounding box {lower} - {upper}')
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

    def contains(self, points):
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        result = np.asarray(self.predicate(np.atleast_2d(pts)), dtype=bool)
        return bool(result[0]) if single else result

    @property
    def diameter(self):
        return float(np.linalg.norm(np.subtract(self.upper, self.lower)))

    def scaled(self, t):
        if not t > 0:
            raise ParameterRangeError(f'Scale factor must be positive, got {t}')
        volume = None if self.volume is None else self.volume * t ** self.dimension
        return ImplicitDomain(self.dimension, _transform(self.predicate, t, np.zeros(self.dimension)),
                              tuple(t * v for v in self.lower), tuple(t * v for v in self.upper),
                              volume, self.label)

    def translated(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dimension,):
            raise ParameterRangeError(f'Translation must have {self.dimension} components')
        return ImplicitDomain(self.dimension, _transform(self.predicate, 1.0, v),
                              tuple(np.add(self.lower, v)), tuple(np.add(self.upper, v)),
                              self.volume, self.label)


def box_domain(lower, upper, label='box'):
    lower = tuple(float(v) for v in lower)
    upper = tuple(float(v) for v in upper)
    volume = float(np.prod(np.subtract(upper, lower)))
    return ImplicitDomain(len(lower), BoxShape(lower, upper), lower, upper, volume, label)

#----------------------------------------------

@dataclass(frozen=True)
class ConcentricBall:
    """B_γ: the ball centred at the origin with radius r_N + γ."""
    dimension: int
    offset: float = 0.0

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ParameterRangeError(f'Dimension must be 2 or 3, got {self.dimension}')
        if not self.radius > 0:
            raise ParameterRangeError(f'Offset {self.offset} leaves a non-positive radius')

    @property
    def radius(self):
        return unit_ball_radius(self.dimension) + self.offset

    @property
    def volume(self):
        return unit_ball_volume(self.dimension) * self.radius ** self.dimension

    def domain(self):
        r = self.radius
        return ImplicitDomain(self.dimension, BallShape(r), (-r,) * self.dimension, (r,) * self.dimension,
                              self.volume, f'ball(offset={self.offset:g})')

#----------------------------------------------

@dataclass(frozen=True, eq=False)
class RasterDomain:
    """
    A domain sampled on the lattice hZ^N.

    Node i of the grid array sits at (origin_index + i) * h, so rasters built
    with the same spacing share one lattice and can be compared node by node.
    """
    dimension: int
    h: float
    origin_index: tuple
    mask: np.ndarray
    label: str = ''
    index: np.ndarray = field(init=False, repr=False)
    size: int = field(init=False)

    def __post_init__(self):
        if not self.h > 0:
            raise ParameterRangeError(f'Grid spacing must be positive, got {self.h}')
        mask = np.array(self.mask, dtype=bool)
        if mask.ndim != self.dimension:
            raise ParameterRangeError('Mask rank does not match the dimension')
        if not mask.any():
            raise DegenerateDomainError(f'{self.label or "raster"} has no interior node at h={self.h:g}')
        index = np.full(mask.shape, -1, dtype=np.int64)
        index[mask] = np.arange(int(mask.sum()))
        mask.setflags(write=False)
        index.setflags(write=False)
        object.__setattr__(self, 'mask', mask)
        object.__setattr__(self, 'index', index)
        object.__setattr__(self, 'size', int(mask.sum()))
        object.__setattr__(self, 'origin_index', tuple(int(v) for v in self.origin_index))

    @property
    def shape(self):
        return self.mask.shape

    @property
    def origin(self):
        return np.asarray(self.origin_index, dtype=float) * self.h

    def axes(self):
        return [(self.origin_index[a] + np.arange(self.shape[a])) * self.h for a in range(self.dimension)]

    def node_indices(self):
        """Lattice indices (M, N) of the interior nodes, in index-map order."""
        return np.argwhere(self.mask) + np.asarray(self.origin_index)

    def points(self):
        return self.node_indices() * self.h

    def grid_points(self):
        grids = np.meshgrid(*self.axes(), indexing='ij')
        return np.stack(grids, axis=-1)

    def to_grid(self, u, fill=0.0):
        grid = np.full(self.shape, fill, dtype=np.result_type(u, float))
        grid[self.mask] = u
        return grid

    def from_grid(self, grid):
        return np.asarray(grid)[self.mask]

    def with_mask(self, mask, label=None):
        return RasterDomain(self.dimension, self.h, self.origin_index, mask,
                            self.label if label is None else label)

    def embed(self, origin_index, shape):
        """The same interior nodes placed on a larger lattice box."""
        offset = np.subtract(self.origin_index, origin_index)
        if np.any(offset < 0) or np.any(offset + np.asarray(self.shape) > np.asarray(shape)):
            raise ParameterRangeError('Target grid does not contain this raster')
        mask = np.zeros(tuple(int(n) for n in shape), dtype=bool)
        mask[tuple(slice(o, o + n) for o, n in zip(offset, self.shape))] = self.mask
        return RasterDomain(self.dimension, self.h, tuple(origin_index), mask, self.label)


def rasterize(domain, h, node_budget=DEFAULT_NODE_BUDGET):
    """
    Samples a domain at the lattice nodes of spacing h inside its padded bounding box.

    Args:
        domain (ImplicitDomain): the domain
        h (float): grid spacing
        node_budget (int): largest admissible number of grid nodes

    Returns:
        RasterDomain: interior nodes are exactly the nodes where the predicate holds.

    Raises:
        ResolutionError: if the grid would exceed node_budget
        DegenerateDomainError: if no node is interior
    """
    if not h > 0:
        raise ParameterRangeError(f'Grid spacing must be positive, got {h}')
    N = domain.dimension
    lo = np.floor(np.asarray(domain.lower) / h).astype(np.int64) - PADDING_NODES
    hi = np.ceil(np.asarray(domain.upper) / h).astype(np.int64) + PADDING_NODES
    shape = tuple(int(n) for n in hi - lo + 1)
    total = math.prod(shape)
    if total > node_budget:
        raise ResolutionError(f'{domain.label} at h={h:g} needs {total} grid nodes, budget is {node_budget}')

    axes = [(lo[a] + np.arange(shape[a])) * h for a in range(N)]
    rest = np.meshgrid(*axes[1:], indexing='ij')
    rest = np.stack([g.ravel() for g in rest], axis=-1)
    slab = np.empty((rest.shape[0], N))
    slab[:, 1:] = rest
    mask = np.empty(shape, dtype=bool)
    for i, x0 in enumerate(axes[0]):
        slab[:, 0] = x0
        mask[i] = domain.contains(slab).reshape(shape[1:])

    if not mask.any():
        raise DegenerateDomainError(f'{domain.label} has no interior node at h={h:g}')
    raster = RasterDomain(N, float(h), tuple(lo), mask, domain.label)
    logging.info(f'Rasterized {domain.label} at h={h:.6g}: {raster.size} interior nodes on a {shape} grid')
    return raster


def volume(raster):
    return raster.size * raster.h ** raster.dimension


def perimeter_estimate(raster):
    """Staircase perimeter: number of mask faces times h^(N-1)."""
    mask = np.pad(raster.mask, 1)
    faces = 0
    for axis in range(raster.dimension):
        faces += int(np.count_nonzero(np.diff(mask, axis=axis)))
    return faces * raster.h ** (raster.dimension - 1)


def estimate_volume(domain, h=None, node_budget=DEFAULT_NODE_BUDGET):
    if h is None:
        h = domain.diameter / (512 if domain.dimension == 2 else 96)
    return volume(rasterize(domain, h, node_budget))


def normalize_to_unit_volume(domain):
    """
    Rescales a domain by t = volume^(-1/N).

    Raises:
        DegenerateDomainError: if the volume is zero or cannot be determined
    """
    vol = domain.volume
    if vol is None:
        vol = estimate_volume(domain)
    if not (vol > 0 and math.isfinite(vol)):
        raise DegenerateDomainError(f'{domain.label} has volume {vol}')
    t = vol ** (-1.0 / domain.dimension)
    if abs(t - 1.0) <= SCALE_TOLERANCE:
        return replace(domain, volume=1.0)
    return replace(domain.scaled(t), volume=1.0)

#----------------------------------------------

@dataclass(frozen=True)
class FamilySpec:
    """
    A one-parameter family of domains.

    params holds shape parameters: the angular mode (default 3) for the
    fourier-perturbed ball; no other kind takes any. normalize defaults to
    True, except for the inscribed kinds which stay inside the unit-volume ball.
    """
    kind: str
    dimension: int = 2
    params: tuple = ()
    normalize: Optional[bool] = None

    def __post_init__(self):
        kind = FAMILY_ALIASES.get(self.kind, self.kind)
        if kind not in PARAMETER_RANGES:
            raise ParameterRangeError(f'Unknown family kind "{self.kind}"; use one of {", ".join(FAMILY_KINDS)}')
        if self.dimension not in (2, 3):
            raise ParameterRangeError(f'Dimension must be 2 or 3, got {self.dimension}')
        if kind in PLANAR_KINDS and self.dimension != 2:
            raise ParameterRangeError(f'{kind} is only defined for N=2')
        params = tuple(float(p) for p in self.params)
        if params and kind != 'fourier-perturbed-ball':
            raise ParameterRangeError(f'{kind} takes no shape parameters')
        if len(params) > 1:
            raise ParameterRangeError('fourier-perturbed-ball takes a single mode parameter')
        if params and (params[0] < 1 or params[0] != int(params[0])):
            raise ParameterRangeError(f'Fourier mode must be a positive integer, got {params[0]}')
        object.__setattr__(self, 'kind', kind)
        object.__setattr__(self, 'params', params)

    @property
    def inscribed(self):
        return self.kind in INSCRIBED_KINDS

    @property
    def near_ball(self):
        return self.kind in NEAR_BALL_KINDS

    @property
    def should_normalize(self):
        return (not self.inscribed) if self.normalize is None else bool(self.normalize)

    @property
    def parameter_range(self):
        return PARAMETER_RANGES[self.kind]


def _cap_volume(dimension, radius, height):
    if dimension == 2:
        c = 1.0 - height / radius
        return radius * radius * (math.acos(c) - c * math.sqrt(1.0 - c * c))
    return math.pi * height * height * (3.0 * radius - height) / 3.0


def make_family(spec, s):
    """
    Member s of a family. Near-ball kinds give the unit-volume ball at s=0.

    Raises:
        ParameterRangeError: if s is outside the family's range
    """
    lo, hi = spec.parameter_range
    if not (lo <= s <= hi):
        raise ParameterRangeError(f'{spec.kind}: parameter {s} outside [{lo}, {hi}]')
    N = spec.dimension
    r = unit_ball_radius(N)
    omega = unit_ball_volume(N)
    kind = spec.kind

    if kind == 'ellipse':
        axes = (r * (1.0 + s), r / (1.0 + s)) + (r,) * (N - 2)
        predicate, extent = EllipsoidShape(axes), axes
        vol = omega * math.prod(axes)
    elif kind == 'fourier-perturbed-ball':
        mode = int(spec.params[0]) if spec.params else 3
        predicate = FourierShape(r, s, mode)
        extent = (r * (1.0 + s),) * 2
        vol = math.pi * r * r * (1.0 + s * s / 2.0)
    elif kind == 'ball-with-hole':
        predicate, extent = HoledBallShape(r, s * r), (r,) * N
        vol = omega * (r ** N) * (1.0 - s ** N)
    elif kind == 'ball-minus-cap':
        predicate, extent = CapCutShape(r, r * (1.0 - s)), (r,) * N
        vol = 1.0 - (_cap_volume(N, r, s * r) if s > 0 else 0.0)
    elif kind == 'rectangle':
        sides = (math.sqrt(s), 1.0 / math.sqrt(s)) + (1.0,) * (N - 2)
        half = tuple(0.5 * a for a in sides)
        predicate, extent = BoxShape(tuple(-a for a in half), half), half
        vol = math.prod(sides)
    elif kind == 'stadium':
        predicate = StadiumShape(r, s * r)
        extent = (r * (1.0 + s), r)
        vol = math.pi * r * r + 4.0 * s * r * r
    elif kind == 'shrunk-ball':
        predicate, extent = BallShape((1.0 - s) * r), (r,) * N
        vol = omega * ((1.0 - s) * r) ** N
    else:  # notched-ball
        predicate, extent = NotchedBallShape(r, s * r), (r,) * N
        vol = None

    domain = ImplicitDomain(N, predicate, tuple(-e for e in extent), tuple(extent), vol, f'{kind}(s={s:g})')
    if spec.should_normalize:
        domain = normalize_to_unit_volume(domain)
    return domain

#==============================================================================

# how to use this module
if __name__ == '__main__':
    logging.getLogger().setLevel(logging.INFO)
    spec = FamilySpec('ellipse', dimension=2)
    domain = make_family(spec, 0.2)
    raster = rasterize(domain, 1 / 128)
    print(f'{domain.label}: {raster.size} nodes, volume {volume(raster):.5f}')
