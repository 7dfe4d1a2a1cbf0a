from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln, jv, jvp, lpmv, spherical_jn

from SpecLab.Geometry.Geometry import unit_ball_radius
from SpecLab.Utility.Errors import OracleRangeError, OutsideReferenceBallError, ParameterRangeError

MAX_ORDER = 50
MAX_ZERO_INDEX = 50
MAX_SPECTRUM_COUNT = 200
SCAN_STEP = 0.1             # well below the smallest gap between consecutive zeros
BOUNDARY_LAYER = 1e-6       # 1 - |x|/R below which the ratio uses its boundary limit
RADIUS_SLACK = 1e-12

#----------------------------------------------

@lru_cache(maxsize=None)
def _zeros_of_order(nu):
    """First MAX_ZERO_INDEX positive zeros of J_nu: sign-change scan, then Brent refinement."""
    # J_nu is positive on (0, j_nu1) and j_nu1 > nu, so the scan starts at a positive value
    start = nu if nu > 0 else 0.5
    # McMahon: j_nu,m ~ (m + nu/2 - 1/4) pi
    stop = (MAX_ZERO_INDEX + nu / 2.0) * math.pi + 10.0
    zeros = []
    while len(zeros) < MAX_ZERO_INDEX:
        x = np.arange(start, stop, SCAN_STEP)
        values = jv(nu, x)
        crossings = np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)[0]
        for i in crossings:
            zeros.append(brentq(lambda t: jv(nu, t), x[i], x[i + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps))
            if len(zeros) == MAX_ZERO_INDEX:
                break
        start, stop = x[-1], stop + 20.0 * math.pi
    return tuple(zeros)


def bessel_zero(nu, m):
    """
    The m-th positive zero of J_nu.

    Args:
        nu (float): order, 0 <= nu <= 50
        m (int): zero index, 1 <= m <= 50

    Raises:
        OracleRangeError: outside the tabulated range
    """
    if not (0 <= nu <= MAX_ORDER) or int(m) != m or not (1 <= m <= MAX_ZERO_INDEX):
        raise OracleRangeError(f'Bessel zero j_({nu},{m}) outside the table: 0<=nu<={MAX_ORDER}, 1<=m<={MAX_ZERO_INDEX}')
    return _zeros_of_order(float(nu))[int(m) - 1]

#----------------------------------------------

@dataclass(frozen=True)
class BallMode:
    """
    One Dirichlet eigenfunction of the unit-volume ball.

    branch picks the member of a degenerate level: for N=2, 0 is cos(l*theta)
    and 1 is sin(l*theta); for N=3 it is the real spherical-harmonic order,
    -l..l (negative for sin, positive for cos).
    """
    l: int
    m: int
    dimension: int
    branch: int = 0

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ParameterRangeError(f'Dimension must be 2 or 3, got {self.dimension}')
        if self.l < 0 or self.m < 1:
            raise ParameterRangeError(f'Invalid mode (l={self.l}, m={self.m})')
        allowed = (0, 1) if self.dimension == 2 else range(-self.l, self.l + 1)
        if self.branch not in allowed or (self.dimension == 2 and self.l == 0 and self.branch != 0):
            raise ParameterRangeError(f'Invalid branch {self.branch} for mode (l={self.l}, m={self.m})')

    @property
    def order(self):
        return self.l + (self.dimension - 2) / 2.0

    @property
    def zero(self):
        return bessel_zero(self.order, self.m)

    @property
    def eigenvalue(self):
        return (self.zero / unit_ball_radius(self.dimension)) ** 2

    @property
    def multiplicity(self):
        if self.dimension == 2:
            return 1 if self.l == 0 else 2
        return 2 * self.l + 1


@dataclass(frozen=True)
class BallSpectrum:
    dimension: int
    eigenvalues: tuple
    modes: tuple

    def __len__(self):
        return len(self.eigenvalues)

    def as_array(self):
        return np.asarray(self.eigenvalues)

    def levels(self):
        """Distinct levels as (eigenvalue, multiplicity) pairs, truncated to the listed count."""
        out = []
        for lam, mode in zip(self.eigenvalues, self.modes):
            if out and out[-1][2] == (mode.l, mode.m):
                out[-1][1] += 1
            else:
                out.append([lam, 1, (mode.l, mode.m)])
        return [(lam, count) for lam, count, _ in out]


def _branches(l, dimension):
    if dimension == 2:
        return (0,) if l == 0 else (0, 1)
    return tuple(range(-l, l + 1))


@lru_cache(maxsize=None)
def ball_spectrum(dimension, k):
    """
    The first k Dirichlet eigenvalues of the unit-volume ball, repeated with multiplicity.

    Levels are enumerated over growing (l, m) boxes until no unlisted mode can
    fall below the k-th value.
    """
    if dimension not in (2, 3):
        raise ParameterRangeError(f'Dimension must be 2 or 3, got {dimension}')
    if not (1 <= k <= MAX_SPECTRUM_COUNT):
        raise ParameterRangeError(f'k must be in 1..{MAX_SPECTRUM_COUNT}, got {k}')
    shift = (dimension - 2) / 2.0
    l_max = m_max = 8
    while True:
        levels = [(bessel_zero(l + shift, m), l, m) for l in range(l_max + 1) for m in range(1, m_max + 1)]
        levels.sort()
        flat = [(z, l, m, b) for z, l, m in levels for b in _branches(l, dimension)]
        if len(flat) >= k:
            threshold = flat[k - 1][0]
            if threshold < min(bessel_zero(l_max + 1 + shift, 1), bessel_zero(shift, m_max + 1)):
                break
        if l_max + 8 > MAX_ORDER or m_max + 8 >= MAX_ZERO_INDEX:
            raise OracleRangeError(f'ball_spectrum({dimension}, {k}) needs zeros beyond the table')
        l_max += 8
        m_max += 8
    r = unit_ball_radius(dimension)
    flat = flat[:k]
    eigenvalues = tuple((z / r) ** 2 for z, _, _, _ in flat)
    modes = tuple(BallMode(l, m, dimension, b) for _, l, m, b in flat)
    return BallSpectrum(dimension, eigenvalues, modes)


def concentric_ball_spectrum(dimension, k, offset):
    """λ_j(B_γ) = λ_j(B)·(r_N/(r_N+γ))², from the scaling law."""
    r = unit_ball_radius(dimension)
    if not r + offset > 0:
        raise ParameterRangeError(f'Offset {offset} leaves a non-positive radius')
    return ball_spectrum(dimension, k).as_array() * (r / (r + offset)) ** 2


def box_spectrum(sides, k):
    """First k values of π²·Σ(n_i/a_i)², n_i >= 1, with multiplicity."""
    sides = np.asarray(sides, dtype=float)
    if np.any(sides <= 0):
        raise ParameterRangeError(f'Sides must be positive, got {sides.tolist()}')
    n = np.arange(1, k + 1)
    grids = np.meshgrid(*([n] * len(sides)), indexing='ij')
    values = math.pi ** 2 * sum((g / a) ** 2 for g, a in zip(grids, sides))
    return np.sort(values.ravel())[:k]


def rectangle_spectrum(a, b, k):
    return box_spectrum((a, b), k)

#----------------------------------------------

def _polar(x, dimension):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[-1] != dimension:
        raise ParameterRangeError(f'Points must have {dimension} coordinates')
    r = np.sqrt(np.sum(x * x, axis=-1))
    R = unit_ball_radius(dimension)
    if np.any(r > R * (1.0 + RADIUS_SLACK)):
        raise OutsideReferenceBallError(f'Point at radius {r.max():.6g} outside the ball of radius {R:.6g}')
    return x, np.minimum(r / R, 1.0), R


def _angular(mode, x, r):
    """Angular factor, normalized to unit L² norm on the circle or the sphere."""
    l, b = mode.l, mode.branch
    phi = np.arctan2(x[:, 1], x[:, 0])
    if mode.dimension == 2:
        norm = math.sqrt(2.0 * math.pi) if l == 0 else math.sqrt(math.pi)
        return (np.sin(l * phi) if b == 1 else np.cos(l * phi)) / norm
    a = abs(b)
    safe = np.where(r > 0, r, 1.0)
    cos_theta = np.where(r > 0, x[:, 2] / safe, 1.0)
    K = math.sqrt((2 * l + 1) / (4 * math.pi) * math.exp(gammaln(l - a + 1) - gammaln(l + a + 1)))
    legendre = lpmv(a, l, np.clip(cos_theta, -1.0, 1.0))
    # undo the Condon-Shortley phase so the m>0 harmonics are positive near the pole
    legendre = legendre * (-1) ** a
    if b == 0:
        return K * legendre
    trig = np.cos(a * phi) if b > 0 else np.sin(a * phi)
    return math.sqrt(2.0) * K * legendre * trig


def _radial(mode, rho):
    z = mode.zero
    if mode.dimension == 2:
        return jv(mode.l, z * rho)
    return spherical_jn(mode.l, z * rho)


def _radial_norm(mode):
    """c with c²·∫_0^R f(r/R)² r^(N-1) dr = 1."""
    R = unit_ball_radius(mode.dimension)
    z = mode.zero
    if mode.dimension == 2:
        return 1.0 / (R * abs(jv(mode.l + 1, z)) / math.sqrt(2.0))
    return 1.0 / math.sqrt(R ** 3 * spherical_jn(mode.l + 1, z) ** 2 / 2.0)


def ball_eigenfunction(mode, x):
    """
    L²-normalized eigenfunction of the unit-volume ball at x.

    Args:
        mode (BallMode): the mode
        x (array): a point (N,) or points (P, N) in the closed ball

    Returns:
        float or array of values.

    Raises:
        OutsideReferenceBallError: for points outside the closed ball
    """
    single = np.ndim(x) == 1
    x, rho, _ = _polar(x, mode.dimension)
    values = _radial_norm(mode) * _radial(mode, rho) * _angular(mode, x, rho)
    values = np.where(rho >= 1.0, 0.0, values)
    return float(values[0]) if single else values


def _radial_slope(mode):
    """d/dρ of the radial profile at ρ = 1."""
    z = mode.zero
    if mode.dimension == 2:
        return z * jvp(mode.l, z)
    return z * spherical_jn(mode.l, z, derivative=True)


def boundary_ratio(mode):
    """Limit of the radial part of v_j/v_1 at the sphere (ratio of normal derivatives)."""
    first = BallMode(0, 1, mode.dimension)
    return (_radial_norm(mode) * _radial_slope(mode)) / (_radial_norm(first) * _radial_slope(first))


def eigenfunction_ratio(mode, x, radius=None):
    """
    v_j(x)/v_1(x), continued to the sphere by the ratio of normal derivatives.

    With radius given, the ratio is taken for the concentric ball of that
    radius, i.e. evaluated at x·r_N/radius.
    """
    single = np.ndim(x) == 1
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if radius is not None:
        x = x * (unit_ball_radius(mode.dimension) / radius)
    x, rho, _ = _polar(x, mode.dimension)
    first = BallMode(0, 1, mode.dimension)
    angular = _angular(mode, x, rho) / _angular(first, x, rho)
    interior = 1.0 - rho > BOUNDARY_LAYER
    safe = np.where(interior, rho, 0.5)
    radial = (_radial_norm(mode) * _radial(mode, safe)) / (_radial_norm(first) * _radial(first, safe))
    radial = np.where(interior, radial, boundary_ratio(mode))
    values = angular * radial
    return float(values[0]) if single else values

#==============================================================================

# how to use this module
if __name__ == '__main__':
    logging.getLogger().setLevel(logging.INFO)
    spectrum = ball_spectrum(2, 6)
    for lam, mode in zip(spectrum.eigenvalues, spectrum.modes):
        print(f'l={mode.l} m={mode.m} branch={mode.branch}: {lam:.6f}')
