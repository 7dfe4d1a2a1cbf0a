from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.spatial import KDTree

from SpecLab.BallOracle.BallOracle import ball_spectrum, eigenfunction_ratio
from SpecLab.Eigensolver.Eigensolver import assemble, node_energy_density, rayleigh_quotient
from SpecLab.Geometry.Geometry import DEFAULT_NODE_BUDGET, PADDING_NODES, RasterDomain, unit_ball_radius
from SpecLab.Utility.Errors import (DegenerateSpanError, EmptyShellError, GridExtentError,
                                    OutsideReferenceBallError, ParameterRangeError)

DEFAULT_ALPHA = {2: 0.45, 3: 0.30}
ALPHA_LIMIT = {2: 0.5, 3: 1.0 / 3.0}
MIN_SHELL_SAMPLES = 32
MIN_SPAN_SINGULAR_VALUE = 0.5

#----------------------------------------------

@dataclass(frozen=True)
class SurgeryConfig:
    """
    Args:
        dimension (int): 2 or 3
        alpha (float): collar exponent, 0 < alpha < 1/2 (N=2) or 1/3 (N=3); None for 0.45 / 0.30
        n (int): the selected radius lies below n·ε^α
        delta (float): hat thickness; None for ε^α
        samples (int): sample radii per shell, at least 32
    """
    dimension: int = 2
    alpha: Optional[float] = None
    n: int = 1
    delta: Optional[float] = None
    samples: int = MIN_SHELL_SAMPLES

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ParameterRangeError(f'Dimension must be 2 or 3, got {self.dimension}')
        if self.alpha is None:
            object.__setattr__(self, 'alpha', DEFAULT_ALPHA[self.dimension])
        limit = ALPHA_LIMIT[self.dimension]
        if not (0 < self.alpha < limit):
            raise ParameterRangeError(f'alpha must lie in (0, {limit:.4g}) for N={self.dimension}, got {self.alpha}')
        if int(self.n) != self.n or self.n < 1:
            raise ParameterRangeError(f'n must be a positive integer, got {self.n}')
        if self.delta is not None and not self.delta > 0:
            raise ParameterRangeError(f'delta must be positive, got {self.delta}')
        if self.samples < MIN_SHELL_SAMPLES:
            raise ParameterRangeError(f'At least {MIN_SHELL_SAMPLES} shell samples are needed, got {self.samples}')

    def width(self, eps):
        return eps ** self.alpha

    def thickness(self, eps):
        return self.width(eps) if self.delta is None else self.delta


@dataclass(frozen=True, eq=False)
class ShellScanResult:
    t_bar: float
    shell_index: int
    offsets: np.ndarray             # sampled t, length S
    surface_energy: np.ndarray      # (k, S): ∫_{S_t} |Du_j|²
    surface_measure: np.ndarray     # (S,):   H^{N-1}(S_t)
    surface_mass: np.ndarray        # (k, S): ∫_{S_t} u_j²
    exterior_energy: np.ndarray     # (k,) beyond R + t̄
    exterior_mass: np.ndarray
    outside_ball_energy: np.ndarray
    total_energy: np.ndarray
    inner_energy: np.ndarray        # beyond R + i·ε^α
    gamma: float
    theta: float
    theta_bound: float
    eps: float
    alpha: float


@dataclass(frozen=True, eq=False)
class SurgeryOutput:
    """A modified raster, the competitor functions on it (M, k) and their Gram data."""
    raster: RasterDomain
    functions: np.ndarray
    rayleigh: np.ndarray
    gram_l2: np.ndarray
    gram_energy: np.ndarray
    ritz_values: np.ndarray
    diagnostics: dict = field(default_factory=dict)

#----------------------------------------------

def _effective_exponent(value, eps):
    if value <= 0:
        return math.inf
    if not 0 < eps < 1:
        return math.nan
    return math.log(value) / math.log(eps)


def _median_scale(values):
    med = np.median(values, axis=-1, keepdims=True)
    peak = np.max(values, axis=-1, keepdims=True)
    return np.where(med > 0, med, np.where(peak > 0, peak, 1.0))


def _grid_extent(raster):
    """Largest distance from the origin of any node of the raster's grid."""
    lo = np.abs(np.asarray(raster.origin_index, dtype=float))
    hi = np.abs(np.asarray(raster.origin_index, dtype=float) + np.asarray(raster.shape) - 1)
    return float(np.linalg.norm(np.maximum(lo, hi))) * raster.h


def _lipschitz_estimate(raster, values):
    """Largest difference quotient of values across grid edges joining two interior nodes."""
    grid = raster.to_grid(values)
    largest = 0.0
    for axis in range(raster.dimension):
        both = np.logical_and(np.delete(raster.mask, 0, axis), np.delete(raster.mask, -1, axis))
        jump = np.abs(np.diff(grid, axis=axis))[both]
        if jump.size:
            largest = max(largest, float(jump.max()) / raster.h)
    return largest


def shell_scan(raster, spectrum, cfg, eps, i=None):
    """
    Samples the shell t in (i·ε^α, (i+1)·ε^α) and picks t̄.

    For every sampled t the spheres S_t = Ω ∩ ∂B_{R+t} are read off the raster
    as the nodes outside B within h/2 of radius R+t, and three surface integrals are
    formed per eigenfunction. t̄ minimizes the largest of them after each is
    divided by its median over the shell. Offsets below h are not sampled: the
    discrete sphere of such a radius still holds nodes of B.

    Raises:
        EmptyShellError: if the shell lies beyond the grid or is thinner than h
    """
    if not eps > 0:
        raise ParameterRangeError(f'eps must be positive, got {eps}')
    i = cfg.n - 1 if i is None else int(i)
    if i < 0:
        raise ParameterRangeError(f'Shell index must be non-negative, got {i}')
    N, h = raster.dimension, raster.h
    R = unit_ball_radius(N)
    w = cfg.width(eps)
    if R + i * w >= _grid_extent(raster):
        raise EmptyShellError(f'Shell {i} at radius {R + i * w:.4g} lies outside the grid of {raster.label}')

    lo, hi = max(i * w, h), (i + 1) * w
    if hi <= lo:
        raise EmptyShellError(f'Shell {i} of width {w:.4g} ends below the grid spacing {h:g}')
    offsets = lo + (np.arange(cfg.samples) + 0.5) / cfg.samples * (hi - lo)
    radius = np.linalg.norm(raster.points(), axis=1)
    u = spectrum.eigenvectors
    k = u.shape[1]
    density = np.array([node_energy_density(raster, u[:, j]) for j in range(k)])
    weight = h ** N

    surface_energy = np.zeros((k, len(offsets)))
    surface_mass = np.zeros((k, len(offsets)))
    surface_measure = np.zeros(len(offsets))
    for s, t in enumerate(offsets):
        # S_t lies outside B for t > 0
        shell = (np.abs(radius - (R + t)) < h / 2) & (radius >= R)
        surface_measure[s] = np.count_nonzero(shell) * weight / h
        surface_energy[:, s] = density[:, shell].sum(axis=1) * weight / h
        surface_mass[:, s] = (u[shell] ** 2).sum(axis=0) * weight / h

    score = np.max(np.stack([
        surface_energy / _median_scale(surface_energy),
        surface_mass / _median_scale(surface_mass),
        np.broadcast_to(surface_measure / _median_scale(surface_measure), surface_mass.shape),
    ]), axis=(0, 1))
    best = int(np.argmin(score))
    t_bar = float(offsets[best])

    def beyond(r0):
        outside = radius >= r0
        return density[:, outside].sum(axis=1) * weight, (u[outside] ** 2).sum(axis=0) * weight

    exterior_energy, exterior_mass = beyond(R + t_bar)
    inner_energy, _ = beyond(R + i * w)
    outside_ball_energy, _ = beyond(R)
    gamma = _effective_exponent(float(inner_energy.max()), eps)
    theta = _effective_exponent(float(surface_mass[:, best].max()), eps)
    theta_bound = (2.0 - 3.0 * cfg.alpha + gamma) if N == 2 else (1.0 - cfg.alpha)
    logging.info(f'Shell scan on {raster.label}: eps={eps:.4g}, t_bar={t_bar:.5g}, gamma={gamma:.3g}, theta={theta:.3g}')
    return ShellScanResult(t_bar, i, offsets, surface_energy, surface_measure, surface_mass, exterior_energy,
                           exterior_mass, outside_ball_energy, density.sum(axis=1) * weight, inner_energy,
                           gamma, theta, theta_bound, float(eps), cfg.alpha)

#----------------------------------------------

def evaluate_competitors(raster, functions, diagnostics=None):
    """Rayleigh quotients, Gram matrices and Rayleigh-Ritz values of trial functions (M, k) on a raster."""
    functions = np.asarray(functions, dtype=float).reshape(raster.size, -1)
    op = assemble(raster)
    rayleigh = np.array([rayleigh_quotient(raster, functions[:, j], op) for j in range(functions.shape[1])])
    weight = raster.h ** raster.dimension
    gram_l2 = functions.T @ functions * weight
    gram_energy = functions.T @ (op.matrix @ functions) * weight
    try:
        ritz = scipy.linalg.eigh(gram_energy, gram_l2, eigvals_only=True)
    except np.linalg.LinAlgError:
        ritz = np.full(functions.shape[1], np.nan)
    return SurgeryOutput(raster, functions, rayleigh, gram_l2, gram_energy, ritz, dict(diagnostics or {}))


def hat_extension(raster, spectrum, t_bar, delta, node_budget=DEFAULT_NODE_BUDGET):
    """
    Ω̂ = (Ω ∩ B_{R+t̄}) ∪ Q with the eigenfunctions decaying linearly across Q.

    Q holds the lattice nodes at radius R+t̄ <= ρ < R+t̄+δ whose radial
    projection onto the sphere of radius R+t̄ lies within one spacing of a
    node of S_t̄ (the nodes of Ω outside B within h/2 of that sphere, as in
    shell_scan); the trace u_j(t̄θ) is read at the closest such node. An
    empty S_t̄ gives an empty Q, so Ω̂ = Ω and û = u whenever Ω ⊆ B_{R+t̄}.
    The result lives on a lattice box grown to contain B_{R+t̄+δ}.

    Raises:
        GridExtentError: if the grown grid exceeds node_budget
    """
    if not (t_bar > 0 and delta > 0):
        raise ParameterRangeError(f't_bar and delta must be positive, got {t_bar}, {delta}')
    N, h = raster.dimension, raster.h
    R = unit_ball_radius(N)
    inner_radius = R + t_bar
    outer_radius = inner_radius + delta
    need = int(math.ceil(outer_radius / h)) + PADDING_NODES
    lo = np.minimum(raster.origin_index, -need)
    hi = np.maximum(np.asarray(raster.origin_index) + np.asarray(raster.shape) - 1, need)
    shape = tuple(int(n) for n in hi - lo + 1)
    if math.prod(shape) > node_budget:
        raise GridExtentError(f'R+t_bar+delta={outer_radius:.4g} needs {math.prod(shape)} grid nodes, budget is {node_budget}')

    big = raster.embed(tuple(lo), shape)
    points = big.grid_points()
    r = np.linalg.norm(points, axis=-1)
    keep = big.mask & (r < inner_radius)
    band = np.argwhere((r >= inner_radius) & (r < outer_radius))
    band_r = r[tuple(band.T)]
    shell = np.argwhere(big.mask & (np.abs(r - inner_radius) < h / 2) & (r >= R))
    if len(shell) and len(band):
        # lattice index coordinates of the projections onto the sphere
        projection = points[tuple(band.T)] * (inner_radius / band_r)[:, None] / h - lo
        distance, found = KDTree(shell).query(projection, distance_upper_bound=1.0)
        hit = np.isfinite(distance)
        band, band_r, nearest = band[hit], band_r[hit], shell[found[hit]]
    else:
        band, band_r, nearest = band[:0], band_r[:0], band[:0]

    mask = keep.copy()
    mask[tuple(band.T)] = True
    hat = RasterDomain(N, h, tuple(lo), mask, f'{raster.label} hat')
    ramp = 1.0 - (band_r - inner_radius) / delta
    u = spectrum.eigenvectors
    functions = np.empty((hat.size, u.shape[1]))
    for j in range(u.shape[1]):
        original = big.to_grid(u[:, j])
        grid = np.where(keep, original, 0.0)
        grid[tuple(band.T)] = original[tuple(nearest.T)] * ramp
        functions[:, j] = hat.from_grid(grid)
    logging.info(f'Hat extension of {raster.label}: t_bar={t_bar:.4g}, delta={delta:.4g}, {len(band)} collar nodes')
    return evaluate_competitors(hat, functions, {'t_bar': float(t_bar), 'delta': float(delta), 'collar_nodes': len(band)})


def radial_profile(r, dimension, cfg, eps):
    """ρ(r): 1 up to R + n·ε^α, then a linear ramp of width ε^α down to 0."""
    w = cfg.width(eps)
    start = unit_ball_radius(dimension) + cfg.n * w
    return np.clip(1.0 - (np.asarray(r, dtype=float) - start) / w, 0.0, 1.0)


def radial_cutoff(raster, u1, cfg, eps):
    """
    ũ = u_1·ρ(|x|) on Ω̃ = Ω ∩ B_{R+(n+1)ε^α}.

    Also measures ∫|Du_1|² and ∫u_1² over Ω outside B_{R+nε^α}; the mass is
    expected to decay at least like ε^(1+α(3-N)^+).
    """
    if not eps > 0:
        raise ParameterRangeError(f'eps must be positive, got {eps}')
    N, h = raster.dimension, raster.h
    R = unit_ball_radius(N)
    w = cfg.width(eps)
    u1 = np.asarray(u1, dtype=float)
    radius = np.linalg.norm(raster.points(), axis=1)
    keep = radius < R + (cfg.n + 1) * w
    mask = raster.mask.copy()
    mask[raster.mask] = keep
    cut = raster.with_mask(mask, f'{raster.label} cutoff')
    outer = radius >= R + cfg.n * w
    weight = h ** N
    diagnostics = {
        'outer_energy': float(node_energy_density(raster, u1)[outer].sum() * weight),
        'outer_mass': float((u1[outer] ** 2).sum() * weight),
        'mass_exponent_bound': 1.0 + cfg.alpha * max(3 - N, 0),
    }
    functions = (u1 * radial_profile(radius, N, cfg, eps))[keep]
    return evaluate_competitors(cut, functions[:, None], diagnostics)


def ratio_competitors(rasterE, u1, k, radius=None):
    """
    ṽ_j = (v_j/v_1)·u_1 for the first k ball modes.

    radius selects a larger concentric reference ball B_c containing E.

    Raises:
        OutsideReferenceBallError: if a node of E lies outside the reference ball
        DegenerateSpanError: if the L² Gram matrix has a singular value below 1/2
    """
    N = rasterE.dimension
    r_N = unit_ball_radius(N)
    reference = r_N if radius is None else float(radius)
    points = rasterE.points()
    largest = float(np.linalg.norm(points, axis=1).max())
    if largest > reference * (1.0 + 1e-12):
        raise OutsideReferenceBallError(f'{rasterE.label} reaches radius {largest:.6g} beyond the reference ball {reference:.6g}')
    u1 = np.asarray(u1, dtype=float)
    spectrum = ball_spectrum(N, k)
    ratios = np.column_stack([eigenfunction_ratio(mode, points, radius=reference) for mode in spectrum.modes])
    output = evaluate_competitors(rasterE, ratios * u1[:, None], {
        'reference_radius': reference,
        'reference_eigenvalues': spectrum.as_array() * (r_N / reference) ** 2,
        'ratio_sup': np.max(np.abs(ratios), axis=0),
        'ratio_lipschitz': np.array([_lipschitz_estimate(rasterE, ratios[:, j]) for j in range(k)]),
    })
    sigma_min = float(scipy.linalg.svdvals(output.gram_l2).min())
    output.diagnostics['sigma_min'] = sigma_min
    if sigma_min < MIN_SPAN_SINGULAR_VALUE:
        raise DegenerateSpanError(f'L2 Gram of the ratio competitors has smallest singular value {sigma_min:.3g}', sigma_min)
    return output
