import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import jn_zeros

from SpecLab.BallOracle import BallOracle as bo
from SpecLab.Geometry.Geometry import unit_ball_radius
from SpecLab.Utility.Errors import OracleRangeError, OutsideReferenceBallError, ParameterRangeError


@pytest.mark.parametrize('nu, m, expected', [
    (0, 1, 2.4048255577),
    (1, 1, 3.8317059702),
    (0, 2, 5.5200781103),
    (0.5, 1, math.pi),
    (0.5, 3, 3 * math.pi),
])
def test_known_zeros(nu, m, expected):
    assert bo.bessel_zero(nu, m) == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize('n', [0, 1, 2, 5, 17, 30])
def test_zeros_match_scipy(n):
    ours = np.array([bo.bessel_zero(n, m) for m in range(1, 51)])
    assert_allclose(ours, jn_zeros(n, 50), rtol=0, atol=1e-9)


def test_interlacing():
    for nu in np.arange(0.0, 49.5, 0.5):
        for m in range(1, 50):
            assert bo.bessel_zero(nu, m) < bo.bessel_zero(nu + 1, m) < bo.bessel_zero(nu, m + 1)


@pytest.mark.parametrize('nu, m', [(51, 1), (0, 51), (0, 0), (-1, 1), (1, 1.5)])
def test_zero_out_of_range(nu, m):
    with pytest.raises(OracleRangeError):
        bo.bessel_zero(nu, m)


def test_disk_spectrum():
    spectrum = bo.ball_spectrum(2, 6)
    lam = spectrum.as_array()
    assert lam[0] == pytest.approx(18.1684, rel=1e-4)
    assert lam[1] == pytest.approx(46.125, rel=1e-4)
    assert lam[2] == lam[1]
    assert lam[1] / lam[0] == pytest.approx(2.5387, rel=1e-4)
    assert lam[0] == pytest.approx(math.pi * bo.bessel_zero(0, 1) ** 2, rel=1e-12)
    assert [(m.l, m.m) for m in spectrum.modes[:3]] == [(0, 1), (1, 1), (1, 1)]
    assert spectrum.levels()[:2] == [(lam[0], 1), (lam[1], 2)]


def test_ball_spectrum_3d():
    lam = bo.ball_spectrum(3, 4).as_array()
    assert lam[0] == pytest.approx(math.pi ** 2 * (4 * math.pi / 3) ** (2 / 3), rel=1e-10)
    assert lam[0] == pytest.approx(25.646, rel=1e-4)
    assert lam[1] == lam[2] == lam[3]
    assert bo.BallMode(1, 1, 3).multiplicity == 3


@pytest.mark.parametrize('dimension', [2, 3])
def test_spectrum_is_sorted_with_multiplicity(dimension):
    spectrum = bo.ball_spectrum(dimension, 200)
    lam = spectrum.as_array()
    assert len(lam) == 200
    assert np.all(np.diff(lam) >= 0)
    for mode, value in zip(spectrum.modes, lam):
        assert mode.eigenvalue == pytest.approx(value, rel=1e-12)
    # every complete level appears exactly multiplicity times
    for value, count in spectrum.levels()[:-1]:
        mode = spectrum.modes[list(lam).index(value)]
        assert count == mode.multiplicity


def test_spectrum_range():
    with pytest.raises(ParameterRangeError):
        bo.ball_spectrum(2, 201)
    with pytest.raises(ParameterRangeError):
        bo.ball_spectrum(4, 1)


def test_rectangle_and_box_spectra():
    pi2 = math.pi ** 2
    assert bo.rectangle_spectrum(1, 1, 1)[0] == pytest.approx(2 * pi2)
    assert_allclose(bo.rectangle_spectrum(1, 1, 3), [2 * pi2, 5 * pi2, 5 * pi2])
    assert bo.rectangle_spectrum(2, 0.5, 1)[0] == pytest.approx(4.25 * pi2)
    assert bo.box_spectrum((1, 1, 1), 1)[0] == pytest.approx(3 * pi2)
    assert_allclose(bo.concentric_ball_spectrum(2, 3, 0.0), bo.ball_spectrum(2, 3).as_array())
    r = unit_ball_radius(2)
    assert bo.concentric_ball_spectrum(2, 1, r)[0] == pytest.approx(bo.ball_spectrum(2, 1).eigenvalues[0] / 4)


def _disk_quadrature(n_r=60, n_phi=64):
    R = unit_ball_radius(2)
    t, w = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * R * (t + 1)
    wr = 0.5 * R * w * r
    phi = 2 * math.pi * np.arange(n_phi) / n_phi
    rr, pp = np.meshgrid(r, phi, indexing='ij')
    points = np.stack([rr * np.cos(pp), rr * np.sin(pp)], axis=-1).reshape(-1, 2)
    weights = (wr[:, None] * np.full(n_phi, 2 * math.pi / n_phi)[None, :]).ravel()
    return points, weights


def _ball_quadrature(n_r=40, n_theta=30, n_phi=32):
    R = unit_ball_radius(3)
    t, w = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * R * (t + 1)
    wr = 0.5 * R * w * r * r
    c, wc = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * math.pi * np.arange(n_phi) / n_phi
    rr, cc, pp = np.meshgrid(r, c, phi, indexing='ij')
    ss = np.sqrt(1 - cc * cc)
    points = np.stack([rr * ss * np.cos(pp), rr * ss * np.sin(pp), rr * cc], axis=-1).reshape(-1, 3)
    weights = (wr[:, None, None] * wc[None, :, None] * np.full(n_phi, 2 * math.pi / n_phi)[None, None, :]).ravel()
    return points, weights


@pytest.mark.parametrize('mode', [
    bo.BallMode(0, 1, 2), bo.BallMode(1, 1, 2, 0), bo.BallMode(1, 1, 2, 1),
    bo.BallMode(2, 1, 2, 1), bo.BallMode(0, 2, 2),
])
def test_disk_eigenfunctions_are_normalized(mode):
    points, weights = _disk_quadrature()
    v = bo.ball_eigenfunction(mode, points)
    assert np.sum(v * v * weights) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize('mode', [
    bo.BallMode(0, 1, 3), bo.BallMode(1, 1, 3, -1), bo.BallMode(1, 1, 3, 0),
    bo.BallMode(1, 1, 3, 1), bo.BallMode(2, 1, 3, 2),
])
def test_ball_eigenfunctions_are_normalized(mode):
    points, weights = _ball_quadrature()
    v = bo.ball_eigenfunction(mode, points)
    assert np.sum(v * v * weights) == pytest.approx(1.0, abs=1e-6)


def test_degenerate_branches_are_orthogonal():
    points, weights = _disk_quadrature()
    a = bo.ball_eigenfunction(bo.BallMode(1, 1, 2, 0), points)
    b = bo.ball_eigenfunction(bo.BallMode(1, 1, 2, 1), points)
    assert abs(np.sum(a * b * weights)) < 1e-10


@pytest.mark.parametrize('mode', [bo.BallMode(0, 1, 2), bo.BallMode(2, 1, 2, 1), bo.BallMode(1, 1, 3, 1)])
def test_eigenfunctions_solve_the_equation(mode):
    N = mode.dimension
    R = unit_ball_radius(N)
    x = np.array([0.2, -0.15, 0.1][:N]) * R / 0.5
    step = 1e-3
    v0 = bo.ball_eigenfunction(mode, x)
    laplacian = sum(bo.ball_eigenfunction(mode, x + step * e) + bo.ball_eigenfunction(mode, x - step * e) - 2 * v0
                    for e in np.eye(N)) / step ** 2
    assert -laplacian == pytest.approx(mode.eigenvalue * v0, rel=1e-4)


def test_first_eigenfunction_boundary_and_center():
    mode = bo.BallMode(0, 1, 2)
    R = unit_ball_radius(2)
    assert bo.ball_eigenfunction(mode, np.array([R, 0.0])) == pytest.approx(0.0, abs=1e-12)
    center = bo.ball_eigenfunction(mode, np.zeros(2))
    assert center > 0
    samples = np.random.default_rng(0).uniform(-R, R, (2000, 2)) / math.sqrt(2)
    assert np.all(bo.ball_eigenfunction(mode, samples) <= center)


def test_eigenfunction_outside_ball():
    with pytest.raises(OutsideReferenceBallError):
        bo.ball_eigenfunction(bo.BallMode(0, 1, 2), np.array([1.0, 0.0]))


def test_ratio_of_first_mode_is_one():
    first = bo.BallMode(0, 1, 2)
    R = unit_ball_radius(2)
    points = np.array([[0.0, 0.0], [0.3, 0.1], [R, 0.0], [0.0, -R]])
    assert_allclose(bo.eigenfunction_ratio(first, points), 1.0, rtol=1e-12)


@pytest.mark.parametrize('dimension', [2, 3])
def test_ratio_vanishes_at_center_for_l1(dimension):
    assert bo.eigenfunction_ratio(bo.BallMode(1, 1, dimension, 0), np.zeros(dimension)) == pytest.approx(0.0, abs=1e-15)


def test_ratio_is_bounded_and_continuous_at_the_sphere():
    mode = bo.BallMode(1, 1, 2, 0)
    R = unit_ball_radius(2)
    rng = np.random.default_rng(2)
    radius = R * np.sqrt(rng.uniform(0, 1, 10_000))
    angle = rng.uniform(0, 2 * math.pi, 10_000)
    points = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=-1)
    ratio = bo.eigenfunction_ratio(mode, points)
    assert np.all(np.isfinite(ratio))
    near = bo.eigenfunction_ratio(mode, np.array([R * (1 - 1e-4), 0.0]))
    on = bo.eigenfunction_ratio(mode, np.array([R * (1 - 1e-8), 0.0]))
    assert on == pytest.approx(near, rel=1e-2)
    assert on == pytest.approx(bo.boundary_ratio(mode) * math.sqrt(2), rel=1e-12)


def _ratio_on_grid(mode, steps):
    """The ratio at the nodes of a cube lattice of spacing R/steps; NaN outside the closed ball."""
    R = unit_ball_radius(mode.dimension)
    H = R / steps
    axis = np.arange(-steps, steps + 1) * H
    grid = np.stack(np.meshgrid(*([axis] * mode.dimension), indexing='ij'), axis=-1)
    inside = np.linalg.norm(grid, axis=-1) <= R
    values = np.full(inside.shape, np.nan)
    values[inside] = bo.eigenfunction_ratio(mode, grid[inside])
    return values, H


def _difference_quotient(values, H):
    return max(np.nanmax(np.abs(np.diff(values, axis=a))) / H for a in range(values.ndim))


@pytest.mark.parametrize('j', range(20))
@pytest.mark.parametrize('dimension, steps', [(2, 50), (3, 20)])
def test_ratio_is_lipschitz_for_every_mode(dimension, steps, j):
    mode = bo.ball_spectrum(dimension, 20).modes[j]
    coarse, H = _ratio_on_grid(mode, steps)
    fine, _ = _ratio_on_grid(mode, 2 * steps)
    for values in (coarse, fine):
        assert np.all(np.isfinite(values[~np.isnan(values)]))
    sup, sup_fine = np.nanmax(np.abs(coarse)), np.nanmax(np.abs(fine))
    assert sup < 1e3
    assert sup_fine <= 1.5 * sup + 1e-12
    # a singular ratio would roughly double its difference quotient here
    lip, lip_fine = _difference_quotient(coarse, H), _difference_quotient(fine, H / 2)
    assert np.isfinite(lip_fine)
    assert lip_fine <= 1.5 * lip + 1e-12


@pytest.mark.parametrize('j', range(20))
@pytest.mark.parametrize('dimension', [2, 3])
def test_ratio_is_continuous_at_the_sphere_for_every_mode(dimension, j):
    mode = bo.ball_spectrum(dimension, 20).modes[j]
    R = unit_ball_radius(dimension)
    direction = np.array([math.cos(0.3), math.sin(0.3), 0.5][:dimension])
    direction /= np.linalg.norm(direction)
    on = bo.eigenfunction_ratio(mode, R * direction)
    near = bo.eigenfunction_ratio(mode, R * (1 - 1e-5) * direction)
    assert math.isfinite(on)
    assert near == pytest.approx(on, abs=1e-2)
