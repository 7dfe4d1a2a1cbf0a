import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from SpecLab.BallOracle import BallOracle as bo
from SpecLab.Eigensolver import Eigensolver as es
from SpecLab.Geometry import Geometry as geo
from SpecLab.Surgery import Surgery as su
from SpecLab.Utility.Errors import (DegenerateSpanError, EmptyShellError, OutsideReferenceBallError,
                                    ParameterRangeError)

R2 = geo.unit_ball_radius(2)
EPS = 0.05


def _solved(domain, h, k):
    raster = geo.rasterize(domain, h)
    return raster, es.lowest_eigenpairs(es.assemble(raster), k)


@pytest.fixture(scope='module')
def ball_spectrum_1_32():
    return _solved(geo.ConcentricBall(2).domain(), 1 / 32, 3)


@pytest.fixture(scope='module')
def ellipse_spectrum_1_32():
    return _solved(geo.make_family(geo.FamilySpec('ellipse'), 0.1), 1 / 32, 3)


def test_config_defaults_and_limits():
    assert su.SurgeryConfig().alpha == 0.45
    assert su.SurgeryConfig(dimension=3).alpha == 0.30
    assert su.SurgeryConfig(alpha=0.2).thickness(0.25) == pytest.approx(0.25 ** 0.2)
    assert su.SurgeryConfig(alpha=0.2, delta=0.1).thickness(0.25) == 0.1
    for kwargs in ({'alpha': 0.6}, {'dimension': 3, 'alpha': 0.34}, {'alpha': 0.0},
                   {'samples': 10}, {'n': 0}, {'delta': -1.0}, {'dimension': 4}):
        with pytest.raises(ParameterRangeError):
            su.SurgeryConfig(**kwargs)


def test_radial_profile():
    cfg = su.SurgeryConfig(alpha=0.25)
    w = cfg.width(0.0625)
    assert w == pytest.approx(0.5)
    r = np.array([0.0, R2 + w, R2 + 1.5 * w, R2 + 2 * w, 3.0])
    assert_allclose(su.radial_profile(r, 2, cfg, 0.0625), [1.0, 1.0, 0.5, 0.0, 0.0], atol=1e-12)


def test_shell_scan_on_the_ball(ball_spectrum_1_32):
    raster, spectrum = ball_spectrum_1_32
    cfg = su.SurgeryConfig()
    scan = su.shell_scan(raster, spectrum, cfg, EPS)
    assert len(scan.offsets) == cfg.samples
    assert 0 < scan.t_bar < cfg.width(EPS)
    # nothing of the ball lies outside it
    for values in (scan.surface_energy, scan.surface_mass, scan.surface_measure,
                   scan.exterior_energy, scan.exterior_mass, scan.outside_ball_energy, scan.inner_energy):
        assert np.all(values == 0)
    assert scan.gamma == math.inf
    assert_allclose(scan.total_energy, spectrum.eigenvalues, rtol=1e-8)


def test_shell_scan_on_an_ellipse(ellipse_spectrum_1_32):
    raster, spectrum = ellipse_spectrum_1_32
    cfg = su.SurgeryConfig()
    scan = su.shell_scan(raster, spectrum, cfg, EPS)
    assert scan.t_bar in scan.offsets
    assert scan.surface_measure.max() > 0
    assert np.all(scan.outside_ball_energy <= spectrum.eigenvalues * (1 + 1e-9))
    assert np.all(scan.exterior_energy <= scan.inner_energy + 1e-12)
    assert np.all(scan.inner_energy <= scan.outside_ball_energy + 1e-12)
    assert scan.alpha == cfg.alpha and scan.eps == EPS


def test_shell_beyond_the_grid(ellipse_spectrum_1_32):
    raster, spectrum = ellipse_spectrum_1_32
    with pytest.raises(EmptyShellError):
        su.shell_scan(raster, spectrum, su.SurgeryConfig(), EPS, i=100)
    with pytest.raises(ParameterRangeError):
        su.shell_scan(raster, spectrum, su.SurgeryConfig(), 0.0)


def test_shell_offsets_start_at_the_grid_spacing(ellipse_spectrum_1_32):
    raster, spectrum = ellipse_spectrum_1_32
    cfg = su.SurgeryConfig()
    scan = su.shell_scan(raster, spectrum, cfg, EPS)
    assert scan.offsets.min() >= raster.h
    assert scan.offsets.max() <= cfg.width(EPS)
    assert scan.t_bar >= raster.h


def test_shell_thinner_than_the_grid_spacing(ellipse_spectrum_1_32):
    raster, spectrum = ellipse_spectrum_1_32
    # eps^0.45 is about 1e-4, far below h
    with pytest.raises(EmptyShellError):
        su.shell_scan(raster, spectrum, su.SurgeryConfig(), 1e-9)


def test_hat_on_the_ball_adds_no_collar(ball_spectrum_1_32):
    raster, spectrum = ball_spectrum_1_32
    out = su.hat_extension(raster, spectrum, 2 * raster.h, 0.1)
    assert out.diagnostics['collar_nodes'] == 0
    assert out.raster.size == raster.size
    assert_allclose(out.rayleigh, spectrum.eigenvalues, rtol=1e-8)


@pytest.mark.parametrize('domain', [
    geo.ConcentricBall(2).domain(),
    geo.make_family(geo.FamilySpec('notched-ball'), 0.1),
], ids=['ball', 'notched'])
@pytest.mark.parametrize('h', [1 / 32, 1 / 64])
def test_hat_below_the_grid_spacing_adds_no_collar(domain, h):
    raster, spectrum = _solved(domain, h, 3)
    # no node of a domain inside B lies on or beyond the sphere R + 0.3h
    out = su.hat_extension(raster, spectrum, 0.3 * h, 0.1)
    assert out.diagnostics['collar_nodes'] == 0
    assert out.raster.size == raster.size
    assert_allclose(out.rayleigh, spectrum.eigenvalues, rtol=1e-7)


def test_hat_on_an_ellipse(ellipse_spectrum_1_32):
    raster, spectrum = ellipse_spectrum_1_32
    # the ellipse reaches past R + t_bar along its long axis
    t_bar, delta = 0.02, su.SurgeryConfig().thickness(EPS)
    out = su.hat_extension(raster, spectrum, t_bar, delta)
    assert out.diagnostics['collar_nodes'] > 0
    assert np.all(np.linalg.norm(out.raster.points(), axis=1) < R2 + t_bar + delta)

    hat = es.lowest_eigenpairs(es.assemble(out.raster), 3).eigenvalues
    enclosing = geo.rasterize(geo.ConcentricBall(2, t_bar + delta).domain(), raster.h)
    outer = es.lowest_eigenpairs(es.assemble(enclosing), 3).eigenvalues
    assert np.all(hat >= outer * (1 - 1e-9))
    assert np.all(out.ritz_values >= hat * (1 - 1e-8))
    assert np.all(out.rayleigh >= hat[0] * (1 - 1e-8))


def test_cutoff_on_the_ball(ball_spectrum_1_32):
    raster, spectrum = ball_spectrum_1_32
    out = su.radial_cutoff(raster, spectrum.function(1), su.SurgeryConfig(), EPS)
    assert out.raster.size == raster.size
    assert out.diagnostics['outer_energy'] == 0.0
    assert out.diagnostics['outer_mass'] == 0.0
    assert out.rayleigh[0] == pytest.approx(spectrum.eigenvalues[0], rel=1e-8)


def test_cutoff_on_an_ellipse_trims_the_far_field(ellipse_spectrum_1_32):
    raster, spectrum = ellipse_spectrum_1_32
    cfg = su.SurgeryConfig()
    eps = 1e-4
    out = su.radial_cutoff(raster, spectrum.function(1), cfg, eps)
    reach = R2 + (cfg.n + 1) * cfg.width(eps)
    assert np.all(np.linalg.norm(out.raster.points(), axis=1) < reach)
    assert out.raster.size < raster.size
    assert out.diagnostics['outer_mass'] > 0
    assert out.rayleigh[0] >= spectrum.eigenvalues[0] * (1 - 1e-8)


def test_ratio_competitors_on_the_ball():
    raster = geo.rasterize(geo.ConcentricBall(2).domain(), 1 / 128)
    points = raster.points()
    modes = bo.ball_spectrum(2, 3).modes
    u1 = bo.ball_eigenfunction(modes[0], points)
    out = su.ratio_competitors(raster, u1, 3)
    expected = np.column_stack([bo.ball_eigenfunction(mode, points) for mode in modes])
    assert_allclose(out.functions, expected, rtol=1e-9, atol=1e-9)
    assert_allclose(out.rayleigh, bo.ball_spectrum(2, 3).as_array(), rtol=0.05)
    assert out.diagnostics['sigma_min'] == pytest.approx(1.0, abs=0.05)
    assert out.diagnostics['ratio_sup'][0] == pytest.approx(1.0)
    assert out.diagnostics['ratio_lipschitz'][0] == pytest.approx(0.0, abs=1e-9)
    assert np.all(out.diagnostics['ratio_lipschitz'][1:] > 0)


def test_ratio_competitors_near_the_ball():
    raster, spectrum = _solved(geo.make_family(geo.FamilySpec('shrunk-ball'), 0.01), 1 / 64, 1)
    out = su.ratio_competitors(raster, spectrum.function(1), 5)
    assert out.functions.shape == (raster.size, 5)
    assert out.diagnostics['sigma_min'] >= 0.5
    assert np.all(np.isfinite(out.ritz_values))


def test_ratio_needs_a_reference_ball_around_the_domain():
    raster, spectrum = _solved(geo.ConcentricBall(2, 0.1).domain(), 1 / 32, 1)
    with pytest.raises(OutsideReferenceBallError):
        su.ratio_competitors(raster, spectrum.function(1), 1)
    out = su.ratio_competitors(raster, spectrum.function(1), 1, radius=R2 + 0.1)
    assert out.diagnostics['sigma_min'] == pytest.approx(1.0)
    assert out.diagnostics['reference_eigenvalues'][0] == pytest.approx(
        bo.ball_spectrum(2, 1).eigenvalues[0] * (R2 / (R2 + 0.1)) ** 2)


def test_degenerate_span_on_a_small_ball():
    raster, spectrum = _solved(geo.make_family(geo.FamilySpec('shrunk-ball'), 0.9), 1 / 64, 1)
    with pytest.raises(DegenerateSpanError) as info:
        su.ratio_competitors(raster, spectrum.function(1), 2)
    assert info.value.sigma_min < 0.5
