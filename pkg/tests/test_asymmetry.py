import numpy as np
import pytest

from SpecLab.Asymmetry import Asymmetry as asy
from SpecLab.Geometry import Geometry as geo


def test_ball_has_zero_asymmetry(disk):
    raster = geo.rasterize(disk, 1 / 64)
    result = asy.fraenkel_asymmetry(raster)
    assert result.d == 0.0
    assert result.center == (0.0, 0.0)
    assert asy.fraenkel_deficit(raster) == 0.0


def test_translated_ball(disk):
    h = 1 / 64
    raster = geo.rasterize(disk.translated([0.3, 0.0]), h)
    result = asy.fraenkel_asymmetry(raster)
    assert result.d <= 0.02
    assert np.linalg.norm(np.subtract(result.center, (0.3, 0.0))) < 4 * h
    assert asy.fraenkel_deficit(raster) > 0.3


def test_disjoint_ball_at_fixed_center(disk):
    raster = geo.rasterize(disk.translated([3.0, 0.0]), 1 / 128)
    assert asy.symmetric_difference_volume(raster, np.zeros(2)) == pytest.approx(2.0, abs=0.01)
    assert asy.fraenkel_deficit(raster) == pytest.approx(2.0, abs=0.01)


def test_square(centred_square):
    h = 1 / 128
    raster = geo.rasterize(centred_square, h)
    result = asy.fraenkel_asymmetry(raster)
    assert result.d == pytest.approx(0.1806, abs=0.01)
    assert np.linalg.norm(result.center) <= 2 * h
    assert result.uncertainty == pytest.approx(4 * h * geo.perimeter_estimate(raster))
    assert geo.perimeter_estimate(raster) == pytest.approx(4.0, rel=0.01)


def test_square_value_at_its_center(centred_square):
    raster = geo.rasterize(centred_square, 1 / 128)
    assert asy.symmetric_difference_volume(raster, np.zeros(2)) == pytest.approx(0.1806, abs=0.01)


def test_translation_by_lattice_vector(centred_square):
    h = 1 / 64
    shift = np.array([0.25, -0.125])
    base = asy.fraenkel_asymmetry(geo.rasterize(centred_square, h))
    moved = asy.fraenkel_asymmetry(geo.rasterize(centred_square.translated(shift), h))
    assert moved.d == pytest.approx(base.d, rel=1e-12)
    assert np.allclose(np.subtract(moved.center, base.center), shift, atol=1e-12)


def test_minimality_certificate():
    raster = geo.rasterize(geo.make_family(geo.FamilySpec('ellipse'), 0.3), 1 / 64)
    result = asy.fraenkel_asymmetry(raster)
    assert len(result.candidates) == len(result.values) > 1
    assert np.all(result.values >= result.d)
    for candidate, value in zip(result.candidates, result.values):
        assert asy.symmetric_difference_volume(raster, candidate) == pytest.approx(value, abs=1e-12)
    assert result.tolerance <= raster.h


def test_asymmetry_grows_with_eccentricity():
    values = [asy.fraenkel_asymmetry(geo.rasterize(geo.make_family(geo.FamilySpec('ellipse'), s), 1 / 64)).d
              for s in (0.05, 0.1, 0.2)]
    assert values[0] < values[1] < values[2]


@pytest.mark.parametrize('kind', ['ellipse', 'fourier', 'hole', 'cap'])
def test_deficit_shrinks_to_zero_along_families(kind):
    h = 1 / 128
    spec = geo.FamilySpec(kind)
    eps = [asy.fraenkel_deficit(geo.rasterize(geo.make_family(spec, s), h)) for s in (0.2, 0.1, 0.05, 0.0)]
    assert eps[0] > eps[1] > eps[2] > eps[3]
    assert eps[3] <= 2 * h ** 2


def test_single_node_changes_volume_by_one_cell(centred_square):
    h = 1 / 64
    raster = geo.rasterize(centred_square, h)
    mask = raster.mask.copy()
    corner = tuple(np.argwhere(mask)[0])
    mask[corner] = False
    flipped = raster.with_mask(mask)
    center = np.array([0.01, -0.02])
    change = asy.symmetric_difference_volume(flipped, center) - asy.symmetric_difference_volume(raster, center)
    assert abs(change) == pytest.approx(h ** 2)


def test_three_dimensional_ball():
    raster = geo.rasterize(geo.ConcentricBall(3).domain(), 1 / 16)
    result = asy.fraenkel_asymmetry(raster)
    assert result.d == 0.0
    assert result.center == (0.0, 0.0, 0.0)
