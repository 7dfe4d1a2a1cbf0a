import math

import pytest

from SpecLab.BallOracle import BallOracle as bo
from SpecLab.Geometry import Geometry as geo
from SpecLab.Harness.Harness import ExperimentRecord


@pytest.fixture(autouse=True)
def _no_worker_override(monkeypatch):
    monkeypatch.delenv('SPECLAB_WORKERS', raising=False)


@pytest.fixture
def unit_square():
    return geo.box_domain((0.0, 0.0), (1.0, 1.0), 'unit square')


@pytest.fixture
def centred_square():
    return geo.box_domain((-0.5, -0.5), (0.5, 0.5), 'centred square')


@pytest.fixture
def disk():
    return geo.ConcentricBall(2).domain()


def ball_record(family='ellipse', s=0.0, k=3, dimension=2, **changes):
    """A measured record carrying the exact ball values, for checks that do not need a solve."""
    ball = bo.ball_spectrum(dimension, k).as_array().tolist()
    record = ExperimentRecord(family=family, kind=family, dimension=dimension, s=s, k=k,
                              resolutions=[1 / 64, 1 / 128], status='ok', volume=1.0,
                              eigenvalues=list(ball), fine_eigenvalues=list(ball), coarse_eigenvalues=list(ball),
                              ball_eigenvalues=list(ball), tolerances=[1e-3 * x for x in ball],
                              deficits=[0.0] * k, d=0.0, d_err=0.01, d_center=[0.0] * dimension, eps=0.0,
                              ratio21=ball[1] / ball[0] if k >= 2 else math.nan, ratio_k1=ball[-1] / ball[0],
                              linf_norms=[1.0] * k, linf_margin=1.0, linf_margin_strict=0.5)
    for name, value in changes.items():
        setattr(record, name, value)
    return record


@pytest.fixture
def make_record():
    return ball_record
