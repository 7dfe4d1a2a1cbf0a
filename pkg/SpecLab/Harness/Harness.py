from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from itertools import repeat
from typing import Optional

import numpy as np

from SpecLab.Asymmetry import Asymmetry as asy
from SpecLab.BallOracle import BallOracle as bo
from SpecLab.Eigensolver import Eigensolver as es
from SpecLab.Geometry import Geometry as geo
from SpecLab.Harness.Config import Settings, resolve_workers
from SpecLab.Surgery import Surgery as sg
from SpecLab.Utility.Errors import (DegenerateSpanError, ParameterRangeError, SpacingMismatchError,
                                    SpecLabError)

MAX_K = 20
LINF_CONSTANT = math.exp(math.pi / 8.0)
LINF_CONSTANT_STRICT = math.exp(1.0 / (8.0 * math.pi))
SPACING_TOL = 1e-9

#----------------------------------------------

@dataclass
class ExperimentRecord:
    """
    One family member measured across resolutions.

    The identity fields (family .. inscribed) are enough to rebuild and rerun
    the record; everything after them is measured.
    """
    family: str
    kind: str
    dimension: int
    s: float
    k: int
    resolutions: list
    seed: int = 0
    family_params: list = field(default_factory=list)
    normalize: Optional[bool] = None
    alpha: Optional[float] = None
    inscribed: bool = False
    status: str = 'pending'
    error: str = ''
    volume: float = math.nan
    eigenvalues: list = field(default_factory=list)
    fine_eigenvalues: list = field(default_factory=list)
    coarse_eigenvalues: list = field(default_factory=list)
    ball_eigenvalues: list = field(default_factory=list)
    tolerances: list = field(default_factory=list)
    deficits: list = field(default_factory=list)
    d: float = math.nan
    d_err: float = math.nan
    d_center: list = field(default_factory=list)
    eps: float = math.nan
    ratio21: float = math.nan
    ratio_k1: float = math.nan
    linf_norms: list = field(default_factory=list)
    linf_margin: float = math.nan
    linf_margin_strict: float = math.nan
    surgery: dict = field(default_factory=dict)

    @property
    def record_id(self):
        return f'{self.family}:s={self.s:g}'

    @property
    def h_fine(self):
        return min(self.resolutions) if self.resolutions else math.nan

    @property
    def ok(self):
        return self.status == 'ok'

    @property
    def deficit_1(self):
        return self.deficits[0] if self.deficits else math.nan

    def family_spec(self):
        return geo.FamilySpec(self.kind, self.dimension, tuple(self.family_params), self.normalize)

    def identity(self):
        names = ('family', 'kind', 'dimension', 's', 'k', 'resolutions', 'seed',
                 'family_params', 'normalize', 'alpha', 'inscribed')
        return {name: getattr(self, name) for name in names}

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        return cls(**{key: value for key, value in data.items() if key in known})

#----------------------------------------------

def _solve(domain, h, k, settings):
    raster = geo.rasterize(domain, h, settings.node_budget)
    op = es.assemble(raster)
    spectrum = es.lowest_eigenpairs(op, k, settings.solver_tol, settings.seed,
                                    settings.block_padding, settings.dense_limit)
    return raster, spectrum


def surgery_summary(raster, spectrum, eps, inscribed, settings, alpha=None):
    """Runs the competitor constructions on the finest raster and keeps scalar diagnostics."""
    N, k = raster.dimension, spectrum.k
    lam = spectrum.eigenvalues
    summary = {}
    try:
        if inscribed:
            ratio = sg.ratio_competitors(raster, spectrum.function(1), k)
            reference = ratio.diagnostics['reference_eigenvalues']
            summary['ratio_excess'] = float(np.max(ratio.rayleigh - reference))
            summary['ratio_offdiag'] = _offdiag(ratio.gram_l2)
            summary['sigma_min'] = ratio.diagnostics['sigma_min']
            # measured W^{1,inf} size of v_j/v_1, recorded without a bound
            summary['ratio_sup'] = float(np.max(ratio.diagnostics['ratio_sup']))
            summary['ratio_lipschitz'] = float(np.max(ratio.diagnostics['ratio_lipschitz']))
    except DegenerateSpanError as err:
        summary['sigma_min'] = err.sigma_min
        summary['ratio_error'] = str(err)

    if not eps > 0:
        summary['skipped'] = 'eps=0'
        return summary
    try:
        cfg = sg.SurgeryConfig(N, alpha if alpha is not None else settings.alpha,
                               settings.shell_n, None, settings.shell_samples)
        w = cfg.width(eps)
        summary['eps_alpha'] = w
        summary['alpha'] = cfg.alpha
        scan = sg.shell_scan(raster, spectrum, cfg, eps)
        summary.update({
            't_bar': scan.t_bar,
            'gamma': scan.gamma,
            'theta': scan.theta,
            'theta_bound': scan.theta_bound,
            'exterior_energy': float(scan.exterior_energy.max()),
            'exterior_mass': float(scan.exterior_mass.max()),
            'outside_ball_margin': float(np.min(lam - scan.outside_ball_energy)),
        })
        hat = sg.hat_extension(raster, spectrum, scan.t_bar, cfg.thickness(eps), settings.node_budget)
        summary.update({
            'hat_excess': float(np.max(hat.rayleigh - lam)),
            'hat_offdiag': _offdiag(hat.gram_l2),
            'hat_gram_min': float(np.min(np.diag(hat.gram_l2))),
            'hat_ritz_excess': float(hat.ritz_values[-1] - lam[-1]),
            'hat_collar_nodes': int(hat.diagnostics['collar_nodes']),
        })
        if settings.inclusion_check:
            ball = geo.ConcentricBall(N, (cfg.n + 1) * w).domain()
            _, ball_spectrum = _solve(ball, raster.h, k, settings)
            hat_spectrum = es.lowest_eigenpairs(es.assemble(hat.raster), k, settings.solver_tol, settings.seed,
                                                settings.block_padding, settings.dense_limit)
            summary['inclusion_margin'] = float(np.min(hat_spectrum.eigenvalues - ball_spectrum.eigenvalues))
        cut = sg.radial_cutoff(raster, spectrum.function(1), cfg, eps)
        summary.update({
            'cutoff_excess': float(cut.rayleigh[0] - lam[0]),
            'outer_energy': cut.diagnostics['outer_energy'],
            'outer_mass': cut.diagnostics['outer_mass'],
        })
    except SpecLabError as err:
        # SolverFailure included: the record itself stays valid
        summary['error'] = f'{type(err).__name__}: {err}'
        logging.warning(f'Surgery diagnostics stopped on {raster.label}: {err}')
    return summary


def _offdiag(gram):
    if gram.shape[0] < 2:
        return 0.0
    return float(np.max(np.abs(gram - np.diag(np.diag(gram)))))


def _measure(record, settings):
    spec = record.family_spec()
    domain = geo.make_family(spec, record.s)
    hs = sorted(record.resolutions, reverse=True)
    solved = [(h,) + _solve(domain, h, record.k, settings) for h in hs]
    (h_c, _, coarse), (h_f, raster, fine) = solved[-2], solved[-1]
    lam = es.extrapolate((h_c, coarse.eigenvalues), (h_f, fine.eigenvalues))
    ball = bo.ball_spectrum(record.dimension, record.k).as_array()
    residual = np.abs(fine.eigenvalues - coarse.eigenvalues)
    tol = np.maximum(2.0 * residual, settings.tolerance_rel * ball)

    asym = asy.fraenkel_asymmetry(raster, settings.coarse_factor)
    eps = asy.fraenkel_deficit(raster)

    N = record.dimension
    linf = np.max(np.abs(fine.eigenvectors), axis=0)
    growth = fine.eigenvalues ** (N / 4.0) * (1.0 + settings.linf_slack)

    record.volume = geo.volume(raster)
    record.eigenvalues = lam.tolist()
    record.fine_eigenvalues = fine.eigenvalues.tolist()
    record.coarse_eigenvalues = coarse.eigenvalues.tolist()
    record.ball_eigenvalues = ball.tolist()
    record.tolerances = tol.tolist()
    record.deficits = (lam - ball).tolist()
    record.d = asym.d
    record.d_err = asym.uncertainty
    record.d_center = list(asym.center)
    record.eps = eps
    record.ratio21 = float(lam[1] / lam[0]) if record.k >= 2 else math.nan
    record.ratio_k1 = float(lam[-1] / lam[0])
    record.linf_norms = linf.tolist()
    record.linf_margin = float(np.min(LINF_CONSTANT * growth - linf))
    record.linf_margin_strict = float(np.min(LINF_CONSTANT_STRICT * growth - linf))
    if settings.surgery:
        record.surgery = surgery_summary(raster, fine, eps, record.inscribed, settings, record.alpha)
    record.status = 'ok'


def measure_record(record, settings=None):
    """Fills the measured fields of a record in place; numerical failures mark it 'failed'."""
    settings = replace(settings or Settings(), seed=record.seed)
    try:
        _measure(record, settings)
        logging.info(f'{record.record_id}: lambda_1={record.eigenvalues[0]:.6g}, d={record.d:.4g}, eps={record.eps:.4g}')
    except SpecLabError as err:
        record.status = 'failed'
        record.error = f'{type(err).__name__}: {err}'
        logging.error(f'{record.record_id} failed: {record.error}')
    return record


def _check_resolutions(resolutions):
    hs = sorted({float(h) for h in resolutions}, reverse=True)
    if len(hs) < 2:
        raise ParameterRangeError('At least two resolutions are needed for extrapolation')
    if any(h <= 0 for h in hs):
        raise ParameterRangeError(f'Resolutions must be positive, got {hs}')
    if abs(hs[-2] - 2.0 * hs[-1]) > SPACING_TOL * hs[-2]:
        raise SpacingMismatchError(f'The two finest spacings {hs[-2]:g}, {hs[-1]:g} are not in a 2:1 ratio')
    return hs


def run_sweep(spec, params, k, resolutions, settings=None, workers=None, name=None, alpha=None):
    """
    Measures every member s of a family.

    Args:
        spec (FamilySpec): the family
        params (list): values of s
        k (int): eigenvalues per record, at most 20
        resolutions (list): grid spacings; the two finest must be h and h/2
        settings (Settings): tunables, defaults when None
        workers (int): process count; SPECLAB_WORKERS overrides it
        name (str): family label in the records, defaults to the kind
        alpha (float): collar exponent for the surgery diagnostics

    Returns:
        list: ExperimentRecords sorted by s. Records whose solve failed carry status 'failed'.
    """
    settings = settings or Settings()
    if not (1 <= k <= MAX_K):
        raise ParameterRangeError(f'k must be in 1..{MAX_K}, got {k}')
    hs = _check_resolutions(resolutions)
    records = [ExperimentRecord(family=name or spec.kind, kind=spec.kind, dimension=spec.dimension, s=float(s),
                                k=int(k), resolutions=hs, seed=settings.seed, family_params=list(spec.params),
                                normalize=spec.normalize, alpha=alpha if alpha is not None else settings.alpha,
                                inscribed=spec.inscribed)
               for s in sorted(float(s) for s in params)]
    for record in records:
        lo, hi = spec.parameter_range
        if not lo <= record.s <= hi:
            raise ParameterRangeError(f'{spec.kind}: parameter {record.s} outside [{lo}, {hi}]')

    workers = resolve_workers(settings.workers if workers is None else workers)
    logging.info(f'Sweep {records[0].family if records else spec.kind}: {len(records)} record(s), k={k}, '
                 f'h={[f"{h:g}" for h in hs]}, workers={workers}')
    if workers > 1 and len(records) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(measure_record, records, repeat(settings)))
    else:
        records = [measure_record(record, settings) for record in records]
    return sorted(records, key=lambda r: r.s)


def rerun_record(record, settings=None):
    """A fresh measurement of a record from its serialized identity."""
    return measure_record(ExperimentRecord(**record.identity()), settings)
