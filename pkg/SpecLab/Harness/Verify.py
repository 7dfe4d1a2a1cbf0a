from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from SpecLab.Geometry.Geometry import NEAR_BALL_KINDS
from SpecLab.Harness.Config import Settings
from SpecLab.Utility.Errors import InsufficientDataError, ParameterRangeError

HOLDS = 'holds'
WITHIN_TOLERANCE = 'holds-within-tolerance'
INSUFFICIENT = 'insufficient-data'
VIOLATED = 'violated'
_SEVERITY = {HOLDS: 0, WITHIN_TOLERANCE: 1, INSUFFICIENT: 2, VIOLATED: 3}

# guaranteed exponents: |λ_k - λ_k(B)| <~ deficit^UPPER, λ_k(B) - λ_k <~ d^LOWER
UPPER_EXPONENT = {2: 1.0 / 8.0, 3: 1.0 / 12.0}
LOWER_EXPONENT = {2: 1.0 / 2.0, 3: 1.0 / 3.0}
# λ_k(B) - λ_k <~ deficit^DEFICIT_LOWER
DEFICIT_LOWER_EXPONENT = {2: 1.0 / 4.0, 3: 1.0 / 6.0}
FK_EXPONENT = 2.0
EXACT_SLACK = 1e-6          # relative slack for inequalities that hold exactly on the grid

#----------------------------------------------

@dataclass(frozen=True)
class FitResult:
    exponent: float
    log_constant: float
    r_squared: float
    count: int
    x_name: str = 'x'
    y_name: str = 'y'

    @property
    def constant(self):
        return math.exp(self.log_constant)


def fit_power_law(points, x_name='x', y_name='y', min_points=4):
    """
    Least-squares line through (log x, log y).

    Args:
        points (list): (x, y) pairs, all positive
        min_points (int): smallest admissible number of points

    Returns:
        FitResult: slope, intercept and R² of the log-log fit

    Raises:
        InsufficientDataError: too few points, non-positive coordinates or a single x value
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < min_points:
        raise InsufficientDataError(f'Power-law fit of {y_name} vs {x_name} needs {min_points} points, got {len(pts)}')
    if not np.all(np.isfinite(pts)) or np.any(pts <= 0):
        raise InsufficientDataError(f'Power-law fit of {y_name} vs {x_name} needs positive finite data')
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.ptp(lx) == 0:
        raise InsufficientDataError(f'All {x_name} values are equal')
    slope, intercept = np.polyfit(lx, ly, 1)
    ss_res = float(np.sum((ly - (slope * lx + intercept)) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return FitResult(float(slope), float(intercept), r_squared, len(pts), x_name, y_name)


def _try_fit(points, settings, x_name, y_name):
    points = [(x, y) for x, y in points if x > 0 and y > 0 and math.isfinite(x) and math.isfinite(y)]
    try:
        return fit_power_law(points, x_name, y_name, settings.min_fit_points)
    except InsufficientDataError:
        return None

#----------------------------------------------

@dataclass
class CheckResult:
    name: str
    status: str = HOLDS
    margin: float = math.inf
    worst_record: Optional[str] = None
    fitted: dict = field(default_factory=dict)
    message: str = ''
    insufficient: list = field(default_factory=list)

    def note(self, status, margin, record_id):
        """Folds one per-record (or per-family) outcome into the check."""
        if _SEVERITY[status] > _SEVERITY[self.status]:
            self.status = status
        if margin < self.margin:
            self.margin = float(margin)
            self.worst_record = record_id

    def lack(self, label, reason):
        """Marks a part of the check the records cannot decide; only a violation outranks it."""
        self.insufficient.append(f'{label}: {reason}')
        if _SEVERITY[INSUFFICIENT] > _SEVERITY[self.status]:
            self.status = INSUFFICIENT


@dataclass
class VerificationReport:
    checks: list
    failed_records: list
    record_count: int

    @property
    def status(self):
        worst = max((c.status for c in self.checks), key=_SEVERITY.get, default=HOLDS)
        return worst

    @property
    def exit_code(self):
        if self.failed_records:
            return 2
        return 1 if self.status == VIOLATED else 0

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {
            'status': self.status,
            'exit_code': self.exit_code,
            'record_count': self.record_count,
            'failed_records': list(self.failed_records),
            'checks': [asdict(c) for c in self.checks],
        }


def _classify(exact_margin, tolerant_margin):
    if exact_margin >= 0:
        return HOLDS
    return WITHIN_TOLERANCE if tolerant_margin >= 0 else VIOLATED


def _growth(check, label, pairs, settings):
    """
    One-sided stability of a fitted constant.

    pairs are (x, C) with x the quantity that drives the bound to zero. C may
    fall as x shrinks but must not rise above stability_factor times the
    largest C met at a larger x.
    """
    pairs = sorted((x, c) for x, c in pairs if math.isfinite(x) and math.isfinite(c))
    if len(pairs) < 2:
        check.lack(label, f'{len(pairs)} constant(s), at least 2 needed')
        return
    constants = [c for _, c in pairs]
    positive = [c for c in constants if c > 0]
    check.fitted[f'{label}_max'] = max(constants)
    check.fitted[f'{label}_spread'] = max(positive) / min(positive) if positive else 1.0
    growth = 0.0
    for i, c in enumerate(constants[:-1]):
        reference = max(constants[i + 1:])
        if c > 0:
            growth = max(growth, c / reference if reference > 0 else math.inf)
    check.fitted[f'{label}_growth'] = growth
    status = HOLDS if growth <= settings.stability_factor else VIOLATED
    check.note(status, settings.stability_factor - growth, label)


def _exponent_bound(check, label, points, settings, floor=-math.inf, ceiling=math.inf, names=('x', 'y')):
    fit = _try_fit(points, settings, *names)
    if fit is None:
        check.lack(label, f'no power-law fit from {len(points)} point(s), {settings.min_fit_points} needed')
        return None
    check.fitted[f'{label}_exponent'] = fit.exponent
    check.fitted[f'{label}_r_squared'] = fit.r_squared
    margin = min(fit.exponent - floor, ceiling - fit.exponent)
    check.note(HOLDS if margin >= 0 else VIOLATED, margin, label)
    return fit


def _by_family(records):
    groups = defaultdict(list)
    for r in records:
        groups[r.family].append(r)
    return dict(sorted(groups.items()))


def _resolved(r):
    return r.deficit_1 > r.tolerances[0]


def _asymmetric(r):
    return r.d > r.d_err


def _deviation(r):
    return max(abs(x) for x in r.deficits)


def _shortfall(r):
    """Largest λ_k(B) - λ_k that exceeds its tolerance, 0 when none does."""
    return max((-x for x, tol in zip(r.deficits, r.tolerances) if -x > tol), default=0.0)

#----------------------------------------------

def _faber_krahn(records):
    check = CheckResult('faber_krahn', message='lambda_1 >= lambda_1(B) - tol')
    for r in records:
        exact = r.eigenvalues[0] - r.ball_eigenvalues[0]
        check.note(_classify(exact, exact + r.tolerances[0]), exact + r.tolerances[0], r.record_id)
    return check


def _quantitative_faber_krahn(records, settings):
    check = CheckResult('quantitative_faber_krahn', message='lambda_1 deficit >= c d^2 with c > 0')
    constants = []
    for family, group in _by_family([r for r in records if not r.inscribed]).items():
        for r in group:
            deficit, tol = r.deficit_1, r.tolerances[0]
            status = HOLDS if deficit > 0 else _classify(deficit, deficit + tol)
            check.note(status, deficit + tol, r.record_id)

        pairs = [(r.d, r.deficit_1) for r in group if _asymmetric(r) and _resolved(r)]
        unresolved = [r for r in group if _asymmetric(r) and not _resolved(r)]
        if not pairs:
            if unresolved:
                check.lack(family, f'd > d_err on {len(unresolved)} record(s) but no resolved deficit fixes c')
            continue
        c = min(y / x ** 2 for x, y in pairs)
        check.fitted[f'{family}:c'] = c
        constants.append(c)
        # a measurable d with a deficit lost in the tolerance must still clear c d^2
        for r in unresolved:
            need = c * r.d ** 2
            tolerant = r.deficit_1 + r.tolerances[0] - need
            check.note(_classify(r.deficit_1 - need, tolerant), tolerant, r.record_id)
        fit = _exponent_bound(check, family, pairs, settings, names=('d', 'lambda_1 deficit'))
        if fit is not None and group[0].kind in NEAR_BALL_KINDS:
            # the quadratic law is asymptotic: cap the slope where d is small
            small = sorted(pairs)[:max(settings.min_fit_points, len(pairs) // 2)]
            _exponent_bound(check, f'{family}:small_d', small, settings,
                            ceiling=FK_EXPONENT + settings.exponent_floor_margin, names=('d', 'lambda_1 deficit'))
    if constants:
        check.fitted['c'] = min(constants)
    return check


def _ashbaugh_benguria(records, settings):
    check = CheckResult('ashbaugh_benguria', message='lambda_2/lambda_1 <= lambda_2(B)/lambda_1(B)(1+tol)')
    for r in records:
        if r.k < 2:
            continue
        ball_ratio = r.ball_eigenvalues[1] / r.ball_eigenvalues[0]
        exact = ball_ratio - r.ratio21
        tolerant = ball_ratio * (1.0 + settings.ab_tolerance) - r.ratio21
        check.note(_classify(exact, tolerant), tolerant, r.record_id)
    return check


def _spectral_stability(records, settings):
    check = CheckResult('spectral_stability',
                        message='|lambda_k - lambda_k(B)| <= C deficit^beta and lambda_k(B) - lambda_k <= C d^beta\'')
    margin = settings.exponent_floor_margin
    for family, group in _by_family([r for r in records if not r.inscribed]).items():
        resolved = [r for r in group if _resolved(r)]
        if not resolved:
            if any(_asymmetric(r) for r in group):
                check.lack(family, 'd > d_err but no lambda_1 deficit above its tolerance')
            continue
        N = group[0].dimension
        upper, lower = UPPER_EXPONENT[N], LOWER_EXPONENT[N]

        up_points = [(r.deficit_1, _deviation(r)) for r in resolved]
        _growth(check, f'{family}:C_upper', [(x, y / x ** upper) for x, y in up_points], settings)
        _exponent_bound(check, f'{family}:upper', up_points, settings, floor=upper - margin,
                        names=('deficit', 'deviation'))

        low_points = [(r.d, _shortfall(r)) for r in group if _asymmetric(r) and _shortfall(r) > 0]
        if low_points:
            check.fitted[f'{family}:C_lower_max'] = max(y / x ** lower for x, y in low_points)
            _exponent_bound(check, f'{family}:lower', low_points, settings, floor=lower - margin,
                            names=('d', 'shortfall'))

        # deviations must shrink with the deficit once it spans a decade
        ordered = sorted(resolved, key=lambda r: r.deficit_1)
        span = ordered[-1].deficit_1 / ordered[0].deficit_1
        check.fitted[f'{family}:deficit_span'] = span
        if span < 10.0:
            check.lack(f'{family}:decade', f'lambda_1 deficit spans a factor {span:.3g}, 10 needed')
            continue
        small, large = _deviation(ordered[0]), _deviation(ordered[-1])
        check.note(HOLDS if small <= 0.5 * large else VIOLATED, 0.5 * large - small, ordered[0].record_id)
    return check


def _spectral_lower(records, settings):
    check = CheckResult('spectral_lower_bound',
                        message='lambda_k(B) - lambda_k <= C deficit^(1/4) in 2D, deficit^(1/6) in 3D')
    for family, group in _by_family(records).items():
        beta = DEFICIT_LOWER_EXPONENT[group[0].dimension]
        pairs = []
        for r in group:
            shortfall = _shortfall(r)
            # largest lambda_1 deficit the measurement allows
            ceiling = r.deficit_1 + r.tolerances[0]
            if shortfall > 0 and ceiling > 0:
                pairs.append((ceiling, shortfall / ceiling ** beta))
        if pairs:
            _growth(check, f'{family}:C_lower', pairs, settings)
    return check


def _ratio_bound(records, settings):
    check = CheckResult('eigenvalue_ratio_bound', message='lambda_k/lambda_1 bounded per family')
    for family, group in _by_family(records).items():
        worst = max(group, key=lambda r: r.ratio_k1)
        cap = settings.ratio_cap * worst.ball_eigenvalues[-1] / worst.ball_eigenvalues[0]
        check.fitted[f'{family}:max_ratio'] = worst.ratio_k1
        bounded = math.isfinite(worst.ratio_k1) and worst.ratio_k1 <= cap
        check.note(HOLDS if bounded else VIOLATED, cap - worst.ratio_k1, worst.record_id)
    return check


def _inscribed(records, settings):
    check = CheckResult('inscribed_bound', message='lambda_k deficit <= C sqrt(lambda_1 deficit) for E in B')
    for family, group in _by_family([r for r in records if r.inscribed]).items():
        points = []
        for r in group:
            # E inside B: every lambda_k can only go up
            for j, (x, tol) in enumerate(zip(r.deficits, r.tolerances)):
                check.note(_classify(x, x + tol), x + tol, f'{r.record_id}:lambda_{j + 1}')
            if _resolved(r):
                points.append((r.deficit_1, max(max(x, 0.0) for x in r.deficits)))
            sigma = r.surgery.get('sigma_min')
            if sigma is not None:
                check.note(HOLDS if sigma >= 0.5 else VIOLATED, sigma - 0.5, f'{r.record_id}:span')
        if not points:
            continue
        _growth(check, f'{family}:C', [(x, y / math.sqrt(x)) for x, y in points], settings)
        _exponent_bound(check, family, points, settings, floor=settings.inscribed_exponent_floor,
                        names=('lambda_1 deficit', 'lambda_k deficit'))
    return check


def _k2_linear(records):
    check = CheckResult('k2_linear_bound',
                        message='lambda_2 - lambda_2(B) <= lambda_2(B)/lambda_1(B) (lambda_1 - lambda_1(B)) + tol')
    for r in records:
        if r.k < 2:
            continue
        ratio = r.ball_eigenvalues[1] / r.ball_eigenvalues[0]
        exact = ratio * r.deficits[0] - r.deficits[1]
        tolerant = exact + r.tolerances[1] + ratio * r.tolerances[0]
        check.note(_classify(exact, tolerant), tolerant, r.record_id)
    return check


def _linf(records):
    check = CheckResult('linf_bound', message='max|u_j| <= e^(pi/8) lambda_j^(N/4) (1+slack)')
    for r in records:
        check.note(HOLDS if r.linf_margin >= 0 else VIOLATED, r.linf_margin, r.record_id)
    strict = [r.linf_margin_strict for r in records if math.isfinite(r.linf_margin_strict)]
    if strict:
        check.fitted['strict_reading_margin'] = min(strict)
    return check


def _outside_ball(records):
    check = CheckResult('energy_outside_ball', message='energy of u_j outside B <= lambda_j')
    for r in records:
        margin = r.surgery.get('outside_ball_margin')
        if margin is None:
            continue
        slack = EXACT_SLACK * r.fine_eigenvalues[-1]
        check.note(_classify(margin, margin + slack), margin + slack, r.record_id)
    return check


def _surgery_constants(records, settings):
    check = CheckResult('surgery_constants',
                        message='R(u_hat) - lambda_j, cutoff excess and Gram leakage <= C eps^alpha with stable C')
    for family, group in _by_family(records).items():
        hat, cut, leak, exterior = [], [], [], []
        alpha = None
        for r in group:
            s = r.surgery
            if 'error' in s:
                check.lack(r.record_id, s['error'])
                continue
            w = s.get('eps_alpha')
            if not w or 'hat_excess' not in s:
                continue
            # an excess at rounding level means the construction is exact: C = 0
            floor = EXACT_SLACK * r.fine_eigenvalues[0]
            hat.append((r.eps, s['hat_excess'] / w if s['hat_excess'] > floor else 0.0))
            cut.append((r.eps, s['cutoff_excess'] / w if s['cutoff_excess'] > floor else 0.0))
            leak.append(s['hat_offdiag'] / w)
            exterior.append((r.eps, s['exterior_energy'] if s['exterior_energy'] > floor else 0.0))
            alpha = s['alpha']
        if not hat:
            continue
        for label, pairs in ((f'{family}:C_hat', hat), (f'{family}:C_cutoff', cut)):
            if any(c > 0 for _, c in pairs):
                _growth(check, label, pairs, settings)
            else:
                check.fitted[f'{label}_max'] = 0.0
        check.fitted[f'{family}:C_gram_max'] = max(leak)
        positive = [(x, y) for x, y in exterior if y > 0]
        if positive:
            _exponent_bound(check, f'{family}:exterior_energy', positive, settings, floor=alpha - 0.1,
                            names=('eps', 'exterior energy'))
        else:
            check.fitted[f'{family}:exterior_energy_max'] = 0.0
    return check


def _hat_inclusion(records):
    check = CheckResult('hat_inclusion', message='lambda_k(hat Omega) >= lambda_k(B_(n+1)eps^alpha) on one grid')
    for r in records:
        margin = r.surgery.get('inclusion_margin')
        if margin is None:
            continue
        slack = EXACT_SLACK * r.fine_eigenvalues[-1]
        check.note(_classify(margin, margin + slack), margin + slack, r.record_id)
    return check
def verify_inequalities(records, settings=None):
    """
    Checks every measurable inequality on a list of records.

    Failed records are listed but take no part in the checks. A violated
    check always names the offending record (or family) and its margin. A
    check whose fits or constants the records cannot support reports
    'insufficient-data' and lists what is missing; it never reads as holding.

    Raises:
        ParameterRangeError: for an empty record list
    """
    settings = settings or Settings()
    if not records:
        raise ParameterRangeError('verify_inequalities needs at least one record')
    failed = [r.record_id for r in records if not r.ok]
    usable = [r for r in records if r.ok]
    checks = [
        _faber_krahn(usable),
        _quantitative_faber_krahn(usable, settings),
        _ashbaugh_benguria(usable, settings),
        _spectral_stability(usable, settings),
        _spectral_lower(usable, settings),
        _ratio_bound(usable, settings),
        _inscribed(usable, settings),
        _k2_linear(usable),
        _linf(usable),
        _outside_ball(usable),
        _surgery_constants(usable, settings),
        _hat_inclusion(usable),
    ]
    for check in checks:
        level = logging.INFO if _SEVERITY[check.status] < _SEVERITY[INSUFFICIENT] else logging.WARNING
        logging.log(level, f'{check.name}: {check.status} (margin {check.margin:.4g}, worst {check.worst_record})')
        for missing in check.insufficient:
            logging.warning(f'{check.name}: insufficient data for {missing}')
    return VerificationReport(checks, failed, len(records))
