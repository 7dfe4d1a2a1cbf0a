from SpecLab.Geometry import Geometry as geo
from SpecLab.BallOracle import BallOracle as oracle
from SpecLab.Eigensolver import Eigensolver as solver
from SpecLab.Asymmetry import Asymmetry as asym
from SpecLab.Surgery import Surgery as surgery
from SpecLab.Harness import Harness, Report
from SpecLab.Harness.Config import Settings
from SpecLab.Harness.Verify import verify_inequalities

import logging
logging.basicConfig(level=logging.INFO, format='%(levelname)s: %(message)s')

# 1. Exact spectrum of the unit-area disk
ball = oracle.ball_spectrum(2, 6)
print(f'disk eigenvalues: {[round(x, 4) for x in ball.eigenvalues]}')

# 2. An ellipse of unit area, solved on two grids and extrapolated
ellipse = geo.make_family(geo.FamilySpec('ellipse'), 0.2)
solved = []
for h in (1 / 64, 1 / 128):
    raster = geo.rasterize(ellipse, h)
    result = solver.lowest_eigenpairs(solver.assemble(raster), 6)
    solved.append((h, result.eigenvalues))
lam = solver.extrapolate(*solved)
print(f'ellipse eigenvalues: {[round(x, 4) for x in lam]}')

# 3. How far the ellipse is from a ball
d = asym.fraenkel_asymmetry(raster)
eps = asym.fraenkel_deficit(raster)
print(f'd = {d.d:.4f} +/- {d.uncertainty:.4f} at {d.center}, eps = {eps:.4f}')

# 4. Surgery competitors on the finest grid
cfg = surgery.SurgeryConfig(dimension=2)
scan = surgery.shell_scan(raster, result, cfg, eps)
hat = surgery.hat_extension(raster, result, scan.t_bar, cfg.thickness(eps))
print(f't_bar = {scan.t_bar:.4f}, Rayleigh quotients on the hat: {hat.rayleigh.round(3)}')

# 5. A small sweep, saved and checked
records = Harness.run_sweep(geo.FamilySpec('ellipse'), [0.05, 0.1, 0.2, 0.4], 3, [1 / 32, 1 / 64],
                            Settings(surgery=False))
Report.write_csv(records, 'results/ellipse_sweep.csv')
Report.write_jsonl(records, 'results/ellipse_sweep.jsonl')
report = verify_inequalities(records)
for check in report.checks:
    print(f'{check.name}: {check.status}')
