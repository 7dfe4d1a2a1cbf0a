import argparse
import json
import logging
import os
import sys
from dataclasses import replace

from SpecLab.Asymmetry import Asymmetry as asy
from SpecLab.Eigensolver import Eigensolver as es
from SpecLab.Geometry import Geometry as geo
from SpecLab.Harness import Harness, Report
from SpecLab.Harness.Config import (DEFAULT_K, DEFAULT_RESOLUTIONS, OUTPUT_FORMATS, FamilyJob, Settings,
                                    SweepConfig, load_config, resolve_workers)
from SpecLab.Harness.Verify import verify_inequalities
from SpecLab.Utility.Errors import SpecLabError
from SpecLab.Utility.Utility import format_number, parse_float_list, spacings_from_inverse

#----------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--family', default='ellipse', help='family kind (ellipse, fourier, hole, cap, rectangle, stadium, shrunk-ball, notched-ball)')
    common.add_argument('--param', type=float, default=0.0, help='family parameter s')
    common.add_argument('--params', default=None, help='comma list of s values for sweep')
    common.add_argument('--shape', default=None, help='comma list of family shape parameters')
    common.add_argument('--dim', type=int, choices=(2, 3), default=2)
    common.add_argument('--k', type=int, default=DEFAULT_K)
    common.add_argument('--res', default=DEFAULT_RESOLUTIONS, help='comma list of 1/h')
    common.add_argument('--alpha', type=float, default=None)
    common.add_argument('--out', default=None, help='output file (stdout when omitted)')
    common.add_argument('--format', choices=OUTPUT_FORMATS, default=None)
    common.add_argument('--plots', action='store_true', help='write SVG plots next to --out')
    common.add_argument('--workers', type=int, default=None)
    common.add_argument('--seed', type=int, default=0)
    common.add_argument('--config', default=None, help='sweep configuration file')

    parser = argparse.ArgumentParser(prog='speclab', description='Dirichlet eigenvalues of near-ball domains')
    parser.add_argument('--quiet', action='store_true', help='log warnings only')
    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('spectrum', parents=[common], help='eigenvalues of one domain')
    sub.add_parser('asymmetry', parents=[common], help='Fraenkel asymmetry of one domain')
    sub.add_parser('surgery', parents=[common], help='surgery diagnostics of one domain')
    sub.add_parser('sweep', parents=[common], help='family sweep to CSV or JSON lines')
    verify = sub.add_parser('verify', help='check inequalities on JSON-lines records')
    verify.add_argument('records', nargs='+', help='JSON-lines record files')
    verify.add_argument('--out', default=None, help='write the report as JSON')
    return parser


def _spec(args):
    shape = tuple(parse_float_list(args.shape)) if args.shape else ()
    return geo.FamilySpec(args.family, args.dim, shape)


def _settings(args):
    return Settings(seed=args.seed, alpha=args.alpha)

#----------------------------------------------

def cmd_spectrum(args):
    spec = _spec(args)
    domain = geo.make_family(spec, args.param)
    settings = _settings(args)
    solved = []
    for h in sorted(spacings_from_inverse(args.res), reverse=True):
        raster = geo.rasterize(domain, h, settings.node_budget)
        result = es.lowest_eigenpairs(es.assemble(raster), args.k, settings.solver_tol, settings.seed)
        solved.append((h, result.eigenvalues))
        print(f'h={format_number(h)} nodes={raster.size} ' + ' '.join(format_number(v) for v in result.eigenvalues))
    if len(solved) >= 2:
        lam = es.extrapolate(solved[-2], solved[-1])
        print('extrapolated ' + ' '.join(format_number(v) for v in lam))
    return 0


def cmd_asymmetry(args):
    domain = geo.make_family(_spec(args), args.param)
    raster = geo.rasterize(domain, min(spacings_from_inverse(args.res)))
    result = asy.fraenkel_asymmetry(raster)
    print(f'd={format_number(result.d)} d_err={format_number(result.uncertainty)} '
          f'center={",".join(format_number(c) for c in result.center)} eps={format_number(asy.fraenkel_deficit(raster))}')
    return 0


def cmd_surgery(args):
    spec = _spec(args)
    record, = Harness.run_sweep(spec, [args.param], args.k, spacings_from_inverse(args.res), _settings(args),
                                workers=1, alpha=args.alpha)
    if not record.ok:
        logging.error(record.error)
        return 2
    print(json.dumps(record.surgery, sort_keys=True, indent=2))
    return 0


def _emit(records, out, fmt):
    fmt = fmt or ('jsonl' if out and out.endswith('.jsonl') else 'csv')
    if out is None:
        sys.stdout.write(Report.format_jsonl(records) if fmt == 'jsonl' else Report.format_csv(records))
        return True
    return Report.write_jsonl(records, out) if fmt == 'jsonl' else Report.write_csv(records, out)


def cmd_sweep(args):
    if args.config:
        config = load_config(args.config, _settings(args))
    else:
        values = parse_float_list(args.params) if args.params else [args.param]
        job = FamilyJob(args.family, _spec(args), values, args.k, spacings_from_inverse(args.res), args.alpha)
        config = SweepConfig(_settings(args), [job])
    settings = config.settings
    if args.workers is not None:
        settings = replace(settings, workers=args.workers)
    settings = replace(settings, workers=resolve_workers(settings.workers))

    records = []
    for job in config.jobs:
        records += Harness.run_sweep(job.spec, job.values, job.k, job.resolutions, settings,
                                     name=job.name, alpha=job.alpha)
    out = args.out or config.out
    if not _emit(records, out, args.format or (config.format if args.config else None)):
        return 2
    if args.plots or config.plots:
        Report.plot_records(records, os.path.dirname(out) if out else '.')
    failed = [r.record_id for r in records if not r.ok]
    if failed:
        logging.error(f'{len(failed)} record(s) failed: {", ".join(failed)}')
        return 2
    return 0


def cmd_verify(args):
    records = []
    for path in args.records:
        records += Report.read_jsonl(path)
    report = verify_inequalities(records)
    text = json.dumps(report.to_dict(), sort_keys=True, indent=2)
    print(text)
    if args.out:
        Report.write_report(report, args.out)
    return report.exit_code


COMMANDS = {
    'spectrum': cmd_spectrum,
    'asymmetry': cmd_asymmetry,
    'surgery': cmd_surgery,
    'sweep': cmd_sweep,
    'verify': cmd_verify,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(format='%(levelname)s: %(message)s')
    logging.getLogger().setLevel(logging.WARNING if args.quiet else logging.INFO)
    try:
        return COMMANDS[args.command](args)
    except (SpecLabError, OSError) as err:
        logging.error(f'{type(err).__name__}: {err}')
        return 2

#==============================================================================

if __name__ == '__main__':
    sys.exit(main())
