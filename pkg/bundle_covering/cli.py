#!/usr/bin/env python3
"""
🧭 bundle-covering CLI

Verify covering relations for maps on vector bundles over the circle, find
enclosures of invariant sets, compute circle-map degrees, and write point
clouds (orbits, images of the domain, the toy β sweep) for plotting.

Exit codes: 0 verified (or the command completed), 1 not verified,
2 usage, configuration or evaluation error.
"""

import argparse
import json
import logging
import os
import sys
from typing import Dict, List, Optional

import numpy as np
from dotenv import load_dotenv

from .config import (
    CUSTOM_MAP,
    LOG_LEVEL_ENV,
    ExpressionMapConfig,
    MapConfig,
    RunConfig,
    build_config,
    load_config_file,
    resolve_map_name,
)
from .covering import (
    CoveringReport,
    Verdict,
    compute_degree,
    nhim_min_k,
    verify_fiber_covering,
    verify_full_covering,
    verify_sequence,
)
from .dynamics import (
    HomotopySpec,
    MapSpec,
    Spec,
    as_homotopy,
    builtin,
    check_endpoint,
    expression_eta,
    expression_expansion,
    expression_homotopy,
    expression_map,
    straight_line_homotopy,
)
from .enclosure import EnclosureDomain, EnclosureRun, propagate, theta_slice
from .errors import CoveringError, ParameterError
from .expressions import Expression
from .geometry import DomainSpec
from .interval import midpoint
from .reporting import export_cells, export_points, export_report, export_steps, export_sweep, export_witnesses
from .sampling import beta_sweep, domain_images, sample_orbit

logger = logging.getLogger(__name__)

EXIT_CODES = {Verdict.VERIFIED: 0, Verdict.NOT_VERIFIED: 1, Verdict.ERROR: 2}


def configure_logging(level_name: str):
    level = getattr(logging, str(level_name).upper(), None)
    if not isinstance(level, int):
        raise ParameterError(f"unknown log level {level_name!r}")
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    logging.getLogger().setLevel(level)


# --- spec construction ----------------------------------------------------


def custom_spec(section: ExpressionMapConfig, params: Dict[str, str]) -> Spec:
    """Map or homotopy from the config's expression section; run params override its constants"""
    constants = {**section.constants, **params}
    base = None
    if section.theta_out is not None:
        base = expression_map(
            section.name,
            section.theta_out,
            section.x_out,
            section.y_out,
            constants,
            eta_lift=section.eta_lift,
            A_coeff=section.A_coeff,
        )
    if not section.is_homotopy:
        return base
    return expression_homotopy(
        section.name,
        section.h_theta,
        section.h_x,
        section.h_y,
        section.eta_lift,
        section.A_coeff,
        constants,
        base_map=base,
    )


def build_spec(config: RunConfig, entry: MapConfig, subcommand: str) -> Spec:
    name = resolve_map_name(entry.name, subcommand)
    params = config.member_params(entry)
    if name == CUSTOM_MAP:
        return custom_spec(config.map, params)
    return builtin(name, params)


def _override_constants(config: RunConfig, entry: MapConfig) -> Dict[str, str]:
    if resolve_map_name(entry.name, config.subcommand) == CUSTOM_MAP:
        return {**config.map.constants, **config.member_params(entry)}
    return {}


def build_homotopy(config: RunConfig, entry: MapConfig) -> HomotopySpec:
    spec = build_spec(config, entry, "verify")
    constants = _override_constants(config, entry)
    eta = expression_eta(config.eta, constants) if config.eta else None
    endpoint_A = expression_expansion(config.a_coeff, constants) if config.a_coeff else None
    if isinstance(spec, MapSpec):
        h = straight_line_homotopy(spec, eta, endpoint_A, unstable=config.r_u is not None)
    else:
        h = as_homotopy(spec)
        if eta is not None:
            h = h.with_eta(eta)
        if endpoint_A is not None:
            h = h.with_expansion(endpoint_A)
    return h


def build_domain(config: RunConfig) -> DomainSpec:
    return DomainSpec.from_radii(config.r_u, config.r_s, mobius_stable=config.mobius_stable)


# --- output -----------------------------------------------------------------


def _mark(ok: bool) -> str:
    return "✅" if ok else "❌"


def print_report(report: CoveringReport, indent: str = ""):
    if report.verdict is Verdict.ERROR:
        print(f"{indent}💥 {report.name}: evaluation error: {report.reason}")
        return
    checked = report.cells_checked
    print(
        f"{indent}   exit {_mark(report.exit_ok)} ({checked.get('exit', 0)} cells)  "
        f"entry {_mark(report.entry_ok)} ({checked.get('entry', 0)} cells)  "
        f"expansion {_mark(report.expansion_ok)}"
    )
    if report.degree is not None:
        print(f"{indent}   degree {report.degree} (deg₂ = {report.deg2})")
    if report.failed_count:
        print(f"{indent}   {report.failed_count} failing cells, first: {report.failed_cells[0].cell}")


def summary_line(report: CoveringReport) -> str:
    if report.verified:
        return "✅ proof complete: VERIFIED"
    if report.verdict is Verdict.ERROR:
        return f"💥 {report.reason}"
    return f"❌ could not verify ({report.reason}): NOT VERIFIED"


# --- commands ---------------------------------------------------------------


def cmd_verify(config: RunConfig) -> int:
    domain = build_domain(config)
    scheme = config.subdivision
    homotopies = [build_homotopy(config, entry) for entry in config.maps]
    if config.debug:
        for h in homotopies:
            check_endpoint(h, domain)

    print(
        f"🔍 Verifying {', '.join(h.name for h in homotopies)} "
        f"({config.mode} mode, scheme {scheme}, refine depth {config.refine_depth}, {config.jobs} jobs)"
    )
    if config.mode == "sequence":
        report = verify_sequence(homotopies, domain, scheme, config.refine_depth, config.jobs)
        for index, member in enumerate(report.members):
            print(f"  [{index}] {member.name}: {member.verdict.value}")
            print_report(member, indent="  ")
    elif config.mode == "full":
        report = verify_full_covering(homotopies[0], domain, scheme, config.refine_depth, config.jobs)
        print_report(report)
    else:
        report = verify_fiber_covering(homotopies[0], domain, scheme, config.refine_depth, config.jobs)
        print_report(report)

    print(f"⏱️  {report.wall_time:.2f}s")
    if config.report:
        export_report(report, config.report, domain)
    if config.cells:
        export_witnesses(report.failed_cells, config.cells)
    print(summary_line(report))
    return EXIT_CODES[report.verdict]


def cmd_enclose(config: RunConfig) -> int:
    spec = _plot_map(config)
    settings = config.enclosure
    domain = EnclosureDomain.box(settings.radius, settings.disc)
    run = EnclosureRun(domain, spec, tuple(settings.grid), settings.max_iterates, settings.refine_steps)
    print(
        f"🧊 Enclosing {spec.name}: box radius {settings.radius}{' with disc' if settings.disc else ''}, "
        f"grid {settings.grid}, {settings.max_iterates} iterates, {settings.refine_steps} refinement steps"
    )
    run = propagate(run, config.jobs)
    for step in run.steps:
        print(f"  step {step.index}: {int(step.kept.sum())} of {len(step.cells)} cells kept")

    if settings.slice_theta is not None:
        theta = midpoint(Expression(settings.slice_theta, ()).evaluate({}))
        cells = theta_slice(run, theta)
        print(f"🔪 Slice theta = {theta!r}: {len(cells)} cells")
        if config.cells:
            export_cells(cells, config.cells, step=run.steps[-1].index)
    elif config.cells:
        export_steps(run.steps, config.cells, survivors_only=settings.survivors_only)
    if config.cells:
        print(f"📄 Wrote {config.cells}")
    print("✅ enclosure complete")
    return 0


def cmd_degree(config: RunConfig) -> int:
    if config.eta:
        eta = expression_eta(config.eta)
    else:
        entry = config.maps[0]
        eta = build_spec(config, entry, "verify").eta
        if eta is None:
            raise ParameterError(f"{entry.name} declares no eta lift; pass --eta")
    degree = compute_degree(eta, config.degree_parts)
    print(f"🧭 degree of eta {eta.description}: {degree}")
    print(f"deg₂ = {degree % 2}")
    return 0


def cmd_nhim_k(config: RunConfig) -> int:
    k = nhim_min_k(config.C, config.lam)
    print(f"🔢 smallest k with C·lambda^k < 1 (C = {config.C}, lambda = {config.lam}): {k}")
    return 0


def _plot_map(config: RunConfig) -> MapSpec:
    spec = build_spec(config, config.maps[0], config.subcommand)
    if isinstance(spec, HomotopySpec):
        spec = spec.base_map
    return spec


def _wrote(path: Optional[str]):
    if path:
        print(f"📄 Wrote {path}")


def cmd_orbit(config: RunConfig) -> int:
    f = _plot_map(config)
    settings = config.sampling
    start = settings.start_point
    orbit = sample_orbit(f, start, settings.n_points, settings.transient)
    print(
        f"🌀 Orbit of {f.name} from {start}: {len(orbit)} points after {settings.transient} transient steps, "
        f"|x| up to {np.abs(orbit[:, 1]).max():.3g}, |y| up to {np.abs(orbit[:, 2]).max():.3g}"
    )
    if config.out:
        steps = np.arange(settings.transient + 1, settings.transient + 1 + len(orbit))
        export_points(orbit, steps, config.out, config.mobius_stable)
    _wrote(config.out)
    return 0


def cmd_images(config: RunConfig) -> int:
    f = _plot_map(config)
    domain = build_domain(config)
    settings = config.sampling
    clouds = domain_images(f, domain, settings.iterates, tuple(settings.density))
    print(f"🖼️  Images of the domain under {f.name} ({settings.density} sample grid)")
    for k, points in clouds:
        if len(points):
            print(f"  image {k}: {len(points)} points, y in [{points[:, 2].min():.3g}, {points[:, 2].max():.3g}]")
        else:
            print(f"  image {k}: every point blew up")
    if config.out:
        points = np.concatenate([p for _, p in clouds])
        labels = np.concatenate([np.full(len(p), k) for k, p in clouds])
        export_points(points, labels, config.out, domain.mobius_stable)
    _wrote(config.out)
    return 0


def cmd_sweep(config: RunConfig) -> int:
    settings = config.sampling
    rows = beta_sweep(
        settings.n_beta,
        settings.sweep_points,
        settings.sweep_transient,
        settings.sweep_record,
        config.params,
        config.r_u or "1",
    )
    print(f"📈 Beta sweep of toy_fbeta: {settings.n_beta} values of beta, {len(rows)} points stay")
    if config.out:
        export_sweep(rows, config.out)
    _wrote(config.out)
    return 0


COMMANDS = {
    "verify": cmd_verify,
    "enclose": cmd_enclose,
    "degree": cmd_degree,
    "nhim-k": cmd_nhim_k,
    "orbit": cmd_orbit,
    "images": cmd_images,
    "sweep": cmd_sweep,
}


# --- argument parsing -------------------------------------------------------


def _param(text: str):
    name, sep, value = text.partition("=")
    if not sep or not name.strip() or not value.strip():
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    return name.strip(), value.strip()


def _grid(text: str):
    try:
        counts = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated counts, got {text!r}")
    if len(counts) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated counts, got {text!r}")
    return counts


def _start(text: str):
    values = [v.strip() for v in text.split(",")]
    if len(values) != 3 or not all(values):
        raise argparse.ArgumentTypeError(f"expected theta,x,y, got {text!r}")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON config file (flags override its values)')
    common.add_argument('--log-level', dest='log_level',
                        help=f'Logging level (default: ${LOG_LEVEL_ENV} or WARNING)')
    common.add_argument('--debug', action='store_true', default=None,
                        help='Debug logging and endpoint consistency check')
    common.add_argument('--jobs', type=int, help='Worker threads (default: $BUNDLE_COVERING_JOBS or CPU count)')
    common.add_argument('--dump-config', dest='dump_config', action='store_true',
                        help='Print the effective configuration as JSON and exit')

    maps = argparse.ArgumentParser(add_help=False)
    maps.add_argument('--map', dest='maps', action='append',
                      help='Builtin map/homotopy (cap, toy, cap_map, toy_fbeta, linear_nhim, ...) or custom; '
                           'repeat for sequence mode')
    maps.add_argument('--param', dest='params', action='append', type=_param, metavar='NAME=VALUE',
                      help='Map parameter: decimal, fraction a/b, or range lo:hi')

    parser = argparse.ArgumentParser(
        prog='bundle-covering',
        description="🧭 Covering relations on vector bundles over the circle",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  bundle-covering verify --map cap --mode full --scheme 4,100,50,50 --rs 1.2
  bundle-covering verify --map toy --param mu=1/10 --param beta=0:1
  bundle-covering verify --map toy --param mu=1/10 --eta "2*theta" --mode fiber
  bundle-covering enclose --map cap --radius 2 --slice "pi/3" --cells slice.csv
  bundle-covering degree --eta "3*theta"
  bundle-covering nhim-k --C 100 --lambda 0.5
  bundle-covering orbit --map cap --start 4,-0.46,-0.92 --out orbit.csv
  bundle-covering images --map toy --param mu=1/10 --ru 1 --rs 1 --mobius --out images.csv
  bundle-covering sweep --n-beta 101 --out sweep.csv
        """
    )
    subparsers = parser.add_subparsers(dest='command', required=True, help='Available commands')

    verify_parser = subparsers.add_parser('verify', parents=[common, maps], help='Verify a covering relation')
    verify_parser.add_argument('--mode', choices=['fiber', 'full', 'sequence'], help='Covering mode (default: full)')
    verify_parser.add_argument('--scheme', help='Subdivision n_alpha,n_theta,n_x,n_y (default: 4,100,50,50)')
    verify_parser.add_argument('--ru', dest='r_u', help='Unstable radius r_u, or "none" for no unstable direction')
    verify_parser.add_argument('--rs', dest='r_s', help='Stable radius r_s (default: 1.2)')
    verify_parser.add_argument('--mobius', dest='mobius_stable', action='store_true', default=None,
                               help='Stable bundle is orientation-reversing')
    verify_parser.add_argument('--refine-depth', dest='refine_depth', type=int,
                               help='Bisection levels for failing cells (default: 10)')
    verify_parser.add_argument('--n-family', dest='n_family', type=int,
                               help='Parts per range parameter (default: 10)')
    verify_parser.add_argument('--eta', help='Override the eta lift, e.g. "3*theta"')
    verify_parser.add_argument('--a-coeff', dest='a_coeff', help='Override the expansion coefficient A_theta')
    verify_parser.add_argument('--report', help='JSON report file')
    verify_parser.add_argument('--cells', help='CSV file for failing cells (status = failing condition)')

    enclose_parser = subparsers.add_parser('enclose', parents=[common, maps], help='Find an invariant-set enclosure')
    enclose_parser.add_argument('--radius', help='Domain box radius (default: 2)')
    enclose_parser.add_argument('--no-disc', dest='disc', action='store_false', default=None,
                                help='Use the whole box instead of the disc x^2 + y^2 < r^2')
    enclose_parser.add_argument('--grid', type=_grid, help='Initial grid n_theta,n_x,n_y (default: 32,16,16)')
    enclose_parser.add_argument('--max-iterates', dest='max_iterates', type=int, help='Iterates per cell (default: 3)')
    enclose_parser.add_argument('--refine-steps', dest='refine_steps', type=int, help='Refinement steps (default: 2)')
    enclose_parser.add_argument('--slice', dest='slice_theta', help='Only survivors at this theta, e.g. "pi/3"')
    enclose_parser.add_argument('--survivors-only', dest='survivors_only', action='store_true', default=None,
                                help='Write only kept cells')
    enclose_parser.add_argument('--cells', help='CSV file for cells')

    degree_parser = subparsers.add_parser('degree', parents=[common], help='Degree of a circle map')
    degree_parser.add_argument('--eta', help='Lift of the circle map, e.g. "3*theta"')
    degree_parser.add_argument('--map', dest='maps', action='append', help='Use the declared lift of this map')
    degree_parser.add_argument('--parts', dest='degree_parts', type=int, help='Initial segments (default: 64)')

    nhim_parser = subparsers.add_parser('nhim-k', parents=[common], help='Smallest k with C*lambda^k < 1')
    nhim_parser.add_argument('--C', dest='C', help='Rate constant C > 0')
    nhim_parser.add_argument('--lambda', dest='lam', help='Rate lambda in (0, 1)')

    plot = argparse.ArgumentParser(add_help=False)
    plot.add_argument('--out', help='CSV file for the points')
    plot.add_argument('--mobius', dest='mobius_stable', action='store_true', default=None,
                      help='Mark the stable bundle as orientation-reversing at the seam')

    orbit_parser = subparsers.add_parser('orbit', parents=[common, maps, plot], help='Float orbit of a map')
    orbit_parser.add_argument('--start', type=_start, help='Starting point theta,x,y (default: 4,-0.46,-0.92)')
    orbit_parser.add_argument('--points', dest='n_points', type=int, help='Orbit points to write (default: 1000)')
    orbit_parser.add_argument('--transient', type=int, help='Steps skipped before writing (default: 0)')

    images_parser = subparsers.add_parser('images', parents=[common, maps, plot],
                                          help='Point clouds of f(D), f^2(D), ...')
    images_parser.add_argument('--ru', dest='r_u', help='Unstable radius r_u, or "none" (default: 1)')
    images_parser.add_argument('--rs', dest='r_s', help='Stable radius r_s (default: 1.2)')
    images_parser.add_argument('--iterates', type=int, help='Number of images (default: 2)')
    images_parser.add_argument('--density', type=_grid, help='Sample grid n_theta,n_x,n_y (default: 200,20,20)')

    sweep_parser = subparsers.add_parser('sweep', parents=[common],
                                         help='x-values of toy_fbeta that stay in |x| <= r_u, against beta')
    sweep_parser.add_argument('--param', dest='params', action='append', type=_param, metavar='NAME=VALUE',
                              help='toy_fbeta parameter other than beta (default: mu=1/10)')
    sweep_parser.add_argument('--ru', dest='r_u', help='Unstable radius r_u (default: 1)')
    sweep_parser.add_argument('--n-beta', dest='n_beta', type=int, help='Values of beta in [0, 1] (default: 101)')
    sweep_parser.add_argument('--sweep-points', dest='sweep_points', type=int,
                              help='Starting values of x per beta (default: 201)')
    sweep_parser.add_argument('--sweep-transient', dest='sweep_transient', type=int,
                              help='Steps before recording (default: 200)')
    sweep_parser.add_argument('--record', dest='sweep_record', type=int, help='Steps recorded (default: 50)')
    sweep_parser.add_argument('--out', help='CSV file for (beta, x) pairs')

    return parser


ENCLOSURE_FLAGS = ("radius", "disc", "grid", "max_iterates", "refine_steps", "slice_theta", "survivors_only")
SAMPLING_FLAGS = (
    "start", "n_points", "transient", "iterates", "density", "n_beta", "sweep_points", "sweep_transient", "sweep_record",
)
PLAIN_FLAGS = (
    "mode", "scheme", "r_u", "r_s", "mobius_stable", "refine_depth", "n_family", "eta", "a_coeff",
    "degree_parts", "C", "lam", "jobs", "report", "cells", "out", "debug",
)


def overrides_from_args(args: argparse.Namespace) -> Dict:
    overrides = {"subcommand": args.command}
    for name in PLAIN_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "maps", None):
        overrides["maps"] = [{"name": name} for name in args.maps]
    if getattr(args, "params", None):
        overrides["params"] = dict(args.params)
    enclosure = {name: getattr(args, name, None) for name in ENCLOSURE_FLAGS}
    if any(v is not None for v in enclosure.values()):
        overrides["enclosure"] = enclosure
    sampling = {name: getattr(args, name, None) for name in SAMPLING_FLAGS}
    if any(v is not None for v in sampling.values()):
        overrides["sampling"] = sampling
    return overrides


def run(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        level = args.log_level or ("DEBUG" if args.debug else os.getenv(LOG_LEVEL_ENV, "WARNING"))
        configure_logging(level)
        file_data = load_config_file(args.config) if args.config else None
        config = build_config(file_data, overrides_from_args(args))
        if args.dump_config:
            print(json.dumps(config.dump(), indent=2, ensure_ascii=False))
            return 0
        logger.debug(f"Running {config.subcommand} with {config.dump()}")
        return COMMANDS[config.subcommand](config)
    except (CoveringError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"❌ {e}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
