#!/usr/bin/env python3
"""
Distributed SMPEC Simulator (rs-DZGT)

Commands:
- run:        execute the sweep described by a YAML config and write CSV / Markdown results
- validate:   parse and range-check a config without running anything
- constants:  print the stepsize constants of the convergence analysis for a config

Usage:
    python main.py run configs/default.yaml                 # Default experiment
    python main.py run configs/benchmark_sweep.yaml --parallel 4
    python main.py run configs/default.yaml --out results/tmp --seed 7
    python main.py run configs/default.yaml --preset desk_smoke
    python main.py validate configs/benchmark_sweep.yaml
    python main.py constants configs/default.yaml --beta 0.1

Exit codes: 0 success, 2 configuration error, 3 runtime failure or cancellation.
Set SMPEC_OUTPUT_DIR (environment or .env) to redirect results.
"""

import argparse
import logging
import sys

from config import PRESETS, SimulatorConfig, apply_preset, load_config_file, resolve_output_dir
from errors import ConfigError, ParseError, SmpecError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def parse_arguments(argv=None):
    """Parse command line arguments"""
    parser = argparse.ArgumentParser(
        description='Distributed SMPEC simulator (rs-DZGT gradient tracking)',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py run configs/default.yaml              # complete graph, m=5, 5 repeats
  python main.py run configs/benchmark_sweep.yaml -p 4     # 24-combination sweep on 4 workers
  python main.py validate configs/desk_smoke.yaml      # check a config
  python main.py constants configs/default.yaml        # theory stepsize constants
        """
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    run_parser = subparsers.add_parser('run', help='Run an experiment sweep')
    run_parser.add_argument('config_path', help='YAML experiment file')
    run_parser.add_argument('--out', help='Output directory (overrides SMPEC_OUTPUT_DIR and the file)')
    run_parser.add_argument('--seed', type=int, help='Master seed (overrides output.seed)')
    run_parser.add_argument('--parallel', '-p', type=int, help='Worker processes (overrides output.parallel)')
    run_parser.add_argument('--preset', choices=list(PRESETS.keys()),
                            help='Apply a configuration preset before reading the file')
    run_parser.add_argument('--no-progress', action='store_true', help='Hide the progress bar')

    validate_parser = subparsers.add_parser('validate', help='Validate a config file')
    validate_parser.add_argument('config_path', help='YAML experiment file')
    validate_parser.add_argument('--preset', choices=list(PRESETS.keys()),
                                 help='Apply a configuration preset before reading the file')

    constants_parser = subparsers.add_parser('constants', help='Print theory stepsize constants')
    constants_parser.add_argument('config_path', help='YAML experiment file')
    constants_parser.add_argument('--beta', type=float, help='beta (default: midpoint of its admissible interval)')
    constants_parser.add_argument('--eps0', type=float, help='initial inexactness (default: from a k=0 inner solve)')

    for sub in (run_parser, validate_parser, constants_parser):
        sub.add_argument('--verbose', '-v', action='store_true', help='Enable verbose output')

    return parser.parse_args(argv)


def load_spec(args):
    """Defaults, then the optional preset, then the file"""
    base = SimulatorConfig()
    if getattr(args, 'preset', None):
        apply_preset(args.preset, target=base)
    try:
        spec = load_config_file(args.config_path, base=base)
    except OSError as e:
        raise ParseError(f"cannot read config file: {e}") from e
    print(f"📂 Loaded config: {args.config_path}")
    return spec


def command_validate(args):
    spec = load_spec(args)
    combos = spec.combinations()
    print(f"✅ Config is valid: {len(combos)} combinations x {spec.repeats} repeats")
    print(f"   Instance: {spec.instance}")
    print(f"   Topologies: {', '.join(spec.topologies)}")
    print(f"   Agents: {', '.join(str(m) for m in spec.m_values)}")
    print(f"   Stepsizes: {', '.join(f'{g:g}' for g in spec.gammas)} ({spec.gamma_rule})")
    print(f"   eta = {spec.eta:g}, K = {spec.K}")
    if args.verbose:
        for topology, m, gamma in combos:
            print(f"   • m={m} {topology} gamma={gamma:g}")
    return EXIT_OK


def command_run(args):
    from dataclasses import replace
    from experiment_runner import run_experiment

    spec = load_spec(args)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    output_dir = resolve_output_dir(spec, args.out)
    print(f"📁 Output directory: {output_dir}")

    table = run_experiment(spec, output_dir=output_dir, parallel=args.parallel,
                           verbose=args.verbose, show_progress=not args.no_progress)

    print("\n" + "=" * 60)
    print("📋 SWEEP SUMMARY:")
    print("=" * 60)
    for row in table.rows:
        if row.status == 'ok':
            print(f"   • m={row.m:<4} {row.topology:<9} gamma={row.gamma:<8g} "
                  f"consensus {row.consensus_mean:.4e}   objective {row.objective_mean:.6f}")
        else:
            print(f"   • m={row.m:<4} {row.topology:<9} gamma={row.gamma:<8g} ❌ {row.error}")
    return EXIT_RUNTIME if table.failed() else EXIT_OK


def command_constants(args):
    import numpy as np

    from experiment_runner import build_experiment_instance, run_config_for
    from gt_driver import SeedStreams
    from lower_solver import solve_inner
    from network import build_mixing
    from theory_constants import beta_upper_bound, theory_constants

    spec = load_spec(args)
    for topology, m in sorted({(t, m) for t, m, _ in spec.combinations()}, key=lambda pair: (pair[1], pair[0])):
        instance = build_experiment_instance(spec, m)
        mixing = build_mixing(topology, m, spec.topology_params())
        beta = args.beta if args.beta is not None else (spec.beta or 0.5 * beta_upper_bound(mixing.rho))
        eps0 = args.eps0
        if eps0 is None:
            cfg = run_config_for(spec, instance, topology, spec.gammas[0], spec.seed)
            streams = SeedStreams(spec.seed)
            solved = solve_inner(instance, np.zeros(instance.n), 0, cfg.inner, np.zeros(instance.p),
                                 streams.rng('zeta_x'))
            eps0 = solved.epsilon_estimate
        constants = theory_constants(instance.L0, instance.L0_tilde, instance.n, m, spec.eta,
                                     mixing.rho, beta, spec.alpha, eps0, K=max(spec.K, 1))
        print(f"\n📐 m={m} {topology} (rho={mixing.rho:.6g}, beta={beta:.6g}, eps0={eps0:.6g})")
        print(f"   L0 = {instance.L0:.6g}, L0_tilde = {instance.L0_tilde:.6g}")
        for name, value in constants.as_dict().items():
            print(f"   {name:<10} {value:.10g}")
    return EXIT_OK


COMMANDS = {
    'run': command_run,
    'validate': command_validate,
    'constants': command_constants,
}


def main(argv=None):
    """Main function of the SMPEC simulator CLI"""

    args = parse_arguments(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')

    print("🧮 Distributed SMPEC Simulator 🧮")
    print("=" * 60)

    try:
        return COMMANDS[args.command](args)
    except KeyboardInterrupt:
        print("\n\n⏹️  Cancelled by user")
        return EXIT_RUNTIME
    except ConfigError as e:
        print(f"\n❌ Configuration error: {e}")
        return EXIT_CONFIG
    except (SmpecError, OSError, ArithmeticError, RuntimeError, ValueError, TypeError) as e:
        print(f"\n❌ An error occurred: {e}")
        if args.verbose:
            import traceback
            traceback.print_exc()
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
