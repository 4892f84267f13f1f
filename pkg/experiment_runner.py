#!/usr/bin/env python3
"""
Experiment Runner - sweeps topology x agent count x stepsize over seeded repeats
and writes per-run trajectories plus summary tables
"""

import csv
import math
import os
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from config import ExperimentSpec, config
from gt_driver import RunConfig, run
from lower_solver import InnerConfig, fixed_budget, sqrt_budget
from network import build_mixing
from smpec_problem import NoiseModel, build_instance

TRAJECTORY_HEADER = ['epoch', 'objective_mean', 'objective_se', 'consensus_violation',
                     'tracker_dispersion', 'inner_steps']
SUMMARY_HEADER = ['m', 'topology', 'gamma', 'status', 'repeats', 'rho', 'gamma_used',
                  'consensus_mean', 'consensus_per_seed', 'objective_mean', 'objective_per_seed',
                  'gap_to_centralized', 'trajectories', 'error']


def fmt(value):
    """Lossless text form of a number"""
    return '%.17g' % value


def derive_run_seed(master_seed, combo_index, repeat):
    """Seed of one (combination, repeat): SeedSequence(master, spawn_key=(combo_index, repeat))"""
    sequence = np.random.SeedSequence(master_seed, spawn_key=(combo_index, repeat))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def derive_common_seed(master_seed, repeat):
    """Initial-point and evaluation seed shared by every combination of one repeat"""
    sequence = np.random.SeedSequence(master_seed, spawn_key=(repeat,))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class RunJob:
    combo_index: int
    repeat: int
    topology: str
    m: int
    gamma: float
    seed: int
    common_seed: Optional[int] = None


@dataclass
class RunOutcome:
    job: RunJob
    status: str
    consensus: float = float('nan')
    objective: float = float('nan')
    gamma_used: float = float('nan')
    rho: float = float('nan')
    trajectory_file: Optional[str] = None
    error: str = ''


@dataclass
class ResultRow:
    """Seed-aggregated outcome of one (m, topology, gamma) combination"""

    m: int
    topology: str
    gamma: float
    status: str
    consensus_per_seed: Tuple[float, ...] = ()
    objective_per_seed: Tuple[float, ...] = ()
    trajectory_files: Tuple[str, ...] = ()
    rho: float = float('nan')
    gamma_used: float = float('nan')
    gap_to_centralized: float = float('nan')
    error: str = ''

    @property
    def consensus_mean(self):
        return float(np.mean(self.consensus_per_seed)) if self.consensus_per_seed else float('nan')

    @property
    def objective_mean(self):
        return float(np.mean(self.objective_per_seed)) if self.objective_per_seed else float('nan')


@dataclass
class ResultTable:
    rows: List[ResultRow] = field(default_factory=list)
    output_dir: Optional[str] = None

    def __len__(self):
        return len(self.rows)

    def row(self, m, topology, gamma):
        for result in self.rows:
            if result.m == m and result.topology == topology and result.gamma == gamma:
                return result
        raise KeyError((m, topology, gamma))

    def failed(self):
        return [result for result in self.rows if result.status != 'ok']


# ===== BUILDING ONE RUN =====

def instance_kwargs(spec):
    params = spec.instance_params
    if spec.instance == 'benchmark':
        keys = ('heterogeneity', 'seed', 'lipschitz_box')
    else:
        keys = ('n', 'p', 'seed', 'lipschitz_box')
    return {key: params[key] for key in keys if params.get(key) is not None}


def build_experiment_instance(spec, m):
    noise_xi = NoiseModel(mean=spec.xi_mean, std_dev=spec.xi_std, stream=1)
    noise_zeta = NoiseModel(mean=spec.zeta_mean, std_dev=spec.zeta_std, stream=2)
    return build_instance(spec.instance, m, noise_xi=noise_xi, noise_zeta=noise_zeta, **instance_kwargs(spec))


def run_config_for(spec, instance, topology, gamma, seed, common_seed=None):
    budget = sqrt_budget if spec.inner_budget == 'sqrt' else fixed_budget(spec.inner_budget)
    inner = InnerConfig.default_for(instance, gamma_hat=spec.gamma_hat, Gamma=spec.Gamma, budget_rule=budget)
    return RunConfig(
        gamma=gamma,
        eta=spec.eta,
        K=spec.K,
        inner=inner,
        topology=topology,
        seed=seed,
        common_seed=common_seed,
        num_repeats=spec.repeats,
        eval_samples=spec.eval_samples,
        eval_inner_budget=spec.eval_inner_budget,
        eval_every=spec.eval_every,
        warm_start=spec.warm_start,
        init_std=spec.init_std,
        check_invariants=spec.check_invariants,
        gamma_rule=spec.gamma_rule,
        beta=spec.beta,
        alpha=spec.alpha,
    )


def trajectory_filename(job):
    return f"m{job.m}_{job.topology}_gamma{job.gamma:g}_rep{job.repeat}.csv"


def write_trajectory_csv(path, record):
    """One row per epoch, %.17g numbers"""
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(TRAJECTORY_HEADER)
        for epoch, mean, se, consensus, dispersion, steps in record.rows():
            writer.writerow([int(epoch), fmt(mean), fmt(se), fmt(consensus), fmt(dispersion), int(steps)])
    return path


def execute_job(spec, job, trajectory_dir):
    """Run one (combination, repeat); failures come back as a 'failed' outcome"""
    try:
        instance = build_experiment_instance(spec, job.m)
        mixing = build_mixing(job.topology, job.m, spec.topology_params())
        cfg = run_config_for(spec, instance, job.topology, job.gamma, job.seed, job.common_seed)
        record = run(instance, mixing, cfg)
        filename = trajectory_filename(job)
        write_trajectory_csv(os.path.join(trajectory_dir, filename), record)
        return RunOutcome(job=job, status='ok', consensus=record.last_consensus_violation(),
                          objective=record.last_objective(), gamma_used=record.gamma,
                          rho=mixing.rho, trajectory_file=filename)
    except Exception as e:
        return RunOutcome(job=job, status='failed', error=f"{type(e).__name__}: {e}")


def _execute_packed(args):
    return execute_job(*args)


# ===== SWEEP =====

def plan_jobs(spec):
    return [RunJob(combo_index=index, repeat=repeat, topology=topology, m=m, gamma=gamma,
                   seed=derive_run_seed(spec.seed, index, repeat),
                   common_seed=derive_common_seed(spec.seed, repeat))
            for index, (topology, m, gamma) in enumerate(spec.combinations())
            for repeat in range(spec.repeats)]


def aggregate(spec, outcomes):
    """Group outcomes by combination (in sweep order) and attach the centralized gap"""
    rows = []
    for index, (topology, m, gamma) in enumerate(spec.combinations()):
        group = sorted((o for o in outcomes if o.job.combo_index == index), key=lambda o: o.job.repeat)
        failures = [o for o in group if o.status != 'ok']
        row = ResultRow(m=m, topology=topology, gamma=gamma, status='failed' if failures else 'ok')
        if failures:
            row.error = failures[0].error
        else:
            row.consensus_per_seed = tuple(o.consensus for o in group)
            row.objective_per_seed = tuple(o.objective for o in group)
            row.trajectory_files = tuple(o.trajectory_file for o in group)
            row.rho = group[0].rho
            row.gamma_used = float(np.mean([o.gamma_used for o in group]))
        rows.append(row)

    for row in rows:
        if row.m == 1 or row.status != 'ok':
            continue
        for central in rows:
            if central.m == 1 and central.topology == row.topology and central.gamma == row.gamma \
                    and central.status == 'ok' and central.objective_mean != 0:
                row.gap_to_centralized = (row.objective_mean - central.objective_mean) / abs(central.objective_mean)
    return rows


def run_experiment(spec: ExperimentSpec, output_dir=None, parallel=None, verbose=False, show_progress=True):
    """
    Execute every (combination, repeat) of the sweep and write all outputs

    Args:
        spec (ExperimentSpec): validated experiment
        output_dir (str): overrides spec.output_dir
        parallel (int): worker processes (overrides spec.parallel)
        verbose (bool): print one line per finished run
        show_progress (bool): tqdm bar over runs

    Returns:
        ResultTable
    """
    output_dir = output_dir or spec.output_dir
    trajectory_dir = config.ensure_directories(config.get_output_path('trajectories', output_dir))
    workers = parallel or spec.parallel

    jobs = plan_jobs(spec)
    packed = [(spec, job, trajectory_dir) for job in jobs]
    print(f"🚀 Running {len(spec.combinations())} combinations x {spec.repeats} repeats ({len(jobs)} runs, {workers} worker(s))")

    outcomes = []
    bar = tqdm(total=len(jobs), desc='runs', disable=not show_progress)
    if workers > 1:
        with Pool(processes=workers) as pool:
            for outcome in pool.imap_unordered(_execute_packed, packed):
                outcomes.append(outcome)
                _report(outcome, verbose)
                bar.update(1)
    else:
        for args in packed:
            outcome = execute_job(*args)
            outcomes.append(outcome)
            _report(outcome, verbose)
            bar.update(1)
    bar.close()

    table = ResultTable(rows=aggregate(spec, outcomes), output_dir=output_dir)
    write_summary_csv(config.get_output_path('summary.csv', output_dir), table)
    if spec.write_markdown:
        write_summary_markdown(config.get_output_path('summary.md', output_dir), table, spec)

    failed = table.failed()
    if failed:
        print(f"❌ {len(failed)} combination(s) failed:")
        for row in failed:
            print(f"   • m={row.m} {row.topology} gamma={row.gamma:g}: {row.error}")
    print(f"✅ Results saved to: {output_dir}")
    return table


def _report(outcome, verbose):
    if not verbose:
        return
    job = outcome.job
    label = f"m={job.m} {job.topology} gamma={job.gamma:g} repeat {job.repeat}"
    if outcome.status == 'ok':
        tqdm.write(f"   ✅ {label}: consensus {outcome.consensus:.4e}, objective {outcome.objective:.6f}")
    else:
        tqdm.write(f"   ❌ {label}: {outcome.error}")


# ===== SUMMARY TABLES =====

def write_summary_csv(path, table):
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(SUMMARY_HEADER)
        for row in table.rows:
            writer.writerow([
                row.m, row.topology, fmt(row.gamma), row.status, len(row.consensus_per_seed),
                fmt(row.rho), fmt(row.gamma_used),
                fmt(row.consensus_mean), ';'.join(fmt(v) for v in row.consensus_per_seed),
                fmt(row.objective_mean), ';'.join(fmt(v) for v in row.objective_per_seed),
                fmt(row.gap_to_centralized), ';'.join(row.trajectory_files), row.error
            ])
    return path


def _cell(row, attribute, style):
    if row is None:
        return '-'
    if row.status != 'ok':
        return 'failed'
    value = getattr(row, attribute)
    return 'n/a' if math.isnan(value) else format(value, style)


def _markdown_grid(table, spec, gamma, attribute, style):
    topologies = [t for t in ('ring', 'sparse', 'complete', 'custom') if t in spec.topologies]
    lines = ['| Setting | ' + ' | '.join(f"{t.capitalize()} graph" for t in topologies) + ' |',
             '|---' * (len(topologies) + 1) + '|']
    for m in spec.m_values:
        cells = []
        for topology in topologies:
            try:
                cells.append(_cell(table.row(m, topology, gamma), attribute, style))
            except KeyError:
                cells.append('-')
        lines.append(f"| m = {m} | " + ' | '.join(cells) + ' |')
    return lines


def write_summary_markdown(path, table, spec):
    """Consensus, objective and centralized-gap grids, one block per stepsize"""
    lines = ['# Experiment summary', '',
             f"instance: {spec.instance}, eta = {spec.eta:g}, K = {spec.K}, "
             f"{spec.repeats} repeats, master seed {spec.seed}", '']
    for gamma in spec.gammas:
        lines += [f"## gamma = {gamma:g}", '',
                  'Seed-mean consensus violation at the last epoch', '']
        lines += _markdown_grid(table, spec, gamma, 'consensus_mean', '.4e')
        lines += ['', 'Seed-mean implicit objective at the last epoch', '']
        lines += _markdown_grid(table, spec, gamma, 'objective_mean', '.6f')
        lines += ['', 'Relative objective gap to m = 1', '']
        lines += _markdown_grid(table, spec, gamma, 'gap_to_centralized', '.2%')
        lines.append('')
    with open(path, 'w', encoding='utf-8') as f:
        f.write('\n'.join(lines))
    return path
