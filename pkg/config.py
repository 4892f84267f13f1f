#!/usr/bin/env python3
"""
Configuration Settings for the distributed SMPEC simulator
Centralized defaults for instances, noise, networks, the algorithm, evaluation and output,
plus the YAML experiment-file parser
"""

import copy
import os
from dataclasses import dataclass, field
from typing import Optional, Tuple

import yaml
from dotenv import load_dotenv

from errors import ParseError, RangeError

INSTANCES = ("benchmark", "synthetic")
TOPOLOGY_NAMES = ("ring", "sparse", "complete", "custom")
WEIGHT_RULE_NAMES = ("metropolis", "laplacian")
GAMMA_RULE_NAMES = ("fixed", "theory")
OUTPUT_DIR_ENV = "SMPEC_OUTPUT_DIR"


class SimulatorConfig:
    """Default settings, one dictionary per config-file section"""

    def __init__(self):
        # ===== INSTANCE CONFIGURATION =====
        self.instance_settings = {
            'name': 'benchmark',        # 'benchmark' or 'synthetic'
            'heterogeneity': 0.0,       # benchmark: per-agent coefficient spread
            'lipschitz_box': 2.0,       # box half-width for L0 / L0_tilde estimates
            'n': 3,                     # synthetic only
            'p': 2,                     # synthetic only
            'seed': 0                   # instance data seed
        }

        # ===== NOISE CONFIGURATION =====
        self.noise_settings = {
            'xi_mean': 1.0,
            'xi_std': 0.1,
            'zeta_mean': 1.0,
            'zeta_std': 0.1
        }

        # ===== NETWORK CONFIGURATION =====
        self.network_settings = {
            'topology': ['complete'],   # any of 'ring', 'sparse', 'complete', 'custom'
            'm': [5],
            'sparse_seed': 0,
            'chords': None,             # None: floor(m/5)
            'sparse_pattern': None,     # 'ring10_chords' for the fixed 10-agent graph
            'complete_uniform': True,   # W = (1/m) 1 1^T on the complete graph (metropolis only)
            'weights': 'metropolis',    # 'metropolis' or 'laplacian' (W = I - (c/m) L)
            'laplacian_scale': 1.0,     # c in (0, 1]
            'edge_list': None           # path, required for 'custom'
        }

        # ===== ALGORITHM CONFIGURATION =====
        self.algorithm_settings = {
            'gamma': [1e-5],
            'eta': 0.1,
            'K': 100,
            'repeats': 5,
            'gamma_rule': 'fixed',      # 'theory' uses gamma = C0 / sqrt(K)
            'beta': None,
            'alpha': 1.0,
            'gamma_hat': None,          # None: 1 / mu_F
            'Gamma': 1.0,
            'inner_budget': 'sqrt',     # 'sqrt' or a fixed step count
            'warm_start': True,
            'init_std': 1.0,
            'check_invariants': False
        }

        # ===== EVALUATION CONFIGURATION =====
        self.evaluation_settings = {
            'samples': 200,
            'inner_budget': 2000,
            'every': 1                  # <= 0 disables objective evaluation
        }

        # ===== OUTPUT CONFIGURATION =====
        self.output_settings = {
            'directory': 'results',
            'seed': 0,
            'parallel': 1,
            'write_markdown': True
        }

    def sections(self):
        return {
            'instance': self.instance_settings,
            'noise': self.noise_settings,
            'network': self.network_settings,
            'algorithm': self.algorithm_settings,
            'evaluation': self.evaluation_settings,
            'output': self.output_settings
        }

    def get_output_path(self, filename=None, directory=None):
        """Get full output path for a file"""
        base_path = directory or self.output_settings['directory']
        if filename is None:
            return base_path
        return os.path.join(base_path, filename)

    def ensure_directories(self, directory=None):
        """Create the output directory if it doesn't exist"""
        path = directory or self.output_settings['directory']
        os.makedirs(path, exist_ok=True)
        return path

    def print_current_config(self):
        """Print current configuration summary"""
        print("⚙️  Current Configuration Summary:")
        print("=" * 50)

        print(f"\n🧩 INSTANCE:")
        print(f"   Name: {self.instance_settings['name']}")
        print(f"   Noise xi: N({self.noise_settings['xi_mean']}, {self.noise_settings['xi_std']}^2)")
        print(f"   Noise zeta: N({self.noise_settings['zeta_mean']}, {self.noise_settings['zeta_std']}^2)")

        print(f"\n🕸️  NETWORK:")
        print(f"   Topologies: {self.network_settings['topology']}")
        print(f"   Agents: {self.network_settings['m']}")

        print(f"\n📐 ALGORITHM:")
        print(f"   Stepsizes: {self.algorithm_settings['gamma']} ({self.algorithm_settings['gamma_rule']})")
        print(f"   eta: {self.algorithm_settings['eta']}, K: {self.algorithm_settings['K']}")
        print(f"   Repeats: {self.algorithm_settings['repeats']}")
        print(f"   Warm start: {'✅' if self.algorithm_settings['warm_start'] else '❌'}")

        print(f"\n📁 OUTPUT:")
        print(f"   Directory: {self.output_settings['directory']}")
        print(f"   Markdown summary: {'✅' if self.output_settings['write_markdown'] else '❌'}")


# Create a global config instance
config = SimulatorConfig()

# Preset configurations for easy switching
PRESETS = {
    'benchmark_sweep': {
        'network': {'topology': ['ring', 'sparse', 'complete'], 'm': [1, 5, 10, 100],
                    'weights': 'laplacian', 'laplacian_scale': 0.05},
        'algorithm': {'gamma': [1e-5, 1e-6], 'K': 100, 'repeats': 5}
    },
    'desk_smoke': {
        'network': {'topology': ['ring', 'complete'], 'm': [1, 3]},
        'algorithm': {'K': 5, 'repeats': 2},
        'evaluation': {'samples': 50, 'inner_budget': 200}
    },
    'theory_mode': {
        'instance': {'name': 'synthetic'},
        'noise': {'xi_mean': 0.0, 'zeta_mean': 0.0},
        'network': {'topology': ['ring'], 'm': [5]},
        'algorithm': {'gamma_rule': 'theory', 'K': 400}
    }
}


def apply_preset(preset_name, target=None):
    """Apply a preset configuration"""
    target = target or config
    if preset_name not in PRESETS:
        print(f"❌ Unknown preset: {preset_name}")
        print(f"Available presets: {list(PRESETS.keys())}")
        return False

    print(f"🎯 Applying preset: {preset_name}")
    sections = target.sections()
    for section, values in PRESETS[preset_name].items():
        sections[section].update(copy.deepcopy(values))

    print(f"✅ Preset '{preset_name}' applied successfully!")
    return True


# ===== EXPERIMENT FILES =====

@dataclass(frozen=True)
class ExperimentSpec:
    """Validated experiment: a sweep over topologies x agent counts x stepsizes"""

    instance: str = 'benchmark'
    instance_params: dict = field(default_factory=dict)
    xi_mean: float = 1.0
    xi_std: float = 0.1
    zeta_mean: float = 1.0
    zeta_std: float = 0.1
    topologies: Tuple[str, ...] = ('complete',)
    m_values: Tuple[int, ...] = (5,)
    gammas: Tuple[float, ...] = (1e-5,)
    eta: float = 0.1
    K: int = 100
    repeats: int = 5
    gamma_rule: str = 'fixed'
    beta: Optional[float] = None
    alpha: float = 1.0
    gamma_hat: Optional[float] = None
    Gamma: float = 1.0
    inner_budget: object = 'sqrt'
    warm_start: bool = True
    init_std: float = 1.0
    check_invariants: bool = False
    sparse_seed: int = 0
    chords: Optional[int] = None
    sparse_pattern: Optional[str] = None
    complete_uniform: bool = True
    weights: str = 'metropolis'
    laplacian_scale: float = 1.0
    edge_list: Optional[str] = None
    eval_samples: int = 200
    eval_inner_budget: int = 2000
    eval_every: int = 1
    output_dir: str = 'results'
    seed: int = 0
    parallel: int = 1
    write_markdown: bool = True

    def combinations(self):
        """(topology, m, gamma) in sweep order: m outermost, then topology, then gamma"""
        return [(topology, m, gamma)
                for m in self.m_values
                for topology in self.topologies
                for gamma in self.gammas]

    def topology_params(self):
        return {
            'seed': self.sparse_seed,
            'chords': self.chords,
            'pattern': self.sparse_pattern,
            'uniform': self.complete_uniform,
            'weights': self.weights,
            'laplacian_scale': self.laplacian_scale,
            'edge_list': self.edge_list
        }


# section key -> ExperimentSpec field
FIELD_NAMES = {
    ('instance', 'name'): 'instance',
    ('noise', 'xi_mean'): 'xi_mean',
    ('noise', 'xi_std'): 'xi_std',
    ('noise', 'zeta_mean'): 'zeta_mean',
    ('noise', 'zeta_std'): 'zeta_std',
    ('network', 'topology'): 'topologies',
    ('network', 'm'): 'm_values',
    ('network', 'sparse_seed'): 'sparse_seed',
    ('network', 'chords'): 'chords',
    ('network', 'sparse_pattern'): 'sparse_pattern',
    ('network', 'complete_uniform'): 'complete_uniform',
    ('network', 'weights'): 'weights',
    ('network', 'laplacian_scale'): 'laplacian_scale',
    ('network', 'edge_list'): 'edge_list',
    ('algorithm', 'gamma'): 'gammas',
    ('algorithm', 'eta'): 'eta',
    ('algorithm', 'K'): 'K',
    ('algorithm', 'repeats'): 'repeats',
    ('algorithm', 'gamma_rule'): 'gamma_rule',
    ('algorithm', 'beta'): 'beta',
    ('algorithm', 'alpha'): 'alpha',
    ('algorithm', 'gamma_hat'): 'gamma_hat',
    ('algorithm', 'Gamma'): 'Gamma',
    ('algorithm', 'inner_budget'): 'inner_budget',
    ('algorithm', 'warm_start'): 'warm_start',
    ('algorithm', 'init_std'): 'init_std',
    ('algorithm', 'check_invariants'): 'check_invariants',
    ('evaluation', 'samples'): 'eval_samples',
    ('evaluation', 'inner_budget'): 'eval_inner_budget',
    ('evaluation', 'every'): 'eval_every',
    ('output', 'directory'): 'output_dir',
    ('output', 'seed'): 'seed',
    ('output', 'parallel'): 'parallel',
    ('output', 'write_markdown'): 'write_markdown'
}

INSTANCE_PARAM_KEYS = ('heterogeneity', 'lipschitz_box', 'n', 'p', 'seed')

FLOAT_FIELDS = {'xi_mean', 'xi_std', 'zeta_mean', 'zeta_std', 'eta', 'beta', 'alpha',
                'gamma_hat', 'Gamma', 'init_std', 'heterogeneity', 'lipschitz_box', 'laplacian_scale'}
INT_FIELDS = {'K', 'repeats', 'sparse_seed', 'chords', 'inner_budget', 'eval_samples', 'eval_inner_budget',
              'eval_every', 'seed', 'parallel', 'n', 'p'}
BOOL_FIELDS = {'complete_uniform', 'warm_start', 'check_invariants', 'write_markdown'}


def _key_lines(raw_text):
    """(section, key) -> 1-based line, from the YAML node tree"""
    lines = {}
    root = yaml.compose(raw_text, Loader=yaml.SafeLoader)
    if not isinstance(root, yaml.MappingNode):
        return lines
    for section_node, body in root.value:
        lines[(section_node.value, None)] = section_node.start_mark.line + 1
        if isinstance(body, yaml.MappingNode):
            for key_node, _ in body.value:
                lines[(section_node.value, key_node.value)] = key_node.start_mark.line + 1
    return lines


def _coerce(name, value, line):
    # PyYAML reads exponent floats without a dot (1e-5) as strings
    if value is None:
        return None
    try:
        if name in BOOL_FIELDS:
            if not isinstance(value, bool):
                raise ValueError
            return value
        if name in INT_FIELDS:
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise ValueError
            return int(float(value))
        if name in FLOAT_FIELDS:
            if isinstance(value, bool):
                raise ValueError
            return float(value)
    except (TypeError, ValueError):
        raise ParseError(f"cannot read {value!r} as a {'boolean' if name in BOOL_FIELDS else 'number'}",
                         field=name, line=line) from None
    return value


def _as_tuple(name, value, item_type, line):
    items = value if isinstance(value, (list, tuple)) else [value]
    if not items:
        raise RangeError(name, value, "must be a nonempty list")
    try:
        if item_type is str:
            return tuple(str(item) for item in items)
        if item_type is int:
            if any(isinstance(item, bool) or float(item) != int(float(item)) for item in items):
                raise ValueError
            return tuple(int(float(item)) for item in items)
        return tuple(float(item) for item in items)
    except (TypeError, ValueError):
        raise ParseError(f"cannot read {value!r} as a list of {item_type.__name__}", field=name, line=line) from None


def validate_config(raw_text, base=None):
    """
    Parse a YAML experiment file into an ExperimentSpec

    Args:
        raw_text (str): file contents; empty text gives the defaults
        base (SimulatorConfig): defaults to fill in (fresh defaults if None)

    Returns:
        ExperimentSpec

    Raises:
        ParseError: malformed YAML, unknown section or key, unreadable value
        RangeError: a value outside its documented range
    """
    try:
        data = yaml.safe_load(raw_text) or {}
        lines = _key_lines(raw_text) if data else {}
    except yaml.YAMLError as error:
        mark = getattr(error, 'problem_mark', None)
        raise ParseError(f"invalid YAML: {getattr(error, 'problem', error)}",
                         line=mark.line + 1 if mark else None) from None
    if not isinstance(data, dict):
        raise ParseError("top level must be a mapping of sections", line=1)

    defaults = (base or SimulatorConfig()).sections()
    merged = {section: copy.deepcopy(values) for section, values in defaults.items()}
    for section, body in data.items():
        if section not in merged:
            raise ParseError(f"unknown section '{section}'", field=str(section), line=lines.get((section, None)))
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ParseError(f"section '{section}' must be a mapping", field=section,
                             line=lines.get((section, None)))
        for key, value in body.items():
            if key not in merged[section]:
                raise ParseError(f"unknown key '{key}' in section '{section}'",
                                 field=f"{section}.{key}", line=lines.get((section, key)))
            merged[section][key] = value

    params = {}
    for (section, key), name in FIELD_NAMES.items():
        line = lines.get((section, key))
        value = merged[section][key]
        if name == 'topologies':
            params[name] = _as_tuple(name, value, str, line)
        elif name == 'm_values':
            params[name] = _as_tuple(name, value, int, line)
        elif name == 'gammas':
            params[name] = _as_tuple(name, value, float, line)
        elif name == 'inner_budget':
            params[name] = value if value == 'sqrt' else _coerce(name, value, line)
        else:
            params[name] = _coerce(name, value, line)
    params['instance_params'] = {
        key: _coerce(key, merged['instance'][key], lines.get(('instance', key)))
        for key in INSTANCE_PARAM_KEYS
    }
    spec = ExperimentSpec(**params)
    check_ranges(spec)
    return spec


def check_ranges(spec):
    """Raise RangeError for the first out-of-range field"""
    if spec.instance not in INSTANCES:
        raise RangeError('instance', spec.instance, f"must be one of {INSTANCES}")
    for topology in spec.topologies:
        if topology not in TOPOLOGY_NAMES:
            raise RangeError('topology', topology, f"must be one of {TOPOLOGY_NAMES}")
    if 'custom' in spec.topologies and not spec.edge_list:
        raise RangeError('edge_list', spec.edge_list, "is required for the custom topology")
    for m in spec.m_values:
        if m < 1:
            raise RangeError('m', m, "must be >= 1")
    for gamma in spec.gammas:
        if not gamma > 0:
            raise RangeError('gamma', gamma, "must be positive")
    positive = {'eta': spec.eta, 'alpha': spec.alpha, 'Gamma': spec.Gamma}
    for name, value in positive.items():
        if not value > 0:
            raise RangeError(name, value, "must be positive")
    for name in ('beta', 'gamma_hat'):
        value = getattr(spec, name)
        if value is not None and not value > 0:
            raise RangeError(name, value, "must be positive")
    for name in ('xi_std', 'zeta_std', 'init_std'):
        if getattr(spec, name) < 0:
            raise RangeError(name, getattr(spec, name), "must be nonnegative")
    if spec.K < 0:
        raise RangeError('K', spec.K, "must be >= 0")
    if spec.repeats < 1:
        raise RangeError('repeats', spec.repeats, "must be >= 1")
    if spec.gamma_rule not in GAMMA_RULE_NAMES:
        raise RangeError('gamma_rule', spec.gamma_rule, f"must be one of {GAMMA_RULE_NAMES}")
    if spec.inner_budget != 'sqrt' and not spec.inner_budget >= 1:
        raise RangeError('inner_budget', spec.inner_budget, "must be 'sqrt' or a positive step count")
    if spec.chords is not None and spec.chords < 0:
        raise RangeError('chords', spec.chords, "must be nonnegative")
    if spec.weights not in WEIGHT_RULE_NAMES:
        raise RangeError('weights', spec.weights, f"must be one of {WEIGHT_RULE_NAMES}")
    if spec.laplacian_scale is None or not 0.0 < spec.laplacian_scale <= 1.0:
        raise RangeError('laplacian_scale', spec.laplacian_scale, "must lie in (0, 1]")
    if spec.sparse_pattern not in (None, 'ring10_chords'):
        raise RangeError('sparse_pattern', spec.sparse_pattern, "must be 'ring10_chords' or empty")
    if spec.eval_samples < 2:
        raise RangeError('samples', spec.eval_samples, "must be >= 2")
    if spec.eval_inner_budget < 1:
        raise RangeError('evaluation.inner_budget', spec.eval_inner_budget, "must be >= 1")
    if spec.parallel < 1:
        raise RangeError('parallel', spec.parallel, "must be >= 1")
    heterogeneity = spec.instance_params.get('heterogeneity') or 0.0
    if heterogeneity < 0:
        raise RangeError('heterogeneity', heterogeneity, "must be nonnegative")
    box = spec.instance_params.get('lipschitz_box')
    if box is not None and not box > 0:
        raise RangeError('lipschitz_box', box, "must be positive")
    for name in ('n', 'p'):
        value = spec.instance_params.get(name)
        if value is not None and value < 1:
            raise RangeError(name, value, "must be >= 1")


def load_config_file(path, base=None):
    """Read and validate an experiment file"""
    with open(path, 'r', encoding='utf-8') as f:
        return validate_config(f.read(), base=base)


def resolve_output_dir(spec, cli_out=None):
    """--out flag > SMPEC_OUTPUT_DIR (environment or .env) > output.directory"""
    if cli_out:
        return cli_out
    load_dotenv()
    return os.getenv(OUTPUT_DIR_ENV) or spec.output_dir


if __name__ == "__main__":
    print("⚙️  SMPEC Simulator Configuration")
    print("=" * 40)

    # Print current configuration
    config.print_current_config()

    print(f"\n🎯 Available presets: {list(PRESETS.keys())}")
    print(f"\nTo apply a preset: apply_preset('preset_name')")
    print(f"To customize: modify config.algorithm_settings, config.network_settings, etc.")
