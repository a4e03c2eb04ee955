"""
Experiment Configuration
Default parameters for every subcommand, the pinned calibration file and
the JSON run config of the NLS experiment.
"""
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from console_log import log_to_console

CALIBRATION_FILE = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'calibration.json')

NLS_KEYS = {'N0', 's', 'delta', 'sign', 'dt', 'windows', 'K_probe', 'seed', 'plane_wave', 'band'}


class ConfigError(ValueError):
    """Invalid command-line or JSON parameters."""

    error_code = 'invalid_config'

    def __init__(self, message: str, error_code: Optional[str] = None):
        super().__init__(message)
        if error_code is not None:
            self.error_code = error_code


def get_default_params():
    """Get default parameters for every subcommand"""
    return {
        'enumerate': {'backend': 'generic', 'cap': 4096, 'dyadic': False},
        'strichartz': {'T': 'local', 'method': 'auto'},
        'extremizer-scan': {'N_list': [4, 8, 16, 32, 64]},
        'incidence': {'k': 3, 'scan': False},
        'decompose': {'C': None, 'tolerance': 1e-12, 'max_steps': 64},
        'bins': {'C': None, 'cap': 2000},
        'nls': {
            'N0': 16,
            's': 0.4,
            'delta': 0.05,
            'sign': 1,
            'dt': 1e-3,
            'windows': 20,
            'K_probe': 2,
            'seed': 0,
            'band': 4,
        },
    }


@dataclass(frozen=True)
class ExperimentConfig:
    subcommand: str
    params: Dict[str, Any] = field(default_factory=dict)
    threads: int = 1
    verbosity: int = 1
    seed: int = 0
    output: Optional[str] = None

    def validate(self) -> 'ExperimentConfig':
        """Check numeric parameters before dispatch; raises ConfigError."""
        if self.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {self.threads}")
        if self.seed < 0:
            raise ConfigError(f"--seed must be nonnegative, got {self.seed}")
        p = self.params
        if 'cap' in p and (not isinstance(p['cap'], int) or p['cap'] < 1):
            raise ConfigError(f"cap must be a positive integer, got {p['cap']!r}")
        if 'k' in p and p['k'] < 2:
            raise ConfigError(f"k must be >= 2, got {p['k']}")
        if p.get('C') is not None and p['C'] < 0:
            raise ConfigError(f"C must be a nonnegative integer, got {p['C']}")
        if 'N_list' in p:
            for N in p['N_list']:
                if N < 1:
                    raise ConfigError(f"grid radius must be >= 1, got {N}")
        if 'max_steps' in p and p['max_steps'] < 1:
            raise ConfigError(f"max_steps must be >= 1, got {p['max_steps']}")
        if 'N0' in p:
            validate_nls_params(p)
        return self


def validate_nls_params(p: Dict[str, Any]):
    def dyadic(name):
        v = p[name]
        if not isinstance(v, int) or v < 1 or v & (v - 1):
            raise ConfigError(f"{name} must be a dyadic integer, got {v!r}")

    dyadic('N0')
    dyadic('K_probe')
    if p['K_probe'] < 2:
        raise ConfigError(f"K_probe must be >= 2, got {p['K_probe']}")
    if not 0 < p['s'] <= 1:
        raise ConfigError(f"s must lie in (0, 1], got {p['s']}")
    if not p['delta'] >= 0 or not math.isfinite(p['delta']):
        raise ConfigError(f"delta must be nonnegative, got {p['delta']}")
    if p['sign'] not in (1, -1):
        raise ConfigError(f"sign must be +1 or -1, got {p['sign']}")
    if not p['dt'] > 0:
        raise ConfigError(f"dt must be positive, got {p['dt']}")
    if not isinstance(p['windows'], int) or p['windows'] < 0:
        raise ConfigError(f"windows must be a nonnegative integer, got {p['windows']!r}")
    if not isinstance(p.get('band', 1), int) or not 1 <= p.get('band', 1) <= p['N0']:
        raise ConfigError(f"band must be an integer in [1, N0], got {p.get('band')!r}")
    wave = p.get('plane_wave')
    if wave is not None:
        if not isinstance(wave, dict) or set(wave) - {'amplitude', 'xi', 'T'}:
            raise ConfigError("plane_wave must be an object with keys amplitude, xi, T")


def load_run_config(path: str) -> Dict[str, Any]:
    """NLS run config: defaults overlaid with the JSON file; unknown keys are rejected."""
    try:
        with open(path, 'r') as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read run config {path}: {e}", 'config_file')
    except json.JSONDecodeError as e:
        raise ConfigError(f"run config {path} is not valid JSON: {e}", 'config_file')
    if not isinstance(raw, dict):
        raise ConfigError(f"run config {path} must hold a JSON object")
    unknown = set(raw) - NLS_KEYS
    if unknown:
        raise ConfigError(f"unknown run config keys: {', '.join(sorted(unknown))}")
    params = dict(get_default_params()['nls'])
    params.update(raw)
    validate_nls_params(params)
    return params


def load_calibration(path: str = CALIBRATION_FILE) -> Dict[str, Any]:
    """Pinned decomposition constant C and the calibration suite it was chosen on."""
    try:
        with open(path, 'r') as fh:
            data = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read calibration file {path}: {e}", 'config_file')
    except json.JSONDecodeError as e:
        raise ConfigError(f"calibration file {path} is not valid JSON: {e}", 'config_file')
    if not isinstance(data.get('C'), int) or data['C'] < 0:
        raise ConfigError(f"calibration file {path} has no valid C")
    return data


def save_calibration(data: Dict[str, Any], path: str = CALIBRATION_FILE):
    with open(path, 'w') as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log_to_console(f"Calibration written to {path}: C={data['C']}")


def default_c(path: str = CALIBRATION_FILE) -> int:
    return load_calibration(path)['C']
