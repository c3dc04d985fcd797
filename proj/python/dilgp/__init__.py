"""Python bindings for the DIL-GP library.

Arrays are numpy float64; configs and results are plain dicts.
"""

import json as _json

from ._core import (  # noqa: F401
    KernelParams,
    __version__,
    coverage_rate,
    gen_synthetic_1d,
    gen_synthetic_2d,
    gp_predict,
    irm_penalty,
    kernel_matrix,
    log_marginal_likelihood,
    rmse,
)
from . import _core


def train_dil_gp(kind, init_params, sigma2, x, y, config=None):
    """Alternating min-max training; returns params, sigma2, trace and q_tilde."""
    return _json.loads(_core._train_dil_gp(kind, init_params, sigma2, x, y, _json.dumps(config or {})))


def wind_domain(which):
    """Built-in wind spec: 1 is the training domain, 2 the held-out one."""
    return _json.loads(_core._wind_domain(which))


def simulate(gains, trajectory="fig8", wind=None, seed=0):
    """Returns (ace, positions) for PID gains (kp, ki, kd)."""
    kp, ki, kd = gains
    spec = wind if wind is not None else wind_domain(1)
    return _core.simulate(kp, ki, kd, trajectory, _json.dumps(spec), seed)


def run_command(command, config, out_dir):
    """Runs generate, fit-eval or bo into out_dir and returns the manifest."""
    return _json.loads(_core._run_command(command, _json.dumps(config), str(out_dir)))


def replay(manifest_path, out_dir):
    """Re-runs a manifest; returns (identical, mismatched_names)."""
    return _core._replay(str(manifest_path), str(out_dir))
