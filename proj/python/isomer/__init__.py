"""Python bindings for the Isomer fusion blocks.

Arrays are float64 NumPy arrays; tokens are (N, C). Block configurations are
plain dicts with the keys tokens, channels, heads, ffn_ratio,
context_reduction, merge_ratio ("1/9"), merge_norm ("softmax" or "raw") and
fg_only; tokens and channels default to the input's shape.
"""

import json

from . import _core
from ._core import ConfigError, DimensionError, layernorm, set_num_threads, softmax

__all__ = [
    "ConfigError",
    "DimensionError",
    "block_backward",
    "block_config",
    "block_cost",
    "block_forward",
    "cst_global_context",
    "cst_weight_map",
    "init_block_params",
    "layernorm",
    "main",
    "model_config",
    "run_cli",
    "run_suite",
    "set_num_threads",
    "sgst_heatmap",
    "softmax",
    "train",
]

BLOCK_KINDS = ("vt", "cst", "sgst")


def _dump(config):
    return json.dumps(config or {})


def block_config(config=None):
    """Resolved block configuration with every default filled in."""
    return json.loads(_core.block_config(_dump(config)))


def init_block_params(kind, config=None, seed=1):
    """Freshly initialized parameters of one block, keyed by tensor name."""
    return _core.init_block_params(kind, _dump(config), seed)


def block_forward(kind, x, params, config=None):
    return _core.block_forward(kind, x, params, _dump(config))


def block_backward(kind, x, params, dout, config=None):
    """Returns (dx, grads) for the loss whose gradient at the output is dout."""
    return _core.block_backward(kind, x, params, _dump(config), dout)


def cst_weight_map(x, params):
    """Query-shared spatial weights G (N,) over already-normalized tokens."""
    return _core.cst_weight_map(x, params)


def cst_global_context(x, params):
    return _core.cst_global_context(x, params)


def sgst_heatmap(x, params):
    """Foreground probabilities (N,) of a block's heatmap head on raw tokens."""
    return _core.sgst_heatmap(x, params)


def block_cost(kind, config=None, n_fg=None):
    """Analytic FLOP report of one block forward (1 multiply-add = 2 FLOPs)."""
    cfg = block_config(config)
    if n_fg is None:
        n_fg = cfg["tokens"] // 2
    return json.loads(_core.block_cost(kind, _dump(config), n_fg))


def run_suite(name="all", seed=1, gradient_seeds=20):
    """Verification reports as a list of dicts, sorted by check name."""
    return json.loads(_core.run_suite(name, seed, gradient_seeds))


def model_config(config=None, tiny=False):
    return json.loads(_core.model_config(_dump(config), tiny))


def train(config=None, tiny=False):
    """Trains the toy pipeline. Returns params, per-step loss and IoU, and the
    final per-frame IoU."""
    return _core.train(_dump(config), tiny)


def run_cli(args):
    """Runs the command-line tool in-process: (exit_status, stdout, stderr)."""
    return _core.run_cli([str(a) for a in args])


def main():
    import sys

    status, out, err = run_cli(sys.argv[1:])
    sys.stdout.write(out)
    sys.stderr.write(err)
    return status
