"""Distributed Gaussian variational inference (C++ core with Python bindings)."""

import json
import os

from ._core import (
    DiagGaussianBelief,
    GaussianBelief,
    KernelModel,
    NumericalError,
    ValidationError,
    conjugate_fusion_posterior,
    consensus_error,
    dgvi_classify_step,
    dgvi_regression_step,
    diag_dgvi_classify_step,
    expected_sigmoid,
    geometric_fuse,
    geometric_fuse_diag,
    is_strongly_connected,
    kl_gaussian,
    metropolis_weights,
    particle_fusion_posterior,
    probit_closed_forms,
    quadrature_probit_moments,
    rank1_inverse_update,
    sinkhorn_normalize,
    verify,
)
from ._core import _run_experiment_json


def run_experiment(config, seed=None, out_dir=None, base_dir=None):
    """Run an experiment from a config dict or a path to a JSON config.

    Relative paths inside a config file resolve against its directory; for a
    dict they resolve against ``base_dir`` (default: the working directory).
    """
    if isinstance(config, (str, os.PathLike)):
        path = os.fspath(config)
        if not os.path.exists(path):
            raise ValidationError(f"config file not found: {path}")
        with open(path) as f:
            text = f.read()
        base = os.path.dirname(os.path.abspath(path))
    else:
        text = json.dumps(config)
        base = os.fspath(base_dir) if base_dir is not None else os.getcwd()
    return _run_experiment_json(text, base, seed, None if out_dir is None else os.fspath(out_dir))


__all__ = [name for name in dir() if not name.startswith("_")]
