"""Python bindings for the HelmFluid toolkit."""

import json as _json

from . import _core
from ._core import (
    Predictor as _Predictor,
    compose_helm,
    curl_of_scalar,
    divergence,
    gradcheck,
    gradient,
    hodge_decompose,
    mse,
    relative_l2,
    vorticity,
)

__all__ = [
    "Predictor",
    "compose_helm",
    "curl_of_scalar",
    "divergence",
    "evaluate",
    "generate_bounded",
    "generate_ns",
    "generate_translate",
    "gradcheck",
    "gradient",
    "hodge_decompose",
    "mse",
    "relative_l2",
    "train",
    "vorticity",
]

__version__ = "0.1.0"


def generate_translate(out, n, seed=0, **kwargs):
    """Translating-texture toy dataset; returns the manifest as a dict."""
    return _json.loads(_core.generate_translate_json(str(out), n, seed, **kwargs))


def generate_bounded(out, n, seed=0, **kwargs):
    """Dye advected past obstacles; returns the manifest as a dict."""
    return _json.loads(_core.generate_bounded_json(str(out), n, seed, **kwargs))


def generate_ns(out, n, seed=0, **kwargs):
    """Periodic Navier-Stokes vorticity dataset; returns the manifest as a dict."""
    return _json.loads(_core.generate_ns_json(str(out), n, seed, **kwargs))


def train(data, run, config=None, resume=False, **kwargs):
    """Trains from a config dict with optional "model" and "train" sections."""
    return _json.loads(_core.train_json(str(data), str(run), _json.dumps(config or {}), resume, **kwargs))


def evaluate(checkpoint, data, split="test", masked=None, **kwargs):
    return _json.loads(_core.evaluate_json(str(checkpoint), str(data), split, masked, **kwargs))


class Predictor:
    """Rolls out a saved checkpoint."""

    def __init__(self, checkpoint):
        self._impl = _Predictor(str(checkpoint))
        self.config = _json.loads(self._impl.config_json())

    def predict(self, history, steps=None, mask=None):
        return self._impl.predict(history, steps, mask)
