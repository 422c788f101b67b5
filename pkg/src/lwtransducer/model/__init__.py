"""Toy networks with analytic gradients."""
from .common import ALL_TERMS, Batch, StepResult, forward_backward_step
from .gradcheck import grad_check
from .lightweight import LightweightTransducer
from .params import Adam, ParamStore, clip_grad_norm, load_checkpoint, save_checkpoint
from .transducer import FullTransducer


def build_model(config):
    return (FullTransducer if config.kind == "transducer" else LightweightTransducer)(config)


__all__ = [
    "ALL_TERMS",
    "Adam",
    "Batch",
    "FullTransducer",
    "LightweightTransducer",
    "ParamStore",
    "StepResult",
    "build_model",
    "clip_grad_norm",
    "forward_backward_step",
    "grad_check",
    "load_checkpoint",
    "save_checkpoint",
]
