"""Flat experiment configuration shared by the model, trainer and CLI.

Every field is a JSON key of the config file and a ``--kebab-case`` CLI flag.
``lambda_`` is spelled ``lambda`` in JSON and on the command line.
"""
import dataclasses
import json
from dataclasses import dataclass

MODEL_KINDS = ("lightweight", "transducer")
ALIGN_MODES = ("viterbi", "paper_replica")


@dataclass
class Config:
    # model
    kind: str = "lightweight"
    vocab_size: int = 12
    feat_dim: int = 16
    hidden: int = 32
    blank_hidden: int = 64
    conv_layers: int = 2
    causal_encoder: bool = False
    stride: int = 1
    blank: int = 0
    enhanced_blank: bool = True
    truncate_gradient: bool = True
    decouple_blank: bool = True
    max_symbols_per_frame: int = 3
    # criterion
    lambda_: float = 0.3
    ctc_gate: float = 2.0
    blank_threshold: float = 0.5
    blank_decision: str = "threshold"
    align_mode: str = "viterbi"
    freeze_align_every: int = 0
    # optimisation
    epochs: int = 50
    batch_size: int = 16
    lr: float = 3e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip: float = 5.0
    warmup_steps: int = 50
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"kind must be one of {MODEL_KINDS}")
        if self.align_mode not in ALIGN_MODES:
            raise ValueError(f"align_mode must be one of {ALIGN_MODES}")
        if self.vocab_size < 3:
            raise ValueError("vocab_size must be >= 3 (blank plus two tokens)")
        if not 0 <= self.blank < self.vocab_size:
            raise ValueError("blank id outside the vocabulary")
        if self.stride < 1 or self.workers < 1 or self.freeze_align_every < 0:
            raise ValueError("stride and workers must be >= 1, freeze_align_every >= 0")

    def to_dict(self):
        return {json_key(f.name): getattr(self, f.name) for f in dataclasses.fields(self)}

    @classmethod
    def from_dict(cls, d):
        names = {json_key(f.name): f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - set(names)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{names[k]: v for k, v in d.items()})

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def loss_config(self):
        from .frame_criterion import LossConfig

        return LossConfig(self.lambda_, self.ctc_gate, self.blank_threshold, self.blank_decision)


def json_key(field_name):
    return field_name.rstrip("_")
