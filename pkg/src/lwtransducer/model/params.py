"""Parameter storage, Adam with global-norm clipping, and checkpoints."""
import json
import math
import os

import numpy as np

from ..tensor_core import load_array, save_array


class ParamStore:
    """Named float64 parameters, each paired with a same-shape gradient buffer."""

    def __init__(self, seed=0):
        self.rng = np.random.default_rng(seed)
        self.params = {}
        self.grads = {}

    def add(self, name, shape, init="normal", scale=None):
        if name in self.params:
            raise KeyError(f"duplicate parameter {name!r}")
        shape = tuple(shape)
        if init == "zeros":
            value = np.zeros(shape)
        elif init == "normal":
            fan_in = shape[0] if len(shape) > 1 else 1
            std = scale if scale is not None else 1.0 / math.sqrt(fan_in)
            value = self.rng.normal(0.0, std, size=shape)
        else:
            raise ValueError(f"unknown init {init!r}")
        self.params[name] = value
        self.grads[name] = np.zeros(shape)
        return name

    def __getitem__(self, name):
        return self.params[name]

    def __iter__(self):
        return iter(self.params)

    def __len__(self):
        return len(self.params)

    def zero_grad(self):
        for g in self.grads.values():
            g.fill(0.0)

    def new_grads(self):
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def grad_norm(self):
        return math.sqrt(sum(float(np.sum(g * g)) for g in self.grads.values()))

    def n_weights(self):
        return sum(p.size for p in self.params.values())


def clip_grad_norm(store, max_norm):
    """Scale all gradients so their global L2 norm is at most ``max_norm``."""
    norm = store.grad_norm()
    if max_norm and norm > max_norm:
        scale = max_norm / norm
        for g in store.grads.values():
            g *= scale
    return norm


class Adam:
    def __init__(self, store, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, clip=5.0, warmup_steps=0):
        self.store = store
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.clip = clip
        self.warmup_steps = warmup_steps
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in store.params.items()}
        self.v = {k: np.zeros_like(v) for k, v in store.params.items()}

    def current_lr(self):
        if self.warmup_steps > 0 and self.step_count < self.warmup_steps:
            return self.lr * (self.step_count + 1) / self.warmup_steps
        return self.lr

    def step(self):
        """Clip, then apply one bias-corrected Adam update. Returns the pre-clip norm."""
        norm = clip_grad_norm(self.store, self.clip)
        lr = self.current_lr()
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.step_count
        c2 = 1.0 - b2**self.step_count
        for name, p in self.store.params.items():
            g = self.store.grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return norm


def save_checkpoint(directory, store, optimizer=None, config=None, extra=None):
    """One tensor file per parameter (and Adam moment) plus ``manifest.json``."""
    os.makedirs(directory, exist_ok=True)
    manifest = {"params": {}, "step": 0, "config": config or {}, "extra": extra or {}}
    for name, p in store.params.items():
        fname = f"{name}.ltt"
        save_array(os.path.join(directory, fname), p)
        entry = {"file": fname, "shape": list(p.shape)}
        if optimizer is not None:
            save_array(os.path.join(directory, f"{name}.adam_m.ltt"), optimizer.m[name])
            save_array(os.path.join(directory, f"{name}.adam_v.ltt"), optimizer.v[name])
            entry["adam_m"] = f"{name}.adam_m.ltt"
            entry["adam_v"] = f"{name}.adam_v.ltt"
        manifest["params"][name] = entry
    if optimizer is not None:
        manifest["step"] = optimizer.step_count
        manifest["optimizer"] = {
            "lr": optimizer.lr,
            "betas": [optimizer.beta1, optimizer.beta2],
            "eps": optimizer.eps,
            "clip": optimizer.clip,
            "warmup_steps": optimizer.warmup_steps,
        }
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def load_checkpoint(directory, store, optimizer=None):
    """Fill ``store`` (and optionally ``optimizer``) in place; returns the manifest."""
    with open(os.path.join(directory, "manifest.json")) as fh:
        manifest = json.load(fh)
    for name, entry in manifest["params"].items():
        if name not in store.params:
            raise KeyError(f"checkpoint parameter {name!r} not in model")
        value, _ = load_array(os.path.join(directory, entry["file"]))
        if value.shape != store.params[name].shape:
            raise ValueError(f"{name}: checkpoint shape {value.shape} != {store.params[name].shape}")
        store.params[name][...] = value
        if optimizer is not None and "adam_m" in entry:
            optimizer.m[name][...] = load_array(os.path.join(directory, entry["adam_m"]))[0]
            optimizer.v[name][...] = load_array(os.path.join(directory, entry["adam_v"]))[0]
    if optimizer is not None:
        optimizer.step_count = int(manifest.get("step", 0))
    return manifest
