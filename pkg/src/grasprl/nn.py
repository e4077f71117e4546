"""MLPs, Adam, Polyak averaging, and the binary checkpoint container.

Everything is float64 and sized for small fully-connected networks
(2 hidden layers x 256 units by default). Weights are stored [out x in].
"""
from __future__ import annotations

import json
from typing import Iterable

import numpy as np

from .autodiff import DimensionError, Tensor, matmul, relu, tanh, transpose

_ACTIVATIONS = {"relu", "tanh", "identity"}


class ConfigError(ValueError):
    """A configuration value is outside its documented range."""


def uniform_init(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    """Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    bound = 1.0 / np.sqrt(in_dim)
    return rng.uniform(-bound, bound, size=(out_dim, in_dim))


class Mlp:
    """Dense feed-forward stack with per-layer (weight [out x in], bias [out])."""

    def __init__(
        self,
        sizes: list[int],
        rng: np.random.Generator | None = None,
        hidden_activation: str = "relu",
        output_activation: str = "identity",
        name: str = "mlp",
    ):
        if len(sizes) < 2:
            raise ConfigError("an Mlp needs at least input and output sizes")
        for act in (hidden_activation, output_activation):
            if act not in _ACTIVATIONS:
                raise ConfigError(f"unknown activation {act!r}")
        if rng is None:
            rng = np.random.default_rng(0)
        self.sizes = list(sizes)
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation
        self.name = name
        self.layers: list[tuple[Tensor, Tensor]] = []
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            w = Tensor(uniform_init(rng, n_out, n_in), requires_grad=True,
                       name=f"{name}/w{i}")
            b = Tensor(rng.uniform(-1.0 / np.sqrt(n_in), 1.0 / np.sqrt(n_in), n_out),
                       requires_grad=True, name=f"{name}/b{i}")
            self.layers.append((w, b))

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    def parameters(self) -> list[Tensor]:
        return [t for pair in self.layers for t in pair]

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return [(t.name, t) for t in self.parameters()]

    def _activate(self, x: Tensor, kind: str) -> Tensor:
        if kind == "relu":
            return relu(x)
        if kind == "tanh":
            return tanh(x)
        return x

    def forward(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2 or x.data.shape[1] != self.in_dim:
            raise DimensionError(
                f"{self.name}: input shape {x.data.shape} does not match "
                f"first layer input size {self.in_dim}"
            )
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            x = matmul(x, transpose(w)) + b
            x = self._activate(x, self.hidden_activation if i < last
                               else self.output_activation)
        return x

    __call__ = forward

    def forward_array(self, x: np.ndarray) -> np.ndarray:
        """Tape-free forward for rollouts and target computations."""
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.shape[1] != self.in_dim:
            raise DimensionError(
                f"{self.name}: input shape {x.shape} does not match "
                f"first layer input size {self.in_dim}"
            )
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            x = x @ w.data.T + b.data
            act = self.hidden_activation if i < last else self.output_activation
            if act == "relu":
                x = np.maximum(x, 0.0)
            elif act == "tanh":
                x = np.tanh(x)
        return x[0] if squeeze else x

    def clone(self, name: str | None = None) -> "Mlp":
        """Deep copy with independent parameters (used for target networks)."""
        other = Mlp.__new__(Mlp)
        other.sizes = list(self.sizes)
        other.hidden_activation = self.hidden_activation
        other.output_activation = self.output_activation
        other.name = name or self.name
        other.layers = []
        for i, (w, b) in enumerate(self.layers):
            other.layers.append((
                Tensor(w.data.copy(), requires_grad=True, name=f"{other.name}/w{i}"),
                Tensor(b.data.copy(), requires_grad=True, name=f"{other.name}/b{i}"),
            ))
        return other


def freeze(params: Iterable[Tensor]):
    """Context manager flipping requires_grad off for the duration."""
    return _Freeze(list(params))


class _Freeze:
    def __init__(self, params: list[Tensor]):
        self.params = params

    def __enter__(self):
        self._saved = [p.requires_grad for p in self.params]
        for p in self.params:
            p.requires_grad = False
        return self

    def __exit__(self, *exc):
        for p, s in zip(self.params, self._saved):
            p.requires_grad = s


class Adam:
    """Bias-corrected Adam over a fixed parameter list."""

    def __init__(self, params: list[Tensor], lr: float = 7.3e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.first_moment = [np.zeros_like(p.data) for p in self.params]
        self.second_moment = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        for p in self.params:
            if p.grad is not None and not np.all(np.isfinite(p.grad)):
                raise GradientNaNError(
                    f"non-finite gradient in {p.name or 'parameter'} "
                    f"at optimizer step {self.step_count + 1}"
                )
        self.step_count += 1
        b1c = 1.0 - self.beta1 ** self.step_count
        b2c = 1.0 - self.beta2 ** self.step_count
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            m = self.first_moment[i]
            v = self.second_moment[i]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)

    def state_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for i, p in enumerate(self.params):
            key = p.name or f"p{i}"
            out[f"{prefix}/m/{key}"] = self.first_moment[i]
            out[f"{prefix}/v/{key}"] = self.second_moment[i]
        return out

    def load_state_arrays(self, prefix: str, arrays: dict[str, np.ndarray]) -> None:
        for i, p in enumerate(self.params):
            key = p.name or f"p{i}"
            self.first_moment[i] = arrays[f"{prefix}/m/{key}"].copy()
            self.second_moment[i] = arrays[f"{prefix}/v/{key}"].copy()


class GradientNaNError(FloatingPointError):
    """A gradient went non-finite; the update was aborted."""


def polyak_update(target_params: Iterable[Tensor], online_params: Iterable[Tensor],
                  tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, elementwise in place."""
    if not 0.0 < tau <= 1.0:
        raise ConfigError(f"tau must be in (0, 1], got {tau}")
    for t, o in zip(target_params, online_params, strict=True):
        if t.data.shape != o.data.shape:
            raise DimensionError(
                f"polyak shape mismatch: {t.data.shape} vs {o.data.shape}"
            )
        t.data *= 1.0 - tau
        t.data += tau * o.data


# -- checkpoint container ------------------------------------------------------
#
# Layout: one JSON header line (UTF-8, newline-terminated) listing array names
# and shapes plus free-form metadata, followed by raw little-endian float64
# blocks concatenated in header order. Round trips are bit-exact.

CHECKPOINT_FORMAT = "grasprl-checkpoint"
CHECKPOINT_VERSION = 1


class CheckpointError(IOError):
    """Checkpoint file is malformed or truncated."""


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "meta": meta,
        "arrays": [{"name": k, "shape": list(v.shape)} for k, v in arrays.items()],
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header).encode("utf-8"))
        f.write(b"\n")
        for v in arrays.values():
            f.write(np.ascontiguousarray(v, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as f:
        header_line = f.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"unreadable checkpoint header: {e}") from e
        if header.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointError("not a checkpoint file")
        if header.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"unsupported checkpoint version {header.get('version')}"
            )
        arrays: dict[str, np.ndarray] = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            n = int(np.prod(shape)) if shape else 1
            raw = f.read(n * 8)
            if len(raw) != n * 8:
                raise CheckpointError(
                    f"truncated checkpoint: array {entry['name']!r} incomplete"
                )
            arrays[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        return arrays, header["meta"]


def mlp_arrays(mlp: Mlp) -> dict[str, np.ndarray]:
    return {name: t.data for name, t in mlp.named_parameters()}


def load_mlp_arrays(mlp: Mlp, arrays: dict[str, np.ndarray]) -> None:
    for name, t in mlp.named_parameters():
        if name not in arrays:
            raise CheckpointError(f"checkpoint missing array {name!r}")
        if arrays[name].shape != t.data.shape:
            raise CheckpointError(
                f"checkpoint array {name!r} has shape {arrays[name].shape}, "
                f"expected {t.data.shape}"
            )
        t.data = arrays[name].astype(np.float64).copy()
