"""A small numpy network stack: dense layers, residual blocks, MSE, Adam.

Batches are row-major, ``x`` has shape (N, in) and a dense layer stores ``W``
as (out, in), so a layer computes ``x @ W.T + b``. Every parameter set is a
flat list ``[W0, b0, W1, b1, ...]`` in forward order, described by an
:class:`Architecture`.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

FORMAT = "sclar-params"
VERSION = 1


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class Architecture:
    """Dense trunk, ``n_blocks`` residual blocks of ``block_layers`` dense
    layers each, dense head, linear output.

    ``n_blocks=0`` gives the plain fully connected network; ``trunk_width=0``
    drops the trunk layer too, so with no head widths the model is linear.
    """

    input_dim: int
    trunk_width: int = 32
    n_blocks: int = 5
    block_layers: int = 1
    head_widths: tuple[int, ...] = (128, 128)
    output_width: int = 2

    def __post_init__(self) -> None:
        if self.input_dim < 1 or self.output_width < 1:
            raise ShapeError("input and output widths must be >= 1")
        if self.n_blocks < 0 or self.block_layers < 1:
            raise ShapeError("need n_blocks >= 0 and block_layers >= 1")
        if self.trunk_width < 0 or any(w < 1 for w in self.head_widths):
            raise ShapeError("hidden widths must be >= 1")
        if self.trunk_width == 0 and self.n_blocks:
            raise ShapeError("residual blocks need a trunk layer")
        object.__setattr__(self, "head_widths", tuple(int(w) for w in self.head_widths))

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(out, in) of every dense layer, forward order."""
        if self.trunk_width == 0:
            shapes, prev = [], self.input_dim
        else:
            shapes = [(self.trunk_width, self.input_dim)]
            shapes += [(self.trunk_width, self.trunk_width)] * (self.n_blocks * self.block_layers)
            prev = self.trunk_width
        for w in self.head_widths:
            shapes.append((w, prev))
            prev = w
        shapes.append((self.output_width, prev))
        return shapes

    def plan(self) -> list[tuple]:
        """Forward program: ``("dense", i, relu)`` or ``("block", [i, ...])``."""
        steps: list[tuple] = [("dense", 0, True)] if self.trunk_width else []
        i = len(steps)
        for _ in range(self.n_blocks):
            steps.append(("block", list(range(i, i + self.block_layers))))
            i += self.block_layers
        for _ in self.head_widths:
            steps.append(("dense", i, True))
            i += 1
        steps.append(("dense", i, False))
        return steps

    def to_dict(self) -> dict:
        d = asdict(self)
        d["head_widths"] = list(self.head_widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Architecture":
        return cls(**{**d, "head_widths": tuple(d.get("head_widths", ()))})


@dataclass
class ModelParams:
    arch: Architecture
    arrays: list[np.ndarray]

    def __post_init__(self) -> None:
        shapes = self.arch.layer_shapes()
        if len(self.arrays) != 2 * len(shapes):
            raise ShapeError(f"expected {2 * len(shapes)} arrays, got {len(self.arrays)}")
        for i, (o, n) in enumerate(shapes):
            W, b = self.arrays[2 * i], self.arrays[2 * i + 1]
            if W.shape != (o, n) or b.shape != (o,):
                raise ShapeError(f"layer {i}: expected W{(o, n)} b{(o,)}, got W{W.shape} b{b.shape}")

    def layer(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        return self.arrays[2 * i], self.arrays[2 * i + 1]

    def copy(self) -> "ModelParams":
        return ModelParams(self.arch, [a.copy() for a in self.arrays])

    def zeros_like(self) -> list[np.ndarray]:
        return [np.zeros_like(a) for a in self.arrays]

    @property
    def size(self) -> int:
        return int(sum(a.size for a in self.arrays))


def init_params(arch: Architecture, stream: np.random.Generator) -> ModelParams:
    """He-style uniform fan-in initialisation, zero biases."""
    arrays = []
    for out, fan_in in arch.layer_shapes():
        limit = np.sqrt(6.0 / fan_in)
        arrays.append(stream.uniform(-limit, limit, (out, fan_in)))
        arrays.append(np.zeros(out))
    return ModelParams(arch, arrays)


def _check_finite(x: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite values in {where}")


def _as_batch(x, width: int) -> tuple[np.ndarray, bool]:
    # the flatten step before the head is a shape normalisation for vector states
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.ndim != 2 or x.shape[1] != width:
        raise ShapeError(f"expected input width {width}, got shape {np.shape(x)}")
    return x, single


def dense_forward(x, W, b, relu: bool = True) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    W = np.asarray(W, dtype=float)
    if x.shape[-1] != W.shape[1] or np.shape(b) != (W.shape[0],):
        raise ShapeError(f"dense: x{x.shape} incompatible with W{W.shape}, b{np.shape(b)}")
    z = x @ W.T + b
    out = np.maximum(z, 0.0) if relu else z
    _check_finite(out, "dense layer output")
    return out


def dense_backward(x, W, z, grad_out, relu: bool = True):
    """Gradients of a dense layer given its input ``x`` and pre-activation ``z``.

    Returns ``(dx, dW, db)``."""
    g = grad_out * (z > 0) if relu else grad_out
    return g @ W, g.T @ x, g.sum(axis=0)


def resblock_forward(x, layers, relu: bool = True) -> np.ndarray:
    """``layers`` is a list of (W, b); returns inner(x) + x."""
    x = np.asarray(x, dtype=float)
    h = x
    for W, b in layers:
        if W.shape[0] != W.shape[1]:
            raise ShapeError(f"residual inner layer must be square, got {W.shape}")
        h = dense_forward(h, W, b, relu)
    if h.shape != x.shape:
        raise ShapeError("residual block width mismatch")
    return h + x


def resblock_backward(x, layers, grad_out, relu: bool = True):
    """Returns ``(dx, [(dW, db), ...])``; the skip path passes grad_out through."""
    xs, zs = [], []
    h = np.asarray(x, dtype=float)
    for W, b in layers:
        xs.append(h)
        z = h @ W.T + b
        zs.append(z)
        h = np.maximum(z, 0.0) if relu else z
    g = grad_out
    grads = []
    for (W, _), xi, zi in zip(reversed(layers), reversed(xs), reversed(zs)):
        g, dW, db = dense_backward(xi, W, zi, g, relu)
        grads.append((dW, db))
    return g + grad_out, grads[::-1]


@dataclass
class ForwardCache:
    """Per-layer inputs and pre-activations recorded by :func:`model_forward`."""

    inputs: dict = field(default_factory=dict)
    preacts: dict = field(default_factory=dict)
    single: bool = False


def model_forward(params: ModelParams, state, return_cache: bool = False):
    x, single = _as_batch(state, params.arch.input_dim)
    cache = ForwardCache(single=single)
    h = x
    for step in params.arch.plan():
        if step[0] == "dense":
            _, i, relu = step
            W, b = params.layer(i)
            cache.inputs[i] = h
            z = h @ W.T + b
            cache.preacts[i] = z
            h = np.maximum(z, 0.0) if relu else z
        else:
            skip = h
            for i in step[1]:
                W, b = params.layer(i)
                cache.inputs[i] = h
                z = h @ W.T + b
                cache.preacts[i] = z
                h = np.maximum(z, 0.0)
            h = h + skip
    _check_finite(h, "model output")
    q = h[0] if single else h
    return (q, cache) if return_cache else q


def backward(params: ModelParams, cache: ForwardCache | None, grad_out) -> list[np.ndarray]:
    """Gradients of a scalar loss w.r.t. every array, given dL/d(output)."""
    if cache is None or not cache.inputs:
        raise RuntimeError("backward needs the cache from a forward pass with return_cache=True")
    g = np.atleast_2d(np.asarray(grad_out, dtype=float))
    grads: list[np.ndarray | None] = [None] * len(params.arrays)
    for step in reversed(params.arch.plan()):
        if step[0] == "dense":
            _, i, relu = step
            W, _ = params.layer(i)
            g, grads[2 * i], grads[2 * i + 1] = dense_backward(cache.inputs[i], W, cache.preacts[i], g, relu)
        else:
            g_skip = g
            for i in reversed(step[1]):
                W, _ = params.layer(i)
                g, grads[2 * i], grads[2 * i + 1] = dense_backward(cache.inputs[i], W, cache.preacts[i], g, True)
            g = g + g_skip
    for gr in grads:
        _check_finite(gr, "gradient")
    return grads


def mse_loss(pred, target) -> float:
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ShapeError(f"loss shapes differ: {pred.shape} vs {target.shape}")
    return float(np.mean((pred - target) ** 2))


def mse_grad(pred, target) -> np.ndarray:
    pred = np.asarray(pred, dtype=float)
    return 2.0 * (pred - np.asarray(target, dtype=float)) / pred.size


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: ModelParams | list[np.ndarray], **hyper) -> "AdamState":
        arrays = params.arrays if isinstance(params, ModelParams) else params
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], **hyper)


def adam_step(params, grads, state: AdamState):
    """One bias-corrected Adam update; returns new (params, state), inputs untouched.

    ``params`` may be a :class:`ModelParams` or a plain list of arrays."""
    arrays = params.arrays if isinstance(params, ModelParams) else params
    if len(grads) != len(arrays) or any(g.shape != a.shape for g, a in zip(grads, arrays)):
        raise ShapeError("gradients are not shaped like the parameters")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    m = [b1 * mi + (1 - b1) * g for mi, g in zip(state.m, grads)]
    v = [b2 * vi + (1 - b2) * g * g for vi, g in zip(state.v, grads)]
    c1, c2 = 1 - b1**t, 1 - b2**t
    new = [a - state.lr * (mi / c1) / (np.sqrt(vi / c2) + state.eps) for a, mi, vi in zip(arrays, m, v)]
    new_state = AdamState(m, v, t, state.lr, b1, b2, state.eps)
    if isinstance(params, ModelParams):
        return ModelParams(params.arch, new), new_state
    return new, new_state


def soft_update(target: ModelParams, pred: ModelParams, tau: float) -> ModelParams:
    if target.arch != pred.arch:
        raise ShapeError("soft update between different architectures")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"blend factor must lie in [0, 1], got {tau}")
    if tau == 1.0:
        return pred.copy()
    return ModelParams(target.arch, [(1 - tau) * t + tau * p for t, p in zip(target.arrays, pred.arrays)])


def save_checkpoint(path, params: ModelParams, extra_arrays: dict | None = None, extra_meta: dict | None = None) -> None:
    """npz container: little-endian float64 arrays plus a JSON ``__meta__``."""
    meta = {"format": FORMAT, "version": VERSION, "architecture": params.arch.to_dict(),
            "extra": extra_meta or {}}
    data = {f"p{i:03d}": np.asarray(a, dtype="<f8") for i, a in enumerate(params.arrays)}
    for k, a in (extra_arrays or {}).items():
        if k.startswith("p") and k[1:].isdigit() or k == "__meta__":
            raise ValueError(f"reserved checkpoint key {k!r}")
        data[k] = np.asarray(a, dtype="<f8")
    data["__meta__"] = np.array(json.dumps(meta, sort_keys=True))
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            np.savez(fh, **data)
    except OSError as exc:
        raise OSError(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path) -> tuple[ModelParams, dict, dict]:
    """Returns ``(params, extra_arrays, extra_meta)``."""
    with np.load(Path(path), allow_pickle=False) as z:
        meta = json.loads(str(z["__meta__"]))
        if meta.get("format") != FORMAT:
            raise ValueError(f"{path}: not a parameter checkpoint")
        if meta.get("version") != VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        arch = Architecture.from_dict(meta["architecture"])
        n = 2 * len(arch.layer_shapes())
        arrays = [z[f"p{i:03d}"].astype(float) for i in range(n)]
        extra = {k: z[k].astype(float) for k in z.files if k != "__meta__" and k not in {f"p{i:03d}" for i in range(n)}}
    return ModelParams(arch, arrays), extra, meta.get("extra", {})
