"""Small convolutional function family for the value and policy heads.

Three padded 3x3 convolution layers over the (2, k, k) compressed state,
rectifier nonlinearities, and a fully connected head emitting one output per
slot.  Forward and backward passes are hand-rolled numpy (im2col) so the
gradients are exact and finite-difference checkable; nothing here depends on
an autodiff framework.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractError

LOGITS = "logits"
VALUES = "values"

VALUE_SENTINEL = -1e9  # masked VALUES slots; consumers exclude by mask


@dataclass(frozen=True)
class NetSpec:
    k: int
    mode: str  # LOGITS or VALUES
    in_channels: int = 2
    channels: int = 64
    n_conv: int = 3
    kernel: int = 3

    def __post_init__(self):
        if self.mode not in (LOGITS, VALUES):
            raise ConfigError(f"mode must be {LOGITS!r} or {VALUES!r}")
        if self.kernel % 2 != 1 or self.kernel < 1:
            raise ConfigError("kernel must be odd")
        if self.k < 1 or self.channels < 1 or self.n_conv < 1:
            raise ConfigError("k, channels, n_conv must be positive")

    def layer_shapes(self) -> list[tuple[str, tuple]]:
        shapes = []
        cin = self.in_channels
        for i in range(self.n_conv):
            shapes.append((f"conv{i}_w", (self.channels, cin, self.kernel, self.kernel)))
            shapes.append((f"conv{i}_b", (self.channels,)))
            cin = self.channels
        flat = self.channels * self.k * self.k
        shapes.append(("head_w", (self.k, flat)))
        shapes.append(("head_b", (self.k,)))
        return shapes

    @property
    def n_params(self) -> int:
        return sum(int(np.prod(s)) for _, s in self.layer_shapes())


def spec_hash(spec: NetSpec) -> str:
    return hashlib.sha256(repr(spec).encode()).hexdigest()[:16]


class ParamSet:
    """All weights in one flat vector plus a name -> slice registry."""

    def __init__(self, spec: NetSpec, flat: np.ndarray):
        self.spec = spec
        self.flat = flat
        self.registry: dict[str, tuple[int, int, tuple]] = {}
        off = 0
        for name, shape in spec.layer_shapes():
            size = int(np.prod(shape))
            self.registry[name] = (off, size, shape)
            off += size
        if flat.size != off:
            raise ContractError(f"flat vector has {flat.size} entries, spec needs {off}")

    def get(self, name: str) -> np.ndarray:
        off, size, shape = self.registry[name]
        return self.flat[off : off + size].reshape(shape)

    def set(self, name: str, value: np.ndarray) -> None:
        off, size, shape = self.registry[name]
        self.flat[off : off + size] = np.asarray(value, dtype=self.flat.dtype).ravel()

    def copy(self) -> "ParamSet":
        return ParamSet(self.spec, self.flat.copy())

    @property
    def dtype(self):
        return self.flat.dtype


def init_params(spec: NetSpec, rng_seed: int, dtype=np.float32) -> ParamSet:
    """Fan-in-scaled uniform weights, zero biases."""
    rng = np.random.default_rng(rng_seed)
    parts = []
    for name, shape in spec.layer_shapes():
        if name.endswith("_b"):
            parts.append(np.zeros(int(np.prod(shape)), dtype=dtype))
            continue
        fan_in = int(np.prod(shape[1:]))
        bound = 1.0 / np.sqrt(fan_in)
        parts.append(rng.uniform(-bound, bound, size=int(np.prod(shape))).astype(dtype))
    return ParamSet(spec, np.concatenate(parts))


# ------------------------------------------------------------------ forward


def _im2col(x: np.ndarray, kernel: int) -> np.ndarray:
    """(B, C, k, k) -> (B, C*kernel*kernel, k*k) patch matrix, zero padded.

    Assembled from kernel*kernel contiguous shifted-slice copies; the
    feature axis is ordered (channel, dy, dx) to match a (C_out, C_in, kk,
    kk) weight tensor flattened per output channel.
    """
    b, c, k, _ = x.shape
    pad = kernel // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = np.empty((b, c, kernel, kernel, k, k), dtype=x.dtype)
    for di in range(kernel):
        for dj in range(kernel):
            cols[:, :, di, dj] = xp[:, :, di : di + k, dj : dj + k]
    return cols.reshape(b, c * kernel * kernel, k * k)


def _forward_impl(spec: NetSpec, params: ParamSet, x: np.ndarray, want_cache: bool):
    b = x.shape[0]
    k = spec.k
    cache = {"cols": [], "pre": [], "inputs": []} if want_cache else None
    h = x
    for i in range(spec.n_conv):
        w = params.get(f"conv{i}_w")
        bias = params.get(f"conv{i}_b")
        cols = _im2col(h, spec.kernel)  # (B, cin*kk*kk, k*k)
        wmat = w.reshape(spec.channels, -1)
        pre = wmat @ cols + bias[:, None]  # (B, cout, k*k)
        act = np.maximum(pre, 0.0)
        if want_cache:
            cache["cols"].append(cols)
            cache["pre"].append(pre)
            cache["inputs"].append(h.shape)
        h = act.reshape(b, spec.channels, k, k)
    flat = h.reshape(b, -1)
    out = flat @ params.get("head_w").T + params.get("head_b")
    if want_cache:
        cache["flat"] = flat
    return out, cache


def _as_batch(x: np.ndarray, spec: NetSpec) -> tuple[np.ndarray, bool]:
    x = np.asarray(x)
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.ndim != 4 or x.shape[1] != spec.in_channels or x.shape[2:] != (spec.k, spec.k):
        raise ContractError(
            f"input shape {x.shape} does not match spec "
            f"(*, {spec.in_channels}, {spec.k}, {spec.k})"
        )
    return x, single


def _apply_mask(spec: NetSpec, out: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    if mask is None:
        return out
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim == 1:
        mask = np.broadcast_to(mask, out.shape)
    blocked = ~mask
    if spec.mode == LOGITS:
        out = np.where(blocked, -np.inf, out)
    else:
        out = np.where(blocked, VALUE_SENTINEL, out)
    return out


def forward(
    spec: NetSpec, params: ParamSet, x: np.ndarray, mask: np.ndarray | None = None
) -> np.ndarray:
    """Network outputs per slot; masked slots get -inf (logits) or a sentinel
    (values) and must be excluded from any aggregation via the mask."""
    xb, single = _as_batch(x, spec)
    out, _ = _forward_impl(spec, params, xb.astype(params.dtype, copy=False), False)
    out = _apply_mask(spec, out, mask)
    return out[0] if single else out


def forward_cached(spec: NetSpec, params: ParamSet, x: np.ndarray):
    """Raw (unmasked) batched forward plus the cache backward() needs."""
    xb, _ = _as_batch(x, spec)
    return _forward_impl(spec, params, xb.astype(params.dtype, copy=False), True)


def backward(
    spec: NetSpec,
    params: ParamSet,
    x: np.ndarray,
    upstream: np.ndarray,
    mask: np.ndarray | None = None,
    cache=None,
) -> np.ndarray:
    """Chain-ruled parameter gradient: d(sum(upstream * output)) / d(params).

    Masked slots contribute nothing (their outputs are constants).  Returns a
    flat vector aligned with ``params.flat``.
    """
    xb, single = _as_batch(x, spec)
    xb = xb.astype(params.dtype, copy=False)
    if cache is None:
        _, cache = _forward_impl(spec, params, xb, True)
    up = np.asarray(upstream, dtype=params.dtype)
    if single:
        up = up[None]
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        if m.ndim == 1:
            m = np.broadcast_to(m, up.shape)
        up = np.where(m, up, 0.0)

    grad = np.zeros_like(params.flat)
    gset = ParamSet(spec, grad)
    b = up.shape[0]
    k = spec.k
    kk = spec.kernel

    # head
    flat = cache["flat"]
    gset.set("head_w", up.T @ flat)
    gset.set("head_b", up.sum(axis=0))
    d_flat = up @ params.get("head_w")  # (B, C*k*k)
    d_h = d_flat.reshape(b, spec.channels, k, k)

    for i in reversed(range(spec.n_conv)):
        pre = cache["pre"][i]  # (B, cout, k*k)
        cols = cache["cols"][i]  # (B, cin*kk*kk, k*k)
        d_pre = d_h.reshape(b, spec.channels, k * k) * (pre > 0)
        w = params.get(f"conv{i}_w")
        wmat = w.reshape(spec.channels, -1)
        cin = w.shape[1]
        # weight/bias gradients
        gw = np.matmul(d_pre, cols.transpose(0, 2, 1)).sum(axis=0)  # (cout, f)
        gset.set(f"conv{i}_w", gw.reshape(w.shape))
        gset.set(f"conv{i}_b", d_pre.sum(axis=(0, 2)))
        # input gradient via col2im (add overlapping patch contributions)
        d_cols = np.matmul(wmat.T, d_pre)  # (B, cin*kk*kk, k*k)
        d_cols = d_cols.reshape(b, cin, kk, kk, k, k)
        pad = kk // 2
        d_xp = np.zeros((b, cin, k + 2 * pad, k + 2 * pad), dtype=params.dtype)
        for di in range(kk):
            for dj in range(kk):
                d_xp[:, :, di : di + k, dj : dj + k] += d_cols[:, :, di, dj]
        d_h = d_xp[:, :, pad : pad + k, pad : pad + k]
    return grad


# ------------------------------------------------------------------- policy


def softmax_policy(logits: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Probabilities over unmasked slots (exactly 0 elsewhere), stabilized."""
    z = np.asarray(logits, dtype=np.float64)
    single = z.ndim == 1
    if single:
        z = z[None]
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        if m.ndim == 1:
            m = np.broadcast_to(m, z.shape)
        z = np.where(m, z, -np.inf)
    zmax = np.max(z, axis=-1, keepdims=True)
    if not np.all(np.isfinite(zmax)):
        raise ContractError("softmax over a fully masked slot set")
    e = np.exp(z - zmax)
    p = e / e.sum(axis=-1, keepdims=True)
    return p[0] if single else p


def policy_entropy(probs: np.ndarray) -> np.ndarray:
    """Shannon entropy (nats) treating 0 * log 0 = 0; works on batches."""
    p = np.asarray(probs, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(p), 0.0)
    return -plogp.sum(axis=-1)


# --------------------------------------------------------------------- Adam


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)

    @classmethod
    def for_params(cls, params: ParamSet, lr: float, **kw) -> "AdamState":
        return cls(
            lr=lr,
            m=np.zeros_like(params.flat),
            v=np.zeros_like(params.flat),
            **kw,
        )


def adam_step(adam: AdamState, params: ParamSet, grad: np.ndarray) -> ParamSet:
    """Standard bias-corrected update, in place on ``params``."""
    if grad.shape != params.flat.shape:
        raise ContractError("gradient length does not match parameter vector")
    g = grad.astype(params.dtype, copy=False)
    adam.t += 1
    adam.m = adam.beta1 * adam.m + (1.0 - adam.beta1) * g
    adam.v = adam.beta2 * adam.v + (1.0 - adam.beta2) * g * g
    mhat = adam.m / (1.0 - adam.beta1**adam.t)
    vhat = adam.v / (1.0 - adam.beta2**adam.t)
    params.flat -= (adam.lr * mhat / (np.sqrt(vhat) + adam.eps)).astype(params.dtype)
    return params


# -------------------------------------------------------------- checkpoints


def save_checkpoint(path, named: dict[str, ParamSet]) -> None:
    """Flat binary per parameter set plus a plain-text registry with the
    architecture hash; load refuses a mismatched spec."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {}
    for name, ps in sorted(named.items()):
        (path / f"{name}.bin").write_bytes(ps.flat.tobytes())
        manifest[name] = {
            "spec": repr(ps.spec),
            "spec_hash": spec_hash(ps.spec),
            "dtype": str(ps.dtype),
            "size": int(ps.flat.size),
            "registry": {
                k: [int(off), int(size), list(shape)]
                for k, (off, size, shape) in ps.registry.items()
            },
        }
    (path / "registry.txt").write_text(json.dumps(manifest, indent=1, sort_keys=True))


def load_checkpoint(path, specs: dict[str, NetSpec]) -> dict[str, ParamSet]:
    path = Path(path)
    manifest = json.loads((path / "registry.txt").read_text())
    out = {}
    for name, spec in specs.items():
        if name not in manifest:
            raise ConfigError(f"checkpoint at {path} has no entry {name!r}")
        entry = manifest[name]
        if entry["spec_hash"] != spec_hash(spec):
            raise ConfigError(
                f"checkpoint {name!r} was written for {entry['spec']}, "
                f"requested {spec!r}"
            )
        flat = np.frombuffer(
            (path / f"{name}.bin").read_bytes(), dtype=np.dtype(entry["dtype"])
        ).copy()
        out[name] = ParamSet(spec, flat)
    return out
