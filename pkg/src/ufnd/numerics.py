"""Nonlinearities, normalizations, initialization, optimizer, and the
finite-difference gradient checker.

All differentiable ops here build on the reverse-mode engine in
``autograd``.  Stochastic ops draw from named PCG64 streams so every run
is reproducible from a single 64-bit seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .autograd import Parameter, Tensor
from .errors import ArgumentError, ContractError, NonFiniteError

GELU_VARIANT = "exact-erf"


class RngStreams:
    """Named, independently seeded PCG64 streams.

    The algorithm identity is recorded in run metadata so splits and
    dropout masks are reproducible across implementations.
    """

    ALGORITHM = "numpy-PCG64"
    _STREAM_INDEX = {"init": 0, "dropout": 1, "shuffle": 2}

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gens: dict[str, np.random.Generator] = {}

    def stream(self, name: str) -> np.random.Generator:
        if name not in self._STREAM_INDEX:
            raise ArgumentError(f"unknown rng stream '{name}'")
        if name not in self._gens:
            ss = np.random.SeedSequence(
                entropy=self.seed, spawn_key=(self._STREAM_INDEX[name],))
            self._gens[name] = np.random.Generator(np.random.PCG64(ss))
        return self._gens[name]

    def state(self) -> dict:
        # materialize all streams so the snapshot is complete
        for name in self._STREAM_INDEX:
            self.stream(name)
        return {name: gen.bit_generator.state for name, gen in self._gens.items()}

    def restore(self, state: dict) -> None:
        for name, st in state.items():
            self.stream(name).bit_generator.state = st


# -- activations and normalizations ------------------------------------


def relu(x: Tensor) -> Tensor:
    out_data = np.maximum(x.data, 0)

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g * (x.data > 0))

    return Tensor(out_data, _parents=(x,), _backward=bwd)


def gelu(x: Tensor) -> Tensor:
    """x * Phi(x) with the exact standard-normal CDF."""
    cdf = 0.5 * (1.0 + erf(x.data / math.sqrt(2.0)))
    out_data = (x.data * cdf).astype(x.dtype)

    def bwd(g):
        if x.requires_grad:
            pdf = np.exp(-0.5 * x.data ** 2) / math.sqrt(2.0 * math.pi)
            x.accumulate_grad(g * (cdf + x.data * pdf).astype(x.dtype))

    return Tensor(out_data, _parents=(x,), _backward=bwd)


def log_softmax(x: Tensor) -> Tensor:
    """Numerically stable log softmax along the last axis."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out_data = shifted - log_z

    def bwd(g):
        if x.requires_grad:
            softmax = np.exp(out_data)
            x.accumulate_grad(g - softmax * g.sum(axis=-1, keepdims=True))

    return Tensor(out_data, _parents=(x,), _backward=bwd)


def masked_softmax(scores: Tensor, key_mask: np.ndarray) -> Tensor:
    """Softmax over the last axis with masked keys receiving exactly 0.

    `key_mask` has shape [batch, n_keys] with 1 for real positions; it is
    broadcast over any middle axes (heads, query positions).
    """
    if np.any(key_mask.sum(axis=-1) < 1):
        raise ContractError("masked_softmax: a sample has no unmasked key")
    expanded = key_mask.reshape(
        key_mask.shape[0], *([1] * (scores.ndim - 2)), key_mask.shape[1])
    neg_inf = np.array(-np.inf, dtype=scores.dtype)
    masked = np.where(expanded > 0, scores.data, neg_inf)
    shifted = masked - masked.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    probs = exps / exps.sum(axis=-1, keepdims=True)

    def bwd(g):
        if scores.requires_grad:
            inner = (g * probs).sum(axis=-1, keepdims=True)
            scores.accumulate_grad(probs * (g - inner))

    return Tensor(probs, _parents=(scores,), _backward=bwd)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-row normalization over the last axis, then affine gain/bias."""
    mean = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean) * inv_std
    out_data = xhat * gain.data + bias.data

    def bwd(g):
        d = x.shape[-1]
        if gain.requires_grad:
            gain.accumulate_grad(
                (g * xhat).reshape(-1, d).sum(axis=0))
        if bias.requires_grad:
            bias.accumulate_grad(g.reshape(-1, d).sum(axis=0))
        if x.requires_grad:
            gx = g * gain.data
            x.accumulate_grad(inv_std / d * (
                d * gx
                - gx.sum(axis=-1, keepdims=True)
                - xhat * (gx * xhat).sum(axis=-1, keepdims=True)))

    return Tensor(out_data, _parents=(x, gain, bias), _backward=bwd)


def dropout(x: Tensor, rate: float, mode: str, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity in eval mode or at rate 0."""
    if not 0.0 <= rate < 1.0:
        raise ArgumentError(f"dropout rate must be in [0, 1), got {rate}")
    if mode == "eval" or rate == 0.0:
        return x
    if mode != "train":
        raise ArgumentError(f"dropout mode must be 'train' or 'eval', got {mode!r}")
    keep = (rng.random(x.shape) >= rate).astype(x.dtype)
    scale = 1.0 / (1.0 - rate)
    out_data = x.data * keep * scale

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g * keep * scale)

    return Tensor(out_data, _parents=(x,), _backward=bwd)


# -- loss --------------------------------------------------------------


def nll_loss(log_probs: Tensor, targets: np.ndarray) -> Tensor:
    """Mean negative log-likelihood over a batch of log-probability rows."""
    n_classes = log_probs.shape[-1]
    targets = np.asarray(targets)
    if targets.min(initial=0) < 0 or targets.max(initial=0) >= n_classes:
        raise ArgumentError(
            f"targets must lie in [0, {n_classes}), got "
            f"[{targets.min()}, {targets.max()}]")
    batch = log_probs.shape[0]
    rows = np.arange(batch)
    loss = -log_probs.data[rows, targets].mean()

    def bwd(g):
        if log_probs.requires_grad:
            grad = np.zeros_like(log_probs.data)
            grad[rows, targets] = -1.0 / batch
            log_probs.accumulate_grad(grad * g)

    return Tensor(np.asarray(loss, dtype=log_probs.dtype),
                  _parents=(log_probs,), _backward=bwd)


# -- initialization ----------------------------------------------------


def xavier_init(shape: tuple, rng: np.random.Generator,
                dtype=np.float32) -> np.ndarray:
    """Uniform Glorot initialization on +-sqrt(6 / (fan_in + fan_out))."""
    fan_out, fan_in = shape[0], shape[-1]
    if fan_in < 1 or fan_out < 1:
        raise ArgumentError(f"xavier_init: both fans must be >= 1, got {shape}")
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


# -- optimizer stack ---------------------------------------------------


def clip_global_norm(params: list[Parameter], clip: float) -> float:
    """Scale all gradients so their global L2 norm is at most `clip`.

    Returns the pre-clip norm.
    """
    if clip <= 0:
        raise ArgumentError(f"clip must be positive, got {clip}")
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad.astype(np.float64) ** 2))
    norm = math.sqrt(total)
    if norm > clip:
        scale = clip / norm
        for p in params:
            if p.grad is not None:
                p.grad *= scale
    return norm


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr: float = 0.003

    @classmethod
    def for_param(cls, param: Parameter, lr: float = 0.003, **kwargs) -> "AdamState":
        return cls(m=np.zeros_like(param.data), v=np.zeros_like(param.data),
                   lr=lr, **kwargs)


def adam_step(param: Parameter, state: AdamState) -> None:
    """One Adam update in place; a zero gradient leaves the value unchanged."""
    if param.grad is None:
        return
    if param.grad.shape != param.data.shape:
        raise ArgumentError(
            f"adam_step: grad shape {param.grad.shape} != value shape "
            f"{param.data.shape} for {param.name}")
    g = param.grad
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    param.data -= (state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(
        param.data.dtype)


def assert_all_finite(params: list[Parameter]) -> None:
    """Checked-mode guard: abort on the first non-finite value."""
    for p in params:
        if not np.all(np.isfinite(p.data)):
            raise NonFiniteError(p.name)
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            raise NonFiniteError(p.name + ".grad")


# -- gradient checking -------------------------------------------------


@dataclass
class GradCheckResult:
    max_rel_error: float
    n_checked: int
    worst_param: str = ""
    errors: list = field(default_factory=list)


def grad_check(loss_fn, params: list[Parameter], eps: float = 1e-3,
               abs_floor: float = 1e-4, n_samples: int = 200,
               rng: np.random.Generator | None = None) -> GradCheckResult:
    """Compare analytic gradients against central finite differences.

    `loss_fn` must be a deterministic zero-argument callable returning a
    scalar Tensor built from `params`.  Up to `n_samples` coordinates are
    sampled across all parameters.  Coordinates where the analytic and
    numeric values agree within `abs_floor` absolutely count as exact;
    otherwise the error is |a - n| / max(|a|, |n|).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    for p in params:
        p.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {p.name: (p.grad.copy() if p.grad is not None
                         else np.zeros_like(p.data)) for p in params}

    total = sum(p.data.size for p in params)
    if total == 0:
        return GradCheckResult(max_rel_error=0.0, n_checked=0)
    n_samples = min(n_samples, total)
    # sample without replacement over the flattened concatenation
    flat_choice = rng.choice(total, size=n_samples, replace=False)
    offsets = np.cumsum([0] + [p.data.size for p in params])

    result = GradCheckResult(max_rel_error=0.0, n_checked=n_samples)
    for flat_idx in flat_choice:
        pi = int(np.searchsorted(offsets, flat_idx, side="right") - 1)
        param = params[pi]
        local = int(flat_idx - offsets[pi])
        idx = np.unravel_index(local, param.data.shape)
        orig = param.data[idx]
        param.data[idx] = orig + eps
        f_plus = float(loss_fn().data)
        param.data[idx] = orig - eps
        f_minus = float(loss_fn().data)
        param.data[idx] = orig
        numeric = (f_plus - f_minus) / (2.0 * eps)
        a = float(analytic[param.name][idx])
        diff = abs(a - numeric)
        err = 0.0 if diff <= abs_floor else diff / max(abs(a), abs(numeric))
        result.errors.append((param.name, idx, a, numeric, err))
        if err > result.max_rel_error:
            result.max_rel_error = err
            result.worst_param = param.name
    return result
