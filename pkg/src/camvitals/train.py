"""Multi-task L1 objective, exact reverse-mode gradients, and Adadelta.

The objective averages absolute waveform error per frame and adds the
respiration term scaled by ``alpha``. Gradients come from the hand-written
adjoints in ops/shift/attention/models, so they are exact up to float
rounding; the L1 subgradient at a zero residual is taken as 0. Training is
deterministic given its seed: shuffling, weight init, and dropout masks all
derive from it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import models, rng
from .models import ModelSpec, prepare_appearance


@dataclass(frozen=True)
class LossConfig:
    """Respiration weight for the joint objective."""

    alpha: float = 0.5

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")


@dataclass
class Batch:
    """A batch of training windows with aligned per-frame targets."""

    motion: np.ndarray        # (B, T, H, W, 3)
    appearance: np.ndarray    # (B, T, H, W, 3) or (B, H, W, 3)
    bvp: np.ndarray           # (B, T)
    resp: np.ndarray = None   # (B, T) when training a multi-task head


def multitask_loss(bvp_pred, bvp_true, resp_pred=None, resp_true=None,
                   cfg: LossConfig = LossConfig()) -> float:
    """Mean absolute waveform error; respiration term scaled by alpha."""
    bvp_pred = np.asarray(bvp_pred, dtype=np.float64)
    bvp_true = np.asarray(bvp_true, dtype=np.float64)
    if bvp_pred.shape != bvp_true.shape:
        raise ValueError(
            f"waveform length mismatch: prediction {bvp_pred.shape} vs "
            f"target {bvp_true.shape}")
    loss = float(np.mean(np.abs(bvp_true - bvp_pred)))
    if resp_pred is not None or resp_true is not None:
        if resp_pred is None or resp_true is None:
            raise ValueError("respiration prediction and target must be given together")
        resp_pred = np.asarray(resp_pred, dtype=np.float64)
        resp_true = np.asarray(resp_true, dtype=np.float64)
        if resp_pred.shape != resp_true.shape:
            raise ValueError(
                f"waveform length mismatch: prediction {resp_pred.shape} vs "
                f"target {resp_true.shape}")
        loss += cfg.alpha * float(np.mean(np.abs(resp_true - resp_pred)))
    return loss


def backward(spec: ModelSpec, weights: dict, batch: Batch,
             cfg: LossConfig = LossConfig(), seed: int = 0):
    """Gradients of the mean batch loss for every parameter.

    Dropout masks are replayed deterministically from ``seed`` (one stream
    per example and site), so repeated calls agree bitwise.

    Returns:
        (grads dict matching the weight names/dims, scalar loss)
    """
    B = batch.motion.shape[0]
    seeds = np.array([rng.derive(seed, rng.STREAM_DROPOUT, i) for i in range(B)],
                     dtype=np.uint64)
    outputs, cache = models._forward(spec, weights, batch.motion, batch.appearance,
                                     train=True, seeds=seeds, keep_cache=True)
    targets = {"bvp": batch.bvp}
    scales = {"bvp": 1.0}
    if spec.multi_task:
        if batch.resp is None:
            raise ValueError("multi-task training requires respiration targets")
        targets["resp"] = batch.resp
        scales["resp"] = cfg.alpha
    loss = 0.0
    grad_heads = {}
    n = outputs["bvp"].size
    for head in spec.heads:
        resid = outputs[head].astype(np.float64) - np.asarray(targets[head], dtype=np.float64)
        if outputs[head].shape != np.asarray(targets[head]).shape:
            raise ValueError(
                f"{head} target dims {np.asarray(targets[head]).shape} do not match "
                f"outputs {outputs[head].shape}")
        loss += scales[head] * float(np.mean(np.abs(resid)))
        # L1 subgradient with sign(0) == 0 keeps exact fits stationary.
        grad_heads[head] = (np.sign(resid) * (scales[head] / n)).astype(batch.motion.dtype)
    if not np.isfinite(loss):
        raise FloatingPointError(f"non-finite training loss: {loss}")
    grads = models._backward(spec, weights, cache, grad_heads)
    return grads, loss


@dataclass
class AdadeltaState:
    """Running second-moment accumulators for the Adadelta update."""

    sq_grad: dict
    sq_update: dict
    rho: float = 0.95
    eps: float = 1e-7
    lr: float = 1.0

    @classmethod
    def for_weights(cls, weights: dict, rho: float = 0.95, eps: float = 1e-7,
                    lr: float = 1.0) -> "AdadeltaState":
        return cls(sq_grad={k: np.zeros(v.shape, dtype=np.float64) for k, v in weights.items()},
                   sq_update={k: np.zeros(v.shape, dtype=np.float64) for k, v in weights.items()},
                   rho=rho, eps=eps, lr=lr)


def adadelta_step(weights: dict, grads: dict, state: AdadeltaState) -> dict:
    """One Adadelta update; returns new weights and advances state in place.

    update = -lr * sqrt((E[du^2] + eps) / (E[g^2] + eps)) * g with the
    standard exponential accumulators (decay rho).
    """
    new_weights = {}
    for name, w in weights.items():
        g = grads[name].astype(np.float64)
        if g.shape != w.shape:
            raise ValueError(
                f"gradient dims {g.shape} do not match parameter {name} dims {w.shape}")
        eg = state.sq_grad[name]
        eu = state.sq_update[name]
        eg *= state.rho
        eg += (1.0 - state.rho) * g * g
        delta = -np.sqrt((eu + state.eps) / (eg + state.eps)) * g
        eu *= state.rho
        eu += (1.0 - state.rho) * delta * delta
        new_weights[name] = (w.astype(np.float64) + state.lr * delta).astype(w.dtype)
    return new_weights


def train(spec: ModelSpec, dataset, epochs: int, batch_size: int = 32,
          seed: int = 0, cfg: LossConfig = LossConfig(), rho: float = 0.95,
          eps: float = 1e-7, lr: float = 1.0, verbose: bool = False):
    """Seeded training loop over a window dataset.

    ``dataset`` provides motion (N, T, H, W, 3), appearance windows
    (N, T, H, W, 3), and targets bvp/resp (N, T); appearance is adapted to
    the architecture once up front. Returns (weights, per-epoch mean loss).
    """
    n = len(dataset.motion)
    if n == 0:
        raise ValueError("training dataset is empty")
    weights = models.build_model(spec, seed)
    state = AdadeltaState.for_weights(weights, rho=rho, eps=eps, lr=lr)
    appearance = prepare_appearance(spec, dataset.appearance)
    resp = dataset.resp if spec.multi_task else None
    if spec.multi_task and resp is None:
        raise ValueError("multi-task spec needs respiration targets in the dataset")
    history = []
    for epoch in range(int(epochs)):
        perm = rng.stream(seed, rng.STREAM_SHUFFLE, epoch).permutation(n)
        total = 0.0
        for step, start in enumerate(range(0, n, batch_size)):
            idx = perm[start:start + batch_size]
            batch = Batch(motion=dataset.motion[idx], appearance=appearance[idx],
                          bvp=dataset.bvp[idx],
                          resp=None if resp is None else resp[idx])
            step_seed = rng.derive(seed, rng.STREAM_DROPOUT, epoch, step)
            grads, loss = backward(spec, weights, batch, cfg, step_seed)
            weights = adadelta_step(weights, grads, state)
            total += loss * len(idx)
        history.append(total / n)
        if verbose:
            print(f"epoch {epoch + 1}/{epochs}: loss {history[-1]:.6f}")
    return weights, history
