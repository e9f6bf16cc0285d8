"""FedSGD over the simulated uplink, with optional adaptive absolute maximum."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from ..baselines import GoldenbaumConfig
from ..numerals import CodecConfig
from ..phy import PhyConfig
from ..schemes import SCHEMES, aggregate
from .data import Dataset, load_dataset, partition
from .model import Mlp

log = logging.getLogger(__name__)

V_MAX_FLOOR = 1e-12


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class FeelConfig:
    num_eds: int = 25
    rounds: int = 300
    learning_rate: float = 0.05
    momentum: float = 0.0
    batch_size: int = 32
    partition: str = "homogeneous"
    areas: int = 5
    scheme: str = "balanced"
    codec: CodecConfig = field(default_factory=lambda: CodecConfig(5, 2, 1.0))
    phy: PhyConfig = field(default_factory=lambda: PhyConfig(
        num_eds=25, num_antennas=1, noise_var=0.01,
        sync_error_samples=3, sync_spread=55.6e-9))
    goldenbaum: GoldenbaumConfig = field(default_factory=GoldenbaumConfig)
    aam_enabled: bool = False
    aam_alpha: Optional[float] = None
    aam_v0: Optional[float] = None
    dataset: str = "digits"
    hidden: int = 32
    train_per_class: int = 125

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.phy.num_eds != self.num_eds:
            object.__setattr__(self, "phy", replace(self.phy, num_eds=self.num_eds))
        if self.aam_v0 is not None and not self.aam_v0 > 0:
            raise ValueError("aam_v0 must be positive")
        if self.partition == "heterogeneous" and self.num_eds % self.areas:
            raise ValueError("num_eds must be divisible by areas")

    @property
    def initial_v_max(self) -> float:
        """Range used in round 0 (and every round without AAM)."""
        return self.codec.v_max if self.aam_v0 is None else self.aam_v0


@dataclass
class ModelState:
    w: np.ndarray
    velocity: np.ndarray


@dataclass(frozen=True)
class RoundTrace:
    round: int
    v_max_used: float
    loss: float
    test_accuracy: float
    gradient_norm: float
    bmse_proxy: float


def local_gradient(model: Mlp, w, x, y) -> np.ndarray:
    if len(y) == 0:
        raise ValueError("empty batch")
    return model.loss_and_grad(w, x, y)[1]


def aam_metrics(local_grads) -> np.ndarray:
    """The one scalar each device feeds back: the l2 norm of its gradient."""
    return np.linalg.norm(np.asarray(local_grads), axis=1)


def default_alpha(num_params: int) -> float:
    return 5.0 / math.sqrt(num_params)


def aam_step(metrics, alpha: float, floor: float = V_MAX_FLOOR) -> float:
    """Next quantizer range, ``alpha * max_k m_k``, never below ``floor``."""
    m = np.asarray(metrics, dtype=np.float64)
    if m.ndim != 1 or m.size == 0:
        raise ValueError("metrics must be a non-empty vector with one entry per device")
    return max(alpha * float(m.max()), floor)


def aggregate_round(local_grads, cfg: FeelConfig, v_max: float, rng) -> np.ndarray:
    """One uplink round under ``cfg.scheme`` with the announced range ``v_max``."""
    return aggregate(
        local_grads, cfg.scheme, rng, phy=cfg.phy,
        codec=cfg.codec.with_v_max(v_max),
        goldenbaum=cfg.goldenbaum.with_v_max(v_max),
        shared_fading=True,
    )


def update(state: ModelState, ghat, learning_rate: float, momentum: float) -> ModelState:
    """Heavy-ball step; ``momentum=0`` is plain ``w - lr * ghat``."""
    ghat = np.asarray(ghat)
    if ghat.shape != state.w.shape:
        raise ValueError("gradient shape does not match the model")
    if momentum == 0:
        return ModelState(state.w - learning_rate * ghat, ghat.copy())
    velocity = momentum * state.velocity + ghat
    return ModelState(state.w - learning_rate * velocity, velocity)


def _round_rng(seed: int, t: int, stream: int):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(t, stream)))


def setup(cfg: FeelConfig, seed: int):
    """Data, device partition, model and initial weights for a run."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2**31,)))
    data = load_dataset(cfg.dataset, rng, cfg.train_per_class)
    parts = partition(data.y_train, cfg.partition, cfg.num_eds, rng, cfg.areas)
    model = Mlp(data.num_features, cfg.hidden, data.num_classes)
    w0 = model.init(rng)
    return data, parts, model, w0


def train(cfg: FeelConfig, seed: int = 0, data: Optional[Dataset] = None) -> List[RoundTrace]:
    """Run ``cfg.rounds`` FedSGD rounds and return one trace per round."""
    data_, parts, model, w0 = setup(cfg, seed)
    data = data or data_
    state = ModelState(w0, np.zeros_like(w0))
    Q = model.num_params
    alpha = cfg.aam_alpha if cfg.aam_alpha is not None else default_alpha(Q)
    v_max = cfg.initial_v_max if cfg.aam_enabled else cfg.codec.v_max
    traces = []
    for t in range(cfg.rounds):
        batch_rng = _round_rng(seed, t, 0)
        grads = np.empty((cfg.num_eds, Q))
        for k, idx in enumerate(parts):
            n = min(cfg.batch_size, len(idx))
            pick = batch_rng.choice(idx, size=n, replace=False)
            grads[k] = local_gradient(model, state.w, data.x_train[pick], data.y_train[pick])
        if cfg.aam_enabled and t > 0:
            v_max = aam_step(metrics, alpha)
        ghat = aggregate_round(grads, cfg, v_max, _round_rng(seed, t, 1))
        gbar = grads.mean(axis=0)
        if cfg.aam_enabled:
            metrics = aam_metrics(grads)
        state = update(state, ghat, cfg.learning_rate, cfg.momentum)
        loss = model.loss(state.w, data.x_train, data.y_train) \
            if np.all(np.isfinite(state.w)) else math.nan
        if not math.isfinite(loss):
            raise TrainingDivergedError(
                f"loss became {loss} at round {t} (scheme={cfg.scheme}, v_max={v_max:.3g})"
            )
        traces.append(RoundTrace(
            round=t,
            v_max_used=float(v_max),
            loss=loss,
            test_accuracy=model.accuracy(state.w, data.x_test, data.y_test),
            gradient_norm=float(np.linalg.norm(gbar)),
            bmse_proxy=float(np.sum((ghat - gbar) ** 2) / Q),
        ))
        log.debug("round %d loss %.4f acc %.3f", t, loss, traces[-1].test_accuracy)
    return traces
