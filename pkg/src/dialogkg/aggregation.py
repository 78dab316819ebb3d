"""Session-level aggregation: recency-weighted mean plus a scaled WLS trend."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import EmptySession


class Trend(str, Enum):
    IMPROVING = "Improving"
    STABLE = "Stable"
    DEGRADING = "Degrading"


@dataclass(frozen=True)
class AggregationConfig:
    gamma: float = 0.1
    lambda_base: float = 5.0
    t_ref: int = 20
    trend_epsilon: float = 0.005

    def __post_init__(self):
        if self.gamma <= 0 or self.lambda_base <= 0 or self.t_ref < 1 or self.trend_epsilon < 0:
            raise ValueError("need gamma > 0, lambda_base > 0, t_ref >= 1, trend_epsilon >= 0")


def recency_weights(T: int, gamma: float = 0.1) -> np.ndarray:
    if T < 1:
        raise EmptySession("cannot weight an empty session")
    # shift by the largest exponent so long sessions never overflow
    exps = np.exp(gamma * (np.arange(T, dtype=np.float64) - (T - 1)))
    return exps / exps.sum()


def weighted_trend(q: Sequence[float], w: Sequence[float]) -> tuple[float, float]:
    """Closed-form WLS fit of q_i = alpha + beta*(i-1); returns (beta, alpha)."""
    q = np.asarray(q, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if q.size == 0:
        raise EmptySession("cannot fit a trend to zero turns")
    if q.shape != w.shape:
        raise ValueError("scores and weights differ in length")
    w = w / w.sum()
    if q.size == 1:
        return 0.0, float(q[0])
    x = np.arange(q.size, dtype=np.float64)
    x_bar = float(w @ x)
    q_bar = float(w @ q)
    # centred form: same estimator, no catastrophic cancellation
    dx = x - x_bar
    beta = float((w * dx) @ (q - q_bar)) / float((w * dx) @ dx)
    return beta, q_bar - beta * x_bar


@dataclass
class SessionAggregate:
    recency_mean: float
    slope: float
    intercept: float
    lambda_eff: float
    final_score: float
    trend: Trend
    weights: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "recency_mean": self.recency_mean,
            "slope": self.slope,
            "intercept": self.intercept,
            "lambda_eff": self.lambda_eff,
            "final_score": self.final_score,
            "trend": self.trend.value,
        }


def unclipped_score(q: Sequence[float], config: AggregationConfig = AggregationConfig()) -> float:
    agg = session_score(q, config)
    return agg.recency_mean + agg.lambda_eff * agg.slope


def session_score(q: Sequence[float], config: AggregationConfig = AggregationConfig()) -> SessionAggregate:
    q = np.asarray(q, dtype=np.float64)
    T = q.size
    w = recency_weights(T, config.gamma)
    mean = float(w @ q)
    beta, alpha = weighted_trend(q, w)
    lam = config.lambda_base * T / config.t_ref
    final = min(1.0, max(0.0, mean + lam * beta))
    if beta < -config.trend_epsilon:
        trend = Trend.DEGRADING
    elif beta > config.trend_epsilon:
        trend = Trend.IMPROVING
    else:
        trend = Trend.STABLE
    return SessionAggregate(mean, beta, alpha, lam, final, trend, w.tolist())
