"""Dual annealing: generalized simulated annealing plus local refinement.

The visiting step draws from the heavy-tailed generalized visiting
distribution controlled by q_visit; acceptance uses the generalized
Metropolis rule with q_accept; the temperature follows the decay law

    T(k) = T0 * (2^(q_visit-1) - 1) / ((1 + k)^(q_visit-1) - 1)

and the annealing incumbent is polished by a bounded coordinate-descent
refinement. The search terminates early once the best value reaches the
configured threshold. Deterministic for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_TAIL_LIMIT = 1e8
_MIN_VISIT_BOUND = 1e-10


@dataclass
class AnnealConfig:
    q_visit: float = 2.62
    q_accept: float = -5.0
    initial_temp: float = 5230.0
    max_iters: int = 1000
    early_cost: float | None = None  # stop as soon as f_best <= early_cost
    restart_temp_ratio: float = 2e-5
    refine_evals: int = 600  # evaluation budget of the refinement phase

    def validate(self) -> None:
        if not 1.0 < self.q_visit < 3.0:
            raise ValueError("q_visit must lie in (1, 3)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.initial_temp <= 0:
            raise ValueError("initial_temp must be positive")

    def to_dict(self) -> dict:
        return {
            "q_visit": self.q_visit,
            "q_accept": self.q_accept,
            "initial_temp": self.initial_temp,
            "max_iters": self.max_iters,
            "early_cost": self.early_cost,
            "refine_evals": self.refine_evals,
        }

    @staticmethod
    def from_dict(d: dict) -> "AnnealConfig":
        cfg = AnnealConfig()
        for k, v in d.items():
            if hasattr(cfg, k):
                setattr(cfg, k, v)
        return cfg


@dataclass
class AnnealResult:
    x: np.ndarray
    fun: float
    nfev: int
    early_terminated: bool


class _EarlyStop(Exception):
    pass


class _Tracker:
    """Counts evaluations, tracks the incumbent, raises once early_cost is met."""

    def __init__(self, func, early_cost):
        self.func = func
        self.early_cost = early_cost
        self.nfev = 0
        self.x_best = None
        self.f_best = math.inf

    def __call__(self, x):
        f = float(self.func(np.asarray(x, dtype=float)))
        self.nfev += 1
        if f < self.f_best:
            self.f_best = f
            self.x_best = np.array(x, dtype=float)
        if self.early_cost is not None and self.f_best <= self.early_cost:
            raise _EarlyStop
        return f


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(0 if rng is None else rng)


def _visit_factors(qv: float) -> tuple[float, float]:
    factor2 = math.exp((4.0 - qv) * math.log(qv - 1.0))
    factor3 = math.exp((2.0 - qv) * math.log(2.0) / (qv - 1.0))
    factor4p = math.sqrt(math.pi) * factor2 / (factor3 * (3.0 - qv))
    factor5 = 1.0 / (qv - 1.0) - 0.5
    d1 = 2.0 - factor5
    factor6 = math.pi * (1.0 - factor5) / math.sin(math.pi * (1.0 - factor5)) / math.exp(
        math.lgamma(d1)
    )
    return factor4p, factor6


def _visit_values(qv, temperature, dim, rng, factor4p, factor6) -> np.ndarray:
    """Heavy-tailed visiting displacements for `dim` coordinates."""
    gauss = rng.normal(size=(dim, 2))
    x, y = gauss[:, 0], gauss[:, 1]
    factor1 = math.exp(math.log(temperature) / (qv - 1.0))
    factor4 = factor4p * factor1
    sigmax = math.exp(-(qv - 1.0) * math.log(factor6 / factor4) / (3.0 - qv))
    num = sigmax * x
    den = np.exp((qv - 1.0) * np.log(np.fabs(y)) / (3.0 - qv))
    visits = num / den
    big = visits > _TAIL_LIMIT
    visits[big] = _TAIL_LIMIT * rng.uniform(size=int(big.sum()))
    small = visits < -_TAIL_LIMIT
    visits[small] = -_TAIL_LIMIT * rng.uniform(size=int(small.sum()))
    return visits


def _fold(x: np.ndarray, lower: np.ndarray, span: np.ndarray) -> np.ndarray:
    folded = np.fmod(np.fmod(x - lower, span) + span, span) + lower
    folded[np.fabs(folded - lower) < _MIN_VISIT_BOUND] += _MIN_VISIT_BOUND
    return folded


def _coordinate_descent(tracker, x0, f0, lower, upper, max_evals):
    """Shrinking-step coordinate descent within the bounds."""
    x = np.array(x0, dtype=float)
    f = f0
    h = 0.1 * (upper - lower)
    used = 0
    while used < max_evals and np.max(h / (upper - lower)) > 1e-12:
        improved = False
        for d in range(len(x)):
            for delta in (h[d], -h[d]):
                if used >= max_evals:
                    return x, f
                xc = x.copy()
                xc[d] = min(max(x[d] + delta, lower[d]), upper[d])
                if xc[d] == x[d]:
                    continue
                fc = tracker(xc)
                used += 1
                if fc < f:
                    x, f = xc, fc
                    improved = True
                    break
        if not improved:
            h *= 0.5
    return x, f


def dual_annealing(func, bounds, cfg: AnnealConfig | None = None, rng=None, x0=None) -> AnnealResult:
    """Minimize `func` over a box via generalized simulated annealing.

    Args:
        func: objective, total on the box.
        bounds: sequence of (lo, hi) per dimension, finite.
        cfg: annealing parameters (AnnealConfig defaults).
        rng: numpy Generator or integer seed; the run is a pure function of it.
        x0: optional start point; drawn uniformly in the box when omitted.
    """
    cfg = cfg or AnnealConfig()
    cfg.validate()
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] != 2:
        raise ValueError("bounds must be a sequence of (lo, hi) pairs")
    lower, upper = bounds[:, 0].copy(), bounds[:, 1].copy()
    if not np.all(np.isfinite(bounds)) or not np.all(lower < upper):
        raise ValueError("bounds must be finite with lo < hi")
    span = upper - lower
    dim = len(lower)
    rng = _as_rng(rng)
    qv, qa = cfg.q_visit, cfg.q_accept
    factor4p, factor6 = _visit_factors(qv)
    t1 = math.exp((qv - 1.0) * math.log(2.0)) - 1.0
    tracker = _Tracker(func, cfg.early_cost)

    try:
        x_cur = np.array(x0, dtype=float) if x0 is not None else rng.uniform(lower, upper)
        f_cur = tracker(x_cur)
        for i in range(cfg.max_iters):
            t2 = math.exp((qv - 1.0) * math.log(float(i) + 2.0)) - 1.0
            temperature = cfg.initial_temp * t1 / t2
            if temperature < cfg.initial_temp * cfg.restart_temp_ratio:
                # reanneal: restart the chain from a fresh point, keep the best
                x_cur = rng.uniform(lower, upper)
                f_cur = tracker(x_cur)
                continue
            t_accept = temperature / float(i + 1)
            for j in range(2 * dim):
                if j < dim:
                    visits = _visit_values(qv, temperature, dim, rng, factor4p, factor6)
                    x_cand = _fold(x_cur + visits, lower, span)
                else:
                    x_cand = x_cur.copy()
                    k = j - dim
                    visit = _visit_values(qv, temperature, 1, rng, factor4p, factor6)[0]
                    x_cand[k] = _fold(
                        np.array([x_cur[k] + visit]), lower[k : k + 1], span[k : k + 1]
                    )[0]
                f_cand = tracker(x_cand)
                if f_cand < f_cur:
                    x_cur, f_cur = x_cand, f_cand
                else:
                    base = 1.0 - (1.0 - qa) * (f_cand - f_cur) / t_accept
                    prob = 0.0 if base <= 0.0 else math.exp(math.log(base) / (1.0 - qa))
                    if rng.uniform() <= prob:
                        x_cur, f_cur = x_cand, f_cand
        _coordinate_descent(
            tracker, tracker.x_best, tracker.f_best, lower, upper, cfg.refine_evals
        )
    except _EarlyStop:
        return AnnealResult(tracker.x_best, tracker.f_best, tracker.nfev, True)
    return AnnealResult(tracker.x_best, tracker.f_best, tracker.nfev, False)
