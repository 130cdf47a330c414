"""Contact / contactless phase segmentation from joint-torque residuals.

A per-joint autoregressive model predicts the motor torque one step ahead;
the residual (measured minus predicted) is compared against a dynamic
threshold built from rolling robust statistics. Contact is declared only
after n_consec consecutive exceedances and back-filled over the whole run.

The threshold at time t uses only residuals strictly before t (no feedback
from the flags), which makes sensitivity exactly monotone in lambda.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CONTACTLESS = 0
CONTACT = 1


@dataclass
class ContactConfig:
    order: int = 5
    window: int = 50
    lam: float = 4.0
    n_consec: int = 3
    min_history: int = 5  # residual samples required before thresholds activate

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "window": self.window,
            "lam": self.lam,
            "n_consec": self.n_consec,
            "min_history": self.min_history,
        }

    @staticmethod
    def from_dict(d: dict) -> "ContactConfig":
        cfg = ContactConfig()
        for k, v in d.items():
            if hasattr(cfg, k):
                setattr(cfg, k, type(getattr(cfg, k))(v))
        return cfg


@dataclass
class ArModel:
    """Per-joint AR(order) one-step predictor with intercept."""

    order: int
    intercept: np.ndarray      # (n_joints,)
    coefficients: np.ndarray   # (n_joints, order), lag 1 first

    def predict(self, trace: np.ndarray) -> np.ndarray:
        """One-step-ahead predictions; rows before `order` are copied from the trace
        (zero residual there by construction)."""
        trace = _check_trace(trace)
        T, n = trace.shape
        if n != self.intercept.shape[0]:
            raise ValueError("trace joint count does not match model")
        pred = trace.copy().astype(float)
        for t in range(self.order, T):
            lags = trace[t - self.order : t][::-1]  # (order, n), lag 1 first
            pred[t] = self.intercept + np.einsum("jk,kj->j", self.coefficients, lags)
        return pred


def _check_trace(trace) -> np.ndarray:
    trace = np.asarray(trace, dtype=float)
    if trace.ndim == 1:
        trace = trace[:, None]
    if trace.ndim != 2:
        raise ValueError("torque trace must be (T,) or (T, n_joints)")
    if not np.all(np.isfinite(trace)):
        raise ValueError("torque trace contains non-finite values")
    return trace


def fit_ar_model(trace, order: int) -> ArModel:
    """Least-squares AR(order) fit per joint over the whole trace.

    Degenerate traces (e.g. constant) are not an error: the minimum-norm
    solution reproduces them with zero residual.
    """
    trace = _check_trace(trace)
    T, n = trace.shape
    if order < 1:
        raise ValueError("order must be >= 1")
    if T <= order:
        raise ValueError(f"need more than order={order} samples, got {T}")
    intercept = np.zeros(n)
    coeffs = np.zeros((n, order))
    rows = T - order
    for j in range(n):
        X = np.ones((rows, order + 1))
        for k in range(1, order + 1):
            X[:, k] = trace[order - k : T - k, j]
        y = trace[order:, j]
        sol, *_ = np.linalg.lstsq(X, y, rcond=None)
        intercept[j] = sol[0]
        coeffs[j] = sol[1:]
    return ArModel(order=order, intercept=intercept, coefficients=coeffs)


@dataclass
class ContactSegmentation:
    labels: np.ndarray     # (T,) ints in {CONTACTLESS, CONTACT}
    residual: np.ndarray   # (T, n_joints) torque residual
    threshold: np.ndarray  # (T, n_joints); +inf where inactive

    def __post_init__(self):
        if len(self.labels) != len(self.residual) or len(self.labels) != len(self.threshold):
            raise ValueError("segmentation traces must share length")

    @property
    def contact_mask(self) -> np.ndarray:
        return self.labels == CONTACT

    def to_dict(self) -> dict:
        return {
            "labels": [int(v) for v in self.labels],
            "residual": self.residual.tolist(),
            "threshold": [
                [v if np.isfinite(v) else None for v in row] for row in self.threshold.tolist()
            ],
        }


def _rolling_threshold(abs_res: np.ndarray, start: int, cfg: ContactConfig) -> np.ndarray:
    """median + lam * MAD over the trailing window [t-window, t), +inf until
    min_history samples exist."""
    T, n = abs_res.shape
    thr = np.full((T, n), np.inf)
    for t in range(start, T):
        lo = max(start, t - cfg.window)
        if t - lo < cfg.min_history:
            continue
        w = abs_res[lo:t]
        med = np.median(w, axis=0)
        mad = np.median(np.abs(w - med), axis=0)
        thr[t] = med + cfg.lam * mad
    return thr


def _backfill_runs(flags: np.ndarray, n_consec: int) -> np.ndarray:
    """Keep only flag runs of length >= n_consec; label the whole run."""
    labels = np.full(len(flags), CONTACTLESS, dtype=int)
    t = 0
    T = len(flags)
    while t < T:
        if flags[t]:
            start = t
            while t < T and flags[t]:
                t += 1
            if t - start >= n_consec:
                labels[start:t] = CONTACT
        else:
            t += 1
    return labels


def segment_contacts(trace, model: ArModel, cfg: ContactConfig | None = None) -> ContactSegmentation:
    """Label each timestep Contact/Contactless from torque residuals.

    A timestep is flagged when any joint's |residual| exceeds its rolling
    median + lam*MAD threshold; Contact requires n_consec consecutive flags
    and is back-filled over the run. Timesteps before the AR order inherit
    the first decided label.
    """
    cfg = cfg or ContactConfig()
    if cfg.window < 2:
        raise ValueError("window must be >= 2")
    if cfg.n_consec < 1:
        raise ValueError("n_consec must be >= 1")
    trace = _check_trace(trace)
    T = trace.shape[0]
    pred = model.predict(trace)
    residual = trace - pred
    abs_res = np.abs(residual)
    thr = _rolling_threshold(abs_res, model.order, cfg)
    flags = np.any(abs_res > thr, axis=1)
    flags[: model.order] = False
    labels = _backfill_runs(flags, cfg.n_consec)
    if T > model.order:
        labels[: model.order] = labels[model.order]
    return ContactSegmentation(labels=labels, residual=residual, threshold=thr)
