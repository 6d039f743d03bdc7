"""Learned softmax calibration of similarity scores into probabilities.

A similarity row is first transformed linearly (``scale * sim + offset``)
and then pushed through a temperature softmax.  The three parameters are
fit by full-batch gradient descent on the cross-entropy of the labelled
rows.  Temperature is kept positive by optimizing its log.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class CalibrationError(RuntimeError):
    """Raised when the calibration fit produces a non-finite loss."""


@dataclass(frozen=True)
class CalibrationParams:
    """Parameters of the similarity-to-probability model.

    ``temperature`` is stored directly but optimized as ``log temperature``
    so it stays positive without projection.
    """

    offset: float = 0.0       # additive term of the linear transform
    scale: float = 1.0        # multiplicative term of the linear transform
    temperature: float = 1.0  # softmax temperature, > 0

    def __post_init__(self):
        if not (self.temperature > 0.0):
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        for v in (self.offset, self.scale, self.temperature):
            if not np.isfinite(v):
                raise ValueError("non-finite calibration parameter")


@dataclass(frozen=True)
class ProbRow:
    """A candidate distribution for one source entity.

    Probabilities are nonnegative, sum to 1 within 1e-9, and candidate ids
    are unique.
    """

    entity: int
    cand_ids: tuple[int, ...]
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", p)
        if len(self.cand_ids) != p.shape[0]:
            raise ValueError("cand_ids / probs length mismatch")
        if len(set(self.cand_ids)) != len(self.cand_ids):
            raise ValueError("duplicate candidate ids")
        if np.any(p < 0) or abs(float(p.sum()) - 1.0) > 1e-9:
            raise ValueError("probabilities must be nonnegative and sum to 1")

    def argmax_candidate(self) -> int:
        """Highest-probability candidate; ties break to the lowest id."""
        return argmax_lowest_id(self.cand_ids, self.probs)

    def top_prob(self) -> float:
        return float(self.probs[_argmax_index(self.cand_ids, self.probs)])


def _argmax_index(cand_ids, values) -> int:
    values = np.asarray(values)
    best = np.flatnonzero(values == values.max())
    if len(best) == 1:
        return int(best[0])
    return int(min(best, key=lambda i: cand_ids[i]))


def argmax_lowest_id(cand_ids, values) -> int:
    """Candidate id with the maximal value, lowest id on ties."""
    return cand_ids[_argmax_index(cand_ids, values)]


def _softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def calibrate_matrix(sims: np.ndarray, params: CalibrationParams) -> np.ndarray:
    """Row-wise calibrated probabilities for a dense similarity matrix."""
    sims = np.asarray(sims, dtype=np.float64)
    z = (params.scale * sims + params.offset) / params.temperature
    return _softmax(z, axis=-1)


def calibrate_row(
    sim_row: np.ndarray,
    params: CalibrationParams,
    entity: int = 0,
    cand_ids: tuple[int, ...] | None = None,
) -> ProbRow:
    """Calibrate one similarity row into a ProbRow.

    Candidate ids default to the row positions.  Order preserving for
    positive ``scale / temperature``.
    """
    sim_row = np.asarray(sim_row, dtype=np.float64)
    if sim_row.ndim != 1 or sim_row.shape[0] == 0:
        raise ValueError("sim_row must be a nonempty vector")
    if not np.all(np.isfinite(sim_row)):
        raise ValueError("sim_row must be finite")
    probs = calibrate_matrix(sim_row[None, :], params)[0]
    ids = tuple(range(sim_row.shape[0])) if cand_ids is None else tuple(cand_ids)
    return ProbRow(entity=entity, cand_ids=ids, probs=probs)


def calibrate_topk_row(
    top_scores: np.ndarray,
    n_total: int,
    fill: float,
    params: CalibrationParams,
) -> tuple[np.ndarray, float]:
    """Top-K calibration where all tail candidates share the fill score.

    Returns the probabilities of the K explicit candidates plus the total
    tail mass; the full-row softmax is recovered without densifying.
    """
    top_scores = np.asarray(top_scores, dtype=np.float64)
    k = top_scores.shape[0]
    if n_total < k:
        raise ValueError("n_total smaller than the explicit candidate count")
    z_top = (params.scale * top_scores + params.offset) / params.temperature
    z_fill = (params.scale * fill + params.offset) / params.temperature
    m = max(float(z_top.max()), z_fill)
    e_top = np.exp(z_top - m)
    e_fill = float(np.exp(z_fill - m))
    denom = float(e_top.sum()) + (n_total - k) * e_fill
    return e_top / denom, (n_total - k) * e_fill / denom


def cross_entropy_and_grad(
    sims: np.ndarray,
    truth_cols: np.ndarray,
    params: CalibrationParams,
) -> tuple[float, np.ndarray]:
    """Total cross-entropy over labelled rows and its gradient.

    Gradient is with respect to ``(offset, scale, log temperature)``.
    """
    sims = np.asarray(sims, dtype=np.float64)
    truth_cols = np.asarray(truth_cols, dtype=np.int64)
    tau = params.temperature
    z = (params.scale * sims + params.offset) / tau
    p = _softmax(z, axis=-1)
    rows = np.arange(sims.shape[0])
    logp = z - z.max(axis=-1, keepdims=True)
    logp = logp - np.log(np.exp(logp).sum(axis=-1, keepdims=True))
    loss = float(-logp[rows, truth_cols].sum())

    d = p.copy()
    d[rows, truth_cols] -= 1.0  # dL/dz
    g_offset = float(d.sum() / tau)
    g_scale = float((d * sims).sum() / tau)
    g_logtau = float(-(d * z).sum())
    return loss, np.array([g_offset, g_scale, g_logtau])


def fit_calibration(
    sims: np.ndarray,
    truth_cols: np.ndarray,
    init: CalibrationParams | None = None,
    lr: float = 0.05,
    epochs: int = 200,
) -> tuple[CalibrationParams, list[float]]:
    """Fit calibration parameters by full-batch gradient descent.

    ``sims`` holds one similarity row per labelled source entity and
    ``truth_cols`` the column of its ground-truth counterpart.  Returns the
    best-loss iterate (never worse than ``init``) together with the loss
    trace.  Raises ``CalibrationError`` if the loss leaves the finite range,
    reporting the offending epoch.
    """
    sims = np.asarray(sims, dtype=np.float64)
    if sims.ndim != 2 or sims.shape[0] == 0:
        raise ValueError("need at least one labelled row")
    params = init or CalibrationParams()
    theta = np.array([params.offset, params.scale, np.log(params.temperature)])

    trace: list[float] = []
    best_theta = theta.copy()
    best_loss = np.inf
    for epoch in range(epochs + 1):
        tau = float(np.exp(theta[2]))
        if not (np.all(np.isfinite(theta)) and np.isfinite(tau) and tau > 0.0):
            raise CalibrationError(
                f"non-finite loss at epoch {epoch} (temperature left float range)"
            )
        cur = CalibrationParams(
            offset=float(theta[0]), scale=float(theta[1]),
            temperature=float(np.exp(theta[2])),
        )
        loss, grad = cross_entropy_and_grad(sims, truth_cols, cur)
        if not np.isfinite(loss):
            raise CalibrationError(f"non-finite loss at epoch {epoch}")
        trace.append(loss)
        if loss < best_loss:
            best_loss = loss
            best_theta = theta.copy()
        if epoch == epochs:
            break
        theta = theta - lr * grad

    if epochs == 0:
        return params, trace
    return (
        CalibrationParams(
            offset=float(best_theta[0]), scale=float(best_theta[1]),
            temperature=float(np.exp(best_theta[2])),
        ),
        trace,
    )
