"""Exact O(N^2) t-SNE for desk-scale cluster analysis.

High-dimensional affinities use a per-point Gaussian kernel whose width is
bisected until the row's realized perplexity (2 to the Shannon entropy)
hits the target; low-dimensional affinities use the Student-t kernel
1 / (1 + d^2). Gradient descent with momentum minimizes the KL divergence
between the two. No tree approximations: N is capped at desk scale.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateDataError, PerplexityTooLargeError

MAX_POINTS = 5000
Q_FLOOR = 1e-12
PERPLEXITY_TOL = 1e-5
MAX_BISECT_STEPS = 200


@dataclass(frozen=True)
class EmbedConfig:
    perplexity: float = 30.0
    n_iter: int = 1000
    learning_rate: float = 200.0
    momentum: float = 0.5
    final_momentum: float = 0.8
    momentum_switch_iter: int = 250
    exaggeration: float = 12.0
    exaggeration_iters: int = 250
    seed: int = 0
    # shrink the target on small inputs: effective = min(p, (N - 1) / 3)
    clamp_perplexity: bool = True

    def __post_init__(self):
        if self.perplexity <= 1.0:
            raise ValueError("perplexity must be > 1")
        if self.n_iter < 0 or self.learning_rate <= 0.0:
            raise ValueError("n_iter must be >= 0 and learning_rate > 0")
        if not (0.0 <= self.momentum < 1.0 and 0.0 <= self.final_momentum < 1.0):
            raise ValueError("momentum must lie in [0, 1)")
        if self.exaggeration < 1.0 or self.exaggeration_iters < 0:
            raise ValueError("exaggeration must be >= 1 with a nonnegative phase length")


@dataclass(frozen=True)
class Embedding:
    """N x 2 point set plus the KL trace of the optimization."""

    points: np.ndarray
    final_kl: float
    history: np.ndarray


def pairwise_sq_dists(X: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, zero diagonal."""
    X = np.asarray(X, dtype=np.float64)
    sq = np.einsum("ij,ij->i", X, X)
    D = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.fill_diagonal(D, 0.0)
    return np.maximum(D, 0.0)


def _row_entropy_nats(dist_row: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    """Shannon entropy (nats) and probabilities of one Gaussian row.

    H = logsumexp(-beta d) + beta <d>_p, evaluated max-shifted.
    """
    logits = -beta * dist_row
    m = logits.max()
    w = np.exp(logits - m)
    z = w.sum()
    p = w / z
    h = float(m + np.log(z) + beta * np.dot(dist_row, p))
    return h, p


def conditional_affinities(X: np.ndarray, perplexity: float) -> np.ndarray:
    """Row-normalized Gaussian neighbor probabilities p(j | i).

    Each row's kernel width is found by bisection so that 2**H(row) matches
    ``perplexity`` to within 1e-5. Rows sum to one; the diagonal is zero.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 3:
        raise ValueError("need an N x D matrix with N >= 3")
    if not np.all(np.isfinite(X)):
        raise ValueError("input rows must be finite")
    n = X.shape[0]
    if perplexity <= 1.0:
        raise ValueError("perplexity must be > 1")
    if perplexity >= n - 1:
        raise PerplexityTooLargeError(
            f"perplexity {perplexity} not attainable with {n} points (needs < {n - 1})"
        )
    D = pairwise_sq_dists(X)
    if D.max() == 0.0:
        raise DegenerateDataError("all points are identical")

    target_h = np.log2(perplexity)
    P = np.zeros((n, n))
    others = np.arange(n)
    for i in range(n):
        idx = others[others != i]
        row = D[i, idx]
        beta, p = _bisect_beta(row, perplexity, target_h)
        P[i, idx] = p
    return P


def _bisect_beta(dist_row: np.ndarray, perplexity: float, target_h_bits: float):
    lo, hi = 0.0, np.inf
    beta = 1.0
    h, p = _row_entropy_nats(dist_row, beta)
    for _ in range(MAX_BISECT_STEPS):
        realized = 2.0 ** (h / np.log(2.0))
        if abs(realized - perplexity) <= PERPLEXITY_TOL:
            break
        if realized > perplexity:  # kernel too wide: raise beta
            lo = beta
            beta = beta * 2.0 if hi == np.inf else 0.5 * (beta + hi)
        else:
            hi = beta
            beta = beta / 2.0 if lo == 0.0 else 0.5 * (beta + lo)
        h, p = _row_entropy_nats(dist_row, beta)
    return beta, p


def symmetrize(P_cond: np.ndarray) -> np.ndarray:
    """Joint affinities p_ij = (p(j|i) + p(i|j)) / 2N; sums to one."""
    P_cond = np.asarray(P_cond, dtype=np.float64)
    n = P_cond.shape[0]
    return (P_cond + P_cond.T) / (2.0 * n)


def student_t_affinities(Y: np.ndarray) -> np.ndarray:
    """Joint Student-t affinities of a 2-D point set.

    q_ij is 1/(1+d_ij^2) normalized over all ordered pairs i != j, with
    off-diagonal entries floored at 1e-12 so later logs stay finite.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[0] < 3:
        raise ValueError("need an N x 2 matrix with N >= 3")
    if not np.all(np.isfinite(Y)):
        raise ValueError("points must be finite")
    w = 1.0 / (1.0 + pairwise_sq_dists(Y))
    np.fill_diagonal(w, 0.0)
    Q = w / w.sum()
    off = ~np.eye(Y.shape[0], dtype=bool)
    Q[off] = np.maximum(Q[off], Q_FLOOR)
    return Q


def kl_cost(P: np.ndarray, Q: np.ndarray) -> float:
    """Kullback-Leibler divergence sum_(i!=j) p log(p/q), with 0 log 0 = 0."""
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if P.shape != Q.shape:
        raise ValueError(f"shape mismatch {P.shape} vs {Q.shape}")
    mask = P > 0.0
    q = np.maximum(Q[mask], Q_FLOOR)
    p = P[mask]
    return float(np.sum(p * np.log(p / q)))


def kl_gradient(P: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """dC/dY of the t-SNE cost at the current embedding.

    grad_i = 4 * sum_j (p_ij - q_ij) * (y_i - y_j) / (1 + ||y_i - y_j||^2)
    """
    Y = np.asarray(Y, dtype=np.float64)
    w = 1.0 / (1.0 + pairwise_sq_dists(Y))
    np.fill_diagonal(w, 0.0)
    Q = w / w.sum()
    PQw = (P - Q) * w
    return 4.0 * (PQw.sum(axis=1)[:, None] * Y - PQw @ Y)


def tsne(X: np.ndarray, config: EmbedConfig = EmbedConfig(), init: np.ndarray | None = None) -> Embedding:
    """Embed rows of X into 2-D by momentum gradient descent on the KL cost.

    The joint target affinities are multiplied by ``config.exaggeration``
    for the first ``exaggeration_iters`` steps; after that phase the
    optimizer state restarts and every step is safeguarded (velocity halved
    while the true cost would rise), so the recorded trace is
    non-increasing from there on. The history holds the un-exaggerated KL
    after each step, preceded by the KL of the initialization, so
    ``n_iter=0`` returns the seeded init unchanged with a one-entry
    history.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n > MAX_POINTS:
        raise ValueError(f"{n} points exceeds the exact-algorithm cap of {MAX_POINTS}")
    perplexity = config.perplexity
    if config.clamp_perplexity:
        perplexity = min(perplexity, (n - 1) / 3.0)
    P = symmetrize(conditional_affinities(X, perplexity))

    rng = np.random.default_rng(config.seed)
    Y = rng.normal(0.0, 1e-2, size=(n, 2)) if init is None else np.array(init, dtype=np.float64)
    if Y.shape != (n, 2):
        raise ValueError(f"init must be ({n}, 2), got {Y.shape}")

    kl_now = kl_cost(P, student_t_affinities(Y))
    history = [kl_now]
    velocity = np.zeros_like(Y)
    gains = np.ones_like(Y)
    for it in range(config.n_iter):
        if it == config.exaggeration_iters:
            # fresh optimizer state for the un-exaggerated phase; the
            # carried velocity belongs to a 12x steeper landscape
            velocity = np.zeros_like(Y)
            gains = np.ones_like(Y)
        exaggerated = it < config.exaggeration_iters
        P_eff = P * config.exaggeration if exaggerated else P
        grad = kl_gradient(P_eff, Y)
        mom = config.momentum if it < config.momentum_switch_iter else config.final_momentum
        # per-coordinate adaptive gains damp oscillation at the fixed rate
        agree = np.sign(grad) == np.sign(velocity)
        gains = np.where(agree, gains * 0.8, gains + 0.2)
        gains = np.maximum(gains, 0.01)
        velocity = mom * velocity - config.learning_rate * gains * grad
        if exaggerated:
            Y = Y + velocity
            Y = Y - Y.mean(axis=0)
            kl_now = kl_cost(P, student_t_affinities(Y))
        else:
            # safeguarded step: halve the velocity until the true cost does
            # not rise, so the recorded trace descends past this point
            for _ in range(20):
                trial = Y + velocity
                trial = trial - trial.mean(axis=0)
                kl_trial = kl_cost(P, student_t_affinities(trial))
                if kl_trial <= kl_now:
                    break
                velocity = 0.5 * velocity
            Y, kl_now = trial, kl_trial
        history.append(kl_now)
    history_arr = np.asarray(history)
    return Embedding(points=Y, final_kl=float(history_arr[-1]), history=history_arr)


# -- artifacts ----------------------------------------------------------------

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173",
)


def write_embedding_csv(
    path: str | Path,
    points: np.ndarray,
    labels: Sequence[int],
    domains: Sequence[tuple[int, int, int]] | None = None,
) -> None:
    points = np.asarray(points)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "label", "domain"])
        for i, (x, y) in enumerate(points):
            dom = "" if domains is None else ":".join(str(v) for v in domains[i])
            writer.writerow([f"{x:.6f}", f"{y:.6f}", labels[i], dom])


def write_embedding_svg(
    path: str | Path,
    points: np.ndarray,
    labels: Sequence[int],
    label_names: Sequence[str] | None = None,
    size: int = 640,
) -> None:
    """Render the point set as a standalone SVG scatter.

    One ``<circle class="pt">`` element per point, colored by label, plus a
    legend entry per distinct label. The format is plain text so tests and
    diffs can count markers directly.
    """
    points = np.asarray(points, dtype=np.float64)
    labels = [int(l) for l in labels]
    distinct = sorted(set(labels))
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    margin = 40.0
    scale = (size - 2 * margin) / span

    def sx(v: float) -> float:
        return margin + (v - lo[0]) * scale[0]

    def sy(v: float) -> float:
        return size - margin - (v - lo[1]) * scale[1]

    legend_w = 150
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size + legend_w}" '
        f'height="{size}" viewBox="0 0 {size + legend_w} {size}">',
        f'<rect width="{size + legend_w}" height="{size}" fill="white"/>',
    ]
    for (x, y), lab in zip(points, labels):
        color = PALETTE[distinct.index(lab) % len(PALETTE)]
        lines.append(
            f'<circle class="pt" cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" '
            f'fill="{color}" fill-opacity="0.8"/>'
        )
    for row, lab in enumerate(distinct):
        color = PALETTE[row % len(PALETTE)]
        name = label_names[lab] if label_names is not None else str(lab)
        cy = margin + 18.0 * row
        lines.append(
            f'<circle class="legend" cx="{size + 12}" cy="{cy:.2f}" r="4" fill="{color}"/>'
        )
        lines.append(
            f'<text x="{size + 24}" y="{cy + 4:.2f}" font-size="12" '
            f'font-family="sans-serif">{name}</text>'
        )
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
