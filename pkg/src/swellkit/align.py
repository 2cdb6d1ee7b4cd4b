"""Desk-scale adversarial day/night feature alignment.

A small two-player setup over d-dimensional feature vectors: target-domain
features pass through a learned affine map (the alignment stage), source
features are the fixed reference. A one-hidden-layer discriminator
(d -> h tanh -> logistic) is trained to tell the domains apart; the affine
map is trained against it through gradient reversal, so one step descends
the discriminator loss for the discriminator while the aligner moves along
+lambda times that same gradient.

All math is plain float64 numpy with analytic backprop (finite-difference
checkable) and a fixed-seed Generator, so identical configs produce
bit-identical reports. The domain gap is scored with an unbiased
RBF-kernel MMD estimate instead of an embedding plot.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PROB_CLAMP = 1e-7

SOURCE = "source"
TARGET = "target"


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss; carries the last finite state."""

    def __init__(self, message: str, state: "AlignState | None" = None,
                 trace: list[float] | None = None):
        super().__init__(message)
        self.state = state
        self.trace = trace or []


@dataclass(frozen=True, eq=False)
class FeatureBatch:
    domain: str
    vectors: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vectors, dtype=np.float64))
        object.__setattr__(self, "vectors", v)
        if self.domain not in (SOURCE, TARGET):
            raise ValueError(f"domain must be '{SOURCE}' or '{TARGET}', got {self.domain!r}")
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError(f"vectors must be a non-empty (n, d) array, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("feature vectors must be finite")

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return int(self.vectors.shape[0])


@dataclass
class AlignState:
    a_mat: np.ndarray   # (d, d) affine map applied to target features
    a_bias: np.ndarray  # (d,)
    w1: np.ndarray      # (h, d) discriminator hidden layer
    b1: np.ndarray      # (h,)
    w2: np.ndarray      # (h,) output layer
    b2: float
    lambda_: float
    lr: float
    step: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.lambda_ < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lambda_}")
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        for name in ("a_mat", "a_bias", "w1", "b1", "w2"):
            if not np.isfinite(getattr(self, name)).all():
                raise ValueError(f"non-finite parameter {name}")
        if not math.isfinite(self.b2):
            raise ValueError("non-finite parameter b2")

    @property
    def dim(self) -> int:
        return int(self.a_mat.shape[0])

    def copy(self) -> "AlignState":
        return AlignState(self.a_mat.copy(), self.a_bias.copy(), self.w1.copy(),
                          self.b1.copy(), self.w2.copy(), self.b2,
                          self.lambda_, self.lr, self.step, self.seed)


def init_state(dim: int = 2, hidden: int = 16, lambda_: float = 1.0, lr: float = 0.05,
               seed: int = 0) -> AlignState:
    """Identity aligner, small random discriminator."""
    rng = np.random.default_rng(seed)
    return AlignState(
        a_mat=np.eye(dim),
        a_bias=np.zeros(dim),
        w1=rng.normal(0.0, 1.0 / math.sqrt(dim), size=(hidden, dim)),
        b1=np.zeros(hidden),
        w2=rng.normal(0.0, 1.0 / math.sqrt(hidden), size=hidden),
        b2=0.0,
        lambda_=lambda_,
        lr=lr,
        seed=seed,
    )


def apply_aligner(state: AlignState, x: np.ndarray) -> np.ndarray:
    return np.atleast_2d(x) @ state.a_mat.T + state.a_bias


def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                    np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def _disc_probs(state: AlignState, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward pass on already-aligned inputs. Returns (p, hidden activations)."""
    hidden = np.tanh(z @ state.w1.T + state.b1)
    p = _sigmoid(hidden @ state.w2 + state.b2)
    return p, hidden


def disc_forward(state: AlignState, x: np.ndarray, domain: str = SOURCE) -> float:
    """Probability the discriminator assigns to 'source' for one feature vector.

    Target vectors pass through the aligner first; source vectors go in raw.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"disc_forward expects a single vector, got shape {x.shape}")
    if x.shape[0] != state.dim:
        raise ValueError(f"vector has dim {x.shape[0]}, state has dim {state.dim}")
    if domain not in (SOURCE, TARGET):
        raise ValueError(f"unknown domain {domain!r}")
    z = apply_aligner(state, x) if domain == TARGET else np.atleast_2d(x)
    p, _ = _disc_probs(state, z)
    return float(p[0])


def classify_batch(state: AlignState, batch: FeatureBatch) -> np.ndarray:
    if batch.dim != state.dim:
        raise ValueError(f"batch has dim {batch.dim}, state has dim {state.dim}")
    z = apply_aligner(state, batch.vectors) if batch.domain == TARGET else batch.vectors
    p, _ = _disc_probs(state, z)
    return p


def bce_loss(p, label) -> float:
    """Binary cross entropy with probabilities clamped to [1e-7, 1 - 1e-7]."""
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    label = np.asarray(label, dtype=np.float64)
    return float(np.mean(-(label * np.log(p) + (1.0 - label) * np.log(1.0 - p))))


PARAM_NAMES = ("a_mat", "a_bias", "w1", "b1", "w2", "b2")


def loss_and_grads(state: AlignState, src: FeatureBatch, tgt: FeatureBatch):
    """Discriminator loss and its analytic gradients for every parameter.

    The loss is the balanced BCE 0.5 * (L_source + L_target) with labels
    source=1, target=0. Gradients are the plain derivatives of that loss;
    the reversal trick is applied by grad_step, not here.
    """
    if src.domain != SOURCE or tgt.domain != TARGET:
        raise ValueError("loss_and_grads expects (source batch, target batch)")
    if src.dim != tgt.dim or src.dim != state.dim:
        raise ValueError(f"dimension mismatch: src {src.dim}, tgt {tgt.dim}, state {state.dim}")

    xs, xt = src.vectors, tgt.vectors
    zs = xs
    zt = apply_aligner(state, xt)
    ps, hs = _disc_probs(state, zs)
    pt, ht = _disc_probs(state, zt)

    loss_src = bce_loss(ps, np.ones(len(ps)))
    loss_tgt = bce_loss(pt, np.zeros(len(pt)))
    loss = 0.5 * (loss_src + loss_tgt)

    grads = {name: np.zeros_like(getattr(state, name), dtype=np.float64) for name in
             ("a_mat", "a_bias", "w1", "b1", "w2")}
    grads["b2"] = 0.0

    for z, hidden, p, label, n in ((zs, hs, ps, 1.0, len(ps)), (zt, ht, pt, 0.0, len(pt))):
        d_out = 0.5 * (p - label) / n                 # dL/d(logit), (n,)
        grads["w2"] += hidden.T @ d_out
        grads["b2"] += float(d_out.sum())
        d_hidden = d_out[:, None] * state.w2[None, :]
        d_pre = d_hidden * (1.0 - hidden ** 2)        # tanh'
        grads["w1"] += d_pre.T @ z
        grads["b1"] += d_pre.sum(axis=0)
        if label == 0.0:                              # aligner sits on the target path only
            d_z = d_pre @ state.w1                    # (n, d)
            grads["a_mat"] += d_z.T @ xt
            grads["a_bias"] += d_z.sum(axis=0)

    losses = {"disc_loss": loss, "src_loss": loss_src, "tgt_loss": loss_tgt}
    return loss, grads, losses


def grad_step(state: AlignState, src: FeatureBatch, tgt: FeatureBatch):
    """One simultaneous update.

    Discriminator parameters descend the loss; aligner parameters are fed
    the reversed gradient -lambda * g, so descending it moves them along
    +lambda * g (adversarial ascent).
    """
    loss, grads, losses = loss_and_grads(state, src, tgt)
    if not math.isfinite(loss):
        raise DivergenceError(f"non-finite discriminator loss at step {state.step}", state=state)
    lr, lam = state.lr, state.lambda_
    new = AlignState(
        a_mat=state.a_mat - lr * (-lam * grads["a_mat"]),
        a_bias=state.a_bias - lr * (-lam * grads["a_bias"]),
        w1=state.w1 - lr * grads["w1"],
        b1=state.b1 - lr * grads["b1"],
        w2=state.w2 - lr * grads["w2"],
        b2=state.b2 - lr * grads["b2"],
        lambda_=lam,
        lr=lr,
        step=state.step + 1,
        seed=state.seed,
    )
    return new, losses


# --- maximum mean discrepancy ---

def _pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", d, d)


def median_bandwidth(a: FeatureBatch, b: FeatureBatch) -> float:
    """Median pairwise distance over the pooled sample; 1.0 if degenerate."""
    pooled = np.vstack([a.vectors, b.vectors])
    sq = _pairwise_sq_dists(pooled, pooled)
    dists = np.sqrt(sq[np.triu_indices(len(pooled), k=1)])
    med = float(np.median(dists)) if dists.size else 0.0
    return med if med > 0.0 else 1.0


def mmd(a: FeatureBatch, b: FeatureBatch, bandwidth: float | None = None) -> float:
    """Unbiased RBF-kernel MMD^2 estimate, clamped at 0 from below."""
    if len(a) < 2 or len(b) < 2:
        raise ValueError("mmd needs at least 2 vectors per batch for the unbiased estimate")
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if bandwidth is None:
        bandwidth = median_bandwidth(a, b)
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    x, y = a.vectors, b.vectors
    m, n = len(x), len(y)
    scale = 2.0 * bandwidth * bandwidth
    k_xx = np.exp(-_pairwise_sq_dists(x, x) / scale)
    k_yy = np.exp(-_pairwise_sq_dists(y, y) / scale)
    k_xy = np.exp(-_pairwise_sq_dists(x, y) / scale)
    est = ((k_xx.sum() - np.trace(k_xx)) / (m * (m - 1))
           + (k_yy.sum() - np.trace(k_yy)) / (n * (n - 1))
           - 2.0 * k_xy.mean())
    return max(0.0, float(est))


# --- the runnable demonstrator ---

@dataclass(frozen=True)
class DemoConfig:
    steps: int = 600
    lr: float = 0.05
    lambda_: float = 1.0
    seed: int = 7
    src_mean: tuple[float, ...] = (0.0, 0.0)
    tgt_mean: tuple[float, ...] = (3.0, 0.0)
    cov: float = 1.0
    hidden: int = 16
    train_per_domain: int = 256
    heldout_per_domain: int = 256

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if len(self.src_mean) != len(self.tgt_mean):
            raise ValueError("src_mean and tgt_mean must have the same dimension")
        if self.cov <= 0:
            raise ValueError(f"cov must be positive, got {self.cov}")


@dataclass
class DemoReport:
    mmd_before: float
    mmd_after: float
    disc_acc_heldout: float
    bandwidth: float
    steps: int
    loss_trace: list[float] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mmd_before": self.mmd_before,
            "mmd_after": self.mmd_after,
            "disc_acc_heldout": self.disc_acc_heldout,
            "bandwidth": self.bandwidth,
            "steps": self.steps,
            "final_disc_loss": self.loss_trace[-1] if self.loss_trace else None,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


def _config_dict(cfg: DemoConfig) -> dict:
    return {
        "steps": cfg.steps,
        "lr": cfg.lr,
        "lambda": cfg.lambda_,
        "seed": cfg.seed,
        "src_mean": list(cfg.src_mean),
        "tgt_mean": list(cfg.tgt_mean),
        "cov": cfg.cov,
        "hidden": cfg.hidden,
        "train_per_domain": cfg.train_per_domain,
        "heldout_per_domain": cfg.heldout_per_domain,
    }


def run_demo(cfg: DemoConfig = DemoConfig()) -> DemoReport:
    """Train the aligner/discriminator pair on seeded Gaussian day/night features.

    Reports MMD between held-out source features and held-out (aligned)
    target features before and after training, plus the discriminator's
    held-out accuracy; near-chance accuracy and a collapsed MMD mean the
    domains were pulled together.
    """
    rng = np.random.default_rng(cfg.seed)
    dim = len(cfg.src_mean)
    std = math.sqrt(cfg.cov)

    def draw(mean, n):
        return np.asarray(mean, dtype=np.float64) + std * rng.standard_normal((n, dim))

    src_train = FeatureBatch(SOURCE, draw(cfg.src_mean, cfg.train_per_domain))
    tgt_train = FeatureBatch(TARGET, draw(cfg.tgt_mean, cfg.train_per_domain))
    src_held = FeatureBatch(SOURCE, draw(cfg.src_mean, cfg.heldout_per_domain))
    tgt_held = FeatureBatch(TARGET, draw(cfg.tgt_mean, cfg.heldout_per_domain))

    bandwidth = median_bandwidth(src_held, tgt_held)
    mmd_before = mmd(src_held, tgt_held, bandwidth)

    state = init_state(dim=dim, hidden=cfg.hidden, lambda_=cfg.lambda_, lr=cfg.lr, seed=cfg.seed)
    trace: list[float] = []
    for _ in range(cfg.steps):
        try:
            state, losses = grad_step(state, src_train, tgt_train)
        except DivergenceError as e:
            raise DivergenceError(str(e), state=e.state, trace=trace) from e
        trace.append(losses["disc_loss"])

    aligned_held = FeatureBatch(SOURCE, apply_aligner(state, tgt_held.vectors))
    mmd_after = mmd(src_held, aligned_held, bandwidth)

    p_src = classify_batch(state, src_held)
    p_tgt = classify_batch(state, tgt_held)
    correct = int((p_src > 0.5).sum()) + int((p_tgt <= 0.5).sum())
    acc = correct / (len(src_held) + len(tgt_held))

    return DemoReport(
        mmd_before=mmd_before,
        mmd_after=mmd_after,
        disc_acc_heldout=acc,
        bandwidth=bandwidth,
        steps=cfg.steps,
        loss_trace=trace,
        config=_config_dict(cfg),
    )


def write_trace_csv(report: DemoReport, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,disc_loss\n")
        for i, v in enumerate(report.loss_trace):
            fh.write(f"{i},{v!r}\n")
