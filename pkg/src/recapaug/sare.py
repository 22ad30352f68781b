"""Risk-equalization objective, contrastive regularizer, and a toy trainer.

The spoofing-attack risk is equalized by penalizing the population
variance of per-domain spoof risks. Real-face embeddings are pulled
together by a supervised contrastive term whose anchors and positives
are the real examples only (negatives are everything else). The toy
trainer runs a two-layer analytic-gradient model on a synthetic
multi-domain scenario so the optimization behavior is checkable without
an autodiff dependency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericError, RangeError, UndefinedLossError
from .rng import derive_rng


@dataclass
class RiskVector:
    risks: np.ndarray
    domain_ids: list

    def __post_init__(self):
        self.risks = np.asarray(self.risks, dtype=np.float64)
        if self.risks.ndim != 1 or self.risks.size < 1:
            raise RangeError("risk vector needs at least one domain")
        if (self.risks < 0).any():
            raise RangeError("risks must be non-negative")
        if len(self.domain_ids) != self.risks.size:
            raise RangeError("domain_ids must match risks")

    @property
    def m(self) -> int:
        return self.risks.size


def sare_loss(r: RiskVector) -> float:
    """Population variance of the per-domain risks; zero when m == 1."""
    return float(np.mean((r.risks - r.risks.mean()) ** 2))


def sare_grad(r: RiskVector) -> np.ndarray:
    """d variance / d R_i = (2/m) (R_i - mean)."""
    m = r.m
    return (2.0 / m) * (r.risks - r.risks.mean())


def supcon_loss_and_grad(embeddings: np.ndarray, is_real: np.ndarray, tau: float = 0.07):
    """Supervised contrastive loss over real-face anchors, with gradient.

    Anchors and positives are the real examples; the denominator runs
    over every other example in the batch. Inputs are expected
    L2-normalized; the gradient is of the loss as a function of the raw
    vectors.
    """
    if tau <= 0:
        raise RangeError(f"temperature must be positive, got {tau}")
    z = np.asarray(embeddings, dtype=np.float64)
    is_real = np.asarray(is_real, dtype=bool)
    n = z.shape[0]
    anchors = np.flatnonzero(is_real)
    if anchors.size < 2:
        raise UndefinedLossError(
            f"supcon needs >= 2 real examples, got {anchors.size}"
        )
    sim = (z @ z.T) / tau
    np.fill_diagonal(sim, -np.inf)  # exclude self from every denominator

    # softmax over each anchor row (self excluded)
    row_max = sim[anchors].max(axis=1, keepdims=True)
    expd = np.exp(sim[anchors] - row_max)
    denom = expd.sum(axis=1, keepdims=True)
    log_denom = np.log(denom) + row_max

    pos_mask = np.zeros((anchors.size, n), dtype=bool)
    pos_mask[:, anchors] = True
    pos_mask[np.arange(anchors.size), anchors] = False
    n_pos = pos_mask.sum(axis=1)

    pos_sim = np.where(pos_mask, sim[anchors], 0.0)
    loss_rows = -(pos_sim.sum(axis=1) / n_pos) + log_denom[:, 0]
    loss = float(loss_rows.mean())

    # dL/dsim rows for anchors: softmax - positive indicator / |P|
    g_rows = expd / denom - pos_mask / n_pos[:, None]
    g = np.zeros((n, n))
    g[anchors] = g_rows / anchors.size
    grad = (g @ z + g.T @ z) / tau
    return loss, grad


def supcon_loss(embeddings: np.ndarray, is_real: np.ndarray, tau: float = 0.07) -> float:
    return supcon_loss_and_grad(embeddings, is_real, tau)[0]


@dataclass
class LossReport:
    bce: float
    con: float
    sare: float
    alpha: float
    beta: float
    total: float = field(init=False)

    def __post_init__(self):
        self.total = self.bce + self.alpha * self.con + self.beta * self.sare

    def as_dict(self) -> dict:
        return {
            "bce": self.bce,
            "con": self.con,
            "sare": self.sare,
            "alpha": self.alpha,
            "beta": self.beta,
            "total": self.total,
        }


def total_loss(bce: float, con: float, sare: float, alpha: float = 0.02, beta: float = 10.0) -> LossReport:
    for name, v in (("bce", bce), ("con", con), ("sare", sare), ("alpha", alpha), ("beta", beta)):
        if not np.isfinite(v):
            raise NumericError(f"non-finite loss input {name}={v}")
    return LossReport(bce=bce, con=con, sare=sare, alpha=alpha, beta=beta)


# --- megabatch construction --------------------------------------------------

@dataclass
class MegaBatch:
    """Stacked per-domain batches with index slices to recover each one."""

    features: np.ndarray
    is_spoof: np.ndarray
    slices: list  # (domain_id, start, stop) in stacking order
    m: int

    def __post_init__(self):
        cursor = 0
        for _, start, stop in self.slices:
            if start != cursor or stop < start:
                raise ConfigError("megabatch slices must be ordered, disjoint, covering")
            cursor = stop
        if cursor != self.features.shape[0]:
            raise ConfigError("megabatch slices do not cover the batch")

    def domain_batch(self, index: int):
        domain_id, start, stop = self.slices[index]
        return domain_id, self.features[start:stop], self.is_spoof[start:stop]


def build_megabatch(domain_batches, augmentor, batch_budget: int | None = None) -> MegaBatch:
    """Stack each source batch and its augmented twin; m doubles.

    `augmentor(features, is_spoof, domain_id) -> (features, is_spoof,
    new_domain_id)` is typically a sub-policy application closed over the
    epoch policy.
    """
    if not domain_batches:
        raise ConfigError("need at least one source domain batch")
    m = 2 * len(domain_batches)
    if batch_budget is not None:
        per_domain = batch_budget // m
        for feats, _, domain_id in domain_batches:
            if len(feats) > per_domain:
                raise ConfigError(
                    f"domain {domain_id} holds {len(feats)} examples but the "
                    f"budget S^B={batch_budget} with m={m} allows {per_domain}"
                )
    parts = []
    flags = []
    slices = []
    cursor = 0
    ordered = list(domain_batches) + [augmentor(f, y, d) for f, y, d in domain_batches]
    for feats, is_spoof, domain_id in ordered:
        feats = np.asarray(feats, dtype=np.float64)
        is_spoof = np.asarray(is_spoof, dtype=bool)
        parts.append(feats)
        flags.append(is_spoof)
        slices.append((domain_id, cursor, cursor + len(feats)))
        cursor += len(feats)
    return MegaBatch(np.concatenate(parts), np.concatenate(flags), slices, m)


def spoof_risks(megabatch: MegaBatch, per_example_losses: np.ndarray) -> RiskVector:
    """Mean loss over spoof examples per slice; spoof-free slices drop out."""
    losses = np.asarray(per_example_losses, dtype=np.float64)
    if losses.shape[0] != megabatch.features.shape[0]:
        raise RangeError("per-example losses must align with the megabatch")
    risks = []
    ids = []
    for domain_id, start, stop in megabatch.slices:
        mask = megabatch.is_spoof[start:stop]
        if mask.any():
            risks.append(losses[start:stop][mask].mean())
            ids.append(domain_id)
    if not risks:
        raise UndefinedLossError("no slice contains spoof examples")
    return RiskVector(np.array(risks), ids)


# --- toy trainer -------------------------------------------------------------

def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class ToyModel:
    """tanh hidden layer + linear head; embeddings feed the contrastive term."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float

    @classmethod
    def init(cls, rng, input_dim: int, hidden: int) -> "ToyModel":
        return cls(
            w1=rng.normal(0.0, 0.6, size=(hidden, input_dim)),
            b1=np.zeros(hidden),
            w2=rng.normal(0.0, 0.6, size=hidden),
            b2=0.0,
        )

    def params(self):
        return [self.w1, self.b1, self.w2, np.array([self.b2])]

    def forward(self, x: np.ndarray):
        pre = x @ self.w1.T + self.b1
        emb = np.tanh(pre)
        logits = emb @ self.w2 + self.b2
        return pre, emb, logits


def _normalize_rows(e: np.ndarray):
    norms = np.linalg.norm(e, axis=1, keepdims=True)
    norms = np.maximum(norms, 1e-12)
    return e / norms, norms


@dataclass
class TrainConfig:
    alpha: float = 0.02
    beta: float = 10.0
    tau: float = 0.07
    lr: float = 0.2
    epochs: int = 300
    hidden: int = 8
    seed: int = 0
    batch_budget: int = 320

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        doc = json.loads(Path(path).read_text())
        unknown = set(doc) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown trainer config keys: {sorted(unknown)}")
        return cls(**doc)


def toy_loss_and_grads(model: ToyModel, mega: MegaBatch, config: TrainConfig):
    """Combined loss of the batch plus analytic parameter gradients."""
    x = mega.features
    y = mega.is_spoof.astype(np.float64)
    n = x.shape[0]
    pre, emb, logits = model.forward(x)
    per_example_bce = _softplus(logits) - y * logits
    bce = float(per_example_bce.mean())
    probs = _sigmoid(logits)

    risk_vec = spoof_risks(mega, per_example_bce)
    sare = sare_loss(risk_vec)

    d_logits = (probs - y) / n  # BCE term
    if config.beta != 0.0:
        dvar = sare_grad(risk_vec)
        risk_pos = 0
        for domain_id, start, stop in mega.slices:
            mask = mega.is_spoof[start:stop]
            if not mask.any():
                continue
            idx = np.flatnonzero(mask) + start
            d_logits[idx] += config.beta * dvar[risk_pos] * (probs[idx] - 1.0) / idx.size
            risk_pos += 1

    d_emb = np.outer(d_logits, model.w2)
    con = 0.0
    if config.alpha != 0.0:
        z, norms = _normalize_rows(emb)
        try:
            con, d_z = supcon_loss_and_grad(z, ~mega.is_spoof, config.tau)
        except UndefinedLossError:
            con, d_z = 0.0, None
        if d_z is not None:
            # back through row normalization: (I - z z^T)/|e| applied rowwise
            proj = (d_z * z).sum(axis=1, keepdims=True)
            d_emb += config.alpha * (d_z - z * proj) / norms

    d_pre = d_emb * (1.0 - emb**2)
    grads = {
        "w1": d_pre.T @ x,
        "b1": d_pre.sum(axis=0),
        "w2": emb.T @ d_logits,
        "b2": float(d_logits.sum()),
    }
    report = total_loss(bce, con, sare, config.alpha, config.beta)
    return report, risk_vec, grads


def make_toy_scenario(seed: int = 0, per_domain: int = 40):
    """Two source domains with very different spoof difficulty.

    Domain 1 spoofs sit far from the real cluster (easy); domain 2
    spoofs overlap it (hard). The augmentor shifts features to mint the
    synthetic twin domains.
    """
    rng = derive_rng(seed, "toy-scenario")
    real_centers = {1: np.array([0.0, 0.0]), 2: np.array([0.3, -0.2])}
    spoof_centers = {1: np.array([2.4, 1.2]), 2: np.array([0.9, -0.9])}
    spread = {1: 0.30, 2: 0.45}
    batches = []
    for domain_id in (1, 2):
        reals = rng.normal(real_centers[domain_id], 0.3, size=(per_domain, 2))
        spoofs = rng.normal(spoof_centers[domain_id], spread[domain_id], size=(per_domain, 2))
        feats = np.vstack([reals, spoofs])
        flags = np.concatenate([np.zeros(per_domain, bool), np.ones(per_domain, bool)])
        batches.append((feats, flags, domain_id))
    return batches


def toy_augmentor(features, is_spoof, domain_id):
    """Deterministic feature shift standing in for a sub-policy twin."""
    shift = np.array([0.35, -0.25]) if domain_id % 2 else np.array([-0.3, 0.3])
    return features + shift, is_spoof.copy(), domain_id + 100


def train_toy(config: TrainConfig, scenario=None):
    """Full-batch gradient descent; returns the per-epoch trace and model."""
    scenario = make_toy_scenario(config.seed) if scenario is None else scenario
    mega = build_megabatch(scenario, toy_augmentor, batch_budget=config.batch_budget)
    model = ToyModel.init(derive_rng(config.seed, "init"), mega.features.shape[1], config.hidden)
    trace = []
    for epoch in range(config.epochs):
        try:
            report, risk_vec, grads = toy_loss_and_grads(model, mega, config)
        except NumericError as exc:
            raise NumericError(f"training diverged at epoch {epoch}: {exc}") from exc
        if not np.isfinite(report.total):
            raise NumericError(f"training diverged at epoch {epoch}")
        trace.append(
            {
                "epoch": epoch,
                "bce": report.bce,
                "con": report.con,
                "sare": report.sare,
                "total": report.total,
                "risks": risk_vec.risks.tolist(),
            }
        )
        model.w1 -= config.lr * grads["w1"]
        model.b1 -= config.lr * grads["b1"]
        model.w2 -= config.lr * grads["w2"]
        model.b2 -= config.lr * grads["b2"]
    return trace, model


def write_trace(trace, path) -> None:
    """Line-delimited JSON records {epoch, bce, con, sare, total, risks[]}."""
    with open(path, "w") as fh:
        for record in trace:
            fh.write(json.dumps(record) + "\n")
