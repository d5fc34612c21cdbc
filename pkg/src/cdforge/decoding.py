"""Plausibility masking, contrastive scoring, truncation, seeded sampling.

The seven generation strategies differ only in how candidate tokens are
scored before the categorical draw:

  no_contrast        ancestral sampling from the good model
  no_contrast_vhead  ancestral sampling restricted to the plausibility mask
  no_contrast_topk   ancestral sampling restricted to the k best tokens
  no_contrast_topp   ancestral sampling restricted to the p-mass nucleus
  cd                 contrast scores (ln p_good - lambda ln p_bad) inside the mask
  cd_topk            contrast scores, then top-k on those scores
  cd_topp            contrast scores, then top-p on those scores

Truncation for the cd variants applies to the contrast scores after the
mask (load-bearing ordering). Ties anywhere resolve to the lowest token id
so replay is exact.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from cdforge.errors import ConfigurationError, ContractError
from cdforge.rng import RandomStream

log = logging.getLogger(__name__)

NO_CONTRAST_KINDS = ("no_contrast", "no_contrast_vhead", "no_contrast_topk", "no_contrast_topp")
CD_KINDS = ("cd", "cd_topk", "cd_topp")
STRATEGY_KINDS = NO_CONTRAST_KINDS + CD_KINDS

# Defensive floor for ln p_bad; backends guarantee strict positivity so this
# should never trigger, but it keeps the contrast score finite under any
# future backend.
BAD_PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class DecodingStrategy:
    """Flat description of one strategy; serialized into every corpus manifest."""

    kind: str
    alpha: float = 0.1
    lam: float = 1.0
    top_k: int | None = None
    top_p: float | None = None
    ban_eos: bool = False

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ConfigurationError(f"unknown strategy kind {self.kind!r}")
        if not (0.0 < self.alpha <= 1.0):
            raise ConfigurationError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.lam < 0.0:
            raise ConfigurationError(f"lambda must be >= 0, got {self.lam}")
        if self.kind.endswith("_topk"):
            if self.top_k is None or self.top_k < 1:
                raise ConfigurationError("top-k strategies require top_k >= 1")
        elif self.top_k is not None:
            raise ConfigurationError(f"{self.kind} does not accept top_k")
        if self.kind.endswith("_topp"):
            if self.top_p is None or not (0.0 < self.top_p <= 1.0):
                raise ConfigurationError("top-p strategies require top_p in (0, 1]")
        elif self.top_p is not None:
            raise ConfigurationError(f"{self.kind} does not accept top_p")

    @property
    def requires_bad(self) -> bool:
        return self.kind in CD_KINDS

    @property
    def label(self) -> str:
        suffix = ""
        if self.top_k is not None:
            suffix = f"{self.top_k}"
        elif self.top_p is not None:
            suffix = f"{self.top_p:g}"
        return self.kind + suffix

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "lambda": self.lam,
            "k": self.top_k,
            "p": self.top_p,
            "ban_eos": self.ban_eos,
        }

    @classmethod
    def from_record(cls, record: dict) -> "DecodingStrategy":
        return cls(
            kind=record["kind"],
            alpha=record.get("alpha", 0.1),
            lam=record.get("lambda", 1.0),
            top_k=record.get("k"),
            top_p=record.get("p"),
            ban_eos=record.get("ban_eos", False),
        )


@dataclass
class ScoredSupport:
    """Sampling support (ascending token ids) with finite logits in nats."""

    support: np.ndarray
    logits: np.ndarray

    def __len__(self) -> int:
        return len(self.support)


def plausibility_mask(dist: np.ndarray, alpha: float) -> np.ndarray:
    """Token ids whose probability reaches alpha times the maximum."""
    return np.flatnonzero(dist >= alpha * dist.max())


def ancestral_logits(dist: np.ndarray) -> ScoredSupport:
    return ScoredSupport(np.arange(len(dist), dtype=np.int64), np.log(dist))


def masked_logits(dist: np.ndarray, alpha: float) -> ScoredSupport:
    support = plausibility_mask(dist, alpha)
    return ScoredSupport(support, np.log(dist[support]))


def contrast_logits(dist_good: np.ndarray, dist_bad: np.ndarray,
                    alpha: float, lam: float) -> ScoredSupport:
    """ln p_good - lambda * ln p_bad over the plausibility mask of the good model."""
    if dist_good.shape != dist_bad.shape:
        raise ContractError(
            f"good/bad vocabularies disagree: {dist_good.shape} vs {dist_bad.shape}"
        )
    support = plausibility_mask(dist_good, alpha)
    bad = dist_bad[support]
    if np.any(bad < BAD_PROB_FLOOR):
        log.warning("bad-model probabilities clamped at %.0e floor", BAD_PROB_FLOOR)
        bad = np.maximum(bad, BAD_PROB_FLOOR)
    logits = np.log(dist_good[support]) - lam * np.log(bad)
    return ScoredSupport(support, logits)


def _by_descending_score(scored: ScoredSupport) -> np.ndarray:
    """Positions sorted by logit descending, ties by lower token id first."""
    return np.lexsort((scored.support, -scored.logits))


def truncate_top_k(scored: ScoredSupport, k: int) -> ScoredSupport:
    if k < 1:
        raise ValueError("top-k truncation requires k >= 1")
    if len(scored) <= k:
        return scored
    keep = np.sort(_by_descending_score(scored)[:k])
    return ScoredSupport(scored.support[keep], scored.logits[keep])


def truncate_top_p(scored: ScoredSupport, p: float) -> ScoredSupport:
    if not (0.0 < p <= 1.0):
        raise ValueError("top-p truncation requires p in (0, 1]")
    order = _by_descending_score(scored)
    shifted = scored.logits[order] - scored.logits.max()
    cum = np.cumsum(np.exp(shifted))
    cutoff = int(np.searchsorted(cum, p * cum[-1], side="left"))
    keep = np.sort(order[: cutoff + 1])
    return ScoredSupport(scored.support[keep], scored.logits[keep])


def _cumulative_weights(scored: ScoredSupport) -> np.ndarray:
    return np.cumsum(np.exp(scored.logits - scored.logits.max()))


def sample_next(scored: ScoredSupport, stream: RandomStream) -> int:
    """One categorical draw from softmax(logits) restricted to the support."""
    if len(scored) == 0:
        raise ContractError("cannot sample from an empty support")
    cum = _cumulative_weights(scored)
    i = int(np.searchsorted(cum, stream.uniform() * cum[-1], side="right"))
    return int(scored.support[min(i, len(cum) - 1)])


def sample_many(scored: ScoredSupport, n: int, stream: RandomStream) -> np.ndarray:
    """Vectorized draws; same inverse-CDF arithmetic as sample_next."""
    if len(scored) == 0:
        raise ContractError("cannot sample from an empty support")
    cum = _cumulative_weights(scored)
    idx = np.searchsorted(cum, stream.uniforms(n) * cum[-1], side="right")
    np.minimum(idx, len(cum) - 1, out=idx)
    return scored.support[idx]


def scored_for_step(strategy: DecodingStrategy, dist_good: np.ndarray,
                    dist_bad: np.ndarray | None, eos_id: int | None = None) -> ScoredSupport:
    """Score one decoding step: mask/contrast, optional EOS ban, truncation."""
    if strategy.kind == "no_contrast":
        scored = ancestral_logits(dist_good)
    elif strategy.kind == "no_contrast_vhead":
        scored = masked_logits(dist_good, strategy.alpha)
    elif strategy.kind in ("no_contrast_topk", "no_contrast_topp"):
        scored = ancestral_logits(dist_good)
    else:
        scored = contrast_logits(dist_good, dist_bad, strategy.alpha, strategy.lam)

    if strategy.ban_eos and eos_id is not None:
        keep = scored.support != eos_id
        if not keep.any():
            raise ContractError("ban_eos removed the entire sampling support")
        scored = ScoredSupport(scored.support[keep], scored.logits[keep])

    if strategy.kind.endswith("_topk"):
        scored = truncate_top_k(scored, strategy.top_k)
    elif strategy.kind.endswith("_topp"):
        scored = truncate_top_p(scored, strategy.top_p)
    return scored


def generate(strategy: DecodingStrategy, good, bad, prefix: Sequence[int],
             max_new: int, stream: RandomStream, eos_id: int | None = None) -> list[int]:
    """Ancestral generation: extend `prefix` by up to `max_new` tokens.

    Stops early when EOS is emitted (EOS is appended). Pure given
    (models, stream), so any (seed id, completion index) unit can be
    regenerated independently.
    """
    if len(prefix) == 0:
        raise ValueError("generation requires a non-empty prefix")
    if strategy.requires_bad and bad is None:
        raise ConfigurationError(f"strategy {strategy.kind} requires a bad model")
    if not strategy.requires_bad and bad is not None:
        raise ConfigurationError(f"strategy {strategy.kind} forbids a bad model")

    out = [int(t) for t in prefix]
    for _ in range(max_new):
        dist_good = good.next_dist(out)
        dist_bad = bad.next_dist(out) if strategy.requires_bad else None
        scored = scored_for_step(strategy, dist_good, dist_bad, eos_id=eos_id)
        token = sample_next(scored, stream)
        out.append(token)
        if eos_id is not None and token == eos_id:
            break
    return out
