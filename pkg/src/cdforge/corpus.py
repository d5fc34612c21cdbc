"""Synthetic corpus generation: prefix seeds -> records with full provenance.

Seeds come from a dedicated split, disjoint from train and eval. Each
(seed, completion index) unit is generated from its own named random
stream, so output bytes are identical for any worker count, and any single
record can be regenerated from the manifest alone.
"""

from __future__ import annotations

import hashlib
import json
import logging
import multiprocessing as mp
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from cdforge.decoding import DecodingStrategy, generate
from cdforge.errors import ConfigurationError
from cdforge.rng import RandomStream

log = logging.getLogger(__name__)

DEFAULT_PREFIX_LEN = 20
DEFAULT_COMPLETIONS_PER_SEED = 8
DEFAULT_MAX_NEW = 400


@dataclass(frozen=True)
class Document:
    """One paragraph of a labeled corpus."""

    domain: str
    text: str


def write_documents(docs: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps({"domain": doc.domain, "text": doc.text},
                                ensure_ascii=False) + "\n")


def read_documents(path: str | Path) -> list[Document]:
    docs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                docs.append(Document(domain=rec["domain"], text=rec["text"]))
    return docs


@dataclass(frozen=True)
class Seed:
    seed_id: str
    domain: str
    prefix_tokens: tuple[int, ...]


@dataclass(frozen=True)
class SeedSet:
    seeds: tuple[Seed, ...]
    prefix_len: int

    def digest(self) -> str:
        payload = json.dumps(
            [[s.seed_id, s.domain, list(s.prefix_tokens)] for s in self.seeds]
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def extract_seeds(seed_docs: Sequence[Document], tokenizer, prefix_len: int = DEFAULT_PREFIX_LEN,
                  per_domain_quota: int = 50,
                  forbidden_texts: Sequence[str] = ()) -> SeedSet:
    """Take up to `per_domain_quota` prefix seeds per source domain.

    Paragraphs shorter than `prefix_len` tokens are skipped. A prefix whose
    decoded text occurs verbatim in `forbidden_texts` (train/eval splits)
    is dropped so the disjointness invariant holds by construction.
    """
    if not seed_docs:
        raise ConfigurationError("seeds split is empty")
    domains: dict[str, int] = {}
    seeds: list[Seed] = []
    for doc in seed_docs:
        taken = domains.get(doc.domain, 0)
        if taken >= per_domain_quota:
            continue
        tokens = tokenizer.encode(doc.text)
        if len(tokens) < prefix_len:
            log.info("skipping %s paragraph with %d < %d tokens", doc.domain,
                     len(tokens), prefix_len)
            continue
        prefix = tuple(tokens[:prefix_len])
        prefix_text = tokenizer.decode(prefix)
        if any(prefix_text in blob for blob in forbidden_texts):
            log.warning("dropping seed whose prefix appears in a training split")
            continue
        seeds.append(Seed(seed_id=f"{doc.domain}:{taken:05d}", domain=doc.domain,
                          prefix_tokens=prefix))
        domains[doc.domain] = taken + 1
    if not seeds:
        raise ConfigurationError("no usable seeds: every paragraph was too short")
    return SeedSet(seeds=tuple(seeds), prefix_len=prefix_len)


@dataclass
class CorpusManifest:
    """Provenance record that reproducibly identifies a generated corpus."""

    strategy: dict
    good_id: str
    bad_id: str | None
    seed_digest: str
    prefix_len: int
    completions_per_seed: int
    max_new: int
    token_budget: int
    master_seed: int
    produced_tokens: int
    budget_met: bool
    record_count: int
    corpus_digest: str
    count_prefix_tokens: bool = False
    format_version: int = 1

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, payload: str) -> "CorpusManifest":
        return cls(**json.loads(payload))


_WORKER_STATE: dict = {}


def _unit_stream(master_seed: int, seed_id: str, completion_idx: int) -> RandomStream:
    return RandomStream(master_seed, "generate", seed_id, completion_idx)


def generate_unit(strategy: DecodingStrategy, good, bad, seed: Seed,
                  completion_idx: int, max_new: int, master_seed: int,
                  tokenizer) -> dict:
    """Generate one completion record; a pure function of its arguments."""
    stream = _unit_stream(master_seed, seed.seed_id, completion_idx)
    tokens = generate(strategy, good, bad, seed.prefix_tokens, max_new, stream,
                      eos_id=tokenizer.eos_id)
    new_tokens = len(tokens) - len(seed.prefix_tokens)
    return {
        "id": f"{seed.seed_id}#{completion_idx}",
        "seed_id": seed.seed_id,
        "completion_idx": completion_idx,
        "source_domain": seed.domain,
        "prefix_text": tokenizer.decode(seed.prefix_tokens),
        "text": tokenizer.decode(tokens),
        "new_tokens": new_tokens,
    }


def _worker_init(strategy, good, bad, max_new, master_seed, tokenizer):
    _WORKER_STATE.update(strategy=strategy, good=good, bad=bad, max_new=max_new,
                         master_seed=master_seed, tokenizer=tokenizer)


def _worker_run(args):
    seed, completion_idx = args
    s = _WORKER_STATE
    return generate_unit(s["strategy"], s["good"], s["bad"], seed, completion_idx,
                         s["max_new"], s["master_seed"], s["tokenizer"])


def generate_corpus(strategy: DecodingStrategy, good, bad, seed_set: SeedSet,
                    tokenizer, completions_per_seed: int = DEFAULT_COMPLETIONS_PER_SEED,
                    max_new: int = DEFAULT_MAX_NEW, token_budget: int = 10_000,
                    master_seed: int = 0, workers: int = 1,
                    count_prefix_tokens: bool = False) -> tuple[list[dict], CorpusManifest]:
    """Round-robin over (completion index, seed) until the budget is met.

    The budget counts generated (non-prefix) tokens unless
    `count_prefix_tokens` is set. Records are returned sorted by
    (seed id, completion index) regardless of generation order.
    """
    if completions_per_seed < 1:
        raise ConfigurationError("completions_per_seed must be >= 1")
    units = [
        (seed, c)
        for c in range(completions_per_seed)
        for seed in seed_set.seeds
    ]

    records: list[dict] = []
    produced = 0
    budget_met = False

    def consume(record: dict) -> bool:
        nonlocal produced, budget_met
        records.append(record)
        produced += record["new_tokens"]
        if count_prefix_tokens:
            produced += seed_set.prefix_len
        if produced >= token_budget:
            budget_met = True
            return True
        return False

    if workers <= 1:
        for seed, c in units:
            record = generate_unit(strategy, good, bad, seed, c, max_new,
                                   master_seed, tokenizer)
            if consume(record):
                break
    else:
        ctx = mp.get_context("fork")
        with ctx.Pool(workers, initializer=_worker_init,
                      initargs=(strategy, good, bad, max_new, master_seed, tokenizer)) as pool:
            for record in pool.imap(_worker_run, units, chunksize=1):
                if consume(record):
                    break

    if not budget_met:
        log.warning("seed set exhausted at %d/%d tokens", produced, token_budget)

    records.sort(key=lambda r: (r["seed_id"], r["completion_idx"]))
    corpus_digest = hashlib.sha256(serialize_records(records).encode("utf-8")).hexdigest()
    manifest = CorpusManifest(
        strategy=strategy.to_record(),
        good_id=getattr(good, "ref", "good"),
        bad_id=getattr(bad, "ref", None) if bad is not None else None,
        seed_digest=seed_set.digest(),
        prefix_len=seed_set.prefix_len,
        completions_per_seed=completions_per_seed,
        max_new=max_new,
        token_budget=token_budget,
        master_seed=master_seed,
        produced_tokens=produced,
        budget_met=budget_met,
        record_count=len(records),
        corpus_digest=corpus_digest,
        count_prefix_tokens=count_prefix_tokens,
    )
    return records, manifest


def regenerate_record(strategy: DecodingStrategy, good, bad, seed_set: SeedSet,
                      tokenizer, seed_id: str, completion_idx: int, max_new: int,
                      master_seed: int) -> dict:
    """Reproduce a single (seed, completion) record from manifest parameters."""
    for seed in seed_set.seeds:
        if seed.seed_id == seed_id:
            return generate_unit(strategy, good, bad, seed, completion_idx,
                                 max_new, master_seed, tokenizer)
    raise ConfigurationError(f"seed {seed_id!r} not present in the seed set")


def serialize_records(records: Sequence[dict]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in records)


def write_corpus(records: Sequence[dict], manifest: CorpusManifest,
                 path: str | Path) -> None:
    path = Path(path)
    path.write_text(serialize_records(records), encoding="utf-8")
    Path(str(path) + ".manifest.json").write_text(manifest.to_json() + "\n",
                                                  encoding="utf-8")


def read_corpus(path: str | Path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records


def seed_prefix_violations(seed_set: SeedSet, tokenizer,
                           split_texts: Sequence[str]) -> list[str]:
    """Seed ids whose decoded prefix occurs verbatim in any split text."""
    bad = []
    for seed in seed_set.seeds:
        prefix_text = tokenizer.decode(seed.prefix_tokens)
        if any(prefix_text in blob for blob in split_texts):
            bad.append(seed.seed_id)
    return bad
