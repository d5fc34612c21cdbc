"""Experiment orchestration from a single declarative config.

Stage graph: corpus -> tokenizer -> baseline training -> good-model
selection -> amateur derivation -> per-strategy generation -> mixture
training -> evaluation -> report. Every stage writes a manifest with a
digest of its inputs; reruns with an unchanged config skip completed
stages and reproduce identical bytes.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from cdforge import corpus as corpuslib
from cdforge import deskdata, mixing, report, tasks
from cdforge.decoding import DecodingStrategy
from cdforge.errors import ConfigurationError, PipelineStageError
from cdforge.evalstat import OutcomeMatrix, run_protocol, select_good_model
from cdforge.lm import CheckpointRegistry, perplexity
from cdforge.ngram import AmateurSpec, derive_amateur, train_ngram
from cdforge.rng import RandomStream, derive_seed
from cdforge.tokenizer import TokenizerModel, train_tokenizer

log = logging.getLogger(__name__)

ROOT_ENV_VAR = "FORGE_EXPERIMENT_ROOT"


def seed_plan(master_seed: int, n_runs: int) -> list[int]:
    """Deterministic, collision-free per-run seeds."""
    if n_runs < 1:
        raise ConfigurationError("n_runs must be >= 1")
    seeds = [derive_seed(master_seed, "run", i) for i in range(n_runs)]
    if len(set(seeds)) != n_runs:
        raise ConfigurationError("per-run seed derivation collided; change master_seed")
    return seeds


@dataclass(frozen=True)
class StrategyPlan:
    strategy: DecodingStrategy
    amateur: str | None = None  # label of the amateur spec supplying the bad model

    @property
    def label(self) -> str:
        if self.amateur is not None:
            return f"{self.strategy.label}[{self.amateur}]"
        return self.strategy.label


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int = 7
    n_runs: int = 3
    corpus_source: str = "bundled"  # bundled | path
    corpus_path: str | None = None
    corpus_words: int = 1_200_000
    split_fractions: tuple[tuple[str, float], ...] = (
        ("train", 0.905), ("eval", 0.089), ("seeds", 0.006),
    )
    vocab_size: int = 8000
    order: int = 4
    add_k: float = 0.01
    max_order: int = 8
    batch_sequences: int = 32
    seq_len: int = 128
    steps: int = 256
    snapshot_every: int = 100_000
    snapshot_format: str = "binary"
    amateurs: tuple[AmateurSpec, ...] = (AmateurSpec(kind="earlier_checkpoint", step=1),)
    strategies: tuple[StrategyPlan, ...] = (
        StrategyPlan(DecodingStrategy(kind="no_contrast")),
        StrategyPlan(DecodingStrategy(kind="cd"), amateur="early-1"),
    )
    prefix_len: int = 20
    completions_per_seed: int = 8
    max_new: int = 400
    token_budget: int = 1_000_000
    per_domain_quota: int = 50
    workers: int = 1
    ratios: tuple[float, ...] = (0.3,)
    bootstrap_samples: int = 1000
    eval_window: int = 128
    minimal_pairs: str | None = "bundled"  # bundled | path | None
    n_pairs: int = 300
    se_mode: str = "se"

    def __post_init__(self):
        total = sum(f for _, f in self.split_fractions)
        if abs(total - 1.0) > 1e-9:
            raise ConfigurationError(f"split fractions sum to {total}, expected 1")
        names = [n for n, _ in self.split_fractions]
        if names != ["train", "eval", "seeds"]:
            raise ConfigurationError("splits must be train, eval, seeds")
        labels = {spec.label for spec in self.amateurs}
        for plan in self.strategies:
            if plan.strategy.requires_bad:
                if plan.amateur not in labels:
                    raise ConfigurationError(
                        f"strategy {plan.strategy.kind} names amateur "
                        f"{plan.amateur!r} which is not configured"
                    )
            elif plan.amateur is not None:
                raise ConfigurationError(
                    f"strategy {plan.strategy.kind} must not name an amateur"
                )
        for q in self.ratios:
            if not (0.0 <= q < 1.0):
                raise ConfigurationError(f"mixture ratio {q} outside [0, 1)")

    # -- (de)serialization ---------------------------------------------------

    def to_mapping(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "n_runs": self.n_runs,
            "corpus": {
                "source": self.corpus_source,
                "path": self.corpus_path,
                "words": self.corpus_words,
            },
            "splits": {name: frac for name, frac in self.split_fractions},
            "tokenizer": {"vocab_size": self.vocab_size},
            "backend": {
                "order": self.order,
                "add_k": self.add_k,
                "max_order": self.max_order,
            },
            "training": {
                "batch_sequences": self.batch_sequences,
                "seq_len": self.seq_len,
                "steps": self.steps,
                "snapshot_every": self.snapshot_every,
                "snapshot_format": self.snapshot_format,
            },
            "amateurs": [
                {k: v for k, v in
                 (("kind", a.kind), ("step", a.step), ("factor", a.factor), ("rate", a.rate))
                 if v is not None}
                for a in self.amateurs
            ],
            "strategies": [
                dict(plan.strategy.to_record(), amateur=plan.amateur)
                for plan in self.strategies
            ],
            "generation": {
                "prefix_len": self.prefix_len,
                "completions_per_seed": self.completions_per_seed,
                "max_new": self.max_new,
                "token_budget": self.token_budget,
                "per_domain_quota": self.per_domain_quota,
                "workers": self.workers,
            },
            "mixture": {"ratios": list(self.ratios)},
            "evaluation": {
                "bootstrap_samples": self.bootstrap_samples,
                "eval_window": self.eval_window,
                "minimal_pairs": self.minimal_pairs,
                "n_pairs": self.n_pairs,
                "se_mode": self.se_mode,
            },
        }

    @classmethod
    def from_mapping(cls, m: dict) -> "ExperimentConfig":
        defaults = cls()
        corpus_cfg = m.get("corpus", {})
        splits = m.get("splits", dict(defaults.split_fractions))
        tok = m.get("tokenizer", {})
        backend = m.get("backend", {})
        training = m.get("training", {})
        generation = m.get("generation", {})
        mixture = m.get("mixture", {})
        evaluation = m.get("evaluation", {})
        amateurs = tuple(
            AmateurSpec(kind=a["kind"], step=a.get("step"), factor=a.get("factor"),
                        rate=a.get("rate"))
            for a in m.get("amateurs", [])
        ) or defaults.amateurs
        plans = []
        for rec in m.get("strategies", []):
            rec = dict(rec)
            amateur = rec.pop("amateur", None)
            plans.append(StrategyPlan(DecodingStrategy.from_record(rec), amateur=amateur))
        strategies = tuple(plans) or defaults.strategies
        return cls(
            master_seed=m.get("master_seed", defaults.master_seed),
            n_runs=m.get("n_runs", defaults.n_runs),
            corpus_source=corpus_cfg.get("source", defaults.corpus_source),
            corpus_path=corpus_cfg.get("path", defaults.corpus_path),
            corpus_words=corpus_cfg.get("words", defaults.corpus_words),
            split_fractions=tuple((k, float(splits[k])) for k in ("train", "eval", "seeds")),
            vocab_size=tok.get("vocab_size", defaults.vocab_size),
            order=backend.get("order", defaults.order),
            add_k=backend.get("add_k", defaults.add_k),
            max_order=backend.get("max_order", defaults.max_order),
            batch_sequences=training.get("batch_sequences", defaults.batch_sequences),
            seq_len=training.get("seq_len", defaults.seq_len),
            steps=training.get("steps", defaults.steps),
            snapshot_every=training.get("snapshot_every", defaults.snapshot_every),
            snapshot_format=training.get("snapshot_format", defaults.snapshot_format),
            amateurs=amateurs,
            strategies=strategies,
            prefix_len=generation.get("prefix_len", defaults.prefix_len),
            completions_per_seed=generation.get("completions_per_seed",
                                                defaults.completions_per_seed),
            max_new=generation.get("max_new", defaults.max_new),
            token_budget=generation.get("token_budget", defaults.token_budget),
            per_domain_quota=generation.get("per_domain_quota", defaults.per_domain_quota),
            workers=generation.get("workers", defaults.workers),
            ratios=tuple(mixture.get("ratios", defaults.ratios)),
            bootstrap_samples=evaluation.get("bootstrap_samples", defaults.bootstrap_samples),
            eval_window=evaluation.get("eval_window", defaults.eval_window),
            minimal_pairs=evaluation.get("minimal_pairs", defaults.minimal_pairs),
            n_pairs=evaluation.get("n_pairs", defaults.n_pairs),
            se_mode=evaluation.get("se_mode", defaults.se_mode),
        )

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_mapping(yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {})

    def digest(self) -> str:
        payload = json.dumps(self.to_mapping(), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _method_name(plan: StrategyPlan, ratio: float) -> str:
    return f"{plan.label}-mr{ratio:g}"


@dataclass
class PipelineResult:
    root: Path
    statuses: dict[str, str] = field(default_factory=dict)
    report_text: Path | None = None
    report_csv: Path | None = None
    report_json: Path | None = None
    audit: dict = field(default_factory=dict)


class Pipeline:
    def __init__(self, config: ExperimentConfig, root: str | Path):
        self.config = config
        self.root = Path(root)
        self.manifest_dir = self.root / "manifests"
        self.corpus_dir = self.root / "corpus"
        self.corpora_dir = self.root / "corpora"
        self.report_dir = self.root / "report"
        for d in (self.manifest_dir, self.corpus_dir, self.corpora_dir, self.report_dir):
            d.mkdir(parents=True, exist_ok=True)
        self.registry = CheckpointRegistry(self.root / "models")
        self.statuses: dict[str, str] = {}
        self._chain = config.digest()
        self._tokenizer_cache: TokenizerModel | None = None

    # -- stage machinery ----------------------------------------------------

    def _stage(self, name: str, outputs: list[Path], fn, verify=None) -> None:
        self._chain = hashlib.sha256((self._chain + ":" + name).encode()).hexdigest()
        manifest_path = self.manifest_dir / f"{name.replace(':', '_')}.json"
        if manifest_path.exists():
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            if (manifest.get("digest") == self._chain
                    and all(Path(p).exists() for p in manifest.get("outputs", []))
                    and (verify is None or verify())):
                self.statuses[name] = "skipped"
                log.info("stage %s up to date; skipping", name)
                return
        log.info("stage %s running", name)
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - halting with stage context
            completed = [s for s, st in self.statuses.items() if st in ("run", "skipped")]
            raise PipelineStageError(name, completed, exc) from exc
        manifest = {
            "stage": name,
            "digest": self._chain,
            "outputs": [str(p) for p in outputs],
        }
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                 encoding="utf-8")
        self.statuses[name] = "run"

    # -- paths ---------------------------------------------------------------

    @property
    def split_paths(self) -> dict[str, Path]:
        return {name: self.corpus_dir / f"{name}.jsonl" for name in ("train", "eval", "seeds")}

    @property
    def pairs_path(self) -> Path:
        return self.corpus_dir / "pairs.jsonl"

    @property
    def tokenizer_path(self) -> Path:
        return self.root / "tokenizer.txt"

    def corpus_path_for(self, plan: StrategyPlan) -> Path:
        return self.corpora_dir / f"{plan.label}.jsonl"

    # -- stages ----------------------------------------------------------------

    def run(self) -> PipelineResult:
        cfg = self.config
        self._stage("corpus", list(self.split_paths.values()), self._stage_corpus)
        self._stage("tokenizer", [self.tokenizer_path], self._stage_tokenizer)
        self._stage("baseline", [], self._stage_baseline, verify=self._baseline_complete)
        self._stage("select-good", [self.root / "good.json"], self._stage_select_good)
        self._stage("derive-bad", [self.root / "amateurs.json"], self._stage_amateurs,
                    verify=self._amateurs_complete)
        for plan in cfg.strategies:
            out = self.corpus_path_for(plan)
            self._stage(f"generate:{plan.label}", [out, Path(str(out) + ".manifest.json")],
                        lambda plan=plan: self._stage_generate(plan))
        # A ratio of zero reduces to the baseline stream; training it again
        # would only duplicate the baseline row.
        for plan, ratio in itertools.product(cfg.strategies, cfg.ratios):
            if ratio == 0.0:
                continue
            name = f"mix-train:{_method_name(plan, ratio)}"
            self._stage(name, [], lambda plan=plan, ratio=ratio: self._stage_mixtrain(plan, ratio),
                        verify=lambda plan=plan, ratio=ratio: self._mixtrain_complete(plan, ratio))
        self._stage("eval", [self.report_dir / "outcomes.csv", self.report_dir / "audit.json"],
                    self._stage_eval)
        self._stage("report", [self.report_dir / "report.txt", self.report_dir / "report.csv",
                               self.report_dir / "report.json"], self._stage_report)
        audit = json.loads((self.report_dir / "audit.json").read_text(encoding="utf-8"))
        return PipelineResult(
            root=self.root,
            statuses=dict(self.statuses),
            report_text=self.report_dir / "report.txt",
            report_csv=self.report_dir / "report.csv",
            report_json=self.report_dir / "report.json",
            audit=audit,
        )

    def _stage_corpus(self) -> None:
        cfg = self.config
        if cfg.corpus_source == "bundled":
            docs = deskdata.build_corpus(cfg.corpus_words, cfg.master_seed)
        elif cfg.corpus_source == "path":
            if not cfg.corpus_path:
                raise ConfigurationError("corpus.source=path requires corpus.path")
            docs = corpuslib.read_documents(cfg.corpus_path)
        else:
            raise ConfigurationError(f"unknown corpus source {cfg.corpus_source!r}")

        by_domain: dict[str, list[corpuslib.Document]] = {}
        for doc in docs:
            by_domain.setdefault(doc.domain, []).append(doc)
        splits: dict[str, list[corpuslib.Document]] = {"train": [], "eval": [], "seeds": []}
        fractions = dict(cfg.split_fractions)
        for domain in sorted(by_domain):
            pool = by_domain[domain]
            perm = RandomStream(cfg.master_seed, "split", domain).permutation(len(pool))
            shuffled = [pool[i] for i in perm]
            n = len(shuffled)
            n_train = int(n * fractions["train"])
            n_eval = int(n * fractions["eval"])
            splits["train"] += shuffled[:n_train]
            splits["eval"] += shuffled[n_train : n_train + n_eval]
            splits["seeds"] += shuffled[n_train + n_eval :]
        for name, path in self.split_paths.items():
            corpuslib.write_documents(splits[name], path)
        if cfg.minimal_pairs == "bundled":
            tasks.write_pairs(deskdata.build_minimal_pairs(cfg.n_pairs, cfg.master_seed),
                              self.pairs_path)

    def _stage_tokenizer(self) -> None:
        train_docs = corpuslib.read_documents(self.split_paths["train"])
        model = train_tokenizer((d.text for d in train_docs), self.config.vocab_size)
        model.save(self.tokenizer_path)

    def _tokenizer(self) -> TokenizerModel:
        if self._tokenizer_cache is None:
            self._tokenizer_cache = TokenizerModel.load(self.tokenizer_path)
        return self._tokenizer_cache

    def _expected_steps(self) -> int:
        cfg = self.config
        total_tokens = cfg.steps * cfg.batch_sequences * cfg.seq_len
        full = total_tokens // cfg.snapshot_every
        return full + (1 if total_tokens % cfg.snapshot_every else 0)

    def _baseline_family(self, run: int) -> str:
        return f"baseline-s{run}"

    def _baseline_complete(self) -> bool:
        return all(
            self.registry.has(self._baseline_family(i), self._expected_steps())
            for i in range(self.config.n_runs)
        )

    def _train_family(self, family: str, run_seed: int, synth_texts, ratio: float) -> None:
        cfg = self.config
        tok = self._tokenizer()
        train_docs = corpuslib.read_documents(self.split_paths["train"])
        config = mixing.MixtureConfig(
            synth_ratio=ratio,
            batch_sequences=cfg.batch_sequences,
            seq_len=cfg.seq_len,
            reshuffle_seed=run_seed,
        )
        stream = mixing.build_stream([d.text for d in train_docs], synth_texts, tok, config)

        def sequences():
            for _ in range(cfg.steps):
                for row in next(stream):
                    yield row

        train_ngram(
            sequences(),
            order=cfg.order,
            vocab_size=tok.vocab_size,
            snapshot_every=cfg.snapshot_every,
            add_k=cfg.add_k,
            max_order=cfg.max_order,
            family=family,
            registry=self.registry,
            meta={"ratio": ratio, "run_seed": run_seed},
            fmt=cfg.snapshot_format,
        )

    def _stage_baseline(self) -> None:
        for run, run_seed in enumerate(seed_plan(self.config.master_seed, self.config.n_runs)):
            self._train_family(self._baseline_family(run), run_seed, None, 0.0)

    def _eval_tokens(self) -> np.ndarray:
        tok = self._tokenizer()
        eval_docs = corpuslib.read_documents(self.split_paths["eval"])
        parts = []
        for doc in eval_docs:
            parts.extend(tok.encode(doc.text))
            parts.append(tok.eos_id)
        return np.asarray(parts, dtype=np.int64)

    def _task_adapters(self) -> list[tasks.TaskAdapter]:
        cfg = self.config
        adapters = [tasks.perplexity_task(self._eval_tokens(), window=cfg.eval_window)]
        if cfg.minimal_pairs == "bundled":
            adapters.append(tasks.minimal_pair_task(tasks.read_pairs(self.pairs_path),
                                                    self._tokenizer()))
        elif cfg.minimal_pairs:
            adapters.append(tasks.minimal_pair_task(tasks.read_pairs(cfg.minimal_pairs),
                                                    self._tokenizer()))
        return adapters

    def _stage_select_good(self) -> None:
        cfg = self.config
        adapters = self._task_adapters()
        ppl_adapter = adapters[0]
        candidates = []
        for run in range(cfg.n_runs):
            family = self._baseline_family(run)
            best_step, best_ppl = None, None
            for step in self.registry.steps(family):
                model = self.registry.load(family, step)
                value = ppl_adapter.info.aggregate(ppl_adapter.scorer(model))
                if best_ppl is None or value < best_ppl:
                    best_step, best_ppl = step, value
            candidates.append((run, self.registry.load(family, best_step)))
        task_scores = {
            a.name: [a.info.aggregate(a.scorer(model)) for _, model in candidates]
            for a in adapters
        }
        directions = {a.name: a.info.direction for a in adapters}
        _, good = select_good_model(candidates, task_scores, directions)
        payload = {"family": good.family, "step": good.step}
        (self.root / "good.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                                             encoding="utf-8")

    def _good_model(self):
        payload = json.loads((self.root / "good.json").read_text(encoding="utf-8"))
        return self.registry.load(payload["family"], payload["step"])

    def _amateur_family(self, spec: AmateurSpec, good) -> tuple[str, int]:
        if spec.kind == "earlier_checkpoint":
            return good.family, spec.step
        if spec.kind == "smaller":
            return f"{good.family}-small{spec.factor}", good.step
        return f"{good.family}-noisy{spec.rate:g}", good.step

    def _amateurs_complete(self) -> bool:
        path = self.root / "amateurs.json"
        if not path.exists():
            return False
        recorded = json.loads(path.read_text(encoding="utf-8"))
        return all(
            self.registry.has(entry["family"], entry["step"])
            for entry in recorded.values()
        )

    def _stage_amateurs(self) -> None:
        cfg = self.config
        good = self._good_model()
        recorded = {}
        for spec in cfg.amateurs:
            rng_seed = derive_seed(cfg.master_seed, "amateur", spec.label)
            model = derive_amateur(good, spec, rng_seed, registry=self.registry,
                                   fmt=cfg.snapshot_format)
            recorded[spec.label] = {"family": model.family, "step": model.step}
        (self.root / "amateurs.json").write_text(
            json.dumps(recorded, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def _amateur_model(self, label: str):
        recorded = json.loads((self.root / "amateurs.json").read_text(encoding="utf-8"))
        entry = recorded[label]
        return self.registry.load(entry["family"], entry["step"])

    def _stage_generate(self, plan: StrategyPlan) -> None:
        cfg = self.config
        tok = self._tokenizer()
        seed_docs = corpuslib.read_documents(self.split_paths["seeds"])
        forbidden = [
            "\n".join(d.text for d in corpuslib.read_documents(self.split_paths[name]))
            for name in ("train", "eval")
        ]
        seed_set = corpuslib.extract_seeds(seed_docs, tok, prefix_len=cfg.prefix_len,
                                           per_domain_quota=cfg.per_domain_quota,
                                           forbidden_texts=forbidden)
        good = self._good_model()
        bad = self._amateur_model(plan.amateur) if plan.amateur else None
        records, manifest = corpuslib.generate_corpus(
            plan.strategy, good, bad, seed_set, tok,
            completions_per_seed=cfg.completions_per_seed,
            max_new=cfg.max_new,
            token_budget=cfg.token_budget,
            master_seed=cfg.master_seed,
            workers=cfg.workers,
        )
        corpuslib.write_corpus(records, manifest, self.corpus_path_for(plan))

    def _mix_family(self, plan: StrategyPlan, ratio: float, run: int) -> str:
        return f"mix-{plan.label}-r{ratio:g}-s{run}"

    def _mixtrain_complete(self, plan: StrategyPlan, ratio: float) -> bool:
        return all(
            self.registry.has(self._mix_family(plan, ratio, run), self._expected_steps())
            for run in range(self.config.n_runs)
        )

    def _stage_mixtrain(self, plan: StrategyPlan, ratio: float) -> None:
        cfg = self.config
        records = corpuslib.read_corpus(self.corpus_path_for(plan))
        synth_texts = [r["text"] for r in records]
        for run, run_seed in enumerate(seed_plan(cfg.master_seed, cfg.n_runs)):
            self._train_family(self._mix_family(plan, ratio, run), run_seed,
                               synth_texts, ratio)

    def _method_families(self) -> dict[str, list[str]]:
        cfg = self.config
        families = {"baseline": [self._baseline_family(i) for i in range(cfg.n_runs)]}
        for plan, ratio in itertools.product(cfg.strategies, cfg.ratios):
            if ratio == 0.0:
                continue
            families[_method_name(plan, ratio)] = [
                self._mix_family(plan, ratio, run) for run in range(cfg.n_runs)
            ]
        return families

    def _stage_eval(self) -> None:
        cfg = self.config
        adapters = self._task_adapters()
        matrix = OutcomeMatrix()
        for adapter in adapters:
            matrix.add_task(adapter.info)
        for method, families in self._method_families().items():
            for run, family in enumerate(families):
                for step in self.registry.steps(family):
                    model = self.registry.load(family, step)
                    for adapter in adapters:
                        matrix.add(method, adapter.name, run, step, adapter.scorer(model))
        matrix.write(self.report_dir / "outcomes.csv")

        eval_tokens = self._eval_tokens()
        good = self._good_model()
        audit = {"good": {"ref": good.ref, "perplexity": perplexity(good, eval_tokens)}}
        audit["amateurs"] = {}
        for spec in cfg.amateurs:
            model = self._amateur_model(spec.label)
            audit["amateurs"][spec.label] = {
                "ref": model.ref,
                "perplexity": perplexity(model, eval_tokens),
            }
        for label, entry in audit["amateurs"].items():
            if entry["perplexity"] <= audit["good"]["perplexity"]:
                log.warning("amateur %s is not worse than the good model", label)
        (self.report_dir / "audit.json").write_text(
            json.dumps(audit, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def _stage_report(self) -> None:
        cfg = self.config
        adapters = self._task_adapters()
        matrix = OutcomeMatrix.read(self.report_dir / "outcomes.csv",
                                    [a.info for a in adapters])
        summary = run_protocol(matrix, cfg.bootstrap_samples,
                               derive_seed(cfg.master_seed, "bootstrap"),
                               baseline="baseline", se_mode=cfg.se_mode)
        (self.report_dir / "report.txt").write_text(report.render_text(summary),
                                                    encoding="utf-8")
        (self.report_dir / "report.csv").write_text(report.render_csv(summary),
                                                    encoding="utf-8")
        payload = {
            "baseline": summary["baseline"],
            "methods": summary["methods"],
            "tasks": summary["tasks"],
            "mu_delta_rel": summary["mu_delta_rel"],
            "cells": {
                f"{m}{t}": {
                    "mean": cell.mean,
                    "se": cell.se,
                    "rel_delta_pct": cell.rel_delta_pct,
                    "significant": cell.significant,
                }
                for (m, t), cell in summary["cells"].items()
            },
        }
        (self.report_dir / "report.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def run_pipeline(config: ExperimentConfig, root: str | Path | None = None) -> PipelineResult:
    """Execute the full experiment graph under `root` (env override honored)."""
    if root is None:
        root = os.environ.get(ROOT_ENV_VAR, "forge-experiment")
    return Pipeline(config, root).run()
