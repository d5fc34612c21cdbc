"""`forge` command line: standalone stage commands plus the full pipeline.

Subcommands: tokenize, train, select-good, derive-bad, generate, mix-train,
eval, report, pipeline. Flags mirror the experiment-config keys; the
FORGE_EXPERIMENT_ROOT environment variable overrides the experiment root
directory for `pipeline`.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from cdforge import corpus as corpuslib
from cdforge import mixing, report, tasks
from cdforge.decoding import DecodingStrategy
from cdforge.errors import ForgeError
from cdforge.evalstat import OutcomeMatrix, run_protocol, select_good_model
from cdforge.lm import CheckpointRegistry, perplexity
from cdforge.ngram import AmateurSpec, derive_amateur, train_ngram
from cdforge.pipeline import ExperimentConfig, run_pipeline
from cdforge.rng import derive_seed
from cdforge.tokenizer import TokenizerModel, train_tokenizer

log = logging.getLogger("forge")


def _parse_ref(ref: str) -> tuple[str, int]:
    family, _, step = ref.rpartition("@")
    return family, int(step)


def _eval_tokens(tokenizer: TokenizerModel, docs_path: str) -> np.ndarray:
    parts: list[int] = []
    for doc in corpuslib.read_documents(docs_path):
        parts.extend(tokenizer.encode(doc.text))
        parts.append(tokenizer.eos_id)
    return np.asarray(parts, dtype=np.int64)


def _adapters(tokenizer: TokenizerModel, eval_path: str, pairs_path: str | None,
              window: int) -> list[tasks.TaskAdapter]:
    adapters = [tasks.perplexity_task(_eval_tokens(tokenizer, eval_path), window=window)]
    if pairs_path:
        adapters.append(tasks.minimal_pair_task(tasks.read_pairs(pairs_path), tokenizer))
    return adapters


def cmd_tokenize(args) -> int:
    docs = corpuslib.read_documents(args.corpus)
    model = train_tokenizer((d.text for d in docs), args.vocab_size)
    model.save(args.out)
    print(f"trained tokenizer with {model.vocab_size} entries -> {args.out}")
    return 0


def cmd_train(args) -> int:
    tokenizer = TokenizerModel.load(args.tokenizer)
    real = [d.text for d in corpuslib.read_documents(args.real)]
    synth = None
    if args.synth:
        synth = [r["text"] for r in corpuslib.read_corpus(args.synth)]
    config = mixing.MixtureConfig(
        synth_ratio=args.ratio,
        batch_sequences=args.batch_sequences,
        seq_len=args.seq_len,
        reshuffle_seed=args.seed,
    )
    stream = mixing.build_stream(real, synth, tokenizer, config)

    def sequences():
        for _ in range(args.steps):
            for row in next(stream):
                yield row

    registry = CheckpointRegistry(args.registry)
    snaps = train_ngram(
        sequences(),
        order=args.order,
        vocab_size=tokenizer.vocab_size,
        snapshot_every=args.snapshot_every,
        add_k=args.add_k,
        family=args.family,
        registry=registry,
        meta={"ratio": args.ratio, "run_seed": args.seed},
        fmt=args.format,
    )
    print(f"trained {args.family}: snapshots at steps {[s.step for s in snaps]}")
    return 0


def cmd_select_good(args) -> int:
    tokenizer = TokenizerModel.load(args.tokenizer)
    registry = CheckpointRegistry(args.registry)
    adapters = _adapters(tokenizer, args.eval, args.pairs, args.eval_window)
    ppl_adapter = adapters[0]
    candidates = []
    for idx, family in enumerate(args.families.split(",")):
        best_step, best_value = None, None
        for step in registry.steps(family):
            model = registry.load(family, step)
            value = ppl_adapter.info.aggregate(ppl_adapter.scorer(model))
            if best_value is None or value < best_value:
                best_step, best_value = step, value
        candidates.append((idx, registry.load(family, best_step)))
    task_scores = {
        a.name: [a.info.aggregate(a.scorer(model)) for _, model in candidates]
        for a in adapters
    }
    directions = {a.name: a.info.direction for a in adapters}
    _, good = select_good_model(candidates, task_scores, directions)
    print(good.ref)
    if args.out:
        Path(args.out).write_text(
            json.dumps({"family": good.family, "step": good.step}) + "\n", encoding="utf-8")
    return 0


def cmd_derive_bad(args) -> int:
    registry = CheckpointRegistry(args.registry)
    good = registry.load(*_parse_ref(args.good))
    spec = AmateurSpec(kind=args.kind, step=args.step, factor=args.factor, rate=args.rate)
    model = derive_amateur(good, spec, args.seed, registry=registry, fmt=args.format)
    print(model.ref)
    return 0


def cmd_generate(args) -> int:
    tokenizer = TokenizerModel.load(args.tokenizer)
    registry = CheckpointRegistry(args.registry)
    good = registry.load(*_parse_ref(args.good))
    bad = registry.load(*_parse_ref(args.bad)) if args.bad else None
    strategy = DecodingStrategy(
        kind=args.strategy,
        alpha=args.alpha,
        lam=args.contrast_strength,
        top_k=args.k,
        top_p=args.p,
        ban_eos=args.ban_eos,
    )
    seed_docs = corpuslib.read_documents(args.seeds)
    seed_set = corpuslib.extract_seeds(seed_docs, tokenizer, prefix_len=args.prefix_len,
                                       per_domain_quota=args.quota)
    records, manifest = corpuslib.generate_corpus(
        strategy, good, bad, seed_set, tokenizer,
        completions_per_seed=args.completions,
        max_new=args.max_new,
        token_budget=args.budget,
        master_seed=args.seed,
        workers=args.workers,
    )
    corpuslib.write_corpus(records, manifest, args.out)
    status = "met" if manifest.budget_met else "NOT met (seeds exhausted)"
    print(f"{len(records)} records, {manifest.produced_tokens} tokens -> {args.out} "
          f"(budget {status})")
    return 0


def cmd_eval(args) -> int:
    tokenizer = TokenizerModel.load(args.tokenizer)
    registry = CheckpointRegistry(args.registry)
    adapters = _adapters(tokenizer, args.eval, args.pairs, args.eval_window)
    matrix = OutcomeMatrix()
    for adapter in adapters:
        matrix.add_task(adapter.info)
    for mapping in args.method:
        method, _, families = mapping.partition("=")
        for run, family in enumerate(families.split(",")):
            for step in registry.steps(family):
                model = registry.load(family, step)
                for adapter in adapters:
                    matrix.add(method, adapter.name, run, step, adapter.scorer(model))
    matrix.write(args.out)
    print(f"outcomes -> {args.out}")
    return 0


def cmd_report(args) -> int:
    tokenizer = TokenizerModel.load(args.tokenizer)
    adapters = _adapters(tokenizer, args.eval, args.pairs, args.eval_window)
    matrix = OutcomeMatrix.read(args.outcomes, [a.info for a in adapters])
    summary = run_protocol(matrix, args.bootstrap_samples, args.seed,
                           baseline=args.baseline, se_mode=args.se_mode)
    text = report.render_text(summary)
    Path(args.out_prefix + ".txt").write_text(text, encoding="utf-8")
    Path(args.out_prefix + ".csv").write_text(report.render_csv(summary), encoding="utf-8")
    print(text, end="")
    return 0


def cmd_perplexity(args) -> int:
    tokenizer = TokenizerModel.load(args.tokenizer)
    registry = CheckpointRegistry(args.registry)
    model = registry.load(*_parse_ref(args.model))
    value = perplexity(model, _eval_tokens(tokenizer, args.eval))
    print(f"{value:.6f}")
    return 0


def cmd_pipeline(args) -> int:
    config = ExperimentConfig.from_yaml(args.config) if args.config else ExperimentConfig()
    result = run_pipeline(config, args.root)
    for stage, status in result.statuses.items():
        print(f"{status:8s} {stage}")
    print(f"report: {result.report_text}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forge", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tokenize", help="train the shared BPE tokenizer")
    p.add_argument("--corpus", required=True, help="documents JSONL")
    p.add_argument("--vocab-size", type=int, default=8000)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_tokenize)

    def add_train(name: str, require_synth: bool):
        q = sub.add_parser(name, help="train snapshots on a (mixed) corpus stream")
        q.add_argument("--real", required=True, help="real documents JSONL")
        q.add_argument("--synth", required=require_synth, help="synthetic corpus JSONL")
        q.add_argument("--ratio", type=float, default=0.3 if require_synth else 0.0,
                       help="synthetic fraction per batch")
        q.add_argument("--steps", type=int, required=True)
        q.add_argument("--snapshot-every", type=int, required=True)
        q.add_argument("--tokenizer", required=True)
        q.add_argument("--registry", required=True)
        q.add_argument("--family", required=True)
        q.add_argument("--order", type=int, default=4)
        q.add_argument("--add-k", type=float, default=0.01)
        q.add_argument("--batch-sequences", type=int, default=32)
        q.add_argument("--seq-len", type=int, default=128)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--format", choices=("binary", "text"), default="binary")
        q.set_defaults(fn=cmd_train)

    add_train("train", require_synth=False)
    add_train("mix-train", require_synth=True)

    p = sub.add_parser("select-good", help="pick the good model across baseline families")
    p.add_argument("--registry", required=True)
    p.add_argument("--families", required=True, help="comma-separated family names")
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--eval", required=True, help="eval split JSONL")
    p.add_argument("--pairs", default=None, help="minimal-pair JSONL")
    p.add_argument("--eval-window", type=int, default=128)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_select_good)

    p = sub.add_parser("derive-bad", help="derive an amateur model from the good one")
    p.add_argument("--registry", required=True)
    p.add_argument("--good", required=True, help="family@step")
    p.add_argument("--kind", required=True,
                   choices=("earlier_checkpoint", "smaller", "noisy"))
    p.add_argument("--step", type=int, default=None)
    p.add_argument("--factor", type=int, default=None)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("binary", "text"), default="binary")
    p.set_defaults(fn=cmd_derive_bad)

    p = sub.add_parser("generate", help="synthesize a corpus with one decoding strategy")
    p.add_argument("--strategy", required=True, choices=(
        "no_contrast", "no_contrast_vhead", "no_contrast_topk", "no_contrast_topp",
        "cd", "cd_topk", "cd_topp"))
    p.add_argument("--good", required=True, help="family@step")
    p.add_argument("--bad", default=None, help="family@step (cd strategies)")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--contrast-strength", "--lambda", dest="contrast_strength",
                   type=float, default=1.0)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--ban-eos", action="store_true")
    p.add_argument("--seeds", required=True, help="seeds split JSONL")
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--prefix-len", type=int, default=20)
    p.add_argument("--completions", type=int, default=8)
    p.add_argument("--max-new", type=int, default=400)
    p.add_argument("--quota", type=int, default=50)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("eval", help="score model families into an outcome file")
    p.add_argument("--registry", required=True)
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--eval", required=True)
    p.add_argument("--pairs", default=None)
    p.add_argument("--eval-window", type=int, default=128)
    p.add_argument("--method", action="append", required=True,
                   help="method=family1,family2,... (repeatable)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("report", help="bootstrap outcomes into result tables")
    p.add_argument("--outcomes", required=True)
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--eval", required=True)
    p.add_argument("--pairs", default=None)
    p.add_argument("--eval-window", type=int, default=128)
    p.add_argument("--baseline", default="baseline")
    p.add_argument("--bootstrap-samples", "-B", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--se-mode", choices=("se", "bootstrap-sd"), default="se")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("perplexity", help="perplexity of one snapshot on an eval split")
    p.add_argument("--registry", required=True)
    p.add_argument("--model", required=True, help="family@step")
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--eval", required=True)
    p.set_defaults(fn=cmd_perplexity)

    p = sub.add_parser("pipeline", help="run the full experiment graph from a config")
    p.add_argument("--config", default=None, help="YAML config (defaults when omitted)")
    p.add_argument("--root", default=None,
                   help=f"experiment root (or ${ROOT_ENV_VAR})")
    p.set_defaults(fn=cmd_pipeline)

    return parser


ROOT_ENV_VAR = "FORGE_EXPERIMENT_ROOT"


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
