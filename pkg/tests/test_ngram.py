import numpy as np
import pytest

from cdforge.errors import ConfigurationError, ContractError, RegistryError
from cdforge.lm import CheckpointRegistry, perplexity, validate_dist
from cdforge.ngram import (AmateurSpec, NgramTrainer, NoisyNgram, derive_amateur,
                           load_model_binary, load_model_text, prune_to_fraction,
                           save_model_binary, save_model_text, train_ngram)


def _seqs(tokens, chunk):
    arr = np.asarray(tokens, dtype=np.int64)
    return [arr[i : i + chunk] for i in range(0, len(arr), chunk)]


def test_snapshot_count_exact_multiple():
    seqs = _seqs(list(range(4)) * 75, 25)  # 300 tokens
    snaps = train_ngram(seqs, order=2, vocab_size=4, snapshot_every=100, family="f")
    assert [s.step for s in snaps] == [1, 2, 3]
    assert snaps[-1].meta["tokens_seen"] == 300


def test_partial_tail_gets_final_snapshot():
    seqs = _seqs(list(range(4)) * 80, 32)  # 320 tokens, marks at 100/200/300
    snaps = train_ngram(seqs, order=2, vocab_size=4, snapshot_every=100, family="f")
    assert [s.step for s in snaps] == [1, 2, 3, 4]
    assert snaps[-1].meta["tokens_seen"] == 320


def test_bigram_counts_from_alternating_corpus():
    # "a b a b ...": after a the model saw only b.
    tokens = [0, 1] * 50
    snaps = train_ngram([np.array(tokens)], order=2, vocab_size=3,
                        snapshot_every=1000, family="f")
    model = snaps[-1]
    dist = model.next_dist([0])
    assert dist[1] > dist[0]
    assert dist[1] > dist[2]


def test_training_is_deterministic(tmp_path, desk_sequences, tok):
    reg_a = CheckpointRegistry(tmp_path / "a")
    reg_b = CheckpointRegistry(tmp_path / "b")
    for reg in (reg_a, reg_b):
        train_ngram(desk_sequences[:60], order=3, vocab_size=tok.vocab_size,
                    snapshot_every=2000, family="m", registry=reg)
    for step in reg_a.steps("m"):
        file_a = (tmp_path / "a" / reg_a.entry("m", step)["file"]).read_bytes()
        file_b = (tmp_path / "b" / reg_b.entry("m", step)["file"]).read_bytes()
        assert file_a == file_b


def test_counts_monotone_across_snapshots(snapshots):
    entries = [s.backend.n_entries() for s in snapshots]
    assert entries == sorted(entries)
    first, last = snapshots[0].backend, snapshots[-1].backend
    # every gram counted early is still counted (with at least that count) later
    table_early, table_late = first.tables[1], last.tables[1]
    idx = np.searchsorted(table_late.keys, table_early.keys)
    assert np.array_equal(table_late.keys[idx], table_early.keys)
    assert np.all(table_late.counts[idx] >= table_early.counts)


def test_order_cap_enforced():
    with pytest.raises(ConfigurationError):
        NgramTrainer(order=9, vocab_size=10)
    NgramTrainer(order=9, vocab_size=10, max_order=9)


def test_invalid_tokens_rejected():
    trainer = NgramTrainer(order=2, vocab_size=4)
    with pytest.raises(ContractError):
        trainer.add_sequence([0, 5])


def test_empty_corpus_rejected():
    with pytest.raises(ConfigurationError):
        train_ngram([], order=2, vocab_size=4, snapshot_every=10, family="f")


def test_prob_of_matches_next_dist_bitwise(good_model, tok):
    rng = np.random.default_rng(3)
    backend = good_model.backend
    for _ in range(200):
        context = rng.integers(0, tok.vocab_size, size=int(rng.integers(0, 5))).tolist()
        token = int(rng.integers(0, tok.vocab_size))
        dist = backend.next_dist(context)
        assert backend.prob_of(context, token) == dist[token]


def test_log_prob_stream_matches_per_token_dists(good_model, eval_tokens):
    stream = eval_tokens[:300]
    fast = good_model.backend.log_prob_stream(stream)
    for i in [0, 1, 2, 5, 50, 299]:
        dist = good_model.next_dist(stream[:i])
        assert fast[i] == np.log(dist[stream[i]])


def test_serialization_binary_and_text_bit_exact(tmp_path, good_model, tok):
    backend = good_model.backend
    bin_path = tmp_path / "m.bin"
    txt_path = tmp_path / "m.txt"
    save_model_binary(backend, bin_path)
    save_model_text(backend, txt_path)
    probe = tok.encode("The quiet fox slipped past")
    expected = backend.next_dist(probe)
    for loaded in (load_model_binary(bin_path), load_model_text(txt_path)):
        assert loaded.order == backend.order
        assert loaded.add_k == backend.add_k
        assert np.array_equal(loaded.weights, backend.weights)
        assert np.array_equal(loaded.next_dist(probe), expected)
    # writing again produces identical bytes
    save_model_binary(backend, tmp_path / "m2.bin")
    assert (tmp_path / "m.bin").read_bytes() == (tmp_path / "m2.bin").read_bytes()
    save_model_text(backend, tmp_path / "m2.txt")
    assert (tmp_path / "m.txt").read_bytes() == (tmp_path / "m2.txt").read_bytes()


def test_big_order_object_keys_work(tok):
    # vocab**order overflows int64 here, exercising the big-integer path
    seqs = [np.arange(50) % 300 for _ in range(5)]
    snaps = train_ngram(seqs, order=6, vocab_size=90_000, snapshot_every=1000, family="f")
    model = snaps[-1].backend
    dist = model.next_dist([1, 2, 3, 4, 5])
    assert abs(dist.sum() - 1.0) < 1e-9
    lp = model.log_prob_stream(np.arange(20) % 300)
    assert np.all(np.isfinite(lp))


# -- amateurs ------------------------------------------------------------------


def test_earlier_checkpoint_returns_stored_snapshot(tmp_path, desk_sequences, tok):
    registry = CheckpointRegistry(tmp_path / "models")
    snaps = train_ngram(desk_sequences[:80], order=3, vocab_size=tok.vocab_size,
                        snapshot_every=3000, family="m", registry=registry)
    good = snaps[-1]
    spec = AmateurSpec(kind="earlier_checkpoint", step=1)
    amateur = derive_amateur(good, spec, rng_seed=0, registry=registry)
    probe = tok.encode("The quiet fox")
    assert np.array_equal(amateur.next_dist(probe), snaps[0].next_dist(probe))
    assert amateur.step == 1


def test_earlier_checkpoint_requires_existing_earlier_step(tmp_path, desk_sequences, tok):
    registry = CheckpointRegistry(tmp_path / "models")
    snaps = train_ngram(desk_sequences[:40], order=2, vocab_size=tok.vocab_size,
                        snapshot_every=2000, family="m", registry=registry)
    good = snaps[-1]
    with pytest.raises(ConfigurationError):
        derive_amateur(good, AmateurSpec(kind="earlier_checkpoint", step=good.step + 1),
                       0, registry=registry)
    registry2 = CheckpointRegistry(tmp_path / "other")
    registry2.save_ngram("m", good.step, good.backend)
    good2 = registry2.load("m", good.step)
    with pytest.raises(RegistryError):
        derive_amateur(good2, AmateurSpec(kind="earlier_checkpoint", step=1),
                       0, registry=registry2)


def test_noisy_zero_rate_is_identity(good_model, tok):
    noisy = NoisyNgram(good_model.backend, rate=0.0, seed=9)
    rng = np.random.default_rng(1)
    for _ in range(25):
        ctx = rng.integers(0, tok.vocab_size, size=int(rng.integers(0, 4))).tolist()
        assert np.array_equal(noisy.next_dist(ctx), good_model.backend.next_dist(ctx))


def test_noisy_is_deterministic_and_valid(good_model, tok):
    noisy = NoisyNgram(good_model.backend, rate=0.4, seed=9)
    ctx = tok.encode("The quiet fox")
    a = noisy.next_dist(ctx)
    b = noisy.next_dist(ctx)
    assert np.array_equal(a, b)
    validate_dist(a, tok.vocab_size)
    other_seed = NoisyNgram(good_model.backend, rate=0.4, seed=10).next_dist(ctx)
    assert not np.array_equal(a, other_seed)


def test_noisy_rate_validation(good_model):
    with pytest.raises(ConfigurationError):
        NoisyNgram(good_model.backend, rate=1.0, seed=0)
    with pytest.raises(ConfigurationError):
        AmateurSpec(kind="noisy", rate=-0.1)
    AmateurSpec(kind="noisy", rate=0.0)  # zero-rate identity must be legal


def test_smaller_prunes_to_target_entry_count(good_model):
    backend = good_model.backend
    total = backend.n_entries()
    for factor in (10, 20):
        pruned = prune_to_fraction(backend, factor)
        target = total / factor
        assert 0.8 * target <= pruned.n_entries() <= 1.2 * target
        assert abs(pruned.weights.sum() - 1.0) < 1e-12


def test_smaller_is_deterministic(good_model):
    a = prune_to_fraction(good_model.backend, 10)
    b = prune_to_fraction(good_model.backend, 10)
    for ta, tb in zip(a.tables, b.tables):
        assert np.array_equal(ta.keys, tb.keys)
        assert np.array_equal(ta.counts, tb.counts)


def test_smaller_keeps_high_count_entries(good_model):
    backend = good_model.backend
    pruned = prune_to_fraction(backend, 10)
    # the single best-counted unigram must survive any reasonable pruning
    best_unigram = backend.tables[0].keys[np.argmax(backend.tables[0].counts)]
    assert best_unigram in pruned.tables[0].keys


def test_reduction_infeasible_on_minimal_model():
    snaps = train_ngram([np.array([0, 1])], order=1, vocab_size=2,
                        snapshot_every=10, family="f")
    with pytest.raises(ConfigurationError):
        prune_to_fraction(snaps[-1].backend, 10)


def test_amateur_spec_validation():
    with pytest.raises(ConfigurationError):
        AmateurSpec(kind="smaller", factor=1)
    with pytest.raises(ConfigurationError):
        AmateurSpec(kind="earlier_checkpoint")
    with pytest.raises(ConfigurationError):
        AmateurSpec(kind="bogus")


def test_all_default_amateurs_are_worse(tmp_path, desk_sequences, tok, eval_tokens):
    registry = CheckpointRegistry(tmp_path / "models")
    snaps = train_ngram(desk_sequences, order=3, vocab_size=tok.vocab_size,
                        snapshot_every=10_000, family="m", registry=registry)
    good = snaps[-1]
    good_ppl = perplexity(good, eval_tokens)
    specs = [
        AmateurSpec(kind="earlier_checkpoint", step=1),
        AmateurSpec(kind="smaller", factor=10),
        AmateurSpec(kind="smaller", factor=20),
        AmateurSpec(kind="smaller", factor=50),
        AmateurSpec(kind="smaller", factor=100),
        AmateurSpec(kind="noisy", rate=0.1),
        AmateurSpec(kind="noisy", rate=0.3),
        AmateurSpec(kind="noisy", rate=0.5),
        AmateurSpec(kind="noisy", rate=0.7),
    ]
    eval_slice = eval_tokens[:400]  # noisy scoring walks token by token
    good_slice_ppl = perplexity(good, eval_slice)
    for spec in specs:
        amateur = derive_amateur(good, spec, rng_seed=5, registry=registry)
        if spec.kind == "noisy":
            assert perplexity(amateur, eval_slice) > good_slice_ppl, spec.label
        else:
            assert perplexity(amateur, eval_tokens) > good_ppl, spec.label
