import math
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from cdforge.errors import ContractError, RegistryError
from cdforge.lm import (CheckpointedModel, CheckpointRegistry, perplexity,
                        sequence_nll, validate_dist)


class UniformBackend:
    """Mock backend assigning exactly 1/V everywhere."""

    def __init__(self, vocab_size):
        self.vocab_size = vocab_size
        self.max_context = 2

    def next_dist(self, context):
        return np.full(self.vocab_size, 1.0 / self.vocab_size)


class PeakedBackend:
    """Prob 1-(V-1)*eps on token (last+1) mod V, eps elsewhere."""

    def __init__(self, vocab_size, eps=1e-6):
        self.vocab_size = vocab_size
        self.eps = eps
        self.max_context = 4

    def favorite(self, context):
        return (context[-1] + 1) % self.vocab_size if len(context) else 0

    def next_dist(self, context):
        dist = np.full(self.vocab_size, self.eps)
        dist[self.favorite(context)] = 1.0 - (self.vocab_size - 1) * self.eps
        return dist


def _model(backend):
    return CheckpointedModel(family="mock", step=1, backend=backend)


def test_uniform_nll_closed_form():
    vocab = 11
    model = _model(UniformBackend(vocab))
    n = 9
    assert math.isclose(sequence_nll(model, [3] * n), n * math.log(vocab), rel_tol=1e-12)


def test_uniform_perplexity_is_vocab_size():
    vocab = 64
    model = _model(UniformBackend(vocab))
    assert math.isclose(perplexity(model, [1, 2, 3, 4]), vocab, rel_tol=1e-9)


def test_peaked_model_greedy_sequence_nll():
    vocab, eps, n = 7, 1e-6, 12
    backend = PeakedBackend(vocab, eps)
    model = _model(backend)
    seq = [backend.favorite([])]
    for _ in range(n - 1):
        seq.append(backend.favorite(seq))
    expected = -n * math.log(1.0 - (vocab - 1) * eps)
    assert math.isclose(sequence_nll(model, seq), expected, rel_tol=1e-9)


def test_single_token_nll_is_first_step_logprob():
    backend = UniformBackend(5)
    model = _model(backend)
    assert math.isclose(sequence_nll(model, [2]), math.log(5), rel_tol=1e-12)


def test_repeated_token_with_constant_prob():
    class FixedBackend:
        vocab_size = 4
        max_context = 3

        def next_dist(self, context):
            return np.array([0.7, 0.1, 0.1, 0.1])

    model = _model(FixedBackend())
    assert math.isclose(perplexity(model, [0] * 20), 1 / 0.7, rel_tol=1e-12)


def test_empty_sequence_rejected():
    model = _model(UniformBackend(4))
    with pytest.raises(ValueError):
        sequence_nll(model, [])
    with pytest.raises(ValueError):
        perplexity(model, [])


def test_validate_dist_contract():
    validate_dist(np.full(4, 0.25), 4)
    with pytest.raises(ContractError):
        validate_dist(np.full(5, 0.25), 4)
    with pytest.raises(ContractError):
        validate_dist(np.array([0.5, 0.5, 0.0, 0.0]), 4)
    with pytest.raises(ContractError):
        validate_dist(np.array([0.5, 0.2, 0.2, 0.2]), 4)


def test_context_truncated_from_left():
    calls = []

    class Recorder:
        vocab_size = 4
        max_context = 3

        def next_dist(self, context):
            calls.append(list(context))
            return np.full(4, 0.25)

    model = _model(Recorder())
    model.next_dist([1, 2, 3, 4, 5])
    assert calls == [[3, 4, 5]]


def test_ngram_dist_invariants_over_random_contexts(good_model, tok):
    rng = np.random.default_rng(5)
    for _ in range(1000):
        length = int(rng.integers(0, 6))
        context = rng.integers(0, tok.vocab_size, size=length).tolist()
        validate_dist(good_model.next_dist(context), tok.vocab_size)


def test_registry_round_trip(tmp_path, good_model, tok):
    registry = CheckpointRegistry(tmp_path / "models")
    registry.save_ngram("fam", 3, good_model.backend, {"note": "x"})
    loaded = registry.load("fam", 3)
    probe = tok.encode("The quiet fox slipped")
    assert np.array_equal(loaded.next_dist(probe), good_model.next_dist(probe))
    assert loaded.meta == {"note": "x"}
    assert registry.steps("fam") == [3]
    assert registry.families() == ["fam"]
    with pytest.raises(RegistryError):
        registry.load("fam", 99)


def test_snapshot_identical_across_processes(tmp_path, good_model, tok):
    registry = CheckpointRegistry(tmp_path / "models")
    registry.save_ngram("fam", 1, good_model.backend)
    probe = tok.encode("Dear Alma, the")
    here = good_model.next_dist(probe).tobytes().hex()
    script = textwrap.dedent(f"""
        from cdforge.lm import CheckpointRegistry
        model = CheckpointRegistry({str(tmp_path / 'models')!r}).load("fam", 1)
        print(model.next_dist({probe!r}).tobytes().hex())
    """)
    out = subprocess.run([sys.executable, "-c", script], capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip() == here
