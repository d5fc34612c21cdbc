import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdforge.errors import ConfigurationError, TokenDecodeError
from cdforge.tokenizer import (BOS_ID, EOS_ID, REPLACEMENT_CHAR, UNK_ID,
                               TokenizerModel, train_tokenizer)


def test_single_merge_learned_on_repeating_pair():
    # "abababab": the only repeated adjacent pair of base symbols is (a, b).
    model = train_tokenizer(["abababab"], vocab_size=3 + 2 + 1)
    assert len(model.merges) == 1
    left, right = model.merges[0]
    assert model.vocab[left] == b"a"
    assert model.vocab[right] == b"b"
    assert model.encode("abab") == [5, 5]


def test_round_trip_identity_examples(tok, desk_docs):
    assert tok.encode("") == []
    assert tok.decode([]) == ""
    for doc in desk_docs[:50]:
        assert tok.decode(tok.encode(doc.text)) == doc.text


def test_single_base_symbol_is_one_token():
    model = train_tokenizer(["xy"], vocab_size=5)
    assert len(model.encode("x")) == 1


def test_exact_vocab_size_and_unique_ids(tok):
    assert tok.vocab_size == 500
    assert len(set(tok.vocab)) == len(tok.vocab) == 500


def _in_domain_alphabet(tok):
    return [
        chr(entry[0])
        for tid, entry in enumerate(tok.vocab)
        if tid > 2 and len(entry) == 1 and 32 <= entry[0] < 127
    ]


def test_special_ids_distinct(tok):
    assert len({tok.unk_id, tok.bos_id, tok.eos_id}) == 3
    assert (tok.unk_id, tok.bos_id, tok.eos_id) == (UNK_ID, BOS_ID, EOS_ID)


def test_unknown_bytes_map_to_unk(tok):
    ids = tok.encode("ÿ☃")  # bytes absent from the desk corpus
    assert UNK_ID in ids
    assert REPLACEMENT_CHAR in tok.decode(ids)


def test_decode_rejects_invalid_id(tok):
    with pytest.raises(TokenDecodeError, match=str(tok.vocab_size + 7)):
        tok.decode([0, tok.vocab_size + 7])
    with pytest.raises(TokenDecodeError):
        tok.decode([-1])


def test_empty_corpus_rejected():
    with pytest.raises(ConfigurationError):
        train_tokenizer([], vocab_size=100)


def test_too_small_vocab_rejected():
    with pytest.raises(ConfigurationError):
        train_tokenizer(["abc"], vocab_size=3)


def test_unreachable_vocab_rejected():
    with pytest.raises(ConfigurationError, match="exhausted"):
        train_tokenizer(["ab"], vocab_size=50)


def test_training_deterministic(desk_docs):
    texts = [d.text for d in desk_docs[:100]]
    a = train_tokenizer(iter(texts), 300)
    b = train_tokenizer(iter(texts), 300)
    assert a.vocab == b.vocab
    assert a.merges == b.merges


def test_serialization_round_trip(tok, tmp_path, desk_docs):
    path = tmp_path / "tok.txt"
    tok.save(path)
    reloaded = TokenizerModel.load(path)
    assert reloaded.vocab == tok.vocab
    assert reloaded.merges == tok.merges
    probe = [d.text for d in desk_docs[:20]]
    for text in probe:
        assert reloaded.encode(text) == tok.encode(text)


def test_decode_of_structural_tokens(tok):
    assert tok.decode([BOS_ID, EOS_ID]) == ""


@settings(max_examples=200, deadline=None)
@given(data=st.data())
def test_round_trip_property_in_domain(tok, data):
    alphabet = _in_domain_alphabet(tok)
    text = data.draw(st.text(alphabet=alphabet, max_size=200))
    assert tok.decode(tok.encode(text)) == text


def test_round_trip_bulk_random_strings(tok):
    # Module invariant: 10,000 random in-domain strings survive the round trip.
    import random

    alphabet = _in_domain_alphabet(tok)
    rng = random.Random(31)
    for _ in range(10_000):
        s = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 40)))
        assert tok.decode(tok.encode(s)) == s
