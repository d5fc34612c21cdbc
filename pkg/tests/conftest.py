import numpy as np
import pytest

from cdforge import deskdata
from cdforge.ngram import train_ngram
from cdforge.tokenizer import train_tokenizer


@pytest.fixture(scope="session")
def desk_docs():
    return deskdata.build_corpus(25_000, master_seed=11)


@pytest.fixture(scope="session")
def tok(desk_docs):
    return train_tokenizer((d.text for d in desk_docs), 500)


@pytest.fixture(scope="session")
def desk_sequences(desk_docs, tok):
    return [np.asarray(tok.encode(d.text) + [tok.eos_id], dtype=np.int64)
            for d in desk_docs]


@pytest.fixture(scope="session")
def snapshots(desk_sequences, tok):
    return train_ngram(desk_sequences, order=3, vocab_size=tok.vocab_size,
                       snapshot_every=10_000, family="desk")


@pytest.fixture(scope="session")
def good_model(snapshots):
    return snapshots[-1]


@pytest.fixture(scope="session")
def early_model(snapshots):
    return snapshots[0]


@pytest.fixture(scope="session")
def eval_tokens(tok):
    docs = deskdata.build_corpus(4_000, master_seed=77)
    parts = []
    for doc in docs:
        parts.extend(tok.encode(doc.text))
        parts.append(tok.eos_id)
    return np.asarray(parts, dtype=np.int64)
