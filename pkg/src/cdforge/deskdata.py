"""Seeded generator for the bundled desk-scale corpus.

Produces English-like paragraphs in four source domains (stories,
encyclopedia, dialogue, letters) from templated sentences with several
independent word slots, so n-gram models have structure to learn while
long token spans almost never repeat across splits. Bytes are identical
for a given seed on any machine.
"""

from __future__ import annotations

from cdforge.corpus import Document
from cdforge.rng import RandomStream

DOMAINS = ("stories", "encyclopedia", "dialogue", "letters")

_NAMES = [
    "Alma", "Bruno", "Clara", "Dorian", "Edith", "Felix", "Greta", "Hugo",
    "Ines", "Jonas", "Katri", "Lena", "Marek", "Nadia", "Otto", "Petra",
    "Quentin", "Rosa", "Samuel", "Tilda", "Ulric", "Vera", "Wilhelm", "Yara",
]
_ANIMALS = [
    "fox", "badger", "heron", "otter", "hare", "owl", "stoat", "mole",
    "magpie", "lynx", "beaver", "wren", "marten", "toad", "swallow", "deer",
]
_PLACES = [
    "orchard", "harbour", "meadow", "mill", "quarry", "market", "chapel",
    "bridge", "granary", "lighthouse", "valley", "forge", "library", "garden",
    "cellar", "tower", "station", "courtyard", "river bend", "old road",
]
_OBJECTS = [
    "lantern", "ledger", "compass", "basket", "violin", "kettle", "map",
    "spindle", "telescope", "bell", "saddle", "loaf", "coil of rope", "key",
    "barrel", "letter", "clock", "net", "plough", "jar of honey",
]
_ADJECTIVES = [
    "quiet", "restless", "copper", "pale", "crooked", "patient", "sturdy",
    "narrow", "bright", "weathered", "distant", "gentle", "heavy", "hollow",
    "amber", "frozen", "mossy", "steep", "tidy", "worn",
]
_VERBS_PAST = [
    "carried", "mended", "counted", "followed", "borrowed", "painted",
    "measured", "gathered", "traded", "repaired", "watched", "opened",
    "sketched", "weighed", "stacked", "polished", "wrapped", "hid",
]
_MATERIALS = [
    "grain", "timber", "wool", "clay", "salt", "iron", "flax", "chalk",
    "peat", "amber", "leather", "glass", "copper", "stone",
]
_REGIONS = [
    "the northern hills", "the coastal plain", "the river delta",
    "the eastern marshes", "the high plateau", "the inland forests",
    "the southern terraces", "the lake district",
]
_SEASONS = ["spring", "summer", "autumn", "winter", "harvest time", "the thaw"]
_FEELINGS = ["glad", "uneasy", "curious", "proud", "weary", "hopeful"]
_GREETINGS = ["Good morning", "Hello", "Well met", "Good evening"]

_STORY_TEMPLATES = [
    "The {adj} {animal} slipped past the {place} while {name} {verb} a {object}.",
    "{name} felt {feeling} when the {animal} appeared near the {place} at dusk.",
    "In {season} the {place} smelled of {material}, and {name} {verb} the {adj} {object}.",
    "A {adj} wind crossed the {place}, so {name} and {name2} {verb} the {object} together.",
    "Nobody at the {place} believed that the {animal} had {verb} the {object}.",
    "{name} walked to the {place} carrying a {adj} {object} for {name2}.",
]
_ENCYCLOPEDIA_TEMPLATES = [
    "The {animal} is a {adj} animal found throughout {region}.",
    "Most {material} from {region} was {verb} at the {place} during {season}.",
    "A typical {place} stores {material} in {adj} {object}s for the winter months.",
    "Records from {region} show that {material} trade expanded every {season}.",
    "The {adj} variety of {material} is heavier than the common kind from {region}.",
    "Workers in {region} once {verb} {material} with a {adj} {object}.",
]
_DIALOGUE_TEMPLATES = [
    '"{greeting}, {name}," said {name2}. "Have you {verb} the {object} yet?"',
    '"The {animal} is back near the {place}," {name} whispered to {name2}.',
    '"I feel {feeling} about the {place}," said {name}, holding the {adj} {object}.',
    '"Bring the {object} to the {place} before {season}," {name} told {name2}.',
    '"{name2} {verb} my {object}," complained {name}, "and left it by the {place}."',
]
_LETTER_TEMPLATES = [
    "Dear {name}, I have {verb} the {adj} {object} you sent from the {place}.",
    "Dear {name}, the {place} is lovely in {season}, though the {animal}s are {adj}.",
    "Dear {name}, please tell {name2} that we {verb} the {material} safely.",
    "Dear {name}, I remain {feeling} about the {object} we saw at the {place}.",
    "Dear {name}, the {material} arrived in a {adj} {object} just before {season}.",
]

_TEMPLATES = {
    "stories": _STORY_TEMPLATES,
    "encyclopedia": _ENCYCLOPEDIA_TEMPLATES,
    "dialogue": _DIALOGUE_TEMPLATES,
    "letters": _LETTER_TEMPLATES,
}


def _pick(stream: RandomStream, pool: list[str]) -> str:
    return pool[int(stream.uniform() * len(pool)) % len(pool)]


def _sentence(stream: RandomStream, domain: str) -> str:
    template = _pick(stream, _TEMPLATES[domain])
    name = _pick(stream, _NAMES)
    name2 = _pick(stream, [n for n in _NAMES if n != name])
    return template.format(
        name=name,
        name2=name2,
        animal=_pick(stream, _ANIMALS),
        place=_pick(stream, _PLACES),
        object=_pick(stream, _OBJECTS),
        adj=_pick(stream, _ADJECTIVES),
        verb=_pick(stream, _VERBS_PAST),
        material=_pick(stream, _MATERIALS),
        region=_pick(stream, _REGIONS),
        season=_pick(stream, _SEASONS),
        feeling=_pick(stream, _FEELINGS),
        greeting=_pick(stream, _GREETINGS),
    )


def _paragraph(stream: RandomStream, domain: str) -> str:
    n_sentences = 3 + int(stream.uniform() * 4)
    return " ".join(_sentence(stream, domain) for _ in range(n_sentences))


def build_corpus(total_words: int, master_seed: int) -> list[Document]:
    """Four-domain corpus of roughly `total_words` whitespace words."""
    docs: list[Document] = []
    words = 0
    index = 0
    while words < total_words:
        domain = DOMAINS[index % len(DOMAINS)]
        stream = RandomStream(master_seed, "desk-corpus", domain, index // len(DOMAINS))
        text = _paragraph(stream, domain)
        docs.append(Document(domain=domain, text=text))
        words += len(text.split())
        index += 1
    return docs


def build_minimal_pairs(n_pairs: int, master_seed: int) -> list[tuple[str, str]]:
    """Grammatical sentence vs. its seeded word-shuffle (same bag of words)."""
    pairs = []
    attempt = 0
    while len(pairs) < n_pairs:
        domain = DOMAINS[attempt % len(DOMAINS)]
        stream = RandomStream(master_seed, "desk-pairs", attempt)
        good = _sentence(stream, domain)
        tokens = good.split()
        perm = stream.permutation(len(tokens))
        shuffled = " ".join(tokens[i] for i in perm)
        attempt += 1
        if shuffled == good:
            continue
        pairs.append((good, shuffled))
    return pairs
