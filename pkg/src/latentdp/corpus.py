"""Dataset loading, word-level tokenization, vocabularies and synthetic corpora."""

from __future__ import annotations

import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

PAD, UNK, MASK, BOS, EOS = 0, 1, 2, 3, 4
RESERVED = ("<pad>", "<unk>", "<mask>", "<s>", "</s>")

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class DatasetFormatError(ValueError):
    """Raised when a JSON-lines dataset has malformed rows."""

    def __init__(self, problems: list[tuple[int, str]]):
        self.problems = problems
        lines = "; ".join(f"line {n}: {msg}" for n, msg in problems)
        super().__init__(f"{len(problems)} malformed line(s): {lines}")


@dataclass(frozen=True)
class LabeledDocument:
    text: str
    label: str
    individual_id: str | None = None

    def __post_init__(self):
        if self.text is None:
            raise ValueError("text must not be None")
        if not self.label:
            raise ValueError("label must be a nonempty string")

    def to_json(self) -> dict:
        row = {"text": self.text, "label": self.label}
        if self.individual_id is not None:
            row["individual_id"] = self.individual_id
        return row


@dataclass
class TokenSequence:
    ids: np.ndarray
    length: int

    def __len__(self) -> int:
        return len(self.ids)


class Vocab:
    """Word-level vocabulary with the five reserved ids at 0-4."""

    def __init__(self, tokens: Sequence[str], max_size: int):
        if max_size < len(RESERVED):
            raise ValueError(f"max_size must be at least {len(RESERVED)}")
        itos = list(RESERVED)
        for tok in tokens:
            if tok in RESERVED:
                continue
            itos.append(tok)
        if len(itos) > max_size:
            raise ValueError(f"{len(itos)} tokens exceed max_size={max_size}")
        if len(set(itos)) != len(itos):
            raise ValueError("duplicate tokens in vocabulary")
        self.itos = itos
        self.stoi = {tok: i for i, tok in enumerate(itos)}
        self.max_size = max_size

    pad_id = PAD
    unk_id = UNK
    mask_id = MASK
    bos_id = BOS
    eos_id = EOS

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK)

    def to_json(self) -> dict[str, int]:
        return dict(self.stoi)

    @classmethod
    def from_json(cls, mapping: dict[str, int], max_size: int | None = None) -> "Vocab":
        ordered = sorted(mapping.items(), key=lambda kv: kv[1])
        if [i for _, i in ordered] != list(range(len(ordered))):
            raise ValueError("vocabulary ids must be contiguous from 0")
        if tuple(t for t, _ in ordered[: len(RESERVED)]) != RESERVED:
            raise ValueError("reserved tokens must occupy ids 0-4")
        return cls([t for t, _ in ordered], max_size or len(ordered))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def split_words(text: str) -> list[str]:
    """Lowercase and split on whitespace and punctuation boundaries."""
    return _TOKEN_RE.findall(text.lower())


def build_vocab(corpus: Iterable[str | LabeledDocument], max_size: int = 2048) -> Vocab:
    counts: Counter[str] = Counter()
    n_docs = 0
    for doc in corpus:
        text = doc.text if isinstance(doc, LabeledDocument) else doc
        counts.update(split_words(text))
        n_docs += 1
    if n_docs == 0:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    for tok in RESERVED:
        counts.pop(tok, None)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    keep = [tok for tok, _ in ranked[: max_size - len(RESERVED)]]
    return Vocab(keep, max_size)


def tokenize(text: str, vocab: Vocab, max_len: int = 20) -> TokenSequence:
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    ids = [BOS] + [vocab.id(w) for w in split_words(text)] + [EOS]
    ids = ids[:max_len]
    length = len(ids)
    out = np.full(max_len, PAD, dtype=np.int64)
    out[:length] = ids
    return TokenSequence(out, length)


def tokenize_batch(texts: Sequence[str], vocab: Vocab, max_len: int = 20) -> np.ndarray:
    if not texts:
        return np.zeros((0, max_len), dtype=np.int64)
    return np.stack([tokenize(t, vocab, max_len).ids for t in texts])


def detokenize(ids: Iterable[int], vocab: Vocab) -> str:
    words = []
    for i in ids:
        i = int(i)
        if i == EOS:
            break
        if i < len(RESERVED):
            continue
        words.append(vocab.itos[i])
    return " ".join(words)


def normalize(text: str) -> str:
    return " ".join(split_words(text))


def load_jsonl(path: str | Path) -> list[LabeledDocument]:
    path = Path(path)
    docs: list[LabeledDocument] = []
    problems: list[tuple[int, str]] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                problems.append((lineno, f"invalid JSON ({exc.msg})"))
                continue
            if not isinstance(row, dict):
                problems.append((lineno, "expected a JSON object"))
                continue
            missing = [f for f in ("text", "label") if f not in row]
            if missing:
                problems.append((lineno, f"missing field(s) {', '.join(missing)}"))
                continue
            if not isinstance(row["text"], str) or not isinstance(row["label"], str) or not row["label"]:
                problems.append((lineno, "text must be a string and label a nonempty string"))
                continue
            ind = row.get("individual_id")
            docs.append(LabeledDocument(row["text"], row["label"], None if ind is None else str(ind)))
    if problems:
        raise DatasetFormatError(problems)
    if not docs:
        logger.warning("dataset %s is empty", path)
    return docs


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def split(corpus: Sequence, fractions: Sequence[float] = (0.6, 0.2, 0.2), seed: int = 0):
    if any(f < 0 for f in fractions) or not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
        raise ValueError(f"fractions must be nonnegative and sum to 1, got {tuple(fractions)}")
    order = np.random.default_rng(seed).permutation(len(corpus))
    bounds = [0] + [int(round(b)) for b in np.cumsum(fractions)[:-1] * len(corpus)] + [len(corpus)]
    return tuple([corpus[i] for i in order[lo:hi]] for lo, hi in zip(bounds[:-1], bounds[1:]))


# Synthetic corpora. The public corpus covers every word the sentiment
# corpus uses, but in neutral narrative sentences.

_NAMES = """alice bob carol david emma frank grace henry irene jack karen liam mona nora oscar
paul quinn rita sam tina uma victor wendy xavier yara zack anna ben clara dylan elena felix
gina hugo ivy jonas kira leo maya nils""".split()
_PEOPLE = """teacher doctor farmer pilot baker driver nurse writer singer painter lawyer student
builder chef clerk dancer editor miner sailor tailor judge mayor coach guard poet banker
plumber actor soldier ranger keeper hunter vendor porter scholar captain merchant neighbor
cousin stranger gardener fisherman carpenter librarian mechanic pianist jeweler
priest shepherd surgeon florist barber butcher weaver potter glazier""".split()
_PRODUCTS = """phone movie book hotel laptop camera restaurant song game service album show
car chair printer course meal coffee jacket app""".split()
_THINGS = _PRODUCTS + """letter window bridge garden table river ticket bottle basket ladder
hammer blanket candle mirror lamp wagon rope bucket key map coin box bell kettle pencil
ribbon shovel violin fence tent cart barrel drum flag glove helmet anchor compass feather
lantern needle pillow rug saddle scarf shelf spoon stool torch towel trunk vase wheel whistle
boat engine fountain statue tower clock carpet curtain apple bread cheese onion pepper carrot
banana lemon cookie cake pie soup salad tea juice honey sugar salt flour rice bean corn egg
fish cup plate bowl fork knife pan pot oven sink desk door wall roof floor stair gate path""".split()
_PLACES = """market station harbor village city forest valley museum library school office
factory castle island desert mountain beach park church bakery hospital airport garage
stadium theater bank farm square palace tavern mill bridgeway camp canyon cellar chapel
cottage courtyard dock embassy""".split()
_NEUTRAL_ADJ = """old new small large red blue green yellow wooden heavy light long short
round tall narrow wide quiet loud early late simple plain dark bright cold warm empty full
young ancient modern rusty shiny soft hard thin thick""".split()
_POS_ADJ = """great excellent wonderful amazing perfect lovely fantastic superb brilliant
pleasant delightful charming reliable comfortable enjoyable""".split()
_NEG_ADJ = """terrible awful horrible poor boring broken useless dreadful disappointing
annoying unpleasant slow dirty noisy rude""".split()
_VERBS_PAST = """carried found painted moved opened closed repaired bought sold built cleaned
lifted dropped washed checked watched visited followed pushed pulled shared borrowed returned
delivered packed counted measured marked covered filled emptied folded stacked
sorted wrapped painted hid planted traded polished sharpened tied loaded""".split()
_POS_VERBS = "love like enjoy adore recommend".split()
_NEG_VERBS = "hate dislike regret avoid return".split()
_VERBS_PRESENT = _POS_VERBS + _NEG_VERBS + """need want see keep bring carry find use
build clean check watch visit follow share""".split()
_TIMES = """yesterday today tonight again later soon recently twice daily weekly""".split()
_ADVS = """quickly slowly carefully quietly gently loudly happily calmly proudly briskly
eagerly barely nearly simply""".split()
_PREPS = """near behind inside outside beside under over across toward past""".split()
_INTENS = "very really so quite truly".split()

_PUBLIC_TEMPLATES = (
    "the {adj} {person} {verb_past} a {adj} {thing} {prep} the {place} .",
    "{name} {verb_past} the {thing} {time} .",
    "a {person} from the {place} said the {thing} was {adj} .",
    "we {verb} the {thing} and the {thing} {time} .",
    "in the {place} , the {person} {verb_past} the {thing} {adv} .",
    "my {person} thinks the {thing} is {adj} .",
    "{name} and {name} {verb_past} a {adj} {thing} near the {place} .",
    "they {verb} the {adj} {thing} {prep} the {place} {time} .",
    "the {person} {adv} {verb_past} {name} 's {thing} .",
    "i {verb} the {intens} {adj} {thing} in the {place} .",
    "it was a {adj} day at the {place} !",
    "this {thing} belongs to the {person} .",
    "is the {thing} {adj} ? it {verb_past} the {person} .",
)

_SENTIMENT_TEMPLATES = (
    "this {product} is {intens} {s_adj} .",
    "the {product} was {s_adj} and {s_adj} .",
    "i {s_verb} this {product} , it is {s_adj} .",
    "{intens} {s_adj} {product} , {s_adj} !",
    "i {s_verb} the {product} . {s_adj} .",
    "the {s_adj} {product} was {intens} {s_adj} .",
)

_PUBLIC_SLOTS = {
    "name": _NAMES,
    "person": _PEOPLE,
    "thing": _THINGS,
    "place": _PLACES,
    "adj": _NEUTRAL_ADJ + _POS_ADJ + _NEG_ADJ,
    "verb_past": _VERBS_PAST,
    "verb": _VERBS_PRESENT,
    "time": _TIMES,
    "adv": _ADVS,
    "prep": _PREPS,
    "intens": _INTENS,
}

_SLOT_RE = re.compile(r"\{(\w+)\}")


def _fill(template: str, slots: dict[str, Sequence[str]], rng: np.random.Generator) -> str:
    return _SLOT_RE.sub(lambda m: slots[m.group(1)][rng.integers(len(slots[m.group(1)]))], template)


def public_lexicon() -> list[str]:
    words = {w for t in _PUBLIC_TEMPLATES for w in split_words(_SLOT_RE.sub(" ", t))}
    for options in _PUBLIC_SLOTS.values():
        words.update(options)
    return sorted(words)


def generate_synthetic(kind: str, count: int, seed: int = 0, scrambled: float = 0.5) -> list[LabeledDocument]:
    """Deterministic templated corpus.

    ``kind`` is ``"public"`` (unlabeled narrative sentences, label ``"public"``)
    or ``"sentiment"`` (balanced positive/negative product reviews). A
    ``scrambled`` fraction of public documents are random word sequences over
    the public lexicon; without them an autoencoder learns the templates
    instead of learning to copy.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng([seed, 0x5EED, 0 if kind == "public" else 1])
    docs = []
    if kind == "public":
        lexicon = public_lexicon()
        for _ in range(count):
            if rng.random() < scrambled:
                words = rng.choice(lexicon, size=rng.integers(3, 17))
                docs.append(LabeledDocument(" ".join(words), "public"))
                continue
            t = _PUBLIC_TEMPLATES[rng.integers(len(_PUBLIC_TEMPLATES))]
            docs.append(LabeledDocument(_fill(t, _PUBLIC_SLOTS, rng), "public"))
    elif kind == "sentiment":
        for i in range(count):
            positive = i % 2 == 0
            slots = {
                "product": _PRODUCTS,
                "intens": _INTENS,
                "s_adj": _POS_ADJ if positive else _NEG_ADJ,
                "s_verb": _POS_VERBS if positive else _NEG_VERBS,
            }
            t = _SENTIMENT_TEMPLATES[rng.integers(len(_SENTIMENT_TEMPLATES))]
            docs.append(LabeledDocument(_fill(t, slots, rng), "positive" if positive else "negative"))
    else:
        raise ValueError(f"unknown corpus kind {kind!r}")
    return docs


def vocabulary_overlap(a: Iterable[LabeledDocument], b: Iterable[LabeledDocument]) -> float:
    """Jaccard overlap of the word sets of two corpora."""
    va = {w for d in a for w in split_words(d.text)}
    vb = {w for d in b for w in split_words(d.text)}
    return len(va & vb) / len(va | vb)
