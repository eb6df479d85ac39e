"""Deterministic synthetic EUD corpora for tests and acceptance runs.

Patterns cover the constructions the parser must handle: plain transitive
clauses, obliques with lexicalized labels (obl:in etc.), shared-subject
coordination (reentrancy), gapping with an empty node, and a relative
clause whose ref/nsubj pair forms a genuine EUD cycle.
"""

import numpy as np

from sager.conllu import DepEdge, ParsedSentence, Token

DETS = ["the", "a"]
ADJS = ["big", "small", "old", "young", "sly", "tame"]
NOUNS = [
    "cat", "dog", "bird", "fox", "cow", "pig", "owl", "bee",
    "hen", "ram", "colt", "mole", "crab", "wasp", "lark",
]
VERBS = ["chased", "saw", "found", "liked", "feared", "nudged", "trailed", "spied"]
VERB_LEMMA = {
    "chased": "chase", "saw": "see", "found": "find", "liked": "like",
    "feared": "fear", "nudged": "nudge", "trailed": "trail", "spied": "spy",
}
PREPS = ["in", "on", "under", "near"]
PLACES = ["park", "barn", "field", "pond", "yard", "shed"]


def _sentence(words, edges, sent_id, ranges=()):
    """words: (form, lemma, cid) triples in document order; edges in dense ids."""
    tokens = [Token(cid, str(form), str(lemma)) for form, lemma, cid in words]
    text = " ".join(t.form for t in tokens if not t.is_empty)
    comments = [f"# sent_id = {sent_id}", f"# text = {text}"]
    return ParsedSentence(
        tokens,
        frozenset(DepEdge(h, d, l) for h, d, l in edges),
        comments,
        list(ranges),
    )


def _w(form, lemma=None):
    return form, (lemma if lemma is not None else form)


def _number(words):
    """Assign cids: plain running ids, empty nodes as (prev, m)."""
    out, k, m = [], 0, 0
    for form, lemma, empty in words:
        if empty:
            m += 1
            out.append((form, lemma, (k, m)))
        else:
            k += 1
            m = 0
            out.append((form, lemma, (k, 0)))
    return out


def transitive(rng, sent_id):
    n1, n2 = rng.choice(NOUNS, 2, replace=False)
    v = rng.choice(VERBS)
    d1, d2 = rng.choice(DETS), rng.choice(DETS)
    words = _number(
        [(*_w(d1), False), (n1, n1, False), (v, VERB_LEMMA[v], False),
         (*_w(d2), False), (n2, n2, False)]
    )
    edges = [(0, 3, "root"), (3, 2, "nsubj"), (3, 5, "obj"), (2, 1, "det"), (5, 4, "det")]
    return _sentence(words, edges, sent_id)


def oblique(rng, sent_id):
    n1, n2 = rng.choice(NOUNS, 2, replace=False)
    v = rng.choice(VERBS)
    p = rng.choice(PREPS)
    pl = rng.choice(PLACES)
    words = _number(
        [(*_w("the"), False), (n1, n1, False), (v, VERB_LEMMA[v], False),
         (*_w("a"), False), (n2, n2, False), (*_w(p), False),
         (*_w("the"), False), (pl, pl, False)]
    )
    edges = [
        (0, 3, "root"), (3, 2, "nsubj"), (3, 5, "obj"), (2, 1, "det"), (5, 4, "det"),
        (3, 8, f"obl:{p}"), (8, 6, "case"), (8, 7, "det"),
    ]
    return _sentence(words, edges, sent_id)


def intransitive_oblique(rng, sent_id):
    n1 = rng.choice(NOUNS)
    v = rng.choice(VERBS)
    p = rng.choice(PREPS)
    pl = rng.choice(PLACES)
    words = _number(
        [(*_w("the"), False), (n1, n1, False), (v, VERB_LEMMA[v], False),
         (*_w(p), False), (*_w("a"), False), (pl, pl, False)]
    )
    edges = [
        (0, 3, "root"), (3, 2, "nsubj"), (2, 1, "det"),
        (3, 6, f"obl:{p}"), (6, 4, "case"), (6, 5, "det"),
    ]
    return _sentence(words, edges, sent_id)


def shared_subject(rng, sent_id):
    """Coordinated verbs sharing the subject: the nsubj edge re-enters."""
    n1, n2 = rng.choice(NOUNS, 2, replace=False)
    v1, v2 = rng.choice(VERBS, 2, replace=False)
    words = _number(
        [(*_w("the"), False), (n1, n1, False), (v1, VERB_LEMMA[v1], False),
         (*_w("and"), False), (v2, VERB_LEMMA[v2], False),
         (*_w("a"), False), (n2, n2, False)]
    )
    edges = [
        (0, 3, "root"), (3, 2, "nsubj"), (2, 1, "det"),
        (3, 5, "conj"), (5, 4, "cc"), (5, 2, "nsubj"),
        (5, 7, "obj"), (7, 6, "det"),
    ]
    return _sentence(words, edges, sent_id)


def gapping(rng, sent_id):
    """Verb gapping: the second clause hangs off an empty copy of the verb."""
    n1, n2, n3, n4 = rng.choice(NOUNS, 4, replace=False)
    v = rng.choice(VERBS)
    lemma = VERB_LEMMA[v]
    words = _number(
        [(*_w("the"), False), (n1, n1, False), (v, lemma, False),
         (*_w("the"), False), (n2, n2, False), (*_w("and"), False),
         (v, lemma, True),  # empty node 6.1
         (*_w("the"), False), (n3, n3, False), (*_w("the"), False), (n4, n4, False)]
    )
    edges = [
        (0, 3, "root"), (3, 2, "nsubj"), (2, 1, "det"), (3, 5, "obj"), (5, 4, "det"),
        (3, 7, "conj"), (7, 6, "cc"),
        (7, 9, "nsubj"), (9, 8, "det"), (7, 11, "obj"), (11, 10, "det"),
    ]
    return _sentence(words, edges, sent_id)


def relative_cycle(rng, sent_id):
    """Relative clause: ref plus the re-entrant nsubj close a 2-cycle."""
    n1, n2 = rng.choice(NOUNS, 2, replace=False)
    v1, v2 = rng.choice(VERBS, 2, replace=False)
    words = _number(
        [(*_w("the"), False), (n1, n1, False), (*_w("that"), False),
         (v1, VERB_LEMMA[v1], False), (*_w("the"), False), (n2, n2, False),
         (v2, VERB_LEMMA[v2], False)]
    )
    edges = [
        (0, 7, "root"), (7, 2, "nsubj"), (2, 1, "det"),
        (2, 4, "acl:relcl"), (4, 2, "nsubj"), (2, 3, "ref"),
        (4, 6, "obj"), (6, 5, "det"),
    ]
    return _sentence(words, edges, sent_id)


def wide(rng, sent_id):
    """Three arguments under the verb and six leaves: wide strata, so
    imposed sibling orders have room to matter."""
    n1, n2 = rng.choice(NOUNS, 2, replace=False)
    a1, a2 = rng.choice(ADJS, 2, replace=False)
    v = rng.choice(VERBS)
    p = rng.choice(PREPS)
    pl = rng.choice(PLACES)
    words = _number(
        [(*_w("the"), False), (a1, a1, False), (n1, n1, False),
         (v, VERB_LEMMA[v], False),
         (*_w("a"), False), (a2, a2, False), (n2, n2, False),
         (*_w(p), False), (*_w("the"), False), (pl, pl, False)]
    )
    edges = [
        (0, 4, "root"),
        (4, 3, "nsubj"), (3, 1, "det"), (3, 2, "amod"),
        (4, 7, "obj"), (7, 5, "det"), (7, 6, "amod"),
        (4, 10, f"obl:{p}"), (10, 8, "case"), (10, 9, "det"),
    ]
    return _sentence(words, edges, sent_id)


def contraction(rng, sent_id):
    """Auxiliary contraction written as a multiword range line."""
    n1 = rng.choice(NOUNS)
    v = rng.choice(VERBS)
    words = _number(
        [(*_w("the"), False), (n1, n1, False), (*_w("did", "do"), False),
         (*_w("not"), False), (v, VERB_LEMMA[v], False)]
    )
    edges = [(0, 5, "root"), (5, 2, "nsubj"), (2, 1, "det"), (5, 3, "aux"), (5, 4, "advmod")]
    return _sentence(words, edges, sent_id, ranges=[(3, "3-4\tdidn't\t_\t_\t_\t_\t_\t_\t_\t_")])


OVERFIT_PATTERNS = [transitive, oblique, intransitive_oblique, shared_subject, gapping]
ABLATION_PATTERNS = [wide, oblique, shared_subject, wide]


def generate(patterns, n, seed, prefix):
    rng = np.random.default_rng(seed)
    out = []
    seen_texts = set()
    i = 0
    while len(out) < n:
        builder = patterns[i % len(patterns)]
        sent = builder(rng, f"{prefix}-{len(out) + 1}")
        i += 1
        text = sent.comments[1]
        if text in seen_texts:
            continue
        seen_texts.add(text)
        out.append(sent)
    return out


def overfit_corpus(n=50, seed=11):
    """Acyclic corpus for the overfit acceptance run (<= 15 words each)."""
    return generate(OVERFIT_PATTERNS, n, seed, "toy")


def ablation_corpus(n=500, seed=23):
    """Short-sentence corpus for the variant comparison run."""
    return generate(ABLATION_PATTERNS, n, seed, "abl")


def fixture_treebank(seed=5):
    """Small mixed treebank exercising every format feature, cycles included."""
    rng = np.random.default_rng(seed)
    sents = []
    for i, builder in enumerate(
        [transitive, oblique, shared_subject, gapping, relative_cycle,
         contraction, intransitive_oblique, relative_cycle, oblique, gapping],
        start=1,
    ):
        sents.append(builder(rng, f"fix-{i}"))
    return sents
