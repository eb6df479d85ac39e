"""CoNLL-U reading and writing with enhanced-dependency (DEPS) support.

The DEPS column encodes the enhanced graph as ``head:label|head:label|...``
entries per token.  Empty nodes (ids like ``5.1``) are materialized as
ordinary tokens in document order; multiword range lines (``4-5``) carry no
graph structure but are preserved verbatim so files round-trip bit-exactly.

Node ids used throughout the package are dense integers: 0 is the virtual
root, and the token at position ``p`` (0-based, empty nodes included) is
node ``p + 1``.  Tokens keep their original CoNLL-U id for serialization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

PLACEHOLDER = "[X]"

_COLS = ("upos", "xpos", "feats", "head", "deprel", "misc")


class ConlluError(ValueError):
    """Malformed CoNLL-U input; message carries the offending line number."""


def parse_id(text, lineno=0):
    """Parse a CoNLL-U id (``k`` or ``k.m``) into a ``(k, m)`` pair."""
    try:
        if "." in text:
            k, m = text.split(".")
            k, m = int(k), int(m)
            if m < 1:
                raise ValueError
        else:
            k, m = int(text), 0
        if k < 0:
            raise ValueError
    except ValueError:
        raise ConlluError(f"line {lineno}: bad token id {text!r}") from None
    return (k, m)


def format_id(cid):
    k, m = cid
    return f"{k}.{m}" if m else str(k)


@dataclass(frozen=True, order=True)
class DepEdge:
    """One enhanced dependency arc in dense node-id space (0 = root)."""

    head: int
    dep: int
    label: str

    def __post_init__(self):
        if self.head == self.dep:
            raise ConlluError(f"self-loop edge on node {self.dep}")
        if not self.label:
            raise ConlluError(f"empty label on edge into node {self.dep}")


@dataclass
class Token:
    id: tuple  # (k, m); m >= 1 marks an empty node
    form: str
    lemma: str
    cols: dict = field(default_factory=dict)  # remaining columns, verbatim

    def __post_init__(self):
        for key in _COLS:
            self.cols.setdefault(key, "_")

    @property
    def is_empty(self):
        return self.id[1] >= 1


@dataclass
class ParsedSentence:
    tokens: list
    gold: frozenset  # of DepEdge
    comments: list = field(default_factory=list)
    ranges: list = field(default_factory=list)  # (first k, raw line)

    @property
    def n_nodes(self):
        return len(self.tokens) + 1

    @property
    def sent_id(self):
        for c in self.comments:
            if c.startswith("# sent_id"):
                return c.split("=", 1)[1].strip()
        return None

    def forms(self):
        return [t.form for t in self.tokens]

    def cid_of(self, node):
        """Dense node id back to the CoNLL-U id tuple."""
        return (0, 0) if node == 0 else self.tokens[node - 1].id


def _parse_deps(entry, node_of, lineno, dep_node):
    edges = []
    for item in entry.split("|"):
        head_txt, sep, label = item.partition(":")
        if not sep or not label:
            raise ConlluError(f"line {lineno}: DEPS entry {item!r} is not head:label")
        head_cid = parse_id(head_txt, lineno)
        if head_cid not in node_of:
            raise ConlluError(f"line {lineno}: DEPS head {head_txt!r} not in sentence")
        if node_of[head_cid] == dep_node:
            raise ConlluError(f"line {lineno}: DEPS entry {item!r} points at itself")
        edges.append(DepEdge(node_of[head_cid], dep_node, label))
    return edges


def parse_conllu(text, allow_unattached=False):
    """Parse CoNLL-U text into a list of ParsedSentence.

    Gold files must satisfy EUD connectivity (every token has at least one
    incoming enhanced edge); pass ``allow_unattached=True`` for system
    output, where DEPS may be ``_`` on tokens the parser left unattached.
    """
    sentences = []
    block, start = [], 1
    lines = text.split("\n")
    for i, line in enumerate(lines, start=1):
        if line.strip() == "":
            if block:
                sentences.append(_parse_block(block, start, allow_unattached))
                block = []
            start = i + 1
        else:
            if not block:
                start = i
            block.append((i, line))
    if block:
        sentences.append(_parse_block(block, start, allow_unattached))
    return sentences


def _parse_block(numbered, start, allow_unattached):
    comments, ranges, raw_tokens = [], [], []
    for lineno, line in numbered:
        if line.startswith("#"):
            comments.append(line)
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluError(f"line {lineno}: expected 10 columns, got {len(cols)}")
        if "-" in cols[0]:
            first = cols[0].split("-")[0]
            try:
                first_k = int(first)
            except ValueError:
                raise ConlluError(f"line {lineno}: bad range id {cols[0]!r}") from None
            ranges.append((first_k, line))
            continue
        raw_tokens.append((lineno, cols))

    tokens, node_of = [], {(0, 0): 0}
    prev = (0, 0)
    for lineno, cols in raw_tokens:
        cid = parse_id(cols[0], lineno)
        if cid <= prev:
            raise ConlluError(f"line {lineno}: token id {cols[0]} not increasing")
        prev = cid
        tokens.append(Token(cid, cols[1], cols[2], dict(zip(_COLS, cols[3:8] + [cols[9]]))))
        node_of[cid] = len(tokens)

    edges = []
    deps_col = {}
    for (lineno, cols), tok in zip(raw_tokens, tokens):
        deps_col[tok.id] = (lineno, cols[8])
    for tok in tokens:
        lineno, entry = deps_col[tok.id]
        dep_node = node_of[tok.id]
        if entry == "_":
            if not allow_unattached:
                raise ConlluError(
                    f"line {lineno}: token {format_id(tok.id)} has no enhanced head"
                )
            continue
        edges.extend(_parse_deps(entry, node_of, lineno, dep_node))

    return ParsedSentence(tokens, frozenset(edges), comments, ranges)


def write_conllu(sentences):
    """Render sentences back to CoNLL-U text; inverse of parse_conllu.

    DEPS entries are sorted by head id then label, giving a canonical form:
    write(parse(write(s))) == write(s).
    """
    out = []
    for sent in sentences:
        by_dep = {}
        for e in sent.gold:
            by_dep.setdefault(e.dep, []).append(e)
        range_at = {}
        for first_k, raw in sent.ranges:
            range_at.setdefault(first_k, []).append(raw)
        out.extend(sent.comments)
        for pos, tok in enumerate(sent.tokens):
            if not tok.is_empty:
                out.extend(range_at.get(tok.id[0], ()))
            incoming = by_dep.get(pos + 1, [])
            incoming.sort(key=lambda e: (sent.cid_of(e.head), e.label))
            deps = "|".join(f"{format_id(sent.cid_of(e.head))}:{e.label}" for e in incoming)
            c = tok.cols
            out.append(
                "\t".join(
                    [
                        format_id(tok.id),
                        tok.form,
                        tok.lemma,
                        c.get("upos", "_"),
                        c.get("xpos", "_"),
                        c.get("feats", "_"),
                        c.get("head", "_"),
                        c.get("deprel", "_"),
                        deps or "_",
                        c.get("misc", "_"),
                    ]
                )
            )
        out.append("")
    return "\n".join(out) + ("\n" if out else "")


def delexicalize_label(label, sentence, edge):
    """Replace a lexical label subtype with a placeholder.

    If the part after the last ``:`` equals the casefolded lemma of some
    token, it is replaced by ``[X]`` and the 0-based index of the matched
    token is returned.  Among matching tokens the one nearest the edge's
    head wins (smaller index on distance ties).  Returns (label, None)
    when nothing matches.
    """
    if ":" not in label:
        return label, None
    base, subtype = label.rsplit(":", 1)
    if not subtype or PLACEHOLDER in subtype:
        return label, None
    matches = [i for i, t in enumerate(sentence.tokens) if t.lemma.casefold() == subtype]
    if not matches:
        return label, None
    head_pos = edge.head  # dense id doubles as the position scale
    slot = min(matches, key=lambda i: (abs((i + 1) - head_pos), i))
    return f"{base}:{PLACEHOLDER}", slot


def relexicalize_label(label, slot, sentence):
    """Substitute the slot token's lemma back into a placeholder label."""
    if PLACEHOLDER not in label:
        return label
    if slot is None:
        raise ConlluError(f"label {label!r} has a placeholder but no slot")
    return label.replace(PLACEHOLDER, sentence.tokens[slot].lemma.casefold())
