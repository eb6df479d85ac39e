import pytest

from sager.conllu import (
    ConlluError,
    DepEdge,
    delexicalize_label,
    parse_conllu,
    parse_id,
    relexicalize_label,
    write_conllu,
)

MINIMAL = "1\tcats\tcat\t_\t_\t_\t0\troot\t0:root\t_\n"

REENTRANT = """# sent_id = r1
1\tcats\tcat\t_\t_\t_\t2\tnsubj\t2:nsubj|4:nsubj:xsubj\t_
2\tpurr\tpurr\t_\t_\t_\t0\troot\t0:root\t_
3\tand\tand\t_\t_\t_\t4\tcc\t4:cc\t_
4\tsleep\tsleep\t_\t_\t_\t2\tconj\t2:conj\t_
"""


def test_minimal_sentence():
    sents = parse_conllu(MINIMAL)
    assert len(sents) == 1
    assert sents[0].gold == {DepEdge(0, 1, "root")}
    assert sents[0].tokens[0].form == "cats"


def test_reentrancy_two_heads():
    (sent,) = parse_conllu(REENTRANT)
    into_1 = {e for e in sent.gold if e.dep == 1}
    assert into_1 == {DepEdge(2, 1, "nsubj"), DepEdge(4, 1, "nsubj:xsubj")}


def test_label_with_colon_kept_whole():
    (sent,) = parse_conllu(REENTRANT)
    assert DepEdge(4, 1, "nsubj:xsubj") in sent.gold


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("1\tcats\tcat\t_\t_\t_\t0\troot\t0:root\n", "10 columns"),
        ("1\tcats\tcat\t_\t_\t_\t0\troot\troot\t_\n", "head:label"),
        ("1\tcats\tcat\t_\t_\t_\t0\troot\t9:root\t_\n", "not in sentence"),
        ("1\tcats\tcat\t_\t_\t_\t0\troot\t_\t_\n", "no enhanced head"),
        ("2\tcats\tcat\t_\t_\t_\t0\troot\t0:root\t_\n1\tx\tx\t_\t_\t_\t0\t_\t0:root\t_\n", "not increasing"),
    ],
)
def test_parse_errors_carry_line_numbers(text, fragment):
    with pytest.raises(ConlluError) as err:
        parse_conllu(text)
    assert fragment in str(err.value)
    assert "line" in str(err.value)


def test_unattached_allowed_for_system_files():
    text = MINIMAL + "2\tsat\tsit\t_\t_\t_\t_\t_\t_\t_\n"
    (sent,) = parse_conllu(text, allow_unattached=True)
    assert sent.gold == {DepEdge(0, 1, "root")}
    with pytest.raises(ConlluError):
        parse_conllu(text)


def test_empty_node_ids():
    assert parse_id("5.1") == (5, 1)
    assert parse_id("7") == (7, 0)
    with pytest.raises(ConlluError):
        parse_id("5.0")
    with pytest.raises(ConlluError):
        parse_id("x")


def test_write_empty_corpus():
    assert write_conllu([]) == ""


def test_deps_sorted_by_head_then_label():
    (sent,) = parse_conllu(REENTRANT)
    out = write_conllu([sent])
    line1 = [l for l in out.splitlines() if l.startswith("1\t")][0]
    assert line1.split("\t")[8] == "2:nsubj|4:nsubj:xsubj"


def test_roundtrip_fixture_corpus(fixture_treebank, fixture_text):
    assert parse_conllu(fixture_text) == fixture_treebank


def test_write_idempotent(fixture_text):
    again = write_conllu(parse_conllu(fixture_text))
    assert again == fixture_text


def test_multiword_ranges_and_comments_preserved(fixture_treebank, fixture_text):
    assert any(s.ranges for s in fixture_treebank)
    assert "didn't" in fixture_text
    assert "# sent_id = fix-1" in fixture_text


def test_empty_nodes_materialized_once(fixture_treebank):
    for sent in fixture_treebank:
        for pos, tok in enumerate(sent.tokens):
            if tok.is_empty:
                node = pos + 1
                assert any(e.dep == node for e in sent.gold)
                assert sum(t.id == tok.id for t in sent.tokens) == 1


# -- de/re-lexicalization ----------------------------------------------------

OBLIQUE = """1\the\the\t_\t_\t_\t2\tnsubj\t2:nsubj\t_
2\tsat\tsit\t_\t_\t_\t0\troot\t0:root\t_
3\tstill\tstill\t_\t_\t_\t2\tadvmod\t2:advmod\t_
4\tquite\tquite\t_\t_\t_\t5\tadvmod\t6:advmod\t_
5\tnear\tnear\t_\t_\t_\t6\tcase\t6:case\t_
6\tIn\tIn\t_\t_\t_\t2\tobl\t2:obl:near\t_
"""


def test_delexicalize_basic():
    (sent,) = parse_conllu(OBLIQUE)
    edge = DepEdge(2, 6, "obl:near")
    label, slot = delexicalize_label("obl:near", sent, edge)
    assert (label, slot) == ("obl:[X]", 4)
    assert relexicalize_label(label, slot, sent) == "obl:near"


def test_delexicalize_no_subtype():
    (sent,) = parse_conllu(OBLIQUE)
    assert delexicalize_label("nsubj", sent, DepEdge(2, 1, "nsubj")) == ("nsubj", None)


def test_delexicalize_case_insensitive_to_lemma():
    # lemma "In" (capitalized) still matches subtype "in"; round-trip exact
    (sent,) = parse_conllu(OBLIQUE)
    edge = DepEdge(2, 3, "advmod")
    label, slot = delexicalize_label("advmod:in", sent, edge)
    assert (label, slot) == ("advmod:[X]", 5)
    assert relexicalize_label(label, slot, sent) == "advmod:in"


def test_relexicalize_requires_slot():
    (sent,) = parse_conllu(OBLIQUE)
    with pytest.raises(ConlluError):
        relexicalize_label("obl:[X]", None, sent)
    assert relexicalize_label("root", None, sent) == "root"


def test_delex_relex_roundtrip_on_fixture(fixture_treebank):
    for sent in fixture_treebank:
        for edge in sent.gold:
            label, slot = delexicalize_label(edge.label, sent, edge)
            assert relexicalize_label(label, slot, sent) == edge.label


def test_delex_shrinks_vocabulary(fixture_treebank):
    before, after = set(), set()
    for sent in fixture_treebank:
        for edge in sent.gold:
            before.add(edge.label)
            after.add(delexicalize_label(edge.label, sent, edge)[0])
    assert len(after) < len(before)


def test_nearest_to_head_tie_break():
    # two tokens carry the matching lemma, both one position from the head
    # (node 2): the smaller index wins the tie
    text = (
        "1\ton\ton\t_\t_\t_\t4\tcase\t4:case\t_\n"
        "2\tsat\tsit\t_\t_\t_\t0\troot\t0:root\t_\n"
        "3\ton\ton\t_\t_\t_\t4\tcase\t4:case\t_\n"
        "4\tmats\tmat\t_\t_\t_\t2\tobl\t2:obl:on\t_\n"
    )
    (sent,) = parse_conllu(text)
    _, slot = delexicalize_label("obl:on", sent, DepEdge(2, 4, "obl:on"))
    assert slot == 0


def test_nearest_to_head_prefers_closer_match():
    text = (
        "1\ton\ton\t_\t_\t_\t4\tcase\t4:case\t_\n"
        "2\tcats\tcat\t_\t_\t_\t4\tnsubj\t4:nsubj\t_\n"
        "3\tsat\tsit\t_\t_\t_\t0\troot\t0:root\t_\n"
        "4\ton\ton\t_\t_\t_\t5\tcase\t5:case\t_\n"
        "5\tmats\tmat\t_\t_\t_\t3\tobl\t3:obl:on\t_\n"
    )
    (sent,) = parse_conllu(text)
    _, slot = delexicalize_label("obl:on", sent, DepEdge(3, 5, "obl:on"))
    assert slot == 3  # node 4 is distance 1 from head node 3; node 1 is distance 2
