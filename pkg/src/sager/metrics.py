"""ELAS, graph-level matching score, and hierarchy accuracy.

ELAS here is labeled micro-F1 over enhanced edges under gold segmentation
(identical token inventories are required; the official script's alignment
machinery is deliberately out of scope).
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import DepGraph, break_cycles, build_hierarchy, reachable_levels


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusScore:
    precision: float
    recall: float
    f1: float
    matched: int
    n_gold: int
    n_system: int


def score_from_counts(matched, n_gold, n_system):
    p = matched / n_system if n_system else 0.0
    r = matched / n_gold if n_gold else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return CorpusScore(p, r, f1, matched, n_gold, n_system)


def _check_parallel(gold, system):
    if len(gold) != len(system):
        raise AlignmentError(f"{len(gold)} gold sentences vs {len(system)} system")
    for i, (g, s) in enumerate(zip(gold, system)):
        if [t.id for t in g.tokens] != [t.id for t in s.tokens]:
            raise AlignmentError(f"sentence {i}: token inventories differ")


def _edge_set(sentence):
    return {(e.head, e.dep, e.label) for e in sentence.gold}


def elas(gold, system):
    """Labeled F1 over enhanced edges, micro-averaged over the corpus."""
    _check_parallel(gold, system)
    matched = n_gold = n_system = 0
    for g, s in zip(gold, system):
        ge, se = _edge_set(g), _edge_set(s)
        matched += len(ge & se)
        n_gold += len(ge)
        n_system += len(se)
    return score_from_counts(matched, n_gold, n_system)


def gms(gold, system):
    """F1 over exactly matched whole graphs (labels included)."""
    _check_parallel(gold, system)
    matched = sum(_edge_set(g) == _edge_set(s) for g, s in zip(gold, system))
    return score_from_counts(matched, len(gold), len(system))


def hierarchy_accuracy(gold, system):
    """Fraction of attached system nodes on their gold stratum.

    Both sides are cycle-broken and stratified by longest root distance;
    the system side may contain unattached or root-detached nodes, which
    count neither way.  The root itself is excluded.
    """
    _check_parallel(gold, system)
    correct = attached = 0
    gold_nodes = 0
    for g, s in zip(gold, system):
        dag, _ = break_cycles(DepGraph(g.n_nodes, g.gold))
        gold_levels = build_hierarchy(dag).levels
        sys_levels = reachable_levels(DepGraph(s.n_nodes, s.gold))
        gold_nodes += g.n_nodes - 1
        for v in range(1, g.n_nodes):
            if sys_levels[v] is None:
                continue
            attached += 1
            correct += sys_levels[v] == gold_levels[v]
    if attached == 0:
        return 1.0 if gold_nodes == 0 else 0.0
    return correct / attached
