"""Training and decoding: teacher forcing over oracle hierarchies,
semi-autoregressive greedy generation, and the ablation decoding modes."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import metrics
from .autodiff import Tape, backward
from .conllu import (
    PLACEHOLDER,
    DepEdge,
    ParsedSentence,
    delexicalize_label,
    relexicalize_label,
)
from .graph import DepGraph, break_cycles, build_hierarchy
from .model import AUTO_VARIANTS, ConfigError, EdgeBatch, Parser, Vocab, clone_state, load_state
from .optim import Adam, TrainingError

log = logging.getLogger("sager")


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 16
    lr_main: float = 1e-3
    lr_embed: float = 2e-5
    lr_decay: float = 0.97
    seed: int = 0

    def __post_init__(self):
        for name in ("epochs", "batch_size", "lr_main", "lr_embed", "lr_decay"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")


@dataclass
class StepRecord:
    selected: list  # word indices chosen this step
    arc_probs: np.ndarray  # [committed nodes x new nodes]


@dataclass
class DecodeResult:
    graph: DepGraph
    steps: list
    n_steps: int
    unattached: list  # word indices never selected


@dataclass
class TrainItem:
    sentence: ParsedSentence
    word_ids: np.ndarray
    hierarchy_nodes: list  # gold stratification: list of node-id lists
    edges: list  # (head, dep, label_id) over the cycle-broken gold graph
    components: list = field(default_factory=list)  # ordering used this epoch


def build_model(train_sentences, config, dtype=np.float32, seed=0):
    """Vocabularies from the training corpus (labels de-lexicalized), then
    a freshly initialized Parser."""
    words = Vocab.words(train_sentences)
    label_set = set()
    for sent in train_sentences:
        for e in sent.gold:
            label_set.add(delexicalize_label(e.label, sent, e)[0])
    labels = Vocab(sorted(label_set))
    return Parser(config, words, labels, dtype=dtype, seed=seed)


def prepare(sentences, model):
    """Oracle hierarchies for teacher forcing; overlong sentences whose gold
    edges reach past the truncation limit are skipped with a warning."""
    limit = model.config.max_words
    items = []
    for sent in sentences:
        tokens = sent.tokens
        if len(tokens) > limit:
            if any(e.head > limit or e.dep > limit for e in sent.gold):
                log.warning(
                    "skipping sentence %s: gold edges past the %d-word limit",
                    sent.sent_id or "?", limit,
                )
                continue
            sent = ParsedSentence(tokens[:limit], sent.gold, sent.comments, sent.ranges)
        dag, _ = break_cycles(DepGraph(sent.n_nodes, sent.gold))
        hier = build_hierarchy(dag)
        edges = []
        for e in sorted(dag.edges):
            delex, _ = delexicalize_label(e.label, sent, e)
            edges.append((e.head, e.dep, model.labels.id(delex)))
        nodes = [list(c.nodes) for c in hier.components]
        items.append(TrainItem(sent, model.word_ids(sent), nodes, edges, nodes))
    return items


def order_components(item, variant, epoch, total_epochs, rng):
    """Per-epoch generation order: gold strata for semi-auto, flattened
    singleton sequences for the fully autoregressive variants."""
    if variant not in AUTO_VARIANTS:
        return item.hierarchy_nodes
    comps = [[0]]
    randomize = variant == "auto_random" or (
        variant == "auto_mixed" and epoch < total_epochs // 2
    )
    for group in item.hierarchy_nodes[1:]:
        nodes = list(group)
        if randomize:
            rng.shuffle(nodes)
        comps.extend([v] for v in nodes)
    return comps


def _layout(components):
    order = [v for comp in components for v in comp]
    pos = {v: i for i, v in enumerate(order)}
    levels = np.concatenate(
        [np.full(len(c), t, dtype=np.intp) for t, c in enumerate(components)]
    )
    starts = np.cumsum([0] + [len(c) for c in components])
    return order, pos, levels, starts


def _block_x0(model, s, order, levels):
    """Initial embeddings for nodes in generation order (root first)."""
    word_rows = ad.take(s, np.array([v - 1 for v in order[1:]], dtype=np.intp))
    rows = ad.concat([model.root_row(), word_rows], axis=0)
    return model.node_embeddings(rows, levels)


def teacher_force_loss(model, item, train=True, rng=None, component_filter=None):
    """Negative log joint probability of the gold component sequence.

    Node term: binary cross-entropy of the pooled selection probabilities
    against stratum membership, over not-yet-selected words.  Arc term:
    per-pair binary cross-entropy against gold incidence.  Label term:
    cross-entropy on gold arcs.  Terms are summed over strata.
    """
    if model.config.variant == "nonauto_baseline":
        return _nonauto_loss(model, item, train, rng)
    comps = item.components
    n_words = len(item.word_ids)
    order, pos, levels, starts = _layout(comps)

    s = model.encode(item.word_ids, train, rng)
    x0 = _block_x0(model, s, order, levels)
    eb = None
    if item.edges:
        eb = EdgeBatch.build(
            [pos[h] for h, _, _ in item.edges],
            [pos[d] for _, d, _ in item.edges],
            [z for _, _, z in item.edges],
        )
    h_layers = model.run_block(x0, levels, None, eb, train, rng)
    h_final = h_layers[-1]

    by_level = [[] for _ in comps]
    for h, d, z in item.edges:
        by_level[levels[pos[d]]].append((h, d, z))

    total = None
    selected = np.zeros(n_words, dtype=bool)
    for t in range(1, len(comps)):
        members = np.zeros(n_words, dtype=bool)
        for v in comps[t]:
            members[v - 1] = True
        if component_filter is None or t in component_filter:
            start, end = int(starts[t]), int(starts[t + 1])
            prev = np.arange(int(starts[t - 1]), start, dtype=np.intp)
            h_prev = ad.take(h_final, prev)
            scores = model.selection_scores(h_prev, s, train, rng)
            pooled = ad.amax(scores, axis=0)
            remaining = (~selected).astype(s.data.dtype)
            node_term = ad.tsum(
                ad.mul_const(ad.sigmoid_bce(pooled, members.astype(s.data.dtype)), remaining)
            )

            h_all = ad.take(h_final, np.arange(start, dtype=np.intp))
            ctx = (
                levels[:start],
                [ad.take(layer, np.arange(start, dtype=np.intp)) for layer in h_layers],
            )
            x0_t = ad.take(x0, np.arange(start, end, dtype=np.intp))
            d_layers = model.run_block(x0_t, levels[start:end], ctx, None, train, rng)
            arc_logits, lab_logits = model.edge_scores(h_all, d_layers[-1], train, rng)

            incidence = np.zeros((start, end - start), dtype=s.data.dtype)
            rows, cols, zs = [], [], []
            for h, d, z in by_level[t]:
                incidence[pos[h], pos[d] - start] = 1.0
                rows.append(pos[h])
                cols.append(pos[d] - start)
                zs.append(z)
            arc_term = ad.tsum(ad.sigmoid_bce(arc_logits, incidence))
            sel = _take_pair_rows(lab_logits, rows, cols)
            label_term = -ad.tsum(ad.take_index_rows(ad.log_softmax(sel, axis=-1), zs))

            part = node_term + arc_term + label_term
            total = part if total is None else total + part
        selected |= members
    if total is None:
        total = ad.tsum(ad.mul_const(s, 0.0))
    return total


def _take_pair_rows(t, rows, cols):
    """Rows t[rows[i], cols[i], :] of a rank-3 tensor as a matrix."""
    flat = ad.reshape(t, (t.data.shape[0] * t.data.shape[1], t.data.shape[2]))
    idx = np.asarray(rows, dtype=np.intp) * t.data.shape[1] + np.asarray(cols, dtype=np.intp)
    return ad.take(flat, idx)


def _nonauto_loss(model, item, train, rng):
    """One-shot baseline: biaffine scores over all (head, dependent) word
    pairs with no hierarchy and no decoder, trained on the raw gold graph."""
    s = model.encode(item.word_ids, train, rng)
    n = len(item.word_ids)
    heads = ad.concat([model.root_row(), s], axis=0)
    arc_logits, lab_logits = model.edge_scores(heads, s, train, rng)
    incidence = np.zeros((n + 1, n), dtype=s.data.dtype)
    rows, cols, zs = [], [], []
    for e in sorted(item.sentence.gold):
        delex, _ = delexicalize_label(e.label, item.sentence, e)
        incidence[e.head, e.dep - 1] = 1.0
        rows.append(e.head)
        cols.append(e.dep - 1)
        zs.append(model.labels.id(delex))
    arc_term = ad.tsum(ad.sigmoid_bce(arc_logits, incidence))
    sel = _take_pair_rows(lab_logits, rows, cols)
    label_term = -ad.tsum(ad.take_index_rows(ad.log_softmax(sel, axis=-1), zs))
    return arc_term + label_term


class _Cache:
    """Committed-node layer values during decoding; grows one block per step."""

    def __init__(self, model):
        self.model = model
        self.levels = []
        self.nodes = []
        self.blocks = [[] for _ in range(model.config.layers + 1)]

    def append(self, levels, nodes, layers):
        self.levels.extend(levels)
        self.nodes.extend(nodes)
        for store, tensor in zip(self.blocks, layers):
            store.append(tensor)

    def ctx(self):
        stacked = [
            parts[0] if len(parts) == 1 else ad.concat(parts, axis=0)
            for parts in self.blocks
        ]
        return (np.asarray(self.levels, dtype=np.intp), stacked), stacked[-1]


def decode(model, sentence, mode=None):
    """Greedy generation, stratum by stratum; dropout off.

    Stops when no word clears the 0.5 selection threshold (auto variants
    take the single best remaining word instead).  Arcs above 0.5 are
    committed per pair; a node that would end up headless gets its argmax
    head, so every selected node is attached.
    """
    variant = model.config.variant
    if mode is not None and mode != variant:
        raise ConfigError(f"decode mode {mode!r} does not match model variant {variant!r}")
    if variant == "nonauto_baseline":
        return _decode_nonauto(model, sentence)

    n_total = len(sentence.tokens)
    n = min(n_total, model.config.max_words)
    ids = np.array([model.words.id(t.form) for t in sentence.tokens[:n]], dtype=np.intp)
    s = model.encode(ids)

    cache = _Cache(model)
    root_layers = model.run_block(model.node_embeddings(model.root_row(), [0]), [0], None, None)
    cache.append([0], [0], root_layers)
    last_final = root_layers[-1]

    selected = np.zeros(n, dtype=bool)
    edges, steps = [], []
    for t in range(1, n + 1):
        probs = ad.sigmoid(ad.amax(model.selection_scores(last_final, s), axis=0)).data
        if variant in AUTO_VARIANTS:
            if selected.all():
                break
            masked = np.where(selected, -np.inf, probs)
            chosen = [int(np.argmax(masked))]
        else:
            chosen = [w for w in range(n) if probs[w] > 0.5 and not selected[w]]
        if not chosen:
            break

        new_levels = [t] * len(chosen)
        x0_new = model.node_embeddings(ad.take(s, np.asarray(chosen, dtype=np.intp)), new_levels)
        ctx, h_all = cache.ctx()
        d_layers = model.run_block(x0_new, new_levels, ctx, None)
        arc_logits, lab_logits = model.edge_scores(h_all, d_layers[-1])
        aprob = ad.sigmoid(arc_logits).data

        eb_heads, eb_deps, eb_labels = [], [], []
        for i, w in enumerate(chosen):
            picked = aprob[:, i] > 0.5
            if not picked.any():
                picked[int(np.argmax(aprob[:, i]))] = True
            for p in np.flatnonzero(picked):
                z = int(np.argmax(lab_logits.data[p, i]))
                edges.append(DepEdge(cache.nodes[p], w + 1, model.labels.items[z]))
                eb_heads.append(int(p))
                eb_deps.append(i)
                eb_labels.append(z)

        eb = EdgeBatch.build(eb_heads, eb_deps, eb_labels)
        h_layers = model.run_block(x0_new, new_levels, ctx, eb)
        cache.append(new_levels, [w + 1 for w in chosen], h_layers)
        last_final = h_layers[-1]
        selected[chosen] = True
        steps.append(StepRecord(chosen, aprob))

    level_of = dict(zip(cache.nodes, cache.levels))
    for e in edges:
        assert level_of[e.head] < level_of[e.dep], "edge into an earlier stratum"
    unattached = [w for w in range(n_total) if w >= n or not selected[w]]
    graph = DepGraph(n_total + 1, frozenset(edges))
    return DecodeResult(graph, steps, len(steps), unattached)


def decode_variant(model, sentence, mode):
    """Decode under an explicitly named variant (must match the model)."""
    return decode(model, sentence, mode=mode)


def _decode_nonauto(model, sentence):
    n_total = len(sentence.tokens)
    n = min(n_total, model.config.max_words)
    ids = np.array([model.words.id(t.form) for t in sentence.tokens[:n]], dtype=np.intp)
    s = model.encode(ids)
    heads = ad.concat([model.root_row(), s], axis=0)
    arc_logits, lab_logits = model.edge_scores(heads, s)
    aprob = ad.sigmoid(arc_logits).data
    edges = []
    for i in range(n):
        picked = aprob[:, i] > 0.5
        picked[i + 1] = False  # no self-loop
        if not picked.any():
            col = aprob[:, i].copy()
            col[i + 1] = -np.inf
            picked[int(np.argmax(col))] = True
        for p in np.flatnonzero(picked):
            z = int(np.argmax(lab_logits.data[p, i]))
            edges.append(DepEdge(int(p), i + 1, model.labels.items[z]))
    unattached = list(range(n, n_total))
    graph = DepGraph(n_total + 1, frozenset(edges))
    return DecodeResult(graph, [StepRecord(list(range(n)), aprob)], 1, unattached)


def predictions_to_sentence(model, sentence, result):
    """Re-lexicalize predicted labels and attach them to a copy of the input.

    Placeholder labels resolve their slot from a predicted case/mark
    dependent of the edge's dependent, falling back to the token nearest
    the dependent.
    """
    children = {}
    for e in result.graph.edges:
        children.setdefault(e.head, []).append(e)
    final = []
    for e in sorted(result.graph.edges):
        label = e.label
        if PLACEHOLDER in label:
            slot = _placeholder_slot(sentence, e, children)
            label = relexicalize_label(label, slot, sentence)
        final.append(DepEdge(e.head, e.dep, label))
    return ParsedSentence(sentence.tokens, frozenset(final), sentence.comments, sentence.ranges)


def _placeholder_slot(sentence, edge, children):
    marks = [
        c.dep - 1
        for c in children.get(edge.dep, ())
        if c.label.split(":")[0] in ("case", "mark")
    ]
    pool = marks or [i for i in range(len(sentence.tokens)) if i != edge.dep - 1]
    if not pool:
        return None
    return min(pool, key=lambda i: (abs(i + 1 - edge.dep), i))


def worker_count():
    env = os.environ.get("SAGER_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def parse_corpus(model, sentences, threads=None):
    """Decode a corpus; output order matches input order regardless of the
    thread schedule (decoding is pure per sentence)."""
    threads = worker_count() if threads is None else threads

    def one(sent):
        return predictions_to_sentence(model, sent, decode(model, sent))

    if threads <= 1 or len(sentences) < 2:
        return [one(s) for s in sentences]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, sentences))


def train(model, train_sentences, dev_sentences, cfg, log_line=None, early_stop=None):
    """Teacher-forcing training with dev-set ELAS model selection.

    Emits one log line per epoch: ``epoch<TAB>train_loss<TAB>dev_elas<TAB>lr``.
    Returns the per-epoch history; the model ends loaded with the best
    dev-ELAS parameters.
    """
    items = prepare(train_sentences, model)
    if not items:
        raise TrainingError("no trainable sentences after truncation filtering")
    rng = np.random.default_rng(cfg.seed)
    emb, rest = model.param_groups()
    opt = Adam([(emb, cfg.lr_embed), (rest, cfg.lr_main)])
    variant = model.config.variant
    best_score, best_state = -1.0, None
    history = []

    for epoch in range(cfg.epochs):
        scale = cfg.lr_decay ** epoch
        for item in items:
            item.components = order_components(item, variant, epoch, cfg.epochs, rng)
        order = rng.permutation(len(items))
        epoch_loss = 0.0
        for b0 in range(0, len(order), cfg.batch_size):
            batch = order[b0 : b0 + cfg.batch_size]
            opt.zero_grad()
            for idx in batch:
                with Tape() as tape:
                    loss = teacher_force_loss(model, items[idx], train=True, rng=rng)
                value = float(loss.data)
                if not np.isfinite(value):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch}, batch {b0 // cfg.batch_size}"
                    )
                backward(tape, loss)
                epoch_loss += value
            opt.step(lr_scale=scale, grad_scale=1.0 / len(batch))

        system = [predictions_to_sentence(model, s, decode(model, s)) for s in dev_sentences]
        dev_elas = metrics.elas(dev_sentences, system).f1
        dev_gms = metrics.gms(dev_sentences, system).f1
        train_loss = epoch_loss / len(items)
        history.append({"epoch": epoch, "loss": train_loss, "elas": dev_elas, "gms": dev_gms})
        if log_line:
            log_line(f"{epoch}\t{train_loss:.6f}\t{100 * dev_elas:.2f}\t{cfg.lr_main * scale:.8f}")
        if dev_elas > best_score:
            best_score, best_state = dev_elas, clone_state(model)
        if early_stop and early_stop(history[-1]):
            break

    if best_state is not None:
        load_state(model, best_state)
    return history


def gradient_check_blocks(seed=0):
    """Finite-difference checks for every learned block at 64-bit precision.

    Returns block name -> max relative gradient error; used by the
    ``gradcheck`` CLI subcommand and the acceptance suite.
    """
    from .conllu import Token
    from .model import ModelConfig

    rng = np.random.default_rng(seed)
    tokens = [
        Token((1, 0), "alpha", "alpha"),
        Token((2, 0), "beta", "beta"),
        Token((3, 0), "gamma", "gamma"),
    ]
    gold = frozenset(
        {
            DepEdge(0, 1, "root"),
            DepEdge(1, 2, "aa"),
            DepEdge(1, 3, "bb"),
            DepEdge(2, 3, "aa"),
        }
    )
    sent = ParsedSentence(tokens, gold)
    cfg = ModelConfig(d=6, layers=1, heads=2, encoder_layers=1, max_depth=8)
    model = build_model([sent], cfg, dtype=np.float64, seed=seed)
    item = prepare([sent], model)[0]

    def const(*shape):
        return ad.Tensor(rng.standard_normal(shape))

    d = cfg.d
    x0 = const(4, d)
    levels = np.array([0, 1, 1, 2], dtype=np.intp)
    eb = EdgeBatch.build([0, 0, 1], [1, 2, 3], [0, 1, 0])
    h_const, s_const = const(3, d), const(4, d)

    prefix = lambda p: [par for name, par in sorted(model.params.items()) if name.startswith(p)]
    checks = {
        "encoder_block": (
            lambda: ad.tsum(model.encode(np.array([1, 2, 3, 1]))),
            prefix("enc0.") + [model.params["emb"]],
        ),
        "mp_layer": (
            lambda: ad.tsum(model.run_block(x0, levels, None, eb)[-1]),
            prefix("dec0.") + [model.params["edge_u"]],
        ),
        "select_nodes": (
            lambda: ad.tsum(model.selection_scores(h_const, s_const)),
            [model.params["sel_w1"], model.params["sel_w2"]],
        ),
        "score_edges": (
            lambda: (lambda a, l: ad.tsum(a) + ad.tsum(l))(*model.edge_scores(h_const, s_const)),
            prefix("arc_") + prefix("lab_") + prefix("biaf_"),
        ),
        "full_loss": (
            lambda: teacher_force_loss(model, item, train=False),
            model.parameters(),
        ),
    }
    return {name: ad.grad_check(f, ps) for name, (f, ps) in checks.items()}
