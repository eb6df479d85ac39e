"""Learned components: encoder, graph-transformer decoder, node selector,
and the deep biaffine arc/label scorer.

The decoder works on blocks.  A block is a group of nodes processed
together (one stratum at decode time, or every node at once under teacher
forcing); earlier nodes enter as per-layer context tensors.  Because a
node only ever attends to nodes in its own or earlier strata, context
values computed once stay valid forever, which is what makes the block
formulation exact and fast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Param

VARIANTS = (
    "full",
    "auto_random",
    "auto_word",
    "auto_mixed",
    "no_implicit",
    "no_same_level_implicit",
    "no_explicit",
    "no_hier_pos",
    "nonauto_baseline",
)

AUTO_VARIANTS = ("auto_random", "auto_word", "auto_mixed")

UNK = "<unk>"


class ConfigError(ValueError):
    pass


class VocabularyError(KeyError):
    pass


@dataclass
class ModelConfig:
    d: int = 64
    layers: int = 2  # decoder depth
    heads: int = 4
    encoder_layers: int = 2
    variant: str = "full"
    dropout_repr: float = 0.1
    dropout_output: float = 0.3
    max_depth: int = 64  # initial hierarchy-encoding table size, grown on demand
    max_words: int = 100

    def __post_init__(self):
        if self.d % self.heads:
            raise ConfigError(f"d={self.d} not divisible by heads={self.heads}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")


class Vocab:
    """Immutable string table; index 0 is the unknown marker for word vocabs."""

    def __init__(self, items, with_unk=False):
        self.items = ([UNK] if with_unk else []) + [s for s in items if s != UNK]
        self.index = {s: i for i, s in enumerate(self.items)}
        self.with_unk = with_unk

    def __len__(self):
        return len(self.items)

    def id(self, s):
        got = self.index.get(s)
        if got is None:
            if self.with_unk:
                return 0
            raise VocabularyError(f"unknown label {s!r}")
        return got

    @classmethod
    def words(cls, sentences):
        forms = sorted({t.form for s in sentences for t in s.tokens})
        return cls(forms, with_unk=True)


def sinusoid_table(n, d, dtype):
    """Standard fixed sin/cos position encodings for positions 0..n-1."""
    pos = np.arange(n, dtype=np.float64)[:, None]
    i = np.arange(d // 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * i / d)
    table = np.zeros((n, d), dtype=np.float64)
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle)
    return table.astype(dtype)


@dataclass
class EdgeBatch:
    """Explicit edges of one block pass, grouped by label for the enrichment
    matmuls and uniquified by (dep, head) pair for the scatter paths."""

    label_runs: list  # (label_id, head positions array) in label order
    pair_deps: np.ndarray  # unique pair dep positions (block-local)
    pair_heads: np.ndarray  # unique pair head positions (global key index)
    seg: np.ndarray  # edge row -> unique pair row

    @classmethod
    def build(cls, heads, deps, labels):
        heads = np.asarray(heads, dtype=np.intp)
        deps = np.asarray(deps, dtype=np.intp)
        labels = np.asarray(labels, dtype=np.intp)
        order = np.lexsort((heads, deps, labels))
        heads, deps, labels = heads[order], deps[order], labels[order]
        runs = []
        for z in np.unique(labels):
            runs.append((int(z), heads[labels == z]))
        key = deps * (heads.max() + 1 if len(heads) else 1) + heads
        uniq, seg = np.unique(key, return_inverse=True)
        first = np.zeros(len(uniq), dtype=np.intp)
        first[seg[::-1]] = np.arange(len(seg) - 1, -1, -1)
        return cls(runs, deps[first], heads[first], seg)


class Parser:
    """All trainable state plus the forward computations of the model."""

    def __init__(self, config, words, labels, dtype=np.float32, seed=0):
        self.config = config
        self.words = words
        self.labels = labels
        self.dtype = dtype
        self.params = {}
        self._pe_cache = {}
        rng = np.random.default_rng(seed)
        d = config.d

        def xavier(name, *shape):
            fan_in, fan_out = shape[-2], shape[-1]
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            self.params[name] = Param(name, rng.uniform(-bound, bound, shape).astype(dtype))

        def normal(name, *shape):
            self.params[name] = Param(name, (rng.normal(0.0, 0.02, shape)).astype(dtype))

        def zeros(name, *shape):
            self.params[name] = Param(name, np.zeros(shape, dtype=dtype))

        normal("emb", len(words), d)
        normal("root", d)
        for kind, n in (("enc", config.encoder_layers), ("dec", config.layers)):
            for l in range(n):
                p = f"{kind}{l}."
                for w in ("wq", "wk", "wv", "wo"):
                    xavier(p + w, d, d)
                xavier(p + "ffn_w1", d, 4 * d)
                zeros(p + "ffn_b1", 4 * d)
                xavier(p + "ffn_w2", 4 * d, d)
                zeros(p + "ffn_b2", d)
                zeros(p + "g_attn")
                zeros(p + "g_ffn")
        xavier("edge_u", len(labels), d, d)
        xavier("sel_w1", d, d)
        xavier("sel_w2", d, d)
        for view in ("arc_h", "arc_d", "lab_h", "lab_d"):
            xavier(view + "_w", d, d)
            zeros(view + "_b", d)
        xavier("biaf_arc", d + 1, d + 1)
        xavier("biaf_lab", len(labels), d + 1, d + 1)

    # -- plumbing -----------------------------------------------------------

    def _p(self, name):
        return self.params[name]

    def parameters(self):
        return list(self.params.values())

    def param_groups(self):
        """(embedding-table params, everything else) for the two LR groups."""
        emb = [self.params["emb"]]
        rest = [p for n, p in sorted(self.params.items()) if n != "emb"]
        return emb, rest

    def _pe(self, n):
        have = self._pe_cache.get("table")
        if have is None or have.shape[0] < n:
            size = max(n, self.config.max_depth)
            self._pe_cache["table"] = sinusoid_table(size, self.config.d, self.dtype)
        return self._pe_cache["table"]

    def word_ids(self, sentence):
        return np.array([self.words.id(t.form) for t in sentence.tokens], dtype=np.intp)

    # -- encoder ------------------------------------------------------------

    def encode(self, word_ids, train=False, rng=None):
        """Token embeddings + word-position encodings through the encoder
        self-attention stack; row n represents source word n."""
        n = len(word_ids)
        if n > self.config.max_words:
            raise ConfigError(f"sentence length {n} exceeds limit {self.config.max_words}")
        x = ad.take(self._p("emb"), word_ids)
        x = ad.add_const(x, self._pe(n)[:n])
        full = np.ones((n, n), dtype=bool)
        for l in range(self.config.encoder_layers):
            x = self._attn_ffn(f"enc{l}.", x, x, full, None, train, rng)
        return x

    # -- decoder ------------------------------------------------------------

    def node_embeddings(self, rows, levels):
        """x^(0): word (or root) vector plus the hierarchy encoding P[t]."""
        if self.config.variant == "no_hier_pos":
            return rows
        levels = np.asarray(levels, dtype=np.intp)
        table = self._pe(int(levels.max()) + 1 if len(levels) else 1)
        return ad.add_const(rows, table[levels])

    def root_row(self):
        return ad.reshape(self._p("root"), (1, self.config.d))

    def attention_mask(self, ctx_levels, block_levels, edges, n_ctx):
        """Allowed key positions per block node under the active variant.

        Implicit neighbourhoods: every node of an earlier stratum plus the
        own stratum including self (restricted by the ablation variants);
        explicit heads are always allowed.
        """
        lv_all = np.concatenate([ctx_levels, block_levels])
        lv_i = np.asarray(block_levels)[:, None]
        lv_j = lv_all[None, :]
        variant = self.config.variant
        if variant == "no_implicit":
            allowed = np.zeros((len(block_levels), len(lv_all)), dtype=bool)
        elif variant == "no_same_level_implicit":
            allowed = lv_j < lv_i
        else:
            allowed = lv_j <= lv_i
        for b in range(len(block_levels)):
            allowed[b, n_ctx + b] = True  # self-connection
        if edges is not None:
            allowed[edges.pair_deps, edges.pair_heads] = True
        assert allowed.any(axis=1).all(), "empty attention neighbourhood"
        return allowed

    def message(self, x_j, label=None):
        """Single message vector: explicit edges add relu(x_j U_z)."""
        if label is None or self.config.variant == "no_explicit":
            return x_j
        z = self.labels.id(label)
        u = ad.reshape(ad.take(self._p("edge_u"), [z]), (self.config.d, self.config.d))
        flat = ad.reshape(x_j, (1, self.config.d))
        enriched = flat + ad.relu(flat @ u)
        return ad.reshape(enriched, x_j.shape)

    def _heads_view(self, t, n):
        d, h = self.config.d, self.config.heads
        return ad.transpose(ad.reshape(t, (n, h, d // h)), (1, 0, 2))

    def _edge_extras(self, x_kv, edges):
        """relu(x_head U_z) per edge, summed over parallel labels per pair."""
        parts = []
        for z, head_pos in edges.label_runs:
            u = ad.reshape(ad.take(self._p("edge_u"), [z]), (self.config.d, self.config.d))
            rows = ad.take(x_kv, head_pos)
            parts.append(ad.relu(rows @ u))
        extra = parts[0] if len(parts) == 1 else ad.concat(parts, axis=0)
        # edge rows are in label-run order; seg maps them onto the key-sorted
        # unique pairs (and sums parallel labels on the same pair)
        return ad.segment_sum(extra, edges.seg, len(edges.pair_deps))

    def _attn_ffn(self, prefix, x_q, x_kv, mask, edges, train, rng, attn_sink=None):
        """One ReZero block: masked multi-head attention with edge-enriched
        messages, then the position-wise feed-forward sublayer."""
        cfg = self.config
        d, H = cfg.d, cfg.heads
        dh = d // H
        nq, nk = x_q.data.shape[0], x_kv.data.shape[0]
        scale = 1.0 / np.sqrt(dh)

        q = self._heads_view(x_q @ self._p(prefix + "wq"), nq)
        k = self._heads_view(x_kv @ self._p(prefix + "wk"), nk)
        v = self._heads_view(x_kv @ self._p(prefix + "wv"), nk)
        logits = ad.mul_const(q @ ad.transpose(k, (0, 2, 1)), scale)

        use_edges = (
            edges is not None
            and len(edges.pair_deps)
            and cfg.variant != "no_explicit"
        )
        if use_edges:
            extra = self._edge_extras(x_kv, edges)
            n_pairs = len(edges.pair_deps)
            ek = self._heads_view(extra @ self._p(prefix + "wk"), n_pairs)
            ev = self._heads_view(extra @ self._p(prefix + "wv"), n_pairs)
            qe = ad.take(q, edges.pair_deps, axis=1)
            elog = ad.mul_const(ad.tsum(ad.mul(qe, ek), axis=2), scale)
            logits = ad.scatter_pairs_add(logits, edges.pair_deps, edges.pair_heads, elog)

        alpha = ad.softmax(logits, axis=-1, mask=mask[None, :, :])
        if attn_sink is not None:
            attn_sink.append(alpha.data)
        out = alpha @ v
        if use_edges:
            ae = ad.gather_pairs(alpha, edges.pair_deps, edges.pair_heads)
            weighted = ad.mul(ad.reshape(ae, (H, n_pairs, 1)), ev)
            out = out + ad.segment_sum(weighted, edges.pair_deps, nq)
        out = ad.reshape(ad.transpose(out, (1, 0, 2)), (nq, d)) @ self._p(prefix + "wo")
        out = ad.dropout(out, cfg.dropout_repr, rng, train)
        x = x_q + ad.mul(self._p(prefix + "g_attn"), out)

        hidden = ad.relu(x @ self._p(prefix + "ffn_w1") + self._p(prefix + "ffn_b1"))
        ff = hidden @ self._p(prefix + "ffn_w2") + self._p(prefix + "ffn_b2")
        ff = ad.dropout(ff, cfg.dropout_repr, rng, train)
        return x + ad.mul(self._p(prefix + "g_ffn"), ff)

    def run_block(self, x0, block_levels, ctx, edges, train=False, rng=None, attn_sink=None):
        """Run the decoder stack over one block of nodes.

        ``ctx`` is None or (levels array, per-layer tensors 0..L) from
        earlier blocks; ``edges`` is an EdgeBatch whose head positions index
        the concatenated [context; block] key space.  Returns the block's
        per-layer tensors, so the result can serve as context later.
        """
        block_levels = np.asarray(block_levels, dtype=np.intp)
        if ctx is None:
            ctx_levels, ctx_layers = np.zeros(0, dtype=np.intp), None
        else:
            ctx_levels, ctx_layers = ctx
        mask = self.attention_mask(ctx_levels, block_levels, edges, len(ctx_levels))
        layers = [x0]
        x = x0
        for l in range(self.config.layers):
            kv = x if ctx_layers is None else ad.concat([ctx_layers[l], x], axis=0)
            x = self._attn_ffn(f"dec{l}.", x, kv, mask, edges, train, rng, attn_sink)
            layers.append(x)
        return layers

    # -- selection and scoring -----------------------------------------------

    def selection_scores(self, h_prev, s, train=False, rng=None):
        """Pairwise selection logits [previous-stratum nodes x source words]."""
        cfg = self.config
        hp = ad.dropout(h_prev @ self._p("sel_w1"), cfg.dropout_output, rng, train)
        sp = ad.dropout(s @ self._p("sel_w2"), cfg.dropout_output, rng, train)
        return hp @ ad.transpose(sp, (1, 0))

    def select_probs(self, h_prev, s):
        """Per-word selection probability: sigmoid of the max pair logit."""
        scores = self.selection_scores(h_prev, s)
        return ad.sigmoid(ad.amax(scores, axis=0))

    def edge_scores(self, heads, deps, train=False, rng=None):
        """Biaffine arc logits [P x B] and label logits [P x B x Z]."""
        cfg = self.config

        def view(x, name):
            out = ad.relu(x @ self._p(name + "_w") + self._p(name + "_b"))
            return ad.append_ones(ad.dropout(out, cfg.dropout_output, rng, train))

        ah, adp = view(heads, "arc_h"), view(deps, "arc_d")
        lh, ldp = view(heads, "lab_h"), view(deps, "lab_d")
        arc = ah @ self._p("biaf_arc") @ ad.transpose(adp, (1, 0))
        p, b = heads.data.shape[0], deps.data.shape[0]
        d1 = cfg.d + 1
        per_label = []
        for z in range(len(self.labels)):
            u = ad.reshape(ad.take(self._p("biaf_lab"), [z]), (d1, d1))
            per_label.append(ad.reshape(lh @ u @ ad.transpose(ldp, (1, 0)), (p, b, 1)))
        return arc, ad.concat(per_label, axis=2)


def clone_state(model):
    return {n: p.data.copy() for n, p in model.params.items()}


def load_state(model, state):
    for n, p in model.params.items():
        p.data[...] = state[n]
