"""Command-line interface: train, parse, eval, hierarchy, gradcheck, ablate."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import engine, metrics
from .checkpoint import load_model, save_model
from .conllu import parse_conllu, write_conllu
from .engine import TrainConfig
from .graph import DepGraph, break_cycles, build_hierarchy
from .model import ConfigError, ModelConfig

ABLATION_MODES = {
    "A": "auto_random",
    "B": "auto_word",
    "C": "auto_mixed",
    "D": "no_implicit",
    "E": "no_same_level_implicit",
    "F": "no_explicit",
    "G": "no_hier_pos",
    "nonauto": "nonauto_baseline",
    "full": "full",
}


def _read(path, allow_unattached=False):
    with open(path, encoding="utf-8") as fh:
        return parse_conllu(fh.read(), allow_unattached=allow_unattached)


def _load_config(path, seed, variant=None):
    """Key=value override file on top of the Model/Train defaults."""
    overrides = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, sep, value = line.partition("=")
                if not sep:
                    raise ConfigError(f"config line {line!r} is not key=value")
                overrides[key.strip()] = value.strip()
    model_fields = {f.name: f.type for f in dataclasses.fields(ModelConfig)}
    train_fields = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    m_kw, t_kw = {}, {}
    for key, value in overrides.items():
        if key in model_fields:
            m_kw[key] = value if key == "variant" else type(getattr(ModelConfig(), key))(value)
        elif key in train_fields:
            t_kw[key] = type(getattr(TrainConfig(), key))(value)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if variant is not None:
        m_kw["variant"] = variant
    t_kw.setdefault("seed", seed)
    return ModelConfig(**m_kw), TrainConfig(**t_kw)


def _cmd_train(args):
    train_sents = _read(args.train)
    dev_sents = _read(args.dev)
    model_cfg, train_cfg = _load_config(args.config, args.seed)
    model = engine.build_model(train_sents, model_cfg, seed=train_cfg.seed)
    engine.train(model, train_sents, dev_sents, train_cfg, log_line=print)
    save_model(model, args.out)
    return 0


def _cmd_parse(args):
    model = load_model(args.model)
    sentences = _read(args.input, allow_unattached=True)
    system = engine.parse_corpus(model, sentences)
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write(write_conllu(system))
    return 0


def _cmd_eval(args):
    gold = _read(args.gold)
    system = _read(args.system, allow_unattached=True)
    print(f"ELAS\t{100 * metrics.elas(gold, system).f1:.2f}")
    print(f"GMS\t{100 * metrics.gms(gold, system).f1:.2f}")
    print(f"HIER\t{100 * metrics.hierarchy_accuracy(gold, system):.2f}")
    return 0


def _cmd_hierarchy(args):
    sentences = _read(args.input)
    for i, sent in enumerate(sentences, start=1):
        dag, _ = break_cycles(DepGraph(sent.n_nodes, sent.gold))
        levels = build_hierarchy(dag).levels
        sent_id = sent.sent_id or str(i)
        print(f"{sent_id}\t{','.join(str(l) for l in levels)}")
    return 0


def _cmd_gradcheck(args):
    errors = engine.gradient_check_blocks(seed=args.seed)
    ok = True
    for name, err in errors.items():
        print(f"{name}\t{err:.3e}")
        ok &= err < 1e-4
    return 0 if ok else 1


def _cmd_ablate(args):
    variant = ABLATION_MODES[args.variant]
    train_sents = _read(args.train)
    dev_sents = _read(args.dev)
    test_sents = _read(args.test)
    model_cfg, train_cfg = _load_config(args.config, args.seed, variant=variant)
    model = engine.build_model(train_sents, model_cfg, seed=train_cfg.seed)
    engine.train(model, train_sents, dev_sents, train_cfg, log_line=print)
    system = engine.parse_corpus(model, test_sents)
    print(f"variant\t{variant}")
    print(f"ELAS\t{100 * metrics.elas(test_sents, system).f1:.2f}")
    print(f"GMS\t{100 * metrics.gms(test_sents, system).f1:.2f}")
    return 0


def _build_parser():
    top = argparse.ArgumentParser(prog="sager", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a parser")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("parse", help="parse a corpus with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(fn=_cmd_parse)

    p = sub.add_parser("eval", help="score system output against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--system", required=True)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("hierarchy", help="print topological hierarchy levels")
    p.add_argument("--input", required=True)
    p.set_defaults(fn=_cmd_hierarchy)

    p = sub.add_parser("gradcheck", help="finite-difference checks per block")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_gradcheck)

    p = sub.add_parser("ablate", help="train and score one model variant")
    p.add_argument("--variant", required=True, choices=sorted(ABLATION_MODES))
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_ablate)
    return top


def run(argv=None):
    """Entry point; returns the process exit code."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (OSError, ValueError) as exc:
        # ValueError covers the package's input errors (conllu, config,
        # checkpoint, alignment); argparse already exits 2 on bad flags
        print(f"sager: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())
