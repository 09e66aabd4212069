"""
Command-Line Interface
Subcommands: learn-bpe, gen-data, train, finetune, decode, avg-checkpoints,
evaluate, edit-report, ablate

Usage:
    python run_ape.py <subcommand> [--config FILE] [--set key=value ...] [--seed N] ...
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd

import config
from src.data.corpus import load_corpus_prefix, read_lines, save_corpus
from src.data.synthetic import expected_ter, gen_synthetic, split_sizes
from src.decoding.corpus_decoder import decode_corpus, score_corpus
from src.evaluation.ablation import raw_mt_scores, run_ablation, run_architecture_comparison
from src.evaluation.edit_report import edit_reduction_report, render_text, report_frame, write_report
from src.evaluation.visualizations import generate_all_figures
from src.model.transference import ModelConfig, count_params, init_params
from src.tokenizer.bpe import MergeTable, learn_bpe, split_pieces
from src.training.checkpoints import (
    average_checkpoints,
    list_checkpoints,
    load_checkpoint,
    load_model,
    save_checkpoint,
    select_best,
)
from src.training.trainer import Trainer, fine_tune
from src.utils.config_file import RunConfig, load_run_config
from src.utils.logging_setup import setup_logging

logger = logging.getLogger(__name__)

BANNER = "=" * 60


def banner(title: str):
    print("\n" + BANNER)
    print(title)
    print(BANNER)


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def _run_config(args) -> RunConfig:
    return load_run_config(getattr(args, "config", None), getattr(args, "set", None) or (),
                           getattr(args, "seed", None))


def _model_config(run_config: RunConfig, table: MergeTable) -> ModelConfig:
    """Effective model configuration; the vocabulary always comes from the merge table"""
    if run_config.model.vocab_size != table.vocab_size:
        logger.debug("vocab_size set to %d from the merge table", table.vocab_size)
    return replace(run_config.model, vocab_size=table.vocab_size).validate()


def _write_effective_config(run_config: RunConfig, model_config: ModelConfig, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    effective = replace(run_config, model=model_config)
    (out_dir / "run_config.txt").write_text(effective.to_text(), encoding="utf-8")


def _encoded(prefix: str, table: MergeTable):
    corpus = load_corpus_prefix(prefix)
    return corpus, corpus.encode(table)


def _model_groups(values: Sequence[str]) -> List:
    """``--models a.npz,b.npz --models c.npz`` -> [[a, b], c]"""
    groups = []
    for value in values:
        paths = [item for item in value.split(",") if item]
        models = [load_model(path) for path in paths]
        groups.append(models if len(models) > 1 else models[0])
    return groups


def _scores_frame(rows: Dict[str, object]) -> pd.DataFrame:
    return pd.DataFrame([{"system": name, "BLEU": s.bleu, "TER": s.ter} for name, s in rows.items()])


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_learn_bpe(args) -> int:
    run_config = _run_config(args)
    merges = args.merges if args.merges is not None else run_config.bpe_merges
    sentences: List[str] = []
    for prefix in args.corpus:
        sentences.extend(load_corpus_prefix(prefix).pooled())
    table = learn_bpe(sentences, merges)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    table.save(out)
    print(f"Learned {len(table.merges)} merges (vocabulary {table.vocab_size}) -> {out}")
    return 0


def cmd_gen_data(args) -> int:
    run_config = _run_config(args)
    spec = run_config.synth
    if args.domain_shift:
        spec = replace(spec, domain_shift=True)
    out_dir = Path(args.out_dir)
    n_train, n_dev = split_sizes(args.n, args.dev_fraction)
    splits = {"train": n_train, "dev": n_dev, "test": args.n_test}
    domains = ["generic", "indomain"] if spec.domain_shift else ["generic"]

    banner("Synthetic APE Data")
    print(f"Seed: {spec.seed}   expected TER(mt, pe) ~ {100 * expected_ter(spec):.1f}")
    for domain in domains:
        for stream, (name, size) in enumerate(splits.items()):
            if size <= 0:
                continue
            corpus = gen_synthetic(spec, size, split=domain, stream=stream)
            prefix = out_dir / (name if domain == "generic" else f"{domain}_{name}")
            save_corpus(corpus, prefix)
            print(f"  {prefix}.{{src,mt,pe}}: {len(corpus)} triplets")
    return 0


def cmd_train(args) -> int:
    run_config = _run_config(args)
    table = MergeTable.load(args.bpe)
    model_config = _model_config(run_config, table)
    _, train_examples = _encoded(args.train, table)
    dev_examples = _encoded(args.dev, table)[1] if args.dev else []
    out_dir = Path(args.out)
    _write_effective_config(run_config, model_config, out_dir)

    model = init_params(model_config, seed=run_config.train.seed)
    banner(f"Training {model_config.architecture} "
           f"({'-'.join(map(str, model_config.layers))}, {count_params(model)} parameters)")
    result = Trainer(model, run_config.train, table, out_dir).train(train_examples, dev_examples)
    print(f"\nFinished at step {result.final_step}; {len(result.checkpoint_paths)} checkpoints in {out_dir}")
    print(result.metric_log.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    if args.figures:
        generate_all_figures({"metric_log": result.metric_log}, args.figures)
    return 0


def cmd_finetune(args) -> int:
    run_config = _run_config(args)
    table = MergeTable.load(args.bpe)
    model_config = _model_config(run_config, table)
    checkpoint = load_checkpoint(args.checkpoint)
    _, train_examples = _encoded(args.train, table)
    dev_examples = _encoded(args.dev, table)[1] if args.dev else []
    out_dir = Path(args.out)
    _write_effective_config(run_config, model_config, out_dir)

    banner(f"Fine-tuning from {args.checkpoint} (step {checkpoint.step})")
    result = fine_tune(checkpoint, train_examples, run_config.train, model_config,
                       dev_examples, table, out_dir)
    print(f"\nFinished at step {result.final_step}; {len(result.checkpoint_paths)} checkpoints in {out_dir}")
    print(result.metric_log.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    if args.figures:
        generate_all_figures({"metric_log": result.metric_log}, args.figures)
    return 0


def cmd_decode(args) -> int:
    table = MergeTable.load(args.bpe)
    models = _model_groups(args.models)
    corpus = load_corpus_prefix(args.corpus)
    result = decode_corpus(models, corpus, table, beam_size=args.beam, length_penalty=args.lenpen,
                           max_len=args.max_len, out_path=args.out, workers=args.workers,
                           ensemble_mode=args.ensemble_mode)
    banner("Decoding Results")
    print(f"Hypotheses: {len(result.hypotheses)} -> {result.output_path}")
    print(_scores_frame({"raw MT": result.raw_mt, "APE": result.system})
          .to_string(index=False, float_format=lambda v: f"{v:.2f}"))
    return 0


def cmd_avg_checkpoints(args) -> int:
    paths = [Path(p) for p in args.checkpoints or []]
    if args.dir:
        paths.extend(list_checkpoints(args.dir))
    if not paths:
        raise ValueError("no checkpoints given (use --checkpoints or --dir)")
    checkpoints = [load_checkpoint(path) for path in paths]
    if args.best is not None:
        checkpoints = select_best(checkpoints, args.best, args.metric)
    averaged = average_checkpoints(checkpoints)
    save_checkpoint(averaged, args.out)
    print(f"Averaged {len(checkpoints)} checkpoints (steps "
          f"{', '.join(str(c.step) for c in checkpoints)}) -> {args.out}")
    return 0


def _prepare(lines: List[str], split_punct: bool) -> List[str]:
    if not split_punct:
        return lines
    return [" ".join("".join(s for s in piece if s != config.END_OF_WORD) for piece in split_pieces(line))
            for line in lines]


def cmd_evaluate(args) -> int:
    hyps = _prepare(read_lines(args.hyp), args.split_punct)
    refs = _prepare(read_lines(args.ref), args.split_punct)
    if len(hyps) != len(refs):
        raise ValueError(f"{args.hyp} has {len(hyps)} lines but {args.ref} has {len(refs)}")
    rows = {}
    if args.mt:
        rows["raw MT"] = score_corpus(_prepare(read_lines(args.mt), args.split_punct), refs, args.lowercase)
    rows["hypothesis"] = score_corpus(hyps, refs, args.lowercase)

    banner("Evaluation")
    for name, scores in rows.items():
        counts = scores.breakdown
        print(f"{name:<12} BLEU {scores.bleu:6.2f}   TER {scores.ter:6.2f}   "
              f"(In {counts.insertions}, De {counts.deletions}, "
              f"Su {counts.substitutions}, Sh {counts.shifts})")
    return 0


def cmd_edit_report(args) -> int:
    mt = read_lines(args.mt)
    pe = read_lines(args.ref)
    systems: Dict[str, List[str]] = {}
    for item in args.hyp:
        name, _, path = item.rpartition("=")
        systems[name or "APE"] = read_lines(path)
    rows = edit_reduction_report(mt, pe, systems, lowercase=args.lowercase)

    banner("Edit Reduction vs. Raw MT (%)")
    print(render_text(rows))
    if args.out:
        write_report(rows, args.out)
    if args.figures:
        generate_all_figures({"edit_reduction": report_frame(rows)}, args.figures)
    return 0


def _parse_triples(text: str):
    triples = []
    for item in text.split(","):
        parts = item.strip().split("-")
        if len(parts) != 3:
            raise ValueError(f"layer triple must look like 2-2-1, got {item!r}")
        triples.append(tuple(int(p) for p in parts))
    return triples


def cmd_ablate(args) -> int:
    run_config = _run_config(args)
    table = MergeTable.load(args.bpe)
    model_config = _model_config(run_config, table)
    _, train_examples = _encoded(args.train, table)
    _, dev_examples = _encoded(args.dev, table)

    results = {}
    if args.architectures:
        banner("Architecture Comparison")
        frame = run_architecture_comparison(model_config, args.architectures.split(","),
                                            train_examples, dev_examples, run_config.train, table,
                                            raw_mt=raw_mt_scores(dev_examples, table))
        results["architectures"] = frame
    else:
        triples = _parse_triples(args.triples) if args.triples else config.ABLATION_LAYER_TRIPLES
        banner("Layer Ablation")
        frame = run_ablation(model_config, triples, train_examples, dev_examples,
                             run_config.train, table)
        results["ablation"] = frame

    print(frame.to_string(index=False, float_format=lambda v: f"{v:.2f}"))
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out, sep="\t", index=False, float_format="%.2f")
        print(f"\nTable saved to: {out}")
    if args.figures:
        generate_all_figures(results, args.figures)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_config_args(parser: argparse.ArgumentParser):
    parser.add_argument('--config', type=str, default=None,
                        help='Flat key=value config file (also looked up in $APE_CONFIG_DIR)')
    parser.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                        help='Override one config key (repeatable)')
    parser.add_argument('--seed', type=int, default=None, help='Override the seed')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='run_ape.py',
                                     description='Multi-source automatic post-editing toolkit')
    parser.add_argument('--log-level', type=str, default=None, help='Logging level (default: $APE_LOG_LEVEL)')
    parser.add_argument('--verbose', action='store_true', help='Debug logging')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('learn-bpe', help='Learn a joint BPE merge table over src, mt and pe')
    _add_config_args(p)
    p.add_argument('--corpus', action='append', required=True, help='Corpus prefix (repeatable)')
    p.add_argument('--merges', type=int, default=None, help='Number of merges (default: bpe_merges)')
    p.add_argument('--out', required=True, help='Merge table path')
    p.set_defaults(func=cmd_learn_bpe)

    p = sub.add_parser('gen-data', help='Generate synthetic train/dev/test triplets')
    _add_config_args(p)
    p.add_argument('--out-dir', required=True)
    p.add_argument('--n', type=int, default=250, help='Triplets split into train and dev')
    p.add_argument('--dev-fraction', type=float, default=0.2)
    p.add_argument('--n-test', type=int, default=50)
    p.add_argument('--domain-shift', action='store_true',
                   help='Also write indomain_* splits from a shifted lexicon')
    p.set_defaults(func=cmd_gen_data)

    for name, func, helptext in (('train', cmd_train, 'Train a model from scratch'),
                                 ('finetune', cmd_finetune, 'Fine-tune a checkpoint')):
        p = sub.add_parser(name, help=helptext)
        _add_config_args(p)
        if name == 'finetune':
            p.add_argument('--checkpoint', required=True)
        p.add_argument('--train', required=True, help='Training corpus prefix')
        p.add_argument('--dev', default=None, help='Dev corpus prefix')
        p.add_argument('--bpe', required=True, help='Merge table')
        p.add_argument('--out', required=True, help='Checkpoint directory')
        p.add_argument('--figures', default=None, help='Write training curves to this directory')
        p.set_defaults(func=func)

    p = sub.add_parser('decode', help='Post-edit a corpus with one model or an ensemble')
    p.add_argument('--models', action='append', required=True,
                   help='Checkpoint (repeatable); comma-separated paths form one nested group')
    p.add_argument('--corpus', required=True, help='Corpus prefix')
    p.add_argument('--bpe', required=True)
    p.add_argument('--beam', type=int, default=config.BEAM_SIZE)
    p.add_argument('--lenpen', type=float, default=config.LENGTH_PENALTY)
    p.add_argument('--max-len', type=int, default=None)
    p.add_argument('--ensemble-mode', choices=['prob', 'log'], default='prob')
    p.add_argument('--workers', type=int, default=config.DECODE_WORKERS)
    p.add_argument('--out', default=None, help='Hypothesis file')
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser('avg-checkpoints', help='Average (the best) checkpoints')
    p.add_argument('--checkpoints', nargs='+', default=None)
    p.add_argument('--dir', default=None, help='Use every step_*.npz in this directory')
    p.add_argument('--best', type=int, default=None, help='Keep only the K best')
    p.add_argument('--metric', choices=['dev_bleu', 'dev_loss'], default='dev_bleu')
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_avg_checkpoints)

    p = sub.add_parser('evaluate', help='BLEU and TER of a hypothesis file')
    p.add_argument('--hyp', required=True)
    p.add_argument('--ref', required=True)
    p.add_argument('--mt', default=None, help='Raw MT file for the baseline row')
    p.add_argument('--lowercase', action='store_true')
    p.add_argument('--split-punct', action='store_true', help='Split punctuation before scoring')
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser('edit-report', help='Per-operation edit reduction against raw MT')
    p.add_argument('--mt', required=True)
    p.add_argument('--ref', required=True)
    p.add_argument('--hyp', action='append', required=True, metavar='[NAME=]PATH')
    p.add_argument('--lowercase', action='store_true')
    p.add_argument('--out', default=None, help='Report path prefix (.tsv and .txt)')
    p.add_argument('--figures', default=None)
    p.set_defaults(func=cmd_edit_report)

    p = sub.add_parser('ablate', help='Layer ablation or architecture comparison')
    _add_config_args(p)
    p.add_argument('--train', required=True)
    p.add_argument('--dev', required=True)
    p.add_argument('--bpe', required=True)
    p.add_argument('--triples', default=None, help='e.g. 2-2-2,2-2-1,2-1-2')
    p.add_argument('--architectures', default=None, help='Comma-separated subset of ' + ','.join(config.ARCHITECTURES))
    p.add_argument('--out', default=None, help='TSV table path')
    p.add_argument('--figures', default=None)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        setup_logging(args.log_level, args.verbose)
        return args.func(args)
    except Exception as exc:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
