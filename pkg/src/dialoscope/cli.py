"""Command-line entry point: analyze, linearize, eval, validate, inspect."""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import analysis, corpus, evaluate, linearize, report
from .corpus import DatasetKind
from .normalize import default_lexicon, load_lexicon

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

_LOADERS = {
    DatasetKind.MULTIWOZ: corpus.load_multiwoz,
    DatasetKind.SGD: corpus.load_sgd,
    DatasetKind.SMCALFLOW: corpus.load_smcalflow,
}


def _dataset_path(args) -> Path:
    if args.path:
        return Path(args.path)
    root = os.environ.get("DIALOSCOPE_DATA_DIR")
    if root:
        return Path(root) / args.dataset
    raise SystemExit("--path is required (or set DIALOSCOPE_DATA_DIR)")


def _load_corpus(args) -> corpus.Corpus:
    kind = DatasetKind(args.dataset)
    loader = _LOADERS[kind]
    return loader(_dataset_path(args), args.split)


def _load_lexicon(args):
    if getattr(args, "lexicon", None):
        return load_lexicon(args.lexicon)
    return default_lexicon()


def _load_overrides(args):
    if getattr(args, "overrides", None):
        return analysis.apply_overrides(args.overrides)
    return None


def cmd_analyze(args) -> int:
    corp = _load_corpus(args)
    result = analysis.analyze_corpus(corp, _load_lexicon(args),
                                     _load_overrides(args), workers=args.workers)
    rendered = report.render(result)
    # compute everything before touching the filesystem so a failure never
    # leaves partial outputs behind
    if args.out:
        Path(args.out).write_text(
            json.dumps(rendered.json_doc, indent=2, ensure_ascii=False) + "\n", "utf-8")
    if args.markdown:
        Path(args.markdown).write_text(rendered.markdown, "utf-8")
    if args.histogram:
        Path(args.histogram).write_text(rendered.histogram_csv, "utf-8")
    print(rendered.markdown)
    return EXIT_OK


def cmd_linearize(args) -> int:
    corp = _load_corpus(args)
    repr_ = linearize.InputRepresentation(args.repr)
    predicted_states = None
    if args.previous_state == "predicted":
        if not args.preds:
            raise SystemExit("--previous-state predicted requires --preds")
        preds = evaluate.load_predictions(args.preds)
        predicted_states, _ = evaluate.accumulate_predicted_states(corp, preds)
    count = linearize.emit_dataset(corp, repr_, args.out,
                                   previous_state_source=args.previous_state,
                                   predicted_states=predicted_states,
                                   workers=args.workers)
    print(f"wrote {count} records to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    corp = _load_corpus(args)
    preds = evaluate.load_predictions(args.preds)
    if args.mode == "exact-match":
        result = evaluate.exact_match_score(corp, preds,
                                            honor_refer_flags=args.honor_refer_flags,
                                            strict=args.strict_exact_match)
    else:
        mode = "oracle" if args.mode == "jga-oracle" else "accumulated"
        result = evaluate.jga(corp, preds, mode=mode,
                              fuzzy_values=args.fuzzy_sgd_matching)
    print(result.table())
    if args.out:
        Path(args.out).write_text(
            json.dumps(result.to_json(), indent=2, ensure_ascii=False) + "\n", "utf-8")
    return EXIT_OK


def cmd_validate(args) -> int:
    corp = _load_corpus(args)
    violations = corpus.validate_corpus(corp)
    if violations:
        for v in violations:
            print(v)
        print(f"{len(violations)} violation(s)")
        return EXIT_FAILURE
    print(f"ok: {len(corp.dialogs)} dialogs, {corp.user_turn_count()} user turns, "
          "no violations")
    return EXIT_OK


def cmd_inspect(args) -> int:
    corp = _load_corpus(args)
    try:
        dialog = corp.get_dialog(args.dialog_id)
    except KeyError:
        print(f"unknown dialog_id: {args.dialog_id}", file=sys.stderr)
        return EXIT_FAILURE
    lexicon = _load_lexicon(args)
    overrides = _load_overrides(args)
    for turn in dialog.turns:
        print(f"[{turn.index}] {turn.speaker.value}: {turn.utterance}")
        if turn.speaker.value != "user":
            continue
        if corp.dataset_kind is DatasetKind.SMCALFLOW:
            print(f"      program: {turn.program}")
            continue
        result = analysis.trace_turn(dialog, turn.index, lexicon, overrides)
        if result.kind is analysis.TurnKind.NOTHING_TO_PREDICT:
            print("      (nothing to predict)")
            continue
        for trace in result.slot_traces:
            delta = trace.delta_c if trace.delta_c is not None else "?"
            extras = []
            if trace.match.matched_surface:
                extras.append(f"matched {trace.match.matched_surface!r}")
            if trace.match.span:
                extras.append(f"span {trace.match.span}")
            if trace.context_class is not analysis.ContextClass.NON_CONTEXTUAL:
                extras.append(trace.context_class.value)
            suffix = f" ({', '.join(extras)})" if extras else ""
            print(f"      {trace.slot[0]}:{trace.slot[1]}={trace.value}  "
                  f"δc={delta}  {trace.match.category.value}{suffix}")
        if result.dropped_count or result.dontcared_count:
            print(f"      relaxations: {result.dropped_count} dropped, "
                  f"{result.dontcared_count} dontcared")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialoscope",
        description="Measure conversationality, contextuality and value "
                    "normalization of task-oriented dialog corpora.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_lexicon=False):
        p.add_argument("--dataset", required=True,
                       choices=[k.value for k in DatasetKind])
        p.add_argument("--path", help="dataset file or directory "
                                      "(default: $DIALOSCOPE_DATA_DIR/<dataset>)")
        p.add_argument("--split", default="all")
        p.add_argument("--workers", type=int, default=1)
        if with_lexicon:
            p.add_argument("--lexicon", help="lexicon file (default: bundled seed)")
            p.add_argument("--overrides", help="manual-adjudication override file")

    p = sub.add_parser("analyze", help="per-turn statistics report")
    common(p, with_lexicon=True)
    p.add_argument("--out", help="report JSON output path")
    p.add_argument("--markdown", help="report Markdown output path")
    p.add_argument("--histogram", help="histogram CSV output path")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("linearize", help="emit seq2seq records")
    common(p)
    p.add_argument("--repr", required=True,
                   choices=[r.value for r in linearize.InputRepresentation])
    p.add_argument("--out", required=True)
    p.add_argument("--previous-state", choices=["gold", "predicted"], default="gold")
    p.add_argument("--preds", help="predictions file for --previous-state predicted")
    p.set_defaults(func=cmd_linearize)

    p = sub.add_parser("eval", help="score a predictions file")
    common(p)
    p.add_argument("--preds", required=True)
    p.add_argument("--mode", required=True,
                   choices=["jga-oracle", "jga", "exact-match"])
    p.add_argument("--honor-refer-flags", action="store_true")
    p.add_argument("--fuzzy-sgd-matching", action="store_true")
    p.add_argument("--strict-exact-match", action="store_true")
    p.add_argument("--out", help="score JSON output path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("validate", help="structural invariant checks")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("inspect", help="per-turn trace of one dialog")
    common(p, with_lexicon=True)
    p.add_argument("dialog_id")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (corpus.CorpusError, evaluate.PredictionFileError,
            analysis.OverrideError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
