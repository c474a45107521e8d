"""Scoring of prediction files: Joint Goal Accuracy and exact match.

JGA compares the full cumulative state per user turn; in oracle mode the
predicted update is applied to the gold previous state, in accumulated
mode to the running predicted state. SMCalFlow predictions are compared
program-for-program after canonical printing, with optional honoring of
the dataset's refer_are_incorrect force-zero flag.
"""
from __future__ import annotations

import difflib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

from . import lispress
from .corpus import Corpus, DatasetKind, DialogState, DONTCARE, apply_update
from .linearize import TargetParseError, parse_target

log = logging.getLogger(__name__)

PredKey = Tuple[str, int]


class PredictionFileError(ValueError):
    pass


def load_predictions(path) -> Dict[PredKey, str]:
    """Read a line-delimited JSON predictions file."""
    predictions: Dict[PredKey, str] = {}
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PredictionFileError(f"{path}:{lineno}: malformed JSON: {exc}")
            try:
                key = (rec["dialogue_id"], int(rec["turn_index"]))
                pred = rec["prediction"]
            except (KeyError, TypeError, ValueError):
                raise PredictionFileError(
                    f"{path}:{lineno}: need dialogue_id, turn_index, prediction")
            if key in predictions:
                raise PredictionFileError(f"{path}:{lineno}: duplicate record for {key}")
            predictions[key] = pred
    return predictions


@dataclass
class ScoreReport:
    metric: str
    correct: int = 0
    total: int = 0
    verdicts: List[Tuple[str, int, bool]] = field(default_factory=list)
    missing: int = 0
    unparseable: int = 0
    correct_but_flagged: int = 0

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def to_json(self) -> dict:
        return {
            "metric": self.metric,
            "accuracy": self.accuracy,
            "correct": self.correct,
            "total": self.total,
            "missing_predictions": self.missing,
            "unparseable_predictions": self.unparseable,
            "correct_but_flagged": self.correct_but_flagged,
            "verdicts": [
                {"dialogue_id": d, "turn_index": t, "correct": ok}
                for d, t, ok in self.verdicts
            ],
        }

    def table(self) -> str:
        lines = [
            f"metric                  {self.metric}",
            f"accuracy                {self.accuracy:.4f}",
            f"correct / total         {self.correct} / {self.total}",
            f"missing predictions     {self.missing}",
            f"unparseable predictions {self.unparseable}",
        ]
        if self.correct_but_flagged:
            lines.append(f"correct but flagged     {self.correct_but_flagged}")
        return "\n".join(lines)


def canonical_value(value: str) -> str:
    return " ".join(value.strip().lower().split())


def _values_match(pred: str, gold_alternates, fuzzy: bool = False) -> bool:
    pred_c = canonical_value(pred)
    gold = [canonical_value(g) for g in gold_alternates]
    if pred_c in gold:
        return True
    if fuzzy and pred_c != DONTCARE:
        return any(
            difflib.SequenceMatcher(None, pred_c, g).ratio() >= 0.9 for g in gold)
    return False


def states_equal(pred: DialogState, gold: DialogState, fuzzy: bool = False) -> bool:
    """Full-state equality: same keys, each predicted value equal to any
    gold alternate (case-insensitive, whitespace-collapsed)."""
    pred_d = pred.as_dict()
    gold_d = gold.as_dict()
    if set(pred_d) != set(gold_d):
        return False
    for key, pred_vals in pred_d.items():
        if not _values_match(pred_vals[0], gold_d[key], fuzzy):
            return False
    return True


def _frame_corpus_only(corpus: Corpus):
    if corpus.dataset_kind is DatasetKind.SMCALFLOW:
        raise ValueError("JGA applies to MultiWOZ/SGD corpora only")


def jga(corpus: Corpus, predictions: Dict[PredKey, str], mode: str = "oracle",
        fuzzy_values: bool = False) -> ScoreReport:
    """Joint Goal Accuracy over all user turns.

    mode "oracle": predicted update applied to the gold previous state;
    mode "accumulated": applied to the running predicted state. Missing or
    unparseable predictions count as wrong.
    """
    _frame_corpus_only(corpus)
    if mode not in ("oracle", "accumulated"):
        raise ValueError(f"unknown JGA mode {mode!r}")
    report = ScoreReport(metric=f"jga-{mode}")
    known_keys = set()
    for dialog in corpus.dialogs:
        running = DialogState()
        for turn in dialog.user_turns():
            key = (dialog.dialog_id, turn.index)
            known_keys.add(key)
            report.total += 1
            base = (dialog.previous_user_state(turn.index)
                    if mode == "oracle" else running)
            correct = False
            if key not in predictions:
                report.missing += 1
            else:
                try:
                    update = parse_target(predictions[key])
                except TargetParseError:
                    report.unparseable += 1
                    update = None
                if update is not None:
                    predicted = apply_update(base, update)
                    if mode == "accumulated":
                        running = predicted
                    correct = states_equal(predicted, turn.state, fuzzy_values)
            report.correct += correct
            report.verdicts.append((dialog.dialog_id, turn.index, correct))
    for key in predictions:
        if key not in known_keys:
            log.warning("prediction for unknown turn %s ignored", key)
    return report


def accumulate_predicted_states(corpus: Corpus,
                                predictions: Dict[PredKey, str]
                                ) -> Tuple[Dict[PredKey, DialogState], List[PredKey]]:
    """Running fold of predicted updates per dialog.

    Returns per-user-turn cumulative predicted states plus the keys whose
    prediction was missing or unparseable (treated as an empty update).
    """
    _frame_corpus_only(corpus)
    states: Dict[PredKey, DialogState] = {}
    flagged: List[PredKey] = []
    for dialog in corpus.dialogs:
        running = DialogState()
        for turn in dialog.user_turns():
            key = (dialog.dialog_id, turn.index)
            try:
                update = parse_target(predictions.get(key, ""))
                if key not in predictions:
                    flagged.append(key)
            except TargetParseError:
                update = None
                flagged.append(key)
            if update is not None:
                running = apply_update(running, update)
            states[key] = running
    return states, flagged


def exact_match_score(corpus: Corpus, predictions: Dict[PredKey, str],
                      honor_refer_flags: bool = False,
                      strict: bool = False) -> ScoreReport:
    """Per-turn Lispress exact match for SMCalFlow corpora.

    With honor_refer_flags, turns carrying refer_are_incorrect score 0 no
    matter the prediction (the dataset authors' scorer semantics); such
    turns whose prediction was actually correct are tallied separately.
    """
    if corpus.dataset_kind is not DatasetKind.SMCALFLOW:
        raise ValueError("exact match applies to SMCalFlow corpora only")
    report = ScoreReport(metric="exact-match")
    known_keys = set()
    for dialog in corpus.dialogs:
        for turn in dialog.user_turns():
            key = (dialog.dialog_id, turn.index)
            known_keys.add(key)
            report.total += 1
            correct = False
            if key not in predictions:
                report.missing += 1
            else:
                correct = lispress.exact_match(predictions[key], turn.program,
                                               strict=strict)
            if correct and honor_refer_flags and "refer_are_incorrect" in turn.flags:
                report.correct_but_flagged += 1
                correct = False
            report.correct += correct
            report.verdicts.append((dialog.dialog_id, turn.index, correct))
    for key in predictions:
        if key not in known_keys:
            log.warning("prediction for unknown turn %s ignored", key)
    return report
