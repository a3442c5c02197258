"""Attempt history, sticky completion, cohort statistics, and grades.

The event log is the primary data: an append-only file of one JSON object
per line with stable field names (student, exercise, ts, completed,
verified, errors, hash).  In-memory completion records are derived state and
can always be rebuilt by replaying the log.  All mutation goes through a
single writer lock; readers see consistent snapshots.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping


class UnknownExercise(KeyError):
    pass


class UnknownStudent(KeyError):
    pass


class MissingManualScore(KeyError):
    pass


@dataclass(frozen=True)
class ProgressEvent:
    student_id: str
    exercise_id: str
    ts: int                 # UTC seconds
    completed: bool
    verified: int
    errors: int
    submission_hash: str

    @classmethod
    def from_verdict(cls, student_id: str, exercise_id: str, ts: int,
                     verdict, submission_hash: str) -> "ProgressEvent":
        return cls(student_id, exercise_id, ts, verdict.completed,
                   verdict.verified_count, verdict.error_count, submission_hash)

    def to_json_line(self) -> str:
        return json.dumps({
            "student": self.student_id,
            "exercise": self.exercise_id,
            "ts": self.ts,
            "completed": self.completed,
            "verified": self.verified,
            "errors": self.errors,
            "hash": self.submission_hash,
        })

    @classmethod
    def from_json_line(cls, line: str) -> "ProgressEvent":
        obj = json.loads(line)
        return cls(obj["student"], obj["exercise"], int(obj["ts"]),
                   bool(obj["completed"]), int(obj["verified"]),
                   int(obj["errors"]), obj["hash"])


@dataclass
class CompletionRecord:
    student_id: str
    exercise_id: str
    completed: bool = False
    first_completed_at: int | None = None
    attempt_count: int = 0


@dataclass(frozen=True)
class QuestionStats:
    exercise_id: str
    completed_count: int
    cohort_size: int
    attempts_histogram: dict[int, int]

    @property
    def fraction(self) -> float:
        if self.cohort_size == 0:
            return 0.0
        return self.completed_count / self.cohort_size


class ProgressStore:
    """Derived completion state over an append-only attempt log.

    Opening a store on an existing log replays it; subsequent appends are
    flushed and fsynced before the caller sees the updated record, so an
    acknowledged attempt survives a crash.
    """

    def __init__(self, exercise_groups: Mapping[str, str],
                 roster: Iterable[str], log_path: Path | str | None = None):
        self._groups = dict(exercise_groups)
        self._roster = set(roster)
        self._records: dict[tuple[str, str], CompletionRecord] = {}
        self._seen: set[tuple[str, str, int, str]] = set()
        self._lock = threading.Lock()
        self._log_path = Path(log_path) if log_path else None
        self._log_file = None
        self._last_ts = 0
        if self._log_path and self._log_path.exists():
            for line in self._log_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                event = ProgressEvent.from_json_line(line)
                # Roster drift tolerated on replay; live appends stay strict.
                if event.exercise_id in self._groups and event.student_id in self._roster:
                    self._apply(event)
        if self._log_path:
            self._log_path.parent.mkdir(parents=True, exist_ok=True)
            self._log_file = open(self._log_path, "a", encoding="utf-8")

    @property
    def exercise_ids(self) -> list[str]:
        return list(self._groups)

    @property
    def roster(self) -> list[str]:
        return sorted(self._roster)

    def register_student(self, student_id: str) -> None:
        with self._lock:
            self._roster.add(student_id)

    def close(self) -> None:
        if self._log_file:
            self._log_file.close()
            self._log_file = None

    def _apply(self, event: ProgressEvent) -> CompletionRecord:
        key = (event.student_id, event.exercise_id, event.ts, event.submission_hash)
        record = self._records.setdefault(
            (event.student_id, event.exercise_id),
            CompletionRecord(event.student_id, event.exercise_id))
        if key in self._seen:
            return record
        self._seen.add(key)
        self._last_ts = max(self._last_ts, event.ts)
        record.attempt_count += 1
        if event.completed and not record.completed:
            record.completed = True
            record.first_completed_at = event.ts
        return record

    def record_attempt(self, event: ProgressEvent) -> CompletionRecord:
        """Append one attempt; completion is monotone and replays are idempotent."""
        if event.exercise_id not in self._groups:
            raise UnknownExercise(event.exercise_id)
        if event.student_id not in self._roster:
            raise UnknownStudent(event.student_id)
        with self._lock:
            key = (event.student_id, event.exercise_id, event.ts,
                   event.submission_hash)
            fresh = key not in self._seen
            if fresh and self._log_file:
                self._log_file.write(event.to_json_line() + "\n")
                self._log_file.flush()
                os.fsync(self._log_file.fileno())
            record = self._apply(event)
            return replace_record(record)

    def next_timestamp(self, now: int) -> int:
        """Writer-side clamp keeping log timestamps non-decreasing."""
        with self._lock:
            return max(now, self._last_ts)

    def completion(self, student_id: str, exercise_id: str) -> CompletionRecord:
        with self._lock:
            record = self._records.get((student_id, exercise_id))
            if record is None:
                return CompletionRecord(student_id, exercise_id)
            return replace_record(record)

    def question_stats(self, exercise_id: str,
                       cohort: Iterable[str]) -> QuestionStats:
        if exercise_id not in self._groups:
            raise UnknownExercise(exercise_id)
        cohort = list(cohort)
        completed = 0
        histogram: dict[int, int] = {}
        with self._lock:
            for student in cohort:
                record = self._records.get((student, exercise_id))
                attempts = record.attempt_count if record else 0
                histogram[attempts] = histogram.get(attempts, 0) + 1
                if record and record.completed:
                    completed += 1
        return QuestionStats(exercise_id, completed, len(cohort), histogram)

    def all_fractions(self, cohort: Iterable[str]) -> dict[str, float]:
        cohort = list(cohort)
        return {ex: self.question_stats(ex, cohort).fraction
                for ex in self._groups}

    # -- grading ---------------------------------------------------------

    def compute_grade(self, student_id: str, scheme: "GradeScheme",
                      manual_scores: Mapping[str, float] | None = None,
                      strict: bool = False) -> "GradeBreakdown":
        """Weighted totals over completion state plus manually marked work.

        A missing manual score earns 0.0 and is listed on the breakdown;
        strict=True raises MissingManualScore instead.
        """
        scheme.validate()
        manual_scores = manual_scores or {}
        per_component: dict[str, float] = {}
        missing: list[str] = []
        by_group: dict[str, list[str]] = {}
        for ex, group in self._groups.items():
            by_group.setdefault(group, []).append(ex)
        with self._lock:
            for comp in scheme.components:
                if comp.aggregation == "manual_score":
                    if comp.group not in manual_scores:
                        if strict:
                            raise MissingManualScore(comp.group)
                        missing.append(comp.group)
                        per_component[comp.group] = 0.0
                        continue
                    score = manual_scores[comp.group]
                    if not 0.0 <= score <= 1.0:
                        raise ValueError(
                            f"manual score for {comp.group!r} must be in 0..1")
                    per_component[comp.group] = comp.weight * score
                    continue
                questions = by_group.get(comp.group, [])
                done = sum(
                    1 for ex in questions
                    if (rec := self._records.get((student_id, ex))) and rec.completed)
                if comp.aggregation == "per_question_equal_split":
                    earned = comp.weight * (done / len(questions)) if questions else 0.0
                elif comp.aggregation == "all_or_nothing":
                    earned = comp.weight if questions and done == len(questions) else 0.0
                else:
                    raise ValueError(f"unknown aggregation {comp.aggregation!r}")
                per_component[comp.group] = earned
        total = sum(per_component.values())
        return GradeBreakdown(per_component, total, missing)

    def export_grades(self, cohort: Iterable[str], scheme: "GradeScheme",
                      manual_scores: Mapping[str, Mapping[str, float]] | None = None,
                      ) -> "ExportResult":
        """CSV with one row per student, single decimal place, stable order."""
        scheme.validate()
        manual_scores = manual_scores or {}
        groups = [c.group for c in scheme.components]
        lines = ["student_id," + ",".join(groups) + ",total"]
        warnings: list[str] = []
        for student in sorted(set(cohort)):
            breakdown = self.compute_grade(student, scheme,
                                           manual_scores.get(student, {}))
            cells = []
            for group in groups:
                if group in breakdown.missing:
                    cells.append("")
                    warnings.append(
                        f"{student}: missing manual score for component {group!r}")
                else:
                    cells.append(f"{breakdown.per_component[group]:.1f}")
            lines.append(f"{student}," + ",".join(cells) + f",{breakdown.total:.1f}")
        return ExportResult("\n".join(lines) + "\n", warnings)

    def state_snapshot(self) -> dict:
        """Comparable view of derived state (replay-equivalence checks)."""
        with self._lock:
            return {
                key: (rec.completed, rec.first_completed_at, rec.attempt_count)
                for key, rec in sorted(self._records.items())
            }


def replace_record(record: CompletionRecord) -> CompletionRecord:
    return replace(record)


def lecture_picks(fractions: Mapping[str, float],
                  band_low: float = 0.10, band_high: float = 0.25,
                  mastered: float = 0.80) -> list[str]:
    """Questions a vanguard has solved but the bulk of the class has not.

    Returns exercise ids whose completion fraction lies in
    [band_low, band_high], hardest (lowest fraction) first, ties broken by
    id; anything at or above the mastered threshold is never picked.
    """
    if not 0.0 <= band_low < band_high <= mastered <= 1.0:
        raise ValueError("need 0 <= band_low < band_high <= mastered <= 1")
    picked = [(f, ex) for ex, f in fractions.items()
              if band_low <= f <= band_high and f < mastered]
    picked.sort()
    return [ex for _, ex in picked]


@dataclass(frozen=True)
class GradeComponent:
    group: str
    weight: float
    aggregation: str    # per_question_equal_split | all_or_nothing | manual_score

    AGGREGATIONS = ("per_question_equal_split", "all_or_nothing", "manual_score")


@dataclass(frozen=True)
class GradeScheme:
    components: tuple[GradeComponent, ...]

    def validate(self) -> None:
        seen = set()
        for comp in self.components:
            if comp.group in seen:
                raise ValueError(f"duplicate component group {comp.group!r}")
            seen.add(comp.group)
            if comp.aggregation not in GradeComponent.AGGREGATIONS:
                raise ValueError(f"unknown aggregation {comp.aggregation!r}")
            if comp.weight <= 0:
                raise ValueError(f"component {comp.group!r} weight must be positive")
        total = sum(c.weight for c in self.components)
        if total != 100.0:
            raise ValueError(f"component weights sum to {total}, not 100")

    def validate_with_groups(self, groups: Mapping[str, list[str]]) -> None:
        self.validate()
        for comp in self.components:
            if comp.aggregation != "manual_score" and not groups.get(comp.group):
                raise ValueError(
                    f"component {comp.group!r} has no questions in the bank")


@dataclass(frozen=True)
class GradeBreakdown:
    per_component: dict[str, float]
    total: float
    missing: list[str]


@dataclass(frozen=True)
class ExportResult:
    csv: str
    warnings: list[str]


def default_scheme() -> GradeScheme:
    """Course assessment: weekly questions plus four assignments and an essay."""
    return GradeScheme((
        GradeComponent("weekly", 20.0, "per_question_equal_split"),
        GradeComponent("a1", 10.0, "per_question_equal_split"),
        GradeComponent("a2", 15.0, "per_question_equal_split"),
        GradeComponent("a3", 15.0, "per_question_equal_split"),
        GradeComponent("a4", 20.0, "per_question_equal_split"),
        GradeComponent("essay", 20.0, "manual_score"),
    ))


def load_scheme(path: Path | str) -> GradeScheme:
    """Read a scheme file: TOML with a [[component]] table per component."""
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    components = tuple(
        GradeComponent(c["group"], float(c["weight"]), c["aggregation"])
        for c in data.get("component", []))
    scheme = GradeScheme(components)
    scheme.validate()
    return scheme
