"""Exercise bank: load and validate exercise files, splice answers, enforce limits.

An exercise lives in a `<id>.exercise` file: front matter between two `---`
lines, template text after the second delimiter, byte for byte.  Hidden
sibling assets (`<id>.oracle.dfy`, `<id>.out`) are resolved at load time and
must never be served to students.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

from . import subset

PLACEHOLDER = "[???]"

FRONT_MATTER_KEYS = {
    "id", "title", "week", "kind", "mode", "char_limit", "weight_group",
    "required_verified_min", "normalize_eol", "oracle_checks", "test_mode",
}


class TemplateError(ValueError):
    pass


class NoPlaceholder(TemplateError):
    def __init__(self):
        super().__init__(f"template contains no {PLACEHOLDER} placeholder")


class MultiplePlaceholders(TemplateError):
    def __init__(self, offsets: list[int]):
        super().__init__(
            f"template contains {len(offsets)} placeholders at offsets {offsets}")
        self.offsets = offsets


@dataclass(frozen=True)
class PlaceholderInfo:
    offset: int


def validate_template(text: str) -> PlaceholderInfo:
    """Locate the single placeholder token; error on zero or many."""
    offsets = []
    start = 0
    while True:
        i = text.find(PLACEHOLDER, start)
        if i < 0:
            break
        offsets.append(i)
        start = i + len(PLACEHOLDER)
    if not offsets:
        raise NoPlaceholder()
    if len(offsets) > 1:
        raise MultiplePlaceholders(offsets)
    return PlaceholderInfo(offsets[0])


@dataclass(frozen=True)
class Template:
    text: str
    placeholder_offset: int

    @classmethod
    def parse(cls, text: str) -> "Template":
        return cls(text, validate_template(text).offset)


def splice(template: Template, answer: str) -> str:
    """Replace the placeholder with the answer verbatim: no trimming, no escaping."""
    off = template.placeholder_offset
    return template.text[:off] + answer + template.text[off + len(PLACEHOLDER):]


class CheckMode(enum.Enum):
    VERIFY_ONLY = "VerifyOnly"
    VERIFY_AND_RUN = "VerifyAndRun"
    ORACLE_SPEC = "OracleSpec"


class ExerciseKind(enum.Enum):
    MASTERY = "Mastery"
    ASSIGNMENT_PART = "AssignmentPart"


@dataclass(frozen=True)
class CheckPolicy:
    mode: CheckMode
    required_verified_min: int | None = None
    oracle_checks: str = "both"     # "consistency" | "capture" | "both"
    notes: str = ""


@dataclass(frozen=True)
class Exercise:
    id: str
    title: str
    week: int
    kind: ExerciseKind
    check: CheckPolicy
    template: Template
    weight_group: str
    hidden_oracle: Path | None = None
    oracle_source: str | None = None
    expected_stdout: bytes | None = None
    char_limit: int | None = None
    normalize_eol: bool = False
    offer_test_mode: bool = False   # accept debugging runs with runtime checks


@dataclass(frozen=True)
class CharLimitResult:
    passed: bool
    count: int
    limit: int


def check_char_limit(submission: str, limit: int) -> CharLimitResult:
    """Strict "shorter than" check over Unicode scalar values.

    Line endings are normalized to LF before counting; whitespace and
    comments all count.
    """
    if limit <= 0:
        raise ValueError("limit must be positive")
    count = len(submission.replace("\r\n", "\n"))
    return CharLimitResult(count < limit, count, limit)


@dataclass(frozen=True)
class BankIssue:
    kind: str       # MalformedFrontMatter | DuplicateId | MissingAsset | TemplateInvalid
    path: Path
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.kind}: {self.message}"


class BankLoadError(Exception):
    def __init__(self, issues: list[BankIssue]):
        super().__init__("\n".join(str(i) for i in issues))
        self.issues = issues


@dataclass(frozen=True)
class Bank:
    root: Path
    exercises: dict[str, Exercise] = field(default_factory=dict)

    def __getitem__(self, exercise_id: str) -> Exercise:
        return self.exercises[exercise_id]

    def get(self, exercise_id: str) -> Exercise | None:
        return self.exercises.get(exercise_id)

    def ids(self) -> list[str]:
        return list(self.exercises)

    def groups(self) -> dict[str, list[str]]:
        """weight_group -> exercise ids, bank order."""
        out: dict[str, list[str]] = {}
        for ex in self.exercises.values():
            out.setdefault(ex.weight_group, []).append(ex.id)
        return out

    def released(self, week: int) -> list[Exercise]:
        return [ex for ex in self.exercises.values() if ex.week <= week]


def _parse_front_matter(raw: str, path: Path) -> tuple[dict[str, str], str]:
    lines = raw.split("\n")
    if not lines or lines[0].strip() != "---":
        raise ValueError("file must start with a --- line")
    fields: dict[str, str] = {}
    i = 1
    while i < len(lines):
        line = lines[i]
        if line.strip() == "---":
            break
        i += 1
        if not line.strip():
            continue
        if ":" not in line:
            raise ValueError(f"front matter line {i} is not a key: value pair")
        key, value = line.split(":", 1)
        key = key.strip()
        if key not in FRONT_MATTER_KEYS:
            raise ValueError(f"unknown front matter key {key!r}")
        if key in fields:
            raise ValueError(f"duplicate front matter key {key!r}")
        fields[key] = value.strip()
    else:
        raise ValueError("missing closing --- delimiter")
    template_text = "\n".join(lines[i + 1:])
    return fields, template_text


def _load_exercise(path: Path, issues: list[BankIssue]) -> Exercise | None:
    def bad(kind: str, message: str) -> None:
        issues.append(BankIssue(kind, path, message))

    raw = path.read_text(encoding="utf-8")
    try:
        fields, template_text = _parse_front_matter(raw, path)
    except ValueError as e:
        bad("MalformedFrontMatter", str(e))
        return None

    for key in ("id", "title", "week", "kind", "mode"):
        if key not in fields:
            bad("MalformedFrontMatter", f"missing required key {key!r}")
            return None

    ex_id = fields["id"]
    if ex_id != path.stem:
        bad("MalformedFrontMatter",
            f"id {ex_id!r} does not match file name {path.stem!r}")
        return None

    try:
        week = int(fields["week"])
    except ValueError:
        bad("MalformedFrontMatter", f"week is not an integer: {fields['week']!r}")
        return None
    if not 1 <= week <= 12:
        bad("MalformedFrontMatter", f"week {week} outside 1..12")
        return None

    try:
        kind = ExerciseKind(fields["kind"])
    except ValueError:
        bad("MalformedFrontMatter", f"unknown kind {fields['kind']!r}")
        return None
    try:
        mode = CheckMode(fields["mode"])
    except ValueError:
        bad("MalformedFrontMatter", f"unknown mode {fields['mode']!r}")
        return None

    char_limit = None
    if "char_limit" in fields:
        try:
            char_limit = int(fields["char_limit"])
        except ValueError:
            bad("MalformedFrontMatter", f"char_limit is not an integer")
            return None
        if char_limit <= 0:
            bad("MalformedFrontMatter", "char_limit must be positive")
            return None
        if mode is not CheckMode.VERIFY_AND_RUN:
            bad("MalformedFrontMatter",
                "char_limit requires mode VerifyAndRun (output comparison)")
            return None

    required_min = None
    if "required_verified_min" in fields:
        try:
            required_min = int(fields["required_verified_min"])
        except ValueError:
            bad("MalformedFrontMatter", "required_verified_min is not an integer")
            return None

    normalize_eol = False
    if "normalize_eol" in fields:
        if fields["normalize_eol"] not in ("true", "false"):
            bad("MalformedFrontMatter", "normalize_eol must be true or false")
            return None
        normalize_eol = fields["normalize_eol"] == "true"

    offer_test_mode = False
    if "test_mode" in fields:
        if fields["test_mode"] not in ("true", "false"):
            bad("MalformedFrontMatter", "test_mode must be true or false")
            return None
        offer_test_mode = fields["test_mode"] == "true"

    oracle_checks = fields.get("oracle_checks", "both")
    if oracle_checks not in ("consistency", "capture", "both"):
        bad("MalformedFrontMatter", f"unknown oracle_checks {oracle_checks!r}")
        return None

    weight_group = fields.get("weight_group", "")
    if not weight_group:
        if kind is ExerciseKind.MASTERY:
            weight_group = "weekly"
        else:
            bad("MalformedFrontMatter", "assignment parts must name a weight_group")
            return None

    try:
        template = Template.parse(template_text)
    except NoPlaceholder:
        bad("TemplateInvalid", "no placeholder in template")
        return None
    except MultiplePlaceholders as e:
        bad("TemplateInvalid", f"multiple placeholders at offsets {e.offsets}")
        return None

    expected_stdout = None
    if mode is CheckMode.VERIFY_AND_RUN:
        out_path = path.with_suffix(".out")
        if not out_path.exists():
            bad("MissingAsset", f"expected-output asset {out_path.name} not found")
            return None
        expected_stdout = out_path.read_bytes()

    oracle_path = None
    oracle_source = None
    if mode is CheckMode.ORACLE_SPEC:
        oracle_path = path.with_suffix(".oracle.dfy")
        if not oracle_path.exists():
            bad("MissingAsset", f"oracle asset {oracle_path.name} not found")
            return None
        oracle_source = oracle_path.read_text(encoding="utf-8")
        problem = _oracle_structure_problem(oracle_source)
        if problem:
            bad("MissingAsset", f"oracle asset {oracle_path.name} invalid: {problem}")
            return None

    return Exercise(
        id=ex_id,
        title=fields["title"],
        week=week,
        kind=kind,
        check=CheckPolicy(mode, required_min, oracle_checks),
        template=template,
        weight_group=weight_group,
        hidden_oracle=oracle_path,
        oracle_source=oracle_source,
        expected_stdout=expected_stdout,
        char_limit=char_limit,
        normalize_eol=normalize_eol,
        offer_test_mode=offer_test_mode,
    )


def _oracle_structure_problem(source: str) -> str | None:
    try:
        unit = subset.parse_unit(source)
    except subset.SubsetError as e:
        return f"does not parse ({e})"
    for decl in unit.decls:
        if decl.kind == "method":
            if decl.body is None:
                return f"reference method {decl.name!r} has no body"
            return None
        if decl.kind != "opaque":
            return f"first declaration is a {decl.kind}, not a method"
    return "no method declaration found"


def load_bank(root: Path | str) -> Bank:
    """Load every *.exercise under root; collect all issues before failing."""
    root = Path(root)
    if not root.is_dir():
        raise BankLoadError([BankIssue("MalformedFrontMatter", root,
                                       "bank root is not a directory")])
    issues: list[BankIssue] = []
    seen: dict[str, Path] = {}
    exercises: list[Exercise] = []
    for path in sorted(root.rglob("*.exercise")):
        ex = _load_exercise(path, issues)
        if ex is None:
            continue
        if ex.id in seen:
            issues.append(BankIssue(
                "DuplicateId", path,
                f"id {ex.id!r} already defined in {seen[ex.id]}"))
            continue
        seen[ex.id] = path
        exercises.append(ex)
    if issues:
        raise BankLoadError(issues)
    exercises.sort(key=lambda e: e.id)
    return Bank(root, {e.id: e for e in exercises})
