"""Gradual "test mode": turn static verification constructs into runtime checks.

assert/assume become expect statements, method preconditions become entry
expects, postconditions are checked before every return and at the end of the
body, and loop invariants are checked before the loop and at the end of each
iteration.  Transformed clauses are removed so the output compiles without
any verification; everything else is preserved byte for byte.

`old(p)` over a value parameter is rewritten to read a `p__old` snapshot
taken at entry.  Anything else under `old(...)` cannot be checked at run
time; such clauses are dropped and reported, never silently ignored.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import subset
from .subset import (Block, CheckStmt, FunctionDecl, MethodDecl, ProgramUnit,
                     ReturnStmt, WhileStmt, walk_stmts)

_OLD_RE = re.compile(r"\bold\b")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_'?]*\Z")


@dataclass(frozen=True)
class TransformOptions:
    check_requires: bool = True
    check_ensures: bool = True
    check_asserts: bool = True
    check_assumes: bool = True
    check_invariants: bool = True

    def any_on(self) -> bool:
        return (self.check_requires or self.check_ensures or self.check_asserts
                or self.check_assumes or self.check_invariants)


@dataclass(frozen=True)
class SkippedClause:
    reason: str         # "unsupported-old" | "function-requires" | "function-ensures" | "bodyless-method"
    kw: str
    text: str
    offset: int


@dataclass
class TransformReport:
    rewritten: dict[str, int] = field(
        default_factory=lambda: {"asserts": 0, "assumes": 0, "requires": 0,
                                 "ensures": 0, "invariants": 0})
    skipped: list[SkippedClause] = field(default_factory=list)


def rewrite_old(text: str, params: set[str]) -> tuple[str | None, list[int]]:
    """Rewrite old(p) to p__old for value parameters p.

    Returns (rewritten, []) on success or (None, offsets) when any old()
    argument is not a bare parameter name.
    """
    out: list[str] = []
    bad: list[int] = []
    last = 0
    for m in _OLD_RE.finditer(text):
        i = m.end()
        while i < len(text) and text[i].isspace():
            i += 1
        if i >= len(text) or text[i] != "(":
            continue    # `old` used as a plain identifier
        depth = 0
        j = i
        while j < len(text):
            if text[j] == "(":
                depth += 1
            elif text[j] == ")":
                depth -= 1
                if depth == 0:
                    break
            j += 1
        if depth != 0:
            bad.append(m.start())
            continue
        inner = text[i + 1:j].strip()
        if _IDENT_RE.match(inner) and inner in params:
            out.append(text[last:m.start()])
            out.append(f"{inner}__old")
            last = j + 1
        else:
            bad.append(m.start())
    if bad:
        return None, bad
    out.append(text[last:])
    return "".join(out), []


@dataclass
class _MethodPlan:
    entry_expects: list[str]
    snapshots: list[str]
    ensures_texts: list[str]
    skipped: list[SkippedClause]


def _plan_method(decl: MethodDecl, opts: TransformOptions) -> _MethodPlan:
    plan = _MethodPlan([], [], [], [])
    params = {p.name for p in decl.params}
    if opts.check_requires:
        for clause in decl.spec.requires:
            if decl.body is None:
                plan.skipped.append(SkippedClause(
                    "bodyless-method", "requires", clause.expr.text, clause.kw_offset))
            else:
                plan.entry_expects.append(clause.expr.text)
    if opts.check_ensures:
        seen_snap: set[str] = set()
        for clause in decl.spec.ensures:
            if decl.body is None:
                plan.skipped.append(SkippedClause(
                    "bodyless-method", "ensures", clause.expr.text, clause.kw_offset))
                continue
            rewritten, bad = rewrite_old(clause.expr.text, params)
            if rewritten is None:
                plan.skipped.append(SkippedClause(
                    "unsupported-old", "ensures", clause.expr.text,
                    clause.kw_offset))
                continue
            for p in decl.params:   # declaration order keeps output deterministic
                if p.name in seen_snap:
                    continue
                if re.search(rf"\b{re.escape(p.name)}__old\b", rewritten):
                    seen_snap.add(p.name)
                    plan.snapshots.append(p.name)
            plan.ensures_texts.append(rewritten)
    return plan


def _line_indent(source: str, offset: int) -> str:
    line_start = source.rfind("\n", 0, offset) + 1
    i = line_start
    while i < len(source) and source[i] in " \t":
        i += 1
    return source[line_start:i]


def _block_tail(block: Block) -> int:
    """Insertion point for end-of-block statements (before the close brace)."""
    if block.stmts:
        return block.stmts[-1].end
    return block.open_offset + 1


def _body_indent(source: str, block: Block, owner_offset: int) -> str:
    if block.stmts:
        return _line_indent(source, block.stmts[0].start)
    return _line_indent(source, owner_offset) + "  "


def to_test_mode(unit: ProgramUnit, opts: TransformOptions = TransformOptions()) -> ProgramUnit:
    """Rewrite the unit for runtime checking; identity when all flags are off."""
    if not opts.any_on():
        return unit
    edits = _collect_edits(unit, opts)
    if not edits:
        return unit
    new_source = _apply_edits(unit.source, edits)
    return subset.parse_unit(new_source)


def _collect_edits(unit: ProgramUnit, opts: TransformOptions) -> list[tuple[int, int, str]]:
    source = unit.source
    deletions: list[tuple[int, int]] = []
    inserts: dict[int, list[str]] = {}

    def insert(pos: int, text: str) -> None:
        inserts.setdefault(pos, []).append(text)

    for decl in unit.decls:
        if isinstance(decl, MethodDecl):
            plan = _plan_method(decl, opts)
            if opts.check_requires:
                deletions.extend((c.cut_start, c.end) for c in decl.spec.requires)
            if opts.check_ensures:
                deletions.extend((c.cut_start, c.end) for c in decl.spec.ensures)
            if decl.body is not None:
                indent = _body_indent(source, decl.body, decl.start)
                entry = ""
                for text in plan.entry_expects:
                    entry += f"\n{indent}expect {text};"
                for name in plan.snapshots:
                    entry += f"\n{indent}var {name}__old := {name};"
                if entry:
                    insert(decl.body.open_offset + 1, entry)
                if plan.ensures_texts:
                    returns = [s for s in walk_stmts(decl.body)
                               if isinstance(s, ReturnStmt)]
                    for ret in returns:
                        ind = _line_indent(source, ret.start)
                        insert(ret.lead_start,
                               "".join(f"\n{ind}expect {t};" for t in plan.ensures_texts))
                    last = decl.body.stmts[-1] if decl.body.stmts else None
                    if not isinstance(last, ReturnStmt):
                        insert(_block_tail(decl.body),
                               "".join(f"\n{indent}expect {t};"
                                       for t in plan.ensures_texts))
            _transform_stmts(source, decl.body, opts, deletions, insert)
        elif isinstance(decl, FunctionDecl):
            if opts.check_requires:
                deletions.extend((c.cut_start, c.end) for c in decl.spec.requires)
            if opts.check_ensures:
                deletions.extend((c.cut_start, c.end) for c in decl.spec.ensures)

    edits = [(s, e, "") for s, e in deletions]
    edits.extend((pos, pos, "".join(texts)) for pos, texts in inserts.items())
    return edits


def _transform_stmts(source: str, body: Block | None, opts: TransformOptions,
                     deletions: list[tuple[int, int]], insert) -> None:
    if body is None:
        return
    for stmt in walk_stmts(body):
        if isinstance(stmt, CheckStmt):
            if (stmt.kw == "assert" and opts.check_asserts) or \
               (stmt.kw == "assume" and opts.check_assumes):
                deletions.append((stmt.start, stmt.start + len(stmt.kw)))
                insert(stmt.start + len(stmt.kw), "expect")
        elif isinstance(stmt, WhileStmt) and opts.check_invariants and stmt.invariants:
            texts = [c.expr.text for c in stmt.invariants]
            deletions.extend((c.cut_start, c.end) for c in stmt.invariants)
            outer = _line_indent(source, stmt.start)
            insert(stmt.lead_start,
                   "".join(f"\n{outer}expect {t};" for t in texts))
            if stmt.body is not None:
                inner = _body_indent(source, stmt.body, stmt.start)
                insert(_block_tail(stmt.body),
                       "".join(f"\n{inner}expect {t};" for t in texts))


def _apply_edits(source: str, edits: list[tuple[int, int, str]]) -> str:
    edits = sorted(edits, key=lambda e: (e[0], e[1]))
    for (s1, e1, _), (s2, _e2, _2) in zip(edits, edits[1:]):
        if e1 > s2:
            raise ValueError(f"overlapping edits at {s1}..{e1} and {s2}")
    out: list[str] = []
    last = 0
    for s, e, text in edits:
        out.append(source[last:s])
        out.append(text)
        last = e
    out.append(source[last:])
    return "".join(out)


def _clause_counts(unit: ProgramUnit) -> dict[str, int]:
    counts = {"asserts": 0, "assumes": 0, "requires": 0, "ensures": 0,
              "invariants": 0}
    for decl in unit.decls:
        spec = getattr(decl, "spec", None)
        if spec is not None:
            counts["requires"] += len(spec.requires)
            counts["ensures"] += len(spec.ensures)
        body = getattr(decl, "body", None)
        if isinstance(body, Block):
            for stmt in walk_stmts(body):
                if isinstance(stmt, CheckStmt):
                    if stmt.kw == "assert":
                        counts["asserts"] += 1
                    elif stmt.kw == "assume":
                        counts["assumes"] += 1
                elif isinstance(stmt, WhileStmt):
                    counts["invariants"] += len(stmt.invariants)
    return counts


def _clause_multiset(unit: ProgramUnit, kw: str) -> dict[str, int]:
    out: dict[str, int] = {}
    for decl in unit.decls:
        spec = getattr(decl, "spec", None)
        if spec is None:
            continue
        for clause in getattr(spec, kw):
            out[clause.expr.text] = out.get(clause.expr.text, 0) + 1
    return out


def _would_skip(unit: ProgramUnit) -> list[SkippedClause]:
    """Clauses a full transform cannot turn into runtime checks."""
    skipped: list[SkippedClause] = []
    opts = TransformOptions()
    for decl in unit.decls:
        if isinstance(decl, MethodDecl):
            skipped.extend(_plan_method(decl, opts).skipped)
        elif isinstance(decl, FunctionDecl):
            for clause in decl.spec.requires:
                skipped.append(SkippedClause(
                    "function-requires", "requires", clause.expr.text, clause.kw_offset))
            for clause in decl.spec.ensures:
                skipped.append(SkippedClause(
                    "function-ensures", "ensures", clause.expr.text, clause.kw_offset))
    return skipped


def transform_report(unit_before: ProgramUnit, unit_after: ProgramUnit) -> TransformReport:
    """Summarize what a transformation rewrote and what it had to skip."""
    report = TransformReport()
    before = _clause_counts(unit_before)
    after = _clause_counts(unit_after)

    skipped_by_kw = {"requires": 0, "ensures": 0}
    for cand in _would_skip(unit_before):
        kw_key = cand.kw
        remaining = _clause_multiset(unit_after, kw_key).get(cand.text, 0)
        if remaining < _clause_multiset(unit_before, kw_key).get(cand.text, 0):
            report.skipped.append(cand)
            skipped_by_kw[kw_key] += 1

    report.rewritten["asserts"] = before["asserts"] - after["asserts"]
    report.rewritten["assumes"] = before["assumes"] - after["assumes"]
    report.rewritten["requires"] = (before["requires"] - after["requires"]
                                    - skipped_by_kw["requires"])
    report.rewritten["ensures"] = (before["ensures"] - after["ensures"]
                                   - skipped_by_kw["ensures"])
    report.rewritten["invariants"] = before["invariants"] - after["invariants"]
    return report
