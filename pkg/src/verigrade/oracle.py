"""Check a student-written specification against a hidden reference spec.

Two harness programs are generated and sent through the verifier:

  consistency: the reference implementation body, re-specified with the
      student's requires/ensures.  Verifying means the reference behaviour
      satisfies the student's specification.
  capture: a body-less `Stu__` declaration carrying only the student's
      specification, plus a driver that assumes the reference preconditions,
      calls `Stu__`, and asserts each reference postcondition.  Verifying
      means the student's specification entails the reference properties.

Error messages raised here are shown to students, so they must never quote
the reference asset.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import backend, subset
from .backend import BackendConfig, VerificationReport
from .subset import MethodDecl, ProgramUnit, SpecClauses


class OracleCheckError(Exception):
    """Student-safe failure: the message may be shown verbatim as feedback."""


class SignatureMismatch(OracleCheckError):
    def __init__(self):
        super().__init__("signature must not change")


class UnsupportedConstruct(OracleCheckError):
    pass


@dataclass(frozen=True)
class OracleAsset:
    target_name: str
    source: str
    unit: ProgramUnit
    decl: MethodDecl

    @classmethod
    def load(cls, source: str) -> "OracleAsset":
        unit = subset.parse_unit(source)
        for decl in unit.decls:
            if decl.kind == "opaque":
                continue
            if not isinstance(decl, MethodDecl):
                raise ValueError(
                    f"oracle asset's first declaration is a {decl.kind}, not a method")
            if decl.body is None:
                raise ValueError("oracle asset's reference method has no body")
            return cls(decl.name, source, unit, decl)
        raise ValueError("oracle asset contains no method declaration")


@dataclass(frozen=True)
class OracleVerdict:
    consistent: bool
    captures: bool
    consistency_report: VerificationReport
    capture_report: VerificationReport


def _norm(text: str) -> str:
    return " ".join(text.split())


def _signatures_match(student: MethodDecl, oracle: MethodDecl) -> bool:
    def sig(decl: MethodDecl):
        return ([(p.name, _norm(p.type_text)) for p in decl.params],
                [(p.name, _norm(p.type_text)) for p in decl.returns])
    return sig(student) == sig(oracle)


def _check_frames(student_spec: SpecClauses, asset: OracleAsset) -> None:
    stu = [(c.kw, _norm(c.expr.text)) for c in student_spec.frame]
    ora = [(c.kw, _norm(c.expr.text)) for c in asset.decl.spec.frame]
    if stu != ora:
        raise UnsupportedConstruct(
            "frame clauses (modifies/reads) must be left exactly as given")


def _params_text(decl: MethodDecl) -> str:
    return "(" + ", ".join(
        f"{p.name} : {_norm(p.type_text)}" if p.type_text else p.name
        for p in decl.params) + ")"


def _returns_text(decl: MethodDecl) -> str:
    if not decl.returns:
        return ""
    inner = ", ".join(
        f"{p.name} : {_norm(p.type_text)}" if p.type_text else p.name
        for p in decl.returns)
    return f" returns ({inner})"


def _clause_lines(clauses: list, indent: str = "  ") -> str:
    return "".join(f"\n{indent}{c.kw} {c.expr.text}" for c in clauses)


def build_consistency_harness(student_spec: SpecClauses, asset: OracleAsset) -> str:
    """Reference implementation re-specified with the student's clauses."""
    _check_frames(student_spec, asset)
    decl = asset.decl
    header = asset.source[decl.start:decl.header_end]
    kept = decl.spec.decreases + decl.spec.frame
    if decl.body is None:
        raise UnsupportedConstruct("reference implementation is unavailable")
    body = asset.source[decl.body.open_offset:decl.end]
    return (header
            + _clause_lines(student_spec.requires)
            + _clause_lines(student_spec.ensures)
            + _clause_lines(kept)
            + "\n" + body + "\n")


def build_capture_harness(student_spec: SpecClauses, asset: OracleAsset) -> str:
    """Body-less student-spec declaration plus a driver asserting the
    reference postconditions for inputs meeting the reference preconditions."""
    _check_frames(student_spec, asset)
    decl = asset.decl
    if decl.spec.frame:
        raise UnsupportedConstruct(
            "this question's reference specification constrains the heap; "
            "capture checking is not available")
    params = _params_text(decl)
    returns = _returns_text(decl)
    stub = ("method Stu__" + params + returns
            + _clause_lines(student_spec.requires)
            + _clause_lines(student_spec.ensures)
            + "\n")
    lines = []
    for clause in decl.spec.requires:
        lines.append(f"  assume {clause.expr.text};")
    call_args = ", ".join(p.name for p in decl.params)
    if decl.returns:
        outs = ", ".join(p.name for p in decl.returns)
        lines.append(f"  var {outs} := Stu__({call_args});")
    else:
        lines.append(f"  Stu__({call_args});")
    for clause in decl.spec.ensures:
        lines.append(f"  assert {clause.expr.text};")
    driver = ("method Capture__" + params + "\n{\n" + "\n".join(lines) + "\n}\n")
    return stub + "\n" + driver


def extract_student_decl(student_source: str, asset: OracleAsset) -> MethodDecl:
    try:
        unit = subset.parse_unit(student_source)
    except subset.SubsetError as e:
        raise OracleCheckError(f"submission does not parse: {e}") from e
    decl = unit.find_decl(asset.target_name)
    if decl is None:
        raise OracleCheckError(
            f"submission must keep a method named {asset.target_name!r}")
    if not isinstance(decl, MethodDecl):
        raise OracleCheckError(
            f"{asset.target_name!r} must remain a method declaration")
    if not _signatures_match(decl, asset.decl):
        raise SignatureMismatch()
    return decl


def check_spec(student_source: str, asset: OracleAsset,
               cfg: BackendConfig) -> OracleVerdict:
    """Run both harnesses and derive the verdict from their report statuses."""
    decl = extract_student_decl(student_source, asset)
    student_spec = subset.extract_spec(decl)
    consistency = build_consistency_harness(student_spec, asset)
    capture = build_capture_harness(student_spec, asset)
    consistency_report = backend.verify(consistency, cfg)
    capture_report = backend.verify(capture, cfg)
    return OracleVerdict(
        consistent=consistency_report.status is backend.Status.PASS,
        captures=capture_report.status is backend.Status.PASS,
        consistency_report=consistency_report,
        capture_report=capture_report,
    )


def self_check(asset: OracleAsset, cfg: BackendConfig) -> OracleVerdict:
    """Authoring gate: the reference spec must be consistent with and
    captured by itself."""
    return check_spec(asset.source, asset, cfg)
