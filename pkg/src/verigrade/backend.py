"""Verifier execution: external tool in a resource-limited subprocess, or a
deterministic directive-driven mock for hermetic tests.

Mock directives are ordinary comments in the source under test; the first
match wins:

    // MOCK-VERIFY: verified=3 errors=0
    // MOCK-VERIFY: timeout
    // MOCK-VERIFY: toolerror
    // MOCK-VERIFY: sleep=0.2 verified=1 errors=0
    // MOCK-RUN-STDOUT: <base64 of stdout>
    // MOCK-RUN-STDOUT-GZ: <base64 of gzipped stdout, for long outputs>
    // MOCK-RUN: timeout | exit=<n> | compile-error

Absent directives the mock verifies Pass(0, 0) and runs with empty stdout.
External invocation is `<verifier> verify <file>` / `<verifier> run <file>`;
the summary line is matched by SUMMARY_RE below.
"""

from __future__ import annotations

import base64
import enum
import gzip
import os
import re
import resource
import shutil
import signal
import subprocess
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

# Bit-exact output contract for the external verifier's summary line.
SUMMARY_RE = re.compile(
    r"^Dafny program verifier finished with (\d+) verified, (\d+) errors?\s*$")

_POSITION_RE = re.compile(r"^(.*)\((\d+),(\d+)\): (.*)$")

GRACE_SECONDS = 2.0


class Status(enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    TIMEOUT = "timeout"
    TOOL_ERROR = "tool_error"


@dataclass(frozen=True)
class Diagnostic:
    message: str
    position: tuple[int, int] | None = None


@dataclass(frozen=True)
class VerificationReport:
    status: Status
    verified_count: int = 0
    error_count: int = 0
    diagnostics: tuple[Diagnostic, ...] = ()
    duration: float = 0.0


@dataclass(frozen=True)
class RunReport:
    exit_status: int
    stdout: bytes
    stderr: bytes
    duration: float
    timed_out: bool


class ToolOutputUnrecognized(Exception):
    pass


class CompileFailed(Exception):
    def __init__(self, diagnostics: tuple[Diagnostic, ...] = ()):
        super().__init__("compilation failed")
        self.diagnostics = diagnostics


@dataclass
class BackendConfig:
    backend: str = "mock"                    # "mock" | "external"
    verifier_cmd: str | None = None
    verify_args: tuple[str, ...] = ("verify", "{file}")
    run_args: tuple[str, ...] = ("run", "{file}")
    timeout: float = 30.0
    max_memory: int | None = None
    work_dir: Path | None = None             # parent for per-call temp dirs

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.backend == "external" and not self.verifier_cmd:
            raise ValueError("external backend needs a verifier command")

    @classmethod
    def from_env(cls, **overrides) -> "BackendConfig":
        """Construct a config; the environment wins over passed values."""
        cfg = dict(overrides)
        cmd = os.environ.get("VERIGRADE_VERIFIER_CMD")
        if cmd:
            cfg["verifier_cmd"] = cmd
            cfg["backend"] = "external"
        secs = os.environ.get("VERIGRADE_TIMEOUT_SECS")
        if secs:
            cfg["timeout"] = float(secs)
        return cls(**cfg)


@dataclass(frozen=True)
class ParsedOutput:
    verified_count: int
    error_count: int
    diagnostics: tuple[Diagnostic, ...]


def parse_verifier_output(text: str) -> ParsedOutput:
    """Extract counts from the tool's final summary line.

    Raises ToolOutputUnrecognized when no summary line is present.  Lines
    before the summary that look like diagnostics become Diagnostic entries.
    """
    summary = None
    diagnostics: list[Diagnostic] = []
    for line in text.splitlines():
        m = SUMMARY_RE.match(line)
        if m:
            summary = (int(m.group(1)), int(m.group(2)))
            continue
        pos = _POSITION_RE.match(line)
        if pos:
            diagnostics.append(Diagnostic(pos.group(4),
                                          (int(pos.group(2)), int(pos.group(3)))))
        elif "rror" in line and line.strip():
            diagnostics.append(Diagnostic(line.strip()))
    if summary is None:
        raise ToolOutputUnrecognized("no verifier summary line found")
    return ParsedOutput(summary[0], summary[1], tuple(diagnostics))


# -- mock backend ------------------------------------------------------------

# Directives work as line or block comments; block form ends at "*/",
# which the field parser ignores.
_MOCK_VERIFY_RE = re.compile(r"(?://|/\*)\s*MOCK-VERIFY:\s*(.+)")
_MOCK_STDOUT_RE = re.compile(r"(?://|/\*)\s*MOCK-RUN-STDOUT:\s*([A-Za-z0-9+/=]+)")
_MOCK_STDOUT_GZ_RE = re.compile(r"(?://|/\*)\s*MOCK-RUN-STDOUT-GZ:\s*([A-Za-z0-9+/=]+)")
_MOCK_RUN_RE = re.compile(r"(?://|/\*)\s*MOCK-RUN:\s*(\S+)")


def _mock_verify(source: str) -> VerificationReport:
    m = _MOCK_VERIFY_RE.search(source)
    if not m:
        return VerificationReport(Status.PASS)
    directive = m.group(1).strip()
    verified = errors = 0
    for part in directive.split():
        if part == "timeout":
            return VerificationReport(Status.TIMEOUT)
        if part == "toolerror":
            return VerificationReport(
                Status.TOOL_ERROR,
                diagnostics=(Diagnostic("mock tool error"),))
        if part.startswith("sleep="):
            time.sleep(float(part.split("=", 1)[1]))
        elif part.startswith("verified="):
            verified = int(part.split("=", 1)[1])
        elif part.startswith("errors="):
            errors = int(part.split("=", 1)[1])
    status = Status.PASS if errors == 0 else Status.FAIL
    diags = tuple(Diagnostic(f"mock error {i + 1}") for i in range(errors))
    return VerificationReport(status, verified, errors, diags)


def _mock_run(source: str) -> RunReport:
    m = _MOCK_RUN_RE.search(source)
    if m:
        directive = m.group(1)
        if directive == "timeout":
            return RunReport(-signal.SIGKILL, b"", b"", 0.0, True)
        if directive == "compile-error":
            raise CompileFailed((Diagnostic("mock compile error"),))
        if directive.startswith("exit="):
            code = int(directive.split("=", 1)[1])
            return RunReport(code, b"", b"", 0.0, False)
    stdout = b""
    gz = _MOCK_STDOUT_GZ_RE.search(source)
    sm = _MOCK_STDOUT_RE.search(source)
    if gz:
        stdout = gzip.decompress(base64.b64decode(gz.group(1)))
    elif sm:
        stdout = base64.b64decode(sm.group(1))
    return RunReport(0, stdout, b"", 0.0, False)


# -- external backend ---------------------------------------------------------

def _limit_resources(max_memory: int | None):
    def apply():
        os.setsid()
        if max_memory:
            resource.setrlimit(resource.RLIMIT_AS, (max_memory, max_memory))
    return apply


def _run_tool(argv: list[str], cfg: BackendConfig) -> tuple[int, bytes, bytes, float, bool]:
    start = time.monotonic()
    proc = subprocess.Popen(
        argv,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        stdin=subprocess.DEVNULL,
        preexec_fn=_limit_resources(cfg.max_memory),
    )
    timed_out = False
    try:
        stdout, stderr = proc.communicate(timeout=cfg.timeout)
    except subprocess.TimeoutExpired:
        timed_out = True
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        stdout, stderr = proc.communicate()
    return proc.returncode, stdout, stderr, time.monotonic() - start, timed_out


def _with_source_file(source: str, cfg: BackendConfig):
    tmp = tempfile.mkdtemp(prefix="verigrade-", dir=cfg.work_dir)
    path = Path(tmp) / "submission.dfy"
    path.write_text(source, encoding="utf-8")
    return tmp, path


def verify(source: str, cfg: BackendConfig) -> VerificationReport:
    """Verify one complete compilation unit and report parsed counts.

    The subprocess is always reaped and the temp directory removed, also on
    timeout; wall clock is bounded by cfg.timeout plus a kill grace period.
    """
    if cfg.backend == "mock":
        return _mock_verify(source)
    tmp, path = _with_source_file(source, cfg)
    try:
        argv = [cfg.verifier_cmd] + [a.format(file=path) for a in cfg.verify_args]
        try:
            code, out, err, duration, timed_out = _run_tool(argv, cfg)
        except FileNotFoundError:
            return VerificationReport(
                Status.TOOL_ERROR,
                diagnostics=(Diagnostic(f"verifier binary not found: {cfg.verifier_cmd}"),))
        if timed_out:
            return VerificationReport(Status.TIMEOUT, duration=duration)
        text = out.decode("utf-8", errors="replace")
        try:
            parsed = parse_verifier_output(text)
        except ToolOutputUnrecognized:
            detail = (err.decode("utf-8", errors="replace").strip()
                      or text.strip() or "no output")
            return VerificationReport(
                Status.TOOL_ERROR, duration=duration,
                diagnostics=(Diagnostic(f"unrecognized verifier output: {detail[:200]}"),))
        if parsed.error_count == 0 and code == 0:
            status = Status.PASS
        elif parsed.error_count > 0:
            status = Status.FAIL
        else:
            status = Status.TOOL_ERROR
        return VerificationReport(status, parsed.verified_count,
                                  parsed.error_count, parsed.diagnostics, duration)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def run_program(source: str, cfg: BackendConfig) -> RunReport:
    """Compile and execute the program, capturing stdout bytes exactly."""
    if cfg.backend == "mock":
        return _mock_run(source)
    tmp, path = _with_source_file(source, cfg)
    try:
        argv = [cfg.verifier_cmd] + [a.format(file=path) for a in cfg.run_args]
        try:
            code, out, err, duration, timed_out = _run_tool(argv, cfg)
        except FileNotFoundError:
            raise CompileFailed(
                (Diagnostic(f"verifier binary not found: {cfg.verifier_cmd}"),))
        if not timed_out and code != 0:
            err_text = err.decode("utf-8", errors="replace")
            out_text = out.decode("utf-8", errors="replace")
            if "rror" in err_text or "rror" in out_text:
                diags = tuple(Diagnostic(line.strip())
                              for line in (err_text + out_text).splitlines()
                              if "rror" in line)
                raise CompileFailed(diags)
        return RunReport(code, out, err, duration, timed_out)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


# -- verdicts ------------------------------------------------------------------

@dataclass(frozen=True)
class AttemptVerdict:
    completed: bool
    feedback: str
    verified_count: int = 0
    error_count: int = 0


def _counts_line(report: VerificationReport) -> str:
    return f"{report.verified_count} verified, {report.error_count} errors"


def judge(exercise, verify_report: VerificationReport | None = None,
          run_report: RunReport | None = None,
          oracle_verdict=None,
          char_result=None,
          compile_failed: bool = False) -> AttemptVerdict:
    """Fold check results into a terse verdict.

    Feedback stays within the counts-and-status vocabulary: it never includes
    expected output, oracle text, or any other hidden asset content.
    """
    from .bank import CheckMode

    mode = exercise.check.mode

    if char_result is not None and not char_result.passed:
        return AttemptVerdict(
            False,
            f"program is {char_result.count} characters; "
            f"must be shorter than {char_result.limit}")

    if mode is CheckMode.ORACLE_SPEC:
        if oracle_verdict is None:
            return AttemptVerdict(False, "specification check did not run")
        wants = exercise.check.oracle_checks
        ok_consistent = oracle_verdict.consistent
        ok_captures = oracle_verdict.captures
        completed = {
            "consistency": ok_consistent,
            "capture": ok_captures,
            "both": ok_consistent and ok_captures,
        }[wants]
        feedback = (f"spec consistent with reference: {'yes' if ok_consistent else 'no'}; "
                    f"captures required properties: {'yes' if ok_captures else 'no'}")
        rep = oracle_verdict.consistency_report
        return AttemptVerdict(completed, feedback,
                              rep.verified_count, rep.error_count)

    if verify_report is None:
        return AttemptVerdict(False, "verification did not run")
    if verify_report.status is Status.TIMEOUT:
        return AttemptVerdict(False, "verification timed out")
    if verify_report.status is Status.TOOL_ERROR:
        return AttemptVerdict(False, "verification tool error")

    counts = _counts_line(verify_report)
    verified_ok = verify_report.status is Status.PASS
    required = exercise.check.required_verified_min
    if verified_ok and required is not None and verify_report.verified_count < required:
        return AttemptVerdict(
            False, f"{counts}; at least {required} assertions must verify",
            verify_report.verified_count, verify_report.error_count)

    if mode is CheckMode.VERIFY_ONLY:
        return AttemptVerdict(verified_ok, counts,
                              verify_report.verified_count, verify_report.error_count)

    # VerifyAndRun
    if not verified_ok:
        return AttemptVerdict(False, counts,
                              verify_report.verified_count, verify_report.error_count)
    if compile_failed:
        return AttemptVerdict(False, f"{counts}; compilation failed",
                              verify_report.verified_count, verify_report.error_count)
    if run_report is None:
        return AttemptVerdict(False, f"{counts}; program did not run",
                              verify_report.verified_count, verify_report.error_count)
    if run_report.timed_out:
        return AttemptVerdict(False, f"{counts}; program timed out",
                              verify_report.verified_count, verify_report.error_count)
    if run_report.exit_status != 0:
        return AttemptVerdict(
            False, f"{counts}; program exited with status {run_report.exit_status}",
            verify_report.verified_count, verify_report.error_count)

    produced = run_report.stdout
    if exercise.normalize_eol:
        produced = produced.replace(b"\r\n", b"\n")
    if produced != exercise.expected_stdout:
        return AttemptVerdict(False, f"{counts}; output mismatch",
                              verify_report.verified_count, verify_report.error_count)
    return AttemptVerdict(True, counts,
                          verify_report.verified_count, verify_report.error_count)
