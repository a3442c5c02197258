"""HTTP gateway and attempt pipeline tying the modules together.

Routes (bearer-token auth, JSON bodies):

    GET  /questions                  released questions + caller's completion
    GET  /questions/{id}             template text for one released question
    POST /questions/{id}/attempts    splice -> check -> judge -> record
    GET  /overview                   instructor: per-question stats + picks

Hidden assets (oracle sources, expected output) are never serialized; an
unreleased exercise is rejected before anything reaches the verifier; an
attempt is acknowledged only after its event is durably appended.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from . import backend, oracle, progress, subset, testmode
from .bank import Bank, CheckMode, Exercise, check_char_limit, splice
from .backend import AttemptVerdict, BackendConfig

MAX_ANSWER_BYTES = 64 * 1024
MAX_FEEDBACK_CHARS = 500


def run_attempt(exercise: Exercise, answer: str, cfg: BackendConfig,
                oracle_asset: oracle.OracleAsset | None = None) -> AttemptVerdict:
    """One attempt: splice the answer, run the exercise's checks, judge.

    The character limit is checked first and short-circuits the verifier;
    run mode only executes after verification passes.
    """
    source = splice(exercise.template, answer)
    char_result = None
    if exercise.char_limit is not None:
        char_result = check_char_limit(source, exercise.char_limit)
        if not char_result.passed:
            return backend.judge(exercise, char_result=char_result)

    if exercise.check.mode is CheckMode.ORACLE_SPEC:
        if oracle_asset is None:
            oracle_asset = oracle.OracleAsset.load(exercise.oracle_source or "")
        try:
            verdict = oracle.check_spec(source, oracle_asset, cfg)
        except oracle.OracleCheckError as e:
            return AttemptVerdict(False, str(e)[:MAX_FEEDBACK_CHARS])
        return backend.judge(exercise, oracle_verdict=verdict)

    verify_report = backend.verify(source, cfg)
    run_report = None
    compile_failed = False
    if (exercise.check.mode is CheckMode.VERIFY_AND_RUN
            and verify_report.status is backend.Status.PASS):
        try:
            run_report = backend.run_program(source, cfg)
        except backend.CompileFailed:
            compile_failed = True
    return backend.judge(exercise, verify_report, run_report,
                         char_result=char_result, compile_failed=compile_failed)


def run_test_mode_attempt(exercise: Exercise, answer: str,
                          cfg: BackendConfig) -> AttemptVerdict:
    """Debugging run: static spec constructs become runtime checks, the
    program executes, and the feedback reports the runtime outcome.

    Test-mode runs never complete a question; completion requires the
    exercise's real checks.
    """
    source = splice(exercise.template, answer)
    try:
        unit = subset.parse_unit(source)
    except subset.SubsetError as e:
        return AttemptVerdict(False, f"test mode: submission does not parse: {e}")
    transformed = subset.emit(testmode.to_test_mode(unit))
    try:
        run_report = backend.run_program(transformed, cfg)
    except backend.CompileFailed:
        return AttemptVerdict(False, "test mode: compilation failed")
    if run_report.timed_out:
        return AttemptVerdict(False, "test mode: program timed out")
    if run_report.exit_status != 0:
        return AttemptVerdict(
            False, "test mode: a runtime check failed "
                   f"(exit status {run_report.exit_status})")
    return AttemptVerdict(False, "test mode: program ran, all runtime checks held")


@dataclass
class GatewayConfig:
    port: int = 8080
    bank_dir: str = "bank"
    log_path: str = "progress.log"
    current_week: int = 1
    verifier_cmd: str = "mock"
    timeout_secs: float = 30.0
    workers: int = 2
    band_low: float = 0.10
    band_high: float = 0.25
    mastered: float = 0.80
    tokens: dict[str, tuple[str, str]] = field(default_factory=dict)

    def backend_config(self) -> BackendConfig:
        if self.verifier_cmd == "mock":
            return BackendConfig.from_env(timeout=self.timeout_secs)
        return BackendConfig.from_env(backend="external",
                                      verifier_cmd=self.verifier_cmd,
                                      timeout=self.timeout_secs)


def load_config(path: Path | str) -> GatewayConfig:
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    tokens = {}
    for token, entry in data.pop("tokens", {}).items():
        tokens[token] = (entry["student"], entry.get("role", "student"))
    cfg = GatewayConfig(tokens=tokens)
    for key, value in data.items():
        if not hasattr(cfg, key):
            raise ValueError(f"unknown config key {key!r}")
        setattr(cfg, key, value)
    return cfg


class Gateway:
    """Route handlers; transport-independent, returns (status, payload)."""

    def __init__(self, bank: Bank, store: progress.ProgressStore,
                 config: GatewayConfig):
        self.bank = bank
        self.store = store
        self.config = config
        self.backend_cfg = config.backend_config()
        self._oracle_assets: dict[str, oracle.OracleAsset] = {}
        for ex in bank.exercises.values():
            if ex.check.mode is CheckMode.ORACLE_SPEC and ex.oracle_source:
                self._oracle_assets[ex.id] = oracle.OracleAsset.load(ex.oracle_source)
        self._inflight: set[str] = set()
        self._inflight_lock = threading.Lock()
        self._verify_slots = threading.Semaphore(max(1, config.workers))

    def auth(self, token: str | None) -> tuple[str, str] | None:
        if not token:
            return None
        return self.config.tokens.get(token)

    def _released(self, exercise: Exercise) -> bool:
        return exercise.week <= self.config.current_week

    def list_questions(self, student_id: str):
        items = []
        for ex in self.bank.exercises.values():
            if not self._released(ex):
                continue
            record = self.store.completion(student_id, ex.id)
            items.append({
                "id": ex.id,
                "title": ex.title,
                "week": ex.week,
                "completed": record.completed,
            })
        return 200, items

    def get_question(self, exercise_id: str):
        ex = self.bank.get(exercise_id)
        if ex is None:
            return 404, {"error": "unknown question"}
        if not self._released(ex):
            return 403, {"error": "question not released yet"}
        return 200, {"template_text": ex.template.text, "title": ex.title}

    def post_attempt(self, exercise_id: str, student_id: str, body: dict):
        ex = self.bank.get(exercise_id)
        if ex is None:
            return 404, {"error": "unknown question"}
        if not self._released(ex):
            return 403, {"error": "question not released yet"}
        answer = body.get("answer")
        if not isinstance(answer, str):
            return 400, {"error": "attempt body needs an 'answer' string"}
        if len(answer.encode("utf-8")) > MAX_ANSWER_BYTES:
            return 413, {"error": "answer too large"}
        claimed = body.get("student_id")
        if claimed is not None and claimed != student_id:
            return 403, {"error": "student_id does not match your token"}
        wants_test_mode = bool(body.get("test_mode"))
        if wants_test_mode and not ex.offer_test_mode:
            return 400, {"error": "this question does not offer test mode"}
        with self._inflight_lock:
            if student_id in self._inflight:
                return 429, {"error": "an attempt is already running"}
            self._inflight.add(student_id)
        try:
            with self._verify_slots:
                if wants_test_mode:
                    verdict = run_test_mode_attempt(ex, answer, self.backend_cfg)
                else:
                    verdict = run_attempt(ex, answer, self.backend_cfg,
                                          self._oracle_assets.get(ex.id))
            ts = self.store.next_timestamp(int(time.time()))
            digest = hashlib.sha256(answer.encode("utf-8")).hexdigest()[:16]
            event = progress.ProgressEvent.from_verdict(
                student_id, ex.id, ts, verdict, digest)
            self.store.record_attempt(event)
            return 200, {
                "completed": verdict.completed,
                "feedback": verdict.feedback[:MAX_FEEDBACK_CHARS],
                "verified_count": verdict.verified_count,
                "error_count": verdict.error_count,
            }
        finally:
            with self._inflight_lock:
                self._inflight.discard(student_id)

    def overview(self):
        cohort = [sid for sid, role in self.config.tokens.values()
                  if role == "student"]
        cohort = sorted(set(cohort))
        questions = []
        fractions: dict[str, float] = {}
        for ex in self.bank.exercises.values():
            stats = self.store.question_stats(ex.id, cohort)
            fractions[ex.id] = stats.fraction
            questions.append({
                "id": ex.id,
                "completed_count": stats.completed_count,
                "fraction": stats.fraction,
            })
        picks = progress.lecture_picks(
            fractions, self.config.band_low, self.config.band_high,
            self.config.mastered)
        return 200, {"cohort_size": len(cohort), "questions": questions,
                     "picks": picks}


class _Handler(BaseHTTPRequestHandler):
    gateway: Gateway    # set by make_server

    def log_message(self, fmt, *args):
        pass

    def _token(self) -> str | None:
        header = self.headers.get("Authorization", "")
        if header.startswith("Bearer "):
            return header[len("Bearer "):].strip()
        return None

    def _send(self, status: int, payload) -> None:
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _identity(self) -> tuple[str, str] | None:
        return self.gateway.auth(self._token())

    def do_GET(self):
        try:
            identity = self._identity()
            if identity is None:
                self._send(401, {"error": "authentication required"})
                return
            student_id, role = identity
            path = self.path.rstrip("/") or "/"
            if path == "/questions":
                self._send(*self.gateway.list_questions(student_id))
            elif path.startswith("/questions/"):
                self._send(*self.gateway.get_question(path[len("/questions/"):]))
            elif path == "/overview":
                if role != "instructor":
                    self._send(403, {"error": "instructor role required"})
                    return
                self._send(*self.gateway.overview())
            else:
                self._send(404, {"error": "no such route"})
        except Exception:
            self._send(500, {"error": "internal error"})

    def do_POST(self):
        try:
            identity = self._identity()
            if identity is None:
                self._send(401, {"error": "authentication required"})
                return
            student_id, _role = identity
            path = self.path.rstrip("/")
            if not (path.startswith("/questions/") and path.endswith("/attempts")):
                self._send(404, {"error": "no such route"})
                return
            exercise_id = path[len("/questions/"):-len("/attempts")]
            length = int(self.headers.get("Content-Length", 0))
            if length > MAX_ANSWER_BYTES + 4096:    # answer cap plus framing slack
                self._send(413, {"error": "attempt body too large"})
                return
            raw = self.rfile.read(length)
            try:
                body = json.loads(raw.decode("utf-8")) if raw else {}
            except (ValueError, UnicodeDecodeError):
                self._send(400, {"error": "body must be JSON"})
                return
            if not isinstance(body, dict):
                self._send(400, {"error": "body must be a JSON object"})
                return
            self._send(*self.gateway.post_attempt(exercise_id, student_id, body))
        except Exception:
            self._send(500, {"error": "internal error"})


def make_server(gateway: Gateway, port: int) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"gateway": gateway})
    server = ThreadingHTTPServer(("127.0.0.1", port), handler)
    server.daemon_threads = True
    return server
