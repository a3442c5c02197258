from __future__ import annotations

import base64
import gzip
import json
import threading
import time
from pathlib import Path

import pytest
import requests

from verigrade import gateway, progress
from verigrade.bank import load_bank
from verigrade.gateway import Gateway, GatewayConfig, load_config, make_server, run_attempt

TOKENS = {
    "alice-token": ("alice", "student"),
    "bob-token": ("bob", "student"),
    "staff-token": ("staff", "instructor"),
}


def auth(token: str) -> dict:
    return {"Authorization": f"Bearer {token}"}


@pytest.fixture()
def app(bank_dir, tmp_path):
    config = GatewayConfig(bank_dir=str(bank_dir),
                           log_path=str(tmp_path / "events.log"),
                           current_week=3, tokens=dict(TOKENS), workers=2)
    bank = load_bank(bank_dir)
    groups = {ex.id: ex.weight_group for ex in bank.exercises.values()}
    store = progress.ProgressStore(groups, ["alice", "bob"], config.log_path)
    gw = Gateway(bank, store, config)
    server = make_server(gw, 0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield base, gw, store, config
    server.shutdown()
    server.server_close()
    store.close()


class TestAuth:
    def test_unauthenticated_401(self, app):
        base, *_ = app
        assert requests.get(f"{base}/questions").status_code == 401

    def test_unknown_token_401(self, app):
        base, *_ = app
        r = requests.get(f"{base}/questions", headers=auth("nope"))
        assert r.status_code == 401


class TestListQuestions:
    def test_week_gating(self, app):
        base, *_ = app
        r = requests.get(f"{base}/questions", headers=auth("alice-token"))
        assert r.status_code == 200
        ids = {q["id"] for q in r.json()}
        assert ids == {"fptp", "spock", "sum_and_difference", "leaves",
                       "ten_green_bottles"}
        assert all(q["week"] <= 3 for q in r.json())

    def test_completion_flag_per_caller(self, app):
        base, gw, store, _ = app
        store.record_attempt(progress.ProgressEvent(
            "alice", "fptp", 1, True, 1, 0, "h"))
        alice = requests.get(f"{base}/questions", headers=auth("alice-token")).json()
        bob = requests.get(f"{base}/questions", headers=auth("bob-token")).json()
        assert next(q for q in alice if q["id"] == "fptp")["completed"]
        assert not next(q for q in bob if q["id"] == "fptp")["completed"]

    def test_empty_bank(self, tmp_path):
        (tmp_path / "bank").mkdir()
        config = GatewayConfig(tokens=dict(TOKENS))
        bank = load_bank(tmp_path / "bank")
        store = progress.ProgressStore({}, ["alice"])
        gw = Gateway(bank, store, config)
        assert gw.list_questions("alice") == (200, [])


class TestGetQuestion:
    def test_released_template_served_verbatim(self, app, bank_dir):
        base, *_ = app
        r = requests.get(f"{base}/questions/fptp", headers=auth("alice-token"))
        assert r.status_code == 200
        body = r.json()
        assert body["title"] == "First Past the Post"
        assert "[???]" in body["template_text"]
        assert set(body) == {"template_text", "title"}

    def test_unreleased_403(self, app):
        base, *_ = app
        r = requests.get(f"{base}/questions/stack", headers=auth("alice-token"))
        assert r.status_code == 403

    def test_unknown_404(self, app):
        base, *_ = app
        r = requests.get(f"{base}/questions/nope", headers=auth("alice-token"))
        assert r.status_code == 404


class TestAttempts:
    def test_passing_attempt(self, app):
        base, *_ = app
        r = requests.post(f"{base}/questions/fptp/attempts",
                          headers=auth("alice-token"), json={"answer": "!="})
        assert r.status_code == 200
        body = r.json()
        assert body["completed"] is True
        assert body["feedback"] == "0 verified, 0 errors"

    def test_failing_attempt_counts_reported(self, app):
        base, *_ = app
        answer = "== /* MOCK-VERIFY: verified=2 errors=1 */"
        r = requests.post(f"{base}/questions/fptp/attempts",
                          headers=auth("alice-token"), json={"answer": answer})
        body = r.json()
        assert body["completed"] is False
        assert body["verified_count"] == 2
        assert body["error_count"] == 1

    def test_attempt_records_event_durably(self, app, tmp_path):
        base, gw, store, config = app
        requests.post(f"{base}/questions/fptp/attempts",
                      headers=auth("alice-token"), json={"answer": "!="})
        lines = Path(config.log_path).read_text().splitlines()
        assert len(lines) == 1
        event = json.loads(lines[0])
        assert event["student"] == "alice" and event["exercise"] == "fptp"
        assert event["completed"] is True

    def test_crash_recovery_preserves_completion(self, app, bank_dir):
        base, gw, store, config = app
        r = requests.post(f"{base}/questions/fptp/attempts",
                          headers=auth("alice-token"), json={"answer": "!="})
        assert r.status_code == 200
        # Abandon the live store (as a crash would) and rebuild from the log.
        bank = load_bank(bank_dir)
        groups = {ex.id: ex.weight_group for ex in bank.exercises.values()}
        rebuilt = progress.ProgressStore(groups, ["alice", "bob"], config.log_path)
        assert rebuilt.completion("alice", "fptp").completed
        rebuilt.close()

    def test_unreleased_attempt_never_reaches_verifier(self, app):
        base, *_ = app
        start = time.monotonic()
        r = requests.post(f"{base}/questions/stack/attempts",
                          headers=auth("alice-token"),
                          json={"answer": "/* MOCK-VERIFY: sleep=5 */"})
        assert r.status_code == 403
        # The sleep directive never ran: rejection happened before checking.
        assert time.monotonic() - start < 2.0

    def test_oversize_413(self, app):
        base, *_ = app
        r = requests.post(f"{base}/questions/fptp/attempts",
                          headers=auth("alice-token"),
                          json={"answer": "x" * (64 * 1024 + 10)})
        assert r.status_code == 413

    def test_answer_must_be_string(self, app):
        base, *_ = app
        r = requests.post(f"{base}/questions/fptp/attempts",
                          headers=auth("alice-token"), json={"answer": 42})
        assert r.status_code == 400

    def test_student_id_mismatch_403(self, app):
        base, *_ = app
        r = requests.post(f"{base}/questions/fptp/attempts",
                          headers=auth("alice-token"),
                          json={"answer": "!=", "student_id": "bob"})
        assert r.status_code == 403

    def test_concurrent_attempt_429(self, app):
        base, *_ = app
        slow = "!= /* MOCK-VERIFY: sleep=0.8 verified=1 errors=0 */"
        results = {}

        def first():
            results["first"] = requests.post(
                f"{base}/questions/fptp/attempts", headers=auth("alice-token"),
                json={"answer": slow})

        t = threading.Thread(target=first)
        t.start()
        time.sleep(0.3)
        second = requests.post(f"{base}/questions/fptp/attempts",
                               headers=auth("alice-token"), json={"answer": "!="})
        t.join()
        assert second.status_code == 429
        assert results["first"].status_code == 200

    def test_other_student_not_throttled(self, app):
        base, *_ = app
        slow = "!= /* MOCK-VERIFY: sleep=0.8 */"
        t = threading.Thread(target=lambda: requests.post(
            f"{base}/questions/fptp/attempts", headers=auth("alice-token"),
            json={"answer": slow}))
        t.start()
        time.sleep(0.3)
        r = requests.post(f"{base}/questions/spock/attempts",
                          headers=auth("bob-token"), json={"answer": "true"})
        t.join()
        assert r.status_code == 200


class TestTestModeOption:
    @pytest.fixture()
    def tm_app(self, tmp_path):
        bank_root = tmp_path / "bank"
        bank_root.mkdir()
        (bank_root / "dbg.exercise").write_text(
            "---\nid: dbg\ntitle: Debuggable\nweek: 1\nkind: Mastery\n"
            "mode: VerifyOnly\ntest_mode: true\n---\n"
            "method Main() {\n  assert [???];\n}\n")
        (bank_root / "plain.exercise").write_text(
            "---\nid: plain\ntitle: Plain\nweek: 1\nkind: Mastery\n"
            "mode: VerifyOnly\n---\nx [???]\n")
        config = GatewayConfig(bank_dir=str(bank_root),
                               log_path=str(tmp_path / "events.log"),
                               current_week=1, tokens=dict(TOKENS))
        bank = load_bank(bank_root)
        store = progress.ProgressStore(
            {ex.id: ex.weight_group for ex in bank.exercises.values()},
            ["alice"], config.log_path)
        gw = Gateway(bank, store, config)
        server = make_server(gw, 0)
        threading.Thread(target=server.serve_forever, daemon=True).start()
        yield f"http://127.0.0.1:{server.server_address[1]}", store
        server.shutdown()
        server.server_close()
        store.close()

    def test_test_mode_run_reports_runtime_outcome(self, tm_app):
        base, store = tm_app
        r = requests.post(f"{base}/questions/dbg/attempts",
                          headers=auth("alice-token"),
                          json={"answer": "1 == 1", "test_mode": True})
        assert r.status_code == 200
        body = r.json()
        assert body["completed"] is False
        assert body["feedback"].startswith("test mode:")
        assert "ran" in body["feedback"]

    def test_test_mode_runtime_failure_reported(self, tm_app):
        base, _ = tm_app
        r = requests.post(
            f"{base}/questions/dbg/attempts", headers=auth("alice-token"),
            json={"answer": "1 == 2 /* MOCK-RUN: exit=3 */", "test_mode": True})
        body = r.json()
        assert not body["completed"]
        assert "runtime check failed" in body["feedback"]

    def test_test_mode_never_completes(self, tm_app):
        base, store = tm_app
        requests.post(f"{base}/questions/dbg/attempts",
                      headers=auth("alice-token"),
                      json={"answer": "true", "test_mode": True})
        assert not store.completion("alice", "dbg").completed
        assert store.completion("alice", "dbg").attempt_count == 1

    def test_not_offered_is_rejected(self, tm_app):
        base, _ = tm_app
        r = requests.post(f"{base}/questions/plain/attempts",
                          headers=auth("alice-token"),
                          json={"answer": "y", "test_mode": True})
        assert r.status_code == 400


class TestOverview:
    def test_requires_instructor(self, app):
        base, *_ = app
        r = requests.get(f"{base}/overview", headers=auth("alice-token"))
        assert r.status_code == 403

    def test_grid_matches_question_stats(self, app):
        base, gw, store, _ = app
        store.record_attempt(progress.ProgressEvent(
            "alice", "fptp", 1, True, 1, 0, "h"))
        r = requests.get(f"{base}/overview", headers=auth("staff-token"))
        assert r.status_code == 200
        body = r.json()
        assert body["cohort_size"] == 2
        by_id = {q["id"]: q for q in body["questions"]}
        stats = store.question_stats("fptp", ["alice", "bob"])
        assert by_id["fptp"]["completed_count"] == stats.completed_count
        assert by_id["fptp"]["fraction"] == stats.fraction
        assert "picks" in body

    def test_no_student_identities(self, app):
        base, gw, store, _ = app
        store.record_attempt(progress.ProgressEvent(
            "alice", "fptp", 1, True, 1, 0, "h"))
        r = requests.get(f"{base}/overview", headers=auth("staff-token"))
        assert "alice" not in r.text and "bob" not in r.text

    def test_empty_cohort(self, bank_dir):
        config = GatewayConfig(bank_dir=str(bank_dir), tokens={
            "staff-token": ("staff", "instructor")})
        bank = load_bank(bank_dir)
        store = progress.ProgressStore(
            {ex.id: ex.weight_group for ex in bank.exercises.values()}, [])
        gw = Gateway(bank, store, config)
        status, body = gw.overview()
        assert status == 200
        assert body["cohort_size"] == 0
        assert all(q["fraction"] == 0.0 for q in body["questions"])


class TestInformationHiding:
    def test_no_response_contains_hidden_asset_content(self, app, bank_dir):
        base, *_ = app
        # Hidden content: asset lines that no public template publishes.
        # (Oracle files repeat the template's visible implementation; the
        # secret part is everything beyond it.)
        published = set()
        for ex_file in bank_dir.glob("*.exercise"):
            for line in ex_file.read_text().splitlines():
                published.add(line.strip())
        hidden_lines = set()
        for asset in list(bank_dir.glob("*.oracle.dfy")) + list(bank_dir.glob("*.out")):
            for line in asset.read_text().splitlines():
                line = line.strip()
                if line and len(line) >= 6 and line not in published:
                    hidden_lines.add(line)
        assert hidden_lines, "fixture must have genuinely hidden content"
        probes = [
            ("get", "/questions", "alice-token", None),
            ("get", "/questions/fptp", "alice-token", None),
            ("get", "/questions/ten_green_bottles", "alice-token", None),
            ("get", "/questions/add_spec", "alice-token", None),
            ("get", "/questions/nope", "alice-token", None),
            ("get", "/overview", "staff-token", None),
            ("get", "/overview", "alice-token", None),
            ("post", "/questions/ten_green_bottles/attempts", "alice-token",
             {"answer": "method Main() { print 1; }"}),
            ("post", "/questions/fptp/attempts", "alice-token",
             {"answer": "/* MOCK-VERIFY: errors=3 */"}),
            ("post", "/questions/nope/attempts", "alice-token", {"answer": "x"}),
        ]
        for verb, path, token, body in probes:
            if verb == "get":
                r = requests.get(base + path, headers=auth(token))
            else:
                r = requests.post(base + path, headers=auth(token), json=body)
            for line in hidden_lines:
                assert line not in r.text, (path, line)


class TestRunAttemptPipeline:
    def test_verify_and_run_exact_output(self, bank_dir):
        bank = load_bank(bank_dir)
        tgb = bank["ten_green_bottles"]
        payload = base64.b64encode(gzip.compress(tgb.expected_stdout, 9)).decode()
        cfg = gateway.BackendConfig(backend="mock")
        program = f"// MOCK-RUN-STDOUT-GZ: {payload}\nmethod Main() {{ }}\n"
        assert len(program) < 750
        verdict = run_attempt(tgb, program, cfg)
        assert verdict.completed

    def test_verify_and_run_wrong_output(self, bank_dir):
        bank = load_bank(bank_dir)
        tgb = bank["ten_green_bottles"]
        payload = base64.b64encode(b"Nine green bottles\n").decode()
        cfg = gateway.BackendConfig(backend="mock")
        verdict = run_attempt(tgb, f"// MOCK-RUN-STDOUT: {payload}\n", cfg)
        assert not verdict.completed
        assert "output mismatch" in verdict.feedback

    def test_char_limit_gate(self, bank_dir):
        bank = load_bank(bank_dir)
        tgb = bank["ten_green_bottles"]
        cfg = gateway.BackendConfig(backend="mock")
        verdict = run_attempt(tgb, "x" * 750, cfg)
        assert not verdict.completed
        assert "750" in verdict.feedback

    def test_oracle_exercise_pipeline(self, bank_dir):
        bank = load_bank(bank_dir)
        ex = bank["add_spec"]
        cfg = gateway.BackendConfig(backend="mock")
        verdict = run_attempt(ex, "ensures r >= a\n  ensures r >= b", cfg)
        assert verdict.completed
        assert "consistent" in verdict.feedback

    def test_oracle_signature_feedback(self, bank_dir):
        bank = load_bank(bank_dir)
        ex = bank["add_spec"]
        cfg = gateway.BackendConfig(backend="mock")
        # Splicing a brace into the spec slot breaks the declaration shape.
        verdict = run_attempt(ex, "ensures r >= a }", cfg)
        assert not verdict.completed


class TestConfig:
    def test_load_config_round_trip(self, tmp_path):
        path = tmp_path / "verigrade.toml"
        path.write_text("""
port = 9000
bank_dir = "bank"
log_path = "events.log"
current_week = 4
verifier_cmd = "mock"
timeout_secs = 7.5
workers = 3
band_low = 0.05
band_high = 0.3
mastered = 0.9

[tokens]
t1 = { student = "alice", role = "student" }
t2 = { student = "staff", role = "instructor" }
""")
        config = load_config(path)
        assert config.port == 9000
        assert config.current_week == 4
        assert config.timeout_secs == 7.5
        assert config.tokens["t1"] == ("alice", "student")
        assert config.tokens["t2"] == ("staff", "instructor")

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "verigrade.toml"
        path.write_text("bogus_key = 1\n")
        with pytest.raises(ValueError):
            load_config(path)

    def test_backend_config_mock(self):
        assert GatewayConfig(verifier_cmd="mock").backend_config().backend == "mock"
