"""Admin command line: serve the gateway, validate banks, run local checks,
transform files to test mode, export grades.

Exit codes: 0 success, 1 validation or verdict failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import backend, gateway, oracle, progress, subset, testmode
from .bank import BankLoadError, CheckMode, load_bank


def _cmd_serve(args) -> int:
    config = gateway.load_config(args.config)
    if args.bank:
        config.bank_dir = args.bank
    if args.log:
        config.log_path = args.log
    if args.port is not None:
        config.port = args.port
    try:
        bank = load_bank(config.bank_dir)
    except BankLoadError as e:
        for issue in e.issues:
            print(issue, file=sys.stderr)
        return 1
    groups = {ex.id: ex.weight_group for ex in bank.exercises.values()}
    roster = {sid for sid, role in config.tokens.values() if role == "student"}
    store = progress.ProgressStore(groups, roster, config.log_path)
    gw = gateway.Gateway(bank, store, config)
    server = gateway.make_server(gw, config.port)
    host, port = server.server_address[:2]
    print(f"verigrade listening on http://{host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        store.close()
    return 0


def _cmd_bank_validate(args) -> int:
    try:
        bank = load_bank(args.dir)
    except BankLoadError as e:
        for issue in e.issues:
            print(issue, file=sys.stderr)
        return 1
    print(f"{len(bank.exercises)} exercises OK")
    if args.check_oracles:
        cfg = backend.BackendConfig.from_env()
        failures = 0
        for ex in bank.exercises.values():
            if ex.check.mode is not CheckMode.ORACLE_SPEC:
                continue
            asset = oracle.OracleAsset.load(ex.oracle_source or "")
            verdict = oracle.self_check(asset, cfg)
            ok = verdict.consistent and verdict.captures
            print(f"oracle self-check {ex.id}: {'ok' if ok else 'FAILED'}")
            if not ok:
                failures += 1
        if failures:
            return 1
    return 0


def _cmd_check(args) -> int:
    try:
        bank = load_bank(args.bank)
    except BankLoadError as e:
        for issue in e.issues:
            print(issue, file=sys.stderr)
        return 1
    exercise = bank.get(args.exercise)
    if exercise is None:
        print(f"unknown exercise {args.exercise!r}", file=sys.stderr)
        return 1
    answer = Path(args.file).read_text(encoding="utf-8")
    cfg = backend.BackendConfig.from_env()
    verdict = gateway.run_attempt(exercise, answer, cfg)
    print(f"completed: {'yes' if verdict.completed else 'no'}")
    print(verdict.feedback)
    return 0 if verdict.completed else 1


def _cmd_testmode(args) -> int:
    source = Path(args.input).read_text(encoding="utf-8")
    try:
        unit = subset.parse_unit(source)
    except subset.SubsetError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return 1
    opts = testmode.TransformOptions(
        check_requires=not args.no_requires,
        check_ensures=not args.no_ensures,
        check_asserts=not args.no_asserts,
        check_assumes=not args.no_assumes,
        check_invariants=not args.no_invariants,
    )
    out_unit = testmode.to_test_mode(unit, opts)
    report = testmode.transform_report(unit, out_unit)
    text = subset.emit(out_unit)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    parts = ", ".join(f"{k} {v}" for k, v in report.rewritten.items())
    print(f"rewrote: {parts}", file=sys.stderr)
    for sk in report.skipped:
        print(f"skipped ({sk.reason}) {sk.kw} at offset {sk.offset}: {sk.text}",
              file=sys.stderr)
    return 0


def _parse_manual_scores(entries: list[str]) -> dict[str, dict[str, float]]:
    scores: dict[str, dict[str, float]] = {}
    for entry in entries:
        try:
            who, assignment = entry.split(":", 1)
            group, value = assignment.split("=", 1)
            scores.setdefault(who, {})[group] = float(value)
        except ValueError:
            raise SystemExit(f"bad --manual entry {entry!r}; "
                             "expected student:group=score")
    return scores


def _cmd_grades_export(args) -> int:
    try:
        bank = load_bank(args.bank)
    except BankLoadError as e:
        for issue in e.issues:
            print(issue, file=sys.stderr)
        return 1
    if args.roster:
        roster = [s.strip() for s in args.roster.split(",") if s.strip()]
    elif args.config:
        cfg = gateway.load_config(args.config)
        roster = sorted({sid for sid, role in cfg.tokens.values()
                         if role == "student"})
    else:
        print("need --roster or --config for the student list", file=sys.stderr)
        return 1
    scheme = progress.load_scheme(args.scheme) if args.scheme else progress.default_scheme()
    groups = {ex.id: ex.weight_group for ex in bank.exercises.values()}
    store = progress.ProgressStore(groups, roster, args.log)
    result = store.export_grades(roster, scheme,
                                 _parse_manual_scores(args.manual or []))
    if args.output:
        Path(args.output).write_text(result.csv, encoding="utf-8")
    else:
        sys.stdout.write(result.csv)
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    store.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="verigrade",
        description="Automated assessment for verification exercises.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the HTTP gateway")
    p_serve.add_argument("--config", required=True)
    p_serve.add_argument("--bank", help="override bank_dir from the config")
    p_serve.add_argument("--log", help="override log_path from the config")
    p_serve.add_argument("--port", type=int, help="override port (0 = ephemeral)")
    p_serve.set_defaults(func=_cmd_serve)

    p_bank = sub.add_parser("bank", help="bank administration")
    bank_sub = p_bank.add_subparsers(dest="bank_command", required=True)
    p_validate = bank_sub.add_parser("validate", help="load and validate a bank")
    p_validate.add_argument("dir")
    p_validate.add_argument("--check-oracles", action="store_true",
                            help="also run oracle self-checks via the verifier")
    p_validate.set_defaults(func=_cmd_bank_validate)

    p_check = sub.add_parser("check", help="run one local attempt")
    p_check.add_argument("file", help="file holding the answer text")
    p_check.add_argument("--exercise", required=True)
    p_check.add_argument("--bank", required=True)
    p_check.set_defaults(func=_cmd_check)

    p_tm = sub.add_parser("testmode", help="rewrite spec constructs as runtime checks")
    p_tm.add_argument("input")
    p_tm.add_argument("-o", "--output")
    for name in ("requires", "ensures", "asserts", "assumes", "invariants"):
        p_tm.add_argument(f"--no-{name}", action="store_true")
    p_tm.set_defaults(func=_cmd_testmode)

    p_grades = sub.add_parser("grades", help="grade administration")
    grades_sub = p_grades.add_subparsers(dest="grades_command", required=True)
    p_export = grades_sub.add_parser("export", help="export a grades CSV")
    p_export.add_argument("--scheme", help="scheme TOML (default: course scheme)")
    p_export.add_argument("--bank", required=True)
    p_export.add_argument("--log", required=True)
    p_export.add_argument("--roster", help="comma-separated student ids")
    p_export.add_argument("--config", help="read the roster from a gateway config")
    p_export.add_argument("--manual", action="append",
                          help="manual score entry student:group=score")
    p_export.add_argument("-o", "--output")
    p_export.set_defaults(func=_cmd_grades_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
