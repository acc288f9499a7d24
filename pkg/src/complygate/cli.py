"""Command-line entry point.

Subcommands: ``check`` (the CI gate), ``sync`` (populate the inventory),
``sbom``/``notice``/``ccs``/``licenses`` (single artifacts), ``serve``
(the review API). Every flag can also be supplied through an environment
variable with the ``COMPLYGATE_`` prefix (``--policy`` -> ``COMPLYGATE_POLICY``,
``--out-dir`` -> ``COMPLYGATE_OUT_DIR``); flags win over the environment.

Exit codes for ``check``: 0 pass, 1 policy violation, 2 review needed in
strict mode, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .enrichment import EnrichmentConfig
from .gate import EXIT_ERROR, GateConfig, run_check, sync_inventory

ENV_PREFIX = "COMPLYGATE_"


def _env(name: str) -> str | None:
    return os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))


def _env_flag(name: str) -> bool:
    return (_env(name) or "").lower() in ("1", "true", "yes", "on")


def _add_common_inputs(parser: argparse.ArgumentParser, *, policy_required: bool = True) -> None:
    parser.add_argument(
        "--manifest", default=_env("manifest"),
        help="product manifest JSON (name, version, channel, root deps)",
    )
    parser.add_argument(
        "--policy", default=_env("policy"),
        help="policy document JSON" + ("" if policy_required else " (optional)"),
    )
    parser.add_argument(
        "--journal", default=_env("journal"),
        help="inventory journal path (JSON lines)",
    )
    parser.add_argument(
        "--lockfile", action="append", default=None, metavar="FORMAT:PATH",
        help="dependency lockfile as <format>:<path>; repeatable "
             "(formats: neutral, npm)",
    )
    parser.add_argument(
        "--sbom-in", default=_env("sbom_in"),
        help="inbound SPDX 2.3 JSON document to merge into the graph",
    )
    parser.add_argument(
        "--out-dir", default=_env("out_dir") or "compliance-out",
        help="directory for reports and artifacts",
    )
    parser.add_argument(
        "--include-test-scope", action="store_true", default=_env_flag("include_test_scope"),
        help="include test-scoped dependencies in evaluation",
    )


def _parse_lockfiles(raw: list[str] | None) -> tuple[tuple[str, Path], ...]:
    entries = raw if raw is not None else (
        [_env("lockfile")] if _env("lockfile") else []
    )
    lockfiles = []
    for entry in entries:
        format_id, sep, path = entry.partition(":")
        if not sep or not format_id or not path:
            raise SystemExit(f"--lockfile must be <format>:<path>, got {entry!r}")
        lockfiles.append((format_id, Path(path)))
    return tuple(lockfiles)


def _require(value: str | None, flag: str) -> str:
    if not value:
        print(f"error: {flag} is required (flag or {ENV_PREFIX}{flag.strip('-').upper().replace('-', '_')})",
              file=sys.stderr)
        raise SystemExit(EXIT_ERROR)
    return value


def _gate_config(args: argparse.Namespace, **overrides) -> GateConfig:
    scopes = frozenset({"build", "runtime", "test"}) if args.include_test_scope else frozenset({"build", "runtime"})
    enrichment = None
    if getattr(args, "enrich_fixture", None) or getattr(args, "enrich_url", None):
        enrichment = EnrichmentConfig(
            base_url=getattr(args, "enrich_url", None),
            offline=getattr(args, "enrich_url", None) is None,
            fixture_path=Path(args.enrich_fixture) if getattr(args, "enrich_fixture", None) else None,
            cache_dir=Path(args.out_dir) / "enrichment-cache",
        )
    values = dict(
        manifest_path=Path(_require(args.manifest, "--manifest")),
        policy_path=Path(_require(args.policy, "--policy")),
        journal_path=Path(_require(args.journal, "--journal")),
        out_dir=Path(args.out_dir),
        lockfiles=_parse_lockfiles(args.lockfile),
        sbom_in=Path(args.sbom_in) if args.sbom_in else None,
        include_scopes=scopes,
        enrichment=enrichment,
    )
    values.update(overrides)
    return GateConfig(**values)


def _cmd_check(args: argparse.Namespace) -> int:
    config = _gate_config(
        args,
        report_format=args.report,
        strict=args.strict,
        baseline_path=Path(args.baseline) if args.baseline else None,
        artifacts_always=args.artifacts_always,
    )
    exit_code, report = run_check(config)
    sys.stdout.write(report.render(args.report))
    if report.error:
        print(f"error: {report.error}", file=sys.stderr)
    return exit_code


def _cmd_sync(args: argparse.Namespace) -> int:
    config = _gate_config(
        args,
        sources_dir=Path(args.sources_dir) if args.sources_dir else None,
    )
    exit_code, summary = sync_inventory(config)
    print(json.dumps(summary.to_dict(), indent=2))
    return exit_code


def _artifact_command(args: argparse.Namespace, which: str) -> int:
    toggles = dict(
        write_sbom=which == "sbom",
        write_notices=which == "notice",
        write_license_list=which == "licenses",
        write_ccs=which == "ccs",
    )
    config = _gate_config(args, artifacts_always=True, **toggles)
    exit_code, report = run_check(config)
    if report.error:
        print(f"error: {report.error}", file=sys.stderr)
        return EXIT_ERROR
    for name, path in sorted(report.artifact_paths.items()):
        print(f"{name}: {path}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    from .service import ServiceConfig, load_service_config, serve

    try:
        if args.config:
            config = load_service_config(args.config)
            if args.listen:
                config.listen = args.listen
        else:
            config = ServiceConfig(
                journal_path=Path(_require(args.journal, "--journal")),
                token_file=Path(_require(args.tokens, "--tokens")),
                listen=args.listen or "127.0.0.1:8030",
                policy_path=Path(args.policy) if args.policy else None,
                cors_origins=tuple(args.cors_origin or ()),
            )
        serve(config)
    except Exception as err:  # startup failures: port busy, bad journal, bad tokens
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="complygate",
        description="Continuous open-source license compliance gate and inventory.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="evaluate the product and fail the build on divergence")
    _add_common_inputs(check)
    check.add_argument("--strict", action="store_true", default=_env_flag("strict"),
                       help="exit 2 when uncleared/unknown components are present")
    check.add_argument("--baseline", default=_env("baseline"),
                       help="prior report.json; only new findings gate the build")
    check.add_argument("--report", choices=("text", "json"), default=_env("report") or "text",
                       help="stdout report format (report.json is always written)")
    check.add_argument("--artifacts-always", action="store_true",
                       default=_env_flag("artifacts_always"),
                       help="generate artifacts even on failure")
    check.set_defaults(func=_cmd_check)

    sync = sub.add_parser("sync", help="register unknown graph nodes in the inventory")
    _add_common_inputs(sync)
    sync.add_argument("--sources-dir", default=_env("sources_dir"),
                      help="local source trees under <dir>/<ecosystem>/<name>/<version>")
    sync.add_argument("--enrich-fixture", default=_env("enrich_fixture"),
                      help="offline knowledge-base fixture JSON")
    sync.add_argument("--enrich-url", default=_env("enrich_url"),
                      help="knowledge-base URL template with {ecosystem}/{name}/{version}")
    sync.set_defaults(func=_cmd_sync)

    for which, title in (
        ("sbom", "write the SPDX SBOM"),
        ("notice", "write the NOTICE attribution document"),
        ("ccs", "write the CCS manifest and source offer"),
        ("licenses", "write the license list CSV"),
    ):
        artifact = sub.add_parser(which, help=title)
        _add_common_inputs(artifact)
        artifact.set_defaults(func=lambda args, which=which: _artifact_command(args, which))

    serve_cmd = sub.add_parser("serve", help="run the inventory/review HTTP API")
    serve_cmd.add_argument("--config", default=_env("service_config"),
                           help="service config JSON (journal, tokens, products, CORS)")
    serve_cmd.add_argument("--listen", default=_env("listen"), help="host:port")
    serve_cmd.add_argument("--journal", default=_env("journal"))
    serve_cmd.add_argument("--tokens", default=_env("tokens"),
                           help="JSON map: token -> {identity, role}")
    serve_cmd.add_argument("--policy", default=_env("policy"))
    serve_cmd.add_argument("--cors-origin", action="append",
                           help="allowed browser origin; repeatable")
    serve_cmd.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
