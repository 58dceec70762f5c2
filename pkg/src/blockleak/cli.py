"""Command line entry point: plan, serve, attack, campaign, budget, report."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .codec import assign_codewords
from .config import ExperimentConfig, load_config
from .experiments import default_ks, request_time_curve, simulated_factory
from .harness import (
    CampaignMetrics,
    estimate_budget,
    run_campaign,
    run_partitioned_attack,
)
from .mockservice import MockService, ServiceState
from .planner import BlockPlan, accounts_required, build_block_plan
from .transports import LiveSession, SimulatedVisitor, login, register_account

log = logging.getLogger("blockleak")

REPORT_VERSION = 1


def read_identities(path: str | Path) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [ln.strip() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]


def _emit(obj: object) -> None:
    print(json.dumps(obj, indent=2))


def _live_session(base_url: str, account: str, credential: str | None) -> LiveSession:
    register_account(base_url, account, credential)
    return LiveSession(base_url, login(base_url, account, credential))


# -- subcommands -------------------------------------------------------------


def cmd_plan(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    identities = read_identities(args.targets)
    code = cfg.code.for_targets(len(identities))
    registry = assign_codewords(identities, code, cfg.code.shuffle_seed)
    plan = build_block_plan(registry, cfg.partition())
    plan.save(args.out)
    if args.registry_out:
        registry.save(args.registry_out)
    need = accounts_required(len(identities), cfg.partition(), code)
    _emit(
        {
            "plan": str(args.out),
            "targets": len(identities),
            "payload_bits": code.payload_bits,
            "total_bits": code.total_bits,
            "spaces": plan.n_spaces,
            "signaling_accounts": need.signaling,
            "reference_accounts": need.reference,
            "block_edges": plan.edge_count(),
            "shuffle_seed": cfg.code.shuffle_seed,
        }
    )
    return 0


def _service_state(cfg: ExperimentConfig) -> ServiceState:
    return ServiceState(
        cfg.profile(),
        cfg.env(),
        cfg.faults,
        equalize=cfg.service.equalize,
        seed=cfg.seed,
        diagnostics=cfg.service.diagnostics,
    )


def cmd_serve(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    state = _service_state(cfg)
    edges = state.apply_block_plan(BlockPlan.load(args.plan))
    for visitor in read_identities(args.visitors) if args.visitors else []:
        state.create_account(visitor)
    service = MockService(state, cfg.service.host, cfg.service.port)
    print(
        f"serving {cfg.service.preset} (x{cfg.service.time_scale:g}) on {service.url} "
        f"with {edges} block edges; seed={cfg.seed} equalize={cfg.service.equalize}",
        flush=True,
    )
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        service.stop()
    return 0


def cmd_attack(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    plan = BlockPlan.load(args.plan)
    if args.live:
        if not args.visitor:
            raise SystemExit("--live needs --visitor (the account to log in as)")
        session = _live_session(args.live, args.visitor, args.credential)
    else:
        session = SimulatedVisitor(
            plan, args.visitor, cfg.profile(), cfg.env(), cfg.faults, seed=cfg.seed
        )
    try:
        result = run_partitioned_attack(
            session,
            plan,
            cfg.decision,
            cfg.attack.parallelism,
            reuse_calibration=cfg.attack.reuse_calibration,
            max_restarts=cfg.attack.max_restarts,
        )
    finally:
        if isinstance(session, LiveSession):
            session.close()
    _emit({"seed": cfg.seed, "mode": "live" if args.live else "simulated",
           "visitor": args.visitor, **result.to_dict()})
    return 0


def campaign_report(cfg: ExperimentConfig, metrics: CampaignMetrics, mode: str) -> dict:
    return {
        "report_version": REPORT_VERSION,
        "seed": cfg.seed,
        "mode": mode,
        "config": cfg.to_dict(),
        "trials": [t.to_dict() for t in metrics.trials],
        "summary": metrics.summary(),
        "counts": {k: list(v) for k, v in metrics.counts().items()},
    }


def cmd_campaign(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    plan = BlockPlan.load(args.plan)
    everyone = [i for s in sorted(plan.registries) for i in plan.registries[s]]
    n_targets = cfg.campaign.targets if cfg.campaign.targets is not None else len(everyone)
    targets = everyone[:n_targets]
    non_targets = [f"outsider-{i}" for i in range(cfg.campaign.non_targets)]
    if args.live:
        def factory(visitor: str, trial: int) -> LiveSession:
            return _live_session(args.live, visitor, None)
    else:
        factory = simulated_factory(plan, cfg.profile(), cfg.env(), cfg.faults, cfg.seed)
    metrics = run_campaign(
        targets,
        non_targets,
        cfg.campaign.visits_per_account,
        plan,
        cfg.decision,
        factory,
        cfg.attack.parallelism,
        reuse_calibration=cfg.attack.reuse_calibration,
        parallel_trials=1 if args.live else cfg.campaign.parallel_trials,
    )
    report = campaign_report(cfg, metrics, "live" if args.live else "simulated")
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(render_report(report))
    return 0


def cmd_budget(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    k = args.k if args.k is not None else cfg.decision.k
    k0 = args.k0 if args.k0 is not None else cfg.decision.k0
    b = estimate_budget(args.m, k, k0, cfg.profile(), cfg.attack.parallelism, cfg.env())
    _emit(
        {
            "service": cfg.profile().name,
            "m_total": args.m,
            "k": k,
            "k0": k0,
            "parallelism": cfg.attack.parallelism,
            "requests": b.requests,
            "lower_s": round(b.time.lower_ms / 1000, 3),
            "upper_s": round(b.time.upper_ms / 1000, 3),
        }
    )
    return 0


def _fmt_rate(rate: float | None, counts: Sequence[int]) -> str:
    if rate is None:
        return "n/a"
    return f"{rate:.2f} ({counts[0]}/{counts[1]})"


def render_report(report: dict) -> str:
    lines = [
        f"campaign ({report['mode']}), seed={report['seed']}, "
        f"service={report['config']['service']['preset']}",
        "",
        f"{'visitor':<16}{'target':<8}{'visit':<7}{'member':<8}{'identified':<16}"
        f"{'raw':<16}{'corr':<6}{'restart':<9}{'requests':>9}",
    ]
    for t in report["trials"]:
        lines.append(
            f"{t['visitor']:<16}{'y' if t['is_target'] else 'n':<8}{t['visit']:<7}"
            f"{'y' if t['member'] else 'n':<8}{str(t['identified'] or '-'):<16}"
            f"{str(t['identified_raw'] or '-'):<16}{t['corrections']:<6}"
            f"{'y' if t['restarted'] else 'n':<9}{t['requests_issued']:>9}"
        )
    lines.append("")
    for key, label in (("tnr", "TNR"), ("tpr", "TPR"), ("idr", "IDR"), ("idr_ec", "IDR/EC")):
        lines.append(f"{label:<8}{_fmt_rate(report['summary'][key], report['counts'][key])}")
    return "\n".join(lines)


def cmd_report(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    if args.report:
        report = json.loads(Path(args.report).read_text(encoding="utf-8"))
        print(render_report(report))
    if args.curve_csv:
        ks = [int(x) for x in args.ks.split(",")] if args.ks else list(default_ks())
        rows = request_time_curve(
            cfg.profile(), args.m, ks, cfg.decision.k0, cfg.attack.parallelism, cfg.env()
        )
        with open(args.curve_csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {len(rows)} rows to {args.curve_csv} (seed={cfg.seed})")
    if not args.report and not args.curve_csv:
        raise SystemExit("report: give --report and/or --curve-csv")
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="YAML experiment config")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override a config entry, e.g. --set decision.k=10 (repeatable)",
    )
    common.add_argument("--seed", type=int, help="shorthand for --set seed=N")

    parser = argparse.ArgumentParser(prog="blockleak", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", parents=[common], help="build registry and block plan")
    p.add_argument("--targets", required=True, help="file with one target identity per line")
    p.add_argument("--out", required=True, help="plan JSON to write")
    p.add_argument("--registry-out", help="also write the registry text file")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("serve", parents=[common], help="run the mock service with a plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--visitors", help="file of extra visitor accounts to create")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("attack", parents=[common], help="run one identification attack")
    p.add_argument("--plan", required=True)
    p.add_argument("--visitor", help="visitor identity (simulated) or account to log in as (live)")
    p.add_argument("--live", metavar="URL", help="attack a running mock service")
    p.add_argument("--credential")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("campaign", parents=[common], help="batch of attacks with metrics")
    p.add_argument("--plan", required=True)
    p.add_argument("--live", metavar="URL")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("budget", parents=[common], help="request count and time bounds")
    p.add_argument("--m", type=int, required=True, help="signaling accounts measured")
    p.add_argument("--k", type=int)
    p.add_argument("--k0", type=int)
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("report", parents=[common], help="render a campaign report / time curve")
    p.add_argument("--report", help="campaign report JSON")
    p.add_argument("--curve-csv", help="write requests-vs-time rows here")
    p.add_argument("--m", type=int, default=24)
    p.add_argument("--ks", help="comma-separated k values for the curve")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    cfg = load_config(args.config, overrides)
    return args.func(args, cfg)


if __name__ == "__main__":
    sys.exit(main())
