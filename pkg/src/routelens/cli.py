"""File-based command line front end.

One subcommand per pipeline stage, batch-oriented: inputs are files,
outputs are plot-ready CSV/JSONL artifacts with metadata headers. Exit
code 0 means the inputs were processed (findings are data, not
failures); exit code 2 means the inputs were unusable, with diagnostics
on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__, artifacts, churn, detect, evaluation, paths, simulate
from .bgp import filter_session_resets, ingest, parse_updates, write_updates
from .core import RelayIndex, int_to_ip, load_prefix_origins, load_relays, write_relays
from .correlation import (
    SignalKind,
    clopper_pearson,
    read_trace_jsonl,
    write_trace_jsonl,
)

DEFAULTS = {
    "seed": 0,
    "threshold": 0.6,
    "bin_width": 1.0,
    "window": 300.0,
    "max_lag": 0,
    "min_overlap": 30.0,
    "frequency_threshold": 0.00001,
    "time_threshold": 0.01,
    "quiet_gap": 3600.0,
    "burst_window": 600.0,
}


class InputError(Exception):
    pass


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _require(path_text: str, what: str) -> Path:
    path = Path(path_text)
    if not path.exists():
        raise InputError(f"{what} not found: {path}")
    return path


def _effective_config(args, keys: list[str]) -> dict:
    """Defaults, overlaid by --config file values, overlaid by flags."""
    config = {key: DEFAULTS[key] for key in keys if key in DEFAULTS}
    if args.config:
        loaded = json.loads(_require(args.config, "config file").read_text())
        for key in keys:
            if key in loaded:
                config[key] = loaded[key]
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            config[key] = flag
    config["seed"] = config.get("seed", DEFAULTS["seed"])
    if args.seed is not None:
        config["seed"] = args.seed
    config["output_dir"] = args.output_dir
    return config


def _out(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- correlate -----------------------------------------------------------------


def _parse_scenario(text: str) -> tuple[SignalKind, SignalKind]:
    try:
        client_part, server_part = text.lower().split(":")
        kinds = {
            "client-data": SignalKind.DATA,
            "client-ack": SignalKind.ACK,
            "server-data": SignalKind.DATA,
            "server-ack": SignalKind.ACK,
        }
        return kinds[client_part], kinds[server_part]
    except (ValueError, KeyError):
        raise InputError(
            f"bad scenario {text!r}; expected e.g. client-data:server-ack"
        ) from None


def _load_manifest(manifest_path: Path):
    clients, servers = [], []
    base = manifest_path.parent
    with open(manifest_path, newline="") as handle:
        data_lines = (line for line in handle if not line.startswith("#"))
        for row in csv.DictReader(data_lines):
            file_path = Path(row["file"])
            if not file_path.is_absolute():
                file_path = base / file_path
            trace = read_trace_jsonl(_require(file_path, "trace file"), row["vantage_id"])
            role = row["role"].strip().lower()
            if role == "client":
                clients.append(trace)
            elif role == "server":
                servers.append(trace)
            else:
                raise InputError(f"unknown role {row['role']!r} in manifest")
    if not clients or not servers:
        raise InputError("manifest needs at least one client and one server trace")
    return clients, servers


def cmd_correlate(args) -> int:
    config = _effective_config(
        args, ["seed", "threshold", "bin_width", "window", "max_lag"]
    )
    client_kind, server_kind = _parse_scenario(args.scenario)
    config["scenario"] = args.scenario
    config["cumulative"] = bool(args.cumulative)
    clients, servers = _load_manifest(_require(args.manifest, "manifest"))
    truth = None
    if args.truth:
        truth_doc = json.loads(_require(args.truth, "truth file").read_text())
        truth = truth_doc.get("pairing", truth_doc)
    result = evaluation.run_match_pipeline(
        clients,
        servers,
        truth,
        client_kind=client_kind,
        server_kind=server_kind,
        bin_width=float(config["bin_width"]),
        window=float(config["window"]),
        threshold=float(config["threshold"]),
        max_lag_bins=int(config["max_lag"]),
        cumulative=bool(args.cumulative),
    )
    out = _out(args)
    artifacts.write_csv(
        out / "correlation_matrix.csv",
        config,
        ["client_id"] + result.server_ids,
        (
            [cid] + [f"{value:.6f}" for value in row]
            for cid, row in zip(result.client_ids, result.matrix)
        ),
    )
    artifacts.write_jsonl(
        out / "matches.jsonl",
        config,
        (
            {
                "client_id": m.client_id,
                "matched_server_id": m.matched_server_id,
                "coefficient": None if m.coefficient is None else round(m.coefficient, 6),
                "scenario": m.scenario,
                "tie": m.tie,
            }
            for m in result.matches
        ),
    )
    if result.report is not None:
        report = result.report
        fn_low, fn_high = clopper_pearson(report.false_negatives, report.n_clients)
        fp_pairs = report.n_clients * (len(result.server_ids) - 1)
        fp_low, fp_high = clopper_pearson(report.false_positives, max(fp_pairs, 1))
        artifacts.write_json(
            out / "accuracy_report.json",
            config,
            {
                "n_clients": report.n_clients,
                "accuracy": report.accuracy,
                "false_negative_rate": report.false_negative_rate,
                "false_positive_rate": report.false_positive_rate,
                "fn_confidence_95": [fn_low, fn_high],
                "fp_confidence_95": [fp_low, fp_high],
            },
        )
        print(
            f"accuracy {report.accuracy:.3f}  fn {report.false_negative_rate:.3f}  "
            f"fp {report.false_positive_rate:.3f}  ({report.n_clients} clients)"
        )
    return 0


# --- churn ---------------------------------------------------------------------


def _ingest_updates(args, config) -> tuple[dict, list, tuple[float, float]]:
    relays = load_relays(_require(args.relays, "relay list"))
    updates, issues = parse_updates(_require(args.updates, "update file"))
    if issues:
        for issue in issues:
            print(f"line {issue.line_no}: {issue.message}: {issue.raw}", file=sys.stderr)
        raise InputError(f"{len(issues)} malformed update lines")
    if getattr(args, "initial", None):
        initial, init_issues = parse_updates(_require(args.initial, "initial state"))
        if init_issues:
            raise InputError(f"{len(init_issues)} malformed initial-state lines")
        updates = sorted(initial + updates, key=lambda u: u.timestamp)
    if getattr(args, "filter_resets", False):
        updates = filter_session_resets(
            updates, float(config["quiet_gap"]), float(config["burst_window"])
        )
    stamps = [u.timestamp for u in updates]
    window = (
        float(config["window_start"]) if config.get("window_start") is not None else (min(stamps) if stamps else 0.0),
        float(config["window_end"]) if config.get("window_end") is not None else (max(stamps) + 1.0 if stamps else 1.0),
    )
    return {"relays": relays, "updates": updates}, updates, window


def _load_sessions(path_text) -> dict[str, int] | None:
    if not path_text:
        return None
    sessions = {}
    with open(_require(path_text, "sessions file"), newline="") as handle:
        data_lines = (line for line in handle if not line.startswith("#"))
        for row in csv.DictReader(data_lines):
            sessions[row["session_id"].strip()] = int(row["local_as"])
    return sessions


def cmd_churn(args) -> int:
    config = _effective_config(args, ["seed", "min_overlap", "quiet_gap", "burst_window"])
    config["window_start"] = args.window_start
    config["window_end"] = args.window_end
    loaded, updates, window = _ingest_updates(args, config)
    relays = loaded["relays"]
    config["window_start"], config["window_end"] = window
    local_as = _load_sessions(args.sessions)

    baseline_updates = [u for u in updates if u.timestamp <= window[0]]
    churn_updates = [u for u in updates if u.timestamp > window[0]]
    base_ribs = ingest(baseline_updates, relays, local_as=local_as)
    baseline = churn.static_baseline(base_ribs, relays, t0=window[0])
    out = _out(args)

    artifacts.write_csv(
        out / "baseline_pairs.csv",
        config,
        ["src_session", "dst_session", "compromised_circuits", "total_circuits", "percent"],
        (
            [src, dst, baseline.compromised((src, dst)), baseline.total_circuits,
             f"{100.0 * baseline.fraction((src, dst)):.4f}"]
            for src, dst in baseline.pairs
        ),
    )
    artifacts.write_csv(
        out / "ccdf_baseline.csv",
        config,
        ["x_percent", "y_percent"],
        ([f"{x:.4f}", f"{y:.4f}"] for x, y in churn.ccdf(baseline))
        if baseline.pair_circuits
        else [],
    )

    if not churn_updates:
        # nothing to measure churn against: baseline artifacts only
        artifacts.write_csv(
            out / "ratios.csv",
            config,
            ["src_session", "dst_session", "baseline", "with_updates", "ratio"],
            [],
        )
        artifacts.write_csv(
            out / "newly_compromisable.csv",
            config,
            ["src_session", "dst_session", "circuits"],
            [],
        )
        print(f"baseline only: {len(baseline.pairs)} session pairs, no updates in window")
        return 0

    full_ribs = ingest(updates, relays, local_as=local_as)
    updated = churn.churn_summary(
        full_ribs,
        relays,
        window,
        min_overlap=float(config["min_overlap"]),
        baseline=baseline,
    )
    records = churn.compromised_circuits(
        churn.segment_observations(full_ribs, relays, window),
        min_overlap=float(config["min_overlap"]),
        local_as={sid: rib.session.local_as for sid, rib in full_ribs.items()},
    )
    ratios, newly = churn.churn_ratio(baseline, updated)
    artifacts.write_csv(
        out / "churn_pairs.csv",
        config,
        ["src_session", "dst_session", "compromised_circuits", "total_circuits", "percent"],
        (
            [src, dst, updated.compromised((src, dst)), updated.total_circuits,
             f"{100.0 * updated.fraction((src, dst)):.4f}"]
            for src, dst in updated.pairs
        ),
    )
    artifacts.write_csv(
        out / "ccdf_churn.csv",
        config,
        ["x_percent", "y_percent"],
        ([f"{x:.4f}", f"{y:.4f}"] for x, y in churn.ccdf(updated)),
    )
    artifacts.write_csv(
        out / "ratios.csv",
        config,
        ["src_session", "dst_session", "baseline", "with_updates", "ratio"],
        (
            [r.src_session, r.dst_session, r.baseline, r.with_updates, f"{r.ratio:.6f}"]
            for r in ratios
        ),
    )
    artifacts.write_csv(
        out / "newly_compromisable.csv",
        config,
        ["src_session", "dst_session", "circuits"],
        ([src, dst, count] for src, dst, count in newly),
    )
    coverage = churn.as_circuit_coverage(records, relays)
    artifacts.write_csv(
        out / "as_coverage.csv",
        config,
        ["asn", "percent_circuits_seen", "circuits"],
        ([asn, f"{pct:.4f}", count] for asn, pct, count in coverage),
    )
    print(
        f"{len(baseline.pairs)} session pairs, {len(ratios)} with ratios, "
        f"{len(newly)} newly compromisable"
    )
    return 0


# --- paths ----------------------------------------------------------------------


def cmd_paths(args) -> int:
    config = _effective_config(args, ["seed"])
    config["exclude_endpoint_ases"] = bool(args.exclude_endpoint_ases)
    mapping = load_prefix_origins(_require(args.mapping, "prefix-to-AS mapping"))
    traced = paths.load_traceroutes(_require(args.traceroutes, "traceroute file"), mapping)
    if not traced:
        return _fail("traceroute file holds no records")
    dataset = paths.PathDataset(traced)
    rows = paths.vulnerability_timeseries(
        dataset, exclude_endpoint_ases=bool(args.exclude_endpoint_ases)
    )
    out = _out(args)
    artifacts.write_csv(
        out / "vulnerability_timeseries.csv",
        config,
        [
            "day",
            "pct_symmetric_day1",
            "pct_asymmetric",
            "pct_asymmetric_cumulative",
            "n_quads",
            "n_inherited_paths",
        ],
        (
            [
                row.day,
                f"{row.pct_symmetric_day1:.4f}",
                f"{row.pct_asymmetric:.4f}",
                f"{row.pct_asymmetric_cumulative:.4f}",
                row.n_quads,
                row.n_inherited_paths,
            ]
            for row in rows
        ),
    )
    last = rows[-1]
    print(
        f"{len(rows)} days, {last.n_quads} quads; asymmetric day-1 "
        f"{rows[0].pct_asymmetric:.1f}% -> cumulative {last.pct_asymmetric_cumulative:.1f}%"
    )
    return 0


# --- detect -------------------------------------------------------------------


def cmd_detect(args) -> int:
    config = _effective_config(
        args, ["seed", "frequency_threshold", "time_threshold", "quiet_gap", "burst_window"]
    )
    config["window_start"] = args.window_start
    config["window_end"] = args.window_end
    config["freq_denominator"] = args.freq_denominator
    loaded, updates, window = _ingest_updates(args, config)
    config["window_start"], config["window_end"] = window
    relays = loaded["relays"]
    index = RelayIndex([r for r in relays if r.is_guard or r.is_exit])
    alerts = detect.frequency_heuristic(
        updates,
        index,
        threshold=float(config["frequency_threshold"]),
        window=window,
        per_prefix_denominator=args.freq_denominator == "per-prefix",
    )
    alerts += detect.time_heuristic(
        updates, index, threshold=float(config["time_threshold"]), window=window
    )
    alerts += detect.more_specific_monitor(updates, index, window_end=window[1])
    out = _out(args)
    artifacts.write_jsonl(
        out / "alerts.jsonl", config, (detect.alert_to_record(a) for a in alerts)
    )
    if args.events:
        events = detect.load_hijack_events(_require(args.events, "event file"))
        impacts = detect.cross_reference(events, relays)
        artifacts.write_csv(
            out / "event_impacts.csv",
            config,
            ["label", "prefixes", "relays", "guards", "exits"],
            ([i.label, i.prefixes, i.relays, i.guards, i.exits] for i in impacts),
        )
    print(f"{len(alerts)} alerts over window {window[0]:.0f}..{window[1]:.0f}")
    return 0


def cmd_concentrate(args) -> int:
    config = _effective_config(args, ["seed"])
    relays = load_relays(_require(args.relays, "relay list"))
    origin_map = load_prefix_origins(_require(args.origins, "origin map"))
    report = detect.concentration(relays, origin_map)
    out = _out(args)
    artifacts.write_csv(
        out / "concentration.csv",
        config,
        ["asn", "percent_relays", "percent_bandwidth", "prefix_count", "relay_count"],
        (
            [r.asn, f"{r.percent_relays:.4f}", f"{r.percent_bandwidth:.4f}", r.prefix_count, r.relay_count]
            for r in report.rows
        ),
    )
    artifacts.write_csv(
        out / "uncovered_relays.csv",
        config,
        ["address", "nickname"],
        ([int_to_ip(r.address), r.nickname] for r in report.uncovered),
    )
    top_relays, top_bw, top_prefixes = report.cumulative(6)
    print(
        f"top 6 ASes: {top_relays:.2f}% of relays, {top_bw:.2f}% of bandwidth, "
        f"{top_prefixes} prefixes; {len(report.uncovered)} uncovered relays"
    )
    return 0


def cmd_prefixlen(args) -> int:
    config = _effective_config(args, ["seed"])
    relays = load_relays(_require(args.relays, "relay list"))
    origin_map = load_prefix_origins(_require(args.origins, "origin map"))
    report = detect.prefix_length_vulnerability(relays, origin_map)
    out = _out(args)
    artifacts.write_csv(
        out / "prefix_lengths.csv",
        config,
        ["prefix_length", "hosting_prefixes", "percent"],
        (
            [length, count, f"{100.0 * count / report.total_prefixes:.4f}"]
            for length, count in report.histogram.items()
        ),
        extra_meta={"percent_hijackable": f"{report.percent_hijackable:.4f}"},
    )
    print(f"{report.percent_hijackable:.1f}% of relay-hosting prefixes shorter than /24")
    return 0


# --- simulate -----------------------------------------------------------------


def _write_traffic_dataset(out: Path, config, clients, servers, truth) -> None:
    traces_dir = out / "traces"
    traces_dir.mkdir(parents=True, exist_ok=True)
    manifest_rows = []
    for role, traces in (("client", clients), ("server", servers)):
        for trace in traces:
            name = f"{trace.vantage_id}.jsonl"
            write_trace_jsonl(traces_dir / name, trace)
            manifest_rows.append([f"traces/{name}", trace.vantage_id, role])
    artifacts.write_csv(out / "manifest.csv", config, ["file", "vantage_id", "role"], manifest_rows)
    artifacts.write_json(out / "truth.json", config, truth.to_dict())


def cmd_simulate(args) -> int:
    config = _effective_config(args, ["seed"])
    scenario = simulate.load_scenario(_require(args.scenario, "scenario file"))
    out = _out(args)
    if isinstance(scenario, simulate.TrafficScenario):
        if args.seed is not None:
            scenario = simulate.TrafficScenario.from_dict(
                {**scenario.to_dict(), "seed": args.seed}
            )
        config.update(scenario.to_dict())
        clients, servers, truth = simulate.gen_traffic(scenario)
        _write_traffic_dataset(out, config, clients, servers, truth)
        print(f"traffic dataset: {len(clients)} pairs under {out}")
        return 0
    if isinstance(scenario, simulate.RoutingScenario):
        updates, truth = simulate.gen_updates(scenario)
        config.update({"kind": "routing", "scenario_seed": scenario.seed})
        write_updates(out / "updates.csv", updates)
        write_relays(out / "relays.csv", scenario.relays)
        artifacts.write_json(out / "truth.json", config, truth.to_dict())
        print(f"routing dataset: {len(updates)} updates, {len(truth.events)} events under {out}")
        return 0
    traffic, timing = scenario
    if args.seed is not None:
        traffic = simulate.TrafficScenario.from_dict({**traffic.to_dict(), "seed": args.seed})
    config.update({**traffic.to_dict(), "kind": "interception", **timing})
    run = simulate.gen_interception_timeline(traffic, **timing)
    _write_traffic_dataset(out, config, run.attacker_traces, run.server_traces, run.truth)
    artifacts.write_csv(
        out / "tunnel_series.csv",
        config,
        ["second_raw", "second_adjusted", "good_acks", "attacker_acks"],
        (
            [f"{s:.0f}", f"{s - run.capture[0]:.0f}", g, a]
            for s, g, a in zip(run.seconds, run.good_acks, run.attacker_acks)
        ),
        extra_meta={"capture_start": run.capture[0], "capture_end": run.capture[1]},
    )
    print(
        f"interception dataset: capture [{run.capture[0]:.0f}, {run.capture[1]:.0f}) under {out}"
    )
    return 0


# --- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="routelens",
        description="AS-level traffic-correlation and routing-attack analyses on files",
    )
    parser.add_argument("--version", action="version", version=f"routelens {__version__}")
    parser.add_argument("--output-dir", default="out", help="artifact directory")
    parser.add_argument("--seed", type=int, default=None, help="seed recorded in artifacts")
    parser.add_argument("--config", default=None, help="JSON config file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("correlate", help="match client traces to server traces")
    p.add_argument("--manifest", required=True)
    p.add_argument("--truth", default=None)
    p.add_argument("--scenario", default="client-data:server-ack")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--bin-width", dest="bin_width", type=float, default=None)
    p.add_argument("--window", type=float, default=None)
    p.add_argument("--max-lag", dest="max_lag", type=int, default=None)
    p.add_argument(
        "--cumulative",
        action="store_true",
        help="experiment: correlate running totals instead of per-bin deltas",
    )
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("churn", help="compromise metric from an update stream")
    p.add_argument("--updates", required=True)
    p.add_argument("--relays", required=True)
    p.add_argument("--initial", default=None, help="initial state, same schema, kind=A")
    p.add_argument("--window-start", type=float, default=None)
    p.add_argument("--window-end", type=float, default=None)
    p.add_argument("--min-overlap", dest="min_overlap", type=float, default=None)
    p.add_argument("--filter-resets", action="store_true")
    p.add_argument("--sessions", default=None, help="CSV session_id,local_as overriding inference")
    p.set_defaults(func=cmd_churn)

    p = sub.add_parser("paths", help="traceroute path-asymmetry vulnerability")
    p.add_argument("--traceroutes", required=True)
    p.add_argument("--mapping", required=True)
    p.add_argument(
        "--exclude-endpoint-ases",
        action="store_true",
        help="discount each quad's own endpoint ASes as witnesses",
    )
    p.set_defaults(func=cmd_paths)

    p = sub.add_parser("detect", help="hijack/interception heuristics over updates")
    p.add_argument("--updates", required=True)
    p.add_argument("--relays", required=True)
    p.add_argument("--initial", default=None)
    p.add_argument("--window-start", type=float, default=None)
    p.add_argument("--window-end", type=float, default=None)
    p.add_argument(
        "--frequency-threshold", dest="frequency_threshold", type=float, default=None
    )
    p.add_argument("--time-threshold", dest="time_threshold", type=float, default=None)
    p.add_argument("--filter-resets", action="store_true")
    p.add_argument(
        "--freq-denominator",
        choices=("per-prefix", "all"),
        default="per-prefix",
        help="divide an origin's announcements by its prefix's total or by all announcements",
    )
    p.add_argument("--events", default=None, help="known-event CSV for cross-referencing")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("concentrate", help="relay concentration by origin AS")
    p.add_argument("--relays", required=True)
    p.add_argument("--origins", required=True)
    p.set_defaults(func=cmd_concentrate)

    p = sub.add_parser("prefixlen", help="relay-hosting prefix length distribution")
    p.add_argument("--relays", required=True)
    p.add_argument("--origins", required=True)
    p.set_defaults(func=cmd_prefixlen)

    p = sub.add_parser("simulate", help="generate a ground-truth dataset")
    p.add_argument("--scenario", required=True)
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        return _fail(str(exc))
    except FileNotFoundError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
