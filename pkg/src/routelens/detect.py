"""Relay concentration, hijack heuristics, and relay-selection checks.

Detection is deliberately noisy-tolerant: false positives cost a relay a
short suspension, false negatives cost anonymity, so every heuristic
reports its score and the operator re-ranks. Alerts are merged per
(prefix, origin, heuristic) so a flapping announcement produces one alert
with an interval list instead of spam.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum

from .bgp import BgpUpdate, UpdateKind
from .core import (
    AsPath,
    IpPrefix,
    PrefixTable,
    RelayDescriptor,
    RelayIndex,
    int_to_ip,
    is_more_specific_of,
)


class Heuristic(Enum):
    FREQUENCY = "frequency"
    TIME = "time"
    MORE_SPECIFIC = "more_specific"


class NoAdmissibleGuardError(Exception):
    pass


@dataclass(frozen=True)
class HijackAlert:
    prefix: IpPrefix
    origin_as: int
    heuristic: Heuristic
    score: float
    windows: tuple[tuple[float, float], ...]
    guards: tuple[int, ...]  # affected relay addresses by role
    exits: tuple[int, ...]

    def overlaps(self, t_start: float, t_end: float) -> bool:
        return any(w0 <= t_end and t_start <= w1 for w0, w1 in self.windows)


def alert_to_record(alert: HijackAlert) -> dict:
    return {
        "prefix": str(alert.prefix),
        "origin_as": alert.origin_as,
        "heuristic": alert.heuristic.value,
        "score": alert.score,
        "windows": [list(w) for w in alert.windows],
        "guards": [int_to_ip(a) for a in alert.guards],
        "exits": [int_to_ip(a) for a in alert.exits],
    }


def alert_from_record(record: dict) -> HijackAlert:
    from .core import ip_to_int

    return HijackAlert(
        prefix=IpPrefix.parse(record["prefix"]),
        origin_as=int(record["origin_as"]),
        heuristic=Heuristic(record["heuristic"]),
        score=float(record["score"]),
        windows=tuple((float(a), float(b)) for a, b in record["windows"]),
        guards=tuple(ip_to_int(a) for a in record["guards"]),
        exits=tuple(ip_to_int(a) for a in record["exits"]),
    )


def _affected(index: RelayIndex, prefix: IpPrefix) -> tuple[tuple[int, ...], tuple[int, ...]]:
    covered = index.covered_by(prefix)
    guards = tuple(r.address for r in covered if r.is_guard)
    exits = tuple(r.address for r in covered if r.is_exit)
    return guards, exits


def _merge_windows(
    spans: list[tuple[float, float]], gap: float = 3600.0
) -> tuple[tuple[float, float], ...]:
    merged: list[tuple[float, float]] = []
    for start, end in sorted(spans):
        if merged and start <= merged[-1][1] + gap:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return tuple(merged)


# --- concentration ------------------------------------------------------------


@dataclass(frozen=True)
class ConcentrationRow:
    asn: int
    percent_relays: float
    percent_bandwidth: float
    prefix_count: int
    relay_count: int


@dataclass
class ConcentrationReport:
    rows: list[ConcentrationRow]
    uncovered: list[RelayDescriptor]

    def cumulative(self, top: int) -> tuple[float, float, int]:
        """(percent relays, percent bandwidth, prefix count) of the top rows."""
        head = self.rows[:top]
        return (
            sum(r.percent_relays for r in head),
            sum(r.percent_bandwidth for r in head),
            sum(r.prefix_count for r in head),
        )


def concentration(relays: list[RelayDescriptor], origin_map: PrefixTable) -> ConcentrationReport:
    """Group relays by the origin AS of their most-specific covering prefix.

    Relays with no covering prefix land in the uncovered report and are
    excluded from the percentages. Rows sort by relay share descending.
    """
    total_bw = 0.0
    covered: list[tuple[RelayDescriptor, IpPrefix, int]] = []
    uncovered: list[RelayDescriptor] = []
    for relay in relays:
        found = origin_map.lookup_entry(relay.address)
        if found is None:
            uncovered.append(relay)
        else:
            prefix, asn = found
            covered.append((relay, prefix, int(asn)))
            total_bw += relay.bandwidth
    groups: dict[int, dict] = {}
    for relay, prefix, asn in covered:
        group = groups.setdefault(asn, {"relays": 0, "bw": 0.0, "prefixes": set()})
        group["relays"] += 1
        group["bw"] += relay.bandwidth
        group["prefixes"].add(prefix)
    n_covered = len(covered)
    rows = [
        ConcentrationRow(
            asn=asn,
            percent_relays=100.0 * g["relays"] / n_covered if n_covered else 0.0,
            percent_bandwidth=100.0 * g["bw"] / total_bw if total_bw else 0.0,
            prefix_count=len(g["prefixes"]),
            relay_count=g["relays"],
        )
        for asn, g in groups.items()
    ]
    rows.sort(key=lambda r: (-r.percent_relays, r.asn))
    return ConcentrationReport(rows, uncovered)


# --- cross reference of known events -------------------------------------------


@dataclass(frozen=True)
class HijackEvent:
    prefix: IpPrefix
    t_start: float
    t_end: float
    label: str = ""


def load_hijack_events(path) -> list[HijackEvent]:
    events = []
    with open(path, newline="") as handle:
        for row in csv.DictReader(handle):
            events.append(
                HijackEvent(
                    prefix=IpPrefix.parse(row["prefix"]),
                    t_start=float(row["t_start"]),
                    t_end=float(row["t_end"]),
                    label=row.get("label", "") or "",
                )
            )
    return events


@dataclass(frozen=True)
class EventImpact:
    label: str
    prefixes: int
    relays: int
    guards: int
    exits: int


def cross_reference(
    events: list[HijackEvent], relays: list[RelayDescriptor]
) -> list[EventImpact]:
    """Per event label: how many relays/guards/exits its prefixes cover.

    Counts deduplicate relays per event; dual-flagged relays count in both
    the guard and exit columns, so guards + exits >= relays.
    """
    index = RelayIndex(relays)
    by_label: dict[str, dict] = {}
    for event in events:
        group = by_label.setdefault(event.label, {"prefixes": 0, "relays": set()})
        group["prefixes"] += 1
        group["relays"].update(index.covered_by(event.prefix))
    impacts = []
    for label in sorted(by_label):
        hit = by_label[label]["relays"]
        impacts.append(
            EventImpact(
                label=label,
                prefixes=by_label[label]["prefixes"],
                relays=len(hit),
                guards=sum(1 for r in hit if r.is_guard),
                exits=sum(1 for r in hit if r.is_exit),
            )
        )
    return impacts


# --- detection heuristics -------------------------------------------------------


def frequency_heuristic(
    updates: list[BgpUpdate],
    relays: list[RelayDescriptor] | RelayIndex,
    threshold: float = 0.00001,
    window: tuple[float, float] | None = None,
    per_prefix_denominator: bool = True,
) -> list[HijackAlert]:
    """Flag origins that announce a relay-hosting prefix extremely rarely.

    freq(origin, prefix) is the origin's share of the prefix's
    announcements (or of all announcements when per_prefix_denominator is
    off); an alert fires on freq strictly below the threshold.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    index = relays if isinstance(relays, RelayIndex) else RelayIndex(relays)
    totals: dict[IpPrefix, int] = {}
    per_origin: dict[tuple[IpPrefix, int], list[float]] = {}
    n_announcements = 0
    for update in updates:
        if update.kind is not UpdateKind.ANNOUNCE:
            continue
        if window is not None and not window[0] <= update.timestamp < window[1]:
            continue
        if not index.covers_any(update.prefix):
            continue
        n_announcements += 1
        totals[update.prefix] = totals.get(update.prefix, 0) + 1
        per_origin.setdefault((update.prefix, update.path.origin), []).append(
            update.timestamp
        )
    alerts = []
    for (prefix, origin), stamps in sorted(
        per_origin.items(), key=lambda item: (item[0][0], item[0][1])
    ):
        denominator = totals[prefix] if per_prefix_denominator else n_announcements
        freq = len(stamps) / denominator
        if freq < threshold:
            guards, exits = _affected(index, prefix)
            alerts.append(
                HijackAlert(
                    prefix=prefix,
                    origin_as=origin,
                    heuristic=Heuristic.FREQUENCY,
                    score=freq,
                    windows=_merge_windows([(t, t) for t in stamps]),
                    guards=guards,
                    exits=exits,
                )
            )
    return alerts


def _route_lifetimes(
    updates: list[BgpUpdate],
    index: RelayIndex,
    window: tuple[float, float],
) -> dict[tuple[IpPrefix, AsPath], list[tuple[float, float]]]:
    """Announced intervals per (prefix, path), unioned across sessions."""
    t_lo, t_hi = window
    open_routes: dict[tuple[str, IpPrefix], tuple[AsPath, float]] = {}
    spans: dict[tuple[IpPrefix, AsPath], list[tuple[float, float]]] = {}

    def close(session: str, prefix: IpPrefix, at: float) -> None:
        current = open_routes.pop((session, prefix), None)
        if current is None:
            return
        path, since = current
        start, end = max(since, t_lo), min(at, t_hi)
        if start < end:
            spans.setdefault((prefix, path), []).append((start, end))

    for update in updates:
        if update.timestamp >= t_hi:
            break
        if not index.covers_any(update.prefix):
            continue
        if update.kind is UpdateKind.WITHDRAW:
            close(update.session, update.prefix, update.timestamp)
            continue
        current = open_routes.get((update.session, update.prefix))
        if current is not None and current[0] == update.path:
            continue
        close(update.session, update.prefix, update.timestamp)
        open_routes[(update.session, update.prefix)] = (update.path, update.timestamp)
    for (session, prefix), (path, since) in list(open_routes.items()):
        start = max(since, t_lo)
        if start < t_hi:
            spans.setdefault((prefix, path), []).append((start, t_hi))
    merged: dict[tuple[IpPrefix, AsPath], list[tuple[float, float]]] = {}
    for key, raw in spans.items():
        out: list[tuple[float, float]] = []
        for start, end in sorted(raw):
            if out and start <= out[-1][1]:
                out[-1] = (out[-1][0], max(out[-1][1], end))
            else:
                out.append((start, end))
        merged[key] = out
    return merged


def time_heuristic(
    updates: list[BgpUpdate],
    relays: list[RelayDescriptor] | RelayIndex,
    threshold: float = 0.01,
    window: tuple[float, float] | None = None,
) -> list[HijackAlert]:
    """Flag relay-hosting routes announced for a tiny slice of the window.

    A route is one (prefix, path); its lifetime is the union of announced
    intervals across sessions, and the score is lifetime divided by window
    length (dimensionless, like the frequency score). Alerts fire strictly
    below the threshold.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    index = relays if isinstance(relays, RelayIndex) else RelayIndex(relays)
    if window is None:
        stamps = [u.timestamp for u in updates]
        if not stamps:
            return []
        window = (min(stamps), max(stamps) + 1.0)
    length = window[1] - window[0]
    if length <= 0:
        raise ValueError("empty window")
    alerts = []
    lifetimes = _route_lifetimes(updates, index, window)
    for (prefix, path), spans in sorted(
        lifetimes.items(), key=lambda item: (item[0][0], item[0][1].ases)
    ):
        alive = sum(end - start for start, end in spans)
        fraction = alive / length
        if 0.0 < fraction < threshold:
            guards, exits = _affected(index, prefix)
            alerts.append(
                HijackAlert(
                    prefix=prefix,
                    origin_as=path.origin,
                    heuristic=Heuristic.TIME,
                    score=fraction,
                    windows=tuple(spans),
                    guards=guards,
                    exits=exits,
                )
            )
    return alerts


def more_specific_monitor(
    updates: list[BgpUpdate],
    relays: list[RelayDescriptor] | RelayIndex,
    window_end: float | None = None,
) -> list[HijackAlert]:
    """Flag foreign-origin announcements nested inside a live relay prefix.

    The announced prefix must itself cover a relay (those are the affected
    relays) and must be strictly more specific than a live prefix whose
    origin differs; a same-origin more-specific is ordinary traffic
    engineering. Alert windows run until the attacker's withdrawal.
    """
    index = relays if isinstance(relays, RelayIndex) else RelayIndex(relays)
    live: dict[tuple[str, IpPrefix], AsPath] = {}
    hits: dict[tuple[IpPrefix, int], list[tuple[float, float]]] = {}
    open_hits: dict[tuple[str, IpPrefix, int], float] = {}
    horizon = window_end
    for update in updates:
        horizon = update.timestamp if horizon is None else max(horizon, update.timestamp)
    for update in updates:
        key = (update.session, update.prefix)
        if not index.covers_any(update.prefix):
            continue
        if update.kind is UpdateKind.WITHDRAW:
            live.pop(key, None)
            for (session, prefix, origin), since in list(open_hits.items()):
                if session == update.session and prefix == update.prefix:
                    hits.setdefault((prefix, origin), []).append((since, update.timestamp))
                    del open_hits[(session, prefix, origin)]
            continue
        origin = update.path.origin
        for (session, incumbent), path in live.items():
            if session != update.session:
                continue
            if is_more_specific_of(update.prefix, incumbent) and path.origin != origin:
                open_key = (update.session, update.prefix, origin)
                open_hits.setdefault(open_key, update.timestamp)
                break
        live[key] = update.path
    for (session, prefix, origin), since in open_hits.items():
        hits.setdefault((prefix, origin), []).append((since, horizon if horizon is not None else since))
    alerts = []
    for (prefix, origin), spans in sorted(hits.items(), key=lambda i: (i[0][0], i[0][1])):
        guards, exits = _affected(index, prefix)
        alerts.append(
            HijackAlert(
                prefix=prefix,
                origin_as=origin,
                heuristic=Heuristic.MORE_SPECIFIC,
                score=float(len(spans)),
                windows=_merge_windows(spans, gap=0.0),
                guards=guards,
                exits=exits,
            )
        )
    return alerts


def run_all_heuristics(
    updates: list[BgpUpdate],
    relays: list[RelayDescriptor],
    frequency_threshold: float = 0.00001,
    time_threshold: float = 0.01,
    window: tuple[float, float] | None = None,
) -> list[HijackAlert]:
    """Union of the three detectors over guard/exit-relevant prefixes."""
    index = RelayIndex([r for r in relays if r.is_guard or r.is_exit])
    alerts = frequency_heuristic(updates, index, frequency_threshold, window)
    alerts += time_heuristic(updates, index, time_threshold, window)
    alerts += more_specific_monitor(
        updates, index, window_end=None if window is None else window[1]
    )
    return alerts


# --- prefix length distribution -------------------------------------------------


@dataclass
class PrefixLengthReport:
    histogram: dict[int, int]  # prefix length -> relay-hosting prefix count
    percent_hijackable: float  # strictly shorter than /24

    @property
    def total_prefixes(self) -> int:
        return sum(self.histogram.values())


def prefix_length_vulnerability(
    relays: list[RelayDescriptor], origin_map: PrefixTable
) -> PrefixLengthReport:
    """Length distribution of the prefixes that host relays.

    Prefixes shorter than /24 admit a globally propagated more-specific
    announcement, so their share is the headline number.
    """
    hosting: set[IpPrefix] = set()
    for relay in relays:
        found = origin_map.lookup_entry(relay.address)
        if found is not None:
            hosting.add(found[0])
    histogram: dict[int, int] = {}
    for prefix in hosting:
        histogram[prefix.length] = histogram.get(prefix.length, 0) + 1
    total = len(hosting)
    short = sum(count for length, count in histogram.items() if length < 24)
    return PrefixLengthReport(
        histogram=dict(sorted(histogram.items())),
        percent_hijackable=100.0 * short / total if total else 0.0,
    )


# --- relay selection countermeasure ---------------------------------------------


def as_aware_select(
    guard_paths: dict[str, list[AsPath]],
    exit_paths: list[AsPath],
    current_path: dict[str, AsPath] | None = None,
) -> list[str]:
    """Guards whose historical client-side ASes avoid the exit-side ASes.

    guard_paths maps each candidate to the AS paths seen toward it over
    the lookback period; exit_paths is the exit-to-destination history. A
    guard is admissible when the union of its path ASes is disjoint from
    the union of exit-side ASes. Admissible guards are ordered by the
    length of the current path (last historical entry unless overridden),
    shorter first, so callers can prefer nearby guards.
    """
    exit_ases: set[int] = set()
    for path in exit_paths:
        exit_ases.update(path.ases)
    admissible = []
    for guard in sorted(guard_paths):
        history = guard_paths[guard]
        if not history:
            continue
        seen: set[int] = set()
        for path in history:
            seen.update(path.ases)
        if seen & exit_ases:
            continue
        reference = (current_path or {}).get(guard, history[-1])
        admissible.append((len(reference), guard))
    if not admissible:
        raise NoAdmissibleGuardError("every candidate shares an AS with the exit side")
    admissible.sort()
    return [guard for _, guard in admissible]


def write_alerts_jsonl(path, alerts: list[HijackAlert]) -> None:
    with open(path, "w") as handle:
        for alert in alerts:
            handle.write(json.dumps(alert_to_record(alert), sort_keys=True) + "\n")


def read_alerts_jsonl(path) -> list[HijackAlert]:
    alerts = []
    with open(path) as handle:
        for line in handle:
            line = line.strip()
            if line:
                alerts.append(alert_from_record(json.loads(line)))
    return alerts
