"""BGP update ingestion and per-session routing state for relay prefixes.

Each vantage session maintains its own view: announcements open an
interval-annotated route entry, withdrawals and path changes close it.
Only prefixes covering at least one relay are tracked; everything else
is noise for these analyses. A session-reset filter drops re-announcement
bursts that would otherwise look like churn.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .core import (
    AsPath,
    IpPrefix,
    RelayDescriptor,
    RelayIndex,
    RelayRole,
    RouteEntry,
    VantageSession,
)


class UpdateKind(Enum):
    ANNOUNCE = "A"
    WITHDRAW = "W"


class OutOfOrderError(Exception):
    pass


@dataclass(frozen=True)
class BgpUpdate:
    timestamp: float
    session: str
    kind: UpdateKind
    prefix: IpPrefix
    path: AsPath | None  # None for withdrawals

    def __post_init__(self) -> None:
        if self.kind is UpdateKind.ANNOUNCE and self.path is None:
            raise ValueError("announcement without a path")
        if self.kind is UpdateKind.WITHDRAW and self.path is not None:
            raise ValueError("withdrawal with a path")


@dataclass(frozen=True)
class ParseIssue:
    line_no: int
    message: str
    raw: str


def parse_updates(source) -> tuple[list[BgpUpdate], list[ParseIssue]]:
    """Parse the update CSV schema timestamp,session,kind,prefix,path.

    kind is A or W; path is a space-separated AS list (quoted when written
    by csv). Malformed lines become ParseIssue diagnostics instead of being
    silently dropped. Output is stably sorted by timestamp, which preserves
    file order per session at equal timestamps.
    """
    updates: list[BgpUpdate] = []
    issues: list[ParseIssue] = []
    own_handle = isinstance(source, (str, bytes)) or hasattr(source, "__fspath__")
    handle = open(source, newline="") if own_handle else source
    try:
        for line_no, row in enumerate(csv.reader(handle), start=1):
            if not row or (row[0].startswith("#")):
                continue
            if [cell.strip().lower() for cell in row[:2]] == ["timestamp", "session"]:
                continue  # header
            try:
                if len(row) != 5:
                    raise ValueError(f"expected 5 fields, got {len(row)}")
                timestamp = float(row[0])
                session = row[1].strip()
                if not session:
                    raise ValueError("empty session id")
                kind = UpdateKind(row[2].strip().upper())
                prefix = IpPrefix.parse(row[3])
                path_text = row[4].strip()
                if kind is UpdateKind.ANNOUNCE:
                    path = AsPath.parse(path_text)
                else:
                    if path_text:
                        raise ValueError("withdrawal carries a path")
                    path = None
                updates.append(BgpUpdate(timestamp, session, kind, prefix, path))
            except (ValueError, KeyError) as exc:
                issues.append(ParseIssue(line_no, str(exc), ",".join(row)))
    finally:
        if own_handle:
            handle.close()
    updates.sort(key=lambda u: u.timestamp)
    return updates, issues


def write_updates(path, updates: Iterable[BgpUpdate]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["timestamp", "session", "kind", "prefix", "path"])
        for update in updates:
            writer.writerow(
                [
                    f"{update.timestamp:g}",
                    update.session,
                    update.kind.value,
                    str(update.prefix),
                    "" if update.path is None else str(update.path),
                ]
            )


def filter_session_resets(
    updates: list[BgpUpdate],
    quiet_gap: float = 3600.0,
    burst_window: float = 600.0,
) -> list[BgpUpdate]:
    """Drop session-reset artifacts.

    After a per-session silence of at least quiet_gap, announcements inside
    the following burst_window that re-announce exactly the (prefix, path)
    that was live before the gap carry no information (the peer is dumping
    its table after a reset) and are removed. Everything else is retained.
    """
    last_seen: dict[str, float] = {}
    live: dict[tuple[str, IpPrefix], AsPath] = {}
    burst_until: dict[str, float] = {}
    pre_gap: dict[str, dict[tuple[str, IpPrefix], AsPath]] = {}
    kept: list[BgpUpdate] = []
    for update in updates:
        session = update.session
        previous = last_seen.get(session)
        if previous is not None and update.timestamp - previous >= quiet_gap:
            burst_until[session] = update.timestamp + burst_window
            pre_gap[session] = {
                key: path for key, path in live.items() if key[0] == session
            }
        last_seen[session] = update.timestamp

        drop = False
        if (
            update.kind is UpdateKind.ANNOUNCE
            and update.timestamp <= burst_until.get(session, -1.0)
            and pre_gap.get(session, {}).get((session, update.prefix)) == update.path
        ):
            drop = True

        key = (session, update.prefix)
        if update.kind is UpdateKind.ANNOUNCE:
            live[key] = update.path
        else:
            live.pop(key, None)
        if not drop:
            kept.append(update)
    return kept


class SessionRib:
    """Single-writer routing state for one vantage session.

    Announcements with an unchanged path are no-ops, so the interval
    history records path changes only; that is exactly what the
    simultaneous-observation metric consumes.
    """

    def __init__(
        self,
        session: VantageSession,
        relay_index: RelayIndex,
        tor_filter: bool = True,
    ) -> None:
        self.session = session
        self._relays = relay_index
        self._tor_filter = tor_filter
        self.live: dict[IpPrefix, RouteEntry] = {}
        self.history: dict[IpPrefix, list[RouteEntry]] = {}
        self.last_timestamp = float("-inf")
        self._role_cache: dict[IpPrefix, RelayRole | None] = {}

    def _role(self, prefix: IpPrefix) -> RelayRole | None:
        if prefix not in self._role_cache:
            self._role_cache[prefix] = self._relays.role_of_prefix(prefix)
        return self._role_cache[prefix]

    def apply(self, update: BgpUpdate) -> None:
        if update.timestamp < self.last_timestamp:
            raise OutOfOrderError(
                f"update at {update.timestamp} before {self.last_timestamp} "
                f"on session {self.session.session_id}"
            )
        self.last_timestamp = update.timestamp
        role = self._role(update.prefix)
        if self._tor_filter and role is None:
            return  # prefix hosts no relay: not tracked
        if role is None:
            role = RelayRole.BOTH
        current = self.live.get(update.prefix)
        if update.kind is UpdateKind.WITHDRAW:
            if current is not None:
                current.t_end = update.timestamp
                self.history.setdefault(update.prefix, []).append(current)
                del self.live[update.prefix]
            return
        if current is not None:
            if current.path == update.path:
                return  # duplicate announcement: no information
            current.t_end = update.timestamp
            self.history.setdefault(update.prefix, []).append(current)
        self.live[update.prefix] = RouteEntry(
            t_start=update.timestamp,
            t_end=None,
            prefix=update.prefix,
            relay_role=role,
            path=update.path,
        )

    def entries(self) -> Iterable[tuple[IpPrefix, RouteEntry]]:
        """Closed history entries plus open live entries, per prefix."""
        prefixes = set(self.history) | set(self.live)
        for prefix in sorted(prefixes):
            for entry in self.history.get(prefix, ()):
                yield prefix, entry
            if prefix in self.live:
                yield prefix, self.live[prefix]

    def entries_for_address(self, address: int) -> list[RouteEntry]:
        found = []
        for prefix in set(self.history) | set(self.live):
            if prefix.covers(address):
                found.extend(self.history.get(prefix, ()))
                if prefix in self.live:
                    found.append(self.live[prefix])
        return found

    def route_for_relay(self, relay: RelayDescriptor, t: float) -> RouteEntry | None:
        """Most-specific tracked entry live at t whose prefix covers the relay."""
        best: RouteEntry | None = None
        for entry in self.entries_for_address(relay.address):
            if entry.live_at(t) and (best is None or entry.prefix.length > best.prefix.length):
                best = entry
        return best

    def live_at(self, t: float) -> list[RouteEntry]:
        out = []
        for _, entry in self.entries():
            if entry.live_at(t):
                out.append(entry)
        return out


def ingest(
    updates: Iterable[BgpUpdate],
    relays: list[RelayDescriptor] | RelayIndex,
    local_as: dict[str, int] | None = None,
    tor_filter: bool = True,
) -> dict[str, SessionRib]:
    """Replay updates into per-session RIBs.

    The session's local AS comes from local_as when provided, otherwise it
    is inferred as the first AS of the first path announced on the session
    (the BGP neighbor), falling back to 0 for sessions that only withdraw.
    """
    index = relays if isinstance(relays, RelayIndex) else RelayIndex(relays)
    ribs: dict[str, SessionRib] = {}
    pending: dict[str, list[BgpUpdate]] = {}
    inferred: dict[str, int] = dict(local_as or {})
    for update in updates:
        sid = update.session
        if sid not in inferred and update.path is not None:
            inferred[sid] = update.path.ases[0]
        if sid in ribs:
            ribs[sid].apply(update)
        elif sid in inferred:
            rib = SessionRib(VantageSession(sid, inferred[sid]), index, tor_filter)
            for queued in pending.pop(sid, ()):
                rib.apply(queued)
            rib.apply(update)
            ribs[sid] = rib
        else:
            pending.setdefault(sid, []).append(update)
    for sid, queued in pending.items():
        rib = SessionRib(VantageSession(sid, inferred.get(sid, 0)), index, tor_filter)
        for update in queued:
            rib.apply(update)
        ribs[sid] = rib
    return ribs
