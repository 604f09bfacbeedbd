"""Shared domain types for AS-level anonymity analysis.

IPv4 prefixes, relay descriptors, AS paths, interval-annotated route
entries, and a longest-prefix-match table with a build-then-freeze
lifecycle. All analysis modules treat these as value objects; only
PrefixTable is mutable, and only until it is frozen.
"""

from __future__ import annotations

import csv
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Iterator


class RelayRole(Enum):
    GUARD = "guard"
    EXIT = "exit"
    BOTH = "both"


def ip_to_int(text: str) -> int:
    parts = text.strip().split(".")
    if len(parts) != 4:
        raise ValueError(f"not a dotted quad: {text!r}")
    value = 0
    for part in parts:
        octet = int(part)
        if not 0 <= octet <= 255:
            raise ValueError(f"octet out of range in {text!r}")
        value = (value << 8) | octet
    return value


def int_to_ip(value: int) -> str:
    if not 0 <= value <= 0xFFFFFFFF:
        raise ValueError(f"address out of range: {value}")
    return ".".join(str((value >> shift) & 0xFF) for shift in (24, 16, 8, 0))


def _mask(length: int) -> int:
    return 0 if length == 0 else (0xFFFFFFFF << (32 - length)) & 0xFFFFFFFF


@dataclass(frozen=True, order=True)
class IpPrefix:
    """IPv4 prefix. The base address is normalized (host bits zeroed) on
    construction, so normalization is idempotent by construction."""

    base: int
    length: int

    def __post_init__(self) -> None:
        if not 0 <= self.length <= 32:
            raise ValueError(f"prefix length out of range: {self.length}")
        if not 0 <= self.base <= 0xFFFFFFFF:
            raise ValueError(f"base address out of range: {self.base}")
        object.__setattr__(self, "base", self.base & _mask(self.length))

    @classmethod
    def parse(cls, text: str) -> "IpPrefix":
        addr, _, length = text.strip().partition("/")
        if not length:
            raise ValueError(f"missing /length in {text!r}")
        return cls(ip_to_int(addr), int(length))

    @classmethod
    def host(cls, address: int) -> "IpPrefix":
        return cls(address, 32)

    @property
    def last_address(self) -> int:
        return self.base | (0xFFFFFFFF >> self.length)

    def covers(self, address: int) -> bool:
        return (address & _mask(self.length)) == self.base

    def __str__(self) -> str:
        return f"{int_to_ip(self.base)}/{self.length}"


def prefix_covers(prefix: IpPrefix, address: int) -> bool:
    """True iff the top prefix.length bits of address match the prefix."""
    return prefix.covers(address)


def is_more_specific_of(candidate: IpPrefix, incumbent: IpPrefix) -> bool:
    """True iff candidate lies inside incumbent and is strictly longer."""
    return incumbent.covers(candidate.base) and candidate.length > incumbent.length


@dataclass(frozen=True)
class RelayDescriptor:
    """One relay from a consensus-style listing.

    Bandwidth is in arbitrary consensus units; circuit analyses only admit
    relays with at least one of the guard/exit flags set.
    """

    address: int
    is_guard: bool
    is_exit: bool
    bandwidth: float
    nickname: str = ""

    @property
    def role(self) -> RelayRole:
        if self.is_guard and self.is_exit:
            return RelayRole.BOTH
        return RelayRole.GUARD if self.is_guard else RelayRole.EXIT


def load_relays(path) -> list[RelayDescriptor]:
    """Read a relay list CSV with header address,is_guard,is_exit,bandwidth,nickname."""
    relays = []
    with open(path, newline="") as handle:
        for row in csv.DictReader(handle):
            relays.append(
                RelayDescriptor(
                    address=ip_to_int(row["address"]),
                    is_guard=_parse_bool(row["is_guard"]),
                    is_exit=_parse_bool(row["is_exit"]),
                    bandwidth=float(row["bandwidth"]),
                    nickname=row.get("nickname", "") or "",
                )
            )
    return relays


def write_relays(path, relays: Iterable[RelayDescriptor]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["address", "is_guard", "is_exit", "bandwidth", "nickname"])
        for relay in relays:
            writer.writerow(
                [
                    int_to_ip(relay.address),
                    int(relay.is_guard),
                    int(relay.is_exit),
                    relay.bandwidth,
                    relay.nickname,
                ]
            )


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes"):
        return True
    if value in ("0", "false", "no", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class AsPath:
    """Ordered AS-level path, origin last.

    Consecutive repeats (prepend padding) are collapsed on construction:
    membership over ASes is what the analyses consume, so padding carries
    no information.
    """

    ases: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.ases:
            raise ValueError("empty AS path")
        collapsed = [self.ases[0]]
        for asn in self.ases[1:]:
            if asn != collapsed[-1]:
                collapsed.append(asn)
        object.__setattr__(self, "ases", tuple(collapsed))

    @classmethod
    def parse(cls, text: str) -> "AsPath":
        return cls(tuple(int(token) for token in text.split()))

    @property
    def origin(self) -> int:
        return self.ases[-1]

    def __contains__(self, asn: int) -> bool:
        return asn in self.ases

    def __iter__(self) -> Iterator[int]:
        return iter(self.ases)

    def __len__(self) -> int:
        return len(self.ases)

    def __str__(self) -> str:
        return " ".join(str(asn) for asn in self.ases)


@dataclass(frozen=True)
class VantageSession:
    """A BGP session acting as a stand-in for clients/destinations behind it."""

    session_id: str
    local_as: int


OPEN = None  # t_end sentinel for still-active route entries


@dataclass
class RouteEntry:
    """Interval during which a session forwarded a relay-hosting prefix
    via a given AS path. t_end is OPEN (None) while the entry is active."""

    t_start: float
    t_end: float | None
    prefix: IpPrefix
    relay_role: RelayRole
    path: AsPath

    def live_at(self, t: float) -> bool:
        return self.t_start <= t and (self.t_end is None or t < self.t_end)

    def clipped(self, t_lo: float, t_hi: float) -> tuple[float, float] | None:
        """Intersection with [t_lo, t_hi), or None if empty."""
        end = t_hi if self.t_end is None else min(self.t_end, t_hi)
        start = max(self.t_start, t_lo)
        return (start, end) if start < end else None


class PrefixTable:
    """Longest-prefix-match table with opaque payloads.

    Mutable while building; freeze() makes it immutable so it can be
    shared across concurrent readers. Lookup scans lengths from /32 down,
    so cost is bounded by 33 dict probes.
    """

    def __init__(self) -> None:
        self._entries: dict[IpPrefix, Any] = {}
        self._buckets: dict[int, dict[int, IpPrefix]] = {}
        self._frozen = False

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[tuple[IpPrefix, Any]]:
        for prefix in sorted(self._entries):
            yield prefix, self._entries[prefix]

    def __contains__(self, prefix: IpPrefix) -> bool:
        return prefix in self._entries

    def freeze(self) -> "PrefixTable":
        self._frozen = True
        return self

    def _check_mutable(self) -> None:
        if self._frozen:
            raise RuntimeError("PrefixTable is frozen")

    def insert(self, prefix: IpPrefix, payload: Any) -> None:
        self._check_mutable()
        self._entries[prefix] = payload
        self._buckets.setdefault(prefix.length, {})[prefix.base] = prefix

    def remove(self, prefix: IpPrefix) -> None:
        self._check_mutable()
        del self._entries[prefix]
        bucket = self._buckets[prefix.length]
        del bucket[prefix.base]
        if not bucket:
            del self._buckets[prefix.length]

    def get(self, prefix: IpPrefix, default: Any = None) -> Any:
        return self._entries.get(prefix, default)

    def lookup_entry(self, address: int) -> tuple[IpPrefix, Any] | None:
        """Most-specific entry covering address, or None."""
        for length in range(32, -1, -1):
            bucket = self._buckets.get(length)
            if bucket is None:
                continue
            masked = address & _mask(length)
            prefix = bucket.get(masked)
            if prefix is not None:
                return prefix, self._entries[prefix]
        return None

    def lookup(self, address: int) -> Any | None:
        found = self.lookup_entry(address)
        return None if found is None else found[1]


def most_specific_match(table: PrefixTable, address: int) -> Any | None:
    """Payload of the longest prefix covering address, or None."""
    return table.lookup(address)


def load_prefix_origins(path) -> PrefixTable:
    """Read a prefix,asn CSV into a PrefixTable keyed by origin AS number."""
    table = PrefixTable()
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header and header[0].strip().lower() != "prefix":
            # headerless file: first line was data
            table.insert(IpPrefix.parse(header[0]), int(header[1]))
        for row in reader:
            if not row or row[0].startswith("#"):
                continue
            table.insert(IpPrefix.parse(row[0]), int(row[1]))
    return table.freeze()


class RelayIndex:
    """Relays sorted by address for fast prefix-coverage queries."""

    def __init__(self, relays: Iterable[RelayDescriptor]) -> None:
        self.relays = sorted(relays, key=lambda r: r.address)
        self._addresses = [relay.address for relay in self.relays]

    def __len__(self) -> int:
        return len(self.relays)

    def covered_by(self, prefix: IpPrefix) -> list[RelayDescriptor]:
        lo = bisect_left(self._addresses, prefix.base)
        hi = bisect_right(self._addresses, prefix.last_address)
        return self.relays[lo:hi]

    def covers_any(self, prefix: IpPrefix) -> bool:
        lo = bisect_left(self._addresses, prefix.base)
        return lo < len(self._addresses) and self._addresses[lo] <= prefix.last_address

    def role_of_prefix(self, prefix: IpPrefix) -> RelayRole | None:
        """Combined role of the relays inside prefix, None if it covers none."""
        any_guard = any_exit = False
        for relay in self.covered_by(prefix):
            any_guard = any_guard or relay.is_guard
            any_exit = any_exit or relay.is_exit
        if any_guard and any_exit:
            return RelayRole.BOTH
        if any_guard:
            return RelayRole.GUARD
        if any_exit:
            return RelayRole.EXIT
        return None
