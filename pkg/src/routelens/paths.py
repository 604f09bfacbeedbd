"""Forward/reverse AS-path vulnerability from traceroute measurements.

Four path families describe a circuit: client to guard (P1), guard to
client (P2), exit to destination (P3), destination to exit (P4). A quad
is symmetric-vulnerable when P1 and P3 share an AS, and asymmetric-
vulnerable when any of the four forward/reverse combinations does, which
is what routing asymmetry buys the adversary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from itertools import product

from .core import IpPrefix, PrefixTable, ip_to_int


class PathError(Exception):
    pass


class EmptyPathError(PathError):
    pass


class MissingPathError(PathError):
    pass


class PathRole(Enum):
    P1_CLIENT_TO_GUARD = "P1"
    P2_GUARD_TO_CLIENT = "P2"
    P3_EXIT_TO_DEST = "P3"
    P4_DEST_TO_EXIT = "P4"


class VulnerabilityMode(Enum):
    SYMMETRIC = "symmetric"
    ASYMMETRIC = "asymmetric"


_PAIRINGS = {
    VulnerabilityMode.SYMMETRIC: (
        (PathRole.P1_CLIENT_TO_GUARD, PathRole.P3_EXIT_TO_DEST),
    ),
    VulnerabilityMode.ASYMMETRIC: (
        (PathRole.P1_CLIENT_TO_GUARD, PathRole.P3_EXIT_TO_DEST),
        (PathRole.P1_CLIENT_TO_GUARD, PathRole.P4_DEST_TO_EXIT),
        (PathRole.P2_GUARD_TO_CLIENT, PathRole.P3_EXIT_TO_DEST),
        (PathRole.P2_GUARD_TO_CLIENT, PathRole.P4_DEST_TO_EXIT),
    ),
}

_PRIVATE_BLOCKS = tuple(
    IpPrefix.parse(text)
    for text in ("10.0.0.0/8", "172.16.0.0/12", "192.168.0.0/16", "127.0.0.0/8", "169.254.0.0/16")
)


@dataclass(frozen=True)
class AsLevelPath:
    probe: str
    target: str
    role: PathRole
    day: str
    ases: tuple[int, ...]
    gap: bool  # True when some hop had no AS mapping

    @property
    def as_set(self) -> frozenset[int]:
        return frozenset(self.ases)


@dataclass(frozen=True)
class CircuitQuad:
    client: str
    guard: str
    exit: str
    dest: str


def resolve_traceroute(hops: list[str], mapping: PrefixTable) -> tuple[tuple[int, ...], bool]:
    """Map hop IPs to an AS-level path.

    Timeouts ("*") and unmapped hops are omitted and set the gap flag;
    private-address hops are omitted silently; duplicates are dropped
    keeping the first occurrence.
    """
    if not hops:
        raise EmptyPathError("traceroute produced no hops")
    ases: list[int] = []
    gap = False
    for hop in hops:
        if hop == "*":
            gap = True
            continue
        address = ip_to_int(hop)
        if any(block.covers(address) for block in _PRIVATE_BLOCKS):
            continue
        asn = mapping.lookup(address)
        if asn is None:
            gap = True
            continue
        if asn not in ases:
            ases.append(asn)
    return tuple(ases), gap


def load_traceroutes(path, mapping: PrefixTable) -> list[AsLevelPath]:
    """Read traceroute JSONL records {probe, target, role, day, hops}."""
    paths = []
    with open(path) as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            ases, gap = resolve_traceroute(record["hops"], mapping)
            paths.append(
                AsLevelPath(
                    probe=str(record["probe"]),
                    target=str(record["target"]),
                    role=PathRole(record["role"].upper()),
                    day=str(record["day"]),
                    ases=ases,
                    gap=gap,
                )
            )
    return paths


def vulnerable(
    paths: dict[PathRole, AsLevelPath],
    mode: VulnerabilityMode,
    exclusions: frozenset[int] = frozenset(),
) -> tuple[bool, frozenset[int]]:
    """Does any pairing of the quad's paths share an AS outside exclusions?

    Returns the verdict together with the witnessing ASes across all
    qualifying pairings.
    """
    witnesses: set[int] = set()
    for role_a, role_b in _PAIRINGS[mode]:
        if role_a not in paths or role_b not in paths:
            raise MissingPathError(f"missing {role_a.value} or {role_b.value}")
        shared = (paths[role_a].as_set & paths[role_b].as_set) - exclusions
        witnesses |= shared
    return bool(witnesses), frozenset(witnesses)


@dataclass
class DayVulnerability:
    day: str
    pct_symmetric_day1: float
    pct_asymmetric: float
    pct_asymmetric_cumulative: float
    n_quads: int
    n_inherited_paths: int


class PathDataset:
    """Daily path measurements indexed for quad evaluation, with
    persistence: a (role, probe, target) missing on a day inherits the
    most recent earlier measurement."""

    def __init__(self, paths: list[AsLevelPath]) -> None:
        self.days = sorted({p.day for p in paths})
        self._by_day: dict[str, dict[tuple[PathRole, str, str], AsLevelPath]] = {}
        for path in paths:
            self._by_day.setdefault(path.day, {})[(path.role, path.probe, path.target)] = path
        self.clients = sorted(
            {p.probe for p in paths if p.role is PathRole.P1_CLIENT_TO_GUARD}
            | {p.target for p in paths if p.role is PathRole.P2_GUARD_TO_CLIENT}
        )
        self.guards = sorted(
            {p.target for p in paths if p.role is PathRole.P1_CLIENT_TO_GUARD}
            | {p.probe for p in paths if p.role is PathRole.P2_GUARD_TO_CLIENT}
        )
        self.exits = sorted(
            {p.probe for p in paths if p.role is PathRole.P3_EXIT_TO_DEST}
            | {p.target for p in paths if p.role is PathRole.P4_DEST_TO_EXIT}
        )
        self.dests = sorted(
            {p.target for p in paths if p.role is PathRole.P3_EXIT_TO_DEST}
            | {p.probe for p in paths if p.role is PathRole.P4_DEST_TO_EXIT}
        )

    def quads(self) -> list[CircuitQuad]:
        return [
            CircuitQuad(c, g, e, d)
            for c, g, e, d in product(self.clients, self.guards, self.exits, self.dests)
        ]

    def paths_for(
        self, quad: CircuitQuad, day: str
    ) -> tuple[dict[PathRole, AsLevelPath], int]:
        """Quad's four paths on a day, inheriting earlier days when needed.

        Returns the role map plus how many paths were inherited. Roles
        never measured up to that day are simply absent.
        """
        wanted = {
            PathRole.P1_CLIENT_TO_GUARD: (quad.client, quad.guard),
            PathRole.P2_GUARD_TO_CLIENT: (quad.guard, quad.client),
            PathRole.P3_EXIT_TO_DEST: (quad.exit, quad.dest),
            PathRole.P4_DEST_TO_EXIT: (quad.dest, quad.exit),
        }
        found: dict[PathRole, AsLevelPath] = {}
        inherited = 0
        day_index = self.days.index(day)
        for role, (probe, target) in wanted.items():
            for back in range(day_index, -1, -1):
                candidate = self._by_day.get(self.days[back], {}).get((role, probe, target))
                if candidate is not None:
                    found[role] = candidate
                    if back != day_index:
                        inherited += 1
                    break
        return found, inherited


def vulnerability_timeseries(
    dataset: PathDataset,
    exclusions: frozenset[int] = frozenset(),
    exclude_endpoint_ases: bool = False,
) -> list[DayVulnerability]:
    """Per-day percentages of vulnerable quads.

    exclude_endpoint_ases additionally discounts each quad's own endpoint
    ASes (off by default: endpoints trivially sit on their own paths, but
    the conventional count keeps them).

    Three series: the day-1 symmetric rate held fixed (the conventional
    viewpoint), the same-day asymmetric rate, and the cumulative
    asymmetric rate counting a quad from the first day it was ever
    vulnerable. All percentages are over the full quad set; quads missing
    a required path even after persistence count as not vulnerable that
    day (n_quads reports how many were actually evaluable). The fixed
    denominator is what makes the cumulative series both monotone and
    pointwise at or above the per-day series.
    """
    quads = dataset.quads()
    if not quads:
        return []
    ever_vulnerable: set[CircuitQuad] = set()
    rows: list[DayVulnerability] = []
    sym_day1 = 0.0
    for day_index, day in enumerate(dataset.days):
        n_sym = n_asym = n_eval = inherited_total = 0
        for quad in quads:
            paths, inherited = dataset.paths_for(quad, day)
            if len(paths) < 4:
                continue
            n_eval += 1
            inherited_total += inherited
            quad_exclusions = exclusions
            if exclude_endpoint_ases:
                quad_exclusions = exclusions | endpoint_ases(paths)
            asym, _ = vulnerable(paths, VulnerabilityMode.ASYMMETRIC, quad_exclusions)
            if asym:
                n_asym += 1
                ever_vulnerable.add(quad)
            if day_index == 0:
                sym, _ = vulnerable(paths, VulnerabilityMode.SYMMETRIC, quad_exclusions)
                n_sym += sym
        if day_index == 0:
            sym_day1 = 100.0 * n_sym / len(quads)
        rows.append(
            DayVulnerability(
                day=day,
                pct_symmetric_day1=sym_day1,
                pct_asymmetric=100.0 * n_asym / len(quads),
                pct_asymmetric_cumulative=100.0 * len(ever_vulnerable) / len(quads),
                n_quads=n_eval,
                n_inherited_paths=inherited_total,
            )
        )
    return rows


def endpoint_ases(paths: dict[PathRole, AsLevelPath]) -> frozenset[int]:
    """The quad's own endpoint ASes: first hop AS of each path that
    originates at an endpoint. Useful as an exclusion set, since endpoints
    trivially appear on their own paths."""
    out = set()
    for path in paths.values():
        if path.ases:
            out.add(path.ases[0])
    return frozenset(out)
