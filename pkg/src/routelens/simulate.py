"""Seeded generators producing ground-truth datasets for every analysis.

Traffic generation synthesizes one byte process per client/server pair
(base rate x per-second jitter, shaped by shared-bottleneck water
filling) and renders it as TCP header observations at both vantages:
sequence progression on the data direction, delayed coalesced cumulative
acknowledgments on the reverse. Routing generation renders a declared
per-session path timeline, plus injected hijacks and more-specific
interceptions, as an update stream. Identical seeds give byte-identical
output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .bgp import BgpUpdate, UpdateKind
from .core import AsPath, IpPrefix, RelayDescriptor, int_to_ip, ip_to_int
from .correlation import Direction, EndpointTrace, PacketObservation

TICK = 0.01  # packet emission granularity; analyses bin at >= 1 s


class InvalidScenarioError(Exception):
    pass


# --- traffic ------------------------------------------------------------------


@dataclass(frozen=True)
class Bottleneck:
    flows: tuple[int, ...]
    capacity: float  # bytes/s shared by the member flows


@dataclass(frozen=True)
class TrafficScenario:
    seed: int = 0
    n_pairs: int = 50
    duration: float = 300.0
    base_rate: float = 20_000.0  # bytes/s before per-flow spread
    rate_spread: float = 4.0  # per-flow factor log-uniform in [1/spread, spread]
    jitter_low: float = 0.5  # per-second multiplicative jitter bounds
    jitter_high: float = 2.0
    ack_delay: float = 0.05  # data-to-ack delay at the acknowledging side
    mss: int = 1460
    tunnel_delay: float = 0.25  # one-way transit through the tunnel
    tunnel_jitter: float = 0.08  # per-packet uniform extra delay
    retransmit_rate: float = 0.0  # fraction of data packets duplicated
    guard_groups: tuple[Bottleneck, ...] = ()
    exit_groups: tuple[Bottleneck, ...] = ()

    def validate(self) -> None:
        if self.n_pairs < 1 or self.duration <= 0 or self.base_rate <= 0:
            raise InvalidScenarioError("need n_pairs >= 1, positive duration and rate")
        if self.mss < 1:
            raise InvalidScenarioError("mss must be at least 1 byte")
        if not 0 < self.jitter_low <= self.jitter_high:
            raise InvalidScenarioError("jitter bounds must satisfy 0 < low <= high")
        if self.rate_spread < 1.0:
            raise InvalidScenarioError("rate_spread must be >= 1")
        if not 0.0 <= self.retransmit_rate < 1.0:
            raise InvalidScenarioError("retransmit_rate must be in [0, 1)")
        for side in (self.guard_groups, self.exit_groups):
            seen: set[int] = set()
            for group in side:
                if group.capacity <= 0:
                    raise InvalidScenarioError("bottleneck capacity must be positive")
                for flow in group.flows:
                    if not 0 <= flow < self.n_pairs:
                        raise InvalidScenarioError(f"flow {flow} out of range")
                    if flow in seen:
                        raise InvalidScenarioError(
                            f"flow {flow} is in two {('guard', 'exit')[side is self.exit_groups]} groups"
                        )
                    seen.add(flow)

    def to_dict(self) -> dict:
        return {
            "kind": "traffic",
            "seed": self.seed,
            "n_pairs": self.n_pairs,
            "duration": self.duration,
            "base_rate": self.base_rate,
            "rate_spread": self.rate_spread,
            "jitter_low": self.jitter_low,
            "jitter_high": self.jitter_high,
            "ack_delay": self.ack_delay,
            "mss": self.mss,
            "tunnel_delay": self.tunnel_delay,
            "tunnel_jitter": self.tunnel_jitter,
            "retransmit_rate": self.retransmit_rate,
            "guard_groups": [[list(g.flows), g.capacity] for g in self.guard_groups],
            "exit_groups": [[list(g.flows), g.capacity] for g in self.exit_groups],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrafficScenario":
        groups = {
            side: tuple(
                Bottleneck(tuple(int(f) for f in flows), float(capacity))
                for flows, capacity in data.get(side, ())
            )
            for side in ("guard_groups", "exit_groups")
        }
        kwargs = {
            key: data[key]
            for key in (
                "seed",
                "n_pairs",
                "duration",
                "base_rate",
                "rate_spread",
                "jitter_low",
                "jitter_high",
                "ack_delay",
                "mss",
                "tunnel_delay",
                "tunnel_jitter",
                "retransmit_rate",
            )
            if key in data
        }
        return cls(**kwargs, **groups)


@dataclass
class GroundTruth:
    """True client-to-server pairing of a generated traffic dataset."""

    pairing: dict[str, str]

    def to_dict(self) -> dict:
        return {"pairing": self.pairing}

    @classmethod
    def from_dict(cls, data: dict) -> "GroundTruth":
        return cls(pairing=dict(data["pairing"]))


def _waterfill(desired: np.ndarray, capacity_per_tick: float) -> np.ndarray:
    """Max-min fair allocation per tick: columns of desired share the
    capacity, each flow getting min(desired, level) with the level chosen
    to exhaust the capacity whenever demand exceeds it. This is what a
    shared relay bottleneck does to competing TCP flows: it equalizes
    them, destroying the rate diversity the matcher feeds on."""
    m, _ = desired.shape
    ordered = np.sort(desired, axis=0)
    served = np.vstack([np.zeros(desired.shape[1]), np.cumsum(ordered, axis=0)])
    over = served[-1] > capacity_per_tick
    level = np.full(desired.shape[1], np.inf)
    if np.any(over):
        # level candidates after fully serving the k smallest flows
        with np.errstate(divide="ignore", invalid="ignore"):
            candidates = (capacity_per_tick - served[:-1]) / (
                m - np.arange(m)[:, None]
            )
        lower = np.vstack([np.zeros(desired.shape[1]), ordered[:-1]])
        valid = (candidates >= lower - 1e-12) & (candidates <= ordered + 1e-12)
        pick = np.argmax(valid, axis=0)
        level_over = candidates[pick, np.arange(desired.shape[1])]
        level = np.where(over, level_over, level)
    return np.minimum(desired, level)


def _byte_allocation(scenario: TrafficScenario, rng: np.random.Generator) -> np.ndarray:
    """Realized bytes per flow per tick after jitter and bottlenecks."""
    n = scenario.n_pairs
    n_secs = math.ceil(scenario.duration)
    n_ticks = int(round(scenario.duration / TICK))
    spread = math.log(scenario.rate_spread)
    flow_rate = scenario.base_rate * np.exp(rng.uniform(-spread, spread, size=n))
    jitter = np.exp(
        rng.uniform(
            math.log(scenario.jitter_low),
            math.log(scenario.jitter_high),
            size=(n, n_secs),
        )
    )
    per_tick = np.repeat(flow_rate[:, None] * jitter, int(round(1 / TICK)), axis=1)
    per_tick = per_tick[:, :n_ticks] * TICK
    for group in scenario.guard_groups + scenario.exit_groups:
        members = list(group.flows)
        per_tick[members] = _waterfill(per_tick[members], group.capacity * TICK)
    return per_tick


@dataclass
class _FlowRender:
    """One pair's observations at both vantages (upload direction)."""

    client_obs: list[PacketObservation]
    server_obs: list[PacketObservation]
    total_bytes: int


def _render_flow(
    allocation: np.ndarray, scenario: TrafficScenario, rng: np.random.Generator
) -> _FlowRender:
    mss = scenario.mss
    cum = np.cumsum(allocation)
    total = int(cum[-1])
    n_chunks = total // mss
    remainder = total - n_chunks * mss
    isn_client = int(rng.integers(0, 2**32))
    isn_server = int(rng.integers(0, 2**32))

    targets = mss * np.arange(1, n_chunks + 1, dtype=np.float64)
    ticks = np.searchsorted(cum, targets, side="left")
    times = TICK * (ticks + 1)
    offsets = mss * np.arange(n_chunks, dtype=np.int64)
    payloads = np.full(n_chunks, mss, dtype=np.int64)
    if remainder > 0:
        times = np.append(times, scenario.duration)
        offsets = np.append(offsets, mss * n_chunks)
        payloads = np.append(payloads, remainder)

    if scenario.retransmit_rate > 0 and len(times):
        dup = rng.random(len(times)) < scenario.retransmit_rate
        times = np.concatenate([times, times[dup] + 0.2])
        offsets = np.concatenate([offsets, offsets[dup]])
        payloads = np.concatenate([payloads, payloads[dup]])
        order = np.argsort(times, kind="mergesort")
        times, offsets, payloads = times[order], offsets[order], payloads[order]

    client_obs = [
        PacketObservation(
            ts=float(t),
            direction=Direction.TO_RELAY,
            seq=int((isn_client + off) % 2**32),
            ack=0,
            payload_len=int(pl),
        )
        for t, off, pl in zip(times, offsets, payloads)
    ]

    # cumulative acks of the client's bytes, observed back at the client
    acked = np.maximum.accumulate(offsets + payloads)
    ack_idx = list(range(1, len(times), 2))
    if len(times) and (not ack_idx or ack_idx[-1] != len(times) - 1):
        ack_idx.append(len(times) - 1)
    client_obs.append(
        PacketObservation(0.0, Direction.FROM_RELAY, 0, isn_client % 2**32, 0)
    )
    for i in ack_idx:
        client_obs.append(
            PacketObservation(
                ts=float(times[i] + scenario.ack_delay),
                direction=Direction.FROM_RELAY,
                seq=0,
                ack=int((isn_client + acked[i]) % 2**32),
                payload_len=0,
            )
        )
    client_obs.sort(key=lambda o: o.ts)

    # the same bytes arrive at the server vantage after the tunnel
    arrivals = times + scenario.tunnel_delay + rng.uniform(
        0, scenario.tunnel_jitter, size=len(times)
    )
    order = np.argsort(arrivals, kind="mergesort")
    arrivals, s_offsets, s_payloads = arrivals[order], offsets[order], payloads[order]
    server_obs = [
        PacketObservation(
            ts=float(t),
            direction=Direction.TO_SERVER,
            seq=int((isn_server + off) % 2**32),
            ack=0,
            payload_len=int(pl),
        )
        for t, off, pl in zip(arrivals, s_offsets, s_payloads)
    ]
    s_acked = np.maximum.accumulate(s_offsets + s_payloads)
    s_idx = list(range(1, len(arrivals), 2))
    if len(arrivals) and (not s_idx or s_idx[-1] != len(arrivals) - 1):
        s_idx.append(len(arrivals) - 1)
    server_obs.append(
        PacketObservation(
            float(scenario.tunnel_delay), Direction.FROM_SERVER, 0, isn_server % 2**32, 0
        )
    )
    for i in s_idx:
        server_obs.append(
            PacketObservation(
                ts=float(arrivals[i] + scenario.ack_delay),
                direction=Direction.FROM_SERVER,
                seq=0,
                ack=int((isn_server + s_acked[i]) % 2**32),
                payload_len=0,
            )
        )
    server_obs.sort(key=lambda o: o.ts)
    return _FlowRender(client_obs, server_obs, total)


def gen_traffic(
    scenario: TrafficScenario,
) -> tuple[list[EndpointTrace], list[EndpointTrace], GroundTruth]:
    """Endpoint traces for n_pairs simultaneous transfers plus the truth.

    Client i uploads through the tunnel to the server assigned by a seeded
    permutation; both vantages describe the same byte process with
    independent initial sequence numbers, so unwrapping gets exercised.
    """
    scenario.validate()
    rng = np.random.default_rng(scenario.seed)
    allocation = _byte_allocation(scenario, rng)
    perm = rng.permutation(scenario.n_pairs)
    clients: list[EndpointTrace] = []
    servers: list[EndpointTrace | None] = [None] * scenario.n_pairs
    pairing: dict[str, str] = {}
    for i in range(scenario.n_pairs):
        render = _render_flow(allocation[i], scenario, rng)
        client_id = f"client-{i:02d}"
        server_id = f"server-{perm[i]:02d}"
        pairing[client_id] = server_id
        clients.append(
            EndpointTrace(client_id, (f"10.50.{i}.2:443", "10.99.0.1:9001"), render.client_obs)
        )
        servers[perm[i]] = EndpointTrace(
            server_id, ("10.99.0.2:35000", f"10.60.{perm[i]}.2:80"), render.server_obs
        )
    return clients, [s for s in servers if s is not None], GroundTruth(pairing)


# --- routing ------------------------------------------------------------------


@dataclass(frozen=True)
class SessionSpec:
    session_id: str
    local_as: int


@dataclass(frozen=True)
class RouteSpec:
    session: str
    prefix: str
    path: tuple[int, ...]


@dataclass(frozen=True)
class ChurnEvent:
    time: float
    session: str
    prefix: str
    path: tuple[int, ...] | None  # None withdraws


@dataclass(frozen=True)
class InjectedEvent:
    kind: str  # "hijack" or "interception"
    prefix: str
    attacker_path: tuple[int, ...]
    start: float
    duration: float

    def __post_init__(self) -> None:
        if self.kind not in ("hijack", "interception"):
            raise InvalidScenarioError(f"unknown event kind {self.kind!r}")

    @property
    def origin(self) -> int:
        return self.attacker_path[-1]

    @property
    def window(self) -> tuple[float, float]:
        return (self.start, self.start + self.duration)


@dataclass(frozen=True)
class RoutingScenario:
    seed: int
    window: tuple[float, float]
    sessions: tuple[SessionSpec, ...]
    relays: tuple[RelayDescriptor, ...]
    base_routes: tuple[RouteSpec, ...]
    churn: tuple[ChurnEvent, ...] = ()
    events: tuple[InjectedEvent, ...] = ()

    def validate(self) -> None:
        t0, t1 = self.window
        if t1 <= t0:
            raise InvalidScenarioError("empty window")
        ids = {s.session_id for s in self.sessions}
        if len(ids) != len(self.sessions):
            raise InvalidScenarioError("duplicate session ids")
        for route in self.base_routes + tuple(
            c for c in self.churn if c.path is not None
        ):
            if route.session not in ids:
                raise InvalidScenarioError(f"unknown session {route.session}")
        times = [c.time for c in self.churn]
        if times != sorted(times):
            raise InvalidScenarioError("churn schedule must be time-ordered")
        for event in self.events:
            if not (t0 <= event.start and event.start + event.duration <= t1):
                raise InvalidScenarioError("event outside the window")
            for change in self.churn:
                if change.prefix == event.prefix and (
                    event.start <= change.time <= event.start + event.duration
                ):
                    raise InvalidScenarioError(
                        "churn on an attacked prefix during its event window"
                    )
        spans: dict[str, list[tuple[float, float]]] = {}
        for event in self.events:
            for other in spans.get(event.prefix, ()):
                if event.start < other[1] and other[0] < event.start + event.duration:
                    raise InvalidScenarioError("overlapping events on one prefix")
            spans.setdefault(event.prefix, []).append(event.window)

    def to_dict(self) -> dict:
        return {
            "kind": "routing",
            "seed": self.seed,
            "window": list(self.window),
            "sessions": [[s.session_id, s.local_as] for s in self.sessions],
            "relays": [
                [int_to_ip(r.address), int(r.is_guard), int(r.is_exit), r.bandwidth, r.nickname]
                for r in self.relays
            ],
            "base_routes": [[r.session, r.prefix, list(r.path)] for r in self.base_routes],
            "churn": [
                [c.time, c.session, c.prefix, None if c.path is None else list(c.path)]
                for c in self.churn
            ],
            "events": [
                [e.kind, e.prefix, list(e.attacker_path), e.start, e.duration]
                for e in self.events
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RoutingScenario":
        return cls(
            seed=int(data["seed"]),
            window=(float(data["window"][0]), float(data["window"][1])),
            sessions=tuple(SessionSpec(s, int(a)) for s, a in data["sessions"]),
            relays=tuple(
                RelayDescriptor(ip_to_int(addr), bool(g), bool(e), float(bw), name)
                for addr, g, e, bw, name in data["relays"]
            ),
            base_routes=tuple(
                RouteSpec(s, p, tuple(int(a) for a in path))
                for s, p, path in data["base_routes"]
            ),
            churn=tuple(
                ChurnEvent(float(t), s, p, None if path is None else tuple(int(a) for a in path))
                for t, s, p, path in data.get("churn", ())
            ),
            events=tuple(
                InjectedEvent(k, p, tuple(int(a) for a in path), float(start), float(dur))
                for k, p, path, start, dur in data.get("events", ())
            ),
        )


@dataclass
class RoutingGroundTruth:
    events: list[InjectedEvent]

    def to_dict(self) -> dict:
        return {
            "events": [
                {
                    "kind": e.kind,
                    "prefix": e.prefix,
                    "origin": e.origin,
                    "t_start": e.start,
                    "t_end": e.start + e.duration,
                }
                for e in self.events
            ]
        }


def _legit_timeline(
    scenario: RoutingScenario,
) -> dict[tuple[str, str], list[tuple[float, tuple[int, ...] | None]]]:
    """Per (session, prefix): time-ordered (since, path) changes, events
    excluded. A None path means withdrawn from that time on."""
    timeline: dict[tuple[str, str], list[tuple[float, tuple[int, ...] | None]]] = {}
    t0 = scenario.window[0]
    for route in scenario.base_routes:
        timeline.setdefault((route.session, route.prefix), []).append((t0, route.path))
    for change in scenario.churn:
        timeline.setdefault((change.session, change.prefix), []).append(
            (change.time, change.path)
        )
    for changes in timeline.values():
        changes.sort(key=lambda item: item[0])
    return timeline


def _legit_path_at(
    timeline, session: str, prefix: str, t: float
) -> tuple[int, ...] | None:
    current = None
    for since, path in timeline.get((session, prefix), ()):
        if since <= t:
            current = path
        else:
            break
    return current


def gen_updates(scenario: RoutingScenario) -> tuple[list[BgpUpdate], RoutingGroundTruth]:
    """Render the scenario as a per-session update stream.

    Hijacks announce the exact victim prefix from the attacker's origin on
    every session and restore the legitimate path after the event;
    interceptions announce a more-specific prefix and withdraw it. The
    declared schedule is the ground truth, so detector recall can be
    scored exactly.
    """
    scenario.validate()
    timeline = _legit_timeline(scenario)
    t0, _ = scenario.window
    updates: list[BgpUpdate] = []

    def emit(ts, session, prefix, path):
        if path is None:
            updates.append(
                BgpUpdate(ts, session, UpdateKind.WITHDRAW, IpPrefix.parse(prefix), None)
            )
        else:
            updates.append(
                BgpUpdate(
                    ts, session, UpdateKind.ANNOUNCE, IpPrefix.parse(prefix), AsPath(path)
                )
            )

    for route in sorted(scenario.base_routes, key=lambda r: (r.session, r.prefix)):
        emit(t0, route.session, route.prefix, route.path)
    for change in scenario.churn:
        emit(change.time, change.session, change.prefix, change.path)
    session_ids = sorted(s.session_id for s in scenario.sessions)
    for event in scenario.events:
        end = event.start + event.duration
        for session in session_ids:
            emit(event.start, session, event.prefix, event.attacker_path)
            if event.kind == "hijack":
                emit(end, session, event.prefix, _legit_path_at(timeline, session, event.prefix, end))
            else:
                emit(end, session, event.prefix, None)
    updates.sort(key=lambda u: (u.timestamp, u.session, u.prefix))
    return updates, RoutingGroundTruth(list(scenario.events))


def _effective_paths_at(
    scenario: RoutingScenario, timeline, session: str, t: float
) -> dict[str, tuple[int, ...]]:
    """Live (prefix -> path) on a session at time t, events included."""
    live: dict[str, tuple[int, ...]] = {}
    prefixes = {prefix for (sid, prefix) in timeline if sid == session}
    for prefix in prefixes:
        path = _legit_path_at(timeline, session, prefix, t)
        if path is not None:
            live[prefix] = path
    for event in scenario.events:
        start, end = event.window
        if start <= t < end:
            live[event.prefix] = event.attacker_path
    return live


def planted_compromised(
    scenario: RoutingScenario,
    min_overlap: float = 30.0,
    require_distinct_as: bool = True,
) -> set[tuple[int, str, int, str, int]]:
    """(AS, src, guard, dst, exit) keys compromised by construction.

    Walks the declared timeline second by second without touching the
    update emission or RIB machinery, so it is an independent check of the
    whole ingest-plus-analysis pipeline on small scenarios.
    """
    timeline = _legit_timeline(scenario)
    t0, t1 = scenario.window
    local = {s.session_id: s.local_as for s in scenario.sessions}
    admitted = [r for r in scenario.relays if r.is_guard or r.is_exit]
    counts: dict[tuple[int, str, int, str, int], int] = {}
    sessions = sorted(local)
    for t in range(int(t0), int(t1)):
        on_path: dict[tuple[str, int], set[int]] = {}
        for session in sessions:
            live = _effective_paths_at(scenario, timeline, session, float(t))
            parsed = [(IpPrefix.parse(p), path) for p, path in live.items()]
            for relay in admitted:
                covering = [
                    (prefix, path) for prefix, path in parsed if prefix.covers(relay.address)
                ]
                if covering:
                    best = max(covering, key=lambda item: item[0].length)
                    on_path[(session, relay.address)] = set(AsPath(best[1]).ases)
                else:
                    on_path[(session, relay.address)] = set()
        for src in sessions:
            for dst in sessions:
                if src == dst or (require_distinct_as and local[src] == local[dst]):
                    continue
                for guard in admitted:
                    if not guard.is_guard:
                        continue
                    g_ases = on_path[(src, guard.address)]
                    if not g_ases:
                        continue
                    for exit_ in admitted:
                        if not exit_.is_exit or exit_.address == guard.address:
                            continue
                        for asn in g_ases & on_path[(dst, exit_.address)]:
                            key = (asn, src, guard.address, dst, exit_.address)
                            counts[key] = counts.get(key, 0) + 1
    return {key for key, seconds in counts.items() if seconds > 0 and seconds >= min_overlap}


def random_routing_scenario(
    seed: int,
    n_sessions: int = 3,
    n_relays: int = 6,
    n_ases: int = 5,
    n_churn: int = 10,
    window: tuple[float, float] = (0.0, 60.0),
) -> RoutingScenario:
    """Small random scenario for property suites; integer change times."""
    rng = np.random.default_rng(seed)
    relays = []
    for i in range(n_relays):
        role = rng.integers(0, 3)
        relays.append(
            RelayDescriptor(
                address=ip_to_int(f"10.{i}.0.{int(rng.integers(1, 250))}"),
                is_guard=role in (0, 2),
                is_exit=role in (1, 2),
                bandwidth=float(rng.integers(1, 100)),
                nickname=f"r{i}",
            )
        )
    prefixes = [f"10.{i}.0.0/16" for i in range(n_relays)] + ["10.0.0.0/8"]
    sessions = tuple(
        SessionSpec(f"s{k}", 64500 + int(rng.integers(0, 3))) for k in range(n_sessions)
    )
    as_pool = list(range(101, 101 + n_ases))

    def random_path():
        length = int(rng.integers(1, 4))
        return tuple(int(rng.choice(as_pool)) for _ in range(length))

    base = []
    for spec in sessions:
        for prefix in rng.choice(prefixes, size=min(3, len(prefixes)), replace=False):
            base.append(RouteSpec(spec.session_id, str(prefix), random_path()))
    churn = []
    times = sorted(int(rng.integers(1, int(window[1]) - 1)) for _ in range(n_churn))
    for t in times:
        spec = sessions[int(rng.integers(0, n_sessions))]
        prefix = str(rng.choice(prefixes))
        if rng.random() < 0.25:
            churn.append(ChurnEvent(float(t), spec.session_id, prefix, None))
        else:
            churn.append(ChurnEvent(float(t), spec.session_id, prefix, random_path()))
    return RoutingScenario(
        seed=seed,
        window=window,
        sessions=sessions,
        relays=tuple(relays),
        base_routes=tuple(base),
        churn=tuple(churn),
    )


def injection_scenario(
    seed: int = 0, n_hijacks: int = 20, n_interceptions: int = 5
) -> RoutingScenario:
    """Clean 24 h background with planted attacks, for detector scoring.

    Background routes live at least ~5000 s (far above the 1% lifetime
    threshold) and keep their origins through churn, so a correct detector
    alerts on exactly the planted events: short-lived foreign-origin
    exact-prefix hijacks and foreign-origin more-specific interceptions.
    """
    rng = np.random.default_rng(seed)
    window = (0.0, 86400.0)
    n_prefixes = 60
    relays = []
    for i in range(n_prefixes):
        role = i % 3
        relays.append(
            RelayDescriptor(
                address=ip_to_int(f"10.{i}.0.{int(rng.integers(2, 200))}"),
                is_guard=role in (0, 2),
                is_exit=role in (1, 2),
                bandwidth=float(rng.integers(1, 50)),
                nickname=f"r{i}",
            )
        )
    sessions = tuple(SessionSpec(f"s{k}", 64500 + k) for k in range(3))
    base = tuple(
        RouteSpec(spec.session_id, f"10.{i}.0.0/16", (64000 + k, 65000 + i))
        for k, spec in enumerate(sessions)
        for i in range(n_prefixes)
    )
    indices = rng.permutation(n_prefixes)[: n_hijacks + n_interceptions]
    events = []
    for j, i in enumerate(int(v) for v in indices):
        start = float(rng.integers(10_000, 70_000))
        duration = float(rng.integers(60, 600))
        attacker = (64_999, 66_600 + j)
        if j < n_hijacks:
            events.append(
                InjectedEvent("hijack", f"10.{i}.0.0/16", attacker, start, duration)
            )
        else:
            events.append(
                InjectedEvent("interception", f"10.{i}.0.0/17", attacker, start, duration)
            )
    quiet = sorted(set(range(n_prefixes)) - {int(v) for v in indices})
    churn = []
    for i in (int(v) for v in rng.permutation(quiet)[: min(20, len(quiet))]):
        k = int(rng.integers(0, len(sessions)))
        churn.append(
            ChurnEvent(
                float(rng.integers(5_000, 80_000)),
                sessions[k].session_id,
                f"10.{i}.0.0/16",
                (64000 + k, 64_100 + int(rng.integers(0, 50)), 65_000 + i),
            )
        )
    churn.sort(key=lambda c: c.time)
    return RoutingScenario(
        seed=seed,
        window=window,
        sessions=sessions,
        relays=tuple(relays),
        base_routes=base,
        churn=tuple(churn),
        events=tuple(events),
    )


# --- traceroute path meshes -----------------------------------------------------


@dataclass(frozen=True)
class PathScenario:
    """Daily forward/reverse AS-path mesh across four probe sets.

    Every path gets endpoint ASes plus at most one AS from a shared
    transit pool; reverse paths reuse the forward transit with probability
    reverse_reuse (routing is mostly, not fully, symmetric). Each
    client-guard and exit-dest unit re-rolls its transits with probability
    churn_rate per day. Defaults are calibrated so the day-one symmetric
    and asymmetric vulnerable-quad rates land near 12.8% and 21.3%.
    """

    seed: int = 0
    days: int = 21
    n_clients: int = 10
    n_guards: int = 25
    n_exits: int = 25
    n_dests: int = 10
    transit_pool: int = 4
    p_transit: float = 0.7155
    reverse_reuse: float = 0.6
    churn_rate: float = 0.02


def gen_traceroute_paths(scenario: PathScenario) -> list:
    """AS-level paths per (role, endpoints, day), ready for PathDataset."""
    from .paths import AsLevelPath, PathRole

    rng = np.random.default_rng(scenario.seed)
    transits = [900 + i for i in range(scenario.transit_pool)]

    def draw_transit():
        return int(rng.choice(transits)) if rng.random() < scenario.p_transit else None

    def draw_unit():
        forward = draw_transit()
        reverse = forward if rng.random() < scenario.reverse_reuse else draw_transit()
        return forward, reverse

    units: dict[tuple[str, str], tuple] = {}
    for c in range(scenario.n_clients):
        for g in range(scenario.n_guards):
            units[(f"c{c}", f"g{g}")] = draw_unit()
    for e in range(scenario.n_exits):
        for d in range(scenario.n_dests):
            units[(f"e{e}", f"d{d}")] = draw_unit()

    endpoint_as = {}
    for kind, base, count in (
        ("c", 100, scenario.n_clients),
        ("g", 200, scenario.n_guards),
        ("e", 300, scenario.n_exits),
        ("d", 400, scenario.n_dests),
    ):
        for i in range(count):
            endpoint_as[f"{kind}{i}"] = base + i

    paths = []
    for day_index in range(scenario.days):
        day = f"d{day_index + 1:02d}"
        if day_index > 0:
            for key in sorted(units):
                if rng.random() < scenario.churn_rate:
                    units[key] = draw_unit()
        for (src, dst), (forward, reverse) in sorted(units.items()):
            role_fwd = (
                PathRole.P1_CLIENT_TO_GUARD if src.startswith("c") else PathRole.P3_EXIT_TO_DEST
            )
            role_rev = (
                PathRole.P2_GUARD_TO_CLIENT if src.startswith("c") else PathRole.P4_DEST_TO_EXIT
            )
            fwd_ases = [endpoint_as[src]] + ([forward] if forward is not None else []) + [endpoint_as[dst]]
            rev_ases = [endpoint_as[dst]] + ([reverse] if reverse is not None else []) + [endpoint_as[src]]
            paths.append(AsLevelPath(src, dst, role_fwd, day, tuple(fwd_ases), False))
            paths.append(AsLevelPath(dst, src, role_rev, day, tuple(rev_ases), False))
    return paths


# --- interception timeline -------------------------------------------------------


@dataclass
class InterceptionRun:
    """Output of one interception experiment (download direction).

    attacker_traces hold only the client acknowledgment packets that fell
    inside the capture interval, on the raw clock; capture[0] is the
    adjusted-clock origin. seconds/good_acks/attacker_acks give the
    per-second ack-packet counts flowing via each tunnel.
    """

    attacker_traces: list[EndpointTrace]
    server_traces: list[EndpointTrace]
    truth: GroundTruth
    capture: tuple[float, float]
    seconds: np.ndarray
    good_acks: np.ndarray
    attacker_acks: np.ndarray


def gen_interception_timeline(
    scenario: TrafficScenario,
    announce_at: float = 20.0,
    propagation: float = 35.0,
    withdraw_at: float = 300.0,
    reconvergence: float = 22.0,
) -> InterceptionRun:
    """More-specific interception against the guard prefix.

    Traffic flows the whole run (interception keeps connections alive);
    client-to-guard ack packets ride the good tunnel until the attacker's
    announcement propagates, then the attacker's tunnel until reconvergence
    after the withdrawal. The attacker capture is ACK-only by construction:
    that is all that flows toward a guard during a download.
    """
    if announce_at + propagation >= withdraw_at:
        raise InvalidScenarioError("interception must settle before the withdrawal")
    scenario.validate()
    rng = np.random.default_rng(scenario.seed)
    allocation = _byte_allocation(scenario, rng)
    perm = rng.permutation(scenario.n_pairs)
    switch_on = announce_at + propagation
    switch_off = min(withdraw_at + reconvergence, scenario.duration)

    attacker_traces: list[EndpointTrace] = []
    server_traces: list[EndpointTrace | None] = [None] * scenario.n_pairs
    pairing: dict[str, str] = {}
    n_secs = math.ceil(scenario.duration)
    good = np.zeros(n_secs, dtype=np.int64)
    captured = np.zeros(n_secs, dtype=np.int64)
    for i in range(scenario.n_pairs):
        render = _render_flow(allocation[i], scenario, rng)
        client_id = f"client-{i:02d}"
        server_id = f"server-{perm[i]:02d}"
        pairing[client_id] = server_id
        # download direction: the server-side render is reused as-is, and
        # the client's acks toward the guard are the FROM_RELAY stream of
        # the upload render reinterpreted (same cumulative process).
        acks = [o for o in render.client_obs if o.direction is Direction.FROM_RELAY]
        kept = []
        for obs in acks:
            second = min(int(obs.ts), n_secs - 1)
            if switch_on <= obs.ts < switch_off:
                captured[second] += 1
                kept.append(
                    PacketObservation(obs.ts, Direction.TO_RELAY, obs.seq, obs.ack, 0)
                )
            else:
                good[second] += 1
        attacker_traces.append(
            EndpointTrace(client_id, (f"10.50.{i}.2:443", "10.99.0.1:9001"), kept)
        )
        server_traces[perm[i]] = EndpointTrace(
            server_id, ("10.99.0.2:35000", f"10.60.{perm[i]}.2:80"), render.server_obs
        )
    return InterceptionRun(
        attacker_traces=attacker_traces,
        server_traces=[s for s in server_traces if s is not None],
        truth=GroundTruth(pairing),
        capture=(switch_on, switch_off),
        seconds=np.arange(n_secs, dtype=np.float64),
        good_acks=good,
        attacker_acks=captured,
    )


# --- scenario file handling -------------------------------------------------------


def load_scenario(path):
    """Read a scenario JSON document; the kind field picks the type."""
    with open(path) as handle:
        data = json.load(handle)
    kind = data.get("kind", "traffic")
    if kind == "traffic":
        return TrafficScenario.from_dict(data)
    if kind == "routing":
        return RoutingScenario.from_dict(data)
    if kind == "interception":
        timing = data.get("timing", {})
        return (
            TrafficScenario.from_dict({**data, "kind": "traffic"}),
            {
                "announce_at": float(timing.get("announce_at", 20.0)),
                "propagation": float(timing.get("propagation", 35.0)),
                "withdraw_at": float(timing.get("withdraw_at", 300.0)),
                "reconvergence": float(timing.get("reconvergence", 22.0)),
            },
        )
    raise InvalidScenarioError(f"unknown scenario kind {kind!r}")


def shared_guard_variant(scenario: TrafficScenario, capacity_fraction: float = 0.35) -> TrafficScenario:
    """Same scenario with every flow squeezed through one guard bottleneck.

    Capacity is the given fraction of the aggregate mean rate, tight
    enough that the shared level replaces most of the per-flow diversity.
    """
    capacity = capacity_fraction * scenario.base_rate * scenario.n_pairs
    return replace(
        scenario,
        guard_groups=(Bottleneck(tuple(range(scenario.n_pairs)), capacity),),
    )
