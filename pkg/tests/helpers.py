"""Shared fixture builders and brute-force oracles for the test suite."""

import random

from routelens.bgp import BgpUpdate, UpdateKind, ingest
from routelens.churn import CircuitCompromiseRecord
from routelens.core import AsPath, IpPrefix, RelayDescriptor, ip_to_int


def announce(ts, session, prefix, path):
    return BgpUpdate(
        ts, session, UpdateKind.ANNOUNCE, IpPrefix.parse(prefix), AsPath(tuple(path))
    )


def withdraw(ts, session, prefix):
    return BgpUpdate(ts, session, UpdateKind.WITHDRAW, IpPrefix.parse(prefix), None)


def random_churn_fixture(rng: random.Random):
    """Random small routing history: relays, per-session updates, window.

    Sizes stay within brute-force reach (<= 5 sessions, <= 10 relays,
    <= 5 ASes, <= 50 updates); timestamps are integers so a 1 s sweep is
    exact. Prefix pools nest so most-specific forwarding gets exercised.
    """
    n_relays = rng.randint(3, 10)
    relays = []
    for i in range(n_relays):
        role = rng.choice(["g", "e", "b"])
        relays.append(
            RelayDescriptor(
                address=ip_to_int(f"10.{i}.{rng.randint(0, 3)}.{rng.randint(1, 250)}"),
                is_guard=role in ("g", "b"),
                is_exit=role in ("e", "b"),
                bandwidth=float(rng.randint(1, 100)),
                nickname=f"r{i}",
            )
        )
    prefixes = ["10.0.0.0/8"]
    for i in range(n_relays):
        prefixes.append(f"10.{i}.0.0/16")
        if rng.random() < 0.5:
            prefixes.append(f"10.{i}.{relays[i].address >> 8 & 0xFF}.0/24")

    n_sessions = rng.randint(2, 5)
    as_pool = list(range(101, 101 + rng.randint(2, 5)))
    local_pool = [64500, 64501, 64502]
    sessions = {f"s{k}": rng.choice(local_pool) for k in range(n_sessions)}

    window = (0, rng.randint(30, 60))
    updates = []
    for sid in sessions:
        for prefix in rng.sample(prefixes, k=rng.randint(1, min(4, len(prefixes)))):
            path = [rng.choice(as_pool) for _ in range(rng.randint(1, 4))]
            updates.append(announce(0, sid, prefix, path))
    n_updates = rng.randint(0, 50)
    for _ in range(n_updates):
        ts = rng.randint(1, window[1] - 1)
        sid = rng.choice(sorted(sessions))
        prefix = rng.choice(prefixes)
        if rng.random() < 0.25:
            updates.append(withdraw(ts, sid, prefix))
        else:
            path = [rng.choice(as_pool) for _ in range(rng.randint(1, 4))]
            updates.append(announce(ts, sid, prefix, path))
    updates.sort(key=lambda u: u.timestamp)
    return updates, relays, sessions, window


def build_ribs(updates, relays, sessions):
    return ingest(updates, relays, local_as=sessions)


def brute_force_records(ribs, relays, window, min_overlap, require_distinct_as=True):
    """Second-by-second enumeration over every (AS, src, guard, dst, exit).

    Uses route_for_relay pointwise (itself oracle-tested against a linear
    entry scan), so it is independent of the interval-sweep implementation.
    """
    t0, t1 = window
    local = {sid: rib.session.local_as for sid, rib in ribs.items()}
    counts: dict[tuple, int] = {}
    admitted = [r for r in relays if r.is_guard or r.is_exit]
    for t in range(int(t0), int(t1)):
        on_path = {}
        for sid, rib in ribs.items():
            for relay in admitted:
                entry = rib.route_for_relay(relay, t)
                on_path[(sid, relay.address)] = set(entry.path) if entry else set()
        for sid_g, _ in ribs.items():
            for rg in admitted:
                if not rg.is_guard:
                    continue
                ases_g = on_path[(sid_g, rg.address)]
                if not ases_g:
                    continue
                for sid_e in ribs:
                    if sid_e == sid_g:
                        continue
                    if require_distinct_as and local[sid_g] == local[sid_e]:
                        continue
                    for re_ in admitted:
                        if not re_.is_exit or re_.address == rg.address:
                            continue
                        shared = ases_g & on_path[(sid_e, re_.address)]
                        for asn in shared:
                            key = (asn, sid_g, rg.address, sid_e, re_.address)
                            counts[key] = counts.get(key, 0) + 1
    records = set()
    for (asn, src, guard, dst, exit_), seconds in counts.items():
        if seconds > 0 and seconds >= min_overlap:
            records.add(
                CircuitCompromiseRecord(src, dst, guard, exit_, asn, float(seconds))
            )
    return records
