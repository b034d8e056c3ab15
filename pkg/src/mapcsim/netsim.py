"""Simulated message server: the only channel between agents.

Time is counted in delivery ticks. Every envelope sent during tick ``t`` is
due at ``t + 1``. Drops are decided by a keyed hash of
``(seed, src, seq, dst)`` so the same seed and send sequence replays the same
losses bit for bit.
"""

from __future__ import annotations

import hashlib
import json
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .errors import ConfigError, ProtocolError, SenderCrashedError
from .messages import Message

BROADCAST = -1
_TWO64 = 1 << 64


@dataclass(frozen=True)
class Envelope:
    src: int
    dst: int
    step: int
    seq: int
    payload: Message


@dataclass(frozen=True)
class ChannelConfig:
    """Fault model of the channel.

    ``crashed`` maps an agent to the first tick at which it is dead; crashes are
    permanent. ``drop_kinds`` restricts random drops to the listed payload kinds
    (``None`` means every kind).
    """

    drop_probability: Fraction = Fraction(0)
    crashed: Mapping[int, int] = field(default_factory=dict)
    rng_seed: int = 0
    drop_kinds: frozenset[str] | None = None

    def __post_init__(self) -> None:
        p = self.drop_probability
        if isinstance(p, float):
            p = Fraction(str(p))
        p = Fraction(p)
        if not 0 <= p <= 1:
            raise ConfigError(f"drop probability {p} outside [0, 1]")
        object.__setattr__(self, "drop_probability", p)
        crashed = self.crashed
        if not isinstance(crashed, Mapping):
            crashed = dict(crashed)
        object.__setattr__(self, "crashed", dict(sorted(crashed.items())))
        if self.drop_kinds is not None:
            object.__setattr__(self, "drop_kinds", frozenset(self.drop_kinds))


def drop_coin(seed: int, src: int, seq: int, dst: int, p: Fraction) -> bool:
    """True when the copy of ``(src, seq)`` addressed to ``dst`` is lost."""
    if p == 0:
        return False
    if p == 1:
        return True
    digest = hashlib.blake2b(f"{seed}|{src}|{seq}|{dst}".encode(), digest_size=8).digest()
    u = int.from_bytes(digest, "big")
    return u * p.denominator < p.numerator * _TWO64


class Harness:
    """Fault-injectable, FIFO, one-tick-latency message server.

    ``teams`` maps every agent id to its team; broadcasts reach the live
    teammates of the sender only.
    """

    def __init__(self, teams: Mapping[int, str], config: ChannelConfig | None = None, log: bool = False):
        self.teams = dict(teams)
        self._members: dict[str, list[int]] = defaultdict(list)
        for a in sorted(self.teams):
            self._members[self.teams[a]].append(a)
        self.config = config or ChannelConfig()
        self.now = -1
        self._in_tick = False
        self._next_seq: dict[int, int] = defaultdict(int)
        self._queue: dict[int, list[tuple[int, Envelope]]] = defaultdict(list)
        self._in_flight = 0
        self.logging = log
        self.events: list[dict] = []

    # -- fault model -------------------------------------------------------

    def crashed(self, agent: int, step: int) -> bool:
        since = self.config.crashed.get(agent)
        return since is not None and since <= step

    def live_teammates(self, agent: int, step: int) -> list[int]:
        return [a for a in self._members[self.teams[agent]] if a != agent and not self.crashed(a, step)]

    def configure_faults(self, config: ChannelConfig) -> None:
        if self._in_tick:
            raise ProtocolError("faults can only be reconfigured between ticks")
        for agent, since in self.config.crashed.items():
            if config.crashed.get(agent) != since:
                raise ConfigError(f"agent {agent} crashed at {since}; crashes are permanent")
        self.config = config

    def crash(self, agent: int, step: int) -> bool:
        """Convenience wrapper: add one crash. Returns False if already crashed."""
        if agent in self.config.crashed:
            return False
        crashed = dict(self.config.crashed)
        crashed[agent] = step
        self.configure_faults(ChannelConfig(self.config.drop_probability, crashed,
                                            self.config.rng_seed, self.config.drop_kinds))
        return True

    def set_drop_probability(self, p, kinds: Iterable[str] | None = None) -> None:
        self.configure_faults(ChannelConfig(p, self.config.crashed, self.config.rng_seed,
                                            None if kinds is None else frozenset(kinds)))

    # -- traffic -----------------------------------------------------------

    def next_seq(self, src: int) -> int:
        return self._next_seq[src]

    def make(self, src: int, dst: int, step: int, payload: Message) -> Envelope:
        return Envelope(src, dst, step, self._next_seq[src], payload)

    def send(self, envelope: Envelope) -> bool:
        src = envelope.src
        if self.crashed(src, envelope.step):
            raise SenderCrashedError(f"agent {src} is crashed at step {envelope.step}")
        if envelope.seq != self._next_seq[src]:
            raise ProtocolError(f"agent {src} sent seq {envelope.seq}, expected {self._next_seq[src]}")
        if envelope.step < self.now:
            raise ProtocolError(f"envelope stamped {envelope.step} but tick {self.now} already delivered")
        self._next_seq[src] += 1

        if envelope.dst == BROADCAST:
            targets = self.live_teammates(src, envelope.step)
        else:
            targets = [envelope.dst]
        cfg = self.config
        kind = envelope.payload.kind
        may_drop = cfg.drop_probability > 0 and (cfg.drop_kinds is None or kind in cfg.drop_kinds)
        due = envelope.step + 1
        bucket = self._queue[due]
        crashed = cfg.crashed
        for dst in targets:
            since = crashed.get(dst)
            if since is not None and since <= envelope.step:
                outcome = "dst-crashed"
            elif may_drop and drop_coin(cfg.rng_seed, src, envelope.seq, dst, cfg.drop_probability):
                outcome = "dropped"
            else:
                bucket.append((dst, envelope))
                self._in_flight += 1
                outcome = "queued"
            if self.logging:
                self._log(envelope.step, src, dst, envelope.seq, kind, outcome)
        return True

    def deliver_tick(self, step: int) -> dict[int, list[Envelope]]:
        if step <= self.now:
            raise ProtocolError(f"tick {step} already delivered (last was {self.now})")
        self.now = step
        self._in_tick = True
        out: dict[int, list[Envelope]] = {}
        crashed = self.config.crashed
        for due in sorted(d for d in self._queue if d <= step):
            for dst, env in self._queue.pop(due):
                self._in_flight -= 1
                since = crashed.get(dst)
                if since is not None and since <= step:
                    outcome = "discarded"
                else:
                    out.setdefault(dst, []).append(env)
                    outcome = "delivered"
                if self.logging:
                    self._log(step, env.src, dst, env.seq, env.payload.kind, outcome)
        return out

    def end_tick(self) -> None:
        self._in_tick = False

    @property
    def in_flight(self) -> int:
        return self._in_flight

    # -- event log ---------------------------------------------------------

    def _log(self, step: int, src: int, dst: int, seq: int, kind: str, outcome: str) -> None:
        self.events.append({"step": step, "src": src, "dst": dst, "seq": seq, "kind": kind, "outcome": outcome})

    def log_lines(self) -> list[str]:
        return [json.dumps(e, separators=(",", ":")) for e in self.events]

    def write_log(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.log_lines():
                fh.write(line + "\n")
