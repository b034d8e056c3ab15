"""Payload types carried inside envelopes.

Every payload has a ``kind`` string used by the channel for per-kind drop
filters and by the event log.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Union


@dataclass(frozen=True)
class Bid:
    kind: ClassVar[str] = "bid"
    bidder: int
    goal: object
    utility: int
    round: int
    epoch: int = 0


@dataclass(frozen=True)
class Award:
    kind: ClassVar[str] = "award"
    agent: int
    goal: object
    utility: int
    round: int
    epoch: int = 0


@dataclass(frozen=True)
class Ack:
    """Receipt for an award. Defined for the wire schema; the team never needs it
    because awards are re-broadcast instead of acknowledged."""

    kind: ClassVar[str] = "ack"
    agent: int
    goal: object
    epoch: int = 0


@dataclass(frozen=True)
class PerceptShare:
    kind: ClassVar[str] = "percept"
    facts: tuple


@dataclass(frozen=True)
class Rendezvous:
    kind: ClassVar[str] = "rendezvous"
    repairer: int
    patient: int
    meet_vertex: int
    last_mover: int
    step_announced: int


Message = Union[Bid, Award, Ack, PerceptShare, Rendezvous]
