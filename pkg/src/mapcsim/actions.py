from __future__ import annotations

from dataclasses import dataclass

ACTION_KINDS = ("goto", "probe", "survey", "recharge", "repair", "skip")
ACTION_COST = {"probe": 1, "survey": 1, "repair": 2}


@dataclass(frozen=True)
class Action:
    """One agent's action for one step.

    ``target`` is the destination vertex for ``goto`` and the patient id for
    ``repair``; it is ``None`` otherwise.
    """

    kind: str
    agent: int
    target: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ACTION_KINDS:
            raise ValueError(f"unknown action kind {self.kind!r}")

    def __str__(self) -> str:
        return self.kind if self.target is None else f"{self.kind}({self.target})"


def goto(agent: int, vertex: int) -> Action:
    return Action("goto", agent, vertex)


def skip(agent: int) -> Action:
    return Action("skip", agent)


def recharge(agent: int) -> Action:
    return Action("recharge", agent)
