"""Transformer condition classes and their fixed 0-6 encoding."""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["ConditionLabel", "CONDITIONS", "N_CONDITIONS", "by_code", "by_name"]


@dataclass(frozen=True)
class ConditionLabel:
    code: int
    name: str


# NC normal, LT/MT/HT low/medium/high overheating, PD partial discharge,
# LD/HD low/high energy discharge.
CONDITIONS: tuple[ConditionLabel, ...] = tuple(
    ConditionLabel(code, name)
    for code, name in enumerate(("NC", "LT", "MT", "HT", "PD", "LD", "HD"))
)

N_CONDITIONS = len(CONDITIONS)

_BY_NAME = {c.name: c for c in CONDITIONS}


def by_code(code: int) -> ConditionLabel:
    if not 0 <= code < N_CONDITIONS:
        raise ValueError(f"condition code {code} outside 0..{N_CONDITIONS - 1}")
    return CONDITIONS[code]


def by_name(name: str) -> ConditionLabel:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ValueError(f"unknown condition {name!r}, expected one of {sorted(_BY_NAME)}") from None
