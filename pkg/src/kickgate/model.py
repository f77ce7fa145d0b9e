"""Physical parameters, unit conventions and the pulse-sequence data model.

Units: hbar = 1 and the centre-of-mass trap frequency nu = 1.  Every time in
this package is measured in trap periods 2*pi/nu, so a free evolution of
duration t rotates the centre-of-mass mode by the angle 2*pi*t.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

TWO_PI = 2.0 * math.pi
SQRT3 = math.sqrt(3.0)

# weights closer to zero than this are treated as cancelled
WEIGHT_ATOL = 1e-12


@dataclass(frozen=True)
class TrapParams:
    """Two ions in a linear trap.

    eta is the Lamb-Dicke parameter of a single ion, nbar the mean thermal
    occupation per mode and a0_over_d the ratio of the ground-state size
    sqrt(hbar / M nu) to the equilibrium ion separation.
    """

    eta: float = 0.178
    nbar: float = 0.0
    a0_over_d: float = 1e-3
    nu: float = 1.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not self.nbar >= 0:
            raise ValueError(f"nbar must be non-negative, got {self.nbar}")
        if not 0 < self.a0_over_d < 1:
            raise ValueError(f"a0_over_d must lie in (0, 1), got {self.a0_over_d}")
        if self.nu != 1.0:
            raise ValueError("nu is fixed to 1; express times in trap periods")


@dataclass(frozen=True)
class ModeParams:
    nu_c: float
    nu_r: float
    eta_c: float
    eta_r: float

    def freq(self, mode: str) -> float:
        return self.nu_c if mode == "c" else self.nu_r


def derive_modes(p: TrapParams) -> ModeParams:
    """Centre-of-mass and stretch mode frequencies and kick strengths."""
    return ModeParams(
        nu_c=p.nu,
        nu_r=SQRT3 * p.nu,
        eta_c=p.eta / math.sqrt(2.0),
        eta_r=p.eta * (4.0 / 3.0) ** 0.25,
    )


@dataclass(frozen=True)
class KickEvent:
    t: float
    w: float

    def __post_init__(self):
        if self.w == 0:
            raise ValueError("kick weight must be non-zero")


def merge_simultaneous(events: Iterable[KickEvent]) -> list[KickEvent]:
    """Sum the weights of kicks that share a time; drop those that cancel."""
    merged: list[list[float]] = []
    for ev in sorted(events, key=lambda e: e.t):
        if merged and merged[-1][0] == ev.t:
            merged[-1][1] += ev.w
        else:
            merged.append([ev.t, ev.w])
    return [KickEvent(t, w) for t, w in merged if abs(w) > WEIGHT_ATOL]


@dataclass(frozen=True)
class PulseSequence:
    """Chronological kicks; every weight is multiplied by ``repetitions``."""

    events: tuple[KickEvent, ...] = ()
    repetitions: int = 1

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if int(self.repetitions) != self.repetitions or self.repetitions < 1:
            raise ValueError(f"repetitions must be an integer >= 1, got {self.repetitions}")
        ts = [e.t for e in self.events]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("kick times must be strictly increasing; merge simultaneous kicks first")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]], repetitions: int = 1):
        """Build from (t, w) pairs in any order, merging equal times."""
        return cls(tuple(merge_simultaneous(KickEvent(t, w) for t, w in pairs)), repetitions)

    @property
    def times(self) -> list[float]:
        return [e.t for e in self.events]

    @property
    def weights(self) -> list[float]:
        """Effective weights, repetition multiplier included."""
        return [self.repetitions * e.w for e in self.events]

    @property
    def duration(self) -> float:
        return self.events[-1].t - self.events[0].t if self.events else 0.0

    @property
    def total_pulse_pairs(self) -> int:
        """Counter-propagating pulse pairs fired, N * sum_k ceil|w_k|.

        A tilted kick of weight gamma with 0 < gamma < 1 still costs a full
        pair in every repetition.
        """
        return self.repetitions * sum(pulse_pair_count(e.w) for e in self.events)

    def is_antisymmetric(self, atol: float = 0.0) -> bool:
        evs = self.events
        n = len(evs)
        return all(
            abs(evs[i].t + evs[n - 1 - i].t) <= atol and abs(evs[i].w + evs[n - 1 - i].w) <= atol
            for i in range(n)
        )

    def shifted(self, index: int, dt: float) -> "PulseSequence":
        """Copy with kick ``index`` moved by dt (re-merged if it lands on another)."""
        pairs = [(e.t + (dt if i == index else 0.0), e.w) for i, e in enumerate(self.events)]
        return PulseSequence.from_pairs(pairs, self.repetitions)

    def to_dict(self) -> dict:
        return {
            "repetitions": self.repetitions,
            "events": [{"t": e.t, "w": e.w} for e in self.events],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PulseSequence":
        unknown = set(d) - {"repetitions", "events", "metadata"}
        if unknown:
            raise ValueError(f"unknown keys in sequence: {sorted(unknown)}")
        events = [KickEvent(float(e["t"]), float(e["w"])) for e in d["events"]]
        return cls(tuple(events), int(d.get("repetitions", 1)))

    def save(self, path, metadata: dict | None = None) -> None:
        d = self.to_dict()
        if metadata is not None:
            d["metadata"] = metadata
        Path(path).write_text(json.dumps(d, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "PulseSequence":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def pulse_pair_count(w: float) -> int:
    """Pulse pairs needed to realise a kick of weight w (at least one)."""
    return max(1, math.ceil(abs(w) - 1e-9))


def antisymmetrize(half: Sequence[KickEvent], repetitions: int = 1) -> PulseSequence:
    """Mirror kicks at negative times to (-t, -w)."""
    ts = [e.t for e in half]
    if any(t >= 0 for t in ts):
        raise ValueError("antisymmetrize expects kicks at strictly negative times")
    if len(set(ts)) != len(ts):
        raise ValueError("duplicate kick times")
    mirrored = [KickEvent(-e.t, -e.w) for e in half]
    events = sorted(list(half) + mirrored, key=lambda e: e.t)
    return PulseSequence(tuple(events), repetitions)
