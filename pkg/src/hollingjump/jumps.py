"""Seeded sampling of the two marked Poisson event streams.

Randomness comes from counter-based Philox generators.  Each trajectory
(``stream_id``) and each purpose (Brownian increments, event times and marks
of either measure) gets its own substream keyed by
``(seed, stream_id, purpose)``, so paths can be generated in any order, on any
number of workers, and changing one measure never perturbs another.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .coefficients import LevyMeasureSpec, MarkDistribution
from .errors import DomainError

__all__ = [
    "RngSpec",
    "JumpEvent",
    "JumpSchedule",
    "sample_event_times",
    "sample_mark",
    "sample_marks",
    "build_schedule",
    "write_schedule_csv",
]

PURPOSES = {
    "brownian": 0,
    "measure1-times": 1,
    "measure1-marks": 2,
    "measure2-times": 3,
    "measure2-marks": 4,
}

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngSpec:
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        for v in (self.seed, self.stream_id):
            if not 0 <= int(v) <= _U64:
                raise ValueError("seed and stream_id must be unsigned 64-bit integers")

    def generator(self, purpose: str) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed),
                                    spawn_key=(int(self.stream_id), PURPOSES[purpose]))
        return np.random.Generator(np.random.Philox(ss))

    def with_stream(self, stream_id: int) -> "RngSpec":
        return RngSpec(self.seed, stream_id)


@dataclass(frozen=True)
class JumpEvent:
    time: float
    measure_id: int
    mark: float


@dataclass(frozen=True, eq=False)
class JumpSchedule:
    """Merged, strictly time-ordered events of both measures on
    ``[0, horizon]``, stored column-wise."""

    horizon: float
    times: np.ndarray
    measure_ids: np.ndarray
    marks: np.ndarray

    def __len__(self):
        return len(self.times)

    def __iter__(self) -> Iterator[JumpEvent]:
        for t, j, z in zip(self.times, self.measure_ids, self.marks):
            yield JumpEvent(float(t), int(j), float(z))

    @property
    def events(self) -> list[JumpEvent]:
        return list(self)

    def __eq__(self, other):
        if not isinstance(other, JumpSchedule):
            return NotImplemented
        return (self.horizon == other.horizon
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.measure_ids, other.measure_ids)
                and np.array_equal(self.marks, other.marks))

    def of_measure(self, j: int) -> np.ndarray:
        return self.times[self.measure_ids == j]

    @classmethod
    def empty(cls, horizon: float) -> "JumpSchedule":
        return cls(horizon, np.empty(0), np.empty(0, dtype=np.int64), np.empty(0))


def sample_event_times(intensity: float, horizon: float,
                       rng: np.random.Generator) -> np.ndarray:
    """Arrival times of a homogeneous Poisson process on ``[0, horizon)``.

    Partial sums of i.i.d. exponential gaps, drawn in batches.
    """
    if intensity < 0 or not math.isfinite(intensity):
        raise DomainError("intensity must be finite and >= 0")
    if intensity == 0 or horizon <= 0:
        return np.empty(0)
    mean_count = intensity * horizon
    batch = int(mean_count + 4.0 * math.sqrt(mean_count) + 16)
    chunks = []
    last = 0.0
    while True:
        times = last + np.cumsum(rng.exponential(1.0 / intensity, size=batch))
        if times[-1] >= horizon:
            chunks.append(times[times < horizon])
            break
        chunks.append(times)
        last = times[-1]
    return np.concatenate(chunks)


def sample_marks(dist: MarkDistribution, rng: np.random.Generator, size: int) -> np.ndarray:
    if dist.kind == "atom":
        return np.full(size, dist.z0)
    if dist.kind == "discrete":
        pts = np.array(dist.points)
        cdf = np.cumsum(pts[:, 1])
        idx = np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")
        return pts[np.minimum(idx, len(pts) - 1), 0]
    return dist.lo + (dist.hi - dist.lo) * rng.random(size)


def sample_mark(dist: MarkDistribution, rng: np.random.Generator) -> float:
    """One mark: the atom, an inverse-CDF draw, or ``lo + (hi - lo) U``."""
    return float(sample_marks(dist, rng, 1)[0])


def _measure_events(pi: LevyMeasureSpec, j: int, horizon: float, rng: RngSpec):
    # Substreams are keyed independently, so unused ones need not be built.
    if pi.intensity == 0:
        return np.empty(0), np.empty(0)
    times = sample_event_times(pi.intensity, horizon, rng.generator(f"measure{j}-times"))
    if pi.marks.kind == "atom" or len(times) == 0:
        return times, np.full(len(times), pi.marks.z0 if pi.marks.kind == "atom" else 0.0)
    return times, sample_marks(pi.marks, rng.generator(f"measure{j}-marks"), len(times))


def build_schedule(spec, horizon: float, rng: RngSpec) -> JumpSchedule:
    """Sample and merge the event streams of both jump measures.

    Exact ties (probability zero) are broken by placing measure 1 first and
    moving later events to the next representable float.
    """
    if horizon <= 0:
        return JumpSchedule.empty(max(horizon, 0.0))
    t1, z1 = _measure_events(spec.pi1, 1, horizon, rng)
    t2, z2 = _measure_events(spec.pi2, 2, horizon, rng)
    if len(t2) == 0:
        times, ids, marks = t1, np.ones(len(t1), dtype=np.int64), z1
    elif len(t1) == 0:
        times, ids, marks = t2, np.full(len(t2), 2, dtype=np.int64), z2
    else:
        times = np.concatenate([t1, t2])
        ids = np.concatenate([np.ones(len(t1), dtype=np.int64),
                              np.full(len(t2), 2, dtype=np.int64)])
        marks = np.concatenate([z1, z2])
        order = np.lexsort((ids, times))
        times, ids, marks = times[order], ids[order], marks[order]
    if len(times) > 1 and np.any(np.diff(times) <= 0):
        for k in range(1, len(times)):
            if times[k] <= times[k - 1]:
                times[k] = np.nextafter(times[k - 1], np.inf)
    return JumpSchedule(float(horizon), times, ids, marks)


def write_schedule_csv(schedule: JumpSchedule, path, provenance: str | None = None) -> None:
    """Write ``time,measure_id,mark`` rows with round-trip float formatting."""
    with open(path, "w", newline="") as fh:
        if provenance:
            fh.write(f"# {provenance}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "measure_id", "mark"])
        for ev in schedule:
            w.writerow([repr(ev.time), ev.measure_id, repr(ev.mark)])
