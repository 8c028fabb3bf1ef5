"""Single-quanton trials under an explicit measurement order.

Randomness comes from a counter-based Philox stream: trial ``t`` under
master seed ``s`` uses the Philox block with key ``s`` and counter ``t``.
That makes every trial a pure function of ``(s, t)``, so a batch can be cut
into chunks and run in any order (or in parallel) without changing a bit
of the result.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Literal, Sequence

import numpy as np

from .qcore import (
    MeasurementBasis,
    Outcome,
    StateVector,
    ZERO_PROB,
    collapse,
    draw_index,
    probabilities,
    sample_outcome,
    sampling_cdf,
    x_basis,
    z_basis,
)

Order = Literal["eager", "delayed"]
WwdBasis = Literal["z", "x", "none"]

_WORDS_PER_TRIAL = 4  # one Philox4x64 block
_MAX_SEED = 2**64


@dataclass(frozen=True)
class RngSpec:
    master_seed: int

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < _MAX_SEED:
            raise ValueError("master seed must be an unsigned 64-bit integer")

    def trial_rng(self, trial_id: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.master_seed, counter=trial_id))

    def uniforms(self, start: int, n: int, per_trial: int = 2) -> np.ndarray:
        """The first ``per_trial`` uniforms of trials ``start .. start+n-1``.

        Identical to calling ``trial_rng(t).random()`` repeatedly.
        """
        bg = np.random.Philox(key=self.master_seed, counter=start)
        raw = bg.random_raw(n * _WORDS_PER_TRIAL).reshape(n, _WORDS_PER_TRIAL)[:, :per_trial]
        return (raw >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@dataclass(frozen=True, eq=False)
class MeasurementSchedule:
    order: Order
    wwd_basis: WwdBasis
    quanton_basis: MeasurementBasis

    def __post_init__(self):
        if self.order not in ("eager", "delayed"):
            raise ValueError(f"unknown order {self.order!r}")
        if self.wwd_basis not in ("z", "x", "none"):
            raise ValueError(f"unknown which-way basis {self.wwd_basis!r}")
        if self.quanton_basis.target != 0:
            raise ValueError("the quanton basis must act on subsystem 0")

    @classmethod
    def for_model(cls, model, order: Order = "delayed", wwd_basis: WwdBasis = "x",
                  quanton_basis: MeasurementBasis | None = None) -> "MeasurementSchedule":
        return cls(order, wwd_basis, quanton_basis or model.quanton_basis())

    def wwd(self) -> MeasurementBasis | None:
        if self.wwd_basis == "none":
            return None
        return z_basis(1) if self.wwd_basis == "z" else x_basis(1)

    def bases(self) -> tuple[MeasurementBasis, ...]:
        """Bases in execution order."""
        wwd = self.wwd()
        if wwd is None:
            return (self.quanton_basis,)
        if self.order == "eager":
            return (wwd, self.quanton_basis)
        return (self.quanton_basis, wwd)


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    order: Order
    outcomes: tuple[Outcome, ...]
    seed_used: int


def _check_state(state: StateVector, schedule: MeasurementSchedule) -> None:
    if schedule.wwd_basis == "none":
        return
    if len(state.dims) != 2:
        raise ValueError("a which-way measurement needs a model with a which-way detector")


def run_trial(model, schedule: MeasurementSchedule, trial_id: int, rng_spec: RngSpec) -> TrialRecord:
    state = model.final_state()
    _check_state(state, schedule)
    rng = rng_spec.trial_rng(trial_id)
    outcomes = []
    for basis in schedule.bases():
        outcome, state = sample_outcome(state, basis, rng)
        outcomes.append(outcome)
    return TrialRecord(trial_id, schedule.order, tuple(outcomes), rng_spec.master_seed)


@dataclass(frozen=True, eq=False)
class TrialBatch(Sequence[TrialRecord]):
    """Columnar store of trial records.

    ``indices[t, j]`` is the outcome index of the j-th executed measurement
    in trial ``start + t``.  Indexing or iterating yields
    :class:`TrialRecord` objects.
    """

    order: Order
    bases: tuple[MeasurementBasis, ...]
    indices: np.ndarray
    master_seed: int
    start: int = 0

    def __len__(self) -> int:
        return self.indices.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        row = self.indices[i]
        outcomes = tuple(Outcome(b.name, int(k), b.labels[k]) for b, k in zip(self.bases, row))
        return TrialRecord(self.start + i, self.order, outcomes, self.master_seed)

    def __iter__(self) -> Iterator[TrialRecord]:
        return (self[i] for i in range(len(self)))

    def __eq__(self, other):
        if isinstance(other, TrialBatch):
            return (self.order == other.order and self.master_seed == other.master_seed
                    and self.start == other.start
                    and [b.labels for b in self.bases] == [b.labels for b in other.bases]
                    and np.array_equal(self.indices, other.indices))
        if isinstance(other, Sequence):
            return len(self) == len(other) and all(a == b for a, b in zip(self, other))
        return NotImplemented

    def column(self, basis_name: str) -> np.ndarray:
        """Outcome indices of the measurement made in the named basis."""
        for j, b in enumerate(self.bases):
            if b.name == basis_name:
                return self.indices[:, j]
        raise KeyError(basis_name)


def _sampling_tables(state: StateVector, bases: Sequence[MeasurementBasis]):
    cdf1 = sampling_cdf(probabilities(state, bases[0]))
    if len(bases) == 1:
        return cdf1, None
    p1 = probabilities(state, bases[0])
    cond = [sampling_cdf(probabilities(collapse(state, bases[0], i), bases[1]))
            if p1[i] > ZERO_PROB else None
            for i in range(bases[0].dim)]
    return cdf1, cond


def _run_chunk(cdf1, cond, rng_spec: RngSpec, start: int, n: int) -> np.ndarray:
    k = 1 if cond is None else 2
    u = rng_spec.uniforms(start, n, per_trial=k)
    out = np.empty((n, k), dtype=np.int64)
    out[:, 0] = draw_index(cdf1, u[:, 0])
    if cond is not None:
        for i in np.unique(out[:, 0]):
            mask = out[:, 0] == i
            out[mask, 1] = draw_index(cond[i], u[mask, 1])
    return out


def run_batch(model, schedule: MeasurementSchedule, n_trials: int, rng_spec: RngSpec,
              workers: int = 1, chunk_size: int = 1 << 16) -> TrialBatch:
    """Run trials ``0 .. n_trials-1``.

    Produces exactly what a loop over :func:`run_trial` would, for any
    ``workers`` and ``chunk_size``.
    """
    if n_trials < 0:
        raise ValueError("n_trials must be non-negative")
    bases = schedule.bases()
    state = model.final_state()
    _check_state(state, schedule)
    cdf1, cond = _sampling_tables(state, bases)
    starts = range(0, n_trials, max(1, int(chunk_size)))
    sizes = [min(chunk_size, n_trials - s) for s in starts]

    def job(args):
        return _run_chunk(cdf1, cond, rng_spec, *args)

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(job, zip(starts, sizes)))
    else:
        chunks = [job(a) for a in zip(starts, sizes)]
    indices = np.concatenate(chunks) if chunks else np.empty((0, len(bases)), dtype=np.int64)
    indices.setflags(write=False)
    return TrialBatch(schedule.order, bases, indices, rng_spec.master_seed)
