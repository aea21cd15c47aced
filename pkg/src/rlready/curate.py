"""SFT dataset construction: length-based subset selection and validation splits.

Selection is by a length proxy (character count or whitespace-token count),
not a model tokenizer; the proxy preserves shortest/longest ordering without
dragging a tokenizer dependency in, and the choice is recorded in the
curation manifest. All selection is deterministic: datasets are sorted by
example_id before any draw, ties break by example_id, and random draws come
from the configured seed.

Mixtures select each part from the full dataset; an example picked by two
parts is kept once and the later part backfills with its next-ranked
candidate.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Sequence

LENGTH_FNS = ("chars", "whitespace_tokens")
STRATEGIES = ("shortest", "longest", "random", "mixture")


@dataclass(frozen=True)
class SftExample:
    example_id: str
    prompt: str
    response: str
    length: int | None = None

    def __post_init__(self) -> None:
        if self.length is not None and self.length < 0:
            raise ValueError(f"length must be >= 0, got {self.length}")


@dataclass(frozen=True)
class CurationSpec:
    """How to build one curated subset: strategy, size, seed, mixture parts."""

    strategy: str
    count: int
    seed: int
    mixture_parts: tuple[tuple[str, int], ...] | None = None

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(
                f"strategy must be one of {STRATEGIES}, got {self.strategy!r}"
            )
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if self.strategy == "mixture":
            if not self.mixture_parts:
                raise ValueError("mixture strategy requires mixture_parts")
            for part_strategy, part_count in self.mixture_parts:
                if part_strategy == "mixture" or part_strategy not in STRATEGIES:
                    raise ValueError(
                        f"mixture parts must be non-mixture strategies, got {part_strategy!r}"
                    )
                if part_count < 1:
                    raise ValueError(f"part counts must be >= 1, got {part_count}")
            total = sum(count for _, count in self.mixture_parts)
            if total != self.count:
                raise ValueError(
                    f"mixture parts sum to {total}, expected count={self.count}"
                )
        elif self.mixture_parts is not None:
            raise ValueError("mixture_parts only apply to the mixture strategy")


def measure_lengths(
    examples: Sequence[SftExample], length_fn: str = "whitespace_tokens"
) -> list[SftExample]:
    """Return copies with length set by the chosen proxy.

    chars counts response characters; whitespace_tokens counts maximal runs
    of non-whitespace characters.
    """
    if length_fn not in LENGTH_FNS:
        raise ValueError(f"length_fn must be one of {LENGTH_FNS}, got {length_fn!r}")
    if length_fn == "chars":
        return [replace(e, length=len(e.response)) for e in examples]
    return [replace(e, length=len(e.response.split())) for e in examples]


def _sorted_unique(dataset: Sequence[SftExample]) -> list[SftExample]:
    ordered = sorted(dataset, key=lambda e: e.example_id)
    for a, b in zip(ordered, ordered[1:]):
        if a.example_id == b.example_id:
            raise ValueError(f"duplicate example_id {a.example_id!r}")
    return ordered


def _ranking(
    base: list[SftExample], strategy: str, seed: int, part_index: int
) -> list[SftExample]:
    """Full preference order for one selection strategy."""
    if strategy == "shortest":
        return sorted(base, key=lambda e: (e.length, e.example_id))
    if strategy == "longest":
        return sorted(base, key=lambda e: (-e.length, e.example_id))
    # random: a seeded full shuffle; taking a prefix is a uniform draw
    # without replacement, and the leftover order drives backfill
    rng = random.Random(f"{seed}:{part_index}:{strategy}")
    return rng.sample(base, len(base))


def select(dataset: Sequence[SftExample], spec: CurationSpec) -> list[SftExample]:
    """Select spec.count examples; output is sorted by example_id.

    Requires lengths to be measured first (see measure_lengths); shortest and
    longest break length ties by example_id ascending.
    """
    base = _sorted_unique(dataset)
    if spec.count > len(base):
        raise ValueError(
            f"count {spec.count} exceeds dataset size {len(base)}"
        )
    unmeasured = [e.example_id for e in base if e.length is None]
    if unmeasured:
        raise ValueError(
            f"{len(unmeasured)} examples have no length; run measure_lengths first"
        )
    parts = spec.mixture_parts if spec.strategy == "mixture" else ((spec.strategy, spec.count),)
    chosen: dict[str, SftExample] = {}
    for part_index, (part_strategy, part_count) in enumerate(parts):
        taken = 0
        for example in _ranking(base, part_strategy, spec.seed, part_index):
            if taken == part_count:
                break
            if example.example_id in chosen:
                continue  # duplicate across parts: backfill from this ranking
            chosen[example.example_id] = example
            taken += 1
        if taken < part_count:
            raise ValueError(
                f"mixture part {part_index} ({part_strategy}) exhausted the dataset "
                f"after {taken} of {part_count} examples"
            )
    return sorted(chosen.values(), key=lambda e: e.example_id)


def split_validation(
    dataset: Sequence[SftExample], validation_fraction: float, seed: int
) -> tuple[list[SftExample], list[SftExample]]:
    """Seeded disjoint (train, validation) partition of the dataset.

    The validation part gets max(1, round(n * fraction)) examples; both parts
    must end up nonempty. Deterministic given (seed, sorted example_ids).
    """
    if not 0.0 < validation_fraction < 1.0:
        raise ValueError(
            f"validation_fraction must be in (0, 1), got {validation_fraction}"
        )
    base = _sorted_unique(dataset)
    if not base:
        raise ValueError("cannot split an empty dataset")
    n_val = max(1, round(len(base) * validation_fraction))
    if n_val >= len(base):
        raise ValueError(
            f"validation_fraction {validation_fraction} leaves no training examples "
            f"(dataset size {len(base)})"
        )
    rng = random.Random(f"{seed}:validation")
    val_ids = set(rng.sample([e.example_id for e in base], n_val))
    train = [e for e in base if e.example_id not in val_ids]
    validation = [e for e in base if e.example_id in val_ids]
    return train, validation
