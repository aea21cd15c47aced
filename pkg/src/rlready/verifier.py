"""Turn raw completions into correctness counts for reasoning benchmarks.

A completion is correct when its final \\boxed{...} answer matches the gold
answer, either after normalization or as an exact rational value ("0.5" vs
"1/2"). The normalization rule set is deliberately small and frozen under
RULESET_VERSION so scores stay reproducible; richer symbolic equivalence
(trig identities, intervals, matrices) is out of scope.

Completions with no boxed answer count as incorrect, never excluded:
excluding them would inflate c/n and bias Pass@k upward.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .passk import TaskOutcome

# Bump whenever a normalization or extraction rule changes; recorded in
# report metadata so scores can be traced to the rule set that produced them.
RULESET_VERSION = "1"

_BOXED = re.compile(r"\\boxed\s*\{")
_LEFT_RIGHT = re.compile(r"\\left\b|\\right\b")
_DFRAC = re.compile(r"\\dfrac\b")
_FRAC = re.compile(r"\\frac\{([^{}]+)\}\{([^{}]+)\}")
_DIGIT_COMMA = re.compile(r"(?<=\d),(?=\d)")
_TRAILING_ZEROS = re.compile(r"(?<=\d)\.0+$")
_PERCENT = re.compile(r"^([+-]?\d+(?:\.\d+)?)%$")


@dataclass(frozen=True)
class Sample:
    """One completion for one task."""

    checkpoint_id: str
    benchmark_id: str
    task_id: str
    sample_index: int
    text: str
    finish_reason: str | None = None

    def __post_init__(self) -> None:
        if self.sample_index < 0:
            raise ValueError(f"sample_index must be >= 0, got {self.sample_index}")


@dataclass(frozen=True)
class GoldAnswer:
    benchmark_id: str
    task_id: str
    answer: str

    def __post_init__(self) -> None:
        if not self.answer:
            raise ValueError(f"empty gold answer for task {self.task_id!r}")


def extract_boxed(text: str) -> str | None:
    """Contents of the last well-formed \\boxed{...} in text, or None.

    Brace matching is balanced, so nested groups like \\boxed{\\dfrac{1}{2}}
    come back whole. Missing or never-closed boxes yield None; this never
    raises, whatever the input.
    """
    starts = {m.start(): m.end() for m in _BOXED.finditer(text)}
    if not starts:
        return None
    best: tuple[int, str] | None = None
    depth = 0
    pending: list[tuple[int, int]] = []  # (content start, depth at open)
    i = 0
    n = len(text)
    while i < n:
        content_start = starts.get(i)
        if content_start is not None:
            pending.append((content_start, depth))
            depth += 1
            i = content_start
            continue
        ch = text[i]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if pending and pending[-1][1] == depth:
                start, _ = pending.pop()
                if best is None or start > best[0]:
                    best = (start, text[start:i])
        i += 1
    return best[1] if best is not None else None


def normalize(answer: str) -> str:
    """Canonicalize an answer string under the frozen rule set.

    In order: strip \\left/\\right, strip $, normalize whitespace (trim and
    collapse runs), rewrite \\dfrac to \\frac, rewrite \\frac{a}{b} to a/b
    (innermost first, to a fixed point), drop thousands commas inside digit
    runs, drop a trailing .0...0, and rewrite a trailing % on a number into
    /100 form. Idempotent; case is preserved.
    """
    s = _LEFT_RIGHT.sub("", answer)
    s = s.replace("$", "")
    s = " ".join(s.split())
    s = _DFRAC.sub(r"\\frac", s)
    while True:
        rewritten = _FRAC.sub(r"\1/\2", s)
        if rewritten == s:
            break
        s = rewritten
    s = _DIGIT_COMMA.sub("", s)
    s = _TRAILING_ZEROS.sub("", s)
    m = _PERCENT.match(s)
    if m:
        s = m.group(1) + "/100"
    return s


def _as_fraction(s: str) -> Fraction | None:
    """Exact rational value of a normalized answer, or None if non-numeric."""
    s = s.strip()
    if not s:
        return None
    if "/" in s:
        num, _, den = s.partition("/")
        try:
            d = Fraction(den.strip())
            if d == 0:
                return None
            return Fraction(num.strip()) / d
        except (ValueError, ZeroDivisionError):
            return None
    try:
        return Fraction(s)
    except ValueError:
        return None


def answers_equal(a: str, b: str) -> bool:
    """True iff a and b normalize to the same string or to equal exact rationals.

    Numeric comparison is exact (Fraction), never float-with-epsilon: gold
    answers in math benchmarks are exact values.
    """
    na, nb = normalize(a), normalize(b)
    if na == nb:
        return True
    fa = _as_fraction(na)
    if fa is None:
        return False
    fb = _as_fraction(nb)
    return fb is not None and fa == fb


def score(samples: Sequence[Sample], gold: GoldAnswer) -> TaskOutcome:
    """Score one task's samples against its gold answer.

    n is the sample count, c the number whose extracted boxed answer matches
    gold under answers_equal; samples with no boxed answer are incorrect.
    """
    if not samples:
        raise ValueError(f"no samples to score for task {gold.task_id!r}")
    task_ids = sorted({s.task_id for s in samples})
    if len(task_ids) > 1:
        raise ValueError(f"samples span multiple tasks: {task_ids}")
    if task_ids[0] != gold.task_id:
        raise ValueError(
            f"samples are for task {task_ids[0]!r} but gold is for {gold.task_id!r}"
        )
    benchmarks = sorted({s.benchmark_id for s in samples})
    if len(benchmarks) > 1 or benchmarks[0] != gold.benchmark_id:
        raise ValueError(
            f"samples are for benchmark {benchmarks} but gold is for {gold.benchmark_id!r}"
        )
    checkpoints = sorted({s.checkpoint_id for s in samples})
    if len(checkpoints) > 1:
        raise ValueError(f"samples span multiple checkpoints: {checkpoints}")
    c = 0
    for s in samples:
        boxed = extract_boxed(s.text)
        if boxed is not None and answers_equal(boxed, gold.answer):
            c += 1
    return TaskOutcome(
        checkpoint_id=checkpoints[0],
        benchmark_id=gold.benchmark_id,
        task_id=gold.task_id,
        n=len(samples),
        c=c,
    )
