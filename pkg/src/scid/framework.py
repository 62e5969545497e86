"""Shared vocabulary for structure-hypothesis-driven runs.

A run pairs a hypothesis about the artifact's form with an inductive
search and a deductive engine. This module holds the desk-scale validity
check (finite enumeration of the unrestricted and restricted artifact
spaces) and the audit records each instantiation attaches to its results.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field, asdict
from typing import Callable, Iterable

# Validity verdicts.
VALID = "VALID"
INVALID = "INVALID"
VACUOUS = "VACUOUS"

# How a hypothesis' validity was established.
PROVED = "PROVED"
CHECKED_BY_ENUMERATION = "CHECKED_BY_ENUMERATION"
ASSUMED = "ASSUMED"

# What a run claims.
SOUND_RESULT = "SOUND_RESULT"
UNREALIZABLE = "UNREALIZABLE"
UNKNOWN = "UNKNOWN"

_VALIDITY_STATUSES = {PROVED, CHECKED_BY_ENUMERATION, ASSUMED}
_RUN_OUTCOMES = {SOUND_RESULT, UNREALIZABLE, UNKNOWN}


class EnumerationBudgetError(Exception):
    """Enumeration exceeded its budget; no verdict was reached."""


class AuditError(ValueError):
    """Ill-formed audit record."""


@dataclass(frozen=True)
class ProblemInstance:
    """Names the system / environment / specification triple of a run."""

    system_desc: str
    environment_desc: str
    spec_desc: str

    def __post_init__(self):
        if not (self.system_desc and self.environment_desc and self.spec_desc):
            raise ValueError("all three descriptors must be non-empty")


@dataclass(frozen=True)
class StructureHypothesisDescriptor:
    name: str
    artifact_space_size: int | None = None
    enumerator: Callable[[], Iterable] | None = None

    def check_enumerator(self):
        """When a size is declared, the enumerator must yield exactly that
        many pairwise-distinct artifacts."""
        if self.artifact_space_size is None:
            return
        if self.enumerator is None:
            raise AuditError("artifact_space_size given without an enumerator")
        seen = set()
        count = 0
        for artifact in self.enumerator():
            count += 1
            key = artifact if isinstance(artifact, (int, str, tuple, frozenset)) else repr(artifact)
            if key in seen:
                raise AuditError(f"duplicate artifact in hypothesis space: {key!r}")
            seen.add(key)
            if count > self.artifact_space_size:
                break
        if count != self.artifact_space_size:
            raise AuditError(
                f"hypothesis {self.name}: enumerator yielded {count} artifacts, "
                f"declared {self.artifact_space_size}")


@dataclass(frozen=True)
class AuditRecord:
    hypothesis: str
    validity_status: str
    run_outcome: str
    waiver: bool = False
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def check_validity_by_enumeration(
    space_cs,
    space_ch,
    satisfies: Callable,
    *,
    budget: int = 1_000_000,
) -> str:
    """Decide whether restricting the artifact space loses all solutions.

    ``space_cs`` and ``space_ch`` are finite enumerators (iterables, or
    callables returning iterables) over the unrestricted and restricted
    artifact spaces. Verdicts:

    * VACUOUS  -- nothing in the unrestricted space satisfies the predicate;
    * VALID    -- something in the restricted space satisfies it;
    * INVALID  -- the unrestricted space has a solution but the restricted
      space has none.
    """
    cs = space_cs() if callable(space_cs) else space_cs
    ch = space_ch() if callable(space_ch) else space_ch
    remaining = budget

    any_cs = False
    for artifact in cs:
        remaining -= 1
        if remaining < 0:
            raise EnumerationBudgetError(f"budget {budget} exhausted on the full space")
        if satisfies(artifact):
            any_cs = True
            break
    if not any_cs:
        return VACUOUS
    for artifact in ch:
        remaining -= 1
        if remaining < 0:
            raise EnumerationBudgetError(f"budget {budget} exhausted on the restricted space")
        if satisfies(artifact):
            return VALID
    return INVALID


def record_audit(
    hypothesis,
    validity_status: str,
    run_outcome: str,
    *,
    waiver: bool = False,
    details: dict | None = None,
    log: "AuditLog | None" = None,
) -> AuditRecord:
    """Validate and persist one audit record.

    A SOUND_RESULT claim under a merely ASSUMED hypothesis is rejected
    unless the caller explicitly waives the check (the conditional-soundness
    contract made visible).
    """
    name = hypothesis.name if isinstance(hypothesis, StructureHypothesisDescriptor) else str(hypothesis)
    if validity_status not in _VALIDITY_STATUSES:
        raise AuditError(f"bad validity_status {validity_status!r}")
    if run_outcome not in _RUN_OUTCOMES:
        raise AuditError(f"bad run_outcome {run_outcome!r}")
    if run_outcome == SOUND_RESULT and validity_status == ASSUMED and not waiver:
        raise AuditError(
            "SOUND_RESULT claimed under an ASSUMED hypothesis without a waiver")
    record = AuditRecord(name, validity_status, run_outcome, waiver, details or {})
    if log is not None:
        log.append(record)
    return record


class AuditLog:
    """Append-only record log; concurrent appends serialize on a lock."""

    def __init__(self, path: str | None = None):
        self.path = path
        self._records: list[AuditRecord] = []
        self._lock = threading.Lock()

    def append(self, record: AuditRecord):
        line = json.dumps(record.to_dict(), sort_keys=True)
        with self._lock:
            self._records.append(record)
            if self.path:
                with open(self.path, "a") as fh:
                    fh.write(line + "\n")

    @property
    def records(self) -> tuple[AuditRecord, ...]:
        with self._lock:
            return tuple(self._records)

    @staticmethod
    def load(path: str) -> list[dict]:
        out = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    out.append(json.loads(line))
        return out
