"""Diagnostics reports for Liouville closure checks."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any

_LOGGER = logging.getLogger(__name__)

REPORT_COLUMNS = ["name", "value", "reference", "se", "passed", "warning", "note"]


# ---------------------------
#   ReportEntry
# ---------------------------
@dataclass(frozen=True)
class ReportEntry:
    """One finding of a diagnostic check."""

    name: str
    value: float
    reference: float = 0.0
    se: float = math.nan
    passed: bool = True
    warning: bool = False
    note: str = ""

    def row(self) -> list:
        return [self.name, self.value, self.reference, self.se, int(self.passed), int(self.warning), self.note]


# ---------------------------
#   Report
# ---------------------------
@dataclass
class Report:
    """Ordered collection of report entries."""

    title: str
    entries: list[ReportEntry] = field(default_factory=list)

    def add(self, name: str, value: float, reference: float = 0.0, **kwargs: Any) -> ReportEntry:
        entry = ReportEntry(name=name, value=float(value), reference=float(reference), **kwargs)
        self.entries.append(entry)
        if not entry.passed:
            _LOGGER.debug("%s: check %s failed (value %s, reference %s)", self.title, name, entry.value, entry.reference)
        return entry

    # ---------------------------
    #   add_statistical
    # ---------------------------
    def add_statistical(self, name: str, mean: float, se: float, factor: float, atol: float = 0.0, note: str = "") -> ReportEntry:
        """Record a zero-mean hypothesis at ``factor`` standard errors."""
        passed = bool(abs(mean) <= factor * se + atol)
        return self.add(name, mean, 0.0, se=float(se), passed=passed, note=note)

    def __getitem__(self, name: str) -> ReportEntry:
        for entry in self.entries:
            if entry.name == name:
                return entry
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(entry.name == name for entry in self.entries)

    @property
    def passed(self) -> bool:
        return all(entry.passed for entry in self.entries)

    @property
    def warnings(self) -> list[str]:
        return [entry.name for entry in self.entries if entry.warning]

    def rows(self) -> list[list]:
        return [entry.row() for entry in self.entries]

    def as_dict(self) -> dict[str, Any]:
        """Return the report as a diagnostics dictionary."""
        return {
            "title": self.title,
            "passed": self.passed,
            "entries": {entry.name: {"value": entry.value, "reference": entry.reference, "se": entry.se, "passed": entry.passed} for entry in self.entries},
        }
