"""Check reports, CSV artifacts and console tables."""

import csv
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

from colorama import Fore, Style
from tabulate import tabulate

logger = logging.getLogger(__name__)

# CSV columns of every report artifact
REPORT_FIELDS = ("quantity", "parameter", "value", "flag")


def format_number(value: Any) -> str:
    """Shortest round-trip text for floats, str() for everything else."""
    if isinstance(value, bool) or value is None:
        return "" if value is None else str(value).lower()
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(float(value))
    return str(value)


@dataclass
class Violation:
    check: str
    witness: str
    deviation: float
    detail: str = ""


@dataclass
class CheckReport:
    """Outcome of one identity or inequality check.

    ``expected_failure`` marks checks that are designed to fail (a negative
    control); they are reported but do not make a run fail.
    """

    name: str
    violations: List[Violation] = field(default_factory=list)
    checked: int = 0
    max_deviation: float = 0.0
    witness: Optional[str] = None
    expected_failure: bool = False
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def ok(self) -> bool:
        """Passed, or failed where failure was the expected outcome."""
        return self.passed or self.expected_failure

    def _record(self, check: str, deviation: float, witness: str, failed: bool, detail: str = ""):
        self.checked += 1
        if deviation > self.max_deviation:
            self.max_deviation = deviation
            self.witness = witness
        if failed:
            self.violations.append(Violation(check, witness, deviation, detail))
            log = logger.info if self.expected_failure else logger.warning
            log("%s: %s violated by %.3g at %s", self.name, check, deviation, witness)

    def expect_close(self, check: str, actual: float, expected: float, tol: float, witness: str = ""):
        deviation = abs(actual - expected)
        self._record(check, deviation, witness, not deviation <= tol,
                     f"{format_number(actual)} vs {format_number(expected)}")

    def expect_at_most(self, check: str, left: float, right: float, witness: str = ""):
        deviation = max(0.0, left - right)
        self._record(check, deviation, witness, left > right,
                     f"{format_number(left)} > {format_number(right)}")

    def merge(self, other: "CheckReport") -> "CheckReport":
        self.checked += other.checked
        self.violations.extend(other.violations)
        if other.max_deviation > self.max_deviation:
            self.max_deviation, self.witness = other.max_deviation, other.witness
        return self

    def rows(self) -> List[Dict[str, Any]]:
        flag = "pass" if self.passed else ("expected-failure" if self.expected_failure else "fail")
        rows = [
            {"quantity": f"{self.name}.checked", "parameter": "", "value": self.checked, "flag": flag},
            {"quantity": f"{self.name}.max_deviation", "parameter": self.witness or "",
             "value": self.max_deviation, "flag": flag},
        ]
        for v in self.violations:
            rows.append({"quantity": f"{self.name}.{v.check}", "parameter": v.witness,
                         "value": v.deviation, "flag": "violation"})
        return rows


def write_csv(path: str, rows: Iterable[Mapping[str, Any]], fields: Sequence[str] = REPORT_FIELDS) -> str:
    """Write rows with floats in shortest round-trip form; returns the path."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    count = 0
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fields), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: format_number(row.get(k)) for k in fields})
            count += 1
    logger.info("wrote %d rows to %s", count, path)
    return path


def format_flag(flag: str) -> str:
    """Colour a row flag for the console."""
    colors = {
        "pass": Fore.GREEN,
        "ok": Fore.GREEN,
        "summable": Fore.GREEN,
        "converged": Fore.GREEN,
        "fail": Fore.RED,
        "violation": Fore.RED,
        "diverging": Fore.YELLOW,
        "expected-failure": Fore.MAGENTA,
        "not-converged": Fore.YELLOW,
    }
    color = colors.get(flag)
    if not color:
        return flag
    return f"{color}{flag}{Style.RESET_ALL}"


def render_table(rows: Sequence[Mapping[str, Any]], fields: Sequence[str] = REPORT_FIELDS,
                 limit: Optional[int] = None) -> str:
    """Grid table of report rows, flags coloured, long tables cut at ``limit``."""
    shown = list(rows) if limit is None else list(rows)[:limit]
    table = []
    for row in shown:
        cells = []
        for k in fields:
            value = row.get(k)
            text = format(value, ".10g") if isinstance(value, float) else format_number(value)
            cells.append(format_flag(text) if k == "flag" else text)
        table.append(cells)
    out = tabulate(table, headers=list(fields), tablefmt="grid")
    if limit is not None and len(rows) > limit:
        out += f"\n... {len(rows) - limit} more rows in the CSV"
    return out


def heading(title: str) -> str:
    return f"\n{Fore.CYAN}=== {title} ==={Style.RESET_ALL}"
