"""Verdicts and reports shared by every check suite.

A Report is an ordered list of verdicts plus free-form human lines and named
pandas tables. Machine output is one `VERDICT <check-id> <STATUS> [detail]`
line per verdict, in insertion order.
"""

from dataclasses import dataclass, field
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__
from pathlib import Path
from typing import Dict, List

import pandas as pd


class Status(StrEnum):
    PASS = 'PASS'
    FAIL = 'FAIL'
    FLAG = 'FLAG'
    UNSAT = 'UNSAT'
    SAT = 'SAT'


# Status -> marker used in human output
_MARK = {
    Status.PASS: '✅',
    Status.FAIL: '❌',
    Status.FLAG: '⚠️ ',
    Status.UNSAT: '🔒',
    Status.SAT: '🔓',
}


@dataclass(frozen=True)
class Verdict:
    """Outcome of one named check."""
    check_id: str
    status: Status
    detail: str = ''

    def machine_line(self) -> str:
        detail = ' '.join(self.detail.split())
        return f"VERDICT {self.check_id} {self.status}" + (f" {detail}" if detail else '')

    def human_line(self) -> str:
        text = f"{_MARK[self.status]} {self.check_id}: {self.status}"
        return f"{text} ({self.detail})" if self.detail else text


@dataclass
class Report:
    title: str
    verdicts: List[Verdict] = field(default_factory=list)
    lines: List[str] = field(default_factory=list)
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)

    def add(self, check_id: str, status: Status, detail: str = '') -> Verdict:
        verdict = Verdict(check_id, status, detail)
        self.verdicts.append(verdict)
        return verdict

    def extend(self, verdicts) -> None:
        self.verdicts.extend(verdicts)

    def note(self, line: str = '') -> None:
        self.lines.append(line)

    def attach(self, name: str, table: pd.DataFrame) -> None:
        self.tables[name] = table

    def status_of(self, check_id: str) -> Status | None:
        for verdict in self.verdicts:
            if verdict.check_id == check_id:
                return verdict.status
        return None

    @property
    def failed(self) -> List[Verdict]:
        return [v for v in self.verdicts if v.status == Status.FAIL]

    def exit_code(self) -> int:
        """1 when any check failed; FLAG, SAT and UNSAT never fail a run."""
        return 1 if self.failed else 0

    def machine_lines(self) -> List[str]:
        return [v.machine_line() for v in self.verdicts]

    def human_lines(self) -> List[str]:
        out = [f"\n📋 {self.title}", '=' * 60]
        out.extend(self.lines)
        if self.lines:
            out.append('')
        out.extend(v.human_line() for v in self.verdicts)
        return out

    def export_csv(self, output_dir: Path) -> List[Path]:
        """Write every attached table as `<title>_<name>.csv`."""
        output_dir.mkdir(parents=True, exist_ok=True)
        stem = self.title.lower().replace(' ', '_')
        paths = []
        for name, table in self.tables.items():
            path = output_dir / f"{stem}_{name}.csv"
            table.to_csv(path, index=False, encoding='utf-8-sig')
            paths.append(path)
        return paths
