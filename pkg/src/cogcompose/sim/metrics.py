"""Per-run metrics, the memory ledger, and the metrics CSV format."""
from __future__ import annotations

import csv
import io
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

CSV_COLUMNS = ["seed", "mode", "mobility", "density", "CL", "config-id",
               "PFR", "EFR", "CT_s", "MU_bytes", "cycles"]


class MemoryLedger:
    """Model-level allocation ledger; tracks current and peak bytes per provider."""

    def __init__(self):
        self.current: dict[str, int] = defaultdict(int)
        self.peak: dict[str, int] = defaultdict(int)

    def charge(self, provider: str, nbytes: int) -> None:
        """Positive to allocate, negative to free."""
        self.current[provider] += nbytes
        if self.current[provider] < 0:
            raise ValueError(f"{provider} freed more than it allocated")
        self.peak[provider] = max(self.peak[provider], self.current[provider])

    def set(self, provider: str, nbytes: int) -> None:
        self.charge(provider, nbytes - self.current[provider])

    def peak_mu(self, providers: Iterable[str] | None = None) -> float:
        """Mean of peak bytes over the given (default: all charged) providers."""
        keys = list(self.peak) if providers is None else list(providers)
        if not keys:
            return 0.0
        return sum(self.peak.get(k, 0) for k in keys) / len(keys)


@dataclass
class MetricsRecord:
    seed: int
    mode: str
    mobility: str
    density: int
    cl: int
    config_id: str
    pfr: float
    efr: float | None
    ct_s: float
    mu_bytes: float
    cycles: int
    requests: int = 0
    completed: int = 0
    exec_failures: int = 0
    duplicates: int = 0
    audit_failures: int = 0
    peak_wm: int = 0
    replans: int = 0
    switch_checks: list = field(default_factory=list)
    failover: dict = field(default_factory=dict)

    def row(self) -> list[str]:
        return [str(self.seed), self.mode, self.mobility, str(self.density), str(self.cl),
                self.config_id, _fmt(self.pfr), "NA" if self.efr is None else _fmt(self.efr),
                _fmt(self.ct_s), _fmt(self.mu_bytes), str(self.cycles)]


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def rate(num: int, den: int, what: str) -> float:
    if den == 0:
        warnings.warn(f"{what}: zero denominator, reported as 0", RuntimeWarning, stacklevel=2)
        return 0.0
    return num / den


def to_csv(records: Sequence[MetricsRecord], header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def write_csv(records: Sequence[MetricsRecord], path: str | Path) -> None:
    Path(path).write_text(to_csv(records))


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and list(rows[0]) != CSV_COLUMNS:
        raise ValueError(f"{path}: unexpected columns {list(rows[0])}")
    return rows


def mean(xs: Iterable[float]) -> float:
    xs = list(xs)
    return math.fsum(xs) / len(xs) if xs else float("nan")


AGG_KEYS = ("mode", "mobility", "density", "CL", "config-id")


def aggregate(rows: Iterable[dict]) -> list[dict]:
    """Mean PFR/EFR/CT/MU per (mode, mobility, density, CL, config-id) cell, sorted."""
    cells: dict[tuple, list[dict]] = defaultdict(list)
    for r in rows:
        cells[tuple(r[k] for k in AGG_KEYS)].append(r)
    out = []
    mob_order = {"slow": 0, "medium": 1, "fast": 2}
    for key in sorted(cells, key=lambda k: (k[0], k[4], int(k[3]), mob_order.get(k[1], 9), int(k[2]))):
        rs = cells[key]
        efrs = [float(r["EFR"]) for r in rs if r["EFR"] != "NA"]
        out.append({**dict(zip(AGG_KEYS, key)), "runs": len(rs),
                    "PFR": mean(float(r["PFR"]) for r in rs),
                    "EFR": mean(efrs) if efrs else None,
                    "CT_s": mean(float(r["CT_s"]) for r in rs if r["EFR"] != "NA") if efrs else None,
                    "MU_bytes": mean(float(r["MU_bytes"]) for r in rs)})
    return out


def format_report(cells: Sequence[dict]) -> str:
    lines = ["mode          config CL  mobility density runs   PFR%    EFR%   CT_s   MU_bytes"]
    for c in cells:
        efr = "    NA" if c["EFR"] is None else f"{100 * c['EFR']:6.1f}"
        ct = "   NA" if c["CT_s"] is None else f"{c['CT_s']:5.2f}"
        lines.append(f"{c['mode']:<13} {c['config-id']:<6} {c['CL']:>3} {c['mobility']:<8} "
                     f"{c['density']:>7} {c['runs']:>4} {100 * c['PFR']:6.1f}  {efr}  {ct} "
                     f"{c['MU_bytes']:10.1f}")
    return "\n".join(lines) + "\n"
