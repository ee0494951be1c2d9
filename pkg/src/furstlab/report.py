"""Report rows: append-only delimited text plus structured records.

Rows are keyed by a content hash of the semantic run configuration
(ensemble document, command, seed, budgets), so identical runs are
recognizable and bit-identical.  Decimals are written with 17
significant digits.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

SCHEMA_VERSION = 1

TSV_COLUMNS = ("run_id", "command", "quantity", "value", "stderr",
               "metadata")


def fmt17(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def config_hash(payload: dict) -> str:
    """Hex digest of the canonical JSON form of a config payload."""
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ReportRow:
    run_id: str
    command: str
    quantity: str
    value: float | None
    stderr: float | None = None
    metadata: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "run_id": self.run_id,
                "command": self.command, "quantity": self.quantity,
                "value": fmt17(self.value), "stderr": fmt17(self.stderr),
                "metadata": self.metadata}

    def to_tsv(self) -> str:
        meta = json.dumps(self.metadata, sort_keys=True,
                          separators=(",", ":"))
        return "\t".join([self.run_id, self.command, self.quantity,
                          fmt17(self.value), fmt17(self.stderr), meta])


class ReportWriter:
    """Appends rows to report.tsv and report.jsonl under out_dir."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.tsv_path = os.path.join(out_dir, "report.tsv")
        self.jsonl_path = os.path.join(out_dir, "report.jsonl")

    def write_rows(self, rows) -> None:
        new_tsv = not os.path.exists(self.tsv_path)
        with open(self.tsv_path, "a", encoding="utf-8") as fh:
            if new_tsv:
                fh.write("\t".join(TSV_COLUMNS) + "\n")
            for row in rows:
                fh.write(row.to_tsv() + "\n")
        with open(self.jsonl_path, "a", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row.to_record(), sort_keys=True,
                                    separators=(",", ":")) + "\n")


def read_report(out_dir: str) -> list[dict]:
    path = os.path.join(out_dir, "report.jsonl")
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows
