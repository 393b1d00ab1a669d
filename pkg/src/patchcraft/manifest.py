"""Line-delimited JSON manifest of training pairs.

One record per input/target pair; stages append fields (s_yr after `cov`,
retained after `filter`) without touching the rest, so the manifest stays
diff-friendly between pipeline steps.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

__all__ = ["PairRecord", "read_manifest", "write_manifest"]


@dataclass(frozen=True)
class PairRecord:
    input: str
    targets: tuple
    offset_used: tuple = (0, 0)
    s_yr: float | None = None
    retained: bool | None = None
    seed_trail: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "offset_used", tuple(self.offset_used))
        object.__setattr__(self, "seed_trail", tuple(self.seed_trail))

    def with_s_yr(self, value: float) -> "PairRecord":
        return replace(self, s_yr=float(value))

    def with_retained(self, value: bool) -> "PairRecord":
        return replace(self, retained=bool(value))

    def to_json(self) -> str:
        raw = asdict(self)
        raw["targets"] = list(self.targets)
        raw["offset_used"] = list(self.offset_used)
        raw["seed_trail"] = list(self.seed_trail)
        return json.dumps(raw, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "PairRecord":
        raw = json.loads(line)
        return cls(
            input=raw["input"],
            targets=tuple(raw["targets"]),
            offset_used=tuple(raw.get("offset_used", (0, 0))),
            s_yr=raw.get("s_yr"),
            retained=raw.get("retained"),
            seed_trail=tuple(raw.get("seed_trail", ())),
        )


def read_manifest(path) -> list:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(PairRecord.from_json(line))
    return records


def write_manifest(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
