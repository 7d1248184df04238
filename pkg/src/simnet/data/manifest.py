"""Dataset manifests: line-delimited JSON records tying images, masks, point
clouds and labels together.

Record keys: id, image, mask, cloud, label, split.  Relative paths are
resolved against the manifest's directory, so generated dataset trees stay
relocatable.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError


@dataclass
class SampleRecord:
    id: str
    image: str
    mask: str
    cloud: str
    label: int
    split: str


@dataclass
class Manifest:
    records: list
    base_dir: Path

    def __len__(self):
        return len(self.records)

    def split(self, name: str) -> list:
        return [r for r in self.records if r.split == name]

    def resolve(self, rel_path: str) -> Path:
        p = Path(rel_path)
        return p if p.is_absolute() else self.base_dir / p

    def labels(self, split: str | None = None) -> np.ndarray:
        records = self.records if split is None else self.split(split)
        return np.array([r.label for r in records], dtype=np.int64)


def write_manifest(records, path):
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(asdict(rec), sort_keys=True) + "\n")


def read_manifest(path) -> Manifest:
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                records.append(SampleRecord(
                    id=str(obj["id"]), image=str(obj["image"]), mask=str(obj["mask"]),
                    cloud=str(obj["cloud"]), label=int(obj["label"]), split=str(obj["split"]),
                ))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise DataError(f"{path}:{line_no}: bad manifest record ({exc})") from exc
    return Manifest(records=records, base_dir=path.parent)


def split_manifest(manifest: Manifest, seed: int, val_fraction: float = 0.2) -> tuple[list, list]:
    """Stratified train/val split, deterministic under the seed.

    Per-label ratios are preserved within one sample; the returned records
    carry updated ``split`` fields.
    """
    if not manifest.records:
        raise DataError("cannot split an empty manifest")
    by_label: dict[int, list] = {}
    for rec in manifest.records:
        by_label.setdefault(rec.label, []).append(rec)
    rng = np.random.default_rng(seed)
    train, val = [], []
    for label in sorted(by_label):
        group = by_label[label]
        if len(group) < 2:
            raise DataError(f"label {label} has {len(group)} sample(s); need >= 2 to stratify")
        order = rng.permutation(len(group))
        n_val = max(1, int(round(len(group) * val_fraction)))
        for pos, idx in enumerate(order):
            rec = group[idx]
            name = "val" if pos < n_val else "train"
            (val if pos < n_val else train).append(SampleRecord(
                rec.id, rec.image, rec.mask, rec.cloud, rec.label, name))
    return train, val
