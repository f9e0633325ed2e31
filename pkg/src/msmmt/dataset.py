"""Dataset manifests and the pooled three-class relabeling.

A manifest is a JSON list of clip records; each record points at a clip file
and carries subject id, class label, source tag, and the expression interval
indices. The relabeling collapses source-specific emotion labels into
positive / negative / surprise for pooled cross-dataset runs.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

__all__ = [
    "ManifestEntry",
    "load_manifest",
    "save_manifest",
    "cde_relabel",
    "CDE_CLASSES",
    "DEFAULT_CDE_MAPPING",
    "UnmappedLabelError",
]

CDE_CLASSES = ("positive", "negative", "surprise")

DEFAULT_CDE_MAPPING = {
    "happiness": "positive",
    "disgust": "negative",
    "repression": "negative",
    "anger": "negative",
    "sadness": "negative",
    "fear": "negative",
    "contempt": "negative",
    "surprise": "surprise",
    # pooled labels pass through unchanged
    "positive": "positive",
    "negative": "negative",
}


class UnmappedLabelError(KeyError):
    """An emotion label with no entry in the relabeling table."""


@dataclass
class ManifestEntry:
    clip_path: str
    subject_id: str
    label: int
    source: str
    onset: int
    apex: int
    offset: int
    landmarks_path: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["landmarks_path"] is None:
            d.pop("landmarks_path")
        return d


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    records = json.loads(Path(path).read_text())
    if not isinstance(records, list):
        raise ValueError(f"{path}: manifest must be a JSON list")
    entries = []
    for i, rec in enumerate(records):
        try:
            entries.append(ManifestEntry(**rec))
        except TypeError as exc:
            raise ValueError(f"{path}: bad manifest record {i}: {exc}") from exc
    return entries


def save_manifest(entries: list[ManifestEntry], path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps([e.to_dict() for e in entries], indent=2, sort_keys=True))
    os.replace(tmp, path)


def cde_relabel(
    emotion: str, source: str, mapping: dict[str, str] | None = None
) -> str:
    """Map a source emotion label to one of positive / negative / surprise."""
    table = DEFAULT_CDE_MAPPING if mapping is None else mapping
    key = emotion.strip().lower()
    if key not in table:
        raise UnmappedLabelError(f"unmapped label '{emotion}' (source {source})")
    out = table[key]
    if out not in CDE_CLASSES:
        raise ValueError(f"mapping sends '{emotion}' to unknown class '{out}'")
    return out


def load_cde_mapping(path: str | Path) -> dict[str, str]:
    table = json.loads(Path(path).read_text())
    if not isinstance(table, dict):
        raise ValueError(f"{path}: relabeling table must be a JSON object")
    return {str(k).lower(): str(v).lower() for k, v in table.items()}
