"""Readers and writers for the command-line file formats (see SCHEMAS.md).

Every file written here starts with a ``#`` provenance line carrying the
tool version and a hash of the resolved config. Readers skip ``#`` lines.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable

from . import __version__
from .detection import Detection, Embedding
from .evaluation import ClassProbBox
from .geometry import BBox
from .sampling import AnnotatedImage, Annotation

__all__ = [
    "FormatError",
    "config_hash",
    "header_line",
    "load_config",
    "read_annotations",
    "read_detection_dump",
    "write_text",
]


class FormatError(ValueError):
    """Malformed input record; ``lineno`` is 1-based."""

    def __init__(self, path, lineno: int, message: str):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def header_line(config: dict) -> str:
    return f"# sscod {__version__} config_sha256={config_hash(config)}"


def write_text(path, config: dict, lines: Iterable[str]) -> None:
    body = "\n".join([header_line(config), *lines]) + "\n"
    Path(path).write_text(body, encoding="utf-8", newline="\n")


def load_config(path) -> dict:
    """Flat JSON object; nested values are rejected."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise FormatError(path, 1, "config must be a JSON object")
    for key, value in data.items():
        if isinstance(value, dict):
            raise FormatError(path, 1, f"config key {key!r}: nested objects are not allowed")
    return data


def _records(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            try:
                rec = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise FormatError(path, lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(rec, dict):
                raise FormatError(path, lineno, "record must be a JSON object")
            yield lineno, rec


def _box(rec: dict, path, lineno) -> BBox:
    try:
        return BBox(float(rec["x"]), float(rec["y"]), float(rec["w"]), float(rec["h"]))
    except KeyError as exc:
        raise FormatError(path, lineno, f"missing box field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise FormatError(path, lineno, f"bad box: {exc}") from None


def read_annotations(path) -> list[AnnotatedImage]:
    """One JSON object per line:
    ``{"image_id": ..., "annotations": [{"category": int, "x", "y", "w", "h"}]}``."""
    images, seen = [], set()
    for lineno, rec in _records(path):
        if "image_id" not in rec:
            raise FormatError(path, lineno, "missing 'image_id'")
        image_id = rec["image_id"]
        if image_id in seen:
            raise FormatError(path, lineno, f"duplicate image_id {image_id!r}")
        seen.add(image_id)
        anns = rec.get("annotations", [])
        if not isinstance(anns, list):
            raise FormatError(path, lineno, "'annotations' must be a list")
        parsed = []
        for ann in anns:
            if not isinstance(ann, dict) or not isinstance(ann.get("category"), int):
                raise FormatError(path, lineno, "each annotation needs an integer 'category'")
            parsed.append(Annotation(ann["category"], _box(ann, path, lineno)))
        images.append(AnnotatedImage(image_id, tuple(parsed)))
    return images


def read_detection_dump(path, mode: str) -> list[tuple[object, list]]:
    """Per-image detections, one JSON object per line:
    ``{"image_id": ..., "detections": [...]}``.

    In ``sscod`` mode each detection carries ``objectness``,
    ``centeredness`` and ``embedding``; in the matching baselines it
    carries ``probs``.
    """
    out = []
    dim = None
    for lineno, rec in _records(path):
        if "image_id" not in rec:
            raise FormatError(path, lineno, "missing 'image_id'")
        dets = []
        for d in rec.get("detections", []):
            if not isinstance(d, dict):
                raise FormatError(path, lineno, "each detection must be an object")
            box = _box(d, path, lineno)
            try:
                if mode == "sscod":
                    emb = Embedding(d["embedding"])
                    if dim is None:
                        dim = emb.dim
                    elif emb.dim != dim:
                        raise FormatError(path, lineno, f"embedding dimension {emb.dim} != {dim}")
                    dets.append(Detection(box, float(d["objectness"]), float(d["centeredness"]), emb))
                else:
                    dets.append(ClassProbBox(box, tuple(d["probs"])))
            except KeyError as exc:
                raise FormatError(path, lineno, f"missing detection field {exc.args[0]!r}") from None
            except FormatError:
                raise
            except (TypeError, ValueError) as exc:
                raise FormatError(path, lineno, str(exc)) from None
        out.append((rec["image_id"], dets))
    return out
