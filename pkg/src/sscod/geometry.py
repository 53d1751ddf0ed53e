"""Axis-aligned box overlap: IoU, GIoU and the GIoU regression loss.

Boxes are stored as ``(x, y, w, h)`` with ``(x, y)`` the top-left corner and
are converted to corner form for the overlap arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["BBox", "UndefinedOverlapError", "iou", "giou", "giou_loss"]


class UndefinedOverlapError(ValueError):
    """Raised when both boxes have zero area, so the union is empty."""


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w >= 0 and self.h >= 0):
            raise ValueError(f"box width and height must be >= 0, got w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    def corners(self) -> tuple[float, float, float, float]:
        return self.x, self.y, self.x + self.w, self.y + self.h

    @classmethod
    def from_corners(cls, x1: float, y1: float, x2: float, y2: float) -> "BBox":
        return cls(x1, y1, x2 - x1, y2 - y1)

    def shifted(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x + dx, self.y + dy, self.w, self.h)


def _overlap(a: BBox, b: BBox) -> tuple[float, float, float]:
    """Return (intersection, union, enclosing hull area)."""
    ax1, ay1, ax2, ay2 = a.corners()
    bx1, by1, bx2, by2 = b.corners()
    iw = max(0.0, min(ax2, bx2) - max(ax1, bx1))
    ih = max(0.0, min(ay2, by2) - max(ay1, by1))
    inter = min(iw * ih, a.area, b.area)  # corner rounding can exceed w*h
    union = a.area + b.area - inter
    hull = (max(ax2, bx2) - min(ax1, bx1)) * (max(ay2, by2) - min(ay1, by1))
    return inter, union, hull


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union.

    A zero-area box against a positive-area box gives 0. Two zero-area
    boxes raise :class:`UndefinedOverlapError`.
    """
    if a.area <= 0 and b.area <= 0:
        raise UndefinedOverlapError("IoU is undefined for two zero-area boxes")
    inter, union, _ = _overlap(a, b)
    return inter / union


def giou(a: BBox, b: BBox) -> float:
    if a.area <= 0 and b.area <= 0:
        raise UndefinedOverlapError("GIoU is undefined for two zero-area boxes")
    inter, union, hull = _overlap(a, b)
    # the hull contains the union; clamp rounding so giou never exceeds iou
    return inter / union - max(hull - union, 0.0) / hull


def giou_loss(a: BBox, b: BBox) -> float:
    """``1 - giou(a, b)``, in [0, 2]."""
    return 1.0 - giou(a, b)
