"""Image pairing and batch sampling for common-object training data.

Three strategies: an offline list of every image pair sharing a category,
a per-category image index, and a base-class batch sampler built on that
index. ``sample_gt_pairs`` draws the ground-truth box pairs used by the
evaluation protocol.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Hashable, Optional, Sequence

from .geometry import BBox
from .numerics import Rng

__all__ = [
    "Annotation",
    "AnnotatedImage",
    "build_pair_list",
    "build_class_index",
    "choose_base_class",
    "sample_batch",
    "sample_gt_pairs",
]


@dataclass(frozen=True)
class Annotation:
    category: int
    box: BBox


@dataclass(frozen=True)
class AnnotatedImage:
    image_id: Hashable
    annotations: tuple = ()

    @property
    def categories(self) -> frozenset:
        return frozenset(a.category for a in self.annotations)


def _check_unique_ids(dataset):
    seen = set()
    for img in dataset:
        if img.image_id in seen:
            raise ValueError(f"duplicate image_id {img.image_id!r}")
        seen.add(img.image_id)


def build_pair_list(dataset: Sequence[AnnotatedImage]) -> list[tuple]:
    """Every unordered image pair (in dataset order) with a common category."""
    _check_unique_ids(dataset)
    cats = [img.categories for img in dataset]
    pairs = []
    for i in range(len(dataset)):
        for j in range(i + 1, len(dataset)):
            if cats[i] & cats[j]:
                pairs.append((dataset[i].image_id, dataset[j].image_id))
    return pairs


def build_class_index(dataset: Sequence[AnnotatedImage]) -> dict:
    """Map each category (sorted) to the ids of images containing it, in
    dataset order, each id at most once."""
    _check_unique_ids(dataset)
    index: dict = {}
    for img in dataset:
        for c in sorted(img.categories):
            index.setdefault(c, []).append(img.image_id)
    return {c: index[c] for c in sorted(index)}


def choose_base_class(index: dict):
    """Category with the most images; ties go to the smallest category."""
    if not index:
        raise ValueError("cannot choose a base class from an empty index")
    return max(sorted(index), key=lambda c: len(index[c]))


def sample_batch(
    index: dict,
    dataset: Sequence[AnnotatedImage],
    batch_size: int,
    rng: Rng,
    base_class=None,
    max_retries: int = 100,
) -> list[tuple]:
    """Draw up to ``batch_size`` image pairs anchored on the base class.

    For each slot: pick ``I1`` among the base-class images, a category
    ``c != base`` present in ``I1``, then ``I2`` among the images of ``c``.
    A draw with no such ``c`` or with ``I1 == I2`` is retried, up to
    ``max_retries`` attempts per slot, after which the slot is skipped.
    """
    if base_class is None:
        base_class = choose_base_class(index)
    if not index.get(base_class):
        raise ValueError(f"base class {base_class!r} has no images in the index")
    cats_of = {img.image_id: img.categories for img in dataset}
    batch = []
    for _ in range(batch_size):
        for _attempt in range(max_retries):
            i1 = rng.choice(index[base_class])
            others = sorted(cats_of[i1] - {base_class})
            if not others:
                continue
            c = rng.choice(others)
            i2 = rng.choice(index[c])
            if i1 != i2:
                batch.append((i1, i2))
                break
    if batch_size > 0 and not batch:
        warnings.warn(
            f"sample_batch produced no pairs: no base-class image shares a second category "
            f"(base={base_class!r}, retries={max_retries})",
            RuntimeWarning,
            stacklevel=2,
        )
    return batch


def sample_gt_pairs(
    image_pair: tuple[AnnotatedImage, AnnotatedImage], p: int, rng: Rng
) -> list[tuple[int, int]]:
    """Up to ``p`` cross-image box pairs of equal category, drawn uniformly
    without replacement and returned sorted. Fewer than ``p`` valid pairs
    means all of them are returned."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a, b = image_pair
    valid = [
        (ia, ib)
        for ia, ann_a in enumerate(a.annotations)
        for ib, ann_b in enumerate(b.annotations)
        if ann_a.category == ann_b.category
    ]
    return sorted(rng.sample(valid, p))
