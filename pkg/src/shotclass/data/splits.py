"""Deterministic train/val/test partitioning.

Two strategies over the same quota rule:

* stratified: each class is shuffled and partitioned independently so every
  class lands in every split at (near) the requested ratios.
* grouped: all clips of one player stay in one split (prevents a player's
  near-identical repetitions from leaking across the boundary). Players are
  dealt greedily to whichever split is furthest below its quota.

Quotas use floored shares plus largest-remainder rounding; remainder ties go
to the earlier split in (train, val, test) order. Shuffles come from
``np.random.default_rng([seed, class_index])`` so adding a class never
reshuffles the others.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .manifest import DatasetManifest, ManifestError, VideoRecord

__all__ = ["SplitError", "split_quota", "assign_splits"]

SPLIT_ORDER = ("train", "val", "test")


class SplitError(ValueError):
    pass


def _check_ratios(ratios) -> tuple[float, float, float]:
    if len(ratios) != 3:
        raise SplitError(f"expected 3 ratios (train, val, test), got {len(ratios)}")
    train, val, test = (float(r) for r in ratios)
    for name, r in zip(SPLIT_ORDER, (train, val, test)):
        if r < 0:
            raise SplitError(f"{name} ratio must be >= 0, got {r}")
    total = train + val + test
    if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
        raise SplitError(f"ratios must sum to 1, got {total}")
    return train, val, test


def split_quota(n: int, ratios) -> tuple[int, int, int]:
    """Integer split sizes for n items at the given (train, val, test) ratios.

    Floor each share, then hand the leftover items to the splits with the
    largest fractional remainders, earlier split winning ties. Shares are
    computed in exact arithmetic on the decimal form of each ratio, so 0.7
    of 165 really ties 0.1 of 165 instead of losing by one float ulp. The
    three counts always sum to n exactly.
    """
    if n < 0:
        raise SplitError(f"n must be >= 0, got {n}")
    ratios = _check_ratios(ratios)
    shares = [n * Fraction(str(r)) for r in ratios]
    counts = [int(s) for s in shares]  # Fraction truncates toward zero; shares >= 0
    leftover = n - sum(counts)
    # sort by remainder descending, index ascending for ties
    order = sorted(range(3), key=lambda i: (-(shares[i] - counts[i]), i))
    for i in order[:leftover]:
        counts[i] += 1
    return counts[0], counts[1], counts[2]


def _stratified(manifest: DatasetManifest, ratios, seed: int) -> dict[str, str]:
    assignment: dict[str, str] = {}
    for class_index, class_name in enumerate(manifest.classes):
        recs = [r for r in manifest.records if r.class_label == class_name]
        recs.sort(key=lambda r: r.id)
        rng = np.random.default_rng([seed, class_index])
        perm = rng.permutation(len(recs))
        shuffled = [recs[i] for i in perm]
        n_train, n_val, n_test = split_quota(len(recs), ratios)
        for i, rec in enumerate(shuffled):
            if i < n_train:
                assignment[rec.id] = "train"
            elif i < n_train + n_val:
                assignment[rec.id] = "val"
            else:
                assignment[rec.id] = "test"
    return assignment


def _grouped(manifest: DatasetManifest, ratios, seed: int) -> dict[str, str]:
    by_player: dict[str, list[VideoRecord]] = {}
    for rec in manifest.records:
        if not rec.player_id:
            raise SplitError(f"record {rec.id!r} has no player id; grouped split needs one")
        by_player.setdefault(rec.player_id, []).append(rec)

    players = sorted(by_player)
    rng = np.random.default_rng([seed, len(manifest.classes)])
    perm = rng.permutation(len(players))
    # biggest groups first so small ones can patch the remaining deficits
    ordered = sorted(
        (players[i] for i in perm),
        key=lambda p: -len(by_player[p]),
    )

    total = len(manifest.records)
    targets = split_quota(total, ratios)
    filled = [0, 0, 0]
    assignment: dict[str, str] = {}
    for player in ordered:
        group = by_player[player]
        # deficit = how far below target; largest deficit takes the group
        deficits = [targets[i] - filled[i] for i in range(3)]
        pick = max(range(3), key=lambda i: (deficits[i], -i))
        filled[pick] += len(group)
        for rec in group:
            assignment[rec.id] = SPLIT_ORDER[pick]
    return assignment


def assign_splits(
    manifest: DatasetManifest,
    ratios=(0.7, 0.2, 0.1),
    seed: int = 0,
    strategy: str = "stratified",
) -> DatasetManifest:
    """Return a copy of the manifest with every record assigned a split.

    ``strategy`` is "stratified" (per class) or "grouped" (per player). Both
    are fully reproducible for a given (seed, manifest) pair.
    """
    _check_ratios(ratios)
    if not manifest.records:
        raise ManifestError("cannot split an empty manifest")
    if strategy == "stratified":
        assignment = _stratified(manifest, ratios, seed)
    elif strategy == "grouped":
        assignment = _grouped(manifest, ratios, seed)
    else:
        raise SplitError(f"unknown split strategy {strategy!r}")
    return manifest.with_splits(assignment)
