"""Naive per-pixel reference implementations of the matching kernels.

Deliberately simple: plain Python loops over unpacked pixel lists, one
pixel at a time, no byte tricks.  These exist to cross-check the packed
kernels in :mod:`irisfuse.bitmatch` bit for bit and to keep hand-worked
examples readable; they are far too slow for real scoring.

The score-from-counts expressions are written with the same operation
order as the packed kernels so agreement is exact, not approximate;
only the counting route differs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .bitmatch import DEFAULT_ALPHA, DEFAULT_POLICY, EmptyJointMaskError, ShiftPolicy
from .templates import IrisTemplate, pack_template


def _pixel_lists(t: IrisTemplate) -> tuple[list[list[int]], list[list[int]]]:
    return t.unpack_bits().tolist(), t.unpack_mask().tolist()


def _counts_at_shift(bits_a, mask_a, bits_b, mask_b, shift: int, width: int):
    """(ones_agree, zeros_agree, disagree, joint_valid) at one shift."""
    ones = zeros = disagree = valid = 0
    for row_a, row_ma, row_b, row_mb in zip(bits_a, mask_a, bits_b, mask_b):
        for j in range(width):
            jj = (j + shift) % width
            if row_ma[j] and row_mb[jj]:
                valid += 1
                va = row_a[j]
                vb = row_b[jj]
                if va == vb:
                    if va:
                        ones += 1
                    else:
                        zeros += 1
                else:
                    disagree += 1
    return ones, zeros, disagree, valid


def _unmasked_counts_at_shift(bits_a, bits_b, shift: int, width: int):
    ones = zeros = disagree = 0
    for row_a, row_b in zip(bits_a, bits_b):
        for j in range(width):
            va = row_a[j]
            vb = row_b[(j + shift) % width]
            if va == vb:
                if va:
                    ones += 1
                else:
                    zeros += 1
            else:
                disagree += 1
    return ones, zeros, disagree


def naive_masked_hamming(
    a: IrisTemplate, b: IrisTemplate, policy: ShiftPolicy = DEFAULT_POLICY
) -> tuple[float, int, int]:
    """Per-pixel mirror of :func:`irisfuse.bitmatch.masked_hamming`."""
    bits_a, mask_a = _pixel_lists(a)
    bits_b, mask_b = _pixel_lists(b)
    best = None
    for s in policy.shifts():
        _, _, disagree, valid = _counts_at_shift(
            bits_a, mask_a, bits_b, mask_b, s, a.width
        )
        if valid == 0:
            continue
        hd = disagree / valid
        if best is None or hd < best[0]:
            best = (hd, s, valid)
    if best is None:
        raise EmptyJointMaskError("no jointly valid pixels at any candidate shift")
    return best


def naive_weighted_similarity(
    a: IrisTemplate,
    b: IrisTemplate,
    alpha: float = DEFAULT_ALPHA,
    policy: ShiftPolicy = DEFAULT_POLICY,
    unmasked: bool = False,
) -> tuple[float, int]:
    """Per-pixel mirror of :func:`irisfuse.bitmatch.weighted_similarity`."""
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie strictly inside (0, 2), got {alpha}")
    bits_a, mask_a = _pixel_lists(a)
    bits_b, mask_b = _pixel_lists(b)
    best = None
    for s in policy.shifts():
        if unmasked:
            ones, zeros, _ = _unmasked_counts_at_shift(bits_a, bits_b, s, a.width)
            score = ((2.0 - alpha) * ones + alpha * zeros) / a.n_pixels
        else:
            ones, zeros, _, valid = _counts_at_shift(
                bits_a, mask_a, bits_b, mask_b, s, a.width
            )
            if valid == 0:
                continue
            score = ((2.0 - alpha) * ones + alpha * zeros) / valid
        if best is None or score > best[0]:
            best = (score, s)
    if best is None:
        raise EmptyJointMaskError("no jointly valid pixels at any candidate shift")
    return best


def _joint_pixel_counts(a: IrisTemplate, b: IrisTemplate):
    """Shift-0 white/black tallies over jointly valid pixels."""
    bits_a, mask_a = _pixel_lists(a)
    bits_b, mask_b = _pixel_lists(b)
    both_white = white_a = white_b = 0
    both_black = black_a = black_b = 0
    for row_a, row_ma, row_b, row_mb in zip(bits_a, mask_a, bits_b, mask_b):
        for va, ma, vb, mb in zip(row_a, row_ma, row_b, row_mb):
            if not (ma and mb):
                continue
            white_a += va
            white_b += vb
            black_a += 1 - va
            black_b += 1 - vb
            if va and vb:
                both_white += 1
            elif not va and not vb:
                both_black += 1
    return both_white, white_a, white_b, both_black, black_a, black_b


def naive_white_match_rate(a: IrisTemplate, b: IrisTemplate) -> float:
    both_white, white_a, white_b, _, _, _ = _joint_pixel_counts(a, b)
    if white_a + white_b == 0:
        raise ValueError("white match rate undefined: no jointly valid white pixels")
    return 2.0 * both_white / (white_a + white_b)


def naive_black_match_rate(a: IrisTemplate, b: IrisTemplate) -> float:
    _, _, _, both_black, black_a, black_b = _joint_pixel_counts(a, b)
    if black_a + black_b == 0:
        raise ValueError("black match rate undefined: no jointly valid black pixels")
    return 2.0 * both_black / (black_a + black_b)


def naive_mask_rate(a: IrisTemplate, b: IrisTemplate) -> tuple[float, float, float]:
    _, mask_a = _pixel_lists(a)
    _, mask_b = _pixel_lists(b)
    joint = valid_a = valid_b = 0
    for row_ma, row_mb in zip(mask_a, mask_b):
        for ma, mb in zip(row_ma, row_mb):
            valid_a += ma
            valid_b += mb
            if ma and mb:
                joint += 1
    n = a.n_pixels
    return joint / n, valid_a / n, valid_b / n


# ---------------------------------------------------------------------------
# Equivalence suite: packed kernels vs this module on seeded random pairs.

# (height, width, max_shift, step, mask density) buckets; the big
# 64 x 512 rows keep the per-pixel side affordable via coarser shifts.
_SUITE_BUCKETS = (
    (4, 4, 1, 1, 0.15, 60),  # sparse masks: exercises empty-joint handling
    (4, 4, 2, 1, 0.9, 324),
    (5, 7, 3, 1, 0.8, 160),
    (8, 8, 4, 1, 0.7, 160),
    (8, 32, 6, 2, 0.8, 160),
    (16, 64, 8, 2, 0.75, 120),
    (32, 128, 8, 4, 0.8, 64),
    (64, 512, 8, 4, 0.85, 12),
    (64, 512, 16, 1, 0.9, 4),
)

_SUITE_ALPHAS = (0.3, 1.0, 0.5, 1.7)


@dataclass(frozen=True)
class EquivalenceReport:
    pairs_checked: int
    mismatches: int
    unusable_pairs: int
    elapsed_seconds: float

    @property
    def passed(self) -> bool:
        return self.mismatches == 0 and self.pairs_checked > 0


def _random_template(rng: np.random.Generator, h: int, w: int, density: float):
    bits = (rng.random((h, w)) < 0.5).astype(np.uint8)
    mask = (rng.random((h, w)) < density).astype(np.uint8)
    return pack_template(bits, mask, h, w)


def run_equivalence_suite(seed: int = 0, scale: int = 1) -> EquivalenceReport:
    """Compare every kernel against its per-pixel mirror on random pairs.

    Checks masked Hamming, weighted similarity (masked and unmasked),
    white/black match rates and mask rates for exact equality, including
    the selected shifts.  ``scale`` multiplies the per-bucket pair counts.
    Unusable pairs (empty joint mask everywhere) must raise on both
    routes to count as agreement.
    """
    from . import bitmatch

    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    checked = mismatches = unusable = 0
    for h, w, max_shift, step, density, count in _SUITE_BUCKETS:
        policy = ShiftPolicy(max_shift=max_shift, step=step)
        for i in range(count * scale):
            a = _random_template(rng, h, w, density)
            b = _random_template(rng, h, w, density)
            alpha = _SUITE_ALPHAS[i % len(_SUITE_ALPHAS)]
            ok = True
            try:
                fast_hd = bitmatch.masked_hamming(a, b, policy)
            except EmptyJointMaskError:
                fast_hd = None
            try:
                slow_hd = naive_masked_hamming(a, b, policy)
            except EmptyJointMaskError:
                slow_hd = None
            ok &= fast_hd == slow_hd
            if fast_hd is None:
                unusable += 1
            for unmasked in (False, True):
                try:
                    fast_ws = bitmatch.weighted_similarity(
                        a, b, alpha, policy, unmasked=unmasked
                    )
                except EmptyJointMaskError:
                    fast_ws = None
                try:
                    slow_ws = naive_weighted_similarity(
                        a, b, alpha, policy, unmasked=unmasked
                    )
                except EmptyJointMaskError:
                    slow_ws = None
                ok &= fast_ws == slow_ws
            for fast_fn, slow_fn in (
                (bitmatch.white_match_rate, naive_white_match_rate),
                (bitmatch.black_match_rate, naive_black_match_rate),
            ):
                try:
                    fast_rate = fast_fn(a, b)
                except ValueError:
                    fast_rate = None
                try:
                    slow_rate = slow_fn(a, b)
                except ValueError:
                    slow_rate = None
                ok &= fast_rate == slow_rate
            ok &= bitmatch.mask_rate(a, b) == naive_mask_rate(a, b)
            checked += 1
            if not ok:
                mismatches += 1
    return EquivalenceReport(
        pairs_checked=checked,
        mismatches=mismatches,
        unusable_pairs=unusable,
        elapsed_seconds=time.perf_counter() - start,
    )
