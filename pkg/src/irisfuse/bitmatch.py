"""Bit-packed comparison kernels for masked binary iris templates.

Scores are searched over a set of candidate horizontal rotations of the
second template (circular column shifts, the usual compensation for eye
rotation).  A shift ``s`` aligns pixel ``(i, j)`` of the first template
with pixel ``(i, (j + s) mod W)`` of the second.  Candidate shifts are
ranked by ``(|s|, s)``, so score ties resolve to the smallest magnitude
with negative before positive.

Scoring rules:

* masked Hamming distance: fraction of disagreeing bits over the
  jointly valid pixels, minimised over shifts.
* weighted similarity: a 1-1 agreement contributes ``2 - alpha``, a 0-0
  agreement contributes ``alpha``, a disagreement contributes 0; the sum
  over jointly valid pixels is divided by the jointly valid count and
  maximised over shifts.  ``alpha < 1`` favours co-occurring white
  pixels, ``alpha = 1`` makes the score exactly ``1 - Hamming``.
* white / black matching rates and mask rates are diagnostic statistics
  computed at shift 0 only.

Everything here operates on the packed byte planes via XOR/AND plus
popcount and never touches individual pixels; :mod:`irisfuse.reference`
holds deliberately naive per-pixel implementations used to cross-check
these kernels bit for bit.  All functions are pure and thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .templates import IrisTemplate

DEFAULT_ALPHA = 0.3


class EmptyJointMaskError(ValueError):
    """No jointly valid pixels at any candidate shift; the pair is unusable."""


@dataclass(frozen=True)
class ShiftPolicy:
    """Candidate horizontal rotations searched when aligning two templates."""

    max_shift: int = 16
    step: int = 1

    def __post_init__(self) -> None:
        if self.max_shift < 0:
            raise ValueError(f"max_shift must be >= 0, got {self.max_shift}")
        if self.step < 1:
            raise ValueError(f"step must be >= 1, got {self.step}")
        if self.max_shift % self.step != 0:
            raise ValueError(
                f"max_shift ({self.max_shift}) must be a multiple of step ({self.step})"
            )

    def shifts(self) -> tuple[int, ...]:
        """Candidate shifts ordered by ``(|s|, s)``: 0, -step, +step, ..."""
        out = [0]
        for magnitude in range(self.step, self.max_shift + 1, self.step):
            out.append(-magnitude)
            out.append(magnitude)
        return tuple(out)


DEFAULT_POLICY = ShiftPolicy()


@dataclass(frozen=True)
class IrisMatchResult:
    """Outcome of one template comparison.

    ``best_shift`` and ``joint_valid`` refer to the Hamming-minimising
    alignment; ``ws_score`` is maximised under its own alignment.
    """

    hamming: float
    ws_score: float
    best_shift: int
    joint_valid: int
    mask_rate_a: float
    mask_rate_b: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.hamming <= 1.0:
            raise ValueError(f"hamming must lie in [0, 1], got {self.hamming}")
        if self.joint_valid < 1:
            raise ValueError("joint_valid must be >= 1")
        for name in ("mask_rate_a", "mask_rate_b"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


def _check_same_dims(a: IrisTemplate, b: IrisTemplate) -> None:
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError(
            f"template dimension mismatch: {a.height}x{a.width} vs {b.height}x{b.width}"
        )


def _popcount_rows(packed: np.ndarray) -> np.ndarray:
    return np.bitwise_count(packed).sum(axis=-1, dtype=np.int64)


def _popcount(packed: np.ndarray) -> int:
    return int(np.bitwise_count(packed).sum(dtype=np.int64))


def rotated_planes(
    template: IrisTemplate, policy: ShiftPolicy
) -> tuple[np.ndarray, np.ndarray]:
    """Packed bit and mask planes of ``template`` at every candidate shift.

    Returns two ``(n_shifts, plane_bytes)`` arrays in ``policy.shifts()``
    order.  Row ``k`` holds the template rotated so that column
    ``(j + s_k) mod W`` lands on column ``j``.  Precompute these once per
    template when scoring many pairs against it.
    """
    bits2d = template.unpack_bits()
    mask2d = template.unpack_mask()
    shifts = policy.shifts()
    nbytes = template.packed_bits.shape[0]
    rot_bits = np.empty((len(shifts), nbytes), dtype=np.uint8)
    rot_masks = np.empty((len(shifts), nbytes), dtype=np.uint8)
    for k, s in enumerate(shifts):
        rot_bits[k] = np.packbits(np.roll(bits2d, -s, axis=1))
        rot_masks[k] = np.packbits(np.roll(mask2d, -s, axis=1))
    return rot_bits, rot_masks


def _shift_counts(
    a: IrisTemplate, rot_bits: np.ndarray, rot_masks: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-shift (ones_agree, disagree, joint_valid) counts against ``a``."""
    joint = a.packed_mask[None, :] & rot_masks
    valid = _popcount_rows(joint)
    disagree = _popcount_rows((a.packed_bits[None, :] ^ rot_bits) & joint)
    ones = _popcount_rows(a.packed_bits[None, :] & rot_bits & joint)
    return ones, disagree, valid


def _best_hamming(
    shifts: tuple[int, ...], disagree: np.ndarray, valid: np.ndarray
) -> tuple[float, int, int]:
    usable = valid > 0
    if not usable.any():
        raise EmptyJointMaskError(
            "no jointly valid pixels at any candidate shift"
        )
    hd = np.where(usable, disagree / np.maximum(valid, 1), np.inf)
    k = int(np.argmin(hd))  # shifts are (|s|, s)-ordered: first minimum wins ties
    return float(hd[k]), shifts[k], int(valid[k])


def _best_ws(
    shifts: tuple[int, ...],
    ones: np.ndarray,
    disagree: np.ndarray,
    valid: np.ndarray,
    alpha: float,
) -> tuple[float, int]:
    usable = valid > 0
    if not usable.any():
        raise EmptyJointMaskError(
            "no jointly valid pixels at any candidate shift"
        )
    zeros = valid - ones - disagree
    score = np.where(
        usable,
        ((2.0 - alpha) * ones + alpha * zeros) / np.maximum(valid, 1),
        -np.inf,
    )
    k = int(np.argmax(score))
    return float(score[k]), shifts[k]


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie strictly inside (0, 2), got {alpha}")


def masked_hamming(
    a: IrisTemplate, b: IrisTemplate, policy: ShiftPolicy = DEFAULT_POLICY
) -> tuple[float, int, int]:
    """Minimum normalised masked Hamming distance over candidate shifts.

    Returns ``(distance, best_shift, joint_valid)`` where ``joint_valid``
    counts the jointly valid pixels at the minimising shift.  Shifts with
    an empty joint mask are skipped; raises :class:`EmptyJointMaskError`
    when every shift is empty.
    """
    _check_same_dims(a, b)
    rot_bits, rot_masks = rotated_planes(b, policy)
    _, disagree, valid = _shift_counts(a, rot_bits, rot_masks)
    return _best_hamming(policy.shifts(), disagree, valid)


def weighted_similarity(
    a: IrisTemplate,
    b: IrisTemplate,
    alpha: float = DEFAULT_ALPHA,
    policy: ShiftPolicy = DEFAULT_POLICY,
    unmasked: bool = False,
) -> tuple[float, int]:
    """Maximum weighted-similarity score over candidate shifts.

    With ``unmasked=True`` the masks are ignored and the agreement sum is
    divided by the full pixel count instead of the jointly valid count
    (the literal all-pixel form, kept for comparison).
    """
    _check_alpha(alpha)
    _check_same_dims(a, b)
    rot_bits, rot_masks = rotated_planes(b, policy)
    if unmasked:
        ones = _popcount_rows(a.packed_bits[None, :] & rot_bits)
        disagree = _popcount_rows(a.packed_bits[None, :] ^ rot_bits)
        n = a.n_pixels  # plane padding bits are zero on both sides
        zeros = n - ones - disagree
        score = ((2.0 - alpha) * ones + alpha * zeros) / n
        k = int(np.argmax(score))
        return float(score[k]), policy.shifts()[k]
    ones, disagree, valid = _shift_counts(a, rot_bits, rot_masks)
    return _best_ws(policy.shifts(), ones, disagree, valid, alpha)


def white_match_rate(a: IrisTemplate, b: IrisTemplate) -> float:
    """Co-occurrence rate of white (1) pixels at shift 0.

    ``2 * M_W / (P_W(a) + P_W(b))`` with all counts restricted to the
    jointly valid pixels; raises when neither template has a white pixel
    there.
    """
    _check_same_dims(a, b)
    joint = a.packed_mask & b.packed_mask
    both_white = _popcount(a.packed_bits & b.packed_bits & joint)
    white_a = _popcount(a.packed_bits & joint)
    white_b = _popcount(b.packed_bits & joint)
    if white_a + white_b == 0:
        raise ValueError("white match rate undefined: no jointly valid white pixels")
    return 2.0 * both_white / (white_a + white_b)


def black_match_rate(a: IrisTemplate, b: IrisTemplate) -> float:
    """Co-occurrence rate of black (0) pixels at shift 0; mirror of white."""
    _check_same_dims(a, b)
    joint = a.packed_mask & b.packed_mask
    both_black = _popcount(~(a.packed_bits | b.packed_bits) & joint)
    black_a = _popcount(~a.packed_bits & joint)
    black_b = _popcount(~b.packed_bits & joint)
    if black_a + black_b == 0:
        raise ValueError("black match rate undefined: no jointly valid black pixels")
    return 2.0 * both_black / (black_a + black_b)


def mask_rate(a: IrisTemplate, b: IrisTemplate) -> tuple[float, float, float]:
    """Valid-pixel fractions: (joint at shift 0, template a, template b)."""
    _check_same_dims(a, b)
    n = a.n_pixels
    joint = _popcount(a.packed_mask & b.packed_mask) / n
    return joint, a.valid_count() / n, b.valid_count() / n


def match_with_rotations(
    a: IrisTemplate,
    b: IrisTemplate,
    rot_bits: np.ndarray,
    rot_masks: np.ndarray,
    shifts: tuple[int, ...],
    alpha: float = DEFAULT_ALPHA,
) -> IrisMatchResult:
    """One-pass comparison against precomputed rotations of ``b``.

    The rotation planes must come from :func:`rotated_planes` applied to
    ``b`` with a policy whose ``shifts()`` equals ``shifts``; this is the
    fast path for all-pairs scoring where each template's rotations are
    computed once and reused.
    """
    _check_alpha(alpha)
    _check_same_dims(a, b)
    ones, disagree, valid = _shift_counts(a, rot_bits, rot_masks)
    hamming, best_shift, joint_valid = _best_hamming(shifts, disagree, valid)
    ws_score, _ = _best_ws(shifts, ones, disagree, valid, alpha)
    return IrisMatchResult(
        hamming=hamming,
        ws_score=ws_score,
        best_shift=best_shift,
        joint_valid=joint_valid,
        mask_rate_a=a.valid_count() / a.n_pixels,
        mask_rate_b=b.valid_count() / b.n_pixels,
    )


def match_pair(
    a: IrisTemplate,
    b: IrisTemplate,
    alpha: float = DEFAULT_ALPHA,
    policy: ShiftPolicy = DEFAULT_POLICY,
) -> IrisMatchResult:
    """Compare two templates: masked Hamming, weighted similarity, mask rates."""
    rot_bits, rot_masks = rotated_planes(b, policy)
    return match_with_rotations(a, b, rot_bits, rot_masks, policy.shifts(), alpha)
