"""Command-line pipeline: synth, match, fuse-train, score, eval, checks.

Every command is deterministic for fixed flags and seed; failures exit
non-zero with a machine-readable JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bitmatch, fileio, fusion, gradcheck, mlp, reference, synth, templates
from .evaluation import (
    PROTOCOLS,
    WITHIN_SIDE,
    PairGroup,
    ScoreSet,
    eer,
    generate_pairs,
    roc_curve,
    sum_rule_combine,
    tar_at_far,
)
from .templates import CueVector


def _add_matcher_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--alpha",
        type=float,
        default=bitmatch.DEFAULT_ALPHA,
        help="agreement weighting: 1-1 pairs score 2-alpha, 0-0 pairs score alpha",
    )
    parser.add_argument("--max-shift", type=int, default=16, help="shift search radius")
    parser.add_argument("--step", type=int, default=1, help="shift search step")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irisfuse",
        description="Masked iris-template matching with dynamic periocular fusion",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic population")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--subjects", type=int, default=20)
    p.add_argument("--samples", type=int, default=4)
    p.add_argument("--height", type=int, default=templates.DEFAULT_HEIGHT)
    p.add_argument("--width", type=int, default=templates.DEFAULT_WIDTH)
    p.add_argument("--perioc-dim", type=int, default=templates.DEFAULT_PERIOC_DIM)
    p.add_argument("--bit-density", type=float, default=0.5)
    p.add_argument("--flip-rate", type=float, default=0.1)
    p.add_argument("--perioc-noise", type=float, default=0.03)
    p.add_argument(
        "--mask-coverage", type=float, nargs=2, default=(0.6, 0.95), metavar=("LO", "HI")
    )
    p.add_argument("--degraded-fraction", type=float, default=0.0)
    p.add_argument("--degraded-flip-rate", type=float, default=0.3)
    p.add_argument(
        "--degraded-coverage",
        type=float,
        nargs=2,
        default=(0.15, 0.35),
        metavar=("LO", "HI"),
    )
    p.add_argument("--both-sides", action="store_true")
    p.add_argument(
        "--train-fraction",
        type=float,
        default=None,
        help="also write subject-disjoint manifest-train/test splits",
    )
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("match", help="score all protocol pairs of a population")
    p.add_argument("--manifest", required=True)
    p.add_argument("--templates-dir", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="match CSV path")
    p.add_argument("--protocol", choices=PROTOCOLS, default=WITHIN_SIDE)
    _add_matcher_flags(p)
    p.add_argument(
        "--unmasked-ws",
        action="store_true",
        help="score weighted similarity over all pixels, ignoring masks",
    )
    p.add_argument("--threads", type=int, default=1, help="pair-scoring worker threads")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("fuse-train", help="train the fusion network from a match CSV")
    p.add_argument("--match-csv", required=True)
    p.add_argument("--out", required=True, help="checkpoint JSON path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--optimizer", choices=mlp.OPTIMIZERS, default="sgd-momentum")
    p.add_argument(
        "--ratio",
        type=int,
        nargs=2,
        default=(1, 2),
        metavar=("GENUINE", "IMPOSTOR"),
        help="class-balance sampling ratio; 0 0 disables balancing",
    )
    p.set_defaults(func=cmd_fuse_train)

    p = sub.add_parser("score", help="emit static and dynamic fused scores")
    p.add_argument("--match-csv", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="score CSV path")
    p.add_argument("--alpha", type=float, default=bitmatch.DEFAULT_ALPHA)
    p.add_argument(
        "--static-weight",
        type=float,
        default=0.5,
        help="iris weight of the fixed weighted-sum baseline",
    )
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="ROC / EER / TAR@FAR report from a score CSV")
    p.add_argument("--scores", required=True)
    p.add_argument(
        "--column",
        choices=("dynamic", "static", "ws", "hamming", "perioc"),
        default="dynamic",
    )
    p.add_argument("--out-prefix", required=True, help="writes <prefix>-roc.csv and <prefix>-summary.json")
    p.add_argument("--far-target", type=float, default=1e-4)
    p.add_argument(
        "--sum-rule",
        action="store_true",
        help="sum scores of aligned left/right comparisons per pair",
    )
    p.add_argument("--dataset", default="unknown")
    p.add_argument("--method", default=None, help="method label; defaults to the column")
    p.add_argument("--alpha", type=float, default=bitmatch.DEFAULT_ALPHA)
    p.add_argument("--max-shift", type=int, default=16)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference checks of all gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=gradcheck.DEFAULT_POINTS)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("oracle", help="packed kernels vs per-pixel reference")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=int, default=1, help="pair-count multiplier")
    p.set_defaults(func=cmd_oracle)

    return parser


# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    config = synth.SynthConfig(
        seed=args.seed,
        num_subjects=args.subjects,
        samples_per_subject=args.samples,
        height=args.height,
        width=args.width,
        bit_density=args.bit_density,
        genuine_flip_rate=args.flip_rate,
        mask_coverage_range=tuple(args.mask_coverage),
        perioc_dim=args.perioc_dim,
        perioc_within_noise=args.perioc_noise,
        both_sides=args.both_sides,
        degraded_fraction=args.degraded_fraction,
        degraded_flip_rate=args.degraded_flip_rate,
        degraded_coverage_range=tuple(args.degraded_coverage),
    )
    population = synth.gen_population(config)
    out = Path(args.out)
    (out / "templates").mkdir(parents=True, exist_ok=True)
    for ref, template in sorted(population.templates.items()):
        fileio.write_template(out / "templates" / f"{ref}.irt", template)
    fileio.write_feature_csv(out / "features.csv", population.periocular)
    fileio.write_manifest(out / "manifest.jsonl", population.manifest)
    if args.train_fraction is not None:
        if not 0.0 < args.train_fraction < 1.0:
            raise ValueError("--train-fraction must lie strictly inside (0, 1)")
        subjects = population.manifest.subjects()
        n_train = round(args.train_fraction * len(subjects))
        if n_train < 2 or len(subjects) - n_train < 2:
            raise ValueError("--train-fraction leaves fewer than 2 subjects in a split")
        train_ids = set(subjects[:n_train])
        fileio.write_manifest(
            out / "manifest-train.jsonl", population.manifest.filter_subjects(train_ids)
        )
        fileio.write_manifest(
            out / "manifest-test.jsonl",
            population.manifest.filter_subjects(set(subjects) - train_ids),
        )
    meta = {
        "config": {k: list(v) if isinstance(v, tuple) else v
                   for k, v in vars(config).items()},
        "degraded_subjects": sorted(population.degraded_subjects),
    }
    (out / "synth-config.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(
        f"wrote {len(population.templates)} templates for "
        f"{config.num_subjects} subjects to {out}"
    )
    return 0


def _score_group(
    group: PairGroup,
    templates,
    rotations,
    periocular,
    shifts,
    alpha: float,
    policy: bitmatch.ShiftPolicy,
    unmasked_ws: bool,
) -> list[fileio.MatchRow]:
    rows = []
    for member in group.members:
        t_a = templates[member.a.template_ref]
        t_b = templates[member.b.template_ref]
        p_a = periocular[member.a.periocular_ref]
        p_b = periocular[member.b.periocular_ref]
        rot_bits, rot_masks = rotations[member.b.template_ref]
        try:
            result = bitmatch.match_with_rotations(
                t_a, t_b, rot_bits, rot_masks, shifts, alpha
            )
            if unmasked_ws:
                ws_value = bitmatch.weighted_similarity(
                    t_a, t_b, alpha, policy, unmasked=True
                )[0]
            else:
                ws_value = result.ws_score
            iris = dict(
                iris_valid=True,
                hamming=result.hamming,
                ws=ws_value,
                best_shift=result.best_shift,
                joint_valid=result.joint_valid,
                mask_rate_a=result.mask_rate_a,
                mask_rate_b=result.mask_rate_b,
            )
        except bitmatch.EmptyJointMaskError:
            iris = dict(
                iris_valid=False,
                hamming=None,
                ws=None,
                best_shift=None,
                joint_valid=None,
                mask_rate_a=t_a.valid_count() / t_a.n_pixels,
                mask_rate_b=t_b.valid_count() / t_b.n_pixels,
            )
        rows.append(
            fileio.MatchRow(
                a_id=group.a_id,
                b_id=group.b_id,
                side=member.a.eye_side,
                label=group.label.name.lower(),
                perioc_dist=fusion.perioc_distance(p_a, p_b),
                eye_sum=p_a.eye_area + p_b.eye_area,
                eye_diff=p_a.eye_area - p_b.eye_area,
                brow_sum=p_a.brow_area + p_b.brow_area,
                brow_diff=p_a.brow_area - p_b.brow_area,
                **iris,
            )
        )
    return rows


def cmd_match(args) -> int:
    manifest = fileio.read_manifest(args.manifest)
    periocular = fileio.read_feature_csv(args.features)
    policy = bitmatch.ShiftPolicy(max_shift=args.max_shift, step=args.step)
    pairs = generate_pairs(manifest, args.protocol)

    templates_dir = Path(args.templates_dir)
    templates = {}
    rotations = {}
    for entry in manifest.entries:
        if entry.template_ref not in templates:
            template = fileio.read_template(templates_dir / f"{entry.template_ref}.irt")
            templates[entry.template_ref] = template
            rotations[entry.template_ref] = bitmatch.rotated_planes(template, policy)
        if entry.periocular_ref not in periocular:
            raise ValueError(f"feature table misses id {entry.periocular_ref!r}")

    groups = list(pairs.genuine) + list(pairs.impostor)
    shifts = policy.shifts()

    def worker(group: PairGroup) -> list[fileio.MatchRow]:
        return _score_group(
            group, templates, rotations, periocular, shifts, args.alpha,
            policy, args.unmasked_ws,
        )

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            per_group = list(pool.map(worker, groups, chunksize=256))
    else:
        per_group = [worker(g) for g in groups]
    rows = [row for group_rows in per_group for row in group_rows]
    fileio.write_match_csv(args.out, rows)
    n_gen, n_imp = pairs.counts
    print(f"wrote {len(rows)} comparisons ({n_gen} genuine / {n_imp} impostor groups)")
    return 0


def _usable(rows: list[fileio.MatchRow]) -> list[fileio.MatchRow]:
    return [r for r in rows if r.iris_valid]


def cmd_fuse_train(args) -> int:
    rows = fileio.read_match_csv(args.match_csv)
    usable = _usable(rows)
    skipped = len(rows) - len(usable)
    if skipped:
        print(f"excluded {skipped} unusable iris pairs from training", file=sys.stderr)
    if len(usable) < 2:
        raise ValueError("need at least two usable comparisons to train")
    norm = fusion.NormalizationParams.from_distances(
        [r.perioc_dist for r in usable]
    )
    features = np.array([_row_cues(r, norm).as_array() for r in usable])
    labels = np.array([0 if r.label == "genuine" else 1 for r in usable])
    ratio = None if tuple(args.ratio) == (0, 0) else tuple(args.ratio)
    config = mlp.TrainConfig(
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
        genuine_impostor_ratio=ratio,
        optimizer=args.optimizer,
    )
    params = mlp.train_mlp(features, labels, config)
    fileio.write_checkpoint(args.out, params, norm, config)
    print(f"trained on {len(usable)} comparisons, checkpoint at {args.out}")
    return 0


def _row_cues(row: fileio.MatchRow, norm: fusion.NormalizationParams) -> CueVector:
    return CueVector(
        iris_score=row.ws,
        perioc_dist=fusion.normalized_distance(row.perioc_dist, norm),
        mask_rate_a=row.mask_rate_a,
        mask_rate_b=row.mask_rate_b,
        eye_sum=row.eye_sum,
        eye_diff=row.eye_diff,
        brow_sum=row.brow_sum,
        brow_diff=row.brow_diff,
    )


def cmd_score(args) -> int:
    rows = fileio.read_match_csv(args.match_csv)
    params, norm, _ = fileio.read_checkpoint(args.checkpoint)
    out_rows = []
    for row in rows:
        if row.iris_valid:
            cues = _row_cues(row, norm)
            iris01, perioc01 = fusion.static_inputs(
                row.ws, args.alpha, cues.perioc_dist
            )
            static = fusion.static_fuse(iris01, perioc01, args.static_weight)
            dynamic = fusion.dynamic_fuse(params, cues)
            cue_fields = dict(
                iris_score=cues.iris_score,
                perioc_norm=cues.perioc_dist,
                static=static,
                dynamic=dynamic,
            )
        else:
            cue_fields = dict(
                iris_score=None, perioc_norm=None, static=None, dynamic=None
            )
        out_rows.append(
            fileio.ScoreRow(
                a_id=row.a_id,
                b_id=row.b_id,
                side=row.side,
                label=row.label,
                mask_rate_a=row.mask_rate_a,
                mask_rate_b=row.mask_rate_b,
                eye_sum=row.eye_sum,
                eye_diff=row.eye_diff,
                brow_sum=row.brow_sum,
                brow_diff=row.brow_diff,
                hamming=row.hamming,
                ws=row.ws,
                **cue_fields,
            )
        )
    fileio.write_score_csv(args.out, out_rows)
    print(f"wrote {len(out_rows)} scored comparisons to {args.out}")
    return 0


_COLUMN_GETTERS = {
    "dynamic": (lambda r: r.dynamic, True),
    "static": (lambda r: r.static, True),
    "ws": (lambda r: r.ws, True),
    "hamming": (lambda r: r.hamming, False),
    "perioc": (lambda r: r.perioc_norm, False),
}


def _collect_scores(
    rows: list[fileio.ScoreRow], column: str, combine_sides: bool
) -> tuple[ScoreSet, int]:
    getter, higher_is_genuine = _COLUMN_GETTERS[column]
    genuine, impostor, skipped = [], [], 0
    if combine_sides:
        grouped: dict[tuple[str, str], list[fileio.ScoreRow]] = {}
        for row in rows:
            grouped.setdefault((row.a_id, row.b_id), []).append(row)
        for (a_id, b_id), members in grouped.items():
            labels = {m.label for m in members}
            if len(labels) != 1:
                raise ValueError(f"inconsistent labels for pair ({a_id}, {b_id})")
            values = [getter(m) for m in members]
            if any(v is None for v in values):
                skipped += 1
                continue
            if len(values) != 2:
                raise ValueError(
                    f"sum rule expects two aligned comparisons per pair, "
                    f"({a_id}, {b_id}) has {len(values)}"
                )
            combined = float(
                sum_rule_combine([values[0]], [values[1]])[0]
            )
            (genuine if labels.pop() == "genuine" else impostor).append(combined)
    else:
        for row in rows:
            value = getter(row)
            if value is None:
                skipped += 1
                continue
            (genuine if row.label == "genuine" else impostor).append(value)
    return (
        ScoreSet(
            genuine=np.array(genuine),
            impostor=np.array(impostor),
            higher_is_genuine=higher_is_genuine,
        ),
        skipped,
    )


def cmd_eval(args) -> int:
    rows = fileio.read_score_csv(args.scores)
    scores, skipped = _collect_scores(rows, args.column, args.sum_rule)
    if skipped:
        print(f"skipped {skipped} comparisons without a {args.column} score",
              file=sys.stderr)
    curve = roc_curve(scores)
    result = tar_at_far(scores, args.far_target)
    if result.underpowered:
        print(
            f"warning: {scores.n_impostor} impostor scores cannot resolve "
            f"FAR={args.far_target}",
            file=sys.stderr,
        )
    summary = {
        "dataset": args.dataset,
        "n_genuine": scores.n_genuine,
        "n_impostor": scores.n_impostor,
        "eer": eer(scores),
        "tar_at_far": result.tar,
        "far_target": args.far_target,
        "alpha": args.alpha,
        "max_shift": args.max_shift,
        "method": args.method or args.column,
    }
    fileio.write_roc_csv(f"{args.out_prefix}-roc.csv", curve)
    summary_text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    Path(f"{args.out_prefix}-summary.json").write_text(summary_text, encoding="utf-8")
    print(summary_text, end="")
    return 0


def cmd_gradcheck(args) -> int:
    reports = gradcheck.run_all(seed=args.seed, points=args.points)
    ok = True
    for report in reports:
        status = "PASS" if report.passed else "FAIL"
        ok &= report.passed
        print(
            f"[{status}] {report.name}: max relative error "
            f"{report.max_rel_error:.3e} (tolerance {report.tolerance:g}, "
            f"{report.points} points, {report.elapsed_seconds:.2f}s)"
        )
    return 0 if ok else 1


def cmd_oracle(args) -> int:
    report = reference.run_equivalence_suite(seed=args.seed, scale=args.scale)
    status = "PASS" if report.passed else "FAIL"
    print(
        f"[{status}] packed kernels vs per-pixel reference: "
        f"{report.pairs_checked} pairs, {report.mismatches} mismatches, "
        f"{report.unusable_pairs} unusable, {report.elapsed_seconds:.2f}s"
    )
    return 0 if report.passed else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # contract: machine-readable errors on stderr
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
