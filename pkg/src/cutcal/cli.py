"""Command-line surface: calibrate, analyze, simulate and report.

Exit codes: 0 success, 1 data error (machine-readable JSON on stderr),
2 usage error. All numeric output is deterministic given inputs and seed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import CutcalError, ParseError
from .geometry import FrameId, RigidTransform
from .handeye import HandEyeDataset, HandEyeSample, calibrate_hand_eye
from .logio import (
    PoseLogRow,
    parse_plan,
    parse_pose_log,
    parse_trajectory_log,
    serialize_pose_log,
    serialize_trajectory_log,
)
from .metrics import build_report
from .planner import PassPolicy
from .pointcal import (
    PivotDataset,
    TipCalDataset,
    TipCalSample,
    calibrate_pivot,
    calibrate_tip_in_ee,
    tip_poses_in_ee,
)
from .report import emit_report_table, parse_report, serialize_report
from .simrig import (
    JitterModel,
    NoiseModel,
    RigGroundTruth,
    generate_handeye_dataset,
    generate_pivot_dataset,
    generate_tipcal_dataset,
    synthesize_muso_trial,
    synthesize_ruso_trial,
)


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e.strerror}") from e


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="\n")


def _transform_to_dict(t: RigidTransform) -> dict:
    return {"rotation": t.rotation.tolist(), "translation_mm": t.translation.tolist()}


def _transform_from_dict(doc: dict, where: str) -> RigidTransform:
    try:
        return RigidTransform(
            np.asarray(doc["rotation"], dtype=np.float64),
            np.asarray(doc["translation_mm"], dtype=np.float64),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"invalid transform in {where}: {e}") from e


def _pose_pairs(rows: list[PoseLogRow], first, second) -> list[tuple]:
    by_time: dict[float, dict] = {}
    for r in rows:
        key = (r.source, r.target)
        if key in (first, second):
            by_time.setdefault(r.timestamp, {})[key] = r.transform
    pairs = [
        (entry[first], entry[second])
        for _, entry in sorted(by_time.items())
        if first in entry and second in entry
    ]
    if not pairs:
        raise ParseError(
            f"no timestamp-paired ({first[0]},{first[1]}) and ({second[0]},{second[1]}) rows"
        )
    return pairs


def _cmd_calibrate_handeye(args) -> int:
    rows = parse_pose_log(_read(args.input))
    pairs = _pose_pairs(rows, (FrameId.S, FrameId.EE), (FrameId.OT, FrameId.TOOL))
    dataset = HandEyeDataset(tuple(HandEyeSample(r, t) for r, t in pairs))
    solution = calibrate_hand_eye(
        dataset,
        min_rotation=math.radians(args.min_rotation_deg),
        pairing=args.pairing,
    )
    _write(
        json.dumps(
            {
                "base_from_tracker": _transform_to_dict(solution.base_from_tracker),
                "ee_from_tool": _transform_to_dict(solution.ee_from_tool),
                "residual_rotation_rad": solution.residual_rotation_rad,
                "residual_translation_mm": solution.residual_translation_mm,
                "samples": len(dataset),
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        args.output,
    )
    return 0


def _cmd_calibrate_pivot(args) -> int:
    rows = parse_pose_log(_read(args.input))
    poses = [r.transform for r in rows if (r.source, r.target) == (FrameId.OT, FrameId.TOOL)]
    if not poses:
        raise ParseError("no (OT,Tool) rows in pose log")
    solution = calibrate_pivot(PivotDataset(tuple(poses)))
    _write(
        json.dumps(
            {
                "tip_in_tool_mm": solution.tip_in_tool.tolist(),
                "divot_in_tracker_mm": solution.divot_in_tracker.tolist(),
                "rms_residual_mm": solution.rms_residual_mm,
                "poses": len(poses),
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        args.output,
    )
    return 0


def _load_handeye_solution(path: str):
    from .handeye import HandEyeSolution

    try:
        doc = json.loads(_read(path).decode("utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON in {path}: {e.msg}", e.lineno) from e
    return HandEyeSolution(
        base_from_tracker=_transform_from_dict(doc.get("base_from_tracker", {}), path),
        ee_from_tool=_transform_from_dict(doc.get("ee_from_tool", {}), path),
        residual_rotation_rad=float(doc.get("residual_rotation_rad", 0.0)),
        residual_translation_mm=float(doc.get("residual_translation_mm", 0.0)),
    )


def _cmd_calibrate_tip(args) -> int:
    rows = parse_pose_log(_read(args.input))
    pairs = _pose_pairs(rows, (FrameId.S, FrameId.EE), (FrameId.OT, FrameId.DIGITIZER))
    hand_eye = _load_handeye_solution(args.handeye)
    dataset = TipCalDataset(
        tuple(TipCalSample(r, d) for r, d in pairs), hand_eye=hand_eye
    )
    ee_from_tip = calibrate_tip_in_ee(dataset, max_spread_mm=args.max_spread_mm)
    positions = np.array([p.translation for p in tip_poses_in_ee(dataset)])
    spread = float(np.linalg.norm(positions - positions.mean(axis=0), axis=1).max())
    _write(
        json.dumps(
            {
                "ee_from_tip": _transform_to_dict(ee_from_tip),
                "tip_position_spread_mm": spread,
                "samples": len(dataset.samples),
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        args.output,
    )
    return 0


def _cmd_analyze(args) -> int:
    plan_file = parse_plan(_read(args.plan))
    recording = parse_trajectory_log(_read(args.traj))
    report = build_report(
        recording,
        plan_file.plan,
        plan_file.analysis.bin_count,
        args.label,
        gate=plan_file.analysis.gate,
        lateral_mode=plan_file.analysis.lateral_mode,
    )
    if args.format == "json":
        _write(serialize_report(report), args.output)
    else:
        _write(emit_report_table([report], format=args.format), args.output)
    return 0


def _noise_from_args(args) -> NoiseModel:
    return NoiseModel(
        tracker_rot_sigma_rad=math.radians(args.tracker_rot_sigma_deg),
        tracker_trans_sigma_mm=args.tracker_trans_sigma,
        robot_rot_sigma_rad=math.radians(args.robot_rot_sigma_deg),
        robot_trans_sigma_mm=args.robot_trans_sigma,
    )


def _cmd_simulate(args) -> int:
    rig = RigGroundTruth.random(args.seed)
    if args.kind in ("ruso", "muso"):
        if args.plan is None:
            raise ParseError(f"simulate {args.kind} requires --plan")
        plan_file = parse_plan(_read(args.plan))
        if args.kind == "ruso":
            recording = synthesize_ruso_trial(
                rig,
                plan_file.plan,
                plan_file.policy,
                noise=_noise_from_args(args),
                rate_hz=args.rate,
                seed=args.seed,
            )
        else:
            jitter = JitterModel(
                lateral_sigma_mm=args.lateral_sigma,
                depth_bias_mm=args.depth_bias,
                depth_sigma_mm=args.depth_sigma,
            )
            recording = synthesize_muso_trial(
                plan_file.plan, jitter=jitter, rate_hz=args.rate, seed=args.seed
            )
        _write(serialize_trajectory_log(recording), args.output)
    elif args.kind == "handeye":
        dataset = generate_handeye_dataset(
            rig, args.poses, noise=_noise_from_args(args), seed=args.seed
        )
        rows = []
        for i, s in enumerate(dataset.samples):
            rows.append(PoseLogRow.from_transform(float(i), FrameId.S, FrameId.EE, s.robot_pose))
            rows.append(
                PoseLogRow.from_transform(float(i), FrameId.OT, FrameId.TOOL, s.tracker_pose)
            )
        _write(serialize_pose_log(rows), args.output)
    elif args.kind == "pivot":
        dataset = generate_pivot_dataset(
            rig,
            args.poses,
            cone_half_angle_rad=math.radians(args.cone_deg),
            noise=_noise_from_args(args),
            seed=args.seed,
        )
        rows = [
            PoseLogRow.from_transform(float(i), FrameId.OT, FrameId.TOOL, p)
            for i, p in enumerate(dataset.poses)
        ]
        _write(serialize_pose_log(rows), args.output)
    elif args.kind == "tipcal":
        dataset = generate_tipcal_dataset(
            rig, args.poses, noise=_noise_from_args(args), seed=args.seed
        )
        rows = []
        for i, s in enumerate(dataset.samples):
            rows.append(PoseLogRow.from_transform(float(i), FrameId.S, FrameId.EE, s.robot_pose))
            rows.append(
                PoseLogRow.from_transform(
                    float(i), FrameId.OT, FrameId.DIGITIZER, s.digitizer_pose
                )
            )
        _write(serialize_pose_log(rows), args.output)
    else:  # pragma: no cover - argparse choices guard this
        raise ValueError(args.kind)
    if args.ground_truth_output:
        _write(
            json.dumps(
                {
                    "base_from_tracker": _transform_to_dict(rig.base_from_tracker),
                    "ee_from_tool": _transform_to_dict(rig.ee_from_tool),
                    "tip_in_tool_mm": rig.tip_in_tool.tolist(),
                    "divot_in_tracker_mm": rig.divot_in_tracker.tolist(),
                    "seed": rig.seed,
                },
                indent=2,
                sort_keys=True,
            )
            + "\n",
            args.ground_truth_output,
        )
    return 0


def _cmd_report(args) -> int:
    reports = []
    for path in args.input:
        reports.extend(parse_report(_read(path)))
    _write(emit_report_table(reports, format=args.format), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cutcal",
        description="Calibration and cut-trajectory analysis for tracked osteotomy tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate-handeye", help="solve base/tracker and EE/tool transforms")
    p.add_argument("--input", required=True, help="pose log CSV with (S,EE) and (OT,Tool) rows")
    p.add_argument("--output", help="solution JSON (default stdout)")
    p.add_argument("--min-rotation-deg", type=float, default=10.0)
    p.add_argument("--pairing", choices=["consecutive", "all_pairs"], default="consecutive")
    p.set_defaults(func=_cmd_calibrate_handeye)

    p = sub.add_parser("calibrate-pivot", help="solve the tool tip offset from pivoting poses")
    p.add_argument("--input", required=True, help="pose log CSV with (OT,Tool) rows")
    p.add_argument("--output", help="solution JSON (default stdout)")
    p.set_defaults(func=_cmd_calibrate_pivot)

    p = sub.add_parser("calibrate-tip", help="solve the tip pose in the EE frame")
    p.add_argument("--input", required=True, help="pose log CSV with (S,EE) and (OT,Digitizer) rows")
    p.add_argument("--handeye", required=True, help="hand-eye solution JSON")
    p.add_argument("--max-spread-mm", type=float, default=1.0)
    p.add_argument("--output", help="solution JSON (default stdout)")
    p.set_defaults(func=_cmd_calibrate_tip)

    p = sub.add_parser("analyze", help="compute trial metrics from a trajectory log")
    p.add_argument("--traj", required=True, help="trajectory log CSV")
    p.add_argument("--plan", required=True, help="plan JSON")
    p.add_argument("--label", default="X1.1", help="trial label, e.g. R1.3")
    p.add_argument("--format", choices=["json", "text", "csv"], default="json")
    p.add_argument("--output", help="report file (default stdout)")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("simulate", help="generate synthetic logs with known ground truth")
    p.add_argument("kind", choices=["ruso", "muso", "handeye", "pivot", "tipcal"])
    p.add_argument("--plan", help="plan JSON (ruso/muso)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rate", type=float, default=10.0, help="sampling rate, Hz")
    p.add_argument("--poses", type=int, default=20, help="dataset size (handeye/pivot/tipcal)")
    p.add_argument("--cone-deg", type=float, default=30.0, help="pivot cone half-angle")
    p.add_argument("--tracker-rot-sigma-deg", type=float, default=0.0)
    p.add_argument("--tracker-trans-sigma", type=float, default=0.0, help="mm")
    p.add_argument("--robot-rot-sigma-deg", type=float, default=0.0)
    p.add_argument("--robot-trans-sigma", type=float, default=0.0, help="mm")
    p.add_argument("--lateral-sigma", type=float, default=1.1, help="muso tremor, mm")
    p.add_argument("--depth-bias", type=float, default=3.0, help="muso over-penetration, mm")
    p.add_argument("--depth-sigma", type=float, default=0.8, help="muso depth spread, mm")
    p.add_argument("--output", help="log file (default stdout)")
    p.add_argument("--ground-truth-output", help="also write the rig ground truth JSON")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("report", help="aggregate trial reports into a summary table")
    p.add_argument("--input", required=True, nargs="+", help="report JSON file(s)")
    p.add_argument("--format", choices=["text", "csv", "json"], default="text")
    p.add_argument("--output", help="table file (default stdout)")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CutcalError as e:
        sys.stderr.write(
            json.dumps({"error": type(e).__name__, "message": str(e)}, sort_keys=True) + "\n"
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
