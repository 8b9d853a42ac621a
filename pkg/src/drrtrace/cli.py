"""Command-line interface.

Subcommands: phantom, import, render, register, landscape, gradcheck,
bench.  Angles are taken in degrees on the command line and converted to
radians immediately; all file outputs are deterministic given --seed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import benchmark
from ._kernels import DEFAULT_BACKEND, available_backends
from .errors import DrrTraceError
from .geometry import DetectorSpec, PoseParameters
from .gradients import (default_fd_steps, detect_fd_boundaries,
                        finite_difference_gradient, loss_and_gradient)
from .imageio import load_float_image, save_float_image, save_pgm
from .raytrace import render, render_iterative
from .registration import (OptimizerConfig, default_half_widths, loss_landscape,
                           register, sample_initializations, write_landscape_csv,
                           write_trace_jsonl)
from .volume import PHANTOM_KINDS, import_raw, load_volume, make_phantom, save_volume

_LOSS_BY_FLAG = {"zncc": "neg_zncc", "l2": "l2"}


def _add_pose_flags(parser):
    parser.add_argument("--rho", type=float, default=400.0,
                        help="half source-to-detector distance, mm")
    parser.add_argument("--theta", type=float, default=0.0, help="azimuth, degrees")
    parser.add_argument("--phi", type=float, default=90.0, help="polar angle, degrees")
    parser.add_argument("--gamma", type=float, default=0.0, help="detector roll, degrees")
    parser.add_argument("--bx", type=float, default=0.0, help="x shift, mm")
    parser.add_argument("--by", type=float, default=0.0, help="y shift, mm")
    parser.add_argument("--bz", type=float, default=0.0, help="z shift, mm")


def _add_detector_flags(parser):
    parser.add_argument("--height", type=int, default=100, help="detector rows")
    parser.add_argument("--width", type=int, default=100, help="detector columns")
    parser.add_argument("--pitch", type=float, default=2.0, help="pixel pitch, mm")


def _pose_from_args(args) -> PoseParameters:
    return PoseParameters(
        rho=args.rho,
        theta=math.radians(args.theta),
        phi=math.radians(args.phi),
        gamma=math.radians(args.gamma),
        shift=(args.bx, args.by, args.bz),
    )


def _spec_from_args(args, volume) -> DetectorSpec:
    return DetectorSpec.for_volume(volume, args.height, args.width,
                                   (args.pitch, args.pitch))


def _parse_triple(text, cast=float):
    parts = [cast(p) for p in text.split(",")]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected 1 or 3 comma-separated values, got {text!r}")
    return tuple(parts)


def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def cmd_phantom(args) -> int:
    volume = make_phantom(args.kind, args.n, spacing=args.spacing, density=args.density)
    save_volume(volume, args.out)
    print(f"wrote {args.out}: {args.kind} {volume.dims} spacing {volume.spacing}")
    return 0


def cmd_import(args) -> int:
    volume = import_raw(args.input, args.dims, args.spacing, args.origin,
                        element_type=args.element_type,
                        clamp_negative=args.clamp_negative)
    save_volume(volume, args.out)
    print(f"wrote {args.out}: imported {volume.dims} from {args.input}")
    return 0


def cmd_render(args) -> int:
    volume = load_volume(args.volume)
    pose = _pose_from_args(args)
    spec = _spec_from_args(args, volume)
    renderer = render_iterative if args.iterative else render
    image = renderer(volume, pose, spec)
    save_pgm(image, args.out + ".pgm")
    save_float_image(image, args.out + ".f64")
    print(f"wrote {args.out}.pgm and {args.out}.f64 ({spec.height}x{spec.width})")
    return 0


def cmd_register(args) -> int:
    volume = load_volume(args.volume)
    spec = _spec_from_args(args, volume)
    pose = _pose_from_args(args)
    config = OptimizerConfig(
        lr_rotation=args.lr_rot, lr_translation=args.lr_xyz, momentum=args.momentum,
        max_iters=args.max_iters, converged_threshold=args.threshold,
        loss_kind=_LOSS_BY_FLAG[args.loss],
    )
    os.makedirs(args.out, exist_ok=True)

    if args.fixed is not None:
        fixed = load_float_image(args.fixed)
    else:
        fixed = render(volume, pose, spec)

    if args.sample is not None:
        if args.sample == 0:
            inits = []
        else:
            half = default_half_widths(wide=args.wide)
            inits = sample_initializations(pose, half, args.sample, args.seed)
    else:
        inits = [pose]

    runs = []
    iters_of_converged = []
    for i, init in enumerate(inits):
        trace = register(fixed, volume, init, spec, config)
        write_trace_jsonl(trace, os.path.join(args.out, f"trace_{i:03d}.jsonl"))
        runs.append({
            "trace": f"trace_{i:03d}.jsonl",
            "converged": trace.converged,
            "iterations": trace.iterations_used,
            "final_loss": trace.final_loss if math.isfinite(trace.final_loss) else None,
        })
        if trace.converged:
            iters_of_converged.append(trace.iterations_used)
    summary = {
        "n_runs": len(inits),
        "n_converged": len(iters_of_converged),
        "mean_iters": (sum(iters_of_converged) / len(iters_of_converged)
                       if iters_of_converged else None),
        "seed": args.seed,
        "wide": bool(args.wide),
        "runs": runs,
    }
    _dump_json(summary, os.path.join(args.out, "summary.json"))
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_landscape(args) -> int:
    volume = load_volume(args.volume)
    spec = _spec_from_args(args, volume)
    truth = _pose_from_args(args)
    axes = tuple(args.axes.split(","))
    half = None
    if args.half_width is not None:
        half = [float(h) for h in args.half_width.split(",")]
        # Angular axes take degrees on the CLI.
        half = [math.radians(h) if name in ("theta", "phi", "gamma") else h
                for name, h in zip(axes, half)]
    grid = loss_landscape(volume, truth, spec, loss_kind=_LOSS_BY_FLAG[args.loss],
                          axes=axes, samples=args.samples, half_widths=half)
    write_landscape_csv(grid, args.out)
    print(f"wrote {args.out}: {'x'.join(str(len(c)) for c in grid.coords)} sweep of {axes}")
    return 0


def cmd_gradcheck(args) -> int:
    volume = load_volume(args.volume)
    spec = _spec_from_args(args, volume)
    truth = _pose_from_args(args)
    fixed = render(volume, truth, spec)
    loss_kind = _LOSS_BY_FLAG[args.loss]
    steps = default_fd_steps()

    rng = np.random.default_rng(args.seed)
    half = default_half_widths(wide=args.wide)
    center = truth.to_vector()
    poses = []
    while len(poses) < args.sample:
        eta = rng.uniform(center - half, center + half)
        if abs(math.sin(eta[2])) > 0.1:
            poses.append(PoseParameters.from_vector(eta))

    lines = []
    for pose in poses:
        rec = loss_and_gradient(volume, pose, spec, fixed, loss_kind=loss_kind)
        fd = finite_difference_gradient(volume, pose, spec, fixed, loss_kind=loss_kind,
                                        steps=steps, scheme="central")
        denom = np.maximum(np.abs(rec.grad), np.abs(fd))
        rel = np.where(denom > 0, np.abs(rec.grad - fd) / np.where(denom > 0, denom, 1.0), 0.0)
        boundary = detect_fd_boundaries(volume, pose, spec, steps=steps)
        lines.append(json.dumps({
            "pose": [float(v) for v in pose.to_vector()],
            "value": rec.value,
            "grad": [float(v) for v in rec.grad],
            "fd": [float(v) for v in fd],
            "rel_err": [float(v) for v in rel],
            "boundary": [bool(b) for b in boundary],
        }, sort_keys=True))
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench(args) -> int:
    if args.volume:
        volume = load_volume(args.volume)
    else:
        volume = make_phantom("sphere", 64, spacing=4.0)
    pose = _pose_from_args(args)
    sizes = [int(s) for s in args.sizes.split(",")]
    results = benchmark.run_benchmark(volume, pose, sizes, repeats=args.repeats)
    print(f"backends available: {', '.join(available_backends())} (default {DEFAULT_BACKEND})")
    print(benchmark.format_table(results))
    if args.out:
        _dump_json([r.__dict__ for r in results], args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drrtrace",
                                     description="DRR rendering, pose gradients, and "
                                                 "slice-to-volume registration")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic volume")
    p.add_argument("kind", choices=PHANTOM_KINDS)
    p.add_argument("n", type=int, help="voxels per axis (cubic)")
    p.add_argument("density", type=float)
    p.add_argument("--spacing", type=float, default=1.0, help="mm per voxel")
    p.add_argument("--out", required=True, help="output .dvol path")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("import", help="convert a raw voxel file to .dvol")
    p.add_argument("input", help="raw little-endian voxel file")
    p.add_argument("--out", required=True)
    p.add_argument("--dims", type=lambda s: _parse_triple(s, int), required=True,
                   help="nx,ny,nz")
    p.add_argument("--spacing", type=_parse_triple, default=(1.0, 1.0, 1.0))
    p.add_argument("--origin", type=_parse_triple, default=(0.0, 0.0, 0.0))
    p.add_argument("--element-type", choices=("f32", "i16", "u8"), default="f32")
    p.add_argument("--clamp-negative", action="store_true",
                   help="zero negative densities at import")
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("render", help="render a DRR to PGM + float64")
    p.add_argument("--volume", required=True)
    p.add_argument("--out", required=True, help="output basename")
    _add_pose_flags(p)
    _add_detector_flags(p)
    p.add_argument("--iterative", action="store_true",
                   help="use the iterative (oracle) renderer")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("register", help="slice-to-volume registration")
    p.add_argument("--volume", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--fixed", help="fixed image basename (.f64); pose flags are "
                                   "then the initialization")
    _add_pose_flags(p)
    _add_detector_flags(p)
    p.add_argument("--loss", choices=sorted(_LOSS_BY_FLAG), default="zncc")
    p.add_argument("--lr-rot", type=float, default=5.3e-2)
    p.add_argument("--lr-xyz", type=float, default=7.5e1)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--max-iters", type=int, default=250)
    p.add_argument("--threshold", type=float, default=-0.999)
    p.add_argument("--sample", type=int, help="number of random initializations "
                                              "around the pose flags")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--wide", action="store_true",
                   help="sample 120 deg / 60 mm ranges instead of 90/45 deg / 30 mm")
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("landscape", help="loss sweep around a truth pose")
    p.add_argument("--volume", required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    _add_pose_flags(p)
    _add_detector_flags(p)
    p.add_argument("--axes", default="theta", help="one or two of theta,phi,gamma,bx,by,bz")
    p.add_argument("--samples", type=int, default=41)
    p.add_argument("--half-width", help="per-axis half-widths (degrees/mm)")
    p.add_argument("--loss", choices=sorted(_LOSS_BY_FLAG), default="zncc")
    p.set_defaults(func=cmd_landscape)

    p = sub.add_parser("gradcheck", help="exact vs finite-difference gradients")
    p.add_argument("--volume", required=True)
    p.add_argument("--out", help="output JSON-lines path (default stdout)")
    _add_pose_flags(p)
    _add_detector_flags(p)
    p.add_argument("--loss", choices=sorted(_LOSS_BY_FLAG), default="zncc")
    p.add_argument("--sample", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--wide", action="store_true")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("bench", help="render timing across sizes and backends")
    p.add_argument("--volume", help="volume to render (default: 64^3 sphere phantom)")
    p.add_argument("--out", help="optional JSON output path")
    _add_pose_flags(p)
    p.add_argument("--sizes", default="100,200,300", help="comma-separated DRR sizes")
    p.add_argument("--repeats", type=int, default=20)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DrrTraceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
