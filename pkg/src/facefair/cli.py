"""Command-line surface wiring fixtures, pipelines, and metrics."""

from __future__ import annotations

import argparse
import sys

from .fixtures import collapse_edges, make_cube_mesh, make_grid_mesh, make_sphere_mesh
from .mesh import MeshError
from .meshio import (
    MeshIOError,
    read_config,
    read_mesh,
    read_normal_field,
    write_histogram_csv,
    write_mesh,
    write_report,
)
from .metrics import add_gaussian_noise, corner_angle_histogram, evaluate
from .mollify import MollifyParams
from .pipelines import DenoiseConfig, FusionInput, denoise, fuse_normals
from .solver import SolverParams

_PARAM_FLAGS = (
    ("--lambda-v", "lambda_v", float, "Laplacian term weight"),
    ("--eta", "eta", float, "fairness term weight"),
    ("--lambda-n", "lambda_n", float, "mollification smoothness weight"),
    ("--sigma1", "sigma1", float, "Laplacian normal-offset bandwidth (x local scale)"),
    ("--sigma2", "sigma2", float, "Laplacian spatial bandwidth (x local scale)"),
    ("--delta", "delta", float, "fairness flatness margin"),
    ("--rounds", "rounds", int, "outer rounds"),
)

# Keys the --config file may override, mapped onto the settings dict.
_CONFIG_TYPES = {
    "lambda_v": float,
    "eta": float,
    "lambda_n": float,
    "sigma1": float,
    "sigma2": float,
    "delta": float,
    "rounds": int,
    "sigma_rel": float,
    "seed": int,
    "max_iters": int,
    "grad_tol": float,
    "method": str,
    "step_policy": str,
    "mollify_sigma1": float,
    "mollify_sigma2": float,
    "mollify_max_iters": int,
    "mollify_grad_tol": float,
    "reweight_every_iter": lambda s: s.lower() in ("1", "true", "yes"),
    "bin_width": float,
}


def _add_io_flags(parser, *, inp=True, out=True, gt=False, normals=False, report=False):
    if inp:
        parser.add_argument("--in", dest="input", required=True, help="input mesh path")
    if out:
        parser.add_argument("--out", dest="output", required=True, help="output path")
    if gt:
        parser.add_argument("--gt", dest="ground_truth", help="ground-truth mesh path")
    if normals:
        parser.add_argument("--normals", required=True, help="per-vertex normal field path")
    if report:
        parser.add_argument("--report", help="write key=value metrics to this path")


def _add_param_flags(parser):
    for flag, dest, kind, helptext in _PARAM_FLAGS:
        parser.add_argument(flag, dest=dest, type=kind, help=helptext)
    parser.add_argument("--config", help="key=value file overriding flags")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="facefair",
        description="Face-fairness mesh optimization: denoising, fusion, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("denoise", help="mollify normals and correct vertices")
    _add_io_flags(p, gt=True, report=True)
    _add_param_flags(p)

    p = sub.add_parser("fuse", help="fit a smooth mesh to a vertex-normal field")
    _add_io_flags(p, gt=True, normals=True, report=True)
    _add_param_flags(p)

    p = sub.add_parser("addnoise", help="add seeded Gaussian vertex noise")
    _add_io_flags(p)
    p.add_argument("--sigma-rel", dest="sigma_rel", type=float, required=True,
                   help="per-coordinate std in multiples of the mean edge length")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="key=value file overriding flags")

    p = sub.add_parser("eval", help="metrics of a mesh against ground truth")
    _add_io_flags(p, out=False, gt=True, report=True)

    p = sub.add_parser("hist", help="corner-angle histogram CSV")
    _add_io_flags(p)
    p.add_argument("--bin-width", dest="bin_width", type=float, default=5.0)

    p = sub.add_parser("fixture", help="generate an experiment mesh")
    p.add_argument("--kind", required=True, choices=("cube", "sphere", "grid"))
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--grid-n", dest="grid_n", type=int, default=36)
    p.add_argument("--fraction", type=float, default=0.0,
                   help="fraction of interior edges to collapse (grid only)")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _settings(args):
    """Flag values with --config overrides applied."""
    values = {k: v for k, v in vars(args).items() if v is not None}
    config_path = values.pop("config", None)
    if config_path:
        for key, raw in read_config(config_path).items():
            if key not in _CONFIG_TYPES:
                raise MeshIOError(f"unknown config key {key!r}")
            values[key] = _CONFIG_TYPES[key](raw)
    return values


def _solver_params(values):
    kwargs = {
        k: values[k]
        for k in ("lambda_v", "eta", "sigma1", "sigma2", "delta", "max_iters",
                  "grad_tol", "method", "step_policy")
        if k in values
    }
    return SolverParams(**kwargs)


def _mollify_params(values):
    kwargs = {}
    if "lambda_n" in values:
        kwargs["lambda_n"] = values["lambda_n"]
    for src, dst in (
        ("mollify_sigma1", "sigma1"),
        ("mollify_sigma2", "sigma2"),
        ("mollify_max_iters", "max_iters"),
        ("mollify_grad_tol", "grad_tol"),
        ("reweight_every_iter", "reweight_every_iter"),
    ):
        if src in values:
            kwargs[dst] = values[src]
    return MollifyParams(**kwargs)


def _write_metrics(est, gt_path, report_path, extra=None):
    gt = read_mesh(gt_path)
    report = evaluate(est, gt)
    record = report.record()
    if extra:
        record.update(extra)
    write_report(record, report_path)


def _cmd_denoise(args):
    values = _settings(args)
    cfg = DenoiseConfig(
        mollify=_mollify_params(values),
        solver=_solver_params(values),
        outer_rounds=values.get("rounds", 2),
    )
    mesh = read_mesh(values["input"])
    result, diags = denoise(mesh, cfg)
    write_mesh(result, values["output"])
    if values.get("report"):
        if not values.get("ground_truth"):
            raise MeshIOError("--report needs --gt for error metrics")
        extra = {"rounds": str(len(diags))}
        for d in diags:
            extra[f"round{d.round_index}_flipped_faces"] = str(d.flipped_faces)
        _write_metrics(result, values["ground_truth"], values["report"], extra)
    return 0


def _cmd_fuse(args):
    values = _settings(args)
    mesh = read_mesh(values["input"])
    normals = read_normal_field(values["normals"], mesh.n_vertices)
    result, diags = fuse_normals(
        FusionInput(mesh, normals),
        _solver_params(values),
        outer_rounds=values.get("rounds", 1),
    )
    write_mesh(result, values["output"])
    if values.get("report"):
        if not values.get("ground_truth"):
            raise MeshIOError("--report needs --gt for error metrics")
        _write_metrics(result, values["ground_truth"], values["report"],
                       {"rounds": str(len(diags))})
    return 0


def _cmd_addnoise(args):
    values = _settings(args)
    mesh = read_mesh(values["input"])
    noisy = add_gaussian_noise(mesh, values["sigma_rel"], values.get("seed", 0))
    write_mesh(noisy, values["output"])
    return 0


def _cmd_eval(args):
    values = _settings(args)
    if not values.get("ground_truth"):
        raise MeshIOError("eval needs --gt")
    est = read_mesh(values["input"])
    gt = read_mesh(values["ground_truth"])
    record = evaluate(est, gt).record()
    if values.get("report"):
        write_report(record, values["report"])
    else:
        sys.stdout.write("".join(f"{k}={v}\n" for k, v in record.items()))
    return 0


def _cmd_hist(args):
    mesh = read_mesh(args.input)
    edges, counts = corner_angle_histogram(mesh, args.bin_width)
    write_histogram_csv(edges, counts, args.output)
    return 0


def _cmd_fixture(args):
    if args.kind == "cube":
        mesh = make_cube_mesh()
    elif args.kind == "sphere":
        mesh = make_sphere_mesh()
    else:
        mesh = make_grid_mesh(args.grid_n)
        if args.fraction > 0:
            mesh = collapse_edges(mesh, args.fraction, args.seed)
    write_mesh(mesh, args.output)
    return 0


_COMMANDS = {
    "denoise": _cmd_denoise,
    "fuse": _cmd_fuse,
    "addnoise": _cmd_addnoise,
    "eval": _cmd_eval,
    "hist": _cmd_hist,
    "fixture": _cmd_fixture,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (MeshError, MeshIOError, ValueError, OSError) as exc:
        message = " ".join(str(exc).split())
        print(f"error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
