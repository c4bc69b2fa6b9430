"""Command-line interface: every computation as a subcommand with artifacts.

Each run writes its CSV/JSON outputs plus a manifest recording the resolved
parameters, input hashes, output paths and wall time.  Numeric output uses
fixed 17-significant-digit formatting, so identical invocations produce
identical artifacts.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 property-check
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import eigen, sim, speeds, torus2d
from .errors import (
    EstimationError,
    NumericalFailureError,
    ParameterDomainError,
    StratafrontError,
)
from .media import (
    MediumKind,
    ReactionKind,
    ReactionSpec,
    load_medium,
    make_dirac_comb,
    medium_to_dict,
    mollify,
)

USAGE_EXIT = 2
NUMERICAL_EXIT = 3
PROPERTY_EXIT = 4


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, subcommand: str, params: dict, inputs: dict,
                    outputs: list[str], t0: float, status: str, extra: dict | None = None):
    manifest = {
        "subcommand": subcommand,
        "parameters": params,
        "input_hashes": inputs,
        # names relative to the manifest so the artifact set is relocatable
        "outputs": [Path(p).name for p in outputs],
        "wall_time_s": time.perf_counter() - t0,
        "status": status,
    }
    if extra:
        manifest["diagnostics"] = extra
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, default=str)


def _resolve_medium(args) -> tuple:
    """Medium plus input-hash dict from --medium or --comb."""
    if getattr(args, "medium", None):
        path = Path(args.medium)
        return load_medium(path), {"medium": _file_hash(path)}
    if getattr(args, "comb", None):
        parts = [float(v) for v in args.comb.split(",")]
        if len(parts) == 2:
            parts.append(1.0)
        if len(parts) != 3:
            raise ParameterDomainError("--comb expects alpha,L[,slope]")
        return make_dirac_comb(*parts), {}
    raise ParameterDomainError("provide --medium FILE or --comb alpha,L")


def _parse_grid(spec: str) -> np.ndarray:
    """start:stop:step with both endpoints included (up to roundoff)."""
    try:
        start, stop, step = (float(v) for v in spec.split(":"))
    except ValueError as exc:
        raise ParameterDomainError("grid must be start:stop:step") from exc
    if step <= 0 or stop < start:
        raise ParameterDomainError("grid needs step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


# ---------------------------------------------------------------------------
# subcommands


def cmd_dispersion(args) -> int:
    t0 = time.perf_counter()
    out_dir = Path(args.out)
    medium, inputs = _resolve_medium(args)
    lam_grid = _parse_grid(args.lambda_grid)
    samples = eigen.dispersion_curve(medium, args.theta, lam_grid, N=args.grid_N)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "dispersion.csv"
    eigen.dispersion_to_csv(samples, csv_path)
    _write_manifest(
        out_dir, "dispersion",
        {"theta": args.theta, "lambda_grid": args.lambda_grid, "grid_N": args.grid_N,
         "medium": medium_to_dict(medium)},
        inputs, [str(csv_path)], t0, "ok",
    )
    print(f"wrote {csv_path} ({len(samples)} rows)")
    return 0


def cmd_speeds(args) -> int:
    t0 = time.perf_counter()
    out_dir = Path(args.out)
    medium, inputs = _resolve_medium(args)
    thetas = np.linspace(0.0, math.pi / 2.0, args.theta_grid)
    rows = []
    for th in thetas:
        r = speeds.c_star(medium, float(th), N=args.grid_N)
        w, phi = speeds.spreading_speed(
            medium, float(th), phi_grid_size=args.phi_grid, N=args.grid_N
        )
        rows.append((float(th), r.c_star, r.lambda_star, w, phi))
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "speeds_polar.csv"
    speeds.speeds_to_csv(rows, csv_path)
    _write_manifest(
        out_dir, "speeds",
        {"theta_grid": args.theta_grid, "phi_grid": args.phi_grid,
         "grid_N": args.grid_N, "medium": medium_to_dict(medium)},
        inputs, [str(csv_path)], t0, "ok",
    )
    print(f"wrote {csv_path}")
    return 0


def cmd_wulff(args) -> int:
    t0 = time.perf_counter()
    out_dir = Path(args.out)
    medium, inputs = _resolve_medium(args)
    shape = speeds.wulff_shape(
        medium, theta_grid_size=args.theta_grid, phi_grid_size=args.phi_grid,
        N=args.grid_N,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    poly_path = out_dir / "wulff_polygon.csv"
    speeds.polygon_to_csv(shape.polygon, poly_path)
    polar_path = out_dir / "wulff_polar.csv"
    with open(polar_path, "w") as fh:
        fh.write("theta,w,phi_min,c_star\n")
        for th, w, phi, c in zip(
            shape.theta_grid, shape.w_values, shape.minimizer_phi, shape.offsets
        ):
            fh.write(f"{th:.17g},{w:.17g},{phi:.17g},{c:.17g}\n")
    _write_manifest(
        out_dir, "wulff",
        {"theta_grid": args.theta_grid, "phi_grid": args.phi_grid,
         "grid_N": args.grid_N, "medium": medium_to_dict(medium)},
        inputs, [str(poly_path), str(polar_path)], t0, "ok",
    )
    print(f"wrote {poly_path} and {polar_path}")
    return 0


def cmd_asymptotics(args) -> int:
    t0 = time.perf_counter()
    out_dir = Path(args.out)
    thetas = np.linspace(0.0, math.pi / 2.0, args.theta_grid)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "asymptotics.csv"
    h = make_dirac_comb(args.alpha, args.L, args.slope)
    with open(csv_path, "w") as fh:
        fh.write("theta,c_star,c_star_large_L_ref,w,w_large_L_ref\n")
        for th in thetas:
            c = speeds.c_star(h, float(th)).c_star
            cr = speeds.asymptotic_reference(
                float(th), args.alpha, args.L, args.slope, "large_L_cstar"
            )
            w, _ = speeds.spreading_speed(h, float(th), phi_grid_size=args.phi_grid)
            wr = speeds.asymptotic_reference(
                float(th), args.alpha, args.L, args.slope, "large_L_w"
            )
            fh.write(f"{th:.17g},{c:.17g},{cr:.17g},{w:.17g},{wr:.17g}\n")
    _write_manifest(
        out_dir, "asymptotics",
        {"alpha": args.alpha, "L": args.L, "slope": args.slope,
         "theta_grid": args.theta_grid, "phi_grid": args.phi_grid},
        {}, [str(csv_path)], t0, "ok",
    )
    print(f"wrote {csv_path}")
    return 0


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    out_dir = Path(args.out)
    cfg_path = Path(args.config)
    with open(cfg_path) as fh:
        raw = json.load(fh)
    cfg = _sim_config_from_dict(raw)
    result = sim.run_cauchy(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / "trace.csv"
    with open(trace_path, "w") as fh:
        fh.write("theta,t,r\n")
        for th, tr in result.traces.items():
            for t, r in zip(tr.times, tr.radii):
                fh.write(f"{th:.17g},{t:.17g},{r:.17g}\n")
    outputs = [str(trace_path)]
    if result.y is not None and args.contour:
        poly = sim.shape_snapshot(
            result.final, cfg.level_fraction, result.steady_state,
            result.x, result.y, cfg.T, mirrored=cfg.symmetric_quadrant,
        )
        contour_path = out_dir / "contour.csv"
        with open(contour_path, "w") as fh:
            fh.write("x,y\n")
            for x, y in poly:
                fh.write(f"{x:.17g},{y:.17g}\n")
        outputs.append(str(contour_path))
    meta_path = out_dir / "run_metadata.json"
    with open(meta_path, "w") as fh:
        fitted = {
            f"{th:.6g}": [result.traces[th].fitted_speed, result.traces[th].fit_stderr]
            for th in result.traces
        }
        json.dump({**result.metadata, "fitted_speeds": fitted}, fh, indent=1)
    outputs.append(str(meta_path))
    _write_manifest(
        out_dir, "simulate", raw, {"config": _file_hash(cfg_path)},
        outputs, t0, "ok", extra=result.metadata,
    )
    print(f"wrote {', '.join(outputs)}")
    return 0


def cmd_torus_demo(args) -> int:
    t0 = time.perf_counter()
    out_dir = Path(args.out)
    n_list = [int(v) for v in args.n.split(",")]
    report = torus2d.unboundedness_demo(args.alpha, args.L1, args.L2, n_list)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "torus_demo.csv"
    torus2d.unboundedness_to_csv(report, csv_path)
    status = "ok" if report.ok else "property-failure"
    _write_manifest(
        out_dir, "torus-demo",
        {"alpha": args.alpha, "L1": args.L1, "L2": args.L2, "n": n_list},
        {}, [str(csv_path)], t0, status,
        extra={
            "mu_strictly_decreasing": report.mu_strictly_decreasing,
            "c_strictly_increasing": report.c_strictly_increasing,
            "divergence_witness": report.divergence_witness,
        },
    )
    print(f"wrote {csv_path}")
    if not report.ok:
        print(
            "property check failed: "
            f"mu decreasing={report.mu_strictly_decreasing}, "
            f"c increasing={report.c_strictly_increasing}, "
            f"witness={report.divergence_witness}",
            file=sys.stderr,
        )
        return PROPERTY_EXIT
    return 0


def _sim_config_from_dict(raw: dict) -> sim.SimConfig:
    from .media import medium_from_dict

    medium = medium_from_dict(raw["medium"])
    if medium.kind is MediumKind.DIRAC_COMB:
        # the solver needs a density; widen atoms to the minimum the grid sees
        medium = mollify(medium, max(2.0 * raw["dx"], raw.get("eps", 0.0)))
    rkind = ReactionKind(raw.get("reaction", {}).get("kind", "F1"))
    if rkind is ReactionKind.F1:
        reaction = ReactionSpec(rkind, slope=raw.get("reaction", {}).get("slope", 1.0))
    else:
        reaction = ReactionSpec(rkind, kappa=raw.get("reaction", {}).get("kappa", 1.0))
    return sim.SimConfig(
        medium=medium,
        reaction=reaction,
        X=raw["X"],
        dx=raw["dx"],
        T=raw["T"],
        Y=raw.get("Y"),
        dy=raw.get("dy"),
        dt=raw.get("dt"),
        r0=raw.get("r0", 2.0),
        amplitude=raw.get("amplitude", 1.0),
        thetas=tuple(raw.get("thetas", [0.0])),
        level_fraction=raw.get("level_fraction", 0.5),
        trace_interval=raw.get("trace_interval", 0.1),
        symmetric_quadrant=raw.get("symmetric_quadrant", False),
    )


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="stratafront",
        description="Front speeds and spreading shapes in stratified periodic media",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add_medium_opts(q):
        q.add_argument("--medium", help="JSON medium file")
        q.add_argument("--comb", help="alpha,L[,slope] for a Dirac comb")
        q.add_argument("--grid-N", type=int, default=256, dest="grid_N")
        q.add_argument("--out", default=".", help="output directory")

    q = sub.add_parser("dispersion", help="principal-eigenvalue curve over decay rates")
    add_medium_opts(q)
    q.add_argument("--theta", type=float, default=0.0)
    q.add_argument("--lambda-grid", default="0:2:0.1", dest="lambda_grid")
    q.set_defaults(func=cmd_dispersion)

    q = sub.add_parser("speeds", help="minimal and spreading speeds over directions")
    add_medium_opts(q)
    q.add_argument("--theta-grid", type=int, default=19, dest="theta_grid")
    q.add_argument("--phi-grid", type=int, default=128, dest="phi_grid")
    q.set_defaults(func=cmd_speeds)

    q = sub.add_parser("wulff", help="spreading-set polygon and polar speeds")
    add_medium_opts(q)
    q.add_argument("--theta-grid", type=int, default=128, dest="theta_grid")
    q.add_argument("--phi-grid", type=int, default=256, dest="phi_grid")
    q.set_defaults(func=cmd_wulff)

    q = sub.add_parser("asymptotics", help="computed vs large-period reference speeds")
    q.add_argument("--alpha", type=float, required=True)
    q.add_argument("--L", type=float, required=True)
    q.add_argument("--slope", type=float, default=1.0)
    q.add_argument("--theta-grid", type=int, default=19, dest="theta_grid")
    q.add_argument("--phi-grid", type=int, default=128, dest="phi_grid")
    q.add_argument("--out", default=".")
    q.set_defaults(func=cmd_asymptotics)

    q = sub.add_parser("simulate", help="direct Cauchy-problem run from a JSON config")
    q.add_argument("--config", required=True)
    q.add_argument("--contour", action="store_true", help="emit the final level-set polygon")
    q.add_argument("--out", default=".")
    q.set_defaults(func=cmd_simulate)

    q = sub.add_parser("torus-demo", help="unbounded speeds over doubly periodic media")
    q.add_argument("--alpha", type=float, default=1.0)
    q.add_argument("--L1", type=float, default=1.0)
    q.add_argument("--L2", type=float, default=1.0)
    q.add_argument("--n", default="1,2,4,8,16")
    q.add_argument("--out", default=".")
    q.set_defaults(func=cmd_torus_demo)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else USAGE_EXIT
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        # ParameterDomainError subclasses ValueError: malformed flags land here
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (NumericalFailureError, EstimationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_EXIT
    except StratafrontError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
