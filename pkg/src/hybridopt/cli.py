"""Command-line interface: run, verify, radii, gclosure-table."""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _cmd_run(args) -> int:
    from .config import ConfigError, load_config
    from .driver import RunAborted, run_hybrid

    try:
        cfg = load_config(args.config)
        if args.out_dir:
            cfg = cfg.replace(out_dir=args.out_dir)
        res = run_hybrid(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RunAborted as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    s = res.summary
    print(f"crossings: {', '.join('%.4f' % r for r in s['radii'])}")
    print(f"interface radii: {', '.join('%.4f' % r for r in s['interface_radii'])}")
    print(f"outer boundary rms: {s['outer_rms_levelset']:.4f}")
    print(f"J: {s['J_before_refinement']:.8g} -> {s['J_final']:.8g}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .verify import UnknownSuite, verify

    try:
        rep = verify(args.suite)
    except UnknownSuite:
        print(f"unknown suite {args.suite!r}", file=sys.stderr)
        return EXIT_CONFIG
    data = rep.to_dict()
    text = json.dumps(data, indent=2)
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    for suite, checks in data["suites"].items():
        for c in checks:
            print(f"{'PASS' if c['passed'] else 'FAIL'} {suite}.{c['name']}: {c['value']:.3e}",
                  file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_VERIFY


def _cmd_radii(args) -> int:
    from .radii import measure_interface_radii, radial_profile
    from .vtkio import VTKFormatError, read_vtk
    from .geometry import TriMesh

    try:
        title, verts, tris, _, cd = read_vtk(args.vtk)
    except (OSError, VTKFormatError) as exc:
        print(f"cannot read {args.vtk}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if "theta" not in cd:
        print("file has no theta cell data", file=sys.stderr)
        return EXIT_CONFIG
    h = args.h
    if h is None:
        for tok in title.split():
            if tok.startswith("h_target="):
                h = float(tok.split("=", 1)[1])
    active = cd["active"] > 0 if "active" in cd else np.ones(len(tris), dtype=bool)
    used = np.unique(tris[active])
    remap = -np.ones(len(verts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    mesh = TriMesh(verts[used], remap[tris[active]], np.zeros((0, 2), np.int64), np.zeros(0, "<U6"))
    theta = cd["theta"][active]
    radii = measure_interface_radii(mesh, theta, h)
    prof = radial_profile(mesh, theta, h if h is not None else float(np.mean(mesh.edge_lengths())))
    print(json.dumps({"radii": radii, "not_radial": prof.not_radial}))
    return EXIT_OK


def _cmd_table(args) -> int:
    from . import gclosure as gc

    try:
        if args.grid_n < 2:
            raise gc.DomainError("grid-n must be at least 2")
        gc.lambda_bounds(0.0, args.alpha, args.beta)
    except gc.DomainError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    thetas = np.linspace(0.0, 1.0, args.grid_n)
    ms = np.linspace(-1.0, 1.0, args.grid_n)
    out = sys.stdout
    out.write("theta,m1,m2,F,dF\n")
    for t in thetas:
        for i, m1 in enumerate(ms):
            for m2 in ms[: i + 1]:
                M = np.diag([m1, m2])
                F = gc.maximize_F(t, M, args.alpha, args.beta)[0]
                dF = gc.dF_dtheta(t, M, args.alpha, args.beta)
                out.write("%.17g,%.17g,%.17g,%.17g,%.17g\n" % (t, m1, m2, F, dF))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybridopt",
                                description="Hybrid homogenization / shape optimization")
    p.add_argument("-v", "--verbose", action="store_true", help="log every outer iteration")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the hybrid optimization for a config file")
    r.add_argument("config")
    r.add_argument("--out-dir", help="override out_dir from the config")
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("verify", help="run verification suites")
    v.add_argument("suite", help="gclosure, fem, shape, oc or all")
    v.add_argument("--json", help="write the JSON report here instead of stdout")
    v.set_defaults(func=_cmd_verify)

    d = sub.add_parser("radii", help="interface radii of a dumped design")
    d.add_argument("vtk")
    d.add_argument("--h", type=float, help="bin half-width (default: from the file title)")
    d.set_defaults(func=_cmd_radii)

    t = sub.add_parser("gclosure-table", help="print F and dF/dtheta on a grid as CSV")
    t.add_argument("alpha", type=float)
    t.add_argument("beta", type=float)
    t.add_argument("grid_n", type=int)
    t.set_defaults(func=_cmd_table)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
