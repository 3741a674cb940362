"""Command-line interface: run configs, benchmarks, verification, sweeps."""

from __future__ import annotations

import argparse
import json
import os
import pathlib
import sys
import time


def _apply_thread_env():
    """Honor PFX4_THREADS by capping the numeric libraries' thread pools."""
    n = os.environ.get("PFX4_THREADS")
    if not n:
        return
    try:
        workers = max(int(n), 1)
    except ValueError:
        print(f"warning: ignoring non-integer PFX4_THREADS={n!r}",
              file=sys.stderr)
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, str(workers))
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(workers)
    except ImportError:
        pass


def _run_spec(spec, outdir: pathlib.Path, vtk_every: int = 0,
              quiet: bool = False) -> dict:
    import numpy as np

    from .bench import build_simulation, crack_points
    from .probes import ProbeRecorder, write_line_csv, write_probe_csv
    from .vtk_io import simulation_point_data, write_vtk

    outdir.mkdir(parents=True, exist_ok=True)
    sim, probes = build_simulation(spec)
    rec = ProbeRecorder(sim, probes, every=spec.output_every)
    frames = []

    def callback(state):
        rec(state)
        if vtk_every and state.step % vtk_every == 0:
            frames.append(state.step)
            pd, cd = simulation_point_data(sim)
            write_vtk(outdir / f"field_{state.step:06d}.vtk",
                      sim.mesh_pf, pd, cd)

    t0 = time.perf_counter()
    sim.run(callback, report_every=0 if quiet else 50)
    wall = time.perf_counter() - t0
    write_probe_csv(outdir / "probes.csv", rec.times, rec.series)
    for p in rec.line_probes:
        write_line_csv(outdir / f"line_{p.name}.csv",
                       rec.line_arclength[p.name], rec.lines[p.name])
    pd, cd = simulation_point_data(sim)
    write_vtk(outdir / "field_final.vtk", sim.mesh_pf, pd, cd)
    pts = crack_points(sim.mesh_pf, sim.state.d)
    summary = {
        "benchmark": spec.name,
        "scheme": spec.scheme,
        "beta_s2": spec.beta_s2,
        "mesh_level": spec.mesh_level,
        "steps": sim.state.step,
        "t_end": sim.state.time,
        "max_d": float(sim.state.d.max()),
        "crack_nodes": int(len(pts)),
        "wall_seconds": wall,
    }
    with open(outdir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    if not quiet:
        print(json.dumps(summary, indent=2))
    return summary


def _cmd_run(args) -> int:
    from .config import load_file, spec_from_config

    spec = spec_from_config(load_file(args.config))
    outdir = pathlib.Path(args.out or f"out_{spec.name}_{spec.scheme}")
    _run_spec(spec, outdir, vtk_every=args.vtk_every, quiet=args.quiet)
    return 0


def _cmd_bench(args) -> int:
    from .bench import branching_plate_spec, shear_plate_spec

    maker = {"shear_plate": shear_plate_spec,
             "branching_plate": branching_plate_spec}[args.name]
    kwargs = dict(scheme=args.scheme, mesh_level=args.mesh_level)
    if args.beta_s2 is not None:
        kwargs["beta_s2"] = args.beta_s2
    if args.t_final is not None:
        kwargs["t_final"] = args.t_final
    spec = maker(**kwargs)
    outdir = pathlib.Path(args.out
                          or f"out_{spec.name}_{spec.scheme}_{spec.mesh_level}")
    _run_spec(spec, outdir, vtk_every=args.vtk_every, quiet=args.quiet)
    return 0


def _cmd_sweep(args) -> int:
    from .config import load_file, spec_from_config
    from dataclasses import replace

    base = spec_from_config(load_file(args.config))
    values = [float(v) for v in args.values.split(",")]
    root = pathlib.Path(args.out or f"sweep_{base.name}_{base.scheme}")
    for v in values:
        spec = replace(base, beta_s2=v)
        _run_spec(spec, root / f"beta_{v:g}", vtk_every=args.vtk_every,
                  quiet=args.quiet)
    print(f"sweep complete: {len(values)} runs under {root}")
    return 0


def _cmd_verify(args) -> int:
    import numpy as np

    checks: list[tuple[str, bool, str]] = []

    def record(name, ok, detail):
        checks.append((name, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")

    from . import mesh as msh
    from .constitutive import MaterialParams, energy_density, stress_tangent
    from .fe_basis import eval_basis, reference_element
    from .pf_cdg import CdgScheme, PFCoefficients, jump_average
    from .pf_mixed import MixedScheme
    from .profiles import profile_fourth_order, regularized_crack_length

    # basis: partition of unity and exact Laplacian of a quadratic
    sq = msh.promote_q4_to_q9(msh.Mesh(
        np.array([[0.0, 0], [2, 0], [2, 1], [0, 1]]), np.array([[0, 1, 2, 3]])))
    ev = eval_basis(reference_element("q9"), sq.element_coords(), second=True)
    lap = np.einsum("a,qaii->q", sq.nodes[sq.elements[0], 0] ** 2,
                    ev.d2N_dX2[0])
    err = max(float(np.abs(ev.N.sum(-1) - 1).max()),
              float(np.abs(lap - 2.0).max()))
    record("basis quadratic completeness", err < 1e-10, f"err {err:.1e}")

    # constitutive: stress against finite differences of the energy
    p = MaterialParams(210e3, 0.3, gc=2.7, l0=3.75e-3)
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(5):
        F = np.eye(2) + 0.1 * rng.standard_normal((2, 2))
        from .constitutive import kinematics_from_F

        C3, J = kinematics_from_F(F)
        st = stress_tangent(p, C3, 0.5)
        h = 1e-6
        for i in range(3):
            for j in range(3):
                dC = np.zeros((3, 3))
                dC[i, j] += 0.5 * h
                dC[j, i] += 0.5 * h
                sfd = (energy_density(p, C3 + dC, 0.5)
                       - energy_density(p, C3 - dC, 0.5)) / h
                worst = max(worst, abs(2 * sfd - 2 * st.S[i, j])
                            / max(abs(st.S).max(), 1.0))
    record("stress vs energy finite differences", worst < 1e-6,
           f"rel err {worst:.1e}")

    # jump/average product identity
    rng = np.random.default_rng(3)
    vp, vm = rng.standard_normal((2, 50, 2))
    lp, lm = rng.standard_normal((2, 50))
    n = rng.standard_normal((50, 2))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    jv, av = jump_average(vp, vm, n)
    jl, al = jump_average(lp, lm, n)
    lhs, _ = jump_average(lp[:, None] * vp, lm[:, None] * vm, n)
    rhs = al * jv + np.sum(jl * av, axis=-1)
    err = float(np.abs(lhs - rhs).max())
    record("jump/average product identity", err < 1e-13, f"err {err:.1e}")

    # analytic strip profile, all three schemes
    l0, L = 0.08, 1.0
    h = l0 / 4
    nx = int(round(2 * L / h))
    mq4 = msh.generate_rectangle(np.linspace(-L, L, nx + 1),
                                 np.linspace(0, 2 * h, 3))
    mq9 = msh.promote_q4_to_q9(mq4)
    mq9.side_sets["outer"] = mq9.boundary_faces()
    co = PFCoefficients.from_material(1.0, l0, beta_scaled=10.0)
    errs = {}
    clamp9 = mq9.select_nodes(lambda x, y: np.abs(x) < 1e-9)
    ends9 = mq9.select_nodes(lambda x, y: np.abs(np.abs(x) - L) < 1e-9)
    cdg = CdgScheme(mq9, co, 1e-6, d2_set="outer", dirichlet_nodes=clamp9)
    d = cdg.solve(0.0)
    errs["CDG_Q9"] = np.abs(d - profile_fourth_order(mq9.nodes[:, 0], l0)).max()
    gamma = regularized_crack_length(mq9, d, l0) / (2 * h)
    mx = MixedScheme(mq9, co, 1e-6, psi_dirichlet=ends9,
                     dirichlet_nodes=clamp9)
    dm = mx.extract_d(mx.solve(0.0))
    errs["MIXED_Q9Q9"] = np.abs(
        dm - profile_fourth_order(mq9.nodes[:, 0], l0)).max()
    clamp4 = mq4.select_nodes(lambda x, y: np.abs(x) < 1e-9)
    ends4 = mq4.select_nodes(lambda x, y: np.abs(np.abs(x) - L) < 1e-9)
    mx4 = MixedScheme(mq4, co, 1e-6, psi_dirichlet=ends4,
                      dirichlet_nodes=clamp4)
    d4 = mx4.extract_d(mx4.solve(0.0))
    errs["MIXED_Q4Q4"] = np.abs(
        d4 - profile_fourth_order(mq4.nodes[:, 0], l0)).max()
    for k, v in errs.items():
        record(f"1D profile {k}", v < 1e-2, f"Linf {v:.2e}")
    record("regularized crack length", abs(gamma - 1.0) < 0.01,
           f"Gamma {gamma:.4f}")

    # momentum Jacobian against finite differences
    from .momentum import DirichletBC, MomentumSolver

    mesh = msh.generate_rectangle(np.linspace(0, 1, 3), np.linspace(0, 1, 3))
    ms = MomentumSolver(mesh, MaterialParams(210e3, 0.3, rho0=8e-9),
                        [DirichletBC(mesh.node_sets["bottom"], 0, 0.0),
                         DirichletBC(mesh.node_sets["bottom"], 1, 0.0)])
    rng = np.random.default_rng(11)
    u = 1e-3 * rng.standard_normal(ms.ndof)
    dq = rng.uniform(0, 0.4, (mesh.n_elements, 4))
    R, K = ms.residual_jacobian(u, dq, 0.0)
    worst = 0.0
    for _ in range(5):
        v = rng.standard_normal(ms.ndof)
        v /= np.linalg.norm(v)
        hs = 1e-7
        Rp, _ = ms.residual_jacobian(u + hs * v, dq, 0.0, want_jacobian=False)
        Rm, _ = ms.residual_jacobian(u - hs * v, dq, 0.0, want_jacobian=False)
        worst = max(worst, float(np.linalg.norm((Rp - Rm) / (2 * hs) - K @ v)
                                 / np.linalg.norm(K @ v)))
    record("momentum Jacobian vs finite differences", worst < 1e-6,
           f"rel err {worst:.1e}")

    failed = [c for c in checks if not c[1]]
    print(f"\n{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 1 if failed else 0


def main(argv=None) -> int:
    _apply_thread_env()
    ap = argparse.ArgumentParser(
        prog="pfx4",
        description="Fourth-order phase-field fracture solver (plane strain)")
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configuration file")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--vtk-every", type=int, default=0)
    p_run.add_argument("--quiet", action="store_true")
    p_run.set_defaults(func=_cmd_run)

    p_bench = sub.add_parser("bench", help="run a built-in benchmark")
    p_bench.add_argument("name",
                         choices=("shear_plate", "branching_plate"))
    p_bench.add_argument("--scheme", default="CDG_Q9",
                         choices=("CDG_Q9", "MIXED_Q9Q9", "MIXED_Q4Q4"))
    p_bench.add_argument("--beta-s2", type=float, default=None)
    p_bench.add_argument("--mesh-level", default="coarse")
    p_bench.add_argument("--t-final", type=float, default=None)
    p_bench.add_argument("--out", default=None)
    p_bench.add_argument("--vtk-every", type=int, default=0)
    p_bench.add_argument("--quiet", action="store_true")
    p_bench.set_defaults(func=_cmd_bench)

    p_ver = sub.add_parser("verify",
                           help="run the analytic/finite-difference oracles")
    p_ver.set_defaults(func=_cmd_verify)

    p_sweep = sub.add_parser("sweep-penalty",
                             help="re-run a config over penalty values")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated beta_s2 values")
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--vtk-every", type=int, default=0)
    p_sweep.add_argument("--quiet", action="store_true")
    p_sweep.set_defaults(func=_cmd_sweep)

    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
