"""Command-line interface.

Subcommands: run (full pipeline), step (single iteration from a dumped
triple), blocks (building-block scaling tables), temporal (oscillator
tables), verify (re-check invariants of a dumped triple), plot (heatmap
slices and log-log norm plots).  Flags mirror config-file keys; CLI
values win on conflict.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

__all__ = ["main"]


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=str, default=None, help="flat key = value config file")
    p.add_argument("--out", type=str, default="out")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--grid", type=int, default=None, help="points per spatial axis")
    p.add_argument("--time-grid", type=int, default=None)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--mode", choices=["validated", "desk"], default=None)
    p.add_argument("--mu", type=str, default=None)
    p.add_argument("--kappa", type=int, default=None)
    p.add_argument("--sigma", type=int, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--dump-fields", action="store_true", default=None)
    p.add_argument("--tolerance", type=float, default=None)


_CONFIG_KEYS = {
    "p": float, "q": float, "d": int, "n_space": int, "n_time": int,
    "mode": str, "lam": float, "mu": float, "kappa": int, "sigma": int,
    "iterations": int, "epsilon": float, "scenario": str, "seed": int,
    "out_dir": str, "dump_fields": lambda s: s.lower() in ("1", "true", "yes"),
    "tolerance": float, "max_escalations": int,
}


def _build_config(args) -> "RunConfig":
    from .driver import RunConfig
    from .io import load_config

    cfg = RunConfig()
    if args.config:
        for key, raw in load_config(args.config).items():
            if key not in _CONFIG_KEYS:
                raise SystemExit(f"unknown config key {key!r}")
            setattr(cfg, key, _CONFIG_KEYS[key](raw))
    overrides = {
        "d": args.dim, "n_space": args.grid, "n_time": args.time_grid,
        "p": args.p, "q": args.q, "mode": args.mode, "kappa": args.kappa,
        "sigma": args.sigma, "lam": args.lam, "iterations": args.iterations,
        "tolerance": args.tolerance, "out_dir": args.out,
        "dump_fields": args.dump_fields,
    }
    if args.mu is not None:
        overrides["mu"] = float(args.mu.split(",")[0])
    for key, val in overrides.items():
        if val is not None:
            setattr(cfg, key, val)
    return cfg


def _cmd_run(args) -> int:
    from .driver import run

    cfg = _build_config(args)
    try:
        run(cfg)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def _cmd_step(args) -> int:
    from .driver import GridSpec, SolutionTriple, iterate
    from .io import read_cifield, write_cifield
    from .perturbation import choose_parameters

    cfg = _build_config(args)
    rho_arrays, meta = read_cifield(args.rho)
    u_arrays, _ = read_cifield(args.u) if args.u else (None, None)
    R_arrays, _ = read_cifield(args.R)
    grid = GridSpec(meta["dim"], meta["n_space"], meta["n_time"])
    triple = SolutionTriple(grid=grid, rho=rho_arrays[0], u=u_arrays, R=R_arrays)
    sched = choose_parameters(
        cfg.p, cfg.q, cfg.lam, mode=cfg.mode, d=grid.dim,
        mu=cfg.mu, kappa=cfg.kappa, sigma=cfg.sigma,
    )
    delta = args.delta if args.delta is not None else triple.R_l1()
    new, bd, _ = iterate(triple, delta=delta, nu=args.nu, schedule=sched,
                         keep_pieces=False)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_cifield(out / "rho.cifield", new.rho, grid.dim, grid.n_space, grid.n_time)
    write_cifield(out / "u.cifield", new.u, grid.dim, grid.n_space, grid.n_time)
    write_cifield(out / "R.cifield", new.R, grid.dim, grid.n_space, grid.n_time)
    print(f"residual {new.residual:.3e}, ||R1||_1 {new.R_l1():.4e}")
    for name, val in bd.norms.items():
        print(f"  {name}: {val:.4e}")
    return 0 if new.residual <= cfg.tolerance else 1


def _cmd_blocks(args) -> int:
    import csv

    from .mikado import block_norm_table, build_blocks, fit_loglog_slope

    mus = [float(m) for m in args.mu.split(",")] if args.mu else [8.0, 16.0, 32.0]
    p = args.p or 2.0
    q = args.q or 1.3
    d = args.dim or 3
    rs = [1.0, 2.0, q, p / (p - 1.0)]
    rows = []
    for mu in mus:
        n = args.grid or int(8 * mu)
        blocks = build_blocks(mu, p, n, d)
        rows.extend(block_norm_table(blocks[0], rs, [0, 1]))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "block_norms.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {path}")
    if len(mus) >= 2:
        for name, base in (
            ("density", (d - 1) / p),
            ("field", (d - 1) * (1 - 1 / p)),
            ("potential", -1 + (d - 1) / p),
        ):
            for m in (0, 1):
                for r in rs:
                    ys = [row[name] for row in rows if row["m"] == m and row["r"] == r]
                    slope = fit_loglog_slope(mus, ys)
                    expect = m + base - (d - 1) / r
                    print(f"{name} m={m} r={r:g}: slope {slope:+.4f} (expected {expect:+.4f})")
    return 0


def _cmd_temporal(args) -> int:
    import csv

    from .temporal import build_oscillator, intermittency_table

    kappas = [int(k) for k in (args.kappas or "2,4,8,16").split(",")]
    n_time = args.time_grid or 4096
    rows = []
    for k in kappas:
        osc = build_oscillator(k, 1, n_time)
        rows.extend(intermittency_table(osc, [1.0, 2.0, np.inf]))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "oscillator_norms.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {path}")
    return 0


def _cmd_verify(args) -> int:
    from .defect import residual_check
    from .io import read_cifield

    rho_arrays, meta = read_cifield(args.rho)
    u_arrays = read_cifield(args.u)[0] if args.u else None
    R_arrays, _ = read_cifield(args.R)
    d = meta["dim"]
    tol = args.tolerance or 1e-5
    res = residual_check(rho_arrays[0], u_arrays, R_arrays, d)
    ok = res <= tol
    print(f"residual {res:.3e} ({'ok' if ok else 'FAIL'} at tolerance {tol:g})")
    if u_arrays is not None:
        from . import _spectral as sp

        divu = sp.spatial_divergence(u_arrays, d)
        rel = float(np.sqrt(np.mean(divu**2)))
        scale = max(float(np.max(np.abs(u_arrays[0]))), 1e-300) * meta["n_space"]
        print(f"div u (relative) {rel / scale:.3e}")
        ok = ok and rel / scale <= 1e-8
    return 0 if ok else 1


def _cmd_plot(args) -> int:
    import csv

    from .io import heatmap_ppm, loglog_scatter_ppm, read_cifield

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    wrote = []
    if args.field:
        arrays, meta = read_cifield(args.field)
        a = arrays[args.component]
        sl = a[meta["n_time"] // 2]
        while sl.ndim > 2:
            sl = sl[sl.shape[0] // 2]
        stem = Path(args.field).stem
        ppm = out / f"{stem}_slice.ppm"
        heatmap_ppm(ppm, sl)
        wrote.append(ppm)
        try:
            import matplotlib

            matplotlib.use("Agg")
            import matplotlib.pyplot as plt

            fig, ax = plt.subplots()
            im = ax.imshow(sl, cmap="RdBu_r")
            fig.colorbar(im)
            png = out / f"{stem}_slice.png"
            fig.savefig(png, dpi=120)
            plt.close(fig)
            wrote.append(png)
        except ImportError:
            pass
    if args.ledger:
        with open(args.ledger) as fh:
            rows = list(csv.DictReader(fh))
        names = sorted({r["name"] for r in rows if r["name"].startswith("defect_")})
        for name in names:
            pts = [(int(r["iteration"]), float(r["value"])) for r in rows if r["name"] == name]
            if len(pts) < 2:
                continue
            xs, ys = zip(*pts)
            ppm = out / f"{name}_loglog.ppm"
            loglog_scatter_ppm(ppm, xs, ys)
            wrote.append(ppm)
    for w in wrote:
        print(f"wrote {w}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="convint",
        description="Construct and verify oscillatory solutions of the "
        "continuity-defect equation on the periodic torus.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full pipeline: init + iterations + artifacts")
    _add_common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_step = sub.add_parser("step", help="one iteration from dumped fields")
    _add_common(p_step)
    p_step.add_argument("--rho", required=True)
    p_step.add_argument("--u", default=None)
    p_step.add_argument("--R", required=True)
    p_step.add_argument("--nu", type=float, default=0.5)
    p_step.add_argument("--delta", type=float, default=None)
    p_step.set_defaults(func=_cmd_step)

    p_blocks = sub.add_parser("blocks", help="building-block scaling tables")
    _add_common(p_blocks)
    p_blocks.set_defaults(func=_cmd_blocks)

    p_temp = sub.add_parser("temporal", help="oscillator intermittency tables")
    _add_common(p_temp)
    p_temp.add_argument("--kappas", type=str, default=None)
    p_temp.set_defaults(func=_cmd_temporal)

    p_ver = sub.add_parser("verify", help="re-check invariants of dumped fields")
    _add_common(p_ver)
    p_ver.add_argument("--rho", required=True)
    p_ver.add_argument("--u", default=None)
    p_ver.add_argument("--R", required=True)
    p_ver.set_defaults(func=_cmd_verify)

    p_plot = sub.add_parser("plot", help="heatmap slices and norm plots")
    _add_common(p_plot)
    p_plot.add_argument("--field", default=None, help="CIFIELD dump to slice")
    p_plot.add_argument("--component", type=int, default=0)
    p_plot.add_argument("--ledger", default=None, help="ledger CSV for log-log plots")
    p_plot.set_defaults(func=_cmd_plot)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
