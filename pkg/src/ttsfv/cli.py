"""Command-line front end: ``ttsfv <verb> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import scenarios as sc_mod
from .config import ConfigError, RunConfig, load_config
from .cross import CrossConfig

log = logging.getLogger("ttsfv")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
VERBS = ("run", "converge", "scale", "oracle-compare", "list-scenarios")


def _max_rank_arg(text: str):
    if text.lower() in ("none", "inf"):
        return "none"
    parts = [int(p) for p in text.split(",")]
    return parts[0] if len(parts) == 1 else parts


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ttsfv", description="Tensor-train stochastic finite volumes")
    ap.add_argument("verb", choices=VERBS)
    ap.add_argument("--config", type=Path)
    ap.add_argument("--scenario")
    ap.add_argument("--cells", type=int, help="cells per physical axis")
    ap.add_argument("--stochastic-cells", type=int, help="cells per stochastic axis")
    ap.add_argument("--distribution", help="uniform or beta(a,b) (Burgers only)")
    ap.add_argument("--eps", type=float, help="TT rounding and cross tolerance")
    ap.add_argument("--max-rank", type=_max_rank_arg, help="int, comma list per bond, or none")
    ap.add_argument("--integrator", choices=("Euler", "SSP22", "SSP33"))
    ap.add_argument("--cfl", type=float)
    ap.add_argument("--t-final", type=float)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", type=Path)
    ap.add_argument("--norm", choices=("L1", "L2", "Linf"))
    ap.add_argument("--grids", help="comma list of cell counts for converge")
    ap.add_argument("--m-values", help="comma list of stochastic dimensions for scale")
    ap.add_argument("--steps", type=int, help="time steps timed per run in scale")
    ap.add_argument("--repeats", type=int)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def merge_args(cfg: RunConfig, args) -> RunConfig:
    cfg.mode = args.verb if args.verb != "list-scenarios" else cfg.mode
    if args.scenario:
        cfg.scenario = args.scenario
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output = str(args.out)
    if args.distribution:
        cfg.distribution = args.distribution
    if args.cells is not None:
        cfg.mesh.cells = args.cells
    if args.stochastic_cells is not None:
        cfg.mesh.stochastic_cells = args.stochastic_cells
    s = cfg.solver
    s.epsilon_tt = args.eps if args.eps is not None else s.epsilon_tt
    s.max_rank = args.max_rank if args.max_rank is not None else s.max_rank
    s.integrator = args.integrator or s.integrator
    s.cfl = args.cfl if args.cfl is not None else s.cfl
    s.t_final = args.t_final if args.t_final is not None else s.t_final
    if args.norm:
        cfg.study.norm = args.norm
    if args.grids:
        cfg.study.grids = [int(g) for g in args.grids.split(",")]
    if args.m_values:
        cfg.study.m_values = [int(m) for m in args.m_values.split(",")]
    if args.steps is not None:
        cfg.study.steps = args.steps
    if args.repeats is not None:
        cfg.study.repeats = args.repeats
    return cfg.validate()


def solver_overrides(cfg: RunConfig, scenario) -> dict:
    s = cfg.solver
    ov = {"epsilon_tt": s.epsilon_tt, "max_rank": s.max_rank, "integrator": s.integrator, "cfl": s.cfl,
          "t_final": s.t_final, "nu": s.nu, "weights": s.weights, "seed": cfg.seed}
    c = {k: v for k, v in vars(cfg.cross).items() if v is not None}
    eps = s.epsilon_tt if s.epsilon_tt is not None else scenario.settings.get("epsilon_tt", 1e-6)
    if c:
        c.setdefault("max_rank", scenario.settings.get("cross_max_rank", 64))
        ov["flux_cross"] = CrossConfig(target_tolerance=eps, **c)
    return ov


def _thread_limit():
    n = os.environ.get("TT_SFV_THREADS")
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def cmd_list() -> int:
    for name in sorted(sc_mod.REGISTRY):
        s = sc_mod.get_scenario(name)
        print(f"{name:16s} n={s.mesh.n} m={s.mesh.m} t_final={s.t_final:g}  {s.description}")
    return EXIT_OK


def cmd_run(cfg: RunConfig) -> int:
    from .output import emit_outputs
    from .stats import run_scenario, stat_fields

    scen = sc_mod.build_scenario(cfg.scenario, cfg.mesh.cells, cfg.mesh.stochastic_cells, cfg.distribution)

    def tele(rec):
        log.info("step %d t=%.5g dt=%.3g ranks=%s", rec.step, rec.t, rec.dt, rec.ranks)

    solver, _, s1, rep = run_scenario(scen, telemetry=tele, **solver_overrides(cfg, scen))
    fields = stat_fields(s1, solver.measure, min(solver.cfg.epsilon_tt, 1e-8))
    paths = emit_outputs(cfg.output, scen.name, fields, rep, cfg.to_dict())
    print(f"{scen.name}: {rep.n_steps} steps to t={s1.t:.6g}, max rank {rep.max_rank}, "
          f"{rep.loop_seconds:.2f}s")
    for p in paths:
        print(f"  wrote {p}")
    return EXIT_OK


def cmd_converge(cfg: RunConfig) -> int:
    from .output import write_table
    from .stats import convergence_study

    name = cfg.scenario
    if name not in ("advection",):
        raise ConfigError("converge needs a scenario with a closed-form mean (advection)")
    probe = sc_mod.get_scenario(name)
    rows = convergence_study(sc_mod.REGISTRY[name], cfg.study.grids, cfg.study.norm,
                             **solver_overrides(cfg, probe))
    header = ["cells", "h", "error", "order", "max_rank", "steps", "seconds"]
    table = [[r.cells, r.h, r.error, r.order, r.max_rank, r.steps, r.seconds] for r in rows]
    path = write_table(Path(cfg.output) / f"{name}_convergence.csv", header, table)
    for r in rows:
        order = "" if r.order is None else f"{r.order:.3f}"
        print(f"N={r.cells:5d}  {cfg.study.norm} error={r.error:.4e}  order={order}  rank={r.max_rank}")
    print(f"  wrote {path}")
    return EXIT_OK


def cmd_scale(cfg: RunConfig) -> int:
    from .output import write_table
    from .stats import linear_fit_r2, scaling_study

    cells = cfg.mesh.cells or 64
    M = cfg.mesh.stochastic_cells or 64
    scens = sc_mod.scaling_sweep(cfg.study.m_values, cells, M)
    ov = solver_overrides(cfg, scens[0])
    rows = scaling_study(scens, cfg.study.steps, cfg.study.repeats, **ov)
    header = ["m", "tt_seconds", "max_rank", "steps", "dense_seconds", "dense_cells"]
    table = [[r.m, r.tt_seconds, r.max_rank, r.steps, r.dense_seconds, r.dense_cells] for r in rows]
    path = write_table(Path(cfg.output) / "scaling.csv", header, table)
    for r in rows:
        dense = "" if r.dense_seconds is None else f"  dense {r.dense_seconds:.3f}s"
        print(f"m={r.m}  TT {r.tt_seconds:.3f}s  rank {r.max_rank}{dense}")
    if len(rows) > 1:
        _, slope, r2 = linear_fit_r2([r.m for r in rows], [r.tt_seconds for r in rows])
        print(f"linear fit: slope {slope:.4f} s per dimension, R^2 = {r2:.4f}")
    print(f"  wrote {path}")
    return EXIT_OK


def cmd_oracle(cfg: RunConfig) -> int:
    from .output import write_json
    from .stats import oracle_compare

    scen = sc_mod.build_scenario(cfg.scenario, cfg.mesh.cells, cfg.mesh.stochastic_cells, cfg.distribution)
    if scen.mesh.n != 1 or scen.mesh.m > 2:
        raise ConfigError("oracle-compare needs one physical and at most two stochastic axes")
    res = oracle_compare(scen, **solver_overrides(cfg, scen))
    print(f"{scen.name}: {res.steps} steps, initial discrepancy {max(res.initial):.3e}, "
          f"final relative discrepancy {res.max_discrepancy:.3e}")
    path = write_json(Path(cfg.output) / f"{scen.name}_oracle.json",
                      {"initial": res.initial, "final": res.final, "steps": res.steps,
                       "config": cfg.to_dict()})
    print(f"  wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.verb == "list-scenarios":
        return cmd_list()
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = merge_args(cfg, args)
        if cfg.scenario not in sc_mod.REGISTRY and cfg.scenario != "burgers":
            raise ConfigError(f"unknown scenario {cfg.scenario!r}")
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    handlers = {"run": cmd_run, "converge": cmd_converge, "scale": cmd_scale, "oracle-compare": cmd_oracle}
    try:
        with _thread_limit(), np.errstate(over="ignore", invalid="ignore"):
            return handlers[cfg.mode](cfg)
    except (ConfigError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, MemoryError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
