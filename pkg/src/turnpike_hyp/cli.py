"""Command-line entry point: ``turnpike-hyp <command> --config <path>``.

Exit status: 0 on success, 2 when a solver does not converge, 3 on invalid
input (bad config, unknown command, violated preconditions).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Callable

import numpy as np

from . import integer as integer_mod
from . import optimizer, pipeline, plotting, solvers, turnpike
from .config import COMMANDS, RunConfig, load_config
from .errors import NoConvergence, SPDViolation, TurnpikeError
from .operators import write_signal_csv
from .system import build_system, read_coefficient_table, search_weight, system_from_table

EXIT_OK, EXIT_NOCONV, EXIT_INVALID = 0, 2, 3


@dataclasses.dataclass
class Artifact:
    kind: str  # "csv" or "svg"
    write: Callable[[Path], None]


def emit_outputs(artifacts, out_dir, emit_svg: bool, command: str = "run") -> dict:
    """Write artifacts as ``<command>_<index>.<ext>`` and a ``manifest.json`` of SHA-256 hashes."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    counters = {}
    files = []
    for art in artifacts:
        if art.kind == "svg" and not emit_svg:
            continue
        k = counters.get(art.kind, 0)
        counters[art.kind] = k + 1
        path = out / f"{command}_{k}.{art.kind}"
        art.write(path)
        files.append({"name": path.name, "sha256": hashlib.sha256(path.read_bytes()).hexdigest()})
    manifest = {"files": files}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def system_from_config(cfg: RunConfig):
    s = cfg.system
    if s.table:
        return system_from_table(read_coefficient_table(s.table), s.eta0, s.L)
    return build_system(s.L, s.eta0, s.d_plus, s.d_minus, M=np.asarray(s.M, dtype=float).reshape(2, 2))


def grid_from_config(cfg: RunConfig, sys_):
    g = cfg.grid
    if g.n_t > 0:
        return solvers.build_grid(sys_, g.T, g.n_x, g.n_t, g.quad_rule)
    return solvers.grid_for_cfl(sys_, g.T, g.n_x, g.cfl, g.quad_rule)


def _print(summary: dict) -> None:
    width = max(len(k) for k in summary) if summary else 0
    for k, v in summary.items():
        if isinstance(v, (float, np.floating)):
            v = f"{v:.10g}"
        elif isinstance(v, np.ndarray):
            v = np.array2string(v, precision=8)
        print(f"{k:<{width}}  {v}")


def _certify(cfg):
    sys_ = system_from_config(cfg)
    c = cfg.certify
    sign = 1.0 if c.regime == "decay" else -1.0
    cert = search_weight(sys_, c.regime, [sign * abs(m) for m in c.mu_grid], c.n_samples)
    x = sys_.nodes(c.n_samples)

    def csv_(p):
        np.savetxt(p, np.column_stack([x, cert.profile]), delimiter=",", header="x,bound", comments="", fmt="%.17g")

    def svg(p):
        plotting.plot_signals(p, x, {"pointwise bound": cert.profile}, title=f"{c.regime} certificate")

    summary = {
        "regime": cert.regime.value,
        "mu_plus": cert.weight.mu_plus,
        "mu_minus": cert.weight.mu_minus,
        "bound": cert.bound,
        "argmax_x": cert.argmax_x,
        "valid": cert.valid,
    }
    return summary, [Artifact("csv", csv_), Artifact("svg", svg)]


def _simulate(cfg):
    sys_ = system_from_config(cfg)
    grid = grid_from_config(cfg, sys_)
    u = np.tile(np.asarray(cfg.simulate.u, dtype=float), (grid.n_t, 1))
    h0 = np.tile(np.asarray(cfg.simulate.h0, dtype=float), (grid.n_x + 1, 1))
    states = solvers.forward_solve(sys_, grid, u, h0)
    y = states[1:, [-1, 0], [0, 1]]
    summary = {
        "n_x": grid.n_x,
        "n_t": grid.n_t,
        "cfl": solvers.cfl_of(sys_, grid),
        "final trace plus": y[-1, 0],
        "final trace minus": y[-1, 1],
    }
    return summary, [
        Artifact("csv", lambda p: solvers.write_trajectory_csv(p, grid, states)),
        Artifact("csv", lambda p: write_signal_csv(p, grid, {"trace_plus": y[:, 0], "trace_minus": y[:, 1]})),
        Artifact("svg", lambda p: plotting.plot_signals(p, grid.t[1:], {"r+(t,L)": y[:, 0], "r-(t,0)": y[:, 1]})),
    ]


def _cost(cfg):
    return optimizer.cost_from_tracking(cfg.cost.lam, cfg.cost.R_b)


def _solve_static(cfg):
    sys_ = system_from_config(cfg)
    grid = grid_from_config(cfg, sys_)
    st = optimizer.solve_static(_cost(cfg), sys_, grid)
    summary = {"u_static": st.control, "objective": st.objective, "residual": st.residual, "F_sigma": st.F_sigma}
    return summary, [
        Artifact("csv", lambda p: solvers.write_profile_csv(p, grid, st.profile)),
        Artifact("svg", lambda p: plotting.plot_profile(p, grid.x, st.profile, "static state")),
    ]


def _solve_dynamic(cfg):
    sys_ = system_from_config(cfg)
    grid = grid_from_config(cfg, sys_)
    cost = _cost(cfg)
    st = optimizer.solve_static(cost, sys_, grid)
    dyn = optimizer.solve_dynamic(cost, sys_, grid, tol=cfg.tol)
    summary = {
        "u_static": st.control,
        "static objective": st.objective,
        "dynamic objective": dyn.objective,
        "cg iterations": dyn.cg_iters,
        "cg residual": dyn.residual,
        "control metric": turnpike.control_metric(dyn.control, st.control, grid),
        "state metric": turnpike.state_metric(dyn.state, st.profile, grid),
    }
    series = {"u+": dyn.control[:, 0], "u-": dyn.control[:, 1]}
    return summary, [
        Artifact("csv", lambda p: optimizer.write_solution_csv(p, grid, dyn)),
        Artifact("csv", lambda p: optimizer.write_cg_log(p, dyn)),
        Artifact("svg", lambda p: plotting.plot_signals(p, grid.t[1:], series, title="optimal control")),
    ]


def _solve_integer(cfg):
    sys_ = system_from_config(cfg)
    grid = grid_from_config(cfg, sys_)
    spec = integer_mod.IntegerSpec(cfg.integer.F, cfg.integer.nu, cfg.cost.lam, cfg.cost.R_b)
    chk = integer_mod.switching_threshold_check(spec)
    sol = integer_mod.solve_integer_dynamic(spec, None, sys_, grid, tol=cfg.tol)
    st = integer_mod.solve_integer_static(spec, None, sys_, grid)
    summary = {
        "threshold": chk.threshold,
        "variation bound": chk.variation_bound,
        "alpha (dynamic)": sol.alpha,
        "alpha (static)": sol.static_alpha,
        "agreement": sol.agreement,
        "omega(T)": sol.omega,
        "one-sided metric": integer_mod.integer_turnpike_metric(sol, st, grid),
    }
    alphas = sorted(sol.per_alpha_objectives)
    return summary, [
        Artifact("csv", lambda p: integer_mod.write_alpha_table(p, sol, grid)),
        Artifact(
            "svg",
            lambda p: plotting.plot_bars(p, alphas, [sol.per_alpha_objectives[a] for a in alphas], "J_alpha"),
        ),
    ]


def _sweep(cfg):
    sys_ = system_from_config(cfg)
    g = cfg.grid
    rep = turnpike.sweep_and_fit(
        _cost(cfg), sys_, cfg.sweep.horizons, g.n_x, g.cfl, g.quad_rule, cfg.tol, cfg.sweep.kappa, seed=cfg.seed
    )
    summary = {
        "u_static": rep.u_static,
        "fitted exponent": rep.fitted_exponent if rep.exponent_applicable else "not-applicable",
        "state metric saturation": rep.saturation("state_metric"),
        "gradient saturation": rep.saturation("grad_norm_at_static"),
        "operator norm saturation": rep.saturation("operator_norms"),
        "kappa": rep.kappa,
        "coercivity bound holds": all(rep.coercivity_holds()) if cfg.sweep.kappa else "not computed",
    }
    return summary, [
        Artifact("csv", lambda p: turnpike.write_report_csv(p, rep)),
        Artifact("svg", lambda p: plotting.plot_report(p, rep)),
    ]


def _pipeline(cfg):
    pl = cfg.pipeline
    rep = pipeline.run_transition_scenario(pl.params, pl.n_x, pl.n_t, pl.quad_rule, cfg.tol)
    pt = rep.plateau
    summary = {
        "cfl": solvers.cfl_of(rep.system, rep.grid),
        "u_static": rep.u_static,
        "static objective": rep.static_objective,
        "dynamic objective": rep.dynamic_objective,
        "cg iterations": rep.cg_iters,
        "plateau window": f"[{pt.start:.4g}, {pt.end:.4g}]",
        "plateau fraction": pt.fraction,
        "errors larger at both ends": pt.ends_larger,
    }
    return summary, [
        Artifact("csv", lambda p: pipeline.write_field_csv(p, rep)),
        Artifact("csv", lambda p: pipeline.write_error_csv(p, rep)),
        Artifact("svg", lambda p: plotting.plot_pipeline(p, rep)),
    ]


_HANDLERS = {
    "certify": _certify,
    "simulate": _simulate,
    "solve-static": _solve_static,
    "solve-dynamic": _solve_dynamic,
    "solve-integer": _solve_integer,
    "sweep": _sweep,
    "pipeline": _pipeline,
}


def run_command(cfg: RunConfig) -> int:
    try:
        summary, artifacts = _HANDLERS[cfg.command](cfg)
        manifest = emit_outputs(artifacts, cfg.output_dir, cfg.emit_svg, cfg.command)
    except (NoConvergence, SPDViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except TurnpikeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: IoError: {exc}", file=sys.stderr)
        return EXIT_INVALID
    summary["outputs"] = ", ".join(f["name"] for f in manifest["files"]) or "(none)"
    _print({"command": cfg.command, **summary})
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_INVALID)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="turnpike-hyp", description="Turnpike experiments for boundary-controlled hyperbolic systems.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="INI experiment file")
    p.add_argument("--out", help="output directory (TURNPIKE_OUT takes precedence)")
    p.add_argument("--svg", action="store_true", help="also write SVG figures")
    p.add_argument("--seed", type=int, help="seed for randomized diagnostics")
    p.add_argument("--tol", type=float, help="relative CG tolerance")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, command=args.command)
    except TurnpikeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    over = {}
    out = os.environ.get("TURNPIKE_OUT") or args.out
    if out:
        over["output_dir"] = out
    if args.svg:
        over["emit_svg"] = True
    if args.seed is not None:
        over["seed"] = args.seed
    if args.tol is not None:
        if not args.tol > 0:
            print("error: --tol must be positive", file=sys.stderr)
            return EXIT_INVALID
        over["tol"] = args.tol
    return run_command(dataclasses.replace(cfg, **over))


if __name__ == "__main__":
    sys.exit(main())
