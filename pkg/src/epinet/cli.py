"""Command-line front end for graph generation, simulation, mean-field and
exact-chain analysis, parameter sweeps, and the verification suites.

Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 mean-field
non-convergence, 4 verification-suite failure. Structured reports are JSON
(sorted keys, 2-space indent); trajectories are CSV with header "t,s,i,r".
Identical command lines and seeds produce byte-identical outputs. Output
files are written atomically (temp file + rename).
"""
from __future__ import annotations

import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass

import click
import numpy as np

from .model_core import (
    Graph,
    GraphError,
    ModelError,
    ModelSpec,
    VARIANTS,
    format_edge_list,
    generate,
    parse_edge_list,
    spectral_radius,
    threshold_ratio,
)
from .exact_chain import (
    ExactChainError,
    StateSpaceCapError,
    build_transition_matrix,
    mixing_time_exact,
    stationary,
)
from .mean_field import MeanFieldPoint, find_fixed_point, mf_iterate
from .monte_carlo import MonteCarloError, ensemble_to_csv, mc_ensemble
from .verify import SUITES, VerifyError, run_suites


@dataclass
class RunConfig:
    """Parsed command-line request, shared across the cmd_* entry points."""

    subcommand: str
    graph_path: str | None = None
    generate_spec: str | None = None
    kind: str | None = None
    n: int | None = None
    p: float | None = None
    radius: float | None = None
    variant: str | None = None
    beta: float | None = None
    delta: float | None = None
    gamma: float | None = None
    theta: float | None = None
    contact_path: str | None = None
    t_max: int = 1000
    seed: int = 0
    reps: int = 1
    init: str = "all-infected"
    epsilon: float = 0.25
    tol: float = 1e-10
    cap: int = 100000
    damping: float | None = None
    raw_iteration: bool = False
    out: str | None = None
    traj_out: str | None = None
    traj_steps: int = 50
    suites: tuple[str, ...] = ()
    n_max: int = 5
    trials: int = 50
    beta_grid: str | None = None


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------

def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".epinet-tmp-")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise click.ClickException(f"cannot write {path}: {exc}")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON-serializable: {type(o).__name__}")


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2,
                      default=_json_default) + "\n"


def _generate_from_spec(spec: str) -> Graph:
    """Parse 'kind:key=val,...', e.g. 'er:n=2000,p=0.0082,seed=7'."""
    try:
        kind, _, rest = spec.partition(":")
        params: dict = {}
        if rest:
            for item in rest.split(","):
                key, sep, val = item.partition("=")
                if not sep:
                    raise ValueError(f"expected key=value, got {item!r}")
                key = key.strip()
                params[key] = int(val) if key in ("n", "seed") else float(val)
        seed = params.pop("seed", 0)
        return generate(kind.strip(), seed=seed, **params)
    except (GraphError, ValueError) as exc:
        raise click.UsageError(f"invalid --generate spec {spec!r}: {exc}")


def _load_graph(cfg: RunConfig) -> Graph:
    if (cfg.graph_path is None) == (cfg.generate_spec is None):
        raise click.UsageError(
            "provide exactly one graph source: --graph PATH or --generate SPEC"
        )
    if cfg.generate_spec is not None:
        return _generate_from_spec(cfg.generate_spec)
    try:
        with open(cfg.graph_path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise click.ClickException(f"cannot read {cfg.graph_path}: {exc}")
    try:
        return parse_edge_list(text)
    except GraphError as exc:
        raise click.UsageError(f"{cfg.graph_path}: {exc}")


def _build_model(cfg: RunConfig) -> ModelSpec:
    if cfg.variant is None:
        raise click.UsageError("--variant is required")
    kwargs: dict = {}
    for name in ("beta", "delta", "gamma", "theta"):
        val = getattr(cfg, name)
        if val is not None:
            kwargs[name] = val
    if cfg.contact_path is not None:
        try:
            kwargs["contact"] = np.loadtxt(cfg.contact_path, delimiter=",",
                                           ndmin=2)
        except OSError as exc:
            raise click.ClickException(
                f"cannot read {cfg.contact_path}: {exc}")
        except ValueError as exc:
            raise click.UsageError(f"malformed contact matrix CSV: {exc}")
    try:
        return ModelSpec(cfg.variant, **kwargs)
    except ModelError as exc:
        raise click.UsageError(str(exc))


def _parse_init(text: str):
    if text == "all-infected":
        return "all-infected"
    if text.startswith("fraction:"):
        try:
            return float(text.split(":", 1)[1])
        except ValueError:
            raise click.UsageError(f"bad init fraction in {text!r}")
    if text.startswith("nodes:"):
        body = text.split(":", 1)[1]
        try:
            return tuple(int(v) for v in body.split(",") if v.strip())
        except ValueError:
            raise click.UsageError(f"bad init node list in {text!r}")
    raise click.UsageError(
        "init must be 'all-infected', 'fraction:F', or 'nodes:I,J,...' "
        f"(got {text!r})"
    )


def _ratio_or_usage(model: ModelSpec, graph: Graph) -> float:
    try:
        return threshold_ratio(model, graph)
    except ModelError as exc:
        raise click.UsageError(str(exc))


# ---------------------------------------------------------------------------
# Command bodies (click-independent except for the error types)
# ---------------------------------------------------------------------------

def cmd_gen(cfg: RunConfig) -> int:
    if cfg.n is None:
        raise click.UsageError("--n is required")
    params: dict = {"n": cfg.n}
    if cfg.kind == "er":
        if cfg.p is None:
            raise click.UsageError("generator 'er' requires --p")
        params["p"] = cfg.p
    elif cfg.kind == "geometric":
        if cfg.radius is None:
            raise click.UsageError("generator 'geometric' requires --radius")
        params["r"] = cfg.radius
    try:
        g = generate(cfg.kind, seed=cfg.seed, **params)
    except GraphError as exc:
        raise click.UsageError(str(exc))
    lam = spectral_radius(g).lambda_max
    _atomic_write(cfg.out, format_edge_list(g))
    click.echo(f"n={g.n} edges={g.m} lambda_max={lam:.10g}")
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    g = _load_graph(cfg)
    model = _build_model(cfg)
    init = _parse_init(cfg.init)
    ratio = _ratio_or_usage(model, g)
    try:
        rep = mc_ensemble(model, g, init=init, t_max=cfg.t_max,
                          n_reps=cfg.reps, master_seed=cfg.seed)
    except MonteCarloError as exc:
        raise click.UsageError(str(exc))
    _atomic_write(cfg.out, ensemble_to_csv(rep))
    ext = [a for a in rep.absorbed_steps if a is not None]
    med = float(np.median(ext)) if ext else math.nan
    click.echo(
        f"ratio={ratio:.10g} reps={rep.n_reps} extinct={rep.extinct_count} "
        f"median_extinction={med:.10g} "
        f"final_i_mean={float(rep.i_mean[-1]):.10g}"
    )
    return 0


def _meanfield_start(model: ModelSpec, n: int) -> MeanFieldPoint:
    if model.k == 2:
        return MeanFieldPoint(np.ones(n))
    return MeanFieldPoint(np.ones(n), np.zeros(n))


def cmd_meanfield(cfg: RunConfig) -> int:
    g = _load_graph(cfg)
    model = _build_model(cfg)
    ratio = _ratio_or_usage(model, g)
    damping = 1.0 if cfg.raw_iteration else cfg.damping
    rep = find_fixed_point(model, g, tol=cfg.tol, cap=cfg.cap,
                           damping=damping)
    spectrum = rep.jacobian_spectrum
    order = np.lexsort((spectrum.imag, spectrum.real, -np.abs(spectrum)))
    spectrum = spectrum[order]
    payload = {
        "variant": model.variant,
        "n": g.n,
        "threshold_ratio": ratio,
        "classification": rep.classification,
        "iterations": rep.iterations,
        "residual": rep.residual,
        "point": {
            "p_i": [float(v) for v in rep.point.p_i],
            "p_r": None if rep.point.p_r is None
            else [float(v) for v in rep.point.p_r],
        },
        "jacobian_spectral_radius": float(np.abs(spectrum).max())
        if len(spectrum) else 0.0,
        "jacobian_spectrum": {
            "real": [float(v) for v in spectrum.real],
            "imag": [float(v) for v in spectrum.imag],
        },
        "relation_defect": rep.relation_defect,
    }
    _atomic_write(cfg.out, _dump_json(payload))
    if cfg.traj_out is not None:
        traj = mf_iterate(model, g, _meanfield_start(model, g.n),
                          cfg.traj_steps)
        lines = ["t,s,i,r"]
        for t, pt in enumerate(traj):
            i_tot = float(pt.p_i.sum())
            r_tot = float(pt.p_r.sum()) if pt.p_r is not None else 0.0
            s_tot = g.n - i_tot - r_tot
            lines.append(f"{t},{s_tot!s},{i_tot!s},{r_tot!s}")
        _atomic_write(cfg.traj_out, "\n".join(lines) + "\n")
    click.echo(
        f"classification={rep.classification} residual={rep.residual:.6e} "
        f"ratio={ratio:.10g}"
    )
    return 3 if rep.classification == "non-converged" else 0


def cmd_exact(cfg: RunConfig) -> int:
    g = _load_graph(cfg)
    model = _build_model(cfg)
    try:
        S = build_transition_matrix(model, g)
    except (StateSpaceCapError, ExactChainError) as exc:
        raise click.UsageError(str(exc))
    try:
        pi = stationary(model, g)
    except ModelError as exc:
        raise click.UsageError(str(exc))
    defect = float(np.abs(pi.entries @ S.entries - pi.entries).max())
    try:
        mrep = mixing_time_exact(S, pi, cfg.epsilon, cap=cfg.cap)
    except ExactChainError as exc:
        raise click.UsageError(str(exc))
    worst = None
    if mrep.worst_initial is not None:
        worst = "".join(str(int(d)) for d in mrep.worst_initial.digits)
    ratio = _ratio_or_usage(model, g)
    payload = {
        "variant": model.variant,
        "n": g.n,
        "k": model.k,
        "epsilon": cfg.epsilon,
        "t_mix": mrep.t_mix,
        "bound": mrep.bound,
        "censored": mrep.censored,
        "worst_initial": worst,
        "stationary_defect": defect,
        "threshold_ratio": ratio,
    }
    _atomic_write(cfg.out, _dump_json(payload))
    click.echo(
        f"t_mix={mrep.t_mix} bound={mrep.bound:.10g} "
        f"stationary_defect={defect:.3e} ratio={ratio:.10g}"
    )
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    names = list(cfg.suites) or ["all"]
    if "none" in names:
        raise click.UsageError(
            f"suite 'none' is not runnable; choose from: {', '.join(SUITES)}"
        )
    try:
        results = run_suites(names, n_max=cfg.n_max, trials=cfg.trials,
                             seed=cfg.seed)
    except VerifyError as exc:
        raise click.UsageError(str(exc))
    all_passed = all(r.passed for r in results)
    payload = {
        "passed": all_passed,
        "suites": [r.to_dict() for r in results],
    }
    if cfg.out is not None:
        _atomic_write(cfg.out, _dump_json(payload))
    for r in results:
        click.echo(f"{r.suite}: {'PASS' if r.passed else 'FAIL'} "
                   f"({r.checks} checks)")
        if not r.passed:
            click.echo(_dump_json({"replay": r.failures[:5]}).rstrip())
    return 0 if all_passed else 4


def _parse_grid(text: str | None) -> list[float]:
    if text is None or not text.strip():
        raise click.UsageError("--beta-grid is required and must be nonempty")
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError("range grids use start:stop:step")
            start, stop, step = (float(v) for v in parts)
            if step <= 0:
                raise ValueError("step must be > 0")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            if count < 1:
                raise ValueError("grid is empty")
            vals = [start + idx * step for idx in range(count)]
        else:
            vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise click.UsageError(f"invalid --beta-grid {text!r}: {exc}")
    if not vals:
        raise click.UsageError(f"--beta-grid {text!r} is empty")
    for v in vals:
        if not (0.0 <= v <= 1.0):
            raise click.UsageError(f"grid beta {v} outside [0,1]")
    return vals


def cmd_sweep(cfg: RunConfig) -> int:
    g = _load_graph(cfg)
    if cfg.variant == "sis-general":
        raise click.UsageError(
            "sweep varies beta and requires a rate-based variant"
        )
    betas = _parse_grid(cfg.beta_grid)
    init = _parse_init(cfg.init)
    lines = ["beta,ratio,outcome,extinct_count,reps,median_extinction,fp_norm"]
    for idx, b in enumerate(betas):
        row_cfg = RunConfig(subcommand="sweep", variant=cfg.variant, beta=b,
                            delta=cfg.delta, gamma=cfg.gamma, theta=cfg.theta)
        model = _build_model(row_cfg)
        ratio = _ratio_or_usage(model, g)
        rep = mc_ensemble(model, g, init=init, t_max=cfg.t_max,
                          n_reps=cfg.reps, master_seed=cfg.seed + idx)
        outcome = "extinct" if 2 * rep.extinct_count > rep.n_reps \
            else "persistent"
        ext = [a for a in rep.absorbed_steps if a is not None]
        med = float(np.median(ext)) if ext else math.nan
        fp = find_fixed_point(model, g, tol=max(cfg.tol, 1e-10), cap=cfg.cap,
                              compute_spectrum=False)
        fp_norm = float(np.abs(fp.point.p_i).max())
        lines.append(
            f"{float(b)!s},{float(ratio)!s},{outcome},{rep.extinct_count},"
            f"{rep.n_reps},{med!s},{fp_norm!s}"
        )
    _atomic_write(cfg.out, "\n".join(lines) + "\n")
    click.echo(f"rows={len(betas)}")
    return 0


# ---------------------------------------------------------------------------
# Click wiring
# ---------------------------------------------------------------------------

def _graph_options(fn):
    fn = click.option("--graph", "graph_path", type=str, default=None,
                      help="Edge-list file.")(fn)
    fn = click.option("--generate", "generate_spec", type=str, default=None,
                      help="Generator spec, e.g. er:n=100,p=0.05,seed=1.")(fn)
    return fn


def _model_options(fn):
    fn = click.option("--variant", type=click.Choice(VARIANTS),
                      required=True)(fn)
    fn = click.option("--beta", type=float, default=None)(fn)
    fn = click.option("--delta", type=float, default=None)(fn)
    fn = click.option("--gamma", type=float, default=None)(fn)
    fn = click.option("--theta", type=float, default=None)(fn)
    fn = click.option("--contact", "contact_path", type=str, default=None,
                      help="CSV file with the contact matrix "
                           "(sis-general).")(fn)
    return fn


@click.group()
@click.version_option(version="0.1.0", prog_name="epinet")
def main() -> None:
    """Exact chains, mean-field maps, and verification for network epidemics."""


@main.command("gen")
@click.option("--kind",
              type=click.Choice(("er", "geometric", "complete", "star",
                                 "path")),
              required=True)
@click.option("--n", type=int, required=True)
@click.option("--p", type=float, default=None)
@click.option("--radius", type=float, default=None)
@click.option("--seed", type=int, default=0)
@click.option("-o", "--out", type=str, required=True)
def gen_command(kind, n, p, radius, seed, out):
    """Generate a graph and write its edge list."""
    code = cmd_gen(RunConfig("gen", kind=kind, n=n, p=p, radius=radius,
                             seed=seed, out=out))
    if code:
        sys.exit(code)


@main.command("simulate")
@_graph_options
@_model_options
@click.option("--t", "t_max", type=click.IntRange(min=1), default=1000)
@click.option("--reps", type=click.IntRange(min=1), default=1)
@click.option("--seed", type=int, default=0)
@click.option("--init", type=str, default="all-infected")
@click.option("-o", "--out", type=str, required=True)
def simulate_command(graph_path, generate_spec, variant, beta, delta, gamma,
                     theta, contact_path, t_max, reps, seed, init, out):
    """Run a Monte Carlo ensemble and write mean trajectory CSV."""
    code = cmd_simulate(RunConfig(
        "simulate", graph_path=graph_path, generate_spec=generate_spec,
        variant=variant, beta=beta, delta=delta, gamma=gamma, theta=theta,
        contact_path=contact_path, t_max=t_max, reps=reps, seed=seed,
        init=init, out=out))
    if code:
        sys.exit(code)


@main.command("meanfield")
@_graph_options
@_model_options
@click.option("--tol", type=float, default=1e-10)
@click.option("--cap", type=click.IntRange(min=1), default=100000)
@click.option("--damping", type=click.FloatRange(min=0.0, max=1.0,
                                                 min_open=True), default=None)
@click.option("--raw-iteration", is_flag=True, default=False,
              help="Iterate the undamped map (reproduces cycles).")
@click.option("--traj-out", type=str, default=None)
@click.option("--traj-steps", type=click.IntRange(min=0), default=50)
@click.option("-o", "--out", type=str, required=True)
def meanfield_command(graph_path, generate_spec, variant, beta, delta, gamma,
                      theta, contact_path, tol, cap, damping, raw_iteration,
                      traj_out, traj_steps, out):
    """Find the mean-field fixed point and write the report JSON."""
    code = cmd_meanfield(RunConfig(
        "meanfield", graph_path=graph_path, generate_spec=generate_spec,
        variant=variant, beta=beta, delta=delta, gamma=gamma, theta=theta,
        contact_path=contact_path, tol=tol, cap=cap, damping=damping,
        raw_iteration=raw_iteration, traj_out=traj_out,
        traj_steps=traj_steps, out=out))
    if code:
        sys.exit(code)


@main.command("exact")
@_graph_options
@_model_options
@click.option("--epsilon", type=click.FloatRange(min=0.0, max=1.0,
                                                 min_open=True,
                                                 max_open=True),
              default=0.25)
@click.option("--cap", type=click.IntRange(min=1), default=100000,
              help="Mixing-time step cap.")
@click.option("-o", "--out", type=str, required=True)
def exact_command(graph_path, generate_spec, variant, beta, delta, gamma,
                  theta, contact_path, epsilon, cap, out):
    """Exact-chain mixing report (state space permitting)."""
    code = cmd_exact(RunConfig(
        "exact", graph_path=graph_path, generate_spec=generate_spec,
        variant=variant, beta=beta, delta=delta, gamma=gamma, theta=theta,
        contact_path=contact_path, epsilon=epsilon, cap=cap, out=out))
    if code:
        sys.exit(code)


@main.command("verify")
@click.option("--suite", "suites", type=str, multiple=True,
              help="Suite name or 'all' (repeatable).")
@click.option("--n-max", type=click.IntRange(min=2), default=5)
@click.option("--trials", type=click.IntRange(min=1), default=50)
@click.option("--seed", type=int, default=0)
@click.option("-o", "--out", type=str, default=None)
def verify_command(suites, n_max, trials, seed, out):
    """Run analytic-guarantee verification suites; exit 4 on any failure."""
    code = cmd_verify(RunConfig("verify", suites=tuple(suites), n_max=n_max,
                                trials=trials, seed=seed, out=out))
    if code:
        sys.exit(code)


@main.command("sweep")
@_graph_options
@_model_options
@click.option("--beta-grid", type=str, required=True,
              help="Comma list '0.05,0.06' or range 'start:stop:step'.")
@click.option("--t", "t_max", type=click.IntRange(min=1), default=10000)
@click.option("--reps", type=click.IntRange(min=1), default=25)
@click.option("--seed", type=int, default=0)
@click.option("--init", type=str, default="all-infected")
@click.option("--tol", type=float, default=1e-10)
@click.option("--cap", type=click.IntRange(min=1), default=100000)
@click.option("-o", "--out", type=str, required=True)
def sweep_command(graph_path, generate_spec, variant, beta, delta, gamma,
                  theta, contact_path, beta_grid, t_max, reps, seed, init,
                  tol, cap, out):
    """Sweep beta over a grid; one CSV row per grid point."""
    code = cmd_sweep(RunConfig(
        "sweep", graph_path=graph_path, generate_spec=generate_spec,
        variant=variant, beta=beta, delta=delta, gamma=gamma, theta=theta,
        contact_path=contact_path, beta_grid=beta_grid, t_max=t_max,
        reps=reps, seed=seed, init=init, tol=tol, cap=cap, out=out))
    if code:
        sys.exit(code)


if __name__ == "__main__":
    main()
