"""Command-line front end.

Subcommands map one-to-one onto the library's tables: ``analytic`` for the
closed forms and the (rho, nu) optimum, ``fig3`` for the error-vs-SNR
sweep, ``fig5`` for the two-decision Monte Carlo comparison, ``fig6`` for
the asymmetry sweep, plus ``sample-tau``, ``simulate`` and ``filter-one``
for the stochastic building blocks. Every command that writes files also
writes a ``<out>.manifest.json`` from which ``replay`` reproduces the
outputs byte for byte. Progress goes to stderr; stdout stays parsable.

Exit codes: 0 success, 2 usage or domain error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
from scipy import stats as sp_stats

from . import __version__
from .filtering import (FilterError, decide, run_filter, run_filter_trace)
from .io import RunManifest, SchemaError, manifest_path_for, read_csv, write_csv
from .model import CascadeModel, symmetric_model
from .montecarlo import McConfig, derive_seed, estimate_error
from .optimize import minimize_error, sweep_fig3, sweep_fig6
from .quadrature import QuadratureError
from .simulate import RngStream, default_dt, sample_jump_times, simulate_trajectory
from .statistics import DimensionlessPoint, DomainError, error_rates_derivative

SEED_ENV_VAR = "CASCADE_READOUT_SEED"
DEFAULT_SEED = 20260808


class UsageError(ValueError):
    """Bad combination of otherwise well-formed arguments."""


def _default_seed() -> int:
    return int(os.environ.get(SEED_ENV_VAR, DEFAULT_SEED))


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _emit(columns, rows, meta, out_path) -> list[str]:
    """Print a v1 CSV to stdout and optionally write it to a file."""
    lines = [f"# schema=v1"]
    lines += [f"# {k}={v}" for k, v in meta.items()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(repr(float(row[c])) if isinstance(row[c], float)
                              else str(row[c]) for c in columns))
    print("\n".join(lines))
    if out_path:
        write_csv(out_path, columns, rows, meta)
        return [str(out_path)]
    return []


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse numeric list {text!r}") from exc


# ---------------------------------------------------------------------------
# command handlers (params-dict interface so a manifest can replay them)
# ---------------------------------------------------------------------------

def run_analytic(params: dict) -> list[str]:
    n, snr = params["n"], params["snr"]
    if params.get("optimize"):
        res = minimize_error(n, snr)
        columns = ["n", "snr", "rho_opt", "nu_opt", "eps"]
        rows = [{"n": n, "snr": float(snr), "rho_opt": res.rho_opt,
                 "nu_opt": res.nu_opt, "eps": res.eps_opt}]
        return _emit(columns, rows, {"command": "analytic"}, params.get("out"))
    if params.get("rho") is None or params.get("nu") is None:
        raise UsageError("analytic requires --rho and --nu unless --optimize is given")
    point = DimensionlessPoint(rho=params["rho"], nu=params["nu"], snr=snr,
                               n_intermediate=n)
    rates = error_rates_derivative(n, point)
    columns = ["n", "snr", "rho", "nu", "eps_plus", "eps_minus", "eps", "stderr"]
    rows = [{"n": n, "snr": float(snr), "rho": float(params["rho"]),
             "nu": float(params["nu"]), "eps_plus": rates.eps_plus,
             "eps_minus": rates.eps_minus, "eps": rates.eps_avg,
             "stderr": rates.stderr}]
    return _emit(columns, rows, {"command": "analytic"}, params.get("out"))


def run_fig3(params: dict) -> list[str]:
    snr_grid = _parse_float_list(params["snr_grid"])
    n_values = list(range(params["n_max"] + 1))
    _progress(f"fig3: optimizing over {len(n_values)}x{len(snr_grid)} grid")
    table = sweep_fig3(snr_grid, n_values)
    bad = [r for r in table.rows if r.error]
    for r in bad:
        _progress(f"fig3: N={r.n_intermediate} S={r.snr} failed: {r.error}")
    columns = ["N", "S", "rho_opt", "nu_opt", "eps"]
    rows = [{"N": r.n_intermediate, "S": float(r.snr), "rho_opt": r.rho_opt,
             "nu_opt": r.nu_opt, "eps": r.eps} for r in table.rows if not r.error]
    meta = {"command": "fig3", "n_max": params["n_max"],
            "snr_grid": params["snr_grid"]}
    write_csv(params["out"], columns, rows, meta)
    return [str(params["out"])]


_MC_COLUMNS = ["N", "S", "decision", "trials", "eps_plus", "eps_minus", "eps",
               "stderr", "seed", "t", "dt"]


def run_fig5(params: dict) -> list[str]:
    snr, trials, seed = params["snr"], params["trials"], params["seed"]
    threads = params.get("threads") or os.cpu_count()
    rows = []
    for n in range(params["n_max"] + 1):
        model = symmetric_model(n, snr)
        opt = minimize_error(n, snr)
        dt = default_dt(model)

        f_seed = derive_seed(seed, 2 * n)
        cfg = McConfig(trials_per_state=trials, t=params["t"], decision="filter",
                       base_seed=f_seed).resolve(model)
        res = estimate_error(model, cfg, threads=threads)
        _progress(f"fig5: N={n} filter eps={res.rates.eps_avg:.5f} "
                  f"({res.elapsed_s:.1f}s)")
        rows.append({"N": n, "S": float(snr), "decision": "filter",
                     "trials": trials, "eps_plus": res.rates.eps_plus,
                     "eps_minus": res.rates.eps_minus, "eps": res.rates.eps_avg,
                     "stderr": res.rates.stderr, "seed": f_seed,
                     "t": cfg.t, "dt": cfg.dt})

        t_thr = max(1, round(opt.rho_opt / model.snr_rate / dt)) * dt
        thr = model.levels[-1] + opt.nu_opt * model.contrast
        t_seed = derive_seed(seed, 2 * n + 1)
        cfg = McConfig(trials_per_state=trials, t=t_thr, dt=dt,
                       decision="threshold", threshold=thr,
                       base_seed=t_seed).resolve(model)
        res = estimate_error(model, cfg, threads=threads)
        _progress(f"fig5: N={n} threshold eps={res.rates.eps_avg:.5f} "
                  f"(analytic {opt.eps_opt:.5f}, {res.elapsed_s:.1f}s)")
        rows.append({"N": n, "S": float(snr), "decision": "threshold",
                     "trials": trials, "eps_plus": res.rates.eps_plus,
                     "eps_minus": res.rates.eps_minus, "eps": res.rates.eps_avg,
                     "stderr": res.rates.stderr, "seed": t_seed,
                     "t": cfg.t, "dt": cfg.dt})

    meta = {"command": "fig5", "snr": snr, "trials": trials, "seed": seed}
    write_csv(params["out"], _MC_COLUMNS, rows, meta)
    return [str(params["out"])]


def run_fig6(params: dict) -> list[str]:
    snr, seed = params["snr"], params["seed"]
    threads = params.get("threads") or os.cpu_count()
    ratios = _parse_float_list(params["ratios"])
    modes = [m.strip() for m in params["modes"].split(",") if m.strip()]
    rows = []
    for mode in modes:
        mc = McConfig(trials_per_state=params["trials"], t=params["t"],
                      decision="filter", base_seed=seed)
        for row in sweep_fig6(params["n"], snr, ratios, mode, mc,
                              ref_trials=params["ref_trials"],
                              threads=threads, progress=_progress):
            rows.append({"mode": row.mode, "ratio": row.ratio, "eps": row.eps,
                         "stderr": row.stderr, "trials": row.trials,
                         "seed": row.seed})
    meta = {"command": "fig6", "n": params["n"], "snr": snr,
            "trials": params["trials"], "ref_trials": params["ref_trials"],
            "seed": seed}
    write_csv(params["out"], ["mode", "ratio", "eps", "stderr", "trials", "seed"],
              rows, meta)
    return [str(params["out"])]


def run_sample_tau(params: dict) -> list[str]:
    n, gamma, draws, seed = params["n"], params["gamma"], params["draws"], params["seed"]
    if draws < 1:
        raise UsageError("--draws must be >= 1")
    if gamma <= 0:
        raise UsageError("--gamma must be positive")
    model = CascadeModel(
        n_intermediate=n, gamma=gamma,
        stage_rates=((n + 1) * gamma,) * (n + 1),
        levels=(1.0,) * (n + 1) + (0.0,), noise_inv_psd=1.0)
    taus = np.array([sample_jump_times(model, RngStream(seed, i))[-1]
                     for i in range(draws)])
    mean = float(taus.mean())
    stderr = float(taus.std(ddof=1) / math.sqrt(draws)) if draws > 1 else math.inf
    meta = {"command": "sample-tau", "n": n, "gamma": float(gamma),
            "draws": draws, "seed": seed, "mean": mean, "stderr": stderr,
            "sample_variance": float(taus.var(ddof=1)) if draws > 1 else math.nan}
    if n == 0:
        ks = sp_stats.kstest(taus, "expon", args=(0, 1.0 / gamma))
        meta["ks_p"] = float(ks.pvalue)
        print(f"ks_p={ks.pvalue!r}")
    rows = [{"draw": i, "tau": float(t)} for i, t in enumerate(taus)]
    write_csv(params["out"], ["draw", "tau"], rows, meta)
    return [str(params["out"])]


def run_simulate(params: dict) -> list[str]:
    model = symmetric_model(params["n"], params["snr"])
    dt = params.get("dt") if params.get("dt") is not None else default_dt(model)
    stream = RngStream(params["seed"], params["index"])
    traj = simulate_trajectory(model, params["state"], params["t"], dt, stream)
    meta = {"command": "simulate", "seed": traj.seed, "state": traj.initial_state,
            "index": traj.stream_index, "dt": traj.dt, "n": params["n"],
            "snr": float(params["snr"])}
    rows = [{"k": k, "t": k * traj.dt, "I_k": float(v)}
            for k, v in enumerate(traj.samples)]
    write_csv(params["out"], ["k", "t", "I_k"], rows, meta)
    return [str(params["out"])]


def run_filter_one(params: dict) -> list[str]:
    meta, _, rows = read_csv(params["traj"])
    model = symmetric_model(int(meta["n"]), float(meta["snr"]))
    dt = float(meta["dt"])
    samples = np.array([float(r["I_k"]) for r in rows])
    from .simulate import Trajectory
    traj = Trajectory(dt=dt, samples=samples, initial_state=meta["state"],
                      jump_times=np.array([]), seed=int(meta["seed"]),
                      stream_index=int(meta.get("index", 0)))
    log_lambda = run_filter(model, traj, substeps=params["substeps"])
    label = decide(log_lambda)
    print("# schema=v1")
    print("logLambda,decision")
    print(f"{log_lambda!r},{label}")
    outputs = []
    if params.get("out"):
        states = run_filter_trace(model, traj, substeps=params["substeps"])
        diag_rows = []
        for k, st in enumerate(states):
            lp = st.log_offset_plus + float(np.log(np.sum(np.exp(st.log_weights_plus))))
            lm = st.log_offset_minus + float(np.log(np.sum(np.exp(st.log_weights_minus))))
            diag_rows.append({"k": k, "logL_plus": lp, "logL_minus": lm,
                              "logLambda": lp - lm})
        write_csv(params["out"], ["k", "logL_plus", "logL_minus", "logLambda"],
                  diag_rows, {"command": "filter-one", "traj": params["traj"]})
        outputs.append(str(params["out"]))
    return outputs


RUNNERS = {
    "analytic": run_analytic,
    "fig3": run_fig3,
    "fig5": run_fig5,
    "fig6": run_fig6,
    "sample-tau": run_sample_tau,
    "simulate": run_simulate,
    "filter-one": run_filter_one,
}

_SEEDED_COMMANDS = {"fig5", "fig6", "sample-tau", "simulate"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cascade-readout",
        description="Readout error rates for cascaded qubit relaxation")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", help="closed-form error rates at a point, or the optimum")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--optimize", action="store_true")
    p.add_argument("--out", default=None)

    p = sub.add_parser("fig3", help="optimal error rate vs SNR for N = 0..n-max")
    p.add_argument("--snr-grid", dest="snr_grid",
                   default="3,5,7,10,14,20,30,50,70,100")
    p.add_argument("--n-max", dest="n_max", type=int, default=4)
    p.add_argument("--out", default="fig3.csv")

    p = sub.add_parser("fig5", help="Monte Carlo: filter vs threshold decision")
    p.add_argument("--snr", type=float, default=20.0)
    p.add_argument("--n-max", dest="n_max", type=int, default=4)
    p.add_argument("--trials", type=int, default=50_000)
    p.add_argument("--t", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default="fig5.csv")

    p = sub.add_parser("fig6", help="Monte Carlo: error rate vs cascade asymmetry")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--snr", type=float, default=20.0)
    p.add_argument("--ratios", default="0.1,0.3333333333333333,1,3,10")
    p.add_argument("--modes", default="contrast,rates")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--ref-trials", dest="ref_trials", type=int, default=100_000)
    p.add_argument("--t", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default="fig6.csv")

    p = sub.add_parser("sample-tau", help="draw total jump times and summarize")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--draws", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="tau.csv")

    p = sub.add_parser("simulate", help="generate one detector record")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--state", choices=["+", "-"], required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", default="trajectory.csv")

    p = sub.add_parser("filter-one", help="run the likelihood filter on a record CSV")
    p.add_argument("--traj", required=True)
    p.add_argument("--substeps", type=int, default=2)
    p.add_argument("--out", default=None)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out-dir", dest="out_dir", default=None)
    p.add_argument("--threads", type=int, default=None)

    return parser


def _dispatch(command: str, params: dict) -> list[str]:
    start = time.perf_counter()
    outputs = RUNNERS[command](params)
    wall = time.perf_counter() - start
    if outputs:
        manifest = RunManifest(
            command=command,
            params={k: v for k, v in params.items()},
            seeds={"base": params.get("seed")},
            outputs=outputs,
            artifact_version=__version__,
            wall_time_s=wall,
        )
        manifest.save(manifest_path_for(outputs[0]))
    return outputs


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.command == "replay":
            manifest = RunManifest.load(args.manifest)
            params = dict(manifest.params)
            if args.out_dir:
                out_dir = Path(args.out_dir)
                out_dir.mkdir(parents=True, exist_ok=True)
                if params.get("out"):
                    params["out"] = str(out_dir / Path(params["out"]).name)
            if args.threads is not None and "threads" in params:
                params["threads"] = args.threads
            _dispatch(manifest.command, params)
            return 0
        params = {k: v for k, v in vars(args).items() if k != "command"}
        if args.command in _SEEDED_COMMANDS and params.get("seed") is None:
            params["seed"] = _default_seed()
        _dispatch(args.command, params)
        return 0
    except (UsageError, DomainError, SchemaError, ValueError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (QuadratureError, FilterError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
