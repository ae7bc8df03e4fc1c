"""Command-line pipeline: design -> simulate -> fit -> predict / sobol
-> calibrate -> map -> summarize.

Every command reads one JSON config (-c) and touches only its declared
artifacts inside the workdir.  Exit codes: 0 success, 2 validation
failure, 3 numerical failure.  All randomness flows from config seeds;
logs (stage wall-clock, fit quality, acceptance rates) go to stderr and
never into artifacts, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import calib, config as config_mod, doe, io, pca, pce, sobol
from . import simulators
from .errors import ArtifactError, NumericalError, UqError, ValidationError
from .sampling import RwmConfig

log = logging.getLogger("uq")

_PRODUCERS = {
    "design": "design",
    "forcing": "simulate",
    "outputs": "simulate",
    "surrogate": "fit",
    "data": "calibrate",
    "chains_meta": "calibrate",
    "chains_bin": "calibrate",
    "map": "map",
}


class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        self.start = time.perf_counter()
        log.info("[%s] started", self.name)
        return self

    def __exit__(self, exc_type, *_):
        elapsed = time.perf_counter() - self.start
        status = "failed" if exc_type else "done"
        log.info("[%s] %s in %.2f s", self.name, status, elapsed)
        return False


def _workdir(cfg) -> Path:
    path = Path(cfg["workdir"])
    path.mkdir(parents=True, exist_ok=True)
    return path


def _artifact(cfg, key: str) -> Path:
    return _workdir(cfg) / cfg["paths"][key]


def _require(cfg, key: str) -> Path:
    path = _artifact(cfg, key)
    if not path.exists():
        producer = _PRODUCERS.get(key, "?")
        raise ArtifactError(
            f"missing artifact {path}; run `uq {producer}` first")
    return path


def _forcing_from_config(cfg) -> simulators.ForcingSeries:
    return simulators.synthetic_storm(cfg["simulate"]["n_steps"],
                                      cfg["simulate"]["dt_seconds"])


def _load_design(cfg) -> doe.ExperimentalDesign:
    header, pts = io.read_matrix_csv(_require(cfg, "design"))
    names = cfg["parameters"]["names"]
    if header != names:
        raise ArtifactError("design header does not match configured names")
    bounds = [tuple(b) for b in cfg["parameters"]["bounds"]]
    return doe.ExperimentalDesign(points=pts, bounds=tuple(bounds),
                                  seed=cfg["design"]["seed"],
                                  chunk_sizes=tuple(cfg["design"]["chunks"]))


def _load_surrogate(cfg) -> pce.MultiOutputSurrogate:
    doc = io.read_json_artifact(_require(cfg, "surrogate"), "surrogate")
    return pce.surrogate_from_payload(doc)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_design(cfg, args) -> None:
    with _Stage("design"):
        bounds = [tuple(b) for b in cfg["parameters"]["bounds"]]
        design = doe.chunked_design(bounds, cfg["design"]["chunks"],
                                    cfg["design"]["seed"])
        io.write_matrix_csv(_artifact(cfg, "design"),
                            cfg["parameters"]["names"], design.points)
        log.info("design: %d points, %d inputs", design.size,
                 design.dimension)


def cmd_simulate(cfg, args) -> None:
    design = _load_design(cfg)
    forcing = _forcing_from_config(cfg)
    with _Stage("simulate"):
        outputs = simulators.simulate_design(design.points, forcing)
        io.write_csv(_artifact(cfg, "forcing"), ["time_s", "intensity_mm_h"],
                     zip(map(float, forcing.times),
                         map(float, forcing.intensities)))
        io.write_matrix_csv(_artifact(cfg, "outputs"),
                            [f"y{t}" for t in range(outputs.shape[1])],
                            outputs)
        log.info("simulated %d runs of %d steps", outputs.shape[0],
                 outputs.shape[1])


def cmd_fit(cfg, args) -> None:
    design = _load_design(cfg)
    _, outputs = io.read_matrix_csv(_require(cfg, "outputs"))
    with _Stage("fit"):
        surr = pce.fit_multi(
            design, outputs, cfg["pca"]["target_fraction"],
            cfg["pce"]["degree_range"], threads=args.threads,
            loo_correction=cfg["pce"]["loo_correction"],
            path_patience=cfg["pce"]["path_patience"])
        io.write_json_artifact(_artifact(cfg, "surrogate"), "surrogate",
                               pce.surrogate_to_payload(surr))
        z_scores = pca.scores(surr.rb, outputs)
        io.write_matrix_csv(_artifact(cfg, "scores"),
                            [f"z{p}" for p in range(z_scores.shape[1])],
                            z_scores)
        loos = [p.loo_normalized for p in surr.pces]
        io.write_csv(_artifact(cfg, "loo"),
                     ["K"] + [f"z{p}" for p in range(len(loos))],
                     [[design.size] + [float(v) for v in loos]])
        header = "  ".join(f"z{p}" for p in range(len(loos)))
        values = "  ".join(f"{v:.2e}" for v in loos)
        log.info("normalized leave-one-out errors (K=%d)\n  %s\n  %s",
                 design.size, header, values)
        from math import comb

        total_active = sum(len(p.active) for p in surr.pces)
        per_comp = comb(design.dimension + cfg["pce"]["degree_range"][1],
                        cfg["pce"]["degree_range"][1])
        total_cands = per_comp * len(surr.pces)
        log.info("sparsity: %d active terms of %d candidate slots (%.2f%%)",
                 total_active, total_cands, 100 * total_active / total_cands)


def cmd_predict(cfg, args) -> None:
    surr = _load_surrogate(cfg)
    design = _load_design(cfg)
    forcing = _forcing_from_config(cfg)
    with _Stage("predict"):
        if args.x is not None:
            points = np.array([[float(v) for v in args.x.split(",")]])
            rows = ["x"]
        else:
            row_ids = [int(r) for r in args.rows.split(",")]
            points = design.points[row_ids]
            rows = [str(r) for r in row_ids]
        series = pce.predict_series(surr, points,
                                    allow_extrapolation=args.allow_extrapolation)
        n_out = series.shape[1]
        io.write_csv(_artifact(cfg, "predictions"),
                     ["row"] + [f"y{t}" for t in range(n_out)],
                     ([label] + [float(v) for v in row]
                      for label, row in zip(rows, series)))
        if args.x is None:
            records = []
            for label, point, emulated in zip(rows, points, series):
                simulated = simulators.toy_catchment(point, forcing)
                for t in range(n_out):
                    records.append([label, float(forcing.times[t]),
                                    float(simulated[t]), float(emulated[t])])
            io.write_csv(_artifact(cfg, "accuracy"),
                         ["row", "time_s", "simulated", "emulated"], records)
        # speed narrative: simulator call vs surrogate call (medians,
        # measured at a design point so both sides accept it)
        x0 = design.points[0]
        t_sim = _median_time(lambda: simulators.toy_catchment(x0, forcing), 5)
        pce.predict_series(surr, x0)
        t_sur = _median_time(lambda: pce.predict_series(surr, x0), 50)
        log.info("timing: simulator %.3f ms, surrogate %.3f ms, ratio %.0fx",
                 1e3 * t_sim, 1e3 * t_sur, t_sim / max(t_sur, 1e-9))


def _median_time(func, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        func()
        times.append(time.perf_counter() - t0)
    times.sort()
    return times[len(times) // 2]


def cmd_sobol(cfg, args) -> None:
    surr = _load_surrogate(cfg)
    names = cfg["parameters"]["names"]
    selected = cfg["sobol"]["inputs"]
    if selected != "all":
        unknown = set(selected) - set(names)
        if unknown:
            raise ValidationError(f"unknown sobol inputs: {sorted(unknown)}")
        names_used = [n for n in names if n in set(selected)]
    else:
        names_used = names
    with _Stage("sobol"):
        report = sobol.component_report(surr, names)
        rows = [r for r in report.rows if r[1] in set(names_used)]
        io.write_csv(_artifact(cfg, "sobol_components"), report.header(), rows)
        if args.time_variant or cfg["sobol"]["time_variant"]:
            forcing = _forcing_from_config(cfg)
            records = []
            for name in names_used:
                i = names.index(name)
                values, flags = sobol.timevariant_first_order(surr, i)
                for t in range(values.shape[0]):
                    records.append([float(forcing.times[t]), name,
                                    float(values[t]), flags[t]])
            io.write_csv(_artifact(cfg, "sobol_timevariant"),
                         ["t", "input", "S", "flag"], records)


def _time_grid(cfg) -> np.ndarray:
    return np.arange(cfg["simulate"]["n_steps"] + 1) \
        * cfg["simulate"]["dt_seconds"]


def _build_problem(cfg, surr, data) -> calib.CalibrationProblem:
    cal = cfg["calibration"]
    if cal["error_model"] == "iid":
        model = calib.IidError(sigma_prior=calib.Uniform(*cal["sigma_prior"]))
    else:
        model = calib.DiscrepancyError(
            sigma_prior=calib.Uniform(*cal["sigma_prior"]),
            tau_prior=calib.Uniform(*cal["tau_prior"]),
            discrepancy_degree=cal["discrepancy_degree"],
            b_prior_scale=cal["b_prior_scale"])
    return calib.CalibrationProblem(surrogate=surr, data=data,
                                    times=_time_grid(cfg), error_model=model)


def synthetic_observations(cfg, times: np.ndarray) -> np.ndarray:
    """Toy-simulator truth plus polynomial discrepancy plus AR(1) noise."""
    truth = cfg["calibration"]["synthetic_truth"]
    forcing = _forcing_from_config(cfg)
    clean = simulators.toy_catchment(np.array(truth["x"]), forcing)
    if truth["b"]:
        clean = clean + calib.discrepancy(np.array(truth["b"]), times)
    rng = np.random.default_rng(truth["seed"])
    sigma, rho = truth["sigma"], truth["rho"]
    noise = np.empty(times.shape[0])
    noise[0] = sigma * rng.standard_normal()
    scale = sigma * math.sqrt(1.0 - rho * rho)
    for k in range(1, noise.shape[0]):
        noise[k] = rho * noise[k - 1] + scale * rng.standard_normal()
    return clean + noise


def _make_data(cfg, times) -> np.ndarray:
    """Produce the measurement vector and record it as data.csv."""
    cal = cfg["calibration"]
    if cal["data"] == "synthetic":
        data = synthetic_observations(cfg, times)
    else:
        source = Path(cal["data"])
        if not source.is_absolute():
            source = _workdir(cfg) / source
        if not source.exists():
            raise ArtifactError(f"measurement file not found: {source}")
        _, table = io.read_matrix_csv(source)
        if table.shape[1] != 2 or table.shape[0] != times.shape[0]:
            raise ValidationError(
                "measurement file must have columns time,outflow "
                "matching the grid")
        data = table[:, 1]
    io.write_csv(_artifact(cfg, "data"), ["time_s", "outflow_l_s"],
                 zip(map(float, times), map(float, data)))
    return data


def _read_data(cfg, times) -> np.ndarray:
    _, table = io.read_matrix_csv(_require(cfg, "data"))
    if table.shape[0] != times.shape[0]:
        raise ValidationError("recorded data does not match the time grid")
    return table[:, 1]


def cmd_calibrate(cfg, args) -> None:
    surr = _load_surrogate(cfg)
    cal = cfg["calibration"]
    with _Stage("calibrate"):
        problem = _build_problem(cfg, surr, _make_data(cfg, _time_grid(cfg)))
        run_cfg = RwmConfig(
            n_iterations=cal["iterations"], n_chains=cal["chains"],
            seed=cal["seed"],
            proposal_scales=problem.proposal_scales(
                cal["proposal_scale_fraction"]),
            blocks=problem.default_blocks(),
            adapt_iterations=cal["adapt_iterations"], threads=args.threads)
        chains = calib.rwm_sample(problem, run_cfg)
        stack = np.stack([
            np.column_stack([c.samples, c.log_posterior]) for c in chains])
        io.write_binary_matrix(_artifact(cfg, "chains_bin"), stack)
        meta = {
            "shape": list(stack.shape),
            "layout": "chain x iteration x (parameters..., log_posterior)",
            "parameters": problem.parameter_names,
            "seed": cal["seed"],
            "blocks": [list(b) for b in run_cfg.blocks],
            "acceptance": [
                {"chain": c.chain_index,
                 "accepts": [int(v) for v in c.accept_counts],
                 "proposals": [int(v) for v in c.proposal_counts]}
                for c in chains],
        }
        io.write_json_artifact(_artifact(cfg, "chains_meta"), "chains", meta)
        rates = np.mean([c.acceptance_rates for c in chains], axis=0)
        log.info("mean block acceptance rates: %s",
                 ", ".join(f"{r:.3f}" for r in rates))


def _load_chains(cfg):
    meta = io.read_json_artifact(_require(cfg, "chains_meta"), "chains")
    stack = io.read_binary_matrix(_require(cfg, "chains_bin"), meta["shape"])
    from .sampling import Chain

    chains = []
    blocks = tuple(tuple(b) for b in meta["blocks"])
    for ci in range(stack.shape[0]):
        acc = meta["acceptance"][ci]
        chains.append(Chain(
            samples=stack[ci, :, :-1], log_posterior=stack[ci, :, -1],
            accept_counts=np.array(acc["accepts"]),
            proposal_counts=np.array(acc["proposals"]),
            seed=meta["seed"], chain_index=ci, blocks=blocks))
    return meta, chains


def cmd_map(cfg, args) -> None:
    surr = _load_surrogate(cfg)
    cal = cfg["calibration"]
    with _Stage("map"):
        problem = _build_problem(cfg, surr,
                                 _read_data(cfg, _time_grid(cfg)))
        extra = []
        chains_path = _artifact(cfg, "chains_meta")
        if chains_path.exists():
            _, chains = _load_chains(cfg)
            best = max(chains, key=lambda c: c.log_posterior.max())
            extra.append(best.samples[int(best.log_posterior.argmax())])
        theta, lp = calib.map_estimate(problem, n_starts=cal["map_starts"],
                                       seed=cal["seed"], extra_starts=extra)
        io.write_json_artifact(_artifact(cfg, "map"), "map", {
            "parameters": problem.parameter_names,
            "theta": [float(v) for v in theta],
            "log_posterior": float(lp),
        })
        _write_map_products(cfg, problem, theta)
        log.info("map log-posterior: %.4f", lp)


def _write_map_products(cfg, problem, theta) -> None:
    times = problem.times
    n_x = len(problem.surrogate.spec.bounds)
    pred = pce.predict_series(problem.surrogate, theta[:n_x])
    if isinstance(problem.error_model, calib.DiscrepancyError):
        n_b = problem.error_model.discrepancy_degree + 1
        b = theta[n_x:n_x + n_b]
        sigma = float(theta[n_x + n_b])
        delta = calib.discrepancy(b, times)
    else:
        sigma = float(theta[n_x])
        delta = np.zeros_like(times)
    corrected = pred + delta
    io.write_csv(_artifact(cfg, "map_discrepancy"), ["time_s", "delta_l_s"],
                 zip(map(float, times), map(float, delta)))
    rows = []
    for t in range(times.shape[0]):
        lo3 = corrected[t] - 3 * sigma
        # negative predicted outflow is physically nonsensical but kept
        flag = "negative" if corrected[t] < 0 or lo3 < 0 else ""
        rows.append([float(times[t]), float(problem.data[t]),
                     float(pred[t]), float(corrected[t]),
                     float(corrected[t] - sigma), float(corrected[t] + sigma),
                     float(corrected[t] - 2 * sigma),
                     float(corrected[t] + 2 * sigma),
                     float(lo3), float(corrected[t] + 3 * sigma), flag])
    io.write_csv(_artifact(cfg, "map_prediction"),
                 ["time_s", "data", "prediction", "corrected",
                  "lo1", "hi1", "lo2", "hi2", "lo3", "hi3", "flag"], rows)


def cmd_summarize(cfg, args) -> None:
    cal = cfg["calibration"]
    with _Stage("summarize"):
        meta, chains = _load_chains(cfg)
        map_point = None
        map_path = _artifact(cfg, "map")
        if map_path.exists():
            doc = io.read_json_artifact(map_path, "map")
            map_point = np.array(doc["theta"])
        summary = calib.summarize(chains, cal["burn_in_fraction"],
                                  cal["thin"], map_point=map_point)
        summary.names = meta["parameters"]
        rows = []
        for d, name in enumerate(summary.names):
            mode = (float(summary.map_point[d])
                    if summary.map_point is not None else math.nan)
            rows.append([name, float(summary.mean[d]), mode,
                         float(summary.sd[d])]
                        + [float(q) for q in summary.quantiles[:, d]]
                        + [float(summary.rhat[d])])
        io.write_csv(_artifact(cfg, "summary"),
                     ["parameter", "mean", "mode", "sd", "q2.5", "q25",
                      "q50", "q75", "q97.5", "rhat"], rows)
        kde_rows = []
        for d, name in enumerate(summary.names):
            for g in range(summary.kde_grid.shape[1]):
                kde_rows.append([name, float(summary.kde_grid[d, g]),
                                 float(summary.kde_density[d, g])])
        io.write_csv(_artifact(cfg, "kde"),
                     ["parameter", "value", "density"], kde_rows)
        log.info("pooled %d samples (burn-in %.0f%%, thin %d)",
                 summary.n_pooled, 100 * summary.burn_in_fraction,
                 summary.thin)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "design": cmd_design,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "sobol": cmd_sobol,
    "calibrate": cmd_calibrate,
    "map": cmd_map,
    "summarize": cmd_summarize,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uq",
        description="surrogate-based uncertainty quantification pipeline")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker thread cap for parallel stages")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-c", "--config", required=True,
                       help="pipeline config JSON")
        return p

    add("design", "generate the Latin hypercube experimental design")
    add("simulate", "run the toy simulator over the design")
    add("fit", "fit the reduced-basis sparse polynomial surrogate")
    p = add("predict", "evaluate the surrogate (and compare to the simulator)")
    p.add_argument("--rows", default="0,1,2",
                   help="comma-separated design rows to predict")
    p.add_argument("--x", default=None,
                   help="explicit comma-separated parameter vector")
    p.add_argument("--allow-extrapolation", action="store_true",
                   help="permit points outside the training box (warns)")
    p = add("sobol", "sensitivity indices from the surrogate coefficients")
    p.add_argument("--time-variant", action="store_true",
                   help="also write per-time first-order indices")
    add("calibrate", "sample the Bayesian posterior with blocked RWM")
    add("map", "maximum a posteriori point and corrected predictions")
    add("summarize", "posterior summaries, KDE marginals, Gelman-Rubin")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(message)s", force=True)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    try:
        cfg = config_mod.load(args.config)
        _COMMANDS[args.command](cfg, args)
    except ValidationError as exc:
        log.error("validation failure: %s", exc)
        return 2
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return 3
    except UqError as exc:
        log.error("error: %s", exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
