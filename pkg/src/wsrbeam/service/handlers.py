"""Plain-function endpoint implementations.

The FastAPI app and the CLI's local transport both call these; each takes a
request model and returns a response model so the two surfaces cannot drift
apart.
"""

import time

import numpy as np

from .. import __version__
from ..channels import ChannelSample
from ..datasets import decode_cvec, encode_cvec, read_dataset
from ..errors import InvalidArgumentError
from ..harness import (
    evaluate_model,
    per_instance_rows,
    run_dataset,
    run_sweep,
    generate_dataset,
    summarize,
    trace_rows,
    train_from_dataset,
    write_csv,
)
from ..network import RnnPgpConfig, load_model
from ..solvers import iccd_solve, mrt_init, pgp_solve, wmmse_solve
from ..training import TrainConfig
from ..transform import lift_ic, reduce_ic
from ..network import forward_ic
from .. import wsr as W
from . import schemas as S


def health() -> S.HealthResponse:
    return S.HealthResponse(status="ok", version=__version__)


def gen(req: S.GenRequest) -> S.GenResponse:
    nt = req.nt.to_dict() if isinstance(req.nt, S.NtSpec) else req.nt
    header, records = generate_dataset(
        req.out_path, scenario=req.scenario, count=req.count, n_links=req.n_links,
        n_tx=req.n_tx, n_rx=req.n_rx, nt=nt, d_km=req.d_km, seed=req.seed,
        weighted=req.weighted, label_solver=req.label_solver,
        label_iterations=req.label_iterations, power_dbm=req.power_dbm,
        noise_dbm_per_hz=req.noise_dbm_per_hz, bandwidth_hz=req.bandwidth_hz,
        array_normalized=req.array_normalized, jobs=req.jobs)
    return S.GenResponse(path=str(req.out_path), count=len(records), scenario=req.scenario,
                         n_links=header["n_links"], n_tx=header["n_tx"], n_rx=header["n_rx"],
                         nt=header["nt"], d_km=header["d_km"],
                         labeled=header["labels"] is not None)


def solve(req: S.SolveRequest) -> S.SolveResponse:
    header, records = read_dataset(req.dataset)
    scenario = header.get("scenario", "ic")
    if req.solver == "rnn-pgp" and not req.model_path:
        raise InvalidArgumentError("rnn-pgp needs a model_path")
    results = run_dataset(records, scenario, req.solver, req.iterations,
                          step_rule=req.step_rule, restarts=req.restarts,
                          model_path=req.model_path, keep_trace=req.keep_trace,
                          jobs=req.jobs, seed=req.seed)
    baseline_results = None
    if req.baseline:
        baseline_results = run_dataset(records, scenario, req.baseline,
                                       req.baseline_iterations, jobs=req.jobs)
    summary = summarize(req.solver, results, baseline_results)
    if req.baseline:
        summary["baseline"] = req.baseline
        summary["baseline_mean_wsr"] = float(
            np.mean([r.final_wsr for r in baseline_results]))
    if req.out_csv:
        rows = per_instance_rows(req.solver, results, baseline_results)
        cols = ["instance", "scheme", "wsr", "runtime_s", "iterations"]
        if baseline_results is not None:
            cols.append("accuracy_pct")
        write_csv(req.out_csv, rows, columns=cols)
    if req.trace_csv:
        rows = trace_rows(results)
        if rows:
            write_csv(req.trace_csv, rows,
                      columns=["instance", "iteration", "wsr", "cum_runtime_s"])
    return S.SolveResponse(summary=S.MetricsRow(**summary), out_csv=req.out_csv,
                           trace_csv=req.trace_csv if req.keep_trace else None,
                           timing_parallel=req.jobs > 1)


def train(req: S.TrainRequest) -> S.TrainResponse:
    rnn = RnnPgpConfig(
        scenario=req.scenario, iterations=req.rnn.iterations, neighbors=req.rnn.neighbors,
        eta=req.rnn.eta, hidden_sizes=tuple(req.rnn.hidden_sizes),
        step_size_only=req.rnn.step_size_only, n_rx=req.rnn.n_rx)
    cfg = TrainConfig(gamma=req.train.gamma, stage1_epochs=req.train.stage1_epochs,
                      stage2_epochs=req.train.stage2_epochs, batch_size=req.train.batch_size,
                      adam=(req.train.learning_rate, 0.9, 0.999, 1e-8), seed=req.train.seed)
    _, run, extra = train_from_dataset(req.dataset, req.out_model, rnn=rnn, train=cfg,
                                       val_dataset_path=req.val_dataset,
                                       val_count=req.val_count, curve_csv=req.curve_csv)
    return S.TrainResponse(model_path=str(req.out_model), wall_clock_s=run.wall_clock_s,
                           batches=len(run.batch_losses),
                           final_val_accuracy_pct=extra["final_val_accuracy_pct"],
                           curve_csv=req.curve_csv,
                           unsupervised_only=extra["trained_unsupervised_only"])


def evaluate(req: S.EvalRequest) -> S.EvalResponse:
    summary = evaluate_model(req.model_path, req.dataset,
                             baseline_iterations=req.baseline_iterations,
                             jobs=req.jobs, out_csv=req.out_csv)
    return S.EvalResponse(summary=S.MetricsRow(**summary), out_csv=req.out_csv)


def sweep(req: S.SweepRequest) -> S.SweepResponse:
    gen_params = None
    if req.gen is not None:
        nt = req.gen.nt.to_dict() if isinstance(req.gen.nt, S.NtSpec) else req.gen.nt
        gen_params = {"scenario": req.gen.scenario, "n_links": req.gen.n_links,
                      "nt": nt, "d_km": req.gen.d_km, "weighted": req.gen.weighted}
        gen_params = {k: v for k, v in gen_params.items() if v is not None}
    train_params = None
    if req.train is not None:
        train_params = {
            "rnn": {"scenario": req.train.scenario, "iterations": req.train.rnn.iterations,
                    "neighbors": req.train.rnn.neighbors, "eta": req.train.rnn.eta,
                    "hidden_sizes": tuple(req.train.rnn.hidden_sizes),
                    "step_size_only": req.train.rnn.step_size_only,
                    "n_rx": req.train.rnn.n_rx},
            "train": {"gamma": req.train.train.gamma,
                      "stage1_epochs": req.train.train.stage1_epochs,
                      "stage2_epochs": req.train.train.stage2_epochs,
                      "batch_size": req.train.train.batch_size,
                      "adam": (req.train.train.learning_rate, 0.9, 0.999, 1e-8),
                      "seed": req.train.train.seed},
            "label_solver": "wmmse" if req.train.scenario == "ic" else "pgp",
        }
    rows = run_sweep(req.axis, req.values, req.workdir, model_path=req.model_path,
                     gen_params=gen_params, train_params=train_params,
                     test_count=req.test_count, baseline_iterations=req.baseline_iterations,
                     jobs=req.jobs, seed=req.seed)
    if req.out_csv:
        write_csv(req.out_csv, rows, columns=["axis", "value", "scheme", "mean_wsr",
                                              "accuracy_pct", "mean_runtime_s"])
    return S.SweepResponse(rows=[S.SweepRow(**r) for r in rows], out_csv=req.out_csv)


def beamform(req: S.BeamformRequest) -> S.BeamformResponse:
    """Solve one inline instance and return antenna-space beamformers."""
    n = len(req.chan)
    if n == 0 or any(len(row) != n for row in req.chan):
        raise InvalidArgumentError("chan must be a nonempty K x K matrix of vectors")
    chan = [[decode_cvec(req.chan[j][k]) for k in range(n)] for j in range(n)]
    nt = tuple(len(chan[j][0]) for j in range(n))
    alpha = np.array(req.alpha) if req.alpha else np.ones(n)
    sample = ChannelSample(chan=chan, alpha=alpha, sigma2=np.array(req.sigma2),
                           power=np.array(req.power), nt=nt).validate()
    reduced = reduce_ic(sample)
    problem = reduced.problem
    init = mrt_init(problem)
    start = time.perf_counter()
    if req.solver == "rnn-pgp":
        if not req.model_path:
            raise InvalidArgumentError("rnn-pgp needs a model_path")
        params, config, _ = load_model(req.model_path)
        record = forward_ic(problem, params, config, init)
        w = record.iterates[-1]
    elif req.solver == "pgp":
        w = pgp_solve(problem, init, req.iterations).beamformers
    elif req.solver == "iccd":
        w = iccd_solve(problem, init, req.iterations).beamformers
    else:
        w = wmmse_solve(problem, init, req.iterations, rel_tol=1e-8).beamformers
    elapsed = time.perf_counter() - start
    rates = alpha * np.log2(1.0 + W.sinr_all(w, problem))
    lifted = lift_ic(reduced, w)
    return S.BeamformResponse(
        beamformers=[encode_cvec(v) for v in lifted],
        rates_bits=[float(r) for r in rates],
        wsr_bits=float(np.sum(rates)),
        runtime_s=elapsed)
