"""Dataset generation, benchmark runs, evaluation and sweeps.

This is the engine behind the HTTP service and the CLI: everything here
takes plain data in and returns rows/summaries out. Wall-clock numbers time
the solver call only; file I/O and problem reduction happen outside the
timed region so schemes stay comparable.
"""

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channels import (
    DEFAULT_BANDWIDTH_HZ,
    DEFAULT_NOISE_DBM_PER_HZ,
    DEFAULT_POWER_DBM,
    place_coop_network,
    place_network,
    sample_channels,
    sample_coop_channels,
)
from .datasets import DatasetRecord, read_dataset, write_dataset
from .errors import InvalidArgumentError
from .network import (
    MlpParams,
    RnnPgpConfig,
    forward_coop,
    forward_ic,
    load_model,
    save_model,
)
from .solvers import iccd_solve, mrt_init, pgp_solve, upper_oracle, wmmse_solve
from .training import TrainConfig, TrainInstance, train_hybrid
from .transform import reduce_coop, reduce_ic
from . import wsr as W

SOLVER_NAMES = ("pgp", "iccd", "wmmse", "oracle", "rnn-pgp")

# Iteration budgets used when a request does not pin them.
DEFAULT_SOLVER_ITERS = 200
DEFAULT_WMMSE_BASELINE_ITERS = 200
DEFAULT_ORACLE_RESTARTS = 8

# Desk-scale experiment defaults: a full train+eval cycle stays in the
# minutes range on one CPU core.
DESK_DEFAULTS = {
    "n_links": 7, "nt": 8, "neighbors": 6, "iterations": 10,
    "train_count": 2000, "test_count": 500, "d_km": 1.0,
}


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def _nt_for_sample(nt_spec, index, count, n_bs, rng):
    kind = nt_spec["kind"]
    if kind == "fixed":
        return [int(nt_spec["value"])] * n_bs
    if kind == "per_bs":
        values = [int(v) for v in nt_spec["values"]]
        if len(values) != n_bs:
            raise InvalidArgumentError(f"per_bs nt needs {n_bs} entries")
        return values
    if kind == "mixed":
        values = nt_spec["values"]
        if count % len(values) != 0:
            raise InvalidArgumentError(
                f"count {count} not divisible into equal blocks over {len(values)} antenna counts")
        return [int(values[index * len(values) // count])] * n_bs
    if kind == "random":
        lo, hi = int(nt_spec["low"]), int(nt_spec["high"])
        return [int(v) for v in rng.integers(lo, hi + 1, size=n_bs)]
    raise InvalidArgumentError(f"unknown nt spec kind {kind!r}")


def normalize_nt_spec(nt) -> dict:
    if isinstance(nt, dict):
        return nt
    if np.isscalar(nt):
        return {"kind": "fixed", "value": int(nt)}
    return {"kind": "per_bs", "values": [int(v) for v in nt]}


def _d_for_sample(d_km, index, count):
    if np.isscalar(d_km):
        return float(d_km)
    values = list(d_km)
    if count % len(values) != 0:
        raise InvalidArgumentError(
            f"count {count} not divisible into equal blocks over {len(values)} radii")
    return float(values[index * len(values) // count])


def _random_full_power(problem, scenario, rng):
    if scenario == "coop":
        w0 = rng.normal(size=(problem.n_tx, problem.n_rx, problem.width)) \
            + 1j * rng.normal(size=(problem.n_tx, problem.n_rx, problem.width))
        for j in range(problem.n_tx):
            for k in range(problem.n_rx):
                w0[j, k, problem.dims[j, k]:] = 0.0
            w0[j] *= np.sqrt(problem.power[j]) / np.sqrt(np.sum(np.abs(w0[j]) ** 2))
        return w0
    w0 = rng.normal(size=(problem.n_links, problem.width)) \
        + 1j * rng.normal(size=(problem.n_links, problem.width))
    for k in range(problem.n_links):
        w0[k, problem.dims[k]:] = 0.0
        w0[k] *= np.sqrt(problem.power[k]) / np.linalg.norm(w0[k])
    return w0


def _label_one(record, scenario, solver, iterations, seed):
    prepared = prepare_instance(record, scenario)
    problem, init = prepared.problem, prepared.init

    def solve_from(w0):
        if scenario == "coop" or solver == "pgp":
            tr = pgp_solve(problem, w0, iterations)
        else:
            tr = wmmse_solve(problem, w0, iterations, rel_tol=1e-8)
        return tr.beamformers, tr.final_wsr

    if solver in ("wmmse", "pgp"):
        if solver == "wmmse" and scenario == "coop":
            raise InvalidArgumentError("wmmse labels are defined for the ic scenario only")
        w, final = solve_from(init)
    elif solver == "oracle":
        # best restart's beamformers, not just its value
        w, final = solve_from(init)
        rng = np.random.default_rng(np.random.SeedSequence((0x0A, seed)))
        for _ in range(DEFAULT_ORACLE_RESTARTS - 1):
            cand_w, cand = solve_from(_random_full_power(problem, scenario, rng))
            if cand > final:
                w, final = cand_w, cand
    else:
        raise InvalidArgumentError(f"unknown label solver {solver!r}")
    rotated = _rotate_canonical(w, problem, scenario)
    return _unpad_solution(rotated, problem, scenario), float(final)


def _rotate_canonical(w, problem, scenario):
    if scenario == "coop":
        out = w.copy()
        for j in range(problem.n_tx):
            for k in range(problem.n_rx):
                out[j, k] = W.phase_rotate(w[j, k], problem.chan[j, k, k])
        return out
    n = problem.n_links
    own = problem.chan[np.arange(n), np.arange(n)]
    return W.rotate_all(w, own)


def _unpad_solution(w, problem, scenario):
    if scenario == "coop":
        return [[w[j, k, : problem.dims[j, k]] for k in range(problem.n_rx)]
                for j in range(problem.n_tx)]
    return [w[k, : problem.dims[k]] for k in range(problem.n_links)]


def generate_dataset(out_path, *, scenario="ic", count=100, n_links=None, n_tx=None,
                     n_rx=None, nt=8, d_km=1.0, seed=0, weighted=False,
                     label_solver=None, label_iterations=DEFAULT_SOLVER_ITERS,
                     power_dbm=DEFAULT_POWER_DBM, noise_dbm_per_hz=DEFAULT_NOISE_DBM_PER_HZ,
                     bandwidth_hz=DEFAULT_BANDWIDTH_HZ, array_normalized=False, jobs=1):
    """Sample `count` network realizations (optionally labeled) into a file."""
    if count < 1:
        raise InvalidArgumentError("count must be >= 1")
    nt_spec = normalize_nt_spec(nt)
    if scenario == "ic":
        if not n_links:
            raise InvalidArgumentError("ic generation needs n_links")
        n_bs = n_links
    elif scenario == "coop":
        if not (n_tx and n_rx):
            raise InvalidArgumentError("coop generation needs n_tx and n_rx")
        n_bs = n_tx
    else:
        raise InvalidArgumentError(f"unknown scenario {scenario!r}")

    records = []
    for i in range(count):
        sample_seed = int(np.random.SeedSequence((0x5EED, seed, i)).generate_state(1)[0])
        rng = np.random.default_rng(np.random.SeedSequence((0x5EED, seed, i, 1)))
        nt_i = _nt_for_sample(nt_spec, i, count, n_bs, rng)
        d_i = _d_for_sample(d_km, i, count)
        kwargs = dict(weighted=weighted, power_dbm=power_dbm,
                      noise_dbm_per_hz=noise_dbm_per_hz, bandwidth_hz=bandwidth_hz,
                      array_normalized=array_normalized)
        if scenario == "ic":
            geom = place_network(n_links, d_i, rng_seed=sample_seed)
            sample = sample_channels(geom, nt_i, rng_seed=sample_seed, **kwargs)
        else:
            geom = place_coop_network(n_tx, n_rx, d_i, rng_seed=sample_seed)
            sample = sample_coop_channels(geom, nt_i, rng_seed=sample_seed, **kwargs)
        records.append(DatasetRecord(sample=sample, d_km=d_i))

    if label_solver:
        args = [(rec, scenario, label_solver, label_iterations, seed) for rec in records]
        for rec, (sol_w, sol_wsr) in zip(records, _map_jobs(_label_star, args, jobs)):
            rec.solution_w = sol_w
            rec.solution_wsr = sol_wsr

    header = {
        "scenario": scenario,
        "n_links": n_links if scenario == "ic" else None,
        "n_tx": n_tx if scenario == "coop" else None,
        "n_rx": n_rx if scenario == "coop" else None,
        "nt": nt_spec,
        "d_km": d_km if np.isscalar(d_km) else list(d_km),
        "weighted": weighted,
        "array_normalized": array_normalized,
        "bandwidth_hz": bandwidth_hz,
        "power_dbm": power_dbm,
        "noise_dbm_per_hz": noise_dbm_per_hz,
        "seed": seed,
        "labels": {"solver": label_solver, "iterations": label_iterations,
                   "space": "reduced", "rotated": True} if label_solver else None,
    }
    write_dataset(out_path, header, records)
    return header, records


def _label_star(args):
    return _label_one(*args)


def _map_jobs(fn, args, jobs):
    if jobs <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, args, chunksize=max(1, len(args) // (4 * jobs))))


# ---------------------------------------------------------------------------
# Prepared instances and solver runs
# ---------------------------------------------------------------------------

@dataclass
class PreparedInstance:
    """Reduced problem, canonical init, and (optionally) a padded label."""

    problem: object
    init: np.ndarray
    label: np.ndarray = None
    label_wsr: float = None


def prepare_instance(record: DatasetRecord, scenario: str) -> PreparedInstance:
    if scenario == "coop":
        reduced = reduce_coop(record.sample)
        problem = reduced.problem
        label = None
        if record.solution_w is not None:
            label = np.zeros((problem.n_tx, problem.n_rx, problem.width), dtype=complex)
            for j in range(problem.n_tx):
                for k in range(problem.n_rx):
                    vec = record.solution_w[j][k]
                    label[j, k, : len(vec)] = vec
    else:
        reduced = reduce_ic(record.sample)
        problem = reduced.problem
        label = None
        if record.solution_w is not None:
            label = np.zeros((problem.n_links, problem.width), dtype=complex)
            for k in range(problem.n_links):
                vec = record.solution_w[k]
                label[k, : len(vec)] = vec
    return PreparedInstance(problem=problem, init=mrt_init(problem), label=label,
                            label_wsr=record.solution_wsr)


@dataclass
class RunResult:
    final_wsr: float
    runtime_s: float
    iterations: int
    trace: list = field(default=None)          # per-iteration WSR
    trace_time: list = field(default=None)     # cumulative seconds


def run_solver(problem, init, solver, iterations, *, step_rule="backtracking",
               restarts=DEFAULT_ORACLE_RESTARTS, model=None, keep_trace=False, seed=0):
    """Run one scheme on one prepared instance, timing only the solver call."""
    if solver == "rnn-pgp":
        params, config, _ = model
        coop = isinstance(problem, W.CoopProblem)
        fwd = forward_coop if coop else forward_ic
        start = time.perf_counter()
        record = fwd(problem, params, config, init)
        elapsed = time.perf_counter() - start
        steps = len(record.iterates)
        # every unrolled iteration runs the same ops, so cumulative times are
        # evenly spread rather than instrumented inside the forward pass
        times = [elapsed * (i + 1) / steps for i in range(steps)] if keep_trace else None
        return RunResult(final_wsr=record.wsr[-1], runtime_s=elapsed, iterations=steps,
                         trace=record.wsr if keep_trace else None, trace_time=times)
    if solver == "oracle":
        start = time.perf_counter()
        value = upper_oracle(problem, restarts, iterations, seed=seed)
        elapsed = time.perf_counter() - start
        return RunResult(final_wsr=value, runtime_s=elapsed, iterations=iterations)
    if solver == "pgp":
        fn = lambda: pgp_solve(problem, init, iterations, step_rule=step_rule)
    elif solver == "iccd":
        fn = lambda: iccd_solve(problem, init, iterations, step_rule=step_rule)
    elif solver == "wmmse":
        fn = lambda: wmmse_solve(problem, init, iterations)
    else:
        raise InvalidArgumentError(
            f"unknown solver {solver!r}; choose one of {', '.join(SOLVER_NAMES)}")
    start = time.perf_counter()
    trace = fn()
    elapsed = time.perf_counter() - start
    return RunResult(final_wsr=trace.final_wsr, runtime_s=elapsed, iterations=trace.iterations,
                     trace=trace.wsr if keep_trace else None,
                     trace_time=trace.runtime_s if keep_trace else None)


def _run_one(args):
    record, scenario, solver, iterations, step_rule, restarts, model_path, keep_trace, seed = args
    prepared = prepare_instance(record, scenario)
    model = load_model(model_path) if model_path else None
    result = run_solver(prepared.problem, prepared.init, solver, iterations,
                        step_rule=step_rule, restarts=restarts, model=model,
                        keep_trace=keep_trace, seed=seed)
    return result


def run_dataset(records, scenario, solver, iterations, *, step_rule="backtracking",
                restarts=DEFAULT_ORACLE_RESTARTS, model_path=None, keep_trace=False,
                jobs=1, seed=0):
    args = [(rec, scenario, solver, iterations, step_rule, restarts, model_path,
             keep_trace, seed) for rec in records]
    return _map_jobs(_run_one, args, jobs)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def summarize(scheme, results, baseline_results=None) -> dict:
    """Aggregate MetricsRow; accuracy is the ratio of mean rates (in %)."""
    wsrs = np.array([r.final_wsr for r in results])
    times = np.array([r.runtime_s for r in results])
    row = {
        "scheme": scheme,
        "instances": len(results),
        "mean_wsr": float(wsrs.mean()),
        "mean_runtime_s": float(times.mean()),
        "median_runtime_s": float(np.median(times)),
    }
    if baseline_results is not None:
        base = np.array([r.final_wsr for r in baseline_results])
        row["accuracy_pct"] = 100.0 * float(wsrs.mean() / base.mean())
    return row


def per_instance_rows(scheme, results, baseline_results=None):
    rows = []
    for i, r in enumerate(results):
        row = {"instance": i, "scheme": scheme, "wsr": r.final_wsr,
               "runtime_s": r.runtime_s, "iterations": r.iterations}
        if baseline_results is not None:
            row["accuracy_pct"] = 100.0 * r.final_wsr / baseline_results[i].final_wsr
        rows.append(row)
    return rows


def trace_rows(results):
    rows = []
    for i, r in enumerate(results):
        if not r.trace:
            continue
        for it, wsr_val in enumerate(r.trace):
            cum = 0.0 if it == 0 else r.trace_time[it - 1]
            rows.append({"instance": i, "iteration": it, "wsr": wsr_val,
                         "cum_runtime_s": cum})
    return rows


def write_csv(path, rows, columns=None):
    """RFC-4180 CSV with a header row; column order is fixed by `columns`."""
    if not rows:
        raise InvalidArgumentError("no rows to write")
    columns = columns or list(rows[0].keys())
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, quoting=csv.QUOTE_MINIMAL)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt_cell(row.get(k)) for k in columns})


def _fmt_cell(v):
    if isinstance(v, float):
        return repr(float(v))        # shortest round-trip form, incl. numpy scalars
    if isinstance(v, (int, np.integer)):
        return int(v)
    return v


# ---------------------------------------------------------------------------
# Training and evaluation entry points
# ---------------------------------------------------------------------------

def _instances_from_records(records, scenario):
    prepared = [prepare_instance(rec, scenario) for rec in records]
    return [TrainInstance(problem=p.problem, init=p.init, label=p.label) for p in prepared]


def train_from_dataset(dataset_path, out_model_path, *, rnn: RnnPgpConfig,
                       train: TrainConfig, val_dataset_path=None, val_count=None,
                       curve_csv=None, progress=None):
    """Train on a labeled dataset; validation accuracy is measured against
    WMMSE run fresh on the held-out instances."""
    header, records = read_dataset(dataset_path)
    scenario = header.get("scenario", "ic")
    if rnn.scenario != scenario:
        raise InvalidArgumentError(f"model scenario {rnn.scenario!r} != dataset scenario {scenario!r}")
    instances = _instances_from_records(records, scenario)
    val_instances = val_baseline = None
    if val_dataset_path:
        vheader, vrecords = read_dataset(val_dataset_path)
        if vheader.get("scenario", "ic") != scenario:
            raise InvalidArgumentError("validation dataset scenario mismatch")
        if val_count:
            vrecords = vrecords[:val_count]
        val_prepared = [prepare_instance(rec, scenario) for rec in vrecords]
        val_instances = [TrainInstance(problem=p.problem, init=p.init) for p in val_prepared]
        val_baseline = [_baseline_wsr(p, scenario) for p in val_prepared]
    params, run = train_hybrid(instances, train, rnn, val_instances=val_instances,
                               val_baseline=val_baseline, progress=progress)
    extra = {
        "dataset": str(dataset_path),
        "stage1_epochs": train.stage1_epochs,
        "stage2_epochs": train.stage2_epochs,
        "gamma": train.gamma,
        "seed": train.seed,
        "final_val_accuracy_pct": run.val_accuracy[-1][2] if run.val_accuracy else None,
        "trained_unsupervised_only": train.stage1_epochs == 0,
    }
    save_model(out_model_path, params, rnn, extra=extra)
    if curve_csv:
        rows = [{"stage": s, "epoch": e, "batch": b, "loss": loss}
                for s, e, b, loss in run.batch_losses]
        for s, e, acc in run.val_accuracy:
            rows.append({"stage": s, "epoch": e, "batch": "", "loss": "",
                         "val_accuracy_pct": acc})
        write_csv(curve_csv, rows, columns=["stage", "epoch", "batch", "loss",
                                            "val_accuracy_pct"])
    return params, run, extra


def _baseline_wsr(prepared: PreparedInstance, scenario,
                  iterations=DEFAULT_WMMSE_BASELINE_ITERS):
    if scenario == "coop":
        # no coop WMMSE; long-run projected gradient is the reference
        return pgp_solve(prepared.problem, prepared.init, max(iterations, 300)).final_wsr
    return wmmse_solve(prepared.problem, prepared.init, iterations, rel_tol=1e-8).final_wsr


def evaluate_model(model_path, dataset_path, *, baseline_iterations=DEFAULT_WMMSE_BASELINE_ITERS,
                   jobs=1, out_csv=None):
    """Accuracy of a trained model against a freshly computed baseline."""
    params, config, _ = load_model(model_path)
    header, records = read_dataset(dataset_path)
    scenario = header.get("scenario", "ic")
    if config.scenario != scenario:
        raise InvalidArgumentError(f"model is {config.scenario!r}, dataset is {scenario!r}")
    if scenario == "ic":
        n_links = header.get("n_links") or records[0].sample.n_links
        if config.neighbors > n_links - 1:
            raise InvalidArgumentError(
                f"model neighbor budget c={config.neighbors} needs K >= {config.neighbors + 1}, "
                f"dataset has K={n_links}")
    net_results = run_dataset(records, scenario, "rnn-pgp", config.iterations,
                              model_path=model_path, jobs=jobs)
    base_solver = "wmmse" if scenario == "ic" else "pgp"
    base_iters = baseline_iterations if scenario == "ic" else max(baseline_iterations, 300)
    base_results = run_dataset(records, scenario, base_solver, base_iters, jobs=jobs)
    summary = summarize("rnn-pgp", net_results, base_results)
    summary["baseline"] = base_solver
    summary["baseline_mean_wsr"] = float(np.mean([r.final_wsr for r in base_results]))
    if out_csv:
        rows = per_instance_rows("rnn-pgp", net_results, base_results)
        write_csv(out_csv, rows, columns=["instance", "scheme", "wsr", "runtime_s",
                                          "iterations", "accuracy_pct"])
    return summary


def write_json_summary(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Generalization sweeps
# ---------------------------------------------------------------------------

SWEEP_AXES = ("nt", "k", "d", "train_size")


def run_sweep(axis, values, workdir, *, model_path=None, gen_params=None,
              train_params=None, test_count=200, baseline_iterations=DEFAULT_WMMSE_BASELINE_ITERS,
              jobs=1, seed=0):
    """Evaluate a model across one generalization axis.

    For the "nt"/"k"/"d" axes a fresh test set is generated per value and the
    given model is evaluated on it. The "train_size" axis retrains the model
    per value (expensive) on truncations of one labeled pool and evaluates on
    a shared test set. Returns long-form rows.
    """
    from pathlib import Path

    if axis not in SWEEP_AXES:
        raise InvalidArgumentError(f"unknown sweep axis {axis!r}; choose one of {SWEEP_AXES}")
    if not values:
        raise InvalidArgumentError("sweep needs at least one axis value")
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    gen_params = dict(gen_params or {})
    gen_params.setdefault("scenario", "ic")
    gen_params.setdefault("n_links", DESK_DEFAULTS["n_links"])
    gen_params.setdefault("nt", DESK_DEFAULTS["nt"])
    gen_params.setdefault("d_km", DESK_DEFAULTS["d_km"])
    rows = []

    if axis == "train_size":
        if not train_params:
            raise InvalidArgumentError("train_size sweep needs train_params")
        pool_path = workdir / "sweep_pool.wds"
        pool_count = int(max(values))
        generate_dataset(pool_path, count=pool_count, seed=seed,
                         label_solver=train_params.get("label_solver", "wmmse"),
                         label_iterations=train_params.get("label_iterations",
                                                           DEFAULT_SOLVER_ITERS),
                         jobs=jobs, **gen_params)
        test_path = workdir / "sweep_test.wds"
        generate_dataset(test_path, count=test_count, seed=seed + 1, jobs=jobs, **gen_params)
        _, pool_records = read_dataset(pool_path)
        for v in values:
            sub_path = workdir / f"sweep_train_{v}.wds"
            head, _ = read_dataset(pool_path)
            head = {k: val for k, val in head.items()
                    if k not in ("format", "version", "count")}
            write_dataset(sub_path, head, pool_records[: int(v)])
            model_out = workdir / f"sweep_model_{v}.wbm"
            rnn = RnnPgpConfig(**train_params["rnn"])
            cfg = TrainConfig(**train_params["train"])
            train_from_dataset(sub_path, model_out, rnn=rnn, train=cfg)
            summary = evaluate_model(model_out, test_path,
                                     baseline_iterations=baseline_iterations, jobs=jobs)
            rows.append({"axis": axis, "value": v, "scheme": "rnn-pgp",
                         "mean_wsr": summary["mean_wsr"],
                         "accuracy_pct": summary["accuracy_pct"],
                         "mean_runtime_s": summary["mean_runtime_s"]})
        return rows

    if model_path is None:
        raise InvalidArgumentError(f"{axis} sweep needs a trained model")
    for v in values:
        params = dict(gen_params)
        if axis == "nt":
            params["nt"] = v if isinstance(v, dict) else int(v)
        elif axis == "k":
            params["n_links"] = int(v)
        elif axis == "d":
            params["d_km"] = float(v)
        test_path = workdir / f"sweep_{axis}_{v}.wds"
        generate_dataset(test_path, count=test_count, seed=seed, jobs=jobs, **params)
        summary = evaluate_model(model_path, test_path,
                                 baseline_iterations=baseline_iterations, jobs=jobs)
        rows.append({"axis": axis, "value": v, "scheme": "rnn-pgp",
                     "mean_wsr": summary["mean_wsr"],
                     "accuracy_pct": summary["accuracy_pct"],
                     "mean_runtime_s": summary["mean_runtime_s"]})
    return rows
