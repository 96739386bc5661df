"""Command-line front end.

Each subcommand marshals its flags (plus an optional --config JSON file)
into the service request models and dispatches them either in-process
(default) or to a running server via --server; the CLI itself contains no
solver logic. Exit codes: 0 success, 2 invalid arguments, 3 numerical
failure, 4 I/O or file-format problems.

Note on labels: the multi-restart "oracle" stands in for a global solver
when generating supervised labels; it is a best-of-restarts lower bound on
the true optimum, not a certified upper bound.
"""

import argparse
import json
import sys

from pydantic import ValidationError

from .errors import DatasetFormatError, InvalidArgumentError, NumericalFailureError
from .service import handlers
from .service import schemas as S

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _load_config(path):
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _merge(config, overrides):
    merged = dict(config)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    return merged


def _dispatch(server, endpoint, model_cls, handler, body):
    req = model_cls(**body)
    if server:
        import httpx

        resp = httpx.post(f"{server.rstrip('/')}{endpoint}",
                          json=req.model_dump(mode="json"), timeout=None)
        if resp.status_code >= 400:
            detail = {}
            try:
                detail = resp.json()
            except ValueError:
                pass
            kind = detail.get("error", "")
            message = detail.get("detail", resp.text)
            if kind == "numerical-failure":
                raise NumericalFailureError(message)
            if kind in ("format", "io"):
                raise DatasetFormatError(message)
            raise InvalidArgumentError(message)
        return resp.json()
    return handler(req).model_dump(mode="json")


def _print(payload):
    print(json.dumps(payload, indent=2, sort_keys=True))


def _parse_nt(text):
    if text is None:
        return None
    if text.startswith("mixed:"):
        return {"kind": "mixed", "values": [int(v) for v in text[6:].split(",")]}
    if text.startswith("random:"):
        lo, hi = text[7:].split("-")
        return {"kind": "random", "low": int(lo), "high": int(hi)}
    if "," in text:
        return {"kind": "per_bs", "values": [int(v) for v in text.split(",")]}
    return {"kind": "fixed", "value": int(text)}


def _parse_d(text):
    if text is None:
        return None
    values = [float(v) for v in text.split(",")]
    return values[0] if len(values) == 1 else values


def cmd_gen(args):
    nt = _parse_nt(args.nt)
    body = _merge(_load_config(args.config), {
        "out_path": args.out, "scenario": args.scenario, "count": args.count,
        "n_links": args.k, "n_tx": args.k_tx, "n_rx": args.k_rx, "nt": nt,
        "d_km": _parse_d(args.d), "seed": args.seed, "weighted": args.weighted or None,
        "label_solver": args.label, "label_iterations": args.label_iters,
        "jobs": args.jobs,
    })
    return _dispatch(args.server, "/datasets/generate", S.GenRequest, handlers.gen, body)


def cmd_solve(args):
    body = _merge(_load_config(args.config), {
        "dataset": args.dataset, "solver": args.solver, "iterations": args.iterations,
        "model_path": args.model, "keep_trace": True if args.trace else None,
        "trace_csv": args.trace, "out_csv": args.out, "jobs": args.jobs,
        "seed": args.seed, "baseline": args.baseline,
        "baseline_iterations": args.baseline_iters,
        "step_rule": float(args.step) if args.step is not None else None,
        "restarts": args.restarts,
    })
    return _dispatch(args.server, "/solve", S.SolveRequest, handlers.solve, body)


def cmd_train(args):
    config = _load_config(args.config)
    rnn = dict(config.get("rnn", {}))
    train = dict(config.get("train", {}))
    for key, value in (("iterations", args.iterations), ("neighbors", args.neighbors),
                       ("eta", args.eta), ("n_rx", args.k_rx),
                       ("step_size_only", args.stepsize_only or None)):
        if value is not None:
            rnn[key] = value
    if args.hidden:
        rnn["hidden_sizes"] = [int(v) for v in args.hidden.split(",")]
    for key, value in (("gamma", args.gamma), ("stage1_epochs", args.stage1),
                       ("stage2_epochs", args.stage2), ("batch_size", args.batch),
                       ("learning_rate", args.lr), ("seed", args.seed)):
        if value is not None:
            train[key] = value
    body = _merge(config, {
        "dataset": args.dataset, "out_model": args.out, "scenario": args.scenario,
        "val_dataset": args.val_dataset, "val_count": args.val_count,
        "curve_csv": args.curves,
    })
    body["rnn"] = rnn
    body["train"] = train
    return _dispatch(args.server, "/train", S.TrainRequest, handlers.train, body)


def cmd_eval(args):
    body = _merge(_load_config(args.config), {
        "model_path": args.model, "dataset": args.dataset,
        "baseline_iterations": args.baseline_iters, "jobs": args.jobs,
        "out_csv": args.out,
    })
    return _dispatch(args.server, "/eval", S.EvalRequest, handlers.evaluate, body)


def cmd_sweep(args):
    config = _load_config(args.config)
    values = [json.loads(v) for v in args.values.split(",")] if args.values else None
    body = _merge(config, {
        "axis": args.axis, "values": values, "workdir": args.workdir,
        "model_path": args.model, "test_count": args.test_count,
        "jobs": args.jobs, "seed": args.seed, "out_csv": args.out,
    })
    return _dispatch(args.server, "/sweep", S.SweepRequest, handlers.sweep, body)


def cmd_serve(args):
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return {"status": "stopped"}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="wsrbeam",
        description="Weighted sum-rate beamforming benchmark: datasets, solvers, "
                    "learned unfolded solver, sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with request fields")
        p.add_argument("--server", help="base URL of a running service; default runs in-process")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=None, help="instance-level parallelism")

    p = sub.add_parser("gen", help="generate a channel dataset (optionally labeled)")
    common(p)
    p.add_argument("--out", required=True, help="output dataset path")
    p.add_argument("--scenario", choices=["ic", "coop"], default=None)
    p.add_argument("--count", "-L", type=int, default=None)
    p.add_argument("--k", type=int, default=None, help="number of BS-UE links (ic)")
    p.add_argument("--k-tx", type=int, default=None, help="number of BSs (coop)")
    p.add_argument("--k-rx", type=int, default=None, help="number of UEs (coop)")
    p.add_argument("--nt", default=None,
                   help="antennas: N | n1,n2,... | mixed:a,b,c | random:lo-hi")
    p.add_argument("--d", default=None, help="cell radius km, comma list for mixed")
    p.add_argument("--weighted", action="store_true", help="random rate weights summing to 1")
    p.add_argument("--label", choices=["wmmse", "pgp", "oracle"], default=None)
    p.add_argument("--label-iters", type=int, default=None)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("solve", help="run a solver over a dataset")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--solver", choices=["pgp", "iccd", "wmmse", "oracle", "rnn-pgp"],
                   required=True)
    p.add_argument("--iterations", "-T", type=int, default=None)
    p.add_argument("--model", default=None, help="model file for rnn-pgp")
    p.add_argument("--step", default=None, help="constant step size (default backtracking)")
    p.add_argument("--restarts", type=int, default=None, help="restarts for the oracle")
    p.add_argument("--baseline", choices=["wmmse", "pgp"], default=None,
                   help="also run a baseline and report accuracy")
    p.add_argument("--baseline-iters", type=int, default=None)
    p.add_argument("--out", default=None, help="per-instance metrics CSV")
    p.add_argument("--trace", default=None, help="per-iteration trace CSV")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("train", help="train the unfolded solver on a labeled dataset")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output model path")
    p.add_argument("--scenario", choices=["ic", "coop"], default=None)
    p.add_argument("--val-dataset", default=None)
    p.add_argument("--val-count", type=int, default=None)
    p.add_argument("--curves", default=None, help="training-curve CSV path")
    p.add_argument("--iterations", "-T", type=int, default=None)
    p.add_argument("--neighbors", "-c", type=int, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--hidden", default=None, help="comma-separated hidden sizes")
    p.add_argument("--k-rx", type=int, default=None, help="receiver count (coop models)")
    p.add_argument("--stepsize-only", action="store_true",
                   help="predict only the step size; use analytic gradients")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--stage1", type=int, default=None)
    p.add_argument("--stage2", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model against a fresh baseline")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--baseline-iters", type=int, default=None)
    p.add_argument("--out", default=None, help="per-instance metrics CSV")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sweep", help="generalization sweep along one axis")
    common(p)
    p.add_argument("--axis", choices=["nt", "k", "d", "train_size"], required=True)
    p.add_argument("--values", default=None, help="comma-separated axis values")
    p.add_argument("--workdir", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--test-count", type=int, default=None)
    p.add_argument("--out", default=None, help="long-form sweep CSV")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        payload = args.fn(args)
    except (ValidationError, InvalidArgumentError) as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DatasetFormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    _print(payload)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
