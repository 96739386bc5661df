"""Training of the unfolded solver: losses, exact reverse-mode gradients, Adam.

Reverse passes are hand-derived per pipeline block. Complex cotangents use
the same representation as the problem gradients: for a real loss L and a
complex intermediate z = x + iy, the stored cotangent is dL/dx + i*dL/dy.
Non-smooth conventions: the projection differentiates its active branch
(identity exactly on the boundary), the phase rotation differentiates the
full-quadrant angle (identity when the reference inner product is zero), and
neighbor membership / slot ordering / the step-size-only analytic direction
are constants of the forward pass.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, NumericalFailureError
from .network import (
    LN10,
    ForwardRecord,
    MlpParams,
    RnnPgpConfig,
    _mlp_apply,
    _sigmoid,
    _instance_scales,
    forward_coop,
    forward_ic,
)
from . import wsr as W


@dataclass
class TrainConfig:
    gamma: float = 0.95
    stage1_epochs: int = 50
    stage2_epochs: int = 20
    batch_size: int = 32
    adam: tuple = (1e-3, 0.9, 0.999, 1e-8)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise InvalidArgumentError("gamma must be in [0, 1]")
        if self.batch_size < 1:
            raise InvalidArgumentError("batch_size must be >= 1")


@dataclass
class TrainInstance:
    """One training sample: a reduced problem, its init, and optional labels."""

    problem: object
    init: np.ndarray
    label: np.ndarray = None


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(m=np.zeros(n), v=np.zeros(n), t=0)


@dataclass
class TrainRun:
    """Loss/validation curves and bookkeeping of one training run."""

    batch_losses: list = field(default_factory=list)     # (stage, epoch, batch, loss)
    val_accuracy: list = field(default_factory=list)     # (stage, epoch, accuracy %)
    stage_boundaries: list = field(default_factory=list)
    seed: int = 0
    wall_clock_s: float = 0.0
    adam_state: AdamState = None


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def _iterate_weights(gamma, n_iters):
    w = np.full(n_iters, 1.0 - gamma)
    w[-1] = gamma
    return w


def supervised_loss(iterates_per_sample, labels, alphas, gamma) -> float:
    """Mean weighted squared distance of every unrolled iterate to the label.

    The last iterate carries weight gamma, earlier ones (1 - gamma); the sum
    is normalized by 1/(2 L K) with per-link rate weights alpha_k (set
    alphas to ones for the cooperative variant, whose published loss carries
    no weights).
    """
    n_samples = len(iterates_per_sample)
    if n_samples != len(labels):
        raise InvalidArgumentError("iterates/labels length mismatch")
    total = 0.0
    for iterates, label, alpha in zip(iterates_per_sample, labels, alphas):
        if iterates[0].shape != label.shape:
            raise InvalidArgumentError("label shape does not match iterate shape")
        weights = _iterate_weights(gamma, len(iterates))
        n_links = label.shape[0]
        for w_r, wt in zip(iterates, weights):
            diff = np.sum(np.abs(w_r - label) ** 2, axis=tuple(range(1, label.ndim)))
            total += wt * float(np.sum(np.asarray(alpha) * diff)) / (2.0 * n_links)
    return total / n_samples


def unsupervised_loss(final_iterates, problems) -> float:
    """Negative mean rate of the final iterate, normalized per link."""
    total = 0.0
    for w_t, problem in zip(final_iterates, problems):
        if isinstance(problem, W.CoopProblem):
            total -= W.wsr_coop(w_t, problem) / problem.n_rx
        else:
            total -= W.wsr(w_t, problem) / problem.n_links
    return total / len(final_iterates)


def _loss_cotangents(record: ForwardRecord, instance: TrainInstance, loss_kind, gamma):
    """Per-iterate cotangents of the single-sample loss (L = 1 normalization)."""
    problem = instance.problem
    coop = isinstance(problem, W.CoopProblem)
    n_iters = len(record.iterates)
    cots = [None] * n_iters
    if loss_kind == "supervised":
        if instance.label is None:
            raise InvalidArgumentError("supervised loss needs labels")
        weights = _iterate_weights(gamma, n_iters)
        if coop:
            norm = 1.0 / (problem.n_tx * problem.n_rx)
            for r in range(n_iters):
                cots[r] = norm * weights[r] * (record.iterates[r] - instance.label)
        else:
            norm = problem.alpha / problem.n_links
            for r in range(n_iters):
                cots[r] = norm[:, None] * weights[r] * (record.iterates[r] - instance.label)
    elif loss_kind == "unsupervised":
        w_t = record.iterates[-1]
        if coop:
            cots[-1] = -W.gradient_coop(w_t, problem) / problem.n_rx
        else:
            cots[-1] = -W.gradient_ic(w_t, problem) / problem.n_links
    else:
        raise InvalidArgumentError(f"unknown loss kind {loss_kind!r}")
    return cots


def _sample_loss(record, instance, loss_kind, gamma):
    problem = instance.problem
    if loss_kind == "supervised":
        if isinstance(problem, W.CoopProblem):
            # flatten (j, k) pairs so the 1/(2 K_t K_r) normalization applies
            iterates = [it.reshape(-1, it.shape[-1]) for it in record.iterates]
            label = instance.label.reshape(-1, instance.label.shape[-1])
            alpha = np.ones(problem.n_tx * problem.n_rx)
        else:
            iterates = record.iterates
            label = instance.label
            alpha = problem.alpha
        return supervised_loss([iterates], [label], [alpha], gamma)
    return unsupervised_loss([record.iterates[-1]], [problem])


# ---------------------------------------------------------------------------
# Reverse passes
# ---------------------------------------------------------------------------

def _mlp_backward(ocot, mlp_cache, params, grads_w, grads_b):
    """Backprop through the dense tanh stack; accumulates parameter grads."""
    hidden, _ = mlp_cache
    delta = ocot
    n_layers = len(params.weights)
    for layer in range(n_layers - 1, -1, -1):
        grads_w[layer] += delta.T @ hidden[layer]
        grads_b[layer] += delta.sum(axis=0)
        if layer > 0:
            hcot = delta @ params.weights[layer]
            delta = hcot * (1.0 - hidden[layer] ** 2)    # tanh'
    return delta @ params.weights[0]


def _project_backward(hatcot, w_tilde, norms, active, budgets):
    """Cotangent through w_hat = w_tilde / max(||w_tilde||/sqrt(P), 1)."""
    out = hatcot.copy()
    idx = np.nonzero(active)[0]
    for i in idx:
        n = norms[i]
        scale = np.sqrt(budgets[i]) / n
        inner = float(np.sum(hatcot[i].conj() * w_tilde[i]).real)
        out[i] = scale * (hatcot[i] - (inner / n ** 2) * w_tilde[i])
    return out


def _rotate_backward(outcot, w_hat, t, mag, unit, own_ref):
    """Cotangent through w_out = w_hat * conj(t)/|t| with t = g^H w_hat."""
    w_out = w_hat * unit[..., None]
    hatcot = np.conj(unit)[..., None] * outcot
    nonzero = mag > 0
    phicot = np.sum(outcot.conj() * w_out, axis=-1).imag
    with np.errstate(invalid="ignore", divide="ignore"):
        tcot = np.where(nonzero, phicot * 1j * t / np.where(nonzero, mag ** 2, 1.0), 0.0)
    hatcot += own_ref * tcot[..., None]
    # zero reference inner product: rotation was the identity
    if not np.all(nonzero):
        hatcot[~nonzero] = outcot[~nonzero]
    return hatcot


def _backward_ic(problem, params, config, record, cots, grads_w, grads_b):
    # All cached intermediates live in normalized units; loss cotangents come
    # in original units and map through w = sqrt(P) * w_hat.
    nprob = record.norm["problem"]
    scale_w = record.norm["scale_w"]
    own_ref = record.norm["own_ref"]
    xscale = record.norm["xscale"]
    n = nprob.n_links
    arange = np.arange(n)
    wcot = np.zeros_like(record.iterates[-1])
    for r in range(len(record.iterates) - 1, -1, -1):
        if cots[r] is not None:
            wcot = wcot + cots[r] * scale_w[:, None]
        if not np.all(np.isfinite(wcot)):
            raise NumericalFailureError(f"non-finite cotangent at iteration {r + 1}")
        c = record.caches[r]
        hatcot = _rotate_backward(wcot, c["w_hat"], c["t"], c["mag"], c["unit"], own_ref)
        tilcot = _project_backward(hatcot, c["w_tilde"], c["norms"], c["active"], nprob.power)
        wcot = tilcot.copy()                                   # w path of the ascent
        scot = np.sum(tilcot.conj() * c["direction"], axis=1).real
        ocot = np.zeros_like(c["out"])
        if c["coeffs"] is not None:
            dcot = c["step"][:, None] * tilcot
            t3 = nprob.chan[arange[:, None], c["slots"]]
            acot = np.einsum("kir,kr->ki", t3.conj(), dcot) * c["slot_mask"] / c["t3_norm"]
            n_slots = config.neighbors + 1
            ocot[:, 0: 2 * n_slots: 2] = acot.real
            ocot[:, 1: 2 * n_slots + 1: 2] = acot.imag
        # step-size-only / oracle directions are constants of the forward pass
        if not c["fixed_step"]:
            ocot[:, -1] = scot * _sigmoid(c["out"][:, -1])
        featcot = _mlp_backward(ocot, c["mlp"], params, grads_w, grads_b)
        featcot = featcot.reshape(n, -1, 4)
        slot_mask = c["slot_mask"]
        slots = c["slots"]
        dtcot = np.zeros(n)
        itcot = np.zeros(n)
        np.add.at(dtcot, slots, featcot[:, :, 0] * slot_mask)
        np.add.at(itcot, slots, featcot[:, :, 1] * slot_mask)
        xcot = np.zeros((n, n), dtype=complex)
        xvals = (featcot[:, :, 2] + 1j * featcot[:, :, 3]) * slot_mask / xscale[:, None]
        np.add.at(xcot, (arange[:, None], slots), xvals)
        qcot = np.zeros((n, n))
        qcot[arange, arange] += nprob.alpha * dtcot / ((c["d_raw"] + nprob.sigma2) * LN10)
        qcot += c["in_mask"] * (itcot / ((c["i_raw"] + nprob.sigma2) * LN10))[None, :]
        xcot += 2.0 * qcot * c["x"]
        wcot += np.einsum("jkr,jk->jr", nprob.chan, xcot)
    return wcot


def _backward_coop(problem, params, config, record, cots, grads_w, grads_b):
    nprob = record.norm["problem"]
    scale_w = record.norm["scale_w"]
    own_ref = record.norm["own_ref"]
    n_tx, n_rx = nprob.n_tx, nprob.n_rx
    rng_rx = np.arange(n_rx)
    sig = nprob.sigma2
    wcot = np.zeros_like(record.iterates[-1])
    for r in range(len(record.iterates) - 1, -1, -1):
        if cots[r] is not None:
            wcot = wcot + cots[r] * scale_w[:, None, None]
        if not np.all(np.isfinite(wcot)):
            raise NumericalFailureError(f"non-finite cotangent at iteration {r + 1}")
        c = record.caches[r]
        if c["oracle"]:
            raise InvalidArgumentError("cannot differentiate an oracle-coefficient run")
        if c["rotate"]:
            hatcot = _rotate_backward(wcot, c["w_hat"], c["t"], c["mag"], c["unit"], own_ref)
        else:
            hatcot = wcot.copy()
        tilcot = hatcot.copy()
        for j in range(n_tx):
            if c["active"][j]:
                n_j = c["norms"][j]
                scale = 1.0 / n_j            # unit per-BS budgets
                inner = float(np.sum(hatcot[j].conj() * c["w_tilde"][j]).real)
                tilcot[j] = scale * (hatcot[j] - (inner / n_j ** 2) * c["w_tilde"][j])
        wcot = tilcot.copy()
        scot = np.sum(tilcot.conj() * c["direction"], axis=2).real
        dcot = c["step"][:, :, None] * tilcot
        acot = np.einsum("jpkr,jkr->jpk", nprob.chan.conj(), dcot) / c["chan_norm"]
        bcot = np.einsum("jpkr,jkr->jpk", nprob.chan, dcot) / c["chan_norm"]
        perm = c["perm"]
        a_scot = np.empty((n_tx, n_rx, n_rx))
        slotcot = np.empty((n_tx, n_rx, n_rx, 4))
        for k in range(n_rx):
            slotcot[:, k, :, 0] = acot[:, perm[k], k].real
            slotcot[:, k, :, 1] = acot[:, perm[k], k].imag
            slotcot[:, k, :, 2] = bcot[:, perm[k], k].real
            slotcot[:, k, :, 3] = bcot[:, perm[k], k].imag
        ocot = np.zeros_like(c["out"])
        ocot[:, :, :-1] = slotcot.reshape(n_tx, n_rx, -1)
        if not c["fixed_step"]:
            ocot[:, :, -1] = scot * _sigmoid(c["out"][:, :, -1])
        featcot = _mlp_backward(ocot.reshape(n_tx * n_rx, -1), c["mlp"], params, grads_w, grads_b)
        featcot = featcot.reshape(n_tx, n_rx, n_rx, 4)
        # undo the per-block slot permutation back to receiver order p
        fcot_own = np.empty((n_tx, n_rx, n_rx))   # [j, p, k]
        fcot_oth = np.empty((n_tx, n_rx, n_rx))
        dcotD = np.zeros(n_rx)
        icotI = np.zeros(n_rx)
        for k in range(n_rx):
            fcot_own[:, perm[k], k] = featcot[:, k, :, 0]
            fcot_oth[:, perm[k], k] = featcot[:, k, :, 1]
            np.add.at(dcotD, perm[k], featcot[:, k, :, 2].sum(axis=0))
            np.add.at(icotI, perm[k], featcot[:, k, :, 3].sum(axis=0))
        own_p = np.abs(c["y"]) ** 2
        oth_p = np.abs(c["z"]) ** 2
        ycot = 2.0 * (fcot_own / ((own_p + sig[None, :, None]) * LN10)) * c["y"]
        zcot = 2.0 * (fcot_oth / ((oth_p + sig[None, :, None]) * LN10)) * c["z"]
        fcot = zcot.sum(axis=0)                   # z = F - y
        ycot -= zcot
        fcot[rng_rx, rng_rx] += 2.0 * dcotD / ((c["d_raw"] + sig) * LN10) * np.diagonal(c["f"])
        off = ~np.eye(n_rx, dtype=bool)
        iscale = 2.0 * icotI / ((c["i_raw"] + sig) * LN10)
        fcot += np.where(off, iscale[:, None] * c["f"], 0.0)
        ycot += fcot[None, :, :]
        wcot += np.einsum("jpkr,jpk->jkr", nprob.chan, ycot)
    return wcot


def backward(problem, params: MlpParams, config: RnnPgpConfig, loss_kind,
             labels=None, init=None, gamma=0.95):
    """Loss and exact parameter gradient for one instance.

    Returns (loss, grad) with grad flattened in `MlpParams.flatten` order.
    """
    instance = TrainInstance(problem=problem, init=init, label=labels)
    coop = isinstance(problem, W.CoopProblem)
    fwd = forward_coop if coop else forward_ic
    record = fwd(problem, params, config, init, with_cache=True)
    cots = _loss_cotangents(record, instance, loss_kind, gamma)
    grads_w = [np.zeros_like(w) for w in params.weights]
    grads_b = [np.zeros_like(b) for b in params.biases]
    if coop:
        _backward_coop(problem, params, config, record, cots, grads_w, grads_b)
    else:
        _backward_ic(problem, params, config, record, cots, grads_w, grads_b)
    loss = _sample_loss(record, instance, loss_kind, gamma)
    flat = np.concatenate([np.concatenate([gw.reshape(-1), gb]) for gw, gb in zip(grads_w, grads_b)])
    return loss, flat


def adam_step(flat_params, grad, state: AdamState, hyper=(1e-3, 0.9, 0.999, 1e-8)):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    lr, beta1, beta2, eps = hyper
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad ** 2
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    new_params = flat_params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(m=m, v=v, t=t)


# ---------------------------------------------------------------------------
# Hybrid two-stage training
# ---------------------------------------------------------------------------

def _batch_gradient(instances, params, config, loss_kind, gamma):
    loss_sum = 0.0
    grad_sum = None
    for inst in instances:
        loss, grad = backward(inst.problem, params, config, loss_kind,
                              labels=inst.label, init=inst.init, gamma=gamma)
        loss_sum += loss
        grad_sum = grad if grad_sum is None else grad_sum + grad
    n = len(instances)
    return loss_sum / n, grad_sum / n


def _validation_accuracy(instances, params, config, baseline_wsrs):
    coop = config.scenario == "coop"
    fwd = forward_coop if coop else forward_ic
    total = 0.0
    for inst in instances:
        record = fwd(inst.problem, params, config, inst.init)
        total += record.wsr[-1]
    return 100.0 * total / float(np.sum(baseline_wsrs))


def train_hybrid(instances, config: TrainConfig, rnn_config: RnnPgpConfig, *,
                 init_params: MlpParams = None, val_instances=None, val_baseline=None,
                 progress=None):
    """Two-stage training: label matching first, then direct rate ascent.

    Stage 1 minimizes `supervised_loss` against the stored solver labels for
    ``stage1_epochs``; stage 2 continues from those weights minimizing
    `unsupervised_loss`. Fully deterministic given ``config.seed``.
    """
    if config.stage1_epochs > 0 and any(inst.label is None for inst in instances):
        raise InvalidArgumentError("stage 1 requires labels on every training instance")
    params = init_params or MlpParams.glorot(rnn_config.layer_sizes, config.seed)
    flat = params.flatten()
    state = AdamState.zeros(flat.size)
    rng = np.random.default_rng(np.random.SeedSequence((0x1E, config.seed)))
    run = TrainRun(seed=config.seed, stage_boundaries=[])
    started = time.perf_counter()
    stages = [("supervised", config.stage1_epochs), ("unsupervised", config.stage2_epochs)]
    for stage_idx, (loss_kind, n_epochs) in enumerate(stages, start=1):
        run.stage_boundaries.append((stage_idx, loss_kind, len(run.batch_losses)))
        for epoch in range(n_epochs):
            order = rng.permutation(len(instances))
            for b0 in range(0, len(order), config.batch_size):
                batch = [instances[i] for i in order[b0: b0 + config.batch_size]]
                params = MlpParams.from_flat(rnn_config.layer_sizes, flat)
                loss, grad = _batch_gradient(batch, params, rnn_config, loss_kind, config.gamma)
                flat, state = adam_step(flat, grad, state, config.adam)
                run.batch_losses.append((stage_idx, epoch, b0 // config.batch_size, loss))
            if val_instances is not None:
                params = MlpParams.from_flat(rnn_config.layer_sizes, flat)
                acc = _validation_accuracy(val_instances, params, rnn_config, val_baseline)
                run.val_accuracy.append((stage_idx, epoch, acc))
                if progress:
                    progress(stage_idx, epoch, run.batch_losses[-1][-1], acc)
            elif progress:
                progress(stage_idx, epoch, run.batch_losses[-1][-1], None)
    run.wall_clock_s = time.perf_counter() - started
    run.adam_state = state
    params = MlpParams.from_flat(rnn_config.layer_sizes, flat)
    return params, run
