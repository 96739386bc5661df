"""Unfolded projected-gradient network with a shared coefficient-predicting MLP.

Each unrolled iteration mirrors one projected-gradient step: assemble local
signal/interference features per BS, run the shared MLP to predict gradient
coefficients and a step size, build the ascent direction in the span of the
channel vectors, step, project onto the power ball, and rotate the phase so
the own-channel inner product is real nonnegative.

Everything the hand-written reverse pass in `training` needs is cached per
iteration when ``with_cache=True``.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DatasetFormatError, InvalidArgumentError
from . import wsr as W

LN10 = float(np.log(10.0))

MODEL_FORMAT = "wsrbeam-model"
MODEL_VERSION = 1

# The unrolled pipeline runs in per-instance normalized units: per-BS power 1,
# noise power 1, channels scaled by sqrt(P_j)/sigma_k. SINRs (hence rates and
# the log-scaled features) are unchanged, while channel norms, predicted
# coefficients and step sizes become dimensionless O(1) quantities, so one
# trained network transfers across power/pathloss scales.
FEATURE_SCALING_TAG = "unit-power-noise/v2"


# ---------------------------------------------------------------------------
# Parameters and configuration
# ---------------------------------------------------------------------------

@dataclass
class MlpParams:
    """Dense tanh MLP weights; layer l maps sizes[l] -> sizes[l+1]."""

    layer_sizes: tuple
    weights: list               # per layer, (n_out, n_in)
    biases: list                # per layer, (n_out,)

    @classmethod
    def zeros(cls, layer_sizes):
        sizes = tuple(int(s) for s in layer_sizes)
        w = [np.zeros((sizes[i + 1], sizes[i])) for i in range(len(sizes) - 1)]
        b = [np.zeros(sizes[i + 1]) for i in range(len(sizes) - 1)]
        return cls(layer_sizes=sizes, weights=w, biases=b)

    @classmethod
    def glorot(cls, layer_sizes, seed, final_zero=True):
        """Glorot-uniform init; a zeroed output layer makes the untrained
        network start at the (rotated) initial beamformers."""
        sizes = tuple(int(s) for s in layer_sizes)
        rng = np.random.default_rng(np.random.SeedSequence((0x11, seed)))
        w, b = [], []
        for i in range(len(sizes) - 1):
            limit = np.sqrt(6.0 / (sizes[i] + sizes[i + 1]))
            w.append(rng.uniform(-limit, limit, size=(sizes[i + 1], sizes[i])))
            b.append(np.zeros(sizes[i + 1]))
        if final_zero:
            w[-1][:] = 0.0
        return cls(layer_sizes=sizes, weights=w, biases=b)

    def flatten(self) -> np.ndarray:
        parts = []
        for wl, bl in zip(self.weights, self.biases):
            parts.append(wl.reshape(-1))
            parts.append(bl)
        return np.concatenate(parts)

    @classmethod
    def from_flat(cls, layer_sizes, flat):
        sizes = tuple(int(s) for s in layer_sizes)
        flat = np.asarray(flat, dtype=float)
        w, b, pos = [], [], 0
        for i in range(len(sizes) - 1):
            n_out, n_in = sizes[i + 1], sizes[i]
            w.append(flat[pos: pos + n_out * n_in].reshape(n_out, n_in).copy())
            pos += n_out * n_in
            b.append(flat[pos: pos + n_out].copy())
            pos += n_out
        if pos != flat.size:
            raise InvalidArgumentError(f"expected {pos} parameters, got {flat.size}")
        return cls(layer_sizes=sizes, weights=w, biases=b)

    @property
    def size(self) -> int:
        return sum(wl.size + bl.size for wl, bl in zip(self.weights, self.biases))


@dataclass
class RnnPgpConfig:
    """Unroll depth, neighbor budget and MLP shape for the unfolded solver."""

    scenario: str = "ic"                  # "ic" | "coop"
    iterations: int = 20
    neighbors: int = 6                    # c; ignored for coop
    eta: float = 5.0
    hidden_sizes: tuple = (32, 21, 15)
    n_rx: int = None                      # coop input size anchor (K_r)
    step_size_only: bool = False
    step_activation: str = "softplus"
    feature_scaling: str = FEATURE_SCALING_TAG

    def __post_init__(self):
        if self.scenario not in ("ic", "coop"):
            raise InvalidArgumentError(f"unknown scenario {self.scenario!r}")
        if self.iterations < 1 or self.neighbors < 0 or self.eta <= 0:
            raise InvalidArgumentError("need iterations >= 1, neighbors >= 0, eta > 0")
        if self.scenario == "coop" and not self.n_rx:
            raise InvalidArgumentError("coop config requires n_rx")
        if self.scenario == "coop" and self.step_size_only:
            raise InvalidArgumentError("step-size-only mode is defined for the ic scenario")
        if self.step_activation != "softplus":
            raise InvalidArgumentError("only the softplus step activation is supported")
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)

    @property
    def layer_sizes(self) -> tuple:
        if self.scenario == "coop":
            return (4 * self.n_rx, *self.hidden_sizes, 4 * self.n_rx + 1)
        n_in = 4 * (self.neighbors + 1)
        n_out = 1 if self.step_size_only else 2 * (self.neighbors + 1) + 1
        return (n_in, *self.hidden_sizes, n_out)


@dataclass
class NeighborSets:
    """Strongest interferers toward each UE and strongest victims of each BS."""

    in_sets: list               # in_sets[k]: BSs whose signal at UE_k clears the threshold
    out_sets: list              # out_sets[k]: UEs that BS_k interferes with most


# ---------------------------------------------------------------------------
# Neighbor selection and features (interference channel)
# ---------------------------------------------------------------------------

def _ranked_subset(metric_row, qualify_row, budget):
    order = np.argsort(-metric_row, kind="stable")
    picked = [int(j) for j in order if qualify_row[j]]
    return picked[:budget]


def _neighbor_arrays(q, sigma2, eta, budget):
    """Qualified-and-ranked neighbor sets from the power matrix Q[j, k] = |g_jk^H w_j|^2."""
    n = q.shape[0]
    off = ~np.eye(n, dtype=bool)
    ratio = q / sigma2[None, :]               # [j, k]: signal of BS_j at UE_k over UE_k's noise
    qual = (ratio > eta) & off
    in_sets = [_ranked_subset(ratio[:, k], qual[:, k], budget) for k in range(n)]
    out_sets = [_ranked_subset(ratio[k, :], qual[k, :], budget) for k in range(n)]
    in_mask = np.zeros((n, n), dtype=bool)
    for k, members in enumerate(in_sets):
        in_mask[members, k] = True
    slots = np.zeros((n, budget + 1), dtype=int)
    slot_mask = np.zeros((n, budget + 1), dtype=bool)
    slots[:, 0] = np.arange(n)
    slot_mask[:, 0] = True
    for k, members in enumerate(out_sets):
        slots[k, 1: 1 + len(members)] = members
        slot_mask[k, 1: 1 + len(members)] = True
    return in_sets, out_sets, in_mask, slots, slot_mask


def neighbor_sets(w, problem: W.IcProblem, eta: float, budget: int) -> NeighborSets:
    """Thresholded, interference-ranked neighbor subsets (ties by lower index)."""
    q = np.abs(W.inner_products(w, problem)) ** 2
    in_sets, out_sets, *_ = _neighbor_arrays(q, problem.sigma2, eta, budget)
    return NeighborSets(in_sets=in_sets, out_sets=out_sets)


def _log_scale(x, sigma2):
    # log10(x + sigma^2) - log10(sigma^2): compresses the pathloss dynamic range
    return np.log10(x + sigma2) - np.log10(sigma2)


def _instance_scales(problem):
    own = problem.chan[np.arange(problem.n_links), np.arange(problem.n_links)]
    return np.sqrt(problem.power) * np.linalg.norm(own, axis=1)


def _assemble_ic(x, q, in_mask, slots, slot_mask, problem, xscale=None):
    """Per-BS feature matrix (K, 4(c+1)), slot-grouped [D, I, Re, Im].

    The feature values are invariant to the power/noise normalization: the
    log scaling divides by the noise power and the inner products divide by
    the own-channel scale.
    """
    n = problem.n_links
    d_raw = problem.alpha * np.diagonal(q)
    i_raw = np.sum(q * in_mask, axis=0) + problem.sigma2
    d_feat = _log_scale(d_raw, problem.sigma2)
    i_feat = _log_scale(i_raw, problem.sigma2)
    xs = x / (xscale if xscale is not None else _instance_scales(problem))[:, None]
    feat = np.zeros((n, slots.shape[1], 4))
    feat[:, :, 0] = d_feat[slots] * slot_mask
    feat[:, :, 1] = i_feat[slots] * slot_mask
    picked = xs[np.arange(n)[:, None], slots] * slot_mask
    feat[:, :, 2] = picked.real
    feat[:, :, 3] = picked.imag
    return feat.reshape(n, -1), d_raw, i_raw


def assemble_features(k, w, problem: W.IcProblem, sets: NeighborSets, budget: int) -> np.ndarray:
    """Feature vector of BS_k: own slot first, then its ranked victims."""
    x = W.inner_products(w, problem)
    q = np.abs(x) ** 2
    in_mask, slots, slot_mask = _sets_to_arrays(sets, problem.n_links, budget)
    feat, _, _ = _assemble_ic(x, q, in_mask, slots, slot_mask, problem)
    return feat[k]


def _sets_to_arrays(sets: NeighborSets, n, budget):
    in_mask = np.zeros((n, n), dtype=bool)
    for k, members in enumerate(sets.in_sets):
        in_mask[members, k] = True
    slots = np.zeros((n, budget + 1), dtype=int)
    slot_mask = np.zeros((n, budget + 1), dtype=bool)
    slots[:, 0] = np.arange(n)
    slot_mask[:, 0] = True
    for k, members in enumerate(sets.out_sets):
        slots[k, 1: 1 + len(members)] = members
        slot_mask[k, 1: 1 + len(members)] = True
    return in_mask, slots, slot_mask


# ---------------------------------------------------------------------------
# Shared MLP
# ---------------------------------------------------------------------------

def _mlp_apply(feat, params: MlpParams):
    """Batched forward pass; returns outputs plus the per-layer cache."""
    h = feat
    hidden = [h]
    pre = []
    n_layers = len(params.weights)
    for i, (wl, bl) in enumerate(zip(params.weights, params.biases)):
        z = h @ wl.T + bl
        pre.append(z)
        h = np.tanh(z) if i < n_layers - 1 else z
        hidden.append(h)
    return h, (hidden, pre)


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def mlp_forward(features: np.ndarray, params: MlpParams):
    """Single-vector inference: complex slot coefficients plus a positive step.

    The output layer packs Re/Im pairs per slot followed by one pre-softplus
    step logit.
    """
    features = np.asarray(features, dtype=float)
    if features.shape[-1] != params.layer_sizes[0]:
        raise InvalidArgumentError(
            f"feature length {features.shape[-1]} != input layer {params.layer_sizes[0]}")
    out, _ = _mlp_apply(features[None, :], params)
    out = out[0]
    n_slots = (params.layer_sizes[-1] - 1) // 2
    coeffs = out[0: 2 * n_slots: 2] + 1j * out[1: 2 * n_slots + 1: 2]
    step = float(_softplus(out[-1]))
    return coeffs, step


def build_direction(coeffs, k, sets: NeighborSets, problem: W.IcProblem) -> np.ndarray:
    """Ascent direction of BS_k: slot-weighted combination of its channels."""
    idx = [k] + list(sets.out_sets[k])
    d = np.zeros(problem.width, dtype=complex)
    for slot, j in enumerate(idx):
        d += coeffs[slot] * problem.chan[k, j]
    return d


# ---------------------------------------------------------------------------
# Unrolled forward pass (interference channel)
# ---------------------------------------------------------------------------

@dataclass
class ForwardRecord:
    """Outputs of an unrolled run: iterates w^1..w^T and the WSR trajectory.

    Iterates are reported in the instance's original units; caches and the
    ``norm`` block hold the normalized-unit quantities the reverse pass needs.
    """

    iterates: list
    wsr: list
    caches: list = field(default=None, repr=False)
    norm: dict = field(default=None, repr=False)

    @property
    def final(self):
        return self.iterates[-1]


def normalize_ic_units(problem: W.IcProblem):
    """Rewrite an instance in the pipeline's units: P_k = 1, sigma_k^2 = 1.

    Returns (normalized problem, scale) with original beamformers equal to
    scale[k] * normalized ones; SINRs and rates are identical for
    corresponding beamformers.
    """
    scale_w = np.sqrt(problem.power)
    sig = np.sqrt(problem.sigma2)
    nchan = problem.chan * (scale_w[:, None] / sig[None, :])[:, :, None]
    nprob = W.IcProblem(chan=nchan, alpha=problem.alpha,
                        sigma2=np.ones(problem.n_links), power=np.ones(problem.n_links),
                        dims=problem.dims)
    return nprob, scale_w


_normalize_ic = normalize_ic_units


def forward_ic(problem: W.IcProblem, params: MlpParams, config: RnnPgpConfig, init,
               *, with_cache=False, oracle_coeffs=False, fixed_step=None) -> ForwardRecord:
    """Run the unfolded solver on one instance.

    ``oracle_coeffs`` replaces the MLP coefficient outputs by the analytic
    gradient coefficients (the step still comes from the MLP unless
    ``fixed_step`` is given); this reproduces plain projected gradient ascent
    and anchors the unfolding against the classic solver. ``fixed_step`` is
    expressed in the instance's original units, exactly matching a constant
    step of `pgp_solve`.
    """
    n = problem.n_links
    budget = config.neighbors
    if not (config.step_size_only or oracle_coeffs) and n < budget + 1:
        raise InvalidArgumentError(f"instance has K={n} links; need K >= c+1 = {budget + 1}")
    if params.layer_sizes != config.layer_sizes:
        raise InvalidArgumentError("MlpParams shape does not match config")
    arange = np.arange(n)
    nprob, scale_w = _normalize_ic(problem)
    own_ref = nprob.chan[arange, arange]
    xscale = _instance_scales(nprob)
    w = np.asarray(init, dtype=complex) / scale_w[:, None]
    record = ForwardRecord(iterates=[], wsr=[W.wsr(w, nprob)],
                           caches=[] if with_cache else None,
                           norm={"problem": nprob, "scale_w": scale_w,
                                 "own_ref": own_ref, "xscale": xscale})
    step_fixed = None if fixed_step is None else float(fixed_step) / problem.power
    for _ in range(config.iterations):
        x = W.inner_products(w, nprob)
        q = np.abs(x) ** 2
        in_sets, out_sets, in_mask, slots, slot_mask = _neighbor_arrays(
            q, nprob.sigma2, config.eta, budget)
        feat, d_raw, i_raw = _assemble_ic(x, q, in_mask, slots, slot_mask, nprob, xscale)
        out, mlp_cache = _mlp_apply(feat, params)
        if config.step_size_only or oracle_coeffs:
            coeffs = None
            t3_norm = None
            direction = W.gradient_ic(w, nprob)
        else:
            n_slots = budget + 1
            t3 = nprob.chan[arange[:, None], slots]
            # raw outputs are per-unit-channel: dividing by the slot channel
            # norms keeps the learned values O(1) regardless of SNR
            t3_norm = np.maximum(np.linalg.norm(t3, axis=2), 1e-300)
            raw = (out[:, 0: 2 * n_slots: 2] + 1j * out[:, 1: 2 * n_slots + 1: 2])
            coeffs = raw * slot_mask / t3_norm
            direction = np.einsum("ki,kir->kr", coeffs, t3)
        if step_fixed is not None:
            step = step_fixed.copy()
        else:
            step = _softplus(out[:, -1])
        w_tilde = w + step[:, None] * direction
        norms = np.linalg.norm(w_tilde, axis=1)
        ratio = norms                      # unit budgets after normalization
        active = ratio > 1.0
        w_hat = w_tilde / np.maximum(ratio, 1.0)[:, None]
        t = np.einsum("kr,kr->k", own_ref.conj(), w_hat)
        mag = np.abs(t)
        unit = np.where(mag > 0, t.conj() / np.where(mag > 0, mag, 1.0), 1.0 + 0j)
        w_next = w_hat * unit[:, None]
        if with_cache:
            record.caches.append({
                "w_in": w, "x": x, "q": q, "in_mask": in_mask, "slots": slots,
                "slot_mask": slot_mask, "d_raw": d_raw, "i_raw": i_raw, "feat": feat,
                "mlp": mlp_cache, "out": out, "coeffs": coeffs, "t3_norm": t3_norm,
                "step": step, "direction": direction, "w_tilde": w_tilde, "norms": norms,
                "active": active, "w_hat": w_hat, "t": t, "mag": mag, "unit": unit,
                "fixed_step": fixed_step is not None,
            })
        w = w_next
        record.iterates.append(w * scale_w[:, None])
        record.wsr.append(W.wsr(w, nprob))
    return record


def rnn_pgp_forward(problem: W.IcProblem, params: MlpParams, config: RnnPgpConfig, init,
                    **kwargs):
    """Public entry point: returns (final beamformers, ForwardRecord)."""
    record = forward_ic(problem, params, config, init, **kwargs)
    return record.final, record


# ---------------------------------------------------------------------------
# Cooperative pipeline
# ---------------------------------------------------------------------------

def _coop_slot_order(n_rx):
    # own receiver first, everyone else in ascending order
    perm = np.empty((n_rx, n_rx), dtype=int)
    for k in range(n_rx):
        others = [p for p in range(n_rx) if p != k]
        perm[k] = [k] + others
    return perm


def coop_features(j, k, w, problem: W.CoopProblem) -> np.ndarray:
    """Feature vector of the (BS_j, UE_k) block, slot-grouped per receiver."""
    feat, *_ = _assemble_coop(w, problem)
    return feat[j, k]


def _assemble_coop(w, problem: W.CoopProblem):
    n_tx, n_rx = problem.n_tx, problem.n_rx
    y = np.einsum("jpkr,jkr->jpk", problem.chan.conj(), w)   # g_jp^(k)H w_jk
    f = y.sum(axis=0)                                        # F[p, l]
    z = f[None, :, :] - y                                    # coherent others
    d_raw = np.abs(np.diagonal(f)) ** 2
    i_raw = np.sum(np.abs(f) ** 2, axis=1) - d_raw + problem.sigma2
    own_p = np.abs(y) ** 2
    oth_p = np.abs(z) ** 2
    sig = problem.sigma2
    perm = _coop_slot_order(n_rx)
    feat = np.zeros((n_tx, n_rx, n_rx, 4))
    for k in range(n_rx):
        order = perm[k]
        feat[:, k, :, 0] = _log_scale(own_p[:, order, k], sig[order])
        feat[:, k, :, 1] = _log_scale(oth_p[:, order, k], sig[order])
        feat[:, k, :, 2] = _log_scale(d_raw[order], sig[order])[None, :]
        feat[:, k, :, 3] = _log_scale(i_raw[order], sig[order])[None, :]
    return feat.reshape(n_tx, n_rx, -1), y, f, z, d_raw, i_raw, perm


def normalize_coop_units(problem: W.CoopProblem):
    """Coop analogue of `normalize_ic_units` (per-BS budgets become 1)."""
    scale_w = np.sqrt(problem.power)              # per BS
    sig = np.sqrt(problem.sigma2)                 # per UE
    factor = (scale_w[:, None] / sig[None, :])[:, :, None, None]
    nchan = problem.chan * factor
    nprob = W.CoopProblem(chan=nchan, alpha=problem.alpha,
                          sigma2=np.ones(problem.n_rx), power=np.ones(problem.n_tx),
                          dims=problem.dims)
    return nprob, scale_w


_normalize_coop = normalize_coop_units


def forward_coop(problem: W.CoopProblem, params: MlpParams, config: RnnPgpConfig, init,
                 *, with_cache=False, oracle_coeffs=False, fixed_step=None,
                 rotate=True) -> ForwardRecord:
    """Unrolled forward pass for the cooperative network (no neighbor pruning).

    Unlike the interference channel, the per-(BS, UE) phase rotation is not a
    rate invariance here (only a common per-receiver phase is), so ``rotate``
    can be disabled to compare the remaining blocks against plain projected
    gradient ascent step for step. ``fixed_step`` is in original units.
    """
    n_tx, n_rx = problem.n_tx, problem.n_rx
    if config.n_rx != n_rx:
        raise InvalidArgumentError(f"model expects K_r={config.n_rx}, instance has {n_rx}")
    if params.layer_sizes != config.layer_sizes:
        raise InvalidArgumentError("MlpParams shape does not match config")
    nprob, scale_w = _normalize_coop(problem)
    own_ref = nprob.chan[:, np.arange(n_rx), np.arange(n_rx)]   # chan[j,k,k]
    w = np.asarray(init, dtype=complex) / scale_w[:, None, None]
    record = ForwardRecord(iterates=[], wsr=[W.wsr_coop(w, nprob)],
                           caches=[] if with_cache else None,
                           norm={"problem": nprob, "scale_w": scale_w, "own_ref": own_ref})
    step_fixed = None if fixed_step is None else float(fixed_step) / problem.power
    for _ in range(config.iterations):
        feat, y, f, z, d_raw, i_raw, perm = _assemble_coop(w, nprob)
        out, mlp_cache = _mlp_apply(feat.reshape(n_tx * n_rx, -1), params)
        out = out.reshape(n_tx, n_rx, -1)
        if oracle_coeffs:
            a_co, b_co = W.grad_coeffs_coop(w, nprob)
            chan_norm = None
            direction = np.einsum("jpk,jpkr->jkr", a_co, nprob.chan)
        else:
            slot = out[:, :, :-1].reshape(n_tx, n_rx, n_rx, 4)
            a_s = slot[..., 0] + 1j * slot[..., 1]
            b_s = slot[..., 2] + 1j * slot[..., 3]
            a_co = np.zeros((n_tx, n_rx, n_rx), dtype=complex)   # a_co[j, p, k]
            b_co = np.zeros_like(a_co)
            for k in range(n_rx):
                a_co[:, perm[k], k] = a_s[:, k, :]
                b_co[:, perm[k], k] = b_s[:, k, :]
            # per-unit-channel outputs, as in the interference pipeline
            chan_norm = np.maximum(np.linalg.norm(nprob.chan, axis=3), 1e-300)
            a_co = a_co / chan_norm
            b_co = b_co / chan_norm
            direction = (np.einsum("jpk,jpkr->jkr", a_co, nprob.chan)
                         + np.einsum("jpk,jpkr->jkr", b_co, nprob.chan.conj()))
        if step_fixed is not None:
            step = np.tile(step_fixed[:, None], (1, n_rx))
        else:
            step = _softplus(out[:, :, -1])
        w_tilde = w + step[:, :, None] * direction
        norms = np.sqrt(np.sum(np.abs(w_tilde) ** 2, axis=(1, 2)))
        ratio = norms                      # unit per-BS budgets after normalization
        active = ratio > 1.0
        w_hat = w_tilde / np.maximum(ratio, 1.0)[:, None, None]
        t = np.einsum("jkr,jkr->jk", own_ref.conj(), w_hat)
        mag = np.abs(t)
        if rotate:
            unit = np.where(mag > 0, t.conj() / np.where(mag > 0, mag, 1.0), 1.0 + 0j)
        else:
            unit = np.ones_like(t)
        w_next = w_hat * unit[:, :, None]
        if with_cache:
            record.caches.append({
                "w_in": w, "y": y, "f": f, "z": z, "d_raw": d_raw, "i_raw": i_raw,
                "feat": feat, "mlp": mlp_cache, "out": out, "a_co": a_co if not oracle_coeffs else None,
                "b_co": b_co if not oracle_coeffs else None, "chan_norm": chan_norm,
                "perm": perm, "step": step,
                "direction": direction, "w_tilde": w_tilde, "norms": norms, "active": active,
                "w_hat": w_hat, "t": t, "mag": mag, "unit": unit, "rotate": rotate,
                "fixed_step": fixed_step is not None, "oracle": oracle_coeffs,
            })
        w = w_next
        record.iterates.append(w * scale_w[:, None, None])
        record.wsr.append(W.wsr_coop(w, nprob))
    return record


def coop_rnn_pgp_forward(problem: W.CoopProblem, params: MlpParams, config: RnnPgpConfig,
                         init, **kwargs):
    record = forward_coop(problem, params, config, init, **kwargs)
    return record.final, record


# ---------------------------------------------------------------------------
# Model files: one JSON header line, one JSON line of flat float64 parameters
# ---------------------------------------------------------------------------

def save_model(path, params: MlpParams, config: RnnPgpConfig, extra=None):
    header = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "scenario": config.scenario,
        "layer_sizes": list(params.layer_sizes),
        "hidden_sizes": list(config.hidden_sizes),
        "neighbors": config.neighbors,
        "n_rx": config.n_rx,
        "eta": config.eta,
        "iterations": config.iterations,
        "step_activation": config.step_activation,
        "feature_scaling": config.feature_scaling,
        "step_size_only": config.step_size_only,
        "param_count": int(params.size),
    }
    if extra:
        header["extra"] = extra
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        fh.write(json.dumps(params.flatten().tolist()) + "\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        body_line = fh.readline()
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"malformed model header: {exc}") from exc
    if header.get("format") != MODEL_FORMAT:
        raise DatasetFormatError("not a model file")
    if header.get("feature_scaling") != FEATURE_SCALING_TAG:
        raise DatasetFormatError(f"unsupported feature scaling {header.get('feature_scaling')!r}")
    try:
        flat = np.asarray(json.loads(body_line), dtype=float)
    except (json.JSONDecodeError, ValueError) as exc:
        raise DatasetFormatError(f"malformed model parameters: {exc}", record_index=0) from exc
    if flat.size != header["param_count"]:
        raise DatasetFormatError(
            f"parameter count mismatch: header says {header['param_count']}, file has {flat.size}",
            record_index=0)
    config = RnnPgpConfig(
        scenario=header["scenario"],
        iterations=header["iterations"],
        neighbors=header["neighbors"] if header["neighbors"] is not None else 0,
        eta=header["eta"],
        hidden_sizes=tuple(header["hidden_sizes"]),
        n_rx=header["n_rx"],
        step_size_only=header["step_size_only"],
        step_activation=header["step_activation"],
        feature_scaling=header["feature_scaling"],
    )
    params = MlpParams.from_flat(config.layer_sizes, flat)
    return params, config, header.get("extra")
