"""Rates, gradients, projections and phase rotation for WSR maximization.

Problems live in a per-BS linear space (antenna space or a reduced space).
Channel vectors and beamformers are stored zero-padded to a common trailing
dimension so every operation vectorizes across links; padded coordinates
never influence inner products because both factors are zero there.

Gradient convention: `gradient_ic`/`gradient_coop` return the ascent
direction d with R(w + t*d) = R(w) + t*||d||^2 + o(t), i.e. twice the
conjugate Wirtinger derivative of the log2-rate objective. Finite-difference
tests against Re/Im coordinates pin this convention.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

LN2 = float(np.log(2.0))


def _pad_stack(vectors, width=None):
    """Stack 1-D complex vectors into a zero-padded 2-D array."""
    width = width or max(len(v) for v in vectors)
    out = np.zeros((len(vectors), width), dtype=complex)
    for i, v in enumerate(vectors):
        out[i, : len(v)] = v
    return out


@dataclass
class IcProblem:
    """Interference-channel WSRM instance in some per-BS coordinate space.

    ``chan[j, k]`` is the channel of BS_j toward UE_k expressed in BS_j's
    beamformer coordinates, zero-padded beyond ``dims[j]``.
    """

    chan: np.ndarray           # (K, K, R) complex
    alpha: np.ndarray          # (K,)
    sigma2: np.ndarray         # (K,)
    power: np.ndarray          # (K,)
    dims: np.ndarray = field(default=None)  # (K,) true per-BS dimension

    def __post_init__(self):
        self.chan = np.asarray(self.chan, dtype=complex)
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.sigma2 = np.asarray(self.sigma2, dtype=float)
        self.power = np.asarray(self.power, dtype=float)
        if self.dims is None:
            self.dims = np.full(self.chan.shape[0], self.chan.shape[2], dtype=int)
        self.dims = np.asarray(self.dims, dtype=int)
        k = self.chan.shape[0]
        if self.chan.shape[1] != k:
            raise InvalidArgumentError("chan must be K x K x R")
        if not (len(self.alpha) == len(self.sigma2) == len(self.power) == len(self.dims) == k):
            raise InvalidArgumentError("inconsistent IcProblem field lengths")
        if np.any(self.sigma2 <= 0):
            raise InvalidArgumentError("noise powers must be positive")

    @property
    def n_links(self) -> int:
        return self.chan.shape[0]

    @property
    def width(self) -> int:
        return self.chan.shape[2]


@dataclass
class CoopProblem:
    """Cooperative-multicell WSRM instance.

    Beamformer (j, l) has its own coordinate space; ``chan[j, k, l]`` is the
    channel of BS_j toward UE_k expressed in the coordinates of beamformer
    (j, l). In antenna space all l-slices coincide. The extra index keeps the
    reduced problem exactly equivalent to the full one even though each
    (j, l) pair carries its own lifting basis.
    """

    chan: np.ndarray           # (K_t, K_r, K_r, R) complex
    alpha: np.ndarray          # (K_r,)
    sigma2: np.ndarray         # (K_r,)
    power: np.ndarray          # (K_t,) per-BS budgets
    dims: np.ndarray = field(default=None)  # (K_t, K_r) per-beamformer dimension

    def __post_init__(self):
        self.chan = np.asarray(self.chan, dtype=complex)
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.sigma2 = np.asarray(self.sigma2, dtype=float)
        self.power = np.asarray(self.power, dtype=float)
        n_tx, n_rx = self.chan.shape[0], self.chan.shape[1]
        if self.chan.shape[2] != n_rx:
            raise InvalidArgumentError("chan must be K_t x K_r x K_r x R")
        if self.dims is None:
            self.dims = np.full((n_tx, n_rx), self.chan.shape[3], dtype=int)
        self.dims = np.asarray(self.dims, dtype=int)
        if not (len(self.alpha) == len(self.sigma2) == n_rx and len(self.power) == n_tx):
            raise InvalidArgumentError("inconsistent CoopProblem field lengths")
        if np.any(self.sigma2 <= 0):
            raise InvalidArgumentError("noise powers must be positive")

    @property
    def n_tx(self) -> int:
        return self.chan.shape[0]

    @property
    def n_rx(self) -> int:
        return self.chan.shape[1]

    @property
    def width(self) -> int:
        return self.chan.shape[3]


# ---------------------------------------------------------------------------
# Interference channel
# ---------------------------------------------------------------------------

def inner_products(w: np.ndarray, problem: IcProblem) -> np.ndarray:
    """X[j, k] = g_jk^H w_j for all links."""
    return np.einsum("jkr,jr->jk", problem.chan.conj(), w)


def _signal_terms(w, problem):
    x = inner_products(w, problem)
    q = np.abs(x) ** 2
    total = q.sum(axis=0) + problem.sigma2        # sum_l |g_lk^H w_l|^2 + sigma_k^2
    own = np.diagonal(q).copy()
    return x, q, own, total


def sinr_all(w: np.ndarray, problem: IcProblem) -> np.ndarray:
    _, _, own, total = _signal_terms(w, problem)
    return own / (total - own)


def sinr(k: int, w: np.ndarray, problem: IcProblem) -> float:
    """SINR of link k: |g_kk^H w_k|^2 / (sum_{j != k} |g_jk^H w_j|^2 + sigma_k^2)."""
    return float(sinr_all(w, problem)[k])


def wsr(w: np.ndarray, problem: IcProblem) -> float:
    """Weighted sum rate sum_k alpha_k log2(1 + SINR_k), in bits."""
    return float(np.sum(problem.alpha * np.log2(1.0 + sinr_all(w, problem))))


def grad_coeffs_ic(w: np.ndarray, problem: IcProblem) -> np.ndarray:
    """Coefficients a[k, j] such that gradient_k = sum_j a[k, j] g_kj.

    a_kk   =  c * alpha_k * (g_kk^H w_k) / (sum_l |g_lk^H w_l|^2 + sigma_k^2)
    a_kj   = -c * alpha_j |g_jj^H w_j|^2 (g_kj^H w_k)
             / ((sum_l |g_lj^H w_l|^2 + sigma_j^2)(sum_{l!=j} |g_lj^H w_l|^2 + sigma_j^2))
    with c = 2/ln2 making the combination the exact ascent direction of the
    log2 objective (the published formulas omit the constant; any positive
    scale is absorbed by a step size, but tests need one fixed convention).
    """
    x, q, own, total = _signal_terms(w, problem)
    interf = total - own
    scale = 2.0 / LN2
    # Off-diagonal: a[k, j] uses UE_j's signal/interference and BS_k's leakage x[k, j].
    coeff = -scale * (problem.alpha * own / (total * interf))[None, :] * x
    k = problem.n_links
    diag = scale * problem.alpha * np.diagonal(x) / total
    coeff[np.arange(k), np.arange(k)] = diag
    return coeff


def gradient_ic(w: np.ndarray, problem: IcProblem) -> np.ndarray:
    """Ascent direction per link, stacked (K, R)."""
    a = grad_coeffs_ic(w, problem)
    return np.einsum("kj,kjr->kr", a, problem.chan)


# ---------------------------------------------------------------------------
# Cooperative multicell
# ---------------------------------------------------------------------------

def coherent_sums(w: np.ndarray, problem: CoopProblem) -> np.ndarray:
    """F[k, l] = sum_j g_jk^(l)H w_jl: signal at UE_k of the stream meant for UE_l."""
    return np.einsum("jklr,jlr->kl", problem.chan.conj(), w)


def sinr_coop_all(w: np.ndarray, problem: CoopProblem) -> np.ndarray:
    f = coherent_sums(w, problem)
    q = np.abs(f) ** 2
    own = np.diagonal(q).copy()
    total = q.sum(axis=1) + problem.sigma2
    return own / (total - own)


def sinr_coop(k: int, w: np.ndarray, problem: CoopProblem) -> float:
    return float(sinr_coop_all(w, problem)[k])


def wsr_coop(w: np.ndarray, problem: CoopProblem) -> float:
    return float(np.sum(problem.alpha * np.log2(1.0 + sinr_coop_all(w, problem))))


def grad_coeffs_coop(w: np.ndarray, problem: CoopProblem):
    """Coefficient tensors (a, b) with gradient_jk = sum_p (a[j,p,k] g_jp^(k) + b[j,p,k] conj(g_jp^(k))).

    The exact ascent direction of the coop objective has b = 0 and
    a[j, p, k] independent of j:

      a[., k, k] =  c * alpha_k F_kk / (sum_l |F_kl|^2 + sigma_k^2)
      a[., p, k] = -c * alpha_p |F_pp|^2 F_pk
                   / ((sum_l |F_pl|^2 + sigma_p^2)(sum_{l!=p} |F_pl|^2 + sigma_p^2)),  p != k

    with c = 2/ln2 and F from `coherent_sums`. The conjugate-channel slots are
    kept (all-zero here) because the learned network predicts both families.
    """
    f = coherent_sums(w, problem)
    q = np.abs(f) ** 2
    own = np.diagonal(q).copy()
    total = q.sum(axis=1) + problem.sigma2
    interf = total - own
    scale = 2.0 / LN2
    n_rx = problem.n_rx
    a_pk = -scale * (problem.alpha * own / (total * interf))[:, None] * f
    a_pk[np.arange(n_rx), np.arange(n_rx)] = scale * problem.alpha * np.diagonal(f) / total
    a = np.broadcast_to(a_pk, (problem.n_tx, n_rx, n_rx)).copy()
    b = np.zeros_like(a)
    return a, b


def gradient_coop(w: np.ndarray, problem: CoopProblem) -> np.ndarray:
    """Ascent direction per (BS, UE) beamformer, stacked (K_t, K_r, R)."""
    a, b = grad_coeffs_coop(w, problem)
    out = np.einsum("jpk,jpkr->jkr", a, problem.chan)
    if np.any(b):
        out += np.einsum("jpk,jpkr->jkr", b, problem.chan.conj())
    return out


# ---------------------------------------------------------------------------
# Projection and phase rotation
# ---------------------------------------------------------------------------

def project_ball(w_tilde: np.ndarray, power: float) -> np.ndarray:
    """Project one vector onto {w : ||w||^2 <= power}."""
    if power <= 0:
        raise InvalidArgumentError("power budget must be positive")
    ratio = np.linalg.norm(w_tilde) / np.sqrt(power)
    if ratio <= 1.0:
        return w_tilde.copy()
    return w_tilde / ratio


def project_ball_all(w_tilde: np.ndarray, power: np.ndarray) -> np.ndarray:
    """Row-wise `project_ball` for a stacked (K, R) array."""
    ratios = np.linalg.norm(w_tilde, axis=1) / np.sqrt(power)
    return w_tilde / np.maximum(ratios, 1.0)[:, None]


def project_coop(w_tilde_j: np.ndarray, power_j: float) -> np.ndarray:
    """Jointly scale one BS's (K_r, R) beamformers into its power budget."""
    if power_j <= 0:
        raise InvalidArgumentError("power budget must be positive")
    ratio = np.sqrt(np.sum(np.abs(w_tilde_j) ** 2) / power_j)
    if ratio <= 1.0:
        return w_tilde_j.copy()
    return w_tilde_j / ratio


def project_coop_all(w_tilde: np.ndarray, power: np.ndarray) -> np.ndarray:
    ratios = np.sqrt(np.sum(np.abs(w_tilde) ** 2, axis=(1, 2)) / power)
    return w_tilde / np.maximum(ratios, 1.0)[:, None, None]


def phase_rotate(w_hat: np.ndarray, g_ref: np.ndarray) -> np.ndarray:
    """Rotate w so the reference inner product g_ref^H w is real nonnegative.

    Uses the full-quadrant angle, so a negative-real inner product is flipped
    to positive. A zero inner product leaves the vector unchanged. The norm
    is unchanged.
    """
    t = np.vdot(g_ref, w_hat)
    mag = abs(t)
    if mag == 0.0:
        return w_hat.copy()
    return w_hat * (t.conjugate() / mag)


def rotate_all(w_hat: np.ndarray, refs: np.ndarray) -> np.ndarray:
    """Row-wise `phase_rotate` with refs[k] as reference for row k."""
    t = np.einsum("kr,kr->k", refs.conj(), w_hat)
    mag = np.abs(t)
    unit = np.where(mag > 0, t.conj() / np.where(mag > 0, mag, 1.0), 1.0)
    return w_hat * unit[:, None]


def is_feasible_ic(w: np.ndarray, problem: IcProblem, slack: float = 1e-9) -> bool:
    return bool(np.all(np.sum(np.abs(w) ** 2, axis=1) <= problem.power + slack))


def is_feasible_coop(w: np.ndarray, problem: CoopProblem, slack: float = 1e-9) -> bool:
    return bool(np.all(np.sum(np.abs(w) ** 2, axis=(1, 2)) <= problem.power + slack))
