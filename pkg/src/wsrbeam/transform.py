"""Dimension reduction between antenna space and per-BS beamformer spaces.

Optimal beamformers lie in the span of each BS's channel vectors, so the
WSRM problem can be rewritten over coordinates of that span: the problem
size becomes independent of the antenna count. `reduce_ic` performs the
transform for the interference channel, `reduce_coop` for the cooperative
multicell problem, and the `lift_*` functions map reduced beamformers back
to antenna space through the stored orthonormal bases.
"""

from dataclasses import dataclass

import numpy as np

from .channels import ChannelSample, CoopChannelSample
from .errors import DegenerateInputError, InvalidArgumentError
from .wsr import CoopProblem, IcProblem

# Eigenvalues below EIG_FLOOR_REL * lambda_max are treated as numerically
# zero and their directions dropped from the basis; inverting them would
# blow up the lift.
EIG_FLOOR_REL = 1e-12

HERM_TOL = 1e-10


def herm_eig(a: np.ndarray):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Returns (u, lam) with a = u @ diag(lam) @ u^H. Rejects inputs whose
    anti-Hermitian part exceeds 1e-10 relative.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidArgumentError("herm_eig expects a square matrix")
    scale = np.linalg.norm(a)
    if np.linalg.norm(a - a.conj().T) > HERM_TOL * max(scale, 1e-300):
        raise InvalidArgumentError("matrix is not Hermitian within tolerance")
    lam, u = np.linalg.eigh(a)
    return u[:, ::-1].copy(), lam[::-1].copy()


def _span_basis(h_mat: np.ndarray, label: str):
    """Orthonormal basis B = H U L^{-1/2} of span(H), dropping floored modes.

    Returns (basis, floored): basis is (n, r) with orthonormal columns,
    floored says whether any direction was dropped relative to the column
    count.
    """
    n_cols = h_mat.shape[1]
    gram = h_mat.conj().T @ h_mat
    u, lam = herm_eig(gram)
    if lam[0] <= 0.0:
        raise DegenerateInputError(f"all channel columns are zero for {label}")
    keep = lam > EIG_FLOOR_REL * lam[0]
    r = int(np.count_nonzero(keep))
    basis = h_mat @ (u[:, :r] / np.sqrt(lam[:r]))
    return basis, r < n_cols


@dataclass
class ReducedProblem:
    """Reduced interference-channel problem plus the per-BS lifting bases."""

    problem: IcProblem         # reduced channels g_jk = B_j^H h_jk, padded
    basis: list                # basis[j]: (nt_j, r_j) with orthonormal columns
    floored: np.ndarray        # (K,) bool, True where modes were dropped
    nt: tuple

    @property
    def n_links(self) -> int:
        return self.problem.n_links

    @property
    def dims(self) -> np.ndarray:
        return self.problem.dims


@dataclass
class CoopReducedProblem:
    """Reduced cooperative problem plus per-(BS, UE) lifting bases."""

    problem: CoopProblem
    basis: list                # basis[j][k]: (nt_j, r_jk)
    floored: np.ndarray        # (K_t, K_r) bool
    projector_skipped: list    # (j, k, l) triples where a zero h_jl made the projector trivial
    nt: tuple

    @property
    def dims(self) -> np.ndarray:
        return self.problem.dims


def reduce_ic(sample: ChannelSample) -> ReducedProblem:
    """Reduce an interference channel to per-BS channel-span coordinates."""
    k = sample.n_links
    for j in range(k):
        for kk in range(k):
            if not np.any(sample.chan[j][kk]):
                raise DegenerateInputError(f"all-zero channel for BS {j} -> UE {kk}")
    bases = []
    floored = np.zeros(k, dtype=bool)
    for j in range(k):
        h_mat = np.stack(sample.chan[j], axis=1)          # [h_j1 ... h_jK]
        basis, fl = _span_basis(h_mat, f"BS {j}")
        bases.append(basis)
        floored[j] = fl
    dims = np.array([b.shape[1] for b in bases])
    width = int(dims.max())
    chan = np.zeros((k, k, width), dtype=complex)
    for j in range(k):
        h_mat = np.stack(sample.chan[j], axis=1)
        chan[j, :, : dims[j]] = (bases[j].conj().T @ h_mat).T   # row kk: g_j,kk
    problem = IcProblem(chan=chan, alpha=sample.alpha, sigma2=sample.sigma2,
                        power=sample.power, dims=dims)
    return ReducedProblem(problem=problem, basis=bases, floored=floored, nt=sample.nt)


def lift_ic(reduced: ReducedProblem, w: np.ndarray) -> list:
    """Map reduced beamformers (K, R) back to antenna space, one vector per BS."""
    k = reduced.n_links
    w = np.asarray(w)
    if w.shape[0] != k or w.shape[1] < reduced.dims.max():
        raise InvalidArgumentError("beamformer array does not match reduced dimensions")
    out = []
    for j in range(k):
        r = reduced.dims[j]
        if np.any(w[j, r:]):
            raise InvalidArgumentError(f"beamformer {j} has energy outside its {r}-dim space")
        out.append(reduced.basis[j] @ w[j, :r])
    return out


def reduce_coop(sample: CoopChannelSample) -> CoopReducedProblem:
    """Reduce a cooperative problem to per-(BS, UE) projected-span coordinates.

    For each pair (j, k) the basis spans {h_jk} together with the projections
    of h_jk onto the orthogonal complements of the other users' channels
    (own channel placed at column k). Channels are additionally expressed in
    every sibling basis of the same BS so rates computed in reduced
    coordinates match antenna space exactly.
    """
    n_tx, n_rx = sample.n_tx, sample.n_rx
    for j in range(n_tx):
        for k in range(n_rx):
            if not np.any(sample.chan[j][k]):
                raise DegenerateInputError(f"all-zero channel for BS {j} -> UE {k}")
    bases = [[None] * n_rx for _ in range(n_tx)]
    floored = np.zeros((n_tx, n_rx), dtype=bool)
    skipped = []
    for j in range(n_tx):
        for k in range(n_rx):
            cols = []
            own = sample.chan[j][k]
            for l in range(n_rx):
                if l == k:
                    cols.append(own)
                    continue
                h_l = sample.chan[j][l]
                denom = np.vdot(h_l, h_l).real
                if denom == 0.0:
                    skipped.append((j, k, l))
                    cols.append(own.copy())
                else:
                    cols.append(own - h_l * (np.vdot(h_l, own) / denom))
            h_mat = np.stack(cols, axis=1)
            basis, fl = _span_basis(h_mat, f"BS {j} / UE {k}")
            bases[j][k] = basis
            floored[j, k] = fl
    dims = np.array([[bases[j][k].shape[1] for k in range(n_rx)] for j in range(n_tx)])
    width = int(dims.max())
    chan = np.zeros((n_tx, n_rx, n_rx, width), dtype=complex)
    for j in range(n_tx):
        h_mat = np.stack(sample.chan[j], axis=1)          # (nt_j, K_r), column k = h_jk
        for l in range(n_rx):
            r = dims[j, l]
            chan[j, :, l, :r] = (bases[j][l].conj().T @ h_mat).T   # row k: h_jk in basis (j, l)
    problem = CoopProblem(chan=chan, alpha=sample.alpha, sigma2=sample.sigma2,
                          power=sample.power, dims=dims)
    return CoopReducedProblem(problem=problem, basis=bases, floored=floored,
                              projector_skipped=skipped, nt=sample.nt)


def lift_coop(reduced: CoopReducedProblem, w: np.ndarray) -> list:
    """Map reduced coop beamformers (K_t, K_r, R) back to antenna space."""
    n_tx = len(reduced.basis)
    n_rx = len(reduced.basis[0])
    w = np.asarray(w)
    if w.shape[0] != n_tx or w.shape[1] != n_rx or w.shape[2] < reduced.dims.max():
        raise InvalidArgumentError("beamformer array does not match reduced dimensions")
    out = []
    for j in range(n_tx):
        row = []
        for k in range(n_rx):
            r = reduced.dims[j, k]
            if np.any(w[j, k, r:]):
                raise InvalidArgumentError(f"beamformer ({j},{k}) has energy outside its {r}-dim space")
            row.append(reduced.basis[j][k] @ w[j, k, :r])
        out.append(row)
    return out


def full_problem(sample: ChannelSample) -> IcProblem:
    """View a channel sample as an antenna-space problem (no reduction)."""
    k = sample.n_links
    width = max(sample.nt)
    chan = np.zeros((k, k, width), dtype=complex)
    for j in range(k):
        for kk in range(k):
            chan[j, kk, : sample.nt[j]] = sample.chan[j][kk]
    return IcProblem(chan=chan, alpha=sample.alpha, sigma2=sample.sigma2,
                     power=sample.power, dims=np.array(sample.nt))


def full_coop_problem(sample: CoopChannelSample) -> CoopProblem:
    n_tx, n_rx = sample.n_tx, sample.n_rx
    width = max(sample.nt)
    chan = np.zeros((n_tx, n_rx, n_rx, width), dtype=complex)
    for j in range(n_tx):
        for k in range(n_rx):
            chan[j, k, :, : sample.nt[j]] = sample.chan[j][k]   # same vector in every basis slot
    dims = np.tile(np.array(sample.nt)[:, None], (1, n_rx))
    return CoopProblem(chan=chan, alpha=sample.alpha, sigma2=sample.sigma2,
                       power=sample.power, dims=dims)
