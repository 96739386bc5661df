"""Iterative WSRM solvers on interference-channel and cooperative problems.

All solvers work on `IcProblem`/`CoopProblem` instances, so they run
unchanged in antenna space or in reduced coordinates.
"""

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, NumericalFailureError
from . import wsr as W

# Armijo backtracking constants shared by PGP and ICCD.
BACKTRACK_BETA = 0.5
BACKTRACK_C = 1e-4
BACKTRACK_S0 = 1.0
BACKTRACK_MIN_STEP = 1e-20

# Tight dual tolerance keeps the per-iteration WSR wobble below 1e-9 even
# on long plateau-crawling runs.
WMMSE_MU_TOL = 1e-12
WMMSE_MAX_BISECT = 200


@dataclass
class SolveTrace:
    """Per-iteration record of one solver run.

    ``wsr`` has length ``iterations + 1`` (the initial point is included);
    ``runtime_s`` holds cumulative wall-clock seconds after each iteration.
    """

    wsr: list
    runtime_s: list
    iterations: int
    reason: str
    beamformers: np.ndarray
    iterates: list = None
    inner_wsr: list = None

    @property
    def final_wsr(self) -> float:
        return self.wsr[-1]


def _real_inner(a, b) -> float:
    return float(np.sum(a.conj() * b).real)


def mrt_init(problem) -> np.ndarray:
    """Matched-filter initialization at full (per-BS) power."""
    if isinstance(problem, W.CoopProblem):
        n_tx, n_rx = problem.n_tx, problem.n_rx
        w = np.zeros((n_tx, n_rx, problem.width), dtype=complex)
        for j in range(n_tx):
            for k in range(n_rx):
                g = problem.chan[j, k, k]
                norm = np.linalg.norm(g)
                if norm == 0.0:
                    warnings.warn(f"zero own channel for beamformer ({j},{k}); leaving it zero")
                    continue
                w[j, k] = np.sqrt(problem.power[j] / n_rx) * g / norm
        return w
    w = np.zeros((problem.n_links, problem.width), dtype=complex)
    for k in range(problem.n_links):
        g = problem.chan[k, k]
        norm = np.linalg.norm(g)
        if norm == 0.0:
            warnings.warn(f"zero own channel for link {k}; leaving its beamformer zero")
            continue
        w[k] = np.sqrt(problem.power[k]) * g / norm
    return w


def _parse_step_rule(step_rule):
    if step_rule == "backtracking":
        return None
    step = float(step_rule)
    if step <= 0:
        raise InvalidArgumentError(f"step size must be positive, got {step}")
    return step


def pgp_solve(problem, init, iterations, step_rule="backtracking", *,
              s0=BACKTRACK_S0, record_iterates=False) -> SolveTrace:
    """Parallel gradient projection: simultaneous ascent step then projection.

    ``step_rule`` is either the string "backtracking" (Armijo along the
    projection arc, which makes the WSR non-decreasing) or a positive
    constant step size.
    """
    if iterations < 1:
        raise InvalidArgumentError("iterations must be >= 1")
    coop = isinstance(problem, W.CoopProblem)
    objective = W.wsr_coop if coop else W.wsr
    grad = W.gradient_coop if coop else W.gradient_ic
    project = W.project_coop_all if coop else W.project_ball_all
    const_step = _parse_step_rule(step_rule)

    w = np.array(init, dtype=complex)
    trace = [objective(w, problem)]
    iterates = [w.copy()] if record_iterates else None
    runtimes = []
    start = time.perf_counter()
    for _ in range(iterations):
        d = grad(w, problem)
        if const_step is not None:
            w = project(w + const_step * d, problem.power)
            trace.append(objective(w, problem))
        else:
            base = trace[-1]
            step = s0
            accepted = False
            while step >= BACKTRACK_MIN_STEP:
                cand = project(w + step * d, problem.power)
                val = objective(cand, problem)
                if val >= base + BACKTRACK_C * _real_inner(d, cand - w):
                    w, accepted = cand, True
                    trace.append(val)
                    break
                step *= BACKTRACK_BETA
            if not accepted:
                trace.append(base)   # no productive step: stay put
        runtimes.append(time.perf_counter() - start)
        if record_iterates:
            iterates.append(w.copy())
    return SolveTrace(wsr=trace, runtime_s=runtimes, iterations=iterations,
                      reason="budget", beamformers=w, iterates=iterates)


def iccd_solve(problem, init, iterations, step_rule="backtracking", *,
               s0=BACKTRACK_S0, record_iterates=False) -> SolveTrace:
    """Cyclic per-link gradient projection using the freshest other links."""
    if isinstance(problem, W.CoopProblem):
        raise InvalidArgumentError("iccd_solve handles interference-channel problems only")
    if iterations < 1:
        raise InvalidArgumentError("iterations must be >= 1")
    const_step = _parse_step_rule(step_rule)
    n = problem.n_links
    w = np.array(init, dtype=complex)
    trace = [W.wsr(w, problem)]
    inner = [trace[0]]
    iterates = [w.copy()] if record_iterates else None
    runtimes = []
    start = time.perf_counter()
    for _ in range(iterations):
        for k in range(n):
            d_k = W.gradient_ic(w, problem)[k]
            if const_step is not None:
                w[k] = W.project_ball(w[k] + const_step * d_k, problem.power[k])
                inner.append(W.wsr(w, problem))
                continue
            base = inner[-1]
            step = s0
            accepted = False
            while step >= BACKTRACK_MIN_STEP:
                cand_k = W.project_ball(w[k] + step * d_k, problem.power[k])
                cand = w.copy()
                cand[k] = cand_k
                val = W.wsr(cand, problem)
                if val >= base + BACKTRACK_C * _real_inner(d_k, cand_k - w[k]):
                    w, accepted = cand, True
                    inner.append(val)
                    break
                step *= BACKTRACK_BETA
            if not accepted:
                inner.append(base)
        trace.append(inner[-1])
        runtimes.append(time.perf_counter() - start)
        if record_iterates:
            iterates.append(w.copy())
    return SolveTrace(wsr=trace, runtime_s=runtimes, iterations=iterations,
                      reason="budget", beamformers=w, iterates=iterates, inner_wsr=inner)


def _wmmse_v_update(problem, coef, rhs_scale, k, mu_tol):
    """Solve (sum_j coef_j g_kj g_kj^H + mu I) w = rhs_scale * g_kk with the
    smallest mu >= 0 putting w inside the power ball.

    The dual search runs Newton's method on 1/sqrt(power(mu)), which is
    almost affine in mu (the trust-region secular equation trick), with a
    bisection bracket as safeguard.
    """
    rows = problem.chan[k]                       # (K, R), row j = g_kj
    a0 = rows.T @ (coef[:, None] * rows.conj())
    b = rhs_scale * problem.chan[k, k]
    lam, q = np.linalg.eigh(a0)
    lam = np.maximum(lam, 0.0)
    beta = q.conj().T @ b
    beta2 = np.abs(beta) ** 2
    p_k = problem.power[k]

    def power_at(mu):
        denom = lam + mu
        mask = denom > 0
        if np.any(~mask & (beta2 > 0)):
            return np.inf
        return float(np.sum(beta2[mask] / denom[mask] ** 2))

    if power_at(0.0) <= p_k:
        mu = 0.0
    else:
        hi = 1.0
        guard = 0
        while power_at(hi) >= p_k:
            hi *= 2.0
            guard += 1
            if guard > WMMSE_MAX_BISECT:
                raise NumericalFailureError(f"power bracket failed for link {k}")
        lo, mu = 0.0, hi
        converged = False
        for _ in range(WMMSE_MAX_BISECT):
            denom = lam + mu
            mask = denom > 0
            pw = float(np.sum(beta2[mask] / denom[mask] ** 2))
            if abs(pw - p_k) <= mu_tol * p_k and pw <= p_k * (1.0 + mu_tol):
                converged = True
                break
            if pw > p_k:
                lo = mu
            else:
                hi = mu
            # Newton step on g(mu) = power^{-1/2} - P^{-1/2}
            dpow = -2.0 * float(np.sum(beta2[mask] / denom[mask] ** 3))
            g_val = pw ** -0.5 - p_k ** -0.5
            g_der = -0.5 * pw ** -1.5 * dpow
            if g_der > 0:
                cand = mu - g_val / g_der
                if lo < cand < hi:
                    mu = cand
                    continue
            mu = 0.5 * (lo + hi)
        if not converged:
            raise NumericalFailureError(f"dual search failed to converge for link {k}")
    denom = lam + mu
    scaled = np.where(denom > 0, beta / np.where(denom > 0, denom, 1.0), 0.0)
    return q @ scaled


def wmmse_solve(problem, init, iterations, mu_tol=WMMSE_MU_TOL, *,
                rel_tol=None, record_iterates=False) -> SolveTrace:
    """Block-coordinate WMMSE with bisection for the power dual variable.

    Each outer iteration updates the receiver gains, the MSE weights and the
    beamformers once; the WSR sequence is non-decreasing. ``rel_tol`` stops
    early when the relative WSR improvement falls below it.
    """
    if isinstance(problem, W.CoopProblem):
        raise InvalidArgumentError("wmmse_solve handles interference-channel problems only")
    if iterations < 1:
        raise InvalidArgumentError("iterations must be >= 1")
    n = problem.n_links
    w = np.array(init, dtype=complex)
    trace = [W.wsr(w, problem)]
    iterates = [w.copy()] if record_iterates else None
    runtimes = []
    reason = "budget"
    start = time.perf_counter()
    done = 0
    for it in range(iterations):
        x = W.inner_products(w, problem)             # x[j, k] = g_jk^H w_j
        total = np.sum(np.abs(x) ** 2, axis=0) + problem.sigma2
        u = np.diagonal(x) / total
        mse = 1.0 - (u.conj() * np.diagonal(x)).real
        mse = np.maximum(mse, 1e-300)                # exact value is in (0, 1]
        omega = 1.0 / mse
        coef = problem.alpha * omega * np.abs(u) ** 2
        for k in range(n):
            w[k] = _wmmse_v_update(problem, coef, problem.alpha[k] * omega[k] * u[k], k, mu_tol)
        trace.append(W.wsr(w, problem))
        runtimes.append(time.perf_counter() - start)
        done = it + 1
        if record_iterates:
            iterates.append(w.copy())
        if rel_tol is not None and trace[-2] > 0:
            if (trace[-1] - trace[-2]) <= rel_tol * max(abs(trace[-2]), 1e-300):
                reason = "converged"
                break
    return SolveTrace(wsr=trace, runtime_s=runtimes, iterations=done,
                      reason=reason, beamformers=w, iterates=iterates)


def upper_oracle(problem, restarts, iterations, *, seed=0, mu_tol=WMMSE_MU_TOL) -> float:
    """Best WMMSE result over an MRT start plus random full-power restarts.

    Stands in for a global solver when generating reference values; it is a
    lower bound on the true optimum, not an upper bound.
    """
    if restarts < 1:
        raise InvalidArgumentError("restarts must be >= 1")
    best = wmmse_solve(problem, mrt_init(problem), iterations, mu_tol).final_wsr
    rng = np.random.default_rng(np.random.SeedSequence((0x0A, seed)))
    n, width = problem.n_links, problem.width
    for _ in range(restarts - 1):
        w0 = rng.normal(size=(n, width)) + 1j * rng.normal(size=(n, width))
        for k in range(n):
            w0[k, problem.dims[k]:] = 0.0
            w0[k] *= np.sqrt(problem.power[k]) / np.linalg.norm(w0[k])
        best = max(best, wmmse_solve(problem, w0, iterations, mu_tol).final_wsr)
    return best
