import numpy as np
import pytest

from wsrbeam import wsr as W
from wsrbeam.errors import InvalidArgumentError

from _oracles import (
    fd_gradient,
    random_coop_problem,
    random_feasible_coop,
    random_feasible_ic,
    random_ic_problem,
    rel_err,
)


def _single_link(g=1.0, sigma2=1.0, power=4.0, alpha=1.0):
    return W.IcProblem(chan=np.array([[[g + 0j]]]), alpha=[alpha], sigma2=[sigma2], power=[power])


def test_sinr_single_link():
    p = _single_link(g=1.0, sigma2=1.0)
    w = np.array([[2.0 + 0j]])
    assert W.sinr(0, w, p) == pytest.approx(4.0, rel=1e-15)


def test_sinr_zero_beamformers():
    rng = np.random.default_rng(0)
    p = random_ic_problem(rng, 3)
    w = np.zeros((3, 3), dtype=complex)
    assert np.allclose(W.sinr_all(w, p), 0.0)


def test_wsr_single_link_closed_form():
    power = 10.0 ** 0.8
    p = _single_link(g=1.0, sigma2=1.0, power=power)
    w = np.array([[np.sqrt(power) + 0j]])   # matched filter at full power
    assert W.wsr(w, p) == pytest.approx(np.log2(1.0 + power), rel=1e-12)
    assert W.wsr(w, p) == pytest.approx(2.8698, abs=1e-4)


def test_wsr_zero_and_alpha_linearity():
    rng = np.random.default_rng(1)
    p = random_ic_problem(rng, 3)
    w = random_feasible_ic(rng, p)
    assert W.wsr(np.zeros_like(w), p) == 0.0
    scaled = W.IcProblem(chan=p.chan, alpha=3.0 * p.alpha, sigma2=p.sigma2, power=p.power, dims=p.dims)
    assert W.wsr(w, scaled) == pytest.approx(3.0 * W.wsr(w, p), rel=1e-14)


def test_grad_coeffs_zero_point():
    rng = np.random.default_rng(2)
    p = random_ic_problem(rng, 3)
    a = W.grad_coeffs_ic(np.zeros((3, 3), dtype=complex), p)
    assert np.allclose(a, 0.0)
    assert np.allclose(W.gradient_ic(np.zeros((3, 3), dtype=complex), p), 0.0)


def test_grad_coeffs_single_link_shape_and_fd():
    p = _single_link(g=1.3, sigma2=0.7, power=4.0, alpha=1.1)
    w = np.array([[0.4 - 0.2j]])
    a = W.grad_coeffs_ic(w, p)
    x = 1.3 * w[0, 0]
    expected = (2.0 / np.log(2.0)) * 1.1 * x / (abs(x) ** 2 + 0.7)
    assert a[0, 0] == pytest.approx(expected, rel=1e-12)
    fd = fd_gradient(lambda v: W.wsr(v, p), w)
    assert rel_err(W.gradient_ic(w, p), fd) < 1e-6


def test_interference_coefficients_point_against_leakage():
    rng = np.random.default_rng(3)
    p = random_ic_problem(rng, 3)
    w = random_feasible_ic(rng, p)
    a = W.grad_coeffs_ic(w, p)
    x = W.inner_products(w, p)
    for k in range(3):
        for j in range(3):
            if j != k:
                # moving along the out-going leakage direction reduces rate j
                assert np.real(a[k, j] * np.conj(x[k, j])) <= 1e-15


def test_gradient_single_link_interior_points_along_channel():
    rng = np.random.default_rng(4)
    g = rng.normal(size=3) + 1j * rng.normal(size=3)
    p = W.IcProblem(chan=g.reshape(1, 1, 3), alpha=[1.0], sigma2=[1.0], power=[4.0])
    w = (0.5 * np.sqrt(4.0) * g / np.linalg.norm(g)).reshape(1, 3)
    d = W.gradient_ic(w, p)
    cross = np.vdot(d[0], g)
    assert abs(cross) == pytest.approx(np.linalg.norm(d[0]) * np.linalg.norm(g), rel=1e-10)
    assert np.real(np.vdot(d[0], w[0])) > 0


def test_gradient_matches_fd_random_instances():
    rng = np.random.default_rng(5)
    for trial in range(20):
        k = int(rng.integers(2, 5))
        p = random_ic_problem(rng, k)
        w = random_feasible_ic(rng, p)
        fd = fd_gradient(lambda v: W.wsr(v, p), w)
        assert rel_err(W.gradient_ic(w, p), fd) < 1e-6


def test_gradient_ascent_property():
    rng = np.random.default_rng(6)
    p = random_ic_problem(rng, 3)
    w = random_feasible_ic(rng, p, fill=0.5)
    d = W.gradient_ic(w, p)
    base = W.wsr(w, p)
    t = 1e-4
    gain = W.wsr(w + t * d, p) - base
    assert gain == pytest.approx(t * np.sum(np.abs(d) ** 2), rel=1e-3)


def test_gradient_coop_zero_and_single_pair():
    rng = np.random.default_rng(7)
    cp = random_coop_problem(rng, 1, 1, dim=3)
    assert np.allclose(W.gradient_coop(np.zeros((1, 1, 3), dtype=complex), cp), 0.0)
    # K_t = K_r = 1 must agree with the IC gradient of the same link
    ip = W.IcProblem(chan=cp.chan[:, :, 0, :], alpha=cp.alpha, sigma2=cp.sigma2, power=cp.power)
    w = random_feasible_coop(rng, cp)
    g_coop = W.gradient_coop(w, cp)
    g_ic = W.gradient_ic(w[:, 0, :], ip)
    assert np.allclose(g_coop[:, 0, :], g_ic, rtol=1e-12)


def test_gradient_coop_matches_fd():
    rng = np.random.default_rng(8)
    for trial in range(10):
        n_tx = int(rng.integers(1, 4))
        n_rx = int(rng.integers(1, 4))
        cp = random_coop_problem(rng, n_tx, n_rx)
        w = random_feasible_coop(rng, cp)
        fd = fd_gradient(lambda v: W.wsr_coop(v, cp), w)
        assert rel_err(W.gradient_coop(w, cp), fd) < 1e-6


def test_project_ball_cases():
    w = np.array([2.0 + 0j, 0.0])
    out = W.project_ball(w, 1.0)
    assert np.allclose(out, [1.0, 0.0])
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=0)
    small = np.array([0.3 + 0.4j])
    assert np.array_equal(W.project_ball(small, 1.0), small)
    assert np.allclose(W.project_ball(np.zeros(2, dtype=complex), 1.0), 0.0)
    with pytest.raises(InvalidArgumentError):
        W.project_ball(w, 0.0)


def test_project_ball_idempotent_nonexpansive():
    rng = np.random.default_rng(9)
    for _ in range(50):
        x = rng.normal(size=4) + 1j * rng.normal(size=4)
        y = rng.normal(size=4) + 1j * rng.normal(size=4)
        px, py = W.project_ball(x, 2.0), W.project_ball(y, 2.0)
        assert np.allclose(W.project_ball(px, 2.0), px, rtol=1e-14, atol=1e-14)
        assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-12


def test_project_coop_joint_scaling():
    rng = np.random.default_rng(10)
    w = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
    total = np.sum(np.abs(w) ** 2)
    out = W.project_coop(w, total / 4.0)   # budget = total/4 -> scale by 1/2
    assert np.allclose(out, w / 2.0, rtol=1e-14)
    keep = W.project_coop(w, 4.0 * total)
    assert np.array_equal(keep, w)
    # uniform scaling: pairwise ratios preserved exactly
    ratio = out[0, 0] / out[1, 1]
    assert ratio == pytest.approx(w[0, 0] / w[1, 1], rel=1e-14)


def test_phase_rotate_quarter_turn():
    g = np.array([1.0 + 0j])
    w = np.array([1j])
    out = W.phase_rotate(w, g)
    assert np.vdot(g, out) == pytest.approx(1.0, rel=1e-15)
    assert np.linalg.norm(out) == pytest.approx(1.0, rel=1e-15)


def test_phase_rotate_identity_and_flip():
    g = np.array([1.0 + 0j, 2.0 + 0j])
    w = np.array([0.5 + 0j, 0.25 + 0j])
    assert np.allclose(W.phase_rotate(w, g), w, rtol=1e-15)
    out = W.phase_rotate(-w, g)
    assert np.vdot(g, out).real > 0
    assert abs(np.vdot(g, out).imag) < 1e-15
    z = np.array([0.7 - 0.2j, 0.1 + 0.9j])
    assert np.array_equal(W.phase_rotate(z, np.zeros(2, dtype=complex)), z)


def test_phase_rotate_norm_and_alignment_random():
    rng = np.random.default_rng(11)
    for _ in range(50):
        g = rng.normal(size=3) + 1j * rng.normal(size=3)
        w = rng.normal(size=3) + 1j * rng.normal(size=3)
        out = W.phase_rotate(w, g)
        assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(w), rel=1e-14)
        t = np.vdot(g, out)
        assert t.real >= 0
        assert abs(t.imag) <= 1e-12 * max(abs(t), 1.0)


def test_wsr_phase_invariance():
    rng = np.random.default_rng(12)
    p = random_ic_problem(rng, 4)
    w = random_feasible_ic(rng, p)
    base = W.wsr(w, p)
    psi = rng.uniform(0, 2 * np.pi, 4)
    rotated = w * np.exp(1j * psi)[:, None]
    assert W.wsr(rotated, p) == pytest.approx(base, rel=1e-12)


def test_wsr_coop_common_receiver_phase_invariance():
    rng = np.random.default_rng(13)
    cp = random_coop_problem(rng, 2, 3)
    w = random_feasible_coop(rng, cp)
    base = W.wsr_coop(w, cp)
    psi = rng.uniform(0, 2 * np.pi, 3)
    rotated = w * np.exp(1j * psi)[None, :, None]
    assert W.wsr_coop(rotated, cp) == pytest.approx(base, rel=1e-12)


def test_coop_sinr_single_receiver_closed_form():
    cp = W.CoopProblem(chan=np.ones((2, 1, 1, 1), dtype=complex), alpha=[1.0],
                       sigma2=[1.0], power=[1.0, 1.0])
    w = np.ones((2, 1, 1), dtype=complex)
    # coherent sum of two unit contributions: |1 + 1|^2 / 1
    assert W.sinr_coop(0, w, cp) == pytest.approx(4.0, rel=1e-15)
