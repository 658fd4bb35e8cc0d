"""Network model tests: activation, training, targets, bounds."""
import numpy as np
import pytest
import scipy.integrate
import scipy.linalg

from etcpde import profiles
from etcpde.errors import DivergenceError, TrainingStalledError
from etcpde.galerkin import analytic_dirichlet_basis
from etcpde.mnn import (
    LmConfig,
    Mnn,
    TrainingSet,
    activation,
    activation_integral,
    activation_vec,
    estimate_delta,
    forward,
    generate_targets,
    load_weights,
    save_weights,
    sector_bounds,
    train_bp_baseline,
    train_lm,
)
from etcpde.pde_sim import PlantModel
from etcpde._kernels import mnn_forward_batch, mnn_jacobian_batch

from oracles import rod_slow_nonlinearity

PI = np.pi


def small_net(m=2, n_h=3, seed=5):
    return Mnn.initialized(m, n_h, seed=seed)


def box_grid(lo, hi, n, m, seed=None):
    axes = [np.linspace(lo, hi, n)] * m
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([ax.ravel() for ax in mesh], axis=1)


# ---------------------------------------------------------------- activation


def test_activation_zero():
    # [TRIVIAL] mu(0) = 0
    assert activation(0.0, 1.0, 1.0) == 0.0
    assert np.all(activation_vec(np.zeros(4), np.ones(4), np.ones(4)) == 0.0)


def test_activation_saturation():
    # [TRIVIAL] mu -> +-q as s -> +-inf
    assert abs(activation(50.0, 3.0, 1.0) - 3.0) < 1e-12
    assert abs(activation(-50.0, 3.0, 1.0) + 3.0) < 1e-12


def test_activation_odd_symmetry():
    s = np.linspace(0.1, 10.0, 25)
    assert np.allclose(activation_vec(-s, 2.0, 0.7), -activation_vec(s, 2.0, 0.7))


def test_activation_slope_at_origin():
    # [PAPER] derivative at 0 is q/(2r), the sector upper bound
    for q, r in ((1.0, 1.0), (2.0, 0.5), (0.3, 4.0)):
        fd = (activation(1e-6, q, r) - activation(-1e-6, q, r)) / 2e-6
        assert abs(fd - q / (2.0 * r)) < 1e-6


def test_activation_integral_matches_quadrature():
    # [DERIVED] closed-form antiderivative vs adaptive quadrature
    for q, r in ((1.0, 1.0), (2.0, 0.5)):
        for s in (-30.0, -2.0, -0.3, 0.0, 0.7, 5.0, 40.0):
            num, _ = scipy.integrate.quad(
                lambda x: activation(x, q, r), 0.0, s, epsabs=1e-12, epsrel=1e-12
            )
            assert abs(float(activation_integral(s, q, r)) - num) < 1e-9


# ---------------------------------------------------------------- forward


def test_forward_zero_state():
    # [TRIVIAL] mu(0)=0 -> output 0
    net = small_net()
    assert np.all(forward(net, np.zeros(2)) == 0.0)


def test_forward_unit_network_value():
    # [DERIVED] n_h=1, W=V=[1], q=r=1, x=1 -> 2/(1+e^-1)-1
    net = Mnn(W=[[1.0]], V=[[1.0]], q=1.0, r=1.0)
    want = 2.0 / (1.0 + np.exp(-1.0)) - 1.0
    assert abs(forward(net, np.array([1.0]))[0] - want) < 1e-12
    assert abs(want - 0.46211715726000974) < 1e-15


def test_forward_linear_in_w():
    # [TRIVIAL] scaling W scales the output
    net = small_net()
    x = np.array([0.4, -0.2])
    scaled = Mnn(W=3.0 * net.W, V=net.V, q=net.q, r=net.r)
    assert np.allclose(forward(scaled, x), 3.0 * forward(net, x))


def test_forward_batch_matches_single():
    net = small_net()
    X = np.random.default_rng(0).uniform(-1, 1, size=(7, 2))
    batch = forward(net, X)
    for i in range(7):
        assert np.allclose(batch[i], forward(net, X[i]))


def test_mnn_validation():
    with pytest.raises(ValueError):
        Mnn(W=np.zeros((2, 3)), V=np.zeros((2, 3)), q=1.0, r=1.0)
    with pytest.raises(ValueError):
        Mnn(W=np.zeros((1, 2)), V=np.zeros((2, 1)), q=-1.0, r=1.0)


# ---------------------------------------------------------------- sector


def test_sector_bounds_values():
    # [PAPER] q=r=1 -> g_max = 0.5;  [TRIVIAL] q=2, r=1 -> 1
    b1 = sector_bounds(Mnn(W=np.zeros((1, 1)), V=np.zeros((1, 1)), q=1.0, r=1.0))
    assert b1.g_min[0] == 0.0 and b1.g_max[0] == 0.5
    b2 = sector_bounds(Mnn(W=np.zeros((1, 1)), V=np.zeros((1, 1)), q=2.0, r=1.0))
    assert b2.g_max[0] == 1.0
    assert np.allclose(b2.G_max, [[1.0]]) and np.allclose(b2.G, [[1.0]])


def test_sector_bounds_empirical():
    # [DERIVED] dense scan: g_min <= mu(s)/s <= g_max for every neuron
    q = np.array([1.0, 2.0, 0.5])
    r = np.array([1.0, 0.4, 3.0])
    net = Mnn(W=np.zeros((1, 3)), V=np.zeros((3, 1)), q=q, r=r)
    sec = sector_bounds(net)
    s = np.concatenate([np.linspace(-50, -1e-4, 20001), np.linspace(1e-4, 50, 20001)])
    for i in range(3):
        ratio = activation_vec(s, q[i], r[i]) / s
        assert np.max(ratio) <= sec.g_max[i] + 1e-9
        assert np.min(ratio) >= sec.g_min[i] - 1e-9


# ---------------------------------------------------------------- jacobian


def test_jacobian_matches_central_differences():
    # gradient correctness invariant: 1e-5 relative against step-1e-6 FD
    rng = np.random.default_rng(3)
    m, n_h, n = 2, 3, 5
    W = rng.uniform(-1, 1, (m, n_h))
    V = rng.uniform(-1, 1, (n_h, m))
    q = np.array([1.0, 1.5, 0.8])
    r = np.array([1.0, 0.6, 1.2])
    X = rng.uniform(-2, 2, (n, m))
    out, mu, sig = mnn_forward_batch(W, V, q, r, X)
    J = mnn_jacobian_batch(W, V, q, r, X, mu, sig)

    theta = np.concatenate([W.ravel(), V.ravel()])
    fd = np.zeros_like(J)
    for p in range(theta.size):
        for sign, store in ((1.0, 1.0), (-1.0, -1.0)):
            th = theta.copy()
            th[p] += sign * 1e-6
            Wp = th[: m * n_h].reshape(m, n_h)
            Vp = th[m * n_h :].reshape(n_h, m)
            op, _, _ = mnn_forward_batch(Wp, Vp, q, r, X)
            fd[:, p] += store * op.ravel() / 2e-6
    scale = np.maximum(np.abs(J), 1e-3)
    assert np.max(np.abs(J - fd) / scale) < 1e-5


# ---------------------------------------------------------------- training


def test_lm_teacher_student():
    # [DERIVED] targets produced by a network of the same shape are matched
    # to near machine loss
    teacher = Mnn.initialized(1, 3, seed=11)
    X = np.linspace(-1.5, 1.5, 61).reshape(-1, 1)
    data = TrainingSet(inputs=X, targets=forward(teacher, X), dT_s=1e-3)
    res = train_lm(teacher, data, LmConfig(k_max=300, eps_c=1e-16), seed=4)
    assert res.history[-1] < 1e-8


def test_lm_linear_target():
    # [DERIVED] f(x) = 0.5 x on [-1,1], n_h=8: MSE < 1e-6 inside 100 steps
    X = np.arange(-1.0, 1.0 + 0.025, 0.05).reshape(-1, 1)
    data = TrainingSet(inputs=X, targets=0.5 * X, dT_s=1e-3)
    net = Mnn.initialized(1, 8, seed=2)
    res = train_lm(net, data, LmConfig(k_max=100), seed=2)
    mse = float(np.mean((forward(res.net, X) - data.targets) ** 2))
    assert mse < 1e-6


def test_lm_accepted_losses_non_increasing():
    X = np.linspace(-1, 1, 41).reshape(-1, 1)
    data = TrainingSet(inputs=X, targets=np.tanh(2 * X), dT_s=1e-3)
    res = train_lm(Mnn.initialized(1, 4), data, LmConfig(k_max=60), seed=9)
    assert np.all(np.diff(res.history) <= 0.0)


def test_lm_deterministic_given_seed():
    X = np.linspace(-1, 1, 21).reshape(-1, 1)
    data = TrainingSet(inputs=X, targets=0.3 * X**3, dT_s=1e-3)
    a = train_lm(Mnn.initialized(1, 4), data, LmConfig(k_max=25), seed=7)
    b = train_lm(Mnn.initialized(1, 4), data, LmConfig(k_max=25), seed=7)
    assert np.array_equal(a.net.W, b.net.W)
    assert np.array_equal(a.net.V, b.net.V)
    assert np.array_equal(a.history, b.history)


def test_lm_exact_start_converges():
    # starting at a perfect fit must report convergence, not a stall
    teacher = Mnn.initialized(1, 3, seed=1)
    X = np.linspace(-1, 1, 31).reshape(-1, 1)
    data = TrainingSet(inputs=X, targets=forward(teacher, X), dT_s=1e-3)
    res = train_lm(teacher, data, seed=None)
    assert res.converged
    assert res.history[-1] < 1e-25


def test_lm_stall_reports_best(monkeypatch):
    # an unsolvable damped system must surface the best-so-far weights
    def broken_solve(*args, **kwargs):
        raise scipy.linalg.LinAlgError("forced")

    monkeypatch.setattr(scipy.linalg, "solve", broken_solve)
    X = np.linspace(-1, 1, 11).reshape(-1, 1)
    data = TrainingSet(inputs=X, targets=0.5 * X, dT_s=1e-3)
    with pytest.raises(TrainingStalledError) as err:
        train_lm(Mnn.initialized(1, 3), data, seed=0)
    assert isinstance(err.value.best, Mnn)
    assert err.value.history.shape == (1,)


def test_lm_per_channel_flag():
    X = box_grid(-1.0, 1.0, 9, 2)
    targets = np.stack([0.5 * X[:, 0], -0.3 * X[:, 1]], axis=1)
    data = TrainingSet(inputs=X, targets=targets, dT_s=1e-3)
    res = train_lm(Mnn.initialized(2, 4), data, LmConfig(k_max=80), seed=3, per_channel=True)
    assert res.net.n_h == 8  # block-diagonal merge of two 4-neuron nets
    mse = float(np.mean((forward(res.net, X) - targets) ** 2))
    assert mse < 1e-5


def test_lm_bad_data_rejected():
    empty = TrainingSet(np.zeros((0, 2)), np.zeros((0, 2)), 1e-3)
    with pytest.raises(ValueError, match="empty"):
        train_lm(Mnn.initialized(2, 3), empty, seed=0)
    mismatched = TrainingSet(np.zeros((3, 2)), np.zeros((3, 2)), 1e-3)
    with pytest.raises(ValueError, match="dimension"):
        train_lm(Mnn.initialized(1, 2), mismatched, seed=0)


def test_lm_config_validation():
    with pytest.raises(ValueError):
        LmConfig(damping_down=1.5)
    with pytest.raises(ValueError):
        LmConfig(mu0=-1.0)
    with pytest.raises(ValueError):
        LmConfig(k_max=0)


def test_bp_zero_rate_keeps_weights():
    # [TRIVIAL] rate -> 0 leaves the weights unchanged
    X = np.linspace(-1, 1, 11).reshape(-1, 1)
    data = TrainingSet(inputs=X, targets=0.5 * X, dT_s=1e-3)
    res = train_bp_baseline(Mnn.initialized(1, 3), data, rate=0.0, iters=5, seed=6)
    ref_W, _ = np.random.default_rng(6).uniform(-1, 1, (1, 3)), None
    assert np.array_equal(res.net.W, ref_W)


def test_bp_single_step_equals_explicit_gradient():
    # [DERIVED] one descent step equals the explicit loss gradient, computed
    # here independently with naive loops
    rng = np.random.default_rng(12)
    m, n_h, n, rate = 2, 3, 6, 0.05
    X = rng.uniform(-1, 1, (n, m))
    T = rng.uniform(-1, 1, (n, m))
    data = TrainingSet(inputs=X, targets=T, dT_s=1e-3)
    net0 = Mnn.initialized(m, n_h, seed=8)
    res = train_bp_baseline(net0, data, rate=rate, iters=1, seed=8)

    # draw order matches the trainer's seeding: W then V from one generator
    rng8 = np.random.default_rng(8)
    W = rng8.uniform(-1, 1, (m, n_h))
    V = rng8.uniform(-1, 1, (n_h, m))
    gW = np.zeros_like(W)
    gV = np.zeros_like(V)
    for i in range(n):
        z = V @ X[i]
        sig = 1.0 / (1.0 + np.exp(-z))
        mu = 2.0 * sig - 1.0
        e = W @ mu - T[i]
        gW += np.outer(e, mu) / n
        dmu = 2.0 * sig * (1.0 - sig)
        gV += np.outer(dmu * (W.T @ e), X[i]) / n
    assert np.max(np.abs(res.net.W - (W - rate * gW))) < 1e-12
    assert np.max(np.abs(res.net.V - (V - rate * gV))) < 1e-12


def test_bp_slower_than_lm_on_shared_data():
    # [DERIVED] paired run: equal iterations, same seed, LM ends lower
    X = box_grid(0.0, 2.0, 9, 2)
    targets = np.stack(
        [1.65 * X[:, 0] + 0.4 * X[:, 0] ** 2, 1.65 * X[:, 1] + 0.5 * X[:, 0] * X[:, 1]],
        axis=1,
    )
    data = TrainingSet(inputs=X, targets=targets, dT_s=1e-3)
    net = Mnn.initialized(2, 8)
    lm = train_lm(net, data, LmConfig(k_max=30), seed=1)
    bp = train_bp_baseline(net, data, rate=0.01, iters=lm.iterations, seed=1)
    assert lm.history[-1] < bp.history[-1]


def test_bp_divergence_carries_history():
    X = np.linspace(-2, 2, 21).reshape(-1, 1)
    data = TrainingSet(inputs=X, targets=5.0 * X, dT_s=1e-3)
    with pytest.raises(DivergenceError) as err:
        train_bp_baseline(Mnn.initialized(1, 6), data, rate=50.0, iters=500, seed=0)
    assert err.value.partial_trace is not None
    assert err.value.partial_trace.ndim == 1


# ---------------------------------------------------------------- targets


def _rod_plant(linear=1.65, quadratic=1.5):
    from etcpde.galerkin import SturmLiouvilleSpec

    zero = profiles.get_profile("zero")
    return PlantModel(
        spec=SturmLiouvilleSpec(domain=(0.0, PI)),
        f=profiles.quadratic_reaction(linear, quadratic),
        b2=zero,
        b1=zero,
        cbar=zero,
        xi0=zero,
    )


def test_targets_linear_plant_near_zero():
    # [TRIVIAL] f = 0 -> drift estimates vanish up to O(dT_s)
    plant = _rod_plant(0.0, 0.0)
    basis = analytic_dirichlet_basis(1.0, (0.0, PI), m=2)
    data = generate_targets(
        plant, [(0.0, 2.0), (0.0, 2.0)], 0.5, 1e-3, np.diag([-1.0, -4.0]), basis=basis
    )
    assert data.n_samples == 25
    assert np.max(np.abs(data.targets)) < 0.05


def test_targets_match_analytic_nonlinearity():
    # [DERIVED] rod reaction: targets track the closed-form slow nonlinearity
    # within 1% of its sup over the sampled box
    plant = _rod_plant()
    basis = analytic_dirichlet_basis(1.0, (0.0, PI), m=2)
    data = generate_targets(
        plant, [(0.0, 2.0), (0.0, 2.0)], 0.25, 1e-3, np.diag([-1.0, -4.0]), basis=basis
    )
    want = np.stack([rod_slow_nonlinearity(x) for x in data.inputs])
    sup = np.max(np.linalg.norm(want, axis=1))
    err = np.max(np.linalg.norm(data.targets - want, axis=1))
    assert err / sup < 0.01


def test_targets_richardson_bias():
    # [DERIVED] exact reduced sampler: halving dT_s halves the
    # finite-difference bias
    a = -0.5  # closed drift -1 + 0.5

    def sampler(x, dT):
        return x * np.exp(a * dT)

    A_s = np.array([[-1.0]])
    biases = []
    for dT in (1e-2, 5e-3):
        data = generate_targets(sampler, [(0.5, 2.0)], 0.25, dT, A_s)
        true_f = 0.5 * data.inputs
        biases.append(np.max(np.abs(data.targets - true_f)))
    ratio = biases[1] / biases[0]
    assert 0.45 < ratio < 0.55


def test_targets_divergent_samples_discarded():
    # a violently unstable reaction blows up every start except the origin
    plant = _rod_plant(1e5, 0.0)
    basis = analytic_dirichlet_basis(1.0, (0.0, PI), m=2)
    with pytest.warns(UserWarning, match="discarded"):
        data = generate_targets(
            plant, [(0.0, 2.0), (0.0, 2.0)], 1.0, 1e-3, np.diag([-1.0, -4.0]),
            basis=basis,
        )
    assert data.n_samples == 1
    assert np.allclose(data.inputs[0], 0.0)


def test_targets_bad_arguments():
    plant = _rod_plant()
    basis = analytic_dirichlet_basis(1.0, (0.0, PI), m=2)
    with pytest.raises(ValueError, match="basis"):
        generate_targets(plant, [(0.0, 1.0), (0.0, 1.0)], 0.5, 1e-3, np.eye(2))
    with pytest.raises(ValueError, match="dimension"):
        generate_targets(plant, [(0.0, 1.0)], 0.5, 1e-3, np.eye(2), basis=basis)
    with pytest.raises(TypeError):
        generate_targets(3.0, [(0.0, 1.0)], 0.5, 1e-3, np.eye(1))


def test_training_set_validation():
    with pytest.raises(ValueError):
        TrainingSet(np.zeros((3, 2)), np.zeros((4, 2)), 1e-3)
    with pytest.raises(ValueError):
        TrainingSet(np.zeros((3, 2)), np.zeros((3, 2)), -1.0)
    with pytest.raises(ValueError):
        TrainingSet(np.ones((3, 2)), np.zeros((3, 2)), 1e-3, region=((0.0, 0.5),) * 2)


# ---------------------------------------------------------------- delta


def test_delta_teacher_is_tiny():
    # [TRIVIAL] net == target generator -> delta at the safety floor
    teacher = Mnn.initialized(2, 4, seed=3)
    delta = estimate_delta(teacher, lambda x: forward(teacher, x), [(0.0, 2.0)] * 2, 0.5)
    assert delta <= 1.1e-8


def test_delta_grid_refinement_monotone():
    # [TRIVIAL] nested grids: the max over a superset cannot be smaller
    net = Mnn.initialized(1, 4, seed=1)
    f = lambda x: 0.5 * np.asarray(x)
    coarse = estimate_delta(net, f, [(0.2, 2.0)], 0.2)
    fine = estimate_delta(net, f, [(0.2, 2.0)], 0.1)
    assert fine >= coarse - 1e-15


def test_delta_empty_grid_rejected():
    net = Mnn.initialized(1, 2)
    with pytest.raises(ValueError, match="empty"):
        estimate_delta(net, lambda x: x, [(-1e-8, 1e-8)], 1e-8)


def test_delta_bound_holds_off_grid():
    # residual bound consistency: ||f - f_nn|| <= delta ||x|| on a validation
    # grid disjoint from the estimation grid (safety factor absorbs the gap)
    X = np.arange(0.05, 2.0001, 0.05).reshape(-1, 1)
    data = TrainingSet(inputs=X, targets=1.65 * X + 0.3 * X**2, dT_s=1e-3)
    res = train_lm(Mnn.initialized(1, 8), data, LmConfig(k_max=120), seed=5)
    f = lambda x: 1.65 * np.asarray(x) + 0.3 * np.asarray(x) ** 2
    delta = estimate_delta(res.net, f, [(0.05, 2.0)], 0.05)
    val = np.arange(0.075, 1.98, 0.05).reshape(-1, 1)  # offset half a cell
    resid = np.abs(f(val) - forward(res.net, val))
    assert np.all(resid.ravel() <= delta * np.abs(val.ravel()))


# ---------------------------------------------------------------- weights io


def test_weights_roundtrip(tmp_path):
    net = Mnn.initialized(2, 5, q=1.3, r=0.8, seed=9)
    w, v, qr = tmp_path / "W.csv", tmp_path / "V.csv", tmp_path / "qr.csv"
    save_weights(net, w, v, qr)
    back = load_weights(w, v, qr)
    assert np.array_equal(back.W, net.W)
    assert np.array_equal(back.V, net.V)
    assert np.array_equal(back.q, net.q)
    assert np.array_equal(back.r, net.r)


def test_weights_roundtrip_single_output(tmp_path):
    net = Mnn.initialized(1, 8, seed=2)
    w, v = tmp_path / "W.csv", tmp_path / "V.csv"
    save_weights(net, w, v)
    back = load_weights(w, v)
    assert back.W.shape == (1, 8) and back.V.shape == (8, 1)
    assert np.array_equal(back.V, net.V)
