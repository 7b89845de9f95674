import numpy as np
import pytest

from latentspeech.core import ParamStore, Tensor, grad_check, no_grad
from latentspeech.diffusion import (
    Denoiser,
    DenoiserConfig,
    TrainItem,
    diffusion_loss,
    joint_train_step,
    make_schedule,
    posterior_mean,
    posterior_sigma,
    posterior_step,
    q_sample,
    q_step,
    sample,
    sinusoid,
    step_embedding,
    train_step,
)
from latentspeech.errors import ConfigError, DimensionError
from latentspeech.tts import TokenSequence, TtsConfig, TtsEncoder

TINY = DenoiserConfig(channels=8, blocks=2, cycle=2, emb_dim=16)


@pytest.fixture(scope="module")
def sched():
    return make_schedule(50, 1e-4, 0.05)


def randomize_head(model, seed=0):
    rng = np.random.default_rng(seed)
    model.head2.weight.data = rng.normal(scale=0.1, size=model.head2.weight.shape).astype(np.float32)


# schedule ---------------------------------------------------------------------------


def test_schedule_identities(sched):
    assert sched.T == 50
    assert sched.beta_hat[0] == sched.beta[0]
    for t in range(1, 50):
        assert sched.alpha_hat[t] == sched.alpha_hat[t - 1] * sched.alpha[t]
    assert (np.diff(sched.alpha_hat) < 0).all()
    assert (np.diff(sched.beta) >= 0).all() and 0 < sched.beta[0] and sched.beta[-1] < 1
    expected = (1 - sched.alpha_hat[:-1]) / (1 - sched.alpha_hat[1:]) * sched.beta[1:]
    np.testing.assert_array_equal(sched.beta_hat[1:], expected)


def test_single_step_schedule():
    s = make_schedule(1, 0.02, 0.02)
    assert s.alpha_hat[0] == s.alpha[0] == 1 - 0.02


def test_default_schedule_ends_near_standard_normal():
    s = make_schedule()
    # z_T = sqrt(a_T) z_0 + sqrt(1 - a_T) eps: the data share must be negligible
    assert s.alpha_hat[-1] < 0.01


@pytest.mark.parametrize("args", [(0, 1e-4, 0.05), (10, 0.0, 0.05), (10, 0.1, 0.05), (10, 1e-4, 1.0)])
def test_schedule_bounds(args):
    with pytest.raises(ConfigError):
        make_schedule(*args)


def test_schedule_dict_round_trip(sched):
    from latentspeech.diffusion import NoiseSchedule

    back = NoiseSchedule.from_dict(sched.as_dict())
    for k in ("beta", "alpha", "alpha_hat", "beta_hat"):
        assert np.array_equal(getattr(back, k), getattr(sched, k))


# step embedding ---------------------------------------------------------------------------


def test_step_embedding_values():
    e = step_embedding(1, 50)
    assert e.shape == (128,)
    assert e[0] == pytest.approx(0.8415, abs=1e-4)
    assert e[0] == np.sin(1.0)
    zero = sinusoid(0)
    assert (zero[0::2] == 0).all() and (zero[1::2] == 1).all()
    assert all(step_embedding(t, 50).shape == (128,) for t in (1, 25, 50))
    with pytest.raises(ConfigError):
        step_embedding(51, 50)
    with pytest.raises(ConfigError):
        step_embedding(0, 50)


# forward process ------------------------------------------------------------------------------


def test_q_sample_examples(sched):
    z0 = np.random.default_rng(0).normal(size=(16, 8))
    eps = np.random.default_rng(1).normal(size=(16, 8))
    np.testing.assert_allclose(q_sample(sched, z0, 10, np.zeros_like(z0)), np.sqrt(sched.alpha_hat[9]) * z0)
    np.testing.assert_allclose(q_sample(sched, np.zeros_like(z0), 10, eps), np.sqrt(1 - sched.alpha_hat[9]) * eps)
    with pytest.raises(DimensionError):
        q_sample(sched, z0, 10, eps[:, :4])
    with pytest.raises(ConfigError):
        q_sample(sched, z0, 0, eps)


@pytest.mark.parametrize("t", [1, 10, 50])
def test_iterated_kernel_matches_closed_form(sched, t):
    n, z0 = 10_000, 0.7
    rng = np.random.default_rng(t)
    z = np.full(n, z0)
    for s in range(1, t + 1):
        z = q_step(sched, z, s, rng.standard_normal(n))
    closed = q_sample(sched, np.full(n, z0), t, rng.standard_normal(n))
    se_mean = np.sqrt(z.var() / n + closed.var() / n)
    assert abs(z.mean() - closed.mean()) < 3 * se_mean
    se_var = np.sqrt(2 / (n - 1)) * np.sqrt(z.var() ** 2 + closed.var() ** 2)
    assert abs(z.var() - closed.var()) < 3 * se_var


def test_variance_preserved_at_last_step(sched):
    rng = np.random.default_rng(0)
    z0 = rng.standard_normal(100_000)
    zt = q_sample(sched, z0, 50, rng.standard_normal(100_000))
    assert abs(zt.var() - 1) < 0.05


# denoiser ----------------------------------------------------------------------------------


@pytest.mark.parametrize("length", [1, 7, 48])
def test_denoiser_shape_and_zero_head(length):
    model = Denoiser(seed=0)
    rng = np.random.default_rng(length)
    z, c = rng.normal(size=(2, 16, length)).astype(np.float32)
    out = model(z, 5, c)
    assert out.shape == (16, length)
    assert not out.data.any()


def test_dilations_cycle():
    model = Denoiser(DenoiserConfig(blocks=12, cycle=10))
    assert [b.dilation for b in model.blocks] == [1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1, 2]


def test_denoiser_errors():
    model = Denoiser(TINY)
    with pytest.raises(DimensionError):
        model(np.zeros((16, 4)), 1, np.zeros((16, 5)))
    with pytest.raises(DimensionError):
        model(np.zeros((8, 4)), 1, np.zeros((8, 4)))


def test_conditioning_changes_output():
    model = Denoiser(TINY, seed=1)
    randomize_head(model)
    rng = np.random.default_rng(0)
    z, c = rng.normal(size=(2, 16, 16))
    with no_grad():
        a = model(z, 3, c).data
        b = model(z, 3, c + 0.5).data
        c2 = model(z, 4, c).data
    assert not np.allclose(a, b)
    assert not np.allclose(a, c2)


def test_batched_matches_single():
    model = Denoiser(TINY, seed=2)
    randomize_head(model)
    rng = np.random.default_rng(1)
    z, c = rng.normal(size=(2, 3, 16, 10)).astype(np.float32)
    with no_grad():
        batched = model(z, np.array([1, 5, 9]), c).data
        for i, t in enumerate((1, 5, 9)):
            np.testing.assert_allclose(batched[i], model(z[i], t, c[i]).data, atol=1e-5)


def test_denoiser_loss_grad_check(sched):
    model = Denoiser(TINY, seed=3)
    randomize_head(model)
    rng = np.random.default_rng(2)
    z0, cond, eps = rng.normal(size=(3, 2, 16, 16))
    t = np.array([3, 40])
    cond_t = Tensor(cond, requires_grad=True)
    params = model.parameters()
    params["cond"] = cond_t
    err = grad_check(lambda: diffusion_loss(model, sched, z0, cond_t, t, eps), params, max_elements=8)
    assert err < 1e-3


# training ---------------------------------------------------------------------------------


def test_initial_loss_is_noise_energy(sched):
    model = Denoiser(seed=0)
    rng = np.random.default_rng(0)
    z0 = rng.normal(size=(64, 16, 64))
    t = rng.integers(1, 51, 64)
    with no_grad():
        loss = float(diffusion_loss(model, sched, z0, z0, t, rng.standard_normal(z0.shape)).data)
    assert abs(loss - 1.0) < 0.05


def test_zero_learning_rate(sched):
    model = Denoiser(TINY, seed=0)
    store = ParamStore.from_modules(diff=model)
    before = {k: v.copy() for k, v in store.arrays().items()}
    z0 = np.random.default_rng(0).normal(size=(2, 16, 8))
    loss = train_step(model, store, sched, z0, z0, 0.0, np.random.default_rng(1))
    assert loss > 0
    assert all(np.array_equal(v, before[k]) for k, v in store.arrays().items())


def expected_loss(model, sched, z0, cond, seed=0, reps=4):
    rng = np.random.default_rng(seed)
    t = np.tile(np.arange(1, sched.T + 1), reps)
    zs = np.repeat(z0[None], len(t), axis=0)
    cs = np.repeat(cond[None], len(t), axis=0)
    with no_grad():
        return float(diffusion_loss(model, sched, zs, cs, t, rng.standard_normal(zs.shape)).data)


@pytest.fixture(scope="module")
def overfit_pair(sched):
    rng = np.random.default_rng(5)
    z0 = rng.standard_normal((16, 24)).astype(np.float32)
    cond = rng.standard_normal((16, 24)).astype(np.float32)
    model = Denoiser(DenoiserConfig(channels=64, blocks=4, cycle=4), seed=0)
    store = ParamStore.from_modules(diff=model)
    initial = expected_loss(model, sched, z0, cond)
    zb, cb = np.repeat(z0[None], 8, 0), np.repeat(cond[None], 8, 0)
    losses = [train_step(model, store, sched, zb, cb, 5e-3 * (0.3 if i >= 1050 else 1.0), rng) for i in range(1500)]
    return model, z0, cond, initial, losses


def test_overfit_one_pair(sched, overfit_pair):
    model, z0, cond, initial, losses = overfit_pair
    assert initial == pytest.approx(1.0, abs=0.05)
    assert expected_loss(model, sched, z0, cond) < 0.1 * initial
    windows = np.array(losses).reshape(-1, 300).mean(axis=1)
    assert (np.diff(windows) < 0).all()


def test_overfit_sampler_recovers_latent(sched, overfit_pair):
    model, z0, cond, _, _ = overfit_pair
    wins = 0
    for seed in range(10):
        draw = sample(model, sched, cond, seed)
        fresh = np.random.default_rng(100 + seed).standard_normal(z0.shape)
        wins += np.linalg.norm(draw - z0) < np.linalg.norm(fresh - z0)
    assert wins >= 9


# reverse process ------------------------------------------------------------------------------


def test_posterior_with_zero_prediction(sched):
    model = Denoiser(TINY)
    z = np.random.default_rng(0).normal(size=(16, 6))
    out = posterior_step(model, sched, z, 20, z, noise=None)
    np.testing.assert_allclose(out, z / np.sqrt(sched.alpha[19]), rtol=1e-12)


def test_posterior_mean_scalar_hand_value():
    s = make_schedule(3, 0.1, 0.3)
    # t = 2: beta = 0.2, alpha = 0.8, alpha_hat = 0.9 * 0.8 = 0.72
    expected = (1 / np.sqrt(0.8)) * (1.5 - 0.2 / np.sqrt(1 - 0.72) * 0.4)
    assert posterior_mean(s, np.array([1.5]), 2, np.array([0.4]))[0] == pytest.approx(expected, abs=1e-6)


def test_last_step_is_deterministic(sched):
    model = Denoiser(TINY)
    z = np.ones((16, 4))
    a = posterior_step(model, sched, z, 1, z, noise=np.full((16, 4), 5.0))
    np.testing.assert_allclose(a, z / np.sqrt(sched.alpha[0]))
    assert posterior_sigma(sched, 1, "beta") == posterior_sigma(sched, 1, "beta_hat") == np.sqrt(sched.beta[0])
    assert posterior_sigma(sched, 30, "beta") > posterior_sigma(sched, 30, "beta_hat")
    with pytest.raises(ConfigError):
        posterior_sigma(sched, 30, "other")


def test_noise_enters_above_first_step(sched):
    model = Denoiser(TINY)
    z = np.ones((16, 4))
    noise = np.full((16, 4), 2.0)
    out = posterior_step(model, sched, z, 10, z, noise=noise)
    np.testing.assert_allclose(out, z / np.sqrt(sched.alpha[9]) + np.sqrt(sched.beta[9]) * noise)


def test_sample_seeded(sched):
    model = Denoiser(TINY, seed=4)
    randomize_head(model)
    cond = np.random.default_rng(0).normal(size=(16, 9))
    a, b = sample(model, sched, cond, 7), sample(model, sched, cond, 7)
    assert a.shape == cond.shape
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample(model, sched, cond, 8))


# joint training ----------------------------------------------------------------------------


def test_joint_step_updates_both_models(sched):
    tts = TtsEncoder(TtsConfig(d_model=16, ape_layers=1, int_layers=1, ff_hidden=16, kernel=3, predictor_hidden=8), seed=0)
    model = Denoiser(TINY, seed=0)
    randomize_head(model)
    store = ParamStore.from_modules(diff=model, tts=tts)
    before = tts.phoneme_table.weight.data.copy()
    rng = np.random.default_rng(0)
    items = [
        TrainItem(rng.normal(size=(16, 6)).astype(np.float32), TokenSequence([3, 4], [1, 2]), [2, 4]),
        TrainItem(rng.normal(size=(16, 5)).astype(np.float32), TokenSequence([5], [3]), [5]),
    ]
    diff, dur = joint_train_step(model, tts, store, sched, items, 1e-2, rng)
    assert diff > 0 and dur > 0
    assert not np.array_equal(before, tts.phoneme_table.weight.data)
    with pytest.raises(DimensionError):
        joint_train_step(model, tts, store, sched, [TrainItem(items[0].z0, items[0].tokens, [1, 1])], 1e-2, rng)
