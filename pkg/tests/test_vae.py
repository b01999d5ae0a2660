import math

import numpy as np
import pytest

from latentdna import nnkernel as nk
from latentdna import vae as V
from latentdna.nnkernel import Tensor
from latentdna.seqcodec import one_hot_batch
from latentdna.synthetic import planted_motif_corpus, random_sequences

TINY = dict(sequence_length=32, ladder=(8,), conv2d_channels=(4,), latent_channels=2,
            latent_height=4, latent_width=8, batch_size=8)


def tiny_cfg(**kw):
    return V.VaeConfig(**{**TINY, **kw})


class TestShapes:
    def test_paper_config(self):
        cfg = V.VaeConfig.paper().validate()
        assert cfg.latent_shape == (16, 16, 16)
        assert cfg.surface_shape == (128, 128)
        # 2048 bases over four 2x pools, then three stride-2 blocks: 128 / 8 = 16
        model = V.VAE(cfg)
        post = model.encode_means(np.zeros((1, 4, 2048), np.float32))
        assert post.shape == (1, 16, 16, 16)

    def test_desk_roundtrip_shapes(self):
        model = V.VAE(V.VaeConfig.desk())
        x = one_hot_batch(random_sequences(3, 256, np.random.default_rng(0)))
        z = model.encode_means(x)
        assert z.shape == (3, 8, 8, 8)
        assert model.decode_probs(z).shape == (3, 4, 256)

    @pytest.mark.parametrize("kw", [dict(sequence_length=30), dict(latent_height=3), dict(kernel_sizes=(2,)),
                                    dict(kl_weight=0.0), dict(recon_reduction="max"), dict(ladder=())])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            tiny_cfg(**kw).validate()

    def test_wrong_input_shape(self):
        model = V.VAE(tiny_cfg())
        with pytest.raises(nk.DimensionError):
            model.encode(np.zeros((1, 4, 31), np.float32))
        with pytest.raises(nk.DimensionError):
            model.decode(np.zeros((1, 2, 4, 4), np.float32))

    def test_validated_configs_are_shape_inverses(self):
        rng = np.random.default_rng(1)
        for _ in range(6):
            stages = int(rng.integers(1, 3))
            blocks = int(rng.integers(1, 3))
            ladder = tuple(int(c) for c in rng.choice([4, 8], stages))
            c2 = tuple(int(c) for c in rng.choice([2, 4], blocks))
            h = ladder[-1] >> blocks
            length = (1 << (stages + blocks)) * int(rng.integers(1, 3))
            if h < 1:
                continue
            cfg = V.VaeConfig(sequence_length=length, ladder=ladder, conv2d_channels=c2, latent_channels=3,
                              latent_height=h, latent_width=(length >> stages) >> blocks).validate()
            model = V.VAE(cfg)
            x = one_hot_batch(random_sequences(2, length, rng))
            z = model.encode_means(x)
            assert z.shape[1:] == cfg.latent_shape
            assert model.decode_probs(z).shape == x.shape


class TestLoss:
    def _post(self, mean, logvar):
        return V.PosteriorGaussian(Tensor(np.asarray(mean, np.float64)), Tensor(np.asarray(logvar, np.float64)))

    def test_kl_zero_at_prior(self):
        x = one_hot_batch(["ACGT"]).astype(np.float64)
        _, _, kl = V.elbo_loss(x, self._post(np.zeros((1, 3)), np.zeros((1, 3))), Tensor(x))
        assert kl.item() == 0

    def test_kl_unit_mean(self):
        x = one_hot_batch(["ACGT"]).astype(np.float64)
        _, _, kl = V.elbo_loss(x, self._post([[1.0]], [[0.0]]), Tensor(x))
        assert kl.item() == pytest.approx(0.5)

    def test_kl_closed_form(self):
        rng = np.random.default_rng(0)
        mu, lv = rng.standard_normal((1, 5)), rng.standard_normal((1, 5))
        x = one_hot_batch(["AC"]).astype(np.float64)
        _, _, kl = V.elbo_loss(x, self._post(mu, lv), Tensor(x))
        sigma2 = np.exp(lv)
        assert kl.item() == pytest.approx(0.5 * np.sum(mu ** 2 + sigma2 - 1 - np.log(sigma2)))

    def test_kl_nonnegative(self):
        rng = np.random.default_rng(1)
        x = one_hot_batch(["A"]).astype(np.float64)
        for _ in range(50):
            post = self._post(rng.normal(0, 3, (2, 4)), rng.normal(0, 3, (2, 4)))
            assert V.elbo_loss(x, post, Tensor(x))[2].item() >= 0

    def test_perfect_recon_zero(self):
        x = one_hot_batch(["ACGTTGCA", "AAAACCCC"])
        total, recon, kl = V.elbo_loss(x, self._post(np.zeros((2, 2)), np.zeros((2, 2))), Tensor(x))
        assert recon.item() == pytest.approx(0, abs=1e-9) and total.item() == pytest.approx(0, abs=1e-9)

    def test_uniform_recon_and_mean_reduction(self):
        x = one_hot_batch(["ACGTACGT"])
        probs = Tensor(np.full_like(x, 0.25))
        post = self._post(np.zeros((1, 1)), np.zeros((1, 1)))
        assert V.elbo_loss(x, post, probs)[1].item() == pytest.approx(8 * math.log(4), rel=1e-6)
        assert V.elbo_loss(x, post, probs, reduction="mean")[1].item() == pytest.approx(math.log(4), rel=1e-6)

    def test_reparameterize_statistics(self):
        post = V.PosteriorGaussian(Tensor(np.full((20_000,), 1.5)), Tensor(np.full((20_000,), math.log(0.25))))
        z = V.reparameterize(post, 0).data
        assert z.mean() == pytest.approx(1.5, abs=0.02) and z.std() == pytest.approx(0.5, rel=0.02)
        np.testing.assert_array_equal(z, V.reparameterize(post, 0).data)


class TestModel:
    def test_decoder_outputs_distributions(self):
        model = V.VAE(tiny_cfg())
        z = np.random.default_rng(0).normal(0, 5, (4, 2, 4, 8)).astype(np.float32)
        probs = model.decode_probs(z)
        assert np.all(probs >= 0)
        np.testing.assert_allclose(probs.sum(axis=1), 1, atol=1e-5)

    def test_logvar_clamped(self):
        model = V.VAE(tiny_cfg())
        x = one_hot_batch(random_sequences(2, 32, np.random.default_rng(0))) * 1e6
        post = model.encode(x)
        assert post.logvar.data.min() >= V.LOGVAR_MIN and post.logvar.data.max() <= V.LOGVAR_MAX

    def test_elbo_gradcheck(self):
        model = V.VAE(tiny_cfg(sequence_length=16, latent_width=4), seed=3).astype(np.float64)
        x = one_hot_batch(random_sequences(3, 16, np.random.default_rng(2))).astype(np.float64)
        params = dict(model.named_parameters())
        rng = np.random.default_rng(5)
        names = [n for n in sorted(params) if "weight" in n]
        chosen = [names[i] for i in rng.choice(len(names), 5, replace=False)]

        def loss():
            post, probs = model(x, np.random.default_rng(9))
            return V.elbo_loss(x, post, probs, kl_weight=0.1)[0]

        model.zero_grad()
        loss().backward()
        for name in chosen:
            p = params[name]
            flat = p.data.reshape(-1)
            for idx in rng.choice(flat.size, 3, replace=False):
                orig = flat[idx]
                flat[idx] = orig + 1e-6
                up = loss().item()
                flat[idx] = orig - 1e-6
                down = loss().item()
                flat[idx] = orig
                num = (up - down) / 2e-6
                ana = p.grad.reshape(-1)[idx]
                assert abs(num - ana) <= 1e-3 * max(abs(num), abs(ana), 1e-4), name


class TestTraining:
    def test_first_batch_bound_and_determinism(self):
        seqs = random_sequences(24, 32, np.random.default_rng(0))
        cfg = tiny_cfg()
        model = V.VAE(cfg, seed=0)
        x = one_hot_batch(seqs[:8])
        post, probs = model(x, np.random.default_rng(1))
        total, recon, kl = V.elbo_loss(x, post, probs, cfg.kl_weight)
        assert math.isfinite(total.item()) and recon.item() <= math.log(4) * 32 * (1 + 1e-6)
        a = V.fit_vae(seqs[:16], seqs[16:], cfg, epochs=3, seed=4)
        b = V.fit_vae(seqs[:16], seqs[16:], cfg, epochs=3, seed=4)
        assert a.history == b.history
        assert all(r["kl"] > 0 and math.isfinite(r["kl"]) for r in a.history)

    def test_learns_planted_corpus(self):
        seqs = planted_motif_corpus(200, 32, center=16, jitter=2, seed=0)
        cfg = tiny_cfg(learning_rate=3e-3)
        res = V.fit_vae(seqs[:160], seqs[160:], cfg, epochs=8, seed=0)
        vals = [r["total"] for r in res.history if r["split"] == "validation"]
        assert vals[-1] < vals[0] and res.best_epoch >= 1
        assert V.per_base_accuracy(res.model, one_hot_batch(seqs[160:])) > 0.4

    def test_rejects_empty_and_singleton(self):
        with pytest.raises(ValueError):
            V.fit_vae([], [], tiny_cfg(), 1)
        with pytest.raises(ValueError):
            V.fit_vae(["A" * 32], [], tiny_cfg(), 1)

    def test_divergence_aborts(self):
        seqs = random_sequences(8, 32, np.random.default_rng(0))
        model = V.VAE(tiny_cfg())
        model.decoder.out.weight.data[:] = np.nan
        with pytest.raises(V.TrainingDivergedError):
            V.fit_vae(seqs, [], tiny_cfg(), 1, model=model)
