import math
import struct
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentdna import evalmetrics as em
from latentdna.synthetic import random_sequences


def _random_psd(rng, d):
    a = rng.standard_normal((d, d))
    return a @ a.T


def _summary(mean, cov):
    return em.GaussianSummary(np.asarray(mean, float), np.asarray(cov, float), 10)


class TestGaussian:
    def test_hand_computed(self):
        g = em.fit_gaussian([[0, 0], [2, 0], [0, 2], [2, 2]])
        np.testing.assert_allclose(g.mean, [1, 1])
        np.testing.assert_allclose(g.covariance, np.diag([4 / 3, 4 / 3]), atol=1e-15)

    def test_identical_points(self):
        g = em.fit_gaussian([[1.5, -2.0], [1.5, -2.0]])
        assert np.all(g.covariance == 0)

    def test_symmetric(self):
        g = em.fit_gaussian(np.random.default_rng(0).standard_normal((30, 7)))
        assert np.max(np.abs(g.covariance - g.covariance.T)) <= 1e-12

    def test_too_few(self):
        with pytest.raises(ValueError):
            em.fit_gaussian([[1.0, 2.0]])

    def test_sqrt_examples(self):
        np.testing.assert_allclose(em.matrix_sqrt_psd(np.eye(3)), np.eye(3), atol=1e-15)
        np.testing.assert_allclose(em.matrix_sqrt_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)

    def test_sqrt_reconstruction(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            m = _random_psd(rng, 6)
            r = em.matrix_sqrt_psd(m)
            assert np.linalg.norm(r @ r - m) / np.linalg.norm(m) < 1e-8

    def test_sqrt_clamps_and_rejects(self):
        r = em.matrix_sqrt_psd(np.diag([1.0, -1e-9]))
        assert r[1, 1] == 0
        with pytest.raises(em.NotPSDError):
            em.matrix_sqrt_psd(np.diag([1.0, -1e-3]))

    def test_frechet_examples(self):
        assert em.frechet_distance(_summary([0.0], [[1.0]]), _summary([3.0], [[1.0]])) == pytest.approx(9, abs=1e-12)
        g = em.fit_gaussian(np.random.default_rng(2).standard_normal((40, 5)))
        assert em.frechet_distance(g, g) == 0.0

    def test_diagonal_closed_form(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            d = int(rng.integers(1, 12))
            a, b = rng.uniform(0.01, 5, d), rng.uniform(0.01, 5, d)
            mu = rng.standard_normal(d)
            oracle = float(np.sum((np.sqrt(a) - np.sqrt(b)) ** 2))
            got = em.frechet_distance(_summary(mu, np.diag(a)), _summary(mu, np.diag(b)))
            assert abs(got - oracle) < 1e-8

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 8))
    def test_symmetric_nonnegative(self, seed, d):
        rng = np.random.default_rng(seed)
        a = _summary(rng.standard_normal(d), _random_psd(rng, d))
        b = _summary(rng.standard_normal(d), _random_psd(rng, d))
        ab, ba = em.frechet_distance(a, b), em.frechet_distance(b, a)
        assert ab >= 0 and ab == pytest.approx(ba, rel=1e-6, abs=1e-8)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            em.frechet_distance(_summary([0.0], [[1.0]]), _summary([0.0, 0.0], np.eye(2)))


def _naive_scan(seq, pattern):
    allowed = {"A": "A", "C": "C", "G": "G", "T": "T", "W": "AT"}
    return [i for i in range(len(seq) - len(pattern) + 1)
            if all(seq[i + j] in allowed[p] for j, p in enumerate(pattern))]


class TestMotifs:
    def test_examples(self):
        assert em.motif_scan("GGTATAAAGG", "TATAAA") == [2]
        assert em.motif_scan("GGGG", "TATAAA") == []
        assert em.motif_scan("TATATA", "TATA") == [0, 2]
        assert em.motif_scan("TATAAAT", "TATAWAW") == [0]

    @settings(max_examples=200, deadline=None)
    @given(st.text(alphabet="ACGTN", max_size=200), st.text(alphabet="ATW", min_size=1, max_size=5))
    def test_matches_naive(self, seq, pattern):
        assert em.motif_scan(seq, pattern) == _naive_scan(seq, pattern)

    def test_bad_pattern(self):
        with pytest.raises(ValueError):
            em.motif_scan("ACGT", "TAXA")

    def test_empty_corpus(self):
        h = em.motif_histogram([], "TATAAA", 10, length=256)
        assert h.total == 0 and np.all(h.counts == 0) and len(h.centers) > 0

    def test_planted_dominant_bin(self):
        rng = np.random.default_rng(0)
        seqs = []
        for s in random_sequences(300, 2048, rng):
            pos = 1024 - 30 + int(rng.integers(-2, 3))
            seqs.append(s[:pos] + "TATAAA" + s[pos + 6:])
        h = em.motif_histogram(seqs, "TATAAA", 10)
        assert h.tss == 1024 and h.modal_center() == -30
        hits = sum(len(em.motif_scan(s, "TATAAA")) for s in seqs)
        assert h.total == hits
        assert h.counts[list(h.centers).index(-30)] >= 300

    def test_bin_centres(self):
        h = em.motif_histogram(["A" * 10 + "TATAAA" + "A" * 4], "TATAAA", 4, tss=10)
        assert h.modal_center() == 0
        h = em.motif_histogram(["A" * 12 + "TATAAA" + "A" * 2], "TATAAA", 4, tss=10)
        assert h.modal_center() == 4

    def test_tv_examples(self):
        assert em.histogram_distance([1, 2, 3], [2, 4, 6]) == 0
        assert em.histogram_distance([5, 0], [0, 3]) == 1
        assert em.histogram_distance([0.5, 0.3, 0.2], [0.4, 0.4, 0.2]) == pytest.approx(0.1)

    def test_tv_aligns_histograms(self):
        a = em.motif_histogram(["TATAAA" + "C" * 10], "TATAAA", 4, tss=0)
        b = em.motif_histogram(["TATAAA" + "C" * 20], "TATAAA", 4, tss=0)
        assert em.histogram_distance(a, b) == 0

    def test_moving_average(self):
        np.testing.assert_allclose(em.moving_average([0, 3, 0, 3], 3), [1.5, 1, 2, 1.5])
        with pytest.raises(ValueError):
            em.moving_average([1, 2], 2)


class TestSei:
    def test_example(self):
        r = em.sei_hits([[0.95, 0.10], [0.91, 0.89]])
        assert list(r.counts.values()) == [2, 0]
        assert r.ranking[0] == ("profile_0", 2)

    def test_threshold_edges(self):
        m = np.full((4, 3), 0.9)
        assert all(v == 0 for v in em.sei_hits(m).counts.values())
        assert all(v == 0 for v in em.sei_hits(np.ones((3, 2)), threshold=1.0).counts.values())
        assert all(v == 5 for v in em.sei_hits(np.full((5, 3), 0.95)).counts.values())

    def test_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n, p = int(rng.integers(1, 51)), int(rng.integers(1, 21))
            m = rng.uniform(0.8, 1.0, (n, p))
            m[rng.random((n, p)) < 0.1] = 0.9
            r = em.sei_hits(m)
            for j in range(p):
                count = 0
                for i in range(n):
                    if m[i, j] > 0.9:
                        count += 1
                assert r.counts[f"profile_{j}"] == count
            assert [c for _, c in r.ranking] == sorted(r.counts.values(), reverse=True)

    def test_out_of_range(self):
        with pytest.raises(em.PredictionRangeError) as exc:
            em.sei_hits([[0.5, 0.2], [0.1, 1.2]])
        assert (exc.value.row, exc.value.col) == (1, 1)
        with pytest.raises(em.PredictionRangeError):
            em.sei_hits([[np.nan]])

    def test_labels(self, tmp_path):
        (tmp_path / "l.txt").write_text("CTCF\nDNase\n")
        r = em.sei_hits([[0.95, 0.99]], labels=em.read_labels(tmp_path / "l.txt"))
        assert r.counts == {"CTCF": 1, "DNase": 1}
        with pytest.raises(ValueError):
            em.sei_hits([[0.95, 0.99]], labels=["a"])

    def test_embedding_distance(self, tmp_path):
        rng = np.random.default_rng(0)
        a, b = rng.standard_normal((10_000, 8)), rng.standard_normal((10_000, 8))
        em.save_matrix(tmp_path / "a.ddmx", a)
        assert em.sei_embedding_distance(tmp_path / "a.ddmx", tmp_path / "a.ddmx") == 0
        assert em.sei_embedding_distance(a, b) < 0.05
        s = 0.5
        assert em.sei_embedding_distance(a, b + s) == pytest.approx(8 * s * s, rel=0.05)


class TestMatrixIO:
    def test_ddmx_roundtrip_and_layout(self, tmp_path):
        m = np.arange(6, dtype=np.float64).reshape(2, 3) / 7
        raw = em.dumps_matrix(m)
        assert raw[:4] == b"DDMX"
        assert struct.unpack_from("<HBBQQ", raw, 4) == (1, 1, 0, 2, 3)
        assert len(raw) == 24 + 6 * 8
        np.testing.assert_array_equal(em.loads_matrix(raw), m)
        m32 = em.loads_matrix(em.dumps_matrix(m, np.float32))
        assert m32.dtype == np.float32
        em.save_matrix(tmp_path / "m.ddmx", m)
        np.testing.assert_array_equal(em.load_matrix(tmp_path / "m.ddmx"), m)

    def test_ddmx_corrupt(self):
        raw = em.dumps_matrix(np.ones((2, 2)))
        for bad in (raw[:10], raw[:-1], b"XXXX" + raw[4:], raw + b"\0"):
            with pytest.raises(em.MatrixFormatError):
                em.loads_matrix(bad)

    def test_csv_roundtrip(self, tmp_path):
        m = np.random.default_rng(0).standard_normal((5, 3))
        em.save_matrix(tmp_path / "m.csv", m)
        np.testing.assert_array_equal(em.load_matrix(tmp_path / "m.csv"), m)


class TestPlots:
    def test_empty_histogram_svg(self):
        h = em.motif_histogram([], "TATAAA", 10, length=64)
        root = ET.fromstring(em.histogram_svg({"real": h}))
        assert root.tag.endswith("svg")

    def test_two_series_svg(self, tmp_path):
        series = {"vae": ([0, 1, 2], [3.0, 2.0, 1.5]), "random": ([0, 1, 2], [9.0, 9.5, 9.1])}
        em.write_series_csv(tmp_path / "c.csv", series)
        back = em.read_series_csv(tmp_path / "c.csv")
        assert back == {k: (list(map(float, x)), list(map(float, y))) for k, (x, y) in series.items()}
        root = ET.fromstring(em.line_plot_svg(back, "FReD"))
        assert len([e for e in root.iter() if e.tag.endswith("polyline")]) == 2

    def test_series_csv_lossless(self, tmp_path):
        x = list(np.random.default_rng(1).standard_normal(20))
        em.write_series_csv(tmp_path / "s.csv", {"a": (x, x)})
        assert em.read_series_csv(tmp_path / "s.csv")["a"][0] == x

    def test_histogram_csv_roundtrip(self, tmp_path):
        seqs = random_sequences(50, 128, np.random.default_rng(2))
        h = em.motif_histogram(seqs, "TATA", 8)
        em.write_histogram_csv(tmp_path / "h.csv", {"real": h, "gen": h})
        centers, cols = em.read_histogram_csv(tmp_path / "h.csv")
        np.testing.assert_array_equal(centers, h.centers)
        np.testing.assert_array_equal(cols["gen"], h.counts)


@pytest.fixture(scope="module")
def encoder():
    from latentdna.vae import VAE, VaeConfig
    cfg = VaeConfig(sequence_length=32, ladder=(8,), conv2d_channels=(4,), latent_channels=2,
                    latent_height=4, latent_width=8)
    return VAE(cfg, seed=0)


class TestFred:
    def test_same_set_zero(self, encoder):
        seqs = random_sequences(80, 32, np.random.default_rng(0))
        r = em.fred(seqs, seqs, encoder)
        assert r.value == 0.0 and r.dim == 64 and r.warnings == ()

    def test_random_far_from_constant(self, encoder):
        rng = np.random.default_rng(1)
        a = random_sequences(100, 32, rng)
        b = random_sequences(100, 32, rng)
        at_rich = ["".join(rng.choice(list("AT"), 32)) for _ in range(100)]
        assert float(em.fred(a, b, encoder)) < float(em.fred(a, at_rich, encoder))

    def test_length_mismatch_and_undersized(self, encoder):
        with pytest.raises(ValueError):
            em.fred(["A" * 31], ["A" * 32], encoder)
        r = em.fred(random_sequences(5, 32, np.random.default_rng(2)),
                    random_sequences(6, 32, np.random.default_rng(3)), encoder)
        assert len(r.warnings) == 2
