import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from latentdna import cli
from latentdna import evalmetrics as em
from latentdna.config import ConfigError, RunConfig, env_name, parse_text
from latentdna.nnkernel import checkpoint
from latentdna.seqcodec import read_fasta
from latentdna.synthetic import planted_motif_corpus

TINY_CONFIG = """\
# tiny pipeline for fast tests
vae.length = 32
data.window = 32
vae.ladder = 8
vae.conv2d_channels = 4
vae.latent_channels = 2
vae.latent_height = 4
vae.latent_width = 8
vae.batch = 8
diff.ladder = 8
diff.resnets = 1
diff.attention_down = 0
diff.attention_up = 0
diff.groups = 4
diff.heads = 2
diff.head_dim = 4
diff.T = 20
diff.batch = 8
"""


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def work(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for key in list(__import__("os").environ):
        if key.startswith("DDK_"):
            monkeypatch.delenv(key)
    seqs = planted_motif_corpus(40, 32, center=16, jitter=2, seed=0)
    (tmp_path / "in.fa").write_text("".join(f">p{i}\n{s}\n" for i, s in enumerate(seqs)))
    (tmp_path / "tiny.cfg").write_text(TINY_CONFIG)
    return tmp_path


def pipeline(prefix="", count=4):
    c = ("--config", "tiny.cfg", "--log-level", "WARNING")
    assert run("ingest", "--fasta", "in.fa", "--output", f"{prefix}t.ddtb", "--timestamp", "2024-01-01", *c) == 0
    assert run("train-vae", "--table", f"{prefix}t.ddtb", "--epochs", 2, "--output", f"{prefix}vae.ddkp", *c) == 0
    assert run("encode-latents", "--table", f"{prefix}t.ddtb", "--vae", f"{prefix}vae.ddkp",
               "--output", f"{prefix}z.ddkp", *c) == 0
    assert run("train-diff", "--latents", f"{prefix}z.ddkp", "--epochs", 2, "--output", f"{prefix}diff.ddkp", *c) == 0
    assert run("generate", "--diffusion", f"{prefix}diff.ddkp", "--vae", f"{prefix}vae.ddkp", "--count", count,
               "--output", f"{prefix}gen.fa", *c) == 0


class TestConfig:
    def test_defaults_and_layers(self):
        cfg = RunConfig.build("vae.lr = 0.01\nseed = 3\n", {"seed": "5"}, {env_name("vae.batch"): "16"})
        assert cfg["vae.lr"] == 0.01 and cfg["seed"] == 5 and cfg["vae.batch"] == 16
        assert cfg.vae.latent_shape == (8, 8, 8) and cfg.unet.sample_shape == (8, 8, 8)
        assert env_name("diff.T") == "DDK_DIFF_T"

    def test_env_beats_file(self):
        cfg = RunConfig.build("seed = 3\n", None, {"DDK_SEED": "9"})
        assert cfg["seed"] == 9

    def test_paper_preset(self):
        cfg = RunConfig.build("preset = paper\n", environ={})
        assert cfg.vae.latent_shape == (16, 16, 16) and cfg["vae.lr"] == 1e-4 and cfg["vae.batch"] == 128
        assert cfg["diff.lr"] == 5e-5 and cfg["diff.batch"] == 256 and cfg.unet.ladder == (256, 256, 512, 512)

    def test_dump_roundtrip(self):
        cfg = RunConfig.build(TINY_CONFIG, environ={})
        assert RunConfig.build(cfg.dumps(), environ={}).values == cfg.values

    @pytest.mark.parametrize("text", ["nonsense.key = 1", "vae.lr = fast", "no equals sign", "vae.latent_height = 3",
                                      "precision = float16", "preset = huge"])
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            RunConfig.build(text, environ={})

    def test_comments(self):
        assert parse_text("a = 1 # trailing\n# full\n\nb=2") == {"a": "1", "b": "2"}


class TestPipeline:
    def test_end_to_end_smoke(self, work):
        pipeline()
        recs = read_fasta("gen.fa")
        assert len(recs) == 4 and all(len(s) == 32 for _, s in recs)
        man = json.loads((work / "gen.fa.manifest.json").read_text())
        assert man["seed"] == 0 and man["config"]["vae.length"] == "32"
        assert {i["path"] for i in man["inputs"]} >= {"diff.ddkp", "vae.ddkp"}
        assert all(len(i["sha256"]) == 64 for i in man["inputs"])
        assert "wall_time_s" in man
        assert (work / "vae.ddkp.log.csv").read_text().startswith("epoch,split,total,recon,kl\n")
        assert checkpoint.load(work / "z.ddkp")["latents"].shape == (32, 2, 4, 8)

    def test_generate_zero(self, work):
        pipeline(count=0)
        assert (work / "gen.fa").read_text() == ""

    def test_overwrite_refused_then_forced(self, work, capsys):
        assert run("ingest", "--fasta", "in.fa", "--output", "t.ddtb", "--config", "tiny.cfg") == 0
        before = (work / "t.ddtb").read_bytes()
        assert run("ingest", "--fasta", "in.fa", "--output", "t.ddtb", "--config", "tiny.cfg") == cli.EXIT_EXISTS
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["exit_code"] == cli.EXIT_EXISTS and err["error"] == "exists"
        assert (work / "t.ddtb").read_bytes() == before
        assert run("ingest", "--fasta", "in.fa", "--output", "t.ddtb", "--config", "tiny.cfg", "--force") == 0

    def test_stamped_checkpoints(self, work):
        run("ingest", "--fasta", "in.fa", "--output", "t.ddtb", "--config", "tiny.cfg")
        assert run("train-vae", "--table", "t.ddtb", "--epochs", 2, "--output", "v.ddkp", "--config", "tiny.cfg",
                   "--set", "vae.stamps=0,2", "--log-level", "WARNING") == 0
        assert (work / "v.epoch00000.ddkp").is_file() and (work / "v.epoch00002.ddkp").is_file()


class TestExitCodes:
    def test_missing_file(self, work, capsys):
        assert run("train-vae", "--table", "nope.ddtb", "--output", "v.ddkp") == cli.EXIT_MISSING
        assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "missing_file"

    def test_usage(self, work, capsys):
        assert run("bogus") == cli.EXIT_USAGE
        assert run("ingest", "--fasta", "in.fa", "--output", "x", "--unknown-flag") == cli.EXIT_USAGE
        line = capsys.readouterr().err.strip().splitlines()[-1]
        assert json.loads(line)["exit_code"] == 2

    def test_config_mismatch(self, work):
        run("ingest", "--fasta", "in.fa", "--output", "t.ddtb", "--config", "tiny.cfg")
        # desk preset expects length-256 sequences
        assert run("train-vae", "--table", "t.ddtb", "--output", "v.ddkp") == cli.EXIT_CONFIG
        assert run("ingest", "--fasta", "in.fa", "--output", "u.ddtb", "--set", "vae.lr=abc") == cli.EXIT_CONFIG

    def test_data_error(self, work):
        (work / "bad.fa").write_text(">x\nACXT\n")
        assert run("ingest", "--fasta", "bad.fa", "--output", "t.ddtb", "--config", "tiny.cfg") == cli.EXIT_DATA

    def test_help_documents_codes(self, capsys):
        assert run("--help") == 0
        out = capsys.readouterr().out
        for code in cli.EXIT_CODES:
            assert f"  {code}  " in out


class TestEvalCommands:
    def test_eval_fred_same_set(self, work, capsys):
        pipeline()
        capsys.readouterr()
        assert run("eval-fred", "--set-a", "in.fa", "--set-b", "in.fa", "--encoder", "vae.ddkp",
                   "--output", "f.json", "--log-level", "ERROR") == 0
        assert json.loads(capsys.readouterr().out)["fred"] == 0.0
        assert json.loads((work / "f.json").read_text())["fred"] == 0.0

    def test_eval_motif(self, work, capsys):
        assert run("eval-motif", "--fasta", "real=in.fa", "copy=in.fa", "--pattern", "TATAAA",
                   "--output", "m.csv") == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["tv_distance"] == {"real|copy": 0.0} and doc["modal_bin"]["real"] == 0
        ET.parse(work / "m.svg")
        assert run("plot-data", "--input", "m.csv", "--kind", "histogram", "--output", "h.svg") == 0
        ET.parse(work / "h.svg")

    def test_sei_commands(self, work, capsys):
        em.save_matrix(work / "p.ddmx", np.array([[0.95, 0.10], [0.91, 0.89]]))
        (work / "labels.txt").write_text("A\nB\n")
        assert run("eval-sei-hits", "--predictions", "p.ddmx", "--labels", "labels.txt", "--output", "h.csv") == 0
        assert (work / "h.csv").read_text() == "profile,hits\nA,2\nB,0\n"
        em.save_matrix(work / "bad.csv", np.array([[1.5]]))
        assert run("eval-sei-hits", "--predictions", "bad.csv", "--output", "h2.csv") == cli.EXIT_DATA
        rng = np.random.default_rng(0)
        em.save_matrix(work / "e.csv", rng.standard_normal((50, 3)))
        capsys.readouterr()
        assert run("eval-sei-dist", "--set-a", "e.csv", "--set-b", "e.csv") == 0
        assert json.loads(capsys.readouterr().out)["distance"] == 0.0

    def test_plot_series_and_log(self, work):
        em.write_series_csv(work / "c.csv", {"model": ([0, 1], [5.0, 3.0]), "random": ([0, 1], [9.0, 9.0])})
        assert run("plot-data", "--input", "c.csv", "--output", "c.svg") == 0
        root = ET.parse(work / "c.svg").getroot()
        assert len([e for e in root.iter() if e.tag.endswith("polyline")]) == 2
        (work / "log.csv").write_text("epoch,split,total,recon,kl\n1,train,3.0,2.0,1.0\n1,validation,2.5,2,1\n")
        assert run("plot-data", "--input", "log.csv", "--kind", "log", "--output", "l.svg") == 0
