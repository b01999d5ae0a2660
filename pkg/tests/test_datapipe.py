import logging

import numpy as np
import pytest

from latentdna import datapipe as dp
from latentdna.seqcodec import NucleotideSequence
from latentdna.synthetic import random_sequences


def test_window_boundary_exact():
    seq = "A" * 2048
    assert dp.extract_window(seq, 1024) == seq


def test_window_out_of_bounds():
    with pytest.raises(dp.WindowError):
        dp.extract_window("A" * 2048, 1000)
    with pytest.raises(dp.WindowError):
        dp.extract_window("A" * 2048, 1025)


def test_window_places_tss_at_centre():
    src = "A" * 1024 + "C" + "G" * 1023 + "T" * 500
    out = dp.extract_window(src, 1024)
    assert len(out) == 2048 and out[1024] == "C" and out[1023] == "A"
    rng = np.random.default_rng(0)
    for _ in range(20):
        pre, post = int(rng.integers(0, 40)), int(rng.integers(0, 40))
        src = "A" * (1024 + pre) + "C" + "G" * (1023 + post)
        assert dp.extract_window(src, 1024 + pre)[1024] == "C"


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


META_HEADER = "pid\tspecies\tsample_name\texpression_value\tgene_description\n"


@pytest.fixture
def toy_files(tmp_path):
    rng = np.random.default_rng(1)
    seqs = random_sequences(5, 16, rng)
    fasta = "".join(f">P{i} some text\n{s}\n" for i, s in enumerate(seqs))
    meta = META_HEADER + "".join(
        f"P{i}\t{'sp1' if i < 3 else 'sp2'}\tcell{i}\t{i * 1.5}\tgene{i}\n" for i in range(5)
    )
    meta += "P0\tsp1\tcell9\t2.25\tgene0\n"
    return _write(tmp_path, "a.fa", fasta), _write(tmp_path, "a.tsv", meta), seqs


def test_ingest_join_and_histogram(toy_files):
    fa, meta, seqs = toy_files
    table = dp.ingest([fa], [meta], window=16)
    assert len(table) == 5
    summary = table.summary()
    assert summary["species_counts"] == {"sp1": 3, "sp2": 2}
    assert summary["promoters"] == 5 and summary["genes"] == 5
    assert table.records[0].expression_samples == (("cell0", 0.0), ("cell9", 2.25))
    assert table.records[0].tss_offset == 8
    assert [r.sequence for r in table.records] == seqs
    assert len(table.provenance.sources) == 2


def test_ingest_dedup_keeps_first(tmp_path):
    fa = _write(tmp_path, "d.fa", ">a\nACGT\n>b\nACGT\n>c\nTTTT\n")
    table = dp.ingest([fa], window=4)
    assert [r.pid for r in table.records] == ["a", "c"]


def test_ingest_empty(tmp_path):
    fa = _write(tmp_path, "e.fa", "")
    table = dp.ingest([fa], window=4)
    assert len(table) == 0
    assert table.summary()["promoters"] == 0 and table.summary()["species"] == 0
    assert len(dp.ingest([], window=4)) == 0


def test_ingest_pid_collision(tmp_path):
    fa = _write(tmp_path, "c.fa", ">a\nACGT\n>a\nTTTT\n")
    with pytest.raises(dp.DataIntegrityError):
        dp.ingest([fa], window=4)


def test_ingest_windows_and_skips(tmp_path, caplog):
    src = "G" * 10 + "C" + "A" * 10
    fa = _write(tmp_path, "w.fa", f">ok tss=10\n{src}\n>bad tss=2\n{src}\n>short\nACG\n")
    with caplog.at_level(logging.WARNING):
        table = dp.ingest([fa], window=8)
    assert [r.pid for r in table.records] == ["ok"]
    assert table.records[0].sequence == "GGGGCAAA"
    assert "bad" in caplog.text and "short" in caplog.text


def test_malformed_metadata_row_skipped(tmp_path, caplog):
    fa = _write(tmp_path, "m.fa", ">a\nACGT\n")
    meta = _write(tmp_path, "m.tsv", META_HEADER + "a\tsp\tcellA\tnot-a-number\tg\na\tsp\tx\n")
    with caplog.at_level(logging.WARNING):
        table = dp.ingest([fa], [meta], window=4)
    assert table.records[0].expression_samples == ()
    assert table.records[0].species == ""
    assert "row skipped" in caplog.text


def test_missing_metadata_header(tmp_path):
    meta = _write(tmp_path, "h.tsv", "a\tsp\tx\t1\tg\n")
    with pytest.raises(dp.DataIntegrityError):
        dp.read_metadata(meta)


def test_filter_species(toy_files):
    fa, meta, _ = toy_files
    table = dp.ingest([fa], [meta], window=16)
    assert dp.filter_species(table, {"sp1", "sp2"}) == table
    assert len(dp.filter_species(table, set())) == 0
    sub = dp.filter_species(table, {"sp1"})
    assert [r.pid for r in sub.records] == ["P0", "P1", "P2"]
    assert sub.provenance == table.provenance


def _random_table(n, seed=0, length=37):
    rng = np.random.default_rng(seed)
    recs = []
    for i, s in enumerate(random_sequences(n, length, rng)):
        if i % 7 == 0:
            s = NucleotideSequence(s[:5] + "N" + s[6:])
        samples = tuple((f"s{j}é", float(rng.standard_normal())) for j in range(int(rng.integers(0, 3))))
        recs.append(dp.PromoterRecord(f"P{i}", f"sp{i % 3}", s, length // 2, samples, f"gene {i}" * (i % 2)))
    return dp.DatasetTable(tuple(recs), dp.Provenance((("x.fa", "ab" * 32),), "2023-08-01T00:00:00+00:00"))


def test_split_fractions_and_determinism():
    t = _random_table(10)
    s = dp.split(t, 0.2, seed=3)
    assert s.splits.count("train") == 8 and s.splits.count("validation") == 2
    assert dp.split(t, 0.2, seed=3).splits == s.splits
    assert set(dp.split(t, 0.0, seed=3).splits) == {"train"}


def test_persist_roundtrip(tmp_path):
    t = dp.split(_random_table(100), 0.25, seed=1)
    path = tmp_path / "t.ddtb"
    dp.persist(t, path)
    back = dp.load(path)
    assert back == t
    assert path.read_bytes()[:4] == b"DDTB"


def test_persist_empty(tmp_path):
    t = dp.DatasetTable()
    dp.persist(t, tmp_path / "e.ddtb")
    assert dp.load(tmp_path / "e.ddtb") == t


def test_truncated_table(tmp_path):
    raw = dp.dumps_table(_random_table(5))
    for cut in (3, 20, len(raw) // 2, len(raw) - 1):
        with pytest.raises(dp.CorruptTableError):
            dp.loads_table(raw[:cut])
