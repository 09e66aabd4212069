"""End-to-end runs of the command-line subcommands on a tiny synthetic corpus"""

import argparse

import pandas as pd
import pytest

from src.cli import build_parser, main

TINY_MODEL = ["n_src=1", "n_mt=1", "n_pe=1", "d_model=8", "num_heads=2", "d_ff=16", "max_len=40",
              "token_budget=100", "warmup_steps=2", "eval_interval=1", "dev_decode_limit=2",
              "show_progress=false"]


def settings(*extra):
    args = []
    for item in TINY_MODEL + list(extra):
        args += ["--set", item]
    return args


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Synthetic splits, a merge table and one two-step training run"""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert run("gen-data", "--out-dir", data, "--n", 20, "--n-test", 4, "--seed", 3,
               "--set", "synth_min_words=2", "--set", "synth_max_words=3") == 0
    assert run("learn-bpe", "--corpus", data / "train", "--merges", 40, "--out", root / "bpe.txt") == 0
    assert run("train", "--train", data / "train", "--dev", data / "dev", "--bpe", root / "bpe.txt",
               "--out", root / "run_a", *settings("max_steps=2")) == 0
    return root


class TestDataAndBpe:
    def test_gen_data_splits(self, workspace):
        data = workspace / "data"
        counts = {name: len((data / f"{name}.pe").read_text(encoding="utf-8").splitlines())
                  for name in ("train", "dev", "test")}
        assert counts == {"train": 16, "dev": 4, "test": 4}

    def test_domain_shift_splits(self, tmp_path):
        assert run("gen-data", "--out-dir", tmp_path, "--n", 10, "--n-test", 0, "--domain-shift") == 0
        assert (tmp_path / "indomain_train.src").exists()
        assert not (tmp_path / "test.src").exists()

    def test_merge_table_written(self, workspace, capsys):
        assert run("learn-bpe", "--corpus", workspace / "data" / "dev", "--merges", 5,
                   "--out", workspace / "small_bpe.txt") == 0
        assert "Learned 5 merges" in capsys.readouterr().out


class TestTraining:
    def test_checkpoints_and_effective_config(self, workspace):
        run_dir = workspace / "run_a"
        assert sorted(p.name for p in run_dir.glob("*.npz")) == ["step_000001.npz", "step_000002.npz"]
        effective = (run_dir / "run_config.txt").read_text(encoding="utf-8")
        assert "d_model=8\n" in effective
        assert list(pd.read_csv(run_dir / "metrics.tsv", sep="\t")["step"]) == [0, 1, 2]

    def test_rerun_is_byte_identical(self, workspace):
        data = workspace / "data"
        assert run("train", "--train", data / "train", "--dev", data / "dev", "--bpe",
                   workspace / "bpe.txt", "--out", workspace / "run_b", *settings("max_steps=2")) == 0
        for name in ("step_000001.npz", "step_000002.npz"):
            assert (workspace / "run_a" / name).read_bytes() == (workspace / "run_b" / name).read_bytes()

    def test_finetune(self, workspace):
        data = workspace / "data"
        assert run("finetune", "--checkpoint", workspace / "run_a" / "step_000002.npz",
                   "--train", data / "dev", "--bpe", workspace / "bpe.txt",
                   "--out", workspace / "tuned", *settings("max_steps=1")) == 0
        assert (workspace / "tuned" / "step_000001.npz").exists()

    def test_finetune_fingerprint_mismatch(self, workspace, capsys):
        data = workspace / "data"
        code = run("finetune", "--checkpoint", workspace / "run_a" / "step_000002.npz",
                   "--train", data / "dev", "--bpe", workspace / "bpe.txt",
                   "--out", workspace / "mismatch", *settings("max_steps=1", "d_ff=32"))
        assert code == 1
        assert "error: FingerprintMismatchError" in capsys.readouterr().err


class TestDecodingPipeline:
    def test_average_decode_report(self, workspace, capsys):
        data = workspace / "data"
        avg = workspace / "avg.npz"
        assert run("avg-checkpoints", "--dir", workspace / "run_a", "--best", 2, "--out", avg) == 0
        assert avg.exists()

        hyp = workspace / "hyp.txt"
        group = f"{workspace / 'run_a' / 'step_000001.npz'},{workspace / 'run_a' / 'step_000002.npz'}"
        assert run("decode", "--models", avg, "--models", group, "--corpus", data / "test",
                   "--bpe", workspace / "bpe.txt", "--beam", 2, "--max-len", 6, "--out", hyp) == 0
        assert len(hyp.read_text(encoding="utf-8").splitlines()) == 4
        assert "raw MT" in capsys.readouterr().out

        assert run("evaluate", "--hyp", hyp, "--ref", data / "test.pe", "--mt", data / "test.mt") == 0
        out = capsys.readouterr().out
        assert "raw MT" in out and "hypothesis" in out

        report = workspace / "report" / "edits"
        assert run("edit-report", "--mt", data / "test.mt", "--ref", data / "test.pe",
                   "--hyp", f"APE={hyp}", "--out", report) == 0
        assert (workspace / "report" / "edits.tsv").exists()
        assert "%Su" in capsys.readouterr().out

    def test_ablate(self, workspace):
        data = workspace / "data"
        table = workspace / "ablation.tsv"
        assert run("ablate", "--train", data / "train", "--dev", data / "dev", "--bpe",
                   workspace / "bpe.txt", "--triples", "1-1-1", "--out", table,
                   *settings("max_steps=1")) == 0
        assert list(pd.read_csv(table, sep="\t")["N_src-N_mt-N_pe"]) == ["1-1-1"]


class TestEvaluateAndErrors:
    def test_identity_scores(self, tmp_path, capsys):
        text = tmp_path / "same.txt"
        text.write_text("the cat sat on the mat\na dog ran\n", encoding="utf-8")
        assert run("evaluate", "--hyp", text, "--ref", text) == 0
        out = capsys.readouterr().out
        assert "BLEU 100.00" in out
        assert "TER   0.00" in out

    def test_split_punct(self, tmp_path, capsys):
        hyp, ref = tmp_path / "hyp.txt", tmp_path / "ref.txt"
        hyp.write_text("hello , world !\n", encoding="utf-8")
        ref.write_text("hello, world!\n", encoding="utf-8")
        assert run("evaluate", "--hyp", hyp, "--ref", ref, "--split-punct") == 0
        assert "TER   0.00" in capsys.readouterr().out

    def test_unknown_config_key(self, tmp_path, capsys):
        code = run("train", "--train", tmp_path / "x", "--bpe", tmp_path / "y", "--out", tmp_path,
                   "--set", "layers=3")
        assert code == 1
        err = capsys.readouterr().err
        assert "error: ConfigError" in err
        assert "unknown key 'layers'" in err

    def test_missing_file(self, tmp_path, capsys):
        assert run("evaluate", "--hyp", tmp_path / "none.txt", "--ref", tmp_path / "none.txt") == 1
        assert "FileNotFoundError" in capsys.readouterr().err

    def test_line_count_mismatch(self, tmp_path, capsys):
        (tmp_path / "a.txt").write_text("x\ny\n", encoding="utf-8")
        (tmp_path / "b.txt").write_text("x\n", encoding="utf-8")
        assert run("evaluate", "--hyp", tmp_path / "a.txt", "--ref", tmp_path / "b.txt") == 1

    def test_every_subcommand_registered(self):
        action = next(a for a in build_parser()._actions if isinstance(a, argparse._SubParsersAction))
        commands = action.choices
        assert set(commands) == {"learn-bpe", "gen-data", "train", "finetune", "decode",
                                 "avg-checkpoints", "evaluate", "edit-report", "ablate"}

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit):
            main(["translate"])
