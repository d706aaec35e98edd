"""Config parsing and the command-line tool, including its exit codes."""
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from nes2net import cli, profiler
from nes2net.config import ConfigError, parse_config
from nes2net.evaluation import ScoreSet, Trial, read_scores, summarize, write_scores
from nes2net.models import build_model, canonical_config
from nes2net.training import Checkpoint, average_checkpoints

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

TINY64 = (CONFIGS / "toy_tiny.cfg").read_text().replace("pool_bottleneck = 4",
                                                         "pool_bottleneck = 4\ndtype = f64")


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# -- config ------------------------------------------------------------------

def test_parse_all_sections():
    cfg = parse_config((CONFIGS / "toy_easy.cfg").read_text())
    assert cfg.model.variant == "nes2net" and cfg.model.input_dim == 64
    assert cfg.train.epochs == 10 and cfg.train.focal_alpha == 0.25
    assert cfg.data.frames == 50 and cfg.data.dim == 64
    assert cfg.eval.c_fa == 10.0
    assert cfg.data_for(7).seed == 7


def test_parse_types_and_comments():
    cfg = parse_config("[model]\nvariant = res2net_dr  # inline\ninput_dim=64\nreduced_dim=16\n"
                       "[train]\nclass_weights = 1, 4.5\n")
    assert cfg.model.reduced_dim == 16 and cfg.train.class_weights == (1.0, 4.5)
    assert cfg.data is None
    with pytest.raises(ConfigError):
        cfg.data_for(0)


@pytest.mark.parametrize("text", [
    "[model]\nbogus = 1\n",
    "[train]\nepochs = 2\n",
    "[model]\ns1 = eight\n",
    "[model]\n[data]\nseed = 4\n",
    "[model]\n[extra]\n",
    "[model]\ninput_dim = 100\n",
    "[model]\n[eval]\np_target = 2\n",
    "[model]\n[train]\nclass_weights = 1\n",
    "no header\n",
])
def test_parse_rejects(text):
    with pytest.raises(ConfigError):
        parse_config(text)


@pytest.mark.parametrize("name", ["nes2net", "nes2net_x", "res2net_dr", "res2net_wodr"])
def test_shipped_canonical_configs(name):
    cfg = parse_config((CONFIGS / f"{name}.cfg").read_text())
    assert cfg.model == canonical_config(name)


# -- profile -----------------------------------------------------------------

def test_profile_table_and_verify(capsys):
    code, out, err = run(["profile", CONFIGS / "res2net_dr.cfg", "--verify"], capsys)
    assert code == 0
    assert "131,200" in out and "verify" in err


def test_profile_tsv_matches_table(capsys):
    code, tsv, _ = run(["profile", CONFIGS / "nes2net.cfg", "--format", "tsv"], capsys)
    assert code == 0
    rows = profiler.parse_tsv(tsv)
    _, table, _ = run(["profile", CONFIGS / "nes2net.cfg"], capsys)
    for r in rows:
        line = next(l for l in table.splitlines() if l.startswith(r.layer + " "))
        assert f"{r.params:,}" in line and f"{r.macs:,}" in line
    report = profiler.profile(build_model(canonical_config("nes2net")), 200)
    assert rows == report.rows


def test_profile_usage_errors(capsys, tmp_path):
    assert run(["profile", CONFIGS / "nes2net.cfg", "--frames", "0"], capsys)[0] == 2
    assert run(["profile", tmp_path / "missing.cfg"], capsys)[0] == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("[model]\nvariant = nope\n")
    code, _, err = run(["profile", bad], capsys)
    assert code == 2 and "variant" in err


def test_profile_verify_failure_exits_one(capsys, monkeypatch):
    real = profiler.analytic_rows

    def skewed(cfg, frames):
        rows = real(cfg, frames)
        rows[0] = profiler.CostRow(rows[0].layer, rows[0].params + 1, rows[0].macs)
        return rows
    monkeypatch.setattr(profiler, "analytic_rows", skewed)
    code, _, err = run(["profile", CONFIGS / "nes2net.cfg", "--verify"], capsys)
    assert code == 1 and "mismatch" in err


# -- gradcheck ---------------------------------------------------------------

def test_gradcheck_pass_and_fault(capsys, tmp_path):
    cfg = tmp_path / "tiny64.cfg"
    cfg.write_text(TINY64)
    code, out, _ = run(["gradcheck", cfg, "--frames", "6"], capsys)
    assert code == 0 and "FAIL" not in out
    code, out, err = run(["gradcheck", cfg, "--frames", "6", "--inject-fault", "conv1d"], capsys)
    assert code == 1
    assert "trunk.nested.0.conv_in" in err and "FAIL" in out


def test_gradcheck_usage(capsys, tmp_path):
    cfg = tmp_path / "tiny64.cfg"
    cfg.write_text(TINY64)
    assert run(["gradcheck", cfg, "--eps", "1e-2"], capsys)[0] == 2
    assert run(["gradcheck", cfg, "--eps", "1e-8"], capsys)[0] == 2
    assert run(["gradcheck", CONFIGS / "toy_tiny.cfg"], capsys)[0] == 2          # f32
    assert run(["gradcheck", cfg, "--max-params", "10"], capsys)[0] == 2


# -- train / score / eval / avg ----------------------------------------------

@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert cli.main(["train", str(CONFIGS / "toy_tiny.cfg"), "--out", str(out / "a"), "--seed", "4"]) == 0
    assert cli.main(["train", str(CONFIGS / "toy_tiny.cfg"), "--out", str(out / "b"), "--seed", "4"]) == 0
    return out


def test_train_artifacts_and_determinism(trained):
    a, b = trained / "a", trained / "b"
    assert (a / "train.log").read_bytes() == (b / "train.log").read_bytes()
    assert (a / "best.ckpt").read_bytes() == (b / "best.ckpt").read_bytes()
    lines = (a / "train.log").read_text().splitlines()
    assert lines[0] == "epoch\tlr\ttrain_loss\tdev_eer" and len(lines) == 4
    assert {p.name for p in a.iterdir()} == {"train.log", "best.ckpt", "top1.ckpt", "top2.ckpt"}


def test_train_missing_data_section(capsys, tmp_path):
    cfg = tmp_path / "nodata.cfg"
    cfg.write_text("[model]\nvariant = nes2net\ninput_dim = 16\ns1 = 2\ns2 = 2\nse_ratio = 4\n")
    assert run(["train", cfg, "--out", tmp_path / "o"], capsys)[0] == 2


def test_train_divergence_keeps_log(capsys, tmp_path):
    cfg = tmp_path / "boom.cfg"
    cfg.write_text((CONFIGS / "toy_tiny.cfg").read_text().replace("lr = 1e-2", "lr = 1e30\nweight_decay = 0"))
    code, _, err = run(["train", cfg, "--out", tmp_path / "o"], capsys)
    assert code == 1 and "diverged" in err
    assert (tmp_path / "o" / "train.log").exists()


def test_score_eval_parity(capsys, trained, tmp_path):
    scores = tmp_path / "s.txt"
    code, _, _ = run(["score", trained / "a" / "best.ckpt", CONFIGS / "toy_tiny.cfg",
                      "--out", scores, "--seed", "4"], capsys)
    assert code == 0
    s = read_scores(scores)
    assert len(s) == 32
    code, out, _ = run(["eval", scores], capsys)
    assert code == 0
    assert out == cli.format_metrics(summarize(s))
    values = dict(line.split("\t") for line in out.splitlines())
    assert float(values["eer"]) == summarize(s)["eer"]


def test_score_features_file(capsys, trained, tmp_path):
    rng = np.random.default_rng(0)
    feats = tmp_path / "trials.npz"
    np.savez(feats, features=rng.standard_normal((4, 16, 12)), keys=np.array(["bonafide", "spoof"] * 2),
             utt_ids=np.array(["a", "b", "c", "d"]), attacks=np.array(["-", "X", "-", "Y"]))
    out = tmp_path / "s.txt"
    assert run(["score", trained / "a" / "best.ckpt", CONFIGS / "toy_tiny.cfg", "--features", feats,
                "--out", out], capsys)[0] == 0
    assert [t.utt_id for t in read_scores(out).trials] == ["a", "b", "c", "d"]


def test_score_schema_mismatch(capsys, trained, tmp_path):
    code, _, err = run(["score", trained / "a" / "best.ckpt", CONFIGS / "toy_easy.cfg",
                        "--out", tmp_path / "s.txt"], capsys)
    assert code == 1 and "does not match" in err


def test_eval_separable_and_flat(capsys, tmp_path):
    sep = ScoreSet([Trial("b1", "bonafide", "-", 2.0), Trial("b2", "bonafide", "-", 3.0),
                    Trial("s1", "spoof", "A01", -1.0), Trial("s2", "spoof", "A02", -2.0)])
    path = tmp_path / "sep.txt"
    write_scores(sep, path)
    code, out, _ = run(["eval", path], capsys)
    assert code == 0 and out.startswith("eer\t0.0\n")
    flat = ScoreSet([Trial(t.utt_id, t.key, t.attack, 0.0) for t in sep.trials])
    write_scores(flat, path)
    code, out, _ = run(["eval", path], capsys)
    assert out.startswith("eer\t0.5\n") and "cllr\t1.0\n" in out


def test_eval_errors(capsys, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("u1 - bonafide 0.1\nu2 A01 spoof\n")
    code, _, err = run(["eval", bad], capsys)
    assert code == 2 and "bad.txt:2" in err
    one_class = tmp_path / "one.txt"
    one_class.write_text("u1 - bonafide 0.1\n")
    assert run(["eval", one_class], capsys)[0] == 1


def test_avg_parity(capsys, trained, tmp_path):
    paths = [trained / "a" / n for n in ("top1.ckpt", "top2.ckpt", "best.ckpt")]
    out = tmp_path / "avg.ckpt"
    code, stdout, _ = run(["avg", *paths, "--out", out], capsys)
    assert code == 0 and "epoch=" in stdout
    lib = average_checkpoints([Checkpoint.load(p) for p in paths])
    got = Checkpoint.load(out)
    for k, v in lib.entries.items():
        assert np.array_equal(got.entries[k], v)


def test_avg_single_is_identity(capsys, trained, tmp_path):
    src = trained / "a" / "best.ckpt"
    out = tmp_path / "one.ckpt"
    assert run(["avg", src, "--out", out], capsys)[0] == 0
    a, b = Checkpoint.load(src), Checkpoint.load(out)
    for k in a.entries:
        assert a.entries[k].tobytes() == b.entries[k].tobytes()


def test_avg_mixed_dtypes(capsys, trained, tmp_path):
    src = Checkpoint.load(trained / "a" / "best.ckpt")
    wide = Checkpoint({k: v.astype(np.float64) for k, v in src.entries.items()})
    wide.save(tmp_path / "wide.ckpt")
    code, _, err = run(["avg", trained / "a" / "best.ckpt", tmp_path / "wide.ckpt",
                        "--out", tmp_path / "x.ckpt"], capsys)
    assert code == 1 and "schema" in err
    (tmp_path / "junk.ckpt").write_bytes(b"nonsense")
    assert run(["avg", tmp_path / "junk.ckpt", "--out", tmp_path / "y.ckpt"], capsys)[0] == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nes2net", "profile", str(CONFIGS / "nes2net.cfg"),
                           "--format", "tsv"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.startswith("trunk.nested.0\t")
    proc = subprocess.run([sys.executable, "-m", "nes2net", "frobnicate"], capture_output=True,
                          text=True, check=False)
    assert proc.returncode == 2
