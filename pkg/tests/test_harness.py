import csv
import json
import os

import numpy as np
import pytest

from lwtransducer.config import Config
from lwtransducer.harness.cli import build_parser, main
from lwtransducer.harness.synth import (
    SynthConfig,
    check_utterance,
    gen_synth,
    read_dataset,
    token_embeddings,
    write_dataset,
)
from lwtransducer.harness.train import (
    METRICS_HEADER,
    concat_utterances,
    evaluate,
    read_metrics,
    run_concat_eval,
    run_training,
    score,
)
from lwtransducer.tensor_core import BatchGrid, log_softmax, write_tensor

SMALL = SynthConfig(n_train=40, n_dev=10, n_test=10, seed=7)
QUICK = Config(epochs=3, batch_size=8, hidden=16, blank_hidden=16, conv_layers=1)


def test_synth_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    write_dataset(a, gen_synth(SMALL), SMALL)
    write_dataset(b, gen_synth(SMALL), SMALL)
    names = sorted(os.listdir(a / "feats"))
    assert names == sorted(os.listdir(b / "feats"))
    for rel in ["train.jsonl", "dev.jsonl", "test.jsonl", "synth.json"] + [f"feats/{n}" for n in names]:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel
    back = read_dataset(a)
    orig = gen_synth(SMALL)
    assert back["dev"][3].features.tobytes() == orig["dev"][3].features.tobytes()


def test_synth_invariants():
    cfg = SynthConfig(n_train=200, n_dev=0, n_test=0, seed=1)
    for u in gen_synth(cfg)["train"]:
        assert check_utterance(u)
        assert u.frames <= cfg.max_frames <= 48
        assert all(a != b for a, b in zip(u.transcript, u.transcript[1:]))
        assert all(0 < t < cfg.vocab_size for t in u.transcript)


def test_noise_free_is_separable():
    cfg = SynthConfig(noise_std=0.0, n_train=50, n_dev=0, n_test=0, seed=3)
    emb = token_embeddings(cfg)
    for u in gen_synth(cfg)["train"]:
        truth = np.zeros(u.frames, dtype=int)
        for tok, (s, e) in zip(u.transcript, u.alignment):
            truth[s : e + 1] = tok
        dist = ((u.features[:, None, :] - emb[None]) ** 2).sum(-1)
        np.testing.assert_array_equal(dist.argmin(axis=1), truth)


def test_score_arithmetic():
    s = score([[1, 2, 3], [4, 5]], [[1, 3, 3, 6], []], [5, 4])
    assert (s.ins, s.dele, s.sub, s.ref_len) == (1, 2, 1, 5)
    assert abs(s.ter - (s.ins + s.dele + s.sub) / s.ref_len) <= 1e-12
    assert s.max_tokens_per_frame == pytest.approx(4 / 5)


def test_concat_utterances():
    data = gen_synth(SMALL)["test"]
    joined = concat_utterances(data, 3, gap_frames=2)
    assert len(joined) == 3
    first = joined[0]
    assert first.transcript == data[0].transcript + data[1].transcript + data[2].transcript
    assert first.frames == sum(u.frames for u in data[:3]) + 4
    assert check_utterance(first)


@pytest.fixture(scope="module")
def quick_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    data = gen_synth(SMALL)
    write_dataset(root / "data", data, SMALL)
    result = run_training(QUICK, data, out_dir=root / "out")
    return root, data, result


def test_training_outputs(quick_run):
    root, _, result = quick_run
    rows = read_metrics(root / "out" / "metrics.csv")
    with open(root / "out" / "metrics.csv") as fh:
        assert next(csv.reader(fh)) == METRICS_HEADER
    assert len(rows) == QUICK.epochs
    for r in rows:
        ter = float(r["ter"])
        assert abs(ter - (float(r["ins"]) + float(r["del"]) + float(r["sub"]))) <= 1e-12
    assert Config.load(root / "out" / "config.json") == QUICK
    assert os.path.exists(root / "out" / "checkpoint" / "manifest.json")
    assert result.test is not None


def test_training_reproducible(quick_run, tmp_path):
    root, data, result = quick_run
    again = run_training(QUICK, data, out_dir=tmp_path)
    assert (tmp_path / "metrics.csv").read_bytes() == (root / "out" / "metrics.csv").read_bytes()
    for name in result.model.store:
        assert result.model.store[name].tobytes() == again.model.store[name].tobytes()


def test_concat_cat1_equals_eval(quick_run):
    _, data, result = quick_run
    base, _ = evaluate(result.model, data["test"])
    (cat, sc), = run_concat_eval(result.model, data["test"], cats=(1,))
    assert cat == 1 and sc == base


def test_freeze_alignments_option(quick_run):
    _, data, _ = quick_run
    frozen = run_training(QUICK.replace(freeze_align_every=2, ctc_gate=50.0), data)
    fresh = run_training(QUICK.replace(ctc_gate=50.0), data)
    assert [r.L for r in frozen.rows] != [r.L for r in fresh.rows]


# -- CLI ------------------------------------------------------------------

def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_pipeline(tmp_path, capsys):
    data = tmp_path / "data"
    code, _, _ = run_cli(capsys, "gen-data", "--seed", 7, "--out", data, "--n-train", 24,
                         "--n-dev", 8, "--n-test", 8)
    assert code == 0 and (data / "train.jsonl").exists()
    cfg = tmp_path / "cfg.json"
    QUICK.replace(epochs=1).save(cfg)
    out = tmp_path / "run"
    code, stdout, _ = run_cli(capsys, "train", "--data", data, "--config", cfg, "--out", out,
                              "--no-enhanced-blank", "--lambda", 0.4)
    assert code == 0, stdout
    assert (out / "metrics.csv").exists()
    saved = Config.load(out / "config.json")
    assert saved.enhanced_blank is False and saved.lambda_ == 0.4
    ck = out / "checkpoint"
    code, stdout, _ = run_cli(capsys, "eval", "--checkpoint", ck, "--data", data)
    assert code == 0 and stdout.splitlines()[0] == "ter,ins,del,sub"
    code, stdout, _ = run_cli(capsys, "decode", "--checkpoint", ck, "--data", data, "--split", "dev")
    assert code == 0 and len(stdout.splitlines()) == 8
    assert set(json.loads(stdout.splitlines()[0])) == {"id", "hyp", "ref"}
    code, stdout, _ = run_cli(capsys, "concat-eval", "--checkpoint", ck, "--data", data, "--cats", "2,4")
    lines = stdout.splitlines()
    assert code == 0 and lines[0].startswith("cat,ins,del,sub") and len(lines) == 3


def test_cli_align_and_ctc_loss(tmp_path, capsys):
    rng = np.random.default_rng(0)
    grid = BatchGrid.from_items([log_softmax(rng.normal(size=(5, 4)), axis=1),
                                 log_softmax(rng.normal(size=(3, 4)), axis=1)])
    write_tensor(grid, tmp_path / "g.ltt")
    (tmp_path / "l.json").write_text("[[1, 2], [3]]")
    code, stdout, _ = run_cli(capsys, "align", "--grid", tmp_path / "g.ltt", "--labels",
                              tmp_path / "l.json", "--mode", "viterbi", "--out", tmp_path / "a.ltt")
    assert code == 0
    lines = stdout.splitlines()
    assert lines[0] == "# item 0" and lines[1].startswith("token 0: frames [")
    assert (tmp_path / "a.ltt").exists()
    code, stdout, _ = run_cli(capsys, "ctc-loss", "--grid", tmp_path / "g.ltt", "--labels", tmp_path / "l.json")
    assert code == 0 and len(stdout.splitlines()) == 2


def test_cli_memreport(capsys):
    code, stdout, _ = run_cli(capsys, "memreport", "--n", 16, "--t", 100, "--u", 20, "--v", 4233)
    assert code == 0
    assert stdout.splitlines() == ["full_activations,frame_activations,ratio", "142228800,6772800,21"]


def test_cli_exit_codes(tmp_path, capsys):
    assert run_cli(capsys, "memreport", "--n", 1, "--bogus", 2)[0] == 1
    assert run_cli(capsys, "frobnicate")[0] == 1
    assert run_cli(capsys)[0] == 1
    assert run_cli(capsys, "eval", "--checkpoint", tmp_path / "none", "--data", tmp_path)[0] == 2
    (tmp_path / "bad.ltt").write_bytes(b"garbage")
    (tmp_path / "l.json").write_text("[[1]]")
    code, _, err = run_cli(capsys, "align", "--grid", tmp_path / "bad.ltt", "--labels", tmp_path / "l.json")
    assert code == 2 and "corrupt tensor file" in err
    assert run_cli(capsys, "--help")[0] == 0


def test_help_documents_every_flag():
    parser = build_parser()
    sub = next(a for a in parser._actions if a.__class__.__name__ == "_SubParsersAction")
    for name, p in sub.choices.items():
        text = p.format_help()
        for action in p._actions:
            for opt in action.option_strings:
                assert opt in text, (name, opt)
