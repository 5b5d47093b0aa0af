"""End-to-end CLI tests against the trained session pipeline: exit codes,
config layering, deterministic generation, streaming parity, ablation."""

import csv
import json
from pathlib import Path

import pytest

from segvid import cli, synth
from segvid.grid import write_siv1


def test_usage_errors_exit_1(tmp_path):
    assert cli.main(["bogus"]) == 1
    assert cli.main([]) == 1
    assert cli.main(["generate", "--out", str(tmp_path)]) == 1  # missing required flags


def test_help_exits_0():
    assert cli.main(["--help"]) == 0
    assert cli.main(["synth", "--help"]) == 0


def test_missing_out_is_validation_error():
    assert cli.main(["synth"]) == 2


def test_bad_config_exits_2(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("[1, 2, 3]")
    assert cli.main(["synth", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    cfg.write_text("{broken")
    assert cli.main(["synth", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["synth", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o")]) == 2


def test_config_layering(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"count": 2, "frames": 17}))
    out = tmp_path / "a"
    assert cli.main(["synth", "--config", str(cfg), "--out", str(out), "--seed", "5"]) == 0
    resolved = json.loads((out / "config.resolved.json").read_text())
    assert resolved["count"] == 2          # from file
    assert resolved["frames"] == 17        # from file
    assert resolved["seed"] == 5           # flag
    assert resolved["height"] == 32        # default
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest) == 2 and all(r["T"] == 17 for r in manifest)
    assert [r["seed"] for r in manifest] == [5, 6]

    out2 = tmp_path / "b"
    assert cli.main(["synth", "--config", str(cfg), "--out", str(out2),
                     "--count", "3"]) == 0
    assert len(json.loads((out2 / "manifest.json").read_text())) == 3  # flag beats file


def _generate(pipeline, out, *extra):
    return cli.main(["generate", "--stage1", pipeline["s1"], "--stage2", pipeline["s2"],
                     "--image", pipeline["image"], "--out", str(out), "--frames", "17",
                     *extra])


def test_generate_deterministic(pipeline, tmp_path, capsys):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert _generate(pipeline, a) == 0
    assert "wrote 17 frames" in capsys.readouterr().out
    assert _generate(pipeline, b) == 0
    assert _generate(pipeline, c, "--seed", "1") == 0
    va = (a / "video.siv1").read_bytes()
    assert va == (b / "video.siv1").read_bytes()
    assert va != (c / "video.siv1").read_bytes()
    plan = json.loads((a / "plan.json").read_text())
    assert plan["t"] == 5 and plan["M"] == 3 and plan["N"] == 1
    assert (a / "config.resolved.json").exists()


def test_generate_stream_matches_plain(pipeline, tmp_path):
    plain, stream = tmp_path / "p", tmp_path / "s"
    assert _generate(pipeline, plain) == 0
    assert _generate(pipeline, stream, "--stream") == 0
    assert (plain / "video.siv1").read_bytes() == (stream / "video.siv1").read_bytes()
    rows = list(csv.reader((stream / "events.csv").open()))
    assert rows[0] == ["kind", "index", "t_ms"]
    assert len(rows) > 1
    timing = json.loads((stream / "timing.json").read_text())
    assert set(timing) == {"first_output", "full_output", "sequential_total"}
    assert not (plain / "events.csv").exists()


def test_generate_rejects_multiframe_image(pipeline, tmp_path):
    img = tmp_path / "two.siv1"
    write_siv1(img, synth.render_scene(synth.SceneSpec(seed=1, T=17))[:2])
    rc = cli.main(["generate", "--stage1", pipeline["s1"], "--stage2", pipeline["s2"],
                   "--image", str(img), "--out", str(tmp_path / "o")])
    assert rc == 2


def test_generate_missing_checkpoint_exits_2(pipeline, tmp_path):
    rc = cli.main(["generate", "--stage1", str(tmp_path / "nope"),
                   "--stage2", pipeline["s2"], "--image", pipeline["image"],
                   "--out", str(tmp_path / "o")])
    assert rc == 2


def test_ablate_mn(pipeline, tmp_path):
    out = tmp_path / "ab"
    rc = cli.main(["ablate-mn", "--stage2", pipeline["s2"], "--out", str(out),
                   "--frames", "33"])
    assert rc == 0
    rows = list(csv.DictReader((out / "ablate_mn.csv").open()))
    assert {(int(r["M"]), int(r["N"])) for r in rows} == {(2, 1), (2, 2), (3, 1), (3, 2)}
    for r in rows:
        assert float(r["psnr"]) > 0.0
        assert int(r["max_tokens"]) > 0
        assert float(r["wall_ms"]) > 0.0


def test_bench_streaming(pipeline, tmp_path):
    out = tmp_path / "bs"
    rc = cli.main(["bench", "streaming", "--stage2", pipeline["s2"],
                   "--out", str(out), "--frames", "17"])
    assert rc == 0
    rep = json.loads((out / "streaming.json").read_text())
    assert rep["matches_sequential"] is True
    assert set(rep["predicted"]) == {"first_output", "full_output", "sequential_total"}
    assert len(rep["measured_denoise_ms"]) == len(rep["measured_decode_ms"]) == 2
    assert (out / "events.csv").exists() and (out / "video.siv1").exists()


def test_trained_checkpoints_record_losses(pipeline):
    for d in (pipeline["s1"], pipeline["s2"]):
        summary = json.loads((Path(d) / "summary.json").read_text())
        assert summary["final_loss"] < summary["init_loss"]
        log = list(csv.DictReader((Path(d) / "train_log.csv").open()))
        assert len(log) == 600
