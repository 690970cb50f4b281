import os
import subprocess

import pytest

import aerialmpt


def test_geometry():
    assert aerialmpt.iou((0, 0, 10, 10), (0, 0, 10, 10)) == pytest.approx(1.0)
    assert aerialmpt.iou((0, 0, 10, 10), (20, 20, 30, 30)) == 0.0
    x1, y1, x2, y2 = aerialmpt.point_to_box(50.0, 40.0, gsd=0.05)
    assert (x2 - x1, y2 - y1) == (8.0, 8.0)
    assert (x1 + x2) / 2 == 50.0


def test_synth_load_and_perfect_evaluation(tmp_path):
    seq = tmp_path / "seq"
    aerialmpt.synthesize(seq, n_agents=4, n_frames=5, seed=3)
    meta, ann = aerialmpt.load_annotations(seq)
    assert meta["frame_count"] == 5
    assert meta["gsd"] == pytest.approx(0.05)
    assert {a[1] for a in ann} <= {1, 2, 3, 4}
    gt = aerialmpt.ground_truth_boxes(seq)
    hyp = [(f, i + 100, *box) for f, i, *box in gt]
    r = aerialmpt.evaluate(gt, hyp)
    assert list(r) == aerialmpt.report_columns()
    assert r["MOTA"] == pytest.approx(100.0)
    assert r["ID"] == 0


def test_network_tracks_a_sequence(tmp_path):
    seq = tmp_path / "seq"
    aerialmpt.synthesize(seq, n_agents=2, n_frames=3, seed=5)
    net = aerialmpt.Network("reduced", seed=1)
    assert net.crop_size == 64
    assert net.parameter_count > 0
    hyps = net.track(seq, ablation="snn")
    assert all(h[0] < 3 for h in hyps)
    assert {h[1] for h in hyps if h[0] == 0} == {1, 2}
    net.save(tmp_path / "m.amptnet")
    assert aerialmpt.Network.load(tmp_path / "m.amptnet").parameter_count == net.parameter_count


def test_errors_map_to_python_exceptions(tmp_path):
    with pytest.raises(ValueError):
        aerialmpt.Network("huge")
    with pytest.raises(ValueError):
        aerialmpt.load_annotations(tmp_path)
    with pytest.raises(ValueError):
        aerialmpt.synthesize(tmp_path / "x", motion="teleport")


def test_in_process_cli(tmp_path):
    code, out, _ = aerialmpt.run_cli(["--version"])
    assert code == 0 and "aerialmpt" in out
    code, _, err = aerialmpt.run_cli(["evaluate"])
    assert code == 2 and err.startswith("error: ")


@pytest.mark.skipif("AERIALMPT_CLI" not in os.environ, reason="command-line binary not provided")
def test_cli_binary_help():
    res = subprocess.run([os.environ["AERIALMPT_CLI"], "--help"], capture_output=True, text=True, check=True)
    for sub in ("synth", "train", "track", "evaluate", "report"):
        assert sub in res.stdout
