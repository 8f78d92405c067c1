import math
import os
import pathlib

import pytest

import pulsessl


def tone(hz, n=300, fps=30.0):
    return [math.sin(2 * math.pi * hz * t / fps) for t in range(n)]


def test_spectrum_and_rate():
    p = pulsessl.psd(tone(1.5))
    assert len(p) == 141
    assert max(range(141), key=lambda c: p[c]) == 50
    assert pulsessl.heart_rate(tone(1.5)) == 90
    assert 0.9 <= pulsessl.snr(tone(1.5)) <= 1.0
    assert pulsessl.ipr(tone(1.5)) < 0.02
    assert pulsessl.pearson([1.0, 2.0, 3.0], [2.0, 4.0, 6.5]) > 0.99


def test_errors_are_typed():
    with pytest.raises(pulsessl.DegenerateSignal):
        pulsessl.snr([0.25] * 300)
    with pytest.raises(pulsessl.ConfigError):
        pulsessl.ratio_at("sideways", 10, 0)
    with pytest.raises(pulsessl.EpochOutOfRange):
        pulsessl.ratio_at("inc", 10, 11)
    assert issubclass(pulsessl.IoError, pulsessl.PulseError)


def test_curriculum():
    assert pulsessl.ratio_at("inc", 20, 0) == pytest.approx(0.2)
    assert pulsessl.ratio_at("inc", 20, 20) == pytest.approx(0.8)
    assert pulsessl.ratio_at("dec", 20, 0) == pytest.approx(0.8)
    assert pulsessl.selection_size(0.2, 96) == 19


def test_synth_truth_rate():
    assert pulsessl.heart_rate(pulsessl.synth_truth(72, seed=3)) == 72


def test_command_flow(tmp_path: pathlib.Path):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(
        "data_dir = data\nn_labeled = 4\nn_unlabeled = 6\nn_validation = 2\nn_test = 3\n"
        "frames = 90\nwidth = 3\nheight = 3\ne_total = 2\nmodel_widths = 4,1\nmodel_kernel = 5\n"
    )
    code, out, _ = pulsessl.gen(str(cfg), str(tmp_path / "data"))
    assert code == 0
    assert out.strip() == "train_labeled=4 train_unlabeled=6 validation=2 test=3"

    clip = pulsessl.read_clip(str(tmp_path / "data" / "clips" / "lab_0000.pcb"))
    assert clip["shape"] == (90, 3, 3, 3)
    assert len(clip["pixels"]) == 90 * 27
    assert len(clip["truth"]) == 90

    code, out, _ = pulsessl.train(str(cfg), str(tmp_path / "run"), data=str(tmp_path / "data"))
    assert code == 0
    assert out.startswith("protocol=semi seed=1 ")
    assert (tmp_path / "run" / "epochs.csv").exists()

    code, out, _ = pulsessl.score(str(tmp_path / "run"))
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "id,hr_bpm,snr,ipr"
    assert len(lines) == 7

    code, _, err = pulsessl.train(str(cfg), str(tmp_path / "x"), protocol="sideways")
    assert code == 2
    assert err
    code, _, _ = pulsessl.score(str(tmp_path / "missing.csv"))
    assert code == 3
