import json
from pathlib import Path
from unittest import mock

import numpy as np
import pytest

from talking_clip.harness.synth import MANIFEST_NAME
from talking_clip.main import run
from talking_clip.motion.keypoints import KeypointSequence, write_keypoints


def test_arg_version() -> None:
    with mock.patch("builtins.print") as mocked_print:
        assert run(["name", "--version"]) == 0

    print_msg = mocked_print.call_args_list[0].args[0]
    assert "Version:" in print_msg
    assert "torch:" in print_msg


def test_no_command(capsys: pytest.CaptureFixture) -> None:
    assert run(["name"]) == 2
    assert "usage" in capsys.readouterr().err


def test_tsm_schedule(capsys: pytest.CaptureFixture) -> None:
    assert run(["name", "tsm-schedule", "--stride", "2", "--expand-ratio", "2", "--segments", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "slot segment raw"
    assert [int(line.split()[2]) for line in lines[1:]] == [0, 1, 2, 4, 6, 10]
    assert [int(line.split()[1]) for line in lines[1:]] == [0, 0, 1, 1, 2, 2]


def test_error_is_reported_as_json(capsys: pytest.CaptureFixture) -> None:
    assert run(["name", "tsm-schedule", "--stride", "0"]) == 1
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["error"] == "NonPositiveDim"
    assert "stride" in error["message"]


def test_unknown_preset(capsys: pytest.CaptureFixture) -> None:
    assert run(["name", "--config", "huge", "tsm-schedule"]) == 1
    assert "ConfigError" in capsys.readouterr().err


def test_metrics(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    points = np.zeros((4, 3, 2))
    points[:, 0, 0] = [0.0, 2.0, 0.0, 2.0]
    gen = KeypointSequence(points, 0, [1, 2], [2])
    write_keypoints(tmp_path / "gen.jsonl", gen)
    write_keypoints(tmp_path / "gt.jsonl", KeypointSequence(np.zeros((4, 3, 2)), 0, [1, 2], [2]))

    assert run(["name", "metrics", "--gen", str(tmp_path / "gen.jsonl"), "--whole"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report == {"Glo": pytest.approx(1.0), "Exp": pytest.approx(1.0)}

    args = ["name", "metrics", "--gen", str(tmp_path / "gen.jsonl"), "--gt", str(tmp_path / "gt.jsonl")]
    assert run(args + ["--window", "2"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["DGlo"] == pytest.approx(1.0)
    assert report["DExp"] == pytest.approx(1.0)


def test_synth_data(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    out = tmp_path / "data"
    assert run(["name", "-q", "--out", str(out), "synth-data", "--videos", "1", "--frames", "6"]) == 0
    assert json.loads(capsys.readouterr().out) == {"dataset": str(out), "videos": 1}
    assert (out / MANIFEST_NAME).is_file()


def test_train_without_steps(tmp_path: Path, dataset_dir: Path, capsys: pytest.CaptureFixture) -> None:
    out = tmp_path / "run"
    args = ["name", "-q", "--out", str(out), "train", "--stage", "1", "--data", str(dataset_dir), "--steps", "0"]
    assert run(args) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["step"] == 0
    assert report["final_loss"] is None
    assert (out / "stage1.safetensors").is_file()


def test_ragged_keypoints_are_reported_as_json(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    path = tmp_path / "ragged.jsonl"
    header = {"nose_index": 0, "upper_face_indices": [1], "mouth_indices": [2], "num_points": 3}
    frames = [{"frame": 0, "points": [[0, 0], [1, 1], [2, 2]]}, {"frame": 1, "points": [[0, 0], [1], [2, 2]]}]
    path.write_text("\n".join(json.dumps(record) for record in [header] + frames) + "\n", "utf-8")
    assert run(["name", "metrics", "--gen", str(path)]) == 1
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["error"] == "KeypointFormatError"
