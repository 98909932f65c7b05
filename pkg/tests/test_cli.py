import json

import numpy as np
import pytest

from dcsnakes import plots
from dcsnakes.cli import PipelineConfig, load_config, main, render_overlay
from dcsnakes.errors import ConfigError
from dcsnakes.grid import load_field
from dcsnakes.synthgen import save_png


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--workdir", str(d), "--out", "s", "--preset", "cd8-h5"]) == 0
    assert main(["segment", "--workdir", str(d), "--out", "seg", "--image", "s/scene.png",
                 "--gt", "s/scene_gt.csv", "--width", "8", "--dump-stages"]) == 0
    return d


def test_segment_outputs(work):
    seg = work / "seg"
    for name in ("contours.csv", "overlay.png", "summary.json", "eval.json", "eval.csv", "eval.png",
                 "config.resolved.toml"):
        assert (seg / name).exists(), name
    stages = sorted(p.name for p in (seg / "stages").iterdir())
    assert stages == ["1_score.field", "1_score.png", "2_components.png", "2_labels.field", "2_measure.field",
                      "3_initial.csv", "4_split.csv", "4_split.png", "4a_costs", "4b_refined.csv",
                      "5_contours.csv"]
    man = json.loads((seg / "stages" / "4a_costs" / "manifest.json").read_text())
    assert man["n"] == 4 and len(man["files"]) == 4
    head = (seg / "contours.csv").read_text().splitlines()[0]
    assert head == "structure,component,index,x,y,theta,mode"
    summary = json.loads((seg / "summary.json").read_text())
    assert summary["stats"]["contours"] == 4
    assert summary["eval"]["median_masd"] < 1.5


def test_rerun_from_resolved_config_is_byte_identical(work):
    assert main(["segment", "--workdir", str(work), "--out", "seg2", "--image", "s/scene.png",
                 "--config", "seg/config.resolved.toml", "--workers", "2"]) == 0
    a = (work / "seg" / "contours.csv").read_bytes()
    b = (work / "seg2" / "contours.csv").read_bytes()
    assert a == b


def test_stage_commands_chain(work):
    w = ["--workdir", str(work)]
    assert main(["lift", *w, "--out", "l", "--image", "s/scene.png"]) == 0
    assert main(["cost", *w, "--out", "c", "--score", "l/score.field"]) == 0
    assert main(["components", *w, "--out", "k", "--score", "l/score.field", "--width", "8"]) == 0
    assert json.loads((work / "k" / "components.json").read_text())["n"] == 4
    assert main(["group-cost", *w, "--out", "g", "--cost", "c/cost.field", "--labels", "k/labels.field"]) == 0
    assert main(["track", *w, "--out", "t", "--cost", "g/cost_3.field",
                 "--source", "20.3,43.5,0", "--sink", "50.3,43.5,0"]) == 0
    tr = json.loads((work / "t" / "track.json").read_text())
    assert tr["model"] == "dc" and tr["distance"] > 0
    assert (work / "t" / "track.png").exists()
    C = load_field(work / "c" / "cost.field").values
    assert C.min() > 0 and C.max() <= 1


def test_eval_command(work):
    assert main(["eval", "--workdir", str(work), "--out", "e", "--pred", "seg/contours.csv",
                 "--gt", "s/scene_gt.csv", "--image", "s/scene.png"]) == 0
    a = json.loads((work / "e" / "eval.json").read_text())
    b = json.loads((work / "seg" / "eval.json").read_text())
    assert a["median_masd"] == pytest.approx(b["median_masd"], abs=1e-3)


def test_exit_code_config(tmp_path, capsys):
    (tmp_path / "bad.toml").write_text("nonsense_key = 1\n")
    assert main(["lift", "--workdir", str(tmp_path), "--config", "bad.toml", "--image", "x.png"]) == 2
    assert main(["lift", "--workdir", str(tmp_path), "--image", "missing.png"]) == 2
    assert main(["track", "--workdir", str(tmp_path), "--grid", "16,16,8", "--source", "4,4,0",
                 "--sink", "40,4,0"]) == 2
    with pytest.raises(SystemExit) as ei:
        main(["track", "--source", "1,2"])
    assert ei.value.code == 2


def test_exit_code_stage(tmp_path, capsys):
    save_png(tmp_path / "blank.png", np.zeros((64, 64)))
    assert main(["segment", "--workdir", str(tmp_path), "--image", "blank.png"]) == 3
    assert "stage failure" in capsys.readouterr().err
    assert main(["track", "--workdir", str(tmp_path), "--grid", "16,16,8", "--source", "4,4,0",
                 "--sink", "12,4,0", "--eikonal-max-iters", "2"]) == 3


def test_render_overlay():
    img = np.linspace(0, 1, 40 * 30).reshape(40, 30)
    empty = render_overlay(img, [])
    assert empty.shape == (30, 40, 3)
    assert np.all(empty[..., 0] == empty[..., 1]) and np.all(empty[..., 1] == empty[..., 2])
    sq = np.array([[5, 5], [20, 5], [20, 20], [5, 20]], float)
    one = render_overlay(img, [sq])
    assert tuple(one[5, 10]) == tuple(plots.palette(1)[0])
    # colours are assigned by position, so adding a contour keeps the first colour
    two = render_overlay(img, [sq, sq + 12])
    assert tuple(two[5, 10]) == tuple(plots.palette(2)[0])


def test_config_toml_roundtrip(tmp_path):
    cfg = PipelineConfig(width=12.0, model="dproj", edge_scales=[1.0, 3.0]).resolved()
    (tmp_path / "c.toml").write_text(cfg.to_toml())
    back = load_config(tmp_path / "c.toml")
    assert back == cfg
    assert load_config(None, {"width": 8}).width == 8.0
    with pytest.raises(ConfigError):
        load_config(None, {"model": "other"})
    (tmp_path / "broken.toml").write_text("width = = 3")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "broken.toml")
