import json

import pytest

from dualexpert.bench import SyntheticSpec, make_synthetic_task
from dualexpert.cli import main
from dualexpert.config import TrainConfig


SPEC = {"C": 3, "d": 8, "n_train": 4, "n_test": 4, "alignment": 0.8,
        "seed": 1}
FAST_CFG = {"epochs": 2, "batch_size": 8}


@pytest.fixture(scope="module")
def task_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("clitask")
    make_synthetic_task(SyntheticSpec(**SPEC), out)
    return out


@pytest.fixture(scope="module")
def cfg_file(tmp_path_factory):
    f = tmp_path_factory.mktemp("cfg") / "fast.json"
    f.write_text(TrainConfig(**FAST_CFG).to_json())
    return f


def test_gen_synthetic(tmp_path, capsys):
    spec_file = tmp_path / "spec.json"
    spec_file.write_text(json.dumps(SPEC))
    main(["gen-synthetic", "--spec", str(spec_file),
          "--out", str(tmp_path / "task")])
    out = capsys.readouterr().out.strip()
    assert out.endswith("manifest.json")
    assert (tmp_path / "task" / "images.cmf1").exists()


def test_gen_synthetic_bad_spec(tmp_path, capsys):
    spec_file = tmp_path / "spec.json"
    spec_file.write_text(json.dumps({"C": 1}))
    with pytest.raises(SystemExit) as e:
        main(["gen-synthetic", "--spec", str(spec_file),
              "--out", str(tmp_path / "task")])
    assert e.value.code == 1


def test_train_and_eval(task_dir, cfg_file, tmp_path, capsys):
    run = tmp_path / "run"
    main(["train", "--manifest", str(task_dir / "manifest.json"),
          "--k", "2", "--seed", "0", "--config", str(cfg_file),
          "--out", str(run)])
    result = json.loads(capsys.readouterr().out)
    assert set(result) == {"k", "seed", "final_accuracy"}
    assert (run / "params.cmf1").exists()
    assert (run / "history.jsonl").read_text().count("\n") == 2

    main(["eval", "--manifest", str(task_dir / "manifest.json"),
          "--params", str(run / "params.cmf1")])
    acc = json.loads(capsys.readouterr().out)["accuracy"]
    assert 0.0 <= acc <= 1.0


def test_eval_defaults_to_zero_init(task_dir, capsys):
    main(["eval", "--manifest", str(task_dir / "manifest.json")])
    acc = json.loads(capsys.readouterr().out)["accuracy"]
    assert 0.0 <= acc <= 1.0


def test_eval_missing_manifest(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["eval", "--manifest", str(tmp_path / "nope.json")])
    assert e.value.code == 1


def test_ablate_byte_identical(task_dir, cfg_file, tmp_path, capsys):
    outs = []
    for name in ("a.json", "b.json"):
        main(["ablate", "--manifest", str(task_dir / "manifest.json"),
              "--k", "2", "--seeds", "0,1", "--config", str(cfg_file),
              "--out", str(tmp_path / name)])
        capsys.readouterr()
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]
    rows = json.loads(outs[0])
    assert len(rows) == 9


def test_ablate_bad_seeds(task_dir, capsys):
    with pytest.raises(SystemExit) as e:
        main(["ablate", "--manifest", str(task_dir / "manifest.json"),
              "--k", "2", "--seeds", "0,x"])
    assert e.value.code == 1


def test_sweep(task_dir, cfg_file, capsys):
    main(["sweep", "--manifest", str(task_dir / "manifest.json"),
          "--seeds", "0", "--k-list", "1,2", "--config", str(cfg_file)])
    rows = json.loads(capsys.readouterr().out)
    assert [r["config_id"] for r in rows] == ["k=1", "k=2"]


def test_verify_geometry(capsys):
    main(["verify-geometry", "--trials", "5", "--seed", "0"])
    report = json.loads(capsys.readouterr().out)
    assert report["pass"]


def test_export_report(task_dir, cfg_file, tmp_path, capsys):
    src = tmp_path / "r.json"
    main(["ablate", "--manifest", str(task_dir / "manifest.json"),
          "--k", "2", "--seeds", "0", "--config", str(cfg_file),
          "--out", str(src)])
    capsys.readouterr()
    main(["export-report", "--report", str(src), "--format", "csv"])
    csv_out = capsys.readouterr().out
    assert csv_out.startswith("config_id,")
    main(["export-report", "--report", str(src), "--format", "md"])
    assert capsys.readouterr().out.startswith("| config |")


def test_invalid_subcommand():
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2  # argparse usage error
