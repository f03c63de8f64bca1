import json

import pytest

from harmlab.cli import main, run
from harmlab.config import ConfigError, ExperimentConfig
from harmlab.report import report


def read(path):
    with open(path) as fh:
        return fh.read()


def test_verify_default_passes(tmp_path):
    assert main(["verify", "--out", str(tmp_path)]) == 0
    m = json.loads(read(tmp_path / "manifest_verify.json"))
    assert m["pass"] is True and {"config_hash", "results", "pass"} <= set(m)
    hard = [r for r in m["results"] if r["hard"]]
    assert hard and all(r["pass"] for r in hard)
    names = {r["name"] for r in hard}
    assert {"lemma_xy", "tv_delta", "mean_inequality", "reverse_poincare", "gradient_lemma",
            "joint_entropy_identity", "entropy_theorem"} <= names


def test_same_config_byte_identical(tmp_path):
    for sub in ("verify", "entropy", "sdb", "generate"):
        a, b = tmp_path / f"{sub}a", tmp_path / f"{sub}b"
        run(sub, ExperimentConfig(), seed=3, threads=1, out=str(a))
        run(sub, ExperimentConfig(), seed=3, threads=3, out=str(b))
        for f in sorted(p.name for p in a.iterdir() if not p.name.startswith("manifest")):
            assert read(a / f) == read(b / f), f


def test_seed_changes_output(tmp_path):
    run("generate", ExperimentConfig(), seed=1, out=str(tmp_path / "a"))
    run("generate", ExperimentConfig(), seed=2, out=str(tmp_path / "b"))
    assert read(tmp_path / "a" / "env_000.env") != read(tmp_path / "b" / "env_000.env")


def test_bad_p_names_field(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[general]\nmodel = percolation:d=2,L=16,p=1.2\n")
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "general.model" in capsys.readouterr().err
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_text("[entropy]\nmodel = percolation:d=2,L=16,p=1.2\n")
    assert exc.value.path == "entropy.model"


@pytest.mark.parametrize("text,path", [
    ("[entropy]\nn_max = ten\n", "entropy.n_max"),
    ("[nope]\nx = 1\n", "nope"),
    ("[sdb]\nwhatever = 1\n", "sdb.whatever"),
    ("[sdb]\nmetric = manhattan\n", "sdb.metric"),
    ("[general]\nreplicas = 0\n", "general.replicas"),
])
def test_config_errors(text, path):
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_text(text)
    assert exc.value.path == path


def test_config_overrides_and_hash():
    base = ExperimentConfig()
    cfg = ExperimentConfig.from_text("[tolerances]\ngradient = 1e-11\n[general]\nthreads = 4\n")
    assert cfg.tol("gradient") == 1e-11
    assert "tolerances.gradient" in cfg.overrides
    assert ExperimentConfig.from_text("[general]\nthreads = 4\n").hash() == base.hash()
    assert cfg.hash() != base.hash()


def test_manifest_logs_tolerance_overrides(tmp_path):
    cfg = ExperimentConfig.from_text("[tolerances]\ngradient = 1e-11\n")
    _, m = run("verify", cfg, out=str(tmp_path))
    assert m["tolerance_overrides"] == ["tolerances.gradient"]


def test_subcommands_write_tables(tmp_path):
    cfg = ExperimentConfig.from_text(
        "[general]\nmodel = percolation:d=2,L=24,p=0.7\nreplicas = 2\n[entropy]\nn_max = 20\n[sdb]\nn_max = 20\n"
        "[heatkernel]\nn = 8,16,32\nmodel = percolation:d=2,L=24,p=0.7\n"
        "[corrector]\nR = 12\nradii = 2,4,6\n[dimension]\nn = 4\n[cover]\nR = 8\nr = 2\n")
    expect = {"entropy": "entropy.csv", "sdb": "sdb.csv", "heatkernel": "heatkernel.csv",
              "corrector": "corrector.csv", "dimension": "dimension.csv", "cover": "cover.csv"}
    for sub, name in expect.items():
        code, m = run(sub, cfg, out=str(tmp_path))
        assert code == 0 and name in m["files"]
        assert read(tmp_path / name).count("\n") >= 2


def test_report_empty_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        report(str(tmp_path))
    assert main(["report", "--out", str(tmp_path)]) == 2


def test_report_passing_run(tmp_path):
    run("verify", ExperimentConfig(), out=str(tmp_path))
    assert report(str(tmp_path)).rstrip().endswith("0 flagged")


def test_report_flags_band(tmp_path):
    m = {"subcommand": "heatkernel", "pass": True, "wall_time": 1.0, "results": [
        {"name": "gradient_exponent", "value": -2.4, "band": [-3, 0.3], "pass": False, "hard": False},
        {"name": "diagonal_slope", "value": -1.02, "band": [-1, 0.15], "pass": True, "hard": False}]}
    (tmp_path / "manifest_heatkernel.json").write_text(json.dumps(m))
    text = report(str(tmp_path))
    flagged = [ln for ln in text.splitlines() if ln.strip().startswith("FLAG")]
    assert len(flagged) == 1 and "gradient_exponent" in flagged[0]
    assert text.rstrip().endswith("1 flagged")
