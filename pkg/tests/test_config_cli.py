import json

import pytest

from blockleak.cli import main, read_identities
from blockleak.config import apply_overrides, config_from_dict, load_config
from blockleak.planner import BlockPlan


def test_defaults():
    cfg = load_config()
    assert cfg.decision.k0 == 30 and cfg.decision.alpha == 0.01
    assert cfg.attack.parallelism == 6
    assert cfg.profile().name == "facebook"


def test_yaml_and_overrides(tmp_path):
    path = tmp_path / "exp.yaml"
    path.write_text("seed: 4\nservice:\n  preset: tumblr\n  time_scale: 0.5\ndecision:\n  k: 10\n")
    cfg = load_config(path, ["decision.k=3", "faults.early_outlier_prob=0.01"])
    assert cfg.seed == 4
    assert cfg.decision.k == 3
    assert cfg.faults.early_outlier_prob == 0.01
    assert cfg.profile().base_ms == pytest.approx(235.0)


def test_unknown_keys_rejected():
    with pytest.raises(ValueError):
        config_from_dict({"decision": {"kk": 3}})
    with pytest.raises(ValueError):
        config_from_dict({"bogus": 1})
    with pytest.raises(ValueError):
        apply_overrides({}, ["no-equals-sign"])


def test_read_identities(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("# header\nalice\n\n bob \n")
    assert read_identities(p) == ["alice", "bob"]


@pytest.fixture
def plan_file(tmp_path):
    targets = tmp_path / "targets.txt"
    targets.write_text("\n".join(f"t{i}" for i in range(10)))
    out = tmp_path / "plan.json"
    main(["plan", "--targets", str(targets), "--out", str(out),
          "--set", "code.payload_bits=24", "--set", "code.rs_redundant_symbols=2",
          "--set", "code.shuffle_seed=3"])
    return out


def test_plan_command(capsys, plan_file):
    info = json.loads(capsys.readouterr().out)
    assert info["total_bits"] == 32 and info["signaling_accounts"] == 32
    assert len(BlockPlan.load(plan_file).signaling_ids()) == 32


def test_attack_command_simulated(plan_file, capsys):
    capsys.readouterr()
    main(["attack", "--plan", str(plan_file), "--visitor", "t3", "--seed", "7"])
    out = json.loads(capsys.readouterr().out)
    assert out["seed"] == 7 and out["identified"] == "t3"
    assert out["requests_issued"] == 32 * 30 + 60


def test_campaign_command_report(plan_file, tmp_path, capsys):
    report = tmp_path / "report.json"
    main(["campaign", "--plan", str(plan_file), "--out", str(report), "--seed", "1",
          "--set", "campaign.non_targets=2", "--set", "campaign.visits_per_account=1"])
    text = capsys.readouterr().out
    assert "seed=1" in text and "IDR/EC" in text
    data = json.loads(report.read_text())
    assert data["report_version"] == 1
    assert len(data["trials"]) == 12
    assert data["summary"]["tpr"] == 1.0
    main(["report", "--report", str(report)])
    assert "TNR" in capsys.readouterr().out


def test_budget_command(capsys):
    main(["budget", "--m", "24", "--k", "3"])
    out = json.loads(capsys.readouterr().out)
    assert out["requests"] == 132
    assert out["lower_s"] < out["upper_s"]


def test_curve_csv(tmp_path, capsys):
    path = tmp_path / "curve.csv"
    main(["report", "--curve-csv", str(path), "--ks", "1,30"])
    lines = path.read_text().splitlines()
    assert lines[0].startswith("service,m_total,k")
    assert len(lines) == 3
    assert lines[2].split(",")[4] == "780"
