import json

import jsonschema
import pytest

from cslab import cli, suites
from cslab.errors import ConfigError


# -- configuration ---------------------------------------------------------


def test_yaml_and_json_configs_agree(tmp_path):
    y = tmp_path / "c.yaml"
    y.write_text("level: {k: 2, s: -0.5}\ntaus: ['0.1+1.1i', [0.0, 0.9]]\ndegree: 8\nseed: 5\n")
    j = tmp_path / "c.json"
    j.write_text(json.dumps({"level": "2-0.5i", "taus": [[0.1, 1.1], [0.0, 0.9]], "degree": 8, "seed": 5}))
    a, b = suites.load_config(str(y)), suites.load_config(str(j))
    assert a == b
    assert a.level == (2, -0.5)
    assert a.taus == ((0.1, 1.1), (0.0, 0.9))


def test_missing_config_gives_defaults():
    assert suites.load_config(None) == suites.RunConfig()


@pytest.mark.parametrize("raw", [
    {"colour": "red"},
    {"level": {"k": 0, "s": 0.0}},
    {"level": {"k": 1.5, "s": 0.0}},
    {"taus": [[0.0, -1.0]]},
    {"degree": 3},
    {"suite": "nonsense"},
    {"seed": -1},
    {"tolerances": {"matrix": 0}},
    {"cartan": {"preset": "Z9"}},
])
def test_bad_configs_raise_config_error(raw):
    with pytest.raises(ConfigError):
        suites.config_from_dict(raw)


def test_unreadable_config_raises(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("level: [1, 2\n")
    with pytest.raises(ConfigError):
        suites.load_config(str(bad))
    with pytest.raises(ConfigError):
        suites.load_config(str(tmp_path / "absent.yaml"))


def test_thread_count_parsing(monkeypatch):
    monkeypatch.delenv("CSLAB_THREADS", raising=False)
    assert suites.worker_count() == 1
    monkeypatch.setenv("CSLAB_THREADS", "3")
    assert suites.worker_count() == 3
    for bad in ("0", "many"):
        monkeypatch.setenv("CSLAB_THREADS", bad)
        with pytest.raises(ConfigError):
            suites.worker_count()


# -- reports ---------------------------------------------------------------


@pytest.fixture(scope="module")
def frames_report():
    return suites.run_suite(suites.RunConfig(suite="frames"))


def test_frames_suite_passes(frames_report):
    assert frames_report["summary"]["total"] >= 12
    assert frames_report["summary"]["failed"] == 0
    ids = [c["id"] for c in frames_report["checks"]]
    assert ids == sorted(ids)


def test_report_matches_schema(frames_report):
    suites.validate_report(frames_report)
    broken = json.loads(suites.report_json(frames_report))
    broken["checks"][0]["residual"] = -1.0
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(broken, suites.report_schema())


def test_check_ids_are_unique_and_namespaced():
    checks = suites.suite_checks("all")
    ids = [c.id for c in checks]
    assert len(ids) == len(set(ids))
    for c in checks:
        assert c.id.split(".")[0] in suites.SUITE_NAMES


def test_reports_are_byte_identical_across_threads(monkeypatch, frames_report):
    config = suites.RunConfig(suite="frames")
    monkeypatch.setenv("CSLAB_THREADS", "4")
    threaded = suites.run_suite(config)
    assert suites.report_json(threaded) == suites.report_json(frames_report)


def test_seed_changes_random_inputs(frames_report):
    other = suites.run_suite(suites.RunConfig(suite="frames", seed=1))
    digests = lambda r: [c["inputs_digest"] for c in r["checks"]]
    assert digests(other) != digests(frames_report)


# -- command line ----------------------------------------------------------


def test_verify_writes_report(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert cli.main(["verify", "--suite", "frames", "--out", str(out), "--seed", "3"]) == 0
    report = json.loads(out.read_text())
    assert report["config"]["seed"] == 3
    assert report["summary"]["failed"] == 0
    assert "checks passed" in capsys.readouterr().out


def test_verify_failing_checks_exit_1(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("suite: frames\ntolerances: {fd: 1.0e-300}\n")
    out = tmp_path / "r.json"
    assert cli.main(["verify", "--config", str(cfg), "--out", str(out)]) == 1
    assert json.loads(out.read_text())["summary"]["failed"] > 0


def test_verify_bad_level_exits_2(tmp_path):
    assert cli.main(["verify", "--suite", "frames", "--level", "0+1i", "--out", str(tmp_path / "r.json")]) == 2
    assert not (tmp_path / "r.json").exists()


def test_bad_section_file_exits_2(tmp_path):
    bad = tmp_path / "s.json"
    bad.write_text('{"basis": "hermite"}')
    assert cli.main(["bargmann", "--section", str(bad)]) == 2
    assert cli.main(["transport", "--section", str(tmp_path / "absent.json"), "--path", "0+1i,0+2i"]) == 2


def test_transport_ground_state(tmp_path):
    out = tmp_path / "t.json"
    trace = tmp_path / "t.csv"
    assert cli.main(["transport", "--section", "@h0", "--path", "0+1i,1+1i", "--out", str(out),
                     "--trace", str(trace)]) == 0
    result = json.loads(out.read_text())
    assert result["connection"] == "HW"
    assert result["norm_drift"] < 1e-8
    assert trace.read_text().splitlines()[0] == "tau1,tau2,index,re,im"


def test_bargmann_of_ground_state_is_constant(tmp_path):
    out = tmp_path / "b.json"
    assert cli.main(["bargmann", "--section", "@h0", "--out", str(out)]) == 0
    coeffs = json.loads(out.read_text())["coeffs"]
    assert len(coeffs) == 1
    assert coeffs[0]["index"] == [0] * len(coeffs[0]["index"])
    assert abs(coeffs[0]["re"] - 1) < 1e-12 and abs(coeffs[0]["im"]) < 1e-12


def test_holonomy_command(tmp_path):
    out = tmp_path / "h.json"
    assert cli.main(["holonomy", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["defect"] < 1e-6
    assert cli.main(["holonomy", "--out", str(out), "--tol", "1e-30"]) == 1


def test_equivariant_command(tmp_path):
    out = tmp_path / "e.csv"
    assert cli.main(["equivariant", "--points", "3", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].endswith("value_re,value_im") and len(lines) == 4
