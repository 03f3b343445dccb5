import json
import re
import subprocess
import sys

import pytest

from mangled_worlds.cli import main

TAG = re.compile(r"^# mangled-worlds 0\.1\.0 config_digest=[0-9a-f]{16} kind=[a-z0-9-]+$")
DIAG = re.compile(r"^mangled-worlds: error status=(\d) kind=\w+ message=.+$")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize(
    "argv",
    [
        ["figure1", "--n-background", "50"],
        ["crossings"],
        ["born-window"],
        ["histogram", "--cutoff", "-6000"],
        ["histogram", "--cutoff-z", "0", "--log10"],
        ["shares", "--n-background", "2000", "--z", "1"],
        ["dynamics", "--points", "11", "--horizon", "100"],
        ["toy-coherence", "--steps", "20", "--every", "5"],
        ["enumerate", "--n-events", "5"],
    ],
)
def test_every_subcommand_tags_its_output(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    lines = out.splitlines()
    assert TAG.match(lines[0])
    assert f"kind={argv[0]}" in lines[0]
    assert len(lines) >= 3


def test_headers(capsys):
    expected = {
        "dynamics": "t,ln_median,sigma,epsilon,delta,share_slow",
        "toy-coherence": "step,trace_LL,trace_ss,offdiag_norm,ratio_L,ratio_s",
        "shares": "outcome_label,F,G,share,born_weight,deviation",
        "enumerate": "label,log_count,log_size",
        "figure1": "config_hash,f,m_prime,log_size,log_count",
    }
    for sub, header in expected.items():
        code, out, _ = run(capsys, sub, *(["--n-background", "10"] if sub in ("figure1", "shares") else []),
                           *(["--points", "3"] if sub == "dynamics" else []),
                           *(["--steps", "2"] if sub == "toy-coherence" else []))
        assert code == 0
        assert out.splitlines()[1] == header


def test_born_window_report(capsys):
    code, out, _ = run(capsys, "born-window", "--window-low", "0.65", "--window-high", "0.75")
    assert code == 0
    span_log10 = float(out.splitlines()[2].split(",")[-1])
    assert abs(span_log10 - 185.9) <= 1.8
    code, out, _ = run(capsys, "born-window", "--count-model", "gaussian")
    assert float(out.splitlines()[2].split(",")[-1]) == pytest.approx(185.83, abs=0.01)


def test_identical_runs_are_byte_identical(tmp_path, capsys):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert main(["figure1", "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    for p in paths:
        assert main(["toy-coherence", "--seed", "7", "--steps", "50", "--out", str(p), "--format", "json"]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_seed_changes_toy_output(capsys):
    _, a, _ = run(capsys, "toy-coherence", "--steps", "5", "--seed", "1")
    _, b, _ = run(capsys, "toy-coherence", "--steps", "5", "--seed", "2")
    assert a.splitlines()[2] != b.splitlines()[2]
    assert a.splitlines()[0] != b.splitlines()[0]


def test_json_mirror(capsys):
    code, out, _ = run(capsys, "shares", "--n-background", "2000", "--format", "json")
    assert code == 0
    lines = [json.loads(x) for x in out.splitlines()]
    meta = lines[0]
    assert meta["tool"] == "mangled-worlds" and meta["version"] == "0.1.0"
    assert re.fullmatch(r"[0-9a-f]{16}", meta["config_digest"])
    assert meta["columns"] == ["outcome_label", "F", "G", "share", "born_weight", "deviation"]
    assert [r["outcome_label"] for r in lines[1:]] == ["up", "down"]
    assert sum(r["share"] for r in lines[1:]) == pytest.approx(1.0)


def test_config_file_mode(tmp_path, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text("# crossing of the Born line with f = 0.65\nf_b = 0.65\ncount-model = gaussian\n\n")
    _, via_file, _ = run(capsys, "crossings", "--config", str(conf))
    _, via_flags, _ = run(capsys, "crossings", "--f-b", "0.65", "--count-model", "gaussian")
    assert via_file == via_flags
    assert float(via_file.splitlines()[2].split(",")[2]) == pytest.approx(-6383.67, abs=0.01)
    # command-line flags win over the file
    _, override, _ = run(capsys, "crossings", "--config", str(conf), "--f-b", "0.75")
    assert float(override.splitlines()[2].split(",")[2]) == pytest.approx(-5955.79, abs=0.01)


def test_config_boolean_and_errors(tmp_path, capsys):
    conf = tmp_path / "h.conf"
    conf.write_text("cutoff = -6000\nlog10 = true\n")
    code, out, _ = run(capsys, "histogram", "--config", str(conf))
    assert code == 0
    assert float(out.splitlines()[2].split(",")[1]) == pytest.approx(5972.14 / 2.302585, abs=0.01)

    for text in ("bogus = 1\n", "no equals sign\n", "log10 = maybe\n", "config = x\n"):
        conf.write_text(text)
        code, _, err = run(capsys, "histogram", "--config", str(conf))
        assert code == 2
        assert DIAG.match(err.strip())
    code, _, err = run(capsys, "histogram", "--config", str(tmp_path / "missing.conf"))
    assert code == 2


def test_outdir_from_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("MANGLED_WORLDS_OUTDIR", str(tmp_path / "out"))
    code, out, _ = run(capsys, "enumerate", "--n-events", "3", "--format", "json")
    assert code == 0 and out == ""
    written = (tmp_path / "out" / "enumerate.json").read_text().splitlines()
    assert len(written) == 5


@pytest.mark.parametrize(
    "argv,status",
    [
        (["no-such-command"], 2),
        (["crossings", "--p", "1.5"], 2),
        (["crossings", "--p", "abc"], 2),
        (["histogram"], 2),
        (["shares", "--shape", "logistic", "--width", "1", "--scale", "5"], 2),
        (["crossings", "--f-a", "0.7", "--f-b", "0.7"], 3),
        (["toy-coherence", "--dt", "10"], 3),
        (["toy-coherence", "--ds", "1"], 3),
        (["shares", "--n-background", "100", "--z", "1e6"], 4),
        (["histogram", "--cutoff", "0"], 4),
    ],
)
def test_status_codes(capsys, argv, status):
    code, out, err = run(capsys, *argv)
    assert code == status
    assert out == ""
    if status != 2 or argv[0] != "no-such-command" and "--p" not in argv:
        assert DIAG.match(err.strip().splitlines()[-1])


def test_failed_run_leaves_no_file(tmp_path, capsys):
    target = tmp_path / "x.csv"
    assert main(["histogram", "--cutoff", "0", "--out", str(target)]) == 4
    assert not target.exists()


def test_help_documents_status_codes(capsys):
    assert main(["--help"]) == 0
    out = capsys.readouterr().out
    for code in ("0  success", "2  usage", "3  numerical", "4  empty"):
        assert code in out
    assert main(["born-window", "--help"]) == 0
    assert "--window-low" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "mangled_worlds", "enumerate", "--n-events", "2"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1] == "label,log_count,log_size"
