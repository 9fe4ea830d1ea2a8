import json
import subprocess
import sys

import numpy as np
import pytest

from siib.channel_sim import ChannelSpec, apply_channel
from siib.cli import main


@pytest.fixture
def clean_wav(write_wav, speech30):
    return write_wav("clean.wav", speech30.samples.astype(np.float32))


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.filterwarnings("ignore::siib.features.ShortInputWarning")
def test_score_identical(capsys, clean_wav):
    code, out, _ = run(capsys, "score", clean_wav, clean_wav)
    assert code == 0
    assert abs(float(out) - 1335.76) < 0.1


@pytest.mark.filterwarnings("ignore::siib.features.ShortInputWarning")
def test_score_json(capsys, clean_wav):
    code, out, _ = run(capsys, "score", clean_wav, clean_wav, "--json")
    data = json.loads(out)
    assert code == 0 and len(data["per_dimension_mi"]) == 420 and all(data["capped"])


def test_score_missing_file(capsys, clean_wav, tmp_path):
    code, _, err = run(capsys, "score", clean_wav, tmp_path / "nope.wav")
    assert code == 2
    assert "unreadable file" in err


@pytest.mark.filterwarnings("ignore::siib.features.ShortInputWarning")
def test_score_too_short_is_validation_error(capsys, write_wav):
    x = write_wav("short.wav", np.random.default_rng(0).standard_normal(800))
    code, _, _ = run(capsys, "score", x, x)
    assert code == 3


def test_usage_error(capsys):
    code, _, _ = run(capsys, "score", "--stack", "notanint", "a", "b")
    assert code == 3
    assert run(capsys)[0] == 3


def test_print_config_precedence(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("K = 10\nseed = 5\njobs = 2\n")
    code, out, _ = run(capsys, "--config", cfg, "--seed", "7", "--print-config")
    data = json.loads(out)
    assert code == 0
    assert data["config"]["stack"] == 10
    assert data["config"]["seed"] == 7
    assert data["jobs"] == 2
    # subcommand-level flags behave the same way
    _, out2, _ = run(capsys, "score", "a.wav", "b.wav", "--config", cfg, "--seed", "7", "--print-config")
    assert json.loads(out2) == data


def test_defaults_digest_stable(capsys):
    _, a, _ = run(capsys, "--print-config")
    _, b, _ = run(capsys, "--print-config")
    assert a == b and json.loads(a)["config"]["hop"] == 200


def test_bad_config_file(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("bogus_key = 1\n")
    assert run(capsys, "--config", cfg, "--print-config")[0] == 3
    cfg.write_text("not toml [[[")
    assert run(capsys, "--config", cfg, "--print-config")[0] == 3


def test_simulate_deterministic(capsys, clean_wav, tmp_path):
    a, b = tmp_path / "a.wav", tmp_path / "b.wav"
    assert run(capsys, "simulate", clean_wav, "ssn", 0, a)[0] == 0
    assert run(capsys, "simulate", clean_wav, "ssn", 0, b)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert run(capsys, "simulate", clean_wav, "ssn", 0, b, "--seed", "1")[0] == 0
    assert a.read_bytes() != b.read_bytes()


def test_simulate_unsupported_kind(capsys, clean_wav, tmp_path):
    code, _, err = run(capsys, "simulate", clean_wav, "reverb", 0, tmp_path / "o.wav")
    assert code == 3
    assert "unsupported channel kind" in err


def test_eval_malformed_manifest(capsys, tmp_path):
    m = tmp_path / "m.csv"
    m.write_text("id,path\n1,2\n")
    assert run(capsys, "eval", m)[0] == 3


def test_eval_missing_audio(capsys, tmp_path):
    m = tmp_path / "m.csv"
    m.write_text("condition_id,clean_path,degraded_path,intelligibility_percent\na,x.wav,y.wav,50\n")
    assert run(capsys, "eval", m)[0] == 2


@pytest.mark.slow
def test_eval_monotone(capsys, clean_wav, speech30, write_wav, tmp_path):
    rows = ["condition_id,clean_path,degraded_path,intelligibility_percent"]
    for i, snr in enumerate([-15, -5, 5, 15]):
        deg = apply_channel(speech30, ChannelSpec("ssn", snr, seed=i))
        write_wav(f"d{i}.wav", deg.samples.astype(np.float32))
        rows.append(f"c{i},clean.wav,d{i}.wav,{10 + 25 * i}")
    m = tmp_path / "m.csv"
    m.write_text("\n".join(rows) + "\n")
    report = tmp_path / "r.json"
    code, out, _ = run(capsys, "eval", m, "--output", report, "--text")
    assert code == 0
    assert "tau=1.0000" in out.splitlines()[-1]
    data = json.loads(report.read_text(), parse_constant=lambda c: pytest.fail(c))
    assert data["tau"] == 1.0 and len(data["conditions"]) == 4


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "siib", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("siib ")
