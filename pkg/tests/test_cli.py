import csv
import io
import json
import subprocess
import sys

import pytest

from wstack import analysis
from wstack.cli import EXIT_EVIDENCE, EXIT_FAILURE, EXIT_INFEASIBLE, EXIT_USAGE, main
from wstack.fabric import load_edge, load_fabric
from wstack.harness import PROFILES, ChannelConfig, Transcript, make_documents, run_session, wire_stats
from wstack.protocol import Failure
from wstack.stack import load_stack


def cli(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def records(text):
    return [json.loads(line) for line in text.splitlines()]


def test_keygen_default_picks_exact_kappa(tmp_path):
    code, text = cli("keygen", "--w", "512", "--N", "64", "--target", "256", "--out", str(tmp_path))
    assert code == 0
    rep = json.loads(text)
    assert rep["kappa"] == 55 and rep["security_bits"] >= 256 > rep["approx_bits"]
    fabric = load_fabric(tmp_path / "alice.wsf")
    assert fabric.edge() == load_edge(tmp_path / "alice.wse")


def test_keygen_infeasible(tmp_path, capsys):
    code, _ = cli("keygen", "--w", "512", "--N", "64", "--target", "256", "--method", "approx",
                  "--out", str(tmp_path))
    assert code == EXIT_INFEASIBLE
    assert "infeasible" in capsys.readouterr().err
    code, _ = cli("keygen", "--w", "4096", "--N", "32", "--kappa", "20", "--target", "256", "--out", str(tmp_path))
    assert code == EXIT_INFEASIBLE


def test_keygen_paper_profile_report(tmp_path):
    code, text = cli("keygen", "--N", "256", "--out", str(tmp_path))
    rep = json.loads(text)
    assert code == 0 and (rep["w"], rep["kappa"], rep["phi"]) == (4096, 31, 64)
    cap = analysis.capacity(4096, 256, 31)
    assert (rep["d_max"], rep["d_safe"]) == (cap.d_max, cap.d_safe)
    assert rep["security_bits"] == pytest.approx(259.5001, abs=1e-4)


def test_usage_errors(capsys):
    assert cli("keygen", "--w", "3")[0] == EXIT_USAGE
    assert cli("run", "--drop", "2")[0] == EXIT_USAGE
    assert cli("run", "--protocol", "maws", "--rounds", "3", "--refuse", "9")[0] == EXIT_USAGE
    assert cli("frobnicate")[0] == EXIT_USAGE
    capsys.readouterr()


def test_analyze_csv_matches_text_and_library():
    _, text = cli("analyze", "--w", "4096", "--w", "1024", "--kappa", "31")
    _, raw = cli("analyze", "--w", "4096", "--w", "1024", "--kappa", "31", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(raw)))
    lines = text.splitlines()
    assert len(lines) == len(rows) + 1
    for line, row in zip(lines[1:], rows):
        assert line.split() == list(row.values())
    lib = analysis.analysis_table([(4096, 31), (1024, 31)], 8192)
    assert [int(r["d_safe"]) for r in rows] == [r.d_safe for r in lib]
    assert rows[0]["exact_bits"] == "259.5001" and rows[0]["d_max"] == "1082401"


def test_analyze_kappa_table():
    _, raw = cli("analyze", "--fig3", "--format", "csv")
    rows = {int(r["w"]): r for r in csv.DictReader(io.StringIO(raw))}
    assert rows[4096]["published"] == rows[4096]["exact"] == "31"
    assert rows[512]["exact"] == "55" and rows[512]["approx"] == "--"


@pytest.mark.parametrize("protocol", ["bws", "maws", "rws"])
def test_run_matches_library(protocol, tmp_path):
    code, text = cli("run", "--protocol", protocol, "--rounds", "6", "--drop", "0.2", "--channel-seed", "3",
                     "--out", str(tmp_path))
    assert code == 0
    summary = json.loads(text)
    res = run_session(protocol, PROFILES["toy"], make_documents(6, 0), ChannelConfig(drop_prob=0.2, rng_seed=3))
    stats = wire_stats(res.transcript)
    assert summary["depth"] == res.alice.stack.depth and summary["stacks_equal"]
    assert (summary["alice_bytes"], summary["bob_bytes"]) == (stats.alice.bytes, stats.bob.bytes)
    meta = json.loads((tmp_path / "session.json").read_text())
    assert meta["alice_q"] == res.alice.q_last.hex()
    assert load_stack(tmp_path / "bob.wss").to_bytes() == res.bob.stack.to_bytes()


def test_rws_run_over_lossy_channel(tmp_path):
    code, text = cli("run", "--protocol", "rws", "--rounds", "10", "--drop", "0.3", "--out", str(tmp_path))
    assert code == 0 and json.loads(text)["depth"] == 11
    t = Transcript.read(tmp_path / "transcript.jsonl")
    per_round = wire_stats(t, distinct=True).per_round
    assert all(per_round[r]["bob"] == 64 for r in range(2, 12))
    # retransmissions come on top of the per-round sizes
    assert wire_stats(t).bob.payload > sum(per_round[r]["bob"] for r in per_round)


def test_run_failure_exit_codes(capsys):
    code, text = cli("run", "--rounds", "3", "--drop", "1", "--max-retx", "2")
    assert code == EXIT_FAILURE[Failure.DOS] and json.loads(text)["failure"] == "dos"
    code, _ = cli("run", "--protocol", "rws", "--rounds", "20", "--corrupt", "0.1", "--channel-seed", "2")
    assert code == EXIT_FAILURE[Failure.VALIDATION]
    code, _ = cli("run", "--protocol", "rws", "--rounds", "20", "--corrupt", "0.1", "--channel-seed", "2",
                  "--mac", "auto")
    assert code == 0


def test_run_with_keys_and_scenario(tmp_path):
    cli("keygen", "--profile", "toy", "--N", "40", "--out", str(tmp_path))
    code, text = cli("run", "--keys", str(tmp_path), "--rounds", "4")
    assert code == 0 and json.loads(text)["depth"] == 5
    sc = tmp_path / "s.txt"
    sc.write_text("fault = bob-substack-claim\nseed = 4\n")
    code, text = cli("run", "--scenario", str(sc))
    assert code == 0 and json.loads(text)["passed"]


def test_verify_and_adjudicate(tmp_path):
    cli("run", "--rounds", "10", "--out", str(tmp_path))
    code, text = cli("verify", "--edge", str(tmp_path / "alice.wse"), "--stack", str(tmp_path / "bob.wss"))
    recs = records(text)
    assert code == 0 and recs[-1] == {"valid": True, "depth": 11}
    assert all(r["status"] == "confirmed" for r in recs[:-1])

    code, text = cli("adjudicate", "--dir", str(tmp_path))
    summary = records(text)[-1]
    assert code == 0 and summary["accepted"] and summary["depth"] == 11

    code, text = cli("adjudicate", "--dir", str(tmp_path), "--substack", "6")
    summary = records(text)[-1]
    assert code == EXIT_EVIDENCE and not summary["accepted"]


def test_verify_rejects_foreign_edge(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cli("run", "--rounds", "3", "--out", str(a))
    cli("run", "--rounds", "3", "--seed", "1", "--out", str(b))
    code, text = cli("verify", "--edge", str(a / "alice.wse"), "--stack", str(b / "bob.wss"))
    assert code == EXIT_EVIDENCE and not records(text)[0]["valid"]


def test_maws_refusal_and_rws_claims(tmp_path):
    m, r = tmp_path / "m", tmp_path / "r"
    assert cli("run", "--protocol", "maws", "--rounds", "4", "--refuse", "2", "--out", str(m))[0] == 0
    meta = json.loads((m / "session.json").read_text())
    assert [s for _, s in meta["outcomes"]] == ["approved", "not approved", "approved", "approved"]
    assert cli("run", "--protocol", "rws", "--rounds", "4", "--mac", "auto", "--out", str(r))[0] == 0
    code, text = cli("adjudicate", "--dir", str(r))
    signed = [rec for rec in records(text)[:-1] if rec["kind"] == "signature" and rec["status"] == "signed"]
    assert code == 0 and len(signed) == 4


def test_bench_reports_transparent_cost():
    # run to exhaustion so every segment refill is paid off by the walk through it
    code, text = cli("bench", "--w", "8", "--N", "128", "--phi", "16", "--kappa", "3", "--rounds", "2000")
    rep = json.loads(text)
    assert code == 0 and 250 < rep["pushes"] < 2000
    assert rep["recompute_hashes_per_element"] <= 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "wstack", "analyze", "--w", "4096", "--kappa", "31"],
                          capture_output=True, text=True, check=True)
    assert "259.5001" in proc.stdout
