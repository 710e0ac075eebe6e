import json
import subprocess
import sys

import pytest


def run_cli(*argv, env=None):
    result = subprocess.run(
        [sys.executable, "-m", "cycdesign.cli", *argv],
        capture_output=True,
        text=True,
        env=env,
    )
    return result.returncode, result.stdout, result.stderr


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "fano.fam").write_text("7 3 1\n{0,1,3}\n")
    (d / "bad.fam").write_text("7 3 1\n{0,1,2}\n")
    (d / "broken.fam").write_text("7 3 1\n{0,1,x}\n")
    (d / "sym.fam").write_text("7 3 1\n{1,2,4}\n")
    (d / "sts13.design").write_text("13 3 1\n{0,1,4} 13\n{0,2,7} 13\n")
    return d


def test_verify_exit_codes(files):
    rc, out, _ = run_cli("verify", str(files / "fano.fam"), "--kind", "cdf")
    assert rc == 0 and json.loads(out)["result"]["ok"]

    rc, out, err = run_cli("verify", str(files / "bad.fam"), "--kind", "cdf")
    assert rc == 1
    assert json.loads(out)["result"]["witness"]["residue"] == 3
    assert "failed" in err

    rc, _, err = run_cli("verify", str(files / "broken.fam"), "--kind", "cdf")
    assert rc == 2 and "line 2" in err

    rc, _, _ = run_cli("verify", str(files / "sym.fam"), "--kind", "symmetric-ddf")
    assert rc == 0

    rc, _, _ = run_cli("verify", str(files / "sts13.design"), "--kind", "design")
    assert rc == 0


def test_enumerate_stream(files):
    rc, out, err = run_cli(
        "enumerate", "--v", "7", "--k", "3", "--lambda", "1", "--canonical"
    )
    assert rc == 0
    lines = [json.loads(line) for line in out.splitlines()]
    assert len(lines) == 2
    for line in lines:
        assert line["certificate"]["payload"]["result"]["ok"]
    assert "exhaustive=True" in err

    rc, _, _ = run_cli("enumerate", "--v", "9", "--k", "3", "--lambda", "1")
    assert rc == 2  # divisibility precondition

    rc, out, err = run_cli(
        "enumerate", "--v", "13", "--k", "3", "--lambda", "1", "--max-nodes", "5"
    )
    assert rc == 3  # node budget exhausted


def test_search_and_counterexample(files, tmp_path):
    path = tmp_path / "fano2x.design"
    rc, _, _ = run_cli("counterexample", "--k", "3", "--copies", "2", "--out", str(path))
    assert rc == 0
    assert path.read_text().startswith("7 3 2")

    rc, out, _ = run_cli("search", "--design", str(path))
    doc = json.loads(out)
    assert rc == 1 and doc["status"] == "infeasible"

    rc, out, _ = run_cli("search", "--design", str(files / "sts13.design"))
    doc = json.loads(out)
    assert rc == 0 and doc["status"] == "feasible" and "blocks" in doc

    rc, out, _ = run_cli(
        "search", "--design", str(files / "sts13.design"), "--prime-driver"
    )
    doc = json.loads(out)
    assert rc == 0 and doc["condition"]["all"]

    rc, out, _ = run_cli(
        "search", "--design", str(path), "--max-nodes", "2"
    )
    assert rc == 3 and json.loads(out)["status"] == "timeout"


def test_pipeline_command(files, tmp_path):
    rc, out, err = run_cli(
        "pipeline", "--design", str(files / "sts13.design"),
        "--epsilon", "0.02", "--seed", "1",
    )
    doc = json.loads(out)
    assert doc["kind"] == "pipeline"
    assert rc in (0, 1)
    if rc == 1:
        assert doc["payload"]["stage"] is not None


def test_campaign_with_injection_and_resume(files, tmp_path):
    outdir = tmp_path / "camp"
    fano2x = tmp_path / "fano2x.design"
    run_cli("counterexample", "--k", "3", "--copies", "2", "--out", str(fano2x))

    # lambda=2 task with the doubled Fano injected: infeasible but NOT flagged
    rc, out, err = run_cli(
        "campaign", "--v-start", "7", "--v-end", "7", "--lambda", "2",
        "--out", str(outdir), "--inject", str(fano2x),
    )
    assert rc == 0, err
    assert "CONJECTURE-COUNTEREXAMPLE" not in err
    rows = json.loads((outdir / "summary.json").read_text())
    assert rows[0]["infeasible"] >= 1

    # plain Novak campaign over 7..13, then resume with zero new nodes
    outdir2 = tmp_path / "camp2"
    rc, out, _ = run_cli("campaign", "--v-start", "7", "--v-end", "13", "--out", str(outdir2))
    assert rc == 0
    rows = json.loads((outdir2 / "summary.json").read_text())
    assert {r["v"]: r["feasible"] for r in rows}[7] == 2
    assert all(r["infeasible"] == 0 for r in rows)

    rc, out, _ = run_cli("campaign", "--v-start", "7", "--v-end", "13", "--out", str(outdir2))
    rows = json.loads((outdir2 / "summary.json").read_text())
    assert all(r["new_nodes"] == 0 for r in rows)


def test_campaign_certificates_reverify(tmp_path):
    outdir = tmp_path / "camp3"
    rc, _, _ = run_cli("campaign", "--v-start", "7", "--v-end", "7", "--out", str(outdir))
    assert rc == 0
    certs = sorted((outdir / "v7").glob("*.json"))
    certs = [c for c in certs if c.name != "enumeration.json"]
    assert certs
    for cert in certs:
        rc, out, _ = run_cli("verify", str(cert), "--kind", "certificate")
        assert rc == 0, cert
