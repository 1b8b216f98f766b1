import json

import pytest

from percolab.percolation import load_configuration
from percolab.runner import (
    USAGE_ERROR,
    load_manifest,
    main,
    manifest_hash,
    parse_manifest_text,
    run,
)


def write_manifest(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


THETA_MANIFEST = """
schema_version = 1
kind = estimate
quantity = theta
d = 2
N = 5
R = 3
p = 1.0
n_samples = 400
seed = 11
"""


def test_parse_manifest():
    m = parse_manifest_text("a = 1\n# comment\nb = two words\n")
    assert m == {"a": "1", "b": "two words"}
    with pytest.raises(Exception):
        parse_manifest_text("novalue\n")
    with pytest.raises(Exception):
        parse_manifest_text("a = 1\na = 2\n")


def test_manifest_hash_is_order_independent():
    a = manifest_hash({"x": "1", "y": "2"})
    b = manifest_hash({"y": "2", "x": "1"})
    assert a == b
    assert a != manifest_hash({"x": "1", "y": "3"})


def test_estimate_theta_run(tmp_path):
    mpath = write_manifest(tmp_path, "m.manifest", THETA_MANIFEST)
    out = tmp_path / "out"
    code = main(["--manifest", str(mpath), "--out", str(out)])
    assert code == 0
    est = json.loads((out / "estimate.json").read_text())
    assert est["estimate"] == 1.0
    summary = json.loads((out / "run_summary.json").read_text())
    assert summary["status"] == 0
    assert summary["manifest_sha256"] == manifest_hash(load_manifest(mpath))
    assert "estimate.json" in summary["outputs"]


def test_malformed_manifest_exit_64(tmp_path):
    mpath = write_manifest(tmp_path, "bad.manifest", "schema_version = 1\nkind = estimate\nquantity = theta\nd = 2\nR = 3\np = 1.0\nn_samples = 10\n")
    out = tmp_path / "out_bad"
    code = main(["--manifest", str(mpath), "--out", str(out)])
    assert code == USAGE_ERROR
    assert not out.exists() or not (out / "run_summary.json").exists()


def test_unknown_kind_and_schema(tmp_path):
    assert run({"schema_version": "2", "kind": "estimate"}, tmp_path / "a") == USAGE_ERROR
    assert run({"schema_version": "1", "kind": "nope"}, tmp_path / "b") == USAGE_ERROR


def test_missing_manifest_file(tmp_path):
    assert main(["--manifest", str(tmp_path / "absent"), "--out", str(tmp_path / "o")]) == USAGE_ERROR


def test_sample_kind_roundtrip(tmp_path):
    mpath = write_manifest(tmp_path, "s.manifest", """
schema_version = 1
kind = sample
d = 2
N = 5
R = 3
p = 0.4
seed = 7
sample_index = 3
""")
    out = tmp_path / "cfg"
    assert main(["--manifest", str(mpath), "--out", str(out)]) == 0
    cfg = load_configuration(out / "configuration.bin")
    assert cfg.p == 0.4 and cfg.seed == 7 and cfg.sample_index == 3


def test_classify_kind(tmp_path):
    mpath = write_manifest(tmp_path, "c.manifest", """
schema_version = 1
kind = classify
d = 2
N = 5
R = 3
p = 1.0
seed = 1
""")
    out = tmp_path / "cls"
    assert main(["--manifest", str(mpath), "--out", str(out)]) == 0
    rows = (out / "classification.csv").read_text().strip().splitlines()
    assert rows[0] == "b0,b1,status,code"
    assert all(line.endswith("good,ok") for line in rows[1:])


def test_counting_kind(tmp_path):
    mpath = write_manifest(tmp_path, "k.manifest", """
schema_version = 1
kind = counting
d = 2
mode = axis
animal_n_max = 5
partitions_n_max = 30
""")
    out = tmp_path / "cnt"
    assert main(["--manifest", str(mpath), "--out", str(out)]) == 0
    summary = json.loads((out / "counting_summary.json").read_text())
    assert summary["partitions"]["n_max"] == 30


def test_verify_counting_kind(tmp_path):
    mpath = write_manifest(tmp_path, "v.manifest", """
schema_version = 1
kind = verify
suite = counting
seed = 3
n_samples = 200
""")
    out = tmp_path / "ver"
    assert main(["--manifest", str(mpath), "--out", str(out)]) == 0
    rep = json.loads((out / "verify_report.json").read_text())
    assert rep["counting"]["ok"] is True


def test_refuses_mismatched_replay(tmp_path):
    mpath = write_manifest(tmp_path, "m.manifest", THETA_MANIFEST)
    out = tmp_path / "out"
    assert main(["--manifest", str(mpath), "--out", str(out)]) == 0
    other = write_manifest(tmp_path, "m2.manifest", THETA_MANIFEST.replace("seed = 11", "seed = 12"))
    assert main(["--manifest", str(other), "--out", str(out)]) == USAGE_ERROR
    # same manifest replays fine
    assert main(["--manifest", str(mpath), "--out", str(out)]) == 0


def test_seed_override_changes_hash(tmp_path):
    mpath = write_manifest(tmp_path, "m.manifest", THETA_MANIFEST)
    out1 = tmp_path / "o1"
    out2 = tmp_path / "o2"
    assert main(["--manifest", str(mpath), "--out", str(out1)]) == 0
    assert main(["--manifest", str(mpath), "--seed", "12", "--out", str(out2)]) == 0
    h1 = json.loads((out1 / "run_summary.json").read_text())["manifest_sha256"]
    h2 = json.loads((out2 / "run_summary.json").read_text())["manifest_sha256"]
    assert h1 != h2


def test_byte_identical_outputs_across_workers(tmp_path):
    mpath = write_manifest(tmp_path, "m.manifest", """
schema_version = 1
kind = expansion
d = 2
N = 10
R = 7
p = 0.85
n_samples = 120
n_max = 40
seed = 5
conditioned = true
""")
    outs = []
    for tag, workers in (("w1", None), ("w4", 4)):
        out = tmp_path / tag
        argv = ["--manifest", str(mpath), "--out", str(out)]
        if workers:
            argv += ["--workers", str(workers)]
        assert main(argv) == 0
        outs.append(out)
    for name in ("expansion.csv", "expansion_summary.json", "run_summary.json"):
        a = (outs[0] / name).read_bytes()
        b = (outs[1] / name).read_bytes()
        assert a == b, f"{name} differs across worker counts"


def test_tails_insufficient_data_exit_2(tmp_path):
    mpath = write_manifest(tmp_path, "t.manifest", """
schema_version = 1
kind = tails
d = 2
N = 5
R = 3
p = 1.0
n_samples = 10000
seed = 2
statistic = touching
""")
    out = tmp_path / "tails"
    assert main(["--manifest", str(mpath), "--out", str(out)]) == 2
    summary = json.loads((out / "run_summary.json").read_text())
    assert summary["status"] == 2 and summary["error"]
