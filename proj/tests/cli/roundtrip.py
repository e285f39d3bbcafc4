# Apache License, Version 2.0, refer to LICENSE.txt
"""End-to-end exercise of the command-line interface.

Drives the built binary through synth -> ingest-check -> test -> homogeneity
-> fit-perturbation -> export-traces -> sweep, checking output files, exit
codes, and the JSON/CSV report equivalence.
"""

import csv
import json
import os
import shutil
import subprocess
import sys

BIN = os.environ["IIACHECK_BIN"]
WORK = os.environ["IIACHECK_WORK"]


def run(*args, expect=0, env_extra=None, cwd=None):
    env = dict(os.environ)
    if env_extra:
        env.update(env_extra)
    proc = subprocess.run(
        [BIN, *args], capture_output=True, text=True, env=env, cwd=cwd
    )
    if proc.returncode != expect:
        raise AssertionError(
            f"{' '.join(args)}: exit {proc.returncode} (wanted {expect})\n"
            f"stdout: {proc.stdout}\nstderr: {proc.stderr}"
        )
    return proc


def flatten(node, path=""):
    if isinstance(node, dict):
        for key, value in node.items():
            yield from flatten(value, f"{path}/{key}" if path else key)
    elif isinstance(node, list):
        for i, value in enumerate(node):
            yield from flatten(value, f"{path}/{i}")
    else:
        yield path, node


def check_report_pair(out_dir):
    """report.csv must mirror report.json leaf for leaf, numbers byte-equal."""
    with open(os.path.join(out_dir, "report.json")) as fh:
        raw = fh.read()
    report = json.loads(raw)
    # Same parse with numeric tokens kept verbatim, for byte comparisons.
    tokens = dict(flatten(json.loads(raw, parse_float=str, parse_int=str)))
    with open(os.path.join(out_dir, "report.csv"), newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["field", "value"], rows[0]
    leaves = dict(flatten(report))
    csv_fields = [row[0] for row in rows[1:]]
    assert csv_fields == list(leaves.keys()), "CSV field order != JSON leaf order"
    for row in rows[1:]:
        field, value = row[0], row[1]
        expected = leaves[field]
        if isinstance(expected, bool):
            assert value == ("true" if expected else "false"), field
        elif isinstance(expected, (int, float)):
            assert value == tokens[field], (
                f"{field}: csv {value!r} != json token {tokens[field]!r}"
            )
        elif expected is None:
            assert value == "", field
        else:
            assert value == str(expected), field
    return report


def fresh(name):
    path = os.path.join(WORK, name)
    shutil.rmtree(path, ignore_errors=True)
    os.makedirs(path)
    return path


def main():
    os.makedirs(WORK, exist_ok=True)

    # --- synth ---------------------------------------------------------------
    data_dir = fresh("data")
    run(
        "synth", "--model", "additive", "--sigma-p", "0.4", "--m", "4",
        "--n", "25", "--seed", "11", "--out", data_dir,
    )
    questions = os.path.join(data_dir, "questions.csv")
    responses = os.path.join(data_dir, "responses.csv")
    for name in ("questions.csv", "responses.csv", "ground_truth.json"):
        assert os.path.exists(os.path.join(data_dir, name)), name
    with open(os.path.join(data_dir, "ground_truth.json")) as fh:
        truth = json.load(fh)
    assert truth["config"]["m"] == 4
    assert len(truth["sets"]) == 4

    # Determinism of the generator.
    data_dir2 = fresh("data2")
    run(
        "synth", "--model", "additive", "--sigma-p", "0.4", "--m", "4",
        "--n", "25", "--seed", "11", "--out", data_dir2,
    )
    for name in ("questions.csv", "responses.csv", "ground_truth.json"):
        with open(os.path.join(data_dir, name)) as a, open(
            os.path.join(data_dir2, name)
        ) as b:
            assert a.read() == b.read(), f"{name} differs between identical runs"

    # --- ingest-check ----------------------------------------------------------
    ingest_dir = fresh("ingest")
    proc = run(
        "ingest-check", "--questions", questions, "--responses", responses,
        "--out", ingest_dir,
    )
    report = check_report_pair(ingest_dir)
    assert report["summary"]["question_sets"] == 4
    assert report["summary"]["aggregate_only"] is False
    assert report["summary"]["testable_sets"] == 4
    assert "question_sets" in proc.stdout

    # Validation failures exit 2.
    run("ingest-check", "--questions", "/nonexistent.csv",
        "--responses", responses, expect=2)
    bad = os.path.join(WORK, "bad.csv")
    with open(bad, "w") as fh:
        fh.write("participant_id,question_id,selected\np1,zz,a\n")
    run("ingest-check", "--questions", questions, "--responses", bad, expect=2)
    run("bogus-subcommand", expect=2)
    run("test", "--questions", questions, expect=2)  # missing --responses

    # --- test (classical only) ---------------------------------------------------
    test_dir = fresh("test")
    proc = run(
        "test", "--questions", questions, "--responses", responses,
        "--no-ppc", "--alpha", "0.05", "--out", test_dir, "--seed", "3",
    )
    report = check_report_pair(test_dir)
    result = report["result"]
    assert result["testable_sets"] == 4
    assert len(result["per_set"]) == 4
    assert "ppc" not in result
    assert 0.0 <= result["gft"]["min"]["aggregate_p"] <= 1.0
    assert result["gft"]["sum"]["aggregate_nu"] == sum(
        row["nu"] for row in result["per_set"] if not row["untestable"])
    assert "GFT aggregate p" in proc.stdout

    # --- test with PPC -------------------------------------------------------------
    ppc_dir = fresh("test_ppc")
    proc = run(
        "test", "--questions", questions, "--responses", responses,
        "--alpha", "0.05", "--chains", "2", "--warmup", "200", "--draws", "100",
        "--ppc-draws", "100", "--out", ppc_dir, "--seed", "3",
    )
    report = check_report_pair(ppc_dir)
    result = report["result"]
    assert "ppc" in result
    assert result["ppc"]["draws_used"] == 100
    assert 0.0 <= result["ppc"]["sum"]["p_value"] <= 1.0
    assert result["posterior"]["sigma"]["mean"] > 0
    assert "PPC aggregate p" in proc.stdout
    for row in result["per_set"]:
        assert 0.0 <= row["p_ppc"] <= 1.0

    # Identical rerun (same seed) reproduces every number; only the echoed
    # output directory may differ.
    ppc_dir2 = fresh("test_ppc2")
    run(
        "test", "--questions", questions, "--responses", responses,
        "--alpha", "0.05", "--chains", "2", "--warmup", "200", "--draws", "100",
        "--ppc-draws", "100", "--out", ppc_dir2, "--seed", "3",
    )
    with open(os.path.join(ppc_dir, "report.json")) as a, open(
        os.path.join(ppc_dir2, "report.json")
    ) as b:
        assert json.load(a)["result"] == json.load(b)["result"], \
            "seeded test reruns differ"

    # --- homogeneity -----------------------------------------------------------------
    hom_dir = fresh("homogeneity")
    proc = run(
        "homogeneity", "--questions", questions, "--responses", responses,
        "--replicates", "200", "--out", hom_dir, "--seed", "5",
    )
    report = check_report_pair(hom_dir)
    assert 0.0 <= report["result"]["p_value"] <= 1.0
    # One synthetic participant per (question, response) pair.
    n_participants = 4 * 5 * 25
    assert len(report["per_participant"]) == n_participants
    assert "homogeneity p=" in proc.stdout

    # Dropping a participant keeps the test running on the remainder.
    first_pid = report["per_participant"][0]["participant"]
    hom_drop = fresh("homogeneity_drop")
    run(
        "homogeneity", "--questions", questions, "--responses", responses,
        "--replicates", "200", "--drop-participant", first_pid,
        "--out", hom_drop, "--seed", "5",
    )
    dropped = check_report_pair(hom_drop)
    assert len(dropped["per_participant"]) == n_participants - 1
    assert all(p["participant"] != first_pid
               for p in dropped["per_participant"])

    # Aggregate-only data is refused (exit 2).
    agg = os.path.join(WORK, "aggregate.csv")
    with open(os.path.join(data_dir, "responses.csv")) as fh:
        lines = fh.read().splitlines()
    with open(agg, "w") as fh:
        fh.write(lines[0] + "\n")
        for line in lines[1:]:
            fh.write("," + line.split(",", 1)[1] + "\n")
    run("homogeneity", "--questions", questions, "--responses", agg, expect=2)

    # But ingest-check accepts it and reports aggregate_only.
    agg_dir = fresh("ingest_agg")
    run("ingest-check", "--questions", questions, "--responses", agg,
        "--out", agg_dir)
    report = check_report_pair(agg_dir)
    assert report["summary"]["aggregate_only"] is True
    assert report["summary"]["participants"] == 0

    # --- fit-perturbation ---------------------------------------------------------------
    fit_dir = fresh("fit")
    proc = run(
        "fit-perturbation", "--questions", questions, "--responses", responses,
        "--model", "additive", "--chains", "2", "--warmup", "200",
        "--draws", "100", "--ppc-draws", "100", "--out", fit_dir, "--seed", "7",
    )
    report = check_report_pair(fit_dir)
    result = report["result"]
    assert result["scale_name"] == "sigma_p"
    assert result["scale"]["mean"] > 0
    assert result["sigma"]["mean"] > 0
    assert "ppc" in result
    assert "posterior mean sigma=" in proc.stdout

    # --- export-traces ------------------------------------------------------------------
    traces_dir = fresh("traces")
    run(
        "export-traces", "--questions", questions, "--responses", responses,
        "--chains", "2", "--warmup", "200", "--draws", "50", "--ppc",
        "--out", traces_dir, "--seed", "9",
    )
    with open(os.path.join(traces_dir, "traces.csv"), newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["chain", "draw", "scalar", "value"]
    scalars = {row[2] for row in rows[1:]}
    assert "sigma" in scalars
    assert any(s.startswith("s[") for s in scalars)
    assert len(rows) - 1 == 2 * 50 * len(scalars)
    with open(os.path.join(traces_dir, "ppc_traces.csv"), newline="") as fh:
        ppc_rows = list(csv.reader(fh))
    assert ppc_rows[0] == ["draw", "t_obs", "t_rep", "exceeded"]
    assert len(ppc_rows) - 1 == 100

    # --- sweep (classical only, twice, byte-identical) ------------------------------------
    sweep_a = fresh("sweep_a")
    sweep_b = fresh("sweep_b")
    sweep_args = [
        "sweep", "--model", "additive", "--grid", "0,0.5", "--reps", "2",
        "--m", "3", "--n", "20", "--no-ppc", "--seed", "13",
        "--alpha-grid", "0.05,0.2",
    ]
    run(*sweep_args, "--out", sweep_a)
    run(*sweep_args, "--out", sweep_b)
    for name in ("fig1_curves.csv", "fig2_rejections.csv"):
        with open(os.path.join(sweep_a, name)) as a, open(
            os.path.join(sweep_b, name)
        ) as b:
            assert a.read() == b.read(), f"{name} differs between seeded reruns"
    with open(os.path.join(sweep_a, "report.json")) as a, open(
        os.path.join(sweep_b, "report.json")
    ) as b:
        assert json.load(a)["cells"] == json.load(b)["cells"], \
            "sweep cells differ between seeded reruns"
    report = check_report_pair(sweep_a)
    assert len(report["cells"]) == 4
    with open(os.path.join(sweep_a, "fig1_curves.csv"), newline="") as fh:
        fig1 = list(csv.reader(fh))
    assert fig1[0] == ["model", "param", "value", "method", "aggregation",
                       "mean_p", "repetitions"]
    assert len(fig1) == 1 + 2 * 2  # 2 grid values x (gft min + gft sum)

    # --- IIACHECK_OUT_DIR fallback ---------------------------------------------------------
    env_dir = fresh("env_out")
    run(
        "ingest-check", "--questions", questions, "--responses", responses,
        env_extra={"IIACHECK_OUT_DIR": env_dir},
    )
    assert os.path.exists(os.path.join(env_dir, "report.json"))

    # --version / --help exit cleanly.
    run("--version")
    run("--help")

    print("cli roundtrip: all checks passed")


if __name__ == "__main__":
    try:
        main()
    except AssertionError as err:
        print(f"FAIL: {err}", file=sys.stderr)
        sys.exit(1)
