#!/usr/bin/env python3
"""End-to-end checks of the opplab binary: exit codes, schema, suite CSV."""

import csv
import io
import json
import os
import subprocess
import sys
import tempfile

import jsonschema

CLI = sys.argv[1]
ROOT = sys.argv[2]
FORMS = os.path.join(ROOT, "data", "forms")
with open(os.path.join(ROOT, "schema", "run_record.schema.json")) as fh:
    SCHEMA = json.load(fh)

failures = []


def run(*args, env=None):
    p = subprocess.run([CLI, *args], capture_output=True, text=True, env=env, timeout=600)
    return p.returncode, p.stdout, p.stderr


def check(name, cond, info=""):
    print(("ok   " if cond else "FAIL ") + name + (f"  {info}" if info and not cond else ""))
    if not cond:
        failures.append(name)


def record(name, args, code=0, env=None):
    rc, out, err = run(*args, env=env)
    check(f"{name}: exit {code}", rc == code, f"got {rc}: {err.strip()}")
    try:
        rec = json.loads(out)
    except json.JSONDecodeError:
        check(f"{name}: JSON output", False, out[:200])
        return None
    try:
        jsonschema.validate(rec, SCHEMA)
        check(f"{name}: schema", True)
    except jsonschema.ValidationError as e:
        check(f"{name}: schema", False, e.message)
    return rec


def form(name):
    return os.path.join(FORMS, name + ".json")


tmp = tempfile.mkdtemp()
basis = os.path.join(tmp, "basis.json")
with open(basis, "w") as fh:
    json.dump({"generators": [[2, 0], [1, 3]]}, fh)
amat = os.path.join(tmp, "a.json")
with open(amat, "w") as fh:
    json.dump([[2 ** 0.5]], fh)
bad_form = os.path.join(tmp, "bad.json")
with open(bad_form, "w") as fh:
    fh.write('{"diag": [1, "pi"]}')

rec = record("count", ["count", "--form", form("hyperbolic2"), "--a", "-0.5", "--b", "0.5", "--r", "2"])
check("count: value", rec and rec["results"]["count_lo"] == 9)
rec = record("count shifted", ["count", "--form", form("hyperbolic2"), "--a", "0.5", "--b", "3.5", "--r", "2"])
check("count shifted: value", rec and rec["results"]["count_lo"] == 6)

rec = record("volume", ["volume", "--form", form("hyperbolic2"), "--a", "-0.5", "--b", "0.5", "--r", "2", "--method", "quad"])
check("volume: value", rec and abs(rec["results"]["volume"] - 4.433) < 0.01)
rec = record("delta", ["delta", "--form", form("hyperbolic2"), "--a", "-0.5", "--b", "0.5", "--r", "2"])
check("delta: value", rec and abs(rec["results"]["delta"] - 1.03) < 0.01)

mc = ["volume", "--form", form("irrational5"), "--a", "-1", "--b", "1", "--r", "4", "--method", "mc", "--budget", "2e5", "--seed", "7"]
a = record("mc seed 7", mc + ["--threads", "1"])
b = record("mc seed 7 rerun", mc + ["--threads", "3"])
check("mc: deterministic across threads", a and b and a["results"] == b["results"])

rec = record("theta", ["theta", "--form", form("hyperbolic2"), "--r", "2", "--t", "0.3", "--v", "0,0", "--integral", "--poisson-terms", "5"])
check("theta: poisson residual", rec and rec["results"]["poisson_residual"] < 1e-8)
rec = record("psi", ["psi", "--form", form("hyperbolic2"), "--r", "2", "--t", "0.3"])
check("psi: at least 1", rec and rec["results"]["value"] >= 1)

rec = record("lat minima", ["lat", "minima", "--basis", basis])
check("lat minima: values", rec and abs(rec["results"]["minima"][0] - 2) < 1e-12)
record("lat alpha", ["lat", "alpha", "--basis", basis, "--mode", "surrogate"])
record("lat dual", ["lat", "dual", "--basis", basis])
rec = record("lat count", ["lat", "count", "--basis", basis, "--mu", "1.5"])
check("lat count: origin only", rec and rec["results"]["count"] == 1)

rec = record("orbit tau", ["orbit", "tau", "--lambda", "4", "--a", "10"])
check("orbit tau: value", rec and abs(rec["results"]["tau"] - 0.5 * (100 + 0.01)) < 1e-8)
record("orbit gamma", ["orbit", "gamma", "--form", form("irrational5"), "--r", "4", "--tmin", "0.5", "--tmax", "2", "--beta", "0.45", "--grid", "32"])
record("orbit gm", ["orbit", "gm", "--d", "2", "--beta", "1.2", "--a", "2,4,8,16", "--quad-n", "64"])

rec = record("dio min", ["dio", "min", "--A", amat, "--R", "5"])
check("dio min: best m", rec and rec["results"]["best_m"] == 5)
record("dio type", ["dio", "type", "--form", form("sqrt2_pair"), "--rmax", "256"])
record("dio rho", ["dio", "rho", "--form", form("irrational5"), "--r", "8", "--width", "1.0", "--beta", "0.45", "--grid", "4", "--gamma-grid", "16"])

rec = record("solve", ["solve", "--form", form("root2_indefinite"), "--eps", "0.1"])
check("solve: |Q| < eps", rec and abs(rec["results"]["value"]) < 0.1)
rec = record("gaps", ["gaps", "--form", form("hyperbolic2"), "--r", "8", "--c0", "0.25"])
check("gaps: d_r", rec and rec["results"]["d_r"] == 2)
rec = record("bounds", ["bounds", "--form", form("root2_indefinite"), "--eps", "0.1", "--eta", "0.01"])
check("bounds: certificate", rec and rec["results"]["ratio"] is not None)

# error paths
record("malformed form", ["count", "--form", bad_form, "--a", "0", "--b", "1", "--r", "2"], code=2)
record("missing form", ["count", "--form", os.path.join(tmp, "none.json"), "--a", "0", "--b", "1", "--r", "2"], code=2)
record("degenerate form", ["solve", "--form", form("hyperbolic2"), "--eps", "0.1", "--method", "resonant"], code=2)
record("budget exhausted", ["count", "--form", form("irrational5"), "--a", "-1", "--b", "1", "--r", "16", "--budget", "1"], code=3)
rc, _, _ = run("count", "--no-such-flag")
check("unknown flag: exit 2", rc == 2)
rc, _, _ = run("--help")
check("help: exit 0", rc == 0)

# --out and --config round trip
out = os.path.join(tmp, "rec.json")
rc, stdout, _ = run("count", "--form", form("hyperbolic2"), "--a", "-0.5", "--b", "0.5", "--r", "2", "--out", out)
check("--out: file written, stdout empty", rc == 0 and stdout == "" and os.path.exists(out))
with open(out) as fh:
    first = json.load(fh)
cfg = os.path.join(tmp, "cfg.json")
replay = dict(first["config"], out="")
with open(cfg, "w") as fh:
    json.dump(replay, fh)
rc, stdout, _ = run("--config", cfg)
check("--config replay reproduces results", rc == 0 and json.loads(stdout)["results"] == first["results"])

# calibration override: env var and flag both reach the record
cal = os.path.join(ROOT, "data", "calibration.json")
env = dict(os.environ, OPPLAB_CALIBRATION=cal)
rec = record("env calibration", ["orbit", "tau", "--lambda", "3", "--a", "2"], env=env)
check("env calibration: version", rec and rec["versions"]["calibration"] == 1)
env_missing = dict(os.environ, OPPLAB_CALIBRATION=os.path.join(tmp, "none.json"))
rec = record("missing calibration", ["orbit", "tau", "--lambda", "3", "--a", "2"], env=env_missing)
check("missing calibration: version null", rec and rec["versions"]["calibration"] is None)
rec = record("flag calibration", ["orbit", "tau", "--lambda", "3", "--a", "2", "--calibration", cal], env=env_missing)
check("flag calibration: version", rec and rec["versions"]["calibration"] == 1)

# suite
manifest = os.path.join(tmp, "manifest.json")
runs = [
    {"command": "count", "form": form("hyperbolic2"), "params": {"a": -0.5, "b": 0.5, "r": 2}},
    {"command": "count", "form": bad_form, "params": {"a": 0, "b": 1, "r": 2}},
    {"command": "gaps", "form": form("hyperbolic2"), "params": {"r": 8, "c0": 0.25}},
]
with open(manifest, "w") as fh:
    json.dump(runs, fh)
rc, csv1, _ = run("suite", "--manifest", manifest)
rows = list(csv.DictReader(io.StringIO(csv1)))
check("suite: 3 rows", rc == 0 and len(rows) == 3)
check("suite: failure marked", len(rows) == 3 and rows[1]["status"] == "error" and rows[1]["exit_code"] == "2")
check("suite: metrics", len(rows) == 3 and rows[0]["count_lo"] == "9" and rows[2]["d_r"] == "2")
rc, csv2, _ = run("suite", "--manifest", manifest, "--parallel")
strip = lambda text: [r[:-1] for r in csv.reader(io.StringIO(text))]
check("suite: rerun identical except runtime", strip(csv1) == strip(csv2))
recs = os.path.join(tmp, "records.json")
rc, _, _ = run("suite", "--manifest", manifest, "--records", recs)
with open(recs) as fh:
    for i, r in enumerate(json.load(fh)):
        try:
            jsonschema.validate(r, SCHEMA)
            check(f"suite record {i}: schema", True)
        except jsonschema.ValidationError as e:
            check(f"suite record {i}: schema", False, e.message)

print(f"{len(failures)} failures")
sys.exit(1 if failures else 0)
