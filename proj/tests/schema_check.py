"""Validate CLI JSON reports against docs/report.schema.json and check
that the text and JSON renderings report the same verdicts."""

import json
import os
import re
import subprocess
import sys
import tempfile

import jsonschema

BIN, SOURCE = sys.argv[1], sys.argv[2]
DATA = os.path.join(SOURCE, "data")

RUNS = [
    ["analyze", "ex3_7.sip", "--point=-1,0"],
    ["analyze", "ex3_5.sip", "--point=-1,0", "--variant=perturbed,unperturbed,normalized"],
    ["analyze", "ex4_11.sip", "--point=0,0", "--slater=0,1"],
    ["solve", "convex_toy.sip"],
    ["solve", "disk.sip", "--max-iters=1"],
]


def verdicts_from_text(text):
    found = {}
    for name in ("EMFCQ", "PMFCQ", "NFMCQ", "SSC"):
        m = re.search(r"^%s\s+(\w+)" % name, text, re.M)
        found[name.lower()] = m.group(1) if m else None
    found["stationarity"] = re.findall(r"^(unperturbed_kkt|perturbed_stationarity|convex_global): (\w+)", text, re.M)
    return found


def main():
    with open(os.path.join(SOURCE, "docs", "report.schema.json")) as f:
        schema = json.load(f)
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    failures = 0
    for run in RUNS:
        with tempfile.TemporaryDirectory() as tmp:
            out = os.path.join(tmp, "report.json")
            cmd = [BIN, run[0], os.path.join(DATA, run[1]), *run[2:], "--report=both", "--output=" + out,
                   "--probe-dirs=8", "--probe-samples=300"]
            proc = subprocess.run(cmd, capture_output=True, text=True)
            if proc.returncode not in (0, 4):
                print("exit", proc.returncode, " ".join(cmd), proc.stderr)
                failures += 1
                continue
            with open(out) as f:
                doc = json.load(f)
        errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
        for e in errors:
            print(run[1], "/".join(map(str, e.path)), e.message)
        failures += len(errors)
        if proc.returncode == 4:
            continue
        text = verdicts_from_text(proc.stdout)
        for name in ("emfcq", "pmfcq", "nfmcq", "ssc"):
            if text[name] != doc["cq"][name]["verdict"]:
                print(run[1], name, "text", text[name], "json", doc["cq"][name]["verdict"])
                failures += 1
        want = [(s["condition"], s["outcome"]) for s in doc["stationarity"]]
        if text["stationarity"] != want:
            print(run[1], "stationarity text", text["stationarity"], "json", want)
            failures += 1
    print("schema check:", "ok" if failures == 0 else "%d failures" % failures)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
