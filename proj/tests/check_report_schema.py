"""Run a few quick verifications and validate their reports against the schema."""
import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema

binary, schema_path = sys.argv[1], sys.argv[2]
schema = json.loads(pathlib.Path(schema_path).read_text())

runs = [
    ["verify", "estring-10", "--n", "300", "--reps", "200"],
    ["verify", "e22-antisym", "--theorem", "fclt", "--n", "300", "--reps", "200"],
    ["verify", "eperm1-blocks", "--theorem", "renewal", "--x", "300", "--reps", "200"],
    ["verify", "eperm1-blocks", "--theorem", "stopped", "--x", "300", "--reps", "200"],
    ["verify", "antisym-sine-degenerate"],
    ["verify", "estring-10", "--theorem", "gaussian", "--draws", "2000"],
]

with tempfile.TemporaryDirectory() as tmp:
    for i, args in enumerate(runs):
        out = pathlib.Path(tmp) / f"r{i}.json"
        proc = subprocess.run([binary, *args, "--seed", "3", "--out", str(out)], capture_output=True, text=True)
        if proc.returncode not in (0, 1):
            sys.exit(f"{args}: exit {proc.returncode}: {proc.stderr}")
        report = json.loads(out.read_text())
        jsonschema.validate(report, schema)
        print("ok", " ".join(args))
