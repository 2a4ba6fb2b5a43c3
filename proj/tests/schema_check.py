# Copyright 2026 The rtnerf Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Runs every CLI command and validates each JSON artifact against its schema."""

import argparse
import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--cli", required=True)
    parser.add_argument("--source-dir", required=True)
    args = parser.parse_args()
    cli = str(pathlib.Path(args.cli).resolve())
    src = pathlib.Path(args.source_dir).resolve()
    schemas = {p.name.removesuffix(".schema.json"): json.loads(p.read_text()) for p in (src / "schemas").glob("*.json")}
    for s in schemas.values():
        jsonschema.Draft202012Validator.check_schema(s)

    failures = []

    def check(kind, path):
        doc = json.loads(pathlib.Path(path).read_text())
        errors = list(jsonschema.Draft202012Validator(schemas[kind]).iter_errors(doc))
        for e in errors:
            failures.append(f"{path} ({kind}): {e.message} at {list(e.path)}")
        return doc

    def must_reject(kind, doc, why):
        if jsonschema.Draft202012Validator(schemas[kind]).is_valid(doc):
            failures.append(f"{kind} schema accepted {why}")

    with tempfile.TemporaryDirectory() as tmp:
        t = pathlib.Path(tmp)

        def run(*cmd):
            subprocess.run([cli, *cmd], check=True, cwd=t, stdout=subprocess.DEVNULL)

        run("gen-scene", "--res", "32", "--occupancy", "0.02", "--factor-sparsity", "0.1", "0.95", "--seed", "5",
            "--out", "s.bin")
        run("render", "--scene", "s.bin", "--codec", "--width", "16", "--height", "16", "--image-out", "r.ppm",
            "--trace-out", "t.json", "--codec-out", "c.json")
        run("compare", "--scene", "s.bin", "--width", "16", "--height", "16", "--out", "cmp.json")
        run("codec-stats", "--scene", "s.bin", "--out", "cs.json", "--dump-dir", "dump")
        run("simulate", "--config", str(src / "configs/rt-nerf-edge.json"), "--trace", "t.json", "--codec-stats",
            "c.json", "--compare-config", str(src / "configs/rt-nerf-cloud.json"), "--out", "sim.json")

        trace = check("trace", t / "t.json")
        check("codec_stats", t / "c.json")
        check("compare", t / "cmp.json")
        check("codec_report", t / "cs.json")
        report = check("cycle_report", t / "sim.json")
        variants = set()
        for p in sorted((t / "dump").glob("*.json")):
            variants.add(check("encoding_dump", p)["variant"])
        if variants != {"bitmap", "coo"}:
            failures.append(f"expected dumps of both variants, got {sorted(variants)}")
        for p in sorted(t.glob("*.manifest.json")):
            check("manifest", p)
        if len(list(t.glob("*.manifest.json"))) != 5:
            failures.append("expected one manifest per command")
        for p in sorted((src / "configs").glob("*.json")):
            check("hardware_config", p)

        broken = dict(trace)
        del broken["mlp_macs"]
        must_reject("trace", broken, "a trace without mlp_macs")
        must_reject("trace", {**trace, "extra": 1}, "a trace with an unknown key")
        must_reject("cycle_report", {**report, "fractions": {**report["fractions"], "step1": 1.5}}, "a fraction > 1")

    for f in failures:
        print("FAIL", f)
    print(f"schema check: {len(failures)} failure(s)")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
