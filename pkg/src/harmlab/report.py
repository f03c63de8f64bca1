"""Summaries of run manifests, with fitted quantities checked against their bands."""
from __future__ import annotations

import glob
import json
import os


def load_manifests(path: str) -> list[dict]:
    files = sorted(glob.glob(os.path.join(path, "**", "manifest_*.json"), recursive=True))
    if not files:
        raise FileNotFoundError(f"no manifest under {path!r}")
    out = []
    for f in files:
        with open(f) as fh:
            m = json.load(fh)
        m["_path"] = os.path.relpath(f, path)
        out.append(m)
    return out


def flagged(entry: dict) -> bool:
    if "band" in entry and "value" in entry:
        centre, half = entry["band"]
        return abs(entry["value"] - centre) > half
    return not entry["pass"]


def report(path: str) -> str:
    """One line per manifest result; flagged rows are marked and counted."""
    lines = []
    flags = 0
    for m in load_manifests(path):
        lines.append(f"{m['_path']}  {m['subcommand']}  pass={m['pass']}  wall={m['wall_time']}s")
        for r in m["results"]:
            bad = flagged(r)
            flags += bad
            value = "%.6g" % r["value"] if "value" in r else "-"
            band = " band %.3g +/- %.3g" % tuple(r["band"]) if "band" in r else ""
            lines.append(f"  {'FLAG' if bad else 'ok  '}  {r['name']:<28} {value}{band}")
    lines.append(f"{flags} flagged")
    return "\n".join(lines) + "\n"
