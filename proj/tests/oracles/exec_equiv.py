"""Execution-equivalence oracle.

Reads a JSON array of {"id", "original", "transformed", "inputs"} from the file
given as argv[1], runs both functions on every input and prints a JSON summary
{"cases": n, "calls": m, "mismatches": [...]}. Exit status 1 on any mismatch.
Exceptions compare by type; generators are drained to lists.
"""
import collections
import functools
import inspect
import itertools
import json
import math
import re
import sys

BASE = {"functools": functools, "math": math, "itertools": itertools,
        "collections": collections, "re": re}


def load(code):
    ns = dict(BASE)
    exec(compile(code, "<case>", "exec"), ns)
    fns = [v for k, v in ns.items() if k not in BASE and k != "__builtins__" and callable(v)]
    if len(fns) != 1:
        raise RuntimeError(f"expected one function, found {len(fns)}")
    return fns[0]


def outcome(fn, item):
    try:
        value = fn(*item.get("args", []), **item.get("kwargs", {}))
        if inspect.isgenerator(value):
            value = list(value)
        return "ok:" + repr(value)
    except Exception as exc:  # noqa: BLE001
        return "raise:" + type(exc).__name__


def main():
    with open(sys.argv[1], encoding="utf-8") as fh:
        cases = json.load(fh)
    mismatches = []
    calls = 0
    for case in cases:
        try:
            orig = load(case["original"])
            new = load(case["transformed"])
        except Exception as exc:  # noqa: BLE001
            mismatches.append({"id": case["id"], "error": f"{type(exc).__name__}: {exc}"})
            continue
        for item in case["inputs"]:
            calls += 1
            a, b = outcome(orig, item), outcome(new, item)
            if a != b:
                mismatches.append({"id": case["id"], "input": item, "original": a, "transformed": b})
    print(json.dumps({"cases": len(cases), "calls": calls, "mismatches": mismatches}))
    return 1 if mismatches else 0


if __name__ == "__main__":
    sys.exit(main())
