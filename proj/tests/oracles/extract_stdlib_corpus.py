"""Extract real top-level functions from the CPython stdlib into a JSONL corpus.

Each record is {"id", "code", "docstring", "language"}: the function source with
its docstring statement removed, and the first docstring line as the summary.
Only functions inside the supported syntactic subset are kept (no classes,
async, match statements or f-string debug specifiers).

Usage: python3 extract_stdlib_corpus.py OUT.jsonl [--count 300]
"""
import argparse
import ast
import json
import pathlib
import sys
import sysconfig

REJECT_NODES = (ast.ClassDef, ast.AsyncFunctionDef, ast.Await, ast.AsyncFor,
                ast.AsyncWith, ast.Match)


def in_subset(fn, src):
    for node in ast.walk(fn):
        if isinstance(node, REJECT_NODES):
            return False
    seg = ast.get_source_segment(src, fn)
    if seg is None or "=}" in seg or "= }" in seg:
        return False
    return True


def strip_docstring(lines, fn):
    doc = fn.body[0]
    if not (isinstance(doc, ast.Expr) and isinstance(doc.value, ast.Constant)
            and isinstance(doc.value.value, str)):
        return None
    if len(fn.body) < 2:
        return None
    first = lines[doc.lineno - 1]
    last = lines[doc.end_lineno - 1]
    if first[:doc.col_offset].strip() or last[doc.end_col_offset:].strip():
        return None
    start = fn.lineno if not fn.decorator_list else fn.decorator_list[0].lineno
    kept = lines[start - 1:doc.lineno - 1] + lines[doc.end_lineno:fn.end_lineno]
    return "".join(kept)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out")
    ap.add_argument("--count", type=int, default=300)
    args = ap.parse_args()
    root = pathlib.Path(sysconfig.get_paths()["stdlib"])
    files = sorted(p for p in root.glob("*.py"))
    for pkg in ("json", "email", "http", "urllib", "logging", "xml/dom",
                "importlib", "concurrent/futures", "wsgiref", "html"):
        files += sorted((root / pkg).glob("*.py"))
    cands = []
    seen = set()
    for path in files:
        try:
            src = path.read_text(encoding="utf-8")
            tree = ast.parse(src)
        except (SyntaxError, UnicodeDecodeError, ValueError):
            continue
        lines = src.splitlines(keepends=True)
        for fn in tree.body:
            if not isinstance(fn, ast.FunctionDef) or fn.col_offset != 0:
                continue
            if not in_subset(fn, src):
                continue
            nlines = fn.end_lineno - fn.lineno + 1
            if nlines < 3 or nlines > 60:
                continue
            code = strip_docstring(lines, fn)
            if code is None:
                continue
            summary = ast.get_docstring(fn).strip().splitlines()[0].strip()
            if not summary:
                continue
            try:
                ast.parse(code)
            except SyntaxError:
                continue
            if code in seen:
                continue
            seen.add(code)
            rel = path.relative_to(root).as_posix()
            cands.append({"id": f"{rel}:{fn.name}:{fn.lineno}", "code": code,
                          "docstring": summary, "language": "python"})
    if len(cands) < args.count:
        sys.exit(f"only {len(cands)} candidates")
    stride = len(cands) / args.count
    picked = [cands[int(i * stride)] for i in range(args.count)]
    with open(args.out, "w", encoding="utf-8") as fh:
        for rec in picked:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    print(f"{len(cands)} candidates, wrote {len(picked)}")


if __name__ == "__main__":
    main()
