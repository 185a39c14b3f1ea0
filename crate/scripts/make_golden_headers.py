#!/usr/bin/env python3
"""Reference CHAT header reader used to freeze golden parse output.

Reads the leading @-header block of each fixture transcript the way the
CHAT manual describes it (@Participants declares CODE [NAME] ROLE triples,
@ID carries language|corpus|code|age|sex|group|SES|role|education|custom|,
@Types lists study labels) and dumps one JSON object per file.

Usage: python3 scripts/make_golden_headers.py <headers_dir> <out.json>

The output is committed as a golden file; regenerate only when the
fixtures change, and audit the diff by hand.
"""

import json
import sys
from pathlib import Path

DAYS_PER_MONTH = 30.4375


def parse_age(token):
    token = token.strip()
    if not token:
        return None
    years, _, rest = token.partition(";")
    months, _, days = rest.partition(".")
    y = int(years)
    m = int(months) if months.strip() else 0
    d = int(days) if days.strip() else 0
    if m >= 12:
        raise ValueError(f"months out of range in {token!r}")
    raw = y * 12 + m + d / DAYS_PER_MONTH
    # round half-up to one decimal place
    return int(raw * 10 + 0.5) / 10


def header_value(line):
    _, _, rest = line.partition(":")
    if rest.startswith("\t"):
        rest = rest[1:]
    return rest.strip()


def read_header(path):
    out = {
        "corpus": "",
        "languages": [],
        "types": [],
        "participants": {},
    }
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.startswith("@"):
            break
        keyword = line.split(":", 1)[0]
        if keyword == "@Participants":
            for entry in header_value(line).split(","):
                tokens = entry.split()
                if len(tokens) < 2:
                    raise ValueError(f"{path.name}: bad participant entry {entry!r}")
                code = tokens[0]
                role = tokens[-1]
                name = " ".join(tokens[1:-1]) or None
                out["participants"][code] = {
                    "name": name,
                    "role": role,
                    "language": None,
                    "age": None,
                    "age_months": None,
                    "sex": None,
                    "group": None,
                    "ses": None,
                    "education": None,
                    "custom": None,
                }
        elif keyword == "@ID":
            slots = [s.strip() for s in header_value(line).split("|")]
            if len(slots) < 10:
                raise ValueError(f"{path.name}: short @ID line {line!r}")
            language, corpus, code, age, sex, group, ses, role, education, custom = slots[:10]
            if not out["corpus"] and corpus:
                out["corpus"] = corpus
            rec = out["participants"][code]
            rec["language"] = language or None
            months = parse_age(age)
            if months is not None:
                rec["age"] = age
                rec["age_months"] = months
            rec["sex"] = sex or None
            rec["group"] = group or None
            rec["ses"] = ses or None
            rec["education"] = education or None
            rec["custom"] = custom or None
        elif keyword == "@Types":
            out["types"] = [t.strip() for t in header_value(line).split(",") if t.strip()]
        elif keyword == "@Languages":
            out["languages"] = [
                t for piece in header_value(line).split(",") for t in piece.split() if t
            ]
    if not out["participants"]:
        raise ValueError(f"{path.name}: no participants")
    return out


def main():
    headers_dir = Path(sys.argv[1])
    out_path = Path(sys.argv[2])
    golden = {}
    for path in sorted(headers_dir.glob("*.cha")):
        golden[path.name] = read_header(path)
    out_path.write_text(json.dumps(golden, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out_path} ({len(golden)} files)")


if __name__ == "__main__":
    main()
