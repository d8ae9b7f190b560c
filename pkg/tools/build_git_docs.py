#!/usr/bin/env python3
"""Build the shipped git documentation snapshot.

Harvests the command catalog (`git help -a`), each command's usage and
option text (`git <cmd> -h`), and the longer guide listing (`git help -g`)
from the locally installed git, and writes the structured pages to
src/gitduet/reference/git_docs.json. Run whenever the build image's git
changes; the artifact serves the snapshot, never live man pages.
"""

from __future__ import annotations

import json
import re
import subprocess
import sys
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src/gitduet/reference/git_docs.json"


def run(*args: str) -> str:
    proc = subprocess.run(["git", *args], capture_output=True, text=True)
    return proc.stdout if proc.stdout else proc.stderr


def command_summaries() -> dict[str, str]:
    listing = run("help", "-a")
    out: dict[str, str] = {}
    for line in listing.splitlines():
        match = re.match(r"^   (\S+)\s{2,}(.+)$", line)
        if match:
            out[match.group(1)] = match.group(2).strip()
    return out


def usage_sections(command: str) -> list[list[str]]:
    text = run(command, "-h")
    usage_lines: list[str] = []
    option_lines: list[str] = []
    in_usage = True
    for line in text.splitlines():
        if in_usage and (line.startswith("usage:") or line.startswith("   or:") or line.strip() == ""):
            if line.strip():
                usage_lines.append(re.sub(r"^(usage:|   or:)\s*", "", line))
            if line.strip() == "" and usage_lines:
                in_usage = False
            continue
        in_usage = False
        if line.strip():
            option_lines.append(line.rstrip())
    sections = []
    if usage_lines:
        sections.append(["Usage", "\n".join(usage_lines)])
    if option_lines:
        sections.append(["Options", "\n".join(option_lines)])
    return sections


def main() -> int:
    version = run("--version").strip()
    summaries = command_summaries()
    if not summaries:
        print("could not harvest the git command catalog", file=sys.stderr)
        return 1
    pages = []
    for command, summary in sorted(summaries.items()):
        if command in ("gitk", "gui", "citool", "scalar"):
            continue  # GUI tools have no place in a terminal trainer
        sections = [["Summary", summary]]
        sections.extend(usage_sections(command))
        pages.append(
            {
                "commandName": command,
                "title": f"git {command}",
                "sections": sections,
                "sourceNote": f"generated from the built-in help of {version}",
            }
        )
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps({"pages": pages}, indent=1, sort_keys=True))
    print(f"wrote {len(pages)} pages to {OUT}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
