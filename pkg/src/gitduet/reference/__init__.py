"""Searchable git documentation served inside the exercise room.

Pages come from a build-time snapshot of the local git installation's
built-in help (see tools/build_git_docs.py), so the running server never
depends on man pages being installed. Ranking is deterministic: exact
command name beats name prefix beats full-text term frequency, ties broken
by command name.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

_WORD = re.compile(r"[a-z0-9][a-z0-9-]*")


@dataclass(frozen=True)
class DocPage:
    command_name: str
    title: str
    sections: tuple[tuple[str, str], ...]
    source_note: str

    def to_wire(self, include_body: bool = True) -> dict:
        d: dict = {"commandName": self.command_name, "title": self.title}
        if include_body:
            d["sections"] = [{"heading": h, "body": b} for h, b in self.sections]
            d["sourceNote"] = self.source_note
        else:
            summary = next((b for h, b in self.sections if h == "Summary"), "")
            d["summary"] = summary
        return d


class DocIndex:
    def __init__(self, pages: list[DocPage]):
        self.pages = {p.command_name: p for p in pages}
        self._terms: dict[str, dict[str, int]] = {}
        for page in pages:
            text = " ".join(b for _, b in page.sections).lower()
            for term in _WORD.findall(text):
                self._terms.setdefault(term, {}).setdefault(page.command_name, 0)
                self._terms[term][page.command_name] += 1

    def page(self, command_name: str) -> Optional[DocPage]:
        return self.pages.get(command_name)

    def search(self, query: str, limit: int = 10) -> list[DocPage]:
        terms = [t.lower() for t in _WORD.findall(query)]
        if not terms:
            return []
        scores: dict[str, tuple[int, int]] = {}  # name -> (tier, tf)
        for name in self.pages:
            tier = 0
            if name in terms:
                tier = 3
            elif any(name.startswith(t) for t in terms):
                tier = 2
            tf = sum(self._terms.get(t, {}).get(name, 0) for t in terms)
            if tier or tf:
                scores[name] = (tier, tf)
        ranked = sorted(scores, key=lambda n: (-scores[n][0], -scores[n][1], n))
        return [self.pages[name] for name in ranked[:limit]]


def load_doc_index(path: Optional[Path] = None) -> DocIndex:
    if path is not None:
        raw = Path(path).read_text()
    else:
        raw = (resources.files(__package__) / "git_docs.json").read_text()
    doc = json.loads(raw)
    pages = [
        DocPage(
            command_name=p["commandName"],
            title=p["title"],
            sections=tuple((h, b) for h, b in p["sections"]),
            source_note=p["sourceNote"],
        )
        for p in doc["pages"]
    ]
    return DocIndex(pages)
