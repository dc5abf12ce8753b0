from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Document:
    """A corpus entry or a query. Queries simply leave ``title`` empty."""

    doc_id: str
    text: str
    title: str = ""

    @property
    def full_text(self) -> str:
        # newline keeps the title a separate sentence for entity extraction
        if self.title:
            return f"{self.title}\n{self.text}"
        return self.text


def text_of(item: Document | str) -> str:
    return item.full_text if isinstance(item, Document) else item
