"""Source locations."""

from dataclasses import dataclass


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line_start: int
    col_start: int
    line_end: int
    col_end: int

    def __post_init__(self):
        if (self.line_start, self.col_start) > (self.line_end, self.col_end):
            raise ValueError(f"span ends before it starts: {self}")

    def contains(self, other: "SourceSpan") -> bool:
        return ((self.line_start, self.col_start) <= (other.line_start, other.col_start)
                and (other.line_end, other.col_end) <= (self.line_end, self.col_end))

    def __str__(self) -> str:
        return f"{self.file}:{self.line_start}:{self.col_start}"
