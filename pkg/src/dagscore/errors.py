"""Exception hierarchy.

Everything raised on purpose by the library derives from :class:`DagscoreError`
so the CLI can map it to an exit status. Input/output problems derive from
:class:`DataIOError` instead.
"""

from __future__ import annotations


class DagscoreError(ValueError):
    """Invalid input, configuration or model."""


class NotSPDError(DagscoreError):
    """A matrix that must be symmetric positive definite failed Cholesky."""


class RankDeficientError(DagscoreError):
    def __init__(self, columns: list[str]):
        self.columns = list(columns)
        super().__init__(
            "design matrix is rank deficient; dependent columns: " + ", ".join(self.columns)
        )


class ProprietyError(DagscoreError):
    """A prior (or posterior) would be improper at the requested sizes."""


class DomainError(DagscoreError):
    pass


class CycleError(DagscoreError):
    def __init__(self, cycle: list[int]):
        # cycle holds 0-based vertices, first == last
        self.cycle = list(cycle)
        shown = ", ".join(str(v + 1) for v in self.cycle)
        super().__init__(f"graph has a directed cycle ({shown})")


class NotChordalError(DagscoreError):
    def __init__(self, cycle: list[int]):
        self.cycle = list(cycle)
        shown = " - ".join(str(v + 1) for v in self.cycle)
        super().__init__(
            f"graph is not decomposable; chordless cycle of length {len(self.cycle)}: {shown}"
        )


class DataIOError(Exception):
    """Unreadable, unwritable or malformed data file."""
