"""Error type shared by every module.

Each failure carries a short machine-readable ``code`` (for example
``"shape"`` or ``"inner-budget"``) plus optional structured payload so that
callers and the CLI can react without parsing messages.
"""

from __future__ import annotations

from typing import Any


class SolverError(Exception):
    """Raised for every contract violation in the library."""

    def __init__(self, code: str, message: str = "", **payload: Any) -> None:
        self.code = code
        self.payload = payload
        super().__init__(f"{code}: {message}" if message else code)
