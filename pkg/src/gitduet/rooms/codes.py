"""Invitation codes: 6 symbols from a 32-letter alphabet.

Uppercase alphanumerics minus the look-alikes 0/O and 1/I, so codes
survive being read aloud over a voice call.
"""

from __future__ import annotations

import secrets

CODE_ALPHABET = "".join(
    c for c in "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789" if c not in "0O1I"
)
CODE_LENGTH = 6

assert len(CODE_ALPHABET) == 32


def generate_code() -> str:
    return "".join(secrets.choice(CODE_ALPHABET) for _ in range(CODE_LENGTH))


def is_valid_code(code: str) -> bool:
    return len(code) == CODE_LENGTH and all(c in CODE_ALPHABET for c in code)
