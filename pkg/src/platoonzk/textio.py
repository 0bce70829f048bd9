"""Canonical structured-text helpers shared by the ledger journal, traces and reports."""

import json


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def canonical_bytes(obj) -> bytes:
    return canonical_json(obj).encode("ascii")


def is_hex(text, n_chars=None) -> bool:
    if not isinstance(text, str) or (n_chars is not None and len(text) != n_chars):
        return False
    return all(c in "0123456789abcdef" for c in text)
