"""One JSON serialization for every output surface, so CLI output and service
responses stay byte-identical for identical inputs."""

from __future__ import annotations

import json


def canonical_json_bytes(obj) -> bytes:
    return (json.dumps(obj, separators=(",", ":"), ensure_ascii=False) + "\n").encode("utf-8")
