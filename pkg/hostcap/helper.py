# -----------------------------------------------------------------------------
# Copyright (c) 2026, the hostcap authors
#
# All rights reserved. See LICENSE.txt for the license terms, including the
# non-military-usage clause.
# -----------------------------------------------------------------------------
import hashlib
import json
import logging
import math
import os
from typing import Any, Iterable, Optional


def format_float(value: float) -> str:
    """
    Format a float with the shortest decimal representation that reads back to the same value.
    The output never uses thousands separators and always uses '.' as decimal point.
    @param value: The value to format.
    @return: Returns the formatted value as string.
    """
    value = float(value)
    if math.isnan(value) or math.isinf(value):
        raise ValueError(f"Cannot format non-finite value {value}.")
    if value == 0.0:
        return "0.0"  # avoid "-0.0"
    return repr(value)


def canonical_json(obj: Any) -> str:
    """
    Serialize an object to canonical JSON (sorted keys, no whitespace). Used for hashing.
    """
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def pretty_json(obj: Any) -> str:
    """
    Serialize an object to stable, human-readable JSON with a trailing newline.
    Floats are written by json with repr(), which is the shortest round-trip form.
    """
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_hash(obj: Any) -> str:
    """
    Compute a SHA-256 digest over the canonical JSON form of a config document.
    @param obj: A JSON-serializable object.
    @return: Returns the hex digest.
    """
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def write_text(filename: str, text: str) -> None:
    """
    Write a text file with '\n' line endings, creating the parent directory if necessary.
    """
    parent = os.path.dirname(filename)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(filename, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    logging.getLogger("helper").debug(f"Wrote {filename}.")


def get_highest_warning_level(state_list: Iterable[Optional[str]]) -> str:
    """
    For a list of strings indicating severity levels, return the highest value.
    @param state_list: A list of strings, such as "OK", "WARNING", "CRITICAL".
    @return: Returns the highest level.
    """
    highest = "OK"

    for i in state_list:
        if i == "CRITICAL":
            return "CRITICAL"
        elif i == "WARNING" and highest == "OK":
            highest = "WARNING"

    return highest
