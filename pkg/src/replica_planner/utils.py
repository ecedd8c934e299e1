from __future__ import annotations

from typing import List

MB = 2**20
GB = 2**30


def mb_to_bytes(value: float) -> int:
    return int(round(value * MB))


def gb_to_bytes(value: float) -> int:
    return int(round(value * GB))


def human_gb(num_bytes: float) -> str:
    return f"{num_bytes / GB:.3f} GB"


def format_probability(value: float, decimals: int = 4) -> str:
    return f"{value:.{decimals}f}"


def parse_float_list(raw: str) -> List[float]:
    """
    Parse "0.01,0.02, 0.03" into floats; blank items are ignored.
    """
    return [float(x) for x in (s.strip() for s in (raw or "").split(",")) if x]
