"""Collects one result line per acceptance criterion for the terminal summary."""

LINES: dict[int, str] = {}


def record(number: int, status: str, detail: str) -> str:
    line = f"criterion {number}: {status} - {detail}"
    LINES[number] = line
    print(line)
    return line
