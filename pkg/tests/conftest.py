from __future__ import annotations

import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stratqec.circuit import CodeSpec, generate_code  # noqa: E402
from stratqec.decoders import MwpmDecoder  # noqa: E402
from stratqec.qepg import compile_qepg  # noqa: E402


@functools.lru_cache(maxsize=None)
def surface(d: int, rounds: int | None = None):
    """(circuit, qepg, decoder) for the rotated surface-code memory experiment."""
    c = generate_code(CodeSpec("surface", d, rounds))
    g = compile_qepg(c)
    return c, g, MwpmDecoder.from_qepg(g)


@functools.lru_cache(maxsize=None)
def repetition_small():
    c = generate_code(CodeSpec("repetition", 3, 1))
    return c, compile_qepg(c)


@pytest.fixture(scope="session")
def surface3():
    return surface(3)


@pytest.fixture(scope="session")
def rep3():
    return repetition_small()


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    """Remember one pass/fail line for the end-of-run acceptance summary."""
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
