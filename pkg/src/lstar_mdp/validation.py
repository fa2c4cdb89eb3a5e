"""Input validation helpers for observation sequences.

Sequences are plain tuples of symbols that alternate between outputs and
inputs:

* a *trace* starts and ends with an output, ``(o0, i1, o1, ..., in, on)``;
* a *test sequence* starts with an output and ends with an input,
  ``(o0, i1, o1, ..., in)``; the empty tuple is the empty test sequence;
* a *continuation* starts and ends with an input, ``(i1, o1, ..., ik)``.

The ``check_*`` functions convert any sequence-like argument to a tuple,
verify its shape and return it, raising :class:`ValueError` otherwise.
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

Trace = tuple
TestSequence = tuple
Continuation = tuple


def _symbols(seq, name):
    if isinstance(seq, str):
        raise ValueError(f"{name} must be a sequence of symbols, not a string: {seq!r}")
    try:
        return tuple(seq)
    except TypeError:
        raise ValueError(f"{name} must be a sequence of symbols, got {type(seq).__name__}") from None


def _check_alphabets(seq, first, inputs, outputs, name):
    for pos, sym in enumerate(seq):
        is_output = (pos % 2 == 0) == (first == "output")
        alphabet = outputs if is_output else inputs
        if alphabet is not None and sym not in alphabet:
            kind = "output" if is_output else "input"
            raise ValueError(f"{name}: symbol {sym!r} at position {pos} is not a known {kind}")


def check_trace(seq, inputs: Optional[Iterable] = None, outputs: Optional[Iterable] = None) -> Trace:
    seq = _symbols(seq, "trace")
    if len(seq) % 2 != 1:
        raise ValueError(f"trace must have odd length (output first and last), got length {len(seq)}")
    _check_alphabets(seq, "output", _as_set(inputs), _as_set(outputs), "trace")
    return seq


def check_test_sequence(seq, inputs=None, outputs=None) -> TestSequence:
    seq = _symbols(seq, "test sequence")
    if len(seq) % 2 != 0:
        raise ValueError(f"test sequence must have even length (output first, input last), got length {len(seq)}")
    _check_alphabets(seq, "output", _as_set(inputs), _as_set(outputs), "test sequence")
    return seq


def check_continuation(seq, inputs=None, outputs=None) -> Continuation:
    seq = _symbols(seq, "continuation")
    if len(seq) % 2 != 1:
        raise ValueError(f"continuation must have odd length (input first and last), got length {len(seq)}")
    _check_alphabets(seq, "input", _as_set(inputs), _as_set(outputs), "continuation")
    return seq


def check_probability(value, name, *, low_open=True, high_open=False) -> float:
    value = float(value)
    lo_ok = value > 0 if low_open else value >= 0
    hi_ok = value < 1 if high_open else value <= 1
    if not (lo_ok and hi_ok):
        lo = "(" if low_open else "["
        hi = ")" if high_open else "]"
        raise ValueError(f"{name} must lie in {lo}0, 1{hi}, got {value}")
    return value


def _as_set(alphabet):
    return None if alphabet is None else frozenset(alphabet)


def trace_prefixes(trace: Sequence) -> list:
    """All trace prefixes of ``trace`` (outputs at both ends), shortest first."""
    return [tuple(trace[: k + 1]) for k in range(0, len(trace), 2)]


def test_sequence_prefixes(seq: Sequence) -> list:
    """All non-empty test-sequence prefixes ``t . i`` of ``seq``, shortest first."""
    return [tuple(seq[: k]) for k in range(2, len(seq) + 1, 2)]


def last_output(trace: Sequence):
    return trace[-1]


# keep pytest from collecting the helper above when star-imported into tests
test_sequence_prefixes.__test__ = False
