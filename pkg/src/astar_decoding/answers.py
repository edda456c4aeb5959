"""Answer extraction, normalization, and exact-match grading.

Normalization implements a small documented grammar: integers, fractions
a/b, terminating decimals, frac-style LaTeX fractions, optional math-mode
and boxed{}/text{} wrappers, unary sign, digit-group commas. Equivalent
numeric forms reduce to one canonical fraction string ("0.5", "1/2" and
"\\frac{2}{4}" all become "1/2"). Everything else is compared as
lowercased, whitespace-collapsed text. normalize_answer is idempotent.
"""

from __future__ import annotations

import logging
import re
from fractions import Fraction

log = logging.getLogger(__name__)

BOXED_MARKER = "boxed{"

_INT_RE = re.compile(r"^[+-]?\d+$")
_DECIMAL_RE = re.compile(r"^[+-]?(?:\d+\.\d*|\.\d+)$")
_RATIO_RE = re.compile(r"^([+-]?\d+)\s*/\s*([+-]?\d+)$")
_FRAC_RE = re.compile(r"^([+-]?)\\?[dt]?frac\{([^{}]+)\}\{([^{}]+)\}$")
_DIGIT_COMMA_RE = re.compile(r"(?<=\d),(?=\d)")
_SPACING_MACRO_RE = re.compile(r"\\[,;!\s]")


def extract_answer(text: str) -> str | None:
    """Content of the last boxed{...} occurrence, braces balanced.

    Returns None when no marker is present or the braces never close.
    """
    start = text.rfind(BOXED_MARKER)
    if start == -1:
        return None
    depth = 1
    chars = []
    for ch in text[start + len(BOXED_MARKER):]:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return "".join(chars)
        chars.append(ch)
    return None


def _strip_wrappers(s: str) -> str:
    prev = None
    while prev != s:
        prev = s
        s = s.strip()
        if s.endswith(".") and not _DECIMAL_RE.match(s):
            s = s[:-1].rstrip()
        for left, right in (("$", "$"), ("\\(", "\\)"), ("\\[", "\\]")):
            if s.startswith(left) and s.endswith(right) and len(s) > len(left) + len(right) - 1:
                s = s[len(left): len(s) - len(right)]
                break
        for head in ("\\boxed{", "boxed{", "\\text{"):
            if s.startswith(head) and s.endswith("}"):
                inner = s[len(head):-1]
                # Only unwrap when the braces really enclose the whole string.
                if inner.count("{") == inner.count("}"):
                    s = inner
                    break
    return s


def _parse_number(s: str) -> Fraction | None:
    s = s.strip()
    if _INT_RE.match(s) or _DECIMAL_RE.match(s):
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError):
            return None
    m = _RATIO_RE.match(s)
    if m:
        try:
            return Fraction(int(m.group(1)), int(m.group(2)))
        except ZeroDivisionError:
            return None
    return None


def _canonical_fraction(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def normalize_answer(answer: str) -> str:
    """Canonical comparison form of a raw answer string."""
    s = answer.replace("\u2212", "-")
    s = _strip_wrappers(s)
    s = s.replace("\\left", "").replace("\\right", "")
    s = _SPACING_MACRO_RE.sub("", s)
    s = _DIGIT_COMMA_RE.sub("", s)
    s = s.strip()
    m = _FRAC_RE.match(s)
    if m:
        num = _parse_number(m.group(2))
        den = _parse_number(m.group(3))
        if num is not None and den is not None and den != 0:
            value = num / den
            return _canonical_fraction(-value if m.group(1) == "-" else value)
    value = _parse_number(s)
    if value is not None:
        return _canonical_fraction(value)
    return re.sub(r"\s+", " ", s).lower()


def exact_match(candidate: str | None, reference: str) -> bool:
    """Whether a candidate answer equals the reference after normalization."""
    if candidate is None:
        return False
    return normalize_answer(candidate) == normalize_answer(reference)
