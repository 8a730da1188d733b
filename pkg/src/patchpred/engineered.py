"""Hand-designed static patch features: repair-pattern flags plus lexical
code-description counts over the buggy and patched fragments.

Every feature has a registry entry carrying the exact lexical rule used to
compute it, so reports and explanations can cite definitions. Pattern flags
that cannot be decided lexically stay 0.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .corpus import PatchRecord
from .diffparse import FragmentPair, HunkSet, LineTag, extract_fragments, parse_diff, tokenize

REGISTRY_VERSION = "1"

KEYWORDS = ("if", "else", "for", "while", "return", "throw", "try", "catch",
            "break", "continue", "new", "null")

# Identifiers that look like calls but are control-flow keywords.
_CALL_EXCLUDE = frozenset(KEYWORDS) | {"switch", "synchronized", "assert", "do", "case"}

_OPS_RE = re.compile(r"==|!=|<=|>=|&&|\|\||\+=|-=|\*=|/=|%=|\+\+|--|[+\-*/%<>=!]")
_OP_CLASS = {
    "==": "relational", "!=": "relational", "<=": "relational", ">=": "relational",
    "<": "relational", ">": "relational",
    "&&": "logical", "||": "logical", "!": "logical",
    "=": "assignment", "+=": "assignment", "-=": "assignment",
    "*=": "assignment", "/=": "assignment", "%=": "assignment",
    "+": "arithmetic", "-": "arithmetic", "*": "arithmetic",
    "/": "arithmetic", "%": "arithmetic", "++": "arithmetic", "--": "arithmetic",
}
_STRING_RE = re.compile(r"\"[^\"]*\"|'[^']*'")
_NUMBER_RE = re.compile(r"\b\d+(?:\.\d+)?\b")
_CALL_RE = re.compile(r"\b([A-Za-z_]\w*)\s*\(")

_COUNTER_NAMES = tuple(
    [f"kw_{k}" for k in KEYWORDS]
    + ["op_arithmetic", "op_relational", "op_logical", "op_assignment"]
    + ["lit_numeric", "lit_string", "lit_boolean", "calls"]
)

_FLAG_NAMES = (
    "singleLine", "codeMove", "wrapsIf", "wrapsTryCatch", "unwrapsIf",
    "unwrapsTryCatch", "conditionalBlockAdd", "conditionalBlockRemove",
    "constantChange", "expressionFix", "onlyAddition", "onlyRemoval",
)

_FLAG_RULES = {
    "singleLine": "exactly one changed line (removed + added) across all hunks",
    "codeMove": "some removed line, with all whitespace stripped, reappears verbatim among the added lines",
    "wrapsIf": "an added line contains an 'if' token immediately followed by '(' and codeMove holds",
    "wrapsTryCatch": "added lines contain 'try' and 'catch' tokens and codeMove holds",
    "unwrapsIf": "a removed line contains an 'if' token immediately followed by '(' and codeMove holds",
    "unwrapsTryCatch": "removed lines contain 'try' and 'catch' tokens and codeMove holds",
    "conditionalBlockAdd": "more added than removed lines open a brace-delimited block with if/else/for/while",
    "conditionalBlockRemove": "more removed than added lines open a brace-delimited block with if/else/for/while",
    "constantChange": "equal numbers of removed and added lines that match pairwise once numeric and string literals are masked, yet differ before masking",
    "expressionFix": "equal numbers of removed and added lines that match pairwise once outermost parenthesized groups are masked, yet differ before masking",
    "onlyAddition": "no removed lines and at least one added line",
    "onlyRemoval": "no added lines and at least one removed line",
}


@dataclass(frozen=True)
class EngineeredVector:
    patch_id: str
    values: np.ndarray
    names: tuple[str, ...]


def feature_names() -> list[str]:
    names = list(_FLAG_NAMES)
    names += [f"buggy_{c}" for c in _COUNTER_NAMES]
    names += [f"patched_{c}" for c in _COUNTER_NAMES]
    names += [f"delta_{c}" for c in _COUNTER_NAMES]
    return names


def registry() -> list[dict]:
    """Export the feature registry: name, kind, and the rule text."""
    entries = [{"name": n, "kind": "flag", "rule": _FLAG_RULES[n]} for n in _FLAG_NAMES]
    for side in ("buggy", "patched"):
        for c in _COUNTER_NAMES:
            entries.append({
                "name": f"{side}_{c}",
                "kind": "count",
                "rule": f"occurrences of {c.replace('_', ' ')} in the {side} fragment",
            })
    for c in _COUNTER_NAMES:
        entries.append({
            "name": f"delta_{c}",
            "kind": "delta",
            "rule": f"patched count minus buggy count for {c.replace('_', ' ')}",
        })
    return entries


def _mask_literals(text: str) -> str:
    return _NUMBER_RE.sub("<LIT>", _STRING_RE.sub("<LIT>", text))


def _mask_parens(text: str) -> str:
    """Replace the contents of outermost  (...)  groups with a placeholder."""
    out = []
    depth = 0
    for ch in text:
        if ch == "(":
            depth += 1
            if depth == 1:
                out.append("(<P>")
            continue
        if ch == ")":
            depth = max(depth - 1, 0)
            if depth == 0:
                out.append(")")
            continue
        if depth == 0:
            out.append(ch)
    return "".join(out)


def _squash(text: str) -> str:
    return " ".join(text.split())


def _has_if_paren(line: str) -> bool:
    toks = tokenize(line)
    return any(a == "if" and b == "(" for a, b in zip(toks, toks[1:]))


def _opens_conditional_block(line: str) -> bool:
    toks = tokenize(line)
    return "{" in toks and any(t in ("if", "else", "for", "while") for t in toks)


def _pairwise_differ_only_under(removed: list[str], added: list[str], mask) -> bool:
    if not removed or len(removed) != len(added):
        return False
    raw_equal = all(_squash(r) == _squash(a) for r, a in zip(removed, added))
    if raw_equal:
        return False
    return all(_squash(mask(r)) == _squash(mask(a)) for r, a in zip(removed, added))


def extract_patterns(hunks: HunkSet) -> dict[str, int]:
    removed = [c for h in hunks.hunks for t, c in h.lines if t is LineTag.REMOVED]
    added = [c for h in hunks.hunks for t, c in h.lines if t is LineTag.ADDED]
    changed = len(removed) + len(added)

    stripped_removed = {re.sub(r"\s+", "", r) for r in removed if re.sub(r"\s+", "", r)}
    stripped_added = {re.sub(r"\s+", "", a) for a in added if re.sub(r"\s+", "", a)}
    code_move = int(bool(stripped_removed & stripped_added))

    added_text = " ".join(added)
    removed_text = " ".join(removed)
    added_tokens = tokenize(added_text)
    removed_tokens = tokenize(removed_text)

    openers_added = sum(1 for line in added if _opens_conditional_block(line))
    openers_removed = sum(1 for line in removed if _opens_conditional_block(line))

    return {
        "singleLine": int(changed == 1),
        "codeMove": code_move,
        "wrapsIf": int(code_move and any(_has_if_paren(line) for line in added)),
        "wrapsTryCatch": int(code_move and "try" in added_tokens and "catch" in added_tokens),
        "unwrapsIf": int(code_move and any(_has_if_paren(line) for line in removed)),
        "unwrapsTryCatch": int(code_move and "try" in removed_tokens and "catch" in removed_tokens),
        "conditionalBlockAdd": int(openers_added > openers_removed),
        "conditionalBlockRemove": int(openers_removed > openers_added),
        "constantChange": int(_pairwise_differ_only_under(removed, added, _mask_literals)),
        "expressionFix": int(_pairwise_differ_only_under(removed, added, _mask_parens)),
        "onlyAddition": int(not removed and bool(added)),
        "onlyRemoval": int(not added and bool(removed)),
    }


def _count_side(text: str) -> dict[str, float]:
    tokens = tokenize(text)
    counts = {f"kw_{k}": float(tokens.count(k)) for k in KEYWORDS}
    op_counts = {"arithmetic": 0, "relational": 0, "logical": 0, "assignment": 0}
    for m in _OPS_RE.finditer(text):
        op_counts[_OP_CLASS[m.group(0)]] += 1
    for cls, v in op_counts.items():
        counts[f"op_{cls}"] = float(v)
    counts["lit_numeric"] = float(len(_NUMBER_RE.findall(_STRING_RE.sub("", text))))
    counts["lit_string"] = float(len(_STRING_RE.findall(text)))
    counts["lit_boolean"] = float(sum(1 for t in tokens if t in ("true", "false")))
    counts["calls"] = float(sum(1 for m in _CALL_RE.finditer(text) if m.group(1) not in _CALL_EXCLUDE))
    return counts


def extract_code_description(fragments: FragmentPair) -> dict[str, float]:
    buggy = _count_side(fragments.buggy_text)
    patched = _count_side(fragments.patched_text)
    out: dict[str, float] = {}
    for c in _COUNTER_NAMES:
        out[f"buggy_{c}"] = buggy[c]
        out[f"patched_{c}"] = patched[c]
        out[f"delta_{c}"] = patched[c] - buggy[c]
    return out


def extract_all(record: PatchRecord) -> EngineeredVector:
    """Full engineered vector for one patch: [flags | counts | deltas]."""
    hunks = parse_diff(record.diff_text)
    fragments = extract_fragments(hunks)
    features = dict(extract_patterns(hunks))
    features.update(extract_code_description(fragments))
    names = feature_names()
    values = np.array([float(features[n]) for n in names])
    return EngineeredVector(patch_id=record.patch_id, values=values, names=tuple(names))
