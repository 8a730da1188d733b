"""Seeded synthetic patch corpora with controllable signal placement.

Each synthetic patch is a pure-insertion diff: two context statements around
added payload statements. Two independent bits are planted per patch:

- similarity bit: payload identifiers come from the same token cluster as
  the context (similar buggy/patched fragments) or from a different cluster.
- shape bit: the two payload statements land on one added line or on two.
  Both shapes flatten to the same token stream, so embeddings cannot see the
  shape while the singleLine pattern flag captures it exactly.

The corpus label tracks the similarity bit, the shape bit, their XOR, or
nothing, depending on the requested signal.
"""

from __future__ import annotations

import random

from .corpus import Corpus, Label, PatchRecord
from .errors import CorpusError

SIGNALS = ("learned", "engineered", "xor", "none")

_BASES = ("acc", "arg", "buf", "cnt", "cur", "dst", "idx", "key", "ptr", "src", "tmp", "val")
_N_CLUSTERS = 12


def _cluster(c: int) -> list[str]:
    return [f"{w}{c}" for w in _BASES]


def _statement(ids) -> str:
    head, call, *rest = ids
    return f"{head} = {call} ( {' , '.join(rest)} ) ;"


def generate_corpus(num_bugs: int = 40, patches_per_bug: int = 5,
                    signal: str = "learned", seed: int = 0) -> Corpus:
    if signal not in SIGNALS:
        raise CorpusError(f"unknown signal {signal!r}; choose from {SIGNALS}")
    if num_bugs < 1 or patches_per_bug < 1:
        raise CorpusError("num_bugs and patches_per_bug must be positive")
    rng = random.Random(seed)
    records = []
    index = 0
    for bug in range(num_bugs):
        bug_id = f"SynthBug-{bug}"
        topic = bug % _N_CLUSTERS
        for _p in range(patches_per_bug):
            similar = rng.random() < 0.5
            single_line = rng.random() < 0.5
            if signal == "learned":
                label = similar
            elif signal == "engineered":
                label = single_line
            elif signal == "xor":
                label = similar != single_line
            else:
                label = rng.random() < 0.5

            ctx_ids = rng.sample(_cluster(topic), 4)
            if similar:
                payload_cluster = topic
            else:
                payload_cluster = (topic + 1 + rng.randrange(_N_CLUSTERS - 1)) % _N_CLUSTERS
            payload_ids = rng.sample(_cluster(payload_cluster), 12)
            stmt1 = _statement(payload_ids[:6])
            stmt2 = _statement(payload_ids[6:])
            added = [f"{stmt1} {stmt2}"] if single_line else [stmt1, stmt2]

            # The patch index rides in the hunk header: it keeps every diff
            # unique for dedup without leaking a token into the fragments.
            lines = [f"@@ -1,1 +1,{1 + len(added)} @@ p{index}", f" {_statement(ctx_ids)}"]
            lines += [f"+{a}" for a in added]
            records.append(PatchRecord(
                patch_id=f"synth-{index:04d}",
                bug_id=bug_id,
                project="synth",
                tool=f"synthtool{index % 3}",
                label=Label.CORRECT if label else Label.INCORRECT,
                diff_text="\n".join(lines),
            ))
            index += 1
    return Corpus(records=records, provenance=f"synthetic(signal={signal}, seed={seed})")
