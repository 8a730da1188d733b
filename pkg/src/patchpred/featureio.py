"""Feature-matrix interchange: CSV with patch_id, bug_id, label columns
followed by one column per named feature."""

from __future__ import annotations

import csv
import math

import numpy as np

from .errors import FeatureError
from .evaluate import JointRow
from .learn import FeatureRow

ID_COLUMNS = ("patch_id", "bug_id", "label")


def write_features(path, rows, names) -> None:
    names = list(names)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(ID_COLUMNS) + names)
        for row in rows:
            if len(row.features) != len(names):
                raise FeatureError(
                    f"patch {row.patch_id!r}: {len(row.features)} values for {len(names)} names"
                )
            label = "" if row.label is None else int(row.label)
            writer.writerow([row.patch_id, row.bug_id, label] + [repr(float(v)) for v in row.features])


def read_features(path) -> tuple[list[str], list[FeatureRow]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FeatureError(f"{path} is empty") from None
        if tuple(header[:3]) != ID_COLUMNS:
            raise FeatureError(f"{path}: header must start with {ID_COLUMNS}")
        names = header[3:]
        if not names:
            raise FeatureError(f"{path}: no feature columns")
        rows = []
        for record in reader:
            if not record:
                continue
            patch_id, bug_id, label_s = record[0], record[1], record[2]
            values = np.array([float(v) for v in record[3:]], dtype=float)
            if len(values) != len(names):
                raise FeatureError(f"{path}: patch {patch_id!r} has {len(values)} values, expected {len(names)}")
            if not np.all(np.isfinite(values)):
                raise FeatureError(f"{path}: patch {patch_id!r} has non-finite feature values")
            label = None if label_s == "" else int(label_s)
            rows.append(FeatureRow(patch_id, bug_id, values, label))
    if not rows:
        raise FeatureError(f"no feature rows in {path}")
    return names, rows


def join_feature_sets(learned_csv, engineered_csv) -> tuple[list[str], list[str], list[JointRow]]:
    """Align a learned and an engineered feature CSV by patch_id.

    Every patch must appear in both files with a consistent bug_id and label.
    """
    learned_names, learned_rows = read_features(learned_csv)
    engineered_names, engineered_rows = read_features(engineered_csv)
    by_id = {r.patch_id: r for r in engineered_rows}
    joint = []
    for row in learned_rows:
        other = by_id.pop(row.patch_id, None)
        if other is None:
            raise FeatureError(f"patch {row.patch_id!r} has learned features but no engineered features")
        if other.bug_id != row.bug_id or other.label != row.label:
            raise FeatureError(f"patch {row.patch_id!r}: bug_id/label disagree between feature files")
        if row.label is None or (isinstance(row.label, float) and math.isnan(row.label)):
            raise FeatureError(f"patch {row.patch_id!r} is unlabeled")
        joint.append(JointRow(row.patch_id, row.bug_id, int(row.label),
                              learned=row.features, engineered=other.features))
    if by_id:
        missing = sorted(by_id)[0]
        raise FeatureError(f"patch {missing!r} has engineered features but no learned features")
    return learned_names, engineered_names, joint


def rows_to_joint(rows, feature_set: str) -> list[JointRow]:
    """Lift single-set FeatureRows into JointRows for the evaluators."""
    out = []
    for r in rows:
        if r.label is None:
            raise FeatureError(f"patch {r.patch_id!r} is unlabeled")
        if feature_set == "learned":
            out.append(JointRow(r.patch_id, r.bug_id, int(r.label), learned=r.features))
        elif feature_set == "engineered":
            out.append(JointRow(r.patch_id, r.bug_id, int(r.label), engineered=r.features))
        else:
            raise FeatureError(f"unknown feature set {feature_set!r}")
    return out
