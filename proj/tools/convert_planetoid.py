#!/usr/bin/env python3
"""Convert standard citation-network distributions to the text formats used here.

Two input layouts are supported:

  planetoid  ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index}
             (the pickled distribution used by most GNN papers; carries the
             canonical "public" node split)
  linqs      <name>.content + <name>.cites
             (plain-text distribution; no canonical split, so a seeded
             stratified split of the same shape is generated instead)

Outputs, written to --out:
  <name>.edges      one undirected edge per line, 0-based ids, deduplicated
  <name>.features   header "n d", then n rows of d floats
  <name>.labels     n integer class labels
  <name>.split.json {"train": [...], "val": [...], "test": [...]}

Requires numpy + scipy for the planetoid layout.
"""

import argparse
import json
import pickle
import sys
from pathlib import Path


def read_planetoid(prefix: Path, name: str):
    import numpy as np
    import scipy.sparse as sp

    def load(part):
        path = prefix / f"ind.{name}.{part}"
        with open(path, "rb") as fh:
            return pickle.load(fh, encoding="latin1")

    x, y, tx, ty, allx, ally = (load(p) for p in ["x", "y", "tx", "ty", "allx", "ally"])
    graph = load("graph")
    test_idx = [int(line) for line in open(prefix / f"ind.{name}.test.index")]
    test_span = np.sort(test_idx)

    features = sp.vstack((allx, tx)).tolil()
    labels = np.vstack((ally, ty))

    # CiteSeer's test set skips some indices; insert zero rows for them.
    full = range(int(test_span.min()), int(test_span.max()) + 1)
    if len(full) != len(test_idx):
        ext = sp.lil_matrix((len(full), features.shape[1]))
        ext[test_span - test_span.min(), :] = features[-len(test_idx):, :]
        features = sp.vstack((features[: -len(test_idx)], ext)).tolil()
        lab_ext = np.zeros((len(full), labels.shape[1]))
        lab_ext[test_span - test_span.min(), :] = labels[-len(test_idx):, :]
        labels = np.vstack((labels[: -len(test_idx)], lab_ext))
        test_idx_sorted = list(test_span)
    else:
        features[test_idx, :] = features[test_span, :]
        labels[test_idx, :] = labels[test_span, :]
        test_idx_sorted = list(test_span)

    n = features.shape[0]
    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u == v or u >= n or v >= n:
                continue
            edges.add((min(u, v), max(u, v)))

    label_ids = labels.argmax(axis=1).astype(int).tolist()
    split = {
        "train": list(range(len(y))),
        "val": list(range(len(y), len(y) + 500)),
        "test": [int(i) for i in test_idx_sorted],
    }
    return features.toarray(), label_ids, sorted(edges), split


def read_linqs(prefix: Path, name: str, seed: int):
    import random

    content = prefix / f"{name}.content"
    cites = prefix / f"{name}.cites"
    ids, rows, classes = [], [], []
    for line in open(content):
        parts = line.strip().split()
        if not parts:
            continue
        ids.append(parts[0])
        rows.append([float(v) for v in parts[1:-1]])
        classes.append(parts[-1])
    index = {pid: i for i, pid in enumerate(ids)}
    class_names = sorted(set(classes))
    label_ids = [class_names.index(c) for c in classes]

    edges = set()
    skipped = 0
    for line in open(cites):
        parts = line.strip().split()
        if len(parts) != 2:
            continue
        a, b = parts
        if a not in index or b not in index or a == b:
            skipped += 1
            continue
        u, v = index[a], index[b]
        edges.add((min(u, v), max(u, v)))
    if skipped:
        print(f"note: skipped {skipped} citation lines (unknown ids or self-loops)",
              file=sys.stderr)

    # No canonical split in this layout: stratified 20-per-class train,
    # then 500 val / 1000 test from the remainder.
    rng = random.Random(seed)
    by_class = {}
    for i, c in enumerate(label_ids):
        by_class.setdefault(c, []).append(i)
    train = []
    for c, members in sorted(by_class.items()):
        members = members[:]
        rng.shuffle(members)
        train.extend(members[:20])
    rest = [i for i in range(len(ids)) if i not in set(train)]
    rng.shuffle(rest)
    split = {"train": sorted(train), "val": sorted(rest[:500]),
             "test": sorted(rest[500:1500])}
    print("note: linqs layout has no canonical public split; generated a seeded "
          f"stratified split (seed {seed})", file=sys.stderr)
    return rows, label_ids, sorted(edges), split


def row_normalize(features):
    out = []
    for row in features:
        total = sum(abs(v) for v in row)
        out.append([v / total for v in row] if total > 0 else list(row))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--layout", choices=["planetoid", "linqs"], required=True)
    ap.add_argument("--name", default="cora", help="dataset name (cora/citeseer/pubmed)")
    ap.add_argument("--in", dest="input", required=True, help="directory with the raw files")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--split-seed", type=int, default=1,
                    help="seed for the generated split (linqs layout only)")
    ap.add_argument("--no-row-normalize", action="store_true",
                    help="keep raw feature values instead of row-normalizing")
    args = ap.parse_args()

    prefix = Path(args.input)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.layout == "planetoid":
        features, labels, edges, split = read_planetoid(prefix, args.name)
        features = [list(map(float, row)) for row in features]
    else:
        features, labels, edges, split = read_linqs(prefix, args.name, args.split_seed)

    if not args.no_row_normalize:
        features = row_normalize(features)

    with open(out / f"{args.name}.edges", "w") as fh:
        for u, v in edges:
            fh.write(f"{u} {v}\n")
    with open(out / f"{args.name}.features", "w") as fh:
        fh.write(f"{len(features)} {len(features[0])}\n")
        for row in features:
            fh.write(" ".join(f"{v:.6g}" for v in row) + "\n")
    with open(out / f"{args.name}.labels", "w") as fh:
        for y in labels:
            fh.write(f"{y}\n")
    with open(out / f"{args.name}.split.json", "w") as fh:
        json.dump(split, fh)
        fh.write("\n")

    print(f"{args.name}: {len(features)} nodes, {len(edges)} undirected edges, "
          f"{len(features[0])} features, {max(labels) + 1} classes")
    print(f"split sizes: train={len(split['train'])} val={len(split['val'])} "
          f"test={len(split['test'])}")


if __name__ == "__main__":
    main()
