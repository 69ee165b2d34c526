#!/usr/bin/env python3
"""Convert the pre-processed METR-LA release (adj_mat.npy, node_values.npy) to
the toolkit's canonical temporal-graph JSON.

node_values.npy is (T, N, F) with F = 2 (speed, time of day); adj_mat.npy is a
dense N x N weighted adjacency. Non-zero off-diagonal entries become edges.
"""

import argparse
import json

import numpy as np


def convert(adj, values, max_snapshots=None):
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ValueError(f"adjacency must be square, got {adj.shape}")
    if values.ndim != 3 or values.shape[1] != adj.shape[0]:
        raise ValueError(f"node values must be (T, {adj.shape[0]}, F), got {values.shape}")
    if max_snapshots is not None:
        values = values[:max_snapshots]
    src, dst = np.nonzero(adj)
    keep = src != dst
    src, dst = src[keep], dst[keep]
    return {
        "name": "MetraLa",
        "num_nodes": int(adj.shape[0]),
        "frequency": "5-Minutes",
        "edges": [[int(a), int(b)] for a, b in zip(src, dst)],
        "weights": [float(adj[a, b]) for a, b in zip(src, dst)],
        "features": values.astype(float).tolist(),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--adj", required=True, help="adj_mat.npy")
    parser.add_argument("--values", required=True, help="node_values.npy")
    parser.add_argument("--out", required=True, help="canonical JSON output path")
    parser.add_argument("--max-snapshots", type=int, default=None)
    args = parser.parse_args()
    doc = convert(np.load(args.adj), np.load(args.values), args.max_snapshots)
    with open(args.out, "w") as f:
        json.dump(doc, f)
    print(f"{doc['num_nodes']} nodes, {len(doc['edges'])} edges, {len(doc['features'])} snapshots -> {args.out}")


if __name__ == "__main__":
    main()
