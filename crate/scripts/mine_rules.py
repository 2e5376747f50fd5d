#!/usr/bin/env python3
"""Mine an AnyBURL-dialect rule file from a small triple file.

Only used to produce the bundled rule files under data/. It enumerates
cyclic rules of body length 1 and 2 and acyclic rules with one head
constant, counts body groundings and support exactly over the training
triples, and writes one rule per line:

    body_groundings<TAB>support<TAB>confidence<TAB>head <= body

Usage: mine_rules.py TRAIN_FILE OUT_FILE [--min-support 10] [--min-conf 0.1]
"""

import argparse
import itertools

import numpy as np


def load(path):
    triples = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            h, r, t = line.split("\t")
            triples.append((h, r, t))
    ents, rels = {}, {}
    for h, r, t in triples:
        ents.setdefault(h, len(ents))
        rels.setdefault(r, len(rels))
        ents.setdefault(t, len(ents))
    adj = np.zeros((len(rels), len(ents), len(ents)), dtype=bool)
    for h, r, t in triples:
        adj[rels[r], ents[h], ents[t]] = True
    return list(ents), list(rels), adj


def emit(out, groundings, support, head, body):
    conf = support / groundings
    out.append(f"{groundings}\t{support}\t{conf!r}\t{head} <= {body}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("train")
    ap.add_argument("out")
    ap.add_argument("--min-support", type=int, default=10)
    ap.add_argument("--min-conf", type=float, default=0.1)
    args = ap.parse_args()

    ents, rels, adj = load(args.train)
    n_rel = len(rels)
    rules = []

    def keep(g, s):
        return g > 0 and s >= args.min_support and s / g >= args.min_conf

    # oriented body atoms: (matrix, render(v1, v2))
    oriented = []
    for s in range(n_rel):
        oriented.append((adj[s], lambda a, b, s=s: f"{rels[s]}({a},{b})"))
        oriented.append((adj[s].T, lambda a, b, s=s: f"{rels[s]}({b},{a})"))

    # cyclic, body length 1
    for r in range(n_rel):
        for i, (m, render) in enumerate(oriented):
            if i == 2 * r:
                continue
            g = int(m.sum())
            s = int((m & adj[r]).sum())
            if keep(g, s):
                emit(rules, g, s, f"{rels[r]}(X,Y)", render("X", "Y"))

    # cyclic, body length 2
    for (m1, r1), (m2, r2) in itertools.product(oriented, repeat=2):
        path = (m1.astype(np.int32) @ m2.astype(np.int32)) > 0
        g = int(path.sum())
        if g < args.min_support:
            continue
        supports = (adj & path).sum(axis=(1, 2))
        for r in range(n_rel):
            s = int(supports[r])
            if keep(g, s):
                emit(rules, g, s, f"{rels[r]}(X,Y)", f"{r1('X', 'A')}, {r2('A', 'Y')}")

    # acyclic, one head constant, body length 1 with a dangling variable
    for r in range(n_rel):
        for c, name in enumerate(ents):
            for m, render in oriented:
                has = m.any(axis=1)
                g = int(has.sum())
                s = int((has & adj[r][:, c]).sum())
                if keep(g, s):
                    emit(rules, g, s, f"{rels[r]}(X,{name})", render("X", "A"))
                s = int((has & adj[r][c, :]).sum())
                if keep(g, s):
                    emit(rules, g, s, f"{rels[r]}({name},Y)", render("Y", "A"))

    with open(args.out, "w", encoding="utf-8") as f:
        for line in rules:
            f.write(line + "\n")
    print(f"{len(rules)} rules written to {args.out}")


if __name__ == "__main__":
    main()
