#!/usr/bin/env python3
"""Enumerates the reference values of the four-rule, five-context fixture.

Everything is computed with exact fractions straight from the context table,
without any circuit. The output is the JSON file the acceptance suite compares
the Rust implementation against.

    python3 scripts/fixture_f.py > data/fixture_f/expected.json
"""

import json
from fractions import Fraction

N_RULES = 4
# active rule ids per context (0-based: r1 -> 0)
CONTEXTS = [{0, 1}, {0, 2}, {1, 2}, {0, 2}, {2, 3}]
WEIGHT = Fraction(1, len(CONTEXTS))


def mass(predicate):
    return sum((WEIGHT for active in CONTEXTS if predicate(active)), Fraction(0))


def all_active(rules):
    return mass(lambda active: set(rules) <= active)


def none_active(rules):
    return mass(lambda active: not (set(rules) & active))


def query_prob(entailing):
    return mass(lambda active: bool(set(entailing) & active))


def contained(rules):
    return mass(lambda active: active <= set(rules))


def greedy(delta):
    marginals = [all_active([r]) for r in range(N_RULES)]
    seeds = sorted(range(N_RULES), key=lambda r: (-marginals[r], r))
    used, sets = set(), []
    for seed in seeds:
        if seed in used:
            continue
        used.add(seed)
        current, marginal = [seed], marginals[seed]
        while marginal >= delta and len(used) < N_RULES:
            options = [(all_active(current + [r]), -r) for r in range(N_RULES) if r not in used]
            best_value, neg_id = max(options)
            if best_value < delta:
                break
            used.add(-neg_id)
            current.append(-neg_id)
            marginal = best_value
        sets.append({"rules": current, "marginal": float(marginal)})
    return sets


def sandwich(sets, firing):
    lower = max(s["marginal"] for s in sets if set(s["rules"]) & set(firing))
    bounds = [1 - none_active([r for r in range(N_RULES) if r not in s["rules"]])
              for s in sets if not set(s["rules"]) & set(firing)]
    upper = min([Fraction(1)] + bounds)
    return {"firing": firing, "lower": lower, "exact": float(query_prob(firing)), "upper": float(upper)}


def main():
    marginals = [all_active([r]) for r in range(N_RULES)]
    sets = greedy(Fraction(3, 10))
    out = {
        "contexts": [sorted(c) for c in CONTEXTS],
        "marginals": [float(m) for m in marginals],
        "singleton_order": sorted(range(N_RULES), key=lambda r: (-marginals[r], r)),
        "lower_bound": [
            {"rules": [0], "value": float(contained([0]))},
            {"rules": [0, 2], "value": float(contained([0, 2]))},
        ],
        "pc2": {"rules": [1, 3], "value": float(1 - none_active([1, 3]))},
        "query_prob": [
            {"rules": [1, 3], "value": float(query_prob([1, 3]))},
            {"rules": [], "value": float(query_prob([]))},
            {"rules": [0, 1, 2, 3], "value": float(query_prob([0, 1, 2, 3]))},
        ],
        "greedy_delta": 0.3,
        "greedy": sets,
        "sandwich": [sandwich(sets, [3]), sandwich(sets, [0, 1, 2, 3])],
    }
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
