"""Brute-force reference computations over plain Python frozensets.

Nothing here touches the packed bit representation or the generation order
of the library; these are the independent sides of the oracle checks.
"""

import itertools
import random
from fractions import Fraction

from dataspace.data import AttributeValue, Dataset, Item, LabelSpace, PredictionEntry, PredictionTable


def closure_family(subsets, n_items, max_intersection, max_union):
    """∅, X, all intersections of ≤ max_intersection and unions of ≤ max_union distinct subsets."""
    family = {frozenset(), frozenset(range(n_items))}
    subsets = [frozenset(s) for s in subsets]
    for t in range(1, max_intersection + 1):
        for combo in itertools.combinations(subsets, t):
            family.add(frozenset.intersection(*combo))
    for t in range(1, max_union + 1):
        for combo in itertools.combinations(subsets, t):
            family.add(frozenset.union(*combo))
    return family


def accuracy(members, correct):
    if not members:
        return Fraction(0)
    return Fraction(sum(1 for i in members if correct[i]), len(members))


def restricted(value, target):
    return value if target else Fraction(0)


def inconsistency(values, u, k):
    """max |res_{U,V}(a_U) - a_V| over V ⊆ U in ``values`` with |U \\ V| ≤ k."""
    best = None
    for v, a_v in values.items():
        if v <= u and len(u - v) <= k:
            diff = abs(restricted(values[u], v) - a_v)
            best = diff if best is None else max(best, diff)
    return best


def extrema(values, item):
    nbrs = [a for s, a in values.items() if item in s]
    return min(nbrs), max(nbrs)


def random_case(rng: random.Random, max_items=12, max_elements=5):
    """A random small dataset plus predictions, with at most ``max_elements`` subbasis sets."""
    n = rng.randint(1, max_items)
    n_labels = rng.randint(1, min(2, max_elements))
    n_attrs = rng.randint(0, max_elements - n_labels)
    labels = [f"L{i}" for i in range(n_labels)]
    # every label occurs at least once when n allows it
    true = [labels[i % n_labels] for i in range(n)]
    rng.shuffle(true)
    used = [lab for lab in labels if lab in true]
    attrs = [f"a{j}" for j in range(n_attrs)]
    items = []
    for i in range(n):
        values = tuple(rng.choice(list(AttributeValue)) for _ in attrs)
        items.append(Item(str(i), true[i], values, ()))
    dataset = Dataset(tuple(items), LabelSpace(tuple(used)), tuple(attrs), ())
    preds = PredictionTable(
        {str(i): PredictionEntry(rng.choice(used) if rng.random() < 0.5 else true[i]) for i in range(n)}
    )
    return dataset, preds
