"""Independent reference implementations used by the property tests."""
import random


def random_digraph(rng, max_nodes=300, p=0.05):
    n = rng.randint(1, max_nodes)
    edges = {(a, b) for a in range(n) for b in range(n) if rng.random() < p}
    k_src, k_snk = rng.randint(1, 3), rng.randint(1, 3)
    nodes = list(range(n))
    sources = rng.sample(nodes, min(k_src, n))
    sinks = rng.sample(nodes, min(k_snk, n))
    return n, edges, sources, sinks


def naive_source(edges, sources, caller_closure=False):
    """Apply every rule to the whole set until nothing changes."""
    s = set()
    while True:
        new = set(s)
        for x, y in edges:
            if y in sources:
                new.add(x)
            if x in s:
                new.add(y)
            if caller_closure and y in s:
                new.add(x)
        if new == s:
            return s
        s = new


def naive_sink(edges, sinks):
    s = set()
    while True:
        new = set(s)
        for x, y in edges:
            if y in sinks or y in s:
                new.add(x)
        if new == s:
            return s
        s = new


def naive_reach(edges, base):
    s = set(base)
    while True:
        new = s | {y for x, y in edges if x in s}
        if new == s:
            return s
        s = new


def graphs(count, seed=0):
    rng = random.Random(seed)
    return [random_digraph(rng) for _ in range(count)]
