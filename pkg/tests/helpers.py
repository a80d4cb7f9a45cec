import numpy as np


def random_frontier(tree, rng):
    """Leaf frontier of a random pruned subtree: expand each node with probability 1/2."""
    out, stack = [], [tree.root]
    while stack:
        v = stack.pop()
        node = tree[v]
        if node.is_leaf or rng.random() < 0.5:
            out.append(v)
        else:
            stack.extend((node.left, node.right))
    return tuple(sorted(out))


def random_dataset(rng, n, p=1, q=1, ties=False):
    from tsp_indep.partition import Dataset

    pts = rng.standard_normal((n, p + q))
    pts[:, p:] += rng.uniform(-1, 1) * pts[:, :1]
    if ties:
        pts = np.round(pts, 1)
    return Dataset(pts, p, q)
