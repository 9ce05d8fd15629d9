"""Examples and label changes arrive one at a time; each update touches
a polylogarithmic number of index nodes.

Run with ``python demos/online_stream.py``.
"""

import math
import random

from treelearn.generators import random_full_binary
from treelearn.mso_compiler import parse_formula
from treelearn.mso_learner import compiled
from treelearn.online_learner import NotRealizable, online_add, online_init, online_relabel

rng = random.Random(1)
phi = parse_formula("(and (label b y) (leq y x))")     # x lies below a b-labeled y
aut = compiled(phi, ("a", "b"), "binary")
tree = random_full_binary(2 ** 15 - 1, rng, ("a",))
state = online_init(tree, aut, phi, ("y",), check=False)
scale = math.log2(tree.n) ** 2
print(f"tree with {tree.n} nodes, all labeled a; log2^2 |T| = {scale:.0f}")

# give one inner node label b, then feed examples from its subtree and outside it
v = tree.left[tree.root]
online_relabel(state, v, "b")
print(f"relabel node {v} to b: {state.last_touches} touches")
below = [u for u in range(tree.n) if tree.is_ancestor(v, u)]
outside = [u for u in range(tree.n) if not tree.is_ancestor(v, u)]
stream = [(u, "+") for u in rng.sample(below, 6)] + [(u, "-") for u in rng.sample(outside, 4)]
rng.shuffle(stream)
for u, c in stream:
    h = online_add(state, (u, c))
    print(f"example {u:>5} {c}: y = {h.params[0]:>5}   {state.last_touches:>4} touches")

# moving the b label away makes the positives unexplainable
try:
    online_relabel(state, v, "a")
except NotRealizable:
    print(f"relabel node {v} back to a: no consistent parameter any more")
