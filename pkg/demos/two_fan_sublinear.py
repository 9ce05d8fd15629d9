"""The quantifier-free learner asks the same number of oracle questions
no matter how large the two-fan fixture tree grows.

Run with ``python demos/two_fan_sublinear.py``.
"""

import time

from treelearn.qf_learner import gen_lemma3_tree, learn_qf
from treelearn.tree_core import OracleSession

print(f"{'m':>7} {'nodes':>8} {'oracle calls':>13}  {'seconds':>7}  hypothesis")
for m in (10, 100, 1_000, 10_000, 100_000):
    tree, train, named = gen_lemma3_tree(m, 1)
    session = OracleSession(tree)
    start = time.perf_counter()
    h = learn_qf(session, train, 1)
    took = time.perf_counter() - start
    assert h.params == (named["v"],)
    print(f"{m:>7} {tree.n:>8} {session.total_calls():>13}  {took:7.3f}  {h.text()}")
