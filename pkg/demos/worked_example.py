"""Walk through the 17-node example: two hypotheses, one learned parameter.

Run with ``python demos/worked_example.py``.
"""

from treelearn.mso_compiler import evaluate_query, format_formula
from treelearn.mso_learner import apply_training, index_for, learn_model, trace
from treelearn.samples import node_id, node_name, sample_formulas, sample_training, sample_tree


def show(nodes):
    return "{" + ", ".join(sorted((node_name(u) for u in nodes), key=lambda s: int(s[1:]))) + "}"


tree = sample_tree()
train = sample_training()
phi, psi = sample_formulas()

print("examples:", ", ".join(f"{node_name(u)}{c}" for u, c in train))
print()
print("phi(x; y) =", format_formula(phi))
print("  with y = u5 it accepts", show(evaluate_query(phi, tree, [node_id("u5")])))
print("psi(x)    =", format_formula(psi))
print("  it accepts", show(evaluate_query(psi, tree, [])))
print()

# the index depends on the tree and formula only; the examples come later
index = index_for(tree, phi)
print(f"index: {len(index.dec.paths)} heavy paths, {len(index.monoid)} monoid elements, "
      f"{index.budget.indexing} node touches")
trained = apply_training(index, train)
params = trace(trained)
print(f"learning: {trained.budget.updating} update touches, {trained.budget.tracing} trace touches")
print("learned parameter:", [node_name(v) for v in params])
print()

# model learning: try a small catalog of formulas in order
h = learn_model(tree, [psi, phi], train)
print("first consistent catalog entry:", h.describe())
