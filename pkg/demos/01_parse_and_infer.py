# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# %% [markdown]
# # Parsing facts and applying a written rule
#
# Facts are a list of predicate atoms. Unary atoms are nodes, binary atoms are
# edges. A rule matches part of the graph by cosine similarity and replaces it
# with its CREATE side.

# %%
from diffreason import compile_rule, cosine, infer, load_toy_lexicon, parse_facts, parse_rule, serialize_graph

lexicon = load_toy_lexicon()
facts = parse_facts("joe(a), win(a,b), election(b), in(b,c), USA(c)", lexicon)
print(serialize_graph(facts))

# %% [markdown]
# The rule asks for something person-like. "joe" is close enough in the toy
# vocabulary.

# %%
print("cos(joe, person) =", round(cosine(lexicon.nodes["joe"], lexicon.nodes["person"]), 3))
rule = compile_rule(
    parse_rule("MATCH person>0.6(a), win>0.7(a,b), election>0.6(b)\nCREATE (a), be(a,b), president(b)"),
    lexicon,
    "rule1",
)

# %%
for step in infer(facts, [rule]):
    print(step.rule.id, dict(step.binding.node_map), "->", serialize_graph(step.state))
