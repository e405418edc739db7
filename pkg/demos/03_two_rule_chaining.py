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
# # Chaining two rules
#
# The first template joins two properties with a frozen "and" relation. The
# second must learn to turn that pair into an apple. Frozen relations keep
# their vocabulary embedding throughout training.

# %%
import numpy as np

from diffreason import ChainConfig, TrainConfig, compile_rule, load_toy_lexicon, parse_facts, parse_rules, train_all

lexicon = load_toy_lexicon()
facts = parse_facts("fruit(a), be(a,b), round(b), be(a,c), delicious(c)", lexicon)
goal = parse_facts("fruit(a), be(a,b), apple(b)", lexicon)
templates = parse_rules(
    "MATCH *(a), *(a,b), *(b), *(a,c), *(c)\nCREATE (b), and(b,c), (c)\n\n"
    "MATCH *(a), and(a,b), *(b)\nCREATE *(c), *(c,d), *(d)"
)
rules = [compile_rule(t, lexicon, f"rule{i + 1}", seed=0) for i, t in enumerate(templates)]

# %%
best, _ = train_all(facts, goal, rules, lexicon, ChainConfig(max_depth=2), TrainConfig(seed=0))
for text in best.rule_texts:
    print(text, end="\n\n")
print("verified:", best.verified)

# %%
learned_and = next(e for e in best.rules[1].pre.edges if e.name == "and")
print("frozen 'and' unchanged:", np.array_equal(learned_and.embedding, lexicon.relations["and"]))
