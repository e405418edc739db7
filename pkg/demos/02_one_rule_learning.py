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
# # Learning one rule from an empty template
#
# Every symbol in the template is a wildcard. Training fits node and relation
# embeddings, thresholds and the rule weight so that the rewritten graph
# matches the goal. The learned rule is then turned back into text and checked
# by symbolic replay.

# %%
from diffreason import ChainConfig, TrainConfig, compile_rule, load_toy_lexicon, parse_facts, parse_rules, train_all

lexicon = load_toy_lexicon()
facts = parse_facts("person(a), spouse(a,b), person(b), be(a,c), first-lady(c)", lexicon)
goal = parse_facts("person(a), profession(a,b), president(b)", lexicon)
templates = parse_rules("MATCH *(a), *(a,b), *(b), *(a,c), *(c)\nCREATE (b), *(b,d), *(d)")
rules = [compile_rule(t, lexicon, "rule1", seed=0) for t in templates]

# %%
best, ranked = train_all(facts, goal, rules, lexicon, ChainConfig(max_depth=1), TrainConfig(seed=0))
print(len(ranked), "candidate paths, best loss", round(best.final_loss, 4), "after", best.epochs, "epochs")

# %%
print(best.rule_texts[0])
print("verified:", best.verified)

# %% [markdown]
# The loss curve drops quickly and then plateaus once the weight reaches its
# ceiling.

# %%
curve = best.loss_curve
for epoch in range(0, len(curve), max(1, len(curve) // 10)):
    print(epoch, round(curve[epoch], 4))
