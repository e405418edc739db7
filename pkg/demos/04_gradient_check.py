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
# # Checking gradients against finite differences
#
# One rewrite step with random embeddings. The analytic gradient of the loss
# with respect to the rule's node embeddings is compared with a central
# difference estimate.

# %%
import numpy as np

from diffreason import difftensor as dt

rng = np.random.default_rng(0)
n, dim = 4, 6
P = dt.Tensor(rng.standard_normal((dim, n)), requires_grad=True)
F = dt.Tensor(rng.standard_normal((dim, n)))
thresholds = dt.Tensor(np.full((n, 1), 0.7), requires_grad=True)
M = np.ones((n, n))
g = np.array([1.0, 1.0, 0.0, 0.0])


def loss_value():
    S = dt.similarity_matrix(dt.StepMatrices(P, F, M, thresholds))
    # start from uniform truth so row sums stay below the clamp at 1
    f = dt.matmul(S, dt.Tensor(np.full((n, 1), 1.0 / n)))
    no_relations = np.zeros((1, 1))
    return dt.loss(f, no_relations, g.reshape(-1, 1), no_relations)


# %%
dt.zero_grads([P, thresholds])
dt.backward(loss_value())
analytic = P.grad.copy()

numeric = np.zeros_like(P.data)
h = 1e-5
for idx in np.ndindex(P.data.shape):
    keep = P.data[idx]
    P.data[idx] = keep + h
    up = loss_value().item()
    P.data[idx] = keep - h
    down = loss_value().item()
    P.data[idx] = keep
    numeric[idx] = (up - down) / (2 * h)

print("max abs difference:", np.abs(analytic - numeric).max())
