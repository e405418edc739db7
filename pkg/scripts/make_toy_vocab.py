"""Regenerate the bundled toy vocabulary (node vectors + relation vectors).

Node vectors are drawn by rejection so unrelated words stay below 0.45
cosine; ``joe`` is built at cosine 0.8 to ``person``. Relation vectors are
``random_embedding(RELATION_SEED, name, DIM)``, with the seed chosen as the
first one keeping every relation pair below 0.5.
"""

import itertools
from pathlib import Path

import numpy as np

from diffreason.embeddings import VocabStore, cosine, random_embedding, relation_store, save_word_vectors

DIM = 16
NODE_WORDS = """
person joe election USA president first-lady fruit round delicious apple
dog cat car house city country tree river book music water king queen man
woman child teacher doctor school computer money food bread red green blue
happy sad big small banana orange pear sweet mountain ocean table chair
phone game
""".split()
RELATIONS = """
spouse be profession win in and has of at on part-of owns likes near with
""".split()
OUT = Path(__file__).resolve().parents[1] / "src" / "diffreason" / "data"


def node_vectors(seed: int = 2024) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    vecs: dict[str, np.ndarray] = {}
    for word in NODE_WORDS:
        if word == "joe":
            p = vecs["person"] / np.linalg.norm(vecs["person"])
            while True:
                r = rng.standard_normal(DIM)
                r -= (r @ p) * p
                r /= np.linalg.norm(r)
                v = 4.0 * (0.8 * p + 0.6 * r)
                if all(abs(cosine(v, u)) < 0.45 for w, u in vecs.items() if w != "person"):
                    break
        else:
            while True:
                v = rng.standard_normal(DIM)
                if all(abs(cosine(v, u)) < 0.45 for u in vecs.values()):
                    break
        vecs[word] = np.round(v, 6)
    return vecs


def relation_seed() -> int:
    for seed in itertools.count():
        vecs = [random_embedding(seed, r, DIM) for r in RELATIONS]
        if all(abs(cosine(a, b)) < 0.5 for a, b in itertools.combinations(vecs, 2)):
            return seed


if __name__ == "__main__":
    save_word_vectors(VocabStore(DIM, node_vectors()), OUT / "toy_vectors.txt")
    seed = relation_seed()
    save_word_vectors(relation_store(RELATIONS, seed, DIM), OUT / "toy_relations.txt")
    print(f"relation seed {seed}")
