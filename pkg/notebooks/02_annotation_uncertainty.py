"""
Annotation uncertainty by multinomial simulation
================================================

Junior-only posts are reassigned to groups using the junior-to-agreed
transition rates seen on the double-coded subset.
"""

# %%
from pathlib import Path

import numpy as np

from misprev import PrevalenceDefinition, RandomStream
from misprev.validation import SynthSpec, generate_corpus
from misprev.annotation import reference_matrix_for, simulate_annotation

spec = SynthSpec.from_json(Path(__file__).with_name("synth_spec.json"))
corpus, truth = generate_corpus(spec)
posts = list(corpus.posts)
print(len(posts), "posts,", sum(p.double_coded for p in posts), "double-coded")

# %% [markdown]
# The reference matrix: rows are junior groups, columns agreed groups.

# %%
matrix, warnings = reference_matrix_for(posts)
np.set_printoptions(precision=3, suppress=True)
print(matrix.support)
print(matrix.probs)
print("warnings:", warnings)

# %%
res = simulate_annotation(posts, matrix, 500, RandomStream(1))
s = res.summary
print(f"restricted prevalence {100 * s.mean:.2f}%  [{100 * s.p2_5:.2f}, {100 * s.p97_5:.2f}]")
print(f"true value {100 * spec.true_prevalence(PrevalenceDefinition.Restricted):.2f}%")

# %% [markdown]
# The mean correction matrix shows where junior-only posts end up on average.

# %%
print(res.mean_correction.round(1))
