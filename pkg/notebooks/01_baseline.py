"""
Baseline prevalence with Wilson intervals
=========================================

Build a small corpus by hand, group its labels and compute both prevalence
definitions with their Wilson intervals.
"""

# %%
from misprev import (
    AnnotatedPost,
    LabelCategory,
    Platform,
    PrevalenceDefinition,
    count_groups,
    effective_label,
    preprocess,
    wilson_interval,
)

L = LabelCategory

# %% [markdown]
# Each post has a junior label. A subset also carries a senior label and the
# agreed label both annotators settled on. Posts the senior could no longer
# open ("Deleted") are dropped by preprocessing.

# %%
rows = [
    ("a1", L.MisDisinformation, None),
    ("a2", L.CredibleInformative, L.CredibleInformative),
    ("a3", L.Borderline, L.MisDisinformation),
    ("a4", L.Unverifiable, None),
    ("a5", L.Irrelevant, None),
    ("a6", L.CredibleInformative, L.Deleted),
    ("a7", L.Deleted, L.Deleted),
]
raw = [
    AnnotatedPost(pid, Platform.TikTok, "fr", "vaccin", 100, junior, agreed, agreed)
    for pid, junior, agreed in rows
]
corpus = preprocess(raw)
print(corpus.provenance.as_dict())

# %% [markdown]
# The effective label is the agreed label where one exists and the junior
# label otherwise. Grouped counts feed both definitions.

# %%
counts = count_groups(effective_label(p) for p in corpus.posts)
print(counts)

for definition in PrevalenceDefinition:
    n = counts.n_mis + counts.n_legit if definition is PrevalenceDefinition.Restricted else counts.total
    ci = wilson_interval(counts.n_mis, n)
    print(f"{definition.value:>10}: {100 * ci.p_hat:5.1f}%  [{100 * ci.lower:.1f}, {100 * ci.upper:.1f}]")

# %% [markdown]
# Interval width shrinks roughly with the square root of the sample size.

# %%
for n in (50, 500, 5000):
    ci = wilson_interval(n // 10, n)
    print(n, round(ci.upper - ci.lower, 4))
