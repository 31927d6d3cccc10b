"""
Checking the estimators against exact answers
=============================================

Small fixtures can be enumerated exactly. The simulation should match the
enumeration, and interval coverage on synthetic corpora should be near the
nominal level.
"""

# %%
from misprev import PrevalenceDefinition, RandomStream
from misprev.annotation import ReferenceMatrix, simulate_annotation
from misprev.validation import (
    chi_square_against_exact,
    coverage_experiment,
    enumerate_multinomial_exact,
    SynthSpec,
)

# %% [markdown]
# Two junior-only "legit" posts with a 50/50 chance of being mis/disinfo:
# the corrected prevalence is 0, 1/2 or 1 with probabilities 1/4, 1/2, 1/4.

# %%
from misprev import AnnotatedPost, LabelCategory, Platform

m = ReferenceMatrix.from_support([[1, 0, 0], [1, 1, 0], [0, 0, 1]])
exact = enumerate_multinomial_exact((0, 2, 0), m, PrevalenceDefinition.Restricted)
print({str(k): float(v) for k, v in exact.probs.items()})

posts = [AnnotatedPost(f"p{i}", Platform.TikTok, "fr", "k", 1, LabelCategory.CredibleInformative) for i in range(2)]
sim = simulate_annotation(posts, m, 100_000, RandomStream(0))
print("chi-square (stat, p, dof):", chi_square_against_exact(sim.samples, exact))

# %% [markdown]
# Coverage of the Wilson interval over 1000 synthetic corpora.

# %%
spec = SynthSpec(500, (0.1, 0.9, 0.0), seed=3)
report = coverage_experiment(spec, 1000, "baseline")
print(f"coverage {report.coverage:.3f}, mean width {report.mean_width:.4f}")
