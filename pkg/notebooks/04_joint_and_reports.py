"""
Joint uncertainty and full reports
==================================

Combine both sources of uncertainty, then produce the per-unit table for
every method.
"""

# %%
import dataclasses
from pathlib import Path

from misprev import (
    EstimationParams,
    Platform,
    RandomStream,
    emit_report,
    run_estimation,
)
from misprev.validation import SynthSpec, generate_corpus
from misprev.ingest import Corpus
from misprev.joint import estimate_joint

spec = SynthSpec.from_json(Path(__file__).with_name("synth_spec.json"))
corpus, _ = generate_corpus(spec)

# %%
res = estimate_joint(corpus.posts, 50, 50, 50, RandomStream(4))
s = res.summary
print(f"joint: {100 * s.mean:.2f}%  [{100 * s.p2_5:.2f}, {100 * s.p97_5:.2f}]  from {s.n_samples} samples")

# %% [markdown]
# Spread the synthetic posts over four languages and two platforms to get a
# multi-unit table.

# %%
langs, plats = ("fr", "pl", "sk", "es"), (Platform.TikTok, Platform.Facebook)
posts = tuple(
    dataclasses.replace(p, language=langs[i % 4], platform=plats[(i // 4) % 2])
    for i, p in enumerate(corpus.posts)
)
multi = Corpus(posts, corpus.provenance)
params = EstimationParams(s=200, b_kw=100, b_post=100, joint_b_kw=30, joint_b_post=30, joint_s=30)
reports = run_estimation(multi, "language", params=params, seed=1)
print(emit_report(reports, "md"))
