"""Estimation runs across analysis units and methods, and report output."""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from misprev.annotation import reference_matrix_for, simulate_annotation
from misprev.ingest import Corpus, Provenance, slice_by_unit
from misprev.joint import estimate_joint
from misprev.labels import AnalysisUnit, PrevalenceDefinition, count_groups, effective_label
from misprev.retrieval import bootstrap_retrieval, keyword_pool
from misprev.stats import RandomStream, prevalence, wilson_interval, z_for_alpha

logger = logging.getLogger(__name__)

__all__ = [
    "METHODS",
    "METHOD_TITLES",
    "EstimationParams",
    "EstimateReport",
    "round_pct",
    "run_estimation",
    "emit_report",
    "reports_to_json",
    "reports_from_json",
    "export_distribution",
    "matrices_report",
    "matrices_markdown",
]

METHODS = ("baseline", "annotation", "retrieval", "joint")
METHOD_TITLES = {
    "baseline": "Baseline (Wilson)",
    "annotation": "Annot. Uncert.",
    "retrieval": "Retr. Uncert.",
    "joint": "Joint Uncert.",
}

CSV_FIELDS = (
    "unit_type",
    "unit_key",
    "method",
    "definition",
    "n_posts",
    "n_double_coded",
    "point_pct",
    "ci_low_pct",
    "ci_high_pct",
    "point_pct_raw",
    "ci_low_pct_raw",
    "ci_high_pct_raw",
    "median_pct_raw",
    "n_replicates",
    "n_undefined",
    "warnings",
)


def round_pct(value: Optional[float]) -> Optional[float]:
    """Proportion to percent at one decimal, round-half-to-even."""
    if value is None:
        return None
    d = Decimal(repr(value * 100.0)).quantize(Decimal("0.1"), rounding=ROUND_HALF_EVEN)
    return float(d)


@dataclass(frozen=True)
class EstimationParams:
    alpha: float = 0.05
    s: int = 500
    b_kw: int = 500
    b_post: int = 500
    joint_b_kw: int = 100
    joint_b_post: int = 100
    joint_s: int = 100

    def for_method(self, method: str) -> dict:
        if method == "baseline":
            return {"alpha": self.alpha, "z": z_for_alpha(self.alpha)}
        if method == "annotation":
            return {"s": self.s}
        if method == "retrieval":
            return {"b_kw": self.b_kw, "b_post": self.b_post}
        return {"b_kw": self.joint_b_kw, "b_post": self.joint_b_post, "s": self.joint_s}


@dataclass
class EstimateReport:
    unit_type: str
    unit_key: str
    method: str
    definition: str
    n_posts: int
    n_double_coded: int
    point_pct: Optional[float]
    ci_low_pct: Optional[float]
    ci_high_pct: Optional[float]
    point_pct_raw: Optional[float]
    ci_low_pct_raw: Optional[float]
    ci_high_pct_raw: Optional[float]
    median_pct_raw: Optional[float]
    n_replicates: int
    n_undefined: int
    warnings: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    samples: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def unit(self) -> AnalysisUnit:
        return AnalysisUnit.parse(f"{self.unit_type}:{self.unit_key}")

    @property
    def has_estimate(self) -> bool:
        return self.point_pct_raw is not None

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("samples")
        return out


def _pct(x: Optional[float]) -> Optional[float]:
    return None if x is None else x * 100.0


def _estimate_cell(task) -> EstimateReport:
    unit, posts, method, definition, params, stream, provenance, empty = task
    n_double = sum(p.double_coded for p in posts)
    base = dict(
        unit_type=unit.kind,
        unit_key=unit.key,
        method=method,
        definition=definition.value,
        n_posts=len(posts),
        n_double_coded=n_double,
        params=dict(params.for_method(method), seed=stream.master_seed),
        provenance=provenance,
    )
    warnings: list[str] = []
    point = lo = hi = med = None
    n_rep = n_undef = 0
    samples = None
    if empty:
        warnings.append("empty_slice")
    elif method == "baseline":
        counts = count_groups(effective_label(p) for p in posts)
        n = counts.n_mis + counts.n_legit if definition is PrevalenceDefinition.Restricted else counts.total
        if n == 0:
            warnings.append("undefined_prevalence")
        else:
            ci = wilson_interval(counts.n_mis, n, z_for_alpha(params.alpha))
            point, lo, hi = ci.p_hat, ci.lower, ci.upper
            n_rep = n
    else:
        cell_stream = stream.derive(method, 0).derive(unit.render(), 0)
        if method == "annotation":
            res = simulate_annotation(posts, None, params.s, cell_stream, definition)
            n_rep = res.s
        elif method == "retrieval":
            res = bootstrap_retrieval(
                keyword_pool(posts), None, params.b_kw, params.b_post, cell_stream, definition
            )
            n_rep = params.b_kw * params.b_post
        elif method == "joint":
            res = estimate_joint(
                posts, params.joint_b_kw, params.joint_b_post, params.joint_s, cell_stream, definition
            )
            n_rep = params.joint_b_kw * params.joint_b_post * params.joint_s
        else:
            raise ValueError(f"unknown method {method!r}")
        warnings.extend(res.warnings)
        n_undef = res.n_undefined
        if n_undef:
            warnings.append(f"undefined_replicates:{n_undef}")
        if res.summary is None:
            warnings.append("undefined_prevalence")
        else:
            point, lo, hi, med = res.summary.mean, res.summary.p2_5, res.summary.p97_5, res.summary.median
        samples = res.samples
    return EstimateReport(
        **base,
        point_pct=round_pct(point),
        ci_low_pct=round_pct(lo),
        ci_high_pct=round_pct(hi),
        point_pct_raw=_pct(point),
        ci_low_pct_raw=_pct(lo),
        ci_high_pct_raw=_pct(hi),
        median_pct_raw=_pct(med),
        n_replicates=n_rep,
        n_undefined=n_undef,
        warnings=warnings,
        samples=samples,
    )


def run_estimation(
    corpus: Union[Corpus, Sequence],
    units: Union[str, Iterable[AnalysisUnit]],
    methods: Iterable[str] = METHODS,
    definition: PrevalenceDefinition = PrevalenceDefinition.Restricted,
    params: EstimationParams = EstimationParams(),
    seed: int = 0,
    workers: int = 1,
    keep_samples: bool = False,
) -> list[EstimateReport]:
    """One report per (unit, method) cell.

    Parameters
    ----------
    corpus : Corpus
        Preprocessed corpus.
    units : str or iterable of AnalysisUnit
        A unit family name (``language``, ``platform``,
        ``platform-language``) or explicit units.
    methods : iterable of str
        Subset of :data:`METHODS`.
    workers : int
        Cells run in this many processes; output does not depend on it.
    keep_samples : bool
        Keep raw sample vectors on simulated-method reports.

    Returns
    -------
    list of EstimateReport
        Units sorted by canonical key, methods in :data:`METHODS` order.
    """
    from misprev.ingest import unit_family

    methods = set(methods)
    unknown = methods - set(METHODS)
    if unknown:
        raise ValueError(f"unknown method(s): {sorted(unknown)}")
    if isinstance(units, str):
        units = unit_family(corpus, units)
    units = sorted(set(units), key=lambda u: (u.kind, u.key))
    provenance = corpus.provenance.as_dict() if isinstance(corpus, Corpus) else Provenance().as_dict()
    root = RandomStream(seed)
    tasks = []
    for unit in units:
        posts, empty = slice_by_unit(corpus, unit)
        for method in METHODS:
            if method in methods:
                tasks.append((unit, posts, method, definition, params, root, provenance, empty))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            reports = list(ex.map(_estimate_cell, tasks))
    else:
        reports = []
        for task in tasks:
            logger.info("estimating %s / %s", task[0].render(), task[2])
            reports.append(_estimate_cell(task))
    if not keep_samples:
        for r in reports:
            r.samples = None
    return reports


def reports_to_json(reports: Sequence[EstimateReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=False) + "\n"


def reports_from_json(text: str) -> list[EstimateReport]:
    return [EstimateReport(**item) for item in json.loads(text)]


def _reports_to_csv(reports: Sequence[EstimateReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        row = {k: getattr(r, k) for k in CSV_FIELDS}
        row["warnings"] = ";".join(r.warnings)
        writer.writerow({k: "" if v is None else v for k, v in row.items()})
    return buf.getvalue()


def _fmt(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.1f}"


def _reports_to_markdown(reports: Sequence[EstimateReport]) -> str:
    methods = [m for m in METHODS if any(r.method == m for r in reports)]
    units: list[tuple[str, str]] = []
    cells = {}
    for r in reports:
        key = (r.unit_type, r.unit_key)
        if key not in cells:
            units.append(key)
            cells[key] = {}
        cells[key][r.method] = r
    definitions = sorted({r.definition for r in reports})
    unit_title = units[0][0].replace("-", " ").title() if units else "Unit"
    lines = []
    if definitions:
        lines.append(f"Prevalence ({', '.join(definitions)}, %)")
        lines.append("")
    header = [unit_title]
    for m in methods:
        header += [f"{METHOD_TITLES[m]} Est.", "95% CI"]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "|".join(["---"] + ["---:"] * (2 * len(methods))) + "|")
    for key in units:
        row = [key[1]]
        for m in methods:
            r = cells[key].get(m)
            if r is None or not r.has_estimate:
                row += ["", ""]
            else:
                row += [_fmt(r.point_pct), f"[{_fmt(r.ci_low_pct)}–{_fmt(r.ci_high_pct)}]"]
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def emit_report(reports: Sequence[EstimateReport], format: str = "json", out: Union[str, Path, None] = None) -> str:
    """Render reports as ``json``, ``csv`` or ``md`` and write them to ``out``.

    Returns the rendered text; ``out=None`` writes nothing.
    """
    if format == "json":
        text = reports_to_json(reports)
    elif format == "csv":
        text = _reports_to_csv(reports)
    elif format in ("md", "markdown"):
        text = _reports_to_markdown(reports)
    else:
        raise ValueError(f"unknown report format {format!r}")
    if out is not None:
        Path(out).write_text(text, encoding="utf-8")
    return text


def export_distribution(samples, max_points: int, stream: RandomStream, out: Union[str, Path]) -> int:
    """Write samples (uniformly subsampled without replacement when there
    are more than ``max_points``) as a one-column CSV. Returns rows written."""
    if max_points < 1:
        raise ValueError("max_points must be >= 1")
    x = np.asarray(samples, dtype=float).ravel()
    if x.size > max_points:
        idx = np.sort(stream.generator().choice(x.size, size=max_points, replace=False))
        x = x[idx]
    with Path(out).open("w", encoding="utf-8", newline="") as fh:
        fh.write("prevalence\n")
        for v in x.tolist():
            fh.write(f"{v!r}\n")
    return int(x.size)


def matrices_report(corpus: Union[Corpus, Sequence], units: Union[str, Iterable[AnalysisUnit]], s: int = 500, seed: int = 0) -> list[dict]:
    """Reference matrix and mean correction matrix for every unit."""
    from misprev.ingest import unit_family

    if isinstance(units, str):
        units = unit_family(corpus, units)
    root = RandomStream(seed)
    out = []
    for unit in sorted(set(units), key=lambda u: (u.kind, u.key)):
        posts, empty = slice_by_unit(corpus, unit)
        matrix, warnings = reference_matrix_for(posts)
        entry = {
            "unit_type": unit.kind,
            "unit_key": unit.key,
            "n_posts": len(posts),
            "n_double_coded": sum(p.double_coded for p in posts),
            "reference_matrix": matrix.to_dict(),
            "warnings": (["empty_slice"] if empty else []) + warnings,
        }
        if posts:
            stream = root.derive("annotation", 0).derive(unit.render(), 0)
            res = simulate_annotation(posts, matrix, s, stream)
            entry["mean_correction"] = {
                "mean": res.mean_correction.tolist(),
                "p2_5": res.correction_p2_5.tolist(),
                "p97_5": res.correction_p97_5.tolist(),
                "s": s,
            }
        out.append(entry)
    return out


def matrices_markdown(entries: Sequence[dict]) -> str:
    names = ["MisDisinfo", "Legit", "AllTheRest"]
    lines = []
    for e in entries:
        lines.append(f"### {e['unit_type']}: {e['unit_key']} (n={e['n_posts']}, double-coded={e['n_double_coded']})")
        lines.append("")
        lines.append("Reference matrix (rows: junior group, columns: agreed group; counts and row proportions)")
        lines.append("")
        lines.append("| junior \\ agreed | " + " | ".join(names) + " |")
        lines.append("|---|" + "---:|" * 3)
        ref = e["reference_matrix"]
        for i, name in enumerate(names):
            cells = [f"{ref['support'][i][j]} ({ref['probs'][i][j]:.3f})" for j in range(3)]
            lines.append(f"| {name} | " + " | ".join(cells) + " |")
        if "mean_correction" in e:
            mc = e["mean_correction"]
            lines.append("")
            lines.append(f"Mean correction matrix over {mc['s']} runs (junior-only posts), 2.5–97.5 percentiles")
            lines.append("")
            lines.append("| junior \\ corrected | " + " | ".join(names) + " |")
            lines.append("|---|" + "---:|" * 3)
            for i, name in enumerate(names):
                cells = [
                    f"{mc['mean'][i][j]:.1f} [{mc['p2_5'][i][j]:.1f}–{mc['p97_5'][i][j]:.1f}]" for j in range(3)
                ]
                lines.append(f"| {name} | " + " | ".join(cells) + " |")
        if e["warnings"]:
            lines.append("")
            lines.append("Warnings: " + ", ".join(e["warnings"]))
        lines.append("")
    return "\n".join(lines)
