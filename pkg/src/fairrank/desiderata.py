"""Audits of click-inferred relevance scores against five criteria:
credibility, consistency, stability, comparability, and availability.

Auditors consume multi-seed prediction dumps: per-seed test-set scores
from the selected checkpoint, per-checkpoint validation logits, plus the
true grades and group labels. Every result carries its raw statistics
alongside the thresholded verdict; meeting a criterion is a continuum and
the thresholds are configuration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .metrics import group_relevance, normalize01
from .stats import kruskal_wallis, ks_two_sample, spearman

CRITERIA = ("credibility", "consistency", "stability", "comparability",
            "availability")


@dataclass
class DesiderataThresholds:
    alpha: float = 0.05
    consistency_eps: float = 0.1
    stability_eps: float = 1.0
    rho_min: float = 0.3
    ratio_tol: float = 0.05

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "consistency_eps": self.consistency_eps,
            "stability_eps": self.stability_eps,
            "rho_min": self.rho_min,
            "ratio_tol": self.ratio_tol,
        }


@dataclass
class AuditInputs:
    """Arrays are seed-major: predictions/logits are (n_seeds, n_items) for
    the evaluation list, val_logits is (n_seeds, n_checkpoints, n_val)."""

    predictions: np.ndarray
    logits: np.ndarray
    grades: np.ndarray
    groups: np.ndarray
    seeds: list
    val_logits: np.ndarray | None = None
    checkpoint_iterations: list | None = None


@dataclass
class CriterionResult:
    name: str
    passed: bool | None
    statistics: dict
    thresholds: dict
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "statistics": self.statistics,
            "thresholds": self.thresholds,
            "notes": list(self.notes),
        }


@dataclass
class DesiderataReport:
    results: dict
    seeds: list

    def to_dict(self):
        return {
            "seeds": list(self.seeds),
            "results": {name: r.to_dict() for name, r in self.results.items()},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2,
                          default=_json_default)

    def format_table(self):
        header = [c.capitalize() for c in CRITERIA]
        verdicts = []
        for c in CRITERIA:
            result = self.results[c]
            if result.passed is None:
                verdicts.append("n/a")
            else:
                verdicts.append("pass" if result.passed else "FAIL")
        widths = [max(len(h), len(v)) for h, v in zip(header, verdicts)]
        line1 = "  ".join(h.ljust(w) for h, w in zip(header, widths))
        line2 = "  ".join(v.ljust(w) for v, w in zip(verdicts, widths))
        return line1 + "\n" + line2 + "\n"


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def audit_credibility(inputs: AuditInputs, alpha=0.05, pooled=True):
    """Do higher true grades receive higher predicted scores?

    Predictions (pooled across seeds by default) are grouped by true
    grade; verdict requires a significant Kruskal-Wallis difference and
    non-decreasing grade medians.
    """
    notes = []
    grade_levels = [g for g in range(int(inputs.grades.max()) + 1)]
    samples = []
    kept_levels = []
    for g in grade_levels:
        mask = inputs.grades == g
        if not mask.any():
            notes.append(f"grade {g} has no items; skipped")
            continue
        if pooled:
            samples.append(inputs.predictions[:, mask].ravel())
        else:
            samples.append(inputs.predictions[0, mask])
        kept_levels.append(g)
    if len(samples) < 2:
        return CriterionResult("credibility", None,
                               {"grade_levels": kept_levels},
                               {"alpha": alpha},
                               notes + ["fewer than 2 grade levels present"])
    test = kruskal_wallis(samples)
    medians = [float(np.median(s)) for s in samples]
    monotone = bool(np.all(np.diff(medians) >= 0))
    passed = bool(test.p_value < alpha and monotone)
    stats = {
        "h_statistic": test.statistic,
        "p_value": test.p_value,
        "grade_levels": kept_levels,
        "grade_medians": medians,
        "medians_non_decreasing": monotone,
        "pooled_across_seeds": pooled,
    }
    return CriterionResult("credibility", passed, stats, {"alpha": alpha}, notes)


def audit_consistency(inputs: AuditInputs, epsilon=0.1):
    """Do validation logits converge to the final checkpoint's values?

    S_n is the mean squared deviation between checkpoint-n logits and the
    final checkpoint's logits, averaged across seeds; the verdict requires
    some checkpoint after which the curve stays at or below epsilon.
    """
    if inputs.val_logits is None or inputs.val_logits.shape[1] < 2:
        raise ValueError("consistency audit needs >= 2 checkpoints")
    final = inputs.val_logits[:, -1, :]
    sq_dev = (inputs.val_logits - final[:, None, :]) ** 2
    per_seed_curves = sq_dev.mean(axis=2)  # (n_seeds, n_checkpoints)
    curve = per_seed_curves.mean(axis=0)
    # The final point compares the final checkpoint with itself and is 0
    # by construction; convergence is judged on the preceding points.
    judged = curve[:-1]
    below = judged <= epsilon
    n0_index = None
    for i in range(len(below)):
        if below[i:].all():
            n0_index = i
            break
    iters = inputs.checkpoint_iterations or list(range(len(curve)))
    stats = {
        "s_curve": curve.tolist(),
        "per_seed_s_curves": per_seed_curves.tolist(),
        "checkpoint_iterations": list(iters),
        "converged_from_iteration": (None if n0_index is None
                                     else int(iters[n0_index])),
        "final_s": float(judged[-1]) if len(judged) else 0.0,
    }
    return CriterionResult("consistency", n0_index is not None, stats,
                           {"epsilon": epsilon})


def audit_stability(inputs: AuditInputs, epsilon=1.0):
    """Do predictions vary across seeds by more than the allowed limit?

    Each seed's prediction vector is z-normalized within-list; the
    statistic is the cross-item mean of the per-item standard deviation
    across seeds.
    """
    if inputs.predictions.shape[0] < 2:
        raise ValueError("stability audit needs >= 2 seeds")
    notes = []
    z_rows = []
    for row in inputs.predictions:
        sd = row.std()
        if sd == 0.0:
            notes.append("constant prediction vector; z-scores set to 0")
            z_rows.append(np.zeros_like(row))
        else:
            z_rows.append((row - row.mean()) / sd)
    z = np.vstack(z_rows)
    per_item_std = z.std(axis=0)  # population std across seeds (Eq. mean sq dev)
    statistic = float(per_item_std.mean())
    stats = {
        "mean_per_item_std": statistic,
        "max_per_item_std": float(per_item_std.max()),
        "n_seeds": int(inputs.predictions.shape[0]),
    }
    return CriterionResult("stability", statistic <= epsilon, stats,
                           {"epsilon": epsilon}, notes)


def audit_comparability(inputs: AuditInputs, rho_min=0.3, ratio_tol=0.05):
    """Do relative comparisons carry over from true to predicted scores?

    Individual level: mean (across seeds) Spearman correlation between
    predictions and grades, overall and per group. Group level: mean
    absolute difference between the group relevance ratios computed from
    true versus predicted scores.
    """
    notes = []
    rhos, rhos_g0, rhos_g1, ratio_diffs = [], [], [], []
    rel_true = group_relevance(inputs.grades, inputs.groups)
    true_ratio = rel_true[0] / rel_true[1] if rel_true[1] else float("nan")
    g0 = inputs.groups == 0
    g1 = inputs.groups == 1
    for row in inputs.predictions:
        rhos.append(spearman(row, inputs.grades))
        rhos_g0.append(spearman(row[g0], inputs.grades[g0]))
        rhos_g1.append(spearman(row[g1], inputs.grades[g1]))
        rel_pred = group_relevance(row, inputs.groups)
        if rel_pred[1] == 0.0:
            ratio_diffs.append(float("nan"))
        else:
            ratio_diffs.append(abs(true_ratio - rel_pred[0] / rel_pred[1]))
    mean_rho = float(np.mean(rhos))
    mean_ratio_diff = float(np.mean(ratio_diffs))
    if np.isnan(mean_rho):
        notes.append("correlation undefined (constant input)")
        individual_pass = False
    else:
        individual_pass = bool(mean_rho >= rho_min)
    if np.isnan(mean_ratio_diff):
        notes.append("group relevance ratio undefined")
        group_pass = False
    else:
        group_pass = bool(mean_ratio_diff <= ratio_tol)
    stats = {
        "spearman_rho": mean_rho,
        "spearman_rho_group0": float(np.mean(rhos_g0)),
        "spearman_rho_group1": float(np.mean(rhos_g1)),
        "per_seed_rho": [float(r) for r in rhos],
        "group_ratio_diff": mean_ratio_diff,
        "true_group_ratio": float(true_ratio),
        "individual_pass": individual_pass,
        "group_pass": group_pass,
    }
    passed = individual_pass and group_pass
    return CriterionResult("comparability", passed, stats,
                           {"rho_min": rho_min, "ratio_tol": ratio_tol}, notes)


def audit_availability(inputs: AuditInputs, alpha=0.05):
    """Is a usable prediction available for every item, and does the
    prediction distribution match the grade distribution?

    Definedness requires every prediction to be finite; the distributional
    check is a per-seed two-sample KS test between the normalized grades
    and normalized predictions, summarized by the median p-value.
    """
    defined = bool(np.isfinite(inputs.predictions).all())
    notes = [] if defined else ["some predictions are undefined (non-finite)"]
    grades_norm = normalize01(inputs.grades.astype(float))
    p_values, d_values = [], []
    for row in inputs.predictions:
        finite_row = row[np.isfinite(row)]
        if len(finite_row) == 0:
            p_values.append(0.0)
            d_values.append(1.0)
            continue
        test = ks_two_sample(grades_norm, normalize01(finite_row))
        p_values.append(test.p_value)
        d_values.append(test.statistic)
    median_p = float(np.median(p_values))
    stats = {
        "all_defined": defined,
        "ks_p_median": median_p,
        "ks_d_median": float(np.median(d_values)),
        "per_seed_p": [float(p) for p in p_values],
    }
    return CriterionResult("availability", defined and median_p >= alpha,
                           stats, {"alpha": alpha}, notes)


def run_all_audits(inputs: AuditInputs,
                   thresholds: DesiderataThresholds | None = None):
    """Run every auditor, converting per-criterion precondition failures
    (too few seeds or checkpoints) into n/a results with a note."""
    thresholds = thresholds or DesiderataThresholds()
    results = {}

    def guarded(name, fn):
        try:
            results[name] = fn()
        except ValueError as exc:
            results[name] = CriterionResult(name, None, {}, {},
                                            [f"not evaluated: {exc}"])

    guarded("credibility",
            lambda: audit_credibility(inputs, alpha=thresholds.alpha))
    guarded("consistency",
            lambda: audit_consistency(inputs,
                                      epsilon=thresholds.consistency_eps))
    guarded("stability",
            lambda: audit_stability(inputs, epsilon=thresholds.stability_eps))
    guarded("comparability",
            lambda: audit_comparability(inputs, rho_min=thresholds.rho_min,
                                        ratio_tol=thresholds.ratio_tol))
    guarded("availability",
            lambda: audit_availability(inputs, alpha=thresholds.alpha))
    return DesiderataReport(results=results, seeds=list(inputs.seeds))
