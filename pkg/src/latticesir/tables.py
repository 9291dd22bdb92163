"""Scripted parameter sweep reproducing the regime tables.

Each row pairs a representative parameter set with the label the
classifiers assign to it and the label the regime table expects.
"""

from __future__ import annotations

import math

from .first_moments import Rates, classify_first_moment, classify_homogeneous_first_moment
from .intermittency import classify_intermittency
from .kernel import kernel_nearest_neighbor
from .second_moments import TABLE4_ROWS, classify_homogeneous_second_moment, classify_second_moment

HALF_PI = math.pi / 2

# (regime, kappa, beta, gamma, k, expected label) for nearest neighbours in d = 1
TABLE2_SWEEP = (
    ("theta < 0", 1.0, 0.4, 0.6, HALF_PI, "vanish"),
    ("theta = 0", 1.0, 0.5, 0.5, 0.0, "steady_delta"),
    ("alpha = 0, theta > 0", 1.0, 0.6, 0.4, 0.0, "grow_origin_only"),
    ("alpha < 0, theta > 0", 0.1, 0.6, 0.4, HALF_PI, "grow_everywhere"),
)

# (condition, beta, gamma, expected same_site, expected pair)
TABLE3_SWEEP = (
    ("beta > gamma", 0.6, 0.4, "infinity", "infinity"),
    ("beta = gamma", 0.5, 0.5, "infinity", "zero"),
    ("beta < gamma", 0.4, 0.6, "zero", "zero"),
)

# rule number -> (kappa, beta, gamma, k) reaching it, None when unreachable
TABLE4_SWEEP = {
    1: (1.0, 0.5, 0.5, HALF_PI),
    2: (1.0, 0.5, 0.5, 0.0),
    3: None,
    4: None,
    5: (1.0, 0.1, 0.2, HALF_PI),
    6: (1.0, 0.6, 0.4, 0.0),
}

# (space, condition, beta, gamma, expected label)
TABLE5_SWEEP = (
    ("homogeneous", "beta < gamma", 0.3, 0.5, "intermittent"),
    ("homogeneous", "beta = gamma", 0.5, 0.5, "intermittent"),
    ("homogeneous", "beta > gamma", 0.6, 0.4, "bounded"),
    ("inhomogeneous", "beta < gamma", 0.3, 0.5, "intermittent"),
    ("inhomogeneous", "beta = gamma", 0.5, 0.5, "intermittent"),
    ("inhomogeneous", "beta > gamma", 0.6, 0.4, "intermittent"),
)


def table2_rows() -> list[dict]:
    kernel = kernel_nearest_neighbor(1)
    rows = []
    for regime, kappa, beta, gamma, k, expected in TABLE2_SWEEP:
        rates = Rates(kappa, beta, gamma)
        rep = classify_first_moment(kernel, rates, k)
        rows.append({"regime": regime, "kappa": kappa, "beta": beta, "gamma": gamma, "k": k,
                     "alpha": rep.alpha, "theta": rep.theta, "R0": rep.r0, "R0m": rep.r0m,
                     "homogeneous": classify_homogeneous_first_moment(rates),
                     "label": rep.label, "expected": expected})
    return rows


def table3_rows() -> list[dict]:
    rows = []
    for cond, beta, gamma, exp_same, exp_pair in TABLE3_SWEEP:
        same, pair = classify_homogeneous_second_moment(Rates(1.0, beta, gamma))
        rows.append({"condition": cond, "beta": beta, "gamma": gamma,
                     "same_site": same, "pair": pair,
                     "expected_same_site": exp_same, "expected_pair": exp_pair})
    return rows


def table4_rows() -> list[dict]:
    kernel = kernel_nearest_neighbor(1)
    rows = []
    for rule in TABLE4_ROWS:
        params = TABLE4_SWEEP[rule["row"]]
        row = {"row": rule["row"], "when": rule["when"], "feasible": rule["feasible"],
               "kappa": None, "beta": None, "gamma": None, "k": None,
               "matched_row": None, "same_site": "infeasible", "pair": "infeasible",
               "expected_same_site": rule["same_site"] if rule["feasible"] else "infeasible",
               "expected_pair": rule["pair"] if rule["feasible"] else "infeasible"}
        if params is not None:
            kappa, beta, gamma, k = params
            reg = classify_second_moment(kernel, Rates(kappa, beta, gamma), k)
            row.update(kappa=kappa, beta=beta, gamma=gamma, k=k, matched_row=reg.row,
                       same_site=reg.same_site, pair=reg.pair)
        rows.append(row)
    return rows


def table5_rows(spaces=("homogeneous", "inhomogeneous")) -> list[dict]:
    kernel = kernel_nearest_neighbor(1)
    rows = []
    for space, cond, beta, gamma, expected in TABLE5_SWEEP:
        if space not in spaces:
            continue
        rep = classify_intermittency(Rates(1.0, beta, gamma), kernel, space)
        rows.append({"space": space, "condition": cond, "beta": beta, "gamma": gamma,
                     "label": rep.limit_label, "last_ratio": float(rep.ratio_same_site[-1]),
                     "expected": expected})
    return rows


def sweep_tables() -> dict[str, list[dict]]:
    """All four tables as lists of row dicts, keyed ``table2`` .. ``table5``."""
    return {"table2": table2_rows(), "table3": table3_rows(),
            "table4": table4_rows(), "table5": table5_rows()}
