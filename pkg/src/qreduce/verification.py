"""Verification suites run by ``qreduce verify`` and friends.

Each check records the property it tests under ``reference`` so that a
failing line names the result being violated.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from qreduce.apparatus import (
    Apparatus,
    from_nonselective,
    is_a_compatible,
    measured_observable,
    operation_deviation,
    verify_decomposition,
)
from qreduce.dilation import IndirectModel, realize, realized_effects
from qreduce.errors import NotCompatible
from qreduce.operators import DEFAULT_TOL, Tolerances, partial_trace_second
from qreduce.randomness import make_rng, random_density
from qreduce.sequential import check_mixing_law
from qreduce.superop import (
    SuperOperator,
    apply,
    check_positivity,
    contractivity_report,
    is_completely_positive,
)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    deviation: float
    reference: str


@dataclass
class Report:
    checks: list[Check] = field(default_factory=list)

    def add(self, name: str, passed: bool, deviation: float, reference: str) -> None:
        self.checks.append(Check(name, bool(passed), float(deviation), reference))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {
            "checks": [
                {"name": c.name, "verdict": "pass" if c.passed else "fail",
                 "deviation": c.deviation, "reference": c.reference}
                for c in self.checks
            ],
            "overall": "pass" if self.passed else "fail",
        }


REF_NORMALIZATION = "normalization: effects sum to the identity"
REF_POSITIVITY = "operations map densities to positive operators"
REF_CP = "complete positivity (Choi criterion)"
REF_CONTRACTIVITY = "positive-map contractivity equivalences"
REF_TRACE = "trace preservation iff dual unitality"
REF_DECOMPOSITION = "compatible distributions factor through the nonselective operation"
REF_BIJECTION = "compatible distributions correspond one-to-one to compatible nonselective operations"
REF_MIXING = "mixing law of the joint probability"
REF_REALIZATION = "indirect measurement model realization"
REF_EFFECTS = "effects of an indirect measurement model"


def _superoperator_checks(report: Report, name: str, L: SuperOperator, samples: int, seed: int, tol: Tolerances) -> None:
    pos = check_positivity(L, samples, seed, tol.psd)
    report.add(f"{name}: positivity ({samples} samples)", not pos.found_counterexample,
               max(0.0, -pos.min_eigenvalue), REF_POSITIVITY)
    cp = is_completely_positive(L, tol.cp)
    report.add(f"{name}: complete positivity", cp.is_cp, max(0.0, -cp.min_eigenvalue), REF_CP)


def verify_apparatus(app: Apparatus, samples: int = 1000, seed: int = 0, tol: Tolerances = DEFAULT_TOL) -> Report:
    report = Report()
    od = app.opdist
    dev = od.normalization_error()
    report.add("normalization", dev <= tol.normalization, dev, REF_NORMALIZATION)
    for x, L in od.items():
        _superoperator_checks(report, f"operation {x:g}", L, samples, seed, tol)
        flags = contractivity_report(L, tol.normalization)
        report.add(f"operation {x:g}: contractive", flags.trace_bound and flags.dual_I_bound,
                   0.0, REF_CONTRACTIVITY)

    T = od.total()
    flags = contractivity_report(T, tol.normalization)
    report.add("nonselective operation: trace preserving",
               flags.trace_preserving and flags.dual_unital, 0.0, REF_TRACE)

    A = measured_observable(app, tol)
    if A is not None and is_a_compatible(app, A, tol.normalization):
        try:
            d = verify_decomposition(app, A, samples=20, seed=seed, tol=tol.normalization)
            report.add("decomposition identities", d <= 1e-10, d, REF_DECOMPOSITION)
        except NotCompatible:
            report.add("decomposition identities", False, float("inf"), REF_DECOMPOSITION)
        try:
            back = from_nonselective(T, A, tol)
            d = operation_deviation(back, app)
            report.add("nonselective round trip", d <= 1e-10, d, REF_BIJECTION)
        except NotCompatible:
            report.add("nonselective round trip", False, float("inf"), REF_BIJECTION)

    rng = make_rng(seed)
    worst = 0.0
    for _ in range(5):
        r1, r2 = random_density(app.dim, rng), random_density(app.dim, rng, rank=1)
        worst = max(worst, check_mixing_law(app, app, r1, r2, float(rng.uniform(0.1, 0.9))))
    report.add("mixing law (repeated measurement)", worst <= 1e-10, worst, REF_MIXING)
    return report


def verify_superoperator(L: SuperOperator, samples: int = 1000, seed: int = 0, tol: Tolerances = DEFAULT_TOL) -> Report:
    report = Report()
    _superoperator_checks(report, "map", L, samples, seed, tol)
    f = contractivity_report(L, tol.normalization)
    report.add("trace bound agrees with dual bound", f.trace_bound == f.dual_I_bound, 0.0, REF_CONTRACTIVITY)
    report.add("contractivity agrees with dual contractivity",
               f.contractive_tr_norm == f.dual_contractive, 0.0, REF_CONTRACTIVITY)
    report.add("trace preservation agrees with dual unitality",
               f.trace_preserving == f.dual_unital, 0.0, REF_TRACE)
    return report


def verify_model(model: IndirectModel, samples: int = 20, seed: int = 0, tol: Tolerances = DEFAULT_TOL) -> Report:
    report = Report()
    app = realize(model)
    od = app.opdist
    dev = od.normalization_error()
    report.add("realized normalization", dev <= tol.normalization, dev, REF_NORMALIZATION)
    for x, L in od.items():
        cp = is_completely_positive(L, 1e-10)
        report.add(f"realized operation {x:g}: complete positivity", cp.is_cp,
                   max(0.0, -cp.min_eigenvalue), REF_CP)

    d, k = model.sys_dim, model.probe_dim
    rng = make_rng(seed)
    T = od.total()
    worst = 0.0
    for _ in range(samples):
        rho = random_density(d, rng)
        direct = partial_trace_second(model.joint_state(rho), d, k)
        worst = max(worst, float(np.max(np.abs(apply(T, rho) - direct))))
    report.add("nonselective operation is the reduced evolution", worst <= 1e-10, worst, REF_REALIZATION)

    effects = od.effects()
    worst = 0.0
    for x, e in realized_effects(model).items():
        worst = max(worst, float(np.max(np.abs(effects.get(x, np.zeros_like(e)) - e))))
    report.add("effect formula", worst <= 1e-10, worst, REF_EFFECTS)
    return report
