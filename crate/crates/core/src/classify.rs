//! Analytic diversity verdicts.
//!
//! Two stocks have an exact criterion (one integral with weight `A2`). For
//! `n >= 3` there is a sufficient condition each way, with `A1` deciding
//! non-diversity and `A2` deciding diversity, and nothing in between.

use serde::Serialize;

use crate::criteria::{
    at_least, constant_weight_integral, criterion_integral, integral_of_g, Route,
};
use crate::divergence::{DivergenceStatus, DivergenceVerdict};
use crate::error::{Error, Result};
use crate::model::{
    check_admissible, AdmissibilityReport, Coefficient, CriterionConstants, DriftSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DiversityStatus {
    Diverse,
    NotDiverse,
    Inconclusive,
}

/// The clause that produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Rule {
    #[serde(rename = "Thm1-iff")]
    TwoStockIff,
    #[serde(rename = "Thm2-i")]
    ManyStockNotDiverse,
    #[serde(rename = "Thm2-ii")]
    ManyStockDiverse,
    #[serde(rename = "Cor1-i")]
    TwoStockCorDiverse,
    #[serde(rename = "Cor1-ii")]
    TwoStockCorNotDiverse,
    #[serde(rename = "Cor1-iii")]
    TwoStockFiniteG,
    #[serde(rename = "Cor2-i")]
    ManyStockCorDiverse,
    #[serde(rename = "Cor2-ii")]
    ManyStockCorNotDiverse,
    #[serde(rename = "Cor2-iii")]
    ManyStockFiniteG,
    /// Closed-form table for power tails.
    #[serde(rename = "Table")]
    Table,
    #[serde(rename = "Gap")]
    Gap,
    #[serde(rename = "PreconditionFail")]
    PreconditionFail,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::TwoStockIff => "Thm1-iff",
            Rule::ManyStockNotDiverse => "Thm2-i",
            Rule::ManyStockDiverse => "Thm2-ii",
            Rule::TwoStockCorDiverse => "Cor1-i",
            Rule::TwoStockCorNotDiverse => "Cor1-ii",
            Rule::TwoStockFiniteG => "Cor1-iii",
            Rule::ManyStockCorDiverse => "Cor2-i",
            Rule::ManyStockCorNotDiverse => "Cor2-ii",
            Rule::ManyStockFiniteG => "Cor2-iii",
            Rule::Table => "Table",
            Rule::Gap => "Gap",
            Rule::PreconditionFail => "PreconditionFail",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Evidence {
    pub integral: String,
    pub verdict: DivergenceVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct Preconditions {
    pub admissible: bool,
    /// Only required for three or more stocks.
    pub boundedness_at_zero_required: bool,
    pub admissibility: AdmissibilityReport,
}

impl Preconditions {
    pub fn ok(&self) -> bool {
        self.admissible
            && (!self.boundedness_at_zero_required || self.admissibility.boundedness_at_zero)
    }
}

/// Critical tail strengths for `q = 1` power tails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// `1/a1`: below it the market is not diverse.
    pub not_diverse_below: f64,
    /// `1/a2`: at or above it the market is diverse.
    pub diverse_from: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiversityVerdict {
    pub status: DiversityStatus,
    pub rule: Rule,
    pub n: usize,
    pub delta: f64,
    pub constants: CriterionConstants,
    pub thresholds: Thresholds,
    pub evidence: Vec<Evidence>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preconditions: Option<Preconditions>,
}

fn thresholds(c: &CriterionConstants) -> Thresholds {
    Thresholds {
        not_diverse_below: c.critical_p(Coefficient::A1),
        diverse_from: c.critical_p(Coefficient::A2),
    }
}

fn verdict(
    status: DiversityStatus,
    rule: Rule,
    constants: CriterionConstants,
    evidence: Vec<Evidence>,
    preconditions: Option<Preconditions>,
) -> DiversityVerdict {
    DiversityVerdict {
        status,
        rule,
        n: constants.n,
        delta: constants.delta,
        constants,
        thresholds: thresholds(&constants),
        evidence,
        preconditions,
    }
}

fn preconditions(n: usize, spec: &DriftSpec) -> Preconditions {
    let admissibility = check_admissible(spec);
    Preconditions {
        admissible: admissibility.admissible(),
        boundedness_at_zero_required: n >= 3,
        admissibility,
    }
}

fn evidence(label: &str, v: &DivergenceVerdict) -> Evidence {
    Evidence {
        integral: label.to_string(),
        verdict: v.clone(),
    }
}

/// Analytic verdict for `n` stocks driven by `spec`.
pub fn classify_diversity(n: usize, spec: &DriftSpec) -> Result<DiversityVerdict> {
    classify_diversity_with(n, spec, Route::Auto)
}

/// As [`classify_diversity`], forcing the numeric route when asked.
pub fn classify_diversity_with(
    n: usize,
    spec: &DriftSpec,
    route: Route,
) -> Result<DiversityVerdict> {
    let constants = CriterionConstants::new(n, spec.delta())?;
    let pre = preconditions(n, spec);
    if !pre.ok() {
        return Ok(verdict(
            DiversityStatus::Inconclusive,
            Rule::PreconditionFail,
            constants,
            Vec::new(),
            Some(pre),
        ));
    }
    let x0 = constants.x0;

    if n == 2 {
        let a2 = criterion_integral(spec, Coefficient::A2, 2, x0, route)?;
        let ev = vec![evidence("A2", &a2)];
        let (status, rule) = match a2.status {
            DivergenceStatus::Divergent => (DiversityStatus::Diverse, Rule::TwoStockIff),
            DivergenceStatus::Convergent => (DiversityStatus::NotDiverse, Rule::TwoStockIff),
            DivergenceStatus::Inconclusive => (DiversityStatus::Inconclusive, Rule::Gap),
        };
        return Ok(verdict(status, rule, constants, ev, Some(pre)));
    }

    let a2 = criterion_integral(spec, Coefficient::A2, n, x0, route)?;
    if a2.status.is_divergent() {
        return Ok(verdict(
            DiversityStatus::Diverse,
            Rule::ManyStockDiverse,
            constants,
            vec![evidence("A2", &a2)],
            Some(pre),
        ));
    }
    let a1 = criterion_integral(spec, Coefficient::A1, n, x0, route)?;
    let ev = vec![evidence("A2", &a2), evidence("A1", &a1)];
    if a1.status.is_convergent() {
        return Ok(verdict(
            DiversityStatus::NotDiverse,
            Rule::ManyStockNotDiverse,
            constants,
            ev,
            Some(pre),
        ));
    }
    Ok(verdict(
        DiversityStatus::Inconclusive,
        Rule::Gap,
        constants,
        ev,
        Some(pre),
    ))
}

/// Number of points in the `eps` grid `a2 * 2^-k, k = 1..=EPS_STEPS`.
pub const EPS_STEPS: i32 = 20;

/// The weaker sufficient conditions, kept as an independent cross-check of
/// [`classify_diversity`]. They may abstain where the main criteria decide, but
/// must never contradict them.
pub fn sufficient_condition_verdict(
    n: usize,
    spec: &DriftSpec,
    route: Route,
) -> Result<DiversityVerdict> {
    let constants = CriterionConstants::new(n, spec.delta())?;
    let pre = preconditions(n, spec);
    if !pre.ok() {
        return Ok(verdict(
            DiversityStatus::Inconclusive,
            Rule::PreconditionFail,
            constants,
            Vec::new(),
            Some(pre),
        ));
    }
    let two = n == 2;
    let x0 = constants.x0;
    let int_g = integral_of_g(spec, x0, route)?;
    let mut ev = vec![evidence("g", &int_g)];
    match int_g.status {
        DivergenceStatus::Convergent => {
            let rule = if two {
                Rule::TwoStockFiniteG
            } else {
                Rule::ManyStockFiniteG
            };
            return Ok(verdict(
                DiversityStatus::NotDiverse,
                rule,
                constants,
                ev,
                Some(pre),
            ));
        }
        DivergenceStatus::Inconclusive => {
            return Ok(verdict(
                DiversityStatus::Inconclusive,
                Rule::Gap,
                constants,
                ev,
                Some(pre),
            ));
        }
        DivergenceStatus::Divergent => {}
    }

    for k in 1..=EPS_STEPS {
        let alpha = constants.a2 * (1.0 - 2f64.powi(-k));
        let v = constant_weight_integral(spec, alpha, x0, route)?;
        if v.status.is_divergent() {
            ev.push(evidence(&format!("exp((a2 - a2*2^-{k}) int g)"), &v));
            let rule = if two {
                Rule::TwoStockCorDiverse
            } else {
                Rule::ManyStockCorDiverse
            };
            return Ok(verdict(
                DiversityStatus::Diverse,
                rule,
                constants,
                ev,
                Some(pre),
            ));
        }
    }
    // a1 = a2 for two stocks.
    let v = constant_weight_integral(spec, constants.a1, x0, route)?;
    ev.push(evidence("exp(a1 int g)", &v));
    if v.status.is_convergent() {
        let rule = if two {
            Rule::TwoStockCorNotDiverse
        } else {
            Rule::ManyStockCorNotDiverse
        };
        return Ok(verdict(
            DiversityStatus::NotDiverse,
            rule,
            constants,
            ev,
            Some(pre),
        ));
    }
    Ok(verdict(
        DiversityStatus::Inconclusive,
        Rule::Gap,
        constants,
        ev,
        Some(pre),
    ))
}

/// Closed-form case analysis for power tails `p / (1 - delta - z)^q`, no
/// quadrature. For `n >= 3` the drift is assumed patched near zero.
pub fn golden_decision_table(n: usize, delta: f64, p: f64, q: f64) -> Result<DiversityVerdict> {
    let constants = CriterionConstants::new(n, delta)?;
    if !(p > 0.0 && q > 0.0 && p.is_finite() && q.is_finite()) {
        return Err(Error::Parameter(format!(
            "p and q must be positive, got p={p}, q={q}"
        )));
    }
    let t = thresholds(&constants);
    let status = if q < 1.0 {
        DiversityStatus::NotDiverse
    } else if q > 1.0 || at_least(p, t.diverse_from) {
        DiversityStatus::Diverse
    } else if n == 2 || !at_least(p, t.not_diverse_below) {
        DiversityStatus::NotDiverse
    } else {
        DiversityStatus::Inconclusive
    };
    let rule = if status == DiversityStatus::Inconclusive {
        Rule::Gap
    } else {
        Rule::Table
    };
    Ok(verdict(status, rule, constants, Vec::new(), None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CustomDrift;

    #[test]
    fn examples() {
        let v = classify_diversity(2, &DriftSpec::power_law(0.2, 0.16, 1.0).unwrap()).unwrap();
        assert_eq!(
            (v.status, v.rule),
            (DiversityStatus::Diverse, Rule::TwoStockIff)
        );

        let v = classify_diversity(2, &DriftSpec::power_law(0.2, 0.1, 0.5).unwrap()).unwrap();
        assert_eq!(v.status, DiversityStatus::NotDiverse);

        let spec = DriftSpec::patched_power_law(0.2, 0.12, 1.0, 0.5, 0.1).unwrap();
        let v = classify_diversity(5, &spec).unwrap();
        assert_eq!(
            (v.status, v.rule),
            (DiversityStatus::Inconclusive, Rule::Gap)
        );
        assert_eq!(v.evidence.len(), 2);
        assert!((v.thresholds.not_diverse_below - 0.1).abs() < 1e-12);
        assert!((v.thresholds.diverse_from - 0.16).abs() < 1e-12);
    }

    #[test]
    fn table_examples() {
        let s = |n, p| golden_decision_table(n, 0.2, p, 1.0).unwrap().status;
        assert_eq!(s(2, 0.25), DiversityStatus::Diverse);
        assert_eq!(s(5, 0.05), DiversityStatus::NotDiverse);
        assert_eq!(s(5, 0.16), DiversityStatus::Diverse);
        assert_eq!(s(5, 0.1), DiversityStatus::Inconclusive);
        assert!(golden_decision_table(2, 0.6, 0.1, 1.0).is_err());
        assert!(golden_decision_table(2, 0.2, 0.0, 1.0).is_err());
    }

    #[test]
    fn unpatched_drift_fails_precondition_for_many_stocks() {
        let v = classify_diversity(3, &DriftSpec::power_law(0.2, 0.5, 1.0).unwrap()).unwrap();
        assert_eq!(
            (v.status, v.rule),
            (DiversityStatus::Inconclusive, Rule::PreconditionFail)
        );
        // Two stocks do not need the condition at zero.
        let v = classify_diversity(2, &DriftSpec::power_law(0.2, 0.5, 1.0).unwrap()).unwrap();
        assert_eq!(v.status, DiversityStatus::Diverse);
    }

    #[test]
    fn non_admissible_custom_fails_precondition() {
        let spec = DriftSpec::custom(0.2, CustomDrift::new("zero", |_| 0.0)).unwrap();
        let v = classify_diversity(2, &spec).unwrap();
        assert_eq!(v.rule, Rule::PreconditionFail);
    }

    #[test]
    fn sufficient_conditions_abstain_at_boundaries() {
        let spec = DriftSpec::power_law(0.2, 0.16, 1.0).unwrap();
        let c = sufficient_condition_verdict(2, &spec, Route::Auto).unwrap();
        assert_eq!(c.status, DiversityStatus::Inconclusive);
        let spec = DriftSpec::power_law(0.2, 0.17, 1.0).unwrap();
        let c = sufficient_condition_verdict(2, &spec, Route::Auto).unwrap();
        assert_eq!(
            (c.status, c.rule),
            (DiversityStatus::Diverse, Rule::TwoStockCorDiverse)
        );
        let spec = DriftSpec::power_law(0.2, 0.15, 1.0).unwrap();
        let c = sufficient_condition_verdict(2, &spec, Route::Auto).unwrap();
        assert_eq!(
            (c.status, c.rule),
            (DiversityStatus::NotDiverse, Rule::TwoStockCorNotDiverse)
        );
        let spec = DriftSpec::patched_power_law(0.2, 0.3, 0.7, 0.5, 0.1).unwrap();
        let c = sufficient_condition_verdict(4, &spec, Route::Auto).unwrap();
        assert_eq!(
            (c.status, c.rule),
            (DiversityStatus::NotDiverse, Rule::ManyStockFiniteG)
        );
    }

    #[test]
    fn rule_names_serialize() {
        assert_eq!(
            serde_json::to_string(&Rule::ManyStockDiverse).unwrap(),
            "\"Thm2-ii\""
        );
        assert_eq!(Rule::Gap.as_str(), "Gap");
    }
}
