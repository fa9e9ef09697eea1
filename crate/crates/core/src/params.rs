//! The constant schedule of the 2-means sampler.
//!
//! Every constant is a function of the accuracy `epsilon` (the failure budget
//! `gamma` is fixed at 1/3). Three constants are only constrained by
//! inequalities: `delta2`, `varsigma` and `delta1`. We take the largest
//! admissible values, which gives the smallest sample sizes.
//!
//! The exact schedule makes `M = d4 / epsilon` astronomically large
//! (`d4 > 3 * 10^5`), so desk-scale runs override `M` and friends. An
//! overridden set is never reported as faithful, and every consistency
//! condition it breaks is listed in [`ParameterSet::violations`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `gamma`: total failure probability budget.
pub const GAMMA: f64 = 1.0 / 3.0;
/// `delta = delta6`.
pub const DELTA6: f64 = 0.1;
pub const D1: f64 = DELTA6;
pub const D2: f64 = 4.0;
pub const ALPHA1: f64 = 5.0;

/// Relative slack when checking inequalities that are tight by construction.
const TIGHT_TOL: f64 = 1e-12;

/// Optional manual values. Anything left `None` follows the schedule, and
/// derived quantities are recomputed from the overridden ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub delta2: Option<f64>,
    pub varsigma: Option<f64>,
    pub delta1: Option<f64>,
    pub eta: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<u64>,
    #[serde(rename = "N_a")]
    pub n_a: Option<u64>,
    #[serde(rename = "N_b")]
    pub n_b: Option<u64>,
    #[serde(rename = "N_2")]
    pub n_2: Option<u64>,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        self.flags().is_empty()
    }

    /// Names of the overridden fields, in resolution order.
    pub fn flags(&self) -> Vec<String> {
        let named: [(&str, bool); 8] = [
            ("delta2", self.delta2.is_some()),
            ("eta", self.eta.is_some()),
            ("M", self.m.is_some()),
            ("varsigma", self.varsigma.is_some()),
            ("delta1", self.delta1.is_some()),
            ("N_a", self.n_a.is_some()),
            ("N_b", self.n_b.is_some()),
            ("N_2", self.n_2.is_some()),
        ];
        named.iter().filter(|(_, set)| *set).map(|(n, _)| n.to_string()).collect()
    }

    /// Desk-scale shorthand: override only `M`.
    pub fn with_m(m: u64) -> Self {
        Overrides { m: Some(m), ..Default::default() }
    }
}

/// Every constant of the schedule, resolved for one `epsilon`.
///
/// Counts (`M`, `N_a`, `N_b`, `N_2`) are integral but stored as `f64`: at the
/// accuracy thresholds the faithful `M` exceeds `u64::MAX`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub epsilon: f64,
    pub gamma: f64,
    /// `delta = delta6`.
    pub delta: f64,
    pub d1: f64,
    pub d2: f64,
    pub delta2: f64,
    pub d4: f64,
    pub gamma_star: f64,
    pub gamma_5b: f64,
    pub eta: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha5: f64,
    pub alpha6: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub varsigma: f64,
    pub delta1: f64,
    #[serde(rename = "N_a")]
    pub n_a: f64,
    #[serde(rename = "N_b")]
    pub n_b: f64,
    #[serde(rename = "N_2")]
    pub n_2: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub delta0: f64,
    pub override_flags: Vec<String>,
    /// Failed consistency conditions, empty when all hold.
    pub violations: Vec<String>,
    pub paper_faithful: bool,
}

/// Accuracy thresholds below which the failure analysis applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonThresholds {
    pub eps0: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub delta0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureTerm {
    pub name: String,
    pub value: f64,
}

/// Numeric values of the failure probabilities `gamma_1 .. gamma_5`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureBudget {
    pub terms: Vec<FailureTerm>,
    pub gamma_5a: f64,
    pub gamma_5b: f64,
    pub sum: f64,
    pub within_budget: bool,
}

impl FailureBudget {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

/// Ceiling that ignores float noise just above an integer.
fn ceil_count(x: f64) -> f64 {
    (x * (1.0 - TIGHT_TOL)).ceil().max(1.0)
}

fn le_tight(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + TIGHT_TOL * rhs.abs().max(1.0)
}

impl ParameterSet {
    /// Resolves the schedule for `epsilon` in `(0, 1)`.
    ///
    /// Overrides that break a structural requirement (non-positive values,
    /// `delta2 >= 1`, ...) are rejected. Overrides that merely break a
    /// consistency inequality are accepted and listed in `violations`.
    pub fn resolve(epsilon: f64, overrides: &Overrides) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::invalid(format!("epsilon = {epsilon} must lie in (0, 1)")));
        }
        for (name, v) in [("delta2", overrides.delta2), ("delta1", overrides.delta1), ("eta", overrides.eta)] {
            if let Some(v) = v {
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::invalid(format!("override {name} = {v} must lie in (0, 1)")));
                }
            }
        }
        if let Some(v) = overrides.varsigma {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("override varsigma = {v} must be positive")));
            }
        }
        for (name, v) in [("M", overrides.m), ("N_a", overrides.n_a), ("N_b", overrides.n_b), ("N_2", overrides.n_2)] {
            if v == Some(0) {
                return Err(Error::invalid(format!("override {name} must be a positive integer")));
            }
        }

        let gamma = GAMMA;
        let delta = DELTA6;
        let d1 = D1;
        let d2 = D2;
        // Largest delta2 with (1 + 2 delta2) d2 <= d2 + delta.
        let delta2 = overrides.delta2.unwrap_or((delta / (2.0 * d2)).min(0.5));
        let d4 = (10.0 + 18.0 * delta) / (delta2 * delta2) * (1.0 / gamma + (1.0 / gamma).ln());
        let gamma_star = 0.5 - delta;
        let gamma_5b = gamma / 12.0;
        let alpha6 = gamma_star * d4 / 12.0;
        let alpha5 = 4.0 / (1.0 - delta - 4.0 / alpha6);
        let alpha1 = ALPHA1;
        let alpha2 = 2.0 * alpha1 * alpha5 + delta;
        let eta = overrides.eta.unwrap_or(delta / 2.0);
        let m = match overrides.m {
            Some(m) => m as f64,
            None => ceil_count(d4 / epsilon),
        };
        // (1 + varsigma)(1 + 2 delta1) alpha2 <= alpha2 + delta / 2 has one
        // degree of freedom; split the slack evenly between the two factors.
        let slack = (1.0 + delta / (2.0 * alpha2)).sqrt();
        let varsigma = overrides.varsigma.unwrap_or((slack - 1.0).min(0.5));
        let delta1 = overrides.delta1.unwrap_or(((slack - 1.0) / 2.0).min(0.5));
        let n_a = overrides.n_a.map(|v| v as f64).unwrap_or_else(|| ceil_count(d2 * m));
        let n_b = overrides
            .n_b
            .map(|v| v as f64)
            .unwrap_or_else(|| ceil_count(m / ((1.0 - delta2) * epsilon.powf(1.0 + d1))));
        let n_2 = overrides
            .n_2
            .map(|v| v as f64)
            .unwrap_or_else(|| ceil_count(m * (1.0 + varsigma) * (alpha2 / (epsilon * epsilon)) / (1.0 - delta1)));

        let mut ps = ParameterSet {
            epsilon,
            gamma,
            delta,
            d1,
            d2,
            delta2,
            d4,
            gamma_star,
            gamma_5b,
            eta,
            alpha1,
            alpha2,
            alpha5,
            alpha6,
            m,
            varsigma,
            delta1,
            n_a,
            n_b,
            n_2,
            eps0: 0.0,
            eps1: 0.0,
            eps2: 0.0,
            delta0: 0.0,
            override_flags: overrides.flags(),
            violations: Vec::new(),
            paper_faithful: false,
        };
        let th = epsilon_thresholds(&ps);
        ps.eps0 = th.eps0;
        ps.eps1 = th.eps1;
        ps.eps2 = th.eps2;
        ps.delta0 = th.delta0;
        ps.violations = ps.check_conditions();
        ps.paper_faithful = ps.override_flags.is_empty() && ps.violations.is_empty();
        Ok(ps)
    }

    /// Like [`resolve`](Self::resolve), but any failed consistency condition
    /// is an error.
    pub fn resolve_strict(epsilon: f64, overrides: &Overrides) -> Result<Self> {
        let ps = Self::resolve(epsilon, overrides)?;
        if !ps.violations.is_empty() {
            return Err(Error::Validation(ps.violations.join("; ")));
        }
        Ok(ps)
    }

    fn check_conditions(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !le_tight((1.0 + 2.0 * self.delta2) * self.d2, self.d2 + self.delta) {
            out.push(format!(
                "(1 + 2 delta2) d2 <= d2 + delta fails: {} > {}",
                (1.0 + 2.0 * self.delta2) * self.d2,
                self.d2 + self.delta
            ));
        }
        let lhs20 = (1.0 + self.varsigma) * (1.0 + 2.0 * self.delta1) * self.alpha2;
        if !le_tight(lhs20, self.alpha2 + self.delta / 2.0) {
            out.push(format!(
                "(1 + varsigma)(1 + 2 delta1) alpha2 <= alpha2 + delta/2 fails: {lhs20} > {}",
                self.alpha2 + self.delta / 2.0
            ));
        }
        if self.alpha6 < 4.0 {
            out.push(format!("alpha6 >= 4 fails: alpha6 = {}", self.alpha6));
        }
        let sum = 4.0 / self.alpha6 + 4.0 / self.alpha5;
        if (sum - (1.0 - self.delta)).abs() > 1e-12 {
            out.push(format!("4/alpha6 + 4/alpha5 = 1 - delta6 fails: {sum}"));
        }
        let g1 = (-self.delta2 * self.delta2 * self.d2 * self.m / 4.0).exp();
        if g1 > self.gamma / 12.0 {
            out.push(format!("exp(-delta2^2 d2 M / 4) <= gamma/12 fails: {g1}"));
        }
        for (name, v) in [("delta2", self.delta2), ("varsigma", self.varsigma), ("delta1", self.delta1)] {
            if !(v > 0.0 && v <= 0.5) {
                out.push(format!("{name} in (0, 1/2] fails: {name} = {v}"));
            }
        }
        out
    }

    /// `alpha6` with `d4` replaced by the numeric chain `10 * 4 * 3` used when
    /// proving `alpha6 >= 4`; a lower bound on the real `alpha6`.
    pub fn alpha6_proof_shortcut(&self) -> f64 {
        self.gamma_star * (10.0 * 4.0 * 3.0) / 12.0
    }

    /// Largest peeling round count, `ceil(ln n / ln(1 + varsigma))`.
    pub fn iteration_bound(&self, n: usize) -> usize {
        if n <= 1 {
            return 0;
        }
        ((n as f64).ln() / self.varsigma.ln_1p()).ceil() as usize
    }
}

/// `eps0 = ((gamma/12) / d4)^(1/d1)`, `eps1 = delta6`,
/// `eps2 = delta1^2 d4 / (2 (1 - delta1) ln(12/gamma))`, and their minimum.
pub fn epsilon_thresholds(ps: &ParameterSet) -> EpsilonThresholds {
    let eps0 = (ps.gamma / 12.0 / ps.d4).powf(1.0 / ps.d1);
    let eps1 = ps.delta;
    let eps2 = ps.delta1 * ps.delta1 * ps.d4 / (2.0 * (1.0 - ps.delta1) * (12.0 / ps.gamma).ln());
    EpsilonThresholds { eps0, eps1, eps2, delta0: eps0.min(eps1).min(eps2) }
}

/// Evaluates `gamma_1 .. gamma_5` for a resolved set.
pub fn failure_budget(ps: &ParameterSet) -> FailureBudget {
    let m = ps.m;
    let g1 = (-ps.delta2 * ps.delta2 * ps.d2 * m / 4.0).exp();
    let g2 = (-(ps.delta2 * ps.delta2 / 2.0) * m / (1.0 - ps.delta2)).exp();
    let g3 = ps.epsilon.powf(ps.d1) * ps.d4;
    let g4 = ps.gamma / 12.0;
    let g5a = (-ps.delta1 * ps.delta1 * (m / (1.0 - ps.delta1)) / 2.0).exp();
    let g5 = g5a + ps.gamma_5b;
    let values = [g1, g2, g3, g4, g5];
    let sum = values.iter().sum::<f64>();
    FailureBudget {
        terms: values
            .iter()
            .enumerate()
            .map(|(i, &value)| FailureTerm { name: format!("gamma_{}", i + 1), value })
            .collect(),
        gamma_5a: g5a,
        gamma_5b: ps.gamma_5b,
        sum,
        within_budget: sum <= ps.gamma,
    }
}
