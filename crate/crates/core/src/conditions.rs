//! Outcome types shared by the analytic checks.

use serde::Serialize;

/// A quantity that is only meaningful when some structural precondition
/// holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Gated<T> {
    Value(T),
    NotApplicable(&'static str),
}

impl<T: Copy> Gated<T> {
    pub fn value(&self) -> Option<T> {
        match *self {
            Gated::Value(v) => Some(v),
            Gated::NotApplicable(_) => None,
        }
    }

    pub fn is_applicable(&self) -> bool {
        matches!(self, Gated::Value(_))
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Gated<U> {
        match self {
            Gated::Value(v) => Gated::Value(f(v)),
            Gated::NotApplicable(r) => Gated::NotApplicable(r),
        }
    }
}

/// Evaluation of an inequality `lhs > rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs` when applicable, NaN otherwise.
    pub margin: f64,
    pub applicable: bool,
    /// Gradient surrogate entering `rhs` (0 for constant coefficients).
    pub k_grad: f64,
    pub reason: Option<String>,
}

impl ConditionReport {
    pub fn new(lhs: f64, rhs: f64, k_grad: f64) -> Self {
        Self {
            lhs,
            rhs,
            margin: lhs - rhs,
            applicable: true,
            k_grad,
            reason: None,
        }
    }

    pub fn not_applicable(reason: impl Into<String>) -> Self {
        Self {
            lhs: f64::NAN,
            rhs: f64::NAN,
            margin: f64::NAN,
            applicable: false,
            k_grad: 0.0,
            reason: Some(reason.into()),
        }
    }

    /// Applicable and strictly positive margin.
    pub fn holds(&self) -> bool {
        self.applicable && self.margin > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_is_lhs_minus_rhs() {
        let r = ConditionReport::new(5.0, 3.0, 0.0);
        assert_eq!(r.margin, 2.0);
        assert!(r.holds());
        let n = ConditionReport::not_applicable("x");
        assert!(!n.holds() && n.margin.is_nan());
    }

    #[test]
    fn gated_accessors() {
        let g: Gated<f64> = Gated::Value(1.5);
        assert_eq!(g.map(|v| v * 2.0).value(), Some(3.0));
        assert!(!Gated::<f64>::NotApplicable("no").is_applicable());
    }
}
