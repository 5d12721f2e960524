//! Per-family residual bookkeeping.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::scalar::{Scalar, C};

/// Max residual of one identity family over all its index combinations.
///
/// `residual` is `|Σ terms| / max(1, max |term|)`, so it is absolute for
/// small quantities and relative for large ones. `exact_zero` records whether
/// every evaluated sum was exactly zero, which is the pass test in exact mode.
#[derive(Clone, Debug, PartialEq)]
pub struct Family {
    pub name: String,
    pub residual: f64,
    pub exact_zero: bool,
    pub exact: bool,
    pub evaluations: usize,
}

impl Family {
    pub fn passes(&self, tol: f64) -> bool {
        if self.exact {
            self.exact_zero
        } else {
            self.residual <= tol
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub families: Vec<Family>,
}

impl Report {
    pub fn new() -> Self {
        Report { families: Vec::new() }
    }

    fn slot(&mut self, name: &str, exact: bool) -> &mut Family {
        if let Some(i) = self.families.iter().position(|f| f.name == name) {
            return &mut self.families[i];
        }
        self.families.push(Family { name: name.to_string(), residual: 0.0, exact_zero: true, exact, evaluations: 0 });
        self.families.last_mut().unwrap()
    }

    /// Records that the signed `terms` sum to zero.
    pub fn identity<S: Scalar>(&mut self, name: &str, terms: &[C<S>]) {
        let mut sum = C::<S>::zero();
        let mut scale = 1.0f64;
        for t in terms {
            sum.add_assign(t);
            scale = scale.max(t.abs_f64());
        }
        self.record(name, &sum, scale);
    }

    /// Records that `value` vanishes.
    pub fn zero<S: Scalar>(&mut self, name: &str, value: &C<S>) {
        self.record(name, value, 1.0);
    }

    /// Records that `a` equals `b`.
    pub fn equal<S: Scalar>(&mut self, name: &str, a: &C<S>, b: &C<S>) {
        self.identity(name, &[a.clone(), b.neg()]);
    }

    pub fn record<S: Scalar>(&mut self, name: &str, diff: &C<S>, scale: f64) {
        let r = diff.abs_f64() / scale.max(1.0);
        let f = self.slot(name, S::EXACT);
        f.evaluations += 1;
        f.exact_zero &= diff.is_zero();
        if r > f.residual || r.is_nan() {
            f.residual = r;
        }
    }

    /// Records a residual computed elsewhere.
    pub fn raw(&mut self, name: &str, residual: f64, exact: bool, exact_zero: bool) {
        let f = self.slot(name, exact);
        f.evaluations += 1;
        f.exact_zero &= exact_zero;
        if residual > f.residual || residual.is_nan() {
            f.residual = residual;
        }
    }

    pub fn merge(&mut self, other: &Report) {
        for g in &other.families {
            let f = self.slot(&g.name, g.exact);
            f.evaluations += g.evaluations;
            f.exact_zero &= g.exact_zero;
            if g.residual > f.residual || g.residual.is_nan() {
                f.residual = g.residual;
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&Family> {
        self.families.iter().find(|f| f.name == name)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.families.iter().all(|f| f.passes(tol))
    }

    pub fn max_residual(&self) -> f64 {
        self.families.iter().map(|f| f.residual).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;

    #[test]
    fn identity_residual_is_relative_above_one() {
        let mut r = Report::new();
        r.identity("a", &[C::<f64>::real(1000.0), C::real(-1000.001)]);
        let f = r.get("a").unwrap();
        assert!((f.residual - 1e-6).abs() < 1e-9);
        assert!(!f.exact_zero);
        assert!(f.passes(1e-5));
    }

    #[test]
    fn exact_families_pass_only_on_zero() {
        let mut r = Report::new();
        r.zero("z", &C::<Exact>::zero());
        assert!(r.passes(0.0));
        r.zero("z", &C::<Exact>::real(Exact::from_ratio(1, 1_000_000_000_000)));
        assert!(!r.passes(1.0));
    }
}
