//! Run configuration: defaults, TOML files, validation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crlab_core::calculus::{TermOptions, FORMULA_TERMS};
use crlab_core::connection::GammaFault;
use crlab_core::geometry::{ContactModel, Fault, SmoothClass};
use crlab_core::Expr;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Heisenberg,
    Sphere,
    PerturbedHeisenberg,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Heisenberg => "heisenberg",
            ModelKind::Sphere => "sphere",
            ModelKind::PerturbedHeisenberg => "perturbed_heisenberg",
        }
    }
}

impl FromStr for ModelKind {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        [ModelKind::Heisenberg, ModelKind::Sphere, ModelKind::PerturbedHeisenberg]
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| ConfigError(format!("unknown model `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarMode {
    Exact,
    Float,
}

impl ScalarMode {
    pub fn name(self) -> &'static str {
        match self {
            ScalarMode::Exact => "exact",
            ScalarMode::Float => "float",
        }
    }
}

impl FromStr for ScalarMode {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.trim() {
            "exact" => Ok(ScalarMode::Exact),
            "float" => Ok(ScalarMode::Float),
            _ => Err(ConfigError(format!("unknown mode `{s}` (expected exact or float)"))),
        }
    }
}

/// Suites in dependency order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteId {
    Axioms,
    Structure,
    Commutation,
    Bochner,
    Integrals,
    Spectral,
}

impl SuiteId {
    pub const ALL: [SuiteId; 6] =
        [SuiteId::Axioms, SuiteId::Structure, SuiteId::Commutation, SuiteId::Bochner, SuiteId::Integrals, SuiteId::Spectral];

    pub fn name(self) -> &'static str {
        match self {
            SuiteId::Axioms => "axioms",
            SuiteId::Structure => "structure",
            SuiteId::Commutation => "commutation",
            SuiteId::Bochner => "bochner",
            SuiteId::Integrals => "integrals",
            SuiteId::Spectral => "spectral",
        }
    }
}

impl FromStr for SuiteId {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        SuiteId::ALL.into_iter().find(|x| x.name() == s.trim()).ok_or_else(|| ConfigError(format!("unknown suite `{s}`")))
    }
}

/// Named term sets that can be switched off.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    DropQTerms,
    DropTorsionTerms,
}

impl FromStr for Ablation {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.trim() {
            "drop-q-terms" => Ok(Ablation::DropQTerms),
            "drop-torsion-terms" => Ok(Ablation::DropTorsionTerms),
            _ => Err(ConfigError(format!("unknown ablation `{s}` (expected drop-q-terms or drop-torsion-terms)"))),
        }
    }
}

/// A deliberate corruption of the instrument's inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaultSpec {
    /// Adds `delta` to the real part of `Γ_jk^l`.
    Connection { j: usize, k: usize, l: usize, delta: f64 },
    /// Adds `delta` to the chart metric entry `(i, j)` and its mirror.
    Metric { i: usize, j: usize, delta: f64 },
    /// Multiplies a named formula term by `1 + delta`.
    Term { id: String, delta: f64 },
}

impl FromStr for FaultSpec {
    type Err = ConfigError;
    /// `connection:j,k,l:delta`, `metric:i,j:delta` or `term:id:delta`.
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let bad = || ConfigError(format!("cannot parse fault `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let delta: f64 = parts[2].parse().map_err(|_| bad())?;
        let idx = || parts[1].split(',').map(|x| x.trim().parse::<usize>().map_err(|_| bad())).collect::<Result<Vec<_>, _>>();
        match parts[0] {
            "connection" => match idx()?[..] {
                [j, k, l] => Ok(FaultSpec::Connection { j, k, l, delta }),
                _ => Err(bad()),
            },
            "metric" => match idx()?[..] {
                [i, j] => Ok(FaultSpec::Metric { i, j, delta }),
                _ => Err(bad()),
            },
            "term" => Ok(FaultSpec::Term { id: parts[1].to_string(), delta }),
            _ => Err(bad()),
        }
    }
}

/// One monomial `coef · Π xᵢ^{eᵢ}` of the perturbation profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileTerm {
    pub coef: String,
    pub exponents: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    pub n: usize,
    /// Rational perturbation size, e.g. `"1/10"`.
    pub eps: String,
    /// Perturbation profile over chart coordinates; empty means `x¹ + t`.
    pub profile: Vec<ProfileTerm>,
    pub mode: ScalarMode,
    /// Jet order of scalar fields; frames use one less.
    pub jet_order: usize,
    /// Gauss–Hermite nodes per axis.
    pub quad_order: usize,
    /// Nodes on the axes the perturbation profile depends on.
    pub quad_profile_order: usize,
    /// Galerkin basis degree for the spectral suite.
    pub degree: usize,
    /// Sample points for the axiom and structure suites.
    pub points: usize,
    /// Sample points for the commutation and Bochner suites.
    pub field_points: usize,
    /// Random polynomial fields per point in the commutation and Bochner suites.
    pub polys: usize,
    /// Trial pairs for the integral suite.
    pub trials: usize,
    /// Sample points for κ.
    pub kappa_points: usize,
    pub seed: u64,
    pub tol_point: f64,
    pub tol_int: f64,
    pub tol_spec: f64,
    pub tol_eq: f64,
    /// Allowed change of `λ₁` between basis degree 1 and `degree`.
    pub tol_stability: f64,
    pub suites: Vec<SuiteId>,
    pub ablate: Vec<Ablation>,
    pub fault: Option<FaultSpec>,
    /// Worker threads for quadrature; 0 uses the available parallelism.
    pub threads: usize,
    /// Adds wall-clock times to the records, which breaks byte-identical output.
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelKind::Heisenberg,
            n: 2,
            eps: "1/10".into(),
            profile: Vec::new(),
            mode: ScalarMode::Float,
            jet_order: 3,
            quad_order: 6,
            quad_profile_order: 8,
            degree: 3,
            points: 20,
            field_points: 10,
            polys: 10,
            trials: 5,
            kappa_points: 200,
            seed: 1,
            tol_point: 1e-8,
            tol_int: 1e-8,
            tol_spec: 1e-6,
            tol_eq: 1e-6,
            tol_stability: 1e-9,
            suites: vec![SuiteId::Axioms, SuiteId::Structure, SuiteId::Commutation, SuiteId::Bochner],
            ablate: Vec::new(),
            fault: None,
            threads: 0,
            timing: false,
        }
    }
}

/// `p/q`, integers and plain decimals are exact; anything else goes through `f64`.
pub fn parse_rational(s: &str) -> Result<BigRational, ConfigError> {
    let s = s.trim();
    if let Ok(r) = BigRational::from_str(s) {
        return Ok(r);
    }
    if let Some((int, frac)) = s.split_once('.') {
        let digits = format!("{int}{frac}");
        if !frac.is_empty() && frac.bytes().all(|b| b.is_ascii_digit()) {
            if let Ok(num) = digits.parse::<num_bigint::BigInt>() {
                let den = num_bigint::BigInt::from(10u32).pow(frac.len() as u32);
                return Ok(BigRational::new(num, den));
            }
        }
    }
    let v: f64 = s.parse().map_err(|_| ConfigError(format!("cannot parse `{s}` as a rational")))?;
    BigRational::from_float(v).ok_or_else(|| ConfigError(format!("`{s}` is not finite")))
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let s = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn frame_order(&self) -> usize {
        self.jet_order.saturating_sub(1)
    }

    /// Requested suites, deduplicated, in dependency order.
    pub fn ordered_suites(&self) -> Vec<SuiteId> {
        let mut s = self.suites.clone();
        s.sort();
        s.dedup();
        s
    }

    pub fn profile_expr(&self) -> Result<Expr, ConfigError> {
        if self.profile.is_empty() {
            return Ok(ContactModel::default_profile(self.n));
        }
        let dim = 2 * self.n + 1;
        let mut terms = Vec::new();
        for t in &self.profile {
            if t.exponents.len() != dim {
                return Err(ConfigError(format!("profile exponents need {dim} entries")));
            }
            terms.push((parse_rational(&t.coef)?, t.exponents.clone()));
        }
        Ok(Expr::Poly(terms))
    }

    /// The model with any metric fault applied.
    pub fn build_model(&self) -> Result<ContactModel, ConfigError> {
        let err = |e: crlab_core::Error| ConfigError(format!("model: {e}"));
        let m = match self.model {
            ModelKind::Heisenberg => ContactModel::heisenberg(self.n).map_err(err)?,
            ModelKind::Sphere => ContactModel::sphere(self.n).map_err(err)?,
            ModelKind::PerturbedHeisenberg => ContactModel::perturbed_heisenberg(
                self.n,
                parse_rational(&self.eps)?,
                self.profile_expr()?,
                ContactModel::default_shear(self.n),
            )
            .map_err(err)?,
        };
        Ok(match &self.fault {
            Some(FaultSpec::Metric { i, j, delta }) => m.with_fault(Fault::MetricEntry { i: *i, j: *j, delta: *delta }),
            _ => m,
        })
    }

    pub fn gamma_fault(&self) -> Result<Option<GammaFault>, ConfigError> {
        match &self.fault {
            Some(FaultSpec::Connection { j, k, l, delta }) => {
                Ok(Some(GammaFault { j: *j, k: *k, l: *l, delta: parse_rational(&delta.to_string())? }))
            }
            _ => Ok(None),
        }
    }

    pub fn term_options(&self) -> Result<TermOptions, ConfigError> {
        let mut o = TermOptions {
            drop_tanno: self.ablate.contains(&Ablation::DropQTerms),
            drop_torsion: self.ablate.contains(&Ablation::DropTorsionTerms),
            scale: Vec::new(),
        };
        if let Some(FaultSpec::Term { id, delta }) = &self.fault {
            let factor = parse_rational(&(1.0 + delta).to_string())?;
            o.scale.push((id.clone(), factor));
        }
        Ok(o)
    }

    /// Checks every invariant that can be checked before running.
    pub fn validate(&self) -> Result<ContactModel, ConfigError> {
        if self.suites.is_empty() {
            return Err(ConfigError("no suites selected".into()));
        }
        if self.n == 0 {
            return Err(ConfigError("n must be positive".into()));
        }
        let model = self.build_model()?;
        if self.mode == ScalarMode::Exact && model.smooth_class() != SmoothClass::Polynomial {
            return Err(ConfigError(format!("exact mode needs a polynomial model; {} is not", self.model.name())));
        }
        if self.jet_order < crlab_core::calculus::MIN_FIELD_ORDER {
            return Err(ConfigError(format!("jet order must be at least {}", crlab_core::calculus::MIN_FIELD_ORDER)));
        }
        let s = self.ordered_suites();
        if s.contains(&SuiteId::Spectral) && (self.model != ModelKind::Sphere || self.n < 2) {
            return Err(ConfigError("the spectral suite needs the sphere model with n >= 2".into()));
        }
        if s.contains(&SuiteId::Spectral) && self.degree == 0 {
            return Err(ConfigError("spectral degree must be positive".into()));
        }
        if s.contains(&SuiteId::Integrals) && (self.quad_order == 0 || self.trials == 0) {
            return Err(ConfigError("integrals need a positive quadrature order and trial count".into()));
        }
        for t in [self.tol_point, self.tol_int, self.tol_spec, self.tol_eq, self.tol_stability] {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(ConfigError("tolerances must be finite and nonnegative".into()));
            }
        }
        if let Some(FaultSpec::Term { id, .. }) = &self.fault {
            if !FORMULA_TERMS.iter().any(|(n, _)| n == id) {
                return Err(ConfigError(format!("unknown formula term `{id}`")));
            }
        }
        if let Some(FaultSpec::Metric { i, j, .. }) = &self.fault {
            if *i >= model.dim() || *j >= model.dim() {
                return Err(ConfigError("metric fault index out of range".into()));
            }
        }
        if let Some(FaultSpec::Connection { j, k, l, .. }) = &self.fault {
            if [j, k, l].iter().any(|&&x| x >= model.dim()) {
                return Err(ConfigError("connection fault index out of range".into()));
            }
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig { model: ModelKind::PerturbedHeisenberg, mode: ScalarMode::Exact, ..Default::default() };
        c.fault = Some(FaultSpec::Metric { i: 0, j: 1, delta: 1e-3 });
        c.ablate = vec![Ablation::DropQTerms];
        let back = RunConfig::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::from_toml_str("model = \"sphere\"\nsuites = [\"spectral\"]\n").unwrap();
        assert_eq!(c.model, ModelKind::Sphere);
        assert_eq!(c.quad_order, RunConfig::default().quad_order);
        assert!(RunConfig::from_toml_str("modle = \"sphere\"").is_err());
    }

    #[test]
    fn invariants_are_enforced() {
        let base = RunConfig::default();
        assert!(base.validate().is_ok());
        assert!(RunConfig { suites: vec![], ..base.clone() }.validate().is_err());
        assert!(RunConfig { model: ModelKind::Sphere, mode: ScalarMode::Exact, ..base.clone() }.validate().is_err());
        assert!(RunConfig { suites: vec![SuiteId::Spectral], ..base.clone() }.validate().is_err());
        assert!(RunConfig { model: ModelKind::Sphere, n: 1, suites: vec![SuiteId::Spectral], ..base.clone() }.validate().is_err());
        assert!(RunConfig { model: ModelKind::Sphere, suites: vec![SuiteId::Spectral], ..base.clone() }.validate().is_ok());
        assert!(RunConfig { jet_order: 2, ..base.clone() }.validate().is_err());
        let bad_term = RunConfig { fault: Some(FaultSpec::Term { id: "nope".into(), delta: 1e-3 }), ..base };
        assert!(bad_term.validate().is_err());
    }

    #[test]
    fn parsers() {
        assert_eq!(parse_rational("1/10").unwrap(), BigRational::new(1.into(), 10.into()));
        assert_eq!(parse_rational("0.5").unwrap(), BigRational::new(1.into(), 2.into()));
        assert_eq!(parse_rational("-0.001").unwrap(), BigRational::new((-1).into(), 1000.into()));
        assert_eq!(parse_rational("1e-3").unwrap(), BigRational::from_float(1e-3).unwrap());
        assert_eq!("connection:1,2,3:0.001".parse::<FaultSpec>().unwrap(), FaultSpec::Connection { j: 1, k: 2, l: 3, delta: 0.001 });
        assert_eq!("term:bochner/ricci:1e-3".parse::<FaultSpec>().unwrap(), FaultSpec::Term { id: "bochner/ricci".into(), delta: 1e-3 });
        assert!("metric:1:0.1".parse::<FaultSpec>().is_err());
        assert_eq!("integrals".parse::<SuiteId>().unwrap(), SuiteId::Integrals);
        let mut v = vec![SuiteId::Spectral, SuiteId::Axioms, SuiteId::Bochner, SuiteId::Axioms];
        v.sort();
        v.dedup();
        assert_eq!(v, vec![SuiteId::Axioms, SuiteId::Bochner, SuiteId::Spectral]);
    }
}
