//! Suite drivers: sampling, evaluation, and records.

use std::time::Instant;

use crlab_core::calculus::{check_bochner, check_commutations, field_table, ScalarField, TermOptions};
use crlab_core::connection::{
    check_levi_civita, check_structure_identities, geometry_tables, levi_civita, ConnectionOptions, GammaFault, Tables,
};
use crlab_core::geometry::{build_frame, check_frame, verify_contact_axioms, ContactModel, Frame};
use crlab_core::global::{
    accumulate, check_volume_form, integral_nodes, lambda1, lichnerowicz_report, IntegralJob, IntegralSuite, IntegralSums,
    QuadratureSpec, SpectralStatus, BLOCK,
};
use crlab_core::{Error, Exact, Layout, Report, Scalar};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ModelKind, RunConfig, ScalarMode, SuiteId};
use crate::record::{Context, ReportRecord};
use crate::sampling;

/// Everything one run produced.
#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub records: Vec<ReportRecord>,
    pub spectral: Option<SpectralSummary>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        !self.records.iter().any(ReportRecord::is_violation)
    }

    /// 0 when nothing failed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub model: String,
    pub n: usize,
    pub degree: usize,
    pub lambda1: Option<f64>,
    pub lambda1_degree1: Option<f64>,
    pub kappa: f64,
    pub kappa_spread: f64,
    pub bound: f64,
    pub ratio: Option<f64>,
    pub samples: usize,
    pub tol_spec: f64,
    pub tol_eq: f64,
    pub equality: bool,
    pub status: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

/// Runs the configured suites in dependency order.
pub fn run(cfg: &RunConfig) -> Result<RunOutput, ConfigError> {
    let model = cfg.validate()?;
    let gamma_fault = cfg.gamma_fault()?;
    let opts = cfg.term_options()?;
    let cx = Context { model: cfg.model.name().into(), n: cfg.n, mode: cfg.mode.name().into() };
    let suites = cfg.ordered_suites();
    let has = |s| suites.contains(&s);
    let env = Env { cfg, model: &model, cx: &cx, gamma_fault: gamma_fault.as_ref(), opts: &opts };
    let mut out = RunOutput::default();

    if has(SuiteId::Axioms) || has(SuiteId::Structure) {
        let (a, s) = match cfg.mode {
            ScalarMode::Exact => env.point_suites::<Exact>(has(SuiteId::Axioms), has(SuiteId::Structure)),
            ScalarMode::Float => env.point_suites::<f64>(has(SuiteId::Axioms), has(SuiteId::Structure)),
        };
        out.records.extend(a);
        out.records.extend(s);
    }
    if has(SuiteId::Commutation) || has(SuiteId::Bochner) {
        let (c, b) = match cfg.mode {
            ScalarMode::Exact => env.field_suites::<Exact>(has(SuiteId::Commutation), has(SuiteId::Bochner)),
            ScalarMode::Float => env.field_suites::<f64>(has(SuiteId::Commutation), has(SuiteId::Bochner)),
        };
        out.records.extend(c);
        out.records.extend(b);
    }
    if has(SuiteId::Integrals) {
        out.records.extend(env.integrals());
    }
    if has(SuiteId::Spectral) {
        let (recs, summary) = env.spectral();
        out.records.extend(recs);
        out.spectral = summary;
    }
    Ok(out)
}

struct Env<'a> {
    cfg: &'a RunConfig,
    model: &'a ContactModel,
    cx: &'a Context,
    gamma_fault: Option<&'a GammaFault>,
    opts: &'a TermOptions,
}

fn point_strings(p: &[BigRational]) -> Vec<String> {
    p.iter().map(|x| x.to_string()).collect()
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

impl Env<'_> {
    fn point_tol<S: Scalar>(&self) -> f64 {
        if S::EXACT {
            0.0
        } else {
            self.cfg.tol_point
        }
    }

    fn geometry<S: Scalar>(&self, p: &[S]) -> Result<(Frame<S>, Tables<S>), Error> {
        let order = self.cfg.frame_order();
        let lay = Layout::new(self.model.dim(), order + 2);
        let fr = build_frame(self.model, &lay, p, order, None)?;
        let t = geometry_tables(&fr, &ConnectionOptions { tol: self.cfg.tol_point, gamma_fault: self.gamma_fault.cloned() })?;
        Ok((fr, t))
    }

    /// Records for a report, or one failing record naming the error.
    fn emit(&self, suite: SuiteId, res: Result<Report, Error>, tol: f64, at: (Option<Vec<String>>, Option<usize>), wall: Option<f64>) -> Vec<ReportRecord> {
        let mut recs = match res {
            Ok(rep) => rep.families.iter().map(|f| self.cx.family(suite.name(), f, tol)).collect(),
            Err(e) => vec![self.error_record(suite, &e, tol)],
        };
        for r in &mut recs {
            r.point = at.0.clone();
            r.trial = at.1;
            r.wall_ms = wall;
        }
        recs
    }

    fn error_record(&self, suite: SuiteId, e: &Error, tol: f64) -> ReportRecord {
        let (family, residual) = match e {
            Error::AxiomCheck { family, residual } => (family.clone(), *residual),
            _ => ("evaluation".to_string(), f64::MAX),
        };
        let mut r = self.cx.record(suite.name(), &family, residual, tol, false);
        r.exact_zero = false;
        r.note = e.to_string();
        r
    }

    fn wall(&self, t: Instant) -> Option<f64> {
        self.cfg.timing.then(|| elapsed_ms(t))
    }

    fn point_suites<S: Scalar>(&self, axioms: bool, structure: bool) -> (Vec<ReportRecord>, Vec<ReportRecord>) {
        let mut rng = sampling::rng(self.cfg.seed, SuiteId::Axioms);
        let pts = sampling::rational_points(&mut rng, self.cfg.model, self.model.dim(), self.cfg.points);
        let tol = self.point_tol::<S>();
        let (mut ra, mut rs) = (Vec::new(), Vec::new());
        for (i, p) in pts.iter().enumerate() {
            let start = Instant::now();
            let ps: Vec<S> = p.iter().map(S::from_rational).collect();
            let geo = self.geometry(&ps);
            let at = (Some(point_strings(p)), Some(i));
            let a = axioms.then(|| {
                let mut rep = verify_contact_axioms(self.model, &ps)?;
                let (fr, _) = geo.as_ref().map_err(Clone::clone)?;
                rep.merge(&check_frame(fr));
                Ok(rep)
            });
            let s = structure.then(|| {
                let (fr, t) = geo.as_ref().map_err(Clone::clone)?;
                let mut rep = check_structure_identities(fr, t)?;
                rep.merge(&check_volume_form(fr)?);
                rep.merge(&check_levi_civita(fr, &levi_civita(fr)?));
                Ok(rep)
            });
            let wall = self.wall(start);
            if let Some(a) = a {
                ra.extend(self.emit(SuiteId::Axioms, a, tol, at.clone(), wall));
            }
            if let Some(s) = s {
                rs.extend(self.emit(SuiteId::Structure, s, tol, at, wall));
            }
        }
        (ra, rs)
    }

    fn field_suites<S: Scalar>(&self, commutation: bool, bochner: bool) -> (Vec<ReportRecord>, Vec<ReportRecord>) {
        let mut rng = sampling::rng(self.cfg.seed, SuiteId::Commutation);
        let pts = sampling::rational_points(&mut rng, self.cfg.model, self.model.dim(), self.cfg.field_points);
        let fields: Vec<ScalarField> =
            (0..self.cfg.polys).map(|_| sampling::polynomial_field(&mut rng, self.model.ambient_dim(), 3)).collect();
        let tol = self.point_tol::<S>();
        let (mut rc, mut rb) = (Vec::new(), Vec::new());
        for (i, p) in pts.iter().enumerate() {
            let start = Instant::now();
            let ps: Vec<S> = p.iter().map(S::from_rational).collect();
            let geo = self.geometry(&ps);
            for (j, u) in fields.iter().enumerate() {
                let at = (Some(point_strings(p)), Some(i * fields.len() + j));
                let ct = geo.as_ref().map_err(Clone::clone).and_then(|(fr, t)| field_table(u, self.model, fr, t));
                let c = commutation.then(|| {
                    let (fr, t) = geo.as_ref().map_err(Clone::clone)?;
                    check_commutations(ct.as_ref().map_err(Clone::clone)?, fr, t, self.opts)
                });
                let b = bochner.then(|| {
                    let (fr, t) = geo.as_ref().map_err(Clone::clone)?;
                    check_bochner(ct.as_ref().map_err(Clone::clone)?, fr, t, self.opts)
                });
                let wall = self.wall(start);
                if let Some(c) = c {
                    rc.extend(self.emit(SuiteId::Commutation, c, tol, at.clone(), wall));
                }
                if let Some(b) = b {
                    rb.extend(self.emit(SuiteId::Bochner, b, tol, at, wall));
                }
            }
        }
        (rc, rb)
    }

    fn threads(&self) -> usize {
        match self.cfg.threads {
            0 => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            t => t,
        }
    }

    /// Always in floating point: quadrature is inexact anyway.
    fn integrals(&self) -> Vec<ReportRecord> {
        let suite = SuiteId::Integrals;
        if self.cfg.model == ModelKind::Sphere {
            return vec![self.cx.not_applicable(suite.name(), "integral identities need a Heisenberg-type model")];
        }
        let start = Instant::now();
        let mut rng = sampling::rng(self.cfg.seed, suite);
        let trials = sampling::gaussian_trials(&mut rng, self.model.dim(), self.cfg.trials);
        let which: Vec<IntegralSuite> = if self.cfg.n >= 2 {
            vec![IntegralSuite::AdjointGreen, IntegralSuite::Identities]
        } else {
            vec![IntegralSuite::AdjointGreen]
        };
        let spec = QuadratureSpec::for_model(self.model, self.cfg.quad_order, self.cfg.quad_profile_order);
        let job = IntegralJob { model: self.model, trials: &trials, suites: &which, opts: self.opts, tol: self.cfg.tol_point };
        let sums = integral_nodes(self.model, &spec, &which).and_then(|nodes| parallel_sums(&job, &nodes, self.threads()));
        let tol = self.cfg.tol_int;
        match sums {
            Err(e) => vec![self.error_record(suite, &e, tol)],
            Ok(s) => {
                let wall = self.wall(start);
                s.trial_reports().iter().enumerate().flat_map(|(i, rep)| self.emit(suite, Ok(rep.clone()), tol, (None, Some(i)), wall)).collect()
            }
        }
    }

    fn spectral(&self) -> (Vec<ReportRecord>, Option<SpectralSummary>) {
        let suite = SuiteId::Spectral.name();
        let cfg = self.cfg;
        let start = Instant::now();
        let mut rng = sampling::rng(cfg.seed, SuiteId::Spectral);
        let pts = sampling::float_points(&mut rng, self.model.dim(), cfg.kappa_points, 1.5);
        let rep = match lichnerowicz_report(self.model, cfg.degree, &pts, cfg.tol_spec, cfg.tol_eq, cfg.tol_point) {
            Ok(r) => r,
            Err(e) => return (vec![self.error_record(SuiteId::Spectral, &e, cfg.tol_spec)], None),
        };
        let base = if cfg.degree == 1 { rep.lambda1.ok_or(Error::Singular) } else { lambda1(self.model, 1, cfg.tol_point) };
        let wall = self.wall(start);
        let mut recs = Vec::new();
        let k_ok = rep.kappa > 0.0 && rep.kappa_spread <= cfg.tol_point;
        let mut k = self.cx.record(suite, "kappa-constant", rep.kappa_spread, cfg.tol_point, k_ok);
        k.note = format!("kappa = {}", rep.kappa);
        recs.push(k);
        match (rep.status, rep.ratio, rep.lambda1) {
            (SpectralStatus::NotApplicable, _, _) | (_, None, _) | (_, _, None) => {
                let mut r = self.cx.not_applicable(suite, &rep.note);
                r.family = "lichnerowicz-bound".into();
                recs.push(r);
            }
            (status, Some(ratio), Some(l)) => {
                let mut r = self.cx.record(suite, "lichnerowicz-bound", (1.0 - ratio).max(0.0), cfg.tol_spec, status == SpectralStatus::Pass);
                r.note = format!("lambda1 = {l}, bound = {}, ratio = {ratio}", rep.bound);
                recs.push(r);
                recs.push(self.cx.record(suite, "lichnerowicz-equality", (ratio - 1.0).abs(), cfg.tol_eq, rep.equality));
                let rec = match &base {
                    Ok(b) => self.cx.record(suite, "lambda1-degree-stability", (l - b).abs(), cfg.tol_stability, (l - b).abs() <= cfg.tol_stability),
                    Err(e) => self.error_record(SuiteId::Spectral, e, cfg.tol_stability),
                };
                recs.push(rec);
            }
        }
        for r in &mut recs {
            r.wall_ms = wall;
            r.exact_zero = false;
        }
        let summary = SpectralSummary {
            model: cfg.model.name().into(),
            n: cfg.n,
            degree: cfg.degree,
            lambda1: rep.lambda1,
            lambda1_degree1: base.ok(),
            kappa: rep.kappa,
            kappa_spread: rep.kappa_spread,
            bound: rep.bound,
            ratio: rep.ratio,
            samples: rep.samples,
            tol_spec: cfg.tol_spec,
            tol_eq: cfg.tol_eq,
            equality: rep.equality,
            status: match rep.status {
                SpectralStatus::Pass => "PASS",
                SpectralStatus::Fail => "FAIL",
                SpectralStatus::NotApplicable => "NOT-APPLICABLE",
            }
            .into(),
            note: rep.note.clone(),
        };
        (recs, Some(summary))
    }
}

/// Block sums on `threads` workers, reduced pairwise in block order, so the
/// result does not depend on the thread count.
pub fn parallel_sums(job: &IntegralJob<'_>, nodes: &[(Vec<f64>, f64)], threads: usize) -> Result<IntegralSums, Error> {
    let blocks: Vec<&[(Vec<f64>, f64)]> = nodes.chunks(BLOCK).collect();
    let threads = threads.clamp(1, blocks.len().max(1));
    let mut parts: Vec<Option<Result<IntegralSums, Error>>> = vec![None; blocks.len()];
    if threads == 1 {
        for (slot, b) in parts.iter_mut().zip(&blocks) {
            *slot = Some(accumulate(job, b));
        }
    } else {
        let done: Vec<Vec<(usize, Result<IntegralSums, Error>)>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|w| {
                    let blocks = &blocks;
                    s.spawn(move || (w..blocks.len()).step_by(threads).map(|i| (i, accumulate(job, blocks[i]))).collect::<Vec<_>>())
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("quadrature worker panicked")).collect()
        });
        for (i, r) in done.into_iter().flatten() {
            parts[i] = Some(r);
        }
    }
    let parts = parts.into_iter().map(|p| p.expect("every block is assigned")).collect::<Result<Vec<_>, _>>()?;
    Ok(IntegralSums::pairwise(parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Ablation, FaultSpec};
    use crate::record::Status;

    fn small(model: ModelKind, mode: ScalarMode) -> RunConfig {
        RunConfig { model, mode, points: 2, field_points: 1, polys: 2, ..Default::default() }
    }

    #[test]
    fn exact_heisenberg_passes_everything() {
        let out = run(&small(ModelKind::Heisenberg, ScalarMode::Exact)).unwrap();
        assert!(out.passed(), "{:?}", out.records.iter().find(|r| !r.pass));
        assert!(out.records.iter().all(|r| r.exact_zero && r.tolerance == 0.0));
        let suites: Vec<&str> = out.records.iter().map(|r| r.suite.as_str()).collect();
        let mut sorted = suites.clone();
        sorted.sort_by_key(|s| s.parse::<SuiteId>().unwrap());
        assert_eq!(suites, sorted);
    }

    #[test]
    fn dropping_tanno_terms_fails_on_the_perturbed_model() {
        let cfg = RunConfig {
            ablate: vec![Ablation::DropQTerms],
            suites: vec![SuiteId::Commutation],
            ..small(ModelKind::PerturbedHeisenberg, ScalarMode::Float)
        };
        let out = run(&cfg).unwrap();
        assert_eq!(out.exit_code(), 1);
        let worst = out.records.iter().map(|r| r.residual).fold(0.0, f64::max);
        assert!(worst >= 1e3 * cfg.tol_point);
    }

    #[test]
    fn connection_fault_is_caught() {
        let cfg = RunConfig {
            fault: Some(FaultSpec::Connection { j: 1, k: 2, l: 3, delta: 1e-3 }),
            suites: vec![SuiteId::Axioms, SuiteId::Structure],
            ..small(ModelKind::Heisenberg, ScalarMode::Float)
        };
        let out = run(&cfg).unwrap();
        assert_eq!(out.exit_code(), 1);
        assert!(out.records.iter().filter(|r| r.suite == "axioms").all(|r| r.pass));
    }

    #[test]
    fn sphere_integrals_are_skipped_explicitly() {
        let cfg = RunConfig { suites: vec![SuiteId::Integrals], ..small(ModelKind::Sphere, ScalarMode::Float) };
        let out = run(&cfg).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].status, Status::NotApplicable);
        assert_eq!(out.exit_code(), 0);
    }

    #[test]
    fn block_sums_do_not_depend_on_thread_count() {
        let model = ContactModel::heisenberg(1).unwrap();
        let mut rng = sampling::rng(5, SuiteId::Integrals);
        let trials = sampling::gaussian_trials(&mut rng, 3, 1);
        let which = [IntegralSuite::AdjointGreen];
        let opts = TermOptions::default();
        let job = IntegralJob { model: &model, trials: &trials, suites: &which, opts: &opts, tol: 1e-8 };
        let nodes = integral_nodes(&model, &QuadratureSpec::gauss_hermite(9), &which).unwrap();
        let one = parallel_sums(&job, &nodes, 1).unwrap();
        let three = parallel_sums(&job, &nodes, 3).unwrap();
        assert_eq!(one, three);
    }
}
