//! Acceptance criteria, one line each.
//!
//! Criteria that cannot hold for mathematical reasons are listed in
//! `KNOWN_FAILURES` with the reason. The target exits nonzero when any other
//! criterion fails, and also when a listed one unexpectedly passes.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use crlab::config::{Ablation, FaultSpec, ModelKind, RunConfig, ScalarMode, SuiteId};
use crlab::record::ReportRecord;
use crlab::sampling;
use crlab::suites::{run, RunOutput};
use crlab::summary::{summarize, SummaryRow};
use crlab_core::calculus::{TermOptions, FORMULA_TERMS};
use crlab_core::global::{accumulate_variants, integral_nodes, IntegralJob, IntegralSuite, QuadratureSpec};
use crlab_core::{Exact, Jet, Layout, Scalar};
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL_POINT: f64 = 1e-8;
const TOL_INT: f64 = 1e-8;
const TOL_FLOAT_RERUN: f64 = 1e-9;
const TOL_SPREAD: f64 = 1e-8;
const TOL_STABILITY: f64 = 1e-9;
const TOL_RESEED: f64 = 1e-9;
const RATIO_LO: f64 = 1.0 - 1e-6;
const RATIO_HI: f64 = 1.02;
const ABLATION_FACTOR: f64 = 1e3;
const FAULT: f64 = 1e-3;
const STRUCTURAL_SECS: f64 = 120.0;
const LONG_SECS: f64 = 300.0;

/// Criteria that fail on the perturbed model because the identity they rely
/// on needs an integrable structure; the curvature pair swap is false there.
const KNOWN_FAILURES: &[(usize, &str)] = &[
    (1, "curvature-swap does not hold on the non-integrable perturbed model"),
    (4, "first-order-reeb and the combined identity use the curvature pair swap"),
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn base(model: ModelKind, mode: ScalarMode, suites: &[SuiteId]) -> RunConfig {
    RunConfig { model, n: 2, eps: "1/10".into(), mode, suites: suites.to_vec(), tol_point: TOL_POINT, tol_int: TOL_INT, ..Default::default() }
}

fn timed(cfg: &RunConfig) -> (RunOutput, f64) {
    let t = Instant::now();
    let out = run(cfg).unwrap_or_else(|e| panic!("{}: {e}", cfg.model.name()));
    (out, t.elapsed().as_secs_f64())
}

fn failing(out: &RunOutput) -> Vec<String> {
    summarize(&out.records).into_iter().filter(SummaryRow::failed).map(|r| format!("{}/{}", r.suite, r.family)).collect()
}

fn describe(name: &str, out: &RunOutput, secs: f64) -> String {
    let bad = failing(out);
    let worst = out.records.iter().map(|r| r.residual).fold(0.0, f64::max);
    if bad.is_empty() {
        format!("{name}: {} records pass, max residual {worst:.1e}, {secs:.1}s", out.records.len())
    } else {
        format!("{name}: failing {}, {secs:.1}s", bad.join(" "))
    }
}

struct Runs {
    structural: Vec<(ModelKind, RunOutput, f64)>,
    fields: Vec<(ModelKind, RunOutput, f64)>,
}

fn structural_and_field_runs() -> Runs {
    let exact = [ModelKind::Heisenberg, ModelKind::PerturbedHeisenberg];
    let structural = exact
        .iter()
        .map(|&m| {
            let cfg = RunConfig { points: 20, ..base(m, ScalarMode::Exact, &[SuiteId::Axioms, SuiteId::Structure]) };
            let (out, secs) = timed(&cfg);
            (m, out, secs)
        })
        .collect();
    let fields = [ModelKind::Heisenberg, ModelKind::PerturbedHeisenberg, ModelKind::Sphere]
        .iter()
        .map(|&m| {
            let mode = if m == ModelKind::Sphere { ScalarMode::Float } else { ScalarMode::Exact };
            let cfg = RunConfig { field_points: 10, polys: 10, ..base(m, mode, &[SuiteId::Commutation, SuiteId::Bochner]) };
            let (out, secs) = timed(&cfg);
            (m, out, secs)
        })
        .collect();
    Runs { structural, fields }
}

fn criterion_structural(runs: &Runs) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (m, out, secs) in &runs.structural {
        let points = out.records.iter().filter_map(|r| r.trial).max().map_or(0, |t| t + 1);
        pass &= out.passed() && *secs <= STRUCTURAL_SECS && points == 20;
        parts.push(describe(&format!("{} ({points} rational points)", m.name()), out, *secs));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn suite_only(out: &RunOutput, suite: &str) -> RunOutput {
    RunOutput { records: out.records.iter().filter(|r| r.suite == suite).cloned().collect(), spectral: None }
}

fn criterion_commutation(runs: &Runs) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (m, out, secs) in &runs.fields {
        let c = suite_only(out, "commutation");
        let exact_ok = *m == ModelKind::Sphere || c.records.iter().all(|r| r.exact_zero);
        pass &= c.passed() && exact_ok && !c.records.is_empty();
        parts.push(describe(m.name(), &c, *secs));
    }
    let cfg = RunConfig {
        ablate: vec![Ablation::DropQTerms],
        field_points: 10,
        polys: 10,
        ..base(ModelKind::PerturbedHeisenberg, ScalarMode::Float, &[SuiteId::Commutation])
    };
    let (out, _) = timed(&cfg);
    let worst = out.records.iter().map(|r| r.residual).fold(0.0, f64::max);
    let ok = worst >= ABLATION_FACTOR * TOL_POINT;
    pass &= ok;
    parts.push(format!("drop-q-terms on perturbed_heisenberg: max residual {worst:.2e} (needs >= {:.0e})", ABLATION_FACTOR * TOL_POINT));
    Outcome { pass, detail: parts.join("; ") }
}

fn criterion_bochner(runs: &Runs) -> Outcome {
    let needed = ["bochner-frame", "bochner-invariant", "bochner-forms-agree", "bochner-truncation-accounting"];
    let mut pass = true;
    let mut parts = Vec::new();
    for (m, out, secs) in &runs.fields {
        let b = suite_only(out, "bochner");
        let present = needed.iter().all(|f| b.records.iter().any(|r| r.family == *f));
        let exact_ok = *m == ModelKind::Sphere || b.records.iter().filter(|r| needed.contains(&r.family.as_str())).all(|r| r.exact_zero);
        pass &= b.passed() && present && exact_ok;
        parts.push(describe(m.name(), &b, *secs));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn criterion_integrals() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [ModelKind::Heisenberg, ModelKind::PerturbedHeisenberg] {
        let cfg = RunConfig { trials: 5, ..base(m, ScalarMode::Float, &[SuiteId::Integrals]) };
        let (out, secs) = timed(&cfg);
        let trials = out.records.iter().filter_map(|r| r.trial).max().map_or(0, |t| t + 1);
        pass &= out.passed() && secs <= LONG_SECS && trials == 5;
        let bad: Vec<String> = summarize(&out.records)
            .into_iter()
            .filter(SummaryRow::failed)
            .map(|r| format!("{} ({:.1e})", r.family, r.max_residual))
            .collect();
        let worst_pass = summarize(&out.records).into_iter().filter(|r| !r.failed()).map(|r| r.max_residual).fold(0.0, f64::max);
        parts.push(format!(
            "{}: {trials} trials, {secs:.1}s, passing families max {worst_pass:.1e}{}",
            m.name(),
            if bad.is_empty() { String::new() } else { format!(", failing {}", bad.join(" ")) }
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn spectral(seed: u64) -> (RunOutput, f64) {
    let cfg = RunConfig { seed, degree: 3, kappa_points: 200, tol_stability: TOL_STABILITY, ..base(ModelKind::Sphere, ScalarMode::Float, &[SuiteId::Spectral]) };
    timed(&cfg)
}

fn criterion_sphere() -> Outcome {
    let (out, secs) = spectral(1);
    let s = out.spectral.expect("spectral summary");
    let ratio = s.ratio.unwrap_or(f64::NAN);
    let stable = match (s.lambda1, s.lambda1_degree1) {
        (Some(a), Some(b)) => (a - b).abs(),
        _ => f64::INFINITY,
    };
    let pass = s.kappa > 0.0
        && s.samples == 200
        && s.kappa_spread <= TOL_SPREAD
        && (RATIO_LO..=RATIO_HI).contains(&ratio)
        && stable <= TOL_STABILITY
        && secs <= LONG_SECS;
    Outcome {
        pass,
        detail: format!(
            "kappa {:.12} (spread {:.1e} over {}), lambda1(3) {:.12}, ratio {ratio:.12}, |lambda1(3) - lambda1(1)| {stable:.1e}, {secs:.1}s",
            s.kappa,
            s.kappa_spread,
            s.samples,
            s.lambda1.unwrap_or(f64::NAN)
        ),
    }
}

fn key(r: &ReportRecord) -> (String, String, Option<usize>) {
    (r.suite.clone(), r.family.clone(), r.trial)
}

fn random_jet(rng: &mut ChaCha8Rng, lay: &std::sync::Arc<Layout>) -> Jet<Exact> {
    Jet::from_coeffs(lay, 4, (0..lay.len(4)).map(|_| Exact::from_i64(rng.gen_range(-6..=6))).collect())
}

fn criterion_robustness(runs: &Runs) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();

    // float re-run of every exactly-zero family at the same points and fields
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    for (m, exact, _) in runs.structural.iter().chain(runs.fields.iter().filter(|(m, _, _)| *m != ModelKind::Sphere)) {
        let suites: Vec<SuiteId> = exact.records.iter().map(|r| r.suite.parse().unwrap()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let cfg = RunConfig { points: 20, field_points: 10, polys: 10, ..base(*m, ScalarMode::Float, &suites) };
        let (float, _) = timed(&cfg);
        let zeros: BTreeMap<_, bool> = exact.records.iter().map(|r| (key(r), r.exact_zero)).collect();
        for r in &float.records {
            if zeros.get(&key(r)) == Some(&true) {
                compared += 1;
                worst = worst.max(r.residual);
            }
        }
    }
    pass &= worst <= TOL_FLOAT_RERUN && compared > 0;
    parts.push(format!("float re-run of {compared} exact zeros: max {worst:.1e}"));

    // Leibniz and chain rule, 1000 cases each
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let lay = Layout::new(3, 5);
    let mut bad = 0;
    for _ in 0..1000 {
        let (f, g) = (random_jet(&mut rng, &lay), random_jet(&mut rng, &lay));
        let d = rng.gen_range(0..3);
        let lhs = f.mul(&g).partial(d).unwrap();
        let rhs = f.partial(d).unwrap().mul(&g).add(&f.mul(&g.partial(d).unwrap()));
        bad += usize::from(lhs != rhs);
    }
    for _ in 0..1000 {
        let f = random_jet(&mut rng, &lay);
        let (d, k) = (rng.gen_range(0..3), rng.gen_range(1..5u32));
        let lhs = f.powi(k).partial(d).unwrap();
        let rhs = f.powi(k - 1).mul(&f.partial(d).unwrap()).scale(&Exact::from_i64(k as i64));
        bad += usize::from(lhs != rhs);
    }
    pass &= bad == 0;
    parts.push(format!("Leibniz and chain rule: {bad} of 2000 cases differ"));

    // reseeding moves the sampled invariants by at most the tolerance
    let (a, _) = spectral(1);
    let (b, _) = spectral(2);
    let (a, b) = (a.spectral.unwrap(), b.spectral.unwrap());
    let diff = [(a.kappa - b.kappa).abs(), (a.ratio.unwrap() - b.ratio.unwrap()).abs(), (a.lambda1.unwrap() - b.lambda1.unwrap()).abs()];
    let d = diff.iter().cloned().fold(0.0, f64::max);
    pass &= d <= TOL_RESEED;
    parts.push(format!("reseeding changes kappa, lambda1, ratio by at most {d:.1e}"));
    Outcome { pass, detail: parts.join("; ") }
}

const INTEGRAL_PREFIXES: &[&str] = &[
    "first-order-reeb/",
    "reeb-sublaplacian/",
    "tanno-correction/",
    "adjoint-horizontal/",
    "adjoint-reeb/",
    "green/",
    "sublaplacian-energy/",
    "gradient-energy/",
    "integrated-bochner/",
    "combination/",
];

fn is_integral_term(id: &str) -> bool {
    INTEGRAL_PREFIXES.iter().any(|p| id.starts_with(p))
}

/// A fault is caught when some family fails and either passed before or
/// moved by more than its tolerance.
fn caught(base: &[SummaryRow], faulted: &[SummaryRow]) -> bool {
    faulted.iter().any(|f| {
        f.failed()
            && match base.iter().find(|b| b.suite == f.suite && b.family == f.family) {
                None => true,
                Some(b) => !b.failed() || (f.max_residual - b.max_residual).abs() > f.tolerance,
            }
    })
}

fn criterion_faults() -> Outcome {
    let model = ModelKind::PerturbedHeisenberg;
    let pointwise = [SuiteId::Axioms, SuiteId::Structure, SuiteId::Commutation, SuiteId::Bochner];
    let small = RunConfig { points: 2, field_points: 2, polys: 2, ..base(model, ScalarMode::Float, &pointwise) };
    let baseline = summarize(&run(&small).unwrap().records);
    let mut faults = Vec::new();
    let dim = 5;
    for j in 0..dim {
        for k in 0..dim {
            for l in 0..dim {
                faults.push(FaultSpec::Connection { j, k, l, delta: FAULT });
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            faults.push(FaultSpec::Metric { i, j, delta: FAULT });
        }
    }
    let (integral_ids, point_ids): (Vec<&str>, Vec<&str>) = FORMULA_TERMS.iter().map(|(id, _)| *id).partition(|id| is_integral_term(id));
    faults.extend(point_ids.iter().map(|id| FaultSpec::Term { id: id.to_string(), delta: FAULT }));

    let start = Instant::now();
    let mut missed = Vec::new();
    let mut counts = BTreeMap::new();
    for f in &faults {
        let kind = match f {
            FaultSpec::Connection { .. } => "connection",
            FaultSpec::Metric { .. } => "metric",
            FaultSpec::Term { .. } => "term",
        };
        *counts.entry(kind).or_insert(0usize) += 1;
        let cfg = RunConfig { fault: Some(f.clone()), ..small.clone() };
        let rows = summarize(&run(&cfg).unwrap().records);
        if !caught(&baseline, &rows) {
            missed.push(format!("{f:?}"));
        }
    }

    // integral terms share node geometry across one pass
    let cm = small.build_model().unwrap();
    let mut rng = sampling::rng(small.seed, SuiteId::Integrals);
    let trials = sampling::gaussian_trials(&mut rng, dim, 1);
    let which = [IntegralSuite::AdjointGreen, IntegralSuite::Identities];
    let spec = QuadratureSpec::for_model(&cm, small.quad_order, small.quad_profile_order);
    let nodes = integral_nodes(&cm, &spec, &which).unwrap();
    let mut variants = vec![TermOptions::default()];
    let factor = BigRational::new(1001.into(), 1000.into());
    variants.extend(integral_ids.iter().map(|id| TermOptions { scale: vec![(id.to_string(), factor.clone())], ..Default::default() }));
    let opts = TermOptions::default();
    let job = IntegralJob { model: &cm, trials: &trials, suites: &which, opts: &opts, tol: TOL_POINT };
    let sums = accumulate_variants(&job, &variants, &nodes).unwrap();
    let to_rows = |s: &crlab_core::global::IntegralSums| -> Vec<SummaryRow> {
        s.report()
            .families
            .iter()
            .map(|f| SummaryRow {
                suite: "integrals".into(),
                family: f.name.clone(),
                model: model.name().into(),
                n: 2,
                trials: 1,
                max_residual: f.residual,
                tolerance: TOL_INT,
                pass: (f.residual <= TOL_INT).to_string(),
            })
            .collect()
    };
    let int_base = to_rows(&sums[0]);
    for (id, s) in integral_ids.iter().zip(&sums[1..]) {
        if !caught(&int_base, &to_rows(s)) {
            missed.push(format!("Term {{ id: {id:?} }} (integral)"));
        }
    }
    *counts.entry("term").or_insert(0) += integral_ids.len();
    let total: usize = counts.values().sum();
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: missed.is_empty(),
        detail: format!(
            "{total} faults of size {FAULT:.0e} ({}), {} missed{}; {secs:.1}s",
            counts.iter().map(|(k, v)| format!("{v} {k}")).collect::<Vec<_>>().join(", "),
            missed.len(),
            if missed.is_empty() { String::new() } else { format!(": {}", missed.join(", ")) }
        ),
    }
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let runs = structural_and_field_runs();
    let criteria: Vec<(usize, &str, Outcome)> = vec![
        (1, "exact structural suite", criterion_structural(&runs)),
        (2, "commutation identities", criterion_commutation(&runs)),
        (3, "Bochner-type formula", criterion_bochner(&runs)),
        (4, "integral identities", criterion_integrals()),
        (5, "sphere spectral bound", criterion_sphere()),
        (6, "float agreement, properties, reseeding", criterion_robustness(&runs)),
        (7, "fault injection", criterion_faults()),
    ];
    let mut unexpected = 0;
    for (i, name, o) in &criteria {
        let known = KNOWN_FAILURES.iter().find(|(k, _)| k == i);
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {i} {verdict} [{name}] {}", o.detail);
        match (o.pass, known) {
            (false, Some((_, why))) => println!("    known failure: {why}"),
            (false, None) => unexpected += 1,
            (true, Some(_)) => {
                println!("    listed as a known failure but passed; update KNOWN_FAILURES");
                unexpected += 1;
            }
            (true, None) => {}
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criteria did not match their expected outcome");
        ExitCode::FAILURE
    }
}
