//! Seeded sample points and test functions.

use crlab_core::calculus::ScalarField;
use crlab_core::global::{enveloped, Trial};
use num_rational::BigRational;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ModelKind, SuiteId};

/// Independent stream per suite, so adding a suite does not move the others' samples.
pub fn rng(seed: u64, suite: SuiteId) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(suite as u64 + 1);
    r
}

fn rational<R: Rng>(rng: &mut R, num: i64, dens: (i64, i64)) -> BigRational {
    let p = rng.gen_range(-num..=num);
    let q = rng.gen_range(dens.0..=dens.1);
    BigRational::new(p.into(), q.into())
}

/// Rational chart points; sphere points stay in `[-3/2, 3/2]`.
pub fn rational_points<R: Rng>(rng: &mut R, model: ModelKind, dim: usize, count: usize) -> Vec<Vec<BigRational>> {
    let (num, dens) = match model {
        ModelKind::Sphere => (12, (8, 8)),
        _ => (8, (1, 4)),
    };
    (0..count).map(|_| (0..dim).map(|_| rational(rng, num, dens)).collect()).collect()
}

/// Uniform float points, for sampling `κ`.
pub fn float_points<R: Rng>(rng: &mut R, dim: usize, count: usize, half_width: f64) -> Vec<Vec<f64>> {
    (0..count).map(|_| (0..dim).map(|_| rng.gen_range(-half_width..=half_width)).collect()).collect()
}

fn monomial<R: Rng>(rng: &mut R, vars: usize, degree: usize) -> Vec<u8> {
    let mut e = vec![0u8; vars];
    for _ in 0..degree {
        e[rng.gen_range(0..vars)] += 1;
    }
    e
}

/// Random polynomial of degree exactly `degree` with a few small rational terms.
pub fn polynomial_terms<R: Rng>(rng: &mut R, vars: usize, degree: usize) -> Vec<(BigRational, Vec<u8>)> {
    let mut terms = vec![(nonzero(rng), monomial(rng, vars, degree))];
    for _ in 0..if degree == 0 { 0 } else { 5 } {
        let d = rng.gen_range(0..degree);
        terms.push((nonzero(rng), monomial(rng, vars, d)));
    }
    terms
}

fn nonzero<R: Rng>(rng: &mut R) -> BigRational {
    let p = rng.gen_range(1..=4) * if rng.gen_bool(0.5) { 1 } else { -1 };
    BigRational::new(p.into(), rng.gen_range(1..=3i64).into())
}

pub fn polynomial_field<R: Rng>(rng: &mut R, ambient: usize, degree: usize) -> ScalarField {
    ScalarField::polynomial(polynomial_terms(rng, ambient, degree))
}

/// Pairs of cubic polynomials times the standard gaussian.
pub fn gaussian_trials<R: Rng>(rng: &mut R, dim: usize, count: usize) -> Vec<Trial> {
    (0..count)
        .map(|_| Trial { u: enveloped(polynomial_terms(rng, dim, 3), dim), v: enveloped(polynomial_terms(rng, dim, 3), dim) })
        .collect()
}
