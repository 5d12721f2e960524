//! Randomized invariants.

use std::sync::Arc;

use crlab_core::calculus::{check_bochner, check_commutations, field_table, ScalarField, TermOptions};
use crlab_core::connection::{check_structure_identities, geometry_tables, ConnectionOptions, Tables};
use crlab_core::geometry::{build_frame, ContactModel, Frame};
use crlab_core::global::kappa;
use crlab_core::scalar::ratio;
use crlab_core::{Exact, Expr, Jet, Layout, Scalar};
use num_rational::BigRational;
use proptest::prelude::*;

fn exact_jet(lay: &Arc<Layout>, order: usize, c: &[i64]) -> Jet<Exact> {
    let n = lay.len(order);
    Jet::from_coeffs(lay, order, (0..n).map(|i| Exact::from_i64(c[i % c.len()])).collect())
}

fn float_jet(lay: &Arc<Layout>, order: usize, c: &[f64]) -> Jet<f64> {
    let n = lay.len(order);
    Jet::from_coeffs(lay, order, (0..n).map(|i| c[i % c.len()]).collect())
}

fn close(a: &Jet<f64>, b: &Jet<f64>, tol: f64) -> bool {
    let scale = a.max_abs().max(b.max_abs()).max(1.0);
    a.coeffs().iter().zip(b.coeffs()).all(|(x, y)| (x - y).abs() <= tol * scale)
}

fn coeffs(len: usize) -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(-6i64..=6, len)
}

fn rational() -> impl Strategy<Value = BigRational> {
    (-8i64..=8, 1i64..=4).prop_map(|(a, b)| ratio(a, b))
}

fn point() -> impl Strategy<Value = Vec<BigRational>> {
    prop::collection::vec(rational(), 5)
}

fn square_free() -> impl Strategy<Value = ScalarField> {
    let mono = (-4i64..=4, prop::collection::vec(0u8..=1, 5)).prop_map(|(c, e)| (ratio(c, 1), e));
    prop::collection::vec(mono, 1..5).prop_map(ScalarField::polynomial)
}

fn perturbed() -> ContactModel {
    ContactModel::perturbed_heisenberg(2, ratio(1, 10), ContactModel::default_profile(2), ContactModel::default_shear(2)).unwrap()
}

fn geometry<S: Scalar>(m: &ContactModel, p: &[BigRational], seed: Option<&[S]>) -> (Frame<S>, Tables<S>) {
    let lay = Layout::new(5, 4);
    let p: Vec<S> = p.iter().map(S::from_rational).collect();
    let fr = build_frame(m, &lay, &p, 2, seed).unwrap();
    let t = geometry_tables(&fr, &ConnectionOptions { tol: 1e-9, gamma_fault: None }).unwrap();
    (fr, t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn leibniz_rule_is_exact(a in coeffs(35), b in coeffs(35), d in 0usize..3) {
        let lay = Layout::new(3, 5);
        let f = exact_jet(&lay, 4, &a);
        let g = exact_jet(&lay, 4, &b);
        let lhs = f.mul(&g).partial(d).unwrap();
        let rhs = f.partial(d).unwrap().mul(&g).add(&f.mul(&g.partial(d).unwrap()));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn chain_rule_for_powers_is_exact(a in coeffs(35), k in 1u32..5, d in 0usize..3) {
        let lay = Layout::new(3, 5);
        let f = exact_jet(&lay, 4, &a);
        let lhs = f.powi(k).partial(d).unwrap();
        let rhs = f.powi(k - 1).mul(&f.partial(d).unwrap()).scale(&Exact::from_i64(k as i64));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn chain_rule_for_transcendentals(a in prop::collection::vec(-1.0f64..1.0, 35), d in 0usize..3) {
        let lay = Layout::new(3, 5);
        let f = float_jet(&lay, 4, &a);
        let df = f.partial(d).unwrap();
        let e = f.exp().unwrap();
        prop_assert!(close(&e.partial(d).unwrap(), &e.mul(&df), 1e-12));
        let s = f.sin().unwrap();
        prop_assert!(close(&s.partial(d).unwrap(), &f.cos().unwrap().mul(&df), 1e-12));
        let g = f.add_scalar(&3.0);
        let r = g.sqrt().unwrap();
        let want = df.div(&r.scale(&2.0)).unwrap();
        prop_assert!(close(&r.partial(d).unwrap(), &want, 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sublaplacian_is_linear(p in point(), u in square_free(), v in square_free(), a in rational(), b in rational()) {
        let m = perturbed();
        let (fr, t) = geometry::<Exact>(&m, &p, None);
        let lap = |f: &ScalarField| field_table(f, &m, &fr, &t).unwrap().sublap.value();
        let (Expr::Poly(tu), Expr::Poly(tv)) = (&u.expr, &v.expr) else { unreachable!() };
        let mut comb: Vec<(BigRational, Vec<u8>)> = tu.iter().map(|(c, e)| (c * &a, e.clone())).collect();
        comb.extend(tv.iter().map(|(c, e)| (c * &b, e.clone())));
        let lhs = lap(&ScalarField::polynomial(comb));
        let rhs = lap(&u).scale(&Exact::from_rational(&a)).add(&lap(&v).scale(&Exact::from_rational(&b)));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn float_rerun_of_exact_identities_is_tight(p in point(), u in square_free()) {
        let m = perturbed();
        let (fr, t) = geometry::<f64>(&m, &p, None);
        let ct = field_table(&u, &m, &fr, &t).unwrap();
        let mut rep = check_commutations(&ct, &fr, &t, &TermOptions::default()).unwrap();
        rep.merge(&check_bochner(&ct, &fr, &t, &TermOptions::default()).unwrap());
        rep.merge(&check_structure_identities(&fr, &t).unwrap());
        for f in rep.families.iter().filter(|f| f.name != "curvature-swap") {
            prop_assert!(f.residual <= 1e-9, "{} {}", f.name, f.residual);
        }
    }

    #[test]
    fn invariants_do_not_depend_on_the_frame(p in point(), u in square_free(), seed in prop::collection::vec(-1.0f64..1.0, 5)) {
        prop_assume!(seed[..4].iter().map(|x| x * x).sum::<f64>() > 0.05);
        let m = perturbed();
        let (f0, t0) = geometry::<f64>(&m, &p, None);
        let (f1, t1) = geometry::<f64>(&m, &p, Some(&seed));
        let a = field_table(&u, &m, &f0, &t0).unwrap();
        let b = field_table(&u, &m, &f1, &t1).unwrap();
        let near = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(1.0);
        prop_assert!(near(a.sublap.value().re, b.sublap.value().re));
        prop_assert!(near(a.norm_db.value().re, b.norm_db.value().re));
        prop_assert!(near(t0.scalar.value().re, t1.scalar.value().re));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sphere_kappa_does_not_depend_on_the_sample(pts in prop::collection::vec(prop::collection::vec(-1.5f64..1.5, 5), 1..12)) {
        let m = ContactModel::sphere(2).unwrap();
        let k = kappa(&m, &pts, 1e-9).unwrap();
        prop_assert!((k.kappa - 6.0).abs() <= 1e-9, "{}", k.kappa);
        prop_assert!(k.spread <= 1e-9);
    }
}
