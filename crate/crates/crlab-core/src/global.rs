//! Integration over the model, integral identities, the curvature bound
//! `κ` and Galerkin estimates of the first sub-Laplacian eigenvalue.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::BigRational;
use num_traits::FromPrimitive;

use crate::calculus::{covariant_table, field_table, sublaplacian, ScalarField, TermOptions};
use crate::connection::{geometry_tables, q_forms, ConnectionOptions, Tables};
use crate::geometry::{bar, build_frame, ContactModel, Frame, IntegrationProfile, Kind};
use crate::jets::{CJet, Expr, Jet, Layout};
use crate::linalg::{generalized_eigenvalues, jacobi_eigen};
use crate::report::Report;
use crate::scalar::{Scalar, C};
use crate::Error;

/// Frame order used for every pointwise evaluation in this module.
pub const FRAME_ORDER: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureSpec {
    pub profile: IntegrationProfile,
    /// Nodes per coordinate for Gauss–Hermite.
    pub order: usize,
    /// Per-axis overrides of `order`, as `(axis, order)`.
    pub axis_orders: Vec<(usize, usize)>,
    /// Integrands are taken to carry `exp(−c|x|²)`.
    pub gauss_c: f64,
}

impl QuadratureSpec {
    pub fn gauss_hermite(order: usize) -> Self {
        QuadratureSpec { profile: IntegrationProfile::GaussHermiteWeighted, order, axis_orders: Vec::new(), gauss_c: 1.0 }
    }

    pub fn sphere() -> Self {
        QuadratureSpec { profile: IntegrationProfile::SphereMoments, order: 0, axis_orders: Vec::new(), gauss_c: 0.0 }
    }

    /// Gauss–Hermite rule for a Heisenberg-type model: `order` nodes per
    /// axis, `profile_order` on the axes the perturbation profile uses
    /// (integrands are rational rather than polynomial there).
    pub fn for_model(model: &ContactModel, order: usize, profile_order: usize) -> Self {
        let mut q = Self::gauss_hermite(order);
        if let Kind::Perturbed { profile, .. } = &model.kind {
            q.axis_orders = profile.chart_vars(model.dim()).into_iter().map(|a| (a, profile_order.max(order))).collect();
        }
        q
    }

    pub fn axis_order(&self, axis: usize) -> usize {
        self.axis_orders.iter().rev().find(|(a, _)| *a == axis).map_or(self.order, |(_, q)| *q)
    }

    /// Highest polynomial degree in `axis` integrated exactly.
    pub fn exact_degree(&self, axis: usize) -> usize {
        (2 * self.axis_order(axis)).saturating_sub(1)
    }
}

fn layout_for(model: &ContactModel) -> alloc::sync::Arc<Layout> {
    Layout::new(model.dim(), FRAME_ORDER + 2)
}

fn pfaffian<S: Scalar>(m: &[Vec<S>]) -> S {
    let k = m.len();
    if k == 0 {
        return S::one();
    }
    let mut s = S::zero();
    for j in 1..k {
        if m[0][j].is_zero() {
            continue;
        }
        let rest: Vec<usize> = (1..k).filter(|&i| i != j).collect();
        let minor: Vec<Vec<S>> = rest.iter().map(|&a| rest.iter().map(|&b| m[a][b].clone()).collect()).collect();
        let term = m[0][j].mul_ref(&pfaffian(&minor));
        if j % 2 == 1 {
            s.add_assign_ref(&term);
        } else {
            s.sub_assign_ref(&term);
        }
    }
    s
}

fn factorial(n: usize) -> i64 {
    (1..=n as i64).product()
}

/// Chart density of `θ ∧ dθⁿ` against `dx⁰ ∧ … ∧ dx^{2n}`, in absolute value.
pub fn volume_density<S: Scalar>(fr: &Frame<S>) -> Result<S, Error> {
    let f = &fr.fields;
    let dim = fr.dim();
    let two = S::from_i64(2);
    let mut total = S::zero();
    for i in 0..dim {
        let th = f.theta[i].value();
        if th.is_zero() {
            continue;
        }
        let rest: Vec<usize> = (0..dim).filter(|&k| k != i).collect();
        let m: Vec<Vec<S>> = rest.iter().map(|&a| rest.iter().map(|&b| f.dtheta[a][b].value().mul_ref(&two)).collect()).collect();
        let term = th.mul_ref(&pfaffian(&m));
        if i % 2 == 0 {
            total.add_assign_ref(&term);
        } else {
            total.sub_assign_ref(&term);
        }
    }
    let total = total.mul_ref(&S::from_i64(factorial(fr.n)));
    if total.is_zero() {
        return Err(Error::Degenerate("θ ∧ dθⁿ vanishes"));
    }
    Ok(if total.is_positive() { total } else { total.neg_ref() })
}

fn cdiv<S: Scalar>(a: &C<S>, b: &C<S>) -> Result<C<S>, Error> {
    let d = b.norm_sqr();
    let num = a.mul(&b.conj());
    Ok(C::new(num.re.div_ref(&d).ok_or(Error::Singular)?, num.im.div_ref(&d).ok_or(Error::Singular)?))
}

fn cdet<S: Scalar>(mut m: Vec<Vec<C<S>>>) -> Result<C<S>, Error> {
    let k = m.len();
    let mut det = C::one();
    for col in 0..k {
        let piv = (col..k).max_by(|&a, &b| m[a][col].abs_f64().total_cmp(&m[b][col].abs_f64())).ok_or(Error::Singular)?;
        if m[piv][col].is_zero() {
            return Ok(C::zero());
        }
        if piv != col {
            m.swap(piv, col);
            det = det.neg();
        }
        det = det.mul(&m[col][col]);
        for r in col + 1..k {
            let f = cdiv(&m[r][col], &m[col][col])?;
            for c in col..k {
                let t = f.mul(&m[col][c]);
                m[r][c].sub_assign(&t);
            }
        }
    }
    Ok(det)
}

/// `(−2)ⁿ i^{n²} n! · θ∧θ¹∧…∧θⁿ∧θ^1̄∧…∧θ^n̄` evaluated on the chart basis.
pub fn volume_density_frame<S: Scalar>(fr: &Frame<S>) -> Result<C<S>, Error> {
    let n = fr.n;
    let m: Vec<Vec<C<S>>> = fr.coframe.iter().map(|row| row.iter().map(CJet::value).collect()).collect();
    let det = cdet(m)?;
    let mut k = C::real(S::from_i64(factorial(n) * (-2i64).pow(n as u32)));
    for _ in 0..(n * n) % 4 {
        k = k.times_i();
    }
    Ok(det.mul(&k))
}

/// Agreement of the two expressions of the volume form.
pub fn check_volume_form<S: Scalar>(fr: &Frame<S>) -> Result<Report, Error> {
    let mut r = Report::new();
    let a = volume_density(fr)?;
    let b = volume_density_frame(fr)?;
    let re = if b.re.is_positive() { b.re.clone() } else { b.re.neg_ref() };
    r.equal("volume-form-frame", &C::real(a), &C::new(re, b.im));
    Ok(r)
}

/// Density of `dV` at a chart point.
pub fn density_at(model: &ContactModel, p: &[f64]) -> Result<f64, Error> {
    let lay = Layout::new(model.dim(), 2);
    let f = model.fields::<f64>(&lay, p, 0)?;
    let dim = model.dim();
    let mut total = 0.0;
    for i in 0..dim {
        let th = *f.theta[i].value();
        if th == 0.0 {
            continue;
        }
        let rest: Vec<usize> = (0..dim).filter(|&k| k != i).collect();
        let m: Vec<Vec<f64>> = rest.iter().map(|&a| rest.iter().map(|&b| 2.0 * f.dtheta[a][b].value()).collect()).collect();
        let s = if i % 2 == 0 { 1.0 } else { -1.0 };
        total += s * th * pfaffian(&m);
    }
    Ok((total * factorial(model.n) as f64).abs())
}

/// Gauss–Hermite nodes and weights for the weight `exp(−x²)` (Golub–Welsch).
pub fn gauss_hermite(order: usize) -> Result<(Vec<f64>, Vec<f64>), Error> {
    if order == 0 {
        return Err(Error::Precondition("quadrature order must be positive".into()));
    }
    let mut j = vec![vec![0.0; order]; order];
    for i in 1..order {
        let b = libm::sqrt(i as f64 / 2.0);
        j[i][i - 1] = b;
        j[i - 1][i] = b;
    }
    let (vals, vecs) = jacobi_eigen(&j);
    let mu0 = libm::sqrt(core::f64::consts::PI);
    let w = (0..order).map(|k| mu0 * vecs[0][k] * vecs[0][k]).collect();
    Ok((vals, w))
}

/// Tensor-product nodes over `dim` coordinates. Each weight includes the
/// factor `exp(c|x|²)`, so `Σ wᵢ f(xᵢ)` approximates `∫ f dx` for
/// integrands of the form polynomial × `exp(−c|x|²)`.
pub fn gauss_nodes(dim: usize, spec: &QuadratureSpec) -> Result<Vec<(Vec<f64>, f64)>, Error> {
    if spec.profile != IntegrationProfile::GaussHermiteWeighted {
        return Err(Error::Precondition("gauss nodes need the gauss_hermite profile".into()));
    }
    if spec.gauss_c <= 0.0 {
        return Err(Error::Precondition("gaussian rate must be positive".into()));
    }
    let rules = (0..dim).map(|a| gauss_hermite(spec.axis_order(a))).collect::<Result<Vec<_>, _>>()?;
    let s = libm::sqrt(spec.gauss_c);
    let mut total = 1usize;
    for (x, _) in &rules {
        total = total.checked_mul(x.len()).ok_or(Error::Precondition("too many quadrature nodes".into()))?;
    }
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        let p: Vec<f64> = idx.iter().zip(&rules).map(|(&i, (x, _))| x[i] / s).collect();
        let mut wt = 1.0;
        for (&i, (x, w)) in idx.iter().zip(&rules) {
            wt *= w[i] / s * libm::exp(x[i] * x[i]);
        }
        out.push((p, wt));
        for (d, (x, _)) in idx.iter_mut().zip(&rules) {
            *d += 1;
            if *d < x.len() {
                break;
            }
            *d = 0;
        }
    }
    Ok(out)
}

/// `∫ f dV` for a pointwise integrand on a Heisenberg-type model.
pub fn integrate<F>(model: &ContactModel, spec: &QuadratureSpec, mut f: F) -> Result<f64, Error>
where
    F: FnMut(&[f64]) -> Result<f64, Error>,
{
    if model.integration_profile() != spec.profile {
        return Err(Error::Precondition(format!("profile {:?} does not match the model", spec.profile)));
    }
    let nodes = gauss_nodes(model.dim(), spec)?;
    let mut acc = 0.0;
    for (p, w) in &nodes {
        acc += w * density_at(model, p)? * f(p)?;
    }
    Ok(acc)
}

/// Polynomial in ambient coordinates with float coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AmbientPoly {
    pub terms: BTreeMap<Vec<u8>, f64>,
}

impl AmbientPoly {
    pub fn monomial(e: Vec<u8>, c: f64) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(e, c);
        AmbientPoly { terms }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (e, c) in &o.terms {
            *r.terms.entry(e.clone()).or_insert(0.0) += c;
        }
        r
    }

    pub fn scale(&self, s: f64) -> Self {
        AmbientPoly { terms: self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut r = AmbientPoly::default();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e: Vec<u8> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                *r.terms.entry(e).or_insert(0.0) += c1 * c2;
            }
        }
        r
    }

    pub fn partial(&self, i: usize) -> Self {
        let mut r = AmbientPoly::default();
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                *r.terms.entry(f).or_insert(0.0) += c * e[i] as f64;
            }
        }
        r
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(e, c)| c * e.iter().zip(x).map(|(&k, v)| libm::pow(*v, k as f64)).product::<f64>()).sum()
    }

    pub fn to_field(&self) -> Result<ScalarField, Error> {
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| BigRational::from_f64(*c).map(|r| (r, e.clone())).ok_or(Error::Unsupported("non-finite coefficient")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ScalarField::polynomial(terms))
    }
}

/// `∫_{S^{N−1}} x^a dσ` for the round unit sphere.
pub fn sphere_moment(a: &[u8]) -> f64 {
    if a.iter().any(|&k| k % 2 == 1) {
        return 0.0;
    }
    let num: f64 = a.iter().map(|&k| libm::tgamma((k as f64 + 1.0) / 2.0)).product();
    let tot: f64 = a.iter().map(|&k| (k as f64 + 1.0) / 2.0).sum();
    2.0 * num / libm::tgamma(tot)
}

pub fn sphere_integral(p: &AmbientPoly) -> f64 {
    p.terms.iter().map(|(e, c)| c * sphere_moment(e)).sum()
}

fn sphere_chart_sample(n: usize) -> Vec<Vec<f64>> {
    let dim = 2 * n + 1;
    halton(dim, 4, -0.8, 0.8)
}

/// Ratio `dV / dσ` on the sphere model, checked to be constant.
pub fn sphere_volume_factor(model: &ContactModel) -> Result<f64, Error> {
    if model.kind != Kind::Sphere {
        return Err(Error::Precondition("sphere moments need the sphere model".into()));
    }
    let dim = model.dim();
    let lay = Layout::new(dim, 2);
    let mut ratios = Vec::new();
    for p in sphere_chart_sample(model.n) {
        let x = Jet::coordinates(&lay, 1, &p);
        let amb = model.ambient(&x)?;
        let d: Vec<Vec<f64>> = amb.iter().map(|a| (0..dim).map(|i| a.partial(i).map(|j| *j.value())).collect::<Result<Vec<_>, _>>()).collect::<Result<_, _>>()?;
        let g: Vec<Vec<f64>> = (0..dim).map(|i| (0..dim).map(|k| d.iter().map(|row| row[i] * row[k]).sum()).collect()).collect();
        let l = crate::linalg::cholesky(&g)?;
        let sigma: f64 = (0..dim).map(|i| l[i][i]).product();
        ratios.push(density_at(model, &p)? / sigma);
    }
    let r0 = ratios[0];
    if ratios.iter().any(|r| (r - r0).abs() > 1e-9 * r0) {
        return Err(Error::Degenerate("dV/dσ is not constant on the sphere"));
    }
    Ok(r0)
}

/// `∫ p dV` for an ambient polynomial on the sphere.
pub fn integrate_sphere_poly(model: &ContactModel, p: &AmbientPoly) -> Result<f64, Error> {
    Ok(sphere_volume_factor(model)? * sphere_integral(p))
}

/// `P · exp(−|x|²/2)` over chart coordinates: the test class on
/// Heisenberg-type models.
pub fn enveloped(poly: Vec<(BigRational, Vec<u8>)>, dim: usize) -> ScalarField {
    let mut r2 = Expr::var(0).pow(2);
    for i in 1..dim {
        r2 = r2 + Expr::var(i).pow(2);
    }
    let env = (Expr::Const(BigRational::new((-1).into(), 2.into())) * r2).exp();
    ScalarField::new(Expr::Poly(poly) * env)
}

/// Which families an integral run evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntegralSuite {
    AdjointGreen,
    Identities,
}

/// Values of `C` for the combined identity; the first makes the Hessian
/// trace coefficients cancel.
pub fn combination_constants(n: usize) -> [(String, f64); 3] {
    [
        (String::from("combination-sharp"), 3.0 * n as f64 / (4.0 * n as f64 + 2.0)),
        (String::from("combination-low"), 0.25),
        (String::from("combination-high"), 2.0),
    ]
}

/// Integrands of one trial at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeIntegrands<S> {
    /// `|u|² + |v|² + Σ_j (|u_j|² + |v_j|²) + Σ_{a,b∈H} |u_ab|²`, whose
    /// integral floors the scale of every residual in the trial.
    pub reference: S,
    /// One entry per family instance: signed terms whose integrals should
    /// sum to zero.
    pub families: Vec<(String, Vec<C<S>>)>,
}

pub fn integrands<S: Scalar>(
    fr: &Frame<S>,
    t: &Tables<S>,
    u: &CJet<S>,
    v: &CJet<S>,
    suites: &[IntegralSuite],
    opts: &TermOptions,
) -> Result<NodeIntegrands<S>, Error> {
    let n = fr.n;
    let b = |j: usize| bar(n, j);
    let ct = covariant_table(u, fr, t)?;
    let u0 = C::real(ct.u0.clone());
    let u1: Vec<C<S>> = ct.d1.iter().map(CJet::value).collect();
    let u2: Vec<Vec<C<S>>> = ct.d2.iter().map(|r| r.iter().map(CJet::value).collect()).collect();
    let lap = ct.sublap.value();
    let v0 = v.value();
    let v1: Vec<C<S>> = fr.derivs(v)?.iter().map(CJet::value).collect();
    let gv = |j: usize, k: usize, l: usize| t.gamma[j][k][l].value();
    let qv = |j: usize, k: usize, l: usize| t.q[j][k][l].value();
    let qdv = |j: usize, k: usize, s: usize, l: usize| t.qd[j][k][s][l].value();
    let r = |x: f64| C::real(S::from_f64(x));
    let q = |a: i64, d: i64| C::real(S::from_ratio(a, d));
    let k = |id: &str, x: C<S>| x.scale(&opts.k::<S>(id));
    let nn = n as i64;
    let mut out = Vec::new();
    let mut reference = u0.norm_sqr().add_ref(&v0.norm_sqr());
    for j in 0..=2 * n {
        reference.add_assign_ref(&u1[j].norm_sqr());
        reference.add_assign_ref(&v1[j].norm_sqr());
        if j > 0 {
            for l in 1..=2 * n {
                reference.add_assign_ref(&u2[j][l].norm_sqr());
            }
        }
    }

    if suites.contains(&IntegralSuite::AdjointGreen) {
        for j in 1..=2 * n {
            let mut g = C::zero();
            for be in 1..=n {
                if j <= n {
                    g.add_assign(&gv(b(be), be, j));
                } else {
                    g.add_assign(&gv(be, b(be), j));
                }
            }
            out.push((String::from("adjoint-horizontal"), vec![
                    u1[j].mul(&v0),
                    k("adjoint-horizontal/adjoint", u0.mul(&v1[j])),
                    k("adjoint-horizontal/connection", g.conj().mul(&u0).mul(&v0)).neg(),
                ]));
        }
        out.push((String::from("adjoint-reeb"), vec![u1[0].mul(&v0).times_i(), k("adjoint-reeb/adjoint", u0.mul(&v1[0]).times_i())]));
        let mut grad = C::zero();
        for al in 1..=n {
            grad.mul_add_assign(&u1[al], &v1[b(al)]);
            grad.mul_add_assign(&u1[b(al)], &v1[al]);
        }
        out.push((String::from("green"), vec![lap.mul(&v0), k("green/gradient", grad)]));
    }
    if !suites.contains(&IntegralSuite::Identities) {
        return Ok(NodeIntegrands { reference, families: out });
    }

    let lap1: Vec<C<S>> = fr.derivs(&ct.sublap)?.iter().map(CJet::value).collect();
    let mut reeb = C::zero();
    let mut hm = C::zero();
    let mut hh = C::zero();
    let mut ric = C::zero();
    let mut p = C::zero();
    let mut pb = C::zero();
    let mut qq = C::zero();
    let mut qx = C::zero();
    let mut tor = C::zero();
    let mut tr = C::zero();
    let mut g57 = C::zero();
    let mut energy = C::zero();
    let mut lapgrad = C::zero();
    for al in 1..=n {
        reeb.add_assign(&u2[0][b(al)].mul(&u1[al]).sub(&u2[0][al].mul(&u1[b(al)])));
        tr.add_assign(&u2[al][b(al)]);
        energy.mul_add_assign(&u1[al], &u1[b(al)]);
        lapgrad.mul_add_assign(&u1[al], &lap1[b(al)]);
        lapgrad.mul_add_assign(&u1[b(al)], &lap1[al]);
        for be in 1..=n {
            hm.mul_add_assign(&u2[b(al)][be], &u2[al][b(be)]);
            hh.mul_add_assign(&u2[al][be], &u2[b(al)][b(be)]);
            ric.add_assign(&t.ric[al - 1][be - 1].value().mul(&u1[b(al)]).mul(&u1[be]));
            let a = t.a[al - 1][be - 1].value();
            tor.add_assign(&a.conj().mul(&u1[al]).mul(&u1[be]).sub(&a.mul(&u1[b(al)]).mul(&u1[b(be)])));
            for ga in 1..=n {
                p.add_assign(&qdv(b(al), b(be), ga, ga).mul(&u1[al]).mul(&u1[be]));
                pb.add_assign(&qdv(al, be, b(ga), b(ga)).mul(&u1[b(al)]).mul(&u1[b(be)]));
                g57.add_assign(&gv(b(al), b(ga), be).mul(&u2[al][ga]).mul(&u1[be]));
                for rh in 1..=n {
                    let uu = u1[b(al)].mul(&u1[be]);
                    qq.add_assign(&qv(al, ga, b(rh)).mul(&qv(b(be), b(ga), rh)).mul(&uu));
                    qx.add_assign(&qv(al, ga, b(rh)).mul(&qv(b(be), b(rh), ga)).mul(&uu));
                }
            }
        }
    }
    let reeb = reeb.times_i();
    let tor = tor.times_i();
    let tr2 = tr.mul(&tr.conj());
    let lap2 = lap.mul(&lap);
    let inv_n = q(1, nn);
    let half_i = C::new(S::zero(), S::from_ratio(1, 2));

    // the trace part, −(i/2)P + (i/2)P̄
    let qtr51 = pb.sub(&p).mul(&half_i);
    out.push((
        String::from("first-order-reeb"),
        vec![
            reeb.clone(),
            k("first-order-reeb/hessian-mixed", hm.mul(&inv_n)).neg(),
            k("first-order-reeb/hessian-holomorphic", hh.mul(&inv_n)),
            k("first-order-reeb/ricci", ric.mul(&inv_n)),
            k("first-order-reeb/tanno-trace", qtr51.mul(&inv_n)).neg(),
            k("first-order-reeb/tanno-quadratic", qq.mul(&q(-1, 2 * nn))).neg(),
            k("first-order-reeb/tanno-cross", qx.mul(&inv_n)).neg(),
        ],
    ));
    // the same formula with Σ_γ R_α^β_γγ̄ in place of R_αβ̄; the two agree
    // when the curvature has the pair symmetry
    let mut ric_trace = C::zero();
    for al in 1..=n {
        for be in 1..=n {
            let mut rr = C::zero();
            for ga in 1..=n {
                rr.add_assign(&t.r[al][be][ga][b(ga)].value());
            }
            ric_trace.add_assign(&rr.mul(&u1[b(al)]).mul(&u1[be]));
        }
    }
    out.push((
        String::from("first-order-reeb-curvature-trace"),
        vec![
            reeb.clone(),
            hm.mul(&inv_n).neg(),
            hh.mul(&inv_n),
            ric_trace.mul(&inv_n),
            qtr51.mul(&inv_n).neg(),
            qq.mul(&q(-1, 2 * nn)).neg(),
            qx.mul(&inv_n).neg(),
        ],
    ));
    out.push((
        String::from("reeb-sublaplacian"),
        vec![
            reeb.clone(),
            k("reeb-sublaplacian/trace", tr2.mul(&q(2, nn))),
            k("reeb-sublaplacian/square", lap2.mul(&q(1, 2 * nn))).neg(),
            k("reeb-sublaplacian/torsion", tor.clone()),
        ],
    ));
    out.push((
        String::from("tanno-correction"),
        vec![
            g57,
            k("tanno-correction/tanno-trace", p.mul(&half_i)).neg(),
            k("tanno-correction/tanno-quadratic", qq.mul(&q(1, 4))).neg(),
            k("tanno-correction/tanno-cross", qx.mul(&q(-1, 2))).neg(),
        ],
    ));
    out.push((String::from("sublaplacian-energy"), vec![lapgrad, k("sublaplacian-energy/square", lap2.clone())]));
    out.push((String::from("gradient-energy"), vec![energy.scale(&S::from_i64(2)), k("gradient-energy/sublaplacian", u0.mul(&lap))]));
    let lap_f = sublaplacian(fr, t, &ct.norm_db)?.value();
    out.push((String::from("sublaplacian-divergence"), vec![lap_f]));
    out.push((
        String::from("integrated-bochner"),
        vec![
            hh.clone(),
            k("integrated-bochner/hessian-mixed", hm.clone()),
            k("integrated-bochner/reeb", reeb.scale(&S::from_i64(2))),
            k("integrated-bochner/torsion", tor.scale(&S::from_i64(nn))),
            k("integrated-bochner/ricci", ric.clone()),
            k("integrated-bochner/sublaplacian", lap2.mul(&q(-1, 2))),
            k("integrated-bochner/tanno-trace", p.sub(&pb).mul(&half_i)),
            k("integrated-bochner/tanno-quadratic", qq.mul(&q(-1, 4))),
        ],
    ));
    let nf = n as f64;
    for (name, c) in combination_constants(n) {
        out.push((
            name,
            vec![
                hm.mul(&r(1.0 + 2.0 * c / nf)),
                k("combination/hessian-holomorphic", hh.mul(&r(1.0 - 2.0 * c / nf))),
                k("combination/trace", tr2.mul(&r(-4.0 * (1.0 - c) / nf))),
                k("combination/square", lap2.mul(&r(-0.5 + (1.0 - c) / nf))),
                k("combination/ricci", ric.mul(&r(1.0 - 2.0 * c / nf))),
                k("combination/torsion", tor.mul(&r(nf - 2.0 * (1.0 - c)))),
                k("combination/tanno-trace", p.sub(&pb).times_i().mul(&r(0.5 - c / nf))),
                k("combination/tanno-quadratic", qq.mul(&r(-(0.25 + c / nf)))),
                k("combination/tanno-cross", qx.mul(&r(2.0 * c / nf))),
            ],
        ));
    }
    Ok(NodeIntegrands { reference, families: out })
}

/// Weighted sums of one family instance's terms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FamilySums {
    pub name: String,
    pub sums: Vec<(f64, f64)>,
    pub abs: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrialSums {
    pub reference: f64,
    pub families: Vec<FamilySums>,
}

/// Running weighted sums of integrand terms, per trial.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IntegralSums {
    pub trials: Vec<TrialSums>,
}

impl IntegralSums {
    fn add<S: Scalar>(&mut self, trial: usize, node: &NodeIntegrands<S>, w: f64) {
        if self.trials.len() <= trial {
            self.trials.resize(trial + 1, TrialSums::default());
        }
        let ts = &mut self.trials[trial];
        ts.reference += w * node.reference.to_f64();
        if ts.families.is_empty() {
            ts.families = node
                .families
                .iter()
                .map(|(name, terms)| FamilySums { name: name.clone(), sums: vec![(0.0, 0.0); terms.len()], abs: vec![0.0; terms.len()] })
                .collect();
        }
        for (f, (_, terms)) in ts.families.iter_mut().zip(&node.families) {
            for ((acc, a), t) in f.sums.iter_mut().zip(f.abs.iter_mut()).zip(terms) {
                let (re, im) = t.to_f64();
                acc.0 += w * re;
                acc.1 += w * im;
                *a += w.abs() * libm::hypot(re, im);
            }
        }
    }

    /// Adds another partial sum entry by entry.
    pub fn merge(&mut self, o: &IntegralSums) {
        if self.trials.is_empty() {
            *self = o.clone();
            return;
        }
        for (a, b) in self.trials.iter_mut().zip(&o.trials) {
            a.reference += b.reference;
            for (x, y) in a.families.iter_mut().zip(&b.families) {
                for (p, q) in x.sums.iter_mut().zip(&y.sums) {
                    p.0 += q.0;
                    p.1 += q.1;
                }
                for (p, q) in x.abs.iter_mut().zip(&y.abs) {
                    *p += q;
                }
            }
        }
    }

    /// Combines block sums by pairwise reduction with a fixed bracketing.
    pub fn pairwise(mut parts: Vec<IntegralSums>) -> IntegralSums {
        if parts.is_empty() {
            return IntegralSums::default();
        }
        while parts.len() > 1 {
            let mut next = Vec::with_capacity(parts.len().div_ceil(2));
            let mut it = parts.into_iter();
            while let Some(mut a) = it.next() {
                if let Some(b) = it.next() {
                    a.merge(&b);
                }
                next.push(a);
            }
            parts = next;
        }
        parts.pop().unwrap_or_default()
    }

    /// Per-trial reports. A family's residual is `|Σ ∫terms| / scale`
    /// with `scale = max(max_t ∫|term_t|, ∫reference)`.
    pub fn trial_reports(&self) -> Vec<Report> {
        self.trials
            .iter()
            .map(|ts| {
                let mut r = Report::new();
                for f in &ts.families {
                    let (sr, si) = f.sums.iter().fold((0.0, 0.0), |a, t| (a.0 + t.0, a.1 + t.1));
                    let scale = f.abs.iter().cloned().fold(ts.reference, f64::max);
                    let abs = libm::hypot(sr, si);
                    let res = if scale > 0.0 { abs / scale } else { abs };
                    r.raw(&f.name, res, false, abs == 0.0);
                }
                r
            })
            .collect()
    }

    /// Worst case over trials.
    pub fn report(&self) -> Report {
        let mut r = Report::new();
        for t in self.trial_reports() {
            r.merge(&t);
        }
        r
    }
}

/// One trial: a pair of test functions.
#[derive(Clone, Debug, PartialEq)]
pub struct Trial {
    pub u: ScalarField,
    pub v: ScalarField,
}

/// Frame and tables at a quadrature node.
pub fn node_geometry(model: &ContactModel, p: &[f64], tol: f64) -> Result<(Frame<f64>, Tables<f64>), Error> {
    let lay = layout_for(model);
    let fr = build_frame(model, &lay, p, FRAME_ORDER, None)?;
    let t = geometry_tables(&fr, &ConnectionOptions { tol, gamma_fault: None })?;
    Ok((fr, t))
}

/// Everything an integral run needs besides the nodes.
#[derive(Clone, Debug)]
pub struct IntegralJob<'a> {
    pub model: &'a ContactModel,
    pub trials: &'a [Trial],
    pub suites: &'a [IntegralSuite],
    pub opts: &'a TermOptions,
    pub tol: f64,
}

/// Nodes per block in [`accumulate_blocks`]; block sums are reduced
/// pairwise, so results do not depend on how blocks are scheduled.
pub const BLOCK: usize = 256;

/// Sums the integrands of every trial over `nodes`.
pub fn accumulate(job: &IntegralJob<'_>, nodes: &[(Vec<f64>, f64)]) -> Result<IntegralSums, Error> {
    let mut out = accumulate_variants(job, core::slice::from_ref(job.opts), nodes)?;
    Ok(out.pop().unwrap_or_default())
}

/// Like [`accumulate`], once per term option set, sharing the node
/// geometry and the lifted trials; `job.opts` is ignored.
pub fn accumulate_variants(job: &IntegralJob<'_>, variants: &[TermOptions], nodes: &[(Vec<f64>, f64)]) -> Result<Vec<IntegralSums>, Error> {
    let mut sums = vec![IntegralSums::default(); variants.len()];
    for (p, w) in nodes {
        let (fr, t) = node_geometry(job.model, p, job.tol)?;
        let wd = w * volume_density(&fr)?;
        for (i, tr) in job.trials.iter().enumerate() {
            let u = tr.u.lift(job.model, &fr, FRAME_ORDER + 1)?;
            let v = tr.v.lift(job.model, &fr, FRAME_ORDER + 1)?;
            for (s, opts) in sums.iter_mut().zip(variants) {
                s.add(i, &integrands(&fr, &t, &u, &v, job.suites, opts)?, wd);
            }
        }
    }
    Ok(sums)
}

/// Sequential block schedule, bit-identical to any parallel schedule over
/// the same blocks.
pub fn accumulate_blocks(job: &IntegralJob<'_>, nodes: &[(Vec<f64>, f64)]) -> Result<IntegralSums, Error> {
    let parts = nodes.chunks(BLOCK).map(|b| accumulate(job, b)).collect::<Result<Vec<_>, _>>()?;
    Ok(IntegralSums::pairwise(parts))
}

/// Checks the model and quadrature preconditions of an integral run.
pub fn integral_nodes(model: &ContactModel, spec: &QuadratureSpec, suites: &[IntegralSuite]) -> Result<Vec<(Vec<f64>, f64)>, Error> {
    if model.integration_profile() != IntegrationProfile::GaussHermiteWeighted || spec.profile != IntegrationProfile::GaussHermiteWeighted {
        return Err(Error::Precondition("integral identities need a Heisenberg-type model with gauss_hermite quadrature".into()));
    }
    if suites.contains(&IntegralSuite::Identities) && model.n < 2 {
        return Err(Error::Precondition("integral identities need n >= 2".into()));
    }
    gauss_nodes(model.dim(), spec)
}

/// Sequential driver for the integral suites; one report per trial.
pub fn check_integrals(job: &IntegralJob<'_>, spec: &QuadratureSpec) -> Result<Vec<Report>, Error> {
    let nodes = integral_nodes(job.model, spec, job.suites)?;
    Ok(accumulate_blocks(job, &nodes)?.trial_reports())
}

fn merged(reports: Vec<Report>) -> Report {
    let mut r = Report::new();
    for t in &reports {
        r.merge(t);
    }
    r
}

pub fn check_adjoint_green(model: &ContactModel, spec: &QuadratureSpec, trials: &[Trial], tol: f64) -> Result<Report, Error> {
    let opts = TermOptions::default();
    let job = IntegralJob { model, trials, suites: &[IntegralSuite::AdjointGreen], opts: &opts, tol };
    Ok(merged(check_integrals(&job, spec)?))
}

pub fn check_integral_identities(model: &ContactModel, spec: &QuadratureSpec, trials: &[Trial], opts: &TermOptions, tol: f64) -> Result<Report, Error> {
    let job = IntegralJob { model, trials, suites: &[IntegralSuite::Identities], opts, tol };
    Ok(merged(check_integrals(&job, spec)?))
}

/// Halton points in `[lo, hi]^dim`, skipping the origin-heavy first index.
pub fn halton(dim: usize, count: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    (1..=count as u64)
        .map(|i| {
            (0..dim)
                .map(|d| {
                    let base = PRIMES[d % PRIMES.len()];
                    let (mut f, mut r, mut k) = (1.0, 0.0, i);
                    while k > 0 {
                        f /= base as f64;
                        r += f * (k % base) as f64;
                        k /= base;
                    }
                    lo + (hi - lo) * r
                })
                .collect()
        })
        .collect()
}

/// Left side of the curvature condition as a real `2n × 2n` matrix on
/// `X = Σ (r_α + i r_{n+α}) W_α`.
pub fn condition_matrix<S: Scalar>(t: &Tables<S>) -> Result<Vec<Vec<f64>>, Error> {
    let n = t.n;
    if n < 2 {
        return Err(Error::Precondition("the curvature condition needs n >= 2".into()));
    }
    let nf = n as f64;
    let c2 = (2.0 * nf + 7.0) / (8.0 * (nf - 1.0));
    let c3 = 3.0 / (2.0 * (nf - 1.0));
    let form = |r: &[f64]| -> (f64, f64) {
        let x: Vec<C<S>> = (0..n).map(|a| C::new(S::from_f64(r[a]), S::from_f64(r[n + a]))).collect();
        let (q1, q2, q3, tor) = q_forms(t, &x);
        let mut ric = C::<S>::zero();
        for a in 0..n {
            for b in 0..n {
                ric.add_assign(&t.ric[a][b].value().mul(&x[a]).mul(&x[b].conj()));
            }
        }
        let (ric, q1, q2, q3, tor) = (ric.to_f64(), q1.to_f64(), q2.to_f64(), q3.to_f64(), tor.to_f64());
        let re = ric.0 - (nf + 1.0) * tor.0 + 0.5 * q1.0 - c2 * q2.0 + c3 * q3.0;
        let im = ric.1 - (nf + 1.0) * tor.1 + 0.5 * q1.1 - c2 * q2.1 + c3 * q3.1;
        (re, im)
    };
    let d = 2 * n;
    let e = |i: usize| (0..d).map(|k| if k == i { 1.0 } else { 0.0 }).collect::<Vec<_>>();
    let diag: Vec<(f64, f64)> = (0..d).map(|i| form(&e(i))).collect();
    let mut m = vec![vec![0.0; d]; d];
    let mut scale = 1.0f64;
    for i in 0..d {
        m[i][i] = diag[i].0;
        scale = scale.max(diag[i].0.abs());
        for j in 0..i {
            let s: Vec<f64> = (0..d).map(|k| if k == i || k == j { 1.0 } else { 0.0 }).collect();
            let v = 0.5 * (form(&s).0 - diag[i].0 - diag[j].0);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    // the assembled matrix must reproduce the form away from the probes
    let probe: Vec<f64> = (0..d).map(|k| 1.0 + 0.37 * k as f64).collect();
    let (val, im) = form(&probe);
    let quad: f64 = (0..d).map(|i| (0..d).map(|j| probe[i] * m[i][j] * probe[j]).sum::<f64>()).sum();
    let norm: f64 = probe.iter().map(|x| x * x).sum();
    if (val - quad).abs() > 1e-8 * scale * norm || im.abs() > 1e-8 * scale * norm {
        return Err(Error::Degenerate("curvature condition is not a real quadratic form"));
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KappaReport {
    pub kappa: f64,
    pub argmin: Vec<f64>,
    /// `max − min` of the pointwise minima, relative to `|κ|` (absolute when κ = 0).
    pub spread: f64,
    pub samples: usize,
}

/// Smallest eigenvalue of the curvature condition over the sample points.
pub fn kappa(model: &ContactModel, points: &[Vec<f64>], tol: f64) -> Result<KappaReport, Error> {
    if model.n < 2 {
        return Err(Error::Precondition("kappa needs n >= 2".into()));
    }
    if points.is_empty() {
        return Err(Error::Precondition("kappa needs sample points".into()));
    }
    let mut best = f64::INFINITY;
    let mut worst = f64::NEG_INFINITY;
    let mut argmin = points[0].clone();
    for p in points {
        let (_, t) = node_geometry(model, p, tol)?;
        let m = condition_matrix(&t)?;
        let (vals, _) = jacobi_eigen(&m);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if lo < best {
            best = lo;
            argmin = p.clone();
        }
        worst = worst.max(lo);
    }
    let spread = if best.abs() > 0.0 { (worst - best) / best.abs() } else { worst - best };
    Ok(KappaReport { kappa: best, argmin, spread, samples: points.len() })
}

/// Default sample points for `κ` on a model's chart.
pub fn default_points(model: &ContactModel, count: usize) -> Vec<Vec<f64>> {
    match model.kind {
        Kind::Sphere => halton(model.dim(), count, -1.5, 1.5),
        _ => halton(model.dim(), count, -2.0, 2.0),
    }
}

/// Real monomials of degree `≤ d` in `N` ambient variables with the last
/// exponent at most one: a basis of polynomials restricted to the sphere.
pub fn sphere_basis(ambient: usize, d: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut e = vec![0u8; ambient];
    fn rec(i: usize, left: usize, e: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        let last = e.len() - 1;
        if i == last {
            for k in 0..=left.min(1) {
                e[i] = k as u8;
                out.push(e.clone());
            }
            e[i] = 0;
            return;
        }
        for k in 0..=left {
            e[i] = k as u8;
            rec(i + 1, left - k, e, out);
        }
        e[i] = 0;
    }
    rec(0, d, &mut e, &mut out);
    out.sort_by_key(|e| (e.iter().map(|&k| k as usize).sum::<usize>(), e.clone()));
    out
}

fn horizontal_gradient_product(n: usize, a: &AmbientPoly, b: &AmbientPoly) -> AmbientPoly {
    let na = 2 * n + 2;
    let m = n + 1;
    let ga: Vec<AmbientPoly> = (0..na).map(|i| a.partial(i)).collect();
    let gb: Vec<AmbientPoly> = (0..na).map(|i| b.partial(i)).collect();
    let coord = |i: usize| {
        let mut e = vec![0u8; na];
        e[i] = 1;
        AmbientPoly::monomial(e, 1.0)
    };
    // radial and Reeb directions, x and J x = (−y, x)
    let mut ra = AmbientPoly::default();
    let mut rb = AmbientPoly::default();
    let mut ta = AmbientPoly::default();
    let mut tb = AmbientPoly::default();
    let mut dot = AmbientPoly::default();
    for i in 0..na {
        dot = dot.add(&ga[i].mul(&gb[i]));
        ra = ra.add(&coord(i).mul(&ga[i]));
        rb = rb.add(&coord(i).mul(&gb[i]));
    }
    for k in 0..m {
        let (xk, yk) = (coord(k), coord(m + k));
        ta = ta.add(&xk.mul(&ga[m + k])).add(&yk.mul(&ga[k]).scale(-1.0));
        tb = tb.add(&xk.mul(&gb[m + k])).add(&yk.mul(&gb[k]).scale(-1.0));
    }
    dot.add(&ra.mul(&rb).scale(-1.0)).add(&ta.mul(&tb).scale(-1.0))
}

/// Ratio of `2 Σ_α |u_α|²` from the frame to the Euclidean horizontal
/// gradient norm, checked to be constant over sample points and fields.
pub fn sphere_gradient_factor(model: &ContactModel, tol: f64) -> Result<f64, Error> {
    let n = model.n;
    let na = 2 * n + 2;
    let mut e1 = vec![0u8; na];
    e1[0] = 1;
    let mut e2 = vec![0u8; na];
    e2[1] = 1;
    e2[n + 1] = 2;
    let polys = [AmbientPoly::monomial(e1, 1.0), AmbientPoly::monomial(e2, 1.0).add(&AmbientPoly::monomial(vec![0; na], 0.5))];
    let mut ratios = Vec::new();
    for p in sphere_chart_sample(n) {
        let (fr, t) = node_geometry(model, &p, tol)?;
        let x = Jet::coordinates(&fr.lay, 0, &p);
        let amb: Vec<f64> = model.ambient(&x)?.iter().map(|a| *a.value()).collect();
        for poly in &polys {
            let ct = field_table(&poly.to_field()?, model, &fr, &t)?;
            let mut g = 0.0;
            for al in 1..=n {
                g += 2.0 * ct.d1[al].value().norm_sqr();
            }
            let e = horizontal_gradient_product(n, poly, poly).eval(&amb);
            if e.abs() < 1e-6 {
                continue;
            }
            ratios.push(g / e);
        }
    }
    let r0 = *ratios.first().ok_or(Error::Degenerate("no usable gradient samples"))?;
    if ratios.iter().any(|r| (r - r0).abs() > 1e-8 * r0.abs()) {
        return Err(Error::Degenerate("horizontal gradient normalization is not constant"));
    }
    Ok(r0)
}

/// Galerkin matrices `(S, M)` on the constant-deflated basis of degree `≤ d`.
pub fn galerkin_matrices(model: &ContactModel, d: usize, basis_scale: f64, tol: f64) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), Error> {
    if model.kind != Kind::Sphere {
        return Err(Error::Precondition("lambda1 needs the compact sphere model".into()));
    }
    if d < 1 {
        return Err(Error::Precondition("basis degree must be at least 1".into()));
    }
    let n = model.n;
    let na = 2 * n + 2;
    let ch = sphere_gradient_factor(model, tol)?;
    let basis: Vec<AmbientPoly> = sphere_basis(na, d).into_iter().filter(|e| e.iter().any(|&k| k > 0)).map(|e| AmbientPoly::monomial(e, basis_scale)).collect();
    let k = basis.len();
    let vol = sphere_integral(&AmbientPoly::monomial(vec![0; na], 1.0));
    let means: Vec<f64> = basis.iter().map(|b| sphere_integral(b) / vol).collect();
    let mut s = vec![vec![0.0; k]; k];
    let mut m = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..=i {
            let mij = sphere_integral(&basis[i].mul(&basis[j])) - vol * means[i] * means[j];
            let sij = ch * sphere_integral(&horizontal_gradient_product(n, &basis[i], &basis[j]));
            m[i][j] = mij;
            m[j][i] = mij;
            s[i][j] = sij;
            s[j][i] = sij;
        }
    }
    Ok((s, m))
}

/// Galerkin upper bound for the first nonzero eigenvalue of `−Δ_b`.
pub fn lambda1(model: &ContactModel, d: usize, tol: f64) -> Result<f64, Error> {
    lambda1_scaled(model, d, 1.0, tol)
}

/// As [`lambda1`] with every basis function multiplied by `basis_scale`.
pub fn lambda1_scaled(model: &ContactModel, d: usize, basis_scale: f64, tol: f64) -> Result<f64, Error> {
    let (s, m) = galerkin_matrices(model, d, basis_scale, tol)?;
    let ev = generalized_eigenvalues(&s, &m)?;
    ev.into_iter().fold(None, |a: Option<f64>, x| Some(a.map_or(x, |a| a.min(x)))).ok_or(Error::Singular)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectralStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralReport {
    pub n: usize,
    pub model: String,
    pub lambda1: Option<f64>,
    pub kappa: f64,
    pub kappa_spread: f64,
    pub bound: f64,
    pub ratio: Option<f64>,
    pub degree: usize,
    pub samples: usize,
    pub tol_spec: f64,
    pub tol_eq: f64,
    /// `|ratio − 1| ≤ tol_eq`.
    pub equality: bool,
    pub status: SpectralStatus,
    pub note: String,
}

/// Compares the Galerkin `λ₁` with the lower bound `nκ/(n+1)`.
pub fn lichnerowicz_report(model: &ContactModel, d: usize, points: &[Vec<f64>], tol_spec: f64, tol_eq: f64, tol: f64) -> Result<SpectralReport, Error> {
    let n = model.n;
    let k = kappa(model, points, tol)?;
    let bound = n as f64 * k.kappa / (n as f64 + 1.0);
    let mut rep = SpectralReport {
        n,
        model: model.name.clone(),
        lambda1: None,
        kappa: k.kappa,
        kappa_spread: k.spread,
        bound,
        ratio: None,
        degree: d,
        samples: k.samples,
        tol_spec,
        tol_eq,
        equality: false,
        status: SpectralStatus::NotApplicable,
        note: String::new(),
    };
    if k.kappa <= 1e-12 {
        rep.note = String::from("kappa is not positive");
        return Ok(rep);
    }
    if model.kind != Kind::Sphere {
        rep.note = String::from("lambda1 needs a compact model");
        return Ok(rep);
    }
    let l = lambda1(model, d, tol)?;
    let ratio = l / bound;
    rep.lambda1 = Some(l);
    rep.ratio = Some(ratio);
    rep.equality = (ratio - 1.0).abs() <= tol_eq;
    rep.status = if ratio >= 1.0 - tol_spec { SpectralStatus::Pass } else { SpectralStatus::Fail };
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{ratio, Exact};

    #[test]
    fn heisenberg_density_is_constant_and_matches_frame_form() {
        let m = ContactModel::heisenberg(2).unwrap();
        let lay = Layout::new(5, 4);
        let mut seen = None;
        for p in [[0, 0, 0, 0, 0], [1, -2, 3, 1, 5]] {
            let p: Vec<Exact> = p.iter().map(|&x| Exact::from_i64(x)).collect();
            let fr = build_frame(&m, &lay, &p, 2, None).unwrap();
            let d = volume_density(&fr).unwrap();
            assert_eq!(d, Exact::from_i64(8));
            assert!(check_volume_form(&fr).unwrap().passes(0.0));
            if let Some(s) = &seen {
                assert_eq!(&d, s);
            }
            seen = Some(d);
        }
    }

    #[test]
    fn scaling_theta_scales_density() {
        let p = [0.3, -0.1, 0.7, 0.2, 1.1];
        let a = density_at(&ContactModel::heisenberg(2).unwrap(), &p).unwrap();
        let b = density_at(&ContactModel::heisenberg(2).unwrap().with_scale(ratio(2, 1)), &p).unwrap();
        assert!((b / a - 8.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_hermite_integrates_gaussian_exactly() {
        let m = ContactModel::heisenberg(2).unwrap();
        let spec = QuadratureSpec { gauss_c: 2.0, ..QuadratureSpec::gauss_hermite(4) };
        let got = integrate(&m, &spec, |p| Ok(libm::exp(-2.0 * p.iter().map(|x| x * x).sum::<f64>()))).unwrap();
        let rho = density_at(&m, &[0.0; 5]).unwrap();
        let want = rho * libm::pow(core::f64::consts::PI / 2.0, 2.5);
        assert!((got - want).abs() <= 1e-12 * want);
        assert_eq!(integrate(&m, &spec, |_| Ok(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn sphere_coordinate_square_is_volume_share() {
        let m = ContactModel::sphere(2).unwrap();
        let vol = integrate_sphere_poly(&m, &AmbientPoly::monomial(vec![0; 6], 1.0)).unwrap();
        let x2 = integrate_sphere_poly(&m, &AmbientPoly::monomial(vec![2, 0, 0, 0, 0, 0], 1.0)).unwrap();
        assert!((x2 - vol / 6.0).abs() < 1e-13 * vol);
        assert!(vol > 0.0);
    }

    #[test]
    fn sphere_basis_has_harmonic_dimension() {
        // dim of polynomials of degree ≤ 2 on S^5: 1 + 6 + 20
        assert_eq!(sphere_basis(6, 2).len(), 27);
    }

    fn linear_trial(dim: usize) -> Vec<Trial> {
        let u = enveloped(vec![(ratio(1, 1), vec![1, 0, 0, 0, 0]), (ratio(-1, 2), vec![0, 0, 0, 1, 0]), (ratio(1, 3), vec![0, 0, 0, 0, 0])], dim);
        let v = enveloped(vec![(ratio(2, 1), vec![1, 0, 0, 0, 0]), (ratio(1, 1), vec![0, 0, 0, 1, 1])], dim);
        vec![Trial { u, v }]
    }

    #[test]
    fn integral_identities_hold_on_heisenberg() {
        let m = ContactModel::heisenberg(2).unwrap();
        let trials = linear_trial(5);
        let spec = QuadratureSpec::gauss_hermite(4);
        let rep = check_adjoint_green(&m, &spec, &trials, 1e-9).unwrap();
        assert!(rep.passes(1e-12), "{rep:?}");
        let rep = check_integral_identities(&m, &spec, &trials, &TermOptions::default(), 1e-9).unwrap();
        assert!(rep.passes(1e-12), "{rep:?}");
        let mut bumped = TermOptions::default();
        bumped.scale.push(("green/gradient".into(), ratio(1001, 1000)));
        let rep = check_integrals(&IntegralJob { model: &m, trials: &trials, suites: &[IntegralSuite::AdjointGreen], opts: &bumped, tol: 1e-9 }, &spec).unwrap();
        assert!(rep[0].get("green").unwrap().residual > 1e-5);
    }

    #[test]
    fn block_schedule_matches_one_pass_closely() {
        let m = ContactModel::heisenberg(2).unwrap();
        let trials = linear_trial(5);
        let opts = TermOptions::default();
        let job = IntegralJob { model: &m, trials: &trials, suites: &[IntegralSuite::AdjointGreen], opts: &opts, tol: 1e-9 };
        let nodes = gauss_nodes(5, &QuadratureSpec::gauss_hermite(3)).unwrap();
        let a = accumulate(&job, &nodes).unwrap();
        let b = accumulate_blocks(&job, &nodes).unwrap();
        let (x, y) = (a.trials[0].reference, b.trials[0].reference);
        assert!((x - y).abs() <= 1e-12 * x);
        assert_eq!(b, accumulate_blocks(&job, &nodes).unwrap());
    }

    #[test]
    fn profile_axes_get_their_own_order() {
        let m = ContactModel::perturbed_heisenberg(2, ratio(1, 10), ContactModel::default_profile(2), ContactModel::default_shear(2)).unwrap();
        let q = QuadratureSpec::for_model(&m, 3, 5);
        assert_eq!((0..5).map(|a| q.axis_order(a)).collect::<Vec<_>>(), vec![5, 3, 3, 3, 5]);
        assert_eq!(gauss_nodes(5, &q).unwrap().len(), 5 * 5 * 27);
        assert_eq!(QuadratureSpec::for_model(&ContactModel::heisenberg(2).unwrap(), 3, 5).axis_orders, vec![]);
    }

    #[test]
    fn heisenberg_kappa_vanishes() {
        let m = ContactModel::heisenberg(2).unwrap();
        let k = kappa(&m, &default_points(&m, 5), 1e-9).unwrap();
        assert!(k.kappa.abs() < 1e-12);
    }

    #[test]
    fn sphere_spectral_bound_is_sharp() {
        let m = ContactModel::sphere(2).unwrap();
        let rep = lichnerowicz_report(&m, 1, &default_points(&m, 10), 1e-6, 1e-6, 1e-9).unwrap();
        assert_eq!(rep.status, SpectralStatus::Pass, "{rep:?}");
        assert!(rep.equality, "{rep:?}");
    }
}
