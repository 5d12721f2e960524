//! Covariant derivatives of scalar fields, the sub-Laplacian, commutation
//! formulae and the Bochner-type formula.
//!
//! All derivative tables are indexed by full frame indices (see
//! [`crate::geometry::bar`]): `d2[j][k]` is `u_jk = W_j(u_k) − Γ_jk^l u_l`
//! and `d3[a][b][c]` is `u_abc = W_a(u_bc) − Γ_ab^d u_dc − Γ_ac^d u_bd`.
//! Identities are checked in the general form, so no vanishing of
//! connection coefficients is assumed anywhere.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::BigRational;

use crate::connection::Tables;
use crate::geometry::{bar, ContactModel, Frame};
use crate::jets::{CJet, Expr, Jet};
use crate::report::Report;
use crate::scalar::{Scalar, C};
use crate::Error;

/// Minimum jet order of a scalar field for third covariant derivatives.
pub const MIN_FIELD_ORDER: usize = 3;

/// A real scalar field given by a closed-form expression over the chart
/// (or over the ambient coordinates through [`Expr::Amb`] and [`Expr::Poly`]).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub expr: Expr,
}

impl ScalarField {
    pub fn new(expr: Expr) -> Self {
        ScalarField { expr }
    }

    /// Polynomial in the ambient coordinates, `Σ coef · Π amb_i^{e_i}`.
    pub fn polynomial(terms: Vec<(BigRational, Vec<u8>)>) -> Self {
        ScalarField { expr: Expr::Poly(terms) }
    }

    /// Expansion of order `order` at the frame point.
    pub fn lift<S: Scalar>(&self, model: &ContactModel, fr: &Frame<S>, order: usize) -> Result<CJet<S>, Error> {
        let x = Jet::coordinates(&fr.lay, order, &fr.point);
        let amb = model.ambient(&x)?;
        Ok(CJet::real(self.expr.lift(&x, &amb)?))
    }
}

/// What a term of an identity contributes. `Tanno` and `Torsion` terms can
/// be switched off together; any term can be rescaled individually.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermKind {
    Plain,
    Tanno,
    Torsion,
}

/// Every named term of every checked formula.
pub const FORMULA_TERMS: &[(&str, TermKind)] = &[
    ("second-order-torsion/torsion", TermKind::Plain),
    ("sd-mixed/reeb", TermKind::Plain),
    ("sd-reeb/torsion", TermKind::Torsion),
    ("inner-mixed/reeb", TermKind::Plain),
    ("outer-mixed/reeb", TermKind::Plain),
    ("outer-mixed/curvature", TermKind::Plain),
    ("outer-mixed/tanno", TermKind::Tanno),
    ("outer-antiholomorphic/torsion", TermKind::Torsion),
    ("outer-antiholomorphic/tanno", TermKind::Tanno),
    ("outer-antiholomorphic/tanno-quadratic", TermKind::Tanno),
    ("outer-antiholomorphic-curvature/curvature", TermKind::Plain),
    ("outer-antiholomorphic-curvature/tanno-quadratic", TermKind::Tanno),
    ("bochner/hessian", TermKind::Plain),
    ("bochner/reeb", TermKind::Plain),
    ("bochner/torsion", TermKind::Torsion),
    ("bochner/ricci", TermKind::Plain),
    ("bochner/sublaplacian", TermKind::Plain),
    ("bochner/tanno-trace", TermKind::Tanno),
    ("bochner/tanno-quadratic", TermKind::Tanno),
    ("bochner-split/hessian", TermKind::Plain),
    ("bochner-split/third-order", TermKind::Plain),
    ("first-order-reeb/hessian-mixed", TermKind::Plain),
    ("first-order-reeb/hessian-holomorphic", TermKind::Plain),
    ("first-order-reeb/ricci", TermKind::Plain),
    ("first-order-reeb/tanno-trace", TermKind::Tanno),
    ("first-order-reeb/tanno-quadratic", TermKind::Tanno),
    ("first-order-reeb/tanno-cross", TermKind::Tanno),
    ("reeb-sublaplacian/trace", TermKind::Plain),
    ("reeb-sublaplacian/square", TermKind::Plain),
    ("reeb-sublaplacian/torsion", TermKind::Torsion),
    ("tanno-correction/tanno-trace", TermKind::Tanno),
    ("tanno-correction/tanno-quadratic", TermKind::Tanno),
    ("tanno-correction/tanno-cross", TermKind::Tanno),
    ("adjoint-horizontal/adjoint", TermKind::Plain),
    ("adjoint-horizontal/connection", TermKind::Plain),
    ("adjoint-reeb/adjoint", TermKind::Plain),
    ("green/gradient", TermKind::Plain),
    ("sublaplacian-energy/square", TermKind::Plain),
    ("gradient-energy/sublaplacian", TermKind::Plain),
    ("integrated-bochner/hessian-mixed", TermKind::Plain),
    ("integrated-bochner/reeb", TermKind::Plain),
    ("integrated-bochner/torsion", TermKind::Torsion),
    ("integrated-bochner/ricci", TermKind::Plain),
    ("integrated-bochner/sublaplacian", TermKind::Plain),
    ("integrated-bochner/tanno-trace", TermKind::Tanno),
    ("integrated-bochner/tanno-quadratic", TermKind::Tanno),
    ("combination/hessian-holomorphic", TermKind::Plain),
    ("combination/trace", TermKind::Plain),
    ("combination/square", TermKind::Plain),
    ("combination/ricci", TermKind::Plain),
    ("combination/torsion", TermKind::Torsion),
    ("combination/tanno-trace", TermKind::Tanno),
    ("combination/tanno-quadratic", TermKind::Tanno),
    ("combination/tanno-cross", TermKind::Tanno),
];

/// Term switches: ablations and single-term corruptions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TermOptions {
    pub drop_tanno: bool,
    pub drop_torsion: bool,
    /// Multiplies the named term by the factor.
    pub scale: Vec<(String, BigRational)>,
}

impl TermOptions {
    pub fn ablate_tanno() -> Self {
        TermOptions { drop_tanno: true, ..Default::default() }
    }

    /// Coefficient of a named term.
    pub fn k<S: Scalar>(&self, id: &str) -> S {
        let kind = FORMULA_TERMS.iter().find(|(n, _)| *n == id).map(|&(_, k)| k).unwrap_or(TermKind::Plain);
        let dropped = match kind {
            TermKind::Tanno => self.drop_tanno,
            TermKind::Torsion => self.drop_torsion,
            TermKind::Plain => false,
        };
        if dropped {
            return S::zero();
        }
        let mut k = S::one();
        for (n, f) in &self.scale {
            if n == id {
                k = k.mul_ref(&S::from_rational(f));
            }
        }
        k
    }

    fn term<S: Scalar>(&self, id: &str, v: C<S>) -> C<S> {
        v.scale(&self.k::<S>(id))
    }
}

/// Covariant derivatives of `u` at one point.
#[derive(Clone, Debug)]
pub struct CovariantTable<S> {
    pub n: usize,
    pub point: Vec<S>,
    pub u0: S,
    /// `u_j`, one order below the field.
    pub d1: Vec<CJet<S>>,
    /// `u_jk`, two orders below the field.
    pub d2: Vec<Vec<CJet<S>>>,
    /// `u_jkl`, three orders below the field.
    pub d3: Vec<Vec<Vec<CJet<S>>>>,
    /// `Δ_b u = Σ_α (u_αᾱ + u_ᾱα)` as a jet.
    pub sublap: CJet<S>,
    /// Frame components of `∇_H u = u_ᾱ W_α + u_α W_ᾱ`.
    pub grad_h: Vec<C<S>>,
    /// `X^α` of `∂_b u = X^α W_α`, zero-based.
    pub db: Vec<C<S>>,
    /// `‖∂_b u‖² = Σ_λ u_λ u_λ̄` as a jet.
    pub norm_db: CJet<S>,
}

fn second<S: Scalar>(fr: &Frame<S>, t: &Tables<S>, d1: &[CJet<S>]) -> Result<Vec<Vec<CJet<S>>>, Error> {
    let dim = fr.dim();
    let mut d2 = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut row = Vec::with_capacity(dim);
        for k in 0..dim {
            let mut s = fr.deriv(j, &d1[k])?;
            for (l, ul) in d1.iter().enumerate() {
                if !t.gamma[j][k][l].is_zero() {
                    s.mul_sub_assign(&t.gamma[j][k][l], ul);
                }
            }
            row.push(s);
        }
        d2.push(row);
    }
    Ok(d2)
}

/// Second covariant derivatives of a derived scalar field given as a jet.
pub fn hessian<S: Scalar>(fr: &Frame<S>, t: &Tables<S>, f: &CJet<S>) -> Result<Vec<Vec<CJet<S>>>, Error> {
    let d1 = fr.derivs(f)?;
    second(fr, t, &d1)
}

/// `Δ_b f` of a jet `f` of order at least 2, as a jet two orders lower.
pub fn sublaplacian<S: Scalar>(fr: &Frame<S>, t: &Tables<S>, f: &CJet<S>) -> Result<CJet<S>, Error> {
    let d2 = hessian(fr, t, f)?;
    Ok(trace(fr.n, &d2))
}

fn trace<S: Scalar>(n: usize, d2: &[Vec<CJet<S>>]) -> CJet<S> {
    let mut s = d2[1][bar(n, 1)].add(&d2[bar(n, 1)][1]);
    for a in 2..=n {
        s.add_assign(&d2[a][bar(n, a)]);
        s.add_assign(&d2[bar(n, a)][a]);
    }
    s
}

/// Builds the derivative table of `u` (a real field lifted to order ≥ 3).
pub fn covariant_table<S: Scalar>(u: &CJet<S>, fr: &Frame<S>, t: &Tables<S>) -> Result<CovariantTable<S>, Error> {
    if u.order() < MIN_FIELD_ORDER {
        return Err(Error::InsufficientOrder { needed: MIN_FIELD_ORDER, got: u.order() });
    }
    if fr.order < 2 {
        return Err(Error::InsufficientOrder { needed: 2, got: fr.order });
    }
    let n = fr.n;
    let dim = fr.dim();
    let d1 = fr.derivs(u)?;
    let d2 = second(fr, t, &d1)?;
    let mut d3 = Vec::with_capacity(dim);
    for a in 0..dim {
        let mut plane = Vec::with_capacity(dim);
        for b in 0..dim {
            let mut row = Vec::with_capacity(dim);
            for c in 0..dim {
                let mut s = fr.deriv(a, &d2[b][c])?;
                for d in 0..dim {
                    if !t.gamma[a][b][d].is_zero() {
                        s.mul_sub_assign(&t.gamma[a][b][d], &d2[d][c]);
                    }
                    if !t.gamma[a][c][d].is_zero() {
                        s.mul_sub_assign(&t.gamma[a][c][d], &d2[b][d]);
                    }
                }
                row.push(s);
            }
            plane.push(row);
        }
        d3.push(plane);
    }
    let sublap = trace(n, &d2);
    let mut grad_h = vec![C::zero(); dim];
    for (j, g) in grad_h.iter_mut().enumerate().skip(1) {
        *g = d1[bar(n, j)].value();
    }
    let db = (1..=n).map(|a| d1[bar(n, a)].value()).collect();
    let mut norm_db = d1[1].mul(&d1[bar(n, 1)]);
    for l in 2..=n {
        norm_db.mul_add_assign(&d1[l], &d1[bar(n, l)]);
    }
    Ok(CovariantTable { n, point: fr.point.clone(), u0: u.re.value().clone(), d1, d2, d3, sublap, grad_h, db, norm_db })
}

/// Lifts `u` and builds its table at the frame point.
pub fn field_table<S: Scalar>(u: &ScalarField, model: &ContactModel, fr: &Frame<S>, t: &Tables<S>) -> Result<CovariantTable<S>, Error> {
    let lifted = u.lift(model, fr, fr.order + 1)?;
    covariant_table(&lifted, fr, t)
}

struct Values<S> {
    u1: Vec<C<S>>,
    u2: Vec<Vec<C<S>>>,
    u3: Vec<Vec<Vec<C<S>>>>,
    /// `(Δ_b u)_j`
    lap1: Vec<C<S>>,
}

fn values<S: Scalar>(ct: &CovariantTable<S>, fr: &Frame<S>) -> Result<Values<S>, Error> {
    let u1 = ct.d1.iter().map(CJet::value).collect();
    let u2 = ct.d2.iter().map(|r| r.iter().map(CJet::value).collect()).collect();
    let u3 = ct.d3.iter().map(|p| p.iter().map(|r| r.iter().map(CJet::value).collect()).collect()).collect();
    let lap1 = fr.derivs(&ct.sublap)?.iter().map(CJet::value).collect();
    Ok(Values { u1, u2, u3, lap1 })
}

fn two_i<S: Scalar>() -> C<S> {
    C::new(S::zero(), S::from_i64(2))
}

fn half_i<S: Scalar>() -> C<S> {
    C::new(S::zero(), S::from_ratio(1, 2))
}

fn real<S: Scalar>(num: i64, den: i64) -> C<S> {
    C::real(S::from_ratio(num, den))
}

/// Commutation identities of second and third covariant derivatives.
pub fn check_commutations<S: Scalar>(ct: &CovariantTable<S>, fr: &Frame<S>, t: &Tables<S>, opts: &TermOptions) -> Result<Report, Error> {
    let n = fr.n;
    let dim = fr.dim();
    let v = values(ct, fr)?;
    let (u1, u2, u3) = (&v.u1, &v.u2, &v.u3);
    let b = |j: usize| bar(n, j);
    let gv = |j: usize, k: usize, l: usize| t.gamma[j][k][l].value();
    let qv = |j: usize, k: usize, l: usize| t.q[j][k][l].value();
    let qdv = |j: usize, k: usize, s: usize, l: usize| t.qd[j][k][s][l].value();
    let av = |a: usize, c: usize| t.a[a - 1][c - 1].value();
    let rv = |a: usize, c: usize, d: usize, e: usize| t.r[a][c][d][e].value();
    let mut r = Report::new();

    for i in 0..dim {
        for j in 0..dim {
            let mut tau = C::zero();
            for l in 0..dim {
                let tl = gv(i, j, l).sub(&gv(j, i, l)).sub(&fr.c[i][j][l].value());
                tau.mul_add_assign(&tl, &u1[l]);
            }
            r.identity("second-order-torsion", &[u2[i][j].clone(), u2[j][i].neg(), opts.term("second-order-torsion/torsion", tau)]);
        }
    }

    for al in 1..=n {
        for be in 1..=n {
            let d = if al == be { two_i::<S>().mul(&u1[0]) } else { C::zero() };
            r.identity("sd-mixed", &[u2[al][b(be)].clone(), u2[b(be)][al].neg(), opts.term("sd-mixed/reeb", d).neg()]);
            r.equal("sd-symmetric", &u2[al][be], &u2[be][al]);
        }
        let mut tor = C::zero();
        for be in 1..=n {
            tor.mul_add_assign(&av(al, be), &u1[b(be)]);
        }
        r.identity("sd-reeb", &[u2[0][al].clone(), u2[al][0].neg(), opts.term("sd-reeb/torsion", tor)]);
    }

    for al in 1..=n {
        for be in 1..=n {
            for ga in 1..=n {
                r.equal("inner-holomorphic", &u3[b(al)][be][ga], &u3[b(al)][ga][be]);
                let d = if ga == be { two_i::<S>().mul(&u2[al][0]) } else { C::zero() };
                r.identity("inner-mixed", &[u3[al][b(be)][ga].clone(), u3[al][ga][b(be)].neg(), opts.term("inner-mixed/reeb", d)]);
            }
        }
    }

    for rh in 1..=n {
        for ga in 1..=n {
            for al in 1..=n {
                let (rb, gb) = (b(rh), b(ga));
                let reeb = if ga == rh { two_i::<S>().mul(&u2[0][al]) } else { C::zero() };
                let mut curv = C::zero();
                let mut tq = C::zero();
                for be in 1..=n {
                    curv.mul_add_assign(&u1[be], &rv(al, be, ga, rb));
                    tq.mul_add_assign(&qdv(al, ga, rb, b(be)), &u1[b(be)]);
                }
                r.identity(
                    "outer-mixed",
                    &[
                        u3[rb][ga][al].clone(),
                        u3[ga][rb][al].neg(),
                        opts.term("outer-mixed/reeb", reeb),
                        opts.term("outer-mixed/curvature", curv).neg(),
                        opts.term("outer-mixed/tanno", tq.mul(&half_i())).neg(),
                    ],
                );

                let mut tor = C::zero();
                let mut tq = C::zero();
                let mut qq = C::zero();
                let mut curv = C::zero();
                let mut qq2 = C::zero();
                for be in 1..=n {
                    let mut coef = C::zero();
                    if al == rh {
                        coef.add_assign(&av(ga, be).conj());
                    }
                    if al == ga {
                        coef.sub_assign(&av(rh, be).conj());
                    }
                    tor.mul_add_assign(&coef, &u1[be]);
                    tq.mul_add_assign(&qdv(rb, b(be), al, ga), &u1[be]);
                    curv.mul_add_assign(&u1[be], &rv(al, be, gb, rb));
                    for mu in 1..=n {
                        let p = qv(al, be, b(mu)).mul(&qv(rb, b(be), ga)).mul(&u1[b(mu)]);
                        qq.add_assign(&p);
                        qq2.add_assign(&p);
                    }
                }
                r.identity(
                    "outer-antiholomorphic",
                    &[
                        u3[rb][gb][al].clone(),
                        u3[gb][rb][al].neg(),
                        opts.term("outer-antiholomorphic/torsion", tor.mul(&two_i())).neg(),
                        opts.term("outer-antiholomorphic/tanno", tq.mul(&half_i())),
                        opts.term("outer-antiholomorphic/tanno-quadratic", qq.mul(&real(1, 4))),
                    ],
                );
                r.identity(
                    "outer-antiholomorphic-curvature",
                    &[
                        u3[gb][rb][al].clone(),
                        u3[rb][gb][al].neg(),
                        opts.term("outer-antiholomorphic-curvature/curvature", curv),
                        opts.term("outer-antiholomorphic-curvature/tanno-quadratic", qq2.mul(&real(1, 4))).neg(),
                    ],
                );
            }
        }
    }

    for j in 0..dim {
        let mut s = C::zero();
        for be in 1..=n {
            s.add_assign(&u3[j][be][b(be)]);
            s.add_assign(&u3[j][b(be)][be]);
        }
        r.equal("sublaplacian-gradient", &v.lap1[j], &s);
    }

    for j in 0..dim {
        r.equal("conjugation-mirror", &u1[j].conj(), &u1[b(j)]);
        for k in 0..dim {
            r.equal("conjugation-mirror", &u2[j][k].conj(), &u2[b(j)][b(k)]);
            for l in 0..dim {
                r.equal("conjugation-mirror", &u3[j][k][l].conj(), &u3[b(j)][b(k)][b(l)]);
            }
        }
    }
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BochnerForm {
    /// Frame components with every term spelled out.
    Frame,
    /// Tensorial statement through `‖∇²u‖²`, `Tor`, `Ric`, `Q₁`, `Q₂`.
    Invariant,
    /// The frame form with every Tanno-tensor term deleted.
    CrTruncated,
}

/// Left side `Δ_b ‖∂_b u‖²`.
pub fn bochner_lhs<S: Scalar>(ct: &CovariantTable<S>, fr: &Frame<S>, t: &Tables<S>) -> Result<C<S>, Error> {
    Ok(sublaplacian(fr, t, &ct.norm_db)?.value())
}

/// Frame-form terms, in the order hessian, reeb, torsion, ricci,
/// sublaplacian, tanno-trace, tanno-quadratic.
fn frame_terms<S: Scalar>(v: &Values<S>, t: &Tables<S>) -> [C<S>; 7] {
    let n = t.n;
    let b = |j: usize| bar(n, j);
    let (u1, u2) = (&v.u1, &v.u2);
    let qv = |j: usize, k: usize, l: usize| t.q[j][k][l].value();
    let qdv = |j: usize, k: usize, s: usize, l: usize| t.qd[j][k][s][l].value();
    let mut hess = C::zero();
    let mut reeb = C::zero();
    let mut tor = C::zero();
    let mut ric = C::zero();
    let mut lap = C::zero();
    let mut qtr = C::zero();
    let mut qq = C::zero();
    for al in 1..=n {
        for la in 1..=n {
            hess.mul_add_assign(&u2[al][la], &u2[b(al)][b(la)]);
            hess.mul_add_assign(&u2[al][b(la)], &u2[b(al)][la]);
        }
        reeb.mul_add_assign(&u1[al], &u2[0][b(al)]);
        reeb.sub_assign(&u1[b(al)].mul(&u2[0][al]));
        lap.mul_add_assign(&u1[al], &v.lap1[b(al)]);
        lap.mul_add_assign(&u1[b(al)], &v.lap1[al]);
        for be in 1..=n {
            let a = t.a[al - 1][be - 1].value();
            tor.add_assign(&a.conj().mul(&u1[al]).mul(&u1[be]));
            tor.sub_assign(&a.mul(&u1[b(al)]).mul(&u1[b(be)]));
            ric.add_assign(&t.ric[al - 1][be - 1].value().mul(&u1[b(al)]).mul(&u1[be]));
            for ga in 1..=n {
                qtr.add_assign(&qdv(b(al), b(be), ga, ga).mul(&u1[al]).mul(&u1[be]));
                qtr.sub_assign(&qdv(al, be, b(ga), b(ga)).mul(&u1[b(al)]).mul(&u1[b(be)]));
                for rh in 1..=n {
                    qq.add_assign(&qv(al, ga, b(rh)).mul(&qv(b(be), b(ga), rh)).mul(&u1[b(al)]).mul(&u1[be]));
                }
            }
        }
    }
    [
        hess.scale(&S::from_i64(2)),
        reeb.mul(&C::new(S::zero(), S::from_i64(4))),
        tor.mul(&C::new(S::zero(), S::from_i64(2 * n as i64))),
        ric.scale(&S::from_i64(2)),
        lap,
        qtr.times_i(),
        qq.scale(&S::from_ratio(-1, 2)),
    ]
}

const BOCHNER_IDS: [&str; 7] = [
    "bochner/hessian",
    "bochner/reeb",
    "bochner/torsion",
    "bochner/ricci",
    "bochner/sublaplacian",
    "bochner/tanno-trace",
    "bochner/tanno-quadratic",
];

/// The same seven quantities computed from their tensorial definitions.
fn invariant_terms<S: Scalar>(ct: &CovariantTable<S>, v: &Values<S>, t: &Tables<S>) -> [C<S>; 7] {
    let n = t.n;
    let dim = 2 * n + 1;
    let b = |j: usize| bar(n, j);
    let u2 = &v.u2;
    let x = &ct.db;
    let xc: Vec<C<S>> = x.iter().map(C::conj).collect();

    // ‖∇²u‖² as half the h-norm of the horizontal Hessian
    let mut frob = C::zero();
    for a in 1..dim {
        for c in 1..dim {
            frob.mul_add_assign(&u2[a][c], &u2[b(a)][b(c)]);
        }
    }
    let norm_hess = frob.scale(&S::from_ratio(1, 2));

    // ∇²u(T, J∇_H u)
    let g = &ct.grad_h;
    let mut jg = vec![C::zero(); dim];
    for (l, gl) in g.iter().enumerate() {
        for (m, jm) in jg.iter_mut().enumerate() {
            jm.mul_add_assign(gl, &t.jf[l][m].value());
        }
    }
    let mut hess_tj = C::zero();
    for m in 0..dim {
        hess_tj.mul_add_assign(&u2[0][m], &jg[m]);
    }

    let two_re = |z: C<S>| z.add(&z.conj());

    let mut htx = C::zero();
    for al in 1..=n {
        for be in 1..=n {
            htx.add_assign(&x[al - 1].mul(&t.tau[al][b(be)].value()).mul(&x[be - 1]));
        }
    }
    let tor = two_re(htx.times_i());

    let mut ric = C::zero();
    for al in 1..=n {
        for be in 1..=n {
            ric.add_assign(&t.ric[al - 1][be - 1].value().mul(&x[al - 1]).mul(&xc[be - 1]));
        }
    }

    let mut hgrad = C::zero();
    for l in 1..dim {
        hgrad.mul_add_assign(&g[l], &v.lap1[l]);
    }

    let mut tr = C::zero();
    for al in 1..=n {
        for be in 1..=n {
            let xx = x[al - 1].mul(&x[be - 1]);
            for j in 0..dim {
                tr.add_assign(&t.qd[al][be][j][j].value().mul(&xx));
            }
        }
    }
    let q1 = two_re(tr.times_i()).neg();

    let mut q2 = C::zero();
    for k in 0..dim {
        for i in 0..dim {
            let mut qx = C::zero();
            let mut qxb = C::zero();
            for al in 1..=n {
                qx.mul_add_assign(&x[al - 1], &t.q[al][k][i].value());
                qxb.mul_add_assign(&xc[al - 1], &t.q[b(al)][b(k)][b(i)].value());
            }
            q2.mul_add_assign(&qx, &qxb);
        }
    }

    [
        norm_hess.scale(&S::from_i64(2)),
        hess_tj.scale(&S::from_i64(-4)),
        tor.scale(&S::from_i64(-2 * n as i64)),
        ric.scale(&S::from_i64(2)),
        hgrad,
        q1,
        q2.scale(&S::from_ratio(-1, 2)),
    ]
}

fn weighted<S: Scalar>(opts: &TermOptions, terms: &[C<S>; 7], keep_tanno: bool) -> C<S> {
    let mut s = C::zero();
    for (i, (id, v)) in BOCHNER_IDS.iter().zip(terms).enumerate() {
        if !keep_tanno && i >= 5 {
            continue;
        }
        s.add_assign(&opts.term(id, v.clone()));
    }
    s
}

/// `LHS − RHS` of the Bochner-type formula in the chosen form.
pub fn bochner_residual<S: Scalar>(ct: &CovariantTable<S>, fr: &Frame<S>, t: &Tables<S>, form: BochnerForm, opts: &TermOptions) -> Result<C<S>, Error> {
    let v = values(ct, fr)?;
    let lhs = bochner_lhs(ct, fr, t)?;
    let rhs = match form {
        BochnerForm::Frame => weighted(opts, &frame_terms(&v, t), true),
        BochnerForm::CrTruncated => weighted(opts, &frame_terms(&v, t), false),
        BochnerForm::Invariant => weighted(opts, &invariant_terms(ct, &v, t), true),
    };
    Ok(lhs.sub(&rhs))
}

/// Every Bochner-related family at one point.
pub fn check_bochner<S: Scalar>(ct: &CovariantTable<S>, fr: &Frame<S>, t: &Tables<S>, opts: &TermOptions) -> Result<Report, Error> {
    let n = fr.n;
    let b = |j: usize| bar(n, j);
    let v = values(ct, fr)?;
    let lhs = bochner_lhs(ct, fr, t)?;
    let ft = frame_terms(&v, t);
    let it = invariant_terms(ct, &v, t);
    let mut r = Report::new();

    let mut frame: Vec<C<S>> = vec![lhs.clone()];
    frame.extend(BOCHNER_IDS.iter().zip(&ft).map(|(id, x)| opts.term(id, x.clone()).neg()));
    r.identity("bochner-frame", &frame);

    let mut inv: Vec<C<S>> = vec![lhs.clone()];
    inv.extend(BOCHNER_IDS.iter().zip(&it).map(|(id, x)| opts.term(id, x.clone()).neg()));
    r.identity("bochner-invariant", &inv);

    // both sides are residuals, so scale by the terms they were formed from
    let scale = core::iter::once(&lhs).chain(&ft).chain(&it).map(C::abs_f64).fold(1.0, f64::max);
    let rf = lhs.sub(&weighted(opts, &ft, true));
    let ri = lhs.sub(&weighted(opts, &it, true));
    r.record("bochner-forms-agree", &rf.sub(&ri), scale);

    // the truncated residual is the frame residual plus the deleted terms
    let rt = lhs.sub(&weighted(opts, &ft, false));
    let dropped = opts.term(BOCHNER_IDS[5], ft[5].clone()).add(&opts.term(BOCHNER_IDS[6], ft[6].clone()));
    r.record("bochner-truncation-accounting", &rt.sub(&rf).sub(&dropped), scale);

    let u1 = &v.u1;
    let u3 = &v.u3;
    let mut s2 = C::zero();
    for la in 1..=n {
        for al in 1..=n {
            s2.mul_add_assign(&u1[b(la)], &u3[al][b(al)][la]);
            s2.mul_add_assign(&u1[la], &u3[al][b(al)][b(la)]);
            s2.mul_add_assign(&u1[la], &u3[b(al)][al][b(la)]);
            s2.mul_add_assign(&u1[b(la)], &u3[b(al)][al][la]);
        }
    }
    r.identity(
        "bochner-split",
        &[lhs, opts.term("bochner-split/hessian", ft[0].clone()).neg(), opts.term("bochner-split/third-order", s2).neg()],
    );

    // Σ|u_αβ̄|² ≥ (1/n)|Σ u_αᾱ|²
    let mut sq = S::zero();
    let mut tr = C::zero();
    for al in 1..=n {
        for be in 1..=n {
            sq.add_assign_ref(&v.u2[al][b(be)].norm_sqr());
        }
        tr.add_assign(&v.u2[al][b(al)]);
    }
    let gap = sq.sub_ref(&tr.norm_sqr().mul_ref(&S::from_ratio(1, n as i64)));
    let deficit = if gap.is_positive() || gap.is_zero() { S::zero() } else { gap };
    r.record("hessian-trace-inequality", &C::real(deficit), sq.to_f64().abs());

    let nd = ct.norm_db.value();
    let neg = if nd.re.is_positive() || nd.re.is_zero() { S::zero() } else { nd.re.clone() };
    r.zero("gradient-norm-real", &C::new(S::zero(), nd.im.clone()));
    r.zero("gradient-norm-nonnegative", &C::real(neg));
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::{geometry_tables, ConnectionOptions};
    use crate::geometry::build_frame;
    use crate::jets::Layout;
    use crate::scalar::{ratio, Exact};

    fn pt() -> Vec<Exact> {
        [(1, 2), (-1, 3), (2, 1), (0, 1), (7, 5)].iter().map(|&(a, b)| Exact::from_ratio(a, b)).collect()
    }

    fn setup(m: &ContactModel) -> (Frame<Exact>, Tables<Exact>) {
        let lay = Layout::new(5, 4);
        let fr = build_frame(m, &lay, &pt(), 2, None).unwrap();
        let t = geometry_tables(&fr, &ConnectionOptions::default()).unwrap();
        (fr, t)
    }

    fn mono(c: i64, e: [u8; 5]) -> (BigRational, Vec<u8>) {
        (ratio(c, 1), e.to_vec())
    }

    fn cubic() -> ScalarField {
        ScalarField::polynomial(vec![
            mono(1, [1, 0, 0, 1, 1]),
            mono(3, [2, 1, 0, 0, 0]),
            mono(-2, [0, 0, 1, 0, 2]),
            mono(1, [0, 1, 1, 1, 0]),
            mono(5, [0, 0, 0, 1, 0]),
            mono(-1, [1, 0, 0, 0, 1]),
        ])
    }

    #[test]
    fn constants_have_no_derivatives() {
        let m = ContactModel::heisenberg(2).unwrap();
        let (fr, t) = setup(&m);
        let ct = field_table(&ScalarField::new(Expr::int(7)), &m, &fr, &t).unwrap();
        assert!(ct.d1.iter().all(CJet::is_zero));
        assert!(ct.d3.iter().flatten().flatten().all(CJet::is_zero));
        assert!(ct.sublap.is_zero());
        for form in [BochnerForm::Frame, BochnerForm::Invariant, BochnerForm::CrTruncated] {
            assert!(bochner_residual(&ct, &fr, &t, form, &TermOptions::default()).unwrap().is_zero());
        }
    }

    #[test]
    fn heisenberg_t_is_reeb_coordinate() {
        let m = ContactModel::heisenberg(2).unwrap();
        let lay = Layout::new(5, 4);
        let fr = build_frame(&m, &lay, &vec![Exact::zero(); 5], 2, None).unwrap();
        let t = geometry_tables(&fr, &ConnectionOptions::default()).unwrap();
        let ct = field_table(&ScalarField::new(Expr::var(4)), &m, &fr, &t).unwrap();
        assert!(ct.d1[1].value().is_zero() && ct.d1[2].value().is_zero());
        assert_eq!(ct.d1[0].value(), C::one());
        assert!(ct.sublap.value().is_zero());
    }

    #[test]
    fn heisenberg_sublaplacian_of_radius_is_constant() {
        let m = ContactModel::heisenberg(2).unwrap();
        let u = ScalarField::new(Expr::var(0).pow(2) + Expr::var(2).pow(2));
        let (fr, t) = setup(&m);
        let a = field_table(&u, &m, &fr, &t).unwrap().sublap;
        assert!(a.value().im.is_zero() && a.value().re.is_positive());
        assert!(a.re.coeffs()[1..].iter().all(|c| c.is_zero()));
    }

    #[test]
    fn exact_identities_on_heisenberg() {
        let m = ContactModel::heisenberg(2).unwrap();
        let (fr, t) = setup(&m);
        let ct = field_table(&cubic(), &m, &fr, &t).unwrap();
        let rep = check_commutations(&ct, &fr, &t, &TermOptions::default()).unwrap();
        assert!(rep.passes(0.0), "{rep:?}");
        let rep = check_bochner(&ct, &fr, &t, &TermOptions::default()).unwrap();
        assert!(rep.passes(0.0), "{rep:?}");
    }

    #[test]
    fn exact_identities_on_perturbed_model() {
        let m = ContactModel::perturbed_heisenberg(2, ratio(1, 10), Expr::var(0), ContactModel::default_shear(2)).unwrap();
        let (fr, t) = setup(&m);
        let ct = field_table(&cubic(), &m, &fr, &t).unwrap();
        let rep = check_commutations(&ct, &fr, &t, &TermOptions::default()).unwrap();
        let bad: Vec<_> = rep.families.iter().filter(|f| !f.passes(0.0)).collect();
        assert!(bad.is_empty(), "{bad:?}");
        let rep = check_bochner(&ct, &fr, &t, &TermOptions::default()).unwrap();
        let bad: Vec<_> = rep.families.iter().filter(|f| !f.passes(0.0)).collect();
        assert!(bad.is_empty(), "{bad:?}");
    }

    #[test]
    fn dropping_tanno_terms_breaks_the_perturbed_formulas() {
        let m = ContactModel::perturbed_heisenberg(2, ratio(1, 10), Expr::var(0), ContactModel::default_shear(2)).unwrap();
        let (fr, t) = setup(&m);
        let ct = field_table(&cubic(), &m, &fr, &t).unwrap();
        let opts = TermOptions::ablate_tanno();
        let rep = check_commutations(&ct, &fr, &t, &opts).unwrap();
        assert!(!rep.get("outer-mixed").unwrap().passes(0.0) || !rep.get("outer-antiholomorphic").unwrap().passes(0.0));
        let full = check_bochner(&ct, &fr, &t, &TermOptions::default()).unwrap();
        assert!(full.get("bochner-truncation-accounting").unwrap().passes(0.0));
        let trunc = bochner_residual(&ct, &fr, &t, BochnerForm::CrTruncated, &TermOptions::default()).unwrap();
        assert!(!trunc.is_zero());
    }

    #[test]
    fn sphere_identities_in_float() {
        let m = ContactModel::sphere(2).unwrap();
        let lay = Layout::new(5, 4);
        let p = [0.3, -0.2, 0.5, 0.1, -0.4];
        let fr = build_frame(&m, &lay, &p, 2, None).unwrap();
        let t = geometry_tables(&fr, &ConnectionOptions { tol: 1e-9, gamma_fault: None }).unwrap();
        let u = ScalarField::polynomial(vec![(ratio(1, 1), vec![1, 0, 0, 0, 0, 0]), (ratio(2, 1), vec![0, 1, 1, 0, 0, 0])]);
        let ct = field_table(&u, &m, &fr, &t).unwrap();
        let mut rep = check_commutations(&ct, &fr, &t, &TermOptions::default()).unwrap();
        rep.merge(&check_bochner(&ct, &fr, &t, &TermOptions::default()).unwrap());
        assert!(rep.passes(1e-8), "{rep:?}");
    }
}
