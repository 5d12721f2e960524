//! Contact Riemannian model manifolds, their compatibility axioms, and the
//! orthonormal complex frame `{W_α, W_ᾱ, T}`.
//!
//! Chart coordinates are ordered `(x¹..xⁿ, y¹..yⁿ, t)` on Heisenberg-type
//! models and `(u¹..u^{2n+1})` on the stereographic sphere chart. Frame
//! indices follow the same layout as the tables: `0` is `T`, `1..=n` are
//! `W_α`, `n+1..=2n` are `W_ᾱ`.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::jets::{CJet, Expr, Jet, Layout};
use crate::linalg::invert_jets;
use crate::report::Report;
use crate::scalar::{Scalar, C};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmoothClass {
    Polynomial,
    Analytic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntegrationProfile {
    GaussHermiteWeighted,
    SphereMoments,
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Kind {
    Heisenberg,
    /// `S = I + eps·s·N` acting on the frame `(X̃, Ỹ)` of the horizontal
    /// bundle; `shear` is `N` in that basis.
    Perturbed { eps: BigRational, profile: Expr, shear: Vec<Vec<BigRational>> },
    Sphere,
}

/// Deliberate corruption of the model data, used to check that the
/// instrument notices.
#[derive(Clone, Debug, PartialEq)]
pub enum Fault {
    MetricEntry { i: usize, j: usize, delta: f64 },
    MetricScale(BigRational),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContactModel {
    pub name: String,
    pub n: usize,
    pub kind: Kind,
    /// `θ → cθ` with `h`, `T` adjusted so the axioms keep holding.
    pub scale: BigRational,
    pub fault: Option<Fault>,
}

/// Chart components of the structure tensors as jets of a common order.
#[derive(Clone, Debug)]
pub struct Fields<S> {
    pub theta: Vec<Jet<S>>,
    pub reeb: Vec<Jet<S>>,
    /// `metric[i][k] = h(∂_i, ∂_k)`
    pub metric: Vec<Vec<Jet<S>>>,
    /// `j[i][k]` is the `i`-th component of `J∂_k`.
    pub j: Vec<Vec<Jet<S>>>,
    /// `dtheta[i][k] = dθ(∂_i, ∂_k) = ½(∂_iθ_k − ∂_kθ_i)`
    pub dtheta: Vec<Vec<Jet<S>>>,
}

fn mat_mul<S: Scalar>(a: &[Vec<Jet<S>>], b: &[Vec<Jet<S>>]) -> Vec<Vec<Jet<S>>> {
    let n = a.len();
    let lay = a[0][0].layout();
    let order = a[0][0].order().min(b[0][0].order());
    (0..n)
        .map(|i| {
            (0..b[0].len())
                .map(|j| {
                    let mut s = Jet::zero(lay, order);
                    for k in 0..b.len() {
                        s.mul_add_assign(&a[i][k], &b[k][j]);
                    }
                    s
                })
                .collect()
        })
        .collect()
}

fn rat_is_zero(r: &BigRational) -> bool {
    r.is_zero()
}

impl ContactModel {
    pub fn heisenberg(n: usize) -> Result<Self, Error> {
        if n < 1 {
            return Err(Error::Precondition("heisenberg needs n >= 1".into()));
        }
        Ok(ContactModel { name: "heisenberg".into(), n, kind: Kind::Heisenberg, scale: BigRational::one(), fault: None })
    }

    pub fn sphere(n: usize) -> Result<Self, Error> {
        if n < 2 {
            return Err(Error::Precondition("sphere needs n >= 2".into()));
        }
        Ok(ContactModel { name: "sphere".into(), n, kind: Kind::Sphere, scale: BigRational::one(), fault: None })
    }

    /// The default shear maps `Ỹ₁ ↦ X̃₂` and `Ỹ₂ ↦ X̃₁`.
    pub fn default_shear(n: usize) -> Vec<Vec<BigRational>> {
        let mut nmat = vec![vec![BigRational::zero(); 2 * n]; 2 * n];
        nmat[0][n + 1] = BigRational::one();
        nmat[1][n] = BigRational::one();
        nmat
    }

    /// `s = x¹ + t`: depending on `t` makes `J` vary along the Reeb flow,
    /// so the Webster torsion is nonzero.
    pub fn default_profile(n: usize) -> Expr {
        Expr::var(0) + Expr::var(2 * n)
    }

    pub fn perturbed_heisenberg(n: usize, eps: BigRational, profile: Expr, shear: Vec<Vec<BigRational>>) -> Result<Self, Error> {
        if n < 2 {
            return Err(Error::Precondition("perturbed_heisenberg needs n >= 2".into()));
        }
        let d = 2 * n;
        if shear.len() != d || shear.iter().any(|r| r.len() != d) {
            return Err(Error::Precondition("shear must be a 2n x 2n matrix".into()));
        }
        if !profile.is_rational() {
            return Err(Error::Precondition("the profile must be a polynomial".into()));
        }
        let mul = |a: &Vec<Vec<BigRational>>, b: &Vec<Vec<BigRational>>| {
            (0..d)
                .map(|i| (0..d).map(|j| (0..d).fold(BigRational::zero(), |s, k| s + &a[i][k] * &b[k][j])).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        };
        if !mul(&shear, &shear).iter().flatten().all(rat_is_zero) {
            return Err(Error::Precondition("shear must satisfy N^2 = 0".into()));
        }
        // dθ on (X̃, Ỹ) is Ω = [[0, I], [-I, 0]]
        let mut omega = vec![vec![BigRational::zero(); d]; d];
        for a in 0..n {
            omega[a][n + a] = BigRational::one();
            omega[n + a][a] = -BigRational::one();
        }
        let nt: Vec<Vec<BigRational>> = (0..d).map(|i| (0..d).map(|j| shear[j][i].clone()).collect()).collect();
        let lhs = mul(&nt, &omega);
        let rhs = mul(&omega, &shear);
        if !(0..d).all(|i| (0..d).all(|j| (&lhs[i][j] + &rhs[i][j]).is_zero())) {
            return Err(Error::Precondition("shear must be infinitesimally symplectic for dθ".into()));
        }
        let model = ContactModel {
            name: "perturbed_heisenberg".into(),
            n,
            kind: Kind::Perturbed { eps, profile, shear },
            scale: BigRational::one(),
            fault: None,
        };
        model.probe_positivity()?;
        Ok(model)
    }

    pub fn with_scale(mut self, c: BigRational) -> Self {
        self.scale = c;
        self
    }

    pub fn with_fault(mut self, f: Fault) -> Self {
        self.fault = Some(f);
        self
    }

    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            Kind::Sphere => 2 * self.n + 2,
            _ => self.dim(),
        }
    }

    pub fn smooth_class(&self) -> SmoothClass {
        match self.kind {
            Kind::Sphere => SmoothClass::Analytic,
            _ => SmoothClass::Polynomial,
        }
    }

    pub fn integration_profile(&self) -> IntegrationProfile {
        match self.kind {
            Kind::Sphere => IntegrationProfile::SphereMoments,
            _ => IntegrationProfile::GaussHermiteWeighted,
        }
    }

    /// Chart points are valid everywhere except at the sphere's pole.
    pub fn in_chart(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && p.iter().all(|x| x.is_finite())
    }

    fn probe_positivity(&self) -> Result<(), Error> {
        let lay = Layout::new(self.dim(), 2);
        let grid = [-2.0, 0.0, 2.0];
        let dim = self.dim();
        for idx in 0..grid.len().pow(dim as u32) {
            let mut p = vec![0.0f64; dim];
            let mut r = idx;
            for x in p.iter_mut() {
                *x = grid[r % grid.len()];
                r /= grid.len();
            }
            let f = self.fields::<f64>(&lay, &p, 0)?;
            let h: Vec<Vec<f64>> = f.metric.iter().map(|row| row.iter().map(|x| *x.value()).collect()).collect();
            if crate::linalg::cholesky(&h).is_err() {
                return Err(Error::Precondition("perturbed metric is not positive definite; reduce eps".into()));
            }
        }
        Ok(())
    }

    /// Ambient coordinates as jets, given chart coordinate jets.
    pub fn ambient<S: Scalar>(&self, x: &[Jet<S>]) -> Result<Vec<Jet<S>>, Error> {
        match self.kind {
            Kind::Sphere => stereographic(x),
            _ => Ok(x.to_vec()),
        }
    }

    /// Structure tensors at `p` as jets of order `order`; the layout must
    /// reach `order + 2`.
    pub fn fields<S: Scalar>(&self, lay: &Arc<Layout>, p: &[S], order: usize) -> Result<Fields<S>, Error> {
        if lay.max_order() < order + 2 {
            return Err(Error::InsufficientOrder { needed: order + 2, got: lay.max_order() });
        }
        if p.len() != self.dim() {
            return Err(Error::OutsideChart);
        }
        let x = Jet::coordinates(lay, order + 2, p);
        let (theta, reeb, metric, j) = match &self.kind {
            Kind::Heisenberg => heisenberg_fields(self.n, &x),
            Kind::Perturbed { eps, profile, shear } => perturbed_fields(self.n, &x, eps, profile, shear)?,
            Kind::Sphere => sphere_fields(self.n, &x)?,
        };
        let dim = self.dim();
        let mut dtheta = vec![vec![Jet::zero(lay, order + 1); dim]; dim];
        let half = S::from_ratio(1, 2);
        let dth: Vec<Vec<Jet<S>>> = theta.iter().map(|t| (0..dim).map(|i| t.partial(i)).collect::<Result<Vec<_>, _>>()).collect::<Result<_, _>>()?;
        for i in 0..dim {
            for k in 0..dim {
                dtheta[i][k] = dth[k][i].sub(&dth[i][k]).scale(&half);
            }
        }
        let metric = match metric {
            Some(m) => m,
            None => {
                // h(X,Y) = θ(X)θ(Y) − dθ(X, JY)
                let mut m = vec![vec![Jet::zero(lay, order + 1); dim]; dim];
                for i in 0..dim {
                    for k in 0..dim {
                        let mut s = theta[i].mul(&theta[k]);
                        for l in 0..dim {
                            let t = dtheta[i][l].mul(&j[l][k]);
                            s.sub_assign(&t);
                        }
                        m[i][k] = s;
                    }
                }
                m
            }
        };
        let tr = |v: Vec<Jet<S>>| v.into_iter().map(|x| x.truncate(order)).collect::<Vec<_>>();
        let tr2 = |v: Vec<Vec<Jet<S>>>| v.into_iter().map(tr).collect::<Vec<_>>();
        let mut f = Fields { theta: tr(theta), reeb: tr(reeb), metric: tr2(metric), j: tr2(j), dtheta: tr2(dtheta) };

        if !self.scale.is_one() {
            let c = S::from_rational(&self.scale);
            let cinv = S::one().div_ref(&c).ok_or(Error::DivisionByZero)?;
            let c2c = c.mul_ref(&c).sub_ref(&c);
            for i in 0..dim {
                for k in 0..dim {
                    let tt = f.theta[i].mul(&f.theta[k]).scale(&c2c);
                    f.metric[i][k] = f.metric[i][k].scale(&c).add(&tt);
                    f.dtheta[i][k] = f.dtheta[i][k].scale(&c);
                }
            }
            f.theta = f.theta.iter().map(|t| t.scale(&c)).collect();
            f.reeb = f.reeb.iter().map(|t| t.scale(&cinv)).collect();
        }
        match &self.fault {
            Some(Fault::MetricEntry { i, j, delta }) => {
                let d = S::from_f64(*delta);
                f.metric[*i][*j] = f.metric[*i][*j].add_scalar(&d);
                if i != j {
                    f.metric[*j][*i] = f.metric[*j][*i].add_scalar(&d);
                }
            }
            Some(Fault::MetricScale(s)) => {
                let s = S::from_rational(s);
                f.metric = f.metric.iter().map(|r| r.iter().map(|x| x.scale(&s)).collect()).collect();
            }
            None => {}
        }
        Ok(f)
    }
}

type RawFields<S> = (Vec<Jet<S>>, Vec<Jet<S>>, Option<Vec<Vec<Jet<S>>>>, Vec<Vec<Jet<S>>>);

fn heisenberg_fields<S: Scalar>(n: usize, x: &[Jet<S>]) -> RawFields<S> {
    let lay = x[0].layout();
    let order = x[0].order();
    let dim = 2 * n + 1;
    let zero = Jet::zero(lay, order);
    let one = Jet::constant(lay, order, S::one());
    let mut theta = vec![zero.clone(); dim];
    for a in 0..n {
        theta[a] = x[n + a].neg();
        theta[n + a] = x[a].clone();
    }
    theta[2 * n] = one.clone();
    let mut reeb = vec![zero.clone(); dim];
    reeb[2 * n] = one.clone();
    // J∂x = −∂y + x∂t, J∂y = ∂x + y∂t
    let mut j = vec![vec![zero.clone(); dim]; dim];
    for a in 0..n {
        j[n + a][a] = one.neg();
        j[2 * n][a] = x[a].clone();
        j[a][n + a] = one.clone();
        j[2 * n][n + a] = x[n + a].clone();
    }
    let mut h = vec![vec![zero; dim]; dim];
    for i in 0..dim {
        for k in 0..dim {
            let mut v = theta[i].mul(&theta[k]);
            if i == k && i < 2 * n {
                v = v.add(&one);
            }
            h[i][k] = v;
        }
    }
    (theta, reeb, Some(h), j)
}

fn perturbed_fields<S: Scalar>(
    n: usize,
    x: &[Jet<S>],
    eps: &BigRational,
    profile: &Expr,
    shear: &[Vec<BigRational>],
) -> Result<RawFields<S>, Error> {
    let (theta, reeb, _, _) = heisenberg_fields(n, x);
    let lay = x[0].layout();
    let order = x[0].order();
    let d = 2 * n;
    let dim = d + 1;
    let s = profile.lift(x, x)?.scale(&S::from_rational(eps));
    let con = |v: S| Jet::constant(lay, order, v);
    let ident = |i: usize, j: usize| if i == j { S::one() } else { S::zero() };
    // S = I + eps s N, S⁻¹ = I − eps s N, J₀ = [[0, I], [−I, 0]]
    let sm: Vec<Vec<Jet<S>>> =
        (0..d).map(|i| (0..d).map(|k| con(ident(i, k)).add(&s.scale(&S::from_rational(&shear[i][k])))).collect()).collect();
    let si: Vec<Vec<Jet<S>>> =
        (0..d).map(|i| (0..d).map(|k| con(ident(i, k)).sub(&s.scale(&S::from_rational(&shear[i][k])))).collect()).collect();
    let j0: Vec<Vec<Jet<S>>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|k| {
                    if i < n && k == i + n {
                        con(S::one())
                    } else if i >= n && k + n == i {
                        con(S::one().neg_ref())
                    } else {
                        con(S::zero())
                    }
                })
                .collect()
        })
        .collect();
    let jp = mat_mul(&mat_mul(&sm, &j0), &si);
    // E_b = ∂_b + τ_b ∂t with τ = (y, −x)
    let tau: Vec<Jet<S>> = (0..d).map(|b| if b < n { x[n + b].clone() } else { x[b - n].neg() }).collect();
    let zero = Jet::zero(lay, order);
    let mut j = vec![vec![zero.clone(); dim]; dim];
    for c in 0..d {
        let mut tcomp = zero.clone();
        for b in 0..d {
            j[b][c] = jp[b][c].clone();
            tcomp.mul_add_assign(&jp[b][c], &tau[b]);
        }
        j[d][c] = tcomp;
    }
    Ok((theta, reeb, None, j))
}

/// `X(u) = (2u, |u|² − 1) / (1 + |u|²)`
fn stereographic<S: Scalar>(u: &[Jet<S>]) -> Result<Vec<Jet<S>>, Error> {
    let lay = u[0].layout();
    let order = u[0].order();
    let one = Jet::constant(lay, order, S::one());
    let mut r2 = Jet::zero(lay, order);
    for ui in u {
        r2.mul_add_assign(ui, ui);
    }
    let inv = one.add(&r2).recip()?;
    let two = S::from_i64(2);
    let mut out: Vec<Jet<S>> = u.iter().map(|ui| ui.mul(&inv).scale(&two)).collect();
    out.push(r2.sub(&one).mul(&inv));
    Ok(out)
}

fn sphere_fields<S: Scalar>(n: usize, u: &[Jet<S>]) -> Result<RawFields<S>, Error> {
    let dim = 2 * n + 1;
    let na = 2 * n + 2;
    let m = n + 1;
    let xa = stereographic(u)?;
    // ambient ordering: x_0..x_n, y_0..y_n
    let dx: Vec<Vec<Jet<S>>> = (0..dim).map(|i| xa.iter().map(|a| a.partial(i)).collect::<Result<Vec<_>, _>>()).collect::<Result<_, _>>()?;
    let xa: Vec<Jet<S>> = xa.iter().map(|a| a.truncate(dx[0][0].order())).collect();
    let lay = xa[0].layout().clone();
    let order = dx[0][0].order();
    let zero = Jet::zero(&lay, order);
    // ambient T = Σ(−y ∂x + x ∂y), θ_amb = ⟨T, ·⟩
    let t_amb: Vec<Jet<S>> = (0..na).map(|a| if a < m { xa[a + m].neg() } else { xa[a - m].clone() }).collect();
    let minus_i = |v: &[Jet<S>]| -> Vec<Jet<S>> { (0..na).map(|a| if a < m { v[a + m].clone() } else { v[a - m].neg() }).collect() };
    let dot = |a: &[Jet<S>], b: &[Jet<S>]| {
        let mut s = zero.clone();
        for (p, q) in a.iter().zip(b) {
            s.mul_add_assign(p, q);
        }
        s
    };
    let g: Vec<Vec<Jet<S>>> = (0..dim).map(|i| (0..dim).map(|k| dot(&dx[i], &dx[k])).collect()).collect();
    let ginv = invert_jets(&g)?;
    let theta: Vec<Jet<S>> = (0..dim).map(|i| dot(&t_amb, &dx[i])).collect();
    let to_chart = |v: &[Jet<S>]| -> Vec<Jet<S>> {
        let proj: Vec<Jet<S>> = (0..dim).map(|k| dot(&dx[k], v)).collect();
        (0..dim)
            .map(|i| {
                let mut s = zero.clone();
                for k in 0..dim {
                    s.mul_add_assign(&ginv[i][k], &proj[k]);
                }
                s
            })
            .collect()
    };
    let reeb = to_chart(&t_amb);
    let mut j = vec![vec![zero.clone(); dim]; dim];
    for k in 0..dim {
        let tk = dot(&dx[k], &t_amb);
        let horiz: Vec<Jet<S>> = (0..na).map(|a| dx[k][a].sub(&t_amb[a].mul(&tk))).collect();
        let col = to_chart(&minus_i(&horiz));
        for i in 0..dim {
            j[i][k] = col[i].clone();
        }
    }
    Ok((theta, reeb, Some(g), j))
}

fn val<S: Scalar>(x: &Jet<S>) -> C<S> {
    C::real(x.value().clone())
}

/// Residuals of the compatibility axioms on the chart basis at `p`.
pub fn verify_contact_axioms<S: Scalar>(model: &ContactModel, p: &[S]) -> Result<Report, Error> {
    let lay = Layout::new(model.dim(), 2);
    let f = model.fields(&lay, p, 0)?;
    Ok(axioms_from_fields(&f))
}

pub fn axioms_from_fields<S: Scalar>(f: &Fields<S>) -> Report {
    let dim = f.theta.len();
    let v = |x: &Jet<S>| val(x);
    let mut r = Report::new();
    let mut tt = Vec::new();
    for i in 0..dim {
        tt.push(v(&f.theta[i]).mul(&v(&f.reeb[i])));
    }
    tt.push(C::real(S::one().neg_ref()));
    r.identity("contact-theta-T", &tt);
    for k in 0..dim {
        let terms: Vec<C<S>> = (0..dim).map(|i| v(&f.reeb[i]).mul(&v(&f.dtheta[i][k]))).collect();
        r.identity("contact-T-dtheta", &terms);
        // h(∂_k, T) = θ_k
        let mut terms: Vec<C<S>> = (0..dim).map(|i| v(&f.metric[k][i]).mul(&v(&f.reeb[i]))).collect();
        terms.push(v(&f.theta[k]).neg());
        r.identity("contact-h-T", &terms);
        let terms: Vec<C<S>> = (0..dim).map(|i| v(&f.j[i][k]).mul(&v(&f.reeb[k]))).collect();
        let _ = terms;
        let jt: Vec<C<S>> = (0..dim).map(|l| v(&f.j[k][l]).mul(&v(&f.reeb[l]))).collect();
        r.identity("contact-JT", &jt);
        let tj: Vec<C<S>> = (0..dim).map(|i| v(&f.theta[i]).mul(&v(&f.j[i][k]))).collect();
        r.identity("contact-theta-J", &tj);
        for i in 0..dim {
            // J² = −Id + θ⊗T
            let mut terms: Vec<C<S>> = (0..dim).map(|l| v(&f.j[i][l]).mul(&v(&f.j[l][k]))).collect();
            if i == k {
                terms.push(C::one());
            }
            terms.push(v(&f.theta[k]).mul(&v(&f.reeb[i])).neg());
            r.identity("contact-J-square", &terms);
            // dθ(∂_i, ∂_k) = h(∂_i, J∂_k)
            let mut terms: Vec<C<S>> = (0..dim).map(|l| v(&f.metric[i][l]).mul(&v(&f.j[l][k]))).collect();
            terms.push(v(&f.dtheta[i][k]).neg());
            r.identity("contact-dtheta-h-J", &terms);
            r.equal("contact-h-symmetric", &v(&f.metric[i][k]), &v(&f.metric[k][i]));
            // h(J∂_i, J∂_k) = h(∂_i, ∂_k) − θ_iθ_k
            let mut terms = Vec::new();
            for a in 0..dim {
                for b in 0..dim {
                    terms.push(v(&f.j[a][i]).mul(&v(&f.j[b][k])).mul(&v(&f.metric[a][b])));
                }
            }
            terms.push(v(&f.metric[i][k]).neg());
            terms.push(v(&f.theta[i]).mul(&v(&f.theta[k])));
            r.identity("contact-h-J-invariant", &terms);
        }
    }
    r
}

/// Orthonormal complex frame with structure functions, all as jets.
#[derive(Clone, Debug)]
pub struct Frame<S> {
    pub n: usize,
    pub order: usize,
    pub point: Vec<S>,
    pub lay: Arc<Layout>,
    pub fields: Fields<S>,
    /// Real horizontal frame `X_1..X_{2n}` with `h(X_a, X_b) = ½δ_ab`.
    pub x: Vec<Vec<Jet<S>>>,
    /// `w[j][i]` is the `i`-th chart component of `W_j`.
    pub w: Vec<Vec<CJet<S>>>,
    /// `coframe[l][i]`: `θ^l = Σ_i coframe[l][i] dx^i`.
    pub coframe: Vec<Vec<CJet<S>>>,
    /// `c[j][k][l]` with `[W_j, W_k] = c_jk^l W_l`, order `order − 1`.
    pub c: Vec<Vec<Vec<CJet<S>>>>,
}

/// Conjugate frame index.
pub fn bar(n: usize, j: usize) -> usize {
    if j == 0 {
        0
    } else if j <= n {
        j + n
    } else {
        j - n
    }
}

fn h_apply<S: Scalar>(f: &Fields<S>, a: &[Jet<S>], b: &[Jet<S>]) -> Jet<S> {
    let dim = a.len();
    let mut s = Jet::zero(a[0].layout(), a[0].order().min(b[0].order()).min(f.metric[0][0].order()));
    for i in 0..dim {
        if a[i].is_zero() {
            continue;
        }
        let mut hb = Jet::zero(a[0].layout(), s.order());
        for k in 0..dim {
            hb.mul_add_assign(&f.metric[i][k], &b[k]);
        }
        s.mul_add_assign(&a[i], &hb);
    }
    s
}

fn j_apply<S: Scalar>(f: &Fields<S>, a: &[Jet<S>]) -> Vec<Jet<S>> {
    let dim = a.len();
    (0..dim)
        .map(|i| {
            let mut s = Jet::zero(a[0].layout(), a[0].order().min(f.j[0][0].order()));
            for k in 0..dim {
                s.mul_add_assign(&f.j[i][k], &a[k]);
            }
            s
        })
        .collect()
}

impl<S: Scalar> Frame<S> {
    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    /// `W_j f` for every frame index, for a complex jet `f`.
    pub fn derivs(&self, f: &CJet<S>) -> Result<Vec<CJet<S>>, Error> {
        let dim = self.dim();
        let grad: Vec<CJet<S>> = (0..dim).map(|i| f.partial(i)).collect::<Result<_, _>>()?;
        if grad[0].order() == 0 {
            let g: Vec<C<S>> = grad.iter().map(CJet::value).collect();
            return Ok((0..dim)
                .map(|j| {
                    let mut s = C::zero();
                    for i in 0..dim {
                        s.add_assign(&self.w[j][i].value().mul(&g[i]));
                    }
                    CJet::constant(&self.lay, 0, s)
                })
                .collect());
        }
        Ok((0..dim)
            .map(|j| {
                let order = grad[0].order().min(self.order);
                let mut s = CJet::zero(&self.lay, order);
                for i in 0..dim {
                    s.mul_add_assign(&self.w[j][i], &grad[i]);
                }
                s
            })
            .collect())
    }

    /// `W_j f` for a single index.
    pub fn deriv(&self, j: usize, f: &CJet<S>) -> Result<CJet<S>, Error> {
        let dim = self.dim();
        let order = (f.order().max(1) - 1).min(self.order);
        let mut s = CJet::zero(&self.lay, order);
        for i in 0..dim {
            if self.w[j][i].is_zero() {
                continue;
            }
            s.mul_add_assign(&self.w[j][i], &f.partial(i)?);
        }
        Ok(s)
    }

    /// Frame components `θ^l(V)` of a chart vector.
    pub fn components(&self, v: &[CJet<S>]) -> Vec<CJet<S>> {
        let dim = self.dim();
        (0..dim)
            .map(|l| {
                let mut s = CJet::zero(&self.lay, v[0].order().min(self.order));
                for i in 0..dim {
                    s.mul_add_assign(&self.coframe[l][i], &v[i]);
                }
                s
            })
            .collect()
    }

    /// Chart components of `Σ_j a_j W_j`.
    pub fn vector(&self, a: &[CJet<S>]) -> Vec<CJet<S>> {
        let dim = self.dim();
        (0..dim)
            .map(|i| {
                let mut s = CJet::zero(&self.lay, a[0].order().min(self.order));
                for j in 0..dim {
                    s.mul_add_assign(&a[j], &self.w[j][i]);
                }
                s
            })
            .collect()
    }

    /// `h(V, W)` of two complex chart vectors (complex bilinear).
    pub fn h(&self, a: &[CJet<S>], b: &[CJet<S>]) -> CJet<S> {
        let dim = self.dim();
        let f = &self.fields;
        let order = a[0].order().min(b[0].order()).min(self.order);
        let mut s = CJet::zero(&self.lay, order);
        for i in 0..dim {
            let mut hb = CJet::zero(&self.lay, order);
            for k in 0..dim {
                hb.re.mul_add_assign(&f.metric[i][k], &b[k].re);
                hb.im.mul_add_assign(&f.metric[i][k], &b[k].im);
            }
            s.mul_add_assign(&a[i], &hb);
        }
        s
    }

    /// `J` applied to a complex chart vector using the model tensor.
    pub fn j(&self, a: &[CJet<S>]) -> Vec<CJet<S>> {
        CJetVec::new(a).map_real(|v| j_apply(&self.fields, v))
    }

    /// `θ(V)` from the chart components of the contact form.
    pub fn theta(&self, a: &[CJet<S>]) -> CJet<S> {
        let mut s = CJet::zero(&self.lay, a[0].order().min(self.order));
        for (i, ai) in a.iter().enumerate() {
            s.re.mul_add_assign(&self.fields.theta[i], &ai.re);
            s.im.mul_add_assign(&self.fields.theta[i], &ai.im);
        }
        s
    }

    /// `2dθ(V, W)` from the chart jets of `θ`.
    pub fn two_dtheta(&self, a: &[CJet<S>], b: &[CJet<S>]) -> CJet<S> {
        let dim = self.dim();
        let order = a[0].order().min(b[0].order()).min(self.order);
        let mut s = CJet::zero(&self.lay, order);
        let two = S::from_i64(2);
        for i in 0..dim {
            let mut db = CJet::zero(&self.lay, order);
            for k in 0..dim {
                let d = self.fields.dtheta[i][k].truncate(order).scale(&two);
                db.re.mul_add_assign(&d, &b[k].re);
                db.im.mul_add_assign(&d, &b[k].im);
            }
            s.mul_add_assign(&a[i], &db);
        }
        s
    }
}

struct CJetVec<'a, S> {
    v: &'a [CJet<S>],
}

impl<'a, S: Scalar> CJetVec<'a, S> {
    fn new(v: &'a [CJet<S>]) -> Self {
        CJetVec { v }
    }
    fn map_real(&self, f: impl Fn(&[Jet<S>]) -> Vec<Jet<S>>) -> Vec<CJet<S>> {
        let re: Vec<Jet<S>> = self.v.iter().map(|x| x.re.clone()).collect();
        let im: Vec<Jet<S>> = self.v.iter().map(|x| x.im.clone()).collect();
        let (fr, fi) = (f(&re), f(&im));
        fr.into_iter().zip(fi).map(|(a, b)| CJet::new(a, b)).collect()
    }
}

/// Builds the frame of Prop. 2.2 at `p` with coefficient jets of order
/// `order`. `seed`, if given, is the first Gram–Schmidt candidate.
pub fn build_frame<S: Scalar>(
    model: &ContactModel,
    lay: &Arc<Layout>,
    p: &[S],
    order: usize,
    seed: Option<&[S]>,
) -> Result<Frame<S>, Error> {
    if order < 1 {
        return Err(Error::InsufficientOrder { needed: 1, got: order });
    }
    let n = model.n;
    let dim = model.dim();
    let f = model.fields(lay, p, order)?;
    let con = |v: S| Jet::constant(lay, order, v);
    let mut cands: Vec<Vec<Jet<S>>> = Vec::new();
    if let Some(s) = seed {
        cands.push(s.iter().map(|x| con(x.clone())).collect());
    }
    for i in 0..dim {
        cands.push((0..dim).map(|k| con(if k == i { S::one() } else { S::zero() })).collect());
    }
    let tol = 1e-8;
    let two = S::from_i64(2);
    let mut xs: Vec<Vec<Jet<S>>> = Vec::new();
    let mut pairs: Vec<(Vec<Jet<S>>, Vec<Jet<S>>)> = Vec::new();
    for cand in cands {
        if pairs.len() == n {
            break;
        }
        // project to HM
        let mut th = Jet::zero(lay, order);
        for i in 0..dim {
            th.mul_add_assign(&f.theta[i], &cand[i]);
        }
        let mut v: Vec<Jet<S>> = (0..dim).map(|i| cand[i].sub(&th.mul(&f.reeb[i]))).collect();
        for (xa, ja) in &pairs {
            for b in [xa, ja] {
                let coef = h_apply(&f, &v, b).scale(&two);
                for i in 0..dim {
                    let t = coef.mul(&b[i]);
                    v[i].sub_assign(&t);
                }
            }
        }
        let nn = h_apply(&f, &v, &v);
        let small = if S::EXACT { nn.value().is_zero() } else { nn.value().to_f64() < tol };
        if small {
            continue;
        }
        if !nn.value().is_positive() {
            return Err(Error::Degenerate("horizontal metric is not positive definite"));
        }
        let norm = nn.scale(&two).sqrt()?.recip()?;
        let xa: Vec<Jet<S>> = v.iter().map(|c| c.mul(&norm)).collect();
        let ja = j_apply(&f, &xa);
        pairs.push((xa, ja));
    }
    if pairs.len() < n {
        return Err(Error::Degenerate("could not complete the horizontal frame"));
    }
    for (xa, _) in &pairs {
        xs.push(xa.clone());
    }
    for (_, ja) in &pairs {
        xs.push(ja.clone());
    }
    let reeb: Vec<Jet<S>> = f.reeb.clone();
    let mut w: Vec<Vec<CJet<S>>> = vec![reeb.iter().map(|t| CJet::real(t.clone())).collect()];
    for a in 0..n {
        w.push((0..dim).map(|i| CJet::new(xs[a][i].clone(), xs[n + a][i].neg())).collect());
    }
    for a in 0..n {
        w.push((0..dim).map(|i| CJet::new(xs[a][i].clone(), xs[n + a][i].clone())).collect());
    }
    // real frame matrix with columns T, X_1..X_2n
    let real: Vec<Vec<Jet<S>>> = (0..dim)
        .map(|i| (0..dim).map(|col| if col == 0 { reeb[i].clone() } else { xs[col - 1][i].clone() }).collect())
        .collect();
    let xi = invert_jets(&real)?;
    let half = S::from_ratio(1, 2);
    let mut coframe = vec![xi[0].iter().map(|t| CJet::real(t.clone())).collect::<Vec<_>>()];
    for a in 0..n {
        coframe.push((0..dim).map(|i| CJet::new(xi[1 + a][i].scale(&half), xi[1 + n + a][i].scale(&half))).collect());
    }
    for a in 0..n {
        coframe.push((0..dim).map(|i| CJet::new(xi[1 + a][i].scale(&half), xi[1 + n + a][i].scale(&half).neg())).collect());
    }

    let dw: Vec<Vec<Vec<CJet<S>>>> = w
        .iter()
        .map(|wk| wk.iter().map(|c| (0..dim).map(|l| c.partial(l)).collect::<Result<Vec<_>, _>>()).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;
    let zero = CJet::zero(lay, order - 1);
    let mut c = vec![vec![vec![zero.clone(); dim]; dim]; dim];
    for j in 0..dim {
        for k in j + 1..dim {
            let br: Vec<CJet<S>> = (0..dim)
                .map(|i| {
                    let mut s = zero.clone();
                    for l in 0..dim {
                        s.mul_add_assign(&w[j][l], &dw[k][i][l]);
                        s.mul_sub_assign(&w[k][l], &dw[j][i][l]);
                    }
                    s
                })
                .collect();
            for l in 0..dim {
                let mut s = zero.clone();
                for i in 0..dim {
                    s.mul_add_assign(&coframe[l][i], &br[i]);
                }
                c[k][j][l] = s.neg();
                c[j][k][l] = s;
            }
        }
    }
    Ok(Frame { n, order, point: p.to_vec(), lay: lay.clone(), fields: f, x: xs, w, coframe, c })
}

/// Frame normal form: Gram matrix, `J` eigenvectors, duality and the
/// `θ`-component of horizontal brackets.
pub fn check_frame<S: Scalar>(fr: &Frame<S>) -> Report {
    let n = fr.n;
    let dim = fr.dim();
    let mut r = Report::new();
    for j in 0..dim {
        for k in 0..dim {
            let g = fr.h(&fr.w[j], &fr.w[k]).value();
            let expect = if (j == 0 && k == 0) || (j != 0 && k == bar(n, j)) { C::one() } else { C::zero() };
            r.equal("frame-gram", &g, &expect);
            let d = {
                let mut s = C::zero();
                for i in 0..dim {
                    s.add_assign(&fr.coframe[j][i].value().mul(&fr.w[k][i].value()));
                }
                s
            };
            let e = if j == k { C::one() } else { C::zero() };
            r.equal("frame-coframe-duality", &d, &e);
        }
        let jw = fr.j(&fr.w[j]);
        let eig = if j == 0 {
            C::zero()
        } else if j <= n {
            C::i()
        } else {
            C::i().neg()
        };
        for i in 0..dim {
            r.equal("frame-J-eigen", &jw[i].value(), &fr.w[j][i].value().mul(&eig));
        }
    }
    for a in 1..dim {
        for b in 1..dim {
            let dt = fr.two_dtheta(&fr.w[a], &fr.w[b]).value();
            r.identity("frame-bracket-theta", &[fr.c[a][b][0].value(), dt]);
            r.identity("frame-bracket-antisymmetry", &[fr.c[a][b][0].value(), fr.c[b][a][0].value()]);
        }
    }
    r
}
