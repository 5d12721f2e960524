//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] stores the coefficients `∂^a f(p) / a!` for every multi-index of
//! total degree at most its order, ranked in graded order so that lowering the
//! order is a prefix truncation. All jets built from one [`Layout`] share its
//! multiplication and differentiation tables.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use num_rational::BigRational;

use crate::scalar::{Scalar, C};
use crate::Error;

const NONE: u32 = u32::MAX;

/// Monomial ordering and product tables for `m` variables up to order `k`.
#[derive(Debug)]
pub struct Layout {
    m: usize,
    k: usize,
    exps: Vec<Vec<u8>>,
    // start[d] = number of monomials of degree < d
    start: Vec<usize>,
    // (i, j, r) with exps[i] + exps[j] = exps[r], sorted by r
    prod: Vec<(u32, u32, u32)>,
    // prod_end[d] = number of triples whose result has degree <= d
    prod_end: Vec<usize>,
    // raise[d][r] = rank of exps[r] + e_d
    raise: Vec<Vec<u32>>,
    index: BTreeMap<Vec<u8>, usize>,
}

fn monomials(m: usize, d: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if prefix.len() == m - 1 {
        prefix.push(d as u8);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=d).rev() {
        prefix.push(first as u8);
        monomials(m, d - first, prefix, out);
        prefix.pop();
    }
}

impl Layout {
    pub fn new(m: usize, k: usize) -> Arc<Layout> {
        assert!(m >= 1, "a jet needs at least one variable");
        let mut exps = Vec::new();
        let mut start = vec![0usize];
        for d in 0..=k {
            monomials(m, d, &mut Vec::new(), &mut exps);
            start.push(exps.len());
        }
        let index: BTreeMap<Vec<u8>, usize> =
            exps.iter().enumerate().map(|(r, e)| (e.clone(), r)).collect();
        let deg = |e: &[u8]| e.iter().map(|&x| x as usize).sum::<usize>();

        let mut prod = Vec::new();
        let mut sum = vec![0u8; m];
        for (i, a) in exps.iter().enumerate() {
            for (j, b) in exps.iter().enumerate() {
                if deg(a) + deg(b) > k {
                    continue;
                }
                for t in 0..m {
                    sum[t] = a[t] + b[t];
                }
                let r = index[&sum];
                prod.push((i as u32, j as u32, r as u32));
            }
        }
        prod.sort_by_key(|&(i, j, r)| (r, i, j));
        let mut prod_end = vec![0usize; k + 1];
        for d in 0..=k {
            prod_end[d] = prod.partition_point(|&(_, _, r)| (r as usize) < start[d + 1]);
        }

        let mut raise = vec![vec![NONE; exps.len()]; m];
        for (r, e) in exps.iter().enumerate() {
            if deg(e) == k {
                continue;
            }
            for d in 0..m {
                let mut up = e.clone();
                up[d] += 1;
                raise[d][r] = index[&up] as u32;
            }
        }
        Arc::new(Layout { m, k, exps, start, prod, prod_end, raise, index })
    }

    pub fn vars(&self) -> usize {
        self.m
    }

    pub fn max_order(&self) -> usize {
        self.k
    }

    /// Number of coefficients of a jet of order `order`.
    pub fn len(&self, order: usize) -> usize {
        self.start[order + 1]
    }

    pub fn exponent(&self, rank: usize) -> &[u8] {
        &self.exps[rank]
    }

    pub fn rank(&self, exponent: &[u8]) -> Option<usize> {
        self.index.get(exponent).copied()
    }

    fn degree_of(&self, rank: usize) -> usize {
        self.start.partition_point(|&s| s <= rank) - 1
    }
}

/// Truncated Taylor expansion of a real scalar at a point.
#[derive(Clone, Debug)]
pub struct Jet<S> {
    lay: Arc<Layout>,
    order: usize,
    c: Vec<S>,
}

impl<S: Scalar> PartialEq for Jet<S> {
    fn eq(&self, o: &Self) -> bool {
        self.order == o.order && self.c == o.c
    }
}

impl<S: Scalar> Jet<S> {
    pub fn zero(lay: &Arc<Layout>, order: usize) -> Self {
        assert!(order <= lay.k, "jet order exceeds layout");
        Jet { lay: lay.clone(), order, c: vec![S::zero(); lay.len(order)] }
    }

    pub fn constant(lay: &Arc<Layout>, order: usize, v: S) -> Self {
        let mut j = Self::zero(lay, order);
        j.c[0] = v;
        j
    }

    /// The coordinate function `x_i` expanded at a point whose `i`-th
    /// coordinate is `p_i`.
    pub fn var(lay: &Arc<Layout>, order: usize, i: usize, p_i: S) -> Self {
        let mut j = Self::constant(lay, order, p_i);
        if order >= 1 {
            j.c[1 + i] = S::one();
        }
        j
    }

    /// All coordinate jets at `p`.
    pub fn coordinates(lay: &Arc<Layout>, order: usize, p: &[S]) -> Vec<Self> {
        assert_eq!(p.len(), lay.m, "point dimension must match the layout");
        p.iter().enumerate().map(|(i, v)| Self::var(lay, order, i, v.clone())).collect()
    }

    pub fn from_coeffs(lay: &Arc<Layout>, order: usize, c: Vec<S>) -> Self {
        assert_eq!(c.len(), lay.len(order));
        Jet { lay: lay.clone(), order, c }
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.lay
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> &S {
        &self.c[0]
    }

    pub fn coeffs(&self) -> &[S] {
        &self.c
    }

    /// Normalized coefficient `∂^a f / a!`.
    pub fn coeff(&self, a: &[u8]) -> S {
        match self.lay.rank(a) {
            Some(r) if r < self.c.len() => self.c[r].clone(),
            _ => S::zero(),
        }
    }

    /// The partial derivative `∂^a f` at the base point.
    pub fn derivative(&self, a: &[u8]) -> S {
        let mut f = S::one();
        for &ai in a {
            for t in 2..=ai as i64 {
                f = f.mul_ref(&S::from_i64(t));
            }
        }
        self.coeff(a).mul_ref(&f)
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(S::is_zero)
    }

    pub fn is_constant(&self) -> bool {
        self.c[1..].iter().all(S::is_zero)
    }

    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order);
        Jet { lay: self.lay.clone(), order, c: self.c[..self.lay.len(order)].to_vec() }
    }

    fn check(&self, o: &Self) {
        assert!(
            Arc::ptr_eq(&self.lay, &o.lay) || (self.lay.m == o.lay.m && self.lay.k == o.lay.k),
            "jets from different layouts"
        );
    }

    pub fn add(&self, o: &Self) -> Self {
        self.check(o);
        let order = self.order.min(o.order);
        let n = self.lay.len(order);
        let c = (0..n).map(|r| self.c[r].add_ref(&o.c[r])).collect();
        Jet { lay: self.lay.clone(), order, c }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.check(o);
        let order = self.order.min(o.order);
        let n = self.lay.len(order);
        let c = (0..n).map(|r| self.c[r].sub_ref(&o.c[r])).collect();
        Jet { lay: self.lay.clone(), order, c }
    }

    pub fn neg(&self) -> Self {
        Jet { lay: self.lay.clone(), order: self.order, c: self.c.iter().map(S::neg_ref).collect() }
    }

    pub fn scale(&self, s: &S) -> Self {
        Jet { lay: self.lay.clone(), order: self.order, c: self.c.iter().map(|x| x.mul_ref(s)).collect() }
    }

    pub fn add_scalar(&self, s: &S) -> Self {
        let mut r = self.clone();
        r.c[0].add_assign_ref(s);
        r
    }

    pub fn add_assign(&mut self, o: &Self) {
        self.check(o);
        if o.order < self.order {
            *self = self.truncate(o.order);
        }
        for (x, y) in self.c.iter_mut().zip(&o.c) {
            x.add_assign_ref(y);
        }
    }

    pub fn sub_assign(&mut self, o: &Self) {
        self.check(o);
        if o.order < self.order {
            *self = self.truncate(o.order);
        }
        for (x, y) in self.c.iter_mut().zip(&o.c) {
            x.sub_assign_ref(y);
        }
    }

    /// `self += a * b`, truncated to the smallest of the three orders.
    pub fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        self.mul_acc(a, b, false);
    }

    /// `self -= a * b`, truncated like [`Jet::mul_add_assign`].
    pub fn mul_sub_assign(&mut self, a: &Self, b: &Self) {
        self.mul_acc(a, b, true);
    }

    fn mul_acc(&mut self, a: &Self, b: &Self, negate: bool) {
        self.check(a);
        self.check(b);
        let order = self.order.min(a.order).min(b.order);
        if order < self.order {
            *self = self.truncate(order);
        }
        let step = |x: &mut S, p: &S, q: &S| if negate { x.mul_sub_assign(p, q) } else { x.mul_add_assign(p, q) };
        if a.is_constant() {
            let s = &a.c[0];
            if s.is_zero() {
                return;
            }
            for (x, y) in self.c.iter_mut().zip(&b.c) {
                step(x, s, y);
            }
            return;
        }
        if b.is_constant() {
            let s = &b.c[0];
            if s.is_zero() {
                return;
            }
            for (x, y) in self.c.iter_mut().zip(&a.c) {
                step(x, y, s);
            }
            return;
        }
        for &(i, j, r) in &self.lay.prod[..self.lay.prod_end[order]] {
            let (i, j) = (i as usize, j as usize);
            if a.c[i].is_zero() {
                continue;
            }
            step(&mut self.c[r as usize], &a.c[i], &b.c[j]);
        }
    }

    /// Truncated Cauchy product.
    pub fn mul(&self, o: &Self) -> Self {
        let order = self.order.min(o.order);
        let mut out = Self::zero(&self.lay, order);
        out.mul_add_assign(self, o);
        out
    }

    pub fn powi(&self, e: u32) -> Self {
        let mut r = Self::constant(&self.lay, self.order, S::one());
        for _ in 0..e {
            r = r.mul(self);
        }
        r
    }

    pub fn recip(&self) -> Result<Self, Error> {
        let inv0 = S::one().div_ref(&self.c[0]).ok_or(Error::DivisionByZero)?;
        let mut r = Self::zero(&self.lay, self.order);
        r.c[0] = inv0.clone();
        let end = self.lay.prod_end[self.order];
        let mut t = 0;
        let prod = &self.lay.prod[..end];
        // (b·r)[k] = 0 for k > 0 determines r[k] from lower ranks
        while t < end {
            let k = prod[t].2 as usize;
            let mut acc = S::zero();
            while t < end && prod[t].2 as usize == k {
                let (i, j, _) = prod[t];
                if j as usize != k {
                    acc.mul_add_assign(&self.c[i as usize], &r.c[j as usize]);
                }
                t += 1;
            }
            if k != 0 {
                r.c[k] = acc.mul_ref(&inv0).neg_ref();
            }
        }
        Ok(r)
    }

    pub fn div(&self, o: &Self) -> Result<Self, Error> {
        Ok(self.mul(&o.recip()?))
    }

    pub fn sqrt(&self) -> Result<Self, Error> {
        if !self.c[0].is_positive() {
            return Err(Error::NonPositiveSqrt);
        }
        let s0 = self.c[0].sqrt().ok_or(Error::Unsupported("square root outside the scalar field"))?;
        let two_s0 = s0.add_ref(&s0);
        let mut s = Self::zero(&self.lay, self.order);
        s.c[0] = s0;
        let end = self.lay.prod_end[self.order];
        let prod = &self.lay.prod[..end];
        let mut t = 0;
        while t < end {
            let k = prod[t].2 as usize;
            let mut acc = S::zero();
            while t < end && prod[t].2 as usize == k {
                let (i, j, _) = prod[t];
                if i as usize != k && j as usize != k {
                    acc.mul_add_assign(&s.c[i as usize], &s.c[j as usize]);
                }
                t += 1;
            }
            if k != 0 {
                s.c[k] = self.c[k].sub_ref(&acc).div_ref(&two_s0).ok_or(Error::DivisionByZero)?;
            }
        }
        Ok(s)
    }

    /// `Σ coeffs[k] δ^k` with `δ = self - value`, exact because δ is nilpotent.
    fn compose(&self, coeffs: &[S]) -> Self {
        let mut delta = self.clone();
        delta.c[0] = S::zero();
        let mut r = Self::constant(&self.lay, self.order, coeffs[self.order].clone());
        for k in (0..self.order).rev() {
            r = r.mul(&delta).add_scalar(&coeffs[k]);
        }
        r
    }

    fn factorials(&self) -> Vec<S> {
        let mut f = vec![S::one()];
        for k in 1..=self.order {
            let prev = f[k - 1].clone();
            f.push(prev.mul_ref(&S::from_i64(k as i64)));
        }
        f
    }

    pub fn exp(&self) -> Result<Self, Error> {
        let e0 = self.c[0].exp().ok_or(Error::Unsupported("exp in exact mode"))?;
        let coeffs = self
            .factorials()
            .iter()
            .map(|f| e0.div_ref(f).unwrap())
            .collect::<Vec<_>>();
        Ok(self.compose(&coeffs))
    }

    fn trig(&self, cos: bool) -> Result<Self, Error> {
        let s0 = self.c[0].sin().ok_or(Error::Unsupported("sin in exact mode"))?;
        let c0 = self.c[0].cos().ok_or(Error::Unsupported("cos in exact mode"))?;
        let cycle = if cos {
            [c0.clone(), s0.neg_ref(), c0.neg_ref(), s0]
        } else {
            [s0.clone(), c0.clone(), s0.neg_ref(), c0.neg_ref()]
        };
        let coeffs = self
            .factorials()
            .iter()
            .enumerate()
            .map(|(k, f)| cycle[k % 4].div_ref(f).unwrap())
            .collect::<Vec<_>>();
        Ok(self.compose(&coeffs))
    }

    pub fn sin(&self) -> Result<Self, Error> {
        self.trig(false)
    }

    pub fn cos(&self) -> Result<Self, Error> {
        self.trig(true)
    }

    /// `∂f/∂x_d` as a jet of one order less.
    pub fn partial(&self, d: usize) -> Result<Self, Error> {
        if self.order == 0 {
            return Err(Error::InsufficientOrder { needed: 1, got: 0 });
        }
        let order = self.order - 1;
        let n = self.lay.len(order);
        let raise = &self.lay.raise[d];
        let mut c = Vec::with_capacity(n);
        for r in 0..n {
            let up = raise[r] as usize;
            let x = &self.c[up];
            if x.is_zero() {
                c.push(S::zero());
            } else {
                let mult = self.lay.exps[r][d] as i64 + 1;
                c.push(if mult == 1 { x.clone() } else { x.mul_ref(&S::from_i64(mult)) });
            }
        }
        Ok(Jet { lay: self.lay.clone(), order, c })
    }

    /// Largest coefficient magnitude, a float diagnostic.
    pub fn max_abs(&self) -> f64 {
        self.c.iter().map(S::abs_f64).fold(0.0, f64::max)
    }

    /// Degree of the highest nonzero coefficient.
    pub fn degree(&self) -> usize {
        (0..self.c.len()).rev().find(|&r| !self.c[r].is_zero()).map_or(0, |r| self.lay.degree_of(r))
    }
}

impl<'a, S: Scalar> Add for &'a Jet<S> {
    type Output = Jet<S>;
    fn add(self, o: Self) -> Jet<S> {
        Jet::add(self, o)
    }
}

impl<'a, S: Scalar> Sub for &'a Jet<S> {
    type Output = Jet<S>;
    fn sub(self, o: Self) -> Jet<S> {
        Jet::sub(self, o)
    }
}

impl<'a, S: Scalar> Mul for &'a Jet<S> {
    type Output = Jet<S>;
    fn mul(self, o: Self) -> Jet<S> {
        Jet::mul(self, o)
    }
}

impl<'a, S: Scalar> Neg for &'a Jet<S> {
    type Output = Jet<S>;
    fn neg(self) -> Jet<S> {
        Jet::neg(self)
    }
}

/// A complex-valued jet `re + i·im`.
#[derive(Clone, Debug)]
pub struct CJet<S> {
    pub re: Jet<S>,
    pub im: Jet<S>,
}

impl<S: Scalar> PartialEq for CJet<S> {
    fn eq(&self, o: &Self) -> bool {
        self.re == o.re && self.im == o.im
    }
}

impl<S: Scalar> CJet<S> {
    pub fn zero(lay: &Arc<Layout>, order: usize) -> Self {
        CJet { re: Jet::zero(lay, order), im: Jet::zero(lay, order) }
    }

    pub fn real(re: Jet<S>) -> Self {
        let im = Jet::zero(re.layout(), re.order());
        CJet { re, im }
    }

    pub fn new(re: Jet<S>, im: Jet<S>) -> Self {
        CJet { re, im }
    }

    pub fn constant(lay: &Arc<Layout>, order: usize, v: C<S>) -> Self {
        CJet { re: Jet::constant(lay, order, v.re), im: Jet::constant(lay, order, v.im) }
    }

    pub fn order(&self) -> usize {
        self.re.order().min(self.im.order())
    }

    pub fn layout(&self) -> &Arc<Layout> {
        self.re.layout()
    }

    pub fn value(&self) -> C<S> {
        C::new(self.re.value().clone(), self.im.value().clone())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        CJet { re: self.re.clone(), im: self.im.neg() }
    }

    pub fn add(&self, o: &Self) -> Self {
        CJet { re: self.re.add(&o.re), im: self.im.add(&o.im) }
    }

    pub fn sub(&self, o: &Self) -> Self {
        CJet { re: self.re.sub(&o.re), im: self.im.sub(&o.im) }
    }

    pub fn neg(&self) -> Self {
        CJet { re: self.re.neg(), im: self.im.neg() }
    }

    pub fn times_i(&self) -> Self {
        CJet { re: self.im.neg(), im: self.re.clone() }
    }

    pub fn add_assign(&mut self, o: &Self) {
        self.re.add_assign(&o.re);
        self.im.add_assign(&o.im);
    }

    pub fn sub_assign(&mut self, o: &Self) {
        self.re.sub_assign(&o.re);
        self.im.sub_assign(&o.im);
    }

    /// `self += a * b`
    pub fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        self.mul_acc(a, b, false);
    }

    /// `self -= a * b`
    pub fn mul_sub_assign(&mut self, a: &Self, b: &Self) {
        self.mul_acc(a, b, true);
    }

    fn mul_acc(&mut self, a: &Self, b: &Self, negate: bool) {
        let ai = !a.im.is_zero();
        let bi = !b.im.is_zero();
        let order = self.re.order().min(self.im.order()).min(a.order()).min(b.order());
        if negate {
            self.re.mul_sub_assign(&a.re, &b.re);
        } else {
            self.re.mul_add_assign(&a.re, &b.re);
        }
        if ai && bi {
            if negate {
                self.re.mul_add_assign(&a.im, &b.im);
            } else {
                self.re.mul_sub_assign(&a.im, &b.im);
            }
        }
        for (p, q, on) in [(&a.re, &b.im, bi), (&a.im, &b.re, ai)] {
            if on {
                if negate {
                    self.im.mul_sub_assign(p, q);
                } else {
                    self.im.mul_add_assign(p, q);
                }
            }
        }
        if self.re.order() > order {
            self.re = self.re.truncate(order);
        }
        if self.im.order() > order {
            self.im = self.im.truncate(order);
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = CJet::zero(self.layout(), self.order().min(o.order()));
        out.mul_add_assign(self, o);
        out
    }

    pub fn mul_real(&self, r: &Jet<S>) -> Self {
        CJet { re: self.re.mul(r), im: self.im.mul(r) }
    }

    pub fn scale(&self, s: &C<S>) -> Self {
        if s.im.is_zero() {
            return CJet { re: self.re.scale(&s.re), im: self.im.scale(&s.re) };
        }
        let re = self.re.scale(&s.re).sub(&self.im.scale(&s.im));
        let im = self.re.scale(&s.im).add(&self.im.scale(&s.re));
        CJet { re, im }
    }

    pub fn scale_real(&self, s: &S) -> Self {
        CJet { re: self.re.scale(s), im: self.im.scale(s) }
    }

    /// `|z|² = re² + im²`
    pub fn norm_sqr(&self) -> Jet<S> {
        let mut r = self.re.mul(&self.re);
        r.mul_add_assign(&self.im, &self.im);
        r
    }

    pub fn recip(&self) -> Result<Self, Error> {
        let inv = self.norm_sqr().recip()?;
        Ok(CJet { re: self.re.mul(&inv), im: self.im.neg().mul(&inv) })
    }

    pub fn div(&self, o: &Self) -> Result<Self, Error> {
        Ok(self.mul(&o.recip()?))
    }

    pub fn partial(&self, d: usize) -> Result<Self, Error> {
        Ok(CJet { re: self.re.partial(d)?, im: self.im.partial(d)? })
    }

    pub fn truncate(&self, order: usize) -> Self {
        CJet { re: self.re.truncate(order), im: self.im.truncate(order) }
    }
}

/// Closed-form scalar expressions over chart coordinates.
///
/// `Amb(i)` refers to the `i`-th ambient coordinate of the model embedding,
/// which for Heisenberg-type models is the chart coordinate itself.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Var(usize),
    Amb(usize),
    Const(BigRational),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
    Sqrt(Box<Expr>),
    Exp(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    /// Sum of `coef · Π amb_i^{e_i}` over ambient coordinates.
    Poly(Vec<(BigRational, Vec<u8>)>),
}

use alloc::boxed::Box;

impl Expr {
    pub fn var(i: usize) -> Self {
        Expr::Var(i)
    }

    pub fn int(v: i64) -> Self {
        Expr::Const(BigRational::from_integer(v.into()))
    }

    pub fn sqrt(self) -> Self {
        Expr::Sqrt(Box::new(self))
    }

    pub fn exp(self) -> Self {
        Expr::Exp(Box::new(self))
    }

    pub fn sin(self) -> Self {
        Expr::Sin(Box::new(self))
    }

    pub fn cos(self) -> Self {
        Expr::Cos(Box::new(self))
    }

    pub fn pow(self, e: u32) -> Self {
        Expr::Pow(Box::new(self), e)
    }

    /// Expands at the point encoded by the coordinate jets `x`; `amb` holds
    /// the ambient coordinates as jets of the same layout.
    pub fn lift<S: Scalar>(&self, x: &[Jet<S>], amb: &[Jet<S>]) -> Result<Jet<S>, Error> {
        let lay = x[0].layout();
        let order = x[0].order();
        Ok(match self {
            Expr::Var(i) => x.get(*i).ok_or(Error::Unsupported("coordinate index out of range"))?.clone(),
            Expr::Amb(i) => amb.get(*i).ok_or(Error::Unsupported("ambient index out of range"))?.clone(),
            Expr::Const(c) => Jet::constant(lay, order, S::from_rational(c)),
            Expr::Add(a, b) => a.lift(x, amb)?.add(&b.lift(x, amb)?),
            Expr::Sub(a, b) => a.lift(x, amb)?.sub(&b.lift(x, amb)?),
            Expr::Mul(a, b) => a.lift(x, amb)?.mul(&b.lift(x, amb)?),
            Expr::Div(a, b) => a.lift(x, amb)?.div(&b.lift(x, amb)?)?,
            Expr::Neg(a) => a.lift(x, amb)?.neg(),
            Expr::Pow(a, e) => a.lift(x, amb)?.powi(*e),
            Expr::Sqrt(a) => a.lift(x, amb)?.sqrt()?,
            Expr::Exp(a) => a.lift(x, amb)?.exp()?,
            Expr::Sin(a) => a.lift(x, amb)?.sin()?,
            Expr::Cos(a) => a.lift(x, amb)?.cos()?,
            Expr::Poly(terms) => {
                let mut acc = Jet::zero(lay, order);
                let mut powers: Vec<Vec<Jet<S>>> = amb.iter().map(|a| vec![Jet::constant(lay, order, S::one()), a.clone()]).collect();
                for (coef, e) in terms {
                    let mut mono = Jet::constant(lay, order, S::from_rational(coef));
                    for (i, &ei) in e.iter().enumerate() {
                        if ei == 0 {
                            continue;
                        }
                        let p = powers.get_mut(i).ok_or(Error::Unsupported("ambient index out of range"))?;
                        while p.len() <= ei as usize {
                            let next = p[p.len() - 1].mul(&p[1]);
                            p.push(next);
                        }
                        mono = mono.mul(&p[ei as usize]);
                    }
                    acc.add_assign(&mono);
                }
                acc
            }
        })
    }

    /// Chart coordinates the expression depends on, sorted. Ambient
    /// references count as every coordinate below `dim`.
    pub fn chart_vars(&self, dim: usize) -> Vec<usize> {
        fn walk(e: &Expr, dim: usize, out: &mut Vec<usize>) {
            match e {
                Expr::Var(i) => out.push(*i),
                Expr::Amb(_) | Expr::Poly(_) => out.extend(0..dim),
                Expr::Const(_) => {}
                Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                    walk(a, dim, out);
                    walk(b, dim, out);
                }
                Expr::Neg(a) | Expr::Pow(a, _) | Expr::Sqrt(a) | Expr::Exp(a) | Expr::Sin(a) | Expr::Cos(a) => walk(a, dim, out),
            }
        }
        let mut out = Vec::new();
        walk(self, dim, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Whether the expression only uses field operations.
    pub fn is_rational(&self) -> bool {
        match self {
            Expr::Var(_) | Expr::Amb(_) | Expr::Const(_) | Expr::Poly(_) => true,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.is_rational() && b.is_rational(),
            Expr::Neg(a) | Expr::Pow(a, _) => a.is_rational(),
            Expr::Sqrt(_) | Expr::Exp(_) | Expr::Sin(_) | Expr::Cos(_) => false,
        }
    }
}

macro_rules! expr_binop {
    ($tr:ident, $f:ident, $v:ident) => {
        impl core::ops::$tr for Expr {
            type Output = Expr;
            fn $f(self, o: Expr) -> Expr {
                Expr::$v(Box::new(self), Box::new(o))
            }
        }
    };
}
expr_binop!(Add, add, Add);
expr_binop!(Sub, sub, Sub);
expr_binop!(Mul, mul, Mul);
expr_binop!(Div, div, Div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

/// Order-`k` expansion of `expr` at `p` over chart coordinates only.
pub fn jet_lift<S: Scalar>(expr: &Expr, p: &[S], k: usize) -> Result<Jet<S>, Error> {
    let lay = Layout::new(p.len(), k);
    let x = Jet::coordinates(&lay, k, p);
    expr.lift(&x, &x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{ratio, Exact};

    fn q(n: i64, d: i64) -> Exact {
        Exact::from_ratio(n, d)
    }

    #[test]
    fn layout_sizes_and_prefix() {
        let lay = Layout::new(3, 4);
        assert_eq!(lay.len(0), 1);
        assert_eq!(lay.len(1), 4);
        assert_eq!(lay.len(4), 35);
        assert_eq!(lay.exponent(0), &[0, 0, 0]);
        for r in 0..lay.len(4) {
            assert_eq!(lay.rank(lay.exponent(r)), Some(r));
        }
    }

    #[test]
    fn product_of_coordinates() {
        let e = Expr::var(0) * Expr::var(1);
        let j = jet_lift(&e, &[q(1, 1), q(2, 1)], 2).unwrap();
        assert_eq!(j.value(), &q(2, 1));
        assert_eq!(j.coeff(&[1, 0]), q(2, 1));
        assert_eq!(j.coeff(&[0, 1]), q(1, 1));
        assert_eq!(j.coeff(&[1, 1]), q(1, 1));
        assert_eq!(j.coeff(&[2, 0]), q(0, 1));
        assert_eq!(j.coeff(&[0, 2]), q(0, 1));
    }

    #[test]
    fn sqrt_and_geometric_series() {
        let j = jet_lift(&Expr::var(0).sqrt(), &[q(4, 1)], 1).unwrap();
        assert_eq!(j.coeffs(), &[q(2, 1), q(1, 4)]);
        let g = Expr::int(1) / (Expr::int(1) + Expr::var(0).pow(2));
        let j = jet_lift(&g, &[q(0, 1)], 2).unwrap();
        assert_eq!(j.coeffs(), &[q(1, 1), q(0, 1), q(-1, 1)]);
    }

    #[test]
    fn arithmetic_examples() {
        let lay = Layout::new(1, 3);
        let x = Jet::var(&lay, 3, 0, q(0, 1));
        let one = Jet::constant(&lay, 3, q(1, 1));
        assert_eq!(x.mul(&x).coeff(&[2]), q(1, 1));
        let g = one.div(&one.sub(&x)).unwrap();
        assert_eq!(g.coeffs(), &[q(1, 1), q(1, 1), q(1, 1), q(1, 1)]);
        let s = one.add(&x).truncate(2).sqrt().unwrap();
        assert_eq!(s.coeffs(), &[q(1, 1), q(1, 2), q(-1, 8)]);
        assert!(Jet::<f64>::zero(&lay, 3).recip().is_err());
    }

    #[test]
    fn partial_examples() {
        let lay = Layout::new(3, 3);
        let x = Jet::coordinates(&lay, 3, &[q(1, 1), q(1, 1), q(3, 1)]);
        let f = x[0].mul(&x[0]).mul(&x[1]);
        let d = f.partial(0).unwrap();
        assert_eq!(d.value(), &q(2, 1));
        assert_eq!(d.order(), 2);
        assert!(Jet::constant(&lay, 3, q(5, 1)).partial(1).unwrap().is_zero());
        let xyt = x[0].mul(&x[1]).mul(&x[2]);
        let a = xyt.partial(0).unwrap().partial(1).unwrap();
        let b = xyt.partial(1).unwrap().partial(0).unwrap();
        assert_eq!(a, b);
        assert!(Jet::<f64>::zero(&lay, 0).partial(0).is_err());
    }

    #[test]
    fn transcendental_float() {
        let j = jet_lift(&Expr::var(0).exp(), &[0.5f64], 3).unwrap();
        let e = libm::exp(0.5);
        assert!((j.coeffs()[3] - e / 6.0).abs() < 1e-15);
        let s = jet_lift(&Expr::var(0).sin(), &[0.3f64], 2).unwrap();
        assert!((s.derivative(&[2]) + libm::sin(0.3)).abs() < 1e-15);
        let c = jet_lift(&Expr::var(0).cos(), &[0.3f64], 1).unwrap();
        assert!((c.derivative(&[1]) + libm::sin(0.3)).abs() < 1e-15);
    }

    #[test]
    fn exact_transcendentals_only_at_zero() {
        assert!(jet_lift(&Expr::var(0).exp(), &[q(1, 2)], 2).is_err());
        let j = jet_lift(&Expr::var(0).exp(), &[q(0, 1)], 3).unwrap();
        assert_eq!(j.coeffs(), &[q(1, 1), q(1, 1), q(1, 2), q(1, 6)]);
    }

    #[test]
    fn complex_jets_conjugate_products() {
        let lay = Layout::new(2, 2);
        let x = Jet::coordinates(&lay, 2, &[q(1, 3), q(-2, 5)]);
        let a = CJet::new(x[0].clone(), x[1].mul(&x[0]));
        let b = CJet::new(x[1].add_scalar(&q(1, 1)), x[0].neg());
        assert_eq!(a.mul(&b).conj(), a.conj().mul(&b.conj()));
        let z = a.div(&b).unwrap().mul(&b);
        assert_eq!(z, a);
        assert!(a.norm_sqr().value().is_positive());
    }

    #[test]
    fn poly_expression_lifts_monomials() {
        let p = Expr::Poly(vec![(ratio(3, 1), vec![2, 1]), (ratio(-1, 2), vec![0, 0])]);
        let j = jet_lift(&p, &[q(1, 1), q(2, 1)], 3).unwrap();
        assert_eq!(j.value(), &q(11, 2));
        assert_eq!(j.coeff(&[2, 1]), q(3, 1));
    }
}
