//! Scalar fields for jet coefficients: binary floating point and exact
//! arithmetic in the quadratic field Q(√2).

use core::cmp::Ordering;
use core::fmt;

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Field operations shared by the float and exact modes.
///
/// Arithmetic goes through reference methods so that generic code never
/// clones big rationals just to feed an operator.
pub trait Scalar: Clone + fmt::Debug + PartialEq + 'static {
    /// True when equality is decidable and arithmetic is exact.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn from_rational(r: &BigRational) -> Self;
    /// Exact modes convert the binary value exactly.
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool;

    fn add_ref(&self, o: &Self) -> Self;
    fn sub_ref(&self, o: &Self) -> Self;
    fn mul_ref(&self, o: &Self) -> Self;
    fn neg_ref(&self) -> Self;
    /// `None` when the divisor is zero.
    fn div_ref(&self, o: &Self) -> Option<Self>;

    fn add_assign_ref(&mut self, o: &Self);
    fn sub_assign_ref(&mut self, o: &Self);
    /// `self += a * b`
    fn mul_add_assign(&mut self, a: &Self, b: &Self);
    /// `self -= a * b`
    fn mul_sub_assign(&mut self, a: &Self, b: &Self) {
        if !a.is_zero() && !b.is_zero() {
            self.sub_assign_ref(&a.mul_ref(b));
        }
    }

    /// Square root of a positive value; exact modes fail outside the field.
    fn sqrt(&self) -> Option<Self>;
    fn exp(&self) -> Option<Self>;
    fn sin(&self) -> Option<Self>;
    fn cos(&self) -> Option<Self>;

    fn abs_f64(&self) -> f64 {
        self.to_f64().abs()
    }
    fn is_positive(&self) -> bool {
        self.to_f64() > 0.0
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn from_rational(r: &BigRational) -> Self {
        r.to_f64().unwrap_or(f64::NAN)
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn add_ref(&self, o: &Self) -> Self {
        self + o
    }
    fn sub_ref(&self, o: &Self) -> Self {
        self - o
    }
    fn mul_ref(&self, o: &Self) -> Self {
        self * o
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn div_ref(&self, o: &Self) -> Option<Self> {
        if *o == 0.0 {
            None
        } else {
            Some(self / o)
        }
    }
    fn add_assign_ref(&mut self, o: &Self) {
        *self += o;
    }
    fn sub_assign_ref(&mut self, o: &Self) {
        *self -= o;
    }
    fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn mul_sub_assign(&mut self, a: &Self, b: &Self) {
        *self -= a * b;
    }
    fn sqrt(&self) -> Option<Self> {
        if *self > 0.0 {
            Some(libm::sqrt(*self))
        } else {
            None
        }
    }
    fn exp(&self) -> Option<Self> {
        Some(libm::exp(*self))
    }
    fn sin(&self) -> Option<Self> {
        Some(libm::sin(*self))
    }
    fn cos(&self) -> Option<Self> {
        Some(libm::cos(*self))
    }
    fn is_positive(&self) -> bool {
        *self > 0.0
    }
}

/// An element `a + b√2` of Q(√2) with rational `a`, `b`.
///
/// The representation is canonical because √2 is irrational, so derived
/// equality is field equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Exact {
    pub a: BigRational,
    pub b: BigRational,
}

impl Exact {
    pub fn rational(a: BigRational) -> Self {
        Exact { a, b: BigRational::zero() }
    }

    pub fn new(a: BigRational, b: BigRational) -> Self {
        Exact { a, b }
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    /// `a - b√2`
    pub fn conjugate(&self) -> Self {
        Exact { a: self.a.clone(), b: -self.b.clone() }
    }

    /// Field norm `a² - 2b²`.
    pub fn norm(&self) -> BigRational {
        &self.a * &self.a - BigRational::from_integer(BigInt::from(2)) * &self.b * &self.b
    }

    pub fn sign(&self) -> Ordering {
        let sa = self.a.signum();
        let sb = self.b.signum();
        let pos = |r: &BigRational| r.is_positive();
        let neg = |r: &BigRational| r.is_negative();
        if (pos(&sa) || sa.is_zero()) && (pos(&sb) || sb.is_zero()) {
            if sa.is_zero() && sb.is_zero() {
                return Ordering::Equal;
            }
            return Ordering::Greater;
        }
        if (neg(&sa) || sa.is_zero()) && (neg(&sb) || sb.is_zero()) {
            return Ordering::Less;
        }
        // mixed signs: compare a² with 2b²
        let n = self.norm();
        if n.is_zero() {
            return Ordering::Equal;
        }
        let a_dominates = n.is_positive();
        match (a_dominates, pos(&sa)) {
            (true, true) | (false, false) => Ordering::Greater,
            _ => Ordering::Less,
        }
    }
}

fn rational_sqrt(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    if r.is_zero() {
        return Some(BigRational::zero());
    }
    let (p, q) = (r.numer(), r.denom());
    let sp = p.sqrt();
    let sq = q.sqrt();
    if &(&sp * &sp) == p && &(&sq * &sq) == q {
        Some(BigRational::new(sp, sq))
    } else {
        None
    }
}

impl fmt::Debug for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            write!(f, "{}", self.a)
        } else if self.a.is_zero() {
            write!(f, "{}·√2", self.b)
        } else {
            write!(f, "{} + {}·√2", self.a, self.b)
        }
    }
}

impl Scalar for Exact {
    const EXACT: bool = true;

    fn zero() -> Self {
        Exact::rational(BigRational::zero())
    }
    fn one() -> Self {
        Exact::rational(BigRational::one())
    }
    fn from_i64(v: i64) -> Self {
        Exact::rational(BigRational::from_integer(BigInt::from(v)))
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        Exact::rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }
    fn from_rational(r: &BigRational) -> Self {
        Exact::rational(r.clone())
    }
    fn from_f64(v: f64) -> Self {
        Exact::rational(BigRational::from_float(v).unwrap_or_else(BigRational::zero))
    }
    fn to_f64(&self) -> f64 {
        let a = self.a.to_f64().unwrap_or(f64::NAN);
        if self.b.is_zero() {
            a
        } else {
            a + self.b.to_f64().unwrap_or(f64::NAN) * core::f64::consts::SQRT_2
        }
    }
    fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }
    fn add_ref(&self, o: &Self) -> Self {
        Exact { a: &self.a + &o.a, b: &self.b + &o.b }
    }
    fn sub_ref(&self, o: &Self) -> Self {
        Exact { a: &self.a - &o.a, b: &self.b - &o.b }
    }
    fn mul_ref(&self, o: &Self) -> Self {
        if self.b.is_zero() && o.b.is_zero() {
            return Exact::rational(&self.a * &o.a);
        }
        let two = BigRational::from_integer(BigInt::from(2));
        Exact {
            a: &self.a * &o.a + two * &self.b * &o.b,
            b: &self.a * &o.b + &self.b * &o.a,
        }
    }
    fn neg_ref(&self) -> Self {
        Exact { a: -self.a.clone(), b: -self.b.clone() }
    }
    fn div_ref(&self, o: &Self) -> Option<Self> {
        if o.is_zero() {
            return None;
        }
        if o.b.is_zero() {
            return Some(Exact { a: &self.a / &o.a, b: &self.b / &o.a });
        }
        let n = o.norm();
        let num = self.mul_ref(&o.conjugate());
        Some(Exact { a: num.a / &n, b: num.b / n })
    }
    fn add_assign_ref(&mut self, o: &Self) {
        if !o.a.is_zero() {
            self.a += &o.a;
        }
        if !o.b.is_zero() {
            self.b += &o.b;
        }
    }
    fn sub_assign_ref(&mut self, o: &Self) {
        if !o.a.is_zero() {
            self.a -= &o.a;
        }
        if !o.b.is_zero() {
            self.b -= &o.b;
        }
    }
    fn mul_add_assign(&mut self, x: &Self, y: &Self) {
        if x.is_zero() || y.is_zero() {
            return;
        }
        if x.b.is_zero() && y.b.is_zero() {
            self.a += &x.a * &y.a;
            return;
        }
        let p = x.mul_ref(y);
        self.add_assign_ref(&p);
    }
    fn sqrt(&self) -> Option<Self> {
        if self.sign() != Ordering::Greater {
            return None;
        }
        if self.b.is_zero() {
            if let Some(r) = rational_sqrt(&self.a) {
                return Some(Exact::rational(r));
            }
            let half = &self.a / BigRational::from_integer(BigInt::from(2));
            return rational_sqrt(&half).map(|r| Exact::new(BigRational::zero(), r));
        }
        // (c + d√2)² = a + b√2  <=>  c² + 2d² = a, 2cd = b
        let disc = rational_sqrt(&self.norm())?;
        let two = BigRational::from_integer(BigInt::from(2));
        for s in [&self.a + &disc, &self.a - &disc] {
            let c2 = s / &two;
            if let Some(c) = rational_sqrt(&c2) {
                if c.is_zero() {
                    continue;
                }
                let d = &self.b / (&two * &c);
                let cand = Exact::new(c, d);
                if cand.sign() == Ordering::Greater && &cand.mul_ref(&cand) == self {
                    return Some(cand);
                }
            }
        }
        None
    }
    fn exp(&self) -> Option<Self> {
        self.is_zero().then(Self::one)
    }
    fn sin(&self) -> Option<Self> {
        self.is_zero().then(Self::zero)
    }
    fn cos(&self) -> Option<Self> {
        self.is_zero().then(Self::one)
    }
    fn is_positive(&self) -> bool {
        self.sign() == Ordering::Greater
    }
}

/// Builds a rational from a small fraction.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Rational approximation with bounded denominator, used for sampling points.
pub fn rational_from_parts(sign: bool, num: u64, den: u64) -> BigRational {
    let n = BigInt::from_biguint(if sign { Sign::Minus } else { Sign::Plus }, num.into());
    BigRational::new(n, BigInt::from(den))
}

/// A complex number over a scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct C<S> {
    pub re: S,
    pub im: S,
}

impl<S: Scalar> C<S> {
    pub fn new(re: S, im: S) -> Self {
        C { re, im }
    }
    pub fn real(re: S) -> Self {
        C { re, im: S::zero() }
    }
    pub fn zero() -> Self {
        C::real(S::zero())
    }
    pub fn one() -> Self {
        C::real(S::one())
    }
    pub fn i() -> Self {
        C { re: S::zero(), im: S::one() }
    }
    pub fn from_f64(re: f64, im: f64) -> Self {
        C { re: S::from_f64(re), im: S::from_f64(im) }
    }
    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    pub fn conj(&self) -> Self {
        C { re: self.re.clone(), im: self.im.neg_ref() }
    }
    pub fn add(&self, o: &Self) -> Self {
        C { re: self.re.add_ref(&o.re), im: self.im.add_ref(&o.im) }
    }
    pub fn sub(&self, o: &Self) -> Self {
        C { re: self.re.sub_ref(&o.re), im: self.im.sub_ref(&o.im) }
    }
    pub fn neg(&self) -> Self {
        C { re: self.re.neg_ref(), im: self.im.neg_ref() }
    }
    pub fn mul(&self, o: &Self) -> Self {
        let mut re = self.re.mul_ref(&o.re);
        re.sub_assign_ref(&self.im.mul_ref(&o.im));
        let mut im = self.re.mul_ref(&o.im);
        im.mul_add_assign(&self.im, &o.re);
        C { re, im }
    }
    pub fn scale(&self, s: &S) -> Self {
        C { re: self.re.mul_ref(s), im: self.im.mul_ref(s) }
    }
    pub fn times_i(&self) -> Self {
        C { re: self.im.neg_ref(), im: self.re.clone() }
    }
    pub fn add_assign(&mut self, o: &Self) {
        self.re.add_assign_ref(&o.re);
        self.im.add_assign_ref(&o.im);
    }
    pub fn sub_assign(&mut self, o: &Self) {
        self.re.sub_assign_ref(&o.re);
        self.im.sub_assign_ref(&o.im);
    }
    /// `self += a * b`
    pub fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        self.re.mul_add_assign(&a.re, &b.re);
        self.re.sub_assign_ref(&a.im.mul_ref(&b.im));
        self.im.mul_add_assign(&a.re, &b.im);
        self.im.mul_add_assign(&a.im, &b.re);
    }
    pub fn norm_sqr(&self) -> S {
        let mut r = self.re.mul_ref(&self.re);
        r.mul_add_assign(&self.im, &self.im);
        r
    }
    pub fn abs_f64(&self) -> f64 {
        libm::hypot(self.re.to_f64(), self.im.to_f64())
    }
    pub fn to_f64(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_inverse_uses_conjugate() {
        let x = Exact::new(ratio(1, 1), ratio(1, 1));
        let inv = Exact::one().div_ref(&x).unwrap();
        assert_eq!(inv, Exact::new(ratio(-1, 1), ratio(1, 1)));
        assert_eq!(x.mul_ref(&inv), Exact::one());
    }

    #[test]
    fn exact_square_roots() {
        assert_eq!(Exact::from_ratio(9, 4).sqrt(), Some(Exact::from_ratio(3, 2)));
        let r2 = Exact::from_i64(2).sqrt().unwrap();
        assert_eq!(r2, Exact::new(ratio(0, 1), ratio(1, 1)));
        // 3 + 2√2 = (1 + √2)²
        let s = Exact::new(ratio(3, 1), ratio(2, 1)).sqrt().unwrap();
        assert_eq!(s, Exact::new(ratio(1, 1), ratio(1, 1)));
        assert!(Exact::from_i64(3).sqrt().is_none());
        assert!(Exact::from_i64(-4).sqrt().is_none());
    }

    #[test]
    fn exact_sign_handles_mixed_terms() {
        assert_eq!(Exact::new(ratio(-1, 1), ratio(1, 1)).sign(), Ordering::Greater);
        assert_eq!(Exact::new(ratio(2, 1), ratio(-1, 1)).sign(), Ordering::Greater);
        assert_eq!(Exact::new(ratio(1, 1), ratio(-1, 1)).sign(), Ordering::Less);
    }

    #[test]
    fn complex_product() {
        let a = C::<f64>::new(1.0, 2.0);
        let b = C::<f64>::new(3.0, -1.0);
        assert_eq!(a.mul(&b), C::new(5.0, 5.0));
        let mut acc = C::<f64>::zero();
        acc.mul_add_assign(&a, &b);
        assert_eq!(acc, a.mul(&b));
    }
}
