//! Double-double scalar (about 106 significant bits) for finite-difference
//! oracles. At a step of 1e-5, f64 central differences lose all digits once a
//! partial derivative falls below about 1e-6 of the function value; this type
//! pushes that floor down by roughly sixteen orders of magnitude.
//!
//! Arithmetic, `exp`, `tanh`, `sqrt`, `powi` and comparisons are carried out
//! in full double-double precision. These are the only operations the network
//! forward pass uses. Every other `Float` method goes through `f64` on the
//! rounded value and is there only to satisfy the trait.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::num::FpCategory;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign};
use std::sync::OnceLock;

use layoutforge_core::Real;
use num_traits::{Float, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

fn inverse_factorials() -> &'static [Dd; 12] {
    static TABLE: OnceLock<[Dd; 12]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut out = [Dd::one(); 12];
        let mut f = Dd::one();
        for (n, slot) in out.iter_mut().enumerate() {
            f /= Dd::from_f64((n + 1) as f64);
            *slot = f;
        }
        out
    })
}

const LN2: Dd = Dd { hi: std::f64::consts::LN_2, lo: 2.3190468138462996e-17 };

impl Dd {
    pub const fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Self { hi, lo }
    }

    /// Multiplies by a power of two, which is exact.
    fn scale_pow2(self, k: i32) -> Self {
        let f = 2f64.powi(k);
        Self { hi: self.hi * f, lo: self.lo * f }
    }

    fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        Self::renorm(p, e + self.lo * b)
    }

    fn dd_exp(self) -> Self {
        if self.hi > 709.0 {
            return Self::from_f64(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Self::zero();
        }
        // x = k ln2 + r, then exp(r) = (exp(r / 2^10))^(2^10)
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2.mul_f64(k)).scale_pow2(-10);
        // |r| < 3.4e-4, so twelve Taylor terms reach 1e-45
        let mut term = Self::one();
        let mut sum = Self::one();
        for inv in inverse_factorials() {
            term *= r;
            sum += term * *inv;
        }
        for _ in 0..10 {
            sum = sum * sum;
        }
        sum.scale_pow2(k as i32)
    }

    fn dd_tanh(self) -> Self {
        if self.hi == 0.0 {
            return self;
        }
        let a = self.abs();
        let t = if a.hi > 40.0 { Self::one() } else { Self::one() - Self::from_f64(2.0) / ((a + a).dd_exp() + Self::one()) };
        if self.hi < 0.0 {
            -t
        } else {
            t
        }
    }

    fn dd_sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Self::from_f64(self.hi.sqrt());
        }
        let y = Self::from_f64(self.hi.sqrt());
        y + (self - y * y) / (y + y)
    }
}

impl Add for Dd {
    type Output = Self;
    fn add(self, b: Self) -> Self {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Self::renorm(s, e + f)
    }
}

impl Neg for Dd {
    type Output = Self;
    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Self;
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Self;
    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        Self::renorm(p, e + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Div for Dd {
    type Output = Self;
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        Self::renorm(q1, q2) + Self::from_f64(q3)
    }
}

impl Rem for Dd {
    type Output = Self;
    fn rem(self, b: Self) -> Self {
        self - b * (self / b).trunc()
    }
}

macro_rules! assign_ops {
    ($($tr:ident $m:ident $op:tt),*) => {$(
        impl $tr for Dd {
            fn $m(&mut self, b: Self) {
                *self = *self $op b;
            }
        }
    )*};
}
assign_ops!(AddAssign add_assign +, SubAssign sub_assign -, MulAssign mul_assign *, DivAssign div_assign /, RemAssign rem_assign %);

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&other.lo),
            o => Some(o),
        }
    }
}

impl Zero for Dd {
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn is_zero(&self) -> bool {
        self.hi == 0.0
    }
}

impl One for Dd {
    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Num for Dd {
    type FromStrRadixErr = <f64 as Num>::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Self::from_f64)
    }
}

impl ToPrimitive for Dd {
    fn to_i64(&self) -> Option<i64> {
        Dd::to_f64(*self).to_i64()
    }
    fn to_u64(&self) -> Option<u64> {
        Dd::to_f64(*self).to_u64()
    }
    fn to_f64(&self) -> Option<f64> {
        Some(Dd::to_f64(*self))
    }
}

impl FromPrimitive for Dd {
    fn from_i64(n: i64) -> Option<Self> {
        let hi = n as f64;
        Some(Self::renorm(hi, (n - hi as i64) as f64))
    }
    fn from_u64(n: u64) -> Option<Self> {
        let hi = n as f64;
        Some(Self::renorm(hi, (n as i128 - hi as i128) as f64))
    }
    fn from_f64(x: f64) -> Option<Self> {
        Some(Dd::from_f64(x))
    }
}

impl NumCast for Dd {
    fn from<T: ToPrimitive>(n: T) -> Option<Self> {
        n.to_f64().map(Dd::from_f64)
    }
}

impl Sum for Dd {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |a, b| a + b)
    }
}

impl fmt::Display for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e} + {:e}", self.hi, self.lo)
    }
}

/// Lifts an `f64` function of the rounded value.
fn via(x: Dd, f: impl Fn(f64) -> f64) -> Dd {
    Dd::from_f64(f(x.to_f64()))
}

impl Float for Dd {
    fn nan() -> Self {
        Self::from_f64(f64::NAN)
    }
    fn infinity() -> Self {
        Self::from_f64(f64::INFINITY)
    }
    fn neg_infinity() -> Self {
        Self::from_f64(f64::NEG_INFINITY)
    }
    fn neg_zero() -> Self {
        Self::from_f64(-0.0)
    }
    fn min_value() -> Self {
        Self::from_f64(f64::MIN)
    }
    fn min_positive_value() -> Self {
        Self::from_f64(f64::MIN_POSITIVE)
    }
    fn max_value() -> Self {
        Self::from_f64(f64::MAX)
    }
    fn is_nan(self) -> bool {
        self.hi.is_nan()
    }
    fn is_infinite(self) -> bool {
        self.hi.is_infinite()
    }
    fn is_finite(self) -> bool {
        self.hi.is_finite()
    }
    fn is_normal(self) -> bool {
        self.hi.is_normal()
    }
    fn classify(self) -> FpCategory {
        self.hi.classify()
    }
    fn floor(self) -> Self {
        let hi = self.hi.floor();
        if hi == self.hi {
            Self::renorm(hi, self.lo.floor())
        } else {
            Self::from_f64(hi)
        }
    }
    fn ceil(self) -> Self {
        -(-self).floor()
    }
    fn round(self) -> Self {
        (self + Self::from_f64(0.5)).floor()
    }
    fn trunc(self) -> Self {
        if self.hi < 0.0 {
            self.ceil()
        } else {
            self.floor()
        }
    }
    fn fract(self) -> Self {
        self - self.trunc()
    }
    fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }
    fn signum(self) -> Self {
        Self::from_f64(self.hi.signum())
    }
    fn is_sign_positive(self) -> bool {
        self.hi.is_sign_positive()
    }
    fn is_sign_negative(self) -> bool {
        self.hi.is_sign_negative()
    }
    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }
    fn recip(self) -> Self {
        Self::one() / self
    }
    fn powi(self, n: i32) -> Self {
        let mut base = if n < 0 { self.recip() } else { self };
        let mut e = n.unsigned_abs();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }
    fn powf(self, n: Self) -> Self {
        via(self, |x| x.powf(n.to_f64()))
    }
    fn sqrt(self) -> Self {
        self.dd_sqrt()
    }
    fn exp(self) -> Self {
        self.dd_exp()
    }
    fn exp2(self) -> Self {
        via(self, f64::exp2)
    }
    fn ln(self) -> Self {
        via(self, f64::ln)
    }
    fn log(self, base: Self) -> Self {
        via(self, |x| x.log(base.to_f64()))
    }
    fn log2(self) -> Self {
        via(self, f64::log2)
    }
    fn log10(self) -> Self {
        via(self, f64::log10)
    }
    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
    fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
    fn abs_sub(self, other: Self) -> Self {
        if self > other {
            self - other
        } else {
            Self::zero()
        }
    }
    fn cbrt(self) -> Self {
        via(self, f64::cbrt)
    }
    fn hypot(self, other: Self) -> Self {
        (self * self + other * other).sqrt()
    }
    fn sin(self) -> Self {
        via(self, f64::sin)
    }
    fn cos(self) -> Self {
        via(self, f64::cos)
    }
    fn tan(self) -> Self {
        via(self, f64::tan)
    }
    fn asin(self) -> Self {
        via(self, f64::asin)
    }
    fn acos(self) -> Self {
        via(self, f64::acos)
    }
    fn atan(self) -> Self {
        via(self, f64::atan)
    }
    fn atan2(self, other: Self) -> Self {
        via(self, |y| y.atan2(other.to_f64()))
    }
    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
    fn exp_m1(self) -> Self {
        self.exp() - Self::one()
    }
    fn ln_1p(self) -> Self {
        via(self, f64::ln_1p)
    }
    fn sinh(self) -> Self {
        let e = self.exp();
        (e - e.recip()) / Self::from_f64(2.0)
    }
    fn cosh(self) -> Self {
        let e = self.exp();
        (e + e.recip()) / Self::from_f64(2.0)
    }
    fn tanh(self) -> Self {
        self.dd_tanh()
    }
    fn asinh(self) -> Self {
        via(self, f64::asinh)
    }
    fn acosh(self) -> Self {
        via(self, f64::acosh)
    }
    fn atanh(self) -> Self {
        via(self, f64::atanh)
    }
    fn integer_decode(self) -> (u64, i16, i8) {
        self.hi.integer_decode()
    }
}

impl Real for Dd {}

#[cfg(test)]
mod checks {
    use super::*;

    fn close(a: Dd, b: Dd, tol: f64) -> bool {
        (a - b).abs().to_f64() <= tol * b.abs().to_f64().max(1e-300)
    }

    #[test]
    fn third_times_three_is_one() {
        let third = Dd::one() / Dd::from_f64(3.0);
        assert!(close(third * Dd::from_f64(3.0), Dd::one(), 1e-31));
        assert!(third.lo != 0.0);
    }

    #[test]
    fn exp_log_identities() {
        // the ten squarings cost about three digits of the 32 available
        for (a, b) in [(0.3, 1.7), (-4.25, 2.5), (1e-9, 3.0), (12.0, -11.5)] {
            let (a, b) = (Dd::from_f64(a), Dd::from_f64(b));
            let (lhs, rhs) = (a.exp() * b.exp(), (a + b).exp());
            assert!(close(lhs, rhs, 1e-28), "{lhs} vs {rhs}");
        }
        assert!(close(LN2.exp(), Dd::from_f64(2.0), 1e-31));
    }

    #[test]
    fn tanh_matches_definition() {
        for x in [-7.0, -0.8, 0.03, 0.5, 2.2, 19.0] {
            let x = Dd::from_f64(x);
            let e = (x + x).exp();
            let want = (e - Dd::one()) / (e + Dd::one());
            assert!((x.tanh() - want).abs().to_f64() < 1e-30);
            assert!((x.tanh().to_f64() - x.to_f64().tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let two = Dd::from_f64(2.0);
        assert!(close(two.sqrt() * two.sqrt(), two, 1e-31));
    }
}
