//! Truncated bivariate Taylor polynomials of total degree three.
//!
//! A [`Taylor2`] stores the coefficients of `sum c_ab s^a t^b` for `a + b <= 3`.
//! Arithmetic truncates at degree three, so composing elementary functions with
//! chart coordinates yields exact third-order jets of the composite map at the
//! chart origin. Differentiating loses one order of validity; callers track that.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// Number of stored coefficients.
pub const LEN: usize = 10;

/// Exponent pairs `(a, b)` for each coefficient slot.
pub const EXPONENTS: [(usize, usize); LEN] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
];

/// Slot of the monomial `s^a t^b`, or `None` when its degree exceeds three.
pub const fn slot(a: usize, b: usize) -> Option<usize> {
    match (a, b) {
        (0, 0) => Some(0),
        (1, 0) => Some(1),
        (0, 1) => Some(2),
        (2, 0) => Some(3),
        (1, 1) => Some(4),
        (0, 2) => Some(5),
        (3, 0) => Some(6),
        (2, 1) => Some(7),
        (1, 2) => Some(8),
        (0, 3) => Some(9),
        _ => None,
    }
}

const fn product_table() -> ([(u8, u8, u8); 35], usize) {
    let mut out = [(0u8, 0u8, 0u8); 35];
    let mut n = 0;
    let mut i = 0;
    while i < LEN {
        let mut j = 0;
        while j < LEN {
            let (a1, b1) = EXPONENTS[i];
            let (a2, b2) = EXPONENTS[j];
            if let Some(k) = slot(a1 + a2, b1 + b2) {
                out[n] = (i as u8, j as u8, k as u8);
                n += 1;
            }
            j += 1;
        }
        i += 1;
    }
    (out, n)
}

const PRODUCTS: ([(u8, u8, u8); 35], usize) = product_table();

const FACT: [f64; 4] = [1.0, 1.0, 2.0, 6.0];

/// Truncated Taylor polynomial in two variables `(s, t)`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Taylor2 {
    pub c: [f64; LEN],
}

impl Taylor2 {
    pub const ZERO: Taylor2 = Taylor2 { c: [0.0; LEN] };

    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = v;
        Taylor2 { c }
    }

    /// The coordinate `s` shifted by `v`.
    pub fn var_s(v: f64) -> Self {
        let mut t = Self::constant(v);
        t.c[1] = 1.0;
        t
    }

    /// The coordinate `t` shifted by `v`.
    pub fn var_t(v: f64) -> Self {
        let mut t = Self::constant(v);
        t.c[2] = 1.0;
        t
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Mixed partial derivative `d^(a+b) / ds^a dt^b` at the origin.
    pub fn partial(&self, a: usize, b: usize) -> f64 {
        match slot(a, b) {
            Some(k) => self.c[k] * FACT[a] * FACT[b],
            None => 0.0,
        }
    }

    /// Evaluate the polynomial at `(s, t)`.
    pub fn eval(&self, s: f64, t: f64) -> f64 {
        EXPONENTS
            .iter()
            .zip(self.c.iter())
            .map(|(&(a, b), &c)| c * s.powi(a as i32) * t.powi(b as i32))
            .sum()
    }

    /// Derivative in `s`; the degree-three part of the result is zero.
    pub fn d_s(&self) -> Self {
        let mut out = Self::ZERO;
        for (k, &(a, b)) in EXPONENTS.iter().enumerate() {
            if a > 0 {
                out.c[slot(a - 1, b).unwrap()] += a as f64 * self.c[k];
            }
        }
        out
    }

    /// Derivative in `t`; the degree-three part of the result is zero.
    pub fn d_t(&self) -> Self {
        let mut out = Self::ZERO;
        for (k, &(a, b)) in EXPONENTS.iter().enumerate() {
            if b > 0 {
                out.c[slot(a, b - 1).unwrap()] += b as f64 * self.c[k];
            }
        }
        out
    }

    /// Derivative along coordinate `i` (0 for `s`, 1 for `t`).
    pub fn d(&self, i: usize) -> Self {
        if i == 0 {
            self.d_s()
        } else {
            self.d_t()
        }
    }

    /// Compose a scalar function given its value and first three derivatives at
    /// the constant term.
    pub fn compose(&self, f: [f64; 4]) -> Self {
        let mut delta = *self;
        delta.c[0] = 0.0;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let mut out = Self::constant(f[0]);
        for k in 1..LEN {
            out.c[k] = f[1] * delta.c[k] + 0.5 * f[2] * d2.c[k] + f[3] / 6.0 * d3.c[k];
        }
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.c[0].exp();
        self.compose([e; 4])
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn sinh(&self) -> Self {
        let (s, c) = (self.c[0].sinh(), self.c[0].cosh());
        self.compose([s, c, s, c])
    }

    pub fn cosh(&self) -> Self {
        let (s, c) = (self.c[0].sinh(), self.c[0].cosh());
        self.compose([c, s, c, s])
    }

    pub fn tanh(&self) -> Self {
        let th = self.c[0].tanh();
        let d1 = 1.0 - th * th;
        self.compose([th, d1, -2.0 * th * d1, d1 * (6.0 * th * th - 2.0)])
    }

    pub fn sqrt(&self) -> Self {
        let v = self.c[0].sqrt();
        let v3 = v * v * v;
        self.compose([v, 0.5 / v, -0.25 / v3, 0.375 / (v3 * v * v)])
    }

    pub fn recip(&self) -> Self {
        let r = 1.0 / self.c[0];
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn atanh(&self) -> Self {
        let x = self.c[0];
        let q = 1.0 / (1.0 - x * x);
        self.compose([
            x.atanh(),
            q,
            2.0 * x * q * q,
            (2.0 + 6.0 * x * x) * q * q * q,
        ])
    }

    pub fn asin(&self) -> Self {
        let x = self.c[0];
        let q = 1.0 / (1.0 - x * x);
        let r = q.sqrt();
        self.compose([x.asin(), r, x * q * r, (1.0 + 2.0 * x * x) * q * q * r])
    }

    pub fn atan(&self) -> Self {
        let x = self.c[0];
        let q = 1.0 / (1.0 + x * x);
        self.compose([x.atan(), q, -2.0 * x * q * q, (6.0 * x * x - 2.0) * q * q * q])
    }

    /// `atan2(self, other)` continued smoothly from the branch value at the origin.
    pub fn atan2(&self, other: &Taylor2) -> Self {
        let y0 = self.c[0];
        let x0 = other.c[0];
        let base = y0.atan2(x0);
        // Rotate so the base direction lands on the positive first axis; the
        // remaining angle is small and atan is smooth there.
        let r = (x0 * x0 + y0 * y0).sqrt();
        let (c, s) = (x0 / r, y0 / r);
        let u = *other * c + *self * s;
        let v = *self * c - *other * s;
        let mut out = (v / u).atan();
        out.c[0] = base;
        out
    }

    pub fn scale(&self, k: f64) -> Self {
        let mut out = *self;
        out.c.iter_mut().for_each(|c| *c *= k);
        out
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

impl Add for Taylor2 {
    type Output = Taylor2;
    fn add(mut self, rhs: Taylor2) -> Taylor2 {
        for k in 0..LEN {
            self.c[k] += rhs.c[k];
        }
        self
    }
}

impl AddAssign for Taylor2 {
    fn add_assign(&mut self, rhs: Taylor2) {
        for k in 0..LEN {
            self.c[k] += rhs.c[k];
        }
    }
}

impl Add<f64> for Taylor2 {
    type Output = Taylor2;
    fn add(mut self, rhs: f64) -> Taylor2 {
        self.c[0] += rhs;
        self
    }
}

impl Sub for Taylor2 {
    type Output = Taylor2;
    fn sub(mut self, rhs: Taylor2) -> Taylor2 {
        for k in 0..LEN {
            self.c[k] -= rhs.c[k];
        }
        self
    }
}

impl Sub<f64> for Taylor2 {
    type Output = Taylor2;
    fn sub(mut self, rhs: f64) -> Taylor2 {
        self.c[0] -= rhs;
        self
    }
}

impl Neg for Taylor2 {
    type Output = Taylor2;
    fn neg(self) -> Taylor2 {
        self.scale(-1.0)
    }
}

impl Mul for Taylor2 {
    type Output = Taylor2;
    fn mul(self, rhs: Taylor2) -> Taylor2 {
        let mut out = Taylor2::ZERO;
        let (table, n) = &PRODUCTS;
        for &(i, j, k) in &table[..*n] {
            out.c[k as usize] += self.c[i as usize] * rhs.c[j as usize];
        }
        out
    }
}

impl Mul<f64> for Taylor2 {
    type Output = Taylor2;
    fn mul(self, rhs: f64) -> Taylor2 {
        self.scale(rhs)
    }
}

impl Mul<Taylor2> for f64 {
    type Output = Taylor2;
    fn mul(self, rhs: Taylor2) -> Taylor2 {
        rhs.scale(self)
    }
}

impl Div for Taylor2 {
    type Output = Taylor2;
    fn div(self, rhs: Taylor2) -> Taylor2 {
        self * rhs.recip()
    }
}

impl Div<f64> for Taylor2 {
    type Output = Taylor2;
    fn div(self, rhs: f64) -> Taylor2 {
        self.scale(1.0 / rhs)
    }
}

/// Three-vector of Taylor polynomials.
pub type TVec3 = [Taylor2; 3];

pub fn tdot(a: &TVec3, b: &TVec3) -> Taylor2 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn tcross(a: &TVec3, b: &TVec3) -> TVec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn tscale(a: &TVec3, k: &Taylor2) -> TVec3 {
    [a[0] * *k, a[1] * *k, a[2] * *k]
}

pub fn tadd(a: &TVec3, b: &TVec3) -> TVec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn tnormalize(a: &TVec3) -> TVec3 {
    tscale(a, &tdot(a, a).sqrt().recip())
}

pub fn tderiv(a: &TVec3, i: usize) -> TVec3 {
    [a[0].d(i), a[1].d(i), a[2].d(i)]
}

pub fn tvalue(a: &TVec3) -> nalgebra::Vector3<f64> {
    nalgebra::Vector3::new(a[0].value(), a[1].value(), a[2].value())
}

pub fn tconst(v: &nalgebra::Vector3<f64>) -> TVec3 {
    [
        Taylor2::constant(v.x),
        Taylor2::constant(v.y),
        Taylor2::constant(v.z),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn poly(c: f64) -> Taylor2 {
        Taylor2::var_s(0.0) * 0.7 + Taylor2::var_t(0.0) * 0.3 + Taylor2::var_s(0.0) * Taylor2::var_t(0.0) + c
    }

    // Central finite differences of a closure as an independent check.
    fn fd_partials(f: impl Fn(f64, f64) -> f64) -> [f64; 6] {
        let h = 1e-3;
        let f0 = f(0.0, 0.0);
        [
            f0,
            (f(h, 0.0) - f(-h, 0.0)) / (2.0 * h),
            (f(0.0, h) - f(0.0, -h)) / (2.0 * h),
            (f(h, 0.0) - 2.0 * f0 + f(-h, 0.0)) / (h * h),
            (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h),
            (f(0.0, h) - 2.0 * f0 + f(0.0, -h)) / (h * h),
        ]
    }

    fn check(jet: Taylor2, f: impl Fn(f64, f64) -> f64) {
        let fd = fd_partials(f);
        let got = [
            jet.partial(0, 0),
            jet.partial(1, 0),
            jet.partial(0, 1),
            jet.partial(2, 0),
            jet.partial(1, 1),
            jet.partial(0, 2),
        ];
        for k in 0..6 {
            assert_relative_eq!(got[k], fd[k], epsilon = 2e-5, max_relative = 2e-5);
        }
    }

    #[test]
    fn product_table_is_complete() {
        assert_eq!(PRODUCTS.1, 35);
    }

    #[test]
    fn elementary_functions_match_finite_differences() {
        let g = |s: f64, t: f64| 0.2 + 0.7 * s + 0.3 * t + s * t;
        let p = poly(0.2);
        check(p.exp(), |s, t| g(s, t).exp());
        check(p.sin(), |s, t| g(s, t).sin());
        check(p.cos(), |s, t| g(s, t).cos());
        check(p.sinh(), |s, t| g(s, t).sinh());
        check(p.cosh(), |s, t| g(s, t).cosh());
        check(p.atanh(), |s, t| g(s, t).atanh());
        check(p.atan(), |s, t| g(s, t).atan());
        check(p.asin(), |s, t| g(s, t).asin());
        check(p.tanh(), |s, t| g(s, t).tanh());
        check(p.sqrt(), |s, t| g(s, t).sqrt());
        check(p.recip(), |s, t| 1.0 / g(s, t));
        let q = Taylor2::var_t(-0.4) + Taylor2::var_s(0.0) * 0.5;
        check(p.atan2(&q), |s, t| g(s, t).atan2(-0.4 + t + 0.5 * s));
    }

    #[test]
    fn third_order_coefficients_are_exact() {
        // exp(s + t) has c_ab = 1 / (a! b!).
        let p = (Taylor2::var_s(0.0) + Taylor2::var_t(0.0)).exp();
        for &(a, b) in EXPONENTS.iter() {
            assert_relative_eq!(p.partial(a, b), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn atan2_keeps_branch_near_negative_axis() {
        let y = Taylor2::var_s(-1e-3);
        let x = Taylor2::constant(-1.0);
        let a = y.atan2(&x);
        assert_relative_eq!(a.value(), (-1e-3f64).atan2(-1.0), epsilon = 1e-15);
        assert_relative_eq!(a.partial(1, 0), -1.0 / (1.0 + 1e-6), epsilon = 1e-12);
    }
}
