//! Second-order forward-mode jets: value, gradient and Hessian of a scalar.
//!
//! Analytic fields are written as ordinary arithmetic on [`Jet`]s seeded by
//! [`Jet::coord`], which yields exact first and second derivatives.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Largest spatial dimension carried by fixed-size tensor buffers.
pub const MAXN: usize = 4;

pub type V1 = [f64; MAXN];
pub type V2 = [[f64; MAXN]; MAXN];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d: V1,
    pub dd: V2,
}

impl Default for Jet {
    fn default() -> Self {
        Jet::constant(0.0)
    }
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Jet { v, d: [0.0; MAXN], dd: [[0.0; MAXN]; MAXN] }
    }

    /// The coordinate function `x_axis` evaluated at `value`.
    pub fn coord(value: f64, axis: usize) -> Self {
        let mut j = Jet::constant(value);
        j.d[axis] = 1.0;
        j
    }

    /// Coordinate jets for every axis of the point `x`.
    pub fn coords(x: &[f64]) -> Vec<Jet> {
        x.iter().enumerate().map(|(a, &v)| Jet::coord(v, a)).collect()
    }

    pub fn nan() -> Self {
        Jet { v: f64::NAN, d: [f64::NAN; MAXN], dd: [[f64::NAN; MAXN]; MAXN] }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.d.iter().all(|x| x.is_finite()) && self.dd.iter().flatten().all(|x| x.is_finite())
    }

    /// Applies a scalar function given its value and first two derivatives at `self.v`.
    #[inline]
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let mut out = Jet::constant(f0);
        for a in 0..MAXN {
            out.d[a] = f1 * self.d[a];
            for b in 0..MAXN {
                out.dd[a][b] = f1 * self.dd[a][b] + f2 * self.d[a] * self.d[b];
            }
        }
        out
    }

    pub fn powf(&self, p: f64) -> Self {
        let v = self.v;
        self.chain(v.powf(p), p * v.powf(p - 1.0), p * (p - 1.0) * v.powf(p - 2.0))
    }

    pub fn powi(&self, p: i32) -> Self {
        let v = self.v;
        let pf = p as f64;
        self.chain(v.powi(p), pf * v.powi(p - 1), pf * (pf - 1.0) * v.powi(p - 2))
    }

    pub fn sqrt(&self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Self {
        let v = self.v;
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn recip(&self) -> Self {
        let v = self.v;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = *self;
        out.v *= c;
        for a in 0..MAXN {
            out.d[a] *= c;
            for b in 0..MAXN {
                out.dd[a][b] *= c;
            }
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    #[inline]
    fn add(mut self, o: Jet) -> Jet {
        self += o;
        self
    }
}

impl AddAssign for Jet {
    #[inline]
    fn add_assign(&mut self, o: Jet) {
        self.v += o.v;
        for a in 0..MAXN {
            self.d[a] += o.d[a];
            for b in 0..MAXN {
                self.dd[a][b] += o.dd[a][b];
            }
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    #[inline]
    fn sub(mut self, o: Jet) -> Jet {
        self -= o;
        self
    }
}

impl SubAssign for Jet {
    #[inline]
    fn sub_assign(&mut self, o: Jet) {
        self.v -= o.v;
        for a in 0..MAXN {
            self.d[a] -= o.d[a];
            for b in 0..MAXN {
                self.dd[a][b] -= o.dd[a][b];
            }
        }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    #[inline]
    fn mul(self, o: Jet) -> Jet {
        let mut out = Jet::constant(self.v * o.v);
        for a in 0..MAXN {
            out.d[a] = self.d[a] * o.v + self.v * o.d[a];
            for b in 0..MAXN {
                out.dd[a][b] = self.dd[a][b] * o.v + self.v * o.dd[a][b] + self.d[a] * o.d[b] + self.d[b] * o.d[a];
            }
        }
        out
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, o: Jet) {
        *self = *self * o;
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, c: f64) -> Jet {
        self.v += c;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, c: f64) -> Jet {
        self.v -= c;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.scale(c)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, c: f64) -> Jet {
        self.scale(1.0 / c)
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, j: Jet) -> Jet {
        j + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, j: Jet) -> Jet {
        (-j) + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, j: Jet) -> Jet {
        j.scale(self)
    }
}

impl Div<Jet> for f64 {
    type Output = Jet;
    fn div(self, j: Jet) -> Jet {
        j.recip().scale(self)
    }
}

/// Euclidean radius `|x|` as a jet.
pub fn radius(x: &[Jet]) -> Jet {
    let mut s = Jet::constant(0.0);
    for xi in x {
        s += *xi * *xi;
    }
    s.sqrt()
}
