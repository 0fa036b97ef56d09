//! Second-order forward-mode differentiation in two variables.
//!
//! Used to evaluate manufactured potentials and their exact Hessians
//! without hand-expanding product and chain rules.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::geometry::{Covector, Point2, Sym2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dyy: f64,
}

impl Jet2 {
    pub const fn constant(c: f64) -> Jet2 {
        Jet2 { v: c, dx: 0.0, dy: 0.0, dxx: 0.0, dxy: 0.0, dyy: 0.0 }
    }

    pub fn x(p: Point2) -> Jet2 {
        Jet2 { v: p.x, dx: 1.0, ..Jet2::constant(0.0) }
    }

    pub fn y(p: Point2) -> Jet2 {
        Jet2 { v: p.y, dy: 1.0, ..Jet2::constant(0.0) }
    }

    pub fn grad(&self) -> Covector {
        Covector([self.dx, self.dy])
    }

    pub fn hessian(&self) -> Sym2 {
        Sym2::new(self.dxx, self.dxy, self.dyy)
    }

    /// Apply a scalar function given its value and first two derivatives at `self.v`.
    fn chain(self, f: f64, df: f64, ddf: f64) -> Jet2 {
        Jet2 {
            v: f,
            dx: df * self.dx,
            dy: df * self.dy,
            dxx: ddf * self.dx * self.dx + df * self.dxx,
            dxy: ddf * self.dx * self.dy + df * self.dxy,
            dyy: ddf * self.dy * self.dy + df * self.dyy,
        }
    }

    pub fn ln(self) -> Jet2 {
        let inv = 1.0 / self.v;
        self.chain(self.v.ln(), inv, -inv * inv)
    }

    pub fn sqrt(self) -> Jet2 {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn powf(self, e: f64) -> Jet2 {
        let v = self.v;
        self.chain(v.powf(e), e * v.powf(e - 1.0), e * (e - 1.0) * v.powf(e - 2.0))
    }

    pub fn recip(self) -> Jet2 {
        let inv = 1.0 / self.v;
        self.chain(inv, -inv * inv, 2.0 * inv * inv * inv)
    }

    pub fn sin(self) -> Jet2 {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Jet2 {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn scale(self, c: f64) -> Jet2 {
        Jet2 {
            v: c * self.v,
            dx: c * self.dx,
            dy: c * self.dy,
            dxx: c * self.dxx,
            dxy: c * self.dxy,
            dyy: c * self.dyy,
        }
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v + o.v,
            dx: self.dx + o.dx,
            dy: self.dy + o.dy,
            dxx: self.dxx + o.dxx,
            dxy: self.dxy + o.dxy,
            dyy: self.dyy + o.dyy,
        }
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(self, c: f64) -> Jet2 {
        Jet2 { v: self.v + c, ..self }
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self + (-o)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            dx: self.dx * o.v + self.v * o.dx,
            dy: self.dy * o.v + self.v * o.dy,
            dxx: self.dxx * o.v + 2.0 * self.dx * o.dx + self.v * o.dxx,
            dxy: self.dxy * o.v + self.dx * o.dy + self.dy * o.dx + self.v * o.dxy,
            dyy: self.dyy * o.v + 2.0 * self.dy * o.dy + self.v * o.dyy,
        }
    }
}

impl Mul<Jet2> for f64 {
    type Output = Jet2;
    fn mul(self, j: Jet2) -> Jet2 {
        j.scale(self)
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet2) -> Jet2 {
        self * o.recip()
    }
}
