//! Truncated multilinear jets for exact mixed directional derivatives.
//!
//! A jet with `m` infinitesimals `ε_0..ε_{m-1}` (each squaring to zero)
//! holds `2^m` coefficients indexed by subset bitmask. Evaluating a smooth
//! function at `p + Σ ε_j v_j` yields, in the coefficient of mask `S`, the
//! mixed derivative `D_{v_S} f(p)`.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use smallvec::{smallvec, SmallVec};

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    c: SmallVec<[f64; 4]>,
}

impl Default for Jet {
    fn default() -> Self {
        Jet::constant(0.0)
    }
}

impl From<f64> for Jet {
    fn from(x: f64) -> Self {
        Jet::constant(x)
    }
}

impl Jet {
    pub fn constant(x: f64) -> Self {
        Jet { c: smallvec![x] }
    }

    /// Jet with `order` infinitesimals: value `x` and slope `dirs[j]` along `ε_j`.
    pub fn seed(x: f64, dirs: &[f64]) -> Self {
        let m = dirs.len();
        let mut c: SmallVec<[f64; 4]> = smallvec![0.0; 1 << m];
        c[0] = x;
        for (j, &d) in dirs.iter().enumerate() {
            c[1 << j] = d;
        }
        Jet { c }
    }

    /// Raw coefficients; length must be a power of two.
    pub fn from_coeffs(coeffs: &[f64]) -> Self {
        assert!(coeffs.len().is_power_of_two(), "jet length must be 2^m");
        Jet {
            c: SmallVec::from_slice(coeffs),
        }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Number of infinitesimals.
    pub fn order(&self) -> usize {
        self.c.len().trailing_zeros() as usize
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    /// Coefficient of the monomial `Π_{j∈mask} ε_j`; zero beyond the stored order.
    pub fn coeff(&self, mask: usize) -> f64 {
        self.c.get(mask).copied().unwrap_or(0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.c.len() == 1
    }

    /// Re-embeds into `2^m` coefficients.
    pub fn lift(&self, m: usize) -> Jet {
        let len = 1usize << m;
        if self.c.len() >= len {
            return self.clone();
        }
        let mut c: SmallVec<[f64; 4]> = smallvec![0.0; len];
        c[..self.c.len()].copy_from_slice(&self.c);
        Jet { c }
    }

    /// Adds a fresh infinitesimal at index `m` with slope `d`, lifting to `m+1`.
    pub fn extend(&self, m: usize, d: f64) -> Jet {
        let mut out = self.lift(m + 1);
        out.c[1 << m] += d;
        out
    }

    /// Coefficients whose mask contains bit `m`, shifted down: the ε_m-derivative.
    pub fn split_top(&self, m: usize) -> Jet {
        let half = 1usize << m;
        if self.c.len() <= half {
            return Jet::constant(0.0);
        }
        Jet {
            c: SmallVec::from_slice(&self.c[half..2 * half]),
        }
    }

    fn scale(&self, s: f64) -> Jet {
        Jet {
            c: self.c.iter().map(|x| x * s).collect(),
        }
    }

    /// `Σ_j derivs[j]/j! · δ^j` with `δ = self − value`.
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        if self.c.len() == 1 {
            return Jet::constant(derivs[0]);
        }
        let m = self.order();
        let mut delta = self.clone();
        delta.c[0] = 0.0;
        let mut out = Jet::constant(derivs[0]).lift(m);
        let mut power = delta.clone();
        let mut fact = 1.0;
        for (j, &d) in derivs.iter().enumerate().skip(1).take(m) {
            fact *= j as f64;
            let w = d / fact;
            if w != 0.0 {
                for (o, p) in out.c.iter_mut().zip(power.c.iter()) {
                    *o += w * p;
                }
            }
            if j < m {
                power = &power * &delta;
            }
        }
        out
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let d: Vec<f64> = (0..=self.order()).map(|j| [s, c, -s, -c][j % 4]).collect();
        self.compose(&d)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let d: Vec<f64> = (0..=self.order()).map(|j| [c, -s, -c, s][j % 4]).collect();
        self.compose(&d)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose(&vec![e; self.order() + 1])
    }

    pub fn ln(&self) -> Jet {
        let a = self.value();
        let mut d = vec![a.ln()];
        let mut coef = 1.0;
        for j in 1..=self.order() {
            d.push(coef / a.powi(j as i32));
            coef *= -(j as f64);
        }
        self.compose(&d)
    }

    pub fn powf(&self, p: f64) -> Jet {
        let a = self.value();
        let mut d = Vec::with_capacity(self.order() + 1);
        let mut coef = 1.0;
        for j in 0..=self.order() {
            d.push(coef * a.powf(p - j as f64));
            coef *= p - j as f64;
        }
        self.compose(&d)
    }

    pub fn powi(&self, p: i32) -> Jet {
        if p >= 0 && self.is_constant() {
            return Jet::constant(self.value().powi(p));
        }
        let a = self.value();
        let mut d = Vec::with_capacity(self.order() + 1);
        let mut coef = 1.0;
        for j in 0..=self.order() {
            let e = p - j as i32;
            d.push(if coef == 0.0 { 0.0 } else { coef * a.powi(e) });
            coef *= e as f64;
        }
        self.compose(&d)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Jet {
        self.powi(-1)
    }

    pub fn sinh(&self) -> Jet {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        let d: Vec<f64> = (0..=self.order()).map(|j| if j % 2 == 0 { s } else { c }).collect();
        self.compose(&d)
    }

    pub fn cosh(&self) -> Jet {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        let d: Vec<f64> = (0..=self.order()).map(|j| if j % 2 == 0 { c } else { s }).collect();
        self.compose(&d)
    }

    /// Piecewise-linear absolute value; the branch at zero is the positive one.
    pub fn abs(&self) -> Jet {
        if self.value() < 0.0 {
            -self
        } else {
            self.clone()
        }
    }

    /// Branch chosen by value.
    pub fn max(&self, other: &Jet) -> Jet {
        if self.value() >= other.value() {
            self.clone()
        } else {
            other.clone()
        }
    }

    pub fn min(&self, other: &Jet) -> Jet {
        if self.value() <= other.value() {
            self.clone()
        } else {
            other.clone()
        }
    }
}

fn binary(a: &Jet, b: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
    if a.c.len() == b.c.len() {
        return Jet {
            c: a.c.iter().zip(b.c.iter()).map(|(x, y)| f(*x, *y)).collect(),
        };
    }
    let len = a.c.len().max(b.c.len());
    Jet {
        c: (0..len).map(|i| f(a.coeff(i), b.coeff(i))).collect(),
    }
}

impl Add<&Jet> for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        binary(self, rhs, |x, y| x + y)
    }
}

impl Sub<&Jet> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        binary(self, rhs, |x, y| x - y)
    }
}

impl Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        if rhs.c.len() == 1 {
            return self.scale(rhs.c[0]);
        }
        if self.c.len() == 1 {
            return rhs.scale(self.c[0]);
        }
        let len = self.c.len().max(rhs.c.len());
        let mut c: SmallVec<[f64; 4]> = smallvec![0.0; len];
        for (k, out) in c.iter_mut().enumerate() {
            let mut s = k;
            let mut acc = 0.0;
            loop {
                acc += self.coeff(s) * rhs.coeff(k ^ s);
                if s == 0 {
                    break;
                }
                s = (s - 1) & k;
            }
            *out = acc;
        }
        Jet { c }
    }
}

impl Div<&Jet> for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        if rhs.c.len() == 1 {
            return self.scale(1.0 / rhs.c[0]);
        }
        self * &rhs.recip()
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
        impl $tr<f64> for Jet {
            type Output = Jet;
            fn $m(self, rhs: f64) -> Jet {
                (&self).$m(&Jet::constant(rhs))
            }
        }
        impl $tr<f64> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: f64) -> Jet {
                self.$m(&Jet::constant(rhs))
            }
        }
        impl $tr<Jet> for f64 {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&Jet::constant(self)).$m(&rhs)
            }
        }
        impl $tr<&Jet> for f64 {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&Jet::constant(self)).$m(rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        *self = &*self + rhs;
    }
}

impl AddAssign<Jet> for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self = &*self + &rhs;
    }
}

/// Seeds point coordinates `p + Σ_j ε_j dirs[j]`.
pub fn seed_point(p: &[f64], dirs: &[&[f64]]) -> Vec<Jet> {
    p.iter()
        .enumerate()
        .map(|(i, &x)| {
            let slopes: SmallVec<[f64; 4]> = dirs.iter().map(|d| d[i]).collect();
            Jet::seed(x, &slopes)
        })
        .collect()
}

pub fn constants(p: &[f64]) -> Vec<Jet> {
    p.iter().map(|&x| Jet::constant(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_and_mixed_partials() {
        // f(x, y) = x^2 y at (2, 3); dirs e_x, e_y
        let p = seed_point(&[2.0, 3.0], &[&[1.0, 0.0], &[0.0, 1.0]]);
        let f = &(&p[0] * &p[0]) * &p[1];
        assert_eq!(f.coeff(0), 12.0);
        assert_eq!(f.coeff(1), 12.0);
        assert_eq!(f.coeff(2), 4.0);
        assert_eq!(f.coeff(3), 4.0);
    }

    #[test]
    fn second_derivative_along_repeated_direction() {
        let p = seed_point(&[0.3], &[&[1.0], &[1.0]]);
        let s = p[0].sin();
        assert!((s.coeff(3) + 0.3f64.sin()).abs() < 1e-15);
        let e = p[0].exp();
        assert!((e.coeff(3) - 0.3f64.exp()).abs() < 1e-15);
        let l = p[0].ln();
        assert!((l.coeff(3) + 1.0 / 0.09).abs() < 1e-12);
        let r = p[0].recip();
        assert!((r.coeff(3) - 2.0 / 0.027).abs() < 1e-10);
        let q = p[0].powf(2.5);
        assert!((q.coeff(3) - 2.5 * 1.5 * 0.3f64.powf(0.5)).abs() < 1e-12);
    }

    #[test]
    fn division_matches_quotient_rule() {
        let p = seed_point(&[1.5, 0.5], &[&[1.0, 0.0]]);
        let q = &p[1] / &p[0];
        assert!((q.coeff(1) + 0.5 / 2.25).abs() < 1e-15);
    }

    #[test]
    fn extend_and_split() {
        let x = Jet::seed(2.0, &[1.0]);
        let y = x.extend(1, 1.0);
        let sq = &y * &y;
        assert_eq!(sq.coeff(3), 2.0);
        assert_eq!(sq.split_top(1).coeffs(), &[4.0, 2.0]);
    }
}
