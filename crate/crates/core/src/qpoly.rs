//! Exact univariate polynomials over ℚ, with Sturm root counting.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::ops::{Add, Mul, Neg, Sub};

pub fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn qr(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Ascending coefficients, no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QPoly {
    c: Vec<BigRational>,
}

impl QPoly {
    pub fn new(mut c: Vec<BigRational>) -> Self {
        while c.last().is_some_and(|x| x.is_zero()) {
            c.pop();
        }
        QPoly { c }
    }

    pub fn zero() -> Self {
        QPoly { c: vec![] }
    }

    pub fn constant(v: BigRational) -> Self {
        QPoly::new(vec![v])
    }

    pub fn from_ints(c: &[i64]) -> Self {
        QPoly::new(c.iter().map(|&v| q(v)).collect())
    }

    /// (t − r)^k
    pub fn linear_power(r: &BigRational, k: usize) -> Self {
        let lin = QPoly::new(vec![-r.clone(), BigRational::one()]);
        let mut p = QPoly::constant(BigRational::one());
        for _ in 0..k {
            p = &p * &lin;
        }
        p
    }

    /// t^k
    pub fn monomial(k: usize, coef: BigRational) -> Self {
        let mut c = vec![BigRational::zero(); k + 1];
        c[k] = coef;
        QPoly::new(c)
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.c
    }

    pub fn coeff(&self, k: usize) -> BigRational {
        self.c.get(k).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    /// Degree; −1 for the zero polynomial.
    pub fn degree(&self) -> i64 {
        self.c.len() as i64 - 1
    }

    pub fn lead(&self) -> BigRational {
        self.c.last().cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        QPoly::new(self.c.iter().map(|x| x * s).collect())
    }

    pub fn eval(&self, t: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for x in self.c.iter().rev() {
            acc = acc * t + x;
        }
        acc
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, x| acc * t + x.to_f64().unwrap_or(f64::NAN))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.c.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect()
    }

    pub fn derivative(&self) -> Self {
        QPoly::new(
            self.c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, x)| x * q(k as i64))
                .collect(),
        )
    }

    pub fn nth_derivative(&self, k: usize) -> Self {
        (0..k).fold(self.clone(), |p, _| p.derivative())
    }

    /// k-th derivative at t.
    pub fn deriv_at(&self, k: usize, t: &BigRational) -> BigRational {
        self.nth_derivative(k).eval(t)
    }

    /// Coefficients of p(r + s) in powers of s.
    pub fn shift(&self, r: &BigRational) -> Self {
        let mut out = QPoly::zero();
        let lin = QPoly::new(vec![r.clone(), BigRational::one()]);
        for x in self.c.iter().rev() {
            out = &(&out * &lin) + &QPoly::constant(x.clone());
        }
        out
    }

    /// Order of vanishing at r (None for the zero polynomial).
    pub fn order_at(&self, r: &BigRational) -> Option<usize> {
        if self.is_zero() {
            return None;
        }
        let s = self.shift(r);
        s.c.iter().position(|x| !x.is_zero())
    }

    pub fn divrem(&self, d: &QPoly) -> (QPoly, QPoly) {
        assert!(!d.is_zero(), "division by zero polynomial");
        let mut r = self.c.clone();
        let dd = d.degree() as usize;
        let lead = d.lead();
        if self.degree() < d.degree() {
            return (QPoly::zero(), self.clone());
        }
        let mut quo = vec![BigRational::zero(); r.len() - dd];
        for k in (0..quo.len()).rev() {
            let f = &r[k + dd] / &lead;
            if !f.is_zero() {
                for (j, dj) in d.c.iter().enumerate() {
                    r[k + j] -= &f * dj;
                }
            }
            quo[k] = f;
        }
        r.truncate(dd);
        (QPoly::new(quo), QPoly::new(r))
    }

    pub fn monic(&self) -> QPoly {
        if self.is_zero() {
            return self.clone();
        }
        self.scale(&(BigRational::one() / self.lead()))
    }

    pub fn gcd(a: &QPoly, b: &QPoly) -> QPoly {
        let (mut x, mut y) = (a.clone(), b.clone());
        while !y.is_zero() {
            let r = x.divrem(&y).1;
            x = y;
            y = r.monic();
        }
        x.monic()
    }

    /// Number of distinct real roots in the half-open interval (lo, hi].
    pub fn count_roots(&self, lo: &BigRational, hi: &BigRational) -> usize {
        if self.degree() < 1 {
            return 0;
        }
        let seq = self.square_free().sturm_sequence();
        sturm_count(&seq, lo, hi)
    }

    /// Number of distinct real roots in the open interval (lo, hi).
    pub fn count_roots_open(&self, lo: &BigRational, hi: &BigRational) -> usize {
        let n = self.count_roots(lo, hi);
        if self.eval(hi).is_zero() {
            n - 1
        } else {
            n
        }
    }

    /// p / gcd(p, p′): same roots, all simple.
    pub fn square_free(&self) -> QPoly {
        let g = QPoly::gcd(self, &self.derivative());
        if g.degree() <= 0 {
            self.clone()
        } else {
            self.divrem(&g).0
        }
    }

    fn sturm_sequence(&self) -> Vec<QPoly> {
        let mut seq = vec![self.monic(), self.derivative().monic()];
        loop {
            let k = seq.len();
            let r = seq[k - 2].divrem(&seq[k - 1]).1;
            if r.is_zero() {
                break;
            }
            // Positive rescaling keeps the sign pattern while taming coefficient growth.
            let s = r.lead().abs();
            seq.push(-(&r.scale(&(BigRational::one() / s))));
        }
        seq
    }

    /// Real roots in [lo, hi] located to within `width` by Sturm bisection.
    pub fn isolate_roots(&self, lo: f64, hi: f64, width: f64) -> Vec<f64> {
        let mut out = vec![];
        if self.degree() < 1 {
            return out;
        }
        let rl = super::real::rational_from_f64(lo);
        let rh = super::real::rational_from_f64(hi);
        if self.eval(&rl).is_zero() {
            out.push(lo);
        }
        let seq = self.square_free().sturm_sequence();
        let mut stack = vec![(rl, rh)];
        while let Some((a, b)) = stack.pop() {
            let n = sturm_count(&seq, &a, &b);
            if n == 0 {
                continue;
            }
            let w = (&b - &a).to_f64().unwrap_or(0.0);
            if n == 1 && w <= width {
                out.push(((&a + &b) / q(2)).to_f64().unwrap_or(f64::NAN));
                continue;
            }
            let m = (&a + &b) / q(2);
            stack.push((m.clone(), b));
            stack.push((a, m));
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }
}

fn sturm_count(seq: &[QPoly], lo: &BigRational, hi: &BigRational) -> usize {
    let v = |t: &BigRational| sign_changes(seq.iter().map(|p| p.eval(t)));
    v(lo).saturating_sub(v(hi))
}

fn sign_changes(vals: impl Iterator<Item = BigRational>) -> usize {
    let mut last = 0i8;
    let mut n = 0;
    for v in vals {
        let s = if v.is_positive() {
            1
        } else if v.is_negative() {
            -1
        } else {
            0
        };
        if s != 0 {
            if last != 0 && s != last {
                n += 1;
            }
            last = s;
        }
    }
    n
}

impl Add for &QPoly {
    type Output = QPoly;
    fn add(self, o: &QPoly) -> QPoly {
        let n = self.c.len().max(o.c.len());
        QPoly::new((0..n).map(|k| self.coeff(k) + o.coeff(k)).collect())
    }
}

impl Sub for &QPoly {
    type Output = QPoly;
    fn sub(self, o: &QPoly) -> QPoly {
        let n = self.c.len().max(o.c.len());
        QPoly::new((0..n).map(|k| self.coeff(k) - o.coeff(k)).collect())
    }
}

impl Mul for &QPoly {
    type Output = QPoly;
    fn mul(self, o: &QPoly) -> QPoly {
        if self.is_zero() || o.is_zero() {
            return QPoly::zero();
        }
        let mut c = vec![BigRational::zero(); self.c.len() + o.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.c.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        QPoly::new(c)
    }
}

impl Neg for &QPoly {
    type Output = QPoly;
    fn neg(self) -> QPoly {
        QPoly::new(self.c.iter().map(|x| -x).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_division() {
        let a = QPoly::from_ints(&[-1, 0, 1]); // t² − 1
        let b = QPoly::from_ints(&[1, 1]);
        let (quo, rem) = a.divrem(&b);
        assert_eq!(quo, QPoly::from_ints(&[-1, 1]));
        assert!(rem.is_zero());
        assert_eq!(QPoly::gcd(&a, &QPoly::from_ints(&[1, 2, 1])), b);
    }

    #[test]
    fn sturm_counts() {
        // (t−1)(t+2)(t−3)² has distinct roots −2, 1, 3
        let p = &(&QPoly::linear_power(&q(1), 1) * &QPoly::linear_power(&q(-2), 1)) * &QPoly::linear_power(&q(3), 2);
        assert_eq!(p.count_roots(&q(-10), &q(10)), 3);
        assert_eq!(p.count_roots(&q(0), &q(2)), 1);
        assert_eq!(p.count_roots_open(&q(-2), &q(1)), 0);
        assert_eq!(p.order_at(&q(3)), Some(2));
        let r = p.isolate_roots(-5.0, 5.0, 1e-9);
        assert_eq!(r.len(), 3);
        assert!((r[0] + 2.0).abs() < 1e-8 && (r[2] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn shift_matches_taylor() {
        let p = QPoly::from_ints(&[1, 2, 3]);
        let s = p.shift(&q(2));
        // p(2+s) = 17 + 14 s + 3 s²
        assert_eq!(s, QPoly::from_ints(&[17, 14, 3]));
    }
}
