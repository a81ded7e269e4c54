//! Time-dependent operators R(t): polynomial, rational (matrix polynomial over
//! a scalar polynomial) or natural-cubic-spline interpolated samples.

use crate::error::{Error, Result};
use crate::linalg::max_abs;
use crate::real::{Real, DD};
use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    /// R(t) = Σ C_k t^k.
    Polynomial { coeffs: Vec<DMatrix<DD>> },
    /// R(t) = (Σ N_k t^k) / (Σ d_k t^k); the denominator must not vanish on [a,b].
    Rational { num: Vec<DMatrix<DD>>, den: Vec<DD> },
    /// Natural cubic spline through (grid_i, values_i), entrywise.
    Sampled { grid: Vec<f64>, values: Vec<DMatrix<f64>>, pieces: Vec<[DMatrix<f64>; 4]> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeDependentOperator {
    pub n: usize,
    pub kind: OperatorKind,
}

/// Taylor data of R about a point, in the form the series integrator consumes.
pub enum LocalSeries<T: Real> {
    /// R(t₀+h) = Σ R_k h^k (finite).
    Poly(Vec<DMatrix<T>>),
    /// R(t₀+h) = N(h)/d(h).
    Ratio(Vec<DMatrix<T>>, Vec<T>),
}

/// Taylor shift: coefficients of p(t0 + h) in powers of h (matrix coefficients).
pub fn shift_matrix_poly<T: Real>(c: &[DMatrix<T>], t0: T) -> Vec<DMatrix<T>> {
    let mut out: Vec<DMatrix<T>> = c.to_vec();
    let d = out.len();
    if d <= 1 || t0 == T::zero() {
        return out;
    }
    for i in 0..d - 1 {
        for j in (i..d - 1).rev() {
            let next = out[j + 1].clone();
            let cur = &mut out[j];
            for (x, y) in cur.iter_mut().zip(next.iter()) {
                *x = *x + t0 * *y;
            }
        }
    }
    out
}

pub fn shift_scalar_poly<T: Real>(c: &[T], t0: T) -> Vec<T> {
    let mut out = c.to_vec();
    let d = out.len();
    if d <= 1 || t0 == T::zero() {
        return out;
    }
    for i in 0..d - 1 {
        for j in (i..d - 1).rev() {
            out[j] = out[j] + t0 * out[j + 1];
        }
    }
    out
}

fn horner_matrix<T: Real>(c: &[DMatrix<DD>], t: T, n: usize) -> DMatrix<T> {
    let mut acc = DMatrix::from_element(n, n, T::zero());
    for ck in c.iter().rev() {
        for (a, x) in acc.iter_mut().zip(ck.iter()) {
            *a = *a * t + cast::<T>(*x);
        }
    }
    acc
}

fn horner_scalar<T: Real>(c: &[DD], t: T) -> T {
    let mut acc = T::zero();
    for ck in c.iter().rev() {
        acc = acc * t + cast::<T>(*ck);
    }
    acc
}

/// DD → T conversion that keeps the low word when T is itself DD.
pub fn cast<T: Real>(x: DD) -> T {
    T::from_dd(x)
}

fn natural_spline(grid: &[f64], ys: &[f64]) -> Vec<[f64; 4]> {
    let m = grid.len();
    let mut second = vec![0.0; m];
    if m > 2 {
        // tridiagonal solve for interior second derivatives
        let mut diag = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        let mut upper = vec![0.0; m];
        for i in 1..m - 1 {
            let h0 = grid[i] - grid[i - 1];
            let h1 = grid[i + 1] - grid[i];
            let lower = h0 / 6.0;
            diag[i] = (h0 + h1) / 3.0;
            upper[i] = h1 / 6.0;
            rhs[i] = (ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0;
            if i > 1 {
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
        }
        for i in (1..m - 1).rev() {
            let nxt = if i + 1 < m - 1 { second[i + 1] } else { 0.0 };
            second[i] = (rhs[i] - upper[i] * nxt) / diag[i];
        }
    }
    (0..m - 1)
        .map(|i| {
            let h = grid[i + 1] - grid[i];
            let a = ys[i];
            let b = (ys[i + 1] - ys[i]) / h - h * (2.0 * second[i] + second[i + 1]) / 6.0;
            let c = second[i] / 2.0;
            let d = (second[i + 1] - second[i]) / (6.0 * h);
            [a, b, c, d]
        })
        .collect()
}

impl TimeDependentOperator {
    pub fn polynomial(coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = coeffs.first().map(|c| c.nrows()).unwrap_or(0);
        Self::polynomial_dd(coeffs.into_iter().map(|c| c.map(DD::from)).collect(), n)
    }

    pub fn polynomial_dd(coeffs: Vec<DMatrix<DD>>, n: usize) -> Result<Self> {
        if coeffs.iter().any(|c| c.shape() != (n, n)) {
            return Err(Error::DimensionMismatch("polynomial coefficients must be n×n".into()));
        }
        let coeffs = if coeffs.is_empty() { vec![DMatrix::from_element(n, n, DD::from(0.0))] } else { coeffs };
        Ok(TimeDependentOperator { n, kind: OperatorKind::Polynomial { coeffs } })
    }

    pub fn constant(m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        Self::polynomial_dd(vec![m.map(DD::from)], n).expect("square")
    }

    pub fn zero(n: usize) -> Self {
        Self::constant(DMatrix::zeros(n, n))
    }

    pub fn rational(num: Vec<DMatrix<DD>>, den: Vec<DD>, n: usize) -> Result<Self> {
        if num.is_empty() || den.is_empty() || num.iter().any(|c| c.shape() != (n, n)) {
            return Err(Error::DimensionMismatch("rational operator needs n×n numerator and a denominator".into()));
        }
        Ok(TimeDependentOperator { n, kind: OperatorKind::Rational { num, den } })
    }

    pub fn sampled(grid: Vec<f64>, values: Vec<DMatrix<f64>>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::DimensionMismatch("sampled operator needs ≥2 matching grid/values".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("sample grid must be strictly increasing".into()));
        }
        let n = values[0].nrows();
        if values.iter().any(|v| v.shape() != (n, n)) {
            return Err(Error::DimensionMismatch("sampled values must be n×n".into()));
        }
        let m = grid.len();
        let mut pieces: Vec<[DMatrix<f64>; 4]> =
            (0..m - 1).map(|_| std::array::from_fn(|_| DMatrix::zeros(n, n))).collect();
        for i in 0..n {
            for j in 0..n {
                let ys: Vec<f64> = values.iter().map(|v| v[(i, j)]).collect();
                for (k, c) in natural_spline(&grid, &ys).into_iter().enumerate() {
                    for p in 0..4 {
                        pieces[k][p][(i, j)] = c[p];
                    }
                }
            }
        }
        Ok(TimeDependentOperator { n, kind: OperatorKind::Sampled { grid, values, pieces } })
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self.kind, OperatorKind::Sampled { .. })
    }

    fn piece_index(grid: &[f64], t: f64) -> usize {
        let m = grid.len();
        match grid.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(m - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(m - 2),
        }
    }

    pub fn eval_t<T: Real>(&self, t: T) -> DMatrix<T> {
        match &self.kind {
            OperatorKind::Polynomial { coeffs } => horner_matrix(coeffs, t, self.n),
            OperatorKind::Rational { num, den } => {
                let d = horner_scalar(den, t);
                horner_matrix(num, t, self.n).map(|x| x / d)
            }
            OperatorKind::Sampled { grid, pieces, .. } => {
                let tf = t.to_f();
                let i = Self::piece_index(grid, tf);
                let d = t - T::of(grid[i]);
                let p = &pieces[i];
                DMatrix::from_fn(self.n, self.n, |r, c| {
                    T::of(p[0][(r, c)])
                        + d * (T::of(p[1][(r, c)]) + d * (T::of(p[2][(r, c)]) + d * T::of(p[3][(r, c)])))
                })
            }
        }
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        self.eval_t::<f64>(t)
    }

    /// Next point after `t` where the series data changes (spline knots).
    pub fn next_break(&self, t: f64) -> Option<f64> {
        match &self.kind {
            OperatorKind::Sampled { grid, .. } => grid.iter().cloned().find(|&x| x > t * (1.0 + 1e-15) + 1e-300 && x > t),
            _ => None,
        }
    }

    pub fn local_series<T: Real>(&self, t0: T) -> LocalSeries<T> {
        match &self.kind {
            OperatorKind::Polynomial { coeffs } => {
                let c: Vec<DMatrix<T>> = coeffs.iter().map(|m| m.map(cast::<T>)).collect();
                LocalSeries::Poly(shift_matrix_poly(&c, t0))
            }
            OperatorKind::Rational { num, den } => {
                let c: Vec<DMatrix<T>> = num.iter().map(|m| m.map(cast::<T>)).collect();
                let d: Vec<T> = den.iter().map(|&x| cast::<T>(x)).collect();
                LocalSeries::Ratio(shift_matrix_poly(&c, t0), shift_scalar_poly(&d, t0))
            }
            OperatorKind::Sampled { grid, pieces, .. } => {
                let i = Self::piece_index(grid, t0.to_f());
                let p = &pieces[i];
                let c: Vec<DMatrix<T>> = p.iter().map(|m| m.map(T::of)).collect();
                LocalSeries::Poly(shift_matrix_poly(&c, t0 - T::of(grid[i])))
            }
        }
    }

    /// Apply M·R(t)·… on the left for all t (used by perturbations).
    pub fn left_multiply(&self, m: &DMatrix<f64>) -> Self {
        self.left_multiply_dd(&m.map(DD::from))
    }

    /// M·R(t) with M given in double-double (sampled values use its f64 part).
    pub fn left_multiply_dd(&self, mdd: &DMatrix<DD>) -> Self {
        let m = &mdd.map(|x| x.to_f64());
        let mul = |c: &DMatrix<DD>| crate::linalg::matmul(mdd, c);
        let kind = match &self.kind {
            OperatorKind::Polynomial { coeffs } => OperatorKind::Polynomial { coeffs: coeffs.iter().map(mul).collect() },
            OperatorKind::Rational { num, den } => OperatorKind::Rational { num: num.iter().map(mul).collect(), den: den.clone() },
            OperatorKind::Sampled { grid, values, .. } => {
                let vals = values.iter().map(|v| m * v).collect();
                return Self::sampled(grid.clone(), vals).expect("same grid");
            }
        };
        TimeDependentOperator { n: self.n, kind }
    }

    /// R(t) + C for a constant matrix C.
    pub fn add_constant(&self, c: &DMatrix<f64>) -> Self {
        let kind = match &self.kind {
            OperatorKind::Polynomial { coeffs } => {
                let mut coeffs = coeffs.clone();
                coeffs[0] = &coeffs[0] + c.map(DD::from);
                OperatorKind::Polynomial { coeffs }
            }
            OperatorKind::Rational { num, den } => {
                let mut num = num.clone();
                while num.len() < den.len() {
                    num.push(DMatrix::from_element(self.n, self.n, DD::from(0.0)));
                }
                for (k, dk) in den.iter().enumerate() {
                    num[k] = &num[k] + c.map(|x| DD::from(x) * *dk);
                }
                OperatorKind::Rational { num, den: den.clone() }
            }
            OperatorKind::Sampled { grid, values, .. } => {
                let vals = values.iter().map(|v| v + c).collect();
                return Self::sampled(grid.clone(), vals).expect("same grid");
            }
        };
        TimeDependentOperator { n: self.n, kind }
    }

    /// max over a validation grid of ‖G R − (G R)ᵀ‖ relative to max(1, ‖G R‖).
    pub fn g_symmetry_residual(&self, g: &DMatrix<f64>, a: f64, b: f64, samples: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..=samples {
            let t = a + (b - a) * i as f64 / samples as f64;
            // double-double evaluation: exact-rational coefficients may cancel heavily
            let gr = g * self.eval_t::<DD>(DD::from(t)).map(|x| x.to_f64());
            let res = max_abs(&(&gr - gr.transpose())) / max_abs(&gr).max(1.0);
            worst = worst.max(res);
        }
        worst
    }

    pub fn sup_norm_on(&self, a: f64, b: f64, samples: usize, f: impl Fn(&DMatrix<f64>) -> f64) -> f64 {
        (0..=samples)
            .map(|i| f(&self.eval(a + (b - a) * i as f64 / samples as f64)))
            .fold(0.0, f64::max)
    }

    /// Denominator must not vanish on [a,b]; checked on a fine grid for sign changes.
    pub fn check_denominator(&self, a: f64, b: f64) -> Result<()> {
        if let OperatorKind::Rational { den, .. } = &self.kind {
            let m = 4096;
            let mut prev: Option<f64> = None;
            for i in 0..=m {
                let t = DD::from(a) + DD::from((b - a) * i as f64 / m as f64);
                let v = horner_scalar::<DD>(den, t).to_f();
                if v == 0.0 || prev.is_some_and(|p| p * v < 0.0) {
                    return Err(Error::Admissibility(format!("denominator of R vanishes near t = {}", t.to_f())));
                }
                prev = Some(v);
            }
        }
        if let OperatorKind::Sampled { grid, .. } = &self.kind {
            if grid[0] > a + 1e-12 * a.abs().max(1.0) || *grid.last().unwrap() < b - 1e-12 * b.abs().max(1.0) {
                return Err(Error::Admissibility("sample grid does not cover [a,b]".into()));
            }
        }
        Ok(())
    }
}
