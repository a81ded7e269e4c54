//! Conformally flat realization: on ℝⁿ⁺¹ with g₀ = g ⊕ (τ), the metric e^Ω·g₀ with
//! Ω(x) = ½ Σ a_ij(x_{n+1}) x_i x_j makes the x_{n+1}-axis a geodesic whose
//! Jacobi operator is R.

use crate::error::{Error, Result};
use crate::linalg::{max_abs, symmetrize};
use crate::operator::TimeDependentOperator;
use crate::quadruple::Quadruple;
use crate::real::DD;
use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct ConformalModel {
    pub n: usize,
    /// g₀(e_{n+1}, e_{n+1})
    pub sign_tau: i8,
    pub g0: DMatrix<f64>,
    /// a(t) = 2τ·g R(t)
    pub a_coeffs: TimeDependentOperator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CausalCharacter {
    Spacelike,
    Timelike,
}

impl ConformalModel {
    pub fn dim(&self) -> usize {
        self.n + 1
    }

    pub fn a(&self, t: f64) -> DMatrix<f64> {
        symmetrize(&self.a_coeffs.eval_t::<DD>(DD::from(t)).map(|v| v.to_f64()))
    }

    pub fn omega(&self, x: &[f64]) -> f64 {
        let n = self.n;
        let a = self.a(x[n]);
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += a[(i, j)] * x[i] * x[j];
            }
        }
        0.5 * s
    }

    /// e^Ω(x)·g₀
    pub fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        &self.g0 * self.omega(x).exp()
    }

    /// Number of negative eigenvalues of g₀.
    pub fn index(&self) -> usize {
        crate::linalg::sym_eigenvalues(&self.g0).iter().filter(|&&v| v < 0.0).count()
    }

    pub fn is_lorentzian(&self) -> bool {
        self.index() == 1
    }

    pub fn axis_character(&self) -> CausalCharacter {
        if self.sign_tau > 0 {
            CausalCharacter::Spacelike
        } else {
            CausalCharacter::Timelike
        }
    }
}

/// a_ij(t) = 2/g₀(γ′,γ′)·g₀(R(t)e_i, e_j). Sampled R is refused: a smooth
/// extension off the sample grid is not determined.
pub fn realize(q: &Quadruple, sign_tau: i8) -> Result<ConformalModel> {
    if sign_tau != 1 && sign_tau != -1 {
        return Err(Error::InvalidArgument(format!("sign_tau = {sign_tau}, expected ±1")));
    }
    if q.r.is_sampled() {
        return Err(Error::InvalidArgument("realization needs a polynomial or rational R".into()));
    }
    let n = q.n();
    let g = q.g.matrix();
    let mut g0 = DMatrix::zeros(n + 1, n + 1);
    g0.view_mut((0, 0), (n, n)).copy_from(g);
    g0[(n, n)] = sign_tau as f64;
    let a_coeffs = q.r.left_multiply(&(g * (2.0 * sign_tau as f64)));
    Ok(ConformalModel { n, sign_tau, g0, a_coeffs })
}

fn axis_point(m: &ConformalModel, t: f64) -> Vec<f64> {
    let mut x = vec![0.0; m.dim()];
    x[m.n] = t;
    x
}

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut y = x.to_vec();
    for &(i, d) in moves {
        y[i] += d;
    }
    y
}

/// Central second-order Hessian of f at x.
pub fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> DMatrix<f64> {
    let d = x.len();
    let f0 = f(x);
    DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            (f(&shifted(x, &[(i, h)])) - 2.0 * f0 + f(&shifted(x, &[(i, -h)]))) / (h * h)
        } else {
            (f(&shifted(x, &[(i, h), (j, h)])) - f(&shifted(x, &[(i, h), (j, -h)]))
                - f(&shifted(x, &[(i, -h), (j, h)]))
                + f(&shifted(x, &[(i, -h), (j, -h)])))
                / (4.0 * h * h)
        }
    })
}

pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len()).map(|i| (f(&shifted(x, &[(i, h)])) - f(&shifted(x, &[(i, -h)]))) / (2.0 * h)).collect()
}

/// Γ^l_ij at x, from central differences of the metric; indexed [l][(i, j)].
pub fn christoffel(metric: &dyn Fn(&[f64]) -> DMatrix<f64>, x: &[f64], h: f64) -> Vec<DMatrix<f64>> {
    let d = x.len();
    let dg: Vec<DMatrix<f64>> =
        (0..d).map(|k| (metric(&shifted(x, &[(k, h)])) - metric(&shifted(x, &[(k, -h)]))) / (2.0 * h)).collect();
    let ginv = metric(x).try_inverse().expect("nondegenerate metric");
    (0..d)
        .map(|l| {
            DMatrix::from_fn(d, d, |i, j| {
                0.5 * (0..d).map(|m| ginv[(l, m)] * (dg[i][(m, j)] + dg[j][(m, i)] - dg[m][(i, j)])).sum::<f64>()
            })
        })
        .collect()
}

/// M with M_lj = (ℛ(∂_N, ∂_j)∂_N)^l at x for the axis direction N, where
/// ℛ(X,Y) = ∇_X∇_Y − ∇_Y∇_X − ∇_[X,Y]; Γ and ∂Γ by nested central differences.
pub fn jacobi_from_metric(metric: &dyn Fn(&[f64]) -> DMatrix<f64>, x: &[f64], axis: usize, h: f64) -> DMatrix<f64> {
    let d = x.len();
    let n_ = axis;
    let gam = christoffel(metric, x, h);
    let dgam: Vec<Vec<DMatrix<f64>>> = (0..d)
        .map(|k| {
            let p = christoffel(metric, &shifted(x, &[(k, h)]), h);
            let m = christoffel(metric, &shifted(x, &[(k, -h)]), h);
            (0..d).map(|l| (&p[l] - &m[l]) / (2.0 * h)).collect()
        })
        .collect();
    DMatrix::from_fn(d, d, |l, j| {
        let mut v = dgam[n_][l][(j, n_)] - dgam[j][l][(n_, n_)];
        for m in 0..d {
            v += gam[l][(n_, m)] * gam[m][(j, n_)] - gam[l][(j, m)] * gam[m][(n_, n_)];
        }
        v
    })
}

#[derive(Debug, Clone, Copy)]
pub struct JacobiCheck {
    /// max |½ g₀(γ′,γ′)·g⁻¹·∂²Ω − R| over the samples, step h
    pub hessian_error: f64,
    /// max |curvature operator − R|, steps h and h/2: an independent,
    /// genuinely second-order route (the Hessian one is exact on quadratic Ω)
    pub curvature_error: f64,
    pub curvature_error_half: f64,
    /// log₂ of the curvature error ratio; None when both are at rounding level
    pub richardson_order: Option<f64>,
}

impl JacobiCheck {
    /// The reported error: the Hessian route.
    pub fn error(&self) -> f64 {
        self.hessian_error
    }
}

fn sample_times(q: &Quadruple, t_samples: usize) -> Vec<f64> {
    let m = t_samples.max(1);
    if m == 1 {
        return vec![0.5 * (q.a + q.b)];
    }
    (0..m).map(|i| q.a + (q.b - q.a) * i as f64 / (m - 1) as f64).collect()
}

fn curvature_error(m: &ConformalModel, q: &Quadruple, h: f64, ts: &[f64]) -> f64 {
    let n = m.n;
    let metric = |x: &[f64]| m.metric(x);
    ts.iter()
        .map(|&t| {
            let full = jacobi_from_metric(&metric, &axis_point(m, t), n, h);
            max_abs(&(full.view((0, 0), (n, n)).into_owned() - q.r.eval(t)))
        })
        .fold(0.0, f64::max)
}

pub fn verify_jacobi_operator(m: &ConformalModel, q: &Quadruple, h: f64, t_samples: usize) -> Result<JacobiCheck> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("h = {h} must be positive")));
    }
    let n = m.n;
    let ginv = q.g.matrix().clone().try_inverse().ok_or(Error::DegenerateMetric(n))?;
    let ts = sample_times(q, t_samples);
    let omega = |x: &[f64]| m.omega(x);
    let mut hess_err: f64 = 0.0;
    for &t in &ts {
        let hs = fd_hessian(&omega, &axis_point(m, t), h);
        let model = &ginv * hs.view((0, 0), (n, n)) * (0.5 * m.sign_tau as f64);
        hess_err = hess_err.max(max_abs(&(model - q.r.eval(t))));
    }
    let e1 = curvature_error(m, q, h, &ts);
    let e2 = curvature_error(m, q, 0.5 * h, &ts);
    let order = if e1 > 1e-12 && e2 > 0.0 { Some((e1 / e2).log2()) } else { None };
    Ok(JacobiCheck { hessian_error: hess_err, curvature_error: e1, curvature_error_half: e2, richardson_order: order })
}

/// max |∇⁽⁰⁾Ω| along the axis (the axis is a geodesic iff it vanishes).
pub fn axis_geodesic_residual(m: &ConformalModel, q: &Quadruple, h: f64, t_samples: usize) -> f64 {
    let omega = |x: &[f64]| m.omega(x);
    sample_times(q, t_samples)
        .iter()
        .flat_map(|&t| fd_gradient(&omega, &axis_point(m, t), h))
        .fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Second fundamental form at 0, in the direction e_{n+1}, of the graph
/// c ↦ Pc + ½ S(c,c) e_{n+1} in flat ℝⁿ⁺¹ with metric g ⊕ (1), computed by
/// finite differences of the graph map and compared with S.
pub fn submanifold_check(p_basis: &DMatrix<f64>, s: &DMatrix<f64>, g: &DMatrix<f64>, h: f64) -> Result<f64> {
    let n = g.nrows();
    let k = p_basis.ncols();
    if s.shape() != (k, k) || p_basis.nrows() != n {
        return Err(Error::DimensionMismatch("P, S and g shapes disagree".into()));
    }
    if k == 0 {
        return Ok(0.0);
    }
    let mut g0 = DMatrix::zeros(n + 1, n + 1);
    g0.view_mut((0, 0), (n, n)).copy_from(g);
    g0[(n, n)] = 1.0;
    let phi = |c: &[f64]| -> nalgebra::DVector<f64> {
        let cv = nalgebra::DVector::from_column_slice(c);
        let mut x = nalgebra::DVector::zeros(n + 1);
        x.rows_mut(0, n).copy_from(&(p_basis * &cv));
        x[n] = 0.5 * (cv.transpose() * s * &cv)[(0, 0)];
        x
    };
    let zero = vec![0.0; k];
    // tangent frame by central differences
    let mut tan = DMatrix::zeros(n + 1, k);
    for i in 0..k {
        let d = (phi(&shifted(&zero, &[(i, h)])) - phi(&shifted(&zero, &[(i, -h)]))) / (2.0 * h);
        tan.set_column(i, &d);
    }
    let gram = tan.transpose() * &g0 * &tan;
    let gram_inv = gram.clone().try_inverse().ok_or(Error::DegenerateTangent)?;
    let cond = crate::linalg::singular_values(&gram);
    if cond.last().cloned().unwrap_or(0.0) <= 1e-12 * cond[0] {
        return Err(Error::DegenerateTangent);
    }
    let nu = DMatrix::from_fn(n + 1, 1, |i, _| if i == n { 1.0 } else { 0.0 });
    let mut err: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let second = if i == j {
                (phi(&shifted(&zero, &[(i, h)])) - phi(&zero) * 2.0 + phi(&shifted(&zero, &[(i, -h)]))) / (h * h)
            } else {
                (phi(&shifted(&zero, &[(i, h), (j, h)])) - phi(&shifted(&zero, &[(i, h), (j, -h)]))
                    - phi(&shifted(&zero, &[(i, -h), (j, h)]))
                    + phi(&shifted(&zero, &[(i, -h), (j, -h)])))
                    / (4.0 * h * h)
            };
            // normal component with respect to g₀
            let tang = &tan * (&gram_inv * (tan.transpose() * &g0 * &second));
            let normal = &second - tang;
            let sij = (nu.transpose() * &g0 * normal)[(0, 0)];
            err = err.max((sij - s[(i, j)]).abs());
        }
    }
    Ok(err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::SymBilinear;

    fn harmonic() -> Quadruple {
        Quadruple::new(
            SymBilinear::identity(1),
            TimeDependentOperator::constant(DMatrix::from_element(1, 1, -1.0)),
            DMatrix::zeros(1, 0),
            SymBilinear::zeros(0),
            (0.0, 3.5),
        )
        .unwrap()
    }

    #[test]
    fn sphere_curvature_sign() {
        // stereographic unit sphere, 4/(1+|x|²)²·δ: ℛ(γ′,v)γ′ = −|γ′|² v = −4v at 0
        let metric = |x: &[f64]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            DMatrix::identity(3, 3) * (4.0 / (1.0 + r2).powi(2))
        };
        let m = jacobi_from_metric(&metric, &[0.0, 0.0, 0.0], 2, 1e-3);
        let want = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-4.0, -4.0, 0.0]));
        assert!(max_abs(&(m - want)) < 1e-4);
    }

    #[test]
    fn harmonic_model() {
        let q = harmonic();
        let m = realize(&q, 1).unwrap();
        assert_eq!(m.a(0.3)[(0, 0)], -2.0);
        assert!((m.omega(&[0.5, 1.0]) + 0.25).abs() < 1e-15);
        let c = verify_jacobi_operator(&m, &q, 1e-3, 8).unwrap();
        assert!(c.hessian_error < 1e-8 && c.curvature_error < 1e-5, "{c:?}");
        assert!(c.richardson_order.unwrap() > 1.9, "{c:?}");
        assert!(axis_geodesic_residual(&m, &q, 1e-4, 8) < 1e-12);
    }

    #[test]
    fn counterexample_model_is_lorentzian_with_spacelike_axis() {
        let (q, _) = crate::lab::counterexample_quadruple().unwrap();
        let m = realize(&q, 1).unwrap();
        assert_eq!(m.n, 2);
        assert!(m.is_lorentzian());
        assert_eq!(m.axis_character(), CausalCharacter::Spacelike);
        // samples on [-0.9, -0.3], away from the degenerate instant
        let mut away = q.clone();
        away.a = -0.9;
        away.b = -0.3;
        let c = verify_jacobi_operator(&m, &away, 1e-4, 6).unwrap();
        assert!(c.error() <= 1e-6, "{c:?}");
    }

    #[test]
    fn flat_model_and_causal_character() {
        let q = Quadruple::new(
            SymBilinear::identity(2),
            TimeDependentOperator::constant(DMatrix::zeros(2, 2)),
            DMatrix::zeros(2, 0),
            SymBilinear::zeros(0),
            (0.0, 1.0),
        )
        .unwrap();
        let m = realize(&q, -1).unwrap();
        assert_eq!(m.omega(&[1.0, 2.0, 3.0]), 0.0);
        assert!(m.is_lorentzian());
        assert_eq!(m.axis_character(), CausalCharacter::Timelike);
        let c = verify_jacobi_operator(&m, &q, 1e-3, 4).unwrap();
        assert_eq!(c.error(), 0.0);
        assert!(c.richardson_order.is_none());
    }

    #[test]
    fn parabola_and_degenerate_tangent() {
        let p = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let s = DMatrix::from_element(1, 1, 0.7);
        assert!(submanifold_check(&p, &s, &DMatrix::identity(2, 2), 1e-4).unwrap() < 1e-6);
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let null = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        assert!(matches!(submanifold_check(&null, &s, &g, 1e-4), Err(Error::DegenerateTangent)));
        let zero = DMatrix::zeros(1, 1);
        assert_eq!(submanifold_check(&p, &zero, &DMatrix::identity(2, 2), 1e-4).unwrap(), 0.0);
    }

    #[test]
    fn sampled_r_is_refused() {
        let r = TimeDependentOperator::sampled(vec![0.0, 1.0], vec![DMatrix::zeros(1, 1); 2]).unwrap();
        let q = Quadruple::new(SymBilinear::identity(1), r, DMatrix::zeros(1, 0), SymBilinear::zeros(0), (0.0, 1.0))
            .unwrap();
        assert!(realize(&q, 1).is_err());
    }
}
