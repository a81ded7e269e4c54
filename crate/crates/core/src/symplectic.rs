//! Inertia of symmetric bilinear forms and chart machinery on the
//! Lagrangian Grassmannian of (ℝ²ⁿ, ω), ω[(x₁,x₂),(y₁,y₂)] = g(x₁,y₂) − g(x₂,y₁).

use crate::error::{Error, Result};
use crate::linalg::{self, max_abs, orth, rank, sigma_min, singular_values, symmetrize};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default relative threshold for inertia counts.
pub const TOL_INERTIA: f64 = 1e-9;
/// Isotropy tolerance for Lagrangian frames (relative to ‖F‖²‖Ω‖).
pub const TOL_ISO: f64 = 1e-8;
/// A chart is considered exited when the transversality margin drops below this.
pub const CHART_EXIT: f64 = 1e-6;

/// Symmetric bilinear form stored as a symmetrized matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBilinear {
    m: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub n_plus: usize,
    pub n_minus: usize,
    pub dgn: usize,
}

impl Inertia {
    pub fn signature(&self) -> i64 {
        self.n_plus as i64 - self.n_minus as i64
    }
}

impl SymBilinear {
    pub fn new(m: DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "bilinear form must be square");
        SymBilinear { m: symmetrize(&m) }
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Self {
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(DMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += u[i] * self.m[(i, j)] * v[j];
            }
        }
        s
    }

    /// Pull back along M: the form (u,v) ↦ B(Mu, Mv).
    pub fn congruent(&self, mat: &DMatrix<f64>) -> SymBilinear {
        SymBilinear::new(mat.transpose() * &self.m * mat)
    }

    pub fn norm(&self) -> f64 {
        linalg::spectral_norm(&self.m)
    }

    pub fn inertia(&self, tol: f64) -> Inertia {
        inertia(self, tol)
    }
}

/// Counts eigenvalues > tol, < −tol and in [−tol, tol].
pub fn inertia(b: &SymBilinear, tol: f64) -> Inertia {
    let ev = linalg::sym_eigenvalues(&b.m);
    let mut out = Inertia { n_plus: 0, n_minus: 0, dgn: 0 };
    for &l in ev.iter() {
        if l > tol {
            out.n_plus += 1;
        } else if l < -tol {
            out.n_minus += 1;
        } else {
            out.dgn += 1;
        }
    }
    out
}

/// Inertia with threshold tol·max(‖B‖, 1).
pub fn inertia_scaled(b: &SymBilinear, tol: f64) -> Inertia {
    inertia(b, tol * b.norm().max(1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticForm {
    pub n: usize,
    pub g: SymBilinear,
    pub omega: DMatrix<f64>,
}

pub fn make_symplectic(g: &SymBilinear) -> Result<SymplecticForm> {
    let n = g.dim();
    let inn = inertia_scaled(g, TOL_INERTIA);
    if inn.dgn > 0 {
        return Err(Error::DegenerateMetric(inn.dgn));
    }
    let mut omega = DMatrix::zeros(2 * n, 2 * n);
    omega.view_mut((0, n), (n, n)).copy_from(g.matrix());
    omega.view_mut((n, 0), (n, n)).copy_from(&(-g.matrix()));
    Ok(SymplecticForm { n, g: g.clone(), omega })
}

impl SymplecticForm {
    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        let m = 2 * self.n;
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                s += u[i] * self.omega[(i, j)] * v[j];
            }
        }
        s
    }

    /// Compatible complex structure J = Ω (ΩᵀΩ)^{-1/2}; it maps every
    /// Lagrangian onto a transverse one.
    pub fn complex_structure(&self) -> DMatrix<f64> {
        let ata = self.omega.transpose() * &self.omega;
        let (_, inv_sqrt) = linalg::spd_sqrt(&ata);
        &self.omega * inv_sqrt
    }
}

/// Frame whose columns span a Lagrangian subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianFrame {
    pub columns: DMatrix<f64>,
}

impl LagrangianFrame {
    pub fn new(columns: DMatrix<f64>) -> Self {
        LagrangianFrame { columns }
    }

    pub fn n(&self) -> usize {
        self.columns.ncols()
    }

    /// L₀ = {0} ⊕ ℝⁿ.
    pub fn vertical(n: usize) -> Self {
        let mut c = DMatrix::zeros(2 * n, n);
        c.view_mut((n, 0), (n, n)).fill_with_identity();
        LagrangianFrame { columns: c }
    }

    /// ℝⁿ ⊕ {0}.
    pub fn horizontal(n: usize) -> Self {
        let mut c = DMatrix::zeros(2 * n, n);
        c.view_mut((0, 0), (n, n)).fill_with_identity();
        LagrangianFrame { columns: c }
    }

    /// Graph {(x, Z x)} of a g-symmetric Z.
    pub fn graph(z: &DMatrix<f64>) -> Self {
        let n = z.nrows();
        let mut c = DMatrix::zeros(2 * n, n);
        c.view_mut((0, 0), (n, n)).fill_with_identity();
        c.view_mut((n, 0), (n, n)).copy_from(z);
        LagrangianFrame { columns: c }
    }

    pub fn orthonormal(&self) -> DMatrix<f64> {
        orth(&self.columns, 1e-12)
    }

    pub fn isotropy_residual(&self, omega: &SymplecticForm) -> f64 {
        max_abs(&(self.columns.transpose() * &omega.omega * &self.columns))
    }

    /// Re-orthonormalize when the frame is badly conditioned.
    pub fn conditioned(&self) -> LagrangianFrame {
        let s = singular_values(&self.columns);
        if s.is_empty() || s[0] <= 1e6 * s[s.len() - 1] {
            return self.clone();
        }
        LagrangianFrame { columns: self.orthonormal() }
    }
}

pub fn is_lagrangian(f: &LagrangianFrame, omega: &SymplecticForm, tol: f64) -> Result<bool> {
    if f.columns.nrows() != 2 * omega.n {
        return Err(Error::DimensionMismatch(format!(
            "frame has {} rows, expected {}",
            f.columns.nrows(),
            2 * omega.n
        )));
    }
    if f.columns.ncols() != omega.n {
        return Ok(false);
    }
    let scale = f.columns.norm_squared().max(1.0) * max_abs(&omega.omega).max(1.0);
    let iso = f.isotropy_residual(omega) <= tol * scale;
    Ok(iso && rank(&f.columns, 1e-10) == omega.n)
}

/// Smallest singular value of [orth(A) | orth(B)]; zero iff the spans meet.
pub fn transversality_margin(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = orth(a, 1e-12);
    let qb = orth(b, 1e-12);
    let m = qa.nrows();
    let mut joined = DMatrix::zeros(m, qa.ncols() + qb.ncols());
    joined.view_mut((0, 0), (m, qa.ncols())).copy_from(&qa);
    joined.view_mut((0, qa.ncols()), (m, qb.ncols())).copy_from(&qb);
    if joined.ncols() < m {
        return 0.0;
    }
    sigma_min(&joined)
}

/// dim(A ∩ B) for column spans, via rank of the concatenation.
pub fn intersection_dim(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> usize {
    let qa = orth(a, 1e-12);
    let qb = orth(b, 1e-12);
    let m = qa.nrows();
    let mut joined = DMatrix::zeros(m, qa.ncols() + qb.ncols());
    joined.view_mut((0, 0), (m, qa.ncols())).copy_from(&qa);
    joined.view_mut((0, qa.ncols()), (m, qb.ncols())).copy_from(&qb);
    qa.ncols() + qb.ncols() - rank(&joined, tol)
}

/// Coordinate chart φ_{L0,L1} on Lagrangians transverse to L1.
#[derive(Debug, Clone)]
pub struct Chart {
    pub l0: LagrangianFrame,
    pub l1: LagrangianFrame,
    basis_inv: DMatrix<f64>,
    m10: DMatrix<f64>,
    pub condition: f64,
}

/// β in a chart, with the asymmetry removed by symmetrization.
#[derive(Debug, Clone)]
pub struct ChartValue {
    pub beta: SymBilinear,
    pub asymmetry: f64,
    pub margin: f64,
}

impl Chart {
    pub fn new(l0: &LagrangianFrame, l1: &LagrangianFrame, omega: &SymplecticForm) -> Result<Chart> {
        let n = omega.n;
        if l0.columns.shape() != (2 * n, n) || l1.columns.shape() != (2 * n, n) {
            return Err(Error::DimensionMismatch("chart frames must be 2n×n".into()));
        }
        let margin = transversality_margin(&l0.columns, &l1.columns);
        if margin < CHART_EXIT {
            return Err(Error::NotTransverse(margin));
        }
        let mut basis = DMatrix::zeros(2 * n, 2 * n);
        basis.view_mut((0, 0), (2 * n, n)).copy_from(&l0.columns);
        basis.view_mut((0, n), (2 * n, n)).copy_from(&l1.columns);
        let s = singular_values(&basis);
        let condition = s[0] / s[s.len() - 1];
        let basis_inv = basis.try_inverse().ok_or(Error::NotTransverse(0.0))?;
        let m10 = l1.columns.transpose() * &omega.omega * &l0.columns;
        Ok(Chart { l0: l0.clone(), l1: l1.clone(), basis_inv, m10, condition })
    }

    pub fn margin_to(&self, l: &DMatrix<f64>) -> f64 {
        transversality_margin(&self.l1.columns, l)
    }

    /// β = Ι_{L0,L1}∘T in the L0-basis, where T: L0→L1 has graph L.
    pub fn beta(&self, l: &DMatrix<f64>) -> Result<ChartValue> {
        let n = self.l0.n();
        let margin = self.margin_to(l);
        if margin < CHART_EXIT {
            return Err(Error::NotTransverse(margin));
        }
        let coords = &self.basis_inv * l;
        let x = coords.rows(0, n).into_owned();
        let y = coords.rows(n, n).into_owned();
        let xinv = x.try_inverse().ok_or(Error::NotTransverse(margin))?;
        let t = y * xinv;
        let raw = t.transpose() * &self.m10;
        let asym = max_abs(&(&raw - raw.transpose()));
        Ok(ChartValue { beta: SymBilinear::new(raw), asymmetry: asym, margin })
    }
}

pub fn chart_beta(c: &Chart, l: &LagrangianFrame) -> Result<SymBilinear> {
    c.beta(&l.columns).map(|v| v.beta)
}

/// Acceptance level for complements produced by [`common_complement`].
pub const COMPLEMENT_MARGIN: f64 = 0.2;
const COMPLEMENT_ATTEMPTS: usize = 96;

/// A Lagrangian transverse to both `l0` and `l`, deterministic in `seed`.
pub fn common_complement(
    l0: &LagrangianFrame,
    l: &LagrangianFrame,
    omega: &SymplecticForm,
    seed: u64,
) -> Result<LagrangianFrame> {
    let n = omega.n;
    let e0 = l0.orthonormal();
    let ej = omega.complex_structure() * &e0;
    let margins = |f: &DMatrix<f64>| {
        transversality_margin(f, &e0).min(transversality_margin(f, &l.columns))
    };
    let base_margin = margins(&ej);
    if base_margin >= COMPLEMENT_MARGIN {
        return Ok(LagrangianFrame::new(ej));
    }
    // Perturb by graphs of symmetric forms over J(L0): columns E_J + E_0·M⁻¹Σ.
    let m = ej.transpose() * &omega.omega * &e0;
    let minv = m.try_inverse().ok_or(Error::SearchExhausted(0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = (base_margin, ej.clone());
    let mut scale = 0.05;
    for attempt in 0..COMPLEMENT_ATTEMPTS {
        let mut sigma = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random_range(-1.0..1.0) * scale;
                sigma[(i, j)] = v;
                sigma[(j, i)] = v;
            }
        }
        let f = &ej + &e0 * (&minv * sigma);
        let f = orth(&f, 1e-12);
        let mg = margins(&f);
        if mg > best.0 {
            best = (mg, f.clone());
        }
        if mg >= COMPLEMENT_MARGIN {
            return Ok(LagrangianFrame::new(f));
        }
        if attempt % 4 == 3 {
            scale *= 2.0;
            if scale > 64.0 {
                scale = 0.05;
            }
        }
    }
    if best.0 >= 10.0 * CHART_EXIT {
        log::debug!("common_complement: accepting margin {:.3e}", best.0);
        return Ok(LagrangianFrame::new(best.1));
    }
    Err(Error::SearchExhausted(COMPLEMENT_ATTEMPTS))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inertia_examples() {
        let i3 = SymBilinear::identity(3);
        assert_eq!(inertia(&i3, 1e-10), Inertia { n_plus: 3, n_minus: 0, dgn: 0 });
        let h = SymBilinear::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(inertia(&h, 1e-10), Inertia { n_plus: 1, n_minus: 1, dgn: 0 });
        let d = SymBilinear::from_row_slice(3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0]);
        assert_eq!(inertia(&d, 1e-10), Inertia { n_plus: 1, n_minus: 1, dgn: 1 });
    }

    #[test]
    fn symplectic_matrix_examples() {
        let w = make_symplectic(&SymBilinear::identity(1)).unwrap();
        assert_eq!(w.omega, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        let h = SymBilinear::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]);
        let w = make_symplectic(&h).unwrap();
        let expect = DMatrix::from_row_slice(
            4,
            4,
            &[0., 0., 0., 1., 0., 0., 1., 0., 0., -1., 0., 0., -1., 0., 0., 0.],
        );
        assert_eq!(w.omega, expect);
        let d = SymBilinear::from_row_slice(2, &[1.0, 0.0, 0.0, -1.0]);
        let w = make_symplectic(&d).unwrap();
        assert_eq!(w.eval(&[1., 0., 0., 0.], &[0., 0., 0., 1.]), 0.0);
        assert!(matches!(make_symplectic(&SymBilinear::zeros(2)), Err(Error::DegenerateMetric(2))));
    }

    #[test]
    fn lagrangian_examples() {
        let w = make_symplectic(&SymBilinear::identity(2)).unwrap();
        assert!(is_lagrangian(&LagrangianFrame::vertical(2), &w, 1e-12).unwrap());
        assert!(is_lagrangian(&LagrangianFrame::horizontal(2), &w, 1e-12).unwrap());
        let mixed = DMatrix::from_row_slice(4, 2, &[1., 0., 0., 0., 0., 1., 0., 0.]);
        assert!(!is_lagrangian(&LagrangianFrame::new(mixed), &w, 1e-12).unwrap());
        let bad = DMatrix::zeros(6, 2);
        assert!(is_lagrangian(&LagrangianFrame::new(bad), &w, 1e-12).is_err());
    }

    #[test]
    fn beta_of_l0_is_zero_and_circle_example() {
        let w = make_symplectic(&SymBilinear::identity(1)).unwrap();
        let l0 = LagrangianFrame::vertical(1);
        let l1 = LagrangianFrame::horizontal(1);
        let c = Chart::new(&l0, &l1, &w).unwrap();
        let b = chart_beta(&c, &l0).unwrap();
        assert_eq!(b.matrix()[(0, 0)], 0.0);
        let at = |th: f64| {
            let f = LagrangianFrame::new(DMatrix::from_row_slice(2, 1, &[th.cos(), th.sin()]));
            chart_beta(&c, &f).unwrap().matrix()[(0, 0)]
        };
        let th = std::f64::consts::FRAC_PI_2;
        assert!(at(th).abs() < 1e-15);
        // β = cot θ with this orientation: decreasing through π/2
        assert!((at(1.0) - 1.0 / 1.0f64.tan()).abs() < 1e-12);
        assert!(at(th + 1e-3) < 0.0 && at(th - 1e-3) > 0.0);
        let flat = LagrangianFrame::new(DMatrix::from_row_slice(2, 1, &[1.0, 0.0]));
        assert!(matches!(chart_beta(&c, &flat), Err(Error::NotTransverse(_))));
    }

    #[test]
    fn complement_of_trivial_pairs() {
        for n in 1..4 {
            let w = make_symplectic(&SymBilinear::identity(n)).unwrap();
            let l0 = LagrangianFrame::vertical(n);
            for l in [LagrangianFrame::horizontal(n), LagrangianFrame::vertical(n)] {
                let c = common_complement(&l0, &l, &w, 7).unwrap();
                assert!(is_lagrangian(&c, &w, 1e-10).unwrap());
                assert!(transversality_margin(&c.columns, &l0.columns) > CHART_EXIT);
                assert!(transversality_margin(&c.columns, &l.columns) > CHART_EXIT);
            }
        }
    }
}
