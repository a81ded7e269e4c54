//! Admissible quadruples (g, R, P, S) on [a, b].

use crate::error::{Error, Result};
use crate::linalg::{max_abs, null_space, rank};
use crate::operator::TimeDependentOperator;
use crate::symplectic::{inertia_scaled, make_symplectic, LagrangianFrame, SymBilinear, SymplecticForm, TOL_INERTIA};
use nalgebra::DMatrix;

/// Working precision of the flow integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    F64,
    /// Double-double; needed when focal instants are degenerate zeros of high
    /// order, where integration error δ moves the root by ~δ^{1/order}.
    DoubleDouble,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quadruple {
    pub g: SymBilinear,
    pub r: TimeDependentOperator,
    /// n×k, columns span P (k may be 0).
    pub p_basis: DMatrix<f64>,
    /// k×k; S(u, v) for u, v given in P-basis coordinates.
    pub s: SymBilinear,
    pub a: f64,
    pub b: f64,
    pub precision: Precision,
}

impl Quadruple {
    pub fn new(
        g: SymBilinear,
        r: TimeDependentOperator,
        p_basis: DMatrix<f64>,
        s: SymBilinear,
        interval: (f64, f64),
    ) -> Result<Quadruple> {
        let q = Quadruple { g, r, p_basis, s, a: interval.0, b: interval.1, precision: Precision::F64 };
        q.validate()?;
        Ok(q)
    }

    pub fn with_precision(mut self, p: Precision) -> Self {
        self.precision = p;
        self
    }

    pub fn n(&self) -> usize {
        self.g.dim()
    }

    pub fn k(&self) -> usize {
        self.p_basis.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::DimensionMismatch("n must be positive".into()));
        }
        if !(self.a < self.b) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::Admissibility(format!("interval [{}, {}] is not proper", self.a, self.b)));
        }
        if self.r.n != n {
            return Err(Error::DimensionMismatch(format!("R is {}×{}, g is {n}×{n}", self.r.n, self.r.n)));
        }
        if self.p_basis.nrows() != n {
            return Err(Error::DimensionMismatch("P basis vectors must have n entries".into()));
        }
        if self.s.dim() != self.k() {
            return Err(Error::DimensionMismatch(format!("S must be {k}×{k}", k = self.k())));
        }
        let ig = inertia_scaled(&self.g, TOL_INERTIA);
        if ig.dgn > 0 {
            return Err(Error::DegenerateMetric(ig.dgn));
        }
        if self.k() > 0 {
            if rank(&self.p_basis, 1e-10) < self.k() {
                return Err(Error::Admissibility("P basis is not linearly independent".into()));
            }
            let gp = self.g.congruent(&self.p_basis);
            if inertia_scaled(&gp, TOL_INERTIA).dgn > 0 {
                return Err(Error::Admissibility("g restricted to P is degenerate".into()));
            }
        }
        self.r.check_denominator(self.a, self.b)?;
        let res = self.r.g_symmetry_residual(self.g.matrix(), self.a, self.b, 64);
        if res > 1e-8 {
            return Err(Error::Admissibility(format!("R(t) is not g-symmetric (residual {res:.2e})")));
        }
        Ok(())
    }

    pub fn symplectic(&self) -> SymplecticForm {
        make_symplectic(&self.g).expect("validated metric")
    }

    /// Basis of P^⊥ = {w : g(w, P) = 0}.
    pub fn p_perp(&self) -> DMatrix<f64> {
        let n = self.n();
        if self.k() == 0 {
            return DMatrix::identity(n, n);
        }
        let pg = self.p_basis.transpose() * self.g.matrix();
        null_space(&pg, 1e-12)
    }

    /// S as an operator on P in P-coordinates: g(S[p_i], p_j) = S(p_i, p_j).
    pub fn s_operator(&self) -> DMatrix<f64> {
        if self.k() == 0 {
            return DMatrix::zeros(0, 0);
        }
        let gp = self.p_basis.transpose() * self.g.matrix() * &self.p_basis;
        gp.try_inverse().expect("g|P nondegenerate") * self.s.matrix()
    }

    /// ℓ₀ = {(x, y) : x ∈ P, y + S[x] ∈ P^⊥}.
    pub fn initial_lagrangian(&self) -> LagrangianFrame {
        let n = self.n();
        let k = self.k();
        let perp = self.p_perp();
        let sop = self.s_operator();
        let mut cols = DMatrix::zeros(2 * n, n);
        for i in 0..k {
            let p = self.p_basis.column(i);
            let sp = &self.p_basis * sop.column(i);
            cols.view_mut((0, i), (n, 1)).copy_from(&p);
            cols.view_mut((n, i), (n, 1)).copy_from(&(-sp));
        }
        for j in 0..perp.ncols() {
            cols.view_mut((n, k + j), (n, 1)).copy_from(&perp.column(j));
        }
        LagrangianFrame::new(cols)
    }

    /// Same problem with R replaced by R − λ·Id.
    pub fn shifted(&self, lambda: f64) -> Quadruple {
        let mut q = self.clone();
        q.r = self.r.add_constant(&(-lambda * DMatrix::identity(self.n(), self.n())));
        q
    }

    pub fn with_interval(&self, a: f64, b: f64) -> Quadruple {
        let mut q = self.clone();
        q.a = a;
        q.b = b;
        q
    }

    pub fn r_sup_norm(&self, f: impl Fn(&DMatrix<f64>) -> f64) -> f64 {
        self.r.sup_norm_on(self.a, self.b, 512, f)
    }

    pub fn is_positive_definite(&self) -> bool {
        let i = inertia_scaled(&self.g, TOL_INERTIA);
        i.n_plus == self.n()
    }

    pub fn g_asymmetry(&self) -> f64 {
        max_abs(&(self.g.matrix() - self.g.matrix().transpose()))
    }
}
