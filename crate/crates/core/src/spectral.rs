//! Real spectrum of 𝒜 = −d²/dt² + R with the boundary conditions of ℓ₀ at a
//! and u(b) = 0, by shooting on r(λ) = det A(b; λ).

use crate::error::{Error, Result};
use crate::focal::kernel_abs;
use crate::integrate::{integrate_frame, integrate_fundamental};
use crate::linalg::{orth, singular_values, spectral_norm, sym_eigenvalues};
use crate::maslov::{maslov_index, maslov_of_curve};
use crate::quadruple::{Precision, Quadruple};
use crate::real::DD;
use crate::symplectic::{inertia, LagrangianFrame, SymBilinear, TOL_INERTIA};
use nalgebra::DMatrix;

/// Default number of λ-samples on [λ_floor, 0).
pub const LAMBDA_SAMPLES: usize = 512;
/// Integration nodes per shot.
pub const SHOOT_STEPS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpoint {
    pub lambda: f64,
    pub dim: usize,
    /// ĝ restricted to H_λ in an orthonormal basis of ker A(b; λ)
    pub gram: SymBilinear,
    pub signature: i64,
    pub degenerate_flag: bool,
}

#[derive(Debug, Clone)]
pub struct SpectralProblem {
    pub q: Quadruple,
    pub lambda_min: f64,
    /// nodes for the ĝ quadrature (even)
    pub quad_steps: usize,
}

impl SpectralProblem {
    pub fn new(q: &Quadruple) -> Result<SpectralProblem> {
        Ok(SpectralProblem { q: q.clone(), lambda_min: eigen_floor(q)?, quad_steps: 512 })
    }
}

/// Frame [A; B](b) of the (P,S)-solutions for R − λ.
fn end_frame(q: &Quadruple, lambda: f64, steps: usize) -> DMatrix<f64> {
    let qs = q.shifted(lambda);
    let n = q.n();
    let l0 = q.initial_lagrangian().columns;
    let x0 = l0.rows(0, n).into_owned();
    let y0 = l0.rows(n, n).into_owned();
    let (x, y): (DMatrix<f64>, DMatrix<f64>) = match q.precision {
        Precision::F64 => integrate_frame::<f64>(&qs.r, q.a, q.b, steps, &x0, &y0),
        Precision::DoubleDouble => {
            let (x, y) = integrate_frame::<DD>(&qs.r, q.a, q.b, steps, &x0, &y0);
            (x.map(|v| v.to_f64()), y.map(|v| v.to_f64()))
        }
    };
    let mut f = DMatrix::zeros(2 * n, n);
    f.view_mut((0, 0), (n, n)).copy_from(&x);
    f.view_mut((n, 0), (n, n)).copy_from(&y);
    f
}

/// r(λ) = det A(b; λ).
pub fn shoot_r(q: &Quadruple, lambda: f64, steps: usize) -> Result<f64> {
    if steps < 16 {
        return Err(Error::InvalidArgument(format!("steps = {steps} < 16")));
    }
    let n = q.n();
    Ok(end_frame(q, lambda, steps).rows(0, n).determinant())
}

struct Shot {
    det: f64,
    /// σ_min of the position block of the orthonormalized end frame
    rho: f64,
}

fn shot(q: &Quadruple, lambda: f64) -> Shot {
    let n = q.n();
    let f = end_frame(q, lambda, SHOOT_STEPS);
    let det = f.rows(0, n).determinant();
    let o = orth(&f, 1e-14);
    let rho = singular_values(&o.rows(0, n).into_owned()).last().cloned().unwrap_or(0.0);
    Shot { det, rho }
}

/// Coordinates adapted to ℝⁿ = P ⊕ P^⊥, in which u(a) ∈ P and u′(a) + S u(a) ∈ P^⊥
/// are orthogonal, so the boundary term of ∫⟨−u″, u⟩ is −⟨S u(a), u(a)⟩.
fn adapted_basis(q: &Quadruple) -> DMatrix<f64> {
    let n = q.n();
    let k = q.k();
    let perp = q.p_perp();
    let mut d = DMatrix::zeros(n, n);
    if k > 0 {
        d.view_mut((0, 0), (n, k)).copy_from(&q.p_basis);
    }
    d.view_mut((0, k), (n, n - k)).copy_from(&perp);
    d
}

/// A lower bound for the real eigenvalues: with ⟨·,·⟩ the inner product of the
/// adapted coordinates, λ‖u‖² ≥ ‖u′‖² − ‖S‖·|u(a)|² − ‖R‖‖u‖², and
/// |u(a)|⁴ ≤ 4‖u‖²‖u′‖² gives λ ≥ −‖S‖² − sup‖R‖. The estimate is then
/// validated by scanning r on [2λ_f, λ_f] and lowered until no root is seen.
pub fn eigen_floor(q: &Quadruple) -> Result<f64> {
    let d = adapted_basis(q);
    let dinv = d.clone().try_inverse().ok_or(Error::Admissibility("P ⊕ P^⊥ is not a direct sum".into()))?;
    let r_norm = q.r_sup_norm(|r| spectral_norm(&(&dinv * r * &d)));
    let s_norm = if q.k() > 0 { spectral_norm(&crate::linalg::symmetrize(&q.s_operator())) } else { 0.0 };
    let mut floor = -(s_norm * s_norm) - r_norm - 1.0;
    for _ in 0..30 {
        let m = 64;
        let vals: Vec<f64> =
            (0..=m).map(|i| shot(q, 2.0 * floor - floor * i as f64 / m as f64).det).collect();
        if vals.windows(2).all(|w| w[0] * w[1] > 0.0) {
            return Ok(floor);
        }
        floor *= 2.0;
    }
    Ok(floor)
}

fn bisect_lambda(q: &Quadruple, mut lo: f64, mut hi: f64, slo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-10 * mid.abs().max(1.0) * 1e-3 || mid <= lo || mid >= hi {
            break;
        }
        let s = shot(q, mid).det;
        if s == 0.0 {
            return mid;
        }
        if (s > 0.0) == (slo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn golden_lambda(q: &Quadruple, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - gr * (hi - lo);
    let mut d = lo + gr * (hi - lo);
    let mut fc = shot(q, c).rho;
    let mut fd = shot(q, d).rho;
    for _ in 0..160 {
        if hi - lo <= 1e-14 * lo.abs().max(hi.abs()).max(1.0) {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - gr * (hi - lo);
            fc = shot(q, c).rho;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + gr * (hi - lo);
            fd = shot(q, d).rho;
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Composite Simpson weights on a uniform grid with an even number of cells.
fn simpson_weights(m: usize, h: f64) -> Vec<f64> {
    (0..=m)
        .map(|i| {
            let w = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

/// Eigenspace data at a root λ of r.
pub fn eigenpoint(sp: &SpectralProblem, lambda: f64, tol: f64) -> Result<Eigenpoint> {
    let q = &sp.q;
    let n = q.n();
    let qs = q.shifted(lambda);
    let steps = sp.quad_steps + sp.quad_steps % 2;
    let path = integrate_fundamental(&qs, steps)?;
    let fb = path.frame(q.b);
    let scale = singular_values(&fb).first().cloned().unwrap_or(1.0);
    let ker = kernel_abs(&(fb.rows(0, n).into_owned() / scale), tol);
    let dim = ker.ncols();
    let g = q.g.matrix();
    let h = (q.b - q.a) / steps as f64;
    let w = simpson_weights(steps, h);
    let mut gram = DMatrix::zeros(dim, dim);
    let mut eucl = DMatrix::zeros(dim, dim);
    for (i, wi) in w.iter().enumerate() {
        let f = path.node_frame(i).map(|v| v.to_f64());
        let u = f.rows(0, n) * &ker;
        gram += (u.transpose() * g * &u) * *wi;
        eucl += (u.transpose() * &u) * *wi;
    }
    let gram = SymBilinear::new(gram);
    let thresh = 1e-8 * spectral_norm(&eucl).max(f64::MIN_POSITIVE) * spectral_norm(g);
    let inn = inertia(&gram, thresh);
    Ok(Eigenpoint { lambda, dim, signature: inn.signature(), degenerate_flag: inn.dgn > 0, gram })
}

/// All real eigenvalues in [λ_min, 0].
pub fn real_eigenvalues(sp: &SpectralProblem, tol: f64) -> Result<Vec<Eigenpoint>> {
    let q = &sp.q;
    let tol = tol.max(1e-12);
    let (lo, hi) = (sp.lambda_min, 0.0);
    let m = LAMBDA_SAMPLES;
    let h = (hi - lo) / m as f64;
    let ls: Vec<f64> = (0..=m).map(|i| if i == m { hi } else { lo + h * i as f64 }).collect();
    let shots: Vec<Shot> = ls.iter().map(|&l| shot(q, l)).collect();
    let mut roots = Vec::new();
    for i in 0..m {
        let (u, v) = (shots[i].det, shots[i + 1].det);
        if u == 0.0 {
            roots.push(ls[i]);
        } else if u * v < 0.0 {
            roots.push(bisect_lambda(q, ls[i], ls[i + 1], u));
        }
    }
    if shots[m].det == 0.0 {
        roots.push(hi);
    }
    let near = |l: f64, roots: &[f64]| roots.iter().any(|&r| (r - l).abs() <= 2.0 * h);
    let mut extra = Vec::new();
    for i in 1..m {
        let here = shots[i].rho;
        if here < shots[i - 1].rho && here <= shots[i + 1].rho && here < 1e-2 && !near(ls[i], &roots) {
            let (lm, rm) = golden_lambda(q, ls[i - 1], ls[i + 1]);
            if rm <= tol {
                extra.push(lm);
            } else if rm <= 100.0 * tol {
                return Err(Error::UnresolvedCluster(lm));
            }
        }
    }
    roots.extend(extra);
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * a.abs().max(1.0));
    let mut out = Vec::new();
    for l in roots {
        let p = eigenpoint(sp, l, tol.max(1e-8))?;
        if p.dim == 0 {
            return Err(Error::UnresolvedCluster(l));
        }
        out.push(p);
    }
    Ok(out)
}

/// Σ over λ < 0 of sgn(ĝ|H_λ).
pub fn spectral_index(points: &[Eigenpoint]) -> i64 {
    points.iter().filter(|p| p.lambda < 0.0).map(|p| p.signature).sum()
}

#[derive(Debug, Clone)]
pub struct MorseReport {
    pub i_spec: i64,
    pub mu: i64,
    /// Maslov index of λ ↦ ℓ(b; λ) on [λ_floor, 0]
    pub lambda_maslov: i64,
    pub eigenpoints: Vec<Eigenpoint>,
    pub lambda_floor: f64,
    /// a negative eigenvalue with degenerate ĝ|H_λ: no conclusion is drawn
    pub abstained: bool,
    pub spec_equals_mu: bool,
    pub lambda_equals_spec: bool,
}

/// μ of λ ↦ ℓ(b; λ), traversed from λ_floor up to 0 (this orientation counts
/// every negative eigenvalue positively for positive-definite g).
pub fn lambda_maslov(q: &Quadruple, lambda_floor: f64, samples: usize, seed: u64) -> Result<i64> {
    let omega = q.symplectic();
    let l0 = LagrangianFrame::vertical(q.n());
    let ls: Vec<f64> = (0..=samples).map(|i| lambda_floor * (samples - i) as f64 / samples as f64).collect();
    let curve = |l: f64| end_frame(q, l, SHOOT_STEPS);
    Ok(maslov_of_curve(&curve, &l0, &omega, &ls, seed, TOL_INERTIA)?.mu)
}

pub fn morse_equality_check(q: &Quadruple) -> Result<MorseReport> {
    let sp = SpectralProblem::new(q)?;
    let points = real_eigenvalues(&sp, 1e-9)?;
    let i_spec = spectral_index(&points);
    let path = integrate_fundamental(q, 1024)?;
    let mu = maslov_index(q, &path)?.mu;
    let lm = lambda_maslov(q, sp.lambda_min, LAMBDA_SAMPLES, 0)?;
    let abstained = points.iter().any(|p| p.lambda < 0.0 && p.degenerate_flag);
    Ok(MorseReport {
        i_spec,
        mu,
        lambda_maslov: lm,
        eigenpoints: points,
        lambda_floor: sp.lambda_min,
        abstained,
        spec_equals_mu: i_spec == mu,
        lambda_equals_spec: lm == i_spec,
    })
}

/// Negative index of I(u,v) = ∫ g(u′,v′) + g(Ru,v) dt − S(u(a),v(a)) on
/// continuous piecewise-linear u with u(a) ∈ P and u(b) = 0.
pub fn index_form_index(q: &Quadruple, mesh: usize) -> Result<usize> {
    if !q.is_positive_definite() {
        return Err(Error::NotPositiveDefinite);
    }
    if mesh < 8 {
        return Err(Error::InvalidArgument(format!("mesh = {mesh} < 8")));
    }
    let n = q.n();
    let k = q.k();
    let g = q.g.matrix();
    let h = (q.b - q.a) / mesh as f64;
    // unknowns: P-coordinates of u(a), then u at interior nodes 1..mesh−1
    let dim = k + n * (mesh - 1);
    // node i ↦ n×dim embedding matrix
    let embed = |node: usize| -> DMatrix<f64> {
        let mut e = DMatrix::zeros(n, dim);
        if node == 0 {
            if k > 0 {
                e.view_mut((0, 0), (n, k)).copy_from(&q.p_basis);
            }
        } else if node < mesh {
            let off = k + n * (node - 1);
            e.view_mut((0, off), (n, n)).copy_from(&DMatrix::identity(n, n));
        }
        e
    };
    let gauss = [
        (-(3.0f64 / 5.0).sqrt(), 5.0 / 9.0),
        (0.0, 8.0 / 9.0),
        ((3.0f64 / 5.0).sqrt(), 5.0 / 9.0),
    ];
    let mut mat = DMatrix::zeros(dim, dim);
    for e in 0..mesh {
        let (l, r) = (embed(e), embed(e + 1));
        let d = (&r - &l) / h;
        mat += d.transpose() * g * &d * h;
        let t0 = q.a + h * e as f64;
        for (x, w) in gauss {
            let s = 0.5 * (x + 1.0);
            let u = &l * (1.0 - s) + &r * s;
            let gr = g * q.r.eval(t0 + s * h);
            mat += u.transpose() * gr * &u * (0.5 * h * w);
        }
    }
    if k > 0 {
        let mut sblk = DMatrix::zeros(dim, dim);
        sblk.view_mut((0, 0), (k, k)).copy_from(q.s.matrix());
        mat -= sblk;
    }
    let mat = crate::linalg::symmetrize(&mat);
    let ev = sym_eigenvalues(&mat);
    let scale = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(ev.iter().filter(|&&v| v < -1e-12 * scale).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::TimeDependentOperator;
    use std::f64::consts::PI;

    fn quad(g: DMatrix<f64>, r: DMatrix<f64>, ab: (f64, f64)) -> Quadruple {
        let n = g.nrows();
        Quadruple::new(SymBilinear::new(g), TimeDependentOperator::constant(r), DMatrix::zeros(n, 0), SymBilinear::zeros(0), ab)
            .unwrap()
    }

    #[test]
    fn dirichlet_shooting() {
        let q = quad(DMatrix::identity(1, 1), DMatrix::zeros(1, 1), (0.0, PI));
        assert!(shoot_r(&q, 1.0, 64).unwrap().abs() < 1e-12);
        assert!(shoot_r(&q, 0.5, 64).unwrap().abs() > 0.1);
        let f = eigen_floor(&q).unwrap();
        assert!(f <= 0.0);
        let sp = SpectralProblem::new(&q).unwrap();
        assert!(real_eigenvalues(&sp, 1e-9).unwrap().is_empty());
    }

    #[test]
    fn shifted_dirichlet() {
        let q = quad(DMatrix::identity(1, 1), DMatrix::from_element(1, 1, -2.0), (0.0, PI));
        assert!(eigen_floor(&q).unwrap() <= -2.0);
        let sp = SpectralProblem::new(&q).unwrap();
        let pts = real_eigenvalues(&sp, 1e-9).unwrap();
        assert_eq!(pts.len(), 1);
        assert!((pts[0].lambda + 1.0).abs() < 1e-9);
        assert_eq!((pts[0].dim, pts[0].signature), (1, 1));
        assert_eq!(spectral_index(&pts), 1);
    }

    #[test]
    fn indefinite_decoupled_double_eigenvalue() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let q = quad(g, -2.0 * DMatrix::identity(2, 2), (0.0, PI));
        let sp = SpectralProblem::new(&q).unwrap();
        let pts = real_eigenvalues(&sp, 1e-9).unwrap();
        assert_eq!(pts.len(), 1);
        assert!((pts[0].lambda + 1.0).abs() < 1e-7);
        assert_eq!((pts[0].dim, pts[0].signature, pts[0].degenerate_flag), (2, 0, false));
        assert_eq!(spectral_index(&pts), 0);
        let rep = morse_equality_check(&q).unwrap();
        assert_eq!((rep.i_spec, rep.mu, rep.lambda_maslov), (0, 0, 0));
    }

    #[test]
    fn harmonic_morse_equality() {
        let q = quad(DMatrix::identity(1, 1), DMatrix::from_element(1, 1, -1.0), (0.0, 3.5));
        let rep = morse_equality_check(&q).unwrap();
        assert_eq!((rep.i_spec, rep.mu, rep.lambda_maslov), (1, 1, 1));
        let want = (PI / 3.5).powi(2) - 1.0;
        assert!((rep.eigenpoints[0].lambda - want).abs() < 1e-6);
        assert_eq!(index_form_index(&q, 16).unwrap(), 1);
        let q7 = q.with_interval(0.0, 7.0);
        assert_eq!(index_form_index(&q7, 32).unwrap(), 2);
        let free = quad(DMatrix::identity(1, 1), DMatrix::zeros(1, 1), (0.0, 3.5));
        assert_eq!(index_form_index(&free, 8).unwrap(), 0);
    }

    #[test]
    fn index_form_requires_definite_metric() {
        let q = quad(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]), DMatrix::zeros(2, 2), (0.0, 1.0));
        assert!(matches!(index_form_index(&q, 16), Err(Error::NotPositiveDefinite)));
    }
}
