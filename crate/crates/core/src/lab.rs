//! Explicit curves: the generator loop, the degenerate counterexample built
//! from a polynomial β, exact recovery of R from β, and the evaporation demo.

use crate::error::{Error, Result};
use crate::focal::{focal_instants_with, FocalOptions, FocalRecord};
use crate::integrate::integrate_fundamental;
use crate::linalg::null_space;
use crate::maslov::{maslov_index_with, maslov_of_curve, MaslovOptions};
use crate::operator::TimeDependentOperator;
use crate::qpoly::{q, qr, QPoly};
use crate::quadruple::{Precision, Quadruple};
use crate::real::{Real, DD};
use crate::symplectic::{make_symplectic, LagrangianFrame, SymBilinear};
use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

/// Square matrix of exact polynomials, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMat {
    pub n: usize,
    e: Vec<QPoly>,
}

impl PolyMat {
    pub fn zeros(n: usize) -> Self {
        PolyMat { n, e: vec![QPoly::zero(); n * n] }
    }

    pub fn from_ints(n: usize, v: &[i64]) -> Self {
        assert_eq!(v.len(), n * n);
        PolyMat { n, e: v.iter().map(|&x| QPoly::from_ints(&[x])).collect() }
    }

    pub fn from_entries(n: usize, e: Vec<QPoly>) -> Self {
        assert_eq!(e.len(), n * n);
        PolyMat { n, e }
    }

    pub fn get(&self, i: usize, j: usize) -> &QPoly {
        &self.e[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: QPoly) {
        self.e[i * self.n + j] = p;
    }

    pub fn entries(&self) -> &[QPoly] {
        &self.e
    }

    pub fn map(&self, f: impl Fn(&QPoly) -> QPoly) -> Self {
        PolyMat { n: self.n, e: self.e.iter().map(f).collect() }
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut out = PolyMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(j, i, self.get(i, j).clone());
            }
        }
        out
    }

    pub fn mul(&self, o: &PolyMat) -> Self {
        let n = self.n;
        let mut out = PolyMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = QPoly::zero();
                for k in 0..n {
                    acc = &acc + &(self.get(i, k) * o.get(k, j));
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn add(&self, o: &PolyMat) -> Self {
        PolyMat { n: self.n, e: self.e.iter().zip(&o.e).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, o: &PolyMat) -> Self {
        PolyMat { n: self.n, e: self.e.iter().zip(&o.e).map(|(a, b)| a - b).collect() }
    }

    pub fn derivative(&self) -> Self {
        self.map(|p| p.derivative())
    }

    fn minor(&self, r: usize, c: usize) -> PolyMat {
        let n = self.n;
        let mut e = Vec::with_capacity((n - 1) * (n - 1));
        for i in (0..n).filter(|&i| i != r) {
            for j in (0..n).filter(|&j| j != c) {
                e.push(self.get(i, j).clone());
            }
        }
        PolyMat { n: n - 1, e }
    }

    /// Laplace expansion (n is small).
    pub fn det(&self) -> QPoly {
        match self.n {
            0 => QPoly::from_ints(&[1]),
            1 => self.e[0].clone(),
            2 => &(self.get(0, 0) * self.get(1, 1)) - &(self.get(0, 1) * self.get(1, 0)),
            n => {
                let mut acc = QPoly::zero();
                for j in 0..n {
                    let term = self.get(0, j) * &self.minor(0, j).det();
                    acc = if j % 2 == 0 { &acc + &term } else { &acc - &term };
                }
                acc
            }
        }
    }

    /// adj(M) with M·adj(M) = det(M)·I.
    pub fn adjugate(&self) -> Self {
        let n = self.n;
        if n == 1 {
            return PolyMat::from_ints(1, &[1]);
        }
        let mut out = PolyMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let c = self.minor(i, j).det();
                out.set(j, i, if (i + j) % 2 == 0 { c } else { -&c });
            }
        }
        out
    }

    pub fn eval(&self, t: &BigRational) -> Vec<BigRational> {
        self.e.iter().map(|p| p.eval(t)).collect()
    }

    pub fn eval_f64(&self, t: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.e.iter().map(|p| p.eval_f64(t)).collect::<Vec<_>>())
    }

    pub fn deriv_at_f64(&self, k: usize, t: &BigRational) -> DMatrix<f64> {
        let v: Vec<f64> = self.e.iter().map(|p| p.deriv_at(k, t).to_f64().unwrap_or(f64::NAN)).collect();
        DMatrix::from_row_slice(self.n, self.n, &v)
    }

    pub fn degree(&self) -> i64 {
        self.e.iter().map(|p| p.degree()).max().unwrap_or(-1)
    }
}

fn const_f64(m: &PolyMat) -> DMatrix<f64> {
    m.eval_f64(0.0)
}

/// A curve β(t) of symmetric forms in the chart (L₀, L₁ = graph Z).
#[derive(Clone, Debug)]
pub struct BetaCurve {
    pub n: usize,
    pub a: BigRational,
    pub b: BigRational,
    /// the interior root at which the degenerate focal instant is built
    pub t_star: BigRational,
    pub beta: PolyMat,
    pub g: PolyMat,
    pub z: PolyMat,
    /// coefficient and entry of the bump term added by the join, if any
    pub bump: Option<(i64, usize, usize)>,
}

impl BetaCurve {
    pub fn a_f64(&self) -> f64 {
        self.a.to_f64().unwrap_or(f64::NAN)
    }

    pub fn b_f64(&self) -> f64 {
        self.b.to_f64().unwrap_or(f64::NAN)
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        self.beta.eval_f64(t)
    }

    pub fn det(&self) -> QPoly {
        self.beta.det()
    }
}

/// Solve for p = L + t^{m0+1}·w, deg w = jets_a.len() − 1, with L the degree-m0
/// truncation of `local`, so that p^{(k)}(a) = jets_a[k].
pub fn hermite_join(local: &QPoly, m0: usize, a: &BigRational, jets_a: &[BigRational]) -> QPoly {
    let l = QPoly::new((0..=m0).map(|k| local.coeff(k)).collect());
    let tm = QPoly::monomial(m0 + 1, q(1));
    let basis: Vec<QPoly> = (0..jets_a.len()).map(|j| &tm * &QPoly::linear_power(a, j)).collect();
    // lower-triangular system: d^k[(t−a)^j t^{m0+1}](a) = 0 for k < j
    let mut c: Vec<BigRational> = vec![BigRational::zero(); basis.len()];
    for k in 0..jets_a.len() {
        let mut rhs = &jets_a[k] - l.deriv_at(k, a);
        for (j, cj) in c.iter().enumerate().take(k) {
            rhs -= cj * basis[j].deriv_at(k, a);
        }
        c[k] = rhs / basis[k].deriv_at(k, a);
    }
    let mut p = l;
    for (cj, bj) in c.iter().zip(&basis) {
        p = &p + &bj.scale(cj);
    }
    p
}

/// det β has no zero in ]lo, hi[ and stays away from one: with the endpoint
/// zeros divided out, |h| never drops below half its smaller endpoint value.
/// Near-zeros make the recovered R nearly singular.
fn det_free_between(det: &QPoly, lo: &BigRational, hi: &BigRational) -> bool {
    if det.count_roots_open(lo, hi) != 0 {
        return false;
    }
    let mut h = det.clone();
    for r in [lo, hi] {
        let k = h.order_at(r).unwrap_or(0);
        h = h.divrem(&QPoly::linear_power(r, k)).0;
    }
    let (l, u) = (lo.to_f64().unwrap_or(0.0), hi.to_f64().unwrap_or(0.0));
    let floor = 0.5 * h.eval(lo).abs().min(h.eval(hi).abs()).to_f64().unwrap_or(0.0);
    let m = 2000;
    (0..=m).all(|i| h.eval_f64(l + (u - l) * i as f64 / m as f64).abs() >= floor)
}

/// β near t = 0 for the degenerate counterexample (n = 2, x/z/y layout).
pub fn counterexample_germ() -> [QPoly; 3] {
    let x = QPoly::new(vec![q(0), q(0), q(0), q(-2), q(0), qr(-54, 5)]);
    let y = QPoly::from_ints(&[-1, -6, 18, -54]);
    let z = QPoly::from_ints(&[0, 0, -3]);
    [x, z, y]
}

/// The counterexample β on [−1, b]: the germ at 0 joined to the boundary data
/// β(−1) = 0, β′(−1) = g, β″(−1) = 2gZ by one polynomial per entry.
pub fn counterexample_beta() -> Result<BetaCurve> {
    let a = q(-1);
    let g = PolyMat::from_ints(2, &[0, 1, 1, 0]);
    let z = PolyMat::from_ints(2, &[0, 0, 1, 0]);
    let [x0, z0, y0] = counterexample_germ();
    let gz = g.mul(&z);
    let germ = |i: usize, j: usize| match (i, j) {
        (0, 0) => x0.clone(),
        (1, 1) => y0.clone(),
        _ => z0.clone(),
    };
    let mut beta = PolyMat::zeros(2);
    for i in 0..2 {
        for j in i..2 {
            let jets = vec![q(0), g.get(i, j).coeff(0), &gz.get(i, j).coeff(0) * q(2)];
            let p = hermite_join(&germ(i, j), 6, &a, &jets);
            beta.set(i, j, p.clone());
            beta.set(j, i, p);
        }
    }
    let zero = q(0);
    let mut bump_used = None;
    if !det_free_between(&beta.det(), &a, &zero) {
        // (t+1)^3 t^7 preserves every jet used above
        let bump = &QPoly::linear_power(&a, 3) * &QPoly::monomial(7, q(1));
        let mut found = None;
        'search: for k in 0..16 {
            let mag = 10i64 << k;
            for (i, j) in [(0, 0), (0, 1), (1, 1)] {
                for s in [1i64, -1] {
                    let mut cand = beta.clone();
                    let p = cand.get(i, j) + &bump.scale(&q(s * mag));
                    cand.set(i, j, p.clone());
                    cand.set(j, i, p);
                    if det_free_between(&cand.det(), &a, &zero) {
                        found = Some((cand, s * mag, i, j));
                        break 'search;
                    }
                }
            }
        }
        match found {
            Some((cand, c, i, j)) => {
                log::info!("counterexample join: bump {c}·(t+1)^3 t^7 on entry ({i},{j})");
                beta = cand;
                bump_used = Some((c, i, j));
            }
            None => return Err(Error::JoinFailed("no bump keeps det β free of zeros in ]-1,0[".into())),
        }
    }
    // shrink b until det β has no zero in ]0, b]
    let det = beta.det();
    let mut b = qr(1, 10);
    for _ in 0..60 {
        if det.count_roots(&zero, &b) == 0 {
            break;
        }
        b /= q(2);
    }
    Ok(BetaCurve { n: 2, a, b, t_star: zero, beta, g, z, bump: bump_used })
}

/// R = β⁻¹Qβ⁻¹g + Z², Q = g − β′ + βZ + Zᵀβ, as an exact reduced quotient.
#[derive(Clone, Debug)]
pub struct RecoveredR {
    pub num: PolyMat,
    pub den: QPoly,
}

pub fn recover_r_exact(bc: &BetaCurve) -> Result<RecoveredR> {
    let beta = &bc.beta;
    let qform = bc.g.sub(&beta.derivative()).add(&beta.mul(&bc.z)).add(&bc.z.transpose().mul(beta));
    let adj = beta.adjugate();
    let det = beta.det();
    let mut num = adj.mul(&qform).mul(&adj).mul(&bc.g);
    let mut den = &det * &det;
    let mut common = den.clone();
    for p in num.entries() {
        common = QPoly::gcd(&common, p);
        if common.degree() == 0 {
            break;
        }
    }
    if common.degree() > 0 {
        num = num.map(|p| p.divrem(&common).0);
        den = den.divrem(&common).0;
    }
    // normalize the denominator's largest coefficient to one
    let big = den.coeffs().iter().max_by(|x, y| {
        x.to_f64().unwrap_or(0.0).abs().partial_cmp(&y.to_f64().unwrap_or(0.0).abs()).unwrap()
    });
    if let Some(s) = big.cloned() {
        let inv = q(1) / s;
        den = den.scale(&inv);
        num = num.map(|p| p.scale(&inv));
    }
    let z2 = bc.z.mul(&bc.z);
    num = num.add(&z2.map(|p| p * &den));
    let roots = den.isolate_roots(bc.a_f64(), bc.b_f64(), 1e-12);
    if let Some(&r) = roots.first() {
        return Err(Error::SingularLimit(r));
    }
    Ok(RecoveredR { num, den })
}

impl RecoveredR {
    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        self.num.eval_f64(t) / self.den.eval_f64(t)
    }

    pub fn to_operator(&self) -> Result<TimeDependentOperator> {
        let n = self.num.n;
        let deg = self.num.degree().max(0) as usize;
        let coeffs: Vec<DMatrix<DD>> = (0..=deg)
            .map(|k| {
                DMatrix::from_row_slice(
                    n,
                    n,
                    &self.num.entries().iter().map(|p| DD::from_rational(&p.coeff(k))).collect::<Vec<_>>(),
                )
            })
            .collect();
        let den: Vec<DD> = self.den.coeffs().iter().map(DD::from_rational).collect();
        TimeDependentOperator::rational(coeffs, den, n)
    }
}

/// R(t) recovered from β (finite at removable singularities).
pub fn recover_r(bc: &BetaCurve, t: f64) -> Result<DMatrix<f64>> {
    Ok(recover_r_exact(bc)?.eval(t))
}

/// Outcome of the checks (1)–(7) on a counterexample-type curve.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    /// β(a) = 0
    pub c1: bool,
    /// β′(a) = g and β″(a) = 2gZ
    pub c2: bool,
    /// the zeros of det β in [a, b] are exactly a and t*
    pub c3: bool,
    /// ker β(t*) = span{e₁}
    pub c4: bool,
    /// x′(t*) = 0, z′(t*) = 1 + y(t*), x″(t*) = 2 + 2y(t*)
    pub c5: bool,
    /// det β has a zero of order exactly 3 at t*, with positive third derivative
    pub c6: bool,
    /// R is finite at t*
    pub c7: bool,
    pub cn1_a: bool,
    pub cn2_a: bool,
    pub cn1_t_star: bool,
    pub cn2_t_star: bool,
    /// (root, order of zero of det β)
    pub det_orders: Vec<(f64, usize)>,
}

impl ConditionReport {
    pub fn all(&self) -> bool {
        self.c1 && self.c2 && self.c3 && self.c4 && self.c5 && self.c6 && self.c7
    }
}

const COND_TOL: f64 = 1e-12;

/// CN1 / CN2 at t₀ on ker β(t₀).
fn cn_checks(bc: &BetaCurve, t0: &BigRational) -> (bool, bool) {
    let g = const_f64(&bc.g);
    let z = const_f64(&bc.z);
    let b0 = bc.beta.deriv_at_f64(0, t0);
    let b1 = bc.beta.deriv_at_f64(1, t0);
    let b2 = bc.beta.deriv_at_f64(2, t0);
    let ker = null_space(&b0, 1e-12);
    if ker.ncols() == 0 {
        return (true, true);
    }
    // CN1: β′(v, w) = g(v, w) + β(Zv, w) for v ∈ ker, all w
    let lhs1 = ker.transpose() * &b1;
    let rhs1 = ker.transpose() * (&g + z.transpose() * &b0);
    let cn1 = (lhs1 - rhs1).abs().max() <= COND_TOL;
    // CN2: β″(v, w) = 2g(Zv, w) + 2β(Zv, Zw) for v, w ∈ ker
    let lhs2 = ker.transpose() * &b2 * &ker;
    let rhs2 = ker.transpose() * (2.0 * z.transpose() * &g + 2.0 * z.transpose() * &b0 * &z) * &ker;
    let cn2 = (lhs2 - rhs2).abs().max() <= COND_TOL;
    (cn1, cn2)
}

pub fn check_conditions(bc: &BetaCurve) -> Result<ConditionReport> {
    if bc.n != 2 {
        return Err(Error::DimensionMismatch("conditions (1)-(7) are stated for n = 2".into()));
    }
    let (a, b, ts) = (&bc.a, &bc.b, &bc.t_star);
    let g = const_f64(&bc.g);
    let z = const_f64(&bc.z);
    let at = |k: usize, t: &BigRational| bc.beta.deriv_at_f64(k, t);
    let close = |m: &DMatrix<f64>, w: &DMatrix<f64>| (m - w).abs().max() <= COND_TOL;

    let c1 = close(&at(0, a), &DMatrix::zeros(2, 2));
    let c2 = close(&at(1, a), &g) && close(&at(2, a), &(2.0 * &g * &z));
    let det = bc.det();
    let c3 = det.order_at(a).is_some_and(|o| o > 0)
        && det.order_at(ts).is_some_and(|o| o > 0)
        && det.count_roots_open(a, ts) == 0
        && det.count_roots(ts, b) == 0;
    let b0 = at(0, ts);
    let (x, zz, y) = (b0[(0, 0)], b0[(0, 1)], b0[(1, 1)]);
    let c4 = x == 0.0 && zz == 0.0 && y != 0.0;
    let b1 = at(1, ts);
    let b2 = at(2, ts);
    let c5 = b1[(0, 0)].abs() <= COND_TOL
        && (b1[(0, 1)] - (1.0 + y)).abs() <= COND_TOL
        && (b2[(0, 0)] - (2.0 + 2.0 * y)).abs() <= COND_TOL;
    let ord_t = det.order_at(ts).unwrap_or(0);
    let c6 = ord_t == 3 && det.deriv_at(3, ts) > BigRational::zero();
    let c7 = match recover_r_exact(bc) {
        Ok(r) => !r.den.eval(ts).is_zero(),
        Err(Error::SingularLimit(_)) => false,
        Err(e) => return Err(e),
    };
    let (cn1_a, cn2_a) = cn_checks(bc, a);
    let (cn1_t_star, cn2_t_star) = cn_checks(bc, ts);
    let mut det_orders = vec![];
    for r in [a, ts] {
        if let Some(o) = det.order_at(r).filter(|&o| o > 0) {
            det_orders.push((r.to_f64().unwrap_or(f64::NAN), o));
        }
    }
    Ok(ConditionReport { c1, c2, c3, c4, c5, c6, c7, cn1_a, cn2_a, cn1_t_star, cn2_t_star, det_orders })
}

/// The assembled counterexample quadruple (g = [[0,1],[1,0]], P = {0}) on
/// [−1, b], integrated in double-double precision.
pub fn counterexample_quadruple() -> Result<(Quadruple, BetaCurve)> {
    let bc = counterexample_beta()?;
    let r = recover_r_exact(&bc)?.to_operator()?;
    let q = Quadruple::new(
        SymBilinear::new(const_f64(&bc.g)),
        r,
        DMatrix::zeros(2, 0),
        SymBilinear::zeros(0),
        (bc.a_f64(), bc.b_f64()),
    )?
    .with_precision(Precision::DoubleDouble);
    Ok((q, bc))
}

/// The loop ℓ(t) = span{(cos πt·e₁, sin πt·e₁), (e_j, 0) : j ≥ 2} of Lagrangians
/// (g = Id) and its chart L₁ = span{(−e_j, e_j)}.
pub struct GeneratorLoop {
    pub n: usize,
}

impl GeneratorLoop {
    pub fn frame(&self, t: f64) -> DMatrix<f64> {
        let n = self.n;
        let mut f = DMatrix::zeros(2 * n, n);
        let th = std::f64::consts::PI * t;
        f[(0, 0)] = th.cos();
        f[(n, 0)] = th.sin();
        for j in 1..n {
            f[(j, j)] = 1.0;
        }
        f
    }

    pub fn chart_l1(&self) -> LagrangianFrame {
        let n = self.n;
        let mut f = DMatrix::zeros(2 * n, n);
        for j in 0..n {
            f[(j, j)] = -1.0;
            f[(n + j, j)] = 1.0;
        }
        LagrangianFrame::new(f)
    }

    /// f(t) = cos πt / (cos πt + sin πt)
    pub fn f(t: f64) -> f64 {
        let th = std::f64::consts::PI * t;
        th.cos() / (th.cos() + th.sin())
    }

    /// μ over [t0, t1] (either orientation) by chart segmentation.
    pub fn maslov(&self, t0: f64, t1: f64, samples: usize, seed: u64) -> Result<i64> {
        let omega = make_symplectic(&SymBilinear::identity(self.n))?;
        let l0 = LagrangianFrame::vertical(self.n);
        let times: Vec<f64> = (0..=samples).map(|i| t0 + (t1 - t0) * i as f64 / samples as f64).collect();
        let curve = |t: f64| self.frame(t);
        Ok(maslov_of_curve(&curve, &l0, &omega, &times, seed, crate::symplectic::TOL_INERTIA)?.mu)
    }
}

pub fn generator_loop(n: usize) -> Result<GeneratorLoop> {
    if n == 0 {
        return Err(Error::InvalidArgument("generator loop needs n ≥ 1".into()));
    }
    Ok(GeneratorLoop { n })
}

/// The unperturbed evaporation problem: g = diag(1,−1), R ≡ −Id, P = ℝ²,
/// S = −cot(1)·g on [1, 3.5]; J(t) = sin t / sin 1 · Id vanishes at t = π.
pub fn evaporation_quadruple() -> Result<Quadruple> {
    let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let cot1 = 1.0 / 1f64.tan();
    Quadruple::new(
        SymBilinear::new(g.clone()),
        TimeDependentOperator::constant(-DMatrix::identity(2, 2)),
        DMatrix::identity(2, 2),
        SymBilinear::new(-cot1 * g),
        (1.0, 3.5),
    )
}

/// β of the unperturbed problem in the chart L₁ = graph(Id): β = g·s(t) with
/// s = (tan(t + π/4) − 1)/2, s′ = 1 + 2s + 2s².
fn evaporation_s(t: f64) -> (f64, f64) {
    let u = (t + std::f64::consts::FRAC_PI_4).tan();
    let s = 0.5 * (u - 1.0);
    (s, 1.0 + 2.0 * s + 2.0 * s * s)
}

/// Perturbed problem: β_δ = g·s(t) + δ·[[0,1],[1,0]], off the cone det β = 0;
/// R is recovered pointwise and stored as samples.
pub fn evaporation_perturbed(delta: f64, samples: usize) -> Result<Quadruple> {
    let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let h = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let zm = DMatrix::<f64>::identity(2, 2);
    let (a, b) = (1.0, 3.5);
    let beta = |t: f64| {
        let (s, ds) = evaporation_s(t);
        (&g * s + &h * delta, &g * ds)
    };
    let mut grid = Vec::with_capacity(samples + 1);
    let mut values = Vec::with_capacity(samples + 1);
    for i in 0..=samples {
        let t = a + (b - a) * i as f64 / samples as f64;
        let (bt, dbt) = beta(t);
        let binv = bt.clone().try_inverse().ok_or(Error::SingularLimit(t))?;
        let qf = &g - &dbt + &bt * &zm + zm.transpose() * &bt;
        grid.push(t);
        values.push(&binv * qf * &binv * &g + &zm * &zm);
    }
    let (b0, _) = beta(a);
    let b0inv = b0.try_inverse().ok_or(Error::SingularLimit(a))?;
    // ℓ₀ = {(x, −S_op x)} has chart value β(a) when S = −(g β(a)⁻¹ g + gZ)
    let s = -(&g * b0inv * &g + &g * &zm);
    Quadruple::new(
        SymBilinear::new(g),
        TimeDependentOperator::sampled(grid, values)?,
        DMatrix::identity(2, 2),
        SymBilinear::new(crate::linalg::symmetrize(&s)),
        (a, b),
    )
}

#[derive(Clone, Debug)]
pub struct EvaporationReport {
    pub delta: f64,
    pub before: Vec<FocalRecord>,
    pub after: Vec<FocalRecord>,
    pub mu_before: i64,
    pub mu_after: i64,
    /// a signature-zero focal instant exists near π before the shift
    pub present_before: bool,
    /// no focal instant near π after the shift
    pub absent_after: bool,
}

pub fn evaporation_demo(delta: f64) -> Result<EvaporationReport> {
    let opts = MaslovOptions::default();
    let fopts = FocalOptions::default();
    let q0 = evaporation_quadruple()?;
    let p0 = integrate_fundamental(&q0, 1024)?;
    let before = focal_instants_with(&q0, &p0, &fopts)?;
    let mu_before = maslov_index_with(&q0, &p0, &opts)?.mu;
    let q1 = evaporation_perturbed(delta, 4000)?;
    let p1 = integrate_fundamental(&q1, 1024)?;
    let after = focal_instants_with(&q1, &p1, &fopts)?;
    let mu_after = maslov_index_with(&q1, &p1, &opts)?.mu;
    let pi = std::f64::consts::PI;
    let near = |r: &FocalRecord| (r.t - pi).abs() < 0.25;
    let present_before = before.iter().any(|r| near(r) && r.signature == 0 && r.multiplicity > 0);
    let absent_after = !after.iter().any(near);
    Ok(EvaporationReport { delta, before, after, mu_before, mu_after, present_before, absent_after })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maslov::beta_in_graph_chart;

    #[test]
    fn hermite_join_matches_jets() {
        let local = QPoly::from_ints(&[1, 2, 3]);
        let a = q(-1);
        let jets = vec![q(5), q(-1), q(4)];
        let p = hermite_join(&local, 4, &a, &jets);
        for k in 0..=4 {
            assert_eq!(p.deriv_at(k, &q(0)), local.deriv_at(k, &q(0)));
        }
        for k in 0..3 {
            assert_eq!(p.deriv_at(k, &a), jets[k]);
        }
    }

    #[test]
    fn counterexample_curve_and_conditions() {
        let bc = counterexample_beta().unwrap();
        let b0 = bc.beta.deriv_at_f64(0, &q(0));
        assert_eq!(b0, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]));
        assert_eq!(bc.beta.deriv_at_f64(1, &q(-1)), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert_eq!(bc.beta.deriv_at_f64(2, &q(-1)), DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
        assert_eq!(bc.det().deriv_at(3, &q(0)), q(12));
        assert_eq!(bc.beta.get(0, 0).deriv_at(3, &q(0)), q(-12));
        let rep = check_conditions(&bc).unwrap();
        assert!(rep.all(), "{rep:?}");
        assert!(rep.cn1_a && rep.cn2_a && rep.cn1_t_star && rep.cn2_t_star);
        assert_eq!(rep.det_orders, vec![(-1.0, 2), (0.0, 3)]);
    }

    #[test]
    fn recovered_r_is_g_symmetric_and_finite() {
        let bc = counterexample_beta().unwrap();
        let rec = recover_r_exact(&bc).unwrap();
        let g = const_f64(&bc.g);
        for &t in &[-1.0, -0.7, -0.3, 0.0, 0.05, bc.b_f64()] {
            let r = rec.eval(t);
            assert!(r.iter().all(|v| v.is_finite()));
            let gr = &g * &r;
            assert!((&gr - gr.transpose()).abs().max() <= 1e-9 * (1.0 + gr.abs().max()), "t = {t}");
        }
    }

    #[test]
    fn near_a_series_oracle() {
        // β = g(t−a) + gZ(t−a)² exactly: R(a) finite and g-symmetric
        let g = PolyMat::from_ints(2, &[0, 1, 1, 0]);
        let z = PolyMat::from_ints(2, &[0, 0, 1, 0]);
        let a = q(0);
        let lin = QPoly::from_ints(&[0, 1]);
        let sq = QPoly::from_ints(&[0, 0, 1]);
        let gz = g.mul(&z);
        let beta = g.map(|p| p * &lin).add(&gz.map(|p| p * &sq));
        let bc = BetaCurve { n: 2, a: a.clone(), b: qr(1, 10), t_star: a, beta, g: g.clone(), z, bump: None };
        let r = recover_r_exact(&bc).unwrap().eval(0.0);
        let gr = const_f64(&g) * &r;
        assert!(r.iter().all(|v| v.is_finite()));
        assert!((&gr - gr.transpose()).abs().max() < 1e-12);
    }

    #[test]
    fn zeroing_z_breaks_the_boundary_data_and_condition_7() {
        let mut bc = counterexample_beta().unwrap();
        bc.beta.set(0, 1, QPoly::zero());
        bc.beta.set(1, 0, QPoly::zero());
        let rep = check_conditions(&bc).unwrap();
        assert!(!rep.c2 && !rep.cn1_a);
        assert!(rep.cn1_t_star);
        assert!(!rep.c7);
    }

    #[test]
    fn counterexample_quadruple_reproduces_beta() {
        let (q, bc) = counterexample_quadruple().unwrap();
        let path = integrate_fundamental(&q, 512).unwrap();
        let z = const_f64(&bc.z);
        for &t in &[-0.8, -0.4, -0.1, 0.05] {
            let b = beta_in_graph_chart(&path, &z, t).unwrap();
            let want = bc.eval(t);
            assert!((&b - &want).abs().max() < 1e-8 * (1.0 + want.abs().max()), "t={t}: {b} vs {want}");
        }
    }

    #[test]
    fn generator_loop_chart_values() {
        for n in 1..=3 {
            let lp = generator_loop(n).unwrap();
            let omega = make_symplectic(&SymBilinear::identity(n)).unwrap();
            let chart = crate::symplectic::Chart::new(&LagrangianFrame::vertical(n), &lp.chart_l1(), &omega).unwrap();
            let b0 = chart.beta(&lp.frame(0.0)).unwrap().beta;
            assert!((b0.matrix() - DMatrix::identity(n, n)).abs().max() < 1e-12);
            let t = 0.3;
            let bt = chart.beta(&lp.frame(t)).unwrap().beta;
            assert!((bt.matrix()[(0, 0)] - GeneratorLoop::f(t)).abs() < 1e-12);
            let b7 = chart.beta(&lp.frame(0.7)).unwrap().beta;
            assert_eq!(crate::maslov::n_plus(&b7, 1e-9), n - 1);
            assert_eq!(lp.maslov(0.0, 0.7, 256, 0).unwrap(), -1);
            assert_eq!(lp.maslov(0.7, 0.0, 256, 0).unwrap(), 1);
        }
    }

    #[test]
    fn evaporation_before_and_after() {
        let rep = evaporation_demo(1e-3).unwrap();
        assert!(rep.present_before, "{:?}", rep.before);
        let r = rep.before.iter().find(|r| (r.t - std::f64::consts::PI).abs() < 1e-8).unwrap();
        assert_eq!((r.multiplicity, r.signature), (2, 0));
        assert!(rep.absent_after, "{:?}", rep.after);
        assert_eq!(rep.mu_before, rep.mu_after);
    }
}
