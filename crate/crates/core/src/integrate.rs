//! Flow of Ψ' = H(t)Ψ, H(t)(x, y) = (y, R(t)x), by an adaptive-order Taylor
//! series method (exact jets of R, so the local error is at roundoff level).

use crate::error::{Error, Result};
use crate::linalg::{add_into, gemm_acc, matmul, max_abs_generic};
use crate::operator::{LocalSeries, TimeDependentOperator};
use crate::quadruple::{Precision, Quadruple};
use crate::real::{Real, DD};
use nalgebra::DMatrix;

/// Symplecticity tolerance for the flow.
pub const TOL_SYMP: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
struct TaylorSettings {
    max_order: usize,
    tol: f64,
}

fn settings<T: Real>() -> TaylorSettings {
    if T::eps() < 1e-20 {
        TaylorSettings { max_order: 40, tol: 1e-31 }
    } else {
        TaylorSettings { max_order: 24, tol: 2e-17 }
    }
}

fn norm2<T: Real>(x: &DMatrix<T>, y: &DMatrix<T>) -> f64 {
    max_abs_generic(x).to_f().max(max_abs_generic(y).to_f())
}

fn axpy_scaled<T: Real>(acc: &mut DMatrix<T>, m: &DMatrix<T>, s: T) {
    for (a, b) in acc.iter_mut().zip(m.iter()) {
        *a = *a + s * *b;
    }
}

/// Advance the frame (X, Y) (X = positions, Y = derivatives) from t0 to t1 > t0.
pub fn advance<T: Real>(r: &TimeDependentOperator, t0: T, t1: T, x: &mut DMatrix<T>, y: &mut DMatrix<T>) {
    let set = settings::<T>();
    let mut t = t0;
    let mut guard = 0usize;
    while t < t1 {
        guard += 1;
        if guard > 10_000_000 {
            panic!("Taylor integrator made no progress at t = {:?}", t);
        }
        let mut target = t1;
        if let Some(br) = r.next_break(t.to_f()) {
            let brt = T::of(br);
            if brt < target {
                target = brt;
            }
        }
        let big_h = target - t;
        let hf = big_h.to_f();
        let series = r.local_series::<T>(t);
        let s0 = norm2(x, y).max(1e-300);
        let mut xs: Vec<DMatrix<T>> = vec![x.clone()];
        let mut ys: Vec<DMatrix<T>> = vec![y.clone()];
        let mut ws: Vec<DMatrix<T>> = Vec::new();
        let mut norms = vec![s0];
        let mut h = None;
        for k in 0..set.max_order {
            let (nr, nc) = x.shape();
            let mut w = DMatrix::from_element(nr, nc, T::zero());
            match &series {
                LocalSeries::Poly(rj) => {
                    for j in 0..=k.min(rj.len() - 1) {
                        gemm_acc(&mut w, &rj[j], &xs[k - j]);
                    }
                }
                LocalSeries::Ratio(nj, dj) => {
                    for j in 0..=k.min(nj.len() - 1) {
                        gemm_acc(&mut w, &nj[j], &xs[k - j]);
                    }
                    for j in 1..=k.min(dj.len() - 1) {
                        axpy_scaled(&mut w, &ws[k - j], -dj[j]);
                    }
                    let inv = T::one() / dj[0];
                    w = w.map(|v| v * inv);
                }
            }
            let inv_k = T::one() / T::of((k + 1) as f64);
            let xn = ys[k].map(|v| v * inv_k);
            let yn = w.map(|v| v * inv_k);
            if matches!(series, LocalSeries::Ratio(..)) {
                ws.push(w);
            }
            norms.push(norm2(&xn, &yn));
            xs.push(xn);
            ys.push(yn);
            let m = k + 1;
            if m >= 2 {
                let tail = norms[m] * hf.powi(m as i32) + norms[m - 1] * hf.powi(m as i32 - 1);
                if tail <= set.tol * s0 {
                    h = Some(big_h);
                    break;
                }
            }
        }
        let h = match h {
            Some(h) => h,
            None => {
                let kmax = set.max_order;
                let mut hbest = f64::INFINITY;
                for j in [kmax - 1, kmax] {
                    if norms[j] > 0.0 {
                        hbest = hbest.min((set.tol * s0 / norms[j]).powf(1.0 / j as f64));
                    }
                }
                let hh = (0.9 * hbest).min(hf);
                if hh >= hf {
                    big_h
                } else {
                    T::of(hh)
                }
            }
        };
        // Horner evaluation of the truncated series at h
        let mut nx = xs.last().unwrap().clone();
        let mut ny = ys.last().unwrap().clone();
        for k in (0..xs.len() - 1).rev() {
            nx = nx.map(|v| v * h);
            ny = ny.map(|v| v * h);
            add_into(&mut nx, &xs[k]);
            add_into(&mut ny, &ys[k]);
        }
        *x = nx;
        *y = ny;
        t = if h == big_h { target } else { t + h };
    }
}

/// Integrate a frame from a to b on a uniform node grid; returns (X, Y) at b.
pub fn integrate_frame<T: Real>(
    r: &TimeDependentOperator,
    a: f64,
    b: f64,
    steps: usize,
    x0: &DMatrix<f64>,
    y0: &DMatrix<f64>,
) -> (DMatrix<T>, DMatrix<T>) {
    let mut x = x0.map(T::of);
    let mut y = y0.map(T::of);
    let mut t = a;
    for i in 1..=steps {
        let tn = if i == steps { b } else { a + (b - a) * i as f64 / steps as f64 };
        advance(r, T::of(t), T::of(tn), &mut x, &mut y);
        t = tn;
    }
    (x, y)
}

/// Sampled fundamental solution Ψ(t) ∈ Sp(ℝ²ⁿ, ω) with dense output.
#[derive(Debug, Clone)]
pub struct FundamentalPath {
    pub q: Quadruple,
    pub times: Vec<f64>,
    nodes: Vec<DMatrix<DD>>,
    frames: Vec<DMatrix<DD>>,
    pub l0_basis: DMatrix<f64>,
    /// max over nodes of ‖ΨᵀΩΨ − Ω‖_max
    pub max_drift: f64,
    /// max over nodes of ‖BᵀGA − AᵀGB‖_max for the ℓ₀ solutions
    pub max_lagrange_residual: f64,
    pub max_psi_norm: f64,
}

fn omega_dd(q: &Quadruple) -> DMatrix<DD> {
    q.symplectic().omega.map(DD::from)
}

fn drift(psi: &DMatrix<DD>, om: &DMatrix<DD>) -> f64 {
    let m = matmul(&matmul(&psi.transpose(), om), psi);
    let mut worst: f64 = 0.0;
    for (u, v) in m.iter().zip(om.iter()) {
        worst = worst.max((*u - *v).to_f().abs());
    }
    worst
}

fn lagrange_residual(frame: &DMatrix<DD>, g: &DMatrix<DD>, n: usize) -> f64 {
    let a = frame.rows(0, n).into_owned();
    let b = frame.rows(n, n).into_owned();
    let m1 = matmul(&matmul(&b.transpose(), g), &a);
    let m2 = matmul(&matmul(&a.transpose(), g), &b);
    m1.iter().zip(m2.iter()).fold(0.0f64, |w, (u, v)| w.max((*u - *v).to_f().abs()))
}

fn run<T: Real>(q: &Quadruple, steps: usize) -> (Vec<DMatrix<DD>>, Vec<f64>) {
    let n = q.n();
    let mut x = DMatrix::from_element(n, 2 * n, T::zero());
    let mut y = DMatrix::from_element(n, 2 * n, T::zero());
    for i in 0..n {
        x[(i, i)] = T::one();
        y[(i, n + i)] = T::one();
    }
    let times: Vec<f64> =
        (0..=steps).map(|i| if i == steps { q.b } else { q.a + (q.b - q.a) * i as f64 / steps as f64 }).collect();
    let stack = |x: &DMatrix<T>, y: &DMatrix<T>| {
        let mut m = DMatrix::from_element(2 * n, 2 * n, DD::ZERO);
        for i in 0..n {
            for j in 0..2 * n {
                m[(i, j)] = x[(i, j)].to_dd();
                m[(n + i, j)] = y[(i, j)].to_dd();
            }
        }
        m
    };
    let mut nodes = vec![stack(&x, &y)];
    for i in 1..=steps {
        advance(&q.r, T::of(times[i - 1]), T::of(times[i]), &mut x, &mut y);
        nodes.push(stack(&x, &y));
    }
    (nodes, times)
}

pub fn integrate_fundamental(q: &Quadruple, steps: usize) -> Result<FundamentalPath> {
    if steps < 16 {
        return Err(Error::InvalidArgument(format!("steps = {steps} < 16")));
    }
    let (nodes, times) = match q.precision {
        Precision::F64 => run::<f64>(q, steps),
        Precision::DoubleDouble => run::<DD>(q, steps),
    };
    let n = q.n();
    let l0 = q.initial_lagrangian().columns;
    let l0dd = l0.map(DD::from);
    let om = omega_dd(q);
    let gdd = q.g.matrix().map(DD::from);
    let mut max_drift: f64 = 0.0;
    let mut max_lag: f64 = 0.0;
    let mut max_norm: f64 = 1.0;
    let mut frames = Vec::with_capacity(nodes.len());
    for psi in &nodes {
        max_drift = max_drift.max(drift(psi, &om));
        max_norm = max_norm.max(max_abs_generic(psi).to_f());
        let fr = matmul(psi, &l0dd);
        max_lag = max_lag.max(lagrange_residual(&fr, &gdd, n));
        frames.push(fr);
    }
    if max_drift > 100.0 * TOL_SYMP * max_norm * max_norm {
        return Err(Error::SymplecticityLost(max_drift));
    }
    Ok(FundamentalPath {
        q: q.clone(),
        times,
        nodes,
        frames,
        l0_basis: l0,
        max_drift,
        max_lagrange_residual: max_lag,
        max_psi_norm: max_norm,
    })
}

impl FundamentalPath {
    pub fn n(&self) -> usize {
        self.q.n()
    }

    pub fn a(&self) -> f64 {
        self.q.a
    }

    pub fn b(&self) -> f64 {
        self.q.b
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    fn node_before(&self, t: f64) -> usize {
        let h = (self.q.b - self.q.a) / self.steps() as f64;
        let mut i = (((t - self.q.a) / h).floor().max(0.0) as usize).min(self.steps());
        while i > 0 && self.times[i] > t {
            i -= 1;
        }
        while i < self.steps() && self.times[i + 1] <= t {
            i += 1;
        }
        i
    }

    fn advance_from(&self, start: &DMatrix<DD>, t0: f64, t: DD) -> DMatrix<DD> {
        let n = self.n();
        let c = start.ncols();
        let split = |m: &DMatrix<DD>| (m.rows(0, n).into_owned(), m.rows(n, n).into_owned());
        let (x, y) = split(start);
        let (x, y) = match self.q.precision {
            Precision::DoubleDouble => {
                let (mut x, mut y) = (x, y);
                advance(&self.q.r, DD::from(t0), t, &mut x, &mut y);
                (x, y)
            }
            Precision::F64 => {
                let mut xf = x.map(|v| v.to_f64());
                let mut yf = y.map(|v| v.to_f64());
                advance(&self.q.r, t0, t.to_f64(), &mut xf, &mut yf);
                (xf.map(DD::from), yf.map(DD::from))
            }
        };
        let mut out = DMatrix::from_element(2 * n, c, DD::ZERO);
        out.view_mut((0, 0), (n, c)).copy_from(&x);
        out.view_mut((n, 0), (n, c)).copy_from(&y);
        out
    }

    /// Ψ(t) in double-double storage.
    pub fn psi_dd(&self, t: f64) -> DMatrix<DD> {
        let t = t.clamp(self.q.a, self.q.b);
        let i = self.node_before(t);
        if self.times[i] == t {
            return self.nodes[i].clone();
        }
        self.advance_from(&self.nodes[i], self.times[i], DD::from(t))
    }

    pub fn psi(&self, t: f64) -> DMatrix<f64> {
        self.psi_dd(t).map(|v| v.to_f64())
    }

    /// Ψ(t)·(basis of ℓ₀), i.e. the stacked [A; B] of the (P,S)-solutions.
    pub fn frame_dd(&self, t: f64) -> DMatrix<DD> {
        let t = t.clamp(self.q.a, self.q.b);
        let i = self.node_before(t);
        if self.times[i] == t {
            return self.frames[i].clone();
        }
        self.advance_from(&self.frames[i], self.times[i], DD::from(t))
    }

    pub fn frame(&self, t: f64) -> DMatrix<f64> {
        self.frame_dd(t).map(|v| v.to_f64())
    }

    pub fn node_frame(&self, i: usize) -> &DMatrix<DD> {
        &self.frames[i]
    }

    pub fn node_psi(&self, i: usize) -> &DMatrix<DD> {
        &self.nodes[i]
    }
}

/// (A, B): positions and derivatives of the (P,S)-solutions at t.
pub fn solution_frame(path: &FundamentalPath, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let f = path.frame(t);
    let n = path.n();
    (f.rows(0, n).into_owned(), f.rows(n, n).into_owned())
}
