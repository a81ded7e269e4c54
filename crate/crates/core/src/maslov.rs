//! Maslov index of ℓ(t) = Ψ(t)[ℓ₀] relative to L₀ = {0}⊕ℝⁿ by greedy chart
//! segmentation: μ = Σ_segments n₊(β(t_end)) − n₊(β(t_start)).

use crate::error::{Error, Result};
use crate::focal::{focal_instants_with, FocalOptions, FocalRecord};
use crate::integrate::FundamentalPath;
use crate::linalg::{det_generic, orth, singular_values};
use crate::quadruple::Quadruple;
use crate::symplectic::{
    common_complement, inertia_scaled, transversality_margin, Chart, LagrangianFrame, SymBilinear, SymplecticForm,
    TOL_INERTIA,
};
use nalgebra::DMatrix;

/// A segment stays in its chart while the margin to L1 exceeds this.
pub const SEGMENT_MARGIN: f64 = 0.02;
/// Preferred distance from Λ_{≥1}(L₀) at cut points.
const CUT_DISTANCE: f64 = 1e-4;
/// Hard floor for segment endpoints.
const ENDPOINT_FLOOR: f64 = 1e-10;
const MAX_REFINE: usize = 40;
/// Largest principal-angle sine allowed between consecutive samples, so that
/// the transversality margin cannot dip to zero unseen between them.
pub const MAX_GAP: f64 = 5e-3;
const MAX_GAP_DEPTH: usize = 48;

/// sin of the largest principal angle between the spans of orthonormal frames.
pub fn subspace_gap(u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let s = singular_values(&(u.transpose() * v)).last().cloned().unwrap_or(0.0).min(1.0);
    (1.0 - s * s).max(0.0).sqrt()
}

#[derive(Debug, Clone)]
pub struct ChartSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub chart: Chart,
    pub n_plus_start: usize,
    pub n_plus_end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub det_a: f64,
    pub n_plus: usize,
    pub segment_id: usize,
}

#[derive(Debug, Clone)]
pub struct MaslovResult {
    pub mu: i64,
    pub segments: Vec<ChartSegment>,
    pub epsilon_start: f64,
    pub bound: usize,
    pub signature_sum: Option<i64>,
    pub agreement_flag: bool,
    pub records: Vec<FocalRecord>,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, Copy)]
pub struct MaslovOptions {
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub focal: FocalOptions,
}

impl Default for MaslovOptions {
    fn default() -> Self {
        MaslovOptions { samples: 2048, seed: 0, tol: TOL_INERTIA, focal: FocalOptions::default() }
    }
}

/// Distance of the Lagrangian spanned by `frame` from Λ_{≥1}(L₀).
pub fn distance_to_l0(frame: &DMatrix<f64>, l0: &DMatrix<f64>) -> f64 {
    transversality_margin(frame, l0)
}

pub fn n_plus(beta: &SymBilinear, tol: f64) -> usize {
    inertia_scaled(beta, tol).n_plus
}

/// Segmented Maslov index of an arbitrary curve of Lagrangian frames.
pub struct CurveMaslov {
    pub mu: i64,
    pub segments: Vec<ChartSegment>,
    /// (t, n₊ in current chart, segment id) per accepted sample
    pub samples: Vec<(f64, usize, usize)>,
}

pub fn maslov_of_curve(
    curve: &dyn Fn(f64) -> DMatrix<f64>,
    l0: &LagrangianFrame,
    omega: &SymplecticForm,
    times: &[f64],
    seed: u64,
    tol: f64,
) -> Result<CurveMaslov> {
    assert!(times.len() >= 2);
    let eval = |t: f64| orth(&curve(t), 1e-14);
    let mut ts: Vec<f64> = vec![times[0]];
    let mut frames: Vec<Option<DMatrix<f64>>> = vec![Some(eval(times[0]))];
    for &t1 in &times[1..] {
        // bisect until consecutive samples are MAX_GAP-close
        let mut stack = vec![(t1, eval(t1), 0usize)];
        while let Some((t, f, depth)) = stack.pop() {
            let (t0, f0) = (*ts.last().unwrap(), frames.last().unwrap().clone().unwrap());
            let mid = 0.5 * (t0 + t);
            if depth < MAX_GAP_DEPTH && mid > t0 && mid < t && subspace_gap(&f0, &f) > MAX_GAP {
                stack.push((t, f, depth + 1));
                stack.push((mid, eval(mid), depth + 1));
            } else {
                ts.push(t);
                frames.push(Some(f));
            }
        }
    }
    let frame_at = |k: usize, ts: &Vec<f64>, frames: &mut Vec<Option<DMatrix<f64>>>| -> DMatrix<f64> {
        if frames[k].is_none() {
            frames[k] = Some(eval(ts[k]));
        }
        frames[k].clone().unwrap()
    };
    let last = ts.len() - 1;
    for k in [0, last] {
        let f = frame_at(k, &ts, &mut frames);
        if distance_to_l0(&f, &l0.columns) < ENDPOINT_FLOOR {
            return Err(Error::FinalInstantFocal(ts[k]));
        }
    }
    let mut segments = Vec::new();
    let mut samples = Vec::new();
    let mut i = 0usize;
    let mut seg_seed = seed;
    let mut refinements = 0usize;
    loop {
        let fs = frame_at(i, &ts, &mut frames);
        let l1 = common_complement(l0, &LagrangianFrame::new(fs.clone()), omega, seg_seed)?;
        seg_seed = seg_seed.wrapping_add(0x9E37_79B9);
        let chart = Chart::new(l0, &l1, omega)?;
        let np_start = n_plus(&chart.beta(&fs)?.beta, tol);
        let seg_id = segments.len();
        let mut seg_samples = vec![(ts[i], np_start, seg_id)];
        let mut j = i;
        let mut last_np = np_start;
        while j < ts.len() - 1 {
            let f = frame_at(j + 1, &ts, &mut frames);
            if chart.margin_to(&f) <= SEGMENT_MARGIN {
                break;
            }
            j += 1;
            last_np = n_plus(&chart.beta(&f)?.beta, tol);
            seg_samples.push((ts[j], last_np, seg_id));
        }
        if j == ts.len() - 1 {
            samples.extend(seg_samples);
            segments.push(ChartSegment { t_start: ts[i], t_end: ts[j], chart, n_plus_start: np_start, n_plus_end: last_np });
            break;
        }
        // choose the cut: latest sample comfortably away from L₀, else the farthest
        let mut cut = None;
        let mut best = (0.0, i);
        for k in (i + 1..=j).rev() {
            let f = frame_at(k, &ts, &mut frames);
            let d = distance_to_l0(&f, &l0.columns);
            if d >= CUT_DISTANCE {
                cut = Some(k);
                break;
            }
            if d > best.0 {
                best = (d, k);
            }
        }
        if cut.is_none() && best.0 >= ENDPOINT_FLOOR && best.1 > i {
            cut = Some(best.1);
        }
        match cut {
            Some(k) => {
                let f = frame_at(k, &ts, &mut frames);
                let np_end = n_plus(&chart.beta(&f)?.beta, tol);
                seg_samples.retain(|s| s.0 <= ts[k]);
                samples.extend(seg_samples);
                segments.push(ChartSegment { t_start: ts[i], t_end: ts[k], chart, n_plus_start: np_start, n_plus_end: np_end });
                i = k;
                refinements = 0;
            }
            None => {
                // no usable sample: refine the grid right after the segment start
                refinements += 1;
                if refinements > MAX_REFINE {
                    return Err(Error::ChartingFailed(ts[i]));
                }
                let mid = 0.5 * (ts[i] + ts[i + 1]);
                if !(mid > ts[i] && mid < ts[i + 1]) {
                    return Err(Error::ChartingFailed(ts[i]));
                }
                ts.insert(i + 1, mid);
                frames.insert(i + 1, None);
            }
        }
    }
    let mu = segments.iter().map(|s| s.n_plus_end as i64 - s.n_plus_start as i64).sum();
    Ok(CurveMaslov { mu, segments, samples })
}

/// Σ signatures when every focal record is nondegenerate.
pub fn maslov_via_signatures(_q: &Quadruple, _path: &FundamentalPath, records: &[FocalRecord]) -> Option<i64> {
    if records.iter().any(|r| r.degenerate_flag) {
        return None;
    }
    Some(records.iter().map(|r| r.signature).sum())
}

fn uniform(t0: f64, t1: f64, m: usize) -> Vec<f64> {
    (0..=m).map(|i| if i == m { t1 } else { t0 + (t1 - t0) * i as f64 / m as f64 }).collect()
}

/// μ of ℓ restricted to [t0, t1]; both ends must be non-focal.
pub fn maslov_on(path: &FundamentalPath, t0: f64, t1: f64, samples: usize, seed: u64, tol: f64) -> Result<CurveMaslov> {
    let q = &path.q;
    let omega = q.symplectic();
    let l0 = LagrangianFrame::vertical(q.n());
    let curve = |t: f64| path.frame(t);
    maslov_of_curve(&curve, &l0, &omega, &uniform(t0, t1, samples.max(2)), seed, tol)
}

pub fn maslov_index(q: &Quadruple, path: &FundamentalPath) -> Result<MaslovResult> {
    maslov_index_with(q, path, &MaslovOptions::default())
}

pub fn maslov_index_with(q: &Quadruple, path: &FundamentalPath, opts: &MaslovOptions) -> Result<MaslovResult> {
    let n = q.n();
    let fb = orth(&path.frame(q.b), 1e-14);
    let ab = fb.rows(0, n).into_owned();
    if singular_values(&ab).last().cloned().unwrap_or(0.0) <= opts.focal.tol_rank {
        return Err(Error::FinalInstantFocal(q.b));
    }
    let records = focal_instants_with(q, path, &opts.focal)?;
    let first = records.first().map(|r| r.t).unwrap_or(q.b);
    let c = 0.5 * (q.a + first);
    let cm = maslov_on(path, c, q.b, opts.samples, opts.seed, opts.tol)?;
    let bound = records.iter().filter(|r| r.t > c && r.t < q.b).map(|r| r.multiplicity).sum();
    let signature_sum = maslov_via_signatures(q, path, &records);
    let trace = cm
        .samples
        .iter()
        .map(|&(t, np, id)| {
            let a = path.frame_dd(t).rows(0, n).into_owned();
            TraceRow { t, det_a: det_generic(&a).to_f64(), n_plus: np, segment_id: id }
        })
        .collect();
    Ok(MaslovResult {
        mu: cm.mu,
        segments: cm.segments,
        epsilon_start: c - q.a,
        bound,
        agreement_flag: signature_sum == Some(cm.mu),
        signature_sum,
        records,
        trace,
    })
}

/// β' predicted by the Riccati equation in the chart L₁ = graph(Z):
/// β' = g + βZ + Zᵀβ − β(R − Z²)g⁻¹β.
pub fn riccati_rhs(beta: &DMatrix<f64>, g: &DMatrix<f64>, ginv: &DMatrix<f64>, z: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    let z2 = z * z;
    g + beta * z + z.transpose() * beta - beta * (r - z2) * ginv * beta
}

/// Classical RK4 on the Riccati equation from t0 to t1; values at every step.
pub fn integrate_riccati(
    q: &Quadruple,
    z: &DMatrix<f64>,
    beta0: &DMatrix<f64>,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Vec<(f64, DMatrix<f64>)> {
    let g = q.g.matrix().clone();
    let ginv = g.clone().try_inverse().expect("nondegenerate g");
    let f = |t: f64, b: &DMatrix<f64>| riccati_rhs(b, &g, &ginv, z, &q.r.eval(t));
    let h = (t1 - t0) / steps as f64;
    let mut out = vec![(t0, beta0.clone())];
    let mut b = beta0.clone();
    for i in 0..steps {
        let t = t0 + h * i as f64;
        let k1 = f(t, &b);
        let k2 = f(t + 0.5 * h, &(&b + &k1 * (0.5 * h)));
        let k3 = f(t + 0.5 * h, &(&b + &k2 * (0.5 * h)));
        let k4 = f(t + h, &(&b + &k3 * h));
        b = &b + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        out.push((t + h, b.clone()));
    }
    out
}

/// β of ℓ(t) in the chart (L₀, graph Z), i.e. g·A·(B − Z A)⁻¹.
pub fn beta_in_graph_chart(path: &FundamentalPath, z: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let n = path.n();
    let omega = path.q.symplectic();
    let chart = Chart::new(&LagrangianFrame::vertical(n), &LagrangianFrame::graph(z), &omega)?;
    Ok(chart.beta(&path.frame(t))?.beta.matrix().clone())
}

/// (n₊ jump, n₋ jump) of a symmetric curve across t0.
pub fn crossing_jump(beta: &dyn Fn(f64) -> DMatrix<f64>, t0: f64, eps: f64, tol: f64) -> (i64, i64) {
    let before = inertia_scaled(&SymBilinear::new(beta(t0 - eps)), tol);
    let after = inertia_scaled(&SymBilinear::new(beta(t0 + eps)), tol);
    (after.n_plus as i64 - before.n_plus as i64, after.n_minus as i64 - before.n_minus as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::integrate_fundamental;
    use crate::operator::TimeDependentOperator;

    fn harmonic(b: f64) -> Quadruple {
        Quadruple::new(
            SymBilinear::identity(1),
            TimeDependentOperator::constant(DMatrix::from_element(1, 1, -1.0)),
            DMatrix::zeros(1, 0),
            SymBilinear::zeros(0),
            (0.0, b),
        )
        .unwrap()
    }

    #[test]
    fn free_and_harmonic_indices() {
        let free = Quadruple::new(
            SymBilinear::identity(2),
            TimeDependentOperator::zero(2),
            DMatrix::zeros(2, 0),
            SymBilinear::zeros(0),
            (0.0, 3.0),
        )
        .unwrap();
        let p = integrate_fundamental(&free, 64).unwrap();
        assert_eq!(maslov_index(&free, &p).unwrap().mu, 0);

        let q = harmonic(3.5);
        let p = integrate_fundamental(&q, 256).unwrap();
        let m = maslov_index(&q, &p).unwrap();
        assert_eq!(m.mu, 1);
        assert_eq!(m.signature_sum, Some(1));
        assert!(m.agreement_flag);
        assert_eq!(m.bound, 1);
    }

    #[test]
    fn final_focal_instant_is_refused() {
        let q = harmonic(std::f64::consts::PI);
        let p = integrate_fundamental(&q, 256).unwrap();
        assert!(matches!(maslov_index(&q, &p), Err(Error::FinalInstantFocal(_))));
    }

    #[test]
    fn curve_at_pi_returns_to_l0() {
        let q = harmonic(3.5);
        let p = integrate_fundamental(&q, 256).unwrap();
        let f = p.frame(std::f64::consts::PI);
        assert!(distance_to_l0(&f, &LagrangianFrame::vertical(1).columns) < 1e-13);
    }

    #[test]
    fn lemma_crossing_family() {
        for (k_plus, k_minus) in [(0, 0), (2, 1), (1, 3)] {
            let n = k_plus + 1 + k_minus;
            let beta = |t: f64| {
                let mut d = vec![1.0; k_plus];
                d.push(t);
                d.extend(vec![-1.0; k_minus]);
                DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))
            };
            assert_eq!(beta(0.0).nrows(), n);
            assert_eq!(crossing_jump(&beta, 0.0, 1e-3, 1e-9), (1, -1));
        }
    }
}
