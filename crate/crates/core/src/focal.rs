//! Detection of (P,S)-focal instants: zeros of r(t) = det A(t) on ]a, b].

use crate::error::{Error, Result};
use crate::integrate::FundamentalPath;
use crate::linalg::{det_generic, null_space, orth, singular_values};
use crate::quadruple::Quadruple;
use crate::real::DD;
use crate::symplectic::{inertia, SymBilinear};
use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct FocalRecord {
    pub t: f64,
    pub multiplicity: usize,
    pub signature: i64,
    pub degenerate_flag: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct FocalOptions {
    /// uniform scan resolution on ]a, b]
    pub samples: usize,
    /// singular values ≤ tol_rank (relative) count as zero; also the
    /// threshold for degeneracy of g on J[t₀]^⊥
    pub tol_rank: f64,
    /// relative width at which bisection stops
    pub t_tol: f64,
}

impl Default for FocalOptions {
    fn default() -> Self {
        FocalOptions { samples: 2048, tol_rank: 1e-8, t_tol: 1e-15 }
    }
}

/// Scalar summaries of the frame at one instant.
struct Probe {
    det: DD,
    /// σ_min of the position block of an orthonormal frame (0 iff focal).
    rho: f64,
}

fn probe(path: &FundamentalPath, t: f64) -> Probe {
    let n = path.n();
    let f = path.frame_dd(t);
    let a = f.rows(0, n).into_owned();
    let det = det_generic(&a);
    let q = orth(&f.map(|v| v.to_f64()), 1e-14);
    let aq = q.rows(0, n).into_owned();
    let s = singular_values(&aq);
    Probe { det, rho: s.last().cloned().unwrap_or(0.0) }
}

fn sign(x: DD) -> i32 {
    if x.hi > 0.0 {
        1
    } else if x.hi < 0.0 {
        -1
    } else {
        0
    }
}

fn bisect(path: &FundamentalPath, mut lo: f64, mut hi: f64, slo: i32, t_tol: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= t_tol * lo.abs().max(hi.abs()).max(1e-3) {
            break;
        }
        let s = sign(probe(path, mid).det);
        if s == 0 {
            return mid;
        }
        if s == slo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn golden_min(path: &FundamentalPath, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - gr * (hi - lo);
    let mut d = lo + gr * (hi - lo);
    let mut fc = probe(path, c).rho;
    let mut fd = probe(path, d).rho;
    for _ in 0..120 {
        if (hi - lo) <= 1e-15 * lo.abs().max(hi.abs()).max(1e-3) {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - gr * (hi - lo);
            fc = probe(path, c).rho;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + gr * (hi - lo);
            fd = probe(path, d).rho;
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// A zero of order m of r is a simple zero of r^(m−1), which value noise
/// displaces far less (ε rather than ε^(1/m)). The order is read off the decay
/// of |r| towards t, and r^(m−1) from a least-squares polynomial fit on
/// [t − w, t + w], where |r| is well above the noise.
fn refine_multiple(path: &FundamentalPath, t: f64, w: f64, a: f64, b: f64) -> f64 {
    let w = w.min(t - a).min(b - t);
    if !(w > 0.0) {
        return t;
    }
    let r = |s: f64| {
        let f = path.frame_dd(t + s * w);
        let n = path.n();
        det_generic(&f.rows(0, n).into_owned()).to_f64()
    };
    let ratio = |s: f64| (r(s) / r(0.5 * s)).abs();
    let m = (0.5 * (ratio(1.0).log2() + ratio(-1.0).log2())).round();
    if !(m >= 2.0) || m > 6.0 {
        return t;
    }
    let m = m as usize;
    let deg = 8;
    let pts = 25;
    let ss: Vec<f64> = (0..pts).map(|i| -1.0 + 2.0 * i as f64 / (pts - 1) as f64).collect();
    let v = DMatrix::from_fn(pts, deg + 1, |i, k| ss[i].powi(k as i32));
    let y = nalgebra::DVector::from_iterator(pts, ss.iter().map(|&s| r(s)));
    let Ok(c) = v.svd(true, true).solve(&y, 1e-14) else { return t };
    // coefficients of the (m−1)-th derivative in s
    let d: Vec<f64> = (m - 1..=deg)
        .map(|k| c[k] * ((k + 2 - m)..=k).map(|j| j as f64).product::<f64>())
        .collect();
    let ev = |s: f64| d.iter().rev().fold(0.0, |acc, x| acc * s + x);
    let (mut lo, mut hi) = (-0.5, 0.5);
    let (flo, fhi) = (ev(lo), ev(hi));
    if flo * fhi > 0.0 {
        return t;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (ev(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    t + 0.5 * (lo + hi) * w
}

/// Zeros of det A inside a dip of ρ between two samples: sign changes on a
/// finer grid (a close pair of crossings), else the minimum of ρ if it is
/// below the rank tolerance. Near-misses are zoomed into a few times.
fn resolve_dip(path: &FundamentalPath, lo: f64, hi: f64, opts: &FocalOptions, depth: usize) -> Vec<f64> {
    const SUB: usize = 32;
    let w = (hi - lo) / SUB as f64;
    let signs: Vec<i32> = (0..=SUB).map(|j| sign(probe(path, lo + w * j as f64).det)).collect();
    let mut found = Vec::new();
    for j in 0..SUB {
        let (s0, s1) = (signs[j], signs[j + 1]);
        if s0 == 0 {
            found.push(lo + w * j as f64);
        } else if s1 != 0 && s1 != s0 {
            found.push(bisect(path, lo + w * j as f64, lo + w * (j + 1) as f64, s0, opts.t_tol));
        }
    }
    if !found.is_empty() {
        return found;
    }
    let (tm, rm) = golden_min(path, lo, hi);
    if rm <= opts.tol_rank {
        // a pair closer than the grid: det has the other sign just beside tm
        let outside = signs[0];
        for j in 0..48 {
            for side in [-1.0, 1.0] {
                let p = tm + side * w * 0.5f64.powi(j);
                if p > lo && p < hi && outside != 0 && sign(probe(path, p).det) == -outside {
                    return vec![bisect(path, lo, p, outside, opts.t_tol), bisect(path, p, hi, -outside, opts.t_tol)];
                }
            }
        }
        vec![tm]
    } else if rm <= 100.0 * opts.tol_rank && depth < 4 && w > 0.0 {
        resolve_dip(path, (tm - w).max(lo), (tm + w).min(hi), opts, depth + 1)
    } else {
        Vec::new()
    }
}

/// Multiplicity, signature and degeneracy of a focal instant at t₀.
pub fn classify(path: &FundamentalPath, t0: f64, tol_rank: f64) -> FocalRecord {
    let n = path.n();
    let f = path.frame(t0);
    let a = f.rows(0, n).into_owned();
    let b = f.rows(n, n).into_owned();
    let scale = singular_values(&f).first().cloned().unwrap_or(1.0);
    // kernel of A relative to the frame scale
    let ker = kernel_abs(&(a / scale), tol_rank);
    let mult = ker.ncols();
    if mult == 0 {
        return FocalRecord { t: t0, multiplicity: 0, signature: 0, degenerate_flag: false };
    }
    let w = orth(&(b * &ker), 1e-14);
    let g = path.q.g.matrix();
    let restr = SymBilinear::new(w.transpose() * g * &w);
    let gnorm = crate::linalg::spectral_norm(g);
    let inn = inertia(&restr, tol_rank * gnorm);
    FocalRecord { t: t0, multiplicity: mult, signature: inn.signature(), degenerate_flag: inn.dgn > 0 }
}

/// Right singular vectors with singular value ≤ tol (absolute).
pub fn kernel_abs(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let c = m.ncols();
    let r = m.nrows();
    let mut sq = DMatrix::zeros(r.max(c), c);
    sq.view_mut((0, 0), (r, c)).copy_from(m);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.unwrap();
    let keep: Vec<usize> = (0..c).filter(|&i| svd.singular_values[i] <= tol).collect();
    let mut out = DMatrix::zeros(c, keep.len());
    for (k, &i) in keep.iter().enumerate() {
        out.set_column(k, &vt.row(i).transpose());
    }
    out
}

pub fn focal_instants(q: &Quadruple, path: &FundamentalPath, tol: f64) -> Result<Vec<FocalRecord>> {
    let opts = FocalOptions { tol_rank: tol.max(1e-14), ..FocalOptions::default() };
    focal_instants_with(q, path, &opts)
}

pub fn focal_instants_with(q: &Quadruple, path: &FundamentalPath, opts: &FocalOptions) -> Result<Vec<FocalRecord>> {
    let (a, b) = (q.a, q.b);
    let m = opts.samples.max(16);
    let h = (b - a) / m as f64;
    let ts: Vec<f64> = (1..=m).map(|i| if i == m { b } else { a + h * i as f64 }).collect();
    let probes: Vec<Probe> = ts.iter().map(|&t| probe(path, t)).collect();
    let mut roots: Vec<f64> = Vec::new();
    // three consecutive flat near-zero samples mean r vanishes on an interval
    // (a high-order isolated zero is small there too, but not flat)
    for (i, w) in probes.windows(3).enumerate() {
        let (lo, hi) = w.iter().fold((f64::INFINITY, 0.0f64), |(l, u), p| (l.min(p.rho), u.max(p.rho)));
        if hi <= opts.tol_rank && hi <= 2.0 * lo {
            return Err(Error::UnresolvedCluster(ts[i + 1]));
        }
    }
    for i in 0..m {
        let si = sign(probes[i].det);
        if si == 0 {
            roots.push(ts[i]);
            continue;
        }
        if i + 1 < m {
            let sj = sign(probes[i + 1].det);
            if sj != 0 && sj != si {
                roots.push(bisect(path, ts[i], ts[i + 1], si, opts.t_tol));
            }
        }
    }
    // zeros without a sign change: local minima of ρ
    let near_known = |t: f64, roots: &[f64]| roots.iter().any(|&r| (r - t).abs() <= 2.0 * h);
    let mut extra = Vec::new();
    for i in 0..m {
        let left = if i == 0 { f64::INFINITY } else { probes[i - 1].rho };
        let right = if i + 1 == m { f64::INFINITY } else { probes[i + 1].rho };
        let here = probes[i].rho;
        if !(here < left && here <= right) || here > 1e-2 || near_known(ts[i], &roots) {
            continue;
        }
        let lo = if i == 0 { a + 0.5 * h } else { ts[i - 1] };
        let hi = if i + 1 == m { b } else { ts[i + 1] };
        if i + 1 == m && here <= opts.tol_rank {
            extra.push(b);
        } else {
            extra.extend(resolve_dip(path, lo, hi, opts, 0));
        }
    }
    roots.extend(extra);
    // keep a refined location only where A is still rank-deficient: a close
    // pair of simple zeros also looks like a double zero from afar
    let roots: Vec<f64> = roots
        .into_iter()
        .map(|t| {
            let r = refine_multiple(path, t, 4.0 * h, a, b);
            if r != t && probe(path, r).rho <= opts.tol_rank { r } else { t }
        })
        .collect();
    let mut roots = roots;
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * x.abs().max(1.0));
    let mut out = Vec::new();
    for t0 in roots {
        let rec = classify(path, t0, opts.tol_rank);
        if rec.multiplicity == 0 {
            // sign change of det with full-rank A can only be an unresolved pair
            return Err(Error::UnresolvedCluster(t0));
        }
        if log::log_enabled!(log::Level::Debug) {
            debug_cross_check(path, t0, &rec, opts.tol_rank);
        }
        out.push(rec);
    }
    Ok(out)
}

/// Compare span B·ker A with the g-orthogonal complement of range A.
fn debug_cross_check(path: &FundamentalPath, t0: f64, rec: &FocalRecord, tol: f64) {
    let n = path.n();
    let f = path.frame(t0);
    let a = f.rows(0, n).into_owned();
    let range = orth(&a, tol);
    let g = path.q.g.matrix();
    let comp = null_space(&(range.transpose() * g), 1e-10);
    log::debug!(
        "focal t={:.15} mult={} sgn={} dgn={} | dim g-orth(range A) = {}",
        t0,
        rec.multiplicity,
        rec.signature,
        rec.degenerate_flag,
        comp.ncols()
    );
}

pub fn focal_index(records: &[FocalRecord]) -> i64 {
    records.iter().map(|r| r.signature).sum()
}
