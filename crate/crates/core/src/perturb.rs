//! Random ε-perturbations of a quadruple and the stability of μ under them.

use crate::error::{Error, Result};
use crate::focal::focal_index;
use crate::integrate::integrate_fundamental;
use crate::linalg::{orth, solve_generic, symmetrize};
use crate::maslov::{maslov_index_with, MaslovOptions};
use crate::operator::TimeDependentOperator;
use crate::quadruple::Quadruple;
use crate::real::DD;
use crate::symplectic::SymBilinear;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

fn random_sym(rng: &mut ChaCha8Rng, n: usize, eps: f64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0) * eps);
    symmetrize(&m)
}

/// g + εΔ; R′ = g′⁻¹(gR + εΣ) so that g′R′ stays symmetric; P moved as the
/// graph P + P^⊥·εM over itself; S + εΣ_S. Entries of Δ, Σ, M, Σ_S are
/// uniform in [−1, 1]. Admissibility is rechecked.
pub fn perturb_quadruple(q: &Quadruple, eps: f64, rng: &mut ChaCha8Rng) -> Result<Quadruple> {
    let n = q.n();
    let k = q.k();
    let g = q.g.matrix();
    let g1 = g + random_sym(rng, n, eps);
    let g1inv = g1.clone().try_inverse().ok_or(Error::DegenerateMetric(n))?;
    let sigma = random_sym(rng, n, eps);
    // g′⁻¹g in double-double: R's coefficients can cancel heavily on evaluation
    let g1inv_g = solve_generic(&g1.map(DD::from), &g.map(DD::from)).ok_or(Error::DegenerateMetric(n))?;
    let r = q.r.left_multiply_dd(&g1inv_g).add_constant(&(&g1inv * sigma));
    let p = if k > 0 && k < n {
        let m = DMatrix::from_fn(n - k, k, |_, _| rng.random_range(-1.0..1.0) * eps);
        let moved = &q.p_basis + q.p_perp() * m;
        orth(&moved, 1e-14)
    } else {
        q.p_basis.clone()
    };
    // S is kept in coordinates of the moved basis
    let s = if k > 0 { q.s.matrix() + random_sym(rng, k, eps) } else { q.s.matrix().clone() };
    let out = Quadruple::new(SymBilinear::new(g1), r, p, SymBilinear::new(s), (q.a, q.b))?;
    Ok(out.with_precision(q.precision))
}

/// A random admissible quadruple of dimension n: g, gR's quadratic
/// coefficients, P's spanning vectors and S with entries uniform in [−2, 2],
/// on [0, b] with b uniform in [0.5, 2]. Draws with ill-conditioned g or g|P
/// are redrawn.
pub fn random_quadruple(rng: &mut ChaCha8Rng, n: usize) -> Quadruple {
    let entry = |rng: &mut ChaCha8Rng| rng.random_range(-2.0..2.0);
    loop {
        let g = symmetrize(&DMatrix::from_fn(n, n, |_, _| entry(rng)));
        let sv = g.clone().singular_values();
        if sv.min() < 0.2 {
            continue;
        }
        let ginv = g.clone().try_inverse().expect("checked");
        let coeffs = (0..3).map(|_| &ginv * symmetrize(&DMatrix::from_fn(n, n, |_, _| entry(rng)))).collect();
        let k = rng.random_range(0..=n);
        let p = DMatrix::from_fn(n, k, |_, _| entry(rng));
        if k > 0 && (p.transpose() * &g * &p).singular_values().min() < 0.2 {
            continue;
        }
        let s = symmetrize(&DMatrix::from_fn(k, k, |_, _| entry(rng)));
        let b = rng.random_range(0.5..2.0);
        let r = TimeDependentOperator::polynomial(coeffs).expect("n×n coefficients");
        if let Ok(q) = Quadruple::new(SymBilinear::new(g), r, p, SymBilinear::new(s), (0.0, b)) {
            return q;
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub mu: Option<i64>,
    pub i_foc: Option<i64>,
    pub degenerate: bool,
    /// why μ could not be computed (admissibility lost, final instant focal, …)
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationReport {
    pub epsilon: f64,
    pub seed: u64,
    pub baseline_mu: i64,
    pub baseline_i_foc: i64,
    pub trials: Vec<TrialOutcome>,
    pub admissible: usize,
    pub skipped: usize,
    pub mu_unchanged: usize,
    /// trials with i_foc = μ = baseline μ
    pub i_foc_equals_mu: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct PerturbOptions {
    pub steps: usize,
    pub tol: f64,
}

impl Default for PerturbOptions {
    fn default() -> Self {
        PerturbOptions { steps: 4096, tol: 1e-9 }
    }
}

fn analyze(q: &Quadruple, o: &PerturbOptions) -> Result<(i64, i64, bool)> {
    let path = integrate_fundamental(q, o.steps)?;
    let mut mo = MaslovOptions::default();
    mo.focal.tol_rank = o.tol.max(1e-14);
    let res = maslov_index_with(q, &path, &mo)?;
    let dgn = res.records.iter().any(|r| r.degenerate_flag);
    Ok((res.mu, focal_index(&res.records), dgn))
}

pub fn perturbation_stability(q: &Quadruple, epsilon: f64, trials: usize, seed: u64) -> Result<PerturbationReport> {
    perturbation_stability_with(q, epsilon, trials, seed, &PerturbOptions::default())
}

pub fn perturbation_stability_with(
    q: &Quadruple,
    epsilon: f64,
    trials: usize,
    seed: u64,
    o: &PerturbOptions,
) -> Result<PerturbationReport> {
    let (mu0, ifoc0, _) = analyze(q, o)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trials);
    for trial in 0..trials {
        let outcome = match perturb_quadruple(q, epsilon, &mut rng).and_then(|p| analyze(&p, o)) {
            Ok((mu, i_foc, degenerate)) => TrialOutcome { trial, mu: Some(mu), i_foc: Some(i_foc), degenerate, skipped: None },
            Err(e) => TrialOutcome { trial, mu: None, i_foc: None, degenerate: false, skipped: Some(e.to_string()) },
        };
        log::debug!("perturbation trial {trial}: {outcome:?}");
        out.push(outcome);
    }
    let admissible = out.iter().filter(|t| t.mu.is_some()).count();
    let mu_unchanged = out.iter().filter(|t| t.mu == Some(mu0)).count();
    let i_foc_equals_mu = out.iter().filter(|t| t.mu == Some(mu0) && t.i_foc == Some(mu0)).count();
    Ok(PerturbationReport {
        epsilon,
        seed,
        baseline_mu: mu0,
        baseline_i_foc: ifoc0,
        skipped: trials - admissible,
        trials: out,
        admissible,
        mu_unchanged,
        i_foc_equals_mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn random_quadruples_are_admissible() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=4 {
            let q = random_quadruple(&mut rng, n);
            assert_eq!(q.n(), n);
            assert!(q.validate().is_ok());
        }
    }

    #[test]
    fn zero_epsilon_reproduces_baseline() {
        let rep = perturbation_stability_with(&harmonic(), 0.0, 3, 7, &PerturbOptions { steps: 512, tol: 1e-9 }).unwrap();
        assert!(rep.trials.iter().all(|t| t.mu == Some(rep.baseline_mu) && t.i_foc == Some(rep.baseline_i_foc)));
    }

    #[test]
    fn harmonic_mu_is_stable() {
        let rep = perturbation_stability_with(&harmonic(), 1e-3, 10, 1, &PerturbOptions { steps: 512, tol: 1e-9 }).unwrap();
        assert_eq!(rep.baseline_mu, 1);
        assert_eq!(rep.mu_unchanged, 10);
    }

    #[test]
    fn perturbed_p_stays_in_shape_and_is_deterministic() {
        let q = Quadruple::new(
            SymBilinear::identity(3),
            TimeDependentOperator::constant(DMatrix::zeros(3, 3)),
            DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]),
            SymBilinear::new(DMatrix::from_element(1, 1, 0.5)),
            (0.0, 1.0),
        )
        .unwrap();
        let a = perturb_quadruple(&q, 1e-2, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = perturb_quadruple(&q, 1e-2, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.p_basis.shape(), (3, 1));
        assert!((a.p_basis.column(0).dot(&q.p_basis.column(0)) - 1.0).abs() < 1e-3);
    }
}
