use maslov_sturm::cli::{parse_exact, parse_problem, problem_json, to_json_string};
use maslov_sturm::focal::FocalRecord;
use maslov_sturm::integrate::{integrate_fundamental, FundamentalPath};
use maslov_sturm::maslov::{beta_in_graph_chart, crossing_jump, integrate_riccati, maslov_index_with, maslov_on, MaslovOptions, MaslovResult};
use maslov_sturm::perturb::random_quadruple;
use maslov_sturm::quadruple::Quadruple;
use maslov_sturm::real::{Real, DD};
use maslov_sturm::symplectic::{inertia_scaled, SymBilinear, TOL_INERTIA};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn problem(seed: u64, n: usize) -> Quadruple {
    random_quadruple(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

fn analyzed(q: &Quadruple, steps: usize, seed: u64) -> Option<(FundamentalPath, MaslovResult)> {
    let path = integrate_fundamental(q, steps).ok()?;
    let m = maslov_index_with(q, &path, &MaslovOptions { seed, ..Default::default() }).ok()?;
    Some((path, m))
}

fn far_from(records: &[FocalRecord], t: f64, d: f64) -> bool {
    records.iter().all(|r| (r.t - t).abs() > d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flow_stays_symplectic(seed in any::<u64>(), n in 1usize..=4) {
        let q = problem(seed, n);
        let path = integrate_fundamental(&q, 1024).unwrap();
        prop_assert!(path.max_drift <= 1e-8, "drift {}", path.max_drift);
        prop_assert!(path.max_lagrange_residual <= 1e-8, "residual {}", path.max_lagrange_residual);
    }

    #[test]
    fn maslov_is_bounded_seed_free_and_additive(seed in any::<u64>(), n in 1usize..=3, split in 0.05f64..0.95, s2 in any::<u64>()) {
        let q = problem(seed, n);
        let Some((path, m)) = analyzed(&q, 1024, 0) else { return Ok(()) };
        let mult: usize = m.records.iter().map(|r| r.multiplicity).sum();
        prop_assert!(m.mu.unsigned_abs() as usize <= mult);
        let again = maslov_index_with(&q, &path, &MaslovOptions { seed: s2, ..Default::default() }).unwrap();
        prop_assert_eq!(again.mu, m.mu);
        let c = q.a + m.epsilon_start;
        let mid = c + split * (q.b - c);
        prop_assume!(far_from(&m.records, mid, 1e-3));
        let left = maslov_on(&path, c, mid, 1024, s2, TOL_INERTIA).unwrap().mu;
        let right = maslov_on(&path, mid, q.b, 1024, s2, TOL_INERTIA).unwrap().mu;
        prop_assert_eq!(left + right, m.mu);
    }

    #[test]
    fn focal_index_agrees_with_mu_when_nondegenerate(seed in any::<u64>(), n in 1usize..=3) {
        let q = problem(seed, n);
        let Some((_, m)) = analyzed(&q, 1024, 0) else { return Ok(()) };
        if m.records.iter().all(|r| !r.degenerate_flag) {
            prop_assert_eq!(m.signature_sum, Some(m.mu));
        }
    }

    #[test]
    fn chart_beta_solves_riccati(seed in any::<u64>(), n in 1usize..=3) {
        let q = problem(seed, n);
        let path = integrate_fundamental(&q, 1024).unwrap();
        let z = DMatrix::zeros(n, n);
        let Ok(b0) = beta_in_graph_chart(&path, &z, q.a) else { return Ok(()) };
        // stay well inside the chart: β bounded by 5
        let mut t1 = q.a;
        for i in 1..=1024 {
            let t = q.a + (q.b - q.a) * i as f64 / 1024.0;
            match beta_in_graph_chart(&path, &z, t) {
                Ok(b) if b.abs().max() < 5.0 => t1 = t,
                _ => break,
            }
        }
        prop_assume!(t1 > q.a);
        for (t, b) in integrate_riccati(&q, &z, &b0, q.a, t1, 8192) {
            let direct = beta_in_graph_chart(&path, &z, t).unwrap();
            prop_assert!((&direct - &b).abs().max() <= 1e-6, "t = {}", t);
        }
    }

    #[test]
    fn problem_files_round_trip(seed in any::<u64>(), n in 1usize..=4) {
        let q = problem(seed, n);
        prop_assert_eq!(parse_problem(&to_json_string(&problem_json(&q))).unwrap(), q);
    }

    #[test]
    fn sylvester_inertia(seed in any::<u64>(), n in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let d: Vec<f64> = (0..n).map(|_| [1.0, -1.0, 0.0][rng.random_range(0..3)]).collect();
        let b = SymBilinear::new(DMatrix::from_diagonal(&DVector::from_vec(d.clone())));
        let c = DMatrix::from_fn(n, n, |i, j| if i == j { 3.0 } else { 0.0 } + rng.random_range(-1.0..1.0));
        let i0 = inertia_scaled(&b, TOL_INERTIA);
        let i1 = inertia_scaled(&b.congruent(&c), TOL_INERTIA);
        prop_assert_eq!((i0.n_plus, i0.n_minus, i0.dgn), (i1.n_plus, i1.n_minus, i1.dgn));
        prop_assert_eq!(i0.n_plus, d.iter().filter(|&&x| x > 0.0).count());
    }

    #[test]
    fn crossing_family_jumps(kp in 0usize..4, km in 0usize..4) {
        let beta = |t: f64| {
            let mut d = vec![1.0; kp];
            d.push(t);
            d.extend(vec![-1.0; km]);
            DMatrix::from_diagonal(&DVector::from_vec(d))
        };
        prop_assert_eq!(crossing_jump(&beta, 0.0, 1e-3, 1e-9), (1, -1));
    }

    #[test]
    fn exact_strings_round_trip(p in -10_000i64..10_000, q in 1i64..10_000) {
        let r = parse_exact(&format!("{p}/{q}")).unwrap();
        let d = DD::from_rational(&r);
        let err = (d - DD::from(p as f64) / DD::from(q as f64)).to_f64().abs();
        prop_assert!(err <= 1e-30 * (p as f64 / q as f64).abs().max(1.0));
    }
}
