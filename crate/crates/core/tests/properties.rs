use corrlab::corrmat::{make_bm, Correlation};
use corrlab::factorize::{
    diagonalize_factorization, explicit_bm_factorization, noiseless_protocol, nonneg_rank_upper,
    verify_noisy_psd_factorization, NmfOptions,
};
use corrlab::io::{correlation_from_csv, correlation_to_csv};
use corrlab::quantum::{
    depolarize, depolarize_bipartite, depolarize_bipartite_sequential, generated_correlation, DensityMatrix,
    HermitianOperator,
};
use corrlab::reach::{max_weight_assignment, phat, phat_derivative, threshold_upper_bound};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn correlation(n: usize) -> impl Strategy<Value = Correlation> {
    prop::collection::vec(0.01f64..1.0, n * n).prop_map(move |raw| {
        let rows: Vec<Vec<f64>> = raw.chunks(n).map(|c| c.to_vec()).collect();
        Correlation::normalize(&rows).unwrap()
    })
}

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|w| {
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect()
    })
}

fn case(n: usize) -> impl Strategy<Value = (Correlation, Vec<f64>, Vec<f64>, f64)> {
    (correlation(n), simplex(n), simplex(n), 0.0f64..0.95)
}

fn any_case() -> impl Strategy<Value = (Correlation, Vec<f64>, Vec<f64>, f64)> {
    (2usize..=4).prop_flat_map(case)
}

fn psd(d: usize) -> impl Strategy<Value = HermitianOperator> {
    prop::collection::vec(-1.0f64..1.0, 2 * d * d).prop_map(move |raw| {
        let a = DMatrix::from_fn(d, d, |i, j| Complex64::new(raw[2 * (i * d + j)], raw[2 * (i * d + j) + 1]));
        let g = &a * a.adjoint();
        HermitianOperator::new((&g + g.adjoint()) * Complex64::new(0.5, 0.0)).unwrap()
    })
}

fn brute_force(w: &[f64], n: usize) -> f64 {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::NEG_INFINITY;
    loop {
        best = best.max((0..n).map(|x| w[x * n + perm[x]]).sum());
        // next lexicographic permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else {
            return best;
        };
        let j = (i + 1..n).rev().find(|&j| perm[j] > perm[i]).unwrap();
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn adjusted_mass_and_row_sums((p, s, t, lambda) in any_case()) {
        let n = p.n();
        let h = phat(&p, lambda, &s, &t).unwrap();
        let total: f64 = h.iter().sum();
        prop_assert!((total - (1.0 - lambda).powi(2)).abs() <= 1e-12);
        let (rows, _) = p.marginals();
        for x in 0..n {
            let row: f64 = h[x * n..(x + 1) * n].iter().sum();
            prop_assert!((row - (1.0 - lambda) * (rows[x] - lambda * s[x])).abs() <= 1e-12);
        }
    }

    #[test]
    fn derivative_matches_adjusted_form((p, s, t, lambda) in any_case()) {
        let n = p.n();
        let h = phat(&p, lambda, &s, &t).unwrap();
        let d = phat_derivative(&p, lambda, &s, &t).unwrap();
        for x in 0..n {
            for y in 0..n {
                let col: f64 = (0..n).map(|a| h[a * n + y]).sum();
                let row: f64 = (0..n).map(|b| h[x * n + b]).sum();
                let expect = -(s[x] * col + t[y] * row) / (1.0 - lambda);
                prop_assert!((d[x * n + y] - expect).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn adjusted_entries_shrink_while_feasible((p, s, t, lambda) in any_case(), step in 1e-4f64..0.05) {
        let here = phat(&p, lambda, &s, &t).unwrap();
        prop_assume!(here.iter().all(|&v| v >= 0.0) && lambda + step < 1.0);
        let d = phat_derivative(&p, lambda, &s, &t).unwrap();
        prop_assert!(d.iter().all(|&v| v <= 1e-10));
    }

    #[test]
    fn assignment_is_optimal(n in 1usize..=5, raw in prop::collection::vec(-1.0f64..1.0, 25)) {
        let w = &raw[..n * n];
        let (value, perm) = max_weight_assignment(w, n);
        prop_assert!((value - brute_force(w, n)).abs() <= 1e-12);
        let mut seen = perm.clone();
        seen.sort();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn threshold_bound_in_unit_interval(p in (2usize..=5).prop_flat_map(correlation)) {
        let b = threshold_upper_bound(&p);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&b));
    }

    #[test]
    fn diagonalize_keeps_products(cs in prop::collection::vec(psd(3), 4), ds in prop::collection::vec(psd(3), 4)) {
        let f = corrlab::factorize::PsdFactorization::new(cs, ds).unwrap();
        let total: f64 = f.products().iter().sum();
        prop_assume!(total > 1e-6);
        let cs: Vec<_> = f.cs().iter().map(|c| c.scaled(1.0 / total)).collect();
        let f = corrlab::factorize::PsdFactorization::new(cs, f.ds().to_vec()).unwrap();
        prop_assume!(f.c_sum().min_eigenvalue() > 1e-3 && f.d_sum().min_eigenvalue() > 1e-3);
        let (g, lam) = diagonalize_factorization(&f).unwrap();
        for (a, b) in f.products().iter().zip(g.products()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        prop_assert!((lam.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(g.c_sum().max_abs_diff(&HermitianOperator::from_real_diagonal(&lam)) <= 1e-9);
    }

    #[test]
    fn depolarizing_forms_agree(op in psd(4), lambda in 0.0f64..1.0) {
        let rho = DensityMatrix::bipartite(op.scaled(1.0 / op.trace()), 2).unwrap();
        let fast = depolarize_bipartite(&rho, lambda).unwrap();
        let slow = depolarize_bipartite_sequential(&rho, lambda).unwrap();
        prop_assert!(fast.operator().max_abs_diff(slow.operator()) <= 1e-12);
        let single = depolarize(rho.operator(), lambda).unwrap();
        prop_assert!((single.trace() - 1.0).abs() <= 1e-12);
        prop_assert!(single.min_eigenvalue() >= -1e-12);
    }

    #[test]
    fn noiseless_protocol_reproduces(p in (2usize..=4).prop_flat_map(correlation)) {
        let proto = noiseless_protocol(&p).unwrap();
        let out = generated_correlation(&proto).unwrap();
        prop_assert!(out.max_abs_diff(&p) <= 1e-10);
        let (rows, cols) = out.marginals();
        let (r0, c0) = p.marginals();
        for i in 0..p.n() {
            prop_assert!((rows[i] - r0[i]).abs() <= 1e-10 && (cols[i] - c0[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn noisy_check_is_monotone(m in 3usize..=8, k in 0.05f64..0.95, a in 0.0f64..0.9, b in 0.0f64..0.9) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let p = make_bm(m, k).unwrap();
        let f = explicit_bm_factorization(m, k).unwrap();
        let at_hi = verify_noisy_psd_factorization(&p, &f, hi, 1e-9).unwrap();
        let at_lo = verify_noisy_psd_factorization(&p, &f, lo, 1e-9).unwrap();
        prop_assert!(at_lo.noisy_min_eigenvalue().unwrap() >= at_hi.noisy_min_eigenvalue().unwrap() - 1e-12);
        if at_hi.passed {
            prop_assert!(at_lo.passed);
        }
    }

    #[test]
    fn csv_round_trip(p in (1usize..=5).prop_flat_map(correlation)) {
        let text = correlation_to_csv(&p, &[]);
        let (back, _) = correlation_from_csv(&text).unwrap();
        prop_assert_eq!(back, p);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn nonneg_rank_at_least_rank(p in (2usize..=4).prop_flat_map(correlation)) {
        let opts = NmfOptions { restarts: 4, iterations: 2000, ..NmfOptions::default() };
        let upper = nonneg_rank_upper(&p, p.n(), opts);
        prop_assert!(upper >= p.rank(1e-10));
        prop_assert!(upper <= p.n());
    }
}
