use dropaudit::audit::{amip_audit, one_greedy};
use dropaudit::bounds::{asymptotic_lower_bound, product_normal_cdf, product_normal_quantile, truncated_product_moment};
use dropaudit::io::summarize;
use dropaudit::linalg::{downdate_inverse, factor_spd, Matrix};
use dropaudit::regression::{fit_ols, loo_effects, ols_coefficients};
use dropaudit::{AuditQuery, Dataset, Loss, NoiseDist, Target};
use proptest::prelude::*;

fn design(p: usize, extra: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0..3.0f64, p), p + extra)
}

fn dataset(max_p: usize) -> impl Strategy<Value = Dataset<f64>> {
    (1..=max_p, 4usize..12)
        .prop_flat_map(|(p, extra)| (design(p, extra), prop::collection::vec(-5.0..5.0f64, p + extra)))
        .prop_filter_map("well conditioned", |(rows, y)| {
            let d = Dataset::from_rows(&rows, y).ok()?;
            let g = d.design().gram(&d.all_rows(), None);
            let f = factor_spd(&g).ok()?;
            (f.log_condition() < 8.0).then_some(d)
        })
}

fn max_rel(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    a.max_abs_diff(b) / b.max_abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn downdates_commute(d in dataset(4)) {
        let g = d.design().gram(&d.all_rows(), None);
        let inv = factor_spd(&g).unwrap().inverse();
        let (a, b) = (d.row(0), d.row(1));
        let ab = downdate_inverse(&inv, a, 1e-10).and_then(|m| downdate_inverse(&m, b, 1e-10));
        let ba = downdate_inverse(&inv, b, 1e-10).and_then(|m| downdate_inverse(&m, a, 1e-10));
        if let (Ok(ab), Ok(ba)) = (ab, ba) {
            // conditioning of the reduced gram sets the attainable accuracy
            let rows: Vec<usize> = (2..d.n()).collect();
            if let Ok(f) = factor_spd(&d.design().gram(&rows, None)) {
                let tol = 1e-11 * f.log_condition().max(0.0).exp().powi(2);
                prop_assert!(max_rel(&ab, &ba) <= tol);
                prop_assert!(max_rel(&ab, &f.inverse()) <= tol);
            }
        }
    }

    #[test]
    fn ols_ignores_row_order(d in dataset(4), shift in 0usize..50) {
        let n = d.n();
        let rows: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let a = ols_coefficients(&d, &d.all_rows()).unwrap();
        let b = ols_coefficients(&d, &rows).unwrap();
        let scale = a.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn loo_effects_are_refits(d in dataset(3)) {
        let fit = fit_ols(&d, &d.all_rows()).unwrap();
        let v = vec![1.0; d.p()];
        let effects = loo_effects(&fit, &d, &v).unwrap();
        let base: f64 = fit.project(&v);
        for (i, e) in effects.iter().enumerate() {
            let rows: Vec<usize> = (0..d.n()).filter(|&r| r != i).collect();
            if let Ok(b) = ols_coefficients(&d, &rows) {
                let fresh = base - b.iter().sum::<f64>();
                prop_assert!((e - fresh).abs() <= 1e-7 * (1.0 + fresh.abs()));
            }
        }
    }

    #[test]
    fn greedy_paths_are_monotone_prefixes(d in dataset(2), k in 1usize..4) {
        let q = AuditQuery::coordinate(0, d.p(), k, Target::MaximizeDelta, Loss::Squared);
        let long = one_greedy(&d, &q).unwrap();
        let short = one_greedy(&d, &AuditQuery { k_max: 1, ..q.clone() }).unwrap();
        prop_assert_eq!(&long.removed[..1], &short.removed[..]);
        prop_assert!(long.removed.len() == k);
        let amip = amip_audit(&d, &q).unwrap();
        prop_assert_eq!(amip.delta_path.len(), k);
    }

    #[test]
    fn summary_ignores_row_order(y in prop::collection::vec(-100.0..100.0f64, 3..40), shift in 0usize..40) {
        let n = y.len();
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![1.0]).collect();
        let a = summarize(&Dataset::from_rows(&rows, y.clone()).unwrap(), Some(&[0])).unwrap();
        let perm: Vec<f64> = (0..n).map(|i| y[(i + shift) % n]).collect();
        let first = (n - shift % n) % n;
        let b = summarize(&Dataset::from_rows(&rows, perm).unwrap(), Some(&[first])).unwrap();
        prop_assert!((a.mu_y - b.mu_y).abs() <= 1e-9 * (1.0 + a.mu_y.abs()));
        prop_assert!((a.sigma_y - b.sigma_y).abs() <= 1e-9 * (1.0 + a.sigma_y));
        prop_assert_eq!(a.count_gt5sigma, b.count_gt5sigma);
        prop_assert_eq!(a.removed_mean_y, b.removed_mean_y);
    }

    #[test]
    fn product_cdf_is_monotone(a in -8.0..8.0f64, b in -8.0..8.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for noise in [NoiseDist::Gaussian, NoiseDist::Rademacher, NoiseDist::Uniform] {
            let (fl, fh) = (product_normal_cdf(lo, &noise).unwrap(), product_normal_cdf(hi, &noise).unwrap());
            prop_assert!(fl <= fh + 1e-12);
            prop_assert!((0.0..=1.0).contains(&fl));
        }
    }

    #[test]
    fn quantile_inverts_cdf(u in 0.001..0.999f64) {
        let q = product_normal_quantile(u, &NoiseDist::Gaussian).unwrap();
        prop_assert!((product_normal_cdf(q, &NoiseDist::Gaussian).unwrap() - u).abs() <= 1e-6);
    }

    #[test]
    fn tail_moment_is_monotone_in_alpha(a in 0.005..0.5f64, b in 0.005..0.5f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let g = NoiseDist::Gaussian;
        prop_assert!(truncated_product_moment(lo, &g).unwrap() <= truncated_product_moment(hi, &g).unwrap() + 1e-9);
    }

    #[test]
    fn asymptotic_bound_scales_linearly(alpha in 0.005..0.45f64, s in 0.01..100.0f64) {
        let g = NoiseDist::Gaussian;
        let one = asymptotic_lower_bound(alpha, 1.0, &g).unwrap().value;
        let scaled = asymptotic_lower_bound(alpha, s, &g).unwrap().value;
        prop_assert!((scaled - s * one).abs() <= 1e-9 * s * one.max(1e-12));
    }
}

#[test]
fn single_precision_audit_tracks_double() {
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![1.0, ((i * 7) % 11) as f64 / 5.0 - 1.0]).collect();
    let y: Vec<f64> = (0..40).map(|i| 0.3 + 0.8 * rows[i][1] + (((i * 13) % 17) as f64 / 8.0 - 1.0)).collect();
    let d64 = Dataset::from_rows(&rows, y.clone()).unwrap();
    let rows32: Vec<Vec<f32>> = rows.iter().map(|r| r.iter().map(|&x| x as f32).collect()).collect();
    let d32 = Dataset::from_rows(&rows32, y.iter().map(|&x| x as f32).collect()).unwrap();
    let q64 = AuditQuery::coordinate(1, 2, 5, Target::MaximizeDelta, Loss::Squared);
    let q32 = AuditQuery::<f32>::coordinate(1, 2, 5, Target::MaximizeDelta, Loss::Squared);
    let a = one_greedy(&d64, &q64).unwrap();
    let b = one_greedy(&d32, &q32).unwrap();
    assert_eq!(a.removed, b.removed);
    assert!((a.achieved_delta - b.achieved_delta as f64).abs() < 1e-4);
}
