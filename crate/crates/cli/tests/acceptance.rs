//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test -p dropaudit-cli --test acceptance`.
//!
//! The real-data check needs user-supplied data and reports SKIP without it:
//! set `DROPAUDIT_CASH_DATA`/`DROPAUDIT_CASH_SCHEMA` and/or
//! `DROPAUDIT_NIGHTLIGHTS_DATA`/`DROPAUDIT_NIGHTLIGHTS_SCHEMA`.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use dropaudit::audit::{adversarial_subset, amip_audit, brute_force_delta, one_greedy, AuditQuery, Target};
use dropaudit::bounds::{
    asymptotic_lower_bound, finite_sample_lower_bound, product_normal_cdf, product_normal_quantile,
    truncated_product_moment, BoundParams, Guarantee, ModelSpec, NoiseDist, Region,
};
use dropaudit::io::{expand_fixed_effects, load_dataset, summarize, TableSchema};
use dropaudit::linalg::{downdate_inverse, factor_spd, Matrix};
use dropaudit::regression::{fit_ols, ols_coefficients, Loss};
use dropaudit::simulate::{gen_model2, run_figure1, run_regime_grid, GridConfig, SimMethod, SimulationConfig};
use dropaudit::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn single_thread<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("pool")
        .install(f)
}

fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / b.abs().max(scale).max(f64::MIN_POSITIVE)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Brute force dominates both heuristics and every recorded delta is a true refit.
fn exactness() -> Outcome {
    let mut worst_rel = 0.0f64;
    let mut dominated = 0;
    let instances = 200;
    for seed in 0..instances as u64 {
        let n = 6 + (seed % 7) as usize;
        let p = 1 + (seed % 2) as usize;
        let k = 1 + (seed % 3) as usize;
        let spec = ModelSpec {
            beta: [1.0, -0.5][..p].to_vec(),
            ..ModelSpec::isotropic(p)
        };
        let data = gen_model2(&spec, n, 1000 + seed).expect("generate").data;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        let q = AuditQuery::new(v.clone(), k, Target::MaximizeDelta, Loss::Squared);
        let brute = brute_force_delta(&data, &q).expect("brute force");
        let greedy = one_greedy(&data, &q).expect("greedy");
        let amip = amip_audit(&data, &q).expect("amip");
        let full = ols_coefficients(&data, &data.all_rows()).expect("fit");
        let scale = (dot(&v, &v) * dot(&full, &full)).sqrt();
        // equality up to rounding when a heuristic finds the optimum
        let slack = 1e-9 * brute.achieved_delta.abs().max(scale);
        if brute.achieved_delta + slack >= greedy.achieved_delta && brute.achieved_delta + slack >= amip.achieved_delta {
            dominated += 1;
        }
        for trace in [&brute, &greedy, &amip] {
            for (j, &delta) in trace.delta_path.iter().enumerate() {
                let removed = &trace.removed[..=j];
                let rows: Vec<usize> = (0..n).filter(|i| !removed.contains(i)).collect();
                let refit = ols_coefficients(&data, &rows).expect("refit");
                let fresh = dot(&v, &full) - dot(&v, &refit);
                worst_rel = worst_rel.max(rel_err(delta, fresh, scale));
            }
        }
    }
    check(
        dominated == instances && worst_rel <= 1e-9,
        format!("brute force dominates in {dominated}/{instances}; worst refit rel err {worst_rel:.2e}"),
    )
}

fn random_spd(rng: &mut ChaCha8Rng, p: usize, extra: usize) -> (Matrix<f64>, Vec<Vec<f64>>) {
    let rows: Vec<Vec<f64>> = (0..p + extra)
        .map(|_| (0..p).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let all: Vec<usize> = (0..rows.len()).collect();
    (x.gram(&all, None), rows)
}

fn max_rel(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    a.max_abs_diff(b) / b.max_abs()
}

/// Sherman–Morrison downdates against fresh inversion, and order invariance.
fn downdates() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst, mut worst_order) = (0.0f64, 0.0f64);
    for trial in 0..1000 {
        let p = 1 + trial % 6;
        let (g, rows) = random_spd(&mut rng, p, 4 + trial % 5);
        let inv = factor_spd(&g).unwrap().inverse();
        let x = &rows[rng.random_range(0..rows.len())];
        let down = downdate_inverse(&inv, x, 1e-10).unwrap();
        let reduced = Matrix::from_fn(p, p, |a, b| g[(a, b)] - x[a] * x[b]);
        worst = worst.max(max_rel(&down, &factor_spd(&reduced).unwrap().inverse()));
        // remove two rows in both orders
        let (a, b) = (&rows[0], &rows[1]);
        let ab = downdate_inverse(&downdate_inverse(&inv, a, 1e-10).unwrap(), b, 1e-10).unwrap();
        let ba = downdate_inverse(&downdate_inverse(&inv, b, 1e-10).unwrap(), a, 1e-10).unwrap();
        worst_order = worst_order.max(max_rel(&ab, &ba));
    }
    check(
        worst <= 1e-9 && worst_order <= 1e-9,
        format!("1000 downdates: worst rel err {worst:.2e}; order invariance {worst_order:.2e}"),
    )
}

/// Mean AMIP curve against the asymptotic lower bound, p = 1.
fn figure1() -> Outcome {
    let cfg = SimulationConfig::figure1(1000, 1, 50, vec![0.01, 0.02, 0.03, 0.04, 0.05], 7);
    let result = single_thread(|| run_figure1(&cfg)).expect("figure 1");
    let amip = result.curve(SimMethod::Amip);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (c, t) in amip.iter().zip(&result.theory) {
        let direct = asymptotic_lower_bound(t.alpha, 1.0, &NoiseDist::Gaussian).unwrap().value;
        assert_eq!(t.value, direct, "theory curve must be the bounds-module value");
        let r = (c.mean - t.value).abs() / t.value;
        worst = worst.max(r);
        parts.push(format!("{}:{:.4}/{:.4}", c.alpha, c.mean, t.value));
    }
    check(
        worst <= 0.2 && amip.len() == 5,
        format!("worst relative gap {:.1}% [{}]", 100.0 * worst, parts.join(" ")),
    )
}

fn three_sig_figs(a: f64, oracle: f64) -> bool {
    let unit = 10f64.powf(oracle.abs().log10().floor() - 2.0);
    (a - oracle).abs() <= 0.5 * unit
}

/// Stratified Monte Carlo over ε with the z-integral done exactly:
/// P(εz > q | ε) = Φ̄(q/|ε|), E[εz·1(εz > q) | ε] = |ε|φ(q/|ε|).
struct ConditionalOracle {
    abs_eps: Vec<f64>,
}

impl ConditionalOracle {
    fn new(draws: usize, seed: u64) -> Self {
        let std_normal = Normal::new(0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let abs_eps = (0..draws)
            .map(|i| {
                let u = (i as f64 + rng.random::<f64>()) / draws as f64;
                std_normal.inverse_cdf(u).abs()
            })
            .filter(|e| *e > 0.0 && e.is_finite())
            .collect();
        Self { abs_eps }
    }

    fn survival(&self, q: f64) -> f64 {
        let std_normal = Normal::new(0.0, 1.0).unwrap();
        self.abs_eps.iter().map(|e| std_normal.sf(q / e)).sum::<f64>() / self.abs_eps.len() as f64
    }

    fn quantile(&self, alpha: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 50.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.survival(mid) > alpha {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn tail_moment(&self, alpha: f64) -> f64 {
        let q = self.quantile(alpha);
        let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        self.abs_eps.iter().map(|e| e * pdf(q / e)).sum::<f64>() / self.abs_eps.len() as f64
    }
}

fn truncated_moment() -> Outcome {
    let gauss = NoiseDist::Gaussian;
    let half = truncated_product_moment(0.5, &gauss).unwrap();
    let half_ok = (half - 1.0 / std::f64::consts::PI).abs() <= 1e-6;
    let oracle = ConditionalOracle::new(10_000_000, 4);
    let mut mc_ok = true;
    let mut parts = Vec::new();
    for alpha in [0.01, 0.1, 0.25] {
        let ours = truncated_product_moment(alpha, &gauss).unwrap();
        let mc = oracle.tail_moment(alpha);
        mc_ok &= three_sig_figs(ours, mc);
        parts.push(format!("{alpha}: {ours:.6} vs {mc:.6}"));
    }
    let mut inverse = 0.0f64;
    for level in [0.001, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999] {
        let q = product_normal_quantile(level, &gauss).unwrap();
        inverse = inverse.max((product_normal_cdf(q, &gauss).unwrap() - level).abs());
    }
    check(
        half_ok && mc_ok && inverse <= 1e-6,
        format!(
            "E at 1/2 = {half:.9} (1/π = {:.9}); MC [{}]; worst |F(Q(u)) - u| {inverse:.1e}",
            1.0 / std::f64::consts::PI,
            parts.join(", ")
        ),
    )
}

fn regime_grid() -> Outcome {
    let grid = run_regime_grid(&GridConfig::table1(30, 7)).expect("grid");
    let cells = |r| grid.cells_for(r);
    let first_last = |r| {
        let c = cells(r);
        (c[0].clone(), c[c.len() - 1].clone())
    };
    let (i0, i1) = first_last(Region::I);
    let region_i = i1.mean_delta <= 0.7 * i0.mean_delta;
    let lb = asymptotic_lower_bound(0.25, 1.0, &NoiseDist::Gaussian).unwrap().value;
    let (_, iii) = first_last(Region::III);
    let (iv0, iv1) = first_last(Region::IV);
    let (ii0, ii1) = first_last(Region::II);
    let bounded = iii.mean_delta >= 0.8 * lb && iv1.mean_delta >= 0.8 * lb;
    let inconsistent =
        ii1.mean_full_error >= 0.9 * ii0.mean_full_error && iv1.mean_full_error >= 0.9 * iv0.mean_full_error;
    check(
        region_i && bounded && inconsistent,
        format!(
            "I: Δ {:.4} -> {:.4}; III/IV Δ at n=3200 {:.4}/{:.4} vs 0.8·LB {:.4}; II/IV error {:.3} -> {:.3} / {:.3} -> {:.3}",
            i0.mean_delta, i1.mean_delta, iii.mean_delta, iv1.mean_delta, 0.8 * lb,
            ii0.mean_full_error, ii1.mean_full_error, iv0.mean_full_error, iv1.mean_full_error
        ),
    )
}

fn lower_bound_guarantee() -> Outcome {
    let (n, k, p) = (2000, 500, 2);
    let params = BoundParams::new(n, p, k).unwrap().with_t_delta(0.02, 0.02);
    let report = finite_sample_lower_bound(&params, &NoiseDist::Gaussian).expect("bound");
    let c_echoed = report.constants_assumed.get("c") == Some(&1.0);
    let spec = ModelSpec::isotropic(p);
    let mut exceed = 0;
    for seed in 0..100 {
        let sample = gen_model2(&spec, n, 50_000 + seed).unwrap();
        let v = [1.0, 0.0];
        let col = sample.whitened_column(&v).unwrap();
        let kept = adversarial_subset(&sample.noise, &col, k).unwrap();
        let full = ols_coefficients(&sample.data, &sample.data.all_rows()).unwrap();
        let sub = ols_coefficients(&sample.data, &kept).unwrap();
        if full[0] - sub[0] > report.value {
            exceed += 1;
        }
    }
    let guarantee = match report.probability_guarantee {
        Guarantee::Probability(p) => p,
        _ => f64::NAN,
    };
    check(
        exceed >= 95 && c_echoed,
        format!(
            "refit Δ above bound {:.4} in {exceed}/100 seeds; guarantee {guarantee} (unclamped {:?}, vacuous = {}), c echoed = {c_echoed}",
            report.value, report.probability_unclamped, report.vacuous
        ),
    )
}

/// Intercept, binary treatment, one Gaussian covariate; 5% of responses ×20.
fn contaminated(seed: u64) -> Dataset<f64> {
    let n = 500;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let treat = (i % 2) as f64;
        let x: f64 = StandardNormal.sample(&mut rng);
        let e: f64 = StandardNormal.sample(&mut rng);
        rows.push(vec![1.0, treat, x]);
        y.push(2.0 + 0.4 * treat + 0.5 * x + e);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..n / 20 {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
        y[idx[i]] *= 20.0;
    }
    Dataset::from_rows(&rows, y).unwrap()
}

fn huber_robustness() -> Outcome {
    let k_max = 150;
    let (mut at_least, mut strictly) = (0, 0);
    let seeds = 50;
    let mut examples = Vec::new();
    for seed in 0..seeds {
        let data = contaminated(900 + seed);
        let flips = |loss| {
            let q = AuditQuery::coordinate(1, 3, k_max, Target::FlipSign, loss);
            one_greedy(&data, &q).expect("greedy").flip_at.unwrap_or(usize::MAX)
        };
        let ols = flips(Loss::Squared);
        let huber = flips(Loss::Huber { tau: 1.0 });
        at_least += (huber >= ols) as usize;
        strictly += (huber > ols) as usize;
        if seed < 5 {
            let show = |f: usize| if f == usize::MAX { "none".to_string() } else { f.to_string() };
            examples.push(format!("{}/{}", show(ols), show(huber)));
        }
    }
    check(
        at_least * 10 >= seeds as usize * 8 && strictly * 2 >= seeds as usize,
        format!(
            "huber >= ols in {at_least}/{seeds}, > in {strictly}/{seeds} (flip counts ols/huber, first seeds: {}; no flip within {k_max} = never)",
            examples.join(" ")
        ),
    )
}

fn env_pair(data: &str, schema: &str) -> Option<(String, TableSchema)> {
    let d = std::env::var(data).ok()?;
    let s = std::env::var(schema).ok()?;
    let schema: TableSchema = serde_json::from_str(&fs::read_to_string(s).ok()?).ok()?;
    Some((d, schema))
}

fn flip_count(data: &Dataset<f64>, column: usize) -> Option<usize> {
    let q = AuditQuery::coordinate(column, data.p(), data.n() - data.p(), Target::FlipSign, Loss::Squared);
    one_greedy(data, &q).ok()?.flip_at
}

fn audited_column(data: &Dataset<f64>, schema: &TableSchema) -> usize {
    data.column_index(&schema.covariate_columns[0]).expect("first covariate present")
}

fn real_data_tables() -> Outcome {
    let cash = env_pair("DROPAUDIT_CASH_DATA", "DROPAUDIT_CASH_SCHEMA");
    let lights = env_pair("DROPAUDIT_NIGHTLIGHTS_DATA", "DROPAUDIT_NIGHTLIGHTS_SCHEMA");
    if cash.is_none() && lights.is_none() {
        return Outcome::Skip("no user-supplied data (set DROPAUDIT_CASH_* / DROPAUDIT_NIGHTLIGHTS_*)".into());
    }
    let mut ok = true;
    let mut parts = Vec::new();
    if let Some((path, schema)) = cash {
        let data: Dataset<f64> = load_dataset(Path::new(&path), &schema).expect("cash transfers data");
        let data = expand_fixed_effects(&data, &schema.fixed_effect_columns).unwrap();
        let j = audited_column(&data, &schema);
        let beta = fit_ols(&data, &data.all_rows()).unwrap().coefficients[j];
        let flips = flip_count(&data, j);
        let s = summarize(&data, None).unwrap();
        let row = (beta * 100.0).round() / 100.0 == -5.53
            && flips == Some(5)
            && s.mu_y.round() == 219.0
            && s.sigma_y.round() == 172.0;
        ok &= row;
        parts.push(format!("cash: β̂ {beta:.3}, flip {flips:?}, μ {:.1}, σ {:.1}", s.mu_y, s.sigma_y));
    }
    if let Some((path, schema)) = lights {
        let data: Dataset<f64> = load_dataset(Path::new(&path), &schema).expect("nightlights data");
        let data = expand_fixed_effects(&data, &schema.fixed_effect_columns).unwrap();
        let j = audited_column(&data, &schema);
        let flips = flip_count(&data, j);
        ok &= flips == Some(110) && data.n() == 3895;
        parts.push(format!("nightlights: n {}, flip {flips:?}", data.n()));
    }
    check(ok, parts.join("; "))
}

fn cli(args: &[&str]) -> i32 {
    let mut argv = vec!["dropaudit"];
    argv.extend_from_slice(args);
    dropaudit_cli::run_cli(argv)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let sample = gen_model2(
        &ModelSpec {
            beta: vec![0.5, 0.2],
            ..ModelSpec::isotropic(2)
        },
        120,
        3,
    )
    .unwrap();
    let mut csv = String::from("id,y,a,b\n");
    for i in 0..sample.data.n() {
        let r = sample.data.row(i);
        csv.push_str(&format!("r{i},{},{},{}\n", sample.data.response()[i], r[0], r[1]));
    }
    let data = dir.path().join("d.csv");
    let schema = dir.path().join("s.json");
    fs::write(&data, csv).unwrap();
    fs::write(&schema, r#"{"response_column":"y","covariate_columns":["a","b"],"id_column":"id"}"#).unwrap();
    let (d, s) = (data.to_str().unwrap(), schema.to_str().unwrap());
    let workflows: Vec<(&str, Vec<&str>)> = vec![
        ("audit", vec!["audit", "--data", d, "--schema", s, "--direction", "e0", "--method", "one-greedy"]),
        ("audit", vec!["audit", "--data", d, "--schema", s, "--direction", "1,1", "--loss", "huber", "--target",
            "max-delta", "--k", "5"]),
        ("audit", vec!["audit", "--data", d, "--schema", s, "--direction", "e0", "--method", "amip"]),
        ("bounds", vec!["bounds", "--kind", "finite-sample-lb", "--n", "4000", "--k", "400", "--p", "2", "--t",
            "0.01", "--delta", "0.01"]),
        ("bounds", vec!["bounds", "--kind", "misspec-rate", "--n", "100000", "--k", "3", "--p", "2"]),
        ("simulate", vec!["simulate", "--figure1", "--n", "500", "--replicates", "8", "--methods",
            "amip,one-greedy,adversarial-oracle,theory"]),
        ("simulate", vec!["simulate", "--regime-grid", "--n-list", "64,256", "--seeds", "4"]),
        ("summarize", vec!["summarize", "--data", d, "--schema", s, "--removed", "3,4,5"]),
    ];
    let mut mismatches = Vec::new();
    for (i, (name, args)) in workflows.iter().enumerate() {
        let mut outputs = Vec::new();
        for (run, threads) in ["1", "2", "4", "1"].iter().enumerate() {
            let out = dir.path().join(format!("w{i}r{run}"));
            let mut argv = vec!["--out", out.to_str().unwrap(), "--threads", threads, "--seed", "11"];
            argv.extend(args.iter().copied());
            if cli(&argv) != 0 {
                mismatches.push(format!("{name} #{i} failed"));
                break;
            }
            let mut files = vec![fs::read(out.join(format!("{name}.json"))).unwrap()];
            if let Ok(t) = fs::read(out.join(format!("{name}.csv"))) {
                files.push(t);
            }
            outputs.push(files);
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            mismatches.push(format!("{name} #{i}"));
        }
    }
    check(
        mismatches.is_empty(),
        format!("{} workflows x threads {{1,2,4,1}}; mismatches: {:?}", workflows.len(), mismatches),
    )
}

fn main() {
    // `cargo test` passes harness flags; a name filter selects criteria by id.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, &str, Duration, fn() -> Outcome); 9] = [
        ("AC1", "oracle equivalence", Duration::from_secs(30), exactness),
        ("AC2", "downdate correctness", Duration::from_secs(5), downdates),
        ("AC3", "figure 1 desk scale", Duration::from_secs(600), figure1),
        ("AC4", "truncated moment", Duration::from_secs(120), truncated_moment),
        ("AC5", "regime grid", Duration::from_secs(900), regime_grid),
        ("AC6", "lower-bound guarantee", Duration::from_secs(300), lower_bound_guarantee),
        ("AC7", "huber robustness", Duration::from_secs(600), huber_robustness),
        ("AC8", "real-data tables", Duration::from_secs(600), real_data_tables),
        ("AC9", "determinism", Duration::from_secs(600), determinism),
    ];
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| id.contains(f.as_str()) || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let timing = format!("{:.1}s of {}s", took.as_secs_f64(), limit.as_secs());
        let outcome = match outcome {
            Outcome::Pass(d) if took > limit => Outcome::Fail(format!("{d}; over time limit")),
            o => o,
        };
        match outcome {
            Outcome::Pass(d) => println!("{id} PASS {name}: {d} ({timing})"),
            Outcome::Skip(d) => println!("{id} SKIP {name}: {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("{id} FAIL {name}: {d} ({timing})");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
