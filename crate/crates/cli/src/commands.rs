use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use dropaudit::audit::{
    amip_audit, brute_force_delta, one_greedy, subset_count, AuditOptions, AuditQuery, AuditTrace, Target,
};
use dropaudit::bounds::{
    asymptotic_lower_bound, finite_sample_lower_bound, gaussian_upper_bound, rate_bounds_with_cutoff, BoundParams,
    BoundReport, ModelSpec, NoiseDist, RateKind,
};
use dropaudit::io::{emit_report, expand_fixed_effects, load_dataset, summarize, Report, TableSchema};
use dropaudit::regression::Loss;
use dropaudit::simulate::{run_figure1, run_regime_grid, GridConfig, SimMethod, SimModel, SimulationConfig};
use dropaudit::Dataset;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::args::*;
use crate::{usage, write_timing, CliError};

type Result<T> = std::result::Result<T, CliError>;

/// What every report file holds: the resolved flags and the result.
#[derive(Serialize)]
struct Envelope<'a, R> {
    command: &'static str,
    config: &'a Cli,
    result: R,
}

impl<R: Report> Report for Envelope<'_, R> {
    fn plot_table(&self) -> Option<String> {
        self.result.plot_table()
    }
}

#[derive(Serialize)]
struct AuditOutput {
    n: usize,
    p: usize,
    columns: Option<Vec<String>>,
    trace: AuditTrace<f64>,
    /// Ids of the removed rows, in removal order.
    removed_row_ids: Option<Vec<String>>,
}

impl Report for AuditOutput {}

#[derive(Serialize)]
struct Plan<'a, P> {
    dry_run: bool,
    command: &'static str,
    config: &'a Cli,
    plan: P,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    crate::read_json_file(path)
}

fn print_plan<P: Serialize>(cli: &Cli, plan: P) -> Result<()> {
    let plan = Plan {
        dry_run: true,
        command: cli.command.name(),
        config: cli,
        plan,
    };
    println!("{}", dropaudit::io::to_json(&plan)?);
    Ok(())
}

fn finish<R: Report>(cli: &Cli, result: R, started: Instant, threads: usize) -> Result<()> {
    let name = cli.command.name();
    let envelope = Envelope {
        command: name,
        config: cli,
        result,
    };
    let path = cli.out.join(format!("{name}.json"));
    emit_report(&envelope, &path)?;
    write_timing(&cli.out, name, started.elapsed().as_secs_f64(), threads)?;
    println!("{}", path.display());
    Ok(())
}

pub(crate) fn dispatch(cli: &Cli, threads: usize) -> Result<()> {
    let started = Instant::now();
    match &cli.command {
        Command::Audit(a) => audit(cli, a, started, threads),
        Command::Bounds(b) => bounds(cli, b, started, threads),
        Command::Simulate(s) => simulate(cli, s, started, threads),
        Command::Summarize(s) => summarize_cmd(cli, s, started, threads),
    }
}

fn load(data: &Path, schema: &Path, expand: bool) -> Result<Dataset<f64>> {
    let schema: TableSchema = read_json(schema)?;
    let d = load_dataset(data, &schema)?;
    if expand && !schema.fixed_effect_columns.is_empty() {
        Ok(expand_fixed_effects(&d, &schema.fixed_effect_columns)?)
    } else {
        Ok(d)
    }
}

/// `e<j>`, a column name, or comma-separated weights.
pub(crate) fn resolve_direction(spec: &str, data: &Dataset<f64>) -> Result<Vec<f64>> {
    let p = data.p();
    let unit = |j: usize| -> Result<Vec<f64>> {
        if j >= p {
            return Err(usage(format!("direction e{j} out of range for p = {p}")));
        }
        let mut v = vec![0.0; p];
        v[j] = 1.0;
        Ok(v)
    };
    let spec = spec.trim();
    if let Some(j) = spec.strip_prefix('e').and_then(|r| r.parse::<usize>().ok()) {
        return unit(j);
    }
    if let Some(j) = data.column_index(spec) {
        return unit(j);
    }
    let weights: std::result::Result<Vec<f64>, _> = spec
        .trim_matches(|c| c == '[' || c == ']')
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect();
    match weights {
        Ok(w) if w.len() == p => Ok(w),
        Ok(w) => Err(usage(format!("direction has {} entries, design has p = {p}", w.len()))),
        Err(_) => Err(usage(format!("cannot read direction `{spec}`: not e<j>, a column, or a list"))),
    }
}

fn audit(cli: &Cli, a: &AuditArgs, started: Instant, threads: usize) -> Result<()> {
    if !(a.tau > 0.0 && a.tau.is_finite()) {
        return Err(usage("--tau must be positive"));
    }
    if a.method == MethodArg::BruteForce && !a.allow_exhaustive {
        return Err(usage("brute force needs --allow-exhaustive"));
    }
    let data = load(&a.data, &a.schema, true)?;
    let (n, p) = (data.n(), data.p());
    let direction = resolve_direction(&a.direction, &data)?;
    let loss = match a.loss {
        LossArg::Squared => Loss::Squared,
        LossArg::Huber => Loss::Huber { tau: a.tau },
    };
    let (target, k) = match a.target {
        TargetArg::Flip => (Target::FlipSign, a.k.unwrap_or(n - p)),
        TargetArg::MaxDelta => (
            Target::MaximizeDelta,
            a.k.ok_or_else(|| usage("--target max-delta needs --k"))?,
        ),
    };
    let mut options = AuditOptions {
        candidate_limit: a.candidate_limit,
        ..AuditOptions::default()
    };
    if let Some(b) = a.budget {
        options.enumeration_budget = b;
    }
    let query = AuditQuery::new(direction, k, target, loss).with_options(options);
    query.validate(&data)?;
    if a.dry_run {
        return print_plan(
            cli,
            serde_json::json!({
                "n": n,
                "p": p,
                "k_max": k,
                "columns": data.column_names(),
                "direction": query.direction,
                "subsets": (a.method == MethodArg::BruteForce).then(|| subset_count(n, k).to_string()),
            }),
        );
    }
    let trace = match a.method {
        MethodArg::OneGreedy => one_greedy(&data, &query)?,
        MethodArg::Amip => amip_audit(&data, &query)?,
        MethodArg::BruteForce => brute_force_delta(&data, &query)?,
    };
    let removed_row_ids = data
        .row_ids()
        .map(|ids| trace.removed.iter().map(|&i| ids[i].clone()).collect());
    let out = AuditOutput {
        n,
        p,
        columns: data.column_names().map(<[String]>::to_vec),
        trace,
        removed_row_ids,
    };
    finish(cli, out, started, threads)
}

fn noise_dist(kind: NoiseArg, df: Option<f64>) -> Result<NoiseDist> {
    let noise = match kind {
        NoiseArg::Gaussian => NoiseDist::Gaussian,
        NoiseArg::Rademacher => NoiseDist::Rademacher,
        NoiseArg::Uniform => NoiseDist::Uniform,
        NoiseArg::StudentT => NoiseDist::StudentT {
            df: df.ok_or_else(|| usage("student-t noise needs --df"))?,
        },
    };
    noise.validate()?;
    Ok(noise)
}

fn bound_params(b: &BoundsArgs) -> Result<BoundParams> {
    let need = |v: Option<usize>, name: &str| v.ok_or_else(|| usage(format!("--kind {:?} needs --{name}", b.kind)));
    let mut params = BoundParams::new(need(b.n, "n")?, need(b.p, "p")?, need(b.k, "k")?)?.with_t_delta(b.t, b.delta);
    if let Some(g) = b.gamma {
        params.gamma = g;
    }
    params.sigma_inv_norm = b.sigma_inv_norm;
    params.sigma_inv_v_norm = b.sigma_inv_v_norm;
    params.noise_scale = b.noise_scale;
    params.eta_misspec = b.eta_misspec;
    params.eta_consistency = b.eta_consistency;
    if let Some(w) = b.omega {
        params.omega = w;
    }
    params.kappa = b.kappa;
    params.beta_norm = b.beta_norm;
    params.big_c = b.big_c;
    params.small_c = b.small_c;
    params.validate()?;
    Ok(params)
}

fn bounds(cli: &Cli, b: &BoundsArgs, started: Instant, threads: usize) -> Result<()> {
    let noise = noise_dist(b.noise, b.df)?;
    let report: BoundReport = if b.kind == BoundKindArg::AsymptoticLb {
        let alpha = match (b.alpha, b.n, b.k) {
            (Some(a), _, _) => a,
            (None, Some(n), Some(k)) if n > 0 => k as f64 / n as f64,
            _ => return Err(usage("asymptotic-lb needs --alpha or both --n and --k")),
        };
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(CliError::Core(dropaudit::Error::AlphaOutOfRange(alpha)));
        }
        if b.dry_run {
            return print_plan(cli, serde_json::json!({ "alpha": alpha, "noise": noise }));
        }
        asymptotic_lower_bound(alpha, b.sigma_inv_v_norm * b.noise_scale, &noise)?
    } else {
        let params = bound_params(b)?;
        if b.dry_run {
            return print_plan(cli, serde_json::json!({ "params": params, "noise": noise }));
        }
        match b.kind {
            BoundKindArg::FiniteSampleLb => finite_sample_lower_bound(&params, &noise)?,
            BoundKindArg::GaussianUb => gaussian_upper_bound(&params)?,
            BoundKindArg::MisspecRate => rate_bounds_with_cutoff(&params, RateKind::MisspecDelta, b.cutoff)?,
            BoundKindArg::ConsistencyRate => rate_bounds_with_cutoff(&params, RateKind::Consistency, b.cutoff)?,
            BoundKindArg::AsymptoticLb => unreachable!(),
        }
    };
    finish(cli, report, started, threads)
}

fn simulate(cli: &Cli, s: &SimulateArgs, started: Instant, threads: usize) -> Result<()> {
    let noise = noise_dist(s.noise, s.df)?;
    if s.regime_grid {
        let cfg = GridConfig {
            n_list: s.n_list.clone(),
            noise,
            noise_scale: s.noise_scale,
            seeds: s.seeds,
            ..GridConfig::table1(s.seeds, cli.seed)
        };
        cfg.validate()?;
        if s.dry_run {
            return print_plan(cli, &cfg);
        }
        return finish(cli, run_regime_grid(&cfg)?, started, threads);
    }
    let mut cfg = SimulationConfig::figure1(s.n, s.p, s.replicates, s.alphas.clone(), cli.seed);
    if let SimModel::Model2(spec) = &mut cfg.model {
        *spec = ModelSpec {
            noise,
            noise_scale: s.noise_scale,
            ..spec.clone()
        };
    }
    cfg.methods = s
        .methods
        .iter()
        .map(|m| match m {
            SimMethodArg::Amip => SimMethod::Amip,
            SimMethodArg::OneGreedy => SimMethod::OneGreedy,
            SimMethodArg::AdversarialOracle => SimMethod::AdversarialOracle,
            SimMethodArg::Theory => SimMethod::Theory,
        })
        .collect();
    cfg.validate()?;
    if s.dry_run {
        return print_plan(cli, serde_json::json!({ "simulation": cfg, "ks": cfg.ks() }));
    }
    finish(cli, run_figure1(&cfg)?, started, threads)
}

fn summarize_cmd(cli: &Cli, s: &SummarizeArgs, started: Instant, threads: usize) -> Result<()> {
    let data = load(&s.data, &s.schema, false)?;
    let mut removal = s.removed.clone();
    if !s.removed_ids.is_empty() {
        let ids = data
            .row_ids()
            .ok_or_else(|| usage("dataset has no row ids"))?;
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        for id in &s.removed_ids {
            let i = index
                .get(id.as_str())
                .ok_or_else(|| usage(format!("unknown row id `{id}`")))?;
            removal.push(*i);
        }
    }
    if let Some(path) = &s.from_audit {
        let report: serde_json::Value = read_json(path)?;
        let removed = report
            .pointer("/result/trace/removed")
            .and_then(|v| v.as_array())
            .ok_or_else(|| usage(format!("{} is not an audit report", path.display())))?;
        for v in removed {
            removal.push(v.as_u64().ok_or_else(|| usage("bad row index in audit report"))? as usize);
        }
    }
    data.check_rows(&removal)?;
    if s.dry_run {
        return print_plan(cli, serde_json::json!({ "n": data.n(), "removed": removal.len() }));
    }
    let stats = summarize(&data, Some(&removal))?;
    finish(cli, stats, started, threads)
}
