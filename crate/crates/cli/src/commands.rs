use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use maxassoc::covariance::{estimate_joint, EstimatorTag, JointCovariance};
use maxassoc::data::DataMatrix;
use maxassoc::hyperopt::{search_and_fit, SearchMethod, SearchPlan, SearchSpace};
use maxassoc::optimizer::{fit, FitResult, InitMode, OptimizerSettings, OrderPenalties};
use maxassoc::oracle::true_directions;
use maxassoc::problem::PenaltyConfig;
use maxassoc::simlab::{
    build_sigma, residual_score, run_scenario, summarize, write_reports_csv, Distribution,
    ExperimentSpec, PenaltyPlan, ScenarioConfig, ScenarioSummary, Setting,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{pick, FileConfig};
use crate::report::{
    named, FitReport, Hyperparameters, OracleReport, OrderReport, SimulateReport, TestReport,
    SCHEMA_VERSION,
};
use crate::{FitArgs, OracleArgs, PenaltyArgs, SimulateArgs};

fn parse_opt<T: std::str::FromStr>(s: Option<&String>) -> Result<Option<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    s.map(|v| v.parse::<T>()).transpose().map_err(Into::into)
}

fn write_json<T: serde::Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
            Ok(())
        }
    }
}

fn optimizer_settings(file: &FileConfig, pen: &PenaltyArgs, seed: u64) -> Result<OptimizerSettings> {
    let mut s = file.optimizer.clone().unwrap_or_default();
    if let Some(v) = pen.learning_rate {
        s.alpha0 = v;
    }
    if let Some(v) = pen.max_inner {
        s.max_inner = v;
    }
    if let Some(v) = pen.max_outer {
        s.max_outer = v;
    }
    if let Some(v) = pen.multiplier_start {
        s.multiplier_start = v;
    }
    s.seed = seed;
    s.validate()?;
    Ok(s)
}

/// Resolved penalty choice shared by `fit` and `simulate`.
struct Penalties {
    alpha_a: f64,
    alpha_b: f64,
    fixed: Option<(f64, f64)>,
    method: SearchMethod,
    budget: usize,
}

impl Penalties {
    fn resolve(args: &PenaltyArgs, file: &FileConfig) -> Result<Self> {
        let bound_a = args.bound_a.or(file.bound_a);
        let bound_b = args.bound_b.or(file.bound_b);
        let fixed = match (bound_a, bound_b) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => bail!("give both --bound-a and --bound-b, or neither to search them"),
        };
        let method = match args.search {
            Some(m) => m,
            None => parse_opt(file.search.as_ref())?.unwrap_or(SearchMethod::Bayes),
        };
        Ok(Self {
            alpha_a: pick(args.alpha_a, file.alpha_a, 1.0),
            alpha_b: pick(args.alpha_b, file.alpha_b, 1.0),
            fixed,
            method,
            budget: pick(args.budget, file.budget, 30),
        })
    }

    fn plan(&self, p: usize, q: usize, seed: u64) -> SearchPlan {
        SearchPlan {
            space: SearchSpace::for_dims(p, q, self.alpha_a, self.alpha_b, self.budget, seed),
            method: self.method,
        }
    }

    fn fixed_configs(&self) -> Result<Option<OrderPenalties>> {
        self.fixed
            .map(|(a, b)| {
                Ok(OrderPenalties::uniform(
                    PenaltyConfig::new(self.alpha_a, a)?,
                    PenaltyConfig::new(self.alpha_b, b)?,
                ))
            })
            .transpose()
    }

    fn describe(&self) -> String {
        match self.fixed {
            Some((a, b)) => format!(
                "fixed: alpha_a={} bound_a={a} alpha_b={} bound_b={b}",
                self.alpha_a, self.alpha_b
            ),
            None => format!(
                "searched ({:?}, budget {}): alpha_a={} alpha_b={}",
                self.method, self.budget, self.alpha_a, self.alpha_b
            ),
        }
    }
}

fn read_csv(path: &Path) -> Result<DataMatrix> {
    DataMatrix::from_csv_path(path).with_context(|| format!("reading {}", path.display()))
}

/// Seeded split into (train, test) row indices.
fn split_rows(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        bail!("--test-fraction must lie in [0, 1), got {test_fraction}");
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (test_fraction * n as f64).round() as usize;
    let mut test = idx.split_off(n - n_test);
    idx.sort_unstable();
    test.sort_unstable();
    Ok((idx, test))
}

pub fn cmd_fit(args: &FitArgs, file: &FileConfig, seed: u64) -> Result<()> {
    let x = read_csv(&args.x)?;
    let y = read_csv(&args.y)?;
    if x.nrows() != y.nrows() {
        return Err(maxassoc::Error::Alignment {
            x_rows: x.nrows(),
            y_rows: y.nrows(),
        }
        .into());
    }
    let estimator = match args.estimator {
        Some(e) => e,
        None => parse_opt(file.estimator.as_ref())?.unwrap_or(EstimatorTag::Pearson),
    };
    let init = match args.init {
        Some(i) => i,
        None => parse_opt(file.init.as_ref())?.unwrap_or(InitMode::Orthogonal),
    };
    let orders = pick(args.orders, file.orders, 1);
    let repair = !args.no_repair && file.repair_pd.unwrap_or(true);
    let penalties = Penalties::resolve(&args.penalty, file)?;
    let settings = optimizer_settings(file, &args.penalty, seed)?;
    let test_fraction = pick(args.test_fraction, file.test_fraction, 0.0);
    let trim = pick(args.trim, file.trim, 0.1);

    let (train, test) = split_rows(x.nrows(), test_fraction, seed)?;
    let (x_train, y_train) = if test.is_empty() {
        (x.clone(), y.clone())
    } else {
        (x.select_rows(&train), y.select_rows(&train))
    };
    let cov = estimate_joint(&x_train, &y_train, estimator, repair)
        .with_context(|| format!("estimating the {estimator} covariance"))?;
    let (p, q) = (cov.p(), cov.q());

    let (result, chosen): (FitResult, Vec<(f64, f64)>) = match penalties.fixed_configs()? {
        Some(pens) => {
            let f = fit(&cov, orders, &pens, &settings, init)?;
            let (a, b) = penalties.fixed.unwrap();
            let n = f.orders();
            (f, vec![(a, b); n])
        }
        None => {
            let s = search_and_fit(&cov, orders, &penalties.plan(p, q, seed), &settings, init)?;
            (s.fit, s.selected)
        }
    };

    let names_x = x.names_or("x");
    let names_y = y.names_or("y");
    let order_reports: Vec<OrderReport> = (0..result.orders())
        .map(|k| OrderReport {
            order: k + 1,
            association: result.associations[k],
            a: named(&names_x, &result.directions[k].a),
            b: named(&names_y, &result.directions[k].b),
            nonzeros_a: result.nonzero_counts[k].0,
            nonzeros_b: result.nonzero_counts[k].1,
            hyperparameters: Hyperparameters {
                alpha_a: penalties.alpha_a,
                bound_a: chosen[k].0,
                alpha_b: penalties.alpha_b,
                bound_b: chosen[k].1,
                searched: penalties.fixed.is_none(),
            },
            converged: result.diagnostics[k].converged,
            diagnostics: result.diagnostics[k].clone(),
        })
        .collect();

    let test_report = if test.is_empty() || result.orders() == 0 {
        None
    } else {
        let (tx, ty) = (x.select_rows(&test), y.select_rows(&test));
        let fits = [result.directions.clone()];
        Some(TestReport {
            n_test: test.len(),
            residual_score: residual_score(&fits, &tx, &ty, 0.0)?,
            trimmed_residual_score: residual_score(&fits, &tx, &ty, trim)?,
            trim,
        })
    };

    let report = FitReport {
        schema_version: SCHEMA_VERSION,
        command: "fit",
        estimator: estimator.to_string(),
        seed,
        n_train: x_train.nrows(),
        p,
        q,
        converged: result.converged() && result.failure.is_none(),
        orders: order_reports,
        failure: result.failure.clone(),
        test: test_report,
    };
    write_json(&report, args.output.as_deref())
}

fn print_summary(summary: &ScenarioSummary) {
    println!(
        "{:>5} {:>15} {:>15} {:>7} {:>7} {:>15} {:>9}",
        "order", "theta_a", "theta_b", "tpr_a", "tnr_a", "association", "converged"
    );
    for o in &summary.orders {
        println!(
            "{:>5} {:>7.3}±{:<7.3} {:>7.3}±{:<7.3} {:>7.3} {:>7.3} {:>7.3}±{:<7.3} {:>4}/{:<4}",
            o.order,
            o.theta_a.mean,
            o.theta_a.se,
            o.theta_b.mean,
            o.theta_b.se,
            o.tpr_a.mean,
            o.tnr_a.mean,
            o.association.mean,
            o.association.se,
            o.converged,
            o.replicates
        );
    }
    println!(
        "replicates: {}, failed: {}, mean runtime {:.3}s",
        summary.replicates, summary.failed, summary.runtime_seconds.mean
    );
}

pub fn cmd_simulate(args: &SimulateArgs, file: &FileConfig, seed: u64) -> Result<()> {
    let setting = match &args.setting {
        Some(s) => *s,
        None => match &file.setting {
            Some(s) => s.parse::<Setting>()?,
            None => bail!("--setting is required (valid: {})", Setting::NAMES),
        },
    };
    let estimator = match args.estimator {
        Some(e) => e,
        None => parse_opt(file.estimator.as_ref())?.unwrap_or(EstimatorTag::Pearson),
    };
    let distribution = match args.distribution {
        Some(d) => d,
        None => parse_opt(file.distribution.as_ref())?.unwrap_or(Distribution::Normal),
    };
    let init = match args.init {
        Some(i) => i,
        None => parse_opt(file.init.as_ref())?.unwrap_or(InitMode::Orthogonal),
    };
    let config = ScenarioConfig {
        n: pick(args.n, file.n, setting.default_n()),
        contamination_rate: pick(args.contamination_rate, file.contamination_rate, 0.0),
        contamination_shift: pick(args.contamination_shift, file.contamination_shift, 2.0),
        distribution,
        seed,
        replicates: pick(args.replicates, file.replicates, 20),
        ..ScenarioConfig::new(setting)
    };
    config.validate()?;
    let orders = pick(args.orders, file.orders, setting.orders());
    let penalties = Penalties::resolve(&args.penalty, file)?;
    let (p, q) = setting.dims();
    let plan = match penalties.fixed_configs()? {
        Some(pens) => PenaltyPlan::Fixed(pens),
        None => PenaltyPlan::Search(penalties.plan(p, q, seed)),
    };
    let spec = ExperimentSpec {
        penalties: plan,
        settings: optimizer_settings(file, &args.penalty, seed)?,
        init,
        repair_pd: !args.no_repair && file.repair_pd.unwrap_or(true),
        ..ExperimentSpec::fixed(estimator, orders, OrderPenalties(Vec::new()))
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .context("building the worker pool")?;
    let reports = pool.install(|| run_scenario(&config, &spec))?;
    let summary = summarize(&reports);

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let csv_path = args.out_dir.join("replicates.csv");
    let file_out = std::fs::File::create(&csv_path)
        .with_context(|| format!("creating {}", csv_path.display()))?;
    write_reports_csv(file_out, &reports)?;

    let report = SimulateReport {
        schema_version: SCHEMA_VERSION,
        command: "simulate",
        setting: setting.to_string(),
        estimator: estimator.to_string(),
        n: config.n,
        contamination_rate: config.contamination_rate,
        contamination_shift: config.contamination_shift,
        distribution: format!("{distribution:?}").to_lowercase(),
        seed,
        penalties: penalties.describe(),
        summary,
    };
    let json_path: PathBuf = args.out_dir.join("summary.json");
    write_json(&report, Some(&json_path))?;
    print_summary(&report.summary);
    Ok(())
}

pub fn cmd_oracle(args: &OracleArgs, file: &FileConfig) -> Result<()> {
    let setting = match &args.setting {
        Some(s) => Some(*s),
        None if args.cov.is_none() => file.setting.as_ref().map(|s| s.parse::<Setting>()).transpose()?,
        None => None,
    };
    let (cov, source, default_orders): (JointCovariance, String, usize) = match (setting, &args.cov) {
        (Some(s), None) => {
            let (sigma, _) = build_sigma(s);
            let k = s.orders();
            (sigma, s.to_string(), k)
        }
        (None, Some(path)) => {
            let Some(p) = args.p else {
                bail!("--p (number of x variables) is required with --cov");
            };
            let m = read_csv(path)?;
            let full = m.into_values();
            let joint = JointCovariance::from_full(&full, p)
                .with_context(|| format!("validating {}", path.display()))?;
            let k = joint.p().min(joint.q());
            (joint, path.display().to_string(), k)
        }
        (Some(_), Some(_)) => bail!("give either --setting or --cov, not both"),
        (None, None) => bail!(
            "give --setting ({}) or --cov with --p",
            Setting::NAMES
        ),
    };
    let orders = pick(args.orders, file.orders, default_orders);
    let sol = true_directions(&cov, orders)?;
    let report = OracleReport::new(source, cov.p(), cov.q(), &sol);
    write_json(&report, args.output.as_deref())
}
