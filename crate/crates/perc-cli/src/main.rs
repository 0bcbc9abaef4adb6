//! Experiment harness for the percolation engine: every estimator and
//! oracle behind one binary. Runs are configured by flags or a flat
//! key=value file (flags win, unknown keys rejected), write a
//! fixed-schema CSV plus a JSON manifest, and are reproducible: same
//! config and seed, same bytes.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 insufficient
//! conditional support (partial results are kept), 1 anything else.

mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use perc_core::cluster::{boundary_touch_count_in, label_clusters_in};
use perc_core::estimate::{
    estimate_characteristic_length, estimate_hc, estimate_pi, max_cluster_interval_estimate,
    pi_bounds_check, small_max_cluster_check, theorem_one_experiment, y_moment_check, CheckLine,
};
use perc_core::events::{estimate_event_o, event_g, event_o, niceness_profile};
use perc_core::geometry::{
    build_partition, choose_parameters, first_violation, ConstantsConfig, ParameterChoice,
    PartitionSpec, PiModel,
};
use perc_core::lattice::Sampler;
use perc_core::oracle::{
    enumerate_distribution, enumerate_expectation, enumerate_probability, EnumerationTask,
};
use perc_core::steering::{
    demo_instance, random_instance, steering_oracle, steering_simulate, SteeringInstance,
    STEERING_ORACLE_CAP,
};
use perc_core::topology::{has_horizontal_crossing, CrossingVariant};
use perc_core::{PercError, Region, RngSpec, SiteCoord};

use config::{ConfigError, Params};
use report::{run_chunked, Artifacts, Csv};

#[derive(Parser)]
#[command(name = "perc", version, about = "Critical bond percolation experiments on Z^2")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key=value config file, or a manifest JSON from a previous run
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: $PERC_OUT_DIR, else the current directory]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Basename for the CSV/manifest pair [default: the subcommand name]
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// First rng stream index
    #[arg(long)]
    stream: Option<u64>,
    /// Samples, per scale where the experiment scans several
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// One-arm probability: origin to the boundary of the radius-n box
    Pi {
        #[arg(long)]
        n: Option<i64>,
        #[arg(long)]
        p: Option<f64>,
        /// Exact enumeration instead of sampling (tiny n only)
        #[arg(long)]
        exact: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Horizontal crossing probability of the k x l box
    Hc {
        #[arg(long)]
        k: Option<i64>,
        #[arg(long)]
        l: Option<i64>,
        #[arg(long)]
        p: Option<f64>,
        /// strict (interior column span) or standard (full rectangle)
        #[arg(long)]
        variant: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Characteristic length: first scale whose crossing clears the threshold
    Length {
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        n_max: Option<i64>,
        #[command(flatten)]
        common: Common,
    },
    /// P(largest cluster of the radius-n box lies strictly in (lo, hi))
    Mcluster {
        #[arg(long)]
        n: Option<i64>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Main interval experiment: P(M_n in (a n^2 pi, b n^2 pi)) per scale
    Theorem1 {
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        /// Comma-separated scales
        #[arg(long)]
        n_list: Option<String>,
        #[arg(long)]
        p: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// One-arm power-law ratio, sum, and moment checks on dyadic scales
    Pibounds {
        /// Comma-separated dyadic radii
        #[arg(long)]
        scales: Option<String>,
        /// Radii for the cumulative-sum and rectangle checks
        #[arg(long)]
        sum_scales: Option<String>,
        #[arg(long)]
        p: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Annulus-reach moments and tail stability across scales
    Ymoment {
        #[arg(long)]
        m_list: Option<String>,
        #[arg(long)]
        p: Option<f64>,
        /// Tail probability the larger scales must keep
        #[arg(long)]
        floor: Option<f64>,
        /// Pin the tail factor instead of fitting it at the smallest scale
        #[arg(long)]
        c: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// P(largest cluster < K n^2 pi(n)) per scale
    Smallmax {
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        n_list: Option<String>,
        #[arg(long)]
        p: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Steered-sum bound: exact oracle and simulation
    Steering {
        /// Run the worked two-summand instance
        #[arg(long)]
        demo: bool,
        /// JSON file holding a steering instance
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Verify the bound on this many randomized instances
        #[arg(long)]
        check: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Probability of the circuit-and-link construction event on the core
    EventO {
        /// Cells per axis (odd)
        #[arg(long)]
        m: Option<i64>,
        /// Cell radius
        #[arg(long)]
        s: Option<i64>,
        /// Ring width
        #[arg(long)]
        t: Option<i64>,
        /// Window radius [default: m*s]
        #[arg(long)]
        n: Option<i64>,
        #[arg(long)]
        p: Option<f64>,
        /// Also write the first satisfying replica's report with witnesses
        #[arg(long)]
        witness: bool,
        /// Also profile the conditional frame-touch count of cell (0, 0)
        /// with this many replicas
        #[arg(long)]
        niceness: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Search for a feasible rescaling (cells per axis, ring fraction, threshold)
    ChooseParams {
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        /// power:EXP, power:AMP:EXP, or table:n=v,n=v,...
        #[arg(long)]
        pi_model: Option<String>,
        #[arg(long)]
        frame_mean: Option<f64>,
        #[arg(long)]
        margin_mean: Option<f64>,
        #[arg(long)]
        cell_lower: Option<f64>,
        #[arg(long)]
        cell_upper: Option<f64>,
        #[arg(long)]
        n_min: Option<i64>,
        #[arg(long)]
        n_max: Option<i64>,
        /// Pin the ring fraction instead of searching the grid
        #[arg(long)]
        epsilon: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Exact tiny-window values by exhaustive enumeration
    Enumerate {
        /// pi | hc | mcluster | ctilde | event-g
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        n: Option<i64>,
        #[arg(long)]
        k: Option<i64>,
        #[arg(long)]
        l: Option<i64>,
        #[arg(long)]
        s: Option<i64>,
        #[arg(long)]
        t: Option<i64>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        variant: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 2;
        }
        if let Some(p) = cause.downcast_ref::<PercError>() {
            return match p {
                PercError::InsufficientSupport { .. } => 3,
                PercError::InvalidParameters(_)
                | PercError::InvalidRegion(_)
                | PercError::NotAnAnnulus(_)
                | PercError::EnumerationCapExceeded { .. }
                | PercError::Infeasible(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn bad_config(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn artifacts_for(common: &Common, default_name: &str) -> anyhow::Result<Artifacts> {
    let out = common
        .out
        .clone()
        .or_else(|| std::env::var_os("PERC_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out)
        .with_context(|| format!("cannot create output directory {}", out.display()))?;
    let name = common.name.as_deref().unwrap_or(default_name);
    Ok(Artifacts::new(&out, name))
}

/// Shared sampling parameters: seed, first stream, per-stage budget.
fn sampling(params: &mut Params, common: &Common, default_budget: u64) -> anyhow::Result<(u64, u64, u64)> {
    let seed = params.get("seed", common.seed, 1)?;
    let stream = params.get("stream", common.stream, 0)?;
    let budget = params.get("budget", common.budget, default_budget)?;
    if budget == 0 {
        return Err(bad_config("budget must be positive"));
    }
    Ok((seed, stream, budget))
}

fn checked_p(p: f64) -> anyhow::Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(bad_config(format!("p must lie in [0, 1], got {p}")))
    }
}

fn parse_variant(s: &str) -> anyhow::Result<CrossingVariant> {
    match s {
        "strict" => Ok(CrossingVariant::Strict),
        "standard" => Ok(CrossingVariant::Standard),
        other => Err(bad_config(format!(
            "variant must be strict or standard, got {other:?}"
        ))),
    }
}

fn parse_pi_model(s: &str) -> anyhow::Result<PiModel> {
    let num = |part: &str| -> anyhow::Result<f64> {
        part.parse()
            .map_err(|e| bad_config(format!("pi-model: cannot parse {part:?}: {e}")))
    };
    if let Some(rest) = s.strip_prefix("power:") {
        let parts: Vec<&str> = rest.split(':').collect();
        return match parts[..] {
            [exponent] => Ok(PiModel::Power { amplitude: 1.0, exponent: num(exponent)? }),
            [amplitude, exponent] => Ok(PiModel::Power {
                amplitude: num(amplitude)?,
                exponent: num(exponent)?,
            }),
            _ => Err(bad_config("pi-model power form is power:EXP or power:AMP:EXP")),
        };
    }
    if let Some(rest) = s.strip_prefix("table:") {
        let mut rows = Vec::new();
        for entry in rest.split(',') {
            let (n, v) = entry
                .split_once('=')
                .ok_or_else(|| bad_config(format!("pi-model table entry {entry:?} needs n=value")))?;
            let n = n
                .trim()
                .parse()
                .map_err(|e| bad_config(format!("pi-model table scale {n:?}: {e}")))?;
            rows.push((n, num(v.trim())?));
        }
        return Ok(PiModel::Table(rows));
    }
    Err(bad_config(format!(
        "pi-model must start with power: or table:, got {s:?}"
    )))
}

fn print_estimate(label: &str, est: &perc_core::estimate::Estimate) {
    println!(
        "{label}: {:.6} +- {:.6}  ({} samples)",
        est.mean(),
        est.stderr(),
        est.samples()
    );
}

fn print_checks(checks: &[CheckLine]) {
    for c in checks {
        println!(
            "[{}] {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.label,
            c.detail
        );
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Pi { n, p, exact, common } => {
            let mut params = Params::load("pi", common.config.as_deref())?;
            let n = params.require("n", n)?;
            let p = checked_p(params.get("p", p, 0.5)?)?;
            let exact = params.flag("exact", exact)?;
            let (seed, stream, budget) = sampling(&mut params, &common, 100_000)?;
            let resolved = params.finish()?;
            if n < 0 {
                return Err(bad_config(format!("n must be nonnegative, got {n}")));
            }
            let artifacts = artifacts_for(&common, "pi")?;
            let mut csv = Csv::default();
            let body = (|| -> anyhow::Result<()> {
                if exact {
                    let (samples, value) = exact_pi(n, p)?;
                    csv.push_exact("pi", n, p, "exact", samples, value);
                    return Ok(());
                }
                let hash = resolved.hash();
                let est = run_chunked(&artifacts, &hash, seed, stream, budget, |s0, len| {
                    let e = estimate_pi(n, p, len, RngSpec::new(seed, s0))?;
                    Ok(e.successes().expect("indicator estimate"))
                })?;
                print_estimate(&format!("pi({n}) at p={p}"), &est);
                csv.push("pi", n, p, "mc", &est);
                Ok(())
            })();
            artifacts.commit(&csv, &resolved, seed)?;
            body
        }

        Command::Hc { k, l, p, variant, common } => {
            let mut params = Params::load("hc", common.config.as_deref())?;
            let k = params.require("k", k)?;
            let l = params.require("l", l)?;
            let p = checked_p(params.get("p", p, 0.5)?)?;
            let variant_name = params.get("variant", variant, "strict".to_string())?;
            let variant = parse_variant(&variant_name)?;
            let (seed, stream, budget) = sampling(&mut params, &common, 100_000)?;
            let resolved = params.finish()?;
            let artifacts = artifacts_for(&common, "hc")?;
            let mut csv = Csv::default();
            let body = (|| -> anyhow::Result<()> {
                let hash = resolved.hash();
                let est = run_chunked(&artifacts, &hash, seed, stream, budget, |s0, len| {
                    let e = estimate_hc(k, l, p, variant, len, RngSpec::new(seed, s0))?;
                    Ok(e.successes().expect("indicator estimate"))
                })?;
                print_estimate(&format!("HC({k},{l}) {variant_name} at p={p}"), &est);
                csv.push(format!("hc({k}x{l})"), l, p, &variant_name, &est);
                Ok(())
            })();
            artifacts.commit(&csv, &resolved, seed)?;
            body
        }

        Command::Length { p, epsilon, n_max, common } => {
            let mut params = Params::load("length", common.config.as_deref())?;
            let p = checked_p(params.get("p", p, 0.5)?)?;
            // The threshold constant is not essential; a quarter by default.
            let epsilon = params.get("epsilon", epsilon, 0.25)?;
            let n_max = params.get("n-max", n_max, 32)?;
            let (seed, stream, budget) = sampling(&mut params, &common, 10_000)?;
            let resolved = params.finish()?;
            let artifacts = artifacts_for(&common, "length")?;
            let mut csv = Csv::default();
            let body = (|| -> anyhow::Result<()> {
                let report = estimate_characteristic_length(
                    p,
                    epsilon,
                    n_max,
                    budget,
                    RngSpec::new(seed, stream),
                )?;
                for (n, est) in &report.rows {
                    csv.push("length.hc", *n, p, "strict", est);
                }
                println!("L(p={p}, epsilon={epsilon}) = {}", report.outcome);
                Ok(())
            })();
            artifacts.commit(&csv, &resolved, seed)?;
            body
        }

        Command::Mcluster { n, p, lo, hi, common } => {
            let mut params = Params::load("mcluster", common.config.as_deref())?;
            let n = params.require("n", n)?;
            let p = checked_p(params.get("p", p, 0.5)?)?;
            let lo = params.require("lo", lo)?;
            let hi = params.require("hi", hi)?;
            let (seed, stream, budget) = sampling(&mut params, &common, 10_000)?;
            let resolved = params.finish()?;
            if !(lo < hi) {
                return Err(bad_config(format!("need lo < hi, got lo={lo}, hi={hi}")));
            }
            let artifacts = artifacts_for(&common, "mcluster")?;
            let mut csv = Csv::default();
            let body = (|| -> anyhow::Result<()> {
                let hash = resolved.hash();
                let est = run_chunked(&artifacts, &hash, seed, stream, budget, |s0, len| {
                    let e =
                        max_cluster_interval_estimate(n, p, lo, hi, len, RngSpec::new(seed, s0))?;
                    Ok(e.successes().expect("indicator estimate"))
                })?;
                print_estimate(&format!("P(M_{n} in ({lo}, {hi})) at p={p}"), &est);
                csv.push("mcluster", n, p, "", &est);
                Ok(())
            })();
            artifacts.commit(&csv, &resolved, seed)?;
            body
        }

        Command::Theorem1 { a, b, n_list, p, common } => {
            let mut params = Params::load("theorem1", common.config.as_deref())?;
            let a = params.require("a", a)?;
            let b = params.require("b", b)?;
            let ns: Vec<i64> = params.get_list("n-list", n_list, "16,32,64,128")?;
            let p = checked_p(params.get("p", p, 0.5)?)?;
            let (seed, stream, budget) = sampling(&mut params, &common, 10_000)?;
            let resolved = params.finish()?;
            let artifacts = artifacts_for(&common, "theorem1")?;
            let mut csv = Csv::default();
            let body = (|| -> anyhow::Result<()> {
                let rows =
                    theorem_one_experiment(a, b, &ns, p, budget, RngSpec::new(seed, stream))?;
                for row in &rows {
                    csv.push("theorem1.pi", row.n, p, "", &row.pi_hat);
                    csv.push("theorem1.event", row.n, p, "", &row.event);
                    csv.push("theorem1.event.lo", row.n, p, "", &row.event_low);
                    csv.push("theorem1.event.hi", row.n, p, "", &row.event_high);
                    println!(
                        "n={:5}  pi_hat={:.5}  P(M in ({a}, {b})*n^2*pi_hat) = {:.4} +- {:.4}  \
                         [at pi_hat-2se: {:.4}, at pi_hat+2se: {:.4}]",
                        row.n,
                        row.pi_hat.mean(),
                        row.event.mean(),
                        row.event.stderr(),
                        row.event_low.mean(),
                        row.event_high.mean(),
                    );
                }
                Ok(())
            })();
            artifacts.commit(&csv, &resolved, seed)?;
            body
        }

        Command::Pibounds { scales, sum_scales, p, common } => {
            let mut params = Params::load("pibounds", common.config.as_deref())?;
            let scales: Vec<i64> = params.get_list("scales", scales, "8,16,32,64")?;
            let sums: Vec<i64> = params.get_list("sum-scales", sum_scales, "1,2,4")?;
            let p = checked_p(params.get("p", p, 0.5)?)?;
            let (seed, stream, budget) = sampling(&mut params, &common, 10_000)?;
            let resolved = params.finish()?;
            let artifacts = artifacts_for(&common, "pibounds")?;
            let mut csv = Csv::default();
            let body = (|| -> anyhow::Result<()> {
                let report =
                    pi_bounds_check(&scales, &sums, p, budget, RngSpec::new(seed, stream))?;
                for (n, est) in &report.pi_critical {
                    csv.push("pibounds.pi", *n, 0.5, "", est);
                }
                for (n, est) in &report.pi_small {
                    csv.push("pibounds.pi.small", *n, 0.5, "", est);
                }
                for (n, est) in &report.pi_off {
                    csv.push("pibounds.pi.off", *n, p, "", est);
                }
                for (k, n, est) in &report.moment_rows {
                    csv.push(format!("pibounds.touch({k}x{n})"), *n, 0.5, "", est);
                }
                println!("fitted one-arm exponent: {:.4}", report.exponent);
                print_checks(&report.checks);
                Ok(())
            })();
            artifacts.commit(&csv, &resolved, seed)?;
            body
        }

        Command::Ymoment { m_list, p, floor, c, common } => {
            let mut params = Params::load("ymoment", common.config.as_deref())?;
            let ms: Vec<i64> = params.get_list("m-list", m_list, "8,16,32")?;
            let p = checked_p(params.get("p", p, 0.5)?)?;
            let floor = params.get("floor", floor, 0.2)?;
            let c_override = params.optional("c", c)?;
            let (seed, stream, budget) = sampling(&mut params, &common, 10_000)?;
            let resolved = params.finish()?;
            let artifacts = artifacts_for(&common, "ymoment")?;
            let mut csv = Csv::default();
            let body = (|| -> anyhow::Result<()> {
                let report =
                    y_moment_check(&ms, p, floor, c_override, budget, RngSpec::new(seed, stream))?;
                println!("tail factor c = {:.4}", report.c);
                for row in &report.rows {
                    csv.push("ymoment.pi", row.m, p, "", &row.pi_hat);
                    csv.push("ymoment.mean", row.m, p, "", &row.mean);
                    csv.push("ymoment.meansq", row.m, p, "", &row.mean_sq);
                    csv.push("ymoment.tail", row.m, p, "", &row.tail);
                    println!(
                        "m={:4}  E[Y]={:.2}  E[Y^2]={:.1}  P(Y >= {:.2}) = {:.4}",
                        row.m,
                        row.mean.mean(),
                        row.mean_sq.mean(),
                        row.threshold,
                        row.tail.mean()
                    );
                }
                print_checks(&report.checks);
                Ok(())
            })();
            artifacts.commit(&csv, &resolved, seed)?;
            body
        }

        Command::Smallmax { k, n_list, p, common } => {
            let mut params = Params::load("smallmax", common.config.as_deref())?;
            let k = params.require("k", k)?;
            let ns: Vec<i64> = params.get_list("n-list", n_list, "16,32,64")?;
            let p = checked_p(params.get("p", p, 0.5)?)?;
            let (seed, stream, budget) = sampling(&mut params, &common, 10_000)?;
            let resolved = params.finish()?;
            let artifacts = artifacts_for(&common, "smallmax")?;
            let mut csv = Csv::default();
            let body = (|| -> anyhow::Result<()> {
                let rows = small_max_cluster_check(k, &ns, p, budget, RngSpec::new(seed, stream))?;
                for row in &rows {
                    csv.push("smallmax.pi", row.n, p, "", &row.pi_hat);
                    csv.push("smallmax.below", row.n, p, "", &row.below);
                    println!(
                        "n={:4}  P(M < {:.2}) = {:.4} +- {:.4}",
                        row.n,
                        row.threshold,
                        row.below.mean(),
                        row.below.stderr()
                    );
                }
                Ok(())
            })();
            artifacts.commit(&csv, &resolved, seed)?;
            body
        }

        Command::Steering { demo, instance, check, common } => {
            let mut params = Params::load("steering", common.config.as_deref())?;
            let demo = params.flag("demo", demo)?;
            let instance_path = params.optional(
                "instance",
                instance.map(|p| p.display().to_string()),
            )?;
            let check = params.optional("check", check)?;
            let (seed, stream, budget) = sampling(&mut params, &common, 10_000)?;
            let resolved = params.finish()?;
            let modes = usize::from(demo) + usize::from(instance_path.is_some()) + usize::from(check.is_some());
            if modes != 1 {
                return Err(bad_config(
                    "choose exactly one of --demo, --instance FILE, --check N",
                ));
            }
            let artifacts = artifacts_for(&common, "steering")?;
            let mut csv = Csv::default();
            let body = (|| -> anyhow::Result<()> {
                if let Some(count) = check {
                    let mut worst = f64::INFINITY;
                    for i in 0..count {
                        let inst = random_instance(i);
                        let exact = steering_oracle(&inst)?;
                        let margin = exact - inst.bound();
                        if margin < worst {
                            worst = margin;
                        }
                        if margin < -1e-12 {
                            anyhow::bail!(
                                "bound violated on generated instance {i}: exact {exact} < bound {}",
                                inst.bound()
                            );
                        }
                    }
                    println!(
                        "{count} randomized instances satisfy the bound; worst margin {worst:.6}"
                    );
                    return Ok(());
                }
                let inst: SteeringInstance = if demo {
                    demo_instance()
                } else {
                    let path = instance_path.as_deref().expect("mode checked above");
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| bad_config(format!("cannot read {path}: {e}")))?;
                    serde_json::from_str(&text)
                        .map_err(|e| bad_config(format!("malformed steering instance: {e}")))?
                };
                let label = if demo { "demo" } else { "file" };
                let support: Option<u64> = inst
                    .distributions
                    .iter()
                    .try_fold(1u64, |acc, d| acc.checked_mul(d.values.len() as u64));
                match support {
                    Some(s) if s <= STEERING_ORACLE_CAP => {
                        let exact = steering_oracle(&inst)?;
                        println!(
                            "exact P(sum in ({}, {})) = {exact}  >=  bound (eta1^eta2 min)^k = {}",
                            inst.alpha,
                            inst.beta,
                            inst.bound()
                        );
                        csv.push_exact("steering.exact", inst.k() as i64, 0.0, label, s, exact);
                    }
                    _ => {
                        inst.validate()?;
                        println!("product support exceeds the exact cap; simulation only");
                    }
                }
                let mc = steering_simulate(&inst, budget, RngSpec::new(seed, stream))?;
                print_estimate("simulated P(sum in target)", &mc);
                csv.push("steering.mc", inst.k() as i64, 0.0, label, &mc);
                Ok(())
            })();
            artifacts.commit(&csv, &resolved, seed)?;
            body
        }

        Command::EventO { m, s, t, n, p, witness, niceness, common } => {
            let mut params = Params::load("event-o", common.config.as_deref())?;
            let m = params.require("m", m)?;
            let s = params.require("s", s)?;
            let t = params.require("t", t)?;
            let spec = PartitionSpec::new(m, s, t)?;
            let n = params.get("n", n, spec.core_radius())?;
            let p = checked_p(params.get("p", p, 0.5)?)?;
            let witness = params.flag("witness", witness)?;
            let niceness = params.optional("niceness", niceness)?;
            let (seed, stream, budget) = sampling(&mut params, &common, 10_000)?;
            let resolved = params.finish()?;
            let part = build_partition(&spec, n)?;
            let core = part.core.clone();
            let artifacts = artifacts_for(&common, "event-o")?;
            let mut csv = Csv::default();
            let body = (|| -> anyhow::Result<()> {
                let hash = resolved.hash();
                let est = run_chunked(&artifacts, &hash, seed, stream, budget, |s0, len| {
                    let e = estimate_event_o(&spec, &core, p, len, RngSpec::new(seed, s0))?;
                    Ok(e.successes().expect("indicator estimate"))
                })?;
                println!(
                    "P(construction event, {m}x{m} grid, s={s}, t={t}, window {n}) = {:.6e} +- {:.6e}",
                    est.mean(),
                    est.stderr()
                );
                csv.push(format!("event-o(m{m},s{s},t{t})"), n, p, "core", &est);

                if witness {
                    let sampler = Sampler::new(core.clone(), p, seed)?;
                    let mut report = None;
                    for st in stream..stream + budget {
                        let config = sampler.sample(st);
                        let r = event_o(&config, &spec, &core)?;
                        if r.holds {
                            println!("witness found at stream {st}");
                            report = Some(r);
                            break;
                        }
                        report = Some(r);
                    }
                    let report = report.expect("budget is positive");
                    if !report.holds {
                        println!("no satisfying replica within {budget}; writing the last failure");
                    }
                    let path = artifacts.sibling("witness.json");
                    report::atomic_write(&path, serde_json::to_string_pretty(&report)?.as_bytes())?;
                    println!("witness report: {}", path.display());
                }

                if let Some(cond_budget) = niceness {
                    if cond_budget == 0 {
                        return Err(bad_config("niceness budget must be positive"));
                    }
                    let cell = spec.cell_box(0, 0);
                    let sampler = Sampler::new(cell, p, seed)?;
                    let profile =
                        niceness_profile(&spec, 0, 0, &sampler, cond_budget, stream + budget)?;
                    csv.push("event-o.niceness", n, p, "cell(0,0)", &profile.overall);
                    println!(
                        "conditional frame-touch mean {:.3} ({} accepted, {} circuit shapes, \
                         nice fraction {:.3})",
                        profile.overall.mean(),
                        profile.overall.samples(),
                        profile.groups.len(),
                        profile.nice_fraction
                    );
                }
                Ok(())
            })();
            artifacts.commit(&csv, &resolved, seed)?;
            body
        }

        Command::ChooseParams {
            a,
            b,
            pi_model,
            frame_mean,
            margin_mean,
            cell_lower,
            cell_upper,
            n_min,
            n_max,
            epsilon,
            common,
        } => {
            let mut params = Params::load("choose-params", common.config.as_deref())?;
            let constants = ConstantsConfig {
                frame_mean: params.get("frame-mean", frame_mean, 1.0)?,
                margin_mean: params.get("margin-mean", margin_mean, 1.0)?,
                cell_lower: params.get("cell-lower", cell_lower, 1.0)?,
                cell_upper: params.get("cell-upper", cell_upper, 1.0)?,
                a: params.require("a", a)?,
                b: params.require("b", b)?,
            };
            let model = parse_pi_model(&params.require("pi-model", pi_model)?)?;
            let n_min = params.get("n-min", n_min, 64)?;
            let n_max = params.get("n-max", n_max, 4096)?;
            let epsilon = params.optional("epsilon", epsilon)?;
            let seed = params.get("seed", common.seed, 1)?;
            let resolved = params.finish()?;
            constants.validate()?;
            model.validate()?;
            if let Some(eps) = epsilon {
                if eps >= 1.0 / 12.0 {
                    return Err(bad_config(format!(
                        "construction ring fraction must be below 1/12, got {eps}"
                    )));
                }
                if eps <= 0.0 {
                    return Err(bad_config("ring fraction must be positive"));
                }
            }
            let artifacts = artifacts_for(&common, "choose-params")?;
            let csv = Csv::default();
            let outcome = match epsilon {
                None => choose_parameters(&constants, &model, n_min..=n_max),
                Some(eps) => pinned_epsilon_search(&constants, &model, eps, n_min..=n_max),
            };
            let body = match outcome {
                Ok(choice) => {
                    describe_choice(&choice);
                    Ok(())
                }
                // An exhausted search is a finding, not a failure.
                Err(PercError::Infeasible(msg)) => {
                    println!("infeasible: {msg}");
                    Ok(())
                }
                Err(other) => Err(other.into()),
            };
            artifacts.commit(&csv, &resolved, seed)?;
            body
        }

        Command::Enumerate { target, n, k, l, s, t, p, variant, common } => {
            let mut params = Params::load("enumerate", common.config.as_deref())?;
            let target = params.require("target", target)?;
            let p = checked_p(params.get("p", p, 0.5)?)?;
            let seed = params.get("seed", common.seed, 1)?;
            let artifacts = artifacts_for(&common, "enumerate")?;
            let mut csv = Csv::default();
            match target.as_str() {
                "pi" => {
                    let n = params.require("n", n)?;
                    let resolved = params.finish()?;
                    let body = (|| -> anyhow::Result<()> {
                        let (samples, value) = exact_pi(n, p)?;
                        csv.push_exact("enumerate.pi", n, p, "", samples, value);
                        Ok(())
                    })();
                    artifacts.commit(&csv, &resolved, seed)?;
                    body
                }
                "hc" => {
                    let k = params.require("k", k)?;
                    let l = params.require("l", l)?;
                    let variant_name = params.get("variant", variant, "strict".to_string())?;
                    let variant = parse_variant(&variant_name)?;
                    let resolved = params.finish()?;
                    let body = (|| -> anyhow::Result<()> {
                        if k < 1 || l < 1 {
                            return Err(bad_config(format!(
                                "crossing box needs k, l >= 1, got ({k}, {l})"
                            )));
                        }
                        // Same rectangle the sampling estimator uses.
                        let rect = Region::rect(0, k, 0, l)?;
                        let edges = rect.edges().len();
                        let task = EnumerationTask::all_edges(rect.clone(), p)?;
                        let value = enumerate_probability(&task, |config| {
                            has_horizontal_crossing(config, &rect, variant)
                                .expect("rectangle crossings are total")
                        });
                        println!("HC({k},{l}) {variant_name} at p={p}: {value} = {}", value.as_f64());
                        csv.push_exact(
                            format!("enumerate.hc({k}x{l})"),
                            l,
                            p,
                            &variant_name,
                            1u64 << edges,
                            value.as_f64(),
                        );
                        Ok(())
                    })();
                    artifacts.commit(&csv, &resolved, seed)?;
                    body
                }
                "mcluster" => {
                    let n = params.require("n", n)?;
                    let resolved = params.finish()?;
                    let body = (|| -> anyhow::Result<()> {
                        let window = Region::Box { n };
                        let edges = window.edges().len();
                        let task = EnumerationTask::all_edges(window.clone(), p)?;
                        let dist = enumerate_distribution(&task, |config| {
                            label_clusters_in(config, &window)
                                .max_cluster_size()
                                .expect("a box is nonempty") as u64
                        });
                        println!("largest-cluster distribution on the radius-{n} box at p={p}:");
                        for (value, prob) in &dist {
                            println!("  P(M = {value}) = {prob} = {}", prob.as_f64());
                            csv.push_exact(
                                "enumerate.mcluster",
                                n,
                                p,
                                &format!("M={value}"),
                                1u64 << edges,
                                prob.as_f64(),
                            );
                        }
                        Ok(())
                    })();
                    artifacts.commit(&csv, &resolved, seed)?;
                    body
                }
                "ctilde" => {
                    let n = params.require("n", n)?;
                    let resolved = params.finish()?;
                    let body = (|| -> anyhow::Result<()> {
                        let window = Region::Box { n };
                        let edges = window.edges().len();
                        let task = EnumerationTask::all_edges(window.clone(), p)?;
                        let value = enumerate_expectation(&task, |config| {
                            boundary_touch_count_in(config, &window) as u64
                        });
                        println!(
                            "E[sites of the radius-{n} box joined to its boundary] at p={p}: \
                             {value} = {}",
                            value.as_f64()
                        );
                        csv.push_exact("enumerate.ctilde", n, p, "", 1u64 << edges, value.as_f64());
                        Ok(())
                    })();
                    artifacts.commit(&csv, &resolved, seed)?;
                    body
                }
                "event-g" => {
                    let s = params.require("s", s)?;
                    let t = params.require("t", t)?;
                    let resolved = params.finish()?;
                    let body = (|| -> anyhow::Result<()> {
                        let spec = PartitionSpec::new(1, s, t)?;
                        let window = Region::Box { n: s - 2 * t };
                        let edges = window.edges().len();
                        let task = EnumerationTask::all_edges(window, p)?;
                        let value = enumerate_probability(&task, |config| {
                            event_g(config, &spec, 0, 0).expect("window covers the inner ring")
                        });
                        println!(
                            "P(closed dual circuit in the inner ring, s={s}, t={t}) at p={p}: \
                             {value} = {}",
                            value.as_f64()
                        );
                        csv.push_exact(
                            format!("enumerate.event-g(s{s},t{t})"),
                            s,
                            p,
                            "",
                            1u64 << edges,
                            value.as_f64(),
                        );
                        Ok(())
                    })();
                    artifacts.commit(&csv, &resolved, seed)?;
                    body
                }
                other => Err(bad_config(format!(
                    "target must be pi, hc, mcluster, ctilde, or event-g; got {other:?}"
                ))),
            }
        }
    }
}

/// Exact one-arm probability by full enumeration of the box's edges.
fn exact_pi(n: i64, p: f64) -> anyhow::Result<(u64, f64)> {
    if n == 0 {
        println!("pi(0) = 1 (the origin lies on the boundary)");
        return Ok((1, 1.0));
    }
    let window = Region::Box { n };
    let edges = window.edges().len();
    let task = EnumerationTask::all_edges(window.clone(), p)?;
    let origin = SiteCoord::new(0, 0);
    let boundary = window.boundary_sites();
    let value = enumerate_probability(&task, |config| {
        let labeling = label_clusters_in(config, &window);
        boundary
            .iter()
            .any(|&b| labeling.same_cluster(origin, b).expect("boundary lies in the box"))
    });
    println!("pi({n}) at p={p}: {value} = {}", value.as_f64());
    Ok((1u64 << edges, value.as_f64()))
}

fn describe_choice(choice: &ParameterChoice) {
    println!(
        "feasible rescaling: 1/x = {} cells per axis, epsilon = {}, valid from n = {}",
        choice.inv_x, choice.epsilon, choice.threshold_n
    );
    if let Ok(spec) = choice.partition_spec(choice.threshold_n) {
        println!(
            "at n = {}: grid {}x{}, cell radius {}, ring width {}",
            choice.threshold_n, spec.m, spec.m, spec.s, spec.t
        );
    }
}

/// The grid search with the ring fraction pinned: scan odd cell counts
/// only, largest violating scale bounding the threshold as in the free
/// search.
fn pinned_epsilon_search(
    constants: &ConstantsConfig,
    model: &PiModel,
    epsilon: f64,
    n_range: std::ops::RangeInclusive<i64>,
) -> Result<ParameterChoice, PercError> {
    let (start, end) = (*n_range.start(), *n_range.end());
    if start < 1 || start > end {
        return Err(PercError::InvalidParameters(format!(
            "scale range {start}..={end} must be nonempty and positive"
        )));
    }
    let mut first_report = None;
    for inv_x in (3..=31).step_by(2) {
        let binding = (start..=end)
            .rev()
            .find_map(|n| first_violation(inv_x, epsilon, constants, model, n).map(|f| (n, f)));
        match binding {
            None => {
                return Ok(ParameterChoice { inv_x, epsilon, threshold_n: start });
            }
            Some((n, _)) if n < end => {
                return Ok(ParameterChoice { inv_x, epsilon, threshold_n: n + 1 });
            }
            Some((n, failure)) => {
                if first_report.is_none() {
                    first_report = Some((inv_x, n, failure));
                }
            }
        }
    }
    let (inv_x, n, failure) = first_report.expect("the grid is nonempty");
    Err(PercError::Infeasible(format!(
        "no odd cell count in 3..=31 works at epsilon={epsilon} for scales {start}..={end}; \
         first candidate 1/x={inv_x} fails at n={n}: {failure}"
    )))
}
