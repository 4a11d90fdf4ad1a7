//! Command-line front end for the poll debiasing pipeline.

mod manifest;
mod pipeline;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use pollstrat::core_model::{significance_stars, DimensionRegistry, Election};
use pollstrat::poststrat::{
    default_threshold_grid, estimate, poststratify_conditional, threshold_sweep, BootstrapConfig,
};
use pollstrat::stats::{cohens_kappa, fleiss_kappa, pearson};
use pollstrat::synth::{generate, write_corpus, SyntheticSpec};

#[derive(Parser)]
#[command(
    name = "pollstrat",
    version,
    about = "Debias non-representative social-media polls via regression and poststratification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a registry and/or poll file, reporting every bad row
    Validate(ValidateArgs),
    /// Normalize polls to head-to-head outcomes
    Normalize(NormalizeArgs),
    /// Fit the outcome regression and persist the model
    Fit(FitArgs),
    /// Run the full pipeline and emit a poststratified estimate report
    Poststratify(PoststratifyArgs),
    /// Conditional estimates for the strata of one dimension from a saved model
    Conditional(ConditionalArgs),
    /// Re-run the pipeline across vote thresholds, emitting plot-ready CSV
    Sweep(SweepArgs),
    /// Engagement and option-position correlations
    Correlate(CorrelateArgs),
    /// Inter-rater agreement from a ratings table
    Kappa(KappaArgs),
    /// Calibrate the bot-score threshold to an annotated bot fraction
    CalibrateBot(CalibrateBotArgs),
    /// Generate a synthetic corpus with known ground truth
    Synth(SynthArgs),
}

/// Settings that may also come from a JSON config file; explicit flags win.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FileConfig {
    registry: Option<PathBuf>,
    color_map: Option<PathBuf>,
    reference: Option<PathBuf>,
    min_votes: Option<u64>,
    bot_threshold: Option<f64>,
    dimensions: Option<Vec<String>>,
    thresholds: Option<Vec<u64>>,
    bootstrap_replicates: Option<usize>,
    bootstrap_seed: Option<u64>,
}

fn load_file_config(path: &Option<PathBuf>) -> Result<FileConfig> {
    match path {
        Some(p) => serde_json::from_str(
            &fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?,
        )
        .with_context(|| format!("invalid config {}", p.display())),
        None => Ok(FileConfig::default()),
    }
}

#[derive(Args, Clone)]
struct CommonPipelineArgs {
    /// Poll CSV file
    #[arg(long)]
    polls: PathBuf,
    /// User-attribute CSV file
    #[arg(long)]
    attributes: PathBuf,
    /// Election season (2016 or 2020)
    #[arg(long)]
    season: Election,
    /// JSON config file supplying defaults for the remaining flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Registry JSON; the built-in default stratification when omitted
    #[arg(long)]
    registry: Option<PathBuf>,
    /// State color map JSON ({"CA": "blue", ...}); a built-in demo map when omitted
    #[arg(long)]
    color_map: Option<PathBuf>,
    /// Minimum effective votes for a poll to enter the regression (default 50)
    #[arg(long)]
    min_votes: Option<u64>,
    /// Bot-score threshold for the bot dimension (default 0.83)
    #[arg(long)]
    bot_threshold: Option<f64>,
    /// Output directory
    #[arg(long)]
    out_dir: PathBuf,
}

/// Flag/config/default resolution of the shared pipeline settings.
pub struct ResolvedCommon {
    pub polls: PathBuf,
    pub attributes: PathBuf,
    pub season: Election,
    pub config: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub color_map: Option<PathBuf>,
    pub min_votes: u64,
    pub bot_threshold: f64,
    pub out_dir: PathBuf,
}

impl CommonPipelineArgs {
    fn resolve(&self, cfg: &FileConfig) -> ResolvedCommon {
        ResolvedCommon {
            polls: self.polls.clone(),
            attributes: self.attributes.clone(),
            season: self.season,
            config: self.config.clone(),
            registry: self.registry.clone().or_else(|| cfg.registry.clone()),
            color_map: self.color_map.clone().or_else(|| cfg.color_map.clone()),
            min_votes: self.min_votes.or(cfg.min_votes).unwrap_or(50),
            bot_threshold: self.bot_threshold.or(cfg.bot_threshold).unwrap_or(0.83),
            out_dir: self.out_dir.clone(),
        }
    }
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    polls: Option<PathBuf>,
    #[arg(long)]
    season: Option<Election>,
    #[arg(long)]
    registry: Option<PathBuf>,
}

#[derive(Args)]
struct NormalizeArgs {
    #[arg(long)]
    polls: PathBuf,
    #[arg(long)]
    season: Election,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: CommonPipelineArgs,
    /// Comma-separated predictor dimensions; all registry dimensions when omitted
    #[arg(long, value_delimiter = ',')]
    dimensions: Vec<String>,
}

#[derive(Args)]
struct PoststratifyArgs {
    #[command(flatten)]
    common: CommonPipelineArgs,
    /// Reference distribution JSON
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Comma-separated poststratification dimensions; gender,age,ideology,location when omitted
    #[arg(long, value_delimiter = ',')]
    dimensions: Vec<String>,
    #[arg(long)]
    bootstrap_replicates: Option<usize>,
    #[arg(long)]
    bootstrap_seed: Option<u64>,
}

#[derive(Args)]
struct ConditionalArgs {
    /// Saved model JSON
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Restrict to one dimension; all model dimensions when omitted
    #[arg(long)]
    dimension: Option<String>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonPipelineArgs,
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    dimensions: Vec<String>,
    /// Comma-separated vote thresholds; the default grid when omitted
    #[arg(long, value_delimiter = ',')]
    thresholds: Vec<u64>,
    #[arg(long)]
    bootstrap_replicates: Option<usize>,
    #[arg(long)]
    bootstrap_seed: Option<u64>,
}

#[derive(Args)]
struct CorrelateArgs {
    #[arg(long)]
    polls: PathBuf,
    #[arg(long)]
    season: Election,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct KappaArgs {
    /// CSV with one row per item and one column per rater (header required)
    #[arg(long)]
    ratings: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CalibrateBotArgs {
    #[arg(long)]
    attributes: PathBuf,
    /// Fraction of users a human annotator classified as bots
    #[arg(long)]
    target_fraction: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// SyntheticSpec JSON
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn init_threads() {
    if let Ok(v) = std::env::var("POLLSTRAT_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate(args) => cmd_validate(args),
        Command::Normalize(args) => cmd_normalize(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Poststratify(args) => cmd_poststratify(args),
        Command::Conditional(args) => cmd_conditional(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Correlate(args) => cmd_correlate(args),
        Command::Kappa(args) => cmd_kappa(args),
        Command::CalibrateBot(args) => cmd_calibrate_bot(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_registry_or_default(path: &Option<PathBuf>) -> Result<DimensionRegistry> {
    match path {
        Some(p) => Ok(pollstrat::ingest::load_registry(p)?),
        None => Ok(DimensionRegistry::default_registry()),
    }
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    fs::write(path, json + "\n").with_context(|| format!("cannot write {}", path.display()))
}

fn cmd_validate(args: ValidateArgs) -> Result<bool> {
    let mut ok = true;
    match load_registry_or_default(&args.registry) {
        Ok(_) => {
            if args.registry.is_some() {
                println!("registry: ok");
            }
        }
        Err(e) => {
            println!("registry: {e:#}");
            ok = false;
        }
    }
    if let Some(polls) = &args.polls {
        let season = args
            .season
            .context("--season is required when validating polls")?;
        let report = pollstrat::ingest::load_polls(polls, season)?;
        println!(
            "polls: {} valid, {} rejected",
            report.records.len(),
            report.rejections.len()
        );
        for rejection in &report.rejections {
            println!("  row {}: {}", rejection.row, rejection.reason);
            ok = false;
        }
    }
    Ok(ok)
}

fn cmd_normalize(args: NormalizeArgs) -> Result<bool> {
    ensure_out_dir(&args.out_dir)?;
    let report = pollstrat::ingest::load_polls(&args.polls, args.season)?;
    let mut writer = csv::Writer::from_path(args.out_dir.join("normalized.csv"))?;
    writer.write_record([
        "poll_id",
        "share_focal",
        "effective_votes",
        "trump_listed_first",
        "option_count",
    ])?;
    let mut skipped: Vec<(String, String)> = Vec::new();
    for poll in &report.records {
        match pollstrat::normalize::normalize_poll(poll) {
            Ok(o) => writer.write_record([
                o.poll_id.as_str(),
                &format!("{}", o.share_focal),
                &o.effective_votes.to_string(),
                &o.trump_listed_first_among_focal.to_string(),
                &o.option_count.to_string(),
            ])?,
            Err(e) => skipped.push((poll.poll_id.clone(), e.to_string())),
        }
    }
    writer.flush()?;
    write_json(
        &args.out_dir.join("rejections.json"),
        &serde_json::json!({
            "ingest": report.rejections,
            "normalize": skipped.iter().map(|(id, reason)| {
                serde_json::json!({"poll_id": id, "reason": reason})
            }).collect::<Vec<_>>(),
        }),
    )?;
    manifest::write(
        &args.out_dir,
        "normalize",
        &[&args.polls],
        &["normalized.csv", "rejections.json"],
        serde_json::json!({"season": args.season.to_string()}),
    )?;
    println!(
        "normalized {} polls ({} ingest rejections, {} without focal outcomes)",
        report.records.len() - skipped.len(),
        report.rejections.len(),
        skipped.len()
    );
    Ok(true)
}

fn regression_dimensions(
    registry: &DimensionRegistry,
    requested: &[String],
    cfg: &FileConfig,
) -> Vec<String> {
    if !requested.is_empty() {
        requested.to_vec()
    } else if let Some(dims) = &cfg.dimensions {
        dims.clone()
    } else {
        registry.dimensions.iter().map(|d| d.id.clone()).collect()
    }
}

fn poststrat_dimensions(requested: &[String], cfg: &FileConfig) -> Vec<String> {
    if !requested.is_empty() {
        requested.to_vec()
    } else if let Some(dims) = &cfg.dimensions {
        dims.clone()
    } else {
        DimensionRegistry::default_poststrat_dimensions()
    }
}

fn resolve_reference(flag: &Option<PathBuf>, cfg: &FileConfig) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| cfg.reference.clone())
        .context("--reference is required (flag or config file)")
}

fn render_model_table(model: &pollstrat::core_model::FittedModel) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<24} {:>10} {:>10} {:>8} {:>8}  sig\n",
        "", "coef", "std err", "t", "P>|t|"
    ));
    let mut row = |name: &str, coef: f64, se: f64, t: f64, p: f64| {
        out.push_str(&format!(
            "{name:<24} {coef:>10.4} {se:>10.4} {t:>8.2} {p:>8.3}  {}\n",
            significance_stars(p)
        ));
    };
    row(
        "intercept",
        model.intercept,
        model.intercept_std_err,
        model.intercept_t_stat,
        model.intercept_p_value,
    );
    for c in &model.coefficients {
        row(
            &format!("{}.{}", c.dimension, c.stratum),
            c.coef,
            c.std_err,
            c.t_stat,
            c.p_value,
        );
    }
    out.push_str(&format!(
        "\nn_obs = {}    adj R^2 = {:.3}    min_votes = {}\n",
        model.n_obs, model.adj_r2, model.min_votes
    ));
    out
}

fn cmd_fit(args: FitArgs) -> Result<bool> {
    let cfg = load_file_config(&args.common.config)?;
    let common = args.common.resolve(&cfg);
    ensure_out_dir(&common.out_dir)?;
    let registry = load_registry_or_default(&common.registry)?;
    let dims = regression_dimensions(&registry, &args.dimensions, &cfg);
    let prepared = pipeline::prepare(&common, &registry)?;
    prepared.report_drops();
    let design =
        pollstrat::poststrat::assemble_design(&prepared.polls, &registry, &dims, common.min_votes)?;
    let model = pollstrat::stats::ols_fit(&design)?;
    pollstrat::ingest::save_model(&common.out_dir.join("model.json"), &model)?;
    let table = render_model_table(&model);
    fs::write(common.out_dir.join("model_table.txt"), &table)?;
    print!("{table}");
    manifest::write(
        &common.out_dir,
        "fit",
        &pipeline::input_paths(&common),
        &["model.json", "model_table.txt"],
        serde_json::json!({
            "season": common.season.to_string(),
            "min_votes": common.min_votes,
            "bot_threshold": common.bot_threshold,
            "dimensions": dims,
        }),
    )?;
    Ok(true)
}

fn cmd_poststratify(args: PoststratifyArgs) -> Result<bool> {
    let cfg = load_file_config(&args.common.config)?;
    let common = args.common.resolve(&cfg);
    ensure_out_dir(&common.out_dir)?;
    let registry = load_registry_or_default(&common.registry)?;
    let dims = poststrat_dimensions(&args.dimensions, &cfg);
    let reference_path = resolve_reference(&args.reference, &cfg)?;
    let replicates = args
        .bootstrap_replicates
        .or(cfg.bootstrap_replicates)
        .unwrap_or(1000);
    let seed = args.bootstrap_seed.or(cfg.bootstrap_seed).unwrap_or(0);
    let prepared = pipeline::prepare(&common, &registry)?;
    prepared.report_drops();
    let reference = pollstrat::ingest::load_reference(&reference_path)?;
    let report = estimate(
        &prepared.polls,
        &registry,
        &dims,
        common.min_votes,
        &reference,
        BootstrapConfig { replicates, seed },
    )?;
    write_json(&common.out_dir.join("estimate.json"), &report)?;
    println!(
        "estimate: {:.4} [{:.4}, {:.4}] from {} polls (M = {})",
        report.overall.point,
        report.overall.ci_low,
        report.overall.ci_high,
        report.n_polls_used,
        report.min_votes
    );
    if let Some(err) = report.abs_error {
        println!("abs error vs ground truth: {err:.4}");
    }
    let mut inputs = pipeline::input_paths(&common);
    inputs.push(&reference_path);
    manifest::write(
        &common.out_dir,
        "poststratify",
        &inputs,
        &["estimate.json"],
        serde_json::json!({
            "season": common.season.to_string(),
            "min_votes": common.min_votes,
            "bot_threshold": common.bot_threshold,
            "dimensions": dims,
            "bootstrap_replicates": replicates,
            "bootstrap_seed": seed,
        }),
    )?;
    Ok(true)
}

fn cmd_conditional(args: ConditionalArgs) -> Result<bool> {
    ensure_out_dir(&args.out_dir)?;
    let registry = load_registry_or_default(&args.registry)?;
    let model = pollstrat::ingest::load_model(&args.model, &registry)?;
    let reference = pollstrat::ingest::load_reference(&args.reference)?;
    let dims: Vec<String> = match &args.dimension {
        Some(d) => vec![d.clone()],
        None => model.dimension_set.clone(),
    };
    let mut estimates: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for dim_id in &dims {
        let dim = registry
            .dimension(dim_id)
            .with_context(|| format!("unknown dimension {dim_id:?}"))?;
        for stratum in &dim.strata {
            let est = poststratify_conditional(&model, &reference, dim_id, stratum)?;
            estimates
                .entry(dim_id.clone())
                .or_default()
                .insert(stratum.clone(), est);
        }
    }
    write_json(&args.out_dir.join("conditional.json"), &estimates)?;
    for (dim, strata) in &estimates {
        for (stratum, est) in strata {
            println!("{dim}.{stratum}: {est:.4}");
        }
    }
    manifest::write(
        &args.out_dir,
        "conditional",
        &[&args.model, &args.reference],
        &["conditional.json"],
        serde_json::json!({"dimensions": dims}),
    )?;
    Ok(true)
}

fn cmd_sweep(args: SweepArgs) -> Result<bool> {
    let cfg = load_file_config(&args.common.config)?;
    let common = args.common.resolve(&cfg);
    ensure_out_dir(&common.out_dir)?;
    let registry = load_registry_or_default(&common.registry)?;
    let dims = poststrat_dimensions(&args.dimensions, &cfg);
    let reference_path = resolve_reference(&args.reference, &cfg)?;
    let thresholds = if !args.thresholds.is_empty() {
        args.thresholds.clone()
    } else if let Some(t) = &cfg.thresholds {
        t.clone()
    } else {
        default_threshold_grid()
    };
    let replicates = args
        .bootstrap_replicates
        .or(cfg.bootstrap_replicates)
        .unwrap_or(1000);
    let seed = args.bootstrap_seed.or(cfg.bootstrap_seed).unwrap_or(0);
    let prepared = pipeline::prepare(&common, &registry)?;
    prepared.report_drops();
    let reference = pollstrat::ingest::load_reference(&reference_path)?;
    let rows = threshold_sweep(
        &prepared.polls,
        &registry,
        &dims,
        &thresholds,
        &reference,
        BootstrapConfig { replicates, seed },
    );
    let mut writer = csv::Writer::from_path(common.out_dir.join("sweep.csv"))?;
    writer.write_record([
        "M",
        "n_polls",
        "estimate",
        "ci_low",
        "ci_high",
        "abs_error",
        "mean_stratum_abs_error",
        "error",
    ])?;
    let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for row in &rows {
        match &row.report {
            Some(report) => writer.write_record([
                row.min_votes.to_string(),
                row.n_polls.to_string(),
                format!("{}", report.overall.point),
                format!("{}", report.overall.ci_low),
                format!("{}", report.overall.ci_high),
                fmt_opt(report.abs_error),
                fmt_opt(report.mean_stratum_abs_error),
                String::new(),
            ])?,
            None => writer.write_record([
                row.min_votes.to_string(),
                row.n_polls.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                row.error.clone().unwrap_or_default(),
            ])?,
        }
    }
    writer.flush()?;
    let mut inputs = pipeline::input_paths(&common);
    inputs.push(&reference_path);
    manifest::write(
        &common.out_dir,
        "sweep",
        &inputs,
        &["sweep.csv"],
        serde_json::json!({
            "season": common.season.to_string(),
            "bot_threshold": common.bot_threshold,
            "dimensions": dims,
            "thresholds": thresholds,
            "bootstrap_replicates": replicates,
            "bootstrap_seed": seed,
        }),
    )?;
    println!("swept {} thresholds", rows.len());
    Ok(true)
}

fn cmd_correlate(args: CorrelateArgs) -> Result<bool> {
    ensure_out_dir(&args.out_dir)?;
    let report = pollstrat::ingest::load_polls(&args.polls, args.season)?;
    let polls = &report.records;

    let votes_retweets: Vec<(f64, f64)> = polls
        .iter()
        .map(|p| (p.total_votes() as f64, p.retweets as f64))
        .collect();
    let votes_favorites: Vec<(f64, f64)> = polls
        .iter()
        .map(|p| (p.total_votes() as f64, p.favorites as f64))
        .collect();
    let pairs = pollstrat::normalize::position_share_pairs(polls);

    let corr = |pairs: &[(f64, f64)]| -> serde_json::Value {
        match pearson(pairs) {
            Ok((r, p)) => serde_json::json!({"r": r, "p": p, "n": pairs.len()}),
            Err(e) => serde_json::json!({"error": e.to_string(), "n": pairs.len()}),
        }
    };
    let mut position = BTreeMap::new();
    for (count, group) in &pairs.groups {
        let as_pairs: Vec<(f64, f64)> = group
            .iter()
            .map(|(pos, share)| (*pos as f64, *share))
            .collect();
        position.insert(count.to_string(), corr(&as_pairs));
    }
    let out = serde_json::json!({
        "votes_vs_retweets": corr(&votes_retweets),
        "votes_vs_favorites": corr(&votes_favorites),
        "position_vs_share_by_option_count": position,
        "skipped_zero_vote_polls": pairs.skipped_zero_vote_polls,
    });
    write_json(&args.out_dir.join("correlations.json"), &out)?;
    println!("{}", serde_json::to_string_pretty(&out)?);
    manifest::write(
        &args.out_dir,
        "correlate",
        &[&args.polls],
        &["correlations.json"],
        serde_json::json!({"season": args.season.to_string()}),
    )?;
    Ok(true)
}

fn cmd_kappa(args: KappaArgs) -> Result<bool> {
    ensure_out_dir(&args.out_dir)?;
    let mut reader = csv::Reader::from_path(&args.ratings)?;
    let n_raters = reader.headers()?.len();
    let mut ratings: Vec<Vec<String>> = Vec::new();
    for row in reader.records() {
        let row = row?;
        ratings.push(row.iter().map(|s| s.trim().to_string()).collect());
    }
    if n_raters < 2 {
        bail!("ratings file must have at least 2 rater columns");
    }
    let fleiss = fleiss_kappa(&ratings)?;
    let cohen = if n_raters == 2 {
        let a: Vec<&str> = ratings.iter().map(|r| r[0].as_str()).collect();
        let b: Vec<&str> = ratings.iter().map(|r| r[1].as_str()).collect();
        Some(cohens_kappa(&a, &b)?)
    } else {
        None
    };
    let out = serde_json::json!({
        "items": ratings.len(),
        "raters": n_raters,
        "fleiss_kappa": fleiss,
        "cohens_kappa": cohen,
    });
    write_json(&args.out_dir.join("kappa.json"), &out)?;
    println!("{}", serde_json::to_string_pretty(&out)?);
    manifest::write(
        &args.out_dir,
        "kappa",
        &[&args.ratings],
        &["kappa.json"],
        serde_json::json!({}),
    )?;
    Ok(true)
}

fn cmd_calibrate_bot(args: CalibrateBotArgs) -> Result<bool> {
    ensure_out_dir(&args.out_dir)?;
    let report = pollstrat::ingest::load_attributes(&args.attributes, None)?;
    let scores: Vec<f64> = report
        .records
        .iter()
        .filter_map(|r| r.record.bot_score)
        .collect();
    if scores.is_empty() {
        bail!("no bot scores present in {}", args.attributes.display());
    }
    let threshold = pollstrat::attrs::calibrate_bot_threshold(&scores, args.target_fraction);
    let flagged = scores.iter().filter(|&&s| s >= threshold).count();
    let out = serde_json::json!({
        "threshold": threshold,
        "scored_users": scores.len(),
        "flagged": flagged,
        "target_fraction": args.target_fraction,
    });
    write_json(&args.out_dir.join("bot_threshold.json"), &out)?;
    println!("{}", serde_json::to_string_pretty(&out)?);
    manifest::write(
        &args.out_dir,
        "calibrate-bot",
        &[&args.attributes],
        &["bot_threshold.json"],
        serde_json::json!({"target_fraction": args.target_fraction}),
    )?;
    Ok(true)
}

fn cmd_synth(args: SynthArgs) -> Result<bool> {
    ensure_out_dir(&args.out_dir)?;
    let registry = load_registry_or_default(&args.registry)?;
    let spec: SyntheticSpec = serde_json::from_str(
        &fs::read_to_string(&args.spec)
            .with_context(|| format!("cannot read {}", args.spec.display()))?,
    )?;
    let corpus = generate(&spec, &registry)?;
    write_corpus(&args.out_dir, &spec, &corpus)?;
    manifest::write(
        &args.out_dir,
        "synth",
        &[&args.spec],
        &[
            "polls.csv",
            "attributes.csv",
            "reference.json",
            "spec.json",
            "ground_truth.json",
        ],
        serde_json::json!({"n_polls": spec.n_polls, "seed": spec.seed}),
    )?;
    println!(
        "generated {} polls, {} attribute records (ground truth {:.4})",
        corpus.polls.len(),
        corpus.attributes.len(),
        corpus.ground_truth.overall
    );
    Ok(true)
}
