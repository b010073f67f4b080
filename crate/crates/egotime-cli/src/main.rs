//! `egotime` command-line entry point.
//!
//! Exit codes: 0 on success, 2 for usage errors (unknown subcommand, bad
//! flags or config, missing or unreadable input), 1 for anything else.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// An error caused by the invocation rather than by the analysis.
#[derive(Debug)]
pub struct UsageError(String);

impl UsageError {
    pub fn new(msg: impl Into<String>) -> Self {
        UsageError(msg.into())
    }
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "egotime", version, about = "Temporal ego-network analytics")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand. Each can also be set in the config
/// file under the same name.
#[derive(Args, Debug, Default)]
pub struct Common {
    /// Flat `key = value` file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Edge file: src,dst,created_at[,origin].
    #[arg(long, global = true)]
    pub edges: Option<PathBuf>,
    /// Node file: node,registered_at.
    #[arg(long, global = true)]
    pub nodes: Option<PathBuf>,
    /// Impression file: user,candidate,shown_at. Sets every edge's origin.
    #[arg(long, global = true)]
    pub impressions: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Attribution window in seconds.
    #[arg(long, global = true)]
    pub window_secs: Option<i64>,
    /// Collapse repeat follows into the earliest.
    #[arg(long, global = true)]
    pub dedup: Option<bool>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic graph with ground truth.
    Synth(SynthArgs),
    /// Validate and normalize input files.
    Ingest,
    /// Tag edges as recommended or spontaneous from impressions.
    Attribute,
    /// Degree distributions and the daily link timeline.
    Stats(StatsArgs),
    /// Ego-network growth trajectories and their aggregates.
    Trajectories(TrajectoryArgs),
    /// Popularity and similarity of each new neighbor.
    Selection(SelectionArgs),
    /// Link-creation sessions and early-life activity.
    Sessions(SessionArgs),
    /// Community exploration order within final ego-networks.
    Communities(CommunityArgs),
    /// Matched-cohort diversity experiment.
    Matching(MatchingArgs),
    /// Link prediction datasets and cross-validated forests.
    Linkpred(LinkpredArgs),
    /// Several analyses over one loaded graph, each in its own subdirectory.
    /// Per-analysis parameters come from the config file.
    Pipeline(PipelineArgs),
}

#[derive(Args, Debug, Default)]
pub struct SynthArgs {
    #[arg(long)]
    pub n_egos: Option<usize>,
    #[arg(long)]
    pub horizon_days: Option<i64>,
    #[arg(long)]
    pub registration_span_days: Option<i64>,
    #[arg(long)]
    pub start: Option<i64>,
    #[arg(long)]
    pub batch_size_gamma: Option<f64>,
    #[arg(long)]
    pub batch_size_max: Option<usize>,
    #[arg(long)]
    pub gap_gamma: Option<f64>,
    #[arg(long)]
    pub gap_min_hours: Option<f64>,
    #[arg(long)]
    pub gap_cutoff_hours: Option<f64>,
    #[arg(long)]
    pub w_pa: Option<f64>,
    #[arg(long)]
    pub w_triadic: Option<f64>,
    #[arg(long)]
    pub w_community: Option<f64>,
    #[arg(long)]
    pub w_uniform: Option<f64>,
    #[arg(long)]
    pub community_size: Option<usize>,
    /// Comma-separated links per opened community.
    #[arg(long)]
    pub quotas: Option<String>,
    #[arg(long)]
    pub open_fraction: Option<f64>,
    #[arg(long)]
    pub recommender: Option<bool>,
    /// Recommender probability per addition.
    #[arg(long)]
    pub rho: Option<f64>,
    /// max_cn_fof or uniform.
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub daily_cap: Option<usize>,
    #[arg(long)]
    pub max_out_degree: Option<usize>,
    /// Days; 0 disables gap stretching with age.
    #[arg(long)]
    pub age_scale_days: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct StatsArgs {
    /// Snapshot time for degree statistics; defaults to the last edge.
    #[arg(long)]
    pub at: Option<i64>,
}

#[derive(Args, Debug, Default)]
pub struct TrajectoryArgs {
    #[arg(long)]
    pub n_max: Option<usize>,
    /// all, reached_n_max or both.
    #[arg(long)]
    pub cohort: Option<String>,
    #[arg(long)]
    pub full_distance_limit: Option<usize>,
    #[arg(long)]
    pub distance_ratio: Option<f64>,
    /// connected_pairs or giant_component.
    #[arg(long)]
    pub distance_scope: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct SelectionArgs {
    #[arg(long)]
    pub n_max: Option<usize>,
    /// all, reached_n_max or both.
    #[arg(long)]
    pub cohort: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct SessionArgs {
    /// Seconds.
    #[arg(long)]
    pub timeout: Option<i64>,
    /// Fixed x_min for the batch-size fit; automatic when absent.
    #[arg(long)]
    pub size_x_min: Option<u64>,
    #[arg(long)]
    pub early_window_days: Option<i64>,
    #[arg(long)]
    pub min_lifespan_days: Option<i64>,
}

#[derive(Args, Debug, Default)]
pub struct CommunityArgs {
    #[arg(long)]
    pub shuffles: Option<usize>,
    /// Longest position for membership likelihood.
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Highest rank for membership likelihood and size by rank.
    #[arg(long)]
    pub k_max: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct MatchingArgs {
    /// Prefix lengths, e.g. 1-5 or 1,3.
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub window_days: Option<i64>,
    /// Minimum size of each arm.
    #[arg(long)]
    pub m: Option<usize>,
    /// next or after_next.
    #[arg(long)]
    pub eval_step: Option<String>,
    #[arg(long)]
    pub downsample: Option<bool>,
    /// any, has_cn or no_cn.
    #[arg(long)]
    pub treatment_filter: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct LinkpredArgs {
    /// future, recommended_a or recommended_b.
    #[arg(long)]
    pub task: Option<String>,
    /// Snapshot time; defaults to the median edge time.
    #[arg(long)]
    pub at: Option<i64>,
    /// Positive window after the snapshot; defaults to the end of the data.
    #[arg(long)]
    pub horizon_days: Option<i64>,
    #[arg(long)]
    pub n_pairs: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub trees: Option<usize>,
    /// Comma-separated feature sets: baseline, baseline+age, baseline+kout, all.
    #[arg(long)]
    pub feature_sets: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct PipelineArgs {
    /// Comma-separated analyses; defaults to stats,trajectories,selection,sessions.
    #[arg(long)]
    pub analyses: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
