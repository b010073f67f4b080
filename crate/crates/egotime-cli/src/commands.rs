use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use egotime::attribution::{attribute_origin, AttributionReport, DEFAULT_WINDOW};
use egotime::communities::{self, CommunityOptions, DEFAULT_SHUFFLES};
use egotime::egonet::{self, Cohort, DistanceScope, Metric, OriginSplit, TrajectoryOptions};
use egotime::linkpred::{self, EvalOptions, ForestParams, Setting, DEFAULT_FOLDS, DEFAULT_PAIRS};
use egotime::matching::{self, EvalStep, ExperimentOptions, TreatmentFilter, DEFAULT_MIN_ARM, DEFAULT_WINDOW_DAYS};
use egotime::selection::{self, Indicator};
use egotime::sessions::{self, TimeAxis, XMin, DEFAULT_TIMEOUT};
use egotime::synth::{self, RecommenderPolicy, SynthConfig};
use egotime::timegraph::{self, LoadReport};
use egotime::{EdgeRecord, NodeMeta, TimeGraph, DAY};

use crate::config::{parse_k_range, Params};
use crate::output::{csv_writer, opt, sha256_hex, InputDigest, OutDir};
use crate::{Cli, Command, Common, UsageError};

struct Ctx {
    params: Params,
    inputs: BTreeMap<String, InputDigest>,
    out: PathBuf,
    seed: u64,
}

/// An analysis with its parameters resolved.
enum Job {
    Stats {
        at: Option<i64>,
    },
    Trajectories {
        n_max: usize,
        cohorts: Vec<Cohort>,
        opts: TrajectoryOptions,
    },
    Selection {
        n_max: usize,
        cohorts: Vec<Cohort>,
    },
    Sessions {
        timeout: i64,
        size_x_min: Option<u64>,
        window: i64,
        lifespan: i64,
    },
    Communities {
        opts: CommunityOptions,
        n_max: usize,
        k_max: usize,
    },
    Matching {
        ks: Vec<usize>,
        window: i64,
        opts: ExperimentOptions,
    },
    Linkpred {
        task: String,
        at: Option<i64>,
        horizon_days: Option<i64>,
        n_pairs: usize,
        sets: Vec<(String, Vec<linkpred::Feature>)>,
        opts: EvalOptions,
    },
}

const ANALYSES: [&str; 7] = [
    "stats",
    "trajectories",
    "selection",
    "sessions",
    "communities",
    "matching",
    "linkpred",
];

pub fn run(cli: Cli) -> Result<()> {
    let Cli { common, command } = cli;
    let mut params = Params::load(common.config.as_deref())?;
    let threads = params.get("threads", common.threads, 0usize)?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("starting worker pool")?;
    }
    let seed = params.get("seed", common.seed, 0u64)?;
    let out = params
        .get_opt::<String>("out", common.out.as_ref().map(|p| p.display().to_string()))?
        .ok_or_else(|| UsageError::new("missing --out"))?;
    let mut ctx = Ctx {
        params,
        inputs: BTreeMap::new(),
        out: PathBuf::from(out),
        seed,
    };
    let (name, dir) = match command {
        Command::Synth(a) => ("synth", synth_cmd(&mut ctx, a)?),
        Command::Ingest => ("ingest", ingest_cmd(&mut ctx, &common)?),
        Command::Attribute => ("attribute", attribute_cmd(&mut ctx, &common)?),
        Command::Pipeline(a) => {
            let list = ctx
                .params
                .get("analyses", a.analyses, "stats,trajectories,selection,sessions".to_string())?;
            let mut names: Vec<&str> = Vec::new();
            for s in list.split(',').map(str::trim) {
                let Some(&known) = ANALYSES.iter().find(|&&k| k == s) else {
                    return Err(UsageError::new(format!(
                        "analyses: unknown analysis {s:?}; expected any of {}",
                        ANALYSES.join(", ")
                    ))
                    .into());
                };
                if !names.contains(&known) {
                    names.push(known);
                }
            }
            let jobs = names
                .iter()
                .map(|&n| Ok((n, resolve(&mut ctx, default_command(n))?)))
                .collect::<Result<Vec<_>>>()?;
            let g = load(&mut ctx, &common)?;
            let mut dir = start(&ctx)?;
            for (n, job) in &jobs {
                dir.set_prefix(&format!("{n}/"));
                execute(&mut dir, &g, job)?;
            }
            dir.set_prefix("");
            ("pipeline", dir)
        }
        cmd => {
            let name = match &cmd {
                Command::Stats(_) => "stats",
                Command::Trajectories(_) => "trajectories",
                Command::Selection(_) => "selection",
                Command::Sessions(_) => "sessions",
                Command::Communities(_) => "communities",
                Command::Matching(_) => "matching",
                _ => "linkpred",
            };
            let job = resolve(&mut ctx, cmd)?;
            let g = load(&mut ctx, &common)?;
            let mut dir = start(&ctx)?;
            execute(&mut dir, &g, &job)?;
            (name, dir)
        }
    };
    dir.finish(name, ctx.params.resolved(), &ctx.inputs)
}

fn default_command(name: &str) -> Command {
    match name {
        "stats" => Command::Stats(Default::default()),
        "trajectories" => Command::Trajectories(Default::default()),
        "selection" => Command::Selection(Default::default()),
        "sessions" => Command::Sessions(Default::default()),
        "communities" => Command::Communities(Default::default()),
        "matching" => Command::Matching(Default::default()),
        _ => Command::Linkpred(Default::default()),
    }
}

fn resolve(ctx: &mut Ctx, cmd: Command) -> Result<Job> {
    let seed = ctx.seed;
    let p = &mut ctx.params;
    let job = match cmd {
        Command::Stats(a) => Job::Stats {
            at: p.get_opt("at", a.at)?,
        },
        Command::Trajectories(a) => {
            let n_max = p.get("n_max", a.n_max, 100usize)?;
            let cohort = p.choice("cohort", a.cohort, "both", &["all", "reached_n_max", "both"])?;
            let defaults = TrajectoryOptions::default();
            let opts = TrajectoryOptions {
                full_distance_limit: p.get("full_distance_limit", a.full_distance_limit, defaults.full_distance_limit)?,
                distance_ratio: p.get("distance_ratio", a.distance_ratio, defaults.distance_ratio)?,
                scope: match p
                    .choice("distance_scope", a.distance_scope, "connected_pairs", &["connected_pairs", "giant_component"])?
                    .as_str()
                {
                    "giant_component" => DistanceScope::GiantComponent,
                    _ => DistanceScope::ConnectedPairs,
                },
            };
            if !(opts.distance_ratio > 1.0) {
                return Err(UsageError::new("distance_ratio must exceed 1").into());
            }
            Job::Trajectories {
                n_max,
                cohorts: cohorts(&cohort),
                opts,
            }
        }
        Command::Selection(a) => {
            let n_max = p.get("n_max", a.n_max, 100usize)?;
            let cohort = p.choice("cohort", a.cohort, "both", &["all", "reached_n_max", "both"])?;
            Job::Selection {
                n_max,
                cohorts: cohorts(&cohort),
            }
        }
        Command::Sessions(a) => {
            let timeout = p.get("timeout", a.timeout, DEFAULT_TIMEOUT)?;
            let size_x_min = p.get_opt("size_x_min", a.size_x_min)?;
            let window = p.get("early_window_days", a.early_window_days, 100i64)?;
            let lifespan = p.get("min_lifespan_days", a.min_lifespan_days, 180i64)?;
            if timeout <= 0 || window < 0 || lifespan < 0 {
                return Err(UsageError::new("timeout must be positive and day counts non-negative").into());
            }
            Job::Sessions {
                timeout,
                size_x_min,
                window,
                lifespan,
            }
        }
        Command::Communities(a) => {
            let shuffles = p.get("shuffles", a.shuffles, DEFAULT_SHUFFLES)?;
            let n_max = p.get("n_max", a.n_max, 100usize)?;
            let k_max = p.get("k_max", a.k_max, 5usize)?;
            if shuffles < communities::MIN_SHUFFLES {
                return Err(UsageError::new(format!("shuffles must be at least {}", communities::MIN_SHUFFLES)).into());
            }
            Job::Communities {
                opts: CommunityOptions { seed, shuffles },
                n_max,
                k_max,
            }
        }
        Command::Matching(a) => {
            let ks = parse_k_range(&p.get("k", a.k, "1-5".to_string())?)?;
            let window = p.get("window_days", a.window_days, DEFAULT_WINDOW_DAYS)?;
            let opts = ExperimentOptions {
                min_arm: p.get("m", a.m, DEFAULT_MIN_ARM)?,
                eval_step: match p.choice("eval_step", a.eval_step, "next", &["next", "after_next"])?.as_str() {
                    "after_next" => EvalStep::AfterNext,
                    _ => EvalStep::Next,
                },
                downsample: p.get("downsample", a.downsample, true)?,
                treatment_filter: match p
                    .choice("treatment_filter", a.treatment_filter, "any", &["any", "has_cn", "no_cn"])?
                    .as_str()
                {
                    "has_cn" => TreatmentFilter::HasCn,
                    "no_cn" => TreatmentFilter::NoCn,
                    _ => TreatmentFilter::Any,
                },
                seed,
            };
            if window <= 0 || opts.min_arm == 0 {
                return Err(UsageError::new("window_days and m must be positive").into());
            }
            Job::Matching { ks, window, opts }
        }
        Command::Linkpred(a) => {
            let task = p.choice("task", a.task, "future", &["future", "recommended_a", "recommended_b"])?;
            let at = p.get_opt("at", a.at)?;
            let horizon_days = p.get_opt("horizon_days", a.horizon_days)?;
            let n_pairs = p.get("n_pairs", a.n_pairs, DEFAULT_PAIRS)?;
            let folds = p.get("folds", a.folds, DEFAULT_FOLDS)?;
            let trees = p.get("trees", a.trees, ForestParams::default().n_trees)?;
            let sets = p.get(
                "feature_sets",
                a.feature_sets,
                "baseline,baseline+age,baseline+kout,all".to_string(),
            )?;
            let sets = sets
                .split(',')
                .map(|s| {
                    let s = s.trim();
                    linkpred::feature_set(s)
                        .map(|f| (s.to_string(), f))
                        .ok_or_else(|| UsageError::new(format!("unknown feature set {s:?}")))
                })
                .collect::<Result<_, _>>()?;
            if n_pairs < 2 || trees == 0 || folds < 2 {
                return Err(UsageError::new("n_pairs and folds must be at least 2 and trees positive").into());
            }
            if horizon_days.is_some_and(|d| d <= 0) {
                return Err(UsageError::new("horizon_days must be positive").into());
            }
            Job::Linkpred {
                task,
                at,
                horizon_days,
                n_pairs,
                sets,
                opts: EvalOptions {
                    folds,
                    forest: ForestParams {
                        n_trees: trees,
                        ..ForestParams::default()
                    },
                    seed,
                },
            }
        }
        Command::Synth(_) | Command::Ingest | Command::Attribute | Command::Pipeline(_) => {
            unreachable!("not an analysis")
        }
    };
    Ok(job)
}

fn execute(dir: &mut OutDir, g: &TimeGraph, job: &Job) -> Result<()> {
    match job {
        Job::Stats { at } => stats_cmd(dir, g, *at),
        Job::Trajectories { n_max, cohorts, opts } => trajectories_cmd(dir, g, *n_max, cohorts, opts),
        Job::Selection { n_max, cohorts } => selection_cmd(dir, g, *n_max, cohorts),
        Job::Sessions {
            timeout,
            size_x_min,
            window,
            lifespan,
        } => sessions_cmd(dir, g, *timeout, *size_x_min, *window, *lifespan),
        Job::Communities { opts, n_max, k_max } => communities_cmd(dir, g, opts, *n_max, *k_max),
        Job::Matching { ks, window, opts } => matching_cmd(dir, g, ks, *window, opts),
        Job::Linkpred {
            task,
            at,
            horizon_days,
            n_pairs,
            sets,
            opts,
        } => linkpred_cmd(dir, g, task, *at, *horizon_days, *n_pairs, sets, opts),
    }
}

/// Every key any subcommand reads.
const KNOWN_KEYS: &[&str] = &[
    // shared
    "seed", "threads", "out", "edges", "nodes", "impressions", "window_secs", "dedup",
    // synth
    "n_egos", "start", "horizon_days", "registration_span_days", "daily_cap", "max_out_degree",
    "batch_size_gamma", "batch_size_max", "gap_gamma", "gap_min_hours", "gap_cutoff_hours", "w_pa",
    "w_triadic", "w_community", "w_uniform", "community_size", "open_fraction", "quotas",
    "recommender", "rho", "policy", "age_scale_days",
    // analyses
    "analyses", "at", "n_max", "cohort", "full_distance_limit", "distance_ratio", "distance_scope",
    "timeout", "size_x_min", "early_window_days", "min_lifespan_days", "shuffles", "k_max", "k",
    "window_days", "m", "eval_step", "downsample", "treatment_filter", "task", "n_pairs", "folds",
    "trees", "feature_sets",
];

/// Validates leftover config keys and opens the output directory.
fn start(ctx: &Ctx) -> Result<OutDir> {
    let unused = ctx.params.finish(KNOWN_KEYS)?;
    if !unused.is_empty() {
        eprintln!("note: config keys not used by this subcommand: {}", unused.join(", "));
    }
    OutDir::create(&ctx.out)
}

fn cohorts(name: &str) -> Vec<Cohort> {
    match name {
        "all" => vec![Cohort::All],
        "reached_n_max" => vec![Cohort::ReachedNMax],
        _ => vec![Cohort::All, Cohort::ReachedNMax],
    }
}

fn cohort_name(c: Cohort) -> &'static str {
    match c {
        Cohort::All => "all",
        Cohort::ReachedNMax => "reached_n_max",
    }
}

const SPLITS: [(OriginSplit, &str); 3] = [
    (OriginSplit::All, "all"),
    (OriginSplit::Spontaneous, "spontaneous"),
    (OriginSplit::Recommended, "recommended"),
];

fn read_input(ctx: &mut Ctx, key: &str, path: &Path) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|e| UsageError::new(format!("cannot read {key} file {}: {e}", path.display())))?;
    ctx.inputs.insert(
        key.to_string(),
        InputDigest {
            path: path.display().to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(&bytes),
        },
    );
    Ok(bytes)
}

fn path_param(ctx: &mut Ctx, key: &str, flag: &Option<PathBuf>) -> Result<Option<PathBuf>> {
    Ok(ctx
        .params
        .get_opt::<String>(key, flag.as_ref().map(|p| p.display().to_string()))?
        .map(PathBuf::from))
}

struct Records {
    edges: Vec<EdgeRecord>,
    nodes: Vec<NodeMeta>,
    attribution: Option<(AttributionReport, Vec<u64>)>,
    dedup: bool,
}

fn read_records(ctx: &mut Ctx, common: &Common, require_impressions: bool) -> Result<Records> {
    let edges_path = path_param(ctx, "edges", &common.edges)?.ok_or_else(|| UsageError::new("missing --edges"))?;
    let nodes_path = path_param(ctx, "nodes", &common.nodes)?;
    let imp_path = path_param(ctx, "impressions", &common.impressions)?;
    let window = ctx.params.get("window_secs", common.window_secs, DEFAULT_WINDOW)?;
    let dedup = ctx.params.get("dedup", common.dedup, true)?;
    if window < 0 {
        return Err(UsageError::new("window_secs must be non-negative").into());
    }
    if require_impressions && imp_path.is_none() {
        return Err(UsageError::new("missing --impressions").into());
    }
    let bytes = read_input(ctx, "edges", &edges_path)?;
    let mut edges = timegraph::read_edges(&bytes[..])
        .map_err(|e| UsageError::new(format!("{}: {e}", edges_path.display())))?;
    let nodes = match nodes_path {
        Some(p) => {
            let bytes = read_input(ctx, "nodes", &p)?;
            timegraph::read_nodes(&bytes[..]).map_err(|e| UsageError::new(format!("{}: {e}", p.display())))?
        }
        None => Vec::new(),
    };
    let attribution = match imp_path {
        Some(p) => {
            let bytes = read_input(ctx, "impressions", &p)?;
            let read = timegraph::read_impressions(&bytes[..])
                .map_err(|e| UsageError::new(format!("{}: {e}", p.display())))?;
            if !read.skipped_lines.is_empty() {
                eprintln!("warning: skipped {} malformed impression rows", read.skipped_lines.len());
            }
            let report = attribute_origin(&mut edges, &read.impressions, window);
            Some((report, read.skipped_lines))
        }
        None => None,
    };
    Ok(Records {
        edges,
        nodes,
        attribution,
        dedup,
    })
}

fn build(records: Records) -> Result<(TimeGraph, LoadReport)> {
    TimeGraph::load(records.edges, records.nodes, records.dedup).map_err(|e| UsageError::new(e.to_string()).into())
}

fn load(ctx: &mut Ctx, common: &Common) -> Result<TimeGraph> {
    let records = read_records(ctx, common, false)?;
    Ok(build(records)?.0)
}

fn synth_cmd(ctx: &mut Ctx, a: crate::SynthArgs) -> Result<OutDir> {
    let d = SynthConfig::default();
    let p = &mut ctx.params;
    let mut cfg = SynthConfig {
        n_egos: p.get("n_egos", a.n_egos, d.n_egos)?,
        start: p.get("start", a.start, d.start)?,
        horizon_days: p.get("horizon_days", a.horizon_days, d.horizon_days)?,
        registration_span_days: p.get("registration_span_days", a.registration_span_days, d.registration_span_days)?,
        daily_cap: p.get("daily_cap", a.daily_cap, d.daily_cap)?,
        max_out_degree: p.get("max_out_degree", a.max_out_degree, d.max_out_degree)?,
        seed: ctx.seed,
        ..d.clone()
    };
    let s = &mut cfg.sessions;
    s.batch_size_gamma = p.get("batch_size_gamma", a.batch_size_gamma, s.batch_size_gamma)?;
    s.batch_size_max = p.get("batch_size_max", a.batch_size_max, s.batch_size_max)?;
    s.gap_gamma = p.get("gap_gamma", a.gap_gamma, s.gap_gamma)?;
    s.gap_min_hours = p.get("gap_min_hours", a.gap_min_hours, s.gap_min_hours)?;
    s.gap_cutoff_hours = p.get("gap_cutoff_hours", a.gap_cutoff_hours, s.gap_cutoff_hours)?;
    let m = &mut cfg.mix;
    m.preferential = p.get("w_pa", a.w_pa, m.preferential)?;
    m.triadic = p.get("w_triadic", a.w_triadic, m.triadic)?;
    m.community = p.get("w_community", a.w_community, m.community)?;
    m.uniform = p.get("w_uniform", a.w_uniform, m.uniform)?;
    let c = &mut cfg.communities;
    c.community_size = p.get("community_size", a.community_size, c.community_size)?;
    c.open_fraction = p.get("open_fraction", a.open_fraction, c.open_fraction)?;
    let default_quotas = c.quotas.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(",");
    let quotas = p.get("quotas", a.quotas, default_quotas)?;
    c.quotas = quotas
        .split(',')
        .map(|q| q.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| UsageError::new(format!("quotas: cannot parse {quotas:?}")))?;
    let r = &mut cfg.recommender;
    r.enabled = p.get("recommender", a.recommender, r.enabled)?;
    r.probability = p.get("rho", a.rho, r.probability)?;
    r.policy = match p.choice("policy", a.policy, "max_cn_fof", &["max_cn_fof", "uniform"])?.as_str() {
        "uniform" => RecommenderPolicy::Uniform,
        _ => RecommenderPolicy::MaxCnFof,
    };
    let age = p.get("age_scale_days", a.age_scale_days, d.age_scale_days.unwrap_or(0.0))?;
    cfg.age_scale_days = (age != 0.0).then_some(age);
    cfg.validate().map_err(|e| UsageError::new(e.to_string()))?;
    let mut dir = start(ctx)?;
    let out = synth::generate(&cfg)?;
    dir.write_with("edges.csv", |b| Ok(timegraph::write_edges(b, &out.edges)?))?;
    dir.write_with("nodes.csv", |b| Ok(timegraph::write_nodes(b, &out.nodes)?))?;
    dir.write_json("truth.json", &out.truth)?;
    dir.write_json("oracle.json", &synth::oracle_report(&out))?;
    Ok(dir)
}

fn ingest_cmd(ctx: &mut Ctx, common: &Common) -> Result<OutDir> {
    let records = read_records(ctx, common, false)?;
    let attribution = records.attribution.clone();
    let (g, report) = build(records)?;
    let mut dir = start(ctx)?;
    let edges: Vec<EdgeRecord> = g
        .edges()
        .iter()
        .enumerate()
        .map(|(k, e)| EdgeRecord {
            seq: k as u64,
            ..EdgeRecord::new(g.label(e.src), g.label(e.dst), e.created_at).with_origin(e.origin)
        })
        .collect();
    let nodes: Vec<NodeMeta> = g
        .nodes()
        .map(|n| NodeMeta {
            node: g.label(n).to_string(),
            registered_at: g.registered_at(n),
        })
        .collect();
    dir.write_with("edges.csv", |b| Ok(timegraph::write_edges(b, &edges)?))?;
    dir.write_with("nodes.csv", |b| Ok(timegraph::write_nodes(b, &nodes)?))?;
    #[derive(Serialize)]
    struct Ingest {
        nodes: usize,
        edges: usize,
        load: LoadReport,
        attribution: Option<AttributionReport>,
        skipped_impression_lines: Vec<u64>,
    }
    let (attribution, skipped) = match attribution {
        Some((r, s)) => (Some(r), s),
        None => (None, Vec::new()),
    };
    dir.write_json(
        "ingest.json",
        &Ingest {
            nodes: g.node_count(),
            edges: g.edge_count(),
            load: report,
            attribution,
            skipped_impression_lines: skipped,
        },
    )?;
    Ok(dir)
}

fn attribute_cmd(ctx: &mut Ctx, common: &Common) -> Result<OutDir> {
    let records = read_records(ctx, common, true)?;
    let mut dir = start(ctx)?;
    let (report, skipped) = records.attribution.clone().expect("impressions required");
    dir.write_with("edges.csv", |b| Ok(timegraph::write_edges(b, &records.edges)?))?;
    #[derive(Serialize)]
    struct Attribution {
        #[serde(flatten)]
        report: AttributionReport,
        skipped_impression_lines: Vec<u64>,
    }
    dir.write_json(
        "attribution.json",
        &Attribution {
            report,
            skipped_impression_lines: skipped,
        },
    )?;
    Ok(dir)
}

fn stats_cmd(dir: &mut OutDir, g: &TimeGraph, at: Option<i64>) -> Result<()> {
    let t = at.or_else(|| g.time_span().map(|s| s.1)).unwrap_or(0);
    dir.write_json("degree_stats.json", &timegraph::degree_stats(g, t))?;
    dir.write_with("timeline.csv", |b| {
        let mut w = csv_writer(b);
        w.write_record(["day", "date", "links", "triangle_closing", "recommended", "unknown"])?;
        for r in timegraph::daily_timeline(g) {
            w.write_record([
                r.day.to_string(),
                r.date,
                r.links.to_string(),
                r.triangle_closing.to_string(),
                r.recommended.to_string(),
                r.unknown.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })
}

fn write_aggregate_header(w: &mut csv::Writer<&mut Vec<u8>>, first: &str) -> csv::Result<()> {
    w.write_record([first, "cohort", "origin", "n", "mean", "lo", "hi", "count"])
}

fn trajectories_cmd(
    dir: &mut OutDir,
    g: &TimeGraph,
    n_max: usize,
    cohorts: &[Cohort],
    opts: &TrajectoryOptions,
) -> Result<()> {
    let trajs = egonet::trajectories(g, opts);
    dir.write_with("trajectories.csv", |b| {
        let mut w = csv_writer(b);
        w.write_record([
            "ego",
            "n",
            "added_node",
            "added_at",
            "origin",
            "edges",
            "gcc_ratio",
            "n_components",
            "net_distance",
            "spawned_new_component",
            "distance_delta",
        ])?;
        for t in &trajs {
            for s in &t.steps {
                w.write_record([
                    g.label(t.ego).to_string(),
                    s.n.to_string(),
                    g.label(s.added_node).to_string(),
                    s.added_at.to_string(),
                    s.origin.code().to_string(),
                    s.edges.to_string(),
                    s.gcc_ratio.to_string(),
                    s.n_components.to_string(),
                    opt(s.net_distance),
                    s.spawned_new_component.to_string(),
                    opt(s.distance_delta),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    })?;
    let mut empty = Vec::new();
    dir.write_with("aggregate.csv", |b| {
        let mut w = csv_writer(b);
        write_aggregate_header(&mut w, "metric")?;
        for metric in Metric::ALL {
            for &cohort in cohorts {
                for (split, split_name) in SPLITS {
                    let rows = match egonet::aggregate_trajectories_split(&trajs, metric, n_max, cohort, split) {
                        Ok(rows) => rows,
                        Err(_) => {
                            empty.push(format!("{}/{}/{}", metric.name(), cohort_name(cohort), split_name));
                            continue;
                        }
                    };
                    for r in rows {
                        w.write_record([
                            metric.name().to_string(),
                            cohort_name(cohort).to_string(),
                            split_name.to_string(),
                            r.n.to_string(),
                            r.value.mean.to_string(),
                            r.value.lo.to_string(),
                            r.value.hi.to_string(),
                            r.value.n.to_string(),
                        ])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    })?;
    dir.write_with("spawn.csv", |b| {
        let mut w = csv_writer(b);
        w.write_record(["n", "spontaneous_hits", "spontaneous_total", "recommended_hits", "recommended_total"])?;
        for r in egonet::spawn_probability_by_origin(&trajs) {
            w.write_record([
                r.n.to_string(),
                r.spontaneous.hits.to_string(),
                r.spontaneous.total.to_string(),
                r.recommended.hits.to_string(),
                r.recommended.total.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    #[derive(Serialize)]
    struct Summary {
        egos: usize,
        n_max: usize,
        densification: Option<egonet::DensificationFit>,
        densification_error: Option<String>,
        empty_cohorts: Vec<String>,
    }
    let fit = egonet::densification_fit(&trajs);
    dir.write_json(
        "summary.json",
        &Summary {
            egos: trajs.len(),
            n_max,
            densification_error: fit.as_ref().err().map(|e| e.to_string()),
            densification: fit.ok(),
            empty_cohorts: empty,
        },
    )
}

fn selection_cmd(dir: &mut OutDir, g: &TimeGraph, n_max: usize, cohorts: &[Cohort]) -> Result<()> {
    let rows = selection::selection_table(g, &selection::all_egos(g));
    dir.write_with("selection.csv", |b| {
        let mut w = csv_writer(b);
        w.write_record([
            "ego",
            "n",
            "alter",
            "added_at",
            "origin",
            "cn",
            "jaccard",
            "pa",
            "alter_indegree",
            "ego_outdegree",
        ])?;
        for r in &rows {
            let s = &r.indicators;
            w.write_record([
                g.label(r.ego).to_string(),
                r.n.to_string(),
                g.label(r.alter).to_string(),
                r.added_at.to_string(),
                r.origin.code().to_string(),
                s.cn.to_string(),
                s.jaccard.to_string(),
                s.pa.to_string(),
                s.alter_indegree.to_string(),
                s.ego_outdegree.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    dir.write_with("profile.csv", |b| {
        let mut w = csv_writer(b);
        write_aggregate_header(&mut w, "indicator")?;
        for ind in Indicator::ALL {
            for &cohort in cohorts {
                for (split, split_name) in SPLITS {
                    let Ok(profile) = selection::indicator_profile(&rows, ind, n_max, cohort, split) else {
                        continue;
                    };
                    for r in profile {
                        w.write_record([
                            ind.name().to_string(),
                            cohort_name(cohort).to_string(),
                            split_name.to_string(),
                            r.n.to_string(),
                            r.value.mean.to_string(),
                            r.value.lo.to_string(),
                            r.value.hi.to_string(),
                            r.value.n.to_string(),
                        ])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    })?;
    let rows = &rows;
    let dists: BTreeMap<String, _> = Indicator::ALL
        .iter()
        .flat_map(|&ind| {
            SPLITS.iter().map(move |&(split, name)| {
                (
                    format!("{}/{}", ind.name(), name),
                    selection::indicator_distribution(rows, ind, split),
                )
            })
        })
        .collect();
    dir.write_json("distributions.json", &dists)
}

fn sessions_cmd(
    dir: &mut OutDir,
    g: &TimeGraph,
    timeout: i64,
    size_x_min: Option<u64>,
    window: i64,
    lifespan: i64,
) -> Result<()> {
    let batches = sessions::graph_batches(g, timeout);
    dir.write_with("batches.csv", |b| Ok(sessions::write_batches(g, &batches, b)?))?;
    dir.write_json("summary.json", &sessions::batch_summary(&batches, true))?;

    #[derive(Serialize)]
    struct FitOutcome {
        fit: Option<sessions::PowerLawFit>,
        error: Option<String>,
    }
    let outcome = |r: Result<sessions::PowerLawFit, sessions::FitError>| match r {
        Ok(fit) => FitOutcome {
            fit: Some(fit),
            error: None,
        },
        Err(e) => FitOutcome {
            fit: None,
            error: Some(e.to_string()),
        },
    };
    let sizes: Vec<u64> = batches.iter().map(|b| b.size as u64).collect();
    let taus = sessions::tau_hours_binned(&batches);
    let tau_cont: Vec<f64> = batches.iter().filter_map(|b| b.tau_hours).collect();
    let x_min = size_x_min.map_or(XMin::Auto, XMin::Fixed);
    let fits: BTreeMap<&str, FitOutcome> = [
        ("batch_size", outcome(sessions::fit_power_law(&sizes, x_min))),
        ("interarrival_hours", outcome(sessions::fit_power_law(&taus, XMin::Auto))),
        (
            "interarrival_hours_continuous",
            outcome(sessions::fit_power_law_continuous(&tau_cont, None)),
        ),
    ]
    .into_iter()
    .collect();
    dir.write_json("fit.json", &fits)?;

    for (axis, name) in [(TimeAxis::BatchIndex, "batch_index"), (TimeAxis::EgoAgeDays, "ego_age_days")] {
        let points = sessions::batch_size_vs_time(&batches, axis, Some(g));
        dir.write_with(&format!("size_vs_{name}.csv"), |b| {
            let mut w = csv_writer(b);
            w.write_record([name, "mean", "lo", "hi", "count"])?;
            for p in points {
                w.write_record([
                    p.x.to_string(),
                    p.size.mean.to_string(),
                    p.size.lo.to_string(),
                    p.size.hi.to_string(),
                    p.size.n.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        })?;
    }
    match sessions::early_life_fraction(g, window, lifespan) {
        Ok(early) => dir.write_with("early_life.csv", |b| {
            let mut w = csv_writer(b);
            w.write_record(["day", "mean", "lo", "hi", "egos"])?;
            for r in early.rows {
                w.write_record([
                    r.day.to_string(),
                    r.fraction.mean.to_string(),
                    r.fraction.lo.to_string(),
                    r.fraction.hi.to_string(),
                    r.fraction.n.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        })?,
        Err(e) => eprintln!("warning: early-life fraction skipped: {e}"),
    }
    Ok(())
}

fn communities_cmd(dir: &mut OutDir, g: &TimeGraph, opts: &CommunityOptions, n_max: usize, k_max: usize) -> Result<()> {
    let results = communities::analyze_communities(g, &selection::all_egos(g), opts);
    dir.write_with("ranks.csv", |b| Ok(communities::write_rank_rows(g, &results, b)?))?;
    dir.write_json("summary.json", &communities::summaries(g, &results))?;
    let seqs: Vec<&[usize]> = results.iter().map(|r| r.sequence.ranks.as_slice()).collect();
    dir.write_with("likelihood.csv", |b| {
        let mut w = csv_writer(b);
        w.write_record(["n", "k", "sequences", "observed", "null", "ratio", "ratio_lo", "ratio_hi"])?;
        for c in communities::membership_likelihood(&seqs, n_max, k_max) {
            w.write_record([
                c.n.to_string(),
                c.k.to_string(),
                c.sequences.to_string(),
                c.observed.to_string(),
                c.null.to_string(),
                c.ratio.to_string(),
                c.ratio_lo.to_string(),
                c.ratio_hi.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    dir.write_with("size_by_rank.csv", |b| {
        let mut w = csv_writer(b);
        w.write_record(["rank", "mean", "lo", "hi", "count"])?;
        for r in communities::size_by_rank(&seqs, k_max) {
            w.write_record([
                r.rank.to_string(),
                r.size.mean.to_string(),
                r.size.lo.to_string(),
                r.size.hi.to_string(),
                r.size.n.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })
}

fn matching_cmd(dir: &mut OutDir, g: &TimeGraph, ks: &[usize], window: i64, opts: &ExperimentOptions) -> Result<()> {
    #[derive(Serialize)]
    struct KReport {
        k: usize,
        n_groups: usize,
        skipped_groups: usize,
        mean_entropy_treatment: f64,
        mean_entropy_control: f64,
        ci_treatment: [f64; 2],
        ci_control: [f64; 2],
        difference: f64,
        ci_difference: [f64; 2],
        options: ExperimentOptions,
    }
    #[derive(Serialize)]
    struct Report {
        window_days: i64,
        reports: Vec<KReport>,
        missing_k: Vec<usize>,
    }
    let mut reports = Vec::new();
    let mut missing_k = Vec::new();
    for &k in ks {
        let groups = matching::build_groups(g, k, window);
        match matching::run_experiment(&groups, k, opts) {
            Some(r) => reports.push(KReport {
                k,
                n_groups: r.n_groups,
                skipped_groups: r.skipped_groups,
                mean_entropy_treatment: r.mean_entropy_treatment.mean,
                mean_entropy_control: r.mean_entropy_control.mean,
                ci_treatment: [r.mean_entropy_treatment.lo, r.mean_entropy_treatment.hi],
                ci_control: [r.mean_entropy_control.lo, r.mean_entropy_control.hi],
                difference: r.difference.mean,
                ci_difference: [r.difference.lo, r.difference.hi],
                options: r.options,
            }),
            None => {
                eprintln!("warning: no qualifying matching group for k = {k}");
                missing_k.push(k);
            }
        }
    }
    dir.write_json(
        "matching.json",
        &Report {
            window_days: window,
            reports,
            missing_k,
        },
    )
}

#[allow(clippy::too_many_arguments)]
fn linkpred_cmd(
    dir: &mut OutDir,
    g: &TimeGraph,
    task: &str,
    at: Option<i64>,
    horizon_days: Option<i64>,
    n_pairs: usize,
    sets: &[(String, Vec<linkpred::Feature>)],
    opts: &EvalOptions,
) -> Result<()> {
    let edges = g.edges();
    if edges.is_empty() {
        return Err(UsageError::new("the edge file is empty").into());
    }
    let t = at.unwrap_or(edges[(edges.len() - 1) / 2].created_at);
    let horizon = match horizon_days {
        Some(d) => t + d * DAY,
        None => edges[edges.len() - 1].created_at,
    };
    let rows = match task {
        "future" => linkpred::sample_pairs(g, t, horizon, n_pairs, opts.seed)?,
        "recommended_a" => linkpred::sample_pairs_recommended(g, t, n_pairs / 2, Setting::A, opts.seed)?,
        _ => linkpred::sample_pairs_recommended(g, t, n_pairs / 2, Setting::B, opts.seed)?,
    };
    dir.write_with("dataset.csv", |b| Ok(linkpred::write_rows(g, &rows, b)?))?;
    let mut reports = BTreeMap::new();
    for (name, features) in sets {
        reports.insert(name.clone(), linkpred::train_eval(&rows, features, opts)?);
    }
    #[derive(Serialize)]
    struct Report<'a> {
        task: &'a str,
        snapshot: i64,
        horizon: i64,
        reports: BTreeMap<String, linkpred::EvalReport>,
    }
    dir.write_json(
        "report.json",
        &Report {
            task,
            snapshot: t,
            horizon,
            reports,
        },
    )
}
