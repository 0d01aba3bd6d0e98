//! Multi-seed experiment runner: configuration, job execution, aggregation
//! and the files written to the output directory.

use std::cmp::Ordering;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use envshape_core::rng::{stream, OFFLINE_DATA, OFFLINE_SPLIT, ONLINE_RUN};
use envshape_core::{
    collect_dataset, compute_envelopes, compute_q_bound, envelope_report, generate_mdp, pair_eff,
    run_learner, solve_optimal, Algorithm, LayeredMdp, MdpGenSpec, OfflineConfig, OnlineConfig,
    QBoundInputs, RewardMode, StochasticPolicy, ValueEnvelope,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::formats::{self, GenSpecFile};
use crate::plot::{self, Chart, Series};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Regret of the shaped learners as the offline dataset grows.
    KSweep,
    /// Last-step rewards in `[1 - x, 1]`.
    ExpandingRange,
    /// Last-step rewards in `[x, x + window]`.
    SlidingRange,
    /// One dataset size, every configured algorithm.
    SingleRun,
}

impl ExperimentKind {
    pub fn tag(self) -> &'static str {
        match self {
            Self::KSweep => "k-sweep",
            Self::ExpandingRange => "expanding-range",
            Self::SlidingRange => "sliding-range",
            Self::SingleRun => "single-run",
        }
    }

    fn is_range(self) -> bool {
        matches!(self, Self::ExpandingRange | Self::SlidingRange)
    }

    /// What the `parameter` column holds.
    pub fn parameter_name(self) -> &'static str {
        if self.is_range() {
            "x"
        } else {
            "K"
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    /// Generator spec. The k-sweep replaces its seed by the replicate seed;
    /// range experiments replace its last-step reward range.
    pub mdp: GenSpecFile,
    /// A fixed model file used for every seed instead of the generator.
    pub mdp_file: Option<PathBuf>,
    pub algorithms: Vec<Algorithm>,
    /// Dataset sizes of the k-sweep.
    pub k_values: Vec<usize>,
    /// Dataset size of the other experiments.
    pub k: usize,
    pub x_grid: Vec<f64>,
    /// Reward-range width of the sliding-range experiment.
    pub window: f64,
    pub episodes: usize,
    pub delta: f64,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub jobs: usize,
    /// Episodes kept in each per-run trace file (the last one always is).
    pub trace_points: usize,
}

/// `n` evenly spaced points from `lo` to `hi` inclusive, rounded to nine
/// decimals so grid labels stay short.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let round = |v: f64| (v * 1e9).round() / 1e9;
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| round(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .collect(),
    }
}

impl ExperimentConfig {
    /// Desk-scale defaults for each experiment.
    pub fn preset(kind: ExperimentKind) -> Self {
        let mut cfg = Self {
            schema_version: CONFIG_VERSION,
            experiment: kind,
            mdp: GenSpecFile::default(),
            mdp_file: None,
            algorithms: vec![Algorithm::Ucbvi, Algorithm::QShaping, Algorithm::VShaping],
            k_values: vec![250, 1000, 4000, 16000],
            k: 6000,
            x_grid: Vec::new(),
            window: 0.1,
            episodes: 100_000,
            delta: 0.1,
            seeds: (0..4).collect(),
            out_dir: PathBuf::from(format!("out/{}", kind.tag())),
            jobs: 1,
            trace_points: 200,
        };
        match kind {
            ExperimentKind::KSweep => {}
            ExperimentKind::ExpandingRange | ExperimentKind::SlidingRange => {
                cfg.mdp = GenSpecFile::from(&MdpGenSpec {
                    horizon: 3,
                    intermediate_rewards: RewardMode::Zero,
                    seed: 7,
                    ..Default::default()
                });
                cfg.algorithms = vec![Algorithm::Ucbvi, Algorithm::QShaping, Algorithm::UpperBonus];
                cfg.seeds = (0..10).collect();
                cfg.x_grid = if kind == ExperimentKind::ExpandingRange {
                    linspace(0.05, 1.0, 11)
                } else {
                    linspace(0.0, 0.9, 11)
                };
            }
            ExperimentKind::SingleRun => {
                cfg.algorithms = Algorithm::ALL.to_vec();
                cfg.episodes = 10_000;
                cfg.seeds = vec![0];
            }
        }
        cfg
    }

    /// Parses a config; keys left out take the preset of its experiment.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let given: Value = serde_json::from_str(text).context("config is not valid JSON")?;
        let Value::Object(given) = given else {
            bail!("config must be a JSON object");
        };
        let kind: ExperimentKind = serde_json::from_value(
            given
                .get("experiment")
                .cloned()
                .context("config needs an `experiment` field")?,
        )
        .context("unknown experiment tag")?;
        let Value::Object(mut merged) = serde_json::to_value(Self::preset(kind))? else {
            unreachable!("a struct serializes to an object")
        };
        for (key, value) in given {
            match (merged.get_mut(&key), value) {
                (Some(Value::Object(base)), Value::Object(over)) => base.extend(over),
                (_, value) => {
                    merged.insert(key, value);
                }
            }
        }
        let cfg: Self = serde_json::from_value(Value::Object(merged))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json_str(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.schema_version == CONFIG_VERSION,
            "unsupported config schema_version {}",
            self.schema_version
        );
        ensure!(!self.seeds.is_empty(), "seed list is empty");
        ensure!(!self.algorithms.is_empty(), "algorithm list is empty");
        ensure!(self.jobs >= 1, "jobs must be at least 1");
        ensure!(
            self.delta > 0.0 && self.delta < 1.0,
            "delta must lie in (0, 1)"
        );
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        ensure!(seeds.len() == self.seeds.len(), "seed list has duplicates");
        let mut algs = self.algorithms.clone();
        algs.sort_unstable();
        algs.dedup();
        ensure!(
            algs.len() == self.algorithms.len(),
            "algorithm list has duplicates"
        );
        self.mdp.to_spec()?;
        let horizon = self.mdp.horizon;
        let dataset_sizes: &[usize] = match self.experiment {
            ExperimentKind::KSweep => {
                ensure!(!self.k_values.is_empty(), "k-sweep needs k_values");
                &self.k_values
            }
            _ => std::slice::from_ref(&self.k),
        };
        if self.mdp_file.is_none() && self.algorithms.iter().any(|a| a.needs_envelope()) {
            for &k in dataset_sizes {
                ensure!(
                    k >= horizon,
                    "dataset size {k} is smaller than the horizon {horizon}"
                );
            }
        }
        let mut ks = self.k_values.clone();
        ks.sort_unstable();
        ks.dedup();
        ensure!(ks.len() == self.k_values.len(), "k_values has duplicates");
        if self.experiment.is_range() {
            ensure!(
                self.mdp_file.is_none(),
                "range experiments generate their models; mdp_file is not allowed"
            );
            ensure!(!self.x_grid.is_empty(), "range experiments need an x_grid");
            if self.experiment == ExperimentKind::SlidingRange {
                ensure!(
                    self.window > 0.0 && self.window < 1.0,
                    "window must lie in (0, 1)"
                );
            }
            for &x in &self.x_grid {
                let (r1, r2) = self.reward_range(x);
                ensure!(
                    x.is_finite() && 0.0 <= r1 && r1 <= r2 && r2 <= 1.0,
                    "grid value {x} gives reward range [{r1}, {r2}] outside [0, 1]"
                );
            }
            let mut grid = self.x_grid.clone();
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            ensure!(grid.len() == self.x_grid.len(), "x_grid has duplicates");
        }
        Ok(())
    }

    fn reward_range(&self, x: f64) -> (f64, f64) {
        match self.experiment {
            ExperimentKind::ExpandingRange => (1.0 - x, 1.0),
            ExperimentKind::SlidingRange => (x, x + self.window),
            _ => (
                self.mdp.terminal_reward_range[0],
                self.mdp.terminal_reward_range[1],
            ),
        }
    }

    /// Where the shaped runs at `parameter` find their ucbvi baseline.
    fn baseline_parameter(&self, parameter: f64) -> f64 {
        match self.experiment {
            ExperimentKind::KSweep => 0.0,
            _ => parameter,
        }
    }

    /// One grid point per parameter value with the algorithms run there.
    fn points(&self) -> Vec<Point> {
        let shaped: Vec<Algorithm> = self
            .algorithms
            .iter()
            .copied()
            .filter(|a| a.needs_envelope())
            .collect();
        match self.experiment {
            ExperimentKind::KSweep => {
                // ucbvi ignores the data, so it runs once at K = 0
                let mut points = Vec::new();
                if self.algorithms.contains(&Algorithm::Ucbvi) {
                    points.push(Point {
                        parameter: 0.0,
                        k: 0,
                        algorithms: vec![Algorithm::Ucbvi],
                    });
                }
                if !shaped.is_empty() {
                    for &k in &self.k_values {
                        points.push(Point {
                            parameter: k as f64,
                            k,
                            algorithms: shaped.clone(),
                        });
                    }
                }
                points
            }
            ExperimentKind::SingleRun => vec![Point {
                parameter: self.k as f64,
                k: self.k,
                algorithms: self.algorithms.clone(),
            }],
            ExperimentKind::ExpandingRange | ExperimentKind::SlidingRange => self
                .x_grid
                .iter()
                .map(|&x| Point {
                    parameter: x,
                    k: self.k,
                    algorithms: self.algorithms.clone(),
                })
                .collect(),
        }
    }

    fn model_spec(&self, point: &Point, seed: u64) -> Result<MdpGenSpec> {
        let mut spec = self.mdp.to_spec()?;
        if self.experiment == ExperimentKind::KSweep {
            spec.seed = seed;
        }
        if self.experiment.is_range() {
            spec.terminal_reward_range = self.reward_range(point.parameter);
        }
        Ok(spec)
    }

    /// How models are drawn, written to the run metadata.
    pub fn resampling_note(&self) -> &'static str {
        match (self.experiment, self.mdp_file.is_some()) {
            (_, true) => "one model loaded from mdp_file and shared by every seed; dataset, split and online streams are derived from the replicate seed",
            (ExperimentKind::KSweep, false) => "one model per replicate seed (generator seed = replicate seed); each K uses the first K trajectories of the seed's dataset stream, and split and online streams are shared across K",
            (ExperimentKind::SingleRun, false) => "one model from the generator seed shared by every seed; dataset, split and online streams are derived from the replicate seed",
            _ => "one model per grid point from the fixed generator seed, shared by every seed; dataset, split and online streams are derived from the replicate seed",
        }
    }
}

#[derive(Clone, Debug)]
struct Point {
    parameter: f64,
    k: usize,
    algorithms: Vec<Algorithm>,
}

/// Final numbers of one `(algorithm, parameter, seed)` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub parameter: f64,
    pub seed: u64,
    /// Offline trajectories behind the envelope, 0 for ucbvi.
    pub k: usize,
    pub episodes: usize,
    pub final_regret: f64,
    /// Whether the envelope used brackets `Q*` and `V*`.
    pub sandwich_holds: bool,
    pub d_max: f64,
    pub r_max: f64,
    pub pair_eff: usize,
    /// Explicit Q-shaping bound at this envelope; q-shaping rows only.
    pub q_bound: Option<f64>,
}

/// A run plus the parts that do not go into the aggregate tables.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub result: RunResult,
    /// `(episode, inst_regret, cum_regret)` at the kept episodes, 1-based.
    pub trace: Vec<(usize, f64, f64)>,
    pub wall_time_secs: f64,
}

/// Summary over seeds of one `(algorithm, parameter)` group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub algorithm: Algorithm,
    pub parameter: f64,
    pub seeds: usize,
    pub mean_regret: f64,
    pub median_regret: f64,
    pub q1_regret: f64,
    pub q3_regret: f64,
    pub iqr_regret: f64,
    /// Mean over seeds of the per-seed relative improvement on ucbvi.
    pub mean_improvement: Option<f64>,
    pub median_improvement: Option<f64>,
    /// Seeds whose baseline regret was positive.
    pub improvement_seeds: usize,
}

/// Mean cumulative regret across seeds at one kept episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub algorithm: Algorithm,
    pub parameter: f64,
    pub episode: usize,
    pub mean_cum_regret: f64,
}

#[derive(Clone, Debug)]
pub struct AggregateResult {
    pub kind: ExperimentKind,
    /// Sorted by `(algorithm, parameter, seed)`.
    pub runs: Vec<RunResult>,
    /// Sorted by `(algorithm, parameter)`.
    pub rows: Vec<AggregateRow>,
    pub curves: Vec<CurveRow>,
}

impl AggregateResult {
    pub fn row(&self, algorithm: Algorithm, parameter: f64) -> Option<&AggregateRow> {
        self.rows
            .iter()
            .find(|r| r.algorithm == algorithm && r.parameter == parameter)
    }
}

/// `(u - a) / u`; `None` when the baseline regret `u` is not positive.
pub fn relative_improvement(regret_ucbvi: f64, regret_algo: f64) -> Option<f64> {
    (regret_ucbvi > 0.0).then(|| (regret_ucbvi - regret_algo) / regret_ucbvi)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Linearly interpolated quantile of `xs`, `q` in `[0, 1]`.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Episodes `ceil(i T / n)` for `i = 1..=n`, deduplicated.
pub fn trace_episodes(episodes: usize, points: usize) -> Vec<usize> {
    if episodes == 0 || points == 0 {
        return Vec::new();
    }
    let mut out: Vec<usize> = (1..=points)
        .map(|i| (i * episodes).div_ceil(points))
        .collect();
    out.dedup();
    out
}

fn cmp_key(a: (Algorithm, f64, u64), b: (Algorithm, f64, u64)) -> Ordering {
    a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2))
}

struct Job<'a> {
    point: &'a Point,
    seed: u64,
}

fn run_job(
    cfg: &ExperimentConfig,
    fixed: Option<&LayeredMdp>,
    job: &Job<'_>,
) -> Result<Vec<RunOutput>> {
    let generated;
    let mdp = match fixed {
        Some(m) => m,
        None => {
            generated = generate_mdp(&cfg.model_spec(job.point, job.seed)?)?;
            &generated
        }
    };
    let shape = mdp.shape();
    let sol = solve_optimal(mdp);
    let needs_data = job.point.algorithms.iter().any(|a| a.needs_envelope());
    let learned = if needs_data {
        let behavior = StochasticPolicy::uniform(shape);
        // one stream per seed: smaller K are prefixes of larger ones
        let data = collect_dataset(
            mdp,
            &behavior,
            "uniform",
            job.point.k,
            &mut stream(job.seed, OFFLINE_DATA, 0),
        )?;
        Some(compute_envelopes(
            &data,
            mdp,
            &OfflineConfig::new(cfg.delta)?,
            &mut stream(job.seed, OFFLINE_SPLIT, 0),
        )?)
    } else {
        None
    };
    let trivial = ValueEnvelope::trivial(shape);
    let keep = trace_episodes(cfg.episodes, cfg.trace_points);

    let mut out = Vec::new();
    for &alg in &job.point.algorithms {
        let env = if alg.needs_envelope() {
            learned
                .as_ref()
                .expect("dataset drawn for shaped algorithms")
        } else {
            &trivial
        };
        let online = OnlineConfig::new(alg, cfg.episodes, cfg.delta)?;
        let started = Instant::now();
        let record = run_learner(
            mdp,
            alg.needs_envelope().then_some(env),
            &online,
            &mut stream(job.seed, ONLINE_RUN, 0),
        )?;
        let wall_time_secs = started.elapsed().as_secs_f64();

        let report = envelope_report(mdp, &sol, env)?;
        let effective = pair_eff(&sol, env)?.len();
        let q_bound = if alg == Algorithm::QShaping && cfg.episodes > 0 {
            Some(
                compute_q_bound(&QBoundInputs {
                    episodes: cfg.episodes,
                    horizon: shape.horizon(),
                    states: shape.num_states(),
                    actions: shape.actions(),
                    delta: cfg.delta,
                    r_max: report.r_max,
                    d_max: report.d_max,
                    effective_pairs: effective,
                })?
                .bound,
            )
        } else {
            None
        };
        out.push(RunOutput {
            result: RunResult {
                algorithm: alg,
                parameter: job.point.parameter,
                seed: job.seed,
                k: if alg.needs_envelope() { job.point.k } else { 0 },
                episodes: cfg.episodes,
                final_regret: record.final_regret(),
                sandwich_holds: report.sandwich_holds,
                d_max: report.d_max,
                r_max: report.r_max,
                pair_eff: effective,
                q_bound,
            },
            trace: keep
                .iter()
                .map(|&t| (t, record.inst_regret[t - 1], record.cum_regret[t - 1]))
                .collect(),
            wall_time_secs,
        });
    }
    Ok(out)
}

/// Runs every `(grid point, seed)` job on a pool of `cfg.jobs` threads.
/// The result is sorted by `(algorithm, parameter, seed)`, so it does not
/// depend on scheduling.
pub fn run_jobs(cfg: &ExperimentConfig) -> Result<Vec<RunOutput>> {
    cfg.validate()?;
    let fixed = cfg.mdp_file.as_deref().map(formats::load_mdp).transpose()?;
    let points = cfg.points();
    let jobs: Vec<Job<'_>> = points
        .iter()
        .flat_map(|point| cfg.seeds.iter().map(move |&seed| Job { point, seed }))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()?;
    let nested: Vec<Vec<RunOutput>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| run_job(cfg, fixed.as_ref(), job))
            .collect::<Result<_>>()
    })?;
    let mut runs: Vec<RunOutput> = nested.into_iter().flatten().collect();
    runs.sort_by(|a, b| {
        let key = |r: &RunOutput| (r.result.algorithm, r.result.parameter, r.result.seed);
        cmp_key(key(a), key(b))
    });
    Ok(runs)
}

/// Deterministic reduction of sorted runs into per-group statistics.
pub fn aggregate(cfg: &ExperimentConfig, runs: &[RunOutput]) -> AggregateResult {
    let results: Vec<RunResult> = runs.iter().map(|r| r.result.clone()).collect();
    let baseline = |parameter: f64, seed: u64| {
        let p = cfg.baseline_parameter(parameter);
        results
            .iter()
            .find(|r| r.algorithm == Algorithm::Ucbvi && r.parameter == p && r.seed == seed)
            .map(|r| r.final_regret)
    };

    let mut rows = Vec::new();
    let mut curves = Vec::new();
    let mut start = 0;
    while start < runs.len() {
        let head = &runs[start].result;
        let end = start
            + runs[start..]
                .iter()
                .take_while(|r| {
                    r.result.algorithm == head.algorithm && r.result.parameter == head.parameter
                })
                .count();
        let group = &runs[start..end];
        let regrets: Vec<f64> = group.iter().map(|r| r.result.final_regret).collect();
        let improvements: Vec<f64> = group
            .iter()
            .filter_map(|r| {
                relative_improvement(
                    baseline(r.result.parameter, r.result.seed)?,
                    r.result.final_regret,
                )
            })
            .collect();
        let (q1, q3) = (quantile(&regrets, 0.25), quantile(&regrets, 0.75));
        rows.push(AggregateRow {
            algorithm: head.algorithm,
            parameter: head.parameter,
            seeds: group.len(),
            mean_regret: mean(&regrets),
            median_regret: quantile(&regrets, 0.5),
            q1_regret: q1,
            q3_regret: q3,
            iqr_regret: q3 - q1,
            mean_improvement: (!improvements.is_empty()).then(|| mean(&improvements)),
            median_improvement: (!improvements.is_empty()).then(|| quantile(&improvements, 0.5)),
            improvement_seeds: improvements.len(),
        });
        for (i, &(episode, _, _)) in group[0].trace.iter().enumerate() {
            let cum: Vec<f64> = group.iter().map(|r| r.trace[i].2).collect();
            curves.push(CurveRow {
                algorithm: head.algorithm,
                parameter: head.parameter,
                episode,
                mean_cum_regret: mean(&cum),
            });
        }
        start = end;
    }
    AggregateResult {
        kind: cfg.experiment,
        runs: results,
        rows,
        curves,
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct TraceRow {
    episode: usize,
    inst_regret: f64,
    cum_regret: f64,
}

/// File name stem of one run.
pub fn run_stem(r: &RunResult) -> String {
    format!("{}_p{}_s{}", r.algorithm.tag(), r.parameter, r.seed)
}

/// Charts of the figure analogs for this aggregate.
pub fn charts(agg: &AggregateResult) -> Vec<(String, Chart)> {
    let label = |r: &CurveRow| match (agg.kind, r.algorithm) {
        (ExperimentKind::KSweep, Algorithm::Ucbvi) => "ucbvi".to_string(),
        (ExperimentKind::KSweep, _) => format!("K={}", r.parameter),
        _ => r.algorithm.tag().to_string(),
    };
    let curve_series = |keep: &dyn Fn(&CurveRow) -> bool| {
        let mut series: Vec<Series> = Vec::new();
        for c in agg.curves.iter().filter(|c| keep(c)) {
            let name = label(c);
            match series.last_mut() {
                Some(s) if s.name == name => s.points.push((c.episode as f64, c.mean_cum_regret)),
                _ => series.push(Series {
                    name,
                    points: vec![(c.episode as f64, c.mean_cum_regret)],
                }),
            }
        }
        series
    };
    match agg.kind {
        ExperimentKind::KSweep => {
            let mut shaped: Vec<Algorithm> = agg
                .rows
                .iter()
                .map(|r| r.algorithm)
                .filter(|a| a.needs_envelope())
                .collect();
            shaped.dedup();
            shaped
                .into_iter()
                .map(|alg| {
                    let series = curve_series(&|c: &CurveRow| {
                        c.algorithm == alg || c.algorithm == Algorithm::Ucbvi
                    });
                    (
                        format!("regret_{}", alg.tag()),
                        Chart {
                            title: format!("{}: cumulative regret by dataset size", alg.tag()),
                            x_label: "episode".into(),
                            y_label: "mean cumulative regret".into(),
                            series,
                        },
                    )
                })
                .collect()
        }
        ExperimentKind::SingleRun => vec![(
            "regret".into(),
            Chart {
                title: "cumulative regret".into(),
                x_label: "episode".into(),
                y_label: "mean cumulative regret".into(),
                series: curve_series(&|_| true),
            },
        )],
        ExperimentKind::ExpandingRange | ExperimentKind::SlidingRange => {
            let mut series: Vec<Series> = Vec::new();
            for r in agg.rows.iter().filter(|r| r.algorithm != Algorithm::Ucbvi) {
                let Some(y) = r.mean_improvement else {
                    continue;
                };
                match series.last_mut() {
                    Some(s) if s.name == r.algorithm.tag() => s.points.push((r.parameter, y)),
                    _ => series.push(Series {
                        name: r.algorithm.tag().into(),
                        points: vec![(r.parameter, y)],
                    }),
                }
            }
            let title = if agg.kind == ExperimentKind::ExpandingRange {
                "relative regret improvement, rewards in [1-x, 1]"
            } else {
                "relative regret improvement, rewards in [x, x+w]"
            };
            vec![(
                "improvement".into(),
                Chart {
                    title: title.into(),
                    x_label: "x".into(),
                    y_label: "mean relative regret improvement".into(),
                    series,
                },
            )]
        }
    }
}

/// Writes the SVG charts of `agg` into `dir`; returns the files written.
/// Charts without data are skipped with a warning on stderr.
pub fn emit_plots(agg: &AggregateResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (stem, chart) in charts(agg) {
        match plot::render(&chart) {
            Some(svg) => {
                let path = dir.join(format!("{stem}.svg"));
                fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
                written.push(path);
            }
            None => eprintln!("warning: no data for chart `{stem}`, nothing written"),
        }
    }
    Ok(written)
}

/// Writes every artifact of a finished experiment into `cfg.out_dir`.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    runs: &[RunOutput],
    agg: &AggregateResult,
) -> Result<()> {
    let dir = &cfg.out_dir;
    write_csv(&dir.join("runs.csv"), &agg.runs)?;
    write_csv(&dir.join("aggregate.csv"), &agg.rows)?;
    write_csv(&dir.join("curves.csv"), &agg.curves)?;
    let traces = dir.join("traces");
    fs::create_dir_all(&traces)?;
    for run in runs {
        let rows: Vec<TraceRow> = run
            .trace
            .iter()
            .map(|&(episode, inst_regret, cum_regret)| TraceRow {
                episode,
                inst_regret,
                cum_regret,
            })
            .collect();
        write_csv(
            &traces.join(format!("{}.csv", run_stem(&run.result))),
            &rows,
        )?;
    }
    emit_plots(agg, dir)?;
    let timings: Vec<Value> = runs
        .iter()
        .map(|r| {
            serde_json::json!({
                "algorithm": r.result.algorithm,
                "parameter": r.result.parameter,
                "seed": r.result.seed,
                "wall_time_secs": r.wall_time_secs,
            })
        })
        .collect();
    formats::write_json(
        &dir.join("metadata.json"),
        &serde_json::json!({
            "experiment": cfg.experiment,
            "parameter": cfg.experiment.parameter_name(),
            "model_resampling": cfg.resampling_note(),
            "runs": timings,
        }),
    )
}

/// Validates `cfg`, prepares the output directory, runs every job and
/// writes the results.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<AggregateResult> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating output directory {}", cfg.out_dir.display()))?;
    formats::write_json(&cfg.out_dir.join("config.json"), cfg)?;
    let runs = run_jobs(cfg)?;
    let agg = aggregate(cfg, &runs);
    write_outputs(cfg, &runs, &agg)?;
    Ok(agg)
}

/// Reads `aggregate.csv` and `curves.csv` back from an output directory.
pub fn load_aggregate(dir: &Path) -> Result<AggregateResult> {
    let cfg = ExperimentConfig::load(&dir.join("config.json"))?;
    fn read<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
        let mut r =
            csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        r.deserialize().map(|row| Ok(row?)).collect()
    }
    Ok(AggregateResult {
        kind: cfg.experiment,
        runs: read(&dir.join("runs.csv"))?,
        rows: read(&dir.join("aggregate.csv"))?,
        curves: read(&dir.join("curves.csv"))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn improvement_arithmetic() {
        assert_eq!(relative_improvement(100.0, 100.0), Some(0.0));
        assert_eq!(relative_improvement(100.0, 25.0), Some(0.75));
        assert_eq!(relative_improvement(0.0, 3.0), None);
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&xs, 0.5), 2.5);
        assert_eq!(quantile(&xs, 0.25), 1.75);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert_eq!(quantile(&[7.0], 0.25), 7.0);
    }

    #[test]
    fn trace_keeps_last_episode() {
        assert_eq!(trace_episodes(10, 4), vec![3, 5, 8, 10]);
        assert_eq!(trace_episodes(3, 10), vec![1, 2, 3]);
        assert_eq!(linspace(0.05, 1.0, 11)[1], 0.145);
        assert!(trace_episodes(0, 10).is_empty());
    }

    #[test]
    fn partial_config_takes_preset() {
        let cfg = ExperimentConfig::from_json_str(
            r#"{"experiment": "sliding-range", "episodes": 50, "mdp": {"seed": 3}}"#,
        )
        .unwrap();
        assert_eq!(cfg.episodes, 50);
        assert_eq!(cfg.mdp.seed, 3);
        assert_eq!(cfg.mdp.horizon, 3);
        assert_eq!(cfg.x_grid.len(), 11);
        assert!(
            ExperimentConfig::from_json_str(r#"{"experiment": "k-sweep", "bogus": 1}"#).is_err()
        );
        assert!(
            ExperimentConfig::from_json_str(r#"{"experiment": "k-sweep", "seeds": []}"#).is_err()
        );
        assert!(ExperimentConfig::from_json_str(
            r#"{"experiment": "expanding-range", "x_grid": [0.5, 1.5]}"#
        )
        .is_err());
    }
}
