use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use envshape::formats::{self, DatasetFile, EnvelopeFile, GenSpecFile, MdpFile, SolutionFile};
use envshape::harness::{self, ExperimentConfig};
use envshape_core::rng::{stream, OFFLINE_DATA, OFFLINE_SPLIT, ONLINE_RUN};
use envshape_core::{
    collect_dataset, compute_envelopes, coverage_check, envelope_report, generate_mdp,
    pseudo_sub_sets, run_learner, solve_optimal, Algorithm, OfflineConfig, OnlineConfig,
    StochasticPolicy,
};
use serde_json::json;

/// Tabular value-envelope shaping lab.
#[derive(Parser)]
#[command(name = "envshape", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random layered MDP.
    Gen(GenArgs),
    /// Solve a model exactly by backward induction.
    Solve {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Collect K trajectories under the uniform behaviour policy.
    Sample {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long = "K")]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build lower/upper value envelopes from a dataset.
    Offline {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Seed of the dataset split.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one online learner and write its regret trace.
    Run {
        #[arg(long)]
        mdp: PathBuf,
        /// Required by every algorithm but ucbvi.
        #[arg(long)]
        envelope: Option<PathBuf>,
        #[arg(long, default_value = "q-shaping")]
        algo: Algorithm,
        #[arg(long = "T")]
        episodes: usize,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for trace.csv and summary.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Effective sets, envelope scalars and the sandwich check.
    Diag {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        envelope: PathBuf,
        /// Gap threshold of the pseudo-suboptimal sets.
        #[arg(long, default_value_t = 0.1)]
        gap: f64,
        /// Dataset size and delta used for the coverage report.
        #[arg(long = "K")]
        k: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the sets as CSV listings into this directory.
        #[arg(long)]
        sets_dir: Option<PathBuf>,
    },
    /// Run a configured multi-seed experiment.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config's worker count.
        #[arg(long)]
        jobs: Option<usize>,
        /// Runs a single replicate seed instead of the config's list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "T")]
        episodes: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Redraw the charts of an experiment output directory.
    Plot {
        /// Experiment output directory.
        #[arg(long)]
        input: PathBuf,
        /// Where the SVG files go; defaults to the input directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenArgs {
    /// Generator spec as JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    states: Option<usize>,
    #[arg(long)]
    actions: Option<usize>,
    /// Last-step reward range as `r1,r2`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    reward_range: Option<Vec<f64>>,
    /// Rewards before the last step: zero or uniform.
    #[arg(long)]
    rewards: Option<String>,
    #[arg(long)]
    concentration: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

fn gen(args: GenArgs) -> Result<()> {
    let mut spec = match &args.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<GenSpecFile>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => GenSpecFile::default(),
    };
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    if let Some(v) = args.horizon {
        spec.horizon = v;
    }
    if let Some(v) = args.states {
        spec.states_per_layer = v;
    }
    if let Some(v) = args.actions {
        spec.actions = v;
    }
    if let Some(v) = args.reward_range {
        spec.terminal_reward_range = [v[0], v[1]];
    }
    if let Some(v) = args.rewards {
        spec.intermediate_rewards = v;
    }
    if let Some(v) = args.concentration {
        spec.concentration = v;
    }
    let spec = spec.to_spec()?;
    let mdp = generate_mdp(&spec)?;
    formats::write_json(&args.out, &MdpFile::new(&mdp, Some(&spec)))
}

fn run(
    mdp: &Path,
    envelope: Option<&Path>,
    algo: Algorithm,
    episodes: usize,
    delta: f64,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let model = formats::load_mdp(mdp)?;
    let env = envelope.map(formats::load_envelope).transpose()?;
    let cfg = OnlineConfig::new(algo, episodes, delta)?;
    let started = Instant::now();
    let mut record = run_learner(&model, env.as_ref(), &cfg, &mut stream(seed, ONLINE_RUN, 0))?;
    record.seed = Some(seed);
    let secs = started.elapsed().as_secs_f64();

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = csv::Writer::from_path(out.join("trace.csv"))?;
    w.write_record(["episode", "inst_regret", "cum_regret"])?;
    for (t, (inst, cum)) in record
        .inst_regret
        .iter()
        .zip(&record.cum_regret)
        .enumerate()
    {
        w.write_record([(t + 1).to_string(), inst.to_string(), cum.to_string()])?;
    }
    w.flush()?;
    formats::write_json(
        &out.join("summary.json"),
        &json!({
            "algorithm": algo,
            "episodes": episodes,
            "delta": delta,
            "seed": seed,
            "final_regret": record.final_regret(),
            "r_max": env.as_ref().map(|e| e.r_max()),
            "d_max": env.as_ref().map(|e| e.d_max()),
            "wall_time_secs": secs,
        }),
    )
}

fn write_triples(path: &Path, header: [&str; 3], rows: &[(usize, usize, usize)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for &(h, s, a) in rows {
        w.write_record([h.to_string(), s.to_string(), a.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn diag(
    mdp: &Path,
    envelope: &Path,
    gap: f64,
    k: Option<usize>,
    delta: f64,
    out: &Path,
    sets_dir: Option<&Path>,
) -> Result<()> {
    let model = formats::load_mdp(mdp)?;
    let env = formats::load_envelope(envelope)?;
    let sol = solve_optimal(&model);
    let report = envelope_report(&model, &sol, &env)?;
    let sets = pseudo_sub_sets(&model, &sol, &env, gap)?;
    let coverage = k
        .map(|k| coverage_check(&model, &StochasticPolicy::uniform(model.shape()), k, delta))
        .transpose()?;
    let violations: Vec<_> = report
        .violations
        .iter()
        .map(|v| {
            json!({
                "step": v.step,
                "state": v.state,
                "action": v.action,
                "side": format!("{:?}", v.side).to_lowercase(),
                "excess": v.excess,
            })
        })
        .collect();
    formats::write_json(
        out,
        &json!({
            "d_max": report.d_max,
            "r_max": report.r_max,
            "ranges": report.ranges,
            "optimal_ranges": report.optimal_ranges,
            "sandwich_holds": report.sandwich_holds,
            "violations": violations,
            "gap": gap,
            "pair_eff": sets.pair_eff_len(),
            "ps": sets.ps_len(),
            "pps": sets.pps_len(),
            "bps": sets.bps_len(),
            "coverage": coverage.map(|c| json!({
                "K": k,
                "condition_met": c.condition_met,
                "d_b_min": c.d_b_min,
                "required_K": c.required_k,
            })),
        }),
    )?;
    if let Some(dir) = sets_dir {
        fs::create_dir_all(dir)?;
        write_triples(
            &dir.join("pair_eff.csv"),
            ["step", "state", "action"],
            &sets.pair_eff,
        )?;
        write_triples(&dir.join("ps.csv"), ["step", "state", "action"], &sets.ps)?;
        write_triples(&dir.join("bps.csv"), ["step", "state", "action"], &sets.bps)?;
        let mut w = csv::Writer::from_path(dir.join("pps.csv"))?;
        w.write_record(["step", "state"])?;
        for &(h, s) in &sets.pps {
            w.write_record([h.to_string(), s.to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => gen(args),
        Command::Solve { mdp, out } => {
            let model = formats::load_mdp(&mdp)?;
            let sol = solve_optimal(&model);
            formats::write_json(&out, &SolutionFile::new(model.shape(), &sol))
        }
        Command::Sample { mdp, k, seed, out } => {
            let model = formats::load_mdp(&mdp)?;
            let behavior = StochasticPolicy::uniform(model.shape());
            let data = collect_dataset(
                &model,
                &behavior,
                "uniform",
                k,
                &mut stream(seed, OFFLINE_DATA, 0),
            )?;
            formats::write_json(&out, &DatasetFile::new(&data, model.horizon()))
        }
        Command::Offline {
            mdp,
            data,
            delta,
            seed,
            out,
        } => {
            let model = formats::load_mdp(&mdp)?;
            let dataset = formats::load_dataset(&data, model.shape())?;
            let env = compute_envelopes(
                &dataset,
                &model,
                &OfflineConfig::new(delta)?,
                &mut stream(seed, OFFLINE_SPLIT, 0),
            )?;
            formats::write_json(&out, &EnvelopeFile::new(&env))
        }
        Command::Run {
            mdp,
            envelope,
            algo,
            episodes,
            delta,
            seed,
            out,
        } => run(&mdp, envelope.as_deref(), algo, episodes, delta, seed, &out),
        Command::Diag {
            mdp,
            envelope,
            gap,
            k,
            delta,
            out,
            sets_dir,
        } => diag(&mdp, &envelope, gap, k, delta, &out, sets_dir.as_deref()),
        Command::Experiment {
            config,
            out,
            jobs,
            seed,
            episodes,
            delta,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(v) = out {
                cfg.out_dir = v;
            }
            if let Some(v) = jobs {
                cfg.jobs = v;
            }
            if let Some(v) = seed {
                cfg.seeds = vec![v];
            }
            if let Some(v) = episodes {
                cfg.episodes = v;
            }
            if let Some(v) = delta {
                cfg.delta = v;
            }
            let agg = harness::run_experiment(&cfg)?;
            for row in &agg.rows {
                let improvement = row
                    .mean_improvement
                    .map_or("-".to_string(), |v| format!("{v:.3}"));
                println!(
                    "{:<12} {}={:<8} mean regret {:>12.2}  improvement {improvement}",
                    row.algorithm.tag(),
                    cfg.experiment.parameter_name(),
                    row.parameter,
                    row.mean_regret,
                );
            }
            println!("results in {}", cfg.out_dir.display());
            Ok(())
        }
        Command::Plot { input, out } => {
            let agg = harness::load_aggregate(&input)?;
            let dir = out.unwrap_or(input);
            fs::create_dir_all(&dir)?;
            for path in harness::emit_plots(&agg, &dir)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
