use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use possmc::harness::runner::{evaluate_log_pi, AveragedPoint};
use possmc::harness::{
    association_metrics, read_scenario, read_track_set, smooth, sweep, write_scenario, write_track_set,
    AssociationMetrics, RunConfig, SamplerChoice, ScenarioFile,
};
use possmc::mcmc::trace::{read_csv, write_csv};
use possmc::mcmc::ChainLevel;
use possmc::sim::{simulate, GroundTruth, Preset, SimParams};
use possmc::{Error, Result, Scenario};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "possmc", version, about = "Possibilistic multi-object smoothing with annealed MCMC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a scenario from a preset and write it to a file.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the samplers on a scenario and write traces and track sets.
    Smooth {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score a track set against a labelled scenario file.
    Evaluate {
        /// Track set JSON written by `smooth`.
        #[arg(long)]
        result: PathBuf,
        /// Scenario file with ground-truth labels.
        #[arg(long)]
        truth: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Merge trace CSV files into one tidy table with a `run` column.
    TraceExport {
        traces: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the cooling, reassignment-rate and p_c ablations.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// simple, high_fa or low_pd.
    #[arg(long)]
    preset: Option<String>,
    /// hisp, baseline or both.
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long)]
    wall_secs: Option<f64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    lambda_r: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    tau_prime: Option<f64>,
    /// -1, 0, +1 or uniform.
    #[arg(long, allow_hyphen_values = true)]
    pc_focus: Option<String>,
    #[arg(long)]
    particles: Option<usize>,
    /// track or path.
    #[arg(long)]
    level: Option<String>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_toml(&fs::read_to_string(p)?)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {$(
                if let Some(v) = self.$flag.clone() { cfg.$field = v.into(); }
            )*};
        }
        set!(scenario => scenario, preset => preset, seed => seed, out => out, lambda_r => lambda_r, c => c,
             tau_prime => tau_prime, pc_focus => pc_focus, particles => particles, repeats => repeats);
        if let Some(s) = &self.sampler {
            cfg.sampler = s.parse()?;
        }
        if let Some(l) = &self.level {
            cfg.level = match l.as_str() {
                "track" => ChainLevel::Track,
                "path" => ChainLevel::Path,
                _ => return Err(Error::Usage(format!("unknown level '{l}' (expected track or path)"))),
            };
        }
        match (self.iters, self.wall_secs) {
            (Some(n), w) => {
                cfg.iterations = Some(n);
                cfg.wall_secs = w.or(cfg.wall_secs);
            }
            (None, Some(w)) => {
                cfg.iterations = None;
                cfg.wall_secs = Some(w);
            }
            (None, None) => {}
        }
        cfg.pc_focus()?;
        Ok(cfg)
    }
}

/// Scenario, simulation parameters and optional truth named by a config.
fn load_scenario(cfg: &RunConfig) -> Result<(Scenario, SimParams, Option<GroundTruth>)> {
    match (&cfg.scenario, cfg.preset()?) {
        (Some(_), Some(_)) => Err(Error::Usage("give either --scenario or --preset, not both".into())),
        (Some(path), None) => {
            let f = read_scenario(BufReader::new(File::open(path)?))?;
            let sim = cfg.sim_params(f.params.unwrap_or_default());
            Ok((f.scenario, sim, f.truth))
        }
        (None, Some(preset)) => {
            let sim = cfg.sim_params(preset.params());
            let (sc, gt) = simulate(&sim, cfg.seed)?;
            Ok((sc, sim, Some(gt)))
        }
        (None, None) => Err(Error::Usage("a scenario (--scenario or --preset) is required".into())),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn cmd_simulate(run: &RunArgs) -> Result<()> {
    let cfg = run.config()?;
    let preset = cfg.preset()?.unwrap_or(Preset::Simple);
    let sim = cfg.sim_params(preset.params());
    let (scenario, truth) = simulate(&sim, cfg.seed)?;
    let file = ScenarioFile { scenario, params: Some(sim), seed: Some(cfg.seed), truth: Some(truth) };
    let out = run.out.clone().unwrap_or_else(|| PathBuf::from(format!("{preset}_{}.scn", cfg.seed)));
    write_scenario(&file, BufWriter::new(File::create(&out)?))?;
    println!("wrote {} ({} observations)", out.display(), file.scenario.total());
    Ok(())
}

fn cmd_smooth(run: &RunArgs) -> Result<()> {
    let cfg = run.config()?;
    cfg.validate()?;
    let (scenario, sim, truth) = load_scenario(&cfg)?;
    let report = smooth(scenario, &sim, &cfg, truth.as_ref())?;
    fs::create_dir_all(&cfg.out)?;
    for r in &report.runs {
        let stem = format!("{}_r{}", r.sampler.as_str(), r.repeat);
        write_csv(&r.outcome.trace, BufWriter::new(File::create(cfg.out.join(format!("{stem}.trace.csv")))?))?;
        write_track_set(&r.outcome.best, BufWriter::new(File::create(cfg.out.join(format!("{stem}.tracks.json")))?))?;
    }
    let summary = report.summary();
    write_json(&cfg.out.join("summary.json"), &summary)?;
    fs::write(cfg.out.join("config.toml"), cfg.to_toml())?;
    for (kind, mean) in &summary.mean_best_log_pi {
        println!("{}: mean best log Π = {mean:.3}", kind.as_str());
    }
    if let Some(gt) = summary.ground_truth_log_pi {
        println!("ground truth log Π = {gt:.3}");
    }
    if summary.runs.iter().any(|r| r.partial) {
        println!("note: wall-clock budget ended some runs early (partial results)");
    }
    Ok(())
}

#[derive(Serialize)]
struct MetricsReport {
    log_pi: f64,
    ground_truth_log_pi: f64,
    metrics: AssociationMetrics,
}

fn cmd_evaluate(result: &Path, truth: &Path, run: &RunArgs) -> Result<()> {
    let cfg = run.config()?;
    let tracks = read_track_set(BufReader::new(File::open(result)?))?;
    let f = read_scenario(BufReader::new(File::open(truth)?))?;
    let gt = f.truth.ok_or_else(|| Error::Parse { line: 0, msg: "scenario file has no ground-truth labels".into() })?;
    let sim = cfg.sim_params(f.params.unwrap_or_default());
    tracks.association().validate(&f.scenario)?;
    let report = MetricsReport {
        log_pi: evaluate_log_pi(f.scenario.clone(), &sim, &cfg, &tracks)?,
        ground_truth_log_pi: evaluate_log_pi(f.scenario, &sim, &cfg, &gt.track_set()?)?,
        metrics: association_metrics(&tracks, &gt),
    };
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    if let Some(out) = &run.out {
        fs::write(out, text + "\n")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TidyRow<'a> {
    run: &'a str,
    iteration: u64,
    wall_ms: f64,
    log_pi_current: f64,
    log_pi_best: f64,
    rho: f64,
    move_kind: &'static str,
    accepted: bool,
    n_tracks: usize,
}

fn cmd_trace_export(traces: &[PathBuf], out: &Path) -> Result<()> {
    if traces.is_empty() {
        return Err(Error::Usage("no trace files given".into()));
    }
    let mut w = csv::Writer::from_path(out)?;
    for p in traces {
        let name = p.file_name().and_then(|s| s.to_str()).unwrap_or("run");
        let run = name.trim_end_matches(".csv").trim_end_matches(".trace");
        for r in read_csv(BufReader::new(File::open(p)?))? {
            w.serialize(TidyRow {
                run,
                iteration: r.iteration,
                wall_ms: r.wall_ms,
                log_pi_current: r.log_pi_current,
                log_pi_best: r.log_pi_best,
                rho: r.rho,
                move_kind: r.move_kind.as_str(),
                accepted: r.accepted,
                n_tracks: r.n_tracks,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_sweep(run: &RunArgs) -> Result<()> {
    let cfg = run.config()?;
    cfg.validate()?;
    let (scenario, sim, _) = load_scenario(&cfg)?;
    let entries = sweep(&scenario, &sim, &RunConfig { sampler: SamplerChoice::Hisp, ..cfg.clone() })?;
    fs::create_dir_all(&cfg.out)?;
    let mut w = BufWriter::new(File::create(cfg.out.join("sweep_traces.csv"))?);
    writeln!(w, "parameter,value,iteration,mean_log_pi_best,mean_log_pi_current")?;
    for e in &entries {
        for AveragedPoint { iteration, mean_log_pi_best, mean_log_pi_current } in &e.trace {
            writeln!(w, "{},{},{iteration},{mean_log_pi_best},{mean_log_pi_current}", e.parameter, e.value)?;
        }
        println!("{} = {}: final mean best log Π = {:.3}", e.parameter, e.value, e.final_mean_log_pi_best);
    }
    w.flush()?;
    let finals: Vec<_> = entries.iter().map(|e| (&e.parameter, &e.value, e.final_mean_log_pi_best)).collect();
    write_json(&cfg.out.join("sweep.json"), &finals)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { run } => cmd_simulate(&run),
        Command::Smooth { run } => cmd_smooth(&run),
        Command::Evaluate { result, truth, run } => cmd_evaluate(&result, &truth, &run),
        Command::TraceExport { traces, out } => cmd_trace_export(&traces, &out),
        Command::Sweep { run } => cmd_sweep(&run),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Usage(_) | Error::InvalidParameter(_) => 2,
                _ => 3,
            })
        }
    }
}
