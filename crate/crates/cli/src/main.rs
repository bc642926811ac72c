use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use boem_core::diagnostics::{normalized_loglik_trace, score};
use boem_core::engine::{rate_probe, ExactBackend, KalmanBackend};
use boem_core::exact::CategoricalLaw;
use boem_core::experiment::{
    compare, forgetting_trials, quantile_plot, read_quantiles, run_experiment, simulate_stream, write_observations,
    write_quantiles, write_raw, ExperimentConfig, ModelKind, QuantileTable,
};
use boem_core::kalman::GaussianLaw;
use boem_core::model::{ExponentialFamily, FiniteHmm, Lgssm};
use boem_core::rng::{stream, Purpose};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "boem", version, about = "Block online EM experiments for hidden Markov models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the observation stream of one replication.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        replication: u64,
    },
    /// Run every replication and write raw and quantile tables.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, env = "BOEM_WORKERS")]
        workers: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Compare two quantile tables at one checkpoint.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Defaults to the last checkpoint.
        #[arg(long)]
        checkpoint: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo error of block statistics against block length.
    RateProbe {
        #[command(flatten)]
        common: Common,
        /// Block lengths; defaults to 64, 128, ..., 8192.
        #[arg(long, value_delimiter = ',')]
        taus: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        seeds: usize,
    },
    /// Randomized check of the smoothing forgetting bound at the true parameter.
    VerifyForgetting {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Normalized log-likelihood traces and the score on one simulated stream.
    Diagnostics {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(&self.config).with_context(|| format!("reading {}", self.config.display()))?;
        let mut cfg = ExperimentConfig::parse(&text).with_context(|| format!("parsing {}", self.config.display()))?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        Ok(cfg)
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { common, replication } => {
            let cfg = common.load()?;
            let sim = simulate_stream(&cfg, replication)?;
            let mut w = create(&cfg.output_dir, "observations.csv")?;
            write_observations(&mut w, &sim.states, &sim.observations, &cfg.hash())?;
            w.flush()?;
            println!("wrote {}", cfg.output_dir.join("observations.csv").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { common, reps, workers, format } => {
            let mut cfg = common.load()?;
            if let Some(r) = reps {
                cfg.replications = r;
            }
            cfg.validate()?;
            run(&cfg, workers, format)
        }
        Command::Compare { a, b, checkpoint, out } => {
            let load = |p: &Path| -> Result<QuantileTable> {
                read_quantiles(File::open(p).with_context(|| format!("opening {}", p.display()))?)
                    .with_context(|| format!("reading {}", p.display()))
            };
            let rows = compare(&load(&a)?, &load(&b)?, checkpoint)?;
            let mut text = String::from("coordinate,median_a,iqr_a,median_b,iqr_b,median_delta,iqr_delta\n");
            for r in rows {
                text.push_str(&format!(
                    "{},{:?},{:?},{:?},{:?},{:?},{:?}\n",
                    r.coordinate, r.median_a, r.iqr_a, r.median_b, r.iqr_b, r.median_delta, r.iqr_delta
                ));
            }
            match out {
                Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::RateProbe { common, taus, seeds } => {
            let cfg = common.load()?;
            let theta = finite_truth(&cfg)?;
            let taus = if taus.is_empty() { (6..=13).map(|k| 1usize << k).collect() } else { taus };
            let probe = rate_probe(&theta, &CategoricalLaw::stationary(&theta), &taus, seeds, cfg.seed)?;
            let mut text = String::from("tau,error,std_error\n");
            for r in &probe.rows {
                text.push_str(&format!("{},{:?},{:?}\n", r.tau, r.error, r.std_error));
            }
            print!("{text}");
            println!("# slope={:.4}", probe.slope);
            if common.out.is_some() {
                let mut w = create(&cfg.output_dir, "rate.csv")?;
                writeln!(w, "# config_hash={}", cfg.hash())?;
                w.write_all(text.as_bytes())?;
                w.flush()?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyForgetting { common, trials } => {
            let cfg = common.load()?;
            let theta = finite_truth(&cfg)?;
            let report = forgetting_trials(&theta, trials, &mut stream(cfg.seed, 0, Purpose::Aux))?;
            println!("trials={} violations={} worst_excess={:e}", report.trials, report.violations, report.worst_excess);
            Ok(if report.violations == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Diagnostics { common } => {
            let cfg = common.load()?;
            diagnostics(&cfg)
        }
    }
}

fn finite_truth(cfg: &ExperimentConfig) -> Result<boem_core::model::FiniteHmmParams> {
    if cfg.model != ModelKind::FiniteHmm {
        bail!("this command needs model = finite-hmm");
    }
    Ok(FiniteHmm::new(cfg.states, cfg.bounds.clone()).unflatten(&cfg.true_params)?)
}

fn run(cfg: &ExperimentConfig, workers: Option<usize>, format: Format) -> Result<ExitCode> {
    let out = run_experiment(cfg, workers)?;
    let dir = &cfg.output_dir;
    if !out.records.is_empty() {
        let mut w = create(dir, "raw.csv")?;
        write_raw(&mut w, &out.records, &cfg.checkpoints, &out.config_hash)?;
        w.flush()?;
        let table = QuantileTable::from_records(&out.records, &cfg.checkpoints, cfg.algorithm.averaged(), &out.config_hash)?;
        let mut w = create(dir, "quantiles.csv")?;
        write_quantiles(&mut w, &table)?;
        w.flush()?;
        if let Format::Svg = format {
            for coord in &out.coordinates {
                fs::write(dir.join(format!("{coord}.svg")), quantile_plot(&table, coord)?)?;
            }
        }
        let last = *cfg.checkpoints.last().expect("validated non-empty");
        println!("replications={} config_hash={}", out.records.len(), out.config_hash);
        for coord in &out.coordinates {
            if let Some(r) = table.get(last, coord) {
                println!("{coord} at {last}: median={:.6} q1={:.6} q3={:.6}", r.median, r.q1, r.q3);
            }
        }
    }
    if out.failures.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    let mut w = create(dir, "failures.csv")?;
    writeln!(w, "replication,seed,error")?;
    for f in &out.failures {
        eprintln!("replication {} (seed {}) failed: {}", f.replication, f.seed, f.error);
        writeln!(w, "{},{},\"{}\"", f.replication, f.seed, f.error.replace('"', "\"\""))?;
    }
    w.flush()?;
    Ok(ExitCode::FAILURE)
}

fn diagnostics(cfg: &ExperimentConfig) -> Result<ExitCode> {
    let sim = simulate_stream(cfg, 0)?;
    let y = &sim.observations;
    let cps = &cfg.checkpoints;
    let (truth, init, score_t) = match cfg.model {
        ModelKind::FiniteHmm => {
            let be = ExactBackend { model: FiniteHmm::new(cfg.states, cfg.bounds.clone()) };
            let t = be.model.unflatten(&cfg.true_params)?;
            let i = be.model.unflatten(&cfg.init_params)?;
            let chi = CategoricalLaw::stationary(&t);
            (
                normalized_loglik_trace(&be, &t, &chi, y, cps)?,
                normalized_loglik_trace(&be, &i, &chi, y, cps)?,
                score(&be, &t, &chi, y)?,
            )
        }
        ModelKind::Lgssm => {
            let be = KalmanBackend { model: Lgssm::new(cfg.bounds.clone()) };
            let t = be.model.unflatten(&cfg.true_params)?;
            let i = be.model.unflatten(&cfg.init_params)?;
            let chi = GaussianLaw::stationary(&t);
            (
                normalized_loglik_trace(&be, &t, &chi, y, cps)?,
                normalized_loglik_trace(&be, &i, &chi, y, cps)?,
                score(&be, &t, &chi, y)?,
            )
        }
        ModelKind::StochVol => bail!("diagnostics need an exact likelihood (finite-hmm or lgssm)"),
    };
    let mut text = String::from("observations,loglik_true,loglik_init\n");
    for ((t, a), (_, b)) in truth.iter().zip(&init) {
        text.push_str(&format!("{t},{a:?},{b:?}\n"));
    }
    print!("{text}");
    let n = y.len() as f64;
    let normalized: Vec<String> = score_t.iter().map(|g| format!("{:.6e}", g / n)).collect();
    println!("# normalized score at true parameter: {}", normalized.join(","));
    if let Some(dir) = Some(&cfg.output_dir).filter(|d| d.exists()) {
        let mut w = create(dir, "diagnostics.csv")?;
        writeln!(w, "# config_hash={}", cfg.hash())?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}
