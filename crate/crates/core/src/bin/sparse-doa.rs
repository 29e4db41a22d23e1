use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use sparse_doa::detector::{DetectOptions, Detector, SigmaSpec};
use sparse_doa::group_lasso_path::{group_knots_for, GroupDesign};
use sparse_doa::lasso_path::{general_knots, orthogonal_knots, PathEvent};
use sparse_doa::montecarlo::{figure_config, run_experiment, table_config, ExperimentConfig};
use sparse_doa::signal_model::{ModelConfig, Snapshot};
use sparse_doa::stat_tests::{ModelRequirement, NoiseLevel, NullContext, TestKind};
use sparse_doa::thresholds::{threshold, ActiveSetThresholds};
use sparse_doa::tolerance::Tolerances;
use sparse_doa::Error;

#[derive(Parser)]
#[command(name = "sparse-doa", version, about = "Single-snapshot DoA detection from lasso knot tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo detection rates for an experiment config or a published table.
    Simulate(SimulateArgs),
    /// Detect sources in one snapshot.
    Detect(DetectArgs),
    /// Threshold of a test at a target probability of correct detection.
    Threshold(ThresholdArgs),
    /// Knots of the lasso (or group-lasso) path of one snapshot.
    Path(PathArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, conflicts_with_all = ["table", "figure"], required_unless_present_any = ["table", "figure"])]
    config: Option<PathBuf>,
    /// Published table to rerun (1 to 7).
    #[arg(long, conflicts_with = "figure")]
    table: Option<u8>,
    /// Published event-B figure to rerun (1 to 3).
    #[arg(long)]
    figure: Option<u8>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV report; `-` for standard output.
    #[arg(long, default_value = "-")]
    out: String,
    /// Also write the full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    test: TestKind,
    #[arg(long, default_value_t = 0.99)]
    pc: f64,
    /// Complex noise variance, or `estimate`.
    #[arg(long)]
    sigma: Option<String>,
    /// Least-squares refit of the amplitudes on the detected support.
    #[arg(long)]
    refit: bool,
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long)]
    test: TestKind,
    /// Number of array elements.
    #[arg(long)]
    m: usize,
    /// Hypothesised number of sources.
    #[arg(long)]
    s: usize,
    #[arg(long, default_value_t = 0.99)]
    pc: f64,
    /// Model for D and E, whose null depends on the active set.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Comma-separated active grid indices (D, E).
    #[arg(long, value_delimiter = ',')]
    active: Vec<usize>,
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
struct PathArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    snapshot: PathBuf,
    /// Group-lasso path of the grid-matching model.
    #[arg(long)]
    group: bool,
    #[arg(long, default_value = "-")]
    out: String,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn sink(out: &str) -> Result<Box<dyn Write>, Error> {
    Ok(if out == "-" {
        Box::new(io::stdout().lock())
    } else {
        Box::new(fs::File::create(out)?)
    })
}

fn simulate(a: SimulateArgs) -> Result<(), Error> {
    let mut cfg: ExperimentConfig = match (&a.config, a.table, a.figure) {
        (Some(p), _, _) => read_json(p)?,
        (None, Some(t), _) => table_config(t, 10_000, 0)?,
        (None, None, Some(f)) => figure_config(f, 10_000, 0)?,
        _ => unreachable!("clap requires one source"),
    };
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    let report = run_experiment(&cfg)?;
    report.write_csv(sink(&a.out)?)?;
    if let Some(p) = a.json {
        fs::write(p, report.to_json()?)?;
    }
    Ok(())
}

fn parse_sigma(s: &str) -> Result<SigmaSpec, Error> {
    if s.eq_ignore_ascii_case("estimate") {
        return Ok(SigmaSpec::Estimate);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("--sigma takes a variance or 'estimate', got '{s}'")))?;
    Ok(SigmaSpec::Known(NoiseLevel::from_variance(v)?))
}

fn detect(a: DetectArgs) -> Result<(), Error> {
    let model = read_json::<ModelConfig>(&a.model)?.build()?;
    let snap: Snapshot = read_json(&a.snapshot)?;
    let mut opts = DetectOptions::new(a.test, a.pc).with_refit(a.refit);
    if let Some(s) = &a.sigma {
        opts = opts.with_sigma(parse_sigma(s)?);
    }
    let mut det = Detector::new(model, opts)?;
    let result = det.detect(&snap.measurement())?;
    let mut w = sink(&a.out)?;
    serde_json::to_writer_pretty(&mut w, &result)?;
    writeln!(w)?;
    Ok(())
}

fn threshold_cmd(a: ThresholdArgs) -> Result<(), Error> {
    if a.s >= a.m {
        return Err(Error::InvalidConfig(format!("--s must be below --m ({} >= {})", a.s, a.m)));
    }
    let eta = match a.test.requirement() {
        ModelRequirement::Orthogonal => threshold(a.test, &NullContext::count(a.m - a.s), a.pc)?,
        _ => {
            let path = a
                .model
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig(format!("test {} needs --model", a.test)))?;
            let model = read_json::<ModelConfig>(path)?.build()?;
            if model.num_elements() != a.m {
                return Err(Error::InvalidConfig(format!(
                    "--m {} does not match the model's {} elements",
                    a.m,
                    model.num_elements()
                )));
            }
            if a.active.len() != a.s {
                return Err(Error::InvalidConfig(format!(
                    "--active lists {} indices but --s is {}",
                    a.active.len(),
                    a.s
                )));
            }
            ActiveSetThresholds::new(a.test, &model, a.pc)?.eta(&a.active)?
        }
    };
    let mut w = csv::Writer::from_writer(sink(&a.out)?);
    w.write_record(["test", "M", "S", "pc", "eta"])?;
    w.write_record([a.test.name().to_string(), a.m.to_string(), a.s.to_string(), a.pc.to_string(), format!("{eta:.10}")])?;
    w.flush()?;
    Ok(())
}

fn path_cmd(a: PathArgs) -> Result<(), Error> {
    let model = read_json::<ModelConfig>(&a.model)?.build()?;
    let snap: Snapshot = read_json(&a.snapshot)?;
    let b = snap.measurement();
    let m = model.num_elements();
    // (tau, index, active size) per knot.
    let rows: Vec<(f64, usize, usize, PathEvent)> = if a.group {
        let design = GroupDesign::from_model(&model)?;
        let b_bar = snap.projected(&model)?;
        group_knots_for(&design, &b_bar, m, Tolerances::DEFAULT)?
            .into_iter()
            .map(|k| (k.tau, k.entering_group, k.active_groups.len(), k.event))
            .collect()
    } else {
        let path = if model.is_orthogonal() { orthogonal_knots(&model, &b)? } else { general_knots(&model, &b, m)? };
        path.knots
            .into_iter()
            .map(|k| (k.tau, k.entering_index, k.active_set.len(), k.event))
            .collect()
    };
    let mut w = csv::Writer::from_writer(sink(&a.out)?);
    w.write_record(["knot_index", "tau", "entering_index", "active_set_size", "event"])?;
    for (i, (tau, idx, size, ev)) in rows.into_iter().enumerate() {
        let ev = match ev {
            PathEvent::Enter => "enter",
            PathEvent::Leave => "leave",
        };
        w.write_record([(i + 1).to_string(), format!("{tau:.8e}"), idx.to_string(), size.to_string(), ev.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let run = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Detect(a) => detect(a),
        Command::Threshold(a) => threshold_cmd(a),
        Command::Path(a) => path_cmd(a),
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 2 } else { 1 })
        }
    }
}
