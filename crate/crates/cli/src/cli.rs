use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use mark0_core::export::{self, Format, VERSION};
use mark0_core::runner::sweep_table;
use mark0_core::sensitivity::{
    self, active_parameters, hessian, jacobian, phase_scan, stiff_directions, LossSpec, Output, PhaseGrid,
    Thresholds,
};
use mark0_core::shocks::{calibrate_template, ingest_csv};
use mark0_core::{run_ensemble, run_seed, sweep, Error, Month, ScenarioConfig, ShockSchedule};
use tracing::info;

#[derive(Debug, Parser)]
#[command(name = "mark0", version = VERSION, about = "Agent-based macroeconomy under shocks and policy")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    /// Worker threads for ensembles, sweeps and scans (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single runs, one output file per seed.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        out: OutputArgs,
        /// Seeds: `7`, `1..20` or `1,4,9` (default: the config's seed).
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Independent runs over seeds with pointwise bands and metric medians.
    Ensemble {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        out: OutputArgs,
        #[arg(long, default_value = "1..20")]
        seeds: String,
    },
    /// One ensemble per value of a single field.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        out: OutputArgs,
        #[arg(long, default_value = "1..20")]
        seeds: String,
        /// Dotted path of the swept field.
        #[arg(long)]
        param: String,
        /// Values: `0,0.2,0.4` or `0,0.1,...,0.6`.
        #[arg(long)]
        values: String,
    },
    /// Finite-difference Jacobian, Hessian spectrum and stiff directions.
    Sloppy {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        out: OutputArgs,
        #[arg(long, default_value = "1..50")]
        seeds: String,
        /// Outputs in the loss: `inflation`, `unemployment` or both.
        #[arg(long, default_value = "inflation,unemployment", value_delimiter = ',')]
        outputs: Vec<String>,
        /// Parameters to probe (default: every active model parameter).
        #[arg(long, value_delimiter = ',')]
        params: Vec<String>,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        #[arg(long, default_value = "2019-02")]
        window_start: Month,
        #[arg(long, default_value_t = 132)]
        window_months: u32,
        /// Stiff directions to print.
        #[arg(long, default_value_t = 3)]
        top: usize,
    },
    /// Stable, hyperinflationary or collapsed, over g = g_p = g_w and one more field.
    Phase {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        out: OutputArgs,
        #[arg(long, default_value = "1..10")]
        seeds: String,
        #[arg(long, default_value = "0.6,0.7,...,1.5")]
        g: String,
        #[arg(long, default_value = "central_bank.anchor")]
        axis: String,
        #[arg(long, default_value = "0,0.25,0.5,0.75,0.95")]
        axis_values: String,
    },
    /// Fit the ramp template to a monthly CSV series.
    Calibrate {
        /// CSV with `month,value` rows.
        #[arg(long)]
        input: PathBuf,
        /// Month the series is indexed to.
        #[arg(long, default_value = "2020-01")]
        base: Month,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Local HTTP scenario service.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long, default_value_t = 8750)]
        port: u16,
    },
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// TOML or JSON scenario file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named scenario: inactive, anchored or floating.
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// Override one field, e.g. `--set central_bank.taylor_strength=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Switch every shock off.
    #[arg(long)]
    pub no_shocks: bool,
    /// Recorded months.
    #[arg(long)]
    pub horizon: Option<u32>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, env = "MARK0_OUT_DIR", default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value = "csv")]
    pub format: Format,
}

impl ScenarioArgs {
    /// The scenario with every override applied and validated.
    pub fn load(&self) -> mark0_core::Result<ScenarioConfig> {
        let mut config = match (&self.config, &self.preset) {
            (Some(path), _) => load_config(path)?,
            (None, Some(name)) => ScenarioConfig::preset(name)?,
            (None, None) => ScenarioConfig::default(),
        };
        if self.no_shocks {
            let onset = config.shocks.onset;
            config.shocks = ShockSchedule { onset, ..ShockSchedule::none() };
        }
        if let Some(h) = self.horizon {
            config.run.horizon_months = h;
        }
        for o in &self.overrides {
            config.apply_override(o)?;
        }
        config.validate()?;
        Ok(config)
    }
}

fn load_config(path: &Path) -> mark0_core::Result<ScenarioConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let doc = serde_json::from_str(&text).map_err(|e| Error::config("document", e.to_string()))?;
        ScenarioConfig::from_json_value(doc)
    } else {
        ScenarioConfig::from_toml_str(&text)
    }
}

/// `7`, `1..20` (inclusive) or `1,4,9`.
pub fn parse_seeds(text: &str) -> mark0_core::Result<Vec<u64>> {
    let bad = || Error::config("seeds", format!("expected `7`, `1..20` or `1,4,9`, got `{text}`"));
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        text.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<mark0_core::Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

/// Comma-separated numbers; `a,b,...,c` continues the step `b - a` up to `c`.
pub fn parse_values(key: &str, text: &str) -> mark0_core::Result<Vec<f64>> {
    let bad = |t: &str| Error::config(key, format!("`{t}` is not a number"));
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if let Some(pos) = parts.iter().position(|p| *p == "...") {
        if pos != 2 || parts.len() != 4 {
            return Err(Error::config(key, "ranges must look like `a,b,...,c`"));
        }
        let num = |t: &str| t.parse::<f64>().map_err(|_| bad(t));
        let (a, b, c) = (num(parts[0])?, num(parts[1])?, num(parts[3])?);
        let step = b - a;
        if !(step > 0.0) || c < a {
            return Err(Error::config(key, "ranges need an increasing step"));
        }
        let n = ((c - a) / step + 1e-9).floor() as usize;
        // Rounded to 12 digits so 0.1 steps print as typed.
        return Ok((0..=n).map(|k| ((a + k as f64 * step) * 1e12).round() / 1e12).collect());
    }
    parts.iter().map(|t| t.parse().map_err(|_| bad(t))).collect()
}

fn parse_outputs(names: &[String]) -> mark0_core::Result<Vec<Output>> {
    names
        .iter()
        .map(|n| match n.trim() {
            "inflation" => Ok(Output::Inflation),
            "unemployment" => Ok(Output::Unemployment),
            other => Err(Error::config("outputs", format!("unknown output `{other}`"))),
        })
        .collect()
}

/// Entry point shared by the binary. 0 ok, 1 configuration error, 2 runtime error.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(cli.verbose);
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for anything wrong with the inputs, 2 for failures while running.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Config { .. } | Error::Regime { .. } | Error::Data { .. } | Error::MissingBaseMonth(_)) => 1,
        _ => 2,
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn print_json<T: serde::Serialize>(value: &T) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

pub fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Run { scenario, out, seeds } => {
            let config = scenario.load()?;
            let seeds = match seeds {
                Some(s) => parse_seeds(&s)?,
                None => vec![config.run.seed],
            };
            for seed in seeds {
                let output = run_seed(&config, seed, None)?;
                let path = export::export_run(&config, &output, out.format, &out.out)?;
                info!(seed, path = %path.display(), "run written");
                print_json(&serde_json::json!({
                    "seed": seed,
                    "path": path,
                    "metrics": output.metrics,
                    "runaway": output.runaway,
                }))?;
            }
            Ok(())
        }
        Command::Ensemble { scenario, out, seeds } => {
            let config = scenario.load()?;
            let summary = run_ensemble(&config, &parse_seeds(&seeds)?)?;
            create_dir(&out.out)?;
            let path = out.out.join("ensemble.json");
            export::write_json(&path, &summary)?;
            if out.format == Format::Csv {
                write_bands(&out.out.join("bands.csv"), &summary)?;
            }
            print_json(&serde_json::json!({
                "path": path,
                "summary": summary.summary,
                "failures": summary.failures,
            }))
        }
        Command::Sweep {
            scenario,
            out,
            seeds,
            param,
            values,
        } => {
            let config = scenario.load()?;
            let values = parse_values("values", &values)?;
            let points = sweep(&config, &param, &values, &parse_seeds(&seeds)?)?;
            create_dir(&out.out)?;
            let table = sweep_table(&points);
            let path = out.out.join("sweep.csv");
            let mut w = String::from(
                "value,runs,peak_inflation,peak_realized_inflation,peak_unemployment,mean_unemployment,\
                 mean_inflation,months_above_target,collapse_fraction,recovered_fraction,runaway_fraction\n",
            );
            for (v, m) in &table {
                w.push_str(&format!(
                    "{v},{},{},{},{},{},{},{},{},{},{}\n",
                    m.runs,
                    m.peak_inflation,
                    m.peak_realized_inflation,
                    m.peak_unemployment,
                    m.mean_unemployment,
                    m.mean_inflation,
                    m.months_above_target,
                    m.collapse_fraction,
                    m.recovered_fraction,
                    m.runaway_fraction
                ));
            }
            fs::write(&path, &w).with_context(|| path.display().to_string())?;
            if out.format == Format::Doc {
                export::write_json(&out.out.join("sweep.json"), &points)?;
            }
            print!("{w}");
            Ok(())
        }
        Command::Sloppy {
            scenario,
            out,
            seeds,
            outputs,
            params,
            epsilon,
            window_start,
            window_months,
            top,
        } => {
            let config = scenario.load()?;
            let spec = LossSpec {
                outputs: parse_outputs(&outputs)?,
                seeds: parse_seeds(&seeds)?,
                window_start,
                window_months,
                epsilon,
                parameters: if params.is_empty() { active_parameters(&config) } else { params },
            };
            let jac = jacobian(&spec, &config)?;
            let report = hessian(&jac, &spec.outputs);
            create_dir(&out.out)?;
            export::write_json(&out.out.join("hessian.json"), &report)?;
            let mut csv = String::from("rank,eigenvalue");
            for p in &report.parameters {
                csv.push(',');
                csv.push_str(p);
            }
            csv.push('\n');
            for (k, (val, vec)) in report.eigenvalues.iter().zip(&report.eigenvectors).enumerate() {
                csv.push_str(&format!("{},{val}", k + 1));
                for c in vec {
                    csv.push_str(&format!(",{c}"));
                }
                csv.push('\n');
            }
            fs::write(out.out.join("eigen.csv"), csv)?;
            print_json(&serde_json::json!({
                "decades": sensitivity::spectrum_decades(&report.eigenvalues),
                "eigenvalues": report.eigenvalues,
                "stiff": stiff_directions(&report, top),
                "flagged": jac.flagged,
            }))
        }
        Command::Phase {
            scenario,
            out,
            seeds,
            g,
            axis,
            axis_values,
        } => {
            let config = scenario.load()?;
            let grid = PhaseGrid {
                g: parse_values("g", &g)?,
                axis_values: parse_values(&axis, &axis_values)?,
                axis,
                seeds: parse_seeds(&seeds)?,
            };
            let map = phase_scan(&config, &grid, &Thresholds::default())?;
            create_dir(&out.out)?;
            export::write_json(&out.out.join("phase.json"), &map)?;
            let mut csv = format!("{},g,phase,stable,hyperinflation,collapse,failed\n", map.grid.axis);
            for c in &map.cells {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    c.axis_value,
                    c.g,
                    serde_json::to_value(c.phase)?.as_str().unwrap_or_default(),
                    c.stable,
                    c.hyperinflation,
                    c.collapse,
                    c.failed
                ));
            }
            fs::write(out.out.join("phase.csv"), &csv)?;
            print!("{csv}");
            Ok(())
        }
        Command::Calibrate { input, base, out } => {
            let series = ingest_csv(&input, base)?;
            let fit = calibrate_template(&series)?;
            create_dir(&out.out)?;
            export::write_json(&out.out.join("calibration.json"), &fit)?;
            print_json(&fit)
        }
        Command::Serve { bind, port } => {
            let addr = format!("{bind}:{port}");
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::service::serve(&addr))
                .map_err(|e| anyhow!("service on {addr} stopped: {e}"))
        }
    }
}

fn write_bands(path: &Path, summary: &mark0_core::EnsembleSummary) -> anyhow::Result<()> {
    let mut w = String::from("month");
    let names: Vec<&String> = summary.bands.keys().collect();
    for n in &names {
        for q in ["median", "q10", "q90"] {
            w.push_str(&format!(",{n}_{q}"));
        }
    }
    w.push('\n');
    for (t, m) in summary.months.iter().enumerate() {
        w.push_str(&m.to_string());
        for n in &names {
            let b = &summary.bands[*n];
            w.push_str(&format!(",{},{},{}", b.median[t], b.q10[t], b.q90[t]));
        }
        w.push('\n');
    }
    fs::write(path, w).with_context(|| path.display().to_string())
}
