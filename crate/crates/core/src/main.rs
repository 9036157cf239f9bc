use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use paddy_core::artifact::{digest_values, save_model, ModelArtifact, Provenance, TrainedModel};
use paddy_core::error::{Error, Result};
use paddy_core::evapo::train_et0_model;
use paddy_core::experiment::{
    export_plot_data, load_et0_model, load_moisture_model, load_period, period_forcing,
    run_experiment, write_report, ExperimentConfig, PeriodData,
};
use paddy_core::ingest::{
    daily_aggregate, read_half_hourly_file, write_daily_file, DEFAULT_MIN_COVERAGE,
};
use paddy_core::metrics::{mean_residual, r_squared, rmse};
use paddy_core::moisture::{simulate_moisture, train_moisture_model, SimMode};

#[derive(Parser)]
#[command(
    name = "paddy",
    version,
    about = "Paddy-field soil moisture estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Experiment config (TOML). Without it the built-in synthetic config is used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the training seed of both networks.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::synthetic_default(),
        };
        Ok(match self.seed {
            Some(s) => cfg.with_training_seed(s),
            None => cfg,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PeriodArg {
    Training,
    Validation,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    TeacherForced,
    ClosedLoop,
}

#[derive(Subcommand)]
enum Command {
    /// Print the built-in experiment config as TOML.
    InitConfig {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write both periods' daily weather and moisture to CSV.
    Synth {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Overrides the weather seeds (training uses SEED, validation SEED+1).
        #[arg(long)]
        weather_seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate half-hourly station records to a daily CSV.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Minimum half-hour records for a day to be kept.
        #[arg(long, default_value_t = DEFAULT_MIN_COVERAGE)]
        min_coverage: usize,
    },
    /// Train the temperature to ET0 network on the training period.
    TrainEt0 {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the moisture network on the training period.
    TrainMoisture {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Needed when the config feeds surrogate ET0 to the moisture model.
        #[arg(long)]
        et0_model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate moisture for one period and write observed/estimated CSV.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        et0_model: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "validation")]
        period: PeriodArg,
        /// Defaults to the config's simulation mode.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a CSV with `observed` and `estimated` columns.
    Evaluate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the full two-period experiment.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also write plot data into OUT.
        #[arg(long)]
        plots: bool,
    },
    /// Run the experiment and write only the plot data.
    ExportPlots {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn training_data(cfg: &ExperimentConfig) -> Result<PeriodData> {
    load_period(cfg, &cfg.training_period).map_err(|e| e.in_stage("load training period"))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })
        }
        _ => Ok(()),
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::InitConfig { out } => {
            let text = ExperimentConfig::synthetic_default().to_toml()?;
            match out {
                Some(path) => {
                    ensure_parent(&path)?;
                    fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?;
                }
                None => print!("{text}"),
            }
        }
        Command::Synth {
            cfg,
            weather_seed,
            out,
        } => {
            let mut cfg = cfg.load()?;
            if let Some(s) = weather_seed {
                cfg = cfg.with_weather_seed(s);
            }
            fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            for (file, period) in [
                ("training.csv", &cfg.training_period),
                ("validation.csv", &cfg.validation_period),
            ] {
                let data = load_period(&cfg, period)?;
                let path = out.join(file);
                write_daily_file(&path, &data.daily_observations())?;
                info!("wrote {} ({} days)", path.display(), data.weather.len());
            }
        }
        Command::Ingest {
            input,
            out,
            min_coverage,
        } => {
            let agg = daily_aggregate(&read_half_hourly_file(&input)?, min_coverage)?;
            ensure_parent(&out)?;
            write_daily_file(&out, &agg.days)?;
            info!(
                "wrote {} days, excluded {} ({})",
                agg.days.len(),
                agg.gaps.len(),
                agg.gaps
                    .iter()
                    .map(|g| g.date.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        }
        Command::TrainEt0 { cfg, out } => {
            let cfg = cfg.load()?;
            let data = training_data(&cfg)?;
            let fit = train_et0_model(
                &data.weather,
                &cfg.site,
                &cfg.et0_training,
                cfg.et0_normalizers,
            )
            .map_err(|e| e.in_stage("train et0"))?;
            let digest = digest_values(
                data.weather
                    .iter()
                    .flat_map(|d| [d.tmax, d.tavg, d.tmin])
                    .collect::<Vec<_>>()
                    .iter(),
            );
            info!(
                "final epoch loss {:.6e}",
                fit.loss_history.last().copied().unwrap_or(f64::NAN)
            );
            ensure_parent(&out)?;
            save_model(
                &ModelArtifact::new(
                    TrainedModel::Et0(fit.model),
                    Provenance {
                        seed: cfg.et0_training.seed,
                        epochs: cfg.et0_training.epochs,
                        data_digest: digest,
                    },
                ),
                &out,
            )?;
        }
        Command::TrainMoisture {
            cfg,
            et0_model,
            out,
        } => {
            let cfg = cfg.load()?;
            let data = training_data(&cfg)?;
            let et0 = et0_model.as_deref().map(load_et0_model).transpose()?;
            let forcing = period_forcing(&cfg, &data.weather, et0.as_ref())?;
            let fit = train_moisture_model(
                &forcing,
                &data.theta,
                &cfg.moisture_training,
                cfg.lag,
                cfg.moisture_normalizers,
            )
            .map_err(|e| e.in_stage("train moisture"))?;
            let digest = digest_values(
                forcing
                    .iter()
                    .flat_map(|f| [f.et0, f.precip, f.kc])
                    .chain(data.theta.iter().copied())
                    .collect::<Vec<_>>()
                    .iter(),
            );
            info!(
                "final epoch loss {:.6e}",
                fit.loss_history.last().copied().unwrap_or(f64::NAN)
            );
            ensure_parent(&out)?;
            save_model(
                &ModelArtifact::new(
                    TrainedModel::Moisture(fit.model),
                    Provenance {
                        seed: cfg.moisture_training.seed,
                        epochs: cfg.moisture_training.epochs,
                        data_digest: digest,
                    },
                ),
                &out,
            )?;
        }
        Command::Simulate {
            cfg,
            model,
            et0_model,
            period,
            mode,
            out,
        } => {
            let cfg = cfg.load()?;
            let model = load_moisture_model(&model)?;
            let et0 = et0_model.as_deref().map(load_et0_model).transpose()?;
            let period = match period {
                PeriodArg::Training => &cfg.training_period,
                PeriodArg::Validation => &cfg.validation_period,
            };
            let data = load_period(&cfg, period)?;
            let forcing = period_forcing(&cfg, &data.weather, et0.as_ref())?;
            let mode = match mode {
                Some(ModeArg::TeacherForced) => SimMode::TeacherForced,
                Some(ModeArg::ClosedLoop) => SimMode::ClosedLoop,
                None => cfg.sim_mode,
            };
            let lag = model.lag();
            let est = simulate_moisture(
                &model,
                &forcing,
                &data.theta[..lag],
                mode,
                Some(&data.theta),
            )?;
            let mut text = String::from("date,day_index,observed,estimated\n");
            for ((d, o), e) in data.weather.iter().zip(&data.theta).zip(&est).skip(lag) {
                text.push_str(&format!("{},{},{o},{e}\n", d.date, d.day_index));
            }
            ensure_parent(&out)?;
            fs::write(&out, text).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
        }
        Command::Evaluate { input } => {
            let (obs, est) = read_pairs(&input)?;
            let r2 = r_squared(&obs, &est)?;
            println!("n             {}", obs.len());
            println!("r2            {:.6}", r2.pearson);
            println!("r2_explained  {:.6}", r2.explained);
            println!("rmse          {:.6}", rmse(&obs, &est)?);
            println!("mean_residual {:.6}", mean_residual(&obs, &est)?);
        }
        Command::Run { cfg, out, plots } => {
            let report = run_experiment(&cfg.load()?)?;
            for path in write_report(&report, &out)? {
                info!("wrote {}", path.display());
            }
            if plots {
                export_plot_data(&report, &out)?;
            }
            for c in &report.cells {
                println!(
                    "{:<6} {:<11} R2 {:.4}  RMSE {:.4}",
                    c.target,
                    c.role.as_str(),
                    c.r2.pearson,
                    c.rmse
                );
            }
        }
        Command::ExportPlots { cfg, out } => {
            let report = run_experiment(&cfg.load()?)?;
            for path in export_plot_data(&report, &out)? {
                info!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn read_pairs(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                line: 1,
                field: name.to_string(),
                message: "missing column".to_string(),
            })
    };
    let (io, ie) = (column("observed")?, column("estimated")?);
    let (mut obs, mut est) = (Vec::new(), Vec::new());
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let parse = |idx: usize, field: &str| -> Result<f64> {
            row.get(idx)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e: std::num::ParseFloatError| Error::Parse {
                    line,
                    field: field.to_string(),
                    message: e.to_string(),
                })
        };
        obs.push(parse(io, "observed")?);
        est.push(parse(ie, "estimated")?);
    }
    if obs.is_empty() {
        warn!("{} has no data rows", path.display());
    }
    Ok((obs, est))
}
