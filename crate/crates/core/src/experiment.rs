//! Two-period experiment: fit both networks on the first cultivation period,
//! score them on both, and write reports and plot data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Days, NaiveDate};
use log::info;
use serde::{Deserialize, Serialize};

use crate::ann::TrainConfig;
use crate::artifact::{self, digest_values, ModelArtifact, Provenance, TrainedModel};
use crate::crop::{validate_schedule, KcSchedule};
use crate::error::{Error, Result};
use crate::evapo::{
    hargreaves_for_day, train_et0_model, DailyWeather, Et0Model, Et0Normalizers, SiteLocation,
};
use crate::ingest::{self, daily_aggregate, DailyObservation, Gap};
use crate::metrics::{mean_residual, r_squared, rmse, RSquared};
use crate::moisture::{
    simulate_moisture, train_moisture_model, ForcingDay, MoistureModel, MoistureNormalizers,
    SimMode,
};
use crate::synth::{generate_truth, generate_weather, FieldParams, WeatherGenParams};

/// Where the moisture model's ET0 input comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Et0Source {
    /// The trained temperature network.
    Surrogate,
    /// Hargreaves ET0 computed directly.
    Hargreaves,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic { weather: WeatherGenParams },
    Daily { path: PathBuf },
    HalfHourly { path: PathBuf, min_coverage: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodConfig {
    pub name: String,
    pub planting_date: NaiveDate,
    pub source: DataSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub site: SiteLocation,
    pub kc: KcSchedule,
    pub lag: usize,
    pub sim_mode: SimMode,
    pub moisture_et0_source: Et0Source,
    pub et0_training: TrainConfig,
    pub moisture_training: TrainConfig,
    pub et0_normalizers: Et0Normalizers,
    pub moisture_normalizers: MoistureNormalizers,
    pub field: FieldParams,
    pub training_period: PeriodConfig,
    pub validation_period: PeriodConfig,
}

impl ExperimentConfig {
    /// Two synthetic 118-day seasons planted on 14 Oct 2010 and 20 Aug 2011,
    /// the second slightly warmer and drier.
    pub fn synthetic_default() -> Self {
        let kc = KcSchedule {
            len_late: 28,
            ..KcSchedule::default()
        };
        let p1 = NaiveDate::from_ymd_opt(2010, 10, 14).expect("static date");
        let p2 = NaiveDate::from_ymd_opt(2011, 8, 20).expect("static date");
        let w1 = WeatherGenParams {
            seed: 2010,
            n_days: kc.season_days(),
            start_date: p1,
            ..WeatherGenParams::default()
        };
        let w2 = WeatherGenParams {
            seed: 2011,
            start_date: p2,
            tavg_mean: 23.8,
            wet_day_prob: 0.45,
            ..w1.clone()
        };
        Self {
            site: SiteLocation::default(),
            kc,
            lag: 1,
            sim_mode: SimMode::ClosedLoop,
            moisture_et0_source: Et0Source::Surrogate,
            et0_training: TrainConfig::default(),
            moisture_training: TrainConfig::default(),
            et0_normalizers: Et0Normalizers::default(),
            moisture_normalizers: MoistureNormalizers::default(),
            field: FieldParams::default(),
            training_period: PeriodConfig {
                name: "first cultivation".to_string(),
                planting_date: p1,
                source: DataSource::Synthetic { weather: w1 },
            },
            validation_period: PeriodConfig {
                name: "second cultivation".to_string(),
                planting_date: p2,
                source: DataSource::Synthetic { weather: w2 },
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.site.validate()?;
        validate_schedule(&self.kc, self.kc.season_days())?;
        if self.lag == 0 {
            return Err(Error::Config("lag must be at least 1".to_string()));
        }
        self.et0_training.validate()?;
        self.moisture_training.validate()?;
        self.field.validate()?;
        for period in [&self.training_period, &self.validation_period] {
            if let DataSource::Synthetic { weather } = &period.source {
                weather.validate()?;
                if weather.start_date != period.planting_date {
                    return Err(Error::Config(format!(
                        "period `{}`: weather start_date {} differs from planting_date {}",
                        period.name, weather.start_date, period.planting_date
                    )));
                }
                if weather.n_days != self.kc.season_days() {
                    return Err(Error::Config(format!(
                        "period `{}`: weather n_days {} differs from the {}-day crop schedule",
                        period.name,
                        weather.n_days,
                        self.kc.season_days()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Sets the training seed of both networks.
    pub fn with_training_seed(mut self, seed: u64) -> Self {
        self.et0_training.seed = seed;
        self.moisture_training.seed = seed;
        self
    }

    /// Sets the weather seeds of synthetic periods to `seed` and `seed + 1`.
    pub fn with_weather_seed(mut self, seed: u64) -> Self {
        for (i, period) in [&mut self.training_period, &mut self.validation_period]
            .into_iter()
            .enumerate()
        {
            if let DataSource::Synthetic { weather } = &mut period.source {
                weather.seed = seed + i as u64;
            }
        }
        self
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for period in [&mut cfg.training_period, &mut cfg.validation_period] {
            match &mut period.source {
                DataSource::Daily { path } | DataSource::HalfHourly { path, .. }
                    if path.is_relative() =>
                {
                    *path = base.join(&*path);
                }
                _ => {}
            }
        }
        Ok(cfg)
    }
}

/// One cultivation period's daily inputs and observed (or simulated) moisture.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodData {
    pub name: String,
    pub weather: Vec<DailyWeather>,
    pub theta: Vec<f64>,
    pub gaps: Vec<Gap>,
}

impl PeriodData {
    pub fn daily_observations(&self) -> Vec<DailyObservation> {
        self.weather
            .iter()
            .zip(&self.theta)
            .map(|(w, t)| DailyObservation {
                weather: *w,
                theta: Some(*t),
            })
            .collect()
    }
}

/// Generates or reads one period, re-indexed from its planting date.
pub fn load_period(cfg: &ExperimentConfig, period: &PeriodConfig) -> Result<PeriodData> {
    let season = cfg.kc.season_days();
    let (days, gaps) = match &period.source {
        DataSource::Synthetic { weather } => {
            let weather = generate_weather(weather)?;
            let truth = generate_truth(&weather, &cfg.site, &cfg.kc, &cfg.field)?;
            return Ok(PeriodData {
                name: period.name.clone(),
                weather,
                theta: truth.theta,
                gaps: Vec::new(),
            });
        }
        DataSource::Daily { path } => (ingest::read_daily_file(path)?, Vec::new()),
        DataSource::HalfHourly { path, min_coverage } => {
            let agg = daily_aggregate(&ingest::read_half_hourly_file(path)?, *min_coverage)?;
            (agg.days, agg.gaps)
        }
    };
    select_season(period, &days, season).map(|(weather, theta)| PeriodData {
        name: period.name.clone(),
        weather,
        theta,
        gaps,
    })
}

fn select_season(
    period: &PeriodConfig,
    days: &[DailyObservation],
    season: u32,
) -> Result<(Vec<DailyWeather>, Vec<f64>)> {
    let by_date: BTreeMap<NaiveDate, &DailyObservation> =
        days.iter().map(|d| (d.weather.date, d)).collect();
    let mut weather = Vec::with_capacity(season as usize);
    let mut theta = Vec::with_capacity(season as usize);
    let mut missing = Vec::new();
    for i in 0..season {
        let date = period
            .planting_date
            .checked_add_days(Days::new(i as u64))
            .ok_or_else(|| Error::invalid("date overflow"))?;
        match by_date.get(&date) {
            Some(d) => match d.theta {
                Some(t) => {
                    weather.push(DailyWeather {
                        day_index: i,
                        ..d.weather
                    });
                    theta.push(t);
                }
                None => missing.push(format!("{date} (no moisture)")),
            },
            None => missing.push(date.to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "period `{}` is missing {} of {season} days: {}",
            period.name,
            missing.len(),
            missing.join(", ")
        )));
    }
    Ok((weather, theta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    Validation,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Validation => "validation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricCell {
    /// `et0` or `theta`.
    pub target: &'static str,
    pub role: Role,
    /// How the estimates were produced.
    pub mode: &'static str,
    pub n: usize,
    pub r2: RSquared,
    pub rmse: f64,
    pub mean_residual: f64,
}

impl MetricCell {
    fn score(
        target: &'static str,
        role: Role,
        mode: &'static str,
        obs: &[f64],
        est: &[f64],
    ) -> Result<Self> {
        Ok(Self {
            target,
            role,
            mode,
            n: obs.len(),
            r2: r_squared(obs, est)?,
            rmse: rmse(obs, est)?,
            mean_residual: mean_residual(obs, est)?,
        })
    }
}

/// Per-period series behind the metric cells.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodSeries {
    pub name: String,
    pub role: Role,
    pub weather: Vec<DailyWeather>,
    pub gaps: Vec<Gap>,
    /// Hargreaves ET0.
    pub et0_reference: Vec<f64>,
    pub et0_estimate: Vec<f64>,
    pub theta_observed: Vec<f64>,
    /// Same length as `theta_observed`; the first `lag` entries are warm-up
    /// copies of the observations and are not scored.
    pub theta_estimate: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub config: ExperimentConfig,
    pub cells: Vec<MetricCell>,
    pub periods: Vec<PeriodSeries>,
    pub et0_loss: Vec<f64>,
    pub moisture_loss: Vec<f64>,
    pub et0_model: ModelArtifact,
    pub moisture_model: ModelArtifact,
}

impl Report {
    pub fn cell(&self, target: &str, role: Role) -> Option<&MetricCell> {
        self.cells
            .iter()
            .find(|c| c.target == target && c.role == role)
    }
}

fn forcing_for(
    cfg: &ExperimentConfig,
    weather: &[DailyWeather],
    et0_reference: &[f64],
    et0_estimate: &[f64],
) -> Result<Vec<ForcingDay>> {
    let et0 = match cfg.moisture_et0_source {
        Et0Source::Surrogate => et0_estimate,
        Et0Source::Hargreaves => et0_reference,
    };
    weather
        .iter()
        .zip(et0)
        .map(|(d, e)| ForcingDay::new(*e, d.precip, cfg.kc.kc_at(d.day_index as i64)?))
        .collect()
}

/// Moisture-model inputs for one period. `et0_model` is required when the
/// config feeds surrogate ET0 to the moisture model.
pub fn period_forcing(
    cfg: &ExperimentConfig,
    weather: &[DailyWeather],
    et0_model: Option<&Et0Model>,
) -> Result<Vec<ForcingDay>> {
    let reference = weather
        .iter()
        .map(|d| hargreaves_for_day(d, &cfg.site))
        .collect::<Result<Vec<_>>>()?;
    let estimate = match (cfg.moisture_et0_source, et0_model) {
        (Et0Source::Surrogate, Some(m)) => m.predict_days(weather)?,
        (Et0Source::Surrogate, None) => {
            return Err(Error::invalid(
                "config uses surrogate ET0 for moisture but no ET0 model was given",
            ))
        }
        (Et0Source::Hargreaves, _) => Vec::new(),
    };
    forcing_for(cfg, weather, &reference, &estimate)
}

fn mode_label(mode: SimMode) -> &'static str {
    match mode {
        SimMode::TeacherForced => "teacher_forced",
        SimMode::ClosedLoop => "closed_loop",
    }
}

/// Runs the full two-period protocol. Deterministic for a given config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let train =
        load_period(cfg, &cfg.training_period).map_err(|e| e.in_stage("load training period"))?;
    let valid = load_period(cfg, &cfg.validation_period)
        .map_err(|e| e.in_stage("load validation period"))?;
    info!(
        "loaded {} + {} days",
        train.weather.len(),
        valid.weather.len()
    );

    let et0_ref = |p: &PeriodData| -> Result<Vec<f64>> {
        p.weather
            .iter()
            .map(|d| hargreaves_for_day(d, &cfg.site))
            .collect()
    };
    let ref_train = et0_ref(&train).map_err(|e| e.in_stage("hargreaves"))?;
    let ref_valid = et0_ref(&valid).map_err(|e| e.in_stage("hargreaves"))?;

    let et0_fit = train_et0_model(
        &train.weather,
        &cfg.site,
        &cfg.et0_training,
        cfg.et0_normalizers,
    )
    .map_err(|e| e.in_stage("train et0"))?;
    let et0_model = et0_fit.model;
    let est_train = et0_model
        .predict_days(&train.weather)
        .map_err(|e| e.in_stage("predict et0"))?;
    let est_valid = et0_model
        .predict_days(&valid.weather)
        .map_err(|e| e.in_stage("predict et0"))?;

    let forcing_train = forcing_for(cfg, &train.weather, &ref_train, &est_train)
        .map_err(|e| e.in_stage("moisture forcing"))?;
    let forcing_valid = forcing_for(cfg, &valid.weather, &ref_valid, &est_valid)
        .map_err(|e| e.in_stage("moisture forcing"))?;

    let moisture_fit = train_moisture_model(
        &forcing_train,
        &train.theta,
        &cfg.moisture_training,
        cfg.lag,
        cfg.moisture_normalizers,
    )
    .map_err(|e| e.in_stage("train moisture"))?;
    let moisture_model = moisture_fit.model;

    let lag = cfg.lag;
    // Training fit is the one-step (teacher-forced) estimate the network was trained on.
    let theta_train = simulate_moisture(
        &moisture_model,
        &forcing_train,
        &train.theta[..lag],
        SimMode::TeacherForced,
        Some(&train.theta),
    )
    .map_err(|e| e.in_stage("simulate training period"))?;
    let theta_valid = simulate_moisture(
        &moisture_model,
        &forcing_valid,
        &valid.theta[..lag],
        cfg.sim_mode,
        Some(&valid.theta),
    )
    .map_err(|e| e.in_stage("simulate validation period"))?;

    let cells = vec![
        MetricCell::score("et0", Role::Train, "surrogate", &ref_train, &est_train),
        MetricCell::score("et0", Role::Validation, "surrogate", &ref_valid, &est_valid),
        MetricCell::score(
            "theta",
            Role::Train,
            mode_label(SimMode::TeacherForced),
            &train.theta[lag..],
            &theta_train[lag..],
        ),
        MetricCell::score(
            "theta",
            Role::Validation,
            mode_label(cfg.sim_mode),
            &valid.theta[lag..],
            &theta_valid[lag..],
        ),
    ]
    .into_iter()
    .collect::<Result<Vec<_>>>()
    .map_err(|e| e.in_stage("metrics"))?;

    let et0_digest = digest_values(
        train
            .weather
            .iter()
            .flat_map(|d| [d.tmax, d.tavg, d.tmin])
            .collect::<Vec<_>>()
            .iter(),
    );
    let moisture_digest = digest_values(
        forcing_train
            .iter()
            .flat_map(|f| [f.et0, f.precip, f.kc])
            .chain(train.theta.iter().copied())
            .collect::<Vec<_>>()
            .iter(),
    );

    Ok(Report {
        config: cfg.clone(),
        cells,
        periods: vec![
            PeriodSeries {
                name: train.name,
                role: Role::Train,
                weather: train.weather,
                gaps: train.gaps,
                et0_reference: ref_train,
                et0_estimate: est_train,
                theta_observed: train.theta,
                theta_estimate: theta_train,
            },
            PeriodSeries {
                name: valid.name,
                role: Role::Validation,
                weather: valid.weather,
                gaps: valid.gaps,
                et0_reference: ref_valid,
                et0_estimate: est_valid,
                theta_observed: valid.theta,
                theta_estimate: theta_valid,
            },
        ],
        et0_loss: et0_fit.loss_history,
        moisture_loss: moisture_fit.loss_history,
        et0_model: ModelArtifact::new(
            TrainedModel::Et0(et0_model),
            Provenance {
                seed: cfg.et0_training.seed,
                epochs: cfg.et0_training.epochs,
                data_digest: et0_digest,
            },
        ),
        moisture_model: ModelArtifact::new(
            TrainedModel::Moisture(moisture_model),
            Provenance {
                seed: cfg.moisture_training.seed,
                epochs: cfg.moisture_training.epochs,
                data_digest: moisture_digest,
            },
        ),
    })
}

pub fn report_text(report: &Report) -> Result<String> {
    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "Paddy soil moisture experiment").unwrap();
    writeln!(w, "==============================").unwrap();
    writeln!(w).unwrap();
    for p in &report.periods {
        writeln!(
            w,
            "{:<10} {} ({} days, {} to {}), {} excluded day(s)",
            p.role.as_str(),
            p.name,
            p.weather.len(),
            p.weather
                .first()
                .map(|d| d.date.to_string())
                .unwrap_or_default(),
            p.weather
                .last()
                .map(|d| d.date.to_string())
                .unwrap_or_default(),
            p.gaps.len()
        )
        .unwrap();
        for g in &p.gaps {
            writeln!(w, "           gap {}: {} of 48 records", g.date, g.records).unwrap();
        }
    }
    writeln!(w).unwrap();
    writeln!(
        w,
        "{:<6} {:<11} {:<15} {:>4} {:>10} {:>10} {:>9} {:>10}",
        "target", "period", "mode", "n", "R2", "1-SSE/SST", "RMSE", "bias"
    )
    .unwrap();
    for c in &report.cells {
        writeln!(
            w,
            "{:<6} {:<11} {:<15} {:>4} {:>10.4} {:>10.4} {:>9.4} {:>10.4}",
            c.target,
            c.role.as_str(),
            c.mode,
            c.n,
            c.r2.pearson,
            c.r2.explained,
            c.rmse,
            c.mean_residual
        )
        .unwrap();
    }
    writeln!(w).unwrap();
    let last = |h: &[f64]| h.last().copied().unwrap_or(f64::NAN);
    writeln!(
        w,
        "final epoch loss: et0 {:.6e} ({} epochs), moisture {:.6e} ({} epochs)",
        last(&report.et0_loss),
        report.et0_loss.len(),
        last(&report.moisture_loss),
        report.moisture_loss.len()
    )
    .unwrap();
    writeln!(w).unwrap();
    writeln!(w, "Configuration").unwrap();
    writeln!(w, "-------------").unwrap();
    w.push_str(&report.config.to_toml()?);
    Ok(out)
}

pub fn metrics_csv(report: &Report) -> String {
    let mut out = String::from("target,period,mode,n,r2_pearson,r2_explained,rmse,mean_residual\n");
    for c in &report.cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.target,
            c.role.as_str(),
            c.mode,
            c.n,
            c.r2.pearson,
            c.r2.explained,
            c.rmse,
            c.mean_residual
        )
        .unwrap();
    }
    out
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `report.txt`, `metrics.csv`, `loss_history.csv` and both model files.
pub fn write_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut loss = String::from("epoch,et0_mse,moisture_mse\n");
    let epochs = report.et0_loss.len().max(report.moisture_loss.len());
    for k in 0..epochs {
        let cell = |h: &[f64]| h.get(k).map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            loss,
            "{},{},{}",
            k + 1,
            cell(&report.et0_loss),
            cell(&report.moisture_loss)
        )
        .unwrap();
    }
    let mut written = vec![
        write_file(dir, "report.txt", &report_text(report)?)?,
        write_file(dir, "metrics.csv", &metrics_csv(report))?,
        write_file(dir, "loss_history.csv", &loss)?,
    ];
    for (name, model) in [
        ("et0.model", &report.et0_model),
        ("moisture.model", &report.moisture_model),
    ] {
        let path = dir.join(name);
        artifact::save_model(model, &path)?;
        written.push(path);
    }
    Ok(written)
}

/// Writes tidy CSVs for the weather and scatter figures.
///
/// * `monthly_temperature.csv`: `period,month,tmax_mean_c,tavg_mean_c,tmin_mean_c,days`
/// * `monthly_precipitation.csv`: `period,month,precip_total_mm,days`
/// * `scatter_{et0,theta}_{train,validation}.csv`: `date,day_index,observed,estimated`
///
/// Scatter files hold one row per scored day.
pub fn export_plot_data(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut temp = String::from("period,month,tmax_mean_c,tavg_mean_c,tmin_mean_c,days\n");
    let mut rain = String::from("period,month,precip_total_mm,days\n");
    let mut written = Vec::new();
    for p in &report.periods {
        let mut months: BTreeMap<(i32, u32), Vec<&DailyWeather>> = BTreeMap::new();
        for d in &p.weather {
            months
                .entry((d.date.year(), d.date.month()))
                .or_default()
                .push(d);
        }
        for ((year, month), days) in &months {
            let n = days.len() as f64;
            let mean = |f: fn(&DailyWeather) -> f64| days.iter().map(|d| f(d)).sum::<f64>() / n;
            writeln!(
                temp,
                "{},{year:04}-{month:02},{},{},{},{}",
                p.role.as_str(),
                mean(|d| d.tmax),
                mean(|d| d.tavg),
                mean(|d| d.tmin),
                days.len()
            )
            .unwrap();
            writeln!(
                rain,
                "{},{year:04}-{month:02},{},{}",
                p.role.as_str(),
                days.iter().map(|d| d.precip).sum::<f64>(),
                days.len()
            )
            .unwrap();
        }

        let lag = report.config.lag;
        for (target, obs, est, skip) in [
            ("et0", &p.et0_reference, &p.et0_estimate, 0),
            ("theta", &p.theta_observed, &p.theta_estimate, lag),
        ] {
            let mut s = String::from("date,day_index,observed,estimated\n");
            for ((d, o), e) in p.weather.iter().zip(obs).zip(est).skip(skip) {
                writeln!(s, "{},{},{o},{e}", d.date, d.day_index).unwrap();
            }
            written.push(write_file(
                dir,
                &format!("scatter_{target}_{}.csv", p.role.as_str()),
                &s,
            )?);
        }
    }
    written.push(write_file(dir, "monthly_temperature.csv", &temp)?);
    written.push(write_file(dir, "monthly_precipitation.csv", &rain)?);
    Ok(written)
}

/// Loads a trained ET0 model from a model file.
pub fn load_et0_model(path: &Path) -> Result<Et0Model> {
    match artifact::load_model(path)?.model {
        TrainedModel::Et0(m) => Ok(m),
        TrainedModel::Moisture(_) => Err(Error::invalid(format!(
            "{} holds a moisture model, expected ET0",
            path.display()
        ))),
    }
}

pub fn load_moisture_model(path: &Path) -> Result<MoistureModel> {
    match artifact::load_model(path)?.model {
        TrainedModel::Moisture(m) => Ok(m),
        TrainedModel::Et0(_) => Err(Error::invalid(format!(
            "{} holds an ET0 model, expected moisture",
            path.display()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::synthetic_default();
        cfg.et0_training.epochs = 20;
        cfg.moisture_training.epochs = 20;
        cfg
    }

    #[test]
    fn config_toml_round_trip() {
        let cfg = ExperimentConfig::synthetic_default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn config_requires_every_key() {
        let text = ExperimentConfig::synthetic_default().to_toml().unwrap();
        let without_lr: String = text
            .lines()
            .filter(|l| !l.starts_with("learning_rate"))
            .collect::<Vec<_>>()
            .join("\n");
        assert!(matches!(
            ExperimentConfig::from_toml(&without_lr),
            Err(Error::Config(_))
        ));
        let extra = format!("bogus = 1\n{text}");
        assert!(ExperimentConfig::from_toml(&extra).is_err());
    }

    #[test]
    fn config_rejects_inconsistent_season() {
        let mut cfg = ExperimentConfig::synthetic_default();
        cfg.kc.len_late = 30;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::synthetic_default();
        cfg.et0_normalizers.et0 = crate::norm::Normalizer::new(0.0, 1.0).unwrap();
        assert!(cfg.validate().is_ok());
        let bad = cfg.to_toml().unwrap().replacen("hi = 1.0", "hi = -1.0", 1);
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn four_cells() {
        let report = run_experiment(&quick()).unwrap();
        assert_eq!(report.cells.len(), 4);
        for (target, role) in [
            ("et0", Role::Train),
            ("et0", Role::Validation),
            ("theta", Role::Train),
            ("theta", Role::Validation),
        ] {
            assert!(report.cell(target, role).is_some());
        }
        assert_eq!(report.cell("theta", Role::Train).unwrap().n, 117);
        assert_eq!(report.cell("et0", Role::Validation).unwrap().n, 118);
    }

    #[test]
    fn plot_files_have_expected_rows() {
        let report = run_experiment(&quick()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_plot_data(&report, dir.path()).unwrap();
        let rows = |name: &str| {
            fs::read_to_string(dir.path().join(name))
                .unwrap()
                .lines()
                .count()
                - 1
        };
        assert_eq!(rows("scatter_et0_train.csv"), 118);
        assert_eq!(rows("scatter_theta_validation.csv"), 117);
        // Oct-Feb and Aug-Dec each touch five calendar months.
        let months = rows("monthly_temperature.csv");
        assert_eq!(months, 10);
        assert_eq!(rows("monthly_precipitation.csv"), 10);
    }

    #[test]
    fn daily_source_must_cover_season() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = quick();
        let period = load_period(&cfg, &cfg.training_period).unwrap();
        let mut obs = period.daily_observations();
        obs.remove(40);
        let path = dir.path().join("p1.csv");
        ingest::write_daily_file(&path, &obs).unwrap();
        cfg.training_period.source = DataSource::Daily { path };
        let err = run_experiment(&cfg).unwrap_err();
        assert!(matches!(
            err,
            Error::Stage {
                stage: "load training period",
                ..
            }
        ));
        assert!(err.to_string().contains("load training period"));
    }

    #[test]
    fn daily_source_matches_synthetic() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick();
        let synthetic = run_experiment(&cfg).unwrap();
        let mut from_files = cfg.clone();
        for (i, period) in [
            &mut from_files.training_period,
            &mut from_files.validation_period,
        ]
        .into_iter()
        .enumerate()
        {
            let data = load_period(&cfg, period).unwrap();
            let path = dir.path().join(format!("p{i}.csv"));
            ingest::write_daily_file(&path, &data.daily_observations()).unwrap();
            period.source = DataSource::Daily { path };
        }
        let report = run_experiment(&from_files).unwrap();
        assert_eq!(report.cells, synthetic.cells);
    }
}
