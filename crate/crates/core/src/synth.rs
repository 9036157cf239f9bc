//! Synthetic ground truth: a seeded tropical weather generator and a
//! single-layer bucket water balance driven by Hargreaves crop ET.

use std::f64::consts::PI;

use chrono::{Datelike, Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::crop::{validate_schedule, KcSchedule};
use crate::error::{Error, Result};
use crate::evapo::{hargreaves_for_day, DailyWeather, SiteLocation};
use crate::moisture::ForcingDay;

/// Bucket parameters. Moisture contents are volumetric (m³/m³).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldParams {
    /// Depth of the soil bucket, m.
    pub root_depth: f64,
    pub theta_sat: f64,
    pub theta_res: f64,
    pub theta_init: f64,
    /// Maximum deep percolation, mm/day.
    pub perc_rate: f64,
    /// Storage above this content leaves as runoff.
    pub runoff_threshold: f64,
    /// `(day_index, mm)` irrigation applications.
    pub irrigation: Vec<(u32, f64)>,
}

impl Default for FieldParams {
    fn default() -> Self {
        Self {
            root_depth: 0.2,
            theta_sat: 0.55,
            theta_res: 0.15,
            theta_init: 0.45,
            perc_rate: 3.0,
            runoff_threshold: 0.52,
            irrigation: Vec::new(),
        }
    }
}

impl FieldParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.root_depth > 0.0 && self.root_depth.is_finite()) {
            return Err(Error::invalid(format!(
                "root depth must be positive, got {}",
                self.root_depth
            )));
        }
        if !(self.theta_res >= 0.0
            && self.theta_res < self.theta_init
            && self.theta_init <= self.theta_sat
            && self.theta_sat <= 1.0)
        {
            return Err(Error::invalid(format!(
                "need 0 <= theta_res < theta_init <= theta_sat <= 1, got {} / {} / {}",
                self.theta_res, self.theta_init, self.theta_sat
            )));
        }
        if !(self.runoff_threshold > self.theta_res && self.runoff_threshold <= self.theta_sat) {
            return Err(Error::invalid(format!(
                "runoff threshold {} must lie in (theta_res, theta_sat]",
                self.runoff_threshold
            )));
        }
        if !(self.perc_rate >= 0.0 && self.perc_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "percolation rate must be >= 0, got {}",
                self.perc_rate
            )));
        }
        if let Some((day, mm)) = self
            .irrigation
            .iter()
            .find(|(_, mm)| mm.is_nan() || *mm < 0.0)
        {
            return Err(Error::invalid(format!(
                "irrigation on day {day} is negative ({mm} mm)"
            )));
        }
        Ok(())
    }

    /// mm of water per unit of volumetric content.
    fn mm_per_theta(&self) -> f64 {
        self.root_depth * 1000.0
    }

    fn irrigation_on(&self, day_index: u32) -> f64 {
        self.irrigation
            .iter()
            .filter(|(d, _)| *d == day_index)
            .map(|(_, mm)| mm)
            .sum()
    }
}

/// Fluxes actually applied in one [`water_balance_step`], in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepLedger {
    pub precip_mm: f64,
    pub irrig_mm: f64,
    /// Crop ET actually removed (may be less than demanded when dry).
    pub etc_mm: f64,
    pub runoff_mm: f64,
    pub perc_mm: f64,
    pub storage_before_mm: f64,
    pub storage_after_mm: f64,
}

impl StepLedger {
    /// Storage change minus the signed flux sum; zero up to rounding.
    pub fn imbalance(&self) -> f64 {
        (self.storage_after_mm - self.storage_before_mm)
            - (self.precip_mm + self.irrig_mm - self.etc_mm - self.runoff_mm - self.perc_mm)
    }
}

/// Advances the bucket one day.
///
/// Inflows are added first, then crop ET is withdrawn (never below residual
/// storage), then percolation up to `perc_rate`, then anything above the
/// runoff threshold spills.
pub fn water_balance_step(
    theta: f64,
    p: &FieldParams,
    precip_mm: f64,
    irrig_mm: f64,
    etc_mm: f64,
) -> Result<(f64, StepLedger)> {
    for (name, v) in [
        ("precip", precip_mm),
        ("irrigation", irrig_mm),
        ("ETc", etc_mm),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} flux must be >= 0, got {v}")));
        }
    }
    if !(theta >= p.theta_res && theta <= p.theta_sat) {
        return Err(Error::invalid(format!(
            "theta {theta} outside [{}, {}]",
            p.theta_res, p.theta_sat
        )));
    }

    let scale = p.mm_per_theta();
    let residual = p.theta_res * scale;
    let spill = p.runoff_threshold * scale;
    let before = theta * scale;

    let mut storage = before + precip_mm + irrig_mm;
    let etc_taken = etc_mm.min(storage - residual).max(0.0);
    storage -= etc_taken;
    let perc = p.perc_rate.min(storage - residual).max(0.0);
    storage -= perc;
    let runoff = (storage - spill).max(0.0);
    storage -= runoff;

    let theta_next = (storage / scale).clamp(p.theta_res, p.theta_sat);
    let ledger = StepLedger {
        precip_mm,
        irrig_mm,
        etc_mm: etc_taken,
        runoff_mm: runoff,
        perc_mm: perc,
        storage_before_mm: before,
        storage_after_mm: theta_next * scale,
    };
    Ok((theta_next, ledger))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeatherGenParams {
    pub seed: u64,
    pub n_days: u32,
    /// Planting date; day 0 of the series.
    pub start_date: NaiveDate,
    /// Annual mean of daily mean temperature, °C.
    pub tavg_mean: f64,
    /// Half peak-to-peak of the seasonal cycle, °C.
    pub tavg_amplitude: f64,
    /// Day of year of the seasonal temperature peak.
    pub peak_doy: f64,
    /// Standard deviation of daily mean temperature noise, °C.
    pub tavg_noise_sd: f64,
    /// Mean diurnal range on dry days, °C.
    pub diurnal_range_mean: f64,
    /// Relative spread of the daily diurnal range and of each half-range.
    pub range_jitter: f64,
    /// Diurnal range multiplier on wet days.
    pub wet_range_factor: f64,
    pub wet_day_prob: f64,
    /// Mean rainfall on a wet day, mm.
    pub precip_mean_wet: f64,
}

impl Default for WeatherGenParams {
    fn default() -> Self {
        Self {
            seed: 2010,
            n_days: 118,
            start_date: NaiveDate::from_ymd_opt(2010, 10, 14).expect("static date"),
            tavg_mean: 23.3,
            tavg_amplitude: 0.6,
            peak_doy: 320.0,
            tavg_noise_sd: 0.8,
            diurnal_range_mean: 9.0,
            range_jitter: 0.45,
            wet_range_factor: 0.6,
            wet_day_prob: 0.55,
            precip_mean_wet: 15.0,
        }
    }
}

impl WeatherGenParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_days == 0 {
            return Err(Error::invalid("weather generator needs n_days >= 1"));
        }
        if !(0.0..=1.0).contains(&self.wet_day_prob) {
            return Err(Error::invalid(format!(
                "wet-day probability {} outside [0, 1]",
                self.wet_day_prob
            )));
        }
        if self.diurnal_range_mean.is_nan() || self.diurnal_range_mean <= 0.0 {
            return Err(Error::invalid("diurnal range mean must be positive"));
        }
        if !(0.0..1.0).contains(&self.range_jitter) {
            return Err(Error::invalid("range jitter must be in [0, 1)"));
        }
        if self.wet_range_factor.is_nan() || self.wet_range_factor <= 0.0 {
            return Err(Error::invalid("wet-day range factor must be positive"));
        }
        if self.precip_mean_wet.is_nan() || self.precip_mean_wet <= 0.0 {
            return Err(Error::invalid(
                "wet-day mean precipitation must be positive",
            ));
        }
        if self.tavg_noise_sd.is_nan() || self.tavg_noise_sd < 0.0 {
            return Err(Error::invalid("temperature noise must be >= 0"));
        }
        let finite = [self.tavg_mean, self.tavg_amplitude, self.peak_doy]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("non-finite temperature parameter"));
        }
        Ok(())
    }
}

/// Daily weather series, deterministic for a given parameter set.
pub fn generate_weather(g: &WeatherGenParams) -> Result<Vec<DailyWeather>> {
    g.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let noise = Normal::new(0.0, g.tavg_noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let rain = Exp::new(1.0 / g.precip_mean_wet).map_err(|e| Error::invalid(e.to_string()))?;
    let jitter = g.range_jitter;

    (0..g.n_days)
        .map(|i| {
            let date = g
                .start_date
                .checked_add_days(Days::new(i as u64))
                .ok_or_else(|| Error::invalid("date overflow"))?;
            let doy = date.ordinal() as f64;
            let seasonal = g.tavg_amplitude * (2.0 * PI * (doy - g.peak_doy) / 365.0).cos();
            let tavg = g.tavg_mean + seasonal + noise.sample(&mut rng);

            let wet = rng.random_bool(g.wet_day_prob);
            let precip = if wet { rain.sample(&mut rng) } else { 0.0 };

            let factor = if wet { g.wet_range_factor } else { 1.0 };
            let range =
                g.diurnal_range_mean * factor * rng.random_range(1.0 - jitter..=1.0 + jitter);
            let up = 0.5 * range * rng.random_range(1.0 - jitter..=1.0 + jitter);
            let down = 0.5 * range * rng.random_range(1.0 - jitter..=1.0 + jitter);
            DailyWeather::new(i, date, tavg + up, tavg, tavg - down, precip)
        })
        .collect()
}

/// Simulated moisture trajectory and the forcing that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    /// Moisture at the end of each day, m³/m³.
    pub theta: Vec<f64>,
    pub forcing: Vec<ForcingDay>,
    pub ledger: Vec<StepLedger>,
}

/// Runs the water balance over `weather` with Hargreaves ET0 scaled by the
/// crop coefficient of each day.
pub fn generate_truth(
    weather: &[DailyWeather],
    site: &SiteLocation,
    kc: &KcSchedule,
    p: &FieldParams,
) -> Result<Truth> {
    if weather.is_empty() {
        return Err(Error::invalid("cannot simulate an empty season"));
    }
    p.validate()?;
    validate_schedule(kc, weather.len() as u32)?;

    let mut theta = p.theta_init;
    let mut out = Truth {
        theta: Vec::with_capacity(weather.len()),
        forcing: Vec::with_capacity(weather.len()),
        ledger: Vec::with_capacity(weather.len()),
    };
    for day in weather {
        let et0 = hargreaves_for_day(day, site)?;
        let kc_day = kc.kc_at(day.day_index as i64)?;
        let etc = kc_day * et0;
        let (next, ledger) =
            water_balance_step(theta, p, day.precip, p.irrigation_on(day.day_index), etc)?;
        theta = next;
        out.theta.push(theta);
        out.forcing.push(ForcingDay::new(et0, day.precip, kc_day)?);
        out.ledger.push(ledger);
    }
    Ok(out)
}

/// Largest precipitation total over any `window` consecutive days.
pub fn wettest_window(weather: &[DailyWeather], window: usize) -> f64 {
    if weather.len() < window || window == 0 {
        return weather.iter().map(|d| d.precip).sum();
    }
    weather
        .windows(window)
        .map(|w| w.iter().map(|d| d.precip).sum::<f64>())
        .fold(0.0, f64::max)
}
