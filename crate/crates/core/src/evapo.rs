//! Reference evapotranspiration: the temperature-only Hargreaves equation
//! and a 3-8-1 network trained to reproduce it from daily temperatures.

use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::ann::{self, Fit, Mlp, MlpTopology, Pattern, TrainConfig};
use crate::error::{Error, Result};
use crate::norm::Normalizer;

/// Solar constant, MJ m^-2 min^-1.
pub const SOLAR_CONSTANT: f64 = 0.0820;

/// One day of weather.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyWeather {
    /// Days after planting.
    pub day_index: u32,
    pub date: NaiveDate,
    pub tmax: f64,
    pub tavg: f64,
    pub tmin: f64,
    /// mm/day
    pub precip: f64,
}

impl DailyWeather {
    pub fn new(
        day_index: u32,
        date: NaiveDate,
        tmax: f64,
        tavg: f64,
        tmin: f64,
        precip: f64,
    ) -> Result<Self> {
        let day = Self {
            day_index,
            date,
            tmax,
            tavg,
            tmin,
            precip,
        };
        day.validate()?;
        Ok(day)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.tmax, self.tavg, self.tmin, self.precip]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid(format!(
                "{}: non-finite weather value",
                self.date
            )));
        }
        if !(self.tmin <= self.tavg && self.tavg <= self.tmax) {
            return Err(Error::invalid(format!(
                "{}: temperatures must satisfy tmin <= tavg <= tmax, got {}/{}/{}",
                self.date, self.tmin, self.tavg, self.tmax
            )));
        }
        if self.precip < 0.0 {
            return Err(Error::invalid(format!(
                "{}: negative precipitation {}",
                self.date, self.precip
            )));
        }
        Ok(())
    }

    pub fn day_of_year(&self) -> u32 {
        self.date.ordinal()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteLocation {
    /// Radians, south negative.
    pub latitude: f64,
    /// Metres above mean sea level. Informational only.
    pub altitude: f64,
}

impl SiteLocation {
    pub fn new(latitude: f64, altitude: f64) -> Result<Self> {
        let site = Self { latitude, altitude };
        site.validate()?;
        Ok(site)
    }

    pub fn validate(&self) -> Result<()> {
        if self.latitude.is_nan() || self.latitude.abs() >= PI / 2.0 {
            return Err(Error::invalid(format!(
                "latitude {} rad is not strictly inside (-pi/2, pi/2)",
                self.latitude
            )));
        }
        Ok(())
    }

    pub fn from_degrees(latitude_deg: f64, altitude: f64) -> Result<Self> {
        Self::new(latitude_deg.to_radians(), altitude)
    }
}

impl Default for SiteLocation {
    /// Sukabumi, West Java: 06°50'43" S, 536 m.
    fn default() -> Self {
        Self {
            latitude: -0.11955,
            altitude: 536.0,
        }
    }
}

/// Daily extraterrestrial radiation (MJ m^-2 day^-1) from latitude and day
/// of year, with a 365-day year.
pub fn extraterrestrial_radiation(site: &SiteLocation, doy: u32) -> Result<f64> {
    site.validate()?;
    if !(1..=366).contains(&doy) {
        return Err(Error::invalid(format!("day of year {doy} not in 1..=366")));
    }
    let phi = site.latitude;
    let angle = 2.0 * PI * doy as f64 / 365.0;
    let dr = 1.0 + 0.033 * angle.cos();
    let decl = 0.409 * (angle - 1.39).sin();
    let ws = (-phi.tan() * decl.tan()).clamp(-1.0, 1.0).acos();
    let ra = (24.0 * 60.0 / PI)
        * SOLAR_CONSTANT
        * dr
        * (ws * phi.sin() * decl.sin() + phi.cos() * decl.cos() * ws.sin());
    Ok(ra.max(0.0))
}

/// Hargreaves reference evapotranspiration, mm/day. `ra` is converted to
/// equivalent evaporation with the 0.408 factor.
pub fn hargreaves_et0(tmax: f64, tavg: f64, tmin: f64, ra: f64) -> Result<f64> {
    if tmax.is_nan() || tmin.is_nan() || tmax < tmin {
        return Err(Error::invalid(format!(
            "tmax ({tmax}) must not be below tmin ({tmin})"
        )));
    }
    let et0 = 0.0023 * (tavg + 17.8) * (tmax - tmin).sqrt() * (0.408 * ra);
    Ok(et0.max(0.0))
}

/// Hargreaves ET0 for a full day record.
pub fn hargreaves_for_day(day: &DailyWeather, site: &SiteLocation) -> Result<f64> {
    let ra = extraterrestrial_radiation(site, day.day_of_year())?;
    hargreaves_et0(day.tmax, day.tavg, day.tmin, ra)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Et0Normalizers {
    pub tmax: Normalizer,
    pub tavg: Normalizer,
    pub tmin: Normalizer,
    pub et0: Normalizer,
}

impl Default for Et0Normalizers {
    /// 0-50 °C for every temperature, 0-10 mm/day for ET0.
    fn default() -> Self {
        let temp = Normalizer::new(0.0, 50.0).expect("static bounds");
        Self {
            tmax: temp,
            tavg: temp,
            tmin: temp,
            et0: Normalizer::new(0.0, 10.0).expect("static bounds"),
        }
    }
}

/// The 3-8-1 temperature-to-ET0 network with its scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct Et0Model {
    net: Mlp,
    normalizers: Et0Normalizers,
}

impl Et0Model {
    pub fn topology() -> MlpTopology {
        MlpTopology::with_default_hidden(3, 1).expect("static topology")
    }

    pub fn new(net: Mlp, normalizers: Et0Normalizers) -> Result<Self> {
        let expected = Self::topology();
        if net.topology() != expected {
            return Err(Error::invalid(format!(
                "ET0 model needs a 3-8-1 network, got {:?}",
                net.topology()
            )));
        }
        Ok(Self { net, normalizers })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn normalizers(&self) -> &Et0Normalizers {
        &self.normalizers
    }

    fn inputs(&self, tmax: f64, tavg: f64, tmin: f64) -> [f64; 3] {
        let nz = &self.normalizers;
        [
            nz.tmax.normalize(tmax),
            nz.tavg.normalize(tavg),
            nz.tmin.normalize(tmin),
        ]
    }

    /// Estimated ET0 in mm/day, always inside the ET0 normalizer bounds.
    pub fn predict(&self, tmax: f64, tavg: f64, tmin: f64) -> Result<f64> {
        if tmax.is_nan() || tmin.is_nan() || tmax < tmin {
            return Err(Error::invalid(format!(
                "tmax ({tmax}) must not be below tmin ({tmin})"
            )));
        }
        let out = self.net.forward(&self.inputs(tmax, tavg, tmin))?;
        Ok(self.normalizers.et0.denormalize(out[0]))
    }

    pub fn predict_days(&self, days: &[DailyWeather]) -> Result<Vec<f64>> {
        days.iter()
            .map(|d| self.predict(d.tmax, d.tavg, d.tmin))
            .collect()
    }
}

pub fn predict_et0(model: &Et0Model, tmax: f64, tavg: f64, tmin: f64) -> Result<f64> {
    model.predict(tmax, tavg, tmin)
}

/// Normalized (temperatures -> Hargreaves ET0) pairs, one per day.
pub fn et0_patterns(
    days: &[DailyWeather],
    site: &SiteLocation,
    normalizers: &Et0Normalizers,
) -> Result<Vec<Pattern>> {
    days.iter()
        .map(|d| {
            let target = hargreaves_for_day(d, site)?;
            Pattern::new(
                vec![
                    normalizers.tmax.normalize(d.tmax),
                    normalizers.tavg.normalize(d.tavg),
                    normalizers.tmin.normalize(d.tmin),
                ],
                vec![normalizers.et0.normalize(target)],
            )
        })
        .collect()
}

/// Trains the surrogate against Hargreaves ET0 computed for each day.
pub fn train_et0_model(
    days: &[DailyWeather],
    site: &SiteLocation,
    cfg: &TrainConfig,
    normalizers: Et0Normalizers,
) -> Result<Fit<Et0Model>> {
    if days.is_empty() {
        return Err(Error::invalid("ET0 training needs at least one day"));
    }
    let patterns = et0_patterns(days, site, &normalizers)?;
    let trained = ann::train(Et0Model::topology(), &patterns, cfg)?;
    Ok(Fit {
        model: Et0Model::new(trained.net, normalizers)?,
        loss_history: trained.loss_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn site(lat_rad: f64) -> SiteLocation {
        SiteLocation::new(lat_rad, 0.0).unwrap()
    }

    #[test]
    fn equator_near_equinox() {
        // Closed form with phi = 0: (1440/pi) * Gsc * dr * cos(decl).
        let ra = extraterrestrial_radiation(&site(0.0), 80).unwrap();
        assert_abs_diff_eq!(ra, 37.824_213_107_625_71, epsilon = 1e-9);
        let dr = 1.0 + 0.033 * (2.0 * PI * 80.0 / 365.0).cos();
        assert_abs_diff_eq!(ra, 1440.0 / PI * SOLAR_CONSTANT * dr, epsilon = 1e-3);
    }

    #[test]
    fn polar_night_is_dark() {
        let ra = extraterrestrial_radiation(&site((-70f64).to_radians()), 172).unwrap();
        assert_eq!(ra, 0.0);
    }

    #[test]
    fn hemispheres_mirror_near_equinox() {
        for lat in [0.11955, 0.3, 0.6] {
            let north = extraterrestrial_radiation(&site(lat), 80).unwrap();
            let south = extraterrestrial_radiation(&site(-lat), 80 + 182).unwrap();
            assert!(
                (north - south).abs() / north < 0.02,
                "{lat}: {north} vs {south}"
            );
        }
    }

    #[test]
    fn doy_out_of_range() {
        assert!(extraterrestrial_radiation(&site(0.1), 0).is_err());
        assert!(extraterrestrial_radiation(&site(0.1), 367).is_err());
        assert!(extraterrestrial_radiation(&site(0.1), 366).is_ok());
    }

    #[test]
    fn latitude_must_be_inside_poles() {
        assert!(SiteLocation::new(PI / 2.0, 0.0).is_err());
        assert!(SiteLocation::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn hargreaves_cases() {
        assert_eq!(hargreaves_et0(25.0, 25.0, 25.0, 35.0).unwrap(), 0.0);
        assert_eq!(hargreaves_et0(30.0, -17.8, 20.0, 35.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            hargreaves_et0(30.0, 24.0, 20.0, 35.0).unwrap(),
            4.341_425,
            epsilon = 5e-7
        );
        assert!(hargreaves_et0(19.0, 20.0, 20.0, 35.0).is_err());
        // Very cold means would go negative without the floor.
        assert_eq!(hargreaves_et0(-20.0, -25.0, -30.0, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn untrained_model_predicts_midpoint() {
        let model =
            Et0Model::new(Mlp::zeros(Et0Model::topology()), Et0Normalizers::default()).unwrap();
        assert_eq!(model.predict(31.0, 25.0, 21.0).unwrap(), 5.0);
        assert!(model.predict(20.0, 25.0, 21.0).is_err());
    }

    #[test]
    fn model_rejects_wrong_topology() {
        let net = Mlp::zeros(MlpTopology::new(4, 8, 1).unwrap());
        assert!(Et0Model::new(net, Et0Normalizers::default()).is_err());
    }

    #[test]
    fn empty_training_set() {
        assert!(matches!(
            train_et0_model(
                &[],
                &SiteLocation::default(),
                &TrainConfig::default(),
                Et0Normalizers::default()
            ),
            Err(Error::InvalidArgument(_))
        ));
    }

    proptest! {
        #[test]
        fn ra_nonnegative_and_finite(lat in -1.5f64..1.5, doy in 1u32..=366) {
            let ra = extraterrestrial_radiation(&site(lat), doy).unwrap();
            prop_assert!(ra.is_finite() && ra >= 0.0);
        }

        #[test]
        fn hargreaves_monotone(
            tmin in -5.0f64..30.0,
            range in 0.0f64..20.0,
            dr in 0.0f64..5.0,
            frac in 0.0f64..=1.0,
            dt in 0.0f64..5.0,
            ra in 0.0f64..45.0,
        ) {
            let tmax = tmin + range;
            let tavg = tmin + frac * range;
            let base = hargreaves_et0(tmax, tavg, tmin, ra).unwrap();
            prop_assert!(hargreaves_et0(tmax, tavg + dt, tmin, ra).unwrap() >= base);
            prop_assert!(hargreaves_et0(tmax + dr, tavg, tmin, ra).unwrap() >= base);
        }

        #[test]
        fn predictions_inside_bounds(
            seed in 0u64..1000,
            tmin in -20.0f64..60.0,
            span in 0.0f64..30.0,
        ) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let net = Mlp::random(Et0Model::topology(), 3.0, &mut rng);
            let model = Et0Model::new(net, Et0Normalizers::default()).unwrap();
            let et0 = model.predict(tmin + span, tmin + span / 2.0, tmin).unwrap();
            prop_assert!((0.0..=10.0).contains(&et0));
        }
    }
}
