//! Four-stage crop coefficient curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stage lengths in days and the three anchor coefficients of the curve:
/// flat at `kc_ini`, rising linearly to `kc_mid` over development, flat
/// through mid-season, then linear to `kc_end` over late season.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KcSchedule {
    pub len_ini: u32,
    pub len_dev: u32,
    pub len_mid: u32,
    pub len_late: u32,
    pub kc_ini: f64,
    pub kc_mid: f64,
    pub kc_end: f64,
}

impl Default for KcSchedule {
    /// Lowland rice: 1.05 / 1.20 / 0.90 over 20 / 30 / 40 / 30 days.
    fn default() -> Self {
        Self {
            len_ini: 20,
            len_dev: 30,
            len_mid: 40,
            len_late: 30,
            kc_ini: 1.05,
            kc_mid: 1.20,
            kc_end: 0.90,
        }
    }
}

impl KcSchedule {
    pub fn season_days(&self) -> u32 {
        self.len_ini + self.len_dev + self.len_mid + self.len_late
    }

    fn check_invariants(&self) -> Result<()> {
        let lens = [
            ("initial", self.len_ini),
            ("development", self.len_dev),
            ("mid-season", self.len_mid),
            ("late-season", self.len_late),
        ];
        if let Some((name, _)) = lens.iter().find(|(_, len)| *len == 0) {
            return Err(Error::InvalidSchedule(format!(
                "{name} stage must last at least one day"
            )));
        }
        let kcs = [
            ("kc_ini", self.kc_ini),
            ("kc_mid", self.kc_mid),
            ("kc_end", self.kc_end),
        ];
        if let Some((name, v)) = kcs.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidSchedule(format!(
                "{name} must be positive, got {v}"
            )));
        }
        Ok(())
    }

    /// Crop coefficient `dap` days after planting.
    pub fn kc_at(&self, dap: i64) -> Result<f64> {
        let season = self.season_days();
        if dap < 0 || dap >= season as i64 {
            return Err(Error::OutOfSeason {
                dap,
                season_days: season,
            });
        }
        let d = dap as f64;
        let end_ini = self.len_ini as f64;
        let end_dev = end_ini + self.len_dev as f64;
        let end_mid = end_dev + self.len_mid as f64;
        let kc = if d < end_ini {
            self.kc_ini
        } else if d < end_dev {
            lerp(
                self.kc_ini,
                self.kc_mid,
                (d - end_ini) / self.len_dev as f64,
            )
        } else if d < end_mid {
            self.kc_mid
        } else {
            lerp(
                self.kc_mid,
                self.kc_end,
                (d - end_mid) / self.len_late as f64,
            )
        };
        Ok(kc)
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

pub fn kc_at(s: &KcSchedule, dap: i64) -> Result<f64> {
    s.kc_at(dap)
}

/// Checks positivity invariants and that the stages span `season_days`.
pub fn validate_schedule(s: &KcSchedule, season_days: u32) -> Result<()> {
    s.check_invariants()?;
    let total = s.season_days();
    if total != season_days {
        return Err(Error::ScheduleMismatch {
            stage_total: total,
            season_days,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn stage_values() {
        let s = KcSchedule::default();
        assert_eq!(s.kc_at(0).unwrap(), 1.05);
        assert_eq!(s.kc_at(19).unwrap(), 1.05);
        assert_abs_diff_eq!(s.kc_at(35).unwrap(), (1.05 + 1.20) / 2.0, epsilon = 1e-15);
        assert_eq!(s.kc_at(50).unwrap(), 1.20);
        assert_eq!(s.kc_at(89).unwrap(), 1.20);
        assert_abs_diff_eq!(s.kc_at(105).unwrap(), (1.20 + 0.90) / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn outside_season() {
        let s = KcSchedule::default();
        assert!(matches!(
            s.kc_at(120),
            Err(Error::OutOfSeason { dap: 120, .. })
        ));
        assert!(matches!(s.kc_at(-1), Err(Error::OutOfSeason { .. })));
    }

    #[test]
    fn validation() {
        let s = KcSchedule::default();
        assert!(validate_schedule(&s, 120).is_ok());
        assert!(matches!(
            validate_schedule(&s, 117),
            Err(Error::ScheduleMismatch {
                stage_total: 120,
                season_days: 117
            })
        ));
        let bad = KcSchedule { kc_mid: 0.0, ..s };
        assert!(matches!(
            validate_schedule(&bad, 120),
            Err(Error::InvalidSchedule(_))
        ));
        let bad = KcSchedule { len_dev: 0, ..s };
        assert!(matches!(
            validate_schedule(&bad, 90),
            Err(Error::InvalidSchedule(_))
        ));
    }

    fn schedules() -> impl Strategy<Value = KcSchedule> {
        (
            1u32..40,
            1u32..40,
            1u32..40,
            1u32..40,
            0.1f64..2.0,
            0.1f64..2.0,
            0.1f64..2.0,
        )
            .prop_map(|(a, b, c, d, i, m, e)| KcSchedule {
                len_ini: a,
                len_dev: b,
                len_mid: c,
                len_late: d,
                kc_ini: i,
                kc_mid: m,
                kc_end: e,
            })
    }

    proptest! {
        #[test]
        fn bounded_by_anchor_values(s in schedules(), frac in 0.0f64..1.0) {
            let dap = (frac * s.season_days() as f64) as i64;
            let kc = s.kc_at(dap).unwrap();
            let lo = s.kc_ini.min(s.kc_mid).min(s.kc_end);
            let hi = s.kc_ini.max(s.kc_mid).max(s.kc_end);
            prop_assert!(kc >= lo - 1e-12 && kc <= hi + 1e-12);
        }

        #[test]
        fn continuous_at_stage_boundaries(s in schedules()) {
            // Evaluating the closed-form one-sided limits at each boundary.
            let b1 = s.len_ini as i64;
            let b2 = b1 + s.len_dev as i64;
            let b3 = b2 + s.len_mid as i64;
            prop_assert!((s.kc_at(b1).unwrap() - s.kc_ini).abs() < 1e-12);
            prop_assert!((s.kc_at(b2).unwrap() - s.kc_mid).abs() < 1e-12);
            prop_assert!((s.kc_at(b3).unwrap() - s.kc_mid).abs() < 1e-12);
            // Last step of each ramp is one slope-increment from the next anchor.
            let dev_slope = (s.kc_mid - s.kc_ini) / s.len_dev as f64;
            prop_assert!((s.kc_at(b2 - 1).unwrap() + dev_slope - s.kc_mid).abs() < 1e-12);
        }
    }
}
