//! Dynamic soil-moisture estimator.
//!
//! The network sees today's ET0, precipitation and crop coefficient together
//! with the last `lag` moisture values, and predicts today's moisture. During
//! training the lagged values are observations (teacher forcing). During
//! simulation they are either observations or the model's own previous
//! estimates (closed loop).

use serde::{Deserialize, Serialize};

use crate::ann::{self, Fit, Mlp, MlpTopology, Pattern, TrainConfig};
use crate::error::{check_len, Error, Result};
use crate::norm::Normalizer;

/// Exogenous inputs for one day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingDay {
    /// mm/day
    pub et0: f64,
    /// mm/day
    pub precip: f64,
    pub kc: f64,
}

impl ForcingDay {
    pub fn new(et0: f64, precip: f64, kc: f64) -> Result<Self> {
        if !(et0 >= 0.0 && precip >= 0.0 && kc > 0.0)
            || !(et0.is_finite() && precip.is_finite() && kc.is_finite())
        {
            return Err(Error::invalid(format!(
                "forcing needs et0 >= 0, precip >= 0, kc > 0; got {et0} / {precip} / {kc}"
            )));
        }
        Ok(Self { et0, precip, kc })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// Lagged inputs are observed moisture.
    TeacherForced,
    /// Lagged inputs are the model's own previous estimates.
    #[default]
    ClosedLoop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoistureNormalizers {
    pub et0: Normalizer,
    pub precip: Normalizer,
    pub kc: Normalizer,
    pub theta: Normalizer,
}

impl Default for MoistureNormalizers {
    fn default() -> Self {
        Self {
            et0: Normalizer::new(0.0, 10.0).expect("static bounds"),
            precip: Normalizer::new(0.0, 100.0).expect("static bounds"),
            kc: Normalizer::new(0.0, 2.0).expect("static bounds"),
            theta: Normalizer::new(0.0, 1.0).expect("static bounds"),
        }
    }
}

impl MoistureNormalizers {
    fn inputs(&self, f: &ForcingDay, lagged: impl Iterator<Item = f64>) -> Vec<f64> {
        let mut x = vec![
            self.et0.normalize(f.et0),
            self.precip.normalize(f.precip),
            self.kc.normalize(f.kc),
        ];
        x.extend(lagged.map(|t| self.theta.normalize(t)));
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoistureModel {
    net: Mlp,
    lag: usize,
    normalizers: MoistureNormalizers,
}

impl MoistureModel {
    pub fn topology(lag: usize) -> Result<MlpTopology> {
        if lag == 0 {
            return Err(Error::invalid("lag must be at least 1"));
        }
        MlpTopology::with_default_hidden(3 + lag, 1)
    }

    pub fn new(net: Mlp, lag: usize, normalizers: MoistureNormalizers) -> Result<Self> {
        let expected = Self::topology(lag)?;
        if net.topology().n_inputs != expected.n_inputs || net.topology().n_outputs != 1 {
            return Err(Error::invalid(format!(
                "lag {lag} needs a {}-h-1 network, got {:?}",
                expected.n_inputs,
                net.topology()
            )));
        }
        Ok(Self {
            net,
            lag,
            normalizers,
        })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn normalizers(&self) -> &MoistureNormalizers {
        &self.normalizers
    }

    /// One-step estimate from today's forcing and the most recent `lag`
    /// moisture values, newest first.
    pub fn step(&self, forcing: &ForcingDay, recent: &[f64]) -> Result<f64> {
        check_len("lagged moisture", self.lag, recent.len())?;
        let x = self.normalizers.inputs(forcing, recent.iter().copied());
        let out = self.net.forward(&x)?;
        Ok(self.normalizers.theta.denormalize(out[0]))
    }
}

/// Teacher-forced training pairs: one per day from `lag` onwards.
pub fn build_patterns(
    forcing: &[ForcingDay],
    theta_obs: &[f64],
    lag: usize,
    normalizers: &MoistureNormalizers,
) -> Result<Vec<Pattern>> {
    if lag == 0 {
        return Err(Error::invalid("lag must be at least 1"));
    }
    check_len("observed moisture", forcing.len(), theta_obs.len())?;
    if forcing.len() <= lag {
        return Err(Error::InsufficientHistory {
            available: forcing.len(),
            lag,
        });
    }
    (lag..forcing.len())
        .map(|t| {
            let lagged = (1..=lag).map(|k| theta_obs[t - k]);
            Pattern::new(
                normalizers.inputs(&forcing[t], lagged),
                vec![normalizers.theta.normalize(theta_obs[t])],
            )
        })
        .collect()
}

pub fn train_moisture_model(
    forcing: &[ForcingDay],
    theta_obs: &[f64],
    cfg: &TrainConfig,
    lag: usize,
    normalizers: MoistureNormalizers,
) -> Result<Fit<MoistureModel>> {
    let patterns = build_patterns(forcing, theta_obs, lag, &normalizers)?;
    let trained = ann::train(MoistureModel::topology(lag)?, &patterns, cfg)?;
    Ok(Fit {
        model: MoistureModel::new(trained.net, lag, normalizers)?,
        loss_history: trained.loss_history,
    })
}

/// One moisture value per forcing day.
///
/// The first `lag` values are `theta_init` (the warm-up); every later day is
/// estimated from that day's forcing and the preceding `lag` values, taken
/// from `theta_obs` in teacher-forced mode and from the returned series in
/// closed-loop mode.
pub fn simulate_moisture(
    m: &MoistureModel,
    forcing: &[ForcingDay],
    theta_init: &[f64],
    mode: SimMode,
    theta_obs: Option<&[f64]>,
) -> Result<Vec<f64>> {
    check_len("initial moisture", m.lag, theta_init.len())?;
    let observed = match (mode, theta_obs) {
        (SimMode::TeacherForced, None) => {
            return Err(Error::invalid(
                "teacher-forced simulation needs observed moisture",
            ))
        }
        (SimMode::TeacherForced, Some(obs)) => {
            check_len("observed moisture", forcing.len(), obs.len())?;
            Some(obs)
        }
        (SimMode::ClosedLoop, _) => None,
    };

    let mut out: Vec<f64> = theta_init.iter().take(forcing.len()).copied().collect();
    let mut recent = vec![0.0; m.lag];
    for t in m.lag..forcing.len() {
        let history = observed.unwrap_or(&out);
        for (k, slot) in recent.iter_mut().enumerate() {
            *slot = history[t - 1 - k];
        }
        out.push(m.step(&forcing[t], &recent)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forcing(n: usize) -> Vec<ForcingDay> {
        (0..n)
            .map(|i| ForcingDay::new(3.0 + (i % 3) as f64, (i % 5) as f64 * 4.0, 1.1).unwrap())
            .collect()
    }

    fn theta(n: usize) -> Vec<f64> {
        (0..n).map(|i| 0.3 + 0.01 * (i % 7) as f64).collect()
    }

    #[test]
    fn pattern_count_and_first_lag() {
        let nz = MoistureNormalizers::default();
        let obs = theta(118);
        let pats = build_patterns(&forcing(118), &obs, 1, &nz).unwrap();
        assert_eq!(pats.len(), 117);
        assert_eq!(pats[0].input[3], nz.theta.normalize(obs[0]));
        assert_eq!(pats[0].target[0], nz.theta.normalize(obs[1]));
        for (t, p) in pats.iter().enumerate() {
            assert_eq!(p.target[0], nz.theta.normalize(obs[t + 1]));
        }
    }

    #[test]
    fn lag_ordering_is_newest_first() {
        let nz = MoistureNormalizers::default();
        let obs = theta(10);
        let pats = build_patterns(&forcing(10), &obs, 3, &nz).unwrap();
        assert_eq!(pats.len(), 7);
        assert_eq!(pats[0].input.len(), 6);
        assert_eq!(pats[0].input[3], obs[2]);
        assert_eq!(pats[0].input[5], obs[0]);
    }

    #[test]
    fn insufficient_history() {
        let nz = MoistureNormalizers::default();
        assert!(matches!(
            build_patterns(&forcing(1), &theta(1), 1, &nz),
            Err(Error::InsufficientHistory { .. })
        ));
        assert!(matches!(
            train_moisture_model(&[], &[], &TrainConfig::default(), 1, nz),
            Err(Error::InsufficientHistory { .. })
        ));
        assert!(matches!(
            build_patterns(&forcing(4), &theta(3), 1, &nz),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn teacher_forced_needs_observations() {
        let model = MoistureModel::new(
            Mlp::zeros(MoistureModel::topology(1).unwrap()),
            1,
            MoistureNormalizers::default(),
        )
        .unwrap();
        assert!(matches!(
            simulate_moisture(&model, &forcing(5), &[0.3], SimMode::TeacherForced, None),
            Err(Error::InvalidArgument(_))
        ));
        let out =
            simulate_moisture(&model, &forcing(5), &[0.3], SimMode::ClosedLoop, None).unwrap();
        assert_eq!(out, vec![0.3, 0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn forcing_validation() {
        assert!(ForcingDay::new(-1.0, 0.0, 1.0).is_err());
        assert!(ForcingDay::new(1.0, -0.1, 1.0).is_err());
        assert!(ForcingDay::new(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn same_seed_same_weights() {
        let cfg = TrainConfig {
            epochs: 20,
            seed: 11,
            ..TrainConfig::default()
        };
        let nz = MoistureNormalizers::default();
        let a = train_moisture_model(&forcing(30), &theta(30), &cfg, 2, nz).unwrap();
        let b = train_moisture_model(&forcing(30), &theta(30), &cfg, 2, nz).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.loss_history, b.loss_history);
    }
}
