use std::io::Write;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::batch::{Batch, Matrix};
use super::ingest::{DatasetSchema, PeriodGranularity};
use crate::error::{Error, Result};

/// Failure labels come from a linear score over latent (pre-shift) feature
/// values: `y = [sum(w_j * z_j) > threshold]`, optionally flipped at random.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRule {
    pub features: Vec<usize>,
    /// One weight per label feature; all ones when omitted.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub threshold: f64,
    #[serde(default)]
    pub flip_probability: f64,
}

/// Persistent level shift of the observed values of `features`, starting at
/// `period`, measured in latent standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftInjection {
    pub period: usize,
    pub features: Vec<usize>,
    pub magnitude: f64,
}

/// Random-walk offset on `features`: every period after the first moves each
/// feature by `+magnitude` or `-magnitude`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Churn {
    pub features: Vec<usize>,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_features: usize,
    pub periods: usize,
    pub rows_per_period: usize,
    pub label_rule: LabelRule,
    #[serde(default)]
    pub drifts: Vec<DriftInjection>,
    #[serde(default)]
    pub churn: Option<Churn>,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let d = self.n_features;
        if d == 0 || self.periods == 0 || self.rows_per_period == 0 {
            return Err(Error::Config(
                "n_features, periods and rows_per_period must be positive".into(),
            ));
        }
        let check = |what: &str, idx: &[usize]| -> Result<()> {
            match idx.iter().find(|&&j| j >= d) {
                Some(j) => Err(Error::Config(format!(
                    "{what} feature index {j} out of range for {d} features"
                ))),
                None => Ok(()),
            }
        };
        let rule = &self.label_rule;
        if rule.features.is_empty() {
            return Err(Error::Config(
                "label rule needs at least one feature".into(),
            ));
        }
        check("label rule", &rule.features)?;
        if let Some(w) = &rule.weights {
            if w.len() != rule.features.len() {
                return Err(Error::Config(format!(
                    "label rule has {} features but {} weights",
                    rule.features.len(),
                    w.len()
                )));
            }
        }
        if !(0.0..=1.0).contains(&rule.flip_probability) {
            return Err(Error::Config("flip_probability must lie in [0, 1]".into()));
        }
        for inj in &self.drifts {
            check("drift", &inj.features)?;
            if inj.period >= self.periods {
                return Err(Error::Config(format!(
                    "drift period {} beyond the {} generated periods",
                    inj.period, self.periods
                )));
            }
            if !inj.magnitude.is_finite() {
                return Err(Error::Config("drift magnitude must be finite".into()));
            }
        }
        if let Some(churn) = &self.churn {
            check("churn", &churn.features)?;
            if !churn.magnitude.is_finite() {
                return Err(Error::Config("churn magnitude must be finite".into()));
            }
        }
        Ok(())
    }
}

/// What was injected where, so tests can compare detector output against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionLedger {
    pub seed: u64,
    pub rows_per_period: Vec<usize>,
    /// Sorted, distinct periods carrying at least one drift injection.
    pub drift_periods: Vec<usize>,
    pub injections: Vec<DriftInjection>,
    /// `offsets[t][j]`: total shift applied to feature `j` in period `t`.
    pub offsets: Vec<Vec<f64>>,
    pub positive_rate: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticStream {
    pub batches: Vec<Batch>,
    pub ledger: InjectionLedger,
}

pub fn generate_synthetic_stream(config: &SynthConfig, seed: u64) -> Result<SyntheticStream> {
    config.validate()?;
    let d = config.n_features;
    let rule = &config.label_rule;
    let weights = rule
        .weights
        .clone()
        .unwrap_or_else(|| vec![1.0; rule.features.len()]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut offset = vec![0.0; d];
    let mut batches = Vec::with_capacity(config.periods);
    let mut ledger = InjectionLedger {
        seed,
        rows_per_period: Vec::with_capacity(config.periods),
        drift_periods: Vec::new(),
        injections: config.drifts.clone(),
        offsets: Vec::with_capacity(config.periods),
        positive_rate: Vec::with_capacity(config.periods),
    };

    for t in 0..config.periods {
        if t > 0 {
            if let Some(churn) = &config.churn {
                for &j in &churn.features {
                    let step = if rng.random::<bool>() {
                        churn.magnitude
                    } else {
                        -churn.magnitude
                    };
                    offset[j] += step;
                }
            }
        }
        for inj in config.drifts.iter().filter(|inj| inj.period == t) {
            for &j in &inj.features {
                offset[j] += inj.magnitude;
            }
            if ledger.drift_periods.last() != Some(&t) {
                ledger.drift_periods.push(t);
            }
        }

        let n = config.rows_per_period;
        let mut values = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        let mut latent = vec![0.0; d];
        for _ in 0..n {
            for z in latent.iter_mut() {
                *z = StandardNormal.sample(&mut rng);
            }
            let score: f64 = rule
                .features
                .iter()
                .zip(&weights)
                .map(|(&j, w)| w * latent[j])
                .sum();
            let mut y = score > rule.threshold;
            if rule.flip_probability > 0.0 && rng.random::<f64>() < rule.flip_probability {
                y = !y;
            }
            values.extend(latent.iter().zip(&offset).map(|(z, o)| z + o));
            labels.push(y);
        }
        let positives = labels.iter().filter(|&&y| y).count();
        ledger.rows_per_period.push(n);
        ledger.offsets.push(offset.clone());
        ledger.positive_rate.push(positives as f64 / n as f64);
        batches.push(Batch::new(t, Matrix::new(n, d, values)?, Some(labels))?);
    }
    Ok(SyntheticStream { batches, ledger })
}

impl SyntheticStream {
    /// Column names used by [`SyntheticStream::write_csv`].
    pub fn schema(&self) -> DatasetSchema {
        let d = self.batches.first().map(|b| b.n_features()).unwrap_or(0);
        DatasetSchema {
            feature_columns: (0..d).map(|j| format!("f{j}")).collect(),
            label_column: Some("failure".into()),
            period_column: Some("date".into()),
            period_granularity: PeriodGranularity::Day,
        }
    }

    /// Writes one row per sample with a `date` column holding `start + period` days,
    /// so that loading with [`SyntheticStream::schema`] reproduces the batches.
    pub fn write_csv<W: Write>(&self, writer: W, start: NaiveDate) -> Result<()> {
        let schema = self.schema();
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(schema.feature_columns.iter().cloned());
        header.push("failure".into());
        w.write_record(&header)?;
        for b in &self.batches {
            let date = start + Days::new(b.period_id() as u64);
            let date = date.format("%Y-%m-%d").to_string();
            let labels = b.labels().unwrap_or_default();
            for (i, row) in b.features().rows().enumerate() {
                let mut rec = Vec::with_capacity(row.len() + 2);
                rec.push(date.clone());
                // `{:?}` on f64 round-trips exactly
                rec.extend(row.iter().map(|v| format!("{v:?}")));
                rec.push(
                    if labels.get(i).copied().unwrap_or(false) {
                        "1"
                    } else {
                        "0"
                    }
                    .into(),
                );
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_csv_reader;
    use crate::stats::ks_two_sample;

    fn config() -> SynthConfig {
        SynthConfig {
            n_features: 4,
            periods: 3,
            rows_per_period: 100,
            label_rule: LabelRule {
                features: vec![0, 1],
                weights: None,
                threshold: 0.0,
                flip_probability: 0.0,
            },
            drifts: vec![],
            churn: None,
        }
    }

    #[test]
    fn shape_matches_ledger() {
        let s = generate_synthetic_stream(&config(), 1).unwrap();
        assert_eq!(s.batches.len(), 3);
        for (b, &n) in s.batches.iter().zip(&s.ledger.rows_per_period) {
            assert_eq!(b.len(), n);
            assert_eq!(b.len(), 100);
        }
        assert!(s.ledger.drift_periods.is_empty());
        assert!(s.ledger.offsets.iter().all(|o| o.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let mut c = config();
        c.churn = Some(Churn {
            features: vec![3],
            magnitude: 0.5,
        });
        let a = generate_synthetic_stream(&c, 9).unwrap();
        let b = generate_synthetic_stream(&c, 9).unwrap();
        assert_eq!(a.batches, b.batches);
        assert_eq!(a.ledger, b.ledger);
        let other = generate_synthetic_stream(&c, 10).unwrap();
        assert_ne!(a.batches, other.batches);
    }

    #[test]
    fn out_of_range_drift_index_is_config_error() {
        let mut c = config();
        c.drifts.push(DriftInjection {
            period: 1,
            features: vec![4],
            magnitude: 1.0,
        });
        assert!(matches!(
            generate_synthetic_stream(&c, 0),
            Err(Error::Config(_))
        ));
        let mut c = config();
        c.drifts.push(DriftInjection {
            period: 3,
            features: vec![0],
            magnitude: 1.0,
        });
        assert!(matches!(
            generate_synthetic_stream(&c, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn three_sigma_shift_is_visible_to_ks() {
        let mut c = config();
        c.periods = 6;
        c.rows_per_period = 500;
        c.drifts.push(DriftInjection {
            period: 5,
            features: vec![0],
            magnitude: 3.0,
        });
        let s = generate_synthetic_stream(&c, 4).unwrap();
        assert_eq!(s.ledger.drift_periods, vec![5]);
        let ks = ks_two_sample(&s.batches[4].column(0), &s.batches[5].column(0)).unwrap();
        assert!(ks.p_value < 0.01, "p = {}", ks.p_value);
        assert_eq!(s.ledger.offsets[5][0], 3.0);
        assert_eq!(s.ledger.offsets[4][0], 0.0);
    }

    #[test]
    fn csv_round_trip_reproduces_batches() {
        let mut c = config();
        c.drifts.push(DriftInjection {
            period: 2,
            features: vec![1],
            magnitude: 2.0,
        });
        let s = generate_synthetic_stream(&c, 5).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf, NaiveDate::from_ymd_opt(2015, 1, 1).unwrap())
            .unwrap();
        let loaded = load_csv_reader(buf.as_slice(), &s.schema()).unwrap();
        assert_eq!(loaded.batches.len(), 3);
        for (a, b) in loaded.batches.iter().zip(&s.batches) {
            assert_eq!(a.features(), b.features());
            assert_eq!(a.labels(), b.labels());
            assert_eq!(a.period_id(), b.period_id());
        }
    }
}
