//! Direct preference optimization loss as a pure function of sequence
//! log-probabilities, with analytic gradients for verification.
//!
//! The loss for one pair is `-log sigmoid(z)` with
//! `z = beta * ((lp_pol_chosen - lp_ref_chosen) - (lp_pol_rejected - lp_ref_rejected))`,
//! computed through a numerically stable softplus so extreme margins
//! neither overflow nor lose the linear regime. Log-probabilities are
//! supplied inputs, conventionally sums over completion tokens with prompt
//! tokens excluded; this module never runs model inference.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Policy and reference log-probabilities for one preference pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairLogProbs {
    pub policy_chosen: f64,
    pub ref_chosen: f64,
    pub policy_rejected: f64,
    pub ref_rejected: f64,
}

impl PairLogProbs {
    fn check_finite(&self) -> Result<(), DpoError> {
        for (name, value) in [
            ("policy_chosen", self.policy_chosen),
            ("ref_chosen", self.ref_chosen),
            ("policy_rejected", self.policy_rejected),
            ("ref_rejected", self.ref_rejected),
        ] {
            if !value.is_finite() {
                return Err(DpoError::NonFinite {
                    field: name,
                    value,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DpoConfig {
    /// Regulates deviation from the reference model.
    pub beta: f64,
}

impl Default for DpoConfig {
    fn default() -> Self {
        Self { beta: 0.2 }
    }
}

impl DpoConfig {
    pub fn validate(&self) -> Result<(), DpoError> {
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(DpoError::InvalidBeta(self.beta));
        }
        Ok(())
    }
}

/// Partial derivatives of the per-pair loss with respect to each input
/// log-probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpoGradients {
    pub policy_chosen: f64,
    pub ref_chosen: f64,
    pub policy_rejected: f64,
    pub ref_rejected: f64,
}

#[derive(Debug, Error)]
pub enum DpoError {
    #[error("log-probability {field} is not finite ({value})")]
    NonFinite { field: &'static str, value: f64 },
    #[error("beta must be a positive finite number, got {0}")]
    InvalidBeta(f64),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("failed to read log-prob file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed log-prob record on line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("record {qid:?} has no token counts; length normalization needs n_tokens_chosen and n_tokens_rejected")]
    MissingTokenCounts { qid: String },
}

/// `ln(1 + e^x)` without overflow. Above the cutover the correction term
/// is below f64 representation precision, so the asymptote is exact.
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// The scaled log-ratio difference `z` that the loss is a function of.
pub fn margin(lp: &PairLogProbs, config: &DpoConfig) -> f64 {
    let chosen_ratio = lp.policy_chosen - lp.ref_chosen;
    let rejected_ratio = lp.policy_rejected - lp.ref_rejected;
    config.beta * (chosen_ratio - rejected_ratio)
}

/// Per-pair loss `-log sigmoid(z) = softplus(-z)`.
pub fn dpo_loss(lp: &PairLogProbs, config: &DpoConfig) -> Result<f64, DpoError> {
    config.validate()?;
    lp.check_finite()?;
    Ok(softplus(-margin(lp, config)))
}

/// Mean per-pair loss over a non-empty batch.
pub fn dpo_loss_batch(batch: &[PairLogProbs], config: &DpoConfig) -> Result<f64, DpoError> {
    if batch.is_empty() {
        return Err(DpoError::EmptyBatch);
    }
    let mut total = 0.0;
    for lp in batch {
        total += dpo_loss(lp, config)?;
    }
    Ok(total / batch.len() as f64)
}

/// Analytic gradients of the per-pair loss.
///
/// With `s = sigmoid(-z)`: the chosen policy term gets `-beta * s`, the
/// rejected policy term `+beta * s`, and the reference terms the
/// negations, since they enter the margin with opposite sign.
pub fn dpo_loss_gradients(lp: &PairLogProbs, config: &DpoConfig) -> Result<DpoGradients, DpoError> {
    config.validate()?;
    lp.check_finite()?;
    let s = sigmoid(-margin(lp, config));
    let g = config.beta * s;
    Ok(DpoGradients {
        policy_chosen: -g,
        ref_chosen: g,
        policy_rejected: g,
        ref_rejected: -g,
    })
}

/// One line of a batch input file. Token counts are optional and only
/// consulted when length normalization is requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogProbRecord {
    pub qid: String,
    pub kind: String,
    pub lp_pol_chosen: f64,
    pub lp_ref_chosen: f64,
    pub lp_pol_rejected: f64,
    pub lp_ref_rejected: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_tokens_chosen: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_tokens_rejected: Option<u32>,
}

impl LogProbRecord {
    /// Converts to raw pair log-probs, optionally dividing each side by its
    /// completion token count.
    pub fn to_pair(&self, length_normalize: bool) -> Result<PairLogProbs, DpoError> {
        if !length_normalize {
            return Ok(PairLogProbs {
                policy_chosen: self.lp_pol_chosen,
                ref_chosen: self.lp_ref_chosen,
                policy_rejected: self.lp_pol_rejected,
                ref_rejected: self.lp_ref_rejected,
            });
        }
        let (Some(nc), Some(nr)) = (self.n_tokens_chosen, self.n_tokens_rejected) else {
            return Err(DpoError::MissingTokenCounts {
                qid: self.qid.clone(),
            });
        };
        if nc == 0 || nr == 0 {
            return Err(DpoError::MissingTokenCounts {
                qid: self.qid.clone(),
            });
        }
        Ok(PairLogProbs {
            policy_chosen: self.lp_pol_chosen / f64::from(nc),
            ref_chosen: self.lp_ref_chosen / f64::from(nc),
            policy_rejected: self.lp_pol_rejected / f64::from(nr),
            ref_rejected: self.lp_ref_rejected / f64::from(nr),
        })
    }
}

pub fn load_logprob_records(path: impl AsRef<Path>) -> Result<Vec<LogProbRecord>, DpoError> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LogProbRecord =
            serde_json::from_str(&line).map_err(|e| DpoError::MalformedLine {
                line: idx + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(DpoError::EmptyBatch);
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientStats {
    pub mean_abs: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindStats {
    pub n_pairs: usize,
    pub mean_loss: f64,
}

/// Batch verification report: mean loss, per-kind breakdown, and summary
/// statistics of the chosen-side policy gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpoReport {
    pub n_pairs: usize,
    pub beta: f64,
    pub length_normalized: bool,
    pub mean_loss: f64,
    pub mean_margin: f64,
    pub per_kind: BTreeMap<String, KindStats>,
    pub grad_policy_chosen: GradientStats,
}

pub fn dpo_check(
    records: &[LogProbRecord],
    config: &DpoConfig,
    length_normalize: bool,
) -> Result<DpoReport, DpoError> {
    if records.is_empty() {
        return Err(DpoError::EmptyBatch);
    }
    config.validate()?;

    let mut total_loss = 0.0;
    let mut total_margin = 0.0;
    let mut per_kind: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    let mut grad_abs_sum = 0.0;
    let mut grad_min = f64::INFINITY;
    let mut grad_max = f64::NEG_INFINITY;

    for record in records {
        let pair = record.to_pair(length_normalize)?;
        let loss = dpo_loss(&pair, config)?;
        let grads = dpo_loss_gradients(&pair, config)?;
        total_loss += loss;
        total_margin += margin(&pair, config);
        let entry = per_kind.entry(record.kind.clone()).or_insert((0, 0.0));
        entry.0 += 1;
        entry.1 += loss;
        grad_abs_sum += grads.policy_chosen.abs();
        grad_min = grad_min.min(grads.policy_chosen);
        grad_max = grad_max.max(grads.policy_chosen);
    }

    let n = records.len();
    Ok(DpoReport {
        n_pairs: n,
        beta: config.beta,
        length_normalized: length_normalize,
        mean_loss: total_loss / n as f64,
        mean_margin: total_margin / n as f64,
        per_kind: per_kind
            .into_iter()
            .map(|(kind, (count, loss))| {
                (
                    kind,
                    KindStats {
                        n_pairs: count,
                        mean_loss: loss / count as f64,
                    },
                )
            })
            .collect(),
        grad_policy_chosen: GradientStats {
            mean_abs: grad_abs_sum / n as f64,
            min: grad_min,
            max: grad_max,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(pc: f64, rc: f64, pr: f64, rr: f64) -> PairLogProbs {
        PairLogProbs {
            policy_chosen: pc,
            ref_chosen: rc,
            policy_rejected: pr,
            ref_rejected: rr,
        }
    }

    #[test]
    fn equal_logprobs_give_ln_two() {
        let lp = pair(-12.5, -12.5, -12.5, -12.5);
        let loss = dpo_loss(&lp, &DpoConfig::default()).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn matches_high_precision_softplus_oracle() {
        // beta = 0.2, chosen ratio 1.0, rejected ratio -1.0, so z = 0.4.
        // softplus(-0.4) evaluated with 40-digit arithmetic.
        let lp = pair(1.0, 0.0, -1.0, 0.0);
        let loss = dpo_loss(&lp, &DpoConfig { beta: 0.2 }).unwrap();
        assert!((loss - 0.513_015_252_399_952_6).abs() < 1e-15, "loss = {loss}");
    }

    #[test]
    fn extreme_margins_neither_overflow_nor_lose_linearity() {
        // z = +1000: loss underflows to 0 without producing inf or NaN.
        let big = pair(5000.0, 0.0, 0.0, 0.0);
        let loss = dpo_loss(&big, &DpoConfig { beta: 0.2 }).unwrap();
        assert!((0.0..1e-300).contains(&loss), "loss = {loss}");

        // z = -1000: the linear regime, loss = 1000 exactly at f64 precision.
        let neg = pair(-5000.0, 0.0, 0.0, 0.0);
        let loss = dpo_loss(&neg, &DpoConfig { beta: 0.2 }).unwrap();
        assert!((loss - 1000.0).abs() < 1e-9, "loss = {loss}");
    }

    #[test]
    fn batch_is_the_mean() {
        let config = DpoConfig::default();
        let a = pair(0.0, 0.0, 0.0, 0.0);
        let b = pair(1.0, 0.0, -1.0, 0.0);
        let one = dpo_loss(&a, &config).unwrap();
        let other = dpo_loss(&b, &config).unwrap();
        let mean = dpo_loss_batch(&[a, b], &config).unwrap();
        assert!((mean - (one + other) / 2.0).abs() < 1e-15);

        let twins = dpo_loss_batch(&[b, b], &config).unwrap();
        assert!((twins - other).abs() < 1e-15);
    }

    #[test]
    fn empty_batch_is_an_error() {
        assert!(matches!(
            dpo_loss_batch(&[], &DpoConfig::default()),
            Err(DpoError::EmptyBatch)
        ));
    }

    #[test]
    fn gradient_at_zero_margin() {
        let lp = pair(0.0, 0.0, 0.0, 0.0);
        let grads = dpo_loss_gradients(&lp, &DpoConfig { beta: 0.2 }).unwrap();
        // sigmoid(0) = 1/2, so the chosen policy gradient is -0.2 * 0.5.
        assert!((grads.policy_chosen - (-0.1)).abs() < 1e-15);
        assert!((grads.policy_rejected - 0.1).abs() < 1e-15);
    }

    #[test]
    fn policy_gradients_are_antisymmetric() {
        for (pc, rc, pr, rr) in [
            (0.3, -0.2, -1.4, 0.9),
            (-10.0, -9.5, -12.0, -11.0),
            (2.0, 2.0, 2.0, 2.0),
        ] {
            let grads = dpo_loss_gradients(&pair(pc, rc, pr, rr), &DpoConfig::default()).unwrap();
            assert!((grads.policy_chosen + grads.policy_rejected).abs() < 1e-15);
            assert!((grads.ref_chosen + grads.ref_rejected).abs() < 1e-15);
            // Reference gradients are the negations of the policy ones.
            assert_eq!(grads.ref_chosen, -grads.policy_chosen);
        }
    }

    #[test]
    fn loss_invariant_under_common_shift() {
        let config = DpoConfig { beta: 0.2 };
        let base = pair(-3.0, -2.5, -4.0, -1.0);
        let shifted = pair(-3.0 + 7.25, -2.5 + 7.25, -4.0 + 7.25, -1.0 + 7.25);
        let a = dpo_loss(&base, &config).unwrap();
        let b = dpo_loss(&shifted, &config).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn loss_moves_the_right_way() {
        let config = DpoConfig::default();
        let base = pair(-3.0, -2.5, -4.0, -1.0);
        let better_chosen = pair(-2.0, -2.5, -4.0, -1.0);
        let better_rejected = pair(-3.0, -2.5, -3.0, -1.0);
        let l0 = dpo_loss(&base, &config).unwrap();
        assert!(dpo_loss(&better_chosen, &config).unwrap() < l0);
        assert!(dpo_loss(&better_rejected, &config).unwrap() > l0);
    }

    #[test]
    fn beta_scaling_scales_the_margin() {
        let lp = pair(0.7, 0.1, -0.4, 0.2);
        let z1 = margin(&lp, &DpoConfig { beta: 1.0 });
        let z = margin(&lp, &DpoConfig { beta: 0.2 });
        assert!((z - 0.2 * z1).abs() < 1e-15);
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        let lp = pair(f64::NAN, 0.0, 0.0, 0.0);
        assert!(matches!(
            dpo_loss(&lp, &DpoConfig::default()),
            Err(DpoError::NonFinite { field: "policy_chosen", .. })
        ));
        let lp = pair(0.0, 0.0, f64::INFINITY, 0.0);
        assert!(dpo_loss_gradients(&lp, &DpoConfig::default()).is_err());
    }

    #[test]
    fn invalid_beta_rejected() {
        let lp = pair(0.0, 0.0, 0.0, 0.0);
        assert!(dpo_loss(&lp, &DpoConfig { beta: 0.0 }).is_err());
        assert!(dpo_loss(&lp, &DpoConfig { beta: -1.0 }).is_err());
    }

    #[test]
    fn length_normalization_divides_by_token_counts() {
        let record = LogProbRecord {
            qid: "q1".into(),
            kind: "thought".into(),
            lp_pol_chosen: -10.0,
            lp_ref_chosen: -20.0,
            lp_pol_rejected: -30.0,
            lp_ref_rejected: -40.0,
            n_tokens_chosen: Some(10),
            n_tokens_rejected: Some(20),
        };
        let pair = record.to_pair(true).unwrap();
        assert_eq!(pair.policy_chosen, -1.0);
        assert_eq!(pair.ref_chosen, -2.0);
        assert_eq!(pair.policy_rejected, -1.5);
        assert_eq!(pair.ref_rejected, -2.0);

        let missing = LogProbRecord {
            n_tokens_chosen: None,
            ..record
        };
        assert!(matches!(
            missing.to_pair(true),
            Err(DpoError::MissingTokenCounts { .. })
        ));
    }

    #[test]
    fn report_aggregates_per_kind() {
        let records = vec![
            LogProbRecord {
                qid: "q1".into(),
                kind: "thought".into(),
                lp_pol_chosen: 0.0,
                lp_ref_chosen: 0.0,
                lp_pol_rejected: 0.0,
                lp_ref_rejected: 0.0,
                n_tokens_chosen: None,
                n_tokens_rejected: None,
            },
            LogProbRecord {
                qid: "q2".into(),
                kind: "answer".into(),
                lp_pol_chosen: 1.0,
                lp_ref_chosen: 0.0,
                lp_pol_rejected: -1.0,
                lp_ref_rejected: 0.0,
                n_tokens_chosen: None,
                n_tokens_rejected: None,
            },
        ];
        let report = dpo_check(&records, &DpoConfig::default(), false).unwrap();
        assert_eq!(report.n_pairs, 2);
        assert_eq!(report.per_kind.len(), 2);
        assert!((report.per_kind["thought"].mean_loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(report.grad_policy_chosen.min <= report.grad_policy_chosen.max);
    }

    #[test]
    fn loads_records_with_line_errors() {
        use std::io::Write;
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            file,
            r#"{{"qid": "q1", "kind": "thought", "lp_pol_chosen": -1.0, "lp_ref_chosen": -1.0, "lp_pol_rejected": -2.0, "lp_ref_rejected": -2.0}}"#
        )
        .unwrap();
        writeln!(file, "garbage").unwrap();
        file.flush().unwrap();
        match load_logprob_records(file.path()).unwrap_err() {
            DpoError::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("expected MalformedLine, got {other:?}"),
        }
    }
}
