//! Classifier abstraction and the non-neural implementations: a rule-based
//! levels oracle and an adapter for predictions computed elsewhere.

mod convnet;

pub use convnet::{gradient_check, train_convnet, ConvNet, ConvNetConfig, LayerShape, NetShape};

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Condition, Manifest, WindowInstance};
use crate::error::{Error, Result};
use crate::stats::mean;

/// A probability-emitting model over window instances.
///
/// Implementations must be deterministic at inference and emit a probability
/// vector over the three execution conditions.
pub trait Classifier: Send + Sync {
    fn predict_proba(&self, window: &WindowInstance) -> Result<[f64; 3]>;

    /// Whether the model can score synthetic hybrid windows.
    ///
    /// Concept masking builds windows that never existed in any dataset; a
    /// static predictions file cannot score those, so the attribution engine
    /// rejects classifiers returning `false`.
    fn supports_masked_inputs(&self) -> bool {
        true
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub(crate) fn argmax3(p: &[f64; 3]) -> Condition {
    let mut best = 0;
    for i in 1..3 {
        if p[i] > p[best] {
            best = i;
        }
    }
    Condition::ALL[best]
}

/// Classification quality summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// `confusion[truth][predicted]`.
    pub confusion: [[usize; 3]; 3],
    pub precision: [f64; 3],
    pub recall: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisclassifiedRecord {
    pub id: String,
    pub truth: Condition,
    pub predicted: Condition,
    pub probs: [f64; 3],
}

/// Metrics plus the misclassified-instance list used by the histogram
/// analyses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: Metrics,
    pub misclassified: Vec<MisclassifiedRecord>,
}

/// Scores a model on a window set.
pub fn evaluate(model: &dyn Classifier, test: &[WindowInstance]) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::Data("empty evaluation set".into()));
    }
    let mut confusion = [[0usize; 3]; 3];
    let mut misclassified = Vec::new();
    for window in test {
        let probs = model.predict_proba(window)?;
        let predicted = argmax3(&probs);
        confusion[window.label.index()][predicted.index()] += 1;
        if predicted != window.label {
            misclassified.push(MisclassifiedRecord {
                id: window.origin.id(),
                truth: window.label,
                predicted,
                probs,
            });
        }
    }
    let correct: usize = (0..3).map(|i| confusion[i][i]).sum();
    let mut precision = [0.0; 3];
    let mut recall = [0.0; 3];
    for c in 0..3 {
        let col: usize = (0..3).map(|r| confusion[r][c]).sum();
        let row: usize = confusion[c].iter().sum();
        precision[c] = if col > 0 { confusion[c][c] as f64 / col as f64 } else { 0.0 };
        recall[c] = if row > 0 { confusion[c][c] as f64 / row as f64 } else { 0.0 };
    }
    Ok(EvalReport {
        metrics: Metrics {
            accuracy: correct as f64 / test.len() as f64,
            confusion,
            precision,
            recall,
        },
        misclassified,
    })
}

/// Rule-based classifier over the window mean of the metric channel:
/// below `t1` is Normal, between the thresholds NoFan, above `t2` UnderVolt.
///
/// Emits near-one-hot probabilities smoothed by `epsilon`. Useful as a test
/// instrument: it reacts only to the window mean, so attribution mass should
/// land on the Levels concept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelsOracle {
    pub t1: f64,
    pub t2: f64,
    pub epsilon: f64,
}

/// Builds a [`LevelsOracle`] with the default smoothing.
pub fn make_levels_oracle(t1: f64, t2: f64) -> LevelsOracle {
    LevelsOracle { t1, t2, epsilon: 1e-3 }
}

impl Classifier for LevelsOracle {
    fn predict_proba(&self, window: &WindowInstance) -> Result<[f64; 3]> {
        let m = mean(&window.metric_channel);
        let class = if m < self.t1 {
            Condition::Normal
        } else if m < self.t2 {
            Condition::NoFan
        } else {
            Condition::UnderVolt
        };
        let mut probs = [self.epsilon; 3];
        probs[class.index()] = 1.0 - 2.0 * self.epsilon;
        Ok(probs)
    }
}

/// Classifier backed by a predictions file, looked up by window origin.
///
/// Valid for evaluation and reporting only: it cannot score the hybrid
/// windows concept masking produces, and advertises that via
/// [`Classifier::supports_masked_inputs`].
#[derive(Debug, Clone)]
pub struct ExternalPredictions {
    predictions: BTreeMap<String, [f64; 3]>,
}

/// Loads a predictions file (`id,p_normal,p_nofan,p_undervolt` with header).
///
/// Every row must sum to one within 1e-6. Ids absent from the file fail at
/// lookup time, not load time.
pub fn load_external_predictions(manifest: &Manifest, path: &Path) -> Result<ExternalPredictions> {
    let text = std::fs::read_to_string(path)?;
    let mut predictions = BTreeMap::new();
    let known: std::collections::BTreeSet<&str> =
        manifest.entries.iter().map(|e| e.id.as_str()).collect();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let mut probs = [0.0; 3];
        for (slot, field) in probs.iter_mut().zip(&fields[1..]) {
            *slot = field.parse().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("bad probability {field:?}: {e}"),
            })?;
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 || probs.iter().any(|p| *p < 0.0) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("probabilities must be nonnegative and sum to 1, got {sum}"),
            });
        }
        if !known.contains(fields[0]) {
            log::warn!("predictions file row {line_no} references unknown id {:?}", fields[0]);
        }
        predictions.insert(fields[0].to_string(), probs);
    }
    Ok(ExternalPredictions { predictions })
}

impl Classifier for ExternalPredictions {
    fn predict_proba(&self, window: &WindowInstance) -> Result<[f64; 3]> {
        let id = window.origin.id();
        self.predictions
            .get(&id)
            .copied()
            .ok_or_else(|| Error::Model(format!("no prediction for instance {id}")))
    }

    fn supports_masked_inputs(&self) -> bool {
        false
    }
}

/// Exports a model's predictions over a window set in the external format.
pub fn write_predictions(path: &Path, model: &dyn Classifier, windows: &[WindowInstance]) -> Result<()> {
    let mut text = String::from("id,p_normal,p_nofan,p_undervolt\n");
    for w in windows {
        let p = model.predict_proba(w)?;
        text.push_str(&format!("{},{},{},{}\n", w.origin.id(), p[0], p[1], p[2]));
    }
    std::fs::File::create(path)?.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ScenarioMeta, WindowOrigin};

    fn window(mean_level: f64, id_offset: usize) -> WindowInstance {
        let w = 50;
        WindowInstance {
            time_channel: (0..w).map(|i| i as f64 * 1e-3).collect(),
            metric_channel: vec![mean_level; w],
            label: Condition::Normal,
            scenario: ScenarioMeta {
                workload: "camera".into(),
                core_type: "big".into(),
                condition: Condition::Normal,
                rounds: 1,
            },
            origin: WindowOrigin {
                trace: "t".into(),
                phase: 0,
                offset: id_offset,
            },
        }
    }

    fn labeled(mean_level: f64, label: Condition, offset: usize) -> WindowInstance {
        let mut w = window(mean_level, offset);
        w.label = label;
        w
    }

    #[test]
    fn oracle_classifies_by_window_mean() {
        let oracle = make_levels_oracle(0.5, 1.0);
        let p = oracle.predict_proba(&window(0.2, 0)).unwrap();
        assert!((p[0] - 0.998).abs() < 1e-12);
        let p = oracle.predict_proba(&window(0.7, 1)).unwrap();
        assert!((p[1] - 0.998).abs() < 1e-12);
        let p = oracle.predict_proba(&window(1.4, 2)).unwrap();
        assert!((p[2] - 0.998).abs() < 1e-12);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn oracle_ignores_zero_mean_perturbations() {
        let oracle = make_levels_oracle(0.5, 1.0);
        let mut w = window(0.7, 0);
        let base = oracle.predict_proba(&w).unwrap();
        for i in 0..w.metric_channel.len() / 2 {
            w.metric_channel[2 * i] += 0.3;
            w.metric_channel[2 * i + 1] -= 0.3;
        }
        assert_eq!(oracle.predict_proba(&w).unwrap(), base);
    }

    #[test]
    fn evaluate_oracle_on_its_own_rule() {
        let oracle = make_levels_oracle(0.5, 1.0);
        let set: Vec<WindowInstance> = vec![
            labeled(0.1, Condition::Normal, 0),
            labeled(0.3, Condition::Normal, 1),
            labeled(0.7, Condition::NoFan, 2),
            labeled(0.9, Condition::NoFan, 3),
            labeled(1.2, Condition::UnderVolt, 4),
            labeled(1.5, Condition::UnderVolt, 5),
        ];
        let report = evaluate(&oracle, &set).unwrap();
        assert_eq!(report.metrics.accuracy, 1.0);
        assert!(report.misclassified.is_empty());
        for (c, row) in report.metrics.confusion.iter().enumerate() {
            let row_sum: usize = row.iter().sum();
            let class_count = set.iter().filter(|w| w.label.index() == c).count();
            assert_eq!(row_sum, class_count);
        }
    }

    #[test]
    fn external_predictions_round_trip() {
        use crate::dataset::{Manifest, ManifestEntry, Split, MANIFEST_SCHEMA_VERSION};
        let set: Vec<WindowInstance> = vec![
            labeled(0.1, Condition::Normal, 0),
            labeled(0.7, Condition::NoFan, 10),
            labeled(1.2, Condition::UnderVolt, 20),
        ];
        let manifest = Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            phase_kind: "cycle-op".into(),
            window_size: 50,
            shift: 10,
            train_windows: [0; 3],
            test_windows: [1, 1, 1],
            entries: set
                .iter()
                .map(|w| ManifestEntry {
                    id: w.origin.id(),
                    trace: w.origin.trace.clone(),
                    phase: w.origin.phase,
                    offset: w.origin.offset,
                    label: w.label,
                    split: Split::Test,
                })
                .collect(),
        };
        let oracle = make_levels_oracle(0.5, 1.0);
        let dir = std::env::temp_dir().join("cshap_test_external");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("preds.csv");
        write_predictions(&path, &oracle, &set).unwrap();

        let external = load_external_predictions(&manifest, &path).unwrap();
        assert!(!external.supports_masked_inputs());
        let direct = evaluate(&oracle, &set).unwrap();
        let via_file = evaluate(&external, &set).unwrap();
        assert_eq!(direct.metrics, via_file.metrics);

        // missing id fails at lookup
        let unknown = labeled(0.4, Condition::Normal, 999);
        assert!(external.predict_proba(&unknown).is_err());
    }

    #[test]
    fn external_predictions_reject_bad_row_sums() {
        use crate::dataset::{Manifest, MANIFEST_SCHEMA_VERSION};
        let manifest = Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            phase_kind: "cycle-op".into(),
            window_size: 50,
            shift: 10,
            train_windows: [0; 3],
            test_windows: [0; 3],
            entries: vec![],
        };
        let dir = std::env::temp_dir().join("cshap_test_external_bad");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("preds.csv");
        std::fs::write(&path, "id,p_normal,p_nofan,p_undervolt\nt:0:0,0.5,0.4,0.3\n").unwrap();
        assert!(load_external_predictions(&manifest, &path).is_err());
    }
}
