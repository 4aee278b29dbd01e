//! Exact concept-Shapley attribution: coalition enumeration over the five
//! concepts with background substitution, per-class scores, and global
//! aggregation.
//!
//! A coalition keeps a subset of the explained window's concepts and takes
//! the rest from each background decomposition in turn (paired sampling: the
//! same backgrounds serve every coalition). With five concepts the 32
//! coalition values are enumerated exactly; no sampling approximation is
//! involved, so the efficiency, dummy, symmetry and linearity axioms hold to
//! floating-point accuracy.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{BackgroundSet, Condition, WindowInstance, WindowOrigin};
use crate::decompose::{decompose_seeded, stable_hash, DecomposeParams};
use crate::error::{Error, Result};
use crate::model::{argmax3, Classifier};
use crate::signal::{substitute, ConceptId, ConceptMask, Decomposition, Signal};

/// Per-concept, per-class Shapley values for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    /// `phi[class][concept]` in the fixed concept order.
    pub phi: [[f64; 5]; 3],
    /// Expected model output under full masking, per class.
    pub base_value: [f64; 3],
    pub predicted_class: Condition,
    pub ground_truth: Condition,
    pub origin: WindowOrigin,
    /// Number of model forward passes spent on this explanation.
    pub model_evals: usize,
}

fn ensure_maskable(model: &dyn Classifier) -> Result<()> {
    if !model.supports_masked_inputs() {
        return Err(Error::Model(
            "this classifier cannot score masked windows; attribution needs a \
             predict-capable model, not a static predictions file"
                .into(),
        ));
    }
    Ok(())
}

fn hybrid_window(template: &WindowInstance, values: Vec<f64>) -> WindowInstance {
    WindowInstance {
        time_channel: template.time_channel.clone(),
        metric_channel: values,
        label: template.label,
        scenario: template.scenario.clone(),
        origin: template.origin.clone(),
    }
}

/// Value of one coalition: the model's mean output over all backgrounds with
/// the kept concepts taken from the instance.
///
/// The window template supplies the time channel (concepts cover only the
/// metric channel) and metadata.
pub fn coalition_value(
    model: &dyn Classifier,
    instance: &Decomposition,
    background: &BackgroundSet,
    keep: ConceptMask,
    template: &WindowInstance,
) -> Result<[f64; 3]> {
    ensure_maskable(model)?;
    if background.is_empty() {
        return Err(Error::Data("empty background set".into()));
    }
    let mut acc = [0.0; 3];
    for b in &background.decompositions {
        let values = substitute(instance, b, keep)?;
        let probs = model.predict_proba(&hybrid_window(template, values))?;
        for c in 0..3 {
            acc[c] += probs[c];
        }
    }
    let inv = 1.0 / background.len() as f64;
    Ok([acc[0] * inv, acc[1] * inv, acc[2] * inv])
}

/// All 32 coalition values plus the number of model evaluations spent
/// (always `32 * |background|`).
fn coalition_table(
    model: &dyn Classifier,
    instance: &Decomposition,
    background: &BackgroundSet,
    template: &WindowInstance,
) -> Result<([[f64; 3]; 32], usize)> {
    ensure_maskable(model)?;
    if background.is_empty() {
        return Err(Error::Data("empty background set".into()));
    }
    let mut table = [[0.0; 3]; 32];
    let mut evals = 0;
    for bits in 0..ConceptMask::COALITIONS {
        let keep = ConceptMask::from_bits(bits as u8);
        let mut acc = [0.0; 3];
        for b in &background.decompositions {
            let values = substitute(instance, b, keep)?;
            let probs = model.predict_proba(&hybrid_window(template, values))?;
            evals += 1;
            for c in 0..3 {
                acc[c] += probs[c];
            }
        }
        let inv = 1.0 / background.len() as f64;
        table[bits] = [acc[0] * inv, acc[1] * inv, acc[2] * inv];
    }
    Ok((table, evals))
}

const FACTORIAL: [f64; 6] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0];

/// Shapley values from a full coalition table via the closed-form weights
/// `|S|! (n - |S| - 1)! / n!`.
pub fn shapley_from_table(v: &[[f64; 3]; 32]) -> [[f64; 5]; 3] {
    let mut phi = [[0.0; 5]; 3];
    for concept in 0..5 {
        let bit = 1usize << concept;
        for mask in 0..32usize {
            if mask & bit != 0 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let weight = FACTORIAL[s] * FACTORIAL[5 - s - 1] / FACTORIAL[5];
            for class in 0..3 {
                phi[class][concept] += weight * (v[mask | bit][class] - v[mask][class]);
            }
        }
    }
    phi
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, remaining: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..remaining.len() {
            let item = remaining.remove(i);
            prefix.push(item);
            rec(prefix, remaining, out);
            prefix.pop();
            remaining.insert(i, item);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..n).collect(), &mut out);
    out
}

/// Shapley values as the average marginal contribution over all `5! = 120`
/// concept orderings; an independent route over the same coalition table.
pub fn shapley_from_table_by_permutations(v: &[[f64; 3]; 32]) -> [[f64; 5]; 3] {
    let mut phi = [[0.0; 5]; 3];
    let perms = permutations(5);
    for perm in &perms {
        let mut mask = 0usize;
        for &concept in perm {
            let bit = 1usize << concept;
            for class in 0..3 {
                phi[class][concept] += v[mask | bit][class] - v[mask][class];
            }
            mask |= bit;
        }
    }
    let inv = 1.0 / perms.len() as f64;
    for row in phi.iter_mut() {
        for p in row.iter_mut() {
            *p *= inv;
        }
    }
    phi
}

fn attribution_from_table(
    table: &[[f64; 3]; 32],
    phi: [[f64; 5]; 3],
    window: &WindowInstance,
    evals: usize,
) -> AttributionResult {
    let full = table[ConceptMask::FULL.bits() as usize];
    for class in 0..3 {
        let total: f64 = phi[class].iter().sum();
        debug_assert!(
            (total - (full[class] - table[0][class])).abs() <= 1e-9,
            "efficiency violated for class {class}: {total} vs {}",
            full[class] - table[0][class]
        );
    }
    AttributionResult {
        phi,
        base_value: table[0],
        predicted_class: argmax3(&full),
        ground_truth: window.label,
        origin: window.origin.clone(),
        model_evals: evals,
    }
}

fn decompose_window(window: &WindowInstance, params: &DecomposeParams) -> Result<Decomposition> {
    let signal = Signal::new(window.time_channel.clone(), window.metric_channel.clone())?;
    decompose_seeded(&signal, params, stable_hash(&window.origin.id()))
}

/// Exact concept-Shapley attribution for one window.
///
/// Decomposes the instance, evaluates all 32 coalition values against the
/// paired background set, and combines them with the exact Shapley weights.
pub fn exact_shap(
    model: &dyn Classifier,
    window: &WindowInstance,
    background: &BackgroundSet,
    params: &DecomposeParams,
) -> Result<AttributionResult> {
    let instance = decompose_window(window, params)?;
    let (table, evals) = coalition_table(model, &instance, background, window)?;
    let phi = shapley_from_table(&table);
    Ok(attribution_from_table(&table, phi, window, evals))
}

/// Permutation-enumeration route over the same memoized coalition values;
/// the independent oracle for [`exact_shap`]'s combinatorics.
pub fn shap_permutation_oracle(
    model: &dyn Classifier,
    window: &WindowInstance,
    background: &BackgroundSet,
    params: &DecomposeParams,
) -> Result<AttributionResult> {
    let instance = decompose_window(window, params)?;
    let (table, evals) = coalition_table(model, &instance, background, window)?;
    let phi = shapley_from_table_by_permutations(&table);
    Ok(attribution_from_table(&table, phi, window, evals))
}

/// Which class's attribution a summary aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassSelector {
    GroundTruth,
    Predicted,
    Fixed(Condition),
}

impl ClassSelector {
    fn pick(self, r: &AttributionResult) -> usize {
        match self {
            ClassSelector::GroundTruth => r.ground_truth.index(),
            ClassSelector::Predicted => r.predicted_class.index(),
            ClassSelector::Fixed(c) => c.index(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowAbsRow {
    pub id: String,
    pub truth: Condition,
    pub predicted: Condition,
    pub abs_phi: [f64; 5],
}

/// Mean and deviation of |phi| per concept across a window set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalSummary {
    pub selector: ClassSelector,
    pub mean_abs: [f64; 5],
    pub std_abs: [f64; 5],
    pub windows: Vec<WindowAbsRow>,
}

pub fn aggregate_global(results: &[AttributionResult], selector: ClassSelector) -> GlobalSummary {
    let mut windows = Vec::with_capacity(results.len());
    for r in results {
        let class = selector.pick(r);
        let mut abs_phi = [0.0; 5];
        for (slot, phi) in abs_phi.iter_mut().zip(r.phi[class].iter()) {
            *slot = phi.abs();
        }
        windows.push(WindowAbsRow {
            id: r.origin.id(),
            truth: r.ground_truth,
            predicted: r.predicted_class,
            abs_phi,
        });
    }
    let n = windows.len().max(1) as f64;
    let mut mean_abs = [0.0; 5];
    for row in &windows {
        for c in 0..5 {
            mean_abs[c] += row.abs_phi[c];
        }
    }
    for m in mean_abs.iter_mut() {
        *m /= n;
    }
    let mut std_abs = [0.0; 5];
    for row in &windows {
        for c in 0..5 {
            let d = row.abs_phi[c] - mean_abs[c];
            std_abs[c] += d * d;
        }
    }
    for s in std_abs.iter_mut() {
        *s = (*s / n).sqrt();
    }
    GlobalSummary {
        selector,
        mean_abs,
        std_abs,
        windows,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConceptDelta {
    /// Mean of per-window `|phi_b| - |phi_a|`.
    pub mean: f64,
    /// Deviation of the per-window differences.
    pub std: f64,
}

/// Per-concept change between two runs, over windows matched by origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunComparison {
    pub per_concept: [ConceptDelta; 5],
    pub matched_windows: usize,
}

pub fn compare_runs(a: &GlobalSummary, b: &GlobalSummary) -> RunComparison {
    let b_by_id: std::collections::BTreeMap<&str, &WindowAbsRow> =
        b.windows.iter().map(|row| (row.id.as_str(), row)).collect();
    let mut diffs: [Vec<f64>; 5] = Default::default();
    for row in &a.windows {
        if let Some(other) = b_by_id.get(row.id.as_str()) {
            for c in 0..5 {
                diffs[c].push(other.abs_phi[c] - row.abs_phi[c]);
            }
        }
    }
    let matched = diffs[0].len();
    let mut per_concept = [ConceptDelta { mean: 0.0, std: 0.0 }; 5];
    for c in 0..5 {
        per_concept[c] = ConceptDelta {
            mean: crate::stats::mean(&diffs[c]),
            std: crate::stats::std_dev(&diffs[c]),
        };
    }
    RunComparison {
        per_concept,
        matched_windows: matched,
    }
}

/// Writes attributions as columnar text: one row per (window, class,
/// concept).
pub fn write_attributions(path: &Path, results: &[AttributionResult]) -> Result<()> {
    let mut text = String::from("window_id,class,concept,phi,base_value,predicted,ground_truth\n");
    for r in results {
        let id = r.origin.id();
        for class in Condition::ALL {
            for concept in ConceptId::ALL {
                text.push_str(&format!(
                    "{id},{class},{concept},{},{},{},{}\n",
                    r.phi[class.index()][concept.index()],
                    r.base_value[class.index()],
                    r.predicted_class,
                    r.ground_truth
                ));
            }
        }
    }
    std::fs::File::create(path)?.write_all(text.as_bytes())?;
    Ok(())
}

fn parse_origin(id: &str) -> Result<WindowOrigin> {
    let mut parts = id.rsplitn(3, ':');
    let offset = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Data(format!("bad window id {id:?}")))?;
    let phase = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Data(format!("bad window id {id:?}")))?;
    let trace = parts
        .next()
        .ok_or_else(|| Error::Data(format!("bad window id {id:?}")))?;
    Ok(WindowOrigin {
        trace: trace.to_string(),
        phase,
        offset,
    })
}

/// Reads an attribution file back; `model_evals` is not part of the file
/// format and comes back as zero.
pub fn read_attributions(path: &Path) -> Result<Vec<AttributionResult>> {
    let text = std::fs::read_to_string(path)?;
    let mut by_window: Vec<AttributionResult> = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(err(format!("expected 7 fields, got {}", fields.len())));
        }
        let origin = parse_origin(fields[0])?;
        let class: Condition = fields[1].parse()?;
        let concept_idx = ConceptId::ALL
            .iter()
            .position(|c| c.label() == fields[2])
            .ok_or_else(|| err(format!("unknown concept {:?}", fields[2])))?;
        let phi: f64 = fields[3].parse().map_err(|e| err(format!("bad phi: {e}")))?;
        let base: f64 = fields[4].parse().map_err(|e| err(format!("bad base: {e}")))?;
        let predicted: Condition = fields[5].parse()?;
        let truth: Condition = fields[6].parse()?;

        if by_window.last().map(|r| &r.origin) != Some(&origin) {
            by_window.push(AttributionResult {
                phi: [[0.0; 5]; 3],
                base_value: [0.0; 3],
                predicted_class: predicted,
                ground_truth: truth,
                origin,
                model_evals: 0,
            });
        }
        let current = by_window.last_mut().unwrap();
        current.phi[class.index()][concept_idx] = phi;
        current.base_value[class.index()] = base;
    }
    Ok(by_window)
}
