//! Trace ingestion, phase compartmentalization, sliding-window instance
//! generation, the train/test split policy, and background-set selection for
//! concept masking.
//!
//! Traces live in delimiter-separated text files with a header row
//! (`timestamp_s,value,phase_kind`; the third column optional) and a JSON
//! sidecar `<stem>.meta.json` carrying the scenario metadata. Contiguous rows
//! sharing a nonempty `phase_kind` form one phase.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decompose::{decompose_seeded, stable_hash, DecomposeParams};
use crate::error::{Error, Result};
use crate::signal::{Decomposition, Signal};

/// Execution condition of a scenario; the three classification targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    Normal,
    NoFan,
    UnderVolt,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Normal, Condition::NoFan, Condition::UnderVolt];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        match self {
            Condition::Normal => 0,
            Condition::NoFan => 1,
            Condition::UnderVolt => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Condition::Normal => "Normal",
            Condition::NoFan => "NoFan",
            Condition::UnderVolt => "UnderVolt",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Normal" => Ok(Condition::Normal),
            "NoFan" => Ok(Condition::NoFan),
            "UnderVolt" => Ok(Condition::UnderVolt),
            other => Err(Error::Data(format!("unknown condition {other:?}"))),
        }
    }
}

/// One combination of workload, CPU core type, and execution condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioMeta {
    pub workload: String,
    pub core_type: String,
    pub condition: Condition,
    pub rounds: u32,
}

impl ScenarioMeta {
    pub fn scenario_id(&self) -> String {
        format!(
            "{}_{}_{}_r{}",
            self.workload, self.core_type, self.condition, self.rounds
        )
    }
}

/// Half-open span of trace indices covered by one execution phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseMark {
    pub start: usize,
    pub end: usize,
    pub kind: String,
}

/// A parsed monitoring trace: scenario metadata, the signal, and its phase
/// structure.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub id: String,
    pub meta: ScenarioMeta,
    pub signal: Signal,
    pub phase_marks: Vec<PhaseMark>,
}

impl Trace {
    pub fn validate(&self) -> Result<()> {
        let n = self.signal.len();
        let mut prev_end = 0;
        for (i, mark) in self.phase_marks.iter().enumerate() {
            if mark.start >= mark.end || mark.end > n {
                return Err(Error::Data(format!(
                    "trace {}: phase {i} spans [{}, {}) out of bounds for length {n}",
                    self.id, mark.start, mark.end
                )));
            }
            if mark.start < prev_end {
                return Err(Error::Data(format!(
                    "trace {}: phase {i} overlaps or is out of order",
                    self.id
                )));
            }
            prev_end = mark.end;
        }
        Ok(())
    }
}

/// Trace file dialect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceFormat {
    pub delimiter: char,
}

impl Default for TraceFormat {
    fn default() -> Self {
        TraceFormat { delimiter: ',' }
    }
}

fn sidecar_path(trace_path: &Path) -> PathBuf {
    let stem = trace_path.file_stem().unwrap_or_default().to_string_lossy();
    trace_path.with_file_name(format!("{stem}.meta.json"))
}

/// Parses one trace file plus its metadata sidecar.
///
/// Malformed rows and non-monotonic timestamps are rejected with the
/// offending line number.
pub fn parse_trace(path: &Path, format: &TraceFormat) -> Result<Trace> {
    let content = std::fs::read_to_string(path)?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    let columns: Vec<&str> = header.split(format.delimiter).collect();
    if columns.len() < 2 || columns[0] != "timestamp_s" || columns[1] != "value" {
        return Err(parse_err(
            1,
            format!("expected header timestamp_s{0}value[{0}phase_kind], got {header:?}", format.delimiter),
        ));
    }
    let has_kind = columns.len() >= 3 && columns[2] == "phase_kind";

    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    let mut kinds: Vec<String> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(format.delimiter).collect();
        if fields.len() < 2 {
            return Err(parse_err(line_no, format!("expected at least 2 fields, got {}", fields.len())));
        }
        let t: f64 = fields[0]
            .parse()
            .map_err(|e| parse_err(line_no, format!("bad timestamp {:?}: {e}", fields[0])))?;
        let v: f64 = fields[1]
            .parse()
            .map_err(|e| parse_err(line_no, format!("bad value {:?}: {e}", fields[1])))?;
        if let Some(&prev) = timestamps.last() {
            if t <= prev {
                return Err(parse_err(
                    line_no,
                    format!("timestamp {t} not greater than previous {prev}"),
                ));
            }
        }
        timestamps.push(t);
        values.push(v);
        kinds.push(if has_kind { fields.get(2).unwrap_or(&"").to_string() } else { String::new() });
    }

    let signal = Signal::new(timestamps, values)
        .map_err(|e| parse_err(0, format!("invalid series: {e}")))?;

    // contiguous runs of the same nonempty kind become phases
    let mut phase_marks = Vec::new();
    let mut run_start = 0;
    for i in 1..=kinds.len() {
        if i == kinds.len() || kinds[i] != kinds[run_start] {
            if !kinds[run_start].is_empty() {
                phase_marks.push(PhaseMark {
                    start: run_start,
                    end: i,
                    kind: kinds[run_start].clone(),
                });
            }
            run_start = i;
        }
    }

    let meta_path = sidecar_path(path);
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| {
        Error::Data(format!("missing sidecar {}: {e}", meta_path.display()))
    })?;
    let meta: ScenarioMeta = serde_json::from_str(&meta_text)?;

    let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
    let trace = Trace {
        id,
        meta,
        signal,
        phase_marks,
    };
    trace.validate()?;
    Ok(trace)
}

/// Writes a trace (and its sidecar) into `dir`, returning the trace path.
pub fn write_trace(trace: &Trace, dir: &Path, format: &TraceFormat) -> Result<PathBuf> {
    trace.validate()?;
    std::fs::create_dir_all(dir)?;
    let d = format.delimiter;
    let mut kind_of = vec![String::new(); trace.signal.len()];
    for mark in &trace.phase_marks {
        for slot in kind_of[mark.start..mark.end].iter_mut() {
            *slot = mark.kind.clone();
        }
    }
    let mut text = format!("timestamp_s{d}value{d}phase_kind\n");
    for i in 0..trace.signal.len() {
        text.push_str(&format!(
            "{}{d}{}{d}{}\n",
            trace.signal.timestamps()[i],
            trace.signal.values()[i],
            kind_of[i]
        ));
    }
    let path = dir.join(format!("{}.csv", trace.id));
    std::fs::File::create(&path)?.write_all(text.as_bytes())?;
    let meta_json = serde_json::to_string_pretty(&trace.meta)?;
    std::fs::File::create(sidecar_path(&path))?.write_all(meta_json.as_bytes())?;
    Ok(path)
}

/// One signal per phase of the requested kind, in trace order.
pub fn cut_phases(trace: &Trace, keep_kind: &str) -> Vec<Signal> {
    trace
        .phase_marks
        .iter()
        .filter(|m| m.kind == keep_kind)
        .map(|m| trace.signal.slice(m.start, m.end))
        .collect()
}

/// Sliding-window parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowProfile {
    pub window_size: usize,
    pub shift: usize,
}

impl WindowProfile {
    pub fn new(window_size: usize) -> Self {
        WindowProfile { window_size, shift: 10 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_size < 2 {
            return Err(Error::Config("window_size must be >= 2".into()));
        }
        if self.shift == 0 {
            return Err(Error::Config("shift must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of windows a phase of length `n` yields.
    pub fn count(&self, n: usize) -> usize {
        if n < self.window_size {
            0
        } else {
            (n - self.window_size) / self.shift + 1
        }
    }
}

/// Where a window instance came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindowOrigin {
    pub trace: String,
    pub phase: usize,
    pub offset: usize,
}

impl WindowOrigin {
    pub fn id(&self) -> String {
        format!("{}:{}:{}", self.trace, self.phase, self.offset)
    }
}

/// A fixed-length two-channel slice with label and scenario metadata.
///
/// The time channel stores offsets from the window's first timestamp, so
/// wall-clock position does not leak scenario identity.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowInstance {
    pub time_channel: Vec<f64>,
    pub metric_channel: Vec<f64>,
    pub label: Condition,
    pub scenario: ScenarioMeta,
    pub origin: WindowOrigin,
}

/// Generates instances at offsets `0, shift, 2*shift, ...`; a phase shorter
/// than the window yields none.
pub fn slide_windows(
    phase: &Signal,
    profile: &WindowProfile,
    label: Condition,
    meta: &ScenarioMeta,
    trace_id: &str,
    phase_index: usize,
) -> Vec<WindowInstance> {
    let n = phase.len();
    let w = profile.window_size;
    let mut out = Vec::with_capacity(profile.count(n));
    if n < w {
        return out;
    }
    let mut offset = 0;
    while offset + w <= n {
        let t0 = phase.timestamps()[offset];
        let time_channel: Vec<f64> = phase.timestamps()[offset..offset + w]
            .iter()
            .map(|t| t - t0)
            .collect();
        out.push(WindowInstance {
            time_channel,
            metric_channel: phase.values()[offset..offset + w].to_vec(),
            label,
            scenario: meta.clone(),
            origin: WindowOrigin {
                trace: trace_id.to_string(),
                phase: phase_index,
                offset,
            },
        });
        offset += profile.shift;
    }
    out
}

/// Single window at a given offset of a phase.
pub fn window_at(phase: &PhaseEntry, offset: usize, window_size: usize) -> Result<WindowInstance> {
    let n = phase.signal.len();
    if offset + window_size > n {
        return Err(Error::Data(format!(
            "window [{offset}, {}) exceeds phase length {n}",
            offset + window_size
        )));
    }
    let t0 = phase.signal.timestamps()[offset];
    Ok(WindowInstance {
        time_channel: phase.signal.timestamps()[offset..offset + window_size]
            .iter()
            .map(|t| t - t0)
            .collect(),
        metric_channel: phase.signal.values()[offset..offset + window_size].to_vec(),
        label: phase.meta.condition,
        scenario: phase.meta.clone(),
        origin: WindowOrigin {
            trace: phase.trace_id.clone(),
            phase: phase.phase_index,
            offset,
        },
    })
}

/// One phase of a trace, annotated for splitting and backgrounds.
#[derive(Debug, Clone)]
pub struct PhaseEntry {
    pub trace_id: String,
    /// Index into the trace's `phase_marks`.
    pub phase_index: usize,
    pub meta: ScenarioMeta,
    pub signal: Signal,
}

/// All phases of the requested kind across a corpus, in trace order.
pub fn collect_phases(traces: &[Trace], kind: &str) -> Vec<PhaseEntry> {
    let mut out = Vec::new();
    for trace in traces {
        for (i, mark) in trace.phase_marks.iter().enumerate() {
            if mark.kind == kind {
                out.push(PhaseEntry {
                    trace_id: trace.id.clone(),
                    phase_index: i,
                    meta: trace.meta.clone(),
                    signal: trace.signal.slice(mark.start, mark.end),
                });
            }
        }
    }
    out
}

/// Test-data selection policy: two held-out phases (one early, one late in
/// the execution timeline) per designated scenario, one scenario per class by
/// default.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPolicy {
    pub phase_kind: String,
    /// Scenario ids to hold test phases out of; `None` picks the first
    /// scenario id (sorted) of each class.
    pub test_scenarios: Option<Vec<String>>,
}

impl Default for SplitPolicy {
    fn default() -> Self {
        SplitPolicy {
            phase_kind: "cycle-op".into(),
            test_scenarios: None,
        }
    }
}

/// Phase counts per class on each side of the split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassBalance {
    pub train_phases: [usize; 3],
    pub test_phases: [usize; 3],
}

#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub train: Vec<PhaseEntry>,
    pub test: Vec<PhaseEntry>,
    pub balance: ClassBalance,
}

pub fn split_policy(traces: &[Trace], policy: &SplitPolicy) -> Result<SplitOutcome> {
    let phases = collect_phases(traces, &policy.phase_kind);

    let designated: Vec<String> = match &policy.test_scenarios {
        Some(ids) => ids.clone(),
        None => {
            let mut per_class: BTreeMap<Condition, String> = BTreeMap::new();
            for p in &phases {
                let id = p.meta.scenario_id();
                per_class
                    .entry(p.meta.condition)
                    .and_modify(|cur| {
                        if id < *cur {
                            *cur = id.clone();
                        }
                    })
                    .or_insert(id);
            }
            per_class.into_values().collect()
        }
    };

    let mut train = Vec::new();
    let mut test = Vec::new();
    for scenario in &designated {
        let indices: Vec<usize> = phases
            .iter()
            .enumerate()
            .filter(|(_, p)| &p.meta.scenario_id() == scenario)
            .map(|(i, _)| i)
            .collect();
        if indices.len() < 2 {
            return Err(Error::Data(format!(
                "scenario {scenario} has {} phases of kind {:?}; the split needs at least 2",
                indices.len(),
                policy.phase_kind
            )));
        }
    }

    let mut held: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for scenario in &designated {
        let indices: Vec<usize> = phases
            .iter()
            .enumerate()
            .filter(|(_, p)| &p.meta.scenario_id() == scenario)
            .map(|(i, _)| i)
            .collect();
        // one early, one late in the execution timeline
        held.insert(scenario.clone(), (indices[0], *indices.last().unwrap()));
    }

    for (i, phase) in phases.into_iter().enumerate() {
        let is_test = held
            .values()
            .any(|&(early, late)| i == early || i == late);
        if is_test {
            test.push(phase);
        } else {
            train.push(phase);
        }
    }

    let mut balance = ClassBalance {
        train_phases: [0; 3],
        test_phases: [0; 3],
    };
    for p in &train {
        balance.train_phases[p.meta.condition.index()] += 1;
    }
    for p in &test {
        balance.test_phases[p.meta.condition.index()] += 1;
    }

    Ok(SplitOutcome { train, test, balance })
}

/// Keeps the first `w` points, or pads by repeating the final value.
pub fn fit_length(series: &[f64], w: usize) -> Vec<f64> {
    debug_assert!(!series.is_empty());
    let mut out: Vec<f64> = series.iter().take(w).copied().collect();
    if let Some(&last) = series.last() {
        while out.len() < w {
            out.push(last);
        }
    }
    out
}

/// Fits every component of a decomposition to length `w`.
pub fn fit_decomposition_length(d: &Decomposition, w: usize) -> Decomposition {
    Decomposition {
        levels: fit_length(&d.levels, w),
        peaks: fit_length(&d.peaks, w),
        scale: d.scale,
        lf: fit_length(&d.lf, w),
        hf: fit_length(&d.hf, w),
        resampled_indices: d.resampled_indices.iter().copied().filter(|i| *i < w).collect(),
        peak_indices: d.peak_indices.iter().copied().filter(|i| *i < w).collect(),
    }
}

/// Scenario filter for background selection: same core type and execution
/// rounds as the explained data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackgroundFilter {
    pub core_type: String,
    pub rounds: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundProvenance {
    pub scenario: String,
    pub trace: String,
    pub phase_index: usize,
}

/// Training-derived decompositions used as replacement data during masking,
/// each fit to the explained window length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSet {
    pub window_size: usize,
    pub decompositions: Vec<Decomposition>,
    pub provenance: Vec<BackgroundProvenance>,
}

impl BackgroundSet {
    pub fn len(&self) -> usize {
        self.decompositions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decompositions.is_empty()
    }
}

/// Samples `cycles_per_scenario` training cycles per matching scenario,
/// decomposes each full cycle, and fits every component to `window_size`.
///
/// A scenario with fewer cycles than requested contributes all of them (with
/// a warning).
pub fn select_background(
    train: &[PhaseEntry],
    filter: &BackgroundFilter,
    cycles_per_scenario: usize,
    window_size: usize,
    params: &DecomposeParams,
    seed: u64,
) -> Result<BackgroundSet> {
    let mut by_scenario: BTreeMap<String, Vec<&PhaseEntry>> = BTreeMap::new();
    for phase in train {
        if phase.meta.core_type == filter.core_type && phase.meta.rounds == filter.rounds {
            by_scenario
                .entry(phase.meta.scenario_id())
                .or_default()
                .push(phase);
        }
    }
    if by_scenario.is_empty() {
        return Err(Error::Data(format!(
            "no training scenario matches core_type={:?} rounds={}",
            filter.core_type, filter.rounds
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut decompositions = Vec::new();
    let mut provenance = Vec::new();
    for (scenario, phases) in &by_scenario {
        let take = cycles_per_scenario.min(phases.len());
        if take < cycles_per_scenario {
            log::warn!(
                "scenario {scenario} has only {} cycles, requested {cycles_per_scenario}",
                phases.len()
            );
        }
        let mut chosen = rand::seq::index::sample(&mut rng, phases.len(), take).into_vec();
        chosen.sort_unstable();
        for idx in chosen {
            let phase = phases[idx];
            let salt = stable_hash(&format!("{}:{}", phase.trace_id, phase.phase_index));
            let d = decompose_seeded(&phase.signal, params, salt)?;
            decompositions.push(fit_decomposition_length(&d, window_size));
            provenance.push(BackgroundProvenance {
                scenario: scenario.clone(),
                trace: phase.trace_id.clone(),
                phase_index: phase.phase_index,
            });
        }
    }

    Ok(BackgroundSet {
        window_size,
        decompositions,
        provenance,
    })
}

/// Which side of the split a manifest entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub trace: String,
    pub phase: usize,
    pub offset: usize,
    pub label: Condition,
    pub split: Split,
}

/// Dataset manifest: every window instance with label, origin and split side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub phase_kind: String,
    pub window_size: usize,
    pub shift: usize,
    pub train_windows: [usize; 3],
    pub test_windows: [usize; 3],
    pub entries: Vec<ManifestEntry>,
}

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Builds the manifest for a split under one window profile.
pub fn build_manifest(
    outcome: &SplitOutcome,
    profile: &WindowProfile,
    phase_kind: &str,
) -> Manifest {
    let mut entries = Vec::new();
    let mut train_windows = [0usize; 3];
    let mut test_windows = [0usize; 3];
    let mut push = |phases: &[PhaseEntry], split: Split, counts: &mut [usize; 3]| {
        for phase in phases {
            for w in slide_windows(
                &phase.signal,
                profile,
                phase.meta.condition,
                &phase.meta,
                &phase.trace_id,
                phase.phase_index,
            ) {
                counts[w.label.index()] += 1;
                entries.push(ManifestEntry {
                    id: w.origin.id(),
                    trace: w.origin.trace,
                    phase: w.origin.phase,
                    offset: w.origin.offset,
                    label: w.label,
                    split,
                });
            }
        }
    };
    push(&outcome.train, Split::Train, &mut train_windows);
    push(&outcome.test, Split::Test, &mut test_windows);
    Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        phase_kind: phase_kind.to_string(),
        window_size: profile.window_size,
        shift: profile.shift,
        train_windows,
        test_windows,
        entries,
    }
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)?;
    std::fs::File::create(path)?.write_all(json.as_bytes())?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path)?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(Error::Data(format!(
            "unsupported manifest schema version {}",
            manifest.schema_version
        )));
    }
    Ok(manifest)
}

/// Reconstructs the window instances of one split side from the corpus.
pub fn manifest_windows(
    traces: &[Trace],
    manifest: &Manifest,
    split: Split,
) -> Result<Vec<WindowInstance>> {
    let by_id: BTreeMap<&str, &Trace> = traces.iter().map(|t| (t.id.as_str(), t)).collect();
    let w = manifest.window_size;
    let mut out = Vec::new();
    for entry in manifest.entries.iter().filter(|e| e.split == split) {
        let trace = by_id
            .get(entry.trace.as_str())
            .ok_or_else(|| Error::Data(format!("manifest references unknown trace {:?}", entry.trace)))?;
        let mark = trace
            .phase_marks
            .get(entry.phase)
            .ok_or_else(|| Error::Data(format!("trace {} has no phase {}", entry.trace, entry.phase)))?;
        let start = mark.start + entry.offset;
        let end = start + w;
        if end > mark.end {
            return Err(Error::Data(format!(
                "manifest window {} exceeds its phase",
                entry.id
            )));
        }
        let t0 = trace.signal.timestamps()[start];
        out.push(WindowInstance {
            time_channel: trace.signal.timestamps()[start..end].iter().map(|t| t - t0).collect(),
            metric_channel: trace.signal.values()[start..end].to_vec(),
            label: entry.label,
            scenario: trace.meta.clone(),
            origin: WindowOrigin {
                trace: entry.trace.clone(),
                phase: entry.phase,
                offset: entry.offset,
            },
        });
    }
    Ok(out)
}

/// Cache key for a background set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackgroundKey {
    pub seed: u64,
    pub core_type: String,
    pub rounds: u32,
    pub window_size: usize,
    pub cycles_per_scenario: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CachedBackground {
    schema_version: u32,
    key: BackgroundKey,
    set: BackgroundSet,
}

pub fn write_background_cache(path: &Path, key: &BackgroundKey, set: &BackgroundSet) -> Result<()> {
    let cached = CachedBackground {
        schema_version: 1,
        key: key.clone(),
        set: set.clone(),
    };
    let json = serde_json::to_string(&cached)?;
    std::fs::File::create(path)?.write_all(json.as_bytes())?;
    Ok(())
}

/// Loads a cached background set when the key matches; `None` otherwise.
pub fn load_background_cache(path: &Path, key: &BackgroundKey) -> Result<Option<BackgroundSet>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path)?;
    let cached: CachedBackground = serde_json::from_str(&text)?;
    if cached.schema_version == 1 && &cached.key == key {
        Ok(Some(cached.set))
    } else {
        Ok(None)
    }
}
