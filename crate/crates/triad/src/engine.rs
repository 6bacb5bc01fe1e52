//! Step dynamics and simulation runs.
//!
//! Each step resolves its randomness in a fixed order: one uniform draw for
//! {new vertex vs old triple}, one for {preferential vs uniform}, then the
//! selection draw. Preferential selection is a uniform draw over the token
//! arrays (edge tokens at new-vertex steps, triangle tokens at old steps);
//! uniform selection is rejection-free index sampling without replacement.
//!
//! Runs are pure functions of their [`RunConfig`]: the random stream is
//! derived from `(seed, replication_index)`, so replications are independent
//! and individually reproducible.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    edge_key, triangle_key, EdgeKey, GraphState, TriangleKey, VertexId, WeightHistogram,
};
use crate::theory::{b_closed_form, Params};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid interaction choice: {0}")]
    InvalidChoice(String),
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error("structural invariants violated after step {step}: {violations:?}")]
    InvariantViolation { step: u64, violations: Vec<String> },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed run files: {0}")]
    MalformedRun(String),
}

/// One step's resolved randomness: which branch fired and who interacts.
///
/// Pairs and triples are canonical (ascending); for the new-vertex branches
/// the two participants are the old vertices and the new vertex's label is
/// implied as the current vertex count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum InteractionChoice {
    NewVertexPreferential { pair: EdgeKey },
    NewVertexUniform { pair: EdgeKey },
    OldPreferential { triple: TriangleKey },
    OldUniform { triple: TriangleKey },
}

impl InteractionChoice {
    pub fn branch_name(&self) -> &'static str {
        match self {
            InteractionChoice::NewVertexPreferential { .. } => "new_vertex_preferential",
            InteractionChoice::NewVertexUniform { .. } => "new_vertex_uniform",
            InteractionChoice::OldPreferential { .. } => "old_preferential",
            InteractionChoice::OldUniform { .. } => "old_uniform",
        }
    }

    pub fn is_new_vertex(&self) -> bool {
        matches!(
            self,
            InteractionChoice::NewVertexPreferential { .. }
                | InteractionChoice::NewVertexUniform { .. }
        )
    }

    /// The old vertices taking part (two or three).
    pub fn participants(&self) -> Vec<VertexId> {
        match *self {
            InteractionChoice::NewVertexPreferential { pair: (a, b) }
            | InteractionChoice::NewVertexUniform { pair: (a, b) } => vec![a, b],
            InteractionChoice::OldPreferential { triple: (a, b, c) }
            | InteractionChoice::OldUniform { triple: (a, b, c) } => vec![a, b, c],
        }
    }

    pub fn contains(&self, v: VertexId) -> bool {
        match *self {
            InteractionChoice::NewVertexPreferential { pair: (a, b) }
            | InteractionChoice::NewVertexUniform { pair: (a, b) } => v == a || v == b,
            InteractionChoice::OldPreferential { triple: (a, b, c) }
            | InteractionChoice::OldUniform { triple: (a, b, c) } => v == a || v == b || v == c,
        }
    }
}

/// Uniform unordered pair from `0..v`.
fn sample_pair<R: Rng + ?Sized>(v: u32, rng: &mut R) -> EdgeKey {
    debug_assert!(v >= 2);
    let i = rng.random_range(0..v);
    let mut j = rng.random_range(0..v - 1);
    if j >= i {
        j += 1;
    }
    edge_key(i, j)
}

/// Uniform unordered triple from `0..v`.
fn sample_triple<R: Rng + ?Sized>(v: u32, rng: &mut R) -> TriangleKey {
    debug_assert!(v >= 3);
    let i = rng.random_range(0..v);
    let mut j = rng.random_range(0..v - 1);
    if j >= i {
        j += 1;
    }
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    let mut k = rng.random_range(0..v - 2);
    if k >= lo {
        k += 1;
    }
    if k >= hi {
        k += 1;
    }
    triangle_key(i, j, k)
}

/// Resolves the randomness of the upcoming step.
///
/// Branch probabilities are `p*r`, `p*(1-r)`, `(1-p)*q`, `(1-p)*(1-q)`;
/// within a branch, selection is a uniform edge token, a uniform unordered
/// pair, a uniform triangle token, or a uniform unordered triple.
pub fn choose_interaction<R: Rng + ?Sized>(
    state: &GraphState,
    params: &Params,
    rng: &mut R,
) -> InteractionChoice {
    let new_vertex = rng.random::<f64>() < params.p();
    let pref_prob = if new_vertex { params.r() } else { params.q() };
    let preferential = rng.random::<f64>() < pref_prob;
    let v = state.vertex_count() as u32;
    if new_vertex {
        if preferential {
            let tokens = state.edge_tokens();
            let pair = tokens[rng.random_range(0..tokens.len())];
            InteractionChoice::NewVertexPreferential { pair }
        } else {
            InteractionChoice::NewVertexUniform {
                pair: sample_pair(v, rng),
            }
        }
    } else if preferential {
        let tokens = state.triangle_tokens();
        let triple = tokens[rng.random_range(0..tokens.len())];
        InteractionChoice::OldPreferential { triple }
    } else {
        InteractionChoice::OldUniform {
            triple: sample_triple(v, rng),
        }
    }
}

/// What one applied step changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepDelta {
    pub new_vertex: Option<VertexId>,
    /// All three interacting vertices (including a fresh label).
    pub participants: [VertexId; 3],
    pub edges_created: u8,
    pub triangle_created: bool,
}

/// Applies one resolved interaction: exactly three units of edge weight and
/// one unit of triangle weight are added, the three participants each gain
/// one unit of vertex weight, and missing edges/triangles are created at
/// weight 1.
pub fn apply_interaction(
    state: &mut GraphState,
    choice: &InteractionChoice,
) -> Result<StepDelta, EngineError> {
    let v_count = state.vertex_count() as u32;
    let delta = match *choice {
        InteractionChoice::NewVertexPreferential { pair: (a, b) }
        | InteractionChoice::NewVertexUniform { pair: (a, b) } => {
            if a >= b || b >= v_count {
                return Err(EngineError::InvalidChoice(format!(
                    "pair ({a}, {b}) not canonical within {v_count} vertices"
                )));
            }
            if matches!(choice, InteractionChoice::NewVertexPreferential { .. })
                && state.edge_weight(a, b).is_none()
            {
                return Err(EngineError::InvalidChoice(format!(
                    "preferential pair ({a}, {b}) is not an existing edge"
                )));
            }
            let fresh = state.add_vertex();
            let old_pair_existed = state.edge_weight(a, b).is_some();
            state.bump_edge(a, b);
            state.bump_edge(a, fresh);
            state.bump_edge(b, fresh);
            state.bump_triangle(a, b, fresh);
            StepDelta {
                new_vertex: Some(fresh),
                participants: [a, b, fresh],
                edges_created: if old_pair_existed { 2 } else { 3 },
                triangle_created: true,
            }
        }
        InteractionChoice::OldPreferential { triple: (a, b, c) }
        | InteractionChoice::OldUniform { triple: (a, b, c) } => {
            if !(a < b && b < c) || c >= v_count {
                return Err(EngineError::InvalidChoice(format!(
                    "triple ({a}, {b}, {c}) not canonical within {v_count} vertices"
                )));
            }
            if matches!(choice, InteractionChoice::OldPreferential { .. })
                && state.triangle_weight(a, b, c).is_none()
            {
                return Err(EngineError::InvalidChoice(format!(
                    "preferential triple ({a}, {b}, {c}) is not a stored triangle"
                )));
            }
            let mut edges_created = 0u8;
            for (u, v) in [(a, b), (a, c), (b, c)] {
                if state.edge_weight(u, v).is_none() {
                    edges_created += 1;
                }
                state.bump_edge(u, v);
            }
            let triangle_created = state.triangle_weight(a, b, c).is_none();
            state.bump_triangle(a, b, c);
            StepDelta {
                new_vertex: None,
                participants: [a, b, c],
                edges_created,
                triangle_created,
            }
        }
    };
    state.finish_step();
    // cheap per-step totals check; a failure here is an implementation bug
    debug_assert_eq!(state.total_edge_weight(), 3 * (state.steps() + 1));
    debug_assert_eq!(state.total_triangle_weight(), state.steps() + 1);
    Ok(delta)
}

/// Geometric checkpoint grid: powers of `base`, plus the final step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointSchedule {
    base: u64,
}

impl CheckpointSchedule {
    pub fn powers(base: u64) -> Result<Self, EngineError> {
        if base < 2 {
            return Err(EngineError::InvalidConfig(format!(
                "checkpoint base must be >= 2, got {base}"
            )));
        }
        Ok(CheckpointSchedule { base })
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    /// Checkpoint steps for a run of `n_steps`, strictly increasing and
    /// always ending at `n_steps`.
    pub fn points(&self, n_steps: u64) -> Vec<u64> {
        let mut points = Vec::new();
        let mut p = self.base;
        while p < n_steps {
            points.push(p);
            match p.checked_mul(self.base) {
                Some(next) => p = next,
                None => break,
            }
        }
        points.push(n_steps);
        points
    }
}

impl Default for CheckpointSchedule {
    fn default() -> Self {
        CheckpointSchedule { base: 2 }
    }
}

impl std::str::FromStr for CheckpointSchedule {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, EngineError> {
        let base = s
            .strip_prefix("pow")
            .and_then(|b| b.parse::<u64>().ok())
            .ok_or_else(|| {
                EngineError::InvalidConfig(format!(
                    "unrecognized checkpoint schedule {s:?} (expected e.g. \"pow2\")"
                ))
            })?;
        CheckpointSchedule::powers(base)
    }
}

impl std::fmt::Display for CheckpointSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "pow{}", self.base)
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: Params,
    pub n_steps: u64,
    pub seed: u64,
    pub replication_index: u32,
    pub tracked_vertices: Vec<VertexId>,
    pub checkpoints: CheckpointSchedule,
}

impl RunConfig {
    pub fn new(params: Params, n_steps: u64, seed: u64) -> Self {
        RunConfig {
            params,
            n_steps,
            seed,
            replication_index: 0,
            tracked_vertices: vec![0],
            checkpoints: CheckpointSchedule::default(),
        }
    }

    /// The random stream for this run, derived from `(seed, replication_index)`.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::from(self.replication_index));
        rng
    }
}

/// Everything needed to reproduce a run exactly, plus final totals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub p: f64,
    pub r: f64,
    pub q: f64,
    pub n_steps: u64,
    pub seed: u64,
    pub replication_index: u32,
    pub tracked_vertices: Vec<VertexId>,
    pub checkpoint_schedule: String,
    pub checkpoints: Vec<u64>,
    /// Birth step per tracked vertex; `None` flags a vertex that was never
    /// born (its trajectory is all zeros).
    pub birth_steps: BTreeMap<VertexId, Option<u64>>,
    pub never_born: Vec<VertexId>,
    pub final_v_count: u64,
    pub final_edge_weight: u64,
    pub final_triangle_weight: u64,
    pub final_d: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckpointRecord {
    pub n: u64,
    pub v_count: u64,
    pub histogram: WeightHistogram,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrajectoryPoint {
    pub n: u64,
    /// `W[n, j]`; zero before the vertex exists.
    pub weight: u64,
    /// `Z[n, j] = b_n * W[n, j] - d_n`.
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VertexTrajectory {
    pub label: VertexId,
    pub birth_step: Option<u64>,
    pub points: Vec<TrajectoryPoint>,
}

/// The output of one run. Serialization excludes `wall_time`, so identical
/// configs produce byte-identical files.
#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub manifest: Manifest,
    pub checkpoints: Vec<CheckpointRecord>,
    pub trajectories: Vec<VertexTrajectory>,
    #[serde(skip)]
    pub wall_time: Option<Duration>,
}

/// Executes a full run: `n_steps` steps with online `b_n`/`d_n` accumulation,
/// histogram checkpoints, tracked-vertex trajectories, and a full structural
/// audit at every checkpoint.
pub fn run_simulation(config: &RunConfig) -> Result<RunResult, EngineError> {
    run_simulation_with_state(config).map(|(result, _)| result)
}

/// [`run_simulation`], additionally returning the final graph state (for
/// snapshot export or further auditing).
pub fn run_simulation_with_state(
    config: &RunConfig,
) -> Result<(RunResult, GraphState), EngineError> {
    if config.n_steps < 1 {
        return Err(EngineError::InvalidConfig("n_steps must be >= 1".into()));
    }
    let start = Instant::now();
    let params = &config.params;
    let coeffs = params.coefficients();
    let (alpha, beta) = (coeffs.alpha, coeffs.beta);

    let mut tracked: Vec<VertexId> = config.tracked_vertices.clone();
    tracked.sort_unstable();
    tracked.dedup();

    let checkpoint_steps = config.checkpoints.points(config.n_steps);
    let mut next_checkpoint = 0usize;

    let mut state = GraphState::new();
    let mut rng = config.rng();

    let mut births: BTreeMap<VertexId, Option<u64>> = tracked
        .iter()
        .map(|&j| (j, if j < 3 { Some(0) } else { None }))
        .collect();

    let mut checkpoints: Vec<CheckpointRecord> = Vec::with_capacity(checkpoint_steps.len());
    let mut trajectories: Vec<VertexTrajectory> = tracked
        .iter()
        .map(|&label| VertexTrajectory {
            label,
            birth_step: None,
            points: Vec::with_capacity(checkpoint_steps.len()),
        })
        .collect();

    // b_n by multiplicative recurrence, refreshed from the Gamma closed form
    // periodically to bound drift; d_n accumulates beta*p*b_i/V_{i-1} with
    // the vertex count observed before each step.
    let mut b = 1.0f64;
    let mut d = 0.0f64;
    let beta_p = beta * params.p();

    for i in 1..=config.n_steps {
        let v_before = state.vertex_count() as f64;
        let fi = i as f64;
        b *= fi / (fi + alpha);
        if i % (1 << 16) == 0 {
            b = b_closed_form(i, alpha);
        }
        d += beta_p * b / v_before;

        let choice = choose_interaction(&state, params, &mut rng);
        let delta = apply_interaction(&mut state, &choice)?;
        if let Some(fresh) = delta.new_vertex {
            if let Some(slot) = births.get_mut(&fresh) {
                *slot = Some(i);
            }
        }

        if next_checkpoint < checkpoint_steps.len() && i == checkpoint_steps[next_checkpoint] {
            let violations = state.verify_invariants();
            if !violations.is_empty() {
                return Err(EngineError::InvariantViolation { step: i, violations });
            }
            checkpoints.push(CheckpointRecord {
                n: i,
                v_count: state.vertex_count() as u64,
                histogram: state.weight_histogram(),
            });
            for trajectory in &mut trajectories {
                let weight = state.vertex_weight(trajectory.label).unwrap_or(0);
                trajectory.points.push(TrajectoryPoint {
                    n: i,
                    weight,
                    z: b * weight as f64 - d,
                });
            }
            next_checkpoint += 1;
        }
    }

    let never_born: Vec<VertexId> = births
        .iter()
        .filter_map(|(&j, &birth)| birth.is_none().then_some(j))
        .collect();
    for trajectory in &mut trajectories {
        trajectory.birth_step = births.get(&trajectory.label).copied().flatten();
    }

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        p: params.p(),
        r: params.r(),
        q: params.q(),
        n_steps: config.n_steps,
        seed: config.seed,
        replication_index: config.replication_index,
        tracked_vertices: tracked,
        checkpoint_schedule: config.checkpoints.to_string(),
        checkpoints: checkpoint_steps,
        birth_steps: births,
        never_born,
        final_v_count: state.vertex_count() as u64,
        final_edge_weight: state.total_edge_weight(),
        final_triangle_weight: state.total_triangle_weight(),
        final_d: d,
    };

    let result = RunResult {
        manifest,
        checkpoints,
        trajectories,
        wall_time: Some(start.elapsed()),
    };
    Ok((result, state))
}

fn in_pool<T: Send>(
    threads: Option<usize>,
    execute: impl FnOnce() -> Result<T, EngineError> + Send,
) -> Result<T, EngineError> {
    match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| EngineError::InvalidConfig(format!("thread pool: {e}")))?;
            pool.install(execute)
        }
        None => execute(),
    }
}

fn replication_configs(template: &RunConfig, n_reps: u32) -> Vec<RunConfig> {
    (0..n_reps)
        .map(|i| RunConfig {
            replication_index: i,
            ..template.clone()
        })
        .collect()
}

/// Runs `n_reps` replications of `template` (replication indices `0..n_reps`)
/// concurrently, each on an isolated state and random stream. `threads`
/// caps the worker pool; `None` uses the rayon default.
pub fn run_replications(
    template: &RunConfig,
    n_reps: u32,
    threads: Option<usize>,
) -> Result<Vec<RunResult>, EngineError> {
    use rayon::prelude::*;

    let configs = replication_configs(template, n_reps);
    in_pool(threads, || {
        configs
            .par_iter()
            .map(run_simulation)
            .collect::<Result<Vec<_>, _>>()
    })
}

/// Like [`run_replications`], but hands each finished run (with its final
/// state) to `handler` instead of collecting them, so memory stays bounded
/// by the worker count. Handlers run concurrently.
pub fn run_replications_each<F>(
    template: &RunConfig,
    n_reps: u32,
    threads: Option<usize>,
    handler: F,
) -> Result<(), EngineError>
where
    F: Fn(RunResult, GraphState) -> Result<(), EngineError> + Sync,
{
    use rayon::prelude::*;

    let configs = replication_configs(template, n_reps);
    in_pool(threads, || {
        configs.par_iter().try_for_each(|config| {
            let (result, state) = run_simulation_with_state(config)?;
            handler(result, state)
        })
    })
}

impl RunResult {
    pub fn final_checkpoint(&self) -> &CheckpointRecord {
        self.checkpoints
            .last()
            .expect("a run always has its final checkpoint")
    }

    pub fn write_manifest_json<W: Write>(&self, out: &mut W) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut *out, &self.manifest)?;
        writeln!(out)
    }

    /// `histogram.csv`: `checkpoint_n,w,count,V_n`.
    pub fn write_histogram_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "checkpoint_n,w,count,V_n")?;
        for record in &self.checkpoints {
            for (&w, &count) in record.histogram.counts() {
                writeln!(out, "{},{},{},{}", record.n, w, count, record.v_count)?;
            }
        }
        Ok(())
    }

    /// `trajectory.csv`: `vertex_label,n,W,Z`.
    pub fn write_trajectory_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "vertex_label,n,W,Z")?;
        for trajectory in &self.trajectories {
            for point in &trajectory.points {
                writeln!(
                    out,
                    "{},{},{},{}",
                    trajectory.label, point.n, point.weight, point.z
                )?;
            }
        }
        Ok(())
    }

    /// Writes `manifest.json`, `histogram.csv` and `trajectory.csv` into `dir`.
    pub fn save_to_dir(&self, dir: &Path) -> Result<(), EngineError> {
        fs::create_dir_all(dir)?;
        let mut manifest = Vec::new();
        self.write_manifest_json(&mut manifest)?;
        fs::write(dir.join("manifest.json"), manifest)?;
        let mut histogram = Vec::new();
        self.write_histogram_csv(&mut histogram)?;
        fs::write(dir.join("histogram.csv"), histogram)?;
        let mut trajectory = Vec::new();
        self.write_trajectory_csv(&mut trajectory)?;
        fs::write(dir.join("trajectory.csv"), trajectory)?;
        Ok(())
    }

    /// Reloads a result saved by [`RunResult::save_to_dir`].
    pub fn load_from_dir(dir: &Path) -> Result<RunResult, EngineError> {
        let manifest_text = fs::read_to_string(dir.join("manifest.json"))?;
        let manifest: Manifest = serde_json::from_str(&manifest_text)
            .map_err(|e| EngineError::MalformedRun(format!("manifest.json: {e}")))?;

        let histogram_text = fs::read_to_string(dir.join("histogram.csv"))?;
        let mut per_checkpoint: BTreeMap<u64, (u64, BTreeMap<u64, u64>)> = BTreeMap::new();
        for (line_no, line) in histogram_text.lines().enumerate().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            let parsed: Option<(u64, u64, u64, u64)> = (fields.len() == 4)
                .then(|| {
                    Some((
                        fields[0].parse().ok()?,
                        fields[1].parse().ok()?,
                        fields[2].parse().ok()?,
                        fields[3].parse().ok()?,
                    ))
                })
                .flatten();
            let (n, w, count, v_count) = parsed.ok_or_else(|| {
                EngineError::MalformedRun(format!("histogram.csv line {}", line_no + 1))
            })?;
            let entry = per_checkpoint.entry(n).or_insert_with(|| (v_count, BTreeMap::new()));
            entry.0 = v_count;
            entry.1.insert(w, count);
        }
        let checkpoints: Vec<CheckpointRecord> = per_checkpoint
            .into_iter()
            .map(|(n, (v_count, counts))| CheckpointRecord {
                n,
                v_count,
                histogram: WeightHistogram::from_counts(counts),
            })
            .collect();

        let trajectory_text = fs::read_to_string(dir.join("trajectory.csv"))?;
        let mut trajectories: Vec<VertexTrajectory> = Vec::new();
        for (line_no, line) in trajectory_text.lines().enumerate().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            let parsed: Option<(VertexId, u64, u64, f64)> = (fields.len() == 4)
                .then(|| {
                    Some((
                        fields[0].parse().ok()?,
                        fields[1].parse().ok()?,
                        fields[2].parse().ok()?,
                        fields[3].parse().ok()?,
                    ))
                })
                .flatten();
            let (label, n, weight, z) = parsed.ok_or_else(|| {
                EngineError::MalformedRun(format!("trajectory.csv line {}", line_no + 1))
            })?;
            let trajectory = match trajectories.last_mut() {
                Some(t) if t.label == label => t,
                _ => {
                    trajectories.push(VertexTrajectory {
                        label,
                        birth_step: manifest.birth_steps.get(&label).copied().flatten(),
                        points: Vec::new(),
                    });
                    trajectories.last_mut().unwrap()
                }
            };
            trajectory.points.push(TrajectoryPoint { n, weight, z });
        }

        Ok(RunResult {
            manifest,
            checkpoints,
            trajectories,
            wall_time: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::Params;

    fn params(p: f64, r: f64, q: f64) -> Params {
        Params::new(p, r, q).unwrap()
    }

    #[test]
    fn apply_new_vertex_interaction() {
        let mut g = GraphState::new();
        let delta = apply_interaction(
            &mut g,
            &InteractionChoice::NewVertexUniform { pair: (0, 1) },
        )
        .unwrap();
        assert_eq!(delta.new_vertex, Some(3));
        assert_eq!(delta.participants, [0, 1, 3]);
        assert_eq!(delta.edges_created, 2);
        assert!(delta.triangle_created);
        assert_eq!(g.edge_weight(0, 1), Some(2));
        assert_eq!(g.edge_weight(0, 3), Some(1));
        assert_eq!(g.edge_weight(1, 3), Some(1));
        assert_eq!(g.triangle_weight(0, 1, 3), Some(1));
        assert_eq!(g.vertex_weights(), &[2, 2, 1, 1]);
        assert!(g.verify_invariants().is_empty());
    }

    #[test]
    fn apply_old_triple_on_initial_state() {
        let mut g = GraphState::new();
        apply_interaction(&mut g, &InteractionChoice::OldUniform { triple: (0, 1, 2) }).unwrap();
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            assert_eq!(g.edge_weight(a, b), Some(2));
        }
        assert_eq!(g.triangle_weight(0, 1, 2), Some(2));
        assert_eq!(g.vertex_weights(), &[2, 2, 2]);
        assert!(g.verify_invariants().is_empty());
    }

    #[test]
    fn apply_old_triple_with_missing_edge() {
        let mut g = GraphState::new();
        apply_interaction(
            &mut g,
            &InteractionChoice::NewVertexUniform { pair: (0, 1) },
        )
        .unwrap();
        let delta =
            apply_interaction(&mut g, &InteractionChoice::OldUniform { triple: (1, 2, 3) })
                .unwrap();
        assert_eq!(delta.edges_created, 1); // (2,3) is new
        assert!(delta.triangle_created);
        assert_eq!(g.edge_weight(1, 2), Some(2));
        assert_eq!(g.edge_weight(2, 3), Some(1));
        assert_eq!(g.edge_weight(1, 3), Some(2));
        assert_eq!(g.triangle_weight(1, 2, 3), Some(1));
        assert_eq!(g.total_edge_weight(), 9);
        assert_eq!(g.total_triangle_weight(), 3);
        assert!(g.verify_invariants().is_empty());
    }

    #[test]
    fn apply_rejects_invalid_choices() {
        let mut g = GraphState::new();
        // not an existing edge
        assert!(matches!(
            apply_interaction(
                &mut g,
                &InteractionChoice::NewVertexPreferential { pair: (0, 5) }
            ),
            Err(EngineError::InvalidChoice(_))
        ));
        // non-canonical pair
        assert!(apply_interaction(
            &mut g,
            &InteractionChoice::NewVertexUniform { pair: (1, 1) }
        )
        .is_err());
        // not a stored triangle
        let mut g2 = GraphState::new();
        apply_interaction(
            &mut g2,
            &InteractionChoice::NewVertexUniform { pair: (0, 1) },
        )
        .unwrap();
        assert!(matches!(
            apply_interaction(
                &mut g2,
                &InteractionChoice::OldPreferential { triple: (1, 2, 3) }
            ),
            Err(EngineError::InvalidChoice(_))
        ));
        // rejected choices must leave no trace
        assert!(g.verify_invariants().is_empty());
        assert_eq!(g.steps(), 0);
    }

    // The all-uniform corner (r = 0 with p = 1) is excluded by the
    // scale-free condition, so the uniform-pair law is checked on the
    // conditional distribution given the uniform branch.
    #[test]
    fn uniform_pair_selection_is_uniform_on_initial_state() {
        let p = params(1.0, 0.5, 0.0);
        let g = GraphState::new();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut counts = BTreeMap::new();
        let mut n = 0u64;
        for _ in 0..60_000 {
            if let InteractionChoice::NewVertexUniform { pair } =
                choose_interaction(&g, &p, &mut rng)
            {
                *counts.entry(pair).or_insert(0u64) += 1;
                n += 1;
            }
        }
        assert_eq!(counts.len(), 3);
        let sigma = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for (_, &c) in &counts {
            assert!((c as f64 - n as f64 / 3.0).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn branch_frequencies_and_forced_triangle() {
        let p = params(0.5, 0.0, 1.0);
        let g = GraphState::new();
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let n = 100_000u64;
        let mut uniform_new = 0u64;
        for _ in 0..n {
            match choose_interaction(&g, &p, &mut rng) {
                InteractionChoice::NewVertexUniform { .. } => uniform_new += 1,
                InteractionChoice::OldPreferential { triple } => {
                    // the only positive-weight triangle on the initial state
                    assert_eq!(triple, (0, 1, 2));
                }
                other => panic!("unexpected branch {other:?}"),
            }
        }
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((uniform_new as f64 - n as f64 * 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn preferential_edge_selection_is_uniform_on_unit_weights() {
        let p = params(1.0, 1.0, 0.0);
        let g = GraphState::new();
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let n = 30_000;
        let mut counts = BTreeMap::new();
        for _ in 0..n {
            match choose_interaction(&g, &p, &mut rng) {
                InteractionChoice::NewVertexPreferential { pair } => {
                    *counts.entry(pair).or_insert(0u64) += 1
                }
                other => panic!("unexpected branch {other:?}"),
            }
        }
        assert_eq!(counts.len(), 3);
        let sigma = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for (_, &c) in &counts {
            assert!((c as f64 - n as f64 / 3.0).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn checkpoint_schedule_points() {
        let s = CheckpointSchedule::powers(2).unwrap();
        assert_eq!(s.points(10), vec![2, 4, 8, 10]);
        assert_eq!(s.points(8), vec![2, 4, 8]);
        assert_eq!(s.points(1), vec![1]);
        let s: CheckpointSchedule = "pow10".parse().unwrap();
        assert_eq!(s.points(100_000), vec![10, 100, 1_000, 10_000, 100_000]);
        assert_eq!(s.to_string(), "pow10");
        assert!("linear".parse::<CheckpointSchedule>().is_err());
        assert!("pow1".parse::<CheckpointSchedule>().is_err());
    }

    #[test]
    fn run_is_reproducible() {
        let config = RunConfig {
            tracked_vertices: vec![0, 3],
            ..RunConfig::new(params(0.5, 0.5, 0.5), 2_000, 42)
        };
        let a = run_simulation(&config).unwrap();
        let b = run_simulation(&config).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let mut csv_a = Vec::new();
        a.write_histogram_csv(&mut csv_a).unwrap();
        let mut csv_b = Vec::new();
        b.write_histogram_csv(&mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
    }

    #[test]
    fn replications_differ_and_are_ordered() {
        let template = RunConfig::new(params(0.5, 0.5, 0.5), 500, 7);
        let results = run_replications(&template, 3, Some(2)).unwrap();
        assert_eq!(results.len(), 3);
        for (i, r) in results.iter().enumerate() {
            assert_eq!(r.manifest.replication_index, i as u32);
        }
        assert_ne!(
            serde_json::to_string(&results[0].checkpoints.last().unwrap().histogram).unwrap(),
            serde_json::to_string(&results[1].checkpoints.last().unwrap().histogram).unwrap(),
        );
    }

    #[test]
    fn per_step_changes_are_bounded() {
        let p = params(0.4, 0.6, 0.3);
        let mut state = GraphState::new();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..2_000 {
            let before = state.vertex_weights().to_vec();
            let hist_before = state.weight_histogram();
            let choice = choose_interaction(&state, &p, &mut rng);
            apply_interaction(&mut state, &choice).unwrap();
            let after = state.vertex_weights();
            // every pre-existing vertex changes weight by 0 or 1
            for (v, &w0) in before.iter().enumerate() {
                let dw = after[v] - w0;
                assert!(dw <= 1, "vertex {v} jumped by {dw}");
            }
            // histogram components move by at most 3
            let hist_after = state.weight_histogram();
            let weights: std::collections::BTreeSet<u64> = hist_before
                .counts()
                .keys()
                .chain(hist_after.counts().keys())
                .copied()
                .collect();
            for w in weights {
                let delta =
                    (hist_after.count(w) as i64 - hist_before.count(w) as i64).unsigned_abs();
                assert!(delta <= 3, "histogram count at weight {w} moved by {delta}");
            }
        }
        assert!(state.verify_invariants().is_empty());
    }

    #[test]
    fn tracked_vertices_record_births_and_zeros() {
        let config = RunConfig {
            tracked_vertices: vec![0, 5, 40_000],
            ..RunConfig::new(params(0.5, 0.5, 0.5), 300, 9)
        };
        let result = run_simulation(&config).unwrap();
        assert_eq!(result.manifest.birth_steps[&0], Some(0));
        let birth5 = result.manifest.birth_steps[&5].expect("vertex 5 should be born");
        assert!(birth5 >= 3); // label 5 is the third vertex born
        assert!(result.manifest.never_born.contains(&40_000));
        let t = result
            .trajectories
            .iter()
            .find(|t| t.label == 40_000)
            .unwrap();
        assert!(t.points.iter().all(|pt| pt.weight == 0));
        let t5 = result.trajectories.iter().find(|t| t.label == 5).unwrap();
        for pt in &t5.points {
            if pt.n < birth5 {
                assert_eq!(pt.weight, 0);
            } else {
                assert!(pt.weight >= 1);
            }
        }
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig {
            tracked_vertices: vec![0, 4],
            ..RunConfig::new(params(0.6, 0.4, 0.2), 400, 21)
        };
        let result = run_simulation(&config).unwrap();
        let run_dir = dir.path().join("run-0");
        result.save_to_dir(&run_dir).unwrap();
        let loaded = RunResult::load_from_dir(&run_dir).unwrap();
        assert_eq!(
            serde_json::to_string(&result).unwrap(),
            serde_json::to_string(&loaded).unwrap()
        );
    }
}
