//! Run configuration, file formats and the end-to-end pipeline
//! (parse -> compile -> solve -> sample -> project -> rank -> evaluate).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::projection::{
    generate_references, project_point, CameraHeuristics, Intrinsics, ProjectionError,
    ReferenceLayout,
};
use crate::query::{
    parse_dsl, parse_english, Diagnostic, ParseError, Query, RelationDictionary,
};
use crate::relations::{compile, CompileError, CompiledConstraint, EvalContext, RelationThresholds};
use crate::retrieval::{
    median_rank, rank_database, recall_at_k, DetectionSet, MatchConfig, MetricsError, RankedImage,
};
use crate::scene::{ConcretePose, LibraryError, ObjectLibrary, Scene};
use crate::solver::{close_bounds, solve, LayoutState, SolveOutcome, SolveStats, SolveStatus, SolverConfig};

/// Everything a run needs; all defaults mirror the reference parameter
/// selection (5 m room, d_near 0.5, d_min/max-above 0.25/0.5, tolerance
/// 0.2, 5 layouts, 1 camera view, detection threshold 0.5).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub room: [f64; 3],
    pub thresholds: RelationThresholds,
    /// Coherence-prior distance between a triplet's objects (meters).
    pub coherence_distance: f64,
    pub solver: SolverConfig,
    pub matching: MatchConfig,
    /// Reference layouts per query.
    pub layouts_m: usize,
    /// Camera views per layout.
    pub cameras_v: usize,
    pub intrinsics: Intrinsics,
    pub camera: CameraHeuristics,
    pub seed: u64,
    pub object_library: Option<PathBuf>,
    pub relation_dictionary: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            room: [5.0, 5.0, 5.0],
            thresholds: RelationThresholds::default(),
            coherence_distance: 2.0,
            solver: SolverConfig::default(),
            matching: MatchConfig::default(),
            layouts_m: 5,
            cameras_v: 1,
            intrinsics: Intrinsics::default(),
            camera: CameraHeuristics::default(),
            seed: 0,
            object_library: None,
            relation_dictionary: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<RunConfig, PipelineError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn context(&self) -> EvalContext {
        EvalContext {
            thresholds: self.thresholds,
            tol: self.solver.tol,
            coherence_distance: self.coherence_distance,
        }
    }

    /// Applies the master seed to the stage-specific RNG streams.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.solver.seed = seed;
        self
    }

    pub fn library(&self) -> Result<ObjectLibrary, PipelineError> {
        match &self.object_library {
            None => Ok(ObjectLibrary::builtin()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                Ok(ObjectLibrary::from_toml_str(&text)?)
            }
        }
    }

    pub fn dictionary(&self) -> Result<RelationDictionary, PipelineError> {
        match &self.relation_dictionary {
            None => Ok(RelationDictionary::builtin()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                RelationDictionary::from_toml_str(&text)
                    .map_err(|e| PipelineError::Config(e.to_string()))
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("query proven infeasible (search space exhausted)")]
    Infeasible,
    #[error("no solution found within the expansion budget")]
    BudgetExhausted { stats: SolveStats },
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("format: {0}")]
    Format(#[from] serde_json::Error),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl PipelineError {
    /// Process exit code: 2 parse, 3 infeasible, 4 budget, 5 i/o and
    /// formats.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Parse(_) => 2,
            PipelineError::Infeasible => 3,
            PipelineError::BudgetExhausted { .. } => 4,
            PipelineError::Compile(_) | PipelineError::Config(_) | PipelineError::Library(_) => 2,
            _ => 5,
        }
    }
}

/// Parses a query in either front-end syntax.
pub fn parse_query(
    text: &str,
    english: bool,
    lib: &ObjectLibrary,
    dict: &RelationDictionary,
) -> Result<(Query, Vec<Diagnostic>), ParseError> {
    if english {
        parse_english(text, lib, dict)
    } else {
        parse_dsl(text, lib).map(|q| (q, Vec::new()))
    }
}

/// Compiles and solves a query. Infeasibility and budget exhaustion with
/// zero solutions are errors; partial early stops return what was found.
pub fn solve_query(
    query: &Query,
    cfg: &RunConfig,
    lib: &ObjectLibrary,
) -> Result<(CompiledConstraint, SolveOutcome), PipelineError> {
    let compiled = compile(query, lib, cfg.context(), cfg.room)?;
    let bounds = match close_bounds(&crate::relations::init_bounds(&compiled)) {
        Some(b) => b,
        None => return Err(PipelineError::Infeasible),
    };
    let init = compiled.initial_state();
    let outcome = solve(|s| compiled.eval(s), init, Some(&bounds), &cfg.solver);
    if outcome.solutions.is_empty() {
        return Err(match outcome.status {
            SolveStatus::Exhausted => PipelineError::Infeasible,
            _ => PipelineError::BudgetExhausted {
                stats: outcome.stats,
            },
        });
    }
    Ok((compiled, outcome))
}

/// Samples one concrete layout per solution box.
pub fn sample_layouts(outcome: &SolveOutcome, seed: u64) -> Vec<Vec<ConcretePose>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    outcome.solutions.iter().map(|s| s.sample(&mut rng)).collect()
}

/// One query's full artifact set.
pub struct QueryRun {
    pub query: Query,
    pub diagnostics: Vec<Diagnostic>,
    pub compiled: CompiledConstraint,
    pub outcome: SolveOutcome,
    pub layouts: Vec<Vec<ConcretePose>>,
    pub references: Vec<ReferenceLayout>,
}

/// parse -> solve -> sample -> project.
pub fn run_query(
    text: &str,
    english: bool,
    cfg: &RunConfig,
    lib: &ObjectLibrary,
    dict: &RelationDictionary,
) -> Result<QueryRun, PipelineError> {
    let (query, diagnostics) = parse_query(text, english, lib, dict)?;
    let (compiled, outcome) = solve_query(&query, cfg, lib)?;
    let layouts = sample_layouts(&outcome, cfg.seed);
    let references = generate_references(
        &layouts,
        &compiled.scene,
        cfg.layouts_m,
        cfg.cameras_v,
        &cfg.camera,
        cfg.intrinsics,
        cfg.seed.wrapping_add(2),
    )?;
    Ok(QueryRun {
        query,
        diagnostics,
        compiled,
        outcome,
        layouts,
        references,
    })
}

// ---------------------------------------------------------------------
// file formats
// ---------------------------------------------------------------------

/// Per-object interval box of one solution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VarBox {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
    pub d: [f64; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub boxes: Vec<VarBox>,
    pub sample: Vec<ConcretePose>,
}

/// Solution dump: per object the interval box and the sampled pose, with
/// the search stats appended. Wall time deliberately stays out of the file
/// so identical seeds give identical bytes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionFile {
    pub query: String,
    pub objects: Vec<String>,
    pub room: [f64; 3],
    pub solutions: Vec<SolutionRecord>,
    pub status: SolveStatus,
    pub stats: SolveStats,
}

impl SolutionFile {
    pub fn build(
        query: &Query,
        scene: &Scene,
        outcome: &SolveOutcome,
        layouts: &[Vec<ConcretePose>],
    ) -> SolutionFile {
        let to_var_box = |s: &LayoutState, i: usize| VarBox {
            x: [s.var(i, 0).lo(), s.var(i, 0).hi()],
            y: [s.var(i, 1).lo(), s.var(i, 1).hi()],
            z: [s.var(i, 2).lo(), s.var(i, 2).hi()],
            d: [s.var(i, 3).lo(), s.var(i, 3).hi()],
        };
        SolutionFile {
            query: crate::query::render_dsl(query),
            objects: scene.objects.iter().map(|o| o.name.clone()).collect(),
            room: scene.room,
            solutions: outcome
                .solutions
                .iter()
                .zip(layouts)
                .map(|(s, sample)| SolutionRecord {
                    boxes: (0..scene.len()).map(|i| to_var_box(s, i)).collect(),
                    sample: sample.clone(),
                })
                .collect(),
            status: outcome.status,
            stats: outcome.stats.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReferenceFile {
    pub query_id: String,
    /// Object category per scene index, for rendering overlays.
    pub categories: Vec<String>,
    pub references: Vec<ReferenceLayout>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankingFile {
    pub query_id: String,
    pub scorer: String,
    pub entries: Vec<RankedImage>,
}

/// Ground truth: query id -> relevant image ids.
pub type GroundTruth = BTreeMap<String, Vec<String>>;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ks: Vec<usize>,
    pub recall: Vec<f64>,
    pub median_rank: f64,
}

impl MetricsReport {
    pub fn table(&self) -> String {
        let mut head = String::from("|");
        let mut row = String::from("|");
        for (k, r) in self.ks.iter().zip(&self.recall) {
            head.push_str(&format!(" R@{k} |"));
            row.push_str(&format!(" {:.3} |", r));
        }
        head.push_str(" median |");
        row.push_str(&format!(" {:.1} |", self.median_rank));
        format!("{head}\n{row}\n")
    }
}

/// Computes R@k for each requested k plus the pooled median rank.
pub fn evaluate_rankings(
    rankings: &[RankingFile],
    gt: &GroundTruth,
    ks: &[usize],
) -> Result<MetricsReport, PipelineError> {
    let mut ranks_per_query = Vec::new();
    for r in rankings {
        let relevant = gt.get(&r.query_id).ok_or_else(|| {
            PipelineError::Config(format!("no ground truth for query `{}`", r.query_id))
        })?;
        if relevant.is_empty() {
            return Err(MetricsError::EmptyGroundTruth(ranks_per_query.len()).into());
        }
        let mut ranks = Vec::new();
        for id in relevant {
            let rank = r
                .entries
                .iter()
                .find(|e| &e.image_id == id)
                .map(|e| e.rank)
                .ok_or_else(|| {
                    PipelineError::Config(format!(
                        "ground-truth image `{id}` missing from ranking of `{}`",
                        r.query_id
                    ))
                })?;
            ranks.push(rank);
        }
        ranks_per_query.push(ranks);
    }
    let recall = ks
        .iter()
        .map(|&k| recall_at_k(&ranks_per_query, k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MetricsReport {
        ks: ks.to_vec(),
        recall,
        median_rank: median_rank(&ranks_per_query)?,
    })
}

/// Reads every `*.json` detection file in a directory, sorted by file name.
pub fn load_detections_dir(dir: &Path) -> Result<Vec<DetectionSet>, PipelineError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(PipelineError::Config(format!(
            "no detection files in {}",
            dir.display()
        )));
    }
    files
        .iter()
        .map(|p| Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?))
        .collect()
}

/// Serializes any artifact deterministically.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, PipelineError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Ranks a database with the layout scorer.
pub fn rank_query(
    query_id: &str,
    references: &[ReferenceLayout],
    db: &[DetectionSet],
    matching: &MatchConfig,
) -> RankingFile {
    RankingFile {
        query_id: query_id.to_string(),
        scorer: format!("{:?}", matching.mode).to_lowercase(),
        entries: rank_database(references, db, matching),
    }
}

/// Ranks a database with the occurrence-histogram baseline.
pub fn rank_query_histogram(
    query_id: &str,
    query: &Query,
    db: &[DetectionSet],
    matching: &MatchConfig,
) -> RankingFile {
    let scored = db
        .iter()
        .map(|det| RankedImage {
            rank: 0,
            image_id: det.image_id.clone(),
            score: crate::retrieval::baseline_histogram(query, det, matching),
            best_reference: 0,
            best_scale: 1.0,
            best_translation: (0.0, 0.0),
            assignment: Vec::new(),
        })
        .collect();
    RankingFile {
        query_id: query_id.to_string(),
        scorer: "histogram".into(),
        entries: crate::retrieval::rank_by_scores(scored),
    }
}

// ---------------------------------------------------------------------
// svg rendering of reference configurations
// ---------------------------------------------------------------------

const EDGES: [(usize, usize); 12] = [
    (0, 1),
    (0, 2),
    (1, 3),
    (2, 3),
    (4, 5),
    (4, 6),
    (5, 7),
    (6, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

fn category_color(name: &str) -> String {
    let hash: u32 = name
        .bytes()
        .fold(2166136261u32, |h, b| (h ^ u32::from(b)).wrapping_mul(16777619));
    format!("hsl({}, 65%, 45%)", hash % 360)
}

/// Renders a reference configuration: projected cuboid wireframes plus the
/// derived 2D bounding boxes with category labels.
pub fn reference_svg(
    reference: &ReferenceLayout,
    layout: &[ConcretePose],
    scene: &Scene,
) -> String {
    let (w, h) = (
        reference.camera.intrinsics.width,
        reference.camera.intrinsics.height,
    );
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"#fafafa\"/>\n"
    );
    for (pose, obj) in layout.iter().zip(&scene.objects) {
        let color = category_color(&obj.category);
        let pts = crate::scene::corner_points(pose, &obj.model.spec);
        let px: Vec<Option<[f64; 2]>> = pts
            .iter()
            .map(|p| project_point(&reference.camera, *p))
            .collect();
        for (a, b) in EDGES {
            if let (Some(pa), Some(pb)) = (px[a], px[b]) {
                svg.push_str(&format!(
                    "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"{}\" stroke-width=\"1\" opacity=\"0.45\"/>\n",
                    pa[0], pa[1], pb[0], pb[1], color
                ));
            }
        }
    }
    for b in &reference.boxes {
        let color = category_color(&b.category);
        svg.push_str(&format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"{}\">{}</text>\n",
            b.x_min,
            b.y_min,
            b.width(),
            b.height(),
            color,
            b.x_min + 2.0,
            (b.y_min - 4.0).max(10.0),
            color,
            b.category
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(back.room, cfg.room);
        assert_eq!(back.solver.tol, cfg.solver.tol);
        assert_eq!(back.matching.stride, cfg.matching.stride);
    }

    #[test]
    fn config_partial_overrides() {
        let cfg = RunConfig::from_toml_str("seed = 7\n[solver]\ntol = 0.3\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.solver.tol, 0.3);
        assert_eq!(cfg.room, [5.0, 5.0, 5.0]);
    }

    #[test]
    fn metrics_report_evaluation() {
        let mk = |qid: &str, order: &[&str]| RankingFile {
            query_id: qid.into(),
            scorer: "soft".into(),
            entries: order
                .iter()
                .enumerate()
                .map(|(i, id)| RankedImage {
                    rank: i + 1,
                    image_id: (*id).into(),
                    score: 1.0 - i as f64 * 0.1,
                    best_reference: 0,
                    best_scale: 1.0,
                    best_translation: (0.0, 0.0),
                    assignment: vec![],
                })
                .collect(),
        };
        let rankings = vec![
            mk("q0", &["a", "b", "c"]),
            mk("q1", &["b", "c", "a"]),
        ];
        let mut gt = GroundTruth::new();
        gt.insert("q0".into(), vec!["a".into()]);
        gt.insert("q1".into(), vec!["a".into()]);
        let report = evaluate_rankings(&rankings, &gt, &[1, 2, 3]).unwrap();
        assert_eq!(report.recall, vec![0.5, 0.5, 1.0]);
        assert_eq!(report.median_rank, 2.0);

        let mut missing = GroundTruth::new();
        missing.insert("q0".into(), vec!["a".into()]);
        assert!(evaluate_rankings(&rankings, &missing, &[1]).is_err());
    }

    #[test]
    fn deterministic_json_bytes() {
        let cfg = RunConfig::default();
        assert_eq!(
            to_json_bytes(&cfg.matching).unwrap(),
            to_json_bytes(&cfg.matching.clone()).unwrap()
        );
    }
}
