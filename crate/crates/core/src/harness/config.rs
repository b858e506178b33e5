//! TOML experiment descriptions.
//!
//! ```toml
//! algorithm = "drfp"
//! seed = 7
//! max_iter = 100000
//!
//! [graph]
//! preset = "fixed-unbalanced-5"
//!
//! [problem]
//! kind = "facility-location"
//! preset = "default"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::BaselineKind;
use crate::convex::{ConvexFn, SimpleSet};
use crate::engine::{CrucialEvaluation, RunOptions, Selection, StepSchedule, StopRule};
use crate::error::{Error, Result};
use crate::graph::{uniform_row_weights, Digraph, GraphSchedule, WeightMatrix};
use crate::problem::Problem;

use super::facility::{default_instance, generate_facility_location, FacilityLocation, GeometryBounds};
use super::presets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Drfp,
    Dgd,
    ConstrainedDgd,
    DistributedPolyakRandom,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Drfp => "drfp",
            Algorithm::Dgd => BaselineKind::Dgd.name(),
            Algorithm::ConstrainedDgd => BaselineKind::ConstrainedDgd.name(),
            Algorithm::DistributedPolyakRandom => BaselineKind::DistributedPolyakRandom.name(),
        }
    }
}

fn default_beta() -> f64 {
    1.0
}

fn default_max_iter() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub algorithm: Algorithm,
    pub seed: u64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub thinning: usize,
    /// Relative to the config file's directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub steps: StepConfig,
    #[serde(default)]
    pub variant: VariantConfig,
    #[serde(default)]
    pub stop: Option<StopConfig>,
    pub graph: GraphConfig,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    /// Directory relative paths resolve against; set by [`ExperimentConfig::load`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepConfig {
    pub scale: f64,
    pub offset: f64,
    pub power: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            scale: 1.0,
            offset: 0.0,
            power: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrucialEvaluationName {
    #[default]
    AfterRandom,
    BeforeRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionName {
    #[default]
    Uniform,
    MostViolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariantConfig {
    pub crucial_evaluation: CrucialEvaluationName,
    pub selection: SelectionName,
    pub random_projections: usize,
}

impl Default for VariantConfig {
    fn default() -> Self {
        VariantConfig {
            crucial_evaluation: CrucialEvaluationName::default(),
            selection: SelectionName::default(),
            random_projections: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopConfig {
    pub consensus_tol: f64,
    pub feasibility_tol: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
}

fn default_patience() -> usize {
    100
}

/// Exactly one source among `preset`, `edges`, `edge_file`, `weights` and
/// `schedule` must be given. Edges are `[receiver, sender]` pairs, 1-based.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub preset: Option<String>,
    pub nodes: Option<usize>,
    pub edges: Option<Vec<[usize; 2]>>,
    pub edge_file: Option<PathBuf>,
    /// Row-stochastic weights; the graph is their nonzero pattern.
    pub weights: Option<Vec<Vec<f64>>>,
    /// Edge-list files visited cyclically, one per round.
    pub schedule: Option<Vec<PathBuf>>,
    /// Joint connectivity window for time-varying schedules; defaults to the period.
    pub window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    FacilityLocation {
        #[serde(default)]
        preset: Option<String>,
        #[serde(default)]
        instance: Option<FacilityLocation>,
        #[serde(default)]
        generate: Option<GenerateConfig>,
    },
    /// `f_i(x) = w_i ||x - c_i||^2` on the whole space, without constraints.
    Quadratic { centers: Vec<Vec<f64>>, weights: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub bounds: GeometryBounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Grid spacing; defaults to 1e-3 of the search box side.
    pub resolution: Option<f64>,
}

/// A problem ready to run, keeping the facility geometry when there is one.
#[derive(Debug, Clone)]
pub enum BuiltProblem {
    Facility { instance: FacilityLocation, problem: Problem<f64> },
    Quadratic(Problem<f64>),
}

impl BuiltProblem {
    pub fn problem(&self) -> &Problem<f64> {
        match self {
            BuiltProblem::Facility { problem, .. } | BuiltProblem::Quadratic(problem) => problem,
        }
    }
}

impl ExperimentConfig {
    /// Reads, parses and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let ctx = || format!("config {}", path.display());
        let text = fs::read_to_string(path).map_err(|e| Error::io(ctx(), e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base).map_err(|e| e.context(ctx()))
    }

    /// Parses TOML text, resolving relative paths against `base_dir`.
    pub fn parse(text: &str, base_dir: PathBuf) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.base_dir = base_dir;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 2.0) {
            return Err(Error::Config(format!("beta = {} must lie in (0, 2)", self.beta)));
        }
        if self.max_iter < 1 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if self.variant.random_projections < 1 {
            return Err(Error::Config("variant.random_projections must be at least 1".into()));
        }
        if let Some(r) = self.oracle.resolution {
            if !(r > 0.0) {
                return Err(Error::Config(format!("oracle.resolution = {r} must be positive")));
            }
        }
        if let Some(s) = &self.stop {
            if !(s.consensus_tol > 0.0 && s.feasibility_tol > 0.0) || s.patience < 1 {
                return Err(Error::Config("stop tolerances must be positive and patience at least 1".into()));
            }
        }
        self.step_schedule()?;
        if let ProblemConfig::Quadratic { centers, weights } = &self.problem {
            if centers.len() != weights.len() {
                return Err(Error::Config(format!(
                    "{} quadratic centers but {} weights",
                    centers.len(),
                    weights.len()
                )));
            }
            if weights.iter().any(|w| !(*w >= 0.0)) {
                return Err(Error::Config("quadratic weights must be nonnegative".into()));
            }
        }
        Ok(())
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.algorithm.name().to_string())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> Option<PathBuf> {
        self.output_dir.as_deref().map(|p| self.resolve(p))
    }

    pub fn step_schedule(&self) -> Result<StepSchedule<f64>> {
        StepSchedule::new(self.steps.scale, self.steps.offset, self.steps.power).map_err(|e| e.context("[steps]"))
    }

    pub fn run_options(&self) -> RunOptions<f64> {
        RunOptions {
            beta: self.beta,
            max_iter: self.max_iter,
            thinning: self.thinning,
            stop: self.stop.map(|s| StopRule {
                consensus_tol: s.consensus_tol,
                feasibility_tol: s.feasibility_tol,
                patience: s.patience,
            }),
            crucial_evaluation: match self.variant.crucial_evaluation {
                CrucialEvaluationName::AfterRandom => CrucialEvaluation::AfterRandom,
                CrucialEvaluationName::BeforeRandom => CrucialEvaluation::BeforeRandom,
            },
            selection: match self.variant.selection {
                SelectionName::Uniform => Selection::Uniform,
                SelectionName::MostViolated => Selection::MostViolated,
            },
            random_projections: self.variant.random_projections,
        }
    }

    fn read_edge_file(&self, p: &Path) -> Result<Digraph> {
        let path = self.resolve(p);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(format!("edge file {}", path.display()), e))?;
        Digraph::parse_edge_list(&text).map_err(|e| e.context(format!("edge file {}", path.display())))
    }

    /// Builds the weight schedule; single graphs use equal in-neighbor weights.
    pub fn schedule(&self) -> Result<GraphSchedule<f64>> {
        let g = &self.graph;
        let sources = [
            g.preset.is_some(),
            g.edges.is_some(),
            g.edge_file.is_some(),
            g.weights.is_some(),
            g.schedule.is_some(),
        ];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(Error::Config(
                "[graph] needs exactly one of preset, edges, edge_file, weights or schedule".into(),
            ));
        }
        if g.nodes.is_some() && g.edges.is_none() {
            return Err(Error::Config("[graph] nodes is only used together with edges".into()));
        }
        let graphs = if let Some(name) = &g.preset {
            presets::by_name(name)?
        } else if let Some(edges) = &g.edges {
            let n = g
                .nodes
                .ok_or_else(|| Error::Config("[graph] edges needs nodes".into()))?;
            vec![Digraph::from_one_based(n, edges.iter().map(|e| (e[0], e[1])))?]
        } else if let Some(p) = &g.edge_file {
            vec![self.read_edge_file(p)?]
        } else if let Some(rows) = &g.weights {
            let n = rows.len();
            let pattern = rows
                .iter()
                .enumerate()
                .flat_map(|(i, r)| r.iter().enumerate().filter(|(_, w)| **w != 0.0).map(move |(j, _)| (i, j)));
            let graph = Digraph::new(n, pattern)?;
            return Ok(GraphSchedule::fixed(WeightMatrix::from_rows(&graph, rows)?));
        } else {
            let files = g.schedule.as_deref().unwrap_or_default();
            files.iter().map(|p| self.read_edge_file(p)).collect::<Result<_>>()?
        };
        GraphSchedule::cyclic(graphs.iter().map(uniform_row_weights).collect())
    }

    pub fn window(&self, schedule: &GraphSchedule<f64>) -> usize {
        self.graph.window.unwrap_or(schedule.period())
    }

    pub fn build_problem(&self) -> Result<BuiltProblem> {
        match &self.problem {
            ProblemConfig::FacilityLocation {
                preset,
                instance,
                generate,
            } => {
                let instance = match (preset, instance, generate) {
                    (Some(name), None, None) => match name.as_str() {
                        "default" => default_instance(),
                        other => return Err(Error::Config(format!("unknown facility preset {other:?}"))),
                    },
                    (None, Some(inst), None) => inst.clone(),
                    (None, None, Some(gen)) => {
                        let mut rng = ChaCha8Rng::seed_from_u64(gen.seed);
                        generate_facility_location(gen.n, &mut rng, &gen.bounds)?
                    }
                    _ => {
                        return Err(Error::Config(
                            "facility-location needs exactly one of preset, instance or generate".into(),
                        ))
                    }
                };
                instance.validate().map_err(|e| e.context("[problem]"))?;
                let problem = instance.to_problem()?;
                Ok(BuiltProblem::Facility { instance, problem })
            }
            ProblemConfig::Quadratic { centers, weights } => {
                let dim = centers.first().map_or(0, Vec::len);
                if dim == 0 || centers.iter().any(|c| c.len() != dim) {
                    return Err(Error::Config("quadratic centers must share one positive dimension".into()));
                }
                let objectives = centers
                    .iter()
                    .zip(weights)
                    .map(|(c, w)| ConvexFn::squared_distance(c, *w))
                    .collect::<Result<_>>()?;
                let problem = Problem::new(SimpleSet::whole(dim), objectives, vec![Vec::new(); centers.len()])?;
                Ok(BuiltProblem::Quadratic(problem))
            }
        }
    }
}
