//! Scenario files: a graph, an agent, a protocol and run settings in one JSON
//! document.
//!
//! ```json
//! {
//!   "id": "three_node_fault",
//!   "time_domain": "continuous",
//!   "graph": {"nodes": 3, "edges": [[1, 3, 1.0], [2, 3, 3.0]]},
//!   "agent": {"A": [[0.0]], "B": [[1.0]], "C": [[1.0]]},
//!   "protocol": {"kind": "non_collaborative", "Gc": [[-1.0]]},
//!   "sim": {"horizon": 50, "step": 0.01, "tail_fraction": 0.2},
//!   "initial": [[4.0], [0.0], [1.0]]
//! }
//! ```
//!
//! `graph` may also be `{"path": "file.json"}` (or `.csv`), resolved relative
//! to the scenario file. `initial` is either explicit per-node vectors (agent
//! state alone, or agent followed by protocol state) or `"random"`, which
//! draws every component uniformly from `[-1, 1]` and needs `sim.seed`.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphFile, RowStochasticConfig, WeightedDigraph};
use crate::linalg::rows;
use crate::protocol::{AgentModel, ProtocolKind, ProtocolSpec, TimeDomain};
use crate::simulate::{Experiment, RngRecord, SimSettings};

/// Recorded in reports so random initial states can be replayed elsewhere.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng::seed_from_u64 (rand_chacha 0.9), uniform [-1, 1]";

pub const DEFAULT_TOLERANCE: f64 = 1e-3;

type Rows = Vec<Vec<f64>>;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    time_domain: TimeDomain,
    graph: GraphSource,
    agent: AgentFile,
    protocol: ProtocolFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    faults: Vec<(usize, usize)>,
    #[serde(default)]
    sim: SimFile,
    initial: InitialFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum GraphSource {
    Inline(GraphFile),
    File { path: PathBuf },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentFile {
    #[serde(rename = "A")]
    a: Option<Rows>,
    #[serde(rename = "B")]
    b: Option<Rows>,
    #[serde(rename = "C")]
    c: Option<Rows>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProtocolFile {
    kind: ProtocolKind,
    #[serde(rename = "Ac", default, skip_serializing_if = "Option::is_none")]
    ac: Option<Rows>,
    #[serde(rename = "Bc", default, skip_serializing_if = "Option::is_none")]
    bc: Option<Rows>,
    #[serde(rename = "Ec", default, skip_serializing_if = "Option::is_none")]
    ec: Option<Rows>,
    #[serde(rename = "Fc", default, skip_serializing_if = "Option::is_none")]
    fc: Option<Rows>,
    #[serde(rename = "Gc", default, skip_serializing_if = "Option::is_none")]
    gc: Option<Rows>,
    #[serde(rename = "Gc1", default, skip_serializing_if = "Option::is_none")]
    gc1: Option<Rows>,
    #[serde(rename = "Gc2", default, skip_serializing_if = "Option::is_none")]
    gc2: Option<Rows>,
    #[serde(rename = "Hc", default, skip_serializing_if = "Option::is_none")]
    hc: Option<Rows>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum InitialFile {
    Keyword(String),
    Explicit(Rows),
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    /// Uniform in `[-1, 1]` for every agent and protocol component.
    Random,
    /// One vector per node: agent state, optionally followed by protocol state.
    Explicit(Vec<DVector<f64>>),
}

/// A validated scenario. Every dimension has been checked against every
/// other one.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub description: Option<String>,
    pub time_domain: TimeDomain,
    pub graph: WeightedDigraph,
    pub agent: AgentModel,
    pub protocol: ProtocolSpec,
    pub q: Option<RowStochasticConfig>,
    /// Edges to remove, 0-based `(from, to)`.
    pub faults: Vec<(usize, usize)>,
    pub sim: SimSettings,
    pub seed: Option<u64>,
    pub initial: InitialState,
    pub tolerance: f64,
}

/// Knobs the command line can override.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
    /// Run without the certification gate.
    pub waive_certification: bool,
    /// Remove the listed faulty edges first.
    pub apply_faults: bool,
}

/// Parses and validates a scenario whose graph is inline.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    parse_scenario_at(text, None)
}

/// Like [`parse_scenario`], resolving graph file paths against `base`.
pub fn parse_scenario_at(text: &str, base: Option<&Path>) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    Scenario::from_file(file, base)
}

/// Reads a scenario from disk; graph paths are relative to its directory.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario_at(&text, path.parent())
}

fn matrix(field: &str, rows: Option<&Rows>) -> Result<Option<DMatrix<f64>>> {
    match rows {
        None => Ok(None),
        Some(r) => {
            if r.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::validation(field, "entries must be finite"));
            }
            rows::from_rows(r)
                .map(Some)
                .ok_or_else(|| Error::validation(field, "rows have unequal lengths"))
        }
    }
}

fn required(field: &str, rows: Option<&Rows>) -> Result<DMatrix<f64>> {
    matrix(field, rows)?.ok_or_else(|| Error::validation(field, "missing"))
}

fn as_validation(e: Error) -> Error {
    match e {
        Error::DimensionMismatch {
            context,
            expected,
            found,
        } => Error::Validation {
            field: context,
            message: format!("expected {expected}, found {found}"),
        },
        other => other,
    }
}

impl Scenario {
    fn from_file(file: ScenarioFile, base: Option<&Path>) -> Result<Scenario> {
        let graph = match file.graph {
            GraphSource::Inline(g) => WeightedDigraph::try_from(g),
            GraphSource::File { path } => {
                let full = base.map_or(path.clone(), |b| b.join(&path));
                let text = std::fs::read_to_string(&full)?;
                if full.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                    WeightedDigraph::from_csv(text.as_bytes(), None)
                } else {
                    WeightedDigraph::from_json(&text)
                }
            }
        }
        .map_err(|e| match e {
            Error::Parse { .. } | Error::Io(_) => e,
            other => Error::validation("graph", other.to_string()),
        })?;
        let n = graph.node_count();
        if n == 0 {
            return Err(Error::validation("graph.nodes", "need at least one node"));
        }

        let agent = AgentModel::new(
            required("agent.A", file.agent.a.as_ref())?,
            required("agent.B", file.agent.b.as_ref())?,
            required("agent.C", file.agent.c.as_ref())?,
            file.time_domain,
        )
        .map_err(as_validation)?;

        let p = &file.protocol;
        let empty = || DMatrix::zeros(0, 0);
        let protocol = match p.kind {
            ProtocolKind::NonCollaborative => {
                for (field, present) in [("protocol.Ec", &p.ec), ("protocol.Gc1", &p.gc1), ("protocol.Gc2", &p.gc2), ("protocol.Hc", &p.hc)] {
                    if present.is_some() {
                        return Err(Error::validation(field, "only allowed for collaborative protocols"));
                    }
                }
                ProtocolSpec::NonCollaborative {
                    ac: matrix("protocol.Ac", p.ac.as_ref())?.unwrap_or_else(empty),
                    bc: matrix("protocol.Bc", p.bc.as_ref())?.unwrap_or_else(empty),
                    fc: matrix("protocol.Fc", p.fc.as_ref())?.unwrap_or_else(empty),
                    gc: required("protocol.Gc", p.gc.as_ref())?,
                }
            }
            ProtocolKind::Collaborative => {
                if p.gc.is_some() {
                    return Err(Error::validation("protocol.Gc", "collaborative protocols use Gc1 and Gc2"));
                }
                ProtocolSpec::Collaborative {
                    ac: required("protocol.Ac", p.ac.as_ref())?,
                    bc: matrix("protocol.Bc", p.bc.as_ref())?.unwrap_or_else(empty),
                    ec: matrix("protocol.Ec", p.ec.as_ref())?.unwrap_or_else(empty),
                    fc: matrix("protocol.Fc", p.fc.as_ref())?.unwrap_or_else(empty),
                    gc1: matrix("protocol.Gc1", p.gc1.as_ref())?.unwrap_or_else(empty),
                    gc2: matrix("protocol.Gc2", p.gc2.as_ref())?.unwrap_or_else(empty),
                    hc: required("protocol.Hc", p.hc.as_ref())?,
                }
            }
        };
        let protocol = protocol.conform(&agent).map_err(as_validation)?;

        let q = match file.q {
            None => None,
            Some(q) => {
                if q.len() != n {
                    return Err(Error::validation("q", format!("expected {n} bounds to match graph.nodes, found {}", q.len())));
                }
                let cfg = RowStochasticConfig { q };
                cfg.check(&graph).map_err(|e| Error::validation("q", e.to_string()))?;
                Some(cfg)
            }
        };

        let mut faults = Vec::with_capacity(file.faults.len());
        for &(from, to) in &file.faults {
            if from == 0 || to == 0 || from > n || to > n {
                return Err(Error::validation("faults", format!("edge {from}->{to} names a node outside 1..={n}")));
            }
            if graph.weight(from - 1, to - 1).is_none() {
                return Err(Error::validation("faults", format!("edge {from}->{to} is not in the graph")));
            }
            faults.push((from - 1, to - 1));
        }

        let defaults = SimSettings::default_for(file.time_domain);
        let sim = SimSettings {
            horizon: file.sim.horizon.unwrap_or(defaults.horizon),
            step: file.sim.step.unwrap_or(defaults.step),
            tail_fraction: file.sim.tail_fraction.unwrap_or(defaults.tail_fraction),
        };
        validate_sim(&sim, file.time_domain)?;

        let nx = agent.states();
        let nc = protocol.state_dim();
        let initial = match file.initial {
            InitialFile::Keyword(k) if k == "random" => {
                if file.sim.seed.is_none() {
                    return Err(Error::validation("sim.seed", "required when initial is \"random\""));
                }
                InitialState::Random
            }
            InitialFile::Keyword(k) => {
                return Err(Error::validation("initial", format!("unknown keyword {k:?}; use \"random\" or explicit vectors")));
            }
            InitialFile::Explicit(rows) => {
                if rows.len() != n {
                    return Err(Error::validation("initial", format!("expected {n} vectors to match graph.nodes, found {}", rows.len())));
                }
                let mut out = Vec::with_capacity(n);
                for (i, r) in rows.iter().enumerate() {
                    if r.len() != nx && r.len() != nx + nc {
                        return Err(Error::validation(
                            "initial",
                            format!("node {} has {} entries; agent.A needs {nx} (or {} with protocol.Ac)", i + 1, r.len(), nx + nc),
                        ));
                    }
                    if r.iter().any(|v| !v.is_finite()) {
                        return Err(Error::validation("initial", format!("node {} has a non-finite entry", i + 1)));
                    }
                    out.push(DVector::from_column_slice(r));
                }
                InitialState::Explicit(out)
            }
        };

        let tolerance = file.tolerance.unwrap_or(DEFAULT_TOLERANCE);
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(Error::validation("tolerance", "must be positive"));
        }

        Ok(Scenario {
            id: file.id,
            description: file.description,
            time_domain: file.time_domain,
            graph,
            agent,
            protocol,
            q,
            faults,
            sim,
            seed: file.sim.seed,
            initial,
            tolerance,
        })
    }

    /// Serializes with the graph inline and every protocol block explicit.
    pub fn to_json(&self) -> String {
        let r = |m: &DMatrix<f64>| Some(rows::to_rows(m));
        let protocol = match &self.protocol {
            ProtocolSpec::NonCollaborative { ac, bc, fc, gc } => ProtocolFile {
                kind: ProtocolKind::NonCollaborative,
                ac: r(ac),
                bc: r(bc),
                ec: None,
                fc: r(fc),
                gc: r(gc),
                gc1: None,
                gc2: None,
                hc: None,
            },
            ProtocolSpec::Collaborative {
                ac,
                bc,
                ec,
                fc,
                gc1,
                gc2,
                hc,
            } => ProtocolFile {
                kind: ProtocolKind::Collaborative,
                ac: r(ac),
                bc: r(bc),
                ec: r(ec),
                fc: r(fc),
                gc: None,
                gc1: r(gc1),
                gc2: r(gc2),
                hc: r(hc),
            },
        };
        let file = ScenarioFile {
            id: self.id.clone(),
            description: self.description.clone(),
            time_domain: self.time_domain,
            graph: GraphSource::Inline(self.graph.clone().into()),
            agent: AgentFile {
                a: r(&self.agent.a),
                b: r(&self.agent.b),
                c: r(&self.agent.c),
            },
            protocol,
            q: self.q.as_ref().map(|c| c.q.clone()),
            faults: self.faults.iter().map(|&(f, t)| (f + 1, t + 1)).collect(),
            sim: SimFile {
                horizon: Some(self.sim.horizon),
                step: Some(self.sim.step),
                tail_fraction: Some(self.sim.tail_fraction),
                seed: self.seed,
            },
            initial: match &self.initial {
                InitialState::Random => InitialFile::Keyword("random".into()),
                InitialState::Explicit(v) => InitialFile::Explicit(v.iter().map(|x| x.iter().copied().collect()).collect()),
            },
            tolerance: Some(self.tolerance),
        };
        serde_json::to_string_pretty(&file).expect("scenario serializes")
    }

    /// The graph with the listed faulty edges removed.
    pub fn faulted_graph(&self) -> Result<WeightedDigraph> {
        self.graph.without_edges(&self.faults)
    }

    /// Stacked agent and protocol initial states, in node order.
    pub fn initial_state(&self, seed: Option<u64>) -> Result<(DVector<f64>, Option<RngRecord>)> {
        let n = self.graph.node_count();
        let nx = self.agent.states();
        let d = nx + self.protocol.state_dim();
        match &self.initial {
            InitialState::Explicit(v) => {
                let mut x = DVector::zeros(n * d);
                for (i, xi) in v.iter().enumerate() {
                    x.rows_mut(i * d, xi.len()).copy_from(xi);
                }
                Ok((x, None))
            }
            InitialState::Random => {
                let seed = seed
                    .or(self.seed)
                    .ok_or_else(|| Error::validation("sim.seed", "required when initial is \"random\""))?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let x = DVector::from_fn(n * d, |_, _| rng.random_range(-1.0..=1.0));
                Ok((
                    x,
                    Some(RngRecord {
                        algorithm: RNG_ALGORITHM.into(),
                        seed,
                    }),
                ))
            }
        }
    }

    pub fn experiment(&self, opts: &RunOptions) -> Result<Experiment> {
        let graph = if opts.apply_faults {
            self.faulted_graph()?
        } else {
            self.graph.clone()
        };
        let (x0, rng) = self.initial_state(opts.seed)?;
        let tolerance = opts.tolerance.unwrap_or(self.tolerance);
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tolerance}")));
        }
        Ok(Experiment {
            id: self.id.clone(),
            graph,
            agent: self.agent.clone(),
            protocol: self.protocol.clone(),
            // bounds that held before removing edges still hold after
            q: self.q.clone(),
            x0,
            settings: self.sim.clone(),
            tolerance,
            certify: !opts.waive_certification,
            rng,
        })
    }
}

fn validate_sim(sim: &SimSettings, domain: TimeDomain) -> Result<()> {
    if !(sim.tail_fraction > 0.0 && sim.tail_fraction <= 1.0) {
        return Err(Error::validation("sim.tail_fraction", "must lie in (0, 1]"));
    }
    match domain {
        TimeDomain::Continuous => {
            if !(sim.step > 0.0 && sim.step.is_finite()) {
                return Err(Error::validation("sim.step", "must be positive"));
            }
            if !(sim.horizon >= sim.step && sim.horizon.is_finite()) {
                return Err(Error::validation("sim.horizon", "must be at least sim.step"));
            }
        }
        TimeDomain::Discrete => {
            if !(sim.horizon >= 1.0 && sim.horizon.fract() == 0.0 && sim.horizon.is_finite()) {
                return Err(Error::validation("sim.horizon", "must be a positive whole number of steps"));
            }
        }
    }
    Ok(())
}
