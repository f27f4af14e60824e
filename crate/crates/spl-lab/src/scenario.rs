//! Scenario files: the JSON schema, validation with cross-reference
//! resolution, and the builtin fixture catalog.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use spl_core::chemical::{ChemSimParams, ReactionNetwork, SimulationMethod};
use spl_core::claim3::LinkedLoopConfig;
use spl_core::continuity::TokenSeq;
use spl_core::dynamics::{DynParams, Stimulus};
use spl_core::fixedset::{FixedSetId, FixedSetRegistry, StimulusFamily};
use spl_core::fixtures;
use spl_core::membrane::MembraneConfig;
use spl_core::network::{build_network, Network, NetworkSpec};
use spl_core::physical::{TrackBlueprint, TrackSimParams};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown scenario kind {0:?}")]
    UnknownKind(String),
    #[error("dangling reference: {reference} ({detail})")]
    DanglingReference { reference: String, detail: String },
    #[error("unknown fixture {0:?}; `list-fixtures` shows the catalog")]
    UnknownFixture(String),
    #[error("scenario {id}: missing required block {block:?}")]
    MissingBlock { id: String, block: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Output request carried by the scenario (CLI flags override it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub path: String,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

/// A numeric expectation evaluated against the report summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gte: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lte: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expectations: Vec<Expectation>,
    #[serde(flatten)]
    pub payload: Payload,
}

fn default_replicates() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Payload {
    Dynamics {
        network: String,
        stimuli: Vec<Stimulus>,
        #[serde(default)]
        params: DynParams,
        horizon: usize,
        #[serde(default = "default_max_loop_len")]
        max_loop_len: usize,
    },
    Fixedset {
        network: String,
        families: Vec<StimulusFamily>,
        #[serde(default)]
        params: DynParams,
        #[serde(default = "default_quorum")]
        quorum: f64,
        #[serde(default = "default_max_loop_len")]
        max_loop_len: usize,
        /// When set, additionally promote each family to a meta set over
        /// these registered parents.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        promote: Option<PromoteBlock>,
    },
    Growth {
        network: String,
        registry: String,
        ops: Vec<GrowthOp>,
    },
    Membrane {
        network: String,
        registry: String,
        drive: Vec<Stimulus>,
        #[serde(default)]
        params: DynParams,
        /// Membrane settings; the routing table inside is mandatory.
        membrane: MembraneConfig,
    },
    Continuity {
        corpus: String,
        #[serde(default = "default_max_order")]
        max_order: usize,
        #[serde(default = "default_orders")]
        orders: Vec<usize>,
        #[serde(default = "default_coverage")]
        required_coverage: f64,
        sequences: Vec<SequenceCheck>,
    },
    Physical {
        blueprint: String,
        sim: TrackSimParams,
    },
    Chemical {
        reactions: String,
        sim: ChemSimParams,
    },
    Claim3 {
        #[serde(default)]
        config: LinkedLoopConfig,
    },
    Persistence {
        loop_net: String,
        chain_net: String,
        sim: ChemSimParams,
    },
    Split {
        reactions: String,
        sim: ChemSimParams,
        #[serde(default)]
        split_seed: u64,
    },
}

fn default_max_loop_len() -> usize {
    spl_core::network::DEFAULT_MAX_LOOP_LEN
}
fn default_quorum() -> f64 {
    1.0
}
fn default_max_order() -> usize {
    3
}
fn default_orders() -> Vec<usize> {
    vec![1, 2, 3]
}
fn default_coverage() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromoteBlock {
    pub registry: String,
    pub parents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum GrowthOp {
    Extend {
        fixed_set: String,
        #[serde(default)]
        params: spl_core::growth::GrowthParams,
    },
    Associate {
        a: String,
        b: String,
        #[serde(default)]
        params: spl_core::growth::GrowthParams,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceCheck {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_continuous: Option<bool>,
}

impl Payload {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Payload::Dynamics { .. } => "dynamics",
            Payload::Fixedset { .. } => "fixedset",
            Payload::Growth { .. } => "growth",
            Payload::Membrane { .. } => "membrane",
            Payload::Continuity { .. } => "continuity",
            Payload::Physical { .. } => "physical",
            Payload::Chemical { .. } => "chemical",
            Payload::Claim3 { .. } => "claim3",
            Payload::Persistence { .. } => "persistence",
            Payload::Split { .. } => "split",
        }
    }
}

/// The builtin asset catalog reachable through `fixture:<name>` references.
pub fn builtin_fixtures() -> Vec<(&'static str, &'static str)> {
    vec![
        ("fig2", "network: five inputs feeding two shallow loops"),
        ("fig3", "network: fig2 plus table/chair branch loops"),
        ("fig4", "network: fig3 plus lateral table-chair association"),
        ("fig4-grown", "network: fig4 after three growth rounds"),
        ("triangle", "network: minimal three-node cycle"),
        ("fig2-registry", "registry: the shallow base set"),
        ("fig3-registry", "registry: base plus table/chair meta sets"),
        ("fig4-grown-registry", "registry: grown fixture with branch candidates"),
        ("a1b", "blueprint: single valley plus hill"),
        ("a1c", "blueprint: a1b with three extra valleys"),
        ("a1d", "blueprint: a1c with valleys turned into storage loops"),
        ("three-level", "blueprint: the three-level loop that maps to M1/M2/M3"),
        ("two-level", "blueprint: minimal two-level loop"),
        ("a4-loop", "reactions: mapped three-species loop with enzymes"),
        ("a4-chain", "reactions: the loop with its closing uphill reaction removed"),
        ("generators-3x4", "reactions: three disjoint four-species loops"),
        ("pizza-corpus", "corpus: the shipped sentence corpus"),
    ]
}

pub struct LoadedScenario {
    pub scenario: Scenario,
    /// Directory scenario-relative paths resolve against.
    pub base_dir: PathBuf,
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let scenario: Scenario = match serde_json::from_str(&text) {
        Ok(s) => s,
        Err(err) => {
            let message = err.to_string();
            if let Some(rest) = message.strip_prefix("unknown variant `") {
                if message.contains("expected one of") {
                    let kind = rest.split('`').next().unwrap_or("?").to_string();
                    return Err(ScenarioError::UnknownKind(kind));
                }
            }
            return Err(ScenarioError::Parse {
                line: err.line(),
                column: err.column(),
                message,
            });
        }
    };
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let loaded = LoadedScenario { scenario, base_dir };
    validate(&loaded)?;
    Ok(loaded)
}

/// Check kind-specific requirements and resolve every asset reference.
pub fn validate(loaded: &LoadedScenario) -> Result<(), ScenarioError> {
    let s = &loaded.scenario;
    match &s.payload {
        Payload::Dynamics { network, .. } => {
            resolve_network(network, &loaded.base_dir)?;
        }
        Payload::Fixedset {
            network,
            families,
            quorum,
            promote,
            ..
        } => {
            resolve_network(network, &loaded.base_dir)?;
            if families.is_empty() {
                return Err(ScenarioError::MissingBlock {
                    id: s.id.clone(),
                    block: "families".into(),
                });
            }
            if !(*quorum > 0.0 && *quorum <= 1.0) {
                return Err(ScenarioError::Invalid(format!(
                    "quorum {quorum} outside (0, 1]"
                )));
            }
            if let Some(p) = promote {
                resolve_registry(&p.registry, &loaded.base_dir)?;
            }
        }
        Payload::Growth { network, registry, ops } => {
            resolve_network(network, &loaded.base_dir)?;
            resolve_registry(registry, &loaded.base_dir)?;
            if ops.is_empty() {
                return Err(ScenarioError::MissingBlock {
                    id: s.id.clone(),
                    block: "ops".into(),
                });
            }
        }
        Payload::Membrane {
            network,
            registry,
            membrane,
            ..
        } => {
            resolve_network(network, &loaded.base_dir)?;
            resolve_registry(registry, &loaded.base_dir)?;
            if membrane.routing.is_none() {
                return Err(ScenarioError::MissingBlock {
                    id: s.id.clone(),
                    block: "membrane.routing".into(),
                });
            }
        }
        Payload::Continuity { corpus, orders, .. } => {
            resolve_corpus(corpus, &loaded.base_dir)?;
            if orders.is_empty() {
                return Err(ScenarioError::MissingBlock {
                    id: s.id.clone(),
                    block: "orders".into(),
                });
            }
        }
        Payload::Physical { blueprint, .. } => {
            resolve_blueprint(blueprint, &loaded.base_dir)?;
        }
        Payload::Chemical { reactions, .. } => {
            resolve_reactions(reactions, &loaded.base_dir)?;
        }
        Payload::Claim3 { .. } => {}
        Payload::Persistence { loop_net, chain_net, .. } => {
            resolve_reactions(loop_net, &loaded.base_dir)?;
            resolve_reactions(chain_net, &loaded.base_dir)?;
        }
        Payload::Split { reactions, .. } => {
            resolve_reactions(reactions, &loaded.base_dir)?;
        }
    }
    Ok(())
}

fn fixture_name(reference: &str) -> Option<&str> {
    reference.strip_prefix("fixture:")
}

fn read_asset(reference: &str, base: &Path) -> Result<String, ScenarioError> {
    let path = base.join(reference);
    fs::read_to_string(&path).map_err(|e| ScenarioError::DanglingReference {
        reference: reference.to_string(),
        detail: format!("{}: {e}", path.display()),
    })
}

pub fn resolve_network(reference: &str, base: &Path) -> Result<Network, ScenarioError> {
    if let Some(name) = fixture_name(reference) {
        return match name {
            "fig2" => Ok(fixtures::fig2()),
            "fig3" => Ok(fixtures::fig3()),
            "fig4" => Ok(fixtures::fig4()),
            "fig4-grown" => Ok(fixtures::fig4_grown().0),
            "triangle" => Ok(fixtures::triangle()),
            _ => Err(ScenarioError::UnknownFixture(name.to_string())),
        };
    }
    let text = read_asset(reference, base)?;
    let spec: NetworkSpec =
        serde_json::from_str(&text).map_err(|e| ScenarioError::DanglingReference {
            reference: reference.to_string(),
            detail: format!("network schema: {e}"),
        })?;
    build_network(&spec).map_err(|e| ScenarioError::DanglingReference {
        reference: reference.to_string(),
        detail: e.to_string(),
    })
}

pub fn resolve_registry(reference: &str, base: &Path) -> Result<FixedSetRegistry, ScenarioError> {
    if let Some(name) = fixture_name(reference) {
        return match name {
            "fig2-registry" => Ok(fixtures::fig2_registry()),
            "fig3-registry" | "fig4-registry" => Ok(fixtures::fig3_meta_registry()),
            "fig4-grown-registry" => Ok(fixtures::fig4_grown().1),
            _ => Err(ScenarioError::UnknownFixture(name.to_string())),
        };
    }
    let text = read_asset(reference, base)?;
    FixedSetRegistry::from_json(&text).map_err(|e| ScenarioError::DanglingReference {
        reference: reference.to_string(),
        detail: format!("registry schema: {e}"),
    })
}

pub fn resolve_blueprint(reference: &str, base: &Path) -> Result<TrackBlueprint, ScenarioError> {
    if let Some(name) = fixture_name(reference) {
        return match name {
            "a1b" => Ok(fixtures::a1b_blueprint()),
            "a1c" => Ok(fixtures::a1c_blueprint()),
            "a1d" => Ok(fixtures::a1d_blueprint()),
            "three-level" => Ok(fixtures::three_level_blueprint()),
            "two-level" => Ok(fixtures::two_level_blueprint()),
            _ => Err(ScenarioError::UnknownFixture(name.to_string())),
        };
    }
    let text = read_asset(reference, base)?;
    let bp: TrackBlueprint =
        serde_json::from_str(&text).map_err(|e| ScenarioError::DanglingReference {
            reference: reference.to_string(),
            detail: format!("blueprint schema: {e}"),
        })?;
    bp.validate().map_err(|e| ScenarioError::DanglingReference {
        reference: reference.to_string(),
        detail: e.to_string(),
    })?;
    Ok(bp)
}

pub fn resolve_reactions(reference: &str, base: &Path) -> Result<ReactionNetwork, ScenarioError> {
    if let Some(name) = fixture_name(reference) {
        return match name {
            "a4-loop" => Ok(fixtures::a4_loop_network()),
            "a4-chain" => Ok(fixtures::a4_chain_network()),
            "generators-3x4" => Ok(fixtures::generators_3x4_network()),
            _ => Err(ScenarioError::UnknownFixture(name.to_string())),
        };
    }
    let text = read_asset(reference, base)?;
    let rnet: ReactionNetwork =
        serde_json::from_str(&text).map_err(|e| ScenarioError::DanglingReference {
            reference: reference.to_string(),
            detail: format!("reaction network schema: {e}"),
        })?;
    rnet.validate().map_err(|e| ScenarioError::DanglingReference {
        reference: reference.to_string(),
        detail: e.to_string(),
    })?;
    Ok(rnet)
}

pub fn resolve_corpus(reference: &str, base: &Path) -> Result<Vec<TokenSeq>, ScenarioError> {
    let text = if let Some(name) = fixture_name(reference) {
        match name {
            "pizza-corpus" => fixtures::PIZZA_CORPUS.to_string(),
            _ => return Err(ScenarioError::UnknownFixture(name.to_string())),
        }
    } else {
        read_asset(reference, base)?
    };
    let corpus: Vec<TokenSeq> = text
        .lines()
        .filter(|line| !line.trim().is_empty())
        .map(TokenSeq::parse)
        .collect();
    if corpus.is_empty() {
        return Err(ScenarioError::DanglingReference {
            reference: reference.to_string(),
            detail: "corpus is empty".into(),
        });
    }
    Ok(corpus)
}

/// Convenience used by several runners.
pub fn parse_fixed_set_ids(ids: &[String]) -> BTreeSet<FixedSetId> {
    ids.iter().map(|s| FixedSetId::new(s)).collect()
}

/// A scenario's chemical sim with the replicate-derived seed.
pub fn chem_params_with_seed(base: &ChemSimParams, seed: u64) -> ChemSimParams {
    ChemSimParams {
        seed,
        horizon: base.horizon,
        method: SimulationMethod::Stochastic,
    }
}
