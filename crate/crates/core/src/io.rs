//! JSON model files: the batch interchange format shared with the CLI.
//!
//! A model file carries a tree section, a model section, and optional cone,
//! claim, utility, and numeric-config sections. Node-keyed maps use
//! stringified node ids; unbounded box edges are `null`.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cone::{ConeError, RandomCone};
use crate::model::{
    additive_costs, consumption_model, frictionless, limit_order_book, two_state_on, BoxUnion,
    ClosedBox, ConsumptionUtility, CostFunction, MarketModel, ModelError, VectorModel,
};
use crate::tree::{NodeSpec, ScenarioTree, TreeError};
use crate::utility::UtilityFunction;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("json parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("io error: {0}")]
    File(#[from] std::io::Error),
    #[error("{0}")]
    Semantic(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cone(#[from] ConeError),
}

/// Numeric knobs with CLI-overridable defaults; seeds make runs reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NumericConfig {
    /// Grid points per axis.
    pub grid: usize,
    /// Strategy box radius.
    #[serde(rename = "box")]
    pub box_radius: f64,
    pub tol: f64,
    pub seed: u64,
    /// Strategy-enumeration cap.
    pub budget: u64,
    /// Radius-ladder depth for reconstruction.
    pub radius_depth: usize,
}

impl Default for NumericConfig {
    fn default() -> Self {
        NumericConfig {
            grid: 101,
            box_radius: 5.0,
            tol: 1e-6,
            seed: 0,
            budget: 2_000_000,
            radius_depth: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeSection {
    pub dim: usize,
    pub nodes: Vec<NodeSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxSection {
    /// `null` entries mean unbounded below.
    pub lo: Vec<Option<f64>>,
    /// `null` entries mean unbounded above.
    pub hi: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSection {
    Zero,
    /// One rate for every node at this time step.
    Proportional { lambda: f64 },
    /// Per-node rates, keyed by node id.
    ProportionalByNode { lambda: BTreeMap<String, f64> },
    Fixed { fee: f64 },
    /// The same allowed position set at every node of this time step.
    Constraint { boxes: Vec<BoxSection> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSection {
    Frictionless {
        prices: BTreeMap<String, Vec<f64>>,
    },
    Additive {
        prices: BTreeMap<String, Vec<f64>>,
        costs: Vec<CostSection>,
    },
    Lob {
        kappa: f64,
        depth: BTreeMap<String, f64>,
        prices: BTreeMap<String, f64>,
    },
    Consumption {
        prices: BTreeMap<String, Vec<f64>>,
        utility: String,
        initial_wealth: f64,
    },
    TwoState,
    Kabanov {
        assets: usize,
        /// Row-major `assets x assets` fee matrix, zero diagonal.
        fees: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeSection {
    /// Codomain dimension.
    pub n: usize,
    /// Shared generators, used at every leaf unless overridden.
    #[serde(default)]
    pub generators: Option<Vec<Vec<f64>>>,
    /// Per-leaf overrides keyed by leaf node id.
    #[serde(default)]
    pub per_leaf: Option<BTreeMap<String, Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtilitySection {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub param: Option<f64>,
}

/// The on-disk model file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub tree: TreeSection,
    pub model: ModelSection,
    #[serde(default)]
    pub cone: Option<ConeSection>,
    /// Per-leaf claim keyed by leaf node id.
    #[serde(default)]
    pub claim: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub utility: Option<UtilitySection>,
    #[serde(default)]
    pub config: NumericConfig,
}

/// Either side of the scalar/vector divide.
#[derive(Clone)]
pub enum ModelInstance {
    Scalar(MarketModel),
    Vector(VectorModel),
}

/// A fully resolved model file.
pub struct Instance {
    pub tree: Arc<ScenarioTree>,
    pub model: ModelInstance,
    pub cone: Option<RandomCone>,
    /// Claim in leaf order, when present.
    pub claim: Option<Vec<f64>>,
    pub utility: Option<UtilityFunction>,
    pub config: NumericConfig,
}

pub fn load_model_file(path: &std::path::Path) -> Result<ModelFile, IoError> {
    let text = std::fs::read_to_string(path)?;
    parse_model_file(&text)
}

pub fn parse_model_file(text: &str) -> Result<ModelFile, IoError> {
    Ok(serde_json::from_str(text)?)
}

fn node_map_to_vec<T: Clone>(
    map: &BTreeMap<String, T>,
    tree: &ScenarioTree,
    what: &str,
) -> Result<Vec<T>, IoError> {
    let mut out = Vec::with_capacity(tree.num_nodes());
    for id in 0..tree.num_nodes() {
        let key = id.to_string();
        let v = map.get(&key).ok_or_else(|| {
            IoError::Semantic(format!("{what}: missing entry for node {id}"))
        })?;
        out.push(v.clone());
    }
    Ok(out)
}

fn cost_section_to_function(
    section: &CostSection,
    tree: &ScenarioTree,
) -> Result<CostFunction, IoError> {
    Ok(match section {
        CostSection::Zero => CostFunction::Zero,
        CostSection::Proportional { lambda } => CostFunction::proportional_const(tree, *lambda),
        CostSection::ProportionalByNode { lambda } => {
            let mut per_node = vec![0.0; tree.num_nodes()];
            for (k, v) in lambda {
                let id: usize = k
                    .parse()
                    .map_err(|_| IoError::Semantic(format!("bad node id '{k}' in lambda map")))?;
                if id >= tree.num_nodes() {
                    return Err(IoError::Semantic(format!("lambda map references node {id}")));
                }
                per_node[id] = *v;
            }
            CostFunction::Proportional(per_node)
        }
        CostSection::Fixed { fee } => CostFunction::Fixed(*fee),
        CostSection::Constraint { boxes } => {
            let union = BoxUnion {
                boxes: boxes
                    .iter()
                    .map(|b| {
                        if b.lo.len() != tree.dim() || b.hi.len() != tree.dim() {
                            return Err(IoError::Semantic(
                                "constraint box dimension mismatch".into(),
                            ));
                        }
                        Ok(ClosedBox::new(
                            b.lo.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect(),
                            b.hi.iter().map(|v| v.unwrap_or(f64::INFINITY)).collect(),
                        ))
                    })
                    .collect::<Result<_, IoError>>()?,
            };
            CostFunction::constraint_const(tree, union)
        }
    })
}

impl ModelFile {
    /// Resolves the file into live objects, validating every reference.
    pub fn instantiate(&self) -> Result<Instance, IoError> {
        let tree = ScenarioTree::build(self.tree.dim, &self.tree.nodes)?;
        let model = match &self.model {
            ModelSection::Frictionless { prices } => {
                let p = node_map_to_vec(prices, &tree, "prices")?;
                ModelInstance::Scalar(frictionless(&tree, p)?)
            }
            ModelSection::Additive { prices, costs } => {
                let p = node_map_to_vec(prices, &tree, "prices")?;
                if costs.len() != tree.horizon() {
                    return Err(IoError::Semantic(format!(
                        "{} cost sections for horizon {}",
                        costs.len(),
                        tree.horizon()
                    )));
                }
                let cost_fns = costs
                    .iter()
                    .map(|c| cost_section_to_function(c, &tree))
                    .collect::<Result<Vec<_>, _>>()?;
                ModelInstance::Scalar(additive_costs(&tree, p, cost_fns)?)
            }
            ModelSection::Lob { kappa, depth, prices } => {
                let d = node_map_to_vec(depth, &tree, "depth")?;
                let p = node_map_to_vec(prices, &tree, "prices")?;
                ModelInstance::Scalar(limit_order_book(&tree, *kappa, d, p)?)
            }
            ModelSection::Consumption { prices, utility, initial_wealth } => {
                let p = node_map_to_vec(prices, &tree, "prices")?;
                let u = match utility.as_str() {
                    "sum" => ConsumptionUtility::Sum,
                    "sqrt" => ConsumptionUtility::Sqrt,
                    other => {
                        return Err(IoError::Semantic(format!(
                            "unknown consumption utility '{other}' (expected sum or sqrt)"
                        )))
                    }
                };
                ModelInstance::Scalar(consumption_model(&tree, p, u, *initial_wealth)?)
            }
            ModelSection::TwoState => ModelInstance::Scalar(two_state_on(&tree)?),
            ModelSection::Kabanov { assets, fees } => {
                ModelInstance::Vector(VectorModel::exchange_const(&tree, *assets, fees.clone())?)
            }
        };

        let cone = match &self.cone {
            None => None,
            Some(section) => {
                let mut per_leaf: Vec<Vec<Vec<f64>>> = match &section.generators {
                    Some(g) => vec![g.clone(); tree.leaves().len()],
                    None => vec![Vec::new(); tree.leaves().len()],
                };
                if let Some(overrides) = &section.per_leaf {
                    for (k, gens) in overrides {
                        let id: usize = k.parse().map_err(|_| {
                            IoError::Semantic(format!("bad leaf id '{k}' in cone section"))
                        })?;
                        let li = tree.leaf_index(id).ok_or_else(|| {
                            IoError::Semantic(format!("cone section references non-leaf {id}"))
                        })?;
                        per_leaf[li] = gens.clone();
                    }
                }
                Some(RandomCone::build(&tree, per_leaf, section.n)?)
            }
        };

        let claim = match &self.claim {
            None => None,
            Some(map) => {
                let mut values = vec![0.0; tree.leaves().len()];
                let mut seen = vec![false; tree.leaves().len()];
                for (k, v) in map {
                    let id: usize = k.parse().map_err(|_| {
                        IoError::Semantic(format!("bad leaf id '{k}' in claim section"))
                    })?;
                    let li = tree.leaf_index(id).ok_or_else(|| {
                        IoError::Semantic(format!("claim references non-leaf node {id}"))
                    })?;
                    if !v.is_finite() {
                        return Err(IoError::Semantic(format!("claim at leaf {id} not finite")));
                    }
                    values[li] = *v;
                    seen[li] = true;
                }
                if let Some(missing) = seen.iter().position(|s| !s) {
                    return Err(IoError::Semantic(format!(
                        "claim missing for leaf node {}",
                        tree.leaves()[missing]
                    )));
                }
                Some(values)
            }
        };

        let utility = match &self.utility {
            None => None,
            Some(section) => Some(parse_utility(&section.kind, section.param)?),
        };

        Ok(Instance { tree, model, cone, claim, utility, config: self.config.clone() })
    }
}

/// Parses a utility kind with optional parameter.
pub fn parse_utility(kind: &str, param: Option<f64>) -> Result<UtilityFunction, IoError> {
    match kind {
        "linear" => Ok(UtilityFunction::Linear),
        "exp" => Ok(UtilityFunction::Exp { a: param.unwrap_or(1.0) }),
        "log" => Ok(UtilityFunction::Log),
        "digital" => Ok(UtilityFunction::Digital { threshold: param.unwrap_or(1.0) }),
        other => Err(IoError::Semantic(format!(
            "unknown utility '{other}' (expected linear, exp, log, or digital)"
        ))),
    }
}

/// Parses the CLI shorthand `linear | exp:a | log | digital:k`.
pub fn parse_utility_spec(spec: &str) -> Result<UtilityFunction, IoError> {
    match spec.split_once(':') {
        None => parse_utility(spec, None),
        Some((kind, param)) => {
            let p: f64 = param
                .parse()
                .map_err(|_| IoError::Semantic(format!("bad utility parameter '{param}'")))?;
            parse_utility(kind, Some(p))
        }
    }
}
