//! Axiomatic market models on finite scenario trees.
//!
//! The library realizes possibly non-concave discrete-time financial market
//! models on finite filtered probability spaces: it audits the defining
//! axioms (normalization and locality), reconstructs upper-semicontinuous
//! integrand representations from black-box functionals, computes recession
//! models, decides no-arbitrage, prices claims by superhedging, maximizes
//! expected utility, and extends the toolkit to vector-valued models ordered
//! by random polyhedral cones.
//!
//! Entry points by task:
//! - build a tree: [`tree::ScenarioTree`]
//! - build a model: [`model::frictionless`], [`model::additive_costs`],
//!   [`model::limit_order_book`], [`model::consumption_model`],
//!   [`model::two_state_model`], [`model::VectorModel::exchange`]
//! - audit axioms and reconstruct: [`represent`]
//! - recession behavior: [`recession`]
//! - no-arbitrage: [`arbitrage`]
//! - superhedging prices: [`superhedge`]
//! - expected utility: [`utility`]
//! - polyhedral cone orders and vector models: [`cone`]
//! - JSON model files shared with the CLI: [`io`]

pub mod arbitrage;
pub mod cone;
pub mod grid;
pub mod io;
pub mod lp;
pub mod model;
pub mod recession;
pub mod represent;
pub mod superhedge;
pub mod tree;
pub mod utility;
