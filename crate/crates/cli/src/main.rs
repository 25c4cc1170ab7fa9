//! Batch front door for scenario-tree market models.
//!
//! Every command ingests a JSON model file, prints a human summary (or a
//! JSON verdict with `--json`), and writes CSV artifacts into the output
//! directory. Exit codes: 0 on success, 2 when the verdict is negative
//! (arbitrage found, axiom failed), 1 on errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use treemarket::arbitrage::{
    na_check_homogeneous, na_check_linear, NaVerdict, SphereSearchConfig,
};
use treemarket::cone::{
    affine_ball_radius, interior_ball_radius, ri_selection, vector_na_check, VectorNaConfig,
};
use treemarket::io::{load_model_file, parse_utility_spec, Instance, ModelInstance};
use treemarket::model::MarketModel;
use treemarket::recession::{recession_analytic, recession_numeric, RecessionSchedule};
use treemarket::represent::{
    check_axioms, reconstruct_integrand, ReconstructConfig, ReconstructionGrid,
};
use treemarket::superhedge::{superhedge_price, SuperhedgeConfig};
use treemarket::tree::AdaptedStrategy;
use treemarket::utility::{maximize_utility, UtilityConfig};

#[derive(Parser)]
#[command(name = "treemarket", version, about = "Axiomatic market models on scenario trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON model file.
    #[arg(long)]
    model: PathBuf,
    /// Output directory for CSV artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the file's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the file's tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Override grid points per axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Override the strategy box radius.
    #[arg(long = "box")]
    box_radius: Option<f64>,
    /// Override the enumeration budget.
    #[arg(long)]
    budget: Option<u64>,
    /// Override the radius-ladder depth.
    #[arg(long)]
    depth: Option<usize>,
    /// Print a machine-readable JSON verdict instead of the summary.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the model file and report its shape.
    Validate(CommonArgs),
    /// Audit normalization (A1) and locality (A2).
    CheckAxioms(CommonArgs),
    /// Reconstruct the integrand on a lattice and compare against the model.
    Reconstruct(CommonArgs),
    /// Tabulate numeric vs analytic recession values on a direction lattice.
    Recession(CommonArgs),
    /// Decide no-arbitrage; exits 2 when arbitrage is found.
    CheckNa {
        #[command(flatten)]
        common: CommonArgs,
        /// Run the vector (cone-ordered) check; requires a cone section.
        #[arg(long)]
        vector: bool,
    },
    /// Price a claim by superhedging.
    Superhedge {
        #[command(flatten)]
        common: CommonArgs,
        /// Claim CSV `leaf_id,value`, overriding the file's claim section.
        #[arg(long)]
        claim: Option<PathBuf>,
    },
    /// Maximize expected utility of terminal wealth.
    MaximizeUtility {
        #[command(flatten)]
        common: CommonArgs,
        /// Utility: linear | exp:a | log | digital:k (overrides the file).
        #[arg(long)]
        utility: Option<String>,
    },
    /// Cone diagnostics: polar generators, ri selection, ball radii.
    ConeCheck(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Validate(common) => validate(&common),
        Command::CheckAxioms(common) => axioms(&common),
        Command::Reconstruct(common) => reconstruct(&common),
        Command::Recession(common) => recession(&common),
        Command::CheckNa { common, vector } => check_na(&common, vector),
        Command::Superhedge { common, claim } => superhedge(&common, claim.as_deref()),
        Command::MaximizeUtility { common, utility } => {
            maximize(&common, utility.as_deref())
        }
        Command::ConeCheck(common) => cone_check(&common),
    }
}

fn load(common: &CommonArgs) -> Result<Instance> {
    let file = load_model_file(&common.model)
        .with_context(|| format!("reading {}", common.model.display()))?;
    let mut instance = file.instantiate().context("instantiating model file")?;
    let cfg = &mut instance.config;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = common.tol {
        cfg.tol = tol;
    }
    if let Some(grid) = common.grid {
        cfg.grid = grid;
    }
    if let Some(b) = common.box_radius {
        cfg.box_radius = b;
    }
    if let Some(b) = common.budget {
        cfg.budget = b;
    }
    if let Some(d) = common.depth {
        cfg.radius_depth = d;
    }
    Ok(instance)
}

fn scalar_model(instance: &Instance) -> Result<&MarketModel> {
    match &instance.model {
        ModelInstance::Scalar(m) => Ok(m),
        ModelInstance::Vector(_) => {
            bail!("this command needs a scalar model; the file holds a vector-valued one")
        }
    }
}

fn write_artifact(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, content)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn witness_csv(tree: &treemarket::tree::ScenarioTree, strategy: &AdaptedStrategy) -> String {
    let mut out = String::from("node_id");
    for i in 0..tree.dim() {
        let _ = write!(out, ",theta_{i}");
    }
    out.push('\n');
    for node in tree.decision_nodes() {
        let _ = write!(out, "{node}");
        for v in strategy.get(node) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

fn validate(common: &CommonArgs) -> Result<u8> {
    let instance = load(common)?;
    let tree = &instance.tree;
    let kind = match &instance.model {
        ModelInstance::Scalar(m) => m.describe().to_string(),
        ModelInstance::Vector(v) => format!("currency exchange (n = {})", v.n()),
    };
    if common.json {
        let verdict = serde_json::json!({
            "status": "ok",
            "nodes": tree.num_nodes(),
            "leaves": tree.leaves().len(),
            "horizon": tree.horizon(),
            "dim": tree.dim(),
            "model": kind,
            "has_cone": instance.cone.is_some(),
            "has_claim": instance.claim.is_some(),
        });
        println!("{verdict}");
    } else {
        println!(
            "valid model file: {} nodes, {} leaves, horizon {}, dim {}, model {}",
            tree.num_nodes(),
            tree.leaves().len(),
            tree.horizon(),
            tree.dim(),
            kind
        );
    }
    Ok(0)
}

fn axioms(common: &CommonArgs) -> Result<u8> {
    let instance = load(common)?;
    let model = scalar_model(&instance)?;
    let report = check_axioms(model, 200, instance.config.seed);

    let mut csv = String::from("axiom,time,atom_node,leaf_id,lhs,rhs\n");
    for (li, v) in &report.a1_violations {
        let _ = writeln!(csv, "A1,,,{},{},0", instance.tree.leaves()[*li], v);
    }
    for v in &report.a2_violations {
        let _ = writeln!(
            csv,
            "A2,{},{},{},{},{}",
            v.time,
            v.atom_node,
            instance.tree.leaves()[v.leaf_idx],
            v.lhs,
            v.rhs
        );
    }
    write_artifact(&common.out, "axiom_violations.csv", &csv)?;

    if common.json {
        let verdict = serde_json::json!({
            "status": if report.ok() { "pass" } else { "fail" },
            "a1": report.a1_ok,
            "a2": report.a2_ok,
            "samples_per_atom": report.samples_per_atom,
            "violations": report.a1_violations.len() + report.a2_violations.len(),
        });
        println!("{verdict}");
    } else {
        println!(
            "A1 {}  A2 {} ({} samples per atom)",
            if report.a1_ok { "pass" } else { "FAIL" },
            if report.a2_ok { "pass" } else { "FAIL" },
            report.samples_per_atom
        );
    }
    Ok(if report.ok() { 0 } else { 2 })
}

fn reconstruct(common: &CommonArgs) -> Result<u8> {
    let instance = load(common)?;
    let model = scalar_model(&instance)?;
    let cfg = &instance.config;
    let dims = instance.tree.dim() * instance.tree.horizon();
    let grid =
        ReconstructionGrid::symmetric(dims, cfg.box_radius, cfg.grid, cfg.radius_depth);
    let rc = ReconstructConfig { stabilization_tol: cfg.tol.max(1e-9), ..Default::default() };
    let table = reconstruct_integrand(model, &grid, &rc)
        .map_err(|e| anyhow!("reconstruction failed: {e}"))?;

    let mut csv = String::from("leaf_id");
    for i in 0..dims {
        let _ = write!(csv, ",x{i}");
    }
    csv.push_str(",V_model,V_reconstructed,gap\n");
    for li in 0..instance.tree.leaves().len() {
        for (xi, x) in table.lattice.iter().enumerate() {
            let _ = write!(csv, "{}", instance.tree.leaves()[li]);
            for c in x {
                let _ = write!(csv, ",{c}");
            }
            let direct = table.direct[li][xi];
            let rec = table.values[li][xi];
            let gap = if direct == rec { 0.0 } else { rec - direct };
            let _ = writeln!(csv, ",{direct},{rec},{gap}");
        }
    }
    write_artifact(&common.out, "reconstruct.csv", &csv)?;

    let max_gap = table.max_gap();
    if common.json {
        println!(
            "{}",
            serde_json::json!({"status": "ok", "lattice_points": table.lattice.len(), "max_gap": max_gap})
        );
    } else {
        println!(
            "reconstructed on {} lattice points, ladder depth {}: max |V_rec - V| = {:.3e}",
            table.lattice.len(),
            cfg.radius_depth,
            max_gap
        );
    }
    Ok(0)
}

fn recession(common: &CommonArgs) -> Result<u8> {
    let instance = load(common)?;
    let model = scalar_model(&instance)?;
    let cfg = &instance.config;
    let analytic = recession_analytic(model).map_err(|e| anyhow!("{e}"))?;
    let dims = instance.tree.dim() * instance.tree.horizon();
    let axis = treemarket::grid::linspace(-cfg.box_radius, cfg.box_radius, cfg.grid);
    let lattice = treemarket::grid::cartesian(&vec![axis; dims]);
    let schedule = RecessionSchedule { seed: cfg.seed, ..Default::default() };

    let mut csv = String::from("leaf_id");
    for i in 0..dims {
        let _ = write!(csv, ",z{i}");
    }
    csv.push_str(",analytic,numeric_lower,numeric_upper,classification\n");
    let mut max_gap = 0.0f64;
    let mut mismatches = 0usize;
    for z in &lattice {
        let estimates = recession_numeric(model, z, &schedule);
        for (li, est) in estimates.iter().enumerate() {
            let a = analytic.eval(li, z);
            let _ = write!(csv, "{}", instance.tree.leaves()[li]);
            for c in z {
                let _ = write!(csv, ",{c}");
            }
            let _ = writeln!(
                csv,
                ",{a},{},{},{}",
                est.lower_sample, est.monotone_upper, est.classification
            );
            if a.is_finite() && est.value.is_finite() {
                max_gap = max_gap.max((a - est.value).abs());
            } else if a != est.value {
                mismatches += 1;
            }
        }
    }
    write_artifact(&common.out, "recession.csv", &csv)?;

    if common.json {
        println!(
            "{}",
            serde_json::json!({"status": "ok", "max_finite_gap": max_gap, "classification_mismatches": mismatches})
        );
    } else {
        println!(
            "recession on {} directions: max finite gap {:.3e}, {} classification mismatches",
            lattice.len(),
            max_gap,
            mismatches
        );
    }
    Ok(0)
}

fn check_na(common: &CommonArgs, vector: bool) -> Result<u8> {
    let instance = load(common)?;
    let cfg = &instance.config;
    let verdict = if vector {
        let cone = instance
            .cone
            .as_ref()
            .ok_or_else(|| anyhow!("--vector needs a cone section in the model file"))?;
        let ModelInstance::Vector(vm) = &instance.model else {
            bail!("--vector needs a vector-valued model (kabanov)");
        };
        let na_cfg = VectorNaConfig { seed: cfg.seed, ..Default::default() };
        vector_na_check(vm, cone, &na_cfg).map_err(|e| anyhow!("{e}"))?
    } else {
        let model = scalar_model(&instance)?;
        let rec = recession_analytic(model).map_err(|e| anyhow!("{e}"))?;
        if rec.linear_prices().is_some() {
            na_check_linear(&rec).map_err(|e| anyhow!("{e}"))?
        } else {
            let sphere = SphereSearchConfig { seed: cfg.seed, ..Default::default() };
            na_check_homogeneous(&rec, &sphere).map_err(|e| anyhow!("{e}"))?
        }
    };

    match &verdict {
        NaVerdict::Arbitrage(w) => {
            write_artifact(&common.out, "witness.csv", &witness_csv(&instance.tree, &w.strategy))?;
            if common.json {
                println!(
                    "{}",
                    serde_json::json!({"status": "arbitrage", "kind": format!("{:?}", w.kind), "margin": w.margin})
                );
            } else {
                println!("ARBITRAGE found ({:?}), margin {}; witness written", w.kind, w.margin);
            }
            Ok(2)
        }
        NaVerdict::NaCertified(cert) => {
            let mut csv = String::from("node_id,child_rank,weight\n");
            for (node, weights) in &cert.weights {
                for (k, w) in weights.iter().enumerate() {
                    let _ = writeln!(csv, "{node},{k},{w}");
                }
            }
            write_artifact(&common.out, "martingale_weights.csv", &csv)?;
            if common.json {
                println!(
                    "{}",
                    serde_json::json!({"status": "na_certified", "min_weight": cert.min_weight})
                );
            } else {
                println!(
                    "no arbitrage: certified by strictly positive martingale weights (min {})",
                    cert.min_weight
                );
            }
            Ok(0)
        }
        NaVerdict::NaUpToSearch { worst_margin, candidates, .. } => {
            if common.json {
                println!(
                    "{}",
                    serde_json::json!({"status": "na_up_to_search", "worst_margin": worst_margin, "candidates": candidates})
                );
            } else {
                println!(
                    "no arbitrage up to search: worst margin {worst_margin} over {candidates} candidates"
                );
            }
            Ok(0)
        }
    }
}

fn superhedge(common: &CommonArgs, claim_csv: Option<&Path>) -> Result<u8> {
    let instance = load(common)?;
    let model = scalar_model(&instance)?;
    let cfg = &instance.config;
    let claim = match claim_csv {
        Some(path) => read_claim_csv(path, &instance)?,
        None => instance
            .claim
            .clone()
            .ok_or_else(|| anyhow!("no claim: add a claim section or pass --claim"))?,
    };
    let sh_cfg = SuperhedgeConfig {
        box_radius: cfg.box_radius,
        grid_points: cfg.grid,
        budget: cfg.budget as u128,
        feas_tol: cfg.tol,
    };
    let result = superhedge_price(model, &claim, &sh_cfg).map_err(|e| anyhow!("{e}"))?;

    if let Some(w) = &result.witness {
        write_artifact(&common.out, "witness.csv", &witness_csv(&instance.tree, w))?;
        let mut slack = String::from("leaf_id,slack\n");
        for (li, s) in result.slack.iter().enumerate() {
            let _ = writeln!(slack, "{},{}", instance.tree.leaves()[li], s);
        }
        write_artifact(&common.out, "slack.csv", &slack)?;
    }
    if common.json {
        let interval = result.price_interval.map(|(lo, hi)| vec![lo, hi]);
        println!(
            "{}",
            serde_json::json!({"status": "ok", "price": result.price, "interval": interval})
        );
    } else {
        match result.price_interval {
            Some((lo, hi)) => println!("price {:.6} in [{lo:.6}, {hi:.6}]", result.price),
            None => println!("price {:.6}", result.price),
        }
    }
    Ok(0)
}

fn read_claim_csv(path: &Path, instance: &Instance) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading claim file {}", path.display()))?;
    let tree = &instance.tree;
    let mut claim = vec![f64::NAN; tree.leaves().len()];
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (line_no == 0 && line.starts_with("leaf_id")) {
            continue;
        }
        let (id_s, v_s) = line
            .split_once(',')
            .ok_or_else(|| anyhow!("claim line {} is not 'leaf_id,value'", line_no + 1))?;
        let id: usize = id_s.trim().parse().context("claim leaf id")?;
        let v: f64 = v_s.trim().parse().context("claim value")?;
        let li = tree
            .leaf_index(id)
            .ok_or_else(|| anyhow!("claim references non-leaf node {id}"))?;
        claim[li] = v;
    }
    if let Some(missing) = claim.iter().position(|v| v.is_nan()) {
        bail!("claim missing for leaf node {}", tree.leaves()[missing]);
    }
    Ok(claim)
}

fn maximize(common: &CommonArgs, utility_spec: Option<&str>) -> Result<u8> {
    let instance = load(common)?;
    let model = scalar_model(&instance)?;
    let cfg = &instance.config;
    let utility = match utility_spec {
        Some(spec) => parse_utility_spec(spec).map_err(|e| anyhow!("{e}"))?,
        None => instance
            .utility
            .clone()
            .ok_or_else(|| anyhow!("no utility: add a utility section or pass --utility"))?,
    };
    let u_cfg = UtilityConfig {
        box_radius: cfg.box_radius,
        grid_points: cfg.grid,
        budget: cfg.budget as u128,
    };
    let (value, witness) =
        maximize_utility(model, &utility, &u_cfg).map_err(|e| anyhow!("{e}"))?;
    write_artifact(&common.out, "witness.csv", &witness_csv(&instance.tree, &witness))?;
    if common.json {
        println!("{}", serde_json::json!({"status": "ok", "value": value}));
    } else {
        println!("optimal expected utility {value:.6}");
    }
    Ok(0)
}

fn cone_check(common: &CommonArgs) -> Result<u8> {
    let instance = load(common)?;
    let cone = instance
        .cone
        .as_ref()
        .ok_or_else(|| anyhow!("cone-check needs a cone section in the model file"))?;
    let polar = cone.polar();
    let sel = ri_selection(cone).map_err(|e| anyhow!("{e}"))?;
    let affine = affine_ball_radius(cone, &sel).map_err(|e| anyhow!("{e}"))?;
    let interior = interior_ball_radius(cone, &sel).ok();

    let n = cone.n();
    let mut csv = String::from("leaf_id,kind,index");
    for i in 0..n {
        let _ = write!(csv, ",c{i}");
    }
    csv.push('\n');
    let tree = cone.tree().clone();
    for li in 0..cone.leaves() {
        let leaf = tree.leaves()[li];
        for (k, g) in cone.cone(li).generators().iter().enumerate() {
            let _ = write!(csv, "{leaf},generator,{k}");
            for v in g.iter() {
                let _ = write!(csv, ",{v}");
            }
            csv.push('\n');
        }
        for (k, g) in polar.cone(li).generators().iter().enumerate() {
            let _ = write!(csv, "{leaf},polar_generator,{k}");
            for v in g.iter() {
                let _ = write!(csv, ",{v}");
            }
            csv.push('\n');
        }
        let _ = write!(csv, "{leaf},ri_selection,0");
        for v in sel.value(li) {
            let _ = write!(csv, ",{v}");
        }
        csv.push('\n');
        let _ = write!(csv, "{leaf},affine_radius,0,{}", affine[li]);
        for _ in 1..n {
            csv.push(',');
        }
        csv.push('\n');
        if let Some(r) = &interior {
            let _ = write!(csv, "{leaf},interior_radius,0,{}", r[li]);
            for _ in 1..n {
                csv.push(',');
            }
            csv.push('\n');
        }
    }
    write_artifact(&common.out, "cones.csv", &csv)?;

    if common.json {
        println!(
            "{}",
            serde_json::json!({
                "status": "ok",
                "leaves": cone.leaves(),
                "solid": (0..cone.leaves()).all(|li| cone.cone(li).is_solid()),
            })
        );
    } else {
        for (li, radius) in affine.iter().enumerate() {
            println!(
                "leaf {}: {} generators, {} polar generators, ri selection {:?}, affine radius {}",
                tree.leaves()[li],
                cone.cone(li).generators().len(),
                polar.cone(li).generators().len(),
                sel.value(li),
                radius
            );
        }
    }
    Ok(0)
}
