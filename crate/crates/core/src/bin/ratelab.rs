//! Command-line interface: combinatorial-dimension reports, adversarial
//! distribution construction, Monte Carlo learning curves, rate fits, the
//! concentration audit, and the exact coin-testing oracle.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use ratelab::adversary::{self, DiscreteDistribution, PhiFn};
use ratelab::bounds;
use ratelab::domain::ConceptClass;
use ratelab::lab;
use ratelab::learners::{LearnerConfig, LearnerKind, PsiFn};

#[derive(Parser)]
#[command(name = "ratelab", version, about = "Universal-rates laboratory")]
struct Cli {
    /// optional flat key=value config file; CLI flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Combinatorial-dimension report for a concept class
    Dims {
        #[arg(long)]
        class: PathBuf,
        #[arg(long, default_value_t = 8)]
        vc_budget: usize,
        #[arg(long, default_value_t = 6)]
        ldim_depth: usize,
        #[arg(long)]
        tree: Option<TreeKind>,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 32)]
        domain_budget: u64,
    },
    /// Construct a lower-bound distribution and write it as JSON
    Adversary {
        #[arg(long)]
        kind: AdversaryKind,
        #[arg(long)]
        class: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        beta: f64,
        /// family index (near-exp), or which of the pair (finite-pair: 0|1)
        #[arg(long, default_value_t = 0)]
        i: usize,
        #[arg(long, default_value_t = 6)]
        depth: usize,
        /// rate function for super-root: invsqrtlog | power:A
        #[arg(long, default_value = "power:1")]
        phi: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo learning curve, written as CSV
    Curve {
        #[arg(long)]
        learner: LearnerArg,
        #[arg(long)]
        class: PathBuf,
        #[arg(long)]
        dist: PathBuf,
        /// comma-separated strictly increasing sample sizes
        #[arg(long)]
        ns: String,
        #[arg(long)]
        reps: u32,
        #[arg(long)]
        seed: u64,
        /// psi descriptor: sqrt | power:A | logpoly:P
        #[arg(long)]
        psi: Option<String>,
        #[arg(long)]
        b_cap: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit rate families to a curve CSV
    Fit {
        #[arg(long)]
        curve: PathBuf,
    },
    /// Concentration audit of the committee deviation event
    Audit {
        #[arg(long)]
        class: PathBuf,
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        trials: u32,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        psi: Option<String>,
        #[arg(long, default_value_t = 4)]
        b_cap: usize,
    },
    /// Closed-form oracles
    Oracle {
        #[command(subcommand)]
        which: OracleCmd,
    },
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Exact Bayes error of the n-sample two-coin test
    Coin {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        n: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TreeKind {
    Littlestone,
    Vcl,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdversaryKind {
    FinitePair,
    NearExp,
    SuperRoot,
}

#[derive(Clone, Copy, ValueEnum)]
enum LearnerArg {
    Erm,
    Exp,
    Vclroot,
    Baseline,
}

impl From<LearnerArg> for LearnerKind {
    fn from(a: LearnerArg) -> LearnerKind {
        match a {
            LearnerArg::Erm => LearnerKind::Erm,
            LearnerArg::Exp => LearnerKind::Exp,
            LearnerArg::Vclroot => LearnerKind::VclRoot,
            LearnerArg::Baseline => LearnerKind::Baseline,
        }
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

type DynResult<T> = Result<T, Box<dyn std::error::Error>>;

fn run() -> DynResult<()> {
    let cli = Cli::parse();
    let file_cfg = match &cli.config {
        Some(path) => parse_config(path)?,
        None => HashMap::new(),
    };
    match cli.cmd {
        Cmd::Dims { class, vc_budget, ldim_depth, tree, depth, domain_budget } => {
            let class = load_class(&class)?;
            let vc = class.vc_dimension(vc_budget)?;
            let ldim = class.littlestone_dimension(ldim_depth, domain_budget)?;
            let mut report = json!({
                "class": class.kind_name(),
                "vc": { "budget": vc_budget, "value": vc.value, "saturated": vc.saturated },
                "ldim": {
                    "depth_budget": ldim_depth,
                    "domain_budget": domain_budget,
                    "value": ldim.value,
                    "saturated": ldim.saturated,
                },
            });
            if let Some(kind) = tree {
                let entry = match kind {
                    TreeKind::Littlestone => {
                        let (ok, wit) = class.shatters_littlestone_tree(depth, domain_budget)?;
                        json!({ "kind": "littlestone", "depth": depth, "shattered": ok,
                                "witness": wit })
                    }
                    TreeKind::Vcl => {
                        let (ok, wit) = class.shatters_vcl_tree(depth, domain_budget)?;
                        json!({ "kind": "vcl", "depth": depth, "shattered": ok, "witness": wit })
                    }
                };
                report["tree"] = entry;
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Cmd::Adversary { kind, class, beta, i, depth, phi, out } => {
            let class = load_class(&class)?;
            match kind {
                AdversaryKind::FinitePair => {
                    let (p0, p1) = adversary::finite_lb_pair(&class, 64)?;
                    let dist = if i == 0 { p0 } else { p1 };
                    write_atomic(&out, &dist.to_json())?;
                    println!("{{\"written\":\"{}\",\"pair_index\":{}}}", out.display(), i);
                }
                AdversaryKind::NearExp => {
                    let budget = (2 * depth as u64).max(64);
                    let dist = adversary::near_exp_family(&class, beta, i, depth, budget)?;
                    write_atomic(&out, &dist.to_json())?;
                    println!("{{\"written\":\"{}\"}}", out.display());
                }
                AdversaryKind::SuperRoot => {
                    let phi = parse_phi(&phi)?;
                    let (ok, wit) = class.shatters_littlestone_tree(depth, 64)?;
                    if !ok {
                        return Err(format!(
                            "class does not shatter a depth-{depth} Littlestone tree within budget"
                        )
                        .into());
                    }
                    let branch = vec![false; depth];
                    let (dist, schedule) =
                        adversary::super_root_branch(&class, &wit.unwrap(), &branch, phi, depth)?;
                    write_atomic(&out, &dist.to_json())?;
                    println!("{}", serde_json::to_string_pretty(&schedule)?);
                }
            }
        }
        Cmd::Curve { learner, class, dist, ns, reps, seed, psi, b_cap, out } => {
            let class = load_class(&class)?;
            let dist = load_dist(&dist)?;
            let ns: Vec<u64> =
                ns.split(',').map(|s| s.trim().parse::<u64>()).collect::<Result<_, _>>()?;
            let cfg = build_cfg(&file_cfg, psi.as_deref(), b_cap)?;
            let curve =
                lab::learning_curve(learner.into(), &class, &dist, &ns, reps, seed, &cfg)?;
            write_atomic(&out, &lab::curve_to_csv(&curve))?;
            let prov = curve.provenance.as_ref().expect("provenance recorded");
            println!(
                "{}",
                json!({
                    "written": out.display().to_string(),
                    "learner": prov.learner,
                    "cfg": prov.cfg,
                    "early_terminations": prov.early_terminations,
                    "baseline_selections": prov.baseline_selections,
                })
            );
        }
        Cmd::Fit { curve } => {
            let text = std::fs::read_to_string(&curve)?;
            let curve = lab::curve_from_csv(&text)?;
            let fit = lab::fit_rate(&curve)?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
        }
        Cmd::Audit { class, dist, n, trials, seed, psi, b_cap } => {
            let class = load_class(&class)?;
            let dist = load_dist(&dist)?;
            let cfg = build_cfg(&file_cfg, None, None)?;
            let psi = parse_psi(psi.as_deref().unwrap_or("sqrt"))?;
            let report =
                lab::audit_concentration(&class, &dist, n, psi, trials, seed, b_cap, &cfg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Cmd::Oracle { which } => match which {
            OracleCmd::Coin { gamma, n } => {
                println!("{}", bounds::coin_test_bayes_error(gamma, n));
            }
        },
    }
    Ok(())
}

fn load_class(path: &Path) -> DynResult<ConceptClass> {
    Ok(ConceptClass::from_json(&std::fs::read_to_string(path)?)?)
}

fn load_dist(path: &Path) -> DynResult<DiscreteDistribution> {
    Ok(DiscreteDistribution::from_json(&std::fs::read_to_string(path)?)?)
}

fn write_atomic(path: &Path, contents: &str) -> DynResult<()> {
    std::fs::write(path, contents)?;
    Ok(())
}

fn parse_psi(s: &str) -> DynResult<PsiFn> {
    let psi = if s == "sqrt" {
        PsiFn::Sqrt
    } else if let Some(a) = s.strip_prefix("power:") {
        PsiFn::Power { a: a.parse()? }
    } else if let Some(p) = s.strip_prefix("logpoly:") {
        PsiFn::LogPoly { p: p.parse()? }
    } else {
        return Err(format!("unknown psi descriptor: {s}").into());
    };
    psi.validate()?;
    Ok(psi)
}

fn parse_phi(s: &str) -> DynResult<PhiFn> {
    let phi = if s == "invsqrtlog" {
        PhiFn::InvSqrtLog
    } else if let Some(a) = s.strip_prefix("power:") {
        PhiFn::Power { a: a.parse()? }
    } else {
        return Err(format!("unknown phi descriptor: {s}").into());
    };
    phi.validate()?;
    Ok(phi)
}

/// Flat key=value config: psi, b_cap, depth_budget, domain_budget,
/// max_points, max_k, max_b. Unknown keys are rejected.
fn parse_config(path: &Path) -> DynResult<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (ln, line) in std::fs::read_to_string(path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", ln + 1))?;
        let k = k.trim().to_string();
        if !["psi", "b_cap", "depth_budget", "domain_budget", "max_points", "max_k", "max_b"]
            .contains(&k.as_str())
        {
            return Err(format!("unknown config key: {k}").into());
        }
        map.insert(k, v.trim().to_string());
    }
    Ok(map)
}

fn build_cfg(
    file_cfg: &HashMap<String, String>,
    psi_flag: Option<&str>,
    b_cap_flag: Option<usize>,
) -> DynResult<LearnerConfig> {
    let mut cfg = LearnerConfig::default();
    if let Some(s) = file_cfg.get("psi") {
        cfg.psi = parse_psi(s)?;
    }
    if let Some(s) = file_cfg.get("b_cap") {
        let v: usize = s.parse()?;
        cfg.b_cap_exp = v;
        cfg.b_cap_vcl = v;
    }
    if let Some(s) = file_cfg.get("depth_budget") {
        cfg.soa.depth = s.parse()?;
    }
    if let Some(s) = file_cfg.get("domain_budget") {
        cfg.soa.domain = s.parse()?;
    }
    if let Some(s) = file_cfg.get("max_points") {
        cfg.partial.max_points = s.parse()?;
    }
    if let Some(s) = file_cfg.get("max_k") {
        cfg.partial.max_k = s.parse()?;
    }
    if let Some(s) = file_cfg.get("max_b") {
        cfg.partial.max_b = s.parse()?;
    }
    // CLI flags override the file
    if let Some(s) = psi_flag {
        cfg.psi = parse_psi(s)?;
    }
    if let Some(v) = b_cap_flag {
        cfg.b_cap_exp = v;
        cfg.b_cap_vcl = v;
    }
    Ok(cfg)
}
