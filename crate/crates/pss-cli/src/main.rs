//! `pss`: experiment harness for Taylor, interpolation, Legendre and reduced
//! basis surrogates.
//!
//! ```text
//! pss <subcommand> --config <file.json> [--out dir] [flags]
//! ```
//!
//! Flags override the matching fields of the config. Exit codes: 2 for
//! invalid configurations, 3 for numerical failures, 1 for I/O errors.

mod config;
mod experiments;
mod output;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};
use config::*;
use pss_core::greedy::{Selection, TrainingSet};
use pss_core::interp::WeightNorm;
use pss_core::PssError;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "pss", version, about = "Sparse polynomial and reduced basis surrogate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file holding a model block; overrides `model`.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Truncated Taylor expansions.
    Taylor {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Option<TaylorMode>,
        /// Report cardinalities 1..=n.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Sparse Leja interpolation.
    Interp {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Option<InterpMode>,
        #[arg(long, value_enum)]
        seq: Option<SeqKind>,
        /// Weight norm of the adaptive selection: `inf` or `2`.
        #[arg(long, value_parser = parse_p)]
        p: Option<WeightNorm>,
        /// Report cardinalities 1..=n.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Legendre coefficients by tensor quadrature.
    Legendre {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dims: Option<usize>,
        #[arg(long)]
        degree: Option<u32>,
        #[arg(long)]
        nodes: Option<usize>,
    },
    /// Reduced basis offline run, or online evaluation of a stored bundle.
    Rb {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: Option<f64>,
        /// `lattice:k` or `lds:m`.
        #[arg(long, value_parser = parse_train)]
        train: Option<TrainingSet>,
        /// Directory of a bundle written by an offline run.
        #[arg(long)]
        online: Option<PathBuf>,
    },
    /// Weak greedy on a synthetic compact set.
    GreedySynthetic {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = ["diagonal", "blocks", "file"])]
        set: Option<String>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
    },
}

fn parse_p(s: &str) -> Result<WeightNorm, String> {
    match s {
        "inf" => Ok(WeightNorm::Inf),
        "2" | "l2" => Ok(WeightNorm::L2),
        _ => Err(format!("expected inf or 2, got {s}")),
    }
}

fn parse_train(s: &str) -> Result<TrainingSet, String> {
    let (kind, v) = s.split_once(':').ok_or("expected lattice:k or lds:m")?;
    let v: usize = v.parse().map_err(|e| format!("{v}: {e}"))?;
    match kind {
        "lattice" => Ok(TrainingSet::Lattice { k: v }),
        "lds" => Ok(TrainingSet::Lds { m: v }),
        _ => Err(format!("unknown training set kind {kind}")),
    }
}

enum Failure {
    Schema(String),
    Numerical(String),
    Io(anyhow::Error),
}

impl From<PssError> for Failure {
    fn from(e: PssError) -> Self {
        match e {
            PssError::Config(_)
            | PssError::MalformedInput(_)
            | PssError::InvalidCap { .. }
            | PssError::CostGuard(_)
            | PssError::UeaViolated(_)
            | PssError::SurrogateViolation(_) => Failure::Schema(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn schema(msg: impl ToString) -> Failure {
    Failure::Schema(msg.to_string())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| schema(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| schema(format!("{}: {e}", path.display())))
}

fn sizes(n: usize) -> Vec<usize> {
    (1..=n).collect()
}

fn mismatch(expected: &str, got: &MethodConfig) -> Failure {
    schema(format!("config method is {} but the subcommand is {expected}", got.name()))
}

/// Applies the subcommand flags to the config; returns the common flags and
/// the online bundle directory if any.
fn apply(command: Command, cfg: &mut ExperimentConfig) -> Result<(Common, Option<PathBuf>), Failure> {
    let mut online = None;
    let common = match command {
        Command::Taylor {
            common,
            mode: m,
            n: nn,
            theta: th,
            eps: ep,
        } => {
            let method = cfg.method.get_or_insert(MethodConfig::Taylor {
                mode: TaylorMode::Apriori,
                sizes: vec![],
                surrogate: None,
                theta: 0.5,
                eps: 1e-8,
                reference_degree: None,
                max_steps: 200,
            });
            let MethodConfig::Taylor {
                mode, sizes: s, theta, eps, ..
            } = method
            else {
                return Err(mismatch("taylor", method));
            };
            if let Some(v) = m {
                *mode = v;
            }
            if let Some(v) = nn {
                *s = sizes(v);
            }
            if let Some(v) = th {
                *theta = v;
            }
            if let Some(v) = ep {
                *eps = v;
            }
            common
        }
        Command::Interp {
            common,
            mode: m,
            seq: q,
            p: pp,
            n: nn,
        } => {
            let method = cfg.method.get_or_insert(MethodConfig::Interp {
                mode: InterpMode::Apriori,
                sizes: vec![],
                seq: SeqKind::Leja,
                p: WeightNorm::Inf,
                surrogate: None,
                lebesgue_probes: 1000,
            });
            let MethodConfig::Interp {
                mode, sizes: s, seq, p, ..
            } = method
            else {
                return Err(mismatch("interp", method));
            };
            if let Some(v) = m {
                *mode = v;
            }
            if let Some(v) = q {
                *seq = v;
            }
            if let Some(v) = pp {
                *p = v;
            }
            if let Some(v) = nn {
                *s = sizes(v);
            }
            common
        }
        Command::Legendre {
            common,
            dims: d,
            degree: g,
            nodes: q,
        } => {
            if cfg.method.is_none() {
                let (Some(dims), Some(degree), Some(nodes)) = (d, g, q) else {
                    return Err(schema("legendre needs dims, degree and nodes"));
                };
                cfg.method = Some(MethodConfig::Legendre {
                    dims,
                    degree,
                    nodes,
                    eps: None,
                    c_margin: 1.1,
                });
            }
            let method = cfg.method.as_mut().unwrap();
            let MethodConfig::Legendre { dims, degree, nodes, .. } = method else {
                return Err(mismatch("legendre", method));
            };
            if let Some(v) = d {
                *dims = v;
            }
            if let Some(v) = g {
                *degree = v;
            }
            if let Some(v) = q {
                *nodes = v;
            }
            common
        }
        Command::Rb {
            common,
            eps: ep,
            train: tr,
            online: on,
        } => {
            online = on;
            if cfg.method.is_none() {
                let (Some(eps), Some(train)) = (ep, tr) else {
                    if online.is_some() {
                        return Ok((common, online));
                    }
                    return Err(schema("rb needs eps and train"));
                };
                cfg.method = Some(MethodConfig::Rb {
                    eps,
                    train,
                    n_max: 50,
                    strict_covering: false,
                });
            }
            let method = cfg.method.as_mut().unwrap();
            let MethodConfig::Rb { eps, train, .. } = method else {
                return Err(mismatch("rb", method));
            };
            if let Some(v) = ep {
                *eps = v;
            }
            if let Some(v) = tr {
                *train = v;
            }
            common
        }
        Command::GreedySynthetic {
            common,
            set: st,
            gamma: g,
            n: nn,
        } => {
            let named = |s: &str| -> Result<SyntheticSet, Failure> {
                match s {
                    "diagonal" => Ok(SyntheticSet::Diagonal { x: None }),
                    "blocks" => Ok(SyntheticSet::Blocks { s: 1.0, levels: 8 }),
                    _ => Err(schema("--set file needs the path in the config set block")),
                }
            };
            if cfg.method.is_none() {
                let (Some(s), Some(n)) = (st.as_deref(), nn) else {
                    return Err(schema("greedy-synthetic needs set and n"));
                };
                cfg.method = Some(MethodConfig::GreedySynthetic {
                    set: named(s)?,
                    gamma: 1.0,
                    n,
                    selection: Selection::Maximal,
                });
            }
            let method = cfg.method.as_mut().unwrap();
            let MethodConfig::GreedySynthetic { set, gamma, n, .. } = method else {
                return Err(mismatch("greedy-synthetic", method));
            };
            if let Some(s) = st.as_deref() {
                let current = match set {
                    SyntheticSet::Diagonal { .. } => "diagonal",
                    SyntheticSet::Blocks { .. } => "blocks",
                    SyntheticSet::File { .. } => "file",
                };
                if s != current {
                    *set = named(s)?;
                }
            }
            if let Some(v) = g {
                *gamma = v;
            }
            if let Some(v) = nn {
                *n = v;
            }
            common
        }
    };
    Ok((common, online))
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("PSS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| schema(format!("PSS_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Io(e.into()))
}

fn execute(cli: Cli) -> Result<String, Failure> {
    configure_threads()?;
    let (config_path, model_path) = match &cli.command {
        Command::Taylor { common, .. }
        | Command::Interp { common, .. }
        | Command::Legendre { common, .. }
        | Command::Rb { common, .. }
        | Command::GreedySynthetic { common, .. } => (common.config.clone(), common.model.clone()),
    };
    let mut cfg: ExperimentConfig = read_json(&config_path)?;
    if let Some(p) = model_path {
        cfg.model = Some(read_json(&p)?);
    }
    let (common, online) = apply(cli.command, &mut cfg)?;
    let canonical = serde_json::to_string(&cfg).map_err(|e| Failure::Io(e.into()))?;
    let hash = format!("{:x}", Sha256::digest(canonical.as_bytes()));
    let ctx = experiments::Context { cfg: &cfg, hash: &hash };
    let outcome = match online {
        Some(dir) => experiments::rb_online(&ctx, &dir)?,
        None => experiments::run(&ctx)?,
    };
    let dir = common
        .out
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    for (name, bytes) in &outcome.files {
        output::write(&dir, name, bytes).with_context(|| format!("writing {}", dir.join(name).display())).map_err(Failure::Io)?;
    }
    output::write(&dir, "config.json", serde_json::to_string_pretty(&cfg).unwrap_or_default().as_bytes())
        .context("writing the effective config")
        .map_err(Failure::Io)?;
    Ok(outcome.summary)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(Failure::Schema(m)) => {
            eprintln!("pss: invalid configuration: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("pss: numerical failure: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Io(e)) => {
            eprintln!("pss: {e:#}");
            ExitCode::from(1)
        }
    }
}
