//! `kms-graph`: critical temperatures, KMS states and the decomposition of
//! critical limit states for the Toeplitz algebra of a finite directed graph.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kms_core::decomp::{decompose, DecompositionSettings};
use kms_core::extrapolate::ExtrapolationSettings;
use kms_core::io::parse_graph;
use kms_core::report::{decomposition_section, oracle_section, states_section, ReportDocument};
use kms_core::{KmsError, KmsStructure, Tolerances};

const THREADS_VAR: &str = "KMS_GRAPH_THREADS";

#[derive(Parser, Debug)]
#[command(name = "kms-graph", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Components, spectral radii, pmc(E) and beta_v for every vertex.
    Analyze(Common),
    /// Type-I state at a vertex and the extremal states psi_C.
    States {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        vertex: String,
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
    },
    /// Decompose the critical limit state phi_v (all vertices with beta_v > 0 by default).
    Decompose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        vertex: Option<String>,
        /// Also print each lambda_C as an approximate fraction (denominator <= 10^6).
        #[arg(long)]
        exact_fractions: bool,
    },
    /// Cross-check generating functions against independent computations.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Number of series terms summed before the tail bound.
        #[arg(long, default_value_t = 200)]
        truncation: usize,
        /// Enumerate paths explicitly (graphs of at most 12 vertices).
        #[arg(long)]
        enumerate: bool,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Edge list: one `source target [multiplicity]` per line.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 1e-9)]
    tol_critical: f64,
    #[arg(long, default_value_t = kms_core::decomp::DEFAULT_SUPPORT_THRESHOLD)]
    support_threshold: f64,
    /// Coarsest extrapolation step.
    #[arg(long)]
    eps0: Option<f64>,
    /// Number of halvings of the extrapolation step.
    #[arg(long)]
    grid_depth: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Table,
}

#[derive(Debug)]
enum Failure {
    Kms(KmsError),
    Io(String),
    /// The report was produced but at least one cross-check failed.
    Oracle(Vec<String>),
}

impl From<KmsError> for Failure {
    fn from(e: KmsError) -> Self {
        Failure::Kms(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Kms(e) => e.exit_code() as u8,
            Failure::Io(_) | Failure::Oracle(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Kms(e) => e.to_string(),
            Failure::Io(m) => m.clone(),
            Failure::Oracle(f) => format!("oracle cross-checks failed: {}", f.join("; ")),
        }
    }
}

impl Common {
    fn settings(&self) -> Result<(Tolerances, DecompositionSettings), Failure> {
        if !(self.tol_critical > 0.0 && self.tol_critical.is_finite()) {
            return Err(invalid(format!("--tol-critical must be positive, got {}", self.tol_critical)));
        }
        if !(self.support_threshold > 0.0 && self.support_threshold.is_finite()) {
            return Err(invalid(format!(
                "--support-threshold must be positive, got {}",
                self.support_threshold
            )));
        }
        let mut extrapolation = ExtrapolationSettings::default();
        if let Some(eps0) = self.eps0 {
            extrapolation.eps0 = eps0;
        }
        if let Some(depth) = self.grid_depth {
            extrapolation.depth = depth;
        }
        extrapolation.validate()?;
        let tolerances = Tolerances {
            critical: self.tol_critical,
            ..Tolerances::default()
        };
        let decomposition = DecompositionSettings {
            extrapolation,
            support_threshold: self.support_threshold,
        };
        Ok((tolerances, decomposition))
    }

    fn load(&self) -> Result<(KmsStructure, DecompositionSettings), Failure> {
        let (tolerances, decomposition) = self.settings()?;
        let text = std::fs::read_to_string(&self.graph)
            .map_err(|e| Failure::Io(format!("cannot read {}: {e}", self.graph.display())))?;
        let graph = parse_graph(&text)?;
        Ok((KmsStructure::with_tolerances(graph, tolerances)?, decomposition))
    }

    fn emit(&self, doc: &ReportDocument) -> Result<(), Failure> {
        let text = match self.format {
            Format::Json => doc.to_json()?,
            Format::Table => doc.to_table(),
        };
        match &self.out {
            Some(path) => std::fs::write(path, text)
                .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn invalid(message: String) -> Failure {
    Failure::Kms(KmsError::InvalidParameter(message))
}

fn vertex_index(s: &KmsStructure, name: &str) -> Result<usize, Failure> {
    Ok(s.graph().index_of(name)?)
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| invalid(format!("{THREADS_VAR} must be a non-negative integer, got `{raw}`")))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Io(format!("cannot start thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Analyze(common) => {
            let (s, d) = common.load()?;
            common.emit(&ReportDocument::analyze(&s, "analyze", d)?)
        }
        Command::States { common, vertex, beta } => {
            let (s, d) = common.load()?;
            let v = vertex_index(&s, &vertex)?;
            let mut doc = ReportDocument::analyze(&s, "states", d)?;
            doc.states = Some(states_section(&s, v, beta)?);
            common.emit(&doc)
        }
        Command::Decompose {
            common,
            vertex,
            exact_fractions,
        } => {
            let (s, d) = common.load()?;
            let vertices = match vertex {
                Some(name) => vec![vertex_index(&s, &name)?],
                None => (0..s.graph().vertex_count())
                    .filter(|&v| s.beta_v(v).is_ok_and(|b| b > 0.0))
                    .collect(),
            };
            let mut doc = ReportDocument::analyze(&s, "decompose", d)?;
            for v in vertices {
                let r = decompose(&s, v, &d)?;
                doc.decompositions.push(decomposition_section(&s, &r, exact_fractions));
            }
            common.emit(&doc)
        }
        Command::Oracle {
            common,
            truncation,
            enumerate,
        } => {
            let (s, d) = common.load()?;
            let mut doc = ReportDocument::analyze(&s, "oracle", d)?;
            let section = oracle_section(&s, truncation, enumerate)?;
            let failures = section.failures.clone();
            doc.oracle = Some(section);
            common.emit(&doc)?;
            if failures.is_empty() {
                Ok(())
            } else {
                Err(Failure::Oracle(failures))
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("kms-graph: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
