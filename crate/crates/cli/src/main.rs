mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spbuild::coeffs::{make_field, FieldSpec};
use spbuild::fq_symplectic::DEFAULT_ENUM_GUARD;
use spbuild::graph::DEFAULT_BALL_GUARD;
use spbuild::lattices::SymplecticSpace;
use thiserror::Error;

use output::Format;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] spbuild::Error),
    #[error("verification failed: {}", .0.join(", "))]
    Verification(Vec<String>),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use spbuild::Error as E;
        match self {
            CliError::Core(E::SizeGuard { .. }) => 3,
            CliError::Core(E::ModelViolation(_) | E::OrbitWithoutRepresentative(_) | E::NonConvergence(_)) => 4,
            CliError::Verification(_) => 4,
            _ => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "spbuild", version, about = "Special-vertex graphs of the affine building of Sp_n over F_q((t))")]
struct Cli {
    #[command(flatten)]
    config: RunConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct RunConfig {
    /// Characteristic of the residue field.
    #[arg(long, global = true, default_value_t = 2)]
    pub p: u64,
    /// Residue field degree, q = p^e.
    #[arg(long, global = true, default_value_t = 1)]
    pub e: u32,
    /// Rank: the building of Sp_n acts on K^{2n}.
    #[arg(long, global = true, default_value_t = 2)]
    pub n: usize,
    #[arg(long, global = true, default_value_t = 2)]
    pub radius: usize,
    /// Exponent window for lattices (default 2 * radius + 4).
    #[arg(long, global = true)]
    pub window: Option<i64>,
    /// Seed for every randomized check.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Maximum number of vertices in a ball.
    #[arg(long, global = true, default_value_t = DEFAULT_BALL_GUARD)]
    pub max_vertices: usize,
    /// Maximum number of subspaces enumerated over F_q.
    #[arg(long, global = true, default_value_t = DEFAULT_ENUM_GUARD)]
    pub max_subspaces: u128,
    /// Output file, written atomically (default stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

impl RunConfig {
    pub fn field(&self) -> Result<FieldSpec, CliError> {
        Ok(make_field(self.p, self.e)?)
    }

    pub fn space(&self) -> Result<SymplecticSpace, CliError> {
        let window = self.window.unwrap_or(2 * self.radius as i64 + 4);
        Ok(SymplecticSpace::new(self.field()?, self.n, window)?)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.n < 2 {
            return Err(CliError::Input(format!("n must be at least 2, got {}", self.n)));
        }
        self.field().map(|_| ())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Closed,
    OrbitSum,
    Power,
    Walk,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GraphKind {
    /// Special vertices of the Sp_n building.
    Special,
    /// Vertices of the SL_{2n} building.
    Sl,
    /// Special vertices of one apartment.
    Apartment,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sorted neighbors of a special vertex (the origin by default).
    Neighbors {
        /// Vertex as JSON `{"n": .., "matrix": [[..]]}`, inline or a file path; `-` reads stdin.
        #[arg(long)]
        vertex: Option<String>,
    },
    /// The ball of the given radius around the origin.
    Ball,
    /// The special vertices of the standard apartment and their embedding.
    Apartment,
    /// Borel orbits on the Lagrangians of F_q^{2n}.
    Orbits,
    /// Spectral radius: exact value and numerical lower bounds.
    Rho {
        #[arg(long, value_enum, default_value_t = Method::All)]
        method: Method,
    },
    /// Runs the exact identity and inequality suite.
    Verify {
        /// Also check the inequality over n <= 5, p in {2,3,5,7,11}, q = p^i with i <= 5.
        #[arg(long)]
        grid: bool,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Sp_n against SL_{2n}: degrees, ball estimates and growth.
    Compare,
    /// Ball growth `|B_i|` and the growth constant estimate.
    Growth {
        #[arg(long, value_enum, default_value_t = GraphKind::Special)]
        graph: GraphKind,
    },
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let c = &cli.config;
    c.validate()?;
    let report = match &cli.command {
        Command::Neighbors { vertex } => commands::neighbors(c, vertex.as_deref())?,
        Command::Ball => commands::ball(c)?,
        Command::Apartment => commands::apartment(c)?,
        Command::Orbits => commands::orbits(c)?,
        Command::Rho { method } => commands::rho(c, *method)?,
        Command::Verify { grid, inject_fault } => commands::verify(c, *grid, *inject_fault)?,
        Command::Compare => commands::compare(c)?,
        Command::Growth { graph } => commands::growth(c, *graph)?,
    };
    output::emit(&report.render(c.format)?, c.out.as_deref())?;
    if report.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(report.failures))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spbuild: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
