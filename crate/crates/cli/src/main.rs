mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use config::{MaskArg, Resolution, SpaceKind, SphereArg, SurfaceKind};

#[derive(Debug, Parser)]
#[command(name = "momentspec", version, about = "Exit-time moments, spectra and comparison checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Moment hierarchy of a geodesic ball in a model space.
    BallMoments(BallMomentsArgs),
    /// Moment hierarchy (and optionally eigenpairs) of a masked grid domain.
    GridMoments(GridMomentsArgs),
    /// Upper bounds for λ_n from a moment sequence.
    EigBounds(EigBoundsArgs),
    /// Radius of the comparison sphere for a Ricci lower bound.
    IsoRadius(IsoRadiusArgs),
    /// Moment, PDE, Faber-Krahn and Cheeger comparison checks.
    Compare(CompareArgs),
    /// Spherical symmetrization of a weighted sample.
    Symmetrize(SymmetrizeArgs),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Text,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BallMomentsArgs {
    #[arg(long)]
    pub space: Option<SpaceKind>,
    #[arg(short = 'd', long = "dim")]
    pub dim: Option<usize>,
    /// Sphere radius.
    #[arg(short = 'R', long = "radius")]
    pub radius: Option<f64>,
    /// Hyperbolic curvature (negative).
    #[arg(short = 'K', long = "curvature", allow_negative_numbers = true)]
    pub curvature: Option<f64>,
    /// Ball radius.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(short = 'N', long = "count")]
    pub count: Option<usize>,
    #[arg(long)]
    pub n_radii: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridMomentsArgs {
    #[arg(long, value_enum)]
    pub surface: Option<SurfaceKind>,
    #[arg(long)]
    pub lx: Option<f64>,
    #[arg(long)]
    pub ly: Option<f64>,
    #[arg(short = 'R', long = "radius")]
    pub radius: Option<f64>,
    /// `AxB` or `A,B`.
    #[arg(long)]
    pub resolution: Option<Resolution>,
    /// `cap:A,B,R`, `rect:A0,B0,A1,B1`, `file:PATH` or mask JSON.
    #[arg(long)]
    pub mask: Option<MaskArg>,
    #[arg(short = 'N', long = "count")]
    pub count: Option<usize>,
    /// Number of Dirichlet eigenpairs to compute.
    #[arg(long)]
    pub eigenpairs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigBoundsArgs {
    /// Moment sequence JSON (`volume`, `moments`).
    #[arg(long)]
    pub moments: Option<PathBuf>,
    /// Built-in moment source instead of a file: `interval-bounds`.
    #[arg(long)]
    pub preset: Option<String>,
    /// Known pairs below λ_n as spectral JSON (`volume`, `pairs`).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(short = 'n', long = "index")]
    pub index: Option<usize>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Recover this many pairs from the moments and report them.
    #[arg(long)]
    pub recover: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IsoRadiusArgs {
    #[arg(short = 'K', long = "curvature", allow_negative_numbers = true)]
    pub curvature: Option<f64>,
    #[arg(short = 'd', long = "dim")]
    pub dim: Option<usize>,
    #[arg(long)]
    pub diam: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareArgs {
    /// `torus-square-vs-cap` or `sphere-rect-vs-cap`.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, value_enum)]
    pub surface: Option<SurfaceKind>,
    #[arg(long)]
    pub lx: Option<f64>,
    #[arg(long)]
    pub ly: Option<f64>,
    #[arg(short = 'R', long = "radius")]
    pub radius: Option<f64>,
    #[arg(long)]
    pub resolution: Option<Resolution>,
    #[arg(long)]
    pub mask: Option<MaskArg>,
    #[arg(long, value_enum)]
    pub sphere: Option<SphereArg>,
    #[arg(short = 'N', long = "count")]
    pub count: Option<usize>,
    /// Also compare the symmetrized solution of `-Δu = 1`.
    #[arg(long)]
    pub pde: bool,
    /// Also compare first Dirichlet eigenvalues.
    #[arg(long)]
    pub faber_krahn: bool,
    /// Cheeger constant of the surface; enables the Cheeger bound check.
    #[arg(long)]
    pub cheeger: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SymmetrizeArgs {
    /// CSV with `value,weight` columns.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Volume of the ambient manifold.
    #[arg(long)]
    pub ambient_volume: Option<f64>,
    /// Radius of the target sphere.
    #[arg(long)]
    pub sphere_radius: Option<f64>,
    #[arg(short = 'd', long = "dim")]
    pub dim: Option<usize>,
    #[arg(long)]
    pub n_radii: Option<usize>,
    /// Output CSV (`r,f_star`); stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl_merge!(BallMomentsArgs; options: space, dim, radius, curvature, rho, count, n_radii, out, format; flags: );
impl_merge!(GridMomentsArgs; options: surface, lx, ly, radius, resolution, mask, count, eigenpairs, out, format; flags: );
impl_merge!(EigBoundsArgs; options: moments, preset, spec, index, k_min, k_max, recover, out, format; flags: );
impl_merge!(IsoRadiusArgs; options: curvature, dim, diam, format; flags: );
impl_merge!(CompareArgs; options: preset, surface, lx, ly, radius, resolution, mask, sphere, count, cheeger, out, format; flags: pde, faber_krahn);
impl_merge!(SymmetrizeArgs; options: input, ambient_volume, sphere_radius, dim, n_radii, output; flags: );

#[derive(Debug)]
pub enum CliError {
    Core(momentspec::Error),
    Usage(String),
    /// A comparison check failed beyond its error budget; the report has
    /// already been written.
    CheckFailed,
}

impl From<momentspec::Error> for CliError {
    fn from(e: momentspec::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use momentspec::Error;
        match self {
            CliError::Core(Error::NonConvergence { .. } | Error::EigenNonConvergence { .. }) => 3,
            CliError::Core(_) | CliError::Usage(_) => 2,
            CliError::CheckFailed => 4,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::BallMoments(a) => {
            let path = a.config.clone();
            commands::ball_moments(config::resolve(a, path.as_deref())?)
        }
        Command::GridMoments(a) => {
            let path = a.config.clone();
            commands::grid_moments(config::resolve(a, path.as_deref())?)
        }
        Command::EigBounds(a) => {
            let path = a.config.clone();
            commands::eig_bounds(config::resolve(a, path.as_deref())?)
        }
        Command::IsoRadius(a) => {
            let path = a.config.clone();
            commands::iso_radius(config::resolve(a, path.as_deref())?)
        }
        Command::Compare(a) => {
            let path = a.config.clone();
            commands::compare(config::resolve(a, path.as_deref())?)
        }
        Command::Symmetrize(a) => {
            let path = a.config.clone();
            commands::symmetrize(config::resolve(a, path.as_deref())?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Core(inner) => eprintln!("error: {inner}"),
                CliError::Usage(msg) => eprintln!("error: {msg}"),
                CliError::CheckFailed => eprintln!("comparison check failed beyond its error budget"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
