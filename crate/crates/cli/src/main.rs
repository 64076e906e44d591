mod commands;
mod config;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Command failure, mapped to the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad input, configuration or files: exit 1.
    Input(String),
    /// A numerical verification did not pass: exit 2.
    Verification(String),
}

impl From<vcmesh::Error> for Failure {
    fn from(e: vcmesh::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "vcmesh", version, about = "Fully convolutional mesh autoencoder toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Scale {
    Small,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Base {
    Icosphere,
    Grid,
}

/// Model files: the checkpoint and the hierarchy it was trained on.
#[derive(clap::Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub hierarchy: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Build a sampling hierarchy from a mesh and print its summary.
    BuildHierarchy {
        #[arg(long)]
        mesh: PathBuf,
        /// `s:r` or `s:r:p1,p2,...`, once per level.
        #[arg(long = "levels", required = true)]
        levels: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Join disconnected components whose closest vertices lie within this distance.
        #[arg(long)]
        bridge: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an autoencoder from a run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Reconstruct meshes and report the mean per-vertex Euclidean error.
    Reconstruct {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
        mesh: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the latent code of a mesh.
    Encode {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a latent code into an OBJ mesh.
    Decode {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        code: PathBuf,
        /// Mesh whose faces are copied into the output.
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Interpolate selected latent vertices between two meshes.
    Interpolate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Comma-separated latent vertex indices, or `all`.
        #[arg(long)]
        vertices: String,
        #[arg(long, default_value_t = 5)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace selected latent vertices of one mesh with another's.
    Mix {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        donor: PathBuf,
        #[arg(long)]
        vertices: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference gradient check of every layer.
    Gradcheck {
        #[arg(long, value_enum, default_value_t = Scale::Small)]
        scale: Scale,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Per-layer parameter counts, latent shape and latent anchors.
    Stats {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Write a dataset of smooth random deformations of a procedural mesh.
    MakeSynthetic {
        #[arg(long, value_enum)]
        base: Base,
        #[arg(long)]
        subdiv: usize,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = vcmesh::synthetic::DEFAULT_AMPLITUDE)]
        amplitude: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::BuildHierarchy {
            mesh,
            levels,
            seed,
            bridge,
            out,
        } => commands::build_hierarchy(&mesh, &levels, seed, bridge, &out),
        Command::Train { config, resume } => commands::train(&config, resume.as_deref()),
        Command::Reconstruct {
            model,
            mesh,
            dataset,
            out,
        } => commands::reconstruct(&model, mesh.as_deref(), dataset.as_deref(), &out),
        Command::Encode { model, mesh, out } => commands::encode(&model, &mesh, &out),
        Command::Decode {
            model,
            code,
            template,
            out,
        } => commands::decode(&model, &code, template.as_deref(), &out),
        Command::Interpolate {
            model,
            source,
            target,
            vertices,
            steps,
            out,
        } => commands::interpolate(&model, &source, &target, &vertices, steps, &out),
        Command::Mix {
            model,
            base,
            donor,
            vertices,
            out,
        } => commands::mix(&model, &base, &donor, &vertices, &out),
        Command::Gradcheck { scale, seed } => commands::gradcheck(scale, seed),
        Command::Stats { model } => commands::stats(&model),
        Command::MakeSynthetic {
            base,
            subdiv,
            samples,
            seed,
            amplitude,
            out,
        } => commands::make_synthetic(base, subdiv, samples, seed, amplitude, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Verification(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(2)
        }
    }
}
