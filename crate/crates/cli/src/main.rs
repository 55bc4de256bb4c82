use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wassmap_cli::experiment;
use wassmap_cli::{CliError, Result, Settings};
use wassmap_core::GraphRule;

#[derive(Parser)]
#[command(name = "wassmap", version, about = "Wasserstein embeddings of image families")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the measure family (or MNIST subset) described by a config.
    Generate(GenerateArgs),
    /// Exact pairwise squared Wasserstein distances, reusing the pair cache.
    Distances(StageArgs),
    /// Classical MDS of the distance matrix.
    Embed(EmbedArgs),
    /// ISOMAP baseline on the raw pixel vectors.
    Isomap(IsomapArgs),
    /// Recovery metrics, spectra and runtimes for all embeddings.
    Report(ReportArgs),
    /// Every stage for one config file or a directory of `.conf` files.
    RunAll(RunAllArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Pushforward,
    Raster,
}

#[derive(Args)]
struct Common {
    /// Experiment directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    /// Embedding dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    embed_dim: Vec<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// ISOMAP epsilon-ball radius.
    #[arg(long, conflicts_with = "knn")]
    epsilon: Option<f64>,
    /// ISOMAP neighbor count.
    #[arg(long)]
    knn: Option<usize>,
    /// Allow a uniform scale when aligning to the ground truth.
    #[arg(long)]
    with_scale: bool,
}

impl Overrides {
    fn rule(&self) -> Option<GraphRule> {
        self.epsilon.map(GraphRule::Epsilon).or(self.knn.map(GraphRule::Knn))
    }

    fn apply(&self, s: &mut Settings) {
        if let Some(seed) = self.seed {
            s.set("seed", seed.to_string());
        }
        if !self.embed_dim.is_empty() {
            s.set("embed_dim", join(&self.embed_dim));
        }
        if let Some(m) = self.mode {
            s.set("mode", if matches!(m, ModeArg::Raster) { "raster" } else { "pushforward" });
        }
        if let Some(rule) = self.rule() {
            s.set("isomap", rule_spec(rule));
        }
        if self.with_scale {
            s.set("with_scale", "true");
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct StageArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EmbedArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',')]
    embed_dim: Vec<usize>,
}

#[derive(Args)]
struct IsomapArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',')]
    embed_dim: Vec<usize>,
    #[arg(long, conflicts_with = "knn")]
    epsilon: Option<f64>,
    #[arg(long)]
    knn: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    with_scale: bool,
}

#[derive(Args)]
struct RunAllArgs {
    /// Config file or directory of `.conf` files.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    overrides: Overrides,
}

fn join(dims: &[usize]) -> String {
    dims.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn rule_spec(rule: GraphRule) -> String {
    match rule {
        GraphRule::Epsilon(e) => format!("eps:{e}"),
        GraphRule::Knn(k) => format!("knn:{k}"),
    }
}

fn dims(v: &[usize]) -> Option<&[usize]> {
    (!v.is_empty()).then_some(v)
}

/// Sizes the global pool from the flag, else from the experiment config.
fn init_threads(flag: Option<usize>, configured: Option<&Path>) {
    let from_config = || {
        let settings = Settings::load(configured?).ok()?;
        settings.get("threads")?.parse::<usize>().ok()
    };
    let threads = flag.or_else(from_config).unwrap_or(0);
    if threads > 0 {
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => {
            init_threads(a.common.threads, Some(&a.config));
            let mut settings = Settings::load(&a.config)?;
            a.overrides.apply(&mut settings);
            let m = experiment::generate(&settings, &a.common.out)?;
            let (lo, hi) = (m.atom_counts.iter().min(), m.atom_counts.iter().max());
            println!("generated {} measures ({} to {} atoms) in {}", m.count, lo.unwrap_or(&0), hi.unwrap_or(&0), a.common.out.display());
        }
        Command::Distances(a) => {
            init_threads(a.common.threads, Some(&a.common.out.join(experiment::CONFIG_FILE)));
            let s = experiment::distances(&a.common.out)?;
            println!("{} pairs: {} solved, {} from cache", s.pairs, s.solved, s.cached);
        }
        Command::Embed(a) => {
            init_threads(a.common.threads, Some(&a.common.out.join(experiment::CONFIG_FILE)));
            for tag in experiment::embed(&a.common.out, dims(&a.embed_dim))? {
                println!("wrote {tag}");
            }
        }
        Command::Isomap(a) => {
            init_threads(a.common.threads, Some(&a.common.out.join(experiment::CONFIG_FILE)));
            let rule = a.epsilon.map(GraphRule::Epsilon).or(a.knn.map(GraphRule::Knn));
            let rules = rule.map(|r| vec![r]);
            let outcomes = experiment::isomap(&a.common.out, rules.as_deref(), dims(&a.embed_dim))?;
            let mut failed = Vec::new();
            for o in outcomes {
                match o.result {
                    Ok(n) => println!("wrote {} ({n} points)", o.tag),
                    Err(msg) => {
                        eprintln!("{}: {msg}", o.tag);
                        failed.push(o.tag);
                    }
                }
            }
            if !failed.is_empty() {
                return Err(CliError::Usage(format!("isomap failed for {}", failed.join(", "))));
            }
        }
        Command::Report(a) => {
            let r = experiment::report(&a.common.out, a.with_scale.then_some(true))?;
            print!("{}", r.to_text());
        }
        Command::RunAll(a) => {
            init_threads(a.common.threads, a.config.is_file().then_some(a.config.as_path()));
            let reports = experiment::run_all(&a.config, &a.common.out, &|s| a.overrides.apply(s))?;
            for r in reports {
                println!("{}: {} items, {} embeddings", r.name, r.count, r.embeddings.len());
                for (tag, msg) in &r.failures {
                    println!("  {tag} failed: {msg}");
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
