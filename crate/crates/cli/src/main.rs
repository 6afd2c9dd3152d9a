use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use proxyfp::config::PipelineConfig;
use proxyfp::error::{Error, Result};
use proxyfp::eval::report::{run_full_evaluation, run_pca};
use proxyfp::image::Image;
use proxyfp::protocol::{authenticate, enroll, enrollment_key_seed, revoke, TemplateStore, UserToken};
use proxyfp::workflow::Workspace;

/// Proxy fingerprint pipeline: synthesis, training, enrollment and evaluation.
#[derive(Debug, Parser)]
#[command(name = "proxyfp", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML configuration file; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root directory for every file the run produces.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true, env = "PX_SEED")]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize the fingerprint corpus.
    Synth,
    /// Train the autoencoder.
    TrainAe,
    /// Generate the five class projection matrices.
    GenMatrices,
    /// Train the proxy decoder.
    TrainDecoder,
    /// Enroll a user from a fingerprint image and write their token.
    Enroll {
        #[arg(long)]
        user: String,
        #[arg(long)]
        image: PathBuf,
        /// Class matrix to project on (1-5).
        #[arg(long)]
        class: usize,
        /// Token destination (default: <out>/token_<user>.pxtk).
        #[arg(long)]
        token_out: Option<PathBuf>,
    },
    /// Authenticate a probe image with a user's token.
    Auth {
        #[arg(long)]
        user: String,
        #[arg(long)]
        probe: PathBuf,
        #[arg(long)]
        token: PathBuf,
        /// Decision threshold (default: the configured one).
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Replace a user's key from a re-presented image; old tokens stop working.
    Revoke {
        #[arg(long)]
        user: String,
        #[arg(long)]
        image: PathBuf,
        /// New class matrix (default: keep the current one).
        #[arg(long)]
        class: Option<usize>,
        #[arg(long)]
        token_out: Option<PathBuf>,
    },
    /// Run the full evaluation and write the report files.
    Eval,
    /// Write PCA coordinates of the original and projected latent spaces.
    Pca,
}

fn workspace(global: &GlobalArgs) -> Result<Workspace> {
    let mut config = match &global.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    Workspace::new(&global.out, config)
}

fn read_image(path: &Path) -> Result<Image<f32>> {
    Image::read_pgm(path)
}

fn token_path(ws: &Workspace, user: &str, explicit: Option<PathBuf>) -> PathBuf {
    explicit.unwrap_or_else(|| ws.root.join(UserToken::file_name(user)))
}

fn run(cli: Cli) -> Result<()> {
    let ws = workspace(&cli.global)?;
    match cli.command {
        Command::Synth => {
            let corpus = ws.synthesize()?;
            info!("wrote {} images to {}", corpus.images.len(), ws.corpus_dir().display());
        }
        Command::TrainAe => {
            ws.train_autoencoder(&ws.corpus()?)?;
            info!("wrote {}", ws.encoder_path().display());
        }
        Command::GenMatrices => {
            ws.generate_matrices()?;
            info!("wrote class matrices");
        }
        Command::TrainDecoder => {
            let corpus = ws.corpus()?;
            ws.train_decoder(&corpus, ws.encoder()?, ws.matrices()?)?;
            info!("wrote {}", ws.proxy_decoder_path().display());
        }
        Command::Enroll { user, image, class, token_out } => {
            let generator = ws.trained_generator()?;
            let store = TemplateStore::new(ws.store_dir());
            let seed = enrollment_key_seed(ws.config.seed, &user, 1);
            let (_, token) = enroll(&store, &generator, &user, &read_image(&image)?, class, seed)?;
            let path = token_path(&ws, &user, token_out);
            token.save(&path)?;
            println!("enrolled {user} token={}", path.display());
        }
        Command::Auth { user, probe, token, threshold } => {
            let token = UserToken::load(&token)?;
            if token.user_id != user {
                return Err(Error::Domain(format!("token belongs to {:?}, not {user:?}", token.user_id)));
            }
            let generator = ws.trained_generator()?;
            let store = TemplateStore::new(ws.store_dir());
            let threshold = threshold.unwrap_or(ws.config.matcher.decision_threshold);
            let decision = authenticate(&store, &generator, &read_image(&probe)?, &token, threshold)?;
            let verdict = if decision.accept { "ACCEPT" } else { "REJECT" };
            println!("{verdict} score={}", decision.score.fused);
        }
        Command::Revoke { user, image, class, token_out } => {
            let generator = ws.trained_generator()?;
            let store = TemplateStore::new(ws.store_dir());
            let epoch = store.load(&user)?.key_epoch + 1;
            let seed = enrollment_key_seed(ws.config.seed, &user, epoch);
            let (_, token) = revoke(&store, &generator, &user, &read_image(&image)?, seed, class)?;
            let path = token_path(&ws, &user, token_out);
            token.save(&path)?;
            println!("revoked {user} epoch={} token={}", token.key_epoch, path.display());
        }
        Command::Eval => {
            let report = run_full_evaluation(&ws)?;
            print!("{}", report.eer_table());
        }
        Command::Pca => {
            let spaces = run_pca(&ws)?;
            println!(
                "silhouette original={} projected={}",
                spaces.original_silhouette, spaces.projected_silhouette
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
