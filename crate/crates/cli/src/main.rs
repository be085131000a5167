use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracvolt::selftest::{selftest, SelftestOptions};
use fracvolt::{experiment_names, RunError, THREADS_ENV};

#[derive(Parser)]
#[command(
    name = "fracvolt",
    version,
    about = "Stochastic fractional Volterra equations: numerical lab"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment config and write its bundle under `out_dir`.
    Run { config: PathBuf },
    /// Run acceptance criteria 1 to 10.
    Selftest {
        #[arg(long, default_value_t = SelftestOptions::default().paths)]
        paths: usize,
        #[arg(long, default_value_t = SelftestOptions::default().seed)]
        seed: u64,
        /// Write the bundle to `<out>/selftest`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List known experiments.
    List,
}

fn init_threads() -> Result<(), RunError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize =
        v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            RunError::Config(format!("{THREADS_ENV}={v} is not a positive integer"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| RunError::Config(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = init_threads().and_then(|()| match cli.cmd {
        Cmd::Run { config } => fracvolt::run(&config).map(|(b, dir)| {
            print!("{}", b.summary());
            println!("bundle {} sha256 {}", dir.display(), b.hash());
            b.all_passed()
        }),
        Cmd::Selftest { paths, seed, out } => {
            if paths < 20 {
                return Err(RunError::Config("--paths must be >= 20".into()));
            }
            let opts = SelftestOptions { paths, seed };
            println!(
                "selftest: {paths} paths, seed {seed}, {} threads",
                rayon::current_num_threads()
            );
            let (b, _) = selftest(&opts, |r| {
                println!("{}  [{:.1} s]", r.line(), r.elapsed.as_secs_f64())
            })?;
            if let Some(root) = out {
                let dir = b.write(&root)?;
                println!("bundle {} sha256 {}", dir.display(), b.hash());
            }
            Ok(b.all_passed())
        }
        Cmd::List => {
            for n in experiment_names() {
                println!("{n}");
            }
            Ok(true)
        }
    });
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("fracvolt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
