//! Command-line orchestration for the field reconstruction and
//! latent-analysis pipeline: data generation, training, each analysis, and
//! report/plot emission.

pub mod args;
pub mod commands;
pub mod manifest;
pub mod plot;

use std::path::{Path, PathBuf};

pub enum CliError {
    /// Bad invocation: unknown command/flag, unparsable value. Exit 2.
    Usage(String),
    /// Valid invocation that failed while running. Exit 1.
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

/// Files written by the running command; removed if the command fails so a
/// failed run never leaves partial outputs behind.
#[derive(Default)]
pub struct Outputs {
    files: Vec<PathBuf>,
}

impl Outputs {
    pub fn track(&mut self, path: &Path) {
        self.files.push(path.to_path_buf());
    }

    fn cleanup(&self) {
        for f in &self.files {
            let _ = std::fs::remove_file(f);
        }
    }
}

const USAGE: &str = "\
latentscope <command> [flags]

commands:
  gen             generate a synthetic field file (FLD1)
  sample          draw sparse per-frame observations from a field
  train           train an MMGN model on observations
  reconstruct     evaluate a model + latents over a grid
  analyze-embed   t-SNE + k-means over latent spaces and the original field
  analyze-pca     explained-variance-ratio report
  analyze-cca     canonical correlations between two spaces
  analyze-tucker  Tucker entropy sweep and factor comparison
  ablate          per-dimension latent ablation study
  sweep           train across latent sizes and summarize errors
  plot            render a report file to SVG (--kind embed|evr|entropy|attr)

common flags: --seed <u64> (default 0), --out / --out-dir <path>
environment:  LATENTSCOPE_THREADS caps worker parallelism
exit codes:   0 success, 1 runtime failure, 2 usage error
";

/// Run one sub-command; returns the process exit code. All randomness is
/// derived from --seed flags, so identical invocations write identical
/// reports (manifests record wall-clock time and therefore differ).
pub fn dispatch(argv: Vec<String>) -> i32 {
    let Some(command) = argv.first().map(|s| s.as_str()) else {
        eprint!("{USAGE}");
        return 2;
    };
    let rest = &argv[1..];
    let mut outputs = Outputs::default();
    let result = match command {
        "gen" => commands::gen(rest, &argv, &mut outputs),
        "sample" => commands::sample(rest, &argv, &mut outputs),
        "train" => commands::train_cmd(rest, &argv, &mut outputs),
        "reconstruct" => commands::reconstruct(rest, &argv, &mut outputs),
        "analyze-embed" => commands::analyze_embed(rest, &argv, &mut outputs),
        "analyze-pca" => commands::analyze_pca(rest, &argv, &mut outputs),
        "analyze-cca" => commands::analyze_cca(rest, &argv, &mut outputs),
        "analyze-tucker" => commands::analyze_tucker(rest, &argv, &mut outputs),
        "ablate" => commands::ablate(rest, &argv, &mut outputs),
        "sweep" => commands::sweep(rest, &argv, &mut outputs),
        "plot" => commands::plot_cmd(rest, &argv, &mut outputs),
        "help" | "--help" | "-h" => {
            print!("{USAGE}");
            return 0;
        }
        unknown => Err(CliError::Usage(format!("unknown command `{unknown}`"))),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n");
            eprint!("{USAGE}");
            outputs.cleanup();
            2
        }
        Err(CliError::Runtime(err)) => {
            eprintln!("error: {err:#}");
            outputs.cleanup();
            1
        }
    }
}

/// Worker-thread cap: LATENTSCOPE_THREADS when set, otherwise the
/// machine's available parallelism.
pub fn max_threads() -> usize {
    std::env::var("LATENTSCOPE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Run independent jobs on up to [`max_threads`] workers, returning results
/// in job order regardless of scheduling.
pub fn run_indexed<T, F>(jobs: Vec<F>) -> Vec<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let n = jobs.len();
    let workers = max_threads().min(n.max(1));
    if workers <= 1 {
        return jobs.into_iter().map(|j| j()).collect();
    }
    let queue: Vec<std::sync::Mutex<Option<F>>> =
        jobs.into_iter().map(|j| std::sync::Mutex::new(Some(j))).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<std::sync::Mutex<Option<T>>> =
        (0..n).map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if idx >= n {
                    break;
                }
                let job = queue[idx].lock().unwrap().take().expect("job taken once");
                let out = job();
                *results[idx].lock().unwrap() = Some(out);
            });
        }
    });
    results
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("job completed"))
        .collect()
}
