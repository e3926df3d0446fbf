//! Command-line front end: `run`, `rate` and `report`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::engine::GameId;
use crate::players::{preflight, Backend, PlayerSpec};
use crate::ratings::{BootstrapConfig, DEFAULT_LEVEL, DEFAULT_RESAMPLES};
use crate::report::{cmd_rate, cmd_report, RateOptions, ReportError, ReportOptions};
use crate::tournament::{aggregate_outcomes, run_tournament, MatchRecordStore, RunOptions, TournamentConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PREFLIGHT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gamearena", version, about = "Run game tournaments between agents and rate them")]
pub struct Cli {
    /// Tournament config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed; seeds the bootstrap for `rate`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Trace root; overrides the config's output_dir.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Overrides max_parallel_matches.
    #[arg(long, global = true)]
    pub parallel: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Play the configured round-robin, resuming where a previous run stopped.
    Run {
        #[arg(long)]
        rounds: Option<u32>,
    },
    /// Fit ratings with bootstrap intervals.
    Rate {
        /// Only rate this game.
        #[arg(long)]
        game: Option<GameId>,
        /// Trace directory or outcome CSV; defaults to the output directory.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
        resamples: usize,
        /// Where to write ratings.csv and ratings.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write cumulative, outcome, move-distribution and delta tables.
    Report {
        /// Variant pair `a=b`, reported as rating(a) - rating(b). Repeatable.
        #[arg(long = "pair", value_parser = parse_pair)]
        pairs: Vec<(String, String)>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok((a.to_string(), b.to_string())),
        _ => Err(format!("expected VARIANT_A=VARIANT_B, got '{s}'")),
    }
}

/// Parse `args` (including the program name) and execute; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    match &cli.command {
        Command::Run { rounds } => cmd_run(&cli, *rounds, out, err),
        Command::Rate {
            game,
            input,
            resamples,
            out: dest,
        } => rate(&cli, *game, input.as_deref(), *resamples, dest.as_deref(), out, err),
        Command::Report { pairs, out: dest } => report(&cli, pairs, dest.as_deref(), out, err),
    }
}

fn load_config(cli: &Cli) -> Result<Option<TournamentConfig>, String> {
    cli.config
        .as_deref()
        .map(TournamentConfig::load)
        .transpose()
        .map_err(|e| e.to_string())
}

fn model_players(config: &TournamentConfig) -> impl Iterator<Item = &PlayerSpec> {
    config
        .players
        .iter()
        .chain(&config.judges)
        .filter(|p| p.is_model())
}

fn cmd_run(cli: &Cli, rounds: Option<u32>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let mut config = match load_config(cli) {
        Ok(Some(c)) => c,
        Ok(None) => {
            let _ = writeln!(err, "invalid config field `config`: run needs --config");
            return EXIT_CONFIG;
        }
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dir) = &cli.output_dir {
        config.output_dir = dir.clone();
    }
    if let Some(p) = cli.parallel {
        config.max_parallel_matches = p;
    }
    if let Some(r) = rounds {
        config.rounds = r;
    }
    if let Err(e) = config.validate() {
        let _ = writeln!(err, "{e}");
        return EXIT_CONFIG;
    }
    for player in model_players(&config) {
        if let Backend::Model { endpoint, .. } = &player.backend {
            if let Err(e) = preflight(endpoint) {
                let _ = writeln!(err, "preflight failed for player '{}': {e}", player.id);
                return EXIT_PREFLIGHT;
            }
        }
    }

    let mut progress = |report: &crate::tournament::MatchReport, done: usize, total: usize| {
        let _ = writeln!(out, "{}", report.progress_line(done, total));
    };
    let result = run_tournament(
        &config,
        RunOptions {
            on_match: Some(&mut progress),
            ..RunOptions::default()
        },
    );
    let run = match result {
        Ok(run) => run,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_FAILURE;
        }
    };
    let store = match MatchRecordStore::load(&config.output_dir) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "cannot read traces back: {e}");
            return EXIT_FAILURE;
        }
    };
    let agg = aggregate_outcomes(&store, config.game_id);
    let _ = writeln!(
        out,
        "{} matches scheduled, {} played, {} already complete, {} aborted",
        run.schedule_size,
        run.executed.len(),
        run.skipped.len(),
        agg.aborted.len()
    );
    for c in &agg.corrupt {
        let _ = writeln!(err, "corrupt trace {}:{}: {}", c.file.display(), c.line, c.error);
    }
    for id in &agg.aborted {
        let _ = writeln!(err, "unrecovered abort: {id}");
    }
    if agg.corrupt.is_empty() && agg.aborted.is_empty() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

fn trace_root(cli: &Cli, config: Option<&TournamentConfig>) -> Option<PathBuf> {
    cli.output_dir
        .clone()
        .or_else(|| config.map(|c| c.output_dir.clone()))
}

fn report_failure(e: ReportError, err: &mut dyn Write) -> i32 {
    let _ = writeln!(err, "{e}");
    EXIT_FAILURE
}

fn rate(
    cli: &Cli,
    game: Option<GameId>,
    input: Option<&Path>,
    resamples: usize,
    dest: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let config = match load_config(cli) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_CONFIG;
        }
    };
    let Some(input) = input.map(Path::to_path_buf).or_else(|| trace_root(cli, config.as_ref())) else {
        let _ = writeln!(err, "invalid config field `output_dir`: rate needs --input, --output-dir or --config");
        return EXIT_CONFIG;
    };
    let base = if input.is_file() {
        input.parent().map(Path::to_path_buf).unwrap_or_default()
    } else {
        input.clone()
    };
    let opts = RateOptions {
        game,
        bootstrap: BootstrapConfig {
            resamples,
            level: DEFAULT_LEVEL,
            seed: cli.seed.or(config.as_ref().map(|c| c.seed)).unwrap_or(0),
        },
        out_dir: dest.map(Path::to_path_buf).unwrap_or_else(|| base.join("ratings")),
    };
    match cmd_rate(&input, &opts) {
        Ok(result) => {
            for w in &result.warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            for (g, table) in &result.tables {
                for (rank, (model, rating)) in table.ranked().iter().enumerate() {
                    let (lo, hi) = table.ci[model];
                    let _ = writeln!(out, "{g} {:>2}. {model:<24} {rating:8.1}  [{lo:.1}, {hi:.1}]", rank + 1);
                }
            }
            for f in &result.files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
            EXIT_OK
        }
        Err(e) => report_failure(e, err),
    }
}

fn report(
    cli: &Cli,
    pairs: &[(String, String)],
    dest: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let config = match load_config(cli) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_CONFIG;
        }
    };
    let Some(root) = trace_root(cli, config.as_ref()) else {
        let _ = writeln!(err, "invalid config field `output_dir`: report needs --output-dir or --config");
        return EXIT_CONFIG;
    };
    let mut variant_pairs: Vec<(String, String)> = config.map(|c| c.variant_pairs).unwrap_or_default();
    variant_pairs.extend(pairs.iter().cloned());
    let opts = ReportOptions {
        variant_pairs,
        out_dir: dest.map(Path::to_path_buf).unwrap_or_else(|| root.join("report")),
    };
    match cmd_report(&root, &opts) {
        Ok(result) => {
            for w in &result.warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            for f in &result.files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
            EXIT_OK
        }
        Err(e) => report_failure(e, err),
    }
}
