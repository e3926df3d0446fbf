//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Every tolerance and sample size is pinned below.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use gamearena_core::engine::{run_match_with_agents, GameId, MatchConfig, MatchSpec, Reason, Winner};
use gamearena_core::games::cards::{poker_rank_hand, Card};
use gamearena_core::games::challenge::mathquiz::MathQuizHooks;
use gamearena_core::games::challenge::{run_verification, VerificationTarget};
use gamearena_core::games::chess::{perft, ChessState, Position, START_FEN};
use gamearena_core::games::debate::judge_role;
use gamearena_core::games::dice::{dice_resolve_call, Bid};
use gamearena_core::games::poker::{poker_step, PokerAction, PokerState, PokerStep};
use gamearena_core::games::{new_game, GameOptions};
use gamearena_core::players::{Agent, FnAgent};
use gamearena_core::ratings::{
    bootstrap_ci, fit_bradley_terry, mm_fit, BootstrapConfig, OutcomeMatrix, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use gamearena_core::report::{
    cmd_rate, cmd_report, RateOptions, ReportOptions, CUMULATIVE_CSV, MOVES_CSV, MOVES_HEADER, OUTCOMES_CSV,
    OUTCOMES_HEADER, RATINGS_CSV, RATINGS_HEADER, RATINGS_JSON, REPORT_JSON,
};
use gamearena_core::trace::{EventKind, FixedClock, MemorySink};
use gamearena_core::tournament::{build_round_robin, run_tournament, RunOptions, TournamentConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{
    best_of_seven, bt_grid_oracle, dice_oracle, leakage_scan, oracle_perft, runner_command, seven_game_configs,
    strongly_connected, tree_snapshot,
};

// Chess.
const KNIGHT_FORK_GAME: [&str; 21] = [
    "Nf3", "e5", "d4", "exd4", "Nxd4", "Nf6", "Nc3", "Bc5", "Nb3", "a6", "Be3", "b5", "Bxc5", "Qe7", "Nd4", "Nc6",
    "Nf5", "Qe5", "Qd2", "Na5", "Nd6+",
];
const KNIGHT_FORK_FEN: &str = "r1b1k2r/2pp1ppp/p2N1n2/npB1q3/8/2N5/PPPQPPPP/R3KB1R b KQkq - 8 11";
const START_PERFT: [u64; 3] = [20, 400, 8902];
const CHESS_TIME_LIMIT: Duration = Duration::from_secs(10);

// Ratings.
const THREE_TO_ONE_TOL: f64 = 1e-6;
const GRID_MATRICES: usize = 100;
const GRID_MAX_MODELS: usize = 4;
const GRID_MAX_CELL: u64 = 4;
const GRID_TOL: f64 = 1e-3;
const MM_MONOTONE_SLACK: f64 = 1e-12;

// Verification.
const GUESS_TRIALS: u64 = 100_000;
const GUESS_RANGE: i64 = 1000;
const GUESS_TARGET: i64 = 439;
const SIGMA_BOUND: f64 = 3.0;

// Rule oracles.
const POKER_DRAWS: u64 = 10_000;
const DICE_CASES: u64 = 1_000;
const DICE_PER_PLAYER: usize = 5;
const CHIP_TOTAL: u32 = 2000;
const CHIP_HANDS: u32 = 10;
const SMALL_BET: u32 = 40;

// Tournaments.
const TOURNAMENT_SEED: u64 = 42;
const TOURNAMENT_TIME_LIMIT: Duration = Duration::from_secs(300);

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn chess_rules() -> Result<String, String> {
    let start = Instant::now();
    let replayed = ChessState::replay(&KNIGHT_FORK_GAME).map_err(|e| e.to_string())?;
    ensure(replayed.fen == KNIGHT_FORK_FEN, || format!("replay reached {}", replayed.fen))?;
    let p = Position::from_fen(START_FEN).map_err(|e| e.to_string())?;
    for (depth, known) in (1..).zip(START_PERFT) {
        let ours = perft(&p, depth);
        let oracle = oracle_perft(START_FEN, depth);
        ensure(ours == known && oracle == known, || format!("perft({depth}) = {ours}, oracle {oracle}, expected {known}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < CHESS_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("21-ply replay matches, perft 1..3 = {START_PERFT:?}, {elapsed:.2?}"))
}

fn random_matrix(rng: &mut ChaCha8Rng) -> OutcomeMatrix {
    let n = rng.gen_range(2..=GRID_MAX_MODELS);
    let mut m = OutcomeMatrix::new((0..n).map(|i| format!("m{i}")).collect());
    for i in 0..n {
        for j in 0..n {
            if i != j {
                m.wins[i][j] = rng.gen_range(0..=GRID_MAX_CELL);
            }
        }
    }
    m
}

fn bradley_terry() -> Result<String, String> {
    let mut m = OutcomeMatrix::new(vec!["a".into(), "b".into()]);
    m.add_wins("a", "b", 3).map_err(|e| e.to_string())?;
    m.add_wins("b", "a", 1).map_err(|e| e.to_string())?;
    let t = fit_bradley_terry(&m, DEFAULT_TOL, DEFAULT_MAX_ITER);
    let gap = t.ratings["a"] - t.ratings["b"];
    let expected = 400.0 * 3f64.log10();
    ensure((gap - expected).abs() <= THREE_TO_ONE_TOL, || format!("3-1 gap {gap}, expected {expected}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut checked, mut worst, mut worst_mm) = (0, 0f64, 0f64);
    while checked < GRID_MATRICES {
        let m = random_matrix(&mut rng);
        let w = m.effective_wins();
        if !strongly_connected(&w) {
            continue;
        }
        checked += 1;
        let t = fit_bradley_terry(&m, DEFAULT_TOL, DEFAULT_MAX_ITER);
        let oracle = bt_grid_oracle(&w);
        for (k, model) in m.models.iter().enumerate() {
            worst = worst.max((t.log_strength(model).unwrap() - oracle[k]).abs());
        }
        let fit = mm_fit(&w, DEFAULT_TOL, DEFAULT_MAX_ITER);
        for pair in fit.log_likelihood.windows(2) {
            worst_mm = worst_mm.max(pair[0] - pair[1]);
        }
    }
    ensure(worst <= GRID_TOL, || format!("max deviation from grid oracle {worst:e}"))?;
    ensure(worst_mm <= MM_MONOTONE_SLACK, || format!("log-likelihood decreased by {worst_mm:e}"))?;

    let results = m.to_results();
    let ci = bootstrap_ci(&results, &t, &BootstrapConfig { resamples: 50, level: 0.95, seed: 1 });
    let (lo, hi) = ci["a"];
    ensure(lo <= t.ratings["a"] && t.ratings["a"] <= hi, || format!("interval [{lo}, {hi}] misses rating"))?;
    Ok(format!(
        "3-1 gap {gap:.9}; {GRID_MATRICES} matrices within {worst:.1e} of grid oracle; MM monotone"
    ))
}

fn verification() -> Result<String, String> {
    let target = VerificationTarget::integer(GUESS_TARGET);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut successes = 0u64;
    for _ in 0..GUESS_TRIALS {
        let guess = rng.gen_range(1..=GUESS_RANGE);
        let mut agent = FnAgent::new(move |turn| {
            Ok(if turn.request.verification {
                format!("Answer: {guess}")
            } else {
                "Question: Pick a whole number between one and one thousand.".to_string()
            })
        });
        if run_verification(&mut agent, &target, &mut MathQuizHooks, 5).is_ok() {
            successes += 1;
        }
    }
    let p = 1.0 / GUESS_RANGE as f64;
    let n = GUESS_TRIALS as f64;
    let rate = successes as f64 / n;
    let sigma = (p * (1.0 - p) / n).sqrt();
    ensure((rate - p).abs() <= SIGMA_BOUND * sigma, || {
        format!("uniform guessing verified {rate:.6}, expected {p} +/- {:.6}", SIGMA_BOUND * sigma)
    })?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let configs: Vec<TournamentConfig> = seven_game_configs(dir.path(), TOURNAMENT_SEED)
        .into_iter()
        .filter(|c| matches!(c.game_id, GameId::Mathquiz | GameId::Pyjail))
        .collect();
    for c in &configs {
        run_tournament(c, RunOptions::default()).map_err(|e| e.to_string())?;
    }
    let scan = leakage_scan(&configs);
    ensure(scan.leaks.is_empty(), || format!("{} self-solve views show the target", scan.leaks.len()))?;
    ensure(scan.scanned > 0, || "no self-solve views were traced".into())?;
    let pyjail = if configs.iter().any(|c| c.game_id == GameId::Pyjail) {
        "mathquiz+pyjail"
    } else {
        "mathquiz only, pyjail SKIPPED: no python3 runner"
    };
    Ok(format!(
        "uniform guess rate {rate:.5} within {SIGMA_BOUND}σ of {p}; 0 leaks in {} self-solve views ({pyjail})",
        scan.scanned
    ))
}

fn rule_oracles() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let deck = Card::deck();
    for _ in 0..POKER_DRAWS {
        let cards: Vec<Card> = deck.choose_multiple(&mut rng, 7).copied().collect();
        let ours = poker_rank_hand(&cards).map_err(|e| e.to_string())?;
        let oracle = best_of_seven(&cards.iter().map(|c| (c.rank, c.suit as u8)).collect::<Vec<_>>());
        ensure((ours.category as u8, ours.tiebreak.clone()) == oracle, || format!("{cards:?}: {ours:?} vs {oracle:?}"))?;
    }

    for _ in 0..DICE_CASES {
        let a: Vec<u8> = (0..DICE_PER_PLAYER).map(|_| rng.gen_range(1..=6)).collect();
        let b: Vec<u8> = (0..DICE_PER_PLAYER).map(|_| rng.gen_range(1..=6)).collect();
        let bid = Bid {
            quantity: rng.gen_range(1..=2 * DICE_PER_PLAYER as u32),
            face: rng.gen_range(1..=6),
        };
        let bidder = if rng.gen_bool(0.5) { "player_1" } else { "player_2" };
        let hands = BTreeMap::from([("player_1".to_string(), a.clone()), ("player_2".to_string(), b.clone())]);
        let ours = dice_resolve_call(&hands, &bid, bidder);
        let oracle = dice_oracle(&[("player_1", &a), ("player_2", &b)], bid.quantity, bid.face, bidder);
        ensure(ours == oracle, || format!("{a:?} {b:?} {bid:?} by {bidder}: {ours} vs {oracle}"))?;
    }

    let mut state = PokerState::new(5, CHIP_HANDS);
    let mut steps = 0;
    loop {
        ensure(state.chips_in_play() == CHIP_TOTAL, || format!("{} chips after {steps} steps", state.chips_in_play()))?;
        // small bets keep both players solvent for every hand
        let actions: Vec<PokerAction> = state
            .sample_actions()
            .into_iter()
            .filter(|a| !matches!(a, PokerAction::Bet(x) | PokerAction::Raise(x) if *x > SMALL_BET))
            .collect();
        let action = *actions.choose(&mut rng).ok_or("no legal poker action")?;
        let role = state.turn.clone();
        steps += 1;
        match poker_step(&state, &role, action).map_err(|e| e.to_string())? {
            PokerStep::Continue(s) => state = s,
            PokerStep::Finished { state: s, .. } => {
                ensure(s.chips_in_play() == CHIP_TOTAL, || format!("{} chips at the end", s.chips_in_play()))?;
                state = s;
                break;
            }
        }
    }
    ensure(state.results.len() == CHIP_HANDS as usize, || format!("match ended after {} hands", state.results.len()))?;
    Ok(format!(
        "{POKER_DRAWS} seven-card ranks, {DICE_CASES} call resolutions, {CHIP_TOTAL} chips held over {steps} steps of {CHIP_HANDS} hands"
    ))
}

fn run_all(configs: &[TournamentConfig], opts: impl Fn() -> RunOptions<'static>) -> Result<usize, String> {
    let mut played = 0;
    for c in configs {
        let run = run_tournament(c, opts()).map_err(|e| e.to_string())?;
        ensure(run.aborted().count() == 0, || format!("{} aborted matches in {}", run.aborted().count(), c.game_id))?;
        played += run.executed.len();
    }
    Ok(played)
}

fn determinism_and_resume() -> Result<String, String> {
    let start = Instant::now();
    let (a, b, half) = (tempdir()?, tempdir()?, tempdir()?);
    let games = seven_game_configs(a.path(), TOURNAMENT_SEED).len();
    let played = run_all(&seven_game_configs(a.path(), TOURNAMENT_SEED), RunOptions::default)?;
    run_all(&seven_game_configs(b.path(), TOURNAMENT_SEED), RunOptions::default)?;
    let (ta, tb) = (tree_snapshot(a.path()), tree_snapshot(b.path()));
    ensure(!ta.is_empty() && ta == tb, || "trace trees differ between identical runs".into())?;

    let configs = seven_game_configs(half.path(), TOURNAMENT_SEED);
    let mut remainder_ok = true;
    for c in &configs {
        let total = build_round_robin(c).len();
        let first = run_tournament(c, RunOptions { max_new_matches: Some(total / 2), ..RunOptions::default() })
            .map_err(|e| e.to_string())?;
        let second = run_tournament(c, RunOptions::default()).map_err(|e| e.to_string())?;
        remainder_ok &= first.executed.len() == total / 2
            && second.skipped.len() == total / 2
            && second.executed.len() == total - total / 2;
    }
    ensure(remainder_ok, || "resume did not run exactly the remaining matches".into())?;
    ensure(tree_snapshot(half.path()) == ta, || "resumed tree differs from an uninterrupted run".into())?;
    let elapsed = start.elapsed();
    ensure(elapsed < TOURNAMENT_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    let skipped = if runner_command().is_none() { ", pyjail SKIPPED: no python3 runner" } else { "" };
    Ok(format!(
        "{played} matches over {games} games byte-identical twice; resume ran the remainder only; {elapsed:.1?}{skipped}"
    ))
}

fn tempdir() -> Result<tempfile::TempDir, String> {
    tempfile::tempdir().map_err(|e| e.to_string())
}

fn retry_semantics() -> Result<String, String> {
    let mut seen = Vec::new();
    for game in GameId::ALL {
        let mut options = GameOptions::default();
        let mut roles: Vec<String> = game.roles().iter().map(|r| r.to_string()).collect();
        match game {
            GameId::Debate => {
                options.judges = vec!["j".into()];
                roles.push(judge_role("j"));
            }
            GameId::Pyjail => match runner_command() {
                Some(cmd) => options.sandbox_command = cmd,
                None => continue,
            },
            _ => {}
        }
        let expected = match game {
            GameId::Debate | GameId::Gandalf | GameId::LiarsDice => 3,
            _ => 5,
        };
        let config = MatchConfig::for_game(game);
        ensure(config.max_player_attempts == expected, || format!("{game} budget {}", config.max_player_attempts))?;

        let g = new_game(game, 1, &options).map_err(|e| e.to_string())?;
        let mut agents: BTreeMap<String, Box<dyn Agent>> = BTreeMap::new();
        for role in &roles {
            agents.insert(role.clone(), Box::new(FnAgent::new(|_| Ok("no idea".to_string()))));
        }
        let ids = roles.iter().map(|r| (r.clone(), r.clone())).collect();
        let spec = MatchSpec { match_id: "retry", seed: 1, config: &config };
        let mut sink = MemorySink::new();
        let outcome = run_match_with_agents(g, agents, ids, &spec, &mut sink, &FixedClock(0)).map_err(|e| e.to_string())?;
        let attempts: Vec<_> = sink.events.iter().filter(|e| e.event_kind == EventKind::ActionAttempt).collect();
        ensure(attempts.len() as u32 == expected, || format!("{game}: {} attempts", attempts.len()))?;
        let culprit = attempts[0].role.clone();
        ensure(attempts.iter().zip(1..).all(|(e, k)| e.role == culprit && e.attempt == k && !e.valid), || {
            format!("{game}: attempt numbering or roles wrong")
        })?;
        let reason = match game {
            GameId::Mathquiz | GameId::Pyjail => Reason::InvalidChallengeForfeit,
            _ => Reason::InvalidMoveForfeit,
        };
        let winner = Winner::role(game.opponent_of(&culprit).unwrap_or_default());
        ensure(outcome.reason == reason && outcome.winner == winner, || format!("{game}: {outcome:?}"))?;
        seen.push(format!("{game}={expected}"));
    }
    late_acceptance()?;
    let skipped = if runner_command().is_none() { "; pyjail SKIPPED: no python3 runner" } else { "" };
    Ok(format!("forfeit after exactly N invalid attempts: {}{skipped}", seen.join(" ")))
}

/// White is accepted on attempt 5 of 5 and 3 of 3 under a tightened budget.
fn late_acceptance() -> Result<(), String> {
    for budget in [3u32, 5] {
        let g = new_game(GameId::Chess, 1, &GameOptions::default()).map_err(|e| e.to_string())?;
        let mut calls = 0;
        let white = FnAgent::new(move |_| {
            calls += 1;
            Ok(if calls < budget { "Move: e5" } else { "Move: e4" }.to_string())
        });
        let black = FnAgent::new(|_| Ok("Move: e4".to_string()));
        let agents: BTreeMap<String, Box<dyn Agent>> =
            BTreeMap::from([("white".into(), Box::new(white) as Box<dyn Agent>), ("black".into(), Box::new(black) as Box<dyn Agent>)]);
        let ids = BTreeMap::from([("white".into(), "w".into()), ("black".into(), "b".into())]);
        let config = MatchConfig { max_player_attempts: budget };
        let spec = MatchSpec { match_id: "late", seed: 1, config: &config };
        let mut sink = MemorySink::new();
        run_match_with_agents(g, agents, ids, &spec, &mut sink, &FixedClock(0)).map_err(|e| e.to_string())?;
        let accepted: Vec<_> = sink.events.iter().filter(|e| e.event_kind == EventKind::ActionAccepted).collect();
        ensure(accepted.len() == 1 && accepted[0].attempt == budget, || format!("budget {budget}: {accepted:?}"))?;
    }
    Ok(())
}

fn read_all(dir: &Path, files: &[&str]) -> Result<Vec<Vec<u8>>, String> {
    files.iter().map(|f| fs::read(dir.join(f)).map_err(|e| format!("{f}: {e}"))).collect()
}

fn check_csv(bytes: &[u8], header: &str, numeric: &[usize]) -> Result<usize, String> {
    let text = String::from_utf8(bytes.to_vec()).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    ensure(lines.next() == Some(header), || format!("header is not {header}"))?;
    let width = header.split(',').count();
    let mut rows = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        ensure(cells.len() == width, || format!("row `{line}` has {} cells", cells.len()))?;
        for &i in numeric {
            cells[i].parse::<f64>().map_err(|_| format!("cell {i} of `{line}` is not numeric"))?;
        }
        rows += 1;
    }
    Ok(rows)
}

fn reports() -> Result<String, String> {
    let dir = tempdir()?;
    let configs: Vec<TournamentConfig> = seven_game_configs(dir.path(), TOURNAMENT_SEED)
        .into_iter()
        .filter(|c| c.game_id == GameId::Chess)
        .collect();
    run_all(&configs, RunOptions::default)?;

    let rate_opts = RateOptions {
        game: None,
        bootstrap: BootstrapConfig { resamples: 100, level: 0.95, seed: 3 },
        out_dir: dir.path().join("ratings"),
    };
    let rated = cmd_rate(dir.path(), &rate_opts).map_err(|e| e.to_string())?;
    let rating_files = [RATINGS_CSV, RATINGS_JSON];
    let first = read_all(&rate_opts.out_dir, &rating_files)?;
    let rows = check_csv(&first[0], RATINGS_HEADER, &[1, 3, 4, 5, 6, 7])?;
    ensure(rows == 4, || format!("{rows} rating rows"))?;
    serde_json::from_slice::<serde_json::Value>(&first[1]).map_err(|e| e.to_string())?;
    cmd_rate(dir.path(), &rate_opts).map_err(|e| e.to_string())?;
    ensure(read_all(&rate_opts.out_dir, &rating_files)? == first, || "ratings not regenerable".into())?;

    let report_opts = ReportOptions { variant_pairs: Vec::new(), out_dir: dir.path().join("report") };
    let report = cmd_report(dir.path(), &report_opts).map_err(|e| e.to_string())?;
    let report_files = [CUMULATIVE_CSV, OUTCOMES_CSV, MOVES_CSV, REPORT_JSON];
    let first = read_all(&report_opts.out_dir, &report_files)?;
    check_csv(&first[1], OUTCOMES_HEADER, &[5])?;
    check_csv(&first[2], MOVES_HEADER, &[2, 3])?;
    serde_json::from_slice::<serde_json::Value>(&first[3]).map_err(|e| e.to_string())?;
    cmd_report(dir.path(), &report_opts).map_err(|e| e.to_string())?;
    ensure(read_all(&report_opts.out_dir, &report_files)? == first, || "report not regenerable".into())?;

    let cumulative: Vec<&str> = report.bundle.cumulative.rows.iter().map(|r| r.model.as_str()).collect();
    let single = rated.tables["chess"].ranked();
    let single: Vec<&str> = single.iter().map(|(m, _)| m.as_str()).collect();
    ensure(cumulative == single, || format!("cumulative {cumulative:?} vs single-game {single:?}"))?;
    Ok(format!("ratings and report files schema-valid and byte-identical on regeneration; ordering {single:?}"))
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 7] = [
        ("chess rules: replay, perft, runtime", chess_rules),
        ("Bradley-Terry fit: closed form, grid oracle, monotone MM", bradley_terry),
        ("challenge verification: guess rate, leakage", verification),
        ("rule oracles: hand ranks, call resolution, chip conservation", rule_oracles),
        ("determinism and resume", determinism_and_resume),
        ("retry budgets and forfeits", retry_semantics),
        ("ratings and report outputs", reports),
    ];
    let mut failed = 0;
    for (k, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS [{}] {name} ({secs:.1}s): {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name} ({secs:.1}s): {why}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
