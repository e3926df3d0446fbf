//! Independent reference implementations and fixtures shared by the integration tests.
//!
//! None of these call into the library's own move generator, hand evaluator
//! or rating solver; they exist to cross-check them.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gamearena_core::engine::GameId;
use gamearena_core::games::new_game;
use gamearena_core::players::PlayerSpec;
use gamearena_core::trace::{read_trace, EventKind};
use gamearena_core::tournament::{build_round_robin, TournamentConfig};
use serde_json::Value;

// ---------------------------------------------------------------------------
// Chess: a 10x12 mailbox move generator used only for perft counts.

const OFF: i8 = 7;
const PAWN: i8 = 1;
const KNIGHT: i8 = 2;
const BISHOP: i8 = 3;
const ROOK: i8 = 4;
const QUEEN: i8 = 5;
const KING: i8 = 6;

const KNIGHT_D: [i32; 8] = [-21, -19, -12, -8, 8, 12, 19, 21];
const KING_D: [i32; 8] = [-11, -10, -9, -1, 1, 9, 10, 11];
const DIAG_D: [i32; 4] = [-11, -9, 9, 11];
const LINE_D: [i32; 4] = [-10, -1, 1, 10];

fn sq(file: i32, rank: i32) -> usize {
    (21 + file + rank * 10) as usize
}

#[derive(Clone)]
pub struct MailboxBoard {
    cells: [i8; 120],
    /// +1 white, -1 black.
    side: i8,
    /// White short, white long, black short, black long.
    castle: [bool; 4],
    ep: Option<usize>,
}

impl MailboxBoard {
    pub fn from_fen(fen: &str) -> MailboxBoard {
        let parts: Vec<&str> = fen.split_whitespace().collect();
        let mut cells = [OFF; 120];
        for r in 0..8 {
            for f in 0..8 {
                cells[sq(f, r)] = 0;
            }
        }
        for (row, text) in parts[0].split('/').enumerate() {
            let rank = 7 - row as i32;
            let mut file = 0;
            for c in text.chars() {
                if let Some(d) = c.to_digit(10) {
                    file += d as i32;
                    continue;
                }
                let kind = match c.to_ascii_lowercase() {
                    'p' => PAWN,
                    'n' => KNIGHT,
                    'b' => BISHOP,
                    'r' => ROOK,
                    'q' => QUEEN,
                    'k' => KING,
                    _ => panic!("bad piece {c}"),
                };
                cells[sq(file, rank)] = if c.is_ascii_uppercase() { kind } else { -kind };
                file += 1;
            }
        }
        let side = if parts[1] == "w" { 1 } else { -1 };
        let castle = [
            parts[2].contains('K'),
            parts[2].contains('Q'),
            parts[2].contains('k'),
            parts[2].contains('q'),
        ];
        let ep = (parts[3] != "-").then(|| {
            let b = parts[3].as_bytes();
            sq((b[0] - b'a') as i32, (b[1] - b'1') as i32)
        });
        MailboxBoard {
            cells,
            side,
            castle,
            ep,
        }
    }

    fn attacked(&self, target: usize, by: i8) -> bool {
        let t = target as i32;
        let at = |d: i32| self.cells[(t + d) as usize];
        // a pawn of `by` attacks target from one rank behind (relative to its direction)
        let pawn_from: [i32; 2] = if by == 1 { [-11, -9] } else { [11, 9] };
        if pawn_from.iter().any(|&d| at(d) == by * PAWN) {
            return true;
        }
        if KNIGHT_D.iter().any(|&d| at(d) == by * KNIGHT) {
            return true;
        }
        if KING_D.iter().any(|&d| at(d) == by * KING) {
            return true;
        }
        for (dirs, movers) in [(DIAG_D, [BISHOP, QUEEN]), (LINE_D, [ROOK, QUEEN])] {
            for d in dirs {
                let mut s = t + d;
                loop {
                    let p = self.cells[s as usize];
                    if p == 0 {
                        s += d;
                        continue;
                    }
                    if p == by * movers[0] || p == by * movers[1] {
                        return true;
                    }
                    break;
                }
            }
        }
        false
    }

    fn king(&self, side: i8) -> usize {
        (0..120).find(|&i| self.cells[i] == side * KING).expect("king on board")
    }

    /// (from, to, promotion piece kind or 0)
    fn pseudo(&self) -> Vec<(usize, usize, i8)> {
        let mut out = Vec::new();
        let me = self.side;
        for from in 0..120usize {
            let p = self.cells[from];
            if p == OFF || p == 0 || p.signum() != me {
                continue;
            }
            let f = from as i32;
            let enemy = |x: i8| x != OFF && x != 0 && x.signum() == -me;
            match p.abs() {
                PAWN => {
                    let fwd = if me == 1 { 10 } else { -10 };
                    let start_rank = if me == 1 { 1 } else { 6 };
                    let last_rank = if me == 1 { 7 } else { 0 };
                    let rank_of = |s: i32| (s - 21) / 10;
                    let push = |to: i32, out: &mut Vec<(usize, usize, i8)>| {
                        if rank_of(to) == last_rank {
                            for k in [QUEEN, ROOK, BISHOP, KNIGHT] {
                                out.push((from, to as usize, k));
                            }
                        } else {
                            out.push((from, to as usize, 0));
                        }
                    };
                    if self.cells[(f + fwd) as usize] == 0 {
                        push(f + fwd, &mut out);
                        if rank_of(f) == start_rank && self.cells[(f + 2 * fwd) as usize] == 0 {
                            out.push((from, (f + 2 * fwd) as usize, 0));
                        }
                    }
                    for side_step in [-1, 1] {
                        let to = f + fwd + side_step;
                        let target = self.cells[to as usize];
                        if enemy(target) {
                            push(to, &mut out);
                        } else if target == 0 && self.ep == Some(to as usize) {
                            out.push((from, to as usize, 0));
                        }
                    }
                }
                KNIGHT | KING => {
                    let steps = if p.abs() == KNIGHT { KNIGHT_D } else { KING_D };
                    for d in steps {
                        let t = self.cells[(f + d) as usize];
                        if t == 0 || enemy(t) {
                            out.push((from, (f + d) as usize, 0));
                        }
                    }
                }
                kind => {
                    let dirs: Vec<i32> = match kind {
                        BISHOP => DIAG_D.to_vec(),
                        ROOK => LINE_D.to_vec(),
                        _ => DIAG_D.iter().chain(LINE_D.iter()).copied().collect(),
                    };
                    for d in dirs {
                        let mut s = f + d;
                        loop {
                            let t = self.cells[s as usize];
                            if t == 0 {
                                out.push((from, s as usize, 0));
                                s += d;
                                continue;
                            }
                            if enemy(t) {
                                out.push((from, s as usize, 0));
                            }
                            break;
                        }
                    }
                }
            }
        }
        // castling
        let (rank, short_i, long_i) = if me == 1 { (0, 0, 1) } else { (7, 2, 3) };
        let e = sq(4, rank);
        if self.cells[e] == me * KING && !self.attacked(e, -me) {
            if self.castle[short_i]
                && self.cells[sq(7, rank)] == me * ROOK
                && self.cells[sq(5, rank)] == 0
                && self.cells[sq(6, rank)] == 0
                && !self.attacked(sq(5, rank), -me)
                && !self.attacked(sq(6, rank), -me)
            {
                out.push((e, sq(6, rank), 0));
            }
            if self.castle[long_i]
                && self.cells[sq(0, rank)] == me * ROOK
                && self.cells[sq(1, rank)] == 0
                && self.cells[sq(2, rank)] == 0
                && self.cells[sq(3, rank)] == 0
                && !self.attacked(sq(3, rank), -me)
                && !self.attacked(sq(2, rank), -me)
            {
                out.push((e, sq(2, rank), 0));
            }
        }
        out
    }

    fn make(&self, (from, to, promo): (usize, usize, i8)) -> MailboxBoard {
        let mut b = self.clone();
        let p = b.cells[from];
        let me = self.side;
        b.cells[from] = 0;
        if p.abs() == PAWN && Some(to) == self.ep {
            let victim = if me == 1 { to - 10 } else { to + 10 };
            b.cells[victim] = 0;
        }
        b.cells[to] = if promo != 0 { me * promo } else { p };
        if p.abs() == KING && (to as i32 - from as i32).abs() == 2 {
            let (rook_from, rook_to) = if to > from { (from + 3, from + 1) } else { (from - 4, from - 1) };
            b.cells[rook_to] = b.cells[rook_from];
            b.cells[rook_from] = 0;
        }
        b.ep = (p.abs() == PAWN && (to as i32 - from as i32).abs() == 20).then(|| (from + to) / 2);
        for (i, corner, king_home) in [
            (0, sq(7, 0), sq(4, 0)),
            (1, sq(0, 0), sq(4, 0)),
            (2, sq(7, 7), sq(4, 7)),
            (3, sq(0, 7), sq(4, 7)),
        ] {
            if [from, to].contains(&corner) || from == king_home {
                b.castle[i] = false;
            }
        }
        b.side = -me;
        b
    }

    pub fn legal(&self) -> Vec<MailboxBoard> {
        self.pseudo()
            .into_iter()
            .map(|m| self.make(m))
            .filter(|b| !b.attacked(b.king(self.side), b.side))
            .collect()
    }
}

pub fn oracle_perft(fen: &str, depth: u32) -> u64 {
    fn go(b: &MailboxBoard, depth: u32) -> u64 {
        if depth == 0 {
            return 1;
        }
        b.legal().iter().map(|c| go(c, depth - 1)).sum()
    }
    go(&MailboxBoard::from_fen(fen), depth)
}

// ---------------------------------------------------------------------------
// Bradley-Terry: coarse-to-fine grid search over log-strengths.

fn bt_loglik(w: &[Vec<f64>], lp: &[f64]) -> f64 {
    let n = lp.len();
    let mut ll = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j && w[i][j] > 0.0 {
                let p = 1.0 / (1.0 + (lp[j] - lp[i]).exp());
                ll += w[i][j] * p.ln();
            }
        }
    }
    ll
}

/// Maximizer of the BT likelihood of effective wins `w`, as mean-zero log-strengths.
///
/// The first model is pinned at zero; the other coordinates are searched on an
/// 11-point-per-axis grid whose window halves around the best point each level.
pub fn bt_grid_oracle(w: &[Vec<f64>]) -> Vec<f64> {
    const POINTS: usize = 11;
    let n = w.len();
    let dims = n - 1;
    let mut center = vec![0.0; dims];
    let mut radius = 12.0;
    while radius > 1e-7 {
        let step = 2.0 * radius / (POINTS - 1) as f64;
        let mut best = (f64::NEG_INFINITY, center.clone());
        let total = POINTS.pow(dims as u32);
        for code in 0..total {
            let mut c = code;
            let mut lp = vec![0.0; n];
            for d in 0..dims {
                lp[d + 1] = center[d] - radius + step * (c % POINTS) as f64;
                c /= POINTS;
            }
            let ll = bt_loglik(w, &lp);
            if ll > best.0 {
                best = (ll, lp[1..].to_vec());
            }
        }
        center = best.1;
        radius /= 2.0;
    }
    let mut lp = vec![0.0];
    lp.extend(center);
    let mean = lp.iter().sum::<f64>() / n as f64;
    lp.iter().map(|x| x - mean).collect()
}

/// Every model beats and is beaten by someone through a directed path: the MLE is finite.
pub fn strongly_connected(w: &[Vec<f64>]) -> bool {
    let n = w.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let edge = if forward { w[i][j] } else { w[j][i] };
                if edge > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

// ---------------------------------------------------------------------------
// Poker: best five of seven by exhaustive enumeration.

/// (category 0..=8 from high card to straight flush, tiebreak ranks)
pub fn rank_five(cards: &[(u8, u8)]) -> (u8, Vec<u8>) {
    let mut counts: BTreeMap<u8, u8> = BTreeMap::new();
    for &(r, _) in cards {
        *counts.entry(r).or_default() += 1;
    }
    let flush = cards.iter().all(|c| c.1 == cards[0].1);
    let mut distinct: Vec<u8> = counts.keys().copied().collect();
    distinct.sort_unstable_by(|a, b| b.cmp(a));
    let straight_high = if distinct.len() == 5 && distinct[0] - distinct[4] == 4 {
        Some(distinct[0])
    } else if distinct == [14, 5, 4, 3, 2] {
        Some(5)
    } else {
        None
    };
    let mut groups: Vec<(u8, u8)> = counts.iter().map(|(&r, &c)| (c, r)).collect();
    groups.sort_unstable_by(|a, b| b.cmp(a));
    let by_group: Vec<u8> = groups.iter().map(|g| g.1).collect();
    let shape: Vec<u8> = groups.iter().map(|g| g.0).collect();
    match (straight_high, flush, shape.as_slice()) {
        (Some(h), true, _) => (8, vec![h]),
        (_, _, [4, 1]) => (7, by_group),
        (_, _, [3, 2]) => (6, by_group),
        (_, true, _) => (5, by_group),
        (Some(h), false, _) => (4, vec![h]),
        (_, _, [3, 1, 1]) => (3, by_group),
        (_, _, [2, 2, 1]) => (2, by_group),
        (_, _, [2, 1, 1, 1]) => (1, by_group),
        _ => (0, by_group),
    }
}

pub fn best_of_seven(cards: &[(u8, u8)]) -> (u8, Vec<u8>) {
    let mut best = (0, vec![]);
    for skip_a in 0..cards.len() {
        for skip_b in skip_a + 1..cards.len() {
            let five: Vec<(u8, u8)> = cards
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != skip_a && *k != skip_b)
                .map(|(_, c)| *c)
                .collect();
            let r = rank_five(&five);
            if r > best {
                best = r;
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Liar's Dice: who wins a challenge, by counting faces.

pub fn dice_oracle(hands: &[(&str, &[u8])], quantity: u32, face: u8, bidder: &str) -> String {
    let mut count = 0;
    for (_, dice) in hands {
        for d in dice.iter() {
            if *d == face {
                count += 1;
            }
        }
    }
    if count >= quantity {
        bidder.to_string()
    } else {
        hands.iter().find(|(r, _)| *r != bidder).unwrap().0.to_string()
    }
}

// ---------------------------------------------------------------------------
// Filesystem helpers.

pub fn mini_runner() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini_runner.py")
}

/// `python3 mini_runner.py`, if a Python interpreter is available.
pub fn runner_command() -> Option<Vec<String>> {
    let ok = std::process::Command::new("python3")
        .arg("-c")
        .arg("import json, signal, struct")
        .status()
        .map(|s| s.success())
        .unwrap_or(false);
    ok.then(|| vec!["python3".to_string(), mini_runner().display().to_string()])
}

/// Relative path to file contents for every file under `root`.
pub fn tree_snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

// ---------------------------------------------------------------------------
// Tournament fixtures.

/// Four seeded random-legal players in every game under `root`. PyJail is
/// left out when no Python runner is available.
pub fn seven_game_configs(root: &Path, seed: u64) -> Vec<TournamentConfig> {
    let players: Vec<PlayerSpec> = (0..4)
        .map(|k| PlayerSpec::random_legal(&format!("bot-{k}"), 100 + k))
        .collect();
    let runner = runner_command();
    GameId::ALL
        .into_iter()
        .filter(|g| *g != GameId::Pyjail || runner.is_some())
        .map(|game| {
            let mut c = TournamentConfig::new(game, players.clone(), root);
            c.seed = seed;
            c.max_parallel_matches = 4;
            c.fixed_clock_ms = Some(0);
            c.options.chess_move_cap = 40;
            c.options.poker_hands = 5;
            match game {
                GameId::Debate => c.judges = vec![PlayerSpec::random_legal("judge", 9)],
                GameId::Pyjail => c.options.sandbox_command = runner.clone().unwrap(),
                _ => {}
            }
            c
        })
        .collect()
}

/// Locates a `{kind, value}` verification target inside a game snapshot.
fn find_target(v: &Value) -> Option<(String, String)> {
    match v {
        Value::Object(map) => {
            if let (Some(Value::String(kind)), Some(Value::String(value))) = (map.get("kind"), map.get("value")) {
                return Some((kind.clone(), value.clone()));
            }
            map.values().find_map(find_target)
        }
        Value::Array(items) => items.iter().find_map(find_target),
        _ => None,
    }
}

/// Whether `text` shows `target`: whole integer tokens for numeric answers,
/// substrings otherwise.
fn exposes(text: &str, target: &str) -> bool {
    match target.parse::<i64>() {
        Ok(n) => {
            let mut tokens = Vec::new();
            let mut cur = String::new();
            for ch in text.chars().chain(std::iter::once(' ')) {
                if ch.is_ascii_digit() || (ch == '-' && cur.is_empty()) {
                    cur.push(ch);
                } else {
                    if let Ok(v) = cur.parse::<i64>() {
                        tokens.push(v);
                    }
                    cur.clear();
                }
            }
            tokens.contains(&n) || tokens.contains(&-n)
        }
        Err(_) => text.contains(target),
    }
}

pub struct LeakScan {
    /// Self-solve views inspected.
    pub scanned: usize,
    /// `(match_id, view)` for every view that showed its target.
    pub leaks: Vec<(String, String)>,
}

/// Checks every traced self-solve view of the challenge games in `configs`
/// against the target the match was seeded with.
pub fn leakage_scan(configs: &[TournamentConfig]) -> LeakScan {
    let mut scan = LeakScan { scanned: 0, leaks: Vec::new() };
    for c in configs.iter().filter(|c| matches!(c.game_id, GameId::Mathquiz | GameId::Pyjail)) {
        let mut options = c.game_options();
        // the executor is irrelevant to the target
        options.sandbox_command = vec!["true".into()];
        for entry in build_round_robin(c).entries {
            let path = c.game_dir().join(format!("{}.jsonl", entry.match_id));
            let events = read_trace(&std::fs::read_to_string(&path).unwrap()).unwrap();
            let snapshot = new_game(c.game_id, entry.seed, &options).unwrap().snapshot();
            let (_, target) = find_target(&snapshot.payload).expect("challenge games carry a target");
            for e in events.iter().filter(|e| e.event_kind == EventKind::VerificationStep) {
                if e.payload["step"] == "self_solve" {
                    scan.scanned += 1;
                    let view = e.payload["solve_view"].to_string();
                    if exposes(&view, &target) {
                        scan.leaks.push((entry.match_id.clone(), view));
                    }
                }
            }
        }
    }
    scan
}
