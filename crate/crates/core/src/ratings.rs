//! Bradley-Terry strengths from pairwise outcomes.
//!
//! Strengths are fitted by minorization-maximization with draws folded in as
//! half a win to each side. The fitted vector is anchored so that the
//! geometric mean of `π` is 1 within every connected component; the display
//! rating is `1000 + 400·log10(π)`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Read;
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::players::mix_seed;

pub const BASE_RATING: f64 = 1000.0;
pub const RATING_SCALE: f64 = 400.0;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Degenerate strengths sit this far from the rest of their component.
pub const DEGENERATE_RATIO: f64 = 1e6;
pub const DEFAULT_RESAMPLES: usize = 200;
pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Debug, Error)]
pub enum RatingsError {
    #[error("model '{0}' cannot play itself")]
    SelfPlay(String),
    #[error("outcome CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("no outcomes to rate")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairOutcome {
    AWins,
    BWins,
    Draw,
}

/// One non-aborted match reduced to its two model ids and result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairResult {
    pub model_a: String,
    pub model_b: String,
    pub outcome: PairOutcome,
}

impl PairResult {
    pub fn new(a: &str, b: &str, outcome: PairOutcome) -> Self {
        PairResult {
            model_a: a.to_string(),
            model_b: b.to_string(),
            outcome,
        }
    }
}

/// `wins[i][j]` counts i beating j; `draws` is symmetric; diagonals are zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeMatrix {
    pub models: Vec<String>,
    pub wins: Vec<Vec<u64>>,
    pub draws: Vec<Vec<u64>>,
}

impl OutcomeMatrix {
    pub fn new(models: Vec<String>) -> Self {
        let n = models.len();
        OutcomeMatrix {
            models,
            wins: vec![vec![0; n]; n],
            draws: vec![vec![0; n]; n],
        }
    }

    pub fn index_of(&self, model: &str) -> Option<usize> {
        self.models.iter().position(|m| m == model)
    }

    /// Index of `model`, appending it if unseen.
    pub fn ensure_model(&mut self, model: &str) -> usize {
        if let Some(i) = self.index_of(model) {
            return i;
        }
        self.models.push(model.to_string());
        for row in self.wins.iter_mut().chain(self.draws.iter_mut()) {
            row.push(0);
        }
        let n = self.models.len();
        self.wins.push(vec![0; n]);
        self.draws.push(vec![0; n]);
        n - 1
    }

    pub fn add_wins(&mut self, winner: &str, loser: &str, count: u64) -> Result<(), RatingsError> {
        if winner == loser {
            return Err(RatingsError::SelfPlay(winner.to_string()));
        }
        let i = self.ensure_model(winner);
        let j = self.ensure_model(loser);
        self.wins[i][j] += count;
        Ok(())
    }

    pub fn add_draws(&mut self, a: &str, b: &str, count: u64) -> Result<(), RatingsError> {
        if a == b {
            return Err(RatingsError::SelfPlay(a.to_string()));
        }
        let i = self.ensure_model(a);
        let j = self.ensure_model(b);
        self.draws[i][j] += count;
        self.draws[j][i] += count;
        Ok(())
    }

    pub fn record(&mut self, r: &PairResult) -> Result<(), RatingsError> {
        match r.outcome {
            PairOutcome::AWins => self.add_wins(&r.model_a, &r.model_b, 1),
            PairOutcome::BWins => self.add_wins(&r.model_b, &r.model_a, 1),
            PairOutcome::Draw => self.add_draws(&r.model_a, &r.model_b, 1),
        }
    }

    /// Matrix over `models` (in that order) plus any model first seen in `results`.
    pub fn from_results(models: &[String], results: &[PairResult]) -> Result<Self, RatingsError> {
        let mut m = OutcomeMatrix::new(models.to_vec());
        for r in results {
            m.record(r)?;
        }
        Ok(m)
    }

    /// One [`PairResult`] per counted game, in a fixed order.
    pub fn to_results(&self) -> Vec<PairResult> {
        let mut out = Vec::new();
        let n = self.models.len();
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (&self.models[i], &self.models[j]);
                for _ in 0..self.wins[i][j] {
                    out.push(PairResult::new(a, b, PairOutcome::AWins));
                }
                if i < j {
                    for _ in 0..self.draws[i][j] {
                        out.push(PairResult::new(a, b, PairOutcome::Draw));
                    }
                }
            }
        }
        out
    }

    /// Games between i and j in either direction.
    pub fn games_between(&self, i: usize, j: usize) -> u64 {
        self.wins[i][j] + self.wins[j][i] + self.draws[i][j]
    }

    pub fn games_played(&self, i: usize) -> u64 {
        (0..self.models.len()).map(|j| self.games_between(i, j)).sum()
    }

    pub fn total_games(&self) -> u64 {
        let n = self.models.len();
        let wins: u64 = self.wins.iter().flatten().sum();
        let draws: u64 = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| self.draws[i][j]).sum();
        wins + draws
    }

    /// `ŵ_ij = w_ij + d_ij / 2`.
    pub fn effective_wins(&self) -> Vec<Vec<f64>> {
        let n = self.models.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.wins[i][j] as f64 + self.draws[i][j] as f64 / 2.0)
                    .collect()
            })
            .collect()
    }

    /// Connected components of the comparison graph, over models with at least one game.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.models.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] || self.games_played(start) == 0 {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(i) = queue.pop_front() {
                comp.push(i);
                for (j, visited) in seen.iter_mut().enumerate() {
                    if !*visited && self.games_between(i, j) > 0 {
                        *visited = true;
                        queue.push_back(j);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

/// Fitted strengths, display ratings and intervals, keyed by model id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingTable {
    pub models: Vec<String>,
    pub strengths: BTreeMap<String, f64>,
    pub ratings: BTreeMap<String, f64>,
    pub ci: BTreeMap<String, (f64, f64)>,
    pub games_played: BTreeMap<String, u64>,
    pub flags: BTreeMap<String, Vec<String>>,
    pub components: Vec<Vec<String>>,
    pub iterations: usize,
    pub converged: bool,
}

impl RatingTable {
    pub fn log_strength(&self, model: &str) -> Option<f64> {
        self.strengths.get(model).map(|p| p.ln())
    }

    /// Models by rating descending, ties broken by id.
    pub fn ranked(&self) -> Vec<(String, f64)> {
        let mut rows: Vec<(String, f64)> = self.ratings.iter().map(|(m, r)| (m.clone(), *r)).collect();
        rows.sort_by(|a, b| rank_key(b.1).cmp(&rank_key(a.1)).then_with(|| a.0.cmp(&b.0)));
        rows
    }

    pub fn is_connected(&self) -> bool {
        self.components.len() <= 1
    }

    /// Whether `model` took part in at least one counted game.
    pub fn has_games(&self, model: &str) -> bool {
        self.games_played.get(model).copied().unwrap_or(0) > 0
    }

    pub fn with_ci(mut self, ci: BTreeMap<String, (f64, f64)>) -> Self {
        self.ci = ci;
        self
    }

    fn flag(&mut self, model: &str, note: impl Into<String>) {
        self.flags.entry(model.to_string()).or_default().push(note.into());
    }
}

/// Ratings equal to six decimals rank as ties.
fn rank_key(rating: f64) -> i64 {
    (rating * 1e6).round() as i64
}

pub fn display_rating(log_strength: f64) -> f64 {
    BASE_RATING + RATING_SCALE * log_strength / std::f64::consts::LN_10
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// BT log-likelihood of effective wins `w` at log-strengths `lp`.
pub fn log_likelihood(w: &[Vec<f64>], lp: &[f64]) -> f64 {
    let n = lp.len();
    let mut ll = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j && w[i][j] > 0.0 {
                ll += w[i][j] * (lp[i] - log_add(lp[i], lp[j]));
            }
        }
    }
    ll
}

/// Result of running MM on one identifiable group.
#[derive(Debug, Clone, PartialEq)]
pub struct MmFit {
    /// Log-strengths with mean zero.
    pub log_strength: Vec<f64>,
    /// Log-likelihood at the start point and after every sweep.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Minorization-maximization on effective wins `w`.
///
/// Every model needs a positive win total for the update to stay finite.
pub fn mm_fit(w: &[Vec<f64>], tol: f64, max_iter: usize) -> MmFit {
    let n = w.len();
    let mut lp = vec![0.0; n];
    let mut history = vec![log_likelihood(w, &lp)];
    if n <= 1 {
        return MmFit {
            log_strength: lp,
            log_likelihood: history,
            iterations: 0,
            converged: true,
        };
    }
    let totals: Vec<f64> = (0..n).map(|i| w[i].iter().sum()).collect();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let pi: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
        let mut next: Vec<f64> = (0..n)
            .map(|i| {
                let denom: f64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (w[i][j] + w[j][i]) / (pi[i] + pi[j]))
                    .sum();
                (totals[i] / denom).ln()
            })
            .collect();
        let mean = next.iter().sum::<f64>() / n as f64;
        next.iter_mut().for_each(|l| *l -= mean);
        let delta = next
            .iter()
            .zip(&lp)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        lp = next;
        let ll = log_likelihood(w, &lp);
        let prev = *history.last().expect("history starts non-empty");
        debug_assert!(
            ll >= prev - 1e-9 * (1.0 + prev.abs()),
            "MM sweep {iterations} decreased the log-likelihood: {prev} -> {ll}"
        );
        history.push(ll);
        if delta < tol {
            converged = true;
            break;
        }
    }
    MmFit {
        log_strength: lp,
        log_likelihood: history,
        iterations,
        converged,
    }
}

fn sub_matrix(w: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| idx.iter().map(|&j| w[i][j]).collect()).collect()
}

/// Connected groups of `members` using only games among them.
fn groups_within(w: &[Vec<f64>], members: &[usize]) -> Vec<Vec<usize>> {
    let set: BTreeSet<usize> = members.iter().copied().collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &start in members {
        if !seen.insert(start) {
            continue;
        }
        let mut group = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for &j in &set {
                if w[i][j] + w[j][i] > 0.0 && seen.insert(j) {
                    group.push(j);
                    queue.push_back(j);
                }
            }
        }
        group.sort_unstable();
        out.push(group);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Degenerate {
    Winless,
    Undefeated,
}

/// Peel off models with no wins or no losses among the remaining ones until stable.
fn peel_degenerate(w: &[Vec<f64>], comp: &[usize]) -> (Vec<usize>, Vec<(usize, Degenerate)>) {
    let mut core: Vec<usize> = comp.to_vec();
    let mut peeled = Vec::new();
    loop {
        let mut removed = Vec::new();
        for &i in &core {
            let won: f64 = core.iter().map(|&j| w[i][j]).sum();
            let lost: f64 = core.iter().map(|&j| w[j][i]).sum();
            if won == 0.0 && lost > 0.0 {
                removed.push((i, Degenerate::Winless));
            } else if lost == 0.0 && won > 0.0 {
                removed.push((i, Degenerate::Undefeated));
            }
        }
        if removed.is_empty() {
            return (core, peeled);
        }
        core.retain(|i| !removed.iter().any(|(r, _)| r == i));
        peeled.extend(removed);
    }
}

pub fn fit_bradley_terry(m: &OutcomeMatrix, tol: f64, max_iter: usize) -> RatingTable {
    fit_anchored(m, tol, max_iter, None)
}

/// Fit with each component's mean log-strength set to the mean of `anchor`
/// over the same models (zero when no anchor is given).
pub fn fit_anchored(
    m: &OutcomeMatrix,
    tol: f64,
    max_iter: usize,
    anchor: Option<&BTreeMap<String, f64>>,
) -> RatingTable {
    let n = m.models.len();
    let w = m.effective_wins();
    let mut lp = vec![0.0; n];
    let mut table = RatingTable {
        models: m.models.clone(),
        strengths: BTreeMap::new(),
        ratings: BTreeMap::new(),
        ci: BTreeMap::new(),
        games_played: BTreeMap::new(),
        flags: BTreeMap::new(),
        components: Vec::new(),
        iterations: 0,
        converged: true,
    };
    let components = m.components();
    let degenerate_offset = DEGENERATE_RATIO.ln();

    for comp in &components {
        let (core, peeled) = peel_degenerate(&w, comp);
        let groups = groups_within(&w, &core);
        for group in &groups {
            let fit = mm_fit(&sub_matrix(&w, group), tol, max_iter);
            table.iterations += fit.iterations;
            table.converged &= fit.converged;
            for (k, &i) in group.iter().enumerate() {
                lp[i] = fit.log_strength[k];
            }
        }
        if groups.len() > 1 {
            for &i in &core {
                table.flag(&m.models[i], "weakly identified: no finite joint maximum");
            }
        }
        let core_mean = if core.is_empty() {
            0.0
        } else {
            core.iter().map(|&i| lp[i]).sum::<f64>() / core.len() as f64
        };
        for &(i, kind) in &peeled {
            let (offset, note) = match kind {
                Degenerate::Winless => (-degenerate_offset, "degenerate: winless"),
                Degenerate::Undefeated => (degenerate_offset, "degenerate: undefeated"),
            };
            lp[i] = core_mean + offset;
            table.flag(&m.models[i], note);
        }
        let mean = comp.iter().map(|&i| lp[i]).sum::<f64>() / comp.len() as f64;
        let target = anchor
            .map(|a| {
                comp.iter()
                    .map(|&i| a.get(&m.models[i]).map_or(0.0, |p| p.ln()))
                    .sum::<f64>()
                    / comp.len() as f64
            })
            .unwrap_or(0.0);
        for &i in comp {
            lp[i] += target - mean;
        }
    }

    if components.len() > 1 {
        let total = components.len();
        for (k, comp) in components.iter().enumerate() {
            for &i in comp {
                table.flag(&m.models[i], format!("disconnected: component {} of {total}", k + 1));
            }
        }
    }
    for (i, model) in m.models.iter().enumerate() {
        let games = m.games_played(i);
        if games == 0 {
            table.flag(model, "no games");
        }
        let rating = display_rating(lp[i]);
        table.strengths.insert(model.clone(), lp[i].exp());
        table.ratings.insert(model.clone(), rating);
        table.ci.insert(model.clone(), (rating, rating));
        table.games_played.insert(model.clone(), games);
    }
    table.components = components
        .iter()
        .map(|c| c.iter().map(|&i| m.models[i].clone()).collect())
        .collect();
    table
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            resamples: DEFAULT_RESAMPLES,
            level: DEFAULT_LEVEL,
            seed: 0,
        }
    }
}

fn resample_ratings(
    results: &[PairResult],
    full: &RatingTable,
    seed: u64,
    index: usize,
) -> BTreeMap<String, f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, index as u64]));
    let draw: Vec<PairResult> = (0..results.len())
        .map(|_| results[rng.gen_range(0..results.len())].clone())
        .collect();
    let m = OutcomeMatrix::from_results(&full.models, &draw).expect("resampled results were valid");
    let fit = fit_anchored(&m, DEFAULT_TOL, DEFAULT_MAX_ITER, Some(&full.strengths));
    fit.ratings
        .into_iter()
        .filter(|(model, _)| fit.games_played.get(model).copied().unwrap_or(0) > 0)
        .collect()
}

/// Percentile intervals of display ratings over match-level bootstrap resamples.
///
/// Each interval is widened if needed so that it contains the full-data rating.
pub fn bootstrap_ci(
    results: &[PairResult],
    full: &RatingTable,
    config: &BootstrapConfig,
) -> BTreeMap<String, (f64, f64)> {
    let mut samples: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    if !results.is_empty() && config.resamples > 0 {
        let workers = thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
            .min(config.resamples);
        let per_worker = config.resamples.div_ceil(workers);
        let chunks: Vec<Vec<BTreeMap<String, f64>>> = thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let start = w * per_worker;
                    let end = ((w + 1) * per_worker).min(config.resamples);
                    s.spawn(move || {
                        (start..end)
                            .map(|r| resample_ratings(results, full, config.seed, r))
                            .collect()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("bootstrap worker panicked"))
                .collect()
        });
        for ratings in chunks.into_iter().flatten() {
            for (model, r) in ratings {
                samples.entry(model).or_default().push(r);
            }
        }
    }
    let tail = (1.0 - config.level) / 2.0;
    full.ratings
        .iter()
        .map(|(model, &rating)| {
            let (lo, hi) = match samples.get_mut(model) {
                Some(v) if !v.is_empty() => {
                    v.sort_by(f64::total_cmp);
                    (quantile(v, tail), quantile(v, 1.0 - tail))
                }
                _ => (rating, rating),
            };
            (model.clone(), (lo.min(rating), hi.max(rating)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeRow {
    pub model: String,
    /// Min-shifted rating per game; games the model never played are missing.
    pub contributions: BTreeMap<String, f64>,
    pub absent_from: Vec<String>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeTable {
    pub games: Vec<String>,
    pub rows: Vec<CumulativeRow>,
}

/// Sum of per-game ratings, each game shifted so its lowest rated model scores 0.
pub fn cumulative_ratings(per_game: &BTreeMap<String, RatingTable>) -> CumulativeTable {
    let mut models = BTreeSet::new();
    let mut shifted: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for (game, table) in per_game {
        let present: Vec<(&str, f64)> = table
            .ratings
            .iter()
            .filter(|(m, _)| table.has_games(m))
            .map(|(m, r)| (m.as_str(), *r))
            .collect();
        let floor = present.iter().map(|(_, r)| *r).fold(f64::INFINITY, f64::min);
        shifted.insert(
            game,
            present.iter().map(|(m, r)| (*m, r - floor)).collect(),
        );
        models.extend(present.iter().map(|(m, _)| m.to_string()));
    }
    let mut rows: Vec<CumulativeRow> = models
        .into_iter()
        .map(|model| {
            let mut contributions = BTreeMap::new();
            let mut absent_from = Vec::new();
            for (game, scores) in &shifted {
                match scores.get(model.as_str()) {
                    Some(s) => {
                        contributions.insert(game.to_string(), *s);
                    }
                    None => absent_from.push(game.to_string()),
                }
            }
            let total = contributions.values().sum();
            CumulativeRow {
                model,
                contributions,
                absent_from,
                total,
            }
        })
        .collect();
    rows.sort_by(|a, b| rank_key(b.total).cmp(&rank_key(a.total)).then_with(|| a.model.cmp(&b.model)));
    CumulativeTable {
        games: per_game.keys().cloned().collect(),
        rows,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaCell {
    pub game: String,
    pub variant_a: String,
    pub variant_b: String,
    /// `rating(a) - rating(b)`; `None` when either variant is missing.
    pub delta: Option<f64>,
}

pub fn rating_delta(
    pairs: &[(String, String)],
    per_game: &BTreeMap<String, RatingTable>,
) -> Vec<DeltaCell> {
    let mut out = Vec::new();
    for (a, b) in pairs {
        for (game, table) in per_game {
            let rating = |m: &str| table.has_games(m).then(|| table.ratings[m]);
            let delta = match (rating(a), rating(b)) {
                (Some(ra), Some(rb)) => Some(ra - rb),
                _ => None,
            };
            out.push(DeltaCell {
                game: game.clone(),
                variant_a: a.clone(),
                variant_b: b.clone(),
                delta,
            });
        }
    }
    out
}

#[derive(Debug, Deserialize)]
struct CountRow {
    model_a: String,
    model_b: String,
    wins_a: u64,
    wins_b: u64,
    draws: u64,
}

/// Pre-aggregated outcomes with columns `model_a,model_b,wins_a,wins_b,draws`.
pub fn read_outcome_csv(reader: impl Read) -> Result<OutcomeMatrix, RatingsError> {
    let mut m = OutcomeMatrix::new(Vec::new());
    for row in csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader).deserialize() {
        let row: CountRow = row?;
        m.add_wins(&row.model_a, &row.model_b, row.wins_a)?;
        m.add_wins(&row.model_b, &row.model_a, row.wins_b)?;
        m.add_draws(&row.model_a, &row.model_b, row.draws)?;
    }
    if m.total_games() == 0 {
        return Err(RatingsError::Empty);
    }
    Ok(m)
}
