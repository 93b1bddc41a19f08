//! The expert-advice game: loss bookkeeping, the forecaster and adversary contracts, and
//! the round loop.
//!
//! Feedback is full-information: after each round every expert's loss is revealed and
//! appended to the [`LossHistory`]. The forecaster for round `t` only ever sees the first
//! `t - 1` rows.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{purpose, RngStream};

/// Tolerance for the "probabilities sum to one" invariant.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Index of an expert in `[0, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExpertId(pub usize);

impl ExpertId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for ExpertId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Per-round and cumulative losses of every expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    n: usize,
    per_round: Vec<Vec<f64>>,
    cumulative: Vec<f64>,
}

impl LossHistory {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            per_round: Vec::new(),
            cumulative: vec![0.0; n],
        }
    }

    /// Builds a history by pushing each row in order.
    pub fn from_rows(n: usize, rows: impl IntoIterator<Item = Vec<f64>>) -> Result<Self> {
        let mut h = Self::new(n);
        for row in rows {
            h.push(&row)?;
        }
        Ok(h)
    }

    /// A one-row history whose cumulative losses equal `cumulative`.
    pub fn from_cumulative(cumulative: &[f64]) -> Result<Self> {
        Self::from_rows(cumulative.len(), [cumulative.to_vec()])
    }

    /// Appends one round of losses.
    pub fn push(&mut self, losses: &[f64]) -> Result<()> {
        let t = self.per_round.len() + 1;
        if losses.len() != self.n {
            return Err(Error::Config(format!(
                "round {t}: expected {} losses, got {}",
                self.n,
                losses.len()
            )));
        }
        if let Some(i) = losses.iter().position(|l| !l.is_finite()) {
            return Err(Error::data_at(
                t,
                format!("non-finite loss {} for expert {i}", losses[i]),
            ));
        }
        for (c, l) in self.cumulative.iter_mut().zip(losses) {
            *c += l;
        }
        self.per_round.push(losses.to_vec());
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Rounds elapsed.
    pub fn t(&self) -> usize {
        self.per_round.len()
    }

    pub fn per_round(&self) -> &[Vec<f64>] {
        &self.per_round
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Same per-round losses with `shift` added to every expert in one extra leading row.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        let mut rows = vec![vec![shift; self.n]];
        rows.extend(self.per_round.iter().cloned());
        Self::from_rows(self.n, rows)
    }
}

/// A probability distribution over the experts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceDistribution {
    probs: Vec<f64>,
}

impl ChoiceDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Config("distribution over zero experts".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::data(format!("invalid probability {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::data(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self { probs })
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::data(format!("weights sum to {total}")));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn one_hot(n: usize, i: ExpertId) -> Self {
        let mut probs = vec![0.0; n];
        probs[i.0] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n(&self) -> usize {
        self.probs.len()
    }

    /// `Σ_i probs[i] · losses[i]`.
    pub fn expected(&self, losses: &[f64]) -> f64 {
        self.probs.iter().zip(losses).map(|(p, l)| p * l).sum()
    }

    pub fn max_abs_diff(&self, other: &ChoiceDistribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Inverse-CDF sampling. Only experts with positive mass can be returned.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ExpertId {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                last_positive = i;
                acc += p;
                if u < acc {
                    return ExpertId(i);
                }
            }
        }
        ExpertId(last_positive)
    }
}

/// Everything that happened in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round index.
    pub t: usize,
    pub distribution: ChoiceDistribution,
    pub chosen: ExpertId,
    pub losses: Vec<f64>,
    pub algorithm_cost: f64,
    pub expected_cost: f64,
}

/// Randomness handed to a forecaster for one round.
#[derive(Debug, Clone, Copy)]
pub struct RoundContext {
    /// 1-based round index.
    pub t: usize,
    /// Root stream of the game; use [`RoundContext::stream`] for round-local draws.
    pub game: RngStream,
}

impl RoundContext {
    pub fn stream(&self, purpose: u64) -> RngStream {
        self.game.substream(purpose, self.t as u64)
    }
}

/// An online algorithm that maps the past to a distribution over experts.
pub trait Forecaster: Send + Sync {
    fn label(&self) -> String;

    /// Selection law for the next round given only the past.
    fn distribution(&self, history: &LossHistory, ctx: &RoundContext) -> Result<ChoiceDistribution>;

    /// The expert actually played. Defaults to a draw from `distribution`.
    fn choose(
        &self,
        _history: &LossHistory,
        distribution: &ChoiceDistribution,
        ctx: &RoundContext,
    ) -> Result<ExpertId> {
        Ok(distribution.sample(&mut ctx.stream(purpose::CHOICE).rng()))
    }
}

/// Generates the loss vector of each round. May look at past choices, never at the current
/// round's distribution or randomness.
pub trait LossSource: Send + Sync {
    fn experts(&self) -> usize;

    fn losses(&self, t: usize, past_choices: &[ExpertId], rng: RngStream) -> Result<Vec<f64>>;
}

/// Plays `rounds` rounds of `forecaster` against `adversary`.
pub fn run_game<F, A>(
    forecaster: &F,
    adversary: &A,
    rounds: usize,
    rng: RngStream,
) -> Result<Vec<RoundRecord>>
where
    F: Forecaster + ?Sized,
    A: LossSource + ?Sized,
{
    if rounds == 0 {
        return Err(Error::Config("round count must be at least 1".into()));
    }
    let n = adversary.experts();
    if n == 0 {
        return Err(Error::Config("adversary has zero experts".into()));
    }
    let mut history = LossHistory::new(n);
    let mut choices = Vec::with_capacity(rounds);
    let mut records = Vec::with_capacity(rounds);
    for t in 1..=rounds {
        let ctx = RoundContext { t, game: rng };
        let losses = adversary.losses(t, &choices, rng.substream(purpose::ADVERSARY, t as u64))?;
        if losses.len() != n {
            return Err(Error::Config(format!(
                "round {t}: adversary emitted {} losses for {n} experts",
                losses.len()
            )));
        }
        if let Some(i) = losses.iter().position(|l| !l.is_finite()) {
            return Err(Error::data_at(
                t,
                format!("adversary emitted non-finite loss {} for expert {i}", losses[i]),
            ));
        }
        let distribution = forecaster.distribution(&history, &ctx)?;
        if distribution.n() != n {
            return Err(Error::Config(format!(
                "forecaster {} produced {} probabilities for {n} experts",
                forecaster.label(),
                distribution.n()
            )));
        }
        let chosen = forecaster.choose(&history, &distribution, &ctx)?;
        if chosen.0 >= n {
            return Err(Error::Config(format!("chosen expert {chosen} out of range")));
        }
        let expected_cost = distribution.expected(&losses);
        records.push(RoundRecord {
            t,
            algorithm_cost: losses[chosen.0],
            expected_cost,
            chosen,
            distribution,
            losses: losses.clone(),
        });
        history.push(&losses)?;
        choices.push(chosen);
    }
    Ok(records)
}

/// Per-expert cumulative losses over a run.
pub fn expert_totals(records: &[RoundRecord]) -> Vec<f64> {
    let n = records.first().map_or(0, |r| r.losses.len());
    let mut totals = vec![0.0; n];
    for r in records {
        for (tot, l) in totals.iter_mut().zip(&r.losses) {
            *tot += l;
        }
    }
    totals
}

/// Expected algorithm cost minus the best fixed expert's cost in hindsight.
pub fn regret(records: &[RoundRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::data("regret of an empty run"));
    }
    let expected: f64 = records.iter().map(|r| r.expected_cost).sum();
    let best = expert_totals(records).into_iter().fold(f64::INFINITY, f64::min);
    Ok(expected - best)
}
