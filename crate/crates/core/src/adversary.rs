//! Loss-sequence generators.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::game::{ExpertId, LossSource};
use crate::records::read_loss_rows_file;
use crate::rng::RngStream;

/// The two-expert sequence that makes follow-the-leader pay every round:
/// `(0, 0.5)` in round 1, then `(1, 0)` in even rounds and `(0, 1)` in odd rounds.
pub fn ftl_killer_losses(t: usize, n: usize) -> Result<Vec<f64>> {
    if n != 2 {
        return Err(Error::Config(format!(
            "the FTL-killer sequence has 2 experts, not {n}"
        )));
    }
    match t {
        0 => Err(Error::Domain("rounds are numbered from 1".into())),
        1 => Ok(vec![0.0, 0.5]),
        t if t % 2 == 0 => Ok(vec![1.0, 0.0]),
        _ => Ok(vec![0.0, 1.0]),
    }
}

type RuleFn = dyn Fn(usize, &[ExpertId]) -> Vec<f64> + Send + Sync;

/// A user-supplied adaptive rule. It sees the round index and the past choices only.
#[derive(Clone)]
pub struct AdaptiveRule {
    n: usize,
    name: String,
    rule: Arc<RuleFn>,
}

impl AdaptiveRule {
    pub fn new(
        n: usize,
        name: impl Into<String>,
        rule: impl Fn(usize, &[ExpertId]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            name: name.into(),
            rule: Arc::new(rule),
        }
    }

    /// Charges 1 to whichever expert was played last round, 0 to the others.
    pub fn charge_previous(n: usize) -> Self {
        Self::new(n, "charge-previous", move |_, past| {
            let mut l = vec![0.0; n];
            if let Some(last) = past.last() {
                l[last.0] = 1.0;
            }
            l
        })
    }
}

impl fmt::Debug for AdaptiveRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdaptiveRule")
            .field("n", &self.n)
            .field("name", &self.name)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum Adversary {
    FtlKiller,
    /// Independent 0/1 losses; expert `i` loses with probability `probs[i]`.
    BernoulliIid {
        probs: Vec<f64>,
    },
    /// Independent losses uniform on `[low, high]`.
    UniformIid {
        n: usize,
        low: f64,
        high: f64,
    },
    /// Row `t` of a recorded loss table.
    Replay {
        rows: Vec<Vec<f64>>,
    },
    Adaptive(AdaptiveRule),
}

impl Adversary {
    pub fn bernoulli(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Config(
                "Bernoulli adversary needs at least one expert".into(),
            ));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("Bernoulli probability {p} outside [0, 1]")));
        }
        Ok(Adversary::BernoulliIid { probs })
    }

    pub fn uniform(n: usize, low: f64, high: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config(
                "uniform adversary needs at least one expert".into(),
            ));
        }
        if !(low.is_finite() && high.is_finite() && low <= high) {
            return Err(Error::Config(format!(
                "invalid uniform loss bounds [{low}, {high}]"
            )));
        }
        Ok(Adversary::UniformIid { n, low, high })
    }

    pub fn replay(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(Error::data("replay table is empty"));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::data(format!(
                "replay row {} has {} columns, expected {n}",
                i + 1,
                rows[i].len()
            )));
        }
        Ok(Adversary::Replay { rows })
    }

    /// Loads the `loss_*` columns of a round log.
    pub fn replay_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::replay(read_loss_rows_file(path)?)
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, Adversary::Adaptive(_))
    }

    /// Losses of round `t`; `past_choices` must hold exactly the `t - 1` earlier choices.
    pub fn generate_losses(&self, t: usize, past_choices: &[ExpertId], rng: RngStream) -> Result<Vec<f64>> {
        if t == 0 || past_choices.len() != t - 1 {
            return Err(Error::Config(format!(
                "round {t} needs {} past choices, got {}",
                t.saturating_sub(1),
                past_choices.len()
            )));
        }
        let losses = match self {
            Adversary::FtlKiller => ftl_killer_losses(t, 2)?,
            Adversary::BernoulliIid { probs } => {
                let mut r = rng.rng();
                probs
                    .iter()
                    .map(|&p| if r.random::<f64>() < p { 1.0 } else { 0.0 })
                    .collect()
            }
            Adversary::UniformIid { n, low, high } => {
                let mut r = rng.rng();
                (0..*n).map(|_| low + (high - low) * r.random::<f64>()).collect()
            }
            Adversary::Replay { rows } => rows
                .get(t - 1)
                .cloned()
                .ok_or_else(|| Error::data_at(t, format!("replay exhausted after {} rows", rows.len())))?,
            Adversary::Adaptive(rule) => {
                let l = (rule.rule)(t, past_choices);
                if l.len() != rule.n {
                    return Err(Error::Config(format!(
                        "adaptive rule {} returned {} losses for {} experts",
                        rule.name,
                        l.len(),
                        rule.n
                    )));
                }
                l
            }
        };
        if let Some(i) = losses.iter().position(|l| !l.is_finite()) {
            return Err(Error::data_at(
                t,
                format!("non-finite loss {} for expert {i}", losses[i]),
            ));
        }
        Ok(losses)
    }
}

impl LossSource for Adversary {
    fn experts(&self) -> usize {
        match self {
            Adversary::FtlKiller => 2,
            Adversary::BernoulliIid { probs } => probs.len(),
            Adversary::UniformIid { n, .. } => *n,
            Adversary::Replay { rows } => rows.first().map_or(0, Vec::len),
            Adversary::Adaptive(rule) => rule.n,
        }
    }

    fn losses(&self, t: usize, past_choices: &[ExpertId], rng: RngStream) -> Result<Vec<f64>> {
        self.generate_losses(t, past_choices, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ftl_killer_sequence() {
        assert_eq!(ftl_killer_losses(1, 2).unwrap(), vec![0.0, 0.5]);
        assert_eq!(ftl_killer_losses(2, 2).unwrap(), vec![1.0, 0.0]);
        assert_eq!(ftl_killer_losses(3, 2).unwrap(), vec![0.0, 1.0]);
        assert!(matches!(ftl_killer_losses(1, 3), Err(Error::Config(_))));
        assert!(ftl_killer_losses(0, 2).is_err());
    }

    #[test]
    fn ftl_killer_totals() {
        for m in [1usize, 5, 50] {
            let mut tot = [0.0; 2];
            for t in 1..=2 * m + 1 {
                let l = ftl_killer_losses(t, 2).unwrap();
                tot[0] += l[0];
                tot[1] += l[1];
            }
            assert_eq!(tot, [m as f64, m as f64 + 0.5]);
        }
    }

    fn past(k: usize) -> Vec<ExpertId> {
        vec![ExpertId(0); k]
    }

    #[test]
    fn bernoulli_zero_and_discipline() {
        let a = Adversary::bernoulli(vec![0.0, 0.0]).unwrap();
        for t in 1..20 {
            assert_eq!(
                a.generate_losses(t, &past(t - 1), RngStream::new(t as u64))
                    .unwrap(),
                vec![0.0, 0.0]
            );
        }
        let a = Adversary::bernoulli(vec![0.3, 0.5, 0.9]).unwrap();
        for t in 1..200 {
            let l = a
                .generate_losses(t, &past(t - 1), RngStream::new(1).substream(1, t as u64))
                .unwrap();
            assert!(l.iter().all(|&x| x == 0.0 || x == 1.0));
        }
        assert!(Adversary::bernoulli(vec![1.2]).is_err());
    }

    #[test]
    fn oblivious_kinds_ignore_choices() {
        for a in [
            Adversary::FtlKiller,
            Adversary::bernoulli(vec![0.5, 0.5]).unwrap(),
            Adversary::uniform(2, -1.0, 3.0).unwrap(),
        ] {
            for t in 1..30 {
                let rng = RngStream::new(99).substream(1, t as u64);
                let x = a.generate_losses(t, &vec![ExpertId(0); t - 1], rng).unwrap();
                let y = a.generate_losses(t, &vec![ExpertId(1); t - 1], rng).unwrap();
                assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn replay_round_trip_and_exhaustion() {
        let rows: Vec<Vec<f64>> = (1..=5).map(|t| ftl_killer_losses(t, 2).unwrap()).collect();
        let a = Adversary::replay(rows).unwrap();
        for t in 1..=5 {
            assert_eq!(
                a.generate_losses(t, &past(t - 1), RngStream::new(0)).unwrap(),
                ftl_killer_losses(t, 2).unwrap()
            );
        }
        assert!(matches!(
            a.generate_losses(6, &past(5), RngStream::new(0)),
            Err(Error::Data { round: Some(6), .. })
        ));
    }

    #[test]
    fn adaptive_charges_previous() {
        let a = Adversary::Adaptive(AdaptiveRule::charge_previous(4));
        assert_eq!(
            a.generate_losses(1, &[], RngStream::new(0)).unwrap(),
            vec![0.0; 4]
        );
        assert_eq!(
            a.generate_losses(2, &[ExpertId(0)], RngStream::new(0)).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0]
        );
        assert!(a.generate_losses(3, &[ExpertId(0)], RngStream::new(0)).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        let a = Adversary::Adaptive(AdaptiveRule::new(1, "nan", |_, _| vec![f64::NAN]));
        assert!(matches!(
            a.generate_losses(1, &[], RngStream::new(0)),
            Err(Error::Data { round: Some(1), .. })
        ));
    }
}
