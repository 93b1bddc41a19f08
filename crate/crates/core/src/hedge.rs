//! Exponentially weighted average forecaster and randomized weighted majority.
//!
//! Expert `i` is played with probability proportional to `exp(-beta * L_i)` where `L_i` is
//! its cumulative loss. Randomized weighted majority is the same rule written as a
//! sequential multiplicative update with multiplier `gamma = exp(-beta)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{ChoiceDistribution, Forecaster, LossHistory, RoundContext};

/// Learning rate of the exponential weights forecaster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgeParams {
    beta: f64,
}

impl HedgeParams {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Domain(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        Ok(Self { beta })
    }

    /// Learning rate whose multiplicative factor per unit loss is `gamma`.
    pub fn from_gamma(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Domain(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        Self::new(-gamma.ln())
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        (-self.beta).exp()
    }
}

/// Softmax of `-beta * cumulative`, shifted by the minimum loss before exponentiation.
pub fn softmax_of_losses(cumulative: &[f64], beta: f64) -> Result<ChoiceDistribution> {
    if let Some(l) = cumulative.iter().find(|l| !l.is_finite()) {
        return Err(Error::data(format!("non-finite cumulative loss {l}")));
    }
    let min = cumulative.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = cumulative.iter().map(|l| (-beta * (l - min)).exp()).collect();
    ChoiceDistribution::from_weights(weights)
}

pub fn hedge_distribution(history: &LossHistory, params: HedgeParams) -> Result<ChoiceDistribution> {
    softmax_of_losses(history.cumulative(), params.beta)
}

/// Probability that the expert trailing by `c >= 0` is played in a two-expert game.
pub fn hedge_pair_probability(c: f64, beta: f64) -> f64 {
    // e^{-bc} / (1 + e^{-bc}) written so that large bc underflows to 0 instead of NaN.
    1.0 / (1.0 + (beta * c).exp())
}

/// Exponential weights as a [`Forecaster`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hedge {
    pub params: HedgeParams,
}

impl Hedge {
    pub fn new(beta: f64) -> Result<Self> {
        Ok(Self {
            params: HedgeParams::new(beta)?,
        })
    }

    /// Randomized weighted majority with multiplier `gamma`.
    pub fn rwm(gamma: f64) -> Result<Self> {
        Ok(Self {
            params: HedgeParams::from_gamma(gamma)?,
        })
    }
}

impl Forecaster for Hedge {
    fn label(&self) -> String {
        format!("hedge(beta={})", self.params.beta)
    }

    fn distribution(&self, history: &LossHistory, _: &RoundContext) -> Result<ChoiceDistribution> {
        hedge_distribution(history, self.params)
    }
}

/// Randomized weighted majority kept as explicit weights: `w_i <- w_i * gamma^loss_i`,
/// renormalized after each round.
#[derive(Debug, Clone)]
pub struct MultiplicativeWeights {
    gamma: f64,
    weights: Vec<f64>,
}

impl MultiplicativeWeights {
    pub fn new(n: usize, gamma: f64) -> Result<Self> {
        HedgeParams::from_gamma(gamma)?;
        Ok(Self {
            gamma,
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn update(&mut self, losses: &[f64]) -> Result<()> {
        if losses.len() != self.weights.len() {
            return Err(Error::Config(format!(
                "expected {} losses, got {}",
                self.weights.len(),
                losses.len()
            )));
        }
        for (w, l) in self.weights.iter_mut().zip(losses) {
            *w *= self.gamma.powf(*l);
        }
        let total: f64 = self.weights.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::data("all weights underflowed"));
        }
        self.weights.iter_mut().for_each(|w| *w /= total);
        Ok(())
    }

    pub fn distribution(&self) -> Result<ChoiceDistribution> {
        ChoiceDistribution::from_weights(self.weights.clone())
    }
}
