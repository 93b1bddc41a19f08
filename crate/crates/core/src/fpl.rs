//! Follow the leader and follow the perturbed leader.
//!
//! FPL draws one noise value per expert and plays `argmin_i (L_i - p_i)` (or `L_i + p_i`
//! under [`NoiseSign::Add`]). Only a minimization over perturbed totals is needed, no weight
//! state. The induced selection law is available three ways:
//!
//! * Monte Carlo ([`fpl_distribution`]) for any noise;
//! * the softmax closed form for Gumbel noise ([`fpl_exact_distribution_gumbel`]);
//! * one-dimensional quadrature of `∫ f(v) Π_{j≠i} F(v + L_j - L_i) dv` for any continuous
//!   family ([`fpl_distribution_quadrature`]).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{ChoiceDistribution, ExpertId, Forecaster, LossHistory, RoundContext};
use crate::hedge::softmax_of_losses;
use crate::perturbation::{pair_probability_closed_form, NoiseFamily, NoiseSign, PerturbationSpec};
use crate::quadrature::{self, DEFAULT_SUBDIVISIONS};
use crate::rng::{purpose, RngStream};

/// Number of independent sub-streams a Monte Carlo estimate is split into. Fixed so that
/// results do not depend on the thread count.
pub const MONTE_CARLO_FAN_OUT: u64 = 16;

/// Accuracy of each selection probability computed by quadrature.
pub const QUADRATURE_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FplParams {
    pub perturbation: PerturbationSpec,
    /// Redraw the noise every round. When false the noise is drawn once per game.
    #[serde(default = "yes")]
    pub fresh_noise_each_round: bool,
}

fn yes() -> bool {
    true
}

impl FplParams {
    pub fn new(perturbation: PerturbationSpec) -> Self {
        Self {
            perturbation,
            fresh_noise_each_round: true,
        }
    }
}

/// Index of the smallest score; ties go to the smallest index.
pub fn argmin(scores: impl IntoIterator<Item = f64>) -> ExpertId {
    let mut best = (0, f64::INFINITY);
    for (i, s) in scores.into_iter().enumerate() {
        if s < best.1 || i == 0 {
            best = (i, s);
        }
    }
    ExpertId(best.0)
}

pub fn ftl_choose(history: &LossHistory) -> ExpertId {
    argmin(history.cumulative().iter().copied())
}

/// The leader after perturbing `cumulative` with the given noise vector.
pub fn perturbed_leader(cumulative: &[f64], noise: &[f64], sign: NoiseSign) -> ExpertId {
    argmin(cumulative.iter().zip(noise).map(|(&l, &p)| sign.apply(l, p)))
}

/// One FPL decision with fresh noise drawn from `rng`.
pub fn fpl_choose<R: Rng + ?Sized>(history: &LossHistory, params: &FplParams, rng: &mut R) -> ExpertId {
    let spec = &params.perturbation;
    argmin(
        history
            .cumulative()
            .iter()
            .map(|&l| spec.sign.apply(l, spec.sample(rng))),
    )
}

/// Empirical selection frequencies of [`fpl_choose`] over `samples` independent draws.
pub fn fpl_distribution(
    history: &LossHistory,
    params: &FplParams,
    samples: u64,
    rng: RngStream,
) -> Result<ChoiceDistribution> {
    if samples == 0 {
        return Err(Error::Config("Monte Carlo sample count must be positive".into()));
    }
    let n = history.n();
    let counts = (0..MONTE_CARLO_FAN_OUT)
        .into_par_iter()
        .map(|k| {
            let share = samples / MONTE_CARLO_FAN_OUT + u64::from(k < samples % MONTE_CARLO_FAN_OUT);
            let mut local = vec![0u64; n];
            let mut r = rng.substream(purpose::MONTE_CARLO_CHUNK, k).rng();
            for _ in 0..share {
                local[fpl_choose(history, params, &mut r).0] += 1;
            }
            local
        })
        .reduce(
            || vec![0u64; n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    ChoiceDistribution::new(counts.into_iter().map(|c| c as f64 / samples as f64).collect())
}

/// Selection law of FPL with Gumbel(0, `scale`) noise under the subtract convention:
/// the softmax of `-L / scale`, i.e. exponential weights with learning rate `1 / scale`.
pub fn fpl_exact_distribution_gumbel(history: &LossHistory, scale: f64) -> Result<ChoiceDistribution> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Domain(format!(
            "Gumbel scale must be positive, got {scale}"
        )));
    }
    softmax_of_losses(history.cumulative(), 1.0 / scale)
}

/// Two-expert selection law from the closed-form pair probability. Valid for either sign
/// convention: with i.i.d. noise the two conventions give the same law when `n = 2`.
pub fn fpl_pair_distribution(history: &LossHistory, spec: &PerturbationSpec) -> Result<ChoiceDistribution> {
    if history.n() != 2 {
        return Err(Error::Config(format!(
            "pairwise closed form needs 2 experts, got {}",
            history.n()
        )));
    }
    let l = history.cumulative();
    let c = (l[1] - l[0]).abs();
    if c == 0.0 {
        return Ok(ChoiceDistribution::uniform(2));
    }
    let trailing = pair_probability_closed_form(spec, c)?;
    let probs = if l[1] > l[0] {
        vec![1.0 - trailing, trailing]
    } else {
        vec![trailing, 1.0 - trailing]
    };
    ChoiceDistribution::new(probs)
}

/// Selection law of FPL for any continuous noise family by one-dimensional quadrature.
///
/// Subtract: `P(i) = ∫ f(v) Π_{j≠i} F(v + L_j - L_i) dv`.
/// Add: `P(i) = ∫ f(v) Π_{j≠i} (1 - F(v + L_i - L_j)) dv`.
pub fn fpl_distribution_quadrature(
    history: &LossHistory,
    spec: &PerturbationSpec,
    tol: f64,
) -> Result<ChoiceDistribution> {
    spec.validate()?;
    let n = history.n();
    if spec.family == NoiseFamily::PointMassZero {
        return Ok(ChoiceDistribution::one_hot(n, ftl_choose(history)));
    }
    if n == 1 {
        return Ok(ChoiceDistribution::uniform(1));
    }
    let l = history.cumulative();
    let (lo, hi) = spec.effective_support(tol / 10.0);
    let kinks = spec.kinks();
    let mut probs = Vec::with_capacity(n);
    for i in 0..n {
        // Offsets at which the j-th factor is evaluated.
        let offsets: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| match spec.sign {
                NoiseSign::Subtract => l[j] - l[i],
                NoiseSign::Add => l[i] - l[j],
            })
            .collect();
        let mut points = vec![lo, hi];
        points.extend(kinks.iter().copied());
        for d in &offsets {
            points.extend(kinks.iter().map(|k| k - d));
        }
        points.retain(|p| *p >= lo && *p <= hi);
        let integrand = |v: f64| {
            let f = spec.density(v);
            if f == 0.0 {
                return 0.0;
            }
            offsets.iter().fold(f, |acc, d| {
                acc * match spec.sign {
                    NoiseSign::Subtract => spec.cdf(v + d),
                    NoiseSign::Add => spec.survival(v + d),
                }
            })
        };
        let p = quadrature::integrate(integrand, &points, 0.5 * tol, DEFAULT_SUBDIVISIONS)?;
        probs.push(p.value.max(0.0));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > (n as f64) * tol + 1e-9 {
        return Err(Error::Numeric {
            achieved: (total - 1.0).abs(),
            requested: (n as f64) * tol,
        });
    }
    ChoiceDistribution::from_weights(probs)
}

/// The exact selection law using the cheapest available route.
pub fn fpl_exact_distribution(history: &LossHistory, spec: &PerturbationSpec) -> Result<ChoiceDistribution> {
    match (spec.family, spec.sign, history.n()) {
        (NoiseFamily::PointMassZero, _, n) => Ok(ChoiceDistribution::one_hot(n, ftl_choose(history))),
        (_, _, 1) => Ok(ChoiceDistribution::uniform(1)),
        (NoiseFamily::Gumbel, NoiseSign::Subtract, _) => fpl_exact_distribution_gumbel(history, spec.scale),
        (_, _, 2) => fpl_pair_distribution(history, spec),
        _ => fpl_distribution_quadrature(history, spec, QUADRATURE_TOL),
    }
}

/// Plain follow-the-leader.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FollowTheLeader;

impl Forecaster for FollowTheLeader {
    fn label(&self) -> String {
        "ftl".into()
    }

    fn distribution(&self, history: &LossHistory, _: &RoundContext) -> Result<ChoiceDistribution> {
        Ok(ChoiceDistribution::one_hot(history.n(), ftl_choose(history)))
    }

    fn choose(&self, history: &LossHistory, _: &ChoiceDistribution, _: &RoundContext) -> Result<ExpertId> {
        Ok(ftl_choose(history))
    }
}

/// How the per-round selection law used for expected-cost accounting is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum DistributionMode {
    /// Closed form or quadrature.
    Exact,
    MonteCarlo {
        samples: u64,
    },
}

/// Follow the perturbed leader as a [`Forecaster`]. The played expert always comes from an
/// actual noise draw; the reported distribution is its selection law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fpl {
    pub params: FplParams,
    pub mode: DistributionMode,
}

impl Fpl {
    pub fn new(perturbation: PerturbationSpec) -> Self {
        Self {
            params: FplParams::new(perturbation),
            mode: DistributionMode::Exact,
        }
    }

    pub fn monte_carlo(mut self, samples: u64) -> Self {
        self.mode = DistributionMode::MonteCarlo { samples };
        self
    }

    pub fn noise_once(mut self) -> Self {
        self.params.fresh_noise_each_round = false;
        self
    }
}

impl Forecaster for Fpl {
    fn label(&self) -> String {
        let p = &self.params.perturbation;
        format!("fpl({:?}, scale={}, {:?})", p.family, p.scale, p.sign).to_lowercase()
    }

    fn distribution(&self, history: &LossHistory, ctx: &RoundContext) -> Result<ChoiceDistribution> {
        match self.mode {
            DistributionMode::Exact => fpl_exact_distribution(history, &self.params.perturbation),
            DistributionMode::MonteCarlo { samples } => {
                fpl_distribution(history, &self.params, samples, ctx.stream(purpose::DISTRIBUTION))
            }
        }
    }

    fn choose(&self, history: &LossHistory, _: &ChoiceDistribution, ctx: &RoundContext) -> Result<ExpertId> {
        let stream = if self.params.fresh_noise_each_round {
            ctx.stream(purpose::NOISE)
        } else {
            ctx.game.substream(purpose::NOISE, 0)
        };
        Ok(fpl_choose(history, &self.params, &mut stream.rng()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hist(l: &[f64]) -> LossHistory {
        LossHistory::from_cumulative(l).unwrap()
    }

    #[test]
    fn ftl_ties_and_minimum() {
        assert_eq!(ftl_choose(&hist(&[0.5, 0.5])), ExpertId(0));
        assert_eq!(ftl_choose(&hist(&[1.0, 0.5, 2.0])), ExpertId(1));
        assert_eq!(ftl_choose(&hist(&[3.0, 1.0, 1.0])), ExpertId(1));
    }

    #[test]
    fn single_expert_always_chosen() {
        let p = FplParams::new(PerturbationSpec::gumbel(5.0).unwrap());
        let mut rng = RngStream::new(4).rng();
        assert!((0..100).all(|_| fpl_choose(&hist(&[2.0]), &p, &mut rng) == ExpertId(0)));
    }

    #[test]
    fn samples_one_is_one_hot() {
        let p = FplParams::new(PerturbationSpec::exponential(1.0).unwrap());
        let d = fpl_distribution(&hist(&[0.0, 0.1, 0.2]), &p, 1, RngStream::new(3)).unwrap();
        assert_eq!(d.probs().iter().filter(|&&x| x == 1.0).count(), 1);
        assert_eq!(d.probs().iter().filter(|&&x| x == 0.0).count(), 2);
    }

    #[test]
    fn monte_carlo_is_seed_deterministic() {
        let p = FplParams::new(PerturbationSpec::uniform(2.0).unwrap());
        let h = hist(&[0.0, 0.4, 0.9, 0.2]);
        let a = fpl_distribution(&h, &p, 10_001, RngStream::new(8)).unwrap();
        let b = fpl_distribution(&h, &p, 10_001, RngStream::new(8)).unwrap();
        assert_eq!(a, b);
        assert!((a.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_pair_frequency() {
        let p = FplParams::new(PerturbationSpec::exponential(1.0).unwrap());
        let d = fpl_distribution(&hist(&[0.0, 1.0]), &p, 1_000_000, RngStream::new(17)).unwrap();
        assert!(
            (d.probs()[1] - 0.183_939_720_585_721_16).abs() < 0.005,
            "{:?}",
            d.probs()
        );
    }

    #[test]
    fn symmetric_noise_equal_losses() {
        let p = FplParams::new(PerturbationSpec::uniform(1.0).unwrap());
        let d = fpl_distribution(&hist(&[2.0, 2.0]), &p, 1_000_000, RngStream::new(18)).unwrap();
        assert!((d.probs()[0] - 0.5).abs() < 0.005);
    }

    #[test]
    fn gumbel_monte_carlo_is_softmax() {
        let p = FplParams::new(PerturbationSpec::gumbel(1.0).unwrap());
        let d = fpl_distribution(&hist(&[0.0, 1.0, 2.0]), &p, 1_000_000, RngStream::new(19)).unwrap();
        let expected = [
            0.665_240_955_774_821_9,
            0.244_728_471_054_797_65,
            0.090_030_573_170_380_46,
        ];
        for (a, b) in d.probs().iter().zip(expected) {
            assert!((a - b).abs() < 0.005);
        }
    }

    #[test]
    fn gumbel_closed_form_examples() {
        let d = fpl_exact_distribution_gumbel(&hist(&[0.0, 1.0, 2.0]), 1.0).unwrap();
        assert!((d.probs()[0] - 0.665_240_955_774_821_9).abs() < 1e-15);
        for c in [0.0, 0.5, 3.0] {
            let d = fpl_exact_distribution_gumbel(&hist(&[0.0, c]), 2.0).unwrap();
            let e = (-c / 2.0f64).exp();
            assert!((d.probs()[1] - e / (1.0 + e)).abs() < 1e-15);
        }
        let d = fpl_exact_distribution_gumbel(&hist(&[4.0; 3]), 0.3).unwrap();
        assert!(d.probs().iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
        assert!(fpl_exact_distribution_gumbel(&hist(&[0.0]), 0.0).is_err());
    }

    #[test]
    fn quadrature_law_matches_closed_forms() {
        let h = hist(&[0.3, 1.7, 0.0, 2.2]);
        let g = PerturbationSpec::gumbel(0.8).unwrap();
        let q = fpl_distribution_quadrature(&h, &g, 1e-11).unwrap();
        let c = fpl_exact_distribution_gumbel(&h, 0.8).unwrap();
        assert!(q.max_abs_diff(&c) < 1e-9, "{:?} vs {:?}", q, c);
        for spec in [
            PerturbationSpec::exponential(1.3).unwrap(),
            PerturbationSpec::uniform(2.0).unwrap(),
            PerturbationSpec::gumbel(0.5).unwrap().with_sign(NoiseSign::Add),
        ] {
            let h = hist(&[0.0, 0.6]);
            let q = fpl_distribution_quadrature(&h, &spec, 1e-11).unwrap();
            let c = fpl_pair_distribution(&h, &spec).unwrap();
            assert!(q.max_abs_diff(&c) < 1e-9, "{spec:?}");
        }
    }

    #[test]
    fn quadrature_law_matches_monte_carlo() {
        let h = hist(&[0.0, 0.5, 1.5, 0.2, 0.9]);
        for spec in [
            PerturbationSpec::exponential(1.0).unwrap(),
            PerturbationSpec::exponential(1.0)
                .unwrap()
                .with_sign(NoiseSign::Add),
            PerturbationSpec::uniform(1.0).unwrap(),
            PerturbationSpec::uniform(1.0).unwrap().with_sign(NoiseSign::Add),
            PerturbationSpec::gumbel(1.0).unwrap().with_sign(NoiseSign::Add),
        ] {
            let q = fpl_distribution_quadrature(&h, &spec, 1e-11).unwrap();
            let mc = fpl_distribution(&h, &FplParams::new(spec), 400_000, RngStream::new(23)).unwrap();
            assert!(q.max_abs_diff(&mc) < 0.005, "{spec:?}: {q:?} vs {mc:?}");
        }
    }

    #[test]
    fn exact_law_of_point_mass_is_ftl() {
        let h = hist(&[1.0, 0.2, 0.2]);
        let d = fpl_exact_distribution(&h, &PerturbationSpec::zero()).unwrap();
        assert_eq!(d.probs(), &[0.0, 1.0, 0.0]);
    }

    proptest! {
        #[test]
        fn zero_noise_is_ftl(l in prop::collection::vec(-3i32..3, 1..7), seed in any::<u64>()) {
            let h = hist(&l.iter().map(|&x| f64::from(x) * 0.5).collect::<Vec<_>>());
            let p = FplParams::new(PerturbationSpec::zero());
            let mut rng = RngStream::new(seed).rng();
            prop_assert_eq!(fpl_choose(&h, &p, &mut rng), ftl_choose(&h));
        }

        #[test]
        fn common_shift_keeps_choice(
            l in prop::collection::vec(0.0f64..10.0, 1..7),
            shift in -50.0f64..50.0,
            seed in any::<u64>(),
        ) {
            for spec in [
                PerturbationSpec::gumbel(1.0).unwrap(),
                PerturbationSpec::exponential(0.5).unwrap(),
                PerturbationSpec::uniform(2.0).unwrap().with_sign(NoiseSign::Add),
            ] {
                let p = FplParams::new(spec);
                let h = hist(&l);
                let shifted: Vec<f64> = l.iter().map(|x| x + shift).collect();
                let hs = hist(&shifted);
                let mut a = RngStream::new(seed).rng();
                let mut b = RngStream::new(seed).rng();
                let noise: Vec<f64> = (0..l.len()).map(|_| spec.sample(&mut a)).collect();
                prop_assert_eq!(fpl_choose(&h, &p, &mut b), perturbed_leader(&l, &noise, spec.sign));
                // Same draws on the shifted totals; exact ties aside the leader is unchanged.
                let base: Vec<f64> = l.iter().zip(&noise).map(|(x, p)| spec.sign.apply(*x, *p)).collect();
                let mut sorted = base.clone();
                sorted.sort_by(f64::total_cmp);
                let gap = if sorted.len() > 1 { sorted[1] - sorted[0] } else { f64::INFINITY };
                if gap > 1e-9 {
                    prop_assert_eq!(
                        perturbed_leader(hs.cumulative(), &noise, spec.sign),
                        perturbed_leader(&l, &noise, spec.sign)
                    );
                }
            }
        }
    }
}
