//! Regret reports, worst-case bound evaluation and the Gumbel/exponential-weights
//! equivalence verifier.
//!
//! Bounds are evaluated as empirical certificates: a run that exceeds an applicable bound
//! indicates a bug, since both bounds hold for every loss sequence.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpl::{fpl_distribution, fpl_exact_distribution_gumbel, FplParams};
use crate::game::{expert_totals, LossHistory, RoundRecord};
use crate::hedge::{hedge_distribution, HedgeParams};
use crate::perturbation::{NoiseFamily, PerturbationSpec};
use crate::rng::{purpose, RngStream};

/// Slack allowed when comparing a cost against a bound.
pub const BOUND_SLACK: f64 = 1e-9;

/// Tolerance for the closed-form Gumbel law against exponential weights.
pub const EXACT_EQUIVALENCE_TOL: f64 = 1e-12;

/// Constants of the linear-cost bounds: `d` bounds the L1 distance between decisions,
/// `r` the magnitude of a single round's cost, `a` the L1 norm of a cost vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub d: f64,
    pub r: f64,
    pub a: f64,
    pub n: usize,
    pub t: usize,
}

impl BoundParams {
    /// Expert game with simplex vertices as decisions: `d = 2`, `r = max |loss|`,
    /// `a = max_t ||loss_t||_1`.
    pub fn simplex(records: &[RoundRecord]) -> Self {
        let n = records.first().map_or(0, |r| r.losses.len());
        let r = records
            .iter()
            .flat_map(|rec| rec.losses.iter())
            .fold(0.0f64, |m, l| m.max(l.abs()));
        let a = records
            .iter()
            .map(|rec| rec.losses.iter().map(|l| l.abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        Self {
            d: 2.0,
            r,
            a,
            n,
            t: records.len(),
        }
    }

    /// The `eps` that minimizes `eps R A T + D / eps`, before clamping to `(0, 1]`.
    pub fn optimal_fpl_epsilon(&self) -> f64 {
        (self.d / (self.r * self.a * self.t as f64)).sqrt()
    }
}

/// Expected-loss bound of randomized weighted majority with multiplier `gamma` on 0/1
/// losses: `(m ln(1/gamma) + ln n) / (1 - gamma)`.
pub fn weighted_majority_bound(m: f64, n: usize, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if m.is_nan() || m < 0.0 || n == 0 {
        return Err(Error::Domain(format!("need m >= 0 and n >= 1, got m={m}, n={n}")));
    }
    Ok(weighted_majority_bound_real(m, n as f64, gamma))
}

/// [`weighted_majority_bound`] with a real-valued expert count.
pub fn weighted_majority_bound_real(m: f64, n: f64, gamma: f64) -> f64 {
    (m * (1.0 / gamma).ln() + n.ln()) / (1.0 - gamma)
}

/// `mincost + eps R A T + D / eps` for uniform-noise FPL(eps), `eps ∈ (0, 1]`.
pub fn fpl_additive_bound(mincost: f64, eps: f64, bp: &BoundParams) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain(format!("eps must lie in (0, 1], got {eps}")));
    }
    check_finite(bp)?;
    Ok(mincost + eps * bp.r * bp.a * bp.t as f64 + bp.d / eps)
}

/// `(1 + eps) mincost + 4 A D (1 + ln n) / eps` for FPL with exponential noise of rate `eps / 2A` on nonnegative costs.
pub fn fpl_multiplicative_bound(mincost: f64, eps: f64, bp: &BoundParams) -> Result<f64> {
    if mincost.is_nan() || mincost < 0.0 {
        return Err(Error::Domain(format!(
            "the multiplicative bound needs nonnegative costs, got mincost {mincost}"
        )));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    check_finite(bp)?;
    Ok(fpl_multiplicative_bound_real(
        mincost,
        eps,
        bp.a,
        bp.d,
        bp.n as f64,
    ))
}

pub fn fpl_multiplicative_bound_real(mincost: f64, eps: f64, a: f64, d: f64, n: f64) -> f64 {
    (1.0 + eps) * mincost + 4.0 * a * d * (1.0 + n.ln()) / eps
}

fn check_finite(bp: &BoundParams) -> Result<()> {
    if [bp.d, bp.r, bp.a].iter().all(|x| x.is_finite() && *x >= 0.0) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "bound parameters must be finite and >= 0: {bp:?}"
        )))
    }
}

/// Which algorithm produced a run; decides which bounds apply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "algorithm")]
pub enum AlgoDescriptor {
    Hedge { beta: f64 },
    Rwm { gamma: f64 },
    Ftl,
    Fpl { perturbation: PerturbationSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// Randomized weighted majority on 0/1 losses.
    WeightedMajority,
    /// Additive bound for FPL(eps): uniform noise on `[0, 1/eps]`, or exponential noise of rate `eps`.
    FplAdditive,
    /// Multiplicative bound for exponential noise of rate `eps / 2A` on nonnegative losses.
    FplMultiplicative,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::WeightedMajority => "weighted-majority",
            BoundKind::FplAdditive => "fpl-additive",
            BoundKind::FplMultiplicative => "fpl-multiplicative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    /// Algorithm parameter the bound was evaluated at (gamma or eps).
    pub parameter: f64,
    pub value: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub algorithm_expected_cost: f64,
    pub best_expert_cost: f64,
    pub regret: f64,
    pub regret_trajectory: Vec<f64>,
    pub bounds_checked: Vec<BoundCheck>,
}

impl RegretReport {
    pub fn all_satisfied(&self) -> bool {
        self.bounds_checked.iter().all(|b| b.satisfied)
    }
}

/// Cumulative regret after each round, against the best expert of that prefix.
pub fn regret_trajectory(records: &[RoundRecord]) -> Vec<f64> {
    let n = records.first().map_or(0, |r| r.losses.len());
    let mut totals = vec![0.0; n];
    let mut paid = 0.0;
    records
        .iter()
        .map(|r| {
            paid += r.expected_cost;
            totals.iter_mut().zip(&r.losses).for_each(|(t, l)| *t += l);
            paid - totals.iter().copied().fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Bounds that apply to `algo` on this run.
pub fn applicable_bounds(records: &[RoundRecord], algo: &AlgoDescriptor) -> Vec<BoundKind> {
    [
        BoundKind::WeightedMajority,
        BoundKind::FplAdditive,
        BoundKind::FplMultiplicative,
    ]
    .into_iter()
    .filter(|k| bound_value(records, algo, &BoundParams::simplex(records), *k, 0.0).is_ok())
    .collect()
}

/// Returns `(parameter, bound value)` or a configuration error naming the violated hypothesis.
fn bound_value(
    records: &[RoundRecord],
    algo: &AlgoDescriptor,
    bp: &BoundParams,
    kind: BoundKind,
    best: f64,
) -> Result<(f64, f64)> {
    let inapplicable = |why: String| Err(Error::Config(format!("{} not applicable: {why}", kind.name())));
    match kind {
        BoundKind::WeightedMajority => {
            let gamma = match algo {
                AlgoDescriptor::Hedge { beta } => HedgeParams::new(*beta)?.gamma(),
                AlgoDescriptor::Rwm { gamma } => *gamma,
                other => return inapplicable(format!("needs exponential weights, run used {other:?}")),
            };
            if let Some(l) = records
                .iter()
                .flat_map(|r| r.losses.iter())
                .find(|l| **l != 0.0 && **l != 1.0)
            {
                return inapplicable(format!("needs 0/1 losses, saw {l}"));
            }
            Ok((gamma, weighted_majority_bound(best, bp.n, gamma)?))
        }
        BoundKind::FplAdditive => {
            let AlgoDescriptor::Fpl { perturbation } = algo else {
                return inapplicable(format!("needs a perturbed leader, run used {algo:?}"));
            };
            let eps = match perturbation.family {
                NoiseFamily::Uniform => 1.0 / perturbation.scale,
                NoiseFamily::Exponential => perturbation.scale,
                f => return inapplicable(format!("needs uniform or exponential noise, got {f:?}")),
            };
            if eps > 1.0 {
                return inapplicable(format!("needs eps <= 1, noise implies eps = {eps}"));
            }
            Ok((eps, fpl_additive_bound(best, eps, bp)?))
        }
        BoundKind::FplMultiplicative => {
            let AlgoDescriptor::Fpl { perturbation } = algo else {
                return inapplicable(format!("needs a perturbed leader, run used {algo:?}"));
            };
            if perturbation.family != NoiseFamily::Exponential {
                return inapplicable(format!("needs exponential noise, got {:?}", perturbation.family));
            }
            if let Some(l) = records.iter().flat_map(|r| r.losses.iter()).find(|l| **l < 0.0) {
                return inapplicable(format!("needs nonnegative losses, saw {l}"));
            }
            if bp.a <= 0.0 {
                return inapplicable("cost vectors are all zero, eps = 2 A rate is undefined".into());
            }
            let eps = 2.0 * bp.a * perturbation.scale;
            Ok((eps, fpl_multiplicative_bound(best, eps, bp)?))
        }
    }
}

/// Regret report for a finished run with each requested bound evaluated. A requested bound
/// whose hypotheses the run violates is an error, never a silent skip.
pub fn check_run_against_bounds(
    records: &[RoundRecord],
    algo: &AlgoDescriptor,
    bp: &BoundParams,
    requested: &[BoundKind],
) -> Result<RegretReport> {
    if records.is_empty() {
        return Err(Error::data("cannot report on an empty run"));
    }
    let expected: f64 = records.iter().map(|r| r.expected_cost).sum();
    let best = expert_totals(records).into_iter().fold(f64::INFINITY, f64::min);
    let mut bounds_checked = Vec::with_capacity(requested.len());
    for &kind in requested {
        let (parameter, value) = bound_value(records, algo, bp, kind, best)?;
        bounds_checked.push(BoundCheck {
            name: kind.name().to_string(),
            parameter,
            value,
            satisfied: expected <= value + BOUND_SLACK,
        });
    }
    let regret_trajectory = regret_trajectory(records);
    Ok(RegretReport {
        algorithm_expected_cost: expected,
        best_expert_cost: best,
        regret: expected - best,
        regret_trajectory,
        bounds_checked,
    })
}

/// Seed and size of the corpus the equivalence checks are pinned to.
pub const PINNED_CORPUS_SEED: u64 = 20_240_601;
pub const PINNED_CORPUS_SIZE: usize = 50;

/// `count` random histories with 1 to 6 experts and cumulative losses in `[0, 10]`.
pub fn equivalence_corpus(count: usize, seed: u64) -> Vec<LossHistory> {
    let root = RngStream::new(seed);
    (0..count)
        .map(|k| {
            let mut rng = root.substream(purpose::CORPUS, k as u64).rng();
            let n = rng.random_range(1..=6);
            let rounds = rng.random_range(1..=4);
            let cap = 10.0 / rounds as f64;
            let rows: Vec<Vec<f64>> = (0..rounds)
                .map(|_| (0..n).map(|_| cap * rng.random::<f64>()).collect())
                .collect();
            LossHistory::from_rows(n, rows).expect("finite generated losses")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceCase {
    pub index: usize,
    pub n: usize,
    pub cumulative: Vec<f64>,
    /// Max entrywise gap between the sampled FPL law and exponential weights.
    pub sampled_deviation: f64,
    /// Max entrywise gap between the closed-form FPL law and exponential weights.
    pub exact_deviation: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub beta: f64,
    pub gumbel_scale: f64,
    pub samples: u64,
    pub tol: f64,
    pub rng: RngStream,
    pub cases: Vec<EquivalenceCase>,
    pub max_sampled_deviation: f64,
    pub max_exact_deviation: f64,
    pub passed: bool,
}

/// Checks that FPL with Gumbel(0, 1/beta) noise selects experts with exactly the
/// exponential-weights probabilities at learning rate `beta`.
pub fn verify_gumbel_hedge_equivalence(
    histories: &[LossHistory],
    beta: f64,
    samples: u64,
    tol: f64,
    rng: RngStream,
) -> Result<EquivalenceReport> {
    verify_gumbel_hedge_equivalence_with_scale(histories, beta, 1.0 / beta, samples, tol, rng)
}

/// As [`verify_gumbel_hedge_equivalence`] but with an arbitrary Gumbel scale, so that a
/// mismatched pairing can be shown to fail.
pub fn verify_gumbel_hedge_equivalence_with_scale(
    histories: &[LossHistory],
    beta: f64,
    gumbel_scale: f64,
    samples: u64,
    tol: f64,
    rng: RngStream,
) -> Result<EquivalenceReport> {
    let hedge = HedgeParams::new(beta)?;
    let params = FplParams::new(PerturbationSpec::gumbel(gumbel_scale)?);
    let cases = histories
        .par_iter()
        .enumerate()
        .map(|(index, h)| {
            let target = hedge_distribution(h, hedge)?;
            let sampled = fpl_distribution(
                h,
                &params,
                samples,
                rng.substream(purpose::DISTRIBUTION, index as u64),
            )?;
            let exact = fpl_exact_distribution_gumbel(h, gumbel_scale)?;
            let sampled_deviation = sampled.max_abs_diff(&target);
            let exact_deviation = exact.max_abs_diff(&target);
            Ok(EquivalenceCase {
                index,
                n: h.n(),
                cumulative: h.cumulative().to_vec(),
                sampled_deviation,
                exact_deviation,
                passed: sampled_deviation <= tol && exact_deviation <= EXACT_EQUIVALENCE_TOL,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_sampled_deviation = cases.iter().map(|c| c.sampled_deviation).fold(0.0, f64::max);
    let max_exact_deviation = cases.iter().map(|c| c.exact_deviation).fold(0.0, f64::max);
    Ok(EquivalenceReport {
        beta,
        gumbel_scale,
        samples,
        tol,
        rng,
        passed: cases.iter().all(|c| c.passed),
        cases,
        max_sampled_deviation,
        max_exact_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{ChoiceDistribution, ExpertId};

    fn rec(losses: Vec<f64>, probs: Vec<f64>) -> RoundRecord {
        let distribution = ChoiceDistribution::new(probs).unwrap();
        RoundRecord {
            t: 1,
            chosen: ExpertId(0),
            algorithm_cost: losses[0],
            expected_cost: distribution.expected(&losses),
            distribution,
            losses,
        }
    }

    #[test]
    fn weighted_majority_examples() {
        for g in [0.1, 0.5, 0.9] {
            assert_eq!(weighted_majority_bound(0.0, 1, g).unwrap(), 0.0);
            let b = weighted_majority_bound_real(0.0, std::f64::consts::E, g);
            assert!((b - 1.0 / (1.0 - g)).abs() < 1e-12);
        }
        // (10 ln 2 + ln 4) / 0.5, evaluated with mpmath.
        let b = weighted_majority_bound(10.0, 4, 0.5).unwrap();
        assert!((b - 16.635_532_333_438_687).abs() < 1e-12);
        assert!(weighted_majority_bound(1.0, 2, 1.0).is_err());
        assert!(weighted_majority_bound(1.0, 2, 0.0).is_err());
    }

    #[test]
    fn weighted_majority_monotone() {
        let mut prev = 0.0;
        for m in 0..50 {
            let b = weighted_majority_bound(m as f64, 3, 0.4).unwrap();
            assert!(b >= prev);
            prev = b;
        }
        let mut prev = 0.0;
        for n in 1..50 {
            let b = weighted_majority_bound(2.0, n, 0.4).unwrap();
            assert!(b >= prev);
            prev = b;
        }
    }

    fn bp(d: f64, r: f64, a: f64, n: usize, t: usize) -> BoundParams {
        BoundParams { d, r, a, n, t }
    }

    #[test]
    fn fpl_additive_examples() {
        assert_eq!(
            fpl_additive_bound(3.0, 1.0, &bp(0.0, 0.0, 0.0, 2, 10)).unwrap(),
            3.0
        );
        let v = fpl_additive_bound(5.0, 0.1, &bp(2.0, 1.0, 2.0, 2, 100)).unwrap();
        assert!((v - 45.0).abs() < 1e-12);
        assert!(fpl_additive_bound(5.0, 1.5, &bp(2.0, 1.0, 2.0, 2, 100)).is_err());
        assert!(fpl_additive_bound(5.0, 0.0, &bp(2.0, 1.0, 2.0, 2, 100)).is_err());
    }

    #[test]
    fn fpl_additive_grid_minimum() {
        let p = bp(2.0, 1.0, 1.0, 2, 1000);
        let opt = p.optimal_fpl_epsilon();
        let grid: Vec<f64> = (1..=10_000).map(|k| k as f64 / 10_000.0).collect();
        let values: Vec<f64> = grid
            .iter()
            .map(|&e| fpl_additive_bound(0.0, e, &p).unwrap())
            .collect();
        let (k, _) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!((grid[k] - opt).abs() <= 1e-4, "{} vs {opt}", grid[k]);
        // Convexity on the grid: second differences are nonnegative.
        for w in values.windows(3) {
            assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-9);
        }
    }

    #[test]
    fn fpl_multiplicative_examples() {
        let p = bp(2.0, 1.0, 1.0, 1, 10);
        assert_eq!(fpl_multiplicative_bound(0.0, 0.5, &p).unwrap(), 4.0 * 2.0 / 0.5);
        assert!((fpl_multiplicative_bound(10.0, 2.0, &p).unwrap() - 34.0).abs() < 1e-12);
        let one = fpl_multiplicative_bound_real(0.0, 1.0, 1.0, 1.0, 1.0);
        let e = fpl_multiplicative_bound_real(0.0, 1.0, 1.0, 1.0, std::f64::consts::E);
        assert_eq!(one, 4.0);
        assert!((e - 8.0).abs() < 1e-12);
        assert!(fpl_multiplicative_bound(-1.0, 1.0, &p).is_err());
    }

    #[test]
    fn simplex_params() {
        let records = vec![
            rec(vec![0.5, -2.0], vec![0.5, 0.5]),
            rec(vec![1.0, 1.0], vec![1.0, 0.0]),
        ];
        let p = BoundParams::simplex(&records);
        assert_eq!((p.d, p.r, p.a, p.n, p.t), (2.0, 2.0, 2.5, 2, 2));
    }

    #[test]
    fn zero_losses_satisfy_everything() {
        let records: Vec<_> = (0..5).map(|_| rec(vec![0.0, 0.0], vec![0.5, 0.5])).collect();
        let p = BoundParams::simplex(&records);
        let r = check_run_against_bounds(
            &records,
            &AlgoDescriptor::Rwm { gamma: 0.5 },
            &p,
            &[BoundKind::WeightedMajority],
        )
        .unwrap();
        assert_eq!(r.regret, 0.0);
        assert!(r.all_satisfied());
        assert_eq!(r.regret_trajectory.last().copied(), Some(r.regret));
        let fpl = AlgoDescriptor::Fpl {
            perturbation: PerturbationSpec::uniform(10.0).unwrap(),
        };
        let r = check_run_against_bounds(&records, &fpl, &p, &[BoundKind::FplAdditive]).unwrap();
        assert!(r.all_satisfied());
    }

    #[test]
    fn inapplicable_bounds_raise() {
        let records = vec![rec(vec![0.5, 1.0], vec![0.5, 0.5])];
        let p = BoundParams::simplex(&records);
        let hedge = AlgoDescriptor::Hedge { beta: 1.0 };
        let err = check_run_against_bounds(&records, &hedge, &p, &[BoundKind::WeightedMajority]).unwrap_err();
        assert!(err.to_string().contains("0/1"), "{err}");
        assert!(check_run_against_bounds(&records, &hedge, &p, &[BoundKind::FplAdditive]).is_err());
        let gumbel = AlgoDescriptor::Fpl {
            perturbation: PerturbationSpec::gumbel(1.0).unwrap(),
        };
        assert!(check_run_against_bounds(&records, &gumbel, &p, &[BoundKind::FplAdditive]).is_err());
        let sharp = AlgoDescriptor::Fpl {
            perturbation: PerturbationSpec::uniform(0.5).unwrap(),
        };
        assert!(check_run_against_bounds(&records, &sharp, &p, &[BoundKind::FplAdditive]).is_err());
        let neg = vec![rec(vec![-0.5, 1.0], vec![0.5, 0.5])];
        let exp = AlgoDescriptor::Fpl {
            perturbation: PerturbationSpec::exponential(0.1).unwrap(),
        };
        assert!(check_run_against_bounds(
            &neg,
            &exp,
            &BoundParams::simplex(&neg),
            &[BoundKind::FplMultiplicative]
        )
        .is_err());
        assert_eq!(
            applicable_bounds(&records, &exp),
            vec![BoundKind::FplAdditive, BoundKind::FplMultiplicative]
        );
        assert!(applicable_bounds(&records, &AlgoDescriptor::Ftl).is_empty());
    }

    #[test]
    fn corpus_is_pinned_and_in_range() {
        let a = equivalence_corpus(50, 7);
        assert_eq!(a, equivalence_corpus(50, 7));
        assert_eq!(a.len(), 50);
        for h in &a {
            assert!((1..=6).contains(&h.n()));
            assert!(h.cumulative().iter().all(|l| (0.0..=10.0).contains(l)));
        }
    }

    #[test]
    fn single_expert_equivalence_is_exact() {
        let hs: Vec<_> = [0.0, 3.0, 9.5]
            .iter()
            .map(|&l| LossHistory::from_cumulative(&[l]).unwrap())
            .collect();
        let r = verify_gumbel_hedge_equivalence(&hs, 1.0, 1000, 0.005, RngStream::new(1)).unwrap();
        assert!(r.passed);
        assert_eq!(r.max_sampled_deviation, 0.0);
        assert_eq!(r.max_exact_deviation, 0.0);
    }

    #[test]
    fn mismatched_scale_fails() {
        let h = vec![LossHistory::from_cumulative(&[0.0, 1.0]).unwrap()];
        let r = verify_gumbel_hedge_equivalence_with_scale(&h, 1.0, 2.0, 200_000, 0.005, RngStream::new(2))
            .unwrap();
        assert!(!r.passed);
        // logistic(1/2) - logistic(1) ≈ 0.1086 (mpmath).
        assert!((r.max_exact_deviation - 0.108_599_247_428_150_31).abs() < 1e-12);
        assert!(r.max_sampled_deviation > 0.1);
    }
}
