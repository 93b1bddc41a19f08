//! Noise laws for perturbed-leader algorithms and the two-expert selection probabilities
//! they induce.
//!
//! With two experts whose cumulative losses differ by `c >= 0`, the trailing expert is
//! played exactly when its noise beats the leader's by more than `c`, i.e. with probability
//! `P(c + d_i <= d_j) = ∫ f(v) (1 - F(v + c)) dv` for i.i.d. draws `d_i, d_j`. The closed
//! forms below are checked against that integral evaluated numerically.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, DEFAULT_SUBDIVISIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseFamily {
    /// Uniform on `[0, scale]`.
    Uniform,
    /// Rate `scale`, density `scale * exp(-scale * x)` on `[0, inf)`.
    Exponential,
    /// Gumbel with location `location` and scale `scale`.
    Gumbel,
    /// Always zero; reduces perturbed leaders to plain follow-the-leader.
    PointMassZero,
}

/// How noise enters the leader selection: `argmin(L - p)` or `argmin(L + p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseSign {
    #[default]
    Subtract,
    Add,
}

impl NoiseSign {
    /// The perturbed score `loss ∓ noise`.
    #[inline]
    pub fn apply(self, loss: f64, noise: f64) -> f64 {
        match self {
            NoiseSign::Subtract => loss - noise,
            NoiseSign::Add => loss + noise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub family: NoiseFamily,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub location: f64,
    #[serde(default)]
    pub sign: NoiseSign,
}

fn one() -> f64 {
    1.0
}

impl PerturbationSpec {
    pub fn new(family: NoiseFamily, scale: f64) -> Result<Self> {
        let spec = Self {
            family,
            scale,
            location: 0.0,
            sign: NoiseSign::Subtract,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Uniform noise on `[0, upper]`.
    pub fn uniform(upper: f64) -> Result<Self> {
        Self::new(NoiseFamily::Uniform, upper)
    }

    /// Exponential noise with rate `rate` (mean `1 / rate`).
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(NoiseFamily::Exponential, rate)
    }

    /// Gumbel(0, `scale`).
    pub fn gumbel(scale: f64) -> Result<Self> {
        Self::new(NoiseFamily::Gumbel, scale)
    }

    pub fn zero() -> Self {
        Self {
            family: NoiseFamily::PointMassZero,
            scale: 1.0,
            location: 0.0,
            sign: NoiseSign::Subtract,
        }
    }

    pub fn with_location(mut self, location: f64) -> Result<Self> {
        self.location = location;
        self.validate()?;
        Ok(self)
    }

    pub fn with_sign(mut self, sign: NoiseSign) -> Self {
        self.sign = sign;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.family != NoiseFamily::PointMassZero && !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::Config(format!(
                "{:?} noise needs a positive finite scale, got {}",
                self.family, self.scale
            )));
        }
        if !self.location.is_finite() {
            return Err(Error::Config(format!("non-finite location {}", self.location)));
        }
        if self.location != 0.0 && self.family != NoiseFamily::Gumbel {
            return Err(Error::Config(format!(
                "location is only meaningful for Gumbel noise, got {:?}",
                self.family
            )));
        }
        Ok(())
    }

    /// True for families whose draws are never negative.
    pub fn is_nonnegative(&self) -> bool {
        self.family != NoiseFamily::Gumbel
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            NoiseFamily::PointMassZero => 0.0,
            NoiseFamily::Uniform => self.scale * open_unit(rng),
            NoiseFamily::Exponential => -open_unit(rng).ln() / self.scale,
            NoiseFamily::Gumbel => self.location - self.scale * (-open_unit(rng).ln()).ln(),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match self.family {
            NoiseFamily::PointMassZero => 0.0,
            NoiseFamily::Uniform => {
                if (0.0..=self.scale).contains(&x) {
                    1.0 / self.scale
                } else {
                    0.0
                }
            }
            NoiseFamily::Exponential => {
                if x >= 0.0 {
                    self.scale * (-self.scale * x).exp()
                } else {
                    0.0
                }
            }
            NoiseFamily::Gumbel => {
                let z = (x - self.location) / self.scale;
                (-z - (-z).exp()).exp() / self.scale
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.family {
            NoiseFamily::PointMassZero => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            NoiseFamily::Uniform => (x / self.scale).clamp(0.0, 1.0),
            NoiseFamily::Exponential => {
                if x > 0.0 {
                    -(-self.scale * x).exp_m1()
                } else {
                    0.0
                }
            }
            NoiseFamily::Gumbel => {
                let z = (x - self.location) / self.scale;
                (-(-z).exp()).exp()
            }
        }
    }

    /// `1 - cdf(x)`, computed without cancellation in the upper tail.
    pub fn survival(&self, x: f64) -> f64 {
        match self.family {
            NoiseFamily::Exponential => {
                if x > 0.0 {
                    (-self.scale * x).exp()
                } else {
                    1.0
                }
            }
            NoiseFamily::Gumbel => {
                let z = (x - self.location) / self.scale;
                -(-(-z).exp()).exp_m1()
            }
            _ => 1.0 - self.cdf(x),
        }
    }

    /// A finite interval outside of which the law has mass at most `tail`.
    pub fn effective_support(&self, tail: f64) -> (f64, f64) {
        match self.family {
            NoiseFamily::PointMassZero => (0.0, 0.0),
            NoiseFamily::Uniform => (0.0, self.scale),
            NoiseFamily::Exponential => (0.0, (1.0 / tail).ln() / self.scale),
            NoiseFamily::Gumbel => {
                // F(lo) = tail / 2 and 1 - F(hi) <= tail / 2.
                let half = tail / 2.0;
                let lo = self.location - self.scale * (-half.ln()).ln();
                let hi = self.location - self.scale * (-(-half).ln_1p()).ln();
                (lo, hi)
            }
        }
    }

    /// Points where the density is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self.family {
            NoiseFamily::Uniform => vec![0.0, self.scale],
            NoiseFamily::Exponential => vec![0.0],
            _ => Vec::new(),
        }
    }
}

/// Uniform draw on the open interval (0, 1) from 53 random bits.
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let bits = rng.random::<u64>() >> 11;
    (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Probability that the expert trailing by `c` is played in a two-expert round.
pub fn pair_probability_closed_form(spec: &PerturbationSpec, c: f64) -> Result<f64> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!(
            "loss gap must be finite and >= 0, got {c}"
        )));
    }
    let s = spec.scale;
    match spec.family {
        NoiseFamily::Exponential => Ok(0.5 * (-s * c).exp()),
        NoiseFamily::Uniform => Ok(if c >= s {
            0.0
        } else {
            (s - c) * (s - c) / (2.0 * s * s)
        }),
        NoiseFamily::Gumbel => Ok(1.0 / (1.0 + (c / s).exp())),
        NoiseFamily::PointMassZero => Err(Error::Config(
            "no closed-form pair probability for point-mass noise".into(),
        )),
    }
}

/// `Σ_v P(v) · P(x >= v + c)` for a discrete law given as `(value, mass)` atoms.
pub fn pair_probability_atoms(atoms: &[(f64, f64)], c: f64) -> f64 {
    atoms
        .iter()
        .map(|&(v, p)| {
            p * atoms
                .iter()
                .filter(|(x, _)| *x >= v + c)
                .map(|(_, q)| q)
                .sum::<f64>()
        })
        .sum()
}

/// Numerical evaluation of `∫ f(v) (1 - F(v + c)) dv` to absolute accuracy `tol`.
/// Point-mass noise is handled as a single atom.
pub fn pair_probability_quadrature(spec: &PerturbationSpec, c: f64, tol: f64) -> Result<f64> {
    pair_probability_quadrature_with_budget(spec, c, tol, DEFAULT_SUBDIVISIONS)
}

pub fn pair_probability_quadrature_with_budget(
    spec: &PerturbationSpec,
    c: f64,
    tol: f64,
    max_subdivisions: usize,
) -> Result<f64> {
    spec.validate()?;
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!(
            "loss gap must be finite and >= 0, got {c}"
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if spec.family == NoiseFamily::PointMassZero {
        return Ok(pair_probability_atoms(&[(0.0, 1.0)], c));
    }
    // Truncated tails carry at most tol / 10 of the integral.
    let (lo, hi) = spec.effective_support(tol / 10.0);
    let mut points = vec![lo, hi];
    points.extend(spec.kinks().into_iter().map(|k| k - c));
    points.extend(spec.kinks());
    points.retain(|p| *p >= lo && *p <= hi);
    let integral = quadrature::integrate(
        |v| spec.density(v) * spec.survival(v + c),
        &points,
        0.5 * tol,
        max_subdivisions,
    )?;
    Ok(integral.value)
}

/// CDF of `d_j - d_i` for i.i.d. Gumbel(μ, β) draws: the logistic CDF, free of μ.
pub fn gumbel_difference_cdf(x: f64, beta: f64) -> f64 {
    1.0 / (1.0 + (-x / beta).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn point_mass_is_zero() {
        let mut rng = RngStream::new(0).rng();
        let z = PerturbationSpec::zero();
        assert!((0..100).all(|_| z.sample(&mut rng) == 0.0));
    }

    #[test]
    fn exponential_mean() {
        let spec = PerturbationSpec::exponential(2.0).unwrap();
        let mut rng = RngStream::new(11).rng();
        let n = 1_000_000;
        let mean = (0..n).map(|_| spec.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn gumbel_median() {
        let spec = PerturbationSpec::gumbel(1.0).unwrap();
        let mut rng = RngStream::new(12).rng();
        let mut xs: Vec<f64> = (0..1_000_000).map(|_| spec.sample(&mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let median = 0.5 * (xs[499_999] + xs[500_000]);
        // -ln(ln 2) to 30 digits.
        assert!((median - 0.366_512_920_581_664_3).abs() < 0.01, "median {median}");
    }

    #[test]
    fn uniform_stays_in_support() {
        let spec = PerturbationSpec::uniform(3.0).unwrap();
        let mut rng = RngStream::new(13).rng();
        for _ in 0..10_000 {
            let x = spec.sample(&mut rng);
            assert!(x > 0.0 && x < 3.0);
        }
    }

    #[test]
    fn validation() {
        assert!(PerturbationSpec::uniform(0.0).is_err());
        assert!(PerturbationSpec::exponential(-1.0).is_err());
        assert!(PerturbationSpec::gumbel(f64::NAN).is_err());
        assert!(PerturbationSpec::uniform(1.0)
            .unwrap()
            .with_location(2.0)
            .is_err());
        assert!(PerturbationSpec::gumbel(1.0).unwrap().with_location(2.0).is_ok());
    }

    #[test]
    fn closed_form_examples() {
        for eps in [0.1, 1.0, 7.0] {
            let e = PerturbationSpec::exponential(eps).unwrap();
            assert_eq!(pair_probability_closed_form(&e, 0.0).unwrap(), 0.5);
        }
        let u = PerturbationSpec::uniform(2.0).unwrap();
        assert_eq!(pair_probability_closed_form(&u, 2.0).unwrap(), 0.0);
        assert_eq!(pair_probability_closed_form(&u, 0.0).unwrap(), 0.5);
        let g = PerturbationSpec::gumbel(1.0).unwrap();
        assert_eq!(pair_probability_closed_form(&g, 0.0).unwrap(), 0.5);
        let p = pair_probability_closed_form(&g, 3f64.ln()).unwrap();
        assert!((p - 0.25).abs() < 1e-15);
        assert!(matches!(
            pair_probability_closed_form(&PerturbationSpec::zero(), 1.0),
            Err(Error::Config(_))
        ));
        assert!(pair_probability_closed_form(&g, -1.0).is_err());
    }

    #[test]
    fn uniform_matches_printed_expression() {
        // 1 - (eps^2 - c^2 + 2 eps c) / (2 eps^2), the unsimplified form.
        for eps in [0.5, 1.0, 3.0] {
            let spec = PerturbationSpec::uniform(eps).unwrap();
            for k in 0..=10 {
                let c = eps * k as f64 / 10.0;
                let printed = 1.0 - (eps * eps - c * c + 2.0 * eps * c) / (2.0 * eps * eps);
                let ours = pair_probability_closed_form(&spec, c).unwrap();
                assert!((printed - ours).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn quadrature_examples() {
        let e = PerturbationSpec::exponential(1.0).unwrap();
        let q = pair_probability_quadrature(&e, 1.0, 1e-8).unwrap();
        assert!((q - 0.183_939_720_585_721_16).abs() < 1e-8);
        let u = PerturbationSpec::uniform(1.0).unwrap();
        let q = pair_probability_quadrature(&u, 0.25, 1e-8).unwrap();
        assert!((q - 0.28125).abs() < 1e-8);
        let g = PerturbationSpec::gumbel(1.0).unwrap();
        let q = pair_probability_quadrature(&g, 2.0, 1e-8).unwrap();
        assert!((q - 0.119_202_922_022_117_56).abs() < 1e-8);
    }

    #[test]
    fn quadrature_point_mass_and_atoms() {
        let z = PerturbationSpec::zero();
        assert_eq!(pair_probability_quadrature(&z, 0.0, 1e-8).unwrap(), 1.0);
        assert_eq!(pair_probability_quadrature(&z, 0.5, 1e-8).unwrap(), 0.0);
        // Fair coin on {0, 1}: P(c + X <= Y) at c = 0 is 3/4, at c = 1 is 1/4.
        let coin = [(0.0, 0.5), (1.0, 0.5)];
        assert_eq!(pair_probability_atoms(&coin, 0.0), 0.75);
        assert_eq!(pair_probability_atoms(&coin, 1.0), 0.25);
        assert_eq!(pair_probability_atoms(&coin, 1.5), 0.0);
    }

    #[test]
    fn quadrature_budget_exhaustion() {
        let g = PerturbationSpec::gumbel(1.0).unwrap();
        assert!(matches!(
            pair_probability_quadrature_with_budget(&g, 0.3, 1e-15, 1),
            Err(Error::Numeric { .. })
        ));
    }

    #[test]
    fn closed_form_vs_quadrature_grid() {
        for family in [
            NoiseFamily::Exponential,
            NoiseFamily::Uniform,
            NoiseFamily::Gumbel,
        ] {
            for scale in [0.3, 1.0, 2.5, 6.0] {
                let spec = PerturbationSpec::new(family, scale).unwrap();
                // Gap grid spans [0, 3 * scale] in the natural units of each family.
                let unit = if family == NoiseFamily::Exponential {
                    1.0 / scale
                } else {
                    scale
                };
                for k in 0..=6 {
                    let c = 3.0 * unit * k as f64 / 6.0;
                    let cf = pair_probability_closed_form(&spec, c).unwrap();
                    let q = pair_probability_quadrature(&spec, c, 1e-9).unwrap();
                    assert!((cf - q).abs() <= 1e-7, "{family:?} s={scale} c={c}: {cf} vs {q}");
                }
            }
        }
    }

    #[test]
    fn boundary_behaviour() {
        for c in [0.0, 0.1, 1.0, 10.0, 30.0] {
            let e = PerturbationSpec::exponential(1.0).unwrap();
            let g = PerturbationSpec::gumbel(1.0).unwrap();
            assert!(pair_probability_closed_form(&e, c).unwrap() > 0.0);
            assert!(pair_probability_closed_form(&g, c).unwrap() > 0.0);
        }
        let u = PerturbationSpec::uniform(1.5).unwrap();
        for c in [1.5, 1.6, 10.0, 1e9] {
            assert_eq!(pair_probability_closed_form(&u, c).unwrap(), 0.0);
        }
    }

    #[test]
    fn hedge_shape_match() {
        use crate::hedge::hedge_pair_probability;
        for beta in [0.25, 1.0, 4.0] {
            let g = PerturbationSpec::gumbel(beta).unwrap();
            let e = PerturbationSpec::exponential(beta).unwrap();
            for c in [0.0, 0.3, 1.0, 5.0] {
                assert_eq!(
                    pair_probability_closed_form(&g, c).unwrap(),
                    hedge_pair_probability(c, 1.0 / beta)
                );
                assert_eq!(
                    pair_probability_closed_form(&e, c).unwrap(),
                    0.5 * (-beta * c).exp()
                );
            }
        }
    }

    #[test]
    fn gumbel_difference() {
        assert_eq!(gumbel_difference_cdf(0.0, 2.0), 0.5);
        assert!((gumbel_difference_cdf(3f64.ln(), 1.0) - 0.75).abs() < 1e-15);
        let spec = PerturbationSpec::gumbel(1.0).unwrap().with_location(3.0).unwrap();
        let mut rng = RngStream::new(21).rng();
        let n = 1_000_000;
        let diffs: Vec<f64> = (0..n)
            .map(|_| spec.sample(&mut rng) - spec.sample(&mut rng))
            .collect();
        for x in [-1.0, 0.0, 1.0] {
            let emp = diffs.iter().filter(|d| **d <= x).count() as f64 / n as f64;
            assert!(
                (emp - gumbel_difference_cdf(x, 1.0)).abs() < 0.005,
                "x={x}: {emp}"
            );
        }
    }

    #[test]
    fn cdf_density_consistency() {
        for spec in [
            PerturbationSpec::uniform(2.0).unwrap(),
            PerturbationSpec::exponential(1.5).unwrap(),
            PerturbationSpec::gumbel(0.7)
                .unwrap()
                .with_location(-1.0)
                .unwrap(),
        ] {
            let (lo, hi) = spec.effective_support(1e-12);
            let mass = quadrature::integrate(|x| spec.density(x), &[lo, 0.0, hi], 1e-10, 500)
                .unwrap()
                .value;
            assert!((mass - 1.0).abs() < 1e-9, "{spec:?}: {mass}");
            for x in [-0.5, 0.2, 1.0, 3.0] {
                assert!((spec.cdf(x) + spec.survival(x) - 1.0).abs() < 1e-14);
            }
        }
    }
}
