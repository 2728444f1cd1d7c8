//! Executable checks of the cross-task risk analysis: the regression risk
//! decomposition (Monte Carlo) and the classification excess-risk bound
//! (exact enumeration on finite distributions).

use rand::distr::{Distribution, Uniform};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::boost::argmax;
use crate::error::{Error, Result};
use crate::rng;
use crate::synth::GroundTruth;

/// Monte Carlo estimate of `R_i(F) = mismatch + noise` for one predictor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub n_samples: usize,
    pub sigma: f64,
    /// Estimated `E[(Y - F(X))^2]`.
    pub risk: f64,
    /// Estimated `E[(eta_i(X) - F(X))^2]`.
    pub mismatch: f64,
    /// `sigma^2`.
    pub noise: f64,
    /// `risk - mismatch - noise`.
    pub residual: f64,
    /// Standard error of `residual`, from the per-sample residual terms.
    pub std_error: f64,
}

impl DecompositionReport {
    pub fn within(&self, n_se: f64) -> bool {
        self.residual.abs() <= n_se * self.std_error
    }
}

/// Draws `n_mc` inputs uniformly from `[-1, 1]^d`, targets `eta_i(x) + sigma z`,
/// and compares the predictor's risk with its mismatch plus `sigma^2`.
pub fn verify_regression_decomposition<F: Fn(&[f64]) -> f64>(
    truth: &GroundTruth,
    task: usize,
    predictor: F,
    sigma: f64,
    n_mc: usize,
    seed: u64,
) -> Result<DecompositionReport> {
    if task >= truth.assignment.len() {
        return Err(Error::UnknownTask(task));
    }
    if n_mc < 2 {
        return Err(Error::InvalidConfig("need at least 2 Monte Carlo samples".into()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise level {sigma} must be non-negative")));
    }
    let d = truth.task_functions[task].dim();
    let mut r = rng::stream(seed, "decomposition", task as u64);
    let unit = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    let noise = sigma * sigma;
    let mut x = vec![0.0; d];
    let (mut risk, mut mismatch) = (0.0, 0.0);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_mc {
        for v in &mut x {
            *v = unit.sample(&mut r);
        }
        let eta = truth.task_function(task, &x)?;
        let z: f64 = r.sample(StandardNormal);
        let y = eta + sigma * z;
        let f = predictor(&x);
        let loss = (y - f) * (y - f);
        let gap = (eta - f) * (eta - f);
        risk += loss;
        mismatch += gap;
        let term = loss - gap - noise;
        sum += term;
        sum_sq += term * term;
    }
    let n = n_mc as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(DecompositionReport {
        n_samples: n_mc,
        sigma,
        risk: risk / n,
        mismatch: mismatch / n,
        noise,
        residual: mean,
        std_error: (var / n).sqrt(),
    })
}

/// Finite joint distribution: `p_x[x]` and class posteriors `posterior[x][y]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteToy {
    pub p_x: Vec<f64>,
    pub posterior: Vec<Vec<f64>>,
}

const NORMALIZATION_TOL: f64 = 1e-9;

impl DiscreteToy {
    pub fn new(p_x: Vec<f64>, posterior: Vec<Vec<f64>>) -> Result<Self> {
        let toy = Self { p_x, posterior };
        toy.validate()?;
        Ok(toy)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_x.is_empty() || self.p_x.len() != self.posterior.len() {
            return Err(Error::NotNormalized("support and posterior sizes differ".into()));
        }
        let check = |p: &[f64], what: String| {
            if p.iter().any(|v| !(*v >= 0.0 && v.is_finite())) || (p.iter().sum::<f64>() - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::NotNormalized(what));
            }
            Ok(())
        };
        check(&self.p_x, "marginal".into())?;
        let q = self.posterior[0].len();
        for (x, post) in self.posterior.iter().enumerate() {
            if post.len() != q || q < 2 {
                return Err(Error::NotNormalized(format!("posterior at point {x} has the wrong class count")));
            }
            check(post, format!("posterior at point {x}"))?;
        }
        Ok(())
    }

    pub fn n_points(&self) -> usize {
        self.p_x.len()
    }

    pub fn n_classes(&self) -> usize {
        self.posterior[0].len()
    }

    /// Bayes classifier: first class with maximal posterior at each point.
    pub fn bayes(&self) -> Vec<usize> {
        self.posterior.iter().map(|p| argmax(p)).collect()
    }

    /// 0-1 risk of a classifier given by its label at each support point.
    pub fn risk(&self, classifier: &[usize]) -> f64 {
        self.p_x
            .iter()
            .zip(&self.posterior)
            .zip(classifier)
            .map(|((px, post), &c)| px * (1.0 - post[c]))
            .sum()
    }

    /// Random toy with Dirichlet(1)-like weights built from exponential draws.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_points: usize, n_classes: usize) -> Self {
        let mut simplex = |k: usize| {
            let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect::<Vec<f64>>()
        };
        let p_x = simplex(n_points);
        let posterior = (0..n_points).map(|_| simplex(n_classes)).collect();
        Self { p_x, posterior }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub risk: f64,
    pub bayes_risk: f64,
    pub excess: f64,
    pub disagreement: f64,
    pub holds: bool,
}

/// Exact excess risk of `classifier` on `toy` against its disagreement with
/// the Bayes classifier.
pub fn verify_classification_bound(toy: &DiscreteToy, classifier: &[usize]) -> Result<BoundReport> {
    toy.validate()?;
    if classifier.len() != toy.n_points() {
        return Err(Error::DimensionMismatch {
            expected: toy.n_points(),
            actual: classifier.len(),
        });
    }
    if let Some(&c) = classifier.iter().find(|&&c| c >= toy.n_classes()) {
        return Err(Error::InvalidData(format!("class {c} outside 0..{}", toy.n_classes())));
    }
    let bayes = toy.bayes();
    let risk = toy.risk(classifier);
    let bayes_risk = toy.risk(&bayes);
    let disagreement: f64 = toy
        .p_x
        .iter()
        .zip(classifier.iter().zip(&bayes))
        .filter(|(_, (a, b))| a != b)
        .map(|(p, _)| p)
        .sum();
    let excess = risk - bayes_risk;
    Ok(BoundReport {
        risk,
        bayes_risk,
        excess,
        disagreement,
        // Rounding slack for sums of products of probabilities.
        holds: excess <= disagreement + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> DiscreteToy {
        DiscreteToy::new(vec![0.5, 0.5], vec![vec![0.1, 0.9], vec![0.8, 0.2]]).unwrap()
    }

    #[test]
    fn bayes_classifier_has_zero_excess() {
        let toy = two_point();
        let r = verify_classification_bound(&toy, &toy.bayes()).unwrap();
        assert_eq!(r.excess, 0.0);
        assert_eq!(r.disagreement, 0.0);
        assert!((r.bayes_risk - 0.15).abs() < 1e-15);
    }

    #[test]
    fn constant_classifier_on_two_points() {
        let r = verify_classification_bound(&two_point(), &[1, 1]).unwrap();
        assert!((r.risk - 0.45).abs() < 1e-15);
        assert!((r.excess - 0.3).abs() < 1e-15);
        assert_eq!(r.disagreement, 0.5);
        assert!(r.holds);
    }

    #[test]
    fn unnormalized_toys_are_rejected() {
        assert!(DiscreteToy::new(vec![0.5, 0.6], vec![vec![0.5, 0.5], vec![0.5, 0.5]]).is_err());
        assert!(DiscreteToy::new(vec![1.0], vec![vec![0.5, 0.6]]).is_err());
        assert!(verify_classification_bound(&two_point(), &[0, 2]).is_err());
    }

    #[test]
    fn random_toys_are_normalized() {
        let mut r = rng::stream(3, "toy", 0);
        for _ in 0..20 {
            DiscreteToy::random(&mut r, 4, 3).validate().unwrap();
        }
    }
}
