//! Synthetic data: the ARTIF-style correlated-groups design and plain random
//! instances for tests, diagnostics and benchmarks.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Result, SrcekError};

/// Parameters of the correlated-groups generator.
///
/// The defaults for `within_group_correlation`, `coefficients` and
/// `noise_sd` are reconstructions chosen for this crate; only the layout
/// (400 objects, 300 channels, five relevant groups of ten, 100 training
/// objects) is fixed by the original design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifConfig {
    pub n_objects: usize,
    pub n_channels: usize,
    pub group_size: usize,
    pub n_relevant_groups: usize,
    pub within_group_correlation: f64,
    pub coefficients: Vec<f64>,
    pub noise_sd: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for ArtifConfig {
    fn default() -> Self {
        ArtifConfig {
            n_objects: 400,
            n_channels: 300,
            group_size: 10,
            n_relevant_groups: 5,
            within_group_correlation: 0.9,
            coefficients: vec![5.0, 4.0, 3.0, 2.0, 1.0],
            noise_sd: 2.0,
            train_fraction: 0.25,
            seed: 0,
        }
    }
}

impl ArtifConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SrcekError::InvalidArgument(msg));
        if self.group_size == 0 || self.n_relevant_groups * self.group_size > self.n_channels {
            return bad(format!(
                "{} groups of {} channels do not fit in {} channels",
                self.n_relevant_groups, self.group_size, self.n_channels
            ));
        }
        if self.coefficients.len() != self.n_relevant_groups {
            return bad(format!(
                "{} coefficients for {} relevant groups",
                self.coefficients.len(),
                self.n_relevant_groups
            ));
        }
        if !(self.within_group_correlation > 0.0 && self.within_group_correlation < 1.0) {
            return bad("within-group correlation must lie in (0, 1)".into());
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise standard deviation must be finite and nonnegative".into());
        }
        let n_train = self.n_train();
        if n_train < 2 || self.n_objects - n_train < 2 {
            return bad(format!(
                "train fraction {} leaves too few objects on one side of the split",
                self.train_fraction
            ));
        }
        Ok(())
    }

    pub fn n_train(&self) -> usize {
        (self.train_fraction * self.n_objects as f64).round() as usize
    }
}

/// Ground truth of a generated dataset (0-based channel indices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifTruth {
    pub relevant_channels: Vec<usize>,
    pub coefficients: Vec<f64>,
    /// Channels belonging to any relevant (correlated) group.
    pub group_channels: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ArtifData {
    pub train: Dataset,
    pub external: Dataset,
    pub truth: ArtifTruth,
}

/// Draws the full design, then splits it into the leading training objects
/// and the remaining external objects.
pub fn generate_artif(cfg: &ArtifConfig) -> Result<ArtifData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (m, n) = (cfg.n_objects, cfg.n_channels);
    let rho = cfg.within_group_correlation;
    let (shared, own) = (rho.sqrt(), (1.0 - rho).sqrt());
    let relevant: Vec<usize> = (0..cfg.n_relevant_groups)
        .map(|g| g * cfg.group_size)
        .collect();

    let mut x = Array2::<f64>::zeros((m, n));
    let mut y = Array1::<f64>::zeros(m);
    for i in 0..m {
        for g in 0..cfg.n_relevant_groups {
            let latent: f64 = rng.sample(StandardNormal);
            for c in 0..cfg.group_size {
                let e: f64 = rng.sample(StandardNormal);
                x[[i, g * cfg.group_size + c]] = shared * latent + own * e;
            }
        }
        for j in cfg.n_relevant_groups * cfg.group_size..n {
            x[[i, j]] = rng.sample(StandardNormal);
        }
        let noise: f64 = rng.sample(StandardNormal);
        y[i] = relevant
            .iter()
            .zip(&cfg.coefficients)
            .map(|(&j, c)| c * x[[i, j]])
            .sum::<f64>()
            + cfg.noise_sd * noise;
    }

    let labels: Vec<String> = (1..=n).map(|j| format!("ch{j}")).collect();
    let all = Dataset::new(x, y)?.with_channel_labels(labels)?;
    let n_train = cfg.n_train();
    let train_idx: Vec<usize> = (0..n_train).collect();
    let ext_idx: Vec<usize> = (n_train..m).collect();
    Ok(ArtifData {
        train: all.select_objects(&train_idx),
        external: all.select_objects(&ext_idx),
        truth: ArtifTruth {
            relevant_channels: relevant,
            coefficients: cfg.coefficients.clone(),
            group_channels: (0..cfg.n_relevant_groups * cfg.group_size).collect(),
        },
    })
}

/// Standard-normal predictors and responses; with `random_gamma` the
/// response weights are uniform on `[0.5, 2]`.
pub fn random_dataset(m: usize, n: usize, seed: u64, random_gamma: bool) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_simple_fn((m, n), || rng.sample(StandardNormal));
    let y = Array1::from_shape_simple_fn(m, || rng.sample(StandardNormal));
    let gamma = if random_gamma {
        Array1::from_shape_simple_fn(m, || rng.random_range(0.5..2.0))
    } else {
        Array1::ones(m)
    };
    Dataset::with_gamma(x, y, gamma).expect("random instance is valid")
}

/// Random positive weights on `[0.5, 2]`.
pub fn random_weights(n: usize, seed: u64) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array1::from_shape_simple_fn(n, || rng.random_range(0.5..2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wpls::wpls_vanilla;

    #[test]
    fn default_layout() {
        let d = generate_artif(&ArtifConfig::default()).unwrap();
        assert_eq!(d.train.x.dim(), (100, 300));
        assert_eq!(d.external.x.dim(), (300, 300));
        assert_eq!(d.truth.relevant_channels, vec![0, 10, 20, 30, 40]);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = ArtifConfig {
            n_objects: 40,
            seed: 3,
            ..Default::default()
        };
        let a = generate_artif(&cfg).unwrap();
        let b = generate_artif(&cfg).unwrap();
        assert_eq!(a.train, b.train);
        let c = generate_artif(&ArtifConfig { seed: 4, ..cfg }).unwrap();
        assert_ne!(a.train.x, c.train.x);
    }

    #[test]
    fn noiseless_response_is_exact_on_truth_channels() {
        let cfg = ArtifConfig {
            noise_sd: 0.0,
            ..Default::default()
        };
        let d = generate_artif(&cfg).unwrap();
        let sub = d.train.select_channels(&d.truth.relevant_channels);
        let (model, _) = wpls_vanilla(&sub, 5).unwrap();
        let resid = &sub.y - &model.predict(&sub.x);
        let msep = resid.dot(&resid) / resid.len() as f64;
        assert!(msep < 1e-20, "msep {msep}");
    }

    #[test]
    fn irrelevant_channels_uncorrelated_with_response() {
        let d = generate_artif(&ArtifConfig::default()).unwrap();
        let x = ndarray::concatenate(ndarray::Axis(0), &[d.train.x.view(), d.external.x.view()])
            .unwrap();
        let y = ndarray::concatenate(ndarray::Axis(0), &[d.train.y.view(), d.external.y.view()])
            .unwrap();
        let yc = &y - y.mean().unwrap();
        for j in 50..300 {
            let c = x.column(j);
            let cc = &c - c.mean().unwrap();
            let corr = cc.dot(&yc) / (cc.dot(&cc) * yc.dot(&yc)).sqrt();
            assert!(corr.abs() <= 0.25, "channel {j}: {corr}");
        }
    }

    #[test]
    fn rejects_inconsistent_config() {
        let cfg = ArtifConfig {
            coefficients: vec![1.0],
            ..Default::default()
        };
        assert!(generate_artif(&cfg).is_err());
    }
}
