use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::{KernelSpec, PriorFamily, PriorSpec};

/// Where particle inference happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    /// Features of a mini-batch, with a classifier shared by all members.
    Feature,
    /// Flattened network weights.
    Weight,
    /// Output logits of a mini-batch.
    Function,
    /// No interaction: independently trained members (Deep Ensembles).
    #[serde(alias = "deep_ensembles")]
    None,
}

impl Space {
    pub fn name(self) -> &'static str {
        match self {
            Space::Feature => "feature",
            Space::Weight => "weight",
            Space::Function => "function",
            Space::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// SGD with Nesterov momentum.
    Nesterov,
    /// `w ← w + α·v`
    Plain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub space: Space,
    /// Ensemble size.
    pub n: usize,
    /// Hidden widths of the feature extractor (may be empty).
    pub hidden: Vec<usize>,
    /// Width `H` of the extracted features.
    pub feature_dim: usize,
    pub prior: PriorSpec,
    /// Multiplier on the prior gradient; `1` applies it per batch unscaled.
    pub prior_scale: f64,
    pub kernel: KernelSpec,
    /// Projection dimension for the repulsion subspace.
    pub r: usize,
    pub projection: bool,
    pub repulsion: bool,
    /// Only read for `Space::None`; feature space always shares, weight and
    /// function space never do.
    pub share_classifier: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub momentum: f64,
    pub optimizer: OptimizerKind,
    pub weight_decay: f64,
    pub lr_decay_epochs: Vec<usize>,
    pub lr_decay_ratio: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults for each inference space: Nesterov SGD with lr 0.1, momentum
    /// 0.9, decay ratio 0.1, weight decay 5e-4, projection dimension 5; a
    /// half-Cauchy feature prior (1/σ² = 1e-3), a normal weight prior
    /// (1e-3) and a Cauchy logit prior (1e-6).
    pub fn defaults_for(space: Space) -> Self {
        let (prior, projection) = match space {
            Space::Feature => (PriorSpec { family: PriorFamily::HalfCauchy, inverse_scale: 1e-3 }, true),
            Space::Weight => (PriorSpec { family: PriorFamily::Normal, inverse_scale: 1e-3 }, false),
            Space::Function => (PriorSpec { family: PriorFamily::Cauchy, inverse_scale: 1e-6 }, true),
            Space::None => (PriorSpec::uniform(), false),
        };
        TrainConfig {
            space,
            n: 10,
            hidden: vec![64],
            feature_dim: 64,
            prior,
            prior_scale: 1.0,
            kernel: KernelSpec::default(),
            r: 5,
            projection,
            repulsion: space != Space::None,
            share_classifier: false,
            epochs: 30,
            batch_size: 128,
            base_lr: 0.1,
            momentum: 0.9,
            optimizer: OptimizerKind::Nesterov,
            weight_decay: 5e-4,
            lr_decay_epochs: vec![15, 25],
            lr_decay_ratio: 0.1,
            seed: 0,
        }
    }

    /// Whether all members use one classifier head.
    pub fn shares_classifier(&self) -> bool {
        match self.space {
            Space::Feature => true,
            Space::Weight | Space::Function => false,
            Space::None => self.share_classifier,
        }
    }

    pub fn layer_sizes(&self, input_dim: usize) -> Vec<usize> {
        let mut s = vec![input_dim];
        s.extend(&self.hidden);
        s.push(self.feature_dim);
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n", "ensemble size must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.feature_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::config("hidden", "layer widths must be nonzero"));
        }
        if self.r == 0 {
            return Err(Error::config("r", "projection dimension must be at least 1"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config("weight_decay", "must be finite and nonnegative"));
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::config("lr", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum", "must lie in [0, 1)"));
        }
        if !(self.lr_decay_ratio > 0.0 && self.lr_decay_ratio.is_finite()) {
            return Err(Error::config("lr_decay_ratio", "must be positive"));
        }
        if self.lr_decay_epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("lr_decay_epochs", "must be strictly increasing"));
        }
        if !(self.prior_scale >= 0.0 && self.prior_scale.is_finite()) {
            return Err(Error::config("prior_scale", "must be finite and nonnegative"));
        }
        if self.space == Space::Feature && self.prior.family != PriorFamily::Uniform && !self.prior.family.requires_nonnegative() {
            return Err(Error::config(
                "prior",
                "feature-space priors must be half_normal, half_cauchy or uniform (features are nonnegative)",
            ));
        }
        self.prior.validate()?;
        self.kernel.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for s in [Space::Feature, Space::Weight, Space::Function, Space::None] {
            TrainConfig::defaults_for(s).validate().unwrap();
        }
    }

    #[test]
    fn sharing_follows_space() {
        assert!(TrainConfig::defaults_for(Space::Feature).shares_classifier());
        assert!(!TrainConfig::defaults_for(Space::Function).shares_classifier());
        let mut de = TrainConfig::defaults_for(Space::None);
        assert!(!de.shares_classifier());
        de.share_classifier = true;
        assert!(de.shares_classifier());
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = TrainConfig::defaults_for(Space::Feature);
        c.n = 0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::defaults_for(Space::Feature);
        c.lr_decay_epochs = vec![10, 10];
        assert!(c.validate().is_err());
        let mut c = TrainConfig::defaults_for(Space::Feature);
        c.weight_decay = -1.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::defaults_for(Space::Feature);
        c.prior.family = PriorFamily::Cauchy;
        assert!(c.validate().is_err());
    }
}
