use masi_core::{DatasetSplits, Framework};

use crate::error::{ModelError, Result};

/// Hyperparameters and shape of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub framework: Framework,
    /// Member slots per sample.
    pub n_star: usize,
    /// Output classes for symbolic frameworks, zero for the metric one.
    pub dict_size: usize,
    pub t_history: usize,
    pub t_future: usize,
    pub hidden: usize,
    pub embed_dim: usize,
    pub batch: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub clip_norm: f64,
}

impl ModelConfig {
    /// Default hyperparameters for `framework`.
    pub fn defaults(framework: Framework, n_star: usize, dict_size: usize, t_future: usize) -> Self {
        let (t_history, batch, epochs) = if framework.is_symbolic() { (10, 10, 120) } else { (5, 5, 80) };
        ModelConfig {
            framework,
            n_star,
            dict_size: if framework.is_symbolic() { dict_size } else { 0 },
            t_history,
            t_future,
            hidden: 256,
            embed_dim: 64,
            batch,
            lr: 1e-3,
            epochs,
            seed: 0,
            clip_norm: 5.0,
        }
    }

    /// Defaults sized to a dataset. The history length is capped at the
    /// dataset's.
    pub fn for_dataset(splits: &DatasetSplits) -> Self {
        let dict_size = splits.dictionary.as_ref().map_or(0, |d| d.len());
        let mut c = Self::defaults(splits.framework, splits.n_star, dict_size, splits.config.t_future);
        c.t_history = c.t_history.min(splits.config.t_history);
        c
    }

    /// Input/output series per sample: the members, plus the center for the
    /// metric framework.
    pub fn series(&self) -> usize {
        if self.framework.is_symbolic() {
            self.n_star
        } else {
            self.n_star + 1
        }
    }

    /// Width of one output row.
    pub fn output_dim(&self) -> usize {
        if self.framework.is_symbolic() {
            self.dict_size
        } else {
            2
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_star", self.n_star),
            ("t_history", self.t_history),
            ("t_future", self.t_future),
            ("hidden", self.hidden),
            ("embed_dim", self.embed_dim),
            ("batch", self.batch),
            ("epochs", self.epochs),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::usage(format!("{name} must be positive")));
        }
        if self.framework.is_symbolic() && self.dict_size < 2 {
            return Err(ModelError::usage("symbolic models need a dictionary of at least 2 entries"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(ModelError::usage(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.clip_norm.is_finite() && self.clip_norm > 0.0) {
            return Err(ModelError::usage(format!("clip norm must be positive, got {}", self.clip_norm)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_framework() {
        let s = ModelConfig::defaults(Framework::Qtc4, 5, 82, 48);
        assert_eq!((s.t_history, s.batch, s.epochs, s.hidden), (10, 10, 120, 256));
        assert_eq!(s.lr, 1e-3);
        assert_eq!(s.series(), 5);
        assert_eq!(s.output_dim(), 82);
        let m = ModelConfig::defaults(Framework::Ts, 5, 82, 72);
        assert_eq!((m.t_history, m.batch, m.epochs, m.dict_size), (5, 5, 80, 0));
        assert_eq!(m.series(), 6);
        assert_eq!(m.output_dim(), 2);
        s.validate().unwrap();
        m.validate().unwrap();
    }

    #[test]
    fn invalid_values_are_rejected() {
        let mut c = ModelConfig::defaults(Framework::Qtc6, 3, 640, 48);
        c.hidden = 0;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::defaults(Framework::Qtc6, 3, 1, 48);
        assert!(c.validate().is_err());
        c.dict_size = 640;
        c.lr = f64::NAN;
        assert!(c.validate().is_err());
    }
}
