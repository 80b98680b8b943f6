//! Central-difference verification of analytic gradients.

use crate::error::Result;
use crate::params::{Gradients, ParamStore};

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub name: String,
    pub entries: usize,
    pub max_abs_err: f64,
    /// `max |analytic - numeric| / max(max |analytic|, max |numeric|)` over the block.
    pub max_rel_err: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub blocks: Vec<BlockReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.passed)
    }

    pub fn worst(&self) -> Option<&BlockReport> {
        self.blocks
            .iter()
            .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
    }

    pub fn failures(&self) -> impl Iterator<Item = &BlockReport> {
        self.blocks.iter().filter(|b| !b.passed)
    }
}

/// Compares `analytic` against central differences of `loss` with step `step`.
///
/// `loss` must be deterministic. Every scalar of every block is perturbed.
pub fn gradient_check<F>(
    params: &ParamStore,
    analytic: &Gradients,
    mut loss: F,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    let mut work = params.clone();
    let mut blocks = Vec::with_capacity(params.len());
    for id in params.ids() {
        let n = params.get(id).len();
        let mut max_abs_err: f64 = 0.0;
        let mut max_a: f64 = 0.0;
        let mut max_n: f64 = 0.0;
        for k in 0..n {
            let orig = params.get(id).data()[k];
            work.get_mut(id).data_mut()[k] = orig + step;
            let plus = loss(&work)?;
            work.get_mut(id).data_mut()[k] = orig - step;
            let minus = loss(&work)?;
            work.get_mut(id).data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic.get(id).data()[k];
            max_abs_err = max_abs_err.max((a - numeric).abs());
            max_a = max_a.max(a.abs());
            max_n = max_n.max(numeric.abs());
        }
        let scale = max_a.max(max_n);
        let max_rel_err = if scale > 0.0 { max_abs_err / scale } else { 0.0 };
        blocks.push(BlockReport {
            name: params.name(id).to_string(),
            entries: n,
            max_abs_err,
            max_rel_err,
            passed: max_rel_err < tolerance,
        });
    }
    Ok(GradCheckReport { tolerance, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::tensor::Tensor;

    fn linear_setup() -> (ParamStore, Tensor) {
        let mut store = ParamStore::new();
        store
            .add("w", Tensor::matrix(3, 2, vec![0.3, -0.1, 0.7, 0.2, -0.5, 0.9]).unwrap())
            .unwrap();
        store.add("b", Tensor::row(vec![0.05, -0.02])).unwrap();
        let x = Tensor::matrix(4, 3, (0..12).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        (store, x)
    }

    fn linear_loss(store: &ParamStore, x: &Tensor) -> (f64, Gradients) {
        let mut g = Graph::new(store);
        let xn = g.constant(x.clone()).unwrap();
        let w = g.param(store.id("w").unwrap()).unwrap();
        let b = g.param(store.id("b").unwrap()).unwrap();
        let y = g.matmul(xn, w).unwrap();
        let y = g.add_row(y, b).unwrap();
        let l = g.sum_all(y).unwrap();
        let v = g.value(l).item().unwrap();
        (v, g.backward(l).unwrap())
    }

    #[test]
    fn linear_model_is_exact() {
        let (store, x) = linear_setup();
        let (_, grads) = linear_loss(&store, &x);
        let report =
            gradient_check(&store, &grads, |s| Ok(linear_loss(s, &x).0), 1e-5, 1e-8).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.worst().unwrap().max_rel_err < 1e-8);
    }

    #[test]
    fn corrupted_rule_is_flagged() {
        let (store, x) = linear_setup();
        let (_, mut grads) = linear_loss(&store, &x);
        let b = store.id("b").unwrap();
        grads.get_mut(b).scale_assign(1.1);
        let report =
            gradient_check(&store, &grads, |s| Ok(linear_loss(s, &x).0), 1e-5, 1e-4).unwrap();
        assert!(!report.passed());
        let failed: Vec<_> = report.failures().map(|b| b.name.as_str()).collect();
        assert_eq!(failed, vec!["b"]);
    }
}
