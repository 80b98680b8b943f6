//! Analytic gradients of composed graphs against central differences.

use masi_numerics::{
    gradient_check, lstm_cell, softmax_rows, Gradients, Graph, LstmParams, ParamStore, Result,
    Tensor,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .unwrap()
}

/// tanh(tanh(tanh(x W1 + b1) W2 + b2) W3 + b3), reduced to mean of squares.
fn three_layer(store: &ParamStore, x: &Tensor) -> Result<(f64, Gradients)> {
    let mut g = Graph::new(store);
    let mut h = g.constant(x.clone())?;
    for layer in 1..=3 {
        let w = g.param(store.id(&format!("w{layer}")).unwrap())?;
        let b = g.param(store.id(&format!("b{layer}")).unwrap())?;
        let z = g.matmul(h, w)?;
        let z = g.add_row(z, b)?;
        h = g.tanh(z)?;
    }
    let sq = g.square(h)?;
    let loss = g.mean_all(sq)?;
    Ok((g.value(loss).item()?, g.backward(loss)?))
}

#[test]
fn randomized_three_layer_composition() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let dims = [4, 6, 5, 3];
        for layer in 1..=3 {
            let (i, o) = (dims[layer - 1], dims[layer]);
            store.add(format!("w{layer}"), random_tensor(&mut rng, i, o)).unwrap();
            store.add(format!("b{layer}"), random_tensor(&mut rng, 1, o)).unwrap();
        }
        let x = random_tensor(&mut rng, 7, 4);
        let (_, grads) = three_layer(&store, &x).unwrap();
        let report =
            gradient_check(&store, &grads, |s| three_layer(s, &x).map(|r| r.0), STEP, TOL).unwrap();
        assert!(report.passed(), "seed {seed}: {report:#?}");
    }
}

fn lstm_loss(store: &ParamStore, p: &LstmParams, x: &Tensor, target: &Tensor) -> Result<(f64, Gradients)> {
    let mut g = Graph::new(store);
    let xn = g.constant(x.clone())?;
    let h0 = g.param(store.id("h0").unwrap())?;
    let c0 = g.param(store.id("c0").unwrap())?;
    let (h1, c1) = lstm_cell(&mut g, xn, h0, c0, p)?;
    let (h2, _) = lstm_cell(&mut g, xn, h1, c1, p)?;
    let t = g.constant(target.clone())?;
    let d = g.sub(h2, t)?;
    let sq = g.square(d)?;
    let loss = g.sum_all(sq)?;
    Ok((g.value(loss).item()?, g.backward(loss)?))
}

#[test]
fn lstm_cell_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut store = ParamStore::new();
    let p = LstmParams::init(&mut store, "cell", 3, 5, &mut rng).unwrap();
    store.add("h0", random_tensor(&mut rng, 2, 5)).unwrap();
    store.add("c0", random_tensor(&mut rng, 2, 5)).unwrap();
    let x = random_tensor(&mut rng, 2, 3);
    let target = random_tensor(&mut rng, 2, 5);
    let (_, grads) = lstm_loss(&store, &p, &x, &target).unwrap();
    let report = gradient_check(
        &store,
        &grads,
        |s| lstm_loss(s, &p, &x, &target).map(|r| r.0),
        STEP,
        TOL,
    )
    .unwrap();
    assert!(report.passed(), "{report:#?}");
}

/// Exercises the structural ops used by the attention layers.
fn attention_like(store: &ParamStore, idx: &[usize]) -> Result<(f64, Gradients)> {
    let mut g = Graph::new(store);
    let table = g.param(store.id("table").unwrap())?;
    let q = g.param(store.id("q").unwrap())?;
    let rows = g.gather_rows(table, idx)?;
    let a = g.slice_cols(rows, 0, 2)?;
    let b = g.slice_cols(rows, 2, 2)?;
    let ab = g.concat_cols(&[b, a])?;
    let scores = g.matmul(ab, q)?;
    let w = g.softmax_rows(scores)?;
    let w0 = g.slice_cols(w, 0, 1)?;
    let weighted = g.mul_col(ab, w0)?;
    let stacked = g.concat_rows(&[weighted, ab])?;
    let sq = g.square(stacked)?;
    let s = g.sum_all(sq)?;
    let s = g.scale(s, 0.5)?;
    let r = g.sqrt(s)?;
    Ok((g.value(r).item()?, g.backward(r)?))
}

#[test]
fn structural_ops_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut store = ParamStore::new();
    store.add("table", random_tensor(&mut rng, 5, 4)).unwrap();
    store.add("q", random_tensor(&mut rng, 4, 3)).unwrap();
    let idx = [4, 0, 2, 2];
    let (_, grads) = attention_like(&store, &idx).unwrap();
    let report =
        gradient_check(&store, &grads, |s| attention_like(s, &idx).map(|r| r.0), STEP, TOL).unwrap();
    assert!(report.passed(), "{report:#?}");
}

fn ce_loss(store: &ParamStore, targets: &[usize]) -> Result<(f64, Gradients)> {
    let mut g = Graph::new(store);
    let z = g.param(store.id("z").unwrap())?;
    let s = g.sigmoid(z)?;
    let z2 = g.mul(z, s)?;
    let l = g.softmax_cross_entropy(z2, targets)?;
    Ok((g.value(l).item()?, g.backward(l)?))
}

#[test]
fn cross_entropy_through_sigmoid() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::new();
    store.add("z", random_tensor(&mut rng, 3, 6)).unwrap();
    let targets = [1, 5, 0];
    let (_, grads) = ce_loss(&store, &targets).unwrap();
    let report =
        gradient_check(&store, &grads, |s| ce_loss(s, &targets).map(|r| r.0), STEP, TOL).unwrap();
    assert!(report.passed(), "{report:#?}");
}

proptest! {
    #[test]
    fn softmax_is_a_shift_invariant_simplex(
        logits in proptest::collection::vec(-50.0f64..50.0, 1..20),
        shift in -100.0f64..100.0,
    ) {
        let n = logits.len();
        let t = Tensor::matrix(1, n, logits.clone()).unwrap();
        let s = softmax_rows(&t).unwrap();
        prop_assert!((s.sum() - 1.0).abs() < 1e-12);
        prop_assert!(s.data().iter().all(|&p| p >= 0.0));
        let shifted = softmax_rows(&t.map(|x| x + shift)).unwrap();
        for (a, b) in s.data().iter().zip(shifted.data()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn raising_one_logit_raises_its_weight(
        logits in proptest::collection::vec(-5.0f64..5.0, 2..10),
        bump in 0.01f64..3.0,
        pick in 0usize..10,
    ) {
        let n = logits.len();
        let k = pick % n;
        let base = softmax_rows(&Tensor::matrix(1, n, logits.clone()).unwrap()).unwrap();
        let mut raised = logits;
        raised[k] += bump;
        let after = softmax_rows(&Tensor::matrix(1, n, raised).unwrap()).unwrap();
        prop_assert!(after.data()[k] > base.data()[k]);
    }
}
