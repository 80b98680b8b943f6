use rand::Rng;

use crate::error::{NumericsError, Result};
use crate::graph::{Graph, NodeId};
use crate::params::{ParamId, ParamStore};

/// Weights of one LSTM cell.
///
/// `weight` is `[(input + hidden) x 4*hidden]` applied to `[x ; h]`; the gate
/// blocks along the columns are ordered input, forget, candidate, output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmParams {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmParams {
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let fan_in = input + hidden;
        let weight =
            store.add_uniform(format!("{prefix}.weight"), &[fan_in, 4 * hidden], fan_in, rng)?;
        let bias = store.add_uniform(format!("{prefix}.bias"), &[1, 4 * hidden], fan_in, rng)?;
        Ok(LstmParams {
            weight,
            bias,
            input,
            hidden,
        })
    }
}

/// One step of the gated recurrence:
/// `c' = f*c + i*g`, `h' = o*tanh(c')`.
pub fn lstm_cell(
    g: &mut Graph<'_>,
    x: NodeId,
    h: NodeId,
    c: NodeId,
    p: &LstmParams,
) -> Result<(NodeId, NodeId)> {
    let (xr, xc) = g.value(x).dims2()?;
    let (hr, hc) = g.value(h).dims2()?;
    let (cr, cc) = g.value(c).dims2()?;
    if xc != p.input || hc != p.hidden || cc != p.hidden || xr != hr || hr != cr {
        return Err(NumericsError::shape(
            "lstm_cell",
            format!(
                "x [{xr}x{xc}], h [{hr}x{hc}], c [{cr}x{cc}] for input {} hidden {}",
                p.input, p.hidden
            ),
        ));
    }
    let hd = p.hidden;
    let xh = g.concat_cols(&[x, h])?;
    let w = g.param(p.weight)?;
    let b = g.param(p.bias)?;
    let pre = g.matmul(xh, w)?;
    let pre = g.add_row(pre, b)?;
    let i = g.slice_cols(pre, 0, hd)?;
    let f = g.slice_cols(pre, hd, hd)?;
    let cand = g.slice_cols(pre, 2 * hd, hd)?;
    let o = g.slice_cols(pre, 3 * hd, hd)?;
    let i = g.sigmoid(i)?;
    let f = g.sigmoid(f)?;
    let cand = g.tanh(cand)?;
    let o = g.sigmoid(o)?;
    let fc = g.mul(f, c)?;
    let ig = g.mul(i, cand)?;
    let c_next = g.add(fc, ig)?;
    let tc = g.tanh(c_next)?;
    let h_next = g.mul(o, tc)?;
    Ok((h_next, c_next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cell_store(input: usize, hidden: usize) -> (ParamStore, LstmParams) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = LstmParams::init(&mut store, "cell", input, hidden, &mut rng).unwrap();
        (store, p)
    }

    #[test]
    fn zero_everything_gives_zero_state() {
        let (mut store, p) = cell_store(3, 4);
        store.zero_all();
        let mut g = Graph::new(&store);
        let x = g.constant(Tensor::zeros(&[2, 3])).unwrap();
        let h = g.constant(Tensor::zeros(&[2, 4])).unwrap();
        let c = g.constant(Tensor::zeros(&[2, 4])).unwrap();
        let (h2, c2) = lstm_cell(&mut g, x, h, c, &p).unwrap();
        assert!(g.value(h2).data().iter().all(|&v| v == 0.0));
        assert!(g.value(c2).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_gates_preserve_cell() {
        let (mut store, p) = cell_store(2, 3);
        store.zero_all();
        let b = store.get_mut(p.bias).data_mut();
        for j in 0..3 {
            b[j] = -50.0; // input gate closed
            b[3 + j] = 50.0; // forget gate open
        }
        let mut g = Graph::new(&store);
        let x = g.constant(Tensor::matrix(1, 2, vec![0.7, -1.2]).unwrap()).unwrap();
        let h = g.constant(Tensor::matrix(1, 3, vec![0.1, 0.2, 0.3]).unwrap()).unwrap();
        let cv = vec![0.5, -0.25, 2.0];
        let c = g.constant(Tensor::matrix(1, 3, cv.clone()).unwrap()).unwrap();
        let (_, c2) = lstm_cell(&mut g, x, h, c, &p).unwrap();
        for (a, b) in g.value(c2).data().iter().zip(&cv) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn shape_mismatch_is_usage_error() {
        let (store, p) = cell_store(3, 4);
        let mut g = Graph::new(&store);
        let x = g.constant(Tensor::zeros(&[1, 2])).unwrap();
        let h = g.constant(Tensor::zeros(&[1, 4])).unwrap();
        let c = g.constant(Tensor::zeros(&[1, 4])).unwrap();
        assert!(lstm_cell(&mut g, x, h, c, &p).is_err());
    }
}
