use super::{Graph, Result, TensorError, Var};

/// Graph handles for one LSTM layer. Gate columns are ordered
/// input, forget, candidate, output.
#[derive(Clone, Copy, Debug)]
pub struct LstmWeights {
    /// `input × 4·hidden`
    pub w_ih: Var,
    /// `hidden × 4·hidden`
    pub w_hh: Var,
    /// `1 × 4·hidden`
    pub bias: Var,
}

impl LstmWeights {
    pub fn hidden_size(&self, g: &Graph) -> usize {
        g.value(self.w_hh).rows()
    }
}

/// One LSTM step on a batch of rows.
///
/// `x_proj`, when given, is the already computed `x_t · w_ih`; this lets the
/// caller project a whole sequence with a single matmul.
pub fn lstm_cell(g: &mut Graph, x: Var, h_prev: Var, c_prev: Var, w: &LstmWeights) -> Result<(Var, Var)> {
    let xp = g.matmul(x, w.w_ih)?;
    lstm_cell_projected(g, xp, h_prev, c_prev, w)
}

pub(crate) fn lstm_cell_projected(
    g: &mut Graph,
    x_proj: Var,
    h_prev: Var,
    c_prev: Var,
    w: &LstmWeights,
) -> Result<(Var, Var)> {
    let hidden = w.hidden_size(g);
    let gate_cols = g.value(w.w_hh).cols();
    if gate_cols != 4 * hidden || g.value(x_proj).cols() != gate_cols || g.value(h_prev).cols() != hidden {
        return Err(TensorError::ShapeMismatch {
            op: "lstm_cell",
            left: g.value(h_prev).shape().to_vec(),
            right: g.value(w.w_hh).shape().to_vec(),
        });
    }
    let hp = g.matmul(h_prev, w.w_hh)?;
    let pre = g.add(x_proj, hp)?;
    let pre = g.add_bias(pre, w.bias)?;
    let i = g.slice(pre, 1, 0, hidden)?;
    let f = g.slice(pre, 1, hidden, 2 * hidden)?;
    let cand = g.slice(pre, 1, 2 * hidden, 3 * hidden)?;
    let o = g.slice(pre, 1, 3 * hidden, 4 * hidden)?;
    let i = g.sigmoid(i)?;
    let f = g.sigmoid(f)?;
    let cand = g.tanh(cand)?;
    let o = g.sigmoid(o)?;
    let keep = g.mul(f, c_prev)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c)?;
    let h = g.mul(o, tc)?;
    Ok((h, c))
}
