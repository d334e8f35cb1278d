//! Neural building blocks: embeddings, affine maps, GRU cells and runners,
//! the character feed-forward block, and dropout.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal, Uniform};

use crate::autodiff::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::{Error, Result};

/// Parameter initialization schemes.
pub mod init {
    use super::*;

    /// `rows × cols` matrix, entries uniform in `±1/√hidden`.
    pub fn recurrent(rows: usize, cols: usize, hidden: usize, rng: &mut dyn RngCore) -> Tensor {
        let bound = 1.0 / (hidden as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
        Tensor::new(vec![rows, cols], data).expect("positive dims")
    }

    /// `rows × cols` matrix with variance `2 / cols` (fan-in scaling).
    pub fn fan_in(rows: usize, cols: usize, rng: &mut dyn RngCore) -> Tensor {
        let dist = Normal::new(0.0, (2.0 / cols as f64).sqrt()).expect("positive std");
        let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
        Tensor::new(vec![rows, cols], data).expect("positive dims")
    }

    /// Standard-normal embedding rows.
    pub fn embedding(rows: usize, dim: usize, rng: &mut dyn RngCore) -> Tensor {
        let dist = Normal::new(0.0, 1.0).expect("unit std");
        let data = (0..rows * dim).map(|_| dist.sample(rng)).collect();
        Tensor::new(vec![rows, dim], data).expect("positive dims")
    }
}

/// Embedding matrix `E_x` with one row per symbol.
#[derive(Clone, Copy, Debug)]
pub struct EmbeddingTable {
    pub weights: ParamId,
    pub rows: usize,
    pub dim: usize,
}

impl EmbeddingTable {
    pub fn register(
        store: &mut ParamStore,
        name: &str,
        rows: usize,
        dim: usize,
        rng: &mut dyn RngCore,
    ) -> Self {
        let weights = store.add(name, init::embedding(rows, dim, rng));
        EmbeddingTable { weights, rows, dim }
    }

    pub fn lookup(&self, g: &mut Graph, id: usize) -> Result<Var> {
        let table = g.param(self.weights);
        g.row(table, id)
    }
}

/// `W·x + b` on graph nodes.
pub fn affine(g: &mut Graph, w: Var, b: Var, x: Var) -> Result<Var> {
    let wx = g.matvec(w, x)?;
    g.add(wx, b)
}

/// A stored affine map.
#[derive(Clone, Copy, Debug)]
pub struct Affine {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Affine {
    pub fn register(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        rng: &mut dyn RngCore,
    ) -> Self {
        let w = store.add(format!("{name}.w"), init::fan_in(output, input, rng));
        let b = store.add(format!("{name}.b"), Tensor::zeros(&[output]));
        Affine {
            w,
            b,
            input,
            output,
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let (w, b) = (g.param(self.w), g.param(self.b));
        affine(g, w, b, x)
    }

    pub fn num_scalars(&self) -> usize {
        self.output * self.input + self.output
    }
}

/// Weights of one GRU direction.
///
/// Update gate `z`, reset gate `r`, and candidate `h̃` each own an input matrix
/// (`hidden × input`), a recurrent matrix (`hidden × hidden`) and a bias.
#[derive(Clone, Copy, Debug)]
pub struct GruParams {
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub b_r: ParamId,
    pub w_h: ParamId,
    pub u_h: ParamId,
    pub b_h: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl GruParams {
    pub fn register(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut dyn RngCore,
    ) -> Self {
        let gate = |gate: &str, store: &mut ParamStore, rng: &mut dyn RngCore| {
            let w = store.add(format!("{name}.w_{gate}"), init::recurrent(hidden, input, hidden, rng));
            let u = store.add(format!("{name}.u_{gate}"), init::recurrent(hidden, hidden, hidden, rng));
            let b = store.add(format!("{name}.b_{gate}"), Tensor::zeros(&[hidden]));
            (w, u, b)
        };
        let (w_z, u_z, b_z) = gate("z", store, rng);
        let (w_r, u_r, b_r) = gate("r", store, rng);
        let (w_h, u_h, b_h) = gate("h", store, rng);
        GruParams {
            w_z,
            u_z,
            b_z,
            w_r,
            u_r,
            b_r,
            w_h,
            u_h,
            b_h,
            input,
            hidden,
        }
    }

    pub fn num_scalars(&self) -> usize {
        3 * (self.hidden * self.input + self.hidden * self.hidden + self.hidden)
    }

    /// One recurrence step:
    ///
    /// ```text
    /// z  = σ(W_z x + U_z h + b_z)
    /// r  = σ(W_r x + U_r h + b_r)
    /// h̃  = tanh(W_h x + U_h (r ⊙ h) + b_h)
    /// h' = (1 − z) ⊙ h + z ⊙ h̃
    /// ```
    pub fn step(&self, g: &mut Graph, x: Var, h_prev: Var) -> Result<Var> {
        if g.value(x).len() != self.input || g.value(h_prev).len() != self.hidden {
            return Err(Error::Shape {
                op: "gru_step",
                detail: format!(
                    "cell is {}→{}, got input {:?} and state {:?}",
                    self.input,
                    self.hidden,
                    g.value(x).shape(),
                    g.value(h_prev).shape()
                ),
            });
        }
        let gate = |g: &mut Graph, w, u, b, h: Var| -> Result<Var> {
            let (w, u, b) = (g.param(w), g.param(u), g.param(b));
            let wx = g.matvec(w, x)?;
            let uh = g.matvec(u, h)?;
            let s = g.add(wx, uh)?;
            g.add(s, b)
        };
        let z_pre = gate(g, self.w_z, self.u_z, self.b_z, h_prev)?;
        let z = g.sigmoid(z_pre)?;
        let r_pre = gate(g, self.w_r, self.u_r, self.b_r, h_prev)?;
        let r = g.sigmoid(r_pre)?;
        let rh = g.hadamard(r, h_prev)?;
        let c_pre = gate(g, self.w_h, self.u_h, self.b_h, rh)?;
        let candidate = g.tanh(c_pre)?;
        // h + z ⊙ (h̃ − h)
        let delta = g.sub(candidate, h_prev)?;
        let moved = g.hadamard(z, delta)?;
        g.add(h_prev, moved)
    }
}

/// Scan direction of a recurrent layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Runs a GRU over `seq`. The output is aligned with the input: in the
/// backward direction, position `i` holds the state after consuming
/// positions `N−1 … i`.
pub fn run_gru(
    g: &mut Graph,
    p: &GruParams,
    seq: &[Var],
    h0: Var,
    direction: Direction,
) -> Result<Vec<Var>> {
    if seq.is_empty() {
        return Err(Error::Empty("run_gru"));
    }
    let mut states = vec![h0; seq.len()];
    let mut h = h0;
    let order: Box<dyn Iterator<Item = usize>> = match direction {
        Direction::Forward => Box::new(0..seq.len()),
        Direction::Backward => Box::new((0..seq.len()).rev()),
    };
    for i in order {
        h = p.step(g, seq[i], h)?;
        states[i] = h;
    }
    Ok(states)
}

/// Forward and backward GRU pair whose outputs are concatenated.
#[derive(Clone, Copy, Debug)]
pub struct BiGru {
    pub fwd: GruParams,
    pub bwd: GruParams,
}

impl BiGru {
    /// Registers a bidirectional layer of nominal (total) size `size`; each
    /// direction gets `size / 2` units.
    pub fn register(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        size: usize,
        rng: &mut dyn RngCore,
    ) -> Self {
        assert!(size.is_multiple_of(2) && size > 0, "bidirectional layer size must be even, got {size}");
        let fwd = GruParams::register(store, &format!("{name}.fwd"), input, size / 2, rng);
        let bwd = GruParams::register(store, &format!("{name}.bwd"), input, size / 2, rng);
        BiGru { fwd, bwd }
    }

    pub fn size(&self) -> usize {
        self.fwd.hidden + self.bwd.hidden
    }

    pub fn num_scalars(&self) -> usize {
        self.fwd.num_scalars() + self.bwd.num_scalars()
    }

    /// Runs both directions from a zero initial state.
    pub fn forward(&self, g: &mut Graph, seq: &[Var]) -> Result<Vec<Var>> {
        let h0 = g.input(Tensor::zeros(&[self.fwd.hidden]))?;
        bi_gru(g, &self.fwd, &self.bwd, seq, h0)
    }
}

/// Position `i` of the result is `[forward state i, backward state i]`.
pub fn bi_gru(
    g: &mut Graph,
    p_fwd: &GruParams,
    p_bwd: &GruParams,
    seq: &[Var],
    h0: Var,
) -> Result<Vec<Var>> {
    if p_fwd.hidden != p_bwd.hidden {
        return Err(Error::Shape {
            op: "bi_gru",
            detail: format!("direction sizes differ: {} vs {}", p_fwd.hidden, p_bwd.hidden),
        });
    }
    let fw = run_gru(g, p_fwd, seq, h0, Direction::Forward)?;
    let bw = run_gru(g, p_bwd, seq, h0, Direction::Backward)?;
    fw.into_iter()
        .zip(bw)
        .map(|(f, b)| g.concat(&[f, b]))
        .collect()
}

/// One-hidden-layer feed-forward block: `W₂·tanh(W₁x + b₁) + b₂`.
#[derive(Clone, Copy, Debug)]
pub struct Ffnn {
    pub hidden: Affine,
    pub out: Affine,
}

impl Ffnn {
    pub fn register(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        output: usize,
        rng: &mut dyn RngCore,
    ) -> Self {
        Ffnn {
            hidden: Affine::register(store, &format!("{name}.hidden"), input, hidden, rng),
            out: Affine::register(store, &format!("{name}.out"), hidden, output, rng),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let pre = self.hidden.forward(g, x)?;
        let act = g.tanh(pre)?;
        self.out.forward(g, act)
    }

    pub fn num_scalars(&self) -> usize {
        self.hidden.num_scalars() + self.out.num_scalars()
    }
}

/// Whether a forward pass is for training (dropout active) or evaluation.
pub enum Phase<'r> {
    Eval,
    Train { rate: f64, rng: &'r mut dyn RngCore },
}

impl<'r> Phase<'r> {
    pub fn train(rate: f64, rng: &'r mut dyn RngCore) -> Result<Self> {
        check_rate(rate)?;
        Ok(Phase::Train { rate, rng })
    }

    pub fn is_train(&self) -> bool {
        matches!(self, Phase::Train { .. })
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::Config(format!("dropout rate must lie in [0, 1), got {rate}")))
    }
}

/// Inverted dropout: in training, zero each coordinate with probability
/// `rate` and scale survivors by `1/(1−rate)`; identity in evaluation.
pub fn dropout(g: &mut Graph, x: Var, phase: &mut Phase) -> Result<Var> {
    match phase {
        Phase::Eval => Ok(x),
        Phase::Train { rate, rng } => {
            check_rate(*rate)?;
            if *rate == 0.0 {
                return Ok(x);
            }
            let keep = 1.0 / (1.0 - *rate);
            let mask = (0..g.value(x).len())
                .map(|_| if rng.random::<f64>() < *rate { 0.0 } else { keep })
                .collect();
            g.mask(x, mask)
        }
    }
}
