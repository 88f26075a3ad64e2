//! Multi-label binary cross-entropy over activation patterns, and a small
//! trainable next-word model built on the embedding and decoding pieces.
//!
//! The model mean-pools the embeddings of the last `c` context tokens,
//! applies one `tanh` layer and projects back to `v` logits:
//!
//! ```text
//! x = mean(E[pattern(t)] for t in context[-c:])
//! a = tanh(W x)
//! z = a · H
//! ```
//!
//! Its target for the next token is that token's activation pattern.

use std::collections::HashSet;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::binio;
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::head::{sigmoid, LogitModel};
use crate::matrix::Matrix;
use crate::splitter::{split, SplitConfig, Token};
use crate::trigram::{pattern, SparsePattern, TFreeConfig};

const MAGIC: &[u8; 4] = b"TOYM";
const VERSION: u32 = 1;

/// A loss summed over several positions.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub per_position: Vec<f64>,
}

impl LossValue {
    fn from_positions(per_position: Vec<f64>) -> Self {
        Self {
            total: per_position.iter().sum(),
            per_position,
        }
    }

    pub fn mean(&self) -> f64 {
        if self.per_position.is_empty() {
            0.0
        } else {
            self.total / self.per_position.len() as f64
        }
    }
}

fn check_target(logits: &[f64], target: &SparsePattern) -> Result<()> {
    match target.indices().last() {
        Some(&j) if j as usize >= logits.len() => Err(Error::input(format!(
            "target row {j} is outside {} logits",
            logits.len()
        ))),
        _ => Ok(()),
    }
}

/// Multi-label BCE of `logits` against the binary expansion of `target`,
/// evaluated as `max(z,0) - z·y + ln(1 + e^-|z|)` per row.
pub fn ml_bce(logits: &[f64], target: &SparsePattern) -> Result<f64> {
    check_target(logits, target)?;
    let mut loss: f64 = logits
        .iter()
        .map(|&z| z.max(0.0) + (-z.abs()).exp().ln_1p())
        .sum();
    for &j in target.indices() {
        loss -= logits[j as usize];
    }
    Ok(loss)
}

/// Gradient of [`ml_bce`] with respect to the logits: `sigmoid(z) - y`.
pub fn ml_bce_grad(logits: &[f64], target: &SparsePattern) -> Result<Vec<f64>> {
    check_target(logits, target)?;
    let mut grad: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
    for &j in target.indices() {
        grad[j as usize] -= 1.0;
    }
    Ok(grad)
}

/// One training pair: the patterns of the context tokens and of the token
/// that follows them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Example {
    pub context: Vec<SparsePattern>,
    pub target: SparsePattern,
}

/// Mean-pool → tanh → head next-word model.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    embedding: EmbeddingMatrix,
    /// `h × h`.
    w: Matrix,
    /// `h × v`.
    head: Matrix,
    context_window: usize,
}

/// Parameter gradients, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyGradients {
    pub embedding: Matrix,
    pub w: Matrix,
    pub head: Matrix,
}

struct Forward {
    x: Vec<f64>,
    a: Vec<f64>,
    logits: Vec<f64>,
}

impl ToyModel {
    pub fn new(
        embedding: EmbeddingMatrix,
        w: Matrix,
        head: Matrix,
        context_window: usize,
    ) -> Result<Self> {
        let (v, h) = (embedding.config().v(), embedding.hidden());
        if w.shape() != (h, h) {
            return Err(Error::input(format!(
                "W must be {h}x{h}, got {:?}",
                w.shape()
            )));
        }
        if head.shape() != (h, v) {
            return Err(Error::input(format!(
                "H must be {h}x{v}, got {:?}",
                head.shape()
            )));
        }
        if context_window == 0 {
            return Err(Error::input("context window must be at least 1"));
        }
        if !(w.is_finite() && head.is_finite()) {
            return Err(Error::input("model parameters must be finite"));
        }
        Ok(Self {
            embedding,
            w,
            head,
            context_window,
        })
    }

    pub fn zeros(cfg: TFreeConfig, hidden: usize, context_window: usize) -> Result<Self> {
        Self::new(
            EmbeddingMatrix::zeros(cfg, hidden),
            Matrix::zeros(hidden, hidden),
            Matrix::zeros(hidden, cfg.v()),
            context_window,
        )
    }

    /// Seeded random init. `W` and `H` use std `1/sqrt(h)`.
    pub fn random(
        cfg: TFreeConfig,
        hidden: usize,
        context_window: usize,
        seed: u64,
    ) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::input("hidden size must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std = 1.0 / (hidden as f64).sqrt();
        let embedding = EmbeddingMatrix::random(cfg, hidden, &mut rng);
        let w = Matrix::random_normal(hidden, hidden, std, &mut rng);
        let head = Matrix::random_normal(hidden, cfg.v(), std, &mut rng);
        Self::new(embedding, w, head, context_window)
    }

    pub fn config(&self) -> &TFreeConfig {
        self.embedding.config()
    }

    pub fn hidden(&self) -> usize {
        self.embedding.hidden()
    }

    pub fn context_window(&self) -> usize {
        self.context_window
    }

    pub fn embedding(&self) -> &EmbeddingMatrix {
        &self.embedding
    }

    pub fn w(&self) -> &Matrix {
        &self.w
    }

    pub fn head(&self) -> &Matrix {
        &self.head
    }

    /// Mutable views of `E`, `W` and `H`, in that order.
    pub fn parameters_mut(&mut self) -> [&mut [f64]; 3] {
        [
            self.embedding.matrix_mut().as_mut_slice(),
            self.w.as_mut_slice(),
            self.head.as_mut_slice(),
        ]
    }

    fn forward_patterns(&self, context: &[SparsePattern]) -> Forward {
        let window = &context[context.len().saturating_sub(self.context_window)..];
        let mut x = vec![0.0; self.hidden()];
        for pat in window {
            for (xi, e) in x.iter_mut().zip(self.embedding.encode_pattern(pat)) {
                *xi += e;
            }
        }
        let n = window.len() as f64;
        x.iter_mut().for_each(|xi| *xi /= n);
        let a: Vec<f64> = self.w.mul_vec(&x).into_iter().map(f64::tanh).collect();
        let logits = self.head.vec_mul(&a);
        Forward { x, a, logits }
    }

    /// Next-token logits for a context given as patterns.
    pub fn logits_for(&self, context: &[SparsePattern]) -> Result<Vec<f64>> {
        if context.is_empty() {
            return Err(Error::input("context must hold at least one token"));
        }
        Ok(self.forward_patterns(context).logits)
    }

    /// Next-token logits for a token context.
    pub fn forward(&self, context: &[Token]) -> Result<Vec<f64>> {
        let cfg = *self.config();
        let start = context.len().saturating_sub(self.context_window);
        let pats: Vec<SparsePattern> = context[start..].iter().map(|t| pattern(t, &cfg)).collect();
        self.logits_for(&pats)
    }

    /// Loss per example, without gradients.
    pub fn loss(&self, examples: &[Example]) -> Result<LossValue> {
        let per = examples
            .iter()
            .map(|ex| ml_bce(&self.logits_for(&ex.context)?, &ex.target))
            .collect::<Result<Vec<_>>>()?;
        Ok(LossValue::from_positions(per))
    }

    /// Loss summed over `examples` and its gradient for every parameter.
    pub fn gradients(&self, examples: &[Example]) -> Result<(LossValue, ToyGradients)> {
        let (v, h) = (self.config().v(), self.hidden());
        let mut grads = ToyGradients {
            embedding: Matrix::zeros(v, h),
            w: Matrix::zeros(h, h),
            head: Matrix::zeros(h, v),
        };
        let mut per = Vec::with_capacity(examples.len());
        for ex in examples {
            if ex.context.is_empty() {
                return Err(Error::input("context must hold at least one token"));
            }
            let fwd = self.forward_patterns(&ex.context);
            per.push(ml_bce(&fwd.logits, &ex.target)?);
            let dz = ml_bce_grad(&fwd.logits, &ex.target)?;

            for (r, &ar) in fwd.a.iter().enumerate() {
                for (g, &d) in grads.head.row_mut(r).iter_mut().zip(&dz) {
                    *g += ar * d;
                }
            }
            let da = self.head.mul_vec(&dz);
            let dpre: Vec<f64> = da
                .iter()
                .zip(&fwd.a)
                .map(|(d, a)| d * (1.0 - a * a))
                .collect();
            for (r, &dr) in dpre.iter().enumerate() {
                for (g, &xc) in grads.w.row_mut(r).iter_mut().zip(&fwd.x) {
                    *g += dr * xc;
                }
            }
            let dx = self.w.vec_mul(&dpre);

            let window = &ex.context[ex.context.len().saturating_sub(self.context_window)..];
            let share = 1.0 / window.len() as f64;
            for pat in window {
                for &i in pat.indices() {
                    for (g, &d) in grads.embedding.row_mut(i as usize).iter_mut().zip(&dx) {
                        *g += share * d;
                    }
                }
            }
        }
        Ok((LossValue::from_positions(per), grads))
    }

    /// Plain gradient step: `θ -= lr · g`.
    pub fn apply(&mut self, grads: &ToyGradients, lr: f64) {
        self.embedding.matrix_mut().axpy(-lr, &grads.embedding);
        self.w.axpy(-lr, &grads.w);
        self.head.axpy(-lr, &grads.head);
    }

    /// Checkpoint: the embedding checkpoint followed by `TOYM`, version,
    /// context window (u32), `h·h` f32 for `W` and `h·v` f32 for `H`.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        self.embedding.write_to(w)?;
        w.write_all(MAGIC)?;
        binio::write_u32(w, VERSION)?;
        binio::write_u32(w, self.context_window as u32)?;
        binio::write_f32s(w, self.w.as_slice())?;
        binio::write_f32s(w, self.head.as_slice())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        const WHAT: &str = "model checkpoint";
        let embedding = EmbeddingMatrix::read_from(r)?;
        binio::read_magic(r, MAGIC, WHAT)?;
        let version = binio::read_u32(r, WHAT)?;
        if version != VERSION {
            return Err(Error::format(
                WHAT,
                format!("unsupported version {version}"),
            ));
        }
        let c = binio::read_u32(r, WHAT)? as usize;
        let (v, h) = (embedding.config().v(), embedding.hidden());
        let w = Matrix::from_vec(h, h, binio::read_f32s(r, h * h, WHAT)?);
        let head = Matrix::from_vec(h, v, binio::read_f32s(r, h * v, WHAT)?);
        Self::new(embedding, w, head, c)
    }
}

impl LogitModel for ToyModel {
    fn logits(&self, context: &[Token]) -> Result<Vec<f64>> {
        self.forward(context)
    }
}

/// Training settings for [`toy_train`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyHyper {
    pub lr: f64,
    pub steps: usize,
    pub context_window: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for ToyHyper {
    fn default() -> Self {
        Self {
            lr: 0.05,
            steps: 2000,
            context_window: 3,
            hidden: crate::embed::DEFAULT_HIDDEN,
            seed: 0,
        }
    }
}

/// A trained model and its loss trace. `trace[i]` is the mean loss before
/// step `i`; the last entry is the loss after the final step.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ToyModel,
    pub trace: Vec<f64>,
}

/// Builds the distinct (context, next token) pairs of a token stream. The
/// context of position `t` is the up to `c` tokens before it, so the first
/// positions see shorter contexts. Pairs repeated in the stream are kept
/// once, in order of first appearance.
pub fn training_examples(
    tokens: &[Token],
    cfg: &TFreeConfig,
    context_window: usize,
) -> Vec<Example> {
    let pats: Vec<SparsePattern> = tokens.iter().map(|t| pattern(t, cfg)).collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for t in 1..pats.len() {
        let ex = Example {
            context: pats[t.saturating_sub(context_window)..t].to_vec(),
            target: pats[t].clone(),
        };
        if seen.insert(ex.clone()) {
            out.push(ex);
        }
    }
    out
}

/// Full-batch gradient descent on the mean loss over the corpus' distinct
/// training pairs. Deterministic for a given seed.
pub fn toy_train(
    corpus: &str,
    cfg: &TFreeConfig,
    split_cfg: &SplitConfig,
    hyper: &ToyHyper,
) -> Result<TrainOutcome> {
    if !(hyper.lr.is_finite() && hyper.lr >= 0.0) {
        return Err(Error::input(format!(
            "learning rate must be finite and >= 0, got {}",
            hyper.lr
        )));
    }
    let tokens = split(corpus, split_cfg);
    if tokens.len() < hyper.context_window + 1 {
        return Err(Error::input(format!(
            "corpus has {} tokens, need at least {}",
            tokens.len(),
            hyper.context_window + 1
        )));
    }
    let examples = training_examples(&tokens, cfg, hyper.context_window);
    let mut model = ToyModel::random(*cfg, hyper.hidden, hyper.context_window, hyper.seed)?;
    let scale = 1.0 / examples.len() as f64;

    let mut trace = Vec::with_capacity(hyper.steps + 1);
    for _ in 0..hyper.steps {
        let (loss, grads) = model.gradients(&examples)?;
        trace.push(loss.total * scale);
        model.apply(&grads, hyper.lr * scale);
    }
    trace.push(model.loss(&examples)?.mean());
    if trace.iter().any(|l| !l.is_finite()) {
        return Err(Error::Invariant(
            "training diverged to a non-finite loss".into(),
        ));
    }
    Ok(TrainOutcome { model, trace })
}

/// Writes a loss trace as `step,loss` CSV.
pub fn write_loss_csv<W: Write>(w: &mut W, trace: &[f64]) -> Result<()> {
    writeln!(w, "step,loss")?;
    for (step, loss) in trace.iter().enumerate() {
        writeln!(w, "{step},{loss}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn target(ix: &[u32]) -> SparsePattern {
        SparsePattern::from_indices(ix.to_vec())
    }

    #[test]
    fn zero_logits_cost_ln2_per_row() {
        let v = 300;
        let loss = ml_bce(&vec![0.0; v], &target(&[1, 7, 42])).unwrap();
        let expected = v as f64 * std::f64::consts::LN_2;
        assert!((loss - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn saturated_prediction_is_nearly_free() {
        let v = 200;
        let t = target(&[3, 50, 199]);
        let logits: Vec<f64> = (0..v)
            .map(|j| if t.contains(j as u32) { 40.0 } else { -40.0 })
            .collect();
        let loss = ml_bce(&logits, &t).unwrap();
        assert!(loss >= 0.0 && loss <= v as f64 * 1e-12);
        let g = ml_bce_grad(&logits, &t).unwrap();
        assert!(t.indices().iter().all(|&j| g[j as usize].abs() <= 1e-12));
    }

    #[test]
    fn gradient_at_zero() {
        let g = ml_bce_grad(&[0.0; 4], &target(&[2])).unwrap();
        assert_eq!(g, vec![0.5, 0.5, -0.5, 0.5]);
    }

    #[test]
    fn huge_logits_do_not_overflow() {
        let l = ml_bce(&[1e4, -1e4], &target(&[0])).unwrap();
        assert_eq!(l, 0.0);
        let l = ml_bce(&[-1e4, 1e4], &target(&[0])).unwrap();
        assert_eq!(l, 2e4);
    }

    #[test]
    fn target_out_of_range() {
        assert!(ml_bce(&[0.0; 3], &target(&[3])).is_err());
        assert!(ml_bce_grad(&[0.0; 3], &target(&[5])).is_err());
    }

    #[test]
    fn zero_model_has_zero_logits() {
        let cfg = TFreeConfig::new(64, 3, 0).unwrap();
        let m = ToyModel::zeros(cfg, 4, 2).unwrap();
        let ctx = [Token::Word("hi".into())];
        assert_eq!(m.forward(&ctx).unwrap(), vec![0.0; 64]);
        assert!(m.forward(&[]).is_err());
    }

    #[test]
    fn short_corpus_is_rejected() {
        let cfg = TFreeConfig::new(64, 3, 0).unwrap();
        let hyper = ToyHyper {
            context_window: 3,
            ..ToyHyper::default()
        };
        assert!(toy_train("a b c", &cfg, &SplitConfig::default(), &hyper).is_err());
    }

    #[test]
    fn examples_are_distinct_and_include_warmup() {
        let cfg = TFreeConfig::new(64, 3, 0).unwrap();
        let toks = split("x y x y x y", &SplitConfig::default());
        let ex = training_examples(&toks, &cfg, 2);
        // x→y, (x y)→x, (y x)→y
        assert_eq!(ex.len(), 3);
        assert_eq!(ex[0].context.len(), 1);
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = TFreeConfig::new(32, 2, 1).unwrap();
        let m = ToyModel::random(cfg, 4, 2, 9).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let back = ToyModel::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back.context_window(), 2);
        assert_eq!(back.hidden(), 4);
        let embed_only = EmbeddingMatrix::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(embed_only.config(), &cfg);
    }

    #[test]
    fn loss_csv() {
        let mut out = Vec::new();
        write_loss_csv(&mut out, &[2.5, 1.0]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "step,loss\n0,2.5\n1,1\n");
    }
}
