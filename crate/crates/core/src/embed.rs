//! Embedding lookup: one dense vector per token, the sum of the rows its
//! pattern activates.

use std::io::{Read, Write};

use rand::Rng;

use crate::binio;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::splitter::{split, SplitConfig, Token};
use crate::trigram::{pattern, HashAlgorithm, SparsePattern, TFreeConfig};

pub const DEFAULT_HIDDEN: usize = 64;
/// Mean word length assumed when scaling the initial embedding rows.
const ASSUMED_WORD_LEN: f64 = 5.0;

const MAGIC: &[u8; 4] = b"TFEM";
const VERSION: u32 = 1;

/// A `v × h` embedding table tied to the hashing config that indexes it.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: Matrix,
    cfg: TFreeConfig,
}

impl EmbeddingMatrix {
    pub fn zeros(cfg: TFreeConfig, hidden: usize) -> Self {
        Self {
            rows: Matrix::zeros(cfg.v(), hidden),
            cfg,
        }
    }

    /// Wraps an existing matrix. Fails unless it is `v × h` and finite.
    pub fn from_matrix(cfg: TFreeConfig, rows: Matrix) -> Result<Self> {
        if rows.rows() != cfg.v() {
            return Err(Error::input(format!(
                "embedding has {} rows, config says v={}",
                rows.rows(),
                cfg.v()
            )));
        }
        if rows.cols() == 0 {
            return Err(Error::input("hidden size must be at least 1"));
        }
        if !rows.is_finite() {
            return Err(Error::input("embedding contains non-finite entries"));
        }
        Ok(Self { rows, cfg })
    }

    /// Normal init with std `1/sqrt(m * 5 * h)`, so a typical word embedding
    /// (about `5m` rows summed) has entries of order `1/sqrt(h)`.
    pub fn random<R: Rng + ?Sized>(cfg: TFreeConfig, hidden: usize, rng: &mut R) -> Self {
        let std = 1.0 / (cfg.m() as f64 * ASSUMED_WORD_LEN * hidden as f64).sqrt();
        Self {
            rows: Matrix::random_normal(cfg.v(), hidden, std, rng),
            cfg,
        }
    }

    pub fn config(&self) -> &TFreeConfig {
        &self.cfg
    }

    pub fn hidden(&self) -> usize {
        self.rows.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.rows
    }

    pub fn matrix_mut(&mut self) -> &mut Matrix {
        &mut self.rows
    }

    /// Sum of the rows in `pattern`, accumulated in ascending row order.
    pub fn encode_pattern(&self, pattern: &SparsePattern) -> Vec<f64> {
        let mut out = vec![0.0; self.hidden()];
        for &i in pattern.indices() {
            for (o, x) in out.iter_mut().zip(self.rows.row(i as usize)) {
                *o += x;
            }
        }
        out
    }

    pub fn encode_token(&self, token: &Token) -> Vec<f64> {
        self.encode_pattern(&pattern(token, &self.cfg))
    }

    /// One embedding per token of `split(text)`.
    pub fn encode_text(&self, text: &str, split_cfg: &SplitConfig) -> Vec<Vec<f64>> {
        split(text, split_cfg)
            .iter()
            .map(|t| self.encode_token(t))
            .collect()
    }

    /// Writes the checkpoint: `TFEM`, version, `v`, `h` (u64), `m`, `k`
    /// (u32), hash name (u32 length + bytes), then `v·h` row-major f32, all
    /// little-endian.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        binio::write_u32(w, VERSION)?;
        binio::write_u64(w, self.cfg.v() as u64)?;
        binio::write_u64(w, self.hidden() as u64)?;
        binio::write_u32(w, self.cfg.m() as u32)?;
        binio::write_u32(w, self.cfg.k() as u32)?;
        binio::write_str(w, self.cfg.hash().name())?;
        binio::write_f32s(w, self.rows.as_slice())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        const WHAT: &str = "embedding checkpoint";
        binio::read_magic(r, MAGIC, WHAT)?;
        let version = binio::read_u32(r, WHAT)?;
        if version != VERSION {
            return Err(Error::format(
                WHAT,
                format!("unsupported version {version}"),
            ));
        }
        let v = binio::read_len(r, WHAT)?;
        let h = binio::read_len(r, WHAT)?;
        let m = binio::read_u32(r, WHAT)? as usize;
        let k = binio::read_u32(r, WHAT)? as usize;
        let hash: HashAlgorithm = binio::read_str(r, WHAT)?.parse()?;
        let cfg = TFreeConfig::with_hash(v, m, k, hash)?;
        let n = v
            .checked_mul(h)
            .ok_or_else(|| Error::format(WHAT, "shape overflow"))?;
        let data = binio::read_f32s(r, n, WHAT)?;
        Self::from_matrix(cfg, Matrix::from_vec(v, h, data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> TFreeConfig {
        TFreeConfig::new(256, 4, 1).unwrap()
    }

    #[test]
    fn zeros_give_zero_vectors() {
        let e = EmbeddingMatrix::zeros(small_cfg(), 8);
        let tok = Token::Word("anything".into());
        assert_eq!(e.encode_token(&tok), vec![0.0; 8]);
    }

    #[test]
    fn identity_like_rows_histogram() {
        let cfg = small_cfg();
        let h = 16;
        let rows = Matrix::from_fn(cfg.v(), h, |r, c| if r % h == c { 1.0 } else { 0.0 });
        let e = EmbeddingMatrix::from_matrix(cfg, rows).unwrap();
        let tok = Token::Word("Hello".into());
        let pat = pattern(&tok, &cfg);
        let mut hist = vec![0.0; h];
        for &i in pat.indices() {
            hist[i as usize % h] += 1.0;
        }
        assert_eq!(e.encode_token(&tok), hist);
    }

    #[test]
    fn text_gives_one_vector_per_token() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = EmbeddingMatrix::random(small_cfg(), 4, &mut rng);
        let sc = SplitConfig::default();
        assert_eq!(e.encode_text("Hello word!", &sc).len(), 3);
        assert_eq!(e.encode_text("In 2024", &sc).len(), 5);
        assert!(e.encode_text("", &sc).is_empty());
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let e = EmbeddingMatrix::random(small_cfg(), 3, &mut rng);
        let mut buf = Vec::new();
        e.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 + 8 + 4 + 4 + 4 + 7 + 256 * 3 * 4);
        let back = EmbeddingMatrix::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back.config(), e.config());
        for (a, b) in back.matrix().as_slice().iter().zip(e.matrix().as_slice()) {
            assert_eq!(*a, f64::from(*b as f32));
        }
        assert!(EmbeddingMatrix::read_from(&mut &buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(EmbeddingMatrix::read_from(&mut bad.as_slice()).is_err());
    }

    #[test]
    fn rejects_wrong_shape_or_nan() {
        let cfg = small_cfg();
        assert!(EmbeddingMatrix::from_matrix(cfg, Matrix::zeros(10, 4)).is_err());
        let mut m = Matrix::zeros(cfg.v(), 2);
        m.row_mut(3)[1] = f64::NAN;
        assert!(EmbeddingMatrix::from_matrix(cfg, m).is_err());
    }
}
