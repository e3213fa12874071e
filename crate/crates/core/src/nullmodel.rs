//! Autocorrelation diagnostics and shuffling null models.
//!
//! Two surrogates are supported. A complete shuffle permutes each series
//! independently in time, destroying both mutual correlations and
//! autocorrelations. A rotational shuffle cyclically shifts each series by an
//! independent random offset, destroying only mutual correlations. Note that
//! the autocorrelation estimator [`autocorrelation`] is the non-cyclic one; the
//! quantity a rotation preserves exactly is [`cyclic_autocorrelation`].

use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::panel::StandardizedPanel;
use crate::spectral::{correlation_of, eigenvalues_desc, ModeBasis};
use crate::stats::{percentile_sorted, sort_floats};

/// Default Monte Carlo sample count.
pub const DEFAULT_SAMPLES: usize = 10_000;
/// Default confidence level of the edge interval.
pub const DEFAULT_CONFIDENCE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShuffleMode {
    Complete,
    Rotational,
}

impl std::str::FromStr for ShuffleMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complete" => Ok(ShuffleMode::Complete),
            "rotational" => Ok(ShuffleMode::Rotational),
            _ => Err(Error::Parse(format!("unknown shuffle mode {s:?}"))),
        }
    }
}

impl std::fmt::Display for ShuffleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ShuffleMode::Complete => "complete",
            ShuffleMode::Rotational => "rotational",
        })
    }
}

/// `R(m) = 1/(N′−m) Σ_{j=1}^{N′−m} x(t_j) x(t_{j+m})`.
pub fn autocorrelation_of(x: &[f64], lag: usize) -> Result<f64> {
    let n = x.len();
    if n < 2 || lag > n - 2 {
        return Err(Error::LagOutOfRange {
            lag,
            max: n.saturating_sub(2),
        });
    }
    let terms = n - lag;
    Ok(x[..terms]
        .iter()
        .zip(&x[lag..])
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / terms as f64)
}

/// Autocorrelation of series `l` (1-based flat index) at `lag` months.
pub fn autocorrelation(w: &StandardizedPanel, l: usize, lag: usize) -> Result<f64> {
    if l == 0 || l > w.series_count() {
        return Err(Error::BadSeriesIndex {
            index: l,
            max: w.series_count(),
        });
    }
    autocorrelation_of(&w.row(l - 1), lag)
}

/// Periodic-boundary autocorrelation `1/N′ Σ_j x(t_j) x(t_{j+m mod N′})`.
pub fn cyclic_autocorrelation(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    (0..n).map(|j| x[j] * x[(j + lag) % n]).sum::<f64>() / n as f64
}

/// Half-width `z/√N′` of the two-sided band expected for a series without autocorrelation.
pub fn no_autocorr_band(n_prime: usize, confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::BadConfidence(confidence));
    }
    if n_prime < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: n_prime,
        });
    }
    let z = Normal::standard().inverse_cdf(0.5 + confidence / 2.0);
    Ok(z / (n_prime as f64).sqrt())
}

/// Cyclic shift by `tau`: `x′(t_j) = x(t_{1 + mod(j−1−τ, N′)})`.
pub fn rotate(x: &mut [f64], tau: usize) {
    if !x.is_empty() {
        let k = tau % x.len();
        x.rotate_right(k);
    }
}

fn shuffle_row<R: Rng + ?Sized>(row: &mut [f64], mode: ShuffleMode, rng: &mut R) {
    match mode {
        ShuffleMode::Complete => row.shuffle(rng),
        ShuffleMode::Rotational => {
            let n = row.len();
            if n > 0 {
                let tau = rng.random_range(0..n);
                rotate(row, tau);
            }
        }
    }
}

fn shuffled<R: Rng + ?Sized>(w: &StandardizedPanel, mode: ShuffleMode, rng: &mut R) -> StandardizedPanel {
    let values = w.values();
    let (m, n) = values.shape();
    let mut out = DMatrix::zeros(m, n);
    let mut row = vec![0.0; n];
    for l in 0..m {
        for j in 0..n {
            row[j] = values[(l, j)];
        }
        shuffle_row(&mut row, mode, rng);
        for j in 0..n {
            out[(l, j)] = row[j];
        }
    }
    w.with_values(out)
}

/// Independent uniform random permutation of every series.
pub fn complete_shuffle<R: Rng + ?Sized>(w: &StandardizedPanel, rng: &mut R) -> StandardizedPanel {
    shuffled(w, ShuffleMode::Complete, rng)
}

/// Independent uniform cyclic shift `τ ∈ [0, N′−1]` of every series.
pub fn rotational_shuffle<R: Rng + ?Sized>(w: &StandardizedPanel, rng: &mut R) -> StandardizedPanel {
    shuffled(w, ShuffleMode::Rotational, rng)
}

/// Shuffle by `mode`.
pub fn shuffle<R: Rng + ?Sized>(w: &StandardizedPanel, mode: ShuffleMode, rng: &mut R) -> StandardizedPanel {
    shuffled(w, mode, rng)
}

/// Random stream for one (sample, series) pair. ChaCha streams are indexed by
/// sample; series are spaced 2⁴⁰ words apart within a stream.
pub fn stream_rng(seed: u64, sample: usize, series: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample as u64);
    rng.set_word_pos((series as u128) << 40);
    rng
}

/// Shuffled panel of one ensemble sample.
pub fn ensemble_sample(w: &StandardizedPanel, mode: ShuffleMode, seed: u64, sample: usize) -> StandardizedPanel {
    let (m, n) = w.values().shape();
    let mut out = DMatrix::zeros(m, n);
    let mut row = vec![0.0; n];
    for l in 0..m {
        for j in 0..n {
            row[j] = w.values()[(l, j)];
        }
        let mut rng = stream_rng(seed, sample, l);
        shuffle_row(&mut row, mode, &mut rng);
        for j in 0..n {
            out[(l, j)] = row[j];
        }
    }
    w.with_values(out)
}

/// Location and spread of the largest null eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub center: f64,
    pub low: f64,
    pub high: f64,
    pub confidence: f64,
}

/// Eigenvalue statistics of a shuffling null model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullEnsemble {
    pub mode: ShuffleMode,
    pub samples: usize,
    pub seed: u64,
    /// Largest eigenvalue of each sample, in sample order.
    pub lambda_max: Vec<f64>,
    pub edge: Edge,
    /// All eigenvalues, sample-major, descending within a sample.
    #[serde(skip)]
    pub pooled: Vec<f64>,
}

impl NullEnsemble {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn pooled_sorted(&self) -> Vec<f64> {
        let mut v = self.pooled.clone();
        sort_floats(&mut v);
        v
    }

    /// `sample,rank,eigenvalue` rows.
    pub fn write_pooled_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "sample,rank,eigenvalue")?;
        if self.samples == 0 {
            return Ok(());
        }
        let m = self.pooled.len() / self.samples;
        for (i, v) in self.pooled.iter().enumerate() {
            writeln!(out, "{},{},{}", i / m + 1, i % m + 1, v)?;
        }
        Ok(())
    }
}

/// Monte Carlo ensemble of shuffled-panel spectra. The result depends only on
/// `(w, mode, samples, seed)`, not on the number of worker threads.
pub fn null_ensemble(
    w: &StandardizedPanel,
    mode: ShuffleMode,
    samples: usize,
    seed: u64,
) -> Result<NullEnsemble> {
    if samples == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let spectra: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let panel = ensemble_sample(w, mode, seed, s);
            eigenvalues_desc(&correlation_of(panel.values()))
        })
        .collect();
    let lambda_max: Vec<f64> = spectra.iter().map(|ev| ev[0]).collect();
    let pooled: Vec<f64> = spectra.into_iter().flatten().collect();
    let edge = edge_of(&lambda_max, DEFAULT_CONFIDENCE)?;
    Ok(NullEnsemble {
        mode,
        samples,
        seed,
        lambda_max,
        edge,
        pooled,
    })
}

fn edge_of(lambda_max: &[f64], confidence: f64) -> Result<Edge> {
    if lambda_max.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if !(0.0..1.0).contains(&confidence) {
        return Err(Error::BadConfidence(confidence));
    }
    let mut sorted = lambda_max.to_vec();
    sort_floats(&mut sorted);
    let center = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let tail = (1.0 - confidence) / 2.0;
    Ok(Edge {
        center,
        low: percentile_sorted(&sorted, tail),
        high: percentile_sorted(&sorted, 1.0 - tail),
        confidence,
    })
}

/// Mean of the per-sample largest eigenvalues with the symmetric percentile
/// interval at `confidence`; `confidence = 0` collapses the interval to the median.
pub fn upper_edge(e: &NullEnsemble, confidence: f64) -> Result<Edge> {
    edge_of(&e.lambda_max, confidence)
}

/// Number of eigenvalues strictly above `threshold`.
pub fn count_significant(b: &ModeBasis, threshold: f64) -> usize {
    b.eigenvalues().iter().filter(|&&l| l > threshold).count()
}
