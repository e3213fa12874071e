//! Smoothing, lag correlation, Fourier filtering, phases and external stimuli.
//!
//! Time is indexed `t_j = j` for `j = 1..=N′` months. The forward transform is
//! `ã(ω_k) = N′^{-1/2} Σ_j x(t_j) e^{+iω_k t_j}` with `ω_k = 2πk/N′`; the inverse
//! uses `e^{−iω_k t_j}`, so a component `cos(ω_k t + φ)` has `arg ã(ω_k) = −φ`.

use std::f64::consts::PI;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::{position, Month, SeriesId, Variable};
use crate::response::ReducedSusceptibility;
use crate::spectral::{ModeBasis, ModeSeries};

/// `k = 1, 2, 4, 6`, i.e. periods of roughly 240, 120, 60 and 40 months for `N′ = 240`.
pub const KSET_CYCLES: [usize; 4] = [1, 2, 4, 6];
/// `k ≤ 9`, periods longer than two years.
pub const KSET_LONG: [usize; 9] = [1, 2, 3, 4, 5, 6, 7, 8, 9];
/// Nominal length used for period display labels.
pub const NOMINAL_LENGTH: f64 = 240.0;

/// Frequency index set for the long-period component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KSet {
    Cycles,
    Long,
    Custom(Vec<usize>),
}

impl KSet {
    pub fn indices(&self) -> Vec<usize> {
        match self {
            KSet::Cycles => KSET_CYCLES.to_vec(),
            KSet::Long => KSET_LONG.to_vec(),
            KSet::Custom(v) => v.clone(),
        }
    }
}

impl Default for KSet {
    fn default() -> Self {
        KSet::Cycles
    }
}

impl FromStr for KSet {
    type Err = Error;

    /// `cycles`, `long`, or a comma-separated index list such as `1,2,4,6`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cycles" => Ok(KSet::Cycles),
            "long" => Ok(KSet::Long),
            other => {
                let v = other
                    .split(',')
                    .map(|p| {
                        p.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::Parse(format!("bad frequency index {p:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if v.is_empty() {
                    return Err(Error::EmptyInput);
                }
                Ok(KSet::Custom(v))
            }
        }
    }
}

impl std::fmt::Display for KSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KSet::Cycles => f.write_str("cycles"),
            KSet::Long => f.write_str("long"),
            KSet::Custom(v) => {
                let s: Vec<String> = v.iter().map(|k| k.to_string()).collect();
                f.write_str(&s.join(","))
            }
        }
    }
}

/// Boundary handling of the moving average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgePolicy {
    /// Average over the part of `[j−ξ, j+ξ]` inside the series.
    Shrink,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothedSeries {
    pub values: Vec<f64>,
    pub xi: usize,
    pub edge: EdgePolicy,
}

pub fn moving_average(x: &[f64], xi: usize) -> Result<SmoothedSeries> {
    let n = x.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if xi >= n {
        return Err(Error::WindowTooWide { xi, len: n });
    }
    let values = (0..n)
        .map(|j| {
            if xi == 0 {
                return x[j];
            }
            let lo = j.saturating_sub(xi);
            let hi = (j + xi).min(n - 1);
            let s: f64 = x[lo..=hi].iter().sum();
            s / (hi - lo + 1) as f64
        })
        .collect();
    Ok(SmoothedSeries {
        values,
        xi,
        edge: EdgePolicy::Shrink,
    })
}

/// `⟨x̄(t) ȳ(t−τ)⟩ / √(⟨x̄²⟩⟨ȳ²⟩)`, all averages over the overlapping times.
pub fn lag_correlation(x: &[f64], y: &[f64], tau: i64, xi: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let n = x.len() as i64;
    let overlap = (n - tau.abs()).max(0) as usize;
    if overlap < 2 {
        return Err(Error::InsufficientOverlap(overlap));
    }
    let xs = moving_average(x, xi)?.values;
    let ys = moving_average(y, xi)?.values;
    let start = tau.max(0) as usize;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for t in start..start + overlap {
        let a = xs[t];
        let b = ys[(t as i64 - tau) as usize];
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateSeries(1));
    }
    if syy == 0.0 {
        return Err(Error::DegenerateSeries(2));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Fourier coefficients `ã(ω_k)`, `k = 0..N′−1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoefficients {
    pub values: Vec<Complex64>,
}

impl SpectralCoefficients {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `x(t_j) = N′^{-1/2} Σ_k ã(ω_k) e^{−iω_k t_j}`.
    pub fn inverse(&self) -> Vec<Complex64> {
        let n = self.values.len();
        let mut buf: Vec<Complex64> = self
            .values
            .iter()
            .enumerate()
            .map(|(k, a)| a * unit(-omega(k, n)))
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let s = 1.0 / (n as f64).sqrt();
        buf.iter().map(|z| z * s).collect()
    }

    pub fn inverse_real(&self) -> Vec<f64> {
        self.inverse().iter().map(|z| z.re).collect()
    }
}

fn omega(k: usize, n: usize) -> f64 {
    2.0 * PI * k as f64 / n as f64
}

fn unit(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}

pub fn dft(x: &[f64]) -> Result<SpectralCoefficients> {
    let n = x.len();
    if n < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: n,
        });
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    // unnormalized inverse FFT gives Σ_{j=0}^{N′-1} x e^{+iωj}; shift to t_j = j + 1
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let s = 1.0 / (n as f64).sqrt();
    let values = buf
        .iter()
        .enumerate()
        .map(|(k, z)| z * unit(omega(k, n)) * s)
        .collect();
    Ok(SpectralCoefficients { values })
}

fn check_kset(kset: &[usize], n: usize) -> Result<()> {
    if kset.is_empty() {
        return Err(Error::EmptyInput);
    }
    match kset.iter().find(|&&k| k == 0 || k >= n) {
        Some(&k) => Err(Error::BadFrequencyIndex { k, max: n - 1 }),
        None => Ok(()),
    }
}

/// Inverse transform keeping only `kset` and the conjugate partners `N′ − k`.
pub fn long_period(x: &[f64], kset: &[usize]) -> Result<Vec<f64>> {
    let c = dft(x)?;
    let n = c.len();
    check_kset(kset, n)?;
    let mut keep = vec![false; n];
    for &k in kset {
        keep[k] = true;
        keep[n - k] = true;
    }
    let filtered = SpectralCoefficients {
        values: c
            .values
            .iter()
            .zip(&keep)
            .map(|(z, &k)| if k { *z } else { Complex64::new(0.0, 0.0) })
            .collect(),
    };
    Ok(filtered.inverse_real())
}

fn check_two_modes(ms: &ModeSeries, b: &ModeBasis) -> Result<()> {
    if b.dim() < 2 {
        return Err(Error::BadModeCount { k: 2, max: b.dim() });
    }
    if ms.mode_count() < 2 {
        return Err(Error::BadModeCount {
            k: 2,
            max: ms.mode_count(),
        });
    }
    Ok(())
}

/// `ā_n − a_n^{(LP)}` for modes 1 and 2.
pub fn mode_residuals(ms: &ModeSeries, xi: usize, kset: &[usize]) -> Result<[Vec<f64>; 2]> {
    let one = |n| -> Result<Vec<f64>> {
        let a = ms.mode(n)?;
        let smooth = moving_average(&a, xi)?.values;
        let lp = long_period(&a, kset)?;
        Ok(smooth.iter().zip(&lp).map(|(s, l)| s - l).collect())
    };
    Ok([one(1)?, one(2)?])
}

/// `⟨w_ℓ(t)⟩ = Σ_{n=1,2} (ā_n(t) − a_n^{(LP)}(t)) V_ℓ⁽ⁿ⁾`, an `M×N′` matrix.
pub fn residual_disturbance(
    ms: &ModeSeries,
    b: &ModeBasis,
    xi: usize,
    kset: &[usize],
) -> Result<DMatrix<f64>> {
    check_two_modes(ms, b)?;
    let r = mode_residuals(ms, xi, kset)?;
    let v = b.vectors();
    let n = ms.len();
    Ok(DMatrix::from_fn(b.dim(), n, |l, t| {
        r[0][t] * v[(l, 0)] + r[1][t] * v[(l, 1)]
    }))
}

/// External fields `(η₁, η₂)(t) = χ̂⁻¹ (⟨a₁⟩, ⟨a₂⟩)(t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StimulusSeries {
    pub months: Vec<Month>,
    pub eta1: Vec<f64>,
    pub eta2: Vec<f64>,
    pub beta: f64,
    pub kset: Vec<usize>,
    pub xi: usize,
}

impl StimulusSeries {
    pub fn max_abs(&self) -> (f64, f64) {
        let m = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        (m(&self.eta1), m(&self.eta2))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "date,eta1,eta2")?;
        for ((d, a), b) in self.months.iter().zip(&self.eta1).zip(&self.eta2) {
            writeln!(out, "{d},{a},{b}")?;
        }
        Ok(())
    }
}

pub fn external_stimuli(
    ms: &ModeSeries,
    b: &ModeBasis,
    chi: &ReducedSusceptibility,
    xi: usize,
    kset: &[usize],
) -> Result<StimulusSeries> {
    if chi.dim() < 2 {
        return Err(Error::BadModeCount {
            k: 2,
            max: chi.dim(),
        });
    }
    let c = &chi.values;
    let (a, bb, cc, d) = (c[(0, 0)], c[(0, 1)], c[(1, 0)], c[(1, 1)]);
    let det = a * d - bb * cc;
    let norm2 = a * a + bb * bb + cc * cc + d * d;
    if det.abs() <= 1e-12 * norm2 {
        return Err(Error::SingularSusceptibility(det));
    }
    let w = residual_disturbance(ms, b, xi, kset)?;
    // ⟨a_n⟩ = Σ_ℓ ⟨w_ℓ⟩ V_ℓ⁽ⁿ⁾
    let proj = b.vectors().columns(0, 2).transpose() * w;
    let n = ms.len();
    let mut eta1 = Vec::with_capacity(n);
    let mut eta2 = Vec::with_capacity(n);
    for t in 0..n {
        let (r1, r2) = (proj[(0, t)], proj[(1, t)]);
        eta1.push((d * r1 - bb * r2) / det);
        eta2.push((a * r2 - cc * r1) / det);
    }
    Ok(StimulusSeries {
        months: ms.months().to_vec(),
        eta1,
        eta2,
        beta: chi.beta,
        kset: kset.to_vec(),
        xi,
    })
}

/// What a [`PhaseTable`] refers to.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseLabel {
    Period { k: usize, months: f64 },
    FrequencyAveraged,
}

impl std::fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PhaseLabel::Period { k, .. } => write!(f, "T={}", (NOMINAL_LENGTH / *k as f64).round()),
            PhaseLabel::FrequencyAveraged => f.write_str("frequency-averaged"),
        }
    }
}

/// Phases in degrees within `(−180, 180]`; positive means ahead of the reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseTable {
    pub ids: Vec<SeriesId>,
    pub phases: Vec<f64>,
    pub reference: SeriesId,
    pub label: PhaseLabel,
    pub kset: Vec<usize>,
}

impl PhaseTable {
    pub fn phase(&self, id: SeriesId) -> Result<f64> {
        Ok(self.phases[position(&self.ids, id)?])
    }

    /// Unweighted mean phase over the goods of one variable.
    pub fn variable_mean(&self, alpha: Variable) -> Option<f64> {
        let v: Vec<f64> = self
            .ids
            .iter()
            .zip(&self.phases)
            .filter(|(id, _)| id.alpha == alpha)
            .map(|(_, p)| *p)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Goods rows with `P,S,I` columns when every variable is present, otherwise one row per series.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut goods: Vec<u16> = self.ids.iter().map(|id| id.goods).collect();
        goods.sort_unstable();
        goods.dedup();
        let table = goods.iter().all(|&g| {
            Variable::ALL
                .iter()
                .all(|&a| self.ids.contains(&SeriesId::new(a, g)))
        });
        if table {
            writeln!(out, "goods,P,S,I")?;
            for g in goods {
                let cell = |a| self.phase(SeriesId::new(a, g)).unwrap_or(f64::NAN);
                writeln!(
                    out,
                    "{g},{:.1},{:.1},{:.1}",
                    cell(Variable::Production),
                    cell(Variable::Shipments),
                    cell(Variable::Inventory)
                )?;
            }
        } else {
            writeln!(out, "series,phase")?;
            for (id, p) in self.ids.iter().zip(&self.phases) {
                writeln!(out, "{id},{p:.1}")?;
            }
        }
        Ok(())
    }
}

/// Maps degrees into `(−180, 180]`.
pub fn wrap_degrees(x: f64) -> f64 {
    let y = x.rem_euclid(360.0);
    if y > 180.0 {
        y - 360.0
    } else {
        y
    }
}

/// `w̃_ℓ(ω_k) = Σ_{n=1,2} ã_n(ω_k) V_ℓ⁽ⁿ⁾` for every series and each `k` in `kset`.
fn series_amplitudes(ms: &ModeSeries, b: &ModeBasis, kset: &[usize]) -> Result<Vec<Vec<Complex64>>> {
    check_two_modes(ms, b)?;
    check_kset(kset, ms.len())?;
    let a1 = dft(&ms.mode(1)?)?;
    let a2 = dft(&ms.mode(2)?)?;
    let v = b.vectors();
    Ok((0..b.dim())
        .map(|l| {
            kset.iter()
                .map(|&k| a1.values[k] * v[(l, 0)] + a2.values[k] * v[(l, 1)])
                .collect()
        })
        .collect())
}

fn phase_of(reference: Complex64, z: Complex64) -> f64 {
    wrap_degrees((reference.arg() - z.arg()).to_degrees())
}

pub fn mode_phases(ms: &ModeSeries, b: &ModeBasis, k: usize, reference: SeriesId) -> Result<PhaseTable> {
    let r = position(b.ids(), reference)?;
    let amps = series_amplitudes(ms, b, &[k])?;
    let zr = amps[r][0];
    if zr.norm() < 1e-12 {
        return Err(Error::ReferenceAmplitudeZero);
    }
    let mut phases: Vec<f64> = amps.iter().map(|z| phase_of(zr, z[0])).collect();
    phases[r] = 0.0;
    Ok(PhaseTable {
        ids: b.ids().to_vec(),
        phases,
        reference,
        label: PhaseLabel::Period {
            k,
            months: ms.len() as f64 / k as f64,
        },
        kset: vec![k],
    })
}

/// Circular mean of the per-frequency phases weighted by `|w̃_ℓ(ω_k)|²`.
pub fn freq_avg_phases(
    ms: &ModeSeries,
    b: &ModeBasis,
    kset: &[usize],
    reference: SeriesId,
) -> Result<PhaseTable> {
    let r = position(b.ids(), reference)?;
    let amps = series_amplitudes(ms, b, kset)?;
    if amps[r].iter().any(|z| z.norm() < 1e-12) {
        return Err(Error::ReferenceAmplitudeZero);
    }
    let mut phases = Vec::with_capacity(amps.len());
    for (l, z) in amps.iter().enumerate() {
        let total: f64 = z.iter().map(|z| z.norm_sqr()).sum();
        if total < 1e-12 {
            return Err(Error::DegenerateWeights(l + 1));
        }
        let s: Complex64 = z
            .iter()
            .zip(&amps[r])
            .map(|(z, zr)| z.norm_sqr() * unit(phase_of(*zr, *z).to_radians()))
            .sum();
        phases.push(wrap_degrees(s.arg().to_degrees()));
    }
    phases[r] = 0.0;
    Ok(PhaseTable {
        ids: b.ids().to_vec(),
        phases,
        reference,
        label: PhaseLabel::FrequencyAveraged,
        kset: kset.to_vec(),
    })
}
