//! Synthetic panels with planted correlation modes and AR(1) noise.
//!
//! Each series is `w_ℓ(t) = Σ_n c_n(t) U_ℓ⁽ⁿ⁾ + ε_ℓ(t)`. Driver variances `v_n`
//! and noise variances `D_ℓ = 1 − Σ_n v_n (U_ℓ⁽ⁿ⁾)²` are chosen so that every
//! series has unit population variance and, for evenly spread loadings, the
//! population correlation matrix has eigenvalue `λ_n` along `U⁽ⁿ⁾`. The output
//! is re-standardized, so the planted eigenvalues are targets rather than
//! exact values.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{
    standardize, GrowthMethod, GrowthPanel, Month, Panel, SeriesId, StandardizedPanel,
};

/// Time dependence of a planted mode's amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Driver {
    /// `√(2v)·cos(2π t/period + phase)`
    Sinusoid { period: f64, phase: f64 },
    /// Stationary AR(1) with the given lag-one coefficient.
    Ar1 { coefficient: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadingKind {
    /// Gaussian random direction orthogonalized against earlier modes.
    Random,
    /// `1/√M` in every component.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Loading {
    Named(LoadingKind),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedMode {
    pub loading: Loading,
    pub eigenvalue: f64,
    pub driver: Driver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoisePhi {
    Uniform(f64),
    PerSeries(Vec<f64>),
}

impl NoisePhi {
    fn get(&self, l: usize) -> f64 {
        match self {
            NoisePhi::Uniform(p) => *p,
            NoisePhi::PerSeries(v) => v[l],
        }
    }
}

impl Default for NoisePhi {
    fn default() -> Self {
        NoisePhi::Uniform(0.0)
    }
}

/// Generator configuration; serializes as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Series count `M`.
    pub m: usize,
    /// Sample length `N′`.
    pub n_prime: usize,
    #[serde(default)]
    pub modes: Vec<PlantedMode>,
    #[serde(default)]
    pub noise_phi: NoisePhi,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    /// Independent white noise.
    pub fn iid(m: usize, n_prime: usize, seed: u64) -> Self {
        Self {
            m,
            n_prime,
            modes: Vec::new(),
            noise_phi: NoisePhi::Uniform(0.0),
            seed,
        }
    }

    pub fn with_noise_phi(mut self, phi: f64) -> Self {
        self.noise_phi = NoisePhi::Uniform(phi);
        self
    }

    pub fn with_mode(mut self, mode: PlantedMode) -> Self {
        self.modes.push(mode);
        self
    }

    /// Adds a random-direction mode with a white (AR(1), φ = 0) driver.
    pub fn with_random_mode(self, eigenvalue: f64) -> Self {
        self.with_mode(PlantedMode {
            loading: Loading::Named(LoadingKind::Random),
            eigenvalue,
            driver: Driver::Ar1 { coefficient: 0.0 },
        })
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// A generated panel together with the resolved loading vectors.
#[derive(Debug, Clone)]
pub struct Realization {
    pub panel: StandardizedPanel,
    pub loadings: Vec<Vec<f64>>,
}

const LOADING_STREAM: u64 = 0;
const DRIVER_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 1 << 32;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn resolve_loadings(spec: &SynthSpec) -> Result<Vec<Vec<f64>>> {
    let m = spec.m;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(LOADING_STREAM);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(spec.modes.len());
    for (n, mode) in spec.modes.iter().enumerate() {
        let v = match &mode.loading {
            Loading::Explicit(v) => {
                if v.len() != m {
                    return Err(Error::InfeasibleSpec(format!(
                        "loading of mode {} has {} components, expected {m}",
                        n + 1,
                        v.len()
                    )));
                }
                v.clone()
            }
            Loading::Named(LoadingKind::Uniform) => vec![1.0 / (m as f64).sqrt(); m],
            Loading::Named(LoadingKind::Random) => {
                let mut v: Vec<f64> = (0..m).map(|_| normal(&mut rng)).collect();
                // two Gram–Schmidt passes for numerical orthogonality
                for _ in 0..2 {
                    for u in &out {
                        let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                        for (a, b) in v.iter_mut().zip(u) {
                            *a -= d * b;
                        }
                    }
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter().map(|x| x / norm).collect()
            }
        };
        out.push(v);
    }
    for (i, a) in out.iter().enumerate() {
        for (j, b) in out.iter().enumerate().skip(i) {
            let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            if (d - expect).abs() > 1e-10 {
                return Err(Error::InfeasibleSpec(format!(
                    "loadings {} and {} are not orthonormal (dot {d})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(out)
}

fn ar1_series(rng: &mut ChaCha8Rng, n: usize, phi: f64, variance: f64) -> Vec<f64> {
    let sd = variance.sqrt();
    let innov = sd * (1.0 - phi * phi).sqrt();
    let mut x = Vec::with_capacity(n);
    let mut prev = sd * normal(rng);
    x.push(prev);
    for _ in 1..n {
        prev = phi * prev + innov * normal(rng);
        x.push(prev);
    }
    x
}

/// Generates the panel and returns it with the loadings actually used.
pub fn realize(spec: &SynthSpec) -> Result<Realization> {
    let (m, n) = (spec.m, spec.n_prime);
    if m == 0 || n < 2 {
        return Err(Error::InfeasibleSpec(format!("need M >= 1 and N' >= 2, got {m}x{n}")));
    }
    if let NoisePhi::PerSeries(v) = &spec.noise_phi {
        if v.len() != m {
            return Err(Error::InfeasibleSpec(format!(
                "{} noise coefficients for {m} series",
                v.len()
            )));
        }
    }
    for l in 0..m {
        let phi = spec.noise_phi.get(l);
        if !(phi > -1.0 && phi < 1.0) {
            return Err(Error::InfeasibleSpec(format!("noise coefficient {phi} outside (-1, 1)")));
        }
    }
    let k = spec.modes.len();
    let total: f64 = spec.modes.iter().map(|p| p.eigenvalue).sum();
    if total > m as f64 + 1e-9 {
        return Err(Error::InfeasibleSpec(format!(
            "planted eigenvalues sum to {total} > M = {m}"
        )));
    }
    if k > m {
        return Err(Error::InfeasibleSpec(format!("{k} modes for {m} series")));
    }
    let loadings = resolve_loadings(spec)?;

    // noise floor shared by all directions
    let floor = if k == m { 0.0 } else { (m as f64 - total) / (m - k) as f64 };
    let driver_var: Vec<f64> = spec
        .modes
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let v = p.eigenvalue - floor;
            if v < 0.0 {
                Err(Error::InfeasibleSpec(format!(
                    "mode {} eigenvalue {} below the noise floor {floor}",
                    i + 1,
                    p.eigenvalue
                )))
            } else {
                Ok(v)
            }
        })
        .collect::<Result<_>>()?;
    let noise_var: Vec<f64> = (0..m)
        .map(|l| {
            let used: f64 = driver_var
                .iter()
                .zip(&loadings)
                .map(|(v, u)| v * u[l] * u[l])
                .sum();
            let d = 1.0 - used;
            if d < -1e-9 {
                Err(Error::InfeasibleSpec(format!(
                    "series {} receives variance {used} > 1 from planted modes",
                    l + 1
                )))
            } else {
                Ok(d.max(0.0))
            }
        })
        .collect::<Result<_>>()?;

    let mut rates = vec![vec![0.0; n]; m];
    for (i, (mode, &v)) in spec.modes.iter().zip(&driver_var).enumerate() {
        let c: Vec<f64> = match mode.driver {
            Driver::Sinusoid { period, phase } => {
                if !(period > 0.0) {
                    return Err(Error::InfeasibleSpec(format!("sinusoid period {period}")));
                }
                let amp = (2.0 * v).sqrt();
                (1..=n)
                    .map(|j| amp * (2.0 * PI * j as f64 / period + phase).cos())
                    .collect()
            }
            Driver::Ar1 { coefficient } => {
                if !(coefficient > -1.0 && coefficient < 1.0) {
                    return Err(Error::InfeasibleSpec(format!(
                        "driver coefficient {coefficient} outside (-1, 1)"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                rng.set_stream(DRIVER_STREAM + i as u64);
                ar1_series(&mut rng, n, coefficient, v)
            }
        };
        for l in 0..m {
            let u = loadings[i][l];
            for j in 0..n {
                rates[l][j] += c[j] * u;
            }
        }
    }
    for (l, row) in rates.iter_mut().enumerate() {
        if noise_var[l] > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(NOISE_STREAM + l as u64);
            let e = ar1_series(&mut rng, n, spec.noise_phi.get(l), noise_var[l]);
            for (x, e) in row.iter_mut().zip(e) {
                *x += e;
            }
        }
    }
    let growth = GrowthPanel::from_rates(
        SeriesId::layout_for(m),
        synthetic_start().range(n),
        rates,
        GrowthMethod::Log10,
    )?;
    Ok(Realization {
        panel: standardize(&growth)?,
        loadings,
    })
}

/// Generates a standardized panel; deterministic in `spec.seed`.
pub fn generate(spec: &SynthSpec) -> Result<StandardizedPanel> {
    Ok(realize(spec)?.panel)
}

fn synthetic_start() -> Month {
    Month::new(1988, 1).expect("valid month")
}

/// Index levels whose base-10 log growth rates are `scale·w`, starting at 100.
pub fn to_levels(w: &StandardizedPanel, scale: f64) -> Result<Panel> {
    let n = w.len();
    let start = w.months().first().copied().unwrap_or_else(synthetic_start);
    let levels = (0..w.series_count())
        .map(|l| {
            let mut s = Vec::with_capacity(n + 1);
            let mut level = 100.0f64;
            s.push(level);
            for j in 0..n {
                level *= 10f64.powf(scale * w.values()[(l, j)]);
                s.push(level);
            }
            s
        })
        .collect();
    Panel::new(start.range(n + 1), w.ids().to_vec(), levels)
}
