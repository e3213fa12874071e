//! Equal-time correlation matrices, their eigenmodes, and the
//! Marchenko–Pastur reference law for random correlation matrices.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Month, SeriesId, StandardizedPanel, Variable};

const SYMMETRY_TOL: f64 = 1e-12;
const DIAGONAL_TOL: f64 = 1e-12;
const RAW_ENTRY_TOL: f64 = 1e-9;
/// Off-diagonal slack tolerated for genuine matrices before a stronger warning.
pub const GENUINE_ENTRY_SLACK: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Raw,
    Genuine,
}

impl std::fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MatrixKind::Raw => "raw",
            MatrixKind::Genuine => "genuine",
        })
    }
}

impl std::str::FromStr for MatrixKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(MatrixKind::Raw),
            "genuine" => Ok(MatrixKind::Genuine),
            _ => Err(Error::Parse(format!("unknown matrix kind {s:?}"))),
        }
    }
}

/// Symmetric correlation matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrMatrix {
    kind: MatrixKind,
    ids: Vec<SeriesId>,
    data: DMatrix<f64>,
    /// Number of modes retained, for genuine matrices.
    modes: Option<usize>,
    warnings: Vec<String>,
}

impl CorrMatrix {
    /// Validates and wraps a matrix.
    ///
    /// Raw matrices must be positive semidefinite; genuine matrices need not be,
    /// and entries outside `[-1, 1]` only produce warnings.
    pub fn new(
        kind: MatrixKind,
        ids: Vec<SeriesId>,
        data: DMatrix<f64>,
        modes: Option<usize>,
    ) -> Result<Self> {
        let m = data.nrows();
        if data.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: data.ncols(),
            });
        }
        if ids.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: ids.len(),
            });
        }
        check_symmetric(&data, SYMMETRY_TOL)?;
        for i in 0..m {
            if (data[(i, i)] - 1.0).abs() > DIAGONAL_TOL {
                return Err(Error::Parse(format!(
                    "diagonal entry {} of a correlation matrix is {}",
                    i + 1,
                    data[(i, i)]
                )));
            }
        }
        let mut c = Self {
            kind,
            ids,
            data,
            modes,
            warnings: Vec::new(),
        };
        match kind {
            MatrixKind::Raw => {
                if let Some(v) = c.data.iter().find(|v| v.abs() > 1.0 + RAW_ENTRY_TOL) {
                    return Err(Error::Parse(format!("correlation entry {v} outside [-1, 1]")));
                }
                if m > 0 {
                    let min = c.data.clone().symmetric_eigenvalues().min();
                    if min < -1e-9 {
                        return Err(Error::Parse(format!(
                            "raw correlation matrix is not positive semidefinite (min eigenvalue {min:e})"
                        )));
                    }
                }
            }
            MatrixKind::Genuine => c.collect_range_warnings(),
        }
        Ok(c)
    }

    fn collect_range_warnings(&mut self) {
        let worst = self.data.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if worst > 1.0 + GENUINE_ENTRY_SLACK {
            self.warnings.push(format!(
                "genuine matrix has entries up to |{worst:.4}|, beyond [-1-{GENUINE_ENTRY_SLACK}, 1+{GENUINE_ENTRY_SLACK}]"
            ));
        } else if worst > 1.0 {
            self.warnings
                .push(format!("genuine matrix has entries up to |{worst:.4}| > 1"));
        }
    }

    pub(crate) fn from_trusted(
        kind: MatrixKind,
        ids: Vec<SeriesId>,
        data: DMatrix<f64>,
        modes: Option<usize>,
    ) -> Self {
        let mut c = Self {
            kind,
            ids,
            data,
            modes,
            warnings: Vec::new(),
        };
        if kind == MatrixKind::Genuine {
            c.collect_range_warnings();
        }
        c
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn ids(&self) -> &[SeriesId] {
        &self.ids
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn modes(&self) -> Option<usize> {
        self.modes
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn get(&self, row: SeriesId, col: SeriesId) -> Result<f64> {
        let i = crate::panel::position(&self.ids, row)?;
        let j = crate::panel::position(&self.ids, col)?;
        Ok(self.data[(i, j)])
    }
}

pub(crate) fn check_symmetric(data: &DMatrix<f64>, tol: f64) -> Result<()> {
    let m = data.nrows();
    if data.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: data.ncols(),
        });
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let gap = (data[(i, j)] - data[(j, i)]).abs();
            if gap > tol || gap.is_nan() {
                return Err(Error::NotSymmetric { row: i + 1, col: j + 1, gap });
            }
        }
    }
    Ok(())
}

/// `C = W Wᵀ / N′`, the time average of products of standardized rates.
pub fn correlation_matrix(w: &StandardizedPanel) -> CorrMatrix {
    CorrMatrix::from_trusted(
        MatrixKind::Raw,
        w.ids().to_vec(),
        correlation_of(w.values()),
        None,
    )
}

/// Symmetric correlation of the rows of a standardized matrix.
pub(crate) fn correlation_of(values: &DMatrix<f64>) -> DMatrix<f64> {
    let n = values.ncols() as f64;
    let mut c = values * values.transpose() / n;
    let m = c.nrows();
    for i in 0..m {
        for j in (i + 1)..m {
            let v = c[(i, j)];
            c[(j, i)] = v;
        }
    }
    c
}

/// How eigenvector signs were fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConvention {
    /// Production components sum to a non-negative value; the largest-magnitude
    /// component is positive when that sum vanishes.
    ProductionSum,
}

/// Eigenvalues in descending order with orthonormal, sign-fixed eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBasis {
    kind: MatrixKind,
    ids: Vec<SeriesId>,
    eigenvalues: Vec<f64>,
    /// Column `n` is `V⁽ⁿ⁺¹⁾`.
    vectors: DMatrix<f64>,
    sign: SignConvention,
}

impl ModeBasis {
    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn ids(&self) -> &[SeriesId] {
        &self.ids
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Eigenvector of 1-based mode `n`.
    pub fn vector(&self, n: usize) -> Result<Vec<f64>> {
        self.check_mode(n)?;
        Ok(self.vectors.column(n - 1).iter().copied().collect())
    }

    pub fn sign_convention(&self) -> SignConvention {
        self.sign
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn check_mode(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.dim() {
            return Err(Error::BadModeIndex {
                index: n,
                max: self.dim(),
            });
        }
        Ok(())
    }
}

fn fix_sign(v: &mut [f64], production: &[bool]) {
    let sum: f64 = v
        .iter()
        .zip(production)
        .filter(|(_, &p)| p)
        .map(|(x, _)| x)
        .sum();
    let flip = if sum.abs() > 1e-12 {
        sum < 0.0
    } else {
        let mut best = 0usize;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[best].abs() {
                best = i;
            }
        }
        v[best] < 0.0
    };
    if flip {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

fn lexicographic_desc(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.partial_cmp(x) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

/// Full symmetric eigendecomposition, sorted descending, with the sign
/// convention applied.
pub fn eigendecompose(c: &CorrMatrix) -> Result<ModeBasis> {
    eigendecompose_matrix(c.kind, c.ids.clone(), &c.data)
}

pub(crate) fn eigendecompose_matrix(
    kind: MatrixKind,
    ids: Vec<SeriesId>,
    data: &DMatrix<f64>,
) -> Result<ModeBasis> {
    check_symmetric(data, SYMMETRY_TOL)?;
    let m = data.nrows();
    if m == 0 {
        return Err(Error::EmptyInput);
    }
    let eig = SymmetricEigen::try_new(data.clone(), f64::EPSILON, 0).ok_or(Error::NotConverged {
        residual: f64::INFINITY,
    })?;
    let production: Vec<bool> = ids
        .iter()
        .map(|id| id.alpha == Variable::Production)
        .collect();
    let mut modes: Vec<(f64, Vec<f64>)> = (0..m)
        .map(|n| {
            let mut v: Vec<f64> = eig.eigenvectors.column(n).iter().copied().collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in &mut v {
                *x /= norm;
            }
            fix_sign(&mut v, &production);
            (eig.eigenvalues[n], v)
        })
        .collect();
    modes.sort_by(|a, b| b.0.total_cmp(&a.0));
    // ties: order degenerate eigenvalues by their vectors
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && (modes[end].0 - modes[start].0).abs() <= 1e-10 * modes[start].0.abs().max(1.0)
        {
            end += 1;
        }
        if end - start > 1 {
            modes[start..end].sort_by(|a, b| lexicographic_desc(&a.1, &b.1));
        }
        start = end;
    }

    let eigenvalues: Vec<f64> = modes.iter().map(|(l, _)| *l).collect();
    let vectors = DMatrix::from_fn(m, m, |i, n| modes[n].1[i]);

    let residual = (data * &vectors - &vectors * DMatrix::from_diagonal(&eigenvalues.clone().into()))
        .amax();
    if residual > 1e-9 * m as f64 {
        return Err(Error::NotConverged { residual });
    }
    Ok(ModeBasis {
        kind,
        ids,
        eigenvalues,
        vectors,
        sign: SignConvention::ProductionSum,
    })
}

/// Eigenvalues only, descending.
pub fn eigenvalues_desc(data: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = data.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Mode coefficients `a_n(t_j)`, one row per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSeries {
    months: Vec<Month>,
    coefficients: DMatrix<f64>,
}

impl ModeSeries {
    pub fn new(months: Vec<Month>, coefficients: DMatrix<f64>) -> Result<Self> {
        if months.len() != coefficients.ncols() {
            return Err(Error::DimensionMismatch {
                expected: months.len(),
                actual: coefficients.ncols(),
            });
        }
        Ok(Self {
            months,
            coefficients,
        })
    }

    pub fn months(&self) -> &[Month] {
        &self.months
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    /// 1-based mode `n`.
    pub fn mode(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 || n > self.coefficients.nrows() {
            return Err(Error::BadModeIndex {
                index: n,
                max: self.coefficients.nrows(),
            });
        }
        Ok(self.coefficients.row(n - 1).iter().copied().collect())
    }

    pub fn mode_count(&self) -> usize {
        self.coefficients.nrows()
    }

    pub fn len(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.ncols() == 0
    }
}

/// Projects the panel onto the eigenvectors: `a_n(t) = Σ_ℓ w_ℓ(t) V_ℓ⁽ⁿ⁾`.
pub fn mode_series(w: &StandardizedPanel, b: &ModeBasis) -> Result<ModeSeries> {
    project(w.values(), w.months(), b)
}

/// [`mode_series`] for arbitrary standardized values (e.g. outside the estimation window).
pub fn project(values: &DMatrix<f64>, months: &[Month], b: &ModeBasis) -> Result<ModeSeries> {
    if values.nrows() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            actual: values.nrows(),
        });
    }
    ModeSeries::new(months.to_vec(), b.vectors.transpose() * values)
}

/// `Σ_{n∈modes} λ⁽ⁿ⁾ V⁽ⁿ⁾V⁽ⁿ⁾ᵀ` for 1-based mode indices.
pub fn reconstruct(b: &ModeBasis, modes: &[usize]) -> Result<DMatrix<f64>> {
    let m = b.dim();
    let mut out = DMatrix::zeros(m, m);
    for &n in modes {
        b.check_mode(n)?;
        let v = b.vectors.column(n - 1);
        out += b.eigenvalues[n - 1] * v * v.transpose();
    }
    Ok(out)
}

/// Marchenko–Pastur law for correlation matrices with aspect ratio `q = N′/M > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpParams {
    pub q: f64,
    pub lower: f64,
    pub upper: f64,
}

impl MpParams {
    pub fn new(q: f64) -> Result<Self> {
        if !(q > 1.0) || !q.is_finite() {
            return Err(Error::QOutOfRange(q));
        }
        let s = q.sqrt();
        Ok(Self {
            q,
            lower: (1.0 - s).powi(2) / q,
            upper: (1.0 + s).powi(2) / q,
        })
    }

    pub fn from_shape(n_prime: usize, m: usize) -> Result<Self> {
        Self::new(n_prime as f64 / m as f64)
    }

    pub fn density(&self, lambda: f64) -> f64 {
        if lambda < self.lower || lambda > self.upper {
            return 0.0;
        }
        self.q / (2.0 * PI) * ((self.upper - lambda) * (lambda - self.lower)).sqrt() / lambda
    }

    /// Cumulative distribution, integrated in the angle variable
    /// `λ = λ₋ + (λ₊−λ₋)(1−cos θ)/2`, which removes the square-root edges.
    pub fn cdf(&self, lambda: f64) -> f64 {
        if lambda <= self.lower {
            return 0.0;
        }
        if lambda >= self.upper {
            return 1.0;
        }
        let width = self.upper - self.lower;
        let theta_max = (1.0 - 2.0 * (lambda - self.lower) / width).clamp(-1.0, 1.0).acos();
        let half = width / 2.0;
        let coef = self.q / (2.0 * PI) * half * half;
        let f = |t: f64| {
            let s = t.sin();
            coef * s * s / (self.lower + half * (1.0 - t.cos()))
        };
        const STEPS: usize = 512;
        let h = theta_max / STEPS as f64;
        let mut acc = f(0.0) + f(theta_max);
        for i in 1..STEPS {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        (acc * h / 3.0).clamp(0.0, 1.0)
    }
}

/// `(λ₋, λ₊) = ((1 ∓ √q)²/q)`.
pub fn mp_bounds(q: f64) -> Result<(f64, f64)> {
    let p = MpParams::new(q)?;
    Ok((p.lower, p.upper))
}

pub fn mp_density(lambda: f64, q: f64) -> Result<f64> {
    Ok(MpParams::new(q)?.density(lambda))
}

/// Normalized histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.width()
    }
}

/// Histogram over `[min, max]` of the values; a single distinct value gets a
/// unit-width bin range centred on it.
pub fn eigenvalue_histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        histogram_in(values, bins, lo, hi)
    } else {
        histogram_in(values, bins, lo - 0.5, lo + 0.5)
    }
}

/// Histogram over an explicit range; out-of-range values land in the edge bins.
pub fn histogram_in(values: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if bins == 0 || !(hi > lo) {
        return Err(Error::Parse(format!(
            "histogram needs bins >= 1 and a non-empty range, got {bins} over [{lo}, {hi}]"
        )));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = ((v - lo) / width).floor();
        let idx = if idx < 0.0 { 0 } else { (idx as usize).min(bins - 1) };
        counts[idx] += 1;
    }
    let n = values.len() as f64;
    Ok(Histogram {
        edges: (0..=bins).map(|i| lo + i as f64 * width).collect(),
        density: counts.iter().map(|&c| c as f64 / (n * width)).collect(),
    })
}

/// Default display histogram: 50 bins over `[0, 1.05·max λ]`.
pub fn display_histogram(eigenvalues: &[f64]) -> Result<Histogram> {
    let max = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if eigenvalues.is_empty() {
        return Err(Error::EmptyInput);
    }
    histogram_in(eigenvalues, 50, 0.0, (1.05 * max).max(f64::MIN_POSITIVE))
}

// ----- serialization -----

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatrixDoc {
    kind: MatrixKind,
    m: usize,
    ids: Vec<SeriesId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    entries: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BasisDoc {
    kind: MatrixKind,
    m: usize,
    ids: Vec<SeriesId>,
    sign: SignConvention,
    eigenvalues: Vec<f64>,
    /// One entry per mode.
    eigenvectors: Vec<Vec<f64>>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], m: usize) -> Result<DMatrix<f64>> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: rows.len(),
        });
    }
    Ok(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
}

impl CorrMatrix {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MatrixDoc {
            kind: self.kind,
            m: self.dim(),
            ids: self.ids.clone(),
            k: self.modes,
            entries: rows_of(&self.data),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: MatrixDoc = serde_json::from_str(s)?;
        let data = from_rows(&doc.entries, doc.m)?;
        CorrMatrix::new(doc.kind, doc.ids, data, doc.k)
    }

    /// Row-major CSV preceded by a `# kind=..,m=..` line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "# kind={},m={}", self.kind, self.dim())?;
        if let Some(k) = self.modes {
            write!(out, ",k={k}")?;
        }
        writeln!(out)?;
        let mut header = String::from("id");
        for id in &self.ids {
            header.push_str(&format!(",{id}"));
        }
        writeln!(out, "{header}")?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut line = id.to_string();
            for j in 0..self.dim() {
                line.push_str(&format!(",{}", self.data[(i, j)]));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let meta = lines
            .next()
            .ok_or(Error::EmptyInput)??;
        let meta = parse_meta(&meta)?;
        let kind: MatrixKind = meta_get(&meta, "kind")?.parse()?;
        let m: usize = meta_get(&meta, "m")?
            .parse()
            .map_err(|_| Error::Parse("bad m".into()))?;
        let k = match meta.iter().find(|(key, _)| key == "k") {
            Some((_, v)) => Some(v.parse().map_err(|_| Error::Parse("bad k".into()))?),
            None => None,
        };
        let header = lines.next().ok_or(Error::EmptyInput)??;
        let ids: Vec<SeriesId> = header
            .split(',')
            .skip(1)
            .map(str::parse)
            .collect::<Result<_>>()?;
        let mut rows = Vec::with_capacity(m);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .skip(1)
                .map(|v| v.trim().parse().map_err(|_| Error::Parse(format!("bad entry {v:?}"))))
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        CorrMatrix::new(kind, ids, from_rows(&rows, m)?, k)
    }
}

fn parse_meta(line: &str) -> Result<Vec<(String, String)>> {
    let body = line
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("missing `# kind=...` metadata line".into()))?;
    body.split(',')
        .map(|kv| {
            kv.trim()
                .split_once('=')
                .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                .ok_or_else(|| Error::Parse(format!("bad metadata {kv:?}")))
        })
        .collect()
}

fn meta_get<'a>(meta: &'a [(String, String)], key: &str) -> Result<&'a str> {
    meta.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Parse(format!("metadata lacks {key}")))
}

impl ModeBasis {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&BasisDoc {
            kind: self.kind,
            m: self.dim(),
            ids: self.ids.clone(),
            sign: self.sign,
            eigenvalues: self.eigenvalues.clone(),
            eigenvectors: self
                .vectors
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: BasisDoc = serde_json::from_str(s)?;
        let m = doc.m;
        if doc.eigenvalues.len() != m || doc.ids.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: doc.eigenvalues.len(),
            });
        }
        let cols = from_rows(&doc.eigenvectors, m)?;
        Ok(Self {
            kind: doc.kind,
            ids: doc.ids,
            eigenvalues: doc.eigenvalues,
            vectors: cols.transpose(),
            sign: doc.sign,
        })
    }

    /// CSV with one row per mode: `n,eigenvalue,<components>`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# kind={},m={}", self.kind, self.dim())?;
        let mut header = String::from("n,eigenvalue");
        for id in &self.ids {
            header.push_str(&format!(",{id}"));
        }
        writeln!(out, "{header}")?;
        for n in 0..self.dim() {
            let mut line = format!("{},{}", n + 1, self.eigenvalues[n]);
            for i in 0..self.dim() {
                line.push_str(&format!(",{}", self.vectors[(i, n)]));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let meta = parse_meta(&lines.next().ok_or(Error::EmptyInput)??)?;
        let kind: MatrixKind = meta_get(&meta, "kind")?.parse()?;
        let m: usize = meta_get(&meta, "m")?
            .parse()
            .map_err(|_| Error::Parse("bad m".into()))?;
        let header = lines.next().ok_or(Error::EmptyInput)??;
        let ids: Vec<SeriesId> = header
            .split(',')
            .skip(2)
            .map(str::parse)
            .collect::<Result<_>>()?;
        let mut eigenvalues = Vec::with_capacity(m);
        let mut vecs = Vec::with_capacity(m);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .skip(1)
                .map(|v| v.trim().parse().map_err(|_| Error::Parse(format!("bad entry {v:?}"))))
                .collect::<Result<_>>()?;
            let (l, rest) = vals
                .split_first()
                .ok_or_else(|| Error::Parse("empty basis row".into()))?;
            eigenvalues.push(*l);
            vecs.push(rest.to_vec());
        }
        if ids.len() != m || eigenvalues.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: eigenvalues.len(),
            });
        }
        Ok(Self {
            kind,
            ids,
            eigenvalues,
            vectors: from_rows(&vecs, m)?.transpose(),
            sign: SignConvention::ProductionSum,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::standardize_rows;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corr(rows: Vec<Vec<f64>>) -> CorrMatrix {
        let m = rows.len();
        CorrMatrix::new(
            MatrixKind::Raw,
            SeriesId::plain(m),
            DMatrix::from_fn(m, m, |i, j| rows[i][j]),
            None,
        )
        .unwrap()
    }

    fn random_panel(m: usize, n: usize, seed: u64) -> StandardizedPanel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..m)
            .map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect())
            .collect();
        standardize_rows(rows).unwrap()
    }

    #[test]
    fn correlation_examples() {
        let x = vec![0.5, -1.0, 2.0, 0.1];
        let c = correlation_matrix(&standardize_rows(vec![x.clone(), x.clone()]).unwrap());
        for v in c.data().iter() {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-12);
        }
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let c = correlation_matrix(&standardize_rows(vec![x, neg]).unwrap());
        assert_abs_diff_eq!(c.data()[(0, 1)], -1.0, epsilon = 1e-12);
        let c = correlation_matrix(
            &standardize_rows(vec![vec![1.0, -1.0, 1.0, -1.0], vec![1.0, 1.0, -1.0, -1.0]]).unwrap(),
        );
        assert_abs_diff_eq!(c.data()[(0, 1)], 0.0, epsilon = 1e-15);
        assert_eq!(c.data()[(0, 0)], 1.0);
    }

    #[test]
    fn eigen_two_by_two() {
        let b = eigendecompose(&corr(vec![vec![1.0, 0.6], vec![0.6, 1.0]])).unwrap();
        assert_abs_diff_eq!(b.eigenvalues()[0], 1.6, epsilon = 1e-12);
        assert_abs_diff_eq!(b.eigenvalues()[1], 0.4, epsilon = 1e-12);
        let h = 0.5f64.sqrt();
        let v1 = b.vector(1).unwrap();
        let v2 = b.vector(2).unwrap();
        assert_abs_diff_eq!(v1[0], h, epsilon = 1e-12);
        assert_abs_diff_eq!(v1[1], h, epsilon = 1e-12);
        // production sum vanishes for V2, largest-magnitude component made positive
        assert_abs_diff_eq!(v2[0].abs(), h, epsilon = 1e-12);
        assert_abs_diff_eq!(v2[0], -v2[1], epsilon = 1e-12);
    }

    #[test]
    fn eigen_identity_and_equicorrelation() {
        let b = eigendecompose(&corr(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]))
        .unwrap();
        assert_eq!(b.eigenvalues(), &[1.0, 1.0, 1.0]);
        // degenerate ordering by lexicographic vectors: e1, e2, e3
        assert_eq!(b.vector(1).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(b.vector(3).unwrap(), vec![0.0, 0.0, 1.0]);

        let b = eigendecompose(&corr(vec![
            vec![1.0, 0.5, 0.5],
            vec![0.5, 1.0, 0.5],
            vec![0.5, 0.5, 1.0],
        ]))
        .unwrap();
        let ev = b.eigenvalues();
        assert_abs_diff_eq!(ev[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[2], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn eigen_rejects_asymmetric() {
        let data = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.2, 1.0]);
        assert!(matches!(
            eigendecompose_matrix(MatrixKind::Raw, SeriesId::plain(2), &data),
            Err(Error::NotSymmetric { .. })
        ));
        assert!(matches!(
            CorrMatrix::new(MatrixKind::Raw, SeriesId::plain(2), data, None),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn sign_convention_on_layout() {
        // production entries dominate the sum, so V1 has positive production mass
        let w = random_panel(6, 50, 3);
        let b = eigendecompose(&correlation_matrix(&w)).unwrap();
        for n in 1..=6 {
            let v = b.vector(n).unwrap();
            let sum: f64 = v[..2].iter().sum();
            assert!(sum >= -1e-12, "mode {n} production sum {sum}");
        }
    }

    #[test]
    fn mode_series_single_eigenvector() {
        let c = corr(vec![vec![1.0, 0.6], vec![0.6, 1.0]]);
        let b = eigendecompose(&c).unwrap();
        let v1 = b.vector(1).unwrap();
        let s = [1.0, -2.0, 0.5, 3.0];
        let values = DMatrix::from_fn(2, 4, |l, j| s[j] * v1[l]);
        let ms = project(&values, &Month::new(2000, 1).unwrap().range(4), &b).unwrap();
        for j in 0..4 {
            assert_abs_diff_eq!(ms.coefficients()[(0, j)], s[j], epsilon = 1e-12);
            assert_abs_diff_eq!(ms.coefficients()[(1, j)], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn mode_series_round_trip_and_strength() {
        let w = random_panel(5, 40, 11);
        let b = eigendecompose(&correlation_matrix(&w)).unwrap();
        let ms = mode_series(&w, &b).unwrap();
        // round-trip oracle: Σ_n a_n V⁽ⁿ⁾ summed explicitly per element
        for l in 0..5 {
            for j in 0..40 {
                let mut acc = 0.0;
                for n in 0..5 {
                    acc += ms.coefficients()[(n, j)] * b.vectors()[(l, n)];
                }
                assert_abs_diff_eq!(acc, w.values()[(l, j)], epsilon = 1e-10);
            }
        }
        for n in 0..5 {
            for k in 0..5 {
                let avg: f64 = (0..40)
                    .map(|j| ms.coefficients()[(n, j)] * ms.coefficients()[(k, j)])
                    .sum::<f64>()
                    / 40.0;
                let expect = if n == k { b.eigenvalues()[n] } else { 0.0 };
                assert_abs_diff_eq!(avg, expect, epsilon = 1e-8);
            }
        }
        let other = DMatrix::zeros(4, 40);
        assert!(matches!(
            project(&other, w.months(), &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn reconstruct_examples() {
        let w = random_panel(6, 30, 5);
        let c = correlation_matrix(&w);
        let b = eigendecompose(&c).unwrap();
        let all: Vec<usize> = (1..=6).collect();
        let full = reconstruct(&b, &all).unwrap();
        assert!((full - c.data()).amax() <= 1e-10);
        assert_eq!(reconstruct(&b, &[]).unwrap(), DMatrix::zeros(6, 6));
        assert!(matches!(reconstruct(&b, &[7]), Err(Error::BadModeIndex { .. })));
        assert!(matches!(reconstruct(&b, &[0]), Err(Error::BadModeIndex { .. })));

        let ones = corr(vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        let b = eigendecompose(&ones).unwrap();
        let r = reconstruct(&b, &[1]).unwrap();
        assert!((r - ones.data()).amax() <= 1e-12);
    }

    #[test]
    fn mp_bounds_examples() {
        let (lo, hi) = mp_bounds(239.0 / 63.0).unwrap();
        assert_abs_diff_eq!(lo, 0.237, epsilon = 5e-4);
        assert_abs_diff_eq!(hi, 2.29, epsilon = 5e-3);
        let (lo, hi) = mp_bounds(4.0).unwrap();
        assert_abs_diff_eq!(lo, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 2.25, epsilon = 1e-15);
        let q = 1e4;
        let (lo, hi) = mp_bounds(q).unwrap();
        assert_abs_diff_eq!(lo, 1.0 - 2.0 / q.sqrt(), epsilon = 1e-3);
        assert_abs_diff_eq!(hi, 1.0 + 2.0 / q.sqrt(), epsilon = 1e-3);
        assert!(matches!(mp_bounds(1.0), Err(Error::QOutOfRange(_))));
        assert!(matches!(mp_density(1.0, 0.5), Err(Error::QOutOfRange(_))));
    }

    #[test]
    fn mp_density_examples() {
        assert_eq!(mp_density(0.1, 3.79).unwrap(), 0.0);
        assert_eq!(mp_density(3.0, 3.79).unwrap(), 0.0);
        // mpmath oracle, 30 digits: q/(2π)·√((λ₊−1)(1−λ₋)) at q = 3.79
        assert_abs_diff_eq!(mp_density(1.0, 3.79).unwrap(), 0.598_896_476_942_281, epsilon = 1e-12);

        // normalization by brute-force midpoint rule on a fine grid
        let p = MpParams::new(3.79).unwrap();
        let n = 2_000_000;
        let h = (p.upper - p.lower) / n as f64;
        let total: f64 = (0..n).map(|i| p.density(p.lower + (i as f64 + 0.5) * h)).sum::<f64>() * h;
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn mp_cdf_matches_quadrature() {
        // mpmath.quad reference values (30 digits) for q = 239/63
        let p = MpParams::new(239.0 / 63.0).unwrap();
        assert_abs_diff_eq!(p.cdf(0.5), 0.196_870_470_695_778, epsilon = 1e-9);
        assert_abs_diff_eq!(p.cdf(1.0), 0.554_842_206_450_588, epsilon = 1e-9);
        assert_abs_diff_eq!(p.cdf(2.0), 0.959_170_492_814_846, epsilon = 1e-9);
        assert_eq!(p.cdf(0.1), 0.0);
        assert_eq!(p.cdf(5.0), 1.0);
    }

    #[test]
    fn histogram_examples() {
        let h = eigenvalue_histogram(&[2.0], 1).unwrap();
        assert_abs_diff_eq!(h.density[0], 1.0 / h.width(), epsilon = 1e-15);

        let grid: Vec<f64> = (0..1000).map(|i| i as f64 / 999.0).collect();
        let h = eigenvalue_histogram(&grid, 10).unwrap();
        for d in &h.density {
            assert_abs_diff_eq!(*d, 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(h.integral(), 1.0, epsilon = 1e-12);
        assert!(matches!(eigenvalue_histogram(&[], 5), Err(Error::EmptyInput)));

        let d = display_histogram(&[0.5, 1.0, 2.0]).unwrap();
        assert_eq!(d.density.len(), 50);
        assert_abs_diff_eq!(*d.edges.last().unwrap(), 2.1, epsilon = 1e-12);
    }

    #[test]
    fn histogram_of_mp_samples() {
        // inverse-CDF sampling oracle: tabulate the CDF by the midpoint rule on a
        // fine grid, invert on stratified uniforms, compare bin masses.
        let p = MpParams::new(239.0 / 63.0).unwrap();
        let grid_n = 200_000;
        let h = (p.upper - p.lower) / grid_n as f64;
        let mut cdf = vec![0.0; grid_n + 1];
        for i in 0..grid_n {
            cdf[i + 1] = cdf[i] + p.density(p.lower + (i as f64 + 0.5) * h) * h;
        }
        let total = cdf[grid_n];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let samples: Vec<f64> = (0..10_000)
            .map(|_| {
                let u = rng.random::<f64>() * total;
                let k = cdf.partition_point(|&c| c < u).clamp(1, grid_n);
                let frac = (u - cdf[k - 1]) / (cdf[k] - cdf[k - 1]).max(1e-300);
                p.lower + (k as f64 - 1.0 + frac) * h
            })
            .collect();
        let hist = eigenvalue_histogram(&samples, 50).unwrap();
        // KS between histogram CDF and MP CDF at bin edges
        let mut acc = 0.0;
        let mut ks: f64 = 0.0;
        for (i, d) in hist.density.iter().enumerate() {
            acc += d * hist.width();
            ks = ks.max((acc - p.cdf(hist.edges[i + 1])).abs());
        }
        assert!(ks < 0.05, "ks = {ks}");
    }

    #[test]
    fn iid_noise_stays_in_mp_support() {
        let (m, n) = (63, 239);
        let p = MpParams::from_shape(n, m).unwrap();
        let mut outside = 0;
        let mut total = 0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows = (0..m)
                .map(|_| {
                    (0..n)
                        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                        .collect()
                })
                .collect();
            let w = standardize_rows(rows).unwrap();
            let ev = eigenvalues_desc(&correlation_of(w.values()));
            outside += ev.iter().filter(|&&l| l < p.lower || l > p.upper).count();
            total += ev.len();
        }
        let frac = outside as f64 / total as f64;
        assert!(frac < 0.02, "fraction outside {frac}");
    }

    #[test]
    fn json_and_csv_round_trip() {
        let w = random_panel(6, 25, 8);
        let c = correlation_matrix(&w);
        let back = CorrMatrix::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back.data(), c.data());
        assert_eq!(back.ids(), c.ids());
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let back = CorrMatrix::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.data(), c.data());

        let b = eigendecompose(&c).unwrap();
        let back = ModeBasis::from_json(&b.to_json().unwrap()).unwrap();
        assert_eq!(back, b);
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let back = ModeBasis::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.eigenvalues(), b.eigenvalues());
        assert_eq!(back.vectors(), b.vectors());
    }
}
