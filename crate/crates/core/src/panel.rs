//! Monthly index panels: ingestion, validation, growth rates and standardization.
//!
//! A panel holds one positive index-level series per [`SeriesId`], i.e. per
//! (variable class, goods category). Series are kept in canonical order
//! (production, shipments, inventory; goods ascending) so that the position
//! of a series is its flat index `ℓ - 1` with `ℓ = G·(α−1) + g`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Goods categories of the industrial-production classification by use of goods,
/// indexed `g = 1..=21`.
pub const IIP_GOODS: [&str; 21] = [
    "Manufacturing Equipment",
    "Electricity",
    "Communication and Broadcasting",
    "Agriculture",
    "Construction (capital)",
    "Transport",
    "Offices",
    "Other Capital Goods",
    "Construction",
    "Engineering",
    "House Work (durable)",
    "Heating/Cooling Equipment",
    "Furniture & Furnishings",
    "Education & Amusement (durable)",
    "Motor Vehicles",
    "House Work (nondurable)",
    "Education & Amusement (nondurable)",
    "Clothing & Footwear",
    "Food & Beverage",
    "Mining & Manufacturing",
    "Others",
];

/// Value-added weights of the 21 goods categories; they sum to 10,000.
pub const IIP_WEIGHTS: [f64; 21] = [
    530.7, 148.1, 48.8, 31.0, 129.6, 381.3, 175.4, 217.2, 568.1, 122.3, 62.3, 62.5, 43.4, 246.5,
    853.2, 649.7, 105.2, 92.2, 467.9, 4601.7, 462.9,
];

/// Number of final-demand goods categories (`g = 1..=19`); the rest are producer goods.
pub const FINAL_DEMAND_GOODS: u16 = 19;

/// Default goods count of the classification.
pub const DEFAULT_GOODS: u16 = 21;

/// Calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Month {
    year: i32,
    /// 1..=12
    month: u32,
}

impl Month {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Parse(format!("month {month} out of range")));
        }
        Ok(Self { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    /// Months since year 0, used for spacing checks.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        Self {
            year: ordinal.div_euclid(12) as i32,
            month: ordinal.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn succ(self) -> Self {
        Self::from_ordinal(self.ordinal() + 1)
    }

    /// `n` consecutive months starting at `self`.
    pub fn range(self, n: usize) -> Vec<Month> {
        (0..n as i64)
            .map(|i| Self::from_ordinal(self.ordinal() + i))
            .collect()
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for Month {
    type Err = Error;

    /// Accepts `YYYY-MM`; a trailing day (`YYYY-MM-DD`) is ignored.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("bad date {s:?}, expected YYYY-MM"));
        let mut parts = s.splitn(3, '-');
        let year = parts.next().ok_or_else(bad)?;
        let month = parts.next().ok_or_else(bad)?;
        if year.len() != 4 || month.len() != 2 {
            return Err(bad());
        }
        let year: i32 = year.parse().map_err(|_| bad())?;
        let month: u32 = month.parse().map_err(|_| bad())?;
        Month::new(year, month).map_err(|_| bad())
    }
}

impl TryFrom<String> for Month {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Month> for String {
    fn from(m: Month) -> String {
        m.to_string()
    }
}

/// Inclusive month range, written `1988-01:2007-12`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: Month,
    pub end: Month,
}

impl Window {
    pub fn contains(&self, m: Month) -> bool {
        self.start <= m && m <= self.end
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

impl FromStr for Window {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("bad window {s:?}, expected START:END")))?;
        let window = Window {
            start: a.parse()?,
            end: b.parse()?,
        };
        if window.start > window.end {
            return Err(Error::Parse(format!("window {s} is empty")));
        }
        Ok(window)
    }
}

/// Variable class of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variable {
    Production = 1,
    Shipments = 2,
    Inventory = 3,
}

impl Variable {
    pub const ALL: [Variable; 3] = [Variable::Production, Variable::Shipments, Variable::Inventory];

    pub fn code(self) -> char {
        match self {
            Variable::Production => 'P',
            Variable::Shipments => 'S',
            Variable::Inventory => 'I',
        }
    }

    /// 1-based class index α.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Variable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "P" | "p" => Ok(Variable::Production),
            "S" | "s" => Ok(Variable::Shipments),
            "I" | "i" => Ok(Variable::Inventory),
            _ => Err(Error::Parse(format!("unknown variable class {s:?}"))),
        }
    }
}

/// Identifies one series by variable class and goods category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SeriesId {
    pub alpha: Variable,
    /// 1-based goods category.
    pub goods: u16,
}

impl SeriesId {
    pub fn new(alpha: Variable, goods: u16) -> Self {
        Self { alpha, goods }
    }

    /// Flat 1-based index `ℓ = G·(α−1) + g`.
    pub fn flatten(self, goods_count: u16) -> usize {
        goods_count as usize * (self.alpha.index() - 1) + self.goods as usize
    }

    /// Inverse of [`SeriesId::flatten`]; `None` outside `1..=3G`.
    pub fn unflatten(flat: usize, goods_count: u16) -> Option<Self> {
        let g = goods_count as usize;
        if g == 0 || flat == 0 || flat > 3 * g {
            return None;
        }
        let alpha = Variable::ALL[(flat - 1) / g];
        let goods = ((flat - 1) % g + 1) as u16;
        Some(Self { alpha, goods })
    }

    /// Canonical id list `P.1..P.G, S.1..S.G, I.1..I.G`.
    pub fn full_layout(goods_count: u16) -> Vec<SeriesId> {
        Variable::ALL
            .iter()
            .flat_map(|&a| (1..=goods_count).map(move |g| SeriesId::new(a, g)))
            .collect()
    }

    /// Ids for an ad-hoc panel of `m` series without a class layout (`P.1..P.m`).
    pub fn plain(m: usize) -> Vec<SeriesId> {
        (1..=m as u16)
            .map(|g| SeriesId::new(Variable::Production, g))
            .collect()
    }

    /// Full layout when `m` is a multiple of three, plain ids otherwise.
    pub fn layout_for(m: usize) -> Vec<SeriesId> {
        if m > 0 && m % 3 == 0 {
            Self::full_layout((m / 3) as u16)
        } else {
            Self::plain(m)
        }
    }
}

impl fmt::Display for SeriesId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.alpha.code(), self.goods)
    }
}

impl FromStr for SeriesId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (a, g) = s
            .split_once('.')
            .ok_or_else(|| Error::Parse(format!("bad series id {s:?}, expected P.g/S.g/I.g")))?;
        let goods: u16 = g
            .parse()
            .map_err(|_| Error::Parse(format!("bad goods index in {s:?}")))?;
        if goods == 0 {
            return Err(Error::Parse(format!("goods index in {s:?} must be >= 1")));
        }
        Ok(SeriesId::new(a.parse()?, goods))
    }
}

impl TryFrom<String> for SeriesId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SeriesId> for String {
    fn from(id: SeriesId) -> String {
        id.to_string()
    }
}

/// Position of `id` in an id list.
pub fn position(ids: &[SeriesId], id: SeriesId) -> Result<usize> {
    ids.iter()
        .position(|&x| x == id)
        .ok_or(Error::UnknownSeries(id))
}

/// Per-goods aggregation weights.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Weights(pub BTreeMap<u16, f64>);

impl Weights {
    /// The classification's published weight table.
    pub fn iip() -> Self {
        Weights(
            IIP_WEIGHTS
                .iter()
                .enumerate()
                .map(|(i, &w)| (i as u16 + 1, w))
                .collect(),
        )
    }

    pub fn get(&self, goods: u16) -> Option<f64> {
        self.0.get(&goods).copied()
    }

    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }

    /// Checks that the weights add up to `expected` within `tol`.
    pub fn validate_total(&self, expected: f64, tol: f64) -> Result<()> {
        let total = self.total();
        if (total - expected).abs() > tol {
            return Err(Error::Parse(format!(
                "weights sum to {total}, expected {expected}"
            )));
        }
        Ok(())
    }
}

/// Reads a `goods,weight` CSV.
pub fn load_weights(path: impl AsRef<Path>) -> Result<Weights> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut map = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let g: u16 = rec
            .get(0)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::Parse(format!("bad goods index {:?}", rec.get(0))))?;
        let w: f64 = rec
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::Parse(format!("bad weight {:?}", rec.get(1))))?;
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::Parse(format!("weight for goods {g} must be non-negative")));
        }
        if map.insert(g, w).is_some() {
            return Err(Error::Parse(format!("duplicate weight for goods {g}")));
        }
    }
    Ok(Weights(map))
}

/// Raw monthly index levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    months: Vec<Month>,
    ids: Vec<SeriesId>,
    /// One level sequence per series, same order as `ids`.
    levels: Vec<Vec<f64>>,
    weights: Option<Weights>,
}

impl Panel {
    /// Builds a validated panel; series are sorted into canonical order.
    pub fn new(months: Vec<Month>, ids: Vec<SeriesId>, levels: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != levels.len() {
            return Err(Error::DimensionMismatch {
                expected: ids.len(),
                actual: levels.len(),
            });
        }
        if ids.is_empty() {
            return Err(Error::EmptyInput);
        }
        check_time_axis(&months)?;
        if months.len() < 3 {
            return Err(Error::TooShort {
                required: 3,
                actual: months.len(),
            });
        }
        let mut pairs: Vec<(SeriesId, Vec<f64>)> = ids.into_iter().zip(levels).collect();
        pairs.sort_by_key(|(id, _)| *id);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateSeries(w[0].0));
            }
        }
        for (id, series) in &pairs {
            if series.len() != months.len() {
                return Err(Error::DimensionMismatch {
                    expected: months.len(),
                    actual: series.len(),
                });
            }
            for (&v, &date) in series.iter().zip(&months) {
                if v.is_nan() {
                    return Err(Error::MissingData { series: *id, date });
                }
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::NonPositiveLevel {
                        series: *id,
                        date,
                        value: v,
                    });
                }
            }
        }
        let (ids, levels) = pairs.into_iter().unzip();
        Ok(Self {
            months,
            ids,
            levels,
            weights: None,
        })
    }

    pub fn with_weights(mut self, weights: Weights) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn months(&self) -> &[Month] {
        &self.months
    }

    pub fn ids(&self) -> &[SeriesId] {
        &self.ids
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn weights(&self) -> Option<&Weights> {
        self.weights.as_ref()
    }

    /// Number of months `N`.
    pub fn len(&self) -> usize {
        self.months.len()
    }

    pub fn is_empty(&self) -> bool {
        self.months.is_empty()
    }

    /// Number of series `M`.
    pub fn series_count(&self) -> usize {
        self.ids.len()
    }

    pub fn series(&self, id: SeriesId) -> Result<&[f64]> {
        Ok(&self.levels[position(&self.ids, id)?])
    }

    /// Restriction to `window`.
    pub fn restrict(&self, window: Window) -> Result<Panel> {
        let keep: Vec<usize> = (0..self.months.len())
            .filter(|&j| window.contains(self.months[j]))
            .collect();
        let months = keep.iter().map(|&j| self.months[j]).collect();
        let levels = self
            .levels
            .iter()
            .map(|s| keep.iter().map(|&j| s[j]).collect())
            .collect();
        let mut p = Panel::new(months, self.ids.clone(), levels)?;
        p.weights = self.weights.clone();
        Ok(p)
    }
}

fn check_time_axis(months: &[Month]) -> Result<()> {
    for w in months.windows(2) {
        if w[1].ordinal() != w[0].ordinal() + 1 {
            return Err(Error::IrregularTimeAxis {
                previous: w[0],
                found: w[1],
            });
        }
    }
    Ok(())
}

/// Loads a panel CSV (`date,P.1,...`), keeping only rows inside `window`.
pub fn load_panel(path: impl AsRef<Path>, window: Option<Window>) -> Result<Panel> {
    let file = std::fs::File::open(path)?;
    read_panel(file, window)
}

/// Same as [`load_panel`] for an arbitrary reader.
pub fn read_panel<R: Read>(reader: R, window: Option<Window>) -> Result<Panel> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    match header.get(0) {
        Some(h) if h.eq_ignore_ascii_case("date") => {}
        _ => return Err(Error::Parse("first column must be `date`".into())),
    }
    let ids: Vec<SeriesId> = header
        .iter()
        .skip(1)
        .map(str::parse)
        .collect::<Result<_>>()?;
    let mut seen = std::collections::HashSet::new();
    for &id in &ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateSeries(id));
        }
    }

    let mut months = Vec::new();
    let mut levels: Vec<Vec<f64>> = vec![Vec::new(); ids.len()];
    for rec in rdr.records() {
        let rec = rec?;
        let date: Month = rec.get(0).unwrap_or("").parse()?;
        if let Some(w) = window {
            if !w.contains(date) {
                continue;
            }
        }
        if let Some(&prev) = months.last() {
            let prev: Month = prev;
            if date.ordinal() != prev.ordinal() + 1 {
                return Err(Error::IrregularTimeAxis {
                    previous: prev,
                    found: date,
                });
            }
        }
        for (i, &id) in ids.iter().enumerate() {
            let cell = rec.get(i + 1).unwrap_or("");
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
            {
                return Err(Error::MissingData { series: id, date });
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Parse(format!("bad value {cell:?} for {id} at {date}")))?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositiveLevel {
                    series: id,
                    date,
                    value: v,
                });
            }
            levels[i].push(v);
        }
        months.push(date);
    }
    Panel::new(months, ids, levels)
}

/// Writes a panel in the ingestion CSV schema. Each entry of `preamble` becomes a `#` line.
pub fn write_panel<W: std::io::Write>(panel: &Panel, mut out: W, preamble: &[String]) -> Result<()> {
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["date".to_string()];
    header.extend(panel.ids.iter().map(|id| id.to_string()));
    wtr.write_record(&header)?;
    for (j, m) in panel.months.iter().enumerate() {
        let mut row = vec![m.to_string()];
        row.extend(panel.levels.iter().map(|s| format!("{}", s[j])));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// How growth rates were computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthMethod {
    /// `log10(S(t+1)/S(t))`
    Log10,
    /// `(S(t+1) − S(t))/S(t)`
    Simple,
}

impl FromStr for GrowthMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log10" | "log" => Ok(GrowthMethod::Log10),
            "simple" => Ok(GrowthMethod::Simple),
            _ => Err(Error::Parse(format!("unknown growth method {s:?}"))),
        }
    }
}

/// Month-on-month growth rates, `N′ = N − 1` per series.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthPanel {
    ids: Vec<SeriesId>,
    /// `months[j]` labels the rate from month j to j+1.
    months: Vec<Month>,
    rates: Vec<Vec<f64>>,
    method: GrowthMethod,
}

impl GrowthPanel {
    /// Wraps precomputed rates.
    pub fn from_rates(
        ids: Vec<SeriesId>,
        months: Vec<Month>,
        rates: Vec<Vec<f64>>,
        method: GrowthMethod,
    ) -> Result<Self> {
        if ids.len() != rates.len() {
            return Err(Error::DimensionMismatch {
                expected: ids.len(),
                actual: rates.len(),
            });
        }
        for r in &rates {
            if r.len() != months.len() {
                return Err(Error::DimensionMismatch {
                    expected: months.len(),
                    actual: r.len(),
                });
            }
        }
        Ok(Self {
            ids,
            months,
            rates,
            method,
        })
    }

    /// Ad-hoc rates with layout ids and months starting 2000-01.
    pub fn from_rows(rates: Vec<Vec<f64>>) -> Result<Self> {
        let n = rates.first().map_or(0, Vec::len);
        let start = Month::new(2000, 1)?;
        Self::from_rates(
            SeriesId::layout_for(rates.len()),
            start.range(n),
            rates,
            GrowthMethod::Log10,
        )
    }

    pub fn ids(&self) -> &[SeriesId] {
        &self.ids
    }

    pub fn months(&self) -> &[Month] {
        &self.months
    }

    pub fn rates(&self) -> &[Vec<f64>] {
        &self.rates
    }

    pub fn method(&self) -> GrowthMethod {
        self.method
    }

    /// `N′`
    pub fn len(&self) -> usize {
        self.months.len()
    }

    pub fn is_empty(&self) -> bool {
        self.months.is_empty()
    }
}

fn growth(p: &Panel, method: GrowthMethod, f: impl Fn(f64, f64) -> f64) -> GrowthPanel {
    let rates = p
        .levels
        .iter()
        .map(|s| s.windows(2).map(|w| f(w[0], w[1])).collect())
        .collect();
    GrowthPanel {
        ids: p.ids.clone(),
        months: p.months[..p.months.len() - 1].to_vec(),
        rates,
        method,
    }
}

/// Base-10 logarithmic growth rates.
pub fn log_growth(p: &Panel) -> GrowthPanel {
    growth(p, GrowthMethod::Log10, |a, b| (b / a).log10())
}

/// Simple relative growth rates.
pub fn simple_growth(p: &Panel) -> GrowthPanel {
    growth(p, GrowthMethod::Simple, |a, b| (b - a) / a)
}

/// Growth rates by `method`.
pub fn growth_rates(p: &Panel, method: GrowthMethod) -> GrowthPanel {
    match method {
        GrowthMethod::Log10 => log_growth(p),
        GrowthMethod::Simple => simple_growth(p),
    }
}

/// Zero-mean, unit (population) variance growth rates.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedPanel {
    ids: Vec<SeriesId>,
    months: Vec<Month>,
    /// `M × N′`, one row per series.
    values: DMatrix<f64>,
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl StandardizedPanel {
    pub fn ids(&self) -> &[SeriesId] {
        &self.ids
    }

    pub fn months(&self) -> &[Month] {
        &self.months
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Mean of the raw rates removed from each series.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Population standard deviation of the raw rates of each series.
    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    /// Series count `M`.
    pub fn series_count(&self) -> usize {
        self.values.nrows()
    }

    /// Sample length `N′`.
    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.ncols() == 0
    }

    pub fn row(&self, l: usize) -> Vec<f64> {
        self.values.row(l).iter().copied().collect()
    }

    /// Same panel with permuted/rotated values; caller guarantees each row is a
    /// rearrangement of the original row.
    pub(crate) fn with_values(&self, values: DMatrix<f64>) -> Self {
        Self {
            ids: self.ids.clone(),
            months: self.months.clone(),
            values,
            means: self.means.clone(),
            stds: self.stds.clone(),
        }
    }

    /// Applies this panel's stored per-series transform to other rates of the
    /// same series (e.g. months outside the estimation window). The result is
    /// not standardized on its own.
    pub fn transform(&self, g: &GrowthPanel) -> Result<DMatrix<f64>> {
        if g.ids != self.ids {
            return Err(Error::LayoutMismatch(
                "growth panel series differ from the standardized panel".into(),
            ));
        }
        let n = g.len();
        Ok(DMatrix::from_fn(self.ids.len(), n, |l, j| {
            (g.rates[l][j] - self.means[l]) / self.stds[l]
        }))
    }
}

/// Mean and population standard deviation.
pub(crate) fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Centers each series and scales it by its population standard deviation.
pub fn standardize(g: &GrowthPanel) -> Result<StandardizedPanel> {
    let m = g.rates.len();
    let n = g.len();
    if m == 0 || n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut values = DMatrix::zeros(m, n);
    let mut means = Vec::with_capacity(m);
    let mut stds = Vec::with_capacity(m);
    for (l, r) in g.rates.iter().enumerate() {
        let (mean, sd) = mean_std(r);
        if !(sd > f64::EPSILON * mean.abs()) || !sd.is_finite() {
            return Err(Error::DegenerateSeries(l + 1));
        }
        let mut z: Vec<f64> = r.iter().map(|v| (v - mean) / sd).collect();
        // second pass removes residual rounding in the centering
        let (m2, s2) = mean_std(&z);
        for v in &mut z {
            *v = (*v - m2) / s2;
        }
        for (j, v) in z.into_iter().enumerate() {
            values[(l, j)] = v;
        }
        means.push(mean);
        stds.push(sd);
    }
    Ok(StandardizedPanel {
        ids: g.ids.clone(),
        months: g.months.clone(),
        values,
        means,
        stds,
    })
}

/// Standardizes ad-hoc rows (ids and months assigned as in [`GrowthPanel::from_rows`]).
pub fn standardize_rows(rows: Vec<Vec<f64>>) -> Result<StandardizedPanel> {
    standardize(&GrowthPanel::from_rows(rows)?)
}

/// Weight-averaged level of one variable class over its goods.
pub fn weighted_aggregate(p: &Panel, alpha: Variable) -> Result<Vec<f64>> {
    let weights = p
        .weights
        .as_ref()
        .ok_or_else(|| Error::MissingWeight(p.ids.first().map_or(1, |id| id.goods)))?;
    let members: Vec<(usize, f64)> = p
        .ids
        .iter()
        .enumerate()
        .filter(|(_, id)| id.alpha == alpha)
        .map(|(i, id)| {
            weights
                .get(id.goods)
                .map(|w| (i, w))
                .ok_or(Error::MissingWeight(id.goods))
        })
        .collect::<Result<_>>()?;
    if members.is_empty() {
        return Err(Error::LayoutMismatch(format!(
            "panel has no {alpha:?} series"
        )));
    }
    let total: f64 = members.iter().map(|(_, w)| w).sum();
    if !(total > 0.0) {
        return Err(Error::Parse(format!("weights for {alpha:?} sum to zero")));
    }
    Ok((0..p.len())
        .map(|j| members.iter().map(|&(i, w)| w * p.levels[i][j]).sum::<f64>() / total)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn months(n: usize) -> Vec<Month> {
        Month::new(1988, 1).unwrap().range(n)
    }

    fn single(levels: Vec<f64>) -> Panel {
        let n = levels.len();
        Panel::new(months(n), SeriesId::plain(1), vec![levels]).unwrap()
    }

    #[test]
    fn month_parsing() {
        assert_eq!("1988-01".parse::<Month>().unwrap(), Month::new(1988, 1).unwrap());
        assert_eq!("2007-12-15".parse::<Month>().unwrap(), Month::new(2007, 12).unwrap());
        assert!("1988-13".parse::<Month>().is_err());
        assert!("88-01".parse::<Month>().is_err());
        assert_eq!(Month::new(2007, 12).unwrap().succ(), Month::new(2008, 1).unwrap());
        let w: Window = "1988-01:2007-12".parse().unwrap();
        assert_eq!(w.end.ordinal() - w.start.ordinal() + 1, 240);
    }

    #[test]
    fn series_id_roundtrip() {
        for flat in 1..=63 {
            let id = SeriesId::unflatten(flat, 21).unwrap();
            assert_eq!(id.flatten(21), flat);
        }
        assert_eq!("P.20".parse::<SeriesId>().unwrap(), SeriesId::new(Variable::Production, 20));
        assert_eq!(SeriesId::new(Variable::Inventory, 3).to_string(), "I.3");
        assert!(SeriesId::unflatten(64, 21).is_none());
        assert!("X.1".parse::<SeriesId>().is_err());
    }

    #[test]
    fn log_growth_examples() {
        let g = log_growth(&single(vec![1.0, 10.0, 100.0]));
        assert_abs_diff_eq!(g.rates()[0][0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.rates()[0][1], 1.0, epsilon = 1e-15);
        let g = log_growth(&single(vec![5.0, 5.0, 5.0]));
        assert_eq!(g.rates()[0], vec![0.0, 0.0]);
        let g = log_growth(&single(vec![100.0, 110.0, 121.0]));
        assert_abs_diff_eq!(g.rates()[0][0], 0.041392685, epsilon = 1e-9);
        assert_eq!(g.len(), 2);
        assert_eq!(g.method(), GrowthMethod::Log10);
    }

    #[test]
    fn simple_growth_examples() {
        let g = simple_growth(&single(vec![100.0, 110.0, 121.0]));
        assert_abs_diff_eq!(g.rates()[0][0], 0.10, epsilon = 1e-15);
        assert_abs_diff_eq!(g.rates()[0][1], 0.10, epsilon = 1e-15);
        let g = simple_growth(&single(vec![7.0, 7.0, 7.0]));
        assert_eq!(g.rates()[0], vec![0.0, 0.0]);
    }

    #[test]
    fn standardize_examples() {
        let w = standardize_rows(vec![vec![1.0, -1.0]]).unwrap();
        assert_abs_diff_eq!(w.values()[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.values()[(0, 1)], -1.0, epsilon = 1e-15);

        let x = vec![0.3, -1.2, 2.5, 0.7, -0.1];
        let ax: Vec<f64> = x.iter().map(|v| 3.5 * v - 40.0).collect();
        let a = standardize_rows(vec![x]).unwrap();
        let b = standardize_rows(vec![ax]).unwrap();
        for j in 0..5 {
            assert_abs_diff_eq!(a.values()[(0, j)], b.values()[(0, j)], epsilon = 1e-12);
        }

        assert!(matches!(
            standardize_rows(vec![vec![1.0, 2.0, 3.0], vec![3.0, 3.0, 3.0]]),
            Err(Error::DegenerateSeries(2))
        ));
    }

    #[test]
    fn weighted_aggregate_examples() {
        let ids = vec![
            SeriesId::new(Variable::Production, 1),
            SeriesId::new(Variable::Production, 2),
            SeriesId::new(Variable::Shipments, 1),
        ];
        let levels = vec![vec![1.0, 2.0, 3.0], vec![3.0, 4.0, 5.0], vec![9.0, 9.0, 9.0]];
        let p = Panel::new(months(3), ids, levels).unwrap();
        let equal = Weights([(1, 2.0), (2, 2.0)].into_iter().collect());
        let agg = weighted_aggregate(&p.clone().with_weights(equal), Variable::Production).unwrap();
        assert_eq!(agg, vec![2.0, 3.0, 4.0]);
        let one = Weights([(1, 0.0), (2, 5.0)].into_iter().collect());
        let agg = weighted_aggregate(&p.clone().with_weights(one), Variable::Production).unwrap();
        assert_eq!(agg, vec![3.0, 4.0, 5.0]);
        let partial = Weights([(1, 1.0)].into_iter().collect());
        assert!(matches!(
            weighted_aggregate(&p.with_weights(partial), Variable::Production),
            Err(Error::MissingWeight(2))
        ));
    }

    #[test]
    fn published_weights_sum() {
        let w = Weights::iip();
        w.validate_total(10_000.0, 1e-6).unwrap();
        assert!(w.validate_total(9_000.0, 1e-6).is_err());
        let final_demand: f64 = IIP_WEIGHTS[..19].iter().sum();
        assert_abs_diff_eq!(final_demand, 4935.4, epsilon = 1e-9);
    }

    #[test]
    fn panel_rejects_bad_input() {
        assert!(matches!(
            Panel::new(months(3), SeriesId::plain(1), vec![vec![1.0, 0.0, 1.0]]),
            Err(Error::NonPositiveLevel { .. })
        ));
        let mut m = months(3);
        m[2] = m[2].succ();
        assert!(matches!(
            Panel::new(m, SeriesId::plain(1), vec![vec![1.0, 2.0, 1.0]]),
            Err(Error::IrregularTimeAxis { .. })
        ));
        let id = SeriesId::new(Variable::Shipments, 4);
        assert!(matches!(
            Panel::new(months(3), vec![id, id], vec![vec![1.0; 3], vec![2.0; 3]]),
            Err(Error::DuplicateSeries(_))
        ));
        assert!(matches!(
            Panel::new(months(2), SeriesId::plain(1), vec![vec![1.0; 2]]),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn transform_reproduces_standardization() {
        let g = GrowthPanel::from_rows(vec![vec![0.1, 0.2, -0.3, 0.5], vec![1.0, 0.0, 2.0, 1.0]])
            .unwrap();
        let w = standardize(&g).unwrap();
        let t = w.transform(&g).unwrap();
        for (a, b) in t.iter().zip(w.values().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }
}
