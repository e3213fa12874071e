//! Linear response: susceptibilities, ripple effects and reduced susceptibilities.

use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::{position, SeriesId, Variable, FINAL_DEMAND_GOODS, IIP_GOODS};
use crate::spectral::{CorrMatrix, ModeBasis};

/// Producer goods read off by [`final_to_intermediate`].
pub const PRODUCER_GOODS: [u16; 2] = [20, 21];

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::BadBeta(beta))
    }
}

/// `χ = β·C`.
#[derive(Debug, Clone, PartialEq)]
pub struct Susceptibility {
    pub ids: Vec<SeriesId>,
    pub values: DMatrix<f64>,
    pub beta: f64,
}

impl Susceptibility {
    /// Response of `target` per unit response of `source`; independent of β.
    pub fn ripple_ratio(&self, target: SeriesId, source: SeriesId) -> Result<f64> {
        let l = position(&self.ids, target)?;
        let m = position(&self.ids, source)?;
        Ok(self.values[(l, m)] / self.values[(m, m)])
    }
}

pub fn susceptibility(c: &CorrMatrix, beta: f64) -> Result<Susceptibility> {
    check_beta(beta)?;
    Ok(Susceptibility {
        ids: c.ids().to_vec(),
        values: c.data() * beta,
        beta,
    })
}

/// Induced mean shifts `⟨w_ℓ⟩ = C_{ℓm}·⟨w_m⟩` for a shift applied at `source`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RippleReport {
    pub source: SeriesId,
    pub shift: f64,
    pub targets: Vec<SeriesId>,
    pub responses: Vec<f64>,
}

impl RippleReport {
    pub fn response(&self, target: SeriesId) -> Result<f64> {
        Ok(self.responses[position(&self.targets, target)?])
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "target,response")?;
        for (id, r) in self.targets.iter().zip(&self.responses) {
            writeln!(out, "{id},{r}")?;
        }
        Ok(())
    }
}

/// Linear response of every series to a shift of `source`.
///
/// Any source is accepted. Shipments of final-demand goods are the usual
/// choice; the meaning of other sources is left to the caller.
pub fn ripple(cg: &CorrMatrix, source: SeriesId, shift: f64) -> Result<RippleReport> {
    let m = position(cg.ids(), source)?;
    let mut responses: Vec<f64> = cg.data().column(m).iter().map(|c| c * shift).collect();
    // exact even if the diagonal carries rounding
    responses[m] = shift;
    Ok(RippleReport {
        source,
        shift,
        targets: cg.ids().to_vec(),
        responses,
    })
}

/// Response of producer-goods production to shipments of each final-demand good.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalToIntermediate {
    /// Final-demand goods `1..=19`.
    pub goods: Vec<u16>,
    /// Column `j` holds `C_{(P, PRODUCER_GOODS[j]); (S, g)}`.
    pub values: Vec<[f64; 2]>,
}

impl FinalToIntermediate {
    /// Final-demand goods sorted by descending response of producer goods `target`.
    pub fn ranking(&self, target: u16) -> Result<Vec<u16>> {
        let j = PRODUCER_GOODS
            .iter()
            .position(|&g| g == target)
            .ok_or_else(|| Error::LayoutMismatch(format!("goods {target} is not a producer good")))?;
        let mut order: Vec<(u16, f64)> =
            self.goods.iter().zip(&self.values).map(|(&g, v)| (g, v[j])).collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(order.into_iter().map(|(g, _)| g).collect())
    }
}

pub fn final_to_intermediate(cg: &CorrMatrix) -> Result<FinalToIntermediate> {
    let lookup = |alpha, g| {
        let id = SeriesId::new(alpha, g);
        position(cg.ids(), id).map_err(|_| {
            Error::LayoutMismatch(format!("series {id} required by the goods layout is absent"))
        })
    };
    let targets = [
        lookup(Variable::Production, PRODUCER_GOODS[0])?,
        lookup(Variable::Production, PRODUCER_GOODS[1])?,
    ];
    let mut goods = Vec::new();
    let mut values = Vec::new();
    for g in 1..=FINAL_DEMAND_GOODS {
        let s = lookup(Variable::Shipments, g)?;
        goods.push(g);
        values.push([cg.data()[(targets[0], s)], cg.data()[(targets[1], s)]]);
    }
    Ok(FinalToIntermediate { goods, values })
}

/// CSV with one row per final-demand good; raw columns are empty when `raw` is absent.
pub fn write_final_to_intermediate_csv<W: Write>(
    genuine: &FinalToIntermediate,
    raw: Option<&FinalToIntermediate>,
    mut out: W,
) -> Result<()> {
    writeln!(out, "goods,label,g20_genuine,g20_raw,g21_genuine,g21_raw")?;
    for (i, &g) in genuine.goods.iter().enumerate() {
        let label = IIP_GOODS.get(usize::from(g) - 1).copied().unwrap_or("");
        let cell = |t: Option<&FinalToIntermediate>, j: usize| {
            t.map(|t| t.values[i][j].to_string()).unwrap_or_default()
        };
        writeln!(
            out,
            "{g},\"{label}\",{},{},{},{}",
            genuine.values[i][0],
            cell(raw, 0),
            genuine.values[i][1],
            cell(raw, 1)
        )?;
    }
    Ok(())
}

/// `χ̂_{mn} = β·V⁽ᵐ⁾ᵀ C V⁽ⁿ⁾` for the leading `k` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSusceptibility {
    pub values: DMatrix<f64>,
    pub beta: f64,
}

impl ReducedSusceptibility {
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Entries divided by `χ̂₁₁`.
    pub fn normalized(&self) -> DMatrix<f64> {
        &self.values / self.values[(0, 0)]
    }

    fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    /// `{k, beta, values, normalized}` with row-major nested arrays.
    pub fn to_json(&self) -> Result<String> {
        let doc = serde_json::json!({
            "k": self.dim(),
            "beta": self.beta,
            "values": Self::rows(&self.values),
            "normalized": Self::rows(&self.normalized()),
        });
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

pub fn reduced_susceptibility(
    c: &CorrMatrix,
    b: &ModeBasis,
    k: usize,
    beta: f64,
) -> Result<ReducedSusceptibility> {
    check_beta(beta)?;
    if c.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            actual: c.dim(),
        });
    }
    if k == 0 || k > b.dim() {
        return Err(Error::BadModeCount { k, max: b.dim() });
    }
    let v = b.vectors().columns(0, k);
    let mut values = v.transpose() * c.data() * v * beta;
    for i in 0..k {
        for j in (i + 1)..k {
            let s = 0.5 * (values[(i, j)] + values[(j, i)]);
            values[(i, j)] = s;
            values[(j, i)] = s;
        }
    }
    Ok(ReducedSusceptibility { values, beta })
}
