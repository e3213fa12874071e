//! Noise-filtered correlation matrix built from the significant modes.

use crate::error::{Error, Result};
use crate::spectral::{CorrMatrix, MatrixKind, ModeBasis};

/// Off-diagonal entries `Σ_{n≤k} λ⁽ⁿ⁾ V_ℓ⁽ⁿ⁾ V_m⁽ⁿ⁾`, diagonal reset to one.
///
/// The result is not positive semidefinite in general and is used as-is.
pub fn genuine_matrix(b: &ModeBasis, k: usize) -> Result<CorrMatrix> {
    let m = b.dim();
    if k > m {
        return Err(Error::BadModeCount { k, max: m });
    }
    let v = b.vectors();
    let ev = b.eigenvalues();
    let mut data = nalgebra::DMatrix::zeros(m, m);
    for i in 0..m {
        data[(i, i)] = 1.0;
        for j in (i + 1)..m {
            let x: f64 = (0..k).map(|n| ev[n] * v[(i, n)] * v[(j, n)]).sum();
            data[(i, j)] = x;
            data[(j, i)] = x;
        }
    }
    Ok(CorrMatrix::from_trusted(
        MatrixKind::Genuine,
        b.ids().to_vec(),
        data,
        Some(k),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::SeriesId;
    use crate::spectral::{correlation_matrix, eigendecompose};
    use crate::synth::{generate, SynthSpec};
    use nalgebra::DMatrix;

    #[test]
    fn limits() {
        let w = generate(&SynthSpec::iid(9, 40, 1).with_random_mode(3.0)).unwrap();
        let c = correlation_matrix(&w);
        let b = eigendecompose(&c).unwrap();
        let g0 = genuine_matrix(&b, 0).unwrap();
        assert_eq!(g0.data(), &DMatrix::identity(9, 9));
        assert_eq!(g0.kind(), MatrixKind::Genuine);
        let gm = genuine_matrix(&b, 9).unwrap();
        assert!((gm.data() - c.data()).amax() <= 1e-10);
        assert_eq!(gm.modes(), Some(9));
        assert!(matches!(genuine_matrix(&b, 10), Err(Error::BadModeCount { .. })));
    }

    #[test]
    fn rank_one_unchanged() {
        let ones = CorrMatrix::new(
            MatrixKind::Raw,
            SeriesId::plain(2),
            DMatrix::from_element(2, 2, 1.0),
            None,
        )
        .unwrap();
        let g = genuine_matrix(&eigendecompose(&ones).unwrap(), 1).unwrap();
        assert!((g.data() - ones.data()).amax() <= 1e-12);
    }

    #[test]
    fn frobenius_distance_non_increasing() {
        let spec = SynthSpec::iid(30, 90, 4).with_random_mode(4.0).with_random_mode(2.5);
        let c = correlation_matrix(&generate(&spec).unwrap());
        let b = eigendecompose(&c).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..=30 {
            let d = (genuine_matrix(&b, k).unwrap().data() - c.data()).norm();
            assert!(d <= prev + 1e-12, "k = {k}: {d} > {prev}");
            prev = d;
        }
    }

    #[test]
    fn symmetric_with_unit_diagonal() {
        let spec = SynthSpec::iid(30, 50, 2).with_random_mode(4.0);
        let b = eigendecompose(&correlation_matrix(&generate(&spec).unwrap())).unwrap();
        for k in [1, 2, 5] {
            let g = genuine_matrix(&b, k).unwrap();
            let d = g.data();
            assert_eq!(d, &d.transpose());
            assert!((0..30).all(|i| d[(i, i)] == 1.0));
        }
    }
}
