//! Classical (Torgerson) multidimensional scaling.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{CoreError, Result};
use crate::linalg::sorted_symmetric_eigen;

#[derive(Clone, Debug, PartialEq)]
pub struct MdsResult {
    pub positions: Array2<f64>,
    /// Leading eigenvalues of the double-centered matrix.
    pub eigenvalues: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Flips each output axis so its largest-magnitude coordinate is positive.
fn fix_signs(positions: &mut Array2<f64>) {
    for mut col in positions.columns_mut() {
        let mut pivot = 0;
        for i in 0..col.len() {
            if col[i].abs() > col[pivot].abs() + 1e-12 {
                pivot = i;
            }
        }
        if col.len() > 0 && col[pivot] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
}

fn check_rows(n: usize, dims: usize) -> Result<()> {
    if dims == 0 {
        return Err(CoreError::InvalidParameter("MDS needs at least one output dimension".into()));
    }
    if n < dims + 1 {
        return Err(CoreError::TooFewRows { needed: dims + 1, got: n });
    }
    Ok(())
}

fn from_eigen(values: Vec<f64>, vectors: Array2<f64>, dims: usize) -> MdsResult {
    let n = vectors.nrows();
    let mut positions = Array2::zeros((n, dims));
    let mut warnings = Vec::new();
    for c in 0..dims.min(values.len()) {
        let scale = values[c].max(0.0).sqrt();
        for i in 0..n {
            positions[[i, c]] = vectors[[i, c]] * scale;
        }
    }
    if values.iter().take(dims).all(|v| *v <= 1e-12) {
        warnings.push("all rows coincide; MDS positions are all zero".into());
        positions.fill(0.0);
    }
    fix_signs(&mut positions);
    MdsResult { positions, eigenvalues: values.into_iter().take(dims).collect(), warnings }
}

/// MDS from a symmetric distance matrix.
pub fn classical_mds_from_distances(distances: &Array2<f64>, dims: usize) -> Result<MdsResult> {
    let n = distances.nrows();
    check_rows(n, dims)?;
    let sq = distances.mapv(|d| d * d);
    let row_means = sq.mean_axis(Axis(1)).expect("n > 0");
    let grand = row_means.mean().expect("n > 0");
    let b = Array2::from_shape_fn((n, n), |(i, j)| -0.5 * (sq[[i, j]] - row_means[i] - row_means[j] + grand));
    let (values, vectors) = sorted_symmetric_eigen(&b)?;
    Ok(from_eigen(values, vectors, dims))
}

/// MDS of Euclidean rows. Equivalent to [`classical_mds_from_distances`] on
/// the pairwise distances, computed through the smaller Gram matrix.
pub fn classical_mds(rows: ArrayView2<'_, f64>, dims: usize) -> Result<MdsResult> {
    let (n, d) = rows.dim();
    check_rows(n, dims)?;
    let mean = rows.mean_axis(Axis(0)).expect("n > 0");
    let centered = &rows - &mean;
    if d >= n {
        let gram = centered.dot(&centered.t());
        let (values, vectors) = sorted_symmetric_eigen(&gram)?;
        return Ok(from_eigen(values, vectors, dims));
    }
    let cov = centered.t().dot(&centered);
    let (values, basis) = sorted_symmetric_eigen(&cov)?;
    let keep = dims.min(d);
    let mut positions = Array2::zeros((n, dims));
    positions.slice_mut(ndarray::s![.., ..keep]).assign(&centered.dot(&basis.slice(ndarray::s![.., ..keep])));
    let mut warnings = Vec::new();
    if values.iter().take(dims).all(|v| *v <= 1e-12) {
        warnings.push("all rows coincide; MDS positions are all zero".into());
        positions.fill(0.0);
    }
    fix_signs(&mut positions);
    Ok(MdsResult { positions, eigenvalues: values.into_iter().take(dims).collect(), warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pairwise_distances;
    use ndarray::array;

    #[test]
    fn planar_points_keep_their_distances() {
        let x = array![[0.0, 0.0], [3.0, 0.0], [0.0, 4.0], [1.0, 1.0], [-2.0, 1.5]];
        let expected = pairwise_distances(x.view());
        for result in [classical_mds(x.view(), 2).unwrap(), classical_mds_from_distances(&expected, 2).unwrap()] {
            let got = pairwise_distances(result.positions.view());
            for (a, b) in got.iter().zip(expected.iter()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn both_routes_agree() {
        let x = array![[0.0, 0.0, 1.0], [3.0, 0.0, 0.5], [0.0, 4.0, 0.0], [1.0, 1.0, 2.0], [-2.0, 1.5, 0.0]];
        let a = classical_mds(x.view(), 2).unwrap();
        let b = classical_mds_from_distances(&pairwise_distances(x.view()), 2).unwrap();
        for (p, q) in a.positions.iter().zip(b.positions.iter()) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_rows_give_zeros_and_a_warning() {
        let x = Array2::from_elem((4, 3), 2.0);
        let r = classical_mds(x.view(), 2).unwrap();
        assert!(r.positions.iter().all(|v| *v == 0.0));
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let x = array![[0.0, 1.0], [1.0, 0.0]];
        assert!(classical_mds(x.view(), 2).is_err());
    }
}
