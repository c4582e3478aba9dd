use nalgebra::DMatrix;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// N×dims scores.
    pub projection: Vec<Vec<f64>>,
    /// dims×F unit loadings, largest-magnitude entry positive.
    pub components: Vec<Vec<f64>>,
    /// Sample variance (divisor N−1) along each component.
    pub explained_variance: Vec<f64>,
}

/// Column means computed relative to the first row, so a constant column
/// centres to exact zeros.
fn centered(x: &[Vec<f64>]) -> DMatrix<f64> {
    let n = x.len();
    let f = x[0].len();
    let mut shift = vec![0.0; f];
    for r in x {
        for ((s, v), v0) in shift.iter_mut().zip(r).zip(&x[0]) {
            *s += v - v0;
        }
    }
    let mean: Vec<f64> = shift.iter().zip(&x[0]).map(|(s, v0)| v0 + s / n as f64).collect();
    DMatrix::from_fn(n, f, |i, j| x[i][j] - mean[j])
}

/// Projects onto the top `dims` right singular vectors of the centred data.
/// Fails with [`Error::RankDeficient`] when fewer than `dims` singular values
/// are non-zero.
pub fn pca_project(x: &[Vec<f64>], dims: usize) -> Result<Pca> {
    if dims == 0 {
        return Err(Error::invalid("dims must be >= 1"));
    }
    if x.is_empty() {
        return Err(Error::Empty("no rows to project".into()));
    }
    let f = x[0].len();
    if let Some(bad) = x.iter().position(|r| r.len() != f) {
        return Err(Error::shape(format!("row {bad} has width {}, expected {f}", x[bad].len())));
    }
    if x.len() < dims || f < dims {
        return Err(Error::invalid(format!(
            "cannot take {dims} components of a {}×{f} matrix",
            x.len()
        )));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in PCA input"));
    }
    let c = centered(x);
    let svd = c.clone().svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::invalid("SVD did not converge"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let rank = svd.singular_values.iter().filter(|&&s| s > 0.0).count();
    if rank < dims {
        return Err(Error::RankDeficient {
            requested: dims,
            achievable: rank,
        });
    }

    let denom = (x.len().max(2) - 1) as f64;
    let mut components = Vec::with_capacity(dims);
    let mut explained = Vec::with_capacity(dims);
    for &k in &order[..dims] {
        let mut v: Vec<f64> = vt.row(k).iter().copied().collect();
        let lead = v.iter().copied().fold(0.0f64, |m, a| if a.abs() > m.abs() { a } else { m });
        if lead < 0.0 {
            v.iter_mut().for_each(|a| *a = -*a);
        }
        components.push(v);
        explained.push(svd.singular_values[k].powi(2) / denom);
    }
    let projection = (0..x.len())
        .map(|i| {
            components
                .iter()
                .map(|v| c.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    Ok(Pca {
        projection,
        components,
        explained_variance: explained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use rand::Rng;

    fn variance(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    }

    #[test]
    fn line_in_three_dimensions() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| {
            let t = i as f64 * 0.37 - 2.0;
            vec![1.0 + 2.0 * t, -3.0 * t, 0.5 + t]
        }).collect();
        let p = pca_project(&x, 2).unwrap();
        let v1 = variance(&p.projection.iter().map(|r| r[0]).collect::<Vec<_>>());
        let v2 = variance(&p.projection.iter().map(|r| r[1]).collect::<Vec<_>>());
        assert!(v2 < 1e-10 * v1);
    }

    #[test]
    fn variances_are_covariance_eigenvalues() {
        let mut rng = crate::seed::rng(9);
        let x: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                vec![3.0 * a + b, a - b, 0.2 * rng.random_range(-1.0..1.0), 2.0 * b]
            })
            .collect();
        let p = pca_project(&x, 2).unwrap();
        let n = x.len();
        let mean: Vec<f64> = (0..4).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
        let cov = DMatrix::from_fn(4, 4, |a, b| {
            x.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / (n - 1) as f64
        });
        let mut eig: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        for d in 0..2 {
            let v = variance(&p.projection.iter().map(|r| r[d]).collect::<Vec<_>>());
            assert!((v - eig[d]).abs() < 1e-9, "{v} vs {}", eig[d]);
            assert!((p.explained_variance[d] - eig[d]).abs() < 1e-9);
        }
    }

    #[test]
    fn sign_convention() {
        let x = vec![vec![0.0, 0.0], vec![-1.0, -0.1], vec![-2.0, 0.1], vec![-3.0, 0.0]];
        let p = pca_project(&x, 1).unwrap();
        let v = &p.components[0];
        assert!(v[0] > 0.0 && v[0].abs() > v[1].abs());
    }

    #[test]
    fn identical_rows_have_rank_zero() {
        let x = vec![vec![0.1 + 0.2, 7.0, -1e-3]; 6];
        match pca_project(&x, 1) {
            Err(Error::RankDeficient { requested: 1, achievable: 0 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shape_preconditions() {
        assert!(pca_project(&[vec![1.0, 2.0]], 2).is_err());
        assert!(pca_project(&[vec![1.0], vec![2.0], vec![3.0]], 2).is_err());
    }
}
