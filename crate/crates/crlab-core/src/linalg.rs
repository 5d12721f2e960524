//! Small dense linear algebra: jet-valued inversion and symmetric float
//! eigenproblems.

use alloc::vec;
use alloc::vec::Vec;

use crate::jets::Jet;
use crate::scalar::Scalar;
use crate::Error;

/// Inverse of a square matrix of real jets by Gauss–Jordan elimination.
///
/// Pivots are chosen on the value parts: the first nonzero entry in exact
/// mode, the largest magnitude in float mode.
pub fn invert_jets<S: Scalar>(a: &[Vec<Jet<S>>]) -> Result<Vec<Vec<Jet<S>>>, Error> {
    let n = a.len();
    let lay = a[0][0].layout().clone();
    let order = a.iter().flatten().map(Jet::order).min().unwrap_or(0);
    let mut m: Vec<Vec<Jet<S>>> = a.iter().map(|r| r.iter().map(|x| x.truncate(order)).collect()).collect();
    let mut inv: Vec<Vec<Jet<S>>> = (0..n)
        .map(|i| (0..n).map(|j| Jet::constant(&lay, order, if i == j { S::one() } else { S::zero() })).collect())
        .collect();
    for col in 0..n {
        let pivot = if S::EXACT {
            (col..n).find(|&r| !m[r][col].value().is_zero())
        } else {
            (col..n)
                .filter(|&r| !m[r][col].value().is_zero())
                .max_by(|&x, &y| m[x][col].value().abs_f64().total_cmp(&m[y][col].value().abs_f64()))
        }
        .ok_or(Error::Singular)?;
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let r = m[col][col].recip()?;
        for j in 0..n {
            m[col][j] = m[col][j].mul(&r);
            inv[col][j] = inv[col][j].mul(&r);
        }
        for row in 0..n {
            if row == col || m[row][col].is_zero() {
                continue;
            }
            let f = m[row][col].clone();
            for j in 0..n {
                let t = m[col][j].mul(&f);
                m[row][j].sub_assign(&t);
                let t = inv[col][j].mul(&f);
                inv[row][j].sub_assign(&t);
            }
        }
    }
    Ok(inv)
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, Error> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Degenerate("matrix is not positive definite"));
                }
                l[i][i] = libm::sqrt(s);
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a symmetric matrix
/// by cyclic Jacobi rotations.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        let diag: f64 = (0..n).map(|i| m[i][i] * m[i][i]).sum();
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&x, &y| m[x][x].total_cmp(&m[y][y]));
    let vals = idx.iter().map(|&i| m[i][i]).collect();
    let vecs = (0..n).map(|r| idx.iter().map(|&i| v[r][i]).collect()).collect();
    (vals, vecs)
}

/// Eigenvalues of `S w = λ M w` for symmetric `S` and positive definite `M`.
pub fn generalized_eigenvalues(s: &[Vec<f64>], m: &[Vec<f64>]) -> Result<Vec<f64>, Error> {
    let n = s.len();
    let l = cholesky(m)?;
    // Y = L⁻¹ S, then C = Y L⁻ᵀ
    let solve_lower = |b: &[f64]| {
        let mut x = vec![0.0; n];
        for i in 0..n {
            let mut t = b[i];
            for k in 0..i {
                t -= l[i][k] * x[k];
            }
            x[i] = t / l[i][i];
        }
        x
    };
    let cols: Vec<Vec<f64>> = (0..n).map(|j| solve_lower(&(0..n).map(|i| s[i][j]).collect::<Vec<_>>())).collect();
    // cols[j] = column j of L⁻¹ S; rows of (L⁻¹ S) are then solved again
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        let row: Vec<f64> = (0..n).map(|j| cols[j][i]).collect();
        let x = solve_lower(&row);
        for j in 0..n {
            c[i][j] = x[j];
        }
    }
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (c[i][j] + c[j][i]);
            c[i][j] = avg;
            c[j][i] = avg;
        }
    }
    Ok(jacobi_eigen(&c).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::Layout;
    use crate::scalar::Exact;

    #[test]
    fn jet_matrix_inverse_is_exact() {
        let lay = Layout::new(2, 2);
        let x = Jet::coordinates(&lay, 2, &[Exact::from_i64(2), Exact::from_i64(1)]);
        let one = Jet::constant(&lay, 2, Exact::one());
        let a = vec![vec![x[0].clone(), x[1].clone()], vec![one.clone(), x[0].mul(&x[1])]];
        let inv = invert_jets(&a).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut s = Jet::zero(&lay, 2);
                for k in 0..2 {
                    s.mul_add_assign(&a[i][k], &inv[k][j]);
                }
                let e = if i == j { one.clone() } else { Jet::zero(&lay, 2) };
                assert_eq!(s, e);
            }
        }
    }

    #[test]
    fn jacobi_recovers_spectrum() {
        let a = vec![vec![2.0, 1.0, 0.0], vec![1.0, 2.0, 0.0], vec![0.0, 0.0, 5.0]];
        let (vals, vecs) = jacobi_eigen(&a);
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14 && (vals[2] - 5.0).abs() < 1e-14);
        let v0: Vec<f64> = (0..3).map(|r| vecs[r][0]).collect();
        assert!((v0[0] + v0[1]).abs() < 1e-14);
    }

    #[test]
    fn generalized_problem_matches_scaled_mass() {
        let s = vec![vec![4.0, 0.0], vec![0.0, 9.0]];
        let m = vec![vec![2.0, 0.0], vec![0.0, 3.0]];
        let ev = generalized_eigenvalues(&s, &m).unwrap();
        assert!((ev[0] - 2.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
        assert!(cholesky(&[vec![-1.0]]).is_err());
    }
}
