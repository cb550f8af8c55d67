//! Dense symmetric linear algebra sized for desk-scale grids (n ≤ ~2048):
//! Cholesky factorization with an escalating jitter policy and a symmetric
//! eigenvalue solver (Householder tridiagonalization + implicit QL).

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Debug, Clone)]
pub struct SquareMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.n)
            .map(|i| self.get(i, i))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Lower-triangular Cholesky factor stored row-major (zero above diagonal).
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    pub n: usize,
    pub lower: Vec<f64>,
    /// Diagonal jitter that had to be added before the factorization succeeded.
    pub jitter: f64,
}

impl CholeskyFactor {
    /// y = L z for a standard-normal vector z.
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for i in 0..self.n {
            let row = &self.lower[i * self.n..i * self.n + i + 1];
            let mut acc = 0.0;
            for (lij, zj) in row.iter().zip(z[..=i].iter()) {
                acc += lij * zj;
            }
            out[i] = acc;
        }
    }
}

fn try_cholesky(a: &SquareMatrix, jitter: f64) -> Option<Vec<f64>> {
    let n = a.n;
    let mut l = vec![0.0_f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            if i == j {
                sum += jitter;
            }
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Cholesky with the jitter policy: on failure add `δ·I` with δ starting at
/// `1e-12 · max(diag)` and doubling at most `max_attempts` times.
pub fn cholesky_with_jitter(a: &SquareMatrix, max_attempts: u32) -> Result<CholeskyFactor> {
    if let Some(l) = try_cholesky(a, 0.0) {
        return Ok(CholeskyFactor {
            n: a.n,
            lower: l,
            jitter: 0.0,
        });
    }
    let scale = a.max_diagonal().max(f64::MIN_POSITIVE);
    let mut delta = 1e-12 * scale;
    for _ in 0..max_attempts {
        if let Some(l) = try_cholesky(a, delta) {
            return Ok(CholeskyFactor {
                n: a.n,
                lower: l,
                jitter: delta,
            });
        }
        delta *= 2.0;
    }
    let eigs = symmetric_eigenvalues(a)?;
    Err(Error::Factorization {
        min_eigenvalue: eigs.first().copied().unwrap_or(f64::NAN),
        attempts: max_attempts,
    })
}

/// Eigenvalues of a symmetric matrix, ascending. Householder reduction to
/// tridiagonal form followed by implicit-shift QL; eigenvectors are not
/// accumulated.
pub fn symmetric_eigenvalues(a: &SquareMatrix) -> Result<Vec<f64>> {
    let n = a.n;
    if n == 0 {
        return Ok(vec![]);
    }
    let mut m = a.data.clone();
    let mut d = vec![0.0_f64; n];
    let mut e = vec![0.0_f64; n];

    // tred1: reduce to tridiagonal (diagonal d, subdiagonal e).
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        let mut scale = 0.0;
        if l > 0 {
            for k in 0..=l {
                scale += m[i * n + k].abs();
            }
            if scale == 0.0 {
                e[i] = m[i * n + l];
            } else {
                for k in 0..=l {
                    m[i * n + k] /= scale;
                    h += m[i * n + k] * m[i * n + k];
                }
                let mut f = m[i * n + l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                m[i * n + l] = f - g;
                let mut tau = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += m[j * n + k] * m[i * n + k];
                    }
                    for k in (j + 1)..=l {
                        g += m[k * n + j] * m[i * n + k];
                    }
                    e[j] = g / h;
                    tau += e[j] * m[i * n + j];
                }
                let hh = tau / (h + h);
                for j in 0..=l {
                    f = m[i * n + j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        m[j * n + k] -= f * e[k] + g * m[i * n + k];
                    }
                }
            }
        } else {
            e[i] = m[i * n + l];
        }
        d[i] = h;
    }
    e[0] = 0.0;
    for i in 0..n {
        d[i] = m[i * n + i];
    }

    // tql1: implicit-shift QL on the tridiagonal.
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm + 1 < n {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::Estimation(
                    "eigenvalue QL iteration did not converge".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let r0 = g.hypot(1.0);
            g = d[mm] - d[l] + e[l] / (g + r0.copysign(g));
            let (mut s, mut c) = (1.0_f64, 1.0_f64);
            let mut p = 0.0_f64;
            let mut underflow = false;
            for i in (l..mm).rev() {
                let f = s * e[i];
                let b = c * e[i];
                let r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                let rot = (d[i] - g) * s + 2.0 * c * b;
                p = s * rot;
                d[i + 1] = g + p;
                g = c * rot - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn min_ij_matrix(n: usize) -> SquareMatrix {
        let mut a = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                a.set(i, j, (i.min(j) + 1) as f64);
            }
        }
        a
    }

    #[test]
    fn eigenvalues_of_min_matrix_match_closed_form() {
        // Eigenvalues of [min(i,j)]_{1..n} are 1/(4 sin^2((2k-1)π/(2(2n+1)))).
        let n = 24;
        let a = min_ij_matrix(n);
        let eig = symmetric_eigenvalues(&a).unwrap();
        let mut expected: Vec<f64> = (1..=n)
            .map(|k| {
                let theta = (2 * k - 1) as f64 * std::f64::consts::PI / (2.0 * (2 * n + 1) as f64);
                1.0 / (4.0 * theta.sin().powi(2))
            })
            .collect();
        expected.sort_by(f64::total_cmp);
        for (got, want) in eig.iter().zip(expected.iter()) {
            assert!(
                (got - want).abs() <= 1e-10 * want.max(1.0),
                "{got} vs {want}"
            );
        }
    }

    #[test]
    fn eigenvalues_of_diagonal_matrix() {
        let mut a = SquareMatrix::zeros(3);
        a.set(0, 0, 3.0);
        a.set(1, 1, -1.0);
        a.set(2, 2, 7.0);
        let eig = symmetric_eigenvalues(&a).unwrap();
        assert_eq!(eig.len(), 3);
        assert!((eig[0] + 1.0).abs() < 1e-14);
        assert!((eig[1] - 3.0).abs() < 1e-14);
        assert!((eig[2] - 7.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_roundtrip() {
        let n = 8;
        let a = min_ij_matrix(n);
        let f = cholesky_with_jitter(&a, 20).unwrap();
        assert_eq!(f.jitter, 0.0);
        // L L^T == A
        for i in 0..n {
            for j in 0..=i {
                let mut acc = 0.0;
                for k in 0..=j {
                    acc += f.lower[i * n + k] * f.lower[j * n + k];
                }
                assert!((acc - a.get(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cholesky_jitters_singular_matrix() {
        // Rank-one 2x2: requires jitter, succeeds.
        let mut a = SquareMatrix::zeros(2);
        a.set(0, 0, 1.0);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        a.set(1, 1, 1.0);
        let f = cholesky_with_jitter(&a, 20).unwrap();
        assert!(f.jitter > 0.0 && f.jitter < 1e-6);
    }

    #[test]
    fn cholesky_rejects_indefinite_matrix() {
        let mut a = SquareMatrix::zeros(2);
        a.set(0, 0, 1.0);
        a.set(0, 1, 0.0);
        a.set(1, 0, 0.0);
        a.set(1, 1, -1.0);
        let r = cholesky_with_jitter(&a, 10);
        match r {
            Err(Error::Factorization {
                min_eigenvalue,
                attempts,
            }) => {
                assert_eq!(attempts, 10);
                assert!((min_eigenvalue + 1.0).abs() < 1e-10);
            }
            other => panic!("expected factorization error, got {other:?}"),
        }
    }

    #[test]
    fn apply_matches_direct_product() {
        let n = 5;
        let a = min_ij_matrix(n);
        let f = cholesky_with_jitter(&a, 20).unwrap();
        let z = [0.3, -1.2, 0.5, 2.0, -0.7];
        let mut out = vec![0.0; n];
        f.apply(&z, &mut out);
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += f.lower[i * n + j] * z[j];
            }
            assert_eq!(out[i], acc);
        }
    }
}
