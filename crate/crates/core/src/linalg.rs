//! Small dense kernels: symmetric 3x3 eigendecomposition and an LU solve.

pub type Mat3 = [[f64; 3]; 3];
pub type Vec3 = [f64; 3];

/// Eigenpairs of a symmetric 3x3 matrix by cyclic Jacobi rotations.
///
/// Eigenvalues are sorted descending. Each eigenvector is normalized and
/// signed so that its largest-magnitude component is positive (first one on
/// ties), which makes the output a deterministic function of the input.
pub fn symmetric_eigen3(m: &Mat3) -> (Vec3, [Vec3; 3]) {
    let mut a = *m;
    // Columns of v are the eigenvectors.
    let mut v: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    for _sweep in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if off == 0.0 || off <= f64::EPSILON * f64::EPSILON * diag * 1e-4 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            // A <- J^T A J with J the (p, q) rotation.
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }

    let mut pairs: Vec<(f64, Vec3)> = (0..3).map(|j| (a[j][j], canonical_sign([v[0][j], v[1][j], v[2][j]]))).collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    ([pairs[0].0, pairs[1].0, pairs[2].0], [pairs[0].1, pairs[1].1, pairs[2].1])
}

fn canonical_sign(v: Vec3) -> Vec3 {
    let n = dot(&v, &v).sqrt();
    let v = [v[0] / n, v[1] / n, v[2] / n];
    let mut idx = 0;
    for i in 1..3 {
        if v[i].abs() > v[idx].abs() {
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        [-v[0], -v[1], -v[2]]
    } else {
        v
    }
}

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

pub fn frobenius(m: &Mat3) -> f64 {
    m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

/// Error from [`LuFactors::factor`] when a pivot vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularMatrix {
    pub column: usize,
}

/// LU factorization with partial pivoting of a dense square matrix.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    original: Vec<f64>,
}

impl LuFactors {
    /// Factors the row-major `n x n` matrix. A pivot whose magnitude is at or
    /// below `rel_tol * max|a_ij|` is reported as singular.
    pub fn factor(n: usize, matrix: &[f64], rel_tol: f64) -> Result<Self, SingularMatrix> {
        assert_eq!(matrix.len(), n * n);
        let scale = matrix.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let tol = rel_tol * scale.max(f64::MIN_POSITIVE);
        let mut lu = matrix.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (piv, pval) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pval <= tol {
                return Err(SingularMatrix { column: k });
            }
            if piv != k {
                for j in 0..n {
                    lu.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
            }
            let d = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / d;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= f * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Self {
            n,
            lu,
            perm,
            original: matrix.to_vec(),
        })
    }

    fn substitute(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }

    /// Solves `A x = rhs` with two steps of iterative refinement.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let n = self.n;
        let mut x = self.substitute(rhs);
        for _ in 0..2 {
            let resid: Vec<f64> = (0..n)
                .map(|i| rhs[i] - (0..n).map(|j| self.original[i * n + j] * x[j]).sum::<f64>())
                .collect();
            let dx = self.substitute(&resid);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        x
    }
}
