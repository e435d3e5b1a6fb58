//! Small dense complex matrices and a cyclic Jacobi eigensolver for
//! Hermitian input. Row-major storage; only square matrices are needed.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

pub const C0: Complex64 = Complex64::new(0.0, 0.0);
pub const C1: Complex64 = Complex64::new(1.0, 0.0);
pub const CI: Complex64 = Complex64::new(0.0, 1.0);

/// Off-diagonal Frobenius norm at which the Jacobi sweep stops.
pub const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![C0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C1;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    /// Builds from row-major data; `data.len()` must be a perfect square.
    pub fn from_rows(data: Vec<Complex64>) -> Option<Self> {
        let dim = (data.len() as f64).sqrt().round() as usize;
        (dim * dim == data.len()).then_some(Self { dim, data })
    }

    pub fn diag(values: &[Complex64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == C0 {
                    continue;
                }
                let orow = &other.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.dim, v.len(), "mul_vec dimension mismatch");
        (0..self.dim)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn dagger(&self) -> CMatrix {
        CMatrix::from_fn(self.dim, |r, c| self[(c, r)].conj())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: Complex64) -> CMatrix {
        CMatrix {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, other.dim);
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, other.dim);
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// `self ⊗ other`, with `self` as the leftmost (most significant) factor.
    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        let (n, m) = (self.dim, other.dim);
        CMatrix::from_fn(n * m, |r, c| self[(r / m, c / m)] * other[(r % m, c % m)])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest `|A_rc - conj(A_cr)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// Largest entry of `|U†U - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        self.dagger()
            .matmul(self)
            .max_abs_diff(&CMatrix::identity(self.dim))
    }

    fn off_diagonal_norm(&self) -> f64 {
        let n = self.dim;
        let mut s = 0.0;
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    s += self[(r, c)].norm_sqr();
                }
            }
        }
        s.sqrt()
    }

    /// Spectral decomposition of a Hermitian matrix by cyclic complex Jacobi
    /// rotations. Returns `(eigenvalues, V)` with `A = V diag(λ) V†`; the
    /// columns of `V` are the eigenvectors. The caller is responsible for
    /// checking hermiticity.
    pub fn eigh(&self) -> (Vec<f64>, CMatrix) {
        let n = self.dim;
        let mut a = self.clone();
        let mut v = CMatrix::identity(n);
        let tol = JACOBI_TOL.max(1e-15 * a.frobenius_norm());

        for _ in 0..JACOBI_MAX_SWEEPS {
            if a.off_diagonal_norm() < tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    let r = apq.norm();
                    if r < 1e-300 {
                        continue;
                    }
                    let phase = apq / r;
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let theta = (aqq - app) / (2.0 * r);
                    let t = if theta == 0.0 {
                        1.0
                    } else {
                        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                    };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    // G = diag(1, conj(phase)) · [[c, s], [-s, c]]
                    let g = [
                        Complex64::new(c, 0.0),
                        Complex64::new(s, 0.0),
                        -phase.conj() * s,
                        phase.conj() * c,
                    ];
                    a.rotate_cols(p, q, g);
                    a.rotate_rows(p, q, g);
                    v.rotate_cols(p, q, g);
                    a[(p, q)] = C0;
                    a[(q, p)] = C0;
                }
            }
        }
        let values = (0..n).map(|i| a[(i, i)].re).collect();
        (values, v)
    }

    /// `self ← self · G` restricted to columns p, q.
    fn rotate_cols(&mut self, p: usize, q: usize, g: [Complex64; 4]) {
        let n = self.dim;
        for k in 0..n {
            let akp = self.data[k * n + p];
            let akq = self.data[k * n + q];
            self.data[k * n + p] = akp * g[0] + akq * g[2];
            self.data[k * n + q] = akp * g[1] + akq * g[3];
        }
    }

    /// `self ← G† · self` restricted to rows p, q.
    fn rotate_rows(&mut self, p: usize, q: usize, g: [Complex64; 4]) {
        let n = self.dim;
        for k in 0..n {
            let apk = self.data[p * n + k];
            let aqk = self.data[q * n + k];
            self.data[p * n + k] = g[0].conj() * apk + g[2].conj() * aqk;
            self.data[q * n + k] = g[1].conj() * apk + g[3].conj() * aqk;
        }
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.dim + c]
    }
}
