//! Dense state-vector and density-matrix simulation for up to
//! [`MAX_QUBITS`] qubits. Basis indices are big-endian: qubit 0 is the most
//! significant bit, matching [`crate::pauli`].

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{CMatrix, C0, C1};
use crate::pauli::{PauliString, PauliSum};

pub const MAX_QUBITS: usize = 12;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Capacity {
            what: "qubit count",
            requested: n,
            limit: MAX_QUBITS,
        });
    }
    Ok(())
}

fn bit_of(n: usize, q: usize) -> usize {
    1 << (n - 1 - q)
}

/// Validates that `qubits` are in range and pairwise distinct.
fn check_targets(n: usize, qubits: &[usize]) -> Result<()> {
    for (i, &q) in qubits.iter().enumerate() {
        if q >= n {
            return Err(Error::Qubit(format!("qubit {q} out of range for {n} qubits")));
        }
        if qubits[..i].contains(&q) {
            return Err(Error::Qubit(format!("qubit {q} listed twice")));
        }
    }
    Ok(())
}

/// Elementary operations accepted by [`StateVector::apply_gate`].
#[derive(Debug, Clone, PartialEq)]
pub enum GateOp {
    H(usize),
    Cz(usize, usize),
    /// Dense `2^k × 2^k` unitary; the first listed qubit is the most
    /// significant bit of the matrix index.
    Unitary { qubits: Vec<usize>, matrix: CMatrix },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::Qubit(format!("basis index {index} >= {dim}")));
        }
        let mut amps = vec![C0; dim];
        amps[index] = C1;
        Ok(Self { n_qubits, amps })
    }

    /// Takes ownership of raw amplitudes; the length must be `2^n`. The
    /// vector is not renormalized.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::Config(format!("state length {dim} is not 2^n")));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_qubits(n_qubits)?;
        Ok(Self { n_qubits, amps })
    }

    /// Haar-random pure state (normalized complex Gaussian vector).
    pub fn random(n_qubits: usize, rng: &mut impl Rng) -> Result<Self> {
        check_qubits(n_qubits)?;
        let mut amps: Vec<Complex64> = (0..1usize << n_qubits)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `|ψ⟩ ← e^{-i·angle·P}|ψ⟩ = cos(angle)|ψ⟩ − i sin(angle) P|ψ⟩`.
    pub fn apply_pauli_rotation(&mut self, p: &PauliString, angle: f64) -> Result<()> {
        check_dim(self.n_qubits, p.n_qubits())?;
        if angle == 0.0 {
            return Ok(());
        }
        let (c, s) = (angle.cos(), angle.sin());
        let (xi, zi) = p.index_masks();
        // -i·sin·(phase of P)
        let k = Complex64::new(0.0, -s) * p.action_phase();
        let sign = |b: usize| if (zi & b).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        if xi == 0 {
            for (b, a) in self.amps.iter_mut().enumerate() {
                *a *= c + k * sign(b);
            }
            return Ok(());
        }
        for b in 0..self.amps.len() {
            let b2 = b ^ xi;
            if b2 < b {
                continue;
            }
            let (a1, a2) = (self.amps[b], self.amps[b2]);
            self.amps[b2] = a2 * c + k * sign(b) * a1;
            self.amps[b] = a1 * c + k * sign(b2) * a2;
        }
        Ok(())
    }

    /// `|ψ⟩ ← P|ψ⟩`.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        check_dim(self.n_qubits, p.n_qubits())?;
        self.amps = p.apply_to(&self.amps);
        Ok(())
    }

    pub fn apply_gate(&mut self, gate: &GateOp) -> Result<()> {
        match gate {
            GateOp::H(q) => self.apply_h(*q),
            GateOp::Cz(a, b) => self.apply_cz(*a, *b),
            GateOp::Unitary { qubits, matrix } => self.apply_unitary(qubits, matrix),
        }
    }

    pub fn apply_h(&mut self, q: usize) -> Result<()> {
        check_targets(self.n_qubits, &[q])?;
        let bit = bit_of(self.n_qubits, q);
        for b in 0..self.amps.len() {
            if b & bit != 0 {
                continue;
            }
            let (a0, a1) = (self.amps[b], self.amps[b | bit]);
            self.amps[b] = (a0 + a1) * FRAC_1_SQRT_2;
            self.amps[b | bit] = (a0 - a1) * FRAC_1_SQRT_2;
        }
        Ok(())
    }

    pub fn apply_cz(&mut self, q1: usize, q2: usize) -> Result<()> {
        check_targets(self.n_qubits, &[q1, q2])?;
        let mask = bit_of(self.n_qubits, q1) | bit_of(self.n_qubits, q2);
        for (b, a) in self.amps.iter_mut().enumerate() {
            if b & mask == mask {
                *a = -*a;
            }
        }
        Ok(())
    }

    pub fn apply_unitary(&mut self, qubits: &[usize], m: &CMatrix) -> Result<()> {
        check_targets(self.n_qubits, qubits)?;
        let k = qubits.len();
        check_dim(1 << k, m.dim())?;
        let bits: Vec<usize> = qubits.iter().map(|&q| bit_of(self.n_qubits, q)).collect();
        let all = bits.iter().fold(0, |acc, b| acc | b);
        // local index l (first qubit = MSB) -> offset within the full index
        let offsets: Vec<usize> = (0..1usize << k)
            .map(|l| {
                (0..k)
                    .filter(|&j| l >> (k - 1 - j) & 1 == 1)
                    .fold(0, |acc, j| acc | bits[j])
            })
            .collect();
        let mut local = vec![C0; 1 << k];
        for base in 0..self.amps.len() {
            if base & all != 0 {
                continue;
            }
            for (l, off) in offsets.iter().enumerate() {
                local[l] = self.amps[base | off];
            }
            let out = m.mul_vec(&local);
            for (l, off) in offsets.iter().enumerate() {
                self.amps[base | off] = out[l];
            }
        }
        Ok(())
    }

    /// `⟨ψ|H|ψ⟩`, real for Hermitian `H`.
    pub fn expectation(&self, h: &PauliSum) -> Result<f64> {
        check_dim(self.n_qubits, h.n_qubits())?;
        let hp = h.apply_to(&self.amps);
        Ok(self
            .amps
            .iter()
            .zip(&hp)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .re)
    }

    pub fn to_density(&self) -> DensityMatrix {
        let m = CMatrix::from_fn(self.dim(), |r, c| self.amps[r] * self.amps[c].conj());
        DensityMatrix {
            n_qubits: self.n_qubits,
            m,
        }
    }
}

/// `⟨a|b⟩`.
pub fn overlap(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    check_dim(a.dim(), b.dim())?;
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

/// `e^{-iHt}` for a Pauli sum, via [`exact_unitary_dense`].
pub fn exact_unitary(h: &PauliSum, t: f64) -> Result<CMatrix> {
    if h.n_qubits() > MAX_QUBITS {
        return Err(Error::Capacity {
            what: "exact unitary",
            requested: h.n_qubits(),
            limit: MAX_QUBITS,
        });
    }
    exact_unitary_dense(&h.to_dense()?, t)
}

/// `e^{-iHt} = V e^{-iΛt} V†` from a Jacobi spectral decomposition.
pub fn exact_unitary_dense(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let dim = h.dim();
    if dim > 1 << MAX_QUBITS {
        return Err(Error::Capacity {
            what: "exact unitary dimension",
            requested: dim,
            limit: 1 << MAX_QUBITS,
        });
    }
    let defect = h.hermitian_defect();
    if defect > 1e-9 {
        return Err(Error::NotHermitian(defect));
    }
    let (vals, v) = h.eigh();
    let phases: Vec<Complex64> = vals
        .iter()
        .map(|&l| Complex64::from_polar(1.0, -l * t))
        .collect();
    Ok(v.matmul(&CMatrix::diag(&phases)).matmul(&v.dagger()))
}

/// `|Tr(V†U)/d|²`.
pub fn process_fidelity(u: &CMatrix, v: &CMatrix) -> f64 {
    assert_eq!(u.dim(), v.dim());
    let tr: Complex64 = (0..u.dim())
        .flat_map(|r| (0..u.dim()).map(move |c| (r, c)))
        .map(|(r, c)| v[(r, c)].conj() * u[(r, c)])
        .sum();
    (tr / u.dim() as f64).norm_sqr()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    m: CMatrix,
}

impl DensityMatrix {
    /// Wraps a matrix after checking hermiticity, unit trace, and positivity.
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        let dim = m.dim();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::Config(format!("density dimension {dim} is not 2^n")));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_qubits(n_qubits)?;
        let rho = Self { n_qubits, m };
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps a matrix the caller knows to be a valid state.
    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self {
            n_qubits: m.dim().trailing_zeros() as usize,
            m,
        }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let d = 1usize << n_qubits;
        Ok(Self {
            n_qubits,
            m: CMatrix::identity(d).scale(Complex64::new(1.0 / d as f64, 0.0)),
        })
    }

    /// Hermitian within 1e-10, trace 1 within 1e-10, eigenvalues ≥ −1e-9.
    pub fn validate(&self) -> Result<()> {
        let defect = self.m.hermitian_defect();
        if defect > 1e-10 {
            return Err(Error::NotHermitian(defect));
        }
        let tr = self.m.trace();
        if (tr - C1).norm() > 1e-10 {
            return Err(Error::Config(format!("density trace {tr} != 1")));
        }
        let min = self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -1e-9 {
            return Err(Error::Config(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn trace(&self) -> Complex64 {
        self.m.trace()
    }

    pub fn purity(&self) -> f64 {
        self.m.matmul(&self.m).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.m.eigh().0
    }

    /// `U ρ U†`.
    pub fn evolve(&self, u: &CMatrix) -> Result<Self> {
        check_dim(self.m.dim(), u.dim())?;
        Ok(Self {
            n_qubits: self.n_qubits,
            m: u.matmul(&self.m).matmul(&u.dagger()),
        })
    }

    pub fn kron(&self, other: &DensityMatrix) -> Result<Self> {
        check_qubits(self.n_qubits + other.n_qubits)?;
        Ok(Self {
            n_qubits: self.n_qubits + other.n_qubits,
            m: self.m.kron(&other.m),
        })
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_with_pure(&self, psi: &StateVector) -> Result<f64> {
        check_dim(self.m.dim(), psi.dim())?;
        let rp = self.m.mul_vec(psi.amplitudes());
        Ok(psi
            .amplitudes()
            .iter()
            .zip(&rp)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .re)
    }

    /// `½ Σ |λ_i(ρ − σ)|`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        check_dim(self.m.dim(), other.m.dim())?;
        let diff = self.m.sub(&other.m);
        Ok(0.5 * diff.eigh().0.iter().map(|l| l.abs()).sum::<f64>())
    }

    /// Reduced state on `keep`, ordered by ascending qubit index.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::Qubit("partial trace must keep at least one qubit".into()));
        }
        check_targets(self.n_qubits, keep)?;
        let n = self.n_qubits;
        let mut kept: Vec<usize> = keep.to_vec();
        kept.sort_unstable();
        let traced: Vec<usize> = (0..n).filter(|q| !kept.contains(q)).collect();
        let scatter = |qs: &[usize], local: usize| -> usize {
            let k = qs.len();
            (0..k)
                .filter(|&j| local >> (k - 1 - j) & 1 == 1)
                .fold(0, |acc, j| acc | bit_of(n, qs[j]))
        };
        let dk = 1usize << kept.len();
        let dt = 1usize << traced.len();
        let kept_off: Vec<usize> = (0..dk).map(|l| scatter(&kept, l)).collect();
        let tr_off: Vec<usize> = (0..dt).map(|l| scatter(&traced, l)).collect();
        let m = CMatrix::from_fn(dk, |r, c| {
            tr_off
                .iter()
                .map(|t| self.m[(kept_off[r] | t, kept_off[c] | t)])
                .sum()
        });
        Ok(DensityMatrix {
            n_qubits: kept.len(),
            m,
        })
    }
}
