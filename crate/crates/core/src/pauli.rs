//! Pauli strings in symplectic form and real-weighted Pauli sums.
//!
//! Qubit `q` is the `q`-th tensor factor from the left, which is bit `q` of
//! `x_mask`/`z_mask` and bit `n - 1 - q` of a basis-state index (qubit 0 is
//! the most significant bit). A string denotes `i^phase_exp ⊗_q P_q` with
//! `(x, z) = (1, 0) → X`, `(0, 1) → Z`, `(1, 1) → Y`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{CMatrix, C0};

pub const MAX_DENSE_QUBITS: usize = 12;
/// Coefficients below this magnitude are dropped when a sum is canonicalized.
pub const COEFF_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    x_mask: u64,
    z_mask: u64,
    phase_exp: u8,
}

/// Power of `i` picked up by the single-qubit product `P(x1,z1) · P(x2,z2)`.
fn product_phase(x1: bool, z1: bool, x2: bool, z2: bool) -> i32 {
    let (x2, z2) = (x2 as i32, z2 as i32);
    match (x1, z1) {
        (false, false) => 0,
        (true, true) => z2 - x2,
        (true, false) => z2 * (2 * x2 - 1),
        (false, true) => x2 * (1 - 2 * z2),
    }
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        Self::new(n_qubits, 0, 0, 0)
    }

    pub fn new(n_qubits: usize, x_mask: u64, z_mask: u64, phase_exp: u8) -> Self {
        assert!((1..=64).contains(&n_qubits), "n_qubits must be in 1..=64");
        let keep = if n_qubits == 64 { u64::MAX } else { (1u64 << n_qubits) - 1 };
        Self {
            n_qubits,
            x_mask: x_mask & keep,
            z_mask: z_mask & keep,
            phase_exp: phase_exp % 4,
        }
    }

    /// Single Pauli `p` on qubit `q`, identity elsewhere.
    pub fn single(n_qubits: usize, q: usize, p: Pauli) -> Self {
        assert!(q < n_qubits);
        let (x, z) = p.bits();
        Self::new(n_qubits, (x as u64) << q, (z as u64) << q, 0)
    }

    pub fn from_paulis(paulis: &[Pauli]) -> Self {
        let (mut x, mut z) = (0u64, 0u64);
        for (q, p) in paulis.iter().enumerate() {
            let (px, pz) = p.bits();
            x |= (px as u64) << q;
            z |= (pz as u64) << q;
        }
        Self::new(paulis.len(), x, z, 0)
    }

    /// Parses a word over `{I, X, Y, Z}`; character `q` acts on qubit `q`.
    pub fn from_word(word: &str) -> Option<Self> {
        if word.is_empty() || word.len() > 64 {
            return None;
        }
        let paulis: Option<Vec<_>> = word.chars().map(Pauli::from_char).collect();
        paulis.map(|p| Self::from_paulis(&p))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }
    pub fn x_mask(&self) -> u64 {
        self.x_mask
    }
    pub fn z_mask(&self) -> u64 {
        self.z_mask
    }
    pub fn phase_exp(&self) -> u8 {
        self.phase_exp
    }

    pub fn pauli_at(&self, q: usize) -> Pauli {
        Pauli::from_bits(self.x_mask >> q & 1 == 1, self.z_mask >> q & 1 == 1)
    }

    /// The word with the phase dropped.
    pub fn word(&self) -> String {
        (0..self.n_qubits).map(|q| self.pauli_at(q).as_char()).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.x_mask == 0 && self.z_mask == 0
    }

    pub fn weight(&self) -> usize {
        (self.x_mask | self.z_mask).count_ones() as usize
    }

    /// Qubits acted on non-trivially, ascending.
    pub fn support(&self) -> Vec<usize> {
        let m = self.x_mask | self.z_mask;
        (0..self.n_qubits).filter(|q| m >> q & 1 == 1).collect()
    }

    /// Same masks with the phase reset to zero.
    pub fn without_phase(&self) -> Self {
        Self { phase_exp: 0, ..*self }
    }

    pub fn phase(&self) -> Complex64 {
        match self.phase_exp {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    pub fn commutes_with(&self, other: &Self) -> bool {
        let s = (self.x_mask & other.z_mask) ^ (self.z_mask & other.x_mask);
        s.count_ones().is_multiple_of(2)
    }

    pub fn multiply(&self, other: &Self) -> Result<Self> {
        check_dim(self.n_qubits, other.n_qubits)?;
        let mut phase = self.phase_exp as i32 + other.phase_exp as i32;
        for q in 0..self.n_qubits {
            phase += product_phase(
                self.x_mask >> q & 1 == 1,
                self.z_mask >> q & 1 == 1,
                other.x_mask >> q & 1 == 1,
                other.z_mask >> q & 1 == 1,
            );
        }
        Ok(Self::new(
            self.n_qubits,
            self.x_mask ^ other.x_mask,
            self.z_mask ^ other.z_mask,
            phase.rem_euclid(4) as u8,
        ))
    }

    /// `[a, b]` as `(coefficient, phase-free string)`, or `None` when the
    /// strings commute. Anticommuting strings give `[a, b] = 2ab`.
    pub fn commutator(&self, other: &Self) -> Result<Option<(Complex64, Self)>> {
        check_dim(self.n_qubits, other.n_qubits)?;
        if self.commutes_with(other) {
            return Ok(None);
        }
        let prod = self.multiply(other)?;
        Ok(Some((prod.phase() * 2.0, prod.without_phase())))
    }

    /// Masks laid out in basis-index bit order (qubit 0 = most significant).
    pub(crate) fn index_masks(&self) -> (usize, usize) {
        let n = self.n_qubits;
        let mut xi = 0usize;
        let mut zi = 0usize;
        for q in 0..n {
            let bit = n - 1 - q;
            xi |= ((self.x_mask >> q & 1) as usize) << bit;
            zi |= ((self.z_mask >> q & 1) as usize) << bit;
        }
        (xi, zi)
    }

    /// Global factor in `P|b⟩ = factor · (-1)^{|z ∧ b|} |b ⊕ x⟩`, including
    /// the `i` carried by every Y factor.
    pub(crate) fn action_phase(&self) -> Complex64 {
        let ny = (self.x_mask & self.z_mask).count_ones() as u8;
        Self { phase_exp: (self.phase_exp + ny) % 4, ..*self }.phase()
    }

    /// `out = P · amps`.
    pub fn apply_to(&self, amps: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(amps.len(), 1usize << self.n_qubits);
        let (xi, zi) = self.index_masks();
        let f = self.action_phase();
        let mut out = vec![C0; amps.len()];
        for (b, a) in amps.iter().enumerate() {
            let sign = if (zi & b).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            out[b ^ xi] = a * f * sign;
        }
        out
    }

    pub fn to_dense(&self) -> Result<CMatrix> {
        if self.n_qubits > MAX_DENSE_QUBITS {
            return Err(Error::Capacity {
                what: "dense Pauli realization",
                requested: self.n_qubits,
                limit: MAX_DENSE_QUBITS,
            });
        }
        let dim = 1usize << self.n_qubits;
        let (xi, zi) = self.index_masks();
        let f = self.action_phase();
        let mut m = CMatrix::zeros(dim);
        for b in 0..dim {
            let sign = if (zi & b).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m[(b ^ xi, b)] = f * sign;
        }
        Ok(m)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = ["", "i", "-", "-i"][self.phase_exp as usize];
        write!(f, "{prefix}{}", self.word())
    }
}

/// Real-weighted sum of phase-free Pauli strings; always Hermitian.
///
/// Terms keep first-insertion order, which fixes the order of rotations in
/// product formulas and the slot order of ansatz circuits.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliSum {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: Vec::new(),
        }
    }

    pub fn from_terms(
        n_qubits: usize,
        terms: impl IntoIterator<Item = (f64, PauliString)>,
    ) -> Result<Self> {
        let mut s = Self::new(n_qubits);
        for (c, p) in terms {
            s.add_term(c, p)?;
        }
        Ok(s)
    }

    /// Adds `coeff · p`, merging with an existing equal string. The string's
    /// phase must be real (`±1`); `-P` is folded into the coefficient.
    pub fn add_term(&mut self, coeff: f64, p: PauliString) -> Result<()> {
        check_dim(self.n_qubits, p.n_qubits())?;
        let coeff = match p.phase_exp() {
            0 => coeff,
            2 => -coeff,
            _ => {
                return Err(Error::Config(format!(
                    "term {p} has an imaginary phase and would break hermiticity"
                )))
            }
        };
        let key = p.without_phase();
        if let Some(idx) = self.terms.iter().position(|(_, q)| *q == key) {
            self.terms[idx].0 += coeff;
            if self.terms[idx].0.abs() < COEFF_EPS {
                self.terms.remove(idx);
            }
        } else if coeff.abs() >= COEFF_EPS {
            self.terms.push((coeff, key));
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, p: &PauliString) -> Option<f64> {
        let key = p.without_phase();
        self.terms.iter().find(|(_, q)| *q == key).map(|(c, _)| *c)
    }

    pub fn max_weight(&self) -> usize {
        self.terms.iter().map(|(_, p)| p.weight()).max().unwrap_or(0)
    }

    /// True when every pair of terms commutes.
    pub fn is_commuting(&self) -> bool {
        self.terms.iter().enumerate().all(|(i, (_, a))| {
            self.terms[i + 1..].iter().all(|(_, b)| a.commutes_with(b))
        })
    }

    /// Terms of weight at most two.
    pub fn two_body_part(&self) -> PauliSum {
        PauliSum {
            n_qubits: self.n_qubits,
            terms: self
                .terms
                .iter()
                .filter(|(_, p)| p.weight() <= 2)
                .cloned()
                .collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> PauliSum {
        let mut out = PauliSum::new(self.n_qubits);
        for (c, p) in &self.terms {
            // cannot fail: same register, phase-free strings
            let _ = out.add_term(c * s, *p);
        }
        out
    }

    /// `out = H · amps`.
    pub fn apply_to(&self, amps: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![C0; amps.len()];
        for (c, p) in &self.terms {
            for (o, v) in out.iter_mut().zip(p.apply_to(amps)) {
                *o += v * *c;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Result<CMatrix> {
        if self.n_qubits > MAX_DENSE_QUBITS {
            return Err(Error::Capacity {
                what: "dense Pauli-sum realization",
                requested: self.n_qubits,
                limit: MAX_DENSE_QUBITS,
            });
        }
        let dim = 1usize << self.n_qubits;
        let mut m = CMatrix::zeros(dim);
        for (c, p) in &self.terms {
            let (xi, zi) = p.index_masks();
            let f = p.action_phase() * *c;
            for b in 0..dim {
                let sign = if (zi & b).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                m[(b ^ xi, b)] += f * sign;
            }
        }
        Ok(m)
    }

    /// Pauli decomposition `H = Σ_P Tr(P H)/d · P` of a dense Hermitian
    /// matrix. Enumerates all `4^n` strings, so `n` is capped at 8.
    pub fn from_dense(m: &CMatrix) -> Result<PauliSum> {
        let dim = m.dim();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::Config(format!(
                "matrix dimension {dim} is not a power of two >= 2"
            )));
        }
        let n = dim.trailing_zeros() as usize;
        if n > 8 {
            return Err(Error::Capacity {
                what: "Pauli decomposition",
                requested: n,
                limit: 8,
            });
        }
        let defect = m.hermitian_defect();
        if defect > 1e-9 {
            return Err(Error::NotHermitian(defect));
        }
        let mut sum = PauliSum::new(n);
        for x in 0..(1u64 << n) {
            for z in 0..(1u64 << n) {
                let p = PauliString::new(n, x, z, 0);
                let (xi, zi) = p.index_masks();
                let f = p.action_phase();
                // Tr(P M) = Σ_b P[b^x, b] · M[b, b^x]
                let mut tr = C0;
                for b in 0..dim {
                    let sign = if (zi & b).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    tr += f * sign * m[(b, b ^ xi)];
                }
                sum.add_term(tr.re / dim as f64, p)?;
            }
        }
        Ok(sum)
    }

    /// Parses lines of `coefficient WORD`. Blank lines and `#` comments are
    /// ignored; every word must have the same length.
    pub fn parse(text: &str) -> Result<PauliSum> {
        let mut sum: Option<PauliSum> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: idx + 1, msg };
            let mut toks = line.split_whitespace();
            let (Some(c), Some(w), None) = (toks.next(), toks.next(), toks.next()) else {
                return Err(err(format!("expected `coefficient WORD`, got `{line}`")));
            };
            let coeff: f64 = c
                .parse()
                .map_err(|_| err(format!("bad coefficient `{c}`")))?;
            if !coeff.is_finite() {
                return Err(err(format!("non-finite coefficient `{c}`")));
            }
            let p = PauliString::from_word(w)
                .ok_or_else(|| err(format!("malformed Pauli word `{w}`")))?;
            let s = sum.get_or_insert_with(|| PauliSum::new(p.n_qubits()));
            if s.n_qubits != p.n_qubits() {
                return Err(err(format!(
                    "word `{w}` has {} qubits, expected {}",
                    p.n_qubits(),
                    s.n_qubits
                )));
            }
            s.add_term(coeff, p).map_err(|e| err(e.to_string()))?;
        }
        sum.ok_or(Error::Parse {
            line: 0,
            msg: "no terms found".into(),
        })
    }

    /// Inverse of [`PauliSum::parse`]; coefficients round-trip exactly.
    pub fn to_text(&self) -> String {
        self.terms
            .iter()
            .map(|(c, p)| format!("{c} {}\n", p.word()))
            .collect()
    }
}
