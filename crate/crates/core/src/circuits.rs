//! Gate-list circuits with parameter slots, the ancilla-assisted (APQC)
//! encode/decode pair, and the layered two-body Pauli-rotation ansatz.
//!
//! Text format, one gate per line (`#` starts a comment):
//!
//! ```text
//! QUBITS 2
//! PARAMS 1
//! H 0
//! CZ 0 1
//! ROT XX 0 0.05
//! FIX ZZ 0.3
//! ```
//!
//! `ROT word slot scale` applies `e^{-i·scale·θ[slot]·P}`; `FIX word angle`
//! is a parameter-free rotation produced by [`Circuit::invert`] and
//! [`Circuit::bind`].

use std::fmt::Write as _;

use crate::error::{check_dim, Error, Result};
use crate::linalg::CMatrix;
use crate::pauli::{PauliString, PauliSum};
use crate::simulator::{StateVector, MAX_QUBITS};

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    H(usize),
    Cz(usize, usize),
    /// `e^{-i·scale·θ[slot]·P}`.
    Rot {
        pauli: PauliString,
        slot: usize,
        scale: f64,
    },
    /// `e^{-i·angle·P}`.
    Fixed { pauli: PauliString, angle: f64 },
}

impl Gate {
    fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::H(q) => vec![*q],
            Gate::Cz(a, b) => vec![*a, *b],
            Gate::Rot { pauli, .. } | Gate::Fixed { pauli, .. } => pauli.support(),
        }
    }

    fn inverse(&self, params: &[f64]) -> Gate {
        match self {
            Gate::H(_) | Gate::Cz(..) => self.clone(),
            Gate::Rot { pauli, slot, scale } => Gate::Fixed {
                pauli: *pauli,
                angle: -scale * params[*slot],
            },
            Gate::Fixed { pauli, angle } => Gate::Fixed {
                pauli: *pauli,
                angle: -angle,
            },
        }
    }

    fn bound(&self, params: &[f64]) -> Gate {
        match self {
            Gate::Rot { pauli, slot, scale } => Gate::Fixed {
                pauli: *pauli,
                angle: scale * params[*slot],
            },
            _ => self.clone(),
        }
    }

    pub(crate) fn apply(&self, state: &mut StateVector, params: &[f64]) -> Result<()> {
        match self {
            Gate::H(q) => state.apply_h(*q),
            Gate::Cz(a, b) => state.apply_cz(*a, *b),
            Gate::Rot { pauli, slot, scale } => {
                state.apply_pauli_rotation(pauli, scale * params[*slot])
            }
            Gate::Fixed { pauli, angle } => state.apply_pauli_rotation(pauli, *angle),
        }
    }

    /// Qubits shifted up by `offset` inside a register of `n_total` qubits.
    fn shifted(&self, offset: usize, n_total: usize) -> Gate {
        let lift = |p: &PauliString| {
            PauliString::new(n_total, p.x_mask() << offset, p.z_mask() << offset, p.phase_exp())
        };
        match self {
            Gate::H(q) => Gate::H(q + offset),
            Gate::Cz(a, b) => Gate::Cz(a + offset, b + offset),
            Gate::Rot { pauli, slot, scale } => Gate::Rot {
                pauli: lift(pauli),
                slot: *slot,
                scale: *scale,
            },
            Gate::Fixed { pauli, angle } => Gate::Fixed {
                pauli: lift(pauli),
                angle: *angle,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    n_params: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize, n_params: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Capacity {
                what: "circuit qubits",
                requested: n_qubits,
                limit: MAX_QUBITS,
            });
        }
        Ok(Self {
            n_qubits,
            n_params,
            gates: Vec::new(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        let qs = gate.qubits();
        for (i, &q) in qs.iter().enumerate() {
            if q >= self.n_qubits {
                return Err(Error::Qubit(format!(
                    "qubit {q} out of range for {} qubits",
                    self.n_qubits
                )));
            }
            if qs[..i].contains(&q) {
                return Err(Error::Qubit(format!("qubit {q} listed twice")));
            }
        }
        match &gate {
            Gate::Rot { pauli, slot, .. } => {
                check_dim(self.n_qubits, pauli.n_qubits())?;
                if *slot >= self.n_params {
                    return Err(Error::Config(format!(
                        "parameter slot {slot} out of range ({} slots)",
                        self.n_params
                    )));
                }
            }
            Gate::Fixed { pauli, .. } => check_dim(self.n_qubits, pauli.n_qubits())?,
            _ => {}
        }
        self.gates.push(gate);
        Ok(())
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        check_dim(self.n_params, params.len())
    }

    pub fn apply(&self, state: &mut StateVector, params: &[f64]) -> Result<()> {
        self.check_params(params)?;
        check_dim(self.n_qubits, state.n_qubits())?;
        for g in &self.gates {
            g.apply(state, params)?;
        }
        Ok(())
    }

    /// Applies `U(params)^{-1}` without materializing the inverse circuit.
    pub fn apply_inverse(&self, state: &mut StateVector, params: &[f64]) -> Result<()> {
        self.check_params(params)?;
        check_dim(self.n_qubits, state.n_qubits())?;
        for g in self.gates.iter().rev() {
            g.inverse(params).apply(state, &[])?;
        }
        Ok(())
    }

    /// Dense unitary, built column by column.
    pub fn unitary(&self, params: &[f64]) -> Result<CMatrix> {
        self.check_params(params)?;
        let dim = 1usize << self.n_qubits;
        let mut u = CMatrix::zeros(dim);
        for c in 0..dim {
            let mut psi = StateVector::basis(self.n_qubits, c)?;
            self.apply(&mut psi, params)?;
            for (r, a) in psi.amplitudes().iter().enumerate() {
                u[(r, c)] = *a;
            }
        }
        Ok(u)
    }

    /// Parameter-free circuit implementing `U(params)^{-1}`.
    pub fn invert(&self, params: &[f64]) -> Result<Circuit> {
        self.check_params(params)?;
        Ok(Circuit {
            n_qubits: self.n_qubits,
            n_params: 0,
            gates: self.gates.iter().rev().map(|g| g.inverse(params)).collect(),
        })
    }

    /// Parameter-free copy with every slot frozen at `params`.
    pub fn bind(&self, params: &[f64]) -> Result<Circuit> {
        self.check_params(params)?;
        Ok(Circuit {
            n_qubits: self.n_qubits,
            n_params: 0,
            gates: self.gates.iter().map(|g| g.bound(params)).collect(),
        })
    }

    /// Appends `other`'s gates. `other` may use at most this circuit's slots.
    pub fn extend(&mut self, other: &Circuit) -> Result<()> {
        check_dim(self.n_qubits, other.n_qubits)?;
        if other.n_params > self.n_params {
            return Err(Error::Config(format!(
                "appended circuit uses {} slots, host has {}",
                other.n_params, self.n_params
            )));
        }
        self.gates.extend(other.gates.iter().cloned());
        Ok(())
    }

    /// `k` back-to-back copies sharing the same slots.
    pub fn repeated(&self, k: usize) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            n_params: self.n_params,
            gates: (0..k).flat_map(|_| self.gates.iter().cloned()).collect(),
        }
    }

    /// Same circuit acting on qubits `offset..offset+n` of an `n_total` register.
    pub fn embedded(&self, n_total: usize, offset: usize) -> Result<Circuit> {
        if offset + self.n_qubits > n_total {
            return Err(Error::Qubit(format!(
                "cannot place {} qubits at offset {offset} in {n_total}",
                self.n_qubits
            )));
        }
        let mut out = Circuit::new(n_total, self.n_params)?;
        out.gates = self.gates.iter().map(|g| g.shifted(offset, n_total)).collect();
        Ok(out)
    }

    pub fn rotation_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, Gate::Rot { .. } | Gate::Fixed { .. }))
            .count()
    }

    /// ASAP depth: each gate starts after the last gate touching its qubits.
    pub fn depth(&self) -> usize {
        let mut busy = vec![0usize; self.n_qubits];
        for g in &self.gates {
            let qs = g.qubits();
            let level = qs.iter().map(|&q| busy[q]).max().unwrap_or(0) + 1;
            for q in qs {
                busy[q] = level;
            }
        }
        busy.into_iter().max().unwrap_or(0)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("QUBITS {}\nPARAMS {}\n", self.n_qubits, self.n_params);
        for g in &self.gates {
            let _ = match g {
                Gate::H(q) => writeln!(s, "H {q}"),
                Gate::Cz(a, b) => writeln!(s, "CZ {a} {b}"),
                Gate::Rot { pauli, slot, scale } => {
                    writeln!(s, "ROT {} {slot} {scale}", pauli.word())
                }
                Gate::Fixed { pauli, angle } => writeln!(s, "FIX {} {angle}", pauli.word()),
            };
        }
        s
    }

    pub fn parse(text: &str) -> Result<Circuit> {
        let mut header: [Option<usize>; 2] = [None, None];
        let mut circuit: Option<Circuit> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |msg: String| Error::Parse { line: line_no, msg };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            let int = |s: &str| s.parse::<usize>().map_err(|e| err(format!("{s:?}: {e}")));
            let real = |s: &str| s.parse::<f64>().map_err(|e| err(format!("{s:?}: {e}")));
            let word = |s: &str| {
                PauliString::from_word(s).ok_or_else(|| err(format!("bad Pauli word {s:?}")))
            };
            match (tok[0], tok.len()) {
                ("QUBITS", 2) if circuit.is_none() => header[0] = Some(int(tok[1])?),
                ("PARAMS", 2) if circuit.is_none() => header[1] = Some(int(tok[1])?),
                _ => {
                    if circuit.is_none() {
                        let n = header[0].ok_or_else(|| err("missing QUBITS header".into()))?;
                        circuit = Some(Circuit::new(n, header[1].unwrap_or(0))?);
                    }
                    let c = circuit.as_mut().expect("initialized above");
                    let gate = match (tok[0], tok.len()) {
                        ("H", 2) => Gate::H(int(tok[1])?),
                        ("CZ", 3) => Gate::Cz(int(tok[1])?, int(tok[2])?),
                        ("ROT", 4) => Gate::Rot {
                            pauli: word(tok[1])?,
                            slot: int(tok[2])?,
                            scale: real(tok[3])?,
                        },
                        ("FIX", 3) => Gate::Fixed {
                            pauli: word(tok[1])?,
                            angle: real(tok[2])?,
                        },
                        _ => return Err(err(format!("unrecognized line {line:?}"))),
                    };
                    c.push(gate).map_err(|e| err(e.to_string()))?;
                }
            }
        }
        match circuit {
            Some(c) => Ok(c),
            None => {
                let n = header[0].ok_or(Error::Parse {
                    line: 0,
                    msg: "missing QUBITS header".into(),
                })?;
                Circuit::new(n, header[1].unwrap_or(0))
            }
        }
    }
}

/// System register `0..n` and ancilla register `n..2n` with the Bell-pair
/// preparation and its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct ApqcLayout {
    pub n_system: usize,
    pub n_ancilla: usize,
    pub encode: Circuit,
    pub decode: Circuit,
}

pub const MAX_APQC_SYSTEM: usize = 6;

pub fn build_apqc(n_system: usize) -> Result<ApqcLayout> {
    if n_system == 0 || n_system > MAX_APQC_SYSTEM {
        return Err(Error::Capacity {
            what: "APQC system qubits",
            requested: n_system,
            limit: MAX_APQC_SYSTEM,
        });
    }
    let n = n_system;
    let mut encode = Circuit::new(2 * n, 0)?;
    for q in 0..2 * n {
        encode.push(Gate::H(q))?;
    }
    for q in 0..n {
        encode.push(Gate::Cz(q, n + q))?;
    }
    for q in n..2 * n {
        encode.push(Gate::H(q))?;
    }
    let decode = encode.invert(&[])?;
    Ok(ApqcLayout {
        n_system: n,
        n_ancilla: n,
        encode,
        decode,
    })
}

impl ApqcLayout {
    pub fn n_total(&self) -> usize {
        self.n_system + self.n_ancilla
    }

    /// `U_E|0…0⟩ = 2^{-n/2} Σ_i |i⟩_S |i⟩_A`.
    pub fn choi_state(&self) -> Result<StateVector> {
        let mut psi = StateVector::zero(self.n_total())?;
        self.encode.apply(&mut psi, &[])?;
        Ok(psi)
    }

    /// Lifts a system-register circuit onto the full register.
    pub fn on_system(&self, c: &Circuit) -> Result<Circuit> {
        check_dim(self.n_system, c.n_qubits())?;
        c.embedded(self.n_total(), 0)
    }
}

/// Partitions all pairs `(i, j)`, `i < j < n`, into `n` groups in which no
/// qubit appears twice. Uses per-group occupancy labels as in the usual
/// first-fit scheme, but probes groups cyclically starting at the
/// round-robin slot of each pair, which makes every first probe succeed.
pub fn group_pauli_pairs(n: usize) -> Vec<Vec<(usize, usize)>> {
    if n < 2 {
        return vec![Vec::new(); n];
    }
    // odd number of rounds; for even n the last qubit takes the idle slot
    let rounds = if n % 2 == 1 { n } else { n - 1 };
    let mut free = vec![vec![true; n]; n];
    let mut groups = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            let start = if n.is_multiple_of(2) && j == n - 1 {
                (2 * i) % rounds
            } else {
                (i + j) % rounds
            };
            let slot = (0..n)
                .map(|k| (start + k) % n)
                .find(|&m| free[m][i] && free[m][j]);
            match slot {
                Some(m) => {
                    free[m][i] = false;
                    free[m][j] = false;
                    groups[m].push((i, j));
                }
                None => groups.push(vec![(i, j)]),
            }
        }
    }
    groups
}

/// [`build_two_body_ansatz_layers`] with a single layer.
pub fn build_two_body_ansatz(h: &PauliSum, t: f64) -> Result<Circuit> {
    build_two_body_ansatz_layers(h, t, 1)
}

/// One rotation `e^{-i·t·θ_k·P_k}` per non-identity term of `h`. Two-body
/// terms are ordered by the pair groups of [`group_pauli_pairs`]; each
/// one-body term follows the first group touching its qubit. The block is
/// repeated `layers` times with fresh slots, so slot `r·m + k` is the `k`-th
/// non-identity term in replica `r`.
pub fn build_two_body_ansatz_layers(h: &PauliSum, t: f64, layers: usize) -> Result<Circuit> {
    if layers == 0 {
        return Err(Error::Config("ansatz needs at least one layer".into()));
    }
    let n = h.n_qubits();
    let terms: Vec<PauliString> = h
        .terms()
        .iter()
        .map(|(_, p)| *p)
        .filter(|p| !p.is_identity())
        .collect();
    if let Some(p) = terms.iter().find(|p| p.weight() > 2) {
        return Err(Error::UnsupportedAnsatz(format!(
            "term {p} has weight {}; only one- and two-body terms are supported",
            p.weight()
        )));
    }
    let m = terms.len();
    let mut order: Vec<usize> = Vec::with_capacity(m);
    let mut placed = vec![false; m];
    for group in group_pauli_pairs(n) {
        let mut touched = vec![false; n];
        for &(i, j) in &group {
            for (k, p) in terms.iter().enumerate() {
                if p.weight() == 2 && p.support() == [i, j] {
                    order.push(k);
                    placed[k] = true;
                    touched[i] = true;
                    touched[j] = true;
                }
            }
        }
        for (k, p) in terms.iter().enumerate() {
            if !placed[k] && p.weight() == 1 && touched[p.support()[0]] {
                order.push(k);
                placed[k] = true;
            }
        }
    }
    order.extend((0..m).filter(|&k| !placed[k]));

    let mut c = Circuit::new(n, m * layers)?;
    for r in 0..layers {
        for &k in &order {
            c.push(Gate::Rot {
                pauli: terms[k],
                slot: r * m + k,
                scale: t,
            })?;
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{C0, C1};
    use crate::simulator::{exact_unitary, overlap, DensityMatrix};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_circuit(n: usize, gates: usize, rng: &mut impl Rng) -> (Circuit, Vec<f64>) {
        let n_params = 3;
        let mut c = Circuit::new(n, n_params).unwrap();
        let m = 1u64 << n;
        for _ in 0..gates {
            let g = match rng.random_range(0..3) {
                0 => Gate::H(rng.random_range(0..n)),
                1 if n > 1 => {
                    let a = rng.random_range(0..n);
                    Gate::Cz(a, (a + 1 + rng.random_range(0..n - 1)) % n)
                }
                _ => Gate::Rot {
                    pauli: PauliString::new(n, rng.random_range(0..m), rng.random_range(0..m), 0),
                    slot: rng.random_range(0..n_params),
                    scale: rng.random_range(-1.0..1.0),
                },
            };
            c.push(g).unwrap();
        }
        let params = (0..n_params).map(|_| rng.random_range(0.0..3.0)).collect();
        (c, params)
    }

    fn close(a: &StateVector, b: &StateVector, tol: f64) -> bool {
        a.amplitudes()
            .iter()
            .zip(b.amplitudes())
            .all(|(x, y)| (x - y).norm() < tol)
    }

    #[test]
    fn apqc_one_pair_is_bell() {
        let layout = build_apqc(1).unwrap();
        let psi = layout.choi_state().unwrap();
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let want = [s, C0, C0, s];
        assert!(psi.amplitudes().iter().zip(want).all(|(a, b)| (a - b).norm() < 1e-15));
    }

    #[test]
    fn apqc_two_pairs_match_maximally_entangled_state() {
        let layout = build_apqc(2).unwrap();
        let psi = layout.choi_state().unwrap();
        let mut amps = vec![C0; 16];
        for i in 0..4 {
            amps[(i << 2) | i] = Complex64::new(0.5, 0.0);
        }
        let want = StateVector::from_amplitudes(amps).unwrap();
        assert!((overlap(&want, &psi).unwrap().norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn apqc_decode_undoes_encode() {
        for n in 1..=MAX_APQC_SYSTEM {
            let layout = build_apqc(n).unwrap();
            let mut psi = layout.choi_state().unwrap();
            layout.decode.apply(&mut psi, &[]).unwrap();
            assert!((psi.amplitudes()[0] - C1).norm() < 1e-10);
        }
        assert!(build_apqc(0).is_err());
        assert!(build_apqc(7).is_err());
    }

    #[test]
    fn apqc_system_marginal_is_maximally_mixed() {
        for n in 1..=3 {
            let layout = build_apqc(n).unwrap();
            let rho = layout.choi_state().unwrap().to_density();
            let sys: Vec<usize> = (0..n).collect();
            let red = rho.partial_trace(&sys).unwrap();
            let mixed = DensityMatrix::maximally_mixed(n).unwrap();
            assert!(red.matrix().max_abs_diff(mixed.matrix()) < 1e-10);
        }
    }

    #[test]
    fn choi_overlap_equals_normalized_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=3 {
            let layout = build_apqc(n).unwrap();
            let (u, pu) = random_circuit(n, 8, &mut rng);
            let (v, pv) = random_circuit(n, 8, &mut rng);
            let mut psi = layout.choi_state().unwrap();
            layout.on_system(&u).unwrap().apply(&mut psi, &pu).unwrap();
            layout.on_system(&v).unwrap().apply_inverse(&mut psi, &pv).unwrap();
            let amp = overlap(&layout.choi_state().unwrap(), &psi).unwrap();
            let um = u.unitary(&pu).unwrap();
            let vm = v.unitary(&pv).unwrap();
            let tr = vm.dagger().matmul(&um).trace() / (1 << n) as f64;
            assert!((amp - tr).norm() < 1e-10, "n = {n}");
        }
    }

    fn check_partition(n: usize) {
        let groups = group_pauli_pairs(n);
        assert!(groups.len() <= n, "n = {n}: {} groups", groups.len());
        let mut seen = vec![vec![0; n]; n];
        for g in &groups {
            let mut used = vec![false; n];
            for &(i, j) in g {
                assert!(i < j && j < n);
                assert!(!used[i] && !used[j], "n = {n}: qubit reused in {g:?}");
                used[i] = true;
                used[j] = true;
                seen[i][j] += 1;
            }
        }
        for (i, row) in seen.iter().enumerate() {
            for (j, &count) in row.iter().enumerate().skip(i + 1) {
                assert_eq!(count, 1, "n = {n}: pair ({i}, {j})");
            }
        }
    }

    #[test]
    fn grouping_partitions_pairs() {
        for n in 2..=12 {
            check_partition(n);
        }
    }

    #[test]
    fn grouping_small_cases() {
        let g2 = group_pauli_pairs(2);
        assert_eq!(g2.iter().filter(|g| !g.is_empty()).count(), 1);
        assert_eq!(g2[0], vec![(0, 1)]);
        let g3 = group_pauli_pairs(3);
        assert_eq!(g3.len(), 3);
        assert!(g3.iter().all(|g| g.len() == 1));
        let g5 = group_pauli_pairs(5);
        assert_eq!(g5.len(), 5);
        assert!(g5.iter().all(|g| g.len() == 2));
    }

    #[test]
    fn two_body_ansatz_counts_terms() {
        let mut text = String::new();
        for q in 0..4 {
            let mut w = ['I'; 4];
            w[q] = 'Z';
            text += &format!("0.{} {}\n", q + 1, w.iter().collect::<String>());
        }
        for i in 0..4 {
            for j in i + 1..4 {
                let mut w = ['I'; 4];
                w[i] = 'Z';
                w[j] = 'Z';
                text += &format!("1.{i}{j} {}\n", w.iter().collect::<String>());
            }
        }
        let h = PauliSum::parse(&text).unwrap();
        let c = build_two_body_ansatz(&h, 0.1).unwrap();
        assert_eq!(c.n_params(), 10);
        assert_eq!(c.rotation_count(), 10);
        let c3 = build_two_body_ansatz_layers(&h, 0.1, 3).unwrap();
        assert_eq!(c3.n_params(), 30);
    }

    #[test]
    fn two_body_ansatz_single_term_matches_exponential() {
        let h = PauliSum::parse("1 ZZ").unwrap();
        let c = build_two_body_ansatz(&h, 0.4).unwrap();
        let beta = 0.7;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let psi = StateVector::random(2, &mut rng).unwrap();
        let mut got = psi.clone();
        c.apply(&mut got, &[beta]).unwrap();
        let want = exact_unitary(&h.scaled(beta), 0.4).unwrap().mul_vec(psi.amplitudes());
        let want = StateVector::from_amplitudes(want).unwrap();
        assert!(close(&got, &want, 1e-10));
    }

    #[test]
    fn two_body_ansatz_at_zero_time_is_identity() {
        let h = PauliSum::parse("0.3 XX\n0.2 ZI\n-0.5 YZ").unwrap();
        let c = build_two_body_ansatz(&h, 0.0).unwrap();
        let u = c.unitary(&[1.0, 2.0, 3.0]).unwrap();
        assert!(u.max_abs_diff(&CMatrix::identity(4)) < 1e-15);
    }

    #[test]
    fn two_body_ansatz_rejects_three_body_terms() {
        let h = PauliSum::parse("1 XXX").unwrap();
        assert!(matches!(
            build_two_body_ansatz(&h, 1.0),
            Err(Error::UnsupportedAnsatz(_))
        ));
    }

    #[test]
    fn two_body_ansatz_skips_identity() {
        let h = PauliSum::parse("0.25 II\n0.25 ZZ\n0.25 XX\n-0.25 YY").unwrap();
        assert_eq!(build_two_body_ansatz(&h, 1.0).unwrap().n_params(), 3);
    }

    #[test]
    fn invert_undoes_circuit() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (c, p) = random_circuit(3, 12, &mut rng);
        let inv = c.invert(&p).unwrap();
        assert_eq!(inv.n_params(), 0);
        let psi = StateVector::random(3, &mut rng).unwrap();
        let mut out = psi.clone();
        c.apply(&mut out, &p).unwrap();
        inv.apply(&mut out, &[]).unwrap();
        assert!(close(&out, &psi, 1e-10));

        let twice = inv.invert(&[]).unwrap();
        let (mut a, mut b) = (psi.clone(), psi.clone());
        twice.apply(&mut a, &[]).unwrap();
        c.bind(&p).unwrap().apply(&mut b, &[]).unwrap();
        assert!(close(&a, &b, 1e-12));
    }

    #[test]
    fn invert_checks_parameter_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let (c, _) = random_circuit(2, 4, &mut rng);
        assert!(c.invert(&[0.1]).is_err());
        let empty = Circuit::new(2, 0).unwrap();
        assert!(empty.invert(&[]).unwrap().is_empty());
    }

    #[test]
    fn push_validates_gates() {
        let mut c = Circuit::new(2, 1).unwrap();
        assert!(c.push(Gate::H(2)).is_err());
        assert!(c.push(Gate::Cz(0, 0)).is_err());
        let p = PauliString::from_word("XZ").unwrap();
        assert!(c.push(Gate::Rot { pauli: p, slot: 1, scale: 1.0 }).is_err());
        assert!(c.push(Gate::Rot { pauli: p, slot: 0, scale: 1.0 }).is_ok());
    }

    #[test]
    fn text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let (c, p) = random_circuit(3, 10, &mut rng);
        assert_eq!(Circuit::parse(&c.to_text()).unwrap(), c);
        let inv = c.invert(&p).unwrap();
        assert_eq!(Circuit::parse(&inv.to_text()).unwrap(), inv);
        assert!(Circuit::parse("H 0").is_err());
        assert!(Circuit::parse("QUBITS 2\nROT XQ 0 1").is_err());
        assert!(Circuit::parse("QUBITS 2\nPARAMS 1\nROT XZ 1 1").is_err());
    }

    #[test]
    fn embedding_shifts_qubits() {
        let mut c = Circuit::new(1, 0).unwrap();
        c.push(Gate::Fixed {
            pauli: PauliString::from_word("X").unwrap(),
            angle: std::f64::consts::FRAC_PI_2,
        })
        .unwrap();
        let e = c.embedded(3, 2).unwrap();
        let mut psi = StateVector::zero(3).unwrap();
        e.apply(&mut psi, &[]).unwrap();
        assert!((psi.amplitudes()[1].norm() - 1.0).abs() < 1e-15);
        assert!(c.embedded(3, 3).is_err());
    }

    #[test]
    fn depth_counts_parallel_layers() {
        let mut c = Circuit::new(4, 0).unwrap();
        for g in [Gate::Cz(0, 1), Gate::Cz(2, 3), Gate::Cz(1, 2), Gate::H(0)] {
            c.push(g).unwrap();
        }
        assert_eq!(c.depth(), 2);
    }

    proptest! {
        #[test]
        fn circuits_preserve_norm(seed in any::<u64>(), n in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (c, p) = random_circuit(n, 10, &mut rng);
            let mut psi = StateVector::random(n, &mut rng).unwrap();
            c.apply(&mut psi, &p).unwrap();
            prop_assert!((psi.norm_sqr() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn grouping_is_a_partition(n in 2usize..=8) {
            check_partition(n);
        }
    }
}
