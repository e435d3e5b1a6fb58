//! Expressibility of circuit templates: the KL divergence between the
//! pairwise-fidelity distribution of randomly parameterized states and the
//! Haar distribution `P(f) = (N−1)(1−f)^{N−2}`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::{build_two_body_ansatz_layers, Circuit, Gate};
use crate::error::{check_dim, Error, Result};
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::simulator::{overlap, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Template {
    Circuit1,
    Circuit2,
    Circuit3,
    Ours,
}

impl Template {
    pub const ALL: [Template; 4] = [Self::Circuit1, Self::Circuit2, Self::Circuit3, Self::Ours];

    pub fn name(self) -> &'static str {
        match self {
            Self::Circuit1 => "circuit1",
            Self::Circuit2 => "circuit2",
            Self::Circuit3 => "circuit3",
            Self::Ours => "ours",
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "template",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExprConfig {
    pub n_samples: usize,
    pub n_bins: usize,
    pub n_qubits: usize,
    pub template: Template,
    pub layers: usize,
    pub seed: u64,
}

impl Default for ExprConfig {
    fn default() -> Self {
        Self {
            n_samples: 5000,
            n_bins: 75,
            n_qubits: 4,
            template: Template::Circuit1,
            layers: 1,
            seed: 0,
        }
    }
}

impl ExprConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bins == 0 || self.n_samples < self.n_bins {
            return Err(Error::Config(format!(
                "need n_samples >= n_bins >= 1, got {} samples and {} bins",
                self.n_samples, self.n_bins
            )));
        }
        if !(1..=5).contains(&self.layers) {
            return Err(Error::Config(format!("layers must be in 1..=5, got {}", self.layers)));
        }
        if self.n_qubits < 2 {
            return Err(Error::Config("templates need at least 2 qubits".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExprResult {
    pub template: Template,
    pub layers: usize,
    pub histogram: Vec<usize>,
    pub kl: f64,
    pub n_samples: usize,
    pub n_bins: usize,
    pub seed: u64,
}

impl ExprResult {
    pub const CSV_HEADER: &'static str = "template,layers,kl,n_samples,n_bins,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.12e},{},{},{}",
            self.template, self.layers, self.kl, self.n_samples, self.n_bins, self.seed
        )
    }
}

struct Builder {
    c: Circuit,
    n: usize,
    slot: usize,
}

impl Builder {
    fn rot(&mut self, p: PauliString, scale: f64) -> Result<()> {
        self.c.push(Gate::Rot {
            pauli: p,
            slot: self.slot,
            scale,
        })
    }

    /// `R_P(θ) = e^{-iθP/2}` on a fresh slot.
    fn r(&mut self, q: usize, p: Pauli) -> Result<()> {
        self.rot(PauliString::single(self.n, q, p), 0.5)?;
        self.slot += 1;
        Ok(())
    }

    /// Controlled `R_X(θ) = e^{-iθX_t/4}·e^{iθZ_cX_t/4}` on a fresh slot.
    fn crx(&mut self, control: usize, target: usize) -> Result<()> {
        let x = PauliString::single(self.n, target, Pauli::X);
        let zx = PauliString::single(self.n, control, Pauli::Z).multiply(&x)?;
        self.rot(x, 0.25)?;
        self.rot(zx, -0.25)?;
        self.slot += 1;
        Ok(())
    }
}

fn param_count(id: Template, n: usize) -> usize {
    match id {
        Template::Circuit1 => 2 * n,
        Template::Circuit2 => n,
        Template::Circuit3 => 4 * n + n * (n - 1),
        Template::Ours => 3 * n * (n - 1) / 2,
    }
}

fn all_pairs(n: usize) -> Result<PauliSum> {
    let mut h = PauliSum::new(n);
    for i in 0..n {
        for j in i + 1..n {
            for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                let mut ps = vec![Pauli::I; n];
                ps[i] = p;
                ps[j] = p;
                h.add_term(1.0, PauliString::from_paulis(&ps))?;
            }
        }
    }
    Ok(h)
}

/// Template circuit with fresh parameter slots for every layer.
pub fn template_circuit(id: Template, n_qubits: usize, layers: usize) -> Result<Circuit> {
    if n_qubits < 2 {
        return Err(Error::Config("templates need at least 2 qubits".into()));
    }
    if id == Template::Ours {
        return build_two_body_ansatz_layers(&all_pairs(n_qubits)?, 1.0, layers);
    }
    let n = n_qubits;
    let mut b = Builder {
        c: Circuit::new(n, param_count(id, n) * layers)?,
        n,
        slot: 0,
    };
    for _ in 0..layers {
        match id {
            Template::Circuit1 => {
                for q in 0..n {
                    b.r(q, Pauli::X)?;
                    b.r(q, Pauli::Z)?;
                }
            }
            Template::Circuit2 => {
                for q in 0..n {
                    b.c.push(Gate::H(q))?;
                }
                for q in (0..n - 1).rev() {
                    b.c.push(Gate::Cz(q, q + 1))?;
                }
                for q in 0..n {
                    b.r(q, Pauli::X)?;
                }
            }
            Template::Circuit3 => {
                for q in 0..n {
                    b.r(q, Pauli::X)?;
                    b.r(q, Pauli::Z)?;
                }
                for control in (0..n).rev() {
                    for target in (0..n).rev().filter(|&t| t != control) {
                        b.crx(control, target)?;
                    }
                }
                for q in 0..n {
                    b.r(q, Pauli::X)?;
                    b.r(q, Pauli::Z)?;
                }
            }
            Template::Ours => unreachable!(),
        }
    }
    Ok(b.c)
}

fn prepare(c: &Circuit, params: &[f64]) -> Result<StateVector> {
    let mut psi = StateVector::zero(c.n_qubits())?;
    c.apply(&mut psi, params)?;
    Ok(psi)
}

/// `⟨ψ_θ|ψ_θ'⟩` read from an ancilla (qubit 0): H on the ancilla, `U_θ` on
/// the system, then `U_θ'·U_θ†` controlled on the ancilla; the real and
/// imaginary parts are `⟨σ_x⊗I⟩` and `⟨σ_y⊗I⟩`.
pub fn ancilla_overlap(
    u_theta: &Circuit,
    u_theta_prime: &Circuit,
    params: &[f64],
    params_prime: &[f64],
) -> Result<Complex64> {
    check_dim(u_theta.n_qubits(), u_theta_prime.n_qubits())?;
    let n = u_theta.n_qubits();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // After H and the unconditional U_θ, both ancilla branches hold U_θ|0⟩/√2.
    let base = prepare(u_theta, params)?;
    let mut branch1 = base.clone();
    u_theta.apply_inverse(&mut branch1, params)?;
    u_theta_prime.apply(&mut branch1, params_prime)?;
    let amps: Vec<Complex64> = base
        .amplitudes()
        .iter()
        .chain(branch1.amplitudes())
        .map(|a| a * s)
        .collect();
    let joint = StateVector::from_amplitudes(amps)?;
    let read = |p: Pauli| -> Result<f64> {
        let mut obs = PauliSum::new(n + 1);
        obs.add_term(1.0, PauliString::single(n + 1, 0, p))?;
        joint.expectation(&obs)
    };
    Ok(Complex64::new(read(Pauli::X)?, read(Pauli::Y)?))
}

/// `n_samples` fidelities `|⟨ψ_θ|ψ_θ'⟩|²`, parameters uniform on `[0, 2π)`.
/// Sample `k` draws from its own ChaCha stream, so results do not depend on
/// the thread count.
pub fn sample_fidelities(config: &ExprConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let c = template_circuit(config.template, config.n_qubits, config.layers)?;
    let m = c.n_params();
    (0..config.n_samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(k as u64);
            let mut draw = || -> Vec<f64> {
                (0..m).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect()
            };
            let (a, b) = (draw(), draw());
            Ok(overlap(&prepare(&c, &a)?, &prepare(&c, &b)?)?.norm_sqr())
        })
        .collect()
}

pub fn histogram(fidelities: &[f64], n_bins: usize) -> Vec<usize> {
    let mut h = vec![0; n_bins];
    for &f in fidelities {
        let i = ((f.clamp(0.0, 1.0) * n_bins as f64) as usize).min(n_bins - 1);
        h[i] += 1;
    }
    h
}

/// Haar probability mass of `[a, b)`.
pub fn haar_bin_mass(a: f64, b: f64, dim: usize) -> f64 {
    let e = dim as i32 - 1;
    (1.0 - a).powi(e) - (1.0 - b).powi(e)
}

/// `Σ p_i ln(p_i/q_i)` over bins with `p_i > 0`.
pub fn kl_vs_haar(fidelities: &[f64], n_bins: usize, dim: usize) -> Result<f64> {
    if fidelities.is_empty() {
        return Err(Error::Config("no fidelity samples".into()));
    }
    if dim < 2 || n_bins == 0 {
        return Err(Error::Config(format!("need dim >= 2 and bins >= 1, got {dim} and {n_bins}")));
    }
    let total = fidelities.len() as f64;
    let w = 1.0 / n_bins as f64;
    let kl = histogram(fidelities, n_bins)
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| {
            let p = c as f64 / total;
            let q = haar_bin_mass(i as f64 * w, ((i + 1) as f64 * w).min(1.0), dim);
            p * (p / q).ln()
        })
        .sum::<f64>();
    Ok(kl.max(0.0))
}

/// Inverse-CDF draws from the Haar fidelity distribution for dimension `dim`.
pub fn haar_samples(n: usize, dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    let inv = 1.0 / (dim as f64 - 1.0);
    (0..n).map(|_| 1.0 - (1.0 - rng.random::<f64>()).powf(inv)).collect()
}

pub fn run(config: &ExprConfig) -> Result<ExprResult> {
    let fids = sample_fidelities(config)?;
    Ok(ExprResult {
        template: config.template,
        layers: config.layers,
        histogram: histogram(&fids, config.n_bins),
        kl: kl_vs_haar(&fids, config.n_bins, 1 << config.n_qubits)?,
        n_samples: config.n_samples,
        n_bins: config.n_bins,
        seed: config.seed,
    })
}
