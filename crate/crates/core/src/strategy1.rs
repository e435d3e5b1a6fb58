//! Classical-simulation training: gradient ascent on the overlap between
//! `U(α)|σ⟩` and `e^{-iρt}|σ⟩` with an adjoint-state analytic gradient.
//!
//! When `σ` is the APQC Choi state the overlap is the process fidelity
//! `|Tr(V†U)/2^n|²`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuits::{build_apqc, build_two_body_ansatz_layers, Circuit, Gate};
use crate::error::{check_dim, Error, Result};
use crate::pauli::{PauliString, PauliSum};
use crate::simulator::{exact_unitary, overlap, StateVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Strategy1Config {
    pub eps_o: f64,
    pub delta1: f64,
    pub eta: f64,
    pub max_iters: usize,
    pub t: f64,
    pub seed: u64,
    pub max_restarts: usize,
    /// Iterations over which best-objective improvement is compared with `delta1`.
    pub window: usize,
}

impl Default for Strategy1Config {
    fn default() -> Self {
        Self {
            eps_o: 1e-2,
            delta1: 1e-6,
            eta: 0.02,
            max_iters: 300,
            t: 0.05,
            seed: 0,
            max_restarts: 5,
            window: 20,
        }
    }
}

impl Strategy1Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_o > 0.0 && self.delta1 > 0.0 && self.eta > 0.0) {
            return Err(Error::Config("eps_o, delta1 and eta must be positive".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainTrace {
    pub iterations: Vec<TraceRow>,
    pub final_params: Vec<f64>,
    pub converged: bool,
    pub restarts_used: usize,
}

impl TrainTrace {
    pub const CSV_HEADER: &'static str = "iter,objective,grad_norm";

    pub fn final_objective(&self) -> f64 {
        self.iterations.last().map_or(0.0, |r| r.objective)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.iterations {
            s += &format!("{},{:.15e},{:.15e}\n", r.iter, r.objective, r.grad_norm);
        }
        s
    }
}

/// Precomputed pieces of the strategy-1 objective for one target.
#[derive(Debug, Clone)]
pub struct Objective {
    ansatz: Circuit,
    sigma: StateVector,
    target: StateVector,
}

impl Objective {
    /// `sigma` lives either on the ansatz register or on a register twice as
    /// large whose leading half is the system (the APQC layout).
    pub fn new(ansatz: &Circuit, h: &PauliSum, t: f64, sigma: &StateVector) -> Result<Self> {
        let n = ansatz.n_qubits();
        check_dim(n, h.n_qubits())?;
        let total = sigma.n_qubits();
        if total != n && total != 2 * n {
            return Err(Error::Dimension {
                expected: n,
                got: total,
            });
        }
        let v = exact_unitary(h, t)?;
        let mut target = sigma.clone();
        let system: Vec<usize> = (0..n).collect();
        target.apply_unitary(&system, &v)?;
        Ok(Self {
            ansatz: ansatz.embedded(total, 0)?,
            sigma: sigma.clone(),
            target,
        })
    }

    /// Choi-state objective for `h` on its own register.
    pub fn apqc(ansatz: &Circuit, h: &PauliSum, t: f64) -> Result<Self> {
        let layout = build_apqc(h.n_qubits())?;
        Self::new(ansatz, h, t, &layout.choi_state()?)
    }

    pub fn n_params(&self) -> usize {
        self.ansatz.n_params()
    }

    fn amplitude(&self, params: &[f64]) -> Result<(Complex64, StateVector)> {
        let mut phi = self.sigma.clone();
        self.ansatz.apply(&mut phi, params)?;
        Ok((overlap(&self.target, &phi)?, phi))
    }

    pub fn value(&self, params: &[f64]) -> Result<f64> {
        Ok(self.amplitude(params)?.0.norm_sqr())
    }

    /// Objective and its exact gradient. Walking the gates backwards keeps
    /// `φ = ν_k` (forward-evolved `σ`) and `λ = μ_k` (target pulled back
    /// through the later gates), so `∂A/∂θ = ⟨μ_k|(−i·scale·P_k)|ν_k⟩`.
    pub fn value_and_gradient(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        if let Some(g) = self
            .ansatz
            .gates()
            .iter()
            .find(|g| matches!(g, Gate::H(_) | Gate::Cz(..)))
        {
            return Err(Error::UnsupportedAnsatz(format!(
                "analytic gradient needs Pauli rotations only, found {g:?}"
            )));
        }
        let (amp, mut phi) = self.amplitude(params)?;
        let mut lambda = self.target.clone();
        let mut d_amp = vec![Complex64::new(0.0, 0.0); params.len()];
        for gate in self.ansatz.gates().iter().rev() {
            let (pauli, angle): (&PauliString, f64) = match gate {
                Gate::Rot { pauli, slot, scale } => {
                    let p_phi = pauli.apply_to(phi.amplitudes());
                    let inner: Complex64 = lambda
                        .amplitudes()
                        .iter()
                        .zip(&p_phi)
                        .map(|(a, b)| a.conj() * b)
                        .sum();
                    d_amp[*slot] += Complex64::new(0.0, -scale) * inner;
                    (pauli, scale * params[*slot])
                }
                Gate::Fixed { pauli, angle } => (pauli, *angle),
                Gate::H(_) | Gate::Cz(..) => unreachable!("rejected above"),
            };
            phi.apply_pauli_rotation(pauli, -angle)?;
            lambda.apply_pauli_rotation(pauli, -angle)?;
        }
        let grad = d_amp.iter().map(|d| 2.0 * (amp.conj() * d).re).collect();
        Ok((amp.norm_sqr(), grad))
    }
}

/// `|⟨σ|e^{iρt}·U(params)|σ⟩|²`.
pub fn objective(
    ansatz: &Circuit,
    params: &[f64],
    target_h: &PauliSum,
    t: f64,
    sigma: &StateVector,
) -> Result<f64> {
    Objective::new(ansatz, target_h, t, sigma)?.value(params)
}

pub fn analytic_gradient(
    ansatz: &Circuit,
    params: &[f64],
    target_h: &PauliSum,
    t: f64,
    sigma: &StateVector,
) -> Result<Vec<f64>> {
    Ok(Objective::new(ansatz, target_h, t, sigma)?
        .value_and_gradient(params)?
        .1)
}

/// The ansatz used for training on `h`: its one- and two-body terms,
/// grouped into layers, at scale `t`.
pub fn default_ansatz(h: &PauliSum, t: f64, layers: usize) -> Result<Circuit> {
    build_two_body_ansatz_layers(&h.two_body_part(), t, layers)
}

/// Uniform `[0, 1)` parameters from stream `stream` of `seed`.
pub fn random_params(seed: u64, stream: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// Gradient ascent `α ← α + η∇f` until `f ≥ 1 − ε_o`.
///
/// A run that stalls (best `f` gains at most `δ₁` over `window` iterations)
/// restarts from fresh random parameters. A run that exhausts `max_iters`
/// is rerun from its current parameters. Both count against `max_restarts`.
pub fn run(
    config: &Strategy1Config,
    ansatz: &Circuit,
    target_h: &PauliSum,
    initial_params: Option<Vec<f64>>,
) -> Result<TrainTrace> {
    config.validate()?;
    let obj = Objective::apqc(ansatz, target_h, config.t)?;
    let m = obj.n_params();
    let mut params = match initial_params {
        Some(p) => {
            check_dim(m, p.len())?;
            p
        }
        None => random_params(config.seed, 0, m),
    };

    let mut rows = Vec::new();
    let mut restarts = 0;
    let mut run_iter = 0;
    let mut best: Vec<f64> = Vec::new();
    let mut converged = false;
    for iter in 0.. {
        let (f, grad) = obj.value_and_gradient(&params)?;
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        rows.push(TraceRow {
            iter,
            objective: f,
            grad_norm,
        });
        if f >= 1.0 - config.eps_o {
            converged = true;
            break;
        }
        best.push(best.last().map_or(f, |b: &f64| b.max(f)));
        let stalled = run_iter >= config.window
            && best[run_iter] - best[run_iter - config.window] <= config.delta1;
        if run_iter >= config.max_iters || stalled {
            if restarts == config.max_restarts {
                break;
            }
            restarts += 1;
            run_iter = 0;
            best.clear();
            if stalled {
                params = random_params(config.seed, restarts as u64, m);
            }
            continue;
        }
        for (p, g) in params.iter_mut().zip(&grad) {
            *p += config.eta * g;
        }
        run_iter += 1;
    }
    Ok(TrainTrace {
        iterations: rows,
        final_params: params,
        converged,
        restarts_used: restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::build_two_body_ansatz;
    use crate::simulator::process_fidelity;
    use proptest::prelude::*;

    fn bell() -> PauliSum {
        PauliSum::parse("0.25 II\n0.25 ZZ\n0.25 XX\n-0.25 YY").unwrap()
    }

    fn fd_gradient(obj: &Objective, p: &[f64], h: f64) -> Vec<f64> {
        (0..p.len())
            .map(|j| {
                let mut a = p.to_vec();
                let mut b = p.to_vec();
                a[j] += h;
                b[j] -= h;
                (obj.value(&a).unwrap() - obj.value(&b).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn exact_parameters_give_unit_objective() {
        let h = PauliSum::parse("0.3 ZZ\n-0.7 XX").unwrap();
        let c = build_two_body_ansatz(&h, 0.4).unwrap();
        let obj = Objective::apqc(&c, &h, 0.4).unwrap();
        // commuting terms: coefficients reproduce e^{-iht}
        assert!((obj.value(&[0.3, -0.7]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_time_is_perfect() {
        let c = build_two_body_ansatz(&bell(), 0.0).unwrap();
        let obj = Objective::apqc(&c, &bell(), 0.0).unwrap();
        assert!((obj.value(&[0.0; 3]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn commuting_one_qubit_peak_at_coefficient() {
        let h = PauliSum::parse("1 Z").unwrap();
        let c = build_two_body_ansatz(&h, 0.3).unwrap();
        let obj = Objective::apqc(&c, &h, 0.3).unwrap();
        // f(α) = cos²(0.3(α − 1)) for the Choi state
        for a in [-1.0, 0.0, 0.5, 1.0, 2.5] {
            let want = (0.3f64 * (a - 1.0)).cos().powi(2);
            assert!((obj.value(&[a]).unwrap() - want).abs() < 1e-12);
        }
        let grid: Vec<f64> = (0..=400).map(|k| k as f64 * 0.005).collect();
        let best = grid
            .iter()
            .copied()
            .max_by(|a, b| obj.value(&[*a]).unwrap().total_cmp(&obj.value(&[*b]).unwrap()))
            .unwrap();
        assert!((best - 1.0).abs() < 1e-12);
        let (_, g) = obj.value_and_gradient(&[1.0]).unwrap();
        assert!(g[0].abs() < 1e-8);
    }

    #[test]
    fn objective_is_process_fidelity_on_choi_state() {
        let h = PauliSum::parse("0.3 XZ\n-0.5 YI\n0.2 ZY").unwrap();
        let c = build_two_body_ansatz(&h, 0.7).unwrap();
        let p = [0.9, -0.1, 1.3];
        let f = Objective::apqc(&c, &h, 0.7).unwrap().value(&p).unwrap();
        let want = process_fidelity(&c.unitary(&p).unwrap(), &exact_unitary(&h, 0.7).unwrap());
        assert!((f - want).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let h = PauliSum::parse("0.3 XZ\n-0.5 YI\n0.2 ZY\n0.4 XX").unwrap();
        let c = build_two_body_ansatz(&h, 0.9).unwrap();
        let obj = Objective::apqc(&c, &h, 0.9).unwrap();
        let p = random_params(3, 0, c.n_params());
        let (_, g) = obj.value_and_gradient(&p).unwrap();
        let fd = fd_gradient(&obj, &p, 1e-5);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-3), "{a} vs {b}");
        }
    }

    #[test]
    fn gradient_vanishes_for_fully_commuting_slot() {
        // ZZ commutes with every other term and with the probe |00⟩
        let h = PauliSum::parse("0.5 ZZ\n0.3 XX\n0.2 YY").unwrap();
        let c = build_two_body_ansatz(&h, 0.5).unwrap();
        let sigma = StateVector::zero(2).unwrap();
        let g = analytic_gradient(&c, &[0.2, 0.9, -0.4], &h, 0.5, &sigma).unwrap();
        assert!(g[0].abs() < 1e-12, "{g:?}");
    }

    #[test]
    fn gradient_rejects_clifford_gates() {
        let mut c = Circuit::new(1, 0).unwrap();
        c.push(Gate::H(0)).unwrap();
        let h = PauliSum::parse("1 Z").unwrap();
        let sigma = StateVector::zero(1).unwrap();
        assert!(matches!(
            analytic_gradient(&c, &[], &h, 0.1, &sigma),
            Err(Error::UnsupportedAnsatz(_))
        ));
    }

    #[test]
    fn objective_checks_dimensions() {
        let c = build_two_body_ansatz(&bell(), 0.1).unwrap();
        let sigma = StateVector::zero(3).unwrap();
        assert!(objective(&c, &[0.0; 3], &bell(), 0.1, &sigma).is_err());
    }

    #[test]
    fn run_converges_at_iteration_zero_when_exact() {
        let h = bell();
        let c = build_two_body_ansatz(&h, 0.2).unwrap();
        let cfg = Strategy1Config {
            t: 0.2,
            ..Default::default()
        };
        let trace = run(&cfg, &c, &h, Some(vec![0.25, 0.25, -0.25])).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.iterations.len(), 1);
    }

    #[test]
    fn infinite_delta_never_triggers_reinit() {
        let h = PauliSum::parse("0.6 XZ\n-0.8 ZX\n0.5 YY").unwrap();
        let c = build_two_body_ansatz(&h, 1.0).unwrap();
        let cfg = Strategy1Config {
            t: 1.0,
            delta1: f64::INFINITY,
            eps_o: 1e-12,
            max_iters: 50,
            max_restarts: 0,
            ..Default::default()
        };
        let trace = run(&cfg, &c, &h, None).unwrap();
        assert_eq!(trace.restarts_used, 0);
        assert!(!trace.converged);
    }

    #[test]
    fn bell_short_time_converges() {
        let h = bell();
        let c = default_ansatz(&h, 0.05, 1).unwrap();
        let cfg = Strategy1Config {
            t: 0.05,
            seed: 7,
            ..Default::default()
        };
        let trace = run(&cfg, &c, &h, None).unwrap();
        assert!(trace.converged);
        assert!(trace.final_objective() >= 0.99);
        assert!(trace.final_objective() >= trace.iterations[0].objective);
    }

    #[test]
    fn csv_has_one_row_per_iteration() {
        let h = PauliSum::parse("1 Z").unwrap();
        let c = build_two_body_ansatz(&h, 1.0).unwrap();
        let cfg = Strategy1Config {
            t: 1.0,
            max_iters: 3,
            max_restarts: 0,
            eps_o: 1e-9,
            ..Default::default()
        };
        let trace = run(&cfg, &c, &h, Some(vec![0.0])).unwrap();
        let csv = trace.to_csv();
        assert_eq!(csv.lines().count(), trace.iterations.len() + 1);
        assert!(csv.starts_with(TrainTrace::CSV_HEADER));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn objective_never_exceeds_one(seed in any::<u64>(), t in 0.0f64..2.0) {
            let h = PauliSum::parse("0.3 XZ\n-0.5 YI\n0.2 ZY\n0.4 XX").unwrap();
            let c = build_two_body_ansatz(&h, t).unwrap();
            let p: Vec<f64> = random_params(seed, 0, 4).iter().map(|x| 4.0 * x - 2.0).collect();
            let f = Objective::apqc(&c, &h, t).unwrap().value(&p).unwrap();
            prop_assert!((0.0..=1.0 + 1e-9).contains(&f));
        }
    }
}
