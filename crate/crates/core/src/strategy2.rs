//! Hybrid training by repeated compression: seed a circuit for a short time
//! step from the first-order product formula, then train `U_{i+1}(β)` to
//! equal `U_i^{n_c}` on the APQC register until the full time is reached.
//!
//! Stage circuits are parameterized directly by rotation angles
//! (`e^{-iβ_k P_k}`, scale 1), so warm starts are `n_c·β` and the finite
//! difference step acts on angles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::{build_apqc, ApqcLayout, Circuit, Gate};
use crate::error::{check_dim, Error, Result};
use crate::linalg::C0;
use crate::pauli::PauliSum;
use crate::simulator::{exact_unitary, overlap, process_fidelity, StateVector};
use crate::strategy1::{default_ansatz, TraceRow, TrainTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Strategy2Config {
    pub eps_o: f64,
    pub delta2: f64,
    pub eta: f64,
    pub max_iters_per_stage: usize,
    pub n_c: usize,
    pub dt_ratio: f64,
    pub fd_step: f64,
    pub seed: u64,
    pub max_restarts: usize,
    pub window: usize,
    /// Half-width of the uniform perturbation applied on re-initialization.
    pub reinit_noise: f64,
    pub layers: usize,
}

impl Default for Strategy2Config {
    fn default() -> Self {
        Self {
            eps_o: 1e-6,
            delta2: 1e-6,
            eta: 0.02,
            max_iters_per_stage: 350,
            n_c: 2,
            dt_ratio: 1.0 / 1024.0,
            fd_step: 0.01,
            seed: 0,
            max_restarts: 5,
            window: 20,
            reinit_noise: 0.05,
            layers: 1,
        }
    }
}

impl Strategy2Config {
    /// Number of compression stages `s` with `n_c^s · dt_ratio = 1`.
    pub fn n_stages(&self) -> Result<usize> {
        if self.n_c < 2 {
            return Err(Error::Config(format!("n_c must be >= 2, got {}", self.n_c)));
        }
        if !(self.dt_ratio > 0.0 && self.dt_ratio <= 1.0) {
            return Err(Error::Config(format!("dt_ratio {} not in (0, 1]", self.dt_ratio)));
        }
        let s = (-self.dt_ratio.ln() / (self.n_c as f64).ln()).round() as usize;
        let back = (self.n_c as f64).powi(s as i32) * self.dt_ratio;
        if (back - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "dt_ratio {} is not a power of 1/{}",
                self.dt_ratio, self.n_c
            )));
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.n_stages()?;
        if !(self.eps_o > 0.0 && self.delta2 > 0.0 && self.eta > 0.0 && self.fd_step > 0.0) {
            return Err(Error::Config("eps_o, delta2, eta and fd_step must be positive".into()));
        }
        if self.window == 0 || self.layers == 0 {
            return Err(Error::Config("window and layers must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: usize,
    pub params: Vec<f64>,
    pub objective: f64,
    pub trace: TrainTrace,
}

/// Angles that make `ansatz` the first-order product formula for time `dt`:
/// `β_k = c_k·dt / (scale_k·r_k)` where `c_k` is the coefficient of the
/// slot's Pauli string in `h` and `r_k` the number of replicas of that string.
pub fn seed_small_dt(h: &PauliSum, dt: f64, ansatz: &Circuit) -> Result<Vec<f64>> {
    check_dim(h.n_qubits(), ansatz.n_qubits())?;
    let mut slot_gate: Vec<Option<(crate::pauli::PauliString, f64)>> = vec![None; ansatz.n_params()];
    for g in ansatz.gates() {
        if let Gate::Rot { pauli, slot, scale } = g {
            match slot_gate[*slot] {
                None => slot_gate[*slot] = Some((*pauli, *scale)),
                Some((p, s)) if p == *pauli && s == *scale => {}
                Some(_) => {
                    return Err(Error::UnsupportedAnsatz(format!(
                        "slot {slot} drives more than one distinct rotation"
                    )))
                }
            }
        }
    }
    slot_gate
        .iter()
        .enumerate()
        .map(|(slot, entry)| {
            let (p, scale) = entry.ok_or_else(|| {
                Error::UnsupportedAnsatz(format!("slot {slot} drives no rotation"))
            })?;
            let c = h.coefficient(&p).ok_or_else(|| {
                Error::UnsupportedAnsatz(format!("ansatz term {p} is not present in the operator"))
            })?;
            let replicas = slot_gate.iter().filter(|e| matches!(e, Some((q, _)) if *q == p)).count();
            Ok(c * dt / (scale * replicas as f64))
        })
        .collect()
}

/// Full APQC simulation `U_D · (prev^{-n_c} · candidate(params) ⊗ I) · U_E |0⟩`
/// followed by the return probability to `|0…0⟩`.
pub fn compression_objective(
    layout: &ApqcLayout,
    candidate: &Circuit,
    params: &[f64],
    frozen_prev: &Circuit,
    n_c: usize,
) -> Result<f64> {
    check_dim(layout.n_system, candidate.n_qubits())?;
    check_dim(layout.n_system, frozen_prev.n_qubits())?;
    let mut psi = StateVector::zero(layout.n_total())?;
    layout.encode.apply(&mut psi, &[])?;
    layout.on_system(candidate)?.apply(&mut psi, params)?;
    let inv = layout.on_system(&frozen_prev.invert(&vec![0.0; frozen_prev.n_params()])?)?;
    for _ in 0..n_c {
        inv.apply(&mut psi, &[])?;
    }
    layout.decode.apply(&mut psi, &[])?;
    Ok(psi.amplitudes()[0].norm_sqr())
}

/// Recovers the angles of `ansatz` from a copy bound to them, as written to
/// stage files.
pub fn params_from_bound(ansatz: &Circuit, bound: &Circuit) -> Result<Vec<f64>> {
    check_dim(ansatz.n_qubits(), bound.n_qubits())?;
    check_dim(ansatz.len(), bound.len())?;
    let mut params = vec![f64::NAN; ansatz.n_params()];
    for (g, b) in ansatz.gates().iter().zip(bound.gates()) {
        match (g, b) {
            (Gate::Rot { pauli, slot, scale }, Gate::Fixed { pauli: q, angle }) if pauli == q => {
                params[*slot] = angle / scale;
            }
            (g, b) if g == b => {}
            _ => {
                return Err(Error::UnsupportedAnsatz(
                    "stage circuit does not match the ansatz gate for gate".into(),
                ))
            }
        }
    }
    if params.iter().any(|p| p.is_nan()) {
        return Err(Error::UnsupportedAnsatz("stage circuit leaves a slot unset".into()));
    }
    Ok(params)
}

/// Compression objective with `prev^{n_c}|Φ⟩` precomputed; equal to
/// [`compression_objective`] but cheaper per evaluation.
#[derive(Debug, Clone)]
pub struct Compression {
    candidate: Circuit,
    choi: StateVector,
    target: StateVector,
}

impl Compression {
    pub fn new(layout: &ApqcLayout, candidate: &Circuit, frozen_prev: &Circuit, n_c: usize) -> Result<Self> {
        check_dim(layout.n_system, candidate.n_qubits())?;
        let choi = layout.choi_state()?;
        let prev = layout.on_system(frozen_prev)?;
        let mut target = choi.clone();
        for _ in 0..n_c {
            prev.apply(&mut target, &vec![0.0; prev.n_params()])?;
        }
        Ok(Self {
            candidate: layout.on_system(candidate)?,
            choi,
            target,
        })
    }

    pub fn value(&self, params: &[f64]) -> Result<f64> {
        let mut psi = self.choi.clone();
        self.candidate.apply(&mut psi, params)?;
        Ok(overlap(&self.target, &psi)?.norm_sqr())
    }
}

/// Symmetric difference quotient, one component per parameter; the `2m`
/// evaluations run in parallel.
pub fn fd_gradient<F>(f: F, params: &[f64], fd_step: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    (0..params.len())
        .into_par_iter()
        .map(|j| {
            let mut plus = params.to_vec();
            let mut minus = params.to_vec();
            plus[j] += fd_step;
            minus[j] -= fd_step;
            (f(&plus) - f(&minus)) / (2.0 * fd_step)
        })
        .collect()
}

/// A-priori deviation `(t²/ε_t)·ε_o + ε_t` with unit constants.
pub fn error_budget(eps_o: f64, eps_t: f64, t: f64) -> f64 {
    t * t / eps_t * eps_o + eps_t
}

/// Second-order estimate of `1 − |⟨ψ|e^{iρ·dt} Π_i e^{-iβ_iρ_i·dt}|ψ⟩|²`,
/// the product applying term 0 first, with `H = −i·dt·h` and
/// `M_i = −i·dt·β_i·ρ_i`:
///
/// `(⟨H⟩−⟨ΣM⟩)² − 2Re[⟨H²⟩/2 − ⟨HΣM⟩ + Σ⟨M_i²⟩/2 + Σ_{i>j}⟨M_iM_j⟩]`.
///
/// `betas` is aligned with `h.terms()`.
pub fn residual_second_order(h: &PauliSum, betas: &[f64], dt: f64, probe: &StateVector) -> Result<f64> {
    check_dim(h.len(), betas.len())?;
    check_dim(h.n_qubits(), probe.n_qubits())?;
    let psi = probe.amplitudes();
    let inner = |a: &[num_complex::Complex64], b: &[num_complex::Complex64]| {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<num_complex::Complex64>()
    };
    // v_i = ρ_i|ψ⟩; all operators below are built from these
    let v: Vec<Vec<_>> = h.terms().iter().map(|(_, p)| p.apply_to(psi)).collect();
    let mi = num_complex::Complex64::new(0.0, -dt);
    let mut hpsi = vec![C0; psi.len()];
    let mut mpsi = vec![C0; psi.len()];
    for ((c, _), (vi, b)) in h.terms().iter().zip(v.iter().zip(betas)) {
        for k in 0..psi.len() {
            hpsi[k] += vi[k] * (mi * c);
            mpsi[k] += vi[k] * (mi * b);
        }
    }
    let e_h = inner(psi, &hpsi);
    let e_m = inner(psi, &mpsi);
    // anti-Hermitian A: ⟨A B⟩ = ⟨A†ψ|Bψ⟩ = −⟨Aψ|Bψ⟩
    let e_hh = -inner(&hpsi, &hpsi);
    let e_hm = -inner(&hpsi, &mpsi);
    let mut e_mm_diag = C0;
    let mut e_mm_cross = C0;
    for (i, (vi, bi)) in v.iter().zip(betas).enumerate() {
        e_mm_diag += mi * mi * bi * bi * inner(vi, vi);
        for (vj, bj) in v.iter().zip(betas).take(i) {
            // ⟨M_i M_j⟩ = (−i·dt)² β_i β_j ⟨ρ_iψ|ρ_jψ⟩
            e_mm_cross += mi * mi * bi * bj * inner(vi, vj);
        }
    }
    let a = e_h - e_m;
    let second = e_hh / 2.0 - e_hm + e_mm_diag / 2.0 + e_mm_cross;
    Ok((a * a).re - 2.0 * second.re)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Strategy2Outcome {
    /// Angle-parameterized circuit shared by every stage.
    #[serde(skip)]
    pub ansatz: Circuit,
    pub seed_params: Vec<f64>,
    /// Process fidelity of the seed against `e^{-iρ·dt}`.
    pub seed_fidelity: f64,
    pub stages: Vec<StageRecord>,
    pub final_params: Vec<f64>,
    /// Process fidelity of the last stage against `e^{-iρt}`.
    pub final_fidelity: f64,
    /// Process fidelity of the seed repeated `1/dt_ratio` times against `e^{-iρt}`.
    pub trotter_fidelity: f64,
}

impl Strategy2Outcome {
    /// Chain-rule estimate of the end-to-end infidelity from the Trotter
    /// loss and the per-stage losses, combined as purified distances with
    /// stage `i`'s error amplified by `n_c^{s−i}`.
    pub fn chain_estimate(&self, n_c: usize) -> f64 {
        let s = self.stages.len();
        let mut d = (1.0 - self.trotter_fidelity).max(0.0).sqrt();
        for rec in &self.stages {
            let amp = (n_c as f64).powi((s - rec.stage) as i32);
            d += amp * (1.0 - rec.objective).max(0.0).sqrt();
        }
        (d * d).min(1.0)
    }
}

/// Where to pick up an interrupted run: the completed stage index and its
/// trained angles.
#[derive(Debug, Clone, PartialEq)]
pub struct Resume {
    pub stage: usize,
    pub params: Vec<f64>,
}

pub fn run(config: &Strategy2Config, h: &PauliSum, t: f64) -> Result<Strategy2Outcome> {
    run_with(config, h, t, None, |_| Ok(()))
}

/// Runs stages after `resume` (or from the seed), calling `on_stage` as each
/// stage finishes.
pub fn run_with(
    config: &Strategy2Config,
    h: &PauliSum,
    t: f64,
    resume: Option<Resume>,
    mut on_stage: impl FnMut(&StageRecord) -> Result<()>,
) -> Result<Strategy2Outcome> {
    config.validate()?;
    let s = config.n_stages()?;
    let dt = t * config.dt_ratio;
    let ansatz = default_ansatz(h, 1.0, config.layers)?;
    let layout = build_apqc(h.n_qubits())?;
    let seed_params = seed_small_dt(h, dt, &ansatz)?;
    let seed_u = ansatz.unitary(&seed_params)?;
    let seed_fidelity = process_fidelity(&seed_u, &exact_unitary(h, dt)?);
    let trotter_fidelity = {
        let steps = (config.n_c as f64).powi(s as i32).round() as usize;
        let u = ansatz.bind(&seed_params)?.repeated(steps).unitary(&[])?;
        process_fidelity(&u, &exact_unitary(h, t)?)
    };

    let (first, mut prev) = match resume {
        Some(r) => {
            check_dim(ansatz.n_params(), r.params.len())?;
            if r.stage > s {
                return Err(Error::Config(format!("resume stage {} exceeds {s} stages", r.stage)));
            }
            (r.stage + 1, r.params)
        }
        None => (1, seed_params.clone()),
    };

    let mut stages = Vec::with_capacity(s);
    for stage in first..=s {
        let frozen = ansatz.bind(&prev)?;
        let obj = Compression::new(&layout, &ansatz, &frozen, config.n_c)?;
        let warm: Vec<f64> = prev.iter().map(|b| b * config.n_c as f64).collect();
        let trace = train_stage(config, &obj, warm, stage)?;
        let rec = StageRecord {
            stage,
            params: trace.final_params.clone(),
            objective: trace.final_objective(),
            trace,
        };
        on_stage(&rec)?;
        prev = rec.params.clone();
        stages.push(rec);
    }

    let final_fidelity = process_fidelity(&ansatz.unitary(&prev)?, &exact_unitary(h, t)?);
    Ok(Strategy2Outcome {
        ansatz,
        seed_params,
        seed_fidelity,
        stages,
        final_params: prev,
        final_fidelity,
        trotter_fidelity,
    })
}

fn train_stage(config: &Strategy2Config, obj: &Compression, warm: Vec<f64>, stage: usize) -> Result<TrainTrace> {
    let eval = |p: &[f64]| obj.value(p).expect("parameter length fixed by the ansatz");
    let mut params = warm.clone();
    let mut rows = Vec::new();
    let mut best: Vec<f64> = Vec::new();
    let (mut restarts, mut run_iter, mut converged) = (0, 0, false);
    for iter in 0.. {
        let f = eval(&params);
        let grad = if f >= 1.0 - config.eps_o {
            vec![0.0; params.len()]
        } else {
            fd_gradient(eval, &params, config.fd_step)
        };
        rows.push(TraceRow {
            iter,
            objective: f,
            grad_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
        });
        if f >= 1.0 - config.eps_o {
            converged = true;
            break;
        }
        best.push(best.last().map_or(f, |b: &f64| b.max(f)));
        let stalled = run_iter >= config.window
            && best[run_iter] - best[run_iter - config.window] <= config.delta2;
        if run_iter >= config.max_iters_per_stage || stalled {
            if restarts == config.max_restarts {
                break;
            }
            restarts += 1;
            run_iter = 0;
            best.clear();
            if stalled {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(((stage as u64) << 32) | restarts as u64);
                params = warm
                    .iter()
                    .map(|w| w + rng.random_range(-config.reinit_noise..=config.reinit_noise))
                    .collect();
            }
            continue;
        }
        for (p, g) in params.iter_mut().zip(&grad) {
            *p += config.eta * g;
        }
        run_iter += 1;
    }
    let last = rows.last().map(|r| r.objective).unwrap_or(0.0);
    Ok(TrainTrace {
        iterations: rows,
        final_params: params,
        converged: converged || last >= 1.0 - config.eps_o,
        restarts_used: restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::build_two_body_ansatz;
    use crate::linalg::CMatrix;
    use proptest::prelude::*;
    use rand::Rng;

    fn bell() -> PauliSum {
        PauliSum::parse("0.25 II\n0.25 ZZ\n0.25 XX\n-0.25 YY").unwrap()
    }

    fn random_params(n: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn stage_count_from_ratio() {
        let cfg = Strategy2Config::default();
        assert_eq!(cfg.n_stages().unwrap(), 10);
        let bad = Strategy2Config {
            dt_ratio: 0.3,
            ..Default::default()
        };
        assert!(bad.n_stages().is_err());
        let nc1 = Strategy2Config {
            n_c: 1,
            ..Default::default()
        };
        assert!(nc1.validate().is_err());
    }

    #[test]
    fn seed_reads_coefficients() {
        let h = PauliSum::parse("1.0 Z").unwrap();
        let c = build_two_body_ansatz(&h, 1e-3).unwrap();
        assert_eq!(seed_small_dt(&h, 1e-3, &c).unwrap(), vec![1.0]);
        let angles = build_two_body_ansatz(&h, 1.0).unwrap();
        assert_eq!(seed_small_dt(&h, 1e-3, &angles).unwrap(), vec![1e-3]);
    }

    #[test]
    fn seed_rejects_foreign_terms() {
        let h = PauliSum::parse("1.0 Z").unwrap();
        let other = PauliSum::parse("1.0 X").unwrap();
        let c = build_two_body_ansatz(&other, 1.0).unwrap();
        assert!(seed_small_dt(&h, 0.1, &c).is_err());
    }

    #[test]
    fn seed_splits_across_replicas() {
        let h = PauliSum::parse("0.4 XX\n0.2 ZI").unwrap();
        let c = crate::circuits::build_two_body_ansatz_layers(&h, 1.0, 2).unwrap();
        let b = seed_small_dt(&h, 0.5, &c).unwrap();
        assert_eq!(b, vec![0.1, 0.05, 0.1, 0.05]);
    }

    #[test]
    fn seeded_bell_step_is_accurate() {
        let h = bell();
        let c = default_ansatz(&h, 1.0, 1).unwrap();
        let b = seed_small_dt(&h, 1e-3, &c).unwrap();
        let f = process_fidelity(&c.unitary(&b).unwrap(), &exact_unitary(&h, 1e-3).unwrap());
        assert!(1.0 - f <= 1e-5);
    }

    #[test]
    fn compression_of_exact_repeat_is_one() {
        let h = PauliSum::parse("0.3 XZ\n-0.5 YI\n0.2 ZY").unwrap();
        let layout = build_apqc(2).unwrap();
        let c = build_two_body_ansatz(&h, 1.0).unwrap();
        let p = [0.2, -0.4, 0.9];
        let frozen = c.bind(&p).unwrap();
        let doubled = c.repeated(2);
        let f = compression_objective(&layout, &doubled, &p, &frozen, 2).unwrap();
        assert!((f - 1.0).abs() < 1e-12);

        let id = Circuit::new(2, 0).unwrap();
        assert!((compression_objective(&layout, &id, &[], &id, 2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn compression_matches_dense_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for n in 1..=3 {
            let layout = build_apqc(n).unwrap();
            let mut text = String::new();
            for _ in 0..4 {
                let w: String = (0..n).map(|_| ['I', 'X', 'Y', 'Z'][rng.random_range(0..4)]).collect();
                text += &format!("{} {w}\n", rng.random_range(-1.0..1.0));
            }
            let h = PauliSum::parse(&text).unwrap();
            let Ok(c) = build_two_body_ansatz(&h, 1.0) else { continue };
            if c.n_params() == 0 {
                continue;
            }
            let p = random_params(c.n_params(), &mut rng);
            let q = random_params(c.n_params(), &mut rng);
            let frozen = c.bind(&q).unwrap();
            let f = compression_objective(&layout, &c, &p, &frozen, 2).unwrap();
            let u = c.unitary(&p).unwrap();
            let v2 = {
                let v = frozen.unitary(&[]).unwrap();
                v.matmul(&v)
            };
            assert!((f - process_fidelity(&u, &v2)).abs() < 1e-9);
            let fast = Compression::new(&layout, &c, &frozen, 2).unwrap().value(&p).unwrap();
            assert!((f - fast).abs() < 1e-12);
        }
    }

    #[test]
    fn compression_checks_registers() {
        let layout = build_apqc(2).unwrap();
        let c = Circuit::new(3, 0).unwrap();
        assert!(compression_objective(&layout, &c, &[], &c, 2).is_err());
    }

    #[test]
    fn fd_gradient_basic_cases() {
        let g = fd_gradient(|_| 3.0, &[1.0, 2.0], 0.01);
        assert_eq!(g, vec![0.0, 0.0]);
        let quad = |p: &[f64]| -p.iter().map(|x| x * x).sum::<f64>();
        let theta = [0.3, -1.2, 2.0];
        let g = fd_gradient(quad, &theta, 0.01);
        for (gi, ti) in g.iter().zip(theta) {
            assert!((gi + 2.0 * ti).abs() < 1e-12);
        }
    }

    #[test]
    fn fd_gradient_error_is_second_order() {
        let h = PauliSum::parse("0.3 XZ\n-0.5 YI\n0.2 ZY\n0.6 XX").unwrap();
        let layout = build_apqc(2).unwrap();
        let c = build_two_body_ansatz(&h, 1.0).unwrap();
        let frozen = c.bind(&[0.1, 0.2, -0.3, 0.15]).unwrap();
        let obj = Compression::new(&layout, &c, &frozen, 2).unwrap();
        let p = [0.5, 0.1, -0.2, 0.7];
        let f = |x: &[f64]| obj.value(x).unwrap();
        let exact = fd_gradient(f, &p, 1e-5);
        let e1 = fd_gradient(f, &p, 1e-2);
        let e2 = fd_gradient(f, &p, 1e-3);
        for j in 0..p.len() {
            let (d1, d2) = ((e1[j] - exact[j]).abs(), (e2[j] - exact[j]).abs());
            if d2 > 1e-12 {
                let ratio = d1 / d2;
                assert!((100.0 / 3.0..300.0).contains(&ratio), "component {j}: ratio {ratio}");
            }
        }
    }

    #[test]
    fn commuting_hamiltonian_stages_converge_immediately() {
        let h = PauliSum::parse("0.7 ZZI\n-0.3 IZZ\n1.1 ZIZ\n0.4 ZII").unwrap();
        let cfg = Strategy2Config {
            dt_ratio: 1.0 / 16.0,
            ..Default::default()
        };
        let out = run(&cfg, &h, 0.5).unwrap();
        assert_eq!(out.stages.len(), 4);
        for st in &out.stages {
            assert!(st.trace.iterations.len() <= 5);
            assert!(st.trace.converged);
        }
        assert!(out.final_fidelity > 1.0 - 1e-10);
    }

    #[test]
    fn bell_run_has_ten_stages() {
        let out = run(&Strategy2Config::default(), &bell(), 0.05).unwrap();
        assert_eq!(out.stages.len(), 10);
        assert!(out.final_fidelity >= 0.99);
        let infid = 1.0 - out.final_fidelity;
        assert!(infid <= 3.0 * out.chain_estimate(2) + 1e-12);
    }

    #[test]
    fn resume_continues_after_given_stage() {
        let h = PauliSum::parse("0.7 ZZ\n0.4 ZI").unwrap();
        let cfg = Strategy2Config {
            dt_ratio: 1.0 / 8.0,
            ..Default::default()
        };
        let full = run(&cfg, &h, 0.4).unwrap();
        let r = Resume {
            stage: 1,
            params: full.stages[0].params.clone(),
        };
        let mut seen = Vec::new();
        let rest = run_with(&cfg, &h, 0.4, Some(r), |s| {
            seen.push(s.stage);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![2, 3]);
        assert_eq!(rest.final_params, full.final_params);
    }

    #[test]
    fn stage_files_round_trip_params() {
        let h = bell();
        let c = default_ansatz(&h, 1.0, 2).unwrap();
        let p = [0.1, -0.25, 1.0 / 3.0, 2.0, -1e-7, 0.5];
        let text = c.bind(&p).unwrap().to_text();
        let back = params_from_bound(&c, &Circuit::parse(&text).unwrap()).unwrap();
        assert_eq!(back, p);
        let other = default_ansatz(&h, 1.0, 1).unwrap();
        assert!(params_from_bound(&other, &c.bind(&p).unwrap()).is_err());
    }

    #[test]
    fn budget_formula() {
        assert_eq!(error_budget(0.0, 0.3, 2.0), 0.3);
        let (eps_o, t): (f64, f64) = (1e-4, 0.5);
        let best = t * eps_o.sqrt();
        let b = error_budget(eps_o, best, t);
        assert!((b - 2.0 * t * eps_o.sqrt()).abs() < 1e-15);
        assert!(error_budget(eps_o, best * 1.1, t) > b);
        assert!(error_budget(eps_o, best * 0.9, t) > b);
    }

    /// `1 − |⟨ψ|e^{iρ·dt} Π e^{-iβ_iρ_i·dt}|ψ⟩|²` by direct simulation.
    fn simulated_loss(h: &PauliSum, betas: &[f64], dt: f64, psi: &StateVector) -> f64 {
        let mut phi = psi.clone();
        for ((_, p), b) in h.terms().iter().zip(betas) {
            if p.is_identity() {
                let u = CMatrix::identity(psi.dim())
                    .scale(num_complex::Complex64::from_polar(1.0, -b * dt));
                phi = StateVector::from_amplitudes(u.mul_vec(phi.amplitudes())).unwrap();
            } else {
                phi.apply_pauli_rotation(p, b * dt).unwrap();
            }
        }
        let v = exact_unitary(h, dt).unwrap();
        let target = StateVector::from_amplitudes(v.mul_vec(psi.amplitudes())).unwrap();
        1.0 - overlap(&target, &phi).unwrap().norm_sqr()
    }

    #[test]
    fn residual_vanishes_for_exact_commuting_split() {
        let h = PauliSum::parse("0.7 ZZ\n-0.3 ZI\n0.2 XX\n0.5 YY").unwrap();
        let betas: Vec<f64> = h.terms().iter().map(|(c, _)| *c).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let psi = StateVector::random(2, &mut rng).unwrap();
        assert!(residual_second_order(&h, &betas, 1e-2, &psi).unwrap().abs() <= 1e-12);
        assert_eq!(residual_second_order(&h, &betas, 0.0, &psi).unwrap(), 0.0);
    }

    #[test]
    fn residual_matches_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..10 {
            let h = PauliSum::parse(&format!(
                "{} XZ\n{} YI\n{} ZY\n{} XX",
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0)
            ))
            .unwrap();
            let betas = random_params(h.len(), &mut rng);
            let psi = StateVector::random(2, &mut rng).unwrap();
            let dt = 1e-3;
            let est = residual_second_order(&h, &betas, dt, &psi).unwrap();
            let sim = simulated_loss(&h, &betas, dt, &psi);
            if est.abs() > 1e-12 && sim.abs() > 1e-12 {
                assert!(((est - sim) / sim).abs() < 0.05, "{est} vs {sim}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn compression_never_exceeds_one(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = PauliSum::parse("0.3 XZ\n-0.5 YI\n0.2 ZY").unwrap();
            let layout = build_apqc(2).unwrap();
            let c = build_two_body_ansatz(&h, 1.0).unwrap();
            let frozen = c.bind(&random_params(3, &mut rng)).unwrap();
            let f = compression_objective(&layout, &c, &random_params(3, &mut rng), &frozen, 2).unwrap();
            prop_assert!((0.0..=1.0 + 1e-9).contains(&f));
        }
    }
}
