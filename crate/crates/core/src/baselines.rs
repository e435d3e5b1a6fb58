//! Conventional references: first-order Lie–Trotter products and density
//! matrix exponentiation (DME) by repeated partial swaps.

use num_complex::Complex64;
use serde::Serialize;

use crate::circuits::{Circuit, Gate};
use crate::error::{check_dim, Result};
use crate::linalg::CMatrix;
use crate::pauli::PauliSum;
use crate::simulator::{exact_unitary, process_fidelity, DensityMatrix, StateVector};

#[derive(Debug, Clone, PartialEq)]
pub struct TrotterPlan {
    pub h: PauliSum,
    pub t: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CircuitCost {
    pub gate_count: usize,
    pub depth: usize,
}

impl TrotterPlan {
    pub fn new(h: PauliSum, t: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(crate::Error::Config("Trotter plan needs n_steps >= 1".into()));
        }
        Ok(Self { h, t, n_steps })
    }

    /// One pass `Π_i e^{-i h_i t/n}`. Identity terms only contribute a
    /// global phase and are omitted.
    pub fn step_circuit(&self) -> Result<Circuit> {
        let dt = self.t / self.n_steps as f64;
        let mut c = Circuit::new(self.h.n_qubits(), 0)?;
        for (coeff, p) in self.h.terms() {
            if !p.is_identity() {
                c.push(Gate::Fixed {
                    pauli: *p,
                    angle: coeff * dt,
                })?;
            }
        }
        Ok(c)
    }

    pub fn circuit(&self) -> Result<Circuit> {
        Ok(self.step_circuit()?.repeated(self.n_steps))
    }

    /// Gate count and depth, one layer being one full pass over the terms.
    pub fn cost(&self) -> Result<CircuitCost> {
        let step = self.step_circuit()?;
        Ok(CircuitCost {
            gate_count: self.n_steps * step.len(),
            depth: self.n_steps * step.depth(),
        })
    }
}

pub fn trotter_evolve(plan: &TrotterPlan, input: &StateVector) -> Result<(StateVector, CircuitCost)> {
    check_dim(plan.h.n_qubits(), input.n_qubits())?;
    let step = plan.step_circuit()?;
    let mut psi = input.clone();
    for _ in 0..plan.n_steps {
        step.apply(&mut psi, &[])?;
    }
    Ok((psi, plan.cost()?))
}

/// `1 − |Tr(V†U)/d|²` between the Trotter product and `e^{-iht}`.
pub fn trotter_process_infidelity(plan: &TrotterPlan) -> Result<f64> {
    let u = plan.circuit()?.unitary(&[])?;
    let v = exact_unitary(&plan.h, plan.t)?;
    Ok(1.0 - process_fidelity(&u, &v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmePlan {
    pub rho: DensityMatrix,
    pub sigma: DensityMatrix,
    pub t: f64,
    pub n_copies: usize,
}

impl DmePlan {
    pub fn new(rho: DensityMatrix, sigma: DensityMatrix, t: f64, n_copies: usize) -> Result<Self> {
        check_dim(rho.n_qubits(), sigma.n_qubits())?;
        if n_copies == 0 {
            return Err(crate::Error::Config("DME plan needs n_copies >= 1".into()));
        }
        Ok(Self {
            rho,
            sigma,
            t,
            n_copies,
        })
    }
}

/// `tr_1[e^{-iSΔt}(ρ⊗σ)e^{iSΔt}]` with the dense swap `S` on two copies of
/// the register, using `e^{-iSθ} = cos θ·I − i sin θ·S`.
pub fn dme_step(rho: &DensityMatrix, sigma: &DensityMatrix, dt: f64) -> Result<DensityMatrix> {
    check_dim(rho.n_qubits(), sigma.n_qubits())?;
    let n = rho.n_qubits();
    let d = 1usize << n;
    let x = rho.matrix().kron(sigma.matrix());
    let swap = |i: usize| (i % d) * d + i / d;
    let (c, s) = (dt.cos(), dt.sin());
    let ics = Complex64::new(0.0, c * s);
    // W X W† = c² X + s² S X S + i c s (X S − S X)
    let evolved = CMatrix::from_fn(d * d, |r, col| {
        x[(r, col)] * (c * c)
            + x[(swap(r), swap(col))] * (s * s)
            + ics * (x[(r, swap(col))] - x[(swap(r), col)])
    });
    let joint = DensityMatrix::from_matrix_unchecked(evolved);
    let second: Vec<usize> = (n..2 * n).collect();
    joint.partial_trace(&second)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmeOutcome {
    pub state: DensityMatrix,
    pub copies_used: usize,
    /// One partial swap per copy.
    pub depth: usize,
}

pub fn dme_evolve(plan: &DmePlan) -> Result<DmeOutcome> {
    let dt = plan.t / plan.n_copies as f64;
    let mut sigma = plan.sigma.clone();
    for _ in 0..plan.n_copies {
        sigma = dme_step(&plan.rho, &sigma, dt)?;
    }
    Ok(DmeOutcome {
        state: sigma,
        copies_used: plan.n_copies,
        depth: plan.n_copies,
    })
}

/// One row of the baseline comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineRecord {
    pub method: String,
    pub t: f64,
    pub n: usize,
    pub final_infidelity: f64,
    pub depth: usize,
    pub gate_count: usize,
}

impl BaselineRecord {
    pub const CSV_HEADER: &'static str = "method,t,n,final_infidelity,depth,gate_count";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.12e},{},{}",
            self.method, self.t, self.n, self.final_infidelity, self.depth, self.gate_count
        )
    }
}

pub fn trotter_record(h: &PauliSum, t: f64, n: usize) -> Result<BaselineRecord> {
    let plan = TrotterPlan::new(h.clone(), t, n)?;
    let cost = plan.cost()?;
    Ok(BaselineRecord {
        method: "trotter".into(),
        t,
        n,
        final_infidelity: trotter_process_infidelity(&plan)?,
        depth: cost.depth,
        gate_count: cost.gate_count,
    })
}

/// DME applied to the pure probe `psi`; infidelity is `1 − ⟨ψ_t|σ_n|ψ_t⟩`
/// against the exactly evolved probe.
pub fn dme_record(rho: &DensityMatrix, psi: &StateVector, t: f64, n: usize) -> Result<BaselineRecord> {
    let plan = DmePlan::new(rho.clone(), psi.to_density(), t, n)?;
    let out = dme_evolve(&plan)?;
    let v = crate::simulator::exact_unitary_dense(rho.matrix(), t)?;
    let target = StateVector::from_amplitudes(v.mul_vec(psi.amplitudes()))?;
    Ok(BaselineRecord {
        method: "dme".into(),
        t,
        n,
        final_infidelity: 1.0 - out.state.fidelity_with_pure(&target)?,
        depth: out.depth,
        gate_count: out.copies_used,
    })
}
