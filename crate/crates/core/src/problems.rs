//! Built-in operators and loading of user-supplied ones.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C0};
use crate::pauli::{Pauli, PauliString, PauliSum};

pub const BUILTINS: [&str; 3] = ["bell", "ghz", "crotonic"];
pub const DEFAULT_TIMES: [f64; 3] = [0.05, 0.1, 0.2];

/// Bundled coupling table for `crotonic`; the values are placeholders.
pub const CROTONIC_PARAMS: &str = include_str!("../data/crotonic.params");

#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    Pauli(PauliSum),
    Dense(CMatrix),
}

impl Operator {
    pub fn n_qubits(&self) -> usize {
        match self {
            Self::Pauli(h) => h.n_qubits(),
            Self::Dense(m) => m.dim().trailing_zeros() as usize,
        }
    }

    pub fn pauli_sum(&self) -> Result<PauliSum> {
        match self {
            Self::Pauli(h) => Ok(h.clone()),
            Self::Dense(m) => PauliSum::from_dense(m),
        }
    }

    pub fn dense(&self) -> Result<CMatrix> {
        match self {
            Self::Pauli(h) => h.to_dense(),
            Self::Dense(m) => Ok(m.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub name: String,
    pub n_qubits: usize,
    pub operator: Operator,
    pub times: Vec<f64>,
}

impl ProblemInstance {
    fn new(name: &str, operator: Operator) -> Self {
        Self {
            name: name.to_string(),
            n_qubits: operator.n_qubits(),
            operator,
            times: DEFAULT_TIMES.to_vec(),
        }
    }
}

/// `|ψ⟩⟨ψ|` for `|ψ⟩ = (|0…0⟩ + |1…1⟩)/√2`.
fn cat_projector(n: usize) -> CMatrix {
    let last = (1 << n) - 1;
    CMatrix::from_fn(1 << n, |r, c| {
        if (r == 0 || r == last) && (c == 0 || c == last) {
            Complex64::new(0.5, 0.0)
        } else {
            C0
        }
    })
}

pub fn builtin(name: &str) -> Result<ProblemInstance> {
    match name {
        "bell" => Ok(ProblemInstance::new(name, Operator::Dense(cat_projector(2)))),
        "ghz" => Ok(ProblemInstance::new(name, Operator::Dense(cat_projector(3)))),
        "crotonic" => Ok(ProblemInstance::new(name, Operator::Pauli(crotonic(CROTONIC_PARAMS)?))),
        _ => Err(Error::Unknown {
            kind: "problem",
            name: name.to_string(),
        }),
    }
}

/// `Σ_j (ν_j/2) Z_j + Σ_{j<k} (π/2) J_jk Z_j Z_k` from `nu j value` and
/// `J j k value` lines, spins numbered from 1.
pub fn crotonic(params: &str) -> Result<PauliSum> {
    let mut nu: Vec<(usize, f64)> = Vec::new();
    let mut coupling: Vec<(usize, usize, f64)> = Vec::new();
    for (idx, raw) in params.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: idx + 1, msg };
        let toks: Vec<&str> = line.split_whitespace().collect();
        let spin = |s: &str| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(j) if j >= 1 => Ok(j - 1),
                _ => Err(err(format!("bad spin index `{s}`"))),
            }
        };
        let value = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("bad value `{s}`")))
        };
        match toks.as_slice() {
            ["nu", j, v] => nu.push((spin(j)?, value(v)?)),
            ["J", j, k, v] => {
                let (j, k) = (spin(j)?, spin(k)?);
                if j >= k {
                    return Err(err(format!("coupling needs j < k, got {} {}", j + 1, k + 1)));
                }
                coupling.push((j, k, value(v)?));
            }
            _ => return Err(err(format!("expected `nu j value` or `J j k value`, got `{line}`"))),
        }
    }
    let n = nu
        .iter()
        .map(|(j, _)| j + 1)
        .chain(coupling.iter().map(|(_, k, _)| k + 1))
        .max()
        .ok_or(Error::Parse {
            line: 0,
            msg: "no parameters found".into(),
        })?;
    let mut h = PauliSum::new(n);
    for (j, v) in nu {
        h.add_term(v / 2.0, PauliString::single(n, j, Pauli::Z))?;
    }
    for (j, k, v) in coupling {
        let zz = PauliString::single(n, j, Pauli::Z).multiply(&PauliString::single(n, k, Pauli::Z))?;
        h.add_term(std::f64::consts::FRAC_PI_2 * v, zz)?;
    }
    Ok(h)
}

/// Rows of `re im re im …` pairs, one matrix row per line.
pub fn parse_dense(text: &str) -> Result<CMatrix> {
    let mut data = Vec::new();
    let mut width = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: idx + 1, msg };
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(format!("bad number `{t}`"))))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() % 2 != 0 {
            return Err(err("odd number of values in a row of complex pairs".into()));
        }
        if *width.get_or_insert(vals.len()) != vals.len() {
            return Err(err("rows have different lengths".into()));
        }
        data.extend(vals.chunks(2).map(|p| Complex64::new(p[0], p[1])));
    }
    let dim = width.unwrap_or(0) / 2;
    let m = CMatrix::from_rows(data)
        .filter(|m| m.dim() == dim && dim >= 2 && dim.is_power_of_two())
        .ok_or(Error::Parse {
            line: 0,
            msg: "dense operator must be a square matrix of power-of-two size".into(),
        })?;
    let defect = m.hermitian_defect();
    if defect > 1e-9 {
        return Err(Error::NotHermitian(defect));
    }
    Ok(m)
}

pub fn dense_to_text(m: &CMatrix) -> String {
    let mut s = format!("# dense {0}x{0}, row-major re im pairs\n", m.dim());
    for r in 0..m.dim() {
        let row: Vec<String> = m.row(r).iter().map(|z| format!("{} {}", z.re, z.im)).collect();
        s += &row.join(" ");
        s.push('\n');
    }
    s
}

fn looks_dense(text: &str) -> bool {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .find(|l| !l.is_empty())
        .and_then(|l| l.split_whitespace().nth(1))
        .is_some_and(|t| t.parse::<f64>().is_ok())
}

/// Parses either a Pauli sum or a dense matrix, decided by whether the second
/// token of the first data line is a number.
pub fn parse_operator(text: &str) -> Result<Operator> {
    if looks_dense(text) {
        parse_dense(text).map(Operator::Dense)
    } else {
        PauliSum::parse(text).map(Operator::Pauli)
    }
}

pub fn load(path: &Path) -> Result<ProblemInstance> {
    let op = parse_operator(&fs::read_to_string(path)?)?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("custom");
    Ok(ProblemInstance::new(name, op))
}

pub fn save(instance: &ProblemInstance, path: &Path) -> Result<()> {
    let text = match &instance.operator {
        Operator::Pauli(h) => h.to_text(),
        Operator::Dense(m) => dense_to_text(m),
    };
    fs::write(path, text)?;
    Ok(())
}

/// A built-in name or a path to an operator file.
pub fn resolve(name_or_path: &str) -> Result<ProblemInstance> {
    if BUILTINS.contains(&name_or_path) {
        return builtin(name_or_path);
    }
    let p = Path::new(name_or_path);
    if p.is_file() {
        return load(p);
    }
    Err(Error::Unknown {
        kind: "problem",
        name: name_or_path.to_string(),
    })
}
