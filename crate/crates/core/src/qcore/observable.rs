use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::density::MAX_DENSITY_QUBITS;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// Tensor product of single-qubit Paulis, one letter per qubit (qubit 0 first).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString(Vec<Pauli>);

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Self {
        Self(letters)
    }

    pub fn identity(n: usize) -> Self {
        Self(vec![Pauli::I; n])
    }

    /// `P` on qubit `q`, identity elsewhere.
    pub fn single(n: usize, q: usize, p: Pauli) -> Self {
        let mut v = vec![Pauli::I; n];
        v[q] = p;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|p| *p == Pauli::I)
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.0
    }

    /// Bit masks of the action `P|b⟩ = i^{n_y} (−1)^{|b ∧ z|} |b ⊕ x⟩`.
    fn masks(&self) -> Action {
        let n = self.0.len();
        let mut x = 0usize;
        let mut z = 0usize;
        let mut ny = 0u32;
        for (q, p) in self.0.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => x |= bit,
                Pauli::Y => {
                    x |= bit;
                    z |= bit;
                    ny += 1;
                }
                Pauli::Z => z |= bit,
            }
        }
        let global = match ny % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        Action { x, z, global }
    }
}

struct Action {
    x: usize,
    z: usize,
    global: Complex64,
}

impl Action {
    #[inline]
    fn phase(&self, b: usize) -> Complex64 {
        if (b & self.z).count_ones() % 2 == 1 {
            -self.global
        } else {
            self.global
        }
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::config(format!("unknown Pauli letter {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            let c = match p {
                Pauli::I => 'I',
                Pauli::X => 'X',
                Pauli::Y => 'Y',
                Pauli::Z => 'Z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Real linear combination of Pauli strings with its spectral norm and
/// trace cached at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
    spectral_norm: f64,
    trace: f64,
}

impl Observable {
    /// Merges duplicate strings and drops zero coefficients. The spectral
    /// norm is exact for a single term or up to 8 qubits, otherwise the
    /// triangle bound Σ|c|.
    pub fn new(n_qubits: usize, terms: Vec<(f64, PauliString)>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::config("observable needs at least one qubit"));
        }
        let mut merged: Vec<(f64, PauliString)> = Vec::new();
        for (c, s) in terms {
            if s.len() != n_qubits {
                return Err(Error::config(format!(
                    "Pauli string {s} has {} letters, expected {n_qubits}",
                    s.len()
                )));
            }
            if !c.is_finite() {
                return Err(Error::config("observable coefficient is not finite"));
            }
            match merged.iter_mut().find(|(_, t)| *t == s) {
                Some((acc, _)) => *acc += c,
                None => merged.push((c, s)),
            }
        }
        merged.retain(|(c, _)| *c != 0.0);
        let dim = (1u64 << n_qubits) as f64;
        let trace = merged
            .iter()
            .filter(|(_, s)| s.is_identity())
            .map(|(c, _)| c * dim)
            .sum();
        let l1: f64 = merged.iter().map(|(c, _)| c.abs()).sum();
        let spectral_norm = if merged.len() <= 1 {
            l1
        } else if n_qubits <= MAX_DENSITY_QUBITS {
            dense_norm(n_qubits, &merged).min(l1)
        } else {
            l1
        };
        Ok(Self {
            n_qubits,
            terms: merged,
            spectral_norm,
            trace,
        })
    }

    /// `Z` on qubit `q`: ‖O‖ = 1, Tr(O) = 0.
    pub fn z(n_qubits: usize, q: usize) -> Self {
        Self::new(
            n_qubits,
            vec![(1.0, PauliString::single(n_qubits, q, Pauli::Z))],
        )
        .expect("single Z term is always valid")
    }

    /// Parses `"ZIII"`, `"0.5*XXII + -1*ZZII"` and the like.
    pub fn parse(n_qubits: usize, text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for part in text.split('+') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (coef, string) = match part.split_once('*') {
                Some((c, s)) => (
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::config(format!("bad coefficient in {part:?}")))?,
                    s,
                ),
                None => (1.0, part),
            };
            terms.push((coef, string.parse::<PauliString>()?));
        }
        if terms.is_empty() {
            return Err(Error::config("empty observable"));
        }
        Self::new(n_qubits, terms)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    /// ‖O‖.
    pub fn spectral_norm(&self) -> f64 {
        self.spectral_norm
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub(crate) fn check_qubits(&self, n: usize) -> Result<()> {
        if n != self.n_qubits {
            return Err(Error::contract(format!(
                "observable acts on {} qubits, state has {n}",
                self.n_qubits
            )));
        }
        Ok(())
    }

    pub(crate) fn expectation_amplitudes(&self, psi: &[Complex64]) -> f64 {
        let mut total = 0.0;
        for (c, s) in &self.terms {
            let act = s.masks();
            let v: Complex64 = psi
                .iter()
                .enumerate()
                .map(|(b, a)| psi[b ^ act.x].conj() * act.phase(b) * a)
                .sum();
            total += c * v.re;
        }
        total
    }

    pub(crate) fn expectation_density(&self, rho: &[Complex64], dim: usize) -> f64 {
        let mut total = 0.0;
        for (c, s) in &self.terms {
            let act = s.masks();
            // Tr(Pρ) = Σ_k phase(k) ρ[k, k ⊕ x]
            let v: Complex64 = (0..dim)
                .map(|k| act.phase(k) * rho[k * dim + (k ^ act.x)])
                .sum();
            total += c * v.re;
        }
        total
    }

    /// Dense `2^n × 2^n` matrix of the observable.
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        to_matrix(self.n_qubits, &self.terms)
    }
}

fn to_matrix(n: usize, terms: &[(f64, PauliString)]) -> DMatrix<Complex64> {
    let dim = 1usize << n;
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for (c, s) in terms {
        let act = s.masks();
        for b in 0..dim {
            m[(b ^ act.x, b)] += act.phase(b) * *c;
        }
    }
    m
}

fn dense_norm(n: usize, terms: &[(f64, PauliString)]) -> f64 {
    to_matrix(n, terms)
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |a, e| a.max(e.abs()))
}
