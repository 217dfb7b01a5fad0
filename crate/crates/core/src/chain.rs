//! Mass-spring chains, their Jacobi matrices, and the interior perturbation
//! `(site, theta, h)`.
//!
//! A chain of `N` masses carries `N + 1` springs: `k_1` ties the first mass
//! to the wall and `k_{N+1}` closes the truncation. The matrix entries are
//!
//! ```text
//! q_j = -(k_{j+1} + k_j) / m_j,      b_j = k_{j+1} / sqrt(m_j m_{j+1}).
//! ```
//!
//! Sites are 1-based throughout the crate, matching the usual labelling of
//! masses along the chain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of a finite chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChain")]
pub struct MassSpringChain {
    masses: Vec<f64>,
    springs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawChain {
    masses: Vec<f64>,
    springs: Vec<f64>,
}

impl TryFrom<RawChain> for MassSpringChain {
    type Error = Error;

    fn try_from(raw: RawChain) -> Result<Self> {
        MassSpringChain::new(raw.masses, raw.springs)
    }
}

impl MassSpringChain {
    pub fn new(masses: Vec<f64>, springs: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidInput("a chain needs at least one mass".into()));
        }
        if springs.len() != masses.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "{} masses need {} springs, got {}",
                masses.len(),
                masses.len() + 1,
                springs.len()
            )));
        }
        if let Some((j, m)) = masses.iter().enumerate().find(|(_, m)| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidInput(format!("mass m_{} = {} is not positive", j + 1, m)));
        }
        if let Some((j, k)) = springs.iter().enumerate().find(|(_, k)| !(**k > 0.0 && k.is_finite())) {
            return Err(Error::InvalidInput(format!("spring k_{} = {} is not positive", j + 1, k)));
        }
        Ok(Self { masses, springs })
    }

    /// Chain of `n` unit masses joined by unit springs.
    pub fn uniform(n: usize) -> Self {
        Self { masses: vec![1.0; n], springs: vec![1.0; n + 1] }
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn springs(&self) -> &[f64] {
        &self.springs
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }
}

/// Finite symmetric tridiagonal matrix with strictly positive off-diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJacobi")]
pub struct JacobiMatrix {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

#[derive(Deserialize)]
struct RawJacobi {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl TryFrom<RawJacobi> for JacobiMatrix {
    type Error = Error;

    fn try_from(raw: RawJacobi) -> Result<Self> {
        JacobiMatrix::new(raw.diag, raw.offdiag)
    }
}

impl JacobiMatrix {
    /// Degenerate couplings (`b_j <= 0`) are rejected, never repaired.
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidInput("empty Jacobi matrix".into()));
        }
        if offdiag.len() + 1 != diag.len() {
            return Err(Error::InvalidInput(format!(
                "size {} needs {} off-diagonal entries, got {}",
                diag.len(),
                diag.len() - 1,
                offdiag.len()
            )));
        }
        if let Some((j, q)) = diag.iter().enumerate().find(|(_, q)| !q.is_finite()) {
            return Err(Error::InvalidInput(format!("q_{} = {} is not finite", j + 1, q)));
        }
        if let Some((j, b)) = offdiag.iter().enumerate().find(|(_, b)| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidInput(format!("b_{} = {} is not positive", j + 1, b)));
        }
        Ok(Self { diag, offdiag })
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    /// `q_j` for 1-based `j`.
    pub fn q(&self, j: usize) -> f64 {
        self.diag[j - 1]
    }

    /// `b_j` for 1-based `j`, with `b_0 = b_N = 0`.
    pub fn b(&self, j: usize) -> f64 {
        if j == 0 || j > self.offdiag.len() {
            0.0
        } else {
            self.offdiag[j - 1]
        }
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        (0..self.size())
            .map(|i| {
                let left = if i > 0 { self.offdiag[i - 1] } else { 0.0 };
                let right = self.offdiag.get(i).copied().unwrap_or(0.0);
                self.diag[i].abs() + left + right
            })
            .fold(0.0, f64::max)
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.size() {
            let left = if i > 0 { self.offdiag[i - 1] } else { 0.0 };
            let right = self.offdiag.get(i).copied().unwrap_or(0.0);
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        (lo, hi)
    }

    /// Leading `k x k` block.
    pub fn leading(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.size() {
            return Err(Error::InvalidSite { site: k, size: self.size() });
        }
        Ok(Self { diag: self.diag[..k].to_vec(), offdiag: self.offdiag[..k - 1].to_vec() })
    }

    /// The same operator written in the reversed basis `e_N, ..., e_1`.
    pub fn reversed(&self) -> Self {
        let mut diag = self.diag.clone();
        let mut offdiag = self.offdiag.clone();
        diag.reverse();
        offdiag.reverse();
        Self { diag, offdiag }
    }

    /// Dense `y = J x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.size();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.offdiag[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.offdiag[i] * x[i + 1];
                }
                s
            })
            .collect()
    }
}

/// Interior perturbation at `site`: `b_{n-1} -> theta b_{n-1}`,
/// `q_n -> theta^2 (q_n + h)`, `b_n -> theta b_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPerturbation")]
pub struct Perturbation {
    site: usize,
    theta: f64,
    h: f64,
}

#[derive(Deserialize)]
struct RawPerturbation {
    site: usize,
    theta: f64,
    h: f64,
}

impl TryFrom<RawPerturbation> for Perturbation {
    type Error = Error;

    fn try_from(raw: RawPerturbation) -> Result<Self> {
        Perturbation::new(raw.site, raw.theta, raw.h)
    }
}

impl Perturbation {
    pub fn new(site: usize, theta: f64, h: f64) -> Result<Self> {
        if site == 0 {
            return Err(Error::InvalidInput("sites are 1-based".into()));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidInput(format!("theta = {theta} must be positive")));
        }
        if !h.is_finite() {
            return Err(Error::InvalidInput(format!("h = {h} is not finite")));
        }
        Ok(Self { site, theta, h })
    }

    pub fn identity(site: usize) -> Self {
        Self { site, theta: 1.0, h: 0.0 }
    }

    pub fn site(&self) -> usize {
        self.site
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn gamma(&self) -> Result<f64> {
        gamma_of(self.theta, self.h)
    }

    /// Same site and shift with a different `theta`.
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(self.site, theta, self.h)
    }

    pub fn with_h(&self, h: f64) -> Result<Self> {
        Self::new(self.site, self.theta, h)
    }
}

/// `gamma = theta^2 h / (1 - theta^2)`; undefined at `theta = 1`.
pub fn gamma_of(theta: f64, h: f64) -> Result<f64> {
    if theta == 1.0 {
        return Err(Error::ThetaOne);
    }
    let t2 = theta * theta;
    Ok(t2 * h / (1.0 - t2))
}

pub fn chain_to_jacobi(chain: &MassSpringChain) -> JacobiMatrix {
    let m = &chain.masses;
    let k = &chain.springs;
    let n = m.len();
    let diag = (0..n).map(|j| -(k[j + 1] + k[j]) / m[j]).collect();
    let offdiag = (0..n - 1).map(|j| k[j + 1] / (m[j] * m[j + 1]).sqrt()).collect();
    JacobiMatrix { diag, offdiag }
}

/// Recovers the chain from its matrix given the two free normalizations
/// `m_1` and `k_1`.
pub fn jacobi_to_chain(j: &JacobiMatrix, m1: f64, k1: f64) -> Result<MassSpringChain> {
    if !(m1 > 0.0 && k1 > 0.0) {
        return Err(Error::InvalidInput(format!("normalization m1 = {m1}, k1 = {k1} must be positive")));
    }
    let n = j.size();
    let mut masses = Vec::with_capacity(n);
    let mut springs = Vec::with_capacity(n + 1);
    masses.push(m1);
    springs.push(k1);
    for idx in 0..n {
        let next_k = -j.diag[idx] * masses[idx] - springs[idx];
        if !(next_k > 0.0) {
            return Err(Error::NonPhysical(format!("recovered spring k_{} = {next_k}", idx + 2)));
        }
        springs.push(next_k);
        if idx + 1 < n {
            let ratio = next_k / j.offdiag[idx];
            let next_m = ratio * ratio / masses[idx];
            if !(next_m > 0.0 && next_m.is_finite()) {
                return Err(Error::NonPhysical(format!("recovered mass m_{} = {next_m}", idx + 2)));
            }
            masses.push(next_m);
        }
    }
    Ok(MassSpringChain { masses, springs })
}

pub fn apply_perturbation(j: &JacobiMatrix, p: &Perturbation) -> Result<JacobiMatrix> {
    let n = p.site;
    if n + 1 > j.size() {
        return Err(Error::InvalidSite { site: n, size: j.size() });
    }
    let mut out = j.clone();
    let theta = p.theta;
    if n > 1 {
        out.offdiag[n - 2] *= theta;
    }
    out.diag[n - 1] = theta * theta * (j.diag[n - 1] + p.h);
    out.offdiag[n - 1] *= theta;
    Ok(out)
}

/// Mass and grounding-spring increments realizing the perturbation:
/// `(m_n (theta^-2 - 1), -h m_n)`.
pub fn perturbation_physics(p: &Perturbation, m_n: f64) -> (f64, f64) {
    let theta = p.theta;
    (m_n * (1.0 / (theta * theta) - 1.0), -p.h * m_n)
}

/// Matrix of the physically perturbed chain: mass `m_n + dm` and an extra
/// spring `dk` tying mass `n` to the ground.
pub fn perturbed_chain_matrix(chain: &MassSpringChain, p: &Perturbation) -> Result<JacobiMatrix> {
    let n = p.site;
    if n + 1 > chain.len() {
        return Err(Error::InvalidSite { site: n, size: chain.len() });
    }
    let (dm, dk) = perturbation_physics(p, chain.masses[n - 1]);
    let mut masses = chain.masses.clone();
    masses[n - 1] += dm;
    let heavier = MassSpringChain::new(masses, chain.springs.clone())?;
    let mut j = chain_to_jacobi(&heavier);
    j.diag[n - 1] -= dk / heavier.masses[n - 1];
    Ok(j)
}
