//! Spectral decomposition of Jacobi matrices.
//!
//! Eigenvalues come from Sturm-sequence bisection, which is accurate to a few
//! ulps of the matrix norm regardless of clustering. Eigenvectors come from
//! inverse iteration on a pivoted tridiagonal LU factorization, with
//! Gram-Schmidt against earlier vectors of the same cluster. Every vector is
//! signed so that its first entry is positive; for a Jacobi matrix that entry
//! never vanishes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::JacobiMatrix;
use crate::error::{Error, Result};

/// Nodes whose weight falls below this are treated as removable.
pub const ZERO_WEIGHT: f64 = 1e-24;

/// Knobs for [`eigensystem_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenConfig {
    /// Inverse-iteration sweeps allowed per eigenvalue.
    pub max_sweeps: usize,
    /// Eigenvalues closer than `cluster_rel * ||J||` share a
    /// reorthogonalization group.
    pub cluster_rel: f64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self { max_sweeps: 50, cluster_rel: 1e-3 }
    }
}

/// Discrete measure: strictly increasing nodes with positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasure {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SpectralMeasure {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(Error::InvalidInput(format!(
                "measure needs matching non-empty node/weight lists ({} vs {})",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("measure nodes must be strictly increasing".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput(format!("measure weight {w} is not positive")));
        }
        Ok(Self { nodes, weights })
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Stieltjes transform `sum_j w_j / (t_j - z)`.
    pub fn stieltjes(&self, z: Complex64) -> Complex64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w / (t - z)).sum()
    }

    /// `k`-th moment `sum_j w_j t_j^k`.
    pub fn moment(&self, k: i32) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * t.powi(k)).sum()
    }
}

/// Eigenvalues in ascending order with their orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

impl EigenDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Normalized eigenvector for the `j`-th eigenvalue (0-based).
    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j]
    }

    pub fn first_components(&self) -> Vec<f64> {
        self.nth_components(1)
    }

    /// Entry `n` (1-based site) of every eigenvector.
    pub fn nth_components(&self, n: usize) -> Vec<f64> {
        self.vectors.iter().map(|v| v[n - 1]).collect()
    }

    /// Last entry of every eigenvector.
    pub fn last_components(&self) -> Vec<f64> {
        self.vectors.iter().map(|v| v[v.len() - 1]).collect()
    }
}

/// Number of eigenvalues strictly below `x`.
pub fn sturm_count(j: &JacobiMatrix, x: f64) -> usize {
    let diag = j.diag();
    let off = j.offdiag();
    let pivmin = f64::MIN_POSITIVE * off.iter().fold(1.0_f64, |m, b| m.max(b * b));
    let mut count = 0;
    let mut d = diag[0] - x;
    if d.abs() < pivmin {
        d = -pivmin;
    }
    if d < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        d = diag[i] - x - off[i - 1] * off[i - 1] / d;
        if d.abs() < pivmin {
            d = -pivmin;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k`-th smallest eigenvalue (0-based) by bisection to full precision.
pub fn bisect_eigenvalue(j: &JacobiMatrix, k: usize) -> f64 {
    let (mut lo, mut hi) = j.gershgorin();
    let norm = j.norm_bound().max(f64::MIN_POSITIVE);
    let pad = 2.0 * f64::EPSILON * norm + f64::MIN_POSITIVE;
    lo -= pad;
    hi += pad;
    let abs_tol = 1e-3 * f64::EPSILON * norm;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= abs_tol {
            return mid;
        }
        if sturm_count(j, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

pub fn eigenvalues(j: &JacobiMatrix) -> Vec<f64> {
    if j.size() == 1 {
        return vec![j.q(1)];
    }
    (0..j.size()).map(|k| bisect_eigenvalue(j, k)).collect()
}

pub fn eigensystem(j: &JacobiMatrix) -> Result<EigenDecomposition> {
    eigensystem_with(j, &EigenConfig::default())
}

pub fn eigensystem_with(j: &JacobiMatrix, cfg: &EigenConfig) -> Result<EigenDecomposition> {
    let n = j.size();
    let eigenvalues = eigenvalues(j);
    if n == 1 {
        return Ok(EigenDecomposition { eigenvalues, vectors: vec![vec![1.0]] });
    }
    let norm = j.norm_bound().max(f64::MIN_POSITIVE);
    let cluster_gap = cfg.cluster_rel * norm;
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut cluster_start = 0;
    let mut prev_shift = f64::NEG_INFINITY;
    for (idx, &lambda) in eigenvalues.iter().enumerate() {
        if idx > 0 && lambda - eigenvalues[idx - 1] > cluster_gap {
            cluster_start = idx;
        }
        // Coincident shifts would make the iteration return the same vector.
        let mut shift = lambda;
        let sep = 10.0 * f64::EPSILON * norm;
        if idx > cluster_start && shift - prev_shift < sep {
            shift = prev_shift + sep;
        }
        prev_shift = shift;
        let v = inverse_iteration(j, lambda, shift, &vectors[cluster_start..idx], idx, cfg.max_sweeps, norm)?;
        vectors.push(v);
    }
    Ok(EigenDecomposition { eigenvalues, vectors })
}

fn inverse_iteration(
    j: &JacobiMatrix,
    lambda: f64,
    shift: f64,
    cluster: &[Vec<f64>],
    index: usize,
    max_sweeps: usize,
    norm: f64,
) -> Result<Vec<f64>> {
    let n = j.size();
    let lu = ShiftedLu::factor(j, shift, norm);
    // Deterministic start vector with no special structure.
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_749_895 + index as f64 * 0.414_213_562).fract())
        .collect();
    normalize(&mut x);
    let target = 1e-13 * (lambda.abs() + norm);
    let accept = 1e-11 * (lambda.abs() + norm);
    let mut residual = f64::INFINITY;
    for sweep in 0..max_sweeps.max(1) {
        lu.solve(&mut x);
        for _ in 0..2 {
            for u in cluster {
                let c = dot(u, &x);
                x.iter_mut().zip(u).for_each(|(xi, ui)| *xi -= c * ui);
            }
        }
        if normalize(&mut x) == 0.0 {
            return Err(Error::ConvergenceFailure { index, sweeps: sweep + 1 });
        }
        residual = residual_norm(j, lambda, &x);
        if residual <= target && sweep >= 1 {
            break;
        }
    }
    if residual > accept {
        return Err(Error::ConvergenceFailure { index, sweeps: max_sweeps });
    }
    if x[0] < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(x)
}

fn residual_norm(j: &JacobiMatrix, lambda: f64, x: &[f64]) -> f64 {
    let jx = j.apply(x);
    jx.iter().zip(x).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn normalize(x: &mut [f64]) -> f64 {
    let nrm = dot(x, x).sqrt();
    if nrm > 0.0 {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
    nrm
}

/// LU factorization of `J - shift I` with partial pivoting (one extra
/// superdiagonal of fill).
struct ShiftedLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn factor(j: &JacobiMatrix, shift: f64, norm: f64) -> Self {
        let n = j.size();
        let mut d: Vec<f64> = j.diag().iter().map(|q| q - shift).collect();
        let mut dl = j.offdiag().to_vec();
        let mut du = j.offdiag().to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        let tiny = f64::EPSILON * norm;
        for p in d.iter_mut() {
            if p.abs() < tiny {
                *p = if *p < 0.0 { -tiny } else { tiny };
            }
        }
        Self { dl, d, du, du2, swapped }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// Weyl spectral measure anchored at the first basis vector.
pub fn spectral_measure(j: &JacobiMatrix) -> Result<SpectralMeasure> {
    let eig = eigensystem(j)?;
    let weights = eig.first_components().iter().map(|c| c * c).collect();
    Ok(SpectralMeasure { nodes: eig.eigenvalues, weights })
}

/// Measure anchored at site `n`: weights are the squared `n`-th eigenvector
/// entries. Nodes where that entry vanishes are dropped.
pub fn site_measure(j: &JacobiMatrix, n: usize) -> Result<SpectralMeasure> {
    if n == 0 || n > j.size() {
        return Err(Error::InvalidSite { site: n, size: j.size() });
    }
    let eig = eigensystem(j)?;
    Ok(measure_from_components(&eig.eigenvalues, &eig.nth_components(n)))
}

pub(crate) fn measure_from_components(nodes: &[f64], components: &[f64]) -> SpectralMeasure {
    let (nodes, weights) = nodes
        .iter()
        .zip(components)
        .map(|(&t, &c)| (t, c * c))
        .filter(|&(_, w)| w > ZERO_WEIGHT)
        .unzip();
    SpectralMeasure { nodes, weights }
}

/// Orthogonal polynomials of the first kind `pi_1(z), ..., pi_upto(z)`:
/// `pi_1 = 1` and `b_k pi_{k+1} = (z - q_k) pi_k - b_{k-1} pi_{k-1}`.
pub fn eval_first_kind(j: &JacobiMatrix, z: Complex64, upto: usize) -> Result<Vec<Complex64>> {
    three_term(j, z, upto, Complex64::new(1.0, 0.0), None)
}

/// Polynomials of the second kind: `xi_1 = 0`, `xi_2 = 1 / b_1`, same
/// recurrence.
pub fn eval_second_kind(j: &JacobiMatrix, z: Complex64, upto: usize) -> Result<Vec<Complex64>> {
    if upto >= 2 && j.size() < 2 {
        return Err(Error::InvalidInput("second-kind polynomials need b_1".into()));
    }
    three_term(j, z, upto, Complex64::new(0.0, 0.0), Some(Complex64::new(1.0 / j.b(1), 0.0)))
}

fn three_term(
    j: &JacobiMatrix,
    z: Complex64,
    upto: usize,
    first: Complex64,
    second: Option<Complex64>,
) -> Result<Vec<Complex64>> {
    if upto == 0 || upto > j.size() {
        return Err(Error::InvalidInput(format!("upto = {upto} outside 1..={}", j.size())));
    }
    let mut out = Vec::with_capacity(upto);
    out.push(first);
    if upto == 1 {
        return Ok(out);
    }
    out.push(second.unwrap_or_else(|| (z - j.q(1)) * first / j.b(1)));
    for k in 2..upto {
        // out[k] = pi_{k+1}
        let next = ((z - j.q(k)) * out[k - 1] - j.b(k - 1) * out[k - 2]) / j.b(k);
        out.push(next);
    }
    Ok(out)
}
