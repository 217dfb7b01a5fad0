//! Comparison of the spectra of `J` and its perturbation at site `n`.
//!
//! The ratio `M_n(z) = G(z, n) / G~(z, n)` satisfies
//!
//! ```text
//! M_n(z) = theta^2 + (1 - theta^2) (gamma - z) G(z, n)
//! ```
//!
//! and, at truncation scale, equals the finite product
//! `prod (z - mu_k) / (z - lambda_k)` over the noncommon eigenvalues.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::{apply_perturbation, JacobiMatrix, Perturbation};
use crate::eigen::{eigensystem, eigenvalues, EigenDecomposition};
use crate::error::{Error, Result};
use crate::green::{green, green_eigen};
use crate::util::spread;

/// Eigenvalues of `J` and `J~` closer than this times the spectral spread are
/// treated as one common eigenvalue.
pub const COMMON_REL_TOL: f64 = 1e-9;

/// Both spectra, their common part, and the enumeration pairing each
/// noncommon `lambda` with one noncommon `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSpectraData {
    pub site: usize,
    pub theta: f64,
    /// Absent when `theta = 1`.
    pub gamma: Option<f64>,
    pub spectrum_j: Vec<f64>,
    pub spectrum_jt: Vec<f64>,
    pub common: Vec<f64>,
    pub lambda_noncommon: Vec<f64>,
    pub mu_noncommon: Vec<f64>,
    /// `(i, j)`: `lambda_noncommon[i]` is paired with `mu_noncommon[j]`.
    pub pairing: Vec<(usize, usize)>,
}

impl TwoSpectraData {
    /// Paired values `(lambda_k, mu_k)` in pairing order.
    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.pairing.iter().map(|&(i, j)| (self.lambda_noncommon[i], self.mu_noncommon[j]))
    }

    pub fn spread(&self) -> f64 {
        let all: Vec<f64> = self.spectrum_j.iter().chain(&self.spectrum_jt).copied().collect();
        spread(&all)
    }

    pub fn gamma_is_common(&self) -> bool {
        let tol = COMMON_REL_TOL * self.spread();
        self.gamma.is_some_and(|g| self.common.iter().any(|c| (c - g).abs() <= tol))
    }

    /// Sum of `|mu_k - lambda_k|` over all pairs.
    pub fn shift_sum(&self) -> f64 {
        self.pairs().map(|(l, m)| (m - l).abs()).sum()
    }
}

/// Splits two sorted spectra into matched (common) values and the two
/// leftover lists.
pub fn match_common(a: &[f64], b: &[f64], tol: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (mut common, mut only_a, mut only_b) = (Vec::new(), Vec::new(), Vec::new());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if (a[i] - b[j]).abs() <= tol {
            common.push(a[i]);
            i += 1;
            j += 1;
        } else if a[i] < b[j] {
            only_a.push(a[i]);
            i += 1;
        } else {
            only_b.push(b[j]);
            j += 1;
        }
    }
    only_a.extend_from_slice(&a[i..]);
    only_b.extend_from_slice(&b[j..]);
    (common, only_a, only_b)
}

/// Common and noncommon parts of two spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct CommonSplit {
    pub common: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
    pub gamma_common: bool,
    /// Close matches kept apart because `N` rules them out as common.
    pub demoted: usize,
}

/// Slack on values of `N` relative to `max(1, theta^2)`.
const N_VALUE_TOL: f64 = 1e-8;

/// Values within `common_rel` times the spread are matched as common, except
/// when the product over the remaining values is far from `theta^2` there. Such near-coincidences come from eigenvectors
/// that almost vanish at the perturbed site, and they are kept as a
/// noncommon pair. The reference `theta^2` is the supplied `theta`, else the
/// product at `gamma`; with neither, every close match is kept. Demotions
/// that leave lists `pairable` rejects are skipped.
pub fn resolve_common<F>(
    lambdas: &[f64],
    mus: &[f64],
    gamma: Option<f64>,
    common_rel: f64,
    theta: Option<f64>,
    pairable: F,
) -> CommonSplit
where
    F: Fn(&[f64], &[f64]) -> bool,
{
    let mut l = lambdas.to_vec();
    let mut m = mus.to_vec();
    l.sort_by(f64::total_cmp);
    m.sort_by(f64::total_cmp);
    let all: Vec<f64> = l.iter().chain(&m).copied().collect();
    let tol = common_rel * spread(&all);
    let mut matched = Vec::new();
    let (mut lnc, mut mnc) = (Vec::new(), Vec::new());
    let (mut i, mut j) = (0, 0);
    while i < l.len() && j < m.len() {
        if (l[i] - m[j]).abs() <= tol {
            matched.push((l[i], m[j]));
            i += 1;
            j += 1;
        } else if l[i] < m[j] {
            lnc.push(l[i]);
            i += 1;
        } else {
            mnc.push(m[j]);
            j += 1;
        }
    }
    lnc.extend_from_slice(&l[i..]);
    mnc.extend_from_slice(&m[j..]);
    let is_gamma = |x: f64| gamma.is_some_and(|g| (x - g).abs() <= tol);
    let gamma_common = matched.iter().any(|&(a, _)| is_gamma(a));
    let n_at = |lnc: &[f64], mnc: &[f64], x: f64| -> f64 { lnc.iter().zip(mnc).map(|(&a, &b)| (x - b) / (x - a)).product() };
    let mut demoted = 0;
    if gamma.is_some() {
        loop {
            let reference = match (theta, gamma) {
                (Some(t), _) => t * t,
                (None, Some(g)) if !gamma_common && !lnc.contains(&g) => n_at(&lnc, &mnc, g),
                _ => break,
            };
            let slack = N_VALUE_TOL * reference.abs().max(1.0);
            let mut suspects: Vec<(usize, f64)> = matched
                .iter()
                .enumerate()
                .filter(|(_, &(a, _))| !is_gamma(a))
                .map(|(k, &(a, _))| (k, (n_at(&lnc, &mnc, a) - reference).abs()))
                .filter(|&(_, dev)| !(dev <= slack))
                .collect();
            suspects.sort_by(|x, y| y.1.total_cmp(&x.1));
            let accepted = suspects.iter().find_map(|&(k, _)| {
                let (a, b) = matched[k];
                let (mut l2, mut m2) = (lnc.clone(), mnc.clone());
                l2.insert(l2.partition_point(|&x| x < a), a);
                m2.insert(m2.partition_point(|&x| x < b), b);
                pairable(&l2, &m2).then_some((k, l2, m2))
            });
            let Some((k, l2, m2)) = accepted else { break };
            matched.remove(k);
            (lnc, mnc) = (l2, m2);
            demoted += 1;
        }
    }
    CommonSplit { common: matched.into_iter().map(|p| p.0).collect(), lambdas: lnc, mus: mnc, gamma_common, demoted }
}

/// Pairing for `theta` in `(0, 1)`: with `gamma` inserted among the
/// `lambdas`, each of the resulting gaps holds exactly one `mu`. Below
/// `gamma` that `mu` belongs to the gap's left end, above it to the right.
pub fn gamma_barrier_pairing(lambdas: &[f64], mus: &[f64], gamma: f64) -> Result<Vec<(usize, usize)>> {
    if lambdas.len() != mus.len() {
        return Err(Error::InterlacingViolation(format!(
            "{} noncommon eigenvalues of J but {} of the perturbed operator",
            lambdas.len(),
            mus.len()
        )));
    }
    if lambdas.iter().any(|&l| l == gamma) {
        return Err(Error::GammaIsPole(gamma));
    }
    let below = lambdas.partition_point(|&l| l < gamma);
    let mut points: Vec<f64> = lambdas.to_vec();
    points.insert(below, gamma);
    let mut pairing = Vec::with_capacity(lambdas.len());
    let mut next_mu = 0;
    for g in 0..lambdas.len() {
        let (lo, hi) = (points[g], points[g + 1]);
        let inside: Vec<usize> = (next_mu..mus.len()).take_while(|&j| mus[j] < hi).collect();
        if mus.get(next_mu).is_some_and(|&m| m <= lo) || inside.len() != 1 || mus[inside[0]] <= lo {
            return Err(Error::InterlacingViolation(format!(
                "gap ({lo}, {hi}) must contain exactly one perturbed eigenvalue, found {}",
                inside.iter().filter(|&&j| mus[j] > lo).count()
            )));
        }
        let mu = inside[0];
        next_mu = mu + 1;
        // Below gamma the gap starts at lambdas[g]; above it, the inserted
        // barrier shifts indices so the gap ends at lambdas[g].
        pairing.push((g, mu));
    }
    Ok(pairing)
}

/// Index pairing of the sorted noncommon lists. Since
/// `J~ - gamma = D (J - gamma) D` with `D = diag(1, .., theta, .., 1)`,
/// Ostrowski's theorem puts `mu_k - gamma = s_k (lambda_k - gamma)` with `s_k`
/// between 1 and `theta^2`; at `theta = 1` every shift has the sign of `h`.
/// Both are checked. Common values occupy the same index in both spectra, so
/// removing them keeps the indices aligned.
pub fn ordered_pairing(lambdas: &[f64], mus: &[f64], p: &Perturbation) -> Result<Vec<(usize, usize)>> {
    if lambdas.len() != mus.len() {
        return Err(Error::InterlacingViolation(format!(
            "{} noncommon eigenvalues of J but {} of the perturbed operator",
            lambdas.len(),
            mus.len()
        )));
    }
    let all: Vec<f64> = lambdas.iter().chain(mus).copied().collect();
    let slack = 1e-12 * spread(&all).max(1.0);
    let t2 = p.theta() * p.theta();
    for (&l, &m) in lambdas.iter().zip(mus) {
        let ok = match p.gamma() {
            Ok(g) => {
                let (lo, hi) = if t2 < 1.0 { (t2, 1.0) } else { (1.0, t2) };
                let (dl, dm) = (l - g, m - g);
                dl * dm > 0.0 && dm.abs() >= lo * dl.abs() - slack && dm.abs() <= hi * dl.abs() + slack
            }
            Err(_) => (m - l) * p.h() >= -slack,
        };
        if !ok {
            return Err(Error::InterlacingViolation(format!(
                "perturbed eigenvalue {m} is out of the range allowed for {l}"
            )));
        }
    }
    Ok((0..lambdas.len()).map(|k| (k, k)).collect())
}

pub fn classify_two_spectra(j: &JacobiMatrix, p: &Perturbation) -> Result<TwoSpectraData> {
    let jt = apply_perturbation(j, p)?;
    let spectrum_j = eigenvalues(j);
    let spectrum_jt = eigenvalues(&jt);
    let gamma = p.gamma().ok();
    let CommonSplit { common, lambdas: lambda_noncommon, mus: mu_noncommon, .. } =
        resolve_common(&spectrum_j, &spectrum_jt, gamma, COMMON_REL_TOL, Some(p.theta()), |l, m| pairing_for(l, m, p).is_ok());
    let pairing = pairing_for(&lambda_noncommon, &mu_noncommon, p)?;
    Ok(TwoSpectraData {
        site: p.site(),
        theta: p.theta(),
        gamma,
        spectrum_j,
        spectrum_jt,
        common,
        lambda_noncommon,
        mu_noncommon,
        pairing,
    })
}

/// The gamma-gap rule for `theta < 1`, falling back to the index pairing
/// when rounding has merged a value with a gap end (the two agree otherwise).
fn pairing_for(lambdas: &[f64], mus: &[f64], p: &Perturbation) -> Result<Vec<(usize, usize)>> {
    match p.gamma() {
        Ok(g) if p.theta() < 1.0 => gamma_barrier_pairing(lambdas, mus, g).or_else(|e| ordered_pairing(lambdas, mus, p).map_err(|_| e)),
        _ => ordered_pairing(lambdas, mus, p),
    }
}

/// `M_n(z) = G(z, n) / G~(z, n)`, both through the sub-operator formula.
pub fn ratio_m(j: &JacobiMatrix, p: &Perturbation, z: Complex64) -> Result<Complex64> {
    let jt = apply_perturbation(j, p)?;
    let g = green(j, p.site(), z)?;
    let gt = green(&jt, p.site(), z)?;
    if gt == Complex64::new(0.0, 0.0) {
        return Err(Error::pole(z));
    }
    Ok(g / gt)
}

/// Right-hand side of the master identity, with `G` from the eigen-expansion.
pub fn master_rhs(j: &JacobiMatrix, p: &Perturbation, z: Complex64) -> Result<Complex64> {
    let gamma = p.gamma()?;
    let t2 = p.theta() * p.theta();
    Ok(t2 + (1.0 - t2) * (gamma - z) * green_eigen(j, p.site(), z)?)
}

/// `|M_n(z) - theta^2 - (1 - theta^2)(gamma - z) G(z, n)|`.
pub fn master_formula_residual(j: &JacobiMatrix, p: &Perturbation, z: Complex64) -> Result<f64> {
    let rhs = master_rhs(j, p, z)?;
    Ok((ratio_m(j, p, z)? - rhs).norm())
}

pub fn product_form_eval(data: &TwoSpectraData, z: Complex64) -> Complex64 {
    data.pairs().map(|(l, m)| (z - m) / (z - l)).product()
}

/// `(d lambda / d theta, d lambda / d h)` for eigenvalue `k` (0-based) of the
/// perturbed operator.
pub fn eigenvalue_derivatives(j: &JacobiMatrix, p: &Perturbation, k: usize) -> Result<(f64, f64)> {
    let eig = eigensystem(&apply_perturbation(j, p)?)?;
    if k >= eig.len() {
        return Err(Error::InvalidInput(format!("eigenvalue index {k} out of range for size {}", eig.len())));
    }
    derivatives_of(j, p, &eig, k)
}

/// [`eigenvalue_derivatives`] for every eigenvalue, from one decomposition.
pub fn all_eigenvalue_derivatives(j: &JacobiMatrix, p: &Perturbation) -> Result<Vec<(f64, f64)>> {
    let eig = eigensystem(&apply_perturbation(j, p)?)?;
    (0..eig.len()).map(|k| derivatives_of(j, p, &eig, k)).collect()
}

fn derivatives_of(j: &JacobiMatrix, p: &Perturbation, eig: &EigenDecomposition, k: usize) -> Result<(f64, f64)> {
    let vals = &eig.eigenvalues;
    let tol = 1e-13 * spread(vals).max(f64::MIN_POSITIVE);
    let isolated = |other: Option<&f64>| other.is_none_or(|&o| (o - vals[k]).abs() > tol);
    if !isolated(k.checked_sub(1).and_then(|i| vals.get(i))) || !isolated(vals.get(k + 1)) {
        return Err(Error::DegenerateEigenvalue(k));
    }
    let n = p.site();
    let (theta, h) = (p.theta(), p.h());
    // Unit eigenvector; both formulas are homogeneous of degree zero in it.
    let v = eig.vector(k);
    let at = |i: usize| if i >= 1 && i <= v.len() { v[i - 1] } else { 0.0 };
    let norm2: f64 = v.iter().map(|x| x * x).sum();
    let pn = at(n);
    let d_theta = 2.0 * pn / norm2 * (j.b(n - 1) * at(n - 1) + j.b(n) * at(n + 1) + pn * theta * (j.q(n) + h));
    let d_h = theta * theta * pn * pn / norm2;
    Ok((d_theta, d_h))
}

/// Central differences of eigenvalue `k` in `theta` and `h`.
pub fn eigenvalue_derivatives_fd(j: &JacobiMatrix, p: &Perturbation, k: usize, step: f64) -> Result<(f64, f64)> {
    let eig_at = |q: &Perturbation| -> Result<f64> { Ok(eigenvalues(&apply_perturbation(j, q)?)[k]) };
    let (theta, h) = (p.theta(), p.h());
    let d_theta = (eig_at(&p.with_theta(theta + step)?)? - eig_at(&p.with_theta(theta - step)?)?) / (2.0 * step);
    let d_h = (eig_at(&p.with_h(h + step)?)? - eig_at(&p.with_h(h - step)?)?) / (2.0 * step);
    Ok((d_theta, d_h))
}

/// One row of [`shift_sum_diagnostic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftSum {
    pub size: usize,
    pub pairs: usize,
    pub total: f64,
    /// Contribution of the top quarter of pair indices.
    pub tail: f64,
}

/// Shift sum and its tail. Pairs are indexed by mode number, i.e. by
/// increasing `|lambda|`, and the tail is the top quarter of that index range.
pub fn shift_sum_of(data: &TwoSpectraData) -> ShiftSum {
    let mut shifts: Vec<(f64, f64)> = data.pairs().map(|(l, m)| (l, (m - l).abs())).collect();
    shifts.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
    let quarter = shifts.len().div_ceil(4);
    let tail = shifts[shifts.len() - quarter..].iter().map(|s| s.1).sum();
    ShiftSum { size: data.spectrum_j.len(), pairs: shifts.len(), total: shifts.iter().map(|s| s.1).sum(), tail }
}

/// Shift sums across truncation sizes; `matrix_for` builds the truncation.
pub fn shift_sum_diagnostic<F>(matrix_for: F, p: &Perturbation, sizes: &[usize]) -> Result<Vec<ShiftSum>>
where
    F: Fn(usize) -> Result<JacobiMatrix>,
{
    sizes.iter().map(|&size| Ok(shift_sum_of(&classify_two_spectra(&matrix_for(size)?, p)?))).collect()
}

/// `prod (lam - mu_k) / (lam - lambda_k)`; at `gamma` or at a common
/// eigenvalue this is `theta^2 = m_n / (m_n + dm)`.
pub fn mass_ratio_at(data: &TwoSpectraData, lam: f64) -> Result<f64> {
    let tol = COMMON_REL_TOL * data.spread().max(1.0);
    let admissible = data.gamma.is_some_and(|g| (g - lam).abs() <= tol) || data.common.iter().any(|c| (c - lam).abs() <= tol);
    if !admissible {
        return Err(Error::InvalidInput(format!("{lam} is neither gamma nor a common eigenvalue")));
    }
    if data.lambda_noncommon.iter().any(|&l| l == lam) {
        return Err(Error::pole(Complex64::new(lam, 0.0)));
    }
    Ok(data.pairs().map(|(l, m)| (lam - m) / (lam - l)).product())
}
