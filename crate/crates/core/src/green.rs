//! Weyl m-functions, the sub-operators on either side of a site, and the site
//! Green function `G(z, n) = <e_n, (J - z)^{-1} e_n>`.
//!
//! `G` is computed two independent ways: from the continued fractions of the
//! two sub-operators,
//!
//! ```text
//! G(z, n) = -1 / (b_n^2 m_n^+(z) + b_{n-1}^2 m_n^-(z) + z - q_n),
//! ```
//!
//! and from the eigen-expansion `sum_j v_j(n)^2 / (t_j - z)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::JacobiMatrix;
use crate::eigen::{eigensystem, eigenvalues, measure_from_components, site_measure, spectral_measure, sturm_count, SpectralMeasure};
use crate::error::{Error, Result};
use crate::util::{merge_close, spread};

/// Relative tolerance (times the spectral spread) below which two
/// sub-operator eigenvalues count as one common pole.
pub const MERGE_REL_TOL: f64 = 1e-9;

/// Zero/pole pairs of a Krein product closer than this (times the spread of
/// all points) cancel.
pub const KREIN_CANCEL_REL: f64 = 1e-12;

/// `f(z) = a z + b + sum_k r_k / (p_k - z)` with `a >= 0`, `r_k > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HerglotzRational {
    pub a: f64,
    pub b: f64,
    pub poles: Vec<f64>,
    pub residues: Vec<f64>,
}

impl HerglotzRational {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let tail: Complex64 = self.poles.iter().zip(&self.residues).map(|(&p, &r)| r / (p - z)).sum();
        self.a * z + self.b + tail
    }

    pub fn residue_sum(&self) -> f64 {
        self.residues.iter().sum()
    }
}

/// Weyl function `<e_1, (J - z)^{-1} e_1>` by the backward continued fraction
/// `m = 1 / (q_1 - z - b_1^2 m_1^+)`.
pub fn weyl_m(j: &JacobiMatrix, z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 {
        real_pole_guard(j, z.re)?;
    }
    let diag = j.diag();
    let off = j.offdiag();
    let n = diag.len();
    let zero = Complex64::new(0.0, 0.0);
    // `None` stands for an infinite tail value: z sits on a pole of an
    // inner m-function, which forces the next level to vanish.
    let mut m = Some(zero);
    for i in (0..n).rev() {
        let coupling = if i + 1 < n { off[i] * off[i] } else { 0.0 };
        m = match m {
            None => Some(zero),
            Some(tail) => {
                let den = diag[i] - z - coupling * tail;
                if den == zero {
                    None
                } else {
                    Some(den.inv())
                }
            }
        };
    }
    let m = m.ok_or_else(|| Error::pole(z))?;
    if !m.is_finite() {
        return Err(Error::pole(z));
    }
    Ok(m)
}

fn real_pole_guard(j: &JacobiMatrix, x: f64) -> Result<()> {
    let (lo, hi) = j.gershgorin();
    let delta = 1e-12 * (hi - lo).max(f64::MIN_POSITIVE);
    if sturm_count(j, x - delta) != sturm_count(j, x + delta) {
        return Err(Error::pole(Complex64::new(x, 0.0)));
    }
    Ok(())
}

/// Same quantity as [`weyl_m`] from the spectral measure.
pub fn weyl_m_spectral(j: &JacobiMatrix, z: Complex64) -> Result<Complex64> {
    Ok(spectral_measure(j)?.stieltjes(z))
}

/// Rows and columns `n+1..=N`.
pub fn submatrix_plus(j: &JacobiMatrix, n: usize) -> Result<JacobiMatrix> {
    let size = j.size();
    if n == 0 || n + 1 > size {
        return Err(Error::InvalidSite { site: n, size });
    }
    JacobiMatrix::new(j.diag()[n..].to_vec(), j.offdiag()[n..].to_vec())
}

/// Leading `(n-1) x (n-1)` block.
pub fn submatrix_minus(j: &JacobiMatrix, n: usize) -> Result<JacobiMatrix> {
    if n < 2 || n > j.size() {
        return Err(Error::InvalidSite { site: n, size: j.size() });
    }
    j.leading(n - 1)
}

/// `m_n^-(z)`, anchored at `e_{n-1}` (the last vector of the leading block);
/// identically zero at `n = 1`.
pub fn weyl_m_minus(j: &JacobiMatrix, n: usize, z: Complex64) -> Result<Complex64> {
    if n == 1 {
        if j.size() == 0 {
            return Err(Error::InvalidSite { site: n, size: 0 });
        }
        return Ok(Complex64::new(0.0, 0.0));
    }
    weyl_m(&submatrix_minus(j, n)?.reversed(), z)
}

/// `m_n^+(z)`, anchored at `e_{n+1}`.
pub fn weyl_m_plus(j: &JacobiMatrix, n: usize, z: Complex64) -> Result<Complex64> {
    weyl_m(&submatrix_plus(j, n)?, z)
}

/// Site Green function from the sub-operator m-functions. Valid for every
/// site `1..=N`; the `b_n` term is absent at `n = N`.
pub fn green(j: &JacobiMatrix, n: usize, z: Complex64) -> Result<Complex64> {
    let size = j.size();
    if n == 0 || n > size {
        return Err(Error::InvalidSite { site: n, size });
    }
    let mut den = z - j.q(n);
    if n < size {
        den += j.b(n) * j.b(n) * weyl_m_plus(j, n, z)?;
    }
    if n > 1 {
        den += j.b(n - 1) * j.b(n - 1) * weyl_m_minus(j, n, z)?;
    }
    if den == Complex64::new(0.0, 0.0) || !den.is_finite() {
        return Err(Error::DenominatorZero { re: z.re, im: z.im });
    }
    Ok(-den.inv())
}

/// Site Green function from the eigen-expansion of `J`.
pub fn green_eigen(j: &JacobiMatrix, n: usize, z: Complex64) -> Result<Complex64> {
    Ok(site_measure(j, n)?.stieltjes(z))
}

/// Pole/zero data of `G(., n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenFunction {
    pub site: usize,
    /// `pi_n^2 rho` restricted to nonzero weights.
    pub measure: SpectralMeasure,
    /// Eigenvalues of `J_n^-` and `J_n^+`, common ones merged.
    pub zeros: Vec<f64>,
}

impl GreenFunction {
    pub fn new(j: &JacobiMatrix, n: usize) -> Result<Self> {
        let measure = site_measure(j, n)?;
        let mut zeros = Vec::new();
        if n > 1 {
            zeros.extend(eigenvalues(&submatrix_minus(j, n)?));
        }
        if n < j.size() {
            zeros.extend(eigenvalues(&submatrix_plus(j, n)?));
        }
        zeros.sort_by(f64::total_cmp);
        let tol = MERGE_REL_TOL * spread(&measure.nodes).max(spread(&zeros));
        let zeros = merge_close(&zeros, tol);
        Ok(Self { site: n, measure, zeros })
    }

    pub fn value_at(&self, z: Complex64) -> Complex64 {
        self.measure.stieltjes(z)
    }

    pub fn poles(&self) -> &[f64] {
        &self.measure.nodes
    }

    /// `Res_{t_j} G = -pi_n(t_j)^2 rho{t_j}`.
    pub fn residues_at_poles(&self) -> Vec<f64> {
        self.measure.weights.iter().map(|w| -w).collect()
    }
}

/// Partial-fraction form of `-1 / G(z, n)` together with the poles that were
/// shared by `J_n^-` and `J_n^+`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFractions {
    pub function: HerglotzRational,
    /// Poles built from a common eigenvalue of both sub-operators.
    pub merged: Vec<f64>,
}

/// `-1/G(z, n) = z - q_n + sum_k eta_k / (alpha_k - z)` where the `alpha_k`
/// run over both sub-operator spectra and the `eta_k` are their anchored
/// measure weights scaled by `b_{n-1}^2` or `b_n^2`.
pub fn green_inverse_partial_fractions(j: &JacobiMatrix, n: usize) -> Result<PartialFractions> {
    let size = j.size();
    if n == 0 || n > size {
        return Err(Error::InvalidSite { site: n, size });
    }
    let mut terms: Vec<(f64, f64)> = Vec::new();
    if n > 1 {
        let minus = submatrix_minus(j, n)?;
        let eig = eigensystem(&minus)?;
        let scale = j.b(n - 1).powi(2);
        let m = measure_from_components(&eig.eigenvalues, &eig.last_components());
        terms.extend(m.nodes.iter().zip(&m.weights).map(|(&t, &w)| (t, scale * w)));
    }
    if n < size {
        let plus = submatrix_plus(j, n)?;
        let m = spectral_measure(&plus)?;
        let scale = j.b(n).powi(2);
        terms.extend(m.nodes.iter().zip(&m.weights).map(|(&t, &w)| (t, scale * w)));
    }
    terms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let nodes: Vec<f64> = terms.iter().map(|t| t.0).collect();
    let tol = MERGE_REL_TOL * spread(&eigenvalues(j)).max(spread(&nodes));
    let mut poles: Vec<f64> = Vec::new();
    let mut residues: Vec<f64> = Vec::new();
    let mut merged = Vec::new();
    for (t, w) in terms {
        match poles.last() {
            Some(&last) if t - last <= tol => {
                *residues.last_mut().unwrap() += w;
                if merged.last() != Some(&last) {
                    merged.push(last);
                }
            }
            _ => {
                poles.push(t);
                residues.push(w);
            }
        }
    }
    Ok(PartialFractions {
        function: HerglotzRational { a: 1.0, b: -j.q(n), poles, residues },
        merged,
    })
}

/// Krein-type product `C (z - eta_0)/(z - lambda_0) prod (1 - z/eta_k)(1 - z/lambda_k)^{-1}`
/// over interlacing zeros and poles, with the leading pair chosen as the one
/// nearest the origin so that a node at zero is absorbed there.
#[derive(Debug, Clone, PartialEq)]
pub struct KreinProduct {
    /// Factors ordered outward from the leading pair; `None` marks an
    /// unpaired extreme pole or zero.
    pairs: Vec<(Option<f64>, Option<f64>)>,
}

impl KreinProduct {
    pub fn new(zeros: &[f64], poles: &[f64]) -> Result<Self> {
        let mut sorted: Vec<(f64, bool)> =
            zeros.iter().map(|&z| (z, true)).chain(poles.iter().map(|&p| (p, false))).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let all: Vec<f64> = sorted.iter().map(|p| p.0).collect();
        let tol = KREIN_CANCEL_REL * spread(&all);
        // A zero and a pole closer than `tol` form a removable factor that
        // equals one to working precision; drop both.
        let mut merged: Vec<(f64, bool)> = Vec::with_capacity(sorted.len());
        for item in sorted {
            match merged.last() {
                Some(&(v, kind)) if kind != item.1 && item.0 - v <= tol => {
                    merged.pop();
                }
                _ => merged.push(item),
            }
        }
        for w in merged.windows(2) {
            if w[0].1 == w[1].1 || !(w[0].0 < w[1].0) {
                return Err(Error::InterlacingViolation(format!(
                    "zeros and poles must strictly alternate; {} and {} do not",
                    w[0].0, w[1].0
                )));
            }
        }
        let zeros: Vec<f64> = merged.iter().filter(|p| p.1).map(|p| p.0).collect();
        let poles: Vec<f64> = merged.iter().filter(|p| !p.1).map(|p| p.0).collect();
        if zeros.len().abs_diff(poles.len()) > 1 {
            return Err(Error::InterlacingViolation("zero and pole counts differ by more than one".into()));
        }
        // Pair consecutive (pole, zero) or (zero, pole) starting from the
        // lowest element; a leftover top element stays single.
        let mut pairs: Vec<(Option<f64>, Option<f64>)> = merged
            .chunks(2)
            .map(|c| {
                let (mut zero, mut pole) = (None, None);
                for &(v, is_zero) in c {
                    if is_zero {
                        zero = Some(v);
                    } else {
                        pole = Some(v);
                    }
                }
                (zero, pole)
            })
            .collect();
        let center = |p: &(Option<f64>, Option<f64>)| {
            p.0.map_or(f64::INFINITY, f64::abs).min(p.1.map_or(f64::INFINITY, f64::abs))
        };
        let k0 = (0..pairs.len()).min_by(|&a, &b| center(&pairs[a]).total_cmp(&center(&pairs[b]))).unwrap_or(0);
        // Reorder outward from k0: k0, k0-1, k0+1, k0-2, ...
        let mut order = vec![k0];
        for d in 1..pairs.len() {
            if k0 >= d {
                order.push(k0 - d);
            }
            if k0 + d < pairs.len() {
                order.push(k0 + d);
            }
        }
        pairs = order.into_iter().map(|i| pairs[i]).collect();
        Ok(Self { pairs })
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    /// Unnormalized product (`C = 1`) over the `retain` innermost factors.
    pub fn eval_truncated(&self, z: Complex64, retain: usize) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        let mut acc = one;
        for (idx, &(zero, pole)) in self.pairs.iter().take(retain).enumerate() {
            let leading = idx == 0;
            if let Some(e) = zero {
                acc *= if leading || e == 0.0 { z - e } else { one - z / e };
            }
            if let Some(l) = pole {
                acc /= if leading || l == 0.0 { z - l } else { one - z / l };
            }
        }
        acc
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.eval_truncated(z, self.pairs.len())
    }
}

/// Product for the Weyl function of `J`: poles `sigma(J)`, zeros
/// `sigma(J_1^+)`, with the constant fixed by matching [`weyl_m`] at `z = i`.
pub fn weyl_krein_product(j: &JacobiMatrix) -> Result<(KreinProduct, f64)> {
    let poles = eigenvalues(j);
    let zeros = if j.size() > 1 { eigenvalues(&submatrix_plus(j, 1)?) } else { Vec::new() };
    let product = KreinProduct::new(&zeros, &poles)?;
    let z0 = Complex64::new(0.0, 1.0);
    let c = weyl_m(j, z0)? / product.eval(z0);
    Ok((product, c.re))
}

pub fn krein_product_eval(zeros: &[f64], poles: &[f64], c: f64, z: Complex64) -> Result<Complex64> {
    Ok(c * KreinProduct::new(zeros, poles)?.eval(z))
}

/// Outcome of [`check_green_candidate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenCandidateReport {
    pub herglotz: bool,
    pub normalized: bool,
    pub cardinality: bool,
    pub min_residue: f64,
    pub linear_coeff: f64,
    pub available_poles: usize,
    pub note: String,
}

impl GreenCandidateReport {
    pub fn all_pass(&self) -> bool {
        self.herglotz && self.normalized && self.cardinality
    }
}

/// Checks that `f` (the data of `-1/G`) could be the `n`-th Green function of
/// a finite Jacobi matrix: nonnegative residues, unit linear coefficient, and
/// enough poles to carve out an `(n-1)`-element block.
pub fn check_green_candidate(f: &HerglotzRational, n: usize) -> GreenCandidateReport {
    let min_residue = f.residues.iter().copied().fold(f64::INFINITY, f64::min);
    GreenCandidateReport {
        herglotz: f.residues.iter().all(|&r| r >= 0.0) && f.a >= 0.0,
        normalized: (f.a - 1.0).abs() <= 1e-12,
        cardinality: n >= 1 && f.poles.len() >= n - 1,
        min_residue,
        linear_coeff: f.a,
        available_poles: f.poles.len(),
        note: "polynomial density is not checkable on a finite truncation; only pole cardinality is tested".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_chain_matrix, sample_off_axis};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn jm(d: &[f64], o: &[f64]) -> JacobiMatrix {
        JacobiMatrix::new(d.to_vec(), o.to_vec()).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Dense resolvent entry by Gaussian elimination on `J - z`.
    fn dense_resolvent(j: &JacobiMatrix, row: usize, z: Complex64) -> Complex64 {
        let n = j.size();
        let mut a = vec![vec![c(0.0, 0.0); n + 1]; n];
        for i in 0..n {
            a[i][i] = j.diag()[i] - z;
            if i + 1 < n {
                a[i][i + 1] = c(j.offdiag()[i], 0.0);
                a[i + 1][i] = c(j.offdiag()[i], 0.0);
            }
        }
        a[row][n] = c(1.0, 0.0);
        for col in 0..n {
            let piv = (col..n).max_by(|&x, &y| a[x][col].norm().total_cmp(&a[y][col].norm())).unwrap();
            a.swap(col, piv);
            for r in 0..n {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    for k in col..=n {
                        let t = a[col][k];
                        a[r][k] -= f * t;
                    }
                }
            }
        }
        a[row][n] / a[row][row]
    }

    #[test]
    fn weyl_m_examples() {
        let m = weyl_m(&jm(&[0.0], &[]), c(0.0, 1.0)).unwrap();
        assert!((m - c(0.0, 1.0)).norm() < 1e-15);
        let m = weyl_m(&jm(&[0.0, 0.0], &[1.0]), c(0.0, 0.0)).unwrap();
        assert!(m.norm() < 1e-15);
        assert!(weyl_m(&jm(&[0.0, 0.0], &[1.0]), c(1.0, 0.0)).is_err());
    }

    #[test]
    fn weyl_m_routes_agree_and_are_herglotz() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let j = random_chain_matrix(&mut rng, 12);
            for z in sample_off_axis(&mut rng, 5) {
                let a = weyl_m(&j, z).unwrap();
                let b = weyl_m_spectral(&j, z).unwrap();
                assert!((a - b).norm() <= 1e-12 * a.norm());
                assert_eq!(a.im > 0.0, z.im > 0.0);
            }
        }
    }

    #[test]
    fn submatrices() {
        let j = jm(&[-2.0; 3], &[1.0; 2]);
        assert_eq!(submatrix_plus(&j, 1).unwrap(), jm(&[-2.0, -2.0], &[1.0]));
        assert_eq!(submatrix_plus(&j, 2).unwrap(), jm(&[-2.0], &[]));
        assert!(submatrix_plus(&j, 3).is_err());
        assert_eq!(submatrix_minus(&j, 3).unwrap(), jm(&[-2.0, -2.0], &[1.0]));
        assert_eq!(submatrix_minus(&j, 2).unwrap(), jm(&[-2.0], &[]));
        assert!(submatrix_minus(&j, 1).is_err());
    }

    #[test]
    fn m_minus_examples() {
        let j = jm(&[-2.0; 4], &[1.0; 3]);
        assert_eq!(weyl_m_minus(&j, 1, c(0.3, 2.0)).unwrap(), c(0.0, 0.0));
        let z = c(0.5, 1.0);
        let m2 = weyl_m_minus(&j, 2, z).unwrap();
        assert!((m2 - (c(-2.0, 0.0) - z).inv()).norm() < 1e-15);
        // Entry (2,2) of the inverse of [[-2-z, 1], [1, -2-z]].
        let z = c(0.0, 1.0);
        let d = c(-2.0, 0.0) - z;
        let expected = d / (d * d - 1.0);
        assert!((weyl_m_minus(&j, 3, z).unwrap() - expected).norm() < 1e-14);
    }

    #[test]
    fn green_site_one_is_weyl_m() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let j = random_chain_matrix(&mut rng, 9);
        let z = c(-1.0, 0.7);
        assert!((green(&j, 1, z).unwrap() - weyl_m(&j, z).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn green_two_by_two_against_dense_inverse() {
        let j = jm(&[0.0, 0.0], &[1.0]);
        let z = c(0.0, 2.0);
        // -1/(1 * 1/(0 - z) + z - 0)
        let formula = -(1.0 / (c(0.0, 0.0) - z) + z).inv();
        for (site, route) in [(1, green(&j, 1, z).unwrap()), (1, green_eigen(&j, 1, z).unwrap())] {
            assert!((route - formula).norm() < 1e-15);
            assert!((route - dense_resolvent(&j, site - 1, z)).norm() < 1e-15);
        }
    }

    #[test]
    fn green_matches_dense_resolvent_at_every_site() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let j = random_chain_matrix(&mut rng, 8);
        for n in 1..=8 {
            for z in sample_off_axis(&mut rng, 4) {
                let dense = dense_resolvent(&j, n - 1, z);
                assert!((green(&j, n, z).unwrap() - dense).norm() < 1e-12 * dense.norm());
                assert!((green_eigen(&j, n, z).unwrap() - dense).norm() < 1e-12 * dense.norm());
            }
        }
    }

    #[test]
    fn green_asymptotics() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let j = random_chain_matrix(&mut rng, 10);
        for n in [1, 4, 10] {
            for y in [1e3, 1e4, 1e5, 1e6] {
                let z = c(0.0, y);
                let ratio = -(z * green(&j, n, z).unwrap());
                assert!((ratio - 1.0).norm() <= 20.0 * j.norm_bound() / y);
            }
        }
    }

    #[test]
    fn green_function_zeros_interlace_poles() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let j = random_chain_matrix(&mut rng, 11);
            for n in 1..=11 {
                let g = GreenFunction::new(&j, n).unwrap();
                let poles = g.poles();
                assert_eq!(g.zeros.len() + 1, poles.len());
                for (k, z) in g.zeros.iter().enumerate() {
                    assert!(poles[k] < *z && *z < poles[k + 1]);
                }
                assert!(g.residues_at_poles().iter().all(|&r| r < 0.0));
                let z = c(0.2, 0.9);
                assert!(g.value_at(z).im > 0.0);
            }
        }
    }

    #[test]
    fn removable_pole_of_symmetric_matrix() {
        let j = jm(&[0.0; 3], &[1.0; 2]);
        let g = GreenFunction::new(&j, 2).unwrap();
        assert_eq!(g.poles().len(), 2);
        assert_eq!(g.zeros.len(), 1);
        assert!(g.zeros[0].abs() < 1e-15);
    }

    #[test]
    fn partial_fractions_riccati_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let j = random_chain_matrix(&mut rng, 6);
        let pf = green_inverse_partial_fractions(&j, 1).unwrap();
        let plus = spectral_measure(&submatrix_plus(&j, 1).unwrap()).unwrap();
        assert_eq!(pf.function.b, -j.q(1));
        for (k, (&p, &r)) in pf.function.poles.iter().zip(&pf.function.residues).enumerate() {
            assert!((p - plus.nodes[k]).abs() < 1e-14);
            assert!((r - j.b(1).powi(2) * plus.weights[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn partial_fractions_merge_uniform_center() {
        let j = jm(&[-2.0; 3], &[1.0; 2]);
        let pf = green_inverse_partial_fractions(&j, 2).unwrap();
        assert_eq!(pf.function.poles, vec![-2.0]);
        assert!((pf.function.residues[0] - 2.0).abs() < 1e-14);
        assert_eq!(pf.merged, vec![-2.0]);
    }

    #[test]
    fn partial_fractions_reconstruct_inverse_green() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let j = random_chain_matrix(&mut rng, 9);
            for n in 1..=9 {
                let pf = green_inverse_partial_fractions(&j, n).unwrap();
                let expected = j.b(n - 1).powi(2) + j.b(n).powi(2);
                assert!((pf.function.residue_sum() - expected).abs() < 1e-12 * expected.max(1.0));
                for z in sample_off_axis(&mut rng, 20) {
                    let lhs = pf.function.eval(z);
                    let rhs = -green(&j, n, z).unwrap().inv();
                    assert!((lhs - rhs).norm() <= 1e-9 * rhs.norm());
                }
            }
        }
    }

    #[test]
    fn krein_two_by_two() {
        let j = jm(&[0.0, 0.0], &[1.0]);
        let p = KreinProduct::new(&[0.0], &[-1.0, 1.0]).unwrap();
        let z0 = c(0.0, 1.0);
        let cst = weyl_m(&j, z0).unwrap() / p.eval(z0);
        assert!(cst.im.abs() < 1e-15);
        for z in [c(0.5, 0.5), c(-2.0, 0.1), c(3.0, -1.0)] {
            let expected = -z / (z * z - 1.0);
            assert!((krein_product_eval(&[0.0], &[-1.0, 1.0], cst.re, z).unwrap() - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn krein_single_pair_and_violation() {
        let z = c(0.3, 0.4);
        let v = krein_product_eval(&[2.0], &[1.0], 3.0, z).unwrap();
        let expected = 3.0 * (z - 2.0) / (z - 1.0);
        assert!((v - expected).norm() < 1e-15 * expected.norm() * 4.0);
        assert!(KreinProduct::new(&[0.0, 0.5], &[-1.0, 1.0]).is_err());
        assert!(KreinProduct::new(&[], &[-1.0, 1.0]).is_err());
    }

    #[test]
    fn candidate_checks() {
        let j = jm(&[-2.0, -1.0, -3.0, -2.5], &[1.0, 0.5, 0.7]);
        let pf = green_inverse_partial_fractions(&j, 2).unwrap().function;
        assert!(check_green_candidate(&pf, 2).all_pass());
        let mut bad = pf.clone();
        bad.residues[0] = -bad.residues[0];
        let r = check_green_candidate(&bad, 2);
        assert!(!r.herglotz && r.normalized);
        let mut bad = pf.clone();
        bad.a = 2.0;
        assert!(!check_green_candidate(&bad, 2).normalized);
        assert!(!check_green_candidate(&pf, 5).cardinality);
    }
}
