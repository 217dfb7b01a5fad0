//! Reconstruction of a Jacobi matrix from the spectra of `J` and of its
//! perturbation at site `n`.
//!
//! The pipeline: pair the noncommon eigenvalues into
//! `N(z) = prod (z - mu_k) / (z - lambda_k)`, read off `theta^2 = N(gamma)`,
//! rebuild `G(z, n)` from the master identity, expand `-1/G` in partial
//! fractions, split its poles between the blocks on either side of `n`, and
//! rebuild each block from its spectral measure.

use itertools::Itertools;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::{apply_perturbation, JacobiMatrix, Perturbation};
use crate::direct::{gamma_barrier_pairing, COMMON_REL_TOL};
pub use crate::direct::{resolve_common, CommonSplit};
use crate::eigen::{eigenvalues, site_measure, SpectralMeasure};
use crate::error::{Error, Result};
use crate::green::{green, HerglotzRational};
use crate::par::{par_map, Execution};
use crate::util::{hausdorff, spread};

/// Both reconstructed spectra must lie within this times the spread of the
/// input spectra.
pub const VERIFY_REL_TOL: f64 = 1e-7;
pub const DEFAULT_CAP: usize = 64;
pub const DEFAULT_BETAS: [f64; 3] = [0.25, 0.5, 0.75];

/// Lanczos stops with an error once an off-diagonal falls below this times
/// the node scale.
const BREAKDOWN_REL: f64 = 1e-14;

/// Absolute slack on values of `N`, which lie in `(0, 1)`.
const N_VALUE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// The spectra share no point.
    Disjoint,
    /// The spectra share points, none of them `gamma`.
    Common,
    /// `gamma` is a shared eigenvalue; `theta` must be supplied.
    GammaInSpectrum,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Disjoint => "disjoint",
            Mode::Common => "common",
            Mode::GammaInSpectrum => "gamma-in-spectrum",
        }
    }

    pub fn detect(has_common: bool, gamma_common: bool) -> Self {
        match (has_common, gamma_common) {
            (_, true) => Mode::GammaInSpectrum,
            (true, false) => Mode::Common,
            (false, false) => Mode::Disjoint,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Mode::Disjoint, Mode::Common, Mode::GammaInSpectrum]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown mode '{s}'")))
    }
}

/// Mode implied by two spectra: which points they share, and whether
/// `gamma` is one of them.
pub fn detect_mode(lambdas: &[f64], mus: &[f64], gamma: f64, common_rel: f64, theta: Option<f64>) -> Mode {
    let split = resolve_common(lambdas, mus, Some(gamma), common_rel, theta, |l, m| build_n(l, m, gamma).is_ok());
    Mode::detect(!split.common.is_empty(), split.gamma_common)
}

/// `N(z) = prod (z - mu_k) / (z - lambda_k)` with `mus[k]` paired to
/// `lambdas[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NFunction {
    lambdas: Vec<f64>,
    mus: Vec<f64>,
    gamma: f64,
}

impl NFunction {
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn mus(&self) -> &[f64] {
        &self.mus
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.lambdas.iter().zip(&self.mus).map(|(&l, &m)| (z - m) / (z - l)).product()
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.lambdas.iter().zip(&self.mus).map(|(&l, &m)| (x - m) / (x - l)).product()
    }

    /// `N'(x)` by the product rule with prefix and suffix products.
    pub fn derivative(&self, x: f64) -> f64 {
        let factors: Vec<f64> = self.lambdas.iter().zip(&self.mus).map(|(&l, &m)| (x - m) / (x - l)).collect();
        let k = factors.len();
        let mut suffix = vec![1.0; k + 1];
        for i in (0..k).rev() {
            suffix[i] = suffix[i + 1] * factors[i];
        }
        let mut prefix = 1.0;
        let mut total = 0.0;
        for i in 0..k {
            let (l, m) = (self.lambdas[i], self.mus[i]);
            total += prefix * (m - l) / ((x - l) * (x - l)) * suffix[i + 1];
            prefix *= factors[i];
        }
        total
    }

    /// Residue of `N` at `lambdas[k]`.
    pub fn residue(&self, k: usize) -> f64 {
        let lk = self.lambdas[k];
        let mut r = lk - self.mus[k];
        for (i, (&l, &m)) in self.lambdas.iter().zip(&self.mus).enumerate() {
            if i != k {
                r *= (lk - m) / (lk - l);
            }
        }
        r
    }
}

/// Validates the gamma-gap interlacing of two disjoint sets and pairs them.
pub fn build_n(lambdas: &[f64], mus: &[f64], gamma: f64) -> Result<NFunction> {
    let mut l = lambdas.to_vec();
    let mut m = mus.to_vec();
    if l.iter().chain(&m).chain(std::iter::once(&gamma)).any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("spectra and gamma must be finite".into()));
    }
    l.sort_by(f64::total_cmp);
    m.sort_by(f64::total_cmp);
    if let Some(x) = l.iter().find(|x| m.binary_search_by(|y| y.total_cmp(x)).is_ok()) {
        return Err(Error::InvalidInput(format!("{x} lies in both sets; pass only noncommon eigenvalues")));
    }
    let pairing = gamma_barrier_pairing(&l, &m, gamma)?;
    let mus = pairing.iter().map(|&(_, j)| m[j]).collect();
    Ok(NFunction { lambdas: l, mus, gamma })
}

/// `theta = sqrt(N(gamma))`.
pub fn recover_theta(nf: &NFunction) -> Result<f64> {
    if nf.lambdas.contains(&nf.gamma) {
        return Err(Error::GammaIsPole(nf.gamma));
    }
    let v = nf.eval_real(nf.gamma);
    if !(v > 0.0) {
        return Err(Error::InterlacingViolation(format!("N(gamma) = {v} is not positive")));
    }
    Ok(v.sqrt())
}

/// `G(., n)` rebuilt from `N`: its pole measure, its zeros `alpha_k`, and the
/// residues `eta_k` of `-1/G` there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedGreen {
    pub gamma: f64,
    /// `theta^2`, or the supplied `vartheta^2` when `gamma` is in the spectrum.
    pub theta2: f64,
    pub measure: SpectralMeasure,
    pub zeros: Vec<f64>,
    pub etas: Vec<f64>,
}

impl ReconstructedGreen {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.measure.stieltjes(z)
    }

    /// First moment of the pole measure, which is `q_n`.
    pub fn q_n(&self) -> f64 {
        self.measure.moment(1)
    }

    fn eval_real(&self, x: f64) -> f64 {
        self.measure.nodes.iter().zip(&self.measure.weights).map(|(&t, &w)| w / (t - x)).sum()
    }

    fn derivative_real(&self, x: f64) -> f64 {
        self.measure.nodes.iter().zip(&self.measure.weights).map(|(&t, &w)| w / ((t - x) * (t - x))).sum()
    }
}

/// Rebuilds `G(z, n) = (N(z) - theta2) / ((1 - theta2)(gamma - z))`.
///
/// The poles are the `lambdas` of `nf`, plus `gamma` itself when
/// `theta2 < N(gamma)`. Zeros are bracketed one per gap between consecutive
/// poles, where `G` increases from minus to plus infinity.
pub fn reconstruct_green(nf: &NFunction, theta2: f64) -> Result<ReconstructedGreen> {
    if !(theta2 > 0.0 && theta2 != 1.0) {
        return Err(Error::InvalidInput(format!("theta^2 = {theta2} must be positive and differ from 1")));
    }
    let gamma = nf.gamma;
    let mut poles: Vec<(f64, f64)> = Vec::with_capacity(nf.lambdas.len() + 1);
    for (k, &l) in nf.lambdas.iter().enumerate() {
        let w = nf.residue(k) / ((1.0 - theta2) * (l - gamma));
        if !(w > 0.0) {
            return Err(Error::NegativeResidue { at: l, value: w });
        }
        poles.push((l, w));
    }
    let excess = nf.eval_real(gamma) - theta2;
    if excess < -N_VALUE_TOL {
        return Err(Error::InvalidInput(format!("theta^2 = {theta2} exceeds N(gamma) by {}", -excess)));
    }
    if excess > N_VALUE_TOL {
        poles.push((gamma, excess / (1.0 - theta2)));
    }
    poles.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (nodes, weights) = poles.into_iter().unzip();
    let measure = SpectralMeasure::new(nodes, weights)?;
    let mut rg = ReconstructedGreen { gamma, theta2, measure, zeros: Vec::new(), etas: Vec::new() };
    for gap in rg.measure.nodes.windows(2) {
        let alpha = bisect_increasing(|x| rg.eval_real(x), gap[0], gap[1])?;
        let eta = 1.0 / rg.derivative_real(alpha);
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::NegativeResidue { at: alpha, value: eta });
        }
        rg.zeros.push(alpha);
        rg.etas.push(eta);
    }
    Ok(rg)
}

/// Root of a function increasing from minus to plus infinity on `(lo, hi)`,
/// bisected down to adjacent doubles.
fn bisect_increasing<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let v = f(mid);
        if v.is_nan() {
            return Err(Error::RootNotBracketed { lo, hi });
        }
        if v < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    if a == lo || b == hi {
        return Err(Error::RootNotBracketed { lo, hi });
    }
    Ok(0.5 * (a + b))
}

/// `-1/G(z) = z - q_n + sum eta_k / (alpha_k - z)`.
pub fn extract_pf_data(rg: &ReconstructedGreen) -> Result<HerglotzRational> {
    if let Some((&at, &value)) = rg.zeros.iter().zip(&rg.etas).find(|(_, &e)| !(e > 0.0)) {
        return Err(Error::NegativeResidue { at, value });
    }
    Ok(HerglotzRational { a: 1.0, b: -rg.q_n(), poles: rg.zeros.clone(), residues: rg.etas.clone() })
}

/// Assignment of the poles of `-1/G` to the block before site `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    /// Indices (into the pole list) given wholly to the leading block.
    pub subset: Vec<usize>,
    /// Indices of shared poles, divided between both blocks.
    pub common: Vec<usize>,
    /// Fraction of each shared residue given to the leading block.
    pub betas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitEnumeration {
    pub splits: Vec<Split>,
    /// Size of the full family before the cap.
    pub total: u128,
}

impl SplitEnumeration {
    pub fn truncated(&self) -> bool {
        (self.splits.len() as u128) < self.total
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

/// Lexicographic enumeration of subsets of size `n - 1 - |common|` of the
/// non-shared poles, each combined with every assignment of `beta_samples`
/// to the shared poles; at most `cap` splits are returned.
pub fn enumerate_splits(
    pf: &HerglotzRational,
    n: usize,
    common: &[usize],
    beta_samples: &[f64],
    cap: usize,
) -> Result<SplitEnumeration> {
    if n == 0 {
        return Err(Error::InvalidSite { site: n, size: pf.poles.len() + 1 });
    }
    let need = n - 1;
    if common.len() > need {
        return Err(Error::InvalidInput(format!(
            "{} shared poles cannot all sit in a leading block of size {need}",
            common.len()
        )));
    }
    if let Some(b) = beta_samples.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
        return Err(Error::InvalidInput(format!("beta sample {b} is not inside (0, 1)")));
    }
    if !common.is_empty() && beta_samples.is_empty() {
        return Err(Error::InvalidInput("shared poles need at least one beta sample".into()));
    }
    let free: Vec<usize> = (0..pf.poles.len()).filter(|i| !common.contains(i)).collect();
    let pick = need - common.len();
    // The trailing block needs at least one node of its own or a shared one.
    if free.len() < pick || (free.len() == pick && common.is_empty()) {
        return Err(Error::TooFewPoles { needed: need + usize::from(common.is_empty()), available: pf.poles.len() });
    }
    let total = binomial(free.len(), pick).saturating_mul((beta_samples.len() as u128).saturating_pow(common.len() as u32));
    let beta_choices: Vec<Vec<f64>> = if common.is_empty() {
        vec![Vec::new()]
    } else {
        (0..common.len()).map(|_| beta_samples.iter().copied()).multi_cartesian_product().take(cap).collect()
    };
    let splits = free
        .iter()
        .copied()
        .combinations(pick)
        .flat_map(|subset| {
            beta_choices.iter().map(move |betas| Split { subset: subset.clone(), common: common.to_vec(), betas: betas.clone() })
        })
        .take(cap)
        .collect();
    Ok(SplitEnumeration { splits, total })
}

/// Lanczos on `diag(nodes)` from the start vector `sqrt(weights)`, with full
/// reorthogonalization (applied twice). Weights are normalized to sum one.
pub fn jacobi_from_measure(measure: &SpectralMeasure) -> Result<JacobiMatrix> {
    let m = SpectralMeasure::new(measure.nodes.clone(), measure.weights.clone())?;
    let k = m.len();
    let x = &m.nodes;
    let total = m.total();
    let scale = x.iter().fold(spread(x), |acc, v| acc.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut q: Vec<f64> = m.weights.iter().map(|w| (w / total).sqrt()).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut diag = Vec::with_capacity(k);
    let mut offdiag = Vec::with_capacity(k.saturating_sub(1));
    for step in 0..k {
        let a: f64 = x.iter().zip(&q).map(|(t, v)| t * v * v).sum();
        diag.push(a);
        basis.push(q.clone());
        if step + 1 == k {
            break;
        }
        let mut r: Vec<f64> = x.iter().zip(&q).map(|(t, v)| (t - a) * v).collect();
        for _ in 0..2 {
            for v in &basis {
                let c: f64 = r.iter().zip(v).map(|(a, b)| a * b).sum();
                r.iter_mut().zip(v).for_each(|(ri, vi)| *ri -= c * vi);
            }
        }
        let b = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(b > BREAKDOWN_REL * scale) {
            return Err(Error::NumericalBreakdown {
                step: step + 1,
                detail: format!("off-diagonal {b:e} lost positivity; nodes are too clustered"),
            });
        }
        offdiag.push(b);
        q = r.into_iter().map(|v| v / b).collect();
    }
    JacobiMatrix::new(diag, offdiag)
}

/// One member of the solution family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionCandidate {
    pub matrix: JacobiMatrix,
    pub split: Split,
    pub b_minus_sq: f64,
    pub b_plus_sq: f64,
}

fn sorted_measure(mut pts: Vec<(f64, f64)>, total: f64) -> Result<SpectralMeasure> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (nodes, weights): (Vec<f64>, Vec<f64>) = pts.into_iter().map(|(t, w)| (t, w / total)).unzip();
    SpectralMeasure::new(nodes, weights)
}

/// `[reversed J^- | q_n | J^+]` coupled by `b_{n-1}` and `b_n`.
pub fn assemble_candidate(pf: &HerglotzRational, split: &Split, n: usize) -> Result<SolutionCandidate> {
    if split.subset.len() + split.common.len() + 1 != n || split.common.len() != split.betas.len() {
        return Err(Error::InvalidInput(format!("split does not describe a leading block of size {}", n.saturating_sub(1))));
    }
    let q_n = -pf.b;
    let mut minus = Vec::with_capacity(n - 1);
    let mut plus = Vec::with_capacity(pf.poles.len());
    for (i, (&t, &eta)) in pf.poles.iter().zip(&pf.residues).enumerate() {
        if let Some(pos) = split.common.iter().position(|&c| c == i) {
            let beta = split.betas[pos];
            minus.push((t, beta * eta));
            plus.push((t, (1.0 - beta) * eta));
        } else if split.subset.contains(&i) {
            minus.push((t, eta));
        } else {
            plus.push((t, eta));
        }
    }
    let b_minus_sq: f64 = minus.iter().map(|p| p.1).sum();
    let b_plus_sq: f64 = plus.iter().map(|p| p.1).sum();
    if plus.is_empty() || !(b_plus_sq > 0.0) || (n > 1 && !(b_minus_sq > 0.0)) {
        return Err(Error::TooFewPoles { needed: n, available: pf.poles.len() });
    }
    let mut diag = Vec::with_capacity(n + plus.len());
    let mut offdiag = Vec::with_capacity(n + plus.len());
    if n > 1 {
        let jm = jacobi_from_measure(&sorted_measure(minus, b_minus_sq)?)?.reversed();
        diag.extend_from_slice(jm.diag());
        offdiag.extend_from_slice(jm.offdiag());
        offdiag.push(b_minus_sq.sqrt());
    }
    diag.push(q_n);
    offdiag.push(b_plus_sq.sqrt());
    let jp = jacobi_from_measure(&sorted_measure(plus, b_plus_sq)?)?;
    diag.extend_from_slice(jp.diag());
    offdiag.extend_from_slice(jp.offdiag());
    Ok(SolutionCandidate { matrix: JacobiMatrix::new(diag, offdiag)?, split: split.clone(), b_minus_sq, b_plus_sq })
}

/// Outcome of [`verify_candidate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub distance_j: f64,
    pub distance_jt: f64,
    pub spread: f64,
    pub tolerance: f64,
    /// Largest relative mismatch of the candidate's Green function against
    /// the reconstructed one, when that was supplied.
    pub green_mismatch: Option<f64>,
    pub pass: bool,
}

/// Hausdorff distances between the candidate's two spectra and the inputs,
/// with `h = gamma (1/theta^2 - 1)`.
pub fn verify_candidate(
    c: &SolutionCandidate,
    theta: f64,
    gamma: f64,
    lambdas: &[f64],
    mus: &[f64],
    rg: Option<&ReconstructedGreen>,
) -> Result<VerifyReport> {
    verify_candidate_with(c, theta, gamma, lambdas, mus, rg, VERIFY_REL_TOL)
}

/// [`verify_candidate`] with an explicit relative tolerance.
pub fn verify_candidate_with(
    c: &SolutionCandidate,
    theta: f64,
    gamma: f64,
    lambdas: &[f64],
    mus: &[f64],
    rg: Option<&ReconstructedGreen>,
    rel_tol: f64,
) -> Result<VerifyReport> {
    let n = c.split.subset.len() + c.split.common.len() + 1;
    let h = gamma * (1.0 / (theta * theta) - 1.0);
    let p = Perturbation::new(n, theta, h)?;
    let sj = eigenvalues(&c.matrix);
    let sjt = eigenvalues(&apply_perturbation(&c.matrix, &p)?);
    let all: Vec<f64> = lambdas.iter().chain(mus).copied().collect();
    let spread = spread(&all);
    let tolerance = rel_tol * spread;
    let distance_j = hausdorff(&sj, lambdas);
    let distance_jt = hausdorff(&sjt, mus);
    let green_mismatch = match rg {
        Some(rg) => {
            let mut worst = 0.0f64;
            for k in 0..10 {
                let z = Complex64::new(lambdas[0] + spread * k as f64 / 9.0, 0.5 + 0.25 * k as f64);
                let expected = rg.eval(z);
                worst = worst.max((green(&c.matrix, n, z)? - expected).norm() / expected.norm());
            }
            Some(worst)
        }
        None => None,
    };
    Ok(VerifyReport {
        distance_j,
        distance_jt,
        spread,
        tolerance,
        green_mismatch,
        pass: distance_j <= tolerance && distance_jt <= tolerance,
    })
}

/// One named condition of [`check_ns_conditions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub pass: bool,
    pub detail: String,
}

impl Condition {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsReport {
    pub mode: Mode,
    pub interlacing: Condition,
    pub shift_sum: Option<f64>,
    pub shift_tail: Option<f64>,
    pub summability: Condition,
    pub constancy: Condition,
    pub cardinality: Condition,
    pub n_at_gamma: Option<f64>,
    pub notes: Vec<String>,
}

impl NsReport {
    pub fn all_pass(&self) -> bool {
        self.interlacing.pass && self.summability.pass && self.constancy.pass && self.cardinality.pass
    }
}

/// Necessary-and-sufficient conditions on finite spectral data for `theta`
/// in `(0, 1)`. `theta` is only consulted in [`Mode::GammaInSpectrum`].
pub fn check_ns_conditions(lambdas: &[f64], mus: &[f64], gamma: f64, n: usize, mode: Mode, theta: Option<f64>) -> NsReport {
    check_ns_conditions_with(lambdas, mus, gamma, n, mode, theta, COMMON_REL_TOL)
}

/// [`check_ns_conditions`] with an explicit common-eigenvalue tolerance.
pub fn check_ns_conditions_with(
    lambdas: &[f64],
    mus: &[f64],
    gamma: f64,
    n: usize,
    mode: Mode,
    theta: Option<f64>,
    common_rel: f64,
) -> NsReport {
    let mut notes = vec![
        "summability is reported as a finite magnitude; convergence of the full series cannot be decided from one truncation".to_string(),
        "polynomial density is out of scope; cardinality of the pole set stands in for it".to_string(),
    ];
    let mut l = lambdas.to_vec();
    let mut m = mus.to_vec();
    l.sort_by(f64::total_cmp);
    m.sort_by(f64::total_cmp);
    let all: Vec<f64> = l.iter().chain(&m).copied().collect();
    let tol = common_rel * spread(&all);
    let split = resolve_common(&l, &m, Some(gamma), common_rel, theta, |l, m| build_n(l, m, gamma).is_ok());
    let CommonSplit { common, lambdas: lnc, mus: mnc, gamma_common, demoted } = split;
    if demoted > 0 {
        notes.push(format!("{demoted} near-coincident values treated as noncommon pairs"));
    }
    let detected = Mode::detect(!common.is_empty(), gamma_common);
    let mut constancy_issues = Vec::new();
    if detected != mode {
        constancy_issues.push(format!("data look like mode '{}', not '{}'", detected.name(), mode.name()));
    }

    let nf = build_n(&lnc, &mnc, gamma);
    let interlacing = match &nf {
        Ok(_) => Condition::new(true, format!("{} pairs interlace around gamma", lnc.len())),
        Err(e) => Condition::new(false, e.to_string()),
    };
    let (mut shift_sum, mut shift_tail, mut n_at_gamma) = (None, None, None);
    let mut constancy = Condition::new(true, "no common points besides gamma");
    if let Ok(nf) = &nf {
        let mut shifts: Vec<(f64, f64)> = nf.lambdas.iter().zip(&nf.mus).map(|(&a, &b)| (a, (a - b).abs())).collect();
        shifts.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
        shift_sum = Some(shifts.iter().map(|s| s.1).sum::<f64>());
        let quarter = shifts.len().div_ceil(4);
        shift_tail = Some(shifts[shifts.len() - quarter..].iter().map(|s| s.1).sum::<f64>());
        let ng = nf.eval_real(gamma);
        n_at_gamma = Some(ng);
        if !(ng > 0.0 && ng < 1.0) {
            constancy_issues.push(format!("N(gamma) = {ng} is outside (0, 1)"));
        }
        let others: Vec<f64> = common.iter().copied().filter(|c| (c - gamma).abs() > tol).collect();
        let values: Vec<f64> = others.iter().map(|&c| nf.eval_real(c)).collect();
        if let (Some(lo), Some(hi)) = (
            values.iter().copied().reduce(f64::min),
            values.iter().copied().reduce(f64::max),
        ) {
            if hi - lo > N_VALUE_TOL {
                constancy_issues.push(format!("N varies by {:e} over common points", hi - lo));
            }
            match mode {
                Mode::GammaInSpectrum => {
                    if hi > ng + N_VALUE_TOL {
                        constancy_issues.push(format!("N at a common point ({hi}) exceeds N(gamma) = {ng}"));
                    }
                }
                _ => {
                    let dev = values.iter().map(|v| (v - ng).abs()).fold(0.0, f64::max);
                    if dev > N_VALUE_TOL {
                        let exact = others.iter().filter(|c| m.contains(c)).count();
                        let hint = if exact > 0 {
                            format!(
                                " ({exact} of them coincide exactly; an eigenvector almost orthogonal to site n \
                                 shifts its eigenvalue by less than rounding, and such a pair cannot be resolved)"
                            )
                        } else {
                            String::new()
                        };
                        constancy_issues.push(format!("N at common points differs from N(gamma) by {dev:e}{hint}"));
                    }
                }
            }
        }
        if mode == Mode::GammaInSpectrum {
            match theta {
                None => constancy_issues.push("gamma-in-spectrum mode needs theta".into()),
                Some(t) => {
                    let t2 = t * t;
                    let flat = nf.derivative(gamma).abs() <= N_VALUE_TOL;
                    let ok = t2 > 0.0 && (t2 < ng - N_VALUE_TOL || (flat && (t2 - ng).abs() <= N_VALUE_TOL));
                    if !ok {
                        constancy_issues.push(format!(
                            "theta^2 = {t2} must lie in (0, N(gamma)) = (0, {ng}){}",
                            if flat { " or equal N(gamma)" } else { "" }
                        ));
                    }
                }
            }
        }
        if constancy_issues.is_empty() {
            constancy = Condition::new(true, format!("{} common points checked", values.len()));
        }
    }
    if !constancy_issues.is_empty() {
        constancy = Condition::new(false, constancy_issues.join("; "));
    }
    let summability = match shift_sum {
        Some(v) => Condition::new(v.is_finite(), format!("sum |lambda_k - mu_k| = {v:e}")),
        None => Condition::new(false, "no valid pairing to sum over"),
    };

    let pole_count = lnc.len() + usize::from(gamma_common);
    let available = pole_count.saturating_sub(1);
    let cardinality = Condition::new(
        n >= 1 && available + 1 >= n,
        format!("{available} poles of -1/G available, {} needed for the leading block", n.saturating_sub(1)),
    );
    if mode == Mode::GammaInSpectrum {
        notes.push("in this mode the pole at gamma is assumed present; supply theta accordingly".into());
    }
    NsReport { mode, interlacing, shift_sum, shift_tail, summability, constancy, cardinality, n_at_gamma, notes }
}

/// Input to [`solve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseProblem {
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
    pub gamma: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub cap: usize,
    pub beta_samples: Vec<f64>,
    pub common_rel: f64,
    pub verify_rel: f64,
    pub execution: Execution,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            beta_samples: DEFAULT_BETAS.to_vec(),
            common_rel: COMMON_REL_TOL,
            verify_rel: VERIFY_REL_TOL,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
    pub split: Vec<usize>,
    pub common: Vec<usize>,
    pub betas: Vec<f64>,
    pub residuals: VerifyReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseSolution {
    pub mode: Mode,
    pub theta: f64,
    pub h: f64,
    pub gamma: f64,
    pub q_n: f64,
    pub alphas: Vec<f64>,
    pub etas: Vec<f64>,
    pub common_alphas: Vec<usize>,
    pub total_splits: u128,
    pub truncated: bool,
    pub candidates: Vec<CandidateReport>,
    pub conditions: NsReport,
    #[serde(skip)]
    pub green: Option<ReconstructedGreen>,
}

/// Runs the full reconstruction and verifies every enumerated candidate.
pub fn solve(problem: &InverseProblem, opts: &SolveOptions) -> Result<InverseSolution> {
    let n = problem.n;
    if n == 0 {
        return Err(Error::InvalidSite { site: 0, size: problem.lambdas.len() });
    }
    if problem.lambdas.len() != problem.mus.len() || problem.lambdas.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need two spectra of equal size at least 2, got {} and {}",
            problem.lambdas.len(),
            problem.mus.len()
        )));
    }
    let mut lambdas = problem.lambdas.clone();
    let mut mus = problem.mus.clone();
    lambdas.sort_by(f64::total_cmp);
    mus.sort_by(f64::total_cmp);
    let gamma = problem.gamma;
    let all: Vec<f64> = lambdas.iter().chain(&mus).copied().collect();
    let tol = opts.common_rel * spread(&all);
    let CommonSplit { common, lambdas: lnc, mus: mnc, gamma_common, .. } =
        resolve_common(&lambdas, &mus, Some(gamma), opts.common_rel, problem.theta, |l, m| {
            build_n(l, m, gamma).is_ok()
        });
    let detected = Mode::detect(!common.is_empty(), gamma_common);
    let mode = problem.mode.unwrap_or(detected);
    if mode != detected {
        return Err(Error::InvalidInput(format!(
            "mode '{}' requested but the spectra are in the '{}' case",
            mode.name(),
            detected.name()
        )));
    }
    let conditions = check_ns_conditions_with(&lambdas, &mus, gamma, n, mode, problem.theta, opts.common_rel);
    let nf = build_n(&lnc, &mnc, gamma)?;
    let others: Vec<f64> = common.iter().copied().filter(|c| (c - gamma).abs() > tol).collect();
    let theta2 = match mode {
        Mode::GammaInSpectrum => {
            let t = problem.theta.ok_or_else(|| Error::InvalidInput("gamma-in-spectrum mode needs theta".into()))?;
            if !conditions.constancy.pass {
                return Err(Error::InvalidInput(conditions.constancy.detail.clone()));
            }
            t * t
        }
        _ => {
            let t = recover_theta(&nf)?;
            if !conditions.constancy.pass {
                return Err(Error::InvalidInput(conditions.constancy.detail.clone()));
            }
            t * t
        }
    };
    let theta = theta2.sqrt();
    let rg = reconstruct_green(&nf, theta2)?;
    let pf = extract_pf_data(&rg)?;

    // Shared poles: common eigenvalues that are zeros of G. That is every
    // common point except gamma when gamma is a pole.
    let gamma_is_pole = rg.measure.nodes.iter().any(|&t| t == gamma);
    let shared: Vec<f64> = if gamma_is_pole { others } else { common.clone() };
    let mut common_alphas = Vec::with_capacity(shared.len());
    for c in &shared {
        let (idx, dist) = rg
            .zeros
            .iter()
            .enumerate()
            .map(|(i, a)| (i, (a - c).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| Error::TooFewPoles { needed: shared.len(), available: 0 })?;
        if dist > 10.0 * tol {
            return Err(Error::InvalidInput(format!("common eigenvalue {c} is not a zero of the reconstructed G")));
        }
        common_alphas.push(idx);
    }
    common_alphas.sort_unstable();
    common_alphas.dedup();

    let family = enumerate_splits(&pf, n, &common_alphas, &opts.beta_samples, opts.cap)?;
    if family.truncated() {
        log::warn!("solution family has {} members; keeping the first {}", family.total, family.splits.len());
    }
    let reports = par_map(opts.execution, &family.splits, |split| -> Result<CandidateReport> {
        let c = assemble_candidate(&pf, split, n)?;
        let residuals = verify_candidate_with(&c, theta, gamma, &lambdas, &mus, Some(&rg), opts.verify_rel)?;
        Ok(CandidateReport {
            diag: c.matrix.diag().to_vec(),
            offdiag: c.matrix.offdiag().to_vec(),
            split: c.split.subset,
            common: c.split.common,
            betas: c.split.betas,
            residuals,
        })
    });
    let candidates = reports.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(InverseSolution {
        mode,
        theta,
        h: gamma * (1.0 / theta2 - 1.0),
        gamma,
        q_n: rg.q_n(),
        alphas: rg.zeros.clone(),
        etas: rg.etas.clone(),
        common_alphas,
        total_splits: family.total,
        truncated: family.truncated(),
        candidates,
        conditions,
        green: Some(rg),
    })
}

/// Problem statement for the forward pair `(J, p)`.
pub fn problem_from_forward(j: &JacobiMatrix, p: &Perturbation) -> Result<InverseProblem> {
    let gamma = p.gamma()?;
    let lambdas = eigenvalues(j);
    let mus = eigenvalues(&apply_perturbation(j, p)?);
    let mode = detect_mode(&lambdas, &mus, gamma, COMMON_REL_TOL, Some(p.theta()));
    Ok(InverseProblem {
        lambdas,
        mus,
        gamma,
        n: p.site(),
        mode: Some(mode),
        theta: (mode == Mode::GammaInSpectrum).then_some(p.theta()),
    })
}

/// Index of the split that reproduces `j` itself: the zeros matching the
/// spectrum of the leading block, shared ones excluded.
pub fn true_split(j: &JacobiMatrix, n: usize, sol: &InverseSolution) -> Option<Vec<usize>> {
    if n == 1 {
        return Some(Vec::new());
    }
    let minus = eigenvalues(&j.leading(n - 1).ok()?);
    let tol = 1e-7 * spread(&sol.alphas).max(1.0);
    let mut idx = Vec::new();
    for t in minus {
        let (i, d) = sol.alphas.iter().enumerate().map(|(i, a)| (i, (a - t).abs())).min_by(|a, b| a.1.total_cmp(&b.1))?;
        if d > tol {
            return None;
        }
        if !sol.common_alphas.contains(&i) {
            idx.push(i);
        }
    }
    idx.sort_unstable();
    Some(idx)
}

/// Share of each shared pole's residue that belongs to the leading block of
/// `j`, in the order of `sol.common_alphas`.
pub fn true_betas(j: &JacobiMatrix, n: usize, sol: &InverseSolution) -> Option<Vec<f64>> {
    if sol.common_alphas.is_empty() {
        return Some(Vec::new());
    }
    if n == 1 {
        return None;
    }
    let minus = site_measure(&j.leading(n - 1).ok()?, n - 1).ok()?;
    let b2 = j.b(n - 1).powi(2);
    let tol = 1e-7 * spread(&sol.alphas).max(1.0);
    sol.common_alphas
        .iter()
        .map(|&i| {
            let (t, eta) = (sol.alphas[i], sol.etas[i]);
            let (k, d) = minus.nodes.iter().enumerate().map(|(k, x)| (k, (x - t).abs())).min_by(|a, b| a.1.total_cmp(&b.1))?;
            (d <= tol).then(|| b2 * minus.weights[k] / eta)
        })
        .collect()
}

/// Entry-wise differences between two candidates of equal size.
pub fn max_entry_distance(a: &JacobiMatrix, b: &JacobiMatrix) -> f64 {
    if a.size() != b.size() {
        return f64::INFINITY;
    }
    a.diag()
        .iter()
        .zip(b.diag())
        .chain(a.offdiag().iter().zip(b.offdiag()))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::chain_to_jacobi;
    use crate::direct::match_common;
    use crate::eigen::spectral_measure;
    use crate::green::{green_inverse_partial_fractions, weyl_m};
    use crate::testutil::{random_chain_matrix, sample_off_axis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn build_n_examples() {
        let nf = build_n(&[0.0, 2.0], &[0.5, 1.5], 1.0).unwrap();
        assert_eq!(nf.mus(), &[0.5, 1.5]);
        assert!(matches!(build_n(&[0.0, 2.0], &[0.5, 2.5], 1.0), Err(Error::InterlacingViolation(_))));
        assert!(matches!(recover_theta(&build_n(&[0.0, 2.0], &[0.5, 1.5], 2.0).unwrap_or(nf.clone())), Ok(_)));
    }

    #[test]
    fn theta_from_empty_pairing_is_one() {
        let nf = build_n(&[], &[], 0.3).unwrap();
        assert_eq!(recover_theta(&nf).unwrap(), 1.0);
    }

    #[test]
    fn gamma_on_a_pole_is_rejected() {
        let nf = NFunction { lambdas: vec![0.0, 2.0], mus: vec![0.5, 1.5], gamma: 2.0 };
        assert!(matches!(recover_theta(&nf), Err(Error::GammaIsPole(_))));
    }

    #[test]
    fn n_derivative_matches_difference_quotient() {
        let nf = build_n(&[-3.0, -1.0, 2.0], &[-2.5, -0.5, 1.0], 0.0).unwrap();
        for x in [-4.0, 0.1, 3.3] {
            let hstep = 1e-6;
            let fd = (nf.eval_real(x + hstep) - nf.eval_real(x - hstep)) / (2.0 * hstep);
            assert!((nf.derivative(x) - fd).abs() < 1e-6 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn lanczos_examples() {
        let j = jacobi_from_measure(&SpectralMeasure::new(vec![2.5], vec![1.0]).unwrap()).unwrap();
        assert_eq!(j.diag(), &[2.5]);
        let j = jacobi_from_measure(&SpectralMeasure::new(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap()).unwrap();
        assert!(j.diag().iter().all(|d| d.abs() < 1e-15));
        assert!((j.offdiag()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lanczos_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut nodes: Vec<f64> = (0..8).map(|_| rng.gen_range(-5.0..5.0)).collect();
        nodes.sort_by(f64::total_cmp);
        let raw: Vec<f64> = (0..8).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let m = SpectralMeasure::new(nodes.clone(), weights.clone()).unwrap();
        let back = spectral_measure(&jacobi_from_measure(&m).unwrap()).unwrap();
        for k in 0..8 {
            assert!((back.nodes[k] - nodes[k]).abs() < 1e-9);
            assert!((back.weights[k] - weights[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn lanczos_breaks_down_on_merged_nodes() {
        let m = SpectralMeasure { nodes: vec![0.0, 1e-300, 1.0], weights: vec![0.3, 0.3, 0.4] };
        assert!(matches!(jacobi_from_measure(&m), Err(Error::NumericalBreakdown { .. })));
    }

    #[test]
    fn split_counts() {
        let pf = HerglotzRational { a: 1.0, b: 0.0, poles: vec![0.0, 1.0, 2.0, 3.0], residues: vec![1.0; 4] };
        assert_eq!(enumerate_splits(&pf, 2, &[], &DEFAULT_BETAS, 64).unwrap().splits.len(), 4);
        let pf5 = HerglotzRational { a: 1.0, b: 0.0, poles: vec![0.0, 1.0, 2.0, 3.0, 4.0], residues: vec![1.0; 5] };
        let e = enumerate_splits(&pf5, 3, &[2], &DEFAULT_BETAS, 64).unwrap();
        assert_eq!((e.splits.len(), e.total), (12, 12));
        let one = enumerate_splits(&pf, 1, &[], &DEFAULT_BETAS, 64).unwrap();
        assert_eq!(one.splits, vec![Split { subset: vec![], common: vec![], betas: vec![] }]);
        let capped = enumerate_splits(&pf5, 3, &[], &DEFAULT_BETAS, 3).unwrap();
        assert!(capped.truncated());
        assert_eq!(capped.splits[0].subset, vec![0, 1]);
        assert_eq!(capped.splits[2].subset, vec![0, 3]);
        assert!(matches!(enumerate_splits(&pf, 6, &[], &DEFAULT_BETAS, 64), Err(Error::TooFewPoles { .. })));
    }

    fn forward(seed: u64, size: usize, n: usize, theta: f64, h: f64) -> (JacobiMatrix, Perturbation, InverseSolution) {
        let j = random_chain_matrix(&mut ChaCha8Rng::seed_from_u64(seed), size);
        let p = Perturbation::new(n, theta, h).unwrap();
        let sol = solve(&problem_from_forward(&j, &p).unwrap(), &SolveOptions::default()).unwrap();
        (j, p, sol)
    }

    #[test]
    fn reconstructed_green_matches_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (j, p, sol) = forward(1, 9, 4, 0.6, 2.0);
        assert!((sol.theta - 0.6).abs() < 1e-10);
        let rg = sol.green.as_ref().unwrap();
        for z in sample_off_axis(&mut rng, 20) {
            let expected = green(&j, 4, z).unwrap();
            assert!((rg.eval(z) - expected).norm() <= 1e-8 * expected.norm());
        }
        assert!(rg.eval(c(0.0, 1.0)).im > 0.0);
        let y = 1e6;
        assert!((-1.0 / (c(0.0, y) * rg.eval(c(0.0, y))) - 1.0).norm() < 1e-4);
        assert!((sol.q_n - j.q(4)).abs() < 1e-8);
        let eta_sum: f64 = sol.etas.iter().sum();
        assert!((eta_sum - j.b(3).powi(2) - j.b(4).powi(2)).abs() < 1e-8);
        let _ = p;
    }

    #[test]
    fn eta_from_pole_expansion_matches_n_prime() {
        let (_, p, sol) = forward(2, 8, 3, 0.4, -1.0);
        let rg = sol.green.as_ref().unwrap();
        let t2 = p.theta() * p.theta();
        let gamma = p.gamma().unwrap();
        let problem = problem_from_forward(&random_chain_matrix(&mut ChaCha8Rng::seed_from_u64(2), 8), &p).unwrap();
        let (_, lnc, mnc) = match_common(&problem.lambdas, &problem.mus, 0.0);
        let nf = build_n(&lnc, &mnc, gamma).unwrap();
        for (&a, &eta) in rg.zeros.iter().zip(&rg.etas) {
            // G'(alpha) = N'(alpha) / ((1 - theta^2)(gamma - alpha)) where G vanishes.
            let gp = nf.derivative(a) / ((1.0 - t2) * (gamma - a));
            assert!((1.0 / gp - eta).abs() <= 1e-8 * eta);
        }
    }

    #[test]
    fn true_split_recovers_matrix() {
        let (j, _, sol) = forward(3, 10, 4, 0.4, -1.0);
        let split = true_split(&j, 4, &sol).unwrap();
        let cand = sol.candidates.iter().find(|c| c.split == split).unwrap();
        let m = JacobiMatrix::new(cand.diag.clone(), cand.offdiag.clone()).unwrap();
        assert!(max_entry_distance(&m, &j) < 1e-7);
        assert!(sol.candidates.iter().all(|c| c.residuals.pass));
        assert!(sol.candidates.iter().all(|c| c.residuals.green_mismatch.unwrap() < 1e-7));
    }

    #[test]
    fn site_one_has_single_candidate() {
        let (j, _, sol) = forward(5, 7, 1, 0.6, 2.0);
        assert_eq!(sol.candidates.len(), 1);
        let m = JacobiMatrix::new(sol.candidates[0].diag.clone(), sol.candidates[0].offdiag.clone()).unwrap();
        assert!(max_entry_distance(&m, &j) < 1e-7);
        let pf = green_inverse_partial_fractions(&j, 1).unwrap().function;
        let b1sq: f64 = pf.residues.iter().sum();
        assert!((sol.candidates[0].offdiag[0].powi(2) - b1sq).abs() < 1e-8);
    }

    #[test]
    fn perturbed_eta_fails_verification() {
        let (j, p, sol) = forward(6, 8, 3, 0.4, 2.0);
        let mut pf = extract_pf_data(sol.green.as_ref().unwrap()).unwrap();
        pf.residues[0] += 1e-3;
        let split = Split { subset: true_split(&j, 3, &sol).unwrap(), common: vec![], betas: vec![] };
        let cand = assemble_candidate(&pf, &split, 3).unwrap();
        let r = verify_candidate(&cand, p.theta(), p.gamma().unwrap(), &sol_lambdas(&j), &sol_mus(&j, &p), None).unwrap();
        assert!(!r.pass);
        let d = r.distance_j.max(r.distance_jt);
        assert!(d > 1e-6 && d < 1e-1, "{d}");
    }

    fn sol_lambdas(j: &JacobiMatrix) -> Vec<f64> {
        eigenvalues(j)
    }

    fn sol_mus(j: &JacobiMatrix, p: &Perturbation) -> Vec<f64> {
        eigenvalues(&apply_perturbation(j, p).unwrap())
    }

    #[test]
    fn palindromic_center_recovers_q() {
        let chain = crate::fixtures::common_spectrum(12, 7).unwrap();
        let j = chain_to_jacobi(&chain);
        let p = Perturbation::new(4, 0.5, 1.0).unwrap();
        let sol = solve(&problem_from_forward(&j, &p).unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(sol.mode, Mode::Common);
        assert!((sol.q_n - j.q(4)).abs() < 1e-8);
        assert_eq!(sol.common_alphas.len(), 3);
        assert_eq!(sol.candidates.len(), 27);
        assert!(sol.candidates.iter().all(|c| c.residuals.pass));
        // beta = 1/2 everywhere reproduces the mirror-symmetric original.
        let half = sol.candidates.iter().find(|c| c.betas.iter().all(|&b| b == 0.5)).unwrap();
        let m = JacobiMatrix::new(half.diag.clone(), half.offdiag.clone()).unwrap();
        assert!(max_entry_distance(&m, &j) < 1e-7);
    }

    #[test]
    fn ns_conditions_flag_violations() {
        let (j, p, _) = forward(7, 8, 3, 0.5, 1.0);
        let l = eigenvalues(&j);
        let m = eigenvalues(&apply_perturbation(&j, &p).unwrap());
        let g = p.gamma().unwrap();
        assert!(check_ns_conditions(&l, &m, g, 3, Mode::Disjoint, None).all_pass());
        // Move the mu nearest gamma across it.
        let mut bad = m.clone();
        let k = (0..bad.len()).min_by(|&a, &b| (bad[a] - g).abs().total_cmp(&(bad[b] - g).abs())).unwrap();
        bad[k] = 2.0 * g - bad[k];
        assert!(!check_ns_conditions(&l, &bad, g, 3, Mode::Disjoint, None).interlacing.pass);
    }

    #[test]
    fn ns_constancy_violation_is_reported() {
        let j = chain_to_jacobi(&crate::fixtures::common_spectrum(3, 7).unwrap());
        let p = Perturbation::new(4, 0.5, 1.0).unwrap();
        let l = eigenvalues(&j);
        let m = eigenvalues(&apply_perturbation(&j, &p).unwrap());
        let g = p.gamma().unwrap();
        let ok = check_ns_conditions(&l, &m, g, 4, Mode::Common, None);
        assert!(ok.all_pass(), "{ok:?}");
        // Nudge one common point in both spectra so N there moves off theta^2.
        let (common, _, _) = match_common(&l, &m, 1e-9);
        let target = common[1];
        let shift = |v: &[f64]| -> Vec<f64> { v.iter().map(|&x| if x == target { x + 1e-3 } else { x }).collect() };
        let (l2, m2) = (shift(&l), shift(&m));
        let bad = check_ns_conditions(&l2, &m2, g, 4, Mode::Common, None);
        assert!(!bad.constancy.pass);
        assert!(bad.constancy.detail.contains("differs"));
    }

    #[test]
    fn gamma_in_spectrum_branch() {
        // Choose h so that gamma lands exactly on an eigenvalue of J.
        let j = random_chain_matrix(&mut ChaCha8Rng::seed_from_u64(21), 8);
        let theta = 0.6;
        let gamma = eigenvalues(&j)[3];
        let h = gamma * (1.0 / (theta * theta) - 1.0);
        let p = Perturbation::new(3, theta, h).unwrap();
        let problem = problem_from_forward(&j, &p).unwrap();
        assert_eq!(problem.mode, Some(Mode::GammaInSpectrum));
        let sol = solve(&problem, &SolveOptions::default()).unwrap();
        let split = true_split(&j, 3, &sol).unwrap();
        assert!(sol.candidates.iter().all(|c| c.residuals.pass));
        let cand = sol.candidates.iter().find(|c| c.split == split).unwrap();
        let m = JacobiMatrix::new(cand.diag.clone(), cand.offdiag.clone()).unwrap();
        assert!(max_entry_distance(&m, &j) < 1e-7);
        let mut too_big = problem.clone();
        too_big.theta = Some(0.99);
        assert!(solve(&too_big, &SolveOptions::default()).is_err());
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let j = chain_to_jacobi(&crate::fixtures::common_spectrum(3, 7).unwrap());
        let mut problem = problem_from_forward(&j, &Perturbation::new(4, 0.5, 1.0).unwrap()).unwrap();
        problem.mode = Some(Mode::Disjoint);
        assert!(matches!(solve(&problem, &SolveOptions::default()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn weyl_of_reconstructed_plus_block() {
        let (j, _, sol) = forward(8, 9, 2, 0.6, -1.0);
        let split = true_split(&j, 2, &sol).unwrap();
        let cand = sol.candidates.iter().find(|c| c.split == split).unwrap();
        let m = JacobiMatrix::new(cand.diag.clone(), cand.offdiag.clone()).unwrap();
        let z = c(-1.0, 0.5);
        assert!((weyl_m(&m, z).unwrap() - weyl_m(&j, z).unwrap()).norm() < 1e-8);
    }
}
