//! Parameter sweeps over `(theta, h, n)` producing plot-ready rows.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::{apply_perturbation, JacobiMatrix, Perturbation};
use crate::direct::{all_eigenvalue_derivatives, classify_two_spectra, product_form_eval, shift_sum_of};
use crate::eigen::eigenvalues;
use crate::error::{Error, Result};
use crate::par::{par_map, Execution};

/// Central-difference step for the derivative columns.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub thetas: Vec<f64>,
    pub hs: Vec<f64>,
    pub sites: Vec<usize>,
}

impl SweepGrid {
    pub fn len(&self) -> usize {
        self.thetas.len() * self.hs.len() * self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in row order: theta outermost, site innermost.
    pub fn points(&self) -> Result<Vec<Perturbation>> {
        let mut out = Vec::with_capacity(self.len());
        for &theta in &self.thetas {
            for &h in &self.hs {
                for &site in &self.sites {
                    out.push(Perturbation::new(site, theta, h)?);
                }
            }
        }
        Ok(out)
    }
}

/// One row per grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub theta: f64,
    pub h: f64,
    pub site: usize,
    pub gamma: Option<f64>,
    pub common: usize,
    pub pairs: usize,
    pub shift_total: f64,
    pub shift_tail: f64,
    /// `prod (gamma - mu_k) / (gamma - lambda_k)`; absent when `gamma` is
    /// undefined or a common eigenvalue.
    pub mass_ratio: Option<f64>,
    pub theta_sq: f64,
    pub min_dlambda_dh: f64,
    pub max_derivative_fd_gap: f64,
}

/// One row per eigenvalue of the perturbed operator at each grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRow {
    pub index: usize,
    pub k: usize,
    pub mu: f64,
    pub dlambda_dtheta: f64,
    pub dlambda_dh: f64,
    pub fd_dlambda_dtheta: f64,
    pub fd_dlambda_dh: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub modes: Vec<ModeRow>,
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn sweep_point(j: &JacobiMatrix, index: usize, p: &Perturbation) -> Result<(SweepRow, Vec<ModeRow>)> {
    let data = classify_two_spectra(j, p)?;
    let shifts = shift_sum_of(&data);
    let mass_ratio = match data.gamma {
        Some(g) if !data.gamma_is_common() => Some(product_form_eval(&data, Complex64::new(g, 0.0)).re),
        _ => None,
    };
    let spectrum = |q: &Perturbation| -> Result<Vec<f64>> { Ok(eigenvalues(&apply_perturbation(j, q)?)) };
    let (theta, h) = (p.theta(), p.h());
    let tp = spectrum(&p.with_theta(theta + FD_STEP)?)?;
    let tm = spectrum(&p.with_theta(theta - FD_STEP)?)?;
    let hp = spectrum(&p.with_h(h + FD_STEP)?)?;
    let hm = spectrum(&p.with_h(h - FD_STEP)?)?;
    let mut modes = Vec::with_capacity(data.spectrum_jt.len());
    let (mut min_dh, mut worst) = (f64::INFINITY, 0.0f64);
    let derivatives = all_eigenvalue_derivatives(j, p)?;
    for (k, (&mu, &(dt, dh))) in data.spectrum_jt.iter().zip(&derivatives).enumerate() {
        let fdt = (tp[k] - tm[k]) / (2.0 * FD_STEP);
        let fdh = (hp[k] - hm[k]) / (2.0 * FD_STEP);
        min_dh = min_dh.min(dh);
        worst = worst.max(relative_gap(dt, fdt)).max(relative_gap(dh, fdh));
        modes.push(ModeRow { index, k, mu, dlambda_dtheta: dt, dlambda_dh: dh, fd_dlambda_dtheta: fdt, fd_dlambda_dh: fdh });
    }
    let row = SweepRow {
        index,
        theta,
        h,
        site: p.site(),
        gamma: data.gamma,
        common: data.common.len(),
        pairs: shifts.pairs,
        shift_total: shifts.total,
        shift_tail: shifts.tail,
        mass_ratio,
        theta_sq: theta * theta,
        min_dlambda_dh: min_dh,
        max_derivative_fd_gap: worst,
    };
    Ok((row, modes))
}

/// Evaluates every grid point; rows come back in grid order whatever the
/// execution strategy.
pub fn run_sweep(j: &JacobiMatrix, grid: &SweepGrid, exec: Execution) -> Result<SweepOutput> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("sweep grid is empty".into()));
    }
    let points: Vec<(usize, Perturbation)> = grid.points()?.into_iter().enumerate().collect();
    let results = par_map(exec, &points, |(i, p)| sweep_point(j, *i, p));
    let mut out = SweepOutput::default();
    for r in results {
        let (row, modes) = r?;
        out.rows.push(row);
        out.modes.extend(modes);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::chain_to_jacobi;
    use crate::fixtures::{generate, FixtureKind};

    fn grid() -> SweepGrid {
        SweepGrid { thetas: vec![0.3, 0.6, 1.4], hs: vec![-1.0, 0.5, 2.0], sites: vec![2, 5] }
    }

    fn matrix() -> JacobiMatrix {
        chain_to_jacobi(&generate(FixtureKind::RandomLoguniform, 3, 12).unwrap())
    }

    #[test]
    fn row_count_and_order() {
        let out = run_sweep(&matrix(), &grid(), Execution::default()).unwrap();
        assert_eq!(out.rows.len(), 18);
        assert_eq!(out.modes.len(), 18 * 12);
        assert!(out.rows.iter().enumerate().all(|(i, r)| r.index == i));
        assert_eq!((out.rows[1].theta, out.rows[1].h, out.rows[1].site), (0.3, -1.0, 5));
    }

    #[test]
    fn derivative_columns_match_differences() {
        let out = run_sweep(&matrix(), &grid(), Execution::Sequential).unwrap();
        for m in &out.modes {
            assert!(relative_gap(m.dlambda_dtheta, m.fd_dlambda_dtheta) < 1e-5, "{m:?}");
            assert!(relative_gap(m.dlambda_dh, m.fd_dlambda_dh) < 1e-5, "{m:?}");
            assert!(m.dlambda_dh >= 0.0);
        }
        for r in &out.rows {
            assert!((r.mass_ratio.unwrap() - r.theta_sq).abs() < 1e-8, "{r:?}");
        }
    }

    #[test]
    fn execution_modes_agree() {
        let a = run_sweep(&matrix(), &grid(), Execution::Sequential).unwrap();
        let b = run_sweep(&matrix(), &grid(), Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
