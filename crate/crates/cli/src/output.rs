use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use jacobi_spectra::error::{Error, ErrorClass};
use jacobi_spectra::io::{format_float, from_json_str, to_json_string};
use jacobi_spectra::sweep::{ModeRow, SweepRow};

pub const EXIT_IO: u8 = 1;
pub const EXIT_DOMAIN: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// Library errors map by class; anything else (files, parsing) is I/O.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e.class() {
                ErrorClass::Domain => EXIT_DOMAIN,
                ErrorClass::Numerical => EXIT_NUMERICAL,
            };
        }
    }
    EXIT_IO
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    from_json_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).with_context(|| format!("cannot create {}", path.display()))?;
        Ok(Self(path.to_path_buf()))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    pub fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let text = to_json_string(value)?;
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    pub fn csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<PathBuf> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot write {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush().with_context(|| format!("cannot write {}", path.display()))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub const SWEEP_HEADER: [&str; 13] = [
    "index",
    "theta",
    "h",
    "site",
    "gamma",
    "common",
    "pairs",
    "shift_total",
    "shift_tail",
    "mass_ratio",
    "theta_sq",
    "min_dlambda_dh",
    "max_derivative_fd_gap",
];

pub fn sweep_record(r: &SweepRow) -> Vec<String> {
    vec![
        r.index.to_string(),
        format_float(r.theta),
        format_float(r.h),
        r.site.to_string(),
        opt(r.gamma),
        r.common.to_string(),
        r.pairs.to_string(),
        format_float(r.shift_total),
        format_float(r.shift_tail),
        opt(r.mass_ratio),
        format_float(r.theta_sq),
        format_float(r.min_dlambda_dh),
        format_float(r.max_derivative_fd_gap),
    ]
}

pub const MODES_HEADER: [&str; 7] =
    ["index", "k", "mu", "dlambda_dtheta", "dlambda_dh", "fd_dlambda_dtheta", "fd_dlambda_dh"];

pub fn mode_record(m: &ModeRow) -> Vec<String> {
    vec![
        m.index.to_string(),
        m.k.to_string(),
        format_float(m.mu),
        format_float(m.dlambda_dtheta),
        format_float(m.dlambda_dh),
        format_float(m.fd_dlambda_dtheta),
        format_float(m.fd_dlambda_dh),
    ]
}
