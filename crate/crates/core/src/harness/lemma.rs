//! Decay of propagator statistics with n.
//!
//! For each t on the grid, over replicas: U_jj(t), v_n(t), v_n(t,t),
//! v_n1(t,t) and v_n2(t,t,t). Means are compared with v(t), v(t), v(t)²,
//! 0 and v(t)³; variances E|X − EX|² are regressed on n in log-log scale.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{JPolicy, MIN_N, MIN_REPLICAS};
use crate::digest::fingerprint_hex;
use crate::ensemble::{sample_matrix, EnsembleSpec};
use crate::error::{Error, Result};
use crate::semicircle::v_of_t;
use crate::spectral::{eigh, lemma_statistics, propagator_row};
use crate::stats::ols_slope;

pub const STATISTICS: [&str; 5] = ["u_jj", "v_n", "v_n_pair", "v_n1", "v_n2"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaConfig {
    pub spec: EnsembleSpec,
    pub n_list: Vec<usize>,
    pub j_policy: JPolicy,
    pub t_grid: Vec<f64>,
    pub replicas: usize,
    pub root_seed: u64,
}

impl LemmaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicas < MIN_REPLICAS {
            return Err(Error::schema("replicas", format!("need at least {MIN_REPLICAS} replicas")));
        }
        if self.n_list.len() < 4 {
            return Err(Error::schema("n_list", "decay fits need at least 4 sizes"));
        }
        if let Some(i) = self.n_list.iter().position(|&n| n < MIN_N) {
            return Err(Error::schema(format!("n_list[{i}]"), format!("matrix size must be at least {MIN_N}")));
        }
        let lo = *self.n_list.iter().min().expect("non-empty");
        let hi = *self.n_list.iter().max().expect("non-empty");
        if hi < 8 * lo {
            return Err(Error::schema("n_list", "sizes must span at least a factor of 8"));
        }
        if self.t_grid.is_empty() {
            return Err(Error::schema("t_grid", "at least one time is required"));
        }
        if let Some(i) = self.t_grid.iter().position(|t| !t.is_finite()) {
            return Err(Error::schema(format!("t_grid[{i}]"), "grid values must be finite"));
        }
        for &n in &self.n_list {
            self.j_policy
                .index(n)
                .map_err(|_| Error::schema("j_policy", format!("row outside 1..={n}")))?;
        }
        Ok(())
    }
}

/// Mean and variance of one statistic at one (n, t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub statistic: String,
    pub t: f64,
    pub n: usize,
    pub mean_re: f64,
    pub mean_im: f64,
    pub variance: f64,
    pub limit_re: f64,
    pub limit_im: f64,
    /// |mean − limit|.
    pub gap: f64,
}

/// Log-log slope of variance against n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySlope {
    pub statistic: String,
    pub t: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub config_hash: String,
    pub rows: Vec<DecayRow>,
    pub slopes: Vec<DecaySlope>,
}

impl DecayReport {
    pub fn row(&self, statistic: &str, t: f64, n: usize) -> Option<&DecayRow> {
        self.rows.iter().find(|r| r.statistic == statistic && r.t == t && r.n == n)
    }

    pub fn slope(&self, statistic: &str, t: f64) -> Option<f64> {
        self.slopes.iter().find(|s| s.statistic == statistic && s.t == t).map(|s| s.slope)
    }
}

/// The five statistics of one matrix at each t.
fn replica_statistics(spec: &EnsembleSpec, n: usize, j: usize, t_grid: &[f64], seed: u64, replica: u64) -> Result<Vec<[Complex64; 5]>> {
    let m = sample_matrix(spec, n, seed, replica)?;
    let dec = eigh(&m)?;
    t_grid
        .iter()
        .map(|&t| {
            let s = lemma_statistics(&dec, j, &[t, t, t])?;
            let u_jj = propagator_row(&dec, j, t)[j];
            Ok([u_jj, s.v_n, s.v_n_pair, s.v_n1, s.v_n2.expect("three times given")])
        })
        .collect()
}

fn mean_and_variance(xs: &[Complex64]) -> (Complex64, f64) {
    let r = xs.len() as f64;
    let m = xs.iter().sum::<Complex64>() / r;
    let v = xs.iter().map(|x| (x - m).norm_sqr()).sum::<f64>() / (r - 1.0);
    (m, v)
}

pub fn lemma_decay_experiment(cfg: &LemmaConfig) -> Result<DecayReport> {
    cfg.validate()?;
    let w = cfg.spec.w();
    let limits: Vec<[Complex64; 5]> = cfg
        .t_grid
        .iter()
        .map(|&t| {
            let v = Complex64::new(v_of_t(t, w), 0.0);
            [v, v, v * v, Complex64::new(0.0, 0.0), v * v * v]
        })
        .collect();
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        let j = cfg.j_policy.index(n)?;
        let per_replica: Vec<Vec<[Complex64; 5]>> = (0..cfg.replicas as u64)
            .into_par_iter()
            .map(|r| replica_statistics(&cfg.spec, n, j, &cfg.t_grid, cfg.root_seed, r))
            .collect::<Result<_>>()?;
        for (ti, &t) in cfg.t_grid.iter().enumerate() {
            for (si, name) in STATISTICS.iter().enumerate() {
                let xs: Vec<Complex64> = per_replica.iter().map(|rep| rep[ti][si]).collect();
                let (m, variance) = mean_and_variance(&xs);
                let limit = limits[ti][si];
                rows.push(DecayRow {
                    statistic: name.to_string(),
                    t,
                    n,
                    mean_re: m.re,
                    mean_im: m.im,
                    variance,
                    limit_re: limit.re,
                    limit_im: limit.im,
                    gap: (m - limit).norm(),
                });
            }
        }
    }
    let mut slopes = Vec::new();
    for &t in &cfg.t_grid {
        for name in STATISTICS {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.statistic == name && r.t == t)
                .map(|r| ((r.n as f64).ln(), r.variance.max(f64::MIN_POSITIVE).ln()))
                .collect();
            slopes.push(DecaySlope { statistic: name.to_string(), t, slope: ols_slope(&points) });
        }
    }
    Ok(DecayReport { config_hash: fingerprint_hex(cfg)?, rows, slopes })
}
