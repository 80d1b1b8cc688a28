//! Monte Carlo experiments on sampled matrices, compared with the limit laws.
//!
//! Replica r of size n is `sample_matrix(spec, n, root_seed, r)`, so every
//! replica is reproducible alone and results do not depend on scheduling.
//! Samples are y_r = √n φ(M_r)_jj, centred by their cross-replica mean.

pub mod estimators;
pub mod lemma;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cumulants::{sample_cumulants, SampleCumulants};
use crate::digest::{fingerprint_hex, hash64_bytes};
use crate::ensemble::{sample_matrix, EnsembleSpec, SymmetricMatrix};
use crate::error::{Error, Result};
use crate::limits::{limit_cumulants, predict, LimitPrediction};
use crate::spectral::{eigh_rows, matrix_function_entry_partial, polynomial_entry};
use crate::stats::{lag1_autocorrelation, mean};
use crate::testfn::TestFunction;

pub use estimators::{
    covariance_estimate, empirical_cf, gaussian_limit_test, variance_estimate, CfPoint, GaussianTest, Verdict,
};
pub use lemma::{lemma_decay_experiment, DecayReport, DecayRow, DecaySlope, LemmaConfig};

/// Smallest replica count accepted by experiment configs.
pub const MIN_REPLICAS: usize = 100;
/// Smallest matrix size accepted by experiment configs.
pub const MIN_N: usize = 16;

/// Which diagonal entry to follow, in 1-based terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JPolicy {
    First,
    /// ⌈n/2⌉.
    Middle,
    Last,
    Explicit(usize),
}

impl JPolicy {
    /// The 0-based row for size n.
    pub fn index(&self, n: usize) -> Result<usize> {
        match *self {
            JPolicy::First => Ok(0),
            JPolicy::Middle => Ok(n.div_ceil(2) - 1),
            JPolicy::Last => Ok(n - 1),
            JPolicy::Explicit(j) if (1..=n).contains(&j) => Ok(j - 1),
            JPolicy::Explicit(j) => Err(Error::IndexOutOfRange { row: j, col: j, n }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub spec: EnsembleSpec,
    pub phi: TestFunction,
    pub phi2: Option<TestFunction>,
    pub n_list: Vec<usize>,
    pub j_policy: JPolicy,
    pub replicas: usize,
    pub root_seed: u64,
    pub x_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
}

impl ExperimentConfig {
    pub fn new(spec: EnsembleSpec, phi: TestFunction, n_list: Vec<usize>, replicas: usize, root_seed: u64) -> Self {
        Self {
            spec,
            phi,
            phi2: None,
            n_list,
            j_policy: JPolicy::Middle,
            replicas,
            root_seed,
            x_grid: vec![0.25, 0.5, 0.75, 1.0],
            t_grid: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas < MIN_REPLICAS {
            return Err(Error::schema("replicas", format!("need at least {MIN_REPLICAS} replicas")));
        }
        if self.n_list.is_empty() {
            return Err(Error::schema("n_list", "at least one matrix size is required"));
        }
        if let Some(i) = self.n_list.iter().position(|&n| n < MIN_N) {
            return Err(Error::schema(format!("n_list[{i}]"), format!("matrix size must be at least {MIN_N}")));
        }
        for (name, grid) in [("x_grid", &self.x_grid), ("t_grid", &self.t_grid)] {
            if let Some(i) = grid.iter().position(|v| !v.is_finite()) {
                return Err(Error::schema(format!("{name}[{i}]"), "grid values must be finite"));
            }
        }
        for &n in &self.n_list {
            self.j_policy
                .index(n)
                .map_err(|_| Error::schema("j_policy", format!("row outside 1..={n}")))?;
        }
        Ok(())
    }
}

/// Diagonal entries φ(M)_jj for several rows of one matrix.
pub fn phi_diagonal(m: &SymmetricMatrix, phi: &TestFunction, rows: &[usize]) -> Result<Vec<f64>> {
    if let Some(c) = phi.as_polynomial() {
        // Krylov route: exact matrix powers, no eigensolver.
        return rows.iter().map(|&j| polynomial_entry(m, c, j, j)).collect();
    }
    let dec = eigh_rows(m, rows)?;
    rows.iter().map(|&j| matrix_function_entry_partial(&dec, phi, j, j)).collect()
}

/// y_r = √n φ(M_r)_jj for r in 0..replicas and every requested row and φ.
///
/// Returns samples[f][row][r].
pub fn diagonal_samples(
    spec: &EnsembleSpec,
    phis: &[&TestFunction],
    n: usize,
    rows: &[usize],
    replicas: usize,
    seed: u64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let sqrt_n = (n as f64).sqrt();
    let per_replica: Vec<Vec<Vec<f64>>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let m = sample_matrix(spec, n, seed, r)?;
            phis.iter()
                .map(|phi| Ok(phi_diagonal(&m, phi, rows)?.into_iter().map(|v| v * sqrt_n).collect()))
                .collect::<Result<Vec<Vec<f64>>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..phis.len())
        .map(|f| (0..rows.len()).map(|k| per_replica.iter().map(|rep| rep[f][k]).collect()).collect())
        .collect())
}

/// z-scores of estimates against the limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// (estimate − limit)/se; None when se = 0 and the two differ.
    pub z_var: Option<f64>,
    pub z_cf: Vec<Option<f64>>,
    pub z_k3: Option<f64>,
    pub z_k4: Option<f64>,
    /// |z_var| ≤ 3.
    pub variance_consistent: bool,
    /// Every CF point within its radius plus a 0.05 finite-n budget.
    pub cf_consistent: bool,
    pub note: String,
}

/// Per-size Monte Carlo estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRecord {
    pub n: usize,
    /// 1-based row.
    pub j: usize,
    pub replicas: usize,
    /// Cross-replica mean of φ(M)_jj; y is centred by √n times this.
    pub mean_entry: f64,
    pub variance: crate::cumulants::Estimate,
    pub covariance: Option<crate::cumulants::Estimate>,
    pub cf: Vec<CfPoint>,
    pub cumulants: SampleCumulants,
    pub gaussian_test: Option<GaussianTest>,
    pub lag1_autocorrelation: f64,
    /// Hash of the raw y values' bit patterns.
    pub raw_hash: String,
    pub comparison: Comparison,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config_hash: String,
    pub root_seed: u64,
    pub records: Vec<SizeRecord>,
    pub prediction: LimitPrediction,
}

fn z_score(estimate: f64, limit: f64, se: f64) -> Option<f64> {
    let diff = estimate - limit;
    if se > 0.0 {
        Some(diff / se)
    } else if diff.abs() <= 1e-12 * (1.0 + limit.abs()) {
        Some(0.0)
    } else {
        None
    }
}

fn raw_hash(samples: &[f64]) -> String {
    let bytes: Vec<u8> = samples.iter().flat_map(|v| v.to_bits().to_le_bytes()).collect();
    format!("{:016x}", hash64_bytes(&bytes))
}

/// z-scores of one record against a prediction for the same (φ, ensemble).
pub fn compare_with_prediction(
    record: &SizeRecord,
    prediction: &LimitPrediction,
    limit_k: &[f64],
) -> Comparison {
    let z_var = z_score(record.variance.value, prediction.v_w, record.variance.se);
    let limit_cf = |x: f64| prediction.cf.iter().find(|row| row[0] == x).map(|row| (row[1], row[2]));
    let z_cf: Vec<Option<f64>> = record
        .cf
        .iter()
        .map(|p| {
            limit_cf(p.x).and_then(|(re, im)| {
                let d = num_complex::Complex64::new(p.re - re, p.im - im).norm();
                // The radius is a 95% bound: one standard error is radius/1.96.
                z_score(d, 0.0, p.radius / 1.96)
            })
        })
        .collect();
    let cf_consistent = record.cf.iter().all(|p| match limit_cf(p.x) {
        Some((re, im)) => num_complex::Complex64::new(p.re - re, p.im - im).norm() <= p.radius + 0.05,
        None => true,
    });
    let k = &record.cumulants.k;
    let z_k3 = (k.len() >= 3 && limit_k.len() >= 3).then(|| z_score(k[2].value, limit_k[2], k[2].se)).flatten();
    let z_k4 = (k.len() >= 4 && limit_k.len() >= 4).then(|| z_score(k[3].value, limit_k[3], k[3].se)).flatten();
    Comparison {
        z_var,
        z_cf,
        z_k3,
        z_k4,
        variance_consistent: z_var.is_some_and(|z| z.abs() <= 3.0),
        cf_consistent,
        note: "finite-n bias of order n^-1/2 is not subtracted".into(),
    }
}

/// Checks that a prediction belongs to the configured (φ, ensemble).
pub fn check_provenance(cfg: &ExperimentConfig, prediction: &LimitPrediction) -> Result<()> {
    let (e, p) = (fingerprint_hex(&cfg.spec)?, fingerprint_hex(&cfg.phi)?);
    if prediction.ensemble_ref != e || prediction.phi_ref != p {
        return Err(Error::Provenance(format!(
            "prediction is for ensemble {} / phi {}, experiment uses {e} / {p}",
            prediction.ensemble_ref, prediction.phi_ref
        )));
    }
    Ok(())
}

/// Summaries of one sample set against a prediction.
pub fn summarize(n: usize, j: usize, samples: Vec<f64>, x_grid: &[f64], prediction: &LimitPrediction, limit_k: &[f64]) -> Result<SizeRecord> {
    let m = mean(&samples);
    let centred: Vec<f64> = samples.iter().map(|y| y - m).collect();
    let mut record = SizeRecord {
        n,
        j: j + 1,
        replicas: samples.len(),
        mean_entry: m / (n as f64).sqrt(),
        variance: variance_estimate(&centred),
        covariance: None,
        cf: empirical_cf(&centred, x_grid)?,
        cumulants: sample_cumulants(&centred, 4)?,
        gaussian_test: if samples.len() >= 500 { Some(gaussian_limit_test(&centred)?) } else { None },
        lag1_autocorrelation: lag1_autocorrelation(&samples),
        raw_hash: raw_hash(&samples),
        comparison: Comparison {
            z_var: None,
            z_cf: Vec::new(),
            z_k3: None,
            z_k4: None,
            variance_consistent: false,
            cf_consistent: false,
            note: String::new(),
        },
        samples,
    };
    record.comparison = compare_with_prediction(&record, prediction, limit_k);
    Ok(record)
}

/// Draws the replicas for every n and compares them with the limit laws.
pub fn run_entry_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let prediction = predict(&cfg.phi, &cfg.spec, &cfg.x_grid)?;
    let limit_k = limit_cumulants(&cfg.phi, &cfg.spec, 4)?;
    let mut phis = vec![&cfg.phi];
    if let Some(p2) = &cfg.phi2 {
        phis.push(p2);
    }
    let mut records = Vec::with_capacity(cfg.n_list.len());
    for &n in &cfg.n_list {
        let j = cfg.j_policy.index(n)?;
        let mut samples = diagonal_samples(&cfg.spec, &phis, n, &[j], cfg.replicas, cfg.root_seed)?;
        let second = (samples.len() > 1).then(|| samples.pop().expect("two sample sets").remove(0));
        let first = samples.pop().expect("one sample set").remove(0);
        let mut record = summarize(n, j, first, &cfg.x_grid, &prediction, &limit_k)?;
        record.covariance = second.map(|s| covariance_estimate(&record.samples, &s));
        records.push(record);
    }
    Ok(ExperimentResult {
        config_hash: fingerprint_hex(cfg)?,
        root_seed: cfg.root_seed,
        records,
        prediction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::EntryDistribution;

    fn rademacher() -> EnsembleSpec {
        EnsembleSpec::paper_symmetric(EntryDistribution::rademacher(1.0).unwrap()).unwrap()
    }

    #[test]
    fn j_policy_indices() {
        assert_eq!(JPolicy::First.index(10).unwrap(), 0);
        assert_eq!(JPolicy::Middle.index(10).unwrap(), 4);
        assert_eq!(JPolicy::Middle.index(9).unwrap(), 4);
        assert_eq!(JPolicy::Last.index(10).unwrap(), 9);
        assert_eq!(JPolicy::Explicit(3).index(10).unwrap(), 2);
        assert!(JPolicy::Explicit(0).index(10).is_err());
        assert!(JPolicy::Explicit(11).index(10).is_err());
    }

    #[test]
    fn goe_linear_statistic_has_exact_variance() {
        let cfg = ExperimentConfig::new(EnsembleSpec::goe(1.0).unwrap(), TestFunction::monomial(1), vec![256], 2000, 1);
        let res = run_entry_experiment(&cfg).unwrap();
        let rec = &res.records[0];
        assert!((rec.variance.value - 2.0).abs() < 3.0 * rec.variance.se, "{:?}", rec.variance);
        assert!(rec.comparison.variance_consistent);
        assert!(rec.lag1_autocorrelation.abs() <= 4.0 / (2000f64).sqrt());
        assert_eq!(rec.gaussian_test.unwrap().verdict, Verdict::Pass);
    }

    #[test]
    fn rademacher_square_is_deterministic() {
        let cfg = ExperimentConfig::new(rademacher(), TestFunction::monomial(2), vec![64, 128], 200, 4);
        let res = run_entry_experiment(&cfg).unwrap();
        for rec in &res.records {
            assert!(rec.variance.value.abs() < 1e-12);
            assert_eq!(rec.comparison.z_var, Some(0.0));
        }
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let mut cfg = ExperimentConfig::new(rademacher(), TestFunction::monomial(3), vec![32], 150, 9);
        cfg.phi2 = Some(TestFunction::monomial(1));
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| serde_json::to_string(&run_entry_experiment(&cfg).unwrap()).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(3));
        let back: ExperimentResult = serde_json::from_str(&one).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), one);
        assert!(back.records[0].covariance.is_some());
    }

    #[test]
    fn wrong_fourth_cumulant_is_detected() {
        let spec = rademacher();
        let cfg = ExperimentConfig::new(spec.clone(), TestFunction::monomial(4), vec![256], 400, 2);
        let res = run_entry_experiment(&cfg).unwrap();
        let rec = &res.records[0];
        // κ₄ = 20 in place of −2.
        let mut wrong = res.prediction.clone();
        wrong.v_w = wrong.v_goe + wrong.kappa4_term * (20.0 / -2.0) + wrong.diag_term;
        let bad = compare_with_prediction(rec, &wrong, &[0.0, 20.0]);
        assert!(bad.z_var.unwrap().abs() > 10.0, "{:?}", bad.z_var);
        assert!(check_provenance(&cfg, &res.prediction).is_ok());
        let other = ExperimentConfig::new(EnsembleSpec::goe(1.0).unwrap(), TestFunction::monomial(4), vec![256], 400, 2);
        assert!(matches!(check_provenance(&other, &res.prediction), Err(Error::Provenance(_))));
    }

    #[test]
    fn non_polynomial_phi_uses_the_eigensolver() {
        let spec = EnsembleSpec::goe(1.0).unwrap();
        let m = sample_matrix(&spec, 40, 3, 0).unwrap();
        let square = TestFunction::tabulated(
            (0..=400).map(|i| -5.0 + 0.025 * i as f64).collect(),
            (0..=400).map(|i| (-5.0 + 0.025 * i as f64).powi(2)).collect(),
        )
        .unwrap();
        let via_eig = phi_diagonal(&m, &square, &[0, 39]).unwrap();
        let exact = phi_diagonal(&m, &TestFunction::monomial(2), &[0, 39]).unwrap();
        for (a, b) in via_eig.iter().zip(&exact) {
            // Linear interpolation of λ² overshoots by at most h²/4.
            assert!((a - b).abs() < 0.025f64.powi(2) / 4.0 + 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::new(rademacher(), TestFunction::monomial(2), vec![64], 50, 1);
        assert!(matches!(cfg.validate(), Err(Error::Schema { ref path, .. }) if path == "replicas"));
        cfg.replicas = 100;
        cfg.n_list = vec![64, 8];
        assert!(matches!(cfg.validate(), Err(Error::Schema { ref path, .. }) if path == "n_list[1]"));
        cfg.n_list = vec![64];
        cfg.j_policy = JPolicy::Explicit(65);
        assert!(cfg.validate().is_err());
    }
}
