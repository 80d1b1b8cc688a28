//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Tolerances are fixed by the acceptance criteria and never loosened. A
//! criterion listed in `ALLOWED_TO_FAIL` is still run and reported; any other
//! FAIL fails the test.

use std::time::Instant;

use num_complex::Complex64;
use wigner_core::cumulants::{stein_expansion_residual, stein_suite, SmoothFn};
use wigner_core::harness::{diagonal_samples, empirical_cf, gaussian_limit_test, variance_estimate};
use wigner_core::io::{raw_rows, render_report, summary_rows, to_json_pretty, write_csv};
use wigner_core::limits::{cov_limit_goe_tensor, cov_limit_wigner, kappa4_projection};
use wigner_core::semicircle::v_of_t;
use wigner_core::volterra::{fourier_pairing, resolvent_identity_error, volterra_suite};
use wigner_core::{
    lemma_decay_experiment, parse_config_str, predict, run_entry_experiment, sample_cumulants, var_limit,
    derive_seed, CounterRng, EnsembleSpec, EntryDistribution, JPolicy, LemmaConfig, Result, TestFunction,
};

/// Criteria that may report FAIL without failing the test run.
const ALLOWED_TO_FAIL: &[usize] = &[];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn rademacher() -> EnsembleSpec {
    EnsembleSpec::paper_symmetric(EntryDistribution::rademacher(1.0).unwrap()).unwrap()
}

fn goe() -> EnsembleSpec {
    EnsembleSpec::goe(1.0).unwrap()
}

fn mid(n: usize) -> usize {
    JPolicy::Middle.index(n).unwrap()
}

fn closed_form_engine() -> Result<Outcome> {
    let start = Instant::now();
    let v_goe = [2.0, 2.0, 10.0, 20.0];
    let v_rad = [2.0, 0.0, 10.0, 2.0];
    let mut worst: f64 = 0.0;
    for k in 1..=4 {
        let phi = TestFunction::monomial(k);
        let g = var_limit(&phi, &goe())?.v_w;
        let r = var_limit(&phi, &rademacher())?.v_w;
        // Independent oracle: tensor double quadrature plus the κ₄ projection.
        let oracle_goe = cov_limit_goe_tensor(&phi, &phi, 1.0, 64);
        let oracle_rad = oracle_goe - 2.0 * kappa4_projection(&phi, 1.0)?.powi(2);
        for (got, want) in [(g, v_goe[k - 1]), (r, v_rad[k - 1]), (oracle_goe, v_goe[k - 1]), (oracle_rad, v_rad[k - 1])] {
            worst = worst.max((got - want).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-10 && secs < 1.0, format!("max error {worst:.2e}, {secs:.3} s"))
}

fn degenerate_variance() -> Result<Outcome> {
    let start = Instant::now();
    let mut cfg = wigner_core::ExperimentConfig::new(rademacher(), TestFunction::monomial(2), vec![64, 256, 1024], 500, 11);
    cfg.j_policy = JPolicy::Middle;
    let res = run_entry_experiment(&cfg)?;
    let worst = res.records.iter().map(|r| r.variance.value.abs()).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-12 && res.prediction.v_w.abs() <= 1e-12 && secs < 120.0;
    outcome(pass, format!("max |variance| {worst:.2e}, v_w {:.2e}, {secs:.1} s", res.prediction.v_w))
}

/// Samples at n = 1024, R = 4000 for λ⁴ and λ³ under one ensemble.
struct BigRun {
    quartic: Vec<f64>,
    cubic: Vec<f64>,
}

fn big_run(spec: &EnsembleSpec, seed: u64) -> Result<BigRun> {
    let (l4, l3) = (TestFunction::monomial(4), TestFunction::monomial(3));
    let mut s = diagonal_samples(spec, &[&l4, &l3], 1024, &[mid(1024)], 4000, seed)?;
    let centre = |mut v: Vec<f64>| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|y| *y -= m);
        v
    };
    let cubic = centre(s.pop().unwrap().remove(0));
    let quartic = centre(s.pop().unwrap().remove(0));
    Ok(BigRun { quartic, cubic })
}

fn kappa4_effect(g: &BigRun, r: &BigRun) -> Result<Outcome> {
    let vg = variance_estimate(&g.quartic);
    let vr = variance_estimate(&r.quartic);
    let goe_ok = (vg.value - 20.0).abs() <= 3.0 * vg.se;
    let rad_ok = (vr.value - 2.0).abs() <= 0.6;
    let sep = (vg.value - vr.value).abs() / (vg.se.powi(2) + vr.se.powi(2)).sqrt();
    outcome(
        goe_ok && rad_ok && sep > 10.0,
        format!(
            "GOE {:.3} ± {:.3} (target 20), rademacher {:.3} ± {:.3} (target 2 ± 0.6), separation {sep:.1} se",
            vg.value, vg.se, vr.value, vr.se
        ),
    )
}

fn non_gaussian_limit(g: &BigRun, r: &BigRun) -> Result<Outcome> {
    let xs = [0.25, 0.5, 0.75, 1.0];
    let rf = r.cubic.len() as f64;
    let cf = empirical_cf(&r.cubic, &xs)?;
    let budget = 1.96 / rf.sqrt() + 0.05;
    let mut worst: f64 = 0.0;
    for p in &cf {
        let target = (-p.x * p.x).exp() * (2.0 * 2f64.sqrt() * p.x).cos();
        worst = worst.max((p.value() - Complex64::new(target, 0.0)).norm());
    }
    let kurt = sample_cumulants(&r.cubic, 4)?.excess_kurtosis.expect("positive variance");
    let kurt_ok = (kurt.value + 1.28).abs() <= 3.0 * kurt.se;
    let ks_rad = gaussian_limit_test(&r.cubic)?;
    let ks_goe = gaussian_limit_test(&g.cubic)?;
    outcome(
        worst <= budget && kurt_ok && !ks_rad.pass() && ks_goe.pass(),
        format!(
            "max CF gap {worst:.4} (budget {budget:.4}), excess kurtosis {:.3} ± {:.3} (target −1.28), KS rademacher {:.4} / GOE {:.4} (threshold {:.4})",
            kurt.value, kurt.se, ks_rad.ks_stat, ks_goe.ks_stat, ks_goe.threshold
        ),
    )
}

fn even_clt(r: &BigRun) -> Result<Outcome> {
    // Replicas 0..2000 are exactly an R = 2000 run under the same seed.
    let first = &r.quartic[..2000];
    let m = first.iter().sum::<f64>() / 2000.0;
    let centred: Vec<f64> = first.iter().map(|y| y - m).collect();
    let ks = gaussian_limit_test(&centred)?;
    outcome(ks.pass(), format!("KS {:.4} against threshold {:.4}", ks.ks_stat, ks.threshold))
}

fn lemma_decay() -> Result<Outcome> {
    let cfg = LemmaConfig {
        spec: goe(),
        n_list: vec![128, 256, 512, 1024],
        j_policy: JPolicy::Middle,
        t_grid: vec![1.0],
        replicas: 500,
        root_seed: 2024,
    };
    let rep = lemma_decay_experiment(&cfg)?;
    let s_u = rep.slope("u_jj", 1.0).unwrap();
    let s_v = rep.slope("v_n", 1.0).unwrap();
    let gap_u = rep.row("u_jj", 1.0, 1024).unwrap().gap;
    let r1 = rep.row("v_n1", 1.0, 1024).unwrap();
    let v1 = Complex64::new(r1.mean_re, r1.mean_im).norm();
    let gap2 = rep.row("v_n2", 1.0, 1024).unwrap().gap;
    let j1 = v_of_t(1.0, 1.0);
    let pass = (-1.3..=-0.7).contains(&s_u) && (-2.4..=-1.6).contains(&s_v) && gap_u <= 0.02 && v1 <= 0.05 && gap2 <= 0.05;
    outcome(
        pass,
        format!(
            "slope U_jj {s_u:.3}, slope v_n {s_v:.3}, |mean U_jj − J₁(2)| {gap_u:.4} (J₁(2) = {j1:.4}), |v̄_n1| {v1:.4}, |v̄_n2 − v³| {gap2:.4}"
        ),
    )
}

fn volterra_suite_check() -> Result<Outcome> {
    let hs = [0.04, 0.02, 0.01];
    let rows = volterra_suite(&hs)?;
    let mut fails = Vec::new();
    for r in &rows {
        let ok = match r.case.as_str() {
            c if c.starts_with("coveq") => {
                r.residual <= 50.0 * r.h * r.h && r.order_estimate.is_none_or(|o| (1.8..=2.2).contains(&o))
            }
            c if c.starts_with("v2_") => r.residual <= 10.0 * r.h * r.h,
            _ => true,
        };
        if !ok {
            fails.push(format!("{}@{}: {:.2e} order {:?}", r.case, r.h, r.residual, r.order_estimate));
        }
    }
    // z = 1 − i plus 100 seeded points of the lower half-plane.
    let rng = CounterRng::new(derive_seed(7, &[]));
    let zs: Vec<Complex64> = std::iter::once(Complex64::new(1.0, -1.0))
        .chain((0..100).map(|k| Complex64::new(8.0 * rng.open01(2 * k) - 4.0, -4.0 * rng.open01(2 * k + 1))))
        .collect();
    let worst = zs.iter().map(|&z| resolvent_identity_error(z, 1.0)).collect::<Result<Vec<_>>>()?;
    let worst = worst.into_iter().fold(0.0, f64::max);
    let orders: Vec<String> = rows
        .iter()
        .filter(|r| r.case.starts_with("coveq") && r.order_estimate.is_some())
        .map(|r| format!("{:.3}", r.order_estimate.unwrap()))
        .collect();
    outcome(
        fails.is_empty() && worst <= 1e-12,
        format!("coveq orders [{}], resolvent identity {worst:.1e}, violations {:?}", orders.join(", "), fails),
    )
}

fn bridge() -> Result<Outcome> {
    let phi = TestFunction::gaussian_damped(vec![0.0, 1.0], 1.5)?;
    let psi = TestFunction::gaussian_damped(vec![0.5, 0.0, 1.0], 2.0)?;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for spec in [rademacher(), goe()] {
        for (a, b) in [(&phi, &phi), (&psi, &psi), (&phi, &psi)] {
            let pairing = fourier_pairing(a, b, 1.0, spec.kappa4(), 4.0)?;
            let direct = cov_limit_wigner(a, b, &spec)?;
            worst = worst.max((pairing - direct).abs());
            parts.push(format!("{direct:.4}"));
        }
    }
    outcome(worst <= 1e-3, format!("max |pairing − covariance| {worst:.2e} over covariances [{}]", parts.join(", ")))
}

fn cumulant_identities() -> Result<Outcome> {
    let cases = stein_suite(4)?;
    let broken: Vec<String> = cases
        .iter()
        .filter(|c| !c.result.within_bound)
        .map(|c| format!("{} {:?} p={}", c.dist, c.phi, c.p))
        .collect();
    // Gaussian integration by parts: the single-cumulant expansion is exact.
    let g = EntryDistribution::gaussian(1.0)?;
    let mut exact: f64 = 0.0;
    for phi in [
        SmoothFn::Sin { frequency: 1.0 },
        SmoothFn::Cos { frequency: 0.7 },
        SmoothFn::GaussianBump { width: 0.8 },
        SmoothFn::Polynomial { coefficients: vec![0.5, -1.0, 0.0, 0.25] },
    ] {
        exact = exact.max(stein_expansion_residual(&g, &phi, 1)?.residual.abs());
    }
    outcome(
        broken.is_empty() && exact <= 1e-10,
        format!("{} cases, {} outside the bound, Gaussian identity residual {exact:.1e}", cases.len(), broken.len()),
    )
}

const DETERMINISM_CONFIG: &str = r#"{
    "spec": {"entry_dist": {"kind": "two_point", "w": 1.0, "p": 0.3}},
    "phi": {"kind": "gaussian_damped_polynomial", "coefficients": [0, 1, 0, 1], "width": 1.5},
    "phi2": {"kind": "polynomial", "coefficients": [0, 0, 1]},
    "n_list": [16, 32, 64, 128], "j_policy": "last", "replicas": 120, "root_seed": 77,
    "t_grid": [0.5, 1.0], "volterra_steps": [0.04, 0.02]
}"#;

/// Primary output bytes of every subcommand.
fn subcommand_outputs() -> Result<Vec<(&'static str, Vec<u8>)>> {
    let cfg = parse_config_str(DETERMINISM_CONFIG)?;
    let mut out = Vec::new();
    let prediction = predict(&cfg.phi, &cfg.spec, &cfg.x_grid)?;
    out.push(("predict", to_json_pretty(&prediction)?.into_bytes()));

    let result = run_entry_experiment(&cfg.experiment()?)?;
    let mut sim = to_json_pretty(&result)?.into_bytes();
    write_csv(&mut sim, &summary_rows(&result))?;
    write_csv(&mut sim, &raw_rows(&result))?;
    out.push(("simulate", sim));

    let mut vol = Vec::new();
    write_csv(&mut vol, &volterra_suite(&cfg.volterra_steps)?)?;
    out.push(("volterra", vol));

    let decay = lemma_decay_experiment(&cfg.lemma()?)?;
    let mut lem = to_json_pretty(&decay)?.into_bytes();
    write_csv(&mut lem, &decay.rows)?;
    write_csv(&mut lem, &decay.slopes)?;
    out.push(("lemma", lem));

    out.push(("report", render_report(&[result], &[decay]).into_bytes()));
    Ok(out)
}

fn determinism() -> Result<Outcome> {
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(subcommand_outputs)
    };
    let (a, b, c) = (run(1)?, run(3)?, run(1)?);
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .zip(&c)
        .filter(|((x, y), z)| x.1 != y.1 || x.1 != z.1)
        .map(|((x, _), _)| x.0)
        .collect();
    outcome(
        differing.is_empty(),
        format!("{} subcommands compared across 1 and 3 threads, differing: {:?}", a.len(), differing),
    )
}

#[test]
fn acceptance_criteria() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |id: usize, name: &'static str, o: Result<Outcome>| {
        let o = o.unwrap_or_else(|e| Outcome { pass: false, detail: format!("error: {e}") });
        println!("{} {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };
    record(1, "closed-form variances", closed_form_engine());
    record(2, "degenerate variance", degenerate_variance());
    let start = Instant::now();
    let runs = big_run(&goe(), 31).and_then(|g| big_run(&rademacher(), 32).map(|r| (g, r)));
    let big_secs = start.elapsed().as_secs_f64();
    match &runs {
        Ok((g, r)) => {
            record(3, "fourth-cumulant effect", kappa4_effect(g, r).map(|mut o| {
                o.detail.push_str(&format!(", sampling {big_secs:.0} s"));
                o
            }));
            record(4, "non-Gaussian limit", non_gaussian_limit(g, r));
            record(5, "even-φ CLT", even_clt(r));
        }
        Err(e) => {
            for (id, name) in [(3, "fourth-cumulant effect"), (4, "non-Gaussian limit"), (5, "even-φ CLT")] {
                record(id, name, Err(wigner_core::Error::Contract(format!("sampling failed: {e}"))));
            }
        }
    }
    record(6, "propagator decay", lemma_decay());
    record(7, "Volterra residuals", volterra_suite_check());
    record(8, "Fourier bridge", bridge());
    record(9, "cumulant expansion", cumulant_identities());
    record(10, "determinism", determinism());

    assert_eq!(results.len(), 10);
    let unexpected: Vec<usize> =
        results.iter().filter(|(id, _, o)| !o.pass && !ALLOWED_TO_FAIL.contains(id)).map(|r| r.0).collect();
    assert!(unexpected.is_empty(), "criteria failed: {unexpected:?}");
}
