//! Gap-width sweeps: run the decomposition over a ladder of widths,
//! read the probe gradients, and fit them against predicted rates.
//!
//! Each width is independent: its mesh, factorization, and extraction
//! run inside a panic boundary so one pathological width cannot take the
//! ladder down. Records always come back sorted by decreasing width and
//! every serialized number uses a fixed format, so rerunning a sweep on
//! any worker count reproduces the output byte for byte.
//!
//! Fitting offers two modes. A pure power rate supports a least-squares
//! slope in log-log coordinates with a pinned tolerance. A rate carrying
//! a logarithm never produces a straight log-log line at reachable
//! widths, so for those only the ratio test is sound: the measured value
//! divided by the predicted rate must stay within a bounded spread, and
//! its geometric mean is the single fitted constant of the experiment.

use crate::config::{ExperimentConfig, FitConfig, FitMode};
use crate::decomp::{build_decomposition, DecompositionSystem};
use crate::error::{Error, Result};
use crate::fem::{gradient_magnitudes, probe_points, ElasticConstants};
use crate::geometry::GapProfile;
use crate::mesh::MeshParams;
use crate::rates::{classify, BoundaryData, Locus, Prediction, RateExpr};
use crate::skyline::LinearSolver;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

/// Everything measured at one gap width.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRecord {
    pub eps: f64,
    /// Gradient magnitudes along the shortest-line fiber.
    pub sl_grad: Vec<f64>,
    /// Gradient magnitudes along the gap-layer fiber.
    pub cs_grad: Vec<f64>,
    pub sl_max: f64,
    pub cs_max: f64,
    /// Rigid coefficients `C^alpha`.
    pub c: [f64; 3],
    /// Energy loads `Q_beta`.
    pub q: [f64; 3],
    pub gram_diag: [f64; 3],
    /// Off-diagonal Gram entries `(a_12, a_13, a_23)`.
    pub gram_offdiag: [f64; 3],
    pub gram_asymmetry: f64,
    pub gram_min_eigen: f64,
    /// Smallest eigenvalue relative to the mean diagonal.
    pub spd_margin: f64,
    /// Wall time of the width's solve; runtime diagnostics only, kept
    /// out of serialized reports so reruns stay byte-identical.
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepFailure {
    pub eps: f64,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub failures: Vec<SweepFailure>,
}

fn one_width(
    profile: &GapProfile,
    eps: f64,
    params: &MeshParams,
    constants: ElasticConstants,
    p: u32,
    solver: LinearSolver,
    data: &BoundaryData,
) -> Result<SweepRecord> {
    let dec: DecompositionSystem =
        build_decomposition(profile, eps, params, constants, p, solver)?;
    let run = dec.extract(&|pt| data.eval(pt))?;
    let u = dec.reconstruct(&run);
    let probes = probe_points(profile, eps, dec.sys.space.mesh.cs_x);
    let sl_grad = gradient_magnitudes(&dec.sys.space, &u, &probes.shortest_line)?;
    let cs_grad = gradient_magnitudes(&dec.sys.space, &u, &probes.cylinder)?;
    let sl_max = sl_grad.iter().fold(0.0f64, |a, &b| a.max(b));
    let cs_max = cs_grad.iter().fold(0.0f64, |a, &b| a.max(b));
    let g = &dec.gram;
    Ok(SweepRecord {
        eps,
        sl_grad,
        cs_grad,
        sl_max,
        cs_max,
        c: [run.c[0], run.c[1], run.c[2]],
        q: [run.q[0], run.q[1], run.q[2]],
        gram_diag: [g[(0, 0)], g[(1, 1)], g[(2, 2)]],
        gram_offdiag: [g[(0, 1)], g[(0, 2)], g[(1, 2)]],
        gram_asymmetry: dec.gram_asymmetry,
        gram_min_eigen: dec.gram_min_eigen,
        spd_margin: dec.gram_min_eigen / (g.trace() / 3.0),
        wall_seconds: 0.0,
    })
}

pub(crate) fn describe_panic(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        format!("panic: {s}")
    } else if let Some(s) = payload.downcast_ref::<String>() {
        format!("panic: {s}")
    } else {
        "panic with non-string payload".into()
    }
}

/// Runs the configured ladder, one decomposition per width, in parallel.
/// Individual widths may fail (error or panic) without aborting the
/// sweep; if every width fails the sweep itself is the error.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    cfg.validate_for_sweep()?;
    let profile = cfg.profile()?;
    let constants = cfg.constants()?;
    let params = cfg.mesh_params();
    let data = BoundaryData::new(cfg.data);
    let (p, solver) = (cfg.solver.p, cfg.solver.linear_solver);
    let outcomes: Vec<(f64, std::result::Result<SweepRecord, String>)> = cfg
        .eps_list
        .par_iter()
        .map(|&eps| {
            let t0 = Instant::now();
            let run = catch_unwind(AssertUnwindSafe(|| {
                one_width(&profile, eps, &params, constants, p, solver, &data)
            }));
            let rec = match run {
                Ok(Ok(mut r)) => {
                    r.wall_seconds = t0.elapsed().as_secs_f64();
                    Ok(r)
                }
                Ok(Err(e)) => Err(e.to_string()),
                Err(payload) => Err(describe_panic(payload)),
            };
            (eps, rec)
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (eps, rec) in outcomes {
        match rec {
            Ok(r) => records.push(r),
            Err(message) => failures.push(SweepFailure { eps, message }),
        }
    }
    records.sort_by(|a, b| b.eps.partial_cmp(&a.eps).unwrap());
    failures.sort_by(|a, b| b.eps.partial_cmp(&a.eps).unwrap());
    if records.is_empty() {
        let first = failures
            .first()
            .map(|f| f.message.clone())
            .unwrap_or_else(|| "empty ladder".into());
        return Err(Error::Solve(format!(
            "every gap width failed; first failure: {first}"
        )));
    }
    Ok(SweepOutput { records, failures })
}

/// Runs the sweep on a dedicated pool with the requested worker count.
pub fn run_sweep_with_workers(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<SweepOutput> {
    match workers {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Solve(format!("worker pool: {e}")))?
            .install(|| run_sweep(cfg)),
        _ => run_sweep(cfg),
    }
}

/// The rate prediction for the configured datum, when the classification
/// applies to it.
pub fn sweep_prediction(cfg: &ExperimentConfig) -> Option<Prediction> {
    let profile = cfg.profile().ok()?;
    classify(&BoundaryData::new(cfg.data), &profile, cfg.geometry.n).ok()
}

/// Result of comparing measured values against a predicted rate.
#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    /// Resolved mode (never `Auto`).
    pub mode: FitMode,
    /// Log-log least-squares slope, in slope mode.
    pub slope: Option<f64>,
    /// Power the prediction says the slope should be.
    pub expected_slope: f64,
    /// Measured value over predicted value, per width.
    pub ratios: Vec<f64>,
    /// Largest ratio divided by smallest.
    pub spread: f64,
    /// Geometric mean of the ratios: the one fitted constant.
    pub c_fit: f64,
    pub pass: bool,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn power_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: format!("need matching lists of at least 2 points, got {} and {}", xs.len(), ys.len()),
        });
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in lx.iter().zip(&ly) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if den == 0.0 {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: "all abscissae coincide".into(),
        });
    }
    Ok(num / den)
}

/// Fits measured values against a predicted rate expression.
pub fn fit_rate(
    eps: &[f64],
    values: &[f64],
    predicted: &RateExpr,
    fit: &FitConfig,
) -> Result<RateFit> {
    if eps.len() != values.len() || eps.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "values",
            reason: format!(
                "need matching lists of at least 2 widths, got {} and {}",
                eps.len(),
                values.len()
            ),
        });
    }
    if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "values",
            reason: "rate fitting needs strictly positive finite values".into(),
        });
    }
    let mode = match fit.mode {
        FitMode::Auto => {
            if predicted.has_log() {
                FitMode::RateRatio
            } else {
                FitMode::PowerFit
            }
        }
        m => m,
    };
    if mode == FitMode::PowerFit && predicted.has_log() {
        return Err(Error::InvalidParameter {
            name: "fit",
            reason: "slope fitting is ill-posed for log-corrected rates; use the ratio mode".into(),
        });
    }
    let mut ratios = Vec::with_capacity(eps.len());
    for (&e, &v) in eps.iter().zip(values) {
        let pred = predicted.eval(e)?;
        if !(pred > 0.0) {
            return Err(Error::InvalidParameter {
                name: "predicted",
                reason: format!("predicted rate vanishes at eps = {e}"),
            });
        }
        ratios.push(v / pred);
    }
    let spread = ratios.iter().cloned().fold(f64::MIN, f64::max)
        / ratios.iter().cloned().fold(f64::MAX, f64::min);
    let c_fit = (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp();
    let (slope, pass) = match mode {
        FitMode::PowerFit => {
            let s = power_slope(eps, values)?;
            (Some(s), (s - predicted.eps_power).abs() <= fit.slope_tol)
        }
        FitMode::RateRatio => (None, spread <= fit.spread_factor),
        FitMode::Auto => unreachable!("mode was resolved above"),
    };
    Ok(RateFit {
        mode,
        slope,
        expected_slope: predicted.eps_power,
        ratios,
        spread,
        c_fit,
        pass,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// Writes the per-locus CSV report: two rows per width, with predicted
/// values and ratios filled in where the classification provides a rate
/// at that locus.
pub fn write_csv<W: Write>(
    out: &SweepOutput,
    prediction: Option<&Prediction>,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "eps", "locus", "grad", "c_1", "c_2", "c_3", "q_1", "q_2", "q_3", "spd_margin",
        "predicted", "ratio",
    ])
    .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for rec in &out.records {
        for (locus_name, locus, grad) in [
            ("shortest_line", Locus::ShortestLine, rec.sl_max),
            ("cylinder_surface", Locus::CylinderSurface, rec.cs_max),
        ] {
            let predicted = prediction.and_then(|p| p.lower.as_ref()).and_then(|(l, expr)| {
                let applies = *l == locus || *l == Locus::Both;
                applies.then(|| expr.eval(rec.eps)).and_then(|r| r.ok())
            });
            let (pred_s, ratio_s) = match predicted {
                Some(p) if p > 0.0 => (fmt(p), fmt(grad / p)),
                _ => (String::new(), String::new()),
            };
            w.write_record([
                fmt(rec.eps),
                locus_name.to_string(),
                fmt(grad),
                fmt(rec.c[0]),
                fmt(rec.c[1]),
                fmt(rec.c[2]),
                fmt(rec.q[0]),
                fmt(rec.q[1]),
                fmt(rec.q[2]),
                fmt(rec.spd_margin),
                pred_s,
                ratio_s,
            ])
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonReport<'a> {
    version: u32,
    config: &'a ExperimentConfig,
    records: &'a [SweepRecord],
    failures: &'a [SweepFailure],
}

/// Writes the versioned JSON report.
pub fn write_json<W: Write>(cfg: &ExperimentConfig, out: &SweepOutput, writer: W) -> Result<()> {
    let report = JsonReport {
        version: 1,
        config: cfg,
        records: &out.records,
        failures: &out.failures,
    };
    serde_json::to_writer_pretty(writer, &report)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(())
}

/// Per-locus maxima across all records, for fitting.
pub fn locus_series(out: &SweepOutput, locus: Locus) -> (Vec<f64>, Vec<f64>) {
    let eps: Vec<f64> = out.records.iter().map(|r| r.eps).collect();
    let vals: Vec<f64> = out
        .records
        .iter()
        .map(|r| match locus {
            Locus::CylinderSurface => r.cs_max,
            _ => r.sl_max,
        })
        .collect();
    (eps, vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{FitConfig, GradingConfig};
    use crate::fem::PROBE_COUNT;
    use crate::rates::Preset;
    use approx::assert_relative_eq;

    fn coarse_config(preset: Preset) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            geometry: Default::default(),
            solver: Default::default(),
            data: preset,
            eps_list: vec![1e-2, 7e-3, 5e-3],
            fit: Default::default(),
        };
        cfg.geometry.grading = GradingConfig { q_v: 2, g_h: 1.0 };
        cfg.solver.p = 1;
        cfg
    }

    #[test]
    fn zero_datum_sweeps_to_zero() {
        let out = run_sweep(&coarse_config(Preset::Zero)).unwrap();
        assert_eq!(out.records.len(), 3);
        assert!(out.failures.is_empty());
        for r in &out.records {
            assert_eq!(r.sl_grad.len(), PROBE_COUNT);
            assert!(r.sl_max < 1e-10, "sl {}", r.sl_max);
            assert!(r.cs_max < 1e-10, "cs {}", r.cs_max);
            assert!(r.spd_margin > 0.0);
        }
        // Sorted by decreasing width.
        assert!(out.records.windows(2).all(|w| w[0].eps > w[1].eps));
    }

    #[test]
    fn rigid_datum_has_gradient_free_reconstruction() {
        let out = run_sweep(&coarse_config(Preset::Rigid { alpha: 1 })).unwrap();
        for r in &out.records {
            assert!(r.sl_max < 1e-6, "sl {}", r.sl_max);
            assert!(r.cs_max < 1e-6, "cs {}", r.cs_max);
            assert!((r.c[0] - 1.0).abs() < 1e-6, "c = {:?}", r.c);
        }
    }

    #[test]
    fn synthetic_power_rate_fits_exactly() {
        let eps = [1e-2, 1e-3, 1e-4, 1e-5];
        let values: Vec<f64> = eps.iter().map(|&e: &f64| 3.0 * e.powf(-0.5)).collect();
        let expr = RateExpr {
            eps_power: -0.5,
            log_power: 0,
            prefactor: 1.0,
            label: "eps^(-1/2)".into(),
        };
        let fit = fit_rate(&eps, &values, &expr, &FitConfig::default()).unwrap();
        assert_eq!(fit.mode, FitMode::PowerFit);
        assert_relative_eq!(fit.slope.unwrap(), -0.5, epsilon = 1e-12);
        assert_relative_eq!(fit.c_fit, 3.0, epsilon = 1e-10);
        assert!(fit.spread < 1.0 + 1e-12);
        assert!(fit.pass);
    }

    #[test]
    fn synthetic_log_rate_needs_ratio_mode_and_fits() {
        let expr = RateExpr {
            eps_power: -0.5,
            log_power: 1,
            prefactor: 1.0,
            label: "|ln eps| eps^(-1/2)".into(),
        };
        let eps = [1e-2, 1e-3, 1e-4];
        let values: Vec<f64> = eps.iter().map(|&e| 2.0 * expr.eval(e).unwrap()).collect();
        let fit = fit_rate(&eps, &values, &expr, &FitConfig::default()).unwrap();
        assert_eq!(fit.mode, FitMode::RateRatio);
        assert!(fit.slope.is_none());
        assert_relative_eq!(fit.spread, 1.0, epsilon = 1e-12);
        assert_relative_eq!(fit.c_fit, 2.0, epsilon = 1e-12);
        assert!(fit.pass);
        // Forcing the slope mode on a log-corrected rate is refused.
        let forced = FitConfig {
            mode: FitMode::PowerFit,
            ..Default::default()
        };
        assert!(fit_rate(&eps, &values, &expr, &forced).is_err());
    }

    #[test]
    fn wrong_power_fails_with_the_observed_slope() {
        let eps = [1e-2, 1e-3, 1e-4, 1e-5];
        let values: Vec<f64> = eps.iter().map(|&e: &f64| e.powf(-0.75)).collect();
        let expr = RateExpr {
            eps_power: -0.5,
            log_power: 0,
            prefactor: 1.0,
            label: "eps^(-1/2)".into(),
        };
        let fit = fit_rate(&eps, &values, &expr, &FitConfig::default()).unwrap();
        assert!(!fit.pass);
        assert_relative_eq!(fit.slope.unwrap(), -0.75, epsilon = 1e-10);
    }

    #[test]
    fn degenerate_fit_inputs_rejected() {
        let expr = RateExpr {
            eps_power: -0.5,
            log_power: 0,
            prefactor: 1.0,
            label: "eps^(-1/2)".into(),
        };
        let fit = FitConfig::default();
        assert!(fit_rate(&[1e-2], &[1.0], &expr, &fit).is_err());
        assert!(fit_rate(&[1e-2, 1e-3], &[1.0, 0.0], &expr, &fit).is_err());
        assert!(fit_rate(&[1e-2, 1e-3], &[1.0, -2.0], &expr, &fit).is_err());
    }

    #[test]
    fn reports_are_byte_stable_across_worker_counts() {
        let cfg = coarse_config(Preset::Zero);
        let out1 = run_sweep_with_workers(&cfg, Some(1)).unwrap();
        let out2 = run_sweep_with_workers(&cfg, Some(2)).unwrap();
        let mut csv1 = Vec::new();
        let mut csv2 = Vec::new();
        write_csv(&out1, None, &mut csv1).unwrap();
        write_csv(&out2, None, &mut csv2).unwrap();
        assert_eq!(csv1, csv2);
        let mut json1 = Vec::new();
        let mut json2 = Vec::new();
        write_json(&cfg, &out1, &mut json1).unwrap();
        write_json(&cfg, &out2, &mut json2).unwrap();
        assert_eq!(json1, json2);
    }

    #[test]
    fn csv_shape_and_json_metadata() {
        let cfg = coarse_config(Preset::Zero);
        let out = run_sweep(&cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&out, None, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 2 * out.records.len());
        assert!(lines[0].starts_with("eps,locus,grad,c_1"));
        assert!(lines[1].contains("shortest_line"));
        assert!(lines[2].contains("cylinder_surface"));
        let mut jbuf = Vec::new();
        write_json(&cfg, &out, &mut jbuf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&jbuf).unwrap();
        assert_eq!(v["version"], 1);
        assert_eq!(v["records"].as_array().unwrap().len(), 3);
        assert!(v["config"]["data"]["preset"].is_string());
    }
}
