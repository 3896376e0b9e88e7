//! Squared-norm decay curves at and below the critical coupling.
//!
//! At `g = 1` the predicted curve falls like `t^{-1/2}` and the per-sample
//! trace evaluation is compared against it; below criticality the decay is
//! exponential at asymptotic rate `2(1 − g)`.

use std::f64::consts::PI;
use std::path::Path;

use rayon::ThreadPool;

use randnet::dynamics::{
    empirical_sqnorm_trace, fit_decay_exponent, fit_decay_rate, geometric_times, predicted_sqnorm,
    DecayCurve,
};
use randnet::profile::{build_profile, perron_vectors, PerronPair, ProfileKind};
use randnet::sampler::EntryLaw;

use super::{draw, par_map_indices, ExpContext};
use crate::report::{
    aggregate, emit_decay_csv, Check, CriterionResult, DecayRow, RunReport, SampleRow,
};

pub const NAME: &str = "critical-decay";

/// `1/(2√π)`, the critical-decay amplitude: `√t · value → amplitude`.
pub fn critical_amplitude() -> f64 {
    0.5 / PI.sqrt()
}

/// Relative deviation of `√t · predicted(t)` from the critical amplitude
/// at `t = 100`.
pub fn predicted_tail_deviation(pair: &PerronPair) -> anyhow::Result<f64> {
    let curve = predicted_sqnorm(pair, 1.0, &[100.0])?;
    let amp = critical_amplitude();
    Ok((10.0 * curve.values[0] - amp).abs() / amp)
}

/// Pointwise mean and standard error across sampled curves.
fn mean_stderr(curves: &[DecayCurve]) -> (Vec<f64>, Vec<Option<f64>>) {
    let count = curves[0].values.len();
    let m = curves.len();
    let mut means = Vec::with_capacity(count);
    let mut errs = Vec::with_capacity(count);
    for j in 0..count {
        let vals: Vec<f64> = curves.iter().map(|c| c.values[j]).collect();
        let mean = vals.iter().sum::<f64>() / m as f64;
        means.push(mean);
        errs.push(if m >= 2 {
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
            Some((var / m as f64).sqrt())
        } else {
            None
        });
    }
    (means, errs)
}

fn decay_rows(
    times: &[f64],
    means: Option<&[f64]>,
    errs: Option<&[Option<f64>]>,
    predicted: &[f64],
) -> Vec<DecayRow> {
    times
        .iter()
        .enumerate()
        .map(|(j, &t)| DecayRow {
            t,
            empirical_mean: means.map(|m| m[j]),
            empirical_stderr: errs.and_then(|e| e[j]),
            predicted: Some(predicted[j]),
        })
        .collect()
}

/// The standalone `decay` subcommand.
pub fn run(ctx: &ExpContext) -> anyhow::Result<RunReport> {
    let cfg = &ctx.cfg;
    let times = ctx.times()?;
    let profile = ctx.profile()?;
    let pair = perron_vectors(&profile)?;
    let predicted = predicted_sqnorm(&pair, cfg.g, &times)?;

    let mut report = ctx.report();
    let mut checks = Vec::new();
    if cfg.g == 1.0 {
        report
            .predicted
            .insert("critical_amplitude".into(), critical_amplitude());
        checks.push(
            Check::le(
                "predicted-critical-tail",
                predicted_tail_deviation(&pair)?,
                0.01,
            )
            .with_note("relative deviation of √t · value from the amplitude at t = 100"),
        );
    } else {
        report
            .predicted
            .insert("asymptotic_rate".into(), 2.0 * (1.0 - cfg.g));
    }

    let csv_rows = if cfg.samples == 0 {
        // Prediction-only mode: no sampling, gate the closed-form slope.
        if cfg.g == 1.0 {
            let long_times = geometric_times(10.0, 400.0, 80)?;
            let long = predicted_sqnorm(&pair, 1.0, &long_times)?;
            let fit = fit_decay_exponent(&long_times, &long.values, (50.0, 200.0))?;
            checks.push(
                Check::in_range("prediction-slope", fit.slope, -0.52, -0.48)
                    .with_note("log-log fit of the closed-form curve over t ∈ [50, 200]"),
            );
        }
        decay_rows(&times, None, None, &predicted.values)
    } else {
        let window = (cfg.t_min.max(10.0), cfg.t_max.min(60.0));
        let outcomes = par_map_indices(&ctx.pool, cfg.samples as u64, |i| {
            let x = draw(&profile, cfg.law, cfg.seed, i);
            empirical_sqnorm_trace(&x, cfg.g, &times)
        });
        let mut curves = Vec::new();
        let mut slopes = Vec::new();
        for (i, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                Ok(curve) => {
                    let fit = if cfg.g == 1.0 {
                        fit_decay_exponent(&times, &curve.values, window)
                    } else {
                        fit_decay_rate(&times, &curve.values, window)
                    };
                    match fit {
                        Ok(f) => {
                            report.samples.push(SampleRow::ok(i as u64, f.slope));
                            slopes.push(f.slope);
                        }
                        Err(e) => report
                            .samples
                            .push(SampleRow::failed(i as u64, e.to_string())),
                    }
                    curves.push(curve);
                }
                Err(e) => report
                    .samples
                    .push(SampleRow::failed(i as u64, e.to_string())),
            }
        }
        anyhow::ensure!(!curves.is_empty(), "every sample failed");
        if !slopes.is_empty() {
            let mean_slope = slopes.iter().sum::<f64>() / slopes.len() as f64;
            let kind = if cfg.g == 1.0 {
                "log-log slope"
            } else {
                "semilog slope"
            };
            checks.push(
                Check::info("empirical-mean-slope", mean_slope).with_note(format!(
                    "{kind} over t ∈ [{}, {}] across {} samples",
                    window.0,
                    window.1,
                    slopes.len()
                )),
            );
        }
        let (means, errs) = mean_stderr(&curves);
        report.aggregate = aggregate(&slopes);
        decay_rows(&times, Some(&means), Some(&errs), &predicted.values)
    };

    if let Some(dir) = &cfg.out_dir {
        emit_decay_csv(&dir.join("decay.csv"), &csv_rows)?;
    }

    report.criteria.push(CriterionResult::new(7, NAME, checks));
    report.finish();
    Ok(report)
}

/// Acceptance criterion 7 at frozen parameters.
///
/// The one-sample slope checks cannot be stable at this size: the
/// `t^{-1/2}` law holds for `1 ≪ t ≪ √n`, and at `n = 1000` the upper
/// half of the fit window `[10, 60]` sits past `√n ≈ 31.6`, where the
/// trace is dominated by whichever eigenvalues of the particular draw
/// land nearest (or outside) the unit circle.  Single-draw slopes over
/// that window scatter by an order of magnitude more than the bands
/// allow, in both directions, so both the in-band check and the
/// cross-law spread check report their measured values and fail
/// honestly.
///
/// What the ensemble does support at this size is the geometric-mean
/// curve (equivalently: the mean of per-draw log-log slopes, since the
/// least-squares slope is linear in the log-values) restricted to the
/// validity window `[10, 30]`.  That estimator is gated at the same
/// band and spread tolerances and passes for all three entry laws.
pub fn criterion(pool: &ThreadPool, out: Option<&Path>) -> anyhow::Result<CriterionResult> {
    let pair = perron_vectors(&build_profile(&ProfileKind::Constant, 100, 0)?)?;
    let tail = Check::le(
        "predicted-critical-tail",
        predicted_tail_deviation(&pair)?,
        0.01,
    )
    .with_note("√t · value vs 1/(2√π) at t = 100, constant profile");

    let profile = build_profile(&ProfileKind::Constant, 1000, 0)?;
    let times = geometric_times(1.0, 100.0, 40)?;
    let laws = [
        EntryLaw::ComplexGaussian,
        EntryLaw::RealGaussian,
        EntryLaw::Rademacher,
    ];
    let outcomes = par_map_indices(pool, laws.len() as u64, |i| {
        let x = draw(&profile, laws[i as usize], 1, 0);
        let curve = empirical_sqnorm_trace(&x, 1.0, &times)?;
        let fit = fit_decay_exponent(&times, &curve.values, (10.0, 60.0))?;
        anyhow::Ok((curve, fit.slope))
    });
    let mut curves = Vec::new();
    let mut slopes = Vec::new();
    for outcome in outcomes {
        let (curve, slope) = outcome?;
        curves.push(curve);
        slopes.push(slope);
    }
    let slope_note: Vec<String> = laws
        .iter()
        .zip(&slopes)
        .map(|(law, s)| format!("{law}: {s:.4}"))
        .collect();
    let one_sample = Check::in_range("one-sample-critical-slope", slopes[0], -0.6, -0.4).with_note(
        "log-log fit over t ∈ [10, 60], n = 1000, seed 1, complex-gaussian; past √n ≈ 31.6 \
             the trace follows the draw's extreme eigenvalues, so a single-draw slope over this \
             window is realization noise rather than the t^(-1/2) law",
    );
    let spread = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    let stability = Check::le("slope-spread-across-laws", spread, 0.2).with_note(format!(
        "{}; one draw per law over t ∈ [10, 60] at n = 1000, where the window extends past \
             √n and each draw's edge eigenvalues set its own slope",
        slope_note.join(", ")
    ));

    // Geometric-mean estimator on the validity window [10, 30]: twelve draws
    // per law, mean of per-draw log-log slopes (= slope of the geomean curve).
    const GEOMEAN_SAMPLES: u64 = 12;
    let times30 = geometric_times(1.0, 30.0, 40)?;
    let geo_outcomes = par_map_indices(pool, laws.len() as u64 * GEOMEAN_SAMPLES, |j| {
        let law = laws[(j / GEOMEAN_SAMPLES) as usize];
        let x = draw(&profile, law, 1, j % GEOMEAN_SAMPLES);
        let curve = empirical_sqnorm_trace(&x, 1.0, &times30)?;
        let fit = fit_decay_exponent(&times30, &curve.values, (10.0, 30.0))?;
        anyhow::Ok(fit.slope)
    });
    let geo_slopes: Vec<f64> = geo_outcomes.into_iter().collect::<Result<_, _>>()?;
    let geo_means: Vec<f64> = (0..laws.len())
        .map(|l| {
            let chunk =
                &geo_slopes[l * GEOMEAN_SAMPLES as usize..(l + 1) * GEOMEAN_SAMPLES as usize];
            chunk.iter().sum::<f64>() / GEOMEAN_SAMPLES as f64
        })
        .collect();
    let geo_note: Vec<String> = laws
        .iter()
        .zip(&geo_means)
        .map(|(law, s)| format!("{law}: {s:.4}"))
        .collect();
    let geo_dev = geo_means
        .iter()
        .map(|s| (s + 0.5).abs())
        .fold(f64::NEG_INFINITY, f64::max);
    let geo_band = Check::le("geomean-slope-in-band", geo_dev, 0.1).with_note(format!(
        "worst deviation from -1/2 of the geometric-mean slope over t ∈ [10, 30], twelve draws \
         per law; {}",
        geo_note.join(", ")
    ));
    let geo_spread = geo_means.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - geo_means.iter().cloned().fold(f64::INFINITY, f64::min);
    let geo_stability = Check::le("geomean-slope-spread", geo_spread, 0.2).with_note(
        "spread of the geometric-mean slopes across the three entry laws on the validity window",
    );

    if let Some(dir) = out {
        let predicted = predicted_sqnorm(&pair, 1.0, &times)?;
        for (law, curve) in laws.iter().zip(&curves) {
            let rows = decay_rows(&times, Some(&curve.values), None, &predicted.values);
            let file = match law {
                EntryLaw::ComplexGaussian => "decay.csv".to_string(),
                other => format!("decay-{other}.csv"),
            };
            emit_decay_csv(&dir.join(file), &rows)?;
        }
    }

    Ok(CriterionResult::new(
        7,
        NAME,
        vec![tail, one_sample, stability, geo_band, geo_stability],
    ))
}
