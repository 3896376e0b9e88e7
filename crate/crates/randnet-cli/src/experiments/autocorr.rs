//! Stationary autocorrelation of the noise-driven network below critical
//! coupling.
//!
//! The prediction is `R(τ) = e^{-τ√(1-g²)} / (2√(1-g²))`; the empirical
//! routes are the stationary-integral quadrature and, as an independent
//! cross-check, the Lyapunov-equation evaluation.

use std::path::Path;

use randnet::dynamics::{
    empirical_autocorr, empirical_autocorr_lyapunov, predicted_autocorr, AutocorrQuadrature,
};
use randnet::profile::{build_profile, ProfileKind};
use randnet::sampler::EntryLaw;

use super::{draw, ExpContext};
use crate::report::{emit_autocorr_csv, AutocorrRow, Check, CriterionResult, RunReport};

pub const NAME: &str = "autocorrelation";

/// Worst relative deviation between empirical and predicted curves, with the
/// τ it occurs at.
fn worst_relative(taus: &[f64], empirical: &[f64], predicted: &[f64]) -> (f64, f64) {
    let mut worst = 0.0f64;
    let mut at = taus[0];
    for ((&tau, &e), &p) in taus.iter().zip(empirical).zip(predicted) {
        let rel = (e - p).abs() / p.abs();
        if rel > worst {
            worst = rel;
            at = tau;
        }
    }
    (worst, at)
}

fn rows_from(taus: &[f64], empirical: &[f64], predicted: &[f64]) -> Vec<AutocorrRow> {
    taus.iter()
        .enumerate()
        .map(|(j, &tau)| AutocorrRow {
            tau,
            empirical: Some(empirical[j]),
            predicted: predicted[j],
            relative_error: Some((empirical[j] - predicted[j]).abs() / predicted[j].abs()),
        })
        .collect()
}

/// The standalone `autocorr` subcommand: one sample against the prediction.
pub fn run(ctx: &ExpContext) -> anyhow::Result<RunReport> {
    let cfg = &ctx.cfg;
    let taus = ctx.taus();
    let profile = ctx.profile()?;
    let predicted = predicted_autocorr(cfg.g, &taus)?;
    let x = draw(&profile, cfg.law, cfg.seed, 0);
    let quad = AutocorrQuadrature::default();
    let empirical = empirical_autocorr(&x, cfg.g, &taus, &quad)?;
    let (worst, at) = worst_relative(&taus, &empirical.values, &predicted.values);

    let mut report = ctx.report();
    report
        .predicted
        .insert("stationary_value".into(), predicted.values[0]);
    report.criteria.push(CriterionResult::new(
        9,
        NAME,
        vec![
            Check::le("empirical-vs-predicted", worst, 0.05).with_note(format!(
                "worst relative deviation at τ = {at}; quadrature du = {}, u_max = {}",
                quad.du, quad.u_max
            )),
        ],
    ));
    if let Some(dir) = &cfg.out_dir {
        let rows = rows_from(&taus, &empirical.values, &predicted.values);
        emit_autocorr_csv(&dir.join("autocorr.csv"), &rows)?;
    }
    report.finish();
    Ok(report)
}

/// Acceptance criterion 9 at frozen parameters.
pub fn criterion(out: Option<&Path>) -> anyhow::Result<CriterionResult> {
    // Closed-form spot value: R(0) = 1/(2√(1 − 0.36)) = 1/1.6 = 0.625.
    let spot = predicted_autocorr(0.6, &[0.0])?.values[0];
    let exact = Check::exact("stationary-value-exact", spot, 0.625)
        .with_note("g = 0.6, τ = 0; the closed form reduces to 1/1.6 in floating point");

    let taus: Vec<f64> = (0..=10).map(|i| 0.5 * i as f64).collect();
    let g = 0.5;
    let predicted = predicted_autocorr(g, &taus)?;

    let profile = build_profile(&ProfileKind::Constant, 400, 0)?;
    let x = draw(&profile, EntryLaw::ComplexGaussian, 1, 0);
    let quad = AutocorrQuadrature {
        du: 0.1,
        ..AutocorrQuadrature::default()
    };
    let empirical = empirical_autocorr(&x, g, &taus, &quad)?;
    let (worst, at) = worst_relative(&taus, &empirical.values, &predicted.values);
    let sampled = Check::le("empirical-vs-predicted", worst, 0.05).with_note(format!(
        "n = 400, g = 0.5, seed 1; worst relative deviation at τ = {at}"
    ));

    let small_profile = build_profile(&ProfileKind::Constant, 100, 0)?;
    let y = draw(&small_profile, EntryLaw::ComplexGaussian, 1, 0);
    let fine = AutocorrQuadrature {
        du: 0.05,
        ..AutocorrQuadrature::default()
    };
    let via_quadrature = empirical_autocorr(&y, g, &taus, &fine)?;
    let via_lyapunov = empirical_autocorr_lyapunov(&y, g, &taus)?;
    let route_dev = via_quadrature
        .values
        .iter()
        .zip(&via_lyapunov.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let routes = Check::le("quadrature-vs-lyapunov", route_dev, 1e-6)
        .with_note("same sample at n = 100, du = 0.05");

    if let Some(dir) = out {
        let rows = rows_from(&taus, &empirical.values, &predicted.values);
        emit_autocorr_csv(&dir.join("autocorr.csv"), &rows)?;
    }

    Ok(CriterionResult::new(9, NAME, vec![exact, sampled, routes]))
}
