//! Predicted resolvent-product kernel versus Monte Carlo.
//!
//! For each sample the normalized trace of `(X − ζ₁)⁻¹ (X* − ζ̄₂)⁻¹` is
//! measured and the sample mean is compared against the kernel prediction.
//! The acceptance criterion also verifies that the one-sample deviation
//! shrinks with dimension.

use rayon::ThreadPool;

use randnet::kernel::{empirical_resolvent_product, kernel_value, SpectralPoint};
use randnet::profile::{build_profile, ProfileKind, VarianceProfile};
use randnet::sampler::EntryLaw;
use randnet::C64;

use super::{draw, par_map_indices, ExpContext};
use crate::report::{aggregate, median, Check, CriterionResult, RunReport, SampleRow};

pub const NAME: &str = "kernel-vs-monte-carlo";

/// Outcome of one Monte Carlo batch against the kernel prediction.
pub struct McRun {
    pub predicted: C64,
    pub mean: C64,
    /// `|mean − predicted|`.
    pub deviation: f64,
    pub rows: Vec<SampleRow>,
    /// Real parts of the successful samples, in index order.
    pub re_values: Vec<f64>,
}

/// Samples `samples` matrices and compares the batch mean with the kernel.
pub fn monte_carlo(
    pool: &ThreadPool,
    profile: &VarianceProfile,
    point: &SpectralPoint,
    law: EntryLaw,
    seed: u64,
    samples: u64,
) -> anyhow::Result<McRun> {
    let predicted = kernel_value(profile, point)?;
    let products = par_map_indices(pool, samples, |i| {
        let x = draw(profile, law, seed, i);
        empirical_resolvent_product(&x, point)
    });
    let mut rows = Vec::with_capacity(products.len());
    let mut re_values = Vec::new();
    let mut sum = C64::new(0.0, 0.0);
    let mut ok = 0usize;
    for (i, product) in products.into_iter().enumerate() {
        match product {
            Ok(v) => {
                rows.push(SampleRow::ok(i as u64, v.re));
                re_values.push(v.re);
                sum += v;
                ok += 1;
            }
            Err(e) => rows.push(SampleRow::failed(i as u64, e.to_string())),
        }
    }
    anyhow::ensure!(ok > 0, "every sample failed");
    let mean = sum / ok as f64;
    Ok(McRun {
        predicted,
        mean,
        deviation: (mean - predicted).norm(),
        rows,
        re_values,
    })
}

/// The standalone `kernel-mc` subcommand.
pub fn run(ctx: &ExpContext) -> anyhow::Result<RunReport> {
    let profile = ctx.profile()?;
    let point = ctx.point()?;
    let mc = monte_carlo(
        &ctx.pool,
        &profile,
        &point,
        ctx.cfg.law,
        ctx.cfg.seed,
        ctx.cfg.samples as u64,
    )?;
    let mut report = ctx.report();
    report.predicted.insert("kernel_re".into(), mc.predicted.re);
    report.predicted.insert("kernel_im".into(), mc.predicted.im);
    let note = format!(
        "kernel {:+.6}{:+.6}i, mean of {} samples {:+.6}{:+.6}i",
        mc.predicted.re,
        mc.predicted.im,
        mc.re_values.len(),
        mc.mean.re,
        mc.mean.im
    );
    report.criteria.push(CriterionResult::new(
        1,
        NAME,
        vec![Check::le("mc-mean-vs-kernel", mc.deviation, 0.05).with_note(note)],
    ));
    report.samples = mc.rows;
    report.aggregate = aggregate(&mc.re_values);
    report.finish();
    Ok(report)
}

/// Median one-sample deviation from the kernel over `seeds` seeds.
fn median_one_sample_error(
    pool: &ThreadPool,
    n: usize,
    point: &SpectralPoint,
    seeds: u64,
) -> anyhow::Result<f64> {
    let profile = build_profile(&ProfileKind::Constant, n, 0)?;
    let k = kernel_value(&profile, point)?;
    let errors = par_map_indices(pool, seeds, |s| {
        let x = draw(&profile, EntryLaw::ComplexGaussian, s + 1, 0);
        empirical_resolvent_product(&x, point).map(|v| (v - k).norm())
    });
    let mut values = Vec::with_capacity(errors.len());
    for e in errors {
        values.push(e?);
    }
    Ok(median(&values))
}

/// Acceptance criterion 1 at frozen parameters.
pub fn criterion(pool: &ThreadPool) -> anyhow::Result<CriterionResult> {
    let point = SpectralPoint::new(C64::new(1.5, 0.0), C64::new(1.5, 0.0))?;
    let profile = build_profile(&ProfileKind::Constant, 400, 0)?;
    let mc = monte_carlo(pool, &profile, &point, EntryLaw::ComplexGaussian, 1, 50)?;
    let batch = Check::le("mc-mean-vs-kernel", mc.deviation, 0.05).with_note(format!(
        "n = 400, 50 complex-gaussian samples; kernel {:+.6}{:+.6}i, mean {:+.6}{:+.6}i",
        mc.predicted.re, mc.predicted.im, mc.mean.re, mc.mean.im
    ));

    let m200 = median_one_sample_error(pool, 200, &point, 20)?;
    let m800 = median_one_sample_error(pool, 800, &point, 20)?;
    let trend = Check::lt("median-error-ratio-800-over-200", m800 / m200, 1.0).with_note(format!(
        "median one-sample |error| over 20 seeds: {m200:.3e} at n = 200, {m800:.3e} at n = 800"
    ));
    Ok(CriterionResult::new(1, NAME, vec![batch, trend]))
}
