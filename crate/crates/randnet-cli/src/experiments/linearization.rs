//! The Hermitized linearization: its inverted off-diagonal block against the
//! direct two-resolvent product, and the coupling-scaling probe.

use rayon::ThreadPool;

use randnet::kernel::SpectralPoint;
use randnet::mde::linearization_check;
use randnet::profile::{build_profile, ProfileKind};
use randnet::sampler::EntryLaw;
use randnet::C64;

use super::{draw, par_map_indices, ExpContext};
use crate::report::{median, Check, CriterionResult, RunReport};

pub const NAME: &str = "linearization-block";

/// The standalone `linearization` subcommand: one sample at the configured
/// coupling.
pub fn run(ctx: &ExpContext) -> anyhow::Result<RunReport> {
    let profile = ctx.profile()?;
    let point = ctx.point()?;
    let x = draw(&profile, ctx.cfg.law, ctx.cfg.seed, 0);
    let check = linearization_check(&x, &point, ctx.cfg.alpha)?;
    let mut report = ctx.report();
    report
        .predicted
        .insert("direct_product_re".into(), check.direct_product.re);
    report
        .predicted
        .insert("direct_product_im".into(), check.direct_product.im);
    report.criteria.push(CriterionResult::new(
        5,
        NAME,
        vec![
            Check::le("block-trace-vs-direct", check.deviation, 1e-4).with_note(format!(
                "α = {}, block trace / α = {:+.8}{:+.8}i",
                ctx.cfg.alpha, check.block_trace_over_alpha.re, check.block_trace_over_alpha.im
            )),
            Check::info("spectral-gap", check.gap.min_abs_eigenvalue),
        ],
    ));
    report.finish();
    Ok(report)
}

/// Acceptance criterion 5 at frozen parameters.
///
/// The small-case agreement check is attainable.  The doubling-ratio check
/// is not: the inverted block reproduces the resolvent product exactly at
/// every coupling, so the deviation sits at numerical roundoff and carries
/// no α² component whose ratio could land in [3, 5].  The check reports the
/// measured ratio honestly instead of being skipped.
pub fn criterion(pool: &ThreadPool) -> anyhow::Result<CriterionResult> {
    let point = SpectralPoint::new(C64::new(1.5, 0.0), C64::new(1.5, 0.0))?;

    let small_profile = build_profile(&ProfileKind::Constant, 3, 0)?;
    let x3 = draw(&small_profile, EntryLaw::ComplexGaussian, 1, 0);
    let small = linearization_check(&x3, &point, 1e-3)?;
    let small_check = Check::le("small-case-agreement", small.deviation, 1e-4)
        .with_note("n = 3, α = 1e-3".to_string());

    let profile = build_profile(&ProfileKind::Constant, 50, 0)?;
    let alpha = 5e-3;
    let outcomes = par_map_indices(pool, 10, |s| {
        let x = draw(&profile, EntryLaw::ComplexGaussian, s + 1, 0);
        let at_alpha = linearization_check(&x, &point, alpha)?;
        let at_double = linearization_check(&x, &point, 2.0 * alpha)?;
        anyhow::Ok((at_alpha.deviation, at_double.deviation))
    });
    let mut ratios = Vec::with_capacity(10);
    let mut worst_single = 0.0f64;
    let mut worst_double = 0.0f64;
    for outcome in outcomes {
        let (d1, d2) = outcome?;
        worst_single = worst_single.max(d1);
        worst_double = worst_double.max(d2);
        ratios.push(d2 / d1.max(1e-300));
    }
    let ratio_check = Check::in_range("deviation-doubling-ratio", median(&ratios), 3.0, 5.0)
        .with_note(format!(
            "10 seeds at n = 50, α = {alpha} doubled to {}: deviations are at roundoff \
             (max {worst_single:.2e} and {worst_double:.2e}); the block identity is exact \
             at z = 0, so no α² term exists and the ratio of roundoff residuals is noise",
            2.0 * alpha
        ));

    Ok(CriterionResult::new(
        5,
        NAME,
        vec![small_check, ratio_check],
    ))
}
