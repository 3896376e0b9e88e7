//! Trace functional calculus: contour traces versus the series oracle, and
//! per-sample empirical traces versus direct matrix evaluation.
//!
//! The battery runs the monomials `ζ^k`, `k = 0..=3`.  On the profile side
//! the double-contour trace must match the power-series value; on the sample
//! side the empirical contour trace must match `⟨X^k, X^k⟩_F / n` computed
//! with plain matrix products.

use ndarray::Array2;

use randnet::kernel::{
    empirical_functional_trace, functional_trace, polynomial_trace_series, AnalyticFunction,
    Contour,
};
use randnet::linalg::eye_c;
use randnet::profile::{build_profile, ProfileKind, VarianceProfile};
use randnet::sampler::EntryLaw;
use randnet::C64;

use super::{draw, ExpContext};
use crate::report::{Check, CriterionResult, RunReport};

pub const NAME: &str = "functional-calculus";

const MAX_DEGREE: usize = 3;

fn matrix_power(x: &Array2<C64>, k: usize) -> Array2<C64> {
    let mut out = eye_c(x.nrows());
    for _ in 0..k {
        out = out.dot(x);
    }
    out
}

/// Worst deviation of the contour trace from the series oracle over the
/// monomial battery.
pub fn monomial_battery(profile: &VarianceProfile, contour: &Contour) -> anyhow::Result<f64> {
    let mut worst = 0.0f64;
    for k in 0..=MAX_DEGREE {
        let f = AnalyticFunction::monomial(k);
        let lhs = functional_trace(profile, &f, &f, contour)?;
        let mut coeffs = vec![C64::new(0.0, 0.0); k + 1];
        coeffs[k] = C64::new(1.0, 0.0);
        let rhs = polynomial_trace_series(profile, &coeffs, &coeffs);
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

/// Worst deviation of the empirical contour trace from the direct matrix
/// evaluation on one sample.
pub fn empirical_battery(x: &Array2<C64>, contour: &Contour) -> anyhow::Result<f64> {
    let n = x.nrows() as f64;
    let mut worst = 0.0f64;
    for k in 0..=MAX_DEGREE {
        let f = AnalyticFunction::monomial(k);
        let lhs = empirical_functional_trace(x, &f, &f, contour)?;
        let xk = matrix_power(x, k);
        let direct = xk.iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
        worst = worst.max((lhs - C64::new(direct, 0.0)).norm());
    }
    Ok(worst)
}

/// The standalone `functional` subcommand: the battery on the configured
/// profile plus one sampled matrix.
pub fn run(ctx: &ExpContext) -> anyhow::Result<RunReport> {
    let profile = ctx.profile()?;
    let contour = Contour::new(ctx.cfg.contour_radius, ctx.cfg.contour_nodes)?;
    let profile_dev = monomial_battery(&profile, &contour)?;
    let x = draw(&profile, ctx.cfg.law, ctx.cfg.seed, 0);
    let empirical_dev = empirical_battery(&x, &contour)?;

    let mut report = ctx.report();
    report.criteria.push(CriterionResult::new(
        2,
        NAME,
        vec![
            Check::le("contour-vs-series", profile_dev, 1e-8)
                .with_note(format!("monomials up to degree {MAX_DEGREE}")),
            Check::le("empirical-vs-direct", empirical_dev, 1e-8)
                .with_note(format!("one sample at n = {}", ctx.cfg.n)),
        ],
    ));
    report.finish();
    Ok(report)
}

/// Acceptance criterion 2 at frozen parameters.
pub fn criterion() -> anyhow::Result<CriterionResult> {
    let contour = Contour::new(2.0, 64)?;
    let profiles = [
        ("constant", ProfileKind::Constant),
        ("row-stochastic", ProfileKind::RowStochasticRandom),
        (
            "two-block",
            ProfileKind::TwoBlock {
                within: 1.5,
                across: 0.5,
            },
        ),
    ];
    let mut worst_profile = 0.0f64;
    let mut worst_profile_id = "";
    for (id, kind) in &profiles {
        let profile = build_profile(kind, 50, 7)?;
        let dev = monomial_battery(&profile, &contour)?;
        if dev > worst_profile {
            worst_profile = dev;
            worst_profile_id = id;
        }
    }
    let series = Check::le("contour-vs-series", worst_profile, 1e-8).with_note(format!(
        "worst over three profiles at n = 50 (worst: {worst_profile_id})"
    ));

    let profile = build_profile(&ProfileKind::Constant, 200, 0)?;
    let mut worst_empirical = 0.0f64;
    for index in 0..2u64 {
        let x = draw(&profile, EntryLaw::ComplexGaussian, 1, index);
        worst_empirical = worst_empirical.max(empirical_battery(&x, &contour)?);
    }
    let empirical = Check::le("empirical-vs-direct", worst_empirical, 1e-8)
        .with_note("worst over two complex-gaussian samples at n = 200");

    Ok(CriterionResult::new(2, NAME, vec![series, empirical]))
}
