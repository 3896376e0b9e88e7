//! Dyson fixed point: equation residuals, and the kernel recovered through
//! the coupling derivative of the off-diagonal block trace.

use rayon::ThreadPool;

use randnet::kernel::{kernel_value, SpectralPoint};
use randnet::mde::{mde_dalpha_kernel, mde_solve, MdeOptions};
use randnet::profile::{build_profile, ProfileKind, VarianceProfile};
use randnet::C64;

use super::{par_map_indices, ExpContext};
use crate::report::{Check, CriterionResult, RunReport};

pub const NAME: &str = "dyson-equation";

const STEP: f64 = 1e-4;

/// Residual and derivative-versus-kernel deviation at one spectral point.
pub struct PointCheck {
    /// Worst fixed-point residual over the two solves at `α = ±h`.
    pub residual: f64,
    /// `|d/dα trace − kernel|`.
    pub derivative_dev: f64,
    pub kernel: C64,
    pub derivative: C64,
}

/// Solves the fixed point at `α = ±h` and differentiates through it.
pub fn point_check(
    profile: &VarianceProfile,
    point: &SpectralPoint,
    h: f64,
) -> anyhow::Result<PointCheck> {
    let opts = MdeOptions::default();
    let zero = C64::new(0.0, 0.0);
    let plus = mde_solve(profile, point, h, zero, &opts)?;
    let minus = mde_solve(profile, point, -h, zero, &opts)?;
    let derivative = mde_dalpha_kernel(profile, point, h)?;
    let kernel = kernel_value(profile, point)?;
    Ok(PointCheck {
        residual: plus.residual.max(minus.residual),
        derivative_dev: (derivative - kernel).norm(),
        kernel,
        derivative,
    })
}

/// The standalone `mde-check` subcommand: one spectral point.
pub fn run(ctx: &ExpContext) -> anyhow::Result<RunReport> {
    let profile = ctx.profile()?;
    let point = ctx.point()?;
    let check = point_check(&profile, &point, STEP)?;
    let mut report = ctx.report();
    report.predicted.insert("kernel_re".into(), check.kernel.re);
    report.predicted.insert("kernel_im".into(), check.kernel.im);
    report.criteria.push(CriterionResult::new(
        3,
        NAME,
        vec![
            Check::le("fixed-point-residual", check.residual, 1e-12),
            Check::le("derivative-vs-kernel", check.derivative_dev, 1e-6).with_note(format!(
                "central difference with h = {STEP:.0e}; derivative {:+.8}{:+.8}i",
                check.derivative.re, check.derivative.im
            )),
        ],
    ));
    report.finish();
    Ok(report)
}

/// Acceptance criterion 3 at frozen parameters: a 3×3 grid of real spectral
/// points crossed with three profiles, plus the closed-form spot value.
pub fn criterion(pool: &ThreadPool) -> anyhow::Result<CriterionResult> {
    let zs = [1.2, 1.5, 2.0];
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
    let mut combos = Vec::new();
    for (id, kind) in &profiles {
        for &z1 in &zs {
            for &z2 in &zs {
                combos.push((*id, kind.clone(), z1, z2));
            }
        }
    }
    let results = par_map_indices(pool, combos.len() as u64, |i| {
        let (id, kind, z1, z2) = &combos[i as usize];
        let run = || -> anyhow::Result<PointCheck> {
            let profile = build_profile(kind, 40, 7)?;
            let point = SpectralPoint::new(C64::new(*z1, 0.0), C64::new(*z2, 0.0))?;
            point_check(&profile, &point, STEP)
        };
        (*id, *z1, *z2, run())
    });

    let mut worst_residual = 0.0f64;
    let mut worst_dev = 0.0f64;
    let mut worst_dev_at = String::new();
    for (id, z1, z2, result) in results {
        let check = result?;
        worst_residual = worst_residual.max(check.residual);
        if check.derivative_dev > worst_dev {
            worst_dev = check.derivative_dev;
            worst_dev_at = format!("{id} at ({z1}, {z2})");
        }
    }
    let residual = Check::le("fixed-point-residual", worst_residual, 1e-12)
        .with_note("worst over 27 profile/point combinations at n = 40");
    let derivative = Check::le("derivative-vs-kernel", worst_dev, 1e-6)
        .with_note(format!("worst combination: {worst_dev_at}"));

    // Closed form: constant profile at ζ₁ = ζ₂ = 2 has kernel 1/(ζ₁ζ̄₂ − 1) = 1/3.
    let profile = build_profile(&ProfileKind::Constant, 40, 0)?;
    let point = SpectralPoint::new(C64::new(2.0, 0.0), C64::new(2.0, 0.0))?;
    let derivative_at_4 = mde_dalpha_kernel(&profile, &point, STEP)?;
    let spot = Check::le(
        "constant-profile-spot-value",
        (derivative_at_4 - C64::new(1.0 / 3.0, 0.0)).norm(),
        1e-6,
    )
    .with_note(format!(
        "derivative at ζ₁ = ζ₂ = 2 is {:+.8}{:+.8}i, expected 1/3",
        derivative_at_4.re, derivative_at_4.im
    ));

    Ok(CriterionResult::new(
        3,
        NAME,
        vec![residual, derivative, spot],
    ))
}
