//! Extremal spectrum of the saturated self-energy operator, and the
//! degeneration rate of the zero-coupling stability operator as the
//! spectral point approaches the unit disk.

use randnet::dynamics::fit_decay_exponent;
use randnet::kernel::SpectralPoint;
use randnet::mde::{f_operator_top_spectrum, stability_min_singular, FOperatorSpectrum};
use randnet::profile::{build_profile, perron_vectors, ProfileKind, VarianceProfile};
use randnet::C64;

use super::ExpContext;
use crate::report::{Check, CriterionResult, RunReport};

pub const NAME: &str = "saturation-operator";

/// Worst measurement-versus-prediction deviations of the four chiral pairs.
pub struct SpectrumDeviations {
    /// `max |σ_max − coefficient|` over the pairs.
    pub coefficient_dev: f64,
    /// Worst eigenmatrix residual.
    pub residual: f64,
    pub spectrum: FOperatorSpectrum,
}

/// Measures the top spectrum and compares it with the predicted pair
/// coefficients.
pub fn spectrum_deviations(
    profile: &VarianceProfile,
    point: &SpectralPoint,
) -> anyhow::Result<SpectrumDeviations> {
    let pair = perron_vectors(profile)?;
    let spectrum = f_operator_top_spectrum(profile, &pair, point)?;
    let mut coefficient_dev = 0.0f64;
    let mut residual = 0.0f64;
    for p in &spectrum.pairs {
        coefficient_dev = coefficient_dev.max((p.sigma_max - p.coefficient).abs());
        residual = residual.max(p.eigen_residual);
    }
    Ok(SpectrumDeviations {
        coefficient_dev,
        residual,
        spectrum,
    })
}

/// `σ_min` of the zero-coupling stability operator at `ζ₁ = ζ₂ = 1 + Δ`
/// for each offset, plus the fitted log-log slope in Δ.
pub fn degeneration_fit(
    profile: &VarianceProfile,
    deltas: &[f64],
) -> anyhow::Result<(Vec<f64>, f64)> {
    let mut sigmas = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let z = C64::new(1.0 + d, 0.0);
        let point = SpectralPoint::new(z, z)?;
        sigmas.push(stability_min_singular(profile, &point)?);
    }
    let lo = deltas.first().copied().unwrap_or(0.1) * 0.9;
    let hi = deltas.last().copied().unwrap_or(0.5) * 1.1;
    let fit = fit_decay_exponent(deltas, &sigmas, (lo, hi))?;
    Ok((sigmas, fit.slope))
}

/// The standalone `f-operator` subcommand.
pub fn run(ctx: &ExpContext) -> anyhow::Result<RunReport> {
    let profile = ctx.profile()?;
    let point = ctx.point()?;
    let dev = spectrum_deviations(&profile, &point)?;
    let mut report = ctx.report();
    report
        .predicted
        .insert("max_abs_eigenvalue".into(), dev.spectrum.max_abs_eigenvalue);
    let extremes: Vec<String> = dev
        .spectrum
        .extreme_values()
        .iter()
        .map(|v| format!("{v:+.6}"))
        .collect();
    report.criteria.push(CriterionResult::new(
        4,
        NAME,
        vec![
            Check::le("sigma-vs-coefficient", dev.coefficient_dev, 1e-8)
                .with_note(format!("extreme values: {}", extremes.join(", "))),
            Check::le("eigenmatrix-residual", dev.residual, 1e-8),
        ],
    ));
    report.finish();
    Ok(report)
}

/// Acceptance criterion 4 at frozen parameters.
pub fn criterion() -> anyhow::Result<CriterionResult> {
    let point = SpectralPoint::new(C64::new(1.5, 0.0), C64::new(1.5, 0.0))?;
    let expected = 1.0 / 2.25;
    let mut worst_extreme = 0.0f64;
    let mut worst_residual = 0.0f64;
    for kind in [ProfileKind::Constant, ProfileKind::RowStochasticRandom] {
        let profile = build_profile(&kind, 50, 7)?;
        let dev = spectrum_deviations(&profile, &point)?;
        for p in &dev.spectrum.pairs {
            worst_extreme = worst_extreme.max((p.sigma_max - expected).abs());
        }
        worst_residual = worst_residual.max(dev.residual);
    }
    let extremes = Check::le("extreme-values-vs-prediction", worst_extreme, 1e-8).with_note(
        "all four pair extremes vs ±1/|ζ|² at ζ₁ = ζ₂ = 1.5, constant and row-stochastic, n = 50",
    );
    let residuals = Check::le("eigenmatrix-residual", worst_residual, 1e-8);

    let profile = build_profile(&ProfileKind::RowStochasticRandom, 50, 7)?;
    let deltas = [0.1, 0.2, 0.5];
    let (sigmas, slope) = degeneration_fit(&profile, &deltas)?;
    let sigma_list: Vec<String> = deltas
        .iter()
        .zip(&sigmas)
        .map(|(d, s)| format!("Δ = {d}: {s:.4e}"))
        .collect();
    let degeneration = Check::ge("sigma-min-exponent", slope, -1.2).with_note(format!(
        "σ_min of the stability operator: {}",
        sigma_list.join(", ")
    ));

    Ok(CriterionResult::new(
        4,
        NAME,
        vec![extremes, residuals, degeneration],
    ))
}
