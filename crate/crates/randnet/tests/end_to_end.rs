//! Cross-module flows through the public API, exercised the way a consumer
//! would: build a profile, evaluate the deterministic prediction, draw real
//! samples, and compare the two routes. Each route is computed by
//! independent code paths, so agreement here checks the wiring between
//! modules rather than any single module's internals.

use approx::assert_abs_diff_eq;
use ndarray::Array2;

use randnet::dynamics::{
    empirical_autocorr, empirical_autocorr_lyapunov, predicted_autocorr, predicted_sqnorm,
    semicircle_prediction, AutocorrQuadrature,
};
use randnet::kernel::{
    empirical_functional_trace, empirical_resolvent_product, functional_trace, kernel_value,
    polynomial_trace_series, AnalyticFunction, Contour, SpectralPoint,
};
use randnet::mde::{linearization_check, mde_dalpha_kernel, mde_solve, spectral_gap, MdeOptions};
use randnet::profile::{build_profile, mean, perron_vectors, ProfileKind, VarianceProfile};
use randnet::sampler::{sample_matrix, EnsembleSpec, EntryLaw};
use randnet::C64;

fn draw(profile: &VarianceProfile, law: EntryLaw, seed: u64, sample_index: u64) -> Array2<C64> {
    sample_matrix(&EnsembleSpec {
        law,
        profile,
        seed,
        sample_index,
    })
}

fn symmetric_point(z: f64) -> SpectralPoint {
    SpectralPoint::new(C64::new(z, 0.0), C64::new(z, 0.0)).expect("point outside the unit disk")
}

#[test]
fn derivative_route_reproduces_the_kernel_closed_form() {
    // On the constant profile the kernel is 1/(ζ₁ζ̄₂ − 1); at ζ₁ = ζ₂ = 2
    // that is exactly 1/3, and the derivative of the linearized resolvent
    // trace must agree with it through a completely different computation.
    let profile = build_profile(&ProfileKind::Constant, 24, 0).expect("constant profile");
    let point = symmetric_point(2.0);
    let kernel = kernel_value(&profile, &point).expect("kernel value");
    assert_abs_diff_eq!(kernel.re, 1.0 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(kernel.im, 0.0, epsilon = 1e-12);

    let derivative = mde_dalpha_kernel(&profile, &point, 1e-4).expect("derivative route");
    assert_abs_diff_eq!((derivative - kernel).norm(), 0.0, epsilon = 1e-8);
}

#[test]
fn derivative_and_kernel_routes_agree_on_structured_profiles() {
    // Same two routes at genuinely complex spectral parameters and
    // non-constant profiles, where no closed form is available.
    let point =
        SpectralPoint::new(C64::new(1.2, 0.4), C64::new(1.5, -0.2)).expect("admissible point");
    for kind in [
        ProfileKind::RowStochasticRandom,
        ProfileKind::TwoBlock {
            within: 1.5,
            across: 0.5,
        },
    ] {
        let profile = build_profile(&kind, 30, 5).expect("profile");
        let solution = mde_solve(
            &profile,
            &point,
            1e-4,
            C64::new(0.0, 0.0),
            &MdeOptions::default(),
        )
        .expect("fixed point");
        assert!(
            solution.residual <= 1e-12,
            "residual {:.3e} too large for {kind:?}",
            solution.residual
        );
        let kernel = kernel_value(&profile, &point).expect("kernel value");
        let derivative = mde_dalpha_kernel(&profile, &point, 1e-4).expect("derivative route");
        assert!(
            (derivative - kernel).norm() <= 1e-6,
            "routes disagree by {:.3e} on {kind:?}",
            (derivative - kernel).norm()
        );
    }
}

#[test]
fn sampled_functional_trace_matches_the_direct_product() {
    // The contour evaluation of tr f(X) g(X*) against literal matrix
    // powers: for f = g = ζ² the direct value is ‖X²‖²_F / n.
    let profile = build_profile(&ProfileKind::Constant, 60, 0).expect("constant profile");
    let x = draw(&profile, EntryLaw::ComplexGaussian, 11, 0);
    let contour = Contour::new(2.0, 64).expect("contour");
    let f = AnalyticFunction::monomial(2);
    let via_contour = empirical_functional_trace(&x, &f, &f, &contour).expect("contour route");

    let x2 = x.dot(&x);
    let direct = x2.iter().map(|v| v.norm_sqr()).sum::<f64>() / 60.0;
    assert_abs_diff_eq!(via_contour.re, direct, epsilon = 1e-8);
    assert_abs_diff_eq!(via_contour.im, 0.0, epsilon = 1e-8);

    // And the prediction side of the same identity: contour quadrature of
    // the kernel against the moment series, on a profile with structure.
    let structured = build_profile(
        &ProfileKind::TwoBlock {
            within: 1.5,
            across: 0.5,
        },
        40,
        7,
    )
    .expect("two-block profile");
    let coeffs = [C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
    let series = polynomial_trace_series(&structured, &coeffs, &coeffs);
    let quad = functional_trace(&structured, &f, &f, &contour).expect("predicted trace");
    assert_abs_diff_eq!((quad - series).norm(), 0.0, epsilon = 1e-10);
}

#[test]
fn single_sample_resolvent_product_concentrates_on_the_kernel() {
    // One draw at n = 200 keeps the empirical resolvent product within a
    // few percent of the deterministic kernel value 1/(ζ₁ζ̄₂ − 1) = 0.8.
    let profile = build_profile(&ProfileKind::Constant, 200, 0).expect("constant profile");
    let point = symmetric_point(1.5);
    let x = draw(&profile, EntryLaw::ComplexGaussian, 5, 0);
    let empirical = empirical_resolvent_product(&x, &point).expect("resolvent product");
    assert!(
        (empirical - C64::new(0.8, 0.0)).norm() <= 0.05,
        "empirical {empirical} strays from 0.8"
    );
}

#[test]
fn drawn_linearizations_have_a_gap_and_satisfy_the_block_identity() {
    let point = symmetric_point(1.5);

    // Away from the spectrum the sampled linearization keeps a spectral
    // gap of order Δ², far above the κΔ²/2 threshold.
    let profile = build_profile(&ProfileKind::Constant, 100, 0).expect("constant profile");
    let x = draw(&profile, EntryLaw::ComplexGaussian, 9, 0);
    let gap = spectral_gap(&x, &point, 0.0, 0.05).expect("gap report");
    assert!(
        gap.psi,
        "gap {:.4} under threshold {:.4}",
        gap.min_abs_eigenvalue, gap.threshold
    );

    // The (3,1)-block trace of the inverted linearization divided by α
    // equals the direct resolvent product; the identity is exact, so the
    // deviation is pure roundoff.
    let small = build_profile(&ProfileKind::Constant, 20, 0).expect("constant profile");
    let y = draw(&small, EntryLaw::ComplexGaussian, 2, 0);
    let report = linearization_check(&y, &point, 1e-3).expect("linearization report");
    assert!(
        report.deviation <= 1e-8,
        "block identity off by {:.3e}",
        report.deviation
    );
}

#[test]
fn sampling_is_reproducible_with_independent_streams() {
    let profile = build_profile(&ProfileKind::Constant, 16, 0).expect("constant profile");

    // Same (seed, index) → bit-identical matrix, no shared-state drift.
    let a = draw(&profile, EntryLaw::ComplexGaussian, 3, 0);
    let again = draw(&profile, EntryLaw::ComplexGaussian, 3, 0);
    assert_eq!(a, again);

    // Different index → a different stream, not a shifted copy.
    let b = draw(&profile, EntryLaw::ComplexGaussian, 3, 1);
    assert!(a.iter().zip(b.iter()).any(|(u, v)| u != v));

    // Entry-law contracts: real Gaussian draws stay real, and Rademacher
    // draws have magnitude exactly √s_jk — here s_jk = 1/16, so 1/4.
    let real = draw(&profile, EntryLaw::RealGaussian, 3, 0);
    assert!(real.iter().all(|v| v.im == 0.0));
    let signs = draw(&profile, EntryLaw::Rademacher, 3, 0);
    for v in signs.iter() {
        assert_abs_diff_eq!(v.norm(), 0.25, epsilon = 1e-15);
    }
}

#[test]
fn closed_form_laws_hit_their_frozen_values() {
    // Critical decay: √t · value → 1/(2√π), already within 1% at t = 100.
    let pair = perron_vectors(&build_profile(&ProfileKind::Constant, 50, 0).expect("profile"))
        .expect("perron pair");
    let tail = predicted_sqnorm(&pair, 1.0, &[100.0]).expect("critical curve");
    let amplitude = 0.5 / std::f64::consts::PI.sqrt();
    assert!((10.0 * tail.values[0] - amplitude).abs() / amplitude <= 0.01);

    // Stationary autocorrelation at τ = 0 reduces to 1/(2√(1 − g²)):
    // at g = 0.6 that is 1/1.6 = 0.625 in floating point, bit for bit.
    let stationary = predicted_autocorr(0.6, &[0.0]).expect("autocorrelation");
    assert_eq!(stationary.values[0], 0.625);

    // Symmetric-coupling contrast: the semicircle curve reaches its
    // (1/(2√π)) t^{-3/2} asymptote to within 3% by t = 50.
    let herm = semicircle_prediction(&[50.0]).expect("semicircle curve");
    let asymptote = amplitude * 50.0_f64.powf(-1.5);
    assert!((herm.values[0] - asymptote).abs() / asymptote <= 0.03);
}

#[test]
fn autocorrelation_quadrature_and_lyapunov_routes_agree() {
    // The oscillator-sum quadrature and the Lyapunov-equation route share
    // no code beyond the sample itself.
    let profile = build_profile(&ProfileKind::Constant, 40, 0).expect("constant profile");
    let x = draw(&profile, EntryLaw::ComplexGaussian, 3, 0);
    let taus: Vec<f64> = (0..9).map(|k| 0.5 * k as f64).collect();
    let via_quadrature =
        empirical_autocorr(&x, 0.5, &taus, &AutocorrQuadrature::default()).expect("quadrature");
    let via_lyapunov = empirical_autocorr_lyapunov(&x, 0.5, &taus).expect("lyapunov");
    for (a, b) in via_quadrature.values.iter().zip(&via_lyapunov.values) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-6);
    }
    assert!(via_quadrature.values[0] > 0.0);
}

#[test]
fn perron_data_satisfies_the_eigenvector_relations() {
    for kind in [
        ProfileKind::Constant,
        ProfileKind::RowStochasticRandom,
        ProfileKind::TwoBlock {
            within: 1.5,
            across: 0.5,
        },
    ] {
        let profile = build_profile(&kind, 60, 3).expect("profile");
        // Profiles are normalized to unit spectral radius on construction.
        assert_abs_diff_eq!(profile.rho(), 1.0, epsilon = 1e-10);
        let pair = perron_vectors(&profile).expect("perron pair");
        assert_abs_diff_eq!(mean(pair.v_r.view()), 1.0, epsilon = 1e-12);
        let s_vr = profile.apply_s(pair.v_r.view());
        let st_vl = profile.apply_s_adjoint(pair.v_l.view());
        for i in 0..60 {
            assert!(pair.v_r[i] > 0.0 && pair.v_l[i] > 0.0);
            assert_abs_diff_eq!(s_vr[i], pair.v_r[i], epsilon = 1e-10);
            assert_abs_diff_eq!(st_vl[i], pair.v_l[i], epsilon = 1e-10);
        }
    }
}
