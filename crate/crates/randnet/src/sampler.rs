//! Reproducible sampling of random coupling matrices.
//!
//! Entries are independent, centered, and scaled so that entry `(i, j)` has
//! second moment `s_ij` taken from a [`VarianceProfile`].  Four entry laws
//! are supported; all of them share the same normalization so spectral
//! statistics can be compared across laws (universality checks).
//!
//! Reproducibility contract: a draw is a pure function of `(law, profile,
//! seed, sample_index)`.  The seed selects an RNG key, the sample index
//! selects an independent stream under that key, and entries are always
//! consumed in row-major order — so results are identical across platforms,
//! runs, and thread counts.

use ndarray::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::profile::VarianceProfile;
use crate::C64;

/// Stream index reserved for Hermitian comparison draws so they never
/// collide with coupling-matrix draws under the same seed.
const WIGNER_STREAM: u64 = 0x5749_474e_4552_0000;

/// Distribution of a single (unit-variance) matrix entry before scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryLaw {
    /// Circularly symmetric complex Gaussian: `N(0, 1/2) + i N(0, 1/2)`.
    ComplexGaussian,
    /// Standard real Gaussian.
    RealGaussian,
    /// Uniform on the fourth roots of unity `{1, i, −1, −i}`.
    Rademacher,
    /// Real uniform on `[−√3, √3]` (unit variance).
    Uniform,
}

impl EntryLaw {
    /// All supported laws, in a stable order.
    pub const ALL: [EntryLaw; 4] = [
        EntryLaw::ComplexGaussian,
        EntryLaw::RealGaussian,
        EntryLaw::Rademacher,
        EntryLaw::Uniform,
    ];
}

impl std::fmt::Display for EntryLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            EntryLaw::ComplexGaussian => "complex-gaussian",
            EntryLaw::RealGaussian => "real-gaussian",
            EntryLaw::Rademacher => "rademacher",
            EntryLaw::Uniform => "uniform",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for EntryLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complex-gaussian" => Ok(EntryLaw::ComplexGaussian),
            "real-gaussian" => Ok(EntryLaw::RealGaussian),
            "rademacher" => Ok(EntryLaw::Rademacher),
            "uniform" => Ok(EntryLaw::Uniform),
            other => Err(Error::invalid(format!(
                "unknown entry law '{other}' (expected complex-gaussian, real-gaussian, rademacher, or uniform)"
            ))),
        }
    }
}

/// Everything that determines one random coupling matrix.
#[derive(Debug, Clone)]
pub struct EnsembleSpec<'a> {
    /// Entry distribution.
    pub law: EntryLaw,
    /// Variance profile (entry `(i, j)` gets second moment `s_ij`).
    pub profile: &'a VarianceProfile,
    /// RNG key.
    pub seed: u64,
    /// Independent stream under the key; use consecutive indices for
    /// Monte Carlo samples.
    pub sample_index: u64,
}

/// Draws the coupling matrix described by `spec`.
///
/// Entries are generated in row-major order from a counter-based RNG, so the
/// same spec always yields the bit-identical matrix.
pub fn sample_matrix(spec: &EnsembleSpec<'_>) -> Array2<C64> {
    let n = spec.profile.n();
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    rng.set_stream(spec.sample_index);
    let mut x = Array2::<C64>::zeros((n, n));
    const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        for j in 0..n {
            let scale = spec.profile.entry(i, j).sqrt();
            let entry = match spec.law {
                EntryLaw::ComplexGaussian => {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    C64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
                }
                EntryLaw::RealGaussian => {
                    let re: f64 = rng.sample(StandardNormal);
                    C64::new(re, 0.0)
                }
                EntryLaw::Rademacher => match rng.gen_range(0..4u8) {
                    0 => C64::new(1.0, 0.0),
                    1 => C64::new(0.0, 1.0),
                    2 => C64::new(-1.0, 0.0),
                    _ => C64::new(0.0, -1.0),
                },
                EntryLaw::Uniform => {
                    let u: f64 = rng.gen();
                    C64::new((2.0 * u - 1.0) * 3.0f64.sqrt(), 0.0)
                }
            };
            x[[i, j]] = entry * scale;
        }
    }
    x
}

/// Draws a real symmetric (Wigner-type) matrix whose spectrum fills
/// `[−half_width, half_width]` asymptotically.
///
/// Every entry has variance `half_width² / (4n)`: the upper triangle
/// (diagonal included) is drawn row-major from independent Gaussians and
/// mirrored, so the result is symmetric by construction.
pub fn sample_wigner(n: usize, seed: u64, half_width: f64) -> Result<Array2<C64>> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "Wigner dimension must be at least 2, got {n}"
        )));
    }
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(Error::invalid(format!(
            "half_width must be positive, got {half_width}"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(WIGNER_STREAM);
    let sigma = half_width / (2.0 * (n as f64).sqrt());
    let mut w = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let g: f64 = rng.sample(StandardNormal);
            let v = C64::new(g * sigma, 0.0);
            w[[i, j]] = v;
            w[[j, i]] = v;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{build_profile, ProfileKind};
    use approx::assert_abs_diff_eq;

    fn constant_profile(n: usize) -> VarianceProfile {
        build_profile(&ProfileKind::Constant, n, 0).expect("constant profile")
    }

    #[test]
    fn draws_are_reproducible_and_streams_are_independent() {
        let p = constant_profile(16);
        let spec = EnsembleSpec {
            law: EntryLaw::ComplexGaussian,
            profile: &p,
            seed: 42,
            sample_index: 3,
        };
        let a = sample_matrix(&spec);
        let b = sample_matrix(&spec);
        assert_eq!(a, b, "same spec must give the bit-identical matrix");

        let other_stream = EnsembleSpec {
            sample_index: 4,
            ..spec.clone()
        };
        assert_ne!(a, sample_matrix(&other_stream));

        let other_seed = EnsembleSpec { seed: 43, ..spec };
        assert_ne!(a, sample_matrix(&other_seed));
    }

    #[test]
    fn rademacher_entries_have_exact_modulus() {
        let p = build_profile(&ProfileKind::RowStochasticRandom, 10, 9).expect("profile");
        let x = sample_matrix(&EnsembleSpec {
            law: EntryLaw::Rademacher,
            profile: &p,
            seed: 7,
            sample_index: 0,
        });
        for ((i, j), z) in x.indexed_iter() {
            let expected = p.entry(i, j).sqrt();
            assert_abs_diff_eq!(z.norm(), expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn real_laws_have_no_imaginary_part_and_uniform_is_bounded() {
        let p = constant_profile(12);
        for law in [EntryLaw::RealGaussian, EntryLaw::Uniform] {
            let x = sample_matrix(&EnsembleSpec {
                law,
                profile: &p,
                seed: 5,
                sample_index: 1,
            });
            assert!(x.iter().all(|z| z.im == 0.0), "{law:?} must be real");
        }
        let u = sample_matrix(&EnsembleSpec {
            law: EntryLaw::Uniform,
            profile: &p,
            seed: 5,
            sample_index: 1,
        });
        let bound = (3.0f64).sqrt() * (1.0 / 12.0f64).sqrt() + 1e-12;
        assert!(u.iter().all(|z| z.norm() <= bound));
    }

    #[test]
    fn second_moments_match_the_profile() {
        // With the constant profile the sum of all |x_ij|² concentrates on n.
        let n = 200;
        let p = constant_profile(n);
        for law in EntryLaw::ALL {
            let x = sample_matrix(&EnsembleSpec {
                law,
                profile: &p,
                seed: 11,
                sample_index: 0,
            });
            let total: f64 = x.iter().map(|z| z.norm_sqr()).sum();
            let mean = total / n as f64;
            assert!(
                (mean - 1.0).abs() < 0.05,
                "{law:?}: normalized square sum {mean} should be near 1"
            );
        }
    }

    #[test]
    fn complex_gaussian_is_approximately_circular() {
        // For circularly symmetric entries E[x²] = 0, so the sum of squares
        // (not moduli) must be small relative to the sum of square moduli.
        let n = 200;
        let p = constant_profile(n);
        let x = sample_matrix(&EnsembleSpec {
            law: EntryLaw::ComplexGaussian,
            profile: &p,
            seed: 13,
            sample_index: 2,
        });
        let squares: C64 = x.iter().map(|z| z * z).sum();
        let moduli: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        assert!(squares.norm() / moduli < 0.05);
    }

    #[test]
    fn wigner_matrix_is_exactly_symmetric_with_scaled_entries() {
        let n = 300;
        let hw = 1.0;
        let w = sample_wigner(n, 21, hw).expect("wigner");
        for i in 0..n {
            for j in 0..n {
                assert_eq!(w[[i, j]], w[[j, i]]);
                assert_eq!(w[[i, j]].im, 0.0);
            }
        }
        // Entry variance is hw²/(4n); the mean square over the matrix
        // concentrates tightly around it.
        let mean_sq: f64 = w.iter().map(|z| z.norm_sqr()).sum::<f64>() / (n * n) as f64;
        let expected = hw * hw / (4.0 * n as f64);
        assert!(
            (mean_sq / expected - 1.0).abs() < 0.05,
            "mean square {mean_sq:.3e} vs expected {expected:.3e}"
        );

        assert!(sample_wigner(1, 0, 1.0).is_err());
        assert!(sample_wigner(8, 0, 0.0).is_err());
    }

    #[test]
    fn entry_law_round_trips_through_strings() {
        for law in EntryLaw::ALL {
            let name = law_name(law);
            let parsed: EntryLaw = name.parse().expect("parse law");
            assert_eq!(parsed, law);
        }
        assert!("gaussian".parse::<EntryLaw>().is_err());
    }

    fn law_name(law: EntryLaw) -> &'static str {
        match law {
            EntryLaw::ComplexGaussian => "complex-gaussian",
            EntryLaw::RealGaussian => "real-gaussian",
            EntryLaw::Rademacher => "rademacher",
            EntryLaw::Uniform => "uniform",
        }
    }
}
