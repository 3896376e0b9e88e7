//! Dense linear-algebra helpers shared across the crate.
//!
//! Nothing here is specific to random networks: matrix exponentials via
//! scaling-and-squaring, cached eigenbases with their Gram matrices, smallest
//! singular values (directly and via inverse iteration on a factorization),
//! matrix polynomials, and a small adaptive quadrature.  The heavier modules
//! build their spectral formulas out of these pieces.

use ndarray::prelude::*;
use ndarray_linalg::{Eig, Inverse, SVD};

use crate::error::{Error, Result};
use crate::C64;

/// Complex identity matrix.
pub fn eye_c(n: usize) -> Array2<C64> {
    Array2::eye(n)
}

/// Largest entry modulus of a complex matrix.
pub fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0f64, f64::max)
}

/// `tr(A B†) = Σ_ij a_ij conj(b_ij)` without forming the product.
pub fn trace_of_product_adjoint(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(&x, &y)| x * y.conj()).sum()
}

/// Matrix inverse with a descriptive error for singular input.
pub fn invert(a: &Array2<C64>) -> Result<Array2<C64>> {
    a.inv().map_err(|e| Error::SingularSystem {
        context: format!("dense inversion failed: {e}"),
    })
}

/// 1-norm (max column sum) of a complex matrix, used for scaling decisions.
fn one_norm(a: &Array2<C64>) -> f64 {
    let mut best = 0.0f64;
    for col in a.columns() {
        let sum: f64 = col.iter().map(|z| z.norm()).sum();
        best = best.max(sum);
    }
    best
}

// Padé numerator coefficients and 1-norm thresholds for the scaling-and-
// squaring matrix exponential (degrees 3, 5, 7, 9, 13).
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.53939833006323e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with Padé approximants.
///
/// Standard diagonal Padé scheme: pick the smallest degree whose accuracy
/// threshold covers `‖A‖₁`, otherwise scale by a power of two, apply the
/// degree-13 approximant, and square back up.
pub fn expm(a: &Array2<C64>) -> Result<Array2<C64>> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::invalid(format!(
            "expm needs a square matrix, got {r}x{c}"
        )));
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(Error::invalid("expm input has non-finite entries"));
    }
    if norm <= THETA3 {
        return pade_low(a, &PADE3);
    }
    if norm <= THETA5 {
        return pade_low(a, &PADE5);
    }
    if norm <= THETA7 {
        return pade_low(a, &PADE7);
    }
    if norm <= THETA9 {
        return pade_low(a, &PADE9);
    }
    let squarings = if norm <= THETA13 {
        0
    } else {
        ((norm / THETA13).log2().ceil() as i32).max(0)
    };
    let scale = C64::new((0.5f64).powi(squarings), 0.0);
    let a_scaled = a.mapv(|z| z * scale);
    let mut result = pade13(&a_scaled)?;
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    Ok(result)
}

/// Evaluates a diagonal Padé approximant of degree ≤ 9 (coefficients `b`).
fn pade_low(a: &Array2<C64>, b: &[f64]) -> Result<Array2<C64>> {
    let n = a.nrows();
    let a2 = a.dot(a);
    // Powers of A²: enough for the even/odd coefficient split.
    let mut even_pows: Vec<Array2<C64>> = vec![eye_c(n), a2.clone()];
    while 2 * even_pows.len() < b.len() {
        let next = even_pows.last().unwrap().dot(&a2);
        even_pows.push(next);
    }
    let mut u_inner = Array2::<C64>::zeros((n, n));
    let mut v = Array2::<C64>::zeros((n, n));
    for (k, &coeff) in b.iter().enumerate() {
        let c = C64::new(coeff, 0.0);
        if k % 2 == 1 {
            u_inner += &even_pows[(k - 1) / 2].mapv(|z| z * c);
        } else {
            v += &even_pows[k / 2].mapv(|z| z * c);
        }
    }
    let u = a.dot(&u_inner);
    solve_pade(&u, &v)
}

/// Degree-13 Padé approximant, organized to reuse A², A⁴, A⁶.
fn pade13(a: &Array2<C64>) -> Result<Array2<C64>> {
    let b = &PADE13;
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let lift = |x: f64| C64::new(x, 0.0);

    let u_high =
        a6.mapv(|z| z * lift(b[13])) + &a4.mapv(|z| z * lift(b[11])) + &a2.mapv(|z| z * lift(b[9]));
    let u_low = a6.mapv(|z| z * lift(b[7]))
        + &a4.mapv(|z| z * lift(b[5]))
        + &a2.mapv(|z| z * lift(b[3]))
        + &eye_c(a.nrows()).mapv(|z| z * lift(b[1]));
    let u = a.dot(&(a6.dot(&u_high) + u_low));

    let v_high =
        a6.mapv(|z| z * lift(b[12])) + &a4.mapv(|z| z * lift(b[10])) + &a2.mapv(|z| z * lift(b[8]));
    let v = a6.dot(&v_high)
        + &a6.mapv(|z| z * lift(b[6]))
        + &a4.mapv(|z| z * lift(b[4]))
        + &a2.mapv(|z| z * lift(b[2]))
        + &eye_c(a.nrows()).mapv(|z| z * lift(b[0]));
    solve_pade(&u, &v)
}

/// Solves `(V − U) R = (V + U)` for the Padé ratio `R`.
fn solve_pade(u: &Array2<C64>, v: &Array2<C64>) -> Result<Array2<C64>> {
    let denom = v - u;
    let numer = v + u;
    let denom_inv = invert(&denom)?;
    Ok(denom_inv.dot(&numer))
}

/// Eigendecomposition `X = W Λ W⁻¹` with the inverse basis and a
/// reconstruction residual for quality control.
#[derive(Debug, Clone)]
pub struct EigBasis {
    /// Eigenvalues.
    pub lambda: Array1<C64>,
    /// Right eigenvectors as columns.
    pub w: Array2<C64>,
    /// Inverse of the eigenvector matrix.
    pub w_inv: Array2<C64>,
    /// `max |X W − W Λ| / max(1, max |X|)` — small when the basis is usable.
    pub residual: f64,
}

/// Computes [`EigBasis`], erroring when the eigenvector matrix is singular
/// to working precision.
pub fn eig_basis(x: &Array2<C64>) -> Result<EigBasis> {
    let (lambda, w) = x.eig()?;
    let w_inv = invert(&w).map_err(|_| Error::IllConditionedEigenbasis {
        residual: f64::INFINITY,
    })?;
    let mut xw = x.dot(&w);
    for (j, &l) in lambda.iter().enumerate() {
        let mut col = xw.column_mut(j);
        let wcol = w.column(j);
        for (a, &b) in col.iter_mut().zip(wcol.iter()) {
            *a -= l * b;
        }
    }
    let residual = max_abs(&xw) / max_abs(x).max(1.0);
    Ok(EigBasis {
        lambda,
        w,
        w_inv,
        residual,
    })
}

/// The two Gram matrices of an eigenbasis: `G₁ = W†W` and `G₂ = W⁻¹ W⁻†`.
///
/// These contract functional calculus in the eigenbasis back to trace form:
/// `tr f(X) g(X)† = Σ_jk f(λ_j) conj(g(λ_k)) G₂_jk G₁_kj`.
pub fn gram_pair(basis: &EigBasis) -> (Array2<C64>, Array2<C64>) {
    let w_adj = conj_transpose(&basis.w);
    let g1 = w_adj.dot(&basis.w);
    let winv_adj = conj_transpose(&basis.w_inv);
    let g2 = basis.w_inv.dot(&winv_adj);
    (g1, g2)
}

/// Conjugate transpose.
pub fn conj_transpose(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Smallest singular value via a full SVD.
pub fn min_singular(a: &Array2<C64>) -> Result<f64> {
    let (_, sv, _) = a.svd(false, false)?;
    sv.iter()
        .cloned()
        .fold(None, |acc: Option<f64>, x| {
            Some(acc.map_or(x, |m| m.min(x)))
        })
        .ok_or_else(|| Error::invalid("SVD of an empty matrix"))
}

/// Smallest singular value of a large square matrix via inverse iteration.
///
/// Factorizes `A` once (LU) and power-iterates on `(A A†)⁻¹`, whose largest
/// eigenvalue is `1/σ_min²`; one step costs two triangular solves.  Much
/// cheaper than a full SVD for `n` in the hundreds, at the price of an
/// iterative tolerance.  The input must be nonsingular.
pub fn min_singular_inverse_iteration(a: &Array2<C64>) -> Result<f64> {
    use ndarray_linalg::solve::{Factorize, Solve};
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::invalid(format!(
            "inverse iteration needs a square matrix, got {r}x{c}"
        )));
    }
    let n = r;
    let factors = a.factorize().map_err(|e| Error::SingularSystem {
        context: format!("LU factorization failed: {e}"),
    })?;
    // Deterministic, generic start vector.
    let mut v: Array1<C64> = Array1::from_iter(
        (0..n).map(|i| C64::new((1.3 * i as f64 + 0.7).sin(), (0.9 * i as f64 + 0.2).cos())),
    );
    let norm0 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.mapv_inplace(|z| z / norm0);

    let mut sigma_prev = f64::INFINITY;
    for iter in 0..500 {
        let w = factors.solve(&v).map_err(|e| Error::SingularSystem {
            context: format!("forward solve failed: {e}"),
        })?;
        let u = factors.solve_h(&w).map_err(|e| Error::SingularSystem {
            context: format!("adjoint solve failed: {e}"),
        })?;
        // v is unit, u = (A A†)⁻¹ v, and after convergence the Rayleigh
        // quotient ‖A⁻¹ v‖² approximates 1/σ_min².
        let rayleigh: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        let sigma = 1.0 / rayleigh.sqrt();
        let u_norm = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if u_norm == 0.0 || !u_norm.is_finite() {
            return Err(Error::SingularSystem {
                context: "inverse iteration collapsed".into(),
            });
        }
        v = u.mapv(|z| z / u_norm);
        if iter >= 3 && (sigma - sigma_prev).abs() <= 1e-12 * sigma.max(f64::MIN_POSITIVE) {
            return Ok(sigma);
        }
        sigma_prev = sigma;
    }
    // The estimate sequence is monotone enough in practice that the last
    // value is still meaningful; report it rather than failing outright.
    Ok(sigma_prev)
}

/// Evaluates the polynomial `p(X) = Σ_k coeffs[k] X^k` by Horner's rule.
pub fn polynomial_of_matrix(coeffs: &[C64], x: &Array2<C64>) -> Array2<C64> {
    let n = x.nrows();
    let mut acc = Array2::<C64>::zeros((n, n));
    if coeffs.is_empty() {
        return acc;
    }
    for i in 0..n {
        acc[[i, i]] = coeffs[coeffs.len() - 1];
    }
    for &c in coeffs.iter().rev().skip(1) {
        acc = acc.dot(x);
        for i in 0..n {
            acc[[i, i]] += c;
        }
    }
    acc
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::invalid(format!(
            "bad integration interval [{a}, {b}]"
        )));
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    Ok(simpson_recurse(f, a, b, fa, fm, fb, whole, tol, 48))
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson_recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_complex(n: usize, seed: u64, scale: f64) -> Array2<C64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, n), |_| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * scale
        })
    }

    #[test]
    fn expm_matches_scalar_exponentials_on_diagonal_input() {
        let d = array![
            [C64::new(0.3, -1.2), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(-2.0, 0.7)]
        ];
        let e = expm(&d).expect("expm");
        assert_abs_diff_eq!(e[[0, 0]].re, C64::new(0.3, -1.2).exp().re, epsilon = 1e-14);
        assert_abs_diff_eq!(e[[0, 0]].im, C64::new(0.3, -1.2).exp().im, epsilon = 1e-14);
        assert_abs_diff_eq!(e[[1, 1]].re, C64::new(-2.0, 0.7).exp().re, epsilon = 1e-14);
        assert!(e[[0, 1]].norm() < 1e-15);
    }

    #[test]
    fn expm_matches_rotation_closed_form() {
        // exp([[0, -θ], [θ, 0]]) = [[cos θ, -sin θ], [sin θ, cos θ]].
        let theta = 1.9;
        let a = array![
            [C64::new(0.0, 0.0), C64::new(-theta, 0.0)],
            [C64::new(theta, 0.0), C64::new(0.0, 0.0)]
        ];
        let e = expm(&a).expect("expm");
        assert_abs_diff_eq!(e[[0, 0]].re, theta.cos(), epsilon = 1e-13);
        assert_abs_diff_eq!(e[[1, 0]].re, theta.sin(), epsilon = 1e-13);
        assert_abs_diff_eq!(e[[0, 1]].re, -theta.sin(), epsilon = 1e-13);
    }

    #[test]
    fn expm_agrees_with_taylor_series_at_small_norm() {
        let a = random_complex(5, 3, 0.02);
        let e = expm(&a).expect("expm");
        // Direct Taylor sum: converges fast at this norm and shares no code
        // with the Padé path.
        let mut series = eye_c(5);
        let mut term = eye_c(5);
        for k in 1..30 {
            term = term.dot(&a).mapv(|z| z / C64::new(k as f64, 0.0));
            series += &term;
        }
        assert!(max_abs(&(&e - &series)) < 1e-14);
    }

    #[test]
    fn expm_halving_and_squaring_are_consistent() {
        let a = random_complex(6, 9, 2.5);
        let e = expm(&a).expect("expm");
        let half = expm(&a.mapv(|z| z * C64::new(0.5, 0.0))).expect("expm half");
        let squared = half.dot(&half);
        let scale = max_abs(&e).max(1.0);
        assert!(max_abs(&(&e - &squared)) / scale < 1e-12);
    }

    #[test]
    fn eig_basis_reconstructs_the_matrix() {
        let x = random_complex(8, 17, 1.0);
        let basis = eig_basis(&x).expect("eig basis");
        assert!(basis.residual < 1e-12, "residual {:.3e}", basis.residual);
        let mut lam = Array2::<C64>::zeros((8, 8));
        for (i, &l) in basis.lambda.iter().enumerate() {
            lam[[i, i]] = l;
        }
        let rebuilt = basis.w.dot(&lam).dot(&basis.w_inv);
        assert!(max_abs(&(&rebuilt - &x)) < 1e-11);
    }

    #[test]
    fn gram_contraction_reproduces_plain_traces() {
        // tr X X† computed through the eigenbasis Gram matrices must agree
        // with the entrywise sum.
        let x = random_complex(7, 23, 0.8);
        let basis = eig_basis(&x).expect("eig basis");
        let (g1, g2) = gram_pair(&basis);
        let mut via_gram = C64::new(0.0, 0.0);
        for j in 0..7 {
            for k in 0..7 {
                via_gram += basis.lambda[j] * basis.lambda[k].conj() * g2[[j, k]] * g1[[k, j]];
            }
        }
        let direct: C64 = x.iter().map(|z| z * z.conj()).sum();
        assert_abs_diff_eq!(via_gram.re, direct.re, epsilon = 1e-10);
        assert_abs_diff_eq!(via_gram.im, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn trace_of_product_adjoint_matches_explicit_product() {
        let a = random_complex(5, 31, 1.0);
        let b = random_complex(5, 32, 1.0);
        let product = a.dot(&conj_transpose(&b));
        let trace: C64 = (0..5).map(|i| product[[i, i]]).sum();
        let fast = trace_of_product_adjoint(&a, &b);
        assert_abs_diff_eq!(fast.re, trace.re, epsilon = 1e-12);
        assert_abs_diff_eq!(fast.im, trace.im, epsilon = 1e-12);
    }

    #[test]
    fn inverse_iteration_matches_full_svd() {
        let mut a = random_complex(40, 41, 1.0);
        // Shift away from singularity.
        for i in 0..40 {
            a[[i, i]] += C64::new(2.5, 0.0);
        }
        let direct = min_singular(&a).expect("svd");
        let iterated = min_singular_inverse_iteration(&a).expect("inverse iteration");
        assert_abs_diff_eq!(iterated, direct, epsilon = 1e-8 * direct);
    }

    #[test]
    fn polynomial_of_matrix_matches_explicit_powers() {
        let x = random_complex(4, 51, 0.9);
        let coeffs = [
            C64::new(1.5, 0.0),
            C64::new(0.0, -2.0),
            C64::new(0.25, 0.25),
            C64::new(-1.0, 0.0),
        ];
        let p = polynomial_of_matrix(&coeffs, &x);
        let x2 = x.dot(&x);
        let x3 = x2.dot(&x);
        let explicit = eye_c(4).mapv(|z| z * coeffs[0])
            + &x.mapv(|z| z * coeffs[1])
            + &x2.mapv(|z| z * coeffs[2])
            + &x3.mapv(|z| z * coeffs[3]);
        assert!(max_abs(&(&p - &explicit)) < 1e-13);
    }

    #[test]
    fn adaptive_simpson_integrates_known_functions() {
        let cubic = adaptive_simpson(&|x| x * x * x, 0.0, 1.0, 1e-12).expect("cubic");
        assert_abs_diff_eq!(cubic, 0.25, epsilon = 1e-12);
        let sine = adaptive_simpson(&f64::sin, 0.0, std::f64::consts::PI, 1e-11).expect("sine");
        assert_abs_diff_eq!(sine, 2.0, epsilon = 1e-10);
        assert!(adaptive_simpson(&|x| x, 1.0, 0.0, 1e-10).is_err());
    }
}
