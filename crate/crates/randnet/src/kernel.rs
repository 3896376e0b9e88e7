//! The resolvent-product kernel and traces of analytic test functions.
//!
//! For a coupling matrix `X` with variance profile `S`, normalized traces of
//! products `f(X) g(X*)` of analytic functions concentrate, as the dimension
//! grows, on deterministic values driven by a single scalar kernel
//!
//! ```text
//! K(ζ₁, ζ₂) = ⟨(w − S)⁻¹ 1⟩,   w = ζ₁ ζ̄₂,
//! ```
//!
//! the large-`n` limit of `(1/n) tr (X − ζ₁)⁻¹ (X* − ζ̄₂)⁻¹`.  This module
//! evaluates the kernel (directly and split into its leading Perron part and
//! the remainder), integrates test functions against it over a double
//! contour, and provides the matching empirical quantities for finite
//! samples.  A plain power-series evaluator is included as an independent
//! cross-check path for polynomial test functions.

use std::sync::Arc;

use ndarray::prelude::*;
use ndarray_linalg::EigVals;

use crate::error::{Error, Result};
use crate::linalg;
use crate::profile::{mean, PerronPair, VarianceProfile};
use crate::C64;

/// A pair of spectral parameters strictly outside the closed unit disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    zeta1: C64,
    zeta2: C64,
}

impl SpectralPoint {
    /// Validates `|ζ₁| > 1` and `|ζ₂| > 1`.
    pub fn new(zeta1: C64, zeta2: C64) -> Result<Self> {
        for (name, z) in [("zeta1", zeta1), ("zeta2", zeta2)] {
            if !z.norm().is_finite() || z.norm() <= 1.0 {
                return Err(Error::invalid(format!(
                    "{name} must lie strictly outside the unit disk, got {z} (|{name}| = {})",
                    z.norm()
                )));
            }
        }
        Ok(SpectralPoint { zeta1, zeta2 })
    }

    /// Both parameters equal and real: the common diagnostic slice.
    pub fn symmetric_real(zeta: f64) -> Result<Self> {
        Self::new(C64::new(zeta, 0.0), C64::new(zeta, 0.0))
    }

    pub fn zeta1(&self) -> C64 {
        self.zeta1
    }

    pub fn zeta2(&self) -> C64 {
        self.zeta2
    }

    /// Distance of the closer parameter to the unit circle:
    /// `Δ = min(|ζ₁|, |ζ₂|) − 1 > 0`.
    pub fn delta(&self) -> f64 {
        self.zeta1.norm().min(self.zeta2.norm()) - 1.0
    }

    /// The product `w = ζ₁ ζ̄₂` the kernel actually depends on.
    pub fn product(&self) -> C64 {
        self.zeta1 * self.zeta2.conj()
    }
}

/// Discretized circle `|z| = radius` with equispaced nodes, used for the
/// double-contour quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contour {
    radius: f64,
    nodes: usize,
}

impl Contour {
    /// Validates `radius > 1` and an even node count of at least 8.
    pub fn new(radius: f64, nodes: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 1.0) {
            return Err(Error::invalid(format!(
                "contour radius must exceed 1, got {radius}"
            )));
        }
        if nodes < 8 || !nodes.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "contour nodes must be an even count of at least 8, got {nodes}"
            )));
        }
        Ok(Contour { radius, nodes })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }
}

impl Default for Contour {
    /// Radius 1.5 with 256 nodes: ample for polynomial test functions of
    /// degree up to a few dozen.
    fn default() -> Self {
        Contour {
            radius: 1.5,
            nodes: 256,
        }
    }
}

/// An analytic test function on a neighborhood of the closed unit disk.
#[derive(Clone)]
pub enum AnalyticFunction {
    /// `p(z) = Σ_k coeffs[k] z^k`.
    Polynomial(Vec<C64>),
    /// Arbitrary analytic callable; the quadrature's internal convergence
    /// check is the only guard against out-of-domain singularities.
    Callable(Arc<dyn Fn(C64) -> C64 + Send + Sync>),
}

impl std::fmt::Debug for AnalyticFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AnalyticFunction::Polynomial(c) => write!(f, "Polynomial({} coefficients)", c.len()),
            AnalyticFunction::Callable(_) => write!(f, "Callable"),
        }
    }
}

impl AnalyticFunction {
    /// Polynomial with real coefficients, lowest degree first.
    pub fn from_real_coeffs(coeffs: &[f64]) -> Self {
        AnalyticFunction::Polynomial(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    /// The monomial `z^k`.
    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0); k + 1];
        coeffs[k] = C64::new(1.0, 0.0);
        AnalyticFunction::Polynomial(coeffs)
    }

    /// Wraps a closure.
    pub fn callable(f: impl Fn(C64) -> C64 + Send + Sync + 'static) -> Self {
        AnalyticFunction::Callable(Arc::new(f))
    }

    /// Evaluates the function at `z`.
    pub fn eval(&self, z: C64) -> C64 {
        match self {
            AnalyticFunction::Polynomial(coeffs) => {
                let mut acc = C64::new(0.0, 0.0);
                for &c in coeffs.iter().rev() {
                    acc = acc * z + c;
                }
                acc
            }
            AnalyticFunction::Callable(f) => f(z),
        }
    }

    /// Polynomial coefficients if this is a polynomial.
    pub fn coefficients(&self) -> Option<&[C64]> {
        match self {
            AnalyticFunction::Polynomial(c) => Some(c),
            AnalyticFunction::Callable(_) => None,
        }
    }
}

/// Solves `(w − S) y = 1` and returns `⟨y⟩`, the kernel evaluated at the
/// resolvent product `w`.
///
/// Requires `|w| > 1` so that the system is safely nonsingular (the spectrum
/// of `S` lies in the closed unit disk after normalization).
pub fn kernel_at(profile: &VarianceProfile, w: C64) -> Result<C64> {
    if !w.norm().is_finite() || w.norm() <= 1.0 {
        return Err(Error::invalid(format!(
            "kernel argument must satisfy |w| > 1, got |{w}| = {}",
            w.norm()
        )));
    }
    let y = resolvent_apply_ones(profile, w)?;
    Ok(mean_c(&y))
}

/// The kernel at a spectral point: `K(ζ₁, ζ₂) = ⟨(ζ₁ζ̄₂ − S)⁻¹ 1⟩`.
pub fn kernel_value(profile: &VarianceProfile, point: &SpectralPoint) -> Result<C64> {
    kernel_at(profile, point.product())
}

/// Mean of a complex vector under the `(1/n) Σ` convention.
fn mean_c(v: &Array1<C64>) -> C64 {
    v.sum() / C64::new(v.len() as f64, 0.0)
}

/// Solves `(w I − S) y = rhs` densely with a residual guard.
fn resolvent_solve(profile: &VarianceProfile, w: C64, rhs: &Array1<C64>) -> Result<Array1<C64>> {
    use ndarray_linalg::Solve;
    let n = profile.n();
    let mut a = profile.matrix().mapv(|x| C64::new(-x, 0.0));
    for i in 0..n {
        a[[i, i]] += w;
    }
    let y = a.solve(rhs).map_err(|e| Error::SingularSystem {
        context: format!("(wI − S) solve at w = {w}: {e}"),
    })?;
    // Cheap certification: residual relative to the data scale.
    let resid = (&a.dot(&y) - rhs)
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);
    let scale = rhs.iter().map(|z| z.norm()).fold(0.0f64, f64::max).max(1.0);
    if resid > 1e-8 * scale {
        return Err(Error::SingularSystem {
            context: format!("(wI − S) at w = {w} is numerically singular (residual {resid:.3e})"),
        });
    }
    Ok(y)
}

fn resolvent_apply_ones(profile: &VarianceProfile, w: C64) -> Result<Array1<C64>> {
    let ones = Array1::from_elem(profile.n(), C64::new(1.0, 0.0));
    resolvent_solve(profile, w, &ones)
}

/// The kernel split into its leading-direction part and the spectral
/// remainder.
#[derive(Debug, Clone, Copy)]
pub struct KernelDecomposition {
    /// `c_S / (w − 1)`: the slowly decaying contribution along the Perron
    /// direction (`c_S = ⟨v_l⟩⟨v_r⟩/⟨v_l, v_r⟩`).
    pub perron_part: C64,
    /// `⟨Q (w − S)⁻¹ Q 1⟩`: everything orthogonal to the leading direction.
    pub complement_part: C64,
    /// The full kernel; equals the sum of the two parts to rounding.
    pub total: C64,
}

/// Splits the kernel at a spectral point along the Perron direction.
///
/// Because the spectral projector commutes with the resolvent, the two parts
/// sum to the full kernel exactly; the split isolates the `1/(w − 1)` pole
/// responsible for slow long-time decay.
pub fn kernel_decomposition(
    profile: &VarianceProfile,
    pair: &PerronPair,
    point: &SpectralPoint,
) -> Result<KernelDecomposition> {
    let w = point.product();
    let total = kernel_at(profile, w)?;
    let c_s = pair.mean_field_weight();
    let perron_part = C64::new(c_s, 0.0) / (w - C64::new(1.0, 0.0));

    let ones = Array1::from_elem(profile.n(), C64::new(1.0, 0.0));
    let q_ones = pair.project_q(ones.view());
    let y = resolvent_solve(profile, w, &q_ones)?;
    let qy = pair.project_q(y.view());
    let complement_part = mean_c(&qy);
    Ok(KernelDecomposition {
        perron_part,
        complement_part,
        total,
    })
}

/// `Σ_k a_k b_k ⟨S^k 1⟩` — the power-series value of
/// `lim (1/n) tr f(X) g(X*)` for polynomial `f, g`.
///
/// Evaluated by repeated application of `S` to the constant vector; shares
/// no code with the contour quadrature, which makes it an independent
/// reference for [`functional_trace`].
pub fn polynomial_trace_series(profile: &VarianceProfile, a: &[C64], b: &[C64]) -> C64 {
    let n = profile.n();
    let mut v = Array1::<f64>::from_elem(n, 1.0);
    let mut acc = C64::new(0.0, 0.0);
    let terms = a.len().min(b.len());
    for k in 0..terms {
        let moment = mean(v.view());
        acc += a[k] * b[k] * moment;
        if k + 1 < terms {
            v = profile.apply_s(v.view());
        }
    }
    acc
}

/// Relative/absolute tolerance for the internal node-halving convergence
/// check of the contour quadratures.
const QUADRATURE_CHECK_TOL: f64 = 1e-9;

/// Integrates `f ⊗ g` against the kernel over the double contour:
/// the large-`n` limit of `(1/n) tr f(X) g(X*)`.
///
/// Both circles are positively oriented; with `N` nodes per circle the
/// discretization is
///
/// ```text
/// (r²/N²) Σ_{j,k} f(z_j) g(z_k) K(r² e^{i(θ_j+θ_k)}) e^{i(θ_j+θ_k)},
/// ```
///
/// which needs only the `N` kernel values on the circle `|w| = r²`.  The sum
/// is compared against its half-grid restriction; disagreement beyond
/// `1e−9 · max(1, |value|)` reports [`Error::QuadratureNotConverged`]
/// (triggered by functions that are not analytic up to the contour).
pub fn functional_trace(
    profile: &VarianceProfile,
    f: &AnalyticFunction,
    g: &AnalyticFunction,
    contour: &Contour,
) -> Result<C64> {
    let n_nodes = contour.nodes();
    let r = contour.radius();
    let kernel_cache = kernel_on_circle(profile, r * r, n_nodes)?;
    let (full, half) = double_contour_sum(
        r,
        n_nodes,
        &|j| f_at_node(f, r, n_nodes, j),
        &|k| f_at_node(g, r, n_nodes, k),
        &|m| kernel_cache[m],
    );
    check_quadrature(full, half)?;
    Ok(full)
}

fn f_at_node(f: &AnalyticFunction, r: f64, n_nodes: usize, j: usize) -> C64 {
    let theta = 2.0 * std::f64::consts::PI * j as f64 / n_nodes as f64;
    f.eval(C64::from_polar(r, theta))
}

/// Kernel values at `w = w_abs · e^{2πi m/N}` for `m = 0..N`.
fn kernel_on_circle(profile: &VarianceProfile, w_abs: f64, n_nodes: usize) -> Result<Vec<C64>> {
    (0..n_nodes)
        .map(|m| {
            let ang = 2.0 * std::f64::consts::PI * m as f64 / n_nodes as f64;
            kernel_at(profile, C64::from_polar(w_abs, ang))
        })
        .collect()
}

/// Shared double-sum skeleton: evaluates the full-grid and half-grid
/// quadratures in one pass.  `kernel_at_index(m)` must return the kernel at
/// angle index `m (mod N)` on the product circle.
fn double_contour_sum(
    r: f64,
    n_nodes: usize,
    f_node: &dyn Fn(usize) -> C64,
    g_node: &dyn Fn(usize) -> C64,
    kernel_at_index: &dyn Fn(usize) -> C64,
) -> (C64, C64) {
    let fs: Vec<C64> = (0..n_nodes).map(f_node).collect();
    let gs: Vec<C64> = (0..n_nodes).map(g_node).collect();
    let phases: Vec<C64> = (0..n_nodes)
        .map(|m| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * m as f64 / n_nodes as f64))
        .collect();

    // Circular convolution of the node values: c_m = Σ_{j+k ≡ m} f_j g_k.
    let mut conv_full = vec![C64::new(0.0, 0.0); n_nodes];
    let mut conv_half = vec![C64::new(0.0, 0.0); n_nodes];
    for j in 0..n_nodes {
        for k in 0..n_nodes {
            let m = (j + k) % n_nodes;
            let prod = fs[j] * gs[k];
            conv_full[m] += prod;
            if j % 2 == 0 && k % 2 == 0 {
                conv_half[m] += prod;
            }
        }
    }
    let mut full = C64::new(0.0, 0.0);
    let mut half = C64::new(0.0, 0.0);
    for m in 0..n_nodes {
        let weighted = kernel_at_index(m) * phases[m];
        full += conv_full[m] * weighted;
        half += conv_half[m] * weighted;
    }
    let r2 = C64::new(r * r, 0.0);
    let nf = n_nodes as f64;
    (
        full * r2 / C64::new(nf * nf, 0.0),
        half * r2 / C64::new(nf * nf / 4.0, 0.0),
    )
}

fn check_quadrature(full: C64, half: C64) -> Result<()> {
    let deviation = (full - half).norm();
    let tolerance = QUADRATURE_CHECK_TOL * full.norm().max(1.0);
    if deviation > tolerance {
        return Err(Error::QuadratureNotConverged {
            deviation,
            tolerance,
        });
    }
    Ok(())
}

/// Empirical counterpart of [`functional_trace`] for one sampled matrix:
/// `(1/n) tr f(X) g(X*)` via contour resolvents.
///
/// Verifies first that the whole spectrum of `X` lies strictly inside the
/// contour, then caches resolvents `(z_j − X)⁻¹` on the **doubled** node
/// grid and assembles the double sum with the empirical kernel
/// `(1/n) tr (z_j − X)⁻¹ (z_k − X*)⁻¹`.  The requested node count acts as
/// the certification grid: the sum is evaluated both on it and on the
/// doubled grid, their difference must be below the internal tolerance
/// (otherwise [`Error::QuadratureNotConverged`]), and the doubled-grid value
/// is returned.  Memory scales as `2·nodes·n²` complex entries, so prefer
/// modest node counts for large matrices (64 requested nodes resolve
/// polynomial degrees well past 20).
pub fn empirical_functional_trace(
    x: &Array2<C64>,
    f: &AnalyticFunction,
    g: &AnalyticFunction,
    contour: &Contour,
) -> Result<C64> {
    let n = x.nrows();
    if n != x.ncols() {
        return Err(Error::invalid("matrix must be square"));
    }
    let r = contour.radius();
    let m_nodes = 2 * contour.nodes();

    let eigs = x.eigvals().map_err(Error::Backend)?;
    let spectral_radius = eigs.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if spectral_radius >= r - 1e-9 {
        return Err(Error::SpectrumOutsideContour {
            spectral_radius,
            radius: r,
        });
    }

    // Resolvents at every node of the doubled grid, flattened row-wise so
    // that all pairwise Frobenius products come from one matrix product.
    let mut flat = Array2::<C64>::zeros((m_nodes, n * n));
    for j in 0..m_nodes {
        let theta = 2.0 * std::f64::consts::PI * j as f64 / m_nodes as f64;
        let z = C64::from_polar(r, theta);
        let mut a = x.mapv(|v| -v);
        for i in 0..n {
            a[[i, i]] += z;
        }
        let inv = linalg::invert(&a)?;
        let mut row = flat.row_mut(j);
        for (slot, &v) in row.iter_mut().zip(inv.iter()) {
            *slot = v;
        }
    }
    // pair_gram[j][m] = tr (z_j − X)⁻¹ ((z_m − X)⁻¹)†.
    let flat_adj = flat.t().mapv(|z| z.conj());
    let pair_gram = flat.dot(&flat_adj);

    // The (j, k) term of the double sum needs (z_k − X*)⁻¹ = ((z̄_k − X)⁻¹)†
    // and z̄_k = z_{(M−k) mod M}.
    let fs: Vec<C64> = (0..m_nodes).map(|j| f_at_node(f, r, m_nodes, j)).collect();
    let gs: Vec<C64> = (0..m_nodes).map(|k| f_at_node(g, r, m_nodes, k)).collect();
    let sum_on_stride = |stride: usize| -> C64 {
        let count = m_nodes / stride;
        let mut acc = C64::new(0.0, 0.0);
        for jj in 0..count {
            let j = jj * stride;
            for kk in 0..count {
                let k = kk * stride;
                let m = (m_nodes - k) % m_nodes;
                let phase = C64::from_polar(
                    1.0,
                    2.0 * std::f64::consts::PI * ((j + k) % m_nodes) as f64 / m_nodes as f64,
                );
                acc += fs[j] * gs[k] * pair_gram[[j, m]] * phase;
            }
        }
        acc * C64::new(r * r, 0.0) / C64::new((count * count * n) as f64, 0.0)
    };
    let coarse = sum_on_stride(2);
    let fine = sum_on_stride(1);
    check_quadrature(fine, coarse)?;
    Ok(fine)
}

/// `(1/n) tr (X − ζ₁)⁻¹ (X* − ζ̄₂)⁻¹` for one sampled matrix — the finite-`n`
/// quantity whose large-`n` limit is [`kernel_value`].
pub fn empirical_resolvent_product(x: &Array2<C64>, point: &SpectralPoint) -> Result<C64> {
    let n = x.nrows();
    if n != x.ncols() {
        return Err(Error::invalid("matrix must be square"));
    }
    let shift_inv = |zeta: C64| -> Result<Array2<C64>> {
        let mut a = x.clone();
        for i in 0..n {
            a[[i, i]] -= zeta;
        }
        linalg::invert(&a)
    };
    let r1 = shift_inv(point.zeta1())?;
    let r2 = if point.zeta2() == point.zeta1() {
        r1.clone()
    } else {
        shift_inv(point.zeta2())?
    };
    // (X* − ζ̄₂)⁻¹ = ((X − ζ₂)⁻¹)†, so the trace is a Frobenius pairing.
    Ok(linalg::trace_of_product_adjoint(&r1, &r2) / C64::new(n as f64, 0.0))
}
