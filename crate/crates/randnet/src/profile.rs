//! Variance profiles for random coupling matrices.
//!
//! A profile is a square entrywise-nonnegative matrix `S` whose entry
//! `s_ij` is the variance of the coupling from unit `j` to unit `i`.  The
//! asymptotic theory implemented by the rest of the crate requires `S` to be
//! irreducible with spectral radius exactly 1, and all formulas are expressed
//! through the Perron–Frobenius data of `S`: the leading eigenvalue, the
//! positive left/right eigenvectors, and the spectral projector onto the
//! complement of the leading direction.
//!
//! Averages follow the normalized convention used throughout the crate:
//! `⟨v⟩ = (1/n) Σ v_i` and `⟨u, v⟩ = (1/n) Σ ū_i v_i`, so that the constant
//! vector has mean 1 independent of dimension.

use ndarray::prelude::*;
use ndarray_linalg::{Eig, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::C64;

/// A length-`n` diagonal of a block operator, stored densely.
pub type DiagonalVector = Array1<f64>;

/// Relative tolerance for the Collatz–Wielandt bracket in the leading
/// eigenvalue computation.
const RADIUS_TOL: f64 = 1e-13;

/// Iteration budget for power iterations before falling back to a dense
/// eigensolver (or giving up for very large matrices).
const POWER_BUDGET: usize = 5_000;

/// Largest dimension for which the dense eigensolver fallback is attempted.
const DENSE_FALLBACK_MAX: usize = 800;

/// Mean of a real vector under the normalized convention `(1/n) Σ v_i`.
pub fn mean(v: ArrayView1<'_, f64>) -> f64 {
    v.sum() / v.len() as f64
}

/// Normalized inner product `(1/n) Σ u_i v_i` of two real vectors.
pub fn inner_mean(u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> f64 {
    u.dot(&v) / u.len() as f64
}

/// An admissible variance profile: square, entrywise nonnegative,
/// irreducible, with a recorded spectral radius.
///
/// Constructors validate nonnegativity and irreducibility.  The stored
/// `rho` is the Perron root of the stored matrix; [`normalize`] rescales so
/// that it equals 1, which the downstream spectral formulas assume.
///
/// [`normalize`]: VarianceProfile::normalize
#[derive(Debug, Clone)]
pub struct VarianceProfile {
    n: usize,
    s: Array2<f64>,
    rho: f64,
    id: String,
}

impl VarianceProfile {
    /// Validates `s` and computes its Perron root.
    ///
    /// Errors on non-square input, dimensions below 2, negative or non-finite
    /// entries, and reducible sparsity patterns (the Perron data of a
    /// reducible matrix is not well defined for our purposes).
    pub fn from_matrix(s: Array2<f64>) -> Result<Self> {
        let (rows, cols) = s.dim();
        if rows != cols {
            return Err(Error::invalid(format!(
                "profile matrix must be square, got {rows}x{cols}"
            )));
        }
        if rows < 2 {
            return Err(Error::invalid(format!(
                "profile dimension must be at least 2, got {rows}"
            )));
        }
        for ((i, j), &v) in s.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::invalid(format!(
                    "profile entry ({i}, {j}) is not finite: {v}"
                )));
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
        if !is_irreducible(&s) {
            return Err(Error::ReducibleProfile(
                "sparsity pattern is not strongly connected".into(),
            ));
        }
        let rho = spectral_radius(&s)?;
        Ok(VarianceProfile {
            n: rows,
            s,
            rho,
            id: format!("custom-n{rows}"),
        })
    }

    /// Dimension of the profile.
    pub fn n(&self) -> usize {
        self.n
    }

    /// The variance matrix itself.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.s
    }

    /// Variance of the coupling from unit `j` to unit `i`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.s[[i, j]]
    }

    /// Perron root of the stored matrix (1 after [`normalize`]).
    ///
    /// [`normalize`]: VarianceProfile::normalize
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Short label describing how the profile was built (used in output
    /// metadata).
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Returns a copy rescaled so the Perron root is exactly 1.
    ///
    /// Profiles whose root is already 1 to machine precision are returned
    /// unchanged so that exactly-normalized constructions (constant,
    /// row-stochastic) keep their bit-exact entries.
    pub fn normalize(&self) -> Result<VarianceProfile> {
        if (self.rho - 1.0).abs() <= 1e-14 {
            let mut out = self.clone();
            out.rho = 1.0;
            return Ok(out);
        }
        if self.rho <= 0.0 {
            return Err(Error::ReducibleProfile(format!(
                "cannot normalize profile with spectral radius {}",
                self.rho
            )));
        }
        let s = self.s.mapv(|v| v / self.rho);
        Ok(VarianceProfile {
            n: self.n,
            s,
            rho: 1.0,
            id: self.id.clone(),
        })
    }

    /// Applies the profile to a real vector: `(S v)_i = Σ_j s_ij v_j`.
    pub fn apply_s(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        self.s.dot(&v)
    }

    /// Applies the transpose: `(Sᵀ v)_j = Σ_i s_ij v_i`.
    pub fn apply_s_adjoint(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        self.s.t().dot(&v)
    }

    /// Complex version of [`apply_s`], implemented as two real products.
    ///
    /// [`apply_s`]: VarianceProfile::apply_s
    pub fn apply_s_c(&self, v: ArrayView1<'_, C64>) -> Array1<C64> {
        let re = v.mapv(|z| z.re);
        let im = v.mapv(|z| z.im);
        let sre = self.s.dot(&re);
        let sim = self.s.dot(&im);
        Array1::from_iter(sre.iter().zip(sim.iter()).map(|(&a, &b)| C64::new(a, b)))
    }

    /// Complex version of [`apply_s_adjoint`].
    ///
    /// [`apply_s_adjoint`]: VarianceProfile::apply_s_adjoint
    pub fn apply_s_adjoint_c(&self, v: ArrayView1<'_, C64>) -> Array1<C64> {
        let re = v.mapv(|z| z.re);
        let im = v.mapv(|z| z.im);
        let sre = self.s.t().dot(&re);
        let sim = self.s.t().dot(&im);
        Array1::from_iter(sre.iter().zip(sim.iter()).map(|(&a, &b)| C64::new(a, b)))
    }

    fn with_id(mut self, id: String) -> Self {
        self.id = id;
        self
    }
}

/// How to construct a profile in [`build_profile`].
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind {
    /// All entries equal `1/n`; the mean-field case.
    Constant,
    /// Each row drawn uniformly positive and rescaled to sum to 1.
    RowStochasticRandom,
    /// Two equal blocks with different within- and across-block weights
    /// (values are per-capita: the matrix entry is `weight / n`).
    TwoBlock { within: f64, across: f64 },
    /// Entries read from a comma-separated text file (one row per line).
    FromFile { path: String },
}

impl std::fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProfileKind::Constant => write!(f, "constant"),
            ProfileKind::RowStochasticRandom => write!(f, "row-stochastic"),
            ProfileKind::TwoBlock { within, across } => {
                write!(f, "two-block({within:.3}/{across:.3})")
            }
            ProfileKind::FromFile { path } => write!(f, "file({path})"),
        }
    }
}

/// Builds a normalized admissible profile of dimension `n`.
///
/// The result always has spectral radius 1: constructions that are exactly
/// normalized by design (constant, row-stochastic) are left bit-exact, any
/// other is divided by its measured Perron root.  `seed` only matters for
/// [`ProfileKind::RowStochasticRandom`].
pub fn build_profile(kind: &ProfileKind, n: usize, seed: u64) -> Result<VarianceProfile> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "profile dimension must be at least 2, got {n}"
        )));
    }
    let raw = match kind {
        ProfileKind::Constant => Array2::from_elem((n, n), 1.0 / n as f64),
        ProfileKind::RowStochasticRandom => {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut s = Array2::zeros((n, n));
            for i in 0..n {
                let mut row_sum = 0.0;
                for j in 0..n {
                    // Uniform in [0.5, 1.5): strictly positive, so the
                    // profile is irreducible by construction.
                    let v = 0.5 + rng.gen::<f64>();
                    s[[i, j]] = v;
                    row_sum += v;
                }
                for j in 0..n {
                    s[[i, j]] /= row_sum;
                }
            }
            s
        }
        ProfileKind::TwoBlock { within, across } => {
            if !within.is_finite() || !across.is_finite() || *within < 0.0 || *across < 0.0 {
                return Err(Error::invalid(format!(
                    "two-block weights must be finite and nonnegative, got {within}/{across}"
                )));
            }
            let half = n / 2;
            let mut s = Array2::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    let same = (i < half) == (j < half);
                    s[[i, j]] = if same { within } else { across } / n as f64;
                }
            }
            s
        }
        ProfileKind::FromFile { path } => read_profile_file(path)?,
    };
    let id = match kind {
        ProfileKind::FromFile { .. } => format!("{kind}"),
        ProfileKind::RowStochasticRandom => format!("{kind}-n{n}-seed{seed}"),
        _ => format!("{kind}-n{n}"),
    };
    let profile = VarianceProfile::from_matrix(raw)?.with_id(id);
    profile.normalize()
}

/// Parses a square comma-separated matrix from a text file.
fn read_profile_file(path: &str) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ProfileFile(format!("cannot read {path}: {e}")))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = line
            .split(',')
            .map(|tok| tok.trim().parse::<f64>())
            .collect();
        let row = row
            .map_err(|e| Error::ProfileFile(format!("{path}:{}: parse error: {e}", lineno + 1)))?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::ProfileFile(format!("{path}: no rows")));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::ProfileFile(format!(
            "{path}: matrix is not square ({n} rows, first row has {} columns)",
            rows[0].len()
        )));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n, n), flat).map_err(|e| Error::ProfileFile(format!("{path}: {e}")))
}

/// Whether the sparsity pattern of `s` is strongly connected.
fn is_irreducible(s: &Array2<f64>) -> bool {
    let n = s.nrows();
    reaches_all(n, |i, j| s[[i, j]] > 0.0) && reaches_all(n, |i, j| s[[j, i]] > 0.0)
}

/// Breadth-first reachability of every node from node 0 along `edge`.
fn reaches_all(n: usize, edge: impl Fn(usize, usize) -> bool) -> bool {
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if !seen[j] && edge(i, j) {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count == n
}

/// Perron root of an irreducible nonnegative matrix.
///
/// Power iteration on the aperiodic shift `B = I + S` with the
/// Collatz–Wielandt bracket `min_i (Bv)_i/v_i ≤ 1 + ρ ≤ max_i (Bv)_i/v_i`
/// as the stopping criterion; falls back to a dense eigensolver when the
/// bracket stalls (possible for tiny spectral gaps).
fn spectral_radius(s: &Array2<f64>) -> Result<f64> {
    match power_radius(s) {
        Ok(rho) => Ok(rho),
        Err(stall) => {
            if s.nrows() <= DENSE_FALLBACK_MAX {
                dense_radius(s)
            } else {
                Err(stall)
            }
        }
    }
}

fn power_radius(s: &Array2<f64>) -> Result<f64> {
    let n = s.nrows();
    let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut bracket = (0.0, f64::INFINITY);
    for iter in 0..POWER_BUDGET {
        let bv = &v + &s.dot(&v);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for (num, den) in bv.iter().zip(v.iter()) {
            let ratio = num / den;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        bracket = (lo, hi);
        if !lo.is_finite() || lo <= 0.0 {
            return Err(Error::ReducibleProfile(
                "power iteration lost positivity".into(),
            ));
        }
        if hi - lo <= RADIUS_TOL * hi {
            let _ = iter;
            return Ok((lo + hi) / 2.0 - 1.0);
        }
        let norm = bv.dot(&bv).sqrt();
        v = bv / norm;
    }
    Err(Error::PowerIterationStalled {
        iterations: POWER_BUDGET,
        residual: bracket.1 - bracket.0,
        tolerance: RADIUS_TOL * bracket.1,
    })
}

/// Dense fallback: largest eigenvalue modulus via a full eigensolve.
fn dense_radius(s: &Array2<f64>) -> Result<f64> {
    let (vals, _) = s.eig()?;
    Ok(vals.iter().map(|z| z.norm()).fold(0.0f64, f64::max))
}

/// Positive left/right Perron eigenvectors of a profile, in the crate's
/// standard gauge `⟨v_r⟩ = 1`, `⟨v_l, v_r⟩ = 1`.
#[derive(Debug, Clone)]
pub struct PerronPair {
    /// Left eigenvector: `Sᵀ v_l = ρ v_l`, entrywise positive.
    pub v_l: Array1<f64>,
    /// Right eigenvector: `S v_r = ρ v_r`, entrywise positive, `⟨v_r⟩ = 1`.
    pub v_r: Array1<f64>,
}

impl PerronPair {
    /// `⟨v_l, w⟩ / ⟨v_l, v_r⟩` — the coefficient of `w` along the leading
    /// direction (gauge independent).
    pub fn leading_coefficient(&self, w: ArrayView1<'_, C64>) -> C64 {
        let num: C64 = self
            .v_l
            .iter()
            .zip(w.iter())
            .map(|(&l, &x)| x * l)
            .sum::<C64>()
            / C64::new(w.len() as f64, 0.0);
        let den = inner_mean(self.v_l.view(), self.v_r.view());
        num / den
    }

    /// The mean-field weight `c_S = ⟨v_l⟩⟨v_r⟩ / ⟨v_l, v_r⟩` that scales
    /// long-time asymptotics (gauge independent; equals `⟨v_l⟩` in the
    /// standard gauge).
    pub fn mean_field_weight(&self) -> f64 {
        mean(self.v_l.view()) * mean(self.v_r.view()) / inner_mean(self.v_l.view(), self.v_r.view())
    }

    /// Projects `w` onto the spectral complement of the leading direction:
    /// `Q w = w − (⟨v_l, w⟩/⟨v_l, v_r⟩) v_r`.
    ///
    /// `Q` is the rank-`(n−1)` spectral projector of `S` satisfying
    /// `Q v_r = 0`, `⟨v_l, Q w⟩ = 0` and `Q² = Q`.
    pub fn project_q(&self, w: ArrayView1<'_, C64>) -> Array1<C64> {
        let coeff = self.leading_coefficient(w);
        Array1::from_iter(w.iter().zip(self.v_r.iter()).map(|(&x, &r)| x - coeff * r))
    }

    /// Real-vector version of [`project_q`].
    ///
    /// [`project_q`]: PerronPair::project_q
    pub fn project_q_real(&self, w: ArrayView1<'_, f64>) -> Array1<f64> {
        let coeff = inner_mean(self.v_l.view(), w) / inner_mean(self.v_l.view(), self.v_r.view());
        Array1::from_iter(w.iter().zip(self.v_r.iter()).map(|(&x, &r)| x - coeff * r))
    }
}

/// Computes the Perron pair of a profile to residual `‖Sv − ρv‖₂ ≤ 1e−12 ‖v‖₂`.
///
/// Power iteration on `B = I + S` (right vector) and `Bᵀ` (left vector);
/// dense eigensolver fallback for stubborn spectra.  Errors if either vector
/// fails to be strictly positive, which signals a reducible or numerically
/// degenerate profile.
pub fn perron_vectors(profile: &VarianceProfile) -> Result<PerronPair> {
    let rho = profile.rho();
    let v_r = perron_direction(profile.matrix().view(), rho)?;
    let st = profile.matrix().t().to_owned();
    let v_l = perron_direction(st.view(), rho)?;

    // Gauge: ⟨v_r⟩ = 1 first, then ⟨v_l, v_r⟩ = 1.
    let mut v_r = v_r;
    let mr = mean(v_r.view());
    v_r.mapv_inplace(|x| x / mr);
    let mut v_l = v_l;
    let cross = inner_mean(v_l.view(), v_r.view());
    v_l.mapv_inplace(|x| x / cross);
    Ok(PerronPair { v_l, v_r })
}

const PERRON_RESIDUAL_TOL: f64 = 1e-12;

/// One-sided Perron eigenvector of `m` with eigenvalue `rho`, entrywise
/// positive, unit Euclidean norm.
fn perron_direction(m: ArrayView2<'_, f64>, rho: f64) -> Result<Array1<f64>> {
    let n = m.nrows();
    let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    for _ in 0..POWER_BUDGET {
        let bv = &v + &m.dot(&v);
        let norm = bv.dot(&bv).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::ReducibleProfile(
                "power iteration lost positivity".into(),
            ));
        }
        v = bv / norm;
        let residual = (&m.dot(&v) - &(rho * &v)).mapv(f64::abs).sum();
        if residual <= PERRON_RESIDUAL_TOL {
            break;
        }
    }
    let residual_vec = &m.dot(&v) - &(rho * &v);
    let residual = residual_vec.dot(&residual_vec).sqrt();
    if residual > PERRON_RESIDUAL_TOL {
        if n <= DENSE_FALLBACK_MAX {
            v = dense_perron_direction(m, rho)?;
        } else {
            return Err(Error::PowerIterationStalled {
                iterations: POWER_BUDGET,
                residual,
                tolerance: PERRON_RESIDUAL_TOL,
            });
        }
    }
    if v.iter().any(|&x| x <= 0.0) {
        return Err(Error::ReducibleProfile(
            "leading eigenvector has non-positive entries".into(),
        ));
    }
    Ok(v)
}

/// Dense-eigensolver route to the Perron direction.
fn dense_perron_direction(m: ArrayView2<'_, f64>, rho: f64) -> Result<Array1<f64>> {
    let (vals, vecs) = m.to_owned().eig()?;
    let mut best = 0;
    for (k, z) in vals.iter().enumerate() {
        if (z.norm() - rho).abs() < (vals[best].norm() - rho).abs() {
            best = k;
        }
    }
    let col = vecs.column(best);
    // The Perron eigenvector is real up to a global phase; strip it.
    let pivot = col
        .iter()
        .cloned()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(C64::new(1.0, 0.0));
    let phase = pivot / pivot.norm();
    let real: Array1<f64> = col.mapv(|z| (z / phase).re);
    let imag_leak = col
        .iter()
        .map(|z| (z / phase).im.abs())
        .fold(0.0f64, f64::max);
    if imag_leak > 1e-8 {
        return Err(Error::ReducibleProfile(format!(
            "leading eigenvector is not real up to phase (imaginary leak {imag_leak:.3e})"
        )));
    }
    let sign = if real.sum() >= 0.0 { 1.0 } else { -1.0 };
    let real = real.mapv(|x| sign * x);
    let norm = real.dot(&real).sqrt();
    Ok(real / norm)
}

/// Result of [`resolvent_gap_check`]: resolvent norms on the spectral
/// complement at each requested point.
#[derive(Debug, Clone)]
pub struct GapCheckReport {
    /// `(w, ‖Q (wI − S)⁻¹ Q‖₂)` for each test point.
    pub point_norms: Vec<(C64, f64)>,
    /// Largest norm over all test points.
    pub max_norm: f64,
    /// Whether `max_norm ≤ bound`.
    pub pass: bool,
}

/// Verifies that, away from the Perron eigenvalue, the resolvent of `S`
/// restricted to the spectral complement stays bounded.
///
/// Every test point must satisfy `|w| ≥ 1 − 2ε` and `|w − 1| ≥ ε` (the
/// region where the asymptotic formulas need control); the restricted
/// resolvent norm `‖Q (wI − S)⁻¹ Q‖₂` is evaluated by a dense solve plus an
/// SVD and compared against `bound`.  A failing bound sets `pass = false`
/// without erroring; genuinely singular systems error.
pub fn resolvent_gap_check(
    profile: &VarianceProfile,
    pair: &PerronPair,
    points: &[C64],
    epsilon: f64,
    bound: f64,
) -> Result<GapCheckReport> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::invalid(format!(
            "epsilon must lie in (0, 0.5), got {epsilon}"
        )));
    }
    if points.is_empty() {
        return Err(Error::invalid("gap check requires at least one test point"));
    }
    let n = profile.n();
    for &w in points {
        if w.norm() < 1.0 - 2.0 * epsilon || (w - C64::new(1.0, 0.0)).norm() < epsilon {
            return Err(Error::invalid(format!(
                "test point {w} violates |w| ≥ 1 − 2ε and |w − 1| ≥ ε for ε = {epsilon}"
            )));
        }
    }
    // Q as a dense matrix: I − v_r (v_l)ᵀ / (n ⟨v_l, v_r⟩).
    let cross = inner_mean(pair.v_l.view(), pair.v_r.view());
    let mut q = Array2::<f64>::eye(n);
    for i in 0..n {
        for j in 0..n {
            q[[i, j]] -= pair.v_r[i] * pair.v_l[j] / (n as f64 * cross);
        }
    }
    let q_c = q.mapv(|x| C64::new(x, 0.0));
    let s_c = profile.matrix().mapv(|x| C64::new(x, 0.0));

    let mut point_norms = Vec::with_capacity(points.len());
    let mut max_norm = 0.0f64;
    for &w in points {
        let mut a = s_c.mapv(|z| -z);
        for i in 0..n {
            a[[i, i]] += w;
        }
        let inv = crate::linalg::invert(&a).map_err(|_| Error::SingularSystem {
            context: format!("(wI − S) at w = {w}"),
        })?;
        let restricted = q_c.dot(&inv).dot(&q_c);
        let (_, sv, _) = restricted.svd(false, false)?;
        let norm = sv.iter().cloned().fold(0.0f64, f64::max);
        max_norm = max_norm.max(norm);
        point_norms.push((w, norm));
    }
    Ok(GapCheckReport {
        point_norms,
        max_norm,
        pass: max_norm <= bound,
    })
}
