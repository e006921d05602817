//! Sub-frame spectra, noise amplification and the random-matrix benchmarks.
//!
//! Eigenvalues are always those of the `m x m` frame operator `F_k F_k^*` of
//! the retained columns. For a sub-frame of `k` unit-norm columns they sum to
//! `k`, so their mean is `1 / beta` with `beta = m / k`. The Marchenko-Pastur
//! and MANOVA laws are stated for unit-mean eigenvalues; every comparison
//! against them rescales to unit mean first.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::frames::Frame;
use crate::matrix::ComplexMatrix;

/// Eigenvalues below `SINGULAR_RTOL * lambda_max` mark a sub-frame as
/// ill-conditioned.
pub const SINGULAR_RTOL: f64 = 1e-12;

/// Indices of the nodes whose responses arrived.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct RetainedSet {
    n: usize,
    indices: Vec<usize>,
}

impl RetainedSet {
    /// Sorts `indices`; fails on duplicates or indices `>= n`.
    pub fn new(n: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return invalid("retained indices must be distinct");
        }
        if let Some(&bad) = indices.last().filter(|&&i| i >= n) {
            return invalid(format!("retained index {bad} out of range for n={n}"));
        }
        Ok(Self { n, indices })
    }

    pub fn all(n: usize) -> Self {
        Self {
            n,
            indices: (0..n).collect(),
        }
    }

    /// Every node except `erased`.
    pub fn from_erased(n: usize, erased: &[usize]) -> Result<Self> {
        if let Some(&bad) = erased.iter().find(|&&i| i >= n) {
            return invalid(format!("erased index {bad} out of range for n={n}"));
        }
        Self::new(n, (0..n).filter(|i| !erased.contains(i)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

/// Spectrum of `F_k F_k^*` and the quantities derived from it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumReport {
    /// Ascending eigenvalues of `F_k F_k^*`.
    pub eigenvalues: Vec<f64>,
    /// `(1/m) * sum 1/lambda_i`: per-coordinate least-squares error variance
    /// over the per-component noise variance. `+inf` when ill-conditioned.
    pub noise_amp: f64,
    /// `(1/k) * trace(E_dec^* E_dec) = (m/k) * noise_amp`, the same error
    /// energy normalized per received response instead of per unknown.
    pub noise_amp_per_response: f64,
    /// Ratio of extreme singular values of `F_k`.
    pub kappa_matrix: f64,
    /// Ratio of extreme eigenvalues of `F_k F_k^*`.
    pub kappa_gram: f64,
    pub ill_conditioned: bool,
}

/// `m x k` matrix of the retained columns, in index order.
pub fn subframe(frame: &Frame, retained: &RetainedSet) -> Result<ComplexMatrix> {
    if retained.n() != frame.n() {
        return invalid(format!(
            "retained set is over {} nodes but the frame has {}",
            retained.n(),
            frame.n()
        ));
    }
    frame.matrix().select_columns(retained.indices())
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(h: DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = eig.eigenvectors.select_columns(order.iter());
    (values, vectors)
}

fn hermitian_eigenvalues(h: &DMatrix<Complex64>) -> Vec<f64> {
    let values: DVector<f64> = h.symmetric_eigenvalues();
    let mut values: Vec<f64> = values.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

pub fn analyze_subframe(sub: &ComplexMatrix) -> Result<SpectrumReport> {
    let (m, k) = (sub.rows(), sub.cols());
    if k < m {
        return Err(Error::Underdetermined { retained: k, rows: m });
    }
    let eigenvalues = hermitian_eigenvalues(&sub.frame_operator());
    let lo = eigenvalues[0];
    let hi = eigenvalues[m - 1];

    let ill_conditioned = !(hi > 0.0) || lo < SINGULAR_RTOL * hi;
    let kappa_gram = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let noise_amp = if ill_conditioned {
        f64::INFINITY
    } else {
        eigenvalues.iter().map(|l| 1.0 / l).sum::<f64>() / m as f64
    };
    Ok(SpectrumReport {
        noise_amp_per_response: noise_amp * m as f64 / k as f64,
        noise_amp,
        kappa_matrix: kappa_gram.sqrt(),
        kappa_gram,
        ill_conditioned,
        eigenvalues,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DensityKind {
    #[serde(rename = "mp")]
    MarchenkoPastur,
    #[serde(rename = "manova")]
    Manova,
}

/// Aspect ratios `gamma = m/n` and `beta = m/k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensityParams {
    pub gamma: f64,
    pub beta: f64,
}

impl DensityParams {
    pub fn new(gamma: f64, beta: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return invalid(format!("gamma must lie in (0, 1], got {gamma}"));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return invalid(format!("beta must lie in (0, 1], got {beta}"));
        }
        if beta < gamma {
            return invalid(format!("beta ({beta}) must be at least gamma ({gamma})"));
        }
        Ok(Self { gamma, beta })
    }

    /// Ratios for `m` rows, `n` columns and `k` retained columns.
    pub fn from_dims(m: usize, n: usize, k: usize) -> Result<Self> {
        Self::new(m as f64 / n as f64, m as f64 / k as f64)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        return invalid(format!("beta must lie in (0, 1], got {beta}"));
    }
    Ok(())
}

/// Support edges `(1 -+ sqrt(beta))^2`.
pub fn mp_edges(beta: f64) -> Result<(f64, f64)> {
    check_beta(beta)?;
    let s = beta.sqrt();
    Ok(((1.0 - s).powi(2), (1.0 + s).powi(2)))
}

/// Marchenko-Pastur density with ratio `beta`.
pub fn mp_density(x: f64, beta: f64) -> Result<f64> {
    let (lo, hi) = mp_edges(beta)?;
    if x <= lo || x >= hi {
        return Ok(0.0);
    }
    Ok(((x - lo) * (hi - x)).sqrt() / (2.0 * PI * beta * x))
}

/// Support edges `(sqrt(1 - gamma beta) -+ sqrt((1 - gamma) beta))^2`.
pub fn manova_edges(gamma: f64, beta: f64) -> Result<(f64, f64)> {
    let p = DensityParams::new(gamma, beta)?;
    let a = (1.0 - p.gamma * p.beta).sqrt();
    let b = ((1.0 - p.gamma) * p.beta).sqrt();
    Ok(((a - b).powi(2), (a + b).powi(2)))
}

/// MANOVA (Wachter) density of the continuous part.
pub fn manova_density(x: f64, gamma: f64, beta: f64) -> Result<f64> {
    let (lo, hi) = manova_edges(gamma, beta)?;
    let denom = 1.0 - gamma * x;
    if x <= lo || x >= hi || denom <= 0.0 {
        return Ok(0.0);
    }
    Ok(((x - lo) * (hi - x)).sqrt() / (2.0 * PI * beta * x * denom))
}

/// Adaptive Simpson quadrature on `[a, b]`.
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 48)
}

const CDF_GRID: usize = 16_384;
const QUAD_TOL: f64 = 1e-11;

/// Limiting eigenvalue law: a density on `(lo, hi)` plus, for MANOVA with
/// few erasures, an atom at `1 / gamma` carrying the remaining mass.
#[derive(Clone, Debug)]
pub struct SpectralLaw {
    kind: DensityKind,
    params: DensityParams,
    lo: f64,
    hi: f64,
    continuous_mass: f64,
    atom: Option<(f64, f64)>,
    /// Cumulative continuous mass at `theta_j = (pi/2) j / CDF_GRID`, where
    /// `x = lo + (hi - lo) sin^2 theta`.
    cumulative: Vec<f64>,
}

impl SpectralLaw {
    pub fn new(kind: DensityKind, params: DensityParams) -> Result<Self> {
        let (lo, hi) = match kind {
            DensityKind::MarchenkoPastur => mp_edges(params.beta)?,
            DensityKind::Manova => manova_edges(params.gamma, params.beta)?,
        };
        let mut law = Self {
            kind,
            params,
            lo,
            hi,
            continuous_mass: 0.0,
            atom: None,
            cumulative: Vec::new(),
        };
        if hi - lo <= f64::EPSILON * hi.max(1.0) {
            // Degenerate law (square unitary case): all mass at one point.
            law.atom = Some((lo.max(f64::MIN_POSITIVE), 1.0));
            law.cumulative = vec![0.0; CDF_GRID + 1];
            return Ok(law);
        }
        law.continuous_mass = law.integrate(|_| 1.0);
        let leftover = 1.0 - law.continuous_mass;
        if kind == DensityKind::Manova && leftover > 1e-9 {
            law.atom = Some((1.0 / params.gamma, leftover));
        }
        let h = 0.5 * PI / CDF_GRID as f64;
        let g = |t: f64| law.theta_integrand(t, &|_| 1.0);
        let mut cumulative = Vec::with_capacity(CDF_GRID + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for j in 0..CDF_GRID {
            let a = j as f64 * h;
            acc += h / 6.0 * (g(a) + 4.0 * g(a + 0.5 * h) + g(a + h));
            cumulative.push(acc);
        }
        law.cumulative = cumulative;
        Ok(law)
    }

    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    pub fn params(&self) -> DensityParams {
        self.params
    }

    /// Support of the continuous part.
    pub fn edges(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn continuous_mass(&self) -> f64 {
        self.continuous_mass
    }

    /// `(location, mass)` of the point mass, if any.
    pub fn atom(&self) -> Option<(f64, f64)> {
        self.atom
    }

    pub fn density(&self, x: f64) -> f64 {
        let p = self.params;
        match self.kind {
            DensityKind::MarchenkoPastur => mp_density(x, p.beta).unwrap_or(0.0),
            DensityKind::Manova => manova_density(x, p.gamma, p.beta).unwrap_or(0.0),
        }
    }

    /// Integrand in `theta`: `g(x) f(x) dx/dtheta` with the square-root edge
    /// factors cancelled analytically.
    fn theta_integrand(&self, theta: f64, g: &impl Fn(f64) -> f64) -> f64 {
        let width = self.hi - self.lo;
        let (s, c) = theta.sin_cos();
        let x = self.lo + width * s * s;
        if x <= 0.0 {
            return 0.0;
        }
        // sqrt((x - lo)(hi - x)) = width * s * c, dx/dtheta = 2 width s c.
        let root_times_jacobian = 2.0 * (width * s * c).powi(2);
        let denom = match self.kind {
            DensityKind::MarchenkoPastur => 2.0 * PI * self.params.beta * x,
            DensityKind::Manova => {
                let d = 1.0 - self.params.gamma * x;
                if d <= 0.0 {
                    return 0.0;
                }
                2.0 * PI * self.params.beta * x * d
            }
        };
        g(x) * root_times_jacobian / denom
    }

    /// `integral of g(x) f(x)` over the continuous part.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        if self.hi <= self.lo {
            return 0.0;
        }
        adaptive_simpson(&|t| self.theta_integrand(t, &g), 0.0, 0.5 * PI, QUAD_TOL)
    }

    /// `E[g(X)]` including the atom, normalized by total mass.
    pub fn expectation(&self, g: impl Fn(f64) -> f64) -> f64 {
        let (atom_val, atom_mass) = self.atom.map_or((0.0, 0.0), |(loc, w)| (w * g(loc), w));
        (self.integrate(&g) + atom_val) / (self.continuous_mass + atom_mass)
    }

    pub fn mean(&self) -> f64 {
        self.expectation(|x| x)
    }

    fn total_mass(&self) -> f64 {
        self.continuous_mass + self.atom.map_or(0.0, |a| a.1)
    }

    fn continuous_cdf(&self, x: f64) -> f64 {
        if x <= self.lo || self.cumulative.is_empty() {
            return 0.0;
        }
        if x >= self.hi {
            return *self.cumulative.last().unwrap();
        }
        let theta = ((x - self.lo) / (self.hi - self.lo)).sqrt().asin();
        let pos = theta / (0.5 * PI) * CDF_GRID as f64;
        let j = (pos.floor() as usize).min(CDF_GRID - 1);
        let frac = pos - j as f64;
        self.cumulative[j] * (1.0 - frac) + self.cumulative[j + 1] * frac
    }

    /// Cumulative distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        let atom = self.atom.map_or(0.0, |(loc, w)| if x >= loc { w } else { 0.0 });
        ((self.continuous_cdf(x) + atom) / self.total_mass()).clamp(0.0, 1.0)
    }

    /// Generalized inverse of [`cdf`](Self::cdf).
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let (mut a, mut b) = (self.lo.min(self.atom.map_or(self.lo, |x| x.0)), self.hi);
        if let Some((loc, _)) = self.atom {
            b = b.max(loc);
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if self.cdf(mid) < p {
                a = mid;
            } else {
                b = mid;
            }
        }
        b
    }
}

/// `beta * E[x] * E[1/x]` under the chosen law: the mean of `1/lambda` for
/// eigenvalues rescaled to have mean `1/beta`. `+inf` when `beta >= 1`.
pub fn theoretical_noise_amp(kind: DensityKind, params: DensityParams) -> Result<f64> {
    let params = DensityParams::new(params.gamma, params.beta)?;
    if params.beta >= 1.0 {
        return Ok(f64::INFINITY);
    }
    let law = SpectralLaw::new(kind, params)?;
    Ok(params.beta * law.mean() * law.expectation(|x| 1.0 / x))
}

/// Kolmogorov-Smirnov distance between the unit-mean-normalized samples and
/// the unit-mean-normalized law.
///
/// When the law has a point mass, samples sitting on it only line up after
/// rescaling if the sample mean matches the law mean exactly, so the
/// distance is only meaningful for laws without an atom.
pub fn ks_distance_to_density(
    eigen_samples: &[f64],
    kind: DensityKind,
    params: DensityParams,
) -> Result<f64> {
    if eigen_samples.is_empty() {
        return invalid("no samples");
    }
    if eigen_samples.iter().any(|x| !x.is_finite()) {
        return invalid("samples must be finite");
    }
    let mean = eigen_samples.iter().sum::<f64>() / eigen_samples.len() as f64;
    if !(mean > 0.0) {
        return invalid("samples must have positive mean");
    }
    let law = SpectralLaw::new(kind, params)?;
    let law_mean = law.mean();

    let mut sorted: Vec<f64> = eigen_samples.iter().map(|x| x / mean).collect();
    sorted.sort_by(f64::total_cmp);
    let total = sorted.len() as f64;
    let mut distance: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = law.cdf(x * law_mean);
        distance = distance.max((i + 1) as f64 / total - f).max(f - i as f64 / total);
    }
    Ok(distance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{build_frame, harmonic_frame, uspc_spec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn retained_set_validation() {
        assert!(RetainedSet::new(4, vec![0, 5]).is_err());
        assert!(RetainedSet::new(4, vec![1, 1]).is_err());
        let r = RetainedSet::new(4, vec![3, 0]).unwrap();
        assert_eq!(r.indices(), &[0, 3]);
        assert_eq!(RetainedSet::from_erased(4, &[1, 2]).unwrap(), r);
    }

    #[test]
    fn subframe_selects_columns() {
        let f = build_frame(&uspc_spec(4, 2).unwrap()).unwrap();
        let all = subframe(&f, &RetainedSet::all(4)).unwrap();
        assert_eq!(&all, f.matrix());
        let two = subframe(&f, &RetainedSet::new(4, vec![0, 2]).unwrap()).unwrap();
        assert_eq!(two.cols(), 2);
        assert_eq!(two.get(1, 1), f.matrix().get(1, 2));
        assert!(subframe(&f, &RetainedSet::all(5)).is_err());
    }

    #[test]
    fn orthonormal_square_frame() {
        let f = harmonic_frame(4, &[0, 1, 2, 3]).unwrap();
        let r = analyze_subframe(f.matrix()).unwrap();
        for l in &r.eigenvalues {
            assert!((l - 1.0).abs() < 1e-12);
        }
        assert!((r.noise_amp - 1.0).abs() < 1e-12);
        assert!((r.kappa_matrix - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_tight_frame_amp_is_gamma() {
        let f = build_frame(&uspc_spec(12, 5).unwrap()).unwrap();
        let r = analyze_subframe(f.matrix()).unwrap();
        for l in &r.eigenvalues {
            assert!((l - 12.0 / 5.0).abs() < 1e-10);
        }
        assert!((r.noise_amp - 5.0 / 12.0).abs() < 1e-10);
        assert!((r.noise_amp_per_response - 5.0 / 12.0 * 5.0 / 12.0).abs() < 1e-10);
    }

    #[test]
    fn singular_harmonic_subframe() {
        let f = harmonic_frame(4, &[0, 2]).unwrap();
        let sub = subframe(&f, &RetainedSet::new(4, vec![0, 2]).unwrap()).unwrap();
        let r = analyze_subframe(&sub).unwrap();
        assert!(r.ill_conditioned);
        assert_eq!(r.noise_amp, f64::INFINITY);
    }

    #[test]
    fn underdetermined_is_an_error() {
        let f = build_frame(&uspc_spec(6, 3).unwrap()).unwrap();
        let sub = subframe(&f, &RetainedSet::new(6, vec![0, 1]).unwrap()).unwrap();
        assert!(matches!(
            analyze_subframe(&sub),
            Err(Error::Underdetermined { retained: 2, rows: 3 })
        ));
    }

    #[test]
    fn eigen_reconstruction_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &m in &[1usize, 7, 64, 256] {
            let a = DMatrix::from_fn(m, m + 3, |_, _| {
                Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let h = &a * a.adjoint();
            let (values, vectors) = hermitian_eigen(h.clone());
            assert!(values.windows(2).all(|w| w[0] <= w[1]));
            let diag = DMatrix::from_diagonal(&DVector::from_iterator(
                m,
                values.iter().map(|&v| Complex64::new(v, 0.0)),
            ));
            let rebuilt = &vectors * diag * vectors.adjoint();
            assert!((rebuilt - &h).norm() <= 1e-9 * h.norm(), "m={m}");
        }
    }

    #[test]
    fn mp_edges_and_support() {
        let (lo, hi) = mp_edges(0.25).unwrap();
        assert!((lo - 0.25).abs() < 1e-15 && (hi - 2.25).abs() < 1e-15);
        assert_eq!(mp_density(3.0, 0.25).unwrap(), 0.0);
        assert!(mp_density(1.0, 0.0).is_err());
        assert!(mp_density(1.0, 1.5).is_err());
    }

    /// Plain midpoint rule on a very fine grid in `x`, independent of the
    /// substitution used by the library.
    fn midpoint_integral(f: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> f64 {
        let h = (hi - lo) / cells as f64;
        (0..cells).map(|i| f(lo + (i as f64 + 0.5) * h)).sum::<f64>() * h
    }

    #[test]
    fn densities_integrate_to_one() {
        let (lo, hi) = mp_edges(0.5).unwrap();
        let oracle = midpoint_integral(|x| mp_density(x, 0.5).unwrap(), lo, hi, 2_000_000);
        assert!((oracle - 1.0).abs() < 1e-6, "midpoint oracle {oracle}");
        let law = SpectralLaw::new(DensityKind::MarchenkoPastur, DensityParams::new(0.5, 0.5).unwrap())
            .unwrap();
        assert!((law.continuous_mass() - 1.0).abs() < 1e-6);

        for &(g, b) in &[(0.5, 0.5), (0.25, 0.5), (0.1, 0.3), (0.3, 0.9)] {
            let (lo, hi) = manova_edges(g, b).unwrap();
            let oracle = midpoint_integral(|x| manova_density(x, g, b).unwrap(), lo, hi, 2_000_000);
            let law = SpectralLaw::new(DensityKind::Manova, DensityParams::new(g, b).unwrap()).unwrap();
            assert!((oracle - 1.0).abs() < 1e-5, "({g},{b}) midpoint {oracle}");
            assert!((law.continuous_mass() - 1.0).abs() < 1e-6, "({g},{b})");
            assert!(law.atom().is_none());
        }
    }

    #[test]
    fn manova_edges_and_mp_limit() {
        let (lo, hi) = manova_edges(0.5, 0.5).unwrap();
        assert!((lo - 0.1340).abs() < 1e-3 && (hi - 1.8660).abs() < 1e-3);
        assert_eq!(manova_density(5.0, 0.5, 0.5).unwrap(), 0.0);
        assert!(manova_density(1.0, 0.6, 0.5).is_err());

        let (mlo, mhi) = mp_edges(0.5).unwrap();
        let (lo, hi) = manova_edges(1e-6, 0.5).unwrap();
        assert!((lo - mlo).abs() < 1e-5 && (hi - mhi).abs() < 1e-5);
        for i in 1..200 {
            let x = mlo + (mhi - mlo) * i as f64 / 200.0;
            let d = manova_density(x, 1e-6, 0.5).unwrap() - mp_density(x, 0.5).unwrap();
            assert!(d.abs() < 1e-3, "x={x}");
        }
    }

    #[test]
    fn manova_atom_carries_missing_mass() {
        // Few erasures: the continuous part holds only part of the mass.
        let law = SpectralLaw::new(DensityKind::Manova, DensityParams::new(0.9, 0.95).unwrap()).unwrap();
        let (loc, w) = law.atom().unwrap();
        assert!((loc - 1.0 / 0.9).abs() < 1e-12);
        assert!((w + law.continuous_mass() - 1.0).abs() < 1e-12);
        assert!((law.mean() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn theoretical_amp_values() {
        let mp = theoretical_noise_amp(DensityKind::MarchenkoPastur, DensityParams::new(0.25, 0.5).unwrap())
            .unwrap();
        assert!((mp - 1.0).abs() < 1e-7);
        for &b in &[0.1, 0.3, 0.7] {
            let v = theoretical_noise_amp(DensityKind::MarchenkoPastur, DensityParams::new(0.05, b).unwrap())
                .unwrap();
            assert!((v - b / (1.0 - b)).abs() < 1e-7, "beta={b}");
        }
        let tiny = theoretical_noise_amp(DensityKind::MarchenkoPastur, DensityParams::new(1e-4, 1e-3).unwrap())
            .unwrap();
        assert!(tiny < 2e-3);
        let manova = theoretical_noise_amp(DensityKind::Manova, DensityParams::new(0.25, 0.5).unwrap()).unwrap();
        assert!(manova < mp);
        assert!(theoretical_noise_amp(DensityKind::Manova, DensityParams::new(0.5, 1.0).unwrap())
            .unwrap()
            .is_infinite());
    }

    #[test]
    fn ks_self_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(kind, g, b) in &[
            (DensityKind::MarchenkoPastur, 0.25, 0.5),
            (DensityKind::Manova, 0.25, 0.5),
            (DensityKind::Manova, 0.1, 0.8),
        ] {
            let params = DensityParams::new(g, b).unwrap();
            let law = SpectralLaw::new(kind, params).unwrap();
            let samples: Vec<f64> = (0..100_000).map(|_| law.quantile(rng.random::<f64>())).collect();
            let d = ks_distance_to_density(&samples, kind, params).unwrap();
            assert!(d < 0.01, "{kind:?} {d}");
        }
    }

    #[test]
    fn ks_rejects_point_mass_and_bounds() {
        let params = DensityParams::new(0.25, 0.5).unwrap();
        let d = ks_distance_to_density(&[2.0; 500], DensityKind::MarchenkoPastur, params).unwrap();
        assert!(d > 0.3);
        let d = ks_distance_to_density(&[1.0], DensityKind::MarchenkoPastur, params).unwrap();
        assert!(d <= 1.0);
        assert!(ks_distance_to_density(&[], DensityKind::MarchenkoPastur, params).is_err());
    }
}
