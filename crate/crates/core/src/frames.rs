//! Code generator matrices viewed as frames.
//!
//! A frame here is an `m x n` complex matrix whose `n` unit-norm columns are
//! the frame vectors; column `i` is the coefficient vector node `i` applies to
//! the `m` data blocks. Polynomial codes are built from sample points `s` and
//! powers `z` as generalized Vandermonde matrices, with column `i` equal to
//! `(s_i^{z_1}, ..., s_i^{z_m})` up to normalization.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::matrix::ComplexMatrix;

/// Default tolerance for structural property checks.
pub const PROPERTY_TOL: f64 = 1e-9;

/// Largest `n` for which [`search_difference_set`] runs its exhaustive search.
pub const DIFFERENCE_SET_SEARCH_MAX_N: usize = 40;

/// Which polynomial-code family a [`PolynomialCodeSpec`] belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeFamily {
    Uspc,
    Nuspc,
    Ncp,
    /// Caller-supplied samples and powers.
    General,
}

/// Sample points and powers of a polynomial code over the complex field.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialCodeSpec {
    samples: Vec<Complex64>,
    powers: Vec<usize>,
    family: CodeFamily,
    /// Sample `i` is `exp(2 pi i e_i / den)` for roots-of-unity families.
    grid: Option<(Vec<usize>, usize)>,
}

impl PolynomialCodeSpec {
    /// Validates a general spec: samples nonzero and pairwise distinct, powers
    /// distinct and below `n = samples.len()`, `1 <= m <= n`.
    pub fn new(samples: Vec<Complex64>, powers: Vec<usize>) -> Result<Self> {
        Self::with_family(samples, powers, CodeFamily::General)
    }

    fn on_grid(exponents: Vec<usize>, den: usize, powers: Vec<usize>, family: CodeFamily) -> Result<Self> {
        let samples = exponents.iter().map(|&e| root_of_unity(e, den)).collect();
        let mut spec = Self::with_family(samples, powers, family)?;
        spec.grid = Some((exponents, den));
        Ok(spec)
    }

    fn with_family(samples: Vec<Complex64>, powers: Vec<usize>, family: CodeFamily) -> Result<Self> {
        let n = samples.len();
        let m = powers.len();
        if m == 0 || m > n {
            return invalid(format!("need 1 <= m <= n, got m={m}, n={n}"));
        }
        for (i, s) in samples.iter().enumerate() {
            if !s.re.is_finite() || !s.im.is_finite() {
                return invalid(format!("sample {i} is not finite"));
            }
            if s.norm() == 0.0 {
                return invalid(format!("sample {i} is zero"));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (samples[i] - samples[j]).norm() <= 1e-12 * samples[i].norm().max(1.0) {
                    return invalid(format!("samples {i} and {j} coincide"));
                }
            }
        }
        let distinct: BTreeSet<_> = powers.iter().copied().collect();
        if distinct.len() != m {
            return invalid(format!("powers {powers:?} are not distinct"));
        }
        if let Some(&p) = powers.iter().find(|&&p| p >= n) {
            return invalid(format!("power {p} outside 0..{n}"));
        }
        Ok(Self {
            samples,
            powers,
            family,
            grid: None,
        })
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn m(&self) -> usize {
        self.powers.len()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn powers(&self) -> &[usize] {
        &self.powers
    }

    pub fn family(&self) -> CodeFamily {
        self.family
    }
}

/// Parameters of a polynomial code with non-uniform unit-circle sampling.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NuspcParams {
    pub n: usize,
    pub m: usize,
    /// Grid refinement factor: samples lie on the `b*n`-th roots of unity.
    pub b: usize,
    /// Offsets per period; must divide `n`.
    pub r: usize,
    /// `r` distinct offsets in `0..r*b`.
    pub y: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Uspc,
    Nuspc,
    Ncp,
    /// Polynomial code from a caller-supplied spec.
    Polynomial,
    Gaussian,
    Harmonic,
    Imported,
}

/// How a frame was produced.
#[derive(Clone, Debug, PartialEq)]
pub enum Construction {
    Code(PolynomialCodeSpec),
    /// Selected DFT rows.
    Rows(Vec<usize>),
    Seed(u64),
    External,
}

/// `m x n` code generator matrix with unit-norm columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    matrix: ComplexMatrix,
    kind: FrameKind,
    construction: Construction,
}

impl Frame {
    /// Normalizes every column of `matrix` to unit Euclidean norm.
    pub fn from_matrix(
        matrix: ComplexMatrix,
        kind: FrameKind,
        construction: Construction,
    ) -> Result<Self> {
        let mut inner = matrix.into_inner();
        for (j, mut col) in inner.column_iter_mut().enumerate() {
            let norm = col.norm();
            if norm == 0.0 || !norm.is_finite() {
                return invalid(format!("column {j} has zero or non-finite norm"));
            }
            col.unscale_mut(norm);
        }
        Ok(Self {
            matrix: ComplexMatrix::new(inner)?,
            kind,
            construction,
        })
    }

    /// Number of rows (data blocks).
    pub fn m(&self) -> usize {
        self.matrix.rows()
    }

    /// Number of columns (worker nodes).
    pub fn n(&self) -> usize {
        self.matrix.cols()
    }

    /// Aspect ratio `m / n`.
    pub fn gamma(&self) -> f64 {
        self.m() as f64 / self.n() as f64
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn kind(&self) -> FrameKind {
        self.kind
    }

    pub fn construction(&self) -> &Construction {
        &self.construction
    }
}

/// `exp(2 pi i num / den)` with the fraction reduced first, so that large
/// numerators do not lose phase accuracy.
fn root_of_unity(num: usize, den: usize) -> Complex64 {
    let reduced = num % den;
    Complex64::from_polar(1.0, 2.0 * PI * reduced as f64 / den as f64)
}

/// Uniform unit-circle samples `exp(2 pi i j / n)` with powers `0..m`.
pub fn uspc_spec(n: usize, m: usize) -> Result<PolynomialCodeSpec> {
    if m == 0 || m > n {
        return invalid(format!("USPC needs 1 <= m <= n, got m={m}, n={n}"));
    }
    PolynomialCodeSpec::on_grid((0..n).collect(), n, (0..m).collect(), CodeFamily::Uspc)
}

/// Non-uniform samples `exp(2 pi i (y_j + r b alpha) / (b n))` for
/// `alpha in 0..n/r`, sorted by angle, with powers `0..m`.
pub fn nuspc_spec(p: &NuspcParams) -> Result<PolynomialCodeSpec> {
    let NuspcParams { n, m, b, r, ref y } = *p;
    if m == 0 || m > n {
        return invalid(format!("NUSPC needs 1 <= m <= n, got m={m}, n={n}"));
    }
    if b == 0 || r == 0 {
        return invalid("NUSPC needs b >= 1 and r >= 1");
    }
    if n % r != 0 {
        return invalid(format!("r={r} does not divide n={n}"));
    }
    if y.len() != r {
        return invalid(format!("|y| = {} but r = {r}", y.len()));
    }
    if let Some(&bad) = y.iter().find(|&&v| v >= r * b) {
        return invalid(format!("offset {bad} outside 0..{}", r * b));
    }
    let grid = b * n;
    let mut exponents: Vec<usize> = y
        .iter()
        .flat_map(|&yj| (0..n / r).map(move |alpha| yj + r * b * alpha))
        .collect();
    exponents.sort_unstable();
    if exponents.windows(2).any(|w| w[0] == w[1]) {
        return invalid(format!("offsets {y:?} produce duplicate sample points"));
    }
    PolynomialCodeSpec::on_grid(exponents, grid, (0..m).collect(), CodeFamily::Nuspc)
}

/// True when `powers` (distinct residues mod `n`) form one cyclic run
/// `{a, a+1, ..., a+|powers|-1} mod n`.
pub fn is_cyclically_consecutive(powers: &[usize], n: usize) -> bool {
    let set: BTreeSet<usize> = powers.iter().copied().collect();
    if set.len() >= n {
        return true;
    }
    // A proper cyclic run has exactly one member whose successor is missing.
    set.iter().filter(|&&p| !set.contains(&((p + 1) % n))).count() == 1
}

/// Uniform samples as in [`uspc_spec`] with a power set that is not a cyclic
/// run of consecutive integers.
pub fn ncp_spec(n: usize, m: usize, powers: &[usize]) -> Result<PolynomialCodeSpec> {
    if m == 0 || m > n {
        return invalid(format!("NCP needs 1 <= m <= n, got m={m}, n={n}"));
    }
    if powers.len() != m {
        return invalid(format!("expected {m} powers, got {}", powers.len()));
    }
    let distinct: BTreeSet<usize> = powers.iter().copied().collect();
    if distinct.len() != m {
        return invalid(format!("powers {powers:?} are not distinct"));
    }
    if let Some(&p) = powers.iter().find(|&&p| p >= n) {
        return invalid(format!("power {p} outside 0..{n}"));
    }
    if is_cyclically_consecutive(powers, n) {
        return Err(Error::RejectedAsUspc(distinct.into_iter().collect()));
    }
    PolynomialCodeSpec::on_grid((0..n).collect(), n, powers.to_vec(), CodeFamily::Ncp)
}

/// Generator matrix of a polynomial code: column `i` is
/// `(s_i^{z_1}, ..., s_i^{z_m})` scaled to unit norm.
pub fn build_frame(spec: &PolynomialCodeSpec) -> Result<Frame> {
    let (m, n) = (spec.m(), spec.n());
    let matrix = ComplexMatrix::from_fn(m, n, |row, col| {
        let power = spec.powers[row];
        match &spec.grid {
            Some((exponents, den)) => root_of_unity(exponents[col] * power, *den),
            None => spec.samples[col].powu(power as u32),
        }
    })?;
    let kind = match spec.family {
        CodeFamily::Uspc => FrameKind::Uspc,
        CodeFamily::Nuspc => FrameKind::Nuspc,
        CodeFamily::Ncp => FrameKind::Ncp,
        CodeFamily::General => FrameKind::Polynomial,
    };
    Frame::from_matrix(matrix, kind, Construction::Code(spec.clone()))
}

/// `m x n` frame of i.i.d. real standard normal entries with columns scaled
/// to unit norm. Entries are drawn column by column from a ChaCha8 stream
/// seeded with `seed`.
pub fn random_gaussian_frame(m: usize, n: usize, seed: u64) -> Result<Frame> {
    if m == 0 || m > n {
        return invalid(format!("Gaussian frame needs 1 <= m <= n, got m={m}, n={n}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = DMatrix::<Complex64>::zeros(m, n);
    for mut col in data.column_iter_mut() {
        for z in col.iter_mut() {
            let v: f64 = StandardNormal.sample(&mut rng);
            *z = Complex64::new(v, 0.0);
        }
    }
    Frame::from_matrix(
        ComplexMatrix::new(data)?,
        FrameKind::Gaussian,
        Construction::Seed(seed),
    )
}

/// Rows `rows` of the `n`-point DFT matrix (entries `exp(2 pi i r j / n)`),
/// columns scaled to unit norm.
pub fn harmonic_frame(n: usize, rows: &[usize]) -> Result<Frame> {
    if rows.is_empty() || rows.len() > n {
        return invalid(format!("need 1 <= |rows| <= n, got {} rows for n={n}", rows.len()));
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
        return invalid(format!("row {bad} outside 0..{n}"));
    }
    let distinct: BTreeSet<usize> = rows.iter().copied().collect();
    if distinct.len() != rows.len() {
        return invalid(format!("rows {rows:?} are not distinct"));
    }
    let matrix = ComplexMatrix::from_fn(rows.len(), n, |i, j| root_of_unity(rows[i] * j, n))?;
    Frame::from_matrix(matrix, FrameKind::Harmonic, Construction::Rows(rows.to_vec()))
}

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Nonzero quadratic residues modulo a prime `n = 3 (mod 4)`, sorted. These
/// form a `(n, (n-1)/2, (n-3)/4)` difference set.
pub fn quadratic_residue_difference_set(n: usize) -> Result<Vec<usize>> {
    if !is_prime(n) || n % 4 != 3 {
        return Err(Error::UnsupportedParameters(format!(
            "quadratic-residue difference sets need a prime n = 3 mod 4, got {n}"
        )));
    }
    let set: BTreeSet<usize> = (1..n).map(|x| x * x % n).collect();
    Ok(set.into_iter().collect())
}

/// True iff every nonzero residue mod `n` appears equally often among the
/// ordered differences `z_i - z_j`, `i != j`. Out-of-range or repeated
/// elements make the answer false.
pub fn is_difference_set(z: &[usize], n: usize) -> bool {
    if z.is_empty() || n == 0 || z.iter().any(|&v| v >= n) {
        return false;
    }
    let distinct: BTreeSet<usize> = z.iter().copied().collect();
    if distinct.len() != z.len() {
        return false;
    }
    let mut counts = vec![0usize; n];
    for &a in z {
        for &b in z {
            if a != b {
                counts[(a + n - b) % n] += 1;
            }
        }
    }
    let m = z.len();
    let lambda = counts.get(1).copied().unwrap_or(0);
    counts[1..].iter().all(|&c| c == lambda) && lambda * (n - 1) == m * (m - 1)
}

/// Exhaustive search for an `(n, m, lambda)` cyclic difference set containing
/// 0. Only runs for `n <= DIFFERENCE_SET_SEARCH_MAX_N`.
pub fn search_difference_set(n: usize, m: usize) -> Result<Option<Vec<usize>>> {
    if n > DIFFERENCE_SET_SEARCH_MAX_N {
        return Err(Error::UnsupportedParameters(format!(
            "exhaustive difference-set search is limited to n <= {DIFFERENCE_SET_SEARCH_MAX_N}, got {n}"
        )));
    }
    if m == 0 || m > n {
        return invalid(format!("need 1 <= m <= n, got m={m}, n={n}"));
    }
    if n == 1 || m == 1 {
        return Ok(Some(vec![0]));
    }
    if (m * (m - 1)) % (n - 1) != 0 {
        return Ok(None);
    }
    let lambda = m * (m - 1) / (n - 1);

    fn extend(
        chosen: &mut Vec<usize>,
        counts: &mut [usize],
        next: usize,
        n: usize,
        m: usize,
        lambda: usize,
    ) -> bool {
        if chosen.len() == m {
            return true;
        }
        for cand in next..n {
            if n - cand < m - chosen.len() {
                break;
            }
            let mut ok = true;
            let mut touched = Vec::with_capacity(2 * chosen.len());
            for &c in chosen.iter() {
                for d in [(cand + n - c) % n, (c + n - cand) % n] {
                    counts[d] += 1;
                    touched.push(d);
                    if counts[d] > lambda {
                        ok = false;
                    }
                }
            }
            if ok {
                chosen.push(cand);
                if extend(chosen, counts, cand + 1, n, m, lambda) {
                    return true;
                }
                chosen.pop();
            }
            for d in touched {
                counts[d] -= 1;
            }
        }
        false
    }

    let mut chosen = vec![0];
    let mut counts = vec![0usize; n];
    Ok(extend(&mut chosen, &mut counts, 1, n, m, lambda).then_some(chosen))
}

/// Structural properties of a frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FramePropertyReport {
    pub unit_norm: bool,
    pub tight: bool,
    /// Mean diagonal of `F F^*`; the common frame bound when `tight`.
    pub tight_bound: f64,
    pub equiangular: bool,
    pub max_cross_correlation: f64,
    pub welch_bound: f64,
}

/// `sqrt((n - m) / (m (n - 1)))`, the smallest possible coherence of `n`
/// unit vectors in dimension `m`. Zero when `n <= m`.
pub fn welch_bound(m: usize, n: usize) -> f64 {
    if n <= m || n < 2 {
        return 0.0;
    }
    ((n - m) as f64 / (m as f64 * (n - 1) as f64)).sqrt()
}

pub fn frame_properties(frame: &Frame, tol: f64) -> Result<FramePropertyReport> {
    if !(tol > 0.0) {
        return invalid(format!("tolerance must be positive, got {tol}"));
    }
    let f = frame.matrix().as_inner();
    let (m, n) = (frame.m(), frame.n());

    let unit_norm = (0..n).all(|j| (f.column(j).norm() - 1.0).abs() <= tol);

    let op = frame.matrix().frame_operator();
    let tight_bound = (0..m).map(|i| op[(i, i)].re).sum::<f64>() / m as f64;
    let tight = (0..m).all(|i| {
        (0..m).all(|j| {
            let target = if i == j { tight_bound } else { 0.0 };
            (op[(i, j)] - Complex64::new(target, 0.0)).norm() <= tol
        })
    });

    let gram = f.adjoint() * f;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for j in 0..n {
        for i in 0..j {
            let c = gram[(i, j)].norm();
            lo = lo.min(c);
            hi = hi.max(c);
        }
    }
    let (equiangular, max_cross_correlation) = if n < 2 { (true, 0.0) } else { (hi - lo <= tol, hi) };

    Ok(FramePropertyReport {
        unit_norm,
        tight,
        tight_bound,
        equiangular,
        max_cross_correlation,
        welch_bound: welch_bound(m, n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn uspc_samples_are_roots_of_unity() {
        let spec = uspc_spec(4, 2).unwrap();
        let expected = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        assert!(spec.samples().iter().zip(expected).all(|(&a, b)| close(a, b)));
        assert_eq!(spec.powers(), &[0, 1]);

        let one = uspc_spec(1, 1).unwrap();
        assert!(close(one.samples()[0], c(1.0, 0.0)));
        assert_eq!(one.powers(), &[0]);

        assert!(matches!(uspc_spec(4, 5), Err(Error::InvalidParameters(_))));
        assert!(matches!(uspc_spec(4, 0), Err(Error::InvalidParameters(_))));
    }

    #[test]
    fn nuspc_reduces_to_uspc_and_refines_the_grid() {
        let p = NuspcParams { n: 4, m: 2, b: 1, r: 2, y: vec![0, 1] };
        let spec = nuspc_spec(&p).unwrap();
        let uspc = uspc_spec(4, 2).unwrap();
        for (a, b) in spec.samples().iter().zip(uspc.samples()) {
            assert!(close(*a, *b));
        }
        let wide = NuspcParams { n: 300, m: 50, b: 1, r: 3, y: vec![0, 1, 2] };
        let same = build_frame(&nuspc_spec(&wide).unwrap()).unwrap();
        let reference = build_frame(&uspc_spec(300, 50).unwrap()).unwrap();
        assert_eq!(same.matrix().as_inner(), reference.matrix().as_inner());

        let p = NuspcParams { n: 4, m: 2, b: 2, r: 2, y: vec![0, 1] };
        let spec = nuspc_spec(&p).unwrap();
        let expected: Vec<_> = [0.0, 1.0 / 8.0, 0.5, 5.0 / 8.0]
            .iter()
            .map(|t| Complex64::from_polar(1.0, 2.0 * PI * t))
            .collect();
        for (a, b) in spec.samples().iter().zip(expected) {
            assert!(close(*a, b));
        }

        let bad = NuspcParams { n: 4, m: 2, b: 2, r: 3, y: vec![0, 1, 2] };
        assert!(matches!(nuspc_spec(&bad), Err(Error::InvalidParameters(_))));
        let dup = NuspcParams { n: 4, m: 2, b: 2, r: 2, y: vec![1, 1] };
        assert!(matches!(nuspc_spec(&dup), Err(Error::InvalidParameters(_))));
    }

    #[test]
    fn ncp_rejects_cyclic_runs() {
        let spec = ncp_spec(7, 3, &[1, 2, 4]).unwrap();
        assert_eq!(spec.powers(), &[1, 2, 4]);
        assert!(matches!(ncp_spec(7, 3, &[2, 3, 4]), Err(Error::RejectedAsUspc(_))));
        assert!(matches!(ncp_spec(7, 3, &[0, 1, 6]), Err(Error::RejectedAsUspc(_))));
        assert!(matches!(ncp_spec(7, 3, &[0, 1]), Err(Error::InvalidParameters(_))));
        assert!(matches!(ncp_spec(7, 3, &[0, 1, 9]), Err(Error::InvalidParameters(_))));
    }

    #[test]
    fn build_frame_matches_scaled_vandermonde() {
        let f = build_frame(&uspc_spec(4, 2).unwrap()).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let omega = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        for j in 0..4 {
            assert!(close(f.matrix().get(0, j), c(s, 0.0)));
            assert!(close(f.matrix().get(1, j), omega[j] * s));
        }
        assert_eq!(f.kind(), FrameKind::Uspc);
        assert_eq!(f.gamma(), 0.5);

        let one = build_frame(&uspc_spec(1, 1).unwrap()).unwrap();
        assert!(close(one.matrix().get(0, 0), c(1.0, 0.0)));
    }

    #[test]
    fn general_spec_validation() {
        assert!(PolynomialCodeSpec::new(vec![c(1.0, 0.0), c(0.0, 0.0)], vec![0]).is_err());
        assert!(PolynomialCodeSpec::new(vec![c(1.0, 0.0), c(1.0, 0.0)], vec![0]).is_err());
        assert!(PolynomialCodeSpec::new(vec![c(1.0, 0.0), c(2.0, 0.0)], vec![0, 0]).is_err());
        assert!(PolynomialCodeSpec::new(vec![c(1.0, 0.0), c(2.0, 0.0)], vec![2]).is_err());
        let spec = PolynomialCodeSpec::new(vec![c(1.0, 0.0), c(2.0, 0.0)], vec![0, 1]).unwrap();
        let f = build_frame(&spec).unwrap();
        assert_eq!(f.kind(), FrameKind::Polynomial);
        let s5 = 5f64.sqrt();
        assert!(close(f.matrix().get(1, 1), c(2.0 / s5, 0.0)));
    }

    #[test]
    fn gaussian_frame_is_seeded() {
        let a = random_gaussian_frame(50, 100, 7).unwrap();
        let b = random_gaussian_frame(50, 100, 7).unwrap();
        let other = random_gaussian_frame(50, 100, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.matrix(), other.matrix());
        assert!(random_gaussian_frame(5, 4, 1).is_err());
        assert!((0..100).all(|j| (a.matrix().column_norm(j) - 1.0).abs() < 1e-12));
    }

    #[test]
    fn harmonic_frame_rows_and_errors() {
        let f = harmonic_frame(4, &[0, 1]).unwrap();
        let uspc = build_frame(&uspc_spec(4, 2).unwrap()).unwrap();
        assert!(f.matrix().max_abs_diff(uspc.matrix()) < 1e-12);
        assert!(harmonic_frame(4, &[0, 4]).is_err());
        assert!(harmonic_frame(4, &[]).is_err());
        assert!(harmonic_frame(4, &[1, 1]).is_err());
    }

    #[test]
    fn quadratic_residues() {
        assert_eq!(quadratic_residue_difference_set(7).unwrap(), vec![1, 2, 4]);
        let qr31 = quadratic_residue_difference_set(31).unwrap();
        assert_eq!(qr31.len(), 15);
        for v in [1, 2, 4, 5, 7, 8] {
            assert!(qr31.contains(&v));
        }
        assert!(matches!(
            quadratic_residue_difference_set(5),
            Err(Error::UnsupportedParameters(_))
        ));
        assert!(matches!(
            quadratic_residue_difference_set(15),
            Err(Error::UnsupportedParameters(_))
        ));
    }

    #[test]
    fn difference_set_predicate() {
        assert!(is_difference_set(&[1, 2, 4], 7));
        assert!(!is_difference_set(&[0, 1, 2], 7));
        assert!(is_difference_set(&[0], 2));
        assert!(!is_difference_set(&[0, 9], 7));
        // Singer (13, 4, 1)
        assert!(is_difference_set(&[0, 1, 3, 9], 13));
    }

    #[test]
    fn exhaustive_difference_set_search() {
        let found = search_difference_set(13, 4).unwrap().unwrap();
        assert!(is_difference_set(&found, 13));
        let found = search_difference_set(21, 5).unwrap().unwrap();
        assert!(is_difference_set(&found, 21));
        // lambda = 12/9 is not an integer
        assert_eq!(search_difference_set(10, 4).unwrap(), None);
        assert!(search_difference_set(41, 5).is_err());
    }

    #[test]
    fn properties_of_small_frames() {
        let uspc = build_frame(&uspc_spec(4, 2).unwrap()).unwrap();
        let r = frame_properties(&uspc, PROPERTY_TOL).unwrap();
        assert!(r.unit_norm && r.tight && !r.equiangular);
        assert!((r.tight_bound - 2.0).abs() < 1e-12);

        let etf = build_frame(&ncp_spec(7, 3, &[1, 2, 4]).unwrap()).unwrap();
        let r = frame_properties(&etf, PROPERTY_TOL).unwrap();
        assert!(r.tight && r.equiangular);
        assert!((r.max_cross_correlation - (4.0f64 / 18.0).sqrt()).abs() < 1e-12);
        assert!((r.welch_bound - (4.0f64 / 18.0).sqrt()).abs() < 1e-15);

        let g = random_gaussian_frame(10, 40, 3).unwrap();
        assert!(!frame_properties(&g, PROPERTY_TOL).unwrap().tight);
        assert!(frame_properties(&g, 0.0).is_err());
    }
}
