//! Simulated coded matrix-vector multiplication.
//!
//! The master splits the rows of `A` into `m` blocks, encodes them into `n`
//! blocks with the transposed frame, hands block `i` to worker `i`, and
//! decodes the responses of the surviving workers by least squares. Workers
//! may add noise to their products and may straggle.

mod io;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::exec::{map_indexed, stream_rng, Execution};
use crate::frames::Frame;
use crate::montecarlo::sample_retained_set;
use crate::spectra::{analyze_subframe, subframe, RetainedSet};

pub use io::{export_frame, import_frame, read_csv_matrix, read_frame, write_frame, FrameFormat};

/// Real data matrix `A` (`h x l`) and vector `x` (length `l`); the job is
/// the product `A x`.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSet {
    a: DMatrix<f64>,
    x: DVector<f64>,
}

impl DataSet {
    pub fn new(a: DMatrix<f64>, x: DVector<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return invalid("data matrix must be non-empty");
        }
        if a.ncols() != x.len() {
            return invalid(format!(
                "A has {} columns but x has length {}",
                a.ncols(),
                x.len()
            ));
        }
        if a.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return invalid("data contains non-finite values");
        }
        Ok(Self { a, x })
    }

    /// `h x l` matrix and vector with entries uniform in `[-1, 1)`.
    pub fn random(h: usize, l: usize, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, 0);
        let a = DMatrix::from_fn(h, l, |_, _| rng.random_range(-1.0..1.0));
        let x = DVector::from_fn(l, |_, _| rng.random_range(-1.0..1.0));
        Self::new(a, x)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    /// The uncoded result `A x`.
    pub fn product(&self) -> DVector<f64> {
        &self.a * &self.x
    }
}

/// Computation noise added by each worker.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    None,
    /// Circular complex Gaussian noise with variance `sigma^2` on both the
    /// real and the imaginary part of every response entry.
    AdditiveGaussian { sigma: f64 },
    /// Every product and partial sum rounded to `bits` fraction bits.
    RoundToBits { bits: u32 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::AdditiveGaussian { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                invalid(format!("sigma must be finite and non-negative, got {sigma}"))
            }
            NoiseModel::RoundToBits { bits } if !(2..=52).contains(&bits) => {
                invalid(format!("mantissa bits must lie in 2..=52, got {bits}"))
            }
            _ => Ok(()),
        }
    }
}

/// Which workers fail to respond.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StragglerModel {
    FixedSet { erased: Vec<usize> },
    RandomK { k: usize },
    /// Response times are i.i.d. exponential with `rate`; nodes slower than
    /// `deadline` are erased.
    Delay { rate: f64, deadline: f64 },
}

impl StragglerModel {
    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        match self {
            StragglerModel::FixedSet { erased } => {
                RetainedSet::from_erased(n, erased).map(|_| ())
            }
            StragglerModel::RandomK { k } if *k < m || *k > n => {
                invalid(format!("random-k straggling needs m <= k <= n, got k={k}, m={m}, n={n}"))
            }
            StragglerModel::Delay { rate, deadline } if !(*rate > 0.0 && *deadline > 0.0) => {
                invalid("delay model needs positive rate and deadline")
            }
            _ => Ok(()),
        }
    }

    fn retained<R: Rng>(&self, n: usize, rng: &mut R) -> Result<RetainedSet> {
        match self {
            StragglerModel::FixedSet { erased } => RetainedSet::from_erased(n, erased),
            StragglerModel::RandomK { k } => sample_retained_set(n, *k, rng),
            StragglerModel::Delay { rate, deadline } => {
                let exp = Exp::new(*rate).map_err(|e| Error::InvalidParameters(e.to_string()))?;
                let kept = (0..n).filter(|_| exp.sample(rng) <= *deadline).collect();
                RetainedSet::new(n, kept)
            }
        }
    }
}

/// Splits the rows of `a` into `m` blocks of `ceil(h/m)` rows, zero-padding
/// the tail.
pub fn partition_data(a: &DMatrix<f64>, m: usize) -> Result<Vec<DMatrix<f64>>> {
    if m == 0 {
        return invalid("m must be at least 1");
    }
    let h = a.nrows();
    let rows = h.div_ceil(m);
    Ok((0..m)
        .map(|j| {
            DMatrix::from_fn(rows, a.ncols(), |r, c| {
                let src = j * rows + r;
                if src < h {
                    a[(src, c)]
                } else {
                    0.0
                }
            })
        })
        .collect())
}

/// Encoded block `i = sum_j F[j, i] * block_j`.
pub fn encode_blocks(blocks: &[DMatrix<f64>], frame: &Frame) -> Result<Vec<DMatrix<Complex64>>> {
    if blocks.len() != frame.m() {
        return invalid(format!(
            "{} blocks for a frame with {} rows",
            blocks.len(),
            frame.m()
        ));
    }
    let shape = blocks[0].shape();
    if blocks.iter().any(|b| b.shape() != shape) {
        return invalid("blocks must share one shape");
    }
    let f = frame.matrix().as_inner();
    Ok((0..frame.n())
        .map(|i| {
            let mut acc = DMatrix::<Complex64>::zeros(shape.0, shape.1);
            for (j, block) in blocks.iter().enumerate() {
                let coeff = f[(j, i)];
                acc.zip_apply(block, |out, v| *out += coeff * v);
            }
            acc
        })
        .collect())
}

/// Rounds `v` to `bits` fraction bits, ties to even.
pub fn round_to_bits(v: f64, bits: u32) -> f64 {
    if bits >= 52 || !v.is_finite() {
        return v;
    }
    let shift = 52 - bits;
    let raw = v.to_bits();
    let mask = (1u64 << shift) - 1;
    let half = 1u64 << (shift - 1);
    let low = raw & mask;
    let mut high = raw & !mask;
    if low > half || (low == half && (high >> shift) & 1 == 1) {
        high += 1u64 << shift;
    }
    f64::from_bits(high)
}

/// One worker's response `A'_i x` under `noise`.
pub fn worker_compute<R: Rng + ?Sized>(
    encoded: &DMatrix<Complex64>,
    x: &DVector<f64>,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<DVector<Complex64>> {
    if encoded.ncols() != x.len() {
        return invalid(format!(
            "encoded block has {} columns but x has length {}",
            encoded.ncols(),
            x.len()
        ));
    }
    let bits = match *noise {
        NoiseModel::RoundToBits { bits } => bits,
        _ => 52,
    };
    let round = |v: f64| round_to_bits(v, bits);
    let mut out = DVector::from_fn(encoded.nrows(), |r, _| {
        let mut re = 0.0;
        let mut im = 0.0;
        for (c, &xc) in x.iter().enumerate() {
            let e = encoded[(r, c)];
            re = round(re + round(e.re * xc));
            im = round(im + round(e.im * xc));
        }
        Complex64::new(re, im)
    });
    if let NoiseModel::AdditiveGaussian { sigma } = *noise {
        for z in out.iter_mut() {
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            *z += Complex64::new(sigma * a, sigma * b);
        }
    }
    Ok(out)
}

/// Least-squares estimate of the `m` block products.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    /// Real parts of the decoded block products.
    pub blocks: Vec<DVector<f64>>,
    /// Largest imaginary magnitude discarded, relative to the largest real
    /// magnitude (or absolute when that is zero).
    pub imag_residue: f64,
    /// Condition number of the decoding sub-frame.
    pub kappa: f64,
}

/// Solves `min_B || F_k^T B - R ||_F` by a QR factorization of `F_k^T`.
/// `responses[i]` belongs to node `retained.indices()[i]`.
pub fn decode_ls(
    responses: &[DVector<Complex64>],
    retained: &RetainedSet,
    frame: &Frame,
) -> Result<Decoded> {
    let (m, k) = (frame.m(), retained.k());
    if k < m {
        return Err(Error::Underdetermined { retained: k, rows: m });
    }
    if responses.len() != k {
        return invalid(format!("{} responses for {k} retained nodes", responses.len()));
    }
    let len = responses[0].len();
    if responses.iter().any(|r| r.len() != len) {
        return invalid("responses differ in length");
    }
    let sub = subframe(frame, retained)?;
    let report = analyze_subframe(&sub)?;
    if report.ill_conditioned {
        return Err(Error::IllConditioned {
            kappa: report.kappa_matrix,
        });
    }

    let system = sub.as_inner().transpose();
    let rhs = DMatrix::from_fn(k, len, |i, c| responses[i][c]);
    let qr = system.qr();
    let q = qr.q();
    let r = qr.r();
    let projected = q.adjoint() * rhs;
    let solution = r
        .solve_upper_triangular(&projected)
        .ok_or(Error::IllConditioned {
            kappa: report.kappa_matrix,
        })?;

    let max_re = solution.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let max_im = solution.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let imag_residue = if max_re > 0.0 { max_im / max_re } else { max_im };
    let blocks = (0..m)
        .map(|j| DVector::from_iterator(len, solution.row(j).iter().map(|z| z.re)))
        .collect();
    Ok(Decoded {
        blocks,
        imag_residue,
        kappa: report.kappa_matrix,
    })
}

/// Aggregate metrics of a simulation run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimResult {
    /// Mean over decoded trials of the mean squared entry error of `A x`.
    pub mse: f64,
    /// Standard error of `mse` across trials.
    pub mse_std_error: f64,
    /// Mean over decoded trials of `||est - truth||_F / ||truth||_F`.
    pub rel_frobenius: f64,
    pub kappa_mean: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub trials: usize,
    pub decoded: usize,
    pub failed_decodes: usize,
    pub max_imag_residue: f64,
    /// Number of trials per retained count `k`.
    pub retained_histogram: BTreeMap<usize, usize>,
}

/// One simulated round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundOutcome {
    pub retained: RetainedSet,
    /// Decoded `A x` (padding removed); `None` when decoding failed.
    pub estimate: Option<DVector<f64>>,
    pub kappa: f64,
    pub imag_residue: f64,
}

/// Encoded blocks of `data` under `frame`.
pub fn encode_data(data: &DataSet, frame: &Frame) -> Result<Vec<DMatrix<Complex64>>> {
    encode_blocks(&partition_data(data.a(), frame.m())?, frame)
}

/// Straggle, compute and decode one round with randomness from
/// `stream_rng(seed, trial)`.
pub fn simulate_round(
    data: &DataSet,
    encoded: &[DMatrix<Complex64>],
    frame: &Frame,
    noise: &NoiseModel,
    straggler: &StragglerModel,
    seed: u64,
    trial: usize,
) -> Result<RoundOutcome> {
    if encoded.len() != frame.n() {
        return invalid(format!("{} encoded blocks for {} nodes", encoded.len(), frame.n()));
    }
    let mut rng = stream_rng(seed, trial as u64);
    let retained = straggler.retained(frame.n(), &mut rng)?;
    let failed = |retained| RoundOutcome {
        retained,
        estimate: None,
        kappa: f64::INFINITY,
        imag_residue: 0.0,
    };
    if retained.k() < frame.m() {
        return Ok(failed(retained));
    }
    let responses: Vec<DVector<Complex64>> = retained
        .indices()
        .iter()
        .map(|&i| worker_compute(&encoded[i], data.x(), noise, &mut rng))
        .collect::<Result<_>>()?;
    let decoded = match decode_ls(&responses, &retained, frame) {
        Ok(d) => d,
        Err(Error::IllConditioned { .. }) => return Ok(failed(retained)),
        Err(e) => return Err(e),
    };
    let h = data.a().nrows();
    let estimate = DVector::from_iterator(
        h,
        decoded.blocks.iter().flat_map(|b| b.iter().copied()).take(h),
    );
    Ok(RoundOutcome {
        retained,
        estimate: Some(estimate),
        kappa: decoded.kappa,
        imag_residue: decoded.imag_residue,
    })
}

/// End-to-end rounds of partition, encode, noisy compute, straggle and
/// decode. Trial `t` draws all of its randomness from `stream_rng(seed, t)`.
pub fn run_simulation(
    data: &DataSet,
    frame: &Frame,
    noise: &NoiseModel,
    straggler: &StragglerModel,
    trials: usize,
    seed: u64,
) -> Result<SimResult> {
    run_simulation_with(data, frame, noise, straggler, trials, seed, Execution::default())
}

pub fn run_simulation_with(
    data: &DataSet,
    frame: &Frame,
    noise: &NoiseModel,
    straggler: &StragglerModel,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<SimResult> {
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    noise.validate()?;
    straggler.validate(frame.m(), frame.n())?;
    let truth = data.product();
    let truth_norm = truth.norm();
    let encoded = encode_data(data, frame)?;

    let outcomes: Vec<RoundOutcome> = map_indexed(exec, trials, |t| {
        simulate_round(data, &encoded, frame, noise, straggler, seed, t)
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let mut retained_histogram = BTreeMap::new();
    for o in &outcomes {
        *retained_histogram.entry(o.retained.k()).or_insert(0) += 1;
    }
    // (mse, relative error, kappa, imaginary residue) per decoded round
    let ok: Vec<(f64, f64, f64, f64)> = outcomes
        .iter()
        .filter_map(|o| {
            let est = o.estimate.as_ref()?;
            let sq_err: f64 = est.iter().zip(truth.iter()).map(|(e, t)| (e - t).powi(2)).sum();
            let rel = if truth_norm > 0.0 { sq_err.sqrt() / truth_norm } else { sq_err.sqrt() };
            Some((sq_err / truth.len() as f64, rel, o.kappa, o.imag_residue))
        })
        .collect();
    let decoded = ok.len();
    let (mse, mse_std_error, rel_frobenius, kappa_mean, kappa_min, kappa_max, max_imag) =
        if decoded == 0 {
            let inf = f64::INFINITY;
            (inf, inf, inf, inf, inf, inf, 0.0)
        } else {
            let count = decoded as f64;
            let mse = ok.iter().map(|t| t.0).sum::<f64>() / count;
            let var = if decoded > 1 {
                ok.iter().map(|t| (t.0 - mse).powi(2)).sum::<f64>() / (count - 1.0)
            } else {
                0.0
            };
            (
                mse,
                (var / count).sqrt(),
                ok.iter().map(|t| t.1).sum::<f64>() / count,
                ok.iter().map(|t| t.2).sum::<f64>() / count,
                ok.iter().map(|t| t.2).fold(f64::INFINITY, f64::min),
                ok.iter().map(|t| t.2).fold(0.0, f64::max),
                ok.iter().map(|t| t.3).fold(0.0, f64::max),
            )
        };
    Ok(SimResult {
        mse,
        mse_std_error,
        rel_frobenius,
        // Clamp so that mean-of-equal-values rounding never breaks min <= mean <= max.
        kappa_mean: kappa_mean.clamp(kappa_min, kappa_max),
        kappa_min,
        kappa_max,
        trials,
        decoded,
        failed_decodes: trials - decoded,
        max_imag_residue: max_imag,
        retained_histogram,
    })
}
