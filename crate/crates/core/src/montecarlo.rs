//! Random erasure patterns, Monte-Carlo noise amplification and code search.
//!
//! Trial `t` under seed `s` always sees the retained set drawn from
//! `stream_rng(derive_seed(s, TRIAL_TAG), t)`. Two frames of the same size
//! evaluated under the same plan therefore face identical erasure patterns,
//! which keeps candidate comparisons free of sampling noise between them.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::exec::{derive_seed, map_indexed, stream_rng, Execution};
use crate::frames::{
    build_frame, is_cyclically_consecutive, ncp_spec, nuspc_spec, uspc_spec, Frame, NuspcParams,
    PolynomialCodeSpec,
};
use crate::spectra::{
    analyze_subframe, subframe, theoretical_noise_amp, DensityKind, DensityParams, RetainedSet,
};

const TRIAL_TAG: u64 = 1;
const PRESCREEN_TAG: u64 = 2;
const CANDIDATE_TAG: u64 = 3;

/// Default number of candidates per search.
pub const DEFAULT_CANDIDATES: usize = 200;
/// Default number of erasure trials per estimate.
pub const DEFAULT_TRIALS: usize = 10_000;
/// Trials in the validity prescreen of a search candidate.
pub const DEFAULT_PRESCREEN_TRIALS: usize = 50;

/// Number of trials, seed and retained count for one Monte-Carlo estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TrialPlan {
    pub trials: usize,
    pub seed: u64,
    pub k: usize,
}

impl TrialPlan {
    pub fn new(trials: usize, seed: u64, k: usize) -> Self {
        Self { trials, seed, k }
    }

    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        if self.trials == 0 {
            return invalid("trials must be at least 1");
        }
        if self.k > n {
            return invalid(format!("k={} exceeds n={n}", self.k));
        }
        if self.k < m {
            return Err(Error::Underdetermined {
                retained: self.k,
                rows: m,
            });
        }
        Ok(())
    }
}

/// Uniformly random `k`-subset of `0..n`.
pub fn sample_retained_set<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<RetainedSet> {
    if k == 0 || k > n {
        return invalid(format!("need 1 <= k <= n, got k={k}, n={n}"));
    }
    RetainedSet::new(n, index::sample(rng, n, k).into_vec())
}

/// Retained set used by trial `trial` of `plan`.
pub fn trial_retained_set(n: usize, plan: &TrialPlan, trial: usize) -> Result<RetainedSet> {
    let mut rng = stream_rng(derive_seed(plan.seed, TRIAL_TAG), trial as u64);
    sample_retained_set(n, plan.k, &mut rng)
}

/// Summary of noise amplification over random erasure patterns.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseAmpEstimate {
    /// Mean over well-conditioned trials; `+inf` if there were none.
    pub mean: f64,
    /// Sample standard deviation over well-conditioned trials.
    pub stddev: f64,
    /// Largest amplification among well-conditioned trials.
    pub max: f64,
    pub fraction_ill_conditioned: f64,
    pub trials: usize,
    pub well_conditioned: usize,
}

impl NoiseAmpEstimate {
    /// Standard error of `mean`.
    pub fn std_error(&self) -> f64 {
        if self.well_conditioned == 0 {
            return f64::INFINITY;
        }
        self.stddev / (self.well_conditioned as f64).sqrt()
    }

    fn from_samples(amps: &[f64]) -> Self {
        let finite: Vec<f64> = amps.iter().copied().filter(|a| a.is_finite()).collect();
        let count = finite.len();
        let (mean, stddev, max) = if count == 0 {
            (f64::INFINITY, 0.0, f64::INFINITY)
        } else {
            let mean = finite.iter().sum::<f64>() / count as f64;
            let var = if count > 1 {
                finite.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (count - 1) as f64
            } else {
                0.0
            };
            (mean, var.sqrt(), finite.iter().copied().fold(f64::MIN, f64::max))
        };
        Self {
            mean,
            stddev,
            max,
            fraction_ill_conditioned: (amps.len() - count) as f64 / amps.len() as f64,
            trials: amps.len(),
            well_conditioned: count,
        }
    }
}

fn trial_amps(frame: &Frame, plan: &TrialPlan, exec: Execution) -> Result<Vec<f64>> {
    plan.validate(frame.m(), frame.n())?;
    map_indexed(exec, plan.trials, |t| {
        let retained = trial_retained_set(frame.n(), plan, t)?;
        Ok(analyze_subframe(&subframe(frame, &retained)?)?.noise_amp)
    })
    .into_iter()
    .collect()
}

/// Noise amplification over `plan.trials` uniform erasure patterns.
pub fn estimate_noise_amp(frame: &Frame, plan: &TrialPlan) -> Result<NoiseAmpEstimate> {
    estimate_noise_amp_with(frame, plan, Execution::default())
}

pub fn estimate_noise_amp_with(
    frame: &Frame,
    plan: &TrialPlan,
    exec: Execution,
) -> Result<NoiseAmpEstimate> {
    Ok(NoiseAmpEstimate::from_samples(&trial_amps(frame, plan, exec)?))
}

/// Eigenvalues of `F_k F_k^*` from every trial of `plan`, concatenated in
/// trial order.
pub fn pooled_spectrum(frame: &Frame, plan: &TrialPlan) -> Result<Vec<f64>> {
    plan.validate(frame.m(), frame.n())?;
    let per_trial: Result<Vec<Vec<f64>>> = map_indexed(Execution::default(), plan.trials, |t| {
        let retained = trial_retained_set(frame.n(), plan, t)?;
        Ok(analyze_subframe(&subframe(frame, &retained)?)?.eigenvalues)
    })
    .into_iter()
    .collect();
    Ok(per_trial?.concat())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchFamily {
    Uspc,
    Nuspc,
    Ncp,
}

impl std::fmt::Display for SearchFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SearchFamily::Uspc => "uspc",
            SearchFamily::Nuspc => "nuspc",
            SearchFamily::Ncp => "ncp",
        })
    }
}

/// Ranges from which NUSPC candidates are drawn. `r` is drawn among the
/// divisors of `n` inside `r_range`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct NuspcRanges {
    pub b_range: (usize, usize),
    pub r_range: (usize, usize),
}

impl Default for NuspcRanges {
    fn default() -> Self {
        Self {
            b_range: (1, 4),
            r_range: (1, usize::MAX),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchPlan {
    pub family: SearchFamily,
    pub candidates: usize,
    pub trial_plan: TrialPlan,
    pub nuspc: NuspcRanges,
    pub prescreen_trials: usize,
    /// Specs evaluated before any random candidate (counted towards
    /// `candidates`).
    pub injected: Vec<PolynomialCodeSpec>,
}

impl SearchPlan {
    pub fn new(family: SearchFamily, candidates: usize, trial_plan: TrialPlan) -> Self {
        Self {
            family,
            candidates,
            trial_plan,
            nuspc: NuspcRanges::default(),
            prescreen_trials: DEFAULT_PRESCREEN_TRIALS,
            injected: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateRecord {
    pub index: usize,
    /// Powers of the code (NCP, USPC) or `[b, r, y...]` (NUSPC).
    pub description: String,
    pub estimate: NoiseAmpEstimate,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub best_frame: Frame,
    pub best_mean_amp: f64,
    pub best_index: usize,
    /// Valid candidates in evaluation order.
    pub log: Vec<CandidateRecord>,
    /// Sampled specs rejected by the prescreen.
    pub rejected: usize,
}

fn divisors_in(n: usize, (lo, hi): (usize, usize)) -> Vec<usize> {
    (1..=n).filter(|r| n % r == 0 && *r >= lo && *r <= hi).collect()
}

fn check_family(plan: &SearchPlan, n: usize, m: usize) -> Result<()> {
    if m == 0 || m > n {
        return invalid(format!("need 1 <= m <= n, got m={m}, n={n}"));
    }
    if plan.candidates == 0 {
        return invalid("candidates must be at least 1");
    }
    match plan.family {
        SearchFamily::Ncp if m < 2 || m + 2 > n => invalid(format!(
            "no non-consecutive power set of size {m} exists modulo {n}"
        )),
        SearchFamily::Nuspc => {
            let (blo, bhi) = plan.nuspc.b_range;
            if blo == 0 || blo > bhi {
                return invalid(format!("bad NUSPC b range {blo}..={bhi}"));
            }
            if divisors_in(n, plan.nuspc.r_range).is_empty() {
                return invalid(format!("no divisor of n={n} inside the NUSPC r range"));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn sample_candidate<R: Rng>(
    plan: &SearchPlan,
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<(PolynomialCodeSpec, String)> {
    match plan.family {
        SearchFamily::Uspc => Ok((uspc_spec(n, m)?, format!("{:?}", (0..m).collect::<Vec<_>>()))),
        SearchFamily::Ncp => loop {
            let mut powers = index::sample(rng, n, m).into_vec();
            powers.sort_unstable();
            if is_cyclically_consecutive(&powers, n) {
                continue;
            }
            let desc = format!("{powers:?}");
            return Ok((ncp_spec(n, m, &powers)?, desc));
        },
        SearchFamily::Nuspc => {
            let (blo, bhi) = plan.nuspc.b_range;
            let b = rng.random_range(blo..=bhi);
            let rs = divisors_in(n, plan.nuspc.r_range);
            let r = rs[rng.random_range(0..rs.len())];
            let mut y = index::sample(rng, r * b, r).into_vec();
            y.sort_unstable();
            let desc = format!("b={b} r={r} y={y:?}");
            Ok((nuspc_spec(&NuspcParams { n, m, b, r, y })?, desc))
        }
    }
}

fn describe(spec: &PolynomialCodeSpec) -> String {
    format!("{:?}", spec.powers())
}

/// Best-of-`candidates` search within a code family.
///
/// A candidate is valid when its spec is well formed and none of
/// `prescreen_trials` random erasure patterns leaves an ill-conditioned
/// sub-frame. Valid candidates are ranked by mean noise amplification, then
/// by the largest amplification, then by evaluation order. USPC codes are all
/// equivalent under cyclic power shifts, so that family evaluates one code.
pub fn code_search(plan: &SearchPlan, n: usize, m: usize) -> Result<SearchOutcome> {
    code_search_with(plan, n, m, Execution::default())
}

pub fn code_search_with(
    plan: &SearchPlan,
    n: usize,
    m: usize,
    exec: Execution,
) -> Result<SearchOutcome> {
    check_family(plan, n, m)?;
    plan.trial_plan.validate(m, n)?;
    let prescreen = TrialPlan::new(
        plan.prescreen_trials,
        derive_seed(plan.trial_plan.seed, PRESCREEN_TAG),
        plan.trial_plan.k,
    );
    let wanted = if plan.family == SearchFamily::Uspc { 1 } else { plan.candidates };
    let max_attempts = 20 * wanted + plan.injected.len();
    let mut rng = stream_rng(derive_seed(plan.trial_plan.seed, CANDIDATE_TAG), 0);
    let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();

    let mut log: Vec<CandidateRecord> = Vec::new();
    let mut best: Option<(Frame, usize)> = None;
    let mut rejected = 0;
    let mut attempts = 0;

    while log.len() < wanted && attempts < max_attempts {
        let (spec, description) = match plan.injected.get(attempts) {
            Some(spec) => {
                if spec.n() != n || spec.m() != m {
                    return invalid(format!(
                        "injected candidate has n={}, m={} but the search is for n={n}, m={m}",
                        spec.n(),
                        spec.m()
                    ));
                }
                (spec.clone(), describe(spec))
            }
            None => sample_candidate(plan, n, m, &mut rng)?,
        };
        attempts += 1;
        let fingerprint: Vec<u64> = spec
            .samples()
            .iter()
            .flat_map(|s| [s.re.to_bits(), s.im.to_bits()])
            .chain(spec.powers().iter().map(|&p| p as u64))
            .collect();
        if !seen.insert(fingerprint) {
            continue;
        }
        let frame = build_frame(&spec)?;
        if plan.prescreen_trials > 0 {
            let screen = estimate_noise_amp_with(&frame, &prescreen, exec)?;
            if screen.fraction_ill_conditioned > 0.0 {
                rejected += 1;
                continue;
            }
        }
        let estimate = estimate_noise_amp_with(&frame, &plan.trial_plan, exec)?;
        let index = log.len();
        let better = match &best {
            None => true,
            Some((_, bi)) => {
                let b = &log[*bi].estimate;
                (estimate.mean, estimate.max) < (b.mean, b.max)
            }
        };
        log.push(CandidateRecord {
            index,
            description,
            estimate,
        });
        if better {
            best = Some((frame, index));
        }
    }

    let (best_frame, best_index) = best.ok_or_else(|| Error::NoValidCandidate {
        family: plan.family.to_string(),
        attempts,
    })?;
    Ok(SearchOutcome {
        best_mean_amp: log[best_index].estimate.mean,
        best_frame,
        best_index,
        log,
        rejected,
    })
}

/// Settings shared by every point of a redundancy sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPlan {
    pub candidates: usize,
    pub trials: usize,
    pub seed: u64,
    pub nuspc: NuspcRanges,
    pub prescreen_trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub gamma_inv: f64,
    pub n: usize,
    pub k: usize,
    pub family: SearchFamily,
    pub mean_amp: f64,
    pub max_amp: f64,
    pub fraction_ill_conditioned: f64,
    pub mp_benchmark: f64,
    pub manova_benchmark: f64,
    /// Why the row carries no measurement, or extra context.
    pub note: Option<String>,
}

/// Searched NCP and NUSPC codes plus the USPC baseline for every
/// `gamma^{-1}` in `inverse_gammas`, with `n = round(m gamma^{-1})` and
/// `k = round(k_over_n n)`. Points with `k < m` are reported with a note and
/// no measurement.
pub fn gamma_sweep(
    m: usize,
    inverse_gammas: &[f64],
    k_over_n: f64,
    plan: &SweepPlan,
) -> Result<Vec<SweepRow>> {
    if m == 0 {
        return invalid("m must be at least 1");
    }
    if !(k_over_n > 0.0 && k_over_n <= 1.0) {
        return invalid(format!("k/n must lie in (0, 1], got {k_over_n}"));
    }
    if let Some(g) = inverse_gammas.iter().find(|&&g| !(g >= 1.0) || !g.is_finite()) {
        return invalid(format!("inverse gamma must be >= 1, got {g}"));
    }
    let families = [SearchFamily::Uspc, SearchFamily::Nuspc, SearchFamily::Ncp];
    let mut rows = Vec::new();
    for &gamma_inv in inverse_gammas {
        let n = (m as f64 * gamma_inv).round() as usize;
        let k = (k_over_n * n as f64).round() as usize;
        let blank = |family, note: String| SweepRow {
            gamma_inv,
            n,
            k,
            family,
            mean_amp: f64::NAN,
            max_amp: f64::NAN,
            fraction_ill_conditioned: f64::NAN,
            mp_benchmark: f64::NAN,
            manova_benchmark: f64::NAN,
            note: Some(note),
        };
        if k < m {
            for family in families {
                rows.push(blank(family, format!("k={k} < m={m}: decoding impossible")));
            }
            continue;
        }
        let params = DensityParams::from_dims(m, n, k)?;
        let mp = theoretical_noise_amp(DensityKind::MarchenkoPastur, params)?;
        let manova = theoretical_noise_amp(DensityKind::Manova, params)?;
        let trial_plan = TrialPlan::new(plan.trials, plan.seed, k);

        for family in families {
            let mut search = SearchPlan::new(family, plan.candidates, trial_plan);
            search.nuspc = plan.nuspc;
            search.prescreen_trials = plan.prescreen_trials;
            let square = n == m;
            let outcome = if square {
                // Every family degenerates to the full DFT when n = m.
                let frame = build_frame(&uspc_spec(n, m)?)?;
                estimate_noise_amp(&frame, &trial_plan).map(|e| (e, Some("n = m: unitary DFT".into())))
            } else {
                code_search(&search, n, m).map(|o| {
                    let e = o.log[o.best_index].estimate.clone();
                    let note = (o.rejected > 0).then(|| format!("{} candidates rejected", o.rejected));
                    (e, note)
                })
            };
            rows.push(match outcome {
                Ok((est, note)) => SweepRow {
                    gamma_inv,
                    n,
                    k,
                    family,
                    mean_amp: est.mean,
                    max_amp: est.max,
                    fraction_ill_conditioned: est.fraction_ill_conditioned,
                    mp_benchmark: mp,
                    manova_benchmark: manova,
                    note,
                },
                Err(e) => SweepRow {
                    mp_benchmark: mp,
                    manova_benchmark: manova,
                    ..blank(family, e.to_string())
                },
            });
        }
    }
    Ok(rows)
}
