//! The dictionary between the exit-time moment spectrum `{T_n}` and the
//! Dirichlet data `spec*(Ω) = {(ν, a_ν²)}`.
//!
//! The two sides are linked by `T_n = n! ζ(n)` with the Dirichlet series
//! `ζ(s) = Σ a_ν² ν^{-s}`. Everything here works with the scaled moments
//! `T_n / n!` so sequences can run well past the point where `T_n` itself
//! overflows.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Result};
use crate::numerics::{factorial, kahan_sum, KahanSum};

/// Multiple of machine epsilon treated as the noise floor of exact inputs.
const EXACT_NOISE_FLOOR: f64 = 16.0 * f64::EPSILON;
/// Residuals must exceed this multiple of the noise floor to be trusted.
const SIGNAL_TO_NOISE: f64 = 10.0;

/// `{Vol(Ω), T_1, …, T_N}`, stored as `T_n / n!`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSequence {
    volume: f64,
    scaled: Vec<f64>,
}

impl MomentSequence {
    /// Builds the sequence from raw moments `T_1..T_N`.
    pub fn from_moments(volume: f64, moments: &[f64]) -> Result<Self> {
        let scaled = moments
            .iter()
            .enumerate()
            .map(|(i, t)| t / factorial(i + 1))
            .collect();
        Self::from_scaled(volume, scaled)
    }

    /// Builds the sequence from `T_n / n!`, n = 1..N.
    pub fn from_scaled(volume: f64, scaled: Vec<f64>) -> Result<Self> {
        if !(volume > 0.0) || !volume.is_finite() {
            return invalid(format!("volume must be positive, got {volume}"));
        }
        if scaled.is_empty() {
            return invalid("moment sequence must contain at least T_1");
        }
        if let Some(i) = scaled.iter().position(|s| !(*s > 0.0) || !s.is_finite()) {
            return invalid(format!("T_{} must be positive and finite", i + 1));
        }
        Ok(Self { volume, scaled })
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Number of moments `N`.
    pub fn len(&self) -> usize {
        self.scaled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scaled.is_empty()
    }

    /// `T_n` for `1 ≤ n ≤ N`.
    pub fn moment(&self, n: usize) -> f64 {
        self.scaled[n - 1] * factorial(n)
    }

    /// `T_n / n!` for `1 ≤ n ≤ N`.
    pub fn scaled(&self, n: usize) -> f64 {
        self.scaled[n - 1]
    }

    pub fn scaled_moments(&self) -> &[f64] {
        &self.scaled
    }

    pub fn moments(&self) -> Vec<f64> {
        (1..=self.len()).map(|n| self.moment(n)).collect()
    }

    /// `T_n / Vol(Ω)`.
    pub fn ratio(&self, n: usize) -> f64 {
        self.moment(n) / self.volume
    }

    /// Copy with each `T_n` multiplied by `1 + noise[n-1]`.
    pub fn perturbed(&self, noise: &[f64]) -> Result<Self> {
        let scaled = self
            .scaled
            .iter()
            .zip(noise.iter().chain(std::iter::repeat(&0.0)))
            .map(|(s, e)| s * (1.0 + e))
            .collect();
        Self::from_scaled(self.volume, scaled)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MomentSequenceJson {
    volume: f64,
    moments: Vec<f64>,
}

impl Serialize for MomentSequence {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MomentSequenceJson { volume: self.volume, moments: self.moments() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MomentSequence {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = MomentSequenceJson::deserialize(deserializer)?;
        MomentSequence::from_moments(raw.volume, &raw.moments).map_err(serde::de::Error::custom)
    }
}

/// One element of `spec*(Ω)` with its weight `a_ν²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralPair {
    pub nu: f64,
    pub a_sq: f64,
}

/// `spec*(Ω)` truncated to finitely many pairs, with the domain volume.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralData {
    volume: f64,
    pairs: Vec<SpectralPair>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectralDataJson {
    volume: f64,
    pairs: Vec<SpectralPair>,
}

impl<'de> Deserialize<'de> for SpectralData {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = SpectralDataJson::deserialize(deserializer)?;
        SpectralData::new(raw.volume, raw.pairs).map_err(serde::de::Error::custom)
    }
}

impl SpectralData {
    /// Validates: positive volume, `ν` strictly increasing and positive,
    /// every `a² > 0`, and `Σ a² ≤ volume` up to rounding.
    pub fn new(volume: f64, pairs: Vec<SpectralPair>) -> Result<Self> {
        if !(volume > 0.0) || !volume.is_finite() {
            return invalid(format!("volume must be positive, got {volume}"));
        }
        for (i, p) in pairs.iter().enumerate() {
            if !(p.nu > 0.0) || !p.nu.is_finite() {
                return invalid(format!("eigenvalue #{} must be positive, got {}", i + 1, p.nu));
            }
            if !(p.a_sq > 0.0) || !p.a_sq.is_finite() {
                return invalid(format!("weight #{} must be positive, got {}", i + 1, p.a_sq));
            }
            if i > 0 && p.nu <= pairs[i - 1].nu {
                return invalid("eigenvalues must be strictly increasing");
            }
        }
        let total = kahan_sum(pairs.iter().map(|p| p.a_sq));
        if total > volume * (1.0 + 1e-9) {
            return invalid(format!("weights sum to {total}, exceeding the volume {volume}"));
        }
        Ok(Self { volume, pairs })
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn pairs(&self) -> &[SpectralPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The pairs with `ν < threshold`.
    pub fn below(&self, threshold: f64) -> SpectralData {
        Self {
            volume: self.volume,
            pairs: self.pairs.iter().copied().filter(|p| p.nu < threshold).collect(),
        }
    }

    /// Truncated Dirichlet series `Σ a² ν^{-s}`.
    pub fn zeta(&self, s: f64) -> f64 {
        kahan_sum(self.pairs.iter().map(|p| p.a_sq * p.nu.powf(-s)))
    }
}

/// `T_n = n! Σ a_k² ν_k^{-n}` for `n = 1..=count`.
pub fn moments_from_spectrum(spec: &SpectralData, count: usize) -> Result<MomentSequence> {
    if spec.is_empty() {
        return invalid("spectral data is empty");
    }
    if count == 0 {
        return invalid("at least one moment is required");
    }
    let scaled = (1..=count).map(|n| spec.zeta(n as f64)).collect();
    MomentSequence::from_scaled(spec.volume, scaled)
}

/// Upper bound on `T_n - n! ζ_trunc(n)` from the unrecovered part of the
/// volume: `(Vol - Σ a²) ν_last^{-n} n!`.
pub fn zeta_tail_bound(spec: &SpectralData, n: usize) -> f64 {
    match spec.pairs.last() {
        Some(last) => volume_partition_defect(spec).max(0.0) * last.nu.powi(-(n as i32)) * factorial(n),
        None => f64::INFINITY,
    }
}

/// Heat content `H(t) = Σ a_ν² e^{-νt}` of the truncated spectrum.
pub fn heat_content(spec: &SpectralData, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return invalid(format!("time must be positive, got {t}"));
    }
    Ok(kahan_sum(spec.pairs.iter().map(|p| p.a_sq * (-p.nu * t).exp())))
}

/// `Vol(Ω) - Σ a²`: the part of the volume not accounted for by the pairs.
pub fn volume_partition_defect(spec: &SpectralData) -> f64 {
    spec.volume - kahan_sum(spec.pairs.iter().map(|p| p.a_sq))
}

/// Error estimates attached to a recovered pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairUncertainty {
    pub nu: f64,
    pub a_sq: f64,
}

/// Why the peeling iteration stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecoveryStop {
    /// The requested number of pairs was extracted.
    MaxPairs,
    /// The residual series fell below ten times the noise floor while
    /// searching for pair number `pair` (1-based).
    NoiseFloor { pair: usize, usable_moments: usize },
    /// The extracted values broke an invariant (non-increasing ν, a² ≤ 0).
    Inconsistent { pair: usize, reason: String },
}

/// Outcome of [`recover_spectrum`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRecovery {
    pub spectrum: SpectralData,
    pub uncertainties: Vec<PairUncertainty>,
    pub stop: RecoveryStop,
    /// Estimated relative noise of the input moments.
    pub noise_level: f64,
}

/// Estimated relative noise of the scaled moments, read off the jitter of
/// the second differences of consecutive ratios in the tail of the sequence
/// (where the ratio has converged for exact data).
pub fn estimate_noise(scaled: &[f64]) -> f64 {
    let ratios: Vec<f64> = scaled.windows(2).map(|w| w[0] / w[1]).collect();
    let mut second: Vec<f64> = ratios
        .windows(3)
        .map(|w| (w[2] - 2.0 * w[1] + w[0]).abs() / w[1])
        .collect();
    if second.len() < 3 {
        return EXACT_NOISE_FLOOR;
    }
    let tail = (second.len() / 4).max(3);
    let start = second.len() - tail;
    let tail = &mut second[start..];
    tail.sort_by(|a, b| a.total_cmp(b));
    let median = tail[tail.len() / 2];
    // the second difference of ratios of independent relative noise δ has
    // a median magnitude of about 2.4 δ
    (median / 2.4).max(EXACT_NOISE_FLOOR)
}

/// Aitken Δ² extrapolation of three consecutive terms; falls back to the
/// last term when the second difference is below `noise`.
fn aitken(x0: f64, x1: f64, x2: f64, noise: f64) -> f64 {
    let d1 = x1 - x0;
    let d2 = x2 - x1;
    let dd = d2 - d1;
    if dd.abs() <= noise || !(dd.abs() > 0.0) {
        return x2;
    }
    let est = x2 - d2 * d2 / dd;
    if est.is_finite() {
        est
    } else {
        x2
    }
}

/// Picks the best extrapolated limit of `seq` (indices `0..len`), given the
/// absolute noise level `noise[i]` of each term.
///
/// Each candidate is an Aitken extrapolant of three consecutive terms; its
/// error estimate is the change from the previous extrapolant plus the
/// amplified noise. Returns `(limit, error)`.
fn best_limit(seq: &[f64], noise: &[f64]) -> (f64, f64) {
    let n = seq.len();
    if n == 1 {
        return (seq[0], noise[0].max(seq[0].abs()));
    }
    if n == 2 {
        return (seq[1], (seq[1] - seq[0]).abs() + noise[1]);
    }
    let extrap: Vec<f64> = (0..n - 2)
        .map(|i| aitken(seq[i], seq[i + 1], seq[i + 2], 4.0 * noise[i + 2]))
        .collect();
    let mut best = (extrap[0], (extrap[0] - seq[1]).abs() + 3.0 * noise[2]);
    for i in 1..extrap.len() {
        let err = (extrap[i] - extrap[i - 1]).abs() + 3.0 * noise[i + 2];
        if err < best.1 {
            best = (extrap[i], err);
        }
    }
    best
}

/// Recovers the leading elements of `spec*(Ω)` and their weights from the
/// moment spectrum by iterative peeling.
///
/// For each pair the residual `r_n = T_n/n! - Σ_found a² ν^{-n}` behaves like
/// `a_k² ν_k^{-n}` for large `n`; `ν_k` is the limit of the consecutive
/// ratios `r_n / r_{n+1}` (accelerated with one Aitken step) and `a_k²` the
/// limit of `ν_k^n r_n`. Only moments whose residual stands ten times above
/// the noise floor (input noise plus the propagated uncertainty of the pairs
/// already removed) are used; when fewer than four remain, the iteration
/// stops rather than fit noise.
pub fn recover_spectrum(moments: &MomentSequence, max_pairs: usize) -> Result<SpectrumRecovery> {
    recover_spectrum_with_noise(moments, max_pairs, None)
}

/// [`recover_spectrum`] with an optional caller-supplied relative noise level
/// for the inputs; the larger of it and the internal estimate is used.
pub fn recover_spectrum_with_noise(
    moments: &MomentSequence,
    max_pairs: usize,
    noise: Option<f64>,
) -> Result<SpectrumRecovery> {
    if moments.len() < 8 {
        return invalid(format!(
            "spectrum recovery needs at least 8 moments, got {}",
            moments.len()
        ));
    }
    let s = moments.scaled_moments();
    let count = s.len();
    let delta = estimate_noise(s).max(noise.unwrap_or(0.0));
    let base_floor: Vec<f64> = s.iter().map(|x| delta * x).collect();
    let mut residual = s.to_vec();
    let mut propagated = vec![0.0; count];
    let mut pairs: Vec<SpectralPair> = Vec::new();
    let mut errors = Vec::new();

    let stop = loop {
        if pairs.len() >= max_pairs {
            break RecoveryStop::MaxPairs;
        }
        let pair_no = pairs.len() + 1;
        let floor: Vec<f64> = (0..count).map(|i| base_floor[i] + propagated[i]).collect();
        let usable = (0..count)
            .take_while(|&i| residual[i] > SIGNAL_TO_NOISE * floor[i])
            .count();
        if usable < 4 {
            break RecoveryStop::NoiseFloor { pair: pair_no, usable_moments: usable };
        }

        let ratios: Vec<f64> = (0..usable - 1).map(|i| residual[i] / residual[i + 1]).collect();
        let ratio_noise: Vec<f64> = (0..usable - 1)
            .map(|i| ratios[i] * (floor[i] / residual[i] + floor[i + 1] / residual[i + 1]))
            .collect();
        let (nu, nu_err) = best_limit(&ratios, &ratio_noise);

        if let Some(prev) = pairs.last() {
            if nu <= prev.nu + nu_err {
                break RecoveryStop::Inconsistent {
                    pair: pair_no,
                    reason: format!("ν estimate {nu} does not exceed the previous {}", prev.nu),
                };
            }
        }
        if !(nu > 0.0) || !nu.is_finite() {
            break RecoveryStop::Inconsistent {
                pair: pair_no,
                reason: format!("non-positive ν estimate {nu}"),
            };
        }

        let amps: Vec<f64> = (0..usable)
            .map(|i| residual[i] * nu.powi(i as i32 + 1))
            .collect();
        let amp_noise: Vec<f64> = (0..usable)
            .map(|i| amps[i] * (floor[i] / residual[i] + (i + 1) as f64 * nu_err / nu))
            .collect();
        let (a_sq, a_err) = best_limit(&amps, &amp_noise);
        if !(a_sq > 0.0) || !a_sq.is_finite() {
            break RecoveryStop::Inconsistent {
                pair: pair_no,
                reason: format!("non-positive weight estimate {a_sq}"),
            };
        }

        let mut candidate = pairs.clone();
        candidate.push(SpectralPair { nu, a_sq });
        if SpectralData::new(moments.volume(), candidate).is_err() {
            break RecoveryStop::Inconsistent {
                pair: pair_no,
                reason: "recovered weights exceed the domain volume".into(),
            };
        }

        for (i, (r, p)) in residual.iter_mut().zip(propagated.iter_mut()).enumerate() {
            let n = i as i32 + 1;
            let term = a_sq * nu.powi(-n);
            *r -= term;
            *p += a_err * nu.powi(-n) + term * n as f64 * nu_err / nu;
        }
        pairs.push(SpectralPair { nu, a_sq });
        errors.push(PairUncertainty { nu: nu_err, a_sq: a_err });
    };

    Ok(SpectrumRecovery {
        spectrum: SpectralData::new(moments.volume(), pairs)?,
        uncertainties: errors,
        stop,
        noise_level: delta,
    })
}

/// Upper bound for `λ_n(Ω)` at moment order `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenBoundReport {
    /// Index of the eigenvalue being bounded.
    pub n: usize,
    /// Moment order: uses `T_{2k-1}` and `T_{2k}`.
    pub k: usize,
    /// `None` when the bound is vacuous at this order.
    pub bound: Option<f64>,
    pub vacuous: bool,
    /// The pairs with `ν < λ_n` that were subtracted.
    #[serde(default)]
    pub subtracted_terms: Vec<SpectralPair>,
}

fn bound_report(
    n: usize,
    k: usize,
    num: f64,
    num_scale: f64,
    den: f64,
    den_scale: f64,
    below: &SpectralData,
) -> EigenBoundReport {
    let vacuous = num <= EXACT_NOISE_FLOOR * num_scale
        || den <= EXACT_NOISE_FLOOR * den_scale
        || !(num / den).is_finite();
    EigenBoundReport {
        n,
        k,
        bound: if vacuous { None } else { Some(num / den) },
        vacuous,
        subtracted_terms: below.pairs.clone(),
    }
}

/// `λ_n ≤ [T_{2k-1}/(2k-1)! - Σ a²ν^{-(2k-1)}] / [T_{2k}/(2k)! - Σ a²ν^{-2k}]`
/// evaluated from the moments, subtracting the supplied pairs (those with
/// `ν < λ_n`). A non-positive bracket within the rounding floor makes the
/// bound vacuous.
pub fn eigenvalue_bound(
    moments: &MomentSequence,
    known_below: &SpectralData,
    n: usize,
    k: usize,
) -> Result<EigenBoundReport> {
    if k == 0 {
        return invalid("moment order k must be at least 1");
    }
    if n == 0 {
        return invalid("eigenvalue index n must be at least 1");
    }
    if 2 * k > moments.len() {
        return invalid(format!(
            "order k = {k} needs T_{} but only {} moments are available",
            2 * k,
            moments.len()
        ));
    }
    let odd = (2 * k - 1) as f64;
    let even = (2 * k) as f64;
    let mut num = KahanSum::new();
    num.add(moments.scaled(2 * k - 1));
    let mut den = KahanSum::new();
    den.add(moments.scaled(2 * k));
    for p in known_below.pairs() {
        num.add(-p.a_sq * p.nu.powf(-odd));
        den.add(-p.a_sq * p.nu.powf(-even));
    }
    Ok(bound_report(
        n,
        k,
        num.value(),
        moments.scaled(2 * k - 1),
        den.value(),
        moments.scaled(2 * k),
        known_below,
    ))
}

/// The same bound evaluated directly from spectral tail sums
/// `Σ_{ν ≥ λ_n} a² ν^{-(2k-1)} / Σ_{ν ≥ λ_n} a² ν^{-2k}`, which avoids the
/// cancellation of the moment route at large `k`.
pub fn eigenvalue_bound_spectral(
    spec: &SpectralData,
    lambda_n: f64,
    n: usize,
    k: usize,
) -> Result<EigenBoundReport> {
    if k == 0 || n == 0 {
        return invalid("n and k must be at least 1");
    }
    let odd = (2 * k - 1) as f64;
    let even = (2 * k) as f64;
    let tail: Vec<&SpectralPair> = spec.pairs().iter().filter(|p| p.nu >= lambda_n).collect();
    // factor out the leading term to stay in range for large k
    let Some(lead) = tail.first().map(|p| p.nu) else {
        return Ok(bound_report(n, k, 0.0, 1.0, 0.0, 1.0, &spec.below(lambda_n)));
    };
    let num = kahan_sum(tail.iter().map(|p| p.a_sq * (lead / p.nu).powf(odd)));
    let den = kahan_sum(tail.iter().map(|p| p.a_sq * (lead / p.nu).powf(even)));
    let mut report = bound_report(n, k, num, num, den, den, &spec.below(lambda_n));
    if let Some(b) = report.bound.as_mut() {
        *b *= lead;
    }
    Ok(report)
}
