//! The private learner: run G on `k` disjoint batches, release the frequent
//! outputs with the stable histogram, prune, and pick one with the
//! exponential mechanism on fresh data.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concept::{
    ConceptClass, Hypothesis, Label, LabeledExample, RealizableDistribution, Sample,
};
use crate::dp::exponential::em_exact_distribution;
use crate::dp::histogram::{hist_failure_bound, stable_histogram_counts};
use crate::dp::PrivacyParams;
use crate::error::{invalid, Error, Result};
use crate::littlestone::LdimValue;
use crate::rng::{derive_seed, stream};
use crate::sampler::{
    algorithm_g_with, BatchSource, DistributionSource, GOutput, StabilityParams, StabilityTable,
};
use crate::soa::Soa;

/// Largest dimension for which `η` is representable as an `f64`.
pub const MAX_PIPELINE_DIMENSION: u32 = 7;

#[derive(Clone, Debug, PartialEq)]
pub struct MParams {
    pub d: u32,
    pub alpha: f64,
    pub beta: f64,
    pub privacy: PrivacyParams,
    /// Constants of G at accuracy `α/2`.
    pub stability: StabilityParams,
    pub eta: f64,
    pub m: BigUint,
    /// Number of batches, a power of two.
    pub k: BigUint,
    pub k_log2: u32,
    pub n_prime: u64,
    pub total_n: BigUint,
}

/// Printable form of [`MParams`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MParamsTable {
    pub d: u32,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub eta: String,
    pub eta_value: f64,
    pub m: String,
    pub k: String,
    pub n_prime: u64,
    pub total_n: String,
    pub g: StabilityTable,
}

fn ln_inverse_eta(stability: &StabilityParams) -> f64 {
    -stability.eta_guarantee_log2() * std::f64::consts::LN_2
}

fn n_prime_for(alpha: f64, beta: f64, epsilon: f64, ln_inv_eta: f64) -> u64 {
    // (2/η)·exp(−ε(α/2)n′/12) ≤ β/6  ⇔  n′ ≥ 24·ln(12/(ηβ))/(εα)
    let em = 24.0 * ((12.0 / beta).ln() + ln_inv_eta) / (epsilon * alpha);
    let list = 96.0 / alpha * ((24.0 / beta).ln() + ln_inv_eta);
    em.max(list).ceil() as u64
}

/// Parameters of the private learner for a class of Littlestone dimension `d`.
///
/// `k` is the smallest power of two such that the histogram at `(ε/2, δ)`
/// is `η/8`-accurate with probability `1 − β/3` and `k ≥ 16·ln(3/β)/η`;
/// `n′` is the smallest integer with `(2/η)·e^(−ε(α/2)n′/12) ≤ β/6` and
/// `n′ ≥ (96/α)·ln(24/(ηβ))`.
pub fn m_params(d: LdimValue, alpha: f64, beta: f64, epsilon: f64, delta: f64) -> Result<MParams> {
    if d < 0 || d as u32 > MAX_PIPELINE_DIMENSION {
        return Err(invalid(
            "d",
            format!("{d} not in 0..={MAX_PIPELINE_DIMENSION}"),
        ));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid("alpha", format!("{alpha} not in (0, 1]")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid("beta", format!("{beta} not in (0, 1)")));
    }
    let privacy = PrivacyParams::new(epsilon, delta)?;
    if delta <= 0.0 {
        return Err(invalid("delta", "the private learner needs delta > 0"));
    }
    let stability = StabilityParams::new(d, alpha / 2.0)?;
    let eta = stability.eta_guarantee();
    let hist_privacy = PrivacyParams::new(epsilon / 2.0, delta)?;
    let min_k = 16.0 * (3.0 / beta).ln() / eta;
    let k_log2 = (0..1000u32)
        .find(|&j| {
            let k = 2f64.powi(j as i32);
            k >= min_k
                && hist_failure_bound(k, eta / 8.0, &hist_privacy).is_some_and(|p| p <= beta / 3.0)
        })
        .ok_or_else(|| invalid("beta", "no batch count satisfies the histogram condition"))?;
    let k = BigUint::from(1u8) << k_log2;
    let n_prime = n_prime_for(alpha, beta, epsilon, ln_inverse_eta(&stability));
    let m = stability.m.clone();
    let total_n = &k * &m + n_prime;
    Ok(MParams {
        d: d as u32,
        alpha,
        beta,
        privacy,
        eta,
        m,
        k,
        k_log2,
        n_prime,
        total_n,
        stability,
    })
}

impl MParams {
    pub fn table(&self) -> MParamsTable {
        let g = self.stability.table();
        MParamsTable {
            d: self.d,
            alpha: self.alpha,
            beta: self.beta,
            epsilon: self.privacy.epsilon,
            delta: self.privacy.delta,
            eta: g.eta_guarantee.clone(),
            eta_value: self.eta,
            m: self.m.to_string(),
            k: self.k.to_string(),
            n_prime: self.n_prime,
            total_n: self.total_n.to_string(),
            g,
        }
    }

    /// Number of batches as a machine integer, if it fits.
    pub fn k_usize(&self) -> Option<usize> {
        self.k.to_usize()
    }

    /// Largest list the pruning step may leave.
    pub fn pruned_bound(&self) -> usize {
        (2.0 / self.eta).floor() as usize + 1
    }

    /// The same parameters with the batch count replaced, for reduced runs.
    pub fn with_batches(&self, k_log2: u32) -> MParams {
        let k = BigUint::from(1u8) << k_log2;
        MParams {
            total_n: &k * &self.m + self.n_prime,
            k,
            k_log2,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetEntry {
    pub step: String,
    pub epsilon: f64,
    pub delta: f64,
}

/// Sub-budgets of the two private steps; they compose to the total.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub entries: Vec<BudgetEntry>,
    pub total_epsilon: f64,
    pub total_delta: f64,
}

impl BudgetLedger {
    fn new(entries: Vec<BudgetEntry>) -> Self {
        let total_epsilon = entries.iter().map(|e| e.epsilon).sum();
        let total_delta = entries.iter().map(|e| e.delta).sum();
        BudgetLedger {
            entries,
            total_epsilon,
            total_delta,
        }
    }

    pub fn matches(&self, privacy: &PrivacyParams) -> bool {
        self.total_epsilon == privacy.epsilon && self.total_delta == privacy.delta
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnResult {
    pub hypothesis: Hypothesis,
    pub released_list_size: usize,
    pub pruned_list_size: usize,
    /// How many batches produced each hypothesis.
    pub batch_outputs_digest: BTreeMap<Hypothesis, u64>,
    /// Batches where G hit its draw cap.
    pub failed_batches: u64,
    /// The pruned list was empty and the default hypothesis was returned.
    pub failed: bool,
    pub budget: BudgetLedger,
}

/// Runs G on batch `index` with fresh draws from `dist`. Examples and coins
/// come from separate streams keyed by `seed`.
pub fn run_batch(
    soa: &mut Soa,
    stability: &StabilityParams,
    dist: &RealizableDistribution,
    seed: u64,
    index: u64,
) -> Result<GOutput> {
    let mut source = DistributionSource::new(dist, stream(seed, 2 * index));
    let mut coins = stream(seed, 2 * index + 1);
    algorithm_g_with(soa, stability, &mut source, &mut coins)
}

/// Runs G on explicit batches, each reading its own slice; coins as in
/// [`run_batch`].
pub fn run_batches(
    class: &ConceptClass,
    stability: &StabilityParams,
    batches: &[Vec<LabeledExample>],
    seed: u64,
) -> Result<Vec<GOutput>> {
    let soa = Soa::new(class)?;
    batches
        .par_iter()
        .enumerate()
        .map_init(
            || soa.clone(),
            |soa, (i, batch)| {
                let mut source = BatchSource::new(batch);
                let mut coins = stream(seed, 2 * i as u64 + 1);
                algorithm_g_with(soa, stability, &mut source, &mut coins)
            },
        )
        .collect()
}

fn merge(
    mut a: (BTreeMap<Hypothesis, u64>, u64),
    b: (BTreeMap<Hypothesis, u64>, u64),
) -> (BTreeMap<Hypothesis, u64>, u64) {
    for (h, c) in b.0 {
        *a.0.entry(h).or_default() += c;
    }
    (a.0, a.1 + b.1)
}

pub fn private_learn<R: RngCore>(
    class: &ConceptClass,
    dist: &RealizableDistribution,
    params: &MParams,
    rng: &mut R,
) -> Result<LearnResult> {
    let mut soa = Soa::new(class)?;
    if soa.ldim() != params.d as LdimValue {
        return Err(invalid(
            "params",
            format!("built for d = {}, class has {}", params.d, soa.ldim()),
        ));
    }
    if dist.domain_size() != class.domain_size() {
        return Err(Error::DomainMismatch {
            expected: class.domain_size(),
            found: dist.domain_size(),
        });
    }
    let k = params
        .k_usize()
        .ok_or_else(|| Error::Intractable(format!("{} batches", params.k)))?;
    let master = rng.next_u64();
    let batch_seed = derive_seed(master, 0);
    let stability = &params.stability;
    let (digest, failed_batches) = (0..k as u64)
        .into_par_iter()
        .map_init(
            || soa.clone(),
            |soa, i| {
                run_batch(soa, stability, dist, batch_seed, i).map(|g| (g.hypothesis, g.failed))
            },
        )
        .try_fold(
            || (BTreeMap::new(), 0u64),
            |mut acc, out| {
                let (h, failed) = out?;
                *acc.0.entry(h).or_default() += 1;
                acc.1 += u64::from(failed);
                Ok::<_, Error>(acc)
            },
        )
        .try_reduce(|| (BTreeMap::new(), 0u64), |a, b| Ok(merge(a, b)))?;

    let hist_privacy = PrivacyParams::new(params.privacy.epsilon / 2.0, params.privacy.delta)?;
    let em_epsilon = params.privacy.epsilon / 2.0;
    let budget = BudgetLedger::new(vec![
        BudgetEntry {
            step: "histogram".into(),
            epsilon: hist_privacy.epsilon,
            delta: hist_privacy.delta,
        },
        BudgetEntry {
            step: "exponential".into(),
            epsilon: em_epsilon,
            delta: 0.0,
        },
    ]);
    if !budget.matches(&params.privacy) {
        return Err(Error::Invariant(
            "sub-budgets do not compose to the total".into(),
        ));
    }

    let mut hist_rng = stream(derive_seed(master, 1), 0);
    let hist = stable_histogram_counts(&digest, k as u64, &hist_privacy, &mut hist_rng)?;
    let cutoff = 0.75 * params.eta;
    let pruned: Vec<Hypothesis> = hist
        .released
        .iter()
        .filter(|h| hist.estimates[*h] >= cutoff)
        .cloned()
        .collect();
    if pruned.len() > params.pruned_bound() {
        return Err(Error::Invariant(format!(
            "pruned list has {} items, bound {}",
            pruned.len(),
            params.pruned_bound()
        )));
    }

    let (hypothesis, failed) = if pruned.is_empty() {
        (Hypothesis::constant(class.domain_size(), Label::Pos), true)
    } else {
        let mut em_rng = stream(derive_seed(master, 2), 0);
        let fresh: Sample = (0..params.n_prime)
            .map(|_| dist.draw_example(&mut em_rng))
            .collect();
        let em = em_exact_distribution(&pruned, &fresh, em_epsilon)?;
        (em.sample(&mut em_rng).clone(), false)
    };
    Ok(LearnResult {
        hypothesis,
        released_list_size: hist.released.len(),
        pruned_list_size: pruned.len(),
        batch_outputs_digest: digest,
        failed_batches,
        failed,
        budget,
    })
}
