//! The Monte-Carlo tournament sampler and the globally-stable learner G.
//!
//! A level-`k` sample is built by repeatedly drawing two level-`(k-1)`
//! samples `S_0, S_1` and two fresh blocks `T_0, T_1` of `n` examples, until
//! `f_b = SOA(S_b ∘ T_b)` disagree. A fair coin then labels the smallest
//! disagreement point `x`, and the side whose `f_b` gets `x` wrong is kept,
//! followed by the tournament example `(x, y)`. One draw counter is shared by
//! every recursive call; once the next block would push it past the cap `N`
//! the whole process returns `Fail`.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::concept::{
    ConceptClass, Hypothesis, Label, LabeledExample, RealizableDistribution, Sample,
};
use crate::error::{invalid, Error, Result};
use crate::littlestone::LdimValue;
use crate::soa::{Soa, SoaRunResult, SoaState};

/// Largest `d` for which the double-exponential constants are materialized.
pub const MAX_TABLE_DIMENSION: u32 = 16;

/// Constants of the globally-stable learner for Littlestone dimension `d` and
/// accuracy `alpha`:
///
/// * `n = ⌈2^(d+2)/α⌉` (auxiliary sample size),
/// * `N = 2^(2^(d+2)+1) · 4^(d+1) · n` (draw cap),
/// * `m = N + n` (total sample size of G),
/// * frequency threshold `2^(-2^(d+2))`,
/// * stability guarantee `η = 2^(-(2^(d+2)+1)) / (d+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityParams {
    pub d: u32,
    pub alpha: f64,
    pub n: u64,
    pub cap: BigUint,
    pub m: BigUint,
    /// `log2` of the frequency threshold, i.e. `-2^(d+2)`.
    pub freq_threshold_log2: i64,
    /// `1/η`.
    pub eta_inverse: BigUint,
}

impl StabilityParams {
    pub fn new(d: LdimValue, alpha: f64) -> Result<Self> {
        if d < 0 {
            return Err(invalid("d", "Littlestone dimension must be non-negative"));
        }
        let d = d as u32;
        if d > MAX_TABLE_DIMENSION {
            return Err(invalid(
                "d",
                format!("at most {MAX_TABLE_DIMENSION} supported"),
            ));
        }
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(invalid("alpha", format!("{alpha} not in (0, 1/2]")));
        }
        let n = ((1u64 << (d + 2)) as f64 / alpha).ceil();
        if n >= u64::MAX as f64 {
            return Err(invalid("alpha", "auxiliary sample size overflows"));
        }
        let n = n as u64;
        let exp = 1u64 << (d + 2);
        let cap = (BigUint::one() << (exp + 1)) * (BigUint::one() << (2 * (d as u64 + 1))) * n;
        Ok(Self::assemble(d, alpha, n, cap))
    }

    /// Parameters with a hand-picked auxiliary size and cap, for experiments
    /// at desk scale where the theoretical cap is out of reach.
    pub fn custom(d: LdimValue, n: u64, cap: u64) -> Result<Self> {
        if d < 0 || d as u32 > MAX_TABLE_DIMENSION {
            return Err(invalid("d", format!("{d} out of range")));
        }
        if n == 0 {
            return Err(invalid("n", "auxiliary sample size must be positive"));
        }
        let d = d as u32;
        let alpha = (1u64 << (d + 2)) as f64 / n as f64;
        Ok(Self::assemble(d, alpha, n, BigUint::from(cap)))
    }

    fn assemble(d: u32, alpha: f64, n: u64, cap: BigUint) -> Self {
        let exp = 1u64 << (d + 2);
        let m = &cap + n;
        let eta_inverse = (BigUint::one() << (exp + 1)) * (d as u64 + 1);
        StabilityParams {
            d,
            alpha,
            n,
            cap,
            m,
            freq_threshold_log2: -(exp as i64),
            eta_inverse,
        }
    }

    /// The cap as a machine integer; saturates (only reachable for d ≥ 4).
    pub fn cap_u64(&self) -> u64 {
        self.cap.to_u64().unwrap_or(u64::MAX)
    }

    pub fn m_u64(&self) -> u64 {
        self.m.to_u64().unwrap_or(u64::MAX)
    }

    pub fn freq_threshold(&self) -> f64 {
        2f64.powi(self.freq_threshold_log2 as i32)
    }

    pub fn eta_guarantee(&self) -> f64 {
        1.0 / self.eta_inverse.to_f64().unwrap_or(f64::INFINITY)
    }

    /// `log2(η)`, finite even when `η` underflows.
    pub fn eta_guarantee_log2(&self) -> f64 {
        -((1u64 << (self.d + 2)) as f64 + 1.0) - ((self.d + 1) as f64).log2()
    }

    /// Loss bound for frequent outputs, `2^(d+2)/n`.
    pub fn generalization_bound(&self) -> f64 {
        (1u64 << (self.d + 2)) as f64 / self.n as f64
    }

    pub fn table(&self) -> StabilityTable {
        StabilityTable {
            d: self.d,
            alpha: self.alpha,
            n: self.n,
            cap: self.cap.to_string(),
            m: self.m.to_string(),
            freq_threshold: format!("2^{}", self.freq_threshold_log2),
            freq_threshold_value: self.freq_threshold(),
            eta_guarantee: format!("1/{}", self.eta_inverse),
            eta_guarantee_value: self.eta_guarantee(),
        }
    }
}

/// Printable form of [`StabilityParams`] with big values as decimal strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityTable {
    pub d: u32,
    pub alpha: f64,
    pub n: u64,
    pub cap: String,
    pub m: String,
    pub freq_threshold: String,
    pub freq_threshold_value: f64,
    pub eta_guarantee: String,
    pub eta_guarantee_value: f64,
}

/// Where examples "drawn from D" come from.
pub trait ExampleSource {
    fn next_example(&mut self) -> Result<LabeledExample>;

    /// Consumes `count` examples whose values are never looked at.
    fn skip(&mut self, count: u64) -> Result<()>;
}

/// Fresh i.i.d. draws from a distribution.
pub struct DistributionSource<'a, R> {
    dist: &'a RealizableDistribution,
    rng: R,
}

impl<'a, R: RngCore> DistributionSource<'a, R> {
    pub fn new(dist: &'a RealizableDistribution, rng: R) -> Self {
        DistributionSource { dist, rng }
    }
}

impl<R: RngCore> ExampleSource for DistributionSource<'_, R> {
    #[inline]
    fn next_example(&mut self) -> Result<LabeledExample> {
        Ok(self.dist.draw_example(&mut self.rng))
    }

    /// Skipped draws are independent of everything else, so they are not
    /// materialized.
    fn skip(&mut self, _count: u64) -> Result<()> {
        Ok(())
    }
}

/// Sequential reads from a fixed input sample (G as a map on `m` examples).
pub struct BatchSource<'a> {
    examples: &'a [LabeledExample],
    pos: usize,
}

impl<'a> BatchSource<'a> {
    pub fn new(examples: &'a [LabeledExample]) -> Self {
        BatchSource { examples, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }
}

impl ExampleSource for BatchSource<'_> {
    fn next_example(&mut self) -> Result<LabeledExample> {
        let ex = *self
            .examples
            .get(self.pos)
            .ok_or_else(|| invalid("batch", format!("exhausted after {} examples", self.pos)))?;
        self.pos += 1;
        Ok(ex)
    }

    fn skip(&mut self, count: u64) -> Result<()> {
        let count = usize::try_from(count).map_err(|_| invalid("batch", "skip overflows"))?;
        self.pos = self.pos.saturating_add(count).min(self.examples.len());
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleResult {
    /// `None` is `Fail`.
    pub outcome: Option<Sample>,
    pub draws_used: u64,
    /// `rejection_rounds[j]` counts step-(iii) restarts at level `j+1`,
    /// summed over every recursive call.
    pub rejection_rounds: Vec<u64>,
}

impl SampleResult {
    pub fn is_fail(&self) -> bool {
        self.outcome.is_none()
    }
}

struct Tournament<'a, S, R> {
    soa: &'a mut Soa,
    source: &'a mut S,
    coins: &'a mut R,
    n: usize,
    cap: u64,
    draws: u64,
    rounds: Vec<u64>,
    fresh: SoaState,
}

impl<'a, S: ExampleSource, R: RngCore> Tournament<'a, S, R> {
    fn new(
        soa: &'a mut Soa,
        params: &StabilityParams,
        k: usize,
        source: &'a mut S,
        coins: &'a mut R,
    ) -> Result<Self> {
        let n = usize::try_from(params.n).map_err(|_| invalid("n", "too large"))?;
        let fresh = soa.init();
        Ok(Tournament {
            soa,
            source,
            coins,
            n,
            cap: params.cap_u64(),
            draws: 0,
            rounds: vec![0; k],
            fresh,
        })
    }

    /// Fills `buf` with `n` fresh examples, or reports that the cap is hit.
    fn draw_block(&mut self, buf: &mut Vec<LabeledExample>) -> Result<bool> {
        buf.clear();
        if self.draws + self.n as u64 > self.cap {
            self.source.skip(self.cap - self.draws)?;
            self.draws = self.cap;
            return Ok(false);
        }
        for _ in 0..self.n {
            buf.push(self.source.next_example()?);
        }
        self.draws += self.n as u64;
        Ok(true)
    }

    /// A level-`k` sample with the SOA state after processing it, or `None`
    /// on Fail.
    fn level(&mut self, k: usize) -> Result<Option<(Sample, SoaState)>> {
        if k == 0 {
            return Ok(Some((Sample::new(), self.fresh.clone())));
        }
        let mut t0 = Vec::with_capacity(self.n);
        let mut t1 = Vec::with_capacity(self.n);
        loop {
            let Some((s0, mut st0)) = self.level(k - 1)? else {
                return Ok(None);
            };
            let Some((s1, mut st1)) = self.level(k - 1)? else {
                return Ok(None);
            };
            if !self.draw_block(&mut t0)? || !self.draw_block(&mut t1)? {
                return Ok(None);
            }
            self.soa.feed(&mut st0, &t0);
            self.soa.feed(&mut st1, &t1);
            let Some(x) = st0.predictor().first_disagreement(st1.predictor()) else {
                self.rounds[k - 1] += 1;
                continue;
            };
            let y = Label::from_bool(self.coins.next_u64() & 1 == 1);
            let (mut s, t, mut st) = if st0.predict(x) != y {
                (s0, &t0, st0)
            } else {
                (s1, &t1, st1)
            };
            s.extend_from_slice(t);
            let tournament = LabeledExample { point: x, label: y };
            let erred = self.soa.step(&mut st, tournament);
            debug_assert!(erred, "tournament example must be a mistake");
            s.push_tournament(tournament);
            return Ok(Some((s, st)));
        }
    }
}

/// Draws one level-`k` sample using `source` for examples and `coins` for the
/// tournament labels. Returns the sample together with the SOA state after it.
pub fn sample_level<S: ExampleSource, R: RngCore>(
    soa: &mut Soa,
    k: usize,
    params: &StabilityParams,
    source: &mut S,
    coins: &mut R,
) -> Result<(SampleResult, Option<SoaState>)> {
    if k > params.d as usize {
        return Err(invalid("k", format!("level {k} exceeds d = {}", params.d)));
    }
    let mut gen = Tournament::new(soa, params, k, source, coins)?;
    let out = gen.level(k)?;
    let (outcome, state) = match out {
        Some((s, st)) => (Some(s), Some(st)),
        None => (None, None),
    };
    Ok((
        SampleResult {
            outcome,
            draws_used: gen.draws,
            rejection_rounds: gen.rounds,
        },
        state,
    ))
}

/// One draw from the capped level-`k` process over `dist`.
pub fn sample_dk_mc<R: RngCore>(
    k: usize,
    params: &StabilityParams,
    class: &ConceptClass,
    dist: &RealizableDistribution,
    rng: &mut R,
) -> Result<SampleResult> {
    let mut soa = Soa::new(class)?;
    let data = ChaCha8Rng::seed_from_u64(rng.next_u64());
    let mut source = DistributionSource::new(dist, data);
    Ok(sample_level(&mut soa, k, params, &mut source, rng)?.0)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GOutput {
    pub hypothesis: Hypothesis,
    pub k_chosen: u32,
    /// Examples consumed from the input, including the final block `T`.
    pub draws_used: u64,
    /// The level-`k` process hit the cap; the output is `SOA(T)`.
    pub failed: bool,
    pub mistake_count: usize,
    pub rejection_rounds: Vec<u64>,
}

/// Checks the tournament structure of `S ∘ T` by replaying SOA from scratch:
/// every tournament example of `S` is a mistake, `S` carries exactly
/// `expected_tournaments` of them, and the final predictor is consistent with
/// `T`.
pub fn check_tournament_run(
    soa: &mut Soa,
    s: &Sample,
    t: &[LabeledExample],
    expected_tournaments: usize,
) -> Result<SoaRunResult> {
    let run = soa.run_chain(&[s.examples(), t])?;
    let tournaments = s.tournament_positions();
    if tournaments.len() != expected_tournaments {
        return Err(Error::Invariant(format!(
            "level-{expected_tournaments} sample carries {} tournament examples",
            tournaments.len()
        )));
    }
    if let Some(p) = tournaments
        .iter()
        .find(|p| run.mistake_positions.binary_search(p).is_err())
    {
        return Err(Error::Invariant(format!(
            "tournament example at position {p} is not a mistake"
        )));
    }
    if run.mistake_count < expected_tournaments {
        return Err(Error::Invariant(format!(
            "{} mistakes on a level-{expected_tournaments} sample",
            run.mistake_count
        )));
    }
    if !run.final_hypothesis.is_consistent_with(t) {
        return Err(Error::Invariant("SOA(S∘T) is inconsistent with T".into()));
    }
    Ok(run)
}

/// G on an input stream: pick `k` uniformly in `{0, …, d}`, draw `S` from the
/// capped level-`k` process, then `T` (n more examples), and output
/// `SOA(S ∘ T)`. On Fail, `S` is empty.
pub fn algorithm_g_with<S: ExampleSource, R: RngCore>(
    soa: &mut Soa,
    params: &StabilityParams,
    source: &mut S,
    coins: &mut R,
) -> Result<GOutput> {
    let k = coins.gen_range(0..=params.d);
    let (res, state) = sample_level(soa, k as usize, params, source, coins)?;
    let failed = res.outcome.is_none();
    let (s, mut state) = match (res.outcome, state) {
        (Some(s), Some(st)) => (s, st),
        _ => (Sample::new(), soa.init()),
    };
    let t = (0..params.n)
        .map(|_| source.next_example())
        .collect::<Result<Vec<_>>>()?;
    soa.feed(&mut state, &t);
    let expected = if failed { 0 } else { k as usize };
    let run = check_tournament_run(soa, &s, &t, expected)?;
    if &run.final_hypothesis != state.predictor() {
        return Err(Error::Invariant(
            "SOA replay disagrees with incremental run".into(),
        ));
    }
    Ok(GOutput {
        hypothesis: run.final_hypothesis,
        k_chosen: k,
        draws_used: res.draws_used + params.n,
        failed,
        mistake_count: run.mistake_count,
        rejection_rounds: res.rejection_rounds,
    })
}

/// G with `d = Ldim(H)` and theoretical parameters at accuracy `alpha`.
pub fn algorithm_g<R: RngCore>(
    class: &ConceptClass,
    alpha: f64,
    dist: &RealizableDistribution,
    rng: &mut R,
) -> Result<GOutput> {
    let mut soa = Soa::new(class)?;
    let d = soa.ldim();
    let params = StabilityParams::new(d, alpha)?;
    let data = ChaCha8Rng::seed_from_u64(rng.next_u64());
    let mut source = DistributionSource::new(dist, data);
    algorithm_g_with(&mut soa, &params, &mut source, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concept::{population_loss, DomainPoint};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn thresholds2(marginal: Vec<f64>) -> (ConceptClass, RealizableDistribution) {
        let class = ConceptClass::thresholds(2).unwrap();
        let target = class.members()[1].clone();
        (
            class,
            RealizableDistribution::new(target, marginal).unwrap(),
        )
    }

    #[test]
    fn params_d1_half() {
        let p = StabilityParams::new(1, 0.5).unwrap();
        assert_eq!(p.n, 16);
        assert_eq!(p.cap, BigUint::from(131_072u32));
        assert_eq!(p.m, BigUint::from(131_088u32));
        assert_eq!(p.freq_threshold(), 1.0 / 256.0);
        assert_eq!(p.eta_guarantee(), 1.0 / 1024.0);
        assert_eq!(p.table().eta_guarantee, "1/1024");
        assert_eq!(p.table().freq_threshold, "2^-8");
    }

    #[test]
    fn params_d0_half() {
        let p = StabilityParams::new(0, 0.5).unwrap();
        assert_eq!(p.n, 8);
        assert_eq!(p.cap, BigUint::from(1024u32));
        assert_eq!(p.freq_threshold(), 1.0 / 16.0);
        assert_eq!(p.eta_guarantee(), 1.0 / 32.0);
    }

    #[test]
    fn params_reject_bad_alpha() {
        assert!(StabilityParams::new(1, 0.0).is_err());
        assert!(StabilityParams::new(1, 0.6).is_err());
        assert!(StabilityParams::new(1, f64::NAN).is_err());
        assert!(StabilityParams::new(-1, 0.5).is_err());
    }

    #[test]
    fn params_d2_is_exact() {
        let p = StabilityParams::new(2, 0.5).unwrap();
        // n = 32, N = 2^17 * 4^3 * 32 = 2^28
        assert_eq!(p.n, 32);
        assert_eq!(p.cap, BigUint::one() << 28);
        assert_eq!(p.table().eta_guarantee, "1/393216");
        let big = StabilityParams::new(5, 0.25).unwrap();
        assert!(big.cap.bits() > 128);
        assert_eq!(big.cap_u64(), u64::MAX);
    }

    #[test]
    fn level_zero_is_empty() {
        let (class, dist) = thresholds2(vec![0.5, 0.5]);
        let p = StabilityParams::new(1, 0.5).unwrap();
        let r = sample_dk_mc(0, &p, &class, &dist, &mut rng(1)).unwrap();
        assert_eq!(r.outcome, Some(Sample::new()));
        assert_eq!(r.draws_used, 0);
        assert!(r.rejection_rounds.is_empty());
    }

    #[test]
    fn level_one_structure() {
        let (class, dist) = thresholds2(vec![0.04, 0.96]);
        let p = StabilityParams::new(1, 0.5).unwrap();
        let mut r = rng(2);
        let mut seen = 0;
        for _ in 0..200 {
            let res = sample_dk_mc(1, &p, &class, &dist, &mut r).unwrap();
            let Some(s) = res.outcome else { continue };
            seen += 1;
            assert_eq!(s.len(), 17);
            assert_eq!(s.tournament_positions(), vec![16]);
            assert!(res.draws_used <= p.cap_u64());
            assert_eq!(res.draws_used % 32, 0);
        }
        assert!(seen > 150);
    }

    #[test]
    fn k_above_d_rejected() {
        let (class, dist) = thresholds2(vec![0.5, 0.5]);
        let p = StabilityParams::new(1, 0.5).unwrap();
        assert!(sample_dk_mc(2, &p, &class, &dist, &mut rng(0)).is_err());
    }

    #[test]
    fn tiny_cap_fails_with_full_count() {
        let (class, dist) = thresholds2(vec![0.5, 0.5]);
        // Two blocks of 16 cannot fit under a cap of 40.
        let p = StabilityParams::custom(1, 16, 40).unwrap();
        let res = sample_dk_mc(1, &p, &class, &dist, &mut rng(3)).unwrap();
        assert!(res.is_fail());
        assert_eq!(res.draws_used, 40);
    }

    #[test]
    fn g_on_singleton_is_constant() {
        let h = Hypothesis::from_signs(&[1, -1, 1]).unwrap();
        let class = ConceptClass::new(3, vec![h.clone()]).unwrap();
        let dist = RealizableDistribution::uniform(h.clone());
        let mut r = rng(4);
        for _ in 0..20 {
            let out = algorithm_g(&class, 0.5, &dist, &mut r).unwrap();
            assert_eq!(out.hypothesis, h);
            assert_eq!(out.k_chosen, 0);
            assert_eq!(out.draws_used, 8);
        }
    }

    #[test]
    fn g_is_deterministic() {
        let (class, dist) = thresholds2(vec![0.04, 0.96]);
        let a = algorithm_g(&class, 0.5, &dist, &mut rng(77)).unwrap();
        let b = algorithm_g(&class, 0.5, &dist, &mut rng(77)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn g_output_generalizes_on_thresholds2() {
        let (class, dist) = thresholds2(vec![0.5, 0.5]);
        let p = StabilityParams::new(1, 0.5).unwrap();
        let mut r = rng(5);
        for _ in 0..40 {
            let out = algorithm_g(&class, 0.5, &dist, &mut r).unwrap();
            assert!(out.draws_used <= p.m_u64());
            assert!(population_loss(&out.hypothesis, &dist) <= 0.5);
        }
    }

    #[test]
    fn batch_source_fail_skips_to_cap() {
        let (class, dist) = thresholds2(vec![0.5, 0.5]);
        let p = StabilityParams::custom(1, 4, 10).unwrap();
        let batch: Vec<_> = (0..14).map(|_| dist.draw_example(&mut rng(9))).collect();
        let mut soa = Soa::new(&class).unwrap();
        let mut src = BatchSource::new(&batch);
        let (res, _) = sample_level(&mut soa, 1, &p, &mut src, &mut rng(1)).unwrap();
        if res.is_fail() {
            assert_eq!(src.position(), 10);
        }
        // Identical examples at every position: T_0 = T_1 always, so it fails.
        assert!(res.is_fail());
        assert_eq!(res.rejection_rounds[0], 1);
    }

    #[test]
    fn disagreement_point_is_minimal() {
        let a = Hypothesis::from_signs(&[1, 1, -1, 1]).unwrap();
        let b = Hypothesis::from_signs(&[1, 1, 1, -1]).unwrap();
        assert_eq!(a.first_disagreement(&b), Some(DomainPoint(2)));
    }
}
