//! Seeded experiment campaigns. Every experiment is a pure function of its
//! config: run `i` draws from stream `i` (or `2i`, `2i+1` when examples and
//! coins are separate) under the config seed.

use std::collections::BTreeMap;

use rand::{Rng, RngCore};
use rayon::prelude::*;

use super::config::{AuditMode, ExperimentConfig, ExperimentKind};
use super::reports::*;
use super::stats::{hoeffding_slack, mean_std, wilson99};
use crate::concept::{
    population_loss, ConceptClass, DomainPoint, Hypothesis, Label, LabeledExample,
    RealizableDistribution, Sample,
};
use crate::dp::{audit_em_dp, audit_hist_release_dp, PrivacyParams};
use crate::error::{invalid, Error, Result};
use crate::littlestone::LdimValue;
use crate::pipeline::{m_params, private_learn, run_batch};
use crate::rng::stream;
use crate::sampler::{
    check_tournament_run, sample_level, DistributionSource, ExampleSource, StabilityParams,
};
use crate::soa::Soa;

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_BETA: f64 = 0.2;
pub const DEFAULT_EPSILON: f64 = 1.0;
pub const DEFAULT_DELTA: f64 = 1e-6;
pub const DEFAULT_SEQUENCE_LEN: usize = 50;
pub const DEFAULT_AUDIT_SAMPLE_LEN: usize = 6;
pub const DEFAULT_MAX_COUNT: u64 = 200;
/// Attempts allowed per requested successful sample in `draws`.
pub const MAX_ATTEMPTS_PER_SAMPLE: u64 = 1000;

fn setup(cfg: &ExperimentConfig) -> Result<(ConceptClass, RealizableDistribution, Soa, LdimValue)> {
    let (class, dist) = cfg.class.build()?;
    let mut soa = Soa::new(&class)?;
    let d = soa.ldim();
    Ok((class, dist, soa, d))
}

/// Theoretical constants of G, or reduced ones when `n`/`cap` are set.
pub fn g_params(cfg: &ExperimentConfig, d: LdimValue) -> Result<StabilityParams> {
    let theory = StabilityParams::new(d, cfg.alpha_or(DEFAULT_ALPHA))?;
    if cfg.n.is_none() && cfg.cap.is_none() {
        return Ok(theory);
    }
    StabilityParams::custom(
        d,
        cfg.n.unwrap_or(theory.n),
        cfg.cap.unwrap_or(theory.cap_u64()),
    )
}

pub fn run_stability_experiment(cfg: &ExperimentConfig) -> Result<StabilityReport> {
    cfg.validate(ExperimentKind::Stability)?;
    let (_, dist, soa, d) = setup(cfg)?;
    let params = g_params(cfg, d)?;
    let outputs = (0..cfg.runs)
        .into_par_iter()
        .map_init(
            || soa.clone(),
            |soa, i| run_batch(soa, &params, &dist, cfg.seed, i),
        )
        .collect::<Result<Vec<_>>>()?;

    let mut counts: BTreeMap<&Hypothesis, u64> = BTreeMap::new();
    let mut rows = Vec::with_capacity(outputs.len());
    let mut fail_count = 0;
    for (i, g) in outputs.iter().enumerate() {
        if g.failed {
            fail_count += 1;
        } else {
            *counts.entry(&g.hypothesis).or_default() += 1;
        }
        rows.push(StabilityRow {
            run_id: i as u64,
            k_chosen: g.k_chosen,
            failed: g.failed,
            draws_used: g.draws_used,
            hypothesis_fingerprint: g.hypothesis.fingerprint(),
            population_loss: population_loss(&g.hypothesis, &dist),
        });
    }

    let runs = cfg.runs;
    let eta = params.eta_guarantee();
    let n = params.n as f64;
    let ln_inv_threshold = -(params.freq_threshold_log2 as f64) * std::f64::consts::LN_2;
    let mut hypotheses: Vec<HypothesisFrequency> = counts
        .iter()
        .map(|(h, &count)| {
            let frequency = count as f64 / runs as f64;
            let (lower, upper) = wilson99(count, runs);
            let frequent = frequency >= eta;
            let ln_inv_lower = (1.0 / lower).ln();
            HypothesisFrequency {
                fingerprint: h.fingerprint(),
                count,
                frequency,
                frequency_lower: lower,
                frequency_upper: upper,
                population_loss: population_loss(h, &dist),
                frequent,
                consistency_bound: (frequent && lower > 0.0).then(|| ln_inv_lower / n),
                accuracy_bound: frequent.then(|| {
                    params.generalization_bound() + (ln_inv_lower - ln_inv_threshold).max(0.0) / n
                }),
            }
        })
        .collect();
    hypotheses.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.fingerprint.cmp(&b.fingerprint))
    });

    let max_frequency = hypotheses.first().map_or(0.0, |h| h.frequency);
    let frequent: Vec<&HypothesisFrequency> = hypotheses.iter().filter(|h| h.frequent).collect();
    let tol = 1e-12;
    let mut checks = vec![
        Check::new(
            "global stability",
            max_frequency >= eta,
            format!("max frequency {max_frequency} vs guarantee {eta}"),
        ),
        Check::new(
            "frequent outputs are accurate",
            frequent
                .iter()
                .all(|h| h.population_loss <= params.alpha + tol),
            format!(
                "{} frequent outputs, alpha {}",
                frequent.len(),
                params.alpha
            ),
        ),
        Check::new(
            "accuracy bound with statistical slack",
            frequent.iter().all(|h| {
                h.accuracy_bound
                    .is_some_and(|b| h.population_loss <= b + tol)
            }),
            "loss ≤ 2^(d+2)/n + max(0, ln(1/p_lower) − ln(1/freq_threshold))/n",
        ),
    ];
    if let Some(top) = hypotheses.first() {
        let bound = top.consistency_bound.unwrap_or(f64::INFINITY);
        checks.push(Check::new(
            "consistency bound on the most frequent output",
            top.population_loss <= bound + tol,
            format!("loss {} vs ln(1/p_lower)/n = {bound}", top.population_loss),
        ));
    }

    Ok(StabilityReport {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        runs,
        params: params.table(),
        target: dist.target().fingerprint(),
        fail_count,
        fail_rate: fail_count as f64 / runs as f64,
        max_hypothesis: hypotheses.first().map(|h| h.fingerprint.clone()),
        hypotheses,
        max_frequency,
        eta_guarantee: eta,
        checks,
        rows,
    })
}

pub fn run_mistake_experiment(cfg: &ExperimentConfig) -> Result<MistakeReport> {
    cfg.validate(ExperimentKind::Mistakes)?;
    let (_, dist, soa, d) = setup(cfg)?;
    let len = cfg.sample_len.unwrap_or(DEFAULT_SEQUENCE_LEN);
    let results = (0..cfg.runs)
        .into_par_iter()
        .map_init(
            || soa.clone(),
            |soa, i| {
                let mut rng = stream(cfg.seed, i);
                let s: Sample = (0..len).map(|_| dist.draw_example(&mut rng)).collect();
                let r = soa.run(&s)?;
                if !r.final_hypothesis.is_consistent_with(s.examples()) {
                    return Err(Error::Invariant(format!(
                        "run {i}: final hypothesis inconsistent with its input"
                    )));
                }
                if r.mistake_count as LdimValue > d {
                    return Err(Error::Invariant(format!(
                        "run {i}: {} mistakes exceed Ldim {d}",
                        r.mistake_count
                    )));
                }
                Ok(MistakeRow {
                    run_id: i,
                    mistake_count: r.mistake_count,
                    final_fingerprint: r.final_hypothesis.fingerprint(),
                })
            },
        )
        .collect::<Result<Vec<_>>>()?;

    let max_observed = results.iter().map(|r| r.mistake_count).max().unwrap_or(0);
    let bins = max_observed.max(d.max(0) as usize) + 1;
    let mut counts = vec![0u64; bins];
    for r in &results {
        counts[r.mistake_count] += 1;
    }
    let histogram: Vec<MistakeBin> = counts
        .iter()
        .enumerate()
        .map(|(i, &count)| {
            let (lower, upper) = wilson99(count, cfg.runs);
            MistakeBin {
                mistakes: i,
                count,
                probability: count as f64 / cfg.runs as f64,
                lower,
                upper,
            }
        })
        .collect();
    let top = histogram.iter().map(|b| b.probability).fold(0.0, f64::max);
    let pigeon = 1.0 / (d + 1) as f64;
    let checks = vec![
        Check::new(
            "mistake bound",
            max_observed as LdimValue <= d,
            format!("max {max_observed} mistakes, Ldim {d}"),
        ),
        Check::new(
            "some mistake count is likely",
            top >= pigeon,
            format!("largest mass {top} vs 1/(d+1) = {pigeon}"),
        ),
    ];
    Ok(MistakeReport {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        runs: cfg.runs,
        sample_len: len,
        ldim: d,
        target: dist.target().fingerprint(),
        histogram,
        max_observed,
        checks,
        rows: results,
    })
}

struct Attempt {
    failed: bool,
    draws_used: u64,
    rejection_rounds: Vec<u64>,
}

fn draw_attempt(
    soa: &mut Soa,
    params: &StabilityParams,
    dist: &RealizableDistribution,
    level: usize,
    seed: u64,
    i: u64,
) -> Result<Attempt> {
    let mut source = DistributionSource::new(dist, stream(seed, 2 * i));
    let mut coins = stream(seed, 2 * i + 1);
    let (res, _) = sample_level(soa, level, params, &mut source, &mut coins)?;
    if let Some(s) = &res.outcome {
        let t = (0..params.n)
            .map(|_| source.next_example())
            .collect::<Result<Vec<_>>>()?;
        check_tournament_run(soa, s, &t, level)?;
    }
    Ok(Attempt {
        failed: res.outcome.is_none(),
        draws_used: res.draws_used,
        rejection_rounds: res.rejection_rounds,
    })
}

/// Draws capped level-`k` samples until `runs` of them succeed.
pub fn run_draws_experiment(cfg: &ExperimentConfig) -> Result<DrawsReport> {
    cfg.validate(ExperimentKind::Draws)?;
    let (_, dist, soa, d) = setup(cfg)?;
    let params = g_params(cfg, d)?;
    let level = cfg.level.unwrap_or(1);
    if level as LdimValue > d {
        return Err(invalid("level", format!("{level} exceeds Ldim {d}")));
    }
    let want = cfg.runs;
    let max_attempts = want.saturating_mul(MAX_ATTEMPTS_PER_SAMPLE);
    let mut attempts: Vec<Attempt> = Vec::new();
    let mut successes = 0;
    while successes < want && (attempts.len() as u64) < max_attempts {
        let start = attempts.len() as u64;
        let end = (start + want).min(max_attempts);
        let chunk = (start..end)
            .into_par_iter()
            .map_init(
                || soa.clone(),
                |soa, i| draw_attempt(soa, &params, &dist, level, cfg.seed, i),
            )
            .collect::<Result<Vec<_>>>()?;
        for a in chunk {
            if successes == want {
                break;
            }
            successes += u64::from(!a.failed);
            attempts.push(a);
        }
    }

    let ok: Vec<&Attempt> = attempts.iter().filter(|a| !a.failed).collect();
    let draws: Vec<f64> = ok.iter().map(|a| a.draws_used as f64).collect();
    let (mean, std) = mean_std(&draws);
    let slack = if ok.is_empty() {
        f64::NAN
    } else {
        3.0 * std / (ok.len() as f64).sqrt()
    };
    let mean_rejection_rounds = (0..level)
        .map(|j| {
            ok.iter().map(|a| a.rejection_rounds[j] as f64).sum::<f64>() / ok.len().max(1) as f64
        })
        .collect();
    let max_draws = attempts.iter().map(|a| a.draws_used).max().unwrap_or(0);
    let expected_bound = 4f64.powi(level as i32 + 1) * params.n as f64;
    let cap = params.cap_u64();
    let mut checks = vec![
        Check::new(
            "enough successful samples",
            successes == want,
            format!("{successes} of {want} after {} attempts", attempts.len()),
        ),
        Check::new(
            "mean draws within the expectation bound",
            mean <= expected_bound + slack,
            format!("mean {mean} vs 4^(k+1)·n = {expected_bound} + {slack}"),
        ),
        Check::new(
            "draws never exceed the cap",
            max_draws <= cap,
            format!("max {max_draws}, cap {cap}"),
        ),
    ];
    if level == 0 {
        checks.push(Check::new(
            "level 0 draws nothing",
            max_draws == 0,
            format!("max {max_draws}"),
        ));
    }
    let rows = attempts
        .iter()
        .enumerate()
        .map(|(i, a)| DrawsRow {
            attempt: i as u64,
            failed: a.failed,
            draws_used: a.draws_used,
            rejection_rounds: a.rejection_rounds.iter().sum(),
        })
        .collect();
    Ok(DrawsReport {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        level,
        params: params.table(),
        target: dist.target().fingerprint(),
        successes,
        fails: attempts.len() as u64 - successes,
        mean_draws: mean,
        std_draws: std,
        max_draws,
        mean_rejection_rounds,
        expected_bound,
        slack,
        checks,
        rows,
    })
}

/// Largest Littlestone dimension run end to end without `force`.
pub const MAX_UNFORCED_E2E_DIMENSION: LdimValue = 1;

pub fn run_e2e_experiment(cfg: &ExperimentConfig) -> Result<E2eReport> {
    cfg.validate(ExperimentKind::E2e)?;
    let (class, dist, _, d) = setup(cfg)?;
    if d > MAX_UNFORCED_E2E_DIMENSION && !cfg.force {
        return Err(Error::Intractable(format!(
            "Ldim {d} needs double-exponential sample sizes; pass force to run anyway"
        )));
    }
    let alpha = cfg.alpha_or(DEFAULT_ALPHA);
    let beta = cfg.beta.unwrap_or(DEFAULT_BETA);
    let mut params = m_params(
        d,
        alpha,
        beta,
        cfg.epsilon.unwrap_or(DEFAULT_EPSILON),
        cfg.delta.unwrap_or(DEFAULT_DELTA),
    )?;
    if let Some(j) = cfg.batches_log2 {
        params = params.with_batches(j);
    }
    let batches = params
        .k_usize()
        .ok_or_else(|| Error::Intractable(format!("{} batches", params.k)))?
        as u64;

    let mut rows = Vec::with_capacity(cfg.runs as usize);
    for trial in 0..cfg.runs {
        let r = private_learn(&class, &dist, &params, &mut stream(cfg.seed, trial))?;
        let loss = population_loss(&r.hypothesis, &dist);
        let entry = |step: &str| r.budget.entries.iter().find(|e| e.step == step).cloned();
        let (hist, em) = (
            entry("histogram").expect("histogram entry"),
            entry("exponential").expect("exponential entry"),
        );
        rows.push(E2eRow {
            trial,
            fingerprint: r.hypothesis.fingerprint(),
            population_loss: loss,
            success: loss <= alpha,
            failed: r.failed,
            failed_batches: r.failed_batches,
            distinct_batch_outputs: r.batch_outputs_digest.len(),
            released_list_size: r.released_list_size,
            pruned_list_size: r.pruned_list_size,
            hist_epsilon: hist.epsilon,
            hist_delta: hist.delta,
            em_epsilon: em.epsilon,
            em_delta: em.delta,
        });
    }

    let trials = cfg.runs;
    let successes = rows.iter().filter(|r| r.success).count() as u64;
    let success_rate = successes as f64 / trials as f64;
    let (lower, upper) = wilson99(successes, trials);
    let slack = cfg
        .slack
        .unwrap_or_else(|| hoeffding_slack(trials, 1.0, 0.99));
    let required_rate = 1.0 - beta - slack;
    let pruned_bound = params.pruned_bound();
    let max_pruned = rows.iter().map(|r| r.pruned_list_size).max().unwrap_or(0);
    let budget_ok = rows.iter().all(|r| {
        r.hist_epsilon + r.em_epsilon == params.privacy.epsilon
            && r.hist_delta + r.em_delta == params.privacy.delta
    });
    let checks = vec![
        Check::new(
            "accuracy",
            success_rate >= required_rate,
            format!("success rate {success_rate} vs 1 − β − slack = {required_rate}"),
        ),
        Check::new(
            "sub-budgets compose to the total",
            budget_ok,
            format!(
                "(ε, δ) = ({}, {})",
                params.privacy.epsilon, params.privacy.delta
            ),
        ),
        Check::new(
            "pruned list bound",
            max_pruned <= pruned_bound,
            format!("max {max_pruned} vs ⌊2/η⌋ + 1 = {pruned_bound}"),
        ),
    ];
    Ok(E2eReport {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        trials,
        params: params.table(),
        batches,
        target: dist.target().fingerprint(),
        successes,
        success_rate,
        success_lower: lower,
        success_upper: upper,
        required_rate,
        failed_runs: rows.iter().filter(|r| r.failed).count() as u64,
        max_pruned_list_size: max_pruned,
        pruned_bound,
        checks,
        rows,
    })
}

fn random_example<R: RngCore>(domain_size: usize, rng: &mut R) -> LabeledExample {
    LabeledExample {
        point: DomainPoint(rng.gen_range(0..domain_size)),
        label: Label::from_bool(rng.gen()),
    }
}

/// A random sample of length `len` and a neighbor differing in one position.
/// Labels are arbitrary, not necessarily realizable.
pub fn random_neighbors<R: RngCore>(
    domain_size: usize,
    len: usize,
    rng: &mut R,
) -> (Sample, Sample) {
    let s: Sample = (0..len).map(|_| random_example(domain_size, rng)).collect();
    let pos = rng.gen_range(0..len);
    let old = s.examples()[pos];
    let new = loop {
        let e = random_example(domain_size, rng);
        if e != old {
            break e;
        }
    };
    let mut t = s.clone();
    t.replace(pos, new);
    (s, t)
}

pub fn run_dp_audit(cfg: &ExperimentConfig) -> Result<DpAuditReport> {
    cfg.validate(ExperimentKind::DpAudit)?;
    let mode = cfg.audit_mode.unwrap_or(AuditMode::Em);
    match mode {
        AuditMode::Em => audit_em(cfg),
        AuditMode::Hist => audit_hist(cfg),
    }
}

fn audit_em(cfg: &ExperimentConfig) -> Result<DpAuditReport> {
    let class = cfg.class.class()?;
    let epsilon = cfg.epsilon.unwrap_or(DEFAULT_EPSILON);
    let len = cfg.sample_len.unwrap_or(DEFAULT_AUDIT_SAMPLE_LEN);
    if len == 0 {
        return Err(invalid("sample_len", "must be at least 1"));
    }
    let rows = (0..cfg.runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg.seed, i);
            let (s, t) = random_neighbors(class.domain_size(), len, &mut rng);
            let r = audit_em_dp(class.members(), &s, &t, epsilon)?;
            Ok(DpAuditRow {
                index: i,
                log_ratio: Some(r),
                p: None,
                p_minus: None,
                p_plus: None,
                passes: r <= epsilon + 1e-9,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = rows.iter().filter_map(|r| r.log_ratio).fold(0.0, f64::max);
    let checks = vec![Check::new(
        "exponential mechanism is ε-DP",
        rows.iter().all(|r| r.passes),
        format!(
            "worst |ln p/p′| = {worst} over {} neighbor pairs, ε = {epsilon}",
            rows.len()
        ),
    )];
    Ok(DpAuditReport {
        schema_version: SCHEMA_VERSION,
        mode: AuditMode::Em,
        seed: cfg.seed,
        epsilon,
        delta: 0.0,
        worst_log_ratio: worst,
        audited: rows.len() as u64,
        checks,
        rows,
    })
}

fn audit_hist(cfg: &ExperimentConfig) -> Result<DpAuditReport> {
    let privacy = PrivacyParams::new(
        cfg.epsilon.unwrap_or(DEFAULT_EPSILON),
        cfg.delta.unwrap_or(DEFAULT_DELTA),
    )?;
    let max_count = cfg.max_count.unwrap_or(DEFAULT_MAX_COUNT);
    let k = max_count + 1;
    let mut worst: f64 = 0.0;
    let rows = (0..=max_count)
        .map(|c| {
            let a = audit_hist_release_dp(c, k, &privacy)?;
            for q in [a.p_minus, a.p_plus].into_iter().flatten() {
                if a.p > 0.0 && q > 0.0 {
                    worst = worst.max((a.p / q).ln().abs());
                }
            }
            Ok(DpAuditRow {
                index: c,
                log_ratio: None,
                p: Some(a.p),
                p_minus: a.p_minus,
                p_plus: a.p_plus,
                passes: a.passes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let checks = vec![Check::new(
        "histogram release is (ε, δ)-indistinguishable per item",
        rows.iter().all(|r| r.passes),
        format!(
            "counts 0..={max_count}, ε = {}, δ = {}",
            privacy.epsilon, privacy.delta
        ),
    )];
    Ok(DpAuditReport {
        schema_version: SCHEMA_VERSION,
        mode: AuditMode::Hist,
        seed: cfg.seed,
        epsilon: privacy.epsilon,
        delta: privacy.delta,
        worst_log_ratio: worst,
        audited: rows.len() as u64,
        checks,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{ClassSpec, ReportFormat};

    fn singleton() -> ClassSpec {
        let h = Hypothesis::from_signs(&[1, -1, 1]).unwrap();
        ClassSpec::explicit(&ConceptClass::new(3, vec![h]).unwrap(), None, 0)
    }

    #[test]
    fn stability_on_singleton() {
        let cfg = ExperimentConfig::new(ExperimentKind::Stability, singleton(), 50, 1);
        let r = run_stability_experiment(&cfg).unwrap();
        assert_eq!(r.hypotheses.len(), 1);
        assert_eq!(r.max_frequency, 1.0);
        assert_eq!(r.fail_count, 0);
        assert!(r.all_passed());
        assert_eq!(r.rows.len(), 50);
    }

    #[test]
    fn mistakes_on_singleton() {
        let cfg = ExperimentConfig::new(ExperimentKind::Mistakes, singleton(), 30, 1);
        let r = run_mistake_experiment(&cfg).unwrap();
        assert_eq!(r.histogram[0].probability, 1.0);
        assert!(r.all_passed());
    }

    #[test]
    fn mistakes_on_thresholds8() {
        let cfg = ExperimentConfig::new(
            ExperimentKind::Mistakes,
            ClassSpec::thresholds(8, None, 3),
            2000,
            4,
        );
        let r = run_mistake_experiment(&cfg).unwrap();
        assert!(r.max_observed <= 3);
        let total: f64 = r.histogram.iter().map(|b| b.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(r.all_passed());
    }

    #[test]
    fn draws_level_zero_is_free() {
        let mut cfg = ExperimentConfig::new(
            ExperimentKind::Draws,
            ClassSpec::thresholds(2, None, 1),
            20,
            2,
        );
        cfg.level = Some(0);
        let r = run_draws_experiment(&cfg).unwrap();
        assert_eq!(r.max_draws, 0);
        assert_eq!(r.successes, 20);
        assert!(r.all_passed());
    }

    #[test]
    fn draws_rejects_level_above_dimension() {
        let mut cfg = ExperimentConfig::new(
            ExperimentKind::Draws,
            ClassSpec::thresholds(2, None, 1),
            20,
            2,
        );
        cfg.level = Some(2);
        assert!(run_draws_experiment(&cfg).is_err());
    }

    #[test]
    fn e2e_singleton_always_succeeds() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::E2e, singleton(), 3, 5);
        cfg.batches_log2 = Some(10);
        let r = run_e2e_experiment(&cfg).unwrap();
        assert_eq!(r.success_rate, 1.0);
        assert!(r.all_passed());
        assert_eq!(r.params.d, 0);
    }

    #[test]
    fn e2e_gated_above_dimension_one() {
        let cfg =
            ExperimentConfig::new(ExperimentKind::E2e, ClassSpec::thresholds(4, None, 1), 1, 0);
        assert!(matches!(
            run_e2e_experiment(&cfg),
            Err(Error::Intractable(_))
        ));
    }

    #[test]
    fn wrong_kind_or_zero_runs_rejected() {
        let cfg = ExperimentConfig::new(ExperimentKind::Draws, singleton(), 1, 0);
        assert!(run_stability_experiment(&cfg).is_err());
        let cfg = ExperimentConfig::new(ExperimentKind::Stability, singleton(), 0, 0);
        assert!(run_stability_experiment(&cfg).is_err());
    }

    #[test]
    fn dp_audits_pass() {
        let mut cfg = ExperimentConfig::new(
            ExperimentKind::DpAudit,
            ClassSpec::thresholds(4, None, 0),
            50,
            3,
        );
        let r = run_dp_audit(&cfg).unwrap();
        assert!(r.all_passed());
        assert!(r.worst_log_ratio <= 1.0 + 1e-9);
        cfg.audit_mode = Some(AuditMode::Hist);
        let r = run_dp_audit(&cfg).unwrap();
        assert!(r.all_passed());
        assert_eq!(r.rows.len(), 201);
    }

    #[test]
    fn reports_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::new(
            ExperimentKind::Stability,
            ClassSpec::thresholds(2, Some(vec![0.1, 0.9]), 1),
            40,
            9,
        );
        let r = run_stability_experiment(&cfg).unwrap();
        for format in [ReportFormat::Json, ReportFormat::Csv] {
            let path = dir.path().join(format!("r.{format:?}"));
            emit_report(&r, &path, format).unwrap();
            let back: StabilityReport = read_report(&path, format).unwrap();
            assert_eq!(back, r);
        }
        let csv = std::fs::read_to_string(dir.path().join("r.Csv")).unwrap();
        assert_eq!(csv.lines().count(), 41);
        assert!(emit_report_named(&r, &dir.path().join("x"), "yaml").is_err());
    }
}
