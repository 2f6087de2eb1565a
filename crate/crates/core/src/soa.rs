//! The Standard Optimal Algorithm, extended to non-realizable sequences.
//!
//! While the sequence seen so far is realizable the learner keeps a version
//! space and predicts, at every point, the label whose restriction has the
//! larger Littlestone dimension (ties go to `+1`). After the first example
//! that no member explains, the learner freezes its last predictor and patches
//! it locally: each further example `(x, y)` sets the prediction at `x` to `y`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bits::BitSet;
use crate::concept::{ConceptClass, DomainPoint, Hypothesis, Label, LabeledExample, Sample};
use crate::error::{Error, Result};
use crate::littlestone::LdimSolver;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SoaState {
    version_space: BitSet,
    patches: Vec<(DomainPoint, Label)>,
    predictor: Hypothesis,
    realizable: bool,
}

impl SoaState {
    #[inline]
    pub fn predict(&self, x: DomainPoint) -> Label {
        self.predictor.label(x)
    }

    /// The current predictor with all patches applied.
    #[inline]
    pub fn predictor(&self) -> &Hypothesis {
        &self.predictor
    }

    pub fn into_predictor(self) -> Hypothesis {
        self.predictor
    }

    /// Member indices (within the ambient class) still consistent with every
    /// example, as of the last realizable update.
    pub fn version_space(&self) -> &BitSet {
        &self.version_space
    }

    /// Patches recorded after the sequence became unrealizable, in order.
    pub fn patches(&self) -> &[(DomainPoint, Label)] {
        &self.patches
    }

    pub fn is_realizable(&self) -> bool {
        self.realizable
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoaRunResult {
    pub final_hypothesis: Hypothesis,
    pub mistake_count: usize,
    pub mistake_positions: Vec<usize>,
}

/// SOA over a fixed class. Holds the Ldim memo and a cache of argmax
/// predictors per version space, so one instance should be reused across runs
/// on the same class.
#[derive(Clone, Debug)]
pub struct Soa {
    solver: LdimSolver,
    predictors: HashMap<BitSet, Hypothesis>,
    fresh: Option<SoaState>,
}

impl Soa {
    pub fn new(class: &ConceptClass) -> Result<Self> {
        if class.is_empty() {
            return Err(Error::EmptyClass);
        }
        Ok(Soa {
            solver: LdimSolver::new(class),
            predictors: HashMap::new(),
            fresh: None,
        })
    }

    pub fn class(&self) -> &ConceptClass {
        self.solver.class()
    }

    pub fn ldim(&mut self) -> i32 {
        self.solver.ldim()
    }

    pub fn solver_mut(&mut self) -> &mut LdimSolver {
        &mut self.solver
    }

    fn argmax_predictor(&mut self, vs: &BitSet) -> Hypothesis {
        if let Some(h) = self.predictors.get(vs) {
            return h.clone();
        }
        let domain_size = self.solver.class().domain_size();
        let labels: Vec<Label> = (0..domain_size)
            .map(DomainPoint)
            .map(|x| {
                let plus = vs.intersection(self.solver.mask(x, Label::Pos));
                let minus = vs.intersection(self.solver.mask(x, Label::Neg));
                let lp = self.solver.ldim_of(&plus);
                let lm = self.solver.ldim_of(&minus);
                Label::from_bool(lp >= lm)
            })
            .collect();
        let h = Hypothesis::from_labels(&labels);
        self.predictors.insert(vs.clone(), h.clone());
        h
    }

    /// Fresh state with `H_1 = H`.
    pub fn init(&mut self) -> SoaState {
        if let Some(s) = &self.fresh {
            return s.clone();
        }
        let vs = self.solver.all();
        let predictor = self.argmax_predictor(&vs);
        let state = SoaState {
            version_space: vs,
            patches: Vec::new(),
            predictor,
            realizable: true,
        };
        self.fresh = Some(state.clone());
        state
    }

    /// Reveals `(x, y)` and updates the state in place.
    pub fn update(&mut self, state: &mut SoaState, ex: LabeledExample) {
        if state.realizable {
            let keep = self.solver.mask(ex.point, ex.label);
            if state.version_space.is_subset(keep) {
                return;
            }
            let next = state.version_space.intersection(keep);
            if !next.is_empty() {
                state.predictor = self.argmax_predictor(&next);
                state.version_space = next;
                return;
            }
            state.realizable = false;
        }
        state.predictor.set_label(ex.point, ex.label);
        state.patches.push((ex.point, ex.label));
    }

    /// Predict, reveal, update. Returns whether the prediction was a mistake.
    #[inline]
    pub fn step(&mut self, state: &mut SoaState, ex: LabeledExample) -> bool {
        let mistake = state.predict(ex.point) != ex.label;
        self.update(state, ex);
        mistake
    }

    /// Runs a batch of examples from an existing state; returns the number of
    /// mistakes.
    pub fn feed(&mut self, state: &mut SoaState, examples: &[LabeledExample]) -> usize {
        examples.iter().filter(|&&ex| self.step(state, ex)).count()
    }

    /// Processes `sample` in order from a fresh state.
    pub fn run(&mut self, sample: &Sample) -> Result<SoaRunResult> {
        self.run_chain(&[sample.examples()])
    }

    /// [`Soa::run`] over the concatenation of `parts`.
    pub fn run_chain(&mut self, parts: &[&[LabeledExample]]) -> Result<SoaRunResult> {
        let domain_size = self.class().domain_size();
        let all = parts.iter().flat_map(|p| p.iter());
        if let Some(bad) = all.clone().find(|e| e.point.0 >= domain_size) {
            return Err(Error::PointOutOfDomain {
                point: bad.point.0,
                domain_size,
            });
        }
        let mut state = self.init();
        let mut mistake_positions = Vec::new();
        for (i, &ex) in all.enumerate() {
            if self.step(&mut state, ex) {
                mistake_positions.push(i);
            }
        }
        Ok(SoaRunResult {
            final_hypothesis: state.into_predictor(),
            mistake_count: mistake_positions.len(),
            mistake_positions,
        })
    }
}

/// One-shot `SOA(S)` on a class.
pub fn soa_run(class: &ConceptClass, sample: &Sample) -> Result<SoaRunResult> {
    Soa::new(class)?.run(sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concept::{draw_examples, RealizableDistribution};
    use crate::littlestone::ldim;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ex(x: usize, y: i8) -> LabeledExample {
        LabeledExample::new(x, Label::try_from(y).unwrap())
    }

    #[test]
    fn init_rejects_empty() {
        let empty = ConceptClass::new(2, vec![]).unwrap();
        assert!(matches!(Soa::new(&empty), Err(Error::EmptyClass)));
    }

    #[test]
    fn singleton_predicts_its_member() {
        let h = Hypothesis::from_signs(&[1, -1, -1, 1]).unwrap();
        let class = ConceptClass::new(4, vec![h.clone()]).unwrap();
        let mut soa = Soa::new(&class).unwrap();
        let state = soa.init();
        assert_eq!(state.predictor(), &h);
        for x in 0..4 {
            assert_eq!(state.predict(DomainPoint(x)), h.label(DomainPoint(x)));
        }
    }

    #[test]
    fn thresholds2_initial_predictor() {
        // Point 0: both restrictions are singletons (Ldim 0 each), tie -> +1.
        // Point 1: +1 keeps both thresholds (Ldim 1), -1 keeps none (Ldim -1).
        let class = ConceptClass::thresholds(2).unwrap();
        let mut soa = Soa::new(&class).unwrap();
        let state = soa.init();
        assert_eq!(state.predictor().signs(), vec![1, 1]);
        assert_eq!(state.version_space().count(), 2);
    }

    #[test]
    fn version_space_keeps_target() {
        let class = ConceptClass::thresholds(8).unwrap();
        let target = class.members()[3].clone();
        let d = RealizableDistribution::uniform(target.clone());
        let s = draw_examples(&d, 40, &mut ChaCha8Rng::seed_from_u64(5));
        let mut soa = Soa::new(&class).unwrap();
        let mut state = soa.init();
        for &e in s.examples() {
            soa.update(&mut state, e);
            assert!(state.version_space().contains(3));
            assert!(state.is_realizable());
        }
    }

    #[test]
    fn unrealizable_update_patches() {
        // Only +1 at point 0 is realizable.
        let class = ConceptClass::new(
            2,
            vec![
                Hypothesis::from_signs(&[1, 1]).unwrap(),
                Hypothesis::from_signs(&[1, -1]).unwrap(),
            ],
        )
        .unwrap();
        let mut soa = Soa::new(&class).unwrap();
        let mut state = soa.init();
        soa.update(&mut state, ex(0, 1));
        assert!(state.is_realizable());
        let before = state.predictor().clone();
        soa.update(&mut state, ex(0, -1));
        assert!(!state.is_realizable());
        assert_eq!(state.predict(DomainPoint(0)), Label::Neg);
        assert_eq!(state.predict(DomainPoint(1)), before.label(DomainPoint(1)));
        assert_eq!(state.patches(), &[(DomainPoint(0), Label::Neg)]);
        // Never returns to realizable mode.
        soa.update(&mut state, ex(0, 1));
        assert!(!state.is_realizable());
        assert_eq!(state.predict(DomainPoint(0)), Label::Pos);
    }

    #[test]
    fn empty_run_keeps_initial_predictor() {
        let class = ConceptClass::thresholds(5).unwrap();
        let mut soa = Soa::new(&class).unwrap();
        let init = soa.init().into_predictor();
        let r = soa.run(&Sample::new()).unwrap();
        assert_eq!(r.final_hypothesis, init);
        assert_eq!(r.mistake_count, 0);
    }

    #[test]
    fn out_of_domain_sample_rejected() {
        let class = ConceptClass::thresholds(2).unwrap();
        let s = Sample::from_examples(vec![ex(2, 1)]);
        assert!(matches!(
            soa_run(&class, &s),
            Err(Error::PointOutOfDomain { .. })
        ));
    }

    /// Walks the shattered tree against the learner: at each node, reveal the
    /// label opposite to the current prediction. For thresholds(8) the
    /// adversary forces 3 mistakes and pins down one threshold.
    #[test]
    fn adversarial_sequence_forces_ldim_mistakes() {
        let class = ConceptClass::thresholds(8).unwrap();
        let mut soa = Soa::new(&class).unwrap();
        let mut state = soa.init();
        let mut seq = Vec::new();
        let mut alive: Vec<usize> = (0..8).collect();
        for _ in 0..3 {
            // Split the surviving thresholds at their median point.
            let x = DomainPoint(alive[alive.len() / 2 - 1]);
            let y = state.predict(x).flip();
            seq.push(LabeledExample { point: x, label: y });
            soa.update(&mut state, LabeledExample { point: x, label: y });
            alive.retain(|&i| class.members()[i].label(x) == y);
        }
        assert_eq!(alive.len(), 1);
        let target = class.members()[alive[0]].clone();
        for x in 0..8 {
            seq.push(LabeledExample {
                point: DomainPoint(x),
                label: target.label(DomainPoint(x)),
            });
        }
        let r = soa.run(&Sample::from_examples(seq)).unwrap();
        assert_eq!(r.mistake_count, 3);
        assert_eq!(r.final_hypothesis, target);
    }

    /// Depth-first search over orderings of distinct points labeled by `target`
    /// for a prefix on which SOA errs three times.
    fn forcing_prefix(
        soa: &mut Soa,
        state: &SoaState,
        target: &Hypothesis,
        used: &mut Vec<usize>,
        mistakes: usize,
    ) -> bool {
        if mistakes == 3 {
            return true;
        }
        for x in 0..8 {
            if used.contains(&x) {
                continue;
            }
            let e = LabeledExample {
                point: DomainPoint(x),
                label: target.label(DomainPoint(x)),
            };
            let mut next = state.clone();
            let erred = soa.step(&mut next, e);
            used.push(x);
            if forcing_prefix(soa, &next, target, used, mistakes + usize::from(erred)) {
                return true;
            }
            used.pop();
        }
        false
    }

    #[test]
    fn covering_sequence_with_three_forced_mistakes() {
        let class = ConceptClass::thresholds(8).unwrap();
        let mut soa = Soa::new(&class).unwrap();
        let init = soa.init();
        // The initial predictor is t_4 itself, so only t_8 admits three
        // forced mistakes under the +1 tie rule.
        let forcing: Vec<usize> = (0..8)
            .filter(|&i| forcing_prefix(&mut soa, &init, &class.members()[i], &mut Vec::new(), 0))
            .collect();
        assert_eq!(forcing, vec![7]);
        assert_eq!(init.predictor(), &class.members()[3]);
        let target = class.members()[7].clone();
        let mut order = Vec::new();
        assert!(forcing_prefix(&mut soa, &init, &target, &mut order, 0));
        order.extend((0..8).filter(|x| !order.contains(x)).collect::<Vec<_>>());
        let seq: Sample = order
            .iter()
            .map(|&x| LabeledExample {
                point: DomainPoint(x),
                label: target.label(DomainPoint(x)),
            })
            .collect();
        let r = soa.run(&seq).unwrap();
        assert_eq!(r.mistake_count, 3);
        assert_eq!(r.final_hypothesis, target);
    }

    #[test]
    fn random_realizable_mistake_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for class in [
            ConceptClass::thresholds(4).unwrap(),
            ConceptClass::full(3).unwrap(),
        ] {
            let d = ldim(&class) as usize;
            let mut soa = Soa::new(&class).unwrap();
            for _ in 0..500 {
                let target = class.members()[rng.gen_range(0..class.len())].clone();
                let len = rng.gen_range(0..=50);
                let seq: Sample = (0..len)
                    .map(|_| {
                        let x = DomainPoint(rng.gen_range(0..class.domain_size()));
                        LabeledExample {
                            point: x,
                            label: target.label(x),
                        }
                    })
                    .collect();
                let r = soa.run(&seq).unwrap();
                assert!(r.mistake_count <= d);
                assert!(r.final_hypothesis.is_consistent_with(seq.examples()));
            }
        }
    }
}
