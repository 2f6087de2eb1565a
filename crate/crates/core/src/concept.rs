//! Finite domains, hypotheses, concept classes, samples and realizable
//! distributions.
//!
//! A domain of size `n` is the index set `{0, …, n-1}`. Hypotheses are dense
//! `±1` labelings of the whole domain, so equality is exact and population
//! losses are computed by summing marginal mass rather than by sampling.

use std::collections::HashSet;
use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::bits::BitSet;
use crate::error::{invalid, Error, Result};

/// Tolerance on the total mass of a marginal before renormalization.
pub const MARGINAL_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainPoint(pub usize);

impl DomainPoint {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for DomainPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub const BOTH: [Label; 2] = [Label::Pos, Label::Neg];

    #[inline]
    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    #[inline]
    pub fn is_pos(self) -> bool {
        self == Label::Pos
    }

    #[inline]
    pub fn flip(self) -> Self {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        l.as_i8()
    }
}

impl TryFrom<i8> for Label {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, Self::Error> {
        match v {
            1 => Ok(Label::Pos),
            -1 => Ok(Label::Neg),
            other => Err(format!("label must be +1 or -1, got {other}")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Pos => "+1",
            Label::Neg => "-1",
        })
    }
}

/// A total labeling `X → {±1}`. Bit `i` is set iff the label at point `i` is `+1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Hypothesis {
    positive: BitSet,
}

impl Hypothesis {
    pub fn constant(domain_size: usize, label: Label) -> Self {
        let positive = match label {
            Label::Pos => BitSet::full(domain_size),
            Label::Neg => BitSet::empty(domain_size),
        };
        Hypothesis { positive }
    }

    pub fn from_labels(labels: &[Label]) -> Self {
        let mut positive = BitSet::empty(labels.len());
        for (i, l) in labels.iter().enumerate() {
            positive.set(i, l.is_pos());
        }
        Hypothesis { positive }
    }

    /// Parses a `±1` row such as `[1, -1, 1]`.
    pub fn from_signs(signs: &[i8]) -> Result<Self> {
        let labels = signs
            .iter()
            .map(|&s| Label::try_from(s).map_err(Error::InvalidDistribution))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_labels(&labels))
    }

    /// Inverse of [`Hypothesis::fingerprint`].
    pub fn from_fingerprint(s: &str) -> Result<Self> {
        let labels = s
            .chars()
            .map(|c| match c {
                '+' => Ok(Label::Pos),
                '-' => Ok(Label::Neg),
                other => Err(invalid(
                    "fingerprint",
                    format!("unexpected character {other:?}"),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_labels(&labels))
    }

    #[inline]
    pub fn domain_size(&self) -> usize {
        self.positive.len()
    }

    #[inline]
    pub fn label(&self, x: DomainPoint) -> Label {
        Label::from_bool(self.positive.contains(x.0))
    }

    #[inline]
    pub fn set_label(&mut self, x: DomainPoint, label: Label) {
        self.positive.set(x.0, label.is_pos());
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        (0..self.domain_size()).map(|i| self.label(DomainPoint(i)))
    }

    pub fn negate(&self) -> Self {
        Hypothesis {
            positive: self.positive.complement(),
        }
    }

    /// Smallest point on which the two hypotheses disagree.
    pub fn first_disagreement(&self, other: &Hypothesis) -> Option<DomainPoint> {
        self.positive
            .first_difference(&other.positive)
            .map(DomainPoint)
    }

    #[inline]
    pub fn agrees_with(&self, ex: &LabeledExample) -> bool {
        self.label(ex.point) == ex.label
    }

    pub fn is_consistent_with(&self, examples: &[LabeledExample]) -> bool {
        examples.iter().all(|ex| self.agrees_with(ex))
    }

    /// Compact `+`/`-` string, one character per domain point.
    pub fn fingerprint(&self) -> String {
        self.labels()
            .map(|l| if l.is_pos() { '+' } else { '-' })
            .collect()
    }

    pub fn signs(&self) -> Vec<i8> {
        self.labels().map(Label::as_i8).collect()
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.labels().map(|l| l.to_string()).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

impl Serialize for Hypothesis {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.fingerprint())
    }
}

impl<'de> Deserialize<'de> for Hypothesis {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Hypothesis::from_fingerprint(&s).map_err(serde::de::Error::custom)
    }
}

/// A finite set of distinct hypotheses over one domain. Member order is kept
/// stable; it defines the member indices used by the Littlestone machinery.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConceptClass {
    domain_size: usize,
    members: Vec<Hypothesis>,
}

impl ConceptClass {
    pub fn new(domain_size: usize, members: Vec<Hypothesis>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(members.len());
        for h in &members {
            if h.domain_size() != domain_size {
                return Err(Error::DomainMismatch {
                    expected: domain_size,
                    found: h.domain_size(),
                });
            }
            if !seen.insert(h) {
                return Err(Error::DuplicateMember);
            }
        }
        Ok(ConceptClass {
            domain_size,
            members,
        })
    }

    /// Threshold functions `t_1, …, t_n` with `t_i(j) = +1` iff `i ≤ j`
    /// (1-based), i.e. member `i` (0-based) is positive exactly on points `≥ i`.
    pub fn thresholds(domain_size: usize) -> Result<Self> {
        if domain_size == 0 {
            return Err(invalid("domain_size", "must be at least 1"));
        }
        let members = (0..domain_size)
            .map(|i| {
                let labels: Vec<Label> =
                    (0..domain_size).map(|j| Label::from_bool(i <= j)).collect();
                Hypothesis::from_labels(&labels)
            })
            .collect();
        Ok(ConceptClass {
            domain_size,
            members,
        })
    }

    /// All `2^n` labelings of a domain of size `n` (n ≤ 16).
    pub fn full(domain_size: usize) -> Result<Self> {
        if domain_size > 16 {
            return Err(invalid("domain_size", "full class limited to 16 points"));
        }
        let members = (0..1usize << domain_size)
            .map(|mask| {
                let labels: Vec<Label> = (0..domain_size)
                    .map(|j| Label::from_bool(mask >> j & 1 == 1))
                    .collect();
                Hypothesis::from_labels(&labels)
            })
            .collect();
        Ok(ConceptClass {
            domain_size,
            members,
        })
    }

    #[inline]
    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    #[inline]
    pub fn members(&self) -> &[Hypothesis] {
        &self.members
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.members.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, h: &Hypothesis) -> bool {
        self.members.contains(h)
    }

    pub fn check_point(&self, x: DomainPoint) -> Result<()> {
        if x.0 < self.domain_size {
            Ok(())
        } else {
            Err(Error::PointOutOfDomain {
                point: x.0,
                domain_size: self.domain_size,
            })
        }
    }

    /// `{h ∈ H : h(x) = b}`.
    pub fn restrict(&self, x: DomainPoint, b: Label) -> Result<ConceptClass> {
        self.check_point(x)?;
        Ok(self.filter(|h| h.label(x) == b))
    }

    pub fn filter(&self, mut keep: impl FnMut(&Hypothesis) -> bool) -> ConceptClass {
        ConceptClass {
            domain_size: self.domain_size,
            members: self.members.iter().filter(|h| keep(h)).cloned().collect(),
        }
    }

    /// Sub-class made of the members whose indices are listed.
    pub fn subclass(&self, indices: impl IntoIterator<Item = usize>) -> ConceptClass {
        ConceptClass {
            domain_size: self.domain_size,
            members: indices
                .into_iter()
                .map(|i| self.members[i].clone())
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledExample {
    pub point: DomainPoint,
    pub label: Label,
}

impl LabeledExample {
    pub fn new(point: usize, label: Label) -> Self {
        LabeledExample {
            point: DomainPoint(point),
            label,
        }
    }
}

/// An ordered sequence of examples; tournament examples are flagged.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    examples: Vec<LabeledExample>,
    tournament: Vec<bool>,
}

impl Sample {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_examples(examples: Vec<LabeledExample>) -> Self {
        let tournament = vec![false; examples.len()];
        Sample {
            examples,
            tournament,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    #[inline]
    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    #[inline]
    pub fn tournament_flags(&self) -> &[bool] {
        &self.tournament
    }

    pub fn tournament_positions(&self) -> Vec<usize> {
        self.tournament
            .iter()
            .enumerate()
            .filter_map(|(i, &t)| t.then_some(i))
            .collect()
    }

    pub fn push(&mut self, ex: LabeledExample) {
        self.examples.push(ex);
        self.tournament.push(false);
    }

    pub fn push_tournament(&mut self, ex: LabeledExample) {
        self.examples.push(ex);
        self.tournament.push(true);
    }

    pub fn extend_from_slice(&mut self, examples: &[LabeledExample]) {
        self.examples.extend_from_slice(examples);
        self.tournament.resize(self.examples.len(), false);
    }

    /// `self ∘ other`: `other` appended after `self`, flags preserved.
    pub fn concat(&self, other: &Sample) -> Sample {
        let mut out = self.clone();
        out.examples.extend_from_slice(&other.examples);
        out.tournament.extend_from_slice(&other.tournament);
        out
    }

    /// Replaces the example at `pos`, keeping its flag.
    pub fn replace(&mut self, pos: usize, ex: LabeledExample) {
        self.examples[pos] = ex;
    }
}

impl FromIterator<LabeledExample> for Sample {
    fn from_iter<I: IntoIterator<Item = LabeledExample>>(iter: I) -> Self {
        Sample::from_examples(iter.into_iter().collect())
    }
}

/// Number of examples `h` mislabels.
pub fn mistakes(h: &Hypothesis, examples: &[LabeledExample]) -> usize {
    examples.iter().filter(|ex| !h.agrees_with(ex)).count()
}

/// `loss_S(h)`, the fraction of examples of `S` that `h` mislabels.
pub fn empirical_loss(h: &Hypothesis, sample: &Sample) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(mistakes(h, sample.examples()) as f64 / sample.len() as f64)
}

/// A realizable distribution: a marginal over the domain, labeled by `target`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealizableDistribution {
    target: Hypothesis,
    marginal: Vec<f64>,
    cdf: Vec<f64>,
}

impl RealizableDistribution {
    pub fn new(target: Hypothesis, marginal: Vec<f64>) -> Result<Self> {
        if marginal.len() != target.domain_size() {
            return Err(Error::DomainMismatch {
                expected: target.domain_size(),
                found: marginal.len(),
            });
        }
        if let Some(bad) = marginal.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "entry {bad} is not a probability"
            )));
        }
        let total: f64 = marginal.iter().sum();
        if (total - 1.0).abs() > MARGINAL_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "mass sums to {total}, not 1"
            )));
        }
        let marginal: Vec<f64> = marginal.iter().map(|p| p / total).collect();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = marginal
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        // Pin the last non-empty bucket to 1 so every uniform in [0,1) lands somewhere.
        if let Some(last) = marginal.iter().rposition(|&p| p > 0.0) {
            for c in &mut cdf[last..] {
                *c = 1.0;
            }
        }
        Ok(RealizableDistribution {
            target,
            marginal,
            cdf,
        })
    }

    pub fn uniform(target: Hypothesis) -> Self {
        let n = target.domain_size();
        Self::new(target, vec![1.0 / n as f64; n]).expect("uniform marginal is valid")
    }

    pub fn point_mass(target: Hypothesis, x: DomainPoint) -> Result<Self> {
        let mut marginal = vec![0.0; target.domain_size()];
        *marginal.get_mut(x.0).ok_or(Error::PointOutOfDomain {
            point: x.0,
            domain_size: target.domain_size(),
        })? = 1.0;
        Self::new(target, marginal)
    }

    #[inline]
    pub fn target(&self) -> &Hypothesis {
        &self.target
    }

    #[inline]
    pub fn marginal(&self) -> &[f64] {
        &self.marginal
    }

    #[inline]
    pub fn domain_size(&self) -> usize {
        self.marginal.len()
    }

    /// Inverse-CDF draw from the marginal using 53 bits of one `u64`.
    #[inline]
    pub fn draw_point<R: RngCore + ?Sized>(&self, rng: &mut R) -> DomainPoint {
        let u = unit_f64(rng.next_u64());
        DomainPoint(self.cdf.partition_point(|&c| c <= u))
    }

    #[inline]
    pub fn draw_example<R: RngCore + ?Sized>(&self, rng: &mut R) -> LabeledExample {
        let point = self.draw_point(rng);
        LabeledExample {
            point,
            label: self.target.label(point),
        }
    }
}

/// Maps a `u64` to `[0, 1)` with 53 bits of precision.
#[inline]
pub(crate) fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `loss_D(h)`: the exact marginal mass of the points where `h` disagrees
/// with the target.
pub fn population_loss(h: &Hypothesis, dist: &RealizableDistribution) -> f64 {
    assert_eq!(
        h.domain_size(),
        dist.domain_size(),
        "hypothesis and distribution must share a domain"
    );
    dist.marginal
        .iter()
        .enumerate()
        .filter(|&(i, _)| h.label(DomainPoint(i)) != dist.target.label(DomainPoint(i)))
        .fold(0.0, |acc, (_, p)| acc + p)
}

/// `n` i.i.d. examples from `dist`.
pub fn draw_examples<R: RngCore + ?Sized>(
    dist: &RealizableDistribution,
    n: usize,
    rng: &mut R,
) -> Sample {
    (0..n).map(|_| dist.draw_example(rng)).collect()
}
