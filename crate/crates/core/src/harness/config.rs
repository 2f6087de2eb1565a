//! Experiment configuration and the class file format.
//!
//! A class file is TOML:
//!
//! ```toml
//! domain_size = 2
//! kind = "thresholds"          # or "explicit"
//! # members = [[1, 1], [-1, 1]] # explicit only: one ±1 row per hypothesis
//! marginal = "uniform"         # or an explicit vector, e.g. [0.04, 0.96]
//! target = 1                   # index of the target member
//! ```
//!
//! Threshold `i` (0-based) labels point `j` with `+1` iff `j ≥ i`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::concept::{
    ConceptClass, Hypothesis, Label, LabeledExample, RealizableDistribution, Sample,
};
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassKind {
    Thresholds,
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MarginalSpec {
    Named(String),
    Weights(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub domain_size: usize,
    pub kind: ClassKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<Vec<i8>>>,
    #[serde(default = "uniform")]
    pub marginal: MarginalSpec,
    #[serde(default)]
    pub target: usize,
}

fn uniform() -> MarginalSpec {
    MarginalSpec::Named("uniform".into())
}

impl ClassSpec {
    pub fn thresholds(domain_size: usize, marginal: Option<Vec<f64>>, target: usize) -> Self {
        ClassSpec {
            domain_size,
            kind: ClassKind::Thresholds,
            members: None,
            marginal: marginal.map_or_else(uniform, MarginalSpec::Weights),
            target,
        }
    }

    pub fn explicit(members: &ConceptClass, marginal: Option<Vec<f64>>, target: usize) -> Self {
        ClassSpec {
            domain_size: members.domain_size(),
            kind: ClassKind::Explicit,
            members: Some(members.members().iter().map(Hypothesis::signs).collect()),
            marginal: marginal.map_or_else(uniform, MarginalSpec::Weights),
            target,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("class spec serializes")
    }

    pub fn class(&self) -> Result<ConceptClass> {
        match (self.kind, &self.members) {
            (ClassKind::Thresholds, None) => ConceptClass::thresholds(self.domain_size),
            (ClassKind::Thresholds, Some(_)) => Err(Error::Config(
                "`members` is only valid with kind = \"explicit\"".into(),
            )),
            (ClassKind::Explicit, None) => {
                Err(Error::Config("kind = \"explicit\" needs `members`".into()))
            }
            (ClassKind::Explicit, Some(rows)) => {
                let members = rows
                    .iter()
                    .map(|r| Hypothesis::from_signs(r))
                    .collect::<Result<Vec<_>>>()?;
                ConceptClass::new(self.domain_size, members)
            }
        }
    }

    pub fn distribution(&self, class: &ConceptClass) -> Result<RealizableDistribution> {
        let target = class
            .members()
            .get(self.target)
            .ok_or_else(|| {
                invalid(
                    "target",
                    format!(
                        "index {} but the class has {} members",
                        self.target,
                        class.len()
                    ),
                )
            })?
            .clone();
        match &self.marginal {
            MarginalSpec::Named(name) if name == "uniform" => {
                Ok(RealizableDistribution::uniform(target))
            }
            MarginalSpec::Named(name) => Err(Error::Config(format!("unknown marginal {name:?}"))),
            MarginalSpec::Weights(w) => {
                if w.len() != self.domain_size {
                    return Err(Error::DomainMismatch {
                        expected: self.domain_size,
                        found: w.len(),
                    });
                }
                RealizableDistribution::new(target, w.clone())
            }
        }
    }

    pub fn build(&self) -> Result<(ConceptClass, RealizableDistribution)> {
        let class = self.class()?;
        let dist = self.distribution(&class)?;
        Ok((class, dist))
    }
}

#[derive(Serialize, Deserialize)]
struct SampleRecord {
    point: usize,
    label: i8,
}

/// Reads a sample from CSV with header `point,label` and labels `±1`.
pub fn read_sample_csv(path: &Path) -> Result<Sample> {
    let mut examples = Vec::new();
    for rec in csv::Reader::from_path(path)?.deserialize::<SampleRecord>() {
        let rec = rec?;
        examples.push(LabeledExample::new(
            rec.point,
            Label::try_from(rec.label).map_err(Error::Config)?,
        ));
    }
    Ok(Sample::from_examples(examples))
}

pub fn write_sample_csv(path: &Path, sample: &Sample) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for e in sample.examples() {
        w.serialize(SampleRecord {
            point: e.point.0,
            label: e.label.as_i8(),
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Stability,
    Mistakes,
    Draws,
    E2e,
    DpAudit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::UnknownFormat(other.into())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditMode {
    Em,
    Hist,
}

/// Everything an experiment reads. Optional fields fall back to the
/// defaults documented on each experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub class: ClassSpec,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub runs: u64,
    pub seed: u64,
    /// Level of the sampler for `draws`.
    pub level: Option<usize>,
    /// Sequence length for `mistakes`, sample length for `dp-audit em`.
    pub sample_len: Option<usize>,
    /// Replace the theoretical auxiliary size and draw cap of G.
    pub n: Option<u64>,
    pub cap: Option<u64>,
    /// Run the private learner with `2^batches_log2` batches instead of the
    /// theoretical count.
    pub batches_log2: Option<u32>,
    /// Allowed shortfall of the success rate below `1 − β` in `e2e`.
    pub slack: Option<f64>,
    pub audit_mode: Option<AuditMode>,
    /// Largest count audited in `dp-audit hist`.
    pub max_count: Option<u64>,
    pub force: bool,
    pub out: Option<PathBuf>,
    pub format: ReportFormat,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, class: ClassSpec, runs: u64, seed: u64) -> Self {
        ExperimentConfig {
            kind,
            class,
            alpha: None,
            beta: None,
            epsilon: None,
            delta: None,
            runs,
            seed,
            level: None,
            sample_len: None,
            n: None,
            cap: None,
            batches_log2: None,
            slack: None,
            audit_mode: None,
            max_count: None,
            force: false,
            out: None,
            format: ReportFormat::Json,
        }
    }

    pub fn validate(&self, expected: ExperimentKind) -> Result<()> {
        if self.kind != expected {
            return Err(Error::Config(format!(
                "expected a {expected:?} config, got {:?}",
                self.kind
            )));
        }
        if self.runs == 0 {
            return Err(invalid("runs", "must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn alpha_or(&self, default: f64) -> f64 {
        self.alpha.unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_thresholds_file() {
        let spec = ClassSpec::parse(
            "domain_size = 2\nkind = \"thresholds\"\nmarginal = [0.04, 0.96]\ntarget = 1\n",
        )
        .unwrap();
        let (class, dist) = spec.build().unwrap();
        assert_eq!(class.len(), 2);
        assert_eq!(dist.target().signs(), vec![-1, 1]);
        assert_eq!(dist.marginal(), &[0.04, 0.96]);
    }

    #[test]
    fn parse_explicit_file() {
        let spec = ClassSpec::parse(
            "domain_size = 3\nkind = \"explicit\"\nmembers = [[1, -1, 1], [-1, -1, 1]]\nmarginal = \"uniform\"\n",
        )
        .unwrap();
        let (class, dist) = spec.build().unwrap();
        assert_eq!(class.len(), 2);
        assert_eq!(dist.target().signs(), vec![1, -1, 1]);
    }

    #[test]
    fn round_trip_toml() {
        let class = ConceptClass::thresholds(3).unwrap();
        let spec = ClassSpec::explicit(&class, Some(vec![0.2, 0.3, 0.5]), 2);
        assert_eq!(ClassSpec::parse(&spec.to_toml()).unwrap(), spec);
    }

    #[test]
    fn bad_files_rejected() {
        assert!(ClassSpec::parse("domain_size = 2\nkind = \"circles\"\n").is_err());
        assert!(ClassSpec::parse("domain_size = 2\nkind = \"explicit\"\n")
            .unwrap()
            .class()
            .is_err());
        let bad_target =
            ClassSpec::parse("domain_size = 2\nkind = \"thresholds\"\ntarget = 5\n").unwrap();
        assert!(bad_target.build().is_err());
        let bad_marginal =
            ClassSpec::parse("domain_size = 2\nkind = \"thresholds\"\nmarginal = [1.0]\n").unwrap();
        assert!(bad_marginal.build().is_err());
        assert!(ClassSpec::parse("domain_size = 2\nkind = \"thresholds\"\nextra = 1\n").is_err());
    }

    #[test]
    fn sample_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = Sample::from_examples(vec![
            LabeledExample::new(3, Label::Neg),
            LabeledExample::new(0, Label::Pos),
        ]);
        write_sample_csv(&path, &s).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "point,label\n3,-1\n0,1\n"
        );
        assert_eq!(read_sample_csv(&path).unwrap(), s);
        std::fs::write(&path, "point,label\n1,0\n").unwrap();
        assert!(read_sample_csv(&path).is_err());
    }

    #[test]
    fn unknown_format_is_an_error() {
        assert!(matches!(
            "xml".parse::<ReportFormat>(),
            Err(Error::UnknownFormat(_))
        ));
        assert_eq!("csv".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
    }
}
