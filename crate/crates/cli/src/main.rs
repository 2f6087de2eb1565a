use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use stablearn::harness::reports::{rows_to_csv, to_json};
use stablearn::harness::{
    emit_report, read_sample_csv, run_dp_audit, run_draws_experiment, run_e2e_experiment,
    run_mistake_experiment, run_stability_experiment, AuditMode, ClassSpec, ExperimentConfig,
    ExperimentKind, Report, ReportFormat,
};
use stablearn::{
    find_shattered_tree, m_params, verify_shattered, Error, LdimSolver, Soa, StabilityParams,
};

#[derive(Parser, Debug)]
#[command(
    name = "stablearn",
    version,
    about = "Globally stable and differentially private learning of Littlestone classes"
)]
struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report destination; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML file with defaults for any flag, using the flag names as keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Em,
    Hist,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Littlestone dimension of a class.
    Ldim {
        #[arg(long)]
        class: Option<PathBuf>,
        /// Also print a shattered tree of maximal depth.
        #[arg(long)]
        witness: bool,
    },
    /// Run SOA over a sample given as CSV (`point,label`).
    SoaRun {
        #[arg(long)]
        class: Option<PathBuf>,
        #[arg(long)]
        sample: Option<PathBuf>,
    },
    /// Output frequencies of G over independent runs.
    Stability(GArgs),
    /// Mistake-count histogram of SOA on random realizable sequences.
    Mistakes {
        #[arg(long)]
        class: Option<PathBuf>,
        #[arg(long)]
        runs: Option<u64>,
        /// Sequence length.
        #[arg(long)]
        length: Option<usize>,
    },
    /// Draw counts of the capped tournament sampler.
    Draws {
        #[command(flatten)]
        g: GArgs,
        #[arg(long)]
        level: Option<usize>,
    },
    /// Run the private learner; one JSON line per trial plus a summary.
    PrivateLearn(LearnArgs),
    /// Success rate of the private learner over seeded trials.
    E2e(LearnArgs),
    /// Parameter tables for dimension d.
    Params {
        #[arg(long)]
        d: Option<i32>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Exact privacy audits.
    DpAudit {
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Hypotheses for the exponential mechanism audit.
        #[arg(long)]
        class: Option<PathBuf>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Neighbor pairs audited.
        #[arg(long)]
        runs: Option<u64>,
        #[arg(long)]
        sample_len: Option<usize>,
        /// Largest count in the histogram audit.
        #[arg(long)]
        max_count: Option<u64>,
    },
}

#[derive(Args, Debug)]
struct GArgs {
    #[arg(long)]
    class: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    runs: Option<u64>,
    /// Override the auxiliary sample size of G.
    #[arg(long)]
    n: Option<u64>,
    /// Override the draw cap of G.
    #[arg(long)]
    cap: Option<u64>,
}

#[derive(Args, Debug)]
struct LearnArgs {
    #[arg(long)]
    class: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Run 2^j batches instead of the theoretical count.
    #[arg(long)]
    batches_log2: Option<u32>,
    /// Allowed shortfall of the success rate below 1 - beta.
    #[arg(long)]
    slack: Option<f64>,
    /// Allow classes of Littlestone dimension 2 or more.
    #[arg(long)]
    force: bool,
}

/// Keys of `--config`; same names as the flags.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    out: Option<PathBuf>,
    format: Option<Format>,
    threads: Option<usize>,
    class: Option<PathBuf>,
    witness: Option<bool>,
    sample: Option<PathBuf>,
    alpha: Option<f64>,
    beta: Option<f64>,
    epsilon: Option<f64>,
    delta: Option<f64>,
    runs: Option<u64>,
    trials: Option<u64>,
    length: Option<usize>,
    level: Option<usize>,
    n: Option<u64>,
    cap: Option<u64>,
    batches_log2: Option<u32>,
    slack: Option<f64>,
    force: Option<bool>,
    d: Option<i32>,
    mode: Option<Mode>,
    sample_len: Option<usize>,
    max_count: Option<u64>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<Self, Failure> {
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.class, &mut cfg.sample, &mut cfg.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

enum Failure {
    Usage(String),
    Assertion(String),
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Invariant(_) => Failure::Assertion(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

struct Ctx {
    seed: u64,
    out: Option<PathBuf>,
    format: Option<ReportFormat>,
    file: FileConfig,
}

impl Ctx {
    fn class(&self, flag: Option<PathBuf>) -> Result<ClassSpec, Failure> {
        let path = flag
            .or_else(|| self.file.class.clone())
            .ok_or_else(|| usage("--class is required"))?;
        Ok(ClassSpec::load(&path)?)
    }

    fn config(
        &self,
        kind: ExperimentKind,
        class: ClassSpec,
        runs: Option<u64>,
        default_runs: u64,
    ) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(kind, class, runs.unwrap_or(default_runs), self.seed);
        cfg.out = self.out.clone();
        cfg.format = self.format.unwrap_or(ReportFormat::Json);
        cfg
    }

    fn write_text(&self, text: &str) -> Result<(), Failure> {
        match &self.out {
            Some(p) => std::fs::write(p, text)?,
            None => std::io::stdout().write_all(text.as_bytes())?,
        }
        Ok(())
    }

    /// Writes the report and fails with an assertion error if any check did.
    fn finish<R: Report>(&self, report: &R) -> Result<(), Failure> {
        let format = self.format.unwrap_or(ReportFormat::Json);
        match &self.out {
            Some(p) => emit_report(report, p, format)?,
            None => match format {
                ReportFormat::Json => self.write_text(&to_json(report)?)?,
                ReportFormat::Csv => std::io::stdout().write_all(&rows_to_csv(report)?)?,
            },
        }
        checks_outcome(report)
    }
}

fn checks_outcome<R: Report>(report: &R) -> Result<(), Failure> {
    for c in report.checks() {
        eprintln!(
            "[{}] {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let failed: Vec<&str> = report
        .checks()
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assertion(format!(
            "failed checks: {}",
            failed.join(", ")
        )))
    }
}

fn params_text(
    d: i32,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    delta: f64,
) -> Result<(String, serde_json::Value), Failure> {
    let s = StabilityParams::new(d, alpha)?.table();
    let mut text = format!(
        "stability parameters (d = {d}, alpha = {alpha})\n  n               {}\n  N               {}\n  m               {}\n  freq_threshold  {}\n  eta_guarantee   {}\n",
        s.n, s.cap, s.m, s.freq_threshold, s.eta_guarantee
    );
    let mut json = serde_json::json!({ "stability": s });
    match m_params(d, alpha.min(1.0), beta, epsilon, delta) {
        Ok(p) => {
            let t = p.table();
            text.push_str(&format!(
                "private learner (G at alpha/2 = {}, beta = {beta}, epsilon = {epsilon}, delta = {delta})\n  eta             {}\n  G.n             {}\n  m               {}\n  k               {}\n  n_prime         {}\n  total_n         {}\n",
                alpha / 2.0, t.eta, t.g.n, t.m, t.k, t.n_prime, t.total_n
            ));
            json["private_learner"] = serde_json::to_value(t).expect("table serializes");
        }
        Err(e) => text.push_str(&format!("private learner: {e}\n")),
    }
    Ok((text, json))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    if let Some(n) = cli.threads.or(file.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    let ctx = Ctx {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        out: cli.out.or_else(|| file.out.clone()),
        format: cli.format.or(file.format).map(Into::into),
        file,
    };
    let f = &ctx.file;
    match cli.command {
        Command::Ldim { class, witness } => {
            let class = ctx.class(class)?.class()?;
            let d = LdimSolver::new(&class).ldim();
            let tree = if witness || f.witness == Some(true) {
                let t = find_shattered_tree(&class, d.max(0) as usize).ok_or_else(|| {
                    Failure::Assertion("no shattered tree at the computed depth".into())
                })?;
                if !verify_shattered(&class, &t) {
                    return Err(Failure::Assertion("witness tree is not shattered".into()));
                }
                Some(t)
            } else {
                None
            };
            match ctx.format {
                Some(ReportFormat::Json) => {
                    let nodes = tree
                        .as_ref()
                        .map(|t| t.nodes().iter().map(|x| x.0).collect::<Vec<_>>());
                    let v = serde_json::json!({ "ldim": d, "witness": nodes });
                    ctx.write_text(&format!(
                        "{}\n",
                        serde_json::to_string_pretty(&v).expect("json")
                    ))
                }
                _ => {
                    let mut s = format!("ldim = {d}\n");
                    if let Some(t) = tree {
                        s.push_str(&t.to_string());
                    }
                    ctx.write_text(&s)
                }
            }
        }
        Command::SoaRun { class, sample } => {
            let class = ctx.class(class)?.class()?;
            let path = sample
                .or_else(|| f.sample.clone())
                .ok_or_else(|| usage("--sample is required"))?;
            let r = Soa::new(&class)?.run(&read_sample_csv(&path)?)?;
            ctx.write_text(&format!(
                "{}\n",
                serde_json::to_string_pretty(&r).expect("json")
            ))
        }
        Command::Stability(g) => {
            let mut cfg = ctx.config(
                ExperimentKind::Stability,
                ctx.class(g.class)?,
                g.runs.or(f.runs),
                1000,
            );
            cfg.alpha = g.alpha.or(f.alpha);
            cfg.n = g.n.or(f.n);
            cfg.cap = g.cap.or(f.cap);
            ctx.finish(&run_stability_experiment(&cfg)?)
        }
        Command::Mistakes {
            class,
            runs,
            length,
        } => {
            let mut cfg = ctx.config(
                ExperimentKind::Mistakes,
                ctx.class(class)?,
                runs.or(f.runs),
                1000,
            );
            cfg.sample_len = length.or(f.length);
            ctx.finish(&run_mistake_experiment(&cfg)?)
        }
        Command::Draws { g, level } => {
            let mut cfg = ctx.config(
                ExperimentKind::Draws,
                ctx.class(g.class)?,
                g.runs.or(f.runs),
                1000,
            );
            cfg.alpha = g.alpha.or(f.alpha);
            cfg.n = g.n.or(f.n);
            cfg.cap = g.cap.or(f.cap);
            cfg.level = level.or(f.level);
            ctx.finish(&run_draws_experiment(&cfg)?)
        }
        Command::PrivateLearn(a) => {
            let cfg = learn_config(&ctx, a, 1)?;
            let report = run_e2e_experiment(&cfg)?;
            if let Some(p) = &ctx.out {
                emit_report(&report, p, ctx.format.unwrap_or(ReportFormat::Json))?;
            } else {
                let mut out = String::new();
                for row in &report.rows {
                    out.push_str(&serde_json::to_string(row).expect("json"));
                    out.push('\n');
                }
                out.push_str(&serde_json::to_string(&report.summary()).expect("json"));
                out.push('\n');
                ctx.write_text(&out)?;
            }
            checks_outcome(&report)
        }
        Command::E2e(a) => {
            let cfg = learn_config(&ctx, a, 200)?;
            ctx.finish(&run_e2e_experiment(&cfg)?)
        }
        Command::Params {
            d,
            alpha,
            beta,
            epsilon,
            delta,
        } => {
            let d = d.or(f.d).ok_or_else(|| usage("--d is required"))?;
            let (text, json) = params_text(
                d,
                alpha.or(f.alpha).unwrap_or(0.5),
                beta.or(f.beta).unwrap_or(0.2),
                epsilon.or(f.epsilon).unwrap_or(1.0),
                delta.or(f.delta).unwrap_or(1e-6),
            )?;
            match ctx.format {
                Some(ReportFormat::Json) => ctx.write_text(&format!(
                    "{}\n",
                    serde_json::to_string_pretty(&json).expect("json")
                )),
                _ => ctx.write_text(&text),
            }
        }
        Command::DpAudit {
            mode,
            class,
            epsilon,
            delta,
            runs,
            sample_len,
            max_count,
        } => {
            let mode = match mode.or(f.mode).unwrap_or(Mode::Em) {
                Mode::Em => AuditMode::Em,
                Mode::Hist => AuditMode::Hist,
            };
            let class = match (mode, class.or_else(|| f.class.clone())) {
                (_, Some(p)) => ClassSpec::load(&p)?,
                (AuditMode::Hist, None) => ClassSpec::thresholds(1, None, 0),
                (AuditMode::Em, None) => return Err(usage("--class is required for the em audit")),
            };
            let mut cfg = ctx.config(ExperimentKind::DpAudit, class, runs.or(f.runs), 100);
            cfg.audit_mode = Some(mode);
            cfg.epsilon = epsilon.or(f.epsilon);
            cfg.delta = delta.or(f.delta);
            cfg.sample_len = sample_len.or(f.sample_len);
            cfg.max_count = max_count.or(f.max_count);
            let report = run_dp_audit(&cfg)?;
            eprintln!(
                "worst log-ratio {} (epsilon {}, delta {})",
                report.worst_log_ratio, report.epsilon, report.delta
            );
            ctx.finish(&report)
        }
    }
}

fn learn_config(ctx: &Ctx, a: LearnArgs, default_trials: u64) -> Result<ExperimentConfig, Failure> {
    let f = &ctx.file;
    let mut cfg = ctx.config(
        ExperimentKind::E2e,
        ctx.class(a.class)?,
        a.trials.or(f.trials),
        default_trials,
    );
    cfg.alpha = a.alpha.or(f.alpha);
    cfg.beta = a.beta.or(f.beta);
    cfg.epsilon = a.epsilon.or(f.epsilon);
    cfg.delta = a.delta.or(f.delta);
    cfg.batches_log2 = a.batches_log2.or(f.batches_log2);
    cfg.slack = a.slack.or(f.slack);
    cfg.force = a.force || f.force == Some(true);
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Assertion(msg)) => {
            eprintln!("assertion failed: {msg}");
            ExitCode::from(2)
        }
    }
}
