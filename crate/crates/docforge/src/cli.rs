//! The `docforge` command line: one subcommand per pipeline stage, each
//! reading and writing JSONL.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use docforge_core::augment::{
    augment_pool, sample_plan, stream_seed, synthesize_from_template, Provenance, ProvenanceStatus, Template,
};
use docforge_core::cascade::{dpcs, quality_gates, route, DpcsScore, GateOutcome, RepairSubmission};
use docforge_core::corpus::{SampleRecord, VerdictRecord, VerdictState};
use docforge_core::diagnostics::{aggregate_weakness, raw_weakness, report, WeaknessProfile};
use docforge_core::gdpo::{compute_advantages, RolloutGroup};
use docforge_core::markup::ArityTable;
use docforge_core::rewards::{reward_vector_with, RewardVector};
use docforge_core::EngineConfig;

use crate::driver::map_ordered;
use crate::io::{load_corpus, read_jsonl_file, read_verdicts, write_jsonl, Loaded};
use crate::settings::{load_config, render_toml};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "docforge", version, about = "Verify, score and augment document-parsing annotations")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Engine config (TOML, or JSON by extension). Falls back to $DOCFORGE_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub parallelism: u32,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the L2 consensus threshold.
    #[arg(long, global = true)]
    pub consensus_threshold: Option<f64>,
    /// Print the resolved config as TOML to stderr before running.
    #[arg(long, global = true)]
    pub print_config: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Route every sample through the L1/L2/L3 cascade.
    Verify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Check expert repairs of Pending samples against the quality gates.
    RepairCheck {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        verdicts: PathBuf,
        #[arg(long)]
        repairs: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score samples that carry a reference annotation.
    Dpcs {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// JSONL of {"sample_id", "score"} replacing the numeric semantic fallback.
        #[arg(long)]
        semantic: Option<PathBuf>,
    },
    /// Reward vector of every candidate against the sample reference.
    Rewards {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Decoupled advantages for grouped rollout rewards.
    Gdpo {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Weakness profile and error report from verdicts.
    Diagnose {
        #[arg(long)]
        verdicts: PathBuf,
        /// Weakness profile JSON.
        #[arg(long)]
        output: PathBuf,
        /// Text report; stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Perturb or synthesize samples and keep those the cascade passes.
    Augment {
        /// Corpus to perturb; template samples are used when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        plan_size: usize,
        /// Profile JSON, bare or as written by `diagnose`. Uniform when absent.
        #[arg(long)]
        weakness_profile: Option<PathBuf>,
        /// Comma-separated template ids, e.g. table:3x3:0.3,list:3,composite.
        #[arg(long, value_delimiter = ',')]
        templates: Vec<String>,
        /// Admitted records.
        #[arg(long)]
        emit: PathBuf,
        /// Provenance sidecar; defaults to <emit>.provenance.jsonl.
        #[arg(long)]
        provenance: Option<PathBuf>,
    },
    /// Human-readable summary of a verdict file.
    Report {
        #[arg(long)]
        verdicts: PathBuf,
        /// Machine-readable tallies instead of text.
        #[arg(long)]
        json: bool,
    },
}

/// Entry point shared by the binary and the tests.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    let config = match resolve_config(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            return EXIT_USAGE;
        }
    };
    if cli.common.print_config {
        let _ = write!(err, "{}", render_toml(&config));
    }
    let mut ctx = Session {
        config,
        parallelism: cli.common.parallelism as usize,
        out,
        err,
        data_errors: 0,
    };
    match ctx.dispatch(&cli.command) {
        Ok(()) if ctx.data_errors == 0 => EXIT_OK,
        Ok(()) => {
            let _ = writeln!(ctx.err, "{} data error(s)", ctx.data_errors);
            EXIT_DATA
        }
        Err(e) => {
            let _ = writeln!(ctx.err, "error: {e:#}");
            EXIT_USAGE
        }
    }
}

fn resolve_config(common: &Common) -> anyhow::Result<EngineConfig> {
    let mut config = load_config(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(t) = common.consensus_threshold {
        config.consensus_threshold = t;
    }
    config.validate().map_err(|e| anyhow!("invalid config: {e}"))?;
    Ok(config)
}

struct Session<'a> {
    config: EngineConfig,
    parallelism: usize,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    data_errors: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct SemanticScore {
    sample_id: String,
    score: f64,
}

#[derive(Debug, Serialize)]
struct DpcsLine {
    sample_id: String,
    #[serde(flatten)]
    score: DpcsScore,
}

#[derive(Debug, Serialize)]
struct RewardLine<'a> {
    prompt_id: &'a str,
    source_id: &'a str,
    rewards: RewardVector,
}

/// An input line kept verbatim for echoing, with its parsed rewards.
type Rollout = (serde_json::Map<String, Value>, RewardVector);

#[derive(Debug, Deserialize)]
struct RolloutLine {
    prompt_id: String,
    rewards: RewardVector,
}

#[derive(Debug, Serialize)]
struct DimensionAdvantages {
    text: f64,
    formula: f64,
    table: f64,
    #[serde(rename = "struct")]
    structure: f64,
}

#[derive(Debug, Serialize)]
struct AdvantageLine {
    #[serde(flatten)]
    input: serde_json::Map<String, Value>,
    #[serde(rename = "A")]
    per_dimension: DimensionAdvantages,
    #[serde(rename = "A_sum")]
    sum: f64,
    #[serde(rename = "A_hat")]
    rescaled: f64,
    #[serde(rename = "A_grpo")]
    baseline: f64,
}

#[derive(Debug, Serialize)]
struct DiagnosisDoc {
    verdicts: usize,
    profile: WeaknessProfile,
    raw: WeaknessProfile,
}

impl Session<'_> {
    fn dispatch(&mut self, command: &Command) -> anyhow::Result<()> {
        match command {
            Command::Verify { input, output } => self.verify(input, output),
            Command::RepairCheck {
                input,
                verdicts,
                repairs,
                output,
            } => self.repair_check(input, verdicts, repairs, output),
            Command::Dpcs {
                input,
                output,
                semantic,
            } => self.dpcs(input, output, semantic.as_deref()),
            Command::Rewards { input, output } => self.rewards(input, output),
            Command::Gdpo { input, output } => self.gdpo(input, output),
            Command::Diagnose {
                verdicts,
                output,
                report,
            } => self.diagnose(verdicts, output, report.as_deref()),
            Command::Augment {
                input,
                plan_size,
                weakness_profile,
                templates,
                emit,
                provenance,
            } => self.augment(
                input.as_deref(),
                *plan_size,
                weakness_profile.as_deref(),
                templates,
                emit,
                provenance.as_deref(),
            ),
            Command::Report { verdicts, json } => self.report(verdicts, *json),
        }
    }

    fn data_error(&mut self, what: impl std::fmt::Display) {
        self.data_errors += 1;
        let _ = writeln!(self.err, "{what}");
    }

    fn absorb<T>(&mut self, path: &Path, loaded: Loaded<T>) -> Vec<T> {
        for e in &loaded.errors {
            self.data_errors += 1;
            let _ = writeln!(self.err, "{}: {e}", path.display());
        }
        loaded.records
    }

    fn corpus(&mut self, path: &Path) -> anyhow::Result<Vec<SampleRecord>> {
        let loaded = load_corpus(path)?;
        Ok(self.absorb(path, loaded))
    }

    fn verify(&mut self, input: &Path, output: &Path) -> anyhow::Result<()> {
        let samples = self.corpus(input)?;
        let config = &self.config;
        let verdicts = map_ordered(&samples, self.parallelism, |s| route(s, config));
        write_jsonl(output, &verdicts)?;
        let _ = writeln!(self.out, "{} verdicts written to {}", verdicts.len(), output.display());
        Ok(())
    }

    fn repair_check(&mut self, input: &Path, verdicts: &Path, repairs: &Path, output: &Path) -> anyhow::Result<()> {
        let samples = self.corpus(input)?;
        let loaded = read_verdicts(verdicts)?;
        let states: BTreeMap<String, VerdictState> = self
            .absorb(verdicts, loaded)
            .into_iter()
            .map(|v| (v.sample_id, v.state))
            .collect();
        let loaded = read_jsonl_file(repairs, &["sample_id", "modality", "pre_text", "post_text"], |_: &RepairSubmission| {
            Ok(())
        })?;
        let submissions = self.absorb(repairs, loaded);
        let by_id: BTreeMap<&str, &SampleRecord> = samples.iter().map(|s| (s.id.as_str(), s)).collect();

        let mut jobs = Vec::new();
        for (i, repair) in submissions.iter().enumerate() {
            let Some(sample) = by_id.get(repair.sample_id.as_str()) else {
                self.data_error(format_args!("repair {}: unknown sample_id {:?}", i + 1, repair.sample_id));
                continue;
            };
            match states.get(&repair.sample_id) {
                Some(VerdictState::Pending) => jobs.push((*sample, repair)),
                Some(state) => self.data_error(format_args!(
                    "repair {}: sample {:?} is {}, not pending",
                    i + 1,
                    repair.sample_id,
                    state.as_str()
                )),
                None => self.data_error(format_args!("repair {}: no verdict for sample {:?}", i + 1, repair.sample_id)),
            }
        }
        let config = &self.config;
        let results = map_ordered(&jobs, self.parallelism, |(s, r)| quality_gates(s, r, config));
        let mut outcomes: Vec<GateOutcome> = Vec::new();
        for result in results {
            match result {
                Ok(o) => outcomes.push(o),
                Err(e) => self.data_error(e),
            }
        }
        write_jsonl(output, &outcomes)?;
        let admitted = outcomes.iter().filter(|o| o.admitted).count();
        let _ = writeln!(self.out, "{admitted} of {} repairs admitted", outcomes.len());
        Ok(())
    }

    fn dpcs(&mut self, input: &Path, output: &Path, semantic: Option<&Path>) -> anyhow::Result<()> {
        let samples = self.corpus(input)?;
        let mut external = BTreeMap::new();
        if let Some(path) = semantic {
            let loaded = read_jsonl_file(path, &["sample_id", "score"], |s: &SemanticScore| {
                if (0.0..=1.0).contains(&s.score) {
                    Ok(())
                } else {
                    Err(format!("score {} outside [0, 1]", s.score))
                }
            })?;
            external = self.absorb(path, loaded).into_iter().map(|s| (s.sample_id, s.score)).collect();
        }
        let config = &self.config;
        let scores = map_ordered(&samples, self.parallelism, |s| dpcs(s, external.get(&s.id).copied(), config));
        let mut lines = Vec::new();
        for (sample, score) in samples.iter().zip(scores) {
            match score {
                Ok(score) => lines.push(DpcsLine {
                    sample_id: sample.id.clone(),
                    score,
                }),
                Err(e) => self.data_error(e),
            }
        }
        write_jsonl(output, &lines)?;
        let _ = writeln!(self.out, "{} scores written to {}", lines.len(), output.display());
        Ok(())
    }

    fn rewards(&mut self, input: &Path, output: &Path) -> anyhow::Result<()> {
        let samples = self.corpus(input)?;
        let arity = ArityTable::with_overrides(&self.config.latex_arity);
        let (constants, structure_only) = (self.config.rewards, self.config.teds_structure_only);
        let per_sample = map_ordered(&samples, self.parallelism, |s| {
            s.reference.as_ref().map(|r| {
                s.candidates
                    .iter()
                    .map(|c| reward_vector_with(&c.markdown, &r.markdown, &constants, &arity, structure_only))
                    .collect::<Vec<_>>()
            })
        });
        let mut lines = Vec::new();
        for (sample, rewards) in samples.iter().zip(&per_sample) {
            let Some(rewards) = rewards else {
                self.data_error(format_args!("sample {:?} has no reference annotation", sample.id));
                continue;
            };
            for (c, rv) in sample.candidates.iter().zip(rewards) {
                lines.push(RewardLine {
                    prompt_id: &sample.id,
                    source_id: &c.source_id,
                    rewards: *rv,
                });
            }
        }
        write_jsonl(output, &lines)?;
        let _ = writeln!(self.out, "{} reward vectors written to {}", lines.len(), output.display());
        Ok(())
    }

    fn gdpo(&mut self, input: &Path, output: &Path) -> anyhow::Result<()> {
        let loaded = read_jsonl_file(input, &["prompt_id", "rewards"], |_: &Value| Ok(()))?;
        let raw = self.absorb(input, loaded);
        // Groups in order of first appearance; rollouts keep file order.
        let mut order: Vec<String> = Vec::new();
        let mut groups: BTreeMap<String, Vec<Rollout>> = BTreeMap::new();
        for (i, value) in raw.into_iter().enumerate() {
            let line: RolloutLine = match serde_json::from_value(value.clone()) {
                Ok(l) => l,
                Err(e) => {
                    self.data_error(format_args!("{}: rollout {}: {e}", input.display(), i + 1));
                    continue;
                }
            };
            let Value::Object(map) = value else { unreachable!("checked by reader") };
            if !groups.contains_key(&line.prompt_id) {
                order.push(line.prompt_id.clone());
            }
            groups.entry(line.prompt_id).or_default().push((map, line.rewards));
        }
        let mut kept = Vec::new();
        for id in order {
            let members = groups.remove(&id).unwrap_or_default();
            if members.len() < 2 {
                self.data_error(format_args!("group {id:?} has {} rollout, need at least 2", members.len()));
                continue;
            }
            kept.push((id, members));
        }
        let batch: Vec<RolloutGroup> = kept
            .iter()
            .map(|(id, m)| RolloutGroup {
                prompt_id: id.clone(),
                rollouts: m.iter().map(|(_, r)| *r).collect(),
            })
            .collect();
        let advantages = compute_advantages(&batch, &self.config.gdpo_weights, self.config.rewards.epsilon)
            .map_err(|e| anyhow!("{e}"))?;
        let mut lines = Vec::new();
        for ((_, members), advs) in kept.into_iter().zip(advantages.groups) {
            for ((input, _), a) in members.into_iter().zip(advs) {
                let [text, formula, table, structure] = a.per_dimension;
                lines.push(AdvantageLine {
                    input,
                    per_dimension: DimensionAdvantages {
                        text,
                        formula,
                        table,
                        structure,
                    },
                    sum: a.sum,
                    rescaled: a.rescaled,
                    baseline: a.baseline,
                });
            }
        }
        write_jsonl(output, &lines)?;
        let _ = writeln!(self.out, "{} advantages written to {}", lines.len(), output.display());
        Ok(())
    }

    fn diagnose(&mut self, verdicts: &Path, output: &Path, report_path: Option<&Path>) -> anyhow::Result<()> {
        let loaded = read_verdicts(verdicts)?;
        let verdicts_list = self.absorb(verdicts, loaded);
        if verdicts_list.is_empty() {
            bail!("{}: no verdicts to diagnose", verdicts.display());
        }
        let doc = DiagnosisDoc {
            verdicts: verdicts_list.len(),
            profile: aggregate_weakness(&verdicts_list).map_err(|e| anyhow!("{e}"))?,
            raw: raw_weakness(&verdicts_list).map_err(|e| anyhow!("{e}"))?,
        };
        let mut json = serde_json::to_string_pretty(&doc)?;
        json.push('\n');
        std::fs::write(output, json).with_context(|| format!("writing {}", output.display()))?;
        let text = report(&verdicts_list).render_text();
        match report_path {
            Some(p) => std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?,
            None => write!(self.out, "{text}")?,
        }
        Ok(())
    }

    fn report(&mut self, verdicts: &Path, json: bool) -> anyhow::Result<()> {
        let loaded = read_verdicts(verdicts)?;
        let list: Vec<VerdictRecord> = self.absorb(verdicts, loaded);
        let r = report(&list);
        if json {
            writeln!(self.out, "{}", serde_json::to_string_pretty(&r)?)?;
        } else {
            write!(self.out, "{}", r.render_text())?;
        }
        Ok(())
    }

    fn augment(
        &mut self,
        input: Option<&Path>,
        plan_size: usize,
        profile_path: Option<&Path>,
        template_ids: &[String],
        emit: &Path,
        provenance_path: Option<&Path>,
    ) -> anyhow::Result<()> {
        let profile = match profile_path {
            Some(p) => read_profile(p)?,
            None => WeaknessProfile::default(),
        };
        let templates = template_ids
            .iter()
            .map(|id| Template::parse(id).map_err(|e| anyhow!("{e}")))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let seed = self.config.seed;
        let mut pool = match input {
            Some(path) => self.corpus(path)?,
            None => Vec::new(),
        };
        if input.is_none() || !templates.is_empty() {
            let templates = if templates.is_empty() { Template::defaults() } else { templates };
            let specs: Vec<(usize, &Template)> = (0..plan_size.max(1)).map(|i| (i, &templates[i % templates.len()])).collect();
            pool.extend(map_ordered(&specs, self.parallelism, |(i, t)| {
                synthesize_from_template(t, stream_seed(seed, &t.to_string(), *i as u64))
            }));
        }
        let ids: Vec<&str> = pool.iter().map(|s| s.id.as_str()).collect();
        let plan = sample_plan(&profile, &ids, plan_size, seed);
        let generated = augment_pool(&pool, &plan);
        let config = &self.config;
        let verdicts = map_ordered(&generated, self.parallelism, |g| g.record.as_ref().map(|r| route(r, config)));

        let mut admitted = Vec::new();
        let mut sidecar: Vec<Provenance> = Vec::with_capacity(generated.len());
        for (g, verdict) in generated.into_iter().zip(verdicts) {
            let mut prov = g.provenance;
            if let (Some(record), Some(v)) = (g.record, verdict) {
                prov.state = Some(v.state);
                if v.state == VerdictState::Pass {
                    prov.status = ProvenanceStatus::Admitted;
                    admitted.push(record);
                } else {
                    prov.status = ProvenanceStatus::Rejected;
                }
            }
            sidecar.push(prov);
        }
        let side_path = provenance_path.map(Path::to_path_buf).unwrap_or_else(|| {
            let mut name = emit.as_os_str().to_owned();
            name.push(".provenance.jsonl");
            PathBuf::from(name)
        });
        write_jsonl(emit, &admitted)?;
        write_jsonl(&side_path, &sidecar)?;
        let noop = sidecar.iter().filter(|p| p.status == ProvenanceStatus::NoOp).count();
        let _ = writeln!(
            self.out,
            "{} admitted, {} rejected, {} no-op; provenance in {}",
            admitted.len(),
            sidecar.len() - admitted.len() - noop,
            noop,
            side_path.display()
        );
        Ok(())
    }
}

/// Accepts a bare profile object or a `diagnose` output document.
fn read_profile(path: &Path) -> anyhow::Result<WeaknessProfile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let inner = value.get("profile").cloned().unwrap_or(value);
    let profile: WeaknessProfile =
        serde_json::from_value(inner).with_context(|| format!("{} is not a weakness profile", path.display()))?;
    if profile.as_array().iter().any(|w| !(0.0..=1.0).contains(w)) {
        bail!("{}: weights must lie in [0, 1]", path.display());
    }
    Ok(profile)
}
