use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::Args;
use ncdial::corpus::DialogueExample;
use ncdial::decoding::DecodeResponse;
use ncdial::metrics::{combined, compare, evaluate, EvalReport, EvalTurn, MetricOptions, RequestableSlotSet};
use ncdial::models::Role;
use serde::{Deserialize, Serialize};

use crate::artifact::{
    ensure_writable, file_sha256, load_examples, model_file, read_json, read_jsonl, write_json, DataManifest,
    DecodeRecord, RunStamp,
};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::Context;

#[derive(Debug, Clone, Default, Args)]
pub struct EvalArgs {
    /// Decode results file.
    #[arg(long)]
    pub results: PathBuf,
    /// Reference corpus [default: the decode split].
    #[arg(long)]
    pub references: Option<PathBuf>,
    /// Second results file; adds significance tests against it.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Report file [default: <out>/eval/<results>.json].
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Permutation test trials.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub split: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalArtifact {
    pub run: RunStamp,
    pub config: serde_json::Value,
    pub model_sha256: BTreeMap<String, String>,
    pub results: String,
    pub report: EvalReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_report: Option<EvalReport>,
}

/// Pairs decoded turns with their references. Every reference turn needs a
/// result and vice versa.
pub fn pair_turns(results: &[DecodeResponse], references: &[DialogueExample]) -> Result<Vec<EvalTurn>, CliError> {
    let by_key: BTreeMap<(&str, usize), &DialogueExample> =
        references.iter().map(|e| ((e.dialogue_id.as_str(), e.turn_index), e)).collect();
    let got: BTreeSet<(&str, usize)> = results.iter().map(|r| (r.dialogue_id.as_str(), r.turn_index)).collect();
    let unknown: Vec<String> = got
        .iter()
        .filter(|k| !by_key.contains_key(*k))
        .map(|(d, t)| format!("{d}#{t}"))
        .collect();
    let missing: Vec<String> = by_key
        .keys()
        .filter(|k| !got.contains(*k))
        .map(|(d, t)| format!("{d}#{t}"))
        .collect();
    if !unknown.is_empty() || !missing.is_empty() {
        let mut msg = String::from("results and references disagree;");
        if !missing.is_empty() {
            msg.push_str(&format!(" missing results for {}", missing.join(", ")));
        }
        if !unknown.is_empty() {
            msg.push_str(&format!(" no reference for {}", unknown.join(", ")));
        }
        return Err(CliError::Data(msg));
    }
    if got.len() != results.len() {
        return Err(CliError::Data("results contain duplicate turns".into()));
    }
    Ok(results
        .iter()
        .map(|r| {
            let ex = by_key[&(r.dialogue_id.as_str(), r.turn_index)];
            EvalTurn {
                dialogue_id: r.dialogue_id.clone(),
                turn_index: r.turn_index,
                decoded_belief: r.belief.clone(),
                gt_belief: ex.belief.clone(),
                decoded_response: r.response_delex.clone(),
                gt_response: ex.response_delex.clone(),
                flagged: !r.flags.is_empty(),
            }
        })
        .collect())
}

/// Metric options from the config, falling back to the data manifest.
pub fn metric_options(cfg: &RunConfig) -> Result<MetricOptions, CliError> {
    let manifest = || -> Result<DataManifest, CliError> { read_json(&cfg.paths.manifest_file()) };
    let names = match &cfg.eval.name_placeholders {
        Some(n) => n.clone(),
        None => manifest()?.name_placeholders,
    };
    let requestables = match &cfg.eval.requestables {
        Some(r) => r.clone(),
        None => manifest()?.requestables,
    };
    Ok(MetricOptions {
        name_placeholders: names,
        requestables: RequestableSlotSet::new(requestables),
        repetition: cfg.eval.repetition,
    })
}

pub fn load_results(path: &Path) -> Result<Vec<DecodeResponse>, CliError> {
    Ok(read_jsonl::<DecodeRecord>(path)?.into_iter().map(|r| r.response).collect())
}

fn check_report(r: &EvalReport) -> Result<(), CliError> {
    let c = combined(r.inform_rate, r.success_rate, r.bleu);
    if c != r.combined {
        return Err(CliError::Internal(format!("combined score {} does not match recomputed {c}", r.combined)));
    }
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem().unwrap_or(p.as_os_str()).to_string_lossy().into_owned()
}

pub fn run(ctx: &mut Context, args: &EvalArgs) -> Result<String, CliError> {
    if let Some(t) = args.trials {
        ctx.config.eval.trials = t;
    }
    if let Some(s) = &args.split {
        ctx.config.decode.split = s.clone();
    }
    let cfg = &ctx.config;
    let output = args.output.clone().unwrap_or_else(|| {
        let name = match &args.compare {
            Some(c) => format!("{}-vs-{}.json", stem(&args.results), stem(c)),
            None => format!("{}.json", stem(&args.results)),
        };
        cfg.paths.out.join("eval").join(name)
    });
    ensure_writable(std::slice::from_ref(&output), ctx.force)?;

    let refs_path = args.references.clone().unwrap_or_else(|| cfg.paths.split_file(&cfg.decode.split));
    let references = load_examples(&refs_path)?;
    let options = metric_options(cfg)?;
    let database = ncdial::corpus::load_database(cfg.paths.database_file())?;

    let turns = pair_turns(&load_results(&args.results)?, &references)
        .map_err(|e| e.context(args.results.display()))?;
    let mut report = evaluate(&turns, &database, &options)?;
    check_report(&report)?;
    let compare_report = match &args.compare {
        Some(path) => {
            let other = pair_turns(&load_results(path)?, &references).map_err(|e| e.context(path.display()))?;
            let other_report = evaluate(&other, &database, &options)?;
            check_report(&other_report)?;
            report.p_values = compare(&turns, &other, &report, &other_report, cfg.eval.trials, cfg.seed)?;
            Some(other_report)
        }
        None => None,
    };

    let models = cfg.paths.models_dir();
    let mut model_sha256 = BTreeMap::new();
    for role in Role::ALL {
        let p = model_file(&models, role);
        if p.exists() {
            model_sha256.insert(role.to_string(), file_sha256(&p)?);
        }
    }
    let artifact = EvalArtifact {
        run: RunStamp::new(cfg),
        config: cfg.echo(),
        model_sha256,
        results: stem(&args.results),
        report,
        compare: args.compare.as_deref().map(stem),
        compare_report,
    };
    write_json(&output, &artifact)?;
    let r = &artifact.report;
    Ok(format!(
        "inform {:.2} success {:.2} bleu {:.2} ter {:.4} combined {:.2} -> {}",
        r.inform_rate,
        r.success_rate,
        r.bleu,
        r.ter,
        r.combined,
        output.display()
    ))
}
