//! Line-oriented chat loop for inspecting the pipeline by hand.
//!
//! Each input line is either a user utterance or a command: `:reset`
//! clears the context, `:weights l1 l2 l3` changes the score weights and
//! `:quit` ends the session.

use std::io::{BufRead, Write};

use clap::Args;
use ncdial::corpus::{act_tokens, belief_tokens, db_tokens, lexicalize, Utterance};
use ncdial::decoding::{decode_turn, DecodeResult, ScoreBreakdown, ScoreWeights};

use crate::artifact::Workspace;
use crate::config::DecodeSettings;
use crate::error::CliError;
use crate::{Context, DecoderArgs};

#[derive(Debug, Clone, Default, Args)]
pub struct ChatArgs {
    #[command(flatten)]
    pub decoder: DecoderArgs,
}

pub struct ChatSession<'a> {
    ws: &'a Workspace,
    pub settings: DecodeSettings,
    pub context: Vec<Utterance>,
}

fn fmt_term(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

pub fn format_breakdown(s: &ScoreBreakdown) -> String {
    let w = &s.weights;
    format!(
        "combined {:.4} = direct {:.4} + {} * channel {} + {} * source {} + {} * length {}",
        s.combined,
        s.direct,
        w.lambda1,
        fmt_term(s.channel),
        w.lambda2,
        fmt_term(s.source),
        w.lambda3,
        s.length
    )
}

impl<'a> ChatSession<'a> {
    pub fn new(ws: &'a Workspace, settings: DecodeSettings) -> Self {
        Self { ws, settings, context: Vec::new() }
    }

    fn show(&self, r: &DecodeResult, out: &mut impl Write) -> std::io::Result<()> {
        let lex = lexicalize(&r.response_delex, &r.belief, &r.db, &self.ws.database, &self.ws.dict);
        writeln!(out, "belief: {}", belief_tokens(&r.belief).join(" "))?;
        writeln!(out, "db: {}", db_tokens(&r.db).join(" "))?;
        writeln!(out, "acts: {}", act_tokens(&r.acts).join(" "))?;
        writeln!(out, "response: {}", lex.join(" "))?;
        writeln!(out, "score: {}", format_breakdown(r.score()))?;
        if !r.flags.is_empty() {
            let names: Vec<String> =
                r.flags.iter().map(|f| serde_json::to_string(f).unwrap_or_default().replace('"', "")).collect();
            writeln!(out, "flags: {}", names.join(", "))?;
        }
        Ok(())
    }

    /// Handles one input line. Returns false once the session should end.
    pub fn handle(&mut self, line: &str, out: &mut impl Write) -> Result<bool, CliError> {
        let line = line.trim();
        if line.is_empty() {
            return Ok(true);
        }
        writeln!(out, "> {line}")?;
        if let Some(cmd) = line.strip_prefix(':') {
            let mut parts = cmd.split_whitespace();
            match parts.next() {
                Some("quit") => return Ok(false),
                Some("reset") => {
                    self.context.clear();
                    writeln!(out, "context cleared")?;
                }
                Some("weights") => {
                    let vals: Result<Vec<f64>, _> = parts.map(str::parse).collect();
                    match vals.as_deref() {
                        Ok(&[a, b, c]) if [a, b, c].iter().all(|v| v.is_finite()) => {
                            self.settings.weights = ScoreWeights::new(a, b, c);
                            writeln!(out, "weights set to ({a}, {b}, {c})")?;
                        }
                        _ => writeln!(out, "usage: :weights l1 l2 l3")?,
                    }
                }
                _ => writeln!(out, "unknown command; use :reset, :weights l1 l2 l3 or :quit")?,
            }
            return Ok(true);
        }
        self.context.push(Utterance::user(line));
        let s = &self.settings;
        match decode_turn(&self.context, &self.ws.turn_models(), s.decoder, &s.weights, &s.beam, &self.ws.database) {
            Ok(r) => {
                self.show(&r, out)?;
                self.context.push(Utterance::system(r.response_delex.join(" ")));
            }
            Err(e) => {
                self.context.pop();
                writeln!(out, "error: {e}")?;
            }
        }
        Ok(true)
    }
}

/// Runs a session until `:quit` or end of input.
pub fn run_session<R: BufRead, W: Write>(
    session: &mut ChatSession<'_>,
    input: R,
    out: &mut W,
) -> Result<(), CliError> {
    let s = &session.settings;
    writeln!(
        out,
        "chat with the {} decoder, weights ({}, {}, {}); commands :reset, :weights l1 l2 l3, :quit",
        s.decoder, s.weights.lambda1, s.weights.lambda2, s.weights.lambda3
    )?;
    for line in input.lines() {
        if !session.handle(&line?, out)? {
            break;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn run<R: BufRead, W: Write>(ctx: &mut Context, args: &ChatArgs, input: R, out: &mut W) -> Result<(), CliError> {
    args.decoder.apply(&mut ctx.config.decode)?;
    ctx.config.decode.beam.seed = ctx.config.seed;
    let ws = Workspace::load(&ctx.config)?;
    ctx.config.decode.beam.validate(ws.vocab.len())?;
    let mut session = ChatSession::new(&ws, ctx.config.decode.clone());
    run_session(&mut session, input, out)
}
