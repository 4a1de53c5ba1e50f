//! Annotation and verification prompts on a terminal.

use std::io::{BufRead, Write};

use anyhow::Result;
use dualmatch_core::ontology::ClassRecord;
use dualmatch_core::{Engine, TraceEvent};

/// The same indicator value this many batches in a row suggests stopping.
const STABLE_RUN: usize = 3;

enum Reply {
    Label(bool),
    Quit,
}

fn describe(out: &mut impl Write, side: &str, class: &ClassRecord) -> Result<()> {
    writeln!(out, "  {side}: {} ({})", class.name, class.iri)?;
    if !class.label.is_empty() && class.label != class.name {
        writeln!(out, "    label:   {}", class.label)?;
    }
    if !class.comment.is_empty() {
        writeln!(out, "    comment: {}", class.comment)?;
    }
    Ok(())
}

fn show_pair(out: &mut impl Write, engine: &Engine, pair: usize) -> Result<()> {
    let ctx = engine.context();
    let cp = ctx.candidates.pairs[pair];
    describe(out, "source", ctx.source.schema.get(cp.source))?;
    describe(out, "target", ctx.target.schema.get(cp.target))?;
    Ok(())
}

/// Reads one reply. Empty input takes `default`; end of input quits.
fn ask(input: &mut impl BufRead, out: &mut impl Write, prompt: &str, default: bool) -> Result<Reply> {
    loop {
        write!(out, "{prompt} ")?;
        out.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Ok(Reply::Quit);
        }
        match line.trim().to_ascii_lowercase().as_str() {
            "" => return Ok(Reply::Label(default)),
            "y" | "yes" | "1" => return Ok(Reply::Label(true)),
            "n" | "no" | "0" => return Ok(Reply::Label(false)),
            "q" | "quit" => return Ok(Reply::Quit),
            other => writeln!(out, "unrecognized answer `{other}`; use y, n, q or enter")?,
        }
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "match"
    } else {
        "no match"
    }
}

/// Asks for every pair the engine selects until the budget or U runs out
/// or the user quits. A batch left half answered is discarded.
pub fn annotate(engine: &mut Engine, input: &mut impl BufRead, out: &mut impl Write) -> Result<()> {
    loop {
        let batch = engine.next_batch();
        if batch.items.is_empty() {
            break;
        }
        writeln!(
            out,
            "\nbatch {} ({} annotated, {} unlabeled, {} left in budget)",
            batch.index,
            engine.annotations().len(),
            engine.unlabeled_count(),
            engine.budget_remaining()
        )?;
        let mut answers = Vec::with_capacity(batch.items.len());
        for (i, item) in batch.items.iter().enumerate() {
            writeln!(out, "[{}/{}] pair {}", i + 1, batch.items.len(), item.pair)?;
            show_pair(out, engine, item.pair)?;
            let prompt = format!(
                "  predicted {} (p={:.2}); enter confirms, y/n revises, q stops:",
                yes_no(item.predicted),
                item.p
            );
            match ask(input, out, &prompt, item.predicted)? {
                Reply::Label(label) => answers.push((item.pair, label)),
                Reply::Quit => {
                    engine.finish();
                    return Ok(());
                }
            }
        }
        engine.submit(&answers)?;
        let history = engine.stop_history();
        let value = history.last().map_or(0, |h| h.1);
        write!(out, "annotated + predicted matches: {value}")?;
        if history.len() >= STABLE_RUN && history[history.len() - STABLE_RUN..].iter().all(|h| h.1 == value) {
            write!(out, " (unchanged for {STABLE_RUN} batches; consider stopping)")?;
        }
        writeln!(out)?;
    }
    engine.finish();
    Ok(())
}

/// Asks to accept or reject each remaining prediction, records the
/// decisions and returns the final alignment as candidate indices.
pub fn verify(engine: &mut Engine, input: &mut impl BufRead, out: &mut impl Write) -> Result<Vec<usize>> {
    let predicted = engine.finish();
    writeln!(out, "\n{} predicted matches to verify", predicted.len())?;
    let mut decisions = Vec::with_capacity(predicted.len());
    let mut quit = false;
    for (i, &pair) in predicted.iter().enumerate() {
        if quit {
            decisions.push((pair, false));
            continue;
        }
        writeln!(out, "[{}/{}] pair {} (p={:.2})", i + 1, predicted.len(), pair, engine.predictions()[pair].p)?;
        show_pair(out, engine, pair)?;
        match ask(input, out, "  accept? enter or y accepts, n rejects, q rejects the rest:", true)? {
            Reply::Label(accept) => decisions.push((pair, accept)),
            Reply::Quit => {
                quit = true;
                decisions.push((pair, false));
            }
        }
    }
    let mut alignment: Vec<usize> = engine.annotations().entries().iter().filter(|e| e.1).map(|e| e.0).collect();
    alignment.extend(decisions.iter().filter(|d| d.1).map(|d| d.0));
    alignment.sort_unstable();
    engine.record(TraceEvent::Verification { decisions });
    Ok(alignment)
}
