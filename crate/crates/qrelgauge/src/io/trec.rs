//! The standard whitespace-separated exchange formats: 6-column run files,
//! 4-column qrels, and the 3-column metadata TSV.

use std::collections::BTreeMap;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::io::ParseDiagnostics;
use crate::model::{DocId, DocMeta, Qrels, QueryId, Run, Strictness};

fn malformed(
    mode: Strictness,
    diagnostics: &mut ParseDiagnostics,
    line_no: u64,
    message: String,
) -> Result<()> {
    match mode {
        Strictness::Strict => Err(Error::Parse {
            line: line_no,
            message,
        }),
        Strictness::Lenient => {
            diagnostics.skip();
            diagnostics.warn(line_no, message);
            Ok(())
        }
    }
}

/// Parses a run file: `qid Q0 docid rank score tag` per line.
///
/// The system id is the tag of the first line; ranks in the file are
/// ignored and recomputed from the canonical order. Malformed lines are
/// an error in strict mode and a skip-plus-warning in lenient mode.
/// Duplicate documents and mixed tags are errors in either mode.
pub fn parse_run<R: BufRead>(reader: R, mode: Strictness) -> Result<(Run, ParseDiagnostics)> {
    let mut diagnostics = ParseDiagnostics::default();
    let mut tag: Option<String> = None;
    let mut rankings: BTreeMap<QueryId, BTreeMap<DocId, f64>> = BTreeMap::new();
    let mut line_no = 0u64;

    for line in reader.lines() {
        let line = line?;
        line_no += 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            diagnostics.skip();
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 6 {
            malformed(
                mode,
                &mut diagnostics,
                line_no,
                format!("expected 6 fields, found {}", fields.len()),
            )?;
            continue;
        }
        let score: f64 = match fields[4].parse() {
            Ok(s) if f64::is_finite(s) => s,
            _ => {
                malformed(
                    mode,
                    &mut diagnostics,
                    line_no,
                    format!("invalid score `{}`", fields[4]),
                )?;
                continue;
            }
        };
        match &tag {
            None => tag = Some(fields[5].to_string()),
            Some(t) if t != fields[5] => {
                return Err(Error::MixedRunTags {
                    expected: t.clone(),
                    found: fields[5].to_string(),
                    line: line_no,
                });
            }
            Some(_) => {}
        }
        let query = fields[0].to_string();
        let doc = fields[2].to_string();
        let per_query = rankings.entry(query.clone()).or_default();
        if per_query.contains_key(&doc) {
            return Err(Error::DuplicateDoc { query, doc });
        }
        per_query.insert(doc, score);
        diagnostics.accept();
    }

    let tag = tag.ok_or(Error::Parse {
        line: line_no,
        message: "run file contains no entries".into(),
    })?;
    let rankings = rankings
        .into_iter()
        .map(|(q, docs)| (q, docs.into_iter().collect::<Vec<_>>()))
        .collect();
    let run = Run::new(tag, rankings)?;
    Ok((run, diagnostics))
}

/// Emits a run in canonical order with recomputed 1-based ranks. Scores
/// keep full precision so a parse of the output reproduces the run.
pub fn emit_run(run: &Run) -> String {
    let mut out = String::new();
    for query in run.queries().map(str::to_string).collect::<Vec<_>>() {
        let list = run.ranking(&query).expect("query listed by the run");
        for (i, (doc, score)) in list.iter().enumerate() {
            out.push_str(&format!(
                "{query} Q0 {doc} {rank} {score} {tag}\n",
                rank = i + 1,
                tag = run.system_id()
            ));
        }
    }
    out
}

/// Parses qrels: `qid 0 docid grade` per line (second column ignored).
///
/// A repeated (query, doc) pair with the same grade is deduplicated with
/// a warning; a conflicting grade is an error in either mode.
pub fn parse_qrels<R: BufRead>(reader: R, mode: Strictness) -> Result<(Qrels, ParseDiagnostics)> {
    let mut diagnostics = ParseDiagnostics::default();
    let mut qrels = Qrels::new();
    let mut line_no = 0u64;

    for line in reader.lines() {
        let line = line?;
        line_no += 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            diagnostics.skip();
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 4 {
            malformed(
                mode,
                &mut diagnostics,
                line_no,
                format!("expected 4 fields, found {}", fields.len()),
            )?;
            continue;
        }
        let grade: u32 = match fields[3].parse::<i64>() {
            Ok(g) if g >= 0 && g <= u32::MAX as i64 => g as u32,
            Ok(g) => {
                malformed(
                    mode,
                    &mut diagnostics,
                    line_no,
                    format!("grade {g} out of range"),
                )?;
                continue;
            }
            Err(_) => {
                malformed(
                    mode,
                    &mut diagnostics,
                    line_no,
                    format!("invalid grade `{}`", fields[3]),
                )?;
                continue;
            }
        };
        if qrels.insert(fields[0], fields[2], grade)? {
            diagnostics.accept();
        } else {
            diagnostics.skip();
            diagnostics.warn(line_no, format!("duplicate judgment for `{} {}`", fields[0], fields[2]));
        }
    }

    if qrels.is_empty() {
        diagnostics.warn(line_no, "no judgments parsed".to_string());
    }
    Ok((qrels, diagnostics))
}

/// Emits qrels sorted by (query, doc).
pub fn emit_qrels(qrels: &Qrels) -> String {
    let mut out = String::new();
    for (query, doc, grade) in qrels.iter() {
        out.push_str(&format!("{query} 0 {doc} {grade}\n"));
    }
    out
}

/// Parses the metadata TSV: `docid<TAB>popularity<TAB>length`. A header
/// line is detected by non-numeric count fields and skipped. Negative
/// counts are a range error in strict mode.
pub fn parse_doc_meta<R: BufRead>(
    reader: R,
    mode: Strictness,
) -> Result<(DocMeta, ParseDiagnostics)> {
    let mut diagnostics = ParseDiagnostics::default();
    let mut meta = DocMeta::new();
    let mut line_no = 0u64;
    let mut saw_data = false;

    for line in reader.lines() {
        let line = line?;
        line_no += 1;
        let trimmed = line.trim_end();
        if trimmed.trim().is_empty() {
            diagnostics.skip();
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
        if fields.len() != 3 {
            malformed(
                mode,
                &mut diagnostics,
                line_no,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            )?;
            continue;
        }
        let parsed: (std::result::Result<i64, _>, std::result::Result<i64, _>) =
            (fields[1].parse(), fields[2].parse());
        let (popularity, length) = match parsed {
            (Ok(p), Ok(l)) => (p, l),
            _ if !saw_data => {
                // Header row.
                diagnostics.skip();
                continue;
            }
            _ => {
                malformed(
                    mode,
                    &mut diagnostics,
                    line_no,
                    format!("non-numeric counts `{}` `{}`", fields[1], fields[2]),
                )?;
                continue;
            }
        };
        if popularity < 0 || length < 0 {
            match mode {
                Strictness::Strict => {
                    return Err(Error::Range(format!(
                        "line {line_no}: negative count for doc `{}`",
                        fields[0]
                    )))
                }
                Strictness::Lenient => {
                    diagnostics.skip();
                    diagnostics.warn(line_no, format!("negative count for doc `{}`", fields[0]));
                    continue;
                }
            }
        }
        saw_data = true;
        if meta.insert(fields[0], popularity as u64, length as u64)? {
            diagnostics.accept();
        } else {
            diagnostics.skip();
            diagnostics.warn(line_no, format!("duplicate metadata for `{}`", fields[0]));
        }
    }
    Ok((meta, diagnostics))
}

/// Emits the metadata TSV with a header row.
pub fn emit_doc_meta(meta: &DocMeta) -> String {
    let mut out = String::from("docid\tpopularity\tlength\n");
    for (doc, popularity, length) in meta.iter() {
        out.push_str(&format!("{doc}\t{popularity}\t{length}\n"));
    }
    out
}
