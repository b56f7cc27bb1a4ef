//! Readers and writers for the two corpus formats.
//!
//! Two-column TSV: one `token<TAB>tag` per line, blank line between
//! sentences (the ARK layout). CoNLL-U: ten tab-separated columns per
//! token line; the reader takes FORM (column 2) and UPOS (column 4),
//! skipping comments, multiword-token ranges, and empty nodes. Parallel
//! pairs travel as three-column TSV `token<TAB>y_tag<TAB>z_tag`.

use std::path::Path;

use crate::corpus::types::{ParallelPair, Sentence, Side, Tagset};
use crate::error::{Error, Result};

fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Parse two-column `token<TAB>tag` text. Tags are interned on `side` of
/// the given tagset; when `closed` is set, unknown tags are an error
/// instead.
pub fn parse_two_col(
    text: &str,
    path: &str,
    side: Side,
    tagset: &mut Tagset,
    closed: bool,
) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut tags: Vec<usize> = Vec::new();
    let mut flush = |tokens: &mut Vec<String>, tags: &mut Vec<usize>| {
        if !tokens.is_empty() {
            let mut s = Sentence {
                tokens: std::mem::take(tokens),
                y_tags: None,
                z_tags: None,
                source: path.to_string(),
            };
            match side {
                Side::Y => s.y_tags = Some(std::mem::take(tags)),
                Side::Z => s.z_tags = Some(std::mem::take(tags)),
            }
            sentences.push(s);
        }
    };
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            flush(&mut tokens, &mut tags);
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(parse_err(
                path,
                line_no,
                format!("expected 2 tab-separated fields, got {}", fields.len()),
            ));
        }
        let (token, tag) = (fields[0], fields[1]);
        if token.is_empty() || tag.is_empty() {
            return Err(parse_err(path, line_no, "empty token or tag"));
        }
        let id = if closed {
            tagset.id(tag).ok_or_else(|| {
                parse_err(path, line_no, format!("tag {tag:?} not in tagset {}", tagset.name))
            })?
        } else {
            tagset.intern(tag)
        };
        tokens.push(token.to_string());
        tags.push(id);
    }
    flush(&mut tokens, &mut tags);
    Ok(sentences)
}

/// Serialize sentences back to two-column TSV, reading tags from `side`.
pub fn write_two_col(sentences: &[Sentence], side: Side, tagset: &Tagset) -> Result<String> {
    let mut out = String::new();
    for s in sentences {
        let tags = s
            .tags(side)
            .ok_or_else(|| Error::Data(format!("sentence {:?} has no {side} tags", s.text())))?;
        for (tok, tag) in s.tokens.iter().zip(tags) {
            out.push_str(tok);
            out.push('\t');
            out.push_str(tagset.tag(*tag));
            out.push('\n');
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parse CoNLL-U text, keeping FORM and UPOS of basic token lines.
pub fn parse_conllu(
    text: &str,
    path: &str,
    side: Side,
    tagset: &mut Tagset,
    closed: bool,
) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut tags: Vec<usize> = Vec::new();
    let mut flush = |tokens: &mut Vec<String>, tags: &mut Vec<usize>| {
        if !tokens.is_empty() {
            let mut s = Sentence {
                tokens: std::mem::take(tokens),
                y_tags: None,
                z_tags: None,
                source: path.to_string(),
            };
            match side {
                Side::Y => s.y_tags = Some(std::mem::take(tags)),
                Side::Z => s.z_tags = Some(std::mem::take(tags)),
            }
            sentences.push(s);
        }
    };
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            flush(&mut tokens, &mut tags);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            return Err(parse_err(
                path,
                line_no,
                format!("expected 10 tab-separated columns, got {}", fields.len()),
            ));
        }
        // Multiword ranges (1-2) and empty nodes (1.1) are not surface tokens.
        let id_col = fields[0];
        if id_col.contains('-') || id_col.contains('.') {
            continue;
        }
        if id_col.parse::<usize>().is_err() {
            return Err(parse_err(path, line_no, format!("bad token id {id_col:?}")));
        }
        let (form, upos) = (fields[1], fields[3]);
        let id = if closed {
            tagset.id(upos).ok_or_else(|| {
                parse_err(path, line_no, format!("tag {upos:?} not in tagset {}", tagset.name))
            })?
        } else {
            tagset.intern(upos)
        };
        tokens.push(form.to_string());
        tags.push(id);
    }
    flush(&mut tokens, &mut tags);
    Ok(sentences)
}

/// Serialize sentences as minimal CoNLL-U: id, FORM and UPOS populated,
/// the remaining columns underscored.
pub fn write_conllu(sentences: &[Sentence], side: Side, tagset: &Tagset) -> Result<String> {
    let mut out = String::new();
    for s in sentences {
        let tags = s
            .tags(side)
            .ok_or_else(|| Error::Data(format!("sentence {:?} has no {side} tags", s.text())))?;
        for (i, (tok, tag)) in s.tokens.iter().zip(tags).enumerate() {
            out.push_str(&format!(
                "{}\t{}\t_\t{}\t_\t_\t_\t_\t_\t_\n",
                i + 1,
                tok,
                tagset.tag(*tag)
            ));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parse three-column `token<TAB>y_tag<TAB>z_tag` parallel pairs.
pub fn parse_pairs(
    text: &str,
    path: &str,
    y_tagset: &mut Tagset,
    z_tagset: &mut Tagset,
) -> Result<Vec<ParallelPair>> {
    let mut pairs = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut y: Vec<usize> = Vec::new();
    let mut z: Vec<usize> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            if !tokens.is_empty() {
                pairs.push(ParallelPair::new(
                    std::mem::take(&mut tokens),
                    std::mem::take(&mut y),
                    std::mem::take(&mut z),
                )?);
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(
                path,
                line_no,
                format!("expected 3 tab-separated fields, got {}", fields.len()),
            ));
        }
        tokens.push(fields[0].to_string());
        y.push(y_tagset.intern(fields[1]));
        z.push(z_tagset.intern(fields[2]));
    }
    if !tokens.is_empty() {
        pairs.push(ParallelPair::new(tokens, y, z)?);
    }
    Ok(pairs)
}

pub fn write_pairs(pairs: &[ParallelPair], y_tagset: &Tagset, z_tagset: &Tagset) -> String {
    let mut out = String::new();
    for p in pairs {
        for ((tok, y), z) in p.tokens.iter().zip(&p.y_tags).zip(&p.z_tags) {
            out.push_str(&format!("{tok}\t{}\t{}\n", y_tagset.tag(*y), z_tagset.tag(*z)));
        }
        out.push('\n');
    }
    out
}

/// Corpus file format, usually inferred from the extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    TwoCol,
    Conllu,
}

impl CorpusFormat {
    pub fn from_path(path: &Path) -> Option<CorpusFormat> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("txt") => Some(CorpusFormat::TwoCol),
            Some("conllu") | Some("conll") => Some(CorpusFormat::Conllu),
            _ => None,
        }
    }
}

/// Read and parse a corpus file in either format.
pub fn load_corpus(
    path: &Path,
    format: CorpusFormat,
    side: Side,
    tagset: &mut Tagset,
    closed: bool,
) -> Result<Vec<Sentence>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    match format {
        CorpusFormat::TwoCol => parse_two_col(&text, &name, side, tagset, closed),
        CorpusFormat::Conllu => parse_conllu(&text, &name, side, tagset, closed),
    }
}

/// One tag per line.
pub fn load_tagset(path: &Path, name: &str) -> Result<Tagset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let tags: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    Tagset::new(name, tags)
}
