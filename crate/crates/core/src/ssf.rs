//! Reader for Shakti Standard Format (SSF) shallow-parser output.
//!
//! SSF is a column format: an optional address column, the surface form,
//! the POS tag and a `<fs ...>` feature structure whose `af` attribute
//! carries `root,category,gender,number,person,case,tam,suffix`.
//!
//! ```text
//! <Sentence id="1">
//! 1       ((      NP      <fs af='rAmu,n,m,sg,3,d,0,0' name='NP'>
//! 1.1     rAmu    NNP     <fs af='rAmu,n,m,sg,3,d,0,0' name='rAmu'>
//!         ))
//! </Sentence>
//! ```
//!
//! Chunk brackets are kept as structure; only leaf lines become tokens.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SsfError {
    #[error("line {line_no}: malformed token line: {reason}")]
    MalformedLine { line_no: usize, reason: String },
    #[error("af value has {found} comma fields, at least 5 are required")]
    TooFewFields { found: usize },
}

/// Grammatical gender as tagged by the morphological analyser.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gender {
    #[default]
    Any,
    Male,
    Female,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Number {
    #[default]
    Zero,
    Singular,
    Plural,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Person {
    #[default]
    None,
    First,
    Second,
    Third,
}

impl Gender {
    pub const ALL: [Gender; 3] = [Gender::Any, Gender::Male, Gender::Female];

    /// Decodes an SSF gender code. Unknown codes degrade to `Any`.
    pub fn from_code(code: &str) -> Self {
        match code.trim() {
            "m" => Gender::Male,
            "f" => Gender::Female,
            _ => Gender::Any,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Gender::Any => "any",
            Gender::Male => "m",
            Gender::Female => "f",
        }
    }
}

impl Number {
    pub const ALL: [Number; 3] = [Number::Zero, Number::Singular, Number::Plural];

    pub fn from_code(code: &str) -> Self {
        match code.trim() {
            "sg" => Number::Singular,
            "pl" => Number::Plural,
            _ => Number::Zero,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Number::Zero => "",
            Number::Singular => "sg",
            Number::Plural => "pl",
        }
    }
}

impl Person {
    pub const ALL: [Person; 4] = [Person::None, Person::First, Person::Second, Person::Third];

    pub fn from_code(code: &str) -> Self {
        match code.trim() {
            "1" => Person::First,
            "2" => Person::Second,
            "3" => Person::Third,
            _ => Person::None,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Person::None => "",
            Person::First => "1",
            Person::Second => "2",
            Person::Third => "3",
        }
    }
}

macro_rules! code_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.code())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let code = String::deserialize(d)?;
                Ok(<$ty>::from_code(&code))
            }
        }
    };
}

code_serde!(Gender);
code_serde!(Number);
code_serde!(Person);

/// Gender, number and person agreement features.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct MorphFeatures {
    pub gender: Gender,
    pub number: Number,
    pub person: Person,
}

impl MorphFeatures {
    pub fn new(gender: Gender, number: Number, person: Person) -> Self {
        MorphFeatures {
            gender,
            number,
            person,
        }
    }
}

/// Decoded `af` attribute.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureStructure {
    pub root: String,
    pub category: String,
    pub morph: MorphFeatures,
    pub name: Option<String>,
    /// The `af` value exactly as it appeared in the input.
    pub raw_af: String,
}

/// Decodes an `af` value such as `unDu,v,m,sg,3,,A,A`.
pub fn parse_fs_attribute(af: &str) -> Result<FeatureStructure, SsfError> {
    let fields: Vec<&str> = af.split(',').collect();
    if fields.len() < 5 {
        return Err(SsfError::TooFewFields {
            found: fields.len(),
        });
    }
    Ok(FeatureStructure {
        root: fields[0].to_string(),
        category: fields[1].to_string(),
        morph: MorphFeatures {
            gender: Gender::from_code(fields[2]),
            number: Number::from_code(fields[3]),
            person: Person::from_code(fields[4]),
        },
        name: None,
        raw_af: af.to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SsfToken {
    /// 1-based position within the sentence.
    pub index: usize,
    pub form: String,
    pub pos: String,
    /// `None` when the line carried no `<fs>` or no usable `af`.
    pub fs: Option<FeatureStructure>,
    /// Address column, when present (e.g. `1.1`).
    pub address: Option<String>,
    /// The feature-structure column verbatim, re-emitted on serialization.
    pub raw_fs: Option<String>,
}

impl SsfToken {
    pub fn morph(&self) -> MorphFeatures {
        self.fs.as_ref().map(|fs| fs.morph).unwrap_or_default()
    }
}

/// A chunk bracket `(( NP ... ))` covering tokens `[start, end)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chunk {
    pub tag: String,
    pub start: usize,
    pub end: usize,
    pub address: Option<String>,
    pub raw_fs: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SsfSentence {
    pub id: Option<String>,
    pub tokens: Vec<SsfToken>,
    pub chunks: Vec<Chunk>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SsfDocument {
    pub sentences: Vec<SsfSentence>,
    /// Lines skipped in lenient mode.
    pub warnings: Vec<SsfError>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ParseMode {
    #[default]
    Lenient,
    Strict,
}

impl FromStr for ParseMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lenient" => Ok(ParseMode::Lenient),
            "strict" => Ok(ParseMode::Strict),
            other => Err(format!("unknown parse mode `{other}`")),
        }
    }
}

struct SentenceBuilder {
    sentence: SsfSentence,
    open_chunks: Vec<usize>,
}

impl SentenceBuilder {
    fn new(id: Option<String>) -> Self {
        SentenceBuilder {
            sentence: SsfSentence {
                id,
                ..SsfSentence::default()
            },
            open_chunks: Vec::new(),
        }
    }

    fn is_empty(&self) -> bool {
        self.sentence.tokens.is_empty() && self.sentence.chunks.is_empty()
    }

    fn finish(mut self) -> SsfSentence {
        let len = self.sentence.tokens.len();
        for idx in self.open_chunks.drain(..) {
            self.sentence.chunks[idx].end = len;
        }
        self.sentence
    }
}

/// Parses a whole SSF document into sentences.
///
/// Sentences are delimited by `<Sentence>` tags or blank lines. Other
/// `<...>` tags (`<document>`, `<body>`, ...) and `#` comments are ignored.
pub fn parse_ssf_document(text: &str, mode: ParseMode) -> Result<SsfDocument, SsfError> {
    let mut doc = SsfDocument::default();
    let mut current: Option<SentenceBuilder> = None;

    fn flush(doc: &mut SsfDocument, current: &mut Option<SentenceBuilder>) {
        if let Some(builder) = current.take() {
            if !builder.is_empty() {
                doc.sentences.push(builder.finish());
            }
        }
    }

    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim_end_matches(['\r', '\n']);
        let trimmed = line.trim();

        if trimmed.is_empty() {
            flush(&mut doc, &mut current);
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }
        if trimmed.starts_with("</") {
            if trimmed.to_ascii_lowercase().starts_with("</sentence") {
                flush(&mut doc, &mut current);
            }
            continue;
        }
        if trimmed.starts_with('<') && !trimmed.starts_with("<fs") {
            if trimmed.to_ascii_lowercase().starts_with("<sentence") {
                flush(&mut doc, &mut current);
                let id = attribute_value(trimmed, "id");
                current = Some(SentenceBuilder::new(id));
            }
            continue;
        }

        let builder = current.get_or_insert_with(|| SentenceBuilder::new(None));
        let outcome = parse_line(line, line_no, builder).and_then(|soft| match (soft, mode) {
            (Some(err), ParseMode::Strict) => Err(err),
            (soft, _) => Ok(soft),
        });
        match outcome {
            Ok(None) => {}
            Ok(Some(warning)) => doc.warnings.push(warning),
            Err(err) => match mode {
                ParseMode::Strict => return Err(err),
                ParseMode::Lenient => doc.warnings.push(err),
            },
        }
    }
    flush(&mut doc, &mut current);
    Ok(doc)
}

fn is_address(s: &str) -> bool {
    !s.is_empty()
        && s.split('.')
            .all(|part| !part.is_empty() && part.bytes().all(|b| b.is_ascii_digit()))
}

/// Returns `Ok(Some(_))` for a recoverable problem: the token is kept but
/// its feature structure is dropped.
fn parse_line(
    line: &str,
    line_no: usize,
    builder: &mut SentenceBuilder,
) -> Result<Option<SsfError>, SsfError> {
    let (columns_part, raw_fs) = match line.find("<fs") {
        Some(pos) => (&line[..pos], Some(line[pos..].trim().to_string())),
        None => (line, None),
    };
    let columns: Vec<&str> = columns_part.split_whitespace().collect();
    let malformed = |reason: &str| SsfError::MalformedLine {
        line_no,
        reason: reason.to_string(),
    };

    // Chunk open: [address] (( TAG
    if let Some(open_at) = columns.iter().position(|c| *c == "((") {
        let address = if open_at > 0 {
            Some(columns[0].to_string())
        } else {
            None
        };
        let tag = columns.get(open_at + 1).copied().unwrap_or("").to_string();
        let start = builder.sentence.tokens.len();
        builder.sentence.chunks.push(Chunk {
            tag,
            start,
            end: start,
            address,
            raw_fs,
        });
        builder.open_chunks.push(builder.sentence.chunks.len() - 1);
        return Ok(None);
    }
    if columns.first() == Some(&"))") {
        let idx = builder
            .open_chunks
            .pop()
            .ok_or_else(|| malformed("closing `))` without an open chunk"))?;
        builder.sentence.chunks[idx].end = builder.sentence.tokens.len();
        return Ok(None);
    }

    let (address, form, pos) = match columns.as_slice() {
        [address, form, pos] if is_address(address) => {
            (Some(address.to_string()), *form, *pos)
        }
        [form, pos] => (None, *form, *pos),
        [] => return Err(malformed("missing form and POS columns")),
        [_] => return Err(malformed("missing POS column")),
        _ => return Err(malformed("unexpected number of columns")),
    };

    let mut soft = None;
    let fs = match raw_fs.as_deref() {
        Some(fs_text) => match attribute_value(fs_text, "af") {
            Some(af) => match parse_fs_attribute(&af) {
                Ok(mut fs) => {
                    fs.name = attribute_value(fs_text, "name");
                    Some(fs)
                }
                Err(e) => {
                    soft = Some(malformed(&e.to_string()));
                    None
                }
            },
            None => None,
        },
        None => None,
    };

    let index = builder.sentence.tokens.len() + 1;
    builder.sentence.tokens.push(SsfToken {
        index,
        form: form.to_string(),
        pos: pos.to_string(),
        fs,
        address,
        raw_fs,
    });
    Ok(soft)
}

/// Extracts the value of `key=...` from a tag, accepting single quotes,
/// double quotes or a bare value. Only the first alternative of a
/// `|`-separated feature-structure disjunction is considered.
pub(crate) fn attribute_value(tag: &str, key: &str) -> Option<String> {
    let tag = tag.split("|<fs").next().unwrap_or(tag);
    let bytes = tag.as_bytes();
    let mut search_from = 0;
    while let Some(rel) = tag[search_from..].find(key) {
        let start = search_from + rel;
        let end = start + key.len();
        search_from = end;
        let boundary_ok = start == 0 || {
            let prev = bytes[start - 1];
            prev.is_ascii_whitespace() || prev == b'<'
        };
        let rest = tag[end..].trim_start();
        if !boundary_ok || !rest.starts_with('=') {
            continue;
        }
        let value = rest[1..].trim_start();
        let quote = value.chars().next()?;
        return if quote == '\'' || quote == '"' {
            let inner = &value[1..];
            inner.find(quote).map(|close| inner[..close].to_string())
        } else {
            let stop = value
                .find(|c: char| c.is_whitespace() || c == '>')
                .unwrap_or(value.len());
            Some(value[..stop].to_string())
        };
    }
    None
}

/// Writes a document back to SSF text. Every sentence gets a `<Sentence>`
/// wrapper; forms, tags and feature structures are reproduced verbatim.
pub fn serialize_ssf(doc: &SsfDocument) -> String {
    let mut out = String::new();
    for (s_idx, sentence) in doc.sentences.iter().enumerate() {
        let id = sentence
            .id
            .clone()
            .unwrap_or_else(|| (s_idx + 1).to_string());
        out.push_str(&format!("<Sentence id=\"{id}\">\n"));

        let mut opens: Vec<Vec<&Chunk>> = vec![Vec::new(); sentence.tokens.len() + 1];
        let mut closes = vec![0usize; sentence.tokens.len() + 1];
        for chunk in &sentence.chunks {
            opens[chunk.start].push(chunk);
            closes[chunk.end] += 1;
        }
        for pos in 0..=sentence.tokens.len() {
            for _ in 0..closes[pos] {
                out.push_str("\t))\n");
            }
            for chunk in &opens[pos] {
                let address = chunk.address.as_deref().unwrap_or("");
                out.push_str(&format!("{address}\t((\t{}", chunk.tag));
                if let Some(fs) = &chunk.raw_fs {
                    out.push('\t');
                    out.push_str(fs);
                }
                out.push('\n');
            }
            if let Some(token) = sentence.tokens.get(pos) {
                out.push_str(&token.to_string());
                out.push('\n');
            }
        }
        out.push_str("</Sentence>\n\n");
    }
    out
}

impl fmt::Display for SsfToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(address) = &self.address {
            write!(f, "{address}\t")?;
        }
        write!(f, "{}\t{}", self.form, self.pos)?;
        if let Some(fs) = &self.raw_fs {
            write!(f, "\t{fs}")?;
        }
        Ok(())
    }
}

/// POS tags whose tokens are treated as potential entity mentions. Verbs
/// are included because they carry subject agreement in a pro-drop
/// language.
pub const MENTION_POS_TAGS: [&str; 6] = ["NN", "NNP", "NNC", "NNPC", "PRP", "VM"];

pub fn is_mention_pos(pos: &str) -> bool {
    let base = pos.split("__").next().unwrap_or(pos);
    MENTION_POS_TAGS.contains(&base)
}

/// A candidate mention span `[start, end)` in 0-based token positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MentionCandidate {
    pub start: usize,
    pub end: usize,
    pub head: String,
    pub pos: String,
    pub morph: MorphFeatures,
}

/// Token-level mention candidates: every noun, pronoun or main verb.
pub fn extract_mention_candidates(sentence: &[SsfToken]) -> Vec<MentionCandidate> {
    sentence
        .iter()
        .enumerate()
        .filter(|(_, tok)| is_mention_pos(&tok.pos))
        .map(|(i, tok)| MentionCandidate {
            start: i,
            end: i + 1,
            head: tok.form.clone(),
            pos: tok.pos.clone(),
            morph: tok.morph(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE_LINE: &str = "unnADu\tVM\t<fs af='unDu,v,m,sg,3,,A,A' name=\"unnaaDu\">";

    #[test]
    fn parses_single_verb_line() {
        let doc = parse_ssf_document(EXAMPLE_LINE, ParseMode::Strict).unwrap();
        assert_eq!(doc.sentences.len(), 1);
        let tok = &doc.sentences[0].tokens[0];
        assert_eq!(tok.form, "unnADu");
        assert_eq!(tok.pos, "VM");
        let fs = tok.fs.as_ref().unwrap();
        assert_eq!(fs.root, "unDu");
        assert_eq!(fs.category, "v");
        assert_eq!(fs.name.as_deref(), Some("unnaaDu"));
        assert_eq!(
            fs.morph,
            MorphFeatures::new(Gender::Male, Number::Singular, Person::Third)
        );
    }

    #[test]
    fn empty_input_has_no_sentences() {
        let doc = parse_ssf_document("", ParseMode::Strict).unwrap();
        assert!(doc.sentences.is_empty());
    }

    #[test]
    fn blank_lines_split_sentences() {
        let text = "rAmu\tNNP\t<fs af='rAmu,n,m,sg,3,,0,0'>\n\
                    pustakam\tNN\t<fs af='pustakam,n,,sg,,,0,0'>\n\
                    icchADu\tVM\t<fs af='iccu,v,m,sg,3,,A,A'>\n\
                    \n\
                    Ame\tPRP\t<fs af='Ame,pn,f,sg,3,,0,0'>\n\
                    vaccindi\tVM\t<fs af='vaccu,v,f,sg,3,,A,A'>\n";
        let doc = parse_ssf_document(text, ParseMode::Strict).unwrap();
        let lens: Vec<usize> = doc.sentences.iter().map(|s| s.tokens.len()).collect();
        assert_eq!(lens, vec![3, 2]);
    }

    #[test]
    fn sentence_tags_and_chunks() {
        let text = "<document>\n<Sentence id=\"4\">\n\
                    1\t((\tNP\t<fs name='NP'>\n\
                    1.1\trAmu\tNNP\t<fs af='rAmu,n,m,sg,3,d,0,0'>\n\
                    \t))\n\
                    2\t((\tVGF\t<fs name='VGF'>\n\
                    2.1\tvacc\u{0101}Du\tVM\t<fs af='vaccu,v,m,sg,3,,A,A'>\n\
                    2.2\t.\tSYM\t<fs af='.,punc,,,,,,'>\n\
                    \t))\n\
                    </Sentence>\n</document>\n";
        let doc = parse_ssf_document(text, ParseMode::Strict).unwrap();
        assert_eq!(doc.sentences.len(), 1);
        let s = &doc.sentences[0];
        assert_eq!(s.id.as_deref(), Some("4"));
        assert_eq!(s.tokens.len(), 3);
        assert_eq!(s.tokens[0].address.as_deref(), Some("1.1"));
        assert_eq!(s.chunks.len(), 2);
        assert_eq!((s.chunks[0].start, s.chunks[0].end), (0, 1));
        assert_eq!((s.chunks[1].start, s.chunks[1].end), (1, 3));
        assert_eq!(s.chunks[1].tag, "VGF");
    }

    #[test]
    fn fs_attribute_tables() {
        let fs = parse_fs_attribute("unDu,v,m,sg,3,,A,A").unwrap();
        assert_eq!((fs.root.as_str(), fs.category.as_str()), ("unDu", "v"));
        assert_eq!(
            fs.morph,
            MorphFeatures::new(Gender::Male, Number::Singular, Person::Third)
        );

        let fs = parse_fs_attribute("pustakam,n,,sg,,").unwrap();
        assert_eq!(fs.root, "pustakam");
        assert_eq!(
            fs.morph,
            MorphFeatures::new(Gender::Any, Number::Singular, Person::None)
        );

        let fs = parse_fs_attribute("vALLu,pn,any,pl,3,,").unwrap();
        assert_eq!(
            fs.morph,
            MorphFeatures::new(Gender::Any, Number::Plural, Person::Third)
        );

        let fs = parse_fs_attribute("x,n,fm,du,4").unwrap();
        assert_eq!(fs.morph, MorphFeatures::default());
    }

    #[test]
    fn too_few_fields() {
        assert_eq!(
            parse_fs_attribute("unDu,v,m,sg"),
            Err(SsfError::TooFewFields { found: 4 })
        );
    }

    #[test]
    fn double_quoted_af() {
        let doc =
            parse_ssf_document("Ame\tPRP\t<fs af=\"Ame,pn,f,sg,3,,0,0\">", ParseMode::Strict)
                .unwrap();
        assert_eq!(doc.sentences[0].tokens[0].morph().gender, Gender::Female);
    }

    #[test]
    fn lenient_skips_and_strict_aborts() {
        let text = "rAmu\tNNP\t<fs af='rAmu,n,m,sg,3'>\nlonely\nvAdu\tPRP\n";
        let doc = parse_ssf_document(text, ParseMode::Lenient).unwrap();
        assert_eq!(doc.sentences[0].tokens.len(), 2);
        assert_eq!(doc.sentences[0].tokens[1].index, 2);
        assert!(matches!(
            doc.warnings.as_slice(),
            [SsfError::MalformedLine { line_no: 2, .. }]
        ));

        let err = parse_ssf_document(text, ParseMode::Strict).unwrap_err();
        assert!(matches!(err, SsfError::MalformedLine { line_no: 2, .. }));
    }

    #[test]
    fn short_af_keeps_token_in_lenient_mode() {
        let text = "rAmu\tNNP\t<fs af='rAmu,n,m'>\n";
        let doc = parse_ssf_document(text, ParseMode::Lenient).unwrap();
        let tok = &doc.sentences[0].tokens[0];
        assert!(tok.fs.is_none());
        assert_eq!(tok.morph(), MorphFeatures::default());
        assert_eq!(doc.warnings.len(), 1);
        assert!(parse_ssf_document(text, ParseMode::Strict).is_err());
    }

    #[test]
    fn candidates() {
        let tok = |form: &str, pos: &str, af: &str| SsfToken {
            index: 0,
            form: form.into(),
            pos: pos.into(),
            fs: Some(parse_fs_attribute(af).unwrap()),
            address: None,
            raw_fs: None,
        };
        let s = vec![
            tok("rAmu", "NN", "rAmu,n,m,sg,3"),
            tok("unnADu", "VM", "unDu,v,m,sg,3,,A,A"),
        ];
        assert_eq!(extract_mention_candidates(&s).len(), 2);

        let s = vec![tok(".", "SYM", ".,punc,,,"), tok("!", "SYM", "!,punc,,,")];
        assert!(extract_mention_candidates(&s).is_empty());

        let s = vec![
            tok("atanu", "PRP", "atanu,pn,m,sg,3"),
            tok("pustakam", "NN", "pustakam,n,,sg,,"),
            tok("icchADu", "VM", "iccu,v,m,sg,3,,A,A"),
        ];
        let c = extract_mention_candidates(&s);
        assert_eq!(c.len(), 3);
        assert_eq!(c[0].morph.person, Person::Third);
        assert_eq!((c[2].start, c[2].end), (2, 3));
    }

    #[test]
    fn attribute_lookup_respects_word_boundaries() {
        let tag = "<fs paf='x,y' af='a,b,c,d,e' name=bare>";
        assert_eq!(attribute_value(tag, "af").as_deref(), Some("a,b,c,d,e"));
        assert_eq!(attribute_value(tag, "name").as_deref(), Some("bare"));
        assert_eq!(attribute_value(tag, "head"), None);
    }
}
