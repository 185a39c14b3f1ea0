//! Parsing of CHAT transcript headers into typed metadata records.
//!
//! Only the leading header block is read: lines beginning with `@`, up to
//! the first line that does not. `@Participants:` declares the speakers,
//! each `@ID:` line fills in the demographic slots for one speaker, and
//! `@Types:` carries the study-type labels. Everything here is pure and
//! free of I/O.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Days-to-months divisor: mean length of a Gregorian month.
const DAYS_PER_MONTH: f64 = 30.4375;

/// How the parser reacts to malformed header lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    /// Malformed lines are skipped and recorded as warnings.
    Lenient,
    /// Malformed lines abort the parse.
    Strict,
}

#[derive(Debug, Error)]
pub enum HeaderError {
    #[error("input is not valid UTF-8")]
    NotUtf8,
    #[error("no @Participants line found in header")]
    MissingParticipants,
    #[error("malformed header line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("malformed age token `{0}`: {1}")]
    MalformedAge(String, String),
}

/// Participant sex as declared in the `@ID` line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sex {
    Male,
    Female,
    /// Anything other than the two recognized values, kept verbatim.
    Other(String),
}

impl Sex {
    pub fn as_str(&self) -> &str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
            Sex::Other(raw) => raw,
        }
    }
}

/// One participant's metadata, assembled from `@Participants` and `@ID`.
///
/// Slots that are absent in the source stay `None`; present-but-empty
/// slots (consecutive `||` in an `@ID` line) are also recorded as `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    /// Three-letter speaker code, e.g. `CHI` or `MOT`.
    pub code: String,
    pub name: Option<String>,
    pub role: Option<String>,
    pub language: Option<String>,
    /// Raw age token from the `@ID` line, e.g. `1;8.`. Only kept when it
    /// parsed successfully, so presence here implies `age_months` is set.
    pub age_raw: Option<String>,
    /// Age in decimal months, rounded to one decimal place.
    pub age_months: Option<f64>,
    pub sex: Option<Sex>,
    pub group: Option<String>,
    pub ses: Option<String>,
    pub education: Option<String>,
    pub custom: Option<String>,
}

impl ParticipantRecord {
    fn new(code: &str) -> Self {
        ParticipantRecord {
            code: code.to_string(),
            name: None,
            role: None,
            language: None,
            age_raw: None,
            age_months: None,
            sex: None,
            group: None,
            ses: None,
            education: None,
            custom: None,
        }
    }
}

/// Parsed header of one CHAT file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HeaderMetadata {
    /// Path of the source file relative to the local mirror root. Not part
    /// of the header text itself; filled in by whoever read the file.
    pub file_path: String,
    /// Corpus name, taken from the first non-empty corpus slot of an `@ID`
    /// line.
    pub corpus: String,
    /// Participants in source declaration order, keyed by speaker code.
    pub participants: IndexMap<String, ParticipantRecord>,
    /// Labels from the `@Types:` header, in source order.
    pub types: Vec<String>,
    /// Language codes from the `@Languages:` header.
    pub languages: Vec<String>,
    /// Diagnostics collected during a lenient parse.
    pub raw_warnings: Vec<String>,
}

/// Header field vocabulary accepted by [`get_field`] and the filter DSL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Field {
    Name,
    Role,
    Age,
    Sex,
    Group,
    Ses,
    Education,
    Language,
    Custom,
}

impl Field {
    pub const ALL: [Field; 9] = [
        Field::Name,
        Field::Role,
        Field::Age,
        Field::Sex,
        Field::Group,
        Field::Ses,
        Field::Education,
        Field::Language,
        Field::Custom,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Field::Name => "name",
            Field::Role => "role",
            Field::Age => "age",
            Field::Sex => "sex",
            Field::Group => "group",
            Field::Ses => "ses",
            Field::Education => "education",
            Field::Language => "language",
            Field::Custom => "custom",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown header field `{0}`")]
pub struct UnknownField(pub String);

impl FromStr for Field {
    type Err = UnknownField;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "name" => Ok(Field::Name),
            "role" => Ok(Field::Role),
            "age" => Ok(Field::Age),
            "sex" => Ok(Field::Sex),
            "group" => Ok(Field::Group),
            "ses" => Ok(Field::Ses),
            "education" => Ok(Field::Education),
            "language" => Ok(Field::Language),
            "custom" => Ok(Field::Custom),
            other => Err(UnknownField(other.to_string())),
        }
    }
}

/// Look up a participant's raw field value.
///
/// Returns `None` when the participant is missing or the slot was absent
/// or empty in the source. An unknown field name is caught earlier, at
/// [`Field`] construction.
pub fn get_field<'a>(header: &'a HeaderMetadata, code: &str, field: Field) -> Option<&'a str> {
    let rec = header.participants.get(code)?;
    let value = match field {
        Field::Name => rec.name.as_deref(),
        Field::Role => rec.role.as_deref(),
        Field::Age => rec.age_raw.as_deref(),
        Field::Sex => rec.sex.as_ref().map(|s| s.as_str()),
        Field::Group => rec.group.as_deref(),
        Field::Ses => rec.ses.as_deref(),
        Field::Education => rec.education.as_deref(),
        Field::Language => rec.language.as_deref(),
        Field::Custom => rec.custom.as_deref(),
    };
    value.filter(|v| !v.trim().is_empty())
}

/// Name-based variant of [`get_field`]; unknown field names are an error,
/// distinct from an absent value.
pub fn get_field_by_name<'a>(
    header: &'a HeaderMetadata,
    code: &str,
    field: &str,
) -> Result<Option<&'a str>, UnknownField> {
    Ok(get_field(header, code, field.parse()?))
}

/// Parse a CHAT age token (`Y;M.D`, `Y;M.`, `Y;M`, `Y;`) into decimal
/// months: `Y*12 + M + D/30.4375`, rounded half-up to one decimal place.
///
/// Empty or blank tokens are an absent age, not an error.
pub fn parse_age(token: &str) -> Result<Option<f64>, HeaderError> {
    let token = token.trim();
    if token.is_empty() {
        return Ok(None);
    }
    let malformed = |why: &str| HeaderError::MalformedAge(token.to_string(), why.to_string());

    let (years_part, rest) = token
        .split_once(';')
        .ok_or_else(|| malformed("missing `;` separator"))?;
    let years: u32 = years_part
        .trim()
        .parse()
        .map_err(|_| malformed("non-numeric years"))?;

    let (months_part, days_part) = match rest.split_once('.') {
        Some((m, d)) => (m, d),
        None => (rest, ""),
    };
    let months: u32 = if months_part.trim().is_empty() {
        0
    } else {
        months_part
            .trim()
            .parse()
            .map_err(|_| malformed("non-numeric months"))?
    };
    if months >= 12 {
        return Err(malformed("months must be < 12"));
    }
    let days: u32 = if days_part.trim().is_empty() {
        0
    } else {
        days_part
            .trim()
            .parse()
            .map_err(|_| malformed("non-numeric days"))?
    };

    let raw = f64::from(years) * 12.0 + f64::from(months) + f64::from(days) / DAYS_PER_MONTH;
    Ok(Some((raw * 10.0).round() / 10.0))
}

/// Parse the header block of a CHAT transcript.
///
/// Only leading `@`-lines are consulted; the block ends at the first line
/// that does not begin with `@`. In lenient mode malformed lines are
/// skipped and noted in `raw_warnings`; in strict mode they abort.
pub fn parse_header(text: &str, mode: ParseMode) -> Result<HeaderMetadata, HeaderError> {
    let mut header = HeaderMetadata::default();
    let mut saw_participants = false;

    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim_end_matches('\r');
        if !line.starts_with('@') {
            break;
        }
        let lineno = idx + 1;
        let (keyword, value) = match line.split_once(':') {
            Some((kw, rest)) => (kw, strip_separator(rest)),
            None => (line, ""),
        };
        match keyword {
            "@Participants" => {
                saw_participants = true;
                parse_participants(value, lineno, mode, &mut header)?;
            }
            "@ID" => parse_id(value, lineno, mode, &mut header)?,
            "@Types" => {
                header.types = value
                    .split(',')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(str::to_string)
                    .collect();
            }
            "@Languages" => {
                header.languages = value
                    .split([',', ' '])
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(str::to_string)
                    .collect();
            }
            kw if KNOWN_KEYWORDS.contains(&kw) || kw.starts_with("@Birth of")
                || kw.starts_with("@Comment") =>
            {
                // Recognized but irrelevant to indexing.
            }
            kw => header
                .raw_warnings
                .push(format!("line {lineno}: unrecognized header keyword `{kw}`")),
        }
    }

    if !saw_participants {
        return Err(HeaderError::MissingParticipants);
    }
    Ok(header)
}

/// [`parse_header`] over raw bytes; rejects non-UTF-8 input.
pub fn parse_header_bytes(bytes: &[u8], mode: ParseMode) -> Result<HeaderMetadata, HeaderError> {
    let text = std::str::from_utf8(bytes).map_err(|_| HeaderError::NotUtf8)?;
    parse_header(text, mode)
}

/// Standard header keywords that carry no indexable metadata.
const KNOWN_KEYWORDS: &[&str] = &[
    "@UTF8",
    "@Begin",
    "@End",
    "@PID",
    "@Media",
    "@Date",
    "@Options",
    "@Situation",
    "@Location",
    "@Tape Location",
    "@Transcriber",
    "@Warning",
    "@Time Duration",
    "@Time Start",
    "@Recording Quality",
    "@Room Layout",
    "@Activities",
    "@G",
    "@New Episode",
];

/// The grammar allows either a literal tab or one-or-more spaces after
/// the colon.
fn strip_separator(rest: &str) -> &str {
    rest.strip_prefix('\t')
        .unwrap_or_else(|| rest.trim_start_matches(' '))
        .trim()
}

fn report(
    mode: ParseMode,
    header: &mut HeaderMetadata,
    lineno: usize,
    reason: String,
) -> Result<(), HeaderError> {
    match mode {
        ParseMode::Strict => Err(HeaderError::MalformedLine {
            line: lineno,
            reason,
        }),
        ParseMode::Lenient => {
            header.raw_warnings.push(format!("line {lineno}: {reason}"));
            Ok(())
        }
    }
}

fn valid_code(code: &str) -> bool {
    !code.is_empty() && !code.contains('|') && !code.chars().any(char::is_whitespace)
}

fn parse_participants(
    value: &str,
    lineno: usize,
    mode: ParseMode,
    header: &mut HeaderMetadata,
) -> Result<(), HeaderError> {
    for entry in value.split(',') {
        let entry = entry.trim();
        if entry.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = entry.split_whitespace().collect();
        // CODE Name Role, with Name optional. A lone code has no role and
        // is treated as malformed so that every kept participant has one.
        let (code, name, role) = match tokens.as_slice() {
            [code, role] => (*code, None, *role),
            [code, middle @ .., role] if !middle.is_empty() => {
                (*code, Some(middle.join(" ")), *role)
            }
            _ => {
                report(
                    mode,
                    header,
                    lineno,
                    format!("participant entry `{entry}` lacks a role"),
                )?;
                continue;
            }
        };
        if !valid_code(code) {
            report(mode, header, lineno, format!("invalid speaker code `{code}`"))?;
            continue;
        }
        if header.participants.contains_key(code) {
            report(
                mode,
                header,
                lineno,
                format!("duplicate participant code `{code}`"),
            )?;
            continue;
        }
        let mut rec = ParticipantRecord::new(code);
        rec.name = name.filter(|n| !n.is_empty());
        rec.role = Some(role.to_string());
        header.participants.insert(code.to_string(), rec);
    }
    Ok(())
}

fn parse_id(
    value: &str,
    lineno: usize,
    mode: ParseMode,
    header: &mut HeaderMetadata,
) -> Result<(), HeaderError> {
    // language|corpus|code|age|sex|group|SES|role|education|custom|
    let slots: Vec<&str> = value.split('|').map(str::trim).collect();
    if slots.len() < 10 {
        return report(
            mode,
            header,
            lineno,
            format!("@ID line has {} fields, expected 10", slots.len()),
        );
    }
    let code = slots[2];
    if !valid_code(code) {
        return report(mode, header, lineno, format!("invalid speaker code `{code}`"));
    }
    if header.corpus.is_empty() && !slots[1].is_empty() {
        header.corpus = slots[1].to_string();
    }
    if !header.participants.contains_key(code) {
        report(
            mode,
            header,
            lineno,
            format!("@ID line for undeclared participant `{code}`"),
        )?;
        if slots[7].is_empty() {
            // Without a role the record would violate the role invariant.
            return Ok(());
        }
        header
            .participants
            .insert(code.to_string(), ParticipantRecord::new(code));
    }

    let age_token = slots[3];
    let parsed_age = match parse_age(age_token) {
        Ok(a) => a,
        Err(err) => {
            report(mode, header, lineno, err.to_string())?;
            None
        }
    };

    let non_empty = |s: &str| {
        let s = s.trim();
        (!s.is_empty()).then(|| s.to_string())
    };

    let rec = header
        .participants
        .get_mut(code)
        .expect("participant inserted above");
    rec.language = non_empty(slots[0]).or(rec.language.take());
    if let Some(months) = parsed_age {
        rec.age_months = Some(months);
        rec.age_raw = Some(age_token.to_string());
    }
    rec.sex = match slots[4] {
        "" => rec.sex.take(),
        "male" => Some(Sex::Male),
        "female" => Some(Sex::Female),
        other => Some(Sex::Other(other.to_string())),
    };
    rec.group = non_empty(slots[5]).or(rec.group.take());
    rec.ses = non_empty(slots[6]).or(rec.ses.take());
    if rec.role.is_none() {
        rec.role = non_empty(slots[7]);
    }
    rec.education = non_empty(slots[8]).or(rec.education.take());
    rec.custom = non_empty(slots[9]).or(rec.custom.take());
    Ok(())
}
