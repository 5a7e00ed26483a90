//! Hierarchical clinical codes (Read codes) and their term dictionary.
//!
//! A code is five characters, hierarchical from left to right and right-padded
//! with `'.'`; the number of leading non-pad characters is its level. A
//! two-digit term code distinguishes synonym terms for the same concept, so
//! the canonical rendering is seven characters, e.g. `N245.16`.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use log::warn;

use crate::error::{Error, Result};

pub const CODE_LEN: usize = 5;
pub const TERM_LEN: usize = 2;
pub const MAX_LEVEL: u8 = 5;
const PAD: u8 = b'.';

/// Returned by [`TermDictionary::lookup`] for keys that are not in the dictionary.
pub const UNKNOWN_TERM: &str = "<unknown term>";

/// A canonical Read code: five code characters plus a two-digit term code.
///
/// Ordering is byte-lexicographic on the seven-character rendering.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Readcode {
    code: [u8; CODE_LEN],
    term: [u8; TERM_LEN],
}

impl Readcode {
    /// Builds a code from already canonical parts.
    fn from_parts(code: [u8; CODE_LEN], term: [u8; TERM_LEN]) -> Self {
        Readcode { code, term }
    }

    pub fn code(&self) -> &str {
        std::str::from_utf8(&self.code).expect("ascii")
    }

    pub fn term(&self) -> &str {
        std::str::from_utf8(&self.term).expect("ascii")
    }

    pub fn level(&self) -> u8 {
        self.code.iter().take_while(|&&c| c != PAD).count() as u8
    }

    /// The significant (non-pad) characters of the code.
    pub fn stem(&self) -> &str {
        &self.code()[..self.level() as usize]
    }

    /// True if `self`'s stem is a prefix of `other`'s stem.
    pub fn is_ancestor_of(&self, other: &Readcode) -> bool {
        other.stem().starts_with(self.stem())
    }

    pub fn starts_with(&self, prefix: &str) -> bool {
        self.to_string().starts_with(prefix)
    }
}

impl fmt::Display for Readcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())?;
        f.write_str(self.term())
    }
}

impl fmt::Debug for Readcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Readcode({self})")
    }
}

impl FromStr for Readcode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_readcode(s)
    }
}

impl serde::Serialize for Readcode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Readcode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        parse_readcode(&raw).map_err(serde::de::Error::custom)
    }
}

/// Parses a raw code into its canonical form.
///
/// Accepted shapes after trimming:
/// * up to 5 characters: the code alone, term `00`;
/// * 6 characters: a 4-character code plus term (`C34.00` → `C34..00`);
/// * 7 characters: the canonical code plus term.
pub fn parse_readcode(raw: &str) -> Result<Readcode> {
    let s = raw.trim();
    if s.is_empty() {
        return Err(Error::EmptyCode);
    }
    if !s.bytes().all(|b| b.is_ascii_graphic()) {
        return Err(Error::malformed(s, "characters outside printable ASCII"));
    }
    let bytes = s.as_bytes();
    let (code_part, term_part): (&[u8], &[u8]) = match bytes.len() {
        1..=5 => (bytes, b"00"),
        6 => (&bytes[..4], &bytes[4..]),
        7 => (&bytes[..5], &bytes[5..]),
        _ => return Err(Error::malformed(s, "longer than 7 characters")),
    };
    if !term_part.iter().all(u8::is_ascii_digit) {
        return Err(Error::malformed(s, "term code is not two digits"));
    }

    let mut code = [PAD; CODE_LEN];
    code[..code_part.len()].copy_from_slice(code_part);
    if code[0] == PAD {
        return Err(Error::malformed(s, "code has no significant characters"));
    }
    let level = code.iter().take_while(|&&c| c != PAD).count();
    if code[level..].iter().any(|&c| c != PAD) {
        return Err(Error::malformed(s, "'.' followed by a non-'.' character"));
    }

    let mut term = [0u8; TERM_LEN];
    term.copy_from_slice(term_part);
    Ok(Readcode::from_parts(code, term))
}

/// Truncates `c` to `target_level`, resetting the term to `00`. Codes already at
/// or above the target level are returned unchanged.
pub fn rollup(c: Readcode, target_level: u8) -> Result<Readcode> {
    if !(1..=MAX_LEVEL).contains(&target_level) {
        return Err(Error::InvalidLevel(target_level));
    }
    if c.level() <= target_level {
        return Ok(c);
    }
    let mut code = [PAD; CODE_LEN];
    let n = target_level as usize;
    code[..n].copy_from_slice(&c.code[..n]);
    Ok(Readcode::from_parts(code, *b"00"))
}

/// Counts from a dictionary load.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DictionarySummary {
    pub loaded: usize,
    pub duplicates: usize,
    pub malformed: usize,
}

/// Canonical code → description. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct TermDictionary {
    entries: HashMap<Readcode, String>,
    summary: DictionarySummary,
}

impl TermDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses dictionary text: one `code<TAB>description` record per line.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Self {
        let mut dict = TermDictionary::new();
        for line in text.lines() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((raw_code, desc)) = line.split_once('\t') else {
                dict.summary.malformed += 1;
                continue;
            };
            let Ok(code) = parse_readcode(raw_code) else {
                dict.summary.malformed += 1;
                continue;
            };
            dict.insert(code, desc.trim().to_string());
        }
        dict
    }

    /// Adds an entry unless the key is present; a repeated key is counted as a
    /// duplicate and the first description is kept.
    pub fn insert(&mut self, code: Readcode, description: String) -> bool {
        use std::collections::hash_map::Entry;
        match self.entries.entry(code) {
            Entry::Occupied(_) => {
                self.summary.duplicates += 1;
                false
            }
            Entry::Vacant(v) => {
                v.insert(description);
                self.summary.loaded += 1;
                true
            }
        }
    }

    pub fn get(&self, code: &Readcode) -> Option<&str> {
        self.entries.get(code).map(String::as_str)
    }

    /// Description for `code`, or [`UNKNOWN_TERM`].
    pub fn lookup(&self, code: &Readcode) -> &str {
        self.get(code).unwrap_or(UNKNOWN_TERM)
    }

    /// Lookup by raw text; unparseable keys are unknown too.
    pub fn lookup_str(&self, raw: &str) -> &str {
        parse_readcode(raw)
            .ok()
            .and_then(|c| self.get(&c))
            .unwrap_or(UNKNOWN_TERM)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn summary(&self) -> DictionarySummary {
        self.summary
    }
}

pub fn load_dictionary(path: impl AsRef<Path>) -> Result<TermDictionary> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dict = TermDictionary::parse(&text);
    let s = dict.summary();
    if s.duplicates > 0 || s.malformed > 0 {
        warn!(
            "{}: {} entries, {} duplicate keys ignored, {} malformed lines skipped",
            path.display(),
            s.loaded,
            s.duplicates,
            s.malformed
        );
    }
    Ok(dict)
}
