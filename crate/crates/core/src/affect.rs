//! Emotional-intensity quantification.
//!
//! Everything in this module is deterministic and fully local: a tokenizer,
//! a marker detector driven by a replaceable lexicon, and the intensity
//! ratio `lambda = count_emo / count_total` with its band classification.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Characters that form "symbolic emphasis" clusters like `$@$!`.
const EMPHASIS_SYMBOLS: &[char] = &['@', '#', '$', '%', '&', '*', '!'];

const ELLIPSIS: char = '\u{2026}';

/// Default lexicon shipped with the crate, `lexicon-v1` format.
pub const DEFAULT_LEXICON: &str = include_str!("../data/lexicon/default.lex");

// ---------------------------------------------------------------------------
// Lambda
// ---------------------------------------------------------------------------

/// Exact emotional-intensity ratio in [0, 1].
///
/// Stored reduced; serialized as `{num, den}` so persisted variants stay
/// byte-stable and exactly comparable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Lambda {
    pub num: u64,
    pub den: u64,
}

impl Lambda {
    pub fn new(count_emo: u64, count_total: u64) -> Lambda {
        let r = Ratio::new(count_emo, count_total.max(1));
        Lambda {
            num: *r.numer(),
            den: *r.denom(),
        }
    }

    pub const ZERO: Lambda = Lambda { num: 0, den: 1 };

    pub fn as_ratio(&self) -> Ratio<u64> {
        Ratio::new(self.num, self.den)
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Lambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}", self.as_f64())
    }
}

// ---------------------------------------------------------------------------
// Bands
// ---------------------------------------------------------------------------

/// Intensity band. `Low`/`Medium`/`High` follow the published ablation
/// intervals; `None` and `Extreme` extend them to total cover of [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    None,
    Low,
    Medium,
    High,
    Extreme,
}

impl Band {
    pub fn as_str(&self) -> &'static str {
        match self {
            Band::None => "none",
            Band::Low => "low",
            Band::Medium => "medium",
            Band::High => "high",
            Band::Extreme => "extreme",
        }
    }

    /// Tiered wording injected into the transfer instruction.
    pub fn intensity_instruction(&self) -> &'static str {
        match self {
            Band::None => "not emotional at all",
            Band::Low => "a little emotional",
            Band::Medium => "moderately emotional",
            Band::High => "extremely emotional",
            Band::Extreme => "overwhelmingly, theatrically emotional",
        }
    }

    pub fn parse(s: &str) -> Result<Band> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Band::None),
            "low" => Ok(Band::Low),
            "medium" => Ok(Band::Medium),
            "high" => Ok(Band::High),
            "extreme" => Ok(Band::Extreme),
            other => Err(Error::Config(format!("unknown band '{other}'"))),
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Map an exact lambda to its band: 0 -> none, (0,0.3] -> low,
/// (0.3,0.6] -> medium, (0.6,0.9] -> high, (0.9,1] -> extreme.
pub fn band_of(lambda: Ratio<u64>) -> Result<Band> {
    if lambda > Ratio::new(1, 1) {
        return Err(Error::LambdaRange(
            *lambda.numer() as f64 / *lambda.denom() as f64,
        ));
    }
    let band = if lambda == Ratio::new(0, 1) {
        Band::None
    } else if lambda <= Ratio::new(3, 10) {
        Band::Low
    } else if lambda <= Ratio::new(6, 10) {
        Band::Medium
    } else if lambda <= Ratio::new(9, 10) {
        Band::High
    } else {
        Band::Extreme
    };
    Ok(band)
}

/// `band_of` over an f64 target (used for lambda targets from config).
pub fn band_of_f64(lambda: f64) -> Result<Band> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::LambdaRange(lambda));
    }
    // Exact rational comparison after scaling to avoid boundary drift.
    let scaled = (lambda * 1_000_000.0).round() as u64;
    band_of(Ratio::new(scaled, 1_000_000))
}

// ---------------------------------------------------------------------------
// Lexicon
// ---------------------------------------------------------------------------

/// Four disjoint sets of lowercase lexical markers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerLexicon {
    pub interjections: BTreeSet<String>,
    pub slang: BTreeSet<String>,
    pub diminutives: BTreeSet<String>,
    pub expletives: BTreeSet<String>,
    pub version: String,
}

impl MarkerLexicon {
    /// Parse `lexicon-v1`: one entry per line, sections opened by
    /// `[interjections]`, `[slang]`, `[diminutives]`, `[expletives]`;
    /// `#` begins a comment. A `# version: X` comment sets the version.
    pub fn parse(text: &str) -> Result<MarkerLexicon> {
        let mut lex = MarkerLexicon {
            interjections: BTreeSet::new(),
            slang: BTreeSet::new(),
            diminutives: BTreeSet::new(),
            expletives: BTreeSet::new(),
            version: String::new(),
        };
        let mut section: Option<&str> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("version:") {
                    lex.version = v.trim().to_string();
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            match line {
                "[interjections]" => section = Some("interjections"),
                "[slang]" => section = Some("slang"),
                "[diminutives]" => section = Some("diminutives"),
                "[expletives]" => section = Some("expletives"),
                entry => {
                    let entry = entry.to_string();
                    if entry != entry.to_lowercase() || entry.chars().any(char::is_whitespace) {
                        return Err(Error::Parse {
                            file: "<lexicon>".into(),
                            line: i + 1,
                            msg: format!("entry '{entry}' must be lowercase and whitespace-free"),
                        });
                    }
                    let set = match section {
                        Some("interjections") => &mut lex.interjections,
                        Some("slang") => &mut lex.slang,
                        Some("diminutives") => &mut lex.diminutives,
                        Some("expletives") => &mut lex.expletives,
                        _ => {
                            return Err(Error::Parse {
                                file: "<lexicon>".into(),
                                line: i + 1,
                                msg: "entry before any section header".into(),
                            })
                        }
                    };
                    set.insert(entry);
                }
            }
        }
        if lex.version.is_empty() {
            lex.version = "unversioned".into();
        }
        lex.validate()?;
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<MarkerLexicon> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        MarkerLexicon::parse(&text)
    }

    /// Built-in default lexicon.
    pub fn default_lexicon() -> MarkerLexicon {
        MarkerLexicon::parse(DEFAULT_LEXICON).expect("builtin lexicon is valid")
    }

    /// Enforce: lowercase, non-empty, whitespace-free, pairwise disjoint.
    pub fn validate(&self) -> Result<()> {
        let sets = [
            ("interjections", &self.interjections),
            ("slang", &self.slang),
            ("diminutives", &self.diminutives),
            ("expletives", &self.expletives),
        ];
        for (name, set) in &sets {
            for e in set.iter() {
                if e.is_empty() || e.chars().any(char::is_whitespace) || *e != e.to_lowercase() {
                    return Err(Error::Config(format!(
                        "lexicon section {name}: invalid entry '{e}'"
                    )));
                }
            }
        }
        for i in 0..sets.len() {
            for j in (i + 1)..sets.len() {
                if let Some(dup) = sets[i].1.intersection(sets[j].1).next() {
                    return Err(Error::Config(format!(
                        "lexicon entry '{dup}' appears in both {} and {}",
                        sets[i].0, sets[j].0
                    )));
                }
            }
        }
        Ok(())
    }

    fn kind_of(&self, lower: &str) -> Option<MarkerKind> {
        if self.interjections.contains(lower) {
            Some(MarkerKind::Interjection)
        } else if self.slang.contains(lower) {
            Some(MarkerKind::Slang)
        } else if self.diminutives.contains(lower) {
            Some(MarkerKind::Diminutive)
        } else if self.expletives.contains(lower) {
            Some(MarkerKind::Expletive)
        } else {
            None
        }
    }
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    /// Letters, digits and apostrophes.
    Word,
    /// Run of identical punctuation characters.
    Punct,
    /// Single emoji codepoint.
    Emoji,
    /// `#`-prefixed word, e.g. `#truth`.
    Hashtag,
    /// Mixed cluster drawn from the emphasis symbol set, e.g. `$@$!`.
    Symbolic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '\u{2019}'
}

fn is_emoji(c: char) -> bool {
    matches!(u32::from(c),
        0x1F300..=0x1F5FF   // misc symbols & pictographs
        | 0x1F600..=0x1F64F // emoticons
        | 0x1F680..=0x1F6FF // transport
        | 0x1F900..=0x1F9FF // supplemental symbols
        | 0x1FA70..=0x1FAFF // symbols extended-A
        | 0x2600..=0x26FF   // misc symbols
        | 0x2700..=0x27BF   // dingbats (incl. heavy black heart)
    )
}

/// Split text into word runs, identical-punctuation runs, emoji codepoints,
/// hashtags and symbolic clusters. Whitespace is discarded.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if is_emoji(c) {
            tokens.push(Token {
                text: c.to_string(),
                kind: TokenKind::Emoji,
            });
            i += 1;
        } else if c == '#' && i + 1 < chars.len() && chars[i + 1].is_alphanumeric() {
            let mut j = i + 1;
            while j < chars.len() && is_word_char(chars[j]) {
                j += 1;
            }
            tokens.push(Token {
                text: chars[i..j].iter().collect(),
                kind: TokenKind::Hashtag,
            });
            i = j;
        } else if is_word_char(c) {
            let mut j = i;
            while j < chars.len() && is_word_char(chars[j]) {
                j += 1;
            }
            tokens.push(Token {
                text: chars[i..j].iter().collect(),
                kind: TokenKind::Word,
            });
            i = j;
        } else {
            // Punctuation run: collect everything that is not whitespace,
            // word, emoji or hashtag-start, then split it.
            let mut j = i;
            while j < chars.len() {
                let d = chars[j];
                if d.is_whitespace() || is_word_char(d) || is_emoji(d) {
                    break;
                }
                if d == '#' && j + 1 < chars.len() && chars[j + 1].is_alphanumeric() {
                    break;
                }
                j += 1;
            }
            let run = &chars[i..j];
            let all_symbols = run.iter().all(|d| EMPHASIS_SYMBOLS.contains(d));
            let distinct = {
                let mut s: Vec<char> = run.to_vec();
                s.sort_unstable();
                s.dedup();
                s.len()
            };
            if all_symbols && distinct >= 2 {
                tokens.push(Token {
                    text: run.iter().collect(),
                    kind: TokenKind::Symbolic,
                });
            } else {
                // Maximal identical subruns.
                let mut k = 0;
                while k < run.len() {
                    let mut m = k;
                    while m < run.len() && run[m] == run[k] {
                        m += 1;
                    }
                    tokens.push(Token {
                        text: run[k..m].iter().collect(),
                        kind: TokenKind::Punct,
                    });
                    k = m;
                }
            }
            i = j;
        }
    }
    tokens
}

// ---------------------------------------------------------------------------
// Marker detection
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerKind {
    Interjection,
    Slang,
    Diminutive,
    Expletive,
    PunctRepetition,
    StretchedWord,
    Emoji,
    AllCaps,
    AlternatingCase,
    SymbolicEmphasis,
}

impl fmt::Display for MarkerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MarkerKind::Interjection => "interjection",
            MarkerKind::Slang => "slang",
            MarkerKind::Diminutive => "diminutive",
            MarkerKind::Expletive => "expletive",
            MarkerKind::PunctRepetition => "punct_repetition",
            MarkerKind::StretchedWord => "stretched_word",
            MarkerKind::Emoji => "emoji",
            MarkerKind::AllCaps => "all_caps",
            MarkerKind::AlternatingCase => "alternating_case",
            MarkerKind::SymbolicEmphasis => "symbolic_emphasis",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerHit {
    pub kind: MarkerKind,
    /// Token index range [start, end).
    pub span: (usize, usize),
    pub surface: String,
}

fn has_stretched_letters(word: &str) -> bool {
    let mut prev: Option<char> = None;
    let mut run = 0;
    for c in word.chars() {
        if c.is_alphabetic() && prev.map(|p| p.eq_ignore_ascii_case(&c)).unwrap_or(false) {
            run += 1;
            if run >= 3 {
                return true;
            }
        } else {
            run = 1;
        }
        prev = Some(c);
    }
    false
}

fn case_alternations(word: &str) -> (usize, usize) {
    let letters: Vec<char> = word.chars().filter(|c| c.is_alphabetic()).collect();
    let mut alternations = 0;
    for w in letters.windows(2) {
        if w[0].is_uppercase() != w[1].is_uppercase() {
            alternations += 1;
        }
    }
    (letters.len(), alternations)
}

fn is_all_caps(word: &str) -> bool {
    let letters: Vec<char> = word.chars().filter(|c| c.is_alphabetic()).collect();
    letters.len() >= 2 && letters.iter().all(|c| c.is_uppercase())
}

/// Classify one token, or `None` when it carries no marker.
fn classify_token(token: &Token, lexicon: &MarkerLexicon) -> Option<MarkerKind> {
    match token.kind {
        TokenKind::Word => {
            let lower = token.text.to_lowercase();
            if let Some(kind) = lexicon.kind_of(&lower) {
                return Some(kind);
            }
            if has_stretched_letters(&token.text) {
                return Some(MarkerKind::StretchedWord);
            }
            let (letters, alternations) = case_alternations(&token.text);
            if letters >= 3 && alternations >= 2 {
                return Some(MarkerKind::AlternatingCase);
            }
            if is_all_caps(&token.text) {
                return Some(MarkerKind::AllCaps);
            }
            None
        }
        TokenKind::Punct => {
            let len = token.text.chars().count();
            if len >= 2 || token.text.contains(ELLIPSIS) {
                Some(MarkerKind::PunctRepetition)
            } else {
                None
            }
        }
        TokenKind::Emoji => Some(MarkerKind::Emoji),
        TokenKind::Hashtag | TokenKind::Symbolic => Some(MarkerKind::SymbolicEmphasis),
    }
}

/// One hit per token at most, case-insensitive for lexicon kinds.
pub fn detect_markers(tokens: &[Token], lexicon: &MarkerLexicon) -> Vec<MarkerHit> {
    tokens
        .iter()
        .enumerate()
        .filter_map(|(i, t)| {
            classify_token(t, lexicon).map(|kind| MarkerHit {
                kind,
                span: (i, i + 1),
                surface: t.text.clone(),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Intensity report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityReport {
    pub count_emo: u64,
    pub count_total: u64,
    pub lambda: Lambda,
    pub band: Band,
    pub hits: Vec<MarkerHit>,
}

/// Eq.-style intensity: marker-bearing tokens over total tokens.
/// Zero-token input yields (0, 1, 0, none, []).
pub fn compute_lambda(text: &str, lexicon: &MarkerLexicon) -> IntensityReport {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return IntensityReport {
            count_emo: 0,
            count_total: 1,
            lambda: Lambda::ZERO,
            band: Band::None,
            hits: Vec::new(),
        };
    }
    let hits = detect_markers(&tokens, lexicon);
    let count_total = tokens.len() as u64;
    let count_emo = hits.len() as u64;
    let lambda = Lambda::new(count_emo, count_total);
    let band = band_of(lambda.as_ratio()).expect("one hit per token keeps lambda <= 1");
    IntensityReport {
        count_emo,
        count_total,
        lambda,
        band,
        hits,
    }
}
