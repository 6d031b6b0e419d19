//! Error analysis: length-ratio buckets and numeral consistency.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::OnceLock;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::metrics::{sentence_bleu, tokenize_13a};

pub const LOW_BLEU_THRESHOLD: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LengthCategory {
    RefLonger,
    Equal,
    HypLonger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Flag {
    LowBleu,
    SuspectTruncation,
    SuspectNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBucket {
    pub id: String,
    pub category: LengthCategory,
    pub hyp_words: usize,
    pub ref_words: usize,
    pub sentence_bleu: f64,
    pub flags: BTreeSet<Flag>,
}

/// A hypothesis/reference pair under analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub id: String,
    pub hyp: String,
    pub reference: String,
}

pub fn bucket_from_counts(id: &str, hyp_words: usize, ref_words: usize, bleu: f64, threshold: f64) -> ErrorBucket {
    let category = match hyp_words.cmp(&ref_words) {
        std::cmp::Ordering::Less => LengthCategory::RefLonger,
        std::cmp::Ordering::Equal => LengthCategory::Equal,
        std::cmp::Ordering::Greater => LengthCategory::HypLonger,
    };
    let mut flags = BTreeSet::new();
    if bleu < threshold {
        flags.insert(Flag::LowBleu);
        match category {
            LengthCategory::RefLonger => {
                flags.insert(Flag::SuspectTruncation);
            }
            LengthCategory::HypLonger => {
                flags.insert(Flag::SuspectNoise);
            }
            LengthCategory::Equal => {}
        }
    }
    ErrorBucket {
        id: id.to_string(),
        category,
        hyp_words,
        ref_words,
        sentence_bleu: bleu,
        flags,
    }
}

/// Buckets each pair by 13a word counts and flags low sentence BLEU.
pub fn classify_lengths(pairs: &[Pair], threshold: f64) -> Vec<ErrorBucket> {
    pairs
        .iter()
        .map(|p| {
            bucket_from_counts(
                &p.id,
                tokenize_13a(&p.hyp).len(),
                tokenize_13a(&p.reference).len(),
                sentence_bleu(&p.hyp, &p.reference),
                threshold,
            )
        })
        .collect()
}

/// How a numeral was written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumeralFormat {
    AsciiDigits,
    DevanagariDigits,
    EnglishWords,
    HindiWords,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Numeral {
    pub value: Decimal,
    /// Formats of the tokens that make up the numeral, including multipliers.
    pub formats: BTreeSet<NumeralFormat>,
}

const ENGLISH_UNITS: [&str; 20] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
];
const ENGLISH_TENS: [&str; 8] = ["twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"];

/// Hindi number words 0–100 in order; `|` separates spelling variants.
const HINDI_WORDS: [&str; 101] = [
    "शून्य",
    "एक",
    "दो",
    "तीन",
    "चार",
    "पाँच|पांच",
    "छह|छः|छै|छे",
    "सात",
    "आठ",
    "नौ",
    "दस",
    "ग्यारह",
    "बारह",
    "तेरह",
    "चौदह",
    "पंद्रह|पन्द्रह",
    "सोलह",
    "सत्रह",
    "अठारह|अट्ठारह",
    "उन्नीस",
    "बीस",
    "इक्कीस",
    "बाईस",
    "तेईस",
    "चौबीस",
    "पच्चीस",
    "छब्बीस",
    "सत्ताईस",
    "अट्ठाईस",
    "उनतीस",
    "तीस",
    "इकतीस|इकत्तीस",
    "बत्तीस",
    "तैंतीस",
    "चौंतीस",
    "पैंतीस",
    "छत्तीस",
    "सैंतीस",
    "अड़तीस",
    "उनतालीस|उनचालीस",
    "चालीस",
    "इकतालीस",
    "बयालीस",
    "तैंतालीस",
    "चवालीस|चौवालीस",
    "पैंतालीस",
    "छियालीस",
    "सैंतालीस",
    "अड़तालीस",
    "उनचास",
    "पचास",
    "इक्यावन",
    "बावन",
    "तिरेपन|तिरपन",
    "चौवन",
    "पचपन",
    "छप्पन",
    "सत्तावन",
    "अट्ठावन",
    "उनसठ",
    "साठ",
    "इकसठ",
    "बासठ",
    "तिरेसठ|तिरसठ",
    "चौंसठ",
    "पैंसठ",
    "छियासठ",
    "सड़सठ|सरसठ",
    "अड़सठ",
    "उनहत्तर",
    "सत्तर",
    "इकहत्तर",
    "बहत्तर",
    "तिहत्तर",
    "चौहत्तर",
    "पचहत्तर",
    "छिहत्तर",
    "सतहत्तर",
    "अठहत्तर",
    "उन्यासी|उनासी",
    "अस्सी",
    "इक्यासी",
    "बयासी",
    "तिरासी",
    "चौरासी",
    "पचासी",
    "छियासी",
    "सत्तासी",
    "अट्ठासी",
    "नवासी",
    "नब्बे",
    "इक्यानवे",
    "बानवे",
    "तिरानवे",
    "चौरानवे",
    "पंचानवे",
    "छियानवे",
    "सत्तानवे",
    "अट्ठानवे",
    "निन्यानवे",
    "सौ",
];

/// (surface forms, value, format)
const MULTIPLIERS: [(&[&str], i64, NumeralFormat); 8] = [
    (&["hundred", "hundreds"], 100, NumeralFormat::EnglishWords),
    (&["thousand", "thousands"], 1_000, NumeralFormat::EnglishWords),
    (&["lakh", "lakhs", "lac", "lacs"], 100_000, NumeralFormat::EnglishWords),
    (&["crore", "crores"], 10_000_000, NumeralFormat::EnglishWords),
    (&["million", "millions"], 1_000_000, NumeralFormat::EnglishWords),
    (&["हज़ार", "हजार"], 1_000, NumeralFormat::HindiWords),
    (&["लाख"], 100_000, NumeralFormat::HindiWords),
    (&["करोड़", "करोड"], 10_000_000, NumeralFormat::HindiWords),
];

/// Folds Devanagari spelling variants: nukta forms lose the nukta,
/// candrabindu becomes anusvara, and a half nasal before a consonant
/// becomes anusvara.
fn fold_devanagari(word: &str) -> String {
    let mut out: Vec<char> = Vec::with_capacity(word.len());
    let chars: Vec<char> = word.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let base = match c {
            '\u{0958}' => Some('क'),
            '\u{0959}' => Some('ख'),
            '\u{095A}' => Some('ग'),
            '\u{095B}' => Some('ज'),
            '\u{095C}' => Some('ड'),
            '\u{095D}' => Some('ढ'),
            '\u{095E}' => Some('फ'),
            '\u{095F}' => Some('य'),
            _ => None,
        };
        if let Some(b) = base {
            out.push(b);
        } else if c == '\u{093C}' {
            // bare nukta
        } else if c == 'ँ' {
            out.push('ं');
        } else if (c == 'न' || c == 'म')
            && chars.get(i + 1) == Some(&'्')
            && chars.get(i + 2).is_some_and(|n| ('क'..='ह').contains(n))
        {
            out.push('ं');
            i += 1;
        } else {
            out.push(c);
        }
        i += 1;
    }
    out.into_iter().collect()
}

fn word_tables() -> &'static HashMap<String, (i64, NumeralFormat)> {
    static TABLE: OnceLock<HashMap<String, (i64, NumeralFormat)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = HashMap::new();
        for (v, w) in ENGLISH_UNITS.iter().enumerate() {
            t.insert(w.to_string(), (v as i64, NumeralFormat::EnglishWords));
        }
        for (i, w) in ENGLISH_TENS.iter().enumerate() {
            t.insert(w.to_string(), (20 + 10 * i as i64, NumeralFormat::EnglishWords));
        }
        for (v, forms) in HINDI_WORDS.iter().enumerate() {
            for f in forms.split('|') {
                t.insert(fold_devanagari(f), (v as i64, NumeralFormat::HindiWords));
            }
        }
        t
    })
}

fn multiplier(word: &str) -> Option<(i64, NumeralFormat)> {
    let folded = fold_devanagari(word);
    MULTIPLIERS
        .iter()
        .find(|(forms, _, _)| forms.iter().any(|f| fold_devanagari(f) == folded))
        .map(|&(_, v, f)| (v, f))
}

fn digit_value(c: char) -> Option<(u32, NumeralFormat)> {
    match c {
        '0'..='9' => Some((c as u32 - '0' as u32, NumeralFormat::AsciiDigits)),
        '०'..='९' => Some((c as u32 - '०' as u32, NumeralFormat::DevanagariDigits)),
        _ => None,
    }
}

/// Digits with optional comma grouping and one decimal point, in either
/// script.
fn parse_digits(token: &str) -> Option<(Decimal, NumeralFormat)> {
    let mut digits = String::new();
    let mut format = None;
    let mut seen_point = false;
    let mut prev_digit = false;
    for c in token.chars() {
        if let Some((d, f)) = digit_value(c) {
            if format.is_some_and(|g| g != f) {
                return None;
            }
            format = Some(f);
            digits.push(char::from_digit(d, 10).unwrap());
            prev_digit = true;
        } else if c == ',' && prev_digit && !seen_point {
            prev_digit = false;
        } else if c == '.' && prev_digit && !seen_point {
            seen_point = true;
            digits.push('.');
            prev_digit = false;
        } else {
            return None;
        }
    }
    if !prev_digit {
        return None;
    }
    Some((digits.parse().ok()?, format?))
}

#[derive(Debug, Clone)]
enum Item {
    Number(Decimal, NumeralFormat),
    Multiplier(i64, NumeralFormat),
    Other,
}

fn is_edge_punct(c: char) -> bool {
    (c.is_ascii_punctuation() && c != '-') || matches!(c, '।' | '॥' | '“' | '”' | '‘' | '’')
}

fn lex(text: &str) -> Vec<Item> {
    let table = word_tables();
    let mut items = Vec::new();
    for raw in text.split_whitespace() {
        let raw = raw.trim_matches(is_edge_punct);
        if raw.is_empty() {
            items.push(Item::Other);
            continue;
        }
        if let Some((v, f)) = parse_digits(raw) {
            items.push(Item::Number(v, f));
            continue;
        }
        let lower = raw.to_lowercase();
        let parts: Vec<&str> = lower.split('-').filter(|p| !p.is_empty()).collect();
        for part in parts {
            let part = part.trim_matches(is_edge_punct);
            if let Some((v, f)) = parse_digits(part) {
                items.push(Item::Number(v, f));
            } else if let Some(&(v, f)) = table.get(&fold_devanagari(part)) {
                // "दो सौ": सौ after a number scales it
                if v == 100 && matches!(items.last(), Some(Item::Number(..))) {
                    items.push(Item::Multiplier(100, f));
                } else {
                    items.push(Item::Number(Decimal::from(v), f));
                }
            } else if let Some((m, f)) = multiplier(part) {
                items.push(Item::Multiplier(m, f));
            } else {
                items.push(Item::Other);
            }
        }
    }
    items
}

/// One magnitude term such as "74 lakhs" or "twenty one".
struct Term {
    value: Decimal,
    scale: i64,
    formats: BTreeSet<NumeralFormat>,
}

fn terms(items: &[Item]) -> Vec<Option<Term>> {
    let mut out: Vec<Option<Term>> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        match &items[i] {
            Item::Other => out.push(None),
            Item::Multiplier(m, f) => out.push(Some(Term {
                value: Decimal::from(*m),
                scale: *m,
                formats: BTreeSet::from([*f]),
            })),
            Item::Number(v, f) => {
                let mut value = *v;
                let mut formats = BTreeSet::from([*f]);
                // "twenty one": a tens word followed by a unit word
                if *f == NumeralFormat::EnglishWords && value >= Decimal::from(20) && value % Decimal::from(10) == Decimal::ZERO {
                    if let Some(Item::Number(u, NumeralFormat::EnglishWords)) = items.get(i + 1) {
                        if *u >= Decimal::ONE && *u <= Decimal::from(9) && value < Decimal::from(100) {
                            value += *u;
                            i += 1;
                        }
                    }
                }
                let mut scale = 1;
                if let Some(Item::Multiplier(m, mf)) = items.get(i + 1) {
                    value *= Decimal::from(*m);
                    scale = *m;
                    formats.insert(*mf);
                    i += 1;
                }
                out.push(Some(Term { value, scale, formats }));
            }
        }
        i += 1;
    }
    out
}

/// Extracts numerals with exact decimal values. Adjacent magnitude terms in
/// strictly descending order of scale add up ("8 crores 74 lakhs").
pub fn extract_numerals(text: &str) -> Vec<Numeral> {
    let mut out: Vec<Numeral> = Vec::new();
    let mut last_scale: Option<i64> = None;
    for term in terms(&lex(text)) {
        match term {
            None => last_scale = None,
            Some(t) => {
                let joins = last_scale.is_some_and(|s| t.scale < s && s > 1 && t.value < Decimal::from(s));
                if joins {
                    let n = out.last_mut().expect("a previous term exists");
                    n.value += t.value;
                    n.formats.extend(t.formats);
                } else {
                    out.push(Numeral {
                        value: t.value,
                        formats: t.formats,
                    });
                }
                last_scale = Some(t.scale);
            }
        }
    }
    for n in &mut out {
        n.value = n.value.normalize();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Match,
    ValueMismatch,
    ScriptMismatchOnly,
    Missing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Hyp,
    Ref,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumeralAudit {
    pub id: String,
    pub hyp_values: Vec<Decimal>,
    pub ref_values: Vec<Decimal>,
    pub verdict: Verdict,
    /// For MISSING: the side that has fewer numerals.
    pub missing_in: Option<Side>,
}

/// Multiset comparison of the numerals on both sides.
pub fn numeral_audit(id: &str, hyp: &str, reference: &str) -> NumeralAudit {
    let h = extract_numerals(hyp);
    let r = extract_numerals(reference);
    let sorted = |v: &[Numeral]| {
        let mut x: Vec<(Decimal, Vec<NumeralFormat>)> =
            v.iter().map(|n| (n.value, n.formats.iter().copied().collect())).collect();
        x.sort();
        x
    };
    let (hs, rs) = (sorted(&h), sorted(&r));
    let (verdict, missing_in) = if hs.len() != rs.len() {
        let side = if hs.len() < rs.len() { Side::Hyp } else { Side::Ref };
        (Verdict::Missing, Some(side))
    } else {
        let mut hv: Vec<Decimal> = hs.iter().map(|x| x.0).collect();
        let mut rv: Vec<Decimal> = rs.iter().map(|x| x.0).collect();
        hv.sort();
        rv.sort();
        if hv != rv {
            (Verdict::ValueMismatch, None)
        } else if hs == rs {
            (Verdict::Match, None)
        } else {
            (Verdict::ScriptMismatchOnly, None)
        }
    };
    NumeralAudit {
        id: id.to_string(),
        hyp_values: h.iter().map(|n| n.value).collect(),
        ref_values: r.iter().map(|n| n.value).collect(),
        verdict,
        missing_in,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub threshold: f64,
    pub buckets: Vec<ErrorBucket>,
    pub audits: Vec<NumeralAudit>,
}

#[derive(Serialize)]
struct JsonlRow<'a> {
    #[serde(flatten)]
    bucket: &'a ErrorBucket,
    numerals: &'a NumeralAudit,
}

pub fn analyze(pairs: &[Pair], threshold: f64) -> AnalysisReport {
    AnalysisReport {
        threshold,
        buckets: classify_lengths(pairs, threshold),
        audits: pairs.iter().map(|p| numeral_audit(&p.id, &p.hyp, &p.reference)).collect(),
    }
}

impl AnalysisReport {
    /// One JSON object per pair.
    pub fn to_jsonl(&self) -> String {
        self.buckets
            .iter()
            .zip(&self.audits)
            .map(|(bucket, numerals)| serde_json::to_string(&JsonlRow { bucket, numerals }).expect("serializes") + "\n")
            .collect()
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let n = self.buckets.len();
        let _ = writeln!(s, "# Error analysis\n");
        let _ = writeln!(s, "{n} pairs, low-BLEU threshold {}.\n", self.threshold);
        let _ = writeln!(s, "## Length buckets\n");
        let _ = writeln!(s, "| Category | Pairs | LOW_BLEU | SUSPECT_TRUNCATION | SUSPECT_NOISE |");
        let _ = writeln!(s, "|---|---|---|---|---|");
        let mut by_cat: BTreeMap<LengthCategory, [usize; 4]> = BTreeMap::new();
        for b in &self.buckets {
            let e = by_cat.entry(b.category).or_default();
            e[0] += 1;
            e[1] += b.flags.contains(&Flag::LowBleu) as usize;
            e[2] += b.flags.contains(&Flag::SuspectTruncation) as usize;
            e[3] += b.flags.contains(&Flag::SuspectNoise) as usize;
        }
        for (cat, c) in &by_cat {
            let name = serde_json::to_value(cat).unwrap();
            let _ = writeln!(s, "| {} | {} | {} | {} | {} |", name.as_str().unwrap(), c[0], c[1], c[2], c[3]);
        }
        let _ = writeln!(s, "\n## Numerals\n");
        let _ = writeln!(s, "| Verdict | Pairs |");
        let _ = writeln!(s, "|---|---|");
        let mut verdicts: BTreeMap<Verdict, usize> = BTreeMap::new();
        for a in &self.audits {
            *verdicts.entry(a.verdict).or_default() += 1;
        }
        for (v, c) in &verdicts {
            let name = serde_json::to_value(v).unwrap();
            let _ = writeln!(s, "| {} | {c} |", name.as_str().unwrap());
        }
        let flagged: Vec<&NumeralAudit> = self.audits.iter().filter(|a| a.verdict != Verdict::Match).collect();
        if !flagged.is_empty() {
            let _ = writeln!(s, "\n| Id | Hypothesis values | Reference values | Verdict |");
            let _ = writeln!(s, "|---|---|---|---|");
            let join = |v: &[Decimal]| v.iter().map(Decimal::to_string).collect::<Vec<_>>().join(", ");
            for a in flagged {
                let name = serde_json::to_value(a.verdict).unwrap();
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} |",
                    a.id,
                    join(&a.hyp_values),
                    join(&a.ref_values),
                    name.as_str().unwrap()
                );
            }
        }
        s
    }
}
