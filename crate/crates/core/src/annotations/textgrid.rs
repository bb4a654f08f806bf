//! Praat TextGrid, long ("ooTextFile") text format, interval tiers only.
//!
//! ```text
//! File type = "ooTextFile"
//! Object class = "TextGrid"
//! xmin = 0
//! xmax = 8
//! tiers? <exists>
//! size = 1
//! item []:
//!     item [1]:
//!         class = "IntervalTier"
//!         name = "cry"
//!         xmin = 0
//!         xmax = 8
//!         intervals: size = 2
//!         intervals [1]:
//!             xmin = 0
//!             xmax = 2
//!             text = "cry"
//!         ...
//! ```
//!
//! Strings are double-quoted with `""` as the escaped quote and may span
//! lines. Point tiers (`TextTier`) are skipped and reported.

use std::fmt::Write as _;

use super::{AnnotationError, Result};

/// Slack when checking that interval bounds meet.
const CONTIGUITY_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    pub start_s: f64,
    pub end_s: f64,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotationTier {
    pub name: String,
    pub xmin: f64,
    pub xmax: f64,
    pub intervals: Vec<Interval>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextGrid {
    pub xmin: f64,
    pub xmax: f64,
    pub tiers: Vec<AnnotationTier>,
    /// Names of point tiers that were skipped.
    pub skipped: Vec<String>,
}

impl TextGrid {
    /// The named tier, or the first interval tier when `name` is `None`.
    pub fn tier(&self, name: Option<&str>) -> Option<&AnnotationTier> {
        match name {
            Some(n) => self.tiers.iter().find(|t| t.name == n),
            None => self.tiers.first(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Str(String),
    Word(String),
}

fn lex(text: &str) -> Result<Vec<(Token, usize)>> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1;
    while let Some(&c) = chars.peek() {
        if c == '\n' {
            line += 1;
            chars.next();
        } else if c.is_whitespace() {
            chars.next();
        } else if c == '"' {
            chars.next();
            let start_line = line;
            let mut s = String::new();
            loop {
                match chars.next() {
                    Some('"') if chars.peek() == Some(&'"') => {
                        chars.next();
                        s.push('"');
                    }
                    Some('"') => break,
                    Some(ch) => {
                        if ch == '\n' {
                            line += 1;
                        }
                        s.push(ch);
                    }
                    None => {
                        return Err(AnnotationError::TextGrid {
                            line: start_line,
                            msg: "unterminated string".into(),
                        })
                    }
                }
            }
            tokens.push((Token::Str(s), start_line));
        } else {
            let mut w = String::new();
            while let Some(&ch) = chars.peek() {
                if ch.is_whitespace() || ch == '"' {
                    break;
                }
                w.push(ch);
                chars.next();
            }
            tokens.push((Token::Word(w), line));
        }
    }
    Ok(tokens)
}

const KEYS: [&str; 9] = [
    "xmin", "xmax", "class", "name", "size", "text", "number", "time", "mark",
];

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn line(&self) -> usize {
        self.tokens
            .get(self.pos.min(self.tokens.len().saturating_sub(1)))
            .map_or(0, |t| t.1)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(AnnotationError::TextGrid {
            line: self.line(),
            msg: msg.into(),
        })
    }

    fn is_word(&self, at: usize, w: &str) -> bool {
        matches!(self.tokens.get(at), Some((Token::Word(x), _)) if x == w)
    }

    /// Skips structural tokens up to `key =` and returns the value token.
    fn value(&mut self, key: &str) -> Result<Token> {
        while self.pos < self.tokens.len() {
            if let (Token::Word(w), _) = &self.tokens[self.pos] {
                let is_assignment = self.is_word(self.pos + 1, "=");
                if w == key && is_assignment {
                    let Some((v, _)) = self.tokens.get(self.pos + 2).cloned() else {
                        self.pos = self.tokens.len();
                        return self.err(format!("missing value for `{key}`"));
                    };
                    self.pos += 3;
                    return Ok(v);
                }
                if is_assignment && KEYS.contains(&w.as_str()) {
                    return self.err(format!("expected `{key}`, found `{w}`"));
                }
            }
            self.pos += 1;
        }
        self.err(format!("unexpected end of file while looking for `{key}`"))
    }

    fn number(&mut self, key: &str) -> Result<f64> {
        match self.value(key)? {
            Token::Word(w) => match w.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => {
                    self.pos -= 1;
                    self.err(format!("malformed number `{w}` for `{key}`"))
                }
            },
            Token::Str(s) => {
                self.pos -= 1;
                self.err(format!("expected a number for `{key}`, found string \"{s}\""))
            }
        }
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let v = self.number(key)?;
        if v < 0.0 || v.fract() != 0.0 {
            self.pos -= 1;
            return self.err(format!("`{key}` must be a non-negative integer, found {v}"));
        }
        Ok(v as usize)
    }

    fn string(&mut self, key: &str) -> Result<String> {
        match self.value(key)? {
            Token::Str(s) => Ok(s),
            Token::Word(w) => {
                self.pos -= 1;
                self.err(format!("expected a quoted string for `{key}`, found `{w}`"))
            }
        }
    }
}

/// Parses long-format TextGrid text.
pub fn parse_textgrid(text: &str) -> Result<TextGrid> {
    let mut p = Parser {
        tokens: lex(text)?,
        pos: 0,
    };
    let header: Vec<&str> = p
        .tokens
        .iter()
        .filter_map(|(t, _)| match t {
            Token::Str(s) => Some(s.as_str()),
            _ => None,
        })
        .take(2)
        .collect();
    if header != ["ooTextFile", "TextGrid"] {
        return p.err("not a long-format TextGrid (expected \"ooTextFile\" / \"TextGrid\" header)");
    }
    p.pos = p
        .tokens
        .iter()
        .position(|(t, _)| *t == Token::Str("TextGrid".into()))
        .expect("header checked")
        + 1;
    let xmin = p.number("xmin")?;
    let xmax = p.number("xmax")?;
    let n_tiers = if p.tokens[p.pos..]
        .iter()
        .any(|(t, _)| *t == Token::Word("<exists>".into()))
    {
        p.count("size")?
    } else {
        0
    };
    let mut tiers = Vec::new();
    let mut skipped = Vec::new();
    for _ in 0..n_tiers {
        let class = p.string("class")?;
        let name = p.string("name")?;
        let tmin = p.number("xmin")?;
        let tmax = p.number("xmax")?;
        match class.as_str() {
            "IntervalTier" => {
                let n = p.count("size")?;
                let mut intervals = Vec::with_capacity(n);
                for _ in 0..n {
                    let start_s = p.number("xmin")?;
                    let end_s = p.number("xmax")?;
                    let text = p.string("text")?;
                    if !(start_s < end_s) {
                        return p.err(format!(
                            "interval [{start_s}, {end_s}] in tier \"{name}\" is empty or reversed"
                        ));
                    }
                    if let Some(prev) = intervals.last() {
                        let prev: &Interval = prev;
                        if (prev.end_s - start_s).abs() > CONTIGUITY_EPS {
                            return p.err(format!(
                                "tier \"{name}\": interval starting at {start_s} does not meet the previous end {}",
                                prev.end_s
                            ));
                        }
                    }
                    intervals.push(Interval { start_s, end_s, text });
                }
                if let (Some(first), Some(last)) = (intervals.first(), intervals.last()) {
                    if (first.start_s - tmin).abs() > CONTIGUITY_EPS || (last.end_s - tmax).abs() > CONTIGUITY_EPS {
                        return p.err(format!("tier \"{name}\" intervals do not cover [{tmin}, {tmax}]"));
                    }
                }
                tiers.push(AnnotationTier {
                    name,
                    xmin: tmin,
                    xmax: tmax,
                    intervals,
                });
            }
            "TextTier" => {
                let n = p.count("size")?;
                for _ in 0..n {
                    if p.tokens[p.pos..]
                        .iter()
                        .take(4)
                        .any(|(t, _)| *t == Token::Word("time".into()))
                    {
                        p.number("time")?;
                    } else {
                        p.number("number")?;
                    }
                    p.string("mark")?;
                }
                log::warn!("skipping point tier \"{name}\"");
                skipped.push(name);
            }
            other => return p.err(format!("unknown tier class \"{other}\"")),
        }
    }
    Ok(TextGrid {
        xmin,
        xmax,
        tiers,
        skipped,
    })
}

/// Decodes UTF-8 (with or without BOM) or BOM-marked UTF-16 and parses.
pub fn parse_textgrid_bytes(bytes: &[u8]) -> Result<TextGrid> {
    let text = decode(bytes)?;
    parse_textgrid(&text)
}

fn decode(bytes: &[u8]) -> Result<String> {
    let utf16 = |be: bool| -> Result<String> {
        let body = &bytes[2..];
        if !body.len().is_multiple_of(2) {
            return Err(AnnotationError::Encoding("odd byte count in UTF-16 text".into()));
        }
        let units: Vec<u16> = body
            .chunks_exact(2)
            .map(|c| {
                if be {
                    u16::from_be_bytes([c[0], c[1]])
                } else {
                    u16::from_le_bytes([c[0], c[1]])
                }
            })
            .collect();
        String::from_utf16(&units).map_err(|_| AnnotationError::Encoding("invalid UTF-16".into()))
    };
    match bytes {
        [0xFF, 0xFE, ..] => utf16(false),
        [0xFE, 0xFF, ..] => utf16(true),
        [0xEF, 0xBB, 0xBF, rest @ ..] => {
            String::from_utf8(rest.to_vec()).map_err(|_| AnnotationError::Encoding("invalid UTF-8 after BOM".into()))
        }
        _ => String::from_utf8(bytes.to_vec())
            .map_err(|_| AnnotationError::Encoding("not UTF-8 and no UTF-16 byte-order mark".into())),
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// Writes long-format TextGrid text. Numbers use the shortest exact
/// decimal form, so parsing the output reproduces the input bit for bit.
pub fn serialize_textgrid(tg: &TextGrid) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "File type = \"ooTextFile\"");
    let _ = writeln!(out, "Object class = \"TextGrid\"");
    let _ = writeln!(out);
    let _ = writeln!(out, "xmin = {} ", tg.xmin);
    let _ = writeln!(out, "xmax = {} ", tg.xmax);
    let _ = writeln!(out, "tiers? <exists> ");
    let _ = writeln!(out, "size = {} ", tg.tiers.len());
    let _ = writeln!(out, "item []: ");
    for (i, tier) in tg.tiers.iter().enumerate() {
        let _ = writeln!(out, "    item [{}]:", i + 1);
        let _ = writeln!(out, "        class = \"IntervalTier\" ");
        let _ = writeln!(out, "        name = {} ", quote(&tier.name));
        let _ = writeln!(out, "        xmin = {} ", tier.xmin);
        let _ = writeln!(out, "        xmax = {} ", tier.xmax);
        let _ = writeln!(out, "        intervals: size = {} ", tier.intervals.len());
        for (j, iv) in tier.intervals.iter().enumerate() {
            let _ = writeln!(out, "        intervals [{}]:", j + 1);
            let _ = writeln!(out, "            xmin = {} ", iv.start_s);
            let _ = writeln!(out, "            xmax = {} ", iv.end_s);
            let _ = writeln!(out, "            text = {} ", quote(&iv.text));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(intervals: &[(f64, f64, &str)]) -> String {
        let tg = TextGrid {
            xmin: 0.0,
            xmax: 8.0,
            tiers: vec![AnnotationTier {
                name: "cry".into(),
                xmin: 0.0,
                xmax: 8.0,
                intervals: intervals
                    .iter()
                    .map(|&(a, b, t)| Interval {
                        start_s: a,
                        end_s: b,
                        text: t.into(),
                    })
                    .collect(),
            }],
            skipped: vec![],
        };
        serialize_textgrid(&tg)
    }

    #[test]
    fn single_silent_interval() {
        let tg = parse_textgrid(&grid(&[(0.0, 8.0, "")])).unwrap();
        assert_eq!(tg.tiers.len(), 1);
        assert_eq!(
            tg.tiers[0].intervals,
            vec![Interval {
                start_s: 0.0,
                end_s: 8.0,
                text: String::new()
            }]
        );
    }

    #[test]
    fn round_trip_with_quotes_and_newlines() {
        let text = grid(&[(0.0, 2.0, "cry \"loud\""), (2.0, 2.5, "two\nlines"), (2.5, 8.0, "")]);
        let tg = parse_textgrid(&text).unwrap();
        assert_eq!(tg.tiers[0].intervals[0].text, "cry \"loud\"");
        assert_eq!(tg.tiers[0].intervals[1].text, "two\nlines");
        assert_eq!(parse_textgrid(&serialize_textgrid(&tg)).unwrap(), tg);
    }

    #[test]
    fn rejects_degenerate_and_gapped_intervals() {
        let zero = grid(&[(0.0, 2.0, "a"), (2.0, 2.0, ""), (2.0, 8.0, "")]);
        assert!(matches!(parse_textgrid(&zero), Err(AnnotationError::TextGrid { .. })));
        let gap = grid(&[(0.0, 2.0, "a"), (3.0, 8.0, "")]);
        assert!(parse_textgrid(&gap).unwrap_err().to_string().contains("does not meet"));
    }

    #[test]
    fn malformed_number_reports_line() {
        let text = grid(&[(0.0, 8.0, "")]).replacen("xmax = 8 ", "xmax = 8.0.1 ", 2);
        let err = parse_textgrid(&text).unwrap_err();
        match err {
            AnnotationError::TextGrid { line, msg } => {
                assert!(msg.contains("malformed number"), "{msg}");
                assert!(line > 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn point_tiers_are_skipped() {
        let text = r#"File type = "ooTextFile"
Object class = "TextGrid"

xmin = 0
xmax = 4
tiers? <exists>
size = 2
item []:
    item [1]:
        class = "TextTier"
        name = "clicks"
        xmin = 0
        xmax = 4
        points: size = 1
        points [1]:
            number = 1.5
            mark = "x"
    item [2]:
        class = "IntervalTier"
        name = "cry"
        xmin = 0
        xmax = 4
        intervals: size = 1
        intervals [1]:
            xmin = 0
            xmax = 4
            text = "cry"
"#;
        let tg = parse_textgrid(text).unwrap();
        assert_eq!(tg.skipped, vec!["clicks".to_string()]);
        assert_eq!(tg.tiers.len(), 1);
        assert_eq!(tg.tier(None).unwrap().name, "cry");
    }

    #[test]
    fn encodings() {
        let text = grid(&[(0.0, 8.0, "läuft")]);
        let mut le = vec![0xFF, 0xFE];
        text.encode_utf16().for_each(|u| le.extend_from_slice(&u.to_le_bytes()));
        let mut be = vec![0xFE, 0xFF];
        text.encode_utf16().for_each(|u| be.extend_from_slice(&u.to_be_bytes()));
        let mut bom = vec![0xEF, 0xBB, 0xBF];
        bom.extend_from_slice(text.as_bytes());
        let plain = parse_textgrid(&text).unwrap();
        for bytes in [le, be, bom] {
            assert_eq!(parse_textgrid_bytes(&bytes).unwrap(), plain);
        }
        assert!(matches!(
            parse_textgrid_bytes(&[0x80, 0x81, 0x82]),
            Err(AnnotationError::Encoding(_))
        ));
    }

    #[test]
    fn rejects_non_textgrid() {
        assert!(parse_textgrid("hello").is_err());
        assert!(parse_textgrid("File type = \"ooTextFile\"\nObject class = \"TextGrid\"\nxmin = 0\n").is_err());
    }
}
