//! Channel-expression grammar.
//!
//! ```text
//! expr := leaf | "tensor(" expr "," expr ")" | "dsum(" expr "," expr ")" | "comp(" expr ")"
//! leaf := "erasure:p=<float>,d=<int>" | "platypus:d=<int>"
//!       | "rocket:d=<int>[,unitaries=clifford|haar,samples=<int>,seed=<int>]"
//! ```
//!
//! Whitespace is insignificant. Because leaf parameters and combinator
//! arguments are both comma separated, a comma followed by `name =` continues
//! the current leaf and anything else ends it.

use std::fmt;
use std::str::FromStr;

use crate::error::{ParseError, Result};
use crate::protocol::{unitary_pairs, UnitarySource};

use super::{erasure, platypus, rocket_flagged, Channel};

/// Default number of Haar-sampled unitary pairs for a rocket leaf.
pub const DEFAULT_ROCKET_SAMPLES: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub enum ChannelSpec {
    Erasure { p: f64, d: usize },
    Platypus { d: usize },
    Rocket {
        d: usize,
        unitaries: Option<UnitarySource>,
        samples: Option<usize>,
        seed: Option<u64>,
    },
    Tensor(Box<ChannelSpec>, Box<ChannelSpec>),
    DirectSum(Box<ChannelSpec>, Box<ChannelSpec>),
    Complement(Box<ChannelSpec>),
}

impl fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelSpec::Erasure { p, d } => write!(f, "erasure:p={p},d={d}"),
            ChannelSpec::Platypus { d } => write!(f, "platypus:d={d}"),
            ChannelSpec::Rocket { d, unitaries, samples, seed } => {
                write!(f, "rocket:d={d}")?;
                if let Some(u) = unitaries {
                    write!(f, ",unitaries={u}")?;
                }
                if let Some(s) = samples {
                    write!(f, ",samples={s}")?;
                }
                if let Some(s) = seed {
                    write!(f, ",seed={s}")?;
                }
                Ok(())
            }
            ChannelSpec::Tensor(a, b) => write!(f, "tensor({a}, {b})"),
            ChannelSpec::DirectSum(a, b) => write!(f, "dsum({a}, {b})"),
            ChannelSpec::Complement(a) => write!(f, "comp({a})"),
        }
    }
}

impl FromStr for ChannelSpec {
    type Err = ParseError;
    fn from_str(s: &str) -> std::result::Result<Self, ParseError> {
        parse_channel_spec(s)
    }
}

pub fn parse_channel_spec(text: &str) -> std::result::Result<ChannelSpec, ParseError> {
    let mut parser = Parser { src: text, pos: 0 };
    let expr = parser.expr()?;
    parser.skip_ws();
    if parser.pos < text.len() {
        return Err(parser.error_at(parser.pos, "unexpected trailing input"));
    }
    Ok(expr)
}

/// Builds the channel described by `spec`; rocket leaves yield a flagged family.
pub fn build(spec: &ChannelSpec) -> Result<Channel> {
    Ok(match spec {
        ChannelSpec::Erasure { p, d } => Channel::Plain(erasure(*p, *d)?),
        ChannelSpec::Platypus { d } => Channel::Plain(platypus(*d)?),
        ChannelSpec::Rocket { d, unitaries, samples, seed } => {
            let source = unitaries.unwrap_or(if *d == 2 { UnitarySource::Clifford } else { UnitarySource::Haar });
            let pairs = unitary_pairs(*d, source, samples.unwrap_or(DEFAULT_ROCKET_SAMPLES), seed.unwrap_or(0))?;
            Channel::Flagged(rocket_flagged(*d, &pairs)?)
        }
        ChannelSpec::Tensor(a, b) => build(a)?.tensor(&build(b)?)?,
        ChannelSpec::DirectSum(a, b) => build(a)?.direct_sum(&build(b)?)?,
        ChannelSpec::Complement(a) => build(a)?.complement(),
    })
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

struct Param<'a> {
    key: &'a str,
    key_pos: usize,
    value: &'a str,
    value_pos: usize,
}

impl<'a> Parser<'a> {
    fn error_at(&self, offset: usize, message: impl Into<String>) -> ParseError {
        ParseError { offset, message: message.into() }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn expect(&mut self, want: char) -> std::result::Result<(), ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == want => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => Err(self.error_at(self.pos, format!("expected '{want}', found '{c}'"))),
            None => Err(self.error_at(self.pos, format!("expected '{want}', found end of input"))),
        }
    }

    fn ident(&mut self) -> Option<(usize, &'a str)> {
        let start = self.pos;
        let rest = &self.src[start..];
        let len = rest
            .char_indices()
            .find(|&(i, c)| !(c.is_ascii_alphabetic() || c == '_' || (i > 0 && c.is_ascii_digit())))
            .map_or(rest.len(), |(i, _)| i);
        if len == 0 {
            return None;
        }
        self.pos += len;
        Some((start, &rest[..len]))
    }

    fn value_token(&mut self) -> (usize, &'a str) {
        let start = self.pos;
        let rest = &self.src[start..];
        let len = rest
            .char_indices()
            .find(|&(_, c)| c.is_whitespace() || matches!(c, ',' | '(' | ')'))
            .map_or(rest.len(), |(i, _)| i);
        self.pos += len;
        (start, &rest[..len])
    }

    fn expr(&mut self) -> std::result::Result<ChannelSpec, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let (_, name) = self
            .ident()
            .ok_or_else(|| self.error_at(start, "expected a channel expression"))?;
        match name {
            "tensor" | "dsum" => {
                self.expect('(')?;
                let a = self.expr()?;
                self.expect(',')?;
                let b = self.expr()?;
                self.expect(')')?;
                Ok(if name == "tensor" {
                    ChannelSpec::Tensor(Box::new(a), Box::new(b))
                } else {
                    ChannelSpec::DirectSum(Box::new(a), Box::new(b))
                })
            }
            "comp" => {
                self.expect('(')?;
                let a = self.expr()?;
                self.expect(')')?;
                Ok(ChannelSpec::Complement(Box::new(a)))
            }
            "erasure" | "platypus" | "rocket" => {
                self.expect(':')?;
                let params = self.params()?;
                self.leaf(name, start, &params)
            }
            other => Err(self.error_at(start, format!("unknown channel name '{other}'"))),
        }
    }

    fn params(&mut self) -> std::result::Result<Vec<Param<'a>>, ParseError> {
        let mut params = Vec::new();
        loop {
            self.skip_ws();
            let key_pos = self.pos;
            let (_, key) = self
                .ident()
                .ok_or_else(|| self.error_at(key_pos, "expected a parameter name"))?;
            self.expect('=')?;
            self.skip_ws();
            let (value_pos, value) = self.value_token();
            if value.is_empty() {
                return Err(self.error_at(value_pos, format!("missing value for '{key}'")));
            }
            params.push(Param { key, key_pos, value, value_pos });

            let save = self.pos;
            self.skip_ws();
            if self.peek() != Some(',') {
                self.pos = save;
                break;
            }
            self.pos += 1;
            self.skip_ws();
            let after_comma = self.pos;
            let continues = self.ident().is_some() && {
                self.skip_ws();
                self.peek() == Some('=')
            };
            if continues {
                self.pos = after_comma;
            } else {
                self.pos = save;
                break;
            }
        }
        Ok(params)
    }

    fn leaf(&self, name: &str, start: usize, params: &[Param<'a>]) -> std::result::Result<ChannelSpec, ParseError> {
        let allowed: &[&str] = match name {
            "erasure" => &["p", "d"],
            "platypus" => &["d"],
            _ => &["d", "unitaries", "samples", "seed"],
        };
        for (i, p) in params.iter().enumerate() {
            if !allowed.contains(&p.key) {
                return Err(self.error_at(p.key_pos, format!("unknown parameter '{}' for {name}", p.key)));
            }
            if params[..i].iter().any(|q| q.key == p.key) {
                return Err(self.error_at(p.key_pos, format!("duplicate parameter '{}'", p.key)));
            }
        }
        let find = |key: &str| params.iter().find(|p| p.key == key);
        let require = |key: &str| {
            find(key).ok_or_else(|| self.error_at(start, format!("{name} requires parameter '{key}'")))
        };
        let dim = |p: &Param<'a>| -> std::result::Result<usize, ParseError> {
            let d: usize = p
                .value
                .parse()
                .map_err(|_| self.error_at(p.value_pos, format!("'{}' is not an integer", p.value)))?;
            if d < 2 {
                return Err(self.error_at(p.value_pos, format!("dimension {d} out of range (d >= 2)")));
            }
            Ok(d)
        };
        match name {
            "erasure" => {
                let pp = require("p")?;
                let p: f64 = pp
                    .value
                    .parse()
                    .map_err(|_| self.error_at(pp.value_pos, format!("'{}' is not a number", pp.value)))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(self.error_at(pp.value_pos, format!("probability {p} out of range [0, 1]")));
                }
                Ok(ChannelSpec::Erasure { p, d: dim(require("d")?)? })
            }
            "platypus" => Ok(ChannelSpec::Platypus { d: dim(require("d")?)? }),
            _ => {
                let d = dim(require("d")?)?;
                let unitaries = match find("unitaries") {
                    None => None,
                    Some(u) => {
                        let source: UnitarySource = u
                            .value
                            .parse()
                            .map_err(|_| self.error_at(u.value_pos, format!("unknown unitary source '{}'", u.value)))?;
                        if source == UnitarySource::Clifford && d != 2 {
                            return Err(self.error_at(u.value_pos, "clifford unitaries are only available for d=2"));
                        }
                        Some(source)
                    }
                };
                let samples = match find("samples") {
                    None => None,
                    Some(s) => {
                        let n: usize = s
                            .value
                            .parse()
                            .map_err(|_| self.error_at(s.value_pos, format!("'{}' is not an integer", s.value)))?;
                        if n == 0 {
                            return Err(self.error_at(s.value_pos, "samples must be positive"));
                        }
                        Some(n)
                    }
                };
                let seed = match find("seed") {
                    None => None,
                    Some(s) => Some(
                        s.value
                            .parse()
                            .map_err(|_| self.error_at(s.value_pos, format!("'{}' is not an integer", s.value)))?,
                    ),
                };
                Ok(ChannelSpec::Rocket { d, unitaries, samples, seed })
            }
        }
    }
}
