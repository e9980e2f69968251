//! Parser for the summary rule files.
//!
//! One rule per line: a quoted callee fullName followed by whitespace
//! separated tokens, each either a `SRC->DST` mapping over argument
//! positions (0 receiver, 1.. positional, -1 return) or one of the
//! shorthands PASSTHROUGH and TAINT_ALL. `#` starts a comment unless it
//! appears inside the quoted name.
//!
//! ```text
//! "Obj.transform:Obj(Obj)" 0->0 0->-1
//! "Clean.scrub"                          # no mappings: sanitizer
//! "io.read" PASSTHROUGH
//! ```

use super::{ArgPos, Mapping, MethodSemantics};
use std::fmt;

#[derive(Clone, Debug)]
pub struct SemDiagnostic {
    pub line: u32,
    pub message: String,
}

impl fmt::Display for SemDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

pub fn parse_semantics(source: &str) -> Result<Vec<MethodSemantics>, Vec<SemDiagnostic>> {
    let mut entries = Vec::new();
    let mut errors = Vec::new();
    for (i, raw) in source.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        match parse_line(line) {
            Ok(sem) => entries.push(sem),
            Err(message) => errors.push(SemDiagnostic { line: i as u32 + 1, message }),
        }
    }
    if errors.is_empty() {
        Ok(entries)
    } else {
        Err(errors)
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    for (idx, c) in line.char_indices() {
        match c {
            '"' => in_quote = !in_quote,
            '#' if !in_quote => return &line[..idx],
            _ => {}
        }
    }
    line
}

fn parse_line(line: &str) -> Result<MethodSemantics, String> {
    let rest = line
        .strip_prefix('"')
        .ok_or_else(|| "expected a quoted method name".to_string())?;
    let end = rest
        .find('"')
        .ok_or_else(|| "unterminated method name".to_string())?;
    let name = &rest[..end];
    if name.is_empty() {
        return Err("empty method name".to_string());
    }
    let mut sem = MethodSemantics::new(name);
    for token in rest[end + 1..].split_whitespace() {
        match token {
            "PASSTHROUGH" => sem.passthrough = true,
            "TAINT_ALL" => sem.taint_all = true,
            _ => {
                let (src, dst) = token
                    .split_once("->")
                    .ok_or_else(|| format!("expected SRC->DST mapping, found `{token}`"))?;
                let src = parse_pos(src)?;
                if matches!(src, ArgPos::Index(i) if i < 0) {
                    return Err("return cannot be a flow source".to_string());
                }
                let dst = parse_pos(dst)?;
                if matches!(dst, ArgPos::Index(i) if i < -1) {
                    return Err(format!("destination index out of range in `{token}`"));
                }
                sem.mappings.push(Mapping { src, dst });
            }
        }
    }
    Ok(sem)
}

fn parse_pos(s: &str) -> Result<ArgPos, String> {
    if s.is_empty() {
        return Err("empty argument position".to_string());
    }
    let mut chars = s.chars();
    let first = chars.next().unwrap();
    if first == '-' || first.is_ascii_digit() {
        s.parse::<i32>()
            .map(ArgPos::Index)
            .map_err(|_| format!("invalid argument index `{s}`"))
    } else if (first.is_ascii_alphabetic() || first == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
    {
        Ok(ArgPos::Named(s.to_string()))
    } else {
        Err(format!("invalid argument position `{s}`"))
    }
}
