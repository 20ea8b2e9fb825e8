//! Line-oriented triplet DSL.
//!
//! One clause per line, `#` starts a comment:
//!
//! ```text
//! # counts and attributes are directives
//! count 3 chair-0
//! attr sofa-0 triple
//! # triplets are `target relation reference`
//! picture-0 above bed-0
//! night-stand-0 right bed-0:head
//! ```

use super::{validate_ref, ObjectRef, ParseError, Query, Relation, SemanticTriplet};
use crate::scene::ObjectLibrary;

/// Parses the DSL text, validating every reference against the library.
pub fn parse_dsl(text: &str, lib: &ObjectLibrary) -> Result<Query, ParseError> {
    let mut q = Query::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        match tokens[0] {
            "count" => {
                if tokens.len() != 3 {
                    return Err(ParseError::new(line_no, "expected `count N category-id`"));
                }
                let n: u32 = tokens[1].parse().map_err(|_| {
                    ParseError::new(line_no, format!("invalid count `{}`", tokens[1]))
                })?;
                if n == 0 {
                    return Err(ParseError::new(line_no, "count must be at least 1"));
                }
                let r = parse_object_ref(tokens[2], lib, line_no)?;
                if r.sub_object.is_some() {
                    return Err(ParseError::new(line_no, "counts apply to whole objects"));
                }
                q.counts.insert(r, n);
            }
            "attr" => {
                if tokens.len() != 3 {
                    return Err(ParseError::new(line_no, "expected `attr category-id name`"));
                }
                let r = parse_object_ref(tokens[1], lib, line_no)?;
                q.attributes
                    .entry(r.base())
                    .or_default()
                    .push(tokens[2].to_string());
                q.counts.entry(r.base()).or_insert(1);
            }
            _ => {
                if tokens.len() != 3 {
                    return Err(ParseError::new(
                        line_no,
                        "expected `target relation reference`",
                    ));
                }
                let target = parse_object_ref(tokens[0], lib, line_no)?;
                let relation = Relation::parse(tokens[1]).ok_or_else(|| {
                    ParseError::new(line_no, format!("unknown relation `{}`", tokens[1]))
                })?;
                let reference = parse_object_ref(tokens[2], lib, line_no)?;
                if target == reference && !relation.chains_over_group() {
                    return Err(ParseError::new(line_no, "target and reference must differ"));
                }
                q.triplets.push(SemanticTriplet {
                    target,
                    reference,
                    relation,
                });
            }
        }
    }
    q.normalize();
    Ok(q)
}

/// Renders a query back into DSL text; `parse_dsl` of the result rebuilds
/// the same query.
pub fn render_dsl(q: &Query) -> String {
    let mut out = String::new();
    let mentioned = |r: &ObjectRef| {
        q.triplets
            .iter()
            .any(|t| t.target.base() == *r || t.reference.base() == *r)
    };
    for (r, &k) in &q.counts {
        if k > 1 || !mentioned(r) {
            out.push_str(&format!("count {} {}\n", k, r.canonical()));
        }
    }
    for (r, attrs) in &q.attributes {
        for a in attrs {
            out.push_str(&format!("attr {} {}\n", r.canonical(), a));
        }
    }
    for t in &q.triplets {
        out.push_str(&format!(
            "{} {} {}\n",
            t.target.canonical(),
            t.relation,
            t.reference.canonical()
        ));
    }
    out
}

/// Parses `category-id[:sub][-instance]`, matching the category against the
/// library (category names themselves may contain hyphens, so the longest
/// known category prefix wins).
pub fn parse_object_ref(
    token: &str,
    lib: &ObjectLibrary,
    line: usize,
) -> Result<ObjectRef, ParseError> {
    let mut best: Option<&str> = None;
    for cat in lib.category_names() {
        if token.len() > cat.len()
            && token.starts_with(cat)
            && token.as_bytes()[cat.len()] == b'-'
            && best.map_or(true, |b| cat.len() > b.len())
        {
            best = Some(cat);
        }
    }
    let cat = best
        .ok_or_else(|| ParseError::new(line, format!("unknown category in reference `{token}`")))?;
    let rest = &token[cat.len() + 1..];
    let bad = || ParseError::new(line, format!("malformed reference `{token}`"));

    let digits_end = rest
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(rest.len());
    if digits_end == 0 {
        return Err(bad());
    }
    let id: u32 = rest[..digits_end].parse().map_err(|_| bad())?;
    let mut r = ObjectRef::new(cat, id);
    let mut tail = &rest[digits_end..];
    if let Some(sub_part) = tail.strip_prefix(':') {
        let sub_end = sub_part.find('-').unwrap_or(sub_part.len());
        if sub_end == 0 {
            return Err(bad());
        }
        r.sub_object = Some(sub_part[..sub_end].to_string());
        tail = &sub_part[sub_end..];
    }
    if let Some(inst) = tail.strip_prefix('-') {
        if inst.is_empty() || !inst.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        r.instance_index = Some(inst.parse().map_err(|_| bad())?);
        tail = "";
    }
    if !tail.is_empty() {
        return Err(bad());
    }
    validate_ref(&r, lib, line)?;
    Ok(r)
}
