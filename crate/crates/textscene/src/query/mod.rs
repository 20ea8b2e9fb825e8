//! Query intermediate representation: semantic triplets over object
//! references, with instance counts and attributes.
//!
//! Two front ends produce a [`Query`]: a line-oriented triplet DSL
//! ([`parse_dsl`]) and a rule-based English pattern matcher
//! ([`parse_english`]). [`expand_counts`] then rewrites counted references
//! into explicit instances, turning group mentions into either replicated
//! triplets (group as target) or a virtual bounding object (group as
//! reference).

mod dsl;
mod english;

pub use dsl::{parse_dsl, render_dsl};
pub use english::{parse_english, RelationDictionary, DEFAULT_RELATION_DICTIONARY_TOML};

use std::collections::BTreeMap;
use std::fmt;

use crate::scene::ObjectLibrary;

/// Canonical spatial relation names accepted in triplets.
///
/// `Left`/`Right` are the `on-left`/`on-right` atomic relations under the
/// shorter token the triplet listings use.
#[derive(Clone, Copy, PartialEq, Eq, Debug, PartialOrd, Ord)]
pub enum Relation {
    Near,
    On,
    Above,
    Under,
    Behind,
    Front,
    Left,
    Right,
    NextTo,
    SideBySide,
    InARow,
}

impl Relation {
    pub const ALL: [Relation; 11] = [
        Relation::Near,
        Relation::On,
        Relation::Above,
        Relation::Under,
        Relation::Behind,
        Relation::Front,
        Relation::Left,
        Relation::Right,
        Relation::NextTo,
        Relation::SideBySide,
        Relation::InARow,
    ];

    pub fn canonical(&self) -> &'static str {
        match self {
            Relation::Near => "near",
            Relation::On => "on",
            Relation::Above => "above",
            Relation::Under => "under",
            Relation::Behind => "behind",
            Relation::Front => "front",
            Relation::Left => "left",
            Relation::Right => "right",
            Relation::NextTo => "next-to",
            Relation::SideBySide => "side-by-side",
            Relation::InARow => "in-a-row",
        }
    }

    /// Accepts canonical tokens plus the paper-style aliases.
    pub fn parse(token: &str) -> Option<Relation> {
        Some(match token {
            "near" => Relation::Near,
            "on" => Relation::On,
            "above" => Relation::Above,
            "under" | "below" => Relation::Under,
            "behind" => Relation::Behind,
            "front" | "in-front-of" => Relation::Front,
            "left" | "on-left" => Relation::Left,
            "right" | "on-right" => Relation::Right,
            "next-to" => Relation::NextTo,
            "side-by-side" => Relation::SideBySide,
            "in-a-row" => Relation::InARow,
            _ => return None,
        })
    }

    /// Composite relations lower onto several atomic constraints.
    pub fn is_composite(&self) -> bool {
        matches!(
            self,
            Relation::NextTo | Relation::SideBySide | Relation::InARow
        )
    }

    /// Relations that may appear as a self-triplet on a counted group and
    /// are then chained over consecutive instances.
    pub fn chains_over_group(&self) -> bool {
        matches!(self, Relation::InARow | Relation::SideBySide)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical())
    }
}

/// Reference to one object (or sub-object, instance or group) in a query.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ObjectRef {
    pub category: String,
    pub category_id: u32,
    pub sub_object: Option<String>,
    pub instance_index: Option<u32>,
    /// `Some(k)` marks the virtual group object covering instances `0..k`.
    pub group_size: Option<u32>,
}

impl ObjectRef {
    pub fn new(category: impl Into<String>, category_id: u32) -> ObjectRef {
        ObjectRef {
            category: category.into(),
            category_id,
            sub_object: None,
            instance_index: None,
            group_size: None,
        }
    }

    pub fn with_sub(mut self, sub: impl Into<String>) -> ObjectRef {
        self.sub_object = Some(sub.into());
        self
    }

    pub fn instance(&self, j: u32) -> ObjectRef {
        ObjectRef {
            instance_index: Some(j),
            group_size: None,
            ..self.clone()
        }
    }

    /// The reference without sub-object qualification: the entity that owns
    /// pose variables.
    pub fn base(&self) -> ObjectRef {
        ObjectRef {
            sub_object: None,
            ..self.clone()
        }
    }

    /// Canonical rendering `category-id[:sub][-instance]`; groups render as
    /// `group(member, ...)`.
    pub fn canonical(&self) -> String {
        if let Some(k) = self.group_size {
            let members: Vec<String> = (0..k)
                .map(|j| format!("{}-{}-{}", self.category, self.category_id, j))
                .collect();
            return format!("group({})", members.join(","));
        }
        let mut s = format!("{}-{}", self.category, self.category_id);
        if let Some(sub) = &self.sub_object {
            s.push(':');
            s.push_str(sub);
        }
        if let Some(j) = self.instance_index {
            s.push('-');
            s.push_str(&j.to_string());
        }
        s
    }
}

impl fmt::Display for ObjectRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl fmt::Debug for ObjectRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// `(target object, reference object, relation)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SemanticTriplet {
    pub target: ObjectRef,
    pub reference: ObjectRef,
    pub relation: Relation,
}

impl SemanticTriplet {
    pub fn canonical(&self) -> String {
        format!(
            "({}, {}, {})",
            self.target.canonical(),
            self.reference.canonical(),
            self.relation
        )
    }
}

/// Parsed scene description: ordered triplets plus per-reference counts and
/// attributes (size variants such as `triple`, or placement attributes such
/// as `against-wall`).
#[derive(Clone, PartialEq, Debug, Default)]
pub struct Query {
    pub triplets: Vec<SemanticTriplet>,
    pub counts: BTreeMap<ObjectRef, u32>,
    pub attributes: BTreeMap<ObjectRef, Vec<String>>,
}

impl Query {
    /// Ensures every reference mentioned in a triplet has a counts entry.
    pub fn normalize(&mut self) {
        let mut mentioned = Vec::new();
        for t in &self.triplets {
            mentioned.push(t.target.base());
            if t.reference.group_size.is_none() {
                mentioned.push(t.reference.base());
            }
        }
        for r in mentioned {
            self.counts.entry(r).or_insert(1);
        }
    }

    /// Canonical triplet listing, one `(target, reference, relation)` line
    /// per triplet.
    pub fn render_triplets(&self) -> Vec<String> {
        self.triplets.iter().map(|t| t.canonical()).collect()
    }

    pub fn attributes_of(&self, r: &ObjectRef) -> &[String] {
        self.attributes
            .get(&r.base())
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    fn push_attribute(&mut self, r: ObjectRef, attr: String) {
        let attrs = self.attributes.entry(r).or_default();
        if !attrs.contains(&attr) {
            attrs.push(attr);
        }
    }
}

/// Structured parser diagnostic.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Diagnostic {
    pub line: usize,
    pub severity: Severity,
    pub message: String,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{}: line {}: {}", sev, self.line, self.message)
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
#[error("parse error at line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
#[error("invalid query: {0}")]
pub struct ValidationError(pub String);

/// Rewrites counted references into explicit instances.
///
/// A counted reference appearing as a triplet target becomes one triplet per
/// instance; appearing as a reference it becomes a single triplet against
/// the virtual group object bounded by all instances. Self-triplets of
/// chainable relations (`in-a-row`, `side-by-side`) become constraints over
/// consecutive instances. Idempotent.
pub fn expand_counts(q: &Query) -> Result<Query, ValidationError> {
    for (r, &k) in &q.counts {
        if k == 0 {
            return Err(ValidationError(format!("count 0 for {r}")));
        }
    }
    let count_of = |r: &ObjectRef| q.counts.get(&r.base()).copied().unwrap_or(1);

    let mut out = Query::default();
    for t in &q.triplets {
        let tk = count_of(&t.target);
        let rk = count_of(&t.reference);
        if t.target.base() == t.reference.base() {
            if !t.relation.chains_over_group() || tk < 2 {
                return Err(ValidationError(format!(
                    "triplet {} relates an object to itself",
                    t.canonical()
                )));
            }
            for j in 0..tk - 1 {
                out.triplets.push(SemanticTriplet {
                    target: t.target.instance(j),
                    reference: t.target.instance(j + 1),
                    relation: t.relation,
                });
            }
            continue;
        }
        let references = if rk > 1 {
            vec![ObjectRef {
                group_size: Some(rk),
                ..t.reference.clone()
            }]
        } else {
            vec![t.reference.clone()]
        };
        let targets: Vec<ObjectRef> = if tk > 1 {
            (0..tk).map(|j| t.target.instance(j)).collect()
        } else {
            vec![t.target.clone()]
        };
        for target in &targets {
            for reference in &references {
                out.triplets.push(SemanticTriplet {
                    target: target.clone(),
                    reference: reference.clone(),
                    relation: t.relation,
                });
            }
        }
    }

    for (r, &k) in &q.counts {
        let attrs = q.attributes.get(r).cloned().unwrap_or_default();
        if k > 1 {
            for j in 0..k {
                let inst = r.instance(j);
                out.counts.insert(inst.clone(), 1);
                for a in &attrs {
                    out.push_attribute(inst.clone(), a.clone());
                }
            }
        } else {
            out.counts.insert(r.clone(), 1);
            for a in &attrs {
                out.push_attribute(r.clone(), a.clone());
            }
        }
    }
    // attributes on refs without a counts entry (already-expanded queries)
    for (r, attrs) in &q.attributes {
        if !out.counts.contains_key(r) && !out.attributes.contains_key(r) {
            for a in attrs {
                out.push_attribute(r.clone(), a.clone());
            }
        }
    }
    out.normalize();
    Ok(out)
}

/// Validates a reference against the library: category exists and the
/// sub-object, if any, names a region of that category.
pub fn validate_ref(r: &ObjectRef, lib: &ObjectLibrary, line: usize) -> Result<(), ParseError> {
    let model = lib
        .get(&r.category)
        .ok_or_else(|| ParseError::new(line, format!("unknown category `{}`", r.category)))?;
    if let Some(sub) = &r.sub_object {
        if !model.regions.contains_key(sub) {
            return Err(ParseError::new(
                line,
                format!("unknown sub-object `{sub}` for category `{}`", r.category),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(cat: &str, id: u32) -> ObjectRef {
        ObjectRef::new(cat, id)
    }

    #[test]
    fn canonical_renderings() {
        assert_eq!(r("bed", 0).canonical(), "bed-0");
        assert_eq!(r("bed", 0).with_sub("head").canonical(), "bed-0:head");
        assert_eq!(r("chair", 0).instance(2).canonical(), "chair-0-2");
        let group = ObjectRef {
            group_size: Some(2),
            ..r("chair", 0)
        };
        assert_eq!(group.canonical(), "group(chair-0-0,chair-0-1)");
    }

    #[test]
    fn expand_replicates_group_targets() {
        let mut q = Query::default();
        q.triplets.push(SemanticTriplet {
            target: r("chair", 0),
            reference: r("desk", 0),
            relation: Relation::Front,
        });
        q.counts.insert(r("chair", 0), 3);
        q.normalize();
        let e = expand_counts(&q).unwrap();
        assert_eq!(e.triplets.len(), 3);
        for (j, t) in e.triplets.iter().enumerate() {
            assert_eq!(t.target, r("chair", 0).instance(j as u32));
            assert_eq!(t.reference, r("desk", 0));
            assert_eq!(t.relation, Relation::Front);
        }
        assert!(e.counts.values().all(|&k| k == 1));
    }

    #[test]
    fn expand_is_identity_for_unit_counts() {
        let mut q = Query::default();
        q.triplets.push(SemanticTriplet {
            target: r("lamp", 0),
            reference: r("table", 0),
            relation: Relation::On,
        });
        q.normalize();
        let e = expand_counts(&q).unwrap();
        assert_eq!(e, q);
    }

    #[test]
    fn expand_builds_virtual_group_reference() {
        let mut q = Query::default();
        q.triplets.push(SemanticTriplet {
            target: r("lamp", 0),
            reference: r("chair", 0),
            relation: Relation::Above,
        });
        q.counts.insert(r("chair", 0), 2);
        q.normalize();
        let e = expand_counts(&q).unwrap();
        assert_eq!(e.triplets.len(), 1);
        assert_eq!(
            e.triplets[0].reference.canonical(),
            "group(chair-0-0,chair-0-1)"
        );
        assert!(e.counts.contains_key(&r("chair", 0).instance(0)));
        assert!(e.counts.contains_key(&r("chair", 0).instance(1)));
    }

    #[test]
    fn expand_chains_row_self_triplet() {
        let mut q = Query::default();
        q.triplets.push(SemanticTriplet {
            target: r("chair", 0),
            reference: r("chair", 0),
            relation: Relation::InARow,
        });
        q.counts.insert(r("chair", 0), 3);
        q.normalize();
        let e = expand_counts(&q).unwrap();
        assert_eq!(e.triplets.len(), 2);
        assert_eq!(e.triplets[0].target, r("chair", 0).instance(0));
        assert_eq!(e.triplets[0].reference, r("chair", 0).instance(1));
        assert_eq!(e.triplets[1].target, r("chair", 0).instance(1));
        assert_eq!(e.triplets[1].reference, r("chair", 0).instance(2));
    }

    #[test]
    fn expand_is_idempotent() {
        let mut q = Query::default();
        q.triplets.push(SemanticTriplet {
            target: r("chair", 0),
            reference: r("desk", 0),
            relation: Relation::Front,
        });
        q.triplets.push(SemanticTriplet {
            target: r("lamp", 0),
            reference: r("chair", 0),
            relation: Relation::Above,
        });
        q.counts.insert(r("chair", 0), 2);
        q.attributes.insert(r("desk", 0), vec!["long".into()]);
        q.normalize();
        let once = expand_counts(&q).unwrap();
        let twice = expand_counts(&once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn expand_rejects_zero_count() {
        let mut q = Query::default();
        q.counts.insert(r("chair", 0), 0);
        assert!(expand_counts(&q).is_err());
    }

    #[test]
    fn expand_rejects_plain_self_triplet() {
        let mut q = Query::default();
        q.triplets.push(SemanticTriplet {
            target: r("chair", 0),
            reference: r("chair", 0),
            relation: Relation::Near,
        });
        q.normalize();
        assert!(expand_counts(&q).is_err());
    }
}
