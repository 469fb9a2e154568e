//! Attribute-based authorization: monotone AND/OR policies over attribute
//! strings, the matching function, and CA-issued attribute certificates.

mod certificate;
mod parser;

use std::collections::BTreeSet;
use std::fmt;

use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

use crate::encoding::Encoder;

pub use certificate::{issue_certificate, verify_certificate, AttributeCertificate};

pub const MAX_DEPTH: usize = 32;
pub const MAX_ATTRIBUTE_LEN: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("empty policy")]
    Empty,
    #[error("syntax error at token {token} (byte {offset}): {message}")]
    Syntax {
        token: usize,
        offset: usize,
        message: String,
    },
    #[error("policy deeper than {MAX_DEPTH} levels")]
    TooDeep,
    #[error("empty attribute")]
    EmptyAttribute,
    #[error("attribute longer than {MAX_ATTRIBUTE_LEN} bytes")]
    AttributeTooLong,
    #[error("certificate needs at least one attribute")]
    EmptyAttributeSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyNode {
    Leaf(String),
    And(Vec<PolicyNode>),
    Or(Vec<PolicyNode>),
}

impl PolicyNode {
    pub fn depth(&self) -> usize {
        match self {
            PolicyNode::Leaf(_) => 1,
            PolicyNode::And(c) | PolicyNode::Or(c) => {
                1 + c.iter().map(PolicyNode::depth).max().unwrap_or(0)
            }
        }
    }

    /// Flattens `And(And(..), ..)` / `Or(Or(..), ..)` and collapses single
    /// children, which is the form the parser produces.
    fn normalize(self) -> PolicyNode {
        fn flatten(children: Vec<PolicyNode>, and: bool) -> Vec<PolicyNode> {
            let mut out = Vec::with_capacity(children.len());
            for child in children.into_iter().map(PolicyNode::normalize) {
                match child {
                    PolicyNode::And(inner) if and => out.extend(inner),
                    PolicyNode::Or(inner) if !and => out.extend(inner),
                    other => out.push(other),
                }
            }
            out
        }
        match self {
            PolicyNode::Leaf(_) => self,
            PolicyNode::And(c) => {
                let mut c = flatten(c, true);
                if c.len() == 1 { c.pop().unwrap() } else { PolicyNode::And(c) }
            }
            PolicyNode::Or(c) => {
                let mut c = flatten(c, false);
                if c.len() == 1 { c.pop().unwrap() } else { PolicyNode::Or(c) }
            }
        }
    }

    fn validate(&self) -> Result<(), PolicyError> {
        match self {
            PolicyNode::Leaf(a) => check_attribute(a),
            PolicyNode::And(c) | PolicyNode::Or(c) => {
                if c.is_empty() {
                    return Err(PolicyError::Empty);
                }
                c.iter().try_for_each(PolicyNode::validate)
            }
        }
    }

    fn write_canonical(&self, out: &mut String) {
        match self {
            PolicyNode::Leaf(a) => {
                out.push('"');
                for ch in a.chars() {
                    if ch == '"' || ch == '\\' {
                        out.push('\\');
                    }
                    out.push(ch);
                }
                out.push('"');
            }
            PolicyNode::And(children) => {
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" AND ");
                    }
                    if matches!(c, PolicyNode::Or(_)) {
                        out.push('(');
                        c.write_canonical(out);
                        out.push(')');
                    } else {
                        c.write_canonical(out);
                    }
                }
            }
            PolicyNode::Or(children) => {
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" OR ");
                    }
                    c.write_canonical(out);
                }
            }
        }
    }

    fn matches(&self, set: &AttributeSet) -> bool {
        match self {
            PolicyNode::Leaf(a) => set.contains(a),
            PolicyNode::And(c) => c.iter().all(|n| n.matches(set)),
            PolicyNode::Or(c) => c.iter().any(|n| n.matches(set)),
        }
    }

    fn collect_attributes<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            PolicyNode::Leaf(a) => {
                out.insert(a);
            }
            PolicyNode::And(c) | PolicyNode::Or(c) => {
                c.iter().for_each(|n| n.collect_attributes(out))
            }
        }
    }
}

fn check_attribute(a: &str) -> Result<(), PolicyError> {
    if a.is_empty() {
        Err(PolicyError::EmptyAttribute)
    } else if a.len() > MAX_ATTRIBUTE_LEN {
        Err(PolicyError::AttributeTooLong)
    } else {
        Ok(())
    }
}

/// A validated, normalized monotone formula together with its canonical
/// text, which is what gets hashed and signed.
#[derive(Clone, PartialEq, Eq)]
pub struct Policy {
    root: PolicyNode,
    canonical: String,
}

impl Policy {
    pub fn new(root: PolicyNode) -> Result<Self, PolicyError> {
        root.validate()?;
        let root = root.normalize();
        if root.depth() > MAX_DEPTH {
            return Err(PolicyError::TooDeep);
        }
        let mut canonical = String::new();
        root.write_canonical(&mut canonical);
        Ok(Self { root, canonical })
    }

    pub fn leaf(attribute: impl Into<String>) -> Result<Self, PolicyError> {
        Self::new(PolicyNode::Leaf(attribute.into()))
    }

    pub fn any_of<I, S>(attributes: I) -> Result<Self, PolicyError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(PolicyNode::Or(
            attributes.into_iter().map(|a| PolicyNode::Leaf(a.into())).collect(),
        ))
    }

    pub fn root(&self) -> &PolicyNode {
        &self.root
    }

    pub fn canonical_text(&self) -> &str {
        &self.canonical
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Distinct attribute names mentioned anywhere in the formula.
    pub fn attributes(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.root.collect_attributes(&mut out);
        out
    }
}

pub fn parse_policy(text: &str) -> Result<Policy, PolicyError> {
    Policy::new(parser::parse(text)?)
}

/// The matching function: 1 iff the attribute set satisfies the policy.
pub fn matches(policy: &Policy, set: &AttributeSet) -> bool {
    policy.root.matches(set)
}

impl fmt::Debug for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Policy({})", self.canonical)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical)
    }
}

impl std::str::FromStr for Policy {
    type Err = PolicyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_policy(s)
    }
}

impl Serialize for Policy {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.canonical)
    }
}

impl<'de> Deserialize<'de> for Policy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_policy(&text).map_err(D::Error::custom)
    }
}

/// Deduplicated, sorted set of attribute strings.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct AttributeSet(BTreeSet<String>);

impl AttributeSet {
    pub fn new<I, S>(attributes: I) -> Result<Self, PolicyError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = BTreeSet::new();
        for a in attributes {
            let a = a.into();
            check_attribute(&a)?;
            set.insert(a);
        }
        Ok(Self(set))
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn contains(&self, a: &str) -> bool {
        self.0.contains(a)
    }

    pub fn insert(&mut self, a: impl Into<String>) -> Result<bool, PolicyError> {
        let a = a.into();
        check_attribute(&a)?;
        Ok(self.0.insert(a))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn is_subset(&self, other: &AttributeSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn encode_into(&self, enc: &mut Encoder) {
        enc.u64(self.0.len() as u64);
        for a in &self.0 {
            enc.str(a);
        }
    }
}

impl<'de> Deserialize<'de> for AttributeSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        AttributeSet::new(raw).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> AttributeSet {
        AttributeSet::new(items.iter().copied()).unwrap()
    }

    #[test]
    fn teacher_or_student() {
        let p = parse_policy(r#""Teacher" OR "Student""#).unwrap();
        assert_eq!(
            p.root(),
            &PolicyNode::Or(vec![
                PolicyNode::Leaf("Teacher".into()),
                PolicyNode::Leaf("Student".into())
            ])
        );
        assert!(matches(&p, &set(&["Student"])));
        assert!(!matches(&p, &set(&["Salesman"])));
    }

    #[test]
    fn and_binds_tighter() {
        let p = parse_policy("A AND (B OR C)").unwrap();
        assert_eq!(
            p.root(),
            &PolicyNode::And(vec![
                PolicyNode::Leaf("A".into()),
                PolicyNode::Or(vec![PolicyNode::Leaf("B".into()), PolicyNode::Leaf("C".into())]),
            ])
        );
        let q = parse_policy("A AND B OR C").unwrap();
        assert!(matches!(q.root(), PolicyNode::Or(_)));
    }

    #[test]
    fn leading_operator_is_error_at_first_token() {
        match parse_policy("OR A") {
            Err(PolicyError::Syntax { token, .. }) => assert_eq!(token, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(parse_policy("   "), Err(PolicyError::Empty));
        assert_eq!(parse_policy(""), Err(PolicyError::Empty));
    }

    #[test]
    fn empty_set_matches_nothing() {
        assert!(!matches(&Policy::leaf("A").unwrap(), &AttributeSet::empty()));
    }

    #[test]
    fn attribute_limits() {
        let long = "x".repeat(MAX_ATTRIBUTE_LEN + 1);
        assert_eq!(Policy::leaf(long.clone()), Err(PolicyError::AttributeTooLong));
        assert_eq!(Policy::leaf(""), Err(PolicyError::EmptyAttribute));
        assert!(AttributeSet::new([long]).is_err());
        assert!(Policy::leaf("x".repeat(MAX_ATTRIBUTE_LEN)).is_ok());
    }

    #[test]
    fn depth_limit() {
        // Alternate AND / OR so that normalization cannot flatten the nesting.
        fn nest(depth: usize) -> PolicyNode {
            let mut node = PolicyNode::Leaf("x".into());
            for i in 1..depth {
                let pair = vec![node, PolicyNode::Leaf(format!("a{i}"))];
                node = if i % 2 == 0 { PolicyNode::And(pair) } else { PolicyNode::Or(pair) };
            }
            node
        }
        assert_eq!(Policy::new(nest(MAX_DEPTH)).unwrap().depth(), MAX_DEPTH);
        assert_eq!(Policy::new(nest(MAX_DEPTH + 1)), Err(PolicyError::TooDeep));
        let text = Policy::new(nest(MAX_DEPTH)).unwrap().canonical_text().to_string();
        assert!(parse_policy(&text).is_ok());
    }

    #[test]
    fn canonical_text_quotes_and_parenthesizes() {
        let p = parse_policy(r#"a AND (b OR "c d") AND (e)"#).unwrap();
        assert_eq!(p.canonical_text(), r#""a" AND ("b" OR "c d") AND "e""#);
        assert_eq!(parse_policy(p.canonical_text()).unwrap(), p);
    }

    #[test]
    fn nested_same_operator_flattens() {
        let p = parse_policy("(A OR B) OR (C OR D)").unwrap();
        assert_eq!(p.canonical_text(), r#""A" OR "B" OR "C" OR "D""#);
    }

    #[test]
    fn identity_attribute_convention_parses() {
        let p = parse_policy("pk:02abcdef OR Admin").unwrap();
        assert!(matches(&p, &set(&["pk:02abcdef"])));
    }

    #[test]
    fn attribute_set_dedups_and_sorts() {
        let s = set(&["b", "a", "b"]);
        assert_eq!(s.len(), 2);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec!["a", "b"]);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"["a","b"]"#);
    }
}
