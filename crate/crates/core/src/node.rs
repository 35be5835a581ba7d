use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

/// Node identifier such as `CU3` or `DU17`.
///
/// Ordering is "natural": a shared prefix is compared lexically and a
/// trailing integer numerically, so `CU2 < CU10`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn split(&self) -> (&str, Option<u64>) {
        let s = self.0.as_str();
        let digits = s.bytes().rev().take_while(u8::is_ascii_digit).count();
        if digits == 0 || digits > 18 {
            return (s, None);
        }
        let (head, tail) = s.split_at(s.len() - digits);
        (head, tail.parse().ok())
    }
}

impl Ord for NodeId {
    fn cmp(&self, other: &Self) -> Ordering {
        let (ha, na) = self.split();
        let (hb, nb) = other.split();
        ha.cmp(hb)
            .then_with(|| na.cmp(&nb))
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for NodeId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    #[serde(rename = "CU")]
    Cu,
    #[serde(rename = "DU")]
    Du,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Cu => "CU",
            NodeKind::Du => "DU",
        })
    }
}

impl FromStr for NodeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "CU" | "cu" => Ok(NodeKind::Cu),
            "DU" | "du" => Ok(NodeKind::Du),
            other => Err(format!("unknown node kind `{other}` (expected CU or DU)")),
        }
    }
}

/// A CU or DU site; `position` is (x, y, height) in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub position: Vec3,
}

impl Node {
    pub fn new(id: impl Into<String>, kind: NodeKind, position: Vec3) -> Self {
        Node {
            id: NodeId::new(id),
            kind,
            position,
        }
    }

    pub fn is_cu(&self) -> bool {
        self.kind == NodeKind::Cu
    }
}
