//! Variable names, labels, and deterministic fresh-name supplies.

use std::fmt;
use std::sync::Arc;

/// A variable name: a source spelling plus a numeric freshness tag.
///
/// Two names are the same variable iff both the spelling and the tag agree.
/// Names straight out of the parser carry tag 0; alpha-normalization and
/// the transforms hand out nonzero tags from a [`NameSupply`].
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name {
    id: u32,
    base: Arc<str>,
}

/// Tag reserved for the binder of continuations captured by the evaluator.
pub(crate) const CONTINUATION_ID: u32 = u32::MAX;

impl Name {
    pub fn new(base: &str) -> Name {
        Name::with_id(base, 0)
    }

    pub fn with_id(base: &str, id: u32) -> Name {
        Name {
            id,
            base: Arc::from(base),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    /// Same spelling, different tag.
    pub fn retag(&self, id: u32) -> Name {
        Name {
            id,
            base: self.base.clone(),
        }
    }

    pub(crate) fn hash64(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.base.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        crate::ast::mix(h, u64::from(self.id))
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.id == 0 {
            write!(f, "{}", self.base)
        } else {
            write!(f, "{}#{}", self.base, self.id)
        }
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Record labels and operation names share one type: the transform turns
/// every operation name into the label of a record field verbatim.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(Arc<str>);

pub type OpName = Label;

impl Label {
    pub fn new(s: &str) -> Label {
        Label(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub(crate) fn hash64(&self) -> u64 {
        Name::new(&self.0).hash64()
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Label {
        Label::new(s)
    }
}

/// Deterministic counter for fresh tags. One supply per construction
/// context; never shared between threads.
#[derive(Debug, Clone)]
pub struct NameSupply {
    next: u32,
}

impl NameSupply {
    /// A supply whose first tag is `first`.
    pub fn starting_at(first: u32) -> NameSupply {
        NameSupply {
            next: first.max(1),
        }
    }

    /// A supply that never reissues any tag `<= max_id`.
    pub fn above(max_id: u32) -> NameSupply {
        NameSupply::starting_at(max_id.saturating_add(1))
    }

    pub fn fresh(&mut self, base: &str) -> Name {
        let id = self.next;
        self.next = self.next.checked_add(1).expect("fresh-name tags exhausted");
        Name::with_id(base, id)
    }

    /// Skips past `id`, so later names are never tagged `<= id`.
    pub fn ensure_above(&mut self, id: u32) {
        if self.next <= id {
            self.next = id + 1;
        }
    }

    pub fn peek(&self) -> u32 {
        self.next
    }
}
