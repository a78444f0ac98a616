use serde::{Deserialize, Serialize};

use crate::corpus::EntityType;

/// Joint BIO labels for interventions and outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    O,
    BInt,
    IInt,
    BOut,
    IOut,
}

impl Tag {
    pub const ALL: [Tag; 5] = [Tag::O, Tag::BInt, Tag::IInt, Tag::BOut, Tag::IOut];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Tag> {
        Tag::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Tag::O => "O",
            Tag::BInt => "B-INT",
            Tag::IInt => "I-INT",
            Tag::BOut => "B-OUT",
            Tag::IOut => "I-OUT",
        }
    }

    pub fn entity_type(self) -> Option<EntityType> {
        match self {
            Tag::O => None,
            Tag::BInt | Tag::IInt => Some(EntityType::Intervention),
            Tag::BOut | Tag::IOut => Some(EntityType::Outcome),
        }
    }

    pub fn is_inside(self) -> bool {
        matches!(self, Tag::IInt | Tag::IOut)
    }

    pub fn begin(etype: EntityType) -> Tag {
        match etype {
            EntityType::Intervention => Tag::BInt,
            EntityType::Outcome => Tag::BOut,
        }
    }

    pub fn inside(etype: EntityType) -> Tag {
        match etype {
            EntityType::Intervention => Tag::IInt,
            EntityType::Outcome => Tag::IOut,
        }
    }
}

/// The label inventory plus its allowed-transition matrix over
/// `labels + 2` states; index `len` is START and `len + 1` is STOP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagSet {
    pub labels: Vec<String>,
    pub allowed: Vec<bool>,
}

impl TagSet {
    /// `I-X` may only follow `B-X` or `I-X`; everything else is allowed
    /// except entering START or leaving STOP.
    pub fn bio() -> TagSet {
        let n = Tag::ALL.len();
        let size = n + 2;
        let mut allowed = vec![true; size * size];
        let (start, stop) = (n, n + 1);
        for from in 0..size {
            for to in 0..size {
                let ok = if to == start || from == stop {
                    false
                } else if to == stop {
                    true
                } else {
                    let next = Tag::ALL[to];
                    if !next.is_inside() {
                        true
                    } else if from == start {
                        false
                    } else {
                        let prev = Tag::ALL[from];
                        prev.entity_type() == next.entity_type()
                    }
                };
                allowed[from * size + to] = ok;
            }
        }
        TagSet {
            labels: Tag::ALL.iter().map(|t| t.label().to_string()).collect(),
            allowed,
        }
    }

    /// A mask with every transition allowed, for `n` labels.
    pub fn unconstrained(n: usize) -> TagSet {
        let size = n + 2;
        let mut allowed = vec![true; size * size];
        for i in 0..size {
            allowed[i * size + n] = false;
            allowed[(n + 1) * size + i] = false;
        }
        TagSet {
            labels: (0..n).map(|i| format!("L{i}")).collect(),
            allowed,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}
