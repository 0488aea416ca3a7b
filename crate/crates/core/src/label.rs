//! Packed semantic labels.
//!
//! A label and its provenance group share a single byte:
//!
//! ```text
//!  bit  7   6 5   4 3 2 1 0
//!      [r] [grp] [ label id ]
//! ```
//!
//! The reserved bit must be zero. Group code 3 is invalid. Label id 0 means
//! "unlabelled" and is only valid with the `Propagated` group, so the zero byte
//! is the unlabelled value and any automatic process may overwrite it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a semantic label, `0..MAX_LABELS`.
pub type LabelId = u8;

/// Size of the label space (5 bits).
pub const MAX_LABELS: usize = 32;

/// Reserved id for voxels that carry no label.
pub const UNLABELLED_ID: LabelId = 0;

const ID_MASK: u8 = 0b0001_1111;
const GROUP_SHIFT: u8 = 5;
const GROUP_MASK: u8 = 0b0110_0000;
const RESERVED_MASK: u8 = 0b1000_0000;

/// Where a label came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LabelGroup {
    Propagated = 0,
    User = 1,
    Forest = 2,
}

impl LabelGroup {
    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(LabelGroup::Propagated),
            1 => Some(LabelGroup::User),
            2 => Some(LabelGroup::Forest),
            _ => None,
        }
    }

    pub fn is_user(self) -> bool {
        self == LabelGroup::User
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LabelError {
    #[error("label id {0} outside the label space (max {max})", max = MAX_LABELS - 1)]
    IdOutOfRange(u8),
    #[error("unlabelled id must carry the PROPAGATED group, got {0:?}")]
    UnlabelledGroup(LabelGroup),
    #[error("invalid packed label byte {0:#04x}")]
    InvalidByte(u8),
}

/// A label id plus its provenance group, packed in one byte.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PackedLabel(u8);

impl PackedLabel {
    pub const UNLABELLED: PackedLabel = PackedLabel(0);

    pub fn new(id: LabelId, group: LabelGroup) -> Result<Self, LabelError> {
        if id as usize >= MAX_LABELS {
            return Err(LabelError::IdOutOfRange(id));
        }
        if id == UNLABELLED_ID && group != LabelGroup::Propagated {
            return Err(LabelError::UnlabelledGroup(group));
        }
        Ok(PackedLabel(id | ((group as u8) << GROUP_SHIFT)))
    }

    pub fn user(id: LabelId) -> Result<Self, LabelError> {
        Self::new(id, LabelGroup::User)
    }

    pub fn propagated(id: LabelId) -> Result<Self, LabelError> {
        Self::new(id, LabelGroup::Propagated)
    }

    pub fn forest(id: LabelId) -> Result<Self, LabelError> {
        Self::new(id, LabelGroup::Forest)
    }

    /// Decodes a byte, rejecting reserved-bit, group-3 and non-propagated
    /// unlabelled encodings.
    pub fn from_byte(b: u8) -> Result<Self, LabelError> {
        if b & RESERVED_MASK != 0 {
            return Err(LabelError::InvalidByte(b));
        }
        let group = LabelGroup::from_code((b & GROUP_MASK) >> GROUP_SHIFT)
            .ok_or(LabelError::InvalidByte(b))?;
        let id = b & ID_MASK;
        if id == UNLABELLED_ID && group != LabelGroup::Propagated {
            return Err(LabelError::InvalidByte(b));
        }
        Ok(PackedLabel(b))
    }

    #[inline]
    pub fn to_byte(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn id(self) -> LabelId {
        self.0 & ID_MASK
    }

    #[inline]
    pub fn group(self) -> LabelGroup {
        // Construction guarantees a valid code.
        LabelGroup::from_code((self.0 & GROUP_MASK) >> GROUP_SHIFT).unwrap_or(LabelGroup::Propagated)
    }

    #[inline]
    pub fn is_unlabelled(self) -> bool {
        self.id() == UNLABELLED_ID
    }
}

impl std::fmt::Debug for PackedLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PackedLabel({}, {:?})", self.id(), self.group())
    }
}

impl TryFrom<u8> for PackedLabel {
    type Error = LabelError;

    fn try_from(b: u8) -> Result<Self, Self::Error> {
        PackedLabel::from_byte(b)
    }
}

impl From<PackedLabel> for u8 {
    fn from(l: PackedLabel) -> u8 {
        l.0
    }
}
