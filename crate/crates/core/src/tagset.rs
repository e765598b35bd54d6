//! The fixed attribute inventory: seven legal attributes plus `NoTag`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of labels in the tag set.
pub const NUM_TAGS: usize = 8;

/// One label of the attribute tag set.
///
/// The discriminant is the tag index used everywhere in the toolkit
/// (emission columns, transition rows, serialized models).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Tag {
    /// Testimony of expert witnesses (forensic, ballistic).
    ExpertWittest = 0,
    /// Testimony of non-expert witnesses.
    Wittest = 1,
    /// Hurt by a sharp weapon.
    Assault = 2,
    /// Unlawful enterprise carried out violently.
    Riot = 3,
    /// Homicide amounting to murder.
    Homicide = 4,
    /// Sentence of life imprisonment.
    Imprisonment = 5,
    /// Evidence of the crime was found.
    Evidence = 6,
    /// Token outside every highlighted span.
    NoTag = 7,
}

impl Tag {
    pub const ALL: [Tag; NUM_TAGS] = [
        Tag::ExpertWittest,
        Tag::Wittest,
        Tag::Assault,
        Tag::Riot,
        Tag::Homicide,
        Tag::Imprisonment,
        Tag::Evidence,
        Tag::NoTag,
    ];

    /// The seven attribute tags, in tag-index order.
    pub const ATTRIBUTES: [Tag; 7] = [
        Tag::ExpertWittest,
        Tag::Wittest,
        Tag::Assault,
        Tag::Riot,
        Tag::Homicide,
        Tag::Imprisonment,
        Tag::Evidence,
    ];

    /// Column order used by the statistics and accuracy reports.
    pub const REPORT_ORDER: [Tag; 7] = [
        Tag::ExpertWittest,
        Tag::Wittest,
        Tag::Homicide,
        Tag::Assault,
        Tag::Imprisonment,
        Tag::Riot,
        Tag::Evidence,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Tag> {
        Tag::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Tag::ExpertWittest => "ExpertWittest",
            Tag::Wittest => "Wittest",
            Tag::Assault => "Assault",
            Tag::Riot => "Riot",
            Tag::Homicide => "Homicide",
            Tag::Imprisonment => "Imprisonment",
            Tag::Evidence => "Evidence",
            Tag::NoTag => "NoTag",
        }
    }

    pub fn is_attribute(self) -> bool {
        self != Tag::NoTag
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tag {
    type Err = Error;

    /// Parses a canonical tag name. The expert-testimony tag also accepts
    /// the spellings `ExpWittest`, `ExpWittet` and `ExpWitTest`.
    fn from_str(s: &str) -> Result<Tag> {
        let tag = match s {
            "ExpertWittest" | "ExpWittest" | "ExpWittet" | "ExpWitTest" => Tag::ExpertWittest,
            "Wittest" | "WitTest" => Tag::Wittest,
            "Assault" => Tag::Assault,
            "Riot" => Tag::Riot,
            "Homicide" => Tag::Homicide,
            "Imprisonment" => Tag::Imprisonment,
            "Evidence" => Tag::Evidence,
            "NoTag" => Tag::NoTag,
            other => return Err(Error::UnknownTag(other.to_string())),
        };
        Ok(tag)
    }
}

/// Ordered tag vocabulary carried by serialized models.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagSet {
    names: Vec<String>,
    no_tag: usize,
}

impl Default for TagSet {
    fn default() -> Self {
        TagSet {
            names: Tag::ALL.iter().map(|t| t.name().to_string()).collect(),
            no_tag: Tag::NoTag.index(),
        }
    }
}

impl TagSet {
    /// Rebuilds a tag set from stored names, checking they are exactly the
    /// canonical inventory in canonical order.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<TagSet> {
        if names.len() != NUM_TAGS {
            return Err(Error::Dimension {
                expected: NUM_TAGS,
                actual: names.len(),
            });
        }
        for (i, name) in names.iter().enumerate() {
            let tag: Tag = name.as_ref().parse()?;
            if tag.index() != i || tag.name() != name.as_ref() {
                return Err(Error::invalid(format!(
                    "tag `{}` at index {i} does not match canonical order",
                    name.as_ref()
                )));
            }
        }
        Ok(TagSet::default())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn no_tag_index(&self) -> usize {
        self.no_tag
    }
}
