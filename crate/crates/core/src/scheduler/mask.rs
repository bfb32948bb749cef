//! Inference-time input removal.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;

use crate::error::{Error, Result};
use crate::generator::Role;

/// Which networks a mask entry applies to. The single generator of the
/// baseline frameworks answers to [`MaskTarget::Successor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MaskTarget {
    Precursor,
    Successor,
    Both,
}

impl MaskTarget {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskTarget::Precursor => "p",
            MaskTarget::Successor => "s",
            MaskTarget::Both => "ps",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "p" | "precursor" => Ok(MaskTarget::Precursor),
            "s" | "successor" | "g" | "generator" => Ok(MaskTarget::Successor),
            "ps" | "both" => Ok(MaskTarget::Both),
            other => Err(Error::invalid("mask", format!("unknown target {other:?}"))),
        }
    }

    pub fn hits(self, role: Role) -> bool {
        match self {
            MaskTarget::Precursor => role == Role::Precursor,
            MaskTarget::Successor => role != Role::Precursor,
            MaskTarget::Both => true,
        }
    }
}

/// The six per-step inputs relative to the current timestep `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum InputName {
    PrevFrame,
    CurFrame,
    NextFrame,
    PrevHidden,
    CurHidden,
    NextHidden,
}

impl InputName {
    pub const ALL: [InputName; 6] = [
        InputName::PrevFrame,
        InputName::CurFrame,
        InputName::NextFrame,
        InputName::PrevHidden,
        InputName::CurHidden,
        InputName::NextHidden,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InputName::PrevFrame => "I[t-1]",
            InputName::CurFrame => "I[t]",
            InputName::NextFrame => "I[t+1]",
            InputName::PrevHidden => "H[t-1]",
            InputName::CurHidden => "H[t]",
            InputName::NextHidden => "H[t+1]",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::invalid("mask", format!("unknown input {s:?}")))
    }

    /// Stream index and whether this names a frame (else a hidden state).
    pub(crate) fn slot(self) -> (usize, bool) {
        match self {
            InputName::PrevFrame => (0, true),
            InputName::CurFrame => (1, true),
            InputName::NextFrame => (2, true),
            InputName::PrevHidden => (0, false),
            InputName::CurHidden => (1, false),
            InputName::NextHidden => (2, false),
        }
    }

    pub(crate) fn for_slot(stream: usize, frame: bool) -> Option<Self> {
        Self::ALL.into_iter().find(|n| n.slot() == (stream, frame))
    }
}

/// A set of `(target, input)` pairs to replace with zeros.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InputMask {
    entries: BTreeSet<(MaskTarget, InputName)>,
}

impl InputMask {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with(mut self, target: MaskTarget, input: InputName) -> Self {
        self.entries.insert((target, input));
        self
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (MaskTarget, InputName)> + '_ {
        self.entries.iter().copied()
    }

    pub fn hits(&self, role: Role, input: InputName) -> bool {
        self.entries.iter().any(|&(t, n)| n == input && t.hits(role))
    }

    /// Parses `target:input`, e.g. `s:H[t+1]` or `ps:I[t]`.
    pub fn parse_entry(s: &str) -> Result<(MaskTarget, InputName)> {
        let (t, n) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid("mask", format!("expected target:input, got {s:?}")))?;
        Ok((MaskTarget::parse(t.trim())?, InputName::parse(n.trim())?))
    }

    pub fn label(&self) -> String {
        if self.entries.is_empty() {
            return "none".into();
        }
        let parts: alloc::vec::Vec<String> = self
            .entries
            .iter()
            .map(|(t, n)| format!("{}:{}", t.as_str(), n.as_str()))
            .collect();
        parts.join(" ")
    }
}
