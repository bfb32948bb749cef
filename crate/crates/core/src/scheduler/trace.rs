//! Recorded dataflow of a scheduled run.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::generator::Role;

/// Something that executes during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Step {
    Precursor,
    Successor,
    Generator,
    /// Bicubic upsampling of an LR frame.
    Upsample,
    /// The fixed precursor output used when a model has no precursor blocks.
    Fixed,
    /// The final per-frame sum.
    Combine,
}

impl Step {
    pub fn as_str(self) -> &'static str {
        match self {
            Step::Precursor => "precursor",
            Step::Successor => "successor",
            Step::Generator => "generator",
            Step::Upsample => "upsample",
            Step::Fixed => "fixed",
            Step::Combine => "combine",
        }
    }
}

impl FromStr for Step {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Step::Precursor,
            Step::Successor,
            Step::Generator,
            Step::Upsample,
            Step::Fixed,
            Step::Combine,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::Format(format!("unknown step {s:?}")))
    }
}

/// A value flowing between steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Item {
    /// LR input frame.
    Frame(usize),
    /// A zero tensor standing in for a frame (absent or masked).
    ZeroFrame,
    Hidden(Role, usize),
    /// A zero tensor standing in for a hidden state (boundary, absent or
    /// masked).
    ZeroHidden,
    Bicubic(usize),
    /// Upscaled output of one network at one timestep.
    Output(Role, usize),
    /// Final super-resolved frame.
    Sr(usize),
}

impl Item {
    fn is_source(self) -> bool {
        matches!(self, Item::Frame(_) | Item::ZeroFrame | Item::ZeroHidden)
    }
}

fn role_tag(role: Role) -> char {
    match role {
        Role::Precursor => 'p',
        Role::Successor => 's',
        Role::Generator => 'g',
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Item::Frame(t) => write!(f, "I{t}"),
            Item::ZeroFrame => f.write_str("0I"),
            Item::Hidden(r, t) => write!(f, "H{}{t}", role_tag(r)),
            Item::ZeroHidden => f.write_str("0H"),
            Item::Bicubic(t) => write!(f, "B{t}"),
            Item::Output(r, t) => write!(f, "O{}{t}", role_tag(r)),
            Item::Sr(t) => write!(f, "SR{t}"),
        }
    }
}

impl FromStr for Item {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("bad trace item {s:?}"));
        let num = |rest: &str| rest.parse::<usize>().map_err(|_| bad());
        let role = |c: Option<char>| match c {
            Some('p') => Ok(Role::Precursor),
            Some('s') => Ok(Role::Successor),
            Some('g') => Ok(Role::Generator),
            _ => Err(bad()),
        };
        match s {
            "0I" => return Ok(Item::ZeroFrame),
            "0H" => return Ok(Item::ZeroHidden),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("SR") {
            return Ok(Item::Sr(num(rest)?));
        }
        let mut chars = s.chars();
        match chars.next() {
            Some('I') => Ok(Item::Frame(num(&s[1..])?)),
            Some('B') => Ok(Item::Bicubic(num(&s[1..])?)),
            Some('H') => Ok(Item::Hidden(role(chars.next())?, num(s.get(2..).ok_or_else(bad)?)?)),
            Some('O') => Ok(Item::Output(role(chars.next())?, num(s.get(2..).ok_or_else(bad)?)?)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub step: Step,
    pub timestep: usize,
    pub consumed: Vec<Item>,
    pub produced: Vec<Item>,
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |items: &[Item]| items.iter().map(Item::to_string).collect::<Vec<_>>().join(",");
        write!(
            f,
            "{} t={} in={} out={}",
            self.step.as_str(),
            self.timestep,
            join(&self.consumed),
            join(&self.produced)
        )
    }
}

impl FromStr for TraceStep {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let bad = || Error::Format(format!("bad trace line {line:?}"));
        let mut fields = line.split_whitespace();
        let step = fields.next().ok_or_else(bad)?.parse()?;
        let mut field = |key: &str| -> Result<&str> {
            fields.next().and_then(|f| f.strip_prefix(key)).ok_or_else(bad)
        };
        let timestep = field("t=")?.parse().map_err(|_| bad())?;
        let items = |s: &str| -> Result<Vec<Item>> {
            s.split(',').filter(|p| !p.is_empty()).map(str::parse).collect()
        };
        let consumed = items(field("in=")?)?;
        let produced = items(field("out=")?)?;
        Ok(TraceStep {
            step,
            timestep,
            consumed,
            produced,
        })
    }
}

/// Ordered record of every step a run executed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScheduleTrace {
    steps: Vec<TraceStep>,
}

impl ScheduleTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: Step, timestep: usize, consumed: Vec<Item>, produced: Vec<Item>) {
        self.steps.push(TraceStep {
            step,
            timestep,
            consumed,
            produced,
        });
    }

    pub fn extend(&mut self, other: ScheduleTrace) {
        self.steps.extend(other.steps);
    }

    pub fn steps(&self) -> &[TraceStep] {
        &self.steps
    }

    /// Steps of one kind, in execution order.
    pub fn of(&self, step: Step) -> impl Iterator<Item = &TraceStep> + '_ {
        self.steps.iter().filter(move |s| s.step == step)
    }

    /// Checks that every consumed value was produced by an earlier step (or
    /// is an input frame or a zero), that nothing is produced twice, and that
    /// frame indices are below `frames`.
    pub fn audit(&self, frames: usize) -> Result<()> {
        let mut produced = BTreeSet::new();
        for (i, s) in self.steps.iter().enumerate() {
            for item in &s.consumed {
                if let Item::Frame(t) = item {
                    if *t >= frames {
                        return Err(Error::Schedule(format!("step {i} ({s}) reads frame {t} of {frames}")));
                    }
                } else if !item.is_source() && !produced.contains(item) {
                    return Err(Error::Schedule(format!("step {i} ({s}) consumes {item} before it exists")));
                }
            }
            for item in &s.produced {
                if item.is_source() || !produced.insert(*item) {
                    return Err(Error::Schedule(format!("step {i} ({s}) produces {item} twice or as a source")));
                }
            }
        }
        Ok(())
    }

    /// For every produced value, the set of input frames it depends on.
    pub fn dependencies(&self) -> BTreeMap<Item, BTreeSet<usize>> {
        let mut deps: BTreeMap<Item, BTreeSet<usize>> = BTreeMap::new();
        for s in &self.steps {
            let mut acc = BTreeSet::new();
            for item in &s.consumed {
                match item {
                    Item::Frame(t) => {
                        acc.insert(*t);
                    }
                    other => {
                        if let Some(d) = deps.get(other) {
                            acc.extend(d.iter().copied());
                        }
                    }
                }
            }
            for item in &s.produced {
                deps.insert(*item, acc.clone());
            }
        }
        deps
    }

    /// Input frames the final output at `t` depends on.
    pub fn receptive_field(&self, t: usize) -> BTreeSet<usize> {
        self.dependencies().remove(&Item::Sr(t)).unwrap_or_default()
    }

    /// One line per step.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&s.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let steps = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        Ok(ScheduleTrace { steps })
    }
}
