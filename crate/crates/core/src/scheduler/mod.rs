//! Dataflow of LR frames and hidden states across time.
//!
//! Every framework is a table: for each stream of the generator window, the
//! frame offset it reads and where its hidden state comes from. The runner
//! walks timesteps in the order the framework requires, looks inputs up in
//! that table, and records each step in a [`ScheduleTrace`].
//!
//! | network             | frames              | hiddens                         | order    |
//! |---------------------|---------------------|---------------------------------|----------|
//! | IVSR                | t-1, t, t+1         | 0, 0, 0                         | any      |
//! | RVSR                | t-1, t, 0           | H(t-1), 0, 0                    | forward  |
//! | HVSR                | t-1, t, t+1 (, t+2) | H(t-1), 0, 0 (, 0)              | forward  |
//! | LOVSR precursor     | t-1, t, t+1         | Hp(t-1), 0, 0                   | forward  |
//! | GOVSR precursor     | t-1, t, t+1         | 0, 0, Hp(t+1)                   | backward |
//! | successor           | t-1, t, t+1         | Hs(t-1), Hp(t), Hp(t+1)         | forward  |
//!
//! Hidden states outside the sequence are zeros. Frames outside the
//! sequence replicate the nearest end frame.

mod mask;
mod trace;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

pub use mask::{InputMask, InputName, MaskTarget};
pub use trace::{Item, ScheduleTrace, Step, TraceStep};

use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::generator::{Framework, Model, Net, NetOutput, RefineMode, Role};
use crate::ops;
use crate::tensor::{Shape, Tensor};

/// What happens at the ends of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaddingMode {
    /// Every frame gets an output; missing neighbours replicate the end
    /// frames and missing hidden states are zeros.
    Replicate,
    /// The first and last frames only feed their neighbours; outputs cover
    /// the inner frames.
    Context,
}

impl PaddingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PaddingMode::Replicate => "replicate",
            PaddingMode::Context => "context",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "replicate" => Ok(PaddingMode::Replicate),
            "context" => Ok(PaddingMode::Context),
            other => Err(Error::invalid("padding", format!("unknown padding mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VideoSequence {
    frames: Vec<Tensor>,
    hr: Option<Vec<Tensor>>,
    scale: usize,
    padding: PaddingMode,
}

impl VideoSequence {
    /// LR frames `(B, 3, h, w)`, batch lanes being independent clips.
    pub fn new(frames: Vec<Tensor>, scale: usize) -> Result<Self> {
        let first = frames.first().ok_or_else(|| Error::Schedule("empty sequence".into()))?;
        let shape = first.shape();
        if let Some((t, f)) = frames.iter().enumerate().find(|(_, f)| f.shape() != shape) {
            return Err(Error::Schedule(format!(
                "frame {t} has shape {:?}, frame 0 has {shape:?}",
                f.shape()
            )));
        }
        if scale == 0 {
            return Err(Error::invalid("sequence", "scale must be positive"));
        }
        Ok(VideoSequence {
            frames,
            hr: None,
            scale,
            padding: PaddingMode::Replicate,
        })
    }

    pub fn with_hr(mut self, hr: Vec<Tensor>) -> Result<Self> {
        if hr.len() != self.frames.len() {
            return Err(Error::Schedule(format!(
                "{} HR frames for {} LR frames",
                hr.len(),
                self.frames.len()
            )));
        }
        let want = self.hr_shape();
        if let Some(bad) = hr.iter().find(|h| h.shape() != want) {
            return Err(Error::Schedule(format!(
                "HR frame shape {:?}, expected {want:?}",
                bad.shape()
            )));
        }
        self.hr = Some(hr);
        Ok(self)
    }

    pub fn with_padding(mut self, padding: PaddingMode) -> Result<Self> {
        if padding == PaddingMode::Context && self.frames.len() < 3 {
            return Err(Error::Schedule("context padding needs at least 3 frames".into()));
        }
        self.padding = padding;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Tensor] {
        &self.frames
    }

    pub fn hr(&self) -> Option<&[Tensor]> {
        self.hr.as_deref()
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn padding(&self) -> PaddingMode {
        self.padding
    }

    pub fn lr_shape(&self) -> Shape {
        self.frames[0].shape()
    }

    pub fn hr_shape(&self) -> Shape {
        let [b, c, h, w] = self.lr_shape();
        [b, c, h * self.scale, w * self.scale]
    }

    /// Frame indices that receive an output.
    pub fn outputs(&self) -> Range<usize> {
        match self.padding {
            PaddingMode::Replicate => 0..self.len(),
            PaddingMode::Context => 1..self.len() - 1,
        }
    }

    /// HR frames aligned with the outputs of a run.
    pub fn targets(&self) -> Option<&[Tensor]> {
        self.hr.as_deref().map(|hr| &hr[self.outputs()])
    }
}

/// A per-timestep hidden state.
#[derive(Debug, Clone)]
pub struct HiddenState {
    /// `(B, F, h, w)`.
    pub tensor: Var,
    pub provenance: Role,
    pub timestep: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    /// The precursor direction of an omniscient framework.
    pub fn of(framework: Framework) -> Option<Self> {
        match framework {
            Framework::Lovsr => Some(Direction::Forward),
            Framework::Govsr => Some(Direction::Backward),
            _ => None,
        }
    }

    fn order(self, len: usize) -> Vec<usize> {
        match self {
            Direction::Forward => (0..len).collect(),
            Direction::Backward => (0..len).rev().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    PrecursorForward,
    PrecursorBackward,
    Successor,
    Ivsr,
    Rvsr,
    Hvsr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HiddenSource {
    Zero,
    /// The same network's state at `t + d`.
    Recurrent(isize),
    /// The precursor's state at `t + d`.
    Precursor(isize),
}

impl Kind {
    fn role(self) -> Role {
        match self {
            Kind::PrecursorForward | Kind::PrecursorBackward => Role::Precursor,
            Kind::Successor => Role::Successor,
            Kind::Ivsr | Kind::Rvsr | Kind::Hvsr => Role::Generator,
        }
    }

    fn step(self) -> Step {
        match self.role() {
            Role::Precursor => Step::Precursor,
            Role::Successor => Step::Successor,
            Role::Generator => Step::Generator,
        }
    }

    fn baseline(framework: Framework) -> Option<Self> {
        match framework {
            Framework::Ivsr => Some(Kind::Ivsr),
            Framework::Rvsr => Some(Kind::Rvsr),
            Framework::Hvsr => Some(Kind::Hvsr),
            _ => None,
        }
    }

    fn frame_offsets(self, window: usize) -> Vec<Option<isize>> {
        let mut offsets: Vec<Option<isize>> = (0..window).map(|k| Some(k as isize - 1)).collect();
        if self == Kind::Rvsr {
            offsets[2] = None;
        }
        offsets
    }

    fn hidden_sources(self, window: usize) -> Vec<HiddenSource> {
        let mut src = vec![HiddenSource::Zero; window];
        match self {
            Kind::PrecursorForward | Kind::Rvsr | Kind::Hvsr => src[0] = HiddenSource::Recurrent(-1),
            Kind::PrecursorBackward => src[2] = HiddenSource::Recurrent(1),
            Kind::Successor => {
                src[0] = HiddenSource::Recurrent(-1);
                src[1] = HiddenSource::Precursor(0);
                src[2] = HiddenSource::Precursor(1);
            }
            Kind::Ivsr => {}
        }
        src
    }

    fn consumes(self, window: usize, input: InputName) -> bool {
        let (k, frame) = input.slot();
        if frame {
            self.frame_offsets(window)[k].is_some()
        } else {
            self.hidden_sources(window)[k] != HiddenSource::Zero
        }
    }
}

/// Networks a model runs, with their schedule kinds.
fn kinds(model: &Model<Var>) -> Result<Vec<Kind>> {
    let fw = model.config.framework;
    if let Some(kind) = Kind::baseline(fw) {
        return Ok(vec![kind]);
    }
    let mut out = Vec::new();
    if model.precursor.is_some() {
        out.push(match Direction::of(fw) {
            Some(Direction::Forward) => Kind::PrecursorForward,
            _ => Kind::PrecursorBackward,
        });
    }
    out.push(Kind::Successor);
    Ok(out)
}

fn check_mask(model: &Model<Var>, mask: &InputMask) -> Result<()> {
    let kinds = kinds(model)?;
    let window = model.config.window;
    for (target, input) in mask.entries() {
        let used = kinds
            .iter()
            .any(|k| target.hits(k.role()) && k.consumes(window, input));
        if !used {
            return Err(Error::NotAnInput(
                input.as_str().into(),
                format!("{} ({} network)", model.config.name(), target.as_str()),
            ));
        }
    }
    Ok(())
}

/// Result of a full run.
#[derive(Debug, Clone)]
pub struct Run {
    /// Final SR frames for [`VideoSequence::outputs`].
    pub sr: Vec<Var>,
    /// Precursor-side outputs of omniscient models, same range.
    pub sr_p: Option<Vec<Var>>,
    pub trace: ScheduleTrace,
}

#[derive(Debug, Clone)]
pub struct PrecursorPass {
    /// `I^{SR_p}` for every frame.
    pub sr: Vec<Var>,
    /// `None` when the model has no precursor blocks.
    pub hidden: Option<Vec<HiddenState>>,
    pub trace: ScheduleTrace,
}

#[derive(Debug, Clone)]
pub struct SuccessorPass {
    pub sr: Vec<Var>,
    pub hidden: Vec<HiddenState>,
    pub trace: ScheduleTrace,
}

struct Runner<'a> {
    model: &'a Model<Var>,
    seq: &'a VideoSequence,
    mask: &'a InputMask,
    frames: Vec<Var>,
    zero_frame: Var,
    zero_hidden: Var,
    bicubic: Vec<Option<Var>>,
    trace: ScheduleTrace,
}

impl<'a> Runner<'a> {
    fn new(model: &'a Model<Var>, seq: &'a VideoSequence, mask: &'a InputMask) -> Result<Self> {
        let cfg = &model.config;
        if cfg.scale != seq.scale() {
            return Err(Error::Schedule(format!(
                "model scale {} but sequence scale {}",
                cfg.scale,
                seq.scale()
            )));
        }
        check_mask(model, mask)?;
        let [b, c, h, w] = seq.lr_shape();
        Ok(Runner {
            model,
            seq,
            mask,
            frames: seq.frames().iter().cloned().map(Var::constant).collect(),
            zero_frame: Var::constant(Tensor::zeros([b, c, h, w])),
            zero_hidden: Var::constant(Tensor::zeros([b, cfg.filters, h, w])),
            bicubic: vec![None; seq.len()],
            trace: ScheduleTrace::new(),
        })
    }

    fn bicubic(&mut self, t: usize) -> Result<Var> {
        if let Some(b) = &self.bicubic[t] {
            return Ok(b.clone());
        }
        let b = ops::bicubic_upsample(&self.frames[t], self.seq.scale())?;
        self.trace.push(Step::Upsample, t, vec![Item::Frame(t)], vec![Item::Bicubic(t)]);
        self.bicubic[t] = Some(b.clone());
        Ok(b)
    }

    fn invoke(
        &mut self,
        kind: Kind,
        net: &Net<Var>,
        t: usize,
        own: &[Option<Var>],
        precursor: Option<&[HiddenState]>,
        mut consumed: Vec<Item>,
    ) -> Result<NetOutput> {
        let len = self.seq.len() as isize;
        let window = self.model.config.window;
        let role = kind.role();
        let masked = |k: usize, frame: bool| {
            InputName::for_slot(k, frame).is_some_and(|n| self.mask.hits(role, n))
        };
        let at = |d: isize| -> Option<usize> {
            let i = t as isize + d;
            (0..len).contains(&i).then_some(i as usize)
        };

        let mut frames = Vec::with_capacity(window);
        for (k, offset) in kind.frame_offsets(window).into_iter().enumerate() {
            match offset {
                Some(d) if !masked(k, true) => {
                    let i = (t as isize + d).clamp(0, len - 1) as usize;
                    frames.push(self.frames[i].clone());
                    consumed.push(Item::Frame(i));
                }
                _ => {
                    frames.push(self.zero_frame.clone());
                    consumed.push(Item::ZeroFrame);
                }
            }
        }

        let mut hiddens = Vec::with_capacity(window);
        for (k, src) in kind.hidden_sources(window).into_iter().enumerate() {
            let found = match src {
                _ if masked(k, false) => None,
                HiddenSource::Zero => None,
                HiddenSource::Recurrent(d) => match at(d) {
                    Some(i) => match &own[i] {
                        Some(h) => Some((h.clone(), Item::Hidden(role, i))),
                        None => {
                            return Err(Error::Schedule(format!(
                                "{} at t={t} needs its state at t={i} before it exists",
                                role.as_str()
                            )))
                        }
                    },
                    None => None,
                },
                HiddenSource::Precursor(d) => at(d)
                    .and_then(|i| precursor.map(|p| (p[i].tensor.clone(), Item::Hidden(Role::Precursor, i)))),
            };
            match found {
                Some((h, item)) => {
                    hiddens.push(h);
                    consumed.push(item);
                }
                None => {
                    hiddens.push(self.zero_hidden.clone());
                    consumed.push(Item::ZeroHidden);
                }
            }
        }

        let out = net.forward(&frames, &hiddens, self.model.config.leaky_slope)?;
        self.trace.push(
            kind.step(),
            t,
            consumed,
            vec![Item::Output(role, t), Item::Hidden(role, t)],
        );
        Ok(out)
    }

    fn precursor(&mut self, direction: Direction) -> Result<(Vec<Var>, Option<Vec<HiddenState>>)> {
        let len = self.seq.len();
        let model = self.model;
        let refine = model.config.refine;
        let Some(net) = model.precursor.as_ref() else {
            let mut sr = Vec::with_capacity(len);
            for t in 0..len {
                if refine.uses_bicubic() {
                    sr.push(self.bicubic(t)?);
                    self.trace
                        .push(Step::Fixed, t, vec![Item::Bicubic(t)], vec![Item::Output(Role::Precursor, t)]);
                } else {
                    sr.push(Var::constant(Tensor::zeros(self.seq.hr_shape())));
                    self.trace.push(Step::Fixed, t, vec![], vec![Item::Output(Role::Precursor, t)]);
                }
            }
            return Ok((sr, None));
        };
        let kind = match direction {
            Direction::Forward => Kind::PrecursorForward,
            Direction::Backward => Kind::PrecursorBackward,
        };
        let mut own: Vec<Option<Var>> = vec![None; len];
        let mut sr: Vec<Option<Var>> = vec![None; len];
        for t in direction.order(len) {
            let (bic, consumed) = if refine.uses_bicubic() {
                (Some(self.bicubic(t)?), vec![Item::Bicubic(t)])
            } else {
                (None, vec![])
            };
            let out = self.invoke(kind, net, t, &own, None, consumed)?;
            own[t] = Some(out.hidden);
            sr[t] = Some(match (refine, bic) {
                (RefineMode::Bicubic, Some(b)) => b,
                (RefineMode::LearnedOverBicubic, Some(b)) => ops::add(&out.residual, &b)?,
                _ => out.residual,
            });
        }
        let hidden = own
            .into_iter()
            .enumerate()
            .map(|(t, h)| HiddenState {
                tensor: h.expect("every timestep visited"),
                provenance: Role::Precursor,
                timestep: t,
            })
            .collect();
        Ok((sr.into_iter().map(|s| s.expect("every timestep visited")).collect(), Some(hidden)))
    }

    fn successor(&mut self, precursor: Option<&[HiddenState]>) -> Result<(Vec<Var>, Vec<HiddenState>)> {
        let len = self.seq.len();
        if self.model.precursor.is_some() && precursor.is_none() {
            return Err(Error::Schedule("missing precursor states".into()));
        }
        if let Some(p) = precursor {
            if p.len() != len {
                return Err(Error::Schedule(format!("{} precursor states for {len} frames", p.len())));
            }
        }
        let model = self.model;
        let net = &model.successor;
        let mut own: Vec<Option<Var>> = vec![None; len];
        let mut sr = Vec::with_capacity(len);
        for t in 0..len {
            let out = self.invoke(Kind::Successor, net, t, &own, precursor, vec![])?;
            own[t] = Some(out.hidden);
            sr.push(out.residual);
        }
        let hidden = own
            .into_iter()
            .enumerate()
            .map(|(t, h)| HiddenState {
                tensor: h.expect("every timestep visited"),
                provenance: Role::Successor,
                timestep: t,
            })
            .collect();
        Ok((sr, hidden))
    }

    fn combine(&mut self, sr_p: &[Var], sr_s: &[Var]) -> Result<Vec<Var>> {
        let out = combine(sr_p, sr_s)?;
        for t in 0..out.len() {
            self.trace.push(
                Step::Combine,
                t,
                vec![Item::Output(Role::Precursor, t), Item::Output(Role::Successor, t)],
                vec![Item::Sr(t)],
            );
        }
        Ok(out)
    }

    fn baseline(&mut self, order: &[usize]) -> Result<Vec<Var>> {
        let len = self.seq.len();
        let model = self.model;
        let kind = Kind::baseline(model.config.framework).ok_or_else(|| {
            Error::Schedule(format!("{} is not a single-generator framework", model.config.framework))
        })?;
        let net = &model.successor;
        let mut own: Vec<Option<Var>> = vec![None; len];
        let mut sr: Vec<Option<Var>> = vec![None; len];
        for &t in order {
            let bic = self.bicubic(t)?;
            let out = self.invoke(kind, net, t, &own, None, vec![])?;
            own[t] = Some(out.hidden);
            sr[t] = Some(ops::add(&out.residual, &bic)?);
            self.trace.push(
                Step::Combine,
                t,
                vec![Item::Output(Role::Generator, t), Item::Bicubic(t)],
                vec![Item::Sr(t)],
            );
        }
        sr.into_iter()
            .map(|s| s.ok_or_else(|| Error::Schedule("order does not visit every frame".into())))
            .collect()
    }
}

fn output_slice(seq: &VideoSequence, frames: Vec<Var>) -> Vec<Var> {
    let range = seq.outputs();
    frames.into_iter().skip(range.start).take(range.len()).collect()
}

/// Runs the precursor alone. `Backward` visits `t = T-1, ..., 0`.
pub fn run_precursor(seq: &VideoSequence, model: &Model<Var>, direction: Direction) -> Result<PrecursorPass> {
    let mask = InputMask::none();
    let mut runner = Runner::new(model, seq, &mask)?;
    let (sr, hidden) = runner.precursor(direction)?;
    Ok(PrecursorPass {
        sr,
        hidden,
        trace: runner.trace,
    })
}

/// Runs the successor forward over precursor states from
/// [`run_precursor`]. The returned trace only holds the successor's own
/// steps.
pub fn run_successor(
    seq: &VideoSequence,
    precursor: Option<&[HiddenState]>,
    model: &Model<Var>,
) -> Result<SuccessorPass> {
    let mask = InputMask::none();
    let mut runner = Runner::new(model, seq, &mask)?;
    let (sr, hidden) = runner.successor(precursor)?;
    Ok(SuccessorPass {
        sr,
        hidden,
        trace: runner.trace,
    })
}

/// `SR = SR_s + SR_p`, frame by frame.
pub fn combine(sr_p: &[Var], sr_s: &[Var]) -> Result<Vec<Var>> {
    if sr_p.len() != sr_s.len() {
        return Err(Error::Schedule(format!(
            "{} precursor frames vs {} successor frames",
            sr_p.len(),
            sr_s.len()
        )));
    }
    sr_p.iter().zip(sr_s).map(|(p, s)| ops::add(s, p)).collect()
}

/// IVSR, RVSR or HVSR: one generator plus the bicubic frame.
pub fn run_baseline(seq: &VideoSequence, model: &Model<Var>) -> Result<Run> {
    ablate_input(seq, model, &InputMask::none())
}

/// IVSR in an arbitrary frame order, which must visit every frame once.
pub fn run_ivsr_in_order(seq: &VideoSequence, model: &Model<Var>, order: &[usize]) -> Result<Run> {
    if model.config.framework != Framework::Ivsr {
        return Err(Error::Schedule("only IVSR may reorder timesteps".into()));
    }
    let mut seen = vec![false; seq.len()];
    for &t in order {
        if t >= seq.len() || core::mem::replace(&mut seen[t], true) {
            return Err(Error::Schedule(format!("order is not a permutation of 0..{}", seq.len())));
        }
    }
    let mask = InputMask::none();
    let mut runner = Runner::new(model, seq, &mask)?;
    let sr = runner.baseline(order)?;
    Ok(Run {
        sr: output_slice(seq, sr),
        sr_p: None,
        trace: runner.trace,
    })
}

/// Runs any framework end to end.
pub fn run_model(seq: &VideoSequence, model: &Model<Var>) -> Result<Run> {
    ablate_input(seq, model, &InputMask::none())
}

/// Runs any framework with the masked inputs replaced by zeros.
pub fn ablate_input(seq: &VideoSequence, model: &Model<Var>, mask: &InputMask) -> Result<Run> {
    let mut runner = Runner::new(model, seq, mask)?;
    let fw = model.config.framework;
    match Direction::of(fw) {
        Some(direction) => {
            let (sr_p, hidden) = runner.precursor(direction)?;
            let (sr_s, _) = runner.successor(hidden.as_deref())?;
            let sr = runner.combine(&sr_p, &sr_s)?;
            Ok(Run {
                sr: output_slice(seq, sr),
                sr_p: Some(output_slice(seq, sr_p)),
                trace: runner.trace,
            })
        }
        None => {
            let order: Vec<usize> = (0..seq.len()).collect();
            let sr = runner.baseline(&order)?;
            Ok(Run {
                sr: output_slice(seq, sr),
                sr_p: None,
                trace: runner.trace,
            })
        }
    }
}

#[cfg(test)]
mod tests;
