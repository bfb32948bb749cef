use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::generator::ModelConfig;
use crate::scalar::Scalar;

fn clip(len: usize, seed: u64) -> VideoSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = (0..len)
        .map(|_| Tensor::from_fn([1, 3, 4, 4], |_, _, _, _| rng.gen_range(0.0..1.0)))
        .collect();
    VideoSequence::new(frames, 4).unwrap()
}

// Fresh models emit a zero residual, so the zero-initialised last convs are
// filled in to make every input observable.
fn model(cfg: &ModelConfig, seed: u64) -> Model<Var> {
    let mut m = Model::init(cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for p in m.params_mut() {
        if p.max_abs() == 0.0 && p.shape()[0] > 1 {
            *p = Tensor::from_fn(p.shape(), |_, _, _, _| rng.gen_range(-0.1..0.1));
        }
    }
    m.to_vars(false)
}

fn all_configs() -> Vec<ModelConfig> {
    vec![
        ModelConfig::baseline(Framework::Ivsr, 1, 2),
        ModelConfig::baseline(Framework::Rvsr, 1, 2),
        ModelConfig::baseline(Framework::Hvsr, 1, 2),
        ModelConfig {
            window: 4,
            ..ModelConfig::baseline(Framework::Hvsr, 1, 2)
        },
        ModelConfig::omniscient(Framework::Lovsr, 1, 1, 2),
        ModelConfig::omniscient(Framework::Govsr, 1, 1, 2),
        ModelConfig::omniscient(Framework::Govsr, 0, 1, 2),
    ]
}

#[test]
fn traces_audit_for_every_framework_and_length() {
    for cfg in all_configs() {
        let m = model(&cfg, 1);
        for len in 1..=7 {
            let run = run_model(&clip(len, len as u64), &m).unwrap();
            assert_eq!(run.sr.len(), len);
            run.trace.audit(len).unwrap_or_else(|e| panic!("{cfg} T={len}: {e}"));
            let text = run.trace.to_text();
            assert_eq!(ScheduleTrace::from_text(&text).unwrap(), run.trace);
        }
    }
}

#[test]
fn govsr_precursor_runs_backwards_from_zero_state() {
    let cfg = ModelConfig::omniscient(Framework::Govsr, 1, 1, 2);
    let pass = run_precursor(&clip(3, 2), &model(&cfg, 2), Direction::Backward).unwrap();
    let steps: Vec<&TraceStep> = pass.trace.of(Step::Precursor).collect();
    assert_eq!(steps.iter().map(|s| s.timestep).collect::<Vec<_>>(), vec![2, 1, 0]);
    assert_eq!(steps[0].consumed.last(), Some(&Item::ZeroHidden));
    assert_eq!(steps[1].consumed.last(), Some(&Item::Hidden(Role::Precursor, 2)));
    assert_eq!(pass.hidden.unwrap().len(), 3);
}

#[test]
fn single_frame_replicates_and_uses_zero_hidden() {
    let cfg = ModelConfig::omniscient(Framework::Govsr, 1, 1, 2);
    let pass = run_precursor(&clip(1, 3), &model(&cfg, 3), Direction::Backward).unwrap();
    assert_eq!(pass.sr.len(), 1);
    let step = pass.trace.of(Step::Precursor).next().unwrap();
    assert_eq!(
        step.consumed,
        vec![
            Item::Bicubic(0),
            Item::Frame(0),
            Item::Frame(0),
            Item::Frame(0),
            Item::ZeroHidden,
            Item::ZeroHidden,
            Item::ZeroHidden
        ]
    );
}

#[test]
fn empty_sequence_is_rejected() {
    assert!(matches!(VideoSequence::new(vec![], 4), Err(Error::Schedule(_))));
}

#[test]
fn receptive_fields() {
    let len = 7;
    let seq = clip(len, 4);
    let govsr = run_model(&seq, &model(&ModelConfig::omniscient(Framework::Govsr, 1, 1, 2), 4)).unwrap();
    let lovsr = run_model(&seq, &model(&ModelConfig::omniscient(Framework::Lovsr, 1, 1, 2), 4)).unwrap();
    let ivsr = run_model(&seq, &model(&ModelConfig::baseline(Framework::Ivsr, 1, 2), 4)).unwrap();
    for t in 0..len {
        let all: BTreeSet<usize> = (0..len).collect();
        assert_eq!(govsr.trace.receptive_field(t), all);
        let past: BTreeSet<usize> = (0..=(t + 2).min(len - 1)).collect();
        assert_eq!(lovsr.trace.receptive_field(t), past, "t={t}");
        let local: BTreeSet<usize> = (t.saturating_sub(1)..=(t + 1).min(len - 1)).collect();
        assert_eq!(ivsr.trace.receptive_field(t), local);
    }
}

#[test]
fn successor_needs_precursor_states() {
    let cfg = ModelConfig::omniscient(Framework::Lovsr, 1, 1, 2);
    let m = model(&cfg, 5);
    let seq = clip(3, 5);
    assert!(matches!(run_successor(&seq, None, &m), Err(Error::Schedule(_))));
    let pass = run_precursor(&seq, &m, Direction::Forward).unwrap();
    let succ = run_successor(&seq, pass.hidden.as_deref(), &m).unwrap();
    let last = succ.trace.steps().last().unwrap();
    assert_eq!(last.timestep, 2);
    assert_eq!(
        &last.consumed[3..],
        &[Item::Hidden(Role::Successor, 1), Item::Hidden(Role::Precursor, 2), Item::ZeroHidden]
    );
    let mut full = pass.trace.clone();
    full.extend(succ.trace.clone());
    full.audit(3).unwrap();
    assert!(succ.trace.audit(3).is_err());
}

#[test]
fn split_passes_match_the_full_run() {
    let cfg = ModelConfig::omniscient(Framework::Govsr, 1, 1, 2);
    let m = model(&cfg, 6);
    let seq = clip(4, 6);
    let pass = run_precursor(&seq, &m, Direction::Backward).unwrap();
    let succ = run_successor(&seq, pass.hidden.as_deref(), &m).unwrap();
    let sr = combine(&pass.sr, &succ.sr).unwrap();
    let full = run_model(&seq, &m).unwrap();
    for (a, b) in sr.iter().zip(&full.sr) {
        assert_eq!(a.value(), b.value());
    }
}

#[test]
fn combine_is_exact_addition() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut rand = || Var::constant(Tensor::from_fn([1, 3, 5, 5], |_, _, _, _| rng.gen_range(-1.0..1.0)));
    let p = vec![rand(), rand()];
    let s = vec![rand(), rand()];
    let sr = combine(&p, &s).unwrap();
    for i in 0..2 {
        for ((o, a), b) in sr[i].value().data().iter().zip(p[i].value().data()).zip(s[i].value().data()) {
            assert_eq!(*o, a + b);
        }
    }
    let zeros = vec![Var::constant(Tensor::zeros([1, 3, 5, 5])); 2];
    let sr = combine(&p, &zeros).unwrap();
    assert_eq!(sr[0].value(), p[0].value());
    assert!(combine(&p, &s[..1]).is_err());
    let wrong = vec![Var::constant(Tensor::zeros([1, 3, 5, 4])); 2];
    assert!(combine(&p, &wrong).is_err());
}

#[test]
fn zero_successor_leaves_precursor_output() {
    let cfg = ModelConfig::omniscient(Framework::Govsr, 1, 1, 2);
    let mut params = Model::init(&cfg, 8).unwrap();
    let zeros = Model::zeros(&cfg).unwrap();
    params.successor = zeros.successor;
    let m = params.to_vars(false);
    let run = run_model(&clip(3, 8), &m).unwrap();
    for (sr, p) in run.sr.iter().zip(run.sr_p.as_ref().unwrap()) {
        assert_eq!(sr.value(), p.value());
    }
}

#[test]
fn refine_modes_and_missing_precursor() {
    let seq = clip(3, 9);
    let bic: Vec<Tensor> = seq
        .frames()
        .iter()
        .map(|f| ops::bicubic_upsample_tensor(f, 4).unwrap())
        .collect();
    for refine in [RefineMode::Learned, RefineMode::Bicubic, RefineMode::LearnedOverBicubic] {
        let cfg = ModelConfig {
            refine,
            ..ModelConfig::omniscient(Framework::Govsr, 0, 1, 2)
        };
        let run = run_model(&seq, &model(&cfg, 9)).unwrap();
        for (p, b) in run.sr_p.unwrap().iter().zip(&bic) {
            if refine.uses_bicubic() {
                assert_eq!(p.value(), b);
            } else {
                assert_eq!(p.value().max_abs(), 0.0);
            }
        }
        assert!(run.trace.of(Step::Precursor).next().is_none());
        assert_eq!(run.trace.of(Step::Fixed).count(), 3);
    }
    let cfg = ModelConfig {
        refine: RefineMode::Bicubic,
        ..ModelConfig::omniscient(Framework::Govsr, 1, 1, 2)
    };
    let run = run_model(&seq, &model(&cfg, 9)).unwrap();
    for (p, b) in run.sr_p.unwrap().iter().zip(&bic) {
        assert_eq!(p.value(), b);
    }
}

#[test]
fn baselines_read_the_documented_inputs() {
    let seq = clip(4, 10);
    let rvsr = run_model(&seq, &model(&ModelConfig::baseline(Framework::Rvsr, 1, 2), 10)).unwrap();
    for s in rvsr.trace.of(Step::Generator) {
        assert!(!s.consumed.contains(&Item::Frame(s.timestep + 1)));
        assert_eq!(s.consumed[2], Item::ZeroFrame);
    }
    let hvsr4 = ModelConfig {
        window: 4,
        ..ModelConfig::baseline(Framework::Hvsr, 1, 2)
    };
    let run = run_model(&seq, &model(&hvsr4, 10)).unwrap();
    let first = run.trace.of(Step::Generator).next().unwrap();
    assert_eq!(&first.consumed[..4], &[Item::Frame(0), Item::Frame(0), Item::Frame(1), Item::Frame(2)]);
    assert!(run_model(&seq, &model(&ModelConfig::omniscient(Framework::Lovsr, 1, 1, 2), 10))
        .unwrap()
        .trace
        .of(Step::Generator)
        .next()
        .is_none());
}

#[test]
fn ivsr_is_order_independent() {
    let seq = clip(5, 11);
    let m = model(&ModelConfig::baseline(Framework::Ivsr, 1, 2), 11);
    let forward = run_model(&seq, &m).unwrap();
    let shuffled = run_ivsr_in_order(&seq, &m, &[3, 0, 4, 2, 1]).unwrap();
    for (a, b) in forward.sr.iter().zip(&shuffled.sr) {
        assert_eq!(a.value(), b.value());
    }
    assert!(run_ivsr_in_order(&seq, &m, &[0, 0, 1, 2, 3]).is_err());
    let rvsr = model(&ModelConfig::baseline(Framework::Rvsr, 1, 2), 11);
    assert!(run_ivsr_in_order(&seq, &rvsr, &[0, 1, 2, 3, 4]).is_err());
}

#[test]
fn masks() {
    let seq = clip(4, 12);
    let govsr = model(&ModelConfig::omniscient(Framework::Govsr, 1, 1, 2), 12);
    let plain = run_model(&seq, &govsr).unwrap();
    let none = ablate_input(&seq, &govsr, &InputMask::none()).unwrap();
    for (a, b) in plain.sr.iter().zip(&none.sr) {
        assert_eq!(a.value(), b.value());
    }

    let mask = InputMask::none().with(MaskTarget::Successor, InputName::CurHidden);
    let run = ablate_input(&seq, &govsr, &mask).unwrap();
    for s in run.trace.of(Step::Successor) {
        assert_eq!(s.consumed[4], Item::ZeroHidden);
    }
    assert!(run.sr.iter().zip(&plain.sr).any(|(a, b)| a.value() != b.value()));
    run.trace.audit(4).unwrap();

    let mask = InputMask::none().with(MaskTarget::Both, InputName::CurFrame);
    let run = ablate_input(&seq, &govsr, &mask).unwrap();
    assert!(run
        .trace
        .steps()
        .iter()
        .filter(|s| matches!(s.step, Step::Precursor | Step::Successor))
        .all(|s| s.consumed.contains(&Item::ZeroFrame)));

    // The backward precursor only reads H[t+1].
    let bad = InputMask::none().with(MaskTarget::Precursor, InputName::PrevHidden);
    assert!(matches!(ablate_input(&seq, &govsr, &bad), Err(Error::NotAnInput(..))));
    let lovsr = model(&ModelConfig::omniscient(Framework::Lovsr, 1, 1, 2), 12);
    assert!(ablate_input(&seq, &lovsr, &bad).is_ok());

    let ivsr = model(&ModelConfig::baseline(Framework::Ivsr, 1, 2), 12);
    let bad = InputMask::none().with(MaskTarget::Successor, InputName::NextHidden);
    assert!(matches!(ablate_input(&seq, &ivsr, &bad), Err(Error::NotAnInput(..))));
    let rvsr = model(&ModelConfig::baseline(Framework::Rvsr, 1, 2), 12);
    let bad = InputMask::none().with(MaskTarget::Successor, InputName::NextFrame);
    assert!(matches!(ablate_input(&seq, &rvsr, &bad), Err(Error::NotAnInput(..))));
    let bad = InputMask::none().with(MaskTarget::Precursor, InputName::CurFrame);
    assert!(matches!(ablate_input(&seq, &rvsr, &bad), Err(Error::NotAnInput(..))));
}

#[test]
fn context_padding_drops_the_end_frames() {
    let seq = clip(5, 13);
    let hr: Vec<Tensor> = (0..5).map(|i| Tensor::full([1, 3, 16, 16], i as Scalar)).collect();
    let seq = seq.with_hr(hr).unwrap().with_padding(PaddingMode::Context).unwrap();
    assert_eq!(seq.outputs(), 1..4);
    assert_eq!(seq.targets().unwrap()[0].data()[0], 1.0);
    let m = model(&ModelConfig::omniscient(Framework::Lovsr, 1, 1, 2), 13);
    let run = run_model(&seq, &m).unwrap();
    assert_eq!(run.sr.len(), 3);
    assert_eq!(run.sr_p.unwrap().len(), 3);
    let last = run.trace.of(Step::Successor).nth(3).unwrap();
    assert_eq!(last.consumed[5], Item::Hidden(Role::Precursor, 4));
    assert!(clip(2, 1).with_padding(PaddingMode::Context).is_err());
    assert!(clip(2, 1).with_hr(vec![Tensor::zeros([1, 3, 8, 8]); 2]).is_err());
}

#[test]
fn scale_mismatch_is_rejected() {
    let frames = vec![Tensor::zeros([1, 3, 4, 4])];
    let seq = VideoSequence::new(frames, 2).unwrap();
    let m = model(&ModelConfig::baseline(Framework::Ivsr, 1, 2), 1);
    assert!(run_model(&seq, &m).is_err());
}
