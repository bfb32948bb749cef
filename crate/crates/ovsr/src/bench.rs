//! Wall-time per output frame.

use std::time::Instant;

use ovsr_core::metrics::{fps, median};
use ovsr_core::scheduler::{run_model, VideoSequence};
use ovsr_core::{Error as CoreError, Model, Scalar, Tensor, Var};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub ms_per_frame: f64,
    pub fps: f64,
    /// Per-rep milliseconds per frame, in run order.
    pub samples: Vec<f64>,
}

/// Median over `reps` timed runs of `frames` LR frames of `lr_h x lr_w`,
/// after `warmup` untimed runs.
pub fn benchmark_time(
    model: &Model<Var>,
    lr_h: usize,
    lr_w: usize,
    frames: usize,
    warmup: usize,
    reps: usize,
) -> Result<Timing> {
    if warmup == 0 || reps == 0 || frames == 0 {
        return Err(CoreError::invalid("benchmark", "warmup, reps and frames must be at least 1").into());
    }
    let clip: Vec<Tensor> = (0..frames)
        .map(|t| Tensor::from_fn([1, 3, lr_h, lr_w], |_, c, y, x| ((c + 3 * y + 7 * x + t) % 17) as Scalar / 16.0))
        .collect();
    let seq = VideoSequence::new(clip, model.config.scale)?;
    for _ in 0..warmup {
        run_model(&seq, model)?;
    }
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        run_model(&seq, model)?;
        samples.push(start.elapsed().as_secs_f64() * 1e3 / frames as f64);
    }
    let ms = median(&mut samples.clone()).expect("reps >= 1");
    Ok(Timing {
        ms_per_frame: ms,
        fps: fps(ms),
        samples,
    })
}

/// Runs `f` inside a one-thread pool so timings do not depend on the
/// machine's core count.
pub fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(f)
}
