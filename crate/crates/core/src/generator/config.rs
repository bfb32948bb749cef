use alloc::format;
use alloc::string::String;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// RGB end to end; luminance only appears in the metrics.
pub const IMAGE_CHANNELS: usize = 3;

/// How LR frames and hidden states flow through time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Framework {
    /// Sliding window, no hidden state; timesteps are independent.
    Ivsr,
    /// Previous and current frame plus the previous hidden state.
    Rvsr,
    /// Full window plus the previous hidden state.
    Hvsr,
    /// Precursor and successor both run forward in time.
    Lovsr,
    /// Precursor runs backward, successor forward.
    Govsr,
}

impl Framework {
    pub const ALL: [Framework; 5] = [
        Framework::Ivsr,
        Framework::Rvsr,
        Framework::Hvsr,
        Framework::Lovsr,
        Framework::Govsr,
    ];

    pub fn is_omniscient(self) -> bool {
        matches!(self, Framework::Lovsr | Framework::Govsr)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Framework::Ivsr => "ivsr",
            Framework::Rvsr => "rvsr",
            Framework::Hvsr => "hvsr",
            Framework::Lovsr => "lovsr",
            Framework::Govsr => "govsr",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ivsr" => Ok(Framework::Ivsr),
            "rvsr" => Ok(Framework::Rvsr),
            "hvsr" => Ok(Framework::Hvsr),
            "lovsr" => Ok(Framework::Lovsr),
            // Parameter and FLOP counts do not depend on the direction.
            "govsr" | "ovsr" => Ok(Framework::Govsr),
            other => Err(Error::invalid("framework", format!("unknown framework {other:?}"))),
        }
    }
}

impl core::fmt::Display for Framework {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Channel widths of the sub-pixel upscale head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpscaleWidth {
    /// The first conv emits `C_img * scale^2` channels and later stages keep
    /// the shuffled width (48 -> 12 -> 3 for RGB x4).
    Compact,
    /// Every stage but the last emits `4F` channels; the last emits `4 C_img`.
    Wide,
}

impl UpscaleWidth {
    pub fn as_str(self) -> &'static str {
        match self {
            UpscaleWidth::Compact => "compact",
            UpscaleWidth::Wide => "wide",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "compact" => Ok(UpscaleWidth::Compact),
            "wide" => Ok(UpscaleWidth::Wide),
            other => Err(Error::invalid("upscale", format!("unknown upscale width {other:?}"))),
        }
    }
}

/// What the refinement sum adds to the successor's output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineMode {
    /// The precursor's own upscaled output.
    Learned,
    /// The bicubic-upsampled current frame in place of the precursor output.
    Bicubic,
    /// The precursor's output on top of the bicubic frame.
    LearnedOverBicubic,
}

impl RefineMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RefineMode::Learned => "learned",
            RefineMode::Bicubic => "bicubic",
            RefineMode::LearnedOverBicubic => "learned+bicubic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "learned" => Ok(RefineMode::Learned),
            "bicubic" => Ok(RefineMode::Bicubic),
            "learned+bicubic" => Ok(RefineMode::LearnedOverBicubic),
            other => Err(Error::invalid("refine", format!("unknown refine mode {other:?}"))),
        }
    }

    pub fn uses_bicubic(self) -> bool {
        !matches!(self, RefineMode::Learned)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub framework: Framework,
    pub blocks_precursor: usize,
    pub blocks_successor: usize,
    pub filters: usize,
    pub scale: usize,
    pub leaky_slope: Scalar,
    /// LR frames per step: 3, or 4 for the widened hybrid variant.
    pub window: usize,
    pub upscale: UpscaleWidth,
    pub refine: RefineMode,
}

impl ModelConfig {
    /// An omniscient model, e.g. `ModelConfig::omniscient(Govsr, 4, 2, 56)`.
    pub fn omniscient(framework: Framework, blocks_precursor: usize, blocks_successor: usize, filters: usize) -> Self {
        ModelConfig {
            framework,
            blocks_precursor,
            blocks_successor,
            filters,
            scale: 4,
            leaky_slope: 0.2,
            window: 3,
            upscale: UpscaleWidth::Compact,
            refine: RefineMode::LearnedOverBicubic,
        }
    }

    /// A single-generator IVSR/RVSR/HVSR model.
    pub fn baseline(framework: Framework, blocks: usize, filters: usize) -> Self {
        ModelConfig {
            blocks_precursor: 0,
            ..Self::omniscient(framework, 0, blocks, filters)
        }
    }

    /// Whether a precursor network exists. Omniscient models with zero
    /// precursor blocks fall back to a fixed base instead.
    pub fn has_precursor(&self) -> bool {
        self.framework.is_omniscient() && self.blocks_precursor > 0
    }

    pub fn streams(&self) -> usize {
        self.window
    }

    pub fn upscale_stages(&self) -> usize {
        self.scale.trailing_zeros() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks_precursor + self.blocks_successor == 0 {
            return Err(Error::invalid("model", "at least one residual block is required"));
        }
        if !self.framework.is_omniscient() && self.blocks_precursor != 0 {
            return Err(Error::invalid(
                "model",
                format!("{} has no precursor network", self.framework),
            ));
        }
        if self.filters == 0 {
            return Err(Error::invalid("model", "filters must be positive"));
        }
        if self.scale < 2 || !self.scale.is_power_of_two() {
            return Err(Error::invalid("model", format!("scale {} is not a power of 2", self.scale)));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::invalid("model", "leaky slope must be in (0, 1)"));
        }
        match (self.window, self.framework) {
            (3, _) | (4, Framework::Hvsr) => Ok(()),
            (4, f) => Err(Error::invalid("model", format!("window 4 is only defined for hvsr, not {f}"))),
            (w, _) => Err(Error::invalid("model", format!("window must be 3 or 4, got {w}"))),
        }
    }

    /// `govsr-4+2-56` for omniscient models, `hvsr-5-64` for baselines.
    pub fn name(&self) -> String {
        if self.framework.is_omniscient() {
            format!(
                "{}-{}+{}-{}",
                self.framework, self.blocks_precursor, self.blocks_successor, self.filters
            )
        } else {
            format!("{}-{}-{}", self.framework, self.blocks_successor, self.filters)
        }
    }

    /// Parses the names produced by [`ModelConfig::name`]. `ovsr-…` is read
    /// as GOVSR.
    pub fn parse_name(s: &str) -> Result<Self> {
        let bad = || Error::invalid("model name", format!("cannot parse {s:?}"));
        let mut parts = s.trim().splitn(3, '-');
        let fw = Framework::parse(parts.next().ok_or_else(bad)?)?;
        let blocks = parts.next().ok_or_else(bad)?;
        let filters: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let cfg = if fw.is_omniscient() {
            let (p, s) = parse_split(blocks).ok_or_else(bad)?;
            Self::omniscient(fw, p, s, filters)
        } else {
            Self::baseline(fw, blocks.parse().map_err(|_| bad())?, filters)
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `"4+2"` -> `(4, 2)`.
pub fn parse_split(s: &str) -> Option<(usize, usize)> {
    let (a, b) = s.split_once('+')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

impl core::fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.name())
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::omniscient(Framework::Govsr, 4, 2, 56)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for s in ["govsr-4+2-56", "lovsr-8+4-80", "hvsr-5-64", "ivsr-5-64", "rvsr-1-16", "govsr-0+6-56"] {
            assert_eq!(ModelConfig::parse_name(s).unwrap().name(), s);
        }
        assert_eq!(ModelConfig::parse_name("OVSR-4+2-56").unwrap().name(), "govsr-4+2-56");
        assert!(ModelConfig::parse_name("govsr-4-56").is_err());
        assert!(ModelConfig::parse_name("xvsr-4+2-56").is_err());
        assert!(ModelConfig::parse_name("govsr-0+0-56").is_err());
    }

    #[test]
    fn validation() {
        let mut c = ModelConfig::baseline(Framework::Hvsr, 5, 64);
        c.window = 4;
        assert!(c.validate().is_ok());
        c.framework = Framework::Govsr;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::default();
        c.scale = 3;
        assert!(c.validate().is_err());
        c.scale = 8;
        assert!(c.validate().is_ok());
        assert_eq!(c.upscale_stages(), 3);
        let mut c = ModelConfig::baseline(Framework::Ivsr, 5, 64);
        c.blocks_precursor = 1;
        assert!(c.validate().is_err());
    }
}
