use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Widths of a fusion stack: conv1 → conv2 → maxpool → dense → head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionWidths {
    pub conv1: usize,
    pub conv2: usize,
    pub dense: usize,
}

impl FusionWidths {
    pub fn scaled(self, multiplier: f64) -> Self {
        let s = |w: usize| ((w as f64 * multiplier).round() as usize).max(1);
        Self {
            conv1: s(self.conv1),
            conv2: s(self.conv2),
            dense: s(self.dense),
        }
    }

    /// Trainable parameters of a fusion stack with these widths.
    pub fn param_count(&self, input: usize, output: usize, kernel: usize) -> usize {
        kernel * input * self.conv1
            + self.conv1
            + kernel * self.conv1 * self.conv2
            + self.conv2
            + self.conv2 * self.dense
            + self.dense
            + self.dense * output
            + output
    }
}

/// Architecture of all four systems.
///
/// `audio_dim`, `visual_dim`, `frames` and `themes` come from the dataset
/// manifest; the remaining fields are architectural choices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub themes: usize,
    pub frames: usize,
    pub audio_dim: usize,
    pub visual_dim: usize,
    /// Width of the audio and visual top-layer embeddings.
    pub width: usize,
    /// Fusion widths shared by the TL fusion sub-network and the CL model.
    pub fusion: FusionWidths,
    pub kernel: usize,
    /// Baseline fusion width multiplier; `None` calibrates it for parameter
    /// parity with TL + CL.
    pub baseline_multiplier: Option<f64>,
}

impl ModelConfig {
    /// Full-size widths: 128-wide embeddings, fusion 256/256/128.
    pub fn full(themes: usize, frames: usize, audio_dim: usize, visual_dim: usize) -> Self {
        Self {
            themes,
            frames,
            audio_dim,
            visual_dim,
            width: 128,
            fusion: FusionWidths {
                conv1: 256,
                conv2: 256,
                dense: 128,
            },
            kernel: 1,
            baseline_multiplier: None,
        }
    }

    /// Quarter-width variant used for single-core experiments.
    pub fn desk(themes: usize, frames: usize, audio_dim: usize, visual_dim: usize) -> Self {
        Self {
            width: 32,
            fusion: FusionWidths {
                conv1: 64,
                conv2: 64,
                dense: 32,
            },
            ..Self::full(themes, frames, audio_dim, visual_dim)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.themes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 themes, got {}",
                self.themes
            )));
        }
        let dims = [
            ("frames", self.frames),
            ("audio_dim", self.audio_dim),
            ("visual_dim", self.visual_dim),
            ("width", self.width),
            ("fusion.conv1", self.fusion.conv1),
            ("fusion.conv2", self.fusion.conv2),
            ("fusion.dense", self.fusion.dense),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "kernel width {} must be odd",
                self.kernel
            )));
        }
        if let Some(m) = self.baseline_multiplier {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::Config("baseline multiplier must be positive".into()));
            }
        }
        Ok(())
    }

    /// Input channels of the CL model: visual, audio, predicted and true theme.
    pub fn cl_input(&self) -> usize {
        2 * self.width + 2 * self.themes
    }

    /// Parameters of the audio and visual sub-networks.
    pub fn encoder_param_count(&self) -> usize {
        let w = self.width;
        let audio = self.audio_dim * w + w + 4 * w * (2 * w + 1) + w * w + 2 * w;
        let visual = self.visual_dim * w + w;
        audio + visual
    }

    pub fn tl_param_count(&self) -> usize {
        self.encoder_param_count()
            + self
                .fusion
                .param_count(2 * self.width, self.themes, self.kernel)
    }

    pub fn cl_param_count(&self) -> usize {
        self.fusion.param_count(self.cl_input(), 1, self.kernel)
    }

    pub fn baseline_input(&self, with_theme: bool) -> usize {
        2 * self.width + if with_theme { self.themes } else { 0 }
    }

    pub fn baseline_param_count(&self, with_theme: bool) -> usize {
        self.encoder_param_count()
            + self
                .baseline_fusion()
                .param_count(self.baseline_input(with_theme), 1, self.kernel)
    }

    /// Fusion widths of both baselines.
    pub fn baseline_fusion(&self) -> FusionWidths {
        self.fusion.scaled(self.baseline_multiplier())
    }

    /// The configured multiplier, or the one whose baseline-1 parameter count
    /// is closest to TL + CL (searched on a 0.005 grid from 0.5 to 4).
    pub fn baseline_multiplier(&self) -> f64 {
        if let Some(m) = self.baseline_multiplier {
            return m;
        }
        let target = (self.tl_param_count() + self.cl_param_count()) as f64;
        let base = self.encoder_param_count() as f64;
        let input = self.baseline_input(false);
        let mut best = (f64::INFINITY, 2.0);
        for step in 100..=800 {
            let m = step as f64 * 0.005;
            let count = base + self.fusion.scaled(m).param_count(input, 1, self.kernel) as f64;
            let gap = (count - target).abs();
            if gap < best.0 {
                best = (gap, m);
            }
        }
        best.1
    }

    /// Fixes the calibrated multiplier so that it is recorded explicitly.
    pub fn resolved(&self) -> Self {
        Self {
            baseline_multiplier: Some(self.baseline_multiplier()),
            ..self.clone()
        }
    }
}
