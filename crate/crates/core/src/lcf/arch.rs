use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::network::FEATURE_COUNT;

/// How the head output maps to a speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputType {
    /// Output times the network mean speed.
    Ratio,
    /// Output plus the network mean speed.
    Diff,
    /// Output is the speed.
    Speed,
}

impl OutputType {
    /// The quantity the model is trained to produce for a true speed.
    pub fn encode(self, speed: f64, v_mean: f64) -> f64 {
        match self {
            OutputType::Ratio => speed / v_mean,
            OutputType::Diff => speed - v_mean,
            OutputType::Speed => speed,
        }
    }

    /// Inverse of [`encode`](Self::encode), before clamping.
    pub fn decode(self, raw: f64, v_mean: f64) -> f64 {
        match self {
            OutputType::Ratio => raw * v_mean,
            OutputType::Diff => raw + v_mean,
            OutputType::Speed => raw,
        }
    }
}

/// Decodes raw per-link outputs and clamps each to `[0, v_ff]`.
pub fn decode_output(raw: &[f64], v_mean: f64, output: OutputType, free_flow: &[f64]) -> Vec<f64> {
    raw.iter()
        .zip(free_flow)
        .map(|(&r, &vff)| output.decode(r, v_mean).clamp(0.0, vff))
        .collect()
}

impl fmt::Display for OutputType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputType::Ratio => "ratio",
            OutputType::Diff => "diff",
            OutputType::Speed => "speed",
        })
    }
}

impl FromStr for OutputType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ratio" => Ok(OutputType::Ratio),
            "diff" => Ok(OutputType::Diff),
            "speed" => Ok(OutputType::Speed),
            _ => Err(Error::Argument(format!("unknown output type '{s}' (ratio, diff, speed)"))),
        }
    }
}

/// Learned model families. `partition` adds the sub-region feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variant {
    pub gat: bool,
    pub gru: bool,
    pub partition: bool,
}

impl Variant {
    pub const DNN: Variant = Variant::new(false, false, false);
    pub const DNN_GRU: Variant = Variant::new(false, true, false);
    pub const GAT: Variant = Variant::new(true, false, false);
    pub const GAT_GRU: Variant = Variant::new(true, true, false);
    pub const GAT_GRU_P: Variant = Variant::new(true, true, true);

    pub const fn new(gat: bool, gru: bool, partition: bool) -> Self {
        Variant { gat, gru, partition }
    }

    /// Every combination, in report order.
    pub fn all() -> Vec<Variant> {
        let mut out = Vec::new();
        for partition in [false, true] {
            for (gat, gru) in [(false, false), (false, true), (true, false), (true, true)] {
                out.push(Variant::new(gat, gru, partition));
            }
        }
        out
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.gat { "GAT" } else { "DNN" })?;
        if self.gru {
            f.write_str("-GRU")?;
        }
        if self.partition {
            f.write_str("-P")?;
        }
        Ok(())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let mut parts = lower.split('-').peekable();
        let gat = match parts.next() {
            Some("gat") => true,
            Some("dnn") => false,
            _ => return Err(Error::Argument(format!("unknown model '{s}'"))),
        };
        let gru = parts.next_if_eq(&"gru").is_some();
        let partition = parts.next_if_eq(&"p").is_some();
        if parts.next().is_some() {
            return Err(Error::Argument(format!("unknown model '{s}'")));
        }
        Ok(Variant { gat, gru, partition })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchConfig {
    pub variant: Variant,
    pub output: OutputType,
    pub features: usize,
    /// Width of both the spatial and the temporal embedding.
    pub hidden: usize,
    pub heads: usize,
    pub history: usize,
    /// Hidden widths of the head; a single output follows. The input is
    /// `2 * hidden` with the temporal branch and `hidden` without.
    pub fc: Vec<usize>,
    pub attention_slope: f64,
    /// Value for history steps before the first window, after normalization.
    pub padding: f64,
}

impl ArchConfig {
    pub fn new(variant: Variant) -> Self {
        ArchConfig {
            variant,
            output: OutputType::Ratio,
            features: FEATURE_COUNT,
            hidden: 128,
            heads: 2,
            history: 5,
            fc: vec![384, 256, 128, 64, 32],
            attention_slope: 0.2,
            padding: -1.0,
        }
    }

    /// Full head widths from input to the single output.
    pub fn head_widths(&self) -> Vec<usize> {
        let input = if self.variant.gru { 2 * self.hidden } else { self.hidden };
        let mut w = vec![input];
        w.extend(&self.fc);
        w.push(1);
        w
    }

    pub fn validate(&self) -> Result<()> {
        if self.features == 0 || self.hidden == 0 || self.history == 0 {
            return Err(Error::Validation("features, hidden and history must be positive".into()));
        }
        if self.variant.gat && self.heads == 0 {
            return Err(Error::Validation("GAT needs at least one head".into()));
        }
        if self.fc.iter().any(|&w| w == 0) {
            return Err(Error::Validation("head layer widths must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_head_widths() {
        let a = ArchConfig::new(Variant::GAT_GRU_P);
        assert_eq!(a.head_widths(), vec![256, 384, 256, 128, 64, 32, 1]);
        assert_eq!(a.head_widths().len() - 1, 6);
        assert_eq!(ArchConfig::new(Variant::GAT).head_widths()[0], 128);
    }

    #[test]
    fn decode_examples() {
        let vff = [25.0];
        assert_eq!(decode_output(&[1.1], 20.0, OutputType::Ratio, &vff)[0], 1.1 * 20.0);
        assert_eq!(decode_output(&[2.0], 20.0, OutputType::Diff, &vff), vec![22.0]);
        assert_eq!(decode_output(&[22.0], 20.0, OutputType::Speed, &vff), vec![22.0]);
        assert_eq!(decode_output(&[2.0], 20.0, OutputType::Ratio, &vff), vec![25.0]);
        assert_eq!(decode_output(&[-30.0], 20.0, OutputType::Diff, &vff), vec![0.0]);
    }

    #[test]
    fn encode_decode_inverse() {
        for &(v, m) in &[(12.5, 20.0), (25.0, 3.3), (0.7, 24.9)] {
            for o in [OutputType::Ratio, OutputType::Diff, OutputType::Speed] {
                assert!((o.decode(o.encode(v, m), m) - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn variant_names() {
        for v in Variant::all() {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("gat-gru-p".parse::<Variant>().unwrap(), Variant::GAT_GRU_P);
        assert_eq!(Variant::DNN_GRU.to_string(), "DNN-GRU");
        assert!("gru".parse::<Variant>().is_err());
        assert!("gat-p-gru".parse::<Variant>().is_err());
    }
}
