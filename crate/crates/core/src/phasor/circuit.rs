use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::gates::Parity;
use crate::error::{Result, VpcError};

/// Layer kinds as they appear in the textual circuit form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayerKind {
    Shift,
    MixEven,
    MixOdd,
    Normalize,
}

impl LayerKind {
    pub fn token(self) -> &'static str {
        match self {
            LayerKind::Shift => "shift",
            LayerKind::MixEven => "mix-even",
            LayerKind::MixOdd => "mix-odd",
            LayerKind::Normalize => "normalize",
        }
    }
}

impl FromStr for LayerKind {
    type Err = VpcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shift" => Ok(LayerKind::Shift),
            "mix-even" => Ok(LayerKind::MixEven),
            "mix-odd" => Ok(LayerKind::MixOdd),
            "normalize" => Ok(LayerKind::Normalize),
            other => Err(VpcError::Config(format!("unknown layer token `{other}`"))),
        }
    }
}

/// A resolved layer. Shift layers own the parameter block
/// `params[offset .. offset + n_threads]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateLayer {
    Shift { offset: usize },
    Mix(Parity),
    Normalize,
}

impl GateLayer {
    pub fn kind(self) -> LayerKind {
        match self {
            GateLayer::Shift { .. } => LayerKind::Shift,
            GateLayer::Mix(Parity::Even) => LayerKind::MixEven,
            GateLayer::Mix(Parity::Odd) => LayerKind::MixOdd,
            GateLayer::Normalize => LayerKind::Normalize,
        }
    }
}

/// Builtin circuit families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    /// `[shift, mix-even, shift, mix-odd]`: two shift layers, 2N parameters.
    SingleStack,
    /// `blocks x [shift, mix-even, mix-odd]`, no pull-back.
    DeepCircuit,
    /// `blocks x [shift, mix-even, mix-odd, normalize]`.
    DeepStack,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::SingleStack => "single-stack",
            Builtin::DeepCircuit => "deep-circuit",
            Builtin::DeepStack => "deep-stack",
        }
    }
}

impl FromStr for Builtin {
    type Err = VpcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-stack" | "single_stack" => Ok(Builtin::SingleStack),
            "deep-circuit" | "deep_circuit" => Ok(Builtin::DeepCircuit),
            "deep-stack" | "deep_stack" => Ok(Builtin::DeepStack),
            other => Err(VpcError::Config(format!("unknown circuit `{other}`"))),
        }
    }
}

/// Declarative circuit: thread count plus an ordered list of layers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CircuitSpec {
    n_threads: usize,
    layers: Vec<GateLayer>,
}

impl CircuitSpec {
    /// Resolves layer kinds into layers, assigning each shift layer the next
    /// contiguous block of `n_threads` parameters.
    pub fn from_kinds(n_threads: usize, kinds: &[LayerKind]) -> Result<Self> {
        if n_threads == 0 {
            return Err(VpcError::InvalidInput("circuit needs at least one thread".into()));
        }
        let mut offset = 0;
        let layers = kinds
            .iter()
            .map(|k| match k {
                LayerKind::Shift => {
                    let l = GateLayer::Shift { offset };
                    offset += n_threads;
                    l
                }
                LayerKind::MixEven => GateLayer::Mix(Parity::Even),
                LayerKind::MixOdd => GateLayer::Mix(Parity::Odd),
                LayerKind::Normalize => GateLayer::Normalize,
            })
            .collect();
        Ok(Self { n_threads, layers })
    }

    pub fn single_stack(n_threads: usize) -> Result<Self> {
        use LayerKind::*;
        Self::from_kinds(n_threads, &[Shift, MixEven, Shift, MixOdd])
    }

    pub fn deep_circuit(n_threads: usize, blocks: usize) -> Result<Self> {
        use LayerKind::*;
        Self::from_kinds(n_threads, &[Shift, MixEven, MixOdd].repeat(blocks))
    }

    pub fn deep_stack(n_threads: usize, blocks: usize) -> Result<Self> {
        use LayerKind::*;
        Self::from_kinds(n_threads, &[Shift, MixEven, MixOdd, Normalize].repeat(blocks))
    }

    /// `blocks` is ignored for the single-stack family.
    pub fn builtin(kind: Builtin, n_threads: usize, blocks: usize) -> Result<Self> {
        match kind {
            Builtin::SingleStack => Self::single_stack(n_threads),
            Builtin::DeepCircuit => Self::deep_circuit(n_threads, blocks),
            Builtin::DeepStack => Self::deep_stack(n_threads, blocks),
        }
    }

    pub fn n_threads(&self) -> usize {
        self.n_threads
    }

    pub fn layers(&self) -> &[GateLayer] {
        &self.layers
    }

    /// `n_threads` times the number of shift layers.
    pub fn param_count(&self) -> usize {
        self.n_threads * self.shift_layers()
    }

    pub fn shift_layers(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l, GateLayer::Shift { .. }))
            .count()
    }

    pub fn has_normalize(&self) -> bool {
        self.layers.contains(&GateLayer::Normalize)
    }
}

/// Canonical text form: `threads=N tok tok ...`.
impl fmt::Display for CircuitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "threads={}", self.n_threads)?;
        for l in &self.layers {
            write!(f, " {}", l.kind().token())?;
        }
        Ok(())
    }
}

/// Parses the canonical text form. Tokens may be separated by whitespace or
/// commas; `threads=N` may appear anywhere but exactly once.
impl FromStr for CircuitSpec {
    type Err = VpcError;

    fn from_str(s: &str) -> Result<Self> {
        let mut threads = None;
        let mut kinds = Vec::new();
        for tok in s.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            if let Some(v) = tok.strip_prefix("threads=") {
                if threads.is_some() {
                    return Err(VpcError::Config("`threads=` given twice".into()));
                }
                threads = Some(
                    v.parse::<usize>()
                        .map_err(|_| VpcError::Config(format!("bad thread count `{v}`")))?,
                );
            } else {
                kinds.push(tok.parse::<LayerKind>()?);
            }
        }
        let n = threads.ok_or_else(|| VpcError::Config("circuit text lacks `threads=N`".into()))?;
        Self::from_kinds(n, &kinds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_counts() {
        assert_eq!(CircuitSpec::single_stack(32).unwrap().param_count(), 64);
        assert_eq!(CircuitSpec::deep_circuit(32, 4).unwrap().param_count(), 128);
        assert_eq!(CircuitSpec::deep_stack(32, 4).unwrap().param_count(), 128);
        assert_eq!(CircuitSpec::from_kinds(1, &[]).unwrap().param_count(), 0);
    }

    #[test]
    fn shift_offsets_are_contiguous() {
        let c = CircuitSpec::deep_stack(5, 3).unwrap();
        let offsets: Vec<_> = c
            .layers()
            .iter()
            .filter_map(|l| match l {
                GateLayer::Shift { offset } => Some(*offset),
                _ => None,
            })
            .collect();
        assert_eq!(offsets, vec![0, 5, 10]);
    }

    #[test]
    fn deep_stack_normalizes_after_each_block() {
        let c = CircuitSpec::deep_stack(4, 3).unwrap();
        for block in c.layers().chunks(4) {
            assert_eq!(block[2], GateLayer::Mix(Parity::Odd));
            assert_eq!(block[3], GateLayer::Normalize);
        }
        assert!(!CircuitSpec::deep_circuit(4, 3).unwrap().has_normalize());
    }

    #[test]
    fn text_roundtrip() {
        let c = CircuitSpec::deep_stack(6, 2).unwrap();
        let text = c.to_string();
        assert!(text.starts_with("threads=6 shift mix-even mix-odd normalize"));
        assert_eq!(text.parse::<CircuitSpec>().unwrap(), c);
        let parsed: CircuitSpec = "shift,mix-even, threads=4 shift mix-odd".parse().unwrap();
        assert_eq!(parsed, CircuitSpec::single_stack(4).unwrap());
    }

    #[test]
    fn text_errors() {
        assert!("shift".parse::<CircuitSpec>().is_err());
        assert!("threads=2 twist".parse::<CircuitSpec>().is_err());
        assert!("threads=0 shift".parse::<CircuitSpec>().is_err());
        assert!("threads=2 threads=3".parse::<CircuitSpec>().is_err());
    }
}
