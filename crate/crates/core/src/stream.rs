use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Vlo,
    Temp,
    Sram,
    External,
}

impl std::fmt::Display for SourceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SourceKind::Vlo => "vlo",
            SourceKind::Temp => "temp",
            SourceKind::Sram => "sram",
            SourceKind::External => "external",
        })
    }
}

/// A sequence of 8-bit samples plus where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    pub samples: Vec<u8>,
    pub source_kind: SourceKind,
    /// Sample rate in Hz, when the source has one.
    pub rate: Option<f64>,
}

/// Sidecar metadata written next to a raw stream dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub source_kind: SourceKind,
    pub rate: Option<f64>,
    pub count: usize,
}

impl SampleStream {
    pub fn new(samples: Vec<u8>, source_kind: SourceKind, rate: Option<f64>) -> Self {
        SampleStream {
            samples,
            source_kind,
            rate,
        }
    }

    pub fn external(samples: Vec<u8>) -> Self {
        Self::new(samples, SourceKind::External, None)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Bits needed to represent the largest sample (at least 1).
    pub fn bits_per_sample(&self) -> u32 {
        let max = self.samples.iter().copied().max().unwrap_or(0);
        (u8::BITS - max.leading_zeros()).max(1)
    }

    /// Each sample expanded to `bits_per_sample` bits, most significant first.
    pub fn to_bits(&self) -> Vec<u8> {
        let width = self.bits_per_sample();
        let mut bits = Vec::with_capacity(self.samples.len() * width as usize);
        for &s in &self.samples {
            for shift in (0..width).rev() {
                bits.push((s >> shift) & 1);
            }
        }
        bits
    }

    pub fn meta(&self) -> StreamMeta {
        StreamMeta {
            source_kind: self.source_kind,
            rate: self.rate,
            count: self.samples.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_and_binarization() {
        let s = SampleStream::external(vec![0, 1, 1, 0]);
        assert_eq!(s.bits_per_sample(), 1);
        assert_eq!(s.to_bits(), vec![0, 1, 1, 0]);

        let s = SampleStream::external(vec![5, 2]);
        assert_eq!(s.bits_per_sample(), 3);
        assert_eq!(s.to_bits(), vec![1, 0, 1, 0, 1, 0]);

        let s = SampleStream::external(vec![0x80, 0]);
        assert_eq!(s.bits_per_sample(), 8);
        assert_eq!(&s.to_bits()[..8], &[1, 0, 0, 0, 0, 0, 0, 0]);

        assert_eq!(SampleStream::external(vec![0; 4]).bits_per_sample(), 1);
    }

    #[test]
    fn meta_roundtrip() {
        let s = SampleStream::new(vec![1, 2, 3], SourceKind::Vlo, Some(9500.0));
        let json = serde_json::to_string(&s.meta()).unwrap();
        assert_eq!(json, r#"{"source_kind":"vlo","rate":9500.0,"count":3}"#);
        let back: StreamMeta = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s.meta());
    }
}
