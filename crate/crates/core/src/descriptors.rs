//! Multi-scale shape descriptors and dictionary matching.
//!
//! For pulse scale `j` the descriptor samples are
//!
//! `I_{j,n} = τ₁^j(nΔt_j) / ((2^j / N) Σ_m ‖N⁰(mΔt₀)‖_F²)^{1/2}`,
//!
//! where `τ₁^j` is the largest singular value of the filtered tensor at scale
//! `j` and `N⁰` the scale-0 tensor. Values are concatenated by ascending
//! scale, then ascending sample index.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{make_shape_id, Material, ShapeId};
use crate::gpt::{filtered_pt_series_with, GptSweep, PTSeries, PADDING};
use crate::pulse::{base_pulse, Pulse};

pub const DEFAULT_SCALES: [i32; 4] = [-1, 0, 1, 2];
pub const ARCHIVE_VERSION: u32 = 1;

/// Everything that determines the sampling of a descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescriptorSettings {
    /// Base pulse duration `T`.
    pub duration: f64,
    /// Samples per scale.
    pub samples: usize,
    pub scales: Vec<i32>,
}

impl Default for DescriptorSettings {
    fn default() -> Self {
        Self {
            duration: 5.0,
            samples: 512,
            scales: DEFAULT_SCALES.to_vec(),
        }
    }
}

impl DescriptorSettings {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::InvalidArgument("at least one scale is needed".into()));
        }
        let mut sorted = self.scales.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted != self.scales {
            return Err(Error::InvalidArgument(format!(
                "scales must be strictly increasing, got {:?}",
                self.scales
            )));
        }
        base_pulse(self.duration, self.samples).map(|_| ())
    }

    pub fn base_pulse(&self) -> Result<Pulse> {
        base_pulse(self.duration, self.samples)
    }

    /// The descriptor scales plus scale 0, which the normalizer needs.
    pub fn computed_scales(&self) -> Vec<i32> {
        let mut s = self.scales.clone();
        if !s.contains(&0) {
            s.push(0);
            s.sort_unstable();
        }
        s
    }

    /// Hash of the pulse settings and scales; descriptors compare only when
    /// these agree.
    pub fn fingerprint(&self) -> Result<String> {
        let pulse = self.base_pulse()?;
        let text = format!("{};padding={};scales={:?}", pulse.settings_key(), PADDING, self.scales);
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeDescriptor {
    pub scales: Vec<i32>,
    /// Samples per scale.
    pub samples: usize,
    /// `I_{j,n}`, scale-major.
    pub values: Vec<f64>,
    /// `τ₂` normalized like `values`; diagnostic only.
    pub secondary: Vec<f64>,
    /// `(1/N) Σ_m ‖N⁰(mΔt₀)‖_F²`.
    pub energy: f64,
    pub fingerprint: String,
}

impl ShapeDescriptor {
    /// Values of one scale.
    pub fn scale_values(&self, j: i32) -> Option<&[f64]> {
        let idx = self.scales.iter().position(|&s| s == j)?;
        Some(&self.values[idx * self.samples..(idx + 1) * self.samples])
    }

    /// The descriptor restricted to a subset of its scales.
    pub fn restrict(&self, scales: &[i32]) -> Result<ShapeDescriptor> {
        let mut values = Vec::new();
        let mut secondary = Vec::new();
        for &j in scales {
            let idx = self
                .scales
                .iter()
                .position(|&s| s == j)
                .ok_or_else(|| Error::InvalidArgument(format!("descriptor has no scale {j}")))?;
            let range = idx * self.samples..(idx + 1) * self.samples;
            values.extend_from_slice(&self.values[range.clone()]);
            secondary.extend_from_slice(&self.secondary[range]);
        }
        Ok(ShapeDescriptor {
            scales: scales.to_vec(),
            samples: self.samples,
            values,
            secondary,
            energy: self.energy,
            fingerprint: String::new(),
        })
    }

    /// Euclidean distance `‖I(D) − I(B)‖`.
    pub fn distance(&self, other: &ShapeDescriptor) -> Result<f64> {
        if self.scales != other.scales || self.samples != other.samples {
            return Err(Error::InvalidArgument(format!(
                "descriptor layouts differ: scales {:?}×{} vs {:?}×{}",
                self.scales, self.samples, other.scales, other.samples
            )));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Builds the descriptor for `scales` from filtered tensor series keyed by
/// scale. The scale-0 series must be present.
pub fn compute_descriptor(series: &BTreeMap<i32, PTSeries>, scales: &[i32]) -> Result<ShapeDescriptor> {
    let base = series
        .get(&0)
        .ok_or_else(|| Error::InvalidArgument("the scale-0 series is required".into()))?;
    if base.is_empty() {
        return Err(Error::DegenerateNormalizer(0.0));
    }
    let energy = (0..base.len()).map(|n| base.frobenius(n).powi(2)).sum::<f64>() / base.len() as f64;
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(Error::DegenerateNormalizer(energy));
    }
    let samples = base.len();
    let mut values = Vec::with_capacity(scales.len() * samples);
    let mut secondary = Vec::with_capacity(scales.len() * samples);
    for &j in scales {
        let s = series
            .get(&j)
            .ok_or_else(|| Error::InvalidArgument(format!("missing series for scale {j}")))?;
        if s.len() != samples {
            return Err(Error::InvalidArgument(format!(
                "scale {j} has {} samples, scale 0 has {samples}",
                s.len()
            )));
        }
        let norm = (2f64.powi(j) * energy).sqrt();
        for n in 0..samples {
            let (t1, t2) = s.singular_values(n);
            values.push(t1 / norm);
            secondary.push(t2 / norm);
        }
    }
    Ok(ShapeDescriptor {
        scales: scales.to_vec(),
        samples,
        values,
        secondary,
        energy,
        fingerprint: String::new(),
    })
}

/// Noiseless descriptor of a mesh from the frequency-domain pipeline.
pub fn descriptor_of_mesh(
    mesh: &crate::geometry::BoundaryMesh,
    material: &Material,
    settings: &DescriptorSettings,
) -> Result<ShapeDescriptor> {
    settings.validate()?;
    let base = settings.base_pulse()?;
    let sweep = GptSweep::new(mesh, material, mesh.centroid, 1, 1)?;
    let scales = settings.computed_scales();
    let series = exec::try_map_indexed(scales.len(), |i| {
        filtered_pt_series_with(&sweep, &base.dilate(scales[i])?)
    })?;
    let map: BTreeMap<i32, PTSeries> = scales.into_iter().zip(series).collect();
    let mut d = compute_descriptor(&map, &settings.scales)?;
    d.fingerprint = settings.fingerprint()?;
    Ok(d)
}

/// One dictionary element to build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntrySpec {
    pub name: String,
    pub shape: ShapeId,
    /// Overrides the shape's default material.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<Material>,
}

impl EntrySpec {
    pub fn material(&self) -> Material {
        self.material.unwrap_or_else(|| self.shape.material())
    }
}

/// Input of a dictionary build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DictionaryConfig {
    pub panels: usize,
    #[serde(flatten)]
    pub settings: DescriptorSettings,
    pub entries: Vec<EntrySpec>,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        Self {
            panels: 256,
            settings: DescriptorSettings::default(),
            entries: ShapeId::ALL
                .iter()
                .map(|&shape| EntrySpec {
                    name: shape.name().to_string(),
                    shape,
                    material: None,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryEntry {
    pub name: String,
    pub shape: ShapeId,
    pub material: Material,
    pub descriptor: ShapeDescriptor,
}

/// Versioned archive of descriptors sharing one settings fingerprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    pub version: u32,
    pub panels: usize,
    pub settings: DescriptorSettings,
    /// Settings fingerprint, shared by every entry's descriptor.
    pub settings_fingerprint: String,
    /// Hash of the whole archive content except this field.
    pub fingerprint: String,
    pub entries: Vec<DictionaryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub name: String,
    pub distance: f64,
}

impl Dictionary {
    pub fn build(config: &DictionaryConfig) -> Result<Dictionary> {
        config.settings.validate()?;
        if config.entries.len() < 2 {
            return Err(Error::InvalidArgument("a dictionary needs at least two entries".into()));
        }
        let mut names: Vec<&str> = config.entries.iter().map(|e| e.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != config.entries.len() {
            return Err(Error::InvalidArgument("dictionary entry names must be unique".into()));
        }
        let descriptors = config
            .entries
            .iter()
            .map(|e| {
                let mesh = make_shape_id(e.shape, config.panels)?;
                descriptor_of_mesh(&mesh, &e.material(), &config.settings)
            })
            .collect::<Result<Vec<_>>>()?;
        let entries = config
            .entries
            .iter()
            .zip(descriptors)
            .map(|(e, descriptor)| DictionaryEntry {
                name: e.name.clone(),
                shape: e.shape,
                material: e.material(),
                descriptor,
            })
            .collect();
        let mut dict = Dictionary {
            version: ARCHIVE_VERSION,
            panels: config.panels,
            settings: config.settings.clone(),
            settings_fingerprint: config.settings.fingerprint()?,
            fingerprint: String::new(),
            entries,
        };
        dict.fingerprint = dict.content_hash()?;
        Ok(dict)
    }

    fn content_hash(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.fingerprint.clear();
        let bytes = serde_json::to_vec(&copy)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }

    /// Checks the version and the content hash.
    pub fn verify(&self) -> Result<()> {
        if self.version != ARCHIVE_VERSION {
            return Err(Error::Format(format!(
                "unsupported dictionary version {} (expected {ARCHIVE_VERSION})",
                self.version
            )));
        }
        let found = self.content_hash()?;
        if found != self.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: self.fingerprint.clone(),
                found,
            });
        }
        for e in &self.entries {
            if e.descriptor.fingerprint != self.settings_fingerprint {
                return Err(Error::FingerprintMismatch {
                    expected: self.settings_fingerprint.clone(),
                    found: e.descriptor.fingerprint.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Dictionary> {
        let text = std::fs::read_to_string(path)?;
        let dict: Dictionary = serde_json::from_str(&text)?;
        dict.verify()?;
        Ok(dict)
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }

    /// A copy restricted to a subset of the scales.
    pub fn restrict(&self, scales: &[i32]) -> Result<Dictionary> {
        let settings = DescriptorSettings {
            scales: scales.to_vec(),
            ..self.settings.clone()
        };
        settings.validate()?;
        let fp = settings.fingerprint()?;
        let entries = self
            .entries
            .iter()
            .map(|e| {
                let mut descriptor = e.descriptor.restrict(scales)?;
                descriptor.fingerprint = fp.clone();
                Ok(DictionaryEntry {
                    descriptor,
                    ..e.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut dict = Dictionary {
            settings,
            settings_fingerprint: fp,
            entries,
            ..self.clone()
        };
        dict.fingerprint = dict.content_hash()?;
        Ok(dict)
    }

    /// Smallest distance between two entries.
    pub fn separation(&self) -> Result<f64> {
        let mut min = f64::INFINITY;
        for (i, a) in self.entries.iter().enumerate() {
            for b in &self.entries[i + 1..] {
                min = min.min(a.descriptor.distance(&b.descriptor)?);
            }
        }
        Ok(min)
    }
}

/// Distances to every entry, ascending; equal distances keep dictionary
/// order.
pub fn match_descriptor(d: &ShapeDescriptor, dict: &Dictionary) -> Result<Vec<MatchResult>> {
    if d.fingerprint != dict.settings_fingerprint {
        return Err(Error::FingerprintMismatch {
            expected: dict.settings_fingerprint.clone(),
            found: d.fingerprint.clone(),
        });
    }
    let mut out = dict
        .entries
        .iter()
        .map(|e| {
            Ok(MatchResult {
                name: e.name.clone(),
                distance: d.distance(&e.descriptor)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    Ok(out)
}

/// The unique best match, or `None` when the two smallest distances tie.
pub fn best_match(ranking: &[MatchResult]) -> Option<&str> {
    match ranking {
        [] => None,
        [only] => Some(&only.name),
        [first, second, ..] if first.distance < second.distance => Some(&first.name),
        _ => None,
    }
}
