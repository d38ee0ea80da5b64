//! Seeded synthetic multichannel snapshots with class-conditioned spatial
//! templates, stratified splitting and the CSV/JSON dataset files.
//!
//! Noise comes from ChaCha20 (`rand_chacha`, value-stable across platforms)
//! keyed with `seed_from_u64(seed)` and one stream per (class, sample). Each
//! pair of uniforms becomes two standard normals through Box-Muller, computed
//! with `libm` so the bits do not depend on the platform math library.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, VpcError};
use crate::phasor::PhasorState;

/// Label names for the four templates, in label order.
pub const CLASS_NAMES: [&str; 4] = ["rest", "left", "right", "flow"];

/// Generator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub n_channels: usize,
    pub n_classes: usize,
    pub samples_per_class: usize,
    pub noise_sigma: f64,
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            n_channels: 32,
            n_classes: 4,
            samples_per_class: 200,
            noise_sigma: 0.2,
            amplitude: 1.5,
            seed: 0,
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_channels < 2 {
            return Err(VpcError::Config("n_channels must be at least 2".into()));
        }
        if self.n_classes != 2 && self.n_classes != 4 {
            return Err(VpcError::Config(format!("n_classes must be 2 or 4, got {}", self.n_classes)));
        }
        if self.samples_per_class == 0 {
            return Err(VpcError::Config("samples_per_class must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(VpcError::Config("noise_sigma must be finite and >= 0".into()));
        }
        if !self.amplitude.is_finite() {
            return Err(VpcError::Config("amplitude must be finite".into()));
        }
        Ok(())
    }

    /// Template indices used for each label.
    pub fn template_ids(&self) -> Vec<usize> {
        match self.n_classes {
            2 => vec![1, 2],
            _ => (0..self.n_classes).collect(),
        }
    }
}

/// One labelled channel snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub values: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub snapshots: Vec<Snapshot>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn n_channels(&self) -> usize {
        self.snapshots.first().map_or(0, |s| s.values.len())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes()];
        for s in &self.snapshots {
            c[s.label] += 1;
        }
        c
    }

    pub fn labels(&self) -> Vec<usize> {
        self.snapshots.iter().map(|s| s.label).collect()
    }

    /// Canonical CSV: header `label,ch0,...`, one row per snapshot, floats
    /// in `{:.16e}` (17 significant digits).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("label");
        for k in 0..self.n_channels() {
            write!(s, ",ch{k}").unwrap();
        }
        s.push('\n');
        for snap in &self.snapshots {
            write!(s, "{}", snap.label).unwrap();
            for v in &snap.values {
                write!(s, ",{v:.16e}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    /// Parses the CSV layout written by [`Dataset::to_csv`]. Class names are
    /// taken from `class_names` when given, otherwise `class0..`.
    pub fn from_csv(text: &str, class_names: Option<Vec<String>>) -> std::result::Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or("empty file")?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"label") || cols.len() < 3 {
            return Err("header must be `label,ch0,ch1,...`".into());
        }
        for (k, c) in cols[1..].iter().enumerate() {
            if *c != format!("ch{k}") {
                return Err(format!("unexpected column `{c}`, wanted `ch{k}`"));
            }
        }
        let n = cols.len() - 1;
        let mut snapshots = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != n + 1 {
                return Err(format!("row {}: expected {} fields, got {}", i + 1, n + 1, fields.len()));
            }
            let label = fields[0]
                .parse::<usize>()
                .map_err(|_| format!("row {}: bad label `{}`", i + 1, fields[0]))?;
            let values = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| format!("row {}: bad value `{f}`", i + 1)))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(format!("row {}: non-finite value", i + 1));
            }
            snapshots.push(Snapshot { values, label });
        }
        let k = snapshots.iter().map(|s| s.label + 1).max().unwrap_or(0);
        let class_names = match class_names {
            Some(names) if names.len() >= k => names,
            Some(names) => return Err(format!("{} class names for labels up to {}", names.len(), k - 1)),
            None => (0..k).map(|c| format!("class{c}")).collect(),
        };
        Ok(Self {
            snapshots,
            class_names,
        })
    }

    /// Hex SHA-256 of the canonical CSV.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_csv().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            write!(s, "{b:02x}").unwrap();
            s
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| VpcError::io(path, e))
    }

    pub fn read_csv(path: &Path, class_names: Option<Vec<String>>) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| VpcError::io(path, e))?;
        Self::from_csv(&text, class_names).map_err(|msg| VpcError::Parse {
            path: path.to_path_buf(),
            msg,
        })
    }

    /// Encodes every snapshot onto the torus.
    pub fn encode(&self) -> Result<Vec<(PhasorState<f64>, usize)>> {
        self.snapshots
            .iter()
            .map(|s| Ok((crate::encoding::encode_values(&s.values)?, s.label)))
            .collect()
    }
}

/// Noise-free spatial pattern for template `class`, channel `k` of `N`:
///
/// * 0 `rest`: sawtooth repeating every 8 channels, `a (2 (k mod 8) / 8 - 1)`
/// * 1 `left`: `+a` on the first `N/2` channels, `-a` on the rest
/// * 2 `right`: channel-reversed `left`
/// * 3 `flow`: travelling wave `a cos(2 pi k / 8)`
pub fn class_template(class: usize, n_channels: usize, amplitude: f64) -> Result<Vec<f64>> {
    let n = n_channels;
    let half = n / 2;
    let t = match class {
        0 => (0..n).map(|k| amplitude * (2.0 * (k % 8) as f64 / 8.0 - 1.0)).collect(),
        1 => (0..n).map(|k| if k < half { amplitude } else { -amplitude }).collect(),
        2 => (0..n).map(|k| if n - 1 - k < half { amplitude } else { -amplitude }).collect(),
        3 => (0..n)
            .map(|k| amplitude * libm::cos(2.0 * std::f64::consts::PI * k as f64 / 8.0))
            .collect(),
        _ => return Err(VpcError::InvalidInput(format!("template {class} out of range 0..4"))),
    };
    Ok(t)
}

#[inline]
fn unit_f64(rng: &mut ChaCha20Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normals via Box-Muller, two per pair of uniforms.
fn gaussians(rng: &mut ChaCha20Rng, out: &mut [f64]) {
    let mut k = 0;
    while k < out.len() {
        let u1 = 1.0 - unit_f64(rng); // (0, 1]
        let u2 = unit_f64(rng);
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let a = 2.0 * std::f64::consts::PI * u2;
        out[k] = r * libm::cos(a);
        if k + 1 < out.len() {
            out[k + 1] = r * libm::sin(a);
        }
        k += 2;
    }
}

fn sample_rng(seed: u64, class: usize, index: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((class as u64) << 32) | index as u64);
    rng
}

/// Draws `samples_per_class` noisy copies of each template, class-major.
pub fn generate_from_templates(spec: &GenSpec, templates: &[Vec<f64>], class_names: Vec<String>) -> Dataset {
    let mut snapshots = Vec::with_capacity(templates.len() * spec.samples_per_class);
    let mut noise = vec![0.0; spec.n_channels];
    for (label, template) in templates.iter().enumerate() {
        for i in 0..spec.samples_per_class {
            let mut rng = sample_rng(spec.seed, label, i);
            gaussians(&mut rng, &mut noise);
            let values = template
                .iter()
                .zip(&noise)
                .map(|(&t, &e)| t + spec.noise_sigma * e)
                .collect();
            snapshots.push(Snapshot { values, label });
        }
    }
    Dataset {
        snapshots,
        class_names,
    }
}

/// Generates a balanced dataset from the builtin templates.
pub fn generate(spec: &GenSpec) -> Result<Dataset> {
    spec.validate()?;
    let ids = spec.template_ids();
    let templates = ids
        .iter()
        .map(|&c| class_template(c, spec.n_channels, spec.amplitude))
        .collect::<Result<Vec<_>>>()?;
    let names = ids.iter().map(|&c| CLASS_NAMES[c].to_string()).collect();
    Ok(generate_from_templates(spec, &templates, names))
}

/// Train/validation/test fractions and the shuffle seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_frac: 0.6,
            val_frac: 0.15,
            test_frac: 0.25,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = [self.train_frac, self.val_frac, self.test_frac];
        if f.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(VpcError::InvalidSplit("every fraction must be positive".into()));
        }
        if (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(VpcError::InvalidSplit("fractions must sum to 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Shuffles each class with the split seed, then cuts it proportionally.
pub fn stratified_split(data: &Dataset, split: &SplitSpec) -> Result<Split> {
    split.validate()?;
    let mut parts: [Vec<Snapshot>; 3] = Default::default();
    for class in 0..data.n_classes() {
        let mut members: Vec<&Snapshot> = data.snapshots.iter().filter(|s| s.label == class).collect();
        let n = members.len();
        let n_train = (split.train_frac * n as f64).round() as usize;
        let n_val = (split.val_frac * n as f64).round() as usize;
        if n_train == 0 || n_val == 0 || n_train + n_val >= n {
            return Err(VpcError::InvalidSplit(format!(
                "class {class} with {n} samples leaves an empty split"
            )));
        }
        let mut rng = sample_rng(split.seed, class, u32::MAX as usize);
        for i in (1..n).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            members.swap(i, j);
        }
        parts[0].extend(members[..n_train].iter().map(|s| (*s).clone()));
        parts[1].extend(members[n_train..n_train + n_val].iter().map(|s| (*s).clone()));
        parts[2].extend(members[n_train + n_val..].iter().map(|s| (*s).clone()));
    }
    let [train, val, test] = parts.map(|snapshots| Dataset {
        snapshots,
        class_names: data.class_names.clone(),
    });
    Ok(Split { train, val, test })
}

/// Writes `<stem>.csv` and `<stem>.json` (the generator spec).
pub fn write_dataset_files(data: &Dataset, spec: &GenSpec, csv_path: &Path) -> Result<()> {
    data.write_csv(csv_path)?;
    let json_path = csv_path.with_extension("json");
    let json = serde_json::to_string_pretty(spec).expect("GenSpec serializes");
    fs::write(&json_path, json + "\n").map_err(|e| VpcError::io(&json_path, e))
}
