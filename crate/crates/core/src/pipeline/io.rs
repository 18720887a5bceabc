//! On-disk formats: PGM/PPM images, MFTN tensors, dataset and model directories.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::classifier::{Architecture, LabeledDataset, Model};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Real;

pub const TENSOR_MAGIC: &[u8; 4] = b"MFTN";
pub const TENSOR_VERSION: u32 = 1;

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Binary PGM (1 channel) or PPM (3 channels), 8 bits; values are clamped to
/// `[0, 1]` and rounded.
pub fn encode_pnm<T: Real>(img: &Image<T>) -> Result<Vec<u8>> {
    let magic = match img.channels() {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::Precondition(format!("PNM images have 1 or 3 channels, not {c}"))),
    };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|v| (v.to_f64_lossy().clamp(0.0, 1.0) * 255.0).round() as u8));
    Ok(out)
}

/// Parse binary PGM/PPM with maxval 255; pixels load as `value / 255`.
pub fn decode_pnm<T: Real>(bytes: &[u8], path: &Path) -> Result<Image<T>> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, "truncated header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let channels = match tokens[0].as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(Error::format(path, format!("unsupported magic `{other}`"))),
    };
    let num = |s: &str, what: &str| s.parse::<usize>().map_err(|_| Error::format(path, format!("bad {what} `{s}`")));
    let (width, height, maxval) = (num(&tokens[1], "width")?, num(&tokens[2], "height")?, num(&tokens[3], "maxval")?);
    if maxval != 255 {
        return Err(Error::format(path, format!("only 8-bit images are supported, maxval {maxval}")));
    }
    let n = width * height * channels;
    let raster = bytes.get(pos..pos + n).ok_or_else(|| Error::format(path, "truncated raster"))?;
    let data = raster.iter().map(|&b| T::lit(f64::from(b) / 255.0)).collect();
    Image::new(height, width, channels, data)
}

pub fn save_image<T: Real>(img: &Image<T>, path: &Path) -> Result<()> {
    write_file(path, &encode_pnm(img)?)
}

pub fn load_image<T: Real>(path: &Path) -> Result<Image<T>> {
    decode_pnm(&read_file(path)?, path)
}

/// `MFTN`, version, rank, dims, then `f32` values; all little-endian.
pub fn encode_tensor<T: Real>(dims: &[usize], data: &[T]) -> Result<Vec<u8>> {
    let expected: usize = dims.iter().product();
    if expected != data.len() {
        return Err(Error::DimensionMismatch { expected, got: data.len() });
    }
    let mut out = Vec::with_capacity(12 + 4 * dims.len() + 4 * data.len());
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        let d = u32::try_from(d).map_err(|_| Error::Precondition(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_tensor<T: Real>(bytes: &[u8], path: &Path) -> Result<(Vec<usize>, Vec<T>)> {
    let word = |i: usize| -> Result<u32> {
        bytes
            .get(i..i + 4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| Error::format(path, "truncated tensor"))
    };
    if bytes.get(..4) != Some(TENSOR_MAGIC.as_slice()) {
        return Err(Error::format(path, "missing MFTN magic"));
    }
    let version = word(4)?;
    if version != TENSOR_VERSION {
        return Err(Error::format(path, format!("unsupported tensor version {version}")));
    }
    let rank = word(8)? as usize;
    let dims = (0..rank).map(|i| word(12 + 4 * i).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let count: usize = dims.iter().product();
    let start = 12 + 4 * rank;
    if bytes.len() != start + 4 * count {
        return Err(Error::format(path, format!("expected {count} values, found {} bytes", bytes.len() - start.min(bytes.len()))));
    }
    let data = bytes[start..]
        .chunks_exact(4)
        .map(|b| T::lit(f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))))
        .collect();
    Ok((dims, data))
}

pub fn save_tensor<T: Real>(path: &Path, dims: &[usize], data: &[T]) -> Result<()> {
    write_file(path, &encode_tensor(dims, data)?)
}

pub fn load_tensor<T: Real>(path: &Path) -> Result<(Vec<usize>, Vec<T>)> {
    decode_tensor(&read_file(path)?, path)
}

/// One row of a dataset manifest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Relative to the dataset root.
    pub path: PathBuf,
    pub label: usize,
    pub split: String,
}

/// `manifest.csv` (`path,label,split`) plus `classes.txt` (one name per line).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
    pub class_names: Vec<String>,
}

impl DatasetManifest {
    pub fn load(root: &Path) -> Result<Self> {
        let classes_path = root.join("classes.txt");
        let classes = fs::read_to_string(&classes_path).map_err(|e| Error::io(&classes_path, e))?;
        let class_names: Vec<String> = classes.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
        let manifest_path = root.join("manifest.csv");
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("path,label,split") {
            return Err(Error::format(&manifest_path, "header must be `path,label,split`"));
        }
        let mut entries = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.trim().split(',').collect();
            let [path, label, split] = fields[..] else {
                return Err(Error::format(&manifest_path, format!("line {}: expected 3 fields", n + 2)));
            };
            let label: usize = label
                .parse()
                .map_err(|_| Error::format(&manifest_path, format!("line {}: bad label `{label}`", n + 2)))?;
            if label >= class_names.len() {
                return Err(Error::format(&manifest_path, format!("line {}: label {label} has no class name", n + 2)));
            }
            if split != "train" && split != "test" {
                return Err(Error::format(&manifest_path, format!("line {}: split must be train or test", n + 2)));
            }
            entries.push(ManifestEntry { path: PathBuf::from(path), label, split: split.to_string() });
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = entries.iter().find(|e| !seen.insert(&e.path)) {
            return Err(Error::format(&manifest_path, format!("`{}` listed twice", dup.path.display())));
        }
        Ok(DatasetManifest { root: root.to_path_buf(), entries, class_names })
    }

    pub fn load_split<T: Real>(&self, split: &str) -> Result<LabeledDataset<T>> {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for e in self.entries.iter().filter(|e| e.split == split) {
            images.push(load_image(&self.root.join(&e.path))?);
            labels.push(e.label);
        }
        if images.is_empty() {
            return Err(Error::format(self.root.join("manifest.csv"), format!("no `{split}` entries")));
        }
        LabeledDataset::new(images, labels, self.class_names.clone())
    }
}

pub fn load_dataset<T: Real>(root: &Path, split: &str) -> Result<LabeledDataset<T>> {
    DatasetManifest::load(root)?.load_split(split)
}

/// Write images under `root/images/` and append to (or create) the manifest.
pub fn save_dataset<T: Real>(root: &Path, splits: &[(&str, &LabeledDataset<T>)]) -> Result<DatasetManifest> {
    let class_names = splits.first().map(|(_, d)| d.class_names.clone()).unwrap_or_default();
    let mut entries = Vec::new();
    for (split, ds) in splits {
        if ds.class_names != class_names {
            return Err(Error::Precondition("splits disagree on class names".into()));
        }
        for (i, (img, &label)) in ds.images.iter().zip(&ds.labels).enumerate() {
            let ext = if img.channels() == 1 { "pgm" } else { "ppm" };
            let path = PathBuf::from("images").join(format!("{split}_{i:05}.{ext}"));
            save_image(img, &root.join(&path))?;
            entries.push(ManifestEntry { path, label, split: split.to_string() });
        }
    }
    let mut csv = String::from("path,label,split\n");
    for e in &entries {
        let _ = writeln!(csv, "{},{},{}", e.path.display(), e.label, e.split);
    }
    write_file(&root.join("manifest.csv"), csv.as_bytes())?;
    write_file(&root.join("classes.txt"), (class_names.join("\n") + "\n").as_bytes())?;
    Ok(DatasetManifest { root: root.to_path_buf(), entries, class_names })
}

/// Model directory: `model.txt` lists architecture, sizes and one tensor file per line.
pub fn save_model<T: Real>(model: &Model<T>, dir: &Path) -> Result<()> {
    let mut manifest = format!("arch = {}\ninputs = {}\nclasses = {}\n", model.arch(), model.inputs(), model.classes());
    for (name, dims, data) in model.tensors() {
        let file = format!("{name}.mftn");
        save_tensor(&dir.join(&file), &dims, &data)?;
        let dims: Vec<String> = dims.iter().map(ToString::to_string).collect();
        let _ = writeln!(manifest, "tensor = {name} {file} {}", dims.join("x"));
    }
    write_file(&dir.join("model.txt"), manifest.as_bytes())
}

pub fn load_model<T: Real>(dir: &Path) -> Result<Model<T>> {
    let path = dir.join("model.txt");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut arch: Option<Architecture> = None;
    let (mut inputs, mut classes) = (None, None);
    let mut tensors = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (key, value) = line.split_once('=').ok_or_else(|| Error::format(&path, format!("bad line `{line}`")))?;
        let value = value.trim();
        let bad = || Error::format(&path, format!("bad value in `{line}`"));
        match key.trim() {
            "arch" => arch = Some(value.parse()?),
            "inputs" => inputs = Some(value.parse::<usize>().map_err(|_| bad())?),
            "classes" => classes = Some(value.parse::<usize>().map_err(|_| bad())?),
            "tensor" => {
                let parts: Vec<&str> = value.split_whitespace().collect();
                let [name, file, dims] = parts[..] else { return Err(bad()) };
                let expected: Vec<usize> = dims.split('x').map(|d| d.parse().map_err(|_| bad())).collect::<Result<_>>()?;
                let (got, data) = load_tensor(&dir.join(file))?;
                if got != expected {
                    return Err(Error::format(dir.join(file), format!("shape {got:?} does not match manifest {expected:?}")));
                }
                tensors.push((name.to_string(), got, data));
            }
            other => return Err(Error::format(&path, format!("unknown key `{other}`"))),
        }
    }
    let missing = |k: &str| Error::format(&path, format!("missing `{k}`"));
    Model::from_tensors(
        arch.ok_or_else(|| missing("arch"))?,
        inputs.ok_or_else(|| missing("inputs"))?,
        classes.ok_or_else(|| missing("classes"))?,
        &tensors,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pnm_header_comments_are_skipped() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend([0u8, 255]);
        let img: Image<f64> = decode_pnm(&bytes, Path::new("x.pgm")).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0]);
    }

    #[test]
    fn pnm_rejects_bad_input() {
        assert!(decode_pnm::<f64>(b"P2\n1 1\n255\n0", Path::new("x")).is_err());
        assert!(decode_pnm::<f64>(b"P5\n2 2\n255\n\x00", Path::new("x")).is_err());
        assert!(decode_pnm::<f64>(b"P5\n1 1\n65535\n\x00\x00", Path::new("x")).is_err());
    }

    #[test]
    fn tensor_layout_is_little_endian() {
        let bytes = encode_tensor(&[2], &[1.0f64, -2.0]).unwrap();
        assert_eq!(&bytes[..4], b"MFTN");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[1, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &[2, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[20..24], &(-2.0f32).to_le_bytes());
        let (dims, data) = decode_tensor::<f64>(&bytes, Path::new("t")).unwrap();
        assert_eq!((dims, data), (vec![2], vec![1.0, -2.0]));
    }

    #[test]
    fn tensor_errors() {
        assert!(encode_tensor(&[3], &[1.0f64]).is_err());
        let mut bytes = encode_tensor(&[1], &[1.0f64]).unwrap();
        bytes[4] = 2;
        assert!(decode_tensor::<f64>(&bytes, Path::new("t")).is_err());
        assert!(decode_tensor::<f64>(b"NOPE", Path::new("t")).is_err());
    }
}
