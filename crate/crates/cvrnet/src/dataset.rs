//! Class-per-directory datasets of PGM/PPM images or raw-tensor sidecars.

use std::fs as stdfs;
use std::path::{Path, PathBuf};

use cvrnet_core::data::{resize_nearest, DatasetIndex, Sample, SampleSource};
use cvrnet_core::Tensor;

use crate::container::{self, Record};
use crate::{fs, pnm, Error, Result};

pub const SIDECAR_MAGIC: [u8; 4] = *b"CVRT";
pub const SIDECAR_VERSION: u32 = 1;
const SIDECAR_RECORD: &str = "image";

const EXTENSIONS: [&str; 4] = ["pgm", "ppm", "pnm", "cvrt"];

fn is_sidecar(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("cvrt"))
}

/// Raw-tensor sidecar holding one H×W×C record (C of 1 or 3) in `[0, 1]`.
pub fn encode_sidecar(img: &Tensor<f32>) -> Vec<u8> {
    let s = img.shape();
    let shape = [s[1], s[2], s[3]];
    container::encode(SIDECAR_MAGIC, SIDECAR_VERSION, "", [(SIDECAR_RECORD, &shape[..], img.data().to_vec())])
}

fn decode_sidecar(bytes: &[u8]) -> std::result::Result<Tensor<f32>, String> {
    let c = container::decode(bytes, SIDECAR_MAGIC, SIDECAR_VERSION).map_err(|e| e.to_string())?;
    let [Record { name, shape, data }] = c.records.as_slice() else {
        return Err(format!("expected one record, found {}", c.records.len()));
    };
    if name != SIDECAR_RECORD || shape.len() != 3 || !matches!(shape[2], 1 | 3) || shape[0] == 0 || shape[1] == 0 {
        return Err(format!("record `{}` {:?} is not an H×W×C image with C in {{1, 3}}", name, shape));
    }
    if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err("values outside [0, 1]".into());
    }
    let (h, w) = (shape[0], shape[1]);
    let rgb = if shape[2] == 3 { data.clone() } else { data.iter().flat_map(|&g| [g; 3]).collect() };
    Tensor::new(&[1, h, w, 3], rgb).map_err(|e| e.to_string())
}

/// Decodes a PGM/PPM file or sidecar into a 1×H×W×3 tensor in `[0, 1]`.
pub fn load_image(path: &Path) -> Result<Tensor<f32>> {
    let bytes = fs::read(path)?;
    if is_sidecar(path) {
        decode_sidecar(&bytes).map_err(|d| Error::format(path, d))
    } else {
        pnm::decode(&bytes).map(|img| img.to_rgb_tensor()).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// [`load_image`] followed by nearest-neighbour resampling to `h`×`w`.
pub fn load_and_resize(path: &Path, h: usize, w: usize) -> Result<Tensor<f32>> {
    Ok(resize_nearest(&load_image(path)?, h, w)?)
}

/// A scanned dataset; sample paths are relative to `root` with `/` separators.
#[derive(Debug, Clone)]
pub struct ScannedDataset {
    pub root: PathBuf,
    pub index: DatasetIndex,
    /// Number of leading samples that form the provided training list of a
    /// fixed split; equals the sample count for a plain layout.
    pub n_train: usize,
    /// Files that were left out, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in stdfs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        out.push(entry.path());
    }
    out.sort();
    Ok(out)
}

fn class_dirs(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for p in sorted_entries(dir)? {
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if p.is_dir() && !name.starts_with('.') {
            names.push(name);
        }
    }
    if names.len() < 2 {
        return Err(Error::Usage(format!("{}: need at least 2 class directories, found {}", dir.display(), names.len())));
    }
    Ok(names)
}

fn collect(root: &Path, prefix: &str, classes: &[String], samples: &mut Vec<Sample>, skipped: &mut Vec<(PathBuf, String)>) -> Result<()> {
    for (c, class) in classes.iter().enumerate() {
        let dir = root.join(prefix).join(class);
        let before = samples.len();
        for p in sorted_entries(&dir)? {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            if p.is_dir() || name.starts_with('.') {
                continue;
            }
            let known = p.extension().is_some_and(|e| EXTENSIONS.iter().any(|x| e.eq_ignore_ascii_case(x)));
            if !known {
                skipped.push((p, "unsupported extension".into()));
                continue;
            }
            if let Err(e) = load_image(&p) {
                skipped.push((p, e.to_string()));
                continue;
            }
            let rel = if prefix.is_empty() { format!("{}/{}", class, name) } else { format!("{}/{}/{}", prefix, class, name) };
            samples.push(Sample { path: rel, class_id: c });
        }
        if samples.len() == before {
            return Err(Error::Usage(format!("{}: class `{}` has no readable images", dir.display(), class)));
        }
    }
    Ok(())
}

/// Scans `<root>/<class>/<file>`: classes are the sorted directory names and
/// files are taken in sorted order. Every candidate file is decoded once;
/// unreadable ones are skipped and reported.
pub fn scan_dataset(root: &Path) -> Result<ScannedDataset> {
    let classes = class_dirs(root)?;
    let (mut samples, mut skipped) = (Vec::new(), Vec::new());
    collect(root, "", &classes, &mut samples, &mut skipped)?;
    let n = samples.len();
    let index = DatasetIndex::new(classes, samples)?;
    Ok(ScannedDataset { root: root.to_path_buf(), index, n_train: n, skipped })
}

/// Scans `<root>/train/<class>` and `<root>/test/<class>`, which must name
/// the same classes. Training samples come first.
pub fn scan_fixed_split(root: &Path) -> Result<ScannedDataset> {
    let classes = class_dirs(&root.join("train"))?;
    let test_classes = class_dirs(&root.join("test"))?;
    if classes != test_classes {
        return Err(Error::Usage(format!("train classes {:?} differ from test classes {:?}", classes, test_classes)));
    }
    let (mut samples, mut skipped) = (Vec::new(), Vec::new());
    collect(root, "train", &classes, &mut samples, &mut skipped)?;
    let n_train = samples.len();
    collect(root, "test", &classes, &mut samples, &mut skipped)?;
    let index = DatasetIndex::new(classes, samples)?;
    Ok(ScannedDataset { root: root.to_path_buf(), index, n_train, skipped })
}

/// Loads samples of a scanned dataset from disk at a fixed input size,
/// optionally holding every decoded image in memory.
#[derive(Debug, Clone)]
pub struct DiskSource {
    root: PathBuf,
    index: DatasetIndex,
    h: usize,
    w: usize,
    cache: Option<Vec<Tensor<f32>>>,
}

impl DiskSource {
    pub fn new(data: &ScannedDataset, h: usize, w: usize) -> Self {
        DiskSource { root: data.root.clone(), index: data.index.clone(), h, w, cache: None }
    }

    /// Decodes every sample up front.
    pub fn preload(mut self) -> Result<Self> {
        let images = (0..self.index.len()).map(|id| self.read(id)).collect::<Result<Vec<_>>>()?;
        self.cache = Some(images);
        Ok(self)
    }

    pub fn index(&self) -> &DatasetIndex {
        &self.index
    }

    fn read(&self, id: usize) -> Result<Tensor<f32>> {
        let sample = self
            .index
            .samples()
            .get(id)
            .ok_or_else(|| Error::Usage(format!("sample {} outside the dataset", id)))?;
        load_and_resize(&self.root.join(&sample.path), self.h, self.w)
    }
}

impl SampleSource<f32> for DiskSource {
    fn load(&self, id: usize) -> cvrnet_core::Result<Tensor<f32>> {
        if let Some(img) = self.cache.as_ref().and_then(|c| c.get(id)) {
            return Ok(img.clone());
        }
        self.read(id).map_err(|e| cvrnet_core::Error::Dataset(e.to_string()))
    }

    fn label(&self, id: usize) -> cvrnet_core::Result<usize> {
        self.index
            .samples()
            .get(id)
            .map(|s| s.class_id)
            .ok_or_else(|| cvrnet_core::Error::Dataset(format!("sample {} outside the dataset", id)))
    }

    fn num_classes(&self) -> usize {
        self.index.num_classes()
    }
}

/// Writes a `MemorySource`-style image list as `<root>/<class>/<nnnn>.pgm`
/// (or `.ppm` for colour), quantized to 8 bits.
pub fn write_image_folder(root: &Path, class_names: &[String], images: &[Tensor<f32>], labels: &[usize], channels: usize) -> Result<Vec<PathBuf>> {
    let ext = if channels == 1 { "pgm" } else { "ppm" };
    let mut written = Vec::with_capacity(images.len());
    for (i, (img, &label)) in images.iter().zip(labels).enumerate() {
        let dir = root.join(&class_names[label]);
        fs::create_dir(&dir)?;
        let (h, w, raster) = pnm::quantize(img, channels);
        let path = dir.join(format!("{:05}.{}", i, ext));
        fs::write_atomic(&path, &pnm::encode(w, h, channels, &raster))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_roundtrip_and_gray_replication() {
        let gray = Tensor::new(&[1, 1, 2, 1], vec![0.25f32, 1.0]).unwrap();
        let back = decode_sidecar(&encode_sidecar(&gray)).unwrap();
        assert_eq!(back.shape(), &[1, 1, 2, 3]);
        assert_eq!(back.data(), &[0.25, 0.25, 0.25, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn sidecar_rejects_out_of_range() {
        let bad = Tensor::new(&[1, 1, 1, 1], vec![1.5f32]).unwrap();
        assert!(decode_sidecar(&encode_sidecar(&bad)).is_err());
    }
}
