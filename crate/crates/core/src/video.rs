//! Stereo video sequences and the on-disk manifest that lists their frames.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{read_pfm_file, write_pfm_file, FloatRaster};

#[derive(Debug, Clone, PartialEq)]
pub struct StereoFrame {
    pub left: FloatRaster,
    pub right: FloatRaster,
}

/// `T` rectified stereo pairs sharing one resolution, optionally with
/// ground-truth disparity for the left view.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoVideoSequence {
    frames: Vec<StereoFrame>,
    gt_disparity: Option<Vec<FloatRaster>>,
}

impl StereoVideoSequence {
    pub fn new(frames: Vec<StereoFrame>, gt_disparity: Option<Vec<FloatRaster>>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Shape("a sequence needs at least one frame".into()))?;
        let (w, h) = (first.left.width(), first.left.height());
        let same = |r: &FloatRaster| r.width() == w && r.height() == h;
        for (t, f) in frames.iter().enumerate() {
            if !same(&f.left) || !same(&f.right) || !f.left.same_shape(&f.right) {
                return Err(Error::Shape(format!(
                    "frame {t} does not match the {w}x{h} sequence resolution"
                )));
            }
        }
        if let Some(gt) = &gt_disparity {
            if gt.len() != frames.len() {
                return Err(Error::Shape(format!(
                    "{} ground-truth rasters for {} frames",
                    gt.len(),
                    frames.len()
                )));
            }
            if let Some(t) = gt.iter().position(|g| !same(g) || g.channels() != 1) {
                return Err(Error::Shape(format!(
                    "ground truth {t} is not a {w}x{h} single-channel raster"
                )));
            }
        }
        Ok(Self { frames, gt_disparity })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].left.width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].left.height()
    }

    pub fn frames(&self) -> &[StereoFrame] {
        &self.frames
    }

    pub fn gt_disparity(&self) -> Option<&[FloatRaster]> {
        self.gt_disparity.as_deref()
    }

    /// The first `n` frames (all of them if `n` exceeds the length).
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let n = n.min(self.len());
        Self::new(
            self.frames[..n].to_vec(),
            self.gt_disparity.as_ref().map(|g| g[..n].to_vec()),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub left: PathBuf,
    pub right: PathBuf,
    pub gt: Option<PathBuf>,
}

/// `{"frames":[{"left":..,"right":..,"gt":..|null}],"width":W,"height":H}`.
///
/// Relative paths are resolved against the manifest's own directory. The
/// generator additionally records which frames it corrupted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub frames: Vec<ManifestFrame>,
    pub width: usize,
    pub height: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub corrupted: Vec<usize>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::from(e).context(path.display().to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Reads every raster the manifest lists. `base` is the directory
    /// relative paths are resolved against.
    pub fn load_sequence(&self, base: &Path) -> Result<StereoVideoSequence> {
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let mut frames = Vec::with_capacity(self.frames.len());
        let mut gts = Vec::new();
        let with_gt = self.frames.iter().all(|f| f.gt.is_some());
        for f in &self.frames {
            frames.push(StereoFrame {
                left: read_pfm_file(resolve(&f.left))?,
                right: read_pfm_file(resolve(&f.right))?,
            });
            if with_gt {
                gts.push(read_pfm_file(resolve(f.gt.as_ref().expect("checked above")))?);
            }
        }
        let seq = StereoVideoSequence::new(frames, with_gt.then_some(gts))?;
        if seq.width() != self.width || seq.height() != self.height {
            return Err(Error::Shape(format!(
                "manifest declares {}x{} but frames are {}x{}",
                self.width,
                self.height,
                seq.width(),
                seq.height()
            )));
        }
        Ok(seq)
    }
}

/// Loads a manifest and its sequence in one step.
pub fn load_manifest_sequence(path: impl AsRef<Path>) -> Result<(Manifest, StereoVideoSequence)> {
    let path = path.as_ref();
    let manifest = Manifest::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let seq = manifest.load_sequence(base)?;
    Ok((manifest, seq))
}

/// Writes `left_NNNN.pfm`, `right_NNNN.pfm` (and `gt_NNNN.pfm`) into `dir`
/// plus `manifest.json`, returning the manifest.
pub fn write_sequence(dir: &Path, seq: &StereoVideoSequence, corrupted: &[usize]) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut frames = Vec::with_capacity(seq.len());
    for (t, f) in seq.frames().iter().enumerate() {
        let left = PathBuf::from(format!("left_{t:04}.pfm"));
        let right = PathBuf::from(format!("right_{t:04}.pfm"));
        write_pfm_file(dir.join(&left), &f.left)?;
        write_pfm_file(dir.join(&right), &f.right)?;
        let gt = match seq.gt_disparity() {
            Some(gt) => {
                let p = PathBuf::from(format!("gt_{t:04}.pfm"));
                write_pfm_file(dir.join(&p), &gt[t])?;
                Some(p)
            }
            None => None,
        };
        frames.push(ManifestFrame { left, right, gt });
    }
    let manifest = Manifest {
        frames,
        width: seq.width(),
        height: seq.height(),
        corrupted: corrupted.to_vec(),
    };
    manifest.save(dir.join("manifest.json"))?;
    Ok(manifest)
}
