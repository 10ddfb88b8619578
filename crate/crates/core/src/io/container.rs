use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::csc::ConvDictionary;
use crate::cube::{Image2D, SpectralCube};
use crate::error::{Error, Result};
use crate::forward::{build_system, SystemMasks};

pub const MAGIC: &str = "SPECREC1";
const DTYPE: &str = "f32";
const LAYOUT: &str = "band-major";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Cube,
    Image,
    Mask,
    Dict,
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Kind::Cube => "cube",
            Kind::Image => "image",
            Kind::Mask => "mask",
            Kind::Dict => "dict",
        };
        f.write_str(s)
    }
}

/// First line of a container file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub magic: String,
    pub kind: Kind,
    pub width: usize,
    pub height: usize,
    pub bands_or_kernels: usize,
    pub dtype: String,
    pub layout: String,
}

impl Header {
    pub fn new(kind: Kind, width: usize, height: usize, bands_or_kernels: usize) -> Self {
        Self {
            magic: MAGIC.into(),
            kind,
            width,
            height,
            bands_or_kernels,
            dtype: DTYPE.into(),
            layout: LAYOUT.into(),
        }
    }

    /// Number of stored values, or `None` on overflow.
    pub fn value_count(&self) -> Option<usize> {
        self.width
            .checked_mul(self.height)?
            .checked_mul(self.bands_or_kernels)
    }
}

/// A JSON header line followed by little-endian `f32` values.
#[derive(Clone, Debug, PartialEq)]
pub struct RawContainer {
    pub header: Header,
    pub payload: Vec<f32>,
}

impl RawContainer {
    /// Converts `values` to single precision. Values that do not fit are
    /// rejected rather than stored as infinities.
    pub fn from_f64(kind: Kind, width: usize, height: usize, depth: usize, values: &[f64]) -> Result<Self> {
        let header = Header::new(kind, width, height, depth);
        if header.value_count() != Some(values.len()) {
            return Err(Error::Shape(format!(
                "{kind} {width}x{height}x{depth} cannot hold {} values",
                values.len()
            )));
        }
        let payload: Vec<f32> = values.iter().map(|&v| v as f32).collect();
        if let Some(i) = payload.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "value {} at index {i} is not representable as f32",
                values[i]
            )));
        }
        Ok(Self { header, payload })
    }

    pub fn values_f64(&self) -> Vec<f64> {
        self.payload.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(&self.header).expect("header serializes");
        out.push(b'\n');
        out.reserve(self.payload.len() * 4);
        for v in &self.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format(bytes.len(), format!("no header line; expected a {MAGIC} container")))?;
        let line = &bytes[..newline];
        let header: Header = serde_json::from_slice(line).map_err(|e| {
            Error::format(e.column().saturating_sub(1), format!("unreadable header, expected a {MAGIC} container: {e}"))
        })?;
        if header.magic != MAGIC {
            return Err(Error::format(0, format!("bad magic {:?}, expected \"{MAGIC}\"", header.magic)));
        }
        if header.dtype != DTYPE {
            return Err(Error::format(0, format!("dtype {:?} unsupported, expected \"{DTYPE}\"", header.dtype)));
        }
        if header.layout != LAYOUT {
            return Err(Error::format(0, format!("layout {:?} unsupported, expected \"{LAYOUT}\"", header.layout)));
        }
        let start = newline + 1;
        let needed = header
            .value_count()
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| {
                Error::format(
                    0,
                    format!(
                        "dimensions {}x{}x{} overflow",
                        header.width, header.height, header.bands_or_kernels
                    ),
                )
            })?;
        let found = bytes.len() - start;
        if found < needed {
            return Err(Error::format(
                bytes.len(),
                format!("payload truncated: needs {needed} bytes, found {found}"),
            ));
        }
        if found > needed {
            return Err(Error::format(
                start + needed,
                format!("{} trailing bytes after a {needed}-byte payload", found - needed),
            ));
        }
        let payload = bytes[start..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self { header, payload })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Format { offset, message } => {
                Error::format(offset, format!("{}: {message}", path.display()))
            }
            other => other,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    fn expect_kind(&self, kind: Kind) -> Result<()> {
        if self.header.kind != kind {
            return Err(Error::format(
                0,
                format!("container holds a {}, expected a {kind}", self.header.kind),
            ));
        }
        Ok(())
    }
}

pub fn cube_container(cube: &SpectralCube) -> Result<RawContainer> {
    RawContainer::from_f64(Kind::Cube, cube.width(), cube.height(), cube.bands(), cube.data())
}

pub fn cube_from_container(c: &RawContainer) -> Result<SpectralCube> {
    c.expect_kind(Kind::Cube)?;
    let h = &c.header;
    SpectralCube::new(h.width, h.height, h.bands_or_kernels, c.values_f64())
}

pub fn save_cube(cube: &SpectralCube, path: impl AsRef<Path>) -> Result<()> {
    cube_container(cube)?.write(path)
}

pub fn load_cube(path: impl AsRef<Path>) -> Result<SpectralCube> {
    cube_from_container(&RawContainer::read(path)?)
}

/// Saves a single plane, e.g. a measurement.
pub fn save_image(image: &Image2D, path: impl AsRef<Path>) -> Result<()> {
    RawContainer::from_f64(Kind::Image, image.width(), image.height(), 1, image.data())?.write(path)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image2D> {
    let c = RawContainer::read(path)?;
    c.expect_kind(Kind::Image)?;
    let h = &c.header;
    if h.bands_or_kernels != 1 {
        return Err(Error::format(0, format!("image container has {} planes, expected 1", h.bands_or_kernels)));
    }
    Image2D::new(h.width, h.height, c.values_f64())
}

/// Contents of a mask container: a single coded aperture, or one plane per
/// band when the system is stored in full.
#[derive(Clone, Debug, PartialEq)]
pub enum MaskFile {
    Base(Image2D),
    System(SystemMasks),
}

impl MaskFile {
    /// The per-band system. A base mask is sheared by `shear_step` per band;
    /// a stored system must already have `bands` planes.
    pub fn into_system(self, bands: usize, shear_step: i64) -> Result<SystemMasks> {
        match self {
            MaskFile::Base(mask) => build_system(&mask, bands, shear_step),
            MaskFile::System(s) if s.bands() == bands => Ok(s),
            MaskFile::System(s) => Err(Error::Shape(format!(
                "mask file has {} band planes, cube has {bands} bands",
                s.bands()
            ))),
        }
    }
}

pub fn save_mask(mask: &Image2D, path: impl AsRef<Path>) -> Result<()> {
    RawContainer::from_f64(Kind::Mask, mask.width(), mask.height(), 1, mask.data())?.write(path)
}

pub fn save_system(system: &SystemMasks, path: impl AsRef<Path>) -> Result<()> {
    RawContainer::from_f64(Kind::Mask, system.width(), system.height(), system.bands(), system.data())?.write(path)
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<MaskFile> {
    let c = RawContainer::read(path)?;
    c.expect_kind(Kind::Mask)?;
    let h = &c.header;
    let values = c.values_f64();
    if h.bands_or_kernels == 1 {
        let mask = Image2D::new(h.width, h.height, values)?;
        if mask.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Data("mask weights must lie in [0, 1]".into()));
        }
        Ok(MaskFile::Base(mask))
    } else {
        Ok(MaskFile::System(SystemMasks::new(h.width, h.height, h.bands_or_kernels, values)?))
    }
}

pub fn save_dictionary(dict: &ConvDictionary, path: impl AsRef<Path>) -> Result<()> {
    let k = dict.kernel_size();
    RawContainer::from_f64(Kind::Dict, k, k, dict.num_kernels(), dict.kernels())?.write(path)
}

pub fn dictionary_from_container(c: &RawContainer) -> Result<ConvDictionary> {
    c.expect_kind(Kind::Dict)?;
    let h = &c.header;
    if h.width != h.height {
        return Err(Error::format(
            0,
            format!("dictionary kernels must be square, got {}x{}", h.width, h.height),
        ));
    }
    ConvDictionary::new(h.width, h.bands_or_kernels, c.values_f64())
}

/// Loads a dictionary; kernels are renormalized to unit norm.
pub fn load_dictionary(path: impl AsRef<Path>) -> Result<ConvDictionary> {
    dictionary_from_container(&RawContainer::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_line_is_plain_json() {
        let c = RawContainer::from_f64(Kind::Cube, 2, 1, 1, &[0.5, -1.0]).unwrap();
        let bytes = c.to_bytes();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(
            std::str::from_utf8(&bytes[..nl]).unwrap(),
            r#"{"magic":"SPECREC1","kind":"cube","width":2,"height":1,"bands_or_kernels":1,"dtype":"f32","layout":"band-major"}"#
        );
        assert_eq!(&bytes[nl + 1..nl + 5], &0.5f32.to_le_bytes());
        assert_eq!(RawContainer::from_bytes(&bytes).unwrap(), c);
    }

    #[test]
    fn truncated_payload_reports_sizes() {
        let header = serde_json::to_vec(&Header::new(Kind::Cube, 4, 4, 2)).unwrap();
        let mut bytes = header.clone();
        bytes.push(b'\n');
        bytes.extend(std::iter::repeat(0u8).take(100));
        let err = RawContainer::from_bytes(&bytes).unwrap_err().to_string();
        assert!(err.contains("needs 128 bytes, found 100"), "{err}");
        assert!(err.contains(&format!("byte {}", header.len() + 101)), "{err}");
    }

    #[test]
    fn bad_magic_names_expected() {
        let c = RawContainer::from_f64(Kind::Image, 1, 1, 1, &[1.0]).unwrap();
        let bytes = c.to_bytes();
        let text = String::from_utf8_lossy(&bytes).replace("SPECREC1", "SPECREC9");
        let err = RawContainer::from_bytes(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("\"SPECREC1\""), "{err}");
        let err = RawContainer::from_bytes(b"garbage\n").unwrap_err().to_string();
        assert!(err.contains("SPECREC1"), "{err}");
        assert!(RawContainer::from_bytes(b"no newline").is_err());
    }

    #[test]
    fn overflow_and_trailing_bytes() {
        let mut h = Header::new(Kind::Cube, usize::MAX, 2, 1);
        let mut bytes = serde_json::to_vec(&h).unwrap();
        bytes.push(b'\n');
        assert!(RawContainer::from_bytes(&bytes).unwrap_err().to_string().contains("overflow"));

        h = Header::new(Kind::Cube, 1, 1, 1);
        bytes = serde_json::to_vec(&h).unwrap();
        bytes.push(b'\n');
        bytes.extend([0u8; 5]);
        assert!(RawContainer::from_bytes(&bytes).unwrap_err().to_string().contains("trailing"));
    }

    #[test]
    fn unrepresentable_values_rejected() {
        assert!(matches!(
            RawContainer::from_f64(Kind::Image, 1, 1, 1, &[1e300]),
            Err(Error::Data(_))
        ));
        assert!(RawContainer::from_f64(Kind::Image, 2, 1, 1, &[1.0]).is_err());
    }

    #[test]
    fn kind_is_checked() {
        let c = RawContainer::from_f64(Kind::Image, 1, 1, 1, &[1.0]).unwrap();
        assert!(cube_from_container(&c).is_err());
        assert!(dictionary_from_container(&c).is_err());
    }

    #[test]
    fn dictionary_must_be_square_and_nonzero() {
        let c = RawContainer::from_f64(Kind::Dict, 2, 3, 1, &[1.0; 6]).unwrap();
        assert!(matches!(dictionary_from_container(&c), Err(Error::Format { .. })));
        let c = RawContainer::from_f64(Kind::Dict, 2, 2, 1, &[0.0; 4]).unwrap();
        assert!(dictionary_from_container(&c).is_err());
        let c = RawContainer::from_f64(Kind::Dict, 2, 2, 1, &[3.0, 0.0, 0.0, 4.0]).unwrap();
        assert_eq!(dictionary_from_container(&c).unwrap().kernel(0), &[0.6, 0.0, 0.0, 0.8]);
    }

    #[test]
    fn mask_file_variants() {
        let base = Image2D::from_fn(3, 2, |x, _| (x % 2) as f64);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.srec");
        save_mask(&base, &p).unwrap();
        let sys = load_mask(&p).unwrap().into_system(2, 1).unwrap();
        assert_eq!(sys, build_system(&base, 2, 1).unwrap());
        save_system(&sys, &p).unwrap();
        assert_eq!(load_mask(&p).unwrap(), MaskFile::System(sys.clone()));
        assert!(load_mask(&p).unwrap().into_system(3, 1).is_err());
    }
}
