//! File formats: the raw container, PNG import/export, and output
//! directory handling for the CLI.

mod container;
mod raster;

use std::fs;
use std::path::{Component, Path, PathBuf};

pub use container::{
    cube_container, cube_from_container, dictionary_from_container, load_cube, load_dictionary,
    load_image, load_mask, save_cube, save_dictionary, save_image, save_mask, save_system, Header,
    Kind, MaskFile, RawContainer, MAGIC,
};
pub use raster::{
    export_band, export_png, export_rgb, load_cube_dir, load_cube_dir_with_manifest, quantize,
    read_gray16, write_gray16,
};

use crate::error::{Error, Result};

/// A directory that every output of a command must land in.
#[derive(Clone, Debug)]
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    /// Creates `root` if needed.
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Resolves `name` inside the directory. Absolute names and names with
    /// `..` or other non-plain components are refused.
    pub fn file(&self, name: &str) -> Result<PathBuf> {
        let rel = Path::new(name);
        let plain = rel.components().all(|c| matches!(c, Component::Normal(_)));
        if name.is_empty() || !plain {
            return Err(Error::Parameter(format!(
                "output name {name:?} must be a plain relative path inside {}",
                self.root.display()
            )));
        }
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        Ok(path)
    }
}
