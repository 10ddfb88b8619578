use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use crate::cube::{Image2D, SpectralCube};
use crate::error::{Error, Result};

const MAX_SAMPLE: f64 = 65535.0;

/// Maps `[0, 1]` to 16-bit samples. Out-of-range values are clamped and
/// halves round up, so 0.5 becomes 32768.
pub fn quantize(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * MAX_SAMPLE + 0.5).floor() as u16
}

fn png_dims(width: usize, height: usize) -> Result<(u32, u32)> {
    match (u32::try_from(width), u32::try_from(height)) {
        (Ok(w), Ok(h)) => Ok((w, h)),
        _ => Err(Error::Shape(format!("{width}x{height} exceeds PNG limits"))),
    }
}

fn encode_error(path: &Path, e: png::EncodingError) -> Error {
    match e {
        png::EncodingError::IoError(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(other.to_string())),
    }
}

fn write_png16(path: &Path, width: usize, height: usize, color: png::ColorType, samples: &[u16]) -> Result<()> {
    let (w, h) = png_dims(width, height)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), w, h);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Sixteen);
    // pinned so identical inputs give identical files
    encoder.set_compression(png::Compression::Default);
    encoder.set_filter(png::FilterType::NoFilter);
    encoder.set_adaptive_filter(png::AdaptiveFilterType::NonAdaptive);
    let mut writer = encoder.write_header().map_err(|e| encode_error(path, e))?;
    let bytes: Vec<u8> = samples.iter().flat_map(|s| s.to_be_bytes()).collect();
    writer.write_image_data(&bytes).map_err(|e| encode_error(path, e))?;
    writer.finish().map_err(|e| encode_error(path, e))
}

/// Writes raw 16-bit grayscale samples, row-major.
pub fn write_gray16(path: impl AsRef<Path>, width: usize, height: usize, samples: &[u16]) -> Result<()> {
    if samples.len() != width * height {
        return Err(Error::Shape(format!(
            "{width}x{height} image needs {} samples, got {}",
            width * height,
            samples.len()
        )));
    }
    write_png16(path.as_ref(), width, height, png::ColorType::Grayscale, samples)
}

/// Reads a 16-bit grayscale PNG as `(width, height, samples)`.
pub fn read_gray16(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u16>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let bad = |msg: String| Error::format(0, format!("{}: {msg}", path.display()));
    let mut reader = decoder.read_info().map_err(|e| bad(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| bad(e.to_string()))?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(bad(format!(
            "expected 16-bit grayscale, found {:?} at {:?}",
            info.color_type, info.bit_depth
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let samples = buf[..info.buffer_size()]
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok((w, h, samples))
}

fn check_finite(data: &[f64]) -> Result<()> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("cannot export non-finite values".into()));
    }
    Ok(())
}

/// Writes `image` as 16-bit grayscale after clamping to `[0, 1]`.
pub fn export_png(image: &Image2D, path: impl AsRef<Path>) -> Result<()> {
    check_finite(image.data())?;
    let samples: Vec<u16> = image.data().iter().map(|&v| quantize(v)).collect();
    write_gray16(path, image.width(), image.height(), &samples)
}

pub fn export_band(cube: &SpectralCube, band: usize, path: impl AsRef<Path>) -> Result<()> {
    export_png(&cube.extract_band(band)?, path)
}

/// Writes bands `rgb[0]`, `rgb[1]`, `rgb[2]` as the red, green and blue
/// channels of a 16-bit PNG.
pub fn export_rgb(cube: &SpectralCube, rgb: [usize; 3], path: impl AsRef<Path>) -> Result<()> {
    for &b in &rgb {
        if b >= cube.bands() {
            return Err(Error::Index {
                index: b,
                len: cube.bands(),
            });
        }
    }
    check_finite(cube.data())?;
    let n = cube.width() * cube.height();
    let mut samples = Vec::with_capacity(3 * n);
    for p in 0..n {
        for &b in &rgb {
            samples.push(quantize(cube.band(b)[p]));
        }
    }
    write_png16(path.as_ref(), cube.width(), cube.height(), png::ColorType::Rgb, &samples)
}

fn is_png(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Loads one band per 16-bit grayscale PNG in `dir`, in lexicographic
/// filename order, scaling samples by `1 / 65535`.
pub fn load_cube_dir(dir: impl AsRef<Path>) -> Result<SpectralCube> {
    let dir = dir.as_ref();
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if is_png(&path) {
            files.push(path);
        }
    }
    files.sort();
    load_band_files(dir, &files)
}

/// Like [`load_cube_dir`] with the band order taken from `manifest`: one
/// file name per line, relative to `dir`. Blank lines and lines starting
/// with `#` are skipped.
pub fn load_cube_dir_with_manifest(dir: impl AsRef<Path>, manifest: impl AsRef<Path>) -> Result<SpectralCube> {
    let (dir, manifest) = (dir.as_ref(), manifest.as_ref());
    let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let files: Vec<PathBuf> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| dir.join(l))
        .collect();
    load_band_files(dir, &files)
}

fn load_band_files(dir: &Path, files: &[PathBuf]) -> Result<SpectralCube> {
    if files.is_empty() {
        return Err(Error::Empty(format!("no PNG bands in {}", dir.display())));
    }
    let mut dims = None;
    let mut data = Vec::new();
    for path in files {
        let (w, h, samples) = read_gray16(path)?;
        match dims {
            None => dims = Some((w, h)),
            Some(d) if d != (w, h) => {
                return Err(Error::format(
                    0,
                    format!("{} is {w}x{h}, earlier bands are {}x{}", path.display(), d.0, d.1),
                ))
            }
            Some(_) => {}
        }
        data.extend(samples.iter().map(|&s| f64::from(s) / MAX_SAMPLE));
    }
    let (w, h) = dims.expect("at least one file");
    SpectralCube::new(w, h, files.len(), data)
}
