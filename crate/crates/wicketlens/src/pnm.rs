//! Binary PGM (P5) / PPM (P6) reading and writing, maxval 255.
//!
//! Writers emit `P5\n<w> <h>\n255\n` followed by raw samples, one
//! whitespace byte after the maxval token. Readers accept arbitrary
//! whitespace and `#` comments between header tokens.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::RasterImage;

pub fn write_pgm(img: &RasterImage, path: &Path) -> Result<()> {
    write_pnm(img, path, 1, "P5")
}

pub fn write_ppm(img: &RasterImage, path: &Path) -> Result<()> {
    write_pnm(img, path, 3, "P6")
}

/// Picks PGM or PPM from the channel count.
pub fn write_auto(img: &RasterImage, path: &Path) -> Result<()> {
    match img.channels() {
        1 => write_pgm(img, path),
        _ => write_ppm(img, path),
    }
}

fn write_pnm(img: &RasterImage, path: &Path, channels: usize, magic: &str) -> Result<()> {
    if img.channels() != channels {
        return Err(Error::InvalidInput(format!(
            "{magic} requires {channels} channel(s), image has {}",
            img.channels()
        )));
    }
    let mut buf = Vec::with_capacity(img.data().len() + 32);
    write!(buf, "{magic}\n{} {}\n255\n", img.width(), img.height())?;
    buf.extend_from_slice(img.data());
    fs::write(path, buf).map_err(|e| Error::file(path, e))
}

/// Reads a P5 or P6 file; P6 sample order is kept as stored (BGR by
/// convention throughout this crate).
pub fn read_pnm(path: &Path) -> Result<RasterImage> {
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    parse_pnm(&bytes).map_err(|msg| Error::InvalidInput(format!("{}: {msg}", path.display())))
}

/// Reads PGM/PPM by extension; `.png` when the `png` feature is enabled.
pub fn read_auto(path: &Path) -> Result<RasterImage> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") | Some("ppm") => read_pnm(path),
        #[cfg(feature = "png")]
        Some("png") => read_png(path),
        Some(other) => Err(Error::InvalidInput(format!(
            "unsupported image extension '{other}': {}",
            path.display()
        ))),
        None => Err(Error::InvalidInput(format!(
            "missing image extension: {}",
            path.display()
        ))),
    }
}

fn parse_pnm(bytes: &[u8]) -> std::result::Result<RasterImage, String> {
    let mut pos = 0usize;
    let magic = next_token(bytes, &mut pos).ok_or("missing magic number")?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(format!("unsupported magic '{other}'")),
    };
    let width: usize = parse_header_int(bytes, &mut pos, "width")?;
    let height: usize = parse_header_int(bytes, &mut pos, "height")?;
    let maxval: usize = parse_header_int(bytes, &mut pos, "maxval")?;
    if maxval != 255 {
        return Err(format!("only maxval 255 supported, got {maxval}"));
    }
    // Exactly one whitespace byte separates the header from the samples.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err("missing whitespace after maxval".into());
    }
    pos += 1;
    let expected = width * height * channels;
    let data = bytes
        .get(pos..pos + expected)
        .ok_or_else(|| format!("truncated pixel data, expected {expected} bytes"))?;
    RasterImage::new(width, height, channels, data.to_vec()).map_err(|e| e.to_string())
}

fn parse_header_int(
    bytes: &[u8],
    pos: &mut usize,
    what: &str,
) -> std::result::Result<usize, String> {
    let tok = next_token(bytes, pos).ok_or_else(|| format!("missing {what}"))?;
    tok.parse().map_err(|_| format!("bad {what} '{tok}'"))
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Option<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if *pos > start {
        Some(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    } else {
        None
    }
}

#[cfg(feature = "png")]
fn read_png(path: &Path) -> Result<RasterImage> {
    let img = image::open(path)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    match img {
        image::DynamicImage::ImageLuma8(g) => {
            let (w, h) = g.dimensions();
            RasterImage::new(w as usize, h as usize, 1, g.into_raw())
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = rgb.dimensions();
            // stored RGB; swap into the crate's BGR convention
            let bgr: Vec<u8> = rgb
                .into_raw()
                .chunks_exact(3)
                .flat_map(|p| [p[2], p[1], p[0]])
                .collect();
            RasterImage::new(w as usize, h as usize, 3, bgr)
        }
    }
}
