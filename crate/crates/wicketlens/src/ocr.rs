//! Text recognition boundary: a hermetic template-matching digit reader
//! for the fixture font, plus an adapter that shells out to an external
//! OCR engine for production footage.
//!
//! The matcher expects dark glyphs on a light field, which is what the
//! scorecard preprocessing chain produces (white broadcast text becomes
//! dark after inversion).

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Alphabet of the fixture font.
pub const FONT_CHARS: [char; 12] = ['0', '1', '2', '3', '4', '5', '6', '7', '8', '9', '-', '/'];

pub const GLYPH_W: usize = 5;
pub const GLYPH_H: usize = 7;

/// One recognized glyph with its template-match confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharMatch {
    pub glyph: char,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrResult {
    pub text: String,
    pub mean_confidence: f64,
    pub per_char: Vec<CharMatch>,
}

impl OcrResult {
    pub fn empty() -> Self {
        Self {
            text: String::new(),
            mean_confidence: 0.0,
            per_char: Vec::new(),
        }
    }

    fn from_matches(matches: Vec<(CharMatch, bool)>) -> Self {
        let mut text = String::new();
        let mut per_char = Vec::new();
        for (m, space_before) in matches {
            if space_before && !text.is_empty() {
                text.push(' ');
            }
            text.push(m.glyph);
            per_char.push(m);
        }
        let mean_confidence = if per_char.is_empty() {
            0.0
        } else {
            per_char.iter().map(|m| m.confidence).sum::<f64>() / per_char.len() as f64
        };
        Self {
            text,
            mean_confidence,
            per_char,
        }
    }
}

/// 5x7 binary bitmaps for the score alphabet.
#[derive(Debug, Clone)]
pub struct GlyphFont {
    glyphs: BTreeMap<char, [u8; GLYPH_W * GLYPH_H]>,
}

impl Default for GlyphFont {
    fn default() -> Self {
        Self::builtin()
    }
}

impl GlyphFont {
    pub fn builtin() -> Self {
        let rows: [(char, [&str; GLYPH_H]); 12] = [
            ('0', ["01110", "10001", "10011", "10101", "11001", "10001", "01110"]),
            ('1', ["00100", "01100", "00100", "00100", "00100", "00100", "11111"]),
            ('2', ["01110", "10001", "00001", "00010", "00100", "01000", "11111"]),
            ('3', ["11111", "00010", "00100", "00010", "00001", "10001", "01110"]),
            ('4', ["00010", "00110", "01010", "10010", "11111", "00010", "00010"]),
            ('5', ["11111", "10000", "11110", "00001", "00001", "10001", "01110"]),
            ('6', ["00110", "01000", "10000", "11110", "10001", "10001", "01110"]),
            ('7', ["11111", "00001", "00010", "00100", "01000", "01000", "01000"]),
            ('8', ["01110", "10001", "10001", "01110", "10001", "10001", "01110"]),
            ('9', ["01110", "10001", "10001", "01111", "00001", "00010", "01100"]),
            ('-', ["00000", "00000", "00000", "11111", "00000", "00000", "00000"]),
            ('/', ["00001", "00001", "00010", "00100", "01000", "10000", "10000"]),
        ];
        let mut glyphs = BTreeMap::new();
        for (ch, pattern) in rows {
            let mut bits = [0u8; GLYPH_W * GLYPH_H];
            for (y, row) in pattern.iter().enumerate() {
                for (x, b) in row.bytes().enumerate() {
                    bits[y * GLYPH_W + x] = (b == b'1') as u8;
                }
            }
            glyphs.insert(ch, bits);
        }
        Self { glyphs }
    }

    pub fn bitmap(&self, ch: char) -> Option<&[u8; GLYPH_W * GLYPH_H]> {
        self.glyphs.get(&ch)
    }

    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.glyphs.keys().copied()
    }

    /// Pixel width of `text` rendered at `scale` (1-cell gaps between
    /// glyphs, spaces are 3 cells wide).
    pub fn text_width(&self, text: &str, scale: usize) -> usize {
        let mut w = 0;
        let mut first = true;
        for ch in text.chars() {
            if !first {
                w += scale; // inter-glyph gap
            }
            first = false;
            w += if ch == ' ' { 3 * scale } else { GLYPH_W * scale };
        }
        w
    }

    pub fn text_height(&self, scale: usize) -> usize {
        GLYPH_H * scale
    }

    /// Renders `text` as ink-255 on background-0 (white on black).
    pub fn render_text(&self, text: &str, scale: usize) -> Result<RasterImage> {
        if scale == 0 {
            return Err(Error::InvalidParameter("glyph scale must be >= 1".into()));
        }
        let w = self.text_width(text, scale).max(1);
        let h = self.text_height(scale);
        let mut img = RasterImage::filled(w, h, 1, 0)?;
        self.blit_text(&mut img, text, 0, 0, scale, 255)?;
        Ok(img)
    }

    /// Draws `text` into an existing image at (x0, y0); every channel of
    /// an ink pixel is set to `ink`.
    pub fn blit_text(
        &self,
        img: &mut RasterImage,
        text: &str,
        x0: usize,
        y0: usize,
        scale: usize,
        ink: u8,
    ) -> Result<()> {
        if scale == 0 {
            return Err(Error::InvalidParameter("glyph scale must be >= 1".into()));
        }
        let needed_w = self.text_width(text, scale);
        let needed_h = self.text_height(scale);
        if x0 + needed_w > img.width() || y0 + needed_h > img.height() {
            return Err(Error::Layout(format!(
                "text '{text}' at scale {scale} needs {needed_w}x{needed_h} at ({x0},{y0}), image is {}x{}",
                img.width(),
                img.height()
            )));
        }
        let mut x = x0;
        let mut first = true;
        for ch in text.chars() {
            if !first {
                x += scale;
            }
            first = false;
            if ch == ' ' {
                x += 3 * scale;
                continue;
            }
            let bits = self
                .glyphs
                .get(&ch)
                .ok_or_else(|| Error::Layout(format!("glyph '{ch}' not in font")))?;
            for gy in 0..GLYPH_H {
                for gx in 0..GLYPH_W {
                    if bits[gy * GLYPH_W + gx] == 1 {
                        for py in 0..scale {
                            for px in 0..scale {
                                for c in 0..img.channels() {
                                    img.set(x + gx * scale + px, y0 + gy * scale + py, c, ink);
                                }
                            }
                        }
                    }
                }
            }
            x += GLYPH_W * scale;
        }
        Ok(())
    }
}

/// Tunables of the template matcher.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatcherParams {
    /// Samples below this value count as ink (dark-on-light input).
    pub binarize_threshold: u8,
    /// Minimum match fraction for a cell to emit a glyph.
    pub accept_threshold: f64,
}

impl Default for MatcherParams {
    fn default() -> Self {
        Self {
            binarize_threshold: 128,
            accept_threshold: 0.85,
        }
    }
}

/// OCR engine selection for `recognize`.
#[derive(Debug, Clone, PartialEq)]
pub enum OcrEngineConfig {
    Builtin(MatcherParams),
    /// Command template with an `{input}` placeholder for a temporary
    /// PGM path; must print the recognized text to stdout and exit 0.
    External { command: String },
}

impl Default for OcrEngineConfig {
    fn default() -> Self {
        OcrEngineConfig::Builtin(MatcherParams::default())
    }
}

/// Runs OCR on a preprocessed single-channel image.
pub fn recognize(img: &RasterImage, engine: &OcrEngineConfig) -> Result<OcrResult> {
    if img.channels() != 1 {
        return Err(Error::InvalidInput(
            "recognize expects a single-channel image".into(),
        ));
    }
    match engine {
        OcrEngineConfig::Builtin(params) => {
            Ok(match_templates_with(img, &GlyphFont::builtin(), params))
        }
        OcrEngineConfig::External { command } => recognize_external(img, command),
    }
}

/// Template matching with default parameters.
pub fn match_templates(img: &RasterImage, font: &GlyphFont) -> OcrResult {
    match_templates_with(img, font, &MatcherParams::default())
}

/// Segments ink column runs left to right, rescales each cell to the
/// 5x7 glyph grid and picks the best-matching template per cell.
pub fn match_templates_with(
    img: &RasterImage,
    font: &GlyphFont,
    params: &MatcherParams,
) -> OcrResult {
    let (w, h) = (img.width(), img.height());
    let is_ink = |x: usize, y: usize| img.at(x, y, 0) < params.binarize_threshold;

    let ink_total: usize = (0..h)
        .map(|y| (0..w).filter(|&x| is_ink(x, y)).count())
        .sum();
    if ink_total == 0 || ink_total * 10 >= w * h * 9 {
        // blank frame, or solid ink with no glyph structure
        return OcrResult::empty();
    }

    // column runs with any ink
    let col_has_ink: Vec<bool> = (0..w)
        .map(|x| (0..h).any(|y| is_ink(x, y)))
        .collect();
    let mut cells: Vec<(usize, usize)> = Vec::new(); // [start, end)
    let mut x = 0;
    while x < w {
        if col_has_ink[x] {
            let start = x;
            while x < w && col_has_ink[x] {
                x += 1;
            }
            cells.push((start, x));
        } else {
            x += 1;
        }
    }
    if cells.is_empty() {
        return OcrResult::empty();
    }

    // cell width is 5 scaled columns; the median width estimates scale
    let mut widths: Vec<usize> = cells.iter().map(|(a, b)| b - a).collect();
    widths.sort_unstable();
    let scale = (widths[widths.len() / 2] as f64 / GLYPH_W as f64)
        .round()
        .max(1.0) as usize;

    let normalized_templates: Vec<(char, [u8; GLYPH_W * GLYPH_H])> = font
        .chars()
        .map(|ch| (ch, normalize_template(font.bitmap(ch).unwrap())))
        .collect();

    let mut matches = Vec::new();
    let mut prev_end: Option<usize> = None;
    for &(x0, x1) in &cells {
        // tight row extent within the column run
        let rows: Vec<usize> = (0..h)
            .filter(|&y| (x0..x1).any(|x| is_ink(x, y)))
            .collect();
        let (y0, y1) = (rows[0], rows[rows.len() - 1] + 1);
        let grid = resample_to_grid(img, params.binarize_threshold, x0, x1, y0, y1);

        let mut best: Option<CharMatch> = None;
        for (ch, tpl) in &normalized_templates {
            let matching = grid
                .iter()
                .zip(tpl.iter())
                .filter(|(a, b)| a == b)
                .count();
            let score = matching as f64 / (GLYPH_W * GLYPH_H) as f64;
            if best.as_ref().map_or(true, |b| score > b.confidence) {
                best = Some(CharMatch {
                    glyph: *ch,
                    confidence: score,
                });
            }
        }
        let best = best.unwrap();
        if best.confidence >= params.accept_threshold {
            let space_before = prev_end.is_some_and(|pe| x0 - pe >= 3 * scale);
            matches.push((best, space_before));
            prev_end = Some(x1);
        }
    }
    OcrResult::from_matches(matches)
}

/// Majority-binarized resample of the cell's tight bounding box onto the
/// 5x7 grid.
fn resample_to_grid(
    img: &RasterImage,
    threshold: u8,
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
) -> [u8; GLYPH_W * GLYPH_H] {
    let (w, h) = (x1 - x0, y1 - y0);
    let mut grid = [0u8; GLYPH_W * GLYPH_H];
    for gy in 0..GLYPH_H {
        let (ry0, ry1) = block_range(gy, GLYPH_H, h);
        for gx in 0..GLYPH_W {
            let (rx0, rx1) = block_range(gx, GLYPH_W, w);
            let mut ink = 0usize;
            let mut total = 0usize;
            for y in ry0..ry1 {
                for x in rx0..rx1 {
                    total += 1;
                    if img.at(x0 + x, y0 + y, 0) < threshold {
                        ink += 1;
                    }
                }
            }
            grid[gy * GLYPH_W + gx] = (ink * 2 >= total.max(1)) as u8;
        }
    }
    grid
}

/// Templates are compared after the same tight-bbox normalization as
/// cells, so partial-height glyphs like '-' line up with their renders.
fn normalize_template(bits: &[u8; GLYPH_W * GLYPH_H]) -> [u8; GLYPH_W * GLYPH_H] {
    let cols: Vec<usize> = (0..GLYPH_W)
        .filter(|&x| (0..GLYPH_H).any(|y| bits[y * GLYPH_W + x] == 1))
        .collect();
    let rows: Vec<usize> = (0..GLYPH_H)
        .filter(|&y| (0..GLYPH_W).any(|x| bits[y * GLYPH_W + x] == 1))
        .collect();
    let (x0, x1) = (cols[0], cols[cols.len() - 1] + 1);
    let (y0, y1) = (rows[0], rows[rows.len() - 1] + 1);
    let (w, h) = (x1 - x0, y1 - y0);
    let mut grid = [0u8; GLYPH_W * GLYPH_H];
    for gy in 0..GLYPH_H {
        let (ry0, ry1) = block_range(gy, GLYPH_H, h);
        for gx in 0..GLYPH_W {
            let (rx0, rx1) = block_range(gx, GLYPH_W, w);
            let mut ink = 0usize;
            let mut total = 0usize;
            for y in ry0..ry1 {
                for x in rx0..rx1 {
                    total += 1;
                    ink += bits[(y0 + y) * GLYPH_W + x0 + x] as usize;
                }
            }
            grid[gy * GLYPH_W + gx] = (ink * 2 >= total.max(1)) as u8;
        }
    }
    grid
}

/// Source block for grid index `g` of `n`, over `len` pixels; never empty.
fn block_range(g: usize, n: usize, len: usize) -> (usize, usize) {
    let start = (g * len / n).min(len - 1);
    let end = (((g + 1) * len) / n).clamp(start + 1, len);
    (start, end)
}

const EXTERNAL_TIMEOUT: Duration = Duration::from_secs(10);

fn recognize_external(img: &RasterImage, command: &str) -> Result<OcrResult> {
    let dir = tempfile::Builder::new()
        .prefix("wicketlens-ocr")
        .tempdir()
        .map_err(|e| Error::OcrEngine(format!("tempdir: {e}")))?;
    let input = dir.path().join("frame.pgm");
    crate::pnm::write_pgm(img, &input)
        .map_err(|e| Error::OcrEngine(format!("writing {}: {e}", input.display())))?;
    let text = run_engine_command(command, &input)?;
    let text = text.trim().to_string();
    let per_char: Vec<CharMatch> = text
        .chars()
        .filter(|c| *c != ' ')
        .map(|glyph| CharMatch {
            glyph,
            confidence: 1.0,
        })
        .collect();
    let mean_confidence = if per_char.is_empty() { 0.0 } else { 1.0 };
    Ok(OcrResult {
        text,
        mean_confidence,
        per_char,
    })
}

fn run_engine_command(template: &str, input: &Path) -> Result<String> {
    let words: Vec<String> = template
        .split_whitespace()
        .map(|w| w.replace("{input}", &input.to_string_lossy()))
        .collect();
    let (program, args) = words
        .split_first()
        .ok_or_else(|| Error::OcrEngine("empty ocr command".into()))?;
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| Error::OcrEngine(format!("spawning '{program}': {e}")))?;

    let deadline = Instant::now() + EXTERNAL_TIMEOUT;
    loop {
        match child.try_wait() {
            Ok(Some(status)) => {
                let mut out = String::new();
                if let Some(mut stdout) = child.stdout.take() {
                    stdout
                        .read_to_string(&mut out)
                        .map_err(|e| Error::OcrEngine(format!("reading engine output: {e}")))?;
                }
                if !status.success() {
                    return Err(Error::OcrEngine(format!(
                        "'{program}' exited with {status}"
                    )));
                }
                return Ok(out);
            }
            Ok(None) => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(Error::OcrEngine(format!(
                        "'{program}' timed out after {}s",
                        EXTERNAL_TIMEOUT.as_secs()
                    )));
                }
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(e) => return Err(Error::OcrEngine(format!("waiting for '{program}': {e}"))),
        }
    }
}
