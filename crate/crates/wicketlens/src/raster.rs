//! Owned 8-bit raster images and the scorecard preprocessing kernels.
//!
//! The preprocessing chain used before OCR is
//! gray -> gamma -> invert -> dilate -> erode -> median, applied to the
//! scorecard crop. All windowed ops replicate edge pixels at the border,
//! and all arithmetic rounds half-up then clamps to `[0, 255]` so results
//! are bit-identical across platforms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major 8-bit image, 1 channel (gray) or 3 channels (BGR).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidInput(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::InvalidInput(format!(
                "data length {} does not match {width}x{height}x{channels} = {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Uniform image filled with `value`.
    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    /// Sample at (x, y, c); caller guarantees bounds.
    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: u8) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }
}

/// Scorecard region of interest in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Roi {
    pub fn validate_for(&self, img: &RasterImage) -> Result<()> {
        if self.w == 0 || self.h == 0 {
            return Err(Error::InvalidRoi(format!(
                "roi extent must be positive, got {}x{}",
                self.w, self.h
            )));
        }
        if self.x + self.w > img.width() || self.y + self.h > img.height() {
            return Err(Error::InvalidRoi(format!(
                "roi {}+{}x{}+{} exceeds image {}x{}",
                self.x,
                self.w,
                self.y,
                self.h,
                img.width(),
                img.height()
            )));
        }
        Ok(())
    }
}

/// Parameters of the scorecard preprocessing chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessParams {
    /// Power-transform exponent; 7 darkens everything but bright text.
    pub gamma: f64,
    /// Square structuring element side for dilate/erode, odd.
    pub morph_kernel: usize,
    /// Median filter window side, odd.
    pub median_kernel: usize,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self {
            gamma: 7.0,
            morph_kernel: 15,
            median_kernel: 3,
        }
    }
}

impl PreprocessParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        check_kernel(self.morph_kernel)?;
        check_kernel(self.median_kernel)?;
        Ok(())
    }
}

fn check_kernel(k: usize) -> Result<()> {
    if k == 0 || k % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "kernel size must be odd and >= 1, got {k}"
        )));
    }
    Ok(())
}

/// Round half-up, then clamp into the 8-bit sample range.
#[inline]
pub fn round_clamp_u8(x: f64) -> u8 {
    let r = (x + 0.5).floor();
    r.clamp(0.0, 255.0) as u8
}

/// BGR -> gray via 0.299 R + 0.587 G + 0.114 B.
pub fn to_grayscale(img: &RasterImage) -> Result<RasterImage> {
    if img.channels() != 3 {
        return Err(Error::InvalidInput(format!(
            "to_grayscale expects 3 channels, got {}",
            img.channels()
        )));
    }
    let mut out = Vec::with_capacity(img.width() * img.height());
    for px in img.data().chunks_exact(3) {
        let (b, g, r) = (px[0] as f64, px[1] as f64, px[2] as f64);
        out.push(round_clamp_u8(0.299 * r + 0.587 * g + 0.114 * b));
    }
    RasterImage::new(img.width(), img.height(), 1, out)
}

/// Per-pixel power transform `255 * (v/255)^gamma`.
pub fn power_transform(img: &RasterImage, gamma: f64) -> Result<RasterImage> {
    require_gray(img, "power_transform")?;
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    // 256 possible inputs; precompute the mapping once.
    let mut lut = [0u8; 256];
    for (i, slot) in lut.iter_mut().enumerate() {
        *slot = round_clamp_u8(255.0 * (i as f64 / 255.0).powf(gamma));
    }
    let data = img.data().iter().map(|&v| lut[v as usize]).collect();
    RasterImage::new(img.width(), img.height(), 1, data)
}

/// Per-pixel `255 - v`.
pub fn invert(img: &RasterImage) -> Result<RasterImage> {
    require_gray(img, "invert")?;
    let data = img.data().iter().map(|&v| 255 - v).collect();
    RasterImage::new(img.width(), img.height(), 1, data)
}

/// Max filter over a k x k window, edge-replicated.
pub fn dilate(img: &RasterImage, k: usize) -> Result<RasterImage> {
    window_filter(img, k, "dilate", |w| w.iter().copied().max().unwrap())
}

/// Min filter over a k x k window, edge-replicated.
pub fn erode(img: &RasterImage, k: usize) -> Result<RasterImage> {
    window_filter(img, k, "erode", |w| w.iter().copied().min().unwrap())
}

/// Median filter over a k x k window, edge-replicated; the median is
/// element floor(k^2 / 2) of the sorted window.
pub fn median_blur(img: &RasterImage, k: usize) -> Result<RasterImage> {
    window_filter(img, k, "median_blur", |w| {
        let mut counts = [0usize; 256];
        for &v in w.iter() {
            counts[v as usize] += 1;
        }
        let target = w.len() / 2;
        let mut seen = 0;
        for (v, &c) in counts.iter().enumerate() {
            seen += c;
            if seen > target {
                return v as u8;
            }
        }
        unreachable!("window is non-empty")
    })
}

fn window_filter(
    img: &RasterImage,
    k: usize,
    op: &str,
    f: impl Fn(&[u8]) -> u8,
) -> Result<RasterImage> {
    require_gray(img, op)?;
    check_kernel(k)?;
    if k == 1 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width() as isize, img.height() as isize);
    let r = (k / 2) as isize;
    let mut out = Vec::with_capacity(img.width() * img.height());
    let mut window = Vec::with_capacity(k * k);
    for y in 0..h {
        for x in 0..w {
            window.clear();
            for dy in -r..=r {
                let sy = (y + dy).clamp(0, h - 1) as usize;
                for dx in -r..=r {
                    let sx = (x + dx).clamp(0, w - 1) as usize;
                    window.push(img.at(sx, sy, 0));
                }
            }
            out.push(f(&window));
        }
    }
    RasterImage::new(img.width(), img.height(), 1, out)
}

/// Copy the `roi` sub-rectangle out of `img`.
pub fn crop(img: &RasterImage, roi: &Roi) -> Result<RasterImage> {
    roi.validate_for(img)?;
    let c = img.channels();
    let mut out = Vec::with_capacity(roi.w * roi.h * c);
    for y in roi.y..roi.y + roi.h {
        let start = (y * img.width() + roi.x) * c;
        out.extend_from_slice(&img.data()[start..start + roi.w * c]);
    }
    RasterImage::new(roi.w, roi.h, c, out)
}

/// Which stages of the preprocessing chain to run; crop always happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSelection {
    pub gray: bool,
    pub gamma: bool,
    pub invert: bool,
    pub dilate: bool,
    pub erode: bool,
    pub median: bool,
}

impl Default for StageSelection {
    fn default() -> Self {
        Self {
            gray: true,
            gamma: true,
            invert: true,
            dilate: true,
            erode: true,
            median: true,
        }
    }
}

impl StageSelection {
    /// Parse a comma-separated stage list, e.g. `gray,gamma,invert`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut sel = Self {
            gray: false,
            gamma: false,
            invert: false,
            dilate: false,
            erode: false,
            median: false,
        };
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name {
                "gray" => sel.gray = true,
                "gamma" => sel.gamma = true,
                "invert" => sel.invert = true,
                "dilate" => sel.dilate = true,
                "erode" => sel.erode = true,
                "median" => sel.median = true,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown preprocessing stage '{other}'"
                    )))
                }
            }
        }
        Ok(sel)
    }
}

/// Full scorecard preprocessing: crop, then the grayscale/gamma/invert
/// chain, then closing (dilate, erode) and a median pass.
pub fn preprocess_scorecard(
    img: &RasterImage,
    roi: &Roi,
    params: &PreprocessParams,
) -> Result<RasterImage> {
    preprocess_scorecard_stages(img, roi, params, &StageSelection::default())
}

/// Preprocessing with individual stages switchable; used by the
/// `preprocess` subcommand and the denoising ablation tests.
pub fn preprocess_scorecard_stages(
    img: &RasterImage,
    roi: &Roi,
    params: &PreprocessParams,
    stages: &StageSelection,
) -> Result<RasterImage> {
    params.validate()?;
    let mut cur = crop(img, roi)?;
    if stages.gray && cur.channels() == 3 {
        cur = to_grayscale(&cur)?;
    }
    if cur.channels() != 1 {
        return Err(Error::InvalidInput(
            "preprocessing past the gray stage needs a single-channel image".into(),
        ));
    }
    if stages.gamma {
        cur = power_transform(&cur, params.gamma)?;
    }
    if stages.invert {
        cur = invert(&cur)?;
    }
    if stages.dilate {
        cur = dilate(&cur, params.morph_kernel)?;
    }
    if stages.erode {
        cur = erode(&cur, params.morph_kernel)?;
    }
    if stages.median {
        cur = median_blur(&cur, params.median_kernel)?;
    }
    Ok(cur)
}

fn require_gray(img: &RasterImage, op: &str) -> Result<()> {
    if img.channels() != 1 {
        return Err(Error::InvalidInput(format!(
            "{op} expects a single-channel image, got {} channels",
            img.channels()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: usize, h: usize, data: Vec<u8>) -> RasterImage {
        RasterImage::new(w, h, 1, data).unwrap()
    }

    fn random_gray(w: usize, h: usize, seed: u64) -> RasterImage {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        gray(w, h, (0..w * h).map(|_| rng.gen()).collect())
    }

    /// Brute-force sliding-window reference, shared by the morphology tests.
    fn window_oracle(img: &RasterImage, k: usize, f: impl Fn(&mut Vec<u8>) -> u8) -> Vec<u8> {
        let (w, h) = (img.width() as isize, img.height() as isize);
        let r = (k / 2) as isize;
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let mut win = Vec::new();
                for dy in -r..=r {
                    for dx in -r..=r {
                        let sx = (x + dx).clamp(0, w - 1) as usize;
                        let sy = (y + dy).clamp(0, h - 1) as usize;
                        win.push(img.at(sx, sy, 0));
                    }
                }
                out.push(f(&mut win));
            }
        }
        out
    }

    #[test]
    fn grayscale_known_values() {
        let img = RasterImage::new(
            3,
            1,
            3,
            vec![255, 255, 255, 0, 0, 255, 0, 255, 0],
        )
        .unwrap();
        let g = to_grayscale(&img).unwrap();
        // white fixed point; pure red 0.299*255 = 76.245; pure green rounds up
        assert_eq!(g.data(), &[255, 76, 150]);
    }

    #[test]
    fn grayscale_rejects_single_channel() {
        let img = gray(2, 2, vec![0; 4]);
        assert!(matches!(to_grayscale(&img), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn power_transform_known_values() {
        let img = gray(3, 1, vec![255, 128, 200]);
        let out = power_transform(&img, 7.0).unwrap();
        assert_eq!(out.data(), &[255, 2, 47]);
    }

    #[test]
    fn power_transform_gamma_one_is_identity() {
        let img = gray(16, 16, (0..=255).collect());
        assert_eq!(power_transform(&img, 1.0).unwrap(), img);
    }

    #[test]
    fn power_transform_rejects_nonpositive_gamma() {
        let img = gray(1, 1, vec![10]);
        assert!(matches!(
            power_transform(&img, 0.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            power_transform(&img, -2.0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn invert_is_involution() {
        let img = random_gray(17, 9, 3);
        assert_eq!(invert(&invert(&img).unwrap()).unwrap(), img);
        let px = gray(3, 1, vec![0, 255, 100]);
        assert_eq!(invert(&px).unwrap().data(), &[255, 0, 155]);
    }

    #[test]
    fn dilate_single_pixel_spreads_to_kernel_block() {
        let mut data = vec![0u8; 31 * 31];
        data[15 * 31 + 15] = 255;
        let out = dilate(&gray(31, 31, data), 15).unwrap();
        for y in 0..31 {
            for x in 0..31 {
                let inside = (8..=22).contains(&x) && (8..=22).contains(&y);
                assert_eq!(out.at(x, y, 0), if inside { 255 } else { 0 });
            }
        }
    }

    #[test]
    fn dilate_constant_and_k1_fixed_points() {
        let zero = gray(8, 8, vec![0; 64]);
        assert_eq!(dilate(&zero, 15).unwrap(), zero);
        let img = random_gray(12, 7, 9);
        assert_eq!(dilate(&img, 1).unwrap(), img);
    }

    #[test]
    fn erode_single_zero_in_white_field() {
        let mut data = vec![255u8; 31 * 31];
        data[15 * 31 + 15] = 0;
        let out = erode(&gray(31, 31, data), 15).unwrap();
        for y in 0..31 {
            for x in 0..31 {
                let inside = (8..=22).contains(&x) && (8..=22).contains(&y);
                assert_eq!(out.at(x, y, 0), if inside { 0 } else { 255 });
            }
        }
    }

    #[test]
    fn morphology_rejects_even_kernel() {
        let img = gray(4, 4, vec![0; 16]);
        for op in [dilate, erode, median_blur] {
            assert!(matches!(op(&img, 2), Err(Error::InvalidParameter(_))));
        }
    }

    #[test]
    fn erode_is_dual_of_dilate() {
        for seed in 0..4 {
            let img = random_gray(20, 13, seed);
            for k in [3, 5, 15] {
                let lhs = erode(&img, k).unwrap();
                let rhs = invert(&dilate(&invert(&img).unwrap(), k).unwrap()).unwrap();
                assert_eq!(lhs, rhs, "duality failed for k={k} seed={seed}");
            }
        }
    }

    #[test]
    fn dilate_bounds_and_monotonicity() {
        let img = random_gray(16, 16, 42);
        let up = dilate(&img, 5).unwrap();
        let down = erode(&img, 5).unwrap();
        for i in 0..img.data().len() {
            assert!(down.data()[i] <= img.data()[i]);
            assert!(img.data()[i] <= up.data()[i]);
        }
    }

    #[test]
    fn kernel_ops_match_bruteforce_oracle() {
        for seed in 0..3 {
            let img = random_gray(64, 64, 100 + seed);
            for k in [3, 15] {
                let d = window_oracle(&img, k, |w| *w.iter().max().unwrap());
                assert_eq!(dilate(&img, k).unwrap().data(), &d[..]);
                let e = window_oracle(&img, k, |w| *w.iter().min().unwrap());
                assert_eq!(erode(&img, k).unwrap().data(), &e[..]);
                let m = window_oracle(&img, k, |w| {
                    w.sort_unstable();
                    w[w.len() / 2]
                });
                assert_eq!(median_blur(&img, k).unwrap().data(), &m[..]);
            }
        }
    }

    #[test]
    fn median_blur_removes_lone_speck() {
        let mut data = vec![0u8; 25];
        data[12] = 255;
        let out = median_blur(&gray(5, 5, data), 3).unwrap();
        assert!(out.data().iter().all(|&v| v == 0));
        let constant = gray(6, 4, vec![77; 24]);
        assert_eq!(median_blur(&constant, 5).unwrap(), constant);
    }

    #[test]
    fn crop_cases() {
        let img = gray(4, 4, (0..16).collect());
        let full = crop(&img, &Roi { x: 0, y: 0, w: 4, h: 4 }).unwrap();
        assert_eq!(full, img);
        let one = crop(&img, &Roi { x: 0, y: 0, w: 1, h: 1 }).unwrap();
        assert_eq!(one.data(), &[0]);
        let sub = crop(&img, &Roi { x: 1, y: 2, w: 2, h: 2 }).unwrap();
        assert_eq!(sub.data(), &[9, 10, 13, 14]);
        assert!(matches!(
            crop(&img, &Roi { x: 3, y: 0, w: 2, h: 1 }),
            Err(Error::InvalidRoi(_))
        ));
    }

    #[test]
    fn preprocess_matches_stagewise_composition() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let data: Vec<u8> = (0..24 * 18 * 3).map(|_| rng.gen()).collect();
        let img = RasterImage::new(24, 18, 3, data).unwrap();
        let roi = Roi { x: 2, y: 3, w: 20, h: 12 };
        let params = PreprocessParams {
            gamma: 7.0,
            morph_kernel: 3,
            median_kernel: 3,
        };
        let got = preprocess_scorecard(&img, &roi, &params).unwrap();
        let want = median_blur(
            &erode(
                &dilate(
                    &invert(&power_transform(&to_grayscale(&crop(&img, &roi).unwrap()).unwrap(), 7.0).unwrap())
                        .unwrap(),
                    3,
                )
                .unwrap(),
                3,
            )
            .unwrap(),
            3,
        )
        .unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn preprocess_black_crop_goes_white() {
        let img = RasterImage::filled(40, 20, 3, 0).unwrap();
        let roi = Roi { x: 0, y: 0, w: 40, h: 20 };
        let out = preprocess_scorecard(&img, &roi, &PreprocessParams::default()).unwrap();
        assert!(out.data().iter().all(|&v| v == 255));
    }

    #[test]
    fn pixelwise_ops_commute_with_permutation() {
        let img = random_gray(10, 10, 5);
        let mut perm: Vec<usize> = (0..100).collect();
        perm.reverse();
        let permuted = gray(10, 10, perm.iter().map(|&i| img.data()[i]).collect());
        let a = power_transform(&permuted, 2.2).unwrap();
        let b = power_transform(&img, 2.2).unwrap();
        for (dst, &src) in perm.iter().enumerate() {
            assert_eq!(a.data()[dst], b.data()[src]);
        }
    }
}
