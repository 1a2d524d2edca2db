//! Synthetic two-class shape images, the HMPD dataset format and a PGM/PPM importer.
//!
//! A scene holds a circle, an equilateral triangle and a square placed near
//! three corners of a random layout square. The square always sits at the
//! bottom-right corner; class 0 puts the circle upper-left and the triangle
//! lower-left, class 1 puts the circle lower-left and the triangle upper-right.
//! Coordinates are `(x, y)` with `x` along columns and `y` growing downwards;
//! the image covers `[0, 31]^2` and pixel `(i, j)` covers
//! `[j-1, j] x [i-1, i]`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{HmpError, Result};
use crate::model::ImageGrid;
use crate::rng::{stream, Purpose};

/// Side length of generated images.
pub const IMAGE_SIDE: usize = 31;
/// Grey value of the background.
pub const BACKGROUND: f64 = 1.0;
/// Default noise scale.
pub const DEFAULT_NOISE: f64 = 0.05;
/// Version tag stored in dataset provenance.
pub const GENERATOR_VERSION: u32 = 1;

const MAX_PLACEMENT_TRIES: usize = 100;
const SUPERSAMPLE: usize = 4;

/// Shape kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Circle,
    Triangle,
    Square,
}

/// One placed shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shape {
    pub kind: ShapeKind,
    /// Area in squared pixels.
    pub area: f64,
    pub grey: f64,
    /// Center of the bounding box, `(x, y)`.
    pub center: (f64, f64),
}

impl Shape {
    /// Half extents `(x, y)` of the bounding box.
    pub fn half_extent(&self) -> (f64, f64) {
        match self.kind {
            ShapeKind::Circle => {
                let r = (self.area / PI).sqrt();
                (r, r)
            }
            ShapeKind::Square => {
                let a = self.area.sqrt() / 2.0;
                (a, a)
            }
            ShapeKind::Triangle => {
                let a = (4.0 * self.area / 3f64.sqrt()).sqrt();
                (a / 2.0, a * 3f64.sqrt() / 4.0)
            }
        }
    }

    /// True if `(x, y)` lies inside the shape.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        if self.area <= 0.0 {
            return false;
        }
        let (cx, cy) = self.center;
        match self.kind {
            ShapeKind::Circle => {
                let r2 = self.area / PI;
                (x - cx).powi(2) + (y - cy).powi(2) <= r2
            }
            ShapeKind::Square => {
                let h = self.area.sqrt() / 2.0;
                (x - cx).abs() <= h && (y - cy).abs() <= h
            }
            ShapeKind::Triangle => {
                // Flat bottom edge, apex on top.
                let (hx, hy) = self.half_extent();
                let top = cy - hy;
                let bottom = cy + hy;
                if y < top || y > bottom {
                    return false;
                }
                let half_width = hx * (y - top) / (2.0 * hy);
                (x - cx).abs() <= half_width
            }
        }
    }
}

/// A sampled scene before rasterization.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeScene {
    /// Circle, triangle, square in this order.
    pub shapes: [Shape; 3],
    pub label: u8,
    /// Area of the layout square.
    pub layout_area: f64,
    /// Jitter vectors of circle, triangle, square.
    pub jitter: [(f64, f64); 3],
    /// Global offset added to the layout square's upper-left corner.
    pub offset: (f64, f64),
}

impl ShapeScene {
    /// Side length of the layout square.
    pub fn layout_side(&self) -> f64 {
        self.layout_area.sqrt()
    }

    /// Bounding box `(xmin, ymin, xmax, ymax)` of all shapes.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        bounds(&self.shapes)
    }
}

fn bounds(shapes: &[Shape]) -> (f64, f64, f64, f64) {
    let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for s in shapes {
        let (hx, hy) = s.half_extent();
        b.0 = b.0.min(s.center.0 - hx);
        b.1 = b.1.min(s.center.1 - hy);
        b.2 = b.2.max(s.center.0 + hx);
        b.3 = b.3.max(s.center.1 + hy);
    }
    b
}

/// Corner of the layout square (unit coordinates) for circle, triangle, square.
fn corners(label: u8) -> [(f64, f64); 3] {
    if label == 0 {
        [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
    } else {
        [(0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
    }
}

/// Draws a scene of class `label`.
///
/// Order of draws: three areas, the grey permutation, the layout area, three
/// jitter vectors, then two uniforms mapped onto the feasible offset range.
/// If the jittered shapes cannot fit, the jitter is redrawn; after
/// [`MAX_PLACEMENT_TRIES`] failures the whole layout is resampled.
pub fn sample_scene(label: u8, rng: &mut impl Rng) -> ShapeScene {
    let side = IMAGE_SIDE as f64;
    loop {
        let areas: [f64; 3] =
            [rng.random_range(20.0..=40.0), rng.random_range(20.0..=40.0), rng.random_range(20.0..=40.0)];
        let mut greys = [0.0, 1.0 / 3.0, 2.0 / 3.0];
        greys.shuffle(rng);
        let layout_area: f64 = rng.random_range(80.0..=160.0);
        let s = layout_area.sqrt();
        let radius = s / 3.0;
        let kinds = [ShapeKind::Circle, ShapeKind::Triangle, ShapeKind::Square];
        for _ in 0..MAX_PLACEMENT_TRIES {
            let mut jitter = [(0.0, 0.0); 3];
            for j in &mut jitter {
                let r = radius * rng.random::<f64>().sqrt();
                let t = 2.0 * PI * rng.random::<f64>();
                *j = (r * t.cos(), r * t.sin());
            }
            let u: (f64, f64) = (rng.random(), rng.random());
            let mut shapes = [0, 1, 2].map(|i| {
                let c = corners(label)[i];
                Shape {
                    kind: kinds[i],
                    area: areas[i],
                    grey: greys[i],
                    center: (c.0 * s + jitter[i].0, c.1 * s + jitter[i].1),
                }
            });
            let (x0, y0, x1, y1) = bounds(&shapes);
            if x1 - x0 > side || y1 - y0 > side {
                continue;
            }
            let offset = (-x0 + u.0 * (side - (x1 - x0)), -y0 + u.1 * (side - (y1 - y0)));
            for sh in &mut shapes {
                sh.center.0 += offset.0;
                sh.center.1 += offset.1;
            }
            return ShapeScene { shapes, label, layout_area, jitter, offset };
        }
    }
}

/// Renders a scene on the `31 x 31` grid with `4 x 4` supersampling.
/// Shapes are painted circle, triangle, square over the background.
pub fn rasterize(scene: &ShapeScene) -> ImageGrid {
    let n = IMAGE_SIDE;
    let ss = SUPERSAMPLE;
    let mut v = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for a in 0..ss {
                let y = i as f64 + (a as f64 + 0.5) / ss as f64;
                for b in 0..ss {
                    let x = j as f64 + (b as f64 + 0.5) / ss as f64;
                    let mut val = BACKGROUND;
                    for sh in &scene.shapes {
                        if sh.contains(x, y) {
                            val = sh.grey;
                        }
                    }
                    acc += val;
                }
            }
            v.push((acc / (ss * ss) as f64).clamp(0.0, 1.0));
        }
    }
    ImageGrid::new(n, n, v).expect("values clamped")
}

/// Adds `scale * N(0, 1)` to every pixel and clamps to `[0, 1]`.
pub fn add_noise(img: &ImageGrid, scale: f64, rng: &mut impl Rng) -> ImageGrid {
    let v = img
        .values()
        .iter()
        .map(|&x| {
            let e: f64 = rng.sample(StandardNormal);
            (x + scale * e).clamp(0.0, 1.0)
        })
        .collect();
    ImageGrid::new(img.d1(), img.d2(), v).expect("values clamped")
}

/// Labeled images of equal size.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d1: usize,
    d2: usize,
    items: Vec<(ImageGrid, u8)>,
    /// Seed of the generating run, if synthetic.
    pub seed: Option<u64>,
}

impl Dataset {
    /// Builds a dataset; all images must share dimensions and labels must be 0 or 1.
    pub fn new(items: Vec<(ImageGrid, u8)>) -> Result<Self> {
        let (d1, d2) = items.first().map(|(x, _)| (x.d1(), x.d2())).unwrap_or((0, 0));
        for (x, y) in &items {
            if (x.d1(), x.d2()) != (d1, d2) {
                return Err(HmpError::shape("images in a dataset must share dimensions"));
            }
            if *y > 1 {
                return Err(HmpError::shape(format!("label {y} is not 0 or 1")));
            }
        }
        Ok(Dataset { d1, d2, items, seed: None })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Image size `(d1, d2)`; `(0, 0)` when empty.
    pub fn dims(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    pub fn items(&self) -> &[(ImageGrid, u8)] {
        &self.items
    }

    /// Items `range` as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Dataset {
        Dataset { d1: self.d1, d2: self.d2, items: self.items[range].to_vec(), seed: self.seed }
    }

    /// Copy with every pixel rounded to `f32`, as stored on disk.
    pub fn quantized(&self) -> Dataset {
        let items = self
            .items
            .iter()
            .map(|(x, y)| {
                let v = x.values().iter().map(|&p| p as f32 as f64).collect();
                (ImageGrid::new(x.d1(), x.d2(), v).expect("rounding keeps [0,1]"), *y)
            })
            .collect();
        Dataset { d1: self.d1, d2: self.d2, items, seed: self.seed }
    }
}

/// Draws `n` labeled images. Item `t` uses the label, scene and noise streams
/// `(seed, purpose, t)`, so items are independent of generation order.
pub fn generate(n: usize, seed: u64, noise_scale: f64) -> Dataset {
    let items = (0..n as u64)
        .map(|t| {
            let label = stream(seed, Purpose::Label, t).random_range(0..2u8);
            let scene = sample_scene(label, &mut stream(seed, Purpose::Scene, t));
            let img = rasterize(&scene);
            let img = if noise_scale > 0.0 {
                add_noise(&img, noise_scale, &mut stream(seed, Purpose::Noise, t))
            } else {
                img
            };
            (img, label)
        })
        .collect();
    let mut ds = Dataset::new(items).expect("uniform size");
    ds.seed = Some(seed);
    ds
}

const MAGIC: &[u8; 4] = b"HMPD";
const VERSION: u16 = 1;
/// Header bytes: magic (4), version (2), count (4), d1 (2), d2 (2).
pub const HEADER_LEN: usize = 14;

/// Size in bytes of an HMPD file.
pub fn file_size(count: usize, d1: usize, d2: usize) -> usize {
    HEADER_LEN + count * (1 + 4 * d1 * d2)
}

/// Serializes a dataset in the HMPD format.
pub fn to_bytes(ds: &Dataset) -> Result<Vec<u8>> {
    let (d1, d2) = ds.dims();
    if d1 > u16::MAX as usize || d2 > u16::MAX as usize || ds.len() > u32::MAX as usize {
        return Err(HmpError::shape("dataset too large for the HMPD header"));
    }
    let mut out = Vec::with_capacity(file_size(ds.len(), d1, d2));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(ds.len() as u32).to_le_bytes());
    out.extend_from_slice(&(d1 as u16).to_le_bytes());
    out.extend_from_slice(&(d2 as u16).to_le_bytes());
    for (x, y) in ds.items() {
        out.push(*y);
        for &p in x.values() {
            out.extend_from_slice(&(p as f32).to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses an HMPD byte buffer.
pub fn from_bytes(b: &[u8]) -> Result<Dataset> {
    let take = |at: usize, n: usize, what: &str| -> Result<&[u8]> {
        b.get(at..at + n).ok_or_else(|| HmpError::format(at as u64, format!("truncated {what}")))
    };
    if take(0, 4, "magic")? != MAGIC {
        return Err(HmpError::format(0, "bad magic"));
    }
    let version = u16::from_le_bytes(take(4, 2, "version")?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(HmpError::format(4, format!("unsupported version {version}")));
    }
    let count = u32::from_le_bytes(take(6, 4, "count")?.try_into().expect("4 bytes")) as usize;
    let d1 = u16::from_le_bytes(take(10, 2, "d1")?.try_into().expect("2 bytes")) as usize;
    let d2 = u16::from_le_bytes(take(12, 2, "d2")?.try_into().expect("2 bytes")) as usize;
    if count > 0 && (d1 == 0 || d2 == 0) {
        return Err(HmpError::format(10, "zero image dimension"));
    }
    let mut items = Vec::with_capacity(count);
    let mut at = HEADER_LEN;
    for t in 0..count {
        let label = take(at, 1, &format!("label of item {t}"))?[0];
        if label > 1 {
            return Err(HmpError::format(at as u64, format!("label {label} is not 0 or 1")));
        }
        at += 1;
        let raw = take(at, 4 * d1 * d2, &format!("pixels of item {t}"))?;
        let mut v = Vec::with_capacity(d1 * d2);
        for (q, c) in raw.chunks_exact(4).enumerate() {
            let p = f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64;
            if !(0.0..=1.0).contains(&p) {
                return Err(HmpError::format((at + 4 * q) as u64, format!("pixel value {p} outside [0,1]")));
            }
            v.push(p);
        }
        at += 4 * d1 * d2;
        items.push((ImageGrid::new(d1, d2, v)?, label));
    }
    if at != b.len() {
        return Err(HmpError::format(at as u64, "trailing bytes"));
    }
    let mut ds = Dataset::new(items)?;
    ds.d1 = d1;
    ds.d2 = d2;
    Ok(ds)
}

/// Writes a dataset to `path`.
pub fn save(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(ds)?)?;
    Ok(())
}

/// Reads a dataset from `path`.
pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
    from_bytes(&fs::read(path)?)
}

/// Decoded PNM image: grey values in `[0, 1]`, row-major.
fn decode_pnm(b: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let mut pos = 0;
    let token = |pos: &mut usize| -> Result<String> {
        loop {
            while *pos < b.len() && b[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < b.len() && b[*pos] == b'#' {
                while *pos < b.len() && b[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < b.len() && !b[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(HmpError::format(start as u64, "unexpected end of header"));
        }
        Ok(String::from_utf8_lossy(&b[start..*pos]).into_owned())
    };
    let num = |s: String, at: usize| -> Result<usize> {
        s.parse().map_err(|_| HmpError::format(at as u64, format!("expected a number, got {s:?}")))
    };
    let magic = token(&mut pos)?;
    let (channels, binary) = match magic.as_str() {
        "P2" => (1, false),
        "P5" => (1, true),
        "P3" => (3, false),
        "P6" => (3, true),
        _ => return Err(HmpError::format(0, format!("unsupported image type {magic:?}"))),
    };
    let w = num(token(&mut pos)?, pos)?;
    let h = num(token(&mut pos)?, pos)?;
    let maxval = num(token(&mut pos)?, pos)?;
    if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
        return Err(HmpError::format(pos as u64, "invalid header values"));
    }
    let count = w * h * channels;
    let mut raw = Vec::with_capacity(count);
    if binary {
        pos += 1;
        let width = if maxval < 256 { 1 } else { 2 };
        let data =
            b.get(pos..pos + count * width).ok_or_else(|| HmpError::format(pos as u64, "truncated pixel data"))?;
        for c in data.chunks_exact(width) {
            raw.push(if width == 1 { c[0] as usize } else { (c[0] as usize) << 8 | c[1] as usize });
        }
    } else {
        for _ in 0..count {
            let at = pos;
            raw.push(num(token(&mut pos)?, at)?);
        }
    }
    if let Some(v) = raw.iter().find(|&&v| v > maxval) {
        return Err(HmpError::format(pos as u64, format!("sample {v} exceeds maxval {maxval}")));
    }
    let m = maxval as f64;
    let grey = if channels == 1 {
        raw.iter().map(|&v| v as f64 / m).collect()
    } else {
        raw.chunks_exact(3)
            .map(|p| ((0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / m).clamp(0.0, 1.0))
            .collect()
    };
    Ok((h, w, grey))
}

/// Converts decoded grey values to a `31 x 31` image, dropping the last row
/// and column of `32 x 32` inputs.
fn crop_to_side(h: usize, w: usize, grey: &[f64]) -> Result<ImageGrid> {
    let n = IMAGE_SIDE;
    if (h, w) == (n, n) {
        return ImageGrid::new(n, n, grey.to_vec());
    }
    if (h, w) == (n + 1, n + 1) {
        let v = (0..n).flat_map(|i| grey[i * w..i * w + n].iter().copied()).collect();
        return ImageGrid::new(n, n, v);
    }
    Err(HmpError::shape(format!("image is {h}x{w}; expected {n}x{n} or {}x{}", n + 1, n + 1)))
}

/// Imports PGM/PPM images as a `31 x 31` grey dataset, labeling each file with `label_rule`.
pub fn import_grayscale<P: AsRef<Path>>(paths: &[P], label_rule: impl Fn(&Path) -> u8) -> Result<Dataset> {
    let mut items = Vec::with_capacity(paths.len());
    for p in paths {
        let p = p.as_ref();
        let (h, w, grey) = decode_pnm(&fs::read(p)?)?;
        items.push((crop_to_side(h, w, &grey)?, label_rule(p)));
    }
    Dataset::new(items)
}

/// Imports images from in-memory PNM buffers.
pub fn import_grayscale_bytes(buffers: &[(Vec<u8>, u8)]) -> Result<Dataset> {
    let mut items = Vec::with_capacity(buffers.len());
    for (b, y) in buffers {
        let (h, w, grey) = decode_pnm(b)?;
        items.push((crop_to_side(h, w, &grey)?, *y));
    }
    Dataset::new(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lone_square(area: f64, center: (f64, f64), grey: f64) -> ShapeScene {
        let empty = |kind| Shape { kind, area: 0.0, grey: 0.5, center: (0.0, 0.0) };
        ShapeScene {
            shapes: [
                empty(ShapeKind::Circle),
                empty(ShapeKind::Triangle),
                Shape { kind: ShapeKind::Square, area, grey, center },
            ],
            label: 0,
            layout_area: 100.0,
            jitter: [(0.0, 0.0); 3],
            offset: (0.0, 0.0),
        }
    }

    #[test]
    fn empty_scene_is_background() {
        let img = rasterize(&lone_square(0.0, (15.5, 15.5), 0.0));
        assert!(img.values().iter().all(|&v| v == BACKGROUND));
    }

    #[test]
    fn centered_square_has_black_interior() {
        // Side 5 centered at 15.5 covers [13, 18]: pixels 14..=18 on each axis.
        let img = rasterize(&lone_square(25.0, (15.5, 15.5), 0.0));
        for i in 14..=18 {
            for j in 14..=18 {
                assert_eq!(img.get(i, j), 0.0);
            }
        }
        assert_eq!(img.get(13, 15), 1.0);
        assert_eq!(img.get(19, 15), 1.0);
        // Off-grid placement gives partially covered rim pixels.
        let img = rasterize(&lone_square(25.0, (15.25, 15.25), 0.0));
        assert!(img.get(13, 15) > 0.0 && img.get(13, 15) < 1.0);
    }

    #[test]
    fn ink_matches_area() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for label in [0, 1] {
            for _ in 0..50 {
                let sc = sample_scene(label, &mut rng);
                let img = rasterize(&sc);
                let ink: f64 = img.values().iter().map(|v| BACKGROUND - v).sum();
                let want: f64 = sc.shapes.iter().map(|s| s.area * (BACKGROUND - s.grey)).sum();
                let overlap = (0..3).any(|a| (a + 1..3).any(|b| overlaps(&sc.shapes[a], &sc.shapes[b])));
                if !overlap {
                    assert!((ink - want).abs() <= 0.05 * want, "ink {ink} vs {want}");
                }
            }
        }
    }

    fn overlaps(a: &Shape, b: &Shape) -> bool {
        let (ax, ay) = a.half_extent();
        let (bx, by) = b.half_extent();
        (a.center.0 - b.center.0).abs() < ax + bx && (a.center.1 - b.center.1).abs() < ay + by
    }

    #[test]
    fn scene_parameters_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for t in 0..1000 {
            let sc = sample_scene((t % 2) as u8, &mut rng);
            assert!(sc.shapes.iter().all(|s| (20.0..=40.0).contains(&s.area)));
            assert!((80.0..=160.0).contains(&sc.layout_area));
            let mut g: Vec<f64> = sc.shapes.iter().map(|s| s.grey).collect();
            g.sort_by(f64::total_cmp);
            assert_eq!(g, vec![0.0, 1.0 / 3.0, 2.0 / 3.0]);
            let (x0, y0, x1, y1) = sc.bounds();
            assert!(x0 >= -1e-9 && y0 >= -1e-9 && x1 <= 31.0 + 1e-9 && y1 <= 31.0 + 1e-9);
            let r = sc.layout_side() / 3.0;
            assert!(sc.jitter.iter().all(|(a, b)| (a * a + b * b).sqrt() <= r + 1e-12));
        }
    }

    #[test]
    fn classes_differ_only_in_corner_assignment() {
        for seed in 0..50 {
            let a = sample_scene(0, &mut ChaCha8Rng::seed_from_u64(seed));
            let b = sample_scene(1, &mut ChaCha8Rng::seed_from_u64(seed));
            assert_eq!(a.layout_area, b.layout_area);
            assert_eq!(a.jitter, b.jitter);
            for (x, y) in a.shapes.iter().zip(&b.shapes) {
                assert_eq!((x.kind, x.area, x.grey), (y.kind, y.area, y.grey));
            }
            // Positions relative to the square follow the class corners.
            let s = a.layout_side();
            let rel = |sc: &ShapeScene, i: usize| {
                let (p, q) = (sc.shapes[i].center, sc.shapes[2].center);
                ((p.0 - sc.jitter[i].0) - (q.0 - sc.jitter[2].0), (p.1 - sc.jitter[i].1) - (q.1 - sc.jitter[2].1))
            };
            let close = |u: (f64, f64), v: (f64, f64)| (u.0 - v.0).abs() < 1e-9 && (u.1 - v.1).abs() < 1e-9;
            assert!(close(rel(&a, 0), (-s, -s)) && close(rel(&a, 1), (-s, 0.0)));
            assert!(close(rel(&b, 0), (-s, 0.0)) && close(rel(&b, 1), (0.0, -s)));
        }
    }

    #[test]
    fn noise_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = ImageGrid::constant(10, 10, 0.3).unwrap();
        assert_eq!(add_noise(&img, 0.0, &mut rng), img);
        let white = ImageGrid::constant(10, 10, 1.0).unwrap();
        assert!(add_noise(&white, 0.05, &mut rng).values().iter().all(|&v| v <= 1.0));
        let half = ImageGrid::constant(250, 400, 0.5).unwrap();
        let v = add_noise(&half, 0.05, &mut rng);
        let n = v.values().len() as f64;
        let mean = v.values().iter().sum::<f64>() / n;
        let sd = (v.values().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        // Standard error of the sample std is about sigma / sqrt(2n).
        assert!((sd - 0.05).abs() < 3.0 * 0.05 / (2.0 * n).sqrt(), "sd {sd}");
    }

    #[test]
    fn generate_is_deterministic_and_balanced() {
        let a = generate(3, 9, DEFAULT_NOISE);
        assert_eq!(a, generate(3, 9, DEFAULT_NOISE));
        assert_ne!(a, generate(3, 10, DEFAULT_NOISE));
        let one = generate(1, 0, DEFAULT_NOISE);
        assert_eq!((one.len(), one.dims()), (1, (31, 31)));
        let n = 10_000u64;
        let ones: u64 = (0..n).map(|t| stream(5, Purpose::Label, t).random_range(0..2u8) as u64).sum();
        let sd = (n as f64 * 0.25).sqrt();
        assert!(((ones as f64) - n as f64 / 2.0).abs() < 3.0 * sd);
    }

    #[test]
    fn hmpd_round_trip_and_size() {
        let ds = generate(4, 1, DEFAULT_NOISE);
        let b = to_bytes(&ds).unwrap();
        assert_eq!(b.len(), file_size(4, 31, 31));
        assert_eq!(&b[..4], b"HMPD");
        let back = from_bytes(&b).unwrap();
        assert_eq!(back.items(), ds.quantized().items());
        assert_eq!(to_bytes(&back).unwrap(), b);
    }

    #[test]
    fn hmpd_errors_carry_offsets() {
        assert!(matches!(from_bytes(&[]), Err(HmpError::Format { offset: 0, .. })));
        let mut b = to_bytes(&generate(2, 1, 0.0)).unwrap();
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(from_bytes(&bad), Err(HmpError::Format { offset: 0, .. })));
        let mut bad = b.clone();
        bad[4] = 2;
        assert!(matches!(from_bytes(&bad), Err(HmpError::Format { offset: 4, .. })));
        let cut = b.len() - 3;
        let second = HEADER_LEN + 1 + 4 * 961 + 1;
        assert!(matches!(from_bytes(&b[..cut]), Err(HmpError::Format { offset, .. }) if offset as usize == second));
        b.push(0);
        assert!(matches!(from_bytes(&b), Err(HmpError::Format { .. })));
    }

    fn pgm(side: usize, v: u8) -> Vec<u8> {
        let mut b = format!("P5\n# test\n{side} {side}\n255\n").into_bytes();
        b.extend(std::iter::repeat_n(v, side * side));
        b
    }

    #[test]
    fn import_examples() {
        let ds = import_grayscale_bytes(&[(pgm(32, 128), 1)]).unwrap();
        assert_eq!(ds.dims(), (31, 31));
        assert!(ds.items()[0].0.values().iter().all(|&v| v == 128.0 / 255.0));
        let ds = import_grayscale_bytes(&[(pgm(31, 51), 0)]).unwrap();
        assert!(ds.items()[0].0.values().iter().all(|&v| v == 0.2));
        let mut ppm = b"P3 31 31 255\n".to_vec();
        for _ in 0..961 {
            ppm.extend_from_slice(b"255 0 0\n");
        }
        let ds = import_grayscale_bytes(&[(ppm, 0)]).unwrap();
        assert!((ds.items()[0].0.get(5, 5) - 0.299).abs() < 1e-12);
        assert!(import_grayscale_bytes(&[(pgm(30, 0), 0)]).is_err());
        assert!(import_grayscale_bytes(&[(b"GIF89a".to_vec(), 0)]).is_err());
    }
}
