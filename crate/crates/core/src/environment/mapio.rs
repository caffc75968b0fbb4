//! Occupancy maps as 8-bit binary PGM plus a map-server style YAML file, and
//! heightmaps as 16-bit binary PGM plus YAML.
//!
//! Occupancy YAML fields: `image`, `resolution`, `origin: [x, y, yaw]`,
//! `occupied_thresh`, `free_thresh` and optional `negate`. A pixel value `v`
//! has occupancy probability `p = (255 − v) / 255` (or `v / 255` when
//! negated); `p ≥ occupied_thresh` is occupied, `p ≤ free_thresh` is free,
//! anything between is unknown. Saved maps write 0 for occupied, 254 for free
//! and 205 for unknown.
//!
//! Heightmap YAML fields: `image`, `resolution`, `origin: [x, y]`, `z_scale`,
//! optional `z_offset`, `friction` and `friction_image` (8-bit, scale
//! `v / 100`).

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};
use serde_yaml::{Mapping, Value};

use super::grid::{Cell, OccupancyGrid};
use super::heightmap::Heightmap;
use super::EnvironmentError;
use crate::math::Pose2;

pub const DEFAULT_OCCUPIED_THRESH: f64 = 0.65;
pub const DEFAULT_FREE_THRESH: f64 = 0.196;

const OCCUPIED_PIXEL: u8 = 0;
const FREE_PIXEL: u8 = 254;
const UNKNOWN_PIXEL: u8 = 205;

/// Parsed occupancy-map metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct MapMetadata {
    pub image: PathBuf,
    pub resolution: f64,
    pub origin: Pose2,
    pub occupied_thresh: f64,
    pub free_thresh: f64,
    pub negate: bool,
}

impl MapMetadata {
    /// Classifies one pixel.
    pub fn classify(&self, value: u8) -> Cell {
        let v = value as f64 / 255.0;
        let p = if self.negate { v } else { 1.0 - v };
        if p >= self.occupied_thresh {
            Cell::Occupied
        } else if p <= self.free_thresh {
            Cell::Free
        } else {
            Cell::Unknown
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> EnvironmentError {
    EnvironmentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_yaml(path: &Path) -> Result<Mapping, EnvironmentError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_yaml(&text)
}

fn parse_yaml(text: &str) -> Result<Mapping, EnvironmentError> {
    match serde_yaml::from_str::<Value>(text) {
        Ok(Value::Mapping(m)) => Ok(m),
        Ok(_) => Err(EnvironmentError::format("<root>", "metadata must be a mapping")),
        Err(e) => Err(EnvironmentError::format("<root>", e.to_string())),
    }
}

fn field<'a>(m: &'a Mapping, name: &str) -> Result<&'a Value, EnvironmentError> {
    m.get(name)
        .ok_or_else(|| EnvironmentError::format(name, "missing required field"))
}

fn number(m: &Mapping, name: &str) -> Result<f64, EnvironmentError> {
    field(m, name)?
        .as_f64()
        .ok_or_else(|| EnvironmentError::format(name, "expected a number"))
}

fn optional_number(m: &Mapping, name: &str) -> Result<Option<f64>, EnvironmentError> {
    match m.get(name) {
        None => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| EnvironmentError::format(name, "expected a number")),
    }
}

fn numbers(m: &Mapping, name: &str, len: usize) -> Result<Vec<f64>, EnvironmentError> {
    let seq = field(m, name)?
        .as_sequence()
        .ok_or_else(|| EnvironmentError::format(name, format!("expected a list of {len} numbers")))?;
    if seq.len() != len {
        return Err(EnvironmentError::format(name, format!("expected {len} values, got {}", seq.len())));
    }
    seq.iter()
        .map(|v| v.as_f64().ok_or_else(|| EnvironmentError::format(name, "expected numbers")))
        .collect()
}

fn image_path(m: &Mapping, yaml: &Path) -> Result<PathBuf, EnvironmentError> {
    let rel = field(m, "image")?
        .as_str()
        .ok_or_else(|| EnvironmentError::format("image", "expected a file name"))?;
    Ok(yaml.parent().unwrap_or(Path::new(".")).join(rel))
}

fn positive_resolution(m: &Mapping) -> Result<f64, EnvironmentError> {
    let r = number(m, "resolution")?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(EnvironmentError::format("resolution", format!("must be positive, got {r}")));
    }
    Ok(r)
}

pub fn parse_map_metadata(path: &Path) -> Result<MapMetadata, EnvironmentError> {
    let m = read_yaml(path)?;
    map_metadata(&m, path)
}

fn map_metadata(m: &Mapping, path: &Path) -> Result<MapMetadata, EnvironmentError> {
    let image = image_path(m, path)?;
    let resolution = positive_resolution(m)?;
    let o = numbers(m, "origin", 3)?;
    let occupied_thresh = number(m, "occupied_thresh")?;
    let free_thresh = number(m, "free_thresh")?;
    if !(0.0..=1.0).contains(&occupied_thresh) {
        return Err(EnvironmentError::format("occupied_thresh", "must lie in [0, 1]"));
    }
    if !(0.0..=1.0).contains(&free_thresh) || free_thresh >= occupied_thresh {
        return Err(EnvironmentError::format("free_thresh", "must lie in [0, occupied_thresh)"));
    }
    let negate = match m.get("negate") {
        None => false,
        Some(Value::Bool(b)) => *b,
        Some(v) => v.as_i64().map(|n| n != 0).ok_or_else(|| EnvironmentError::format("negate", "expected 0 or 1"))?,
    };
    Ok(MapMetadata {
        image,
        resolution,
        origin: Pose2::new(o[0], o[1], o[2]),
        occupied_thresh,
        free_thresh,
        negate,
    })
}

fn decode(path: &Path) -> Result<DynamicImage, EnvironmentError> {
    ImageReader::open(path)
        .map_err(|e| io_err(path, e))?
        .with_guessed_format()
        .map_err(|e| io_err(path, e))?
        .decode()
        .map_err(|e| EnvironmentError::format("image", format!("{}: {e}", path.display())))
}

/// Loads an occupancy grid from its YAML metadata file.
pub fn load_map(yaml: impl AsRef<Path>) -> Result<OccupancyGrid, EnvironmentError> {
    let meta = parse_map_metadata(yaml.as_ref())?;
    grid_from_image(&meta, decode(&meta.image)?)
}

/// Builds a grid from in-memory metadata text and image bytes.
pub fn load_map_from_memory(yaml: &str, image: &[u8]) -> Result<OccupancyGrid, EnvironmentError> {
    let meta = map_metadata(&parse_yaml(yaml)?, Path::new("."))?;
    let img = image::load_from_memory(image).map_err(|e| EnvironmentError::format("image", e.to_string()))?;
    grid_from_image(&meta, img)
}

fn grid_from_image(meta: &MapMetadata, img: DynamicImage) -> Result<OccupancyGrid, EnvironmentError> {
    let img = match img {
        DynamicImage::ImageLuma8(g) => g,
        _ => return Err(EnvironmentError::format("image", "expected an 8-bit grayscale image")),
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut grid = OccupancyGrid::new(w, h, meta.resolution, meta.origin, Cell::Unknown);
    for (px, py, v) in img.enumerate_pixels() {
        // image rows run top-down, grid rows bottom-up
        let cy = h - 1 - py as usize;
        grid.set(px as usize, cy, meta.classify(v.0[0]));
    }
    Ok(grid)
}

/// Writes `<stem>.pgm` and `<stem>.yaml` next to each other; returns the YAML path.
pub fn save_map(grid: &OccupancyGrid, yaml: impl AsRef<Path>) -> Result<PathBuf, EnvironmentError> {
    let yaml = yaml.as_ref();
    let pgm = yaml.with_extension("pgm");
    let mut data = vec![0u8; grid.width * grid.height];
    for cy in 0..grid.height {
        for cx in 0..grid.width {
            let row = grid.height - 1 - cy;
            data[row * grid.width + cx] = match grid.cells[grid.index(cx, cy)] {
                Cell::Occupied => OCCUPIED_PIXEL,
                Cell::Free => FREE_PIXEL,
                Cell::Unknown => UNKNOWN_PIXEL,
            };
        }
    }
    write_pgm(&pgm, &data, grid.width, grid.height, ExtendedColorType::L8)?;
    let name = pgm.file_name().unwrap().to_string_lossy();
    let text = format!(
        "image: {name}\nresolution: {:?}\norigin: [{:?}, {:?}, {:?}]\nnegate: 0\noccupied_thresh: {DEFAULT_OCCUPIED_THRESH}\nfree_thresh: {DEFAULT_FREE_THRESH}\n",
        grid.resolution, grid.origin.x, grid.origin.y, grid.origin.yaw
    );
    std::fs::write(yaml, text).map_err(|e| io_err(yaml, e))?;
    Ok(yaml.to_path_buf())
}

fn write_pgm(path: &Path, data: &[u8], w: usize, h: usize, color: ExtendedColorType) -> Result<(), EnvironmentError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    PnmEncoder::new(BufWriter::new(file))
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(data, w as u32, h as u32, color)
        .map_err(|e| EnvironmentError::format("image", format!("{}: {e}", path.display())))
}

/// Loads a heightmap from its YAML metadata file.
pub fn load_heightmap(yaml: impl AsRef<Path>) -> Result<Heightmap, EnvironmentError> {
    let yaml = yaml.as_ref();
    let m = read_yaml(yaml)?;
    let image = image_path(&m, yaml)?;
    let resolution = positive_resolution(&m)?;
    let o = numbers(&m, "origin", 2)?;
    let z_scale = number(&m, "z_scale")?;
    if !(z_scale > 0.0) {
        return Err(EnvironmentError::format("z_scale", "must be positive"));
    }
    let z_offset = optional_number(&m, "z_offset")?.unwrap_or(0.0);
    let img = match decode(&image)? {
        DynamicImage::ImageLuma16(g) => g,
        DynamicImage::ImageLuma8(g) => DynamicImage::ImageLuma8(g).to_luma16(),
        _ => return Err(EnvironmentError::format("image", "expected a grayscale image")),
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut elevation = vec![0.0; w * h];
    for (px, py, v) in img.enumerate_pixels() {
        let j = h - 1 - py as usize;
        elevation[j * w + px as usize] = v.0[0] as f64 * z_scale + z_offset;
    }
    let base = optional_number(&m, "friction")?.unwrap_or(1.0);
    let friction = match m.get("friction_image") {
        None => vec![base; w * h],
        Some(v) => {
            let rel = v
                .as_str()
                .ok_or_else(|| EnvironmentError::format("friction_image", "expected a file name"))?;
            let path = yaml.parent().unwrap_or(Path::new(".")).join(rel);
            let fimg = decode(&path)?.to_luma8();
            if fimg.width() as usize != w || fimg.height() as usize != h {
                return Err(EnvironmentError::format("friction_image", "size differs from the height image"));
            }
            let mut f = vec![0.0; w * h];
            for (px, py, v) in fimg.enumerate_pixels() {
                f[(h - 1 - py as usize) * w + px as usize] = v.0[0] as f64 / 100.0;
            }
            f
        }
    };
    Heightmap::new(w, h, resolution, [o[0], o[1]], elevation, friction)
}

/// Writes a heightmap as 16-bit PGM plus YAML, quantizing elevations to
/// `z_scale` steps above the minimum elevation.
pub fn save_heightmap(hm: &Heightmap, yaml: impl AsRef<Path>, z_scale: f64) -> Result<PathBuf, EnvironmentError> {
    let yaml = yaml.as_ref();
    let pgm = yaml.with_extension("pgm");
    let (z_lo, _) = hm.min_max();
    let mut samples = vec![0u16; hm.width * hm.height];
    for j in 0..hm.height {
        for i in 0..hm.width {
            let q = ((hm.elevation[j * hm.width + i] - z_lo) / z_scale).round();
            if q > u16::MAX as f64 {
                return Err(EnvironmentError::format("z_scale", "elevation range exceeds 16 bits at this scale"));
            }
            samples[(hm.height - 1 - j) * hm.width + i] = q as u16;
        }
    }
    // the pnm encoder has no 16-bit path; binary PGM with maxval > 255 is big-endian
    let mut bytes = format!("P5\n{} {}\n65535\n", hm.width, hm.height).into_bytes();
    bytes.extend(samples.iter().flat_map(|s| s.to_be_bytes()));
    std::fs::write(&pgm, bytes).map_err(|e| io_err(&pgm, e))?;
    let name = pgm.file_name().unwrap().to_string_lossy();
    let mut text = format!(
        "image: {name}\nresolution: {:?}\norigin: [{:?}, {:?}]\nz_scale: {:?}\nz_offset: {:?}\n",
        hm.resolution, hm.origin[0], hm.origin[1], z_scale, z_lo
    );
    let uniform = hm.friction.iter().all(|f| *f == hm.friction[0]);
    if uniform {
        text.push_str(&format!("friction: {:?}\n", hm.friction[0]));
    } else {
        let fpath = yaml.with_extension("friction.pgm");
        let mut f = vec![0u8; hm.width * hm.height];
        for j in 0..hm.height {
            for i in 0..hm.width {
                f[(hm.height - 1 - j) * hm.width + i] = (hm.friction[j * hm.width + i] * 100.0).round().clamp(1.0, 200.0) as u8;
            }
        }
        write_pgm(&fpath, &f, hm.width, hm.height, ExtendedColorType::L8)?;
        text.push_str(&format!("friction_image: {}\n", fpath.file_name().unwrap().to_string_lossy()));
    }
    std::fs::write(yaml, text).map_err(|e| io_err(yaml, e))?;
    Ok(yaml.to_path_buf())
}
