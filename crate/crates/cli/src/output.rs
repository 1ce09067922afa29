use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::ExtendedColorType;

use crate::error::{io_err, CliError, CliResult};

/// Distinct colours for class indices; wraps after eight classes.
pub const PALETTE: [[u8; 3]; 8] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
];

fn save(path: &Path, buf: &[u8], width: usize, height: usize, color: ExtendedColorType) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    image::save_buffer(path, buf, width as u32, height as u32, color).map_err(|source| CliError::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// 8-bit grayscale image; format from the extension (`.pgm`, `.png`).
pub fn save_gray(path: &Path, gray: &[u8], width: usize, height: usize) -> CliResult<()> {
    save(path, gray, width, height, ExtendedColorType::L8)
}

/// Class indices rendered with [`PALETTE`].
pub fn save_classes(path: &Path, classes: &[u8], width: usize, height: usize) -> CliResult<()> {
    let rgb: Vec<u8> = classes
        .iter()
        .flat_map(|&c| PALETTE[c as usize % PALETTE.len()])
        .collect();
    save(path, &rgb, width, height, ExtendedColorType::Rgb8)
}

/// Row-major little-endian f32 values.
pub fn write_raw_f32(path: &Path, values: &[f64]) -> CliResult<()> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    for &x in values {
        w.write_all(&(x as f32).to_le_bytes()).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

/// Writes `rows` under `header` as CSV.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}
