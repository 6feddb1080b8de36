//! PNG renderings of sweep aggregates.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ImageFormat, Rgb, RgbImage};
use switchnet_core::harness::CellAggregate;

/// Pixels per (alpha, beta) cell.
pub const CELL_PX: u32 = 24;

const MISSING: Rgb<u8> = Rgb([128, 128, 128]);

/// Dark blue through teal to yellow.
fn colormap(t: f64) -> Rgb<u8> {
    let t = t.clamp(0.0, 1.0);
    let stops = [(0.0, [68.0, 1.0, 84.0]), (0.5, [33.0, 145.0, 140.0]), (1.0, [253.0, 231.0, 37.0])];
    let (lo, hi) = if t <= 0.5 { (stops[0], stops[1]) } else { (stops[1], stops[2]) };
    let f = (t - lo.0) / (hi.0 - lo.0);
    let c = |i: usize| (lo.1[i] + f * (hi.1[i] - lo.1[i])).round() as u8;
    Rgb([c(0), c(1), c(2)])
}

fn position(values: &[f64], x: f64) -> Option<usize> {
    values.iter().position(|&v| v == x)
}

/// Mean entropy over the (alpha, beta) plane for one (xi, v) slice: alpha
/// runs left to right, beta top to bottom.
pub fn entropy_map(
    aggs: &[CellAggregate],
    alphas: &[f64],
    betas: &[f64],
    xi: usize,
    v: f64,
    scale: (f64, f64),
) -> RgbImage {
    let mut img = RgbImage::from_pixel(alphas.len() as u32 * CELL_PX, betas.len() as u32 * CELL_PX, MISSING);
    let (lo, hi) = scale;
    for a in aggs.iter().filter(|a| a.xi == xi && a.v == v) {
        let (Some(ci), Some(ri)) = (position(alphas, a.alpha), position(betas, a.beta)) else {
            continue;
        };
        if !a.entropy_mean.is_finite() {
            continue;
        }
        let t = if hi > lo { (a.entropy_mean - lo) / (hi - lo) } else { 0.5 };
        let color = colormap(t);
        for y in 0..CELL_PX {
            for x in 0..CELL_PX {
                img.put_pixel(ci as u32 * CELL_PX + x, ri as u32 * CELL_PX + y, color);
            }
        }
    }
    img
}

/// Scatter of mean entropy (y) against log10 mean energy (x).
pub fn energy_entropy_scatter(aggs: &[CellAggregate]) -> RgbImage {
    const W: u32 = 480;
    const H: u32 = 360;
    const PAD: u32 = 30;
    let mut img = RgbImage::from_pixel(W, H, Rgb([255, 255, 255]));
    for x in PAD..W - PAD {
        img.put_pixel(x, H - PAD, Rgb([0, 0, 0]));
    }
    for y in PAD..H - PAD {
        img.put_pixel(PAD, y, Rgb([0, 0, 0]));
    }
    let pts: Vec<(f64, f64)> = aggs
        .iter()
        .filter(|a| a.energy_mean > 0.0 && a.entropy_mean.is_finite())
        .map(|a| (a.energy_mean.log10(), a.entropy_mean))
        .collect();
    if pts.is_empty() {
        return img;
    }
    let range = |f: fn(&(f64, f64)) -> f64| {
        let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        }
    };
    let (x0, x1) = range(|p| p.0);
    let (y0, y1) = range(|p| p.1);
    let span = (W - 2 * PAD - 6) as f64;
    let vspan = (H - 2 * PAD - 6) as f64;
    for &(x, y) in &pts {
        let px = PAD + 3 + ((x - x0) / (x1 - x0) * span) as u32;
        let py = H - PAD - 3 - ((y - y0) / (y1 - y0) * vspan) as u32;
        for dy in 0..3 {
            for dx in 0..3 {
                img.put_pixel(px + dx - 1, py + dy - 1, Rgb([200, 30, 30]));
            }
        }
    }
    img
}

/// Write one entropy map per (xi, v) and the scatter; returns the files
/// written. Errors are returned for the caller to downgrade to warnings.
pub fn render_all(
    dir: &Path,
    aggs: &[CellAggregate],
    alphas: &[f64],
    betas: &[f64],
    xis: &[usize],
    amplitudes: &[f64],
) -> Result<Vec<PathBuf>, String> {
    let finite: Vec<f64> = aggs.iter().map(|a| a.entropy_mean).filter(|h| h.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut written = Vec::new();
    for &xi in xis {
        for &v in amplitudes {
            let path = dir.join(format!("heatmap_xi{xi}_v{v}.png"));
            save_png(&entropy_map(aggs, alphas, betas, xi, v, (lo, hi)), &path)?;
            written.push(path);
        }
    }
    let path = dir.join("energy_entropy.png");
    save_png(&energy_entropy_scatter(aggs), &path)?;
    written.push(path);
    Ok(written)
}

fn save_png(img: &RgbImage, path: &Path) -> Result<(), String> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png).map_err(|e| format!("{}: {e}", path.display()))?;
    crate::output::write_atomic(path, buf.get_ref()).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agg(alpha: f64, beta: f64, h: f64, e: f64) -> CellAggregate {
        CellAggregate {
            alpha,
            beta,
            xi: 4,
            v: 8.0,
            trials: 1,
            failed: 0,
            entropy_mean: h,
            entropy_std: 0.0,
            energy_mean: e,
            energy_std: 0.0,
            switching_mean: 0.0,
        }
    }

    #[test]
    fn map_spans_configured_axes() {
        let alphas = [1.0, 2.0, 5.0];
        let betas = [1.0, 10.0];
        let aggs = vec![agg(1.0, 1.0, 0.0, 1.0), agg(5.0, 10.0, 1.0, 10.0)];
        let img = entropy_map(&aggs, &alphas, &betas, 4, 8.0, (0.0, 1.0));
        assert_eq!(img.dimensions(), (3 * CELL_PX, 2 * CELL_PX));
        assert_eq!(*img.get_pixel(0, 0), colormap(0.0));
        assert_eq!(*img.get_pixel(2 * CELL_PX, CELL_PX), colormap(1.0));
        assert_eq!(*img.get_pixel(CELL_PX, 0), MISSING);
    }

    #[test]
    fn scatter_handles_single_point() {
        let img = energy_entropy_scatter(&[agg(1.0, 1.0, 0.5, 1e-3)]);
        assert_eq!(img.dimensions(), (480, 360));
    }
}
