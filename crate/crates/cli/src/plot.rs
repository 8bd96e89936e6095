//! Minimal bar-chart renderer for the ablation table (PNG, no plotting
//! dependency). Labels use a built-in 3x5 pixel font.

use crate::{AblationRow, CliError};
use std::path::Path;

const W: usize = 520;
const H: usize = 320;
const MARGIN: usize = 40;

const COLORS: [[u8; 3]; 4] = [
    [46, 125, 50],
    [198, 40, 40],
    [21, 101, 192],
    [245, 124, 0],
];

fn glyph(c: char) -> [u8; 5] {
    // 3x5 font rows, low 3 bits per row
    match c {
        'a' => [0b010, 0b101, 0b111, 0b101, 0b101],
        'b' => [0b110, 0b101, 0b110, 0b101, 0b110],
        'f' => [0b111, 0b100, 0b110, 0b100, 0b100],
        'i' => [0b111, 0b010, 0b010, 0b010, 0b111],
        'l' => [0b100, 0b100, 0b100, 0b100, 0b111],
        'n' => [0b101, 0b111, 0b111, 0b101, 0b101],
        'o' => [0b010, 0b101, 0b101, 0b101, 0b010],
        't' => [0b111, 0b010, 0b010, 0b010, 0b010],
        'u' => [0b101, 0b101, 0b101, 0b101, 0b111],
        '0' => [0b111, 0b101, 0b101, 0b101, 0b111],
        '1' => [0b010, 0b110, 0b010, 0b010, 0b111],
        '2' => [0b111, 0b001, 0b111, 0b100, 0b111],
        '3' => [0b111, 0b001, 0b011, 0b001, 0b111],
        '.' => [0b000, 0b000, 0b000, 0b000, 0b010],
        _ => [0; 5],
    }
}

fn draw_text(buf: &mut [u8], x0: usize, y0: usize, text: &str, color: [u8; 3]) {
    let mut x = x0;
    for ch in text.chars() {
        let g = glyph(ch);
        for (dy, row) in g.iter().enumerate() {
            for dx in 0..3 {
                if row & (0b100 >> dx) != 0 {
                    let (px, py) = (x + dx, y0 + dy);
                    if px < W && py < H {
                        let at = (py * W + px) * 3;
                        buf[at..at + 3].copy_from_slice(&color);
                    }
                }
            }
        }
        x += 4;
    }
}

fn fill_rect(buf: &mut [u8], x0: usize, y0: usize, x1: usize, y1: usize, color: [u8; 3]) {
    for y in y0..y1.min(H) {
        for x in x0..x1.min(W) {
            let at = (y * W + x) * 3;
            buf[at..at + 3].copy_from_slice(&color);
        }
    }
}

/// Average single-edit accuracy per variant as a bar chart.
pub fn accuracy_bars(rows: &[AblationRow], path: &Path) -> Result<(), CliError> {
    let mut buf = vec![245u8; W * H * 3];
    let axis = [60u8, 60, 60];
    // axes
    fill_rect(&mut buf, MARGIN, H - MARGIN, W - 10, H - MARGIN + 1, axis);
    fill_rect(&mut buf, MARGIN - 1, 20, MARGIN, H - MARGIN, axis);
    // gridlines at 0.25 steps
    for i in 1..=4 {
        let frac = i as f64 / 4.0;
        let y = H - MARGIN - ((H - MARGIN - 30) as f64 * frac) as usize;
        fill_rect(&mut buf, MARGIN, y, W - 10, y + 1, [210, 210, 210]);
        draw_text(&mut buf, 8, y.saturating_sub(2), &format!("{frac:.2}"), axis);
    }
    let n = rows.len().max(1);
    let span = (W - MARGIN - 20) / n;
    for (i, row) in rows.iter().enumerate() {
        let x0 = MARGIN + i * span + span / 6;
        let x1 = MARGIN + (i + 1) * span - span / 6;
        let value = if row.average.is_finite() { row.average } else { 0.0 };
        let height = ((H - MARGIN - 30) as f64 * value.clamp(0.0, 1.0)) as usize;
        let y0 = H - MARGIN - height;
        fill_rect(&mut buf, x0, y0, x1, H - MARGIN, COLORS[i % COLORS.len()]);
        draw_text(&mut buf, x0, H - MARGIN + 6, &row.variant, axis);
        draw_text(
            &mut buf,
            x0,
            y0.saturating_sub(8),
            &format!("{value:.2}"),
            axis,
        );
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    image::save_buffer(
        path,
        &buf,
        W as u32,
        H as u32,
        image::ExtendedColorType::Rgb8,
    )
    .map_err(|e| CliError::runtime(format!("write plot: {e}")))?;
    Ok(())
}
