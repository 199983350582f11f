//! Tiled preview sheets.

use crate::image::{ImageBuffer, Rgb};

pub const BACKGROUND: Rgb = [0, 0, 0];

/// Tiles up to `rows * cols` images row-major into one sheet.
///
/// Every cell is as large as the largest input; images sit at the top-left
/// of their cell and unused space is black. Extra images are ignored.
pub fn contact_sheet(images: &[ImageBuffer], rows: u32, cols: u32) -> Option<ImageBuffer> {
    if images.is_empty() || rows == 0 || cols == 0 {
        return None;
    }
    let used = &images[..images.len().min((rows * cols) as usize)];
    let cw = used.iter().map(ImageBuffer::width).max()?;
    let ch = used.iter().map(ImageBuffer::height).max()?;
    let mut sheet = ImageBuffer::filled(cw * cols, ch * rows, BACKGROUND);
    for (i, img) in used.iter().enumerate() {
        let (ox, oy) = ((i as u32 % cols) * cw, (i as u32 / cols) * ch);
        for y in 0..img.height() {
            for x in 0..img.width() {
                sheet.set(ox + x, oy + y, img.get(x, y));
            }
        }
    }
    Some(sheet)
}
