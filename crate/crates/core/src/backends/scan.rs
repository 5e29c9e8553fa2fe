//! Template scanner behind the mock detector and recognizer.
//!
//! Ink is any pixel that differs from the background color. Words are found
//! by anchoring a glyph cell on an unclaimed ink pixel (largest scale first)
//! and walking cell by cell left and right while the one-column letter
//! spacing stays clear and the next cell carries ink. Cells whose pattern is
//! not in the font read as [`UNKNOWN_GLYPH`].

use crate::imaging::{BBox, Mask, RasterImage, Rgb};

use super::font::{self, ADVANCE, GLYPH_HEIGHT, GLYPH_WIDTH, UNKNOWN_GLYPH};

pub const MAX_SCALE: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScannedWord {
    pub text: String,
    pub bbox: BBox,
    pub scale: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cell {
    Blank,
    Glyph(char),
    Unknown,
}

struct InkView<'a> {
    image: &'a RasterImage,
    background: Rgb,
    region: BBox,
}

impl InkView<'_> {
    fn ink(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 {
            return false;
        }
        let (x, y) = (x as u32, y as u32);
        self.region.contains_point(x, y) && self.image.get(x, y) != self.background
    }

    fn any_ink(&self, x: i64, y: i64, w: u32, h: u32) -> bool {
        (y..y + h as i64).any(|yy| (x..x + w as i64).any(|xx| self.ink(xx, yy)))
    }

    fn read_cell(&self, x0: i64, y0: i64, s: u32) -> Cell {
        let mut rows = [0u8; 7];
        for row in 0..GLYPH_HEIGHT {
            for col in 0..GLYPH_WIDTH {
                let bx = x0 + (col * s) as i64;
                let by = y0 + (row * s) as i64;
                let first = self.ink(bx, by);
                for dy in 0..s as i64 {
                    for dx in 0..s as i64 {
                        if self.ink(bx + dx, by + dy) != first {
                            // A block mixing ink and background is never a glyph pixel.
                            return Cell::Unknown;
                        }
                    }
                }
                if first {
                    rows[row as usize] |= 1 << (GLYPH_WIDTH - 1 - col);
                }
            }
        }
        if rows.iter().all(|&r| r == 0) {
            return Cell::Blank;
        }
        font::lookup(&rows).map_or(Cell::Unknown, Cell::Glyph)
    }

    fn spacing_clear(&self, x: i64, y0: i64, s: u32) -> bool {
        !self.any_ink(x, y0, s, GLYPH_HEIGHT * s)
    }

    /// Extend from an anchor cell in both directions.
    fn parse_from(&self, x0: i64, y0: i64, s: u32, anchor: char) -> (i64, Vec<Cell>) {
        let step = (ADVANCE * s) as i64;
        let mut cells = vec![Cell::Glyph(anchor)];
        let mut left = x0;
        loop {
            let next = left - step;
            if !self.spacing_clear(left - s as i64, y0, s) {
                break;
            }
            match self.read_cell(next, y0, s) {
                Cell::Blank => break,
                cell => {
                    cells.insert(0, cell);
                    left = next;
                }
            }
        }
        let mut right = x0;
        loop {
            let next = right + step;
            if !self.spacing_clear(right + (GLYPH_WIDTH * s) as i64, y0, s) {
                break;
            }
            match self.read_cell(next, y0, s) {
                Cell::Blank => break,
                cell => {
                    cells.push(cell);
                    right = next;
                }
            }
        }
        (left, cells)
    }

    /// Best word through the seed pixel at the largest scale that yields one.
    fn word_at(&self, x: u32, y: u32) -> Option<ScannedWord> {
        for s in (1..=MAX_SCALE).rev() {
            let mut best: Option<(usize, usize, i64, i64, Vec<Cell>)> = None;
            for row in 0..GLYPH_HEIGHT {
                for col in 0..GLYPH_WIDTH {
                    let x0 = x as i64 - (col * s) as i64;
                    let y0 = y as i64 - (row * s) as i64;
                    if x0 < self.region.left as i64 || y0 < self.region.top as i64 {
                        continue;
                    }
                    let Cell::Glyph(c) = self.read_cell(x0, y0, s) else {
                        continue;
                    };
                    let (left, cells) = self.parse_from(x0, y0, s, c);
                    let known = cells.iter().filter(|c| matches!(c, Cell::Glyph(_))).count();
                    let unknown = cells.len() - known;
                    let better = match &best {
                        None => true,
                        Some((k, u, ..)) => known > *k || (known == *k && unknown < *u),
                    };
                    if better {
                        best = Some((known, unknown, left, y0, cells));
                    }
                }
            }
            if let Some((_, _, left, top, cells)) = best {
                let text = cells
                    .iter()
                    .map(|c| match c {
                        Cell::Glyph(g) => *g,
                        _ => UNKNOWN_GLYPH,
                    })
                    .collect::<String>();
                let (w, h) = font::text_extent(cells.len(), s);
                return Some(ScannedWord {
                    text,
                    bbox: BBox::new(left as u32, top as u32, w, h),
                    scale: s,
                });
            }
        }
        None
    }
}

/// Every word found inside `region`, ordered by (top, left).
pub fn scan_words(image: &RasterImage, background: Rgb, region: BBox) -> Vec<ScannedWord> {
    let region = region.clamp_to(image.width(), image.height());
    let view = InkView {
        image,
        background,
        region,
    };
    let mut claimed = Mask::empty(image.width(), image.height());
    let mut words = Vec::new();
    for y in region.top..region.bottom() {
        for x in region.left..region.right() {
            if claimed.get(x, y) || !view.ink(x as i64, y as i64) {
                continue;
            }
            match view.word_at(x, y) {
                Some(word) => {
                    claimed.add_box(word.bbox);
                    words.push(word);
                }
                None => claimed.add_box(BBox::new(x, y, 1, 1)),
            }
        }
    }
    words.sort_by_key(|w| (w.bbox.top, w.bbox.left));
    words
}

/// True when any pixel of `region` differs from `background`.
pub fn has_ink(image: &RasterImage, background: Rgb, region: BBox) -> bool {
    let r = region.clamp_to(image.width(), image.height());
    (r.top..r.bottom()).any(|y| (r.left..r.right()).any(|x| image.get(x, y) != background))
}
