//! Screens, tilings, and the on-disk screen fixture format.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScreenError {
    #[error("pixel buffer holds {actual} bytes, expected {expected}")]
    PixelBufferSize { expected: usize, actual: usize },
    #[error("color {color} out of range for palette of {palette}")]
    ColorOutOfRange { color: u8, palette: u16 },
    #[error("screen is {actual_w}x{actual_h}, expected {expected_w}x{expected_h}")]
    DimensionMismatch {
        expected_w: u32,
        expected_h: u32,
        actual_w: u32,
        actual_h: u32,
    },
    #[error("tiling {tile_cols}x{tile_rows} tiles of {tile_w}x{tile_h} px does not cover a {width}x{height} screen")]
    InvalidTiling {
        tile_cols: u32,
        tile_rows: u32,
        tile_w: u32,
        tile_h: u32,
        width: u32,
        height: u32,
    },
    #[error("fixture file has bad magic (expected PPSF)")]
    BadMagic,
    #[error("fixture format version {0} unsupported (expected 1)")]
    UnsupportedVersion(u16),
    #[error("fixture screen count {0} invalid (expected 1 or 2)")]
    BadScreenCount(u8),
    #[error("fixture io: {0}")]
    Io(#[from] io::Error),
}

/// A screen: row-major grid of color ids, each below `palette_size`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Screen {
    width: u32,
    height: u32,
    palette_size: u16,
    pixels: Vec<u8>,
}

impl Screen {
    pub fn new(
        width: u32,
        height: u32,
        palette_size: u16,
        pixels: Vec<u8>,
    ) -> Result<Self, ScreenError> {
        let expected = (width as usize) * (height as usize);
        if pixels.len() != expected {
            return Err(ScreenError::PixelBufferSize {
                expected,
                actual: pixels.len(),
            });
        }
        if let Some(&c) = pixels.iter().find(|&&c| c as u16 >= palette_size) {
            return Err(ScreenError::ColorOutOfRange {
                color: c,
                palette: palette_size,
            });
        }
        Ok(Self {
            width,
            height,
            palette_size,
            pixels,
        })
    }

    /// Uniform screen of one color.
    pub fn filled(width: u32, height: u32, palette_size: u16, color: u8) -> Self {
        Self::new(
            width,
            height,
            palette_size,
            vec![color; (width * height) as usize],
        )
        .expect("uniform screen is valid")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn palette_size(&self) -> u16 {
        self.palette_size
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn same_dims(&self, other: &Screen) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Partition of a screen into a grid of disjoint tiles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TilingConfig {
    pub tile_cols: u32,
    pub tile_rows: u32,
    pub tile_w: u32,
    pub tile_h: u32,
}

impl TilingConfig {
    pub fn new(tile_cols: u32, tile_rows: u32, tile_w: u32, tile_h: u32) -> Self {
        Self {
            tile_cols,
            tile_rows,
            tile_w,
            tile_h,
        }
    }

    /// The Atari configuration: 16×14 tiles of 10×15 pixels over a
    /// 160×210 screen.
    pub const fn atari() -> Self {
        Self {
            tile_cols: 16,
            tile_rows: 14,
            tile_w: 10,
            tile_h: 15,
        }
    }

    /// One tile per pixel; the natural choice for tiny toy screens.
    pub fn per_pixel(width: u32, height: u32) -> Self {
        Self {
            tile_cols: width,
            tile_rows: height,
            tile_w: 1,
            tile_h: 1,
        }
    }

    /// Default tiling for a screen: the Atari tiling for Atari-sized
    /// screens, per-pixel tiles otherwise.
    pub fn for_screen(width: u32, height: u32) -> Self {
        if (width, height) == (160, 210) {
            Self::atari()
        } else {
            Self::per_pixel(width, height)
        }
    }

    pub fn screen_width(&self) -> u32 {
        self.tile_cols * self.tile_w
    }

    pub fn screen_height(&self) -> u32 {
        self.tile_rows * self.tile_h
    }

    pub fn check_screen(&self, screen: &Screen) -> Result<(), ScreenError> {
        if screen.width() != self.screen_width() || screen.height() != self.screen_height() {
            return Err(ScreenError::DimensionMismatch {
                expected_w: self.screen_width(),
                expected_h: self.screen_height(),
                actual_w: screen.width(),
                actual_h: screen.height(),
            });
        }
        Ok(())
    }

    /// Tile coordinates (col, row) of a pixel.
    pub fn tile_of(&self, x: u32, y: u32) -> (u32, u32) {
        (x / self.tile_w, y / self.tile_h)
    }
}

const FIXTURE_MAGIC: &[u8; 4] = b"PPSF";
const FIXTURE_VERSION: u16 = 1;

/// Writes a screen fixture: magic `PPSF`, version u16, width u32,
/// height u32, palette u16, screen count u8 (1 or 2), one reserved zero
/// byte, then the row-major pixel grids (previous screen first when a
/// pair is stored). All integers little-endian.
pub fn write_fixture(
    path: &Path,
    prev: Option<&Screen>,
    cur: &Screen,
) -> Result<(), ScreenError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(FIXTURE_MAGIC);
    buf.extend_from_slice(&FIXTURE_VERSION.to_le_bytes());
    buf.extend_from_slice(&cur.width().to_le_bytes());
    buf.extend_from_slice(&cur.height().to_le_bytes());
    buf.extend_from_slice(&cur.palette_size().to_le_bytes());
    buf.push(if prev.is_some() { 2 } else { 1 });
    buf.push(0);
    if let Some(p) = prev {
        if !p.same_dims(cur) || p.palette_size() != cur.palette_size() {
            return Err(ScreenError::DimensionMismatch {
                expected_w: cur.width(),
                expected_h: cur.height(),
                actual_w: p.width(),
                actual_h: p.height(),
            });
        }
        buf.extend_from_slice(p.pixels());
    }
    buf.extend_from_slice(cur.pixels());
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Reads a screen fixture written by [`write_fixture`]. Returns the
/// previous screen (if the fixture stores a pair) and the current one.
pub fn read_fixture(path: &Path) -> Result<(Option<Screen>, Screen), ScreenError> {
    let mut file = fs::File::open(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    let take = |off: usize, len: usize| -> Result<&[u8], ScreenError> {
        bytes
            .get(off..off + len)
            .ok_or_else(|| ScreenError::Io(io::Error::from(io::ErrorKind::UnexpectedEof)))
    };
    if take(0, 4)? != FIXTURE_MAGIC {
        return Err(ScreenError::BadMagic);
    }
    let version = u16::from_le_bytes(take(4, 2)?.try_into().unwrap());
    if version != FIXTURE_VERSION {
        return Err(ScreenError::UnsupportedVersion(version));
    }
    let width = u32::from_le_bytes(take(6, 4)?.try_into().unwrap());
    let height = u32::from_le_bytes(take(10, 4)?.try_into().unwrap());
    let palette = u16::from_le_bytes(take(14, 2)?.try_into().unwrap());
    let count = take(16, 1)?[0];
    if count != 1 && count != 2 {
        return Err(ScreenError::BadScreenCount(count));
    }
    let grid = (width as usize) * (height as usize);
    let mut off = 18;
    let mut screens = Vec::new();
    for _ in 0..count {
        let pixels = take(off, grid)?.to_vec();
        screens.push(Screen::new(width, height, palette, pixels)?);
        off += grid;
    }
    let cur = screens.pop().expect("at least one screen");
    Ok((screens.pop(), cur))
}
