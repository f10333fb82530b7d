//! 8-bit PNG encode/decode for RGB, RGBA and grayscale rasters.

use std::cell::Cell;
use std::io::{BufRead, Cursor, Read, Seek, SeekFrom};
use std::rc::Rc;

use super::{GrayMap, RgbImage, RgbaImage};
use crate::error::{Error, Result};

/// Anything that can be written as an 8-bit PNG.
pub trait PngImage {
    fn encode_png(&self) -> Result<Vec<u8>>;
}

impl PngImage for RgbImage {
    fn encode_png(&self) -> Result<Vec<u8>> {
        encode_raw(
            self.height(),
            self.width(),
            png::ColorType::Rgb,
            self.as_raw(),
        )
    }
}

impl PngImage for RgbaImage {
    fn encode_png(&self) -> Result<Vec<u8>> {
        encode_raw(
            self.height(),
            self.width(),
            png::ColorType::Rgba,
            self.as_raw(),
        )
    }
}

/// Quantized to 8-bit grey.
impl PngImage for GrayMap {
    fn encode_png(&self) -> Result<Vec<u8>> {
        let (h, w) = self.dims();
        encode_gray(h, w, &self.to_u8())
    }
}

pub fn encode_png<I: PngImage>(image: &I) -> Result<Vec<u8>> {
    image.encode_png()
}

pub fn encode_rgba(image: &RgbaImage) -> Result<Vec<u8>> {
    image.encode_png()
}

/// Encode a single-channel 8-bit buffer.
pub fn encode_gray(height: usize, width: usize, data: &[u8]) -> Result<Vec<u8>> {
    if data.len() != height * width {
        return Err(Error::invalid(
            "gray buffer length does not match dimensions",
        ));
    }
    encode_raw(height, width, png::ColorType::Grayscale, data)
}

fn encode_raw(height: usize, width: usize, color: png::ColorType, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Encode(e.to_string()))?;
        writer
            .write_image_data(data)
            .map_err(|e| Error::Encode(e.to_string()))?;
        writer.finish().map_err(|e| Error::Encode(e.to_string()))?;
    }
    Ok(out)
}

/// A decoded PNG in one of the supported layouts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecodedImage {
    Gray {
        height: usize,
        width: usize,
        data: Vec<u8>,
    },
    Rgb(RgbImage),
    Rgba(RgbaImage),
}

impl DecodedImage {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            DecodedImage::Gray { height, width, .. } => (*height, *width),
            DecodedImage::Rgb(i) => i.dims(),
            DecodedImage::Rgba(i) => i.dims(),
        }
    }

    /// Flatten to RGB (alpha dropped, gray replicated).
    pub fn into_rgb(self) -> RgbImage {
        match self {
            DecodedImage::Rgb(i) => i,
            DecodedImage::Rgba(i) => {
                let (h, w) = i.dims();
                let data = i
                    .as_raw()
                    .chunks_exact(4)
                    .flat_map(|p| [p[0], p[1], p[2]])
                    .collect();
                RgbImage::new(h, w, data).expect("dimensions preserved")
            }
            DecodedImage::Gray {
                height,
                width,
                data,
            } => {
                let data = data.iter().flat_map(|&v| [v, v, v]).collect();
                RgbImage::new(height, width, data).expect("dimensions preserved")
            }
        }
    }

    /// Promote to RGBA (opaque alpha where the source had none).
    pub fn into_rgba(self) -> RgbaImage {
        match self {
            DecodedImage::Rgba(i) => i,
            other => {
                let rgb = other.into_rgb();
                let (h, w) = rgb.dims();
                let data = rgb
                    .as_raw()
                    .chunks_exact(3)
                    .flat_map(|p| [p[0], p[1], p[2], 255])
                    .collect();
                RgbaImage::new(h, w, data).expect("dimensions preserved")
            }
        }
    }

    /// Single-channel view: gray as is, color via the first channel.
    pub fn into_gray(self) -> (usize, usize, Vec<u8>) {
        match self {
            DecodedImage::Gray {
                height,
                width,
                data,
            } => (height, width, data),
            DecodedImage::Rgb(i) => {
                let (h, w) = i.dims();
                (h, w, i.as_raw().iter().step_by(3).copied().collect())
            }
            DecodedImage::Rgba(i) => {
                let (h, w) = i.dims();
                (h, w, i.as_raw().iter().step_by(4).copied().collect())
            }
        }
    }
}

/// Cursor wrapper that remembers the furthest byte the decoder consumed.
struct TrackingReader<'a> {
    inner: Cursor<&'a [u8]>,
    furthest: Rc<Cell<u64>>,
}

impl TrackingReader<'_> {
    fn note(&self) {
        let pos = self.inner.position();
        if pos > self.furthest.get() {
            self.furthest.set(pos);
        }
    }
}

impl Read for TrackingReader<'_> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.note();
        Ok(n)
    }
}

impl BufRead for TrackingReader<'_> {
    fn fill_buf(&mut self) -> std::io::Result<&[u8]> {
        self.inner.fill_buf()
    }

    fn consume(&mut self, amt: usize) {
        self.inner.consume(amt);
        self.note();
    }
}

impl Seek for TrackingReader<'_> {
    fn seek(&mut self, pos: SeekFrom) -> std::io::Result<u64> {
        let p = self.inner.seek(pos)?;
        self.note();
        Ok(p)
    }
}

pub fn decode_png(bytes: &[u8]) -> Result<DecodedImage> {
    let furthest = Rc::new(Cell::new(0u64));
    let reader = TrackingReader {
        inner: Cursor::new(bytes),
        furthest: Rc::clone(&furthest),
    };
    let fail = |e: png::DecodingError| Error::Decode {
        offset: furthest.get() as usize,
        message: e.to_string(),
    };
    let mut decoder = png::Decoder::new(reader);
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(fail)?;
    let size = reader.output_buffer_size().ok_or_else(|| Error::Decode {
        offset: furthest.get() as usize,
        message: "image too large".into(),
    })?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(fail)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Decode {
            offset: 0,
            message: format!("unsupported bit depth {:?}", info.bit_depth),
        });
    }
    buf.truncate(info.buffer_size());
    let (h, w) = (info.height as usize, info.width as usize);
    Ok(match info.color_type {
        png::ColorType::Grayscale => DecodedImage::Gray {
            height: h,
            width: w,
            data: buf,
        },
        png::ColorType::GrayscaleAlpha => {
            let data = buf
                .chunks_exact(2)
                .flat_map(|p| [p[0], p[0], p[0], p[1]])
                .collect();
            DecodedImage::Rgba(RgbaImage::new(h, w, data)?)
        }
        png::ColorType::Rgb => DecodedImage::Rgb(RgbImage::new(h, w, buf)?),
        png::ColorType::Rgba => DecodedImage::Rgba(RgbaImage::new(h, w, buf)?),
        png::ColorType::Indexed => {
            return Err(Error::Decode {
                offset: 0,
                message: "palette image was not expanded".into(),
            })
        }
    })
}
