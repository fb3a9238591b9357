use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major image with 1 (gray) or 3 (RGB) channels, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> Image<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image must have nonzero width and height"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "{}x{}x{} image needs {} values, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !(*v >= T::zero() && *v <= T::one())) {
            return Err(Error::invalid("image values must lie in [0, 1]"));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Result<Self> {
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

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[T] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, value: &[T]) {
        let i = (y * self.width + x) * self.channels;
        for (c, v) in value.iter().take(self.channels).enumerate() {
            self.data[i + c] = v.max(T::zero()).min(T::one());
        }
    }

    /// Mean over channels.
    pub fn intensity(&self, x: usize, y: usize) -> T {
        let p = self.pixel(x, y);
        p.iter().copied().sum::<T>() / T::from_usize_lossy(self.channels)
    }

    /// Reads a binary PGM (`P5`) or PPM (`P6`).
    pub fn read_pnm(mut reader: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        let mut pos = 0;
        let magic = next_token(&bytes, &mut pos)?;
        let channels = match magic.as_str() {
            "P5" => 1,
            "P6" => 3,
            m => return Err(Error::Data(format!("unsupported PNM magic {m:?}"))),
        };
        let width = parse_num(&next_token(&bytes, &mut pos)?)?;
        let height = parse_num(&next_token(&bytes, &mut pos)?)?;
        let maxval = parse_num(&next_token(&bytes, &mut pos)?)?;
        if maxval == 0 || maxval > 65535 {
            return Err(Error::Data(format!("bad maxval {maxval}")));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let wide = maxval > 255;
        let n = width * height * channels;
        let need = if wide { 2 * n } else { n };
        if bytes.len() < pos + need {
            return Err(Error::Data("truncated PNM raster".into()));
        }
        let raster = &bytes[pos..pos + need];
        let scale = T::from_usize_lossy(maxval);
        let data = if wide {
            raster
                .chunks(2)
                .map(|c| T::from_usize_lossy(((c[0] as usize) << 8) | c[1] as usize).min(scale) / scale)
                .collect()
        } else {
            raster.iter().map(|&b| T::from_usize_lossy(b as usize).min(scale) / scale).collect()
        };
        Self::new(width, height, channels, data)
    }

    /// Writes binary PGM/PPM with maxval 255.
    pub fn write_pnm(&self, mut writer: impl Write) -> Result<()> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        write!(writer, "{magic}\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.data.iter().map(|v| to_byte(*v)).collect();
        writer.write_all(&bytes)?;
        Ok(())
    }
}

fn to_byte<T: Scalar>(v: T) -> u8 {
    (v.to_f64_lossy().clamp(0.0, 1.0) * 255.0).round() as u8
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Data("truncated PNM header".into()));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

fn parse_num(s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Data(format!("bad PNM header number {s:?}")))
}

/// Writes a label map as PGM, one gray level per label. Uses 16-bit
/// samples when there are more than 256 labels.
pub fn write_label_pgm(width: usize, height: usize, labels: &[usize], mut writer: impl Write) -> Result<()> {
    if labels.len() != width * height {
        return Err(Error::invalid("label map size does not match dimensions"));
    }
    let max = labels.iter().copied().max().unwrap_or(0);
    if max <= 255 {
        write!(writer, "P5\n{width} {height}\n255\n")?;
        writer.write_all(&labels.iter().map(|&l| l as u8).collect::<Vec<_>>())?;
    } else if max <= 65535 {
        write!(writer, "P5\n{width} {height}\n65535\n")?;
        for &l in labels {
            writer.write_all(&(l as u16).to_be_bytes())?;
        }
    } else {
        return Err(Error::invalid("too many labels for a PGM label map"));
    }
    Ok(())
}

/// Writes a real-valued map as PGM, min..max stretched to 0..255
/// (a flat map is written as mid gray, or black when it is all zero).
pub fn write_heat_pgm<T: Scalar>(width: usize, height: usize, values: &[T], mut writer: impl Write) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::invalid("heat map size does not match dimensions"));
    }
    let lo = values.iter().fold(T::infinity(), |m, &v| m.min(v));
    let hi = values.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    write!(writer, "P5\n{width} {height}\n255\n")?;
    let bytes: Vec<u8> = values
        .iter()
        .map(|&v| {
            if hi > lo {
                to_byte((v - lo) / (hi - lo))
            } else if hi == T::zero() {
                0
            } else {
                128
            }
        })
        .collect();
    writer.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_images() {
        assert!(Image::<f64>::new(0, 4, 1, vec![]).is_err());
        assert!(Image::<f64>::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(Image::<f64>::new(1, 1, 1, vec![1.5]).is_err());
        assert!(Image::<f64>::new(1, 1, 2, vec![0.0; 2]).is_err());
    }

    #[test]
    fn pnm_round_trip_at_byte_precision() {
        let data: Vec<f64> = (0..12).map(|i| i as f64 / 255.0).collect();
        let img = Image::new(2, 2, 3, data).unwrap();
        let mut buf = Vec::new();
        img.write_pnm(&mut buf).unwrap();
        let back = Image::<f64>::read_pnm(buf.as_slice()).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# comment\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255]);
        let img = Image::<f64>::read_pnm(bytes.as_slice()).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0]);
    }
}
