use super::FlowError;

/// Grayscale image with values in `[0, 1]`, row-major, row 0 at the smallest
/// physical `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Image { width, height, data: vec![0.0; width * height] }
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Image { width, height, data: vec![value; width * height] }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Copy translated by whole pixels, `out(x + dx, y + dy) = self(x, y)`;
    /// uncovered pixels take `fill`.
    pub fn translated(&self, dx: i64, dy: i64, fill: f32) -> Self {
        let mut out = Image::filled(self.width, self.height, fill);
        for y in 0..self.height as i64 {
            let sy = y - dy;
            if sy < 0 || sy >= self.height as i64 {
                continue;
            }
            for x in 0..self.width as i64 {
                let sx = x - dx;
                if sx >= 0 && sx < self.width as i64 {
                    out.data[(y as usize) * self.width + x as usize] = self.data[sy as usize * self.width + sx as usize];
                }
            }
        }
        out
    }

    /// Half-resolution copy by 2×2 averaging (odd trailing row/column dropped).
    pub fn half(&self) -> Self {
        let (w, h) = (self.width / 2, self.height / 2);
        let mut out = Image::new(w, h);
        for y in 0..h {
            let (r0, r1) = (2 * y * self.width, (2 * y + 1) * self.width);
            for x in 0..w {
                let s = self.data[r0 + 2 * x] + self.data[r0 + 2 * x + 1] + self.data[r1 + 2 * x] + self.data[r1 + 2 * x + 1];
                out.data[y * w + x] = 0.25 * s;
            }
        }
        out
    }

    /// 8-bit quantization, rows flipped so that `+y` points up on screen.
    pub fn to_gray8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len());
        for y in (0..self.height).rev() {
            for x in 0..self.width {
                out.push((self.at(x, y).clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        out
    }
}

/// Two exposures of the same field of view, taken at `t0` and `t0 + dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePair {
    pub first: Image,
    pub second: Image,
    pub t0: f64,
    pub dt: f64,
}

impl ImagePair {
    pub fn new(first: Image, second: Image, t0: f64, dt: f64) -> Result<Self, FlowError> {
        if (first.width, first.height) != (second.width, second.height) {
            return Err(FlowError::SizeMismatch(first.width, first.height, second.width, second.height));
        }
        if !(dt > 0.0) {
            return Err(FlowError::BadInterval(dt));
        }
        Ok(ImagePair { first, second, t0, dt })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_averages_blocks() {
        let img = Image { width: 4, height: 2, data: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0] };
        let h = img.half();
        assert_eq!((h.width, h.height), (2, 1));
        assert_eq!(h.data, vec![2.5, 4.5]);
    }

    #[test]
    fn translation_moves_content() {
        let mut img = Image::new(5, 5);
        img.data[2 * 5 + 1] = 1.0;
        let t = img.translated(2, -1, 0.0);
        assert_eq!(t.at(3, 1), 1.0);
        assert_eq!(t.data.iter().sum::<f32>(), 1.0);
    }

    #[test]
    fn pair_rejects_mismatch_and_bad_interval() {
        let a = Image::new(4, 4);
        assert!(matches!(ImagePair::new(a.clone(), Image::new(4, 5), 0.0, 0.1), Err(FlowError::SizeMismatch(..))));
        assert!(matches!(ImagePair::new(a.clone(), a, 0.0, 0.0), Err(FlowError::BadInterval(_))));
    }
}
